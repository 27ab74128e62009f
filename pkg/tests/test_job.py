import json

import pytest

from teamalloc.job import (Group, JobValidationError, job_to_dict, load_job)


def minimal_doc():
    return {
        "name": "mini",
        "workers": [{"id": "h", "type": "human"}, {"id": "r", "type": "robot"}],
        "actions": [
            {"id": "a1", "label": "first", "costs": {"h": 5, "r": 7}},
            {"id": "a2", "collaborative": True,
             "costs": {"h": 4, "r": 6, "h+r": 3}},
        ],
        "structure": {"sequence": ["a1", "a2"]},
    }


def test_assembly_document_shape(assembly_job):
    assert len(assembly_job.actions) == 19
    assert assembly_job.worker_ids == ["h", "r"]
    rows = assembly_job.cost_table()
    assert set(rows) == {"h", "r", "h+r"}
    assert rows["h+r"] == {"a5": 41.0, "a15": 35.0, "a19": 15.0}
    assert assembly_job.collaborative_enabled() == {"a5", "a15", "a19"}
    # the dash convention: no entry means the candidate cannot do it
    assert "a8" not in rows["r"]


def test_empty_document_is_rejected():
    with pytest.raises(JobValidationError):
        load_job({})


def test_unknown_worker_in_costs_is_named():
    doc = minimal_doc()
    doc["actions"][0]["costs"]["w9"] = 3
    with pytest.raises(JobValidationError) as err:
        load_job(doc)
    assert any("w9" in e and "actions[0]" in e for e in err.value.errors)


def test_action_without_candidates_is_rejected():
    doc = minimal_doc()
    doc["actions"][0]["costs"] = {}
    with pytest.raises(JobValidationError) as err:
        load_job(doc)
    assert any("no feasible candidate" in e for e in err.value.errors)


def test_pair_cost_requires_collaborative_flag():
    doc = minimal_doc()
    doc["actions"][0]["costs"]["h+r"] = 4
    with pytest.raises(JobValidationError) as err:
        load_job(doc)
    assert any("not enabled as collaborative" in e for e in err.value.errors)


def test_pair_key_is_canonicalized():
    doc = minimal_doc()
    doc["actions"][1]["costs"] = {"h": 4, "r": 6, "r+h": 3}
    job = load_job(doc)
    assert job.action("a2").costs["h+r"] == 3.0


def test_structure_must_cover_actions_exactly():
    doc = minimal_doc()
    doc["structure"] = {"sequence": ["a1"]}
    with pytest.raises(JobValidationError) as err:
        load_job(doc)
    assert any("never referenced" in e for e in err.value.errors)

    doc["structure"] = {"sequence": ["a1", "a2", "a1"]}
    with pytest.raises(JobValidationError) as err:
        load_job(doc)
    assert any("more than once" in e for e in err.value.errors)

    doc["structure"] = {"sequence": ["a1", "a2", "zz"]}
    with pytest.raises(JobValidationError):
        load_job(doc)


def test_duplicate_ids_rejected():
    doc = minimal_doc()
    doc["actions"].append(dict(doc["actions"][0]))
    with pytest.raises(JobValidationError) as err:
        load_job(doc)
    assert any("duplicate action" in e for e in err.value.errors)


def test_bad_settings_rejected():
    doc = minimal_doc()
    doc["allocation"] = {"mode": "swarm"}
    with pytest.raises(JobValidationError):
        load_job(doc)
    doc = minimal_doc()
    doc["cost_model"] = {"metric": "vibes"}
    with pytest.raises(JobValidationError):
        load_job(doc)


def test_unknown_primitive_rejected():
    doc = minimal_doc()
    doc["actions"][0]["program"] = ["MOVE", "FLY"]
    with pytest.raises(JobValidationError) as err:
        load_job(doc)
    assert any("FLY" in e for e in err.value.errors)


def test_round_trip(tmp_path, assembly_job):
    doc = job_to_dict(assembly_job)
    path = tmp_path / "roundtrip.json"
    path.write_text(json.dumps(doc))
    again = load_job(path)
    assert again.action_ids == assembly_job.action_ids
    assert again.cost_table() == assembly_job.cost_table()
    assert again.structure == assembly_job.structure


def test_group_leaf_actions():
    g = Group("sequence", ["a", Group("parallel", ["b", "c"]), "d"])
    assert g.leaf_actions() == ["a", "b", "c", "d"]


def test_invalid_json_file(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{nope")
    with pytest.raises(JobValidationError) as err:
        load_job(path)
    assert any("invalid JSON" in e for e in err.value.errors)
