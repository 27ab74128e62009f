"""Branch-and-bound search kernel.

The depth-first search below walks the actions of an instance in order; at
each depth it either binds one candidate to the action or leaves the action
unassigned, maintaining the used-agent bit mask, the count-weight total and
optional budget accumulators.  Admissible lower bounds (precomputed per
suffix) and a capacity check prune the tree; ties on the objective are
resolved by the deterministic preference implemented inline (fewer total
members, then lexicographically smallest sorted pair list).

The function body is nopython-compatible: by default it is compiled with
``numba.njit``; setting ``TEAMALLOC_DISABLE_NUMBA=1`` (or numba's own
``NUMBA_DISABLE_JIT``) selects the plain-Python path.  Both paths execute the
identical statements, so results match bit for bit; the benchmark CLI can
time one against the other.
"""

from __future__ import annotations

import os

import numpy as np

_TRUTHY = {"1", "true", "yes", "on"}


def numba_requested() -> bool:
    if os.environ.get("TEAMALLOC_DISABLE_NUMBA", "").strip().lower() in _TRUTHY:
        return False
    if os.environ.get("NUMBA_DISABLE_JIT", "").strip().lower() in _TRUTHY:
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def _search(cost, weight, mask, msize, quota, n_free,
            order, order_len, bound, suffix_cap, b_use, b_cap):
    """Exact search over assignments.

    Returns ``(status, best_cost, best_choice, nodes)`` where status 0 means
    an optimal assignment was found and 1 means the instance is infeasible.
    ``best_choice[j]`` holds the candidate index for action j, or -1.
    """
    n_actions = cost.shape[1]
    n_budgets = b_cap.shape[0]

    choice = np.full(n_actions, -1, dtype=np.int64)
    best_choice = np.full(n_actions, -1, dtype=np.int64)
    ptr = np.zeros(n_actions + 1, dtype=np.int64)
    spent = np.zeros(n_budgets)

    best_cost = np.inf
    best_found = False
    best_members = np.int64(0)

    acc_cost = 0.0
    units = np.int64(0)
    members = np.int64(0)
    used = np.int64(0)
    free = np.int64(n_free)
    nodes = np.int64(0)

    # scratch buffers for the tie comparison
    cur_c = np.empty(n_actions, dtype=np.int64)
    cur_a = np.empty(n_actions, dtype=np.int64)
    bst_c = np.empty(n_actions, dtype=np.int64)
    bst_a = np.empty(n_actions, dtype=np.int64)

    j = 0
    ptr[0] = 0
    while j >= 0:
        descended = False
        while ptr[j] <= order_len[j]:
            k = ptr[j]
            if k < order_len[j]:
                i = order[j, k]
                # ---- try binding candidate i to action j ----
                if used & mask[i]:
                    ptr[j] += 1
                    continue
                w = weight[i]
                if units + w > quota:
                    ptr[j] += 1
                    continue
                over = False
                for b in range(n_budgets):
                    if spent[b] + b_use[b, i, j] > b_cap[b] + 1e-12:
                        over = True
                        break
                if over:
                    ptr[j] += 1
                    continue
                new_cost = acc_cost + cost[i, j]
                new_units = units + w
                remaining = quota - new_units
                if best_found and new_cost + bound[j + 1, remaining] > best_cost:
                    ptr[j] += 1
                    continue
                if remaining > 0:
                    cap = suffix_cap[j + 1]
                    f = free - msize[i]
                    if cap > f:
                        cap = f
                    if new_units + cap < quota:
                        ptr[j] += 1
                        continue
                nodes += 1
                if remaining == 0:
                    # quota met: the only completion is skipping the rest
                    total_members = members + msize[i]
                    take = False
                    if not best_found or new_cost < best_cost:
                        take = True
                    elif new_cost == best_cost:
                        if total_members < best_members:
                            take = True
                        elif total_members == best_members:
                            # lexicographic compare of sorted (cand, action) pairs
                            n_cur = 0
                            for d in range(j):
                                if choice[d] >= 0:
                                    c = choice[d]
                                    pos = n_cur
                                    while pos > 0 and cur_c[pos - 1] > c:
                                        cur_c[pos] = cur_c[pos - 1]
                                        cur_a[pos] = cur_a[pos - 1]
                                        pos -= 1
                                    cur_c[pos] = c
                                    cur_a[pos] = d
                                    n_cur += 1
                            c = i
                            pos = n_cur
                            while pos > 0 and cur_c[pos - 1] > c:
                                cur_c[pos] = cur_c[pos - 1]
                                cur_a[pos] = cur_a[pos - 1]
                                pos -= 1
                            cur_c[pos] = c
                            cur_a[pos] = j
                            n_cur += 1
                            n_bst = 0
                            for d in range(n_actions):
                                if best_choice[d] >= 0:
                                    c = best_choice[d]
                                    pos = n_bst
                                    while pos > 0 and bst_c[pos - 1] > c:
                                        bst_c[pos] = bst_c[pos - 1]
                                        bst_a[pos] = bst_a[pos - 1]
                                        pos -= 1
                                    bst_c[pos] = c
                                    bst_a[pos] = d
                                    n_bst += 1
                            shorter = n_cur if n_cur < n_bst else n_bst
                            decided = False
                            for d in range(shorter):
                                if cur_c[d] != bst_c[d]:
                                    take = cur_c[d] < bst_c[d]
                                    decided = True
                                    break
                                if cur_a[d] != bst_a[d]:
                                    take = cur_a[d] < bst_a[d]
                                    decided = True
                                    break
                            if not decided:
                                take = n_cur < n_bst
                    if take:
                        best_found = True
                        best_cost = new_cost
                        best_members = total_members
                        for d in range(n_actions):
                            best_choice[d] = -1
                        for d in range(j):
                            best_choice[d] = choice[d]
                        best_choice[j] = i
                    ptr[j] += 1
                    continue
                # descend with candidate i bound
                choice[j] = i
                acc_cost = new_cost
                units = new_units
                members += msize[i]
                used |= mask[i]
                free -= msize[i]
                for b in range(n_budgets):
                    spent[b] += b_use[b, i, j]
                ptr[j] += 1
                j += 1
                ptr[j] = 0
                descended = True
                break
            else:
                # ---- skip option: leave action j unassigned ----
                remaining = quota - units
                viable = True
                if best_found and acc_cost + bound[j + 1, remaining] > best_cost:
                    viable = False
                else:
                    cap = suffix_cap[j + 1]
                    if cap > free:
                        cap = free
                    if units + cap < quota:
                        viable = False
                ptr[j] += 1
                if viable and j + 1 < n_actions:
                    choice[j] = -1
                    j += 1
                    ptr[j] = 0
                    descended = True
                # at the last action, skipping cannot complete the quota
                # (remaining > 0 here), so fall through to backtrack
                break
        if descended:
            continue
        # depth j exhausted: undo and go up
        j -= 1
        if j >= 0:
            i = choice[j]
            if i >= 0:
                acc_cost -= cost[i, j]
                units -= weight[i]
                members -= msize[i]
                used &= ~mask[i]
                free += msize[i]
                for b in range(n_budgets):
                    spent[b] -= b_use[b, i, j]
                choice[j] = -1

    status = 0 if best_found else 1
    return status, best_cost, best_choice, nodes


_kernels: dict[str, object] = {}


def get_search_kernel(mode: str = "auto"):
    """Return the search kernel for ``mode`` in {auto, numba, python}."""
    if mode == "auto":
        mode = "numba" if numba_requested() else "python"
    if mode in _kernels:
        return _kernels[mode]
    if mode == "python":
        _kernels[mode] = _search
    elif mode == "numba":
        import numba
        _kernels[mode] = numba.njit(cache=True)(_search)
    else:
        raise ValueError(f"unknown kernel mode {mode!r}")
    return _kernels[mode]


def active_kernel_name() -> str:
    return "numba" if numba_requested() else "python"


def warm_kernel(mode: str = "auto") -> None:
    """Force compilation ahead of the first real solve (live services)."""
    run = get_search_kernel(mode)
    cost = np.array([[1.0]])
    ones = np.ones(1, dtype=np.int64)
    run(cost, ones, ones, ones, np.int64(1), np.int64(1),
        np.zeros((1, 1), dtype=np.int64), ones,
        np.zeros((2, 2)), np.zeros(2, dtype=np.int64),
        np.zeros((0, 1, 1)), np.zeros(0))
