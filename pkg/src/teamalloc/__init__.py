"""Task planning and dynamic role allocation for mixed human-robot teams.

A behavior-tree scheduler with custom allocation nodes drives an exact
assignment solver that hands individual or collaborative roles to the agents
of a team, under pluggable cost models and a live accept/reject negotiation
loop for human workers.  Ships with a discrete-event simulator, a benchmark
harness, and an HTTP service for operator consoles.
"""

__version__ = "0.1.0"
