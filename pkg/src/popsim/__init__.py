"""Population protocol simulation on the complete graph.

Exact majority (four-state baseline and the clocked O(log^2 n) protocol),
leader election, push-pull broadcast, an exhaustive small-instance checker and
a seeded experiment harness.
"""

__version__ = "0.1.0"
