"""Toolkit for AMR alignment, oracle parsing and transition-based AMR parsing.

The pipeline: enumerate candidate word-to-concept alignments for each
sentence/graph pair, pick the candidate whose deterministic oracle run
rebuilds the best-scoring graph, then train a greedy transition parser on
the oracle action traces.
"""

__version__ = "0.1.0"
