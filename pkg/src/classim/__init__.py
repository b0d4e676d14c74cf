"""Classroom argumentation training simulator.

Rehearse orchestrating mathematical argumentation against a roster of 20
simulated students grounded in transcript-derived profiles, with live
questioning suggestions, annotation verification, and discourse metrics.
"""

__version__ = "0.1.0"
