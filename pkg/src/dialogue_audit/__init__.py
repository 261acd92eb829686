"""Auditing engine for mental-health support dialogues.

Scores transcripts with two metric families (predictor-backed model metrics
and rubric-based judge metrics), assembles evidence-linked reports, and runs
as a library, CLI (``audit``), and HTTP service.
"""

__version__ = "0.1.0"
