"""degentweb: classify websites as LLM-dominant from per-page detector scores.

The pipeline filters pages down to detector-reliable content (English, long
enough, not boilerplate, passes quality rules), scores each page through a
pluggable detector protocol where lower scores mean more LLM-like, summarizes
each site as the deciles of its page scores, and classifies that vector with
a linear SVM.  Supporting modules cover reproducible sampling, polite
crawling, synthetic-site generation, and longitudinal/monetization analyses.
"""
from __future__ import annotations

__version__ = "0.1.0"
