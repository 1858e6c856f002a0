"""Ongoing-event trigger detection laboratory.

Binary token-level trigger classification with pluggable feature providers,
three classifier families, a seeded experiment harness with statistical
reporting, and an active-learning annotation service.
"""

from . import corpus, evalstats, featurize, models, service, synth, trainer

__all__ = [
    "corpus",
    "evalstats",
    "featurize",
    "models",
    "service",
    "synth",
    "trainer",
]

__version__ = "0.1.0"
