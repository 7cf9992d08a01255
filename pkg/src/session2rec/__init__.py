"""Session-based recommendation toolkit.

Trains listing embeddings from clickstream sessions (skip-gram with negative
sampling), extrapolates embeddings for cold listings from destination demand,
learns traveler embeddings with a deep averaging network and recurrent
baselines on booking labels, and measures the downstream booking-intent
uplift of those embeddings.
"""

from . import coldstart, corpus, evaluation, neural, skipgram, traveler
from .errors import ConfigError, ParseError

__all__ = [
    "coldstart",
    "corpus",
    "evaluation",
    "neural",
    "skipgram",
    "traveler",
    "ConfigError",
    "ParseError",
]

__version__ = "0.1.0"
