import numpy as np
import pytest

from session2rec.corpus import Interaction, Session, SessionCorpus


def view(key, ts):
    return Interaction(key, ts, "view")


def book(key, ts):
    return Interaction(key, ts, "book")


def make_session(traveler, events):
    """events: list of (listing_key, timestamp) or (listing_key, ts, kind)."""
    interactions = []
    for ev in events:
        kind = ev[2] if len(ev) > 2 else "view"
        interactions.append(Interaction(ev[0], ev[1], kind))
    return Session(traveler, tuple(interactions))


def make_corpus(session_specs):
    return SessionCorpus(tuple(make_session(t, evs) for t, evs in session_specs))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
