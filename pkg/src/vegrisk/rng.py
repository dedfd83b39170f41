"""Deterministic per-stage random streams derived from one root seed."""

from __future__ import annotations

import hashlib

import numpy as np


def stage_rng(seed: int, stage: str) -> np.random.Generator:
    """Generator for one named pipeline stage.

    Streams for distinct stage names are independent, so inserting a new
    stage never perturbs the draws of an existing one.
    """
    digest = hashlib.blake2s(stage.encode("utf-8"), digest_size=8).digest()
    key = int.from_bytes(digest, "little")
    return np.random.default_rng(np.random.SeedSequence([seed, key]))
