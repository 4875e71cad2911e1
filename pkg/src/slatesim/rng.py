"""Seed derivation for independent, reproducible random streams.

Every stream is keyed by ``(master seed, phase, index)`` and hashed through
``numpy.random.SeedSequence``, so the order in which episodes run (or the
number of workers running them) cannot change what any one episode draws.
"""
from __future__ import annotations

import numpy as np

PHASES = {"train": 0, "eval": 1, "corpus": 2, "agent": 3, "eval-agent": 4}


def seed_sequence(master: int, phase: str, index: int = 0) -> np.random.SeedSequence:
    if master < 0:
        raise ValueError(f"master seed must be non-negative, got {master}")
    return np.random.SeedSequence([int(master), PHASES[phase], int(index)])


def derive_seed(master: int, phase: str, index: int = 0) -> int:
    """A 63-bit integer seed for the given stream (stable across platforms)."""
    return int(seed_sequence(master, phase, index).generate_state(1, np.uint64)[0] >> np.uint64(1))


def make_rng(master: int, phase: str, index: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed_sequence(master, phase, index)))


def rng_state(rng: np.random.Generator) -> dict:
    return rng.bit_generator.state


def rng_from_state(state: dict) -> np.random.Generator:
    bitgen = getattr(np.random, state["bit_generator"])()
    bitgen.state = state
    return np.random.Generator(bitgen)
