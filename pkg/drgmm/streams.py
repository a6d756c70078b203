# MIT License
#
# Copyright (c) 2024 drgmm developers
# Project : drgmm, double robust inference for continuous updating GMM
#
# See the LICENSE file at the root of the project for the full license text.

"""Counter based random streams.

A stream is identified by the master seed and an integer key (cell index, replication block, ...), so the draws of a
unit of work never depend on which worker runs it or in which order.
"""

import os

import numpy as np

DEFAULT_SEED = 20240601
SEED_ENV = "DRGMM_SEED"


def default_seed() -> int:
    """Master seed from the DRGMM_SEED environment variable, DEFAULT_SEED otherwise"""
    value = os.environ.get(SEED_ENV)
    if value is None or not value.strip():
        return DEFAULT_SEED
    try:
        return int(value)
    except ValueError:
        from drgmm.errors import InputError

        raise InputError(f"{SEED_ENV} has to be an integer, got {value!r}") from None


def replication_rng(seed: int, *key: int) -> np.random.Generator:
    assert seed >= 0, f"seed has to be non negative, got {seed}"
    assert all(k >= 0 for k in key), f"stream keys have to be non negative, got {key}"
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=tuple(key))))
