"""Depolarizing noise and counter-based random streams.

Every random stream is a pure function of ``(master_seed, domain, index, path_id)``
through :class:`numpy.random.SeedSequence` spawn keys, so trials can be
evaluated in any order, on any number of workers, with identical results.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .validation import check_probability

__all__ = [
    "DepolarizingParams",
    "SeedPlan",
    "TRIAL_DOMAIN",
    "ENSEMBLE_DOMAIN",
    "derive_stream",
    "sample_depolarizing",
    "sample_depolarizing_uniforms",
]

TRIAL_DOMAIN = 0
ENSEMBLE_DOMAIN = 1


@dataclass(frozen=True)
class DepolarizingParams:
    p: float

    def __post_init__(self):
        object.__setattr__(self, "p", check_probability(self.p, "p"))


@dataclass(frozen=True)
class SeedPlan:
    master_seed: int
    trial_index: int = 0
    domain: int = TRIAL_DOMAIN

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if self.trial_index < 0:
            raise ValueError("trial_index must be non-negative")


def derive_stream(plan: SeedPlan, path_id: int = 0) -> np.random.Generator:
    """Independent generator for ``(master_seed, trial_index, path_id)``."""
    seq = np.random.SeedSequence(
        plan.master_seed, spawn_key=(plan.domain, plan.trial_index, int(path_id))
    )
    return np.random.Generator(np.random.Philox(seq))


def sample_depolarizing_uniforms(u: np.ndarray, p: float) -> np.ndarray:
    """Map uniforms in [0, 1) of shape ``(..., n)`` to symplectic errors ``(..., 2n)``.

    One draw per qubit against the thresholds ``1-p``, ``1-2p/3``, ``1-p/3`` gives
    I, X, Y, Z with probabilities ``1-p, p/3, p/3, p/3``.
    """
    t1, t2, t3 = 1.0 - p, 1.0 - 2.0 * p / 3.0, 1.0 - p / 3.0
    is_x = (u >= t1) & (u < t2)
    is_y = (u >= t2) & (u < t3)
    is_z = u >= t3
    x = (is_x | is_y).astype(np.uint8)
    z = (is_z | is_y).astype(np.uint8)
    return np.concatenate([x, z], axis=-1)


def sample_depolarizing(n: int, params: DepolarizingParams | float, stream: np.random.Generator) -> np.ndarray:
    """One depolarizing error on ``n`` qubits as a symplectic vector of length ``2n``."""
    p = params.p if isinstance(params, DepolarizingParams) else check_probability(params, "p")
    return sample_depolarizing_uniforms(stream.random(n), p)
