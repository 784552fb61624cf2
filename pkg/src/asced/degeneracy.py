"""Degeneracy sets, decoding outcome classes and splitting verification.

For a code with decomposition ``F2^{2n} = E + S + L`` the degeneracy set
``D(lam, eps) = lam + eps + S`` collects all errors that share a syndrome
(fixed by ``eps``) and a logical class (fixed by ``lam``).  A decoder output
``e_hat`` for true error ``e`` is

* T1S when ``e_hat = e`` exactly,
* T2S when ``e_hat != e`` but ``e + e_hat`` is a stabilizer,
* T1F when no syndrome-consistent estimate was produced (flagged),
* T2F when ``e_hat`` matches the syndrome but differs from ``e`` by a
  nontrivial logical.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import gf2
from .codes import StabilizerCode, syndrome
from .pauli import symplectic_gram
from .validation import check_binary_matrix

__all__ = [
    "OutcomeKind",
    "DecodeOutcome",
    "DegeneracySetId",
    "SplittingReport",
    "logically_equivalent",
    "classify",
    "classify_batch",
    "enumerate_degeneracy_set",
    "verify_splitting",
]

ENUMERATION_LIMIT = 16


class OutcomeKind(enum.IntEnum):
    T1S = 0
    T2S = 1
    T1F = 2
    T2F = 3

    @property
    def is_success(self) -> bool:
        return self in (OutcomeKind.T1S, OutcomeKind.T2S)


@dataclass(frozen=True, eq=False)
class DecodeOutcome:
    """Classified trial; ``estimate`` is None exactly for T1F."""

    kind: OutcomeKind
    estimate: np.ndarray | None = None
    winning_path: int | None = None

    def __post_init__(self):
        if (self.kind == OutcomeKind.T1F) != (self.estimate is None):
            raise ValueError("a flagged failure has no estimate and every other outcome has one")


@dataclass(frozen=True, eq=False)
class DegeneracySetId:
    lam: np.ndarray
    eps: np.ndarray

    @classmethod
    def random(cls, code: StabilizerCode, rng: np.random.Generator) -> "DegeneracySetId":
        """Uniformly random ``(lam, eps)`` from the code's L and E subspaces."""
        cl = rng.integers(0, 2, code.logical_basis.shape[0], dtype=np.uint8)
        ce = rng.integers(0, 2, code.e_basis.shape[0], dtype=np.uint8)
        return cls(gf2.matmul(cl, code.logical_basis), gf2.matmul(ce, code.e_basis))


def logically_equivalent(code: StabilizerCode, e, e_hat, *, cross_check: bool = True) -> bool:
    """True iff ``e + e_hat`` lies in the stabilizer rowspace.

    When the two share a syndrome the rank test is cross-checked against
    commutation with every logical operator; disagreement means the cached
    logical basis is wrong.
    """
    diff = np.asarray(e, dtype=np.uint8) ^ np.asarray(e_hat, dtype=np.uint8)
    if diff.shape != (2 * code.n,):
        raise ValueError(f"both vectors must have length {2 * code.n}")
    in_s = bool(gf2.in_rowspace(code.stabilizer_basis, diff))
    if cross_check and not symplectic_gram(diff, code.h).any():
        commutes = not symplectic_gram(diff, code.logical_basis).any()
        if commutes != in_s:
            raise AssertionError("rank and commutation equivalence tests disagree")
    return in_s


def classify_batch(code: StabilizerCode, errors, estimates, found) -> np.ndarray:
    """Outcome codes for stacked errors and estimates.

    ``found[i]`` is False for a flagged failure.  An estimate reported as found
    must reproduce its error's syndrome.
    """
    errors = np.atleast_2d(np.asarray(errors, dtype=np.uint8))
    estimates = np.atleast_2d(np.asarray(estimates, dtype=np.uint8))
    found = np.asarray(found, dtype=bool).reshape(-1)
    if errors.shape != estimates.shape or found.size != errors.shape[0]:
        raise ValueError("errors, estimates and found must describe the same number of samples")
    diff = errors ^ estimates
    out = np.full(errors.shape[0], OutcomeKind.T1F, dtype=np.int8)
    if found.any():
        if symplectic_gram(diff[found], code.h).any():
            raise ValueError("a found estimate does not reproduce its error's syndrome")
        c = code.coordinates(diff[found])
        ne, ns = code.e_basis.shape[0], code.stabilizer_basis.shape[0]
        logical_part = c[:, ne + ns:].any(axis=1)
        exact = ~diff[found].any(axis=1)
        out[found] = np.where(exact, OutcomeKind.T1S, np.where(logical_part, OutcomeKind.T2F, OutcomeKind.T2S))
    return out


def classify(code: StabilizerCode, e, e_hat, winning_path: int | None = None) -> DecodeOutcome:
    """Outcome for one trial; ``e_hat=None`` means the decoder flagged a failure."""
    e = np.asarray(e, dtype=np.uint8)
    if e_hat is None:
        return DecodeOutcome(OutcomeKind.T1F)
    e_hat = np.asarray(e_hat, dtype=np.uint8)
    if not np.array_equal(syndrome(code.h, e), syndrome(code.h, e_hat)):
        raise ValueError("estimate does not reproduce the syndrome")
    if np.array_equal(e, e_hat):
        kind = OutcomeKind.T1S
    elif logically_equivalent(code, e, e_hat):
        kind = OutcomeKind.T2S
    else:
        kind = OutcomeKind.T2F
    return DecodeOutcome(kind, e_hat, winning_path)


def enumerate_degeneracy_set(code: StabilizerCode, set_id: DegeneracySetId) -> np.ndarray:
    """All ``2^{n-k}`` members of ``lam + eps + S`` (requires ``n - k <= 16``)."""
    r = code.stabilizer_basis.shape[0]
    if r > ENUMERATION_LIMIT:
        raise ValueError(f"n-k = {r} exceeds the enumeration limit {ENUMERATION_LIMIT}")
    coeffs = ((np.arange(2**r)[:, None] >> np.arange(r)[None, :]) & 1).astype(np.uint8)
    members = gf2.matmul(coeffs, code.stabilizer_basis)
    return members ^ (set_id.lam ^ set_id.eps)[None, :]


@dataclass(frozen=True, eq=False)
class SplittingReport:
    """Partition of a degeneracy set by extended syndrome.

    ``counts`` maps every bit pattern ``g`` of splitter products (as a tuple)
    to the size of its subset, zero included.
    """

    counts: dict
    expected_subsets: int
    expected_size: int
    set_size: int

    @property
    def ok(self) -> bool:
        return (
            self.set_size % self.expected_subsets == 0
            and len(self.counts) == self.expected_subsets
            and all(c == self.expected_size for c in self.counts.values())
            and sum(self.counts.values()) == self.set_size
        )


def verify_splitting(code: StabilizerCode, splitters, set_id: DegeneracySetId) -> SplittingReport:
    """Partition ``D(lam, eps)`` by the products of its members with each splitter.

    ``splitters`` is a :class:`~asced.ensemble.SplitterSet` or a matrix of
    splitter rows already embedded in F2^{2n}.  Valid splitters give
    ``2^delta`` subsets of ``2^{n-k-delta}`` members each.
    """
    rows = splitters.embedded() if hasattr(splitters, "embedded") else splitters
    rows = check_binary_matrix(rows, "splitters", cols=2 * code.n)
    delta = rows.shape[0]
    members = enumerate_degeneracy_set(code, set_id)
    weights = 1 << np.arange(delta - 1, -1, -1)
    labels = symplectic_gram(members, rows).astype(np.int64) @ weights if delta else np.zeros(len(members), int)
    sizes = np.bincount(labels, minlength=2**delta)
    counts = {tuple(int(b) for b in format(g, f"0{delta}b")) if delta else (): int(c) for g, c in enumerate(sizes)}
    r = code.stabilizer_basis.shape[0]
    return SplittingReport(counts, 2**delta, 2 ** max(r - delta, 0), members.shape[0])
