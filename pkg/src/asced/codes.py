"""Stabilizer codes: toric and generalized bicycle constructions, logical bases,
and the ``E + S + L`` decomposition of F2^{2n}.

Toric qubit indexing on a ``d x d`` torus with vertices ``(r, c)``:

* horizontal edge ``(r, c) -- (r, c+1)`` is qubit ``r*d + c``
* vertical edge ``(r, c) -- (r+1, c)`` is qubit ``d*d + r*d + c``

X-type rows are vertex stars, Z-type rows are plaquettes, both in row-major
vertex order.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import gf2
from .pauli import symplectic_gram
from .validation import check_binary_matrix, check_positive_int

__all__ = [
    "StabilizerCode",
    "GbSpec",
    "CssReport",
    "build_toric",
    "build_gb",
    "css_check_matrix",
    "validate_css",
    "compute_logical_basis",
    "decompose_error",
    "syndrome",
    "min_distance_bruteforce",
    "load_code_spec",
    "code_from_spec",
    "shipped_specs",
]


@dataclass(frozen=True)
class CssReport:
    violations: list[tuple[int, int]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate_css(hx, hz) -> CssReport:
    """Check the symplectic criterion ``H_X H_Z^T = 0``; list offending row pairs."""
    hx = check_binary_matrix(hx, "hx")
    hz = check_binary_matrix(hz, "hz")
    if hx.shape[1] != hz.shape[1]:
        raise ValueError(f"column mismatch: hx has {hx.shape[1]}, hz has {hz.shape[1]}")
    prod = gf2.matmul(hx, hz.T)
    return CssReport([(int(i), int(j)) for i, j in zip(*np.nonzero(prod))])


def css_check_matrix(hx: np.ndarray, hz: np.ndarray) -> np.ndarray:
    """Block check matrix ``[[H_X, 0], [0, H_Z]]``."""
    n = hx.shape[1]
    top = np.concatenate([hx, np.zeros((hx.shape[0], n), dtype=np.uint8)], axis=1)
    bottom = np.concatenate([np.zeros((hz.shape[0], n), dtype=np.uint8), hz], axis=1)
    return np.concatenate([top, bottom], axis=0)


def syndrome(h, e) -> np.ndarray:
    """Syndrome bits ``<e, h_j>``; ``e`` may be one vector or a stack of rows."""
    h = np.asarray(h, dtype=np.uint8)
    e = np.asarray(e, dtype=np.uint8)
    if e.shape[-1] != h.shape[1]:
        raise ValueError(f"error length {e.shape[-1]} does not match {h.shape[1]} columns")
    out = symplectic_gram(e, h)
    return out[0] if e.ndim == 1 else out


def compute_logical_basis(h) -> np.ndarray:
    """Canonical basis of the normalizer of ``rowspace(h)`` modulo ``rowspace(h)``.

    The symplectic complement is computed as a nullspace, reduced against the
    RREF of ``h`` and put in RREF itself, so the result does not depend on the
    generating set chosen for the stabilizer group.
    """
    h = check_binary_matrix(h, "h")
    if h.shape[1] % 2:
        raise ValueError("check matrix must have an even number of columns")
    n = h.shape[1] // 2
    if h.shape[0] and symplectic_gram(h, h).any():
        raise ValueError("rows of h do not commute pairwise")
    swapped = np.concatenate([h[:, n:], h[:, :n]], axis=1)
    normalizer = gf2.nullspace_basis(swapped) if h.shape[0] else np.eye(2 * n, dtype=np.uint8)
    stab, piv = gf2._rref(h)
    reduced = normalizer.copy()
    for row, c in zip(stab, piv):
        hit = reduced[:, c] == 1
        reduced[hit] ^= row
    logical, _ = gf2._rref(reduced)
    return logical


@dataclass(frozen=True, eq=False)
class StabilizerCode:
    """A stabilizer code with its cached subspace bases.

    ``h`` is the check matrix as given (possibly with redundant rows);
    ``stabilizer_basis`` is its row-reduced basis.  ``k`` is always derived
    from the rank of ``h``.
    """

    h: np.ndarray
    hx: np.ndarray | None = None
    hz: np.ndarray | None = None
    name: str = "code"
    n: int = field(init=False)
    k: int = field(init=False)
    stabilizer_basis: np.ndarray = field(init=False, repr=False)
    logical_basis: np.ndarray = field(init=False, repr=False)
    e_basis: np.ndarray = field(init=False, repr=False)
    _coords: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        h = check_binary_matrix(self.h, "h")
        if h.shape[1] % 2:
            raise ValueError("check matrix must have an even number of columns")
        n = h.shape[1] // 2
        stab, _ = gf2._rref(h)
        logical = compute_logical_basis(h)
        e_basis = gf2.complete_basis(np.concatenate([stab, logical]), 2 * n)
        full = np.concatenate([e_basis, stab, logical])
        reduced, _, transform = gf2.row_reduce(full)
        if not np.array_equal(reduced, np.eye(2 * n, dtype=np.uint8)):
            raise AssertionError("E + S + L bases do not span F2^{2n}")
        set_ = object.__setattr__
        set_(self, "h", h)
        set_(self, "n", n)
        set_(self, "k", n - stab.shape[0])
        set_(self, "stabilizer_basis", stab)
        set_(self, "logical_basis", logical)
        set_(self, "e_basis", e_basis)
        # coordinates of e in the (E, S, L) basis are e @ transform
        set_(self, "_coords", transform)
        self._check_invariants()

    def _check_invariants(self) -> None:
        n, k = self.n, self.k
        if self.logical_basis.shape[0] != 2 * k:
            raise AssertionError("logical basis has wrong dimension")
        if symplectic_gram(self.logical_basis, self.h).any():
            raise AssertionError("logical operators do not commute with the stabilizers")
        if gf2.rank(np.concatenate([self.h, self.logical_basis])) != n + k:
            raise AssertionError("logical operators are not independent of the stabilizers")
        if self.e_basis.shape[0] != n - k:
            raise AssertionError("detectable-error basis has wrong dimension")

    @property
    def is_css(self) -> bool:
        return self.hx is not None and self.hz is not None

    @property
    def m(self) -> int:
        return self.h.shape[0]

    def coordinates(self, e: np.ndarray) -> np.ndarray:
        """Coefficients of ``e`` (1-D or stacked) in the ``(e_basis, stabilizer_basis, logical_basis)`` basis."""
        return gf2.matmul(e, self._coords)

    def __repr__(self) -> str:
        return f"StabilizerCode(name={self.name!r}, n={self.n}, k={self.k}, m={self.m})"

    @classmethod
    def from_css(cls, hx, hz, name: str = "css") -> "StabilizerCode":
        hx = check_binary_matrix(hx, "hx")
        hz = check_binary_matrix(hz, "hz", cols=hx.shape[1])
        report = validate_css(hx, hz)
        if not report:
            raise ValueError(f"H_X H_Z^T != 0 at row pairs {report.violations[:5]}")
        return cls(css_check_matrix(hx, hz), hx, hz, name)


def decompose_error(code: StabilizerCode, e) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Unique split ``e = eps + sigma + lam`` with components in E, S and L."""
    e = np.asarray(e, dtype=np.uint8)
    if e.shape[-1] != 2 * code.n:
        raise ValueError(f"error must have length {2 * code.n}")
    c = code.coordinates(e)
    ne, ns = code.e_basis.shape[0], code.stabilizer_basis.shape[0]
    eps = gf2.matmul(c[..., :ne], code.e_basis)
    sigma = gf2.matmul(c[..., ne:ne + ns], code.stabilizer_basis)
    lam = gf2.matmul(c[..., ne + ns:], code.logical_basis)
    return eps, sigma, lam


def build_toric(d: int) -> StabilizerCode:
    """Toric code ``[[2 d^2, 2, d]]`` on a ``d x d`` torus."""
    d = check_positive_int(d, "d", minimum=2)
    n = 2 * d * d

    def h_edge(r, c):
        return (r % d) * d + (c % d)

    def v_edge(r, c):
        return d * d + (r % d) * d + (c % d)

    hx = np.zeros((d * d, n), dtype=np.uint8)
    hz = np.zeros((d * d, n), dtype=np.uint8)
    for r in range(d):
        for c in range(d):
            row = r * d + c
            for q in (h_edge(r, c), h_edge(r, c - 1), v_edge(r, c), v_edge(r - 1, c)):
                hx[row, q] ^= 1
            for q in (h_edge(r, c), h_edge(r + 1, c), v_edge(r, c), v_edge(r, c + 1)):
                hz[row, q] ^= 1
    return StabilizerCode.from_css(hx, hz, name=f"toric{d}")


@dataclass(frozen=True)
class GbSpec:
    """Generalized bicycle code from circulants ``a(x), b(x)`` over ``F2[x]/(x^ell - 1)``."""

    ell: int
    a_exponents: tuple[int, ...]
    b_exponents: tuple[int, ...]

    def __post_init__(self):
        check_positive_int(self.ell, "ell")
        for label, exps in (("a", self.a_exponents), ("b", self.b_exponents)):
            if not exps:
                raise ValueError(f"{label} exponent list is empty")
            if any(not 0 <= e < self.ell for e in exps):
                raise ValueError(f"{label} exponents must lie in [0, {self.ell})")
        object.__setattr__(self, "a_exponents", tuple(int(e) for e in self.a_exponents))
        object.__setattr__(self, "b_exponents", tuple(int(e) for e in self.b_exponents))


def _circulant(ell: int, exponents) -> np.ndarray:
    m = np.zeros((ell, ell), dtype=np.uint8)
    rows = np.arange(ell)
    for e in exponents:
        m[rows, (rows + e) % ell] ^= 1
    return m


def build_gb(spec: GbSpec) -> StabilizerCode:
    """``H_X = [A | B]``, ``H_Z = [B^T | A^T]``; circulants commute so the CSS criterion holds."""
    a = _circulant(spec.ell, spec.a_exponents)
    b = _circulant(spec.ell, spec.b_exponents)
    hx = np.concatenate([a, b], axis=1)
    hz = np.concatenate([b.T, a.T], axis=1)
    return StabilizerCode.from_css(hx, hz, name=f"gb{2 * spec.ell}")


def min_distance_bruteforce(code: StabilizerCode) -> float:
    """Exhaustive minimum weight of a nontrivial logical; ``inf`` when ``k = 0``.

    Only for ``2n <= 20``.
    """
    n = code.n
    if 2 * n > 20:
        raise ValueError(f"2n = {2 * n} too large for exhaustive search (limit 20)")
    if code.k == 0:
        return math.inf
    weights = 1 << np.arange(2 * n, dtype=np.int64)
    swapped = np.concatenate([code.h[:, n:], code.h[:, :n]], axis=1).astype(np.int64) @ weights
    lswapped = np.concatenate(
        [code.logical_basis[:, n:], code.logical_basis[:, :n]], axis=1
    ).astype(np.int64) @ weights
    v = np.arange(1 << (2 * n), dtype=np.int64)

    def odd(mask):
        return np.bitwise_count(v & mask) & 1

    in_normalizer = np.ones(v.size, dtype=bool)
    for mask in swapped:
        in_normalizer &= odd(mask) == 0
    nontrivial = np.zeros(v.size, dtype=bool)
    for mask in lswapped:
        nontrivial |= odd(mask) == 1
    cand = v[in_normalizer & nontrivial]
    low = (1 << n) - 1
    wt = np.bitwise_count((cand & low) | (cand >> n))
    return int(wt.min())


def _data_dir():
    return resources.files("asced") / "data"


def shipped_specs() -> dict[str, Path]:
    return {p.name[:-5]: Path(str(p)) for p in _data_dir().iterdir() if p.name.endswith(".json")
            and not p.name.startswith("exp_")}


def load_code_spec(source) -> dict:
    """Read a code spec from a dict, a shipped name (``"gb_46_2_9"``) or a JSON path."""
    if isinstance(source, dict):
        return dict(source)
    source = str(source)
    named = shipped_specs()
    if source in named:
        return json.loads(named[source].read_text())
    m = re.fullmatch(r"toric(\d+)", source)
    if m:
        return {"type": "toric", "d": int(m.group(1))}
    return json.loads(Path(source).read_text())


def code_from_spec(source) -> StabilizerCode:
    """Build a code from a spec and enforce its optional ``expect`` block."""
    spec = load_code_spec(source)
    kind = spec.get("type")
    if kind == "toric":
        code = build_toric(spec["d"])
    elif kind == "gb":
        code = build_gb(GbSpec(spec["ell"], tuple(spec["a"]), tuple(spec["b"])))
        if "name" in spec:
            object.__setattr__(code, "name", spec["name"])
    else:
        raise ValueError(f"unknown code type {kind!r}")
    expect = spec.get("expect") or {}
    for key in ("n", "k"):
        if key in expect and expect[key] != getattr(code, key):
            raise ValueError(
                f"code parameter mismatch: expected {key}={expect[key]}, built {key}={getattr(code, key)}"
            )
    return code
