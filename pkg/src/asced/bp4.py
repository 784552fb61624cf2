"""Log-domain refined quaternary belief propagation (BP4) for syndrome decoding.

Every qubit carries an LLR vector ordered ``(X, Z, Y)``; every check sends a
scalar message obtained by quantizing the incoming vector onto the Pauli that
the check applies to that qubit.  The small operator functions here
(:func:`prior_llr`, :func:`quantize`, :func:`cn_update`, :func:`vn_update`,
:func:`hard_decision`) spell out one update each; :func:`decode` and
:class:`Bp4Decoder` run the same updates through a compiled kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from sklearn.base import BaseEstimator

from .validation import check_binary_matrix, check_binary_vector, check_positive_int, check_probability, check_syndromes

__all__ = [
    "PAULI_INDEX",
    "TannerGraph",
    "Bp4Config",
    "DecodeResult",
    "Bp4Decoder",
    "prior_llr",
    "quantize",
    "cn_update",
    "vn_update",
    "hard_decision",
    "decode",
]

# LLR component index per Pauli; also the order of the LLR vector.
PAULI_INDEX = {"X": 0, "Z": 1, "Y": 2}
# 2-bit code x + 2z per Pauli
_CODE = {"I": 0, "X": 1, "Z": 2, "Y": 3}
_CODE_TO_INDEX = np.array([-1, 0, 1, 2])

DEFAULT_CLAMP = 30.0
# LLRs closer than this count as equal in the hard decision, so the X < Y < Z
# tie rule does not depend on floating-point summation order
TIE_TOL = 1e-9


def _anticommutes(a: int, b: int) -> int:
    return ((a & 1) & (b >> 1)) ^ ((a >> 1) & (b & 1))


def prior_llr(p0: float) -> np.ndarray:
    """A-priori LLR vector ``ln((1 - p0) / (p0 / 3))`` for all three Paulis."""
    p0 = check_probability(p0, "p0", open_low=True, open_high=True)
    return np.full(3, math.log(3.0 * (1.0 - p0) / p0))


def _as_code(eta) -> int:
    if isinstance(eta, str):
        code = _CODE.get(eta.upper(), 0)
    else:
        code = int(eta)
    if code not in (1, 2, 3):
        raise ValueError(f"eta must be X, Y or Z, got {eta!r}")
    return code


def quantize(msg, eta, clamp: float = DEFAULT_CLAMP) -> float:
    """Scalar LLR that the qubit commutes with the check's Pauli ``eta``.

    ``ln((1 + e^{-L_eta}) / sum_{zeta != I, eta} e^{-L_zeta})`` clamped to ``+-clamp``.
    """
    msg = np.asarray(msg, dtype=float)
    a = _CODE_TO_INDEX[_as_code(eta)]
    others = [i for i in range(3) if i != a]
    num = np.logaddexp(0.0, -msg[a])
    den = np.logaddexp(-msg[others[0]], -msg[others[1]])
    return float(np.clip(num - den, -clamp, clamp))


def cn_update(incoming, z_bit: int, clamp: float = DEFAULT_CLAMP) -> np.ndarray:
    """Check-node rule ``(-1)^z 2 atanh(prod_{k' != k} tanh(m_k' / 2))`` for every edge.

    The product is taken as a sum of ``log|tanh|`` with separate sign and zero
    bookkeeping so that high-degree checks neither underflow nor divide by zero.
    """
    m = np.asarray(incoming, dtype=float)
    if m.size == 0:
        raise ValueError("check node needs at least one incoming message")
    t = np.tanh(m / 2.0)
    neg = t < 0
    zero = t == 0
    with np.errstate(divide="ignore"):
        logmag = np.where(zero, 0.0, np.log(np.abs(t)))
    total_log = logmag.sum()
    total_neg = int(neg.sum())
    total_zero = int(zero.sum())
    out = np.empty_like(m)
    for k in range(m.size):
        if total_zero - int(zero[k]) > 0:
            out[k] = 0.0
            continue
        mag = math.exp(total_log - logmag[k])
        sign = -1.0 if (total_neg - int(neg[k])) % 2 else 1.0
        if mag >= 1.0:
            val = clamp
        else:
            val = min(2.0 * math.atanh(mag), clamp)
        out[k] = sign * val
    if z_bit:
        out = -out
    return out


def vn_update(prior, incoming, check_labels) -> tuple[np.ndarray, np.ndarray]:
    """Variable-node rule for one qubit.

    Component ``zeta`` sums the messages of the checks whose Pauli anticommutes
    with ``zeta``.  Returns ``(outgoing, posterior)`` where ``outgoing[k]`` leaves
    out check ``k``'s own contribution.
    """
    prior = np.asarray(prior, dtype=float)
    incoming = np.asarray(incoming, dtype=float)
    codes = [_as_code(lab) for lab in check_labels]
    if len(codes) != incoming.size:
        raise ValueError("incoming messages and labels must align")
    contrib = np.zeros((incoming.size, 3))
    for k, (msg, lab) in enumerate(zip(incoming, codes)):
        for zeta, idx in PAULI_INDEX.items():
            if _anticommutes(_CODE[zeta], lab):
                contrib[k, idx] = msg
    posterior = prior + contrib.sum(axis=0)
    return posterior - contrib, posterior


def hard_decision(posteriors) -> np.ndarray:
    """Per qubit: I if every LLR is positive, else the Pauli of smallest LLR (ties X < Y < Z).

    Values within ``TIE_TOL`` of each other (or of zero) are treated as equal.
    """
    post = np.atleast_2d(np.asarray(posteriors, dtype=float))
    n = post.shape[0]
    out = np.zeros(2 * n, dtype=np.uint8)
    for i in range(n):
        lx, lz, ly = post[i]
        if lx > TIE_TOL and lz > TIE_TOL and ly > TIE_TOL:
            continue
        best, val = "X", lx
        if ly < val - TIE_TOL:
            best, val = "Y", ly
        if lz < val - TIE_TOL:
            best = "Z"
        code = _CODE[best]
        out[i] = code & 1
        out[n + i] = code >> 1
    return out


@dataclass(frozen=True, eq=False)
class TannerGraph:
    """Edges of the Tanner graph of ``h``, grouped by check.

    ``edge_label`` holds the check's Pauli on that qubit as ``x + 2z``.
    """

    n: int
    m: int
    edge_check: np.ndarray
    edge_var: np.ndarray
    edge_label: np.ndarray
    check_ptr: np.ndarray

    @classmethod
    def from_check_matrix(cls, h) -> "TannerGraph":
        h = check_binary_matrix(h, "h")
        if h.shape[1] % 2:
            raise ValueError("check matrix must have an even number of columns")
        n = h.shape[1] // 2
        labels = h[:, :n] + 2 * h[:, n:]
        rows, cols = np.nonzero(labels)
        counts = np.bincount(rows, minlength=h.shape[0])
        ptr = np.zeros(h.shape[0] + 1, dtype=np.int64)
        np.cumsum(counts, out=ptr[1:])
        return cls(
            n=n,
            m=h.shape[0],
            edge_check=rows.astype(np.int64),
            edge_var=cols.astype(np.int64),
            edge_label=labels[rows, cols].astype(np.uint8),
            check_ptr=ptr,
        )

    @property
    def n_edges(self) -> int:
        return int(self.edge_var.size)

    def check_neighbors(self, j: int) -> np.ndarray:
        return self.edge_var[self.check_ptr[j]:self.check_ptr[j + 1]]

    def var_neighbors(self, i: int) -> np.ndarray:
        return np.sort(self.edge_check[self.edge_var == i])


@dataclass(frozen=True)
class Bp4Config:
    p0: float = 0.1
    i_max: int = 25
    clamp: float = DEFAULT_CLAMP
    schedule: str = "flooding"

    def __post_init__(self):
        check_probability(self.p0, "p0", high=0.75, open_low=True, open_high=True)
        check_positive_int(self.i_max, "i_max")
        if not 0 < self.clamp <= MAX_CLAMP:
            raise ValueError(f"clamp must lie in (0, {MAX_CLAMP:g}]")
        if self.schedule not in ("flooding", "serial"):
            raise ValueError(f"schedule must be 'flooding' or 'serial', got {self.schedule!r}")


@dataclass(frozen=True, eq=False)
class DecodeResult:
    estimate: np.ndarray
    converged: bool
    iterations_used: int


# ---------------------------------------------------------------------------
# compiled kernel


@njit(cache=True, nogil=True, inline="always")
def _quantized_tanh(l0, l1, l2, a, tmax):
    # tanh(lambda / 2) = (N - D) / (N + D), N = 1 + e^{-L_a}, D = sum of the other two,
    # all terms scaled by e^{s} with s = min(0, L) so no exponent is positive
    if a == 0:
        la, lb, lc = l0, l1, l2
    elif a == 1:
        la, lb, lc = l1, l0, l2
    else:
        la, lb, lc = l2, l0, l1
    s = min(0.0, min(la, min(lb, lc)))
    ei = math.exp(s)
    ea = math.exp(s - la)
    eo = math.exp(s - lb) + math.exp(s - lc)
    t = (ei + ea - eo) / (ei + ea + eo)
    if t > tmax:
        t = tmax
    elif t < -tmax:
        t = -tmax
    return t


@njit(cache=True, nogil=True, inline="always")
def _llr_from_tanh(p, clamp):
    if p >= 1.0:
        return clamp
    if p <= -1.0:
        return -clamp
    v = math.log1p(p) - math.log1p(-p)
    if v > clamp:
        return clamp
    if v < -clamp:
        return -clamp
    return v


@njit(cache=True, nogil=True)
def _hard_decide(post, est):
    for i in range(post.shape[0]):
        lx = post[i, 0]
        lz = post[i, 1]
        ly = post[i, 2]
        if lx > TIE_TOL and lz > TIE_TOL and ly > TIE_TOL:
            est[i] = 0
            continue
        best = 1
        val = lx
        if ly < val - TIE_TOL:
            best = 3
            val = ly
        if lz < val - TIE_TOL:
            best = 2
        est[i] = best


@njit(cache=True, nogil=True)
def _syndrome_ok(est, edge_var, edge_label, check_ptr, z):
    m = check_ptr.size - 1
    for j in range(m):
        par = 0
        for e in range(check_ptr[j], check_ptr[j + 1]):
            a = est[edge_var[e]]
            b = edge_label[e]
            par ^= ((a & 1) & (b >> 1)) ^ ((a >> 1) & (b & 1))
        if par != z[j]:
            return False
    return True


@njit(cache=True, nogil=True)
def _check_messages(e0, e1, zbit, tv, fwd, c2v, clamp):
    deg = e1 - e0
    fwd[0] = 1.0
    for k in range(deg):
        fwd[k + 1] = fwd[k] * tv[k]
    back = -1.0 if zbit else 1.0
    for k in range(deg - 1, -1, -1):
        c2v[e0 + k] = _llr_from_tanh(fwd[k] * back, clamp)
        back *= tv[k]


MAX_CLAMP = 700.0  # exp(clamp) must stay finite


@njit(cache=True, nogil=True)
def _check_ratios(e0, e1, zbit, tv, fwd, ratio, rmax):
    # as _check_messages but in the ratio domain: exp(c2v) = (1 + t) / (1 - t)
    deg = e1 - e0
    fwd[0] = 1.0
    for k in range(deg):
        fwd[k + 1] = fwd[k] * tv[k]
    back = -1.0 if zbit else 1.0
    for k in range(deg - 1, -1, -1):
        t = fwd[k] * back
        if t >= 1.0:
            r = rmax
        elif t <= -1.0:
            r = 1.0 / rmax
        else:
            r = (1.0 + t) / (1.0 - t)
            if r > rmax:
                r = rmax
            elif r * rmax < 1.0:
                r = 1.0 / rmax
        ratio[e0 + k] = r
        back *= tv[k]


@njit(cache=True, nogil=True)
def _decode_kernel(edge_var, edge_label, check_ptr, n, z, prior, i_max, clamp, serial,
                   v2c, c2v, post, tv, fwd, est, ex, ratio, seg_ptr, seg_edges, lsum):
    m = check_ptr.size - 1
    rmax = math.exp(clamp)
    chunk = max(1, int(MAX_CLAMP // clamp))
    n_edges = edge_var.size
    tmax = math.tanh(clamp / 2.0)
    for i in range(n):
        post[i, 0] = prior[0]
        post[i, 1] = prior[1]
        post[i, 2] = prior[2]
    for e in range(n_edges):
        v2c[e, 0] = prior[0]
        v2c[e, 1] = prior[1]
        v2c[e, 2] = prior[2]
        c2v[e] = 0.0
        ratio[e] = 1.0
    _hard_decide(post, est)
    if _syndrome_ok(est, edge_var, edge_label, check_ptr, z):
        return True, 1
    for it in range(1, i_max + 1):
        if serial:
            for j in range(m):
                e0 = check_ptr[j]
                e1 = check_ptr[j + 1]
                for e in range(e0, e1):
                    i = edge_var[e]
                    a = edge_label[e] - 1
                    old = c2v[e]
                    l0 = post[i, 0] - (old if a != 0 else 0.0)
                    l1 = post[i, 1] - (old if a != 1 else 0.0)
                    l2 = post[i, 2] - (old if a != 2 else 0.0)
                    tv[e - e0] = _quantized_tanh(l0, l1, l2, a, tmax)
                for e in range(e0, e1):
                    v2c[e, 0] = c2v[e]  # keep the old message for the posterior update
                _check_messages(e0, e1, z[j], tv, fwd, c2v, clamp)
                for e in range(e0, e1):
                    i = edge_var[e]
                    a = edge_label[e] - 1
                    delta = c2v[e] - v2c[e, 0]
                    for c in range(3):
                        if c != a:
                            post[i, c] += delta
        else:
            # exp(s - v2c_c) = exp(s - post_c) * exp(c2v) for c != a, so one set of
            # shifted exponentials per VN serves all its edges
            for i in range(n):
                sh = min(0.0, min(post[i, 0], min(post[i, 1], post[i, 2])))
                ex[i, 0] = math.exp(sh - post[i, 0])
                ex[i, 1] = math.exp(sh - post[i, 1])
                ex[i, 2] = math.exp(sh - post[i, 2])
                ex[i, 3] = math.exp(sh)
            for j in range(m):
                e0 = check_ptr[j]
                e1 = check_ptr[j + 1]
                for e in range(e0, e1):
                    i = edge_var[e]
                    ea = ex[i, edge_label[e] - 1]
                    eo = (ex[i, 0] + ex[i, 1] + ex[i, 2] - ea) * ratio[e]
                    num = ex[i, 3] + ea
                    t = (num - eo) / (num + eo)
                    if t > tmax:
                        t = tmax
                    elif t < -tmax:
                        t = -tmax
                    tv[e - e0] = t
                _check_ratios(e0, e1, z[j], tv, fwd, ratio, rmax)
            # per VN and label, sum of c2v = log of a product of ratios; chunks of
            # `chunk` factors stay below exp(700) and save most logarithms
            for i in range(n):
                for a in range(3):
                    acc = 0.0
                    q = 1.0
                    cnt = 0
                    for k in range(seg_ptr[3 * i + a], seg_ptr[3 * i + a + 1]):
                        q *= ratio[seg_edges[k]]
                        cnt += 1
                        if cnt == chunk:
                            acc += math.log(q)
                            q = 1.0
                            cnt = 0
                    if cnt:
                        acc += math.log(q)
                    lsum[a] = acc
                s0 = lsum[0]
                s1 = lsum[1]
                s2 = lsum[2]
                # a message on label a feeds the two components other than a
                post[i, 0] = prior[0] + s1 + s2
                post[i, 1] = prior[1] + s0 + s2
                post[i, 2] = prior[2] + s0 + s1
        _hard_decide(post, est)
        if _syndrome_ok(est, edge_var, edge_label, check_ptr, z):
            return True, it
    return False, i_max


@njit(cache=True, nogil=True)
def _decode_batch_kernel(edge_var, edge_label, check_ptr, n, zs, prior, i_max, clamp, serial,
                         est_out, conv_out, iters_out):
    n_edges = edge_var.size
    maxdeg = 1
    for j in range(check_ptr.size - 1):
        maxdeg = max(maxdeg, check_ptr[j + 1] - check_ptr[j])
    v2c = np.empty((n_edges, 3))
    c2v = np.empty(n_edges)
    post = np.empty((n, 3))
    tv = np.empty(maxdeg)
    fwd = np.empty(maxdeg + 1)
    ex = np.empty((n, 4))
    ratio = np.empty(n_edges)
    # edges grouped by (variable, label) for the posterior pass
    seg_key = 3 * edge_var.astype(np.int64) + edge_label - 1
    seg_edges = np.argsort(seg_key, kind="mergesort")
    seg_ptr = np.zeros(3 * n + 1, dtype=np.int64)
    for e in range(n_edges):
        seg_ptr[seg_key[e] + 1] += 1
    for t in range(3 * n):
        seg_ptr[t + 1] += seg_ptr[t]
    lsum = np.empty(3)
    for b in range(zs.shape[0]):
        conv, its = _decode_kernel(edge_var, edge_label, check_ptr, n, zs[b], prior, i_max, clamp,
                                   serial, v2c, c2v, post, tv, fwd, est_out[b], ex, ratio, seg_ptr, seg_edges, lsum)
        conv_out[b] = conv
        iters_out[b] = its


def _codes_to_symplectic(codes: np.ndarray) -> np.ndarray:
    return np.concatenate([codes & 1, codes >> 1], axis=-1).astype(np.uint8)


def decode_graph(graph: TannerGraph, zs: np.ndarray, cfg: Bp4Config):
    """Decode a stack of syndromes on a prepared graph; returns ``(estimates, converged, iterations)``."""
    zs = np.ascontiguousarray(zs, dtype=np.uint8)
    b = zs.shape[0]
    codes = np.zeros((b, graph.n), dtype=np.uint8)
    conv = np.zeros(b, dtype=np.bool_)
    iters = np.zeros(b, dtype=np.int64)
    if b:
        _decode_batch_kernel(graph.edge_var, graph.edge_label, graph.check_ptr, graph.n, zs,
                             prior_llr(cfg.p0), cfg.i_max, float(cfg.clamp),
                             cfg.schedule == "serial", codes, conv, iters)
    return _codes_to_symplectic(codes), conv, iters


def decode(h, z, cfg: Bp4Config) -> DecodeResult:
    """Run BP4 on check matrix ``h`` for the syndrome ``z``.

    Stops as soon as the hard decision reproduces ``z`` (also checked before the
    first iteration) or after ``cfg.i_max`` iterations.
    """
    h = check_binary_matrix(h, "h")
    z = check_binary_vector(z, "z", length=h.shape[0])
    graph = TannerGraph.from_check_matrix(h)
    est, conv, iters = decode_graph(graph, z.reshape(1, -1), cfg)
    return DecodeResult(est[0], bool(conv[0]), int(iters[0]))


class Bp4Decoder(BaseEstimator):
    """BP4 syndrome decoder with the scikit-learn estimator interface.

    ``fit`` takes the working check matrix (``m x 2n``); ``predict`` maps
    syndromes of shape ``(n_samples, m)`` to error estimates ``(n_samples, 2n)``.

    Parameters
    ----------
    p0 : float
        Channel probability used for the a-priori LLRs, in ``(0, 0.75)``.
    max_iter : int
        Iteration limit.
    clamp : float
        Magnitude cap on check messages.
    schedule : {"flooding", "serial"}
    """

    def __init__(self, p0=0.1, max_iter=25, clamp=DEFAULT_CLAMP, schedule="flooding"):
        self.p0 = p0
        self.max_iter = max_iter
        self.clamp = clamp
        self.schedule = schedule

    def _config(self, p0=None) -> Bp4Config:
        return Bp4Config(self.p0 if p0 is None else p0, self.max_iter, self.clamp, self.schedule)

    def fit(self, h, y=None):
        self._config()
        self.check_matrix_ = check_binary_matrix(h, "h")
        self.graph_ = TannerGraph.from_check_matrix(self.check_matrix_)
        self.n_qubits_ = self.graph_.n
        self.n_checks_ = self.graph_.m
        return self

    def _check_fitted(self):
        if not hasattr(self, "graph_"):
            from sklearn.exceptions import NotFittedError

            raise NotFittedError("Bp4Decoder is not fitted; call fit(h) first")

    def decode_batch(self, syndromes, p0=None):
        """Return ``(estimates, converged, iterations)`` for every syndrome row."""
        self._check_fitted()
        zs, _ = check_syndromes(syndromes, self.n_checks_)
        return decode_graph(self.graph_, zs, self._config(p0))

    def decode(self, z, p0=None) -> DecodeResult:
        self._check_fitted()
        z = check_binary_vector(z, "z", length=self.n_checks_)
        est, conv, iters = self.decode_batch(z.reshape(1, -1), p0)
        return DecodeResult(est[0], bool(conv[0]), int(iters[0]))

    def predict(self, syndromes):
        est, _, _ = self.decode_batch(syndromes)
        return est
