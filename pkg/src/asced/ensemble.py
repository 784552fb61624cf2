"""Affine subcode ensemble decoding (aSCED).

An ensemble has ``L`` batches.  Batch ``l`` appends ``delta`` splitter rows to
the CSS check matrix (``ceil(delta/2)`` X-type rows after ``H_X`` and
``floor(delta/2)`` Z-type rows after ``H_Z``) and runs ``2**delta`` BP4 paths,
one per assignment ``g`` of the unmeasured splitter syndrome bits.  Path ``d``
(0-based) of batch ``l`` has id ``l * 2**delta + d`` and uses ``g`` = binary
``d``, most significant bit first, X-block bits before Z-block bits.

Optionally each batch decodes on an overcomplete matrix ``H_oc = M H_ext``
whose extra rows are sparse combinations found by randomized information-set
sampling of ``rowspace([H_zeta; A_zeta])``.

A path's final estimate is a candidate iff it reproduces the *measured*
syndrome; the ensemble returns the candidate of least Pauli weight, ties going
to the lowest path id.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from . import gf2
from .bp4 import DEFAULT_CLAMP, Bp4Config, TannerGraph, decode_graph
from .channel import ENSEMBLE_DOMAIN, SeedPlan, derive_stream
from .codes import StabilizerCode, css_check_matrix
from .pauli import pauli_weight, symplectic_gram
from .validation import check_binary_matrix, check_positive_int, check_syndromes

__all__ = [
    "SplitterSet",
    "OvercompleteParams",
    "Batch",
    "EnsembleConfig",
    "EnsembleResult",
    "SplitterBudgetExhausted",
    "AscedDecoder",
    "generate_splitters",
    "build_batch",
    "path_bits",
    "extended_syndrome",
    "select_min_weight",
    "asced_decode",
    "ensemble_to_dict",
    "ensemble_from_dict",
    "ensemble_hash",
]

log = logging.getLogger(__name__)


class SplitterBudgetExhausted(RuntimeError):
    """No valid splitter row was found within the attempt budget."""


@dataclass(frozen=True, eq=False)
class SplitterSet:
    a_x: np.ndarray
    a_z: np.ndarray

    @property
    def delta(self) -> int:
        return self.a_x.shape[0] + self.a_z.shape[0]

    @property
    def n(self) -> int:
        return self.a_x.shape[1]

    def embedded(self) -> np.ndarray:
        """Splitters in F2^{2n}: X rows as ``(r | 0)``, Z rows as ``(0 | r)``, X first."""
        return css_check_matrix(self.a_x, self.a_z)


def _overlaps(block: np.ndarray, row: np.ndarray) -> np.ndarray:
    return block.astype(np.int64) @ row.astype(np.int64)


def generate_splitters(code: StabilizerCode, delta: int, weight: int, stream: np.random.Generator,
                       *, max_overlap: int | None = 1, max_attempts: int = 10_000) -> SplitterSet:
    """Random weight-``weight`` splitter rows for a CSS code.

    Each row is rejection-sampled with a uniform support until (a) its support
    meets every row of its component block (original checks and splitters
    already drawn) in at most ``max_overlap`` positions, and (b) it raises
    ``rank([H; L; splitters])`` by one, i.e. its component in E is nonzero and
    independent of the earlier splitters'.  ``max_overlap=None`` drops (a);
    tiny codes such as the d=2 toric code cannot meet it.

    An odd ``delta`` puts the extra row in the X block.
    """
    if not code.is_css:
        raise ValueError("splitters need a CSS code")
    if delta < 0 or delta > code.n - code.k:
        raise ValueError(f"delta must lie in [0, n-k={code.n - code.k}], got {delta}")
    n = code.n
    if delta and not 2 <= weight <= n:
        raise ValueError(f"splitter weight must lie in [2, {n}], got {weight}")
    n_x, n_z = (delta + 1) // 2, delta // 2
    basis = np.concatenate([code.stabilizer_basis, code.logical_basis])
    target = basis.shape[0]
    blocks = {"x": [code.hx], "z": [code.hz]}
    rows_out = {"x": [], "z": []}
    for kind, count in (("x", n_x), ("z", n_z)):
        for _ in range(count):
            block = np.concatenate(blocks[kind])
            for _attempt in range(max_attempts):
                row = np.zeros(n, dtype=np.uint8)
                row[stream.choice(n, size=weight, replace=False)] = 1
                if max_overlap is not None and _overlaps(block, row).max(initial=0) > max_overlap:
                    continue
                emb = np.zeros(2 * n, dtype=np.uint8)
                emb[(0 if kind == "x" else n) + np.nonzero(row)[0]] = 1
                cand = np.concatenate([basis, emb[None]])
                if gf2.rank(cand) != target + 1:
                    continue
                basis = cand
                target += 1
                blocks[kind].append(row[None])
                rows_out[kind].append(row)
                break
            else:
                raise SplitterBudgetExhausted(
                    f"no valid {kind.upper()}-type splitter of weight {weight} after {max_attempts} attempts"
                )
    a_x = np.array(rows_out["x"], dtype=np.uint8).reshape(n_x, n)
    a_z = np.array(rows_out["z"], dtype=np.uint8).reshape(n_z, n)
    return SplitterSet(a_x, a_z)


@dataclass(frozen=True)
class OvercompleteParams:
    """Target size of the overcomplete matrix.

    ``m_oc`` counts all rows (identity block included) unless ``per_component``
    is set, in which case it is the row count of each of the X and Z blocks.
    """

    m_oc: int
    max_row_weight: int
    search_budget: int = 200
    per_component: bool = False


@dataclass(frozen=True, eq=False)
class Batch:
    """One ensemble batch.

    ``h_ext`` rows are ordered ``H_X, A_X, H_Z, A_Z``.  ``measured_rows`` and
    ``virtual_rows`` index into ``h_ext``.  When overcomplete, ``h_oc = m_map h_ext``
    and the top ``m + delta`` rows of ``m_map`` are the identity.
    """

    h_ext: np.ndarray
    splitters: SplitterSet
    m_x: int
    h_oc: np.ndarray | None = None
    m_map: np.ndarray | None = None
    shortfall: int = 0

    @property
    def delta(self) -> int:
        return self.splitters.delta

    @property
    def measured_rows(self) -> np.ndarray:
        dx = self.splitters.a_x.shape[0]
        m_total = self.h_ext.shape[0] - self.delta
        return np.r_[np.arange(self.m_x), np.arange(self.m_x + dx, dx + m_total)]

    @property
    def virtual_rows(self) -> np.ndarray:
        dx = self.splitters.a_x.shape[0]
        m_total = self.h_ext.shape[0] - self.delta
        return np.r_[np.arange(self.m_x, self.m_x + dx), np.arange(dx + m_total, self.h_ext.shape[0])]

    @property
    def working_matrix(self) -> np.ndarray:
        return self.h_oc if self.h_oc is not None else self.h_ext

    def working_syndrome(self, z_ext: np.ndarray) -> np.ndarray:
        if self.m_map is None:
            return z_ext
        return gf2.matmul(z_ext, self.m_map.T)


def _extended_matrix(code: StabilizerCode, splitters: SplitterSet) -> np.ndarray:
    n = code.n
    hx = np.concatenate([code.hx, splitters.a_x])
    hz = np.concatenate([code.hz, splitters.a_z])
    return css_check_matrix(hx.reshape(-1, n), hz.reshape(-1, n))


def _low_weight_rows(gen: np.ndarray, max_weight: int, draws: int, stream: np.random.Generator):
    """Sparse words of ``rowspace(gen)`` with their coefficient vectors over ``gen``'s rows.

    Each draw permutes the columns, row-reduces, and keeps reduced rows and
    pairwise sums of weight at most ``max_weight``.  Words come back in
    discovery order.
    """
    n = gen.shape[1]
    found: dict[bytes, tuple[np.ndarray, np.ndarray]] = {}
    for _ in range(draws):
        perm = stream.permutation(n)
        reduced, piv, transform = gf2.row_reduce(gen[:, perm])
        r = len(piv)
        words = np.empty_like(reduced[:r])
        words[:, perm] = reduced[:r]
        coeffs = transform[:r]
        iu, ju = np.triu_indices(r, k=1)
        all_words = np.concatenate([words, words[iu] ^ words[ju]])
        all_coeffs = np.concatenate([coeffs, coeffs[iu] ^ coeffs[ju]])
        keep = np.nonzero(all_words.sum(axis=1) <= max_weight)[0]
        for t in keep:
            key = np.packbits(all_words[t]).tobytes()
            if key not in found:
                found[key] = (all_words[t], all_coeffs[t])
    return list(found.values())


def build_batch(code: StabilizerCode, splitters: SplitterSet, oc_params: OvercompleteParams | None = None,
                stream: np.random.Generator | None = None) -> Batch:
    """Assemble the extended check matrix and, optionally, its overcomplete version."""
    if splitters.n != code.n:
        raise ValueError("splitters were built for a different block length")
    h_ext = _extended_matrix(code, splitters)
    m_x = code.hx.shape[0]
    expected = gf2.rank(code.h) + splitters.delta
    if gf2.rank(h_ext) != expected:
        raise ValueError("splitters do not raise the rank of H by delta")
    if oc_params is None:
        return Batch(h_ext, splitters, m_x)
    if stream is None:
        raise ValueError("an overcomplete search needs a random stream")

    m_ext = h_ext.shape[0]
    dx = splitters.a_x.shape[0]
    gx = np.concatenate([code.hx, splitters.a_x])
    gz = np.concatenate([code.hz, splitters.a_z])
    idx_x = np.arange(gx.shape[0])
    idx_z = np.arange(gx.shape[0], m_ext)
    if oc_params.per_component:
        need = [max(0, oc_params.m_oc - gx.shape[0]), max(0, oc_params.m_oc - gz.shape[0])]
    else:
        extra = oc_params.m_oc - m_ext
        if extra < 0:
            warnings.warn(f"m_oc={oc_params.m_oc} is below the {m_ext} rows of the extended matrix; "
                          "no redundant rows added", stacklevel=2)
            extra = 0
        need = [(extra + 1) // 2, extra // 2]

    n = code.n
    extra_rows = []
    shortfall = 0
    for comp, (gen, idx, want) in enumerate(((gx, idx_x, need[0]), (gz, idx_z, need[1]))):
        if want == 0:
            continue
        present = {np.packbits(r).tobytes() for r in gen}
        pool = [(w, c) for w, c in _low_weight_rows(gen, oc_params.max_row_weight, oc_params.search_budget, stream)
                if np.packbits(w).tobytes() not in present]
        order = sorted(range(len(pool)), key=lambda t: (int(pool[t][0].sum()), t))
        chosen = order[:want]
        shortfall += want - len(chosen)
        for t in chosen:
            row = np.zeros(m_ext, dtype=np.uint8)
            row[idx] = pool[t][1]
            extra_rows.append(row)
    if shortfall:
        warnings.warn(f"overcomplete search found {shortfall} fewer rows than requested", stacklevel=2)
    m_map = np.concatenate([np.eye(m_ext, dtype=np.uint8), np.array(extra_rows, dtype=np.uint8).reshape(-1, m_ext)])
    h_oc = gf2.matmul(m_map, h_ext)
    if n and h_oc.shape[0] > m_ext:
        weights = pauli_weight(h_oc[m_ext:])
        if weights.max() > oc_params.max_row_weight:
            raise AssertionError("overcomplete row exceeds the weight limit")
    return Batch(h_ext, splitters, m_x, h_oc, m_map, shortfall)


def path_bits(path_index: int, delta: int) -> np.ndarray:
    """Virtual syndrome ``g`` for 0-based path ``path_index``: its binary form, MSB first."""
    if not 0 <= path_index < 2**delta:
        raise ValueError(f"path index {path_index} out of range for delta={delta}")
    return np.array([(path_index >> (delta - 1 - b)) & 1 for b in range(delta)], dtype=np.uint8)


def extended_syndrome(z_measured, g, m_x: int, delta_x: int | None = None) -> np.ndarray:
    """Interleave measured bits and virtual bits as ``(z_X, g_X, z_Z, g_Z)``.

    ``z_measured`` may be a single syndrome or a stack; ``g`` has length delta,
    of which the first ``delta_x`` bits (default ``ceil(delta/2)``) belong to
    the X block.
    """
    z = np.asarray(z_measured, dtype=np.uint8)
    g = np.asarray(g, dtype=np.uint8).ravel()
    delta = g.size
    dx = (delta + 1) // 2 if delta_x is None else delta_x
    if not 0 <= m_x <= z.shape[-1]:
        raise ValueError("m_x exceeds the syndrome length")
    if not 0 <= dx <= delta:
        raise ValueError("delta_x exceeds the number of virtual bits")
    lead = z.shape[:-1]
    gx = np.broadcast_to(g[:dx], lead + (dx,))
    gz = np.broadcast_to(g[dx:], lead + (delta - dx,))
    return np.concatenate([z[..., :m_x], gx, z[..., m_x:], gz], axis=-1)


def select_min_weight(candidates):
    """Pick ``(path_id, estimate)`` of least Pauli weight; ties go to the lowest path id."""
    candidates = list(candidates)
    if not candidates:
        raise ValueError("no candidates: the ensemble found no syndrome-consistent estimate")
    return min(candidates, key=lambda c: (pauli_weight(c[1]), c[0]))


@dataclass(frozen=True)
class EnsembleConfig:
    l_batches: int = 1
    delta: int = 2
    splitter_weight: int = 4
    overcomplete: OvercompleteParams | None = None
    decoder: Bp4Config = field(default_factory=Bp4Config)
    include_plain_path: bool = False
    max_overlap: int | None = 1

    def __post_init__(self):
        check_positive_int(self.l_batches, "l_batches")
        if self.delta < 0 or self.delta % 2:
            raise ValueError(f"delta must be even and non-negative, got {self.delta}")

    @property
    def n_paths(self) -> int:
        return self.l_batches * 2**self.delta + int(self.include_plain_path)


@dataclass(frozen=True, eq=False)
class EnsembleResult:
    """Per-sample ensemble output.

    ``found`` is False for a flagged failure (no candidate), in which case the
    estimate row is zero and ``winning_path`` is -1.
    """

    estimates: np.ndarray
    found: np.ndarray
    winning_path: np.ndarray
    path_converged: np.ndarray
    path_iterations: np.ndarray
    path_estimates: np.ndarray | None = None


def _run_paths(code: StabilizerCode, batches, graphs, plain_graph, zs: np.ndarray, cfg: Bp4Config,
               keep_paths: bool = False) -> EnsembleResult:
    b = zs.shape[0]
    n2 = 2 * code.n
    n_paths = sum(2**bt.delta for bt in batches) + int(plain_graph is not None)
    best = np.zeros((b, n2), dtype=np.uint8)
    best_w = np.full(b, np.iinfo(np.int64).max, dtype=np.int64)
    winner = np.full(b, -1, dtype=np.int64)
    conv_all = np.zeros((b, n_paths), dtype=bool)
    iters_all = np.zeros((b, n_paths), dtype=np.int64)
    paths = np.zeros((b, n_paths, n2), dtype=np.uint8) if keep_paths else None

    def consider(pid, est, conv, iters):
        conv_all[:, pid] = conv
        iters_all[:, pid] = iters
        if keep_paths:
            paths[:, pid] = est
        ok = (symplectic_gram(est, code.h) == zs).all(axis=1)
        w = pauli_weight(est).astype(np.int64)
        better = ok & (w < best_w)
        best[better] = est[better]
        best_w[better] = w[better]
        winner[better] = pid

    pid = 0
    for batch, graph in zip(batches, graphs):
        dx = batch.splitters.a_x.shape[0]
        for d in range(2**batch.delta):
            z_ext = extended_syndrome(zs, path_bits(d, batch.delta), batch.m_x, dx)
            est, conv, iters = decode_graph(graph, batch.working_syndrome(z_ext), cfg)
            consider(pid, est, conv, iters)
            pid += 1
    if plain_graph is not None:
        consider(pid, *decode_graph(plain_graph, zs, cfg))
    return EnsembleResult(best, winner >= 0, winner, conv_all, iters_all, paths)


def asced_decode(code: StabilizerCode, batches, z_measured, cfg: EnsembleConfig):
    """Decode one measured syndrome with a prepared ensemble.

    Returns ``(estimate or None, path_stats)`` where ``path_stats`` lists
    ``(path_id, converged, iterations)`` for every path.
    """
    zs, _ = check_syndromes(z_measured, code.m)
    graphs = [TannerGraph.from_check_matrix(bt.working_matrix) for bt in batches]
    plain = TannerGraph.from_check_matrix(code.h) if cfg.include_plain_path else None
    res = _run_paths(code, batches, graphs, plain, zs[:1], cfg.decoder)
    stats = [(p, bool(res.path_converged[0, p]), int(res.path_iterations[0, p]))
             for p in range(res.path_converged.shape[1])]
    return (res.estimates[0] if res.found[0] else None), stats


class AscedDecoder(BaseEstimator):
    """Ensemble of BP4 paths over splitter-extended (optionally overcomplete) check matrices.

    ``fit(code)`` draws the ensemble once from ``random_state``;
    ``predict(syndromes)`` returns the min-weight syndrome-consistent estimate
    per row (zero rows where no path produced one).  With ``delta=0``,
    ``n_batches=1`` this is stand-alone BP4, or OBP4 when ``moc`` is set.

    Parameters
    ----------
    n_batches : int
        ``L``, the number of batches.
    delta : int
        Splitters per batch (even).
    splitter_weight : int
    max_overlap : int or None
        Support-overlap limit between a splitter and its component block.
    moc : int or None
        Overcomplete row count; ``None`` disables overcomplete matrices.
    max_row_weight : int or None
        Weight limit of redundant rows (required with ``moc``).
    moc_per_component : bool
    search_budget : int
        Information-set draws per component.
    include_plain_path : bool
        Add one extra path decoding on the unmodified ``H``.
    p0, max_iter, clamp, schedule
        BP4 settings.
    random_state : int
        Master seed for splitters and overcomplete rows.
    """

    def __init__(self, n_batches=1, delta=2, splitter_weight=4, max_overlap=1, moc=None,
                 max_row_weight=None, moc_per_component=False, search_budget=200,
                 include_plain_path=False, p0=0.1, max_iter=25, clamp=DEFAULT_CLAMP,
                 schedule="flooding", random_state=0):
        self.n_batches = n_batches
        self.delta = delta
        self.splitter_weight = splitter_weight
        self.max_overlap = max_overlap
        self.moc = moc
        self.max_row_weight = max_row_weight
        self.moc_per_component = moc_per_component
        self.search_budget = search_budget
        self.include_plain_path = include_plain_path
        self.p0 = p0
        self.max_iter = max_iter
        self.clamp = clamp
        self.schedule = schedule
        self.random_state = random_state

    def config(self, p0=None) -> EnsembleConfig:
        oc = None
        if self.moc is not None:
            if self.max_row_weight is None:
                raise ValueError("max_row_weight is required when moc is set")
            oc = OvercompleteParams(self.moc, self.max_row_weight, self.search_budget, self.moc_per_component)
        dec = Bp4Config(self.p0 if p0 is None else p0, self.max_iter, self.clamp, self.schedule)
        return EnsembleConfig(self.n_batches, self.delta, self.splitter_weight, oc, dec,
                              self.include_plain_path, self.max_overlap)

    def fit(self, code: StabilizerCode, y=None, batches=None):
        """Draw (or adopt the given) batches for ``code``."""
        cfg = self.config()
        if cfg.delta > code.n - code.k:
            raise ValueError(f"delta={cfg.delta} exceeds n-k={code.n - code.k}")
        if batches is None:
            batches = []
            for ell in range(cfg.l_batches):
                stream = derive_stream(SeedPlan(int(self.random_state), 0, ENSEMBLE_DOMAIN), ell)
                spl = generate_splitters(code, cfg.delta, cfg.splitter_weight, stream, max_overlap=cfg.max_overlap)
                batches.append(build_batch(code, spl, cfg.overcomplete, stream))
                log.debug("batch %d: %d working rows", ell, batches[-1].working_matrix.shape[0])
        else:
            batches = list(batches)
            if len(batches) != cfg.l_batches or any(b.delta != cfg.delta for b in batches):
                raise ValueError("supplied batches do not match n_batches/delta")
        self.code_ = code
        self.batches_ = batches
        self.graphs_ = [TannerGraph.from_check_matrix(b.working_matrix) for b in batches]
        self.plain_graph_ = TannerGraph.from_check_matrix(code.h) if cfg.include_plain_path else None
        self.n_paths_ = cfg.n_paths
        self.duplicate_batches_ = _count_duplicates(batches)
        self.ensemble_hash_ = ensemble_hash(batches)
        return self

    def _check_fitted(self):
        if not hasattr(self, "batches_"):
            from sklearn.exceptions import NotFittedError

            raise NotFittedError("AscedDecoder is not fitted; call fit(code) first")

    def decode_batch(self, syndromes, p0=None, keep_paths=False) -> EnsembleResult:
        self._check_fitted()
        zs, _ = check_syndromes(syndromes, self.code_.m)
        return _run_paths(self.code_, self.batches_, self.graphs_, self.plain_graph_, zs,
                          self.config(p0).decoder, keep_paths)

    def predict(self, syndromes):
        return self.decode_batch(syndromes).estimates


def _count_duplicates(batches) -> int:
    seen = set()
    dup = 0
    for b in batches:
        key = b.working_matrix.tobytes()
        dup += key in seen
        seen.add(key)
    return dup


def ensemble_to_dict(batches) -> dict:
    out = []
    for b in batches:
        entry = {
            "m_x": int(b.m_x),
            "a_x": gf2.format_matrix(b.splitters.a_x),
            "a_z": gf2.format_matrix(b.splitters.a_z),
            "h_ext": gf2.format_matrix(b.h_ext),
        }
        if b.m_map is not None:
            entry["m_map"] = gf2.format_matrix(b.m_map)
            entry["shortfall"] = int(b.shortfall)
        out.append(entry)
    return {"format": "asced-ensemble/1", "batches": out}


def ensemble_from_dict(data: dict, code: StabilizerCode | None = None) -> list[Batch]:
    if data.get("format") != "asced-ensemble/1":
        raise ValueError("not an ensemble file")
    batches = []
    for entry in data["batches"]:
        spl = SplitterSet(gf2.parse_matrix(entry["a_x"]), gf2.parse_matrix(entry["a_z"]))
        h_ext = gf2.parse_matrix(entry["h_ext"])
        m_map = gf2.parse_matrix(entry["m_map"]) if "m_map" in entry else None
        h_oc = gf2.matmul(m_map, h_ext) if m_map is not None else None
        if code is not None and not np.array_equal(h_ext, _extended_matrix(code, spl)):
            raise ValueError("stored extended matrix does not match the code and splitters")
        batches.append(Batch(h_ext, spl, int(entry["m_x"]), h_oc, m_map, int(entry.get("shortfall", 0))))
    return batches


def ensemble_hash(batches) -> str:
    blob = json.dumps(ensemble_to_dict(batches), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()
