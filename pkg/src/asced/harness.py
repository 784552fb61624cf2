"""Monte-Carlo experiment driver.

Trial ``t`` draws its error from a stream keyed by ``(seed, t)``, so the
sampled errors do not depend on chunking or thread count, and every ``p``
reuses the same uniforms (common random numbers).  Trials run in chunks of
``chunk_size``; chunks are reduced strictly in index order and the run stops
after the first chunk at which the logical-error target or the trial cap is
reached.  Results are therefore identical for any number of worker threads.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from statistics import NormalDist

import jsonschema
import numpy as np

from . import __version__
from .channel import SeedPlan, TRIAL_DOMAIN, derive_stream, sample_depolarizing_uniforms
from .codes import StabilizerCode, code_from_spec
from .degeneracy import OutcomeKind, classify_batch
from .ensemble import AscedDecoder, ensemble_from_dict
from .pauli import symplectic_gram
from .validation import check_probability

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "PointStats",
    "CSV_HEADER",
    "wilson_interval",
    "build_decoder",
    "sample_errors",
    "run_point",
    "run_sweep",
    "read_results",
]

log = logging.getLogger(__name__)

CSV_HEADER = ["p", "trials", "t1s", "t2s", "t1f", "t2f", "ler", "ci_low", "ci_high", "t1f_fraction", "seconds"]
DECODERS = ("bp4", "obp4", "bp4-asced", "obp4-asced")

_INT = {"type": "integer"}
_OPT_INT = {"type": ["integer", "null"]}
SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["code", "decoder", "channel"],
    "properties": {
        "name": {"type": "string"},
        "code": {"type": ["string", "object"]},
        "decoder": {"enum": list(DECODERS)},
        "ensemble": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "L": {**_INT, "minimum": 1},
                "delta": {**_INT, "minimum": 0},
                "splitter_weight": {**_INT, "minimum": 2},
                "max_overlap": {**_OPT_INT, "minimum": 0},
                "moc": {**_OPT_INT, "minimum": 1},
                "max_row_weight": {**_OPT_INT, "minimum": 1},
                "moc_per_component": {"type": "boolean"},
                "search_budget": {**_INT, "minimum": 1},
                "include_plain_path": {"type": "boolean"},
                "file": {"type": "string"},
            },
        },
        "bp4": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "p0": {"type": ["number", "null"], "exclusiveMinimum": 0, "exclusiveMaximum": 0.75},
                "i_max": {**_INT, "minimum": 1},
                "clamp": {"type": "number", "exclusiveMinimum": 0},
                "schedule": {"enum": ["flooding", "serial"]},
            },
        },
        "channel": {
            "type": "object",
            "additionalProperties": False,
            "required": ["p_list"],
            "properties": {
                "p_list": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}},
            },
        },
        "mc": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "max_trials": {**_INT, "minimum": 1},
                "target_errors": {**_INT, "minimum": 1},
                "seed": {**_INT, "minimum": 0, "maximum": 2**64 - 1},
                "chunk_size": {**_INT, "minimum": 1},
                "record_timing": {"type": "boolean"},
            },
        },
    },
}


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the offending line when known."""


def _line_of(text: str, path) -> int | None:
    """Best-effort line number of the JSON member at ``path`` in ``text``."""
    if not text:
        return None
    pos = 0
    for key in path:
        if isinstance(key, int):
            continue
        hit = text.find(f'"{key}"', pos)
        if hit < 0:
            break
        pos = hit
    return text.count("\n", 0, pos) + 1 if pos else None


@dataclass(frozen=True)
class ExperimentConfig:
    code: object
    decoder: str = "bp4"
    l_batches: int = 1
    delta: int = 0
    splitter_weight: int = 4
    max_overlap: int | None = 1
    moc: int | None = None
    max_row_weight: int | None = None
    moc_per_component: bool = False
    search_budget: int = 200
    include_plain_path: bool = False
    ensemble_file: str | None = None
    p0: float | None = None
    i_max: int = 25
    clamp: float = 30.0
    schedule: str = "flooding"
    p_list: tuple = ()
    max_trials: int = 1_000_000
    target_errors: int = 400
    seed: int = 0
    chunk_size: int = 256
    record_timing: bool = False
    name: str = "experiment"

    def __post_init__(self):
        if self.decoder not in DECODERS:
            raise ConfigError(f"decoder must be one of {DECODERS}, got {self.decoder!r}")
        if self.target_errors < 1 or self.max_trials < 1 or self.chunk_size < 1:
            raise ConfigError("target_errors, max_trials and chunk_size must be >= 1")
        for p in self.p_list:
            try:
                check_probability(p, "p", open_low=True, open_high=True)
            except (TypeError, ValueError) as exc:
                raise ConfigError(str(exc)) from None
        overcomplete = self.decoder.startswith("obp4")
        if overcomplete and (self.moc is None or self.max_row_weight is None) and self.ensemble_file is None:
            raise ConfigError(f"decoder {self.decoder} needs ensemble.moc and ensemble.max_row_weight")
        if not overcomplete and self.moc is not None:
            raise ConfigError(f"decoder {self.decoder} does not use an overcomplete matrix; drop ensemble.moc")
        if self.decoder.endswith("asced") and self.delta % 2:
            raise ConfigError(f"ensemble.delta must be even, got {self.delta}")
        object.__setattr__(self, "p_list", tuple(float(p) for p in self.p_list))

    @property
    def uses_ensemble(self) -> bool:
        return self.decoder.endswith("asced")

    @classmethod
    def from_dict(cls, data: dict, *, text: str = "", source: str = "<config>") -> "ExperimentConfig":
        validator = jsonschema.Draft202012Validator(SCHEMA)
        err = jsonschema.exceptions.best_match(validator.iter_errors(data))
        if err is not None:
            line = _line_of(text, list(err.absolute_path))
            where = f"{source}:{line}" if line else source
            dotted = ".".join(str(k) for k in err.absolute_path) or "<root>"
            raise ConfigError(f"{where}: {dotted}: {err.message}")
        ens = data.get("ensemble", {})
        bp = data.get("bp4", {})
        mc = data.get("mc", {})
        asced = data["decoder"].endswith("asced")
        kwargs = dict(
            code=data["code"],
            decoder=data["decoder"],
            l_batches=ens.get("L", 1) if asced else 1,
            delta=ens.get("delta", 2) if asced else 0,
            splitter_weight=ens.get("splitter_weight", 4),
            max_overlap=ens.get("max_overlap", 1),
            moc=ens.get("moc"),
            max_row_weight=ens.get("max_row_weight"),
            moc_per_component=ens.get("moc_per_component", False),
            search_budget=ens.get("search_budget", 200),
            include_plain_path=ens.get("include_plain_path", False),
            ensemble_file=ens.get("file"),
            p0=bp.get("p0"),
            i_max=bp.get("i_max", 12 if data["decoder"].startswith("obp4") else 25),
            clamp=bp.get("clamp", 30.0),
            schedule=bp.get("schedule", "flooding"),
            p_list=data["channel"]["p_list"],
            max_trials=mc.get("max_trials", 1_000_000),
            target_errors=mc.get("target_errors", 400),
            seed=mc.get("seed", 0),
            chunk_size=mc.get("chunk_size", 256),
            record_timing=mc.get("record_timing", False),
            name=data.get("name", "experiment"),
        )
        try:
            return cls(**kwargs)
        except ConfigError as exc:
            raise ConfigError(f"{source}: {exc}") from None

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        path = Path(path)
        text = path.read_text()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}: {exc.msg}") from None
        return cls.from_dict(data, text=text, source=str(path))

    def to_dict(self) -> dict:
        """Nested form accepted by :meth:`from_dict`."""
        ens = {
            "L": self.l_batches, "delta": self.delta, "splitter_weight": self.splitter_weight,
            "max_overlap": self.max_overlap, "moc": self.moc, "max_row_weight": self.max_row_weight,
            "moc_per_component": self.moc_per_component, "search_budget": self.search_budget,
            "include_plain_path": self.include_plain_path,
        }
        if self.ensemble_file is not None:
            ens["file"] = self.ensemble_file
        return {
            "name": self.name,
            "code": self.code,
            "decoder": self.decoder,
            "ensemble": ens,
            "bp4": {"p0": self.p0, "i_max": self.i_max, "clamp": self.clamp, "schedule": self.schedule},
            "channel": {"p_list": list(self.p_list)},
            "mc": {"max_trials": self.max_trials, "target_errors": self.target_errors, "seed": self.seed,
                   "chunk_size": self.chunk_size, "record_timing": self.record_timing},
        }

    def p0_for(self, p: float) -> float:
        """Decoder initialization probability at channel ``p`` (``p`` itself when unset)."""
        p0 = self.p0 if self.p0 is not None else p
        if not 0 < p0 < 0.75:
            raise ConfigError(f"p0={p0} outside (0, 0.75); set bp4.p0 explicitly")
        return p0


@dataclass(frozen=True)
class PointStats:
    p: float
    trials: int
    type1_success: int
    type2_success: int
    type1_fail: int
    type2_fail: int
    wall_seconds: float = 0.0
    ler_ci: tuple = field(init=False)

    def __post_init__(self):
        counts = (self.type1_success, self.type2_success, self.type1_fail, self.type2_fail)
        if sum(counts) != self.trials:
            raise AssertionError("outcome counts do not sum to the trial count")
        object.__setattr__(self, "ler_ci", wilson_interval(self.failures, self.trials) if self.trials else (0.0, 1.0))

    @property
    def failures(self) -> int:
        return self.type1_fail + self.type2_fail

    @property
    def ler(self) -> float:
        return self.failures / self.trials if self.trials else math.nan

    @property
    def type1_fail_fraction(self) -> float:
        return self.type1_fail / self.failures if self.failures else math.nan

    def csv_row(self, record_timing: bool = False) -> list[str]:
        return [
            f"{self.p:.6g}", str(self.trials), str(self.type1_success), str(self.type2_success),
            str(self.type1_fail), str(self.type2_fail), f"{self.ler:.8g}", f"{self.ler_ci[0]:.8g}",
            f"{self.ler_ci[1]:.8g}", "" if math.isnan(self.type1_fail_fraction) else f"{self.type1_fail_fraction:.8g}",
            f"{self.wall_seconds:.3f}" if record_timing else "",
        ]


def wilson_interval(failures: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not 0 <= failures <= trials:
        raise ValueError("failures must lie in [0, trials]")
    z = NormalDist().inv_cdf(0.5 + confidence / 2)
    phat = failures / trials
    denom = 1 + z * z / trials
    centre = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    low = 0.0 if failures == 0 else max(0.0, centre - half)
    high = 1.0 if failures == trials else min(1.0, centre + half)
    return low, high


def build_decoder(config: ExperimentConfig, code: StabilizerCode | None = None) -> AscedDecoder:
    """The experiment's decoder, fitted once; every ``p`` shares its matrices."""
    code = code if code is not None else code_from_spec(config.code)
    dec = AscedDecoder(
        n_batches=config.l_batches, delta=config.delta, splitter_weight=config.splitter_weight,
        max_overlap=config.max_overlap, moc=config.moc, max_row_weight=config.max_row_weight,
        moc_per_component=config.moc_per_component, search_budget=config.search_budget,
        include_plain_path=config.include_plain_path, p0=config.p0 if config.p0 is not None else 0.1, max_iter=config.i_max,
        clamp=config.clamp, schedule=config.schedule, random_state=config.seed,
    )
    batches = None
    if config.ensemble_file is not None:
        batches = ensemble_from_dict(json.loads(Path(config.ensemble_file).read_text()), code)
    return dec.fit(code, batches=batches)


def sample_errors(n: int, p: float, seed: int, start: int, stop: int) -> np.ndarray:
    """Errors of trials ``start..stop-1``; trial ``t`` always sees the same uniforms."""
    u = np.empty((stop - start, n))
    for row, t in enumerate(range(start, stop)):
        u[row] = derive_stream(SeedPlan(seed, t, TRIAL_DOMAIN)).random(n)
    return sample_depolarizing_uniforms(u, p)


def _run_chunk(decoder: AscedDecoder, p: float, p0: float, seed: int, start: int, stop: int) -> np.ndarray:
    code = decoder.code_
    errors = sample_errors(code.n, p, seed, start, stop)
    res = decoder.decode_batch(symplectic_gram(errors, code.h), p0=p0)
    kinds = classify_batch(code, errors, res.estimates, res.found)
    return np.bincount(kinds, minlength=4)


def run_point(config: ExperimentConfig, p: float, *, decoder: AscedDecoder | None = None,
              threads: int = 1) -> PointStats:
    """Simulate one channel probability until the error target or the trial cap."""
    check_probability(p, "p", open_low=True, open_high=True)
    decoder = decoder if decoder is not None else build_decoder(config)
    p0 = config.p0_for(p)
    chunk = config.chunk_size
    n_chunks = -(-config.max_trials // chunk)
    counts = np.zeros(4, dtype=np.int64)
    trials = 0
    t0 = time.perf_counter()

    def bounds(c):
        return c * chunk, min((c + 1) * chunk, config.max_trials)

    def done():
        return counts[OutcomeKind.T1F] + counts[OutcomeKind.T2F] >= config.target_errors

    if threads <= 1:
        for c in range(n_chunks):
            counts += _run_chunk(decoder, p, p0, config.seed, *bounds(c))
            trials = bounds(c)[1]
            if done():
                break
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            pending = {}
            nxt = 0
            for c in range(n_chunks):
                while nxt < n_chunks and len(pending) < 2 * threads:
                    pending[nxt] = pool.submit(_run_chunk, decoder, p, p0, config.seed, *bounds(nxt))
                    nxt += 1
                counts += pending.pop(c).result()
                trials = bounds(c)[1]
                if done():
                    break
            for fut in pending.values():
                fut.cancel()
    seconds = time.perf_counter() - t0
    stats = PointStats(float(p), int(trials), *(int(x) for x in counts), wall_seconds=seconds)
    log.info("p=%g trials=%d ler=%.4g t1f=%d t2f=%d (%.1fs)", p, stats.trials, stats.ler,
             stats.type1_fail, stats.type2_fail, seconds)
    return stats


def read_results(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise ValueError(f"{path}: unexpected CSV header {header}")
        return [dict(zip(header, row)) for row in reader]


def _sidecar_path(csv_path: Path) -> Path:
    return csv_path.with_suffix(".json")


def run_sweep(config: ExperimentConfig, out_csv=None, *, threads: int = 1,
              decoder: AscedDecoder | None = None) -> list[PointStats]:
    """``run_point`` for each ``p`` in ascending order with one shared decoder.

    With ``out_csv`` each point is appended as soon as it finishes; points
    already present in a matching earlier output are skipped, so an
    interrupted sweep resumes where it stopped (skipped points are not in the
    returned list).
    """
    p_values = sorted(config.p_list)
    if not p_values:
        return []
    decoder = decoder if decoder is not None else build_decoder(config)
    results = []
    done_p: set[str] = set()
    sidecar = {
        "config": config.to_dict(),
        "code": {"name": decoder.code_.name, "n": decoder.code_.n, "k": decoder.code_.k},
        "ensemble_hash": decoder.ensemble_hash_,
        "n_paths": decoder.n_paths_,
        "duplicate_batches": decoder.duplicate_batches_,
        "version": __version__,
        "wall_seconds": {},
    }
    if out_csv is not None:
        out_csv = Path(out_csv)
        side_path = _sidecar_path(out_csv)
        if out_csv.exists() and side_path.exists():
            old = json.loads(side_path.read_text())
            if old.get("config") == sidecar["config"] and old.get("ensemble_hash") == sidecar["ensemble_hash"]:
                done_p = {row["p"] for row in read_results(out_csv)}
                sidecar["wall_seconds"] = old.get("wall_seconds", {})
        if not done_p:
            with open(out_csv, "w", newline="") as fh:
                csv.writer(fh, lineterminator="\n").writerow(CSV_HEADER)
    for p in p_values:
        if f"{p:.6g}" in done_p:
            log.info("p=%g already in %s, skipping", p, out_csv)
            continue
        stats = run_point(config, p, decoder=decoder, threads=threads)
        results.append(stats)
        if out_csv is not None:
            with open(out_csv, "a", newline="") as fh:
                csv.writer(fh, lineterminator="\n").writerow(stats.csv_row(config.record_timing))
            sidecar["wall_seconds"][f"{p:.6g}"] = round(stats.wall_seconds, 3)
            side_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return results
