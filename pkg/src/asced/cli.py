"""Command-line front end.

Exit codes: 0 success, 1 invalid input (bad flags, specs, configs, or a
failed verification), 2 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import gf2
from .channel import ENSEMBLE_DOMAIN, SeedPlan, derive_stream
from .codes import code_from_spec, validate_css
from .degeneracy import DegeneracySetId, verify_splitting
from .ensemble import (AscedDecoder, SplitterBudgetExhausted, ensemble_hash, ensemble_to_dict,
                       generate_splitters)
from .harness import CSV_HEADER, ConfigError, ExperimentConfig, read_results, run_sweep

log = logging.getLogger("asced")

REPORT_HEADER = ["curve", "p", "ler", "ci_low", "ci_high", "t1f_fraction"]


class InputError(Exception):
    """Bad user input; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _optional_int(text: str):
    return None if text.lower() == "none" else int(text)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="asced", description="BP4 and aSCED decoding of stabilizer codes")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("build-code", help="build a code and print its parameters")
    p.add_argument("--code", "--config", dest="code", required=True,
                   help="shipped spec name (gb_46_2_9, gb_126_28_8, toric_8), toricD, or a JSON spec path")
    p.add_argument("--matrix-out", type=Path, help="directory for h.txt, hx.txt and hz.txt")

    p = sub.add_parser("gen-ensemble", help="draw and serialize an aSCED ensemble")
    p.add_argument("--code", required=True, help="code spec, as for build-code")
    p.add_argument("--L", dest="n_batches", type=int, default=1, help="number of batches")
    p.add_argument("--delta", type=int, default=2, help="splitters per batch (even)")
    p.add_argument("--splitter-weight", type=int, default=4)
    p.add_argument("--max-overlap", type=_optional_int, default=1,
                   help="support overlap limit between splitters and checks ('none' disables)")
    p.add_argument("--moc", type=int, help="overcomplete row count (total)")
    p.add_argument("--max-row-weight", type=int, help="weight limit of redundant rows")
    p.add_argument("--search-budget", type=int, default=200, help="information-set draws per component")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True, help="ensemble JSON file to write")

    p = sub.add_parser("verify-splitting", help="check that splitters partition degeneracy sets evenly")
    p.add_argument("--code", default="toric2", help="code spec with n-k <= 16")
    p.add_argument("--delta", type=int, default=2, help="number of splitters (odd allowed)")
    p.add_argument("--splitter-weight", type=int, default=4)
    p.add_argument("--max-overlap", type=_optional_int, default=None,
                   help="support overlap limit ('none' disables, the default for tiny codes)")
    p.add_argument("--ids", type=int, default=10, help="random degeneracy sets to test")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("simulate", help="run a Monte-Carlo sweep from an experiment JSON file")
    p.add_argument("--config", required=True,
                   help="experiment JSON file or a shipped experiment name (e.g. exp_gb46_bp4)")
    p.add_argument("--out", type=Path, required=True, help="output directory for <name>.csv and <name>.json")
    p.add_argument("--seed", type=int, help="override mc.seed")
    p.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on this)")

    p = sub.add_parser("report", help="merge result CSVs into one tidy table")
    p.add_argument("inputs", nargs="+", type=Path, help="CSV files written by simulate")
    p.add_argument("--out", type=Path, help="output CSV (default: stdout)")
    return parser


def _load_code(source: str):
    try:
        return code_from_spec(source)
    except FileNotFoundError:
        raise InputError(f"no such code spec: {source}") from None
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise InputError(f"{source}: {exc}") from None


def cmd_build_code(args) -> int:
    code = _load_code(args.code)
    css = "ok" if code.is_css and validate_css(code.hx, code.hz) else "fail"
    print(f"name={code.name} n={code.n} k={code.k} rank={code.stabilizer_basis.shape[0]} css={css}")
    if args.matrix_out is not None:
        args.matrix_out.mkdir(parents=True, exist_ok=True)
        gf2.write_matrix(args.matrix_out / "h.txt", code.h)
        if code.is_css:
            gf2.write_matrix(args.matrix_out / "hx.txt", code.hx)
            gf2.write_matrix(args.matrix_out / "hz.txt", code.hz)
    return 0


def cmd_gen_ensemble(args) -> int:
    code = _load_code(args.code)
    dec = AscedDecoder(n_batches=args.n_batches, delta=args.delta, splitter_weight=args.splitter_weight,
                       max_overlap=args.max_overlap, moc=args.moc, max_row_weight=args.max_row_weight,
                       search_budget=args.search_budget, random_state=args.seed)
    try:
        dec.fit(code)
    except (ValueError, SplitterBudgetExhausted) as exc:
        raise InputError(str(exc)) from None
    data = ensemble_to_dict(dec.batches_)
    data["code"] = code.name
    data["params"] = {k: v for k, v in dec.get_params().items()
                      if k in ("n_batches", "delta", "splitter_weight", "max_overlap", "moc",
                               "max_row_weight", "search_budget", "random_state")}
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(json.dumps(data, indent=1) + "\n")
    rows = dec.batches_[0].working_matrix.shape[0] if dec.batches_ else code.m
    print(f"batches={len(dec.batches_)} paths={dec.n_paths_} rows={rows} "
          f"duplicates={dec.duplicate_batches_} sha256={ensemble_hash(dec.batches_)}")
    return 0


def cmd_verify_splitting(args) -> int:
    code = _load_code(args.code)
    stream = derive_stream(SeedPlan(args.seed, 0, ENSEMBLE_DOMAIN))
    try:
        spl = generate_splitters(code, args.delta, args.splitter_weight, stream, max_overlap=args.max_overlap)
        rng = np.random.default_rng(args.seed)
        reports = [verify_splitting(code, spl, DegeneracySetId.random(code, rng)) for _ in range(args.ids)]
    except (ValueError, SplitterBudgetExhausted) as exc:
        raise InputError(str(exc)) from None
    all_ok = True
    for i, rep in enumerate(reports):
        sizes = " ".join(f"{''.join(map(str, g)) or '-'}:{c}" for g, c in sorted(rep.counts.items()))
        print(f"set {i}: |D|={rep.set_size} subsets={len(rep.counts)} sizes {sizes} "
              f"expected={rep.expected_size} {'PASS' if rep.ok else 'FAIL'}")
        all_ok &= rep.ok
    print("splitting verified" if all_ok else "splitting FAILED")
    return 0 if all_ok else 1


def _experiment_path(source: str):
    path = Path(source)
    if path.exists():
        return path
    name = source if source.endswith(".json") else f"{source}.json"
    shipped = resources.files("asced.data") / name
    return shipped if name.startswith("exp_") and shipped.is_file() else path


def cmd_simulate(args) -> int:
    try:
        config = ExperimentConfig.from_json(_experiment_path(args.config))
        if args.seed is not None:
            data = config.to_dict()
            data["mc"]["seed"] = args.seed
            config = ExperimentConfig.from_dict(data, source=str(args.config))
    except FileNotFoundError:
        raise InputError(f"no such config: {args.config}") from None
    except ConfigError as exc:
        raise InputError(str(exc)) from None
    if args.threads < 1:
        raise InputError("--threads must be >= 1")
    args.out.mkdir(parents=True, exist_ok=True)
    out_csv = args.out / f"{config.name}.csv"
    try:
        run_sweep(config, out_csv, threads=args.threads)
    except ConfigError as exc:
        raise InputError(str(exc)) from None
    print(f"wrote {out_csv}")
    return 0


def _curve_label(csv_path: Path) -> str:
    side = csv_path.with_suffix(".json")
    if side.exists():
        cfg = json.loads(side.read_text()).get("config", {})
        if cfg:
            return f"{cfg.get('name', csv_path.stem)}:{cfg.get('decoder', '')}"
    return csv_path.stem


def cmd_report(args) -> int:
    rows = []
    for path in args.inputs:
        try:
            records = read_results(path)
        except FileNotFoundError:
            raise InputError(f"no such file: {path}") from None
        except ValueError as exc:
            raise InputError(f"{path}: header does not match {','.join(CSV_HEADER)}") from exc
        label = _curve_label(path)
        rows.extend([label] + [r[k] for k in REPORT_HEADER[1:]] for r in records)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_HEADER)
        writer.writerows(rows)
    finally:
        if args.out:
            fh.close()
    return 0


COMMANDS = {
    "build-code": cmd_build_code,
    "gen-ensemble": cmd_gen_ensemble,
    "verify-splitting": cmd_verify_splitting,
    "simulate": cmd_simulate,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - anything else is a runtime failure
        log.debug("runtime failure", exc_info=True)
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
