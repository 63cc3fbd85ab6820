"""Command-line surface: select / simulate / bench / oracle-check.

Exit codes: 0 success, 1 input or usage error, 2 numerical failure inside
the recursions. JSON is the primary output format (schema shipped in
iclseg/schemas/select_result.schema.json); CSV is the flat alternative.
The ICLSEG_THREADS environment variable caps compiled-kernel concurrency.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .chmm import ChmmSpec, NumericalError, eta_default, forward_backward, posteriors
from .emission import DataSeries, FAMILIES
from .icl import IclTable, select_k
from .seginit import ChangePointSet, params_from_changepoints
from .simulate import baumwelch_design, large_design, replicate_seeds, small_design

__all__ = ["RunConfig", "ingest", "run_select", "run_bench", "main"]

_DESIGNS = ("small", "large", "bw")
_DEFAULT_KMAX_CAP = 30


@dataclass
class RunConfig:
    """Resolved options for one CLI run."""

    command: str
    input: str | None = None
    design: str | None = None
    lambda_gap: float = 1.0
    seed: int = 0
    family: str = "poisson"
    k_max: int | None = None
    init: str = "dp"
    eta: float | None = None
    fmt: str = "json"
    out: str | None = None
    replicates: int = 1
    backend: str = "auto"
    n_grid: tuple[int, ...] = (5000, 10000, 20000, 40000)
    bench_k: int = 40
    select_n: int | None = None
    instances: int = 60


def ingest(path: str) -> DataSeries:
    """One numeric value per line (or single-column CSV, optional header)."""
    values: list[float] = []
    first_data_line = True
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            token = raw.strip()
            if not token:
                continue
            token = token.split(",")[0].strip()
            try:
                values.append(float(token))
            except ValueError:
                if first_data_line:
                    first_data_line = False
                    continue
                raise ValueError(f"{path}: non-numeric value at line {lineno}: {token!r}")
            first_data_line = False
    if not values:
        raise ValueError(f"{path}: no data values found")
    return DataSeries(np.asarray(values))


def _load_series(cfg: RunConfig) -> DataSeries:
    if cfg.input is not None:
        data = ingest(cfg.input)
        if cfg.family in ("poisson", "negbin"):
            data.validate_counts()
        return data
    if cfg.design is None:
        raise ValueError("either --input or --design is required")
    data, _ = _generate(cfg.design, cfg.lambda_gap, cfg.seed)
    return data


def _generate(design: str, lambda_gap: float, seed) -> tuple[DataSeries, object]:
    if design == "small":
        return small_design(lambda_gap, seed)
    if design == "large":
        return large_design(lambda_gap, seed)
    if design == "bw":
        return baumwelch_design(seed)
    raise ValueError(f"unknown design {design!r}")


def _table_payload(cfg: RunConfig, data: DataSeries, table: IclTable) -> dict:
    return {
        "n": data.n,
        "family": cfg.family,
        "k_max": len(table.records),
        "init": cfg.init,
        "eta": cfg.eta,
        "records": [
            {
                "k": rec.k,
                "log_joint": rec.log_joint,
                "entropy": rec.entropy,
                "icl": rec.icl,
                "breakpoints": list(rec.map_cps.breakpoints),
                "seconds": rec.seconds,
            }
            for rec in table.records
        ],
        "k_hat": table.k_hat,
    }


def _table_csv(payload: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["k", "log_joint", "entropy", "icl", "seconds", "breakpoints"])
    for rec in payload["records"]:
        writer.writerow(
            [
                rec["k"],
                repr(rec["log_joint"]),
                repr(rec["entropy"]),
                repr(rec["icl"]),
                repr(rec["seconds"]),
                "|".join(str(t) for t in rec["breakpoints"]),
            ]
        )
    writer.writerow(["k_hat", payload["k_hat"], "", "", "", ""])
    return buf.getvalue()


def _emit(cfg: RunConfig, text: str) -> None:
    if cfg.out is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        Path(cfg.out).write_text(text, encoding="utf-8")


def run_select(cfg: RunConfig) -> int:
    data = _load_series(cfg)
    k_max = cfg.k_max if cfg.k_max is not None else min(data.n, _DEFAULT_KMAX_CAP)
    table = select_k(
        data,
        k_max,
        family=cfg.family,
        init_method=cfg.init,
        eta=cfg.eta,
        backend=cfg.backend,
    )
    payload = _table_payload(cfg, data, table)
    if cfg.fmt == "json":
        _emit(cfg, json.dumps(payload, indent=2))
    else:
        _emit(cfg, _table_csv(payload))
    return 0


def run_simulate(cfg: RunConfig) -> int:
    if cfg.design is None:
        raise ValueError("simulate requires --design")
    if cfg.replicates < 1:
        raise ValueError("--replicates must be >= 1")
    if cfg.replicates > 1 and cfg.out is None:
        raise ValueError("--replicates > 1 requires --out")
    seeds = (
        [cfg.seed]
        if cfg.replicates == 1
        else replicate_seeds(cfg.seed, cfg.replicates)
    )
    meta = []
    for idx, seed in enumerate(seeds):
        data, design = _generate(cfg.design, cfg.lambda_gap, seed)
        lines = "\n".join(str(int(v)) if float(v).is_integer() else repr(v) for v in data.values)
        if cfg.out is None:
            sys.stdout.write(lines + "\n")
            path = None
        else:
            out = Path(cfg.out)
            path = (
                out
                if cfg.replicates == 1
                else out.with_name(f"{out.stem}.{idx:03d}{out.suffix}")
            )
            path.write_text(lines + "\n", encoding="utf-8")
        meta.append(
            {
                "replicate": idx,
                "design": design.name,
                "n": design.n,
                "k": design.true_cps.k,
                "lambda": cfg.lambda_gap,
                "seed": cfg.seed,
                "breakpoints": list(design.true_cps.breakpoints),
                "means": list(design.means),
                "file": str(path) if path is not None else None,
            }
        )
    if cfg.out is not None:
        sys.stdout.write(json.dumps({"replicates": meta}, indent=2) + "\n")
    return 0


def _bench_instance(n: int, k: int, lambda_gap: float, seed) -> DataSeries:
    bps = tuple(int(round(i * n / k)) for i in range(1, k))
    cps = ChangePointSet(n, bps)
    means = np.array([1.0 + (i % 2) * lambda_gap for i in range(k)])
    rng = np.random.default_rng(seed)
    values = rng.poisson(np.repeat(means, np.diff(cps.bounds()))).astype(np.float64)
    return DataSeries(values)


def run_bench(cfg: RunConfig) -> int:
    points = []
    for n in cfg.n_grid:
        data = _bench_instance(n, cfg.bench_k, cfg.lambda_gap, cfg.seed)
        bps = tuple(int(round(i * n / cfg.bench_k)) for i in range(1, cfg.bench_k))
        emission = params_from_changepoints(data, ChangePointSet(n, bps), "poisson")
        spec = ChmmSpec(
            n=n, k=cfg.bench_k, eta=eta_default(n, cfg.bench_k), emission=emission
        )
        best = np.inf
        for _ in range(3):
            t0 = time.perf_counter()
            fb = forward_backward(spec, data)
            posteriors(fb)
            best = min(best, time.perf_counter() - t0)
        points.append({"n": n, "seconds": best})
    logn = np.log([p["n"] for p in points])
    logt = np.log([p["seconds"] for p in points])
    exponent = float(np.polyfit(logn, logt, 1)[0])
    report = {
        "k": cfg.bench_k,
        "lambda": cfg.lambda_gap,
        "points": points,
        "exponent": exponent,
        "select": None,
    }
    if cfg.select_n is not None:
        data = _bench_instance(cfg.select_n, cfg.bench_k, cfg.lambda_gap, cfg.seed)
        k_max = cfg.k_max if cfg.k_max is not None else cfg.bench_k
        t0 = time.perf_counter()
        table = select_k(data, k_max, family="poisson", init_method=cfg.init)
        total = time.perf_counter() - t0
        report["select"] = {
            "n": cfg.select_n,
            "k_max": k_max,
            "seconds_total": total,
            "k_hat": table.k_hat,
            "per_k": [{"k": r.k, "seconds": r.seconds} for r in table.records],
        }
    if cfg.fmt == "json":
        _emit(cfg, json.dumps(report, indent=2))
    else:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["n", "seconds"])
        for p in points:
            writer.writerow([p["n"], repr(p["seconds"])])
        writer.writerow(["exponent", repr(exponent)])
        if report["select"] is not None:
            for row in report["select"]["per_k"]:
                writer.writerow(["select_k", row["k"], repr(row["seconds"])])
        _emit(cfg, buf.getvalue())
    return 0


def run_oracle_check(cfg: RunConfig) -> int:
    from .check import oracle_battery

    res = oracle_battery(cfg.instances, seed=cfg.seed)
    print(f"instances          : {res.instances}")
    print(f"max |mu| deviation : {res.max_dev_mu:.3e}")
    print(f"max |pi| deviation : {res.max_dev_pi:.3e}")
    print(f"max |H| deviation  : {res.max_dev_entropy:.3e}")
    print(f"max |lj| deviation : {res.max_dev_log_joint:.3e}")
    print(f"MAP mismatches     : {res.map_mismatches}")
    print(f"DP mismatches      : {res.dp_mismatches}")
    ok = res.passed(1e-8)
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="iclseg",
        description="Select the number of change-points in a 1-D series by "
        "minimizing a conditional ICL criterion.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_io(p: argparse.ArgumentParser) -> None:
        p.add_argument("--format", dest="fmt", choices=("json", "csv"), default="json")
        p.add_argument("--out", default=None, help="output path (default: stdout)")

    def add_source(p: argparse.ArgumentParser) -> None:
        p.add_argument("--input", default=None, help="series file, one value per line")
        p.add_argument("--design", choices=_DESIGNS, default=None)
        p.add_argument("--lambda", dest="lambda_gap", type=float, default=1.0)
        p.add_argument("--seed", type=int, default=0)

    p_select = sub.add_parser("select", help="compute the criterion and pick K")
    add_source(p_select)
    p_select.add_argument("--family", choices=FAMILIES, default="poisson")
    p_select.add_argument("--kmax", dest="k_max", type=int, default=None)
    p_select.add_argument("--init", choices=("dp", "binseg"), default="dp")
    p_select.add_argument("--eta", type=float, default=None)
    p_select.add_argument(
        "--backend", choices=("auto", "exact", "pruned"), default="auto"
    )
    add_io(p_select)

    p_sim = sub.add_parser("simulate", help="generate a design series")
    add_source(p_sim)
    p_sim.add_argument("--replicates", type=int, default=1)
    p_sim.add_argument("--out", default=None)

    p_bench = sub.add_parser("bench", help="time the recursions over an n grid")
    p_bench.add_argument(
        "--n-grid", default="5000,10000,20000,40000",
        help="comma-separated series lengths",
    )
    p_bench.add_argument("--k", dest="bench_k", type=int, default=40)
    p_bench.add_argument("--lambda", dest="lambda_gap", type=float, default=3.0)
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--select-n", dest="select_n", type=int, default=None)
    p_bench.add_argument("--kmax", dest="k_max", type=int, default=None)
    p_bench.add_argument("--init", choices=("dp", "binseg"), default="dp")
    add_io(p_bench)

    p_check = sub.add_parser("oracle-check", help="run the oracle-equivalence battery")
    p_check.add_argument("--instances", type=int, default=60)
    p_check.add_argument("--seed", type=int, default=0)

    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(command=args.command)
    for name, value in vars(args).items():
        if name != "command" and hasattr(cfg, name):
            setattr(cfg, name, value)
    if args.command == "bench":
        cfg.n_grid = tuple(int(tok) for tok in str(args.n_grid).split(",") if tok)
    return cfg


def _apply_thread_cap() -> None:
    cap = os.environ.get("ICLSEG_THREADS")
    if not cap:
        return
    try:
        want = max(1, int(cap))
    except ValueError:
        raise ValueError(f"ICLSEG_THREADS must be an integer, got {cap!r}")
    import numba

    numba.set_num_threads(min(want, numba.config.NUMBA_NUM_THREADS))


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_thread_cap()
        cfg = _config_from_args(args)
        if args.command == "select":
            return run_select(cfg)
        if args.command == "simulate":
            return run_simulate(cfg)
        if args.command == "bench":
            return run_bench(cfg)
        return run_oracle_check(cfg)
    except NumericalError as err:
        where = "" if err.position is None else f" at position {err.position}"
        at_k = "" if err.k is None else f" (K={err.k})"
        print(f"numerical failure{where}{at_k}: {err}", file=sys.stderr)
        return 2
    except (ValueError, OSError, RuntimeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
