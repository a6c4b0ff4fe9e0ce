"""Command-line benchmark harness.

Subcommands:
  run <config>              execute a config file
  scenario <name>           execute a built-in scenario
  compare <template>        basis/order sweep of one template config
  report-conditioning       1D conditioning and sparsity tables

Thread count for element-level work is capped by SDMEFEM_THREADS.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .basis1d import BasisKind, conditioning_report, sparsity_report
from .config import BASIS_NAMES, ConfigError, parse_config_file
from .runner import benchmark_compare, run_config, write_csv
from .scenarios import SCENARIOS, make_scenario

__all__ = ["main"]


def _parse_orders(text: str) -> list[int]:
    """'2..12' or '2 4 6' or '2,4,6' -> list of ints."""
    if ".." in text:
        lo, hi = text.split("..")
        return list(range(int(lo), int(hi) + 1))
    return [int(t) for t in text.replace(",", " ").split()]


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sdmefem",
                                 description="High-order FEM benchmarks with SDME bases")
    sub = ap.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a config file")
    p_run.add_argument("config")
    p_run.add_argument("--outdir", default=None)

    p_sc = sub.add_parser("scenario", help="execute a built-in scenario")
    p_sc.add_argument("name", choices=sorted(SCENARIOS))
    p_sc.add_argument("--order", type=int, default=None)
    p_sc.add_argument("--basis", choices=BASIS_NAMES, default=None)
    p_sc.add_argument("--outdir", default=None)

    p_cmp = sub.add_parser("compare", help="basis/order sweep of a template config")
    p_cmp.add_argument("template")
    p_cmp.add_argument("--bases", nargs="+", required=True, choices=BASIS_NAMES)
    p_cmp.add_argument("--orders", required=True)
    p_cmp.add_argument("--outdir", default="out")

    p_cond = sub.add_parser("report-conditioning", help="1D conditioning/sparsity CSVs")
    p_cond.add_argument("--orders", default="2..12")
    p_cond.add_argument("--k", type=float, default=0.5)
    p_cond.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p_cond.add_argument("--outdir", default="out")
    return ap


def _report_run(result) -> None:
    cfg = result.config
    print(f"basis={cfg.basis.kind} P={cfg.basis.p} free DOFs={result.n_free}")
    if result.errors is not None:
        labels = ["ux", "uy", "uz"]
        errs = " ".join(f"{l}={e:.3e}" for l, e in zip(labels, result.errors))
        print(f"L2 errors: {errs}")
    if result.stats.rows:
        print(f"linear solves: {len(result.stats.rows)}, "
              f"mean iterations {result.mean_iterations:.1f}")
    if result.newton_iters:
        print(f"newton iterations per step: mean "
              f"{np.mean(result.newton_iters):.2f}")
    for f in result.files:
        print(f"wrote {f}")


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = parse_config_file(args.config)
            result = run_config(cfg, outdir=args.outdir)
            _report_run(result)
        elif args.command == "scenario":
            cfg = make_scenario(args.name, args.order, args.basis)
            result = run_config(cfg, outdir=args.outdir)
            _report_run(result)
        elif args.command == "compare":
            template = parse_config_file(args.template)
            rows = benchmark_compare(template, args.bases, _parse_orders(args.orders))
            os.makedirs(args.outdir, exist_ok=True)
            path = os.path.join(args.outdir, "compare.csv")
            write_csv(path, rows, ["basis", "P", "dofs", "mean_iterations",
                                   "mean_seconds", "speedup_vs_ref", "failed"])
            print(f"wrote {path}")
            if any(r["failed"] for r in rows):
                return 1
        else:  # report-conditioning
            orders = _parse_orders(args.orders)
            kinds = [
                BasisKind("ModalJacobi"),
                BasisKind("SDME_M", k=args.k),
                BasisKind("SDME_H", k=args.k, lam=args.lam),
            ]
            os.makedirs(args.outdir, exist_ok=True)
            cond_path = os.path.join(args.outdir, "conditioning.csv")
            write_csv(cond_path, conditioning_report(kinds, orders, args.lam),
                      ["basis", "P", "cond_M", "cond_K", "cond_Khat"])
            sp_path = os.path.join(args.outdir, "sparsity.csv")
            write_csv(sp_path, sparsity_report(kinds, orders, args.lam),
                      ["basis", "P", "matrix", "nnz"])
            print(f"wrote {cond_path}")
            print(f"wrote {sp_path}")
    except (ConfigError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # solver/dynamics failures -> nonzero exit
        print(f"run failed: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
