"""Command-line interface.

Subcommands: dispersion, coeffs, minimize, sweep, validate.  All flags
override the corresponding config-file keys; GCWAVES_OUTDIR overrides the
output directory flag.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

from .dispersion import FluidParams
from .harness import (
    cmd_coeffs,
    cmd_dispersion,
    cmd_minimize,
    load_config,
    resolve_out_dir,
    run_sweep,
    spec_from_config,
)
from .validate import format_report, run_validation


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gcwaves",
                                description="Solitary gravity-capillary waves "
                                            "with constant vorticity")
    p.add_argument("--config", type=Path, default=None, help="INI config file")
    p.add_argument("--omega", type=float, default=None, help="dimensionless vorticity")
    p.add_argument("--beta", type=float, default=None, help="surface-tension coefficient")
    p.add_argument("--mu", type=float, default=None, help="momentum parameter")
    p.add_argument("--out", type=str, default=None, help="output directory")
    p.add_argument("--jobs", type=int, default=1, help="parallel sweep rows "
                                                       "(requires continuation off)")
    p.add_argument("--seed", type=int, default=0, help="seed for randomized checks")
    p.add_argument("command", choices=["dispersion", "coeffs", "minimize",
                                       "sweep", "validate"])
    return p


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    cfg = load_config(args.config)
    if args.omega is not None:
        cfg["fluid"]["omega"] = args.omega
    if args.beta is not None:
        cfg["fluid"]["beta"] = args.beta
    params = FluidParams(cfg["fluid"]["omega"], cfg["fluid"]["beta"])
    out_dir = resolve_out_dir(args.out)

    if args.command == "dispersion":
        header, text = cmd_dispersion(params, out_dir)
        sys.stdout.write(text if out_dir is None else json.dumps(header) + "\n")
        return 0

    if args.command == "coeffs":
        record = cmd_coeffs(params, out_dir)
        json.dump(record, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
        return 0

    if args.command == "minimize":
        mu = args.mu if args.mu is not None else cfg["sweep"]["mu_list"][0]
        n_modes = cfg["grid"]["n_modes"] or None
        row, _ = cmd_minimize(params, mu, out_dir, n_modes=n_modes,
                              n_layers=cfg["grid"]["n_layers"])
        json.dump(asdict(row), sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
        return 0 if row.status == "ok" else 1

    if args.command == "sweep":
        spec = spec_from_config(cfg)
        if args.mu is not None:
            spec.mu_list = [args.mu]
        spec.seed = args.seed

        def progress(row):
            print(f"mu={row.mu:.6g} status={row.status} c_defect={row.c_defect:.6g} "
                  f"iters={row.iterations}", flush=True)

        rows, _ = run_sweep(spec, out_dir=out_dir, jobs=args.jobs, progress=progress)
        return 0 if all(r.status == "ok" for r in rows) else 1

    if args.command == "validate":
        checks = run_validation(seed=args.seed)
        report = format_report(checks)
        print(report)
        if out_dir is not None:
            out_dir.mkdir(parents=True, exist_ok=True)
            (out_dir / "validate.txt").write_text(report + "\n")
            with open(out_dir / "validate.json", "w") as fh:
                json.dump([asdict(c) for c in checks], fh, indent=2, sort_keys=True)
                fh.write("\n")
        return 0 if all(c.passed for c in checks) else 1

    return 2


if __name__ == "__main__":
    raise SystemExit(main())
