"""Batch figure rendering.

    plotkit --spec figure.json          # one explicit FigureSpec
    plotkit --all RUNS_DIR              # standard figures for every run

A figure spec is a JSON object {kind, inputs, out, manifest?, options?}.
With --all, each run directory's manifest decides which figures apply:
smoothing runs get tail_decay + smoothing_norms, dissipation runs get
residual_order, absorbing runs get absorbing_ensemble.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .figures import FigureSpec, SchemaMismatch, render


def specs_for_run(run_dir: Path) -> list[FigureSpec]:
    manifest_path = run_dir / "manifest.json"
    if not manifest_path.exists():
        return []
    manifest = json.loads(manifest_path.read_text())
    outputs = set(manifest.get("outputs", []))
    fig_dir = run_dir / "figures"
    specs = []
    if "spectrum.csv" in outputs:
        specs.append(FigureSpec("tail_decay", [str(run_dir / "spectrum.csv")],
                                str(fig_dir / "tail_decay"), str(manifest_path)))
    if "smoothing_series.csv" in outputs:
        specs.append(FigureSpec("smoothing_norms",
                                [str(run_dir / "smoothing_series.csv")],
                                str(fig_dir / "smoothing_norms"), str(manifest_path)))
    if "residual_order.csv" in outputs:
        specs.append(FigureSpec("residual_order",
                                [str(run_dir / "residual_order.csv")],
                                str(fig_dir / "residual_order"), str(manifest_path)))
    members = sorted(name for name in outputs if name.startswith("member_"))
    if members and "sweep.csv" in outputs:
        specs.append(FigureSpec(
            "absorbing_ensemble",
            [str(run_dir / name) for name in members] + [str(run_dir / "sweep.csv")],
            str(fig_dir / "absorbing_ensemble"), str(manifest_path)))
    return specs


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="plotkit", description=__doc__)
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--spec", type=Path, help="JSON figure spec")
    group.add_argument("--all", type=Path, metavar="RUNS_DIR",
                       help="render standard figures for every run")
    args = parser.parse_args(argv)

    try:
        if args.spec is not None:
            result = render(FigureSpec.from_file(args.spec))
            for f in result.files:
                print(f)
            return 0
        count = 0
        for run_dir in sorted(p for p in args.all.iterdir() if p.is_dir()):
            for spec in specs_for_run(run_dir):
                result = render(spec)
                for f in result.files:
                    print(f)
                count += len(result.files)
        print(f"rendered {count} files", file=sys.stderr)
        return 0
    except (SchemaMismatch, FileNotFoundError, ValueError) as exc:
        print(f"plotkit: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
