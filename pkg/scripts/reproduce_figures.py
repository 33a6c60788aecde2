#!/usr/bin/env python3
"""Reproduce the numerical-study sweeps into CSVs.

Usage: python scripts/reproduce_figures.py [outdir]

Writes fig5.csv, fig6.csv, fig7.csv, fig8.csv and optimum.csv for the
default scenario (20 m sections, 8 s dwells, 2 calls/hr, U=20, V=1).
"""

import pathlib
import sys

from lamopt.cli import main

outdir = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "figures")
outdir.mkdir(parents=True, exist_ok=True)

for name in ("fig5", "fig6", "fig7", "fig8"):
    path = outdir / f"{name}.csv"
    main([name, "--out", str(path)])
    print(f"wrote {path}")

main(["optimize", "--out", str(outdir / "optimum.csv"), "--provider", "galerkin"])
print(f"wrote {outdir / 'optimum.csv'}")
