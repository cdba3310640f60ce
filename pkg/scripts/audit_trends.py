"""Check the qualitative trends on CSVs written by run_fig1/2/3.py.

    python scripts/audit_trends.py results/fig1.csv results/fig2.csv results/fig3.csv
"""

import argparse
import sys
from pathlib import Path

from bacnoma import trends


def audit(f1, f2, f3, n_antennas):
    cases = ("@CaseI", "@CaseII")
    noma = ("ApproachI", "ApproachII")
    m_values = sorted({r.sweep_value for r in f2.rows})
    multi = [m for m in m_values if m >= 2]
    yield "NOMA beats OMA (fig1)", trends.combine(trends.beats(f1, s, "OMA") for s in noma)
    yield "NOMA beats OMA (fig2)", trends.combine(
        trends.beats(f2, s + c, "OMA" + c, values=multi) for s in noma for c in cases)
    yield "nonincreasing in alpha", trends.combine(
        trends.monotone(f1, s, -1) for s in ("ApproachI", "ApproachI_RandomEta", "ApproachII", "OMA"))
    yield "Approach I nondecreasing in M", trends.combine(
        trends.monotone(f2, "ApproachI" + c, +1) for c in cases)
    yield "Approach II only for M <= N", (all(
        trends.defined_values(f2, "ApproachII" + c) == [m for m in m_values if m <= n_antennas]
        for c in cases), f"N = {n_antennas}")
    yield "OMA flat in M", trends.combine(trends.relative_spread(f2, "OMA" + c, 0.10) for c in cases)
    yield "Case II above Case I", trends.combine(
        trends.not_below(f2, s + "@CaseII", s + "@CaseI") for s in noma)
    yield "OFDMA NOMA beats OMA", trends.beats(f3, "OFDMA_NOMA", "OFDMA_OMA", values=multi)
    yield "OFDMA NOMA increasing in M", trends.monotone(f3, "OFDMA_NOMA", +1, strict=True)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("fig1", type=Path)
    ap.add_argument("fig2", type=Path)
    ap.add_argument("fig3", type=Path)
    ap.add_argument("--n-antennas", type=int, default=4, help="N used for fig2 (4 at desk scale)")
    args = ap.parse_args()
    results = [trends.read_csv(p.read_text()) for p in (args.fig1, args.fig2, args.fig3)]
    ok_all = True
    for name, (ok, detail) in audit(*results, args.n_antennas):
        ok_all &= ok
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    sys.exit(0 if ok_all else 1)


if __name__ == "__main__":
    main()
