"""Qualitative trend audits over sweep results.

Each check returns ``(ok, detail)``.  Differences between sweep points are
judged against the pooled standard error ``sqrt(se_a^2 + se_b^2)``.
"""

from __future__ import annotations

import csv
import io
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from .harness import CSV_HEADER, SweepResult, SweepRow

Check = Tuple[bool, str]


def read_csv(text: str) -> SweepResult:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if ",".join(header) != CSV_HEADER:
        raise ValueError("not a sweep CSV: unexpected header")
    rows = [SweepRow(p, float(v), s, float(m), float(se), float(dl), float(ff), int(n))
            for p, v, s, m, se, dl, ff, n in reader]
    return SweepResult(rows)


def pooled(a: SweepRow, b: SweepRow) -> float:
    return float(np.hypot(a.stderr_bpcu, b.stderr_bpcu))


def combine(results: Iterable[Check]) -> Check:
    results = list(results)
    bad = [d for ok, d in results if not ok]
    if bad:
        return False, "; ".join(bad)
    return True, f"{len(results)} comparisons hold"


def beats(res: SweepResult, better: str, worse: str, n_se: float = 2.0,
          values: Sequence[float] = None) -> Check:
    """``better`` exceeds ``worse`` by more than ``n_se`` pooled SE at every value."""
    out = []
    for r in res.series(better):
        if values is not None and r.sweep_value not in values:
            continue
        o = res.row(r.sweep_value, worse)
        margin = r.mean_bpcu - o.mean_bpcu
        out.append((margin > n_se * pooled(r, o),
                    f"{better} vs {worse} at {r.sweep_value:g}: margin {margin:.3g}, "
                    f"{n_se:g} SE = {n_se * pooled(r, o):.3g}"))
    if not out:
        return False, f"no rows for {better}"
    return combine(out)


def monotone(res: SweepResult, scheme: str, direction: int, n_se: float = 2.0,
             strict: bool = False) -> Check:
    """``direction=+1``: nondecreasing in the sweep value; ``-1``: nonincreasing.

    Non-strict checks allow a reversal of up to ``n_se`` pooled SE; strict
    checks require every step to move the mean in ``direction``.
    """
    rows = sorted(res.series(scheme), key=lambda r: r.sweep_value)
    if len(rows) < 2:
        return False, f"fewer than two rows for {scheme}"
    out = []
    for a, b in zip(rows, rows[1:]):
        step = direction * (b.mean_bpcu - a.mean_bpcu)
        limit = 0.0 if strict else -n_se * pooled(a, b)
        ok = step > limit if strict else step >= limit
        out.append((ok, f"{scheme} {a.sweep_value:g}->{b.sweep_value:g}: step {step:.3g}"))
    return combine(out)


def relative_spread(res: SweepResult, scheme: str, limit: float) -> Check:
    """``(max - min) / mean`` of the scheme's means stays below ``limit``."""
    means = np.array([r.mean_bpcu for r in res.series(scheme)])
    if means.size == 0:
        return False, f"no rows for {scheme}"
    spread = float((means.max() - means.min()) / means.mean())
    return spread < limit, f"{scheme} spread {spread:.3%} (limit {limit:.0%})"


def not_below(res: SweepResult, high: str, low: str) -> Check:
    """Mean of ``high`` is at least the mean of ``low`` at every shared value."""
    out = []
    for r in res.series(high):
        o = res.row(r.sweep_value, low)
        out.append((r.mean_bpcu >= o.mean_bpcu,
                    f"{high} {r.mean_bpcu:.4g} vs {low} {o.mean_bpcu:.4g} at {r.sweep_value:g}"))
    if not out:
        return False, f"no rows for {high}"
    return combine(out)


def defined_values(res: SweepResult, scheme: str) -> List[float]:
    return sorted(r.sweep_value for r in res.series(scheme))
