"""Relative efficiencies of the ranked-set estimators and the published tables.

All efficiencies are variance ratios Var(RSS mean) / Var(other), so theta2
cancels and none of the functions take it.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal
from importlib import resources

from .concomitants import stage_ratio
from .special import aux_constants, delta_r

__all__ = [
    "EfficiencyRow",
    "TABLE_ALPHAS",
    "TABLE_LAMBDAS",
    "TABLE_N",
    "TABLE_STAGES",
    "build_table",
    "check_table",
    "e1",
    "e2",
    "e3",
    "e3_e4_e5",
    "e4",
    "e5",
    "load_reference",
    "render_table",
    "round_half_even",
]

TABLE_N = (2, 4, 6, 8, 10, 15, 20, 25, 30)
TABLE_LAMBDAS = (0.25, 0.5, 0.75, 1.0)
TABLE_ALPHAS = {1: (0.8, 1.0, 2.0, 5.0), 2: (0.8, 1.0), 3: (2.0, 5.0)}
TABLE_STAGES = (1, 2, 5, 13, math.inf)
PRECISION = {1: 4, 2: 3, 3: 3}


def e1(n: int, alpha2: float, lam: float) -> float:
    """Efficiency of the BLUE relative to the RSS mean."""
    a = aux_constants(alpha2)
    c2 = aux_constants(2.0 * alpha2).C
    terms = []
    for r in range(1, n + 1):
        d = delta_r(n, r, lam)
        h = 1.0 - d * a.D / a.B
        w = a.C + d * (c2 - a.C)
        # C / W is exactly 1 at lam = 0, so e1 = 1 without rounding there
        terms.append(h * h * (a.C / w))
    return math.fsum(terms) / n


def e2(n: int, alpha2: float, lam: float) -> float:
    """Efficiency of the ERSS2 estimator relative to the RSS mean.

    The formula is evaluated for any n >= 2 even though ERSS2 itself needs
    odd n; the published table lists even n as well.
    """
    a = aux_constants(alpha2)
    cov_term = 4.0 * lam**2 * a.D**2 / ((n + 1) ** 2 * (n + 2))
    return 2 * n * a.C / ((2 * n - 1) * a.C + cov_term)


def _unbalanced_efficiency(alpha2: float, t: float) -> float:
    # t = lam * (N - 1)/(N + 1); t = lam for the steady state
    a = aux_constants(alpha2)
    c2 = aux_constants(2.0 * alpha2).C
    xi = 1.0 + t * a.D / a.B
    gamma = a.C + t * (a.C - c2)
    return a.C * xi * xi / gamma


def _check_positive_lambda(lam: float) -> None:
    if not 0.0 < lam <= 1.0:
        raise ValueError(f"lambda must lie in (0, 1] for unbalanced schemes, got {lam!r}")


def e5(n: int, alpha2: float, lam: float, l: int | float) -> float:
    """Efficiency of the l-stage MSRSS estimator; ``l = math.inf`` gives e4."""
    _check_positive_lambda(lam)
    if l == math.inf:
        return e4(alpha2, lam)
    return _unbalanced_efficiency(alpha2, lam * stage_ratio(n, l))


def e3(n: int, alpha2: float, lam: float) -> float:
    return e5(n, alpha2, lam, 1)


def e4(alpha2: float, lam: float) -> float:
    _check_positive_lambda(lam)
    return _unbalanced_efficiency(alpha2, lam)


def e3_e4_e5(n: int, alpha2: float, lam: float, l: int | float | str = 1) -> float:
    """Unbalanced-scheme efficiency for a stage count or the ``'inf'`` tag."""
    if isinstance(l, str):
        if l.lower() not in ("inf", "∞"):
            raise ValueError(f"stage count must be a positive integer or 'inf', got {l!r}")
        l = math.inf
    return e5(n, alpha2, lam, l)


def round_half_even(value: float, digits: int) -> str:
    q = Decimal(1).scaleb(-digits)
    return str(Decimal(value).quantize(q, rounding=ROUND_HALF_EVEN))


@dataclass(frozen=True)
class EfficiencyRow:
    n: int
    lam: float
    alpha2: float
    l: int | float | None = None
    values: dict = field(default_factory=dict)
    source: str = "published"

    @property
    def stage_label(self) -> str:
        if self.l is None:
            return ""
        return "inf" if self.l == math.inf else str(int(self.l))


def build_table(which: int, include_negative: bool = False) -> list[EfficiencyRow]:
    """Rows of table ``which`` (1, 2 or 3) on the published grid.

    ``include_negative`` appends e1/e2 rows at lam = -0.25..-1 to table 1,
    tagged ``source='extension'`` since they are not part of the printed tables.
    """
    if which not in (1, 2, 3):
        raise ValueError(f"table must be 1, 2 or 3, got {which!r}")
    rows = []
    if which == 1:
        lambdas = [(lam, "published") for lam in TABLE_LAMBDAS]
        if include_negative:
            lambdas += [(-lam, "extension") for lam in TABLE_LAMBDAS]
        for lam, source in lambdas:
            for n in TABLE_N:
                for a in TABLE_ALPHAS[1]:
                    rows.append(EfficiencyRow(n, lam, a, None, {"e1": e1(n, a, lam), "e2": e2(n, a, lam)}, source))
        return rows
    for n in TABLE_N:
        for lam in TABLE_LAMBDAS:
            for a in TABLE_ALPHAS[which]:
                for l in TABLE_STAGES:
                    rows.append(EfficiencyRow(n, lam, a, l, {"e5": e5(n, a, lam, l)}))
    return rows


def _cells(which: int, rows: list[EfficiencyRow]) -> dict[tuple, float]:
    """Flatten rows to {(n, lam, alpha2, column): value}."""
    cells = {}
    for row in rows:
        if which == 1:
            for key, value in row.values.items():
                cells[(row.n, row.lam, row.alpha2, key)] = value
        else:
            cells[(row.n, row.lam, row.alpha2, f"l={row.stage_label}")] = row.values["e5"]
    return cells


def _columns(which: int) -> list[tuple[float, str]]:
    if which == 1:
        return [(a, e) for a in TABLE_ALPHAS[1] for e in ("e1", "e2")]
    return [(a, f"l={'inf' if l == math.inf else l}") for a in TABLE_ALPHAS[which] for l in TABLE_STAGES]


def _wide(which: int, rows: list[EfficiencyRow], digits: int):
    cells = _cells(which, rows)
    cols = _columns(which)
    keys = sorted({(r.n, r.lam) for r in rows}, key=lambda k: (k[1] < 0, k[0], abs(k[1])))
    body = []
    for n, lam in keys:
        body.append([str(n), f"{lam:.2f}"] + [round_half_even(cells[(n, lam, a, c)], digits) for a, c in cols])
    return cols, body


def render_table(which: int, rows: list[EfficiencyRow], fmt: str = "csv", digits: int | None = None) -> str:
    """Render in the printed wide layout: one line per (n, lambda)."""
    digits = PRECISION[which] if digits is None else digits
    if fmt == "json":
        out = []
        for row in rows:
            out.append(
                {
                    "n": row.n,
                    "lambda": row.lam,
                    "alpha2": row.alpha2,
                    "l": None if row.l is None else row.stage_label,
                    "values": {k: float(round_half_even(v, digits)) for k, v in row.values.items()},
                    "source": row.source,
                }
            )
        return json.dumps({"table": which, "precision": digits, "rows": out}, indent=2)
    cols, body = _wide(which, rows, digits)
    if fmt == "csv":
        header = ["n", "lambda"] + [f"{c}@alpha2={a}" for a, c in cols]
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(body)
        return buf.getvalue()
    if fmt == "md":
        pretty = [c.replace("l=inf", "l=∞") for _, c in cols]
        header = ["n", "λ"] + [f"{c} (α={a})" for (a, _), c in zip(cols, pretty)]
        table = [header] + body
        widths = [max(len(r[i]) for r in table) for i in range(len(header))]
        lines = ["| " + " | ".join(cell.rjust(w) for cell, w in zip(r, widths)) + " |" for r in table]
        lines.insert(1, "|" + "|".join("-" * (w + 1) + ":" for w in widths) + "|")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown format {fmt!r}; expected csv, json or md")


def load_reference(which: int) -> dict[tuple, str]:
    """Printed cells of table ``which`` from the bundled transcription."""
    text = resources.files("mtbged_rss").joinpath("data/published_tables.csv").read_text()
    ref = {}
    for rec in csv.DictReader(io.StringIO(text)):
        if int(rec["table"]) == which:
            key = (int(rec["n"]), float(rec["lambda"]), float(rec["alpha2"]), rec["column"])
            ref[key] = rec["value"]
    return ref


def check_table(which: int, rows: list[EfficiencyRow] | None = None) -> tuple[int, int, list[str]]:
    """Compare computed cells with the printed ones at printed precision.

    Returns (matched, total, mismatch descriptions).
    """
    rows = build_table(which) if rows is None else rows
    cells = _cells(which, [r for r in rows if r.source == "published"])
    ref = load_reference(which)
    digits = PRECISION[which]
    mismatches = []
    matched = 0
    for key, printed in sorted(ref.items()):
        if key not in cells:
            mismatches.append(f"{key}: printed {printed}, not computed")
            continue
        got = round_half_even(cells[key], digits)
        if got == printed:
            matched += 1
        else:
            mismatches.append(f"{key}: printed {printed}, computed {got} ({cells[key]!r})")
    return matched, len(ref), mismatches

