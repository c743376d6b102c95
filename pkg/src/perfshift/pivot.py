"""Diagnostic for the pivot condition ``Y indep (D, Theta) | X, Z``.

Requires labels from at least two domains, so it can only be run after a
model has been deployed. A non-rejection does not establish the condition;
the justification for a pivot has to come from knowledge of the data
generating process.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import chi2

from .estimator import PivotSpec
from .scm import Dataset

MIN_EXPECTED = 5.0


class PivotPreconditionError(ValueError):
    pass


@dataclass
class StratumRow:
    key: tuple
    n: int
    statistic: float
    df: int
    dropped: bool


@dataclass
class PivotDiagnostic:
    statistic: float
    df: int
    p_value: float
    reject: bool
    alpha: float
    strata: list = field(default_factory=list)

    @property
    def dropped(self) -> int:
        return sum(r.dropped for r in self.strata)

    def to_dict(self) -> dict:
        return {"statistic": self.statistic, "df": self.df, "p_value": self.p_value, "reject": self.reject,
                "alpha": self.alpha, "strata_used": len(self.strata) - self.dropped, "strata_dropped": self.dropped}


def g_statistic(table: np.ndarray) -> tuple[float, int, float]:
    """G statistic, degrees of freedom and smallest expected count for a contingency table."""
    table = np.asarray(table, dtype=float)
    table = table[table.sum(axis=1) > 0][:, table.sum(axis=0) > 0]
    r, c = table.shape
    if r < 2 or c < 2:
        return 0.0, 0, np.inf
    expected = np.outer(table.sum(axis=1), table.sum(axis=0)) / table.sum()
    mask = table > 0
    g = 2.0 * float(np.sum(table[mask] * np.log(table[mask] / expected[mask])))
    return g, (r - 1) * (c - 1), float(expected.min())


def _discrete(values: np.ndarray) -> bool:
    return len(np.unique(values)) <= 20


def _codes(values: np.ndarray, ref: np.ndarray, bins: int) -> np.ndarray:
    if _discrete(values):
        return values
    edges = np.quantile(ref, np.linspace(0, 1, bins + 1))
    return np.searchsorted(edges[1:-1], values, side="right").astype(float)


def stratified_g_test(y: np.ndarray, group: np.ndarray, strata: np.ndarray, alpha: float = 0.05) -> PivotDiagnostic:
    """Sum of per-stratum G tests of ``y`` against ``group``.

    ``strata`` is an ``(n, k)`` array of stratum codes. Strata whose smallest
    expected count is below 5 are dropped and reported.
    """
    keys, inverse = np.unique(strata, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    y_levels, y_idx = np.unique(y, return_inverse=True)
    g_levels, g_idx = np.unique(group, return_inverse=True)
    total, dof, rows = 0.0, 0, []
    for s, key in enumerate(keys):
        m = inverse == s
        table = np.zeros((len(y_levels), len(g_levels)))
        np.add.at(table, (y_idx[m], g_idx[m]), 1.0)
        g, df, emin = g_statistic(table)
        dropped = df == 0 or emin < MIN_EXPECTED
        rows.append(StratumRow(tuple(float(k) for k in key), int(m.sum()), g, df, dropped))
        if not dropped:
            total += g
            dof += df
    p = float(chi2.sf(total, dof)) if dof > 0 else 1.0
    return PivotDiagnostic(total, dof, p, p < alpha, alpha, rows)


def pivot_diagnostic(
    pooled: Sequence[Dataset],
    pivot: PivotSpec,
    bins: int = 5,
    alpha: float = 0.05,
) -> PivotDiagnostic:
    """Test ``Y indep domain | x-bin, Z`` on labelled data pooled over domains.

    Continuous variables are cut into ``bins`` quantile bins of the first
    dataset; discrete ones are used as they are.
    """
    labeled = [d.labeled() for d in pooled]
    tags = {d.setting.tag for d in labeled if d.n > 0}
    if len(tags) < 2:
        raise PivotPreconditionError(
            "labels from at least two domains are required; without target labels the "
            "independence cannot be tested and must be argued from the causal model")
    ref = labeled[0]
    codes = []
    for k in pivot.inputs:
        col = np.concatenate([d[k] for d in labeled])
        codes.append(_codes(col, ref[k], bins))
    tag_index = {t: i for i, t in enumerate(sorted(tags, key=repr))}
    group = np.concatenate([np.full(d.n, tag_index[d.setting.tag]) for d in labeled])
    y = np.concatenate([d.labels() for d in labeled])
    return stratified_g_test(y, group, np.column_stack(codes), alpha)


def write_strata_csv(result: PivotDiagnostic, path, names: Sequence[str]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(names) + ["n", "g", "df", "dropped"])
        for r in result.strata:
            w.writerow([repr(k) for k in r.key] + [r.n, repr(r.statistic), r.df, int(r.dropped)])
