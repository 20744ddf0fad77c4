"""Agreement statistics between engine scores and expert ratings.

Implements consensus (per-item median), Spearman rank correlation with
Fisher-z confidence intervals, MAE, within-k fractions, two-way random
absolute-agreement ICC (single and averaged forms), and 6x6 confusion
matrices with absolute-error histograms. All functions are pure and
single-threaded; callers parallelize across datasets if they need to.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import DegenerateInput, EmptyItem, LengthMismatch

ENGINE_RATER = "engine"
SCORE_LEVELS = 6  # 0..5


@dataclass
class RatingsMatrix:
    """items x raters integer scores 0-5; None marks a missing rating."""

    items: list[str]
    raters: list[str]
    values: list[list[int | None]]

    def __post_init__(self) -> None:
        for row in self.values:
            if len(row) != len(self.raters):
                raise LengthMismatch("each row must have one slot per rater")
            for v in row:
                if v is not None and not 0 <= v <= 5:
                    raise ValueError(f"score out of range 0-5: {v}")

    def column(self, rater: str) -> list[int | None]:
        j = self.raters.index(rater)
        return [row[j] for row in self.values]

    def without_rater(self, rater: str) -> "RatingsMatrix":
        j = self.raters.index(rater)
        return RatingsMatrix(
            items=list(self.items),
            raters=[r for i, r in enumerate(self.raters) if i != j],
            values=[[v for i, v in enumerate(row) if i != j] for row in self.values],
        )


def consensus(matrix: RatingsMatrix) -> list[float]:
    """Per-item median; an even count averages the central pair."""
    labels = []
    for item, row in zip(matrix.items, matrix.values):
        present = sorted(v for v in row if v is not None)
        if not present:
            raise EmptyItem(f"item {item!r} has no ratings")
        labels.append(_median(present))
    return labels


def _median(sorted_values: list[int]) -> float:
    n = len(sorted_values)
    mid = n // 2
    if n % 2:
        return float(sorted_values[mid])
    return (sorted_values[mid - 1] + sorted_values[mid]) / 2.0


def spearman(x: list[float], y: list[float]) -> tuple[float, tuple[float, float]]:
    """Spearman rho with average ranks for ties, plus a 95% Fisher-z CI."""
    if len(x) != len(y):
        raise LengthMismatch(f"{len(x)} vs {len(y)}")
    n = len(x)
    if n < 3:
        raise DegenerateInput("need at least 3 paired observations")
    if len(set(x)) < 2 or len(set(y)) < 2:
        raise DegenerateInput("constant vector has no rank variance")
    rho = float(stats.spearmanr(x, y).statistic)
    if math.isnan(rho):
        raise DegenerateInput("rank correlation undefined for this input")
    if n == 3:
        return rho, (-1.0, 1.0)  # Fisher z standard error is infinite
    if abs(rho) >= 1.0:
        return rho, (rho, rho)  # Fisher z limit at the boundary
    z = math.atanh(rho)
    half = 1.959963984540054 / math.sqrt(n - 3)
    return rho, (math.tanh(z - half), math.tanh(z + half))


def mae(pred: list[float], truth: list[float]) -> float:
    if len(pred) != len(truth):
        raise LengthMismatch(f"{len(pred)} vs {len(truth)}")
    if not pred:
        raise DegenerateInput("empty input")
    return float(sum(abs(p - t) for p, t in zip(pred, truth)) / len(pred))


def within_k(pred: list[float], truth: list[float], k: float = 1.0) -> float:
    """Fraction of predictions within +-k of the reference label."""
    if len(pred) != len(truth):
        raise LengthMismatch(f"{len(pred)} vs {len(truth)}")
    if not pred:
        raise DegenerateInput("empty input")
    hits = sum(1 for p, t in zip(pred, truth) if abs(p - t) <= k)
    return hits / len(pred)


def icc(values: list[list[float]], form: str = "single") -> float:
    """Two-way random effects, absolute agreement ICC.

    form="single" rates one judge; form="average" rates the panel mean.
    Rows are items, columns raters; the matrix must be complete (callers
    apply listwise deletion first).
    """
    a = np.asarray(values, dtype=float)
    if a.ndim != 2 or a.shape[0] < 2 or a.shape[1] < 2:
        raise DegenerateInput("need a complete matrix of >=2 items x >=2 raters")
    n, k = a.shape
    grand = a.mean()
    row_means = a.mean(axis=1)
    col_means = a.mean(axis=0)
    ss_rows = k * float(((row_means - grand) ** 2).sum())
    ss_cols = n * float(((col_means - grand) ** 2).sum())
    ss_total = float(((a - grand) ** 2).sum())
    ss_error = ss_total - ss_rows - ss_cols
    ms_rows = ss_rows / (n - 1)
    ms_cols = ss_cols / (k - 1)
    ms_error = ss_error / ((n - 1) * (k - 1))

    if form == "single":
        denom = ms_rows + (k - 1) * ms_error + (k / n) * (ms_cols - ms_error)
    elif form == "average":
        denom = ms_rows + (ms_cols - ms_error) / n
    else:
        raise ValueError(f"unknown ICC form: {form!r}")
    if abs(denom) < 1e-12:
        raise DegenerateInput("no variance anywhere in the matrix")
    return float((ms_rows - ms_error) / denom)


def _round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


def confusion_and_error_histograms(
    pred: list[int], truth: list[float]
) -> tuple[list[list[int]], dict[int, int]]:
    """6x6 counts (rows = consensus bin, cols = prediction) plus a histogram
    of absolute errors. Half-integer consensus labels round half-up."""
    if len(pred) != len(truth):
        raise LengthMismatch(f"{len(pred)} vs {len(truth)}")
    matrix = [[0] * SCORE_LEVELS for _ in range(SCORE_LEVELS)]
    histogram = {e: 0 for e in range(SCORE_LEVELS)}
    for p, t in zip(pred, truth):
        tb = min(SCORE_LEVELS - 1, max(0, _round_half_up(t)))
        pb = min(SCORE_LEVELS - 1, max(0, int(p)))
        matrix[tb][pb] += 1
        histogram[min(SCORE_LEVELS - 1, abs(pb - tb))] += 1
    return matrix, histogram


# --- the full agreement report --------------------------------------------


@dataclass
class AgreementReport:
    dimension: str
    n_items: int
    spearman_rho: float
    spearman_ci: tuple[float, float]
    mae: float
    within_one_fraction: float
    icc_raters_only: dict[str, float]
    icc_with_engine: dict[str, float]
    confusion: list[list[int]]
    error_histogram: dict[int, int]
    scatter: list[tuple[float, int]] = field(default_factory=list)
    notes: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "n_items": self.n_items,
            "spearman": {
                "rho": self.spearman_rho,
                "ci95": list(self.spearman_ci),
            },
            "mae": self.mae,
            "within_one_fraction": self.within_one_fraction,
            "icc": {
                "raters_only": self.icc_raters_only,
                "with_engine": self.icc_with_engine,
            },
            "confusion": self.confusion,
            "error_histogram": {str(k): v for k, v in self.error_histogram.items()},
            "scatter": [list(point) for point in self.scatter],
            "notes": self.notes,
        }


def _complete_rows(matrix: RatingsMatrix) -> list[list[float]]:
    return [
        [float(v) for v in row]
        for row in matrix.values
        if all(v is not None for v in row)
    ]


def build_agreement_report(
    matrix: RatingsMatrix, dimension: str, engine_rater: str = ENGINE_RATER
) -> AgreementReport:
    """Compare the engine column against the human consensus, mirroring the
    structure of an expert-panel agreement analysis."""
    if engine_rater not in matrix.raters:
        raise ValueError(f"matrix has no {engine_rater!r} rater column")
    humans = matrix.without_rater(engine_rater)
    if len(humans.raters) < 1:
        raise DegenerateInput("need at least one human rater")

    engine_col = matrix.column(engine_rater)
    pairs: list[tuple[float, int]] = []
    for idx, engine_value in enumerate(engine_col):
        human_values = [v for v in humans.values[idx] if v is not None]
        if engine_value is None or not human_values:
            continue
        pairs.append((_median(sorted(human_values)), engine_value))
    if not pairs:
        raise DegenerateInput("no items carry both an engine score and a human rating")

    truth = [t for t, _ in pairs]
    pred = [p for _, p in pairs]
    rho, ci = spearman([float(p) for p in pred], truth)
    confusion, histogram = confusion_and_error_histograms(pred, truth)

    icc_humans = {}
    complete_h = _complete_rows(humans)
    if len(complete_h) >= 2 and len(humans.raters) >= 2:
        icc_humans = {
            "single": icc(complete_h, "single"),
            "average": icc(complete_h, "average"),
        }
    icc_all = {}
    complete_all = _complete_rows(matrix)
    if len(complete_all) >= 2:
        icc_all = {
            "single": icc(complete_all, "single"),
            "average": icc(complete_all, "average"),
        }

    return AgreementReport(
        dimension=dimension,
        n_items=len(pairs),
        spearman_rho=rho,
        spearman_ci=ci,
        mae=mae([float(p) for p in pred], truth),
        within_one_fraction=within_k([float(p) for p in pred], truth, 1.0),
        icc_raters_only=icc_humans,
        icc_with_engine=icc_all,
        confusion=confusion,
        error_histogram=histogram,
        scatter=pairs,
        notes={
            "ci_method": "Fisher z-transform, 95%",
            "consensus": "per-item median of human ratings",
            "median_rounding": "half-up for confusion-matrix binning",
            "icc_model": "two-way random effects, absolute agreement",
        },
    )


# --- tabular I/O -----------------------------------------------------------

RATINGS_HEADER = ("item", "rater", "dimension", "score")


def load_ratings_csv(text: str) -> dict[str, RatingsMatrix]:
    """Parse 'item,rater,dimension,score' rows into per-dimension matrices."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError("empty ratings file") from None
    if tuple(h.strip().lower() for h in header) != RATINGS_HEADER:
        raise ValueError(f"ratings header must be {','.join(RATINGS_HEADER)!r}")

    per_dim: dict[str, dict[str, dict[str, int]]] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or not any(cell.strip() for cell in row):
            continue
        if len(row) != 4:
            raise ValueError(f"row {lineno}: expected 4 columns")
        item, rater, dimension, score_text = (cell.strip() for cell in row)
        score = int(score_text)
        if not 0 <= score <= 5:
            raise ValueError(f"row {lineno}: score out of range 0-5: {score}")
        per_dim.setdefault(dimension, {}).setdefault(item, {})[rater] = score

    matrices: dict[str, RatingsMatrix] = {}
    for dimension, items in per_dim.items():
        raters = sorted({r for ratings in items.values() for r in ratings})
        item_ids = sorted(items)
        values: list[list[int | None]] = [
            [items[item].get(rater) for rater in raters] for item in item_ids
        ]
        matrices[dimension] = RatingsMatrix(items=item_ids, raters=raters, values=values)
    return matrices
