"""Confusion-matrix metrics, confidence intervals, one-tailed t-tests, and
the per-variant comparison report.

Two F1 flavors exist side by side: `f1_std` (harmonic mean of precision and
sensitivity, the conventional F1) and `f1_sens_spec` (harmonic mean of
sensitivity and specificity).  `reported_f1` selects one of the two.
Accuracy is deliberately never computed: the token classes are heavily
imbalanced and accuracy would mislead.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps


class StatsError(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise StatsError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            tp=self.tp + other.tp,
            fp=self.fp + other.fp,
            tn=self.tn + other.tn,
            fn=self.fn + other.fn,
        )


@dataclass(frozen=True)
class MetricSet:
    sensitivity: float
    specificity: float
    precision: float
    f1_std: float
    f1_sens_spec: float

    def reported_f1(self, flavor: str = "f1_std") -> float:
        if flavor == "f1_std":
            return self.f1_std
        if flavor == "f1_sens_spec":
            return self.f1_sens_spec
        raise StatsError(f"unknown F1 flavor {flavor!r}")


def _ratio(num: int, den: int) -> float:
    # 0/0 convention: defined as 0 (flagged in report footnotes)
    return num / den if den else 0.0


def harmonic_mean(a: float, b: float) -> float:
    return 2.0 * a * b / (a + b) if (a + b) else 0.0


def confusion(predictions, gold, threshold: float = 0.5, mask=None) -> ConfusionCounts:
    """Count tp/fp/tn/fn; `predictions` may be probabilities or hard labels.

    A probability >= threshold counts as a predicted trigger.  Positions
    where `mask` is falsy (padding) are excluded.
    """
    predictions = np.asarray(predictions, dtype=float)
    gold = np.asarray(gold)
    if predictions.shape != gold.shape:
        raise StatsError(
            f"length mismatch: {predictions.shape} predictions vs {gold.shape} gold"
        )
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        predictions, gold = predictions[mask], gold[mask]
    pred = predictions >= threshold
    pos = gold.astype(bool)
    return ConfusionCounts(
        tp=int(np.sum(pred & pos)),
        fp=int(np.sum(pred & ~pos)),
        tn=int(np.sum(~pred & ~pos)),
        fn=int(np.sum(~pred & pos)),
    )


def metrics(c: ConfusionCounts) -> MetricSet:
    sens = _ratio(c.tp, c.tp + c.fn)
    spec = _ratio(c.tn, c.tn + c.fp)
    prec = _ratio(c.tp, c.tp + c.fp)
    return MetricSet(
        sensitivity=sens,
        specificity=spec,
        precision=prec,
        f1_std=harmonic_mean(prec, sens),
        f1_sens_spec=harmonic_mean(sens, spec),
    )


def mean_ci(values, level: float = 0.95) -> tuple[float, float]:
    """Sample mean and the halfwidth of its t-based confidence interval."""
    values = np.asarray(values, dtype=float)
    n = values.size
    if n < 2:
        raise StatsError(f"mean_ci needs at least 2 values, got {n}")
    mean = float(values.mean())
    sd = float(values.std(ddof=1))
    alpha = 1.0 - level
    halfwidth = float(sps.t.ppf(1.0 - alpha / 2.0, n - 1) * sd / np.sqrt(n))
    return mean, halfwidth


def one_tailed_t_test(a, b, welch: bool = True) -> float:
    """p-value for H1: mean(b) > mean(a).

    Welch's unequal-variance test by default; `welch=False` gives the pooled
    Student flavor.  Complementary: p(a,b) + p(b,a) = 1.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size < 2 or b.size < 2:
        raise StatsError("each sample needs at least 2 observations")
    if a.var(ddof=1) == 0.0 and b.var(ddof=1) == 0.0:
        if a.mean() == b.mean():
            raise StatsError("both samples have zero variance and equal means")
        return 0.0 if b.mean() > a.mean() else 1.0
    result = sps.ttest_ind(b, a, equal_var=not welch, alternative="greater")
    return float(result.pvalue)


@dataclass(frozen=True)
class ReportRow:
    variant: str
    split: str
    n_seeds: int
    mean_sensitivity: float
    mean_specificity: float
    mean_f1: float
    f1_ci_halfwidth: float | None
    p_value: float | None  # None for the best variant ("---")
    zero_division_flag: bool = False


@dataclass(frozen=True)
class ComparisonReport:
    rows: tuple[ReportRow, ...]
    best_variant: str
    split: str
    f1_flavor: str

    def to_csv(self) -> str:
        """Deterministic CSV; bit-stable for fixed input."""
        out = io.StringIO()
        out.write(
            "variant,split,mean_sens,mean_spec,mean_f1,f1_ci_halfwidth,p_value\n"
        )
        for r in self.rows:
            ci = f"{r.f1_ci_halfwidth:.6f}" if r.f1_ci_halfwidth is not None else ""
            p = f"{r.p_value:.6f}" if r.p_value is not None else "---"
            out.write(
                f"{r.variant},{r.split},{r.mean_sensitivity:.6f},"
                f"{r.mean_specificity:.6f},{r.mean_f1:.6f},{ci},{p}\n"
            )
        return out.getvalue()

    def to_text(self) -> str:
        lines = [
            f"split={self.split}  f1={self.f1_flavor}  best={self.best_variant}",
            f"{'variant':<24}{'n':>4}{'sens':>9}{'spec':>9}{'f1':>9}"
            f"{'ci':>9}{'p':>10}",
        ]
        for r in self.rows:
            ci = f"{r.f1_ci_halfwidth:.3f}" if r.f1_ci_halfwidth is not None else "-"
            p = f"{r.p_value:.3f}" if r.p_value is not None else "---"
            flag = " *" if r.zero_division_flag else ""
            lines.append(
                f"{r.variant:<24}{r.n_seeds:>4}{r.mean_sensitivity:>9.3f}"
                f"{r.mean_specificity:>9.3f}{r.mean_f1:>9.3f}{ci:>9}{p:>10}{flag}"
            )
        if any(r.zero_division_flag for r in self.rows):
            lines.append("* contains 0/0 metric cases, reported as 0")
        return "\n".join(lines)


def render_report(
    results,
    split: str = "test",
    f1_flavor: str = "f1_std",
    welch: bool = True,
) -> ComparisonReport:
    """Group trial results by variant and compare every variant to the best.

    `results` are records with `.variant`, `.seed`, and a `confusion`
    mapping from split name to ConfusionCounts.
    """
    if not results:
        raise StatsError("no results to report")
    by_variant: dict[str, list] = {}
    for r in results:
        by_variant.setdefault(r.variant, []).append(r)

    seed_counts = {len(v) for v in by_variant.values()}
    if len(seed_counts) > 1:
        import warnings

        warnings.warn("unequal seed counts across variants", stacklevel=2)

    per_variant: dict[str, dict] = {}
    for variant, trials in sorted(by_variant.items()):
        msets = [metrics(t.confusion[split]) for t in trials]
        f1s = [m.reported_f1(f1_flavor) for m in msets]
        per_variant[variant] = {
            "n": len(trials),
            "sens": float(np.mean([m.sensitivity for m in msets])),
            "spec": float(np.mean([m.specificity for m in msets])),
            "f1": float(np.mean(f1s)),
            "f1s": f1s,
            "zero_flag": any(
                m.sensitivity == 0.0 or m.precision == 0.0 for m in msets
            ),
        }

    best = max(per_variant, key=lambda v: per_variant[v]["f1"])
    best_f1s = per_variant[best]["f1s"]

    rows = []
    for variant, agg in per_variant.items():
        if agg["n"] >= 2:
            _, halfwidth = mean_ci(agg["f1s"])
        else:
            halfwidth = None
        if variant == best or len(per_variant) == 1:
            p = None
        elif agg["n"] >= 2 and len(best_f1s) >= 2:
            try:
                p = one_tailed_t_test(agg["f1s"], best_f1s, welch=welch)
            except StatsError:
                p = None
        else:
            p = None
        rows.append(
            ReportRow(
                variant=variant,
                split=split,
                n_seeds=agg["n"],
                mean_sensitivity=agg["sens"],
                mean_specificity=agg["spec"],
                mean_f1=agg["f1"],
                f1_ci_halfwidth=halfwidth,
                p_value=p,
                zero_division_flag=agg["zero_flag"],
            )
        )
    return ComparisonReport(
        rows=tuple(rows), best_variant=best, split=split, f1_flavor=f1_flavor
    )
