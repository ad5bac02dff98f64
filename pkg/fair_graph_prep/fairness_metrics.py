"""
Group fairness metrics and their aggregation over repeated runs.

Positive predictions mean "good customer". Group A is the overrepresented
group (tag 0) and group B the underrepresented one (tag 1). A smaller delta
between groups means a fairer model, whatever the absolute rates.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .const import (
    FAIRNESS_METRICS,
    GROUP_OVER,
    GROUP_UNDER,
    METRIC_ACCURACY,
    METRIC_FPR,
    METRIC_OPPORTUNITY,
    METRIC_PARITY,
    METRICS,
    POSITIVE_LABEL,
)
from .exceptions import MetricError

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class GroupOutcome:
    """Confusion-table counts for one group."""

    predicted_positive: int
    true_positive: int
    false_positive: int
    condition_positive: int
    condition_negative: int
    correct: int
    size: int


@dataclass(frozen=True)
class GroupRates:
    """Metric value for each group and their absolute difference.

    Values are ``None`` when the metric is undefined (empty denominator).
    """

    group_a: Optional[float]
    group_b: Optional[float]

    @property
    def defined(self) -> bool:
        return self.group_a is not None and self.group_b is not None

    @property
    def delta(self) -> Optional[float]:
        if not self.defined:
            return None
        return abs(self.group_a - self.group_b)


def _arrays(*values) -> Tuple[np.ndarray, ...]:
    arrays = tuple(np.asarray(value, dtype=np.int64).ravel() for value in values)
    if len({len(array) for array in arrays}) > 1:
        raise MetricError("Predictions, labels and groups must have equal length")
    return arrays


def group_outcomes(predictions, labels, groups) -> Dict[int, GroupOutcome]:
    """Per-group confusion counts."""
    predictions, labels, groups = _arrays(predictions, labels, groups)
    outcomes = {}
    for group in (GROUP_OVER, GROUP_UNDER):
        mask = groups == group
        predicted = predictions[mask] == POSITIVE_LABEL
        actual = labels[mask] == POSITIVE_LABEL
        outcomes[group] = GroupOutcome(
            predicted_positive=int(predicted.sum()),
            true_positive=int((predicted & actual).sum()),
            false_positive=int((predicted & ~actual).sum()),
            condition_positive=int(actual.sum()),
            condition_negative=int((~actual).sum()),
            correct=int((predicted == actual).sum()),
            size=int(mask.sum()),
        )
    return outcomes


def _ratio(numerator: int, denominator: int) -> Optional[float]:
    return numerator / denominator if denominator else None


def statistical_parity(predictions, groups) -> GroupRates:
    """P(prediction = positive | group) for both groups."""
    predictions, groups = _arrays(predictions, groups)
    outcomes = group_outcomes(predictions, np.zeros_like(predictions), groups)
    for group, outcome in outcomes.items():
        if outcome.size == 0:
            raise MetricError(f"Group {group} has no nodes")
    return GroupRates(
        outcomes[GROUP_OVER].predicted_positive / outcomes[GROUP_OVER].size,
        outcomes[GROUP_UNDER].predicted_positive / outcomes[GROUP_UNDER].size,
    )


def equal_opportunity(predictions, labels, groups) -> GroupRates:
    """True positive rate per group; undefined without condition positives."""
    outcomes = group_outcomes(predictions, labels, groups)
    return GroupRates(
        *(
            _ratio(outcomes[g].true_positive, outcomes[g].condition_positive)
            for g in (GROUP_OVER, GROUP_UNDER)
        )
    )


def fpr_difference(predictions, labels, groups) -> GroupRates:
    """False positive rate per group; undefined without condition negatives."""
    outcomes = group_outcomes(predictions, labels, groups)
    return GroupRates(
        *(
            _ratio(outcomes[g].false_positive, outcomes[g].condition_negative)
            for g in (GROUP_OVER, GROUP_UNDER)
        )
    )


def accuracy(predictions, labels, groups) -> Tuple[float, GroupRates]:
    """Overall fraction correct plus the per-group fractions."""
    predictions, labels, groups = _arrays(predictions, labels, groups)
    if len(predictions) == 0:
        raise MetricError("Accuracy needs at least one prediction")
    outcomes = group_outcomes(predictions, labels, groups)
    overall = float(np.mean(predictions == labels))
    return overall, GroupRates(
        *(
            _ratio(outcomes[g].correct, outcomes[g].size)
            for g in (GROUP_OVER, GROUP_UNDER)
        )
    )


@dataclass(frozen=True)
class MetricSummary:
    """Mean (and population std) of one metric over one or more runs."""

    group_a: Optional[float]
    group_b: Optional[float]
    delta: Optional[float]
    group_a_std: float = 0.0
    group_b_std: float = 0.0
    delta_std: float = 0.0
    runs: int = 1
    undefined_runs: int = 0

    @property
    def defined(self) -> bool:
        return self.delta is not None

    @classmethod
    def from_rates(cls, rates: GroupRates) -> "MetricSummary":
        if not rates.defined:
            return cls(None, None, None, runs=0, undefined_runs=1)
        return cls(rates.group_a, rates.group_b, rates.delta)

    def to_dict(self) -> Dict[str, object]:
        return {
            "group_a": self.group_a,
            "group_b": self.group_b,
            "delta": self.delta,
            "group_a_std": self.group_a_std,
            "group_b_std": self.group_b_std,
            "delta_std": self.delta_std,
            "runs": self.runs,
            "undefined_runs": self.undefined_runs,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, object]) -> "MetricSummary":
        return cls(**data)


@dataclass(frozen=True)
class FairnessReport:
    """Per-metric group values and deltas, plus overall accuracy."""

    metrics: Mapping[str, MetricSummary]
    overall_accuracy: float
    overall_accuracy_std: float = 0.0
    runs: int = 1
    group_names: Tuple[str, str] = ("A", "B")

    def __getitem__(self, metric: str) -> MetricSummary:
        return self.metrics[metric]

    def to_dict(self) -> Dict[str, object]:
        return {
            "group_names": list(self.group_names),
            "runs": self.runs,
            "overall_accuracy": self.overall_accuracy,
            "overall_accuracy_std": self.overall_accuracy_std,
            "metrics": {name: self.metrics[name].to_dict() for name in METRICS},
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, object]) -> "FairnessReport":
        return cls(
            metrics={
                name: MetricSummary.from_dict(values)
                for name, values in data["metrics"].items()
            },
            overall_accuracy=data["overall_accuracy"],
            overall_accuracy_std=data.get("overall_accuracy_std", 0.0),
            runs=data.get("runs", 1),
            group_names=tuple(data.get("group_names", ("A", "B"))),
        )


def evaluate(
    predictions, labels, groups, group_names: Sequence[str] = ("A", "B")
) -> FairnessReport:
    """Compute all four metrics for one run."""
    overall, per_group = accuracy(predictions, labels, groups)
    rates = {
        METRIC_PARITY: statistical_parity(predictions, groups),
        METRIC_OPPORTUNITY: equal_opportunity(predictions, labels, groups),
        METRIC_FPR: fpr_difference(predictions, labels, groups),
        METRIC_ACCURACY: per_group,
    }
    for name, value in rates.items():
        if not value.defined:
            _LOGGER.warning("Metric %s is undefined for this run", name)
    return FairnessReport(
        metrics={
            name: MetricSummary.from_rates(value) for name, value in rates.items()
        },
        overall_accuracy=overall,
        group_names=tuple(group_names),
    )


def _mean_std(values: List[float]) -> Tuple[Optional[float], float]:
    if not values:
        return None, 0.0
    return float(np.mean(values)), float(np.std(values))


def aggregate_repeats(reports: Sequence[FairnessReport]) -> FairnessReport:
    """
    Mean and population standard deviation of every metric over runs.

    Undefined runs of a metric are left out of its mean and counted in
    ``undefined_runs``. Deltas are averaged per run, not recomputed from the
    mean rates.
    """
    if not reports:
        raise MetricError("Cannot aggregate an empty list of reports")

    metrics = {}
    for name in METRICS:
        summaries = [report.metrics[name] for report in reports]
        defined = [summary for summary in summaries if summary.defined]
        group_a, group_a_std = _mean_std([s.group_a for s in defined])
        group_b, group_b_std = _mean_std([s.group_b for s in defined])
        delta, delta_std = _mean_std([s.delta for s in defined])
        metrics[name] = MetricSummary(
            group_a=group_a,
            group_b=group_b,
            delta=delta,
            group_a_std=group_a_std,
            group_b_std=group_b_std,
            delta_std=delta_std,
            runs=len(defined),
            undefined_runs=sum(s.undefined_runs for s in summaries),
        )

    overall, overall_std = _mean_std([report.overall_accuracy for report in reports])
    return FairnessReport(
        metrics=metrics,
        overall_accuracy=overall,
        overall_accuracy_std=overall_std,
        runs=len(reports),
        group_names=reports[0].group_names,
    )


def rank_methods(
    reports: Mapping[str, FairnessReport], metric: str = METRIC_PARITY
) -> List[Tuple[str, Optional[float]]]:
    """
    Order methods from fairest to least fair by mean group delta.

    Methods whose metric is undefined sort last.
    """
    if metric not in FAIRNESS_METRICS:
        raise MetricError(f"Methods are ranked by a fairness delta, not {metric!r}")
    entries = [
        (name, report.metrics[metric].delta) for name, report in reports.items()
    ]
    return sorted(
        entries, key=lambda entry: (entry[1] is None, entry[1] or 0.0, entry[0])
    )
