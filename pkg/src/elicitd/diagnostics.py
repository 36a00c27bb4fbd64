"""Performance measures over elicited distributions on a labeled dataset.

Every metric is computed from the per-record probability samples and their
fitted distributions; nothing here touches the network. Percentages are
kept at full precision internally and rounded only when a report is
serialized.
"""

from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError, DomainError
from .betafit import ElicitedDistribution
from .sampling import ProbabilitySample
from .stats import DEFAULT_ENTROPY_BINS, distribution_entropy

MODE_BINS = 20
ENTROPY_HIST_BINS = 20  # width 0.05 over [0, 1]

_OPPOSING_WORDS = {0: "Full Agreement", 1: "One Opposing", 2: "Two Opposing", 3: "Three Opposing"}


class PointStatistic(enum.Enum):
    MEAN = "mean"
    MEDIAN = "median"
    MODE = "mode"


@dataclass(frozen=True)
class EvaluatedRecord:
    """One test input: its sample, its fit, and the ground truth."""

    record_id: str
    label: int
    sample: ProbabilitySample
    elicited: ElicitedDistribution
    agreement: int | None = None

    def __post_init__(self):
        if self.label not in (0, 1):
            raise DataError(f"label must be 0 or 1, got {self.label}")


@dataclass(frozen=True)
class CIOutcome:
    correct: bool
    centered: bool


@dataclass(frozen=True)
class ConfusionMatrix:
    tn: float
    fp: float
    fn: float
    tp: float

    @property
    def total(self) -> float:
        return self.tn + self.fp + self.fn + self.tp


@dataclass(frozen=True)
class CalibrationBin:
    lo: float
    hi: float
    mean_predicted: float | None
    frequency: float | None
    count: float


@dataclass(frozen=True)
class EntropyHistogram:
    """Counts over ENTROPY_HIST_BINS equal bins of [0, 1] entropy values."""

    counts: tuple[float, ...]

    def edges(self) -> list[tuple[float, float]]:
        w = 1.0 / len(self.counts)
        return [(i * w, (i + 1) * w) for i in range(len(self.counts))]


@dataclass(frozen=True)
class AgreementRow:
    opposing: int
    name: str
    count: float
    mean_entropy: float | None
    pct_centered: float | None


@dataclass(frozen=True)
class DiagnosticsReport:
    n_records: float
    accuracy_mean: float
    accuracy_mode: float
    accuracy_median: float
    accuracy_auc: float
    accuracy_ci95: float
    pct_ci_correct_containing_half: float | None
    pct_ci_correct_either_side: float | None
    f_score: float
    confusion: ConfusionMatrix
    calibration: tuple[CalibrationBin, ...]
    entropy_all: EntropyHistogram
    entropy_ci_correct: EntropyHistogram
    entropy_ci_incorrect: EntropyHistogram
    agreement: tuple[AgreementRow, ...]
    entropy_bins: int
    warnings: tuple[str, ...] = ()


def sample_mode(values: np.ndarray) -> float:
    """Midpoint of the fullest of 20 equal-width bins; ties go low."""
    counts, _ = np.histogram(values, bins=MODE_BINS, range=(0.0, 1.0))
    idx = int(np.argmax(counts))  # argmax takes the first, i.e. lower, bin on ties
    return (idx + 0.5) / MODE_BINS


def point_prediction(e: EvaluatedRecord, statistic: PointStatistic) -> int:
    values = e.sample.values
    if statistic is PointStatistic.MEAN:
        stat = float(np.mean(values))
    elif statistic is PointStatistic.MEDIAN:
        stat = float(np.median(values))
    else:
        stat = sample_mode(values)
    return 1 if stat >= 0.5 else 0


def auc_prediction(e: EvaluatedRecord) -> int:
    """Label of the side of 0.5 holding more sample mass; ties at 0.5 split
    evenly between the sides, an exactly balanced split predicts 0."""
    values = e.sample.values
    above = float(np.mean(values > 0.5)) + 0.5 * float(np.mean(values == 0.5))
    return 1 if above > 0.5 else 0


def ci_correct(e: EvaluatedRecord) -> CIOutcome:
    """Centered intervals (containing 0.5, boundaries included) are correct
    for either label; sided intervals must lie on the true label's side."""
    lo, hi = e.elicited.ci95
    if lo <= 0.5 <= hi:
        return CIOutcome(correct=True, centered=True)
    if hi < 0.5:
        return CIOutcome(correct=e.label == 0, centered=False)
    return CIOutcome(correct=e.label == 1, centered=False)


def confusion(records: list[EvaluatedRecord]) -> ConfusionMatrix:
    """Confusion counts under the Mean point prediction."""
    if not records:
        raise DataError("no records")
    tn = fp = fn = tp = 0
    for e in records:
        pred = point_prediction(e, PointStatistic.MEAN)
        if e.label == 1:
            tp += pred
            fn += 1 - pred
        else:
            fp += pred
            tn += 1 - pred
    return ConfusionMatrix(float(tn), float(fp), float(fn), float(tp))


def f_score(cm: ConfusionMatrix) -> float:
    """F = 2*spec*sens/(spec+sens); a rate with an empty class counts as 0."""
    sens = cm.tp / (cm.tp + cm.fn) if cm.tp + cm.fn > 0 else 0.0
    spec = cm.tn / (cm.tn + cm.fp) if cm.tn + cm.fp > 0 else 0.0
    if spec + sens == 0.0:
        return 0.0
    return 2.0 * spec * sens / (spec + sens)


def calibration(records: list[EvaluatedRecord], bins: int = 10) -> tuple[CalibrationBin, ...]:
    """Bin records by mean sampled probability; per bin, the mean prediction
    and the empirical fraction of label-1 records. Empty bins keep count 0
    with undefined prediction and frequency."""
    if not records:
        raise DataError("no records")
    if bins < 1:
        raise DomainError(f"need at least 1 bin, got {bins}")
    means = np.array([float(np.mean(e.sample.values)) for e in records])
    labels = np.array([e.label for e in records], dtype=np.float64)
    idx = np.clip(np.floor(means * bins).astype(int), 0, bins - 1)
    out = []
    for b in range(bins):
        member = idx == b
        count = int(member.sum())
        if count == 0:
            out.append(CalibrationBin(b / bins, (b + 1) / bins, None, None, 0.0))
        else:
            out.append(
                CalibrationBin(
                    b / bins,
                    (b + 1) / bins,
                    float(means[member].mean()),
                    float(labels[member].mean()),
                    float(count),
                )
            )
    return tuple(out)


def _entropy_hist(entropies: list[float]) -> EntropyHistogram:
    counts, _ = np.histogram(np.array(entropies), bins=ENTROPY_HIST_BINS, range=(0.0, 1.0))
    return EntropyHistogram(tuple(float(c) for c in counts))


def entropy_histograms(
    records: list[EvaluatedRecord], entropy_bins: int = DEFAULT_ENTROPY_BINS
):
    """Histograms of per-record distribution entropy: all records, then the
    CI-correct and CI-incorrect subsets."""
    if not records:
        raise DataError("no records")
    ent_all, ent_ok, ent_bad = [], [], []
    for e in records:
        h = distribution_entropy(e.sample, entropy_bins)
        ent_all.append(h)
        if ci_correct(e).correct:
            ent_ok.append(h)
        else:
            ent_bad.append(h)
    return _entropy_hist(ent_all), _entropy_hist(ent_ok), _entropy_hist(ent_bad)


def opposing_name(opposing: int) -> str:
    return _OPPOSING_WORDS.get(opposing, f"{opposing} Opposing")


def agreement_analysis(
    records: list[EvaluatedRecord],
    panel_size: int = 7,
    entropy_bins: int = DEFAULT_ENTROPY_BINS,
) -> tuple[AgreementRow, ...]:
    """Group records by how many panelists opposed the assigned label
    (panel_size - agreement); per group, mean distribution entropy and the
    percentage of centered 95% intervals."""
    if not records:
        raise DataError("no records")
    majority = math.ceil(panel_size / 2)
    groups: dict[int, list[EvaluatedRecord]] = {
        o: [] for o in range(panel_size - majority + 1)
    }
    for e in records:
        if e.agreement is None:
            raise DataError(f"record {e.record_id} has no agreement count")
        if not (majority <= e.agreement <= panel_size):
            raise DataError(
                f"record {e.record_id}: agreement {e.agreement} outside "
                f"[{majority}, {panel_size}]"
            )
        groups[panel_size - e.agreement].append(e)
    rows = []
    for o in sorted(groups):
        members = groups[o]
        if not members:
            rows.append(AgreementRow(o, opposing_name(o), 0.0, None, None))
            continue
        ents = [distribution_entropy(e.sample, entropy_bins) for e in members]
        centered = [ci_correct(e).centered for e in members]
        rows.append(
            AgreementRow(
                o,
                opposing_name(o),
                float(len(members)),
                float(np.mean(ents)),
                100.0 * float(np.mean(centered)),
            )
        )
    return tuple(rows)


def summarize(
    records: list[EvaluatedRecord],
    calibration_bins: int = 10,
    entropy_bins: int = DEFAULT_ENTROPY_BINS,
    panel_size: int = 7,
) -> DiagnosticsReport:
    """Assemble every measure into one report.

    The agreement table is included when every record carries an agreement
    count and omitted when none does; a mixture is an error.
    """
    if not records:
        raise DataError("no records")
    records = sorted(records, key=lambda e: e.record_id)
    n = len(records)
    warnings: list[str] = []

    correct = {stat: 0 for stat in PointStatistic}
    auc_hits = 0
    ci_hits = 0
    ci_centered_hits = 0
    for e in records:
        for stat in PointStatistic:
            correct[stat] += point_prediction(e, stat) == e.label
        auc_hits += auc_prediction(e) == e.label
        outcome = ci_correct(e)
        if outcome.correct:
            ci_hits += 1
            ci_centered_hits += outcome.centered

    cm = confusion(records)
    if cm.tp + cm.fn == 0 or cm.tn + cm.fp == 0:
        warnings.append("confusion matrix has an empty true class; its rate was set to 0")

    if ci_hits > 0:
        pct_centered = 100.0 * ci_centered_hits / ci_hits
        pct_sided = 100.0 * (ci_hits - ci_centered_hits) / ci_hits
    else:
        pct_centered = pct_sided = None
        warnings.append("no CI-correct records; the centered/sided split is undefined")

    ent_all, ent_ok, ent_bad = entropy_histograms(records, entropy_bins)

    have_agreement = [e.agreement is not None for e in records]
    if all(have_agreement):
        agreement = agreement_analysis(records, panel_size, entropy_bins)
    elif not any(have_agreement):
        agreement = ()
    else:
        raise DataError("agreement counts must be present on all records or none")

    return DiagnosticsReport(
        n_records=float(n),
        accuracy_mean=100.0 * correct[PointStatistic.MEAN] / n,
        accuracy_mode=100.0 * correct[PointStatistic.MODE] / n,
        accuracy_median=100.0 * correct[PointStatistic.MEDIAN] / n,
        accuracy_auc=100.0 * auc_hits / n,
        accuracy_ci95=100.0 * ci_hits / n,
        pct_ci_correct_containing_half=pct_centered,
        pct_ci_correct_either_side=pct_sided,
        f_score=f_score(cm),
        confusion=cm,
        calibration=calibration(records, calibration_bins),
        entropy_all=ent_all,
        entropy_ci_correct=ent_ok,
        entropy_ci_incorrect=ent_bad,
        agreement=agreement,
        entropy_bins=entropy_bins,
        warnings=tuple(warnings),
    )


def _wmean(pairs) -> tuple[float | None, float]:
    """Weighted mean over (value, weight) pairs, skipping undefined values."""
    num = den = 0.0
    for value, weight in pairs:
        if value is None or weight == 0.0:
            continue
        num += value * weight
        den += weight
    if den == 0.0:
        return None, 0.0
    return num / den, den


def average_reports(reports: list[DiagnosticsReport]) -> DiagnosticsReport:
    """Mean report across train/test splits.

    Scalar measures are averaged directly; table cells are count-weighted
    so that pooling splits of different sizes stays meaningful. Averaging
    identical reports returns the same report.
    """
    if not reports:
        raise DataError("no reports")
    if len({len(r.calibration) for r in reports}) != 1:
        raise DataError("reports use different calibration binnings")
    if len({tuple(row.opposing for row in r.agreement) for r in reports}) != 1:
        raise DataError("reports use different agreement tables")
    if len({r.entropy_bins for r in reports}) != 1:
        raise DataError("reports use different entropy binnings")
    k = len(reports)

    def mean_of(get):
        vals = [get(r) for r in reports]
        if any(v is None for v in vals):
            vals = [v for v in vals if v is not None]
            if not vals:
                return None
        return sum(vals) / len(vals)

    cal = []
    for b in range(len(reports[0].calibration)):
        cells = [r.calibration[b] for r in reports]
        mp, _ = _wmean((c.mean_predicted, c.count) for c in cells)
        fr, _ = _wmean((c.frequency, c.count) for c in cells)
        cal.append(
            CalibrationBin(cells[0].lo, cells[0].hi, mp, fr, sum(c.count for c in cells) / k)
        )

    def avg_hist(get):
        stacks = [get(r).counts for r in reports]
        return EntropyHistogram(tuple(sum(col) / k for col in zip(*stacks)))

    agr = []
    for i in range(len(reports[0].agreement)):
        rows = [r.agreement[i] for r in reports]
        me, _ = _wmean((row.mean_entropy, row.count) for row in rows)
        pc, _ = _wmean((row.pct_centered, row.count) for row in rows)
        agr.append(
            AgreementRow(
                rows[0].opposing,
                rows[0].name,
                sum(row.count for row in rows) / k,
                me,
                pc,
            )
        )

    warnings = tuple(dict.fromkeys(w for r in reports for w in r.warnings))
    return DiagnosticsReport(
        n_records=mean_of(lambda r: r.n_records),
        accuracy_mean=mean_of(lambda r: r.accuracy_mean),
        accuracy_mode=mean_of(lambda r: r.accuracy_mode),
        accuracy_median=mean_of(lambda r: r.accuracy_median),
        accuracy_auc=mean_of(lambda r: r.accuracy_auc),
        accuracy_ci95=mean_of(lambda r: r.accuracy_ci95),
        pct_ci_correct_containing_half=mean_of(lambda r: r.pct_ci_correct_containing_half),
        pct_ci_correct_either_side=mean_of(lambda r: r.pct_ci_correct_either_side),
        f_score=mean_of(lambda r: r.f_score),
        confusion=ConfusionMatrix(
            mean_of(lambda r: r.confusion.tn),
            mean_of(lambda r: r.confusion.fp),
            mean_of(lambda r: r.confusion.fn),
            mean_of(lambda r: r.confusion.tp),
        ),
        calibration=tuple(cal),
        entropy_all=avg_hist(lambda r: r.entropy_all),
        entropy_ci_correct=avg_hist(lambda r: r.entropy_ci_correct),
        entropy_ci_incorrect=avg_hist(lambda r: r.entropy_ci_incorrect),
        agreement=tuple(agr),
        entropy_bins=reports[0].entropy_bins,
        warnings=warnings,
    )


def _round(x, nd=2):
    return None if x is None else round(x, nd)


def report_json_dict(report: DiagnosticsReport) -> dict:
    """JSON-ready dict with canonical key order; percentages at 2 decimals."""
    return {
        "n_records": report.n_records,
        "accuracies_pct": {
            "mean": _round(report.accuracy_mean),
            "mode": _round(report.accuracy_mode),
            "median": _round(report.accuracy_median),
            "auc": _round(report.accuracy_auc),
            "ci95": _round(report.accuracy_ci95),
        },
        "ci_correct_split_pct": {
            "containing_half": _round(report.pct_ci_correct_containing_half),
            "either_side": _round(report.pct_ci_correct_either_side),
        },
        "f_score": _round(report.f_score, 6),
        "confusion": {
            "tn": report.confusion.tn,
            "fp": report.confusion.fp,
            "fn": report.confusion.fn,
            "tp": report.confusion.tp,
        },
        "calibration": [
            {
                "lo": b.lo,
                "hi": b.hi,
                "mean_predicted": b.mean_predicted,
                "frequency": b.frequency,
                "count": b.count,
            }
            for b in report.calibration
        ],
        "entropy_histograms": {
            name: [
                {"bin_lo": lo, "bin_hi": hi, "count": c}
                for (lo, hi), c in zip(hist.edges(), hist.counts)
            ]
            for name, hist in (
                ("all", report.entropy_all),
                ("ci_correct", report.entropy_ci_correct),
                ("ci_incorrect", report.entropy_ci_incorrect),
            )
        },
        "agreement": [
            {
                "opposing": row.opposing,
                "name": row.name,
                "count": row.count,
                "mean_entropy": None if row.mean_entropy is None else round(row.mean_entropy, 6),
                "pct_centered": _round(row.pct_centered),
            }
            for row in report.agreement
        ],
        "entropy_bins": report.entropy_bins,
        "warnings": list(report.warnings),
    }


def _csv(rows: list[list]) -> str:
    buf = io.StringIO()
    for row in rows:
        buf.write(",".join("" if v is None else str(v) for v in row))
        buf.write("\n")
    return buf.getvalue()


def report_csv_tables(report: DiagnosticsReport) -> dict[str, str]:
    """The report as four CSV tables: summary, calibration, entropy, agreement."""
    summary_rows = [
        ["measure", "value"],
        ["n_records", report.n_records],
        ["accuracy_mean_pct", _round(report.accuracy_mean)],
        ["accuracy_mode_pct", _round(report.accuracy_mode)],
        ["accuracy_median_pct", _round(report.accuracy_median)],
        ["accuracy_auc_pct", _round(report.accuracy_auc)],
        ["accuracy_ci95_pct", _round(report.accuracy_ci95)],
        ["pct_ci_correct_containing_half", _round(report.pct_ci_correct_containing_half)],
        ["pct_ci_correct_either_side", _round(report.pct_ci_correct_either_side)],
        ["f_score", _round(report.f_score, 6)],
        ["confusion_tn", report.confusion.tn],
        ["confusion_fp", report.confusion.fp],
        ["confusion_fn", report.confusion.fn],
        ["confusion_tp", report.confusion.tp],
    ]
    cal_rows = [["bin_lo", "bin_hi", "mean_predicted", "frequency", "count"]] + [
        [b.lo, b.hi, b.mean_predicted, b.frequency, b.count] for b in report.calibration
    ]
    ent_rows = [["histogram", "bin_lo", "bin_hi", "count"]]
    for name, hist in (
        ("all", report.entropy_all),
        ("ci_correct", report.entropy_ci_correct),
        ("ci_incorrect", report.entropy_ci_incorrect),
    ):
        for (lo, hi), c in zip(hist.edges(), hist.counts):
            ent_rows.append([name, round(lo, 6), round(hi, 6), c])
    agr_rows = [["opposing", "name", "count", "mean_entropy", "pct_centered"]] + [
        [
            row.opposing,
            row.name,
            row.count,
            None if row.mean_entropy is None else round(row.mean_entropy, 6),
            _round(row.pct_centered),
        ]
        for row in report.agreement
    ]
    return {
        "summary": _csv(summary_rows),
        "calibration": _csv(cal_rows),
        "entropy": _csv(ent_rows),
        "agreement": _csv(agr_rows),
    }
