"""Authentication metrics over scored genuine/impostor samples.

A sample is accepted when its score is >= the threshold. Thresholds are the
distinct scores plus +inf, so the curve runs from (FAR 0, FRR 1) at +inf to
(FAR 1, FRR 0) at the smallest score.
"""

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np


class MetricsError(ValueError):
    pass


@dataclass
class ScoreSet:
    scores: np.ndarray
    labels: np.ndarray  # True = genuine user

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64).ravel()
        self.labels = np.asarray(self.labels).astype(bool).ravel()
        if self.scores.size == 0:
            raise MetricsError("score set is empty")
        if self.scores.shape != self.labels.shape:
            raise MetricsError(f"{self.scores.size} scores but {self.labels.size} labels")
        if not np.all(np.isfinite(self.scores)):
            raise MetricsError("scores must be finite")

    @property
    def n_genuine(self):
        return int(self.labels.sum())

    @property
    def n_impostor(self):
        return int((~self.labels).sum())

    def require_both(self):
        if self.n_genuine == 0 or self.n_impostor == 0:
            raise MetricsError("threshold metrics need both genuine and impostor samples")
        return self

    def to_dict(self):
        return {"scores": self.scores.tolist(), "labels": self.labels.astype(int).tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["scores"], d["labels"])


def _as_scoreset(s, labels=None):
    if isinstance(s, ScoreSet):
        return s.require_both()
    return ScoreSet(s, labels).require_both()


@dataclass
class RocCurve:
    thresholds: np.ndarray  # decreasing, starting at +inf
    far: np.ndarray
    frr: np.ndarray

    @property
    def tar(self):
        return 1.0 - self.frr

    def rows(self):
        return list(zip(self.thresholds.tolist(), self.far.tolist(), self.frr.tolist(), self.tar.tolist()))


def roc_curve(s, labels=None):
    s = _as_scoreset(s, labels)
    thr = np.concatenate([[np.inf], np.unique(s.scores)[::-1]])
    gen = np.sort(s.scores[s.labels])
    imp = np.sort(s.scores[~s.labels])
    # accepted counts: number of scores >= t
    acc_gen = len(gen) - np.searchsorted(gen, thr, side="left")
    acc_imp = len(imp) - np.searchsorted(imp, thr, side="left")
    far = acc_imp / len(imp)
    frr = 1.0 - acc_gen / len(gen)
    return RocCurve(thr, far, frr)


def auroc(s, labels=None):
    """Trapezoidal area under (FAR, TAR); equals the U statistic with half credit for ties."""
    c = roc_curve(s, labels)
    return float(np.sum(np.diff(c.far) * (c.tar[1:] + c.tar[:-1]) / 2.0))


@dataclass
class EerInterval:
    lower: float
    upper: float

    def __post_init__(self):
        if not 0.0 <= self.lower <= self.upper <= 1.0:
            raise MetricsError(f"invalid EER interval ({self.lower}, {self.upper})")

    @property
    def width(self):
        return self.upper - self.lower


def eer_interval(s, labels=None):
    """Walk thresholds from +inf downward and stop at the first with FAR >= FRR.

    With ties the two rates can jump past each other; the interval is then
    (min, max) of FAR and FRR at that threshold.
    """
    c = roc_curve(s, labels)
    i = int(np.argmax(c.far >= c.frr))
    a, b = float(c.far[i]), float(c.frr[i])
    return EerInterval(min(a, b), max(a, b))


def far_at_zero(s, labels=None, frr_tol=0.01):
    """FAR at the largest threshold whose FRR is below ``frr_tol``; 1.0 if none is."""
    c = roc_curve(s, labels)
    ok = np.flatnonzero(c.frr < frr_tol)
    if ok.size == 0:
        return 1.0
    return float(c.far[ok[0]])


@dataclass
class MetricsReport:
    auroc: float
    eer: EerInterval
    far_at_zero: float
    roc: list = field(default_factory=list)
    n_genuine: int = 0
    n_impostor: int = 0
    config: dict = field(default_factory=dict)

    def summary(self):
        return {"auroc": self.auroc, "eer_lower": self.eer.lower, "eer_upper": self.eer.upper,
                "far_at_zero": self.far_at_zero, "n_genuine": self.n_genuine, "n_impostor": self.n_impostor}

    def to_dict(self):
        d = asdict(self)
        d["roc"] = [[_finite(v) for v in row] for row in self.roc]
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        roc = [tuple(math.inf if v == "inf" else v for v in row) for row in d.get("roc", [])]
        return cls(d["auroc"], EerInterval(**d["eer"]), d["far_at_zero"], roc, d.get("n_genuine", 0),
                   d.get("n_impostor", 0), d.get("config", {}))

    def write_roc_csv(self, path):
        write_roc_csv(path, self.roc)


def _finite(v):
    return "inf" if v == math.inf else v


def evaluate_scores(s, labels=None, config=None, frr_tol=0.01):
    s = _as_scoreset(s, labels)
    c = roc_curve(s)
    return MetricsReport(auroc(s), eer_interval(s), far_at_zero(s, frr_tol=frr_tol), c.rows(),
                         s.n_genuine, s.n_impostor, dict(config or {}))


def write_roc_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["threshold", "far", "frr", "tar"])
        for t, far, frr, tar in rows:
            w.writerow([_finite(t), repr(float(far)), repr(float(frr)), repr(float(tar))])


def mean_reports(reports):
    """Average summary metrics over repetitions (seeds or users)."""
    if not reports:
        raise MetricsError("no reports to average")
    keys = reports[0].summary().keys()
    return {k: float(np.mean([r.summary()[k] for r in reports])) for k in keys}
