"""Gesture corpora: raw sensor ingestion, windowing, filtering, normalisation,
temporal splits, and a multi-user gesture simulator.

A gesture is a 200 x 6 array sampled at 50 Hz covering the 4 s before NFC
contact, channels ordered (acc_x, acc_y, acc_z, gyr_x, gyr_y, gyr_z).
"""

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import signal

logger = logging.getLogger(__name__)

SAMPLE_RATE_HZ = 50
WINDOW_STEPS = 200
WINDOW_MS = 4000
STEP_MS = 1000 // SAMPLE_RATE_HZ
MAX_GAP_MS = 200
CHANNELS = ("acc_x", "acc_y", "acc_z", "gyr_x", "gyr_y", "gyr_z")
SENSOR_TAGS = {"acc": "accelerometer", "gyr": "gyroscope",
               "accelerometer": "accelerometer", "gyroscope": "gyroscope"}
CSV_HEADER = ["gesture_id", "sensor", "t_ms", "x", "y", "z"]


class DatasetError(ValueError):
    pass


class CoverageError(DatasetError):
    pass


@dataclass(frozen=True)
class RawRecord:
    user_id: str
    gesture_id: str
    sensor: str
    t_ms: int
    x: float
    y: float
    z: float


@dataclass
class Gesture:
    user_id: str
    gesture_id: str
    series: np.ndarray
    terminal: Optional[int] = None
    is_gesture: bool = True
    nfc_t_ms: Optional[int] = None
    synthetic: bool = False
    strategy: Optional[str] = None

    def __post_init__(self):
        self.series = np.asarray(self.series, dtype=np.float64)
        if self.series.shape != (WINDOW_STEPS, len(CHANNELS)):
            raise DatasetError(f"gesture {self.gesture_id}: series shape {self.series.shape}, expected (200, 6)")
        if not np.all(np.isfinite(self.series)):
            raise DatasetError(f"gesture {self.gesture_id}: non-finite values")

    def with_series(self, series, **changes):
        fields = {k: v for k, v in self.__dict__.items() if k != "series"}
        fields.update(changes)
        return Gesture(series=series, **fields)

    def to_record(self):
        rec = {"user_id": self.user_id, "gesture_id": self.gesture_id, "terminal": self.terminal,
               "is_gesture": self.is_gesture, "nfc_t_ms": self.nfc_t_ms,
               "series": self.series.tolist()}
        if self.synthetic:
            rec["synthetic"] = True
            rec["strategy"] = self.strategy
        return rec

    @classmethod
    def from_record(cls, rec):
        return cls(user_id=str(rec["user_id"]), gesture_id=str(rec["gesture_id"]),
                   series=np.array(rec["series"], dtype=np.float64), terminal=rec.get("terminal"),
                   is_gesture=bool(rec.get("is_gesture", True)), nfc_t_ms=rec.get("nfc_t_ms"),
                   synthetic=bool(rec.get("synthetic", False)), strategy=rec.get("strategy"))


@dataclass
class SplitSpec:
    train: list
    validation: list
    test: list
    seed: int

    def to_json(self):
        return json.dumps(asdict(self), indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))


@dataclass
class NormStats:
    mean: np.ndarray
    std: np.ndarray

    def to_dict(self):
        return {"mean": list(map(float, self.mean)), "std": list(map(float, self.std)), "channels": list(CHANNELS)}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["mean"], dtype=np.float64), np.array(d["std"], dtype=np.float64))


@dataclass
class SimUserProfile:
    """Per-user generative parameters for simulated gestures (times in seconds)."""

    user_id: str
    bump_amplitudes: np.ndarray  # (6, 2)
    bump_centers: np.ndarray  # (6, 2)
    bump_widths: np.ndarray  # (6, 2)
    ramp_amplitudes: np.ndarray  # (6,)
    ramp_rate: float
    ramp_center: float
    noise_sigma: float
    baseline: np.ndarray = field(default_factory=lambda: np.zeros(6))

    def __post_init__(self):
        if np.any(np.asarray(self.bump_widths) <= 0):
            raise DatasetError(f"profile {self.user_id}: bump widths must be positive")
        if self.noise_sigma < 0:
            raise DatasetError(f"profile {self.user_id}: noise sigma must be non-negative")


# --- raw ingestion -----------------------------------------------------------

def parse_user_file(path, user_id=None):
    """Read one per-user sensor CSV into RawRecords, preserving row order."""
    path = Path(path)
    user_id = user_id or path.stem
    records = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != CSV_HEADER:
            raise DatasetError(f"{path}:1: expected header {','.join(CSV_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise DatasetError(f"{path}:{lineno}: expected {len(CSV_HEADER)} columns, got {len(row)}")
            gid, tag, t, x, y, z = (c.strip() for c in row)
            sensor = SENSOR_TAGS.get(tag)
            if sensor is None:
                raise DatasetError(f"{path}:{lineno}: unknown sensor tag {tag!r}")
            try:
                t_ms = int(t)
                vals = float(x), float(y), float(z)
            except ValueError as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from None
            if t_ms < 0:
                raise DatasetError(f"{path}:{lineno}: negative timestamp")
            records.append(RawRecord(user_id, gid, sensor, t_ms, *vals))
    return records


def read_manifest(path):
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if "user_id" not in data or "gestures" not in data:
        raise DatasetError(f"{path}: manifest needs 'user_id' and 'gestures'")
    return data


def grid_times(nfc_t_ms):
    """The 200 sample times of the window ending at ``nfc_t_ms``."""
    return nfc_t_ms - STEP_MS * np.arange(WINDOW_STEPS - 1, -1, -1, dtype=np.float64)


def _resample_sensor(records, sensor, grid):
    recs = sorted((r for r in records if r.sensor == sensor), key=lambda r: r.t_ms)
    if not recs:
        raise CoverageError(f"no {sensor} samples")
    t = np.array([r.t_ms for r in recs], dtype=np.float64)
    xyz = np.array([(r.x, r.y, r.z) for r in recs])
    t, keep = np.unique(t, return_index=True)
    xyz = xyz[keep]
    # Gaps are measured within the window only; missing edges count as gaps.
    knots = np.unique(np.concatenate([np.clip(t, grid[0], grid[-1]), [grid[0], grid[-1]]]))
    gap = float(np.diff(knots).max())
    if gap > MAX_GAP_MS:
        raise CoverageError(f"{sensor}: coverage gap of {gap:.0f} ms in window")
    return np.stack([np.interp(grid, t, xyz[:, k]) for k in range(3)], axis=1)


def align_and_window(records, nfc_t_ms, user_id=None, gesture_id=None, terminal=None, is_gesture=True):
    """Resample both sensors onto the 50 Hz grid ending at NFC contact."""
    grid = grid_times(nfc_t_ms)
    acc = _resample_sensor(records, "accelerometer", grid)
    gyr = _resample_sensor(records, "gyroscope", grid)
    first = records[0] if records else None
    return Gesture(user_id=user_id or (first.user_id if first else ""),
                   gesture_id=gesture_id or (first.gesture_id if first else ""),
                   series=np.concatenate([acc, gyr], axis=1), terminal=terminal,
                   is_gesture=is_gesture, nfc_t_ms=int(nfc_t_ms))


def partition_windows(records, user_id, gesture_id):
    """Cut a non-gesture recording into consecutive non-overlapping 4 s windows."""
    times = [r.t_ms for r in records]
    start, end = min(times), max(times)
    out = []
    k = 0
    window_end = start + WINDOW_MS
    while window_end <= end:
        try:
            out.append(align_and_window(records, window_end, user_id, f"{gesture_id}#{k}", None, False))
        except CoverageError as exc:
            logger.warning("skipping window %s#%d: %s", gesture_id, k, exc)
        k += 1
        window_end += WINDOW_MS
    return out


def ingest_user(csv_path, manifest_path, filter_cfg=None):
    manifest = read_manifest(manifest_path)
    user_id = str(manifest["user_id"])
    records = parse_user_file(csv_path, user_id)
    by_gesture = {}
    for r in records:
        by_gesture.setdefault(r.gesture_id, []).append(r)
    gestures = []
    for entry in manifest["gestures"]:
        gid = str(entry["gesture_id"])
        recs = by_gesture.get(gid)
        if not recs:
            raise DatasetError(f"{csv_path}: no records for manifest gesture {gid}")
        if entry.get("is_gesture", True):
            if entry.get("nfc_t_ms") is None:
                raise DatasetError(f"{manifest_path}: gesture {gid} lacks nfc_t_ms")
            gestures.append(align_and_window(recs, entry["nfc_t_ms"], user_id, gid,
                                             entry.get("terminal"), True))
        else:
            gestures.extend(partition_windows(recs, user_id, gid))
    if filter_cfg is not None:
        gestures = [lowpass_filter(g, **filter_cfg) for g in gestures]
    return gestures


# --- filtering and normalisation ---------------------------------------------

def lowpass(series, cutoff_hz=10.0, order=2, fs=SAMPLE_RATE_HZ):
    """Zero-phase Butterworth low-pass along axis 0."""
    nyquist = fs / 2.0
    if not 0 < cutoff_hz < nyquist:
        raise DatasetError(f"cutoff must lie in (0, {nyquist}) Hz, got {cutoff_hz}")
    if order < 1:
        raise DatasetError("filter order must be >= 1")
    b, a = signal.butter(order, cutoff_hz / nyquist)
    return signal.filtfilt(b, a, np.asarray(series, dtype=np.float64), axis=0)


def lowpass_filter(g, cutoff_hz=10.0, order=2):
    return g.with_series(lowpass(g.series, cutoff_hz, order))


def fit_norm_stats(train):
    if not train:
        raise DatasetError("cannot fit normalisation on an empty training set")
    pooled = np.concatenate([g.series for g in train], axis=0)
    mean = pooled.mean(axis=0)
    std = pooled.std(axis=0)
    flat = np.flatnonzero(std <= 1e-12)
    if flat.size:
        raise DatasetError(f"zero-variance channel(s) {[CHANNELS[i] for i in flat]} in training data")
    return NormStats(mean, std)


def apply_norm(g, stats):
    return g.with_series((g.series - stats.mean) / stats.std)


def invert_norm(g, stats):
    return g.with_series(g.series * stats.std + stats.mean)


# --- splitting ------------------------------------------------------------------

def _order_key(g):
    return (g.nfc_t_ms if g.nfc_t_ms is not None else -1, g.gesture_id)


def temporal_split(corpus, train_fraction=2 / 3, val_fraction=0.2, seed=0):
    """Per user: earliest fraction to train+validation, the rest to test.

    Validation is drawn at random from train+validation separately for each
    (user, is_gesture) group: floor(val_fraction * n) items, at least one when
    the group has two or more.
    """
    rng = np.random.default_rng(seed)
    by_user = {}
    for g in corpus:
        by_user.setdefault(g.user_id, []).append(g)
    train, val, test = [], [], []
    for user in sorted(by_user):
        items = sorted(by_user[user], key=_order_key)
        if len(items) < 3:
            raise DatasetError(f"user {user!r} has {len(items)} gestures; need at least 3 to split")
        n_tv = int(math.floor(len(items) * train_fraction + 1e-9))
        n_tv = min(max(n_tv, 1), len(items) - 1)
        trainval, held = items[:n_tv], items[n_tv:]
        test.extend(g.gesture_id for g in held)
        for label in (True, False):
            group = [g.gesture_id for g in trainval if g.is_gesture == label]
            if not group:
                continue
            k = int(math.floor(val_fraction * len(group) + 1e-9))
            if len(group) >= 2:
                k = max(k, 1)
            chosen = set(rng.choice(len(group), size=k, replace=False).tolist()) if k else set()
            for i, gid in enumerate(group):
                (val if i in chosen else train).append(gid)
    return SplitSpec(train=train, validation=val, test=test, seed=seed)


# --- simulator -----------------------------------------------------------------

def random_profiles(n_users, seed=0, noise_sigma=0.1, spread=0.6):
    """Draw user profiles as perturbations of one shared population template.

    ``spread`` scales how far users sit from the template, i.e. how separable
    they are; ``noise_sigma`` also drives within-user variability.
    """
    rng = np.random.default_rng(seed)
    tmpl_amp = rng.normal(0.0, 1.5, (6, 2))
    tmpl_centers = np.tile([1.6, 3.0], (6, 1)) + rng.normal(0, 0.15, (6, 2))
    tmpl_widths = np.full((6, 2), 0.3)
    tmpl_ramp = rng.normal(0.0, 2.0, 6)
    tmpl_base = np.array([0.0, 0.0, 9.81, 0.0, 0.0, 0.0])
    profiles = []
    for u in range(n_users):
        profiles.append(SimUserProfile(
            user_id=f"u{u}",
            bump_amplitudes=tmpl_amp + spread * rng.normal(0, 1.0, (6, 2)),
            bump_centers=np.clip(tmpl_centers + spread * rng.normal(0, 0.3, (6, 2)), 0.5, 3.9),
            bump_widths=np.clip(tmpl_widths * np.exp(spread * rng.normal(0, 0.4, (6, 2))), 0.08, 1.0),
            ramp_amplitudes=tmpl_ramp + spread * rng.normal(0, 1.0, 6),
            ramp_rate=float(3.0 * np.exp(spread * rng.normal(0, 0.3))),
            ramp_center=float(2.5 + spread * rng.normal(0, 0.3)),
            noise_sigma=noise_sigma,
            baseline=tmpl_base + spread * rng.normal(0, 0.5, 6),
        ))
    return profiles


def simulate_gesture_series(profile, rng, terminal=1):
    """Logistic ramp plus two Gaussian bumps per channel, with jitter and noise.

    Timing shift, amplitude scale and terminal effect all scale with the
    profile's noise sigma, so a noiseless profile always yields one curve.
    """
    t = np.arange(WINDOW_STEPS) / SAMPLE_RATE_HZ
    s = profile.noise_sigma
    shift = rng.normal(0.0, 2.0 * s)
    scale = 1.0 + rng.normal(0.0, 2.0 * s, 6)
    term = 1.0 + 2.0 * s * ((terminal or 4) - 4) / 3.0
    ramp = 1.0 / (1.0 + np.exp(-profile.ramp_rate * (t[:, None] - profile.ramp_center - shift)))
    out = profile.baseline + term * profile.ramp_amplitudes * ramp
    for b in range(profile.bump_amplitudes.shape[1]):
        z = (t[:, None] - profile.bump_centers[:, b] - shift) / profile.bump_widths[:, b]
        out = out + profile.bump_amplitudes[:, b] * np.exp(-0.5 * z * z)
    out = out * scale
    return out + rng.normal(0.0, s, out.shape) if s > 0 else out


def simulate_nongesture_series(rng, noise_sigma=0.1):
    t = np.arange(WINDOW_STEPS) / SAMPLE_RATE_HZ
    out = np.zeros((WINDOW_STEPS, 6))
    for c in range(6):
        for _ in range(3):
            f = rng.uniform(0.2, 3.0)
            out[:, c] += rng.uniform(0.2, 1.5) * np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi))
    out[:, 2] += 9.81
    return out + rng.normal(0.0, noise_sigma, out.shape)


def _nongesture_time(k, n_non, n_gest):
    # spread evenly over the gesture period, on even minutes (gestures sit on odd ones)
    slot = int((k + 0.5) * n_gest / n_non)
    return 60_000 * (2 * slot + 2) + k


def simulate_corpus(profiles, n_gestures_per_user, n_nongestures=0, seed=0):
    """Deterministic multi-user corpus; terminals cycle 1..7 in temporal order."""
    if n_gestures_per_user < 1:
        raise DatasetError("n_gestures_per_user must be >= 1")
    if n_nongestures < 0:
        raise DatasetError("n_nongestures must be >= 0")
    root = np.random.SeedSequence(seed)
    corpus = []
    for profile, ss in zip(profiles, root.spawn(len(profiles))):
        rng = np.random.default_rng(ss)
        for k in range(n_gestures_per_user):
            terminal = k % 7 + 1
            corpus.append(Gesture(
                user_id=profile.user_id, gesture_id=f"{profile.user_id}-g{k:04d}",
                series=simulate_gesture_series(profile, rng, terminal), terminal=terminal,
                is_gesture=True, nfc_t_ms=60_000 * (2 * k + 1)))
        for k in range(n_nongestures):
            corpus.append(Gesture(
                user_id=profile.user_id, gesture_id=f"{profile.user_id}-n{k:04d}",
                series=simulate_nongesture_series(rng, max(profile.noise_sigma, 0.0)),
                terminal=None, is_gesture=False, nfc_t_ms=_nongesture_time(k, n_nongestures, n_gestures_per_user)))
    return corpus


# --- corpus files ----------------------------------------------------------------

def write_corpus(path, corpus):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for g in corpus:
            fh.write(json.dumps(g.to_record(), separators=(",", ":")) + "\n")


def read_corpus(path):
    out = []
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(Gesture.from_record(json.loads(line)))
            except (KeyError, json.JSONDecodeError) as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from None
    return out


def stack(corpus):
    return np.stack([g.series for g in corpus]) if corpus else np.zeros((0, WINDOW_STEPS, 6))


def select(corpus, ids):
    wanted = set(ids)
    return [g for g in corpus if g.gesture_id in wanted]
