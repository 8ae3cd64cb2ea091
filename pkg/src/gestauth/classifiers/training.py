"""Per-user authentication tasks and the neural training loop.

The positive class is the target user's payment gestures and the negative
class is every other user's payment gestures. Normalisation statistics are
fitted on the task's training inputs only.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ..dataset import apply_norm, fit_norm_stats, select, stack
from ..diffcore import Adam, Tensor, bce_loss


class TrainingError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-4
    pos_weight: float = 4.0
    patience: int = 150
    max_epochs: int = 2000
    batch_size: int = 32
    seed: int = 0
    limited_fraction: float = 1.0

    def __post_init__(self):
        if self.patience < 1:
            raise TrainingError("patience must be >= 1")
        if not 0.0 < self.limited_fraction <= 1.0:
            raise TrainingError("limited_fraction must lie in (0, 1]")
        if self.max_epochs < 1 or self.batch_size < 1:
            raise TrainingError("max_epochs and batch_size must be >= 1")
        if self.lr <= 0 or self.pos_weight <= 0:
            raise TrainingError("lr and pos_weight must be positive")


@dataclass
class AuthTask:
    target_user: str
    X_train: np.ndarray
    y_train: np.ndarray
    X_val: np.ndarray
    y_val: np.ndarray
    X_test: np.ndarray
    y_test: np.ndarray
    test_ids: list
    norm: object

    @property
    def n_positive_train(self):
        return int(self.y_train.sum())


@dataclass
class History:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    best_epoch: int = -1
    best_val_loss: float = math.inf
    stopped_epoch: int = 0

    def to_dict(self):
        return {"train_loss": self.train_loss, "val_loss": self.val_loss, "best_epoch": self.best_epoch,
                "best_val_loss": self.best_val_loss, "stopped_epoch": self.stopped_epoch}


def _limit(gestures, fraction):
    """The earliest ceil(fraction * n) gestures (by NFC time, then id)."""
    if fraction >= 1.0 or not gestures:
        return gestures
    ordered = sorted(gestures, key=lambda g: (g.nfc_t_ms if g.nfc_t_ms is not None else -1, g.gesture_id))
    return ordered[: math.ceil(fraction * len(ordered) - 1e-9)]


def build_auth_task(corpus, split, target_user, limited_fraction=1.0):
    """Assemble normalised train/validation/test arrays for one target user.

    With ``limited_fraction`` < 1 the target user's training and validation
    gestures are each cut to their earliest ceil(f * n); negatives are kept.
    """
    gestures = [g for g in corpus if g.is_gesture]
    if not any(g.user_id == target_user for g in gestures):
        raise TrainingError(f"target user {target_user!r} has no gestures in the corpus")

    def part(ids, limit):
        items = select(gestures, ids)
        pos = [g for g in items if g.user_id == target_user]
        neg = [g for g in items if g.user_id != target_user]
        if limit:
            pos = _limit(pos, limited_fraction)
        return pos + neg

    train = part(split.train, True)
    val = part(split.validation, True)
    test = part(split.test, False)
    if not any(g.user_id == target_user for g in train):
        raise TrainingError(f"no positive training samples for user {target_user!r}")
    norm = fit_norm_stats(train)

    def arrays(items):
        X = stack([apply_norm(g, norm) for g in items])
        y = np.array([1.0 if g.user_id == target_user else 0.0 for g in items])
        return X, y

    X_tr, y_tr = arrays(train)
    X_va, y_va = arrays(val)
    X_te, y_te = arrays(test)
    return AuthTask(target_user, X_tr, y_tr, X_va, y_va, X_te, y_te, [g.gesture_id for g in test], norm)


def _forward(model, X, batch_size=256):
    if len(X) == 0:
        return np.zeros(0)
    out = [model(Tensor(X[i : i + batch_size])).data.reshape(-1) for i in range(0, len(X), batch_size)]
    return np.concatenate(out)


def predict_proba(model, X, batch_size=256):
    """Acceptance probabilities for a (n, 200, 6) array of normalised gestures."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 3 or X.shape[1:] != (200, 6):
        raise TrainingError(f"expected gestures of shape (n, 200, 6), got {X.shape}")
    return _forward(model, X, batch_size)


def evaluate_loss(model, X, y, pos_weight):
    if len(X) == 0:
        return math.nan
    return bce_loss(predict_proba(model, X), y, pos_weight).data.item()


def _snapshot(model):
    return [p.data.copy() for p in model.parameters()]


def _restore(model, snap):
    for p, data in zip(model.parameters(), snap):
        p.data[...] = data


def train_classifier(model, task, cfg=TrainConfig(), log=None):
    """Train with weighted BCE and Adam; restore the best-validation parameters.

    Training stops once validation loss has not improved for ``cfg.patience``
    epochs. Without validation data, training loss is monitored instead.
    """
    if task.y_train.sum() == 0:
        raise TrainingError("no positive samples in the training set")
    rng = np.random.default_rng(cfg.seed)
    opt = Adam(model.parameters(), lr=cfg.lr)
    hist = History()
    best = _snapshot(model)
    n = len(task.y_train)
    since_best = 0
    for epoch in range(cfg.max_epochs):
        order = rng.permutation(n)
        total = 0.0
        for i in range(0, n, cfg.batch_size):
            idx = order[i : i + cfg.batch_size]
            opt.zero_grad()
            out = model(Tensor(task.X_train[idx]))
            loss = bce_loss(out, task.y_train[idx], cfg.pos_weight)
            loss.backward()
            opt.step()
            total += loss.data.item() * len(idx)
        train_loss = total / n
        val_loss = evaluate_loss(model, task.X_val, task.y_val, cfg.pos_weight)
        monitored = train_loss if math.isnan(val_loss) else val_loss
        if not math.isfinite(train_loss):
            raise FloatingPointError(f"training loss became {train_loss} at epoch {epoch}")
        hist.train_loss.append(train_loss)
        hist.val_loss.append(val_loss)
        if monitored < hist.best_val_loss:
            hist.best_val_loss, hist.best_epoch = monitored, epoch
            best = _snapshot(model)
            since_best = 0
        else:
            since_best += 1
        if log:
            log(f"epoch {epoch} train {train_loss:.4f} val {val_loss:.4f}")
        hist.stopped_epoch = epoch
        if since_best >= cfg.patience:
            break
    _restore(model, best)
    return model, hist
