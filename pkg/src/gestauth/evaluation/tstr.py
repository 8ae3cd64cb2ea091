"""Train-synthetic, test-real harnesses and the enrolment-burden sweep.

All inputs are normalised gestures (the space the autoencoder works in).
Classifiers are trained on synthetic (or reconstructed) data and scored on
real held-out gestures.
"""

import csv
from dataclasses import asdict, dataclass, replace

import numpy as np

from ..classifiers import ForestSpec, TrainConfig, build_architecture, predict_proba, rf_predict, train_random_forest
from ..classifiers.training import AuthTask, train_classifier
from ..dataset import select, stack
from ..features import extract_features_batch
from ..generative import STRATEGIES, decode, encode, generate_synthetic
from .metrics import evaluate_scores


class TstrError(ValueError):
    pass


CLASSIFIERS = ("rf", "complexmix")


@dataclass(frozen=True)
class TstrConfig:
    strategy: str = "adversarial"  # or "none" for the real-gestures-only baseline
    n_synthetic: int = 500
    per_terminal: int = 2
    real_negatives: bool = False
    classifier: str = "rf"
    n_trees: int = 100
    train: TrainConfig = TrainConfig(lr=1e-3, max_epochs=60, patience=10)

    def __post_init__(self):
        if self.strategy != "none" and self.strategy not in STRATEGIES:
            raise TstrError(f"strategy must be 'none' or one of {STRATEGIES}")
        if self.classifier not in CLASSIFIERS:
            raise TstrError(f"classifier must be one of {CLASSIFIERS}")
        if self.n_synthetic < 0 or self.per_terminal < 1:
            raise TstrError("n_synthetic must be >= 0 and per_terminal >= 1")

    def to_dict(self):
        d = asdict(self)
        d["train"] = asdict(self.train)
        return d


def _fit_and_score(kind, X_pos, X_neg, X_test, seed, n_trees=100, train_cfg=None):
    """Train a binary classifier on (X_pos, X_neg) and score X_test."""
    if len(X_pos) == 0 or len(X_neg) == 0:
        raise TstrError("both classes need at least one training sample")
    X = np.concatenate([X_pos, X_neg])
    y = np.concatenate([np.ones(len(X_pos)), np.zeros(len(X_neg))])
    if kind == "rf":
        forest = train_random_forest(ForestSpec(n_trees=n_trees, seed=seed), extract_features_batch(X), y)
        return rf_predict(forest, extract_features_batch(X_test))
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(X))
    n_val = max(1, int(0.2 * len(X)))
    va, tr = perm[:n_val], perm[n_val:]
    task = AuthTask("tstr", X[tr], y[tr], X[va], y[va], X_test, np.zeros(len(X_test)), [], None)
    cfg = replace(train_cfg or TrainConfig(), seed=seed)
    model, _ = train_classifier(build_architecture("ComplexMix"), task, cfg)
    return predict_proba(model, X_test)


def reconstruct(model, gestures):
    X = stack(list(gestures)) if not isinstance(gestures, np.ndarray) else gestures
    if len(X) == 0:
        return X
    return decode(model, encode(model, X).mu)


def tstr_intent(vae_model, gestures, non_gestures, test_gestures, test_non_gestures, classifier="rf",
                n=240, seed=0, reconstruct_positives=True, train_cfg=None):
    """Gesture-vs-non-gesture classifier trained on reconstructions, tested on real data.

    Positives are reconstructions of ``n`` randomly chosen gestures (or the
    real gestures themselves with ``reconstruct_positives=False``, the
    no-reconstruction control); negatives are ``n`` non-gesture windows.
    """
    if classifier not in CLASSIFIERS:
        raise TstrError(f"classifier must be one of {CLASSIFIERS}")
    gestures, non_gestures = list(gestures), list(non_gestures)
    if len(gestures) < 1 or len(non_gestures) < 1 or not test_gestures or not test_non_gestures:
        raise TstrError("tstr_intent needs gestures and non-gestures for both training and testing")
    rng = np.random.default_rng(seed)
    gi = rng.choice(len(gestures), size=min(n, len(gestures)), replace=False)
    ni = rng.choice(len(non_gestures), size=min(n, len(non_gestures)), replace=False)
    pos = stack([gestures[i] for i in gi])
    if reconstruct_positives:
        pos = reconstruct(vae_model, pos)
    neg = stack([non_gestures[i] for i in ni])
    X_test = np.concatenate([stack(list(test_gestures)), stack(list(test_non_gestures))])
    labels = np.r_[np.ones(len(test_gestures)), np.zeros(len(test_non_gestures))]
    scores = _fit_and_score(classifier, pos, neg, X_test, seed, train_cfg=train_cfg)
    return evaluate_scores(scores, labels, config={"task": "tstr_intent", "classifier": classifier, "n": int(n),
                                                   "seed": int(seed), "reconstruct": bool(reconstruct_positives)})


def enrolment_gestures(gestures, per_terminal, rng):
    """Pick ``per_terminal`` gestures per terminal position at random.

    Gestures without a terminal tag are treated as one pool of
    7 * per_terminal.
    """
    by_terminal = {}
    for g in gestures:
        by_terminal.setdefault(g.terminal, []).append(g)
    chosen = []
    for term in sorted(by_terminal, key=lambda t: (t is None, t)):
        pool = by_terminal[term]
        k = per_terminal * 7 if term is None else per_terminal
        idx = rng.choice(len(pool), size=min(k, len(pool)), replace=False)
        chosen.extend(pool[i] for i in sorted(idx))
    return chosen


def tstr_auth(corpus, split, held_out_user, vae_model, cfg=TstrConfig(), seed=0):
    """Authentication for a user the autoencoder never saw.

    Positives: ``per_terminal`` real enrolment gestures per terminal plus
    ``n_synthetic`` decoded samples around them. Negatives: reconstructions
    of the other users' training gestures, plus the real ones when
    ``real_negatives`` is set. Scored on the real test split: the held-out
    user's gestures against everyone else's.
    """
    gestures = [g for g in corpus if g.is_gesture]
    if not any(g.user_id == held_out_user for g in gestures):
        raise TstrError(f"held-out user {held_out_user!r} not in corpus")
    trainval = select(gestures, list(split.train) + list(split.validation))
    test = select(gestures, split.test)
    target_pool = [g for g in trainval if g.user_id == held_out_user]
    others = [g for g in trainval if g.user_id != held_out_user]
    if not target_pool or not others:
        raise TstrError("need training gestures for the held-out user and for other users")
    rng = np.random.default_rng(seed)
    enrol = enrolment_gestures(target_pool, cfg.per_terminal, rng)
    X_others = stack(others)
    other_emb = encode(vae_model, X_others)
    pos = [stack(enrol)]
    if cfg.strategy != "none" and cfg.n_synthetic > 0:
        synth = generate_synthetic(vae_model, cfg.strategy, enrol, other_emb, cfg.n_synthetic,
                                   seed=seed, user_id=held_out_user)
        pos.append(stack(synth))
    neg = [decode(vae_model, other_emb.mu)]
    if cfg.real_negatives:
        neg.append(X_others)
    X_test = stack(test)
    labels = np.array([g.user_id == held_out_user for g in test])
    if labels.all() or not labels.any():
        raise TstrError("test split must contain the held-out user and other users")
    scores = _fit_and_score(cfg.classifier, np.concatenate(pos), np.concatenate(neg), X_test, seed,
                            cfg.n_trees, cfg.train)
    conf = {"task": "tstr_auth", "held_out_user": held_out_user, "seed": int(seed), "n_enrol": len(enrol)}
    conf.update(cfg.to_dict())
    return evaluate_scores(scores, labels, config=conf)


SWEEP_FIELDS = ("per_terminal", "augmented", "seed", "auroc", "eer_lower", "eer_upper", "far_at_zero")


def enrolment_sweep(corpus, split, held_out_user, vae_model, gestures_per_terminal, cfg=TstrConfig(), seeds=(0,)):
    """tstr_auth with and without synthetic augmentation for each enrolment size."""
    rows = []
    for k in gestures_per_terminal:
        for augmented in (False, True):
            c = replace(cfg, per_terminal=int(k), strategy=cfg.strategy if augmented else "none")
            if augmented and c.strategy == "none":
                raise TstrError("enrolment_sweep needs a sampling strategy for the augmented runs")
            for seed in seeds:
                r = tstr_auth(corpus, split, held_out_user, vae_model, c, seed)
                s = r.summary()
                rows.append({"per_terminal": int(k), "augmented": augmented, "seed": int(seed),
                             "auroc": s["auroc"], "eer_lower": s["eer_lower"], "eer_upper": s["eer_upper"],
                             "far_at_zero": s["far_at_zero"]})
    return rows


def sweep_curves(rows):
    """Median of each metric per (per_terminal, augmented)."""
    keys = sorted({(r["per_terminal"], r["augmented"]) for r in rows})
    out = []
    for k, aug in keys:
        sel = [r for r in rows if r["per_terminal"] == k and r["augmented"] == aug]
        out.append({"per_terminal": k, "augmented": aug,
                    **{m: float(np.median([r[m] for r in sel])) for m in ("auroc", "eer_upper", "far_at_zero")}})
    return out


def write_sweep_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(SWEEP_FIELDS), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: r[k] for k in SWEEP_FIELDS})
