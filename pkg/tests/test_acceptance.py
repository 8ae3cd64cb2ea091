"""Acceptance criteria 1-11, each run at its stated tolerance.

Every criterion prints one ``CRITERION n: PASS|FAIL ...`` line to the terminal
(visible without ``-s``) and also asserts, so a failing criterion fails the
run. Criterion 11 needs the real corpus: set ``GESTAUTH_DATASET_DIR`` to a
directory of per-user CSV + manifest files.
"""

import itertools
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from gestauth.classifiers import (
    ARCH_NAMES, ForestSpec, TrainConfig, build_architecture, predict_proba, rf_predict, train_random_forest,
)
from gestauth.classifiers.training import build_auth_task, train_classifier
from gestauth.dataset import (
    apply_norm, ingest_user, random_profiles, select, simulate_corpus, stack, temporal_split,
    fit_norm_stats,
)
from gestauth.diffcore import (
    GRU, Concat, Conv1d, Dense, Flatten, MaxPool1d, ReLU, Sigmoid, Tanh, Tensor, Upsample1d, grad_check,
    weighted_bce,
)
from gestauth.distances import dtw, lb_keogh, soft_dtw
from gestauth.evaluation import TstrConfig, auroc, eer_interval, evaluate_scores, far_at_zero, tstr_auth
from gestauth.evaluation.metrics import EerInterval, ScoreSet
from gestauth.features import extract_features_batch
from gestauth.generative import VAE, VaeConfig, decode, encode, kl_loss, train_vae

pytestmark = pytest.mark.acceptance

_LINES = []


@pytest.fixture(scope="module", autouse=True)
def _summary(request):
    yield
    tr = request.config.pluginmanager.get_plugin("terminalreporter")
    if tr is not None and _LINES:
        tr.write_line("")
        for line in sorted(_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            tr.write_line(line)


def _report(request, n, ok, detail):
    line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'} {detail}"
    _LINES.append(line)
    tr = request.config.pluginmanager.get_plugin("terminalreporter")
    if tr is not None:
        tr.write_line("")
        tr.write_line(line)
    assert ok, line


# --- 1. DTW against exhaustive path enumeration ----------------------------------

def _warping_paths(n, m):
    """All monotone, continuous paths from (0, 0) to (n-1, m-1) as cell-indicator rows."""
    out = []

    def walk(i, j, cells):
        if (i, j) == (n - 1, m - 1):
            row = np.zeros(n * m)
            row[cells] = 1.0
            out.append(row)
            return
        for di, dj in ((1, 0), (0, 1), (1, 1)):
            a, b = i + di, j + dj
            if a < n and b < m:
                walk(a, b, cells + [a * m + b])

    walk(0, 0, [0])
    return np.array(out)


def test_criterion_1_dtw_oracle(request):
    t0 = time.perf_counter()
    series = {n: np.array(list(itertools.product((0.0, 1.0, 2.0), repeat=n))) for n in range(1, 6)}
    mismatches, pairs = 0, 0
    for n, m in itertools.product(range(1, 6), repeat=2):
        P = _warping_paths(n, m)
        X, Y = series[n], series[m]
        cost = (X[:, None, :, None] - Y[None, :, None, :]) ** 2  # (|X|, |Y|, n, m)
        oracle = (cost.reshape(len(X) * len(Y), n * m) @ P.T).min(axis=1).reshape(len(X), len(Y))
        for a in range(len(X)):
            for b in range(len(Y)):
                pairs += 1
                if dtw(X[a], Y[b]) != oracle[a, b]:
                    mismatches += 1
    elapsed = time.perf_counter() - t0
    _report(request, 1, mismatches == 0 and elapsed < 60,
            f"dtw == exhaustive oracle on {pairs} pairs, {mismatches} mismatches, {elapsed:.1f} s (limit 60 s)")


# --- 2. Keogh lower bound soundness ----------------------------------------------

def test_criterion_2_lb_keogh_sound(request):
    rng = np.random.default_rng(2)
    violations, checks = 0, 0
    for _ in range(1000):
        x, y = rng.standard_normal(50), rng.standard_normal(50)
        for w in (2, 4, 8, 16, 32):
            lb = lb_keogh(x, y, w)
            checks += 1
            if not (0.0 <= lb <= dtw(x, y, band_w=w)):
                violations += 1
    _report(request, 2, violations == 0, f"0 <= lb_keogh <= banded dtw on {checks} checks, {violations} violations")


# --- 3. Soft-DTW consistency -------------------------------------------------------

def test_criterion_3_soft_dtw(request):
    rng = np.random.default_rng(3)
    worst_gap = 0.0
    for _ in range(100):
        x, y = rng.integers(0, 5, 5).astype(float), rng.integers(0, 5, 5).astype(float)
        worst_gap = max(worst_gap, abs(soft_dtw(x, y, 1e-4)[0] - dtw(x, y)))
    worst_rel, h = 0.0, 1e-5
    for _ in range(50):
        x, y = rng.standard_normal((10, 2)), rng.standard_normal((10, 2))
        _, g = soft_dtw(x, y, 0.1)
        fd = np.zeros_like(y)
        for idx in np.ndindex(*y.shape):
            e = np.zeros_like(y)
            e[idx] = h
            fd[idx] = (soft_dtw(x, y + e, 0.1)[0] - soft_dtw(x, y - e, 0.1)[0]) / (2 * h)
        worst_rel = max(worst_rel, np.abs(g - fd).max() / max(np.abs(fd).max(), 1e-12))
    ok = worst_gap <= 1e-2 and worst_rel <= 1e-4
    _report(request, 3, ok, f"max |soft_dtw(1e-4) - dtw| = {worst_gap:.2e} (<= 1e-2); "
                            f"max gradient rel. error = {worst_rel:.2e} (<= 1e-4)")


# --- 4. Gradient suite ----------------------------------------------------------------

def test_criterion_4_gradient_suite(request):
    t0 = time.perf_counter()
    r = np.random.default_rng(4)
    cases = {
        "dense": (Dense(4, 3, r), (5, 4)),
        "conv1d": (Conv1d(3, 4, 5, r), (2, 9, 3)),
        "conv1d_valid": (Conv1d(3, 2, 3, r, padding="valid"), (2, 9, 3)),
        "maxpool1d": (MaxPool1d(), (2, 9, 3)),
        "upsample1d": (Upsample1d(2), (2, 5, 3)),
        "gru": (GRU(3, 4, r), (2, 5, 3)),
        "gru_last": (GRU(3, 4, r, return_sequences=False), (2, 5, 3)),
        "relu": (ReLU(), (4, 7)),
        "sigmoid": (Sigmoid(), (4, 7)),
        "tanh": (Tanh(), (4, 7)),
        "flatten": (Flatten(), (2, 4, 3)),
        "concat": (Concat([Conv1d(3, 2, 3, r), Conv1d(3, 4, 5, r)]), (2, 8, 3)),
    }
    errors = {}
    for name, (module, shape) in cases.items():
        errors[name] = grad_check(module, r.standard_normal(shape), tolerance=1e-4).max_error
    errors["MLP"] = grad_check(build_architecture("MLP"), r.standard_normal((2, 200, 6)), max_entries=20).max_error
    errors["ComplexMix"] = grad_check(build_architecture("ComplexMix"), r.standard_normal((2, 200, 6)),
                                      max_entries=8).max_error
    errors["decoder"] = grad_check(VAE(["a", "b"]).decoder, r.standard_normal((2, 10)), max_entries=10).max_error
    elapsed = time.perf_counter() - t0
    worst = max(errors, key=errors.get)
    ok = all(e <= 1e-4 for e in errors.values()) and elapsed < 300
    _report(request, 4, ok, f"{len(errors)} grad checks, worst {worst} = {errors[worst]:.2e} (<= 1e-4), "
                            f"{elapsed:.0f} s (limit 300 s)")


# --- 5. Closed-form losses ---------------------------------------------------------------

def test_criterion_5_closed_forms(request):
    kl0 = kl_loss(np.zeros(10), np.zeros(10))
    kl1 = kl_loss(np.ones(10), np.zeros(10))
    bce, _ = weighted_bce(np.full(4, 0.5), np.array([1.0, 0.0, 1.0, 0.0]), pos_weight=1.0)
    ok = kl0 == 0.0 and kl1 == 0.5 * 10 and kl_loss(np.ones(1), np.zeros(1)) == 0.5 \
        and abs(float(bce) - math.log(2)) <= 1e-9
    _report(request, 5, ok, f"kl(0,0) = {kl0}, kl(1,0) = {kl1} over 10 dims, "
                            f"weighted_bce(0.5) - ln 2 = {float(bce) - math.log(2):.1e}")


# --- 6. Metric fixtures ---------------------------------------------------------------------

def _u_statistic(scores, labels):
    g, i = scores[labels], scores[~labels]
    return float(((g[:, None] > i[None]).sum() + 0.5 * (g[:, None] == i[None]).sum()) / (len(g) * len(i)))


def test_criterion_6_metric_fixtures(request):
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(4, 200))
        labels = rng.random(n) < 0.4
        labels[:2] = [True, False]
        scores = rng.integers(0, int(rng.choice([3, 20, 10**6])), n) / 7.0
        worst = max(worst, abs(auroc(scores, labels) - _u_statistic(scores, labels)))
    fixtures = [
        # scores, labels, EER interval, FAR@0
        ([0.9, 0.8, 0.7, 0.85], [1, 1, 0, 0], (0.5, 0.5), 0.5),
        ([0.5, 0.5, 0.5, 0.1, 0.5, 0.1], [1, 1, 1, 1, 0, 0], (0.25, 0.5), 1.0),
        ([0.9, 0.8, 0.7, 0.95, 0.75, 0.72, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1, 0.05], [1] * 3 + [0] * 10, None, 0.3),
        ([0.5] * 6, [1, 0, 1, 0, 1, 0], (0.0, 1.0), 1.0),
    ]
    bad = []
    for k, (s, y, eer, far0) in enumerate(fixtures):
        ss = ScoreSet(s, y)
        if eer is not None and eer_interval(ss) != EerInterval(*eer):
            bad.append(f"eer#{k}")
        if not math.isclose(far_at_zero(ss), far0, abs_tol=1e-12):
            bad.append(f"far0#{k}")
    ok = worst <= 1e-9 and not bad
    _report(request, 6, ok, f"max |auroc - U| = {worst:.1e} over 100 sets; tie fixtures mismatched: {bad or 'none'}"
                            f"; all-ties FAR@0 = {far_at_zero(ScoreSet([0.5] * 6, [1, 0] * 3))}")


# --- 7. Architecture budgets --------------------------------------------------------------

def test_criterion_7_architecture_budgets(request):
    counts = {name: build_architecture(name).n_params() for name in ARCH_NAMES}
    steps = {name: build_architecture(name).stem(Tensor(np.zeros((1, 200, 6)))).shape[1]
             for name in ("ComplexMix", "SimpleMix")}
    ok = all(60_000 <= c <= 80_000 for c in counts.values()) and steps == {"ComplexMix": 13, "SimpleMix": 7}
    _report(request, 7, ok, f"params {counts}; stem steps {steps}")


# --- 8. Simulator end to end -------------------------------------------------------------------

@pytest.fixture(scope="module")
def sim8():
    corpus = simulate_corpus(random_profiles(8, seed=0), 42, seed=0)
    return corpus, temporal_split(corpus, seed=0)


def test_criterion_8_simulator_end_to_end(request, sim8):
    corpus, split = sim8
    t0 = time.perf_counter()
    users = sorted({g.user_id for g in corpus})
    rf, cm = [], []
    for u in users:
        task = build_auth_task(corpus, split, u)
        forest = train_random_forest(ForestSpec(n_trees=100, seed=0),
                                     extract_features_batch(np.concatenate([task.X_train, task.X_val])),
                                     np.concatenate([task.y_train, task.y_val]))
        rf.append(auroc(rf_predict(forest, extract_features_batch(task.X_test)), task.y_test))
        model, _ = train_classifier(build_architecture("ComplexMix"), task,
                                    TrainConfig(lr=1e-3, max_epochs=40, patience=10, seed=0))
        cm.append(auroc(predict_proba(model, task.X_test), task.y_test))
    elapsed = time.perf_counter() - t0
    ok = np.mean(rf) > 0.9 and np.mean(cm) > 0.9 and elapsed < 1800
    _report(request, 8, ok, f"mean test AUROC over 8 users: RF100 {np.mean(rf):.4f}, ComplexMix {np.mean(cm):.4f} "
                            f"(> 0.9), worst user RF {min(rf):.3f} / ComplexMix {min(cm):.3f}, {elapsed:.0f} s")


# --- 9. Directional TSTR reproduction ------------------------------------------------------------

def test_criterion_9_tstr_direction(request):
    # The default simulator saturates this check (14 real gestures already give
    # FAR@0 = 0 and AUROC = 1), so users are brought closer together and made
    # noisier until the real-only baseline has room to improve.
    corpus = simulate_corpus(random_profiles(8, seed=0, spread=0.3, noise_sigma=0.2), 42, seed=0)
    split = temporal_split(corpus, seed=0)
    holdout = "u3"
    norm = fit_norm_stats(select(corpus, split.train))
    ncorpus = [apply_norm(g, norm) for g in corpus]
    trainval = select(ncorpus, list(split.train) + list(split.validation))
    vae, _ = train_vae(trainval, VaeConfig(max_epochs=150, patience=20, seed=0), exclude_users=[holdout])
    res = {}
    for strategy in ("none", "adversarial"):
        cfg = TstrConfig(strategy=strategy, n_synthetic=500, per_terminal=2)
        reps = [tstr_auth(ncorpus, split, holdout, vae, cfg, seed) for seed in range(5)]
        res[strategy] = (float(np.median([r.far_at_zero for r in reps])), float(np.median([r.auroc for r in reps])))
    (f_base, a_base), (f_adv, a_adv) = res["none"], res["adversarial"]
    ok = f_adv <= f_base and a_base - a_adv < 0.05
    _report(request, 9, ok, f"median over 5 seeds: 14 real FAR@0 {f_base:.3f} AUROC {a_base:.3f}; "
                            f"+500 adversarial FAR@0 {f_adv:.3f} AUROC {a_adv:.3f}")


# --- 10. Over-regularisation -------------------------------------------------------------------

def _pairwise_mean(A):
    A = A.reshape(len(A), -1)
    sq = (A * A).sum(axis=1)
    d = np.sqrt(np.maximum(sq[:, None] + sq[None] - 2.0 * A @ A.T, 0.0))
    return float(d[np.triu_indices(len(A), 1)].mean())


def test_criterion_10_beta_one_collapse(request, sim8):
    corpus, split = sim8
    train = select(corpus, split.train)
    norm = fit_norm_stats(train)
    train = [apply_norm(g, norm) for g in train]
    val = stack([apply_norm(g, norm) for g in select(corpus, split.validation)])
    vae, _ = train_vae(train, VaeConfig(beta=1.0, max_epochs=100, patience=30, seed=0))
    emb = encode(vae, val)
    abs_mean = np.abs(emb.mu.mean(axis=0))
    sigma = np.exp(0.5 * emb.log_var).mean(axis=0)
    ratio = _pairwise_mean(decode(vae, emb.mu)) / _pairwise_mean(val)
    ok = bool(np.all(abs_mean < 0.1) and np.all((sigma >= 0.8) & (sigma <= 1.2)) and ratio < 0.1)
    _report(request, 10, ok, f"max |mu mean| {abs_mean.max():.3f} (< 0.1), sigma range "
                             f"[{sigma.min():.3f}, {sigma.max():.3f}] (in [0.8, 1.2]), "
                             f"recon/data pairwise distance {ratio:.3f} (< 0.1)")


# --- 11. Real corpus (optional) ------------------------------------------------------------------

def test_criterion_11_real_corpus(request):
    root = os.environ.get("GESTAUTH_DATASET_DIR", "")
    if not root or not Path(root).is_dir():
        _LINES.append("CRITERION 11: SKIP (set GESTAUTH_DATASET_DIR to the per-user CSV + manifest directory)")
        pytest.skip("real corpus not supplied")
    corpus = []
    for csv_path in sorted(Path(root).glob("*.csv")):
        corpus.extend(ingest_user(csv_path, csv_path.with_suffix(".json"), {"cutoff_hz": 10.0, "order": 2}))
    users = sorted({g.user_id for g in corpus if g.is_gesture})
    aurocs, eers = [], []
    for seed in range(5):
        split = temporal_split(corpus, seed=seed)
        for u in users:
            task = build_auth_task(corpus, split, u)
            forest = train_random_forest(ForestSpec(n_trees=100, seed=seed),
                                         extract_features_batch(np.concatenate([task.X_train, task.X_val])),
                                         np.concatenate([task.y_train, task.y_val]))
            r = evaluate_scores(rf_predict(forest, extract_features_batch(task.X_test)), task.y_test)
            aurocs.append(r.auroc)
            eers.append(0.5 * (r.eer.lower + r.eer.upper))
    a, e = float(np.mean(aurocs)), float(np.mean(eers))
    ok = abs(a - 0.951) <= 0.03 and abs(e - 0.097) <= 0.03
    _report(request, 11, ok, f"RF100 over {len(users)} users x 5 seeds: AUROC {a:.3f} (0.951 +- 0.03), "
                             f"EER {e:.3f} (0.097 +- 0.03)")
