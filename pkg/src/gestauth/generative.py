"""Regularised autoencoders over gestures and synthetic gesture sampling.

The encoder reuses the ComplexMix backbone and emits a 10-dimensional mean
and log-variance. The decoder repeats the latent vector over 25 steps, runs
two GRUs and then three upsample + convolution stages back to 200 x 6 with a
linear output. A small dense scorer on the first five latent dimensions is
trained with an approximate mean-reciprocal-rank loss so that those
dimensions cluster by user.

Regularisation is either the closed-form Gaussian KL term (``vae``), an
energy-distance match between the batch of embeddings and prior samples
(``wae``), or nothing (``none``).
"""

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .classifiers.architectures import complexmix_stem, gru_stack
from .dataset import Gesture, stack
from .diffcore import (
    GRU, Adam, Conv1d, Dense, Module, ReLU, Sequential, Tensor, Upsample1d, attach_loss,
    repeat_time,
)
from .diffcore.tensor import exp, mean, square, tsum
from .distances import LossSpec, combined_loss_batch

LATENT_DIM = 10
AUTH_DIMS = 5
DECODER_STEPS = 25
REG_KINDS = ("vae", "wae", "none")
STRATEGIES = ("neighbourhood", "self_mixed", "adversarial", "same_user")


class GenerativeError(ValueError):
    pass


@dataclass(frozen=True)
class VaeConfig:
    beta: float = None  # defaults: 1e-4 for vae, 1e-3 for wae, 0 for none
    alpha: float = 1e-2
    reg_kind: str = "vae"
    loss: LossSpec = field(default_factory=LossSpec)
    recon_reduction: str = "mean"  # "mean" over the 200 x 6 points, or "sum"
    temperature: float = 1.0
    wae_distance: str = "euclidean"
    wae_verbatim: bool = False
    lr: float = 1e-3
    batch_size: int = 32
    max_epochs: int = 300
    patience: int = 20
    val_fraction: float = 0.2
    seed: int = 0
    beta_warmup_epochs: int = 0
    pretrain_epochs: int = 0

    def __post_init__(self):
        if self.reg_kind not in REG_KINDS:
            raise GenerativeError(f"reg_kind must be one of {REG_KINDS}")
        if self.beta is None:
            object.__setattr__(self, "beta", {"vae": 1e-4, "wae": 1e-3, "none": 0.0}[self.reg_kind])
        if self.beta < 0 or self.alpha < 0:
            raise GenerativeError("beta and alpha must be non-negative")
        if self.temperature <= 0:
            raise GenerativeError("temperature must be positive")
        if self.recon_reduction not in ("mean", "sum"):
            raise GenerativeError("recon_reduction must be 'mean' or 'sum'")
        if self.wae_distance not in ("euclidean", "squared"):
            raise GenerativeError("wae_distance must be 'euclidean' or 'squared'")
        if self.patience < 1 or self.max_epochs < 1 or self.batch_size < 1:
            raise GenerativeError("patience, max_epochs and batch_size must be >= 1")
        if not 0.0 <= self.val_fraction < 1.0:
            raise GenerativeError("val_fraction must lie in [0, 1)")

    def to_dict(self):
        d = asdict(self)
        d["loss"] = asdict(self.loss)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if isinstance(d.get("loss"), dict):
            d["loss"] = LossSpec(**d["loss"])
        return cls(**d)


@dataclass
class LatentEmbedding:
    mu: np.ndarray
    log_var: np.ndarray

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=np.float64)
        self.log_var = np.asarray(self.log_var, dtype=np.float64)
        if self.mu.shape != self.log_var.shape or self.mu.shape[-1] != LATENT_DIM:
            raise GenerativeError(f"embedding must have {LATENT_DIM} dims, got {self.mu.shape} / {self.log_var.shape}")
        if not (np.all(np.isfinite(self.mu)) and np.all(np.isfinite(self.log_var))):
            raise GenerativeError("embedding contains NaN or inf")

    def __len__(self):
        return 1 if self.mu.ndim == 1 else len(self.mu)

    def rows(self):
        return np.atleast_2d(self.mu), np.atleast_2d(self.log_var)


@dataclass(frozen=True)
class SampleStrategy:
    kind: str
    mix_weight: float = 0.85
    n_mix: int = 3

    def __post_init__(self):
        if self.kind not in STRATEGIES:
            raise GenerativeError(f"unknown strategy {self.kind!r}; choose from {STRATEGIES}")
        if not 0.5 < self.mix_weight < 1.0:
            raise GenerativeError("mix_weight must lie in (0.5, 1)")
        if self.n_mix < 1:
            raise GenerativeError("n_mix must be >= 1")


# --- model -----------------------------------------------------------------------

class LatentDecoder(Module):
    kind = "latent_decoder"

    def __init__(self, rng, hidden=48):
        self.gru1 = GRU(LATENT_DIM, hidden, rng)
        self.gru2 = GRU(hidden, hidden, rng)
        self.up = Sequential([
            Upsample1d(2), Conv1d(hidden, 32, 5, rng), ReLU(),
            Upsample1d(2), Conv1d(32, 24, 5, rng), ReLU(),
            Upsample1d(2), Conv1d(24, 6, 5, rng),
        ])

    def forward(self, z):
        return self.up(self.gru2(self.gru1(repeat_time(z, DECODER_STEPS))))


class VAE(Module):
    kind = "vae"

    def __init__(self, users, seed=0):
        self.users = list(users)
        rng = np.random.default_rng(seed)
        self.enc_stem = complexmix_stem(rng)
        self.enc_body = Sequential(gru_stack(32, 48, 3, rng) + [Dense(48, 32, rng), ReLU()])
        self.mu_head = Dense(32, LATENT_DIM, rng)
        self.lv_head = Dense(32, LATENT_DIM, rng)
        self.decoder = LatentDecoder(rng)
        self.auth_head = Sequential([Dense(AUTH_DIMS, 16, rng), ReLU(), Dense(16, max(1, len(self.users)), rng)])
        self.seed = seed

    def encode_t(self, x):
        h = self.enc_body(self.enc_stem(x))
        return self.mu_head(h), self.lv_head(h)

    def decode_t(self, z):
        return self.decoder(z)

    def auth_scores_t(self, mu):
        return self.auth_head(mu[:, :AUTH_DIMS])

    def forward(self, x):
        mu, _ = self.encode_t(x)
        return self.decode_t(mu)

    def to_spec(self):
        return {"kind": self.kind, "users": self.users, "latent_dim": LATENT_DIM, "seed": self.seed}

    @classmethod
    def from_spec(cls, spec):
        return cls(spec["users"], spec.get("seed", 0))


def _as_batch(gestures):
    if isinstance(gestures, Gesture):
        return gestures.series[None], True
    if isinstance(gestures, (list, tuple)):
        return stack(list(gestures)), False
    X = np.asarray(gestures, dtype=np.float64)
    if X.ndim == 2:
        return X[None], True
    return X, False


def encode(model, gestures, batch_size=256):
    """Latent mean and log-variance for one gesture or a batch."""
    X, single = _as_batch(gestures)
    if X.shape[1:] != (200, 6):
        raise GenerativeError(f"expected gestures of shape (200, 6), got {X.shape[1:]}")
    mus, lvs = [], []
    for i in range(0, len(X), batch_size):
        mu, lv = model.encode_t(Tensor(X[i : i + batch_size]))
        mus.append(mu.data)
        lvs.append(lv.data)
    mu = np.concatenate(mus) if mus else np.zeros((0, LATENT_DIM))
    lv = np.concatenate(lvs) if lvs else np.zeros((0, LATENT_DIM))
    return LatentEmbedding(mu[0], lv[0]) if single else LatentEmbedding(mu, lv)


def reparam_sample(emb, seed=0):
    """z = mu + exp(log_var / 2) * eps with eps ~ N(0, I) drawn from ``seed``."""
    eps = np.random.default_rng(seed).standard_normal(emb.mu.shape)
    return emb.mu + np.exp(0.5 * emb.log_var) * eps


def decode(model, z, batch_size=256):
    z = np.asarray(z, dtype=np.float64)
    single = z.ndim == 1
    Z = np.atleast_2d(z)
    if Z.shape[1] != LATENT_DIM:
        raise GenerativeError(f"latent vectors must have {LATENT_DIM} dims, got {Z.shape}")
    out = [model.decode_t(Tensor(Z[i : i + batch_size])).data for i in range(0, len(Z), batch_size)]
    out = np.concatenate(out) if out else np.zeros((0, 200, 6))
    return out[0] if single else out


# --- losses ----------------------------------------------------------------------

def kl_loss(mu, log_var=None):
    """KL(N(mu, exp(log_var)) || N(0, I)) summed over the last axis."""
    if isinstance(mu, LatentEmbedding):
        mu, log_var = mu.mu, mu.log_var
    mu, log_var = np.asarray(mu, dtype=np.float64), np.asarray(log_var, dtype=np.float64)
    return 0.5 * (mu**2 + np.exp(log_var) - 1.0 - log_var).sum(axis=-1)


def _kl_tensor(mu, lv):
    per = tsum(lv - square(mu) - exp(lv) + 1.0, axis=1) * -0.5
    return mean(per)


def _pair_dist(a, b, distance):
    diff = a[:, None, :] - b[None, :, :]
    sq = (diff**2).sum(axis=2)
    if distance == "squared":
        return sq, 2.0 * diff
    d = np.sqrt(sq)
    safe = np.where(d > 1e-12, d, 1.0)
    return d, np.where((d > 1e-12)[..., None], diff / safe[..., None], 0.0)


def wae_reg_grad(embeddings, prior, distance="euclidean", verbatim=False):
    """Energy statistic between embeddings and prior samples, with its gradient.

    value = 2/n^2 sum d(e_i, z_j) - 1/(n(n-1)) sum_{i!=j} d(e_i, e_j)
            - 1/(n(n-1)) sum_{i!=j} d(z_i, z_j)
    ``verbatim`` flips the sign of the whole expression.
    """
    E = np.asarray(embeddings, dtype=np.float64)
    Z = np.asarray(prior, dtype=np.float64)
    n = len(E)
    if n < 2 or len(Z) < 2:
        raise GenerativeError("wae regulariser needs at least two embeddings")
    d_ez, g_ez = _pair_dist(E, Z, distance)
    d_ee, g_ee = _pair_dist(E, E, distance)
    d_zz, _ = _pair_dist(Z, Z, distance)
    m = len(Z)
    value = 2.0 / (n * m) * d_ez.sum() - d_ee.sum() / (n * (n - 1)) - d_zz.sum() / (m * (m - 1))
    grad = 2.0 / (n * m) * g_ez.sum(axis=1) - 2.0 / (n * (n - 1)) * g_ee.sum(axis=1)
    sign = -1.0 if verbatim else 1.0
    return sign * float(value), sign * grad


def wae_reg_loss(embeddings, seed=0, distance="euclidean", verbatim=False):
    E = np.asarray(embeddings, dtype=np.float64)
    if E.ndim != 2 or len(E) < 2:
        raise GenerativeError("wae regulariser needs an (n >= 2, d) array of embeddings")
    prior = np.random.default_rng(seed).standard_normal(E.shape)
    return wae_reg_grad(E, prior, distance, verbatim)[0]


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _one_hot(labels, shape):
    labels = np.asarray(labels)
    if labels.shape == shape:
        return labels.astype(np.float64)
    y = np.zeros(shape)
    y[np.arange(shape[0]), labels.astype(np.int64)] = 1.0
    return y


def approx_mrr_grad(scores, labels, temperature=1.0):
    """Approximate-MRR loss -sum_i y_i / approxrank_i and its gradient.

    approxrank_i = 1 + sum_{j != i} sigmoid((s_j - s_i) / temperature).
    ``scores`` is one list (L,) or a batch of lists (B, L); for a batch the
    loss is the mean over lists. ``labels`` is a relevance array of the same
    shape or, for a batch, the index of the relevant item per list.
    """
    s = np.asarray(scores, dtype=np.float64)
    single = s.ndim == 1
    S = np.atleast_2d(s)
    labels = np.asarray(labels)
    Y = _one_hot(labels[None] if single and labels.ndim == 1 else np.atleast_1d(labels), S.shape)
    diff = (S[:, None, :] - S[:, :, None]) / temperature  # [b, i, j] = (s_j - s_i) / T
    sig = _sigmoid(diff)
    L = S.shape[1]
    off = 1.0 - np.eye(L)
    rank = 1.0 + (sig * off).sum(axis=2)
    per_list = -(Y / rank).sum(axis=1)
    P = sig * (1.0 - sig) / temperature * off
    g = Y / rank**2
    grad = np.einsum("bi,bik->bk", g, P) - g * P.sum(axis=2)
    B = 1 if single else S.shape[0]
    value = per_list.sum() / B
    grad = grad / B
    return float(value), grad[0] if single else grad


def approx_mrr_loss(scores, labels, temperature=1.0):
    return approx_mrr_grad(scores, labels, temperature)[0]


# --- training ----------------------------------------------------------------------

@dataclass
class VaeHistory:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    val_recon: list = field(default_factory=list)
    val_reg: list = field(default_factory=list)
    val_mrr: list = field(default_factory=list)
    best_epoch: int = -1
    best_val_loss: float = math.inf

    def to_dict(self):
        return asdict(self)


def loss_terms(model, X, labels, cfg, eps=None, beta=None, prior=None):
    """Graph for the total loss on one batch; returns (total tensor, parts dict).

    ``eps`` is the reparametrisation noise (ignored unless reg_kind is vae;
    None means use the mean). ``prior`` holds the WAE prior draws.
    """
    beta = cfg.beta if beta is None else beta
    mu, lv = model.encode_t(Tensor(X))
    z = mu
    if cfg.reg_kind == "vae" and eps is not None:
        z = mu + exp(lv * 0.5) * eps
    recon = model.decode_t(z)
    vals, g = combined_loss_batch(cfg.loss, X, recon.data)
    if cfg.recon_reduction == "mean":
        vals, g = vals / X[0].size, g / X[0].size
    B = len(X)
    total = attach_loss(recon, vals.mean(), g / B)
    parts = {"recon": float(vals.mean()), "reg": 0.0, "mrr": math.nan}
    if cfg.reg_kind == "vae":
        kl = _kl_tensor(mu, lv)
        parts["reg"] = kl.data.item()
        if beta > 0:
            total = total + kl * beta
    elif cfg.reg_kind == "wae" and B >= 2:
        if prior is None:
            prior = np.random.default_rng(0).standard_normal(mu.shape)
        v, gw = wae_reg_grad(mu.data, prior, cfg.wae_distance, cfg.wae_verbatim)
        parts["reg"] = v
        if beta > 0:
            total = total + attach_loss(mu, beta * v, beta * gw)
    if labels is not None:
        s = model.auth_scores_t(mu)
        v, gs = approx_mrr_grad(s.data, labels, cfg.temperature)
        parts["mrr"] = -v
        if cfg.alpha > 0:
            total = total + attach_loss(s, cfg.alpha * v, cfg.alpha * gs)
    return total, parts


def _random_holdout(n, fraction, rng):
    k = int(math.floor(fraction * n + 1e-9))
    if n >= 2 and fraction > 0:
        k = max(k, 1)
    perm = rng.permutation(n)
    return np.sort(perm[k:]), np.sort(perm[:k])


def _evaluate(model, X, labels, cfg, beta, batch_size=64):
    if len(X) == 0:
        return math.nan, {}
    sums = {"recon": 0.0, "reg": 0.0, "mrr": 0.0}
    for i in range(0, len(X), batch_size):
        xb = X[i : i + batch_size]
        lb = labels[i : i + batch_size]
        prior = np.random.default_rng(i).standard_normal((len(xb), LATENT_DIM))
        _, parts = loss_terms(model, xb, lb, cfg, eps=None, beta=beta, prior=prior)
        for k in sums:
            sums[k] += parts[k] * len(xb)
    parts = {k: v / len(X) for k, v in sums.items()}
    reg_w = beta if cfg.reg_kind != "none" else 0.0
    total = parts["recon"] + reg_w * parts["reg"] - cfg.alpha * parts["mrr"]
    return total, parts


def _run_epochs(model, opt, X, labels, Xv, lv, cfg, rng, hist, epochs, beta_fn, use_auth=True):
    best = [p.data.copy() for p in model.parameters()]
    since = 0
    for epoch in range(epochs):
        beta = beta_fn(epoch)
        order = rng.permutation(len(X))
        total = 0.0
        for i in range(0, len(X), cfg.batch_size):
            idx = order[i : i + cfg.batch_size]
            xb = X[idx]
            eps = rng.standard_normal((len(idx), LATENT_DIM))
            prior = rng.standard_normal((len(idx), LATENT_DIM))
            opt.zero_grad()
            loss, _ = loss_terms(model, xb, labels[idx] if use_auth else None, cfg, eps, beta, prior)
            loss.backward()
            opt.step()
            total += loss.data.item() * len(idx)
        train_loss = total / len(X)
        if not math.isfinite(train_loss):
            raise FloatingPointError(f"autoencoder loss became {train_loss} at epoch {epoch}")
        val, parts = _evaluate(model, Xv, lv, cfg, beta) if len(Xv) else (train_loss, {})
        hist.train_loss.append(train_loss)
        hist.val_loss.append(val)
        hist.val_recon.append(parts.get("recon", math.nan))
        hist.val_reg.append(parts.get("reg", math.nan))
        hist.val_mrr.append(parts.get("mrr", math.nan))
        if val < hist.best_val_loss:
            hist.best_val_loss, hist.best_epoch = val, len(hist.val_loss) - 1
            best = [p.data.copy() for p in model.parameters()]
            since = 0
        else:
            since += 1
            if since >= cfg.patience:
                break
    for p, b in zip(model.parameters(), best):
        p.data[...] = b


def train_vae(corpus, cfg=VaeConfig(), exclude_users=(), nongestures=None, log=None):
    """Train an autoencoder on normalised payment gestures.

    Gestures of ``exclude_users`` are dropped (leave-one-user-out). A random
    ``cfg.val_fraction`` of the rest is held out for early stopping. When
    ``cfg.pretrain_epochs`` > 0 and ``nongestures`` are given, the model is
    first trained on them as a plain autoencoder.
    """
    excluded = set(exclude_users)
    data = [g for g in corpus if g.is_gesture and g.user_id not in excluded]
    if not data:
        raise GenerativeError("no gestures left to train the autoencoder on")
    users = sorted({g.user_id for g in data})
    index = {u: i for i, u in enumerate(users)}
    X = stack(data)
    labels = np.array([index[g.user_id] for g in data])
    rng = np.random.default_rng(cfg.seed)
    tr, va = _random_holdout(len(X), cfg.val_fraction, rng)
    model = VAE(users, seed=cfg.seed)
    opt = Adam(model.parameters(), lr=cfg.lr)
    hist = VaeHistory()
    if cfg.pretrain_epochs and nongestures:
        Xn = stack([g for g in nongestures])
        plain = replace(cfg, beta=0.0, alpha=0.0)
        pre = VaeHistory()
        _run_epochs(model, opt, Xn, np.zeros(len(Xn), dtype=np.int64), X[va], labels[va], plain, rng, pre,
                    cfg.pretrain_epochs, lambda e: 0.0, use_auth=False)

    def beta_fn(epoch):
        if cfg.beta_warmup_epochs > 0:
            return cfg.beta * min(1.0, (epoch + 1) / cfg.beta_warmup_epochs)
        return cfg.beta

    _run_epochs(model, opt, X[tr], labels[tr], X[va], labels[va], cfg, rng, hist, cfg.max_epochs, beta_fn)
    if log:
        log(f"autoencoder best epoch {hist.best_epoch} val {hist.best_val_loss:.4f}")
    return model, hist


# --- sampling ----------------------------------------------------------------------

def _mus(emb):
    if emb is None:
        return np.zeros((0, LATENT_DIM))
    if isinstance(emb, LatentEmbedding):
        return emb.rows()[0]
    return np.atleast_2d(np.asarray(emb, dtype=np.float64)).reshape(-1, LATENT_DIM)


def sample_latent(strategy, target, others, n, seed=0):
    """Draw ``n`` latent points near a target user's embeddings.

    neighbourhood: N(mu_i, diag exp(log_var_i)) for a uniformly chosen i.
    self_mixed: Dirichlet(1, ..., 1) convex combination of ``n_mix`` target means.
    adversarial: mix_weight * target mean + (1 - mix_weight) * other mean.
    same_user: a target mean with dimensions 6-10 taken from another user's mean.
    """
    if isinstance(strategy, str):
        strategy = SampleStrategy(strategy)
    if isinstance(target, LatentEmbedding):
        t_mu, t_lv = target.rows()
        t_sd = np.exp(0.5 * t_lv)
    else:
        # bare means carry no variance
        t_mu = _mus(target)
        t_sd = np.zeros_like(t_mu)
    o_mu = _mus(others)
    if len(t_mu) == 0:
        raise GenerativeError("need at least one target embedding")
    if strategy.kind in ("adversarial", "same_user") and len(o_mu) == 0:
        raise GenerativeError(f"{strategy.kind} sampling needs other-user embeddings")
    rng = np.random.default_rng(seed)
    if n == 0:
        return np.zeros((0, LATENT_DIM))
    if strategy.kind == "neighbourhood":
        i = rng.integers(0, len(t_mu), n)
        return t_mu[i] + t_sd[i] * rng.standard_normal((n, LATENT_DIM))
    if strategy.kind == "self_mixed":
        k = min(strategy.n_mix, len(t_mu))
        out = np.empty((n, LATENT_DIM))
        for r in range(n):
            idx = rng.choice(len(t_mu), size=k, replace=False)
            w = rng.dirichlet(np.ones(k))
            out[r] = w @ t_mu[idx]
        return out
    i = rng.integers(0, len(t_mu), n)
    j = rng.integers(0, len(o_mu), n)
    if strategy.kind == "adversarial":
        return strategy.mix_weight * t_mu[i] + (1.0 - strategy.mix_weight) * o_mu[j]
    out = t_mu[i].copy()
    out[:, AUTH_DIMS:] = o_mu[j, AUTH_DIMS:]
    return out


def generate_synthetic(model, strategy, target_gestures, other_embeddings, n, seed=0, user_id=None):
    """Encode the target gestures, sample ``n`` latent points and decode them."""
    if isinstance(strategy, str):
        strategy = SampleStrategy(strategy)
    if n == 0:
        return []
    targets = list(target_gestures)
    if not targets:
        raise GenerativeError("need at least one target gesture")
    emb = encode(model, targets)
    Z = sample_latent(strategy, emb, other_embeddings, n, seed)
    series = decode(model, Z)
    uid = user_id if user_id is not None else targets[0].user_id
    return [
        Gesture(user_id=uid, gesture_id=f"{uid}-syn-{strategy.kind}-{seed}-{k:04d}", series=series[k],
                terminal=None, is_gesture=True, synthetic=True, strategy=strategy.kind)
        for k in range(n)
    ]
