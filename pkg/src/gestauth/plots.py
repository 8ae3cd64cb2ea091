"""Static SVG figures. Output is deterministic: no timestamps, fixed id salt."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .dataset import CHANNELS  # noqa: E402

plt.rcParams["svg.hashsalt"] = "gestauth"
_META = {"Date": None}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)


def plot_roc(path, reports):
    """``reports`` maps a label to a MetricsReport."""
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    for label, r in reports.items():
        rows = np.array([row[1:] for row in r.roc], dtype=np.float64).reshape(-1, 3)
        ax.plot(rows[:, 0], rows[:, 2], label=f"{label} (AUROC {r.auroc:.3f})")
    ax.plot([0, 1], [0, 1], ls=":", c="grey", lw=0.8)
    ax.set_xlabel("FAR")
    ax.set_ylabel("TAR")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.01)
    ax.legend(fontsize=7, loc="lower right")
    _save(fig, path)


def linear_projection(points, k=2):
    """Project onto the top-k principal axes (sign fixed so the largest loading is positive)."""
    P = np.asarray(points, dtype=np.float64)
    C = P - P.mean(axis=0)
    _, _, vt = np.linalg.svd(C, full_matrices=False)
    axes = vt[:k]
    signs = np.sign(axes[np.arange(len(axes)), np.abs(axes).argmax(axis=1)])
    axes = axes * np.where(signs == 0, 1.0, signs)[:, None]
    return C @ axes.T


def plot_latent(path, mu, labels, title="latent means"):
    proj = linear_projection(mu)
    labels = np.asarray(labels)
    fig, ax = plt.subplots(figsize=(5, 4.5))
    for lab in sorted(set(labels.tolist())):
        sel = labels == lab
        ax.scatter(proj[sel, 0], proj[sel, 1], s=9, label=str(lab))
    ax.set_title(title, fontsize=9)
    ax.set_xlabel("component 1")
    ax.set_ylabel("component 2")
    ax.legend(fontsize=6, markerscale=1.5, ncol=2)
    _save(fig, path)


def plot_reconstructions(path, originals, recons, n=3):
    n = min(n, len(originals))
    fig, axes = plt.subplots(n, 2, figsize=(8, 2.2 * n), squeeze=False)
    t = np.arange(originals.shape[1])
    for i in range(n):
        for j, (lo, name) in enumerate(((0, "acc"), (3, "gyr"))):
            ax = axes[i, j]
            for c in range(lo, lo + 3):
                line, = ax.plot(t, originals[i, :, c], lw=0.9, label=CHANNELS[c])
                ax.plot(t, recons[i, :, c], lw=0.9, ls="--", c=line.get_color())
            ax.set_title(f"sample {i} {name} (dashed: reconstruction)", fontsize=7)
            if i == 0:
                ax.legend(fontsize=6)
    _save(fig, path)


def plot_history(path, curves):
    """``curves`` maps a label to a per-epoch sequence."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for label, ys in curves.items():
        if len(ys):
            ax.plot(np.arange(1, len(ys) + 1), ys, label=label)
    ax.set_xlabel("epoch")
    ax.set_yscale("log")
    ax.legend(fontsize=7)
    _save(fig, path)


def plot_sweep(path, curves, metric="far_at_zero"):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for aug in (False, True):
        pts = sorted((r["per_terminal"], r[metric]) for r in curves if r["augmented"] == aug)
        if pts:
            x, y = zip(*pts)
            ax.plot(x, y, marker="o", label="with synthetic" if aug else "real only")
    ax.set_xlabel("enrolment gestures per terminal")
    ax.set_ylabel(metric)
    ax.legend(fontsize=7)
    _save(fig, path)
