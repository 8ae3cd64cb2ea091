"""Command-line entry point: ``gestauth <command> [options]``.

Data commands (ingest, simulate) write a data directory holding
``corpus.jsonl``, ``split.json``, ``norm.json`` and ``config.json``. Every
other command writes ``<out>/run-<name>/`` with ``config.json``,
``metrics.json``, ``curves/*.csv``, ``plots/*.svg`` and ``checkpoints/*``.

Exit codes: 0 success, 2 usage or input error, 3 numerical failure.
"""

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import config as config_mod
from .classifiers import ARCH_NAMES, ForestSpec, TrainConfig, build_architecture, rf_predict, train_random_forest
from .classifiers.training import build_auth_task, predict_proba, train_classifier
from .config import ConfigError, int_list
from .dataset import (
    CHANNELS, NormStats, SplitSpec, apply_norm, fit_norm_stats, ingest_user, invert_norm, random_profiles,
    read_corpus, select, simulate_corpus, stack, temporal_split, write_corpus,
)
from .diffcore import load_into, read_checkpoint, save_checkpoint
from .distances import LossSpec, combined_loss, dtw, klb_mod, mse_loss
from .evaluation import (
    ScoreSet, TstrConfig, enrolment_sweep, evaluate_scores, mean_reports, sweep_curves,
    tstr_auth, tstr_intent, write_sweep_csv,
)
from .evaluation.tstr import enrolment_gestures
from .features import extract_features_batch
from .generative import STRATEGIES, VAE, VaeConfig, decode, encode, generate_synthetic, train_vae

log = logging.getLogger("gestauth")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3
ARCHES = {name.lower(): name for name in ARCH_NAMES}


# --- shared plumbing -------------------------------------------------------------

def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def _run_dir(cfg, out):
    run = Path(out) / f"run-{cfg['name']}"
    for sub in ("curves", "plots", "checkpoints"):
        (run / sub).mkdir(parents=True, exist_ok=True)
    config_mod.dump(cfg, run / "config.json")
    return run


def _write_data_dir(out, corpus, cfg):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    split = temporal_split(corpus, cfg["train_fraction"], cfg["val_fraction"], seed=cfg["seed"])
    norm = fit_norm_stats(select(corpus, split.train))
    write_corpus(out / "corpus.jsonl", corpus)
    (out / "split.json").write_text(split.to_json() + "\n")
    _write_json(out / "norm.json", norm.to_dict())
    config_mod.dump(cfg, out / "config.json")
    users = sorted({g.user_id for g in corpus})
    log.info("wrote %d windows for %d users to %s", len(corpus), len(users), out)


def _load_data(data_dir):
    d = Path(data_dir)
    for f in ("corpus.jsonl", "split.json", "norm.json"):
        if not (d / f).exists():
            raise FileNotFoundError(f"{d / f} not found (run ingest or simulate first)")
    corpus = read_corpus(d / "corpus.jsonl")
    split = SplitSpec.from_json((d / "split.json").read_text())
    norm = NormStats.from_dict(json.loads((d / "norm.json").read_text()))
    return corpus, split, norm


def _map(fn, items, jobs):
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(it) for it in items]


def _vae_config(cfg):
    return VaeConfig(beta=None if cfg["vae_beta"] < 0 else cfg["vae_beta"], alpha=cfg["vae_alpha"],
                     reg_kind=cfg["vae_reg"], loss=LossSpec(kind=cfg["vae_loss"]),
                     recon_reduction=cfg["recon_reduction"], temperature=cfg["temperature"],
                     wae_distance=cfg["wae_distance"], lr=cfg["vae_lr"], batch_size=cfg["vae_batch_size"],
                     max_epochs=cfg["vae_epochs"], patience=cfg["vae_patience"], seed=cfg["seed"])


def _load_vae(stem):
    stem = Path(stem)
    if not stem.with_suffix(".json").exists() and not Path(f"{stem}.json").exists():
        raise FileNotFoundError(f"autoencoder checkpoint {stem}.json not found")
    manifest, arrays = read_checkpoint(stem)
    return load_into(VAE.from_spec(manifest["spec"]), arrays)


def _normalised(corpus, norm):
    return [apply_norm(g, norm) for g in corpus]


def _train_or_load_vae(args, cfg, ncorpus, split, run, exclude):
    if args.vae:
        return _load_vae(args.vae), str(args.vae)
    trainval = select(ncorpus, list(split.train) + list(split.validation))
    vcfg = _vae_config(cfg)
    model, hist = train_vae(trainval, vcfg, exclude_users=exclude, log=log.info)
    stem = run / "checkpoints" / "vae"
    save_checkpoint(model, stem, meta={"vae_config": vcfg.to_dict(), "exclude_users": list(exclude)})
    _write_history(run / "curves" / "vae_history.csv", hist.to_dict())
    return model, str(stem)


def _write_history(path, hist):
    cols = [k for k, v in hist.items() if isinstance(v, list)]
    n = max((len(hist[k]) for k in cols), default=0)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch"] + cols)
        for i in range(n):
            w.writerow([i + 1] + [repr(float(hist[k][i])) if i < len(hist[k]) else "" for k in cols])


def _pairwise_mean(A):
    A = A.reshape(len(A), -1)
    sq = (A * A).sum(axis=1)
    d = np.sqrt(np.maximum(sq[:, None] + sq[None] - 2.0 * A @ A.T, 0.0))
    return float(d[np.triu_indices(len(A), 1)].mean()) if len(A) > 1 else 0.0


def _plots_enabled(cfg):
    if not cfg["plots"]:
        return None
    from . import plots
    return plots


# --- commands --------------------------------------------------------------------

def cmd_ingest(args, cfg):
    raw = Path(args.raw)
    if not raw.is_dir():
        raise FileNotFoundError(f"raw directory {raw} not found")
    csvs = sorted(raw.glob("*.csv"))
    if not csvs:
        raise FileNotFoundError(f"no per-user CSV files in {raw}")
    filt = {"cutoff_hz": cfg["filter_cutoff_hz"], "order": cfg["filter_order"]} if cfg["apply_filter"] else None
    corpus = []
    for path in csvs:
        manifest = path.with_suffix(".json")
        if not manifest.exists():
            raise FileNotFoundError(f"manifest {manifest} missing for {path.name}")
        corpus.extend(ingest_user(path, manifest, filt))
    _write_data_dir(args.out, corpus, cfg)
    return EXIT_OK


def cmd_simulate(args, cfg):
    profiles = random_profiles(cfg["users"], seed=cfg["seed"], noise_sigma=cfg["noise_sigma"],
                               spread=cfg["sim_spread"])
    corpus = simulate_corpus(profiles, cfg["gestures_per_user"], cfg["nongestures_per_user"], seed=cfg["seed"])
    _write_data_dir(args.out, corpus, cfg)
    return EXIT_OK


def _auth_unit(job):
    corpus, split, user, cfg, run = job
    task = build_auth_task(corpus, split, user, cfg["limited_fraction"])
    arch = cfg["arch"].lower()
    ckpt = Path(run) / "checkpoints"
    if arch.startswith("rf"):
        X = np.concatenate([task.X_train, task.X_val])
        y = np.concatenate([task.y_train, task.y_val])
        forest = train_random_forest(ForestSpec(n_trees=int(arch[2:] or 100), seed=cfg["seed"]),
                                     extract_features_batch(X), y)
        (ckpt / f"{user}.forest.json").write_text(forest.to_json())
        scores = rf_predict(forest, extract_features_batch(task.X_test))
    else:
        tc = TrainConfig(lr=cfg["lr"], pos_weight=cfg["pos_weight"], patience=cfg["patience"],
                         max_epochs=cfg["max_epochs"], batch_size=cfg["batch_size"], seed=cfg["seed"])
        model, hist = train_classifier(build_architecture(ARCHES[arch]), task, tc)
        save_checkpoint(model, ckpt / user, meta={"target_user": user, "norm": task.norm.to_dict(),
                                                  "best_epoch": hist.best_epoch})
        _write_history(Path(run) / "curves" / f"history-{user}.csv",
                       {"train_loss": hist.train_loss, "val_loss": hist.val_loss})
        scores = predict_proba(model, task.X_test)
    ss = ScoreSet(scores, task.y_test)
    _write_json(ckpt / f"scores-{user}.json", {**ss.to_dict(), "gesture_ids": list(task.test_ids)})
    report = evaluate_scores(ss, config={"target_user": user, "arch": arch})
    report.write_roc_csv(Path(run) / "curves" / f"roc-{user}.csv")
    return user, report


def cmd_train_auth(args, cfg):
    if cfg["arch"].lower() not in ARCHES and not cfg["arch"].lower().startswith("rf"):
        raise ConfigError(f"unknown arch {cfg['arch']!r}; choose from {sorted(ARCHES)} or rf<N>")
    corpus, split, _ = _load_data(args.data)
    users = [cfg["target_user"]] if cfg["target_user"] else sorted({g.user_id for g in corpus if g.is_gesture})
    run = _run_dir(cfg, args.out)
    results = _map(_auth_unit, [(corpus, split, u, cfg, str(run)) for u in users], cfg["jobs"])
    reports = dict(results)
    for u, r in results:
        log.info("%s: AUROC %.4f EER [%.4f, %.4f] FAR@0 %.4f", u, r.auroc, r.eer.lower, r.eer.upper, r.far_at_zero)
    _write_json(run / "metrics.json", {"inputs": {"data": str(args.data)}, "arch": cfg["arch"],
                                       "per_user": {u: r.summary() for u, r in reports.items()},
                                       "mean": mean_reports(list(reports.values()))})
    plots = _plots_enabled(cfg)
    if plots:
        plots.plot_roc(run / "plots" / "roc.svg", reports)
    return EXIT_OK


def cmd_train_vae(args, cfg):
    corpus, split, norm = _load_data(args.data)
    ncorpus = _normalised(corpus, norm)
    run = _run_dir(cfg, args.out)
    exclude = [cfg["holdout"]] if cfg["holdout"] else []
    args.vae = None
    model, stem = _train_or_load_vae(args, cfg, ncorpus, split, run, exclude)
    test = [g for g in select(ncorpus, split.test) if g.is_gesture]
    X = stack(test)
    emb = encode(model, X)
    R = decode(model, emb.mu)
    sigma = np.exp(0.5 * emb.log_var)
    metrics = {"inputs": {"data": str(args.data)}, "checkpoint": stem, "exclude_users": exclude,
               "test_recon_mse": float(np.mean((R - X) ** 2)),
               "latent_abs_mean": np.abs(emb.mu.mean(axis=0)).tolist(),
               "latent_sigma_mean": sigma.mean(axis=0).tolist(),
               "latent_mu_std": emb.mu.std(axis=0).tolist(),
               "pairwise_ratio": _pairwise_mean(R) / max(_pairwise_mean(X), 1e-300)}
    _write_json(run / "metrics.json", metrics)
    plots = _plots_enabled(cfg)
    if plots:
        plots.plot_latent(run / "plots" / "latent.svg", emb.mu, [g.user_id for g in test])
        plots.plot_reconstructions(run / "plots" / "reconstruction.svg", X, R)
    return EXIT_OK


def cmd_generate(args, cfg):
    corpus, split, norm = _load_data(args.data)
    user = cfg["holdout"] or cfg["target_user"]
    if not user:
        raise ConfigError("generate needs --user")
    model = _load_vae(args.vae)
    ncorpus = _normalised(corpus, norm)
    trainval = [g for g in select(ncorpus, list(split.train) + list(split.validation)) if g.is_gesture]
    pool = [g for g in trainval if g.user_id == user]
    if not pool:
        raise ConfigError(f"user {user!r} has no training gestures")
    enrol = enrolment_gestures(pool, cfg["per_terminal"], np.random.default_rng(cfg["seed"]))
    others = encode(model, stack([g for g in trainval if g.user_id != user]))
    synth = generate_synthetic(model, cfg["strategy"], enrol, others, cfg["n_synthetic"], seed=cfg["seed"],
                               user_id=user)
    run = _run_dir(cfg, args.out)
    write_corpus(run / "synthetic.jsonl", [invert_norm(g, norm) for g in synth])
    S = stack(synth)
    _write_json(run / "metrics.json", {"inputs": {"data": str(args.data), "vae": str(args.vae)}, "user": user,
                                       "strategy": cfg["strategy"], "n_synthetic": len(synth),
                                       "enrolment_ids": [g.gesture_id for g in enrol],
                                       "synthetic_pairwise": _pairwise_mean(S) if len(S) else 0.0,
                                       "enrolment_pairwise": _pairwise_mean(stack(enrol))})
    with open(run / "curves" / "synthetic_channel_stats.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["channel", "real_mean", "real_std", "synthetic_mean", "synthetic_std"])
        E = stack(enrol)
        for c, name in enumerate(CHANNELS):
            w.writerow([name, repr(float(E[..., c].mean())), repr(float(E[..., c].std())),
                        repr(float(S[..., c].mean())) if len(S) else "", repr(float(S[..., c].std())) if len(S) else ""])
    plots = _plots_enabled(cfg)
    if plots and len(S):
        k = min(3, len(enrol), len(S))
        plots.plot_reconstructions(run / "plots" / "synthetic.svg", stack(enrol[:k]), S[:k])
    return EXIT_OK


def cmd_evaluate(args, cfg):
    path = Path(args.scores)
    if not path.exists():
        raise FileNotFoundError(f"score file {path} not found")
    ss = ScoreSet.from_dict(json.loads(path.read_text()))
    report = evaluate_scores(ss, config={"scores": str(path)})
    run = _run_dir(cfg, args.out)
    _write_json(run / "metrics.json", {"summary": report.summary(), **report.to_dict()})
    report.write_roc_csv(run / "curves" / "roc.csv")
    plots = _plots_enabled(cfg)
    if plots:
        plots.plot_roc(run / "plots" / "roc.svg", {path.stem: report})
    return EXIT_OK


def _tstr_cfg(cfg, strategy):
    return TstrConfig(strategy=strategy, n_synthetic=cfg["n_synthetic"], per_terminal=cfg["per_terminal"],
                      real_negatives=cfg["real_negatives"], classifier=cfg["tstr_classifier"])


def _tstr_unit(job):
    ncorpus, split, holdout, vae_stem, tcfg, seed = job
    return tstr_auth(ncorpus, split, holdout, _load_vae(vae_stem), tcfg, seed)


def _median_summary(reports):
    keys = reports[0].summary().keys()
    return {k: float(np.median([r.summary()[k] for r in reports])) for k in keys}


def cmd_tstr(args, cfg):
    corpus, split, norm = _load_data(args.data)
    ncorpus = _normalised(corpus, norm)
    seeds = int_list(cfg["seeds"])
    if not seeds:
        raise ConfigError("need at least one seed")
    if args.mode == "auth" and not cfg["holdout"]:
        raise ConfigError("tstr --mode auth needs --holdout")
    run = _run_dir(cfg, args.out)
    exclude = [cfg["holdout"]] if args.mode == "auth" else []
    model, stem = _train_or_load_vae(args, cfg, ncorpus, split, run, exclude)
    out = {"inputs": {"data": str(args.data), "vae": stem}, "mode": args.mode}
    roc = {}
    if args.mode == "auth":
        strategy = cfg["strategy"]
        strategies = ["none"] + (list(STRATEGIES) if strategy == "all" else [strategy])
        jobs = [(ncorpus, split, cfg["holdout"], stem, _tstr_cfg(cfg, s), seed) for s in strategies for seed in seeds]
        reports = _map(_tstr_unit, jobs, cfg["jobs"])
        by_strategy = {}
        for job, r in zip(jobs, reports):
            s, seed = job[4].strategy, job[5]
            by_strategy.setdefault(s, []).append(r)
            r.write_roc_csv(run / "curves" / f"roc-{s}-seed{seed}.csv")
        for s, rs in by_strategy.items():
            out[s] = {"median": _median_summary(rs), "per_seed": [r.summary() for r in rs]}
            roc[s] = rs[0]
            log.info("%s: median AUROC %.4f FAR@0 %.4f", s, out[s]["median"]["auroc"], out[s]["median"]["far_at_zero"])
    else:
        trainval = select(ncorpus, list(split.train) + list(split.validation))
        test = select(ncorpus, split.test)
        gest = [g for g in trainval if g.is_gesture]
        non = [g for g in trainval if not g.is_gesture]
        tg = [g for g in test if g.is_gesture]
        tn = [g for g in test if not g.is_gesture]
        for label, recon in (("reconstructed", True), ("real", False)):
            rs = [tstr_intent(model, gest, non, tg, tn, cfg["tstr_classifier"], cfg["n_intent"], seed, recon)
                  for seed in seeds]
            for seed, r in zip(seeds, rs):
                r.write_roc_csv(run / "curves" / f"roc-{label}-seed{seed}.csv")
            out[label] = {"median": _median_summary(rs), "per_seed": [r.summary() for r in rs]}
            roc[label] = rs[0]
    _write_json(run / "metrics.json", out)
    plots = _plots_enabled(cfg)
    if plots:
        plots.plot_roc(run / "plots" / "roc.svg", roc)
    return EXIT_OK


def cmd_sweep(args, cfg):
    if not cfg["holdout"]:
        raise ConfigError("sweep needs --holdout")
    if cfg["strategy"] not in STRATEGIES:
        raise ConfigError(f"sweep needs a sampling strategy from {STRATEGIES}")
    corpus, split, norm = _load_data(args.data)
    ncorpus = _normalised(corpus, norm)
    run = _run_dir(cfg, args.out)
    model, stem = _train_or_load_vae(args, cfg, ncorpus, split, run, [cfg["holdout"]])
    counts, seeds = int_list(cfg["sweep_counts"]), int_list(cfg["seeds"])
    rows = enrolment_sweep(ncorpus, split, cfg["holdout"], model, counts, _tstr_cfg(cfg, cfg["strategy"]), seeds)
    write_sweep_csv(run / "curves" / "sweep.csv", rows)
    med = sweep_curves(rows)
    with open(run / "curves" / "sweep_median.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(med[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(med)
    _write_json(run / "metrics.json", {"inputs": {"data": str(args.data), "vae": stem}, "median": med, "rows": rows})
    plots = _plots_enabled(cfg)
    if plots:
        plots.plot_sweep(run / "plots" / "sweep.svg", med)
    return EXIT_OK


def cmd_loss_eval(args, cfg):
    corpus, _, norm = _load_data(args.data)
    by_id = {g.gesture_id: g for g in corpus}
    missing = [gid for gid in (args.a, args.b) if gid not in by_id]
    if missing:
        raise ConfigError(f"gesture id(s) not in corpus: {missing}")
    x, y = (apply_norm(by_id[gid], norm).series for gid in (args.a, args.b))
    value, _ = combined_loss(LossSpec(kind=cfg["vae_loss"]), x, y)
    metrics = {"a": args.a, "b": args.b, "loss_kind": cfg["vae_loss"], "loss": value,
               "mse": mse_loss(x, y),
               "klb_mod": klb_mod(x, y), "dtw": float(sum(dtw(x[:, c], y[:, c]) for c in range(x.shape[1])))}
    run = _run_dir(cfg, args.out)
    _write_json(run / "metrics.json", metrics)
    print(json.dumps(metrics, sort_keys=True))
    return EXIT_OK


# --- argument parsing ----------------------------------------------------------------

# flag dest -> config key
FLAG_KEYS = {
    "name": "name", "seed": "seed", "jobs": "jobs", "users": "users", "gestures": "gestures_per_user",
    "nongestures": "nongestures_per_user", "arch": "arch", "target": "target_user", "user": "target_user",
    "limited": "limited_fraction", "holdout": "holdout", "strategy": "strategy", "n": "n_synthetic",
    "counts": "sweep_counts", "seeds": "seeds", "classifier": "tstr_classifier", "loss": "vae_loss",
    "epochs": "max_epochs", "vae_epochs": "vae_epochs",
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any config key")
    common.add_argument("--name")
    common.add_argument("--seed", type=int)
    common.add_argument("--jobs", type=int, help="parallel per-user/per-seed units")
    common.add_argument("--no-plots", action="store_true")
    common.add_argument("-q", "--quiet", action="store_true")

    p = argparse.ArgumentParser(prog="gestauth", description="Smartwatch payment-gesture authentication toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", parents=[common], help="raw per-user CSV + manifest -> data directory")
    s.add_argument("--raw", required=True)
    s.add_argument("--out", required=True)

    s = sub.add_parser("simulate", parents=[common], help="simulated multi-user corpus -> data directory")
    s.add_argument("--users", type=int)
    s.add_argument("--gestures", type=int)
    s.add_argument("--nongestures", type=int)
    s.add_argument("--out", required=True)

    def run_parser(name, help_):
        s = sub.add_parser(name, parents=[common], help=help_)
        s.add_argument("--out", default="runs", help="parent directory for run-<name>/")
        return s

    s = run_parser("train-auth", "train per-user authentication classifiers")
    s.add_argument("--data", required=True)
    s.add_argument("--arch", help=f"{', '.join(sorted(ARCHES))}, rf100 or rf1000")
    s.add_argument("--target", help="single target user (default: all)")
    s.add_argument("--limited", type=float, help="fraction of the target's training gestures to keep")
    s.add_argument("--epochs", type=int)

    s = run_parser("train-vae", "train the autoencoder")
    s.add_argument("--data", required=True)
    s.add_argument("--holdout", help="user to leave out")
    s.add_argument("--vae-epochs", type=int)

    s = run_parser("generate", "decode synthetic gestures for one user")
    s.add_argument("--data", required=True)
    s.add_argument("--vae", required=True, help="autoencoder checkpoint stem")
    s.add_argument("--user")
    s.add_argument("--strategy", choices=STRATEGIES)
    s.add_argument("--n", type=int)

    s = run_parser("evaluate", "metrics from a saved score set")
    s.add_argument("--scores", required=True)

    s = run_parser("tstr", "train-synthetic test-real experiments")
    s.add_argument("--data", required=True)
    s.add_argument("--mode", choices=("auth", "intent"), default="auth")
    s.add_argument("--strategy", choices=STRATEGIES + ("all",))
    s.add_argument("--holdout")
    s.add_argument("--vae", help="autoencoder checkpoint stem (trained here when omitted)")
    s.add_argument("--seeds")
    s.add_argument("--classifier", choices=("rf", "complexmix"))
    s.add_argument("--n", type=int)
    s.add_argument("--vae-epochs", type=int)

    s = run_parser("sweep", "enrolment-burden sweep")
    s.add_argument("--data", required=True)
    s.add_argument("--holdout")
    s.add_argument("--strategy", choices=STRATEGIES)
    s.add_argument("--vae")
    s.add_argument("--counts", help="gestures per terminal, e.g. 1,2,4")
    s.add_argument("--seeds")
    s.add_argument("--n", type=int)
    s.add_argument("--vae-epochs", type=int)

    s = run_parser("loss-eval", "reconstruction losses and distances between two gestures")
    s.add_argument("--data", required=True)
    s.add_argument("--a", required=True, help="gesture id")
    s.add_argument("--b", required=True, help="gesture id")
    s.add_argument("--loss")
    return p


COMMANDS = {
    "ingest": cmd_ingest, "simulate": cmd_simulate, "train-auth": cmd_train_auth, "train-vae": cmd_train_vae,
    "generate": cmd_generate, "evaluate": cmd_evaluate, "tstr": cmd_tstr, "sweep": cmd_sweep,
    "loss-eval": cmd_loss_eval,
}


def resolve_config(args, environ=None):
    overrides = config_mod.parse_set(args.set)
    for dest, key in FLAG_KEYS.items():
        val = getattr(args, dest, None)
        if val is not None:
            overrides[key] = val
    if args.no_plots:
        overrides["plots"] = False
    return config_mod.resolve(args.config, overrides, environ)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        cfg = resolve_config(args)
        if cfg["jobs"] < 1:
            raise ConfigError("jobs must be >= 1")
        return COMMANDS[args.command](args, cfg)
    except (FloatingPointError, np.linalg.LinAlgError, OverflowError) as exc:
        print(f"gestauth: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"gestauth: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
