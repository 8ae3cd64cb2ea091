"""Flat run configuration shared by the CLI commands.

Values resolve in order: built-in defaults, a JSON config file, environment
variables ``GESTAUTH_<KEY>``, then command-line flags. Unknown keys are
rejected at every layer.
"""

import json
import os
from pathlib import Path

ENV_PREFIX = "GESTAUTH_"

DEFAULTS = {
    "name": "default",
    "seed": 0,
    # data
    "dataset_dir": "",  # raw per-user CSV + manifest directory
    "users": 8,
    "gestures_per_user": 42,
    "nongestures_per_user": 0,
    "sim_spread": 0.6,
    "noise_sigma": 0.1,
    "apply_filter": True,
    "filter_cutoff_hz": 10.0,
    "filter_order": 2,
    "train_fraction": 2 / 3,
    "val_fraction": 0.2,
    # authentication classifiers
    "arch": "complexmix",
    "target_user": "",
    "lr": 1e-4,
    "pos_weight": 4.0,
    "patience": 150,
    "max_epochs": 2000,
    "batch_size": 32,
    "limited_fraction": 1.0,
    # autoencoder
    "vae_reg": "vae",
    "vae_beta": -1.0,  # negative means the regulariser's default
    "vae_alpha": 1e-2,
    "vae_loss": "klb_mod_feature",
    "vae_lr": 1e-3,
    "vae_epochs": 300,
    "vae_patience": 20,
    "vae_batch_size": 32,
    "temperature": 1.0,
    "recon_reduction": "mean",
    "wae_distance": "euclidean",
    # synthetic data and TSTR
    "strategy": "adversarial",
    "n_synthetic": 500,
    "per_terminal": 2,
    "real_negatives": False,
    "holdout": "",
    "tstr_classifier": "rf",
    "n_intent": 240,
    "sweep_counts": "2,4,8",
    "seeds": "0",
    # execution
    "jobs": 1,
    "plots": True,
}


class ConfigError(ValueError):
    pass


def _coerce(key, value):
    default = DEFAULTS[key]
    if isinstance(default, bool):
        if isinstance(value, bool):
            return value
        text = str(value).strip().lower()
        if text in ("1", "true", "yes", "on"):
            return True
        if text in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {value!r}")
    try:
        if isinstance(default, int):
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        if isinstance(default, float):
            return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected {type(default).__name__}, got {value!r}") from None
    return str(value)


def _check_keys(keys, where):
    unknown = sorted(set(keys) - set(DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown config key(s) in {where}: {', '.join(unknown)}")


def resolve(config_file=None, overrides=None, environ=None):
    cfg = dict(DEFAULTS)
    if config_file:
        path = Path(config_file)
        if not path.exists():
            raise FileNotFoundError(f"config file not found: {path}")
        data = json.loads(path.read_text())
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        _check_keys(data, str(path))
        cfg.update({k: _coerce(k, v) for k, v in data.items()})
    env = os.environ if environ is None else environ
    env_keys = {k[len(ENV_PREFIX):].lower(): v for k, v in env.items() if k.startswith(ENV_PREFIX)}
    _check_keys(env_keys, "environment")
    cfg.update({k: _coerce(k, v) for k, v in env_keys.items()})
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    _check_keys(overrides, "command line")
    cfg.update({k: _coerce(k, v) for k, v in overrides.items()})
    return cfg


def parse_set(items):
    """``["key=value", ...]`` from repeated ``--set`` flags."""
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def int_list(text):
    try:
        return [int(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of integers, got {text!r}") from None


def dump(cfg, path):
    Path(path).write_text(json.dumps(cfg, indent=1, sort_keys=True) + "\n")
