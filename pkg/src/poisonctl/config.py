"""Strict INI-style run configuration.

A run file has the sections ``[experiment]``, ``[victim]``, ``[cost]``,
``[env]`` and ``[planner]``. Unknown sections or keys are rejected. Model
arrays are written row by row: ``theta0 = -2; 2`` is a 2 x 1 centroid matrix,
``theta0 = 0.5, -1`` a weight vector; ``random`` draws from N(0, 1).
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .core import DataPoint
from .costs import CostSpec
from .datastream import DatasetResample, GaussianMixture1D, load_csv, preprocess
from .harness import EpisodeConfig
from .trajopt import TrajOptConfig
from .victims import VictimSpec


class ConfigError(ValueError):
    pass


SCHEMA: Dict[str, Dict[str, str]] = {
    "experiment": {
        "name": "synthetic",
        "T": "500",
        "gamma": "0.99",
        "policies": "null, greedy, nlp, clairvoyant",
        "seeds": "0",
        "pre_attack_n": "0",
        "out": "results",
        "record_timing": "false",
    },
    "victim": {"kind": "kmeans", "eta": "0.01", "k": "2", "d": "auto", "theta0": "random"},
    "cost": {
        "lambda": "10",
        "nefarious": "targeted",
        "metric": "auto",
        "target": "random",
        "trigger": "",
        "trigger_label": "1",
    },
    "env": {
        "kind": "gaussian_mixture",
        "means": "-1, 1",
        "weights": "0.5, 0.5",
        "stddev": "1",
        "path": "",
        "header": "false",
        "label_column": "",
        "label_map": "",
        "d_target": "30",
        "preprocess": "true",
    },
    "planner": {
        "horizon": "100",
        "max_iters": "2000",
        "step_size": "0.05",
        "convergence_tol": "1e-6",
        "n_trajectories": "1",
        "clairvoyant_iter_scale": "auto",
    },
}


def _parser() -> configparser.ConfigParser:
    p = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    p.optionxform = str
    return p


def bundled_config(name: str) -> Optional[Path]:
    """Path of a config shipped with the package, or None."""
    ref = resources.files("poisonctl") / "configs" / name
    return Path(str(ref)) if ref.is_file() else None


def read_config(path, overrides: Sequence[str] = ()) -> configparser.ConfigParser:
    """Parse ``path`` strictly, fill defaults and apply ``KEY=VAL`` overrides."""
    path = Path(path)
    if not path.is_file():
        bundled = bundled_config(path.name) if path.parent == Path(".") else None
        if bundled is None:
            raise ConfigError(f"config file not found: {path}")
        path = bundled
    raw = _parser()
    try:
        raw.read_string(path.read_text(encoding="utf-8"), source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    cfg = _parser()
    for section, keys in SCHEMA.items():
        cfg.add_section(section)
        for k, v in keys.items():
            cfg.set(section, k, v)
    for section in raw.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for k, v in raw.items(section):
            if k not in SCHEMA[section]:
                raise ConfigError(f"{path}: unknown key {section}.{k}")
            cfg.set(section, k, v)
    for ov in overrides:
        apply_override(cfg, ov)
    return cfg


def apply_override(cfg: configparser.ConfigParser, override: str):
    if "=" not in override:
        raise ConfigError(f"override must look like KEY=VAL: {override!r}")
    key, val = (s.strip() for s in override.split("=", 1))
    if "." in key:
        section, k = key.split(".", 1)
        if section not in SCHEMA or k not in SCHEMA[section]:
            raise ConfigError(f"unknown override key {key!r}")
    else:
        hits = [s for s, keys in SCHEMA.items() if key in keys]
        if len(hits) != 1:
            raise ConfigError(f"override key {key!r} is {'ambiguous' if hits else 'unknown'}")
        section, k = hits[0], key
    cfg.set(section, k, val)


def dump_config(cfg: configparser.ConfigParser) -> str:
    buf = io.StringIO()
    cfg.write(buf)
    return buf.getvalue()


# ------------------------------------------------------------ value parsing


def _float(cfg, s, k) -> float:
    try:
        return float(cfg.get(s, k))
    except ValueError:
        raise ConfigError(f"{s}.{k}: expected a number, got {cfg.get(s, k)!r}") from None


def _int(cfg, s, k) -> int:
    try:
        return int(cfg.get(s, k))
    except ValueError:
        raise ConfigError(f"{s}.{k}: expected an integer, got {cfg.get(s, k)!r}") from None


def _bool(cfg, s, k) -> bool:
    try:
        return cfg.getboolean(s, k)
    except ValueError:
        raise ConfigError(f"{s}.{k}: expected true/false") from None


def _list(cfg, s, k) -> List[str]:
    return [v.strip() for v in cfg.get(s, k).split(",") if v.strip()]


def parse_matrix(text: str) -> Optional[np.ndarray]:
    """``random`` -> None; ``a, b; c, d`` -> 2-D array; ``a, b`` -> 1-D array."""
    text = text.strip()
    if text.lower() in ("random", ""):
        return None
    rows = [[float(v) for v in row.split(",") if v.strip()] for row in text.split(";")]
    if ";" in text:
        return np.array(rows, dtype=np.float64)
    return np.array(rows[0], dtype=np.float64)


def _model(cfg, s, k, victim: VictimSpec) -> Optional[np.ndarray]:
    try:
        arr = parse_matrix(cfg.get(s, k))
    except ValueError:
        raise ConfigError(f"{s}.{k}: malformed array {cfg.get(s, k)!r}") from None
    if arr is None:
        return None
    if arr.size != int(np.prod(victim.model_shape)):
        raise ConfigError(f"{s}.{k}: expected shape {victim.model_shape}, got {arr.shape}")
    return arr.reshape(victim.model_shape)


def _label_map(text: str):
    if not text.strip():
        return None
    out = {}
    for item in text.split(","):
        if ":" not in item:
            raise ConfigError(f"env.label_map: expected raw:mapped pairs, got {item!r}")
        raw, mapped = item.split(":", 1)
        out[raw.strip()] = float(mapped)
    return out


@dataclass
class RunPlan:
    name: str
    out: Path
    record_timing: bool
    episodes: List[EpisodeConfig]


def build_environment(cfg):
    kind = cfg.get("env", "kind")
    if kind == "gaussian_mixture":
        try:
            means = [float(v) for v in _list(cfg, "env", "means")]
            weights = [float(v) for v in _list(cfg, "env", "weights")]
            return GaussianMixture1D(means, weights, _float(cfg, "env", "stddev"))
        except ValueError as exc:
            raise ConfigError(f"env: {exc}") from None
    if kind == "dataset":
        path = cfg.get("env", "path").strip()
        if not path:
            raise ConfigError("env.path is required for a dataset environment")
        col = cfg.get("env", "label_column").strip() or None
        try:
            pts = load_csv(path, col, header=_bool(cfg, "env", "header"),
                           label_map=_label_map(cfg.get("env", "label_map")))
            if _bool(cfg, "env", "preprocess"):
                pts = preprocess(pts, _int(cfg, "env", "d_target"))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"env: {exc}") from None
        return DatasetResample(pts)
    raise ConfigError(f"env.kind: unknown environment {kind!r}")


def build_plan(cfg) -> RunPlan:
    env = build_environment(cfg)
    d_text = cfg.get("victim", "d").strip()
    d = env.dim if d_text == "auto" else _int(cfg, "victim", "d")
    kind = cfg.get("victim", "kind")
    try:
        victim = VictimSpec(kind, _float(cfg, "victim", "eta"), d,
                            1 if kind == "logreg" else _int(cfg, "victim", "k"))
    except ValueError as exc:
        raise ConfigError(f"victim: {exc}") from None

    metric = cfg.get("cost", "metric")
    if metric == "auto":
        metric = "cosine" if kind == "logreg" else "squared"
    trigger = None
    if cfg.get("cost", "nefarious") == "backdoor":
        t = parse_matrix(cfg.get("cost", "trigger"))
        if t is None:
            raise ConfigError("cost.trigger is required for a backdoor attack")
        trigger = DataPoint(t, _float(cfg, "cost", "trigger_label"))
    try:
        cost = CostSpec(_float(cfg, "cost", "lambda"), cfg.get("cost", "nefarious"), metric,
                        reference=_model(cfg, "cost", "target", victim), trigger=trigger)
        if cost.reference is not None or trigger is not None:
            cost.kernel_args(victim)
        planner = TrajOptConfig(
            horizon=_int(cfg, "planner", "horizon"),
            max_iters=_int(cfg, "planner", "max_iters"),
            step_size=_float(cfg, "planner", "step_size"),
            gamma=_float(cfg, "experiment", "gamma"),
            convergence_tol=_float(cfg, "planner", "convergence_tol"),
            n_trajectories=_int(cfg, "planner", "n_trajectories"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    scale_text = cfg.get("planner", "clairvoyant_iter_scale").strip()
    scale = None if scale_text == "auto" else _float(cfg, "planner", "clairvoyant_iter_scale")

    theta0 = _model(cfg, "victim", "theta0", victim)
    try:
        seeds = [int(s) for s in _list(cfg, "experiment", "seeds")]
    except ValueError:
        raise ConfigError("experiment.seeds: expected comma-separated integers") from None
    policies = _list(cfg, "experiment", "policies")
    if not seeds or not policies:
        raise ConfigError("experiment needs at least one seed and one policy")
    episodes = []
    try:
        for seed in seeds:
            for pol in policies:
                episodes.append(EpisodeConfig(
                    victim=victim, cost=cost, env=env, policy=pol,
                    T=_int(cfg, "experiment", "T"), gamma=_float(cfg, "experiment", "gamma"),
                    planner=planner, theta0=theta0, seed=seed,
                    pre_attack_n=_int(cfg, "experiment", "pre_attack_n"),
                    clairvoyant_iter_scale=scale,
                ))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return RunPlan(cfg.get("experiment", "name"), Path(cfg.get("experiment", "out")),
                   _bool(cfg, "experiment", "record_timing"), episodes)
