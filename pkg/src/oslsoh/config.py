"""Flat ``key = value`` run configuration.

Precedence is command-line flag, then config file (``--config`` or the
``OSL_CONFIG`` environment variable), then the built-in default.  Unknown
keys are rejected; range checks happen when the values are turned into the
per-module parameter objects.
"""

from __future__ import annotations

import os
from dataclasses import replace
from pathlib import Path

from .emd import EMDParams
from .entropy import EnvelopeEntropyConfig
from .neural import TrainConfig
from .optimize import GAConfig, PSOConfig, SearchSpace
from .pipeline import ExperimentConfig
from .vmd import VMDParams


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _inertia(text: str) -> tuple:
    kind, *vals = text.strip().split(":")
    return (kind, *[float(v) for v in vals])


# key -> (parser, default)
KEYS = {
    "data_dir": (str, "."),
    "method": (str, "osl"),
    "t_in": (int, 16),
    "seed": (int, 0),
    "causal": (_bool, False),
    "validation_fraction": (float, 0.1),
    "rated_capacity": (float, 2.0),
    "space.k_min": (int, 3),
    "space.k_max": (int, 10),
    "space.alpha_min": (float, 10.0),
    "space.alpha_max": (float, 2000.0),
    "pso.particles": (int, 20),
    "pso.max_iterations": (int, 100),
    "pso.inertia": (_inertia, ("linear", 0.9, 0.4)),
    "pso.cognitive_coeff": (float, 2.05),
    "pso.social_coeff": (float, 2.05),
    "ga.population": (int, 20),
    "ga.generations": (int, 100),
    "ga.crossover_rate": (float, 0.9),
    "ga.mutation_rate": (float, 0.1),
    "ga.mutation_scale": (float, 0.1),
    "vmd.K": (int, 3),
    "vmd.alpha": (float, 2000.0),
    "vmd.tau": (float, 0.0),
    "vmd.tolerance": (float, 1e-7),
    "vmd.max_iterations": (int, 500),
    "vmd.dc_mode": (_bool, False),
    "emd.max_imfs": (int, 3),
    "emd.sift_sd_threshold": (float, 0.2),
    "emd.max_sifts_per_imf": (int, 100),
    "entropy.epsilon_floor": (float, 1e-12),
    "entropy.envelope_kind": (str, "spline_mean_abs"),
    "entropy.reduce": (str, "sum"),
    "train.learning_rate": (float, 1e-3),
    "train.epochs": (int, 200),
    "train.batch_size": (int, 16),
    "net.filters": (int, 128),
    "net.cells": (int, 64),
}


class ConfigError(ValueError):
    pass


def parse_config_text(text: str, source: str = "<config>") -> dict:
    values = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{n}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"{source}:{n}: unknown key {key!r}")
        try:
            values[key] = KEYS[key][0](value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{n}: bad value for {key}: {exc}") from None
    return values


def load_config(path=None, overrides: dict | None = None) -> dict:
    """Merge defaults, the config file, and non-None ``overrides``."""
    cfg = {k: default for k, (_, default) in KEYS.items()}
    path = path or os.environ.get("OSL_CONFIG")
    if path:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        cfg.update(parse_config_text(p.read_text(), str(p)))
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}")
        cfg[key] = value
    return cfg


def search_space(cfg: dict) -> SearchSpace:
    return SearchSpace((cfg["space.k_min"], cfg["space.k_max"]), (cfg["space.alpha_min"], cfg["space.alpha_max"]))


def pso_config(cfg: dict) -> PSOConfig:
    return PSOConfig(cfg["pso.particles"], cfg["pso.max_iterations"], cfg["pso.inertia"],
                     cfg["pso.cognitive_coeff"], cfg["pso.social_coeff"], cfg["seed"])


def ga_config(cfg: dict) -> GAConfig:
    return GAConfig(population=cfg["ga.population"], generations=cfg["ga.generations"],
                    crossover_rate=cfg["ga.crossover_rate"], mutation_rate=cfg["ga.mutation_rate"],
                    mutation_scale=cfg["ga.mutation_scale"], seed=cfg["seed"])


def vmd_params(cfg: dict) -> VMDParams:
    return VMDParams(cfg["vmd.K"], cfg["vmd.alpha"], cfg["vmd.tau"], cfg["vmd.tolerance"],
                     cfg["vmd.max_iterations"], cfg["vmd.dc_mode"])


def emd_params(cfg: dict) -> EMDParams:
    return EMDParams(cfg["emd.max_imfs"], cfg["emd.sift_sd_threshold"], cfg["emd.max_sifts_per_imf"])


def entropy_config(cfg: dict) -> EnvelopeEntropyConfig:
    return EnvelopeEntropyConfig(cfg["entropy.epsilon_floor"], cfg["entropy.envelope_kind"], cfg["entropy.reduce"])


def experiment_config(cfg: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig(
            method=cfg["method"],
            t_in=cfg["t_in"],
            master_seed=cfg["seed"],
            space=search_space(cfg),
            pso=pso_config(cfg),
            vmd=vmd_params(cfg),
            emd=emd_params(cfg),
            entropy=entropy_config(cfg),
            training=replace(TrainConfig(), learning_rate=cfg["train.learning_rate"],
                             epochs=cfg["train.epochs"], batch_size=cfg["train.batch_size"]),
            filters=cfg["net.filters"],
            cells=cfg["net.cells"],
            validation_fraction=cfg["validation_fraction"],
            causal=cfg["causal"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
