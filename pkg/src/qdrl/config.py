"""Experiment configuration: a YAML tree with defaults, overrides, and
typed resolution into the grid, circuit, trainer, and noise objects.

The resolved tree (defaults deep-merged with the file and any --set
overrides) is the canonical record of an experiment: it is written next
to the artifacts as config-resolved.yaml, reloads to the identical
configuration, and hashes to the fingerprint stored in checkpoints.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
import os
from dataclasses import dataclass

import numpy as np
import yaml

from .agent import ActorConfig, CriticConfig
from .lfc import GridParams, Scenario, ring_coupling
from .noise import NoiseConfig
from .trainer import TrainerConfig


class ConfigError(ValueError):
    """Invalid, unreadable, or inconsistent experiment configuration."""


DEFAULT_TREE: dict = {
    "seed": 0,
    "out_dir": "runs/default",
    "grid": {
        "inertia": [5.0, 4.0, 3.5, 3.0, 2.5],
        "damping": [1.5, 1.5, 1.5, 1.5, 1.5],
        "droop": [0.05, 0.05, 0.05, 0.05, 0.05],
        "governor_tc": [0.2, 0.2, 0.2, 0.2, 0.2],
        "turbine_tc": [0.5, 0.5, 0.5, 0.5, 0.5],
        "coupling_stiffness": 1.5,
        "coupling": None,  # explicit symmetric matrix overrides the ring
        "participation": [0.2, 0.2, 0.2, 0.2, 0.2],
        "frequency_bias": 0.05,
        "base_frequency_hz": 60.0,
        "dt": 0.01,
        "control_interval_s": 0.5,
        "area_a": [0, 1, 2],
        "area_b": [3, 4],
        "tie_coeff": 0.1,
        "action_limit": 0.5,
    },
    "scenario": {
        "load_step": 0.10,
        "load_bus": 2,
        "onset_s": 1.0,
        "length_s": 20.0,
    },
    "circuit": {
        "layers": 2,
        "entangle": "ring",
        "actor_qubits": None,  # optional; checked against the grid size
        "critic_qubits": None,
        "action_scale": 0.5,
        "action_bias": 0.0,
        "norm_const": None,
        "output_mode": "per-wire",
        "w_out": 1.0,
        "b_out": 0.0,
        "init_angle_range": math.pi / 8,
        "init_final_y_center": math.pi / 2,  # actor only; pi/2 starts actions near zero
    },
    "trainer": {
        "n_episodes": 200,
        "gamma": 0.99,
        "tau": 0.005,
        "lr_actor": 0.01,
        "lr_critic": 0.01,
        "batch_size": 32,
        "buffer_capacity": 10_000,
        "warmup_episodes": 20,
        "warmup_steps": 400,
        "warmup_mode": "delay_training",
        "sigma0": 0.05,
        "noise_decay": 0.995,
        "explore": True,
        "policy_update_interval": 1,
        "gradient_method": "adjoint",
        "optimizer": "sgd",
        "reward_scale": 1.0,
        "bootstrap_truncation": True,
        "checkpoint_every": 0,
        "check_gradients_every": 0,
    },
    "noise": {
        "enabled": False,
        "depolarizing_prob": 0.001,
        "shots": 1024,
        "readout_flip_prob": 0.01,
        "seed": 0,
    },
}


@dataclass
class ExperimentConfig:
    """Typed view of one resolved experiment tree."""

    tree: dict
    seed: int
    out_dir: str
    grid: GridParams
    scenario: Scenario
    action_limit: float
    actor_config: ActorConfig
    critic_config: CriticConfig
    trainer: TrainerConfig
    noise: NoiseConfig | None

    @property
    def fingerprint(self) -> str:
        return fingerprint_tree(self.tree)


def load_tree(path: str) -> dict:
    """Parse a YAML config file into a plain tree."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path) as handle:
            tree = yaml.safe_load(handle)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file {path} is not valid YAML: {exc}") from exc
    if tree is None:
        tree = {}
    if not isinstance(tree, dict):
        raise ConfigError(f"config root must be a mapping, got {type(tree).__name__}")
    return tree


def _deep_merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key: {where}")
        if isinstance(base[key], dict) and base[key]:
            if not isinstance(value, dict):
                raise ConfigError(f"{where} must be a mapping")
            out[key] = _deep_merge(base[key], value, where)
        else:
            out[key] = copy.deepcopy(value)
    return out


def apply_overrides(tree: dict, assignments: list[str]) -> dict:
    """Apply --set path.to.key=value assignments; values parse as YAML."""
    out = copy.deepcopy(tree)
    for raw in assignments:
        if "=" not in raw:
            raise ConfigError(f"override must look like path.key=value, got {raw!r}")
        dotted, text = raw.split("=", 1)
        keys = [k for k in dotted.strip().split(".") if k]
        if not keys:
            raise ConfigError(f"override has an empty key path: {raw!r}")
        try:
            value = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"override value {text!r} is not parseable: {exc}") from exc
        node = out
        for key in keys[:-1]:
            if not isinstance(node.get(key), dict):
                raise ConfigError(f"unknown config section: {'.'.join(keys[:-1])}")
            node = node[key]
        if keys[-1] not in node:
            raise ConfigError(f"unknown config key: {dotted.strip()}")
        node[keys[-1]] = value
    return out


def fingerprint_tree(tree: dict) -> str:
    """Stable hash of everything that defines the trajectory.

    out_dir is bookkeeping and the episode budget is a stopping time,
    not part of the dynamics: every random stream is keyed by (seed,
    episode, step), so extending a run under a larger budget replays
    the same trajectory. Excluding both lets a checkpoint resume into
    a longer run while any physics or hyperparameter edit still trips
    the mismatch guard.
    """
    essence = {k: v for k, v in tree.items() if k != "out_dir"}
    trainer = {k: v for k, v in essence.get("trainer", {}).items() if k != "n_episodes"}
    essence["trainer"] = trainer
    blob = json.dumps(essence, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def dump_tree(tree: dict) -> str:
    return yaml.safe_dump(tree, sort_keys=True, default_flow_style=None)


def _as_float_array(block: dict, key: str, where: str) -> np.ndarray:
    value = block[key]
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}.{key} must be a numeric list") from exc
    if arr.ndim != 1:
        raise ConfigError(f"{where}.{key} must be a flat list")
    return arr


def resolve(
    tree_from_file: dict | None = None,
    overrides: list[str] | None = None,
    seed: int | None = None,
    out_dir: str | None = None,
    grad: str | None = None,
    noise_mode: str | None = None,
) -> ExperimentConfig:
    """Merge defaults <- file <- --set overrides <- dedicated flags."""
    tree = _deep_merge(DEFAULT_TREE, tree_from_file or {})
    if overrides:
        tree = apply_overrides(tree, overrides)
    if seed is not None:
        tree["seed"] = int(seed)
    if out_dir is not None:
        tree["out_dir"] = out_dir
    elif tree["out_dir"] == DEFAULT_TREE["out_dir"] and os.environ.get("QDRL_OUT_DIR"):
        tree["out_dir"] = os.environ["QDRL_OUT_DIR"]
    if grad is not None:
        tree["trainer"]["gradient_method"] = grad
    if noise_mode is not None:
        if noise_mode not in ("none", "nisq"):
            raise ConfigError(f"--noise must be 'none' or 'nisq', got {noise_mode!r}")
        tree["noise"]["enabled"] = noise_mode == "nisq"
    return _build(tree)


def _build(tree: dict) -> ExperimentConfig:
    g = tree["grid"]
    inertia = _as_float_array(g, "inertia", "grid")
    n = inertia.shape[0]
    if g["coupling"] is not None:
        coupling = np.asarray(g["coupling"], dtype=float)
    else:
        coupling = ring_coupling(n, float(g["coupling_stiffness"]))
    try:
        grid = GridParams(
            inertia=inertia,
            damping=_as_float_array(g, "damping", "grid"),
            droop=_as_float_array(g, "droop", "grid"),
            governor_tc=_as_float_array(g, "governor_tc", "grid"),
            turbine_tc=_as_float_array(g, "turbine_tc", "grid"),
            coupling=coupling,
            participation=_as_float_array(g, "participation", "grid"),
            frequency_bias=float(g["frequency_bias"]),
            base_frequency_hz=float(g["base_frequency_hz"]),
            dt=float(g["dt"]),
            control_interval_s=float(g["control_interval_s"]),
            area_a=tuple(int(i) for i in g["area_a"]),
            area_b=tuple(int(i) for i in g["area_b"]),
            tie_coeff=float(g["tie_coeff"]),
        )
        s = tree["scenario"]
        scenario = Scenario(
            load_step=float(s["load_step"]),
            load_bus=int(s["load_bus"]),
            onset_s=float(s["onset_s"]),
            length_s=float(s["length_s"]),
        )
        c = tree["circuit"]
        actor_config = ActorConfig(
            n_layers=int(c["layers"]),
            entangle=str(c["entangle"]),
            action_scale=float(c["action_scale"]),
            action_bias=float(c["action_bias"]),
            norm_const=None if c["norm_const"] is None else float(c["norm_const"]),
            output_mode=str(c["output_mode"]),
            init_angle_range=float(c["init_angle_range"]),
            init_final_y_center=float(c["init_final_y_center"]),
        )
        critic_config = CriticConfig(
            n_layers=int(c["layers"]),
            entangle=str(c["entangle"]),
            w_out=float(c["w_out"]),
            b_out=float(c["b_out"]),
            init_angle_range=float(c["init_angle_range"]),
        )
        t = dict(tree["trainer"])
        trainer = TrainerConfig(seed=int(tree["seed"]), **t)
        nz = tree["noise"]
        noise = None
        if nz["enabled"]:
            noise = NoiseConfig(
                depolarizing_prob=float(nz["depolarizing_prob"]),
                shots="exact" if nz["shots"] == "exact" else int(nz["shots"]),
                readout_flip_prob=float(nz["readout_flip_prob"]),
                seed=int(nz["seed"]),
            )
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc

    if c["actor_qubits"] is not None and int(c["actor_qubits"]) != n:
        raise ConfigError(
            f"circuit.actor_qubits={c['actor_qubits']} but the grid has {n} generators"
        )
    if c["critic_qubits"] is not None and int(c["critic_qubits"]) != 2 * n:
        raise ConfigError(
            f"circuit.critic_qubits={c['critic_qubits']} but state+action needs {2 * n}"
        )
    action_limit = float(g["action_limit"])
    if action_limit <= 0:
        raise ConfigError("grid.action_limit must be > 0")

    return ExperimentConfig(
        tree=tree,
        seed=int(tree["seed"]),
        out_dir=str(tree["out_dir"]),
        grid=grid,
        scenario=scenario,
        action_limit=action_limit,
        actor_config=actor_config,
        critic_config=critic_config,
        trainer=trainer,
        noise=noise,
    )


def nisq_profile(tree: dict) -> NoiseConfig:
    """The noise block as a NoiseConfig regardless of its enabled flag."""
    nz = tree["noise"]
    return NoiseConfig(
        depolarizing_prob=float(nz["depolarizing_prob"]),
        shots="exact" if nz["shots"] == "exact" else int(nz["shots"]),
        readout_flip_prob=float(nz["readout_flip_prob"]),
        seed=int(nz["seed"]),
    )
