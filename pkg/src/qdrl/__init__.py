"""Quantum-circuit DDPG toolkit for grid frequency regulation.

Layered like the physics: `qsim` (dense statevector kernels), `ansatz`
(layered data re-uploading circuits), `gradients` (parameter-shift,
adjoint, finite differences), `noise` (device-style emulation), `lfc`
(multi-machine frequency dynamics with a PI baseline), `agent` (the
quantum actor and critic), `trainer` (the DDPG loop), `config` and
`cli` on top.
"""

from __future__ import annotations

from .agent import (
    ActorConfig,
    CircuitExecutor,
    CriticConfig,
    QuantumActor,
    QuantumCritic,
    ReplayBuffer,
    Transition,
)
from .ansatz import CircuitLayout, InitSpec, PqcParams, build_layout, evaluate, init_params
from .config import ConfigError, ExperimentConfig, load_tree, resolve
from .gradients import (
    GradientMethodError,
    grad_adjoint,
    grad_finite_difference,
    grad_input,
    grad_parameter_shift,
)
from .lfc import (
    DivergenceError,
    GridParams,
    LfcEnv,
    Scenario,
    default_case,
    run_pi_baseline,
)
from .noise import DEFAULT_NISQ, NoiseConfig
from .trainer import TrainerConfig, TrainResult, evaluate_policy, load_checkpoint, train

__version__ = "0.1.0"

__all__ = [
    "ActorConfig",
    "CircuitExecutor",
    "CircuitLayout",
    "ConfigError",
    "CriticConfig",
    "DEFAULT_NISQ",
    "DivergenceError",
    "ExperimentConfig",
    "GradientMethodError",
    "GridParams",
    "InitSpec",
    "LfcEnv",
    "NoiseConfig",
    "PqcParams",
    "QuantumActor",
    "QuantumCritic",
    "ReplayBuffer",
    "Scenario",
    "TrainResult",
    "TrainerConfig",
    "Transition",
    "build_layout",
    "default_case",
    "evaluate",
    "evaluate_policy",
    "grad_adjoint",
    "grad_finite_difference",
    "grad_input",
    "grad_parameter_shift",
    "init_params",
    "load_checkpoint",
    "load_tree",
    "resolve",
    "run_pi_baseline",
    "train",
]
