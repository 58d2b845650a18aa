"""Gradients of PQC expectations: parameter-shift, adjoint, finite diff.

All engines differentiate `ansatz.evaluate` outputs with respect to
the flat parameter vector (see `PqcParams.to_vector`) or the circuit
inputs, and agree on shapes: a single input x of shape (m,) yields an
(n_observables, n_columns) matrix, a batch (B, m) yields
(B, n_observables, n_columns).

Parameter-shift uses the exact two-point rule
df/dtheta = (f(theta + pi/2) - f(theta - pi/2)) / 2 on each gate
angle, times d(angle)/d(parameter) for scaled encodings: 2 circuit
evaluations per scalar parameter. Shifted evaluations are independent
and may run on a thread pool; results are reduced in gate order, so
parallel and serial execution are bitwise identical.

Adjoint differentiation runs one forward pass and one reverse sweep
that un-applies each gate from both the state and an
observable-propagated costate, accumulating 2 Re <lam| dU |psi> terms:
O(n_gates) work per observable instead of O(n_params) evaluations. It
requires exact statevector access, so requesting it under an active
noise model raises GradientMethodError.

The central finite-difference engine is the slow oracle the others
are tested against.

Under an active noise model, parameter-shift and finite-difference
evaluations are routed through `noise.noisy_evaluate` with distinct
sub-seeds per evaluation (the shift rule stays valid in expectation);
noiselessly all engines are interchangeable to within float error.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np
from numba import njit

from . import qsim
from .ansatz import (
    CircuitLayout,
    PqcParams,
    Program,
    build_program,
    measure_program,
    run_program,
)
from .noise import NoiseConfig, noisy_measure_program

__all__ = [
    "GradientMethodError",
    "grad_parameter_shift",
    "grad_input",
    "grad_adjoint",
    "grad_finite_difference",
]

_SHIFT = np.pi / 2


class GradientMethodError(RuntimeError):
    """Requested gradient method cannot serve the requested regime."""


def _noise_active(noise: NoiseConfig | None) -> bool:
    return noise is not None and noise.is_active()


def _shifted_eval(prog: Program, gate_idx: int, shift: float, noise, salt, tag: int) -> np.ndarray:
    if _noise_active(noise):
        return noisy_measure_program(prog, noise, salt=(*_salt(salt), gate_idx, tag), shift_gate=gate_idx, shift=shift)
    return measure_program(prog, run_program(prog, gate_idx, shift))


def _salt(salt) -> tuple[int, ...]:
    if isinstance(salt, (int, np.integer)):
        return (int(salt),)
    return tuple(int(v) for v in salt)


def _shift_engine(
    prog: Program,
    n_cols: int,
    slot_of,
    factor_of,
    noise: NoiseConfig | None,
    salt,
    max_workers: int | None,
) -> np.ndarray:
    """Generic two-point shift over annotated gates; (B, n_obs, n_cols)."""
    grads = np.zeros((prog.n_batch, prog.layout.n_observables, n_cols))
    jobs = [idx for idx, g in enumerate(prog.gates) if slot_of(g) >= 0]

    def one(idx: int) -> np.ndarray:
        plus = _shifted_eval(prog, idx, +_SHIFT, noise, salt, 0)
        minus = _shifted_eval(prog, idx, -_SHIFT, noise, salt, 1)
        return 0.5 * (plus - minus)

    if max_workers is not None and max_workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            deltas = list(pool.map(one, jobs))
    else:
        deltas = [one(idx) for idx in jobs]

    for idx, delta in zip(jobs, deltas):
        gate = prog.gates[idx]
        factor = np.broadcast_to(np.asarray(factor_of(gate), dtype=np.float64), (prog.n_batch,))
        grads[:, :, slot_of(gate)] += factor[:, None] * delta
    return grads


def grad_parameter_shift(
    layout: CircuitLayout,
    params: PqcParams,
    x,
    *,
    noise: NoiseConfig | None = None,
    salt=0,
    max_workers: int | None = None,
) -> np.ndarray:
    """d<observable>/d(parameter) via the two-point shift rule.

    Cost: 2 circuit evaluations per scalar parameter. Exact for this
    gate set when noiseless; unbiased in expectation under noise.
    """
    prog = build_program(layout, params, x)
    grads = _shift_engine(
        prog, layout.n_params, lambda g: g.param_slot, lambda g: g.param_factor, noise, salt, max_workers
    )
    return grads[0] if prog.squeeze else grads


def grad_input(
    layout: CircuitLayout,
    params: PqcParams,
    x,
    *,
    noise: NoiseConfig | None = None,
    salt=0,
    max_workers: int | None = None,
) -> np.ndarray:
    """d<observable>/d(input_j), summing shift terms over every gate
    that re-uploads input j, each times its encoding scale."""
    prog = build_program(layout, params, x)
    grads = _shift_engine(
        prog, layout.n_inputs, lambda g: g.input_slot, lambda g: g.input_factor, noise, salt, max_workers
    )
    return grads[0] if prog.squeeze else grads


# ============================================================
# adjoint differentiation
# ============================================================


@njit(cache=True)
def _ry_vjp_kernel(lam, amps, step, out):
    # 2 Re <lam | (-i/2) Y | psi> per (observable, batch row)
    n_obs, n_batch, dim = lam.shape
    block = 2 * step
    for o in range(n_obs):
        for b in range(n_batch):
            lrow = lam[o, b]
            arow = amps[b]
            acc = 0.0
            for base in range(0, dim, block):
                for i0 in range(base, base + step):
                    i1 = i0 + step
                    l0 = lrow[i0]
                    l1 = lrow[i1]
                    a0 = arow[i0]
                    a1 = arow[i1]
                    acc += l1.real * a0.real + l1.imag * a0.imag - l0.real * a1.real - l0.imag * a1.imag
            out[o, b] = acc


@njit(cache=True)
def _rz_vjp_kernel(lam, amps, step, out):
    # 2 Re <lam | (-i/2) Z | psi> = sum_i sign_i * Im(conj(lam_i) amps_i)
    n_obs, n_batch, dim = lam.shape
    for o in range(n_obs):
        for b in range(n_batch):
            lrow = lam[o, b]
            arow = amps[b]
            acc = 0.0
            for idx in range(dim):
                l = lrow[idx]
                a = arow[idx]
                im = l.real * a.imag - l.imag * a.real
                if (idx & step) == 0:
                    acc += im
                else:
                    acc -= im
            out[o, b] = acc


def _adjoint_pass(prog: Program, wrt_params: bool, wrt_inputs: bool) -> tuple[np.ndarray | None, np.ndarray | None]:
    layout = prog.layout
    n = layout.n_qubits
    dim = 1 << n
    n_batch = prog.n_batch
    n_obs = layout.n_observables

    amps = run_program(prog)
    lam = np.empty((n_obs, n_batch, dim), dtype=np.complex128)
    for k, (axis, qubit) in enumerate(layout.observables):
        lam[k] = amps
        if axis == "z":
            qsim.apply_pauli_z(lam[k], n, qubit)
        else:
            qsim.apply_pauli_x(lam[k], n, qubit)
    lam_flat = lam.reshape(n_obs * n_batch, dim)

    gp = np.zeros((n_batch, n_obs, layout.n_params)) if wrt_params else None
    gi = np.zeros((n_batch, n_obs, layout.n_inputs)) if wrt_inputs else None
    scratch = np.empty((n_obs, n_batch))

    for gate in reversed(prog.gates):
        if gate.kind == "cnot":
            qsim.apply_cnot(amps, n, gate.control, gate.target)
            qsim.apply_cnot(lam_flat, n, gate.control, gate.target)
            continue
        step = 1 << gate.target
        want_p = wrt_params and gate.param_slot >= 0
        want_i = wrt_inputs and gate.input_slot >= 0
        if want_p or want_i:
            if gate.kind == "ry":
                _ry_vjp_kernel(lam, amps, step, scratch)
            else:
                _rz_vjp_kernel(lam, amps, step, scratch)
            g_angle = scratch.T  # (B, n_obs)
            if want_p:
                factor = np.broadcast_to(np.asarray(gate.param_factor, dtype=np.float64), (n_batch,))
                gp[:, :, gate.param_slot] += factor[:, None] * g_angle
            if want_i:
                factor = np.broadcast_to(np.asarray(gate.input_factor, dtype=np.float64), (n_batch,))
                gi[:, :, gate.input_slot] += factor[:, None] * g_angle
        # un-apply the gate from state and costate
        neg = -np.asarray(gate.angles, dtype=np.float64)
        lam_ang = np.tile(neg, n_obs) if neg.ndim else neg
        if gate.kind == "ry":
            qsim.apply_ry(amps, n, gate.target, neg)
            qsim.apply_ry(lam_flat, n, gate.target, lam_ang)
        else:
            qsim.apply_rz(amps, n, gate.target, neg)
            qsim.apply_rz(lam_flat, n, gate.target, lam_ang)
    return gp, gi


def grad_adjoint(
    layout: CircuitLayout,
    params: PqcParams,
    x,
    *,
    wrt: str = "parameters",
    noise: NoiseConfig | None = None,
) -> np.ndarray:
    """Adjoint-mode gradients: one forward pass plus one reverse sweep.

    `wrt` selects "parameters" or "inputs". Noiseless only: an active
    noise model has no statevector to sweep, so the combination raises
    GradientMethodError.
    """
    if wrt not in ("parameters", "inputs"):
        raise ValueError(f"wrt must be 'parameters' or 'inputs', got {wrt!r}")
    if _noise_active(noise):
        raise GradientMethodError(
            "adjoint differentiation needs exact statevector evaluation; "
            "disable the noise model or use parameter-shift"
        )
    prog = build_program(layout, params, x)
    gp, gi = _adjoint_pass(prog, wrt == "parameters", wrt == "inputs")
    grads = gp if wrt == "parameters" else gi
    return grads[0] if prog.squeeze else grads


# ============================================================
# finite differences
# ============================================================


def grad_finite_difference(
    layout: CircuitLayout,
    params: PqcParams,
    x,
    eps: float = 1e-5,
    *,
    noise: NoiseConfig | None = None,
    salt=0,
) -> np.ndarray:
    """Central finite differences over the flat parameter vector.

    The independent oracle: 2 full evaluations per parameter, accuracy
    O(eps^2). Under noise each evaluation gets its own sub-seed.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    prog = build_program(layout, params, x)  # validates and fixes shapes
    vec = params.to_vector()
    grads = np.zeros((prog.n_batch, layout.n_observables, layout.n_params))
    noisy = _noise_active(noise)
    xb = np.asarray(x, dtype=np.float64).reshape(prog.n_batch, layout.n_inputs)
    for i in range(layout.n_params):
        outs = []
        for tag, delta in ((0, eps), (1, -eps)):
            bumped = vec.copy()
            bumped[i] += delta
            p = PqcParams.from_vector(layout, bumped)
            bprog = build_program(layout, p, xb)
            if noisy:
                outs.append(noisy_measure_program(bprog, noise, salt=(*_salt(salt), i, tag)))
            else:
                outs.append(measure_program(bprog, run_program(bprog)))
        grads[:, :, i] = (outs[0] - outs[1]) / (2.0 * eps)
    return grads[0] if prog.squeeze else grads
