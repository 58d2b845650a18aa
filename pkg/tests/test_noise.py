"""Shot-noise and Pauli-channel emulation tests."""

import numpy as np
import pytest

from qdrl.ansatz import InitSpec, build_layout, evaluate, init_params
from qdrl.noise import TRAJECTORY_CAP, NoiseConfig, noisy_evaluate


def identity_layout():
    """One wire, all angles zero: exact <Z> is +1."""
    layout = build_layout(1, 0, 1, "chain", (("z", 0),))
    params = init_params(layout, 0, InitSpec(angle_range=0.0))
    return layout, params


# ============================================================
# configuration and pass-through
# ============================================================


def test_config_validation():
    with pytest.raises(ValueError):
        NoiseConfig(depolarizing_prob=-0.1)
    with pytest.raises(ValueError):
        NoiseConfig(depolarizing_prob=1.5)
    with pytest.raises(ValueError):
        NoiseConfig(readout_flip_prob=1.2)
    with pytest.raises(ValueError):
        NoiseConfig(shots=0)
    with pytest.raises(ValueError):
        NoiseConfig(shots="sampled")
    NoiseConfig(shots="exact")  # accepted


def test_default_profile_is_active():
    assert NoiseConfig().is_active()
    quiet = NoiseConfig(depolarizing_prob=0.0, shots="exact", readout_flip_prob=0.0)
    assert not quiet.is_active()


def test_inactive_noise_is_bitwise_exact():
    """A fully disabled config routes through the noiseless evaluator."""
    layout = build_layout(3, 2, 2, "ring", (("z", 0), ("z", 1), ("x", 2)))
    params = init_params(layout, 4)
    x = np.array([0.3, -0.7])
    quiet = NoiseConfig(depolarizing_prob=0.0, shots="exact", readout_flip_prob=0.0)
    np.testing.assert_array_equal(noisy_evaluate(layout, params, x, quiet), evaluate(layout, params, x))


# ============================================================
# readout statistics
# ============================================================


def test_symmetric_flip_attenuates_expectation():
    """Flip probability r scales <Z> by (1 - 2r): r = 0.1 gives 0.8."""
    layout, params = identity_layout()
    noise = NoiseConfig(depolarizing_prob=0.0, shots=10_000, readout_flip_prob=0.1, seed=1)
    est = noisy_evaluate(layout, params, np.zeros(0), noise)
    assert abs(est[0] - 0.8) < 0.03


def test_half_flip_destroys_signal():
    layout, params = identity_layout()
    noise = NoiseConfig(depolarizing_prob=0.0, shots=100_000, readout_flip_prob=0.5, seed=2)
    est = noisy_evaluate(layout, params, np.zeros(0), noise)
    assert abs(est[0]) < 0.02


def test_exact_shots_apply_analytic_attenuation():
    """shots='exact' keeps the statevector value, scaled by (1 - 2r)."""
    layout = build_layout(2, 1, 1, "chain", (("z", 0), ("z", 1)))
    params = init_params(layout, 9)
    x = np.array([0.6])
    noise = NoiseConfig(depolarizing_prob=0.0, shots="exact", readout_flip_prob=0.25)
    est = noisy_evaluate(layout, params, x, noise)
    np.testing.assert_allclose(est, 0.5 * evaluate(layout, params, x), atol=1e-12)


def test_shot_error_scales_as_inverse_sqrt():
    """Std of the estimator across salts follows shots^(-1/2)."""
    layout, params = identity_layout()
    levels = [256, 1024, 4096, 16384]
    stds = []
    for shots in levels:
        noise = NoiseConfig(depolarizing_prob=0.0, shots=shots, readout_flip_prob=0.2, seed=0)
        vals = [noisy_evaluate(layout, params, np.zeros(0), noise, salt=s)[0] for s in range(100)]
        stds.append(np.std(vals))
    slope = np.polyfit(np.log(levels), np.log(stds), 1)[0]
    assert abs(slope - (-0.5)) < 0.1


# ============================================================
# depolarizing channel
# ============================================================


def test_gate_noise_contracts_expectations():
    """Random Pauli insertion after each gate pulls |<Z>| toward zero."""
    layout = build_layout(2, 0, 3, "chain", (("z", 0),))
    params = init_params(layout, 0, InitSpec(angle_range=0.0))
    noise = NoiseConfig(depolarizing_prob=0.3, shots=100_000, readout_flip_prob=0.0, seed=3)
    est = noisy_evaluate(layout, params, np.zeros(0), noise)
    assert abs(est[0]) < 0.9  # strictly contracted from the exact +1
    # weak noise stays near the ideal value; one corrupted trajectory out
    # of TRAJECTORY_CAP moves the mean by 2/32, so the bound is coarse
    mild = NoiseConfig(depolarizing_prob=0.001, shots=100_000, readout_flip_prob=0.0, seed=3)
    est2 = noisy_evaluate(layout, params, np.zeros(0), mild)
    assert est2[0] > 0.9


def test_trajectory_count_is_capped():
    """Gate noise averages at most TRAJECTORY_CAP trajectories."""
    assert TRAJECTORY_CAP == 32
    layout, params = identity_layout()
    # shots < cap still works and remains deterministic
    noise = NoiseConfig(depolarizing_prob=0.2, shots=8, readout_flip_prob=0.0, seed=4)
    a = noisy_evaluate(layout, params, np.zeros(0), noise)
    b = noisy_evaluate(layout, params, np.zeros(0), noise)
    np.testing.assert_array_equal(a, b)


# ============================================================
# determinism
# ============================================================


def test_seed_and_salt_determinism():
    layout = build_layout(2, 2, 2, "ring", (("z", 0), ("x", 1)))
    params = init_params(layout, 11)
    x = np.array([0.2, 0.9])
    noise = NoiseConfig(seed=42)
    a = noisy_evaluate(layout, params, x, noise, salt=(3, 1))
    b = noisy_evaluate(layout, params, x, noise, salt=(3, 1))
    np.testing.assert_array_equal(a, b)
    c = noisy_evaluate(layout, params, x, noise, salt=(3, 2))
    assert not np.array_equal(a, c)
    d = noisy_evaluate(layout, params, x, NoiseConfig(seed=43), salt=(3, 1))
    assert not np.array_equal(a, d)


def test_batch_rows_draw_independent_streams():
    """Identical inputs in different batch rows get decorrelated shot draws,
    and the whole batch is reproducible bit for bit."""
    layout = build_layout(2, 2, 1, "chain", (("z", 0), ("z", 1)))
    params = init_params(layout, 13)
    X = np.tile(np.array([0.1, 0.2]), (3, 1))
    noise = NoiseConfig(depolarizing_prob=0.0, shots=512, readout_flip_prob=0.2, seed=7)
    batch = noisy_evaluate(layout, params, X, noise, salt=2)
    assert not np.array_equal(batch[0], batch[1])
    assert not np.array_equal(batch[1], batch[2])
    again = noisy_evaluate(layout, params, X, noise, salt=2)
    np.testing.assert_array_equal(batch, again)
