"""Release gates: every shipped guarantee as one pass/fail line.

Each test here pins one end-to-end property at its stated tolerance.
This is the slow suite: the training-campaign fixtures run full
200-episode trainings on the default five-generator case (about an
hour in total on one core), so run this file explicitly when
validating a build. Comparisons that are qualitative rather than
contractual (ablation margins, sweep trends) are written to
acceptance_report.txt and printed instead of asserted.
"""

import math
import os
import time
from dataclasses import dataclass

import numpy as np
import pytest

from qdrl.agent import ExplorationSpec, exploration_noise
from qdrl.ansatz import CircuitLayout, InitSpec, init_params
from qdrl.cli import EXIT_CONFIG, EXIT_OK, SWEEP_COLUMNS, main
from qdrl.config import resolve
from qdrl.gradients import grad_adjoint, grad_finite_difference, grad_parameter_shift
from qdrl.lfc import (
    GridParams,
    LfcEnv,
    Scenario,
    compute_ace,
    default_case,
    dispatch_command,
    pi_agc_command,
    ring_coupling,
    run_pi_baseline,
)
from qdrl.qsim import apply_gate_array, cnot, ry, rz, zero_batch
from qdrl.trainer import TrainerConfig, evaluate_policy, train

# pinned once for the qualitative-reproduction gates: the campaign
# trains these five seeds with the stock configuration and at least
# MIN_PASSING of them must clear both training gates
CAMPAIGN_SEEDS = (0, 1, 2, 3, 4)
MIN_PASSING = 3
TERMINAL_BAND_HZ = 0.1
CAMPAIGN_BUDGET_S = 2700.0
SINGLE_RUN_BUDGET_S = 1800.0

REPORT_PATH = os.path.join(os.path.dirname(__file__), os.pardir, "acceptance_report.txt")
_report_started = False


def _report(line: str) -> None:
    """Print a qualitative result and append it to the report file."""
    global _report_started
    print(line)
    mode = "a" if _report_started else "w"
    with open(REPORT_PATH, mode) as handle:
        handle.write(line + "\n")
    _report_started = True


# ============================================================
# shared CLI plumbing
# ============================================================

TWO_GEN = [
    "grid.inertia=[5.0, 4.0]",
    "grid.damping=[1.5, 1.5]",
    "grid.droop=[0.05, 0.05]",
    "grid.governor_tc=[0.2, 0.2]",
    "grid.turbine_tc=[0.5, 0.5]",
    "grid.participation=[0.5, 0.5]",
    "grid.area_a=[0]",
    "grid.area_b=[1]",
    "scenario.load_step=0.08",
    "scenario.load_bus=0",
    "scenario.onset_s=0.5",
    "scenario.length_s=3.0",
]

FAST_TRAIN = TWO_GEN + [
    "trainer.n_episodes=6",
    "trainer.warmup_episodes=0",
    "trainer.warmup_steps=0",
    "trainer.batch_size=4",
    "circuit.layers=1",
]


def run_cli(command, out_dir, sets, *extra, seed=7):
    """Invoke the CLI in-process and return its exit code."""
    argv = [command, "--out", str(out_dir), "--seed", str(seed)]
    for assignment in sets:
        argv += ["--set", assignment]
    argv += list(extra)
    return main(argv)


def read_lines(path):
    with open(path) as handle:
        return [line.rstrip("\n") for line in handle]


def drop_wall_column(lines):
    header = lines[0].split(",")
    keep = [i for i, name in enumerate(header) if name != "wall_ms"]
    return [",".join(np.array(line.split(","))[keep]) for line in lines]


# ============================================================
# training campaigns (module-scoped: these dominate the runtime)
# ============================================================


@dataclass
class CampaignRun:
    status: str
    wall_s: float
    returns: np.ndarray
    final_freq_hz: float
    nadir_hz: float

    @property
    def improved(self) -> bool:
        return float(self.returns[-20:].mean()) > float(self.returns[20:40].mean())

    @property
    def terminal_ok(self) -> bool:
        return abs(self.final_freq_hz - 60.0) < TERMINAL_BAND_HZ


def _run_campaign(explore: bool) -> dict[int, CampaignRun]:
    params, scenario = default_case()
    runs = {}
    for seed in CAMPAIGN_SEEDS:
        env = LfcEnv(params, scenario)
        started = time.perf_counter()
        result = train(env, TrainerConfig(seed=seed, explore=explore))
        wall = time.perf_counter() - started
        ev = evaluate_policy(params, scenario, result.actor)
        runs[seed] = CampaignRun(
            status=result.status,
            wall_s=wall,
            returns=result.log.returns(),
            final_freq_hz=ev.final_freq_hz,
            nadir_hz=ev.nadir_hz,
        )
    return runs


@pytest.fixture(scope="module")
def campaign():
    """Five full default-config trainings, one per pinned seed."""
    return _run_campaign(explore=True)


@pytest.fixture(scope="module")
def ablation_campaign():
    """The same five trainings with exploration noise disabled."""
    return _run_campaign(explore=False)


# ============================================================
# dense-matrix oracle for the statevector checks
# ============================================================

I2 = np.eye(2, dtype=complex)
P0 = np.array([[1, 0], [0, 0]], dtype=complex)
P1 = np.array([[0, 0], [0, 1]], dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)


def mat_ry(theta):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def mat_rz(theta):
    return np.array([[np.exp(-1j * theta / 2), 0], [0, np.exp(1j * theta / 2)]], dtype=complex)


def lift(op, qubit, n):
    """Embed a 1-qubit operator with qubit 0 as least-significant bit."""
    full = np.eye(1, dtype=complex)
    for k in range(n):
        full = np.kron(op if k == qubit else I2, full)
    return full


def mat_cnot(control, target, n):
    return lift(P0, control, n) @ np.eye(1 << n) + lift(P1, control, n) @ lift(PAULI_X, target, n)


def random_gate(rng, n):
    kind = rng.choice(["ry", "rz", "cnot"] if n >= 2 else ["ry", "rz"])
    if kind == "cnot":
        control, target = rng.choice(n, size=2, replace=False)
        return cnot(int(control), int(target)), mat_cnot(int(control), int(target), n)
    theta = float(rng.uniform(-2 * np.pi, 2 * np.pi))
    target = int(rng.integers(n))
    if kind == "ry":
        return ry(target, theta), lift(mat_ry(theta), target, n)
    return rz(target, theta), lift(mat_rz(theta), target, n)


# ============================================================
# random circuit population for the gradient cross-checks
# ============================================================


def random_layout_and_params(rng):
    n = int(rng.integers(1, 7))
    layers = int(rng.integers(1, 5))
    n_inputs = int(rng.integers(0, n + 1))
    entangle = str(rng.choice(["chain", "ring"]))
    observables = []
    for qubit in range(n):
        if rng.random() < 0.5:
            observables.append((str(rng.choice(["z", "x"])), qubit))
    if not observables:
        observables.append(("z", int(rng.integers(n))))
    layout = CircuitLayout(
        n_qubits=n,
        n_inputs=n_inputs,
        n_layers=layers,
        entangle=entangle,
        observables=tuple(observables),
    )
    spec = InitSpec(
        scale_value=float(rng.uniform(0.5, 1.5)),
        angle_range=float(rng.uniform(0.1, math.pi / 2)),
        final_y_center=float(rng.uniform(-math.pi / 2, math.pi / 2)),
    )
    params = init_params(layout, int(rng.integers(2**31)), spec)
    if rng.random() < 0.3:
        x = rng.uniform(-0.95, 0.95, size=(2, n_inputs))  # a batch of rows
    else:
        x = rng.uniform(-0.95, 0.95, size=n_inputs)
    return layout, params, x


# ============================================================
# gates 1-4: numerics against independent oracles
# ============================================================


def test_01_gradient_methods_agree_across_random_circuits():
    """Shift rule, adjoint pass, and finite differences coincide on 100 random circuits."""
    rng = np.random.default_rng(20260819)
    started = time.perf_counter()
    worst_fd = 0.0
    worst_adjoint = 0.0
    for _ in range(100):
        layout, params, x = random_layout_and_params(rng)
        g_shift = grad_parameter_shift(layout, params, x)
        g_adjoint = grad_adjoint(layout, params, x)
        g_fd = grad_finite_difference(layout, params, x, eps=1e-5)
        worst_fd = max(worst_fd, float(np.abs(g_shift - g_fd).max()))
        worst_adjoint = max(worst_adjoint, float(np.abs(g_shift - g_adjoint).max()))
    wall = time.perf_counter() - started
    assert worst_fd < 1e-6, f"shift vs finite-difference max |diff| {worst_fd:.3e}"
    assert worst_adjoint < 1e-10, f"shift vs adjoint max |diff| {worst_adjoint:.3e}"
    assert wall < 60.0, f"gradient cross-check took {wall:.1f}s"


def test_02_statevector_kernels_match_dense_matrix_oracle():
    """Gate kernels reproduce explicit Kronecker products and preserve norm."""
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(30):
        n = int(rng.integers(1, 4))
        amps = zero_batch(1, n)
        reference = np.zeros(1 << n, dtype=complex)
        reference[0] = 1.0
        for _ in range(40):
            gate, matrix = random_gate(rng, n)
            apply_gate_array(amps, n, gate)
            reference = matrix @ reference
            worst = max(worst, float(np.abs(amps[0] - reference).max()))
    assert worst < 1e-12, f"kernel vs dense-matrix max |diff| {worst:.3e}"

    worst_drift = 0.0
    for _ in range(3):
        n = 6
        amps = zero_batch(1, n)
        for _ in range(200):
            gate, _ = random_gate(rng, n)
            apply_gate_array(amps, n, gate)
        worst_drift = max(worst_drift, abs(float(np.linalg.norm(amps[0])) - 1.0))
    assert worst_drift < 1e-12, f"norm drift {worst_drift:.3e} over 200 gates"


def test_03_agc_formulas_match_hand_evaluation():
    """Area control error, PI command, and dispatch match hand-worked values."""
    # dyadic literals keep the hand evaluation exact in binary floats
    assert abs(compute_ace(0.125, 0.25, -0.5) - 1.375) < 1e-12
    assert abs(compute_ace(-0.25, 0.5, 0.25) - (-1.5)) < 1e-12
    assert abs(compute_ace(0.0, 0.0, 0.75) - 0.0) < 1e-12
    assert abs(pi_agc_command(0.75, 0.0625, kp=0.5, ki=8.0) - (-0.875)) < 1e-12
    assert abs(pi_agc_command(-0.5, 0.25, kp=2.0, ki=4.0) - 0.0) < 1e-12
    np.testing.assert_allclose(
        dispatch_command(1.5, np.array([0.5, 0.25, 0.25])),
        [0.75, 0.375, 0.375],
        atol=1e-12,
    )
    np.testing.assert_allclose(
        dispatch_command(-0.5, np.array([1.0])), [-0.5], atol=1e-12
    )
    # the participation vector must be a distribution over generators
    with pytest.raises(ValueError, match="participation"):
        GridParams(
            inertia=np.array([5.0, 4.0]),
            damping=np.array([1.5, 1.5]),
            droop=np.array([0.05, 0.05]),
            governor_tc=np.array([0.2, 0.2]),
            turbine_tc=np.array([0.5, 0.5]),
            coupling=ring_coupling(2, 1.5),
            participation=np.array([0.5, 0.4]),
        )
    with pytest.raises(ValueError, match="participation"):
        GridParams(
            inertia=np.array([5.0, 4.0]),
            damping=np.array([1.5, 1.5]),
            droop=np.array([0.05, 0.05]),
            governor_tc=np.array([0.2, 0.2]),
            turbine_tc=np.array([0.5, 0.5]),
            coupling=ring_coupling(2, 1.5),
            participation=np.array([1.5, -0.5]),
        )


def test_04_grid_physics_match_closed_forms():
    """Droop settle point, integrator order, and PI recovery hit their marks."""
    started = time.perf_counter()
    params, scenario = default_case()

    # droop only: all machines settle on the closed-form common speed
    # (the inter-machine swing decays at about 0.1/s, so give it 60 s)
    settled = Scenario(
        load_step=scenario.load_step,
        load_bus=scenario.load_bus,
        onset_s=scenario.onset_s,
        length_s=60.0,
    )
    droop_only = run_pi_baseline(params, settled, kp=0.0, ki=0.0)
    expected = -scenario.load_step / (np.sum(1.0 / params.droop) + np.sum(params.damping))
    final_speed = droop_only.final_state.speed
    assert np.abs(final_speed - expected).max() < 1e-4, (
        f"droop settle {final_speed} vs closed form {expected:.6e}"
    )

    # halving dt cuts the endpoint error by about 2^4
    def endpoint(dt_val):
        p = GridParams(
            inertia=params.inertia,
            damping=params.damping,
            droop=params.droop,
            governor_tc=params.governor_tc,
            turbine_tc=params.turbine_tc,
            coupling=params.coupling,
            participation=params.participation,
            dt=dt_val,
            control_interval_s=dt_val,
        )
        from qdrl.lfc import GridState, load_vector, rk4_step

        s = GridState.zeros(5)
        sc = Scenario(onset_s=-1.0, length_s=0.5)
        ref = np.full(5, 0.02)
        for _ in range(int(round(0.5 / dt_val))):
            s = rk4_step(p, s, load_vector(sc, p, s.time), ref)
        return s.pack()

    reference = endpoint(1e-4)
    e_coarse = np.abs(endpoint(0.02) - reference).max()
    e_fine = np.abs(endpoint(0.01) - reference).max()
    order = float(np.log2(e_coarse / e_fine))
    assert 3.5 < order < 4.5, f"measured integrator order {order:.2f}"

    # the PI loop pulls the terminal frequency back near nominal
    pi_run = run_pi_baseline(params, scenario)
    terminal = float(pi_run.freq_hz[-1].mean())
    assert abs(terminal - 60.0) < 0.06, f"PI terminal {terminal:.4f} Hz"

    wall = time.perf_counter() - started
    assert wall < 10.0, f"physics gate took {wall:.1f}s"


# ============================================================
# gates 5-7: training behavior
# ============================================================


def test_05_gradient_method_equivalence_and_noise_contract(tmp_path, capsys, campaign):
    """Noiseless shift and adjoint runs log identically; noisy adjoint is refused."""
    dir_shift = tmp_path / "shift"
    dir_adjoint = tmp_path / "adjoint"
    assert run_cli("train", dir_shift, FAST_TRAIN, "--grad", "parameter-shift") == EXIT_OK
    assert run_cli("train", dir_adjoint, FAST_TRAIN, "--grad", "adjoint") == EXIT_OK
    log_shift = drop_wall_column(read_lines(dir_shift / "training_log.csv"))
    log_adjoint = drop_wall_column(read_lines(dir_adjoint / "training_log.csv"))
    assert log_shift == log_adjoint
    assert read_lines(dir_shift / "trajectory-final.csv") == read_lines(
        dir_adjoint / "trajectory-final.csv"
    )

    # under the stock noise model the shift rule trains, adjoint refuses
    noisy_sets = TWO_GEN + [
        "trainer.n_episodes=2",
        "trainer.warmup_episodes=0",
        "trainer.warmup_steps=0",
        "trainer.batch_size=4",
        "circuit.layers=1",
    ]
    assert (
        run_cli("train", tmp_path / "noisy-shift", noisy_sets, "--grad", "parameter-shift",
                "--noise", "nisq")
        == EXIT_OK
    )
    code = run_cli("train", tmp_path / "noisy-adjoint", noisy_sets, "--grad", "adjoint",
                   "--noise", "nisq")
    err = capsys.readouterr().err
    assert code == EXIT_CONFIG
    assert "adjoint differentiation needs exact statevector" in err

    # a full-length default run fits the wall-clock budget
    assert campaign[0].wall_s < SINGLE_RUN_BUDGET_S, (
        f"200-episode run took {campaign[0].wall_s:.0f}s"
    )


def test_06_training_improves_and_restores_frequency(campaign):
    """Most pinned seeds improve returns and settle within the terminal band."""
    passing = 0
    total_wall = 0.0
    for seed in CAMPAIGN_SEEDS:
        run = campaign[seed]
        total_wall += run.wall_s
        ok = run.status == "completed" and run.improved and run.terminal_ok
        passing += ok
        _report(
            f"seed {seed}: ep21-40 mean {run.returns[20:40].mean():+.4f}, "
            f"last-20 mean {run.returns[-20:].mean():+.4f}, "
            f"greedy terminal {run.final_freq_hz:.4f} Hz, nadir {run.nadir_hz:.4f} Hz "
            f"-> {'pass' if ok else 'fail'} ({run.wall_s:.0f}s)"
        )
    _report(f"campaign: {passing}/{len(CAMPAIGN_SEEDS)} seeds pass, {total_wall:.0f}s total")
    assert passing >= MIN_PASSING, f"only {passing} of {len(CAMPAIGN_SEEDS)} seeds pass"
    assert total_wall <= CAMPAIGN_BUDGET_S, f"campaign took {total_wall:.0f}s"


def test_07_exploration_ablation_zero_noise_and_lower_returns(campaign, ablation_campaign):
    """Disabling exploration zeroes every noise draw; return margins are reported."""
    spec = ExplorationSpec(enabled=False)
    for episode in (0, 3, 150):
        assert spec.sigma(episode) == 0.0
        for step in (0, 7, 39):
            assert np.array_equal(exploration_noise(spec, episode, step, 5), np.zeros(5))
    decayed_out = ExplorationSpec(sigma0=0.0)
    assert np.array_equal(exploration_noise(decayed_out, 0, 0, 3), np.zeros(3))

    lower = 0
    for seed in CAMPAIGN_SEEDS:
        base = float(campaign[seed].returns[-20:].mean())
        ablated = float(ablation_campaign[seed].returns[-20:].mean())
        lower += ablated < base
        _report(
            f"seed {seed}: last-20 mean with exploration {base:+.4f}, "
            f"without {ablated:+.4f} ({'lower' if ablated < base else 'NOT lower'})"
        )
    _report(f"ablation: {lower}/{len(CAMPAIGN_SEEDS)} seeds end lower without exploration")


# ============================================================
# gates 8-10: schedule exactness, determinism, sweep harness
# ============================================================


def test_08_warmup_freezes_parameters_until_both_thresholds():
    """No parameter moves until the episode and step thresholds are both crossed."""
    cfg = resolve(overrides=TWO_GEN)
    # 6 control steps per episode: the stock thresholds (20 episodes,
    # 400 steps) are both crossed during episode 66
    def run(n_episodes, **kwargs):
        env = LfcEnv(cfg.grid, cfg.scenario)
        return train(env, TrainerConfig(seed=11, n_episodes=n_episodes, batch_size=4, **kwargs))

    def params_of(result):
        return (
            result.actor.params.to_vector(),
            result.critic.params.to_vector(),
            np.asarray(result.critic.w_out),
        )

    reference = params_of(run(1))

    frozen = run(66)
    for got, want in zip(params_of(frozen), reference):
        assert np.array_equal(got, want)

    thawed = run(67)
    assert any(
        not np.array_equal(got, want) for got, want in zip(params_of(thawed), reference)
    )
    # the first update lands exactly on the episode that crosses step 400
    assert all(math.isnan(r.critic_loss_mean) for r in thawed.log.rows[:66])
    assert not math.isnan(thawed.log.rows[66].critic_loss_mean)

    # when the step threshold is crossed early the episode gate binds
    frozen_by_episodes = run(20, warmup_steps=6)
    for got, want in zip(params_of(frozen_by_episodes), reference):
        assert np.array_equal(got, want)
    thawed_by_episodes = run(21, warmup_steps=6)
    assert any(
        not np.array_equal(got, want)
        for got, want in zip(params_of(thawed_by_episodes), reference)
    )


def test_09_bitwise_determinism_and_checkpoint_resume(tmp_path):
    """Same-seed runs match byte for byte and a resumed run matches an unbroken one."""
    dir_a = tmp_path / "a"
    dir_b = tmp_path / "b"
    assert run_cli("train", dir_a, FAST_TRAIN) == EXIT_OK
    assert run_cli("train", dir_b, FAST_TRAIN) == EXIT_OK
    assert drop_wall_column(read_lines(dir_a / "training_log.csv")) == drop_wall_column(
        read_lines(dir_b / "training_log.csv")
    )
    assert (dir_a / "checkpoint.json").read_bytes() == (dir_b / "checkpoint.json").read_bytes()
    assert (dir_a / "trajectory-final.csv").read_bytes() == (
        dir_b / "trajectory-final.csv"
    ).read_bytes()

    # break the same run after 3 episodes, resume to 6, compare to unbroken
    dir_short = tmp_path / "short"
    dir_resumed = tmp_path / "resumed"
    short_sets = [s for s in FAST_TRAIN if not s.startswith("trainer.n_episodes")]
    assert run_cli("train", dir_short, short_sets + ["trainer.n_episodes=3"]) == EXIT_OK
    assert (
        run_cli(
            "train",
            dir_resumed,
            FAST_TRAIN,
            "--resume",
            str(dir_short / "checkpoint.json"),
        )
        == EXIT_OK
    )
    assert (dir_resumed / "checkpoint.json").read_bytes() == (
        dir_a / "checkpoint.json"
    ).read_bytes()
    unbroken_tail = drop_wall_column(read_lines(dir_a / "training_log.csv"))[4:]
    resumed_rows = drop_wall_column(read_lines(dir_resumed / "training_log.csv"))[1:]
    assert resumed_rows == unbroken_tail
    assert (dir_resumed / "trajectory-final.csv").read_bytes() == (
        dir_a / "trajectory-final.csv"
    ).read_bytes()


def test_10_sweep_emits_schema_correct_results(tmp_path):
    """Both sweep axes complete and their summary rows carry the full schema."""
    budget = ["trainer.n_episodes=30"]
    for param, values in (("layers", ("1", "2", "3")), ("policy_update_interval", ("1", "2", "4"))):
        out = tmp_path / param
        assert run_cli("sweep", out, budget, param, *values, seed=0) == EXIT_OK
        lines = read_lines(out / "sweep.csv")
        assert lines[0] == ",".join(SWEEP_COLUMNS)
        assert len(lines) == 1 + len(values)
        for line, value in zip(lines[1:], values):
            fields = line.split(",")
            assert fields[0] == param
            assert fields[1] == value
            assert fields[5] == "30"
            assert fields[6] == "completed"
            assert math.isfinite(float(fields[2])) and math.isfinite(float(fields[4]))
        trend = ", ".join(
            f"{param}={line.split(',')[1]}: return {float(line.split(',')[4]):+.4f}, "
            f"terminal {float(line.split(',')[2]):.4f} Hz"
            for line in lines[1:]
        )
        _report(f"sweep {param}: {trend}")
