import numpy as np
import pytest

import gibbsim as gs
from gibbsim.errors import StepUnderflow

from conftest import BETA, gap_setup, lindblad_setup, point_setup

F = gs.FilterSpec(BETA)


# ------------------------------------------------------------------ rk4 core
def test_rk4_zero_generator_is_identity(rng):
    rho = np.eye(4) / 4
    out = gs.rk4_step(rho, lambda r: np.zeros_like(r), 0.1)
    assert np.array_equal(out, rho)


def test_rk4_fourth_order_on_coherent_evolution(rng):
    setup = point_setup("CH", 3)
    ham, spec = setup["ham"], setup["spec"]
    v = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    v /= np.linalg.norm(v)
    rho0 = np.outer(v, v.conj())

    def propagate(dt, t_final=1.0):
        rho = rho0.copy()
        gen = lambda r: -1j * (ham @ r - r @ ham)
        for _ in range(int(round(t_final / dt))):
            rho = gs.rk4_step(rho, gen, dt)
        return rho

    u = gs.expm_phase(spec, 1.0)
    exact = u @ rho0 @ u.conj().T
    coarse = np.max(np.abs(propagate(0.02) - exact))
    fine = np.max(np.abs(propagate(0.01) - exact))
    assert 16 * 0.7 <= coarse / fine <= 16 * 1.3


def test_rk4_amplitude_damping_closed_form():
    gamma = 1.3
    lower = np.sqrt(gamma) * np.array([[0, 1], [0, 0]], dtype=complex)

    def gen(r):
        ldl = lower.conj().T @ lower
        return lower @ r @ lower.conj().T - 0.5 * (ldl @ r + r @ ldl)

    rho = np.diag([0.0, 1.0]).astype(complex)
    dt = 1e-3 / gamma
    steps = 2000
    for _ in range(steps):
        rho = gs.rk4_step(rho, gen, dt)
    assert abs(rho[1, 1].real - np.exp(-gamma * dt * steps)) < 1e-6


def test_rk4_trace_preserved_per_step(rng):
    setup = lindblad_setup("CH", 3, 5)
    L = setup["lindblads"][0].matrix
    ldl = L.conj().T @ L
    ham = setup["ham"]

    def gen(r):
        out = -1j * (ham @ r - r @ ham)
        return out + L @ r @ L.conj().T - 0.5 * (ldl @ r + r @ ldl)

    rho = gs.maximally_mixed(3)
    out = gs.rk4_step(rho, gen, 0.05)
    assert abs(np.trace(out).real - 1.0) < 1e-8


# -------------------------------------------------------------- randomized
def test_identity_jump_set_keeps_state_constant():
    setup = point_setup("CH", 3)
    sigma = setup["sigma"]
    cfg = gs.SolverConfig(dt_rk0=0.1, n_traj=3, t_max=5.0, seed=0, grid_points=10)
    eta0 = float(gs.filter_freq(F, 0.0))
    ident = [gs.LindbladOperator(matrix=eta0 * np.eye(8), source=0)]
    rec = gs.evolve_randomized(
        setup["ham"], [np.eye(8)], F, sigma, cfg, sigma,
        lindblads=ident, include_coherent=False,
    )
    assert rec.halvings == 0
    assert np.max(rec.avg_distance) < 1e-10


def test_determinism_bit_identical():
    setup = lindblad_setup("CH", 3, 10)
    cfg = gs.SolverConfig(dt_rk0=0.25, n_traj=4, t_max=10.0, seed=42, grid_points=20)
    args = (setup["ham"], list(setup["jump_set"]), F, gs.maximally_mixed(3), cfg, setup["sigma"])
    rec1 = gs.evolve_randomized(*args, lindblads=list(setup["lindblads"]))
    rec2 = gs.evolve_randomized(*args, lindblads=list(setup["lindblads"]))
    assert np.array_equal(rec1.avg_distance, rec2.avg_distance)
    assert np.array_equal(rec1.per_traj_distance, rec2.per_traj_distance)


def test_trajectory_count_extension_preserves_streams():
    setup = lindblad_setup("CH", 3, 10)
    base = dict(dt_rk0=0.25, t_max=10.0, seed=42, grid_points=20)
    rec4 = gs.evolve_randomized(
        setup["ham"], list(setup["jump_set"]), F, gs.maximally_mixed(3),
        gs.SolverConfig(n_traj=4, **base), setup["sigma"], lindblads=list(setup["lindblads"]),
    )
    rec6 = gs.evolve_randomized(
        setup["ham"], list(setup["jump_set"]), F, gs.maximally_mixed(3),
        gs.SolverConfig(n_traj=6, **base), setup["sigma"], lindblads=list(setup["lindblads"]),
    )
    assert np.array_equal(rec6.per_traj_distance[:4], rec4.per_traj_distance)


def test_convexity_of_averaged_distance():
    setup = lindblad_setup("CH", 3, 10)
    cfg = gs.SolverConfig(dt_rk0=0.25, n_traj=6, t_max=20.0, seed=7, grid_points=40)
    rec = gs.evolve_randomized(
        setup["ham"], list(setup["jump_set"]), F, gs.maximally_mixed(3), cfg,
        setup["sigma"], lindblads=list(setup["lindblads"]),
    )
    worst = np.max(rec.per_traj_distance, axis=0)
    assert np.all(rec.avg_distance <= worst + 1e-12)


def test_step_underflow_raised():
    setup = lindblad_setup("CH", 3, 5)
    cfg = gs.SolverConfig(
        dt_rk0=0.4, n_traj=2, t_max=5.0, seed=0, herm_tol=1e-300, grid_points=5
    )
    with pytest.raises(StepUnderflow):
        gs.evolve_randomized(
            setup["ham"], list(setup["jump_set"]), F, gs.maximally_mixed(3), cfg,
            setup["sigma"], lindblads=list(setup["lindblads"]),
        )


# -------------------------------------------------------------------- exact
def test_exact_converges_to_superop_steady_state():
    setup = gap_setup("CH", 3, 20)
    cfg = gs.SolverConfig(dt_rk0=0.25, n_traj=1, t_max=2000.0, seed=0, grid_points=100)
    rec = gs.evolve_exact(
        setup["ham"], list(setup["lindblads"]), setup["gammas"],
        gs.maximally_mixed(3), cfg, setup["sigma"],
    )
    assert gs.trace_distance(rec.final_avg_state, setup["gap_result"].steady_state) < 1e-8


def test_exact_plateau_matches_steady_to_gibbs_distance():
    setup = gap_setup("CH", 3, 20)
    cfg = gs.SolverConfig(dt_rk0=0.25, n_traj=1, t_max=2000.0, seed=0, grid_points=100)
    rec = gs.evolve_exact(
        setup["ham"], list(setup["lindblads"]), setup["gammas"],
        gs.maximally_mixed(3), cfg, setup["sigma"],
    )
    plateau = float(np.mean(rec.avg_distance[-10:]))
    reference = gs.trace_distance(setup["gap_result"].steady_state, setup["sigma"])
    assert plateau == pytest.approx(reference, rel=0.05)


def test_infinite_temperature_state_stationary_for_beta_zero_filter():
    setup = point_setup("CH", 3)
    f0 = gs.FilterSpec(1e-9)  # beta -> 0 filter
    jumps = gs.sample_jump_set(3, 2, 10, seed=0)
    bohr = setup["bohr"]
    eta0 = float(gs.filter_freq(f0, 0.0))
    # rescale to O(1) rates so the residual comparison is meaningful
    ls = [
        gs.lindblad_op_exact(a, setup["spec"], f0, bohr).matrix / eta0 for a in jumps
    ]
    from gibbsim.liouville import apply_lindbladian

    gammas = np.full(10, 0.1)
    resid = gs.trace_norm(
        apply_lindbladian(gs.maximally_mixed(3), setup["ham"], ls, gammas)
    )
    moving = gs.trace_norm(
        apply_lindbladian(setup["sigma"], setup["ham"], ls, gammas)
    )
    assert resid < 1e-6
    assert moving > 1e-3  # the generator is not trivially small


# --------------------------------------------------------------------- mcwf
def test_mcwf_pure_unitary_norm_conserved():
    setup = point_setup("CH", 2)
    psi = np.eye(4, dtype=complex)[0]
    cfg = gs.SolverConfig(dt_rk0=0.02, n_traj=1, t_max=5.0, seed=1, grid_points=25)
    rec = gs.mcwf_evolve(setup["ham"], [np.zeros((4, 4))], [0.0], psi, cfg, gs.maximally_mixed(2))
    u = gs.expm_phase(setup["spec"], 5.0)
    exact = np.outer(u @ psi, (u @ psi).conj())
    assert abs(np.trace(rec.final_avg_state).real - 1.0) < 1e-8
    assert np.max(np.abs(rec.final_avg_state - exact)) < 1e-8


def test_mcwf_single_decay_channel_within_3_sigma():
    gamma = 0.8
    lower = np.array([[0, 1], [0, 0]], dtype=complex)
    ground = np.diag([1.0, 0.0]).astype(complex)
    psi0 = np.array([0, 1], dtype=complex)
    cfg = gs.SolverConfig(dt_rk0=0.05, n_traj=500, t_max=2.0, seed=11, grid_points=40)
    rec = gs.mcwf_evolve(np.zeros((2, 2)), [lower], [gamma], psi0, cfg, ground)
    # distance to the ground state equals the excited population here
    expected = np.exp(-gamma * rec.times)
    sem = np.sqrt(np.maximum(expected * (1 - expected), 1e-12) / cfg.n_traj)
    assert np.all(np.abs(rec.avg_distance - expected) <= 3 * sem + 5e-3)


def test_mcwf_jump_probability_control():
    # strong dissipation forces substeps; the run must stay accurate
    gamma = 30.0
    lower = np.array([[0, 1], [0, 0]], dtype=complex)
    ground = np.diag([1.0, 0.0]).astype(complex)
    psi0 = np.array([0, 1], dtype=complex)
    cfg = gs.SolverConfig(dt_rk0=0.1, n_traj=300, t_max=0.3, seed=2, grid_points=3)
    rec = gs.mcwf_evolve(np.zeros((2, 2)), [lower], [gamma], psi0, cfg, ground)
    expected = np.exp(-gamma * rec.times)
    assert np.max(np.abs(rec.avg_distance - expected)) < 0.05


# ------------------------------------------------------------- mixing time
def test_mixing_time_zero_when_starting_at_target():
    setup = lindblad_setup("CH", 3, 10)
    cfg = gs.SolverConfig(dt_rk0=0.25, n_traj=2, t_max=5.0, seed=0, grid_points=10)
    rec = gs.evolve_randomized(
        setup["ham"], list(setup["jump_set"]), F, setup["sigma"], cfg,
        setup["sigma"], lindblads=list(setup["lindblads"]),
    )
    assert gs.mixing_time_estimate(rec) == 0.0


def test_mixing_time_not_converged_sentinel():
    rec = gs.EvolutionRecord(
        times=np.linspace(0, 10, 11),
        per_traj_distance=np.full((1, 11), 0.5),
        avg_distance=np.full(11, 0.5),
        final_dt_rk=0.1,
        halvings=0,
        final_avg_state=np.eye(2) / 2,
    )
    assert gs.mixing_time_estimate(rec) is gs.NOT_CONVERGED
    assert not gs.NOT_CONVERGED


def test_record_csv_roundtrip(tmp_path):
    setup = lindblad_setup("CH", 3, 5)
    cfg = gs.SolverConfig(dt_rk0=0.25, n_traj=2, t_max=5.0, seed=0, grid_points=10)
    rec = gs.evolve_randomized(
        setup["ham"], list(setup["jump_set"]), F, gs.maximally_mixed(3), cfg,
        setup["sigma"], lindblads=list(setup["lindblads"]),
    )
    path = tmp_path / "distances.csv"
    rec.to_csv(path)
    body = path.read_text().splitlines()
    assert body[0].startswith("#")
    assert body[1].split(",") == ["t", "traj0", "traj1", "avg"]
    data = np.array([[float(x) for x in row.split(",")] for row in body[2:]])
    assert np.array_equal(data[:, 0], rec.times)
    assert np.allclose(data[:, -1], rec.avg_distance)


def test_randomized_vs_exact_plateau_consistency():
    # the trajectory-averaged plateau state approaches the exact solver's
    # plateau state, and the gap shrinks with the trajectory count
    setup = lindblad_setup("CH", 3, 20)
    ls, gm = list(setup["lindblads"]), setup["gammas"]
    cfg_e = gs.SolverConfig(dt_rk0=0.25, n_traj=1, t_max=800.0, seed=0, grid_points=100)
    rec_e = gs.evolve_exact(setup["ham"], ls, gm, gs.maximally_mixed(3), cfg_e, setup["sigma"])
    dists = {}
    for n_traj in (3, 10, 20):
        cfg_r = gs.SolverConfig(dt_rk0=0.25, n_traj=n_traj, t_max=800.0, seed=5, grid_points=100)
        rec_r = gs.evolve_randomized(
            setup["ham"], list(setup["jump_set"]), F, gs.maximally_mixed(3), cfg_r,
            setup["sigma"], lindblads=ls,
        )
        dists[n_traj] = gs.trace_distance(rec_r.final_avg_state, rec_e.final_avg_state)
    assert dists[10] < 5e-2
    assert dists[20] < dists[3]


def test_double_halving_from_coarse_start():
    # starting at twice the Table step triggers two halvings down to 0.125
    setup = lindblad_setup("CH", 5, 20)
    cfg = gs.SolverConfig(dt_rk0=0.5, n_traj=4, t_max=20.0, seed=3)
    rec = gs.evolve_randomized(
        setup["ham"], list(setup["jump_set"]), F, gs.maximally_mixed(5), cfg,
        setup["sigma"], lindblads=list(setup["lindblads"]),
    )
    assert rec.final_dt_rk == pytest.approx(0.125)
    assert rec.halvings == 2


def test_state_snapshot_export(tmp_path):
    setup = lindblad_setup("CH", 3, 5)
    cfg = gs.SolverConfig(
        dt_rk0=0.25, n_traj=2, t_max=5.0, seed=0, grid_points=10, store_states=True
    )
    rec = gs.evolve_randomized(
        setup["ham"], list(setup["jump_set"]), F, gs.maximally_mixed(3), cfg,
        setup["sigma"], lindblads=list(setup["lindblads"]),
    )
    path = tmp_path / "states.npz"
    rec.save_states(path)
    data = np.load(path)
    assert np.array_equal(data["times"], rec.times)
    assert data["avg_states"].shape == (len(rec.times), 8, 8)
