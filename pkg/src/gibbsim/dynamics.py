"""Time evolution of the Lindblad equation.

Three solvers share one record format: the randomized density-matrix RK4
scheme (one jump operator sampled per step, Hermiticity-gated adaptive step),
the exact full-Lindbladian RK4, and a Monte-Carlo wave-function unraveling
used as a cross-check.  Times are in units of 1/J.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import StepUnderflow
from .jumps import lindblad_op_exact
from .model import bohr_frequencies
from .numkernel import eig_hermitian, trace_distance

DT_FLOOR = 1e-6


class _NotConverged:
    """Sentinel for mixing-time estimates that never cross the threshold."""

    def __repr__(self):
        return "NOT_CONVERGED"

    def __bool__(self):
        return False


NOT_CONVERGED = _NotConverged()


@dataclass
class SolverConfig:
    """Integrator controls.

    dt_rk0 : initial Runge-Kutta step (units 1/J)
    max_steps : hard cap on the number of steps per run
    n_traj : trajectory count for the randomized scheme
    herm_tol : element-wise Hermiticity gate; violation halves the step
    seed : base seed; trajectory i uses the stream (seed, i)
    t_max : optional time horizon; the run covers min(max_steps, t_max/dt)
    stop_below : optional early stop once the averaged distance crosses it
    grid_points : distance series is downsampled to about this many points
    """

    dt_rk0: float
    max_steps: int = 300_000
    n_traj: int = 10
    herm_tol: float = 1e-6
    seed: int = 0
    restart_policy: str = "from_scratch"
    t_max: float | None = None
    stop_below: float | None = None
    grid_points: int = 2000
    store_states: bool = False
    store_traj_states: bool = False

    def __post_init__(self):
        if self.dt_rk0 <= 0 or self.n_traj < 1 or self.herm_tol <= 0:
            raise ValueError("invalid solver configuration")
        if self.restart_policy != "from_scratch":
            raise ValueError("only from_scratch restarts are supported")


@dataclass
class EvolutionRecord:
    """Common output of all solvers.

    per_traj_distance has shape (n_traj, n_grid); avg_distance is the
    distance of the trajectory-averaged state, which by convexity of the
    trace norm never exceeds the per-trajectory maximum.
    """

    times: np.ndarray
    per_traj_distance: np.ndarray
    avg_distance: np.ndarray
    final_dt_rk: float
    halvings: int
    final_avg_state: np.ndarray
    avg_states: np.ndarray | None = None
    traj_states: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def validate(self):
        if self.per_traj_distance.size:
            worst = np.max(self.per_traj_distance, axis=0)
            if np.any(self.avg_distance > worst + 1e-12):
                raise AssertionError("trace-norm convexity violated")
        return self

    def to_csv(self, path):
        header = ["t"] + [f"traj{i}" for i in range(self.per_traj_distance.shape[0])]
        header.append("avg")
        rows = np.column_stack([self.times, self.per_traj_distance.T, self.avg_distance])
        with open(path, "w") as fh:
            fh.write("# times in 1/J, trace distances dimensionless\n")
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(repr(float(x)) for x in row) + "\n")

    def save_states(self, path):
        """Binary snapshot of the averaged states (requires store_states)."""
        if self.avg_states is None:
            raise ValueError("record was built without store_states")
        np.savez_compressed(path, times=self.times, avg_states=self.avg_states)


class _HermiticityViolation(Exception):
    pass


def rk4_step(rho, generator, dt):
    """One classical fourth-order Runge-Kutta step of d rho/dt = generator(rho)."""
    k1 = generator(rho)
    k2 = generator(rho + 0.5 * dt * k1)
    k3 = generator(rho + 0.5 * dt * k2)
    k4 = generator(rho + dt * k3)
    return rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _grid_indices(n_steps, cfg):
    stride = 1 if cfg.grid_points <= 0 else max(1, math.ceil(n_steps / cfg.grid_points))
    idx = list(range(0, n_steps + 1, stride))
    if idx[-1] != n_steps:
        idx.append(n_steps)
    return idx


def _n_steps(cfg, dt):
    n = cfg.max_steps
    if cfg.t_max is not None:
        n = min(n, max(1, math.ceil(cfg.t_max / dt)))
    return n


def _prepare_lindblads(ham, jump_set, f, lindblads):
    if lindblads is None:
        spec = eig_hermitian(ham)
        bohr = bohr_frequencies(spec)
        lindblads = [
            lindblad_op_exact(a, spec, f, bohr, source=i) for i, a in enumerate(jump_set)
        ]
    return np.stack([l.matrix if hasattr(l, "matrix") else l for l in lindblads])


def evolve_randomized(
    ham,
    jump_set,
    f,
    rho0,
    cfg,
    target,
    gamma=1.0,
    lindblads=None,
    include_coherent=True,
):
    """Randomized dmRK4: one uniformly sampled jump operator per step.

    Each trajectory evolves under L^a = -i[H, .] + gamma * D^a.  After every
    step the state is checked element-wise for Hermiticity; a violation
    halves the step and restarts every trajectory from rho0.  Surviving
    states are symmetrized and trace-renormalized.
    """
    l_ops = _prepare_lindblads(ham, jump_set, f, lindblads)
    l_dag = l_ops.conj().transpose(0, 2, 1)
    ldl = np.matmul(l_dag, l_ops)
    ham = np.asarray(ham, dtype=complex)
    n_jump = l_ops.shape[0]

    def generator_batch(rho, sel):
        out = np.matmul(l_ops[sel], np.matmul(rho, l_dag[sel]))
        out -= 0.5 * (np.matmul(ldl[sel], rho) + np.matmul(rho, ldl[sel]))
        if gamma != 1.0:
            out *= gamma
        if include_coherent:
            out += -1j * (ham @ rho - rho @ ham)
        return out

    dt = cfg.dt_rk0
    halvings = 0
    while True:
        try:
            record = _run_randomized(generator_batch, n_jump, rho0, cfg, target, dt)
            record.halvings = halvings
            return record.validate()
        except _HermiticityViolation:
            halvings += 1
            dt *= 0.5
            if dt < DT_FLOOR:
                raise StepUnderflow(f"step fell below {DT_FLOOR}/J after {halvings} halvings")


def _run_randomized(generator_batch, n_jump, rho0, cfg, target, dt):
    n_steps = _n_steps(cfg, dt)
    grid = _grid_indices(n_steps, cfg)
    n_traj = cfg.n_traj
    rngs = [np.random.default_rng([cfg.seed, i]) for i in range(n_traj)]
    rho = np.broadcast_to(np.asarray(rho0, dtype=complex), (n_traj,) + rho0.shape).copy()

    times, avg_dist, per_dist, avg_states, traj_states = [], [], [], [], []

    def record_point(j):
        avg = rho.mean(axis=0)
        avg = 0.5 * (avg + avg.conj().transpose())
        times.append(j * dt)
        avg_dist.append(trace_distance(avg, target))
        per_dist.append([trace_distance(rho[i], target) for i in range(n_traj)])
        if cfg.store_states:
            avg_states.append(avg.copy())
        if cfg.store_traj_states:
            traj_states.append(rho.copy())
        return avg

    draws = np.stack([rng.integers(0, n_jump, size=n_steps) for rng in rngs])

    avg = record_point(0)
    grid_pos = 1
    stopped = False
    for j in range(1, n_steps + 1):
        sel = draws[:, j - 1]
        k1 = generator_batch(rho, sel)
        k2 = generator_batch(rho + 0.5 * dt * k1, sel)
        k3 = generator_batch(rho + 0.5 * dt * k2, sel)
        k4 = generator_batch(rho + dt * k3, sel)
        rho = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

        dev = np.abs(rho - rho.conj().transpose(0, 2, 1)).max()
        if not np.isfinite(dev) or dev > cfg.herm_tol:
            raise _HermiticityViolation
        rho = 0.5 * (rho + rho.conj().transpose(0, 2, 1))
        tr = np.einsum("tii->t", rho).real
        rho /= tr[:, None, None]

        if grid_pos < len(grid) and j == grid[grid_pos]:
            avg = record_point(j)
            grid_pos += 1
            if cfg.stop_below is not None and avg_dist[-1] < cfg.stop_below:
                stopped = True
                break

    return EvolutionRecord(
        times=np.array(times),
        per_traj_distance=np.array(per_dist).T,
        avg_distance=np.array(avg_dist),
        final_dt_rk=dt,
        halvings=0,
        final_avg_state=avg,
        avg_states=np.array(avg_states) if cfg.store_states else None,
        traj_states=(
            np.array(traj_states).transpose(1, 0, 2, 3) if cfg.store_traj_states else None
        ),
        meta={"n_steps": n_steps, "stopped_early": stopped},
    )


def evolve_exact(ham, lindblads, gammas, rho0, cfg, target, include_coherent=True):
    """Deterministic RK4 with the full Lindbladian (all jump channels at once)."""
    l_ops = np.stack([l.matrix if hasattr(l, "matrix") else l for l in lindblads])
    gammas = np.asarray(gammas, dtype=float)
    l_weighted = gammas[:, None, None] * l_ops
    l_dag = l_ops.conj().transpose(0, 2, 1)
    decay = np.einsum("a,aij,ajk->ik", gammas, l_dag, l_ops)
    ham = np.asarray(ham, dtype=complex)

    def generator(rho):
        out = np.einsum("aij,jk,alk->il", l_weighted, rho, l_ops.conj())
        out -= 0.5 * (decay @ rho + rho @ decay)
        if include_coherent:
            out += -1j * (ham @ rho - rho @ ham)
        return out

    cfg_single = SolverConfig(**{**cfg.__dict__, "n_traj": 1})

    def generator_batch(rho, sel):
        return generator(rho[0])[None, :, :]

    dt = cfg.dt_rk0
    halvings = 0
    while True:
        try:
            record = _run_randomized(generator_batch, 1, rho0, cfg_single, target, dt)
            record.halvings = halvings
            return record.validate()
        except _HermiticityViolation:
            halvings += 1
            dt *= 0.5
            if dt < DT_FLOOR:
                raise StepUnderflow(f"step fell below {DT_FLOOR}/J after {halvings} halvings")


def mcwf_evolve(ham, lindblads, gammas, psi0, cfg, target, jump_prob_cap=0.05, n_batches=0):
    """Monte-Carlo wave-function unraveling (quantum-jump method).

    Pure trajectories evolve under the effective generator
    H - (i/2) sum_a gamma_a L_a^dag L_a between norm-threshold jumps; the
    substep count per grid step keeps the jump probability below
    `jump_prob_cap` (cap 0.1 enforced).  The density estimate is the
    trajectory average of |psi><psi|.

    psi0 is a normalized pure state; passing None unravels the maximally
    mixed initial state by drawing a computational basis state per
    trajectory.  With n_batches > 0, block-averaged states are kept in
    meta['batch_states'] for jackknife error estimation.
    """
    jump_prob_cap = min(jump_prob_cap, 0.1)
    l_ops = np.stack([l.matrix if hasattr(l, "matrix") else l for l in lindblads])
    gammas = np.asarray(gammas, dtype=float)
    decay = np.einsum("a,aij,ajk->ik", gammas, l_ops.conj().transpose(0, 2, 1), l_ops)
    h_eff = np.asarray(ham, dtype=complex) - 0.5j * decay

    dt = cfg.dt_rk0
    n_steps = _n_steps(cfg, dt)
    grid = _grid_indices(n_steps, cfg)
    dim = h_eff.shape[0] if psi0 is None else psi0.shape[0]
    n_traj = cfg.n_traj

    propagators = {}

    def propagator(k):
        if k not in propagators:
            propagators[k] = scipy.linalg.expm(-1j * (dt / k) * h_eff)
        return propagators[k]

    def rates(psi):
        # Rates of the normalized state; psi itself may carry norm < 1
        # between jumps (the norm is the survival probability).
        amps = l_ops @ psi
        r = gammas * np.einsum("ai,ai->a", amps.conj(), amps).real
        return r / max(np.linalg.norm(psi) ** 2, 1e-300), amps

    sum_state = np.zeros((len(grid), dim, dim), dtype=complex)
    per_dist = np.zeros((n_traj, len(grid)))
    traj_states = (
        np.zeros((n_traj, len(grid), dim, dim), dtype=complex)
        if cfg.store_traj_states
        else None
    )
    batch_sums = (
        np.zeros((n_batches, len(grid), dim, dim), dtype=complex) if n_batches else None
    )

    for i in range(n_traj):
        rng = np.random.default_rng([cfg.seed, i])
        if psi0 is None:
            psi = np.zeros(dim, dtype=complex)
            psi[rng.integers(dim)] = 1.0
        else:
            psi = np.asarray(psi0, dtype=complex).copy()
            psi /= np.linalg.norm(psi)
        threshold = rng.random()
        grid_pos = 0
        for j in range(n_steps + 1):
            if j == grid[grid_pos]:
                unit = psi / np.linalg.norm(psi)
                pure = np.outer(unit, unit.conj())
                sum_state[grid_pos] += pure
                per_dist[i, grid_pos] = trace_distance(pure, target)
                if traj_states is not None:
                    traj_states[i, grid_pos] = pure
                if batch_sums is not None:
                    batch_sums[i * n_batches // n_traj, grid_pos] += pure
                grid_pos += 1
                if grid_pos == len(grid):
                    break
            r, _ = rates(psi)
            total = float(r.sum())
            k = max(1, math.ceil(dt * total / jump_prob_cap))
            u = propagator(k)
            for _ in range(k):
                candidate = u @ psi
                if np.linalg.norm(candidate) ** 2 <= threshold:
                    r, amps = rates(psi)
                    total = float(r.sum())
                    if total <= 0:
                        psi = candidate
                        continue
                    choice = np.searchsorted(np.cumsum(r / total), rng.random())
                    choice = min(choice, len(r) - 1)
                    psi = amps[choice] / np.linalg.norm(amps[choice])
                    threshold = rng.random()
                else:
                    psi = candidate

    times = np.array(grid, dtype=float) * dt
    avg_states = sum_state / n_traj
    avg_dist = np.array([trace_distance(st, target) for st in avg_states])
    meta = {"n_steps": n_steps}
    if batch_sums is not None:
        sizes = np.array([(i * n_batches // n_traj == b) for b in range(n_batches)
                          for i in range(n_traj)]).reshape(n_batches, n_traj).sum(axis=1)
        meta["batch_states"] = batch_sums / sizes[:, None, None, None]
        meta["batch_sizes"] = sizes
    return EvolutionRecord(
        times=times,
        per_traj_distance=per_dist,
        avg_distance=avg_dist,
        final_dt_rk=dt,
        halvings=0,
        final_avg_state=avg_states[-1],
        avg_states=avg_states if cfg.store_states else None,
        traj_states=traj_states,
        meta=meta,
    ).validate()


def mixing_time_estimate(record, eps=1e-2):
    """First grid time with averaged distance below eps, or NOT_CONVERGED."""
    below = np.nonzero(record.avg_distance < eps)[0]
    if below.size == 0:
        return NOT_CONVERGED
    return float(record.times[below[0]])
