"""Mixed-field Ising chain, Gibbs states, Bohr frequencies and symmetry tools.

Energies are quoted in units of the coupling J and times in 1/J.  The
default inverse temperature everywhere is beta = 1/(2J).
"""

from dataclasses import dataclass

import numpy as np

from .numkernel import (
    PAULI_I,
    PAULI_X,
    PAULI_Z,
    Spectrum,
    embed_single_site,
    kron_all,
)

DEFAULT_BETA_J = 0.5  # beta * J = 1/2


@dataclass(frozen=True)
class IsingParams:
    """Parameters of the open-boundary mixed-field Ising chain."""

    n: int
    J: float = 1.0
    h: float = 0.0
    m: float = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("need at least one qubit")
        if self.J <= 0:
            raise ValueError("J sets the energy scale and must be positive")

    @property
    def beta_default(self):
        return DEFAULT_BETA_J / self.J


# Named parameter points (h/J, m/J) and the accepted randomized-solver step
# J*dt_rk per system size n = 3..8.  dt_rk is the integrator step; it is a
# different quantity from the OFT discretization step dt_oft of the circuit.
NAMED_POINTS = {
    "TFIM": (1.0, 0.0),
    "CH2": (1.0, 0.2),
    "CH": (1.0, 0.4),
    "KIH": (0.9045, 0.8090),
    "REG": (0.1585, 3.062),
    "INTER": (0.5623, 1.230),
    "CH3": (1.698, 0.5551),
    "REG2": (6.310, 0.2158),
}

RK_STEP_TABLE = {
    "TFIM": {3: 0.25, 4: 0.25, 5: 0.125, 6: 0.125, 7: 0.125, 8: 0.125},
    "CH2": {3: 0.25, 4: 0.25, 5: 0.125, 6: 0.125, 7: 0.125, 8: 0.125},
    "CH": {3: 0.25, 4: 0.25, 5: 0.125, 6: 0.125, 7: 0.125, 8: 0.125},
    "KIH": {3: 0.25, 4: 0.125, 5: 0.125, 6: 0.125, 7: 0.125, 8: 0.0625},
    "REG": {3: 0.125, 4: 0.0625, 5: 0.0625, 6: 0.0625, 7: 0.0625, 8: 0.03125},
    "INTER": {3: 0.25, 4: 0.125, 5: 0.125, 6: 0.125, 7: 0.0625, 8: 0.0625},
    "CH3": {3: 0.125, 4: 0.125, 5: 0.125, 6: 0.0625, 7: 0.0625, 8: 0.0625},
    "REG2": {3: 0.0625, 4: 0.03125, 5: 0.03125, 6: 0.03125, 7: 0.03125, 8: 0.015625},
}


def named_point(key, n, J=1.0):
    """IsingParams for one of the named parameter points."""
    h, m = NAMED_POINTS[key]
    return IsingParams(n=n, J=J, h=h * J, m=m * J)


@dataclass(frozen=True)
class BohrSpectrum:
    """Grouped set of eigenvalue differences E_i - E_j.

    frequencies : sorted distinct cluster values, symmetric under negation
    pair_index : (D, D) integer array mapping (i, j) to its cluster
    """

    frequencies: np.ndarray
    pair_index: np.ndarray

    @property
    def count(self):
        return self.frequencies.shape[0]

    def pair_frequencies(self):
        """(D, D) array of grouped frequencies nu_ij = E_i - E_j."""
        return self.frequencies[self.pair_index]


def build_hamiltonian(p):
    """H = -J sum Z_i Z_{i+1} - h sum X_i - m sum Z_i, open boundaries.

    Site 0 is the leftmost (most significant) tensor factor.
    """
    n = p.n
    dim = 2**n
    ham = np.zeros((dim, dim), dtype=complex)
    for i in range(n - 1):
        factors = [PAULI_I] * n
        factors[i] = PAULI_Z
        factors[i + 1] = PAULI_Z
        ham -= p.J * kron_all(factors)
    for i in range(n):
        ham -= p.h * embed_single_site(PAULI_X, i, n)
        ham -= p.m * embed_single_site(PAULI_Z, i, n)
    return ham


def gibbs_state(spec, beta):
    """Thermal state e^{-beta H} / Z from the eigendecomposition of H."""
    if not np.isfinite(beta):
        raise ValueError("beta must be finite")
    w = spec.values - spec.values.min()
    p = np.exp(-beta * w)
    p /= p.sum()
    return spec.vectors @ (p[:, None] * spec.vectors.conj().T)


def gibbs_populations(spec, beta):
    """Eigenbasis populations e^{-beta E_i} / Z of the Gibbs state."""
    w = spec.values - spec.values.min()
    p = np.exp(-beta * w)
    return p / p.sum()


def bohr_frequencies(spec, tol=None):
    """Group all pairwise differences E_i - E_j into clusters of diameter <= tol.

    The default tolerance is 1e-9 * max|E|.  The zero cluster is pinned to
    exactly 0 and the cluster values are symmetrized under negation.
    """
    w = np.asarray(spec.values, dtype=float)
    if tol is None:
        tol = 1e-9 * max(np.max(np.abs(w)), 1e-300)
    if tol <= 0:
        raise ValueError("tol must be positive")
    diffs = w[:, None] - w[None, :]

    # Cluster the nonnegative differences and mirror, so the frequency set
    # is exactly symmetric under negation.
    pos = np.sort(np.unique(np.abs(diffs).ravel()))
    reps = []
    start = 0
    for k in range(1, len(pos) + 1):
        if k == len(pos) or pos[k] - pos[start] > tol:
            reps.append(pos[start:k].mean())
            start = k
    reps = np.array(reps)
    if reps[0] <= tol:
        reps[0] = 0.0
    elif reps[0] > 0:
        reps = np.concatenate(([0.0], reps))
    frequencies = np.concatenate((-reps[:0:-1], reps))

    # Map each (i, j) pair onto its cluster.
    idx_abs = np.searchsorted(reps, np.abs(diffs))
    idx_abs = np.clip(idx_abs, 0, len(reps) - 1)
    below = idx_abs > 0
    dist_here = np.abs(np.abs(diffs) - reps[idx_abs])
    dist_below = np.abs(np.abs(diffs) - reps[np.maximum(idx_abs - 1, 0)])
    idx_abs = np.where(below & (dist_below <= dist_here), idx_abs - 1, idx_abs)
    zero_idx = len(reps) - 1  # index of 0 within `frequencies`
    pair_index = np.where(diffs >= 0, zero_idx + idx_abs, zero_idx - idx_abs)
    return BohrSpectrum(frequencies=frequencies, pair_index=pair_index)


def energy_distribution(state, spec):
    """Populations <E_i| rho |E_i> of a density matrix over the eigenbasis."""
    amps = spec.vectors.conj().T @ np.asarray(state) @ spec.vectors
    return np.real(np.diag(amps))


def parity_projector(n):
    """Projector onto the even sector of reflection about the chain center."""
    if n < 2:
        raise ValueError("need at least two sites for a reflection")
    dim = 2**n
    refl = np.zeros((dim, dim))
    for x in range(dim):
        bits = [(x >> k) & 1 for k in range(n)]
        y = 0
        for k, b in enumerate(bits[::-1]):
            y |= b << k
        refl[y, x] = 1.0
    return 0.5 * (np.eye(dim) + refl)


def haar_random_state(dim, rng):
    """Haar-random pure state as a normalized complex Gaussian vector."""
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def maximally_mixed(n):
    dim = 2**n
    return np.eye(dim, dtype=complex) / dim
