"""Random k-local Pauli jump operators and their filtered-OFT Lindblad operators.

The Lindblad operator attached to a jump A is the operator Fourier transform
L = int g(t) e^{iHt} A e^{-iHt} dt = sum_nu eta_nu A_nu, evaluated either
exactly in the eigenbasis of H or through the trapezoid discretization of
the time integral over [-T, T].
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidLocality
from .numkernel import PAULIS, kron_all

_EXP_UNDERFLOW = -700.0


@dataclass(frozen=True)
class PauliString:
    """k-local Pauli string: non-identity letters on k distinct sites."""

    n: int
    sites: tuple
    letters: tuple

    def __post_init__(self):
        if len(self.sites) != len(self.letters):
            raise InvalidLocality("one letter per site")
        if len(set(self.sites)) != len(self.sites):
            raise InvalidLocality("sites must be distinct")
        if any(s < 0 or s >= self.n for s in self.sites):
            raise InvalidLocality("site index out of range")
        if any(l not in ("X", "Y", "Z") for l in self.letters):
            raise InvalidLocality("letters must be X, Y or Z")

    @property
    def k(self):
        return len(self.sites)

    def matrix(self):
        """Dense 2^n realization; site 0 is the leftmost tensor factor."""
        factors = [PAULIS["I"]] * self.n
        for s, l in zip(self.sites, self.letters):
            factors[s] = PAULIS[l]
        return kron_all(factors)

    def label(self):
        body = ["I"] * self.n
        for s, l in zip(self.sites, self.letters):
            body[s] = l
        return "".join(body)


def sample_jump_set(n, k, count, seed):
    """Sample `count` k-local Pauli strings, with replacement.

    Positions are a uniform k-subset of the chain and letters are uniform
    over {X, Y, Z} on every chosen site.  Deterministic under `seed`.
    """
    if not 1 <= k <= n:
        raise InvalidLocality(f"k={k} outside [1, {n}]")
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    letters = "XYZ"
    out = []
    for _ in range(count):
        sites = tuple(sorted(rng.choice(n, size=k, replace=False).tolist()))
        out.append(
            PauliString(
                n=n,
                sites=sites,
                letters=tuple(letters[i] for i in rng.integers(0, 3, size=k)),
            )
        )
    return out


def jump_set_to_text(jump_set, seed=None):
    """Serialize a jump set as one text record per line."""
    lines = [f"# jump set  n={jump_set[0].n}  k={jump_set[0].k}  seed={seed}"]
    for a in jump_set:
        sites = ",".join(str(s) for s in a.sites)
        letters = ",".join(a.letters)
        lines.append(f"n={a.n} k={a.k} sites={sites} letters={letters}")
    return "\n".join(lines) + "\n"


def jump_set_from_text(text):
    out = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = dict(item.split("=", 1) for item in line.split())
        sites = tuple(int(s) for s in fields["sites"].split(","))
        letters = tuple(fields["letters"].split(","))
        out.append(PauliString(n=int(fields["n"]), sites=sites, letters=letters))
    return out


@dataclass(frozen=True)
class FilterSpec:
    """Gaussian filter scales: energy width sqrt(2)/beta and shift 1/beta."""

    beta: float

    @property
    def delta_e(self):
        return math.sqrt(2.0) / self.beta

    @property
    def omega_gamma(self):
        # beta * delta_e^2 / 2 = 1/beta for the protocol width
        return 1.0 / self.beta


def filter_time(f, t):
    """Time-domain Gaussian filter g(t), complex."""
    d2 = f.delta_e**2
    pref = (d2 / (2.0 * math.pi**3)) ** 0.25
    t = np.asarray(t, dtype=float)
    return pref * np.exp(-d2 * t**2 + 1j * f.beta * d2 * t / 2.0)


def filter_freq(f, nu):
    """Frequency-domain filter eta_nu = (beta^2/4pi)^{1/4} e^{-(beta nu + 1)^2/8}.

    This is the Fourier transform int e^{i nu t} g(t) dt of `filter_time`.
    """
    nu = np.asarray(nu, dtype=float)
    pref = (f.beta**2 / (4.0 * math.pi)) ** 0.25
    expo = -((f.beta * nu + 1.0) ** 2) / 8.0
    return pref * np.exp(np.maximum(expo, _EXP_UNDERFLOW)) * (expo >= _EXP_UNDERFLOW)


def filter_freq_discretized(f, nu, T, S):
    """Trapezoid approximation of the filter transform over [-T, T].

    eta_bar(nu) = sum_{s=-S}^{S} dt_s g(s dt) e^{i nu s dt} with dt = T/S and
    halved end weights; complex-valued for finite S.
    """
    if S < 1 or T <= 0:
        raise ValueError("need T > 0 and S >= 1")
    dt = T / S
    s = np.arange(-S, S + 1)
    weights = np.full(2 * S + 1, dt)
    weights[0] = weights[-1] = dt / 2.0
    g = filter_time(f, s * dt) * weights
    nu = np.asarray(nu, dtype=float)
    phases = np.exp(1j * np.multiply.outer(nu, s * dt))
    return phases @ g


@dataclass(frozen=True)
class LindbladOperator:
    """Filtered jump operator in the computational basis."""

    matrix: np.ndarray
    source: int

    def __post_init__(self):
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("non-finite entries in Lindblad operator")


def lindblad_op_exact(a, spec, f, bohr, source=0):
    """Exact OFT Lindblad operator: entry (i,j) in the eigenbasis is
    eta(nu_ij) <E_i|A|E_j> with nu_ij the grouped Bohr frequency."""
    a_eig = spec.to_eigenbasis(a.matrix() if hasattr(a, "matrix") else a)
    eta = filter_freq(f, bohr.pair_frequencies())
    return LindbladOperator(matrix=spec.from_eigenbasis(eta * a_eig), source=source)


def lindblad_op_discretized(a, spec, f, T, S, source=0):
    """Trapezoid-discretized OFT Lindblad operator over [-T, T] with S steps.

    Uses exact eigenbasis exponentials: in the eigenbasis the sum collapses
    to eta_bar(E_i - E_j) times the jump matrix element.
    """
    a_eig = spec.to_eigenbasis(a.matrix() if hasattr(a, "matrix") else a)
    nu = spec.values[:, None] - spec.values[None, :]
    eta_bar = filter_freq_discretized(f, nu.ravel(), T, S).reshape(nu.shape)
    return LindbladOperator(matrix=spec.from_eigenbasis(eta_bar * a_eig), source=source)


def bohr_decomposition(a, spec, bohr):
    """Split a jump operator into its Bohr components {A_nu}.

    Returns a dict nu_index -> A_nu in the computational basis, satisfying
    sum_nu A_nu = A exactly (entries are partitioned by frequency cluster).
    """
    a_eig = spec.to_eigenbasis(a.matrix() if hasattr(a, "matrix") else a)
    out = {}
    for idx in np.unique(bohr.pair_index):
        mask = bohr.pair_index == idx
        out[int(idx)] = spec.from_eigenbasis(np.where(mask, a_eig, 0.0))
    return out
