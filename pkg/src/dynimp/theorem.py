"""Empirical checks for products of randomly perturbed unitaries.

For H(t) = H0 + xi(t) V with xi piecewise constant on intervals of length tau
and i.i.d. zero-mean values, the product

    U_N(t) = prod_k exp[-i (H0 + xi_k V) tau],   N = t / tau,

(earliest factor rightmost) converges in probability to exp(-i H0 t).  This
module measures that convergence, compares U_N with the Gaussian surrogate
exp[-i (H0 + eta V / sqrt(N)) t], and builds the time-averaged perturbation
and its block-diagonal (Zeno) limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy import stats as sstats
from statsmodels.stats.proportion import proportion_confint

from .errors import AmbiguousSpectrumError, CapabilityError, ConfigError
from .lattice import LatticeGeometry

DENSE_MAX_DIM = 1024


# -- dense lattice operators -------------------------------------------------

def _check_dense(n: int):
    if (1 << n) > DENSE_MAX_DIM:
        raise CapabilityError(f"dense operators for n={n} exceed dimension {DENSE_MAX_DIM}")


def lattice_h0(geom: LatticeGeometry, delta0: float = 1.0) -> np.ndarray:
    """delta0 * sum_j sigma_z^(j) as a dense diagonal matrix."""
    _check_dense(geom.n)
    b = np.arange(1 << geom.n)
    pop = sum((b >> j) & 1 for j in range(geom.n))
    return np.diag(delta0 * (2.0 * pop - geom.n))


def sigma_xx(geom: LatticeGeometry, link: tuple[int, int]) -> np.ndarray:
    _check_dense(geom.n)
    dim = 1 << geom.n
    i, j = link
    idx = np.arange(dim)
    out = np.zeros((dim, dim))
    out[idx ^ ((1 << i) | (1 << j)), idx] = 1.0
    return out


def flip_flop(geom: LatticeGeometry, link: tuple[int, int]) -> np.ndarray:
    """sigma_+^(i) sigma_-^(j) + sigma_-^(i) sigma_+^(j): swaps antiparallel pairs."""
    _check_dense(geom.n)
    dim = 1 << geom.n
    i, j = link
    idx = np.arange(dim)
    anti = ((idx >> i) & 1) != ((idx >> j) & 1)
    out = np.zeros((dim, dim))
    out[idx[anti] ^ ((1 << i) | (1 << j)), idx[anti]] = 1.0
    return out


# -- instances -----------------------------------------------------------------

@dataclass(frozen=True)
class NoiseDistribution:
    """Zero-mean scalar noise: ``uniform`` on [-scale/2, scale/2] or ``gaussian`` with std ``scale``."""

    kind: str = "uniform"
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("uniform", "gaussian"):
            raise ConfigError(f"unknown noise kind {self.kind!r}")
        if self.scale < 0:
            raise ConfigError("noise scale must be non-negative")

    @property
    def variance(self) -> float:
        return self.scale**2 / 12.0 if self.kind == "uniform" else self.scale**2

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.kind == "uniform":
            return self.scale * (rng.random(size) - 0.5)
        return self.scale * rng.standard_normal(size)


@dataclass(frozen=True, eq=False)
class TheoremInstance:
    h0: np.ndarray
    v: np.ndarray
    t: float
    taus: tuple[float, ...]
    noise: NoiseDistribution = NoiseDistribution()
    label: str = ""

    def __post_init__(self):
        for name, m in (("h0", self.h0), ("v", self.v)):
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise ConfigError(f"{name} must be square")
            if np.max(np.abs(m - m.conj().T)) > 1e-12:
                raise ConfigError(f"{name} is not Hermitian")
        if self.h0.shape != self.v.shape:
            raise ConfigError("h0 and v must have the same shape")
        if self.h0.shape[0] > DENSE_MAX_DIM:
            raise CapabilityError(f"dimension {self.h0.shape[0]} too large for the dense path")
        if not self.t > 0:
            raise ConfigError("t must be positive")

    @property
    def dim(self) -> int:
        return self.h0.shape[0]

    def steps(self, tau: float) -> int:
        n = round(self.t / tau)
        if n < 1:
            raise ConfigError(f"tau={tau} longer than t={self.t}")
        return n

    def free_evolution(self) -> np.ndarray:
        return expm_hermitian(self.h0, self.t)


def lattice_instance(geom: LatticeGeometry, strength: float, t: float, steps=(4, 16, 64, 256, 1024),
                     delta0: float = 1.0, noise: NoiseDistribution = NoiseDistribution()) -> TheoremInstance:
    """H0 = delta0 sum sigma_z, V = strength * sum_links sigma_x sigma_x (one common noise)."""
    v = strength * sum(sigma_xx(geom, link) for link in geom.links)
    return TheoremInstance(lattice_h0(geom, delta0), v, t, tuple(t / n for n in steps), noise,
                           f"lattice {geom.rows}x{geom.cols}")


def random_hermitian(dim: int, rng: np.random.Generator, norm: float = 1.0) -> np.ndarray:
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    h = (a + a.conj().T) / 2
    return norm * h / np.linalg.norm(h, 2)


def random_instance(dim: int, seed: int, strength: float, t: float, steps=(4, 16, 64, 256, 1024),
                    commuting: bool = False, noise: NoiseDistribution = NoiseDistribution()) -> TheoremInstance:
    """Random H0 with ||H0|| = 1 and V with ||V|| = strength.

    With ``commuting=True`` V is diagonal in the eigenbasis of H0.
    """
    rng = np.random.default_rng(seed)
    h0 = random_hermitian(dim, rng)
    if commuting:
        _, w = np.linalg.eigh(h0)
        d = rng.standard_normal(dim)
        v = strength * (w * (d / np.max(np.abs(d)))) @ w.conj().T
        v = (v + v.conj().T) / 2
    else:
        v = random_hermitian(dim, rng, strength)
    return TheoremInstance(h0, v, t, tuple(t / n for n in steps), noise,
                           f"random d={dim}" + (" commuting" if commuting else ""))


# -- products ------------------------------------------------------------------

def expm_hermitian(h: np.ndarray, t: float) -> np.ndarray:
    lam, w = np.linalg.eigh(h)
    return (w * np.exp(-1j * lam * t)) @ w.conj().T


def _expm_stack(stack: np.ndarray, t: float) -> np.ndarray:
    """exp(-i h t) for every Hermitian h in a (k, d, d) stack."""
    lam, w = np.linalg.eigh(stack)  # real symmetric stacks stay on the cheaper real path
    return (w * np.exp(-1j * lam * t)[:, None, :]) @ np.conj(np.swapaxes(w, 1, 2))


def ordered_product(factors: np.ndarray) -> np.ndarray:
    """factors[-1] @ ... @ factors[0], reduced pairwise in batches."""
    f = factors
    while len(f) > 1:
        if len(f) % 2:
            tail = f[-1:]
            f = np.concatenate([f[1:-1:2] @ f[0:-1:2], tail])
        else:
            f = f[1::2] @ f[0::2]
    return f[0]


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def product_from_noise(instance: TheoremInstance, tau: float, xi: np.ndarray) -> np.ndarray:
    """Time-ordered product for given noise values; factor k acts after factor k-1."""
    stack = instance.h0[None, :, :] + xi[:, None, None] * instance.v[None, :, :]
    return ordered_product(_expm_stack(stack, tau))


def product_unitary(instance: TheoremInstance, tau: float, seed=None) -> np.ndarray:
    n = instance.steps(tau)
    xi = instance.noise.sample(_rng(seed), n)
    return product_from_noise(instance, instance.t / n, xi)


def operator_norm(a: np.ndarray) -> float:
    return float(np.linalg.norm(a, 2))


def operator_norm_power(a: np.ndarray, tol: float = 1e-13, max_iter: int = 100_000, seed: int = 0) -> float:
    """Largest singular value by power iteration on a^H a."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(a.shape[1]) + 1j * rng.standard_normal(a.shape[1])
    x /= np.linalg.norm(x)
    ata = a.conj().T @ a
    lam = 0.0
    for _ in range(max_iter):
        y = ata @ x
        new = float(np.real(np.vdot(x, y)))
        ny = np.linalg.norm(y)
        if ny == 0:
            return 0.0
        x = y / ny
        if abs(new - lam) <= tol * max(new, 1e-300):
            lam = new
            break
        lam = new
    return math.sqrt(max(lam, 0.0))


# -- convergence in probability -------------------------------------------------

@dataclass
class ConvergenceReport:
    taus: np.ndarray
    steps: np.ndarray
    deviations: np.ndarray  # (len(taus), trials)
    epsilon: float
    p_hat: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    exponent: float  # slope of log median deviation vs log N
    exponent_stderr: float

    @property
    def median_deviation(self) -> np.ndarray:
        return np.median(self.deviations, axis=1)

    def monotone_within_ci(self) -> bool:
        """P_hat non-increasing in N: no later interval lies wholly above an earlier one."""
        order = np.argsort(self.steps)
        lo, hi = self.ci_low[order], self.ci_high[order]
        return all(lo[j] <= hi[i] for i in range(len(order)) for j in range(i + 1, len(order)))

    def rows(self):
        med = self.median_deviation
        return [
            (float(self.taus[i]), int(self.steps[i]), float(med[i]), float(self.p_hat[i]),
             float(self.ci_low[i]), float(self.ci_high[i]))
            for i in range(len(self.taus))
        ]


def convergence_scan(instance: TheoremInstance, trials: int, epsilon: float, seed: int = 0) -> ConvergenceReport:
    if trials < 20:
        raise ConfigError("convergence_scan needs at least 20 trials")
    target = instance.free_evolution()
    taus = np.array(instance.taus, dtype=float)
    steps = np.array([instance.steps(tau) for tau in taus])
    dev = np.empty((len(taus), trials))
    for i, tau in enumerate(taus):
        for k in range(trials):
            rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i, k)))
            u = product_unitary(instance, tau, rng)
            dev[i, k] = operator_norm(u - target)
    exceed = (dev >= epsilon).sum(axis=1)
    lo, hi = proportion_confint(exceed, trials, alpha=0.05, method="wilson")
    med = np.median(dev, axis=1)
    fit = sstats.linregress(np.log(steps), np.log(med))
    return ConvergenceReport(taus, steps, dev, epsilon, exceed / trials, np.asarray(lo), np.asarray(hi),
                             float(fit.slope), float(fit.stderr))


# -- Gaussian surrogate -----------------------------------------------------------

@dataclass(frozen=True)
class SurrogateComparison:
    steps: int
    ks_element: float
    ks_fidelity: float
    trials: int


def gaussian_surrogate(instance: TheoremInstance, tau: float, trials: int, seed: int = 0,
                       element=(0, 0), probe: np.ndarray | None = None,
                       surrogate_trials: int | None = None) -> SurrogateComparison:
    """KS distance between U_N and exp[-i(H0 + eta V/sqrt(N)) t], eta ~ N(0, var(xi)).

    Compared quantities: Re U[element] and the survival probability of ``probe``
    (default: uniform superposition).
    """
    n = instance.steps(tau)
    dim = instance.dim
    if probe is None:
        probe = np.ones(dim) / math.sqrt(dim)
    surrogate_trials = surrogate_trials or 20 * trials
    a, b = element

    def observe(u):
        return u[a, b].real, abs(np.vdot(probe, u @ probe)) ** 2

    emp = np.array([
        observe(product_unitary(instance, tau, np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0, k)))))
        for k in range(trials)
    ])
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1,)))
    eta = math.sqrt(instance.noise.variance) * rng.standard_normal(surrogate_trials)
    stack = instance.h0[None] + (eta / math.sqrt(n))[:, None, None] * instance.v[None]
    us = _expm_stack(stack, instance.t)
    sur = np.array([observe(u) for u in us])
    ks_el = sstats.ks_2samp(emp[:, 0], sur[:, 0]).statistic
    ks_f = sstats.ks_2samp(emp[:, 1], sur[:, 1]).statistic
    return SurrogateComparison(n, float(ks_el), float(ks_f), trials)


# -- averaged and Zeno perturbations ---------------------------------------------

def averaged_perturbation(h0: np.ndarray, v: np.ndarray, tau: float) -> np.ndarray:
    """(1/tau) int_0^tau e^{i H0 s} V e^{-i H0 s} ds, evaluated in the eigenbasis of H0."""
    lam, w = np.linalg.eigh(h0)
    vt = w.conj().T @ v @ w
    if tau == 0:
        return v.copy()
    omega = lam[:, None] - lam[None, :]
    # mean of exp(i omega s) over [0, tau]
    half = omega * tau / 2
    factor = np.exp(1j * half) * np.sinc(half / np.pi)
    out = w @ (vt * factor) @ w.conj().T
    return (out + out.conj().T) / 2


def eigen_clusters(h0: np.ndarray, tol: float = 1e-9, ambiguity: float = 1e-6):
    """Group eigenvalues closer than ``tol``; reject gaps in (tol, ambiguity]."""
    lam, w = np.linalg.eigh(h0)
    gaps = np.diff(lam)
    bad = (gaps > tol) & (gaps <= ambiguity)
    if bad.any():
        raise AmbiguousSpectrumError(
            f"{int(bad.sum())} eigenvalue gaps between {tol:g} and {ambiguity:g}; "
            f"smallest {gaps[bad].min():.3e}", gaps[bad])
    cuts = np.flatnonzero(gaps > tol) + 1
    return lam, w, np.split(np.arange(len(lam)), cuts)


def zeno_projection(h0: np.ndarray, v: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """sum_k P_k V P_k over the eigenprojections P_k of H0."""
    _, w, clusters = eigen_clusters(h0, tol)
    out = np.zeros_like(v, dtype=complex)
    for idx in clusters:
        p = w[:, idx] @ w[:, idx].conj().T
        out += p @ v @ p
    return out


def noise_quadratic_form(ops, state: np.ndarray, variance: float) -> float:
    """E_eta <psi|(eta . V)^2|psi> for independent zero-mean eta_l of equal variance."""
    total = 0.0
    for op in ops:
        phi = op @ state
        total += variance * float(np.real(np.vdot(phi, phi)))
    return total


def commutator_norm(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a @ b - b @ a)))


def matrix_exp_check(h: np.ndarray, t: float) -> float:
    """Max deviation between eigh-based and Pade-based exponentials (diagnostic)."""
    return float(np.max(np.abs(expm_hermitian(h, t) - scipy.linalg.expm(-1j * t * h))))
