"""Closed-form and quadrature predictions for the O(J^2) error.

The segment kernel

    g(tau) = 2 int_0^tau ds int_0^s du sinc^2(delta u) [n_ud + n_uu cos(4 delta0 u)]

is evaluated after swapping the integration order, which turns it into the
single integral 2 int_0^tau (tau - u) sinc^2(delta u) [...] du.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import ConfigError, NumericalError
from .lattice import ModelParams
from .noise import split_horizon

EULER_GAMMA = 0.5772156649015329
DEFAULT_EPSILON = 1.0 / 40.0

REGIMES = ("pre-kink", "linear", "ergodic-saturating", "fgr-saturated")


def _sinc2(x):
    return np.sinc(x / np.pi) ** 2


def _quad(f, a, b, epsabs, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(f, a, b, epsabs=epsabs, epsrel=1e-12, limit=1000, **kw)
        except integrate.IntegrationWarning as exc:
            raise NumericalError(f"quadrature did not converge on [{a}, {b}]: {exc}") from exc
    return val


def g_tau(tau: float, delta: float, delta0: float = 1.0, n_ud: float = 1, n_uu: float = 0,
          epsabs: float = 1e-10) -> float:
    if tau < 0:
        raise ConfigError(f"tau must be non-negative, got {tau}")
    if tau == 0:
        return 0.0
    total = 0.0
    if n_ud:
        total += n_ud * _quad(lambda u: (tau - u) * _sinc2(delta * u), 0.0, tau, epsabs)
    if n_uu:
        freq = 4.0 * delta0
        if freq > 0:
            part = _quad(lambda u: (tau - u) * _sinc2(delta * u), 0.0, tau, epsabs,
                         weight="cos", wvar=freq)
        else:
            part = _quad(lambda u: (tau - u) * _sinc2(delta * u), 0.0, tau, epsabs)
        total += n_uu * part
    return 2.0 * total


def g_tau_limit_small(tau: float, delta0: float, n_ud: float, n_uu: float) -> float:
    """g for delta*tau << 1 (exact at delta = 0)."""
    return tau**2 * (n_ud + n_uu * float(_sinc2(2.0 * delta0 * tau)))


def g_tau_limit_fgr(tau: float, delta: float, n_ud: float) -> float:
    """Asymptotic g for delta*tau >> 1.

    Uses int_0^X sin^2(x)/x^2 dx -> pi/2 - 1/(2X) and
    int_0^X sin^2(x)/x dx -> (ln(2X) + gamma)/2, giving
    (n_ud/delta^2) [pi delta tau - ln(2 delta tau) - gamma - 1].
    """
    x = delta * tau
    return n_ud / delta**2 * (math.pi * x - math.log(2.0 * x) - EULER_GAMMA - 1.0)


def g_tau_correction(tau: float, delta: float, n_ud: float) -> float:
    """g with the first correction sinc^2(x) ~ 1 - x^2/3 kept."""
    x = delta * tau
    if delta == 0:
        return n_ud * tau**2
    return n_ud / delta**2 * (x**2 - x**4 / 18.0)


def predicted_error(t: float, tau: float, params: ModelParams, n_ud: float, n_uu: float) -> float:
    """4 J^2 sigma^2 (N g(tau) + g(dt)) with t = N tau + dt."""
    if t < 0:
        raise ConfigError("t must be non-negative")
    if params.bigJ == 0 or t == 0:
        return 0.0
    n_full, remainder = split_horizon(t, tau)
    g_full = g_tau(tau, params.delta, params.delta0, n_ud, n_uu) if n_full else 0.0
    g_rest = g_tau(remainder, params.delta, params.delta0, n_ud, n_uu)
    return 4.0 * params.bigJ**2 * params.sigma2 * (n_full * g_full + g_rest)


def tau_p(delta0: float = 1.0) -> float:
    return math.pi / (4.0 * delta0)


def tau_c(t: float, delta: float, epsilon: float = DEFAULT_EPSILON) -> float:
    """Period at which the quartic correction reaches a fraction epsilon of the plot range."""
    if t <= 0 or epsilon <= 0:
        raise ConfigError("t and epsilon must be positive")
    if delta == 0:
        return math.inf
    return (18.0 * epsilon * t) ** (1.0 / 3.0) / delta ** (2.0 / 3.0)


def scaling_slopes(params: ModelParams, n_c: int, n_ud: int, t: float) -> dict[str, float]:
    """Slopes dE/dtau in the first three regimes and the FGR plateau of E."""
    pref = 4.0 * params.bigJ**2 * params.sigma2 * t
    return {
        "pre_kink": pref * n_c,
        "linear": pref * n_ud,
        "ergodic": pref * n_ud,
        "fgr_plateau": pref * n_ud * math.pi / params.delta if params.delta > 0 else math.inf,
    }


def zeno_coefficients(params: ModelParams, n_c: int, n_ud: int, t: float = 1.0, v_norm: float = 1.0):
    """Return ``(1/tau_Z^2, Gamma_erg, eps_eff)`` where ``eps_eff(tau)`` is the
    effective noise strength sigma ||V|| / sqrt(N) at N = t / tau."""
    sigma = math.sqrt(params.sigma2)
    inv_tau_z2 = 4.0 * params.bigJ**2 * n_c * params.sigma2
    gamma_erg = 4.0 * params.bigJ**2 * n_ud * params.sigma2

    def eps_eff(tau):
        return sigma * v_norm * np.sqrt(np.asarray(tau, dtype=float) / t)

    return inv_tau_z2, gamma_erg, eps_eff


def is_fgr(params: ModelParams, n_qubits: int) -> bool:
    """Weak coupling J < J_c ~ delta / n."""
    return params.bigJ < params.delta / n_qubits


def classify_regime(tau: float, tp: float, tc: float, fgr: bool) -> str:
    if tau < tp:
        return "pre-kink"
    if tau < tc:
        return "linear"
    return "fgr-saturated" if fgr else "ergodic-saturating"


@dataclass(frozen=True)
class AnalyticPrediction:
    g_value: float
    E_predicted: float
    regime: str
    tau_p: float
    tau_c: float


def predict(t: float, tau: float, params: ModelParams, n_ud: int, n_uu: int, n_qubits: int,
            epsilon: float = DEFAULT_EPSILON) -> AnalyticPrediction:
    tp = tau_p(params.delta0)
    tc = tau_c(t, params.delta, epsilon)
    g = g_tau(tau, params.delta, params.delta0, n_ud, n_uu)
    return AnalyticPrediction(
        g_value=g,
        E_predicted=predicted_error(t, tau, params, n_ud, n_uu),
        regime=classify_regime(tau, tp, tc, is_fgr(params, n_qubits)),
        tau_p=tp,
        tau_c=tc,
    )

