"""Deterministic normalizers and sums built from rising factorials.

``a_n = Gamma(n) Gamma(a+1) / Gamma(n+a)`` normalizes the position martingale
``a_n S_n``; ``b_n`` is the same sequence with parameter ``b`` and normalizes
``b_n sigma_n^2``.  Both are built by the recurrence
``x_{n+1} = x_n * n / (n + x)`` and never through gamma ratios, which overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from numba import njit
from scipy.special import zeta

from .errors import NegativeIncrement, NonPositiveArgument
from .model import ModelParams, Regime

COMPENSATED_THRESHOLD = 10**7


# log Gamma(1 + z) = -euler z + sum_{k>=2} (-1)^k zeta(k) z^k / k for |z| < 1
_NEAR_ROOT = 0.2
_SERIES = [0.0, -float(np.euler_gamma)] + [(-1) ** k * float(zeta(k)) / k for k in range(2, 40)]


def _log_gamma_one_plus(z: float) -> float:
    acc = 0.0
    for c in reversed(_SERIES):
        acc = acc * z + c
    return acc


def log_gamma(x: float) -> float:
    """log Gamma(x) for x > 0.

    ``math.lgamma`` loses relative accuracy near the zeros at x = 1 and x = 2,
    where the Taylor series of log Gamma(1 + z) is used instead.
    """
    if not x > 0:
        raise NonPositiveArgument(f"log_gamma needs x > 0, got {x!r}")
    if abs(x - 1.0) < _NEAR_ROOT:
        return _log_gamma_one_plus(x - 1.0)
    if abs(x - 2.0) < _NEAR_ROOT:
        z = x - 2.0
        return math.log1p(z) + _log_gamma_one_plus(z)
    return math.lgamma(x)


@njit(cache=True)
def _compensated_normalizer(x, n_max):
    # exp of a Neumaier-compensated running sum of log(k / (k + x))
    out = np.empty(n_max + 1)
    out[0] = 1.0
    out[1] = 1.0
    s = 0.0
    c = 0.0
    for k in range(1, n_max):
        term = -np.log1p(x / k)
        t = s + term
        if abs(s) >= abs(term):
            c += (s - t) + term
        else:
            c += (term - t) + s
        s = t
        out[k + 1] = np.exp(s + c)
    return out


def rising_normalizer(x: float, n_max: int, compensated: bool | None = None) -> np.ndarray:
    """Array ``out`` with ``out[n] = Gamma(n) Gamma(x+1) / Gamma(n+x)`` for n = 0..n_max (out[0] = 1)."""
    if x <= -1:
        raise ValueError(f"the normalizer needs x > -1, got {x!r}")
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if compensated is None:
        compensated = n_max > COMPENSATED_THRESHOLD
    if compensated:
        return _compensated_normalizer(float(x), int(n_max))
    out = np.empty(n_max + 1)
    out[0] = out[1] = 1.0
    k = np.arange(1, n_max, dtype=np.float64)
    out[2:] = np.cumprod(k / (k + x))
    return out


@dataclass(frozen=True)
class CoeffTable:
    """Normalizer sequences indexed by time: ``a_seq[n]`` is a_n (index 0 holds a_0 = 1)."""

    a: float
    b: float
    a_seq: np.ndarray
    b_seq: np.ndarray

    @property
    def horizon(self) -> int:
        return self.a_seq.shape[0] - 1

    @property
    def alpha_seq(self) -> np.ndarray:
        """alpha_n = 1 + a/n for n = 1..N (index 0 is NaN)."""
        n = np.arange(self.horizon + 1, dtype=np.float64)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = 1.0 + self.a / n
        out[0] = np.nan
        return out


def coeff_table(a: float, b: float, n_max: int, compensated: bool | None = None) -> CoeffTable:
    if not a > -1:
        raise ValueError(f"a must exceed -1, got {a!r}")
    if not 0 < b < 1:
        raise ValueError(f"b must lie in (0, 1), got {b!r}")
    return CoeffTable(
        a=a,
        b=b,
        a_seq=rising_normalizer(a, n_max, compensated),
        b_seq=rising_normalizer(b, n_max, compensated),
    )


def normalizer_by_gamma(x: float, n: int) -> float:
    return math.exp(log_gamma(n) + log_gamma(x + 1) - log_gamma(n + x))


def asymptote_slack(x: float) -> float:
    return 2 * abs(x * (x - 1)) + 1


# -- v_n and its asymptotes ------------------------------------------------


@dataclass(frozen=True)
class VnReport:
    """Partial sums ``v[n]`` (index 0 unused) with the regime-appropriate limit.

    ``normalized`` is v_N / N^(b-2a) (diffusive), v_N / log N (critical) or v_N
    (superdiffusive); ``limit`` is the value it should approach.  For the
    superdiffusive regime ``limit`` is an estimate of v_inf certified to lie in
    ``limit_bounds``.
    """

    regime: Regime
    v: np.ndarray
    normalized: float
    limit: float
    limit_bounds: tuple[float, float] | None = None

    @property
    def relative_gap(self) -> float:
        return abs(self.normalized - self.limit) / abs(self.limit)


def vn_terms(a: float, b: float, n_max: int) -> np.ndarray:
    """Terms ``a_k^2 / (k b_k)`` for k = 1..n_max, returned with a leading 0 at index 0."""
    a_seq = rising_normalizer(a, n_max)
    b_seq = rising_normalizer(b, n_max)
    k = np.arange(n_max + 1, dtype=np.float64)
    terms = np.zeros(n_max + 1)
    terms[1:] = a_seq[1:] ** 2 / (k[1:] * b_seq[1:])
    return terms


def limit_diffusive(a: float, b: float) -> float:
    """Limit of v_n / n^(b - 2a) when 2a < b."""
    return math.exp(2 * log_gamma(a + 1) - log_gamma(b + 1)) / (b - 2 * a)


def limit_critical(a: float) -> float:
    """Limit of v_n / log n when 2a = b."""
    return math.exp(2 * log_gamma(a + 1) - log_gamma(2 * a + 1))


def superdiffusive_tail_majorant(a: float, b: float, n: int) -> float:
    """Upper bound on ``v_inf - v_n`` for 2a > b.

    Wendel's inequality bounds each omitted term by
    ``Gamma(a+1)^2/Gamma(b+1) * (1 + a/(k+1))^(2(1-a)) * (k+1)^(-gamma)`` with
    ``gamma = 2a - b + 1 > 1``; the sum over k >= n is then dominated by an
    integral.
    """
    if not 2 * a > b:
        raise ValueError("the tail of v_n is finite only when 2a > b")
    if not 0 <= a < 1:
        raise ValueError("the majorant assumes 0 <= a < 1")
    gamma = 2 * a - b + 1
    c = math.exp(2 * log_gamma(a + 1) - log_gamma(b + 1))
    return c * (1 + a / (n + 1)) ** (2 * (1 - a)) * n ** (1 - gamma) / (gamma - 1)


def superdiffusive_limit(a: float, b: float, n_terms: int = 10**6) -> tuple[float, float, float]:
    """Estimate of v_inf with a certified bracket ``(estimate, lower, upper)``.

    The partial sum over ``n_terms`` terms is a lower bound, adding the tail
    majorant gives an upper bound, and the estimate adds the integral
    approximation of the tail.
    """
    terms = vn_terms(a, b, n_terms)
    partial = math.fsum(terms)
    majorant = superdiffusive_tail_majorant(a, b, n_terms)
    gamma = 2 * a - b + 1
    # next term t_N ~ C N^-gamma: tail ~ t_N (N / (gamma - 1) + 1/2)
    a_next = rising_normalizer(a, n_terms + 1)[-1]
    b_next = rising_normalizer(b, n_terms + 1)[-1]
    t_next = a_next**2 / ((n_terms + 1) * b_next)
    estimate = partial + t_next * ((n_terms + 1) / (gamma - 1) + 0.5)
    return estimate, partial, partial + majorant


def vn_sequence(params: ModelParams, n_max: int) -> VnReport:
    a, b = params.a, params.b
    terms = vn_terms(a, b, n_max)
    v = np.cumsum(terms)
    v_n = float(v[-1])
    if params.regime is Regime.DIFFUSIVE:
        return VnReport(params.regime, v, v_n / n_max ** (b - 2 * a), limit_diffusive(a, b))
    if params.regime is Regime.CRITICAL:
        return VnReport(params.regime, v, v_n / math.log(n_max), limit_critical(a))
    estimate, lower, upper = superdiffusive_limit(a, b, max(n_max, 10**6))
    return VnReport(params.regime, v, v_n, estimate, (lower, upper))


# -- predictable quadratic variation (trace form) --------------------------


@dataclass(frozen=True)
class QVState:
    """Running w_n, v_n and trace of <M>_n (without its initial identity/d term) at time n.

    ``a_n`` and ``b_n`` are carried so the next normalizers follow by recurrence.
    """

    n: int
    a_n: float
    b_n: float
    w: float
    v: float
    qv_trace: float


def initial_qv_state() -> QVState:
    # sigma_1^2 = 1 and a_1 = b_1 = 1
    return QVState(n=1, a_n=1.0, b_n=1.0, w=1.0, v=1.0, qv_trace=0.0)


def qv_trace_step(state: QVState, n: int, sigma2: int, s_norm2: int, a: float, b: float) -> QVState:
    """Add the trace of ``a_{n+1}^2 E[eps_{n+1} eps_{n+1}^T | F_n]`` and move to time n+1.

    ``w`` is left at its time-n value; call :func:`qv_record_sigma2` with
    sigma_{n+1}^2 once the step is taken.
    """
    if n != state.n:
        raise ValueError(f"state is at time {state.n}, got inputs for time {n}")
    a_next = state.a_n * n / (n + a)
    b_next = state.b_n * n / (n + b)
    inc = a_next * a_next * ((b / n) * sigma2 - (a / n) ** 2 * s_norm2)
    if inc < -1e-12 * a_next * a_next * (b / n) * max(sigma2, 1):
        raise NegativeIncrement(
            f"conditional covariance trace {inc!r} < 0 at n={n} (sigma2={sigma2}, |S|^2={s_norm2})"
        )
    return replace(
        state,
        n=n + 1,
        a_n=a_next,
        b_n=b_next,
        v=state.v + a_next * a_next / ((n + 1) * b_next),
        qv_trace=state.qv_trace + max(inc, 0.0),
    )


def qv_record_sigma2(state: QVState, sigma2: int) -> QVState:
    """Fold a_n^2 sigma_n^2 / n into w for the state's current time."""
    return replace(state, w=state.w + state.a_n**2 * sigma2 / state.n)
