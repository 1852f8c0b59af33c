"""Mittag-Leffler function, density, moments and sampler.

ML(alpha) is the positive law with Laplace transform ``E[exp(tX)] = E_alpha(t)``
and moments ``m! / Gamma(1 + m alpha)``.  The series for ``E_alpha`` and for
the density both lose digits to cancellation away from the origin, so they
are summed in multiprecision with a working precision chosen from the size of
the largest term, and every result carries a certified truncation bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import mpmath
import numpy as np

from .coefficients import log_gamma
from .errors import OutOfEvaluationRange

T_MAX = 50.0
TERM_CAP = 500
_GUARD_DIGITS = 20
_LOG_DOUBLE_MAX = 709.0


@dataclass(frozen=True)
class MLDistribution:
    alpha: float

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha!r}")

    def laplace(self, t: float) -> float:
        return ml_function(self.alpha, t)

    def pdf(self, x: float) -> float:
        return ml_pdf(self.alpha, x)

    def moment(self, m: int) -> float:
        return ml_moment(self.alpha, m)

    def sample(self, rng: np.random.Generator, size=None):
        return ml_sample(self.alpha, rng, size)


@lru_cache(maxsize=64)
def _context(dps: int) -> mpmath.ctx_mp.MPContext:
    # one private context per precision, never mutated afterwards
    ctx = mpmath.MPContext()
    ctx.dps = dps
    return ctx


def _dps_for(log10_scale: float) -> int:
    return int(math.ceil(max(log10_scale, 0.0))) + _GUARD_DIGITS


def ml_function(alpha: float, t: float, t_max: float = T_MAX, tol: float = 1e-15) -> float:
    """E_alpha(t) = sum_n t^n / Gamma(1 + n alpha).

    The series is certified when at most ``20 * TERM_CAP`` terms reach the
    truncation bound; for t < 0 that needs roughly |t|^(1/alpha) terms, so the
    certified range shrinks with alpha (about |t| <= 40 at alpha = 1/2).
    Positive arguments whose value leaves the double range are refused.
    """
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha!r}")
    if abs(t) > t_max:
        raise OutOfEvaluationRange(f"|t| = {abs(t)} exceeds the certified range {t_max}")
    if t == 0:
        return 1.0
    # log of term magnitudes, to size the precision and find the cut.  For t > 0
    # the sum exceeds its largest term, so the tail may be judged relative to
    # it; for t < 0 the sum is small and the tail must be small in absolute terms
    x = abs(t)
    log_x = math.log(x)
    log_terms = []
    n = 0
    while True:
        lt = n * log_x - math.lgamma(1 + n * alpha)
        log_terms.append(lt)
        if t > 0 and lt > _LOG_DOUBLE_MAX:
            raise OutOfEvaluationRange(f"E_{alpha}({t}) exceeds the double range")
        # log-convexity of Gamma: this term ratio decreases in n, so rho bounds the whole tail
        rho = x * math.exp(math.lgamma(1 + (n + 1) * alpha) - math.lgamma(1 + (n + 2) * alpha))
        next_lt = (n + 1) * log_x - math.lgamma(1 + (n + 1) * alpha)
        if rho < 1 and next_lt - math.log1p(-rho) < math.log(tol) + (max(0.0, max(log_terms)) if t > 0 else 0.0):
            break
        n += 1
        if n > 20 * TERM_CAP:
            raise OutOfEvaluationRange("E_alpha series did not reach its truncation bound")
    dps = _dps_for(max(log_terms) / math.log(10))
    ctx = _context(dps)
    tt = ctx.mpf(t)
    total = ctx.fsum(tt**k / ctx.gamma(1 + k * ctx.mpf(alpha)) for k in range(n + 1))
    return float(total)


@lru_cache(maxsize=32)
def _pdf_coefficients(alpha: float, dps: int) -> tuple:
    """Gamma(1 + alpha n) sin(alpha n pi) / n! for n = 1..TERM_CAP at ``dps`` digits."""
    ctx = _context(dps)
    al = ctx.mpf(alpha)
    return tuple(
        ctx.gamma(1 + al * n) * ctx.sinpi(al * n) / ctx.factorial(n) for n in range(1, TERM_CAP + 1)
    )


def _pdf_cut(alpha: float, x: float, tol: float) -> tuple[int, float]:
    """Number of terms whose omitted tail is below ``tol``, and log10 of the largest term."""
    log_x = math.log(x)
    best = -math.inf
    for n in range(1, TERM_CAP + 1):
        lm = math.lgamma(1 + alpha * n) + (n - 1) * log_x - math.lgamma(n + 1)
        best = max(best, lm)
        # Wendel: Gamma(1+a(n+1))/Gamma(1+an) <= (1+an)^a, so the majorant ratio is
        # at most x (1+an)^a / (n+1), which decreases in n
        rho = x * (1 + alpha * (n + 1)) ** alpha / (n + 2)
        next_lm = lm + log_x + alpha * math.log(1 + alpha * n) - math.log(n + 1)
        if rho < 1 and next_lm - math.log(1 - rho) < math.log(tol):
            return n, best / math.log(10)
    raise OutOfEvaluationRange(
        f"density series at x={x} needs more than {TERM_CAP} terms for alpha={alpha}"
    )


def ml_pdf(alpha: float, x: float, rel_tol: float = 1e-12) -> float:
    """Density f_alpha(x) = (1/(pi alpha)) sum_n Gamma(1+alpha n) sin(alpha n pi) (-x)^(n-1) / n!.

    Raises :class:`OutOfEvaluationRange` where neither the truncation nor the
    rounding error can be certified below ``rel_tol`` of the value.
    """
    if not 0 < alpha < 1:
        raise ValueError(f"the density needs alpha in (0, 1), got {alpha!r}")
    if not x > 0:
        raise OutOfEvaluationRange(f"the density is evaluated on x > 0, got {x!r}")
    tol = 1e-20
    n_terms, log10_max = _pdf_cut(alpha, x, tol)
    dps = _dps_for(log10_max) + 10
    for _ in range(12):
        value, abs_sum = _pdf_sum(alpha, x, n_terms, dps)
        rounding = abs_sum * n_terms * 10.0 ** (-dps + 2)
        if value > 0 and rounding <= rel_tol * value and tol <= rel_tol * value:
            return value
        if value > 0:
            target = rel_tol * value
        else:
            # the true density is positive: the value is below both error sources
            target = 1e-5 * max(tol, rounding)
        if tol > target:
            tol = 0.1 * target
            n_terms, _ = _pdf_cut(alpha, x, tol)
        if rounding > target:
            dps += int(math.ceil(math.log10(rounding / target))) + 5
    raise OutOfEvaluationRange(f"could not certify the density at x={x} for alpha={alpha}")


def _pdf_sum(alpha: float, x: float, n_terms: int, dps: int) -> tuple[float, float]:
    dps = int(10 * math.ceil(dps / 10))  # share coefficient caches across nearby precisions
    ctx = _context(dps)
    coeffs = _pdf_coefficients(alpha, dps)
    mx = -ctx.mpf(x)
    power = ctx.mpf(1)
    terms = []
    for n in range(1, n_terms + 1):
        terms.append(coeffs[n - 1] * power)
        power *= mx
    total = ctx.fsum(terms) / (ctx.pi * alpha)
    abs_sum = ctx.fsum(abs(t) for t in terms) / (ctx.pi * alpha)
    return float(total), float(abs_sum)


def ml_moment(alpha: float, m: int) -> float:
    """m! / Gamma(1 + m alpha)."""
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha!r}")
    if m < 0 or int(m) != m:
        raise ValueError(f"moment order must be a nonnegative integer, got {m!r}")
    return math.exp(log_gamma(m + 1) - log_gamma(1 + m * alpha))


def ml_sample(alpha: float, rng: np.random.Generator, size=None):
    """Draw from ML(alpha) as S^(-alpha), S one-sided alpha-stable with Laplace exp(-lambda^alpha).

    S comes from Kanter's representation ``S = (A(U)/W)^((1-alpha)/alpha)`` with
    U uniform on (0, pi), W standard exponential and
    ``A(u) = [sin(alpha u)^alpha sin((1-alpha) u)^(1-alpha) / sin u]^(1/(1-alpha))``,
    so that ``S^(-alpha) = (W / A(U))^(1-alpha)``.  Evaluated in logs, which keeps
    alpha close to 1 finite.
    """
    if not 0 < alpha < 1:
        raise ValueError(f"the sampler needs alpha in (0, 1), got {alpha!r}")
    u = np.pi * (1.0 - rng.random(size))
    w = rng.standard_exponential(size)
    log_a_scaled = (
        alpha * np.log(np.sin(alpha * u))
        + (1 - alpha) * np.log(np.sin((1 - alpha) * u))
        - np.log(np.sin(u))
    )
    out = np.exp((1 - alpha) * np.log(w) - log_a_scaled)
    return float(out) if size is None else out
