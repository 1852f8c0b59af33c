"""Exact finite-n moments and an exhaustive small-horizon law of the walk.

Everything here is independent of the simulation code: moments come from the
closed recursions for E[sigma_n^2] and E[S_n S_n^T], and the exact law comes
from expanding every branch of the dynamics with rational probabilities.
"""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .coefficients import log_gamma
from .errors import TooLarge, WrongRegime
from .model import ModelParams, Regime, superdiffusive_variance

MAX_ENUM_N = 6
MAX_ENUM_D = 2


@dataclass(frozen=True)
class MomentTable:
    n: int
    d: int
    e_sigma2: float
    e_gram_diag: float
    e_outer_diag: float

    def outer_matrix(self) -> np.ndarray:
        return self.e_outer_diag * np.eye(self.d)


def inverse_normalizer(x: float, n_max: int) -> np.ndarray:
    """``1 / x_n = prod_{k<n} (1 + x/k)`` for n = 0..n_max; entry 0 is 1."""
    out = np.empty(n_max + 1)
    out[0] = out[1] = 1.0
    k = np.arange(1, n_max, dtype=np.float64)
    out[2:] = np.cumprod(1.0 + x / k)
    return out


def expected_sigma2(params: ModelParams, n: int) -> float:
    """E[sigma_n^2] = 1 / b_n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return float(inverse_normalizer(params.b, n)[n])


def expected_sigma2_sequence(params: ModelParams, n_max: int) -> np.ndarray:
    return inverse_normalizer(params.b, n_max)


def expected_sigma2_gamma(params: ModelParams, n: int) -> float:
    """Same value through log-gamma: Gamma(n+b) / (Gamma(n) Gamma(b+1))."""
    b = params.b
    return math.exp(log_gamma(n + b) - log_gamma(n) - log_gamma(b + 1))


def outer_diag_sequence(params: ModelParams, n_max: int) -> np.ndarray:
    """Diagonal entry s_n of E[S_n S_n^T] for n = 0..n_max (entry 0 is 0).

    s_1 = 1/d and s_{n+1} = (1 + 2a/n) s_n + (a/n) / (d b_n) + (2q/n) / b_n.
    """
    a, q, d = params.a, params.q, params.d
    inv_b = inverse_normalizer(params.b, n_max)
    s = np.zeros(n_max + 1)
    s[1] = 1.0 / d
    acc = 1.0 / d
    for n in range(1, n_max):
        acc = (1.0 + 2.0 * a / n) * acc + (a / n) * inv_b[n] / d + (2.0 * q / n) * inv_b[n]
        s[n + 1] = acc
    return s


def expected_outer(params: ModelParams, n: int) -> MomentTable:
    if n < 1:
        raise ValueError("n must be >= 1")
    s = outer_diag_sequence(params, n)
    e_sigma2 = expected_sigma2(params, n)
    return MomentTable(n=n, d=params.d, e_sigma2=e_sigma2, e_gram_diag=e_sigma2 / params.d, e_outer_diag=float(s[n]))


def expected_outer_closed_form(params: ModelParams, n: int) -> float:
    """Closed solution of the recursion, valid whenever 2a != b.

    Written as ``(2a (2a)^(n)/(2a (n-1)!) - b (b)^(n)/(b (n-1)!)) / (d (2a - b))``
    with both rising-factorial ratios built as products, which also covers a = 0.
    """
    a2, b, d = 2.0 * params.a, params.b, params.d
    if abs(a2 - b) <= 1e-12:
        raise WrongRegime("the closed form degenerates at 2a = b")
    ra = _rising_over_factorial(a2, n)
    rb = _rising_over_factorial(b, n)
    return (ra - rb) / (d * (a2 - b))


def _rising_over_factorial(x: float, n: int) -> float:
    # (x)^(n) / (n-1)! = x prod_{k=1}^{n-1} (1 + x/k), fine for any real x
    return x * float(np.prod(1.0 + x / np.arange(1, n, dtype=np.float64)))


@dataclass(frozen=True)
class ScaledIdentity:
    d: int
    scale: float

    def matrix(self) -> np.ndarray:
        return self.scale * np.eye(self.d)


def expected_L_covariance(params: ModelParams) -> ScaledIdentity:
    """E[L L^T] = theta^2 / ((1 - r) Gamma(2a)) I_d for the superdiffusive limit L."""
    if params.regime is not Regime.SUPERDIFFUSIVE:
        raise WrongRegime(f"L exists only in the superdiffusive regime, walk is {params.regime.value}")
    theta2 = superdiffusive_variance(params)
    return ScaledIdentity(params.d, theta2 / ((1.0 - params.r) * math.exp(log_gamma(2 * params.a))))


def expected_L_covariance_direct(params: ModelParams) -> float:
    """Second form 1 / (d (2a - b) Gamma(2a))."""
    if params.regime is not Regime.SUPERDIFFUSIVE:
        raise WrongRegime("L exists only in the superdiffusive regime")
    a, b, d = params.a, params.b, params.d
    return 1.0 / (d * (2 * a - b) * math.exp(log_gamma(2 * a)))


def superdiffusive_outer_limit(params: ModelParams, n: int) -> float:
    """n^(-2a) s_n, which tends to the diagonal of E[L L^T]."""
    return float(outer_diag_sequence(params, n)[n]) / n ** (2 * params.a)


# -- exhaustive enumeration --------------------------------------------------


@dataclass(frozen=True)
class ExactLaw:
    """Exact joint law of (S_n, gram diagonal) at a fixed time n.

    ``probabilities`` maps ``(position, gram_diag)`` tuples to exact rationals.
    """

    params: ModelParams
    n: int
    probabilities: dict

    def total_mass(self) -> Fraction:
        return sum(self.probabilities.values(), Fraction(0))

    def position_sigma2_law(self) -> dict:
        out: dict = defaultdict(Fraction)
        for (pos, gram), pr in self.probabilities.items():
            out[(pos, sum(gram))] += pr
        return dict(out)

    def expected_sigma2(self) -> float:
        return float(sum(pr * sum(gram) for (_, gram), pr in self.probabilities.items()))

    def expected_gram(self) -> np.ndarray:
        d = self.params.d
        tot = [Fraction(0)] * d
        for (_, gram), pr in self.probabilities.items():
            for i in range(d):
                tot[i] += pr * gram[i]
        return np.array([float(t) for t in tot])

    def expected_outer(self) -> np.ndarray:
        d = self.params.d
        tot = [[Fraction(0)] * d for _ in range(d)]
        for (pos, _), pr in self.probabilities.items():
            for i in range(d):
                for j in range(d):
                    tot[i][j] += pr * pos[i] * pos[j]
        return np.array([[float(x) for x in row] for row in tot])

    def rows(self) -> list[tuple]:
        """``(S_1..S_d, sigma2, probability)`` rows sorted by key."""
        law = self.position_sigma2_law()
        return [(*pos, s2, float(pr)) for (pos, s2), pr in sorted(law.items())]

    def write_csv(self, path) -> None:
        d = self.params.d
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"S_{i + 1}" for i in range(d)] + ["sigma2", "probability"])
            for row in self.rows():
                writer.writerow([*row[:-1], format(row[-1], ".17g")])


def enumerate_distribution(params: ModelParams, n: int, max_n: int = MAX_ENUM_N) -> ExactLaw:
    """Expand every first step, memory index and memory outcome up to time n.

    Histories are merged by their step-count vector, which determines every
    later transition; each remembered step is still weighted individually
    (count / n), so this is the same sum as iterating over U.
    """
    if params.d > MAX_ENUM_D or n > max_n:
        raise TooLarge(f"enumeration supports d <= {MAX_ENUM_D} and n <= {max_n}, got d={params.d}, n={n}")
    if n < 1:
        raise ValueError("n must be >= 1")
    d = params.d
    n_codes = 2 * d + 1
    p = Fraction(params.p)
    r = Fraction(params.r)
    q = (1 - p - r) / (2 * d - 1)

    start: dict = defaultdict(Fraction)
    for code in range(1, n_codes):
        counts = [0] * n_codes
        counts[code] = 1
        start[tuple(counts)] += Fraction(1, 2 * d)
    states = start
    for t in range(1, n):
        nxt: dict = defaultdict(Fraction)
        for counts, pr in states.items():
            for code, c in enumerate(counts):
                if c == 0:
                    continue
                w = pr * Fraction(c, t)
                if code == 0:
                    _bump(nxt, counts, 0, w)
                    continue
                for out in range(n_codes):
                    if out == 0:
                        weight = r
                    elif out == code:
                        weight = p
                    else:
                        weight = q
                    if weight:
                        _bump(nxt, counts, out, w * weight)
        states = nxt

    law: dict = defaultdict(Fraction)
    for counts, pr in states.items():
        pos = tuple(counts[1 + 2 * i] - counts[2 + 2 * i] for i in range(d))
        gram = tuple(counts[1 + 2 * i] + counts[2 + 2 * i] for i in range(d))
        law[(pos, gram)] += pr
    return ExactLaw(params=params, n=n, probabilities=dict(law))


def _bump(table: dict, counts: tuple, code: int, weight: Fraction) -> None:
    new = list(counts)
    new[code] += 1
    table[tuple(new)] += weight
