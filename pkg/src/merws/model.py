"""Parameters, derived constants and regime classification of the walk.

The walk is parametrised by the dimension ``d``, the probability ``p`` of
repeating a remembered step, and the stop probability ``r``.  The probability
``q`` of each of the ``2d - 1`` other signed directions follows from
``p + (2d - 1) q + r = 1``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .errors import RejectsDimension, RejectsSimplex, RejectsStop, WrongRegime

SIMPLEX_TOL = 1e-12
CRITICAL_TOL = 1e-12


class Regime(str, enum.Enum):
    DIFFUSIVE = "diffusive"
    CRITICAL = "critical"
    SUPERDIFFUSIVE = "superdiffusive"


def critical_probability(d: int, r: float) -> float:
    """Memory probability at which the walk changes regime: (2d+1)(1-r)/(4d)."""
    return (2 * d + 1) * (1.0 - r) / (4 * d)


@dataclass(frozen=True)
class ModelParams:
    d: int
    p: float
    q: float
    r: float
    a: float
    b: float
    p_crit: float
    regime: Regime

    @property
    def n_directions(self) -> int:
        return 2 * self.d

    def as_dict(self) -> dict:
        return {"d": self.d, "p": self.p, "r": self.r}


def _regime_from_gap(gap: float) -> Regime:
    if abs(gap) <= CRITICAL_TOL:
        return Regime.CRITICAL
    return Regime.DIFFUSIVE if gap < 0 else Regime.SUPERDIFFUSIVE


def derive_params(d: int, p: float, r: float, *, allow_no_stop: bool = False) -> ModelParams:
    """Validate ``(d, p, r)`` and fill in ``q``, ``a``, ``b``, ``p_crit`` and the regime.

    ``allow_no_stop`` admits ``r = 0`` (the classical elephant walk) for
    cross-checks; Mittag-Leffler experiments are meaningless in that case.
    """
    if int(d) != d or d < 1:
        raise RejectsDimension(f"dimension must be an integer >= 1, got {d!r}")
    d = int(d)
    p = float(p)
    r = float(r)
    lower_ok = r >= 0.0 if allow_no_stop else r > 0.0
    if not (lower_ok and r < 1.0):
        raise RejectsStop(f"stop probability must lie in (0, 1), got {r!r}")
    if not 0.0 <= p <= 1.0:
        raise RejectsSimplex(f"p must lie in [0, 1], got {p!r}")
    q = (1.0 - p - r) / (2 * d - 1)
    if -SIMPLEX_TOL <= q < 0.0:
        q = 0.0
    if not 0.0 <= q <= 1.0:
        raise RejectsSimplex(
            f"implied q = (1 - p - r)/(2d - 1) = {q!r} is outside [0, 1]"
        )
    a = p - q
    b = 1.0 - r
    p_crit = critical_probability(d, r)
    regime = _regime_from_gap(2.0 * a - b)
    return ModelParams(d=d, p=p, q=q, r=r, a=a, b=b, p_crit=p_crit, regime=regime)


def params_for_regime(d: int, r: float, regime: Regime | str) -> ModelParams:
    """Pick ``p`` so that the walk sits in ``regime``.

    Critical solves ``p = p_crit`` exactly.  The other two regimes sit half-way
    between ``p_crit`` and the largest admissible ``p = 1 - r`` (mirrored
    below ``p_crit`` for the diffusive case).
    """
    regime = Regime(regime)
    pc = critical_probability(d, r)
    delta = 0.5 * ((1.0 - r) - pc)
    p = {Regime.CRITICAL: pc, Regime.DIFFUSIVE: pc - delta, Regime.SUPERDIFFUSIVE: pc + delta}[regime]
    params = derive_params(d, p, r)
    if regime is Regime.CRITICAL and params.regime is not Regime.CRITICAL:
        # rounding in q can leave |2a - b| just above tolerance; force the label
        params = ModelParams(**{**params.__dict__, "regime": Regime.CRITICAL})
    return params


def classify_regime(params: ModelParams) -> Regime:
    return _regime_from_gap(2.0 * params.a - params.b)


def classify_by_probability(params: ModelParams) -> Regime:
    """Same classification through ``p`` versus ``p_crit``.

    ``p - p_crit = (2d-1)(2a-b)/(4d)``, so the tolerance is rescaled to match
    the one used on ``2a - b``.
    """
    scale = (2 * params.d - 1) / (4 * params.d)
    gap = params.p - params.p_crit
    if abs(gap) <= CRITICAL_TOL * scale:
        return Regime.CRITICAL
    return Regime.DIFFUSIVE if gap < 0 else Regime.SUPERDIFFUSIVE


def diffusive_variance(params: ModelParams) -> float:
    """v^2 = b / (d (b - 2a)); only defined when 2a < b."""
    if classify_regime(params) is not Regime.DIFFUSIVE:
        raise WrongRegime(f"v^2 needs the diffusive regime, walk is {params.regime.value}")
    return params.b / (params.d * (params.b - 2.0 * params.a))


def superdiffusive_variance(params: ModelParams) -> float:
    """theta^2 = b / (d (2a - b)); only defined when 2a > b."""
    if classify_regime(params) is not Regime.SUPERDIFFUSIVE:
        raise WrongRegime(f"theta^2 needs the superdiffusive regime, walk is {params.regime.value}")
    return params.b / (params.d * (2.0 * params.a - params.b))


def asymptotic_variance(params: ModelParams) -> float:
    """Return v^2 or theta^2 according to the regime; critical walks have neither."""
    if params.regime is Regime.DIFFUSIVE:
        return diffusive_variance(params)
    if params.regime is Regime.SUPERDIFFUSIVE:
        return superdiffusive_variance(params)
    raise WrongRegime("the critical regime has no finite asymptotic variance")


def diffusive_variance_from_probabilities(params: ModelParams) -> float:
    d, r, p = params.d, params.r, params.p
    return (2 * d - 1) * (1 - r) / (d * ((2 * d + 1) * (1 - r) - 4 * d * p))


def superdiffusive_variance_from_probabilities(params: ModelParams) -> float:
    d, r, p = params.d, params.r, params.p
    return (2 * d - 1) * (1 - r) / (d * (4 * d * p - (2 * d + 1) * (1 - r)))
