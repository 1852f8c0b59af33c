"""Ensemble runs and the statistical checks of the limit theorems.

An :class:`EnsembleSummary` keeps the raw checkpoint records of every
trajectory, ordered by trajectory index, and derives every statistic from
them.  Merging two summaries concatenates the records, so a merged summary is
identical to the one produced by a single run over the union of indices, and
the statistics never depend on how trajectories were scheduled.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats as sps

from . import _kernels
from .coefficients import rising_normalizer
from .errors import InsufficientHorizon, WrongRegime
from .mittag import ml_moment, ml_sample
from .model import ModelParams, Regime, diffusive_variance, superdiffusive_variance
from .oracle import (
    ExactLaw,
    expected_L_covariance,
    expected_outer,
    expected_sigma2,
    outer_diag_sequence,
)
from .walk import geometric_checkpoints, simulate_records, validate_checkpoints

CHUNK_SIZE = 256


@dataclass
class EnsembleSummary:
    params: ModelParams
    n_steps: int
    checkpoints: np.ndarray
    positions: np.ndarray
    grams: np.ndarray
    seed: int
    traj_start: int = 0
    generator: str = _kernels.GENERATOR_NAME
    w: np.ndarray | None = None
    qv: np.ndarray | None = None

    @property
    def n_traj(self) -> int:
        return self.positions.shape[0]

    def index(self, n: int) -> int:
        hits = np.flatnonzero(self.checkpoints == n)
        if hits.size == 0:
            raise KeyError(f"time {n} is not a recorded checkpoint")
        return int(hits[0])

    def position(self, n: int) -> np.ndarray:
        return self.positions[:, self.index(n), :]

    def gram(self, n: int) -> np.ndarray:
        return self.grams[:, self.index(n), :]

    def sigma2(self, n: int) -> np.ndarray:
        return self.gram(n).sum(axis=1)

    # -- moments ---------------------------------------------------------

    def mean_position(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Mean of S_n and its standard error, per coordinate."""
        s = self.position(n).astype(np.float64)
        return s.mean(axis=0), s.std(axis=0, ddof=1) / math.sqrt(self.n_traj)

    def position_covariance(self, n: int) -> np.ndarray:
        return np.atleast_2d(np.cov(self.position(n).astype(np.float64), rowvar=False))

    def second_moment(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Raw E[S_n S_n^T] and the standard error of each entry."""
        s = self.position(n).astype(np.float64)
        prods = s[:, :, None] * s[:, None, :]
        return prods.mean(axis=0), prods.std(axis=0, ddof=1) / math.sqrt(self.n_traj)

    def sigma2_stats(self, n: int) -> dict:
        x = self.sigma2(n).astype(np.float64)
        return {
            "mean": float(x.mean()),
            "var": float(x.var(ddof=1)),
            "se": float(x.std(ddof=1) / math.sqrt(self.n_traj)),
        }

    def scaled_moments(self, n: int, m_max: int = 3) -> tuple[np.ndarray, np.ndarray]:
        """Moments m = 1..m_max of sigma_n^2 / n^b and their standard errors."""
        x = self.sigma2(n) / n**self.params.b
        powers = np.stack([x**m for m in range(1, m_max + 1)])
        return powers.mean(axis=1), powers.std(axis=1, ddof=1) / math.sqrt(self.n_traj)

    def gram_shares(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        g = self.gram(n).astype(np.float64)
        shares = g / g.sum(axis=1, keepdims=True)
        return shares.mean(axis=0), shares.std(axis=0, ddof=1) / math.sqrt(self.n_traj)

    def martingale_mean(self, n: int) -> tuple[float, float]:
        """Mean of N_n = b_n sigma_n^2 and its standard error."""
        b_n = rising_normalizer(self.params.b, n)[n]
        x = b_n * self.sigma2(n)
        return float(x.mean()), float(x.std(ddof=1) / math.sqrt(self.n_traj))

    # -- combination and export ----------------------------------------

    def merge(self, other: "EnsembleSummary") -> "EnsembleSummary":
        """Append ``other``, whose trajectory indices must follow this one's."""
        if other.params != self.params or not np.array_equal(other.checkpoints, self.checkpoints):
            raise ValueError("can only merge summaries of the same parameters and checkpoints")
        if other.seed != self.seed or other.traj_start != self.traj_start + self.n_traj:
            raise ValueError("merged summaries must share the seed and have contiguous trajectory indices")
        both = lambda x, y: None if x is None or y is None else np.concatenate([x, y])  # noqa: E731
        return EnsembleSummary(
            params=self.params,
            n_steps=self.n_steps,
            checkpoints=self.checkpoints,
            positions=np.concatenate([self.positions, other.positions]),
            grams=np.concatenate([self.grams, other.grams]),
            seed=self.seed,
            traj_start=self.traj_start,
            generator=self.generator,
            w=both(self.w, other.w),
            qv=both(self.qv, other.qv),
        )

    def checkpoint_stats(self, n: int) -> dict:
        mean, mean_se = self.mean_position(n)
        second, second_se = self.second_moment(n)
        moments, moments_se = self.scaled_moments(n)
        shares, shares_se = self.gram_shares(n)
        return {
            "n": int(n),
            "mean_position": mean.tolist(),
            "mean_position_se": mean_se.tolist(),
            "covariance": self.position_covariance(n).tolist(),
            "second_moment": second.tolist(),
            "second_moment_se": second_se.tolist(),
            "sigma2": self.sigma2_stats(n),
            "scaled_sigma2_moments": moments.tolist(),
            "scaled_sigma2_moments_se": moments_se.tolist(),
            "gram_shares": shares.tolist(),
            "gram_shares_se": shares_se.tolist(),
        }

    def to_dict(self) -> dict:
        return {
            "params": {**self.params.as_dict(), "q": self.params.q, "a": self.params.a,
                       "b": self.params.b, "regime": self.params.regime.value},
            "n_steps": int(self.n_steps),
            "n_traj": self.n_traj,
            "seed": int(self.seed),
            "traj_start": int(self.traj_start),
            "generator": self.generator,
            "checkpoints": [self.checkpoint_stats(int(n)) for n in self.checkpoints],
        }

    def records(self):
        """Yield ``(traj_id, n, S, gram, sigma2)`` rows in trajectory order."""
        for t in range(self.n_traj):
            for ci, n in enumerate(self.checkpoints):
                pos = self.positions[t, ci]
                gram = self.grams[t, ci]
                yield (self.traj_start + t, int(n), pos.tolist(), gram.tolist(), int(gram.sum()))


def ensemble_run(
    params: ModelParams,
    n_steps: int,
    n_traj: int,
    seed: int,
    checkpoints=None,
    *,
    workers: int = 1,
    diagnostics: bool = False,
    traj_start: int = 0,
    chunk_size: int = CHUNK_SIZE,
) -> EnsembleSummary:
    """Simulate trajectories ``traj_start .. traj_start + n_traj - 1``.

    Trajectories are cut into fixed chunks that workers fill in place, so the
    result does not depend on ``workers``.
    """
    if n_traj < 2:
        raise ValueError("an ensemble needs n_traj >= 2")
    cps = geometric_checkpoints(n_steps) if checkpoints is None else validate_checkpoints(checkpoints, n_steps)
    k, d = cps.shape[0], params.d
    positions = np.zeros((n_traj, k, d), dtype=np.int64)
    grams = np.zeros_like(positions)
    w = np.zeros((n_traj, k)) if diagnostics else None
    qv = np.zeros((n_traj, k)) if diagnostics else None
    bounds = [(lo, min(lo + chunk_size, n_traj)) for lo in range(0, n_traj, chunk_size)]

    def work(bound):
        lo, hi = bound
        ids = np.arange(traj_start + lo, traj_start + hi, dtype=np.int64)
        raw = simulate_records(params, n_steps, seed, cps, ids, diagnostics)
        positions[lo:hi] = raw["positions"]
        grams[lo:hi] = raw["grams"]
        if diagnostics:
            w[lo:hi] = raw["w"]
            qv[lo:hi] = raw["qv"]

    if workers <= 1:
        for bound in bounds:
            work(bound)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(work, bounds))
    return EnsembleSummary(
        params=params, n_steps=n_steps, checkpoints=cps, positions=positions, grams=grams,
        seed=seed, traj_start=traj_start, w=w, qv=qv,
    )


# -- reports -----------------------------------------------------------------


@dataclass
class TestReport:
    """Outcome of one check.

    ``kind`` says how ``passed`` was decided: ``two-sided`` means
    ``|statistic - reference| <= tolerance``, ``upper`` means
    ``statistic <= tolerance``, ``lower`` means ``statistic >= tolerance``
    and ``band`` means ``reference * lo <= statistic <= reference * hi`` with
    ``tolerance = [lo, hi]``.
    """

    __test__ = False  # not a pytest class

    name: str
    statistic: float
    reference: float
    tolerance: float | list
    passed: bool
    sample_size: int
    kind: str = "two-sided"
    qualitative: bool = False
    notes: str = ""
    tags: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return (
            f"[{flag}] {self.name}: statistic={self.statistic:.6g} reference={self.reference:.6g} "
            f"tolerance={self.tolerance} ({self.kind}, N={self.sample_size})"
        )


def two_sided(name, statistic, reference, tolerance, sample_size, **kw) -> TestReport:
    statistic, reference, tolerance = float(statistic), float(reference), float(tolerance)
    return TestReport(name, statistic, reference, tolerance,
                      bool(abs(statistic - reference) <= tolerance), int(sample_size), **kw)


def upper_bound(name, statistic, bound, sample_size, reference=0.0, **kw) -> TestReport:
    statistic = float(statistic)
    return TestReport(name, statistic, float(reference), float(bound), bool(statistic <= bound),
                      int(sample_size), kind="upper", **kw)


def lower_bound(name, statistic, bound, sample_size, reference=0.0, **kw) -> TestReport:
    statistic = float(statistic)
    return TestReport(name, statistic, float(reference), float(bound), bool(statistic >= bound),
                      int(sample_size), kind="lower", **kw)


def band(name, statistic, reference, lo, hi, sample_size, **kw) -> TestReport:
    statistic, reference = float(statistic), float(reference)
    ok = reference * lo <= statistic <= reference * hi
    return TestReport(name, statistic, reference, [lo, hi], bool(ok), int(sample_size), kind="band", **kw)


def _require_horizon(summary: EnsembleSummary, minimum: int) -> int:
    n = int(summary.checkpoints[-1])
    if n < minimum:
        raise InsufficientHorizon(f"final checkpoint {n} is below the required horizon {minimum}")
    return n


def _sub_rng(summary: EnsembleSummary, tag: int) -> np.random.Generator:
    return np.random.default_rng([int(summary.seed) & 0xFFFFFFFFFFFFFFFF, tag])


# -- exact identities --------------------------------------------------------


def verify_martingale_mean(summary: EnsembleSummary, times=None, n_se: float = 3.0) -> list[TestReport]:
    """E[b_n sigma_n^2] = 1 at every requested checkpoint."""
    reports = []
    for n in (summary.checkpoints if times is None else times):
        mean, se = summary.martingale_mean(int(n))
        reports.append(two_sided(f"martingale_mean[n={int(n)}]", mean, 1.0, n_se * se, summary.n_traj,
                                 notes=f"{n_se:g} standard errors"))
    return reports


def verify_second_moment(summary: EnsembleSummary, n: int, n_se: float = 3.0) -> list[TestReport]:
    """Empirical E[S_n S_n^T] against the exact recursion (diagonal) and 0 (off-diagonal)."""
    emp, se = summary.second_moment(n)
    exact = expected_outer(summary.params, n).e_outer_diag
    d = summary.params.d
    reports = []
    for i in range(d):
        for j in range(d):
            ref = exact if i == j else 0.0
            label = "diag" if i == j else "offdiag"
            reports.append(two_sided(f"second_moment_{label}[{i},{j}][n={n}]", emp[i, j], ref,
                                     n_se * se[i, j], summary.n_traj))
    return reports


def enumeration_chi_square(law: ExactLaw, summary: EnsembleSummary, min_expected: float = 5.0):
    """Chi-square of Monte Carlo (S_n, sigma_n^2) frequencies against the exact law.

    Cells with expected count below ``min_expected`` are pooled.  Returns
    ``(statistic, p_value, n_cells, n_outside)`` where ``n_outside`` counts
    simulated outcomes missing from the exact support.
    """
    n = law.n
    exact = law.position_sigma2_law()
    keys = sorted(exact)
    lookup = {k: i for i, k in enumerate(keys)}
    pos = summary.position(n)
    s2 = summary.sigma2(n)
    rows = np.column_stack([pos, s2])
    uniq, counts = np.unique(rows, axis=0, return_counts=True)
    observed = np.zeros(len(keys))
    outside = 0
    for row, c in zip(uniq, counts):
        key = (tuple(int(v) for v in row[:-1]), int(row[-1]))
        if key in lookup:
            observed[lookup[key]] += c
        else:
            outside += int(c)
    expected = np.array([float(exact[k]) for k in keys]) * summary.n_traj
    big = expected >= min_expected
    obs_cells = list(observed[big])
    exp_cells = list(expected[big])
    if (~big).any():
        pooled_o, pooled_e = observed[~big].sum(), expected[~big].sum()
        if pooled_e >= min_expected or not exp_cells:
            obs_cells.append(pooled_o)
            exp_cells.append(pooled_e)
        else:
            i = int(np.argmin(exp_cells))
            obs_cells[i] += pooled_o
            exp_cells[i] += pooled_e
    obs_cells = np.array(obs_cells)
    exp_cells = np.array(exp_cells)
    exp_cells *= obs_cells.sum() / exp_cells.sum()
    res = sps.chisquare(obs_cells, exp_cells)
    return float(res.statistic), float(res.pvalue), len(obs_cells), outside


def verify_enumeration(law: ExactLaw, summary: EnsembleSummary, alpha: float = 1e-3,
                       exact_tol: float = 1e-12) -> list[TestReport]:
    """Monte Carlo frequencies against the exact law, then the exact moment checks."""
    tag = f"d={law.params.d},n={law.n}"
    chi2, pval, cells, outside = enumeration_chi_square(law, summary)
    return [
        lower_bound(f"enumeration_chi_square_pvalue[{tag}]", pval, alpha, summary.n_traj,
                    notes=f"chi2={chi2:.4g} on {cells} cells"),
        upper_bound(f"enumeration_outside_support[{tag}]", outside, 0, summary.n_traj),
    ] + enumeration_exact_reports(law, exact_tol)


def enumeration_exact_reports(law: ExactLaw, exact_tol: float = 1e-12) -> list[TestReport]:
    """Exact law against the moment oracle: unit mass, E[sigma_n^2] and E[S_n S_n^T]."""
    params, n = law.params, law.n
    tag = f"d={params.d},n={n}"
    reports = [two_sided(f"enumeration_mass[{tag}]", float(law.total_mass()), 1.0, exact_tol, 0)]
    e_s2 = expected_sigma2(params, n)
    reports.append(two_sided(f"enumeration_sigma2_vs_oracle[{tag}]", law.expected_sigma2(), e_s2,
                             exact_tol * abs(e_s2), 0))
    outer = law.expected_outer()
    s_n = expected_outer(params, n).e_outer_diag
    err = np.abs(outer - s_n * np.eye(params.d)).max()
    reports.append(upper_bound(f"enumeration_outer_vs_oracle[{tag}]", err / abs(s_n), exact_tol, 0,
                               notes="max relative entry error of E[S_n S_n^T]"))
    return reports


# -- Gram / Mittag-Leffler limit ----------------------------------------------


def verify_gram_limit(
    summary: EnsembleSummary,
    *,
    share_tol: float = 0.01,
    m2_tol: float = 0.07,
    m3_tol: float = 0.12,
    ks_tol: float = 0.03,
    ml_draws: int = 10**6,
    min_horizon: int = 10**4,
) -> list[TestReport]:
    n = _require_horizon(summary, min_horizon)
    params = summary.params
    d, b = params.d, params.b
    reports = []
    shares, _ = summary.gram_shares(n)
    for i in range(d):
        reports.append(two_sided(f"gram_share[axis={i}]", shares[i], 1.0 / d, share_tol, summary.n_traj))
    moments, se = summary.scaled_moments(n, 3)
    exact_m1 = expected_sigma2(params, n) / n**b
    reports.append(two_sided("scaled_sigma2_moment[m=1]", moments[0], exact_m1, 3 * se[0], summary.n_traj,
                             notes="reference is the exact finite-n mean 1/(n^b b_n)"))
    for m, tol in ((2, m2_tol), (3, m3_tol)):
        ref = ml_moment(b, m)
        reports.append(two_sided(f"scaled_sigma2_moment[m={m}]", moments[m - 1], ref, tol * ref,
                                 summary.n_traj, notes=f"relative tolerance {tol:g}"))
    draws = ml_sample(b, _sub_rng(summary, 1), ml_draws)
    ks = sps.ks_2samp(summary.sigma2(n) / n**b, draws).statistic
    reports.append(upper_bound("scaled_sigma2_ks_vs_ml_sampler", ks, ks_tol, summary.n_traj,
                               notes=f"two-sample KS against {ml_draws} ML({b:g}) draws"))
    return reports


# -- central limit theorems ----------------------------------------------------


def _normalized_components(summary: EnsembleSummary, n: int, regime: Regime) -> tuple[np.ndarray, float]:
    s = summary.position(n).astype(np.float64)
    s2 = summary.sigma2(n).astype(np.float64)
    if regime is Regime.DIFFUSIVE:
        return s / np.sqrt(s2)[:, None], diffusive_variance(summary.params)
    return s / np.sqrt(s2 * np.log(s2))[:, None], 1.0 / summary.params.d


def verify_clt(
    summary: EnsembleSummary,
    regime: Regime | None = None,
    *,
    var_tol: float | None = None,
    ks_tol: float = 0.05,
    min_horizon: int = 10**5,
) -> list[TestReport]:
    """Self-normalized asymptotic normality (diffusive or critical)."""
    params = summary.params
    regime = params.regime if regime is None else Regime(regime)
    if regime is not params.regime or regime is Regime.SUPERDIFFUSIVE:
        raise WrongRegime(f"CLT check for {regime.value} does not apply to a {params.regime.value} walk")
    n = _require_horizon(summary, min_horizon)
    if var_tol is None:
        var_tol = 0.05 if regime is Regime.DIFFUSIVE else 0.10
    z, ref_var = _normalized_components(summary, n, regime)
    reports = []
    for i in range(params.d):
        reports.append(two_sided(f"clt_variance[{regime.value},axis={i}]", z[:, i].var(ddof=1), ref_var,
                                 var_tol * ref_var, summary.n_traj, notes=f"relative tolerance {var_tol:g}"))
        ks = sps.kstest(z[:, i] / math.sqrt(ref_var), "norm").statistic
        reports.append(upper_bound(f"clt_ks[{regime.value},axis={i}]", ks, ks_tol, summary.n_traj))
    bound = 3.0 / math.sqrt(summary.n_traj)
    for i in range(params.d):
        for j in range(i + 1, params.d):
            rho = np.corrcoef(z[:, i], z[:, j])[0, 1]
            reports.append(upper_bound(f"clt_cross_correlation[{i},{j}]", abs(rho), bound, summary.n_traj))
    return reports


def _kurtosis_se(x: np.ndarray, rng: np.random.Generator, n_boot: int = 200) -> float:
    idx = rng.integers(0, x.shape[0], size=(n_boot, x.shape[0]))
    boots = sps.kurtosis(x[idx], axis=1)
    return float(boots.std(ddof=1))


def mixture_excess_kurtosis(b: float) -> float:
    """Excess kurtosis of sqrt(Sigma') times a centred normal, Sigma' ~ ML(b)."""
    return 3.0 * (ml_moment(b, 2) / ml_moment(b, 1) ** 2 - 1.0)


def verify_mixture_clt(
    summary: EnsembleSummary,
    *,
    var_tol: float | None = None,
    kurtosis_margin: float = 3.0,
    min_horizon: int = 10**5,
) -> list[TestReport]:
    """Deterministic normalization: a Mittag-Leffler scale mixture of normals."""
    params = summary.params
    if params.regime is Regime.SUPERDIFFUSIVE:
        raise WrongRegime("the mixture law is stated for the diffusive and critical regimes")
    n = _require_horizon(summary, min_horizon)
    b = params.b
    s = summary.position(n).astype(np.float64)
    if params.regime is Regime.DIFFUSIVE:
        z = s / math.sqrt(n**b)
        ref = diffusive_variance(params) * ml_moment(b, 1)
        var_tol = 0.07 if var_tol is None else var_tol
    else:
        z = s / math.sqrt(n**b * math.log(n))
        ref = b / params.d * ml_moment(b, 1)
        var_tol = 0.10 if var_tol is None else var_tol
    rng = _sub_rng(summary, 2)
    reports = []
    label = params.regime.value
    for i in range(params.d):
        reports.append(two_sided(f"mixture_variance[{label},axis={i}]", z[:, i].var(ddof=1), ref,
                                 var_tol * ref, summary.n_traj, notes=f"relative tolerance {var_tol:g}"))
        kurt = float(sps.kurtosis(z[:, i]))
        se = _kurtosis_se(z[:, i], rng)
        reports.append(lower_bound(f"mixture_excess_kurtosis[{label},axis={i}]", kurt, kurtosis_margin * se,
                                   summary.n_traj, reference=mixture_excess_kurtosis(b),
                                   notes=f"must exceed {kurtosis_margin:g} bootstrap standard errors ({se:.3g})"))
    return reports


# -- superdiffusive regime --------------------------------------------------------


def verify_superdiffusive(
    summary: EnsembleSummary,
    *,
    horizon_ratio: int = 100,
    cov_tol: float = 0.10,
    ks_tol: float = 0.08,
    n_se: float = 3.0,
) -> list[TestReport]:
    """Limit L, its covariance, mean-square Cauchy behaviour and Gaussian fluctuations.

    L is replaced by the far-horizon estimate ``L_hat = S_N / N^a``; the
    fluctuation check at ``n = N / horizon_ratio`` therefore carries a small
    plug-in bias, absorbed by ``ks_tol``.
    """
    params = summary.params
    if params.regime is not Regime.SUPERDIFFUSIVE:
        raise WrongRegime(f"superdiffusive checks do not apply to a {params.regime.value} walk")
    a, d = params.a, params.d
    n_h = int(summary.checkpoints[-1])
    n = n_h // horizon_ratio
    l_hat = summary.position(n_h) / n_h**a
    reports = []
    mean = l_hat.mean(axis=0)
    se = l_hat.std(axis=0, ddof=1) / math.sqrt(summary.n_traj)
    for i in range(d):
        reports.append(two_sided(f"L_mean[axis={i}]", mean[i], 0.0, n_se * se[i], summary.n_traj))
    cov_ref = expected_L_covariance(params).scale
    second = (l_hat**2).mean(axis=0)
    for i in range(d):
        reports.append(two_sided(f"L_second_moment[axis={i}]", second[i], cov_ref, cov_tol * cov_ref,
                                 summary.n_traj, notes=f"relative tolerance {cov_tol:g}"))
    # exact finite-n identity for the trace of E[S S^T] at every recorded horizon
    s_seq = outer_diag_sequence(params, n_h)
    for t in summary.checkpoints:
        t = int(t)
        if t < 10:
            continue
        norm2 = (summary.position(t).astype(np.float64) ** 2).sum(axis=1) / t ** (2 * a)
        ref = d * s_seq[t] / t ** (2 * a)
        tol = n_se * norm2.std(ddof=1) / math.sqrt(summary.n_traj)
        reports.append(two_sided(f"outer_trace_vs_oracle[n={t}]", norm2.mean(), ref, tol, summary.n_traj))
    # mean-square Cauchy property: || S_t/t^a - S_{t/10}/(t/10)^a ||^2 shrinks with t
    gaps = []
    for t in summary.checkpoints:
        t = int(t)
        if t >= 100 and t % 10 == 0 and (summary.checkpoints == t // 10).any():
            diff = summary.position(t) / t**a - summary.position(t // 10) / (t // 10) ** a
            gaps.append((t, float((diff**2).sum(axis=1).mean())))
    decreasing = all(g1 > g2 for (_, g1), (_, g2) in zip(gaps, gaps[1:]))
    reports.append(TestReport("L_cauchy_mean_square_decreasing", float(gaps[-1][1]) if gaps else math.nan,
                              0.0, 0.0, bool(decreasing and len(gaps) >= 2), summary.n_traj, kind="monotone",
                              notes="; ".join(f"t={t}: {g:.4g}" for t, g in gaps)))
    theta2 = superdiffusive_variance(params)
    s_n = summary.position(n).astype(np.float64)
    s2 = summary.sigma2(n).astype(np.float64)
    fluct = (s_n - n**a * l_hat) / np.sqrt(theta2 * s2)[:, None]
    for i in range(d):
        ks = sps.kstest(fluct[:, i], "norm").statistic
        reports.append(upper_bound(f"fluctuation_ks[axis={i}]", ks, ks_tol, summary.n_traj,
                                   notes=f"n = N_h/{horizon_ratio}; tolerance includes the L_hat plug-in bias"))
    return reports


# -- iterated logarithm (qualitative) -----------------------------------------


def lil_statistics(summary: EnsembleSummary, n_min: int = 1000) -> np.ndarray:
    """Per-trajectory sup over checkpoints of the LIL ratio (NaN where no checkpoint qualifies)."""
    params = summary.params
    sup = np.full(summary.n_traj, -np.inf)
    for ci, n in enumerate(summary.checkpoints):
        if n < n_min:
            continue
        s = summary.positions[:, ci, :].astype(np.float64)
        s2 = summary.grams[:, ci, :].sum(axis=1).astype(np.float64)
        norm2 = (s**2).sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            if params.regime is Regime.DIFFUSIVE:
                ok = s2 > math.e
                denom = 2 * s2 * np.log(np.log(s2))
            else:
                ok = s2 > math.exp(math.e)
                denom = 2 * s2 * np.log(s2) * np.log(np.log(np.log(s2)))
            ratio = np.where(ok, norm2 / denom, -np.inf)
        sup = np.maximum(sup, ratio)
    sup[np.isinf(sup)] = np.nan
    return sup


def lil_monitor(summary: EnsembleSummary, *, lo: float = 0.05, hi: float = 20.0, n_min: int = 1000,
                min_horizon: int = 10**4) -> TestReport:
    """Qualitative band check of the ensemble maximum of sup_n R_n."""
    params = summary.params
    if params.regime is Regime.SUPERDIFFUSIVE:
        raise WrongRegime("the iterated-logarithm monitor covers the diffusive and critical regimes")
    _require_horizon(summary, min_horizon)
    ref = params.d * diffusive_variance(params) if params.regime is Regime.DIFFUSIVE else 1.0
    sup = lil_statistics(summary, n_min)
    finite = sup[np.isfinite(sup)]
    stat = float(finite.max()) if finite.size else math.nan
    return band(f"lil_band[{params.regime.value}]", stat, ref, lo, hi, int(finite.size), qualitative=True,
                notes=f"median per-trajectory sup {float(np.median(finite)) if finite.size else math.nan:.4g}; "
                      "qualitative only")


# -- special functions -------------------------------------------------------------


def verify_special_functions(
    rng: np.random.Generator,
    *,
    sampler_draws: int = 10**6,
    e1_tol: float = 1e-12,
    pdf_tol: float = 1e-9,
    moment_tol: float = 1e-12,
    ks_tol: float = 0.005,
) -> list[TestReport]:
    """Closed-form anchors of the Mittag-Leffler module.

    E_1 is the exponential, ML(1/2) has density exp(-x^2/4)/sqrt(pi) (the law
    of |N(0, 2)|), and the moments are checked against 50-digit evaluations.
    """
    import mpmath

    from .mittag import ml_function, ml_pdf

    grid = np.linspace(-5.0, 5.0, 201)
    e1_err = max(abs(ml_function(1.0, float(t)) - math.exp(t)) for t in grid)
    reports = [upper_bound("E_1_equals_exp", e1_err, e1_tol, grid.size,
                           notes="max absolute error on [-5, 5]")]
    xs = np.linspace(0.05, 10.0, 200)
    pdf_err = max(
        abs(ml_pdf(0.5, float(x)) - math.exp(-x * x / 4) / math.sqrt(math.pi))
        / (math.exp(-x * x / 4) / math.sqrt(math.pi))
        for x in xs
    )
    reports.append(upper_bound("f_half_vs_closed_form", pdf_err, pdf_tol, xs.size,
                               notes="max relative error on (0, 10]"))
    ctx = mpmath.MPContext()
    ctx.dps = 50
    worst = 0.0
    count = 0
    for alpha in (0.1, 0.3, 0.5, 0.55, 0.8, 0.95, 1.0):
        for m in range(11):
            exact = ctx.factorial(m) / ctx.gamma(1 + m * ctx.mpf(alpha))
            worst = max(worst, float(abs(ml_moment(alpha, m) - exact) / exact))
            count += 1
    reports.append(upper_bound("ml_moment_vs_multiprecision", worst, moment_tol, count,
                               notes="max relative error, m = 0..10"))
    draws = ml_sample(0.5, rng, sampler_draws)
    reference = np.abs(rng.normal(0.0, math.sqrt(2.0), sampler_draws))
    ks = sps.ks_2samp(draws, reference).statistic
    reports.append(upper_bound("ml_half_sampler_vs_half_normal", ks, ks_tol, sampler_draws,
                               notes="two-sample KS against |N(0, 2)|"))
    return reports
