"""Experiment configuration, recipes and artifact writing.

Every artifact except ``metadata.json`` is a pure function of the
configuration: reports carry no timestamps and ensembles do not depend on the
worker count, so two runs with the same seed produce byte-identical files.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, _kernels
from .coefficients import coeff_table, vn_terms
from .errors import ConfigInvalid, InvalidParameters, IoFailure, OutOfEvaluationRange
from .mittag import ml_moment, ml_pdf, ml_sample
from .model import ModelParams, Regime, derive_params, params_for_regime
from .oracle import (
    enumerate_distribution,
    expected_outer,
    expected_outer_closed_form,
    outer_diag_sequence,
)
from .stats import (
    EnsembleSummary,
    TestReport,
    enumeration_exact_reports,
    ensemble_run,
    lil_monitor,
    upper_bound,
    verify_clt,
    verify_enumeration,
    verify_gram_limit,
    verify_martingale_mean,
    verify_mixture_clt,
    verify_second_moment,
    verify_special_functions,
    verify_superdiffusive,
)
from .walk import DEFAULT_RATIO, geometric_checkpoints, validate_checkpoints

EXPERIMENTS = (
    "simulate", "gram-limit", "clt", "mixture-clt", "superdiffusive", "lil",
    "oracle", "enumerate", "ml-table", "coefftable",
)
ENSEMBLE_EXPERIMENTS = ("simulate", "gram-limit", "clt", "mixture-clt", "superdiffusive", "lil")
FORMATS = ("csv", "json")
DEFAULT_SETS = {
    Regime.DIFFUSIVE: (2, 0.4, 0.2),
    Regime.CRITICAL: (2, 0.5, 0.2),
    Regime.SUPERDIFFUSIVE: (2, 0.9, 0.05),
}
GRAM_LIMIT_SET = (2, 0.55, 0.2)

TOLERANCES = {
    "martingale-mean": {"standard_errors": 3.0},
    "second-moment": {"standard_errors": 3.0},
    "enumerate": {"chi_square_pvalue": 1e-3, "exact": 1e-12},
    "gram-limit": {"share": 0.01, "m1_standard_errors": 3.0, "m2_relative": 0.07, "m3_relative": 0.12, "ks": 0.03},
    "clt": {"variance_relative_diffusive": 0.05, "variance_relative_critical": 0.10, "ks": 0.05,
            "cross_correlation": "3/sqrt(N)"},
    "mixture-clt": {"variance_relative_diffusive": 0.07, "variance_relative_critical": 0.10,
                    "kurtosis_standard_errors": 3.0},
    "superdiffusive": {"L_second_moment_relative": 0.10, "L_mean_standard_errors": 3.0, "fluctuation_ks": 0.08},
    "lil": {"band": [0.05, 20.0], "n_min": 1000},
    "special-functions": {"E_1": 1e-12, "f_half": 1e-9, "moments": 1e-12, "sampler_ks": 0.005},
}


def fmt_real(x: float) -> str:
    """17-significant-digit decimal, enough to round-trip a double."""
    return format(float(x), ".17g")


# -- configuration -----------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment.  ``regime``, when set, replaces ``p`` by the regime's default value."""

    experiment: str = "simulate"
    d: int = 2
    p: float = 0.4
    r: float = 0.2
    regime: str | None = None
    n_steps: int = 1000
    n_traj: int = 1000
    seed: int = 0
    checkpoints: tuple[int, ...] | None = None
    ratio: float = DEFAULT_RATIO
    out_dir: str = "merws-out"
    formats: tuple[str, ...] = FORMATS
    workers: int = 1

    def __post_init__(self):
        # normalise list-valued fields so JSON round-trips compare equal
        if self.checkpoints is not None:
            object.__setattr__(self, "checkpoints", tuple(int(c) for c in self.checkpoints))
        object.__setattr__(self, "formats", tuple(self.formats))

    def validate(self) -> "ExperimentConfig":
        if self.experiment not in EXPERIMENTS:
            raise ConfigInvalid("experiment", f"must be one of {', '.join(EXPERIMENTS)}, got {self.experiment!r}")
        if self.regime is not None and self.regime not in {r.value for r in Regime}:
            raise ConfigInvalid("regime", f"unknown regime {self.regime!r}")
        if not isinstance(self.n_steps, int) or self.n_steps < 1:
            raise ConfigInvalid("n_steps", "must be a positive integer")
        if not isinstance(self.n_traj, int) or self.n_traj < 1:
            raise ConfigInvalid("n_traj", "must be a positive integer")
        if self.experiment in ENSEMBLE_EXPERIMENTS and self.n_traj < 2:
            raise ConfigInvalid("n_traj", "ensemble experiments need at least 2 trajectories")
        if not 0 <= self.seed < 2**64:
            raise ConfigInvalid("seed", "must lie in [0, 2**64)")
        if not self.ratio > 1:
            raise ConfigInvalid("ratio", "checkpoint ratio must exceed 1")
        if self.workers < 1:
            raise ConfigInvalid("workers", "must be >= 1")
        bad = set(self.formats) - set(FORMATS)
        if bad or not self.formats:
            raise ConfigInvalid("formats", f"choose from {FORMATS}, got {self.formats!r}")
        if self.checkpoints is not None:
            try:
                validate_checkpoints(self.checkpoints, self.n_steps)
            except ValueError as exc:
                raise ConfigInvalid("checkpoints", str(exc)) from exc
        try:
            self.params()
        except InvalidParameters as exc:
            raise ConfigInvalid("d/p/r", str(exc)) from exc
        return self

    def params(self) -> ModelParams:
        if self.regime is not None:
            return params_for_regime(self.d, self.r, Regime(self.regime))
        return derive_params(self.d, self.p, self.r)

    def checkpoint_grid(self) -> np.ndarray:
        if self.checkpoints is not None:
            return validate_checkpoints(self.checkpoints, self.n_steps)
        return geometric_checkpoints(self.n_steps, self.ratio)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["checkpoints"] = None if self.checkpoints is None else list(self.checkpoints)
        out["formats"] = list(self.formats)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigInvalid(sorted(unknown)[0], "unknown configuration field")
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigInvalid("<json>", str(exc)) from exc
        return cls.from_dict(data)


def derive_worker_streams(master_seed: int, n_traj: int) -> np.ndarray:
    """Stream seeds ``mix64(master ^ i)`` for trajectories i = 0..n_traj-1.

    Trajectory i always draws from stream i, whichever worker runs it.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    return _kernels.derive_seeds(np.uint64(master_seed & 0xFFFFFFFFFFFFFFFF), int(n_traj))


# -- artifact writing ----------------------------------------------------------


@dataclass
class RunResult:
    status: int
    reports: list[TestReport]
    paths: dict[str, str] = field(default_factory=dict)


def _write_json(path: Path, payload) -> None:
    try:
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise IoFailure(f"could not write {path}: {exc}") from exc


def _write_csv(path: Path, header: list[str], rows) -> None:
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise IoFailure(f"could not write {path}: {exc}") from exc


def write_trajectories(path: Path, summary: EnsembleSummary) -> None:
    d = summary.params.d
    header = ["traj_id", "n"] + [f"S_{i + 1}" for i in range(d)] + [f"gram_{i + 1}" for i in range(d)] + ["sigma2"]
    rows = ([tid, n, *pos, *gram, s2] for tid, n, pos, gram, s2 in summary.records())
    _write_csv(path, header, rows)


def reports_payload(reports: list[TestReport]) -> dict:
    return {
        "all_passed": all(r.passed for r in reports if not r.qualitative),
        "reports": [r.to_dict() for r in reports],
    }


def exit_status(reports: list[TestReport]) -> int:
    return 0 if all(r.passed for r in reports if not r.qualitative) else 1


# -- recipes ---------------------------------------------------------------------


def _ensemble(config: ExperimentConfig, params: ModelParams, extra=()) -> EnsembleSummary:
    cps = np.union1d(config.checkpoint_grid(), np.asarray(extra, dtype=np.int64))
    return ensemble_run(params, config.n_steps, config.n_traj, config.seed, cps, workers=config.workers)


def _run_experiment(config: ExperimentConfig, out: Path) -> tuple[list[TestReport], dict, EnsembleSummary | None]:
    """Returns the reports, extra files written, and the ensemble if one was simulated."""
    params = config.params()
    name = config.experiment
    n = config.n_steps
    files: dict[str, str] = {}
    summary = None
    if name == "simulate":
        summary = _ensemble(config, params)
        reports = verify_martingale_mean(summary) + verify_second_moment(summary, n)
    elif name == "gram-limit":
        summary = _ensemble(config, params)
        reports = verify_gram_limit(summary)
    elif name == "clt":
        summary = _ensemble(config, params)
        reports = verify_clt(summary)
    elif name == "mixture-clt":
        summary = _ensemble(config, params)
        reports = verify_mixture_clt(summary)
    elif name == "superdiffusive":
        summary = _ensemble(config, params, extra=[n // 100, n // 10] if n >= 100 else [])
        reports = verify_superdiffusive(summary)
    elif name == "lil":
        summary = _ensemble(config, params)
        reports = [lil_monitor(summary)]
    elif name == "oracle":
        reports = _oracle_table(config, params, out, files)
    elif name == "enumerate":
        law = enumerate_distribution(params, n)
        if "csv" in config.formats:
            law.write_csv(out / "enumerate.csv")
            files["enumerate"] = str(out / "enumerate.csv")
        reports = enumeration_exact_reports(law)
    elif name == "ml-table":
        reports = _ml_table(params.b, out, files)
    else:  # coefftable
        reports = _coeff_table(config, params, out, files)
    return reports, files, summary


def _oracle_table(config: ExperimentConfig, params: ModelParams, out: Path, files: dict) -> list[TestReport]:
    cps = config.checkpoint_grid()
    s = outer_diag_sequence(params, config.n_steps)
    rows = []
    for t in cps:
        m = expected_outer(params, int(t))
        rows.append([int(t), fmt_real(m.e_sigma2), fmt_real(m.e_gram_diag), fmt_real(s[t])])
    if "csv" in config.formats:
        _write_csv(out / "oracle.csv", ["n", "E_sigma2", "E_gram_diag", "E_outer_diag"], rows)
        files["oracle"] = str(out / "oracle.csv")
    if params.regime is Regime.CRITICAL:
        return []
    # recursion against its closed solution
    t = int(cps[-1])
    closed = expected_outer_closed_form(params, t)
    return [upper_bound(f"oracle_recursion_vs_closed_form[n={t}]", abs(s[t] - closed) / abs(closed), 1e-10, 0)]


def _ml_table(alpha: float, out: Path, files: dict) -> list[TestReport]:
    rows = []
    for x in np.round(np.arange(0.05, 10.0001, 0.05), 10):
        try:
            rows.append([fmt_real(x), fmt_real(ml_pdf(alpha, float(x)))])
        except OutOfEvaluationRange:
            break  # beyond the certified range the grid stops
    _write_csv(out / "ml_pdf.csv", ["x", "density"], rows)
    _write_csv(out / "ml_moments.csv", ["m", "moment"], [[m, fmt_real(ml_moment(alpha, m))] for m in range(11)])
    files["ml_pdf"] = str(out / "ml_pdf.csv")
    files["ml_moments"] = str(out / "ml_moments.csv")
    return []


def _coeff_table(config: ExperimentConfig, params: ModelParams, out: Path, files: dict) -> list[TestReport]:
    table = coeff_table(params.a, params.b, config.n_steps)
    v = np.cumsum(vn_terms(params.a, params.b, config.n_steps))
    rows = [[int(t), fmt_real(table.a_seq[t]), fmt_real(table.b_seq[t]), fmt_real(v[t])] for t in config.checkpoint_grid()]
    _write_csv(out / "coefftable.csv", ["n", "a_n", "b_n", "v_n"], rows)
    files["coefftable"] = str(out / "coefftable.csv")
    return []


def run(config: ExperimentConfig) -> RunResult:
    """Run one experiment and write its artifacts under ``config.out_dir``."""
    config.validate()
    out = Path(config.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"could not create {out}: {exc}") from exc
    start = time.perf_counter()
    reports, files, summary = _run_experiment(config, out)
    if summary is not None:
        if "csv" in config.formats:
            write_trajectories(out / "trajectories.csv", summary)
            files["trajectories"] = str(out / "trajectories.csv")
        if "json" in config.formats:
            _write_json(out / "summary.json", summary.to_dict())
            files["summary"] = str(out / "summary.json")
    _write_json(out / "report.json", reports_payload(reports))
    files["report"] = str(out / "report.json")
    _write_json(out / "metadata.json", metadata(config.to_dict(), time.perf_counter() - start,
                                               TOLERANCES.get(config.experiment, {})))
    files["metadata"] = str(out / "metadata.json")
    return RunResult(exit_status(reports), reports, files)


def metadata(config: dict, wall_clock: float, tolerances: dict) -> dict:
    return {
        "config": config,
        "generator": _kernels.GENERATOR_NAME,
        "version": __version__,
        "wall_clock_seconds": wall_clock,
        "started_at_unix": time.time() - wall_clock,
        "tolerances": tolerances,
    }


# -- the acceptance suite ----------------------------------------------------------


@dataclass(frozen=True)
class SuiteSizes:
    """Budget of ``verify_all``; :data:`FULL_SUITE` is the acceptance budget."""

    exact_traj: int = 10**5
    exact_times: tuple[int, ...] = (100, 1000, 10**4)
    second_moment_n: int = 1000
    enum_traj: int = 10**6
    gram_steps: int = 10**5
    gram_traj: int = 10**4
    clt_steps: int = 10**5
    clt_traj: int = 10**4
    super_steps: int = 10**6
    super_traj: int = 10**4
    ml_draws: int = 10**6
    sampler_draws: int = 10**6

    def as_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["exact_times"] = list(self.exact_times)
        return out


FULL_SUITE = SuiteSizes()
SMOKE_SUITE = SuiteSizes(
    exact_traj=2000, exact_times=(10, 100, 1000), second_moment_n=100, enum_traj=20000,
    gram_steps=2000, gram_traj=500, clt_steps=2000, clt_traj=500, super_steps=10**4, super_traj=500,
    ml_draws=10**4, sampler_draws=10**4,
)

CRITERIA = {
    "1": "exact martingale mean",
    "2": "exact second-moment oracle",
    "3": "brute-force enumeration equivalence",
    "4": "Gram / Mittag-Leffler limit",
    "5": "diffusive CLT",
    "6": "critical CLT",
    "7": "diffusive mixture law",
    "8": "superdiffusive limit",
    "9": "superdiffusive Gaussian fluctuation",
    "10": "special functions",
    "11": "iterated-logarithm band (qualitative)",
}


@dataclass
class SuiteResult:
    criteria: dict[str, list[TestReport]]
    extra: list[TestReport]
    wall_clock: float

    @property
    def reports(self) -> list[TestReport]:
        return [r for group in self.criteria.values() for r in group] + self.extra

    @property
    def status(self) -> int:
        return exit_status(self.reports)

    def criterion_passed(self, key: str) -> bool:
        return all(r.passed for r in self.criteria[key])

    def payload(self, seed: int, sizes: SuiteSizes) -> dict:
        return {
            "seed": int(seed),
            "sizes": sizes.as_dict(),
            "all_passed": self.status == 0,
            "criteria": {
                key: {"title": CRITERIA[key], "passed": self.criterion_passed(key),
                      "reports": [r.to_dict() for r in group]}
                for key, group in self.criteria.items()
            },
            "supplementary": [r.to_dict() for r in self.extra],
        }


def _seed_for(master: int, tag: int) -> int:
    # independent master seeds for the separate ensembles of the suite
    return int(_kernels.mix64(np.uint64((master ^ (tag * 0x9E3779B97F4A7C15)) & 0xFFFFFFFFFFFFFFFF)))


def verify_all(seed: int, workers: int = 1, sizes: SuiteSizes = FULL_SUITE, out_dir=None,
               progress=None) -> SuiteResult:
    """Run every acceptance experiment; optionally write report.json and metadata.json."""
    say = progress or (lambda msg: None)
    start = time.perf_counter()
    crit: dict[str, list[TestReport]] = {k: [] for k in CRITERIA}
    extra: list[TestReport] = []
    small = sizes != FULL_SUITE

    for tag, (regime, (d, p, r)) in enumerate(DEFAULT_SETS.items(), start=1):
        params = derive_params(d, p, r)
        say(f"exact identities, {regime.value}")
        cps = sorted(set(sizes.exact_times) | {sizes.second_moment_n})
        ens = ensemble_run(params, max(cps), sizes.exact_traj, _seed_for(seed, tag), cps, workers=workers)
        crit["1"] += _tag(verify_martingale_mean(ens, sizes.exact_times), regime.value)
        crit["2"] += _tag(verify_second_moment(ens, sizes.second_moment_n), regime.value)

    say("enumeration")
    for tag, (d, p, r, n) in enumerate(((1, 0.4, 0.2, 4), (2, 0.4, 0.2, 3)), start=10):
        params = derive_params(d, p, r)
        law = enumerate_distribution(params, n)
        ens = ensemble_run(params, n, sizes.enum_traj, _seed_for(seed, tag), [n], workers=workers)
        crit["3"] += verify_enumeration(law, ens)

    say("gram limit")
    params = derive_params(*GRAM_LIMIT_SET)
    ens = ensemble_run(params, sizes.gram_steps, sizes.gram_traj, _seed_for(seed, 20), None, workers=workers)
    crit["4"] += verify_gram_limit(ens, ml_draws=sizes.ml_draws, min_horizon=1 if small else 10**4)

    min_h = 1 if small else 10**5
    for tag, regime in ((30, Regime.DIFFUSIVE), (31, Regime.CRITICAL)):
        say(f"central limit theorems, {regime.value}")
        params = derive_params(*DEFAULT_SETS[regime])
        ens = ensemble_run(params, sizes.clt_steps, sizes.clt_traj, _seed_for(seed, tag), None, workers=workers)
        crit["5" if regime is Regime.DIFFUSIVE else "6"] += verify_clt(ens, min_horizon=min_h)
        mixture = verify_mixture_clt(ens, min_horizon=min_h)
        if regime is Regime.DIFFUSIVE:
            crit["7"] += mixture
        else:
            extra += mixture
        crit["11"].append(lil_monitor(ens, min_horizon=1 if small else 10**4))

    say("superdiffusive")
    params = derive_params(*DEFAULT_SETS[Regime.SUPERDIFFUSIVE])
    n_h = sizes.super_steps
    cps = np.union1d(geometric_checkpoints(n_h), [n_h // 100, n_h // 10])
    ens = ensemble_run(params, n_h, sizes.super_traj, _seed_for(seed, 40), cps, workers=workers)
    for rep in verify_superdiffusive(ens):
        if rep.name.startswith("fluctuation_ks"):
            crit["9"].append(rep)
        elif rep.name.startswith(("L_mean", "L_second_moment")):
            crit["8"].append(rep)
        else:
            extra.append(rep)

    say("special functions")
    rng = np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, 50])
    crit["10"] += verify_special_functions(rng, sampler_draws=sizes.sampler_draws)

    result = SuiteResult(crit, extra, time.perf_counter() - start)
    if out_dir is not None:
        out = Path(out_dir)
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise IoFailure(f"could not create {out}: {exc}") from exc
        _write_json(out / "report.json", result.payload(seed, sizes))
        _write_json(out / "metadata.json", metadata(
            {"suite": "verify-all", "seed": int(seed), "workers": workers, "sizes": sizes.as_dict(),
             "parameter_sets": {k.value: list(v) for k, v in DEFAULT_SETS.items()},
             "gram_limit_set": list(GRAM_LIMIT_SET)},
            result.wall_clock, TOLERANCES))
    return result


def _tag(reports: list[TestReport], label: str) -> list[TestReport]:
    for r in reports:
        r.name = f"{r.name}[{label}]"
    return reports


def env_seed(default: int = 0) -> int:
    """Master seed from ``MERWS_SEED`` when set."""
    raw = os.environ.get("MERWS_SEED")
    if raw is None or raw == "":
        return default
    try:
        value = int(raw, 0)
    except ValueError as exc:
        raise ConfigInvalid("seed", f"MERWS_SEED must be an integer, got {raw!r}") from exc
    if not 0 <= value < 2**64:
        raise ConfigInvalid("seed", "MERWS_SEED must lie in [0, 2**64)")
    return value


def ml_samples(alpha: float, count: int, seed: int) -> np.ndarray:
    return ml_sample(alpha, np.random.default_rng(seed & 0xFFFFFFFFFFFFFFFF), count)


__all__ = [
    "ExperimentConfig", "RunResult", "SuiteResult", "SuiteSizes", "FULL_SUITE", "SMOKE_SUITE", "CRITERIA",
    "run", "verify_all", "derive_worker_streams", "env_seed", "fmt_real", "ml_samples",
]
