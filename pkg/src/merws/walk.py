"""Exact simulation of the walk.

Two paths produce steps.  The Python-level functions (:func:`first_step`,
:func:`memory_step`, :func:`step`) take a :class:`numpy.random.Generator` and
exist for instrumentation and distributional tests; :func:`simulate` and
:func:`simulate_records` drive the compiled kernel, which is the production
path.  Both implement the same collapsed memory rule: a remembered stop is
repeated, a remembered move ``s e_j`` is repeated with probability ``p``, turned
into each of the other ``2d - 1`` signed directions with probability ``q``, or
into a stop with probability ``r``.

Axes are 0-based throughout.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .errors import CheckpointOutOfRange, DimensionMismatch
from .model import ModelParams

DEFAULT_RATIO = 10 ** 0.25
MAX_DIM = 63


class StepKind(str, enum.Enum):
    STOP = "stop"
    MOVE = "move"


@dataclass(frozen=True)
class Step:
    kind: StepKind
    axis: int = -1
    sign: int = 0

    @classmethod
    def stop(cls) -> "Step":
        return cls(StepKind.STOP)

    @classmethod
    def move(cls, axis: int, sign: int) -> "Step":
        if sign not in (1, -1):
            raise ValueError(f"sign must be +1 or -1, got {sign!r}")
        if not 0 <= axis < MAX_DIM:
            raise ValueError(f"axis out of range: {axis!r}")
        return cls(StepKind.MOVE, axis, sign)

    @property
    def is_stop(self) -> bool:
        return self.kind is StepKind.STOP

    @property
    def code(self) -> int:
        if self.is_stop:
            return 0
        return 1 + 2 * self.axis + (0 if self.sign > 0 else 1)

    @classmethod
    def from_code(cls, code: int) -> "Step":
        code = int(code)
        if code == 0:
            return cls.stop()
        j = code - 1
        return cls.move(j >> 1, 1 - 2 * (j & 1))

    def vector(self, d: int) -> np.ndarray:
        v = np.zeros(d, dtype=np.int64)
        if not self.is_stop:
            if self.axis >= d:
                raise DimensionMismatch(f"axis {self.axis} does not exist in dimension {d}")
            v[self.axis] = self.sign
        return v


class MatrixKind(str, enum.Enum):
    IDENTITY = "identity"
    SHIFT_POWER = "shift_power"
    ZERO = "zero"


@dataclass(frozen=True)
class StepMatrix:
    """One of the ``2d + 1`` random matrices: ``±I``, ``±J^i`` (1 <= i < d), or ``0``.

    ``J`` is the cyclic permutation matrix with ones on the super-diagonal and
    in the bottom-left corner, so ``J e_j = e_{j-1 mod d}``.
    """

    kind: MatrixKind
    power: int = 0
    sign: int = 1

    def as_array(self, d: int) -> np.ndarray:
        if self.kind is MatrixKind.ZERO:
            return np.zeros((d, d), dtype=np.int64)
        shift = np.eye(d, k=1, dtype=np.int64)
        shift[d - 1, 0] = 1
        power = 0 if self.kind is MatrixKind.IDENTITY else self.power
        return self.sign * np.linalg.matrix_power(shift, power)


def step_matrix_law(params: ModelParams) -> list[tuple[StepMatrix, float]]:
    """All matrices with their sampling weights; the weights sum to one."""
    law = [
        (StepMatrix(MatrixKind.IDENTITY, 0, 1), params.p),
        (StepMatrix(MatrixKind.IDENTITY, 0, -1), params.q),
    ]
    for i in range(1, params.d):
        law.append((StepMatrix(MatrixKind.SHIFT_POWER, i, 1), params.q))
        law.append((StepMatrix(MatrixKind.SHIFT_POWER, i, -1), params.q))
    law.append((StepMatrix(MatrixKind.ZERO), params.r))
    return law


def sample_step_matrix(params: ModelParams, rng: np.random.Generator) -> StepMatrix:
    law = step_matrix_law(params)
    u = rng.random() * sum(w for _, w in law)
    for m, w in law:
        if u < w:
            return m
        u -= w
    # rounding left u at the very top: take the last outcome with positive weight
    return next(m for m, w in reversed(law) if w > 0)


def apply_step_matrix(m: StepMatrix, x: Step, d: int) -> Step:
    if m.kind is MatrixKind.SHIFT_POWER and not 1 <= m.power < d:
        raise DimensionMismatch(f"J^{m.power} is not one of the matrices for d={d}")
    if not x.is_stop and x.axis >= d:
        raise DimensionMismatch(f"step on axis {x.axis} does not live in dimension {d}")
    if m.kind is MatrixKind.ZERO or x.is_stop:
        return Step.stop()
    power = m.power if m.kind is MatrixKind.SHIFT_POWER else 0
    return Step.move((x.axis - power) % d, m.sign * x.sign)


def first_step(d: int, rng: np.random.Generator) -> Step:
    """Uniform over the ``2d`` signed unit vectors; never a stop."""
    return Step.from_code(1 + int(rng.integers(2 * d)))


def memory_step(remembered: Step, params: ModelParams, rng: np.random.Generator) -> Step:
    if remembered.is_stop:
        return remembered
    u = rng.random()
    if u < params.r:
        return Step.stop()
    u -= params.r
    if u < params.p or params.q <= 0.0:
        return remembered
    k = min(int((u - params.p) / params.q), 2 * params.d - 2)
    j = remembered.code - 1
    if k >= j:
        k += 1
    return Step.from_code(k + 1)


@dataclass
class Trajectory:
    params: ModelParams
    n: int = 0
    position: np.ndarray = field(default=None)  # type: ignore[assignment]
    history: bytearray = field(default_factory=bytearray)
    gram_diag: np.ndarray = field(default=None)  # type: ignore[assignment]
    sigma2: int = 0
    last_memory_index: int | None = None

    def __post_init__(self):
        if self.position is None:
            self.position = np.zeros(self.params.d, dtype=np.int64)
        if self.gram_diag is None:
            self.gram_diag = np.zeros(self.params.d, dtype=np.int64)

    def _append(self, x: Step) -> None:
        self.history.append(x.code)
        self.n += 1
        if not x.is_stop:
            self.position[x.axis] += x.sign
            self.gram_diag[x.axis] += 1
            self.sigma2 += 1

    def steps(self) -> list[Step]:
        return [Step.from_code(c) for c in self.history]


def start_trajectory(params: ModelParams, rng: np.random.Generator) -> Trajectory:
    traj = Trajectory(params)
    traj._append(first_step(params.d, rng))
    return traj


def step(traj: Trajectory, rng: np.random.Generator) -> Trajectory:
    """Advance ``traj`` by one step in place and return it."""
    if traj.n < 1:
        raise ValueError("trajectory has no first step yet; use start_trajectory")
    k = int(rng.integers(traj.n))
    traj.last_memory_index = k
    traj._append(memory_step(Step.from_code(traj.history[k]), traj.params, rng))
    return traj


# -- compiled path ---------------------------------------------------------


@dataclass(frozen=True)
class TrajectoryRecord:
    traj_id: int
    n: int
    position: tuple[int, ...]
    gram_diag: tuple[int, ...]
    sigma2: int


def geometric_checkpoints(n_steps: int, ratio: float = DEFAULT_RATIO) -> np.ndarray:
    """Times ``round(ratio**k)`` up to ``n_steps``, always including 1 and ``n_steps``."""
    if ratio <= 1.0:
        raise ValueError("checkpoint ratio must exceed 1")
    k_max = int(np.floor(np.log(n_steps) / np.log(ratio) + 1e-9))
    times = {1, int(n_steps)}
    times.update(int(round(ratio**k)) for k in range(k_max + 1))
    return np.array(sorted(t for t in times if 1 <= t <= n_steps), dtype=np.int64)


def validate_checkpoints(checkpoints: Iterable[int], n_steps: int) -> np.ndarray:
    cps = np.asarray(sorted(set(int(c) for c in checkpoints)), dtype=np.int64)
    if cps.size == 0:
        raise CheckpointOutOfRange("at least one checkpoint is required")
    if cps[0] < 1 or cps[-1] > n_steps:
        raise CheckpointOutOfRange(f"checkpoints must lie in [1, {n_steps}], got {cps[0]}..{cps[-1]}")
    return cps


def normalizer_table(a: float, n_steps: int) -> np.ndarray:
    """a_0..a_N by the multiplicative recurrence, as consumed by the kernel."""
    out = np.empty(n_steps + 1)
    out[0] = 1.0
    if n_steps >= 1:
        k = np.arange(1, n_steps, dtype=np.float64)
        out[1] = 1.0
        out[2:] = np.cumprod(k / (k + a))
    return out


def simulate_records(
    params: ModelParams,
    n_steps: int,
    seed: int,
    checkpoints: np.ndarray,
    traj_ids: np.ndarray,
    diagnostics: bool = False,
) -> dict[str, np.ndarray]:
    """Run the kernel for ``traj_ids`` and return raw checkpoint arrays.

    Keys: ``positions`` and ``grams`` of shape (n_traj, n_cp, d); when
    ``diagnostics`` is set also ``w`` and ``qv`` of shape (n_traj, n_cp).
    """
    if params.d > MAX_DIM:
        raise DimensionMismatch(f"d <= {MAX_DIM} required by the one-byte step encoding")
    if n_steps < 1 or n_steps >= 2**32:
        raise ValueError("n_steps must lie in [1, 2**32)")
    cps = validate_checkpoints(checkpoints, n_steps)
    ids = np.ascontiguousarray(traj_ids, dtype=np.int64)
    m, k, d = ids.shape[0], cps.shape[0], params.d
    positions = np.zeros((m, k, d), dtype=np.int64)
    grams = np.zeros((m, k, d), dtype=np.int64)
    w = np.zeros((m, k) if diagnostics else (0, 0))
    qv = np.zeros_like(w)
    coef = normalizer_table(params.a, n_steps) if diagnostics else np.zeros(1)
    _kernels.run_chunk(
        ids, np.uint64(seed & 0xFFFFFFFFFFFFFFFF), int(n_steps), d,
        params.p, params.r, params.q, cps, coef, bool(diagnostics),
        params.a, params.b, positions, grams, w, qv,
    )
    out = {"checkpoints": cps, "positions": positions, "grams": grams}
    if diagnostics:
        out["w"] = w
        out["qv"] = qv
    return out


def simulate(
    params: ModelParams,
    n_steps: int,
    seed: int,
    checkpoints: Sequence[int] | None = None,
    traj_index: int = 0,
) -> list[TrajectoryRecord]:
    """One trajectory on the compiled path; it is trajectory ``traj_index`` of an ensemble seeded with ``seed``."""
    cps = geometric_checkpoints(n_steps) if checkpoints is None else checkpoints
    raw = simulate_records(params, n_steps, seed, cps, np.array([traj_index]))
    records = []
    for ci, n in enumerate(raw["checkpoints"]):
        gram = tuple(int(g) for g in raw["grams"][0, ci])
        records.append(
            TrajectoryRecord(
                traj_id=traj_index,
                n=int(n),
                position=tuple(int(s) for s in raw["positions"][0, ci]),
                gram_diag=gram,
                sigma2=sum(gram),
            )
        )
    return records


def write_records_csv(path, records: Iterable[TrajectoryRecord], d: int) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["traj_id", "n"]
            + [f"S_{i + 1}" for i in range(d)]
            + [f"gram_{i + 1}" for i in range(d)]
            + ["sigma2"]
        )
        for rec in records:
            writer.writerow([rec.traj_id, rec.n, *rec.position, *rec.gram_diag, rec.sigma2])
