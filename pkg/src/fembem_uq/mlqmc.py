"""Halton points, single-level QMC and the multilevel quadrature estimator.

The multilevel estimator is

    sum_{l=0}^{L} Q_{L-l}( F(u_l) - F(u_{l-1}) ),   F(u_{-1}) := 0,

where each difference is evaluated on one Halton point set, so both solves
of a difference see the same boundary sample. Every level restarts the
Halton stream at index 1, so point sets of different sizes are nested and
solves can be shared through :class:`SampleEvaluator`.
"""

import json
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

import numpy as np

from .coupling import solve_sample
from .fem import evaluate_qoi, zero_function
from .geometry import DEFAULT_PERTURBATION, PerturbationSpec

logger = logging.getLogger(__name__)

DIMENSION = DEFAULT_PERTURBATION.dimension
SCHEDULES = ("linear", "quadratic")
REFERENCE_LEVEL = 6
REFERENCE_SAMPLES = 2000


@lru_cache(maxsize=None)
def first_primes(n: int) -> tuple:
    primes = []
    candidate = 2
    while len(primes) < n:
        if all(candidate % p for p in primes if p * p <= candidate):
            primes.append(candidate)
        candidate += 1
    return tuple(primes)


def radical_inverse(i: np.ndarray, base: int) -> np.ndarray:
    """Digit reversal of ``i`` in ``base`` about the radix point.

    The reversed digits are accumulated as an exact integer and divided once,
    so every value is correctly rounded.
    """
    i = np.asarray(i, dtype=np.int64)
    num = np.zeros_like(i)
    den = np.ones_like(i)
    rest = i.copy()
    while np.any(rest):
        rest, digit = np.divmod(rest, base)
        # finished entries keep scaling both parts, leaving the ratio intact
        num = num * base + digit
        den = den * base
    return num / den


@dataclass(frozen=True)
class HaltonGenerator:
    """Unscrambled Halton sequence; coordinate j uses the j-th prime."""

    dimension: int = DIMENSION
    start: int = 1

    @property
    def bases(self) -> tuple:
        return first_primes(self.dimension)

    def points(self, n: int, offset: int = 0) -> np.ndarray:
        """Points with indices ``start + offset, ..., start + offset + n - 1``."""
        idx = np.arange(self.start + offset, self.start + offset + n, dtype=np.int64)
        return np.stack([radical_inverse(idx, b) for b in self.bases], axis=-1)

    def point(self, i: int) -> np.ndarray:
        if i < 1:
            raise ValueError("Halton index must be at least 1")
        idx = np.array([i], dtype=np.int64)
        return np.array([radical_inverse(idx, b)[0] for b in self.bases])


def halton_point(i: int, dimension: int = DIMENSION) -> np.ndarray:
    return HaltonGenerator(dimension).point(i)


def map_to_sample(point) -> np.ndarray:
    """Shift a unit-cube point to a sample vector in ``(-0.5, 0.5)^d``."""
    return np.asarray(point, dtype=float) - 0.5


def schedule_counts(L: int, N_L: int, schedule: str = "linear") -> list:
    """Sample counts ``N_0, ..., N_L``."""
    if schedule not in SCHEDULES:
        raise ValueError(f"unknown schedule {schedule!r}")
    if L < 0 or N_L < 1:
        raise ValueError("need L >= 0 and N_L >= 1")
    factor = 2 if schedule == "linear" else 4
    return [factor ** (L - l) * N_L for l in range(L + 1)]


@dataclass(frozen=True)
class MlConfig:
    L: int
    N_L: int
    schedule: str = "linear"
    u_bar: object = zero_function
    spec: PerturbationSpec = DEFAULT_PERTURBATION

    def __post_init__(self):
        schedule_counts(self.L, self.N_L, self.schedule)

    @property
    def counts(self) -> list:
        return schedule_counts(self.L, self.N_L, self.schedule)


class SampleEvaluator:
    """Memoized ``F(u_l[y_i])`` keyed by level and Halton index.

    ``functional(u)`` defaults to the L2-tracking QoI with ``u_bar``. The
    ``log`` list records ``(level, index, y)`` of every solve for inspection.
    """

    def __init__(self, functional=None, u_bar=zero_function, spec=DEFAULT_PERTURBATION,
                 threads: int = 1, record: bool = False):
        self.functional = functional or (lambda u: evaluate_qoi(u, u_bar))
        self.spec = spec
        self.threads = max(1, int(threads))
        self.generator = HaltonGenerator(spec.dimension)
        self.record = record
        self.log = []
        self._values = {}
        self._lock = threading.Lock()

    def sample(self, i: int) -> np.ndarray:
        return map_to_sample(self.generator.point(i))

    def _solve(self, level: int, i: int, y: np.ndarray) -> float:
        value = self.functional(solve_sample(y, level, spec=self.spec))
        if self.record:
            with self._lock:
                self.log.append((level, i, y.copy()))
        return value

    def values(self, level: int, n: int) -> np.ndarray:
        """``F(u_level[y_i])`` for ``i = 1..n``, in index order."""
        missing = [i for i in range(1, n + 1) if (level, i) not in self._values]
        if missing:
            pts = self.generator.points(max(missing), 0)
            jobs = [(i, map_to_sample(pts[i - 1])) for i in missing]
            logger.info("level %d: %d new solves", level, len(jobs))
            if self.threads == 1:
                results = [self._solve(level, i, y) for i, y in jobs]
            else:
                with ThreadPoolExecutor(self.threads) as pool:
                    results = list(pool.map(lambda job: self._solve(level, *job), jobs))
            for (i, _), v in zip(jobs, results):
                self._values[(level, i)] = v
        return np.array([self._values[(level, i)] for i in range(1, n + 1)])


def _mean(values: np.ndarray) -> float:
    # sequential left-to-right sum, independent of how values were produced
    total = 0.0
    for v in values:
        total += float(v)
    return total / len(values)


def single_level_estimate(level: int, n: int, u_bar=zero_function, *,
                          evaluator: SampleEvaluator | None = None,
                          spec: PerturbationSpec = DEFAULT_PERTURBATION, threads: int = 1) -> float:
    """Equal-weight QMC average of the QoI over the first ``n`` Halton samples."""
    if n < 1:
        raise ValueError("need at least one sample")
    evaluator = evaluator or SampleEvaluator(u_bar=u_bar, spec=spec, threads=threads)
    return _mean(evaluator.values(level, n))


@dataclass
class LevelDiagnostics:
    level: int
    samples: int
    mean: float


@dataclass
class MultilevelResult:
    value: float
    levels: list = field(default_factory=list)


def multilevel_estimate(config: MlConfig, *, evaluator: SampleEvaluator | None = None,
                        threads: int = 1) -> MultilevelResult:
    """Multilevel quadrature estimate with per-level diagnostics."""
    evaluator = evaluator or SampleEvaluator(u_bar=config.u_bar, spec=config.spec, threads=threads)
    diagnostics = []
    total = 0.0
    for level, n in enumerate(config.counts):
        fine = evaluator.values(level, n)
        diff = fine - evaluator.values(level - 1, n) if level > 0 else fine
        mean = _mean(diff)
        diagnostics.append(LevelDiagnostics(level, n, mean))
        total += mean
    return MultilevelResult(total, diagnostics)


def load_reference() -> dict:
    """Frozen desk-scale reference for the default configuration."""
    text = resources.files("fembem_uq").joinpath("data/reference.json").read_text()
    return json.loads(text)


def compute_reference(level: int = REFERENCE_LEVEL, n: int = REFERENCE_SAMPLES, threads: int = 1) -> dict:
    value = single_level_estimate(level, n, threads=threads)
    return {"level": level, "samples": n, "value": value, "value_repr": repr(value)}
