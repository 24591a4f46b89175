"""Finite-sample experiments and the quantities derived from coincidence counts."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from eprsim.model import (
    AnalyzerConfig,
    NoiseConfig,
    RandomStream,
    canonicalize,
    derive_stream,
    simulate_pairs,
)

# Stream label namespaces; a sweep inserts its cell indices after the namespace id.
SCAN_STREAM = 0
CHSH_STREAM = 1

DEFAULT_CHSH_ANGLES_DEG = (0.0, 22.5, 45.0, 67.5)
DEFAULT_CHSH_ANGLES = tuple(math.radians(a) for a in DEFAULT_CHSH_ANGLES_DEG)
QM_REFERENCE_VIOLATION = 0.82

CHSH_TERMS = ("E(a,b)", "E(a,b')", "E(a',b)", "E(a',b')")


class AllZeroCounts(ArithmeticError):
    """Visibility is undefined because no setting recorded a ++ coincidence."""


class NoCoincidences(ArithmeticError):
    """A correlation coefficient was requested for counts without any coincidence."""

    def __init__(self, message: str = "no coincidences recorded", term: str | None = None) -> None:
        super().__init__(message if term is None else f"{message} for {term}")
        self.term = term


@dataclass(frozen=True)
class CoincidenceCounts:
    n_pp: int = 0
    n_pm: int = 0
    n_mp: int = 0
    n_mm: int = 0
    n_lost: int = 0

    def __post_init__(self) -> None:
        if min(self.n_pp, self.n_pm, self.n_mp, self.n_mm, self.n_lost) < 0:
            raise ValueError("counts must be non-negative")

    @property
    def n_total(self) -> int:
        return self.n_pp + self.n_pm + self.n_mp + self.n_mm + self.n_lost

    @property
    def n_coincidences(self) -> int:
        return self.n_pp + self.n_pm + self.n_mp + self.n_mm

    def __add__(self, other: CoincidenceCounts) -> CoincidenceCounts:
        return CoincidenceCounts(
            self.n_pp + other.n_pp,
            self.n_pm + other.n_pm,
            self.n_mp + other.n_mp,
            self.n_mm + other.n_mm,
            self.n_lost + other.n_lost,
        )

    @classmethod
    def from_outcomes(cls, a: np.ndarray, b: np.ndarray) -> CoincidenceCounts:
        # codes -1/0/+1 per arm -> cell index 3*(a+1) + (b+1)
        tally = np.bincount(3 * (a.astype(np.intp) + 1) + (b + 1), minlength=9)
        n_pp, n_pm, n_mp, n_mm = int(tally[8]), int(tally[6]), int(tally[2]), int(tally[0])
        lost = int(tally.sum()) - (n_pp + n_pm + n_mp + n_mm)
        return cls(n_pp, n_pm, n_mp, n_mm, lost)


@dataclass(frozen=True)
class ExperimentConfig:
    pairs_per_setting: int = 2000
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    threshold: float = 0.0
    beta: float = 0.0
    alpha_step: float = math.pi / 100
    alpha_range: tuple[float, float] = (0.0, math.pi)
    master_seed: int = 0

    def __post_init__(self) -> None:
        if self.pairs_per_setting < 1:
            raise ValueError("pairs_per_setting must be >= 1")
        if not self.alpha_step > 0:
            raise ValueError("alpha_step must be positive")
        if not 0.0 <= self.threshold <= 0.5:
            raise ValueError(f"threshold must lie in [0, 0.5], got {self.threshold!r}")
        lo, hi = self.alpha_range
        if not 0.0 <= lo < hi <= math.pi:
            raise ValueError("alpha_range must satisfy 0 <= start < stop <= pi")

    def alphas(self) -> np.ndarray:
        """Polarizer-1 settings of a scan: start, start+step, ... strictly below stop."""
        lo, hi = self.alpha_range
        n = int(math.ceil((hi - lo) / self.alpha_step - 1e-9))
        return lo + self.alpha_step * np.arange(n)


@dataclass(frozen=True)
class CorrelationCurve:
    alphas: np.ndarray
    counts: tuple[CoincidenceCounts, ...]
    beta: float = 0.0

    def __post_init__(self) -> None:
        if len(self.alphas) != len(self.counts):
            raise ValueError("alphas and counts differ in length")

    @property
    def n_pp(self) -> np.ndarray:
        return np.array([c.n_pp for c in self.counts], dtype=np.int64)

    @property
    def frequencies(self) -> np.ndarray:
        """N_{++} normalized by emitted pairs at each setting."""
        return np.array([c.n_pp / c.n_total for c in self.counts])

    def total(self) -> CoincidenceCounts:
        return sum(self.counts, CoincidenceCounts())


@dataclass(frozen=True)
class ChshResult:
    e11: float
    e12: float
    e21: float
    e22: float
    s_value: float
    violation: float
    counts: tuple[CoincidenceCounts, ...] | None = None


def run_setting(
    cfg: ExperimentConfig,
    alpha: float,
    beta: float,
    n_pairs: int,
    stream: RandomStream,
) -> CoincidenceCounts:
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    analyzer_a = AnalyzerConfig(alpha, cfg.threshold)
    analyzer_b = AnalyzerConfig(beta, cfg.threshold)
    a, b = simulate_pairs(n_pairs, cfg.noise, analyzer_a, analyzer_b, stream)
    return CoincidenceCounts.from_outcomes(a, b)


def correlation_scan(cfg: ExperimentConfig, prefix: Sequence[int] = (SCAN_STREAM,)) -> CorrelationCurve:
    """Step polarizer 1 across ``cfg.alpha_range`` with polarizer 2 fixed at ``cfg.beta``.

    Setting ``k`` draws from the stream labelled ``(*prefix, k)``.
    """
    alphas = cfg.alphas()
    counts = tuple(
        run_setting(cfg, float(alpha), cfg.beta, cfg.pairs_per_setting,
                    derive_stream(cfg.master_seed, (*prefix, k)))
        for k, alpha in enumerate(alphas)
    )
    return CorrelationCurve(alphas, counts, canonicalize(cfg.beta))


def visibility(curve: CorrelationCurve) -> float:
    """(max - min) / (max + min) of the N_{++} counts over the scan."""
    n_pp = curve.n_pp
    hi, lo = int(n_pp.max()), int(n_pp.min())
    if hi == 0:
        raise AllZeroCounts("every setting recorded N++ = 0; visibility undefined")
    return (hi - lo) / (hi + lo)


def efficiency(counts: CoincidenceCounts) -> float:
    """Fraction of emitted pairs that produced a coincidence on both arms."""
    if counts.n_total <= 0:
        raise ValueError("efficiency needs at least one emitted pair")
    return counts.n_coincidences / counts.n_total


def correlation_coefficient(counts: CoincidenceCounts) -> float:
    """E = (N++ + N-- - N+- - N-+) / coincidences. Lost pairs are post-selected away."""
    total = counts.n_coincidences
    if total == 0:
        raise NoCoincidences()
    return (counts.n_pp + counts.n_mm - counts.n_pm - counts.n_mp) / total


def assemble_chsh(e11: float, e12: float, e21: float, e22: float, counts=None) -> ChshResult:
    s = abs(e11 - e12) + abs(e21 + e22)
    return ChshResult(e11, e12, e21, e22, s, max(s - 2.0, 0.0), counts)


def chsh(
    cfg: ExperimentConfig,
    a: float = DEFAULT_CHSH_ANGLES[0],
    a2: float = DEFAULT_CHSH_ANGLES[2],
    b: float = DEFAULT_CHSH_ANGLES[1],
    b2: float = DEFAULT_CHSH_ANGLES[3],
    n_pairs: int = 10000,
    prefix: Sequence[int] = (CHSH_STREAM,),
) -> ChshResult:
    """CHSH statistic from four independent runs of ``n_pairs`` each.

    S = |E(a,b) - E(a,b')| + |E(a',b) + E(a',b')|, violation = max(S - 2, 0).
    """
    settings = ((a, b), (a, b2), (a2, b), (a2, b2))
    counts = []
    es = []
    for term, (x, y) in enumerate(settings):
        c = run_setting(cfg, x, y, n_pairs, derive_stream(cfg.master_seed, (*prefix, term)))
        try:
            es.append(correlation_coefficient(c))
        except NoCoincidences:
            raise NoCoincidences(term=CHSH_TERMS[term]) from None
        counts.append(c)
    return assemble_chsh(*es, counts=tuple(counts))
