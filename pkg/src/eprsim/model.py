"""Hidden-variable photon pairs and the threshold polarizer-beam-splitter detector.

Single events are modelled one pair at a time (``emit_pair``, ``apply_decoherence``,
``measure_pair``); :func:`simulate_pairs` is the vectorized path used by the
experiment runners and consumes the random stream in exactly the same order.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

TWO_PI = 2.0 * math.pi
HALF_PI = 0.5 * math.pi

# Margins within this distance of the threshold are treated as ties (Undetected).
# Keeps cos^2(pi/4) = 0.5000000000000001 from registering as Plus at zero threshold.
TIE_TOLERANCE = 1e-12


def canonicalize(x):
    """Map an angle (radians, scalar or array) into [0, 2pi)."""
    r = np.mod(x, TWO_PI)
    # np.mod can return exactly 2pi for tiny negative inputs
    r = np.where(r >= TWO_PI, 0.0, r)
    if np.ndim(r) == 0:
        return float(r)
    return r


class Outcome(enum.IntEnum):
    """Channel reported by one analyzer arm."""

    MINUS = -1
    UNDETECTED = 0
    PLUS = 1

    @property
    def symbol(self) -> str:
        return {Outcome.PLUS: "+", Outcome.MINUS: "-", Outcome.UNDETECTED: "0"}[self]


@dataclass(frozen=True)
class PhotonPair:
    phi1: float
    phi2: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.phi1) and math.isfinite(self.phi2)):
            raise ValueError("photon angles must be finite")
        object.__setattr__(self, "phi1", canonicalize(self.phi1))
        object.__setattr__(self, "phi2", canonicalize(self.phi2))


@dataclass(frozen=True)
class AnalyzerConfig:
    """A polarizer beam splitter at ``angle`` (radians) with detection threshold Δs."""

    angle: float
    threshold: float = 0.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.angle):
            raise ValueError("analyzer angle must be finite")
        if not 0.0 <= self.threshold <= 0.5:
            raise ValueError(f"threshold must lie in [0, 0.5], got {self.threshold!r}")
        object.__setattr__(self, "angle", canonicalize(self.angle))


@dataclass(frozen=True)
class NoiseConfig:
    """Decoherence as the fraction of half a wavelength of random optical path.

    Each photon's polarization angle receives an independent perturbation uniform
    on ``[-d*pi/2, +d*pi/2]``; at ``d = 1`` the angle is randomized over a full
    polarization period.
    """

    decoherence: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.decoherence <= 1.0:
            raise ValueError(f"decoherence must lie in [0, 1], got {self.decoherence!r}")

    @property
    def width(self) -> float:
        """Full width of the per-photon angle perturbation."""
        return self.decoherence * math.pi


@dataclass(frozen=True)
class PairOutcome:
    a: Outcome
    b: Outcome

    @property
    def coincidence(self) -> str | None:
        """Coincidence class ``"++"``, ``"+-"``, ``"-+"``, ``"--"``, or None if an arm was lost."""
        if self.a is Outcome.UNDETECTED or self.b is Outcome.UNDETECTED:
            return None
        return self.a.symbol + self.b.symbol


class RandomStream:
    """Counter-based Philox stream keyed by ``(master_seed, labels)``.

    Distinct label tuples give independent streams; identical inputs reproduce the
    same sequence regardless of platform or which thread consumes it. A stream must
    be owned by one task at a time.
    """

    def __init__(self, master_seed: int, labels: Sequence[int] = ()) -> None:
        if not 0 <= int(master_seed) < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        self.master_seed = int(master_seed)
        self.labels = tuple(int(k) for k in labels)
        if any(k < 0 for k in self.labels):
            raise ValueError("stream labels must be non-negative")
        seq = np.random.SeedSequence(self.master_seed, spawn_key=self.labels)
        self._gen = np.random.Generator(np.random.Philox(seq))

    def uniform(self) -> float:
        return float(self._gen.random())

    def uniforms(self, n: int) -> np.ndarray:
        return self._gen.random(n)

    def __repr__(self) -> str:
        return f"RandomStream(master_seed={self.master_seed}, labels={self.labels})"


def derive_stream(master_seed: int, labels: Sequence[int] = ()) -> RandomStream:
    return RandomStream(master_seed, labels)


def emit_pair(rng: RandomStream) -> PhotonPair:
    phi1 = TWO_PI * rng.uniform()
    return PhotonPair(phi1, phi1 + HALF_PI)


def apply_decoherence(pair: PhotonPair, noise: NoiseConfig, rng: RandomStream) -> PhotonPair:
    # Both draws are always consumed so stream alignment does not depend on d.
    delta1 = noise.width * (rng.uniform() - 0.5)
    delta2 = noise.width * (rng.uniform() - 0.5)
    return PhotonPair(pair.phi1 + delta1, pair.phi2 + delta2)


def project_intensity(phi, alpha):
    """Intensity cos^2(phi - alpha) transmitted into the (+) channel."""
    return np.cos(np.subtract(phi, alpha)) ** 2


def _classify(margin, threshold: float):
    bar = threshold + TIE_TOLERANCE
    return np.where(margin > bar, 1, np.where(-margin > bar, -1, 0)).astype(np.int8)


def detect(phi: float, analyzer: AnalyzerConfig) -> Outcome:
    margin = project_intensity(phi, analyzer.angle) - 0.5
    return Outcome(int(_classify(margin, analyzer.threshold)))


def detect_array(phi: np.ndarray, analyzer: AnalyzerConfig) -> np.ndarray:
    """Vectorized :func:`detect`; returns int8 codes +1 / -1 / 0."""
    margin = project_intensity(phi, analyzer.angle) - 0.5
    return _classify(margin, analyzer.threshold)


def measure_pair(pair: PhotonPair, analyzer_a: AnalyzerConfig, analyzer_b: AnalyzerConfig) -> PairOutcome:
    return PairOutcome(detect(pair.phi1, analyzer_a), detect(pair.phi2, analyzer_b))


def simulate_pairs(
    n_pairs: int,
    noise: NoiseConfig,
    analyzer_a: AnalyzerConfig,
    analyzer_b: AnalyzerConfig,
    rng: RandomStream,
) -> tuple[np.ndarray, np.ndarray]:
    """Emit, decohere and measure ``n_pairs`` pairs; returns outcome codes for both arms.

    Draws are laid out pair-major (phase, arm-1 perturbation, arm-2 perturbation),
    which is the order the single-pair functions consume them in.
    """
    u = rng.uniforms(3 * n_pairs).reshape(n_pairs, 3)
    phi1 = TWO_PI * u[:, 0]
    phi2 = canonicalize(phi1 + HALF_PI)
    phi1 = canonicalize(phi1 + noise.width * (u[:, 1] - 0.5))
    phi2 = canonicalize(phi2 + noise.width * (u[:, 2] - 0.5))
    return detect_array(phi1, analyzer_a), detect_array(phi2, analyzer_b)
