"""Exact outcome probabilities of the threshold model, for checking Monte Carlo results.

Geometry used throughout: with ``x = phi1 + delta1 - alpha`` taken modulo pi, arm A
reports (+) on an arc of half-width ``h = arccos(2*ds)/2`` around 0 and (-) on the
same arc around pi/2; everything else is lost. Arm B's arcs, written in the same
coordinate, sit at ``-(theta + pi/2 + Delta)`` and a quarter turn further, with
``theta = alpha - beta`` and ``Delta = delta2 - delta1``. The integral over the
hidden angle is therefore an arc-overlap length, piecewise linear in ``Delta``.
The remaining average over ``Delta`` (triangular density, the difference of two
uniform perturbations) is split at every kink and integrated with Gauss-Legendre
nodes, which is exact for the piecewise-quadratic integrand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate

from eprsim.analysis import DEFAULT_CHSH_ANGLES, ChshResult, NoCoincidences, assemble_chsh, CHSH_TERMS

PI = math.pi
CLASSES = ("pp", "pm", "mp", "mm", "lost")

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(3)


class ToleranceNotMet(ArithmeticError):
    """Adaptive quadrature ran out of subdivisions before reaching the tolerance."""


@dataclass(frozen=True)
class QuadratureSpec:
    abs_tolerance: float = 1e-4
    max_subdivisions: int = 200

    def __post_init__(self) -> None:
        if not self.abs_tolerance > 0:
            raise ValueError("abs_tolerance must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")


def _check(threshold: float, decoherence: float) -> None:
    if not 0.0 <= threshold <= 0.5:
        raise ValueError(f"threshold must lie in [0, 0.5], got {threshold!r}")
    if not 0.0 <= decoherence <= 1.0:
        raise ValueError(f"decoherence must lie in [0, 1], got {decoherence!r}")


def _half_widths(threshold: float) -> tuple[float, float]:
    detect = 0.5 * math.acos(min(2.0 * threshold, 1.0))
    return detect, 0.25 * PI - detect


def _circ_dist(c):
    r = np.mod(c, PI)
    return np.minimum(r, PI - r)


def _overlap(c, h: float):
    """Common length of two arcs of half-width h (h <= pi/4) whose centres are c apart."""
    return np.maximum(0.0, 2.0 * h - _circ_dist(c))


def _conditional(theta: float, threshold: float, delta) -> np.ndarray:
    """Class probabilities (pp, pm, mp, mm, lost) given the relative perturbation."""
    h_det, h_lost = _half_widths(threshold)
    bp = -(theta + 0.5 * PI + np.asarray(delta, dtype=float))
    bm = bp + 0.5 * PI
    pp = _overlap(bp, h_det)
    pm = _overlap(bm, h_det)
    mp = _overlap(bp - 0.5 * PI, h_det)
    mm = _overlap(bm - 0.5 * PI, h_det)
    # lost arcs of arm A centred at pi/4 and 3pi/4, arm B's a fixed offset bp away
    both_lost = 2.0 * _overlap(bp, h_lost) + _overlap(bp + 0.5 * PI, h_lost) + _overlap(bp - 0.5 * PI, h_lost)
    one_arm_lost = 4.0 * h_lost
    lost = 2.0 * one_arm_lost - both_lost
    return np.stack([pp, pm, mp, mm, lost]) / PI


def _breakpoints(theta: float, threshold: float, width: float) -> np.ndarray:
    h_det, h_lost = _half_widths(threshold)
    kinks = np.array([0.0, 0.5 * PI, 2 * h_det, -2 * h_det, 2 * h_lost, -2 * h_lost])
    base = -(theta + 0.5 * PI)
    residues = np.mod(np.concatenate([base - kinks, base + 0.5 * PI - kinks]), PI)
    m = np.arange(-math.ceil(width / PI) - 1, math.ceil(width / PI) + 2)
    pts = (residues[:, None] + PI * m[None, :]).ravel()
    pts = pts[(pts > -width) & (pts < width)]
    return np.unique(np.concatenate([pts, [-width, 0.0, width]]))


def _exact(theta: float, threshold: float, decoherence: float) -> np.ndarray:
    width = decoherence * PI
    if width == 0.0:
        return _conditional(theta, threshold, 0.0)
    edges = _breakpoints(theta, threshold, width)
    lo, hi = edges[:-1], edges[1:]
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    nodes = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    weights = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    density = (width - np.abs(nodes)) / width**2
    return _conditional(theta, threshold, nodes) @ (weights * density)


def _quad(f, a, b, quad: QuadratureSpec, points=None) -> np.ndarray:
    if points is not None and len(points) >= quad.max_subdivisions:
        raise ToleranceNotMet(f"{len(points)} breakpoints exceed {quad.max_subdivisions} subdivisions")
    value, err, info = integrate.quad_vec(f, a, b, epsabs=0.1 * quad.abs_tolerance, epsrel=0.0,
                                          limit=quad.max_subdivisions, points=points, full_output=True)
    if info.status != 0 or err > quad.abs_tolerance:
        raise ToleranceNotMet(f"quadrature on [{a:g}, {b:g}] stopped at error {err:.3g}")
    return value


def _adaptive(theta: float, threshold: float, decoherence: float, quad: QuadratureSpec) -> np.ndarray:
    """Nested adaptive quadrature over the two independent perturbations."""
    width = decoherence * PI
    if width == 0.0:
        return _conditional(theta, threshold, 0.0)
    half = 0.5 * width
    kinks = _breakpoints(theta, threshold, width)

    def inside(pts):
        pts = [float(p) for p in pts if -half < p < half]
        return pts or None

    def inner(d1: float) -> np.ndarray:
        g = lambda d2: _conditional(theta, threshold, d2 - d1)
        return _quad(g, -half, half, quad, inside(d1 + kinks)) / width

    return _quad(inner, -half, half, quad, inside(kinks)) / width


def class_probabilities(
    alpha: float,
    beta: float,
    threshold: float,
    decoherence: float,
    quad: QuadratureSpec | None = None,
    method: str = "exact",
) -> dict[str, float]:
    """Probabilities of the coincidence classes and of losing the pair.

    ``method="exact"`` splits at the indicator breakpoints; ``"adaptive"`` runs
    nested adaptive quadrature over both perturbations and raises
    :class:`ToleranceNotMet` if it cannot converge within ``quad``.
    """
    _check(threshold, decoherence)
    theta = alpha - beta
    if method == "exact":
        probs = _exact(theta, threshold, decoherence)
    elif method == "adaptive":
        probs = _adaptive(theta, threshold, decoherence, quad or QuadratureSpec())
    else:
        raise ValueError(f"unknown method {method!r}")
    return {name: float(p) for name, p in zip(CLASSES, probs)}


def outcome_probability(
    alpha: float,
    beta: float,
    threshold: float,
    decoherence: float,
    outcome: str,
    quad: QuadratureSpec | None = None,
    method: str = "exact",
) -> float:
    if outcome not in CLASSES:
        raise ValueError(f"outcome must be one of {CLASSES}, got {outcome!r}")
    return class_probabilities(alpha, beta, threshold, decoherence, quad, method)[outcome]


def ideal_coincidence_probability(alpha: float, beta: float) -> float:
    """Closed-form P++ with no threshold and no decoherence: a triangle wave in alpha - beta."""
    # w = (alpha - beta - pi/2) wrapped into [-pi/2, pi/2)
    w = (alpha - beta) % PI - 0.5 * PI
    return 0.5 - abs(w) / PI


def oracle_efficiency(threshold: float, decoherence: float, n_angles: int = 100) -> float:
    """Coincidence efficiency averaged over ``n_angles`` relative angles k*pi/n_angles.

    The default matches the settings visited by a default correlation scan.
    """
    _check(threshold, decoherence)
    thetas = PI * np.arange(n_angles) / n_angles
    lost = [_exact(float(t), threshold, decoherence)[4] for t in thetas]
    return float(1.0 - np.mean(lost))


def oracle_chsh(
    threshold: float,
    decoherence: float,
    angles: Sequence[float] = DEFAULT_CHSH_ANGLES,
    quad: QuadratureSpec | None = None,
) -> ChshResult:
    """Exact CHSH statistic; ``angles`` is ``(a, b, a', b')`` in radians."""
    quad = quad or QuadratureSpec()
    a, b, a2, b2 = angles
    es = []
    for term, (x, y) in enumerate(((a, b), (a, b2), (a2, b), (a2, b2))):
        p = class_probabilities(x, y, threshold, decoherence, quad)
        coinc = p["pp"] + p["pm"] + p["mp"] + p["mm"]
        if max(p["pp"], p["pm"], p["mp"], p["mm"]) < quad.abs_tolerance:
            raise NoCoincidences(term=CHSH_TERMS[term])
        es.append((p["pp"] + p["mm"] - p["pm"] - p["mp"]) / coinc)
    return assemble_chsh(*es)
