"""Parameter sweeps over the (decoherence, threshold) plane."""

from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from eprsim.analysis import (
    CHSH_STREAM,
    DEFAULT_CHSH_ANGLES,
    SCAN_STREAM,
    AllZeroCounts,
    ExperimentConfig,
    NoCoincidences,
    chsh,
    correlation_scan,
    efficiency,
    visibility,
)
from eprsim.model import NoiseConfig

METRICS = ("correlation", "efficiency", "visibility", "violation")
SURFACE_STREAM = 2


class UnknownMetric(KeyError):
    pass


@dataclass(frozen=True)
class AxisSpec:
    start: float
    stop: float
    steps: int

    def __post_init__(self) -> None:
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.start > self.stop:
            raise ValueError("start must not exceed stop")

    def values(self) -> np.ndarray:
        if self.steps == 1:
            return np.array([float(self.start)])
        return np.linspace(self.start, self.stop, self.steps)


@dataclass(frozen=True)
class SweepSpec:
    d_axis: AxisSpec = AxisSpec(0.0, 1.0, 51)
    t_axis: AxisSpec = AxisSpec(0.0, 0.5, 51)
    metrics: tuple[str, ...] = ("efficiency", "visibility", "violation")
    base_config: ExperimentConfig = field(default_factory=ExperimentConfig)
    chsh_pairs: int = 10000
    chsh_angles: tuple[float, float, float, float] = DEFAULT_CHSH_ANGLES

    def __post_init__(self) -> None:
        if not self.metrics:
            raise ValueError("at least one metric is required")
        for m in self.metrics:
            if m not in METRICS:
                raise UnknownMetric(m)
        if self.chsh_pairs < 1:
            raise ValueError("chsh_pairs must be >= 1")


@dataclass
class GridResult:
    """Per-metric matrices indexed ``[i_d, j_t]``.

    Each matrix is a masked array; masked cells are undefined (for example the
    visibility of a configuration that never records N++), and ``errors`` keeps
    the reason for each of them. ``s_value`` holds the unclipped CHSH statistic
    whenever ``violation`` was requested, and ``correlation`` holds one N++
    frequency curve per cell along a trailing axis.
    """

    d_values: np.ndarray
    t_values: np.ndarray
    values: dict[str, np.ma.MaskedArray]
    errors: dict[tuple[str, int, int], str] = field(default_factory=dict)

    def cell_status(self, metric: str) -> np.ndarray:
        mask = np.ma.getmaskarray(self[metric])
        if mask.ndim == 3:
            mask = mask.any(axis=2)
        return np.where(mask, "undef", "ok")

    def __getitem__(self, metric: str) -> np.ma.MaskedArray:
        try:
            return self.values[metric]
        except KeyError:
            raise UnknownMetric(metric) from None

    def __contains__(self, metric: str) -> bool:
        return metric in self.values


def _cell_config(spec: SweepSpec, d: float, t: float) -> ExperimentConfig:
    return dataclasses.replace(spec.base_config, noise=NoiseConfig(float(d)), threshold=float(t))


def _run_cell(spec: SweepSpec, i: int, j: int, d: float, t: float) -> dict[str, object]:
    cfg = _cell_config(spec, d, t)
    out: dict[str, object] = {}
    if {"correlation", "efficiency", "visibility"} & set(spec.metrics):
        curve = correlation_scan(cfg, prefix=(SCAN_STREAM, i, j))
        out["correlation"] = curve.frequencies
        out["efficiency"] = efficiency(curve.total())
        try:
            out["visibility"] = visibility(curve)
        except AllZeroCounts as exc:
            out["visibility"] = exc
    if "violation" in spec.metrics:
        a, b, a2, b2 = spec.chsh_angles
        try:
            res = chsh(cfg, a, a2, b, b2, n_pairs=spec.chsh_pairs, prefix=(CHSH_STREAM, i, j))
            out["violation"], out["s_value"] = res.violation, res.s_value
        except NoCoincidences as exc:
            out["violation"] = out["s_value"] = exc
    return out


def run_sweep(spec: SweepSpec, workers: int = 1) -> GridResult:
    """Run every cell of the grid; output does not depend on ``workers``.

    Cell ``(i, j)`` draws its scan from streams ``(0, i, j, k)`` and its CHSH terms
    from ``(1, i, j, term)``, so each cell is reproducible on its own.
    """
    d_values, t_values = spec.d_axis.values(), spec.t_axis.values()
    cells = [(i, j, d, t) for i, d in enumerate(d_values) for j, t in enumerate(t_values)]

    if workers <= 1:
        results = [_run_cell(spec, *c) for c in cells]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda c: _run_cell(spec, *c), cells))

    shape = (len(d_values), len(t_values))
    names = [m for m in spec.metrics if m != "correlation"]
    if "violation" in spec.metrics:
        names.append("s_value")
    data = {m: np.zeros(shape) for m in names}
    mask = {m: np.zeros(shape, dtype=bool) for m in names}
    errors: dict[tuple[str, int, int], str] = {}
    for (i, j, _, _), res in zip(cells, results):
        for m in names:
            v = res[m]
            if isinstance(v, Exception):
                mask[m][i, j] = True
                errors[(m, i, j)] = f"{type(v).__name__}: {v}"
            else:
                data[m][i, j] = v
    values = {m: np.ma.MaskedArray(data[m], mask=mask[m]) for m in names}
    if "correlation" in spec.metrics:
        curves = np.stack([np.asarray(r["correlation"]) for r in results])
        values["correlation"] = np.ma.MaskedArray(curves.reshape(*shape, -1))
    return GridResult(d_values, t_values, values, errors)


def fraction_above(grid: GridResult, metric: str, cutoff: float) -> float:
    """Share of defined cells whose value exceeds ``cutoff``."""
    values = grid[metric]
    defined = values.compressed()
    if defined.size == 0:
        return 0.0
    return float(np.count_nonzero(defined > cutoff) / defined.size)


@dataclass(frozen=True)
class CorrelationSurface:
    d_values: np.ndarray
    alphas: np.ndarray
    frequencies: np.ndarray  # [i_d, k_alpha], N++ / emitted pairs
    threshold: float


def correlation_surface(spec: SweepSpec, workers: int = 1) -> CorrelationSurface:
    """One correlation scan per decoherence value at the base threshold."""
    cfg0 = spec.base_config
    d_values = spec.d_axis.values()

    def row(item):
        i, d = item
        cfg = dataclasses.replace(cfg0, noise=NoiseConfig(float(d)))
        return correlation_scan(cfg, prefix=(SURFACE_STREAM, i)).frequencies

    items = list(enumerate(d_values))
    if workers <= 1:
        rows = [row(it) for it in items]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(row, items))
    return CorrelationSurface(d_values, cfg0.alphas(), np.vstack(rows), cfg0.threshold)
