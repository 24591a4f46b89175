"""Command-line front end writing CSV tables for external plotting.

Every output starts with ``#`` manifest lines (tool, command, resolved config,
timestamp), followed by a header row and data rows. The manifest's ``key = value``
lines use the same syntax as ``--config`` files.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from eprsim import __version__
from eprsim.analysis import (
    DEFAULT_CHSH_ANGLES_DEG,
    AllZeroCounts,
    ExperimentConfig,
    NoCoincidences,
    chsh,
    correlation_scan,
    efficiency,
    visibility,
)
from eprsim.model import AnalyzerConfig, NoiseConfig, apply_decoherence, derive_stream, emit_pair, measure_pair
from eprsim.oracle import ToleranceNotMet, class_probabilities, oracle_chsh, oracle_efficiency
from eprsim.sweep import METRICS, AxisSpec, SweepSpec, correlation_surface, run_sweep

PAIR_TRACE_STREAM = 3


class UsageError(Exception):
    pass


class ParseError(UsageError):
    def __init__(self, path: str, lineno: int, message: str) -> None:
        super().__init__(f"{path}:{lineno}: {message}")
        self.lineno = lineno


class UnknownKey(UsageError):
    def __init__(self, key: str, lineno: int | None = None) -> None:
        where = f" (line {lineno})" if lineno else ""
        super().__init__(f"unknown config key {key!r}{where}")
        self.key = key


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise ValueError("must be >= 1")
    return value


def _angles(text: str) -> tuple[float, float, float, float]:
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 4:
        raise ValueError("expected four comma-separated angles a,b,a2,b2")
    return tuple(parts)


def _metrics(text: str) -> tuple[str, ...]:
    names = tuple(m.strip() for m in text.split(",") if m.strip())
    bad = [m for m in names if m not in METRICS]
    if bad or not names:
        raise ValueError(f"metric must be from {', '.join(METRICS)}")
    return names


# long flag name -> (converter, default, help)
FLAGS: dict[str, tuple[Callable[[str], Any], Any, str]] = {
    "seed": (_seed, 0, "master seed (64-bit unsigned)"),
    "pairs": (_positive_int, None, "pairs per setting (per CHSH term for chsh)"),
    "decoherence": (float, 0.0, "decoherence fraction d in [0, 1]"),
    "threshold": (float, 0.0, "polarizer threshold in [0, 0.5]"),
    "alpha-deg": (float, 0.0, "polarizer 1 angle in degrees"),
    "beta-deg": (float, 0.0, "polarizer 2 angle in degrees"),
    "alpha-step-deg": (float, 1.8, "polarizer 1 scan step in degrees"),
    "angles-deg": (_angles, DEFAULT_CHSH_ANGLES_DEG, "CHSH settings a,b,a2,b2 in degrees"),
    "metric": (_metrics, ("visibility",), "comma-separated subset of " + ",".join(METRICS)),
    "d-steps": (_positive_int, 51, "decoherence grid points (0..1 inclusive)"),
    "t-steps": (_positive_int, 51, "threshold grid points (0..0.5 inclusive)"),
    "threads": (_positive_int, 1, "worker threads for sweeps"),
    "out": (str, None, "output file (default stdout)"),
}

COMMON = ("seed", "pairs", "decoherence", "threshold", "out")
COMMANDS: dict[str, tuple[str, tuple[str, ...], int]] = {
    "pair-trace": ("per-pair hidden variables and outcomes", COMMON + ("alpha-deg", "beta-deg"), 10),
    "correlation": ("one polarizer-1 scan", COMMON + ("beta-deg", "alpha-step-deg"), 2000),
    "chsh": ("one CHSH datapoint", COMMON + ("angles-deg",), 10000),
    "sweep": ("grid over decoherence x threshold",
              COMMON + ("beta-deg", "alpha-step-deg", "angles-deg", "metric", "d-steps", "t-steps", "threads"),
              2000),
    "oracle": ("exact probabilities by quadrature", ("alpha-deg", "beta-deg", "threshold", "decoherence",
                                                     "angles-deg", "out"), 0),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: D401 - argparse hook
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="eprsim", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"eprsim {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    for name, (help_text, flags, _) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        for flag in flags:
            conv, default, help_ = FLAGS[flag]
            p.add_argument(f"--{flag}", type=_argtype(conv), default=None, help=f"{help_} [default: {default}]")
        p.add_argument("--config", default=None, help="key = value file; flags override it")
    return parser


def _argtype(conv):
    def wrapped(text: str):
        try:
            return conv(text)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None

    wrapped.__name__ = getattr(conv, "__name__", "value").lstrip("_")
    return wrapped


def load_config(path: str | Path) -> dict[str, Any]:
    """Read ``key = value`` lines; blank lines and ``#`` comments are skipped."""
    path = str(path)
    values: dict[str, Any] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError(path, lineno, f"expected 'key = value', got {line!r}")
            key, _, value = (s.strip() for s in line.partition("="))
            if key not in FLAGS:
                raise UnknownKey(key, lineno)
            try:
                values[key] = FLAGS[key][0](value)
            except ValueError as exc:
                raise ParseError(path, lineno, f"bad value for {key}: {exc}") from None
    return values


def resolve(command: str, ns: argparse.Namespace) -> dict[str, Any]:
    """Defaults, then config file, then command-line flags."""
    _, flags, default_pairs = COMMANDS[command]
    try:
        file_values = load_config(ns.config) if ns.config else {}
    except FileNotFoundError:
        raise UsageError(f"config file not found: {ns.config}") from None
    resolved = {}
    for flag in flags:
        value = getattr(ns, flag.replace("-", "_"))
        if value is None:
            value = file_values.get(flag, FLAGS[flag][1])
        resolved[flag] = value
    if "pairs" in resolved and resolved["pairs"] is None:
        resolved["pairs"] = default_pairs
    return resolved


@dataclass
class RunManifest:
    command: str
    config: dict[str, Any]
    master_seed: int | None = None
    version: str = __version__
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds"))

    def lines(self) -> list[str]:
        out = [f"# tool = eprsim {self.version}", f"# command = {self.command}"]
        for key in sorted(self.config):
            value = self.config[key]
            if key == "out" or value is None:
                continue
            out.append(f"# {key} = {_config_text(value)}")
        out.append(f"# timestamp = {self.timestamp}")
        return out


def _config_text(value: Any) -> str:
    if isinstance(value, (tuple, list)):
        return ",".join(_config_text(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def fmt(value: Any) -> str:
    """Six significant digits, locale independent; undefined cells become ``undef``."""
    if value is None or value is np.ma.masked:
        return "undef"
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if not math.isfinite(value):
        return "undef"
    if value == 0.0:
        value = 0.0  # drop the sign of -0.0
    return format(value, ".6g")


class _Table:
    def __init__(self, manifest: RunManifest) -> None:
        self.buf = io.StringIO()
        self.writer = csv.writer(self.buf, lineterminator="\n")
        for line in manifest.lines():
            self.buf.write(line + "\n")

    def comment(self, text: str) -> None:
        self.buf.write(f"# {text}\n")

    def row(self, cells: Sequence[Any]) -> None:
        self.writer.writerow([c if isinstance(c, str) else fmt(c) for c in cells])

    def getvalue(self) -> str:
        return self.buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _cmd_pair_trace(cfg: dict[str, Any]) -> dict[str, str]:
    noise = NoiseConfig(cfg["decoherence"])
    ana_a = AnalyzerConfig(math.radians(cfg["alpha-deg"]), cfg["threshold"])
    ana_b = AnalyzerConfig(math.radians(cfg["beta-deg"]), cfg["threshold"])
    rng = derive_stream(cfg["seed"], (PAIR_TRACE_STREAM,))
    table = _Table(RunManifest("pair-trace", cfg, cfg["seed"]))
    table.row(["pair", "phi1_emitted", "phi2_emitted", "phi1", "phi2", "a", "b", "class"])
    for k in range(cfg["pairs"]):
        emitted = emit_pair(rng)
        pair = apply_decoherence(emitted, noise, rng)
        outcome = measure_pair(pair, ana_a, ana_b)
        table.row([k, emitted.phi1, emitted.phi2, pair.phi1, pair.phi2,
                   outcome.a.symbol, outcome.b.symbol, outcome.coincidence or "lost"])
    return {"": table.getvalue()}


def _experiment(cfg: dict[str, Any]) -> ExperimentConfig:
    return ExperimentConfig(
        pairs_per_setting=cfg["pairs"],
        noise=NoiseConfig(cfg["decoherence"]),
        threshold=cfg["threshold"],
        beta=math.radians(cfg.get("beta-deg", 0.0)),
        alpha_step=math.radians(cfg.get("alpha-step-deg", 1.8)),
        master_seed=cfg["seed"],
    )


def _cmd_correlation(cfg: dict[str, Any]) -> dict[str, str]:
    exp = _experiment(cfg)
    curve = correlation_scan(exp)
    table = _Table(RunManifest("correlation", cfg, cfg["seed"]))
    try:
        vis: float | None = visibility(curve)
    except AllZeroCounts:
        vis = None
    table.comment(f"visibility = {fmt(vis)}")
    table.comment(f"efficiency = {fmt(efficiency(curve.total()))}")
    table.row(["alpha_deg", "alpha_rad", "n_pp", "n_pm", "n_mp", "n_mm", "n_lost", "n_total", "f_pp"])
    for alpha, c, f in zip(curve.alphas, curve.counts, curve.frequencies):
        table.row([math.degrees(alpha), alpha, c.n_pp, c.n_pm, c.n_mp, c.n_mm, c.n_lost, c.n_total, f])
    return {"": table.getvalue()}


def _cmd_chsh(cfg: dict[str, Any]) -> dict[str, str]:
    exp = _experiment(cfg)
    a, b, a2, b2 = cfg["angles-deg"]
    res = chsh(exp, math.radians(a), math.radians(a2), math.radians(b), math.radians(b2), n_pairs=cfg["pairs"])
    table = _Table(RunManifest("chsh", cfg, cfg["seed"]))
    table.row(["a_deg", "b_deg", "a2_deg", "b2_deg", "pairs", "e11", "e12", "e21", "e22", "s", "violation"])
    table.row([a, b, a2, b2, cfg["pairs"], res.e11, res.e12, res.e21, res.e22, res.s_value, res.violation])
    return {"": table.getvalue()}


def _cmd_sweep(cfg: dict[str, Any]) -> dict[str, str]:
    exp = _experiment(cfg)
    spec = SweepSpec(
        d_axis=AxisSpec(0.0, 1.0, cfg["d-steps"]),
        t_axis=AxisSpec(0.0, 0.5, cfg["t-steps"]),
        metrics=cfg["metric"],
        base_config=exp,
        chsh_angles=tuple(math.radians(x) for x in cfg["angles-deg"]),
    )
    outputs = {}
    manifest = RunManifest("sweep", cfg, cfg["seed"])
    if "correlation" in spec.metrics:
        surface = correlation_surface(spec, workers=cfg["threads"])
        table = _Table(manifest)
        table.comment("metric = correlation")
        table.row(["decoherence\\alpha_deg"] + [fmt(math.degrees(a)) for a in surface.alphas])
        for d, row in zip(surface.d_values, surface.frequencies):
            table.row([d, *row])
        outputs["correlation"] = table.getvalue()
    grid_metrics = tuple(m for m in spec.metrics if m != "correlation")
    if grid_metrics:
        grid = run_sweep(SweepSpec(spec.d_axis, spec.t_axis, grid_metrics, exp,
                                   chsh_angles=spec.chsh_angles), workers=cfg["threads"])
        for metric in grid_metrics:
            table = _Table(manifest)
            table.comment(f"metric = {metric}")
            table.row(["decoherence\\threshold"] + [fmt(t) for t in grid.t_values])
            values = grid[metric]
            for i, d in enumerate(grid.d_values):
                table.row([d, *(values[i, j] for j in range(len(grid.t_values)))])
            outputs[metric] = table.getvalue()
    return {m: outputs[m] for m in spec.metrics}


def _cmd_oracle(cfg: dict[str, Any]) -> dict[str, str]:
    alpha, beta = math.radians(cfg["alpha-deg"]), math.radians(cfg["beta-deg"])
    t, d = cfg["threshold"], cfg["decoherence"]
    p = class_probabilities(alpha, beta, t, d)
    try:
        res = oracle_chsh(t, d, tuple(math.radians(x) for x in cfg["angles-deg"]))
        s, violation = res.s_value, res.violation
    except NoCoincidences:
        s = violation = None
    table = _Table(RunManifest("oracle", cfg))
    table.row(["alpha_deg", "beta_deg", "threshold", "decoherence",
               "p_pp", "p_pm", "p_mp", "p_mm", "p_lost", "efficiency", "s", "violation"])
    table.row([cfg["alpha-deg"], cfg["beta-deg"], t, d, p["pp"], p["pm"], p["mp"], p["mm"], p["lost"],
               oracle_efficiency(t, d), s, violation])
    return {"": table.getvalue()}


HANDLERS = {
    "pair-trace": _cmd_pair_trace,
    "correlation": _cmd_correlation,
    "chsh": _cmd_chsh,
    "sweep": _cmd_sweep,
    "oracle": _cmd_oracle,
}


def _write_outputs(outputs: dict[str, str], out: str | None) -> None:
    if len(outputs) == 1:
        _emit(next(iter(outputs.values())), out)
        return
    if out is None:
        raise UsageError("several metrics need --out; files are named <stem>_<metric><suffix>")
    base = Path(out)
    for metric, text in outputs.items():
        _emit(text, str(base.with_name(f"{base.stem}_{metric}{base.suffix or '.csv'}")))


def main(argv: Sequence[str] | None = None) -> int:
    """Entry point; returns 0 on success, 1 on usage errors, 2 on runtime errors."""
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        if ns.command is None:
            raise UsageError("a command is required: " + ", ".join(COMMANDS))
        cfg = resolve(ns.command, ns)
        outputs = HANDLERS[ns.command](cfg)
        _write_outputs(outputs, cfg.get("out"))
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except (UsageError, ValueError) as exc:
        print(f"eprsim: error: {exc}", file=sys.stderr)
        return 1
    except (AllZeroCounts, NoCoincidences, ToleranceNotMet, OSError) as exc:
        print(f"eprsim: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
