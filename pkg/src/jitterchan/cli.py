"""Batch experiment runner.

    jitterchan <experiment> --config <path> [--seed U64] [--threads K]
               [--trials-scale F] --out <path.csv>

The config is flat ``key = value`` text (``#`` starts a comment). Lists are
comma separated and SNR grids may also be written ``start:stop:step`` with
an inclusive stop. The CSV opens with a ``#`` block holding the effective
config, seed and tool version, so :func:`config_from_csv` can rebuild the
run; the thread count is deliberately left out of the file.
"""

from __future__ import annotations

import argparse
import io
import math
import os
import sys
import tempfile
import warnings
from dataclasses import dataclass, fields, replace
from typing import Iterable

import numpy as np

from . import __version__
from .channel import ChannelParams, sigma_from_snr, snr_db
from .detect import DETECTOR_KINDS
from .infotheory import (
    DegenerateRate,
    c_awgn_ratio,
    capacity_global,
    capacity_independent,
    fano_bound,
    rcb_bound,
    rcb_independent,
)
from .rs import (
    DegenerateCriticalAmplitude,
    RsCode,
    cond_symbol_error,
    high_rate_floor,
    ser_upper_bound,
)
from .sim import SweepSpec, run_sweep

__all__ = [
    "EXPERIMENTS",
    "PRESETS",
    "ConfigError",
    "Diagnostic",
    "ExperimentConfig",
    "parse_config_text",
    "build_config",
    "validate",
    "run",
    "run_to_csv",
    "config_from_csv",
    "main",
]

EXPERIMENTS = (
    "ber-sweep",
    "rs-ser-sweep",
    "capacity-curve",
    "rcb-curve",
    "fano-curve",
    "floor-report",
    "figure-preset",
)
ANALYTIC = ("capacity-curve", "rcb-curve", "fano-curve", "floor-report")

COLUMNS = {
    "ber-sweep": (
        "sigma_j", "snr_db", "detector", "threshold", "snapshots", "bits", "bit_errors", "ber", "ci95_lo", "ci95_hi",
    ),
    "rs-ser-sweep": (
        "sigma_j", "block_symbols", "info_symbols", "rate", "snr_db", "detector", "sectors", "sector_errors",
        "ser", "ci95_lo", "ci95_hi", "bound_floor", "bound_total", "fano_floor",
    ),
    "capacity-curve": ("sigma_j", "snr_db", "c_awgn_at_p1", "c_global", "c_independent"),
    "rcb-curve": (
        "sigma_j", "rate", "block_length", "snr_db", "status", "p_c", "floor_term", "laplace_term", "total",
        "high_rate_tail_bound", "high_rate_floor", "rcb_independent",
    ),
    "fano-curve": ("sigma_j", "rate", "snr_db", "status", "p_c", "exact_floor", "weak_floor", "errf_floor"),
    "floor-report": (
        "sigma_j", "rate", "block_symbols", "snr_db", "status", "rs_floor", "rs_laplace", "rs_total",
        "rs_high_rate", "rcb_floor", "rcb_high_rate", "fano_exact", "fano_errf",
    ),
}

# key -> value kind: float, int, bool, str, floats, ints, strs or grid
SCHEMA = {
    "experiment": "str",
    "preset": "str",
    "sigma_j": "floats",
    "pulse_width": "float",
    "num_probes": "int",
    "symbol_bits": "int",
    "block_symbols": "ints",
    "rate": "floats",
    "snr_db": "grid",
    "sigma": "floats",
    "detector": "strs",
    "trials": "int",
    "seed": "int",
    "fixed_threshold": "float",
    "independent": "bool",
    "trials_scale": "float",
    "threads": "int",
}


# a preset fixes the physics; only the run budget and seed stay configurable
PRESET_KEYS = ("experiment", "preset", "trials", "seed", "trials_scale", "threads")


class ConfigError(ValueError):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))


@dataclass(frozen=True)
class Diagnostic:
    level: str  # "error" or "warning"
    field: str
    message: str

    def __str__(self) -> str:
        return f"{self.level}: {self.field}: {self.message}"


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    preset: str | None = None
    sigma_j: tuple[float, ...] = (0.2,)
    pulse_width: float = 0.5
    num_probes: int | None = None
    symbol_bits: int = 10
    block_symbols: tuple[int, ...] = (255,)
    rate: tuple[float, ...] = (0.8,)
    snr_db: tuple[float, ...] = ()
    detector: tuple[str, ...] = ("lln",)
    trials: int = 100_000
    seed: int = 0
    fixed_threshold: float | None = None
    independent: bool | None = None
    trials_scale: float = 1.0
    threads: int = 1

    @property
    def scaled_trials(self) -> int:
        return max(1, int(round(self.trials * self.trials_scale)))

    def probes_for(self, block_symbols: int | None = None) -> int:
        """Explicit num_probes, else n * N_s for RS runs, else 1000."""
        if self.num_probes is not None:
            return self.num_probes
        if block_symbols is not None:
            return self.symbol_bits * block_symbols
        return 1000

    def with_independent_default(self) -> bool:
        if self.independent is not None:
            return self.independent
        return self.experiment == "capacity-curve"


# ---------------------------------------------------------------- parsing


def parse_config_text(text: str) -> dict[str, str]:
    """Flat ``key = value`` pairs; later keys override earlier ones."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError([Diagnostic("error", f"line {lineno}", f"expected key = value, got {raw!r}")])
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _parse_grid(text: str) -> tuple[float, ...]:
    text = text.strip()
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise ValueError("grid must be start:stop:step with step > 0")
        start, stop, step = parts
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(round(start + i * step, 10) for i in range(n))
    return tuple(float(v) for v in text.split(",") if v.strip())


def _parse_value(kind: str, text: str):
    if kind == "float":
        return float(text)
    if kind == "int":
        return int(text, 0)
    if kind == "bool":
        t = text.lower()
        if t in ("1", "true", "yes", "on"):
            return True
        if t in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if kind == "str":
        return text
    if kind == "floats":
        return tuple(float(v) for v in text.split(",") if v.strip())
    if kind == "ints":
        return tuple(int(v) for v in text.split(",") if v.strip())
    if kind == "strs":
        return tuple(v.strip() for v in text.split(",") if v.strip())
    if kind == "grid":
        return _parse_grid(text)
    raise AssertionError(kind)


def build_config(raw: dict[str, str], experiment: str) -> ExperimentConfig:
    """Typed config from raw strings; raises :class:`ConfigError` listing every bad field."""
    errors = []
    if experiment not in EXPERIMENTS:
        errors.append(Diagnostic("error", "experiment", f"unknown experiment {experiment!r}; expected one of {EXPERIMENTS}"))
    values = {}
    for key, text in raw.items():
        if key not in SCHEMA:
            errors.append(Diagnostic("error", key, "unknown key"))
            continue
        try:
            values[key] = _parse_value(SCHEMA[key], text)
        except ValueError as exc:
            errors.append(Diagnostic("error", key, f"cannot parse {text!r}: {exc}"))
    if experiment == "figure-preset":
        for key in values:
            if key not in PRESET_KEYS:
                errors.append(Diagnostic("error", key, f"not settable for figure-preset (allowed: {', '.join(PRESET_KEYS)})"))
    if "experiment" in values and values["experiment"] != experiment:
        errors.append(Diagnostic("error", "experiment", f"config says {values['experiment']!r} but {experiment!r} was requested"))
    if errors:
        raise ConfigError(errors)
    values.pop("experiment", None)
    sig = values.pop("sigma", None)
    if sig is not None:
        if "snr_db" in values:
            raise ConfigError([Diagnostic("error", "sigma", "give either sigma or snr_db, not both")])
        try:
            values["snr_db"] = tuple(math.inf if s == 0 else snr_db(s) for s in sig)
        except ValueError as exc:
            raise ConfigError([Diagnostic("error", "sigma", str(exc))]) from None
    return ExperimentConfig(experiment=experiment, **values)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".12g")
    if isinstance(v, tuple):
        return ",".join(_fmt(x) for x in v)
    return str(v)


def config_lines(cfg: ExperimentConfig) -> list[str]:
    """Canonical ``key = value`` lines of a config (thread count omitted)."""
    lines = []
    for f in fields(cfg):
        if f.name == "threads":
            continue
        if cfg.experiment == "figure-preset" and f.name not in PRESET_KEYS:
            continue
        v = getattr(cfg, f.name)
        if v is None:
            continue
        lines.append(f"{f.name} = {_fmt(v)}")
    return lines


# ---------------------------------------------------------------- presets

PRESET_NOTE = (
    "Presets use the published settings (N = 1000 or N_s in {255, 511, 1023}, n = 10, R = 0.8, W = 0.5) "
    "with desk-scale trial counts: 1e5 snapshots per BER point and 1e5 sectors per RS point, times --trials-scale."
)

PRESETS: dict[str, tuple[str, list[dict]]] = {
    # LLN versus genie, with the jitter-free AWGN reference
    "fig3": ("ber-sweep", [
        dict(sigma_j=(0.0, 0.1, 0.2, 0.3), snr_db=_parse_grid("10:22:2"), detector=("genie", "lln"), num_probes=1000),
    ]),
    # LLN versus independent per-probe ML slicers
    "fig4": ("ber-sweep", [
        dict(sigma_j=(0.2,), snr_db=_parse_grid("20:36:2"), detector=("genie", "lln", "fixed"), num_probes=1000),
        dict(sigma_j=(0.3,), snr_db=_parse_grid("40:60:2"), detector=("genie", "lln", "fixed"), num_probes=1000),
    ]),
    # block-size independence of RS sector error rate
    "fig5": ("rs-ser-sweep", [
        dict(sigma_j=(0.2,), block_symbols=(255, 511, 1023), rate=(0.8,), snr_db=_parse_grid("12:26:2")),
    ]),
    # rate independence of the RS floor slope
    "fig6": ("rs-ser-sweep", [
        dict(sigma_j=(0.2,), block_symbols=(255,), rate=(0.5, 0.8, 0.9), snr_db=_parse_grid("12:26:2")),
    ]),
    "fig7": ("capacity-curve", [
        dict(sigma_j=(0.0, 0.1, 0.2, 0.3), snr_db=_parse_grid("0:40:2"), independent=False),
    ]),
    "fig7b": ("capacity-curve", [
        dict(sigma_j=(0.3,), snr_db=_parse_grid("0:30:2"), independent=True),
    ]),
    "fig8": ("rcb-curve", [
        dict(sigma_j=(0.2,), rate=(0.5, 0.8, 0.9), num_probes=1000, snr_db=_parse_grid("6:30:2"), independent=True),
    ]),
    "fig9": ("rcb-curve", [
        dict(sigma_j=(0.2,), rate=_parse_grid("0.05:0.95:0.05"), num_probes=1000, snr_db=(20.0,), independent=False),
    ]),
}


def preset_configs(cfg: ExperimentConfig) -> list[ExperimentConfig]:
    if cfg.preset not in PRESETS:
        raise ConfigError([Diagnostic("error", "preset", f"unknown preset {cfg.preset!r}; expected one of {tuple(PRESETS)}")])
    kind, parts = PRESETS[cfg.preset]
    return [replace(cfg, experiment=kind, preset=None, **part) for part in parts]


# ---------------------------------------------------------------- validation


def validate(cfg: ExperimentConfig) -> list[Diagnostic]:
    """Every violated precondition of ``cfg``, without running anything."""
    if cfg.experiment == "figure-preset":
        if cfg.preset is None:
            return [Diagnostic("error", "preset", "figure-preset needs preset = fig3|fig4|...")]
        try:
            subs = preset_configs(cfg)
        except ConfigError as exc:
            return exc.diagnostics
        out = []
        for sub in subs:
            out.extend(validate(sub))
        return out

    out: list[Diagnostic] = []
    kind = cfg.experiment
    if cfg.preset is not None:
        out.append(Diagnostic("error", "preset", "preset is only meaningful for figure-preset"))
    if not cfg.snr_db:
        out.append(Diagnostic("error", "snr_db", "no SNR grid given (snr_db or sigma)"))
    if any(not b > a for a, b in zip(cfg.snr_db, cfg.snr_db[1:])):
        out.append(Diagnostic("error", "snr_db", "SNR grid must be strictly increasing"))
    if any(math.isnan(x) or x == -math.inf for x in cfg.snr_db):
        out.append(Diagnostic("error", "snr_db", "SNR values must be finite or +inf"))
    if not cfg.sigma_j or any(not (s >= 0 and math.isfinite(s)) for s in cfg.sigma_j):
        out.append(Diagnostic("error", "sigma_j", "jitter strengths must be finite and >= 0"))
    if not cfg.pulse_width > 0:
        out.append(Diagnostic("error", "pulse_width", "must be > 0"))
    if cfg.symbol_bits < 1:
        out.append(Diagnostic("error", "symbol_bits", "must be >= 1"))
    if cfg.num_probes is not None and cfg.num_probes < 1:
        out.append(Diagnostic("error", "num_probes", "must be >= 1"))
    if cfg.trials < 1:
        out.append(Diagnostic("error", "trials", "must be >= 1"))
    if not cfg.trials_scale > 0:
        out.append(Diagnostic("error", "trials_scale", "must be > 0"))
    if not 0 <= cfg.seed < 2**64:
        out.append(Diagnostic("error", "seed", "must be an unsigned 64-bit integer"))
    if cfg.threads < 1:
        out.append(Diagnostic("error", "threads", "must be >= 1"))
    if any(not 0.0 < r < 1.0 for r in cfg.rate):
        out.append(Diagnostic("error", "rate", "code rates must lie in (0, 1)"))
    if kind in ("ber-sweep", "rs-ser-sweep"):
        for d in cfg.detector:
            if d not in DETECTOR_KINDS:
                out.append(Diagnostic("error", "detector", f"unknown detector {d!r}; expected one of {DETECTOR_KINDS}"))
        if "fixed" in cfg.detector and cfg.fixed_threshold is None and math.inf in cfg.snr_db:
            out.append(Diagnostic("error", "snr_db", "the fixed detector's ML threshold needs sigma > 0"))
    if kind in ANALYTIC and math.inf in cfg.snr_db:
        out.append(Diagnostic("error", "snr_db", f"{kind} needs sigma > 0 (got an infinite SNR / sigma = 0)"))
    if kind in ("rs-ser-sweep", "floor-report"):
        codes = []
        for Ns in cfg.block_symbols:
            for R in cfg.rate:
                try:
                    codes.append(RsCode.from_rate(cfg.symbol_bits, Ns, R))
                except ValueError as exc:
                    out.append(Diagnostic("error", "block_symbols", str(exc)))
            if kind == "rs-ser-sweep" and cfg.num_probes is not None and cfg.num_probes != cfg.symbol_bits * Ns:
                out.append(Diagnostic(
                    "error", "num_probes",
                    f"num_probes = {cfg.num_probes} != symbol_bits * block_symbols = "
                    f"{cfg.symbol_bits} * {Ns} = {cfg.symbol_bits * Ns}",
                ))
        for code in codes:
            if code.tau > 0.15 and kind == "floor-report":
                out.append(Diagnostic("warning", "rate", f"tau = {code.tau:.3f} > 0.15: high-rate floor is coarse"))
            for x in cfg.snr_db:
                if not math.isfinite(x):
                    continue
                s = sigma_from_snr(x)
                e1 = cond_symbol_error(1.0, s, code.symbol_bits)
                if e1 > code.tau:
                    out.append(Diagnostic(
                        "warning", "snr_db",
                        f"degenerate critical amplitude at sigma = {s:.4g}, tau = {code.tau:.4g}, n = {code.symbol_bits}: "
                        f"e1(p=1) = {e1:.4g} > tau",
                    ))
    if kind in ("rcb-curve", "fano-curve", "floor-report"):
        for R in cfg.rate:
            for x in cfg.snr_db:
                if math.isfinite(x) and 0 < R < 1 and c_awgn_ratio(1.0 / sigma_from_snr(x)) < R:
                    out.append(Diagnostic("warning", "snr_db", f"degenerate critical amplitude: C_AWGN(p=1) < R = {R:g} at {x:g} dB"))
    return out


# ---------------------------------------------------------------- running


def _ber_rows(cfg: ExperimentConfig, threads: int) -> list[tuple]:
    rows = []
    N = cfg.probes_for()
    for sj in cfg.sigma_j:
        params = ChannelParams(1.0, sj, cfg.pulse_width, N, cfg.symbol_bits)
        spec = SweepSpec(params, cfg.snr_db, cfg.detector, cfg.scaled_trials, cfg.seed, None, cfg.fixed_threshold)
        res = run_sweep(spec, threads)
        for i, x in enumerate(cfg.snr_db):
            for d in cfg.detector:
                pt = res[d][i]
                c = pt.counts
                lo, hi = pt.ber_ci95
                rows.append((sj, x, d, pt.threshold, cfg.scaled_trials, c.bits_observed, c.bit_errors, pt.ber, lo, hi))
    return rows


def _rs_rows(cfg: ExperimentConfig, threads: int) -> list[tuple]:
    rows = []
    for sj in cfg.sigma_j:
        for Ns in cfg.block_symbols:
            for R in cfg.rate:
                code = RsCode.from_rate(cfg.symbol_bits, Ns, R)
                params = ChannelParams(1.0, sj, cfg.pulse_width, cfg.probes_for(Ns), cfg.symbol_bits)
                spec = SweepSpec(params, cfg.snr_db, cfg.detector, cfg.scaled_trials, cfg.seed, code, cfg.fixed_threshold)
                res = run_sweep(spec, threads)
                for i, x in enumerate(cfg.snr_db):
                    floor = total = fano = math.nan
                    if math.isfinite(x):
                        p = params.with_snr(x)
                        try:
                            b = ser_upper_bound(p, code)
                            floor, total = b.floor_term, b.total
                        except DegenerateCriticalAmplitude:
                            floor = total = 1.0
                        try:
                            fano = fano_bound(code.rate, p).exact_floor
                        except DegenerateRate:
                            pass
                    for d in cfg.detector:
                        pt = res[d][i]
                        c = pt.counts
                        lo, hi = pt.ser_ci95
                        rows.append((sj, Ns, code.info_symbols, code.rate, x, d, c.sectors_observed, c.sector_errors,
                                     pt.ser, lo, hi, floor, total, fano))
    return rows


def _capacity_rows(cfg: ExperimentConfig) -> list[tuple]:
    rows = []
    indep = cfg.with_independent_default()
    for sj in cfg.sigma_j:
        for x in cfg.snr_db:
            p = ChannelParams(sigma_from_snr(x), sj, cfg.pulse_width, cfg.probes_for(), cfg.symbol_bits)
            ci = capacity_independent(p) if indep else math.nan
            rows.append((sj, x, c_awgn_ratio(1.0 / p.sigma), capacity_global(p), ci))
    return rows


def _rcb_rows(cfg: ExperimentConfig) -> list[tuple]:
    rows = []
    N = cfg.probes_for()
    indep = cfg.with_independent_default()
    for sj in cfg.sigma_j:
        for R in cfg.rate:
            for x in cfg.snr_db:
                p = ChannelParams(sigma_from_snr(x), sj, cfg.pulse_width, N, cfg.symbol_bits)
                ind = rcb_independent(R, N, p) if indep else math.nan
                try:
                    b = rcb_bound(R, N, p)
                except DegenerateRate:
                    rows.append((sj, R, N, x, "degenerate") + (math.nan,) * 6 + (ind,))
                    continue
                rows.append((sj, R, N, x, "ok", b.p_c, b.floor_term, b.laplace_term, b.total,
                             b.high_rate_tail_bound, b.high_rate_floor, ind))
    return rows


def _fano_rows(cfg: ExperimentConfig) -> list[tuple]:
    rows = []
    for sj in cfg.sigma_j:
        for R in cfg.rate:
            for x in cfg.snr_db:
                p = ChannelParams(sigma_from_snr(x), sj, cfg.pulse_width, cfg.probes_for(), cfg.symbol_bits)
                try:
                    f = fano_bound(R, p)
                except DegenerateRate:
                    weak = max(0.0, 1.0 - capacity_global(p) / R)
                    rows.append((sj, R, x, "degenerate", math.nan, math.nan, weak, math.nan))
                    continue
                rows.append((sj, R, x, "ok", f.p_c, f.exact_floor, f.weak_floor, f.errf_floor))
    return rows


def _floor_rows(cfg: ExperimentConfig) -> list[tuple]:
    rows = []
    for sj in cfg.sigma_j:
        for R in cfg.rate:
            for Ns in cfg.block_symbols:
                code = RsCode.from_rate(cfg.symbol_bits, Ns, R)
                for x in cfg.snr_db:
                    p = ChannelParams(sigma_from_snr(x), sj, cfg.pulse_width, cfg.probes_for(Ns), cfg.symbol_bits)
                    try:
                        b = ser_upper_bound(p, code)
                        rcb = rcb_bound(code.rate, p.num_probes, p)
                        fano = fano_bound(code.rate, p)
                    except (DegenerateCriticalAmplitude, DegenerateRate):
                        rows.append((sj, code.rate, Ns, x, "degenerate") + (math.nan,) * 8)
                        continue
                    with warnings.catch_warnings():
                        warnings.simplefilter("ignore")
                        coeff, gamma = high_rate_floor(p, code)
                    rows.append((sj, code.rate, Ns, x, "ok", b.floor_term, b.laplace_term, b.total,
                                 coeff * p.sigma**gamma, rcb.floor_term, rcb.high_rate_floor,
                                 fano.exact_floor, fano.errf_floor))
    return rows


def run(cfg: ExperimentConfig, threads: int | None = None) -> tuple[tuple[str, ...], list[tuple]]:
    """Validate and execute ``cfg``; returns (columns, rows)."""
    diags = [d for d in validate(cfg) if d.level == "error"]
    if diags:
        raise ConfigError(diags)
    threads = cfg.threads if threads is None else threads
    if cfg.experiment == "figure-preset":
        subs = preset_configs(cfg)
        cols = COLUMNS[subs[0].experiment]
        rows = []
        for sub in subs:
            rows.extend(run(sub, threads)[1])
        return cols, rows
    kind = cfg.experiment
    if kind == "ber-sweep":
        rows = _ber_rows(cfg, threads)
    elif kind == "rs-ser-sweep":
        rows = _rs_rows(cfg, threads)
    elif kind == "capacity-curve":
        rows = _capacity_rows(cfg)
    elif kind == "rcb-curve":
        rows = _rcb_rows(cfg)
    elif kind == "fano-curve":
        rows = _fano_rows(cfg)
    else:
        rows = _floor_rows(cfg)
    return COLUMNS[kind], rows


def render_csv(cfg: ExperimentConfig, columns: Iterable[str], rows: Iterable[tuple]) -> str:
    buf = io.StringIO()
    buf.write(f"# jitterchan {__version__}\n")
    buf.write(f"# seed = {cfg.seed}\n")
    for line in config_lines(cfg):
        buf.write(f"# config: {line}\n")
    if cfg.experiment == "figure-preset":
        buf.write(f"# {PRESET_NOTE}\n")
        for sub in preset_configs(cfg):
            desc = "; ".join(line for line in config_lines(sub) if not line.startswith(("seed", "trials_scale")))
            buf.write(f"# run: {desc}\n")
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".jitterchan-", suffix=".tmp", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def run_to_csv(cfg: ExperimentConfig, out: str, threads: int | None = None) -> str:
    """Run and write the CSV atomically; nothing is written if the run fails."""
    columns, rows = run(cfg, threads)
    text = render_csv(cfg, columns, rows)
    _atomic_write(out, text)
    return text


def config_from_csv(path_or_text: str) -> ExperimentConfig:
    """Rebuild the config recorded in a CSV's comment block."""
    text = path_or_text
    if "\n" not in path_or_text and os.path.exists(path_or_text):
        with open(path_or_text, encoding="utf-8") as fh:
            text = fh.read()
    raw = {}
    for line in text.splitlines():
        if not line.startswith("#"):
            break
        body = line[1:].strip()
        if body.startswith("config:"):
            key, value = (s.strip() for s in body[len("config:"):].split("=", 1))
            raw[key] = value
    experiment = raw.pop("experiment", None)
    if experiment is None:
        raise ConfigError([Diagnostic("error", "experiment", "no config block found")])
    return build_config(raw, experiment)


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="jitterchan", description=__doc__.split("\n\n")[0])
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--config", required=True, help="flat key = value config file")
    ap.add_argument("--seed", type=int, default=None, help="master seed (unsigned 64-bit); overrides the config")
    ap.add_argument("--threads", type=int, default=None, help="worker threads; never changes the output")
    ap.add_argument("--trials-scale", type=float, default=None, help="multiplier on trial counts")
    ap.add_argument("--out", required=True, help="output CSV path")
    ap.add_argument("--validate-only", action="store_true", help="print diagnostics and exit")
    args = ap.parse_args(argv)
    try:
        with open(args.config, encoding="utf-8") as fh:
            raw = parse_config_text(fh.read())
        cfg = build_config(raw, args.experiment)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        if args.trials_scale is not None:
            cfg = replace(cfg, trials_scale=args.trials_scale)
        if args.threads is not None:
            cfg = replace(cfg, threads=args.threads)
        diags = validate(cfg)
        for d in diags:
            print(d, file=sys.stderr)
        if args.validate_only:
            return 1 if any(d.level == "error" for d in diags) else 0
        if any(d.level == "error" for d in diags):
            return 2
        run_to_csv(cfg, args.out)
    except ConfigError as exc:
        for d in exc.diagnostics:
            print(d, file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
