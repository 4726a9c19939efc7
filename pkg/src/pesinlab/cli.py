"""Command-line front end.

Subcommands: lyapunov, ks-entropy, pesin, prescription, gamow-evolve.
Every run resolves its configuration from, in increasing precedence,
built-in defaults, a JSON --config file, and explicit flags; the resolved
values are echoed into the output metadata so a result is reproducible
from the file alone.  Outputs land in --out as JSON and/or CSV.

Exit status: 0 when the run completed (verdicts like NOT PROVEN CHAOTIC
do not change it), 1 when the computation itself failed, 2 for
configuration or usage errors.
"""

from __future__ import annotations

import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import serialize
from .errors import (ConfigurationError, ResourceLimitError,
                     UnsupportedOperationError)
from .gamow import BiorthOperator, GamowSpec, evolve_operator, \
    make_cell_operators, off_mass_ratio
from .lyapunov import lyapunov_spectrum, pesin_residual, positive_sum_field
from .maps import MAP_NAMES, PhasePoint, make_map
from .partitions import (MC_ESTIMATORS, MEASURE_MODES, GridPartition,
                         McConfig, h_mu, h_mu_ratio, hks_estimate,
                         refine_series)
from .pipeline import ClassicalSource, QuantumSource, prescription_run

FORMATS = ("json", "csv", "both")
SOURCES = ("classical", "gamow")
GENERATIONS = ("random", "prescribed")

# Monte Carlo entropies default to the coverage-adjusted estimator: the
# plug-in one visibly flattens entropy slopes once the word count gets
# within a couple of orders of magnitude of the sample count.
DEFAULT_ESTIMATOR = "chao_shen"

_COMMON = {"out": ".", "seed": None, "threads": 1, "format": "both"}

_LYAP_DEFAULTS = {**_COMMON, "map": None, "steps": 10000, "x0": None,
                  "samples": 10}
_KS_DEFAULTS = {**_COMMON, "map": None, "grid": None, "depth": None,
                "mode": "exact", "mc_samples": 1_000_000, "estimator": None,
                "ladder": None, "include_words": None}
_PESIN_DEFAULTS = {**_KS_DEFAULTS, "lyap_steps": 10000, "samples": 10}
_PRESC_DEFAULTS = {**_COMMON, "source": None,
                   "map": None, "grid": None, "mode": "exact",
                   "mc_samples": 1_000_000, "estimator": None,
                   "omega0": 1.0, "gamma0": 0.1, "hbar": 1.0, "alpha": 1.0,
                   "cells": 4, "n_max": 32, "off_scale": 3e-4,
                   "total_mass": 0.95, "spread": 0.2, "support": None,
                   "depth": None, "word_budget": 4096, "r2_threshold": 0.99,
                   "onset": None}
_GAMOW_DEFAULTS = {**_COMMON, "omega0": 1.0, "gamma0": 0.1, "hbar": 1.0,
                   "alpha": 1.0, "n_max": 32, "cells": 4, "cell": 0,
                   "j": 10, "generation": "random", "off_scale": 3e-4,
                   "total_mass": 0.95, "spread": 0.2, "support": None}

_PRESC_SHARED = ("source", "depth", "word_budget", "r2_threshold", "onset",
                 "seed")
_PRESC_CLASSICAL = ("map", "grid", "mode", "mc_samples", "estimator")
_PRESC_GAMOW = ("omega0", "gamma0", "hbar", "alpha", "cells", "n_max",
                "off_scale", "total_mass", "spread", "support")


def _fmt(x: float) -> str:
    return f"{x:.6g}"


# --- config resolution ------------------------------------------------------

def _load_config_file(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc}")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config file {path} is not valid JSON: {exc}")
    if not isinstance(doc, dict):
        raise ConfigurationError("config file must hold a JSON object")
    return doc


def _resolve(args, defaults, extra_file_keys=()):
    cfg = dict(defaults)
    if args.config is not None:
        file_cfg = _load_config_file(args.config)
        unknown = sorted(set(file_cfg) - set(defaults) - set(extra_file_keys))
        if unknown:
            raise ConfigurationError("unknown config keys: " + ", ".join(unknown))
        cfg.update(file_cfg)
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def _resolve_seed(value):
    if value is None:
        env = os.environ.get("PESINLAB_SEED")
        if env is None or env == "":
            return 0
        try:
            value = int(env)
        except ValueError:
            raise ConfigurationError(
                f"PESINLAB_SEED must be an integer, got {env!r}")
    value = _as_int("seed", value, low=0)
    if value >= 2 ** 64:
        raise ConfigurationError("seed must fit in an unsigned 64-bit integer")
    return value


def _as_int(name, value, low=None, high=None):
    if isinstance(value, bool) or not isinstance(value, int):
        try:
            value = int(value)
        except (TypeError, ValueError):
            raise ConfigurationError(
                f"{name} must be an integer, got {value!r}") from None
    if low is not None and value < low:
        raise ConfigurationError(f"{name} must be at least {low}, got {value}")
    if high is not None and value > high:
        raise ConfigurationError(f"{name} must be at most {high}, got {value}")
    return value


def _as_float(name, value, low=None, strict=False):
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ConfigurationError(
            f"{name} must be a number, got {value!r}") from None
    if not math.isfinite(value):
        raise ConfigurationError(f"{name} must be finite")
    if low is not None and (value < low or (strict and value == low)):
        kind = "greater than" if strict else "at least"
        raise ConfigurationError(f"{name} must be {kind} {low}, got {value}")
    return value


def _choice(name, value, options):
    if value not in options:
        raise ConfigurationError(
            f"{name} must be one of {', '.join(options)}; got {value!r}")
    return value


def _parse_grid(value):
    if isinstance(value, (list, tuple)) and len(value) == 2:
        mq, mp = value
    elif isinstance(value, str) and value.count("x") == 1:
        mq, mp = value.split("x")
    else:
        raise ConfigurationError(
            f"grid must look like '2x1' or [2, 1], got {value!r}")
    return (_as_int("grid rows", mq, low=1), _as_int("grid columns", mp, low=1))


def _parse_ladder(value):
    if isinstance(value, str):
        parts = [p for p in value.split(",") if p]
    elif isinstance(value, (list, tuple)):
        parts = list(value)
    else:
        raise ConfigurationError(
            f"ladder must look like '2x1,2x2,4x4', got {value!r}")
    if not parts:
        raise ConfigurationError("ladder is empty")
    return [GridPartition(*_parse_grid(p)) for p in parts]


def _parse_x0(value):
    if isinstance(value, str):
        parts = value.split(",")
    elif isinstance(value, (list, tuple)):
        parts = list(value)
    else:
        parts = None
    if parts is None or len(parts) != 2:
        raise ConfigurationError(f"x0 must look like '0.3,0.7', got {value!r}")
    return PhasePoint(_as_float("x0 q", parts[0]), _as_float("x0 p", parts[1]))


def _default_grid(map_name: str) -> str:
    # the hyperbolic automorphism needs more cells than the piecewise maps
    # before the partition resolves its expansion rate
    return "8x8" if map_name == "cat" else "2x1"


def _prologue(args, defaults, extra_file_keys=()):
    cfg = _resolve(args, defaults, extra_file_keys)
    cfg["seed"] = _resolve_seed(cfg.get("seed"))
    cfg["threads"] = _as_int("threads", cfg["threads"], low=1)
    _choice("format", cfg["format"], FORMATS)
    out_dir = Path(cfg["out"])
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigurationError(
            f"cannot create output directory {out_dir}: {exc}")
    return cfg, out_dir


def _jsonable(value):
    if isinstance(value, tuple):
        return [_jsonable(v) for v in value]
    if isinstance(value, list):
        return [_jsonable(v) for v in value]
    return value


def _echo(cfg, keys=None):
    hidden = {"out", "config", "format", "threads"}
    if keys is None:
        keys = [k for k in cfg if k not in hidden]
    return {k: _jsonable(cfg[k]) for k in sorted(keys)}


def _emit(out_dir, stem, fmt, doc, header, rows):
    written = []
    if fmt in ("json", "both"):
        serialize.write_json(out_dir / f"{stem}.json", doc)
        written.append(f"{stem}.json")
    if fmt in ("csv", "both"):
        serialize.write_csv(out_dir / f"{stem}.csv", header, rows)
        written.append(f"{stem}.csv")
    return written


def _require_map(cfg):
    if cfg["map"] is None:
        raise ConfigurationError(
            f"--map is required (one of {', '.join(MAP_NAMES)})")
    return make_map(cfg["map"])


def _refinement_setup(cfg):
    """Shared grid/depth/mode resolution for the entropy-side commands."""
    _choice("mode", cfg["mode"], MEASURE_MODES)
    if cfg["grid"] is None:
        cfg["grid"] = _default_grid(cfg["map"])
    grid = _parse_grid(cfg["grid"])
    cfg["grid"] = list(grid)
    if cfg["depth"] is None:
        cfg["depth"] = 12 if cfg["mode"] == "exact" else 10
    depth = _as_int("depth", cfg["depth"], low=4)
    if cfg["estimator"] is None:
        cfg["estimator"] = DEFAULT_ESTIMATOR
    _choice("estimator", cfg["estimator"], MC_ESTIMATORS)
    mc = None
    if cfg["mode"] == "mc":
        mc = McConfig(n_samples=_as_int("mc_samples", cfg["mc_samples"], low=1),
                      seed=cfg["seed"], estimator=cfg["estimator"])
    return GridPartition(*grid), depth, mc


# --- commands ---------------------------------------------------------------

def cmd_lyapunov(args):
    cfg, out_dir = _prologue(args, _LYAP_DEFAULTS)
    torus_map = _require_map(cfg)
    steps = _as_int("steps", cfg["steps"], low=100)
    samples = _as_int("samples", cfg["samples"], low=1)
    rng = np.random.default_rng(cfg["seed"])
    if cfg["x0"] is None:
        q, p = rng.random(2)
        x0 = PhasePoint(float(q), float(p))
    else:
        x0 = _parse_x0(cfg["x0"])
    cfg["x0"] = [x0.q, x0.p]

    spectrum = lyapunov_spectrum(torus_map, x0, steps)
    points = [PhasePoint(float(q), float(p))
              for q, p in rng.random((samples, 2))]
    field = positive_sum_field(torus_map, points, steps)

    doc = {"command": "lyapunov", "config": _echo(cfg),
           "spectrum": serialize.spectrum_doc(spectrum),
           "field_positive_sum": field, "field_samples": samples}
    header = ("sigma1", "sigma2", "positive_sum", "field_positive_sum")
    rows = [[serialize.fmt_float(spectrum.exponents[0]),
             serialize.fmt_float(spectrum.exponents[1]),
             serialize.fmt_float(spectrum.positive_sum),
             serialize.fmt_float(field)]]
    written = _emit(out_dir, "lyapunov", cfg["format"], doc, header, rows)

    print(f"map {cfg['map']}: exponents [{_fmt(spectrum.exponents[0])}, "
          f"{_fmt(spectrum.exponents[1])}] over {steps} iterations")
    print(f"sum of positive exponents {_fmt(spectrum.positive_sum)} "
          f"(single orbit), {_fmt(field)} (mean of {samples} orbits)")
    print("wrote " + ", ".join(written))
    return 0


def _ladder_outputs(torus_map, ladder, depth, cfg, mc):
    est = hks_estimate(torus_map, ladder, depth, cfg["mode"], mc,
                       threads=cfg["threads"])
    doc_part = {
        "h_ks": est.value,
        "profile": [{"grid": [mq, mp], "h_mu": h} for mq, mp, h in est.profile],
        "ladders": [{"grid": [part.m_q, part.m_p],
                     "records": [serialize.refinement_record_doc(r)
                                 for r in recs]}
                    for part, recs in zip(ladder, est.records)],
    }
    header = ("grid", "n", "R_n", "entropy")
    rows = []
    for part, recs in zip(ladder, est.records):
        tag = f"{part.m_q}x{part.m_p}"
        for r in recs:
            rows.append([tag, str(r.n), str(r.nonempty_words),
                         serialize.fmt_float(r.entropy)])
    return est, doc_part, header, rows


def cmd_ks_entropy(args):
    cfg, out_dir = _prologue(args, _KS_DEFAULTS)
    torus_map = _require_map(cfg)
    part, depth, mc = _refinement_setup(cfg)
    include_words = bool(cfg["include_words"])
    cfg["include_words"] = include_words

    if cfg["ladder"] is not None:
        ladder = _parse_ladder(cfg["ladder"])
        cfg["ladder"] = [[p.m_q, p.m_p] for p in ladder]
        est, doc_part, header, rows = _ladder_outputs(
            torus_map, ladder, depth, cfg, mc)
        doc = {"command": "ks-entropy", "config": _echo(cfg), **doc_part}
        written = _emit(out_dir, "ks_entropy", cfg["format"], doc, header, rows)
        for mq, mp, h in est.profile:
            print(f"grid {mq}x{mp}: h_mu {_fmt(h)} nats/step")
        print(f"h_KS (max over ladder) {_fmt(est.value)} nats/step")
    else:
        records = refine_series(torus_map, part, depth, cfg["mode"], mc)
        slope = h_mu(records)
        ratio = h_mu_ratio(records)
        final = records[-1]
        doc = {"command": "ks-entropy", "config": _echo(cfg),
               "records": [serialize.refinement_record_doc(r, include_words)
                           for r in records],
               "h_mu": slope, "h_mu_ratio": ratio}
        written = _emit(out_dir, "ks_entropy", cfg["format"], doc,
                        serialize.REFINEMENT_CSV_HEADER,
                        serialize.refinement_rows(records))
        print(f"map {cfg['map']} grid {part.m_q}x{part.m_p} "
              f"mode {cfg['mode']}: depth {depth}, "
              f"R_{depth} = {final.nonempty_words}, H = {_fmt(final.entropy)}")
        print(f"h_mu slope {_fmt(slope)} nats/step, "
              f"H(n)/n at depth {depth}: {_fmt(ratio)}")
    print("wrote " + ", ".join(written))
    return 0


def cmd_pesin(args):
    cfg, out_dir = _prologue(args, _PESIN_DEFAULTS)
    torus_map = _require_map(cfg)
    part, depth, mc = _refinement_setup(cfg)
    lyap_steps = _as_int("lyap_steps", cfg["lyap_steps"], low=100)
    samples = _as_int("samples", cfg["samples"], low=1)

    if cfg["ladder"] is not None:
        ladder = _parse_ladder(cfg["ladder"])
        cfg["ladder"] = [[p.m_q, p.m_p] for p in ladder]
        est = hks_estimate(torus_map, ladder, depth, cfg["mode"], mc,
                           threads=cfg["threads"])
        h_side = est.value
        h_doc = {"method": "ladder_max", "value": h_side,
                 "profile": [{"grid": [mq, mp], "h_mu": h}
                             for mq, mp, h in est.profile]}
    else:
        records = refine_series(torus_map, part, depth, cfg["mode"], mc)
        h_side = h_mu(records)
        h_doc = {"method": "slope", "value": h_side,
                 "h_mu_ratio": h_mu_ratio(records),
                 "records": [serialize.refinement_record_doc(r)
                             for r in records]}

    rng = np.random.default_rng(cfg["seed"])
    points = [PhasePoint(float(q), float(p))
              for q, p in rng.random((samples, 2))]
    positive = positive_sum_field(torus_map, points, lyap_steps)
    report = pesin_residual(max(h_side, 0.0), positive)

    doc = {"command": "pesin", "config": _echo(cfg), "h_estimate": h_doc,
           "lyapunov": {"positive_sum_mean": positive, "samples": samples,
                        "steps": lyap_steps},
           "report": serialize.pesin_doc(report)}
    header = ("h_ks", "positive_sum", "residual", "relative_residual")
    rows = [[serialize.fmt_float(report.h_ks_estimate),
             serialize.fmt_float(report.lyapunov_positive_sum),
             serialize.fmt_float(report.residual),
             serialize.fmt_float(report.relative_residual)]]
    written = _emit(out_dir, "pesin", cfg["format"], doc, header, rows)

    print(f"map {cfg['map']}: entropy side {_fmt(report.h_ks_estimate)}, "
          f"sum of positive exponents {_fmt(positive)}")
    print(f"residual (entropy minus exponent sum) {_fmt(report.residual)} "
          f"(relative {_fmt(report.relative_residual)})")
    print("wrote " + ", ".join(written))
    return 0


def cmd_prescription(args):
    cfg, out_dir = _prologue(args, _PRESC_DEFAULTS, extra_file_keys=("tables",))
    _choice("source", cfg["source"], SOURCES)
    word_budget = _as_int("word_budget", cfg["word_budget"], low=1)
    r2 = _as_float("r2_threshold", cfg["r2_threshold"], low=0.0)
    onset = None if cfg["onset"] is None else _as_int("onset", cfg["onset"],
                                                      low=0)

    if cfg["source"] == "classical":
        torus_map = _require_map(cfg)
        if cfg["depth"] is None:
            cfg["depth"] = 16
        depth = _as_int("depth", cfg["depth"], low=7)
        part, _, mc = _refinement_setup(cfg)
        source = ClassicalSource(torus_map, part, cfg["mode"], mc)
        echo_keys = _PRESC_SHARED + _PRESC_CLASSICAL
    else:
        if cfg["depth"] is None:
            cfg["depth"] = 80
        depth = _as_int("depth", cfg["depth"], low=7)
        spec = GamowSpec(omega0=_as_float("omega0", cfg["omega0"], low=0.0,
                                          strict=True),
                         gamma0=_as_float("gamma0", cfg["gamma0"], low=0.0,
                                          strict=True),
                         hbar=_as_float("hbar", cfg["hbar"], low=0.0,
                                        strict=True),
                         alpha=_as_float("alpha", cfg["alpha"], low=0.0,
                                         strict=True),
                         n_max=_as_int("n_max", cfg["n_max"], low=2))
        cells = _as_int("cells", cfg["cells"], low=2)
        support = cfg["support"]
        if support is not None:
            support = _as_int("support", support, low=1)
        ops = make_cell_operators(
            spec, cells, "random", seed=cfg["seed"],
            total_mass=_as_float("total_mass", cfg["total_mass"], low=0.0,
                                 strict=True),
            spread=_as_float("spread", cfg["spread"], low=0.0),
            off_scale=_as_float("off_scale", cfg["off_scale"], low=0.0),
            support=support)
        source = QuantumSource(spec, ops)
        echo_keys = _PRESC_SHARED + _PRESC_GAMOW
    cfg["depth"] = depth

    run = prescription_run(source, depth, word_budget=word_budget,
                           seed=cfg["seed"], r2_threshold=r2, onset=onset,
                           progress=lambda line: print(line, file=sys.stderr))

    doc = {"command": "prescription", "config": _echo(cfg, echo_keys),
           **serialize.prescription_doc(run)}
    written = _emit(out_dir, "prescription", cfg["format"], doc,
                    serialize.PRESCRIPTION_CSV_HEADER,
                    serialize.prescription_rows(run))
    if cfg["format"] in ("csv", "both"):
        serialize.write_plot_script(out_dir)
        written.append("prescription_plot.py")

    rep = run.report
    print(f"source {cfg['source']}, depth {run.n_max}, "
          f"{run.words.shape[0]} words ({run.sampling})")
    print(f"headline fit: rate {_fmt(rep.fit_rate)} per step, "
          f"R^2 {_fmt(rep.fit_quality)}, onset {rep.onset}, "
          f"verdict {rep.verdict}")
    print(f"per-word exponential fraction {_fmt(run.passing_fraction)}")
    print(f"semiclassical entropy rate {_fmt(run.semiclassical_h_mu)} "
          f"nats/step")
    if run.imag_flag:
        print("warning: trace imaginary parts above 1e-6 of magnitude",
              file=sys.stderr)
    print("CHAOTIC (sufficient condition met)" if run.chaotic
          else "NOT PROVEN CHAOTIC")
    print("wrote " + ", ".join(written))
    return 0


def _prescribed_tables(cfg, spec):
    raw = cfg.get("tables")
    if raw is None:
        raise ConfigurationError(
            "generation=prescribed needs a 'tables' entry in the config file")
    tables = []
    for i, entry in enumerate(raw):
        if not isinstance(entry, dict) or "re" not in entry:
            raise ConfigurationError(
                f"tables[{i}] must be an object with 're' and optional 'im'")
        re_part = np.asarray(entry["re"], dtype=float)
        im_part = np.asarray(entry.get("im", np.zeros_like(re_part)),
                             dtype=float)
        tables.append(re_part + 1j * im_part)
    return tables


def cmd_gamow_evolve(args):
    cfg, out_dir = _prologue(args, _GAMOW_DEFAULTS,
                             extra_file_keys=("tables", "labels"))
    spec = GamowSpec(omega0=_as_float("omega0", cfg["omega0"], low=0.0,
                                      strict=True),
                     gamma0=_as_float("gamma0", cfg["gamma0"], low=0.0,
                                      strict=True),
                     hbar=_as_float("hbar", cfg["hbar"], low=0.0, strict=True),
                     alpha=_as_float("alpha", cfg["alpha"], low=0.0,
                                     strict=True),
                     n_max=_as_int("n_max", cfg["n_max"], low=2))
    cells = _as_int("cells", cfg["cells"], low=2)
    cell = _as_int("cell", cfg["cell"], low=0, high=cells - 1)
    j = _as_int("j", cfg["j"], low=0)
    _choice("generation", cfg["generation"], GENERATIONS)

    if cfg["generation"] == "prescribed":
        ops = make_cell_operators(spec, cells, "prescribed",
                                  tables=_prescribed_tables(cfg, spec),
                                  labels=cfg.get("labels"))
    else:
        support = cfg["support"]
        if support is not None:
            support = _as_int("support", support, low=1)
        ops = make_cell_operators(
            spec, cells, "random", seed=cfg["seed"],
            total_mass=_as_float("total_mass", cfg["total_mass"], low=0.0,
                                 strict=True),
            spread=_as_float("spread", cfg["spread"], low=0.0),
            off_scale=_as_float("off_scale", cfg["off_scale"], low=0.0),
            support=support)

    evolved = evolve_operator(spec, ops[cell], j)
    ratio = off_mass_ratio(evolved)

    doc = {"command": "gamow-evolve",
           "config": _echo({k: cfg[k] for k in cfg if k != "tables"}),
           "t_r": spec.t_r, "j": j, "off_mass_ratio": ratio,
           "operator": serialize.biorth_doc(evolved)}
    header = ("r", "s", "re", "im")
    rows = []
    for r in range(evolved.dim):
        for s in range(evolved.dim):
            rows.append([str(r), str(s),
                         serialize.fmt_float(evolved.coeffs[r, s].real),
                         serialize.fmt_float(evolved.coeffs[r, s].imag)])
    written = _emit(out_dir, "gamow_evolve", cfg["format"], doc, header, rows)

    print(f"spec: omega0 {_fmt(spec.omega0)}, gamma0 {_fmt(spec.gamma0)}, "
          f"hbar {_fmt(spec.hbar)}, alpha {_fmt(spec.alpha)}, "
          f"n_max {spec.n_max}; relaxation time {_fmt(spec.t_r)}")
    print(f"cell {cell} ({ops[cell].label or 'unlabeled'}) evolved j = {j} "
          f"steps: off-(0,0) mass ratio {_fmt(ratio)}")
    print("wrote " + ", ".join(written))
    return 0


# --- parser -----------------------------------------------------------------

def _add_common(sub):
    sub.add_argument("--config", metavar="FILE",
                     help="JSON file with the same keys as the flags")
    sub.add_argument("--out", metavar="DIR", help="output directory")
    sub.add_argument("--seed", type=int,
                     help="RNG seed (default: PESINLAB_SEED or 0)")
    sub.add_argument("--threads", type=int, help="worker threads for ladders")
    sub.add_argument("--format", choices=FORMATS, help="output file formats")


def _add_refinement_flags(sub):
    sub.add_argument("--grid", help="partition grid, e.g. 2x1 or 8x8")
    sub.add_argument("--depth", type=int, help="refinement depth n_max")
    sub.add_argument("--mode", choices=MEASURE_MODES, help="measure backend")
    sub.add_argument("--mc-samples", type=int, dest="mc_samples",
                     help="Monte Carlo sample count")
    sub.add_argument("--estimator", choices=MC_ESTIMATORS,
                     help="entropy estimator for mc mode")


def _add_gamow_flags(sub):
    sub.add_argument("--omega0", type=float, help="real part of the levels")
    sub.add_argument("--gamma0", type=float, help="decay width of the levels")
    sub.add_argument("--hbar", type=float)
    sub.add_argument("--alpha", type=float, help="time step per chain link")
    sub.add_argument("--n-max", type=int, dest="n_max",
                     help="operator truncation dimension")
    sub.add_argument("--cells", type=int, help="number of cell operators")
    sub.add_argument("--off-scale", type=float, dest="off_scale",
                     help="scale of random off-diagonal coefficients")
    sub.add_argument("--total-mass", type=float, dest="total_mass",
                     help="sum of the random (0,0) weights")
    sub.add_argument("--spread", type=float,
                     help="relative spread of the random (0,0) weights")
    sub.add_argument("--support", type=int,
                     help="index block actually populated by random draws")


def build_parser():
    import argparse

    parser = argparse.ArgumentParser(
        prog="pesinlab",
        description="Entropy, Lyapunov, and trace-decay diagnostics for "
                    "chaos detection.")
    subs = parser.add_subparsers(dest="command")

    sub = subs.add_parser("lyapunov", help="Lyapunov spectrum of a torus map")
    sub.add_argument("--map", choices=MAP_NAMES)
    sub.add_argument("--steps", type=int, help="orbit length")
    sub.add_argument("--x0", help="starting point, e.g. 0.3,0.7")
    sub.add_argument("--samples", type=int, help="random orbits to average")
    _add_common(sub)
    sub.set_defaults(func=cmd_lyapunov)

    sub = subs.add_parser("ks-entropy",
                          help="entropy of refined partitions and its rate")
    sub.add_argument("--map", choices=MAP_NAMES)
    _add_refinement_flags(sub)
    sub.add_argument("--ladder", help="comma list of grids, e.g. 2x1,2x2,4x4")
    sub.add_argument("--include-words", action="store_const", const=True,
                     dest="include_words",
                     help="embed per-word measures in the JSON output")
    _add_common(sub)
    sub.set_defaults(func=cmd_ks_entropy)

    sub = subs.add_parser("pesin",
                          help="compare the entropy rate with the positive "
                               "Lyapunov sum")
    sub.add_argument("--map", choices=MAP_NAMES)
    _add_refinement_flags(sub)
    sub.add_argument("--ladder", help="comma list of grids, e.g. 2x1,2x2,4x4")
    sub.add_argument("--lyap-steps", type=int, dest="lyap_steps",
                     help="orbit length for the exponent side")
    sub.add_argument("--samples", type=int, help="random orbits to average")
    _add_common(sub)
    sub.set_defaults(func=cmd_pesin)

    sub = subs.add_parser("prescription",
                          help="four-stage chaos detection on a classical or "
                               "operator source")
    sub.add_argument("--source", choices=SOURCES)
    sub.add_argument("--map", choices=MAP_NAMES, help="classical source map")
    _add_refinement_flags(sub)
    _add_gamow_flags(sub)
    sub.add_argument("--word-budget", type=int, dest="word_budget",
                     help="max symbol words to track")
    sub.add_argument("--r2-threshold", type=float, dest="r2_threshold",
                     help="minimum R^2 for an exponential verdict")
    sub.add_argument("--onset", type=int, help="first depth used in fits")
    _add_common(sub)
    sub.set_defaults(func=cmd_prescription)

    sub = subs.add_parser("gamow-evolve",
                          help="evolve one cell operator and report where "
                               "its mass sits")
    _add_gamow_flags(sub)
    sub.add_argument("--cell", type=int, help="operator index to evolve")
    sub.add_argument("--j", type=int, help="number of evolution steps")
    sub.add_argument("--generation", choices=GENERATIONS)
    _add_common(sub)
    sub.set_defaults(func=cmd_gamow_evolve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "func", None) is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        return args.func(args)
    except (ConfigurationError, UnsupportedOperationError,
            ResourceLimitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # anything past config checks is a failed run
        print(f"run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
