"""Command-line front end.

Every subcommand validates the whole configuration first, computes all
results in memory and only then writes files, so a failure never leaves
partial output behind.  Exit codes: 0 success, 1 configuration error,
2 numerical or runtime error.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .align import align_beam, evaluate_fold, sweep
from .config import SCENARIOS, ExperimentConfig, apply_overrides, build, expand_grid, load_raw
from .errors import ConfigError, FlexArrayError
from .fields import beam_squint, locate_beam, pattern
from .geometry import FoldSpec, fold_layout
from .link import (LinkBudget, ber_from_snr, dbm_to_watts, evm_from_snr, mismatch_factor, path_gain,
                   received_power, snr, thermal_noise_power, undb, watts_to_dbm)
from .modem import ber_monte_carlo
from .power import calibrate, directivity, impedance_report, power_report, radiated_power_closed

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2

PATTERN_HEADER = "theta_deg,phi_deg,e_re_x,e_im_x,e_re_y,e_im_y,e_re_z,e_im_z,e_mag"
BER_HEADER = "modulation,snr_db,ber_analytic,ber_mc,ci95,bits,seed"

# full-wave reference values per scenario: (peak |E| in V/m, input resistance in ohm)
REFERENCE_ANCHORS = {
    "unfolded": (51.0, 50.0),
    "x9,y45": (46.0, 67.0),
    "x9,y90": (38.0, 62.0),
    "x45,y45": (30.0, 67.0),
    "x15,y45": (46.0, 72.0),
}
ANCHOR_TOLERANCE = 0.20
STEERING_FOLDS_DEG = tuple(range(-80, 81, 10))


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


# --------------------------------------------------------------------------- formatting

def _num(x) -> str:
    return repr(float(x))


def _clean(obj):
    """Recursively convert numpy scalars and non-finite floats into JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else None
    if isinstance(obj, complex):
        return [_clean(obj.real), _clean(obj.imag)]
    return obj


def dump_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n"


def _deg(x):
    return math.degrees(float(x))


def _fold_tag(fold: FoldSpec) -> str:
    a, b = fold.degrees
    return f"x{a:g}_y{b:g}"


def _name(cfg, stem):
    return f"{cfg.prefix}{stem}"


def _linear_db(value, power=True):
    value = float(value)
    scale = 10 if power else 20
    return {"linear": value, "db": scale * math.log10(value) if value > 0 else None}


# --------------------------------------------------------------------------- shared setup

def prepare_spec(cfg: ExperimentConfig):
    if cfg.calibrate_ohm is None:
        return cfg.spec
    return calibrate(cfg.spec, cfg.calibrate_ohm)


def prepare_budget(cfg: ExperimentConfig, spec) -> LinkBudget:
    lk = cfg.link
    flat = fold_layout(spec, FoldSpec(), cfg.anchor)
    g_r = float(directivity(spec, flat, 0.0, 0.0)) if lk["g_r_dbi"] is None else float(undb(lk["g_r_dbi"]))
    bandwidth = lk["bandwidth_ghz"] * 1e9
    if lk["p_noise_out_dbm"] is None:
        n_out = thermal_noise_power(bandwidth, lk["noise_figure_db"])
    else:
        n_out = float(dbm_to_watts(lk["p_noise_out_dbm"]))
    n_in = 0.0 if lk["p_noise_tx_received_dbm"] is None else float(dbm_to_watts(lk["p_noise_tx_received_dbm"]))
    try:
        return LinkBudget(p_t_max=float(dbm_to_watts(lk["p_t_max_dbm"])), g_t_folded=g_r, g_r=g_r,
                          wavelength=spec.wavelength, distance=lk["distance_m"], z_pa=lk["z_pa"],
                          z_ant=lk["z_pa"], p_noise_tx_received=n_in, p_noise_out=n_out, bandwidth=bandwidth)
    except FlexArrayError as exc:
        raise ConfigError(f"link: {exc}") from None


def _fixed_gain(cfg):
    g = cfg.link["g_t_dbi"]
    return None if g is None else float(undb(g))


def _evaluate(cfg, spec, budget, fold):
    return evaluate_fold(spec, fold, budget, cfg.modulations, cfg.mode, cfg.anchor,
                         p_in_ratio=cfg.link["p_in_ratio"], x_ant=cfg.link["x_ant_ohm"],
                         gain=_fixed_gain(cfg), strict_paper=cfg.link["strict_paper"])


def _ber_dict(cfg, ber):
    return {m.name: ber[m.m_order] for m in cfg.modulations}


# --------------------------------------------------------------------------- subcommands

def cmd_pattern(cfg: ExperimentConfig) -> dict:
    spec = prepare_spec(cfg)
    files = {}
    for fold in cfg.folds:
        frames = fold_layout(spec, fold, cfg.anchor)
        pat = pattern(frames, spec, cfg.pattern_theta, cfg.pattern_phi, cfg.pattern_radius, cfg.mode, fold)
        beam = locate_beam(frames, spec, cfg.mode)
        tag = _fold_tag(fold)
        if cfg.pattern_format in ("csv", "both"):
            buf = io.StringIO()
            buf.write(PATTERN_HEADER + "\n")
            for theta, phi, e, mag in pat.rows():
                cells = [_deg(theta), _deg(phi)]
                for c in e:
                    cells += [c.real, c.imag]
                cells.append(mag)
                buf.write(",".join(_num(v) for v in cells) + "\n")
            files[_name(cfg, f"pattern_{tag}.csv")] = buf.getvalue()
        if cfg.pattern_format in ("json", "both"):
            samples = [{"theta_deg": _deg(t), "phi_deg": _deg(p),
                        "e": [[c.real, c.imag] for c in e], "e_mag": mag} for t, p, e, mag in pat.rows()]
            doc = {"fold_deg": list(fold.degrees), "mode": cfg.mode.value, "anchor": cfg.anchor,
                   "freq_hz": spec.freq, "radius_m": pat.r,
                   "peak": {"theta_deg": _deg(beam.theta), "phi_deg": _deg(beam.phi),
                            "tilt_deg": [_deg(v) for v in beam.tilt], "e_mag": beam.magnitude},
                   "samples": samples}
            files[_name(cfg, f"pattern_{tag}.json")] = dump_json(doc)
    return files


def _calibration(cfg, spec):
    return {"target_ohm": cfg.calibrate_ohm, "port_voltage_v": spec.port_voltage,
            "field_scale_v_per_m": spec.field_scale}


def cmd_impedance(cfg: ExperimentConfig) -> dict:
    spec = prepare_spec(cfg)
    rows = []
    for fold in cfg.folds:
        frames = fold_layout(spec, fold, cfg.anchor)
        rep = impedance_report(spec, frames, cfg.link["p_in_ratio"], cfg.link["x_ant_ohm"])
        rows.append({"fold_deg": list(fold.degrees), **rep.to_dict(),
                     "p_closed_w": radiated_power_closed(spec, frames)})
    doc = {"anchor": cfg.anchor, "calibration": _calibration(cfg, spec), "folds": rows}
    return {_name(cfg, "impedance.json"): dump_json(doc)}


def cmd_link(cfg: ExperimentConfig) -> dict:
    spec = prepare_spec(cfg)
    budget = prepare_budget(cfg, spec)
    strict = cfg.link["strict_paper"]
    noise = budget.p_noise_tx_received + budget.p_noise_out
    rows = []
    for fold in cfg.folds:
        ev = _evaluate(cfg, spec, budget, fold)
        b = budget.with_(g_t_folded=ev.gain, z_ant=ev.z_ant)
        p_r = received_power(b, strict)
        s = snr(p_r, b.p_noise_tx_received, b.p_noise_out)
        rows.append({
            "fold_deg": list(fold.degrees),
            "beam_deg": [_deg(ev.beam.theta), _deg(ev.beam.phi)],
            "g_t": _linear_db(ev.gain), "z_ant_ohm": [ev.r_ant, ev.x_ant],
            "mismatch": _linear_db(mismatch_factor(b.z_pa, b.z_ant)),
            "path_gain": _linear_db(path_gain(b.wavelength, b.distance, strict)),
            "p_r": {"w": p_r, "dbm": float(watts_to_dbm(p_r)) if p_r > 0 else None},
            "snr": _linear_db(s), "evm": evm_from_snr(s) if s > 0 else None,
            "ber": _ber_dict(cfg, ev.ber)})
    doc = {"budget": {"p_t_max": {"w": budget.p_t_max, "dbm": float(watts_to_dbm(budget.p_t_max))},
                      "g_r": _linear_db(budget.g_r), "wavelength_m": budget.wavelength,
                      "distance_m": budget.distance, "z_pa_ohm": budget.z_pa,
                      "noise": {"w": noise, "dbm": float(watts_to_dbm(noise)) if noise > 0 else None},
                      "bandwidth_hz": budget.bandwidth, "strict_paper": strict},
           "folds": rows}
    return {_name(cfg, "link.json"): dump_json(doc)}


def ber_table(cfg: ExperimentConfig) -> str:
    buf = io.StringIO()
    buf.write(BER_HEADER + "\n")
    for mod in cfg.modulations:
        for s_db in cfg.snr_db:
            s = float(undb(s_db))
            res = ber_monte_carlo(mod, s, cfg.n_bits, cfg.seed)
            buf.write(",".join([mod.name, _num(s_db), _num(ber_from_snr(mod, s)), _num(res.ber_estimate),
                                _num(res.ci95_halfwidth), str(res.bits_sent), str(res.seed)]) + "\n")
    return buf.getvalue()


def cmd_ber(cfg: ExperimentConfig) -> dict:
    return {_name(cfg, "ber.csv"): ber_table(cfg)}


def cmd_align(cfg: ExperimentConfig) -> dict:
    spec = prepare_spec(cfg)
    budget = prepare_budget(cfg, spec)
    rows = []
    for theta, phi in cfg.targets:
        res = align_beam(spec, theta, phi, cfg.bounds, budget, cfg.modulations, cfg.mode, cfg.anchor,
                         cfg.coarse_step, cfg.resolution, cfg.mismatch_penalty,
                         strict_paper=cfg.link["strict_paper"], p_in_ratio=cfg.link["p_in_ratio"],
                         x_ant=cfg.link["x_ant_ohm"])
        rows.append({"target_deg": [_deg(theta), _deg(phi)], "fold_deg": list(res.fold.degrees),
                     "beam_deg": [_deg(res.beam.theta), _deg(res.beam.phi)],
                     "pointing_error_deg": _deg(res.pointing_error), "reachable": res.reachable,
                     "gain_db": res.gain_db, "z_ant_ohm": res.z_ant, "snr": _linear_db(res.snr),
                     "ber": _ber_dict(cfg, res.ber), "evaluations": res.evaluations})
    doc = {"mode": cfg.mode.value, "anchor": cfg.anchor,
           "bounds_deg": [[_deg(lo), _deg(hi)] for lo, hi in cfg.bounds], "targets": rows}
    return {_name(cfg, "align.json"): dump_json(doc)}


def sweep_header(cfg) -> str:
    cols = ["xi1_deg", "xi2_deg", "e_peak", "peak_theta_deg", "peak_phi_deg", "r_ant_ohm", "snr_db"]
    cols += [f"ber_{m.m_order}qam" for m in cfg.modulations]
    return ",".join(cols)


def cmd_sweep(cfg: ExperimentConfig) -> dict:
    spec = prepare_spec(cfg)
    budget = prepare_budget(cfg, spec)
    rows = sweep(spec, cfg.sweep_xi1, cfg.sweep_xi2, budget, cfg.modulations, cfg.mode, cfg.anchor,
                 threads=cfg.threads, p_in_ratio=cfg.link["p_in_ratio"], x_ant=cfg.link["x_ant_ohm"],
                 gain=_fixed_gain(cfg), strict_paper=cfg.link["strict_paper"])
    buf = io.StringIO()
    buf.write(sweep_header(cfg) + "\n")
    # echo the configured degrees rather than a radian round trip
    degs = [(a, b) for a in expand_grid(cfg.raw["sweep"]["xi1_deg"], "sweep.xi1_deg")
            for b in expand_grid(cfg.raw["sweep"]["xi2_deg"], "sweep.xi2_deg")]
    for (a, b), r in zip(degs, rows):
        cells = [a, b, r.e_peak, _deg(r.beam.theta), _deg(r.beam.phi), r.r_ant, r.snr_db]
        cells += [r.ber[m.m_order] for m in cfg.modulations]
        buf.write(",".join(_num(v) for v in cells) + "\n")
    return {_name(cfg, "sweep.csv"): buf.getvalue()}


def _within(model, anchor):
    dev = model / anchor - 1.0
    return dev, abs(dev) <= ANCHOR_TOLERANCE


def repro_report(cfg: ExperimentConfig) -> dict:
    """Scenario suite: anchored comparisons, squint, steering span, power ratio and BER table."""
    spec = prepare_spec(cfg)
    budget = prepare_budget(cfg, spec)
    evals = {name: _evaluate(cfg, spec, budget, FoldSpec.from_degrees(*deg)) for name, deg in SCENARIOS.items()}
    e_flat = evals["unfolded"].e_peak
    e_ref = REFERENCE_ANCHORS["unfolded"][0]
    scenarios = []
    for name, ev in evals.items():
        e_anchor, r_anchor = REFERENCE_ANCHORS[name]
        e_dev, e_ok = _within(ev.e_peak / e_flat, e_anchor / e_ref)
        r_dev, r_ok = _within(ev.r_ant, r_anchor)
        scenarios.append({
            "name": name, "fold_deg": list(SCENARIOS[name]),
            "beam_deg": [_deg(ev.beam.theta), _deg(ev.beam.phi)],
            "tilt_deg": [_deg(v) for v in ev.beam.tilt],
            "e_peak": ev.e_peak, "e_ratio": ev.e_peak / e_flat, "e_ratio_reference": e_anchor / e_ref,
            "e_ratio_deviation": e_dev, "e_within_tolerance": e_ok,
            "r_ant_ohm": ev.r_ant, "r_ant_reference_ohm": r_anchor, "r_ant_deviation": r_dev,
            "r_within_tolerance": r_ok, "snr": _linear_db(ev.snr), "ber": _ber_dict(cfg, ev.ber)})
    r_flat = evals["unfolded"].r_ant
    checks = {
        "e_x9y90_above_x45y45": evals["x9,y90"].e_peak > evals["x45,y45"].e_peak,
        "r_unfolded_below_all_folded": all(ev.r_ant > r_flat for n, ev in evals.items() if n != "unfolded"),
        "e_all_within_tolerance": all(s["e_within_tolerance"] for s in scenarios),
        "r_all_within_tolerance": all(s["r_within_tolerance"] for s in scenarios),
    }

    sq = beam_squint(spec, cfg.squint_fold, cfg.squint_freqs, cfg.mode, cfg.anchor)
    squint = {"fold_deg": list(cfg.squint_fold.degrees), "freqs_ghz": [f / 1e9 for f in sq.freqs],
              "beams_deg": [[_deg(b.theta), _deg(b.phi)] for b in sq.beams], "squint_deg": _deg(sq.squint)}

    steering = []
    for axis in (0, 1):
        for d in STEERING_FOLDS_DEG:
            fold = FoldSpec.from_degrees(d, 0.0) if axis == 0 else FoldSpec.from_degrees(0.0, d)
            beam = locate_beam(fold_layout(spec, fold, cfg.anchor), spec, cfg.mode)
            steering.append({"fold_deg": list(fold.degrees), "tilt_deg": _deg(beam.tilt[axis]),
                             "relative_peak_db": 20 * math.log10(beam.magnitude / e_flat)})
    useful = [s for s in steering if s["relative_peak_db"] >= -3.0]
    tilts = [s["tilt_deg"] for s in useful]
    steer = {"folds": steering, "useful_span_deg": [min(tilts), max(tilts)],
             "useful_peak_variation_db": -min(s["relative_peak_db"] for s in useful)}

    power = []
    for name, deg in SCENARIOS.items():
        frames = fold_layout(spec, FoldSpec.from_degrees(*deg), cfg.anchor)
        rep = power_report(spec, frames)
        power.append({"name": name, "p_closed_w": rep.p_closed, "p_quadrature_w": rep.p_quadrature,
                      "quadrature_to_closed_ratio": rep.ratio})

    table = []
    for name, ev in evals.items():
        for mod in cfg.modulations:
            mc = ber_monte_carlo(mod, ev.snr, cfg.n_bits, cfg.seed) if ev.snr > 0 else None
            table.append({"scenario": name, "modulation": mod.name, "snr_db": ev.snr_db,
                          "ber_analytic": ev.ber[mod.m_order],
                          "ber_mc": None if mc is None else mc.ber_estimate,
                          "ci95": None if mc is None else mc.ci95_halfwidth,
                          "bits": None if mc is None else mc.bits_sent})

    return {"version": __version__, "mode": cfg.mode.value, "anchor": cfg.anchor, "seed": cfg.seed,
            "calibration": _calibration(cfg, spec), "tolerance": ANCHOR_TOLERANCE,
            "scenarios": scenarios, "checks": checks, "squint": squint, "steering": steer,
            "power": power, "ber_table": table}


def cmd_repro(cfg: ExperimentConfig) -> dict:
    return {_name(cfg, "repro.json"): dump_json(repro_report(cfg)),
            _name(cfg, "repro_ber.csv"): ber_table(cfg)}


COMMANDS = {
    "pattern": (cmd_pattern, "radiation pattern cuts for each configured fold (CSV and/or JSON)"),
    "impedance": (cmd_impedance, "radiation resistance and input impedance per fold (JSON)"),
    "link": (cmd_link, "link budget, SNR and analytic BER per fold (JSON)"),
    "ber": (cmd_ber, "analytic and Monte Carlo BER over the SNR grid (CSV)"),
    "align": (cmd_align, "fold search that points the beam at each target (JSON)"),
    "sweep": (cmd_sweep, "full factorial fold sweep (CSV)"),
    "repro": (cmd_repro, "reference scenario suite with anchored comparisons (JSON + CSV)"),
}


# --------------------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML configuration file")
    common.add_argument("--out", metavar="DIR", default="out", help="output directory (default: out)")
    common.add_argument("--seed", type=int, metavar="N", help="Monte Carlo master seed")
    common.add_argument("--mode", choices=("paper", "physical"), help="field synthesis mode")
    common.add_argument("--threads", type=int, metavar="N", help="worker threads for sweeps")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config entry, e.g. --set array.rows=2 (repeatable)")
    common.add_argument("--json-errors", action="store_true", help="report errors as JSON on stderr")
    parser = _Parser(prog="flexarray", description="Folded patch-array simulator.")
    parser.add_argument("--version", action="version", version=f"flexarray {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True
    for name, (_, help_text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text, description=help_text)
    return parser


def load_config(args) -> ExperimentConfig:
    raw = load_raw(args.config)
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"modem.seed={args.seed}")
    if args.mode is not None:
        overrides.append(f"mode={args.mode}")
    if args.threads is not None:
        overrides.append(f"threads={args.threads}")
    return build(apply_overrides(raw, overrides))


def write_outputs(out_dir: str, files: dict) -> None:
    os.makedirs(out_dir, exist_ok=True)
    for name, text in files.items():
        with open(os.path.join(out_dir, name), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _report_error(exc, code, json_errors):
    if json_errors:
        doc = {"error": {"type": type(exc).__name__,
                         "category": "config" if code == EXIT_CONFIG else "numeric",
                         "message": str(exc), "exit_code": code}}
        diagnostics = getattr(exc, "diagnostics", None)
        if diagnostics:
            doc["error"]["diagnostics"] = diagnostics
        sys.stderr.write(json.dumps(_clean(doc), sort_keys=True) + "\n")
    else:
        sys.stderr.write(f"flexarray: error: {exc}\n")


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    json_errors = "--json-errors" in argv
    try:
        args = build_parser().parse_args(argv)
        cfg = load_config(args)
    except ConfigError as exc:
        _report_error(exc, EXIT_CONFIG, json_errors)
        return EXIT_CONFIG
    try:
        files = COMMANDS[args.command][0](cfg)
    except ConfigError as exc:
        _report_error(exc, EXIT_CONFIG, json_errors)
        return EXIT_CONFIG
    except FlexArrayError as exc:
        _report_error(exc, EXIT_NUMERIC, json_errors)
        return EXIT_NUMERIC
    try:
        write_outputs(args.out, files)
    except OSError as exc:
        _report_error(ConfigError(f"cannot write outputs to {args.out}: {exc.strerror}"), EXIT_CONFIG, json_errors)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
