"""Command-line front end: verify (formula-vs-oracle grids), simulate,
analyze-phase, and sweep, with reproducible manifests.

Exit codes: 0 success, 1 check failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from . import blocks, mixture as mx, phase, simulate as sim
from .fock import DetectorModel

FLOAT_FMT = "%.17g"


def _fmt(x) -> str:
    if isinstance(x, float):
        return FLOAT_FMT % x
    return str(x)


def write_csv(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(x) for x in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# config file parsing: key = value lines inside [section] blocks, '#'
# comments; a top-level JSON object is accepted as the alternative encoding.

def parse_config_text(text: str) -> dict:
    stripped = text.lstrip()
    if stripped.startswith("{"):
        return json.loads(text)
    data: dict = {}
    section = data
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if not name:
                raise ValueError(f"line {lineno}: empty section name")
            section = data.setdefault(name, {})
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        section[key] = _parse_value(value)
    return data


def _parse_value(value: str):
    if "," in value or ":" in value:
        items = [v.strip() for v in value.split(",") if v.strip()]
        if all(":" in v for v in items):
            return [tuple(_parse_scalar(x) for x in v.split(":")) for v in items]
        return [_parse_scalar(v) for v in items]
    return _parse_scalar(value)


def _parse_scalar(value: str):
    low = value.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(value)
    except ValueError:
        pass
    try:
        return float(value)
    except ValueError:
        pass
    return value


def load_repeater_config(path: Path, seed_override=None) -> sim.RepeaterConfig:
    data = parse_config_text(path.read_text(encoding="utf-8"))
    section = data.get("repeater", data)
    known = {f.name for f in dataclasses.fields(sim.RepeaterConfig)}
    kwargs = {}
    for key, value in section.items():
        if key not in known:
            raise ValueError(f"unknown repeater config field {key!r}")
        if key == "purification_schedule":
            value = tuple((int(lv), int(r)) for lv, r in value)
        kwargs[key] = value
    if seed_override is not None:
        kwargs["seed"] = seed_override
    return sim.RepeaterConfig(**kwargs)


def config_hash(config) -> str:
    payload = json.dumps(dataclasses.asdict(config), sort_keys=True,
                         default=str)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def write_manifest(out_dir: Path, name: str, config, outputs,
                   seed) -> Path:
    manifest = {
        "tool": "qrepeater",
        "version": __version__,
        "command": name,
        "seed": seed,
        "config": dataclasses.asdict(config) if dataclasses.is_dataclass(config) else config,
        "config_hash": config_hash(config) if dataclasses.is_dataclass(config) else None,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime()),
        "outputs": [str(p) for p in outputs],
    }
    path = out_dir / f"{name}_manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# verify

SWAP_GRID = (0.5, 0.8, 0.9, 0.98, 1.0)
ENTANGLER_PR_GRID = (0.5, 0.8, 0.9, 1.0)
ENTANGLER_E1_GRID = (0.9, 0.95, 0.99, 1.0)
PURIFICATION_F_GRID = (0.6, 0.75, 0.88, 0.95)
PURIFICATION_ETA_GRID = ((1.0, 1.0, None), (0.98, 0.99, None),
                         (0.9, 0.95, None), (0.8, 0.9, 0.85))


def run_verify(tolerance: float = 1e-10, grid: str = "full",
               corrupt: bool = False):
    """Compare every closed-form coefficient against the Fock-engine oracle.

    Returns (ok, rows, failures); rows are CSV records with a ``source``
    column distinguishing formula from oracle values.
    """
    rows = []
    failures = []
    fudge = 1.01 if corrupt else 1.0
    swap_grid = SWAP_GRID if grid == "full" else (0.5, 1.0)

    def compare(block, label, formula_vals, oracle_vals, names=("p2", "p1", "p0")):
        for name, f, o in zip(names, formula_vals, oracle_vals):
            if abs(f - o) > tolerance:
                failures.append((block, label, name, f, o, abs(f - o)))

    for r in swap_grid:
        for e1 in swap_grid:
            for e2 in swap_grid:
                coeffs = mx.swap_coefficients(mx.EfficiencyParams(r, e1, e2))
                formula = (coeffs.p2 * fudge, coeffs.p1, coeffs.p0)
                res = blocks.bsm2_swap(eta_r=r, detector=DetectorModel(e1, e2))
                oracle = (res.coefficients["bell"], res.coefficients["one"],
                          res.coefficients["vacuum"])
                label = f"eta_r={r} eta1={e1} eta2={e2}"
                rows.append(("swap", r, e1, e2, *formula, "formula"))
                rows.append(("swap", r, e1, e2, *oracle, "oracle"))
                compare("swap", label, formula, oracle)

    for p_r in ENTANGLER_PR_GRID:
        for e1 in ENTANGLER_E1_GRID:
            det = DetectorModel(e1)
            coeffs = mx.entangler_coefficients(p_r, e1)
            formula = (coeffs.p2, coeffs.p1, coeffs.p0)
            res = blocks.entangler_run(p_r, det)
            oracle = (res.coefficients["bell"], res.coefficients["one"],
                      res.coefficients["vacuum"])
            rows.append(("entangler", p_r, e1, det.eta2_effective, *formula,
                         "formula"))
            rows.append(("entangler", p_r, e1, det.eta2_effective, *oracle,
                         "oracle"))
            compare("entangler", f"p_r={p_r} eta1={e1}", formula, oracle)

    for fid in PURIFICATION_F_GRID:
        for (r, e1, e2) in PURIFICATION_ETA_GRID:
            det = DetectorModel(e1, e2)
            state = mx.MixtureState(p2=1.0, fidelity=fid, normalized=True)
            out = mx.purification_coefficients(state, mx.EfficiencyParams(r, e1, e2))
            formula = (out.coefficients.p2, out.coefficients.p1,
                       out.coefficients.p0, out.fidelity_out)
            res = blocks.purification_run(fid, r, det)
            oracle = (res.coefficients["bell"], res.coefficients["one"],
                      res.coefficients["vacuum"], res.bell_fidelity)
            rows.append(("purification", r, e1, det.eta2_effective, *formula[:3],
                         "formula"))
            rows.append(("purification", r, e1, det.eta2_effective, *oracle[:3],
                         "oracle"))
            compare("purification", f"F={fid} eta_r={r} eta1={e1}",
                    formula, oracle, names=("p2", "p1", "p0", "f_prime"))

    # Generation-block structure: printed coefficient magnitudes and the
    # two-to-one weight ratio of entangled over double-excitation terms.
    res = blocks.bsm1_generate(1e-6)
    mono = res.monomial_amplitudes
    bell = sorted(m for occ, m in mono.items()
                  if sum(occ) == 2 and max(occ) == 1)
    spur = sorted(m for occ, m in mono.items()
                  if sum(occ) == 2 and max(occ) == 2)
    ratio = sum(m ** 2 for m in bell) / sum(m ** 2 for m in spur)
    compare("generation", "chi->0", (0.5, 0.25, 2.0),
            (bell[0], spur[0], ratio), names=("bell_amp", "double_amp", "ratio"))
    rows.append(("generation", 0, 0, 0, bell[0], spur[0], ratio, "oracle"))

    return (not failures), rows, failures


def cmd_verify(args) -> int:
    ok, rows, failures = run_verify(tolerance=args.tolerance, grid=args.grid,
                                    corrupt=args.self_test_corrupt)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "verify.csv"
    write_csv(csv_path, ("block", "eta_r", "eta1", "eta2", "p2", "p1", "p0",
                         "source"), rows)
    print(f"wrote {csv_path}")
    if not ok:
        block, label, name, f, o, d = failures[0]
        print(f"FAIL: {block} [{label}] {name}: formula={f!r} oracle={o!r} "
              f"|delta|={d:.3e} > {args.tolerance:g}")
        print(f"{len(failures)} failing comparisons in total")
        return 1
    print(f"all comparisons within {args.tolerance:g}")
    return 0


# ---------------------------------------------------------------------------
# simulate

def cmd_simulate(args) -> int:
    path = Path(args.config)
    try:
        config = load_repeater_config(path, seed_override=args.seed)
    except (OSError, ValueError, TypeError) as exc:
        print(f"config error in {path}: {exc}", file=sys.stderr)
        return 2
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        report = sim.monte_carlo_run(config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = path.stem

    payload = report_payload(report)
    json_path = out_dir / f"{stem}_report.json"
    json_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                         encoding="utf-8")

    csv_path = out_dir / f"{stem}_levels.csv"
    write_csv(
        csv_path,
        ("stage", "level", "p_success", "t_expected_s", "p2", "p1", "p0",
         "p2_hi", "p3_hi", "fidelity"),
        [
            (lv.kind, lv.level, lv.p_success, lv.t_expected_s, lv.state.p2,
             lv.state.p1, lv.state.p0, lv.state.p2_hi, lv.state.p3_hi,
             lv.state.fidelity)
            for lv in report.analytic.levels
        ],
    )
    manifest = write_manifest(out_dir, stem, config,
                              [json_path, csv_path], config.seed)
    print(f"wrote {json_path}\nwrote {csv_path}\nwrote {manifest}")
    print(f"analytic total time: {report.analytic.total_time_s:.6g} s")
    if report.mc_mean_s is not None:
        print(f"monte-carlo mean:   {report.mc_mean_s:.6g} s "
              f"(std {report.mc_std_s:.3g}, trials {config.trials})")
    print(f"final normalized p2: {report.success_probability:.6g}")
    print(f"final fidelity:      {report.final_fidelity:.6g}")
    return 0


def report_payload(report: sim.SimReport) -> dict:
    config = report.config
    return {
        "config": dataclasses.asdict(config),
        "config_hash": config_hash(config),
        "levels": [
            {
                "stage": lv.kind,
                "level": lv.level,
                "p_success": lv.p_success,
                "t_expected_s": lv.t_expected_s,
                "p2": lv.state.p2,
                "p1": lv.state.p1,
                "p0": lv.state.p0,
                "p2_hi": lv.state.p2_hi,
                "p3_hi": lv.state.p3_hi,
                "fidelity": lv.state.fidelity,
            }
            for lv in report.analytic.levels
        ],
        "total": {
            "analytic_time_s": report.analytic.total_time_s,
            "product_form_time_s": report.analytic.product_form_time_s,
            "eq16_time_s": report.analytic.eq16_time_s,
            "mc_mean_s": report.mc_mean_s,
            "mc_std_s": report.mc_std_s,
            "mc_percentiles": report.mc_percentiles,
            "success_probability": report.success_probability,
            "final_fidelity": report.final_fidelity,
        },
        "attempts_histogram": {
            str(k): v for k, v in (report.attempts_histogram or {}).items()
        },
    }


# ---------------------------------------------------------------------------
# analyze-phase

def load_phase_config(path: Path) -> dict:
    data = parse_config_text(path.read_text(encoding="utf-8"))
    channel = data.get("channel", {})
    spec = phase.ChannelSpec(
        length_km=channel.get("length_km", 10.0),
        loss_db_per_km=channel.get("loss_db_per_km", 2.0),
        medium=channel.get("medium", phase.FIBER),
        wavelength_um=channel.get("wavelength_um", 1.0),
    )
    return {
        "channel": spec,
        "chi": data.get("generation", {}).get("chi", 1e-4),
        "delta_phi_max": data.get("budget", {}).get("delta_phi_max",
                                                    2.0 * math.pi / 10.0),
        "sigma_grid": data.get("budget", {}).get(
            "sigma_grid", [0.0, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0]),
        "samples": data.get("budget", {}).get("samples", 20000),
    }


def cmd_analyze_phase(args) -> int:
    path = Path(args.config)
    try:
        cfg = load_phase_config(path)
    except (OSError, ValueError, TypeError) as exc:
        print(f"config error in {path}: {exc}", file=sys.stderr)
        return 2
    channel = cfg["channel"]
    budget = phase.jitter_budget(channel, cfg["delta_phi_max"])
    t0 = phase.generation_duration(channel, cfg["chi"])
    ratio = phase.two_photon_robustness_ratio(channel.wavelength_um, 3.0)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = path.stem
    budget_path = out_dir / f"{stem}_budget.csv"
    write_csv(
        budget_path,
        ("quantity", "value", "unit"),
        [
            ("delta_phi_max", budget.delta_phi_max, "rad"),
            ("delta_x_max", budget.delta_x_max, "m"),
            ("delta_t_max", budget.delta_t_max, "s"),
            ("generation_duration", t0, "s"),
            ("classical_comm_time", channel.classical_communication_time_s, "s"),
            ("two_photon_robustness", ratio, "dimensionless"),
        ],
    )
    curve_path = out_dir / f"{stem}_fidelity_curve.csv"
    rows = []
    for sigma in cfg["sigma_grid"]:
        mean, std = phase.accumulated_phase_fidelity(
            [sigma], samples=cfg["samples"], seed=args.seed or 0)
        rows.append((sigma, mean, std))
    write_csv(curve_path, ("sigma_rad", "fidelity_mean", "fidelity_std"), rows)
    manifest = write_manifest(out_dir, stem, cfg_serializable(cfg),
                              [budget_path, curve_path], args.seed or 0)
    print(f"wrote {budget_path}\nwrote {curve_path}\nwrote {manifest}")
    print(f"generation duration: {t0:.6g} s")
    print(f"jitter budget: dx={budget.delta_x_max:.6g} m, "
          f"dt={budget.delta_t_max:.6g} s")
    return 0


def cfg_serializable(cfg: dict) -> dict:
    out = dict(cfg)
    out["channel"] = dataclasses.asdict(cfg["channel"])
    return out


# ---------------------------------------------------------------------------
# sweep

def cmd_sweep(args) -> int:
    path = Path(args.config)
    try:
        config = load_repeater_config(path, seed_override=args.seed)
        values = [_parse_scalar(v) for v in args.values.split(",")]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            reports = sim.sweep(config, args.axis, values)
    except (OSError, ValueError, TypeError) as exc:
        print(f"sweep error: {exc}", file=sys.stderr)
        return 2
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"{path.stem}_sweep_{args.axis}"
    rows = []
    for value, rep in zip(values, reports):
        rows.append((value, rep.analytic.total_time_s, rep.mc_mean_s,
                     rep.analytic.eq16_time_s,
                     rep.success_probability, rep.final_fidelity))
    csv_path = out_dir / f"{stem}.csv"
    write_csv(csv_path, (args.axis, "analytic_time_s", "mc_mean_s",
                         "eq16_time_s", "p2", "fidelity"), rows)
    outputs = [csv_path]
    if args.axis == "total_length_km" and len(values) >= 2:
        pairs16 = [(r.config, r.analytic.eq16_time_s) for r in reports]
        pairs_rec = [(r.config, r.analytic.total_time_s) for r in reports]
        eta = config.efficiency.eta
        predicted = 2.0 + math.log2(1.0 / eta)
        slope_path = out_dir / f"{stem}_slope.csv"
        write_csv(slope_path, ("quantity", "value"),
                  [("eq16_exponent", sim.fit_distance_exponent(pairs16)),
                   ("recursion_exponent", sim.fit_distance_exponent(pairs_rec)),
                   ("predicted_exponent", predicted)])
        outputs.append(slope_path)
        print(f"wrote {slope_path}")
    manifest = write_manifest(out_dir, stem, config, outputs, config.seed)
    print(f"wrote {csv_path}\nwrote {manifest}")
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qrepeater",
        description="Simulator and analysis toolkit for two-photon-"
                    "interference atomic-ensemble quantum repeaters.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="compare coefficient formulas with the "
                                      "Fock-engine oracle")
    p.add_argument("--grid", choices=("full", "small"), default="full")
    p.add_argument("--tolerance", type=float, default=1e-10)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--self-test-corrupt", action="store_true",
                   help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("simulate", help="run the repeater simulation from a "
                                        "config file")
    p.add_argument("config")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze-phase", help="phase-stability budgets and "
                                             "generation-duration estimates")
    p.add_argument("config")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_analyze_phase)

    p = sub.add_parser("sweep", help="repeat the simulation along one config "
                                     "axis")
    p.add_argument("config")
    p.add_argument("--axis", required=True)
    p.add_argument("--values", required=True,
                   help="comma-separated values for the axis")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
