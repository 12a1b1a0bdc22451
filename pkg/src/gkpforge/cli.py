"""Batch command-line front end.

Commands: budget, solvability, condition, extract, milestones, ramsey.
Every report embeds a run manifest (inputs with content hashes, seed,
configuration versions, tool version, timestamp) and is deterministic
given (inputs, flags, seed). Exit codes: 0 success, 1 computation refused
on physics grounds, 2 input validation error, 3 internal numerical
failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .angular import default_channels
from .barriers import SignalModel, build_budget, load_anchors, qed_correction, signal_band
from .budget import (
    chi_bound,
    chi_bound_from_extraction,
    load_milestones,
    milestone_lookup,
    ramsey_plan,
)
from .errors import (
    ConfigurationError,
    NumericalError,
    RefusalError,
    ValidationError,
)
from .gkp import (
    Topology,
    build_design,
    extract,
    load_coefficients,
    precondition,
    solvability_verdict,
    solvable,
)
from .montecarlo import kappa_draws, load_sampling_spec, sample_kappa
from .nucdata import load_chain, partition
from .resources import resource_path, sha256_of

EXIT_OK = 0
EXIT_REFUSED = 1
EXIT_INVALID = 2
EXIT_NUMERICAL = 3

ENV_TIMESTAMP = "GKPFORGE_TIMESTAMP"


def _sci(x: float) -> str:
    """Scientific notation with 6 significant digits, locale-independent."""
    if x is None:
        return ""
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return f"{x:.5e}"


def _timestamp() -> str:
    pinned = os.environ.get(ENV_TIMESTAMP)
    if pinned:
        return pinned
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch:
        return datetime.fromtimestamp(int(epoch), tz=timezone.utc).isoformat()
    return datetime.now(tz=timezone.utc).isoformat()


def _manifest(command: str, inputs: dict[str, Path], seed: int | None, versions: dict[str, str]) -> dict:
    return {
        "command": command,
        "inputs": {
            role: {"path": str(path), "sha256": sha256_of(path)} for role, path in inputs.items()
        },
        "seed": seed,
        "config_versions": versions,
        "tool_version": __version__,
        "timestamp": _timestamp(),
    }


def _flatten_csv(report: dict) -> str:
    """Generic key,value CSV of the report's scalar payload; list-of-object
    fields become their own row groups."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["key", "value"])
    tables = {}
    for key, value in report.items():
        if key == "manifest":
            continue
        if isinstance(value, list) and value and all(isinstance(v, dict) for v in value):
            tables[key] = value
        elif isinstance(value, (str, int, float, bool)) or value is None:
            writer.writerow([key, "" if value is None else value])
    for key, rows in tables.items():
        writer.writerow([])
        header = list(rows[0])
        writer.writerow([key] + header)
        for row in rows:
            writer.writerow([""] + ["" if row.get(col) is None else row.get(col) for col in header])
    return buf.getvalue()


def _emit(report: dict, table: str, args) -> None:
    if args.format == "json":
        print(json.dumps(report, indent=2, sort_keys=True))
    elif args.format == "csv":
        print(_flatten_csv(report), end="")
    else:
        print(table)
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / f"{report['manifest']['command']}.json"
        path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _chain_from_args(args, default: str = "mo-chain-v1"):
    source = args.chain or default
    path = resource_path(source)
    return load_chain(path), path


# ---------------------------------------------------------------------------
# budget

def cmd_budget(args) -> int:
    chain, chain_path = _chain_from_args(args)
    anchors_path = resource_path(args.anchors)
    anchors = load_anchors(anchors_path)
    channels = default_channels(anchors.fs_gap_eV)
    budget = build_budget(chain, channels, anchors, scenario=args.scenario, probe_A=args.probe)

    model = SignalModel.from_anchors(anchors, chain)
    probe = chain.isotope(budget.probe_A)
    band = signal_band(model, probe, points=5)
    qed_fraction, qed_residual = qed_correction(model, beta2_variation=0.5)
    bound_nominal = chi_bound(budget.combined_eV, anchors.signal_anchor_eV)
    band_signals = [s for _, s in band]
    bound_band = [chi_bound(budget.combined_eV, s) for s in band_signals]

    lines = [
        f"Electromagnetic barrier budget  (probe A={budget.probe_A}, channel {budget.channel_label}, scenario {budget.scenario})",
        "",
        f"{'Barrier':<22}{'Scaling':<10}{'Raw (eV)':<14}{'Current (eV)':<15}{'Projected (eV)':<15}",
    ]
    for e in budget.entries:
        if e.raw_eV is None:
            lines.append(f"{e.name:<22}{e.scaling:<10}{e.note}")
        else:
            lines.append(
                f"{e.name:<22}{e.scaling:<10}{_sci(e.raw_eV):<14}{_sci(e.current_eV):<15}{_sci(e.projected_eV):<15}"
            )
    lines += [
        f"{'Combined (sum)':<32}{'':<14}{_sci(budget.combined_current_eV):<15}{_sci(budget.combined_projected_eV):<15}",
        f"{'Combined (max)':<32}{'':<14}{_sci(budget.max_current_eV):<15}{_sci(budget.max_projected_eV):<15}",
        f"{'Signal (nominal)':<32}{_sci(budget.signal_nominal_eV)}",
        "",
        f"Scenario combined residual: {_sci(budget.combined_eV)} eV, dominant barrier: {budget.dominant}",
        f"|chi-1| bound at nominal signal: {_sci(bound_nominal)}",
        f"|chi-1| band over the form-factor range: [{_sci(min(bound_band))}, {_sci(max(bound_band))}]",
        f"Signal radiative correction: {qed_fraction:.4f} fractional, residual {_sci(qed_residual)} eV",
    ]

    report = {
        "manifest": _manifest(
            "budget", {"chain": chain_path, "anchors": anchors_path}, None, {"anchors": anchors.name}
        ),
        "scenario": budget.scenario,
        "probe_A": budget.probe_A,
        "channel": budget.channel_label,
        "entries": [
            {
                "name": e.name,
                "scaling": e.scaling,
                "raw_eV": e.raw_eV,
                "current_eV": e.current_eV,
                "projected_eV": e.projected_eV,
                "note": e.note,
            }
            for e in budget.entries
        ],
        "combined_current_eV": budget.combined_current_eV,
        "combined_projected_eV": budget.combined_projected_eV,
        "max_current_eV": budget.max_current_eV,
        "max_projected_eV": budget.max_projected_eV,
        "combined_eV": budget.combined_eV,
        "dominant": budget.dominant,
        "signal_nominal_eV": budget.signal_nominal_eV,
        "chi_bound_nominal": bound_nominal,
        "chi_bound_band": [min(bound_band), max(bound_band)],
        "signal_band_eV": [[f, s] for f, s in band],
        "qed_fractional_correction": qed_fraction,
        "qed_residual_eV": qed_residual,
    }
    _emit(report, "\n".join(lines), args)
    return EXIT_OK


# ---------------------------------------------------------------------------
# solvability

def cmd_solvability(args) -> int:
    chain, chain_path = _chain_from_args(args)
    even_even, odd = partition(chain)
    n_ee = len(even_even) - (1 if any(r.A == chain.reference_A for r in even_even) else 0)
    n_odd_stable = len(odd)

    enumeration = [
        ("Stable, 1 trans.", Topology(n_ee, n_odd_stable, 1)),
        ("+ FRIB 91Mo", Topology(n_ee, n_odd_stable + 1, 1)),
        ("Stable, 2 trans.", Topology(n_ee, n_odd_stable, 2)),
        ("+ FRIB + 2 trans.", Topology(n_ee, n_odd_stable + 1, 2)),
    ]
    selected = Topology(n_ee, n_odd_stable + len(args.add_isotope), args.transitions)
    ok, n_eq, n_unk = solvable(selected, args.nbkg)

    lines = [
        "Experimental topologies for the rank-2 extraction",
        "",
        f"{'Topology':<20}{'N_ee':<6}{'N_odd':<7}{'N_trans':<9}{'Solvable?':<14}",
    ]
    rows_json = []
    for label, top in enumeration:
        verdict = solvability_verdict(top, args.nbkg)
        lines.append(f"{label:<20}{top.N_ee:<6}{top.N_odd:<7}{top.N_trans_rank2:<9}{verdict:<14}")
        ok_row, eq_row, unk_row = solvable(top, args.nbkg)
        rows_json.append(
            {
                "label": label,
                "N_ee": top.N_ee,
                "N_odd": top.N_odd,
                "N_trans_rank2": top.N_trans_rank2,
                "solvable": ok_row,
                "n_equations": eq_row,
                "n_unknowns": unk_row,
                "verdict": verdict,
            }
        )
    sel_verdict = solvability_verdict(selected, args.nbkg)
    lines += [
        "",
        f"Selected configuration: N_odd={selected.N_odd}, N_trans={selected.N_trans_rank2}, "
        f"N_bkg={args.nbkg} -> {sel_verdict}",
    ]
    report = {
        "manifest": _manifest("solvability", {"chain": chain_path}, None, {}),
        "topologies": rows_json,
        "selected": {
            "N_ee": selected.N_ee,
            "N_odd": selected.N_odd,
            "N_trans_rank2": selected.N_trans_rank2,
            "N_bkg": args.nbkg,
            "solvable": ok,
            "n_equations": n_eq,
            "n_unknowns": n_unk,
            "verdict": sel_verdict,
        },
    }
    _emit(report, "\n".join(lines), args)
    return EXIT_OK


# ---------------------------------------------------------------------------
# condition

_HISTOGRAM_EDGES = np.logspace(0.0, 3.0, 49)


def _histogram_csv(kappas: np.ndarray) -> str:
    finite = kappas[np.isfinite(kappas)]
    counts, _ = np.histogram(finite, bins=_HISTOGRAM_EDGES)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["bin_left", "bin_right", "count"])
    for left, right, count in zip(_HISTOGRAM_EDGES[:-1], _HISTOGRAM_EDGES[1:], counts):
        writer.writerow([repr(float(left)), repr(float(right)), int(count)])
    writer.writerow([repr(float(_HISTOGRAM_EDGES[-1])), "inf", int((finite > _HISTOGRAM_EDGES[-1]).sum())])
    writer.writerow(["rank_deficient", "", int(np.sum(~np.isfinite(kappas)))])
    return buf.getvalue()


def cmd_condition(args) -> int:
    chain, chain_path = _chain_from_args(args)
    coeffs_path = resource_path(args.coeffs)
    coeffs = load_coefficients(coeffs_path)
    spec_path = resource_path(args.spec)
    spec = load_sampling_spec(spec_path)
    seed = args.seed if args.seed is not None else spec.seed
    samples = args.samples if args.samples is not None else spec.sample_count

    kappas, excluded = kappa_draws(chain, coeffs, spec, sample_count=samples, seed=seed)
    summary = sample_kappa(chain, coeffs, spec, sample_count=samples, seed=seed)
    histogram = _histogram_csv(kappas)

    lines = [
        f"Conditioning study: {summary.sample_count} draws, seed {summary.seed}",
        "",
        f"kappa mean   {_sci(summary.mean)}",
        f"kappa std    {_sci(summary.std)}",
        f"kappa median {_sci(summary.median)}",
        f"kappa p5     {_sci(summary.p5)}",
        f"kappa p95    {_sci(summary.p95)}",
        f"rank-deficient fraction {_sci(summary.rank_deficient_fraction)}",
        f"guard-band excluded fraction {_sci(summary.excluded_fraction)}",
    ]
    report = {
        "manifest": _manifest(
            "condition",
            {"chain": chain_path, "coeffs": coeffs_path, "spec": spec_path},
            seed,
            {"coeffs": coeffs.name, "spec": spec.name},
        ),
        "summary": {
            "mean": summary.mean,
            "std": summary.std,
            "median": summary.median,
            "p5": summary.p5,
            "p95": summary.p95,
            "rank_deficient_fraction": summary.rank_deficient_fraction,
            "excluded_fraction": summary.excluded_fraction,
            "seed": summary.seed,
            "sample_count": summary.sample_count,
        },
    }
    if args.format == "csv":
        print(histogram, end="")
    else:
        _emit(report, "\n".join(lines), args)
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "condition_histogram.csv").write_text(histogram, encoding="utf-8")
        if args.format == "csv":
            (out_dir / "condition.json").write_text(
                json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
            )
    return EXIT_OK


# ---------------------------------------------------------------------------
# extract

def _load_rhs_file(path: Path) -> list[dict]:
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"rhs file {path} is not valid JSON: {exc}") from exc
    if "rows" not in obj or not isinstance(obj["rows"], list) or not obj["rows"]:
        raise ValidationError(f"rhs file {path} must contain a non-empty 'rows' list")
    for k, row in enumerate(obj["rows"]):
        for key in ("A", "transition", "delta_eV", "sigma_eV"):
            if key not in row:
                raise ValidationError(f"rhs file {path}: row {k} is missing {key!r}")
        if float(row["sigma_eV"]) <= 0:
            raise ValidationError(f"rhs file {path}: row {k} has non-positive sigma_eV")
    return obj["rows"]


def cmd_extract(args) -> int:
    chain, chain_path = _chain_from_args(args, default="mo-chain-frib-synthetic-v1")
    coeffs_path = resource_path(args.coeffs)
    coeffs = load_coefficients(coeffs_path)
    anchors = load_anchors(resource_path(args.anchors))
    rhs_path = Path(args.rhs)
    if not rhs_path.exists():
        raise ValidationError(f"rhs file {str(rhs_path)!r} does not exist")
    rhs_rows = _load_rhs_file(rhs_path)

    _, odd = partition(chain)
    rhs_isotopes = sorted({int(r["A"]) for r in rhs_rows})
    rhs_transitions = sorted({str(r["transition"]) for r in rhs_rows})
    odd_used = [rec for rec in odd if rec.A in rhs_isotopes]
    missing = set(rhs_isotopes) - {rec.A for rec in odd_used}
    if missing:
        raise ValidationError(f"rhs references isotopes absent from the chain's odd subset: {sorted(missing)}")
    coeffs_used = coeffs.subset(rhs_transitions)

    top = Topology(0, len(odd_used), len(rhs_transitions))
    ok, n_eq, n_unk = solvable(top, N_bkg=2)
    if not ok:
        raise RefusalError(
            f"underdetermined topology: {n_eq} equations for {n_unk} unknowns. With "
            f"{len(rhs_transitions)} rank-2 transition(s) the counting condition requires "
            f"N_odd >= {math.ceil(n_unk / len(rhs_transitions))}; in the single-transition "
            "case this is the N_odd >= 3 requirement."
        )

    design = build_design(odd_used, coeffs_used)
    by_key = {(int(r["A"]), str(r["transition"])): r for r in rhs_rows}
    missing_rows = [key for key in design.rows if key not in by_key]
    if missing_rows:
        raise ValidationError(f"rhs file lacks entries for design rows: {missing_rows}")
    rhs = np.array([float(by_key[key]["delta_eV"]) for key in design.rows])
    sigma = np.array([float(by_key[key]["sigma_eV"]) for key in design.rows])

    pre = precondition(design.with_rhs(rhs, sigma))
    result = extract(pre)
    bound = chi_bound_from_extraction(result, anchors.signal_anchor_eV)
    result = result.with_chi_bound(bound)

    lines = [
        f"Rank-2 extraction: {n_eq} equations, {n_unk} unknowns, kappa = {_sci(result.condition_number)}",
        "",
        f"{'unknown':<22}{'estimate':<16}{'std error':<16}",
    ]
    for name, value, err in result.background_estimates:
        lines.append(f"{name:<22}{_sci(value):<16}{_sci(err):<16}")
    lines += [
        f"{'gravitomagnetic':<22}{_sci(result.alpha_manko_hat):<16}{_sci(result.alpha_manko_se):<16}",
        "",
        f"residual norm: {_sci(result.residual_norm_eV)} eV",
        f"|chi-1| bound from the amplitude standard error: {_sci(bound)}",
    ]
    report = {
        "manifest": _manifest(
            "extract",
            {"chain": chain_path, "coeffs": coeffs_path, "rhs": rhs_path},
            args.seed,
            {"coeffs": coeffs.name, "anchors": anchors.name},
        ),
        "rows": [list(key) for key in design.rows],
        "design": pre.to_json_dict(),
        **result.to_json_dict(),
        "signal_at_chi1_eV": anchors.signal_anchor_eV,
        "alpha_t_convention": coeffs.alpha_t_convention,
    }
    _emit(report, "\n".join(lines), args)
    return EXIT_OK


# ---------------------------------------------------------------------------
# milestones / ramsey

def cmd_milestones(args) -> int:
    ladder_path = resource_path(args.ladder)
    ladder = load_milestones(ladder_path)
    lines = [
        "Sensitivity milestones",
        "",
        f"{'Sensitivity (eV)':<18}{'Dominant barrier':<22}{'Required advance':<42}{'Era':<26}",
    ]
    for row in ladder.rows:
        lines.append(
            f"{_sci(row.sensitivity_eV):<18}{row.dominant_barrier:<22}{row.required_advance:<42}{row.era:<26}"
        )
    report = {
        "manifest": _manifest("milestones", {"ladder": ladder_path}, None, {"ladder": ladder.name}),
        "rows": [
            {
                "sensitivity_eV": r.sensitivity_eV,
                "dominant_barrier": r.dominant_barrier,
                "required_advance": r.required_advance,
                "era": r.era,
            }
            for r in ladder.rows
        ],
        "era_boundary_eV": ladder.era_boundary_eV,
    }
    if args.target is not None:
        row = milestone_lookup(args.target, ladder)
        lines += [
            "",
            f"Target {_sci(args.target)} eV -> dominant barrier: {row.dominant_barrier}; "
            f"required advance: {row.required_advance}; era: {row.era}",
        ]
        report["target"] = {
            "sensitivity_eV": args.target,
            "dominant_barrier": row.dominant_barrier,
            "required_advance": row.required_advance,
            "era": row.era,
        }
    _emit(report, "\n".join(lines), args)
    return EXIT_OK


def cmd_ramsey(args) -> int:
    half_life = None if args.half_life in (None, "stable") else float(args.half_life)
    plan = ramsey_plan(half_life, args.tr, args.reps)
    lines = ["Ramsey interrogation plan", ""]
    if plan.half_life_s is None:
        lines.append("species: stable")
    else:
        lines.append(f"species half-life: {_sci(plan.half_life_s)} s")
        lines.append(f"decay-limited optimum T_R: {_sci(plan.T_R_opt_s)} s")
    lines += [
        f"requested T_R: {_sci(plan.T_R_requested_s)} s",
        f"planned T_R:   {_sci(plan.T_R_s)} s",
        f"per-shot linewidth: {_sci(plan.per_shot_linewidth_Hz)} Hz",
        f"repetitions: {plan.repetitions}",
        f"campaign sensitivity: {_sci(plan.campaign_sensitivity_Hz)} Hz = {_sci(plan.campaign_sensitivity_eV)} eV",
    ]
    if plan.decay_penalty_at_request is not None:
        lines.append(f"decay penalty at requested T_R: {_sci(plan.decay_penalty_at_request)}")
    if plan.warning:
        lines.append(f"WARNING: {plan.warning}")
    report = {
        "manifest": _manifest("ramsey", {}, None, {}),
        "half_life_s": plan.half_life_s,
        "T_R_requested_s": plan.T_R_requested_s,
        "T_R_s": plan.T_R_s,
        "T_R_opt_s": plan.T_R_opt_s,
        "per_shot_linewidth_Hz": plan.per_shot_linewidth_Hz,
        "repetitions": plan.repetitions,
        "campaign_sensitivity_Hz": plan.campaign_sensitivity_Hz,
        "campaign_sensitivity_eV": plan.campaign_sensitivity_eV,
        "decay_penalty_at_request": plan.decay_penalty_at_request,
        "warning": plan.warning,
    }
    _emit(report, "\n".join(lines), args)
    return EXIT_OK


# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gkpforge",
        description="Barrier budgets, topology checks, conditioning studies, rank-2 extraction, "
        "and metrological milestones for gravitomagnetic spin-quadrupole searches.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--chain", default=None, metavar="PATH",
                        help="chain file or bundled resource name (default: bundled Mo chain)")
    common.add_argument("--out", default=None, metavar="DIR", help="directory for JSON/CSV artifacts")
    common.add_argument("--format", choices=["table", "json", "csv"], default="table")
    common.add_argument("--seed", type=int, default=None, metavar="U64")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("budget", parents=[common], help="electromagnetic barrier budget for a probe isotope")
    p.add_argument("--anchors", default="mo41-anchors-v1", metavar="PATH")
    p.add_argument("--scenario", choices=["current", "projected"], default="current")
    p.add_argument("--probe", type=int, default=None, metavar="A")
    p.set_defaults(handler=cmd_budget)

    p = sub.add_parser("solvability", parents=[common], help="topology counting for the rank-2 extraction")
    p.add_argument("--transitions", type=int, default=1, metavar="N")
    p.add_argument("--nbkg", type=int, default=2, metavar="K")
    p.add_argument("--add-isotope", type=int, action="append", default=[], metavar="A",
                   help="count an additional odd isotope (topology counting only)")
    p.set_defaults(handler=cmd_solvability)

    p = sub.add_parser("condition", parents=[common], help="Monte Carlo conditioning of the design matrix")
    p.add_argument("--spec", default="mo91-sampling-v1", metavar="PATH")
    p.add_argument("--coeffs", default="mo41-coeffs-v1", metavar="PATH")
    p.add_argument("--samples", type=int, default=None, metavar="N")
    p.set_defaults(handler=cmd_condition)

    p = sub.add_parser("extract", parents=[common], help="weighted rank-2 extraction from an rhs file")
    p.add_argument("--coeffs", default="mo41-coeffs-v1", metavar="PATH")
    p.add_argument("--anchors", default="mo41-anchors-v1", metavar="PATH")
    p.add_argument("--rhs", required=True, metavar="PATH")
    p.set_defaults(handler=cmd_extract)

    p = sub.add_parser("milestones", parents=[common], help="sensitivity milestone ladder and lookup")
    p.add_argument("--ladder", default="milestones-v1", metavar="PATH")
    p.add_argument("--target", type=float, default=None, metavar="EV")
    p.set_defaults(handler=cmd_milestones)

    p = sub.add_parser("ramsey", parents=[common], help="decay-limited Ramsey interrogation plan")
    p.add_argument("--half-life", default=None, metavar="S", help="half-life in seconds, or 'stable'")
    p.add_argument("--tr", type=float, required=True, metavar="S", help="requested interrogation time")
    p.add_argument("--reps", type=int, default=1, metavar="N")
    p.set_defaults(handler=cmd_ramsey)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except RefusalError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except (ValidationError, ConfigurationError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
