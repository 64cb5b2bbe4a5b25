"""Command-line front end.

Angles are degrees on the command line and in every output file.  Exit codes:
0 success, 1 a check failed, 2 usage or input error.
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
from typing import Sequence

import numpy as np

from . import __version__
from .errors import BiphotonError, FitError
from .experiment import (
    BALANCED_HWP1,
    BALANCED_HWP2,
    ApparatusConfig,
    ScanSpec,
    config_for_state,
    effective_density,
    orthogonality_scan,
    simulate_counts,
    tomography_scan,
)
from .optics import majorana_modes, solve_filter_settings
from .qutrit import (
    DensityMatrix3,
    ProtocolStateId,
    PureQutrit,
    eigendecompose,
    fidelity,
    majorana_decompose,
    normalize,
    protocol_state,
    verify_mub,
)
from .reference_data import (
    MEASURED_BETA2_RHO,
    MLE_FIDELITY_TOLERANCE,
    MODEL_OVERLAP_BETA2,
    PRINT_TOLERANCE,
    REPORTED_EIGENVALUES,
    REPORTED_MLE_FIDELITIES,
    REPORTED_PRINCIPAL_FIDELITY,
    REPORTED_PRINCIPAL_WEIGHT,
)
from .tomography import (
    CountRecord,
    fit_phase_scan,
    linear_inversion,
    mle_reconstruct,
    protocol_settings,
)

SEED_ENV = "BIPHOTON_SEED"
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class InputError(Exception):
    """Bad user input detected after argument parsing (exit code 2)."""


def num(x: float) -> float:
    """Round to 12 significant digits so outputs are byte-stable."""
    x = float(x)
    if not math.isfinite(x):
        return x
    out = float(f"{x:.12g}")
    return 0.0 if out == 0 else out


def fmt(x: float) -> str:
    return f"{num(x):.12g}"


def fmt_complex(z: complex) -> str:
    im = num(z.imag)
    return f"{fmt(z.real)}{'-' if im < 0 else '+'}{fmt(abs(im))}j"


def complex_json(z: complex) -> list[float]:
    return [num(z.real), num(z.imag)]


def matrix_json(rho, physical: bool | None = None) -> dict:
    arr = np.asarray(rho, dtype=complex)
    out = {"matrix": [[complex_json(z) for z in row] for row in arr]}
    if physical is not None:
        out["physical"] = bool(physical)
    return out


def manifest(command: str, params: dict, seed: int | None) -> dict:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    when = datetime.fromtimestamp(int(epoch), timezone.utc) if epoch else datetime.now(timezone.utc)
    return {
        "command": command,
        "parameters": params,
        "seed": seed,
        "version": __version__,
        "timestamp": when.strftime("%Y-%m-%dT%H:%M:%SZ"),
    }


def default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise InputError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def parse_state_id(text: str) -> ProtocolStateId:
    try:
        return ProtocolStateId.parse(text)
    except KeyError:
        raise argparse.ArgumentTypeError(f"unknown state {text!r}") from None


def parse_amplitudes(text: str) -> PureQutrit:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected three comma-separated amplitudes")
    try:
        raw = [complex(p.replace(" ", "")) for p in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad amplitude list {text!r}") from None
    try:
        return normalize(raw)
    except BiphotonError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def parse_events(text: str) -> float:
    if text.lower() in ("inf", "infinity"):
        return math.inf
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad event count {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError("events must be > 0")
    return v


def parse_grid(text: str) -> tuple[float, float, float]:
    try:
        start, stop, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError("grid must be START:STOP:STEP in degrees") from None
    if step <= 0 or stop <= start:
        raise argparse.ArgumentTypeError("grid needs STOP > START and STEP > 0")
    return start, stop, step


def grid_values(grid: tuple[float, float, float]) -> np.ndarray:
    start, stop, step = grid
    n = int(math.floor((stop - start) / step + 1e-9))
    return start + step * np.arange(n)


def write_output(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


# ---------------------------------------------------------------------------
# counts files


def write_counts_csv(records: Sequence[CountRecord], meta: dict) -> str:
    buf = io.StringIO()
    buf.write("# manifest: " + json.dumps(meta, ensure_ascii=False) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["setting", "count", "weight"])
    for r in records:
        w.writerow([r.setting, fmt(r.count), fmt(r.weight)])
    return buf.getvalue()


def read_counts_csv(path: str) -> list[CountRecord]:
    """Parse a ``setting,count,weight`` file; ``#`` lines are comments."""
    try:
        with open(path, newline="") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    labels = {s.label for s in protocol_settings()}
    records: list[CountRecord] = []
    header_seen = False
    for lineno, line in enumerate(lines, start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        row = next(csv.reader([line]))
        row = [c.strip() for c in row]
        if not header_seen:
            if row != ["setting", "count", "weight"]:
                raise InputError(f"{path}: line {lineno}: expected header 'setting,count,weight'")
            header_seen = True
            continue
        if len(row) != 3:
            raise InputError(f"{path}: line {lineno}: expected 3 fields, got {len(row)}")
        if row[0] not in labels:
            raise InputError(f"{path}: line {lineno}: unknown setting {row[0]!r}")
        try:
            records.append(CountRecord(row[0], float(row[1]), float(row[2])))
        except ValueError as exc:
            raise InputError(f"{path}: line {lineno}: {exc}") from None
    if not header_seen:
        raise InputError(f"{path}: line {len(lines) + 1}: missing header")
    return records


# ---------------------------------------------------------------------------
# commands


def _deg(x: float) -> float:
    return math.degrees(x)


def cmd_state(args) -> int:
    if args.c is not None:
        state, name = args.c, "custom"
        table_phases = None
    else:
        sid = args.id
        state, name = protocol_state(sid), f"{sid.ascii_name} ({sid.label}, basis {sid.basis})"
        table_phases = sid.phases_deg
    out = [f"state: {name}"]
    out.append("amplitudes: " + "  ".join(
        f"c{i + 1}={fmt_complex(c)}" for i, c in enumerate(state.vector)))
    out.append("moduli: " + "  ".join(fmt(abs(c)) for c in state.vector))
    out.append("phases_deg: " + "  ".join(fmt(p) for p in state.phases_deg))
    if table_phases is not None:
        out.append("table_phases_deg: " + "  ".join(fmt(p) for p in table_phases))
    out.append("density_matrix:")
    for row in state.projector:
        out.append("  " + "  ".join(fmt_complex(z) for z in row))
    pair = majorana_decompose(state)
    for k, pt in enumerate(pair, start=1):
        out.append(f"majorana_{k}: theta_deg={fmt(_deg(pt.theta))} phi_deg={fmt(_deg(pt.phi))}")
    for k, mode in enumerate(majorana_modes(state), start=1):
        f = solve_filter_settings(mode)
        out.append(f"filter_arm{k}: chi_deg={fmt(_deg(f.chi))} theta_deg={fmt(_deg(f.theta))}")
    write_output("\n".join(out) + "\n", None)
    return EXIT_OK


def cmd_mub(args) -> int:
    report = verify_mub()
    names = [sid.ascii_name for sid in report.ids]
    width = max(len(n) for n in names) + 2
    lines = [" " * width + "".join(n.rjust(14) for n in names)]
    for i, n in enumerate(names):
        lines.append(n.ljust(width) + "".join(f"{report.overlaps[i, j]:14.10f}" for j in range(len(names))))
    if report.ok:
        lines.append("MUB check: PASS (66 pairs + 12 self-overlaps within 1e-12)")
    else:
        for v in report.violations:
            lines.append(
                f"MUB violation: {v.a.ascii_name} vs {v.b.ascii_name}: "
                f"expected {fmt(v.expected)}, observed {fmt(v.observed)}"
            )
        lines.append("MUB check: FAIL")
    write_output("\n".join(lines) + "\n", None)
    return EXIT_OK if report.ok else EXIT_FAIL


def _eigen_json(rho) -> dict:
    eig = eigendecompose(rho)
    return {
        "eigenvalues": [num(x) for x in eig.eigenvalues],
        "eigenvectors": [[complex_json(z) for z in v] for v in eig.eigenvectors],
    }


def cmd_tomo(args) -> int:
    seed = default_seed() if args.seed is None else args.seed
    settings = protocol_settings()
    target = None
    params: dict = {"rank": args.rank}
    if args.counts:
        records = read_counts_csv(args.counts)
        params["counts_file"] = os.path.basename(args.counts)
        if args.target is not None:
            target = protocol_state(args.target)
            params["target"] = args.target.ascii_name
    else:
        if args.id is None:
            raise InputError("give a state id or --counts FILE")
        target = protocol_state(args.id)
        cfg = config_for_state(target, overlap=args.overlap, accidental_rate=args.accidental,
                               mean_events=args.events)
        rho_true = effective_density(cfg)
        records = simulate_counts(rho_true.data, settings, cfg.mean_events, cfg.accidental_rate,
                                  seed, expectation=cfg.expectation)
        params.update({
            "state": args.id.ascii_name,
            "events": "inf" if math.isinf(args.events) else num(args.events),
            "overlap": num(args.overlap),
            "accidental_rate": num(args.accidental),
            "phi12_deg": num(_deg(cfg.phi12)),
            "phi13_deg": num(_deg(cfg.phi13)),
        })
    meta = manifest("tomo", params, seed)
    raw = linear_inversion(records, settings)
    eig = eigendecompose(raw)
    mle = mle_reconstruct(records, settings, rank=args.rank,
                          accidental_rate=0.0 if args.counts else args.accidental)
    report = {
        "manifest": meta,
        "counts": [{"setting": r.setting, "count": num(r.count), "weight": num(r.weight)} for r in records],
        "raw": matrix_json(raw.data, raw.physical),
        "raw_eigen": _eigen_json(raw),
        "principal_weight": num(eig.principal_weight),
        "mle": {
            **matrix_json(mle.rho.data, mle.rho.physical),
            "iterations": mle.iterations,
            "log_likelihood": num(mle.log_likelihood),
            "converged": mle.converged,
            "rank": mle.rank,
        },
    }
    if target is not None:
        report["target"] = [complex_json(z) for z in target.vector]
        report["raw_fidelity"] = num(fidelity(raw, target))
        report["principal_fidelity"] = num(fidelity(eig.principal, target))
        report["mle_fidelity"] = num(fidelity(mle.rho, target))
    if args.save_counts:
        write_output(write_counts_csv(records, meta), args.save_counts)
    write_output(dump_json(report), args.output)
    return EXIT_OK


def cmd_scan(args) -> int:
    seed = default_seed() if args.seed is None else args.seed
    degs = grid_values(args.grid)
    phi13 = math.radians(args.phi13)
    base = dict(overlap=args.overlap, accidental_rate=args.accidental, mean_events=args.events)
    params = {
        "kind": args.kind,
        "phi13_deg": num(args.phi13),
        "grid_deg": [num(x) for x in args.grid],
        "events": "inf" if math.isinf(args.events) else num(args.events),
        "overlap": num(args.overlap),
        "accidental_rate": num(args.accidental),
    }
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if args.kind == "tomo":
        cfg = ApparatusConfig(hwp1_angle=BALANCED_HWP1, hwp2_angle=BALANCED_HWP2, phi13=phi13, **base)
        spec = ScanSpec(phi13, tuple(np.radians(degs)), seed=seed)
        points = tomography_scan(spec, cfg)
        params["fit"] = bool(args.fit)
        buf.write("# manifest: " + json.dumps(manifest("scan", params, seed), ensure_ascii=False) + "\n")
        cols = ("re_rho21", "im_rho21", "re_rho32", "im_rho32")
        w.writerow(["phi12_deg", *cols])
        for deg, pt in zip(degs, points):
            w.writerow([fmt(deg)] + [fmt(pt.moments.channel(c)) for c in cols])
        if args.fit:
            fit = fit_phase_scan((pt.phi12, pt.moments) for pt in points)
            for c in cols:
                ch = fit.channels[c]
                buf.write(
                    f"# fit {c}: amplitude={fmt(ch.amplitude)} offset_deg={fmt(_deg(ch.offset))} "
                    f"baseline={fmt(ch.baseline)} residual={fmt(ch.residual)}\n"
                )
    else:
        set_state = protocol_state(args.set)
        params["set_state"] = args.set.ascii_name
        params["variable"] = args.variable
        if args.variable == "phi12":
            cfg = ApparatusConfig(hwp1_angle=BALANCED_HWP1, hwp2_angle=BALANCED_HWP2, phi13=phi13, **base)
        else:
            cfg = ApparatusConfig(hwp1_angle=0.0, phi13=phi13, **base)
        spec = ScanSpec(phi13, tuple(np.radians(degs)), seed=seed, variable=args.variable)
        scan = orthogonality_scan(set_state, spec, cfg)
        (f1, f2) = scan.settings
        params["filters_deg"] = [num(_deg(a)) for a in (f1.chi, f1.theta, f2.chi, f2.theta)]
        buf.write("# manifest: " + json.dumps(manifest("scan", params, seed), ensure_ascii=False) + "\n")
        w.writerow([f"{args.variable}_deg", "counts"])
        for deg, c in zip(degs, scan.counts):
            w.writerow([fmt(deg), fmt(c)])
        buf.write(
            f"# visibility: {fmt(scan.visibility)} minimum_at_deg: "
            f"{fmt(_deg(scan.minimum_at))}\n"
        )
    write_output(buf.getvalue(), args.output)
    return EXIT_OK


def reference_checks() -> list[tuple[str, float, float, float]]:
    """(name, observed, target, tolerance) for every regression check."""
    rho = DensityMatrix3.from_array(MEASURED_BETA2_RHO, physical=False)
    eig = eigendecompose(rho)
    beta2 = protocol_state(ProtocolStateId.BETA2)
    checks = [
        (f"eigenvalue_{k + 1}", float(eig.eigenvalues[k]), REPORTED_EIGENVALUES[k], PRINT_TOLERANCE)
        for k in range(3)
    ]
    checks.append(("principal_weight", eig.principal_weight, REPORTED_PRINCIPAL_WEIGHT, PRINT_TOLERANCE))
    checks.append(("principal_fidelity", fidelity(eig.principal, beta2),
                   REPORTED_PRINCIPAL_FIDELITY, PRINT_TOLERANCE))
    cfg = config_for_state(beta2, overlap=MODEL_OVERLAP_BETA2, mean_events=math.inf)
    recs = simulate_counts(effective_density(cfg).data, expectation=True, mean_events=math.inf)
    mle = mle_reconstruct(recs)
    checks.append(("mle_fidelity_beta''", fidelity(mle.rho, beta2),
                   REPORTED_MLE_FIDELITIES[ProtocolStateId.BETA2], MLE_FIDELITY_TOLERANCE))
    return checks


def cmd_paper_check(args) -> int:
    lines = []
    ok = True
    for name, obs, target, tol in reference_checks():
        delta = obs - target
        passed = abs(delta) <= tol
        ok &= passed
        lines.append(
            f"{'PASS' if passed else 'FAIL'} {name}: observed={fmt(obs)} target={fmt(target)} "
            f"delta={fmt(delta)} tol={fmt(tol)}"
        )
    lam3 = REPORTED_EIGENVALUES[2]
    neg = eigendecompose(MEASURED_BETA2_RHO).eigenvalues[2] < 0
    ok &= bool(neg)
    lines.append(
        f"{'PASS' if neg else 'FAIL'} negative_eigenvalue: raw matrix is not a physical state "
        f"(reported {fmt(lam3)})"
    )
    mub = verify_mub()
    ok &= mub.ok
    lines.append(f"{'PASS' if mub.ok else 'FAIL'} mub: {len(mub.violations)} violations")
    lines.append("paper-check: " + ("PASS" if ok else "FAIL"))
    write_output("\n".join(lines) + "\n", None)
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="biphoton", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("state", help="amplitudes, Majorana pair and filter angles of a state")
    p.add_argument("id", nargs="?", type=parse_state_id, help="protocol state, e.g. beta''")
    p.add_argument("--c", type=parse_amplitudes, help="custom amplitudes c1,c2,c3 (complex literals)")
    p.set_defaults(func=cmd_state)

    p = sub.add_parser("mub", help="overlap table of the twelve protocol states")
    p.set_defaults(func=cmd_mub)

    p = sub.add_parser("tomo", help="simulate or load counts, reconstruct raw and MLE states")
    p.add_argument("id", nargs="?", type=parse_state_id)
    p.add_argument("--counts", help="CSV file with setting,count,weight")
    p.add_argument("--target", type=parse_state_id, help="state for fidelities when loading counts")
    p.add_argument("--events", type=parse_events, default=500.0, help="mean total events or 'inf'")
    p.add_argument("--seed", type=int)
    p.add_argument("--overlap", type=float, default=1.0)
    p.add_argument("--accidental", type=float, default=0.0)
    p.add_argument("--rank", type=int, choices=(1, 2, 3), default=1)
    p.add_argument("--save-counts", help="write the counts used to this CSV file")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_tomo)

    p = sub.add_parser("scan", help="phi12 scans as CSV")
    p.add_argument("kind", choices=("tomo", "orthogonality"))
    p.add_argument("--set", type=parse_state_id, default=ProtocolStateId.ALPHA3,
                   help="set state the filters are tuned to (orthogonality)")
    p.add_argument("--phi13", type=float, default=0.0, help="degrees")
    p.add_argument("--grid", type=parse_grid, default=(-180.0, 180.0, 10.0),
                   help="START:STOP:STEP in degrees, STOP excluded")
    p.add_argument("--variable", choices=("phi12", "hwp2"), default="phi12")
    p.add_argument("--events", type=parse_events, default=math.inf)
    p.add_argument("--seed", type=int)
    p.add_argument("--overlap", type=float, default=1.0)
    p.add_argument("--accidental", type=float, default=0.0)
    p.add_argument("--fit", action="store_true", help="append sinusoid fits (tomo)")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("paper-check", help="regression against the published measurement values")
    p.set_defaults(func=cmd_paper_check)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "state" and (args.id is None) == (args.c is None):
        parser.error("state: give exactly one of ID or --c")
    try:
        return args.func(args)
    except (InputError, FitError) as exc:
        print(f"biphoton: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BiphotonError, ValueError) as exc:
        print(f"biphoton: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
