"""Command-line front end: seeded experiments with CSV/JSON provenance.

Every experiment writes into its own run directory
`<outdir>/<command>-<UTCstamp>-seed<seed>/` holding the output files plus
a `manifest.json` recording the command, its argument list, the seed, the
git state, and the output names.  `rerun <manifest>` replays a recorded
run into a fresh directory; outputs reproduce byte for byte.

Exit codes: 0 success; 1 a numerical guard tripped (the diagnostic names
the guard); 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import subprocess
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .anticon import (
    AnticonThresholds,
    equilibration_curve,
    moment_statistics,
    ratio_r,
    write_equilibration_csv,
    write_moments_csv,
    write_ratio_csv,
)
from .core import (
    BitString,
    HamiltonianSpec,
    Kind,
    Rng,
    hamming_class_members,
    model_class,
    sample_coupling,
)
from .hamiltonian import moment
from .hardness import (
    anticoncentration_thresholds,
    extract_permanent_from_dynamics,
    gaussian_rescaling_tvd,
    interpolation_recovery_bound,
    interpolation_tvd,
    short_time_xi_bound,
    stockmeyer_error,
    truncation_error,
    worst_to_average_demo,
    xi_square_negligible,
)
from .permanent import permanent_ryser, submatrix_for_outcome
from .polyfit import SampleSet, berlekamp_welch_recover
from .trotter import CALIBRATED_PREFACTOR, gate_count_plan, trotter_operator_error

_MOMENT_SUB_TOL = 1e-9
_MOMENT_REL_TOL = 1e-8


def _utc_now() -> datetime:
    return datetime.now(timezone.utc)


def _new_run_dir(outdir: str, command: str, seed: int) -> Path:
    stamp = _utc_now().strftime("%Y%m%dT%H%M%S%fZ")
    path = Path(outdir) / f"{command}-{stamp}-seed{seed}"
    path.mkdir(parents=True, exist_ok=False)
    return path


def _git_describe() -> str:
    try:
        proc = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True,
            text=True,
            timeout=10,
        )
        if proc.returncode == 0:
            return proc.stdout.strip()
    except OSError:
        pass
    return "unknown"


def _strip_outdir(args: list[str]) -> list[str]:
    out = []
    skip = False
    for token in args:
        if skip:
            skip = False
            continue
        if token == "--outdir":
            skip = True
            continue
        if token.startswith("--outdir="):
            continue
        out.append(token)
    return out


def _write_manifest(
    run_dir: Path,
    command: str,
    args: list[str],
    seed: int,
    started_at: str,
    outputs: list[str],
) -> None:
    manifest = {
        "command": command,
        "args": args,
        "seed": seed,
        "git_describe": _git_describe(),
        "started_at": started_at,
        "outputs": outputs,
    }
    path = run_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _write_json(run_dir: Path, name: str, payload: dict) -> str:
    (run_dir / name).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return name


def _class_representative(n: int, m: int) -> BitString:
    sigma = tuple(1 if i < m else 0 for i in range(n))
    tau = tuple(0 if i < m else 1 for i in range(n))
    return BitString.from_halves(sigma, tau)


def _threads(ns: argparse.Namespace) -> int:
    if ns.threads is not None:
        return max(1, ns.threads)
    return os.cpu_count() or 1


# ------------------------------------------------------------------ handlers


def _cmd_moments_check(ns: argparse.Namespace, run_dir: Path) -> list[str]:
    kind = Kind(ns.model)
    n = ns.n
    worst: tuple[float, str] = (0.0, "")
    name = "moments_check.csv"
    with open(run_dir / name, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["draw", "m", "x_bits", "max_abs_sub_moment", "mth_rel_error"])
        for draw in range(ns.draws):
            J = sample_coupling(n, Rng(ns.seed).substream(draw))
            spec = HamiltonianSpec(kind, J)
            for m in range(1, n + 1):
                for x in hamming_class_members(n, m):
                    sub = max(
                        (abs(moment(spec, x, ell)) for ell in range(1, m)),
                        default=0.0,
                    )
                    truth = (
                        math.factorial(m)
                        / float(n) ** m
                        * permanent_ryser(submatrix_for_outcome(J, x))
                    )
                    diff = abs(moment(spec, x, m) - truth)
                    rel = diff / max(abs(truth), 1e-12)
                    bits = "".join(str(b) for b in x.bits)
                    writer.writerow(
                        [draw, m, bits, repr(float(sub)), repr(float(rel))]
                    )
                    if sub > worst[0]:
                        worst = (sub, f"sub-moment at draw {draw}, x {bits}")
                    if rel > _MOMENT_REL_TOL and diff > 1e-14:
                        raise RuntimeError(
                            f"moment identity guard: relative error {rel:.3e} at "
                            f"draw {draw}, m {m}, x {bits}"
                        )
    if worst[0] > _MOMENT_SUB_TOL:
        raise RuntimeError(
            f"moment identity guard: {worst[1]} leaked {worst[0]:.3e}"
        )
    print(f"all moment identities within tolerance over {ns.draws} draws")
    return [name]


def _cmd_equilibrate(ns: argparse.Namespace, run_dir: Path) -> list[str]:
    grid = np.linspace(0.0, ns.t_mult_max * math.log(ns.n), ns.points)
    rows = equilibration_curve(
        Kind(ns.model), ns.n, grid, ns.num_j, Rng(ns.seed), threads=_threads(ns)
    )
    write_equilibration_csv(run_dir / "equilibration.csv", ns.n, rows)
    return ["equilibration.csv"]


def _cmd_anticon(ns: argparse.Namespace, run_dir: Path) -> list[str]:
    kind = Kind(ns.model)
    t = ns.t_mult * math.log(ns.n)
    stats = moment_statistics(
        kind, ns.n, t, ns.num_j, Rng(ns.seed), threads=_threads(ns)
    )
    records = [record for record, _, _ in stats]
    thresholds = (
        AnticonThresholds.ising() if ns.ising_thresholds else AnticonThresholds()
    )
    cls = model_class(kind)
    r = ratio_r(records, thresholds, cls)
    write_moments_csv(run_dir / "moments.csv", stats, cls)
    write_ratio_csv(
        run_dir / "ratio.csv",
        [(ns.n, ns.t_mult, r, len(records), ns.num_j, ns.seed)],
    )
    print(f"r = {r!r} over {len(records)} outcomes")
    return ["moments.csv", "ratio.csv"]


def _cmd_extract_permanent(ns: argparse.Namespace, run_dir: Path) -> list[str]:
    kind = Kind(ns.model)
    n = ns.n
    m = ns.m if ns.m is not None else n
    K = ns.K if ns.K is not None else 2 * m + 6
    x = _class_representative(n, m)
    spec = HamiltonianSpec(kind, sample_coupling(n, Rng(ns.seed)))
    mode = "noisy-oracle" if ns.noise_delta > 0 else "exact-oracle"
    estimate, truth, bound = extract_permanent_from_dynamics(
        spec,
        x,
        ns.t0,
        ns.delta_window,
        K,
        mode=mode,
        noise_delta=ns.noise_delta,
        rng=Rng(ns.seed).substream(1),
    )
    nodes = np.linspace(
        ns.t0 * (1 - ns.delta_window), ns.t0 * (1 + ns.delta_window), K + 1
    )
    name = _write_json(
        run_dir,
        "extraction.json",
        {
            "inputs": {
                "model": kind.value,
                "n": n,
                "m": m,
                "x_bits": "".join(str(b) for b in x.bits),
                "t0": ns.t0,
                "delta_window": ns.delta_window,
                "K": K,
                "mode": mode,
                "noise_delta": ns.noise_delta,
            },
            "nodes": [float(v) for v in nodes],
            "estimate": float(estimate),
            "truth": float(truth),
            "bound": float(bound),
            "seed": ns.seed,
        },
    )
    print(f"estimate = {estimate!r}, truth = {truth!r}, bound = {bound!r}")
    return [name]


def _cmd_worst_to_average(ns: argparse.Namespace, run_dir: Path) -> list[str]:
    m = ns.m
    base = Rng(ns.seed)
    X = (base.substream(2).generator().uniform(0, 1, (m, m)) < 0.5).astype(float)
    estimate, truth = worst_to_average_demo(
        X, ns.noise_delta, base, delta_window=ns.delta_window
    )
    window = ns.delta_window if ns.delta_window is not None else (16.0 * m) ** -2
    bound = interpolation_recovery_bound(ns.noise_delta, window, m)
    name = _write_json(
        run_dir,
        "worst_to_average.json",
        {
            "inputs": {
                "m": m,
                "delta_window": window,
                "noise_delta": ns.noise_delta,
            },
            "X": [[int(v) for v in row] for row in X],
            "estimate": float(estimate),
            "truth": float(truth),
            "rounded": int(round(estimate)),
            "recovery_bound": float(bound),
            "interpolation_tvd_at_window": float(interpolation_tvd(window, m)),
            "seed": ns.seed,
        },
    )
    print(f"estimate = {estimate!r}, truth = {truth!r}, bound = {bound!r}")
    return [name]


def _cmd_trotter_plan(ns: argparse.Namespace, run_dir: Path) -> list[str]:
    t0 = ns.t0_mult * math.log(ns.n)
    gates = gate_count_plan(ns.n, t0, ns.eps, ns.prefactor)
    name = _write_json(
        run_dir,
        "plan.json",
        {
            "n": ns.n,
            "t0": t0,
            "eps_t": ns.eps,
            "prefactor": ns.prefactor,
            "gates": int(gates),
        },
    )
    print(f"gates = {gates} (~ {float(gates):.3e})")
    return [name]


def _cmd_trotter_error(ns: argparse.Namespace, run_dir: Path) -> list[str]:
    kind = Kind(ns.model)
    t = ns.t_mult * math.log(ns.n)
    spec = HamiltonianSpec(kind, sample_coupling(ns.n, Rng(ns.seed)))
    orders = [int(v) for v in ns.orders.split(",")]
    m_grid = [int(v) for v in ns.m_grid.split(",")]
    name = "trotter_error.csv"
    with open(run_dir / name, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "n", "t", "order", "M", "error"])
        for order in orders:
            for M in m_grid:
                err = trotter_operator_error(spec, t, M, order)
                writer.writerow(
                    [kind.value, ns.n, repr(float(t)), order, M, repr(float(err))]
                )
    return [name]


def _cmd_bw_demo(ns: argparse.Namespace, run_dir: Path) -> list[str]:
    d = ns.degree
    planted = ns.errors
    budget = ns.budget if ns.budget is not None else planted
    L = d + 1 + 2 * budget
    gen = Rng(ns.seed).generator()
    coefficients = [int(v) for v in gen.integers(-9, 10, size=d + 1)]
    nodes = list(range(1, L + 1))
    values = [sum(c * t**k for k, c in enumerate(coefficients)) for t in nodes]
    positions = [int(v) for v in gen.choice(L, size=planted, replace=False)]
    for pos in positions:
        values[pos] += int(gen.integers(1, 50)) * (1 if gen.uniform(0, 1) < 0.5 else -1)
    samples = SampleSet([float(v) for v in nodes], [float(v) for v in values])
    fit = berlekamp_welch_recover(samples, d, budget, exact=ns.exact)
    recovered = [float(fit.coefficient(k)) for k in range(d + 1)]
    match = all(abs(r - c) < 1e-6 for r, c in zip(recovered, coefficients))
    if not match:
        raise RuntimeError("recovery guard: decoded coefficients do not match plant")
    name = _write_json(
        run_dir,
        "bw.json",
        {
            "degree": d,
            "planted_errors": planted,
            "budget": budget,
            "exact": ns.exact,
            "sample_count": L,
            "corrupted_positions": sorted(positions),
            "planted_coefficients": coefficients,
            "recovered_coefficients": recovered,
            "match": match,
            "seed": ns.seed,
        },
    )
    print(f"recovered degree-{d} polynomial through {planted} corruptions")
    return [name]


def _cmd_bounds(ns: argparse.Namespace, run_dir: Path) -> list[str]:
    values = {
        "truncation_error": truncation_error(ns.normh, ns.t, ns.K),
        "short_time_xi_bound": short_time_xi_bound(ns.normh, ns.n, ns.t),
        "xi_square_negligible": xi_square_negligible(ns.c),
        "gaussian_rescaling_tvd": gaussian_rescaling_tvd(ns.t, ns.t0, ns.n),
        "stockmeyer_error_I": stockmeyer_error(
            "I", ns.nu, ns.gamma, ns.g, ns.n, ns.p_x
        ),
        "stockmeyer_error_II": stockmeyer_error(
            "II", ns.nu, ns.gamma, ns.g, ns.n, ns.p_x
        ),
        "anticoncentration_threshold_I": anticoncentration_thresholds("I", ns.n),
        "anticoncentration_threshold_II": anticoncentration_thresholds("II", ns.n),
        "interpolation_recovery_bound": interpolation_recovery_bound(
            ns.noise_delta, ns.delta_window, ns.degree
        ),
        "interpolation_tvd": interpolation_tvd(ns.delta_window, ns.n),
    }
    inputs = {
        key: getattr(ns, key)
        for key in (
            "normh", "t", "K", "n", "t0", "c", "nu", "gamma", "g", "p_x",
            "noise_delta", "delta_window", "degree",
        )
    }
    name = _write_json(run_dir, "bounds.json", {"inputs": inputs, "values": values})
    for key, value in values.items():
        print(f"{key} = {value!r}")
    return [name]


def _cmd_rerun(ns: argparse.Namespace) -> int:
    path = Path(ns.manifest)
    if path.is_dir():
        path = path / "manifest.json"
    if not path.is_file():
        print(f"usage error: no manifest at {path}", file=sys.stderr)
        return 2
    data = json.loads(path.read_text())
    argv = [data["command"], *data["args"], "--outdir", ns.outdir]
    return main(argv)


# --------------------------------------------------------------- the parser


def _add_common(sub: argparse.ArgumentParser, threads: bool = False) -> None:
    sub.add_argument("--outdir", default="runs", help="parent directory for run dirs")
    sub.add_argument("--seed", type=int, default=0, help="master seed")
    if threads:
        sub.add_argument(
            "--threads",
            type=int,
            default=None,
            help="worker cap for J draws (default: available parallelism)",
        )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spindyn",
        description="Seeded spin-dynamics experiments with CSV/JSON provenance.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("moments-check", help="moment-permanent identity sweep")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--model", required=True, choices=[k.value for k in Kind])
    p.add_argument("--draws", type=int, default=20)
    _add_common(p)
    p.set_defaults(handler=_cmd_moments_check)

    p = subs.add_parser("equilibrate", help="output-probability equilibration curve")
    p.add_argument("--model", default="H3", choices=[k.value for k in Kind])
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--num-j", type=int, default=256)
    p.add_argument("--points", type=int, default=33)
    p.add_argument("--t-mult-max", type=float, default=8.0,
                   help="grid tops out at this multiple of ln n")
    _add_common(p, threads=True)
    p.set_defaults(handler=_cmd_equilibrate)

    p = subs.add_parser("anticon", help="moment sweep over X_{n/2} plus the ratio r")
    p.add_argument("--model", default="H3", choices=[k.value for k in Kind])
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--t-mult", type=float, default=4.0, help="t = this * ln n")
    p.add_argument("--num-j", type=int, default=1024)
    p.add_argument("--ising-thresholds", action="store_true",
                   help="use the Lambda=16 Ising thresholds")
    _add_common(p, threads=True)
    p.set_defaults(handler=_cmd_anticon)

    p = subs.add_parser("extract-permanent", help="permanent from sampled dynamics")
    p.add_argument("--model", default="H1", choices=[k.value for k in Kind])
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--m", type=int, default=None, help="Hamming class (default n)")
    p.add_argument("--t0", type=float, default=0.1)
    p.add_argument("--delta-window", type=float, default=0.5)
    p.add_argument("--K", type=int, default=None, help="fit degree (default 2m+6)")
    p.add_argument("--noise-delta", type=float, default=0.0)
    _add_common(p)
    p.set_defaults(handler=_cmd_extract_permanent)

    p = subs.add_parser("worst-to-average", help="0/1 permanent via the Gaussian path")
    p.add_argument("--m", type=int, default=4)
    p.add_argument("--delta-window", type=float, default=None,
                   help="interpolation window (default: the proof's (16m)^-2)")
    p.add_argument("--noise-delta", type=float, default=1e-12)
    _add_common(p)
    p.set_defaults(handler=_cmd_worst_to_average)

    p = subs.add_parser("trotter-plan", help="gate budget for a target error")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--t0-mult", type=float, required=True, help="t0 = this * ln n")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--prefactor", type=float, default=CALIBRATED_PREFACTOR)
    _add_common(p)
    p.set_defaults(handler=_cmd_trotter_plan)

    p = subs.add_parser("trotter-error", help="operator-error scaling sweep")
    p.add_argument("--model", default="H3", choices=[k.value for k in Kind])
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--t-mult", type=float, default=1.0, help="t = this * ln n")
    p.add_argument("--orders", default="1,2")
    p.add_argument("--m-grid", default="8,16,32,64")
    _add_common(p)
    p.set_defaults(handler=_cmd_trotter_error)

    p = subs.add_parser("bw-demo", help="plant-and-recover polynomial decoding")
    p.add_argument("--degree", type=int, default=6)
    p.add_argument("--errors", type=int, default=3, help="corruptions planted")
    p.add_argument("--budget", type=int, default=None,
                   help="correction budget e_max (default: planted count)")
    p.add_argument("--exact", action="store_true", help="exact rational mode")
    _add_common(p)
    p.set_defaults(handler=_cmd_bw_demo)

    p = subs.add_parser("bounds", help="evaluate every analytic calculator")
    p.add_argument("--normh", type=float, default=1.0)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--K", type=int, default=8)
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--t0", type=float, default=1.0)
    p.add_argument("--c", type=float, default=0.6)
    p.add_argument("--nu", type=float, default=0.1)
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--g", type=float, default=0.0)
    p.add_argument("--p-x", type=float, default=0.0)
    p.add_argument("--noise-delta", type=float, default=1e-3)
    p.add_argument("--delta-window", type=float, default=0.5)
    p.add_argument("--degree", type=int, default=8)
    _add_common(p)
    p.set_defaults(handler=_cmd_bounds)

    p = subs.add_parser("rerun", help="replay a recorded run from its manifest")
    p.add_argument("manifest", help="manifest.json or its run directory")
    p.add_argument("--outdir", default="runs")
    p.set_defaults(handler=None)

    return parser


def main(argv: list[str] | None = None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    argv = list(argv)
    parser = _build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 0
    try:
        if ns.command == "rerun":
            return _cmd_rerun(ns)
        run_dir = _new_run_dir(ns.outdir, ns.command, ns.seed)
        started_at = _utc_now().isoformat()
        outputs = ns.handler(ns, run_dir)
        _write_manifest(
            run_dir, ns.command, _strip_outdir(argv[1:]), ns.seed, started_at, outputs
        )
        print(f"run-dir: {run_dir}")
        return 0
    except np.linalg.LinAlgError as exc:
        print(f"numerical guard [LinAlgError]: {exc}", file=sys.stderr)
        return 1
    except RuntimeError as exc:
        print(f"numerical guard [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
