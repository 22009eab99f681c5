"""Command-line front-end.

Subcommands ingest model files, run the analytic / simulation / sampling
workflows, and emit self-describing CSV tables: the first row is a metadata
record (seed, run lengths, tolerances), the second the column header, and
floats carry 17 significant digits so identical runs produce byte-identical
files.  Data goes to files only; the diagnostic stream gets messages.

Exit codes: 0 success, 1 validation or analysis error, 2 I/O or argument
error.
"""

from __future__ import annotations

import json
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__, analytic, linalg, sampling
from .simulate import SimConfig, simulate as run_simulation
from .errors import (
    ConfigError,
    ConvergenceError,
    MgfRadiusError,
    ModelValidationError,
    NonErgodicError,
    SingularMatrixError,
    TruncationError,
    UnstableModelError,
)
from .model import ShsModel, mm11_abandonment, model_from_dict, model_to_dict, preemptive_line, validate
from .sampling import SamplingNetwork


class CliArgumentError(Exception):
    """Bad command-line arguments (exit code 2)."""


@dataclass(frozen=True)
class RunManifest:
    """Record of one invocation; re-running ``argv`` reproduces the outputs
    bit-identically."""

    command: str
    argv: list[str]
    inputs: list[str]
    parameters: dict
    seed: int | None
    output_dir: str
    tool_version: str


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def _write_csv(path: Path, metadata: dict, header: list[str], rows: list[list]) -> None:
    lines = ["metadata," + ",".join(f"{k}={_fmt(v)}" for k, v in metadata.items())]
    lines.append(",".join(header))
    lines.extend(",".join(_fmt(cell) for cell in row) for row in rows)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {path}", file=sys.stderr)


def _write_manifest(path: Path, manifest: RunManifest) -> None:
    path.write_text(
        json.dumps(asdict(manifest), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _base_metadata(command: str, **extra) -> dict:
    meta = {"tool": "aoikit", "version": __version__, "command": command}
    meta.update(extra)
    meta["solve_rtol"] = linalg.SOLVE_RTOL
    meta["pivot_rtol"] = linalg.PIVOT_RTOL
    return meta


# --- model / network files -------------------------------------------------


def _network_from_dict(doc: dict) -> SamplingNetwork:
    unknown = set(doc) - {"hops"}
    if unknown:
        raise ValueError(f"network: unknown key(s) {sorted(unknown)}")
    hops_doc = doc.get("hops")
    if not isinstance(hops_doc, list) or not hops_doc:
        raise ValueError("network: 'hops' must be a non-empty array")
    hops = []
    for i, item in enumerate(hops_doc):
        where = f"hop {i}"
        if not isinstance(item, dict) or "family" not in item:
            raise ValueError(f"{where}: must be an object with a 'family' key")
        family = item["family"]
        if family == "exponential":
            keys = {"family", "rate"}
            build = lambda it: sampling.Exponential(rate=float(it["rate"]))
        elif family == "uniform":
            keys = {"family", "b"}
            build = lambda it: sampling.Uniform(high=float(it["b"]))
        elif family == "gamma":
            keys = {"family", "shape", "scale"}
            build = lambda it: sampling.Gamma(shape=float(it["shape"]), scale=float(it["scale"]))
        elif family == "deterministic":
            raise ValueError(
                f"{where}: deterministic inter-update times are not supported; "
                "sampling requires i.i.d. continuous inter-update times"
            )
        else:
            raise ValueError(f"{where}: unknown family '{family}'")
        unknown = set(item) - keys
        if unknown:
            raise ValueError(f"{where}: unknown key(s) {sorted(unknown)}")
        missing = keys - set(item)
        if missing:
            raise ValueError(f"{where}: missing key(s) {sorted(missing)}")
        hops.append(build(item))
    return SamplingNetwork(hops=tuple(hops))


def _network_to_dict(network: SamplingNetwork) -> dict:
    hops = []
    for hop in network.hops:
        if isinstance(hop, sampling.Exponential):
            hops.append({"family": "exponential", "rate": hop.rate})
        elif isinstance(hop, sampling.Uniform):
            hops.append({"family": "uniform", "b": hop.high})
        else:
            hops.append({"family": "gamma", "shape": hop.shape, "scale": hop.scale})
    return {"hops": hops}


def load_model(path: str | Path) -> ShsModel | SamplingNetwork:
    """Parse a model or sampling-network file (strict about unknown keys)."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(
            f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    if isinstance(doc, dict) and "hops" in doc:
        return _network_from_dict(doc)
    model = model_from_dict(doc)
    violations = validate(model)
    if violations:
        raise ModelValidationError(violations)
    return model


def _require_shs(obj, path) -> ShsModel:
    if not isinstance(obj, ShsModel):
        raise CliArgumentError(f"{path} holds a sampling network; this command needs a model")
    return obj


def _require_network(obj, path) -> SamplingNetwork:
    if not isinstance(obj, SamplingNetwork):
        raise CliArgumentError(f"{path} holds a model; this command needs a sampling network")
    return obj


def _float_list(text: str, flag: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part != ""]
    except ValueError as exc:
        raise CliArgumentError(f"{flag} expects a comma-separated list of numbers") from exc


def _int_list(text: str, flag: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part != ""]
    except ValueError as exc:
        raise CliArgumentError(f"{flag} expects a comma-separated list of integers") from exc


# --- subcommands -------------------------------------------------------------


def _cmd_builtin(args, argv) -> int:
    if args.kind == "mm11":
        if len(args.params) != 3:
            raise CliArgumentError("builtin mm11 expects three rates: lambda mu alpha")
        lam, mu, alpha = (float(p) for p in args.params)
        model = mm11_abandonment(lam, mu, alpha)
    else:
        if len(args.params) != 1:
            raise CliArgumentError("builtin line expects one comma-separated rate list")
        model = preemptive_line(_float_list(args.params[0], "line rates"))
    out = Path(args.out) if args.out else Path(f"{args.kind}.json")
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(model_to_dict(model), indent=2) + "\n", encoding="utf-8")
    print(f"wrote {out}", file=sys.stderr)
    manifest = RunManifest(
        command="builtin", argv=argv, inputs=[], parameters={"kind": args.kind, "params": args.params},
        seed=None, output_dir=str(out.parent), tool_version=__version__,
    )
    _write_manifest(out.with_suffix(out.suffix + ".manifest.json"), manifest)
    return 0


def _cmd_analyze(args, argv) -> int:
    model = _require_shs(load_model(args.model), args.model)
    s_values = _float_list(args.mgf, "--mgf") if args.mgf else []
    pi = linalg.stationary_distribution(model)
    moments = analytic.stationary_moments(model, args.moments)
    rows: list[list] = []
    for q, p in enumerate(pi):
        rows.append(["occupancy", q, "", p, "probability"])
    for res in moments:
        for j in range(model.age_dim):
            rows.append(["moment", j + 1, res.order, res.aggregate[j], f"time^{res.order}"])
    radius = analytic.mgf_radius(model)
    for s in s_values:
        evaluation = analytic.stationary_mgf(model, s)
        for j in range(model.age_dim):
            rows.append(["mgf", j + 1, s, evaluation.aggregate[j], "dimensionless"])
    rows.append(["mgf_radius", "", "", radius, "1/time"])
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    meta = _base_metadata("analyze", model=args.model, moments=args.moments,
                          mgf=";".join(_fmt(s) for s in s_values))
    _write_csv(out_dir / "analyze.csv", meta,
               ["quantity", "component", "parameter", "value", "units"], rows)
    _write_manifest(out_dir / "manifest.json", RunManifest(
        command="analyze", argv=argv, inputs=[args.model],
        parameters={"moments": args.moments, "mgf": s_values},
        seed=None, output_dir=str(out_dir), tool_version=__version__,
    ))
    return 0


def _cmd_simulate(args, argv) -> int:
    model = _require_shs(load_model(args.model), args.model)
    orders = tuple(_int_list(args.orders, "--orders"))
    if args.mgf == "auto":
        radius = analytic.mgf_radius(model)
        s_values = (0.25 * radius, 0.5 * radius)
    else:
        s_values = tuple(_float_list(args.mgf, "--mgf"))
    config = SimConfig(
        seed=args.seed, t_end=args.t_end, warmup=args.warmup,
        orders=orders, s_values=s_values, replications=args.reps,
    )
    estimates = run_simulation(model, config)
    pi = linalg.stationary_distribution(model)
    moments = analytic.stationary_moments(model, max(orders)) if orders else []
    by_order = {res.order: res.aggregate for res in moments}
    mgf_values = {s: analytic.stationary_mgf(model, s).aggregate for s in s_values}

    rows: list[list] = []
    for q in range(model.num_states):
        rows.append(["occupancy", q, "", estimates.occupancy[q], estimates.occupancy_se[q],
                     pi[q], "probability"])
    for k, m in enumerate(orders):
        for j in range(model.age_dim):
            rows.append(["moment", j + 1, m, estimates.moment_avg[k, j],
                         estimates.moment_se[k, j], by_order[m][j], f"time^{m}"])
    for k, s in enumerate(s_values):
        for j in range(model.age_dim):
            rows.append(["mgf", j + 1, s, estimates.mgf_avg[k, j],
                         estimates.mgf_se[k, j], mgf_values[s][j], "dimensionless"])
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    meta = _base_metadata("simulate", model=args.model, seed=args.seed, t_end=args.t_end,
                          warmup=config.resolved_warmup, replications=args.reps)
    _write_csv(out_dir / "simulate.csv", meta,
               ["quantity", "component", "parameter", "simulated", "stderr", "analytic", "units"],
               rows)
    _write_manifest(out_dir / "manifest.json", RunManifest(
        command="simulate", argv=argv, inputs=[args.model],
        parameters={"t_end": args.t_end, "warmup": config.resolved_warmup,
                    "orders": list(orders), "mgf": list(s_values), "reps": args.reps},
        seed=args.seed, output_dir=str(out_dir), tool_version=__version__,
    ))
    return 0


def _cmd_transient(args, argv) -> int:
    model = _require_shs(load_model(args.model), args.model)
    orders = tuple(_int_list(args.orders, "--orders")) if args.orders else ()
    s_values = tuple(_float_list(args.mgf, "--mgf")) if args.mgf else ()
    x0 = np.asarray(_float_list(args.x0, "--x0"), dtype=float) if args.x0 else None
    trajectory = analytic.transient(
        model, t_end=args.t_end, x0=x0, orders=orders, s_values=s_values
    )
    times = trajectory.times
    stride = max(1, (len(times) - 1) // args.max_rows) if args.max_rows else 1
    index = list(range(0, len(times), stride))
    if index[-1] != len(times) - 1:
        index.append(len(times) - 1)

    header = ["time"]
    header += [f"pi_state{q}" for q in range(model.num_states)]
    for m in orders:
        header += [
            f"moment{m}_state{q}_comp{j + 1}"
            for q in range(model.num_states) for j in range(model.age_dim)
        ]
    for s in s_values:
        header += [
            f"mgf_s{_fmt(s)}_state{q}_comp{j + 1}"
            for q in range(model.num_states) for j in range(model.age_dim)
        ]
    rows = []
    for i in index:
        row: list = [times[i]]
        row.extend(trajectory.pi_t[i])
        for m in orders:
            row.extend(trajectory.moments_t[m][i].ravel())
        for s in s_values:
            row.extend(trajectory.mgf_t[s][i].ravel())
        rows.append(row)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    meta = _base_metadata("transient", model=args.model, t_end=args.t_end,
                          orders=";".join(str(m) for m in orders),
                          mgf=";".join(_fmt(s) for s in s_values))
    _write_csv(out_dir / "transient.csv", meta, header, rows)
    _write_manifest(out_dir / "manifest.json", RunManifest(
        command="transient", argv=argv, inputs=[args.model],
        parameters={"t_end": args.t_end, "orders": list(orders), "mgf": list(s_values),
                    "x0": args.x0, "max_rows": args.max_rows},
        seed=None, output_dir=str(out_dir), tool_version=__version__,
    ))
    return 0


def _cmd_sample(args, argv) -> int:
    network = _require_network(load_model(args.network), args.network)
    k = args.node
    comparison = sampling.gaussian_comparison(network, k)
    mean, var = sampling.node_age_stats(network, k)
    grid = comparison.convolution.grid
    rows = [
        [g, cv, gv]
        for g, cv, gv in zip(grid, comparison.convolution.values, comparison.gaussian.values)
    ]
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    meta = _base_metadata("sample", network=args.network, node=k, mean=mean, variance=var,
                          gaussian_l1=comparison.l1_distance)
    _write_csv(out_dir / "sample_density.csv", meta,
               ["age", "convolution_density", "gaussian_density"], rows)

    seed = args.seed
    if args.simulate is not None:
        edges = np.linspace(0.0, grid[-1], args.bins + 1)
        result = sampling.simulate_sampling_line(
            network, t_end=args.simulate, seed=seed, replications=args.reps,
            bin_edges=edges,
        )
        conv_mass = sampling.density_bin_masses(comparison.convolution, edges)
        hist = result.histograms[k - 1]
        hist_rows = [
            [edges[i], edges[i + 1], hist.masses[i], conv_mass[i]]
            for i in range(len(edges) - 1)
        ]
        l1 = float(np.abs(hist.masses - conv_mass).sum())
        meta_h = _base_metadata("sample", network=args.network, node=k, seed=seed,
                                t_end=args.simulate, replications=args.reps,
                                hist_l1_vs_convolution=l1)
        _write_csv(out_dir / "sample_hist.csv", meta_h,
                   ["bin_lo", "bin_hi", "empirical_mass", "convolution_mass"], hist_rows)
        stat_rows = []
        for i in range(len(network)):
            a_mean, a_var = sampling.node_age_stats(network, i + 1)
            stat_rows.append([
                i + 1, a_mean, result.node_means[i], result.node_mean_se[i],
                a_var, result.node_vars[i], result.node_var_se[i],
            ])
        _write_csv(out_dir / "sample_stats.csv",
                   _base_metadata("sample", network=args.network, seed=seed,
                                  t_end=args.simulate, replications=args.reps),
                   ["node", "analytic_mean", "simulated_mean", "mean_stderr",
                    "analytic_variance", "simulated_variance", "variance_stderr"],
                   stat_rows)
    _write_manifest(out_dir / "manifest.json", RunManifest(
        command="sample", argv=argv, inputs=[args.network],
        parameters={"node": k, "simulate": args.simulate, "reps": args.reps,
                    "bins": args.bins},
        seed=seed, output_dir=str(out_dir), tool_version=__version__,
    ))
    return 0


def _cmd_rerun(args, argv) -> int:
    doc = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
    recorded = doc.get("argv")
    if not isinstance(recorded, list):
        raise CliArgumentError(f"{args.manifest} does not record an argv list")
    return execute([str(a) for a in recorded])


def _build_parser():
    import argparse

    parser = argparse.ArgumentParser(
        prog="aoikit",
        description="Age-of-information moments, MGFs, and simulators for "
                    "finite-state Markov network models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("builtin", help="write a canonical model file")
    p.add_argument("kind", choices=["mm11", "line"])
    p.add_argument("params", nargs="+", help="mm11: lambda mu alpha; line: mu0,mu1,...")
    p.add_argument("--out", default=None, help="output file (default <kind>.json)")
    p.set_defaults(func=_cmd_builtin)

    p = sub.add_parser("analyze", help="stationary moments and MGF")
    p.add_argument("model")
    p.add_argument("--moments", type=int, default=2, metavar="M")
    p.add_argument("--mgf", default=None, metavar="S1,S2,...")
    p.add_argument("--out", default=".")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("simulate", help="Monte Carlo estimates next to analytic values")
    p.add_argument("model")
    p.add_argument("--t-end", dest="t_end", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--reps", type=int, default=16)
    p.add_argument("--warmup", type=float, default=None)
    p.add_argument("--orders", default="1,2")
    p.add_argument("--mgf", default="auto",
                   help="comma-separated s values, or 'auto' for 0.25*s0,0.5*s0")
    p.add_argument("--out", default=".")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("transient", help="trajectories of the linear ODE system")
    p.add_argument("model")
    p.add_argument("--t-end", dest="t_end", type=float, required=True)
    p.add_argument("--orders", default="1")
    p.add_argument("--mgf", default=None)
    p.add_argument("--x0", default=None, help="initial ages, comma-separated")
    p.add_argument("--max-rows", dest="max_rows", type=int, default=2000,
                   help="thin the time grid to about this many CSV rows (0 = all)")
    p.add_argument("--out", default=".")
    p.set_defaults(func=_cmd_transient)

    p = sub.add_parser("sample", help="sampling-network densities and simulation")
    p.add_argument("network")
    p.add_argument("--node", type=int, required=True)
    p.add_argument("--simulate", type=float, default=None, metavar="T_END")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reps", type=int, default=16)
    p.add_argument("--bins", type=int, default=128)
    p.add_argument("--out", default=".")
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("rerun", help="re-execute a recorded manifest")
    p.add_argument("manifest")
    p.set_defaults(func=_cmd_rerun)
    return parser


def execute(argv: list[str]) -> int:
    """Run one CLI invocation; returns the exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    try:
        return args.func(args, list(argv))
    except CliArgumentError as exc:
        print(f"argument error: {exc}", file=sys.stderr)
        return 2
    except (ModelValidationError, NonErgodicError, UnstableModelError, MgfRadiusError,
            TruncationError, ConfigError, ConvergenceError, SingularMatrixError,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(execute(sys.argv[1:]))
