"""Command-line interface and experiment orchestration.

Subcommands mirror the library modules: circuit gen/validate, lightcone
report/dump, sim eval/calibrate, ntk empirical/analytic, train, gp
posterior/check, stats init-ensemble/cumulants/normality/janson, plus `run`
(config-file driven, writes a manifest) and `reproduce` (acceptance suites).
All randomness is derived from the --seed flag; identical configs and seeds
produce identical output files.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .acceptance import CRITERIA, run_all, run_criterion
from .circuits import (
    FAMILIES,
    ParamVector,
    append_mean_zero_layer,
    builtin_family,
    circuit_to_json,
    load_circuit,
    load_dataset_csv,
    probe_inputs,
    save_circuit,
    synthetic_dataset,
    validate_circuit,
)
from .errors import CapacityError, ConditioningError, ConstructionError, NumericFault
from .gradients import NTKMatrix, analytic_ntk_mc, empirical_ntk
from .lightcone import build_lightcones, cardinality_report, prune
from .linearized import gp_empirical_check, gp_posterior
from .localsim import Simulator, calibrate_normalization, eval_model, sample_model
from .rng import stream
from .stats import (
    build_dependency_graph,
    cumulants,
    janson_diagnostic,
    load_ensemble_csv,
    normality_tests,
    sample_init_ensemble,
    save_ensemble_csv,
)
from .training import TrainConfig, train_flow, train_gd, train_noisy_gd


def _write_matrix_csv(path, M: np.ndarray, header: list[str] | None = None) -> None:
    with open(path, "w") as fh:
        if header:
            fh.write(",".join(header) + "\n")
        for row in np.atleast_2d(M):
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def _read_matrix_csv(path) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                rows.append([float(v) for v in line.split(",")])
            except ValueError:
                continue  # header line
    return np.array(rows)


def _resolve_theta(spec, arg: str) -> ParamVector:
    if arg.startswith("seed:"):
        return ParamVector.uniform(spec, stream(int(arg[5:]), "cli-theta"))
    values = _read_matrix_csv(arg).ravel()
    return ParamVector(values, spec.param_periods)


def _load_inputs(path) -> np.ndarray:
    return np.atleast_2d(_read_matrix_csv(path))


def _print_json(obj) -> None:
    json.dump(obj, sys.stdout, indent=1, default=_jsonable)
    sys.stdout.write("\n")


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, frozenset):
        return sorted(v)
    raise TypeError(f"not serializable: {type(v)}")


# ---------------------------------------------------------------------------
# Subcommand handlers


def _cmd_circuit(args) -> int:
    if args.action == "gen":
        spec = builtin_family(args.family, args.m, args.L, seed=args.seed, input_dim=args.input_dim)
        if args.mean_zero_layer:
            spec = append_mean_zero_layer(spec)
        save_circuit(spec, args.out)
        print(f"wrote {args.out}")
        return 0
    spec = load_circuit(args.circuit)
    violations = validate_circuit(spec)
    _print_json({"valid": not violations, "violations": violations})
    return 0 if not violations else 1


def _cmd_lightcone(args) -> int:
    spec = load_circuit(args.circuit)
    lci = build_lightcones(spec)
    if args.action == "report":
        _print_json(cardinality_report(lci, spec.num_layers))
        return 0
    pruned = prune(spec, args.qubit, lci)
    doc = {
        "target_qubit": pruned.target_qubit,
        "local_qubits": list(pruned.local_qubits),
        "retained_params": list(pruned.retained_params),
        "local_dim": pruned.local_dim,
        "circuit": circuit_to_json(spec),
    }
    out = Path(args.out) if args.out else None
    if out:
        out.write_text(json.dumps(doc, indent=1))
        print(f"wrote {out}")
    else:
        _print_json(doc)
    return 0


def _cmd_sim(args) -> int:
    spec = load_circuit(args.circuit)
    lci = build_lightcones(spec)
    if args.action == "eval":
        theta = _resolve_theta(spec, args.theta)
        x = np.array([float(v) for v in args.x.split(",")]) if args.x else np.zeros(spec.input_dim)
        if args.shots:
            est = sample_model(spec, lci, theta, x, args.shots, args.seed)
            _print_json({"estimate": est, "shots": args.shots})
        else:
            mv = eval_model(spec, lci, theta, x)
            _print_json({"value": mv.value, "locals": mv.locals, "normalization": mv.normalization})
        return 0
    inputs = _load_inputs(args.inputs) if args.inputs else probe_inputs(spec.input_dim, 4)
    cal = calibrate_normalization(spec, lci, inputs, args.samples, args.seed)
    _write_matrix_csv(args.out, cal.covariance)
    _print_json(
        {
            "mean": cal.mean,
            "mean_diag_covariance": cal.mean_diag_covariance,
            "rescale_factor": cal.rescale_factor,
            "suggested_normalization": cal.suggested_normalization,
            "max_abs_local_zscore": float(np.max(np.abs(cal.local_zscores))),
            "covariance_csv": str(args.out),
        }
    )
    return 0


def _cmd_ntk(args) -> int:
    spec = load_circuit(args.circuit)
    lci = build_lightcones(spec)
    inputs = _load_inputs(args.inputs)
    if args.action == "empirical":
        theta = _resolve_theta(spec, args.theta)
        ntk = empirical_ntk(spec, lci, theta, inputs, nk=args.nk)
    else:
        ntk = analytic_ntk_mc(spec, lci, inputs, args.samples, args.seed)
    _write_matrix_csv(args.out, ntk.entries)
    _print_json(
        {
            "kind": ntk.kind,
            "n_k": ntk.n_k,
            "lambda_min": ntk.lambda_min,
            "lambda_max": ntk.lambda_max,
            "entries_csv": str(args.out),
        }
    )
    return 0


def _cmd_train(args) -> int:
    spec = load_circuit(args.circuit)
    lci = build_lightcones(spec)
    ds = load_dataset_csv(args.data)
    noise = "synthetic"
    shots_fixed = None
    if args.shots_schedule:
        noise = "shots"
        if args.shots_schedule.startswith("fixed:"):
            shots_fixed = int(args.shots_schedule.split(":", 1)[1])
    if args.noise == "synthetic":
        noise = "synthetic"
    cfg = TrainConfig(
        mode=args.mode,
        dataset=ds,
        eta0=args.eta0,
        steps=args.steps,
        t_final=args.t_final,
        h=args.h,
        noise=noise,
        noise_scale=args.noise_scale,
        variance_rule=args.variance_rule,
        shots_fixed=shots_fixed,
        delta=args.delta,
        seed=args.seed,
        n_k=args.nk,
        track_diagnostics=not args.no_diagnostics,
    )
    theta0 = (
        _resolve_theta(spec, args.theta0)
        if args.theta0
        else ParamVector.uniform(spec, stream(args.seed, "train-init"))
    )
    runner = {"flow": train_flow, "gd": train_gd, "noisy-gd": train_noisy_gd}[args.mode]
    trace = runner(spec, lci, theta0, cfg)
    trace.to_csv(args.out)
    _print_json(
        {
            "final_loss": float(trace.loss[-1]),
            "steps": trace.steps,
            "trace_csv": str(args.out),
            "lambda_min": trace.meta["lambda_min"],
            "lambda_max": trace.meta["lambda_max"],
        }
    )
    return 0


def _cmd_gp(args) -> int:
    if args.action == "posterior":
        K = _read_matrix_csv(args.kernel)
        C0 = _read_matrix_csv(args.cov0)
        Y = _read_matrix_csv(args.labels).ravel()
        kind = "discrete" if args.discrete else "continuous"
        kbar = NTKMatrix(
            entries=K, inputs=np.zeros((K.shape[0], 0)), kind="analytic-mc", n_k=1.0,
            lambda_min=0.0, lambda_max=0.0, train_count=Y.size,
        )
        post = gp_posterior(kbar, C0, Y, args.eta0, args.t, kind)
        _write_matrix_csv(args.out, np.vstack([post.mean[None, :], post.cov]))
        _print_json(
            {
                "t": args.t,
                "kind": kind,
                "mean": post.mean,
                "min_cov_eigenvalue": post.min_cov_eigenvalue,
                "out_csv": str(args.out),
            }
        )
        return 0
    spec = load_circuit(args.circuit)
    lci = build_lightcones(spec)
    ds = load_dataset_csv(args.data)
    probes = probe_inputs(spec.input_dim, args.probes)
    cfg = TrainConfig(mode="gd", dataset=ds, eta0=args.eta0, steps=args.t, seed=args.seed)
    report = gp_empirical_check(spec, lci, cfg, probes, args.seeds, args.t)
    _print_json(
        {
            "num_seeds": report.num_seeds,
            "t": report.t,
            "n_k": report.n_k,
            "mu": report.mu,
            "emp_mean": report.emp_mean,
            "zscores": report.zscores,
            "init_zscores": report.init_zscores,
            "max_abs_z_train": report.max_abs_z_train,
            "max_cov_gap": report.max_cov_gap,
            "mardia": report.mardia,
        }
    )
    return 0


def _cmd_stats(args) -> int:
    if args.action == "init-ensemble":
        spec = load_circuit(args.circuit)
        lci = build_lightcones(spec)
        probes = (
            _load_inputs(args.inputs)
            if args.inputs
            else (probe_inputs(spec.input_dim, args.probes) if spec.input_dim else np.zeros((1, 0)))
        )
        ens = sample_init_ensemble(spec, lci, probes, args.samples, args.seed, sampler=args.sampler)
        save_ensemble_csv(ens, args.out)
        print(f"wrote {args.out}")
        return 0
    if args.action == "cumulants":
        ens = load_ensemble_csv(args.ensemble)
        orders = tuple(int(o) for o in args.orders.split(","))
        c = cumulants(ens.values, orders=orders)
        _print_json(
            {
                "orders": list(orders),
                "estimate": {r: np.atleast_1d(c["estimate"][r]) for r in orders},
                "jackknife_se": {r: np.atleast_1d(c["jackknife_se"][r]) for r in orders},
            }
        )
        return 0
    if args.action == "normality":
        ens = load_ensemble_csv(args.ensemble)
        _print_json(normality_tests(ens))
        return 0
    spec = load_circuit(args.circuit)
    lci = build_lightcones(spec)
    ens = load_ensemble_csv(args.ensemble, normalization=spec.normalization)
    graph = build_dependency_graph(lci)
    ens = type(ens)(
        values=ens.values, probe_inputs=ens.probe_inputs, seed=ens.seed,
        num_qubits=spec.num_qubits, num_layers=spec.num_layers,
        normalization=spec.normalization, sampler=ens.sampler,
    )
    _print_json(janson_diagnostic(ens, graph, args.order))
    return 0


# ---------------------------------------------------------------------------
# Config-driven runs


def _build_circuit_from_config(doc: dict):
    if "file" in doc:
        return load_circuit(doc["file"])
    spec = builtin_family(
        doc["family"], doc["m"], doc["L"], seed=doc.get("seed", 0), input_dim=doc.get("input_dim", 1)
    )
    if doc.get("mean_zero_layer"):
        spec = append_mean_zero_layer(spec)
    return spec


def _build_dataset_from_config(doc: dict):
    if "csv" in doc:
        return load_dataset_csv(doc["csv"])
    return synthetic_dataset(
        doc.get("kind", "sine"), doc.get("n", 4), doc.get("input_dim", 1), seed=doc.get("seed", 0)
    )


def run_experiment(config: dict, outdir: Path) -> dict:
    """Dispatch one experiment plan; returns a result summary."""
    plan = config["plan"]
    op = plan["op"]
    seed = config.get("seed", 0)
    outdir.mkdir(parents=True, exist_ok=True)
    summary: dict = {"op": op}

    if op == "width-sweep":
        widths = plan["widths"]
        rows = []
        for m in widths:
            sub = dict(config)
            sub["circuit"] = dict(config["circuit"], m=m)
            sub["plan"] = plan["inner"]
            subdir = outdir / f"m{m}"
            rows.append((m, run_experiment(sub, subdir)))
        with open(outdir / "aggregate.csv", "w") as fh:
            keys = sorted(k for k, v in rows[0][1].items() if isinstance(v, (int, float)))
            fh.write("m," + ",".join(keys) + "\n")
            for m, res in rows:
                fh.write(f"{m}," + ",".join(f"{res[k]:.17g}" for k in keys) + "\n")
        summary["widths"] = list(widths)
        return summary

    spec = _build_circuit_from_config(config["circuit"])
    lci = build_lightcones(spec)
    if op == "lightcone-report":
        rep = cardinality_report(lci, spec.num_layers)
        (outdir / "report.json").write_text(json.dumps(rep, indent=1, default=_jsonable))
        summary.update({k: rep[k] for k in ("max_future", "max_past", "sigma1", "sigma2")})
    elif op == "calibrate":
        probes = probe_inputs(spec.input_dim, plan.get("probes", 4))
        cal = calibrate_normalization(spec, lci, probes, plan.get("samples", 2000), seed)
        _write_matrix_csv(outdir / "covariance.csv", cal.covariance)
        summary["mean_diag_covariance"] = cal.mean_diag_covariance
        summary["suggested_normalization"] = cal.suggested_normalization
    elif op == "init-ensemble":
        probes = (
            probe_inputs(spec.input_dim, plan.get("probes", 5)) if spec.input_dim else np.zeros((1, 0))
        )
        ens = sample_init_ensemble(
            spec, lci, probes, plan.get("samples", 2000), seed, sampler=plan.get("sampler", "uniform")
        )
        save_ensemble_csv(ens, outdir / "ensemble.csv")
        from .stats import standardized_moments

        std = standardized_moments(ens.values)
        summary["median_abs_excess_kurtosis"] = float(np.median(np.abs(std["excess_kurtosis"])))
        summary["max_abs_mean"] = float(np.max(np.abs(ens.values.mean(axis=1))))
    elif op == "train":
        ds = _build_dataset_from_config(config["dataset"])
        cfg = TrainConfig(
            mode=plan.get("mode", "gd"),
            dataset=ds,
            eta0=plan["eta0"],
            steps=plan.get("steps", 100),
            t_final=plan.get("t_final"),
            seed=seed,
            n_k=plan.get("n_k", 1.0),
            noise=plan.get("noise", "synthetic"),
            delta=plan.get("delta", 0.2),
            track_diagnostics=plan.get("track_diagnostics", True),
        )
        theta0 = ParamVector.uniform(spec, stream(seed, "train-init"))
        runner = {"flow": train_flow, "gd": train_gd, "noisy-gd": train_noisy_gd}[cfg.mode]
        trace = runner(spec, lci, theta0, cfg)
        trace.to_csv(outdir / "trace.csv")
        summary["final_loss"] = float(trace.loss[-1])
    elif op == "ntk-analytic":
        inputs = probe_inputs(spec.input_dim, plan.get("probes", 4))
        ntk = analytic_ntk_mc(spec, lci, inputs, plan.get("samples", 200), seed)
        _write_matrix_csv(outdir / "ntk.csv", ntk.entries)
        summary["n_k"] = ntk.n_k
        summary["lambda_min"] = ntk.lambda_min
    else:
        raise ValueError(f"unknown plan op {op!r}")
    return summary


def _cmd_run(args) -> int:
    path = Path(args.config)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    try:
        config = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"config is not valid JSON: {exc}") from exc
    outdir = Path(config.get("output_dir", path.with_suffix("")))
    started = time.time()
    summary = run_experiment(config, outdir)
    manifest = {
        "config_sha256": hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest(),
        "version": __version__,
        "wall_time_s": time.time() - started,
        "summary": summary,
    }
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=1, default=_jsonable))
    _print_json(summary)
    return 0


def _cmd_reproduce(args) -> int:
    if args.suite.lower() == "all":
        results = run_all()
    else:
        results = [run_criterion(args.suite)]
    for res in results:
        print(res.line())
    return 0 if all(r.passed for r in results) else 1


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qnnkit", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("circuit", help="generate or validate circuit files")
    cs = c.add_subparsers(dest="action", required=True)
    cg = cs.add_parser("gen", help="generate a built-in family circuit")
    cg.add_argument("--family", required=True, choices=FAMILIES)
    cg.add_argument("--m", type=int, required=True)
    cg.add_argument("--L", type=int, required=True)
    cg.add_argument("--seed", type=int, default=0)
    cg.add_argument("--input-dim", type=int, default=1)
    cg.add_argument("--mean-zero-layer", action="store_true")
    cg.add_argument("--out", required=True)
    cv = cs.add_parser("validate", help="validate a circuit file")
    cv.add_argument("circuit")

    lc = sub.add_parser("lightcone", help="cone cardinalities and pruned circuits")
    lcs = lc.add_subparsers(dest="action", required=True)
    lr = lcs.add_parser("report")
    lr.add_argument("circuit")
    ld = lcs.add_parser("dump")
    ld.add_argument("circuit")
    ld.add_argument("--qubit", type=int, required=True)
    ld.add_argument("--out")

    sm = sub.add_parser("sim", help="evaluate or calibrate the model")
    sms = sm.add_subparsers(dest="action", required=True)
    se = sms.add_parser("eval")
    se.add_argument("circuit")
    se.add_argument("--theta", required=True, help="CSV file of angles or seed:<int>")
    se.add_argument("--x", default="")
    se.add_argument("--shots", type=int, default=0)
    se.add_argument("--seed", type=int, default=0)
    sc = sms.add_parser("calibrate")
    sc.add_argument("circuit")
    sc.add_argument("--samples", type=int, default=2000)
    sc.add_argument("--seed", type=int, default=0)
    sc.add_argument("--inputs")
    sc.add_argument("--out", default="covariance.csv")

    nt = sub.add_parser("ntk", help="empirical or Monte-Carlo analytic NTK")
    nts = nt.add_subparsers(dest="action", required=True)
    for name in ("empirical", "analytic"):
        np_ = nts.add_parser(name)
        np_.add_argument("circuit")
        np_.add_argument("--inputs", required=True)
        np_.add_argument("--out", default="ntk.csv")
        if name == "empirical":
            np_.add_argument("--theta", required=True)
            np_.add_argument("--nk", type=float, default=1.0)
        else:
            np_.add_argument("--samples", type=int, default=200)
            np_.add_argument("--seed", type=int, default=0)

    tr = sub.add_parser("train", help="train a circuit and write the trace CSV")
    tr.add_argument("--mode", required=True, choices=("flow", "gd", "noisy-gd"))
    tr.add_argument("--circuit", required=True)
    tr.add_argument("--data", required=True)
    tr.add_argument("--eta0", type=float, required=True)
    tr.add_argument("--steps", type=int, default=100)
    tr.add_argument("--t-final", type=float, default=None)
    tr.add_argument("--h", type=float, default=None)
    tr.add_argument("--shots-schedule", default="", help="auto or fixed:<M> (enables the shots backend)")
    tr.add_argument("--noise", default="", choices=("", "synthetic"))
    tr.add_argument("--noise-scale", type=float, default=1.0)
    tr.add_argument("--variance-rule", default="Eg2c", choices=("Eg2c", "Eg2b"))
    tr.add_argument("--delta", type=float, default=0.2)
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--nk", type=float, default=1.0)
    tr.add_argument("--theta0", default="")
    tr.add_argument("--no-diagnostics", action="store_true")
    tr.add_argument("--out", default="trace.csv")

    gp = sub.add_parser("gp", help="GP posterior and empirical check")
    gps = gp.add_subparsers(dest="action", required=True)
    gpp = gps.add_parser("posterior")
    gpp.add_argument("--kernel", required=True)
    gpp.add_argument("--cov0", required=True)
    gpp.add_argument("--labels", required=True)
    gpp.add_argument("--eta0", type=float, required=True)
    gpp.add_argument("--t", type=float, required=True)
    mode = gpp.add_mutually_exclusive_group(required=True)
    mode.add_argument("--discrete", action="store_true")
    mode.add_argument("--continuous", action="store_true")
    gpp.add_argument("--out", default="posterior.csv")
    gpc = gps.add_parser("check")
    gpc.add_argument("--circuit", required=True)
    gpc.add_argument("--data", required=True)
    gpc.add_argument("--seeds", type=int, required=True)
    gpc.add_argument("--t", type=int, required=True)
    gpc.add_argument("--eta0", type=float, required=True)
    gpc.add_argument("--probes", type=int, default=4)
    gpc.add_argument("--seed", type=int, default=0)

    st = sub.add_parser("stats", help="initialization ensembles and normality tests")
    sts = st.add_subparsers(dest="action", required=True)
    si = sts.add_parser("init-ensemble")
    si.add_argument("--circuit", required=True)
    si.add_argument("--samples", type=int, default=2000)
    si.add_argument("--seed", type=int, default=0)
    si.add_argument("--sampler", default="uniform", choices=("uniform", "two-point"))
    si.add_argument("--probes", type=int, default=5)
    si.add_argument("--inputs")
    si.add_argument("--out", default="ensemble.csv")
    scu = sts.add_parser("cumulants")
    scu.add_argument("--ensemble", required=True)
    scu.add_argument("--orders", default="1,2,3,4")
    sn = sts.add_parser("normality")
    sn.add_argument("--ensemble", required=True)
    sj = sts.add_parser("janson")
    sj.add_argument("--circuit", required=True)
    sj.add_argument("--ensemble", required=True)
    sj.add_argument("--order", type=int, default=4)

    rn = sub.add_parser("run", help="run an experiment config (JSON) and write a manifest")
    rn.add_argument("config")

    rp = sub.add_parser("reproduce", help="run acceptance suites")
    rp.add_argument("suite", help=f"one of {sorted(CRITERIA)} or 'all'")
    return p


_HANDLERS = {
    "circuit": _cmd_circuit,
    "lightcone": _cmd_lightcone,
    "sim": _cmd_sim,
    "ntk": _cmd_ntk,
    "train": _cmd_train,
    "gp": _cmd_gp,
    "stats": _cmd_stats,
    "run": _cmd_run,
    "reproduce": _cmd_reproduce,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except (FileNotFoundError, ValueError, KeyError, ConstructionError, json.JSONDecodeError) as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr, indent=1)
        sys.stderr.write("\n")
        return 2
    except CapacityError as exc:
        json.dump({"error": "CapacityError", "message": str(exc)}, sys.stderr, indent=1)
        sys.stderr.write("\n")
        return 3
    except (NumericFault, ConditioningError) as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr, indent=1)
        sys.stderr.write("\n")
        return 4


if __name__ == "__main__":
    sys.exit(main())
