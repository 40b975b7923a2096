"""Command-line front end: clustering, bounds, risk and convergence runs.

Exit codes: 0 success, 2 invalid input or configuration, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
from pathlib import Path

import numpy as np

from .artifacts import config_hash, dumps, read_points_csv, write_json, write_labels_csv, write_rows_csv
from .bounds import CONVENTIONS, bound_prefactor, cut_objective, nn_similarity, pairwise_bound, plugin_similarity
from .classifiers import BayesClassifier, NNClassifier, PluginClassifier, SoftNNClassifier
from .config import ConfigError, ExperimentConfig, load_config
from .density import BandwidthSchedule
from .evaluation import (
    ConvergenceReport,
    circle_alignment,
    classifier_risk_monte_carlo,
    classifier_risk_quadrature,
    derive_seed,
    lemma6_convergence,
    thm2_convergence,
    thm6_ratio,
)
from .mixture import Dataset, Domain, Labeling, SamplingError, sample_mixture
from .spectral import DegreeError, normalized_cut, spectral_cluster

__all__ = ["main", "run", "build_parser"]

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3
KERNELS = ("H", "G", "V", "gauss")
EXPERIMENTS = ("thm2", "lemma6", "thm6", "diffusion")


class UsageError(ValueError):
    pass


def _threads(cli_value) -> int:
    raw = os.environ.get("BOUNDCUT_THREADS")
    value = raw if raw not in (None, "") else cli_value
    try:
        t = int(value)
    except (TypeError, ValueError):
        raise UsageError(f"thread count must be an integer, got {value!r}") from None
    if t < 1:
        raise UsageError("thread count must be at least 1")
    return t


def _file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _similarity(data: Dataset, kernel: str, alpha, h: float):
    if alpha is not None and kernel != "G":
        raise UsageError(f"--alpha conflicts with --kernel {kernel}: its density exponents are fixed")
    if kernel == "H":
        return nn_similarity(data, h)
    if kernel == "V":
        return plugin_similarity(data, h, 1.0, 1.0)
    if kernel == "gauss":
        return plugin_similarity(data, h, 0.0, 0.0)
    a = 0.5 if alpha is None else alpha
    if a < 0:
        raise UsageError("--alpha must be nonnegative")
    return plugin_similarity(data, h, a, a)


def _bandwidth(data: Dataset, h, beta) -> float:
    if h is not None:
        if not h > 0:
            raise UsageError("--h must be positive")
        return float(h)
    schedule = BandwidthSchedule.default(d=data.d) if beta is None else BandwidthSchedule(beta=beta, d=data.d)
    return schedule.resolve(data).at(data.n)


def _load_points(path):
    if not Path(path).is_file():
        raise UsageError(f"input file {path} does not exist")
    pts, labels = read_points_csv(path)
    return Dataset(Domain.enclosing(pts), pts), labels


def _cmd_cluster(args) -> int:
    if args.kernel != "G" and args.alpha is not None:
        raise UsageError(f"--alpha conflicts with --kernel {args.kernel}: its density exponents are fixed")
    if args.q < 2:
        raise UsageError("--q must be at least 2")
    data, _ = _load_points(args.input)
    provenance = {
        "input_sha256": _file_digest(args.input),
        "kernel": args.kernel,
        "alpha": args.alpha,
        "q": args.q,
        "h": args.h,
        "beta": args.beta,
    }
    out = {"kernel": args.kernel, "alpha": args.alpha, "q": args.q, "seed": args.seed, "n": data.n}
    if data.n == 1:
        labels = np.array([1])
        out.update({"h": args.h, "cut": 0.0, "ncut": 0.0, "bound": 0.0, "convention": "unordered", "clamped_entries": 0})
    else:
        if args.q > data.n:
            raise UsageError(f"cannot split {data.n} points into {args.q} clusters")
        h = _bandwidth(data, args.h, args.beta)
        sim = _similarity(data, args.kernel, args.alpha, h)
        lab = spectral_cluster(sim, args.q, args.seed)
        labels = lab.labels
        w = sim.symmetrized()
        ncut = normalized_cut(w, labels == 1) if args.q == 2 else None
        out.update(
            {
                "h": h,
                "cut": cut_objective(sim, lab),
                "ncut": ncut,
                "bound": pairwise_bound(sim, lab, "unordered"),
                "convention": "unordered",
                "clamped_entries": sim.clamped,
            }
        )
    out["config_hash"] = config_hash(provenance)
    if args.out:
        write_labels_csv(args.out, labels)
    sys.stdout.write(dumps(out))
    return EXIT_OK


def _cmd_bounds(args) -> int:
    data, labels = _load_points(args.input)
    if args.labels:
        if not Path(args.labels).is_file():
            raise UsageError(f"labels file {args.labels} does not exist")
        raw = np.loadtxt(args.labels, ndmin=1)
        if raw.ndim != 1 or raw.shape[0] != data.n or np.any(raw != np.round(raw)) or np.any(raw < 1):
            raise UsageError("labels file must hold one positive integer per input row")
        labels = raw.astype(np.int64)
    if labels is None:
        raise UsageError("bounds need labels: a trailing 'label' column or --labels")
    lab = Labeling.from_sequence(labels)
    if data.n < 2:
        raise UsageError("bounds need at least two points")
    h = _bandwidth(data, args.h, args.beta)
    sim = _similarity(data, args.kernel, args.alpha, h)
    provenance = {
        "input_sha256": _file_digest(args.input),
        "labels_sha256": _file_digest(args.labels) if args.labels else None,
        "kernel": args.kernel,
        "alpha": args.alpha,
        "h": args.h,
        "beta": args.beta,
        "convention": args.convention,
    }
    out = {
        "kernel": args.kernel,
        "h": h,
        "convention": args.convention,
        "bound": pairwise_bound(sim, lab, args.convention),
        "clamped_entries": sim.clamped,
        "prefactor": bound_prefactor(sim.kind),
        "cut": cut_objective(sim, lab),
        "seed": args.seed,
        "config_hash": config_hash(provenance),
    }
    if args.emit_matrix:
        write_rows_csv(args.emit_matrix, [f"c{j + 1}" for j in range(data.n)], sim.values.tolist())
    text = dumps(out)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def _seeds(cfg: ExperimentConfig, seed) -> tuple:
    return (int(seed),) if seed is not None else cfg.seeds


def _risk_report(cfg: ExperimentConfig, seeds, method: str, threads: int) -> ConvergenceReport:
    model = cfg.model
    bayes = BayesClassifier(model)
    if method == "quadrature":
        bayes_risk = classifier_risk_quadrature(model, bayes, cfg.resolution).risk
    else:
        bayes_risk = classifier_risk_monte_carlo(model, bayes, cfg.n_eval, derive_seed(0, 0, 2)).risk
    records = []
    for n in cfg.n_list:
        for s in seeds:
            data, lab = sample_mixture(model, n, derive_seed(s, n, 0))
            h = cfg.schedule.resolve(data).at(n) if n >= 2 else float("nan")
            if cfg.classifier == "plugin":
                clf = PluginClassifier(data, lab, h)
            elif cfg.classifier == "soft-nn":
                clf = SoftNNClassifier(data, lab, h)
            elif cfg.classifier == "nn":
                clf = NNClassifier(data, lab)
            else:
                clf = bayes
            if method == "quadrature":
                risk = classifier_risk_quadrature(model, clf, cfg.resolution).risk
            else:
                risk = classifier_risk_monte_carlo(model, clf, cfg.n_eval, derive_seed(s, n, 1), conditional=True).risk
            records.append({"n": n, "h": h, "seed": s, "value": risk, "reference": bayes_risk})
    report = ConvergenceReport("risk", records)
    report.extra["classifier"] = cfg.classifier
    report.extra["method"] = method
    report.extra["summary"] = [{"n": n, "median_excess_risk": m} for n, m in report.per_n(lambda r: r["value"] - r["reference"])]
    return report


def _diffusion_report(cfg: ExperimentConfig, seeds) -> ConvergenceReport:
    amplitude = cfg.circle.get("amplitude", 0.8)
    alphas = tuple(sorted(set(cfg.circle.get("alphas", [0.0, 0.5, 1.0]))))
    if len(alphas) < 1:
        raise ConfigError("circle.alphas must not be empty")
    schedule = cfg.schedule if cfg.raw.get("bandwidth") else None
    records, detail = [], []
    for n in cfg.n_list:
        for s in seeds:
            res = circle_alignment(n, amplitude, derive_seed(s, n, 0), alphas, schedule)
            al = res["alignment"]
            records.append({"n": n, "h": res["h"], "seed": s, "value": al[alphas[-1]], "reference": al[alphas[0]]})
            detail.append({"n": n, "seed": s, "alignment": [{"alpha": a, "cosine": al[a]} for a in alphas]})
    report = ConvergenceReport("diffusion", records)
    report.fitted_constant = float(np.median([r["value"] for r in report.records]))
    report.extra["amplitude"] = amplitude
    report.extra["alignments"] = sorted(detail, key=lambda r: (r["n"], r["seed"]))
    return report


def _write_report(cfg: ExperimentConfig, report: ConvergenceReport, seeds, out) -> None:
    body = report.to_dict()
    body["config_hash"] = cfg.hash
    body["seeds"] = list(seeds)
    path = out or cfg.outputs.get("report", "report.json")
    write_json(path, body)
    trace = cfg.outputs.get("trace_csv")
    if trace:
        write_rows_csv(
            trace,
            ["n", "h", "seed", "value", "reference"],
            [[r["n"], float(r["h"]), r["seed"], float(r["value"]), float(r["reference"])] for r in report.records],
        )


def _converge(cfg: ExperimentConfig, experiment: str, seed, threads: int, out) -> int:
    seeds = _seeds(cfg, seed)
    if experiment == "thm2":
        report = thm2_convergence(cfg.model, cfg.schedule, cfg.n_list, seeds, cfg.n_eval, threads=threads)
    elif experiment == "lemma6":
        report = lemma6_convergence(cfg.model, cfg.schedule, cfg.n_list, seeds, threads=threads)
    elif experiment == "thm6":
        report = thm6_ratio(cfg.model, cfg.schedule, cfg.n_list, seeds, cfg.resolution, threads=threads)
    elif experiment == "diffusion":
        report = _diffusion_report(cfg, seeds)
    elif experiment == "risk":
        report = _risk_report(cfg, seeds, "quadrature" if cfg.model.d <= 2 else "monte-carlo", threads)
    else:
        raise UsageError(f"unknown experiment {experiment!r}")
    _write_report(cfg, report, seeds, out)
    return EXIT_OK


def _cmd_converge(args) -> int:
    cfg = load_config(args.config)
    experiment = args.experiment or cfg.experiment
    if experiment is None:
        raise UsageError("no experiment given on the command line or in the config")
    if cfg.experiment is not None and args.experiment and cfg.experiment != args.experiment:
        raise UsageError(f"--experiment {args.experiment} disagrees with the config's {cfg.experiment!r}")
    if experiment != "diffusion" and cfg.model is None:
        raise ConfigError("config needs a 'model' section")
    return _converge(cfg, experiment, args.seed, _threads(args.threads), args.out)


def _cmd_risk(args) -> int:
    cfg = load_config(args.config)
    method = args.method or ("quadrature" if cfg.model.d <= 2 else "monte-carlo")
    if method == "quadrature" and cfg.model.d > 2:
        raise UsageError("quadrature risk is limited to d <= 2")
    seeds = _seeds(cfg, args.seed)
    report = _risk_report(cfg, seeds, method, _threads(args.threads))
    _write_report(cfg, report, seeds, args.out)
    return EXIT_OK


def _guard(fn, *args) -> int:
    try:
        return fn(*args)
    except (DegreeError, SamplingError, FloatingPointError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"boundcut: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, OSError) as exc:
        print(f"boundcut: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


def run(config_path, out=None, seed=None, threads: int = 1) -> int:
    """Run the experiment a config names and write its report; returns the exit code."""

    def go():
        cfg = load_config(config_path)
        if cfg.experiment is None:
            raise ConfigError("config has no 'experiment' key")
        return _converge(cfg, cfg.experiment, seed, _threads(threads), out)

    return _guard(go)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="boundcut", description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=None, help="random seed")
    parser.add_argument("--threads", default=1, help="worker threads (BOUNDCUT_THREADS overrides)")
    parser.add_argument("--out", default=None, help="output path")
    # the same flags are accepted after the subcommand; SUPPRESS keeps the
    # top-level value unless one is given there
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--threads", default=argparse.SUPPRESS)
    common.add_argument("--out", default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)

    def graph_flags(p):
        p.add_argument("--input", required=True, help="CSV of points")
        p.add_argument("--kernel", choices=KERNELS, default="G")
        p.add_argument("--alpha", type=float, default=None, help="density exponent a = b for the G kernel")
        p.add_argument("--h", type=float, default=None, help="fixed bandwidth (default: schedule)")
        p.add_argument("--beta", type=float, default=None, help="schedule exponent")

    p = sub.add_parser("cluster", parents=[common], help="spectral clustering of a point CSV")
    graph_flags(p)
    p.add_argument("--q", type=int, default=2)
    p.set_defaults(func=_cmd_cluster)

    p = sub.add_parser("bounds", parents=[common], help="pairwise error bound of a labelled point CSV")
    graph_flags(p)
    p.add_argument("--labels", default=None, help="CSV with one label per row")
    p.add_argument("--convention", choices=CONVENTIONS, default="unordered")
    p.add_argument("--emit-matrix", default=None, help="write the similarity matrix to this CSV")
    p.set_defaults(func=_cmd_bounds)

    p = sub.add_parser("risk", parents=[common], help="classifier risk against the oracle model")
    p.add_argument("--config", required=True)
    p.add_argument("--method", choices=("quadrature", "monte-carlo"), default=None)
    p.set_defaults(func=_cmd_risk)

    p = sub.add_parser("converge", parents=[common], help="convergence experiment")
    p.add_argument("--experiment", choices=EXPERIMENTS, default=None)
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_converge)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_INVALID
    if args.command == "cluster" and args.seed is None:
        args.seed = 0
    return _guard(args.func, args)


if __name__ == "__main__":
    sys.exit(main())
