"""Batch command line harness.

Subcommands::

    simulate   draw a (change-set, observation) pair and write both as CSV
    vfield     compute the posterior gain-rate field for an observation
    detect     build the stopping set and change estimate, write masks
    evaluate   paired Monte Carlo comparison of detectors
    verify     run the brute-force verification oracles
    sweep      repeat detect over a list of prior rates, one summary row each

Common flags: ``--config PATH`` (required), ``--out DIR``, ``--seed N``
(overrides the config seed), ``--threads N`` (replication parallelism for
evaluate; all other paths are single-threaded).  Identical inputs and seed
produce byte-identical outputs for any thread count.

Errors exit nonzero with one machine-readable line on stderr:
``error code=<slug> message="..."`` (2 = configuration, 3 = quadrature
nonconvergence, 4 = optimality conditions violated in strict mode).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import streams
from .config import ConfigError, ExperimentConfig
from .detector import estimate_changeset, monotone_check, no_info_baseline, stopping_set_from_field
from .gain import (
    EstimatorSpec,
    default_competitors,
    detector_label,
    gain,
    run_replications,
    summarize_gains,
)
from .geometry import GridSpec, UpperLayer, mask_to_csv, mask_to_pgm, normalize
from .oracles import compensator_oracle, importance_posterior_lattice
from .posterior import (
    QuadratureNonconvergenceError,
    compute_posterior_field,
    compute_posterior_field_support,
    field_metadata,
    field_to_csv,
)
from .priors import check_theorem_conditions, hazard_grid, odds_factor_grid
from .simulate import PointPattern, points_from_csv, points_to_csv, sample_observation
from .priors import sample_changeset


class TheoremConditionError(RuntimeError):
    """Strict mode: the sweep found a hazard/odds monotonicity violation."""


def _write(out: Path, name: str, text: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)


def _meta_text(cfg: ExperimentConfig) -> str:
    return "\n".join(cfg.resolved_lines()) + "\n"


def _load_pattern(path: Path, cfg: ExperimentConfig) -> PointPattern:
    return PointPattern(points=points_from_csv(path.read_text()), window=cfg.grid())


def _load_changeset(path: Path) -> UpperLayer:
    return normalize(points_from_csv(path.read_text()))


def _simulated_pair(cfg: ExperimentConfig):
    xi = sample_changeset(cfg.prior(), cfg.grid(),
                          streams.replication_stream(cfg.seed, 0, streams.CHANGESET))
    pattern = sample_observation(
        xi, cfg.detection_params(), cfg.grid(),
        streams.replication_stream(cfg.seed, 0, streams.OBSERVATION))
    return xi, pattern


def _estimator_for(cfg: ExperimentConfig, pattern_seed_rep: int = 0):
    spec = EstimatorSpec(mode=cfg.estimator_mode(), q_samples=cfg.q_samples,
                         quadrature_order=cfg.quadrature_order)
    rng = streams.replication_stream(cfg.seed, pattern_seed_rep, streams.QLAYERS)
    return spec.realize(cfg.prior(), cfg.detection_params(), rng,
                        label=f"{cfg.seed}/{pattern_seed_rep}")


def _field_for(cfg: ExperimentConfig, pattern: PointPattern):
    est = _estimator_for(cfg)
    params = cfg.detection_params()
    if cfg.mode == "support":
        return compute_posterior_field_support(pattern, cfg.prior(), params,
                                               cfg.grid(), est)
    return compute_posterior_field(pattern, cfg.prior(), params, cfg.grid(), est)


def _enforce_strict(cfg: ExperimentConfig, gamma: float | None = None) -> None:
    if not cfg.strict:
        return
    report = check_theorem_conditions(cfg.prior(gamma), cfg.grid(),
                                      cfg.detection_params())
    if not report.sweep_pass:
        raise TheoremConditionError(
            f"optimality sweep failed: {report.first_violation}")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_simulate(cfg: ExperimentConfig, out: Path, args) -> int:
    xi, pattern = _simulated_pair(cfg)
    _write(out, "changeset.csv", points_to_csv(xi.generators))
    _write(out, "points.csv", points_to_csv(pattern.points))
    _write(out, "meta.txt", _meta_text(cfg))
    return 0


def cmd_vfield(cfg: ExperimentConfig, out: Path, args) -> int:
    if args.points:
        pattern = _load_pattern(Path(args.points), cfg)
    else:
        _, pattern = _simulated_pair(cfg)
    _enforce_strict(cfg)
    field = _field_for(cfg, pattern)
    _write(out, "vfield.csv", field_to_csv(field))
    _write(out, "vfield.meta", field_metadata(field) + _meta_text(cfg))
    return 0


def cmd_detect(cfg: ExperimentConfig, out: Path, args) -> int:
    if args.points:
        pattern = _load_pattern(Path(args.points), cfg)
        xi = _load_changeset(Path(args.changeset)) if args.changeset else None
    else:
        xi, pattern = _simulated_pair(cfg)
    _enforce_strict(cfg)
    field = _field_for(cfg, pattern)
    rho = stopping_set_from_field(field)
    xihat = estimate_changeset(rho)
    verdict = monotone_check(field)

    _write(out, "rho.csv", mask_to_csv(rho.as_mask()))
    _write(out, "rho.pgm", mask_to_pgm(rho.as_mask()))
    _write(out, "xihat.csv", mask_to_csv(xihat.as_mask()))
    _write(out, "xihat.pgm", mask_to_pgm(xihat.as_mask()))
    lines = [
        f"observations = {pattern.count}",
        f"rho_nodes = {rho.node_count}",
        f"xihat_nodes = {int(xihat.member.sum())}",
        f"monotone = {'pass' if verdict.passed else 'fail'}",
    ]
    if xi is not None:
        lines.append(f"gain_vs_truth = {gain(rho, xi, cfg.detection_params())!r}")
    lines.append("")
    _write(out, "summary.txt", "\n".join(lines) + _meta_text(cfg))
    return 0


def cmd_evaluate(cfg: ExperimentConfig, out: Path, args) -> int:
    _enforce_strict(cfg)
    spec = EstimatorSpec(mode=cfg.estimator_mode(), q_samples=cfg.q_samples,
                         quadrature_order=cfg.quadrature_order)
    detectors = ["optimal"] + default_competitors(cfg.grid()) + ["clairvoyant"]
    res = run_replications(cfg.prior(), cfg.detection_params(), cfg.grid(), spec,
                           cfg.replications, cfg.seed, detectors,
                           threads=max(1, args.threads))
    report = summarize_gains(res)
    header = ",".join(detector_label(k) for k in res.detectors)
    rows = [header]
    for row in res.gains:
        rows.append(",".join(repr(float(x)) for x in row))
    _write(out, "gains.csv", "\n".join(rows) + "\n")

    lines = report.summary_lines()
    iopt = res.detectors.index("optimal")
    for d, key in enumerate(res.detectors):
        if d == iopt:
            continue
        lines.append(
            f"diff[optimal-{detector_label(key)}] = {float(report.diff_means[iopt, d])!r} "
            f"(se = {float(report.diff_ses[iopt, d])!r})")
    lines.append("")
    _write(out, "report.txt", "\n".join(lines) + _meta_text(cfg))
    return 0


def cmd_verify(cfg: ExperimentConfig, out: Path, args) -> int:
    params = cfg.detection_params()
    prior = cfg.prior()
    grid = cfg.grid()
    lines: list[str] = []
    all_pass = True

    # compensator identity on a small lattice
    lattice = np.array([cfg.r / 3.0, (2.0 * cfg.r) / 3.0, cfg.r])
    for ti in lattice:
        for tj in lattice:
            verdict = compensator_oracle(
                prior, (ti, tj), max(cfg.replications, 1000),
                streams.substream(cfg.seed, 0, streams.ORACLE))
            all_pass &= verdict.passed
            lines.append(
                f"compensator[{float(ti)!r},{float(tj)!r}] = "
                f"{verdict.mc_mean!r} vs {verdict.integral!r} "
                f"(se = {verdict.mc_se!r}) pass = {'true' if verdict.passed else 'false'}")

    # posterior engine against the importance-sampling oracle
    _, pattern = _simulated_pair(cfg)
    est = _estimator_for(cfg)
    oracle_m = max(4 * cfg.q_samples, 4096)
    nodes = lattice
    o_est, o_se, _ = importance_posterior_lattice(
        pattern, prior, nodes, nodes, params, oracle_m,
        streams.substream(cfg.seed, 1, streams.ORACLE))
    from .posterior import posterior_no_change
    from .posterior import EvidenceEstimator  # noqa: F401  (doc pointer)
    for i, ti in enumerate(nodes):
        for j, tj in enumerate(nodes):
            post = posterior_no_change(pattern, prior, (ti, tj), params, est)
            tol = 3.0 * max(float(o_se[i, j]), 1e-3)
            ok = abs(post - float(o_est[i, j])) <= tol
            all_pass &= ok
            lines.append(
                f"posterior[{float(ti)!r},{float(tj)!r}] = {post!r} vs "
                f"{float(o_est[i, j])!r} (3se = {tol!r}) pass = {'true' if ok else 'false'}")

    report = check_theorem_conditions(prior, grid, params)
    lines.append(f"conditions_analytic = {report.analytic}")
    lines.append(f"conditions_sweep = {'pass' if report.sweep_pass else 'fail'}")
    lines.append("")
    _write(out, "verdicts.txt", "\n".join(lines) + _meta_text(cfg))
    if cfg.strict and not report.sweep_pass:
        raise TheoremConditionError(f"optimality sweep failed: {report.first_violation}")
    return 0 if all_pass else 1


def cmd_sweep(cfg: ExperimentConfig, out: Path, args) -> int:
    gammas = cfg.sweep_gamma or (cfg.gamma,)
    rows = ["gamma,observations,rho_nodes,xihat_nodes,monotone,conditions_sweep,gain_vs_truth"]
    for idx, g in enumerate(gammas):
        prior = cfg.prior(g)
        params = cfg.detection_params()
        _enforce_strict(cfg, g)
        xi = sample_changeset(prior, cfg.grid(),
                              streams.replication_stream(cfg.seed, idx, streams.CHANGESET))
        pattern = sample_observation(
            xi, params, cfg.grid(),
            streams.replication_stream(cfg.seed, idx, streams.OBSERVATION))
        spec = EstimatorSpec(mode=cfg.estimator_mode(), q_samples=cfg.q_samples,
                             quadrature_order=cfg.quadrature_order)
        est = spec.realize(prior, params,
                           streams.replication_stream(cfg.seed, idx, streams.QLAYERS),
                           label=f"{cfg.seed}/{idx}")
        if cfg.mode == "support":
            field = compute_posterior_field_support(pattern, prior, params,
                                                    cfg.grid(), est)
        else:
            field = compute_posterior_field(pattern, prior, params, cfg.grid(), est)
        rho = stopping_set_from_field(field)
        xihat = estimate_changeset(rho)
        verdict = monotone_check(field)
        report = check_theorem_conditions(prior, cfg.grid(), params)
        rows.append(
            f"{float(g)!r},{pattern.count},{rho.node_count},{int(xihat.member.sum())},"
            f"{'pass' if verdict.passed else 'fail'},"
            f"{'pass' if report.sweep_pass else 'fail'},"
            f"{gain(rho, xi, params)!r}")
    _write(out, "sweep.csv", "\n".join(rows) + "\n")
    _write(out, "meta.txt", _meta_text(cfg))
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="changeset",
        description="Simulate and detect an intensity change-set in a planar "
                    "Poisson process.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "vfield", "detect", "evaluate", "verify", "sweep"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="key = value config file")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--threads", type=int, default=1,
                       help="worker processes for replications")
        if name in ("vfield", "detect"):
            p.add_argument("--points", default=None,
                           help="observation CSV (default: simulate)")
        if name == "detect":
            p.add_argument("--changeset", default=None,
                           help="true generators CSV, for gain reporting")
    return parser


_COMMANDS = {
    "simulate": cmd_simulate,
    "vfield": cmd_vfield,
    "detect": cmd_detect,
    "evaluate": cmd_evaluate,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig.load(args.config)
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        return _COMMANDS[args.command](cfg, Path(args.out), args)
    except ConfigError as exc:
        print(f'error code=config message="{exc}"', file=sys.stderr)
        return 2
    except QuadratureNonconvergenceError as exc:
        print(f'error code=quadrature message="{exc}"', file=sys.stderr)
        return 3
    except TheoremConditionError as exc:
        print(f'error code=conditions message="{exc}"', file=sys.stderr)
        return 4
    except OSError as exc:
        print(f'error code=io message="{exc}"', file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
