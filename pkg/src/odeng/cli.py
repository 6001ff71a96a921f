"""Command-line front end.

Four subcommands share one configuration format:

  odeng solve <config>        optimize the design density, emit the quantile
                              design, the refined exact design and comparator
                              efficiencies
  odeng eff <config>          efficiency of a design against a reference (or
                              against the refined optimum, computed on the fly)
  odeng sens <config>         efficiency of a design over a local parameter box
  odeng validate <config>     Monte-Carlo check of the analytic covariance

Exit codes: 0 success, 2 configuration or input validation error, 3 numerical
or optimizer failure.  All result files carry the resolved configuration and
the seed, and are written atomically.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import load_config, load_design_points
from .covariance import (
    design_criterion,
    efficiency,
    estimator_covariance,
    sensitivity_grid,
    simulate_ols_covariance,
)
from .density import design_from_density, uniform_density
from .errors import ConfigError, DomainError, OdengError
from .optimize import optimize_density, refine_exact_design
from .problem import ExactDesign
from .report import (
    render_density_figure,
    render_sensitivity_figure,
    write_design_json,
    write_density_csv,
    write_json,
    write_sensitivity_csv,
)

__all__ = ["main"]

MC_MIN_REPLICATES = 1000
MC_PASS_THRESHOLD = 0.05


def _points_str(points) -> str:
    return ", ".join(f"{t:.3f}" for t in np.asarray(points))


def _load(args):
    cfg = load_config(args.config)
    cfg = cfg.with_overrides(seed=args.seed, quad_nodes=args.quad_nodes)
    return cfg, cfg.build_problem()


def _load_design(path, problem) -> ExactDesign:
    design = ExactDesign(load_design_points(path))
    design.validate_for(problem)
    return design


def cmd_solve(args) -> int:
    cfg, problem = _load(args)
    out = Path(args.out)
    density, opt = optimize_density(
        problem,
        degree=cfg.density_degree,
        restarts=cfg.density_restarts,
        quad=cfg.quad,
        seed=cfg.seed,
    )
    payload = {
        "command": "solve",
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "criterion": {"type": cfg.criterion_type, "value": opt.value},
        "density": {
            "coefficients": density.coeffs,
            "domain": list(density.domain),
            "norm": density.norm,
        },
        "optimizer": {
            "iterations": opt.iterations,
            "converged": opt.converged,
            "restarts_used": opt.restarts_used,
        },
    }
    print(f"optimized density: {cfg.criterion_type}-criterion value {opt.value:.6g}")

    figure_designs = {}
    if cfg.design_n is not None:
        design = design_from_density(density, cfg.design_n, cfg.design_rule)
        uniform = design_from_density(
            uniform_density(problem.domain, cfg.quad), cfg.design_n, cfg.design_rule
        )
        payload["design"] = {
            "points": design.points,
            "n": design.n,
            "rule": cfg.design_rule,
        }
        payload["uniform_design"] = {"points": uniform.points}
        figure_designs["quantile"] = design.points
        write_design_json(out / "design.json", design.points, {"rule": cfg.design_rule})
        print(f"quantile design ({cfg.design_rule}, n={design.n}): {_points_str(design.points)}")

        if cfg.refine_enabled:
            refined, _ = refine_exact_design(
                problem, design, estimator=cfg.refine_estimator
            )
            ref_value = design_criterion(problem, refined, cfg.refine_estimator)
            payload["refined"] = {
                "points": refined.points,
                "estimator": cfg.refine_estimator,
                "criterion_value": ref_value,
            }
            effs = {}
            for est in ("OLS", "WLS"):
                effs[est] = {
                    "quantile": efficiency(design, refined, problem, est),
                    "uniform": efficiency(uniform, refined, problem, est),
                }
            payload["efficiency_vs_refined"] = effs
            figure_designs["refined"] = refined.points
            write_design_json(
                out / "refined.json", refined.points,
                {"estimator": cfg.refine_estimator},
            )
            print(f"refined design ({cfg.refine_estimator}): {_points_str(refined.points)}")
            print(
                "efficiency vs refined: quantile OLS {:.3f} WLS {:.3f}; "
                "uniform OLS {:.3f} WLS {:.3f}".format(
                    effs["OLS"]["quantile"], effs["WLS"]["quantile"],
                    effs["OLS"]["uniform"], effs["WLS"]["uniform"],
                )
            )

    write_density_csv(out / "density.csv", density)
    render_density_figure(out / "density.png", density, figure_designs)
    write_json(out / "result.json", payload)
    print(f"wrote {out / 'result.json'}")
    return 0


def cmd_eff(args) -> int:
    cfg, problem = _load(args)
    out = Path(args.out)
    design = _load_design(args.design, problem)
    payload = {
        "command": "eff",
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "design": design.points,
        "efficiency": {},
        "criterion_values": {},
    }
    if args.ref is not None:
        reference = _load_design(args.ref, problem)
        payload["reference"] = {"source": str(args.ref), "points": reference.points}
        references = {"OLS": reference, "WLS": reference}
    else:
        # No reference given: rebuild the optimal, one refinement per
        # estimator, starting from the quantile design of the same size.
        density, _ = optimize_density(
            problem,
            degree=cfg.density_degree,
            restarts=cfg.density_restarts,
            quad=cfg.quad,
            seed=cfg.seed,
        )
        start = design_from_density(density, design.n, cfg.design_rule)
        references = {}
        for est in ("OLS", "WLS"):
            references[est], _ = refine_exact_design(problem, start, estimator=est)
        payload["reference"] = {
            "source": "refined",
            "points": {est: ref.points for est, ref in references.items()},
        }
    for est in ("OLS", "WLS"):
        ref = references[est]
        payload["efficiency"][est] = efficiency(design, ref, problem, est)
        payload["criterion_values"][est] = {
            "design": design_criterion(problem, design, est),
            "reference": design_criterion(problem, ref, est),
        }
    write_json(out / "efficiency.json", payload)
    print(
        "{}-efficiency: OLS {:.4f}, WLS {:.4f}".format(
            cfg.criterion_type, payload["efficiency"]["OLS"], payload["efficiency"]["WLS"]
        )
    )
    print(f"wrote {out / 'efficiency.json'}")
    return 0


def _parse_box(text, problem, axes_text):
    try:
        values = [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise ConfigError("box must be comma-separated numbers lo1,hi1,lo2,hi2,...") from None
    if len(values) % 2 != 0:
        raise ConfigError("box needs an even number of values (lo,hi per axis)")
    pairs = [(values[i], values[i + 1]) for i in range(0, len(values), 2)]
    p = problem.model.p
    if len(pairs) == p:
        return pairs
    if len(pairs) == 2 and p > 2:
        if axes_text is None:
            axes = (0, 1)
        else:
            try:
                i, j = (int(v) - 1 for v in axes_text.split(","))
            except ValueError:
                raise ConfigError("axes must look like I,J with 1-based indices") from None
            if not (0 <= i < p and 0 <= j < p) or i == j:
                raise ConfigError(f"axes must name two distinct parameters in 1..{p}")
            axes = (i, j)
        beta0 = problem.beta0
        box = [(float(b), float(b)) for b in beta0]
        box[axes[0]] = pairs[0]
        box[axes[1]] = pairs[1]
        return box
    raise ConfigError(
        f"box needs {p} intervals (or 2 plus --axes for models with p > 2)"
    )


def cmd_sens(args) -> int:
    cfg, problem = _load(args)
    out = Path(args.out)
    design = _load_design(args.design, problem)
    box = _parse_box(args.box, problem, args.axes)
    result = sensitivity_grid(
        design, problem, box, args.grid, estimator=cfg.refine_estimator
    )
    write_sensitivity_csv(out / "sensitivity.csv", result)
    render_sensitivity_figure(out / "sensitivity.png", result)
    finite = result.values[np.isfinite(result.values)]
    payload = {
        "command": "sens",
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "design": design.points,
        "box": [list(b) for b in box],
        "grid": args.grid,
        "estimator": cfg.refine_estimator,
        "min_efficiency": float(finite.min()) if finite.size else None,
        "max_efficiency": float(finite.max()) if finite.size else None,
        "all_nodes_ok": bool(result.ok.all()),
    }
    write_json(out / "sensitivity.json", payload)
    if finite.size:
        print(
            "efficiency over box: min {:.4f}, max {:.4f}".format(
                payload["min_efficiency"], payload["max_efficiency"]
            )
        )
    print(f"wrote {out / 'sensitivity.csv'}")
    return 0


def cmd_validate(args) -> int:
    cfg, problem = _load(args)
    out = Path(args.out)
    design = _load_design(args.design, problem)
    if args.k < MC_MIN_REPLICATES:
        raise ConfigError(f"--k must be >= {MC_MIN_REPLICATES} for a stable estimate")
    seed = cfg.seed
    analytic = estimator_covariance(problem, design, "OLS")
    empirical = simulate_ols_covariance(problem, design, args.k, seed=seed)
    diff = np.linalg.norm(empirical - analytic)
    denom = np.linalg.norm(analytic)
    rel = 0.0 if diff == 0.0 else diff / denom if denom > 0 else float("inf")
    passed = rel < MC_PASS_THRESHOLD
    payload = {
        "command": "validate",
        "config": cfg.to_dict(),
        "seed": seed,
        "design": design.points,
        "replicates": args.k,
        "analytic": analytic,
        "monte_carlo": empirical,
        "frobenius_relative_error": rel,
        "threshold": MC_PASS_THRESHOLD,
        "passed": passed,
    }
    write_json(out / "validation.json", payload)
    status = "PASS" if passed else "FAIL"
    print(
        f"{status}: Monte-Carlo vs analytic covariance, relative error "
        f"{rel:.4f} (threshold {MC_PASS_THRESHOLD:.2f}, K={args.k})"
    )
    print(f"wrote {out / 'validation.json'}")
    return 0


def _add_common(parser):
    parser.add_argument("config", help="problem configuration JSON file")
    parser.add_argument("--out", default=".", help="output directory (default: current)")
    parser.add_argument(
        "--quad-nodes", type=int, default=None, metavar="N",
        help="override the quadrature node count (odd, >= 3)",
    )
    parser.add_argument(
        "--seed", type=int, default=None, metavar="S",
        help="override the seed used for optimizer restarts and simulation",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="odeng",
        description="Optimal sampling designs for random-effect regression "
        "with correlated observation errors.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("solve", help="optimize the design density and emit designs")
    _add_common(sp)
    sp.set_defaults(handler=cmd_solve)

    sp = sub.add_parser("eff", help="efficiency of a design against a reference")
    _add_common(sp)
    sp.add_argument("--design", required=True, help="design JSON (array of times)")
    sp.add_argument("--ref", default=None, help="reference design JSON; "
                    "defaults to the refined optimum computed on the fly")
    sp.set_defaults(handler=cmd_eff)

    sp = sub.add_parser("sens", help="efficiency of a design over a parameter box")
    _add_common(sp)
    sp.add_argument("--design", required=True, help="design JSON (array of times)")
    sp.add_argument("--box", required=True, metavar="LO1,HI1,LO2,HI2",
                    help="parameter box, one lo,hi pair per axis")
    sp.add_argument("--grid", type=int, default=5, help="grid points per axis")
    sp.add_argument("--axes", default=None, metavar="I,J",
                    help="1-based axis pair when the model has p > 2")
    sp.set_defaults(handler=cmd_sens)

    sp = sub.add_parser("validate", help="Monte-Carlo check of the analytic covariance")
    _add_common(sp)
    sp.add_argument("--design", required=True, help="design JSON (array of times)")
    sp.add_argument("--k", type=int, default=2000, help="number of replicates (>= 1000)")
    sp.set_defaults(handler=cmd_validate)
    return parser


def _write_diagnostic(args, exc) -> None:
    out = getattr(args, "out", None)
    if out is None:
        return
    try:
        write_json(
            Path(out) / "diagnostic.json",
            {
                "command": getattr(args, "command", None),
                "error": type(exc).__name__,
                "message": str(exc),
            },
        )
    except OSError:
        pass


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (ConfigError, DomainError) as exc:
        print(f"odeng: error: {exc}", file=sys.stderr)
        return 2
    except OdengError as exc:
        _write_diagnostic(args, exc)
        print(f"odeng: error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
