"""Problem configuration: JSON documents in, validated problem objects out.

One JSON document describes one study: the model block (builtin name or
expression, nominal parameters), the time window, noise, correlation,
between-subject covariance, the criterion, and the knobs of the density
search, the quantile transform and the refinement step.  Validation errors
always name the offending key by its dotted path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .correlation import CorrelationSpec
from .density import DESIGN_RULES, QuadratureSpec
from .errors import ConfigError, UnsupportedCriterionError
from .models import NoiseSpec, builtin_model, parse_model_expression
from .problem import Criterion, PopulationProblem, PopulationSpec

__all__ = ["ProblemConfig", "load_config", "load_design_points", "fixture_path"]

DENSITY_DEFAULTS = {"degree": 6, "restarts": 8, "quad_nodes": 201, "seed": 0}
DESIGN_DEFAULTS = {"rule": "endpoints"}
REFINE_DEFAULTS = {"enabled": True, "estimator": "OLS"}


def _expect_mapping(obj, path):
    if not isinstance(obj, dict):
        raise ConfigError("expected an object", path)
    return obj

def _get(obj, key, path, required=True, default=None):
    if key not in obj:
        if required:
            raise ConfigError("missing required key", f"{path}.{key}" if path else key)
        return default
    return obj[key]


def _number(value, path, minimum=None, maximum=None, strict_min=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError("expected a number", path)
    value = float(value)
    if not np.isfinite(value):
        raise ConfigError("must be finite", path)
    if minimum is not None:
        if strict_min and value <= minimum:
            raise ConfigError(f"must be > {minimum:g}", path)
        if not strict_min and value < minimum:
            raise ConfigError(f"must be >= {minimum:g}", path)
    if maximum is not None and value > maximum:
        raise ConfigError(f"must be <= {maximum:g}", path)
    return value


def _integer(value, path, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError("expected an integer", path)
    if minimum is not None and value < minimum:
        raise ConfigError(f"must be >= {minimum}", path)
    return int(value)


def _vector(value, path, length=None):
    if not isinstance(value, (list, tuple)):
        raise ConfigError("expected an array of numbers", path)
    try:
        arr = np.array([_number(v, f"{path}[{i}]") for i, v in enumerate(value)])
    except ConfigError:
        raise
    if length is not None and arr.size != length:
        raise ConfigError(f"expected length {length}, got {arr.size}", path)
    return arr


def _matrix(value, path, size):
    """Accept a nested row list or a flat row-major list."""
    if not isinstance(value, (list, tuple)) or len(value) == 0:
        raise ConfigError("expected a matrix (nested rows or flat row-major)", path)
    if all(isinstance(r, (list, tuple)) for r in value):
        rows = [_vector(r, f"{path}[{i}]", length=size) for i, r in enumerate(value)]
        if len(rows) != size:
            raise ConfigError(f"expected {size} rows, got {len(rows)}", path)
        return np.vstack(rows)
    flat = _vector(value, path, length=size * size)
    return flat.reshape(size, size)


@dataclass(frozen=True)
class ProblemConfig:
    """Fully validated study configuration; builds PopulationProblem objects."""

    model_name: Optional[str]
    model_expression: Optional[str]
    model_degree: Optional[int]
    p: int
    beta0: np.ndarray
    domain: tuple
    sigma2: float
    h_text: Optional[str]
    kernel: str
    lam: float
    gamma: float
    scale: Optional[float]
    table: Optional[list]
    Vp: np.ndarray
    criterion_type: str
    criterion_c: Optional[np.ndarray]
    density_degree: int = DENSITY_DEFAULTS["degree"]
    density_restarts: int = DENSITY_DEFAULTS["restarts"]
    quad_nodes: int = DENSITY_DEFAULTS["quad_nodes"]
    seed: int = DENSITY_DEFAULTS["seed"]
    design_n: Optional[int] = None
    design_rule: str = DESIGN_DEFAULTS["rule"]
    refine_enabled: bool = REFINE_DEFAULTS["enabled"]
    refine_estimator: str = REFINE_DEFAULTS["estimator"]

    @classmethod
    def from_dict(cls, doc) -> "ProblemConfig":
        doc = _expect_mapping(doc, "")

        mdl = _expect_mapping(_get(doc, "model", ""), "model")
        name = mdl.get("name")
        expression = mdl.get("expression")
        if (name is None) == (expression is None):
            raise ConfigError("give exactly one of 'name' or 'expression'", "model")
        degree = None
        if name is not None:
            if not isinstance(name, str):
                raise ConfigError("expected a string", "model.name")
            if "degree" in mdl:
                degree = _integer(mdl["degree"], "model.degree", minimum=1)
            model = builtin_model(name, degree)
        else:
            if not isinstance(expression, str):
                raise ConfigError("expected a string", "model.expression")
            p_decl = _integer(_get(mdl, "p", "model"), "model.p", minimum=1)
            model = parse_model_expression(expression, p_decl)
        if "p" in mdl:
            p_decl = _integer(mdl["p"], "model.p", minimum=1)
            if p_decl != model.p:
                raise ConfigError(
                    f"declared p={p_decl} but the model has {model.p} parameters",
                    "model.p",
                )
        beta0 = _vector(_get(mdl, "beta0", "model"), "model.beta0", length=model.p)

        dom = _vector(_get(doc, "domain", ""), "domain", length=2)
        if dom[1] <= dom[0]:
            raise ConfigError("window must satisfy hi > lo", "domain")

        noi = _expect_mapping(_get(doc, "noise", ""), "noise")
        sigma2 = _number(_get(noi, "sigma2", "noise"), "noise.sigma2", minimum=0.0)
        h_text = noi.get("h")
        if h_text is not None and not isinstance(h_text, str):
            raise ConfigError("expected an expression string", "noise.h")

        cor = _expect_mapping(_get(doc, "correlation", ""), "correlation")
        kernel = _get(cor, "kernel", "correlation")
        gamma = _number(_get(cor, "gamma", "correlation"), "correlation.gamma", 0.0, 1.0)
        lam = 1.0
        if kernel != "user-table" or "lambda" in cor:
            lam = _number(
                _get(cor, "lambda", "correlation", required=kernel != "user-table", default=1.0),
                "correlation.lambda",
                minimum=0.0,
                strict_min=True,
            )
        scale = cor.get("scale")
        if scale is not None:
            scale = _number(scale, "correlation.scale", minimum=0.0, strict_min=True)
        table = cor.get("table")
        if table is not None:
            table = _expect_mapping(table, "correlation.table")
            lags = _vector(_get(table, "lags", "correlation.table"), "correlation.table.lags")
            vals = _vector(
                _get(table, "values", "correlation.table"), "correlation.table.values",
                length=lags.size,
            )
            table = {"lags": lags.tolist(), "values": vals.tolist()}

        pop = _expect_mapping(_get(doc, "population", ""), "population")
        Vp = _matrix(_get(pop, "Vp", "population"), "population.Vp", model.p)

        cri = _expect_mapping(_get(doc, "criterion", ""), "criterion")
        ctype = _get(cri, "type", "criterion")
        c_vec = cri.get("c")
        if c_vec is not None:
            c_vec = _vector(c_vec, "criterion.c", length=model.p)

        den = _expect_mapping(doc.get("density", {}), "density")
        density_degree = _integer(
            den.get("degree", DENSITY_DEFAULTS["degree"]), "density.degree", minimum=0
        )
        density_restarts = _integer(
            den.get("restarts", DENSITY_DEFAULTS["restarts"]), "density.restarts", minimum=1
        )
        quad_nodes = _integer(
            den.get("quad_nodes", DENSITY_DEFAULTS["quad_nodes"]), "density.quad_nodes", minimum=3
        )
        seed = _integer(den.get("seed", DENSITY_DEFAULTS["seed"]), "density.seed", minimum=0)

        des = _expect_mapping(doc.get("design", {}), "design")
        design_n = des.get("n")
        if design_n is not None:
            design_n = _integer(design_n, "design.n", minimum=1)
        design_rule = des.get("rule", DESIGN_DEFAULTS["rule"])
        if design_rule not in DESIGN_RULES:
            raise ConfigError(
                f"rule must be one of {', '.join(DESIGN_RULES)}", "design.rule"
            )

        ref = _expect_mapping(doc.get("refine", {}), "refine")
        refine_enabled = ref.get("enabled", REFINE_DEFAULTS["enabled"])
        if not isinstance(refine_enabled, bool):
            raise ConfigError("expected true or false", "refine.enabled")
        refine_estimator = ref.get("estimator", REFINE_DEFAULTS["estimator"])
        if str(refine_estimator).upper() not in ("OLS", "WLS"):
            raise ConfigError("estimator must be OLS or WLS", "refine.estimator")

        cfg = cls(
            model_name=name,
            model_expression=expression,
            model_degree=degree,
            p=model.p,
            beta0=beta0,
            domain=(float(dom[0]), float(dom[1])),
            sigma2=sigma2,
            h_text=h_text,
            kernel=kernel,
            lam=lam,
            gamma=gamma,
            scale=scale,
            table=table,
            Vp=Vp,
            criterion_type=ctype,
            criterion_c=c_vec,
            density_degree=density_degree,
            density_restarts=density_restarts,
            quad_nodes=quad_nodes,
            seed=seed,
            design_n=design_n,
            design_rule=design_rule,
            refine_enabled=refine_enabled,
            refine_estimator=str(refine_estimator).upper(),
        )
        # Building the problem exercises every component validator (kernel
        # names, criterion shape, Vp eigenvalues, model validity at beta0),
        # so a returned config is known-good end to end.
        problem = cfg.build_problem()
        try:
            problem.criterion_vector()
        except UnsupportedCriterionError as exc:
            raise ConfigError(str(exc), "criterion.type") from None
        QuadratureSpec(nodes=cfg.quad_nodes)
        return cfg

    def build_model(self):
        if self.model_name is not None:
            return builtin_model(self.model_name, self.model_degree)
        return parse_model_expression(self.model_expression, self.p)

    def build_problem(self) -> PopulationProblem:
        model = self.build_model()
        if self.h_text is not None:
            noise = NoiseSpec.from_expression(self.sigma2, self.h_text)
        else:
            noise = NoiseSpec(sigma2=self.sigma2)
        table = None
        if self.table is not None:
            table = (np.array(self.table["lags"]), np.array(self.table["values"]))
        correlation = CorrelationSpec(
            kernel=self.kernel, gamma=self.gamma, lam=self.lam,
            scale=self.scale, table=table,
        )
        population = PopulationSpec(beta0=self.beta0, Vp=self.Vp)
        criterion = Criterion(type=self.criterion_type, c=self.criterion_c)
        return PopulationProblem(
            model=model, noise=noise, correlation=correlation,
            population=population, domain=self.domain, criterion=criterion,
        )

    @property
    def quad(self) -> QuadratureSpec:
        return QuadratureSpec(nodes=self.quad_nodes)

    def with_overrides(self, seed=None, quad_nodes=None) -> "ProblemConfig":
        out = self
        if seed is not None:
            out = replace(out, seed=_integer(seed, "density.seed", minimum=0))
        if quad_nodes is not None:
            out = replace(
                out, quad_nodes=_integer(quad_nodes, "density.quad_nodes", minimum=3)
            )
            QuadratureSpec(nodes=out.quad_nodes)
        return out

    def to_dict(self) -> dict:
        """Resolved configuration with every default filled in."""
        mdl = {}
        if self.model_name is not None:
            mdl["name"] = self.model_name
            if self.model_degree is not None:
                mdl["degree"] = self.model_degree
        else:
            mdl["expression"] = self.model_expression
        mdl["p"] = self.p
        mdl["beta0"] = list(self.beta0)
        noise = {"sigma2": self.sigma2}
        if self.h_text is not None:
            noise["h"] = self.h_text
        correlation = {"kernel": self.kernel, "gamma": self.gamma, "lambda": self.lam}
        if self.scale is not None:
            correlation["scale"] = self.scale
        if self.table is not None:
            correlation["table"] = {
                "lags": list(self.table["lags"]),
                "values": list(self.table["values"]),
            }
        criterion = {"type": self.criterion_type}
        if self.criterion_c is not None:
            criterion["c"] = list(self.criterion_c)
        out = {
            "model": mdl,
            "domain": list(self.domain),
            "noise": noise,
            "correlation": correlation,
            "population": {"Vp": [list(row) for row in self.Vp]},
            "criterion": criterion,
            "density": {
                "degree": self.density_degree,
                "restarts": self.density_restarts,
                "quad_nodes": self.quad_nodes,
                "seed": self.seed,
            },
            "design": {"rule": self.design_rule},
            "refine": {
                "enabled": self.refine_enabled,
                "estimator": self.refine_estimator,
            },
        }
        if self.design_n is not None:
            out["design"]["n"] = self.design_n
        return out


def load_config(source) -> ProblemConfig:
    """Load and validate a config from a JSON file path or a plain dict."""
    if isinstance(source, dict):
        return ProblemConfig.from_dict(source)
    path = Path(source)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    return ProblemConfig.from_dict(doc)


def fixture_path(name) -> Path:
    """Path of a shipped example configuration or design file.

    ``fixture_path("lanicor_auc.json")`` or
    ``fixture_path("designs/lanicor_clinical.json")``.
    """
    path = Path(__file__).parent / "fixtures" / name
    if not path.exists():
        raise ConfigError(f"no shipped fixture named {name!r}")
    return path


def load_design_points(source) -> np.ndarray:
    """Load design points from a JSON array file (or a {'points': []} object)."""
    path = Path(source)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read design file {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"design file {path} is not valid JSON: {exc}") from None
    if isinstance(doc, dict) and "points" in doc:
        doc = doc["points"]
    if not isinstance(doc, list):
        raise ConfigError(f"design file {path} must hold a JSON array of times")
    return _vector(doc, "points")
