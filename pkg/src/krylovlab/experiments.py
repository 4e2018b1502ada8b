"""Experiment configurations, their runners and declarative checks."""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .core import CanonicalN, CanonicalZ, CoeffVector, SpectralGrid, expand, sample, unit_vector
from .errors import ConfigError
from .gapmetric import krylov_gap_trace
from .operators import OPERATOR_TABLE, Rule, apply, gaussian_hat, lorentzian_hat, make_operator
from .report import column_values
from .solvers import CSV_COLUMNS, ThetaIterateConfig, cg_theta_iterates, gmres_trace, ritz_diagnostics
from .truncation import (
    A5_PROBLEMS,
    error_residual,
    run_basis_comparison,
    run_sec26,
    sec26_solution_norm,
)

KINDS = ("sec2.6", "a5", "cg", "gmres", "gap")
GAP_COLUMNS = ["N", "delta_hat", "dhat", "dw_forward", "dw_backward", "dw_hat"]
NAMED_DATA = {"gaussian": gaussian_hat, "lorentzian": lorentzian_hat}


@dataclass
class ExperimentConfig:
    experiment: str
    kind: str
    operator: str = ""
    params: dict = field(default_factory=dict)
    datum: dict | str | None = None
    solution: dict | str | None = None
    problem: str = ""
    basis: str = ""
    orders: list | None = None
    N_max: int | None = None
    window: int | None = None
    xi: float = 1.0
    sigma_list: list = field(default_factory=lambda: [0.0, 1.0])
    ref_N: int = 64
    samples: int = 512
    iters: int = 200
    seed: int = 0
    checks: list = field(default_factory=list)
    output: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(extra))}")
        for key in ("experiment", "kind"):
            if key not in data:
                raise ConfigError(f"config is missing {key!r}")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    def validate(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown kind {self.kind!r}; choose from {', '.join(KINDS)}")
        if self.orders is not None:
            orders = [int(n) for n in self.orders]
            if not orders or orders[0] < 1 or any(b <= a for a, b in zip(orders, orders[1:])):
                raise ConfigError("orders must be a strictly increasing list of positive integers")
            self.orders = orders
        if self.N_max is not None and int(self.N_max) < 1:
            raise ConfigError("N_max must be positive")
        if self.kind == "sec2.6" and self.problem not in ("baseline", "noninjective", "shift",
                                                          "volterra"):
            raise ConfigError(f"unknown section 2.6 problem {self.problem!r}")
        if self.kind == "a5":
            if self.problem not in A5_PROBLEMS:
                raise ConfigError(f"unknown basis-comparison problem {self.problem!r}")
            if self.basis not in ("legendre", "fourier", "krylov"):
                raise ConfigError(f"unknown basis {self.basis!r}")
            if self.orders is None and self.N_max is None:
                raise ConfigError("a5 runs need orders or N_max")
        if self.kind in ("cg", "gmres", "gap"):
            _operator_known(self.operator)
            if self.datum is None and self.solution is None:
                raise ConfigError("a datum or a solution is required")
        if self.kind == "cg":
            ThetaIterateConfig(xi=self.xi, sigma_list=tuple(self.sigma_list), max_N=self._n_max())
        if self.kind == "gap" and self.ref_N < max(self.orders or [1]):
            raise ConfigError("ref_N must be at least the largest order")
        for chk in self.checks:
            if "column" not in chk:
                raise ConfigError("every check names a column or expression")

    def _n_max(self):
        if self.N_max is not None:
            return int(self.N_max)
        if self.orders:
            return max(self.orders)
        return 40


def _operator_known(op_id):
    head = op_id.partition(":")[0]
    if not any(key == op_id or key.partition(":")[0] == head for key in OPERATOR_TABLE):
        raise ConfigError(f"unknown operator id {op_id!r}")


def bundled_configs():
    """Names of configs shipped with the package."""
    folder = resources.files("krylovlab") / "configs"
    return sorted(p.name[:-5] for p in folder.iterdir() if p.name.endswith(".json"))


def load_config(ref):
    """Load a config from a path or a bundled name."""
    path = Path(ref)
    if path.is_file():
        text = path.read_text()
    else:
        name = path.name[:-5] if path.name.endswith(".json") else path.name
        res = resources.files("krylovlab") / "configs" / f"{name}.json"
        if not res.is_file():
            raise ConfigError(f"no config file or bundled experiment named {ref!r}")
        text = res.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {ref}: {exc}") from exc
    return ExperimentConfig.from_dict(data)


# ---------------------------------------------------------------------------
# Data specifications
# ---------------------------------------------------------------------------


def parse_vector_spec(spec):
    """Accepts dicts or the string forms unit:k, rule:<expr>:<len>,
    function:<expr>:<len> and named:<name>."""
    if isinstance(spec, dict):
        return spec
    kind, _, rest = str(spec).partition(":")
    if kind == "unit":
        return {"unit": int(rest)}
    if kind == "named":
        return {"named": rest}
    if kind in ("rule", "function"):
        expr, _, length = rest.rpartition(":")
        if not expr:
            expr, length = rest, ""
        out = {kind: expr}
        if length:
            out["length"] = int(length)
        return out
    raise ConfigError(f"cannot parse vector spec {spec!r}")


def build_vector(basis, spec):
    spec = parse_vector_spec(spec)
    if "unit" in spec:
        return unit_vector(basis, int(spec["unit"]))
    if "named" in spec:
        if not isinstance(basis, SpectralGrid):
            raise ConfigError("named data live on spectral grids")
        if spec["named"] not in NAMED_DATA:
            raise ConfigError(f"unknown named datum {spec['named']!r}")
        return sample(basis, NAMED_DATA[spec["named"]])
    if "rule" in spec:
        if not isinstance(basis, (CanonicalN, CanonicalZ)):
            raise ConfigError("sequence rules need a sequence space")
        length = int(spec.get("length", 1))
        labels = np.asarray(basis.labels(length), dtype=float)
        return CoeffVector(basis, Rule(spec["rule"])(labels))
    if "function" in spec:
        rule = Rule(spec["function"], var="x")
        if isinstance(basis, SpectralGrid):
            return sample(basis, rule)
        length = int(spec.get("length", 16))
        return expand(basis, rule, length)
    if "values" in spec:
        return CoeffVector(basis, np.asarray(spec["values"], dtype=complex))
    raise ConfigError(f"cannot build a vector from {spec!r}")


# ---------------------------------------------------------------------------
# Runners
# ---------------------------------------------------------------------------


@dataclass
class RunResult:
    rows: list
    columns: list
    summary: dict


def _map_orders(fn, orders, jobs):
    if jobs <= 1:
        parts = [fn(n) for n in orders]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(fn, orders))
    rows = [r for part in parts for r in part]
    return sorted(rows, key=lambda r: r["N"])


def _run_sec26(cfg, jobs):
    rows, solutions = run_sec26(cfg.problem, orders=cfg.orders, N_max=cfg.N_max,
                                window=cfg.window or 2500)
    summary = {}
    if rows:
        last_N = rows[-1]["N"]
        _, er = solutions[last_N]
        summary["final"] = {k: rows[-1][k] for k in ("N", "err", "res", "sol_norm")}
        if cfg.problem != "volterra":
            summary["solution_norm"] = sec26_solution_norm()
            if er.error is not None:
                comps = np.abs(er.error.coeffs)
                summary["error_support"] = [int(i + 1) for i in np.nonzero(comps > 1e-8)[0]]
                summary["max_error_component_from_2"] = float(comps[1:].max()) if comps.size > 1 else 0.0
    return RunResult(rows, CSV_COLUMNS, summary)


def _run_a5(cfg, jobs):
    orders = cfg.orders or list(range(1, int(cfg.N_max) + 1))
    if cfg.basis == "krylov":
        rows = run_basis_comparison(cfg.problem, cfg.basis, max(orders), orders=orders)
    else:
        rows = _map_orders(lambda n: run_basis_comparison(cfg.problem, cfg.basis, n, orders=[n]),
                           orders, jobs)
    summary = {"exact_norm": float(A5_PROBLEMS[cfg.problem]["norm"])}
    if rows:
        summary["final"] = {k: rows[-1][k] for k in ("N", "err", "res", "sol_norm")}
    return RunResult(rows, CSV_COLUMNS, summary)


def _solution_and_datum(cfg, op):
    f = build_vector(op.basis, cfg.solution) if cfg.solution is not None else None
    g = apply(op, f) if f is not None else build_vector(op.basis, cfg.datum)
    return f, g


def _run_cg(cfg, jobs):
    op = make_operator(cfg.operator, **cfg.params)
    f, g = _solution_and_datum(cfg, op)
    tcfg = ThetaIterateConfig(xi=cfg.xi, sigma_list=tuple(float(s) for s in cfg.sigma_list),
                              max_N=cfg._n_max())
    trace = cg_theta_iterates(op, g, tcfg, f_true=f, experiment=cfg.experiment)
    rows = trace.csv_rows()
    if cfg.orders:
        keep = set(cfg.orders)
        rows = [r for r in rows if r["N"] in keep]
    ritz = ritz_diagnostics(trace)
    summary = {
        "converged": trace.converged,
        "ritz": {"interlacing_ok": ritz.interlacing_ok,
                 "lambda1_decreasing": ritz.lambda1_decreasing,
                 "lambda_top_increasing": ritz.lambda_top_increasing,
                 "max_residual_identity": max(ritz.residual_identity, default=0.0)},
    }
    if rows:
        summary["final"] = {k: rows[-1][k] for k in ("N", "rho0", "rho1", "rho2", "res")}
    return RunResult(rows, CSV_COLUMNS, summary)


def _run_gmres(cfg, jobs):
    op = make_operator(cfg.operator, **cfg.params)
    f, g = _solution_and_datum(cfg, op)
    steps = gmres_trace(op, g, cfg._n_max(), orders=cfg.orders, window=cfg.window)
    rows = []
    for step in steps:
        nan = float("nan")
        if f is not None:
            er = error_residual(op, f, g, step.solution)
            err, res = er.error_norm, er.residual_norm
        else:
            err, res = nan, step.residual
        rows.append({"experiment": cfg.experiment, "N": step.N, "rho0": nan, "rho1": nan,
                     "rho2": nan, "err": err, "res": res, "sol_norm": step.solution.norm(),
                     "delta_N": nan, "ritz_min": nan, "ritz_max": nan})
    summary = {"final": {k: rows[-1][k] for k in ("N", "err", "res", "sol_norm")}} if rows else {}
    return RunResult(rows, CSV_COLUMNS, summary)


def _run_gap(cfg, jobs):
    op = make_operator(cfg.operator, **cfg.params)
    _, g = _solution_and_datum(cfg, op)
    orders = cfg.orders or [cfg._n_max()]
    rows = _map_orders(lambda n: krylov_gap_trace(op, g, [n], cfg.ref_N, cfg.samples, cfg.iters,
                                                  cfg.seed), orders, jobs)
    summary = {"ref_N": cfg.ref_N, "samples": cfg.samples, "iterations": cfg.iters,
               "seed": cfg.seed, "dw_is_certified_lower_bound": True}
    return RunResult(rows, GAP_COLUMNS, summary)


RUNNERS = {"sec2.6": _run_sec26, "a5": _run_a5, "cg": _run_cg, "gmres": _run_gmres,
           "gap": _run_gap}


def run_experiment(cfg, jobs=1):
    result = RUNNERS[cfg.kind](cfg, jobs)
    result.summary["experiment"] = cfg.experiment
    result.summary["kind"] = cfg.kind
    result.summary["rows"] = len(result.rows)
    result.summary["checks"] = evaluate_checks(result.rows, result.columns, cfg.checks,
                                               result.summary)
    result.summary["ok"] = all(c["holds"] for c in result.summary["checks"])
    return result


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------


def _select(rows, values, which):
    N = np.array([r["N"] for r in rows]) if rows and "N" in rows[0] else np.arange(len(rows))
    if which in (None, "all"):
        return values
    if which == "final":
        return values[-1:]
    if isinstance(which, dict):
        mask = np.ones(len(values), dtype=bool)
        if "from_N" in which:
            mask &= N >= which["from_N"]
        if "N" in which:
            mask &= np.isin(N, which["N"])
        out = values[mask]
        if "last" in which:
            out = out[-int(which["last"]):]
        return out
    raise ConfigError(f"unknown row selection {which!r}")


def evaluate_checks(rows, columns, checks, summary):
    """Evaluate declarative checks; each result carries its numeric witness."""
    results = []
    for chk in checks:
        name = chk.get("name", chk["column"])
        if chk["column"].startswith("summary."):
            node = summary
            for part in chk["column"].split(".")[1:]:
                node = node[part]
            values = np.atleast_1d(np.asarray(node, dtype=float))
            if "equals" in chk:
                holds = list(np.asarray(node).ravel()) == list(chk["equals"])
                results.append({"name": name, "holds": bool(holds), "witness": node})
                continue
        else:
            header = list(columns)
            values = column_values(header, rows, chk["column"]) if rows else np.zeros(0)
            values = _select(rows, values, chk.get("rows"))
        holds, witness = True, None
        if values.size == 0:
            holds, witness = False, "no rows selected"
        if holds and "max" in chk:
            witness = float(np.nanmax(values))
            holds &= bool(np.all(values <= chk["max"]))
        if holds and "min" in chk:
            witness = float(np.nanmin(values))
            holds &= bool(np.all(values >= chk["min"]))
        if holds and "approx" in chk:
            dev = float(np.max(np.abs(values - chk["approx"])))
            witness = dev
            holds &= dev <= chk.get("tol", 0.0)
        if holds and "monotone" in chk:
            d = np.diff(values)
            rule = chk["monotone"]
            ok = {"nonincreasing": d <= 0, "decreasing": d < 0,
                  "nondecreasing": d >= 0, "increasing": d > 0}[rule]
            witness = float(d.max() if rule in ("nonincreasing", "decreasing") else d.min()) \
                if d.size else 0.0
            holds &= bool(np.all(ok))
        if holds and "max_ratio" in chk:
            ratio = float(values.max() / values.min())
            witness = ratio
            holds &= ratio <= chk["max_ratio"]
        results.append({"name": name, "holds": bool(holds), "witness": witness})
    return results
