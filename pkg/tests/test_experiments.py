import json

import numpy as np
import pytest

from krylovlab.core import CanonicalN, Legendre
from krylovlab.errors import ConfigError
from krylovlab.experiments import (
    ExperimentConfig,
    build_vector,
    bundled_configs,
    evaluate_checks,
    load_config,
    parse_vector_spec,
    run_experiment,
)
from krylovlab.report import rows_to_csv


class TestConfig:
    def test_bundled_configs_validate(self):
        names = bundled_configs()
        assert "sec2.6-baseline" in names and "gap-right-shift" in names
        for name in names:
            load_config(name)

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown config keys"):
            ExperimentConfig.from_dict({"experiment": "x", "kind": "gap", "colour": 1})

    def test_missing_kind(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"experiment": "x"})

    def test_orders_increasing(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"experiment": "x", "kind": "sec2.6",
                                        "problem": "baseline", "orders": [5, 3]})

    def test_sigma_above_xi(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"experiment": "x", "kind": "cg", "operator": "diag:1/n",
                                        "datum": "unit:1", "xi": 1.0, "sigma_list": [2.0]})

    def test_unknown_operator(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"experiment": "x", "kind": "gmres", "operator": "foo",
                                        "datum": "unit:1"})

    def test_load_from_path(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"experiment": "c", "kind": "gmres", "operator": "diag:1/n",
                                    "datum": "rule:1/n^2:10", "N_max": 5}))
        assert load_config(str(path)).experiment == "c"

    def test_bad_json(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text("{")
        with pytest.raises(ConfigError):
            load_config(str(path))

    def test_missing(self):
        with pytest.raises(ConfigError):
            load_config("does-not-exist")


class TestVectors:
    def test_parse(self):
        assert parse_vector_spec("unit:3") == {"unit": 3}
        assert parse_vector_spec("rule:1/n:30") == {"rule": "1/n", "length": 30}
        assert parse_vector_spec("function:x^2") == {"function": "x^2"}
        with pytest.raises(ConfigError):
            parse_vector_spec("blob:1")

    def test_build(self):
        v = build_vector(CanonicalN(), "rule:1/n:3")
        np.testing.assert_allclose(v.coeffs.real, [1, 0.5, 1 / 3])
        w = build_vector(Legendre(), "function:x:4")
        assert w.norm() == pytest.approx(1 / np.sqrt(3))

    def test_named_needs_grid(self):
        with pytest.raises(ConfigError):
            build_vector(CanonicalN(), "named:gaussian")


class TestRuns:
    def _gmres(self, **extra):
        data = {"experiment": "t", "kind": "gmres", "operator": "diag:1/n",
                "solution": "rule:1/n:20", "orders": [1, 5, 10, 20]}
        data.update(extra)
        return ExperimentConfig.from_dict(data)

    def test_gmres_rows_and_checks(self):
        cfg = self._gmres(checks=[{"name": "res", "column": "res", "rows": "final", "max": 1e-10},
                                  {"name": "mono", "column": "err", "monotone": "nonincreasing"}])
        res = run_experiment(cfg)
        assert [r["N"] for r in res.rows] == [1, 5, 10, 20]
        assert res.summary["ok"]

    def test_parallel_output_is_identical(self):
        cfg = ExperimentConfig.from_dict({"experiment": "t", "kind": "a5", "problem": "volterra",
                                          "basis": "legendre", "orders": [1, 2, 3, 4, 5]})
        a = rows_to_csv(run_experiment(cfg, jobs=1).rows)
        b = rows_to_csv(run_experiment(cfg, jobs=3).rows)
        assert a == b

    def test_failed_check_reports_witness(self):
        cfg = self._gmres(checks=[{"name": "tight", "column": "res", "max": 1e-30}])
        chk = run_experiment(cfg).summary["checks"][0]
        assert not chk["holds"] and chk["witness"] > 1e-30


class TestChecks:
    ROWS = [{"N": n, "x": 1.0 / n} for n in (1, 2, 3, 4)]

    def test_selection(self):
        out = evaluate_checks(self.ROWS, ["N", "x"], [
            {"column": "x", "rows": {"from_N": 3}, "max": 0.34},
            {"column": "x", "rows": {"last": 2}, "min": 0.25},
            {"column": "x*N", "approx": 1.0, "tol": 1e-12},
            {"column": "x", "monotone": "decreasing"},
            {"column": "x", "max_ratio": 4.0},
        ], {})
        assert all(c["holds"] for c in out)

    def test_summary_equals(self):
        out = evaluate_checks([], [], [{"column": "summary.s", "equals": [3, 6]}], {"s": [3, 6]})
        assert out[0]["holds"]

    def test_empty_selection_fails(self):
        out = evaluate_checks(self.ROWS, ["N", "x"], [{"column": "x", "rows": {"N": [9]}, "max": 1}], {})
        assert not out[0]["holds"]
