#!/usr/bin/env python3
# -*- coding: utf-8 -*-
'''
Created on 2 March 2026

Copyright © 2026 BayFactor developers

This program is free software; you can redistribute it and/or
modify it under the terms of the GNU General Public License
version 2 as published by the Free Software Foundation.

This program is distributed in the hope that it will be useful,
but WITHOUT ANY WARRANTY; without even the implied warranty of
MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
GNU General Public License for more details.

You should have received a copy of the GNU General Public License
along with this program; if not, see http://www.gnu.org/licenses/.
'''

import json
import logging
import os
import unittest
from unittest import mock

from click.testing import CliRunner
import numpy
import pandas
import timeout_decorator

import bayfactor
from bayfactor.cli import checks
from bayfactor.cli.main import cli, load_model
from bayfactor.data import load_csv, load_features
from bayfactor.model import kaiser_dimension, predict

logging.getLogger().setLevel(logging.DEBUG)

CONFIG = """
[FIT]
max_iter = 2000

[GIBBS]
n_iter = 300
burn_in = 100
thin = 1
n_chains = 1

[SIMULATION]
replications = 1
m_values = 0
"""


class TestCommandLine(unittest.TestCase):

    def setUp(self):
        self.runner = CliRunner()

    def invoke(self, *args):
        """ runs the command line with the test configuration file """
        return self.runner.invoke(cli, ["--config", "test.ini"] + list(args))

    def prepare(self, outcome="linear"):
        """ writes the configuration and a small simulated data set in the current directory """
        with open("test.ini", "w") as f:
            f.write(CONFIG)
        result = self.invoke("simulate", "--n", "40", "--m", "10", "--p", "20", "--seed", "1",
                             "--outcome", outcome, "--out", "train.csv", "--groups-out", "groups.txt",
                             "--test-out", "test.csv", "--truth-out", "truth.json")
        self.assertEqual(result.exit_code, 0, result.output)

    def test_version(self):
        result = self.runner.invoke(cli, ["--version"])
        self.assertEqual(result.exit_code, 0)
        self.assertIn(bayfactor.__version__, result.output)

    def test_simulate(self):
        with self.runner.isolated_filesystem():
            self.prepare()
            data = load_csv("train.csv", "groups.txt")
            self.assertEqual((data.n, data.m, data.p), (40, 10, 20))
            self.assertEqual(len(load_features("test.csv")), 1000)
            with open("truth.json") as f:
                truth = json.load(f)
            self.assertEqual(len(truth["B"]), truth["d"] * 20)

    @timeout_decorator.timeout(300)
    def test_fit_and_predict(self):
        with self.runner.isolated_filesystem():
            self.prepare()
            result = self.invoke("fit", "--input", "train.csv", "--groups", "groups.txt", "--method", "vb",
                                 "--out", "model.json", "--report", "report.json")
            self.assertEqual(result.exit_code, 0, result.output)

            model = load_model("model.json")
            self.assertEqual(model["method"], "vb")
            data = load_csv("train.csv", "groups.txt").standardize()
            self.assertEqual(model["d"], kaiser_dimension(data.X, data.n))
            self.assertEqual(model["posterior"]["kind"], "linear")
            with open("report.json") as f:
                report = json.load(f)
            self.assertEqual(report["runtime_ms"], 0)

            # plug-in predictions are the rule applied on the training scale
            result = self.invoke("predict", "--model", "model.json", "--input", "test.csv", "--out", "plugin.csv")
            self.assertEqual(result.exit_code, 0, result.output)
            tr = model["transform"]
            expected = tr.invert_y(predict(model["rule"], tr.apply(load_features("test.csv"))))
            numpy.testing.assert_allclose(pandas.read_csv("plugin.csv")["yhat"], expected, rtol=1e-12)

            for out in ("mc1.csv", "mc2.csv"):
                result = self.invoke("predict", "--model", "model.json", "--input", "test.csv",
                                     "--predict-mode", "mc", "--mc-draws", "200", "--seed", "3", "--out", out)
                self.assertEqual(result.exit_code, 0, result.output)
            with open("mc1.csv") as f1, open("mc2.csv") as f2:
                self.assertEqual(f1.read(), f2.read())
            self.assertEqual(list(pandas.read_csv("mc1.csv").columns), ["yhat", "se"])

            result = self.invoke("predict", "--model", "model.json", "--input", "test.csv",
                                 "--predict-mode", "taylor", "--out", "taylor.csv")
            self.assertEqual(result.exit_code, 0, result.output)
            self.assertEqual(len(pandas.read_csv("taylor.csv")), 1000)

    @timeout_decorator.timeout(300)
    def test_kaiser_with_few_labels(self):
        with self.runner.isolated_filesystem():
            with open("test.ini", "w") as f:
                f.write(CONFIG)
            result = self.invoke("simulate", "--n", "5", "--m", "200", "--p", "40", "--seed", "2",
                                 "--out", "train.csv")
            self.assertEqual(result.exit_code, 0, result.output)
            result = self.invoke("fit", "--input", "train.csv", "--max-iter", "200", "--out", "model.json")
            self.assertEqual(result.exit_code, 0, result.output)
            self.assertLessEqual(load_model("model.json")["d"], 4)

    def test_fit_is_reproducible(self):
        with self.runner.isolated_filesystem():
            self.prepare()
            for out in ("a.json", "b.json"):
                result = self.invoke("fit", "--input", "train.csv", "--d", "2", "--seed", "4", "--out", out)
                self.assertEqual(result.exit_code, 0, result.output)
            with open("a.json") as fa, open("b.json") as fb:
                text = fa.read()
                self.assertEqual(text, fb.read())
            # the model file is written in canonical form
            self.assertEqual(json.dumps(json.loads(text), sort_keys=True, indent=1) + "\n", text)

    @timeout_decorator.timeout(300)
    def test_other_methods(self):
        with self.runner.isolated_filesystem():
            self.prepare()
            for method in ("mle", "two-step", "ridge", "eb-vb"):
                result = self.invoke("fit", "--input", "train.csv", "--groups", "groups.txt", "--d", "2",
                                     "--method", method, "--out", method + ".json")
                self.assertEqual(result.exit_code, 0, "%s: %s" % (method, result.output))
                self.assertEqual(load_model(method + ".json")["rule"].p, 20)
            self.assertIsNone(load_model("ridge.json")["params"])

            # Monte Carlo predictions need a posterior
            result = self.invoke("predict", "--model", "mle.json", "--input", "test.csv",
                                 "--predict-mode", "mc", "--out", "pred.csv")
            self.assertEqual(result.exit_code, 2)

            result = self.invoke("fit", "--input", "train.csv", "--d", "1", "--method", "gibbs",
                                 "--out", "gibbs.json", "--draws", "draws.csv")
            self.assertEqual(result.exit_code, 0, result.output)
            self.assertEqual(len(pandas.read_csv("draws.csv")), 200)

    @timeout_decorator.timeout(300)
    def test_binomial(self):
        with self.runner.isolated_filesystem():
            self.prepare("binomial")
            result = self.invoke("fit", "--input", "train.csv", "--outcome", "binomial", "--method", "ridge",
                                 "--out", "model.json")
            self.assertEqual(result.exit_code, 2)
            self.assertFalse(os.path.exists("model.json"))

            result = self.invoke("fit", "--input", "train.csv", "--outcome", "binomial", "--d", "2",
                                 "--out", "model.json")
            self.assertEqual(result.exit_code, 0, result.output)
            self.assertEqual(load_model("model.json")["posterior"]["kind"], "binomial")
            result = self.invoke("predict", "--model", "model.json", "--input", "test.csv",
                                 "--predict-mode", "mc", "--mc-draws", "100", "--out", "prob.csv")
            self.assertEqual(result.exit_code, 0, result.output)
            prob = pandas.read_csv("prob.csv")["yhat"]
            self.assertTrue(numpy.all((prob > 0) & (prob < 1)))

    def test_bad_input(self):
        with self.runner.isolated_filesystem():
            self.prepare()
            result = self.invoke("fit", "--input", "missing.csv", "--out", "model.json")
            self.assertEqual(result.exit_code, 2)
            result = self.invoke("fit", "--input", "train.csv", "--d", "0", "--out", "model.json")
            self.assertEqual(result.exit_code, 2)

            result = self.invoke("fit", "--input", "train.csv", "--d", "1", "--out", "model.json")
            self.assertEqual(result.exit_code, 0, result.output)
            # fewer columns than the model
            pandas.read_csv("test.csv").iloc[:, 5:].to_csv("narrow.csv", index=False)
            result = self.invoke("predict", "--model", "model.json", "--input", "narrow.csv", "--out", "pred.csv")
            self.assertEqual(result.exit_code, 2)
            self.assertIn("features", result.output)

            with open("other.json", "w") as f:
                json.dump({"format": "something else"}, f)
            result = self.invoke("predict", "--model", "other.json", "--input", "test.csv", "--out", "pred.csv")
            self.assertEqual(result.exit_code, 2)

    def test_standardize(self):
        with self.runner.isolated_filesystem():
            self.prepare()
            result = self.invoke("standardize", "--input", "test.csv", "--out", "std.csv",
                                 "--transform-out", "transform.json")
            self.assertEqual(result.exit_code, 0, result.output)
            data = load_csv("std.csv")
            numpy.testing.assert_allclose(data.X.mean(axis=0), 0, atol=1e-10)
            numpy.testing.assert_allclose(data.X.std(axis=0), 1, rtol=1e-10)
            self.assertTrue(os.path.exists("transform.json"))

    @timeout_decorator.timeout(300)
    def test_gibbs_check(self):
        with self.runner.isolated_filesystem():
            self.prepare()
            result = self.invoke("gibbs-check", "--input", "train.csv", "--d", "1", "--out", "rules.csv",
                                 "--trace-out", "trace.csv")
            self.assertIn(result.exit_code, (0, 1), result.output)
            self.assertIn("correlation", result.output)
            self.assertEqual(list(pandas.read_csv("rules.csv").columns), ["vb", "gibbs"])
            self.assertEqual(list(pandas.read_csv("trace.csv").columns), ["name", "mean", "variance", "lag1"])

    def test_benchmark(self):
        with self.runner.isolated_filesystem():
            self.prepare()
            result = self.invoke("benchmark", "--scenario", "1", "--method", "null", "--out", "bench.csv",
                                 "--summary", "summary.csv")
            self.assertEqual(result.exit_code, 0, result.output)
            self.assertIn("1 cells, 0 failed", result.output)
            self.assertEqual(len(pandas.read_csv("bench.csv")), 1)
            self.assertEqual(len(pandas.read_csv("summary.csv")), 1)

    def test_check(self):
        result = self.runner.invoke(cli, ["check", "--criterion", "truncated-symmetric"])
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertIn("truncated-symmetric", result.output)
        self.assertIn("PASS", result.output)
        self.assertNotIn("pg-moments", result.output)

        with mock.patch.dict(checks.CRITERIA, {"truncated-symmetric": lambda seed: (False, "forced")}):
            result = self.runner.invoke(cli, ["check", "--criterion", "truncated-symmetric"])
        self.assertEqual(result.exit_code, 1)
        self.assertIn("FAIL", result.output)
        self.assertIn("forced", result.output)


class TestChecks(unittest.TestCase):

    def test_subset(self):
        results = checks.run_check(["prediction-degenerate", "truncated-symmetric"], seed=1)
        self.assertEqual([r.name for r in results], ["truncated-symmetric", "prediction-degenerate"])
        self.assertTrue(all(r.passed for r in results))

    def test_library_error_fails(self):
        def broken(seed):
            raise checks.BayFactorError("no luck")

        with mock.patch.dict(checks.CRITERIA, {"pg-moments": broken}):
            res, = checks.run_check(["pg-moments"])
        self.assertFalse(res.passed)
        self.assertIn("no luck", res.detail)

    def test_registry(self):
        for name in ("gibbs-conditionals", "scenario2-qualitative", "truncated-rejection", "determinism"):
            self.assertIn(name, checks.CRITERIA)
        self.assertEqual(checks.ELBO_INSTANCES, 100)
        self.assertEqual(checks.GIBBS_INSTANCES, 10)

    @timeout_decorator.timeout(300)
    def test_gibbs_conditionals(self):
        passed, detail = checks.check_gibbs_conditionals(0)
        self.assertTrue(passed, detail)

    @timeout_decorator.timeout(300)
    def test_truncated_rejection(self):
        with mock.patch.object(checks, "REJECTION_CASES", 6), mock.patch.object(checks, "REJECTION_DRAWS", 200000):
            passed, detail = checks.check_truncated_rejection(0)
        self.assertTrue(passed, detail)
        self.assertIn("6 cases", detail)

    @timeout_decorator.timeout(300)
    def test_blockwise_optimal(self):
        with mock.patch.object(checks, "BLOCK_INSTANCES", 2):
            passed, detail = checks.check_blockwise_optimal(0)
        self.assertTrue(passed, detail)

    def test_threads_restored(self):
        with mock.patch.dict(os.environ, {}, clear=False):
            os.environ.pop(checks.THREADS_ENV, None)
            with checks._threads(3):
                self.assertEqual(os.environ[checks.THREADS_ENV], "3")
            self.assertNotIn(checks.THREADS_ENV, os.environ)

    def test_determinism_detects_changes(self):
        runs = iter([(pandas.DataFrame({"a": [1.0]}), numpy.zeros(2)),
                     (pandas.DataFrame({"a": [1.0]}), numpy.zeros(2)),
                     (pandas.DataFrame({"a": [1.0]}), numpy.ones(2))])
        with mock.patch.object(checks, "_determinism_run", side_effect=lambda seed: next(runs)):
            passed, detail = checks.check_determinism(0)
        self.assertFalse(passed)
        self.assertIn("repeated run identical", detail)
        self.assertIn("4 threads differs", detail)

    @timeout_decorator.timeout(600)
    def test_determinism(self):
        passed, detail = checks.check_determinism(0)
        self.assertTrue(passed, detail)


if __name__ == "__main__":
    unittest.main()
