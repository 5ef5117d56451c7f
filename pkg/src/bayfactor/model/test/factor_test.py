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

import logging
import unittest

import numpy

from bayfactor.errors import DimensionMismatch, SingularCovariance, SchemaMismatch, InvalidDimension
from bayfactor.model import FactorParams, PredictionRule, induced_coefficients, predict, score_map, \
    factor_scores, count_kaiser_eigenvalues, kaiser_dimension, LINK_LOGIT

logging.getLogger().setLevel(logging.DEBUG)


def random_params(rng, d=3, p=8):
    return FactorParams(B=rng.standard_normal((d, p)), beta=rng.standard_normal(d),
                        psi=rng.uniform(0.5, 2, p), sigma2=0.7)


class TestInducedCoefficients(unittest.TestCase):

    def test_matches_direct_formula(self):
        rng = numpy.random.default_rng(0)
        params = random_params(rng)
        direct = numpy.linalg.solve(params.covariance(), params.B.T @ params.beta)
        numpy.testing.assert_allclose(induced_coefficients(params).coefficients, direct, rtol=1e-10)

    def test_regression_of_y_on_x(self):
        # population regression coefficient of y on x under the factor model
        rng = numpy.random.default_rng(1)
        params = random_params(rng, 2, 5)
        cov_xy = params.B.T @ params.beta
        numpy.testing.assert_allclose(params.covariance() @ induced_coefficients(params).coefficients, cov_xy,
                                      rtol=1e-10)

    def test_zero_outcome_loadings(self):
        params = FactorParams(numpy.ones((2, 4)), numpy.zeros(2), numpy.ones(4))
        numpy.testing.assert_array_equal(induced_coefficients(params).coefficients, numpy.zeros(4))

    def test_invalid_uniquenesses(self):
        params = FactorParams(numpy.ones((1, 3)), [1.0], [1.0, 0.0, 1.0])
        with self.assertRaises(SingularCovariance):
            induced_coefficients(params)


class TestScores(unittest.TestCase):

    def test_score_map(self):
        rng = numpy.random.default_rng(2)
        params = random_params(rng)
        # E(λ|x) = BΣ⁻¹x
        expected = params.B @ numpy.linalg.inv(params.covariance())
        numpy.testing.assert_allclose(score_map(params), expected, rtol=1e-9, atol=1e-12)
        X = rng.standard_normal((4, params.p))
        numpy.testing.assert_allclose(factor_scores(params, X), X @ expected.T, rtol=1e-9, atol=1e-12)
        with self.assertRaises(DimensionMismatch):
            factor_scores(params, X[:, :3])


class TestPredictionRule(unittest.TestCase):

    def test_predict(self):
        rule = PredictionRule([1.0, -2.0], 0.5)
        numpy.testing.assert_allclose(predict(rule, [[1, 1], [0, 2]]), [-0.5, -3.5])
        logit = PredictionRule([0.0, 0.0], 0.0, LINK_LOGIT)
        numpy.testing.assert_allclose(predict(logit, [[1, 1]]), [0.5])
        with self.assertRaises(DimensionMismatch):
            predict(rule, [[1, 2, 3]])

    def test_dict(self):
        rule = PredictionRule([0.25, 1 / 3], -1.0, LINK_LOGIT)
        back = PredictionRule.from_dict(rule.to_dict())
        numpy.testing.assert_array_equal(back.coefficients, rule.coefficients)
        self.assertEqual((back.intercept, back.link), (-1.0, LINK_LOGIT))
        with self.assertRaises(SchemaMismatch):
            PredictionRule.from_dict({"intercept": 1})

    def test_non_finite(self):
        with self.assertRaises(SingularCovariance):
            PredictionRule([1.0, numpy.nan])


class TestFactorParams(unittest.TestCase):

    def test_json(self):
        params = random_params(numpy.random.default_rng(3), 2, 3)
        back = FactorParams.from_json(params.to_json())
        numpy.testing.assert_array_equal(back.B, params.B)
        self.assertEqual(back.to_json(), params.to_json())
        with self.assertRaises(SchemaMismatch):
            FactorParams.from_dict({"d": 2, "B": [1, 2, 3], "beta": [1, 1], "psi": [1], "sigma2": 1})

    def test_shapes(self):
        with self.assertRaises(DimensionMismatch):
            FactorParams(numpy.ones((2, 3)), [1.0], numpy.ones(3))


class TestKaiser(unittest.TestCase):

    def test_count(self):
        R = numpy.diag([2.5, 1.2, 0.2, 0.1])
        self.assertEqual(count_kaiser_eigenvalues(R), 2)
        self.assertEqual(count_kaiser_eigenvalues(numpy.eye(3)), 0)

    def test_two_blocks(self):
        rng = numpy.random.default_rng(4)
        lam = rng.standard_normal((500, 2))
        X = numpy.repeat(lam, 5, axis=1) + 0.3 * rng.standard_normal((500, 10))
        self.assertEqual(kaiser_dimension(X), 2)
        # few labeled rows bound the dimension, whatever the unlabeled rows show
        self.assertEqual(kaiser_dimension(X, n_labeled=2), 1)
        self.assertEqual(kaiser_dimension(X, n_labeled=3), 2)

    def test_clamped(self):
        X = numpy.random.default_rng(5).standard_normal((5000, 4))
        self.assertGreaterEqual(kaiser_dimension(X), 1)
        with self.assertRaises(InvalidDimension):
            kaiser_dimension(numpy.ones((5, 1)))


if __name__ == "__main__":
    unittest.main()
