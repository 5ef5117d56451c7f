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
from unittest import mock

import numpy

from bayfactor.data import Dataset
from bayfactor.errors import DimensionMismatch, SingularDraw, SingularDrawCovariance
from bayfactor.model import FactorParams, induced_coefficients
from bayfactor.vb import default_hyperparams, fit_vb, plugin_rule, bayes_rule_mc, predict_bayes_mc, \
    bayes_rule_taylor, predict_bayes_taylor, taylor_psi_term
from bayfactor.vb import predict
from bayfactor.vb.predict import taylor_loading_term, batch_coefficients, sample_coefficients, draw_coefficients

logging.getLogger().setLevel(logging.DEBUG)


def fitted_state(seed=0, n=40, m=10, p=8, d=2):
    rng = numpy.random.default_rng(seed)
    lam = rng.standard_normal((n + m, d))
    X = lam @ rng.standard_normal((d, p)) + rng.standard_normal((n + m, p))
    y = lam[:n] @ rng.standard_normal(d) + rng.standard_normal(n)
    data = Dataset(X, y, numpy.ones(p, dtype=int)).standardize()
    state, _ = fit_vb(data, default_hyperparams(d), tol=1e-8, seed=seed)
    return state, data


def coefficients(B, beta, psi):
    return induced_coefficients(FactorParams(B, beta, psi)).coefficients


class TestMonteCarlo(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.state, cls.data = fitted_state()

    def test_degenerate_draws_give_plugin(self):
        rule, se = bayes_rule_mc(self.state, 20, seed=1, variance_scale=0.0)
        numpy.testing.assert_allclose(rule.coefficients, plugin_rule(self.state).coefficients,
                                      rtol=0, atol=1e-10)
        numpy.testing.assert_allclose(se, 0, atol=1e-10)

    def test_batch_matches_single(self):
        rng = numpy.random.default_rng(2)
        B = rng.standard_normal((3, 2, 6))
        beta = rng.standard_normal((3, 2))
        psi = rng.uniform(0.3, 1, (3, 6))
        batch = batch_coefficients(B, beta, psi)
        for t in range(3):
            numpy.testing.assert_allclose(batch[t], coefficients(B[t], beta[t], psi[t]), rtol=1e-10)

    def test_seeded(self):
        a = sample_coefficients(self.state, 50, seed=3)
        numpy.testing.assert_array_equal(a, sample_coefficients(self.state, 50, seed=3))
        self.assertFalse(numpy.allclose(a, sample_coefficients(self.state, 50, seed=4)))

    def test_predictions(self):
        Xnew = self.data.X[:5]
        pred, se = predict_bayes_mc(self.state, Xnew, 400, seed=5)
        rule, _ = bayes_rule_mc(self.state, 400, seed=5)
        numpy.testing.assert_allclose(pred, Xnew @ rule.coefficients, rtol=1e-10, atol=1e-12)
        self.assertTrue(numpy.all(se > 0))
        with self.assertRaises(DimensionMismatch):
            predict_bayes_mc(self.state, Xnew[:, :3])

    def test_single_draw(self):
        pred, se = predict_bayes_mc(self.state, self.data.X[:3], n_draws=1, seed=0)
        again, _ = predict_bayes_mc(self.state, self.data.X[:3], n_draws=1, seed=0)
        numpy.testing.assert_array_equal(pred, again)
        self.assertTrue(numpy.all(numpy.isfinite(pred)))
        self.assertTrue(numpy.all(numpy.isnan(se)))

    def test_singular_draw_is_flagged(self):
        # the first draw has I + BΨ⁻¹Bᵀ = 0
        B = numpy.ones((2, 1, 1))
        beta = numpy.ones((2, 1))
        psi = numpy.array([[-1.0], [1.0]])
        coefs, ok = draw_coefficients(B, beta, psi)
        numpy.testing.assert_array_equal(ok, [False, True])
        self.assertAlmostEqual(coefs[1, 0], 0.5)
        with self.assertRaises(SingularDraw):
            batch_coefficients(B, beta, psi)

    def test_singular_draws_are_redrawn(self):
        real = predict.draw_coefficients
        sizes = []

        def flaky(*args, **kwargs):
            coefs, ok = real(*args, **kwargs)
            if not sizes:
                ok = ok.copy()
                ok[:3] = False
            sizes.append(len(ok))
            return coefs, ok

        with self.assertLogs(level=logging.WARNING):
            with mock.patch("bayfactor.vb.predict.draw_coefficients", side_effect=flaky):
                coefs = sample_coefficients(self.state, 20, seed=9)
        self.assertEqual(sizes, [20, 3])
        self.assertEqual(coefs.shape, (20, self.data.p))
        self.assertTrue(numpy.all(numpy.isfinite(coefs)))

    def test_redraws_are_capped(self):
        sizes = []

        def singular(B, beta, psi, eta=None):
            sizes.append(len(psi))
            return numpy.full(psi.shape, numpy.nan), numpy.zeros(len(psi), dtype=bool)

        with mock.patch("bayfactor.vb.predict.draw_coefficients", side_effect=singular):
            with self.assertRaises(SingularDrawCovariance):
                sample_coefficients(self.state, 20, seed=9)
        self.assertLessEqual(sum(sizes), 200)

    def test_invalid_arguments(self):
        with self.assertRaises(ValueError):
            bayes_rule_mc(self.state, 0)
        with self.assertRaises(ValueError):
            bayes_rule_mc(self.state, 10, variance_scale=1.5)


class TestTaylor(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.state, cls.data = fitted_state(6)

    def test_zero_variance_is_plugin(self):
        numpy.testing.assert_allclose(bayes_rule_taylor(self.state, 0.0).coefficients,
                                      plugin_rule(self.state).coefficients, rtol=1e-12)
        numpy.testing.assert_allclose(predict_bayes_taylor(self.state, self.data.X[:3], 0.0),
                                      self.data.X[:3] @ plugin_rule(self.state).coefficients, rtol=1e-10)

    def test_psi_term_matches_differences(self):
        rng = numpy.random.default_rng(7)
        B = rng.standard_normal((2, 5))
        beta = rng.standard_normal(2)
        psi = rng.uniform(0.5, 1.5, 5)
        V = rng.uniform(0.01, 0.1, 5)
        h = 1e-3
        expected = numpy.zeros(5)
        for j in range(5):
            up, down = psi.copy(), psi.copy()
            up[j] += h
            down[j] -= h
            second = (coefficients(B, beta, up) - 2 * coefficients(B, beta, psi) +
                      coefficients(B, beta, down)) / h ** 2
            expected += 0.5 * V[j] * second
        numpy.testing.assert_allclose(taylor_psi_term(B, beta, psi, V), expected, rtol=1e-4, atol=1e-8)

    def test_loading_term_single_feature(self):
        # β̃ = βb/(b² + ψ), so ∂²β̃/∂b² = −2bβ(3ψ − b²)/(b² + ψ)³
        b, beta, psi, omega = 0.8, 0.5, 0.6, 0.04
        expected = 0.5 * omega * (-2 * b * beta * (3 * psi - b ** 2) / (b ** 2 + psi) ** 3)
        term = taylor_loading_term(numpy.array([[b]]), numpy.array([beta]), numpy.array([psi]),
                                   numpy.array([[[omega]]]))
        numpy.testing.assert_allclose(term, [expected], rtol=1e-5)

    def test_agrees_with_monte_carlo_for_small_variances(self):
        eps = 1e-6
        mc, _ = bayes_rule_mc(self.state, 4000, seed=8, variance_scale=eps)
        taylor = bayes_rule_taylor(self.state, eps)
        numpy.testing.assert_allclose(mc.coefficients, taylor.coefficients, rtol=0, atol=1e-4)

    def test_invalid_scale(self):
        with self.assertRaises(ValueError):
            bayes_rule_taylor(self.state, -0.1)


if __name__ == "__main__":
    unittest.main()
