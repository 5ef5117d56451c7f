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
import timeout_decorator
from scipy import integrate, stats

from bayfactor.correlation import trunc_moments, rejection_moments, ball_mass, chi2_cdf, \
    truncation_mass_terms, fit_proper_corr, proper_corr_sweep, elbo_proper_corr
from bayfactor.correlation.proper import proper_corr_init, update_factors, update_loadings, update_uniquenesses
from bayfactor.data import Dataset, standardize
from bayfactor.errors import NotPD
from bayfactor.vb import default_hyperparams

logging.getLogger().setLevel(logging.DEBUG)


class TestTruncatedMoments(unittest.TestCase):

    def test_symmetric(self):
        tm = trunc_moments(numpy.zeros(1), numpy.eye(1) * 0.5)
        self.assertAlmostEqual(float(tm.mean[0]), 0, delta=1e-12)
        tm = trunc_moments(numpy.zeros(3), numpy.diag([0.2, 0.5, 1.0]))
        numpy.testing.assert_allclose(tm.mean, 0, atol=1e-12)

    def test_nearly_uniform(self):
        sigma2 = 100.0
        dens = lambda x: numpy.exp(-x ** 2 / (2 * sigma2))
        var = integrate.quad(lambda x: x ** 2 * dens(x), -1, 1)[0] / integrate.quad(dens, -1, 1)[0]
        tm = trunc_moments([0.0], [[sigma2]])
        self.assertAlmostEqual(float(tm.cov[0, 0]), var, delta=1e-6)
        self.assertAlmostEqual(float(tm.cov[0, 0]), 1 / 3, delta=1e-3)

    def test_mass(self):
        mu = numpy.array([0.3, -0.2])
        omega = numpy.array([[0.2, 0.05], [0.05, 0.1]])
        tm = trunc_moments(mu, omega)
        self.assertTrue(0 < tm.L <= 1)
        self.assertAlmostEqual(ball_mass(0.3, 2), stats.chi2.cdf(1 / 0.3, 2), delta=1e-12)
        self.assertAlmostEqual(float(chi2_cdf(2.5, 3)), stats.chi2.cdf(2.5, 3), delta=1e-12)

    def test_more_terms(self):
        mu = numpy.array([0.1, 0.4])
        omega = numpy.array([[0.2, 0.02], [0.02, 0.15]])
        a = trunc_moments(mu, omega, 50)
        b = trunc_moments(mu, omega, 100)
        numpy.testing.assert_allclose(a.mean, b.mean, atol=1e-8)
        numpy.testing.assert_allclose(a.cov, b.cov, atol=1e-8)

    @timeout_decorator.timeout(300)
    def test_matches_rejection_sampler(self):
        rng = numpy.random.default_rng(0)
        for k in range(10):
            d = 1 + k % 3
            Q, _ = numpy.linalg.qr(rng.standard_normal((d, d)))
            omega = Q * rng.uniform(0.1, 0.3, d) @ Q.T
            mu = rng.uniform(-0.5, 0.5, d)
            tm = trunc_moments(mu, omega)
            mean, cov, rate, kept = rejection_moments(mu, omega, 200000, rng)
            se = kept.std(axis=0, ddof=1) / numpy.sqrt(kept.shape[0])
            self.assertTrue(numpy.all(numpy.abs(tm.mean - mean) < 4 * se), "case %d" % (k,))
            rate_se = numpy.sqrt(rate * (1 - rate) / 200000)
            self.assertLess(abs(tm.L - rate), 4 * rate_se + 1e-12, "case %d" % (k,))
            numpy.testing.assert_allclose(tm.cov, cov, atol=0.03 * numpy.abs(cov).max())

    def test_not_pd(self):
        with self.assertRaises(NotPD):
            trunc_moments([0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]])
        with self.assertRaises(ValueError):
            trunc_moments([0.0], [[1.0]], t_max=0)

    def test_mass_terms(self):
        self.assertEqual(truncation_mass_terms(numpy.array([0.3, 0.8]), numpy.array([0.3, 0.8])), 0.0)


class TestProperCorrelation(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        rng = numpy.random.default_rng(1)
        lam = rng.standard_normal((100, 1))
        X = lam @ numpy.full((1, 6), 0.8) + 0.6 * rng.standard_normal((100, 6))
        y = lam[:, 0] + rng.standard_normal(100)
        cls.X = X
        cls.data = Dataset(X, y, numpy.ones(6, dtype=int)).standardize()
        cls.hyper = default_hyperparams(1)
        cls.state = fit_proper_corr(cls.data, cls.hyper, tol=1e-7, max_iter=500)

    def assert_not_below(self, value, reference, seed):
        self.assertGreaterEqual(value, reference - 1e-8 * abs(reference), "seed %d" % (seed,))
        return value

    def test_converges_inside_ball(self):
        state = self.state
        self.assertTrue(state.converged)
        self.assertTrue(numpy.all((state.zeta > 0) & (state.zeta < 1)))
        self.assertTrue(numpy.all(numpy.sum(state.M ** 2, axis=1) < 1))
        # every feature loads strongly and with the same sign
        self.assertTrue(numpy.all(numpy.abs(state.M[:, 0]) > 0.5))
        self.assertEqual(len(set(numpy.sign(state.M[:, 0]))), 1)

    def test_unit_variances(self):
        total = numpy.sum(self.state.M ** 2, axis=1) + numpy.trace(self.state.Omega, axis1=1, axis2=2)
        again = proper_corr_sweep(self.state, self.data.X, self.hyper.column_variances(self.data.groups)[:-1])
        total_again = numpy.sum(again.M ** 2, axis=1) + numpy.trace(again.Omega, axis1=1, axis2=2)
        numpy.testing.assert_allclose(total_again + again.zeta, 1, rtol=1e-12)
        numpy.testing.assert_allclose(total + self.state.zeta, 1, rtol=1e-12)

    def test_fixed_point(self):
        gammas = self.hyper.column_variances(self.data.groups)[:-1]
        again = proper_corr_sweep(self.state, self.data.X, gammas)
        self.assertLess(numpy.abs(again.M - self.state.M).max(), 1e-6)
        self.assertLess(numpy.abs(again.zeta - self.state.zeta).max(), 1e-6)
        self.assertTrue(numpy.isfinite(elbo_proper_corr(again, self.data.X, gammas)))

    def test_unlabeled_data(self):
        data = Dataset(self.X, [], numpy.ones(6, dtype=int))
        self.assertEqual(data.n, 0)
        state = fit_proper_corr(data, self.hyper, tol=1e-7, max_iter=500)
        # all the rows are labeled in the reference data, so both use the same moments
        numpy.testing.assert_allclose(state.M, self.state.M, rtol=1e-10, atol=1e-12)
        numpy.testing.assert_allclose(state.zeta, self.state.zeta, rtol=1e-10)

    @timeout_decorator.timeout(300)
    def test_ascent_steps_do_not_decrease_bound(self):
        gammas = default_hyperparams(1).column_variances(numpy.ones(5, dtype=int))[:-1]
        for seed in range(20):
            rng = numpy.random.default_rng(seed)
            lam = rng.standard_normal((30, 1))
            X = standardize(lam @ numpy.full((1, 5), 0.8) + 0.6 * rng.standard_normal((30, 5)))[0]
            state = proper_corr_init(X, 1, gammas, seed)
            before = elbo_proper_corr(state, X, gammas)
            for _ in range(30):
                state = update_factors(state, X)
                before = self.assert_not_below(elbo_proper_corr(state, X, gammas), before, seed)
                state = update_loadings(state, X, gammas)
                self.assert_not_below(elbo_proper_corr(state, X, gammas), before, seed)
                state = update_uniquenesses(state)
                # the projection keeps every column at unit variance
                total = numpy.sum(state.M ** 2, axis=1) + numpy.trace(state.Omega, axis1=1, axis2=2)
                numpy.testing.assert_allclose(total + state.zeta, 1, rtol=1e-12)
                before = elbo_proper_corr(state, X, gammas)


if __name__ == "__main__":
    unittest.main()
