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
import types
import unittest

import numpy
from scipy import optimize

from bayfactor.errors import InvalidDimension, DegenerateGroupSum
from bayfactor.vb import EBMode, HyperParams, default_hyperparams, eb_update, eb_update_free, \
    eb_update_constrained
from bayfactor.vb.hyper import group_sums, eb_objective_free, eb_objective_constrained
from bayfactor.data import split_groups

logging.getLogger().setLevel(logging.DEBUG)

GROUPS = numpy.array([1, 1, 1, 2, 2, 3, 3, 3, 3])


def fake_state(seed, p=9, d=2):
    """ the parts of a variational state the EB updates read, outcome column last """
    rng = numpy.random.default_rng(seed)
    A = rng.standard_normal((p + 1, d, d))
    return types.SimpleNamespace(E_inv_psi=rng.uniform(0.5, 3, p + 1),
                                 M=rng.standard_normal((p + 1, d)),
                                 Omega=0.05 * A @ numpy.swapaxes(A, 1, 2) + 0.01 * numpy.eye(d))


class TestHyperParams(unittest.TestCase):

    def test_defaults(self):
        hyper = default_hyperparams(4, 3)
        self.assertEqual(hyper.gamma_overall, 0.25)
        numpy.testing.assert_array_equal(hyper.gamma_group, numpy.ones(3))
        # prior mean of the uniquenesses
        self.assertAlmostEqual(hyper.nu / (hyper.kappa - 1), 0.5)
        self.assertIs(hyper.eb_mode, EBMode.OFF)

    def test_invalid(self):
        with self.assertRaises(InvalidDimension):
            default_hyperparams(0)
        with self.assertRaises(ValueError):
            HyperParams(1.0, [1.0, -1.0], 9, 4, 2)
        with self.assertRaises(ValueError):
            HyperParams(0.0, [1.0], 9, 4, 2)
        with self.assertRaises(ValueError):
            HyperParams(1.0, [1.0], 9, 4, 2, "sometimes")

    def test_column_variances(self):
        hyper = HyperParams(0.5, [1.0, 4.0], 9, 4, 2)
        numpy.testing.assert_allclose(hyper.column_variances([2, 1, 2]), [2.0, 0.5, 2.0, 0.5])

    def test_with_groups(self):
        hyper = HyperParams(0.5, [1.0, 4.0], 9, 4, 2)
        self.assertIs(hyper.with_groups(2), hyper)
        numpy.testing.assert_array_equal(hyper.with_groups(3).gamma_group, numpy.ones(3))


class TestEmpiricalBayes(unittest.TestCase):

    def test_free_maximizes_bound(self):
        state = fake_state(0)
        hyper = default_hyperparams(2, 3, EBMode.FREE)
        new = eb_update_free(state, hyper, GROUPS)
        gammas = new.gamma_group * new.gamma_overall
        idx = split_groups(GROUPS)
        a = group_sums(state.E_inv_psi[:9], state.M[:9], state.Omega[:9], idx)
        sizes = numpy.array([len(i) for i in idx])
        # the objective separates over the groups
        for g in range(3):
            res = optimize.minimize_scalar(lambda lg: -eb_objective_free([numpy.exp(lg)], a[g:g + 1],
                                                                         sizes[g:g + 1], 2),
                                           bounds=(-10, 10), method="bounded", options={"xatol": 1e-10})
            self.assertAlmostEqual(numpy.exp(res.x) / gammas[g], 1, delta=1e-4)
        self.assertGreaterEqual(eb_objective_free(gammas, a, sizes, 2),
                                eb_objective_free(gammas * 1.01, a, sizes, 2))

    def test_constrained_on_constraint_set(self):
        state = fake_state(1)
        hyper = default_hyperparams(2, 3, EBMode.CONSTRAINED)
        new = eb_update_constrained(state, hyper, GROUPS)
        sizes = numpy.bincount(GROUPS)[1:]
        self.assertAlmostEqual(numpy.sum(sizes * numpy.log(new.gamma_group)), 0, delta=1e-10)
        self.assertEqual(new.gamma_overall, hyper.gamma_overall)

    def test_constrained_beats_feasible_points(self):
        state = fake_state(2)
        hyper = default_hyperparams(2, 3, EBMode.CONSTRAINED)
        best = eb_update_constrained(state, hyper, GROUPS).gamma_group
        idx = split_groups(GROUPS)
        a = group_sums(state.E_inv_psi[:9], state.M[:9], state.Omega[:9], idx)
        sizes = numpy.bincount(GROUPS)[1:].astype(float)
        top = eb_objective_constrained(best, a, sizes, hyper.gamma_overall)
        rng = numpy.random.default_rng(3)
        for _ in range(1000):
            u = rng.normal(0, 1, 3)
            u -= numpy.sum(sizes * u) / sizes.sum()
            self.assertGreaterEqual(top, eb_objective_constrained(numpy.exp(u), a, sizes, hyper.gamma_overall))

    def test_constrained_matches_free_objective(self):
        # on the constraint set, both objectives differ by −(d/2)Σ|g| log γ only
        a = numpy.array([1.5, 0.4, 2.2])
        sizes = numpy.array([4.0, 3.0, 2.0])
        u = numpy.array([0.3, -0.1, 0.2])
        u -= numpy.sum(sizes * u) / sizes.sum()
        gamma, d = 0.5, 2
        free = eb_objective_free(gamma * numpy.exp(u), a, sizes, d)
        constrained = eb_objective_constrained(numpy.exp(u), a, sizes, gamma)
        self.assertAlmostEqual(free, constrained - 0.5 * d * sizes.sum() * numpy.log(gamma), delta=1e-12)

    def test_dispatch(self):
        state = fake_state(4)
        off = default_hyperparams(2, 3)
        self.assertIs(eb_update(state, off, GROUPS), off)
        free = eb_update(state, default_hyperparams(2, 3, EBMode.FREE), GROUPS)
        self.assertFalse(numpy.allclose(free.gamma_group, 1))

    def test_degenerate(self):
        state = fake_state(5)
        state.M[:] = 0
        state.Omega[:] = 0
        for update in (eb_update_free, eb_update_constrained):
            with self.assertRaises(DegenerateGroupSum):
                update(state, default_hyperparams(2, 3), GROUPS)


if __name__ == "__main__":
    unittest.main()
