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
import os
import tempfile
import unittest

import numpy

from bayfactor.data import Dataset, standardize, split_groups, load_csv, load_features, write_csv, \
    Standardization, OUTCOME_BINOMIAL
from bayfactor.errors import EmptyData, ZeroVarianceColumn, RaggedRows, ParseError, UnknownGroupLabel, \
    LengthMismatch, NonContiguousLabels, MissingLabels, DimensionMismatch

logging.getLogger().setLevel(logging.DEBUG)


class TestStandardize(unittest.TestCase):

    def test_labeled_moments(self):
        rng = numpy.random.default_rng(0)
        X = rng.normal(3, 2, (15, 4))
        y = rng.normal(-1, 5, 10)
        Xs, ys, means, scales = standardize(X, y)
        numpy.testing.assert_allclose(Xs[:10].sum(axis=0), 0, atol=1e-12)
        numpy.testing.assert_allclose((Xs[:10] ** 2).sum(axis=0), 10)
        numpy.testing.assert_allclose(ys.sum(), 0, atol=1e-12)
        numpy.testing.assert_allclose((ys ** 2).sum(), 10)
        self.assertEqual(means.shape, (5,))
        # unlabeled rows use the labeled moments
        numpy.testing.assert_allclose(Xs[10:], (X[10:] - means[:-1]) / scales[:-1])

    def test_constant_column(self):
        X = numpy.ones((5, 2))
        X[:, 0] = numpy.arange(5)
        with self.assertRaises(ZeroVarianceColumn):
            standardize(X)
        with self.assertRaises(ZeroVarianceColumn):
            standardize(numpy.arange(10.0).reshape(5, 2), numpy.full(5, 2.0))

    def test_too_few_rows(self):
        with self.assertRaises(EmptyData):
            standardize(numpy.ones((1, 3)))


class TestGroups(unittest.TestCase):

    def test_split(self):
        idx = split_groups([2, 1, 2, 1, 1])
        self.assertEqual([i.tolist() for i in idx], [[1, 3, 4], [0, 2]])

    def test_gaps(self):
        with self.assertRaises(NonContiguousLabels):
            split_groups([1, 3, 3])
        with self.assertRaises(NonContiguousLabels):
            split_groups([])


class TestDataset(unittest.TestCase):

    def setUp(self):
        rng = numpy.random.default_rng(1)
        self.X = rng.standard_normal((12, 3))
        self.y = rng.standard_normal(8)

    def test_counts(self):
        data = Dataset(self.X, self.y, [1, 1, 2])
        self.assertEqual((data.n, data.m, data.n_total, data.p, data.n_groups), (8, 4, 12, 3, 2))
        self.assertEqual(data.X_unlabeled.shape, (4, 3))
        self.assertEqual(data.labeled_only().n_total, 8)

    def test_standardize_keeps_transform(self):
        data = Dataset(self.X, self.y, [1, 1, 1]).standardize()
        self.assertTrue(data.standardized)
        tr = data.transform
        numpy.testing.assert_allclose(tr.apply(self.X), data.X)
        numpy.testing.assert_allclose(tr.apply_y(self.y), data.y)
        numpy.testing.assert_allclose(tr.invert_y(data.y), self.y)
        self.assertIs(data.standardize(), data)
        back = Standardization.from_dict(tr.to_dict())
        numpy.testing.assert_array_equal(back.scales, tr.scales)

    def test_binomial_outcome_not_standardized(self):
        y = numpy.array([0, 1, 1, 0, 2, 1, 0, 1.0])
        data = Dataset(self.X, y, [1, 1, 1], OUTCOME_BINOMIAL, trials=numpy.full(12, 2)).standardize()
        numpy.testing.assert_array_equal(data.y, y)
        self.assertEqual(data.trials.shape, (12,))

    def test_invalid(self):
        with self.assertRaises(LengthMismatch):
            Dataset(self.X, self.y, [1, 1])
        with self.assertRaises(DimensionMismatch):
            Dataset(self.X[:5], self.y, [1, 1, 1])
        with self.assertRaises(ParseError):
            Dataset(self.X, numpy.full(8, 2.0), [1, 1, 1], OUTCOME_BINOMIAL)
        with self.assertRaises(MissingLabels):
            Dataset(self.X, [], [1, 1, 1]).standardize()


class TestCSV(unittest.TestCase):

    def setUp(self):
        self.dir = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.dir.cleanup()

    def _path(self, name, text=None):
        path = os.path.join(self.dir.name, name)
        if text is not None:
            with open(path, "w") as f:
                f.write(text)
        return path

    def test_unlabeled_rows_go_last(self):
        path = self._path("d.csv", "a,y,b\n1,,2\n2,1.5,3\n4,2.5,1\n")
        data = load_csv(path)
        self.assertEqual((data.n, data.m), (2, 1))
        numpy.testing.assert_array_equal(data.X, [[2, 3], [4, 1], [1, 2]])
        numpy.testing.assert_array_equal(data.y, [1.5, 2.5])
        dropped = load_csv(path, unlabeled_from_blanks=False)
        self.assertEqual((dropped.n, dropped.m), (2, 0))
        # features in file order, outcome ignored
        numpy.testing.assert_array_equal(load_features(path), [[1, 2], [2, 3], [4, 1]])

    def test_groups_file(self):
        path = self._path("d.csv", "a,b,c,y\n1,2,3,1\n2,1,0,2\n")
        data = load_csv(path, self._path("g.txt", "1\n2\n1\n"))
        numpy.testing.assert_array_equal(data.groups, [1, 2, 1])
        with self.assertRaises(LengthMismatch):
            load_csv(path, self._path("g2.txt", "1\n2\n"))
        with self.assertRaises(UnknownGroupLabel):
            load_csv(path, self._path("g3.txt", "1\n3\n1\n"))
        with self.assertRaises(UnknownGroupLabel):
            load_csv(path, self._path("g4.txt", "1\nx\n1\n"))

    def test_malformed(self):
        with self.assertRaises(ParseError):
            load_csv(self._path("m.csv", "a,y\n1,2\nfoo,3\n"))
        with self.assertRaises(RaggedRows):
            load_csv(self._path("r.csv", "a,b,y\n1,2,3\n4,5,6,7\n"))
        with self.assertRaises(EmptyData):
            load_csv(self._path("e.csv", "a,y\n"))

    def test_binomial_trials(self):
        path = self._path("b.csv", "a,y,N\n1,1,3\n2,0,1\n3,,2\n")
        data = load_csv(path, outcome=OUTCOME_BINOMIAL)
        numpy.testing.assert_array_equal(data.trials, [3, 1, 2])
        self.assertEqual(data.m, 1)

    def test_write_read(self):
        X = numpy.array([[0.1, 1 / 3], [2.0, -1.5], [7.0, 0.25]])
        path = self._path("w.csv")
        write_csv(path, X, [1.0, 2.0])
        data = load_csv(path)
        numpy.testing.assert_array_equal(data.X, X)
        self.assertEqual(data.m, 1)


if __name__ == "__main__":
    unittest.main()
