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

Comparison methods: two-step factor regression and cross-validated ridge regression.
'''

from concurrent.futures import ThreadPoolExecutor
import logging

import numpy
import scipy.linalg

from bayfactor.errors import SingularScores, AllFoldsFailed, NotConverged, MissingLabels
from bayfactor.freq.mle import empirical_covariance, fa_pml, fa_mle
from bayfactor.model import PredictionRule, score_map
from bayfactor.util import max_threads

RIDGE_GRID = (1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0, 1000.0)


def two_step_fit(data, d, penalty=None):
    """
    Two-step factor regression: (1) (penalized) factor analysis of the features of
    all the rows, (2) least squares regression of y on the factor scores of the
    labeled rows. The result is expressed on the features: coefficients = Aᵀα with A
    the score map and α the regression coefficients.
    data (Dataset): standardized
    d (int): latent dimension
    penalty (PenaltyConfig or None): no shrinkage if None
    :returns: (PredictionRule)
    :raises SingularScores: if there are less than d + 2 labeled rows, or the scores are collinear
    """
    data.require_labels()
    if data.n < d + 2:
        raise SingularScores("Two-step fit needs at least %d labeled rows, got %d" % (d + 2, data.n))

    S = empirical_covariance(data, include_outcome=False, include_unlabeled=True)
    try:
        params = fa_mle(S, d) if penalty is None else fa_pml(S, d, penalty)
    except NotConverged as ex:
        logging.warning("Two-step: factor analysis did not converge, using last estimate")
        params = ex.params

    A = score_map(params)
    F = data.X_labeled @ A.T
    if numpy.linalg.matrix_rank(F) < d:
        raise SingularScores("Factor scores are collinear (rank < %d)" % (d,))
    alpha, _, _, _ = scipy.linalg.lstsq(F, data.y)
    return PredictionRule(A.T @ alpha)


def ridge_coefficients(X, y, lam):
    """
    (XᵀX + λI)⁻¹Xᵀy through the thin SVD of X (minimum-norm solution when λ = 0).
    """
    U, s, Vt = scipy.linalg.svd(X, full_matrices=False)
    keep = s > s.max() * max(X.shape) * numpy.finfo(float).eps
    w = numpy.zeros_like(s)
    w[keep] = s[keep] / (s[keep] ** 2 + lam)
    return Vt.T @ (w * (U.T @ y))


def ridge_fit(data, folds=5, grid=RIDGE_GRID, seed=0):
    """
    Ridge regression of y on the features of the labeled rows, with the penalty λ
    chosen by k-fold cross validation of the prediction mean squared error. Ties
    go to the larger λ.
    :returns: (PredictionRule)
    :raises AllFoldsFailed: if folds is larger than the number of labeled rows
    """
    data.require_labels()
    X, y = data.X_labeled, data.y
    n = X.shape[0]
    if n < 3:
        raise MissingLabels("Ridge regression needs at least 3 labeled rows, got %d" % (n,))
    if folds < 2 or folds > n:
        raise AllFoldsFailed("Cannot make %d folds out of %d rows" % (folds, n))
    grid = sorted(float(l) for l in grid)

    splits = numpy.array_split(numpy.random.default_rng(seed).permutation(n), folds)

    def fold_errors(k):
        test = splits[k]
        train = numpy.concatenate([s for i, s in enumerate(splits) if i != k])
        return [numpy.mean((y[test] - X[test] @ ridge_coefficients(X[train], y[train], lam)) ** 2)
                for lam in grid]

    with ThreadPoolExecutor(max_workers=max_threads()) as executor:
        errors = numpy.array(list(executor.map(fold_errors, range(folds))))
    pmse = errors.mean(axis=0)

    best = 0
    for i in range(len(grid)):
        if pmse[i] <= pmse[best]:
            best = i
    logging.debug("Ridge cross validation: λ = %g (PMSE %g)", grid[best], pmse[best])
    return PredictionRule(ridge_coefficients(X, y, grid[best]))
