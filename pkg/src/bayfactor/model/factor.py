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

Point parameters of the factor regression model, the linear prediction rule they
induce, factor scores and the choice of the latent dimension.

The model is x | λ ~ N(Bᵀλ, Ψ), y | λ ~ N(βᵀλ, σ²), λ ~ N(0, I_d).
'''

import dataclasses
import json
import logging

import numpy
import scipy.linalg
from scipy.special import expit

from bayfactor.errors import SingularCovariance, EigenFailure, DimensionMismatch, \
    InvalidDimension, SchemaMismatch

LINK_IDENTITY = "identity"
LINK_LOGIT = "logit"


@dataclasses.dataclass
class FactorParams:
    """
    B (array d x p): loadings of the features
    beta (array d): loadings of the outcome
    beta0 (float): intercept (logistic model only, 0 otherwise)
    psi (array p > 0): uniquenesses of the features
    sigma2 (float > 0): residual variance of the outcome
    """
    B: numpy.ndarray
    beta: numpy.ndarray
    psi: numpy.ndarray
    sigma2: float = 1.0
    beta0: float = 0.0

    def __post_init__(self):
        self.B = numpy.atleast_2d(numpy.asarray(self.B, dtype=float))
        self.beta = numpy.asarray(self.beta, dtype=float).reshape(-1)
        self.psi = numpy.asarray(self.psi, dtype=float).reshape(-1)
        self.sigma2 = float(self.sigma2)
        self.beta0 = float(self.beta0)
        d, p = self.B.shape
        if d < 1:
            raise InvalidDimension("The latent dimension must be >= 1")
        if self.beta.shape != (d,) or self.psi.shape != (p,):
            raise DimensionMismatch("Inconsistent shapes: B %s, beta %s, psi %s" %
                                    (self.B.shape, self.beta.shape, self.psi.shape))

    @property
    def d(self):
        return self.B.shape[0]

    @property
    def p(self):
        return self.B.shape[1]

    def covariance(self):
        """ :returns: (array p x p) the marginal covariance BᵀB + Ψ of the features """
        return self.B.T @ self.B + numpy.diag(self.psi)

    def to_dict(self):
        return {"d": self.d,
                "B": [float(v) for v in self.B.ravel()],
                "beta": [float(v) for v in self.beta],
                "beta0": self.beta0,
                "psi": [float(v) for v in self.psi],
                "sigma2": self.sigma2}

    @classmethod
    def from_dict(cls, doc):
        try:
            d = int(doc["d"])
            B = numpy.asarray(doc["B"], dtype=float)
            p = B.size // d
            if B.size != d * p:
                raise ValueError("B has %d entries, not a multiple of d=%d" % (B.size, d))
            return cls(B=B.reshape(d, p), beta=doc["beta"], psi=doc["psi"],
                       sigma2=doc["sigma2"], beta0=doc.get("beta0", 0.0))
        except (KeyError, TypeError, ValueError) as ex:
            raise SchemaMismatch("Invalid factor parameters document: %s" % (ex,))

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


@dataclasses.dataclass
class PredictionRule:
    """
    Linear rule ŷ = intercept + x·coefficients, passed through the link
    (identity for continuous outcomes, logit for binomial probabilities).
    """
    coefficients: numpy.ndarray
    intercept: float = 0.0
    link: str = LINK_IDENTITY

    def __post_init__(self):
        self.coefficients = numpy.asarray(self.coefficients, dtype=float).reshape(-1)
        self.intercept = float(self.intercept)
        if not numpy.all(numpy.isfinite(self.coefficients)) or not numpy.isfinite(self.intercept):
            raise SingularCovariance("Prediction rule has non-finite entries")

    @property
    def p(self):
        return self.coefficients.shape[0]

    def to_dict(self):
        return {"coefficients": [float(v) for v in self.coefficients],
                "intercept": self.intercept,
                "link": self.link}

    @classmethod
    def from_dict(cls, doc):
        try:
            return cls(doc["coefficients"], doc.get("intercept", 0.0), doc.get("link", LINK_IDENTITY))
        except (KeyError, TypeError, ValueError) as ex:
            raise SchemaMismatch("Invalid prediction rule document: %s" % (ex,))


def _weighted_gram(B, psi):
    """
    :returns: (array d x d) I + BΨ⁻¹Bᵀ and its Cholesky factor
    """
    if numpy.any(~(psi > 0)):
        raise SingularCovariance("Uniquenesses must be positive, got min %g" % (numpy.min(psi),))
    A = numpy.eye(B.shape[0]) + (B / psi) @ B.T
    try:
        return A, scipy.linalg.cho_factor(A, lower=True)
    except (numpy.linalg.LinAlgError, ValueError) as ex:
        raise SingularCovariance("I + BΨ⁻¹Bᵀ is not positive definite: %s" % (ex,))


def induced_coefficients(params):
    """
    Computes the regression coefficients of y on x implied by the factor model,
    β̃ = (BᵀB + Ψ)⁻¹Bᵀβ, through the equivalent d x d system
    β̃ = Ψ⁻¹Bᵀ(I + BΨ⁻¹Bᵀ)⁻¹β.
    params (FactorParams)
    :returns: (PredictionRule) the rule, with intercept β₀ (0 for the linear model)
    :raises SingularCovariance: if the covariance is not numerically positive definite
    """
    _, cf = _weighted_gram(params.B, params.psi)
    w = scipy.linalg.cho_solve(cf, params.beta)
    coefs = (params.B.T @ w) / params.psi
    return PredictionRule(coefs, params.beta0)


def predict(rule, Xnew):
    """
    rule (PredictionRule)
    Xnew (array n x p): standardized with the training transform
    :returns: (array n) the predictions (probabilities for a logit rule)
    :raises DimensionMismatch: if the number of columns is not p
    """
    Xnew = numpy.asarray(Xnew, dtype=float)
    if Xnew.ndim != 2 or Xnew.shape[1] != rule.p:
        raise DimensionMismatch("Rule has %d coefficients but data has shape %s" % (rule.p, Xnew.shape))
    lin = rule.intercept + Xnew @ rule.coefficients
    if rule.link == LINK_LOGIT:
        return expit(lin)
    return lin


def score_map(params):
    """
    :returns: (array d x p) the matrix A such that E(λ | x) = A x,
      A = (BΨ⁻¹Bᵀ + I)⁻¹BΨ⁻¹
    """
    _, cf = _weighted_gram(params.B, params.psi)
    return scipy.linalg.cho_solve(cf, params.B / params.psi)


def factor_scores(params, X):
    """
    Posterior means of the latent factors given the features.
    X (array n x p)
    :returns: (array n x d) row i is E(λ | x_i) = (BΨ⁻¹Bᵀ + I)⁻¹BΨ⁻¹x_i
    """
    X = numpy.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != params.p:
        raise DimensionMismatch("Expected %d columns, got shape %s" % (params.p, X.shape))
    return X @ score_map(params).T


def count_kaiser_eigenvalues(R):
    """
    R (array p x p): correlation matrix
    :returns: (int) the number of eigenvalues strictly larger than 1
    """
    try:
        eigvals = scipy.linalg.eigvalsh(R)
    except (numpy.linalg.LinAlgError, ValueError) as ex:
        raise EigenFailure("Eigen decomposition of the correlation matrix failed: %s" % (ex,))
    return int(numpy.sum(eigvals > 1.0))


def kaiser_dimension(X, n_labeled=None):
    """
    Chooses the latent dimension as the number of eigenvalues of the correlation
    matrix of X larger than one, clamped to [1, min(n - 1, p)].
    X (array k x p): standardized features (all rows may be used)
    n_labeled (int or None): number of labeled rows n, which bounds d even when
      the unlabeled rows take part in the correlation matrix (default: all k rows)
    :returns: (int >= 1) d
    """
    X = numpy.asarray(X, dtype=float)
    n, p = X.shape
    if p < 2 or n < 2:
        raise InvalidDimension("Kaiser criterion needs at least 2 rows and 2 features, got %s" % (X.shape,))
    R = numpy.corrcoef(X, rowvar=False)
    if not numpy.all(numpy.isfinite(R)):
        raise EigenFailure("Correlation matrix has non-finite entries (constant column?)")
    raw = count_kaiser_eigenvalues(R)
    if n_labeled is not None:
        n = min(n, n_labeled)
    d = max(min(raw, n - 1, p), 1)
    logging.debug("Kaiser criterion: %d eigenvalues > 1, using d = %d", raw, d)
    return d
