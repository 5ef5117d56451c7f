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

Frequentist estimation of the factor model: maximum likelihood, penalized maximum
likelihood with cross-validated penalty, and EM for unlabeled rows.

All estimators work on the covariance of x̄ = (x, y), a p̄ = p + 1 vector, and fit
Σ̄ = LLᵀ + Ψ̄ where L (p̄ x d) holds the loadings of every column (the last column
being the outcome when present).
'''

from concurrent.futures import ThreadPoolExecutor
import dataclasses
import logging

import numpy
import scipy.linalg
from scipy.stats import multivariate_normal

from bayfactor.errors import NotConverged, IndefiniteInput, InvalidDimension, AllFoldsFailed, \
    DivergedVariance, SingularCovariance, EstimationError
from bayfactor.model import FactorParams, induced_coefficients, predict, score_map
from bayfactor.util import max_threads

PSI_FLOOR = 1e-6
FA_TOL = 1e-8
FA_MAX_ITER = 5000

TARGET_IDENTITY = "identity"
TARGET_DIAGONAL = "diagonal"


@dataclasses.dataclass
class CovarianceEstimate:
    """
    S (array p̄ x p̄): symmetric covariance (empirical S̄ or augmented S̃)
    n_eff (int): number of rows it was computed from
    has_outcome (bool): whether the last column is the outcome
    """
    S: numpy.ndarray
    n_eff: int
    has_outcome: bool = True

    def __post_init__(self):
        S = numpy.asarray(self.S, dtype=float)
        if S.ndim != 2 or S.shape[0] != S.shape[1]:
            raise IndefiniteInput("Covariance must be a square matrix, got shape %s" % (S.shape,))
        if not numpy.allclose(S, S.T, rtol=0, atol=1e-12 * max(1.0, numpy.abs(S).max())):
            raise IndefiniteInput("Covariance matrix is not symmetric")
        if numpy.any(numpy.diag(S) < 0) or not numpy.all(numpy.isfinite(S)):
            raise IndefiniteInput("Covariance matrix has negative or non-finite diagonal")
        self.S = (S + S.T) / 2


@dataclasses.dataclass
class PenaltyConfig:
    """
    gamma_pen (0 < float <= 1): weight of the target in the shrunken covariance
    target (str): "identity" or "diagonal" (diagonal of S)
    """
    gamma_pen: float
    target: str = TARGET_IDENTITY

    def __post_init__(self):
        if not 0 < self.gamma_pen <= 1:
            raise ValueError("Penalty weight must be in (0, 1], got %s" % (self.gamma_pen,))
        if self.target not in (TARGET_IDENTITY, TARGET_DIAGONAL):
            raise ValueError("Unknown penalty target %s" % (self.target,))

    def shrink(self, S):
        """ :returns: (array) (1 − γ)S + γΓ """
        target = numpy.eye(S.shape[0]) if self.target == TARGET_IDENTITY else numpy.diag(numpy.diag(S))
        return (1 - self.gamma_pen) * S + self.gamma_pen * target


@dataclasses.dataclass
class FAResult:
    """ Loadings L (p̄ x d), uniquenesses and the objective after each iteration """
    L: numpy.ndarray
    psi: numpy.ndarray
    trace: list
    converged: bool


def empirical_covariance(data, include_outcome=True, include_unlabeled=False):
    """
    data (Dataset): standardized dataset
    include_outcome (bool): append y as last column (labeled rows only)
    include_unlabeled (bool): use all the rows (only without outcome)
    :returns: (CovarianceEstimate) n⁻¹X̄ᵀX̄
    """
    if include_outcome:
        data.require_labels()
        Xb = numpy.column_stack([data.X_labeled, data.y])
    elif include_unlabeled:
        Xb = data.X
    else:
        Xb = data.X_labeled
    return CovarianceEstimate(Xb.T @ Xb / Xb.shape[0], Xb.shape[0], include_outcome)


def fa_objective(L, psi, S):
    """ :returns: (float) log|Σ⁻¹| − tr(Σ⁻¹S) with Σ = LLᵀ + diag(psi) """
    Sigma = L @ L.T + numpy.diag(psi)
    try:
        cf = scipy.linalg.cho_factor(Sigma, lower=True)
    except numpy.linalg.LinAlgError as ex:
        raise SingularCovariance("Model covariance is not positive definite: %s" % (ex,))
    logdet = 2 * numpy.sum(numpy.log(numpy.diag(cf[0])))
    return -logdet - numpy.trace(scipy.linalg.cho_solve(cf, S))


def _initial_loadings(S, d):
    """ Probabilistic-PCA start: top-d eigenvectors, noise = mean of the other eigenvalues """
    eigvals, eigvecs = scipy.linalg.eigh(S)
    eigvals, eigvecs = eigvals[::-1], eigvecs[:, ::-1]
    noise = numpy.mean(eigvals[d:]) if d < eigvals.size else 0.0
    L = eigvecs[:, :d] * numpy.sqrt(numpy.maximum(eigvals[:d] - noise, 0))
    psi = numpy.maximum(numpy.diag(S) - numpy.sum(L ** 2, axis=1), PSI_FLOOR)
    return L, psi


def _fa_em(S, L, psi, tol, max_iter):
    """
    EM for factor analysis on a covariance matrix, started from (L, psi).
    :returns: (FAResult)
    """
    d = L.shape[1]
    trace = [fa_objective(L, psi, S)]
    for it in range(max_iter):
        # E-step: E(λ|x) = A x, A = LᵀΣ⁻¹
        A = score_map(FactorParams(L.T, numpy.zeros(d), psi))
        Ezz = numpy.eye(d) - A @ L + A @ S @ A.T
        SA = S @ A.T
        # M-step
        try:
            L = scipy.linalg.solve(Ezz, SA.T, assume_a="pos").T
        except (numpy.linalg.LinAlgError, ValueError) as ex:
            raise SingularCovariance("Factor second moment is singular: %s" % (ex,))
        psi = numpy.maximum(numpy.diag(S) - numpy.sum(L * SA, axis=1), PSI_FLOOR)
        obj = fa_objective(L, psi, S)
        prev = trace[-1]
        trace.append(obj)
        if abs(obj - prev) <= tol * abs(prev):
            return FAResult(L, psi, trace, True)
    return FAResult(L, psi, trace, False)


def _to_params(L, psi, has_outcome):
    if has_outcome:
        return FactorParams(B=L[:-1].T, beta=L[-1], psi=psi[:-1], sigma2=psi[-1])
    return FactorParams(B=L.T, beta=numpy.zeros(L.shape[1]), psi=psi)


def _from_params(params, has_outcome):
    if has_outcome:
        return numpy.vstack([params.B.T, params.beta]), numpy.append(params.psi, params.sigma2)
    return params.B.T.copy(), params.psi.copy()


def _check_dimension(S, d):
    if not 1 <= d < S.shape[0]:
        raise InvalidDimension("Latent dimension must be in [1, %d), got %d" % (S.shape[0], d))


def fa_mle(S, d, tol=FA_TOL, max_iter=FA_MAX_ITER, start=None):
    """
    Maximum likelihood factor analysis: local maximizer of log|Σ̄⁻¹| − tr(Σ̄⁻¹S̄),
    Σ̄ = B̄ᵀB̄ + Ψ̄, by EM with uniquenesses floored at 1e-6.
    S (CovarianceEstimate)
    d (int): latent dimension, 1 <= d < p̄
    tol (float): relative change of the objective at which to stop
    max_iter (int): maximum number of EM iterations
    start (FactorParams or None): starting point (default: probabilistic PCA)
    :returns: (FactorParams) the estimate; its "trace" attribute lists the objective values
    :raises:
        InvalidDimension: if d is out of range
        NotConverged: if max_iter is reached (the last estimate is in .params)
    """
    _check_dimension(S.S, d)
    if start is None:
        L, psi = _initial_loadings(S.S, d)
    else:
        L, psi = _from_params(start, S.has_outcome)
    res = _fa_em(S.S, L, psi, tol, max_iter)
    params = _to_params(res.L, res.psi, S.has_outcome)
    params.trace = res.trace
    if not res.converged:
        logging.debug("Factor analysis did not converge in %d iterations", max_iter)
        raise NotConverged("Factor analysis did not converge in %d iterations" % (max_iter,), params)
    logging.debug("Factor analysis converged in %d iterations, objective %g", len(res.trace) - 1, res.trace[-1])
    return params


def fa_pml(S, d, penalty, tol=FA_TOL, max_iter=FA_MAX_ITER, start=None):
    """
    Penalized maximum likelihood: fa_mle on the shrunken covariance (1 − γ)S̄ + γΓ.
    penalty (PenaltyConfig)
    """
    shrunk = CovarianceEstimate(penalty.shrink(S.S), S.n_eff, S.has_outcome)
    return fa_mle(shrunk, d, tol, max_iter, start)


def _fit_allow_unconverged(S, d, penalty, tol, max_iter, start=None):
    try:
        if penalty is None:
            return fa_mle(S, d, tol, max_iter, start)
        return fa_pml(S, d, penalty, tol, max_iter, start)
    except NotConverged as ex:
        return ex.params


def heldout_loglik(params, Xb):
    """ mean Gaussian log-likelihood of the rows of Xb under Σ̄ of params (with outcome) """
    L, psi = _from_params(params, Xb.shape[1] == params.p + 1)
    Sigma = L @ L.T + numpy.diag(psi)
    return float(numpy.mean(multivariate_normal(mean=numpy.zeros(Sigma.shape[0]), cov=Sigma).logpdf(Xb)))


def cv_penalty(data, d, folds, grid, include_outcome=True, target=TARGET_IDENTITY, seed=0,
               tol=FA_TOL, max_iter=FA_MAX_ITER):
    """
    Chooses the shrinkage weight by k-fold cross validation of the held-out
    Gaussian log-likelihood of the fitted covariance. Ties go to the larger weight.
    data (Dataset): standardized
    d (int): latent dimension
    folds (int >= 2)
    grid (sequence of float in (0, 1])
    :returns: (PenaltyConfig)
    :raises AllFoldsFailed: if no grid point could be evaluated, or folds > n
    """
    data.require_labels()
    Xb = numpy.column_stack([data.X_labeled, data.y]) if include_outcome else data.X_labeled
    n = Xb.shape[0]
    grid = sorted(float(g) for g in grid)
    if folds < 2 or folds > n:
        raise AllFoldsFailed("Cannot make %d folds out of %d rows" % (folds, n))
    if len(grid) == 1:
        return PenaltyConfig(grid[0], target)

    order = numpy.random.default_rng(seed).permutation(n)
    splits = numpy.array_split(order, folds)

    def evaluate(task):
        gamma, k = task
        test = splits[k]
        train = numpy.concatenate([s for i, s in enumerate(splits) if i != k])
        S = CovarianceEstimate(Xb[train].T @ Xb[train] / train.size, train.size, include_outcome)
        try:
            params = _fit_allow_unconverged(S, d, PenaltyConfig(gamma, target), tol, max_iter)
            return heldout_loglik(params, Xb[test])
        except EstimationError as ex:
            logging.warning("Penalty %g, fold %d failed: %s", gamma, k, ex)
            return None

    tasks = [(g, k) for g in grid for k in range(folds)]
    with ThreadPoolExecutor(max_workers=max_threads()) as executor:
        scores = list(executor.map(evaluate, tasks))

    best, best_score = None, -numpy.inf
    for i, gamma in enumerate(grid):
        vals = [s for s in scores[i * folds:(i + 1) * folds] if s is not None]
        if not vals:
            continue
        score = numpy.mean(vals)
        logging.debug("Penalty %g: mean held-out log-likelihood %g", gamma, score)
        if score >= best_score:
            best, best_score = gamma, score
    if best is None:
        raise AllFoldsFailed("Every fold failed for every penalty weight")
    logging.info("Cross validation selected penalty weight %g", best)
    return PenaltyConfig(best, target)


def conditional_outcome_moments(params, X):
    """
    E(z | x) = xᵀ(BᵀB + Ψ)⁻¹Bᵀβ and V(z | x) = βᵀ(I + BΨ⁻¹Bᵀ)⁻¹β + σ²
    X (array m x p)
    :returns: (array m, float)
    """
    mean = predict(induced_coefficients(params), X)
    A = numpy.eye(params.d) + (params.B / params.psi) @ params.B.T
    var = float(params.beta @ scipy.linalg.solve(A, params.beta, assume_a="pos")) + params.sigma2
    if not var > 0:
        raise DivergedVariance("Conditional outcome variance is %g" % (var,))
    return mean, var


def augmented_covariance(params, data):
    """
    Builds S̃ = (n+m)⁻¹(X̃ᵀX̃ + m V(z|x) e eᵀ), where X̃ holds the labeled rows and the
    unlabeled rows completed with E(z|x).
    :returns: (CovarianceEstimate)
    """
    Ez, Vz = conditional_outcome_moments(params, data.X_unlabeled)
    Xt = numpy.column_stack([data.X, numpy.concatenate([data.y, Ez])])
    S = Xt.T @ Xt
    S[-1, -1] += data.m * Vz
    return CovarianceEstimate(S / data.n_total, data.n_total, True)


def observed_loglik(params, data):
    """
    Log-likelihood of the labeled rows (features and outcome) and the unlabeled rows
    (features only) under the fitted factor model.
    """
    L, psi = _from_params(params, True)
    Sigma = L @ L.T + numpy.diag(psi)
    p = data.p
    ll = multivariate_normal(mean=numpy.zeros(p + 1), cov=Sigma).logpdf(
        numpy.column_stack([data.X_labeled, data.y])).sum()
    if data.m > 0:
        ll += numpy.atleast_1d(multivariate_normal(mean=numpy.zeros(p), cov=Sigma[:p, :p]).logpdf(
            data.X_unlabeled)).sum()
    return float(ll)


def expected_loglik(params, S):
    """
    Expected log-likelihood given the augmented covariance S̃ (CovarianceEstimate):
    (n/2)(log|Σ̄⁻¹| − tr(Σ̄⁻¹S̃)) − (n p̄ / 2) log 2π
    """
    L, psi = _from_params(params, True)
    pbar = S.S.shape[0]
    return 0.5 * S.n_eff * (fa_objective(L, psi, S.S) - pbar * numpy.log(2 * numpy.pi))


def em_semisupervised(data, d, penalty=None, tol=1e-8, max_iter=500, inner_iter=50):
    """
    EM over the missing outcomes of the unlabeled rows: the E-step builds S̃ from the
    conditional moments of z given x, the M-step runs (penalized) maximum likelihood
    on S̃, started from the current parameters.
    data (Dataset): standardized, linear outcome
    d (int): latent dimension
    penalty (PenaltyConfig or None)
    tol (float): relative change of the observed log-likelihood at which to stop
    max_iter (int): maximum number of EM iterations
    inner_iter (int): maximum factor analysis iterations per M-step
    :returns: (FactorParams) with attributes "loglik_trace" (observed log-likelihood
      per iteration) and "q_gains" (Q(θ_{k+1}|θ_k) − Q(θ_k|θ_k) per iteration)
    """
    data.require_labels()
    S_bar = empirical_covariance(data)
    if data.m == 0:
        params = fa_mle(S_bar, d, tol, FA_MAX_ITER) if penalty is None else \
                 fa_pml(S_bar, d, penalty, tol, FA_MAX_ITER)
        params.loglik_trace = [observed_loglik(params, data)]
        params.q_gains = []
        return params

    params = _fit_allow_unconverged(S_bar, d, penalty, tol, FA_MAX_ITER)
    trace = [observed_loglik(params, data)]
    gains = []
    for it in range(max_iter):
        S_tilde = augmented_covariance(params, data)
        S_fit = S_tilde if penalty is None else \
                CovarianceEstimate(penalty.shrink(S_tilde.S), S_tilde.n_eff, True)
        q_old = expected_loglik(params, S_fit)
        params = _fit_allow_unconverged(S_tilde, d, penalty, tol, inner_iter, start=params)
        gains.append(expected_loglik(params, S_fit) - q_old)
        trace.append(observed_loglik(params, data))
        if abs(trace[-1] - trace[-2]) <= tol * abs(trace[-2]):
            logging.debug("EM converged after %d iterations, log-likelihood %g", it + 1, trace[-1])
            break
    else:
        params.loglik_trace, params.q_gains = trace, gains
        logging.warning("EM did not converge in %d iterations", max_iter)
        raise NotConverged("EM did not converge in %d iterations" % (max_iter,), params)

    params.loglik_trace, params.q_gains = trace, gains
    return params
