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

Variational Bayes for factor analysis of a correlation matrix (experimental).

The prior restricts each loading vector to the unit ball and ties the uniqueness to
the loadings, ψ_j = 1 − b_jᵀb_j, so that every column has unit variance. The variational
posterior is q(Λ)q(B)q(ψ) with Gaussian factors, unit-ball truncated Gaussian loadings
N(μ*_j, Ω*_j) and point masses at ζ_j for the uniquenesses. The prior variance of b_j
is γ_jζ_j, as in the linear model.

Only the factor and loading updates are coordinate ascent steps; the ζ update projects
onto the unit-variance constraint, so the bound may decrease there.
'''

import dataclasses
import logging

import numpy
import scipy.linalg

from bayfactor.correlation.truncated import trunc_moments, ball_mass, T_MAX
from bayfactor.data import standardize
from bayfactor.errors import ZetaOutOfRange, NonFiniteELBO, InvalidDimension
from bayfactor.util import finite_result, named_stream, log_duration
from bayfactor.vb.linear import inv_pd, LOG2PI, INIT_XI, INIT_JITTER

INIT_ZETA = 0.5


@dataclasses.dataclass
class ProperCorrState:
    """
    Phi (array n x d), Xi (array d x d): factor posterior
    mu_star (array p x d), Omega_star (array p x d x d): untruncated loading parameters
    M (array p x d), Omega (array p x d x d): moments of the truncated loading posterior
    L_q (array p): mass of the unit ball under N(μ*_j, Ω*_j)
    zeta (array p): point masses of the uniquenesses, in (0, 1)
    """
    Phi: numpy.ndarray
    Xi: numpy.ndarray
    mu_star: numpy.ndarray
    Omega_star: numpy.ndarray
    M: numpy.ndarray
    Omega: numpy.ndarray
    L_q: numpy.ndarray
    zeta: numpy.ndarray
    elbo_trace: list = dataclasses.field(default_factory=list)
    converged: bool = False
    n_sweeps: int = 0


def update_factors(state, X):
    w = 1 / state.zeta
    d = state.M.shape[1]
    P = numpy.einsum('j,jab->ab', w, state.Omega) + (state.M.T * w) @ state.M + numpy.eye(d)
    Xi = inv_pd(P, "Latent factor precision")
    Phi = X @ (w[:, numpy.newaxis] * state.M) @ Xi
    return dataclasses.replace(state, Phi=Phi, Xi=Xi)


def update_loadings(state, X, gammas, t_max=T_MAX):
    """
    μ*_j = (G + γ_j⁻¹I)⁻¹Φᵀx_j and Ω*_j = ζ_j(G + γ_j⁻¹I)⁻¹ with G = ΦᵀΦ + nΞ,
    then the moments of the truncated posteriors.
    """
    n, d = state.Phi.shape
    G = state.Phi.T @ state.Phi + n * state.Xi
    PhiTX = state.Phi.T @ X
    p = X.shape[1]
    mu_star, Omega_star = numpy.empty((p, d)), numpy.empty((p, d, d))
    M, Omega, L_q = numpy.empty((p, d)), numpy.empty((p, d, d)), numpy.empty(p)
    for j in range(p):
        K = inv_pd(G + numpy.eye(d) / gammas[j], "Loading precision")
        mu_star[j] = K @ PhiTX[:, j]
        Omega_star[j] = state.zeta[j] * K
        tm = trunc_moments(mu_star[j], Omega_star[j], t_max)
        M[j], Omega[j], L_q[j] = tm.mean, tm.cov, tm.L
    return dataclasses.replace(state, mu_star=mu_star, Omega_star=Omega_star, M=M, Omega=Omega, L_q=L_q)


def update_uniquenesses(state):
    """
    ζ_j = 1 − μ_jᵀμ_j − tr Ω_j
    :raises ZetaOutOfRange: if some ζ_j <= 0
    """
    zeta = 1 - numpy.sum(state.M ** 2, axis=1) - numpy.trace(state.Omega, axis1=1, axis2=2)
    if numpy.any(zeta <= 0):
        raise ZetaOutOfRange("Uniquenesses out of (0, 1) for columns %s" %
                             (numpy.flatnonzero(zeta <= 0).tolist(),))
    return dataclasses.replace(state, zeta=zeta)


@finite_result
def proper_corr_sweep(state, X, gammas, t_max=T_MAX):
    """
    One cycle of factor, loading and uniqueness updates.
    X (array n x p): standardized features
    gammas (array p): prior variance multipliers
    :returns: (ProperCorrState)
    """
    state = update_factors(state, X)
    state = update_loadings(state, X, gammas, t_max)
    state = update_uniquenesses(state)
    return dataclasses.replace(state, n_sweeps=state.n_sweeps + 1)


def truncation_mass_terms(L_p, L_q):
    """ :returns: (float) Σ_j (log L_q,j − log L_p,j), 0 when the masses agree """
    return float(numpy.sum(numpy.log(L_q) - numpy.log(L_p)))


def elbo_proper_corr(state, X, gammas):
    """
    Evidence lower bound of the correlation model for the given state.
    :returns: (float)
    """
    n, d = state.Phi.shape
    p = X.shape[1]
    zeta = state.zeta
    G = state.Phi.T @ state.Phi + n * state.Xi
    R = (numpy.sum(X ** 2, axis=0) - 2 * numpy.sum(state.M * (X.T @ state.Phi), axis=1) +
         numpy.einsum('ja,ab,jb->j', state.M, G, state.M) + numpy.einsum('ab,jba->j', G, state.Omega))
    lik = -0.5 * n * p * LOG2PI - 0.5 * n * numpy.sum(numpy.log(zeta)) - 0.5 * numpy.sum(R / zeta)

    _, logdet_xi = numpy.linalg.slogdet(state.Xi)
    lam = -0.5 * numpy.sum(state.Phi ** 2) - 0.5 * n * numpy.trace(state.Xi) + 0.5 * n * logdet_xi + 0.5 * n * d

    prior_var = gammas * zeta
    bb = numpy.sum(state.M ** 2, axis=1) + numpy.trace(state.Omega, axis1=1, axis2=2)
    L_p = numpy.array([ball_mass(v, d) for v in prior_var])
    prior_b = numpy.sum(-0.5 * d * numpy.log(2 * numpy.pi * prior_var) - 0.5 * bb / prior_var)

    ent_b = 0.0
    for j in range(p):
        _, logdet = numpy.linalg.slogdet(state.Omega_star[j])
        diff = state.M[j] - state.mu_star[j]
        quad = numpy.trace(scipy.linalg.solve(state.Omega_star[j], state.Omega[j] + numpy.outer(diff, diff),
                                              assume_a="pos"))
        ent_b += 0.5 * d * LOG2PI + 0.5 * logdet + 0.5 * quad

    elbo = lik + lam + prior_b + ent_b + truncation_mass_terms(L_p, state.L_q)
    if not numpy.isfinite(elbo):
        raise NonFiniteELBO("Evidence lower bound is %s" % (elbo,))
    return float(elbo)


def proper_corr_init(X, d, gammas, seed=0, t_max=T_MAX):
    """
    Factors from the leading principal components of X, ζ = ½, loadings from one
    loading update.
    """
    n, p = X.shape
    if d > min(n - 1, p):
        raise InvalidDimension("Latent dimension %d larger than min(n − 1, p) = %d" % (d, min(n - 1, p)))
    rng = named_stream(seed, "init")
    U, _, _ = scipy.linalg.svd(X, full_matrices=False)
    Phi = U[:, :d] * numpy.sqrt(n) + INIT_JITTER * rng.standard_normal((n, d))
    state = ProperCorrState(Phi=Phi, Xi=INIT_XI * numpy.eye(d), mu_star=numpy.zeros((p, d)),
                            Omega_star=numpy.zeros((p, d, d)), M=numpy.zeros((p, d)),
                            Omega=numpy.zeros((p, d, d)), L_q=numpy.ones(p), zeta=numpy.full(p, INIT_ZETA))
    return update_loadings(state, X, gammas, t_max)


@log_duration
def fit_proper_corr(data, hyper, tol=1e-6, max_iter=500, seed=0, t_max=T_MAX):
    """
    Sweeps until no loading mean or uniqueness moves by more than tol.
    data (Dataset): only the features are used, standardized over all the rows unless
      the data set is already standardized, so unlabeled data sets are accepted
    hyper (HyperParams)
    :returns: (ProperCorrState)
    """
    X = data.X if data.standardized else standardize(data.X)[0]
    hyper = hyper.with_groups(data.n_groups)
    gammas = hyper.column_variances(data.groups)[:-1]
    state = proper_corr_init(X, hyper.d, gammas, seed, t_max)
    converged = False
    for it in range(max_iter):
        new = proper_corr_sweep(state, X, gammas, t_max)
        new.elbo_trace.append(elbo_proper_corr(new, X, gammas))
        if len(new.elbo_trace) > 1 and new.elbo_trace[-1] < new.elbo_trace[-2]:
            logging.debug("Bound went down by %g at sweep %d, in the uniqueness projection",
                          new.elbo_trace[-2] - new.elbo_trace[-1], it + 1)
        change = max(numpy.abs(new.M - state.M).max(), numpy.abs(new.zeta - state.zeta).max())
        state = new
        if change < tol:
            converged = True
            break
    if not converged:
        logging.warning("Correlation model did not converge in %d sweeps", max_iter)
    return dataclasses.replace(state, converged=converged)
