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

Variational Bayes for Gaussian features with a binomial outcome.

The outcome row i has N_i trials, y_i successes (z_i for unlabeled rows) and success
probability expit(ω_i), ω_i = β₀ + βᵀλ_i. A Pólya-Gamma variable η_i ~ PG(N_i, 0)
per row makes the likelihood conditionally Gaussian in ω_i:
    q(η_i) = PG(N_i, δ_i), q(z_i) = Binomial(N_i, υ_i), q(β̄) = N(μ̄, Ω̄) with β̄ = (β₀, β),
    q(λ_i) = N(φ_i, Ξ_i), q(b_j) = N(μ_j, Ω_j), q(ψ_j) = InvGamma(a, ζ_j),
a = (n + m + d)/2 + κ. The intercept has a flat prior.
'''

import dataclasses
import logging
import time
from typing import Optional

import numpy
import scipy.linalg
from scipy.special import digamma, expit, gammaln, xlogy

from bayfactor.data import OUTCOME_BINOMIAL
from bayfactor.errors import InvalidDimension, NegativeZeta, NonFiniteELBO, DimensionMismatch, InvalidSpec
from bayfactor.gibbs.polyagamma import pg_mean, sample_pg
from bayfactor.model import FactorParams, PredictionRule, LINK_LOGIT, induced_coefficients
from bayfactor.util import finite_result, log_duration, named_stream
from bayfactor.vb.hyper import HyperParams, eb_update
from bayfactor.vb.linear import LOG2PI, INIT_XI, INIT_JITTER, loadings_from_gram, shape_parameter, \
    inv_pd
from bayfactor.vb.predict import sqrt_covariances, draw_coefficients, redraw_singular

PROB_CLAMP = 1e-12


@dataclasses.dataclass
class VariationalStateLogistic:
    """
    Phi (array (n+m) x d), Xi (array (n+m) x d x d): factor means and per-row covariances
    M (array p x d), Omega (array p x d x d): feature loadings
    zeta (array p): inverse-gamma scales of the features
    mu_bar (array d+1), Omega_bar (array (d+1) x (d+1)): posterior of (β₀, β)
    delta (array n+m): Pólya-Gamma tilting parameters
    upsilon (array m): success probabilities of the missing outcomes
    """
    Phi: numpy.ndarray
    Xi: numpy.ndarray
    M: numpy.ndarray
    Omega: numpy.ndarray
    zeta: numpy.ndarray
    mu_bar: numpy.ndarray
    Omega_bar: numpy.ndarray
    delta: numpy.ndarray
    upsilon: numpy.ndarray
    shape: float
    elbo_trace: list = dataclasses.field(default_factory=list)
    converged: bool = False
    n_sweeps: int = 0
    hyper: Optional[HyperParams] = None
    runtime_ms: float = 0.0

    @property
    def E_inv_psi(self):
        return self.shape / self.zeta

    @property
    def E_psi(self):
        return self.zeta / (self.shape - 1)


def _trials(data):
    return numpy.asarray(data.trials, dtype=float)


def kappa_tilde(state, data):
    """ :returns: (array n+m) E(successes) − N/2, with E(z_i) = N_iυ_i on unlabeled rows """
    N = _trials(data)
    return numpy.concatenate([data.y, N[data.n:] * state.upsilon]) - N / 2


def mean_score(state):
    """ :returns: (array n+m) E(ω_i) = μ₀ + μ_βᵀφ_i """
    return state.mu_bar[0] + state.Phi @ state.mu_bar[1:]


def second_moment_score(state):
    """ :returns: (array n+m) E(ω_i²) = tr((Ω̄ + μ̄μ̄ᵀ)E(λ̄_iλ̄_iᵀ)), λ̄_i = (1, λ_i) """
    S = state.Omega_bar + numpy.outer(state.mu_bar, state.mu_bar)
    Sbb = S[1:, 1:]
    return (S[0, 0] + 2 * state.Phi @ S[1:, 0] +
            numpy.einsum('ia,ab,ib->i', state.Phi, Sbb, state.Phi) +
            numpy.einsum('ab,iba->i', Sbb, state.Xi))


def E_eta(state, data):
    return pg_mean(_trials(data), state.delta)


def update_delta(state, data):
    """ δ_i = E(ω_i²)^{1/2} """
    delta = numpy.sqrt(numpy.maximum(second_moment_score(state), 0))
    return dataclasses.replace(state, delta=delta)


def update_factors(state, data):
    """ Λ-block, with one covariance Ξ_i per row """
    w = state.E_inv_psi
    d = state.M.shape[1]
    eta = E_eta(state, data)
    S = state.Omega_bar + numpy.outer(state.mu_bar, state.mu_bar)
    common = numpy.einsum('j,jab->ab', w, state.Omega) + (state.M.T * w) @ state.M + numpy.eye(d)
    P = common[numpy.newaxis] + eta[:, numpy.newaxis, numpy.newaxis] * S[1:, 1:][numpy.newaxis]
    Xi = numpy.linalg.inv(P)
    Xi = (Xi + numpy.swapaxes(Xi, 1, 2)) / 2
    rhs = (data.X @ (w[:, numpy.newaxis] * state.M) +
           numpy.outer(kappa_tilde(state, data), state.mu_bar[1:]) -
           numpy.outer(eta, S[1:, 0]))
    Phi = numpy.einsum('iab,ib->ia', Xi, rhs)
    return dataclasses.replace(state, Phi=Phi, Xi=Xi)


def _gram(state):
    return state.Phi.T @ state.Phi + state.Xi.sum(axis=0)


def update_loadings(state, data, hyper):
    """ Feature loadings and the (β₀, β) block """
    gammas = hyper.column_variances(data.groups)
    M, Omega = loadings_from_gram(_gram(state), state.Phi.T @ data.X, gammas[:-1], state.E_inv_psi)

    d = state.M.shape[1]
    eta = E_eta(state, data)
    kt = kappa_tilde(state, data)
    P = numpy.empty((d + 1, d + 1))
    P[0, 0] = eta.sum()
    P[0, 1:] = P[1:, 0] = eta @ state.Phi
    P[1:, 1:] = (numpy.einsum('i,iab->ab', eta, state.Xi) + (state.Phi.T * eta) @ state.Phi +
                 numpy.eye(d) / gammas[-1])
    Omega_bar = inv_pd(P, "Outcome loading precision")
    mu_bar = Omega_bar @ numpy.concatenate([[kt.sum()], state.Phi.T @ kt])
    return dataclasses.replace(state, M=M, Omega=Omega, mu_bar=mu_bar, Omega_bar=Omega_bar)


def _residual_terms(state, data):
    G = _gram(state)
    xx = numpy.sum(data.X ** 2, axis=0)
    cross = numpy.sum(state.M * (data.X.T @ state.Phi), axis=1)
    quad = numpy.einsum('ja,ab,jb->j', state.M, G, state.M) + numpy.einsum('ab,jba->j', G, state.Omega)
    return xx - 2 * cross + quad


def _prior_terms(state, gammas):
    bb = numpy.sum(state.M ** 2, axis=1) + numpy.trace(state.Omega, axis1=1, axis2=2)
    return bb / gammas


def update_scales(state, data, hyper):
    R = _residual_terms(state, data)
    prior = _prior_terms(state, hyper.column_variances(data.groups)[:-1])
    zeta = 0.5 * R + 0.5 * prior + hyper.nu
    if numpy.any(zeta <= 0):
        raise NegativeZeta("Non-positive inverse-gamma scale in columns %s" %
                           (numpy.flatnonzero(zeta <= 0).tolist(),))
    return dataclasses.replace(state, zeta=zeta)


def update_labels(state, data):
    """ υ_i = expit(μ₀ + μ_βᵀφ_i) on the unlabeled rows """
    if data.m == 0:
        return state
    upsilon = numpy.clip(expit(mean_score(state)[data.n:]), PROB_CLAMP, 1 - PROB_CLAMP)
    return dataclasses.replace(state, upsilon=upsilon)


@finite_result
def vb_logistic_sweep(state, data, hyper):
    """
    One cycle of coordinate updates: δ, factors, loadings (features and outcome),
    scales, then missing outcomes.
    :returns: (VariationalStateLogistic) new state
    """
    state = update_delta(state, data)
    state = update_factors(state, data)
    state = update_loadings(state, data, hyper)
    state = update_scales(state, data, hyper)
    state = update_labels(state, data)
    return dataclasses.replace(state, n_sweeps=state.n_sweeps + 1)


def _log_binom(N, k):
    return gammaln(N + 1) - gammaln(k + 1) - gammaln(N - k + 1)


def _log_cosh_half(delta):
    return numpy.logaddexp(delta / 2, -delta / 2) - numpy.log(2)


def elbo_logistic(state, data, hyper):
    """
    Evidence lower bound of the binomial model for the given variational state.
    :returns: (float)
    :raises NonFiniteELBO: if the bound is not finite
    """
    n, n_tot, p = data.n, data.n_total, data.p
    d = state.M.shape[1]
    a = state.shape
    kappa, nu = hyper.kappa, hyper.nu
    gammas = hyper.column_variances(data.groups)
    gamma_out = gammas[-1]
    E_inv = state.E_inv_psi
    E_log = numpy.log(state.zeta) - digamma(a)
    N = _trials(data)
    eta = E_eta(state, data)

    R = _residual_terms(state, data)
    lik_x = -0.5 * n_tot * p * LOG2PI - 0.5 * n_tot * numpy.sum(E_log) - 0.5 * numpy.sum(E_inv * R)

    lik_y = (numpy.sum(_log_binom(N[:n], data.y)) - numpy.sum(N) * numpy.log(2) +
             numpy.sum(kappa_tilde(state, data) * mean_score(state)) -
             0.5 * numpy.sum(eta * second_moment_score(state)) -
             numpy.sum(N * _log_cosh_half(state.delta)) + 0.5 * numpy.sum(eta * state.delta ** 2))
    if data.m > 0:
        u = state.upsilon
        lik_y -= numpy.sum(N[n:] * (xlogy(u, u) + xlogy(1 - u, 1 - u)))

    _, logdet_xi = numpy.linalg.slogdet(state.Xi)
    lam = numpy.sum(-0.5 * (numpy.sum(state.Phi ** 2, axis=1) + numpy.trace(state.Xi, axis1=1, axis2=2)) +
                    0.5 * logdet_xi + 0.5 * d)

    _, logdet_omega = numpy.linalg.slogdet(state.Omega)
    prior_b = numpy.sum(-0.5 * d * LOG2PI - 0.5 * d * numpy.log(gammas[:-1]) - 0.5 * d * E_log -
                        0.5 * E_inv * _prior_terms(state, gammas[:-1]))
    ent_b = numpy.sum(0.5 * d * (1 + LOG2PI) + 0.5 * logdet_omega)

    mb = state.mu_bar[1:]
    _, logdet_bar = numpy.linalg.slogdet(state.Omega_bar)
    prior_beta = (-0.5 * d * LOG2PI - 0.5 * d * numpy.log(gamma_out) -
                  0.5 * (mb @ mb + numpy.trace(state.Omega_bar[1:, 1:])) / gamma_out)
    ent_beta = 0.5 * (d + 1) * (1 + LOG2PI) + 0.5 * logdet_bar

    prior_psi = numpy.sum(kappa * numpy.log(nu) - gammaln(kappa) - (kappa + 1) * E_log - nu * E_inv)
    ent_psi = numpy.sum(a + numpy.log(state.zeta) + gammaln(a) - (1 + a) * digamma(a))

    elbo = lik_x + lik_y + lam + prior_b + ent_b + prior_beta + ent_beta + prior_psi + ent_psi
    if not numpy.isfinite(elbo):
        raise NonFiniteELBO("Evidence lower bound is %s" % (elbo,))
    return float(elbo)


def vb_logistic_init(data, hyper, seed=0):
    """
    Starting state: factors from the principal components of the features as in the
    linear model, feature loadings from one loading update, β̄ = 0 with covariance
    γI, υ = ½ and δ consistent with the rest.
    """
    d, n_tot = hyper.d, data.n_total
    if d > min(data.n - 1, data.p):
        raise InvalidDimension("Latent dimension %d larger than min(n − 1, p) = %d" %
                               (d, min(data.n - 1, data.p)))
    rng = named_stream(seed, "init")
    U, _, _ = scipy.linalg.svd(data.X, full_matrices=False)
    Phi = U[:, :d] * numpy.sqrt(n_tot) + INIT_JITTER * rng.standard_normal((n_tot, d))
    Xi = numpy.repeat(INIT_XI * numpy.eye(d)[numpy.newaxis], n_tot, axis=0)
    a = shape_parameter(n_tot, d, hyper.kappa)
    zeta = numpy.full(data.p, hyper.nu + n_tot / 2)
    gammas = hyper.column_variances(data.groups)
    G = Phi.T @ Phi + Xi.sum(axis=0)
    M, Omega = loadings_from_gram(G, Phi.T @ data.X, gammas[:-1], a / zeta)
    state = VariationalStateLogistic(Phi=Phi, Xi=Xi, M=M, Omega=Omega, zeta=zeta,
                                     mu_bar=numpy.zeros(d + 1), Omega_bar=gammas[-1] * numpy.eye(d + 1),
                                     delta=numpy.zeros(n_tot), upsilon=numpy.full(data.m, 0.5),
                                     shape=a, hyper=hyper)
    return update_delta(state, data)


def params_from_logistic(state):
    """ :returns: (FactorParams) posterior means, with the intercept β₀ """
    return FactorParams(B=state.M.T, beta=state.mu_bar[1:], psi=state.E_psi, sigma2=1.0,
                        beta0=state.mu_bar[0])


def logistic_rule(state):
    """ :returns: (PredictionRule) plug-in rule expit(β₀ + xᵀβ̃) """
    rule = induced_coefficients(params_from_logistic(state))
    return PredictionRule(rule.coefficients, rule.intercept, LINK_LOGIT)


@log_duration
def fit_vb_logistic(data, hyper, tol=1e-6, max_iter=5000, seed=0):
    """
    Coordinate ascent for the binomial model, with the same stopping rule and
    empirical Bayes updates as the linear fit.
    data (Dataset): binomial outcome
    :returns:
        state (VariationalStateLogistic)
        params (FactorParams): posterior means, including β₀
    """
    start = time.perf_counter()
    if data.outcome != OUTCOME_BINOMIAL:
        raise InvalidSpec("Logistic fit needs a binomial outcome, got %s" % (data.outcome,))
    data.require_labels()
    if not data.standardized:
        logging.info("Standardizing the features before fitting")
        data = data.standardize()
    hyper = hyper.with_groups(data.n_groups)
    state = vb_logistic_init(data, hyper, seed)
    state.elbo_trace.append(elbo_logistic(state, data, hyper))

    converged = False
    for it in range(max_iter):
        state = vb_logistic_sweep(state, data, hyper)
        hyper = eb_update(state, hyper, data.groups)
        state.elbo_trace.append(elbo_logistic(state, data, hyper))
        prev, cur = state.elbo_trace[-2], state.elbo_trace[-1]
        if cur < prev - 1e-8 * abs(prev):
            logging.warning("Evidence lower bound decreased at sweep %d: %.12g -> %.12g", it + 1, prev, cur)
        if it % 100 == 0:
            logging.debug("Sweep %d: ELBO %.10g", it + 1, cur)
        if abs(cur - prev) <= tol * abs(prev):
            converged = True
            break

    if not converged:
        logging.warning("Logistic variational Bayes did not converge in %d sweeps", max_iter)
    state = dataclasses.replace(state, converged=converged, hyper=hyper,
                                runtime_ms=(time.perf_counter() - start) * 1e3)
    return state, params_from_logistic(state)


def score_moments(state, Xnew, n_draws=1000, seed=0, variance_scale=1.0):
    """
    Mean c and variance s of the linear score
        g = β₀ + βᵀ(BΨ⁻¹Bᵀ + ηββᵀ + I)⁻¹BΨ⁻¹x
    over the variational posterior of (B, β₀, β, Ψ) and the augmentation variable η
    of a new single-trial outcome. η is drawn from PG(1, 0) and reweighted by the
    marginal likelihood factor (1 + ηβᵀβ)^{-1/2} exp(βᵀβ/(8(1 + ηβᵀβ))).
    variance_scale (0 <= float <= 1): scales every posterior variance, as in the linear predictors
    :returns: c, s (arrays k)
    """
    if not 0 <= variance_scale <= 1:
        raise ValueError("variance_scale must be within [0, 1], got %g" % (variance_scale,))
    if n_draws < 1:
        raise ValueError("Need at least 1 draw, got %d" % (n_draws,))
    p, d = state.M.shape
    root = numpy.sqrt(variance_scale)
    L = root * sqrt_covariances(state.Omega)
    Lbar = root * sqrt_covariances(state.Omega_bar[numpy.newaxis])[0]

    def draw(k, rng):
        B = state.M[numpy.newaxis] + numpy.einsum('jab,tjb->tja', L, rng.standard_normal((k, p, d)))
        bbar = state.mu_bar + rng.standard_normal((k, d + 1)) @ Lbar.T
        psi = numpy.stack([rng.gamma(state.shape, size=k) for _ in range(p)], axis=1)
        psi = state.E_psi + root * (state.zeta / psi - state.E_psi)
        eta = sample_pg(1, 0.0, rng, size=(k,))
        coefs, ok = draw_coefficients(numpy.swapaxes(B, 1, 2), bbar[:, 1:], psi, eta)
        return (bbar, eta, coefs), ok

    bbar, eta, coefs = redraw_singular(draw, n_draws, named_stream(seed, "mc-predict"))
    beta = bbar[:, 1:]
    s = numpy.sum(beta ** 2, axis=1)
    logw = -0.5 * numpy.log1p(eta * s) + s / (8 * (1 + eta * s))
    w = numpy.exp(logw - logw.max())
    w /= w.sum()

    g = bbar[:, :1] + coefs @ Xnew.T
    c = w @ g
    return c, w @ (g - c) ** 2


def predict_logistic(state, Xnew, n_draws=1000, seed=0, second_order=True, variance_scale=1.0):
    """
    Posterior success probabilities of new single-trial rows:
        expit(c) + s·e(1 − e)²/2 − s·e²(1 − e)/2, e = expit(c),
    clamped to (0, 1).
    Xnew (array k x p): standardized features
    second_order (bool): if False, expit(c) only
    :returns: (array k)
    """
    Xnew = numpy.asarray(Xnew, dtype=float)
    if Xnew.ndim != 2 or Xnew.shape[1] != state.M.shape[0]:
        raise DimensionMismatch("Model has %d features but data has shape %s" % (state.M.shape[0], Xnew.shape))
    c, s = score_moments(state, Xnew, n_draws, seed, variance_scale)
    e = expit(c)
    if second_order:
        e = e + s * e * (1 - e) ** 2 / 2 - s * e ** 2 * (1 - e) / 2
    return numpy.clip(e, PROB_CLAMP, 1 - PROB_CLAMP)
