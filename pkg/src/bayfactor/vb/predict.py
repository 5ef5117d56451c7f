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

Bayes-rule predictions under the variational posterior of the linear model.

The regression coefficient vector β̃ = (BᵀB + Ψ)⁻¹Bᵀβ is a non-linear function of
the loadings and uniquenesses; its posterior mean is either estimated by Monte Carlo
or approximated by a second order Taylor expansion around the posterior means.
'''

import logging

import numpy
from scipy import stats

from bayfactor.errors import SingularDrawCovariance, NonFiniteHessianProbe, DimensionMismatch, \
    SingularDraw
from bayfactor.model import PredictionRule, FactorParams, induced_coefficients
from bayfactor.util import named_stream, log_duration
from bayfactor.vb.linear import params_from_state

EIG_TOL = 1e-10
PROBE_STEP = 1e-4
MAX_REDRAW_FACTOR = 10


def plugin_rule(state):
    """ :returns: (PredictionRule) β̃ evaluated at the posterior means """
    return induced_coefficients(params_from_state(state))


def _check_scale(variance_scale):
    if not 0 <= variance_scale <= 1:
        raise ValueError("variance_scale must be within [0, 1], got %g" % (variance_scale,))


def sqrt_covariances(Omega):
    """
    :returns: (array k x d x d) L_j with L_jL_jᵀ = Ω_j
    :raises SingularDrawCovariance: if an Ω_j has a clearly negative eigenvalue
    """
    w, V = numpy.linalg.eigh(Omega)
    floor = -EIG_TOL * numpy.maximum(1, numpy.abs(w).max(axis=1))
    if numpy.any(w < floor[:, numpy.newaxis]):
        raise SingularDrawCovariance("Loading covariance is not positive semi-definite (min eigenvalue %g)" %
                                     (w.min(),))
    return V * numpy.sqrt(numpy.clip(w, 0, None))[:, numpy.newaxis, :]


def solve_draws(A, beta):
    """
    w_t = A_t⁻¹β_t for a stack of draws.
    :returns:
        w (array T x d): NaN rows where A_t is singular
        ok (array T of bool): False for the singular draws
    """
    try:
        w = numpy.linalg.solve(A, beta[..., numpy.newaxis])[..., 0]
    except numpy.linalg.LinAlgError:
        w = numpy.full(beta.shape, numpy.nan)
        for t in range(A.shape[0]):
            try:
                w[t] = numpy.linalg.solve(A[t], beta[t])
            except numpy.linalg.LinAlgError:
                pass
    return w, numpy.all(numpy.isfinite(w), axis=1)


def draw_coefficients(B, beta, psi, eta=None):
    """
    β̃ = Ψ⁻¹Bᵀ(I + BΨ⁻¹Bᵀ + ηββᵀ)⁻¹β for a stack of parameter draws.
    B (array T x d x p), beta (array T x d), psi (array T x p)
    eta (None or array T): augmentation variables of the logistic score (0 if None)
    :returns:
        coefs (array T x p)
        ok (array T of bool): False for the draws where the system is singular or
          the result not finite
    """
    d = B.shape[1]
    with numpy.errstate(divide="ignore", invalid="ignore", over="ignore"):
        A = numpy.eye(d) + numpy.einsum('tap,tp,tbp->tab', B, 1 / psi, B)
        if eta is not None:
            A += eta[:, numpy.newaxis, numpy.newaxis] * numpy.einsum('ta,tb->tab', beta, beta)
        w, ok = solve_draws(A, beta)
        coefs = numpy.einsum('tap,ta->tp', B, w) / psi
    return coefs, ok & numpy.all(numpy.isfinite(coefs), axis=1)


def batch_coefficients(B, beta, psi, eta=None):
    """
    Same as draw_coefficients, for draws which must all be regular.
    :returns: (array T x p)
    :raises SingularDraw: if one of the draws is singular
    """
    coefs, ok = draw_coefficients(B, beta, psi, eta)
    if not ok.all():
        raise SingularDraw("Singular draw of I + BΨ⁻¹Bᵀ at draws %s" % (numpy.flatnonzero(~ok).tolist(),))
    return coefs


def redraw_singular(draw, n_draws, rng):
    """
    Collects n_draws regular draws, redrawing the singular ones from the same stream.
    draw (callable (k, rng) -> (tuple of arrays with k rows, array k of bool)): makes k
      draws and tells which ones are regular
    :returns: (tuple of arrays with n_draws rows) the regular draws, in drawing order
    :raises SingularDrawCovariance: if more than MAX_REDRAW_FACTOR × n_draws draws were needed
    """
    kept = []
    n_kept = attempts = 0
    while n_kept < n_draws:
        k = n_draws - n_kept
        if attempts + k > MAX_REDRAW_FACTOR * n_draws:
            raise SingularDrawCovariance("Only %d regular draws out of %d attempts" % (n_kept, attempts))
        values, ok = draw(k, rng)
        attempts += k
        if not ok.all():
            logging.warning("Redrawing %d singular posterior draws", int(numpy.sum(~ok)))
        kept.append(tuple(v[ok] for v in values))
        n_kept += int(numpy.sum(ok))
    return tuple(numpy.concatenate(vs) for vs in zip(*kept))


def mc_standard_error(values, axis=0):
    """ Standard error of the mean of the draws along axis, NaN from a single draw """
    n = values.shape[axis]
    if n < 2:
        return numpy.full(numpy.delete(values.shape, axis), numpy.nan)
    return values.std(axis=axis, ddof=1) / numpy.sqrt(n)


def sample_coefficients(state, n_draws=1000, seed=0, variance_scale=1.0):
    """
    Draws β̃ from the variational posterior: b̄_j ~ N(μ_j, sΩ_j) and
    ψ_j = E(ψ_j) + √s (ψ*_j − E(ψ_j)) with ψ*_j ~ InvGamma(a, ζ_j).
    Singular draws are dropped and redrawn.
    state (VariationalStateLinear)
    n_draws (int >= 1)
    variance_scale (0 <= float <= 1): s; 0 collapses every draw onto the means
    :returns: (array n_draws x p)
    """
    _check_scale(variance_scale)
    if n_draws < 1:
        raise ValueError("Need at least 1 draw, got %d" % (n_draws,))
    pbar, d = state.M.shape
    L = sqrt_covariances(state.Omega)
    E_psi = state.E_psi[:-1]
    root = numpy.sqrt(variance_scale)

    def draw(k, rng):
        eps = rng.standard_normal((k, pbar, d))
        draws = state.M[numpy.newaxis] + root * numpy.einsum('jab,tjb->tja', L, eps)
        psi_star = stats.invgamma.rvs(state.shape, scale=state.zeta[:-1], size=(k, pbar - 1), random_state=rng)
        psi = E_psi + root * (psi_star - E_psi)
        coefs, ok = draw_coefficients(numpy.swapaxes(draws[:, :-1, :], 1, 2), draws[:, -1, :], psi)
        return (coefs,), ok

    coefs, = redraw_singular(draw, n_draws, named_stream(seed, "mc-predict"))
    return coefs


@log_duration
def bayes_rule_mc(state, n_draws=1000, seed=0, variance_scale=1.0):
    """
    Monte Carlo estimate of the posterior mean of β̃.
    :returns:
        rule (PredictionRule)
        coef_se (array p): Monte Carlo standard errors of the coefficients (NaN with a single draw)
    """
    coefs = sample_coefficients(state, n_draws, seed, variance_scale)
    se = mc_standard_error(coefs)
    logging.debug("MC Bayes rule from %d draws, max standard error %g", n_draws, numpy.max(se))
    return PredictionRule(coefs.mean(axis=0)), se


def predict_bayes_mc(state, Xnew, n_draws=1000, seed=0, variance_scale=1.0):
    """
    Xnew (array k x p): standardized features
    :returns:
        predictions (array k): Monte Carlo posterior means of xᵀβ̃
        se (array k): their Monte Carlo standard errors (NaN with a single draw)
    """
    Xnew = _check_columns(state, Xnew)
    coefs = sample_coefficients(state, n_draws, seed, variance_scale)
    per_draw = coefs @ Xnew.T
    return per_draw.mean(axis=0), mc_standard_error(per_draw)


def _check_columns(state, Xnew):
    Xnew = numpy.asarray(Xnew, dtype=float)
    p = state.M.shape[0] - 1
    if Xnew.ndim != 2 or Xnew.shape[1] != p:
        raise DimensionMismatch("Model has %d features but data has shape %s" % (p, Xnew.shape))
    return Xnew


def _coefficients(B, beta, psi):
    return induced_coefficients(FactorParams(B, beta, psi)).coefficients


def taylor_psi_term(B, beta, psi, V_psi):
    """
    ½Σ_j V(ψ_j) ∂²β̃/∂ψ_j² = E diag(E_jj V(ψ_j)) β̃, with E = (BᵀB + Ψ)⁻¹.
    B (array d x p), beta (array d), psi, V_psi (array p)
    :returns: (array p)
    """
    E = numpy.linalg.inv(B.T @ B + numpy.diag(psi))
    coefs = E @ (B.T @ beta)
    return E @ (numpy.diag(E) * V_psi * coefs)


def taylor_loading_term(B, beta, psi, Omega):
    """
    ½Σ_j tr(∂²β̃/∂b_j² Ω_j) over the feature columns, by central differences along
    the eigenvectors of each Ω_j. β̃ is linear in β, so the outcome column adds nothing.
    Omega (array p x d x d)
    :returns: (array p)
    :raises NonFiniteHessianProbe: if a probe is not finite
    """
    base = _coefficients(B, beta, psi)
    total = numpy.zeros_like(base)
    for j in range(B.shape[1]):
        w, V = numpy.linalg.eigh(Omega[j])
        h = PROBE_STEP * (1 + numpy.linalg.norm(B[:, j]))
        for k in range(w.size):
            Bp, Bm = B.copy(), B.copy()
            Bp[:, j] += h * V[:, k]
            Bm[:, j] -= h * V[:, k]
            second = (_coefficients(Bp, beta, psi) - 2 * base + _coefficients(Bm, beta, psi)) / h ** 2
            if not numpy.all(numpy.isfinite(second)):
                raise NonFiniteHessianProbe("Non-finite second difference for column %d" % (j,))
            total += 0.5 * w[k] * second
    return total


def bayes_rule_taylor(state, variance_scale=1.0):
    """
    Second order Taylor approximation of the posterior mean of β̃ around the
    posterior means, using the posterior variances scaled by variance_scale.
    :returns: (PredictionRule)
    """
    _check_scale(variance_scale)
    params = params_from_state(state)
    coefs = _coefficients(params.B, params.beta, params.psi)
    if variance_scale > 0:
        coefs = coefs + variance_scale * (
            taylor_psi_term(params.B, params.beta, params.psi, state.V_psi[:-1]) +
            taylor_loading_term(params.B, params.beta, params.psi, state.Omega[:-1]))
    return PredictionRule(coefs)


def predict_bayes_taylor(state, Xnew, variance_scale=1.0):
    """ :returns: (array k) Taylor-approximated posterior means of xᵀβ̃ """
    Xnew = _check_columns(state, Xnew)
    return Xnew @ bayes_rule_taylor(state, variance_scale).coefficients
