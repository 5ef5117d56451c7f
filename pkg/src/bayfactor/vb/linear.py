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

Mean-field variational Bayes for the linear factor regression model.

The outcome is handled as column p̄ = p + 1 of x̄ = (x, y). Unlabeled rows get a
latent outcome z_i with q(z_i) = N(υ_i, χ); the columns of x̃ then hold y for the
labeled rows and υ for the unlabeled rows.

The factorization is q(Λ)q(B̄)q(ψ̄)q(z) with
    q(λ_i) = N(φ_i, Ξ), q(b̄_j) = N(μ_j, Ω_j), q(ψ̄_j) = InvGamma(a, ζ_j),
a = (n + m)/2 + d/2 + κ.
'''

import dataclasses
import logging
import time
from typing import Optional

import numpy
import scipy.linalg
from scipy.special import digamma, gammaln

from bayfactor.data import OUTCOME_LINEAR
from bayfactor.errors import InvalidDimension, NegativeZeta, NonFiniteELBO, NonPositiveScale, \
    SingularCovariance
from bayfactor.model import FactorParams
from bayfactor.util import finite_result, log_duration, named_stream
from bayfactor.vb.hyper import HyperParams, eb_update

LOG2PI = numpy.log(2 * numpy.pi)
INIT_XI = 0.5
INIT_JITTER = 1e-3


@dataclasses.dataclass
class VariationalStateLinear:
    """
    Phi (array (n+m) x d): means φ_i of the latent factors
    Xi (array d x d): shared covariance Ξ of the latent factors
    M (array (p+1) x d): means μ_j of the loadings, outcome last
    Omega (array (p+1) x d x d): covariances Ω_j of the loadings
    zeta (array p+1): inverse-gamma scales ζ_j
    upsilon (array m): means of the missing outcomes
    chi (float): variance of the missing outcomes
    shape (float): inverse-gamma shape a, shared by all the columns
    elbo_trace (list of float): bound after initialization and after every sweep
    """
    Phi: numpy.ndarray
    Xi: numpy.ndarray
    M: numpy.ndarray
    Omega: numpy.ndarray
    zeta: numpy.ndarray
    upsilon: numpy.ndarray
    chi: float
    shape: float
    elbo_trace: list = dataclasses.field(default_factory=list)
    converged: bool = False
    n_sweeps: int = 0
    hyper: Optional[HyperParams] = None
    runtime_ms: float = 0.0

    @property
    def E_inv_psi(self):
        """ E(ψ_j⁻¹) = a/ζ_j """
        return self.shape / self.zeta

    @property
    def E_psi(self):
        """ E(ψ_j) = ζ_j/(a − 1) """
        return self.zeta / (self.shape - 1)

    @property
    def V_psi(self):
        """ V(ψ_j) = ζ_j²/((a − 1)²(a − 2)) """
        return self.zeta ** 2 / ((self.shape - 1) ** 2 * (self.shape - 2))

    def copy(self):
        return dataclasses.replace(self, Phi=self.Phi.copy(), Xi=self.Xi.copy(), M=self.M.copy(),
                                   Omega=self.Omega.copy(), zeta=self.zeta.copy(),
                                   upsilon=self.upsilon.copy(), elbo_trace=list(self.elbo_trace))


@dataclasses.dataclass
class FitReport:
    elbo_trace: list
    gamma_group: list
    n_sweeps: int
    converged: bool
    runtime_ms: float
    outcome_type: str = OUTCOME_LINEAR

    def to_dict(self):
        return {"elbo_trace": [float(v) for v in self.elbo_trace],
                "gamma_group": [float(v) for v in self.gamma_group],
                "n_sweeps": int(self.n_sweeps),
                "converged": bool(self.converged),
                "runtime_ms": float(self.runtime_ms),
                "outcome_type": self.outcome_type}


def completed_matrix(data, upsilon):
    """ :returns: (array (n+m) x (p+1)) x̃: features, then y / υ """
    return numpy.column_stack([data.X, numpy.concatenate([data.y, upsilon])])


def shape_parameter(n_total, d, kappa):
    return n_total / 2 + d / 2 + kappa


def inv_pd(A, what):
    try:
        cf = scipy.linalg.cho_factor(A, lower=True)
    except numpy.linalg.LinAlgError as ex:
        raise SingularCovariance("%s is not positive definite: %s" % (what, ex))
    inv = scipy.linalg.cho_solve(cf, numpy.eye(A.shape[0]))
    return (inv + inv.T) / 2


def _symmetrize(Omega):
    return (Omega + numpy.swapaxes(Omega, 1, 2)) / 2


def update_factors(state, data):
    """
    Λ-block: Ξ = {Σ_j E(ψ_j⁻¹)(Ω_j + μ_jμ_jᵀ) + I}⁻¹, φ_i = Ξ Σ_j E(ψ_j⁻¹) μ_j x̃_ij
    :returns: (VariationalStateLinear)
    """
    w = state.E_inv_psi
    P = numpy.einsum('j,jab->ab', w, state.Omega) + (state.M.T * w) @ state.M + numpy.eye(state.M.shape[1])
    Xi = inv_pd(P, "Latent factor precision")
    Phi = completed_matrix(data, state.upsilon) @ (w[:, numpy.newaxis] * state.M) @ Xi
    return dataclasses.replace(state, Phi=Phi, Xi=Xi)


def loadings_from_gram(G, PhiTX, gammas, E_inv_psi):
    """
    Gaussian loading posteriors given G = E(ΛᵀΛ) and PhiTX = E(Λ)ᵀx̃:
    μ_j = (G + γ_j⁻¹I)⁻¹Φᵀx̃_j and Ω_j = E(ψ_j⁻¹)⁻¹(G + γ_j⁻¹I)⁻¹, for all the columns
    at once through one eigendecomposition of G.
    :returns: (M, Omega)
    """
    s, U = scipy.linalg.eigh(G)
    inv_diag = 1 / (s[numpy.newaxis, :] + 1 / gammas[:, numpy.newaxis])   # columns x d
    W = U.T @ PhiTX
    M = (U @ (inv_diag.T * W)).T
    Omega = numpy.einsum('ik,jk,lk->jil', U, inv_diag / E_inv_psi[:, numpy.newaxis], U)
    return M, _symmetrize(Omega)


def loading_posterior(Phi, Xi, Xt, gammas, E_inv_psi):
    """ B̄-block of the linear model, with G = ΦᵀΦ + (n+m)Ξ """
    G = Phi.T @ Phi + Phi.shape[0] * Xi
    return loadings_from_gram(G, Phi.T @ Xt, gammas, E_inv_psi)


def update_loadings(state, data, hyper):
    gammas = hyper.column_variances(data.groups)
    M, Omega = loading_posterior(state.Phi, state.Xi, completed_matrix(data, state.upsilon),
                                 gammas, state.E_inv_psi)
    return dataclasses.replace(state, M=M, Omega=Omega)


def _residual_terms(state, data):
    """
    :returns: (array p+1) R_j = E‖x̃_j − Λb_j‖², including m·χ for the outcome column
    """
    Xt = completed_matrix(data, state.upsilon)
    G = state.Phi.T @ state.Phi + data.n_total * state.Xi
    xx = numpy.sum(Xt ** 2, axis=0)
    if data.m > 0:
        xx[-1] += data.m * state.chi
    cross = numpy.sum(state.M * (Xt.T @ state.Phi), axis=1)
    quad = numpy.einsum('ja,ab,jb->j', state.M, G, state.M) + numpy.einsum('ab,jba->j', G, state.Omega)
    return xx - 2 * cross + quad


def _prior_terms(state, gammas):
    """ :returns: (array p+1) μ_jᵀμ_j + tr Ω_j and that divided by γ_j """
    bb = numpy.sum(state.M ** 2, axis=1) + numpy.trace(state.Omega, axis1=1, axis2=2)
    return bb, bb / gammas


def update_scales(state, data, hyper):
    """
    ψ̄-block: ζ_j = ½E‖x̃_j − Λb_j‖² + ½γ_j⁻¹(μ_jᵀμ_j + tr Ω_j) + ν
    """
    R = _residual_terms(state, data)
    _, prior = _prior_terms(state, hyper.column_variances(data.groups))
    zeta = 0.5 * R + 0.5 * prior + hyper.nu
    if numpy.any(zeta <= 0):
        raise NegativeZeta("Non-positive inverse-gamma scale in columns %s" %
                           (numpy.flatnonzero(zeta <= 0).tolist(),))
    return dataclasses.replace(state, zeta=zeta)


def update_labels(state, data):
    """
    z-block: υ_i = μ_p̄ᵀφ_i, χ = E(ψ̄_p̄⁻¹)⁻¹. Nothing to do without unlabeled rows.
    """
    if data.m == 0:
        return state
    upsilon = state.Phi[data.n:] @ state.M[-1]
    chi = float(state.zeta[-1] / state.shape)
    return dataclasses.replace(state, upsilon=upsilon, chi=chi)


@finite_result
def vb_sweep(state, data, hyper):
    """
    One cycle of coordinate updates: factors, loadings, scales, then missing outcomes.
    state (VariationalStateLinear)
    data (Dataset): standardized
    hyper (HyperParams)
    :returns: (VariationalStateLinear) new state (the input is not modified)
    :raises:
        NonFiniteUpdate: if a NaN or Inf appears
        NegativeZeta: if a scale becomes non-positive
    """
    state = update_factors(state, data)
    state = update_loadings(state, data, hyper)
    state = update_scales(state, data, hyper)
    state = update_labels(state, data)
    return dataclasses.replace(state, n_sweeps=state.n_sweeps + 1)


def elbo_linear(state, data, hyper):
    """
    Evidence lower bound of the linear model for the given variational state.
    :returns: (float)
    :raises NonFiniteELBO: if the bound is not finite
    """
    n_tot, pbar = data.n_total, data.p + 1
    d = state.M.shape[1]
    a = state.shape
    kappa, nu = hyper.kappa, hyper.nu
    gammas = hyper.column_variances(data.groups)
    E_inv = state.E_inv_psi
    E_log = numpy.log(state.zeta) - digamma(a)

    R = _residual_terms(state, data)
    bb, bb_scaled = _prior_terms(state, gammas)
    _, logdet_xi = numpy.linalg.slogdet(state.Xi)
    _, logdet_omega = numpy.linalg.slogdet(state.Omega)

    lik = -0.5 * n_tot * pbar * LOG2PI - 0.5 * n_tot * numpy.sum(E_log) - 0.5 * numpy.sum(E_inv * R)
    prior_lambda = -0.5 * n_tot * d * LOG2PI - 0.5 * numpy.sum(state.Phi ** 2) - 0.5 * n_tot * numpy.trace(state.Xi)
    prior_b = numpy.sum(-0.5 * d * LOG2PI - 0.5 * d * numpy.log(gammas) - 0.5 * d * E_log - 0.5 * E_inv * bb_scaled)
    prior_psi = numpy.sum(kappa * numpy.log(nu) - gammaln(kappa) - (kappa + 1) * E_log - nu * E_inv)
    ent_lambda = n_tot * (0.5 * d * (1 + LOG2PI) + 0.5 * logdet_xi)
    ent_b = numpy.sum(0.5 * d * (1 + LOG2PI) + 0.5 * logdet_omega)
    ent_psi = numpy.sum(a + numpy.log(state.zeta) + gammaln(a) - (1 + a) * digamma(a))
    ent_z = 0.5 * data.m * (1 + LOG2PI + numpy.log(state.chi)) if data.m > 0 else 0.0

    elbo = lik + prior_lambda + prior_b + prior_psi + ent_lambda + ent_b + ent_psi + ent_z
    if not numpy.isfinite(elbo):
        raise NonFiniteELBO("Evidence lower bound is %s" % (elbo,))
    return float(elbo)


def vb_init(data, hyper, seed=0):
    """
    Starting state: factor means from the d leading principal component scores of
    the features (unit variance, with a small seeded jitter), Ξ = I/2, missing
    outcomes at 0 with variance 1, scales at ν + (n+m)/2, and the loadings from one
    loading update given these factors.
    :raises InvalidDimension: if d > min(n − 1, p)
    """
    d, n_tot = hyper.d, data.n_total
    if d > min(data.n - 1, data.p):
        raise InvalidDimension("Latent dimension %d larger than min(n − 1, p) = %d" %
                               (d, min(data.n - 1, data.p)))
    rng = named_stream(seed, "init")
    U, _, _ = scipy.linalg.svd(data.X, full_matrices=False)
    Phi = U[:, :d] * numpy.sqrt(n_tot) + INIT_JITTER * rng.standard_normal((n_tot, d))
    Xi = INIT_XI * numpy.eye(d)
    a = shape_parameter(n_tot, d, hyper.kappa)
    zeta = numpy.full(data.p + 1, hyper.nu + n_tot / 2)
    upsilon = numpy.zeros(data.m)
    M, Omega = loading_posterior(Phi, Xi, completed_matrix(data, upsilon),
                                 hyper.column_variances(data.groups), a / zeta)
    return VariationalStateLinear(Phi=Phi, Xi=Xi, M=M, Omega=Omega, zeta=zeta, upsilon=upsilon,
                                  chi=1.0, shape=a, hyper=hyper)


def posthoc_correction(state):
    """
    Rescales the posterior so that E(b̄_jᵀb̄_j + ψ̄_j) = 1 for every column:
    c_j = μ_jᵀμ_j + tr Ω_j + E(ψ̄_j), μ_j ← c_j^{-1/2}μ_j, Ω_j ← Ω_j/c_j, ζ_j ← ζ_j/c_j.
    :returns: (VariationalStateLinear)
    :raises NonPositiveScale: if some c_j <= 0
    """
    c = numpy.sum(state.M ** 2, axis=1) + numpy.trace(state.Omega, axis1=1, axis2=2) + state.E_psi
    if numpy.any(~(c > 0)):
        raise NonPositiveScale("Correction scale is not positive for columns %s" %
                               (numpy.flatnonzero(~(c > 0)).tolist(),))
    return dataclasses.replace(state, M=state.M / numpy.sqrt(c)[:, numpy.newaxis],
                               Omega=state.Omega / c[:, numpy.newaxis, numpy.newaxis],
                               zeta=state.zeta / c)


def params_from_state(state):
    """ :returns: (FactorParams) posterior means, outcome from the last column """
    E_psi = state.E_psi
    return FactorParams(B=state.M[:-1].T, beta=state.M[-1], psi=E_psi[:-1], sigma2=E_psi[-1])


def _ensure_ready(data, hyper):
    data.require_labels()
    if not data.standardized:
        logging.info("Standardizing the data before fitting")
        data = data.standardize()
    return data, hyper.with_groups(data.n_groups)


@log_duration
def fit_vb(data, hyper, tol=1e-6, max_iter=5000, seed=0, correct=True):
    """
    Runs coordinate ascent until the relative change of the bound is below tol,
    updating the prior variances after every sweep when empirical Bayes is on.
    data (Dataset): linear outcome
    hyper (HyperParams)
    tol (float > 0): relative change of the bound at which to stop (inf = one sweep)
    max_iter (int): maximum number of sweeps
    seed (int): seed of the initialization
    correct (bool): apply the correlation correction before returning
    :returns:
        state (VariationalStateLinear): final state, with the final hyperparameters in .hyper
        params (FactorParams): posterior mean parameters
    """
    start = time.perf_counter()
    data, hyper = _ensure_ready(data, hyper)
    state = vb_init(data, hyper, seed)
    state.elbo_trace.append(elbo_linear(state, data, hyper))

    converged = False
    for it in range(max_iter):
        state = vb_sweep(state, data, hyper)
        hyper = eb_update(state, hyper, data.groups)
        state.elbo_trace.append(elbo_linear(state, data, hyper))
        prev, cur = state.elbo_trace[-2], state.elbo_trace[-1]
        if cur < prev - 1e-8 * abs(prev):
            logging.warning("Evidence lower bound decreased at sweep %d: %.12g -> %.12g", it + 1, prev, cur)
        if it % 100 == 0:
            logging.debug("Sweep %d: ELBO %.10g", it + 1, cur)
        if abs(cur - prev) <= tol * abs(prev):
            converged = True
            break

    if not converged:
        logging.warning("Variational Bayes did not converge in %d sweeps", max_iter)
    else:
        logging.info("Variational Bayes converged in %d sweeps, ELBO %.10g", state.n_sweeps, state.elbo_trace[-1])
    state = dataclasses.replace(state, converged=converged, hyper=hyper)
    if correct:
        state = posthoc_correction(state)
    state = dataclasses.replace(state, runtime_ms=(time.perf_counter() - start) * 1e3)
    return state, params_from_state(state)


def fit_report(state, timing=False, outcome_type=OUTCOME_LINEAR):
    """ :returns: (FitReport) of a fitted state; runtime is 0 unless timing is True """
    runtime = state.runtime_ms if timing else 0.0
    gg = state.hyper.gamma_group if state.hyper is not None else []
    return FitReport(state.elbo_trace, list(gg), state.n_sweeps, state.converged, runtime, outcome_type)
