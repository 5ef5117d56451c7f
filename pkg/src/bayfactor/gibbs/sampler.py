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

Gibbs samplers of the linear and binomial factor regression models. They are slow
and mix poorly; they serve as references for the variational approximations.

Notation: X̄ (array n_tot x p̄) holds the features and the outcome (last column),
Λ (array n_tot x d) the factors, B̄ (array d x p̄) the loadings.
'''

from concurrent.futures import ThreadPoolExecutor
import dataclasses
import logging

import numpy
import pandas
import scipy.linalg
from scipy.special import expit

from bayfactor.data import OUTCOME_LINEAR, OUTCOME_BINOMIAL
from bayfactor.errors import NonPDConditional, InvalidSpec, DimensionMismatch
from bayfactor.gibbs.polyagamma import sample_pg
from bayfactor.model import PredictionRule, LINK_LOGIT, LINK_IDENTITY
from bayfactor.util import named_seed, max_threads, log_duration
from bayfactor.vb.predict import batch_coefficients


@dataclasses.dataclass(frozen=True)
class ChainConfig:
    n_iter: int = 5000
    burn_in: int = 1000
    thin: int = 2
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.burn_in < self.n_iter:
            raise InvalidSpec("Burn-in (%d) must be within [0, n_iter = %d)" % (self.burn_in, self.n_iter))
        if self.thin < 1:
            raise InvalidSpec("Thinning must be >= 1, got %d" % (self.thin,))

    @property
    def n_kept(self):
        return len(range(self.burn_in, self.n_iter, self.thin))


def _chol(P, what):
    try:
        return numpy.linalg.cholesky(P)
    except numpy.linalg.LinAlgError as ex:
        raise NonPDConditional("%s is not positive definite: %s" % (what, ex))


# Linear model conditionals

def factor_conditional(Xbar, Bbar, psi):
    """
    λ_i | · ~ N(P⁻¹B̄Ψ̄⁻¹x̄_i, P⁻¹) with P = B̄Ψ̄⁻¹B̄ᵀ + I (shared by all the rows).
    :returns: means (array n_tot x d), precision P (array d x d)
    """
    P = numpy.eye(Bbar.shape[0]) + (Bbar / psi) @ Bbar.T
    means = scipy.linalg.cho_solve((_chol(P, "Factor precision"), True), (Bbar / psi) @ Xbar.T).T
    return means, P


def draw_factors(Xbar, Bbar, psi, rng):
    means, P = factor_conditional(Xbar, Bbar, psi)
    L = _chol(P, "Factor precision")
    noise = scipy.linalg.solve_triangular(L.T, rng.standard_normal(means.shape).T, lower=False).T
    return means + noise


def loading_conditional(Xbar, Lam, gammas):
    """
    b̄_j | · ~ N(A_j⁻¹Λᵀx̄_j, ψ̄_j A_j⁻¹) with A_j = ΛᵀΛ + γ_j⁻¹I.
    :returns:
        means (array d x p̄)
        U (array d x d), inv_diag (array p̄ x d): A_j⁻¹ = U diag(inv_diag[j]) Uᵀ
    """
    s, U = scipy.linalg.eigh(Lam.T @ Lam)
    inv_diag = 1 / (numpy.maximum(s, 0)[numpy.newaxis, :] + 1 / gammas[:, numpy.newaxis])
    means = U @ (inv_diag.T * (U.T @ (Lam.T @ Xbar)))
    return means, U, inv_diag


def draw_loadings(Xbar, Lam, psi, gammas, rng):
    means, U, inv_diag = loading_conditional(Xbar, Lam, gammas)
    eps = rng.standard_normal(means.shape)
    return means + U @ (numpy.sqrt(inv_diag * psi[:, numpy.newaxis]).T * eps)


def scale_conditional(Xbar, Lam, Bbar, gammas, kappa, nu):
    """
    ψ̄_j | · ~ InvGamma((n_tot + d)/2 + κ, ½‖x̄_j − Λb̄_j‖² + ½γ_j⁻¹b̄_jᵀb̄_j + ν).
    :returns: shape (float), scales (array p̄)
    """
    n_tot, d = Lam.shape
    resid = Xbar - Lam @ Bbar
    scales = 0.5 * numpy.sum(resid ** 2, axis=0) + 0.5 * numpy.sum(Bbar ** 2, axis=0) / gammas + nu
    return (n_tot + d) / 2 + kappa, scales


def draw_scales(Xbar, Lam, Bbar, gammas, kappa, nu, rng):
    shape, scales = scale_conditional(Xbar, Lam, Bbar, gammas, kappa, nu)
    return scales / rng.gamma(shape, size=scales.shape)


def draw_labels(Lam_unlabeled, beta, sigma2, rng):
    """ z_i | · ~ N(βᵀλ_i, σ²) """
    return Lam_unlabeled @ beta + numpy.sqrt(sigma2) * rng.standard_normal(Lam_unlabeled.shape[0])


def _keep(config, it):
    return it >= config.burn_in and (it - config.burn_in) % config.thin == 0


def sample_chain_linear(Xbar, n, gammas, kappa, nu, d, config, rng):
    """
    Runs one chain of the linear model.
    Xbar (array n_tot x p̄): features and outcome; rows n.. are unlabeled (outcome ignored).
      May have no rows at all, which samples from the prior.
    gammas (array p̄): prior variance of every column
    :returns: (dict str -> array) retained draws "B" (K x d x p̄), "psi" (K x p̄), "z" (K x m),
      "coef" (K x p)
    """
    Xbar = numpy.array(Xbar, dtype=float)
    n_tot, pbar = Xbar.shape
    m = n_tot - n
    Lam = rng.standard_normal((n_tot, d))
    Bbar = numpy.zeros((d, pbar))
    psi = numpy.ones(pbar)
    Xbar[n:, -1] = 0.0

    K = config.n_kept
    draws = {"B": numpy.empty((K, d, pbar)), "psi": numpy.empty((K, pbar)), "z": numpy.empty((K, m))}
    k = 0
    for it in range(config.n_iter):
        if n_tot > 0:
            Lam = draw_factors(Xbar, Bbar, psi, rng)
        Bbar = draw_loadings(Xbar, Lam, psi, gammas, rng)
        psi = draw_scales(Xbar, Lam, Bbar, gammas, kappa, nu, rng)
        if m > 0:
            Xbar[n:, -1] = draw_labels(Lam[n:], Bbar[:, -1], psi[-1], rng)
        if _keep(config, it):
            draws["B"][k], draws["psi"][k], draws["z"][k] = Bbar, psi, Xbar[n:, -1]
            k += 1
        if it % 1000 == 0:
            logging.debug("Gibbs iteration %d of %d", it, config.n_iter)
    draws["coef"] = batch_coefficients(draws["B"][:, :, :-1], draws["B"][:, :, -1], draws["psi"][:, :-1])
    return draws


# Binomial model conditionals

def logistic_factor_conditional(X, B, psi, beta_bar, eta, kappa):
    """
    λ_i | · ~ N(P_i⁻¹{BΨ⁻¹x_i + (κ_i − η_iβ₀)β}, P_i⁻¹), P_i = BΨ⁻¹Bᵀ + η_iββᵀ + I.
    :returns: means (array n_tot x d), precisions (array n_tot x d x d)
    """
    beta0, beta = beta_bar[0], beta_bar[1:]
    common = numpy.eye(B.shape[0]) + (B / psi) @ B.T
    P = common[numpy.newaxis] + eta[:, numpy.newaxis, numpy.newaxis] * numpy.outer(beta, beta)[numpy.newaxis]
    rhs = X @ (B / psi).T + numpy.outer(kappa - eta * beta0, beta)
    try:
        means = numpy.linalg.solve(P, rhs[..., numpy.newaxis])[..., 0]
    except numpy.linalg.LinAlgError as ex:
        raise NonPDConditional("Factor precision is singular: %s" % (ex,))
    return means, P


def outcome_loading_conditional(Lam, eta, kappa, gamma):
    """
    (β₀, β) | · ~ N(P⁻¹[Σκ_i; Λᵀκ], P⁻¹), P = [[Ση_i, ηᵀΛ], [Λᵀη, ΛᵀDΛ + γ⁻¹I]], D = diag(η).
    :returns: mean (array d+1), precision (array (d+1) x (d+1))
    """
    d = Lam.shape[1]
    Lam1 = numpy.column_stack([numpy.ones(Lam.shape[0]), Lam])
    P = (Lam1.T * eta) @ Lam1
    P[1:, 1:] += numpy.eye(d) / gamma
    L = _chol(P, "Outcome loading precision")
    mean = scipy.linalg.cho_solve((L, True), Lam1.T @ kappa)
    return mean, P


def sample_chain_logistic(X, y, trials, gammas, kappa, nu, d, config, rng):
    """
    Runs one chain of the binomial model.
    X (array n_tot x p), y (array n): successes of the labeled rows, trials (array n_tot)
    gammas (array p + 1): prior variances, outcome last
    :returns: (dict str -> array) retained draws "B" (K x d x p), "beta_bar" (K x d+1),
      "psi" (K x p), "z" (K x m), "coef" (K x p)
    """
    n_tot, p = X.shape
    n = y.shape[0]
    m = n_tot - n
    N = numpy.asarray(trials, dtype=float)
    succ = numpy.concatenate([numpy.asarray(y, dtype=float), numpy.round(N[n:] / 2)])
    Lam = rng.standard_normal((n_tot, d))
    B = numpy.zeros((d, p))
    beta_bar = numpy.zeros(d + 1)
    psi = numpy.ones(p)

    K = config.n_kept
    draws = {"B": numpy.empty((K, d, p)), "beta_bar": numpy.empty((K, d + 1)), "psi": numpy.empty((K, p)),
             "z": numpy.empty((K, m))}
    k = 0
    for it in range(config.n_iter):
        omega = beta_bar[0] + Lam @ beta_bar[1:]
        eta = sample_pg(N, omega, rng)
        kap = succ - N / 2
        means, P = logistic_factor_conditional(X, B, psi, beta_bar, eta, kap)
        L = _chol(P, "Factor precision")
        Lam = means + numpy.linalg.solve(numpy.swapaxes(L, 1, 2), rng.standard_normal((n_tot, d, 1)))[..., 0]
        mean, Pb = outcome_loading_conditional(Lam, eta, kap, gammas[-1])
        Lb = _chol(Pb, "Outcome loading precision")
        beta_bar = mean + scipy.linalg.solve_triangular(Lb.T, rng.standard_normal(d + 1), lower=False)
        B = draw_loadings(X, Lam, psi, gammas[:-1], rng)
        psi = draw_scales(X, Lam, B, gammas[:-1], kappa, nu, rng)
        if m > 0:
            succ[n:] = rng.binomial(N[n:].astype(int), expit(beta_bar[0] + Lam[n:] @ beta_bar[1:]))
        if _keep(config, it):
            draws["B"][k], draws["beta_bar"][k], draws["psi"][k], draws["z"][k] = B, beta_bar, psi, succ[n:]
            k += 1
        if it % 1000 == 0:
            logging.debug("Gibbs iteration %d of %d", it, config.n_iter)
    draws["coef"] = batch_coefficients(draws["B"], draws["beta_bar"][:, 1:], draws["psi"])
    return draws


# Summaries

def trace_statistics(trace):
    """
    trace (array K): draws of one scalar
    :returns: mean, variance and lag-1 autocorrelation (0 for a constant trace)
    """
    trace = numpy.asarray(trace, dtype=float)
    mean, var = trace.mean(), trace.var()
    if trace.size < 2 or var == 0:
        return mean, var, 0.0
    c = trace - mean
    return mean, var, float(numpy.sum(c[1:] * c[:-1]) / (trace.size * var))


@dataclasses.dataclass
class GibbsSummary:
    """
    Posterior means and variances of the loadings (outcome last for the linear model),
    the uniquenesses and the missing outcomes, the rule averaged over the draws, and
    the retained draws themselves.
    """
    B_mean: numpy.ndarray
    B_var: numpy.ndarray
    psi_mean: numpy.ndarray
    psi_var: numpy.ndarray
    z_mean: numpy.ndarray
    z_var: numpy.ndarray
    rule: PredictionRule
    draws: dict
    outcome: str = OUTCOME_LINEAR

    @classmethod
    def from_draws(cls, draws, outcome=OUTCOME_LINEAR):
        if outcome == OUTCOME_BINOMIAL:
            rule = PredictionRule(draws["coef"].mean(axis=0), draws["beta_bar"][:, 0].mean(), LINK_LOGIT)
        else:
            rule = PredictionRule(draws["coef"].mean(axis=0), 0.0, LINK_IDENTITY)
        return cls(draws["B"].mean(axis=0), draws["B"].var(axis=0), draws["psi"].mean(axis=0),
                   draws["psi"].var(axis=0), draws["z"].mean(axis=0), draws["z"].var(axis=0), rule, draws, outcome)

    def to_frame(self):
        """ :returns: (pandas.DataFrame) one row per retained draw, one column per scalar """
        cols = {}
        for name in ("coef", "psi", "z"):
            for j in range(self.draws[name].shape[1]):
                cols["%s_%d" % (name, j + 1)] = self.draws[name][:, j]
        if "beta_bar" in self.draws:
            cols["beta0"] = self.draws["beta_bar"][:, 0]
        return pandas.DataFrame(cols)

    def to_csv(self, path):
        self.to_frame().to_csv(path, index=False, float_format="%.17g")

    def trace_table(self):
        """ :returns: (pandas.DataFrame) mean, variance and lag-1 autocorrelation of every column """
        rows = [(name,) + trace_statistics(col) for name, col in self.to_frame().items()]
        return pandas.DataFrame(rows, columns=["name", "mean", "variance", "lag1"])


def _merge(chains):
    return {k: numpy.concatenate([c[k] for c in chains]) for k in chains[0]}


def run_chains(chain_fn, config, n_chains=1, name="gibbs"):
    """
    Runs independent chains, in parallel up to the thread cap, each on its own stream
    spawned from the master seed.
    chain_fn (callable Generator -> dict): one chain
    :returns: (dict) draws of all the chains concatenated in chain order
    """
    if n_chains < 1:
        raise InvalidSpec("Need at least one chain, got %d" % (n_chains,))
    seeds = named_seed(config.seed, name).spawn(n_chains)
    with ThreadPoolExecutor(max_workers=max_threads()) as executor:
        chains = list(executor.map(lambda s: chain_fn(numpy.random.default_rng(s)), seeds))
    return _merge(chains)


def _prepare(data, hyper):
    data.require_labels()
    if not data.standardized:
        data = data.standardize()
    hyper = hyper.with_groups(data.n_groups)
    if hyper.d > data.p:
        raise DimensionMismatch("Latent dimension %d larger than p = %d" % (hyper.d, data.p))
    return data, hyper, hyper.column_variances(data.groups)


@log_duration
def gibbs_linear(data, hyper, config, n_chains=1):
    """
    data (Dataset): linear outcome
    hyper (HyperParams): fixed prior hyperparameters
    config (ChainConfig)
    :returns: (GibbsSummary)
    """
    data, hyper, gammas = _prepare(data, hyper)
    Xbar = numpy.column_stack([data.X, numpy.concatenate([data.y, numpy.zeros(data.m)])])

    def chain(rng):
        return sample_chain_linear(Xbar, data.n, gammas, hyper.kappa, hyper.nu, hyper.d, config, rng)

    return GibbsSummary.from_draws(run_chains(chain, config, n_chains), OUTCOME_LINEAR)


@log_duration
def gibbs_logistic(data, hyper, config, n_chains=1):
    """
    data (Dataset): binomial outcome
    :returns: (GibbsSummary)
    """
    if data.outcome != OUTCOME_BINOMIAL:
        raise InvalidSpec("Logistic sampler needs a binomial outcome, got %s" % (data.outcome,))
    data, hyper, gammas = _prepare(data, hyper)

    def chain(rng):
        return sample_chain_logistic(data.X, data.y, data.trials, gammas, hyper.kappa, hyper.nu, hyper.d,
                                     config, rng)

    return GibbsSummary.from_draws(run_chains(chain, config, n_chains), OUTCOME_BINOMIAL)
