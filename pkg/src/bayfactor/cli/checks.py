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

Validation checks run by "bayfactor check", at a scale that runs in a few minutes.
Each check returns whether it passed and a short description of what it measured.
'''

import contextlib
import dataclasses
import logging
import os

import numpy
from scipy import stats

from bayfactor.correlation import trunc_moments, rejection_moments
from bayfactor.data import Dataset, OUTCOME_LINEAR, OUTCOME_BINOMIAL
from bayfactor.errors import BayFactorError
from bayfactor.freq import em_semisupervised
from bayfactor.gibbs import ChainConfig, gibbs_linear, pg_mean, sample_pg, factor_conditional, draw_factors, \
    loading_conditional, draw_loadings, scale_conditional, draw_scales, draw_labels
from bayfactor.model import PredictionRule, induced_coefficients
from bayfactor.sim import ScenarioSpec, gen_scenario, compute_metrics, run_benchmark
from bayfactor.util import named_stream, THREADS_ENV
from bayfactor.util.log import RecordCollector
from bayfactor.vb import EBMode, default_hyperparams, fit_vb, fit_vb_logistic, vb_sweep, bayes_rule_mc, \
    plugin_rule
from bayfactor.vb.hyper import KAPPA, NU
from bayfactor.vb.linear import update_factors, update_loadings, update_scales, update_labels

ELBO_INSTANCES = 100
BLOCK_INSTANCES = 20
SETTLE_SWEEPS = 20000
GIBBS_INSTANCES = 10
CONDITIONAL_DRAWS = 10000
# limit on the largest of many standardized deviations
CONDITIONAL_SE = 4.0
SCENARIO2_REPLICATIONS = 20
REJECTION_CASES = 25
REJECTION_DRAWS = 1000000
DETERMINISM_THREADS = 4


@dataclasses.dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""
    warnings: list = dataclasses.field(default_factory=list)


def factor_data(rng, n, m, p, d, outcome=OUTCOME_LINEAR, n_groups=2):
    """
    Draws a small data set from the factor model with standard normal loadings and
    unit uniquenesses, features split into contiguous groups.
    :returns: (Dataset) standardized
    """
    Lam = rng.standard_normal((n + m, d))
    B = rng.standard_normal((d, p))
    beta = rng.standard_normal(d)
    X = Lam @ B + rng.standard_normal((n + m, p))
    score = Lam[:n] @ beta
    if outcome == OUTCOME_BINOMIAL:
        y = rng.binomial(1, 1 / (1 + numpy.exp(-score))).astype(float)
    else:
        y = score + rng.standard_normal(n)
    groups = numpy.minimum(numpy.arange(p) * n_groups // p + 1, n_groups)
    return Dataset(X, y, groups, outcome).standardize()


def _monotone(trace):
    trace = numpy.asarray(trace)
    drops = trace[:-1] - trace[1:]
    return float(numpy.max(drops / numpy.abs(trace[:-1]), initial=0.0))


def check_elbo_monotone(seed):
    rng = named_stream(seed, "check-elbo")
    worst = 0.0
    for k in range(ELBO_INSTANCES):
        m = 5 * (k % 2)
        data = factor_data(rng, 20, m, 10, 2)
        state, _ = fit_vb(data, default_hyperparams(2, data.n_groups), 1e-12, 200, seed + k, correct=False)
        worst = max(worst, _monotone(state.elbo_trace))
        bdata = factor_data(rng, 20, m, 10, 2, OUTCOME_BINOMIAL)
        bstate, _ = fit_vb_logistic(bdata, default_hyperparams(2, bdata.n_groups), 1e-12, 200, seed + k)
        worst = max(worst, _monotone(bstate.elbo_trace))
    return worst <= 1e-8, "largest relative decrease %.3g over %d linear and %d binomial fits" % \
        (worst, ELBO_INSTANCES, ELBO_INSTANCES)


def _state_change(a, b):
    """ largest absolute difference between the parameters of two linear states """
    fields = ("Phi", "Xi", "M", "Omega", "zeta", "upsilon")
    change = max((float(numpy.abs(getattr(a, f) - getattr(b, f)).max(initial=0.0)) for f in fields))
    return max(change, abs(a.chi - b.chi))


def check_blockwise_optimal(seed):
    rng = named_stream(seed, "check-block")
    worst = 0.0
    for k in range(BLOCK_INSTANCES):
        data = factor_data(rng, 30, 10, 8, 2)
        state, _ = fit_vb(data, default_hyperparams(2, data.n_groups), 1e-13, 20000, seed + k, correct=False)
        hyper = state.hyper
        for _ in range(SETTLE_SWEEPS):
            again = vb_sweep(state, data, hyper)
            settled = _state_change(again, state) < 1e-11
            state = again
            if settled:
                break
        blocks = (lambda s: update_factors(s, data), lambda s: update_loadings(s, data, hyper),
                  lambda s: update_scales(s, data, hyper), lambda s: update_labels(s, data))
        for block in blocks:
            worst = max(worst, _state_change(block(state), state))
    return worst <= 1e-8, "largest change from a single block update %.3g" % (worst,)


def check_gibbs_vb(seed):
    rng = named_stream(seed, "check-gibbs")
    worst_cor = 1.0
    mismatches = 0
    for k in range(GIBBS_INSTANCES):
        data = factor_data(rng, 200, 0, 5, 1, n_groups=1)
        hyper = default_hyperparams(1, 1)
        _, params = fit_vb(data, hyper, 1e-8, 5000, seed + k)
        vb_coef = induced_coefficients(params).coefficients
        summary = gibbs_linear(data, hyper, ChainConfig(3000, 1000, 2, seed + k))
        gibbs_coef = summary.rule.coefficients
        worst_cor = min(worst_cor, float(stats.pearsonr(vb_coef, gibbs_coef)[0]))
        big = numpy.abs(gibbs_coef) > 0.05
        mismatches += int(numpy.sum(numpy.sign(vb_coef[big]) != numpy.sign(gibbs_coef[big])))
    return worst_cor > 0.9 and mismatches == 0, \
        "smallest rule correlation %.4f, %d sign disagreements" % (worst_cor, mismatches)


def _z_scores(draws, mean, var):
    """ |sample mean − mean| in standard errors, column-wise """
    draws = numpy.asarray(draws).reshape(len(draws), -1)
    return numpy.abs(draws.mean(axis=0) - numpy.ravel(mean)) / numpy.sqrt(numpy.ravel(var) / len(draws))


def _var_z_scores(draws, var):
    """ |sample variance − var| in standard errors (Gaussian draws), column-wise """
    draws = numpy.asarray(draws).reshape(len(draws), -1)
    var = numpy.ravel(var)
    return numpy.abs(draws.var(axis=0, ddof=1) - var) / (var * numpy.sqrt(2 / (len(draws) - 1)))


def check_gibbs_conditionals(seed):
    """
    Freezes all the blocks but one and compares the draws of that block with the
    moments of its closed-form conditional.
    """
    rng = named_stream(seed, "check-conditionals")
    K = CONDITIONAL_DRAWS
    d, pbar = 2, 5
    Bbar = rng.standard_normal((d, pbar))
    psi = rng.uniform(0.5, 1.5, pbar)
    Lam = rng.standard_normal((30, d))
    Xbar = Lam @ Bbar + rng.standard_normal((30, pbar))
    gammas = numpy.array([0.5, 0.5, 2.0, 2.0, 1.0])
    z = {}

    means, P = factor_conditional(Xbar[:1], Bbar, psi)
    cov = numpy.linalg.inv(P)
    draws = draw_factors(numpy.repeat(Xbar[:1], K, axis=0), Bbar, psi, rng)
    z["factors"] = max(_z_scores(draws, means[0], numpy.diag(cov)).max(), _var_z_scores(draws, numpy.diag(cov)).max())

    means, U, inv_diag = loading_conditional(Xbar, Lam, gammas)
    var = psi * numpy.einsum('ab,jb,ab->aj', U, inv_diag, U)
    draws = numpy.stack([draw_loadings(Xbar, Lam, psi, gammas, rng) for _ in range(K)])
    z["loadings"] = max(_z_scores(draws, means, var).max(), _var_z_scores(draws, var).max())

    shape, scales = scale_conditional(Xbar, Lam, Bbar, gammas, KAPPA, NU)
    draws = numpy.stack([draw_scales(Xbar, Lam, Bbar, gammas, KAPPA, NU, rng) for _ in range(K)])
    var = scales ** 2 / ((shape - 1) ** 2 * (shape - 2))
    z["scales"] = _z_scores(draws, scales / (shape - 1), var).max()

    lam = numpy.repeat(Lam[:1], K, axis=0)
    draws = draw_labels(lam, Bbar[:, -1], psi[-1], rng)
    z["labels"] = max(_z_scores(draws, Lam[0] @ Bbar[:, -1], psi[-1]).max(), _var_z_scores(draws, psi[-1]).max())

    pg = []
    for N, c in ((1, 0.5), (2, 2.0)):
        draws = sample_pg(N, c, rng, size=(K,))
        pg.append(abs(draws.mean() - pg_mean(N, c)) / (draws.std(ddof=1) / numpy.sqrt(K)))
    z["polya-gamma"] = max(pg)

    worst = max(z, key=z.get)
    return z[worst] <= CONDITIONAL_SE, "largest deviation %.2f standard errors (%s)" % (z[worst], worst)


def check_em_monotone(seed):
    rng = named_stream(seed, "check-em")
    data = factor_data(rng, 40, 40, 6, 1)
    params = em_semisupervised(data, 1, tol=1e-10, max_iter=200)
    worst = min(params.q_gains, default=0.0)
    return worst >= -1e-10, "smallest expected log-likelihood gain %.3g" % (worst,)


def check_eb_constrained(seed):
    rng = named_stream(seed, "check-eb")
    data = factor_data(rng, 40, 20, 10, 2)
    state, _ = fit_vb(data, default_hyperparams(2, data.n_groups, EBMode.CONSTRAINED), 1e-8, 2000, seed)
    sizes = numpy.bincount(data.groups)[1:]
    total = float(numpy.sum(sizes * numpy.log(state.hyper.gamma_group)))
    return abs(total) <= 1e-10, "size-weighted log multipliers sum to %.3g" % (total,)


def check_scenario2(seed):
    """
    Strongly loading second group: empirical Bayes gives it the larger multiplier, and
    unlabeled rows do not make variational Bayes predict worse.
    """
    table = run_benchmark(scenarios=(2,), methods=("vb", "eb-vb"), replications=SCENARIO2_REPLICATIONS,
                          m_values=(0, 100), seed=seed)
    eb = table[(table["method"] == "eb-vb") & (table["status"] != "failed")]
    log_g1, log_g2 = numpy.log(eb["gamma1"]), numpy.log(eb["gamma2"])
    share = float(numpy.mean(eb["gamma2"] > eb["gamma1"])) if len(eb) else 0.0
    vb = table[table["method"] == "vb"]
    pmse0 = vb[vb["m"] == 0]["pmse"].median()
    pmse100 = vb[vb["m"] == 100]["pmse"].median()
    passed = bool(log_g2.median() > log_g1.median()) and share >= 0.9 and bool(pmse100 <= pmse0)
    return passed, "γ′₂ > γ′₁ in %.0f%% of the fits, median PMSE %.4f (m=0) and %.4f (m=100)" % \
        (100 * share, pmse0, pmse100)


def check_null_calibration(seed):
    train, truth, test = gen_scenario(ScenarioSpec(id=1, n=2000, seed=seed))
    report = compute_metrics(PredictionRule(numpy.zeros(train.p)), truth, test)
    return 0.9 <= report.pmse <= 1.1, "null prediction mean squared error %.4f" % (report.pmse,)


def check_truncated_symmetric(seed):
    tm = trunc_moments(numpy.zeros(1), numpy.eye(1) * 0.5)
    return abs(float(tm.mean[0])) <= 1e-10, "mean %.3g" % (float(tm.mean[0]),)


def check_truncated_rejection(seed):
    """ truncated moments against the moments of Gaussian draws kept inside the unit ball """
    rng = named_stream(seed, "check-truncated")
    worst = 0.0
    for k in range(REJECTION_CASES):
        d = 1 + k % 3
        Q, _ = numpy.linalg.qr(rng.standard_normal((d, d)))
        omega = Q * rng.uniform(0.1, 0.3, d) @ Q.T
        mu = rng.uniform(-0.5, 0.5, d)
        tm = trunc_moments(mu, omega)
        mean, cov, rate, kept = rejection_moments(mu, omega, REJECTION_DRAWS, rng)
        if rate <= 0.01:
            continue
        N = kept.shape[0]
        centered = kept - mean
        worst = max(worst, float(numpy.max(numpy.abs(tm.mean - mean) / (kept.std(axis=0, ddof=1) / numpy.sqrt(N)))))
        products = centered[:, :, numpy.newaxis] * centered[:, numpy.newaxis, :]
        cov_se = products.std(axis=0, ddof=1) / numpy.sqrt(N)
        worst = max(worst, float(numpy.max(numpy.abs(tm.cov - cov) / cov_se)))
        worst = max(worst, abs(tm.L - rate) / numpy.sqrt(rate * (1 - rate) / REJECTION_DRAWS))
    return worst <= CONDITIONAL_SE, "largest deviation %.2f standard errors over %d cases" % \
        (worst, REJECTION_CASES)


def check_pg_moments(seed):
    rng = named_stream(seed, "check-pg")
    worst = 0.0
    for N in (1, 2):
        for c in (0.0, 0.5, 2.0, 10.0):
            draws = sample_pg(N, c, rng, size=(20000,))
            z = abs(draws.mean() - pg_mean(N, c)) / (draws.std(ddof=1) / numpy.sqrt(draws.size))
            worst = max(worst, float(z))
    return worst <= 4, "largest deviation %.2f standard errors" % (worst,)


def check_prediction_degenerate(seed):
    rng = named_stream(seed, "check-predict")
    data = factor_data(rng, 30, 10, 8, 2)
    state, _ = fit_vb(data, default_hyperparams(2, data.n_groups), 1e-8, 2000, seed)
    mc_rule, _ = bayes_rule_mc(state, 20, seed, variance_scale=0.0)
    diff = float(numpy.abs(mc_rule.coefficients - plugin_rule(state).coefficients).max())
    return diff <= 1e-10, "largest difference to the plug-in rule %.3g" % (diff,)


@contextlib.contextmanager
def _threads(n):
    """ sets the worker thread count for the duration of the block """
    old = os.environ.get(THREADS_ENV)
    os.environ[THREADS_ENV] = str(n)
    try:
        yield
    finally:
        if old is None:
            del os.environ[THREADS_ENV]
        else:
            os.environ[THREADS_ENV] = old


def _determinism_run(seed):
    table = run_benchmark(scenarios=(1,), methods=("em-pml", "vb", "eb-vb"), replications=2, m_values=(0, 10),
                          n=30, p=20, seed=seed)
    data = factor_data(named_stream(seed, "check-determinism"), 40, 10, 6, 1, n_groups=1)
    summary = gibbs_linear(data, default_hyperparams(1, 1), ChainConfig(400, 100, 1, seed), n_chains=2)
    return table, summary.rule.coefficients


def check_determinism(seed):
    """ the same seed gives bitwise identical results, whatever the number of threads """
    runs = []
    for n in (1, 1, DETERMINISM_THREADS):
        with _threads(n):
            runs.append(_determinism_run(seed))
    table, coef = runs[0]
    same = [t.equals(table) and numpy.array_equal(c, coef) for t, c in runs[1:]]
    return all(same), "repeated run %s, %d threads %s" % ("identical" if same[0] else "differs",
                                                          DETERMINISM_THREADS, "identical" if same[1] else "differs")


CRITERIA = {
    "elbo-monotone": check_elbo_monotone,
    "blockwise-optimal": check_blockwise_optimal,
    "gibbs-vb": check_gibbs_vb,
    "gibbs-conditionals": check_gibbs_conditionals,
    "em-monotone": check_em_monotone,
    "eb-constrained": check_eb_constrained,
    "scenario2-qualitative": check_scenario2,
    "null-calibration": check_null_calibration,
    "truncated-symmetric": check_truncated_symmetric,
    "truncated-rejection": check_truncated_rejection,
    "pg-moments": check_pg_moments,
    "prediction-degenerate": check_prediction_degenerate,
    "determinism": check_determinism,
}


def run_check(criteria=None, seed=0):
    """
    Runs the named checks (all of them if None), in registry order. A check raising a
    library error fails with the error as detail.
    :returns: (list of CheckResult)
    """
    names = [c for c in CRITERIA if criteria is None or c in criteria]
    results = []
    for name in names:
        logging.info("Running check %s", name)
        with RecordCollector() as collector:
            try:
                passed, detail = CRITERIA[name](seed)
            except BayFactorError as ex:
                passed, detail = False, "%s: %s" % (type(ex).__name__, ex)
        if not passed:
            logging.warning("Check %s failed: %s", name, detail)
        results.append(CheckResult(name, bool(passed), detail, collector.messages))
    return results
