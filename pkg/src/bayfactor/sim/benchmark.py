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

Simulation benchmark: every method is fitted on every replication of every scenario
and number of unlabeled rows, and evaluated on the independent test set.
'''

from concurrent.futures import ThreadPoolExecutor
import logging
import math
import time

import numpy
import pandas
from scipy.special import logit

from bayfactor.data import OUTCOME_LINEAR, OUTCOME_BINOMIAL
from bayfactor.errors import BayFactorError, EstimationError, InvalidSpec, MethodFailed
from bayfactor.freq import ridge_fit, two_step_fit, cv_penalty, em_semisupervised
from bayfactor.model import PredictionRule, induced_coefficients, kaiser_dimension, LINK_LOGIT
from bayfactor.sim.metrics import compute_metrics
from bayfactor.sim.scenario import ScenarioSpec, gen_scenario
from bayfactor.util import max_threads
from bayfactor.util.config import CV_FOLDS, PENALTY_GRID, SIM_REPLICATIONS, SIM_M_VALUES
from bayfactor.vb.hyper import EBMode, default_hyperparams
from bayfactor.vb.linear import fit_vb
from bayfactor.vb.logistic import fit_vb_logistic, logistic_rule

METHODS = ("ridge", "two-step", "em-pml", "vb", "eb-vb", "null")
BINOMIAL_METHODS = ("vb", "eb-vb", "null")
FULL_M_VALUES = (0, 50, 100, 200, 500)
FULL_REPLICATIONS = 50

COLUMNS = ["scenario", "method", "m", "replication", "emse", "pmse", "cor", "gamma1", "gamma2",
           "runtime_ms", "status"]
BINOMIAL_COLUMNS = ["bss", "auc"]
METRICS = ["emse", "pmse", "cor", "gamma1", "gamma2"]


def replication_seed(seed, scenario, replication):
    """ :returns: (int) seed of one replication, shared by all the m values and methods """
    return int(numpy.random.SeedSequence([int(seed), int(scenario), int(replication)]).generate_state(1)[0])


def fit_method(method, train, tol=1e-6, max_iter=5000, seed=0):
    """
    Fits one method on a standardized training set.
    :returns:
        rule (PredictionRule)
        gamma_group (array or None): estimated group multipliers (empirical Bayes only)
    :raises InvalidSpec: if the method is unknown or does not handle the outcome type
    """
    binomial = train.outcome == OUTCOME_BINOMIAL
    if binomial and method not in BINOMIAL_METHODS:
        raise InvalidSpec("Method %s does not handle binomial outcomes" % (method,))

    if method == "null":
        if binomial:
            prevalence = numpy.clip(train.y.sum() / train.trials[:train.n].sum(), 1e-6, 1 - 1e-6)
            return PredictionRule(numpy.zeros(train.p), logit(prevalence), LINK_LOGIT), None
        return PredictionRule(numpy.zeros(train.p)), None
    if method == "ridge":
        return ridge_fit(train, seed=seed), None

    d = kaiser_dimension(train.X, train.n)
    if method == "two-step":
        return two_step_fit(train, d), None
    if method == "em-pml":
        penalty = cv_penalty(train, d, CV_FOLDS, PENALTY_GRID, seed=seed)
        return induced_coefficients(em_semisupervised(train, d, penalty)), None
    if method in ("vb", "eb-vb"):
        mode = EBMode.CONSTRAINED if method == "eb-vb" else EBMode.OFF
        hyper = default_hyperparams(d, train.n_groups, mode)
        if binomial:
            state, _ = fit_vb_logistic(train, hyper, tol, max_iter, seed)
            rule = logistic_rule(state)
        else:
            state, params = fit_vb(train, hyper, tol, max_iter, seed)
            rule = induced_coefficients(params)
        gg = state.hyper.gamma_group if method == "eb-vb" else None
        return rule, gg
    raise InvalidSpec("Unknown method %s" % (method,))


def _run_cell(spec, method, replication, tol, max_iter, timing):
    train, truth, test = gen_scenario(spec)
    row = {"scenario": spec.id, "method": method, "m": spec.m, "replication": replication,
           "gamma1": math.nan, "gamma2": math.nan, "runtime_ms": 0.0}
    start = time.perf_counter()
    try:
        try:
            rule, gg = fit_method(method, train, tol, max_iter, spec.seed)
        except EstimationError as ex:
            raise MethodFailed("%s failed: %s" % (method, ex))
        try:
            report = compute_metrics(rule, truth, test, spec.outcome)
        except (BayFactorError, numpy.linalg.LinAlgError) as ex:
            raise MethodFailed("metrics of %s failed: %s" % (method, ex))
    except MethodFailed as ex:
        logging.warning("Scenario %d, m=%d, replication %d: %s", spec.id, spec.m, replication, ex)
        row.update(emse=math.nan, pmse=math.nan, cor=math.nan, bss=math.nan, auc=math.nan, status="failed")
        return row
    if timing:
        row["runtime_ms"] = (time.perf_counter() - start) * 1e3
    if gg is not None:
        row["gamma1"], row["gamma2"] = float(gg[0]), float(gg[-1])
    row.update(emse=report.emse, pmse=report.pmse, cor=report.cor, bss=report.bss, auc=report.auc,
               status="constant" if report.constant else "ok")
    return row


def run_benchmark(scenarios=(1, 2), methods=METHODS, replications=SIM_REPLICATIONS, seed=0,
                  m_values=SIM_M_VALUES, outcome=OUTCOME_LINEAR, n=50, p=100, tol=1e-6, max_iter=5000,
                  timing=False):
    """
    Runs the grid scenario x m x method x replication, replications in parallel up to
    the thread cap. A method failing on one cell is recorded as "failed" and the run
    continues.
    :returns: (pandas.DataFrame) one row per cell, sorted by scenario, method, m, replication
    """
    for method in methods:
        if method not in METHODS:
            raise InvalidSpec("Unknown method %s, expected one of %s" % (method, ", ".join(METHODS)))
    if outcome == OUTCOME_BINOMIAL and not set(methods) <= set(BINOMIAL_METHODS):
        raise InvalidSpec("Binomial scenarios only support the methods %s" % (", ".join(BINOMIAL_METHODS),))
    if replications < 1:
        raise InvalidSpec("Need at least one replication, got %d" % (replications,))

    cells = []
    for sc in scenarios:
        for r in range(replications):
            rs = replication_seed(seed, sc, r)
            for m in m_values:
                spec = ScenarioSpec(id=sc, n=n, m=m, p=p, seed=rs, outcome=outcome)
                for method in methods:
                    cells.append((spec, method, r))

    with ThreadPoolExecutor(max_workers=max_threads()) as executor:
        rows = list(executor.map(lambda c: _run_cell(c[0], c[1], c[2], tol, max_iter, timing), cells))

    columns = COLUMNS + (BINOMIAL_COLUMNS if outcome == OUTCOME_BINOMIAL else [])
    table = pandas.DataFrame(rows)[columns]
    order = {m: i for i, m in enumerate(METHODS)}
    table["_order"] = table["method"].map(order)
    table = table.sort_values(["scenario", "_order", "m", "replication"], kind="mergesort")
    return table.drop(columns="_order").reset_index(drop=True)


def summarize(table):
    """
    :returns: (pandas.DataFrame) medians of the metrics per scenario, method and m,
      over the replications that did not fail, with the number of failed ones
    """
    metrics = [c for c in METRICS + BINOMIAL_COLUMNS if c in table.columns]
    ok = table[table["status"] != "failed"]
    med = ok.groupby(["scenario", "method", "m"], sort=False)[metrics].median()
    failed = (table["status"] == "failed").groupby([table["scenario"], table["method"], table["m"]],
                                                   sort=False).sum().rename("failed")
    return med.join(failed, how="outer").fillna({"failed": 0}).reset_index()
