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

Evaluation of prediction rules against the generating parameters and a test set.
'''

import dataclasses
import logging
import math

import numpy
from scipy import stats

from bayfactor.data import OUTCOME_LINEAR, OUTCOME_BINOMIAL
from bayfactor.errors import DimensionMismatch, ConstantPredictions, InvalidSpec
from bayfactor.model import induced_coefficients, predict, PredictionRule, LINK_LOGIT


@dataclasses.dataclass
class MetricsReport:
    emse: float = math.nan
    pmse: float = math.nan
    cor: float = math.nan
    bss: float = math.nan
    auc: float = math.nan
    runtime_ms: float = 0.0
    constant: bool = False

    def to_dict(self):
        return dataclasses.asdict(self)


def emse(rule, truth):
    """ mean squared difference between the rule coefficients and the true induced ones """
    target = induced_coefficients(truth).coefficients
    if rule.p != target.shape[0]:
        raise DimensionMismatch("Rule has %d coefficients, truth %d" % (rule.p, target.shape[0]))
    return float(numpy.mean((rule.coefficients - target) ** 2))


def correlation(y, yhat):
    """
    :returns: (float) Pearson correlation of y and yhat
    :raises ConstantPredictions: if either is constant
    """
    if numpy.ptp(yhat) == 0 or numpy.ptp(y) == 0:
        raise ConstantPredictions("Correlation undefined for constant predictions")
    return float(stats.pearsonr(y, yhat)[0])


def auc(y, prob):
    """
    Area under the ROC curve as the Mann-Whitney statistic (ties count one half).
    y (array of 0/1), prob (array)
    :raises ConstantPredictions: if only one class is present
    """
    y = numpy.asarray(y)
    pos = y == 1
    n1, n0 = int(pos.sum()), int((~pos).sum())
    if n1 == 0 or n0 == 0:
        raise ConstantPredictions("AUC undefined with a single class")
    ranks = stats.rankdata(prob)
    return float((ranks[pos].sum() - n1 * (n1 + 1) / 2) / (n1 * n0))


def brier_skill(y, prob):
    """ 1 − Brier/Brier_null, the null predicting the test prevalence """
    y = numpy.asarray(y, dtype=float)
    brier = numpy.mean((y - prob) ** 2)
    null = numpy.mean((y - y.mean()) ** 2)
    if null == 0:
        raise ConstantPredictions("Brier skill score undefined with a single class")
    return float(1 - brier / null)


def compute_metrics(rule, truth, test, task=OUTCOME_LINEAR):
    """
    rule (PredictionRule)
    truth (FactorParams): on the scale of the test data
    test (Dataset): standardized labeled test rows
    task (str): "linear" or "binomial"
    :returns: (MetricsReport) Cor and AUC are 0, with .constant set, when undefined
    """
    report = MetricsReport(emse=emse(rule, truth))
    yhat = predict(rule, test.X_labeled)
    y = test.y
    if task == OUTCOME_LINEAR:
        report.pmse = float(numpy.mean((y - yhat) ** 2))
        try:
            report.cor = correlation(y, yhat)
        except ConstantPredictions:
            logging.debug("Constant predictions, correlation reported as 0")
            report.cor, report.constant = 0.0, True
    elif task == OUTCOME_BINOMIAL:
        if rule.link != LINK_LOGIT:
            rule = PredictionRule(rule.coefficients, rule.intercept, LINK_LOGIT)
            yhat = predict(rule, test.X_labeled)
        report.bss = brier_skill(y, yhat)
        report.pmse = float(numpy.mean((y - yhat) ** 2))
        try:
            report.auc = auc(y, yhat)
        except ConstantPredictions:
            report.auc, report.constant = 0.0, True
        try:
            report.cor = correlation(y, yhat)
        except ConstantPredictions:
            report.cor, report.constant = 0.0, True
    else:
        raise InvalidSpec("Unknown task %s" % (task,))
    return report
