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

Simulated data sets with two equally sized feature groups.

Scenario 1: d = 10 factors, each loading on two adjacent blocks of p/d features
(wrapping around), so every feature loads on exactly two factors. Standard normal
outcome loadings.
Scenario 2: d = 40 factors loading on every feature, outcome loadings all 0.483.

In both, the loadings of the first group have a smaller variance than those of the
second group, and ψ_j = σ² = 1.
'''

import dataclasses
import logging

import numpy
from scipy.special import expit

from bayfactor.data import Dataset, OUTCOME_LINEAR, OUTCOME_BINOMIAL, OUTCOMES
from bayfactor.errors import InvalidSpec
from bayfactor.model import FactorParams
from bayfactor.util import named_seed

BETA_NORMAL = "normal"
BETA_CONSTANT = "constant"
SCENARIO2_BETA = 0.483
SCENARIO2_PVE = 0.7
N_TEST = 1000

_DEFAULTS = {1: dict(d_true=10, group_vars=(0.1, 1.0), beta_spec=BETA_NORMAL),
             2: dict(d_true=40, group_vars=(0.1, 10.0), beta_spec=BETA_CONSTANT)}


@dataclasses.dataclass(frozen=True)
class ScenarioSpec:
    id: int = 1
    n: int = 50
    m: int = 0
    p: int = 100
    d_true: int = None
    sigma2: float = 1.0
    psi: float = 1.0
    group_vars: tuple = None
    beta_spec: str = None
    seed: int = 0
    outcome: str = OUTCOME_LINEAR
    n_test: int = N_TEST

    def __post_init__(self):
        if self.id not in _DEFAULTS:
            raise InvalidSpec("Unknown scenario %s" % (self.id,))
        for k, v in _DEFAULTS[self.id].items():
            if getattr(self, k) is None:
                object.__setattr__(self, k, v)
        if self.p < 2 or self.p % 2:
            raise InvalidSpec("The number of features must be even, got %d" % (self.p,))
        if self.id == 1 and self.p % self.d_true:
            raise InvalidSpec("Scenario 1 needs p (%d) to be a multiple of d (%d)" % (self.p, self.d_true))
        if self.n < 2 or self.m < 0 or self.n_test < 1 or self.d_true < 1:
            raise InvalidSpec("Invalid sizes n=%d, m=%d, n_test=%d, d=%d" % (self.n, self.m, self.n_test, self.d_true))
        if not (self.sigma2 > 0 and self.psi > 0 and min(self.group_vars) > 0):
            raise InvalidSpec("Variances must be positive")
        if self.beta_spec not in (BETA_NORMAL, BETA_CONSTANT):
            raise InvalidSpec("Unknown outcome loading specification %s" % (self.beta_spec,))
        if self.outcome not in OUTCOMES:
            raise InvalidSpec("Unknown outcome type %s" % (self.outcome,))

    @property
    def groups(self):
        return numpy.repeat([1, 2], self.p // 2)


def loading_pattern(d, p):
    """
    :returns: (array d x p of bool) the banded pattern of scenario 1: factor h loads on
      the feature blocks h − 1 and h (modulo d), each block of p/d features
    """
    size = p // d
    pattern = numpy.zeros((d, p), dtype=bool)
    for h in range(d):
        for b in ((h - 1) % d, h):
            pattern[h, b * size:(b + 1) * size] = True
    return pattern


def true_params(spec, rng):
    """ :returns: (FactorParams) the generating parameters on the raw scale """
    d, p = spec.d_true, spec.p
    sd = numpy.sqrt(numpy.where(spec.groups == 1, spec.group_vars[0], spec.group_vars[1]))
    B = rng.standard_normal((d, p)) * sd
    if spec.id == 1:
        B *= loading_pattern(d, p)
    if spec.beta_spec == BETA_NORMAL:
        beta = rng.standard_normal(d)
    else:
        beta = numpy.full(d, SCENARIO2_BETA)
        pve = beta @ beta / (beta @ beta + spec.sigma2)
        if abs(pve - SCENARIO2_PVE) > 0.05:
            logging.warning("Outcome loadings %g give a proportion of explained variance of %.3f, not %.1f",
                            SCENARIO2_BETA, pve, SCENARIO2_PVE)
    return FactorParams(B=B, beta=beta, psi=numpy.full(p, spec.psi), sigma2=spec.sigma2)


def _draw_rows(params, k, outcome, rng_lambda, rng_noise):
    Lam = rng_lambda.standard_normal((k, params.d))
    X = Lam @ params.B + numpy.sqrt(params.psi) * rng_noise.standard_normal((k, params.p))
    score = Lam @ params.beta
    if outcome == OUTCOME_BINOMIAL:
        y = rng_noise.binomial(1, expit(score)).astype(float)
    else:
        y = score + numpy.sqrt(params.sigma2) * rng_noise.standard_normal(k)
    return X, y


def standardized_truth(params, transform, outcome):
    """ :returns: (FactorParams) parameters of the standardized variables """
    s = transform.scales
    s_y = transform.y_scale if outcome == OUTCOME_LINEAR else 1.0
    return FactorParams(B=params.B / s, beta=params.beta / s_y, psi=params.psi / s ** 2,
                        sigma2=params.sigma2 / s_y ** 2)


def gen_scenario(spec):
    """
    Draws the training set (n labeled and m unlabeled rows) and an independent labeled
    test set. Each part uses its own stream, so that changing m leaves the labeled rows,
    the test rows and the first unlabeled rows unchanged.
    spec (ScenarioSpec)
    :returns:
        train (Dataset): standardized on its labeled rows
        truth (FactorParams): generating parameters on the standardized scale
        test (Dataset): standardized with the training transform
    """
    streams = [numpy.random.default_rng(s) for s in named_seed(spec.seed, "sim").spawn(6)]
    rng_params, rng_lab, rng_lab_noise, rng_test, rng_unl, rng_unl_noise = streams
    params = true_params(spec, rng_params)

    X_lab, y_lab = _draw_rows(params, spec.n, spec.outcome, rng_lab, rng_lab_noise)
    X_unl, _ = _draw_rows(params, spec.m, spec.outcome, rng_unl, rng_unl_noise)
    X_test, y_test = _draw_rows(params, spec.n_test, spec.outcome, rng_test, rng_test)

    raw = Dataset(numpy.vstack([X_lab, X_unl]), y_lab, spec.groups, spec.outcome)
    train = raw.standardize()
    tr = train.transform
    y_test_s = tr.apply_y(y_test) if spec.outcome == OUTCOME_LINEAR else y_test
    test = Dataset(tr.apply(X_test), y_test_s, spec.groups, spec.outcome, standardized=True, transform=tr)
    return train, standardized_truth(params, tr, spec.outcome), test
