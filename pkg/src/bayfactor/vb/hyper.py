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

Prior hyperparameters and their empirical Bayes updates.
'''

import dataclasses
import enum
import logging

import numpy

from bayfactor.data import split_groups
from bayfactor.errors import EmptyGroup, DegenerateGroupSum, InvalidDimension


class EBMode(enum.Enum):
    OFF = "off"
    FREE = "free"
    CONSTRAINED = "constrained"


KAPPA = 9.0
NU = 4.0


@dataclasses.dataclass
class HyperParams:
    """
    gamma_overall (float > 0): overall prior variance scale γ
    gamma_group (array G > 0): group multipliers γ′_g; the prior variance of the
      loadings of a feature in group g is γ·γ′_g (the outcome uses γ)
    kappa, nu (float > 0): inverse-gamma shape and scale of the uniquenesses
    d (int >= 1): latent dimension
    eb_mode (EBMode)
    """
    gamma_overall: float
    gamma_group: numpy.ndarray
    kappa: float
    nu: float
    d: int
    eb_mode: EBMode = EBMode.OFF

    def __post_init__(self):
        self.gamma_group = numpy.asarray(self.gamma_group, dtype=float).reshape(-1)
        self.eb_mode = EBMode(self.eb_mode)
        if self.d < 1:
            raise InvalidDimension("Latent dimension must be >= 1, got %d" % (self.d,))
        if not (self.gamma_overall > 0 and self.kappa > 0 and self.nu > 0 and numpy.all(self.gamma_group > 0)):
            raise ValueError("Hyperparameters must be positive")

    def column_variances(self, groups):
        """
        groups (array p of int in 1..G)
        :returns: (array p + 1) prior variance γ_j̄ of every column, outcome last
        """
        gv = self.gamma_overall * self.gamma_group[numpy.asarray(groups) - 1]
        return numpy.append(gv, self.gamma_overall)

    def with_groups(self, n_groups):
        """ :returns: (HyperParams) copy with one multiplier per group (reset to 1 if the count differs) """
        if self.gamma_group.size == n_groups:
            return self
        return dataclasses.replace(self, gamma_group=numpy.ones(n_groups))


def default_hyperparams(d, n_groups=1, eb_mode=EBMode.OFF):
    """
    γ = 1/d, κ = 9, ν = 4 and all group multipliers 1, so that the prior mean of the
    uniquenesses is ν/(κ−1) = 1/2.
    """
    if d < 1:
        raise InvalidDimension("Latent dimension must be >= 1, got %d" % (d,))
    return HyperParams(1.0 / d, numpy.ones(n_groups), KAPPA, NU, d, eb_mode)


def group_sums(E_inv_psi, M, Omega, group_idx):
    """
    a_g = Σ_{j∈g} E(ψ_j⁻¹){tr Ω_j + μ_jᵀμ_j}, over the feature columns only.
    E_inv_psi (array >= p), M (array >= p x d), Omega (array >= p x d x d)
    group_idx (list of G index arrays)
    :returns: (array G)
    """
    per_col = E_inv_psi * (numpy.trace(Omega, axis1=1, axis2=2) + numpy.sum(M ** 2, axis=1))
    sums = []
    for g, idx in enumerate(group_idx):
        if len(idx) == 0:
            raise EmptyGroup("Group %d has no feature" % (g + 1,))
        sums.append(per_col[idx].sum())
    return numpy.array(sums)


def eb_objective_free(gammas, a, sizes, d):
    """ −½Σ_g γ_g⁻¹ a_g − (d/2)Σ_g |g| log γ_g, the part of the bound depending on γ_g """
    gammas = numpy.asarray(gammas, dtype=float)
    return -0.5 * numpy.sum(a / gammas) - 0.5 * d * numpy.sum(sizes * numpy.log(gammas))


def eb_objective_constrained(multipliers, a, sizes, gamma):
    """ −½γ⁻¹Σ_g a_g/γ′_g, for multipliers on the constraint set Σ|g| log γ′_g = 0 """
    multipliers = numpy.asarray(multipliers, dtype=float)
    return -0.5 * numpy.sum(a / multipliers) / gamma


def eb_update_free(state, hyper, groups):
    """
    Free empirical Bayes update: γ_g = a_g / (|g| d), stored as multipliers γ_g/γ.
    state: variational state (linear or logistic) providing E_inv_psi, M, Omega
    groups (array p of int)
    :returns: (HyperParams)
    """
    idx = split_groups(groups)
    a = group_sums(state.E_inv_psi[:len(groups)], state.M[:len(groups)], state.Omega[:len(groups)], idx)
    sizes = numpy.array([len(i) for i in idx])
    gammas = a / (sizes * hyper.d)
    if numpy.any(gammas <= 0):
        raise DegenerateGroupSum("Group sums must be positive, got %s" % (a.tolist(),))
    logging.debug("Free EB update: group variances %s", gammas)
    return dataclasses.replace(hyper, gamma_group=gammas / hyper.gamma_overall)


def eb_update_constrained(state, hyper, groups):
    """
    Constrained empirical Bayes update: maximizes −γ⁻¹Σ a_g/γ′_g subject to
    Σ|g| log γ′_g = 0. Stationarity gives γ′_g ∝ a_g/|g|, scaled so that the
    size-weighted geometric mean is 1.
    :returns: (HyperParams)
    :raises DegenerateGroupSum: if a group sum is zero
    """
    idx = split_groups(groups)
    a = group_sums(state.E_inv_psi[:len(groups)], state.M[:len(groups)], state.Omega[:len(groups)], idx)
    if numpy.any(a <= 0):
        raise DegenerateGroupSum("Group sums must be positive, got %s" % (a.tolist(),))
    sizes = numpy.array([len(i) for i in idx], dtype=float)
    log_ratio = numpy.log(a / sizes)
    log_mult = log_ratio - numpy.sum(sizes * log_ratio) / numpy.sum(sizes)
    logging.debug("Constrained EB update: multipliers %s", numpy.exp(log_mult))
    return dataclasses.replace(hyper, gamma_group=numpy.exp(log_mult))


def eb_update(state, hyper, groups):
    """ Dispatches on hyper.eb_mode; returns hyper unchanged when off """
    if hyper.eb_mode is EBMode.FREE:
        return eb_update_free(state, hyper, groups)
    elif hyper.eb_mode is EBMode.CONSTRAINED:
        return eb_update_constrained(state, hyper, groups)
    return hyper
