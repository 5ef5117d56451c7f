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

Moments of a multivariate Gaussian N(μ, Ω) truncated to the unit ball {b : bᵀb < 1}.

The mass of the ball and the derivatives of that mass with respect to μ are written as
series of chi-square distribution functions, whose coefficients follow a recursion on
the eigenvalues of Ω. Derivatives are taken as Ω∂/∂μ, so that
    E(b) = μ + v/L,  V(b) = Ω + V/L − vvᵀ/L².
'''

import dataclasses
import logging

import numpy
import scipy.linalg
from scipy.special import gammainc
from scipy import stats

from bayfactor.errors import SeriesDiverged, NotPD

T_MAX = 50
R_FACTOR = 29 / 32


@dataclasses.dataclass
class TruncatedMoments:
    """
    L (float in (0, 1]): mass of the unit ball
    v (array d), V (array d x d): first and second derivative series
    mean (array d), cov (array d x d): moments of the truncated distribution
    r (float > 0): series parameter
    t_max (int): number of terms after the first
    """
    L: float
    v: numpy.ndarray
    V: numpy.ndarray
    mean: numpy.ndarray
    cov: numpy.ndarray
    r: float
    t_max: int


def chi2_cdf(x, k):
    """ F_k(x) = P(χ²_k <= x), through the regularized lower incomplete gamma function """
    return gammainc(numpy.asarray(k, dtype=float) / 2, x / 2)


def ball_mass(gamma, d):
    """ :returns: (float) P(bᵀb < 1) for b ~ N(0, γI_d) """
    return float(chi2_cdf(1 / gamma, d))


def _series(mu, lam, Q, r, t_max):
    d = lam.size
    ratio = r / lam
    one_minus = 1 - ratio
    delta = (Q.T @ mu) / numpy.sqrt(lam)
    sq = numpy.sqrt(lam)

    base = numpy.exp(0.5 * numpy.sum(numpy.log(ratio)) - 0.5 * delta @ delta)
    c = [base]
    cp = [-mu * base]
    Cpp = [(numpy.outer(mu, mu) - Q @ numpy.diag(lam) @ Q.T) * base]

    dm, dpm, Dppm = [None], [None], [None]
    for m in range(1, t_max + 1):
        z = ratio * one_minus ** (m - 1)
        dm.append(numpy.sum(one_minus ** m) + m * numpy.sum(delta ** 2 * z))
        dpm.append(2 * m * Q @ (sq * z * delta))
        Dppm.append(2 * m * (Q * (sq * z * sq)) @ Q.T)

    for t in range(1, t_max + 1):
        ct = sum(dm[t - s] * c[s] for s in range(t)) / (2 * t)
        cpt = sum(dpm[t - s] * c[s] + dm[t - s] * cp[s] for s in range(t)) / (2 * t)
        Cppt = sum(Dppm[t - s] * c[s] + numpy.outer(dpm[t - s], cp[s]) + numpy.outer(cp[s], dpm[t - s]) +
                   dm[t - s] * Cpp[s] for s in range(t)) / (2 * t)
        c.append(ct)
        cp.append(cpt)
        Cpp.append(Cppt)

    F = chi2_cdf(1 / r, d + 2 * numpy.arange(t_max + 1))
    L = float(numpy.dot(F, c))
    v = numpy.einsum('t,ta->a', F, numpy.array(cp))
    V = numpy.einsum('t,tab->ab', F, numpy.array(Cpp))
    return L, v, (V + V.T) / 2


def trunc_moments(mu_star, omega_star, t_max=T_MAX):
    """
    Mean and covariance of N(mu_star, omega_star) restricted to the unit ball.
    mu_star (array d)
    omega_star (array d x d): positive definite
    t_max (int >= 1): number of series terms after the first
    :returns: (TruncatedMoments)
    :raises:
        NotPD: if omega_star is not positive definite
        SeriesDiverged: if the series is not finite, even after halving r once
    """
    mu = numpy.asarray(mu_star, dtype=float).reshape(-1)
    omega = numpy.atleast_2d(numpy.asarray(omega_star, dtype=float))
    if t_max < 1:
        raise ValueError("t_max must be >= 1, got %d" % (t_max,))
    try:
        lam, Q = scipy.linalg.eigh(omega)
    except (numpy.linalg.LinAlgError, ValueError) as ex:
        raise NotPD("Eigen decomposition failed: %s" % (ex,))
    if lam.min() <= 0:
        raise NotPD("Covariance is not positive definite (min eigenvalue %g)" % (lam.min(),))

    r = R_FACTOR * lam.min()
    for attempt in range(2):
        L, v, V = _series(mu, lam, Q, r, t_max)
        if numpy.isfinite(L) and L > 0 and numpy.all(numpy.isfinite(v)) and numpy.all(numpy.isfinite(V)):
            break
        logging.warning("Truncated moment series not finite with r = %g, retrying with r/2", r)
        r /= 2
    else:
        raise SeriesDiverged("Truncated moment series diverged (L = %s)" % (L,))

    mean = mu + v / L
    cov = omega + V / L - numpy.outer(v, v) / L ** 2
    return TruncatedMoments(L=min(L, 1.0), v=v, V=V, mean=mean, cov=(cov + cov.T) / 2, r=r, t_max=t_max)


def rejection_moments(mu_star, omega_star, n_draws, random_state=None):
    """
    Moments of the truncated distribution by drawing from the Gaussian and keeping
    the draws inside the unit ball.
    :returns: mean (array d), cov (array d x d), acceptance rate (float), accepted draws (array)
    """
    draws = stats.multivariate_normal.rvs(mean=numpy.atleast_1d(mu_star), cov=numpy.atleast_2d(omega_star),
                                          size=n_draws, random_state=random_state)
    draws = draws.reshape(n_draws, -1)
    kept = draws[numpy.sum(draws ** 2, axis=1) < 1]
    return kept.mean(axis=0), numpy.atleast_2d(numpy.cov(kept, rowvar=False)), kept.shape[0] / n_draws, kept
