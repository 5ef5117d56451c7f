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

Pólya-Gamma random variables PG(N, c).

A PG(N, c) variable is equal in distribution to
    (1/(2π²)) Σ_k G_k / ((k − ½)² + c²/(4π²)),  G_k ~ Gamma(N, 1),
which is sampled truncated to a finite number of terms. The truncated tail is replaced
by its mean.
'''

import numpy

from bayfactor.errors import PGSampleFailure
from bayfactor.util import as_generator

PG_TERMS = 200
DELTA_FLOOR = 1e-12


def pg_mean(N, c):
    """
    E(η) for η ~ PG(N, c): N tanh(c/2)/(2c), with the limit N/4 at c = 0.
    N (float or array), c (float or array)
    :returns: (float or array)
    """
    c = numpy.abs(numpy.asarray(c, dtype=float))
    N = numpy.asarray(N, dtype=float)
    small = c < DELTA_FLOOR
    safe = numpy.where(small, 1.0, c)
    res = numpy.where(small, N / 4, N * numpy.tanh(safe / 2) / (2 * safe))
    return res if res.ndim else float(res)


def _term_weights(c, trunc):
    """ :returns: (array ... x trunc) 1/((k − ½)² + c²/(4π²)) for k = 1..trunc """
    k = numpy.arange(1, trunc + 1)
    return 1 / ((k - 0.5) ** 2 + (numpy.asarray(c, dtype=float)[..., numpy.newaxis] / (2 * numpy.pi)) ** 2)


def sample_pg(N, c, random_state=None, trunc=PG_TERMS, size=None):
    """
    Draws from PG(N, c) with a truncated sum of Gamma variables plus the mean of the
    dropped terms.
    N (int or array >= 1): shape
    c (float or array): tilting
    random_state (None, int or Generator)
    trunc (int): number of Gamma terms
    size (None or tuple): output shape (default: broadcast shape of N and c)
    :returns: (float or array) positive draws
    :raises PGSampleFailure: if a draw is not positive and finite
    """
    rng = as_generator(random_state)
    N = numpy.asarray(N, dtype=float)
    c = numpy.asarray(c, dtype=float)
    if numpy.any(N <= 0):
        raise ValueError("PG shape must be positive")
    shape = numpy.broadcast(N, c).shape if size is None else tuple(size)
    N = numpy.broadcast_to(N, shape)
    c = numpy.broadcast_to(c, shape)

    w = _term_weights(c, trunc)
    total = numpy.zeros(shape)
    for k in range(trunc):
        total += rng.gamma(N) * w[..., k]
    tail = pg_mean(N, c) - N * w.sum(axis=-1) / (2 * numpy.pi ** 2)
    draws = total / (2 * numpy.pi ** 2) + numpy.maximum(tail, 0)
    if not numpy.all(numpy.isfinite(draws) & (draws > 0)):
        raise PGSampleFailure("Pólya-Gamma sampler produced invalid draws")
    return draws if draws.ndim else float(draws)
