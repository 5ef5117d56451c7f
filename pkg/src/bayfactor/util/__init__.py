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

This module contains util functions shared by the estimation routines: decorators,
random stream handling and the thread cap.
'''

from decorator import decorator
import dataclasses
import logging
import numbers
import os
import time
import zlib

import numpy

from bayfactor.errors import NonFiniteUpdate, InvalidConfig

THREADS_ENV = "BAYFACTOR_THREADS"


def _non_finite_fields(result):
    """
    :returns: (list of str) the names of the array or scalar fields of result that
      contain NaN or Inf
    """
    if dataclasses.is_dataclass(result):
        items = ((f.name, getattr(result, f.name)) for f in dataclasses.fields(result))
    elif isinstance(result, tuple):
        items = (("[%d]" % i, v) for i, v in enumerate(result))
    else:
        items = (("result", result),)

    bad = []
    for name, val in items:
        if isinstance(val, numpy.ndarray) and val.dtype.kind == "f":
            if not numpy.all(numpy.isfinite(val)):
                bad.append(name)
        elif isinstance(val, numbers.Real) and not isinstance(val, bool):
            if not numpy.isfinite(val):
                bad.append(name)
    return bad


@decorator
def finite_result(f, *args, **kwargs):
    """
    This decorator checks that every floating point field of the returned value
    (a dataclass, a tuple or an array) is finite, and raises NonFiniteUpdate otherwise.
    """
    result = f(*args, **kwargs)
    bad = _non_finite_fields(result)
    if bad:
        logging.error("Non-finite values in %s() output fields %s", f.__name__, ", ".join(bad))
        raise NonFiniteUpdate("%s() produced non-finite values in %s" % (f.__name__, ", ".join(bad)))
    return result


@decorator
def log_duration(f, *args, **kwargs):
    """ Logs (at debug level) how long the call took. """
    start = time.perf_counter()
    try:
        return f(*args, **kwargs)
    finally:
        logging.debug("%s() took %.1f ms", f.__name__, (time.perf_counter() - start) * 1e3)


def max_threads():
    """
    :returns: (int >= 1) the number of worker threads allowed, read from the
      BAYFACTOR_THREADS environment variable (default 1)
    """
    val = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(val)
    except ValueError:
        raise InvalidConfig("%s must be a positive integer, got %r" % (THREADS_ENV, val))
    if n < 1:
        raise InvalidConfig("%s must be a positive integer, got %d" % (THREADS_ENV, n))
    return n


def named_seed(seed, name):
    """
    :param seed: (int) master seed
    :param name: (str) component name, e.g. "init", "gibbs", "mc-predict", "sim"
    :returns: (numpy.random.SeedSequence) the seed sequence of that component
    """
    key = zlib.crc32(name.encode("utf-8"))
    return numpy.random.SeedSequence([int(seed), key])


def named_stream(seed, name):
    """
    Derives an independent random generator for one component from the master seed,
    so that drawing more numbers in one component never perturbs another.
    :returns: (numpy.random.Generator)
    """
    return numpy.random.default_rng(named_seed(seed, name))


def as_generator(random_state):
    """
    :param random_state: (None, int, SeedSequence or Generator)
    :returns: (numpy.random.Generator)
    """
    if isinstance(random_state, numpy.random.Generator):
        return random_state
    return numpy.random.default_rng(random_state)
