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

Conversion of the global part of the variational posteriors to and from plain
JSON-compatible dictionaries. The per-row parameters are not kept: predictions for
new rows only need the loadings and the scales.
'''

import numpy

from bayfactor.errors import SchemaMismatch
from bayfactor.vb.hyper import HyperParams
from bayfactor.vb.linear import VariationalStateLinear
from bayfactor.vb.logistic import VariationalStateLogistic

KIND_LINEAR = "linear"
KIND_LOGISTIC = "binomial"


def _floats(a):
    return numpy.asarray(a, dtype=float).tolist()


def hyper_to_dict(hyper):
    return {"gamma_overall": float(hyper.gamma_overall),
            "gamma_group": _floats(hyper.gamma_group),
            "kappa": float(hyper.kappa),
            "nu": float(hyper.nu),
            "d": int(hyper.d),
            "eb_mode": hyper.eb_mode.value}


def hyper_from_dict(doc):
    try:
        return HyperParams(doc["gamma_overall"], doc["gamma_group"], doc["kappa"], doc["nu"],
                           int(doc["d"]), doc["eb_mode"])
    except (KeyError, TypeError, ValueError) as ex:
        raise SchemaMismatch("Invalid hyperparameters document: %s" % (ex,))


def posterior_to_dict(state):
    """
    state (VariationalStateLinear or VariationalStateLogistic)
    :returns: (dict)
    """
    doc = {"M": _floats(state.M),
           "Omega": _floats(state.Omega),
           "zeta": _floats(state.zeta),
           "shape": float(state.shape),
           "elbo_trace": _floats(state.elbo_trace),
           "converged": bool(state.converged),
           "n_sweeps": int(state.n_sweeps),
           "hyper": None if state.hyper is None else hyper_to_dict(state.hyper)}
    if isinstance(state, VariationalStateLogistic):
        doc["kind"] = KIND_LOGISTIC
        doc["mu_bar"] = _floats(state.mu_bar)
        doc["Omega_bar"] = _floats(state.Omega_bar)
    else:
        doc["kind"] = KIND_LINEAR
    return doc


def posterior_from_dict(doc):
    """
    :returns: (VariationalStateLinear or VariationalStateLogistic) with empty per-row parameters
    :raises SchemaMismatch: if a field is missing or has the wrong shape
    """
    try:
        M = numpy.asarray(doc["M"], dtype=float)
        Omega = numpy.asarray(doc["Omega"], dtype=float)
        zeta = numpy.asarray(doc["zeta"], dtype=float)
        k, d = M.shape
        if Omega.shape != (k, d, d) or zeta.shape != (k,):
            raise ValueError("inconsistent shapes M %s, Omega %s, zeta %s" % (M.shape, Omega.shape, zeta.shape))
        common = dict(Phi=numpy.zeros((0, d)), M=M, Omega=Omega, zeta=zeta, upsilon=numpy.zeros(0),
                      shape=float(doc["shape"]), elbo_trace=list(doc["elbo_trace"]),
                      converged=bool(doc["converged"]), n_sweeps=int(doc["n_sweeps"]),
                      hyper=None if doc["hyper"] is None else hyper_from_dict(doc["hyper"]))
        kind = doc["kind"]
        if kind == KIND_LINEAR:
            return VariationalStateLinear(Xi=numpy.eye(d), chi=1.0, **common)
        elif kind == KIND_LOGISTIC:
            mu_bar = numpy.asarray(doc["mu_bar"], dtype=float)
            Omega_bar = numpy.asarray(doc["Omega_bar"], dtype=float)
            if mu_bar.shape != (d + 1,) or Omega_bar.shape != (d + 1, d + 1):
                raise ValueError("inconsistent outcome loading shapes")
            return VariationalStateLogistic(Xi=numpy.zeros((0, d, d)), mu_bar=mu_bar, Omega_bar=Omega_bar,
                                            delta=numpy.zeros(0), **common)
        raise ValueError("unknown posterior kind %r" % (kind,))
    except (KeyError, TypeError, ValueError) as ex:
        raise SchemaMismatch("Invalid posterior document: %s" % (ex,))
