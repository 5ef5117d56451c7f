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
'''

import enum


class ExitCodes(enum.IntEnum):
    OK = 0
    CHECK_FAILED = 1
    BAD_INPUT = 2
    ESTIMATION_FAILED = 3


class BayFactorError(Exception):
    """
    Base class of every error raised by the library.
    code (ExitCodes): the process exit status the command line maps it to
    """
    code = ExitCodes.ESTIMATION_FAILED

    def __init__(self, msg, code=None):
        super(BayFactorError, self).__init__(msg)
        if code is not None:
            self.code = code

    def __str__(self):
        return self.args[0]


class InputError(BayFactorError):
    code = ExitCodes.BAD_INPUT


class EstimationError(BayFactorError):
    code = ExitCodes.ESTIMATION_FAILED


# Bad input
class EmptyData(InputError):
    pass

class ZeroVarianceColumn(InputError):
    pass

class ParseError(InputError):
    pass

class RaggedRows(InputError):
    pass

class UnknownGroupLabel(InputError):
    pass

class LengthMismatch(UnknownGroupLabel):
    pass

class NonContiguousLabels(InputError):
    pass

class MissingLabels(InputError):
    pass

class DimensionMismatch(InputError):
    pass

class InvalidDimension(InputError):
    pass

class IndefiniteInput(InputError):
    pass

class SchemaMismatch(InputError):
    pass

class InvalidSpec(InputError):
    pass

class EmptyGroup(InputError):
    pass

class InvalidConfig(InputError):
    pass


# Numerical failures
class SingularCovariance(EstimationError):
    pass

class EigenFailure(EstimationError):
    pass

class NotConverged(EstimationError):

    def __init__(self, msg, params=None):
        super(NotConverged, self).__init__(msg)
        self.params = params

class AllFoldsFailed(EstimationError):
    pass

class DivergedVariance(EstimationError):
    pass

class SingularScores(EstimationError):
    pass

class NonFiniteUpdate(EstimationError):
    pass

class NegativeZeta(EstimationError):
    pass

class NonFiniteELBO(EstimationError):
    pass

class DegenerateGroupSum(EstimationError):
    pass

class NonPositiveScale(EstimationError):
    pass

class SingularDrawCovariance(EstimationError):
    pass

class NonFiniteHessianProbe(EstimationError):
    pass

class SingularDraw(EstimationError):
    pass

class NonPDConditional(EstimationError):
    pass

class PGSampleFailure(EstimationError):
    pass

class SeriesDiverged(EstimationError):
    pass

class NotPD(EstimationError):
    pass

class ZetaOutOfRange(EstimationError):
    pass

class MethodFailed(EstimationError):
    pass

class ConstantPredictions(EstimationError):
    pass
