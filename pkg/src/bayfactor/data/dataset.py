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

Dataset construction, standardization, CSV ingestion and feature-group handling.

Rows are always stored labeled first: rows 0..n-1 carry an outcome, rows n..n+m-1
are unlabeled (missing outcome).
'''

import dataclasses
import logging
from typing import Optional

import numpy
import pandas

from bayfactor.errors import EmptyData, ZeroVarianceColumn, ParseError, RaggedRows, \
    UnknownGroupLabel, LengthMismatch, NonContiguousLabels, MissingLabels, DimensionMismatch

OUTCOME_LINEAR = "linear"
OUTCOME_BINOMIAL = "binomial"
OUTCOMES = (OUTCOME_LINEAR, OUTCOME_BINOMIAL)

Y_COLUMN = "y"
TRIALS_COLUMN = "N"

# A column whose scale is below this (relative to its magnitude) is considered constant
ZERO_SCALE = 1e-12


@dataclasses.dataclass(frozen=True)
class Standardization:
    """
    Affine transform estimated on the labeled rows, to be applied to any other rows.
    """
    means: numpy.ndarray
    scales: numpy.ndarray
    y_mean: float = 0.0
    y_scale: float = 1.0

    def apply(self, X):
        X = numpy.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.means.shape[0]:
            raise DimensionMismatch("Expected %d feature columns, got shape %s" %
                                    (self.means.shape[0], X.shape))
        return (X - self.means) / self.scales

    def apply_y(self, y):
        return (numpy.asarray(y, dtype=float) - self.y_mean) / self.y_scale

    def invert_y(self, yhat):
        return numpy.asarray(yhat, dtype=float) * self.y_scale + self.y_mean

    def to_dict(self):
        return {"means": [float(v) for v in self.means],
                "scales": [float(v) for v in self.scales],
                "y_mean": float(self.y_mean),
                "y_scale": float(self.y_scale)}

    @classmethod
    def from_dict(cls, d):
        return cls(numpy.asarray(d["means"], dtype=float), numpy.asarray(d["scales"], dtype=float),
                   float(d["y_mean"]), float(d["y_scale"]))

    @classmethod
    def identity(cls, p):
        return cls(numpy.zeros(p), numpy.ones(p))


def _moments(A, n):
    """ mean and root-mean-square deviation of the first n rows, column-wise """
    top = A[:n]
    means = top.mean(axis=0)
    scales = numpy.sqrt(((top - means) ** 2).mean(axis=0))
    return means, scales


def standardize(X, y=None, n=None):
    """
    Centers and scales the columns so that, over the labeled rows, Σx = 0 and Σx² = n.
    X (array n_total x p): features, labeled rows first
    y (array n or None): real outcome of the labeled rows
    n (int or None): number of labeled rows (defaults to len(y), or all the rows)
    :returns:
        Xs (array n_total x p): the standardized features (unlabeled rows use the
          labeled-row moments)
        ys (array n or None): the standardized outcome
        means (array p, or p+1 when y is given): column means, outcome last
        scales (array p, or p+1 when y is given): column scales, outcome last
    :raises:
        EmptyData: if there are less than 2 labeled rows
        ZeroVarianceColumn: if a column is constant over the labeled rows
    """
    X = numpy.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] == 0:
        raise EmptyData("Feature matrix must be 2-dimensional with at least one column")
    if n is None:
        n = X.shape[0] if y is None else len(y)
    if n < 2:
        raise EmptyData("At least 2 labeled rows needed, got %d" % (n,))

    means, scales = _moments(X, n)
    flat = scales <= ZERO_SCALE * numpy.maximum(1, numpy.abs(means))
    if numpy.any(flat):
        cols = numpy.flatnonzero(flat)
        logging.error("Constant feature columns: %s", cols.tolist())
        raise ZeroVarianceColumn("Feature column(s) %s have zero variance" % (cols.tolist(),))
    Xs = (X - means) / scales

    if y is None:
        return Xs, None, means, scales

    y = numpy.asarray(y, dtype=float)
    y_mean, y_scale = _moments(y[:, numpy.newaxis], n)
    if y_scale[0] <= ZERO_SCALE * max(1, abs(y_mean[0])):
        raise ZeroVarianceColumn("The outcome has zero variance")
    ys = (y - y_mean[0]) / y_scale[0]
    return Xs, ys, numpy.append(means, y_mean), numpy.append(scales, y_scale)


def split_groups(groups):
    """
    groups (sequence of int): group label of each feature, in 1..G
    :returns: (list of G arrays of int) the 0-based feature indices of each group
    :raises NonContiguousLabels: if the labels are not exactly {1, ..., G}
    """
    groups = numpy.asarray(groups)
    if groups.size == 0:
        raise NonContiguousLabels("No group labels")
    labels = numpy.unique(groups)
    G = labels.size
    if not numpy.array_equal(labels, numpy.arange(1, G + 1)):
        raise NonContiguousLabels("Group labels must be 1..G without gaps, got %s" % (labels.tolist(),))
    return [numpy.flatnonzero(groups == g) for g in range(1, G + 1)]


@dataclasses.dataclass(frozen=True)
class Dataset:
    """
    X (array n_total x p): features, labeled rows first
    y (array n): outcome of the labeled rows (real, or counts for binomial)
    trials (array n_total of int or None): number of trials N_i of each row (binomial only)
    groups (array p of int): group label of each feature, in 1..G
    outcome (str): "linear" or "binomial"
    standardized (bool): whether X (and y when linear) are standardized
    transform (Standardization or None): transform used to standardize
    """
    X: numpy.ndarray
    y: numpy.ndarray
    groups: numpy.ndarray
    outcome: str = OUTCOME_LINEAR
    trials: Optional[numpy.ndarray] = None
    standardized: bool = False
    transform: Optional[Standardization] = None

    def __post_init__(self):
        X = numpy.array(self.X, dtype=float)
        y = numpy.array(self.y, dtype=float).reshape(-1)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if X.ndim != 2:
            raise DimensionMismatch("X must be a matrix, got shape %s" % (X.shape,))
        if X.shape[0] == 0 or X.shape[1] == 0:
            raise EmptyData("Dataset has no rows or no features")
        if y.shape[0] > X.shape[0]:
            raise DimensionMismatch("More labels (%d) than rows (%d)" % (y.shape[0], X.shape[0]))
        groups = numpy.asarray(self.groups, dtype=int)
        if groups.shape != (X.shape[1],):
            raise LengthMismatch("Expected %d group labels, got %d" % (X.shape[1], groups.size))
        split_groups(groups)
        object.__setattr__(self, "groups", groups)
        if self.outcome not in OUTCOMES:
            raise ValueError("Unknown outcome type %s" % (self.outcome,))

        if self.outcome == OUTCOME_BINOMIAL:
            trials = numpy.ones(X.shape[0], dtype=int) if self.trials is None else \
                     numpy.asarray(self.trials, dtype=int).reshape(-1)
            if trials.shape[0] != X.shape[0]:
                raise DimensionMismatch("Expected %d trial counts, got %d" % (X.shape[0], trials.shape[0]))
            if numpy.any(trials < 1):
                raise ParseError("Trial counts must be positive integers")
            if numpy.any(y < 0) or numpy.any(y > trials[:y.shape[0]]) or numpy.any(y != numpy.round(y)):
                raise ParseError("Binomial outcomes must be integers in [0, N_i]")
            object.__setattr__(self, "trials", trials)

        for a in (self.X, self.y):
            a.setflags(write=False)

    @property
    def n(self):
        """ number of labeled rows """
        return self.y.shape[0]

    @property
    def m(self):
        """ number of unlabeled rows """
        return self.X.shape[0] - self.y.shape[0]

    @property
    def n_total(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    @property
    def n_groups(self):
        return int(self.groups.max())

    @property
    def X_labeled(self):
        return self.X[:self.n]

    @property
    def X_unlabeled(self):
        return self.X[self.n:]

    def group_indices(self):
        return split_groups(self.groups)

    def require_labels(self):
        if self.n == 0:
            raise MissingLabels("This operation needs labeled rows, but no outcome is present")

    def labeled_only(self):
        """ :returns: (Dataset) copy without the unlabeled rows """
        return dataclasses.replace(self, X=self.X[:self.n].copy(),
                                   trials=None if self.trials is None else self.trials[:self.n].copy())

    def standardize(self):
        """
        :returns: (Dataset) standardized copy, carrying its transform. The outcome is
          only standardized for linear outcomes.
        """
        if self.standardized:
            return self
        self.require_labels()
        if self.outcome == OUTCOME_LINEAR:
            Xs, ys, means, scales = standardize(self.X, self.y, self.n)
            tr = Standardization(means[:-1], scales[:-1], float(means[-1]), float(scales[-1]))
        else:
            Xs, _, means, scales = standardize(self.X, None, self.n)
            ys = self.y.copy()
            tr = Standardization(means, scales)
        return dataclasses.replace(self, X=Xs, y=ys, standardized=True, transform=tr)


def _to_numbers(df, path):
    """ converts a frame of strings to floats, empty cells to NaN """
    out = numpy.full(df.shape, numpy.nan)
    for k, col in enumerate(df.columns):
        cells = df[col]
        if cells.isna().any():
            row = int(numpy.flatnonzero(cells.isna().to_numpy())[0])
            raise RaggedRows("%s: line %d has too few fields" % (path, row + 2))
        filled = cells.str.strip() != ""
        try:
            out[filled.to_numpy(), k] = pandas.to_numeric(cells[filled]).to_numpy(dtype=float)
        except (ValueError, TypeError) as ex:
            raise ParseError("%s: malformed cell in column %s: %s" % (path, col, ex))
    return out


def read_groups(path, p):
    """
    Reads a groups sidecar file: one integer label per line.
    :returns: (array p of int)
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            lines = [l.strip() for l in f if l.strip()]
        groups = numpy.array([int(l) for l in lines], dtype=int)
    except ValueError as ex:
        raise UnknownGroupLabel("%s: group labels must be integers (%s)" % (path, ex))
    if groups.size != p:
        raise LengthMismatch("%s: expected %d group labels, got %d" % (path, p, groups.size))
    if numpy.any(groups < 1):
        raise UnknownGroupLabel("%s: group labels must be >= 1" % (path,))
    try:
        split_groups(groups)
    except NonContiguousLabels as ex:
        raise UnknownGroupLabel("%s: %s" % (path, ex))
    return groups


def load_csv(path, groups_path=None, outcome=OUTCOME_LINEAR, unlabeled_from_blanks=True):
    """
    Reads a data file: comma separated, with a header row. The optional column "y"
    holds the outcome, an empty cell marking an unlabeled row. For binomial outcomes,
    the optional column "N" holds the number of trials (default 1). Every other
    column is a feature.
    path (str): CSV file
    groups_path (str or None): sidecar file with the group label of each feature
    outcome (str): "linear" or "binomial"
    unlabeled_from_blanks (bool): if False, rows with an empty outcome are dropped
      instead of being kept as unlabeled rows
    :returns: (Dataset) raw (not standardized) dataset, rows reordered labeled-first
    """
    try:
        df = pandas.read_csv(path, dtype=str, na_filter=False, skipinitialspace=True,
                             encoding="utf-8")
    except pandas.errors.ParserError as ex:
        raise RaggedRows("%s: %s" % (path, ex))
    except pandas.errors.EmptyDataError:
        raise EmptyData("%s: no data" % (path,))
    if df.shape[0] == 0:
        raise EmptyData("%s: no data rows" % (path,))

    values = _to_numbers(df, path)
    columns = list(df.columns)
    feature_cols = [k for k, c in enumerate(columns) if c not in (Y_COLUMN, TRIALS_COLUMN)]
    if not feature_cols:
        raise EmptyData("%s: no feature columns" % (path,))
    X = values[:, feature_cols]
    if numpy.isnan(X).any():
        raise ParseError("%s: empty feature cell" % (path,))

    if Y_COLUMN in columns:
        y_all = values[:, columns.index(Y_COLUMN)]
    else:
        y_all = numpy.full(X.shape[0], numpy.nan)
    labeled = ~numpy.isnan(y_all)
    if not unlabeled_from_blanks:
        X, y_all, values = X[labeled], y_all[labeled], values[labeled]
        labeled = labeled[labeled]
    order = numpy.concatenate([numpy.flatnonzero(labeled), numpy.flatnonzero(~labeled)])

    trials = None
    if outcome == OUTCOME_BINOMIAL:
        if TRIALS_COLUMN in columns:
            trials = values[order, columns.index(TRIALS_COLUMN)]
            if numpy.isnan(trials).any():
                raise ParseError("%s: empty trial count" % (path,))
        else:
            trials = numpy.ones(X.shape[0])

    p = X.shape[1]
    groups = read_groups(groups_path, p) if groups_path else numpy.ones(p, dtype=int)
    logging.debug("Read %s: %d labeled and %d unlabeled rows, %d features",
                  path, int(labeled.sum()), int((~labeled).sum()), p)
    return Dataset(X=X[order], y=y_all[order][:int(labeled.sum())], groups=groups,
                   outcome=outcome, trials=trials)


def load_features(path):
    """
    Reads the feature columns of a data file, keeping the rows in file order. The
    "y" and "N" columns, if present, are ignored.
    :returns: (array k x p)
    """
    try:
        df = pandas.read_csv(path, dtype=str, na_filter=False, skipinitialspace=True,
                             encoding="utf-8")
    except pandas.errors.ParserError as ex:
        raise RaggedRows("%s: %s" % (path, ex))
    except pandas.errors.EmptyDataError:
        raise EmptyData("%s: no data" % (path,))
    df = df[[c for c in df.columns if c not in (Y_COLUMN, TRIALS_COLUMN)]]
    if df.shape[0] == 0 or df.shape[1] == 0:
        raise EmptyData("%s: no feature data" % (path,))
    X = _to_numbers(df, path)
    if numpy.isnan(X).any():
        raise ParseError("%s: empty feature cell" % (path,))
    return X


def write_csv(path, X, y=None, trials=None, feature_names=None):
    """
    Writes a data file readable by load_csv. Missing outcomes (rows beyond len(y))
    are written as empty cells.
    """
    X = numpy.asarray(X, dtype=float)
    names = feature_names or ["x%d" % (j + 1) for j in range(X.shape[1])]
    df = pandas.DataFrame(X, columns=names)
    if y is not None:
        col = numpy.full(X.shape[0], numpy.nan)
        col[:len(y)] = y
        df[Y_COLUMN] = col
    if trials is not None:
        df[TRIALS_COLUMN] = numpy.asarray(trials, dtype=int)
    df.to_csv(path, index=False, float_format="%.17g", na_rep="")
