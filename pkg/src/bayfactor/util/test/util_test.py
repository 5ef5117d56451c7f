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

import logging
import os
import tempfile
import unittest
from unittest import mock

import numpy

from bayfactor.errors import NonFiniteUpdate, InvalidConfig
from bayfactor.util import finite_result, log_duration, max_threads, named_stream, named_seed, as_generator
from bayfactor.util.config import Settings, get_floatlist, FIT_TOL, PENALTY_GRID
from bayfactor.util.log import RecordCollector

logging.getLogger().setLevel(logging.DEBUG)


@finite_result
def _return(val):
    return val


@log_duration
def _add(a, b=1):
    """ adds """
    return a + b


class TestDecorators(unittest.TestCase):

    def test_finite_result(self):
        numpy.testing.assert_array_equal(_return(numpy.ones(3)), numpy.ones(3))
        self.assertEqual(_return((1.0, "text", True)), (1.0, "text", True))
        with self.assertRaises(NonFiniteUpdate):
            _return(numpy.array([1.0, numpy.nan]))
        with self.assertRaises(NonFiniteUpdate):
            _return((numpy.zeros(2), float("inf")))

    def test_log_duration(self):
        self.assertEqual(_add(2, b=3), 5)
        # signature and docstring are kept
        self.assertEqual(_add.__name__, "_add")
        self.assertEqual(_add.__doc__.strip(), "adds")


class TestThreads(unittest.TestCase):

    def test_default(self):
        with mock.patch.dict(os.environ, {}, clear=True):
            self.assertEqual(max_threads(), 1)

    def test_env(self):
        with mock.patch.dict(os.environ, {"BAYFACTOR_THREADS": "4"}):
            self.assertEqual(max_threads(), 4)
        for bad in ("0", "-2", "many"):
            with mock.patch.dict(os.environ, {"BAYFACTOR_THREADS": bad}):
                with self.assertRaises(InvalidConfig):
                    max_threads()


class TestStreams(unittest.TestCase):

    def test_named_streams(self):
        a = named_stream(3, "init").standard_normal(5)
        b = named_stream(3, "init").standard_normal(5)
        c = named_stream(3, "gibbs").standard_normal(5)
        numpy.testing.assert_array_equal(a, b)
        self.assertFalse(numpy.allclose(a, c))
        # spawned children are reproducible too
        s1 = [numpy.random.default_rng(s).random() for s in named_seed(3, "sim").spawn(3)]
        s2 = [numpy.random.default_rng(s).random() for s in named_seed(3, "sim").spawn(3)]
        self.assertEqual(s1, s2)

    def test_as_generator(self):
        rng = numpy.random.default_rng(1)
        self.assertIs(as_generator(rng), rng)
        self.assertEqual(as_generator(5).random(), numpy.random.default_rng(5).random())


class TestSettings(unittest.TestCase):

    def setUp(self):
        self.dir = tempfile.TemporaryDirectory()
        self.path = os.path.join(self.dir.name, "bayfactor.ini")

    def tearDown(self):
        self.dir.cleanup()

    def _write(self, text):
        with open(self.path, "w") as f:
            f.write(text)

    def test_missing_file(self):
        settings = Settings(self.path)
        self.assertEqual(settings.load("FIT")["tol"], FIT_TOL)
        self.assertEqual(settings.load("FREQ")["penalty_grid"], PENALTY_GRID)

    def test_values(self):
        self._write("[FIT]\ntol = 1e-4\neb_mode = free\n[FREQ]\npenalty_grid = (0.1, 0.5)\n"
                    "[SIMULATION]\nm_values = 0, 20\n")
        settings = Settings(self.path)
        fit = settings.load("FIT")
        self.assertEqual(fit["tol"], 1e-4)
        self.assertEqual(fit["eb_mode"], "free")
        self.assertEqual(settings.load("FREQ")["penalty_grid"], (0.1, 0.5))
        self.assertEqual(settings.load("SIMULATION")["m_values"], (0, 20))

    def test_invalid_falls_back(self):
        self._write("[FIT]\ntol = -1\n[GIBBS]\nn_iter = 10\nburn_in = 20\n[LOGGING]\nlevel = loud\n")
        settings = Settings(self.path)
        self.assertEqual(settings.load("FIT")["tol"], FIT_TOL)
        self.assertEqual(settings.load("GIBBS")["n_iter"], 5000)
        self.assertEqual(settings.load("LOGGING")["level"], "INFO")

    def test_unknown_section(self):
        with self.assertRaises(ValueError):
            Settings(self.path).load("GUI")

    def test_floatlist(self):
        self.assertEqual(get_floatlist("(1, 2.5)"), (1.0, 2.5))
        self.assertEqual(get_floatlist(" 0.1 , 0.2,"), (0.1, 0.2))


class TestRecordCollector(unittest.TestCase):

    def test_collects_warnings(self):
        with RecordCollector() as collector:
            logging.debug("not kept")
            logging.warning("kept %d", 1)
        logging.warning("after")
        self.assertEqual(collector.messages, ["WARNING kept 1"])


if __name__ == "__main__":
    unittest.main()
