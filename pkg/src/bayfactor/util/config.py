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

import configparser
import logging
import os

from appdirs import AppDirs

CONFIG_NAME = "bayfactor.ini"

# Built-in defaults, overridden by the configuration file, themselves overridden by
# the command line options.
FIT_TOL = 1e-6
FIT_MAX_ITER = 5000
FIT_SEED = 0
FIT_EB_MODE = "off"
FIT_KAPPA = 9.0
FIT_NU = 4.0
MC_DRAWS = 1000
PREDICT_MODE = "plugin"
CV_FOLDS = 5
PENALTY_GRID = (0.05, 0.1, 0.2, 0.4, 0.7, 1.0)
RIDGE_GRID = (1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0, 1000.0)
GIBBS_N_ITER = 5000
GIBBS_BURN_IN = 1000
GIBBS_THIN = 2
GIBBS_N_CHAINS = 1
SIM_REPLICATIONS = 20
SIM_M_VALUES = (0, 50, 100)
LOG_LEVEL = "INFO"


def default_config_file():
    dirs = AppDirs("BayFactor", "BayFactor")
    return os.path.join(dirs.user_config_dir, CONFIG_NAME)


def get_floatlist(option):
    """ Parses "(0.1, 0.2)" or "0.1, 0.2" into a tuple of floats. """
    option = option.strip()
    if option.startswith("(") and option.endswith(")"):
        option = option[1:-1]
    return tuple(float(k.strip()) for k in option.split(',') if k.strip())


class Settings(object):
    """
    Reads the INI configuration file, section by section, falling back to the
    built-in defaults for every missing or invalid value.
    """

    def __init__(self, config_file=None):
        """
        config_file (str or None): path to the INI file. If None, the file in the
          user configuration directory is used (it's fine if it doesn't exist).
        """
        self.config_file = config_file or default_config_file()
        self.config = configparser.ConfigParser(converters={'floatlist': get_floatlist})
        logging.debug("Reading configuration file %s", self.config_file)
        self.config.read(self.config_file)

    def load(self, section):
        """
        Reads one section of the configuration file
        section (str): the part of the configuration file to read
        :returns: (dict str -> value) the settings of the section
        """
        cfg = self.config
        if not cfg.has_section(section):
            cfg.add_section(section)

        if section == 'FIT':
            try:
                vals = dict(tol=cfg.getfloat('FIT', 'tol', fallback=FIT_TOL),
                            max_iter=cfg.getint('FIT', 'max_iter', fallback=FIT_MAX_ITER),
                            seed=cfg.getint('FIT', 'seed', fallback=FIT_SEED),
                            eb_mode=cfg.get('FIT', 'eb_mode', fallback=FIT_EB_MODE),
                            kappa=cfg.getfloat('FIT', 'kappa', fallback=FIT_KAPPA),
                            nu=cfg.getfloat('FIT', 'nu', fallback=FIT_NU))
                if vals["eb_mode"] not in ("off", "free", "constrained"):
                    raise ValueError("eb_mode %s unknown" % (vals["eb_mode"],))
                if vals["tol"] <= 0 or vals["max_iter"] < 1 or vals["kappa"] <= 0 or vals["nu"] <= 0:
                    raise ValueError("tol, max_iter, kappa and nu must be positive")
            except Exception as ex:
                logging.error("Invalid FIT values, falling back to default values, ex: %s", ex)
                vals = dict(tol=FIT_TOL, max_iter=FIT_MAX_ITER, seed=FIT_SEED,
                            eb_mode=FIT_EB_MODE, kappa=FIT_KAPPA, nu=FIT_NU)
            return vals
        elif section == 'PREDICT':
            try:
                vals = dict(mc_draws=cfg.getint('PREDICT', 'mc_draws', fallback=MC_DRAWS),
                            predict_mode=cfg.get('PREDICT', 'predict_mode', fallback=PREDICT_MODE))
                if vals["predict_mode"] not in ("plugin", "mc", "taylor") or vals["mc_draws"] < 1:
                    raise ValueError("predict_mode or mc_draws out of range")
            except Exception as ex:
                logging.error("Invalid PREDICT values, falling back to default values, ex: %s", ex)
                vals = dict(mc_draws=MC_DRAWS, predict_mode=PREDICT_MODE)
            return vals
        elif section == 'FREQ':
            try:
                vals = dict(folds=cfg.getint('FREQ', 'folds', fallback=CV_FOLDS),
                            penalty_grid=cfg.getfloatlist('FREQ', 'penalty_grid', fallback=PENALTY_GRID),
                            ridge_grid=cfg.getfloatlist('FREQ', 'ridge_grid', fallback=RIDGE_GRID))
                if vals["folds"] < 2 or not all(0 < g <= 1 for g in vals["penalty_grid"]):
                    raise ValueError("folds must be >= 2 and penalty grid within (0, 1]")
            except Exception as ex:
                logging.error("Invalid FREQ values, falling back to default values, ex: %s", ex)
                vals = dict(folds=CV_FOLDS, penalty_grid=PENALTY_GRID, ridge_grid=RIDGE_GRID)
            return vals
        elif section == 'GIBBS':
            try:
                vals = dict(n_iter=cfg.getint('GIBBS', 'n_iter', fallback=GIBBS_N_ITER),
                            burn_in=cfg.getint('GIBBS', 'burn_in', fallback=GIBBS_BURN_IN),
                            thin=cfg.getint('GIBBS', 'thin', fallback=GIBBS_THIN),
                            n_chains=cfg.getint('GIBBS', 'n_chains', fallback=GIBBS_N_CHAINS))
                if vals["burn_in"] >= vals["n_iter"] or vals["thin"] < 1 or vals["n_chains"] < 1:
                    raise ValueError("need burn_in < n_iter, thin >= 1 and n_chains >= 1")
            except Exception as ex:
                logging.error("Invalid GIBBS values, falling back to default values, ex: %s", ex)
                vals = dict(n_iter=GIBBS_N_ITER, burn_in=GIBBS_BURN_IN, thin=GIBBS_THIN,
                            n_chains=GIBBS_N_CHAINS)
            return vals
        elif section == 'SIMULATION':
            try:
                vals = dict(replications=cfg.getint('SIMULATION', 'replications', fallback=SIM_REPLICATIONS),
                            m_values=tuple(int(m) for m in
                                           cfg.getfloatlist('SIMULATION', 'm_values', fallback=SIM_M_VALUES)))
                if vals["replications"] < 1 or any(m < 0 for m in vals["m_values"]):
                    raise ValueError("replications must be >= 1 and m values >= 0")
            except Exception as ex:
                logging.error("Invalid SIMULATION values, falling back to default values, ex: %s", ex)
                vals = dict(replications=SIM_REPLICATIONS, m_values=SIM_M_VALUES)
            return vals
        elif section == 'LOGGING':
            level = cfg.get('LOGGING', 'level', fallback=LOG_LEVEL).upper()
            if level not in ("DEBUG", "INFO", "WARNING", "ERROR"):
                logging.error("Invalid LOGGING level %s, falling back to %s", level, LOG_LEVEL)
                level = LOG_LEVEL
            return dict(level=level, log_file=cfg.get('LOGGING', 'log_file', fallback=None))
        else:
            raise ValueError("No available section with name %s in the config file" % (section,))
