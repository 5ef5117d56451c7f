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

import collections
import logging
import os
import threading
from logging.handlers import RotatingFileHandler

from appdirs import AppDirs

LOG_FORMAT = '%(asctime)s %(levelname)s %(message)s'
LOG_LINES = 500


def init_logging(level=logging.INFO):
    """
    Sets up the root logger for the command line. Can be called several times,
    only the level is changed after the first call.
    """
    logging.basicConfig(format=LOG_FORMAT, level=level)
    logging.getLogger().setLevel(level)


def default_log_file():
    """
    :returns: (str) full path of the log file in the user log directory
      (the directory is created if needed)
    """
    dirs = AppDirs("BayFactor", "BayFactor")
    os.makedirs(dirs.user_log_dir, exist_ok=True)
    return os.path.join(dirs.user_log_dir, "bayfactor.log")


def init_file_logger(log_file, level=logging.DEBUG):
    """
    Initializes the file logger to some nice defaults.
    log_file (str): full path to the log file
    :returns: (RotatingFileHandler) the handler added to the root logger
    """
    logging.debug("Opening log file %s", log_file)
    # Max 5 log files of 100Mb
    handler = RotatingFileHandler(log_file, maxBytes=100 * (2 ** 20), backupCount=5)
    handler.setLevel(level)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    logging.getLogger().addHandler(handler)
    return handler


class RecordCollector(logging.Handler):
    """
    Custom log handler, which keeps the latest warnings (and errors) so that they
    can be attached to a report. Use it as a context manager around the code to watch.
    """

    def __init__(self, level=logging.WARNING):
        logging.Handler.__init__(self, level)
        self.setFormatter(logging.Formatter('%(levelname)s %(message)s'))
        self._records = collections.deque(maxlen=LOG_LINES)
        self._lock = threading.Lock()

    def emit(self, record):
        with self._lock:
            self._records.append(self.format(record))

    @property
    def messages(self):
        with self._lock:
            return list(self._records)

    def __enter__(self):
        logging.getLogger().addHandler(self)
        return self

    def __exit__(self, exc_type, exc_value, traceback):
        logging.getLogger().removeHandler(self)
        return False
