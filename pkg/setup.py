#!/usr/bin/env python3
from setuptools import setup, find_packages

setup(name='bayfactor',
    version='0.3.0.dev0',
    description='Semi-supervised Bayesian factor regression',
    url='',
    author='BayFactor developers',
    license='GPLv2',
    package_dir={'': 'src'},
    packages=find_packages('src'),
    python_requires='>=3.8',
    install_requires=[
        'numpy',
        'scipy',
        'pandas',
        'click>=8.0',
        'appdirs',
        'decorator',
    ],
    tests_require=['timeout_decorator', 'scikit-learn'],
    entry_points={
        'console_scripts': ['bayfactor=bayfactor.cli.main:cli'],
    },
    zip_safe=False
)
