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

Command line front end: fit a model, predict from a saved model, simulate data sets,
standardize a data file, compare the Gibbs sampler with variational Bayes, run the
simulation benchmark and the validation checks.

Every command is deterministic given its inputs and --seed. Runtimes are only
written with --timing, so that repeated runs produce byte-identical files.
'''

import json
import logging

import click
from decorator import decorator
import numpy
import pandas
from scipy import stats

import bayfactor
from bayfactor.cli.checks import CRITERIA, run_check
from bayfactor.data import load_csv, load_features, write_csv, Standardization, OUTCOME_LINEAR, OUTCOME_BINOMIAL, \
    OUTCOMES
from bayfactor.errors import BayFactorError, ExitCodes, InvalidSpec, SchemaMismatch, NotConverged
from bayfactor.freq import fa_mle, fa_pml, cv_penalty, empirical_covariance, em_semisupervised, two_step_fit, \
    ridge_fit
from bayfactor.gibbs import ChainConfig, gibbs_linear, gibbs_logistic
from bayfactor.model import FactorParams, PredictionRule, induced_coefficients, kaiser_dimension, predict
from bayfactor.sim import ScenarioSpec, gen_scenario, run_benchmark, summarize, METHODS, BINOMIAL_METHODS, \
    FULL_M_VALUES, FULL_REPLICATIONS
from bayfactor.util.config import Settings
from bayfactor.util.log import init_logging, init_file_logger
from bayfactor.vb import HyperParams, EBMode, fit_vb, fit_vb_logistic, fit_report, logistic_rule, \
    predict_bayes_mc, predict_bayes_taylor, predict_logistic, posterior_to_dict, posterior_from_dict
from bayfactor.vb.serialize import KIND_LOGISTIC

MODEL_FORMAT = "bayfactor-model"
MODEL_VERSION = 1
FIT_METHODS = ("vb", "eb-vb", "mle", "pml", "em", "two-step", "ridge", "gibbs")
BINOMIAL_FIT_METHODS = ("vb", "eb-vb", "gibbs")
PREDICT_MODES = ("plugin", "mc", "taylor")
# Gibbs-VB agreement thresholds
MIN_RULE_CORRELATION = 0.9
SIGN_THRESHOLD = 0.05


@decorator
def exit_on_error(f, *args, **kwargs):
    """ Converts library errors into a message and the exit status of their kind. """
    try:
        return f(*args, **kwargs)
    except BayFactorError as ex:
        logging.error("%s failed: %s", f.__name__, ex)
        click.echo("Error: %s" % (ex,), err=True)
        click.get_current_context().exit(int(ex.code))


def _pick(value, settings, key):
    """ command line value if given, otherwise the configuration value """
    return settings[key] if value is None else value


def _resolve_d(d_opt, data):
    if d_opt == "kaiser":
        d = kaiser_dimension(data.X, data.n)
        logging.info("Kaiser criterion: d = %d", d)
        return d
    try:
        d = int(d_opt)
    except ValueError:
        raise click.BadParameter("must be a positive integer or 'kaiser', got %r" % (d_opt,), param_hint="--d")
    if d < 1:
        raise click.BadParameter("must be >= 1, got %d" % (d,), param_hint="--d")
    return d


def _write_json(path, doc):
    with open(path, "w", encoding="utf-8") as f:
        f.write(json.dumps(doc, sort_keys=True, indent=1))
        f.write("\n")


def _read_json(path):
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except ValueError as ex:
        raise SchemaMismatch("%s is not a valid JSON document: %s" % (path, ex))


@click.group()
@click.option("--config", "config_file", type=click.Path(dir_okay=False), default=None,
              help="INI configuration file (default: bayfactor.ini in the user configuration directory).")
@click.option("--log-file", type=click.Path(dir_okay=False), default=None, help="Also log to this file.")
@click.option("-v", "--verbose", is_flag=True, help="Log debug messages.")
@click.option("--timing", is_flag=True, help="Record runtimes in the outputs (they are 0 otherwise).")
@click.version_option(bayfactor.__version__, prog_name=bayfactor.__shortname__)
@click.pass_context
def cli(ctx, config_file, log_file, verbose, timing):
    """ Semi-supervised Bayesian factor regression. """
    settings = Settings(config_file)
    logcfg = settings.load("LOGGING")
    init_logging(logging.DEBUG if verbose else getattr(logging, logcfg["level"]))
    log_file = log_file or logcfg["log_file"]
    if log_file:
        handler = init_file_logger(log_file)
        ctx.call_on_close(lambda: logging.getLogger().removeHandler(handler) or handler.close())
    logging.debug("%s version %s", bayfactor.__shortname__, bayfactor.__version__)
    ctx.obj = {"settings": settings, "timing": timing}


def _hyper(d, n_groups, eb_mode, fitcfg):
    return HyperParams(1.0 / d, numpy.ones(n_groups), fitcfg["kappa"], fitcfg["nu"], d, EBMode(eb_mode))


def _fit_frequentist(method, data, d, fitcfg, freqcfg):
    """ :returns: params (FactorParams or None), rule (PredictionRule), report (dict) """
    report = {"converged": True}
    params = None
    try:
        if method == "mle":
            params = fa_mle(empirical_covariance(data), d, fitcfg["tol"], fitcfg["max_iter"])
        elif method == "pml":
            penalty = cv_penalty(data, d, freqcfg["folds"], freqcfg["penalty_grid"], seed=fitcfg["seed"])
            report["penalty"] = penalty.gamma_pen
            params = fa_pml(empirical_covariance(data), d, penalty, fitcfg["tol"], fitcfg["max_iter"])
        elif method == "em":
            params = em_semisupervised(data, d, None, fitcfg["tol"], fitcfg["max_iter"])
    except NotConverged as ex:
        logging.warning("%s did not converge, keeping the last estimate", method)
        params = ex.params
        report["converged"] = False

    if params is not None:
        rule = induced_coefficients(params)
        if hasattr(params, "loglik_trace"):
            report["loglik_trace"] = [float(v) for v in params.loglik_trace]
    elif method == "two-step":
        rule = two_step_fit(data, d)
    elif method == "ridge":
        rule = ridge_fit(data, freqcfg["folds"], freqcfg["ridge_grid"], fitcfg["seed"])
    else:
        raise InvalidSpec("Unknown method %s" % (method,))
    return params, rule, report


@cli.command()
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False), required=True,
              help="Data file (CSV, outcome in column y, empty cell for unlabeled rows).")
@click.option("--groups", "groups_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Group label of each feature, one integer per line (default: a single group).")
@click.option("--method", type=click.Choice(FIT_METHODS), default="vb", show_default=True)
@click.option("--outcome", type=click.Choice(OUTCOMES), default=OUTCOME_LINEAR, show_default=True)
@click.option("--d", "d_opt", default="kaiser", show_default=True,
              help="Latent dimension, or 'kaiser' to count the correlation eigenvalues above 1.")
@click.option("--m-unlabeled-from-blanks/--drop-unlabeled", "unlabeled", default=True, show_default=True,
              help="Keep rows with an empty outcome as unlabeled rows, or drop them.")
@click.option("--seed", type=int, default=None, help="Master seed [default: 0].")
@click.option("--tol", type=click.FloatRange(min=0, min_open=True), default=None,
              help="Relative change at which to stop [default: 1e-6].")
@click.option("--max-iter", type=click.IntRange(min=1), default=None, help="Maximum iterations [default: 5000].")
@click.option("--eb-mode", type=click.Choice([m.value for m in EBMode]), default=None,
              help="Empirical Bayes update of the group variances [default: off, constrained for eb-vb].")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True, help="Model file (JSON).")
@click.option("--report", "report_path", type=click.Path(dir_okay=False), default=None,
              help="Fit report file (JSON).")
@click.option("--draws", "draws_path", type=click.Path(dir_okay=False), default=None,
              help="Gibbs only: write the retained draws (CSV).")
@click.pass_obj
@exit_on_error
def fit(obj, input_path, groups_path, method, outcome, d_opt, unlabeled, seed, tol, max_iter, eb_mode,
        out_path, report_path, draws_path):
    """ Fits a model and saves it. """
    settings = obj["settings"]
    fitcfg = settings.load("FIT")
    fitcfg.update(seed=_pick(seed, fitcfg, "seed"), tol=_pick(tol, fitcfg, "tol"),
                  max_iter=_pick(max_iter, fitcfg, "max_iter"))
    if outcome == OUTCOME_BINOMIAL and method not in BINOMIAL_FIT_METHODS:
        raise InvalidSpec("Method %s does not handle binomial outcomes (use one of %s)" %
                          (method, ", ".join(BINOMIAL_FIT_METHODS)))

    data = load_csv(input_path, groups_path, outcome, unlabeled).standardize()
    d = _resolve_d(d_opt, data)
    logging.info("Fitting %s on %d labeled and %d unlabeled rows, %d features, d = %d",
                 method, data.n, data.m, data.p, d)

    posterior = None
    params = None
    if method in ("vb", "eb-vb"):
        mode = eb_mode or (EBMode.CONSTRAINED.value if method == "eb-vb" else fitcfg["eb_mode"])
        hyper = _hyper(d, data.n_groups, mode, fitcfg)
        if outcome == OUTCOME_BINOMIAL:
            state, params = fit_vb_logistic(data, hyper, fitcfg["tol"], fitcfg["max_iter"], fitcfg["seed"])
            rule = logistic_rule(state)
        else:
            state, params = fit_vb(data, hyper, fitcfg["tol"], fitcfg["max_iter"], fitcfg["seed"])
            rule = induced_coefficients(params)
        posterior = posterior_to_dict(state)
        report = fit_report(state, obj["timing"], outcome).to_dict()
    elif method == "gibbs":
        gcfg = settings.load("GIBBS")
        config = ChainConfig(gcfg["n_iter"], gcfg["burn_in"], gcfg["thin"], fitcfg["seed"])
        hyper = _hyper(d, data.n_groups, EBMode.OFF.value, fitcfg)
        sampler = gibbs_logistic if outcome == OUTCOME_BINOMIAL else gibbs_linear
        summary = sampler(data, hyper, config, gcfg["n_chains"])
        rule = summary.rule
        if draws_path:
            summary.to_csv(draws_path)
        report = {"converged": True, "n_draws": int(summary.draws["coef"].shape[0])}
    else:
        params, rule, report = _fit_frequentist(method, data, d, fitcfg, settings.load("FREQ"))

    report.update(method=method, d=d)
    if not obj["timing"]:
        report["runtime_ms"] = 0.0
    doc = {"format": MODEL_FORMAT,
           "version": MODEL_VERSION,
           "software": bayfactor.__version__,
           "method": method,
           "outcome": outcome,
           "d": d,
           "groups": [int(g) for g in data.groups],
           "params": None if params is None else params.to_dict(),
           "rule": rule.to_dict(),
           "transform": data.transform.to_dict(),
           "posterior": posterior}
    _write_json(out_path, doc)
    if report_path:
        _write_json(report_path, report)
    if not report.get("converged", True):
        click.echo("Warning: the fit did not converge", err=True)
    logging.info("Model written to %s", out_path)


def load_model(path):
    """
    Reads a model file written by "fit".
    :returns: (dict) the document, with "rule" and "transform" parsed
    :raises SchemaMismatch: if the file is not a model file of a known version
    """
    doc = _read_json(path)
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise SchemaMismatch("%s is not a %s file" % (path, MODEL_FORMAT))
    if doc.get("version") != MODEL_VERSION:
        raise SchemaMismatch("%s has version %s, expected %d" % (path, doc.get("version"), MODEL_VERSION))
    try:
        doc["rule"] = PredictionRule.from_dict(doc["rule"])
        doc["transform"] = Standardization.from_dict(doc["transform"])
        if doc.get("params") is not None:
            doc["params"] = FactorParams.from_dict(doc["params"])
    except (KeyError, TypeError, ValueError) as ex:
        raise SchemaMismatch("%s: invalid model: %s" % (path, ex))
    return doc


@cli.command("predict")
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), required=True,
              help="Model file written by fit.")
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False), required=True,
              help="Data file; the y and N columns, if present, are ignored.")
@click.option("--predict-mode", type=click.Choice(PREDICT_MODES), default=None,
              help="Plug-in rule, Monte Carlo or second order posterior mean [default: plugin].")
@click.option("--mc-draws", type=click.IntRange(min=1), default=None,
              help="Monte Carlo draws [default: 1000].")
@click.option("--seed", type=int, default=None, help="Seed of the Monte Carlo draws [default: 0].")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True, help="Predictions (CSV).")
@click.pass_obj
@exit_on_error
def predict_cmd(obj, model_path, input_path, predict_mode, mc_draws, seed, out_path):
    """ Predicts the outcome (or the success probability) of every row. """
    settings = obj["settings"]
    pcfg = settings.load("PREDICT")
    mode = _pick(predict_mode, pcfg, "predict_mode")
    n_draws = _pick(mc_draws, pcfg, "mc_draws")
    seed = _pick(seed, settings.load("FIT"), "seed")

    model = load_model(model_path)
    rule, tr = model["rule"], model["transform"]
    X = load_features(input_path)
    if X.shape[1] != rule.p:
        raise SchemaMismatch("Model has %d features but %s has %d" % (rule.p, input_path, X.shape[1]))
    Xs = tr.apply(X)

    se = None
    if mode == "plugin":
        yhat = predict(rule, Xs)
    else:
        if model.get("posterior") is None:
            raise InvalidSpec("Prediction mode %s needs a variational model, not %s" % (mode, model["method"]))
        state = posterior_from_dict(model["posterior"])
        if model["posterior"]["kind"] == KIND_LOGISTIC:
            yhat = predict_logistic(state, Xs, n_draws, seed, second_order=(mode == "taylor"))
        elif mode == "mc":
            yhat, se = predict_bayes_mc(state, Xs, n_draws, seed)
        else:
            yhat = predict_bayes_taylor(state, Xs)

    df = pandas.DataFrame({"yhat": yhat})
    if model["outcome"] == OUTCOME_LINEAR:
        df["yhat"] = tr.invert_y(yhat)
        if se is not None:
            df["se"] = se * tr.y_scale
    df.to_csv(out_path, index=False, float_format="%.17g")
    logging.info("%d predictions written to %s", len(df), out_path)


@cli.command()
@click.option("--scenario", type=click.Choice(["1", "2"]), default="1", show_default=True)
@click.option("--n", type=click.IntRange(min=2), default=50, show_default=True, help="Labeled rows.")
@click.option("--m", type=click.IntRange(min=0), default=0, show_default=True, help="Unlabeled rows.")
@click.option("--p", type=click.IntRange(min=2), default=100, show_default=True, help="Features.")
@click.option("--outcome", type=click.Choice(OUTCOMES), default=OUTCOME_LINEAR, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True,
              help="Training data (CSV, standardized).")
@click.option("--groups-out", type=click.Path(dir_okay=False), default=None, help="Group labels file.")
@click.option("--test-out", type=click.Path(dir_okay=False), default=None, help="Test data (CSV).")
@click.option("--truth-out", type=click.Path(dir_okay=False), default=None,
              help="Generating parameters on the standardized scale (JSON).")
@click.pass_obj
@exit_on_error
def simulate(obj, scenario, n, m, p, outcome, seed, out_path, groups_out, test_out, truth_out):
    """ Draws a simulated data set. """
    spec = ScenarioSpec(id=int(scenario), n=n, m=m, p=p, seed=seed, outcome=outcome)
    train, truth, test = gen_scenario(spec)
    write_csv(out_path, train.X, train.y, train.trials)
    if groups_out:
        with open(groups_out, "w", encoding="utf-8") as f:
            f.write("".join("%d\n" % g for g in train.groups))
    if test_out:
        write_csv(test_out, test.X, test.y, test.trials)
    if truth_out:
        _write_json(truth_out, truth.to_dict())
    logging.info("Scenario %d: %d labeled and %d unlabeled rows written to %s", spec.id, n, m, out_path)


@cli.command()
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--groups", "groups_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--outcome", type=click.Choice(OUTCOMES), default=OUTCOME_LINEAR, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True,
              help="Standardized data (CSV), labeled rows first.")
@click.option("--transform-out", type=click.Path(dir_okay=False), default=None,
              help="Means and scales of the labeled rows (JSON).")
@click.pass_obj
@exit_on_error
def standardize(obj, input_path, groups_path, outcome, out_path, transform_out):
    """ Standardizes a data file with the moments of its labeled rows. """
    data = load_csv(input_path, groups_path, outcome).standardize()
    write_csv(out_path, data.X, data.y, data.trials)
    if transform_out:
        _write_json(transform_out, data.transform.to_dict())


@cli.command("gibbs-check")
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--groups", "groups_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--outcome", type=click.Choice(OUTCOMES), default=OUTCOME_LINEAR, show_default=True)
@click.option("--d", "d_opt", default="kaiser", show_default=True)
@click.option("--seed", type=int, default=None, help="Master seed [default: 0].")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None,
              help="Coefficients of both rules (CSV).")
@click.option("--trace-out", type=click.Path(dir_okay=False), default=None,
              help="Mean, variance and lag-1 autocorrelation of every sampled scalar (CSV).")
@click.pass_obj
@exit_on_error
def gibbs_check(obj, input_path, groups_path, outcome, d_opt, seed, out_path, trace_out):
    """
    Fits variational Bayes and runs the Gibbs sampler on the same data, then compares
    the two prediction rules. Exits with status 1 if they disagree.
    """
    settings = obj["settings"]
    fitcfg = settings.load("FIT")
    fitcfg["seed"] = _pick(seed, fitcfg, "seed")
    gcfg = settings.load("GIBBS")
    data = load_csv(input_path, groups_path, outcome).standardize()
    d = _resolve_d(d_opt, data)
    hyper = _hyper(d, data.n_groups, EBMode.OFF.value, fitcfg)
    config = ChainConfig(gcfg["n_iter"], gcfg["burn_in"], gcfg["thin"], fitcfg["seed"])

    if outcome == OUTCOME_BINOMIAL:
        state, _ = fit_vb_logistic(data, hyper, fitcfg["tol"], fitcfg["max_iter"], fitcfg["seed"])
        vb_coef = logistic_rule(state).coefficients
        summary = gibbs_logistic(data, hyper, config, gcfg["n_chains"])
    else:
        _, params = fit_vb(data, hyper, fitcfg["tol"], fitcfg["max_iter"], fitcfg["seed"])
        vb_coef = induced_coefficients(params).coefficients
        summary = gibbs_linear(data, hyper, config, gcfg["n_chains"])
    gibbs_coef = summary.rule.coefficients

    cor = float(stats.pearsonr(vb_coef, gibbs_coef)[0]) if data.p > 1 else 1.0
    big = numpy.abs(gibbs_coef) > SIGN_THRESHOLD
    signs = bool(numpy.all(numpy.sign(vb_coef[big]) == numpy.sign(gibbs_coef[big])))
    if out_path:
        pandas.DataFrame({"vb": vb_coef, "gibbs": gibbs_coef}).to_csv(out_path, index=False,
                                                                       float_format="%.17g")
    if trace_out:
        summary.trace_table().to_csv(trace_out, index=False, float_format="%.17g")

    passed = cor > MIN_RULE_CORRELATION and signs
    click.echo("correlation %.4f, signs %s: %s" % (cor, "agree" if signs else "differ",
                                                  "PASS" if passed else "FAIL"))
    if not passed:
        click.get_current_context().exit(int(ExitCodes.CHECK_FAILED))


@cli.command()
@click.option("--scenario", "scenarios", type=click.Choice(["1", "2"]), multiple=True,
              help="Scenario to run, can be repeated [default: both].")
@click.option("--method", "methods", type=click.Choice(METHODS), multiple=True,
              help="Method to run, can be repeated [default: all the methods of the outcome type].")
@click.option("--outcome", type=click.Choice(OUTCOMES), default=OUTCOME_LINEAR, show_default=True)
@click.option("--replications", type=click.IntRange(min=1), default=None, help="[default: 20]")
@click.option("--full-grid", is_flag=True, help="m in {0, 50, 100, 200, 500} and 50 replications.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True,
              help="One row per scenario, method, m and replication (CSV).")
@click.option("--summary", "summary_path", type=click.Path(dir_okay=False), default=None,
              help="Medians over the replications (CSV).")
@click.pass_obj
@exit_on_error
def benchmark(obj, scenarios, methods, outcome, replications, full_grid, seed, out_path, summary_path):
    """ Runs the simulation benchmark. """
    simcfg = obj["settings"].load("SIMULATION")
    fitcfg = obj["settings"].load("FIT")
    if full_grid:
        m_values, reps = FULL_M_VALUES, FULL_REPLICATIONS
    else:
        m_values, reps = simcfg["m_values"], simcfg["replications"]
    reps = replications or reps
    if not methods:
        methods = BINOMIAL_METHODS if outcome == OUTCOME_BINOMIAL else METHODS
    scenarios = tuple(int(s) for s in scenarios) or (1, 2)

    table = run_benchmark(scenarios, methods, reps, seed, m_values, outcome, tol=fitcfg["tol"],
                          max_iter=fitcfg["max_iter"], timing=obj["timing"])
    table.to_csv(out_path, index=False, float_format="%.17g")
    if summary_path:
        summarize(table).to_csv(summary_path, index=False, float_format="%.17g")
    failed = int((table["status"] == "failed").sum())
    click.echo("%d cells, %d failed" % (len(table), failed))


@cli.command()
@click.option("--criterion", "criteria", type=click.Choice(sorted(CRITERIA)), multiple=True,
              help="Check to run, can be repeated [default: all].")
@click.option("--seed", type=int, default=0, show_default=True)
@click.pass_obj
@exit_on_error
def check(obj, criteria, seed):
    """ Runs the validation checks and reports pass or fail for each. Exits with status 1 on any failure. """
    results = run_check(criteria or None, seed)
    for res in results:
        click.echo("%-24s %s  %s" % (res.name, "PASS" if res.passed else "FAIL", res.detail))
        for msg in res.warnings:
            click.echo("    %s" % (msg,))
    if not all(r.passed for r in results):
        click.get_current_context().exit(int(ExitCodes.CHECK_FAILED))


if __name__ == "__main__":
    cli()
