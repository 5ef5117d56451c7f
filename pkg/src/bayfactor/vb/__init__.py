from bayfactor.vb.hyper import EBMode, HyperParams, default_hyperparams, eb_update, eb_update_free, \
    eb_update_constrained, KAPPA, NU
from bayfactor.vb.linear import VariationalStateLinear, FitReport, vb_init, vb_sweep, elbo_linear, fit_vb, \
    posthoc_correction, params_from_state, fit_report
from bayfactor.vb.predict import plugin_rule, bayes_rule_mc, predict_bayes_mc, bayes_rule_taylor, \
    predict_bayes_taylor, taylor_psi_term
from bayfactor.vb.logistic import VariationalStateLogistic, vb_logistic_init, vb_logistic_sweep, \
    elbo_logistic, fit_vb_logistic, params_from_logistic, logistic_rule, predict_logistic
from bayfactor.vb.serialize import posterior_to_dict, posterior_from_dict, hyper_to_dict, hyper_from_dict
