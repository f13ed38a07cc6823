"""Personalized linear utility functions for binary accept/reject choices.

A hypernetwork maps each record to its own linear utility (one weight per
feature plus an intercept); a bagged ensemble of such networks provides
calibrated rejection probabilities, uncertainty estimates, and per-feature
attributions. A global logistic-regression utility is included as the
baseline comparator.
"""

from .baseline import LinearModel, fit_logreg, predict_logreg, predict_logreg_batch
from .data import (Dataset, FeatureSchema, NormStats, RawTable, SynthConfig,
                   SynthGroundTruth, bootstrap_sample, gen_synthetic,
                   gen_synthetic_with_raw, load_csv, load_schema, save_csv,
                   save_schema, split, split_raw, standardize, synth_schema)
from .ensemble import (EnsembleModel, avg_weights, average_utilities,
                       member_probs, member_utilities, predict, predict_batch,
                       predict_uncertainty, train_ensemble)
from .explain import (ContributionCurve, CounterfactualResult, ImportanceTable,
                      contribution_sweep, counterfactual_sweep,
                      global_importance, instance_contributions)
from .hypernet import (HyperMemberParams, InstanceUtility, TrainConfig,
                       batch_loss, hyper_forward, penalty, predict_prob,
                       rejection_probs, train_member)
from .metrics import (EvalReport, accuracy, auc_pr, auc_roc, brier, ece,
                      evaluate, nll)
from .nn import (NetParams, NetworkArch, OptState, adam_step, backward,
                 forward, grad_check, init_opt_state, init_params)
from .serialize import MODEL_FORMAT_VERSION, load_model, save_model

__version__ = "0.1.0"
