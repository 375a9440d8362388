"""Recurrence, hitting-time tails and convergence rates of growth models with sublinear drift."""

from .classifier import (ClassificationReport, Regime, classify, classify_model, compute_lambda,
                         compute_theta, predict_bracket, predict_tv_rate)
from .models import (BesselLikeWalk, CriticalGWI, NonMarkovR, PowerDriftChain, PowerDriftLattice,
                     StateDepGW, TrajectoryConfig, model_from_dict, simulate_hitting_time)
from .montecarlo import (DriftCheckReport, SurvivalEstimate, check_drift_power,
                         check_drift_transformed, estimate_survival)
from .oracle import (TruncatedKernel, build_kernel, exact_survival, invariant_measure,
                     tv_decay)
from .stats import TailExponentRegressor, TailFit, fit_tail, sandwich_verdict
from .transforms import DriftSpec, TransformEngine, make_engine

__all__ = [
    "BesselLikeWalk", "ClassificationReport", "CriticalGWI", "DriftCheckReport", "DriftSpec",
    "NonMarkovR", "PowerDriftChain", "PowerDriftLattice", "Regime", "StateDepGW",
    "SurvivalEstimate", "TailExponentRegressor", "TailFit", "TrajectoryConfig",
    "TransformEngine", "TruncatedKernel", "build_kernel", "check_drift_power",
    "check_drift_transformed", "classify", "classify_model", "compute_lambda",
    "compute_theta", "estimate_survival", "exact_survival", "fit_tail", "invariant_measure",
    "make_engine", "model_from_dict", "predict_bracket", "predict_tv_rate",
    "sandwich_verdict", "simulate_hitting_time", "tv_decay",
]
