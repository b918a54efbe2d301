"""Classifiers for steerability labels: SVM (SMO), ReLU network, boosted trees."""
from .ann import AnnModel, gradient_check, train_ann
from .boost import BoostModel, fit_boost, train_boost
from .common import (EvalReport, Model, evaluate, load_model, predict, save_model, stratified_folds,
                     train_test_split)
from .svm import SvmModel, train_svm

TRAINERS = {"svm": train_svm, "ann": train_ann, "boost": train_boost}


def finish_report(model: Model, report: EvalReport, test=None, generalization: dict | None = None) -> EvalReport:
    """Fill in test and generalisation-set accuracies on ``report``."""
    if test is not None:
        ev = evaluate(model, test)
        report.test_accuracy, report.confusion, report.n_test = ev["accuracy"], ev["confusion"], ev["n"]
    for name, ds in (generalization or {}).items():
        report.generalization[name] = evaluate(model, ds)["accuracy"]
    return report


__all__ = [
    "AnnModel", "BoostModel", "EvalReport", "Model", "SvmModel", "TRAINERS", "evaluate", "finish_report",
    "fit_boost", "gradient_check", "load_model", "predict", "save_model", "stratified_folds", "train_ann",
    "train_boost", "train_svm", "train_test_split",
]
