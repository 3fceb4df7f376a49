"""Log-linear token-throughput regression with a plateau cap.

Per model, ``ln TPS = b0 + b1 ln L_in + b2 ln L_out`` is fitted by least
squares on the benchmark rows, and predictions are clipped at the largest
throughput observed for that model.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .benchmark_data import BenchmarkRecord, model_names, records_for_model

UNDERDETERMINED_STRATEGIES = ("pooled_slopes", "min_norm")


@dataclass(frozen=True)
class TpsModel:
    model_name: str
    beta0: float
    beta1: float
    beta2: float
    tps_cap: float
    n_obs: int
    method: str = "ols"

    def __post_init__(self):
        if not self.tps_cap > 0:
            raise ValueError(f"tps_cap must be > 0, got {self.tps_cap}")

    def uncapped(self, l_in, l_out):
        return np.exp(self.beta0 + self.beta1 * np.log(l_in) + self.beta2 * np.log(l_out))


def _design(l_in, l_out) -> np.ndarray:
    l_in = np.asarray(l_in, dtype=float)
    l_out = np.asarray(l_out, dtype=float)
    return np.column_stack([np.ones_like(l_in), np.log(l_in), np.log(l_out)])


def _solve(l_in, l_out, tps) -> tuple[np.ndarray, int]:
    X = _design(l_in, l_out)
    # lstsq is SVD-based: the unique solution at full rank, minimum-norm otherwise
    coef, _, rank, _ = np.linalg.lstsq(X, np.log(np.asarray(tps, dtype=float)), rcond=None)
    return coef, int(rank)


def _check_single_model(records: Sequence[BenchmarkRecord]) -> str:
    if not records:
        raise ValueError("cannot fit a throughput model on zero records")
    names = model_names(records)
    if len(names) > 1:
        raise ValueError(f"records span several models: {names}")
    return names[0]


def fit_log_linear(records: Sequence[BenchmarkRecord]) -> TpsModel:
    """Least-squares fit for one model's rows.

    Full-rank designs with at least three rows get the unique OLS solution;
    anything less determined gets the minimum-norm solution.
    """
    name = _check_single_model(records)
    tps = [r.tps for r in records]
    coef, rank = _solve([r.l_in for r in records], [r.l_out for r in records], tps)
    method = "ols" if rank == 3 and len(records) >= 3 else "min_norm"
    return TpsModel(name, *map(float, coef), tps_cap=float(max(tps)), n_obs=len(records), method=method)


def pooled_slopes(records: Sequence[BenchmarkRecord]) -> tuple[float, float]:
    """Common (b1, b2) from a regression with one intercept per model.

    Only models whose own design has full rank contribute.
    """
    groups = [records_for_model(records, name) for name in model_names(records)]
    groups = [g for g in groups if len(g) >= 3 and _solve([r.l_in for r in g], [r.l_out for r in g], [r.tps for r in g])[1] == 3]
    if not groups:
        raise ValueError("no model has enough benchmark rows to estimate shared slopes")
    blocks, targets = [], []
    for k, group in enumerate(groups):
        dummies = np.zeros((len(group), len(groups)))
        dummies[:, k] = 1.0
        design = _design([r.l_in for r in group], [r.l_out for r in group])
        blocks.append(np.column_stack([dummies, design[:, 1:]]))
        targets.append(np.log([r.tps for r in group]))
    coef = np.linalg.lstsq(np.vstack(blocks), np.concatenate(targets), rcond=None)[0]
    return float(coef[-2]), float(coef[-1])


def fit_with_slopes(records: Sequence[BenchmarkRecord], beta1: float, beta2: float) -> TpsModel:
    """Fit only the intercept, holding the two slopes fixed."""
    name = _check_single_model(records)
    X = _design([r.l_in for r in records], [r.l_out for r in records])
    resid = np.log([r.tps for r in records]) - X[:, 1] * beta1 - X[:, 2] * beta2
    return TpsModel(
        name, float(resid.mean()), beta1, beta2,
        tps_cap=float(max(r.tps for r in records)), n_obs=len(records), method="pooled_slopes",
    )


def fit_models(records: Sequence[BenchmarkRecord], underdetermined: str = "pooled_slopes") -> dict[str, TpsModel]:
    """Fit every model in ``records``, keyed by name in first-appearance order.

    ``underdetermined`` picks how models without a full-rank design are
    handled: ``"pooled_slopes"`` borrows the slopes shared by the
    well-determined models and fits only an intercept, ``"min_norm"`` keeps
    the minimum-norm least-squares solution.
    """
    if underdetermined not in UNDERDETERMINED_STRATEGIES:
        raise ValueError(f"underdetermined must be one of {UNDERDETERMINED_STRATEGIES}, got {underdetermined!r}")
    models = {name: fit_log_linear(records_for_model(records, name)) for name in model_names(records)}
    if underdetermined == "pooled_slopes" and any(m.method == "min_norm" for m in models.values()):
        b1, b2 = pooled_slopes(records)
        for name, m in models.items():
            if m.method == "min_norm":
                models[name] = fit_with_slopes(records_for_model(records, name), b1, b2)
    return models


def predict_tps(model: TpsModel, l_in, l_out):
    """Capped throughput; scalar in, scalar out."""
    scalar = np.ndim(l_in) == 0 and np.ndim(l_out) == 0
    l_in = np.asarray(l_in, dtype=float)
    l_out = np.asarray(l_out, dtype=float)
    if np.any(l_in < 1) or np.any(l_out < 1):
        raise ValueError("l_in and l_out must be >= 1")
    tps = np.minimum(model.uncapped(l_in, l_out), model.tps_cap)
    return float(tps) if scalar else tps


def log_rss(model: TpsModel, records: Iterable[BenchmarkRecord]) -> float:
    """Residual sum of squares of the uncapped fit in log space."""
    records = list(records)
    pred = np.log(model.uncapped([r.l_in for r in records], [r.l_out for r in records]))
    return float(np.sum((np.log([r.tps for r in records]) - pred) ** 2))


def _sig6(x: float) -> float:
    return float(f"{x:.6g}")


def models_to_document(models: Mapping[str, TpsModel]) -> dict:
    return {
        "models": [
            {
                "model_name": m.model_name,
                "beta0": _sig6(m.beta0),
                "beta1": _sig6(m.beta1),
                "beta2": _sig6(m.beta2),
                "tps_cap": m.tps_cap,
                "n_obs": m.n_obs,
                "method": m.method,
            }
            for m in models.values()
        ]
    }


def models_to_text(models: Mapping[str, TpsModel]) -> str:
    return json.dumps(models_to_document(models), indent=2) + "\n"


def models_from_document(doc: Mapping) -> dict[str, TpsModel]:
    return {entry["model_name"]: TpsModel(**entry) for entry in doc["models"]}


class LogLinearTPSRegressor(RegressorMixin, BaseEstimator):
    """Scikit-learn regressor for capped log-linear throughput.

    ``X`` has two columns, input and output token counts; ``y`` is
    throughput in tokens per second.

    Parameters
    ----------
    cap : bool, default=True
        Clip predictions at the largest training throughput.
    """

    def __init__(self, cap=True):
        self.cap = cap

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        if X.shape[1] != 2:
            raise ValueError(f"expected 2 features (l_in, l_out), got {X.shape[1]}")
        if np.any(X < 1) or np.any(y <= 0):
            raise ValueError("token counts must be >= 1 and throughput > 0")
        coef, rank = _solve(X[:, 0], X[:, 1], y)
        self.intercept_ = float(coef[0])
        self.coef_ = coef[1:].copy()
        self.tps_cap_ = float(y.max())
        self.n_obs_ = len(y)
        self.rank_ = rank
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != 2:
            raise ValueError(f"expected 2 features (l_in, l_out), got {X.shape[1]}")
        if np.any(X < 1):
            raise ValueError("token counts must be >= 1")
        pred = np.exp(self.intercept_ + np.log(X) @ self.coef_)
        return np.minimum(pred, self.tps_cap_) if self.cap else pred

    def to_model(self, model_name: str) -> TpsModel:
        check_is_fitted(self, "coef_")
        method = "ols" if self.rank_ == 3 and self.n_obs_ >= 3 else "min_norm"
        return TpsModel(model_name, self.intercept_, float(self.coef_[0]), float(self.coef_[1]),
                        tps_cap=self.tps_cap_, n_obs=self.n_obs_, method=method)

