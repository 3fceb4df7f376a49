"""Scikit-learn style front end over the throughput fit and the sampler."""
from __future__ import annotations

from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .benchmark_data import BenchmarkRecord, load_benchmarks
from .distributions import lognormal_from_quantiles
from .energy_model import NodeSpec, effective_length, energy_per_query
from .scenario import AlphaSpec, ScenarioSpec, WorkloadSpec, build_members, run_scenario
from .tps_model import fit_models, predict_tps


class QueryEnergyEstimator(BaseEstimator):
    """Energy per query for benchmarked models.

    ``fit`` learns one capped log-linear throughput model per benchmarked
    model. ``predict`` gives a point estimate at the median PUE and node
    power; ``sample`` runs the full Monte Carlo.

    Parameters
    ----------
    pue_p5, pue_p95 : float
        5th/95th percentiles of the log-normal PUE.
    power_p5_frac, power_p95_frac : float
        Node-power percentiles as fractions of the node's peak power.
    power_center_mode : {"quantile_matched", "recentered"}
    power_mode : {"independent", "coupled"}
    l_eff_mode : {"output_only", "input_plus_output"}
    underdetermined : {"pooled_slopes", "min_norm"}
        Handling of models whose benchmark rows cannot pin three coefficients.
    n_samples : int
    random_state : int
        Seed for the counter-based streams.

    Examples
    --------
    >>> est = QueryEnergyEstimator(random_state=7).fit()
    >>> samples = est.sample(["Mixtral 8x22B"], l_out_median=300)
    >>> len(samples)
    10000
    """

    def __init__(self, pue_p5=1.05, pue_p95=1.40, power_p5_frac=0.4, power_p95_frac=0.9,
                 power_center_mode="quantile_matched", power_mode="independent",
                 l_eff_mode="output_only", underdetermined="pooled_slopes", n_samples=10_000, random_state=0):
        self.pue_p5 = pue_p5
        self.pue_p95 = pue_p95
        self.power_p5_frac = power_p5_frac
        self.power_p95_frac = power_p95_frac
        self.power_center_mode = power_center_mode
        self.power_mode = power_mode
        self.l_eff_mode = l_eff_mode
        self.underdetermined = underdetermined
        self.n_samples = n_samples
        self.random_state = random_state

    def fit(self, records: Sequence[BenchmarkRecord] | None = None, y=None):
        records = load_benchmarks() if records is None else list(records)
        self.tps_models_ = fit_models(records, self.underdetermined)
        self.gpu_counts_ = {r.model_name: r.tp_size for r in records}
        self.model_names_ = list(self.tps_models_)
        return self

    def _spec(self, models, workload, alphas=()) -> ScenarioSpec:
        check_is_fitted(self, "tps_models_")
        return ScenarioSpec(
            members=build_members(self.tps_models_, models, gpu_counts=self.gpu_counts_),
            workload=workload,
            pue_p5=self.pue_p5,
            pue_p95=self.pue_p95,
            power_mode=self.power_mode,
            power_p5_frac=self.power_p5_frac,
            power_p95_frac=self.power_p95_frac,
            power_center_mode=self.power_center_mode,
            alphas=tuple(alphas),
            n_samples=self.n_samples,
            seed=self.random_state,
        )

    def predict(self, X, model: str):
        """Point estimate in Wh for rows of ``(l_in, l_out)``, at median PUE and node power."""
        check_is_fitted(self, "tps_models_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != 2:
            raise ValueError(f"expected 2 columns (l_in, l_out), got {X.shape[1]}")
        spec = self._spec([model], WorkloadSpec())
        node: NodeSpec = spec.members[0].node
        tps = predict_tps(self.tps_models_[model], np.maximum(X[:, 0], 1), X[:, 1])
        pue = lognormal_from_quantiles(self.pue_p5, self.pue_p95).median
        power = min(spec.power_params(node).median, node.p_max_kw)
        return energy_per_query(pue, power, effective_length(X[:, 0], X[:, 1], self.l_eff_mode), tps)

    def sample(self, models: Sequence[str], l_out_median: float = 300, l_in: int = 500,
               alphas: Sequence[AlphaSpec] = (), workers: int = 1):
        """Monte Carlo sample set for a uniform pool of ``models``."""
        workload = WorkloadSpec("custom", l_in, l_out_median, self.l_eff_mode)
        samples, _ = run_scenario(self._spec(models, workload, alphas), workers=workers)
        return samples
