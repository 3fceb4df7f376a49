"""Monte Carlo sampling of per-query energy.

Each sample index ``i`` owns one coordinate on every random stream (member
choice, output length, PUE, node power, one per efficiency lever). Two
scenarios run with the same seed therefore see the same workload draws,
and splitting the index range across workers cannot change any value.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Iterator, Sequence

import numpy as np
from scipy.signal import find_peaks

from .distributions import (
    LogNormalParams,
    RngState,
    exponential_from_median,
    lognormal_from_quantiles,
    lognormal_from_uniforms,
    uniforms,
)
from .energy_model import (
    EffectiveLengthMode,
    NodeSpec,
    PowerMode,
    apply_alpha,
    coupled_node_power,
    effective_length,
    energy_per_query,
)
from .tps_model import TpsModel, predict_tps

STREAM_MEMBER = 0
STREAM_L_OUT = 1
STREAM_PUE = 2
STREAM_POWER = 3
STREAM_MIX = 4
ALPHA_CATEGORIES = ("model", "serving", "hardware")
ALPHA_STREAMS = {name: 10 + k for k, name in enumerate(ALPHA_CATEGORIES)}

POWER_CENTER_MODES = ("quantile_matched", "recentered")
L_OUT_DISTRIBUTIONS = ("exponential", "fixed")

SAMPLE_CSV_HEADER = ("model", "l_out", "l_eff", "tps", "p_node_kw", "pue", "alpha", "energy_wh")

BASELINE_MODELS = ("DeepSeek-R1", "Llama 3.1 405B", "Llama-3.1 Nemotron Ultra 253B")


@dataclass(frozen=True)
class WorkloadSpec:
    regime_name: str = "traditional"
    l_in: int = 500
    l_out_median: float = 300
    l_eff_mode: EffectiveLengthMode = EffectiveLengthMode.OUTPUT_ONLY
    # "fixed" pins every query at l_out_median; handy for hand-checkable runs
    l_out_distribution: str = "exponential"

    def __post_init__(self):
        object.__setattr__(self, "l_eff_mode", EffectiveLengthMode(self.l_eff_mode))
        if not self.l_out_median > 0:
            raise ValueError(f"l_out_median must be > 0, got {self.l_out_median}")
        if self.l_in < 0:
            raise ValueError(f"l_in must be >= 0, got {self.l_in}")
        if self.l_out_distribution not in L_OUT_DISTRIBUTIONS:
            raise ValueError(f"l_out_distribution must be one of {L_OUT_DISTRIBUTIONS}")


TRADITIONAL = WorkloadSpec("traditional", 500, 300)
TEST_TIME = WorkloadSpec("test_time", 500, 5000)


@dataclass(frozen=True)
class AlphaSpec:
    category: str
    p5: float
    p95: float
    enabled: bool = True

    def __post_init__(self):
        if self.category not in ALPHA_CATEGORIES:
            raise ValueError(f"alpha category must be one of {ALPHA_CATEGORIES}, got {self.category!r}")
        if not 0 < self.p5 <= self.p95:
            raise ValueError(f"need 0 < p5 <= p95, got {self.p5}, {self.p95}")

    @property
    def params(self) -> LogNormalParams:
        return lognormal_from_quantiles(self.p5, self.p95)


DEFAULT_ALPHAS = {
    "model": AlphaSpec("model", 1.5, 10.0),
    "serving": AlphaSpec("serving", 1.5, 5.0),
    "hardware": AlphaSpec("hardware", 1.5, 2.5),
}


@dataclass(frozen=True)
class Member:
    model_name: str
    node: NodeSpec
    tps_model: TpsModel


@dataclass(frozen=True)
class ScenarioSpec:
    members: tuple[Member, ...]
    workload: WorkloadSpec = TRADITIONAL
    pue_p5: float = 1.05
    pue_p95: float = 1.40
    power_mode: PowerMode = PowerMode.INDEPENDENT
    power_p5_frac: float = 0.4
    power_p95_frac: float = 0.9
    power_center_mode: str = "quantile_matched"
    power_center_frac: float = 0.7
    alphas: tuple[AlphaSpec, ...] = ()
    n_samples: int = 10_000
    seed: int = 0
    name: str = "scenario"

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))
        object.__setattr__(self, "alphas", tuple(self.alphas))
        object.__setattr__(self, "power_mode", PowerMode(self.power_mode))
        if not self.members:
            raise ValueError("a scenario needs at least one member")
        if self.n_samples < 1:
            raise ValueError(f"n_samples must be >= 1, got {self.n_samples}")
        if not 1 <= self.pue_p5 <= self.pue_p95:
            raise ValueError(f"need 1 <= pue_p5 <= pue_p95, got {self.pue_p5}, {self.pue_p95}")
        if not 0 < self.power_p5_frac <= self.power_p95_frac <= 1:
            raise ValueError("need 0 < power_p5_frac <= power_p95_frac <= 1")
        if self.power_center_mode not in POWER_CENTER_MODES:
            raise ValueError(f"power_center_mode must be one of {POWER_CENTER_MODES}")
        categories = [a.category for a in self.alphas]
        if len(set(categories)) != len(categories):
            raise ValueError(f"duplicate alpha categories: {categories}")

    def power_params(self, node: NodeSpec) -> LogNormalParams:
        fitted = lognormal_from_quantiles(self.power_p5_frac * node.p_max_kw, self.power_p95_frac * node.p_max_kw)
        if self.power_center_mode == "recentered":
            return LogNormalParams(math.log(self.power_center_frac * node.p_max_kw), fitted.sigma)
        return fitted

    @property
    def model_names(self) -> list[str]:
        return [m.model_name for m in self.members]


@dataclass(frozen=True)
class QuerySample:
    model_name: str
    l_out: int
    l_eff: float
    tps: float
    p_node_kw: float
    pue: float
    alpha: float
    energy_wh: float

    def recomputed_energy(self) -> float:
        return apply_alpha(energy_per_query(self.pue, self.p_node_kw, self.l_eff, self.tps), self.alpha)


@dataclass(frozen=True)
class DistributionSummary:
    n: int
    mean_wh: float
    p5_wh: float
    q1_wh: float
    median_wh: float
    q3_wh: float
    p95_wh: float

    def as_dict(self) -> dict:
        return asdict(self)

    @property
    def iqr(self) -> tuple[float, float]:
        return self.q1_wh, self.q3_wh


@dataclass
class SampleSet:
    """Column-oriented sample storage; iterating yields ``QuerySample`` rows."""

    model: np.ndarray
    l_out: np.ndarray
    l_eff: np.ndarray
    tps: np.ndarray
    p_node_kw: np.ndarray
    pue: np.ndarray
    alpha: np.ndarray
    energy_wh: np.ndarray
    name: str = field(default="samples", compare=False)

    def __len__(self) -> int:
        return len(self.energy_wh)

    def __iter__(self) -> Iterator[QuerySample]:
        for i in range(len(self)):
            yield self[i]

    def __getitem__(self, i: int) -> QuerySample:
        return QuerySample(
            str(self.model[i]), int(self.l_out[i]), float(self.l_eff[i]), float(self.tps[i]),
            float(self.p_node_kw[i]), float(self.pue[i]), float(self.alpha[i]), float(self.energy_wh[i]),
        )

    def take(self, index) -> "SampleSet":
        return SampleSet(*(getattr(self, c)[index] for c in _COLUMNS), name=self.name)

    def for_model(self, model_name: str) -> "SampleSet":
        return self.take(self.model == model_name)

    @classmethod
    def concat(cls, parts: Sequence["SampleSet"], name: str = "samples") -> "SampleSet":
        return cls(*(np.concatenate([getattr(p, c) for p in parts]) for c in _COLUMNS), name=name)

    @classmethod
    def from_samples(cls, samples: Iterable[QuerySample], name: str = "samples") -> "SampleSet":
        rows = list(samples)
        return cls(
            np.array([s.model_name for s in rows], dtype=object),
            np.array([s.l_out for s in rows], dtype=np.int64),
            *(np.array([getattr(s, c) for s in rows], dtype=float) for c in _COLUMNS[2:]),
            name=name,
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(SAMPLE_CSV_HEADER)
        for s in self:
            writer.writerow([s.model_name, s.l_out, repr(s.l_eff), repr(s.tps), repr(s.p_node_kw),
                             repr(s.pue), repr(s.alpha), repr(s.energy_wh)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, name: str = "samples") -> "SampleSet":
        reader = csv.reader(io.StringIO(text))
        header = tuple(next(reader, ()))
        if header != SAMPLE_CSV_HEADER:
            raise ValueError(f"sample CSV header must be {','.join(SAMPLE_CSV_HEADER)!r}")
        rows = []
        for row_number, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append(QuerySample(row[0], int(row[1]), *map(float, row[2:])))
            except (ValueError, TypeError) as exc:
                raise ValueError(f"sample CSV row {row_number}: {exc}") from None
        return cls.from_samples(rows, name=name)


_COLUMNS = ("model", "l_out", "l_eff", "tps", "p_node_kw", "pue", "alpha", "energy_wh")


def _draw_block(spec: ScenarioSpec, start: int, stop: int, member_index: np.ndarray | None = None,
                stream_base: int = 0) -> SampleSet:
    n = stop - start
    rng = RngState(spec.seed, stream_base, start)

    def u(stream):
        return uniforms(rng.stream(stream_base + stream), n)

    if member_index is None:
        k = len(spec.members)
        member_index = np.zeros(n, dtype=np.int64) if k == 1 else np.minimum((u(STREAM_MEMBER) * k).astype(np.int64), k - 1)

    wl = spec.workload
    if wl.l_out_distribution == "fixed":
        l_out = np.full(n, max(1, math.ceil(wl.l_out_median)), dtype=np.int64)
    else:
        draws = exponential_from_median(wl.l_out_median).quantile(u(STREAM_L_OUT))
        l_out = np.maximum(np.ceil(draws), 1).astype(np.int64)

    # a facility cannot use less power than its IT load
    pue = lognormal_from_uniforms(lognormal_from_quantiles(spec.pue_p5, spec.pue_p95), u(STREAM_PUE), lower=1.0)
    power_u = u(STREAM_POWER) if spec.power_mode is PowerMode.INDEPENDENT else None

    # throughput regression is undefined below one input token
    l_in_for_tps = np.full(n, float(max(wl.l_in, 1)))
    tps = np.empty(n)
    p_node = np.empty(n)
    for k, member in enumerate(spec.members):
        sel = member_index == k
        if not sel.any():
            continue
        tps[sel] = predict_tps(member.tps_model, l_in_for_tps[sel], l_out[sel])
        if spec.power_mode is PowerMode.INDEPENDENT:
            p_node[sel] = lognormal_from_uniforms(spec.power_params(member.node), power_u[sel], upper=member.node.p_max_kw)
        else:
            p_node[sel] = coupled_node_power(tps[sel], member.tps_model.tps_cap, member.node)

    alpha = np.ones(n)
    for a in spec.alphas:
        if a.enabled:
            alpha = alpha * lognormal_from_uniforms(a.params, u(ALPHA_STREAMS[a.category]))

    l_eff = np.asarray(effective_length(wl.l_in, l_out, wl.l_eff_mode), dtype=float)
    energy = apply_alpha(energy_per_query(pue, p_node, l_eff, tps), alpha)
    names = np.array(spec.model_names, dtype=object)[member_index]
    return SampleSet(names, l_out, l_eff, tps, p_node, pue, alpha, energy, name=spec.name)


def sample_query(spec: ScenarioSpec, member_index: int, rng: RngState) -> QuerySample:
    """One query for a given member at sample coordinate ``rng.index``.

    The seed comes from ``rng``; every other field of ``spec`` is used as given.
    """
    if not 0 <= member_index < len(spec.members):
        raise IndexError(f"member_index {member_index} out of range for {len(spec.members)} members")
    if rng.seed != spec.seed:
        spec = replace(spec, seed=rng.seed)
    block = _draw_block(spec, rng.index, rng.index + 1, np.array([member_index]), stream_base=rng.stream_id)
    return block[0]


def run_scenario(spec: ScenarioSpec, workers: int = 1, chunk_size: int = 4096) -> tuple[SampleSet, DistributionSummary]:
    """Draw ``spec.n_samples`` queries and summarize them.

    Pooled scenarios pick a member uniformly per query. ``workers`` only
    changes how the index range is split, never the result.
    """
    bounds = [(s, min(s + chunk_size, spec.n_samples)) for s in range(0, spec.n_samples, chunk_size)]
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(lambda b: _draw_block(spec, *b), bounds))
    else:
        blocks = [_draw_block(spec, *b) for b in bounds]
    samples = SampleSet.concat(blocks, name=spec.name)
    return samples, summarize(samples)


def summarize(samples) -> DistributionSummary:
    """Mean and 5/25/50/75/95 percentiles (linear interpolation between order statistics).

    Accepts a ``SampleSet``, a sequence of ``QuerySample`` or raw energies.
    """
    if isinstance(samples, SampleSet):
        energy = samples.energy_wh
    else:
        rows = list(samples)
        energy = np.array([s.energy_wh if isinstance(s, QuerySample) else s for s in rows], dtype=float)
    if energy.size == 0:
        raise ValueError("cannot summarize an empty sample set")
    q = np.percentile(energy, [5, 25, 50, 75, 95], method="linear")
    # monotone by construction; guard against 1-ulp interpolation wobble
    q = np.maximum.accumulate(q)
    return DistributionSummary(int(energy.size), float(energy.mean()), *map(float, q))


def mix_regimes(parts: Sequence[tuple[SampleSet, float]], seed: int = 0, name: str = "mixed") -> SampleSet:
    """Pool sample sets: row ``j`` comes from part ``k`` with probability ``weight_k``.

    The part is chosen by the mixing stream at index ``j`` and row ``j`` of
    that part is taken, so each source draw is used at most once.
    """
    if not parts:
        raise ValueError("mix_regimes needs at least one part")
    weights = np.array([w for _, w in parts], dtype=float)
    if np.any(weights <= 0) or abs(weights.sum() - 1.0) > 1e-9:
        raise ValueError(f"weights must be positive and sum to 1, got {weights.tolist()}")
    if len(parts) == 1:
        return parts[0][0].take(slice(None))
    n = min(len(s) for s, _ in parts)
    choice = np.searchsorted(np.cumsum(weights), uniforms(RngState(seed, STREAM_MIX), n), side="right")
    choice = np.minimum(choice, len(parts) - 1)
    mixed = SampleSet.concat([s.take(slice(0, n)) for s, _ in parts], name=name)
    return mixed.take(choice * n + np.arange(n))


def log_histogram(energy, bins: int = 50, lower_pct: float = 0.1, upper_pct: float = 99.9):
    """Counts over log-spaced bins spanning the given percentiles of ``energy``.

    Returns ``(edges, counts)``; values outside the span are not counted.
    """
    energy = np.asarray(energy, dtype=float)
    lo, hi = np.percentile(energy, [lower_pct, upper_pct])
    if not lo > 0:
        lo = energy[energy > 0].min()
    if hi <= lo:
        hi = lo * (1 + 1e-9)
    edges = np.geomspace(lo, hi, bins + 1)
    counts, _ = np.histogram(energy, bins=edges)
    return edges, counts


def histogram_modes(counts, window: int = 3, min_prominence: float = 0.05) -> np.ndarray:
    """Bin indices of local maxima after a centered moving average.

    Peaks less prominent than ``min_prominence`` times the tallest smoothed
    bin are treated as sampling ripple.
    """
    counts = np.asarray(counts, dtype=float)
    smooth = np.convolve(counts, np.ones(window) / window, mode="same")
    padded = np.concatenate([[0.0], smooth, [0.0]])
    peaks, _ = find_peaks(padded, prominence=min_prominence * smooth.max())
    return peaks - 1


def histogram_csv(edges, counts) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("bin_lo_wh", "bin_hi_wh", "count"))
    for lo, hi, c in zip(edges[:-1], edges[1:], counts):
        writer.writerow((repr(float(lo)), repr(float(hi)), int(c)))
    return buf.getvalue()


def build_members(models: dict[str, TpsModel], names: Iterable[str], nodes: dict[str, NodeSpec] | None = None,
                  gpu_counts: dict[str, int] | None = None) -> tuple[Member, ...]:
    """Members for the named models; nodes default to the benchmark's GPU count."""
    nodes = nodes or {}
    gpu_counts = gpu_counts or {}
    out = []
    for name in names:
        if name not in models:
            raise KeyError(f"no throughput model for {name!r}; known: {sorted(models)}")
        node = nodes.get(name) or NodeSpec.for_gpus(gpu_counts.get(name, 8))
        out.append(Member(name, node, models[name]))
    return tuple(out)
