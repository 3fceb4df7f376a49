"""Quantile-parameterized samplers on a counter-based random stream.

Every variate is addressed by ``(seed, stream_id, index)``: the value at a
given coordinate never depends on how many other draws were made, so a
sample set can be split across any number of workers and still come out
bit-identical.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from numpy.random import Philox
from scipy.special import ndtr, ndtri

# Standard-normal 95th percentile.
Z95 = float(ndtri(0.95))

_MASK64 = (1 << 64) - 1
_OUTPUTS_PER_COUNTER = 4  # Philox4x64 emits four words per counter step


@dataclass(frozen=True)
class RngState:
    """Coordinates of a draw: ``index`` is the first draw position on the stream."""

    seed: int
    stream_id: int = 0
    index: int = 0

    def __post_init__(self):
        if self.stream_id < 0 or self.index < 0:
            raise ValueError("stream_id and index must be non-negative")

    def at(self, index: int) -> "RngState":
        return replace(self, index=index)

    def stream(self, stream_id: int) -> "RngState":
        return replace(self, stream_id=stream_id)


def random_words(rng: RngState, n: int) -> np.ndarray:
    """Raw 64-bit words at draw indices ``rng.index .. rng.index + n - 1``."""
    start = rng.index
    bit_gen = Philox(
        key=[rng.seed & _MASK64, rng.stream_id & _MASK64],
        counter=[start // _OUTPUTS_PER_COUNTER, 0, 0, 0],
    )
    skip = start % _OUTPUTS_PER_COUNTER
    return bit_gen.random_raw(skip + n)[skip:]


def uniforms(rng: RngState, n: int) -> np.ndarray:
    """Uniform variates strictly inside (0, 1), 53-bit resolution."""
    words = random_words(rng, n)
    return ((words >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def standard_normals(rng: RngState, n: int) -> np.ndarray:
    return ndtri(uniforms(rng, n))


@dataclass(frozen=True)
class LogNormalParams:
    mu: float
    sigma: float

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")

    @property
    def median(self) -> float:
        return math.exp(self.mu)

    @property
    def mean(self) -> float:
        return math.exp(self.mu + 0.5 * self.sigma**2)

    def quantile(self, p):
        return np.exp(self.mu + self.sigma * ndtri(p))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.sigma == 0:
            return (x >= self.median).astype(float)
        return ndtr((np.log(x) - self.mu) / self.sigma)

    def shifted(self, factor: float) -> "LogNormalParams":
        """Distribution of ``factor * X``."""
        return LogNormalParams(self.mu + math.log(factor), self.sigma)


@dataclass(frozen=True)
class ExponentialParams:
    rate: float

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError(f"rate must be > 0, got {self.rate}")

    @property
    def median(self) -> float:
        return math.log(2) / self.rate

    def quantile(self, p):
        return -np.log1p(-np.asarray(p, dtype=float)) / self.rate


def lognormal_from_quantiles(p5: float, p95: float) -> LogNormalParams:
    """Log-normal whose 5th and 95th percentiles are ``p5`` and ``p95``."""
    if not p5 > 0:
        raise ValueError(f"p5 must be > 0, got {p5}")
    if p95 < p5:
        raise ValueError(f"p95 ({p95}) must be >= p5 ({p5})")
    lo, hi = math.log(p5), math.log(p95)
    return LogNormalParams(mu=(lo + hi) / 2, sigma=(hi - lo) / (2 * Z95))


def exponential_from_median(median: float) -> ExponentialParams:
    if not median > 0:
        raise ValueError(f"median must be > 0, got {median}")
    return ExponentialParams(rate=math.log(2) / median)


def lognormal_from_uniforms(params: LogNormalParams, u: np.ndarray, upper: float | None = None,
                            lower: float | None = None) -> np.ndarray:
    """Inverse-CDF transform, optionally truncated to ``[lower, upper]``.

    Truncation rescales ``u`` onto ``(F(lower), F(upper))``, which has the
    same law as rejecting and redrawing out-of-range values.
    """
    u = np.asarray(u, dtype=float)
    if params.sigma == 0:
        if (upper is not None and params.median > upper) or (lower is not None and params.median < lower):
            raise ValueError(f"point mass {params.median} lies outside the truncation bounds")
        return np.full(u.shape, params.median)
    f_lo = float(params.cdf(lower)) if lower is not None else 0.0
    f_hi = float(params.cdf(upper)) if upper is not None else 1.0
    if not f_hi > f_lo:
        raise ValueError("truncation bounds leave no probability mass")
    if lower is None and upper is None:
        return np.exp(params.mu + params.sigma * ndtri(u))
    values = np.exp(params.mu + params.sigma * ndtri(f_lo + u * (f_hi - f_lo)))
    # the transform can land one ulp outside a bound
    return np.clip(values, lower if lower is not None else 0.0, upper if upper is not None else np.inf)


def sample_lognormal(params: LogNormalParams, rng: RngState, size: int | None = None,
                     upper: float | None = None, lower: float | None = None):
    """Draw at ``rng``'s coordinates; a scalar when ``size`` is None."""
    values = lognormal_from_uniforms(params, uniforms(rng, 1 if size is None else size), upper, lower)
    return float(values[0]) if size is None else values


def sample_exponential(params: ExponentialParams, rng: RngState, size: int | None = None):
    values = params.quantile(uniforms(rng, 1 if size is None else size))
    return float(values[0]) if size is None else values
