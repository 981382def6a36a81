"""Monte Carlo scenario generation, loss statistics and accumulation shocks.

Draw ``k`` of stream ``s`` is a pure function of ``(seed, s, k)``: it is the
k-th output block of a Philox-4x64-10 counter generator keyed by
``(seed, s)``. Word 0 of the block drives the criticality delta and word 1
the sensitivity delta. Chunks can therefore be evaluated in any order or on
any number of workers and still concatenate to the same draw vector.
"""

from __future__ import annotations

import math
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal
from typing import Mapping

import numpy as np
from scipy.special import betaincinv

from .errors import FormatError, UnknownPracticeError
from .maturity import LayerAssessment, MaturityModelSpec, MuRecord, PracticeStatus, mu as compute_mu
from .money import CENT, from_cents, to_money
from .org import Layer
from .pricing import LayerEconomics, Scenario, UtilitySpec, breach_probability, indifference_premium, loss_discount

GENERATOR_NAME = "numpy Philox-4x64-10, key=(seed, stream), counter=draw index"
SEED_ENV = "CYBERQUOTE_SEED"
CHUNK = 1 << 16
QUANTILES = (0.5, 0.9, 0.95, 0.99)
_U64 = (1 << 64) - 1


@dataclass(frozen=True)
class DistributionSpec:
    """A delta distribution on [0,1]: ``point(v)``, ``uniform(lo,hi)`` or ``beta(a,b)``."""

    kind: str
    params: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        k, p = self.kind, self.params
        arity = {"point": 1, "uniform": 2, "beta": 2}
        if k not in arity:
            raise FormatError(f"unknown distribution kind {k!r}")
        if len(p) != arity[k]:
            raise FormatError(f"{k} takes {arity[k]} parameter(s), got {len(p)}")
        if not all(math.isfinite(x) for x in p):
            raise FormatError(f"{k} parameters must be finite")
        if k == "point" and not -1.0 <= p[0] <= 1.0:
            raise FormatError(f"point value must lie in [-1,1], got {p[0]}")
        if k == "uniform" and not 0.0 <= p[0] <= p[1] <= 1.0:
            raise FormatError(f"uniform needs 0 <= lo <= hi <= 1, got {p}")
        if k == "beta" and not (p[0] > 0 and p[1] > 0):
            raise FormatError(f"beta needs a, b > 0, got {p}")

    @classmethod
    def point(cls, value: float) -> "DistributionSpec":
        return cls("point", (value,))

    @classmethod
    def uniform(cls, lo: float = 0.0, hi: float = 1.0) -> "DistributionSpec":
        return cls("uniform", (lo, hi))

    @classmethod
    def beta(cls, a: float, b: float) -> "DistributionSpec":
        return cls("beta", (a, b))

    @classmethod
    def parse(cls, text: str) -> "DistributionSpec":
        m = re.fullmatch(r"\s*([a-z]+)\s*\(([^()]*)\)\s*", text)
        if not m:
            raise FormatError(f"bad distribution {text!r}; expected e.g. uniform(0,1)")
        try:
            params = tuple(float(x) for x in m.group(2).split(","))
        except ValueError:
            raise FormatError(f"bad distribution parameters in {text!r}") from None
        return cls(m.group(1), params)

    def __str__(self) -> str:
        return f"{self.kind}({','.join(f'{p:g}' for p in self.params)})"

    def mean(self) -> float:
        if self.kind == "point":
            return self.params[0]
        if self.kind == "uniform":
            return 0.5 * (self.params[0] + self.params[1])
        a, b = self.params
        return a / (a + b)

    def transform(self, u: np.ndarray) -> np.ndarray:
        """Map uniforms on [0,1) to draws by inversion."""
        if self.kind == "point":
            return np.full(u.shape, self.params[0])
        if self.kind == "uniform":
            lo, hi = self.params
            return lo + (hi - lo) * u
        return betaincinv(self.params[0], self.params[1], u)


@dataclass(frozen=True)
class SimConfig:
    n: int
    seed: int

    def __post_init__(self) -> None:
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        if not 0 <= self.seed <= _U64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")


def default_seed(flag: int | None = None, fallback: int = 0) -> int:
    """Seed precedence: explicit flag, then $CYBERQUOTE_SEED, then ``fallback``."""
    if flag is not None:
        return flag
    env = os.environ.get(SEED_ENV)
    if env is None or not env.strip():
        return fallback
    try:
        return int(env)
    except ValueError:
        raise FormatError(f"{SEED_ENV} must be an integer, got {env!r}") from None


@dataclass(frozen=True)
class DistributionBlock:
    dist_c: DistributionSpec
    dist_s: DistributionSpec
    n: int
    seed: int | None = None


def parse_distribution_block(text: str) -> DistributionBlock:
    """Parse ``dist_c=<spec>;dist_s=<spec>;n=<int>;seed=<int>`` (seed optional)."""
    fields: dict[str, str] = {}
    for part in text.strip().split(";"):
        if not part.strip():
            continue
        key, eq, value = part.partition("=")
        if not eq:
            raise FormatError(f"bad distribution block entry {part!r}")
        fields[key.strip()] = value.strip()
    unknown = set(fields) - {"dist_c", "dist_s", "n", "seed"}
    if unknown:
        raise FormatError(f"unknown distribution block keys: {', '.join(sorted(unknown))}")
    for key in ("dist_c", "dist_s", "n"):
        if key not in fields:
            raise FormatError(f"distribution block is missing {key}")
    try:
        n = int(fields["n"])
        seed = int(fields["seed"]) if "seed" in fields else None
    except ValueError as exc:
        raise FormatError(f"bad distribution block: {exc}") from None
    if n < 1:
        raise FormatError("n must be >= 1")
    if seed is not None and not 0 <= seed <= _U64:
        raise FormatError("seed must be a 64-bit unsigned integer")
    return DistributionBlock(DistributionSpec.parse(fields["dist_c"]), DistributionSpec.parse(fields["dist_s"]), n, seed)


# --- sampling -------------------------------------------------------------------


def _uniform_words(seed: int, stream: int, start: int, count: int) -> tuple[np.ndarray, np.ndarray]:
    key = np.array([seed, stream], dtype=np.uint64)
    gen = np.random.Philox(key=key, counter=np.array([start, 0, 0, 0], dtype=np.uint64))
    raw = gen.random_raw(4 * count).reshape(count, 4)
    scale = 2.0**-53
    return (raw[:, 0] >> np.uint64(11)) * scale, (raw[:, 1] >> np.uint64(11)) * scale


def _chunks(n: int) -> list[tuple[int, int]]:
    return [(s, min(CHUNK, n - s)) for s in range(0, n, CHUNK)]


def _map_chunks(fn, n: int, workers: int) -> list:
    spans = _chunks(n)
    if workers <= 1 or len(spans) == 1:
        return [fn(s, c) for s, c in spans]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda sc: fn(*sc), spans))  # map preserves index order


def sample_delta_arrays(
    dist_c: DistributionSpec,
    dist_s: DistributionSpec,
    config: SimConfig,
    stream: int = 0,
    workers: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Criticality and sensitivity deltas for draws 0..n-1 of ``stream``."""

    def chunk(start: int, count: int):
        u_c, u_s = _uniform_words(config.seed, stream, start, count)
        return dist_c.transform(u_c), dist_s.transform(u_s)

    parts = _map_chunks(chunk, config.n, workers)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def sample_deltas(dist_c: DistributionSpec, dist_s: DistributionSpec, config: SimConfig, stream: int = 0) -> list[Scenario]:
    """``n`` equally weighted scenarios."""
    dc, ds = sample_delta_arrays(dist_c, dist_s, config, stream)
    w = 1.0 / config.n
    return [Scenario(float(c), float(s), w) for c, s in zip(dc, ds)]


def loss_cents(
    econ: LayerEconomics,
    mu: MuRecord,
    dist_c: DistributionSpec,
    dist_s: DistributionSpec,
    config: SimConfig,
    stream: int = 0,
    workers: int = 1,
) -> np.ndarray:
    """Per-draw layer loss in integer cents (same rounding as ``layer_loss``)."""
    disc = loss_discount(econ, mu.p_bar)

    def chunk(start: int, count: int):
        u_c, u_s = _uniform_words(config.seed, stream, start, count)
        raw = (econ.lambda_c * dist_c.transform(u_c) + econ.lambda_s * dist_s.transform(u_s)) / disc
        return np.rint(raw * 100.0).astype(np.int64)

    return np.concatenate(_map_chunks(chunk, config.n, workers))


@dataclass(frozen=True)
class SimResult:
    mean: Decimal
    sd: Decimal
    quantiles: Mapping[float, Decimal]
    n: int
    seed: int
    generator: str = GENERATOR_NAME

    def to_dict(self) -> dict:
        return {
            "mean": float(self.mean),
            "sd": float(self.sd),
            "quantiles": {f"{q:g}": float(v) for q, v in self.quantiles.items()},
            "n": self.n,
            "seed": self.seed,
            "generator": self.generator,
        }

    def to_text(self) -> str:
        rows = [f"n: {self.n}", f"seed: {self.seed}", f"generator: {self.generator}", f"mean: {self.mean}", f"sd: {self.sd}"]
        rows += [f"q{q:g}: {v}" for q, v in self.quantiles.items()]
        return "\n".join(rows) + "\n"


def summarize(cents: np.ndarray, seed: int) -> SimResult:
    """Exact mean, population sd and nearest-rank quantiles of integer-cent draws."""
    n = int(cents.size)
    if n == 0:
        raise ValueError("no draws to summarize")
    total = int(cents.sum(dtype=np.int64))  # exact: |total| stays far below 2**63
    mean = (Decimal(total) / Decimal(n)).scaleb(-2).quantize(CENT, rounding=ROUND_HALF_EVEN)
    sd = to_money(float(np.std(cents.astype(np.float64))) / 100.0)
    ordered = np.sort(cents, kind="stable")
    quantiles = {q: from_cents(int(ordered[max(math.ceil(q * n), 1) - 1])) for q in QUANTILES}
    return SimResult(mean, sd, quantiles, n, seed)


def simulate_losses(
    econ: LayerEconomics,
    mu: MuRecord,
    dist_c: DistributionSpec,
    dist_s: DistributionSpec,
    config: SimConfig,
    stream: int = 0,
    workers: int = 1,
) -> SimResult:
    """Loss statistics over ``config.n`` draws, conditional on a breach."""
    return summarize(loss_cents(econ, mu, dist_c, dist_s, config, stream, workers), config.seed)


def mc_price_layer(
    econ: LayerEconomics,
    mu: MuRecord,
    dist_c: DistributionSpec,
    dist_s: DistributionSpec,
    config: SimConfig,
    utility: UtilitySpec,
    stream: int = 0,
    workers: int = 1,
) -> Decimal:
    """Indifference premium against the empirical loss distribution.

    Raises:
        NumericalError: for CARA when a*L exceeds the overflow guard.
    """
    cents = loss_cents(econ, mu, dist_c, dist_s, config, stream, workers)
    values, counts = np.unique(cents, return_counts=True)
    losses = [int(v) / 100 for v in values]
    weights = [int(c) / config.n for c in counts]
    pi = breach_probability(econ, mu)
    return to_money(indifference_premium(utility, pi, losses, weights))


# --- portfolio accumulation -----------------------------------------------------


@dataclass(frozen=True)
class PortfolioMember:
    name: str
    spec: MaturityModelSpec
    assessments: Mapping[Layer, LayerAssessment]
    economics: Mapping[Layer, LayerEconomics]
    distributions: Mapping[Layer, tuple[DistributionSpec, DistributionSpec]]

    def layers(self) -> list[Layer]:
        return sorted(Layer.parse(k) for k in self.economics)


@dataclass(frozen=True)
class PortfolioSpec:
    members: tuple[PortfolioMember, ...]
    shared_practices: Mapping[str, frozenset[int]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "members", tuple(self.members))
        object.__setattr__(self, "shared_practices", {k: frozenset(v) for k, v in self.shared_practices.items()})
        for pid, idx in self.shared_practices.items():
            bad = [i for i in idx if not 0 <= i < len(self.members)]
            if bad:
                raise ValueError(f"practice {pid!r} lists invalid member indices {bad}")


@dataclass(frozen=True)
class AccumulationResult:
    baseline: SimResult
    shocked: SimResult
    affected_members: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "baseline": self.baseline.to_dict(),
            "shocked": self.shocked.to_dict(),
            "affected_members": list(self.affected_members),
        }


def member_stream(member_index: int, layer: Layer) -> int:
    return member_index * 3 + (int(layer) - 1)


def _portfolio_cents(members, assessments_for, config: SimConfig, workers: int) -> np.ndarray:
    total = np.zeros(config.n, dtype=np.int64)
    for idx, member in enumerate(members):
        for layer in member.layers():
            assessment = assessments_for(idx, member, layer)
            m = compute_mu(assessment, member.spec)
            dist_c, dist_s = member.distributions[layer]
            total += loss_cents(member.economics[layer], m, dist_c, dist_s, config, member_stream(idx, layer), workers)
    return total


def portfolio_accumulation(
    portfolio: PortfolioSpec,
    shocked_practice: str,
    config: SimConfig,
    workers: int = 1,
) -> AccumulationResult:
    """Summed member losses per shared incident, before and after a practice shock.

    Every draw is one incident hitting all members at once; each member-layer
    has its own substream. The shock marks ``shocked_practice`` unmet in every
    layer assessment of each member that shares it, recomputes the practice
    score and reruns with the same seed.

    Raises:
        UnknownPracticeError: the practice is not listed in ``shared_practices``.
    """
    if shocked_practice not in portfolio.shared_practices:
        raise UnknownPracticeError(shocked_practice)
    sharing = portfolio.shared_practices[shocked_practice]

    def baseline(idx, member, layer):
        return member.assessments[layer]

    def shocked(idx, member, layer):
        a = member.assessments[layer]
        return a.with_status(shocked_practice, PracticeStatus.NOT_MET) if idx in sharing else a

    base = _portfolio_cents(portfolio.members, baseline, config, workers)
    shock = _portfolio_cents(portfolio.members, shocked, config, workers)
    affected = tuple(portfolio.members[i].name for i in sorted(sharing))
    return AccumulationResult(summarize(base, config.seed), summarize(shock, config.seed), affected)
