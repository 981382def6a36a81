"""Breach probabilities, layer losses and indifference premiums.

Per layer i the insurer's expected utility is

    U_i(P) = pi_i * E[u(P - L_i)] + (1 - pi_i) * u(P)

with the breach probability from a Gordon-Loeb type-1 function of the
objective score and the loss discounted by the practice score. The premium is
the P at which U_i(P) = u(0): actuarially fair under linear utility, loaded
under CARA.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Mapping, Sequence

from .errors import (
    CoverageConstraintError,
    Diagnostic,
    FormatError,
    ModelValidationError,
    NumericalError,
    UninsurableLayerError,
)
from .maturity import LayerAssessment, MaturityModelSpec, MuRecord, mu as compute_mu
from .money import from_cents, to_cents, to_money, weighted_cents_sum
from .org import Layer, OrgModel, errors_only, validate_model, zone_exposure

CARA_OVERFLOW = 700.0
BISECTION_MAX_ITER = 200


@dataclass(frozen=True)
class LayerEconomics:
    layer: Layer
    v: float
    alpha: float
    beta: float
    gamma: float
    lambda_c: float
    lambda_s: float
    kappa: float
    c_bar: float = 1.0
    s_bar: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "layer", Layer.parse(self.layer))
        if not 0.0 <= self.v <= 1.0:
            raise ValueError(f"v must lie in [0,1], got {self.v}")
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("alpha and beta must be > 0")
        for name in ("gamma", "lambda_c", "lambda_s", "kappa"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("c_bar", "s_bar"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0,1]")


@dataclass(frozen=True)
class UtilitySpec:
    kind: str = "linear"
    a: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("linear", "cara"):
            raise ValueError(f"unknown utility kind {self.kind!r}")
        if self.kind == "cara" and (self.a is None or not self.a > 0):
            raise ValueError("CARA utility needs a > 0")
        if self.kind == "linear" and self.a is not None:
            raise ValueError("linear utility takes no coefficient")

    @classmethod
    def linear(cls) -> "UtilitySpec":
        return cls("linear")

    @classmethod
    def cara(cls, a: float) -> "UtilitySpec":
        return cls("cara", float(a))

    @classmethod
    def parse(cls, text: str) -> "UtilitySpec":
        """Parse ``kind=linear`` or ``kind=cara,a=<real>``; the ``kind=`` prefix is optional."""
        fields: dict[str, str] = {}
        for i, part in enumerate(text.strip().split(",")):
            key, eq, value = part.partition("=")
            if not eq and i == 0:
                key, value = "kind", key
            elif not eq:
                raise FormatError(f"bad utility config {text!r}")
            fields[key.strip()] = value.strip()
        try:
            kind = fields.pop("kind")
            a = float(fields.pop("a")) if "a" in fields else None
        except (KeyError, ValueError):
            raise FormatError(f"bad utility config {text!r}") from None
        if fields:
            raise FormatError(f"unknown utility keys: {', '.join(fields)}")
        try:
            return cls(kind, a)
        except ValueError as exc:
            raise FormatError(str(exc)) from None

    def describe(self) -> str:
        return "linear" if self.kind == "linear" else f"cara(a={self.a:g})"


@dataclass(frozen=True)
class Scenario:
    """Degradation magnitudes for one scenario.

    Deltas are magnitudes (intended state minus realized state). Negative
    values model discounts and are rejected by strict loaders.
    """

    delta_c: float
    delta_s: float
    weight: float = 1.0

    def __post_init__(self) -> None:
        if not (-1.0 <= self.delta_c <= 1.0 and -1.0 <= self.delta_s <= 1.0):
            raise ValueError(f"deltas must lie in [-1,1], got ({self.delta_c}, {self.delta_s})")
        if not self.weight > 0:
            raise ValueError(f"scenario weight must be > 0, got {self.weight}")


def normalize_weights(scenarios: Sequence[Scenario]) -> tuple[Scenario, ...]:
    if not scenarios:
        raise ValueError("empty scenario set")
    total = math.fsum(s.weight for s in scenarios)
    return tuple(Scenario(s.delta_c, s.delta_s, s.weight / total) for s in scenarios)


# --- breach probability and losses -------------------------------------------


def gordon_loeb_sbf(z: float, v: float, alpha: float, beta: float) -> float:
    """Type-1 security breach function v / (alpha*z + 1)**beta."""
    if z < 0:
        raise ValueError(f"z must be >= 0, got {z}")
    return v / (alpha * z + 1.0) ** beta


def breach_probability(econ: LayerEconomics, mu: MuRecord) -> float:
    return gordon_loeb_sbf(mu.o, econ.v, econ.alpha, econ.beta)


def loss_discount(econ: LayerEconomics, p_bar: float) -> float:
    return (1.0 + p_bar) ** econ.gamma


def raw_loss(econ: LayerEconomics, p_bar: float, delta_c: float, delta_s: float) -> float:
    return (econ.lambda_c * delta_c + econ.lambda_s * delta_s) / loss_discount(econ, p_bar)


def layer_loss(econ: LayerEconomics, mu: MuRecord, scenario: Scenario) -> Decimal:
    """(lambda_c*dC + lambda_s*dS) / (1 + p_bar)**gamma, rounded to cents."""
    return to_money(raw_loss(econ, mu.p_bar, scenario.delta_c, scenario.delta_s))


def loss_cents(econ: LayerEconomics, mu: MuRecord, scenarios: Sequence[Scenario]) -> list[int]:
    """Per-scenario layer losses in integer cents."""
    return [to_cents(raw_loss(econ, mu.p_bar, s.delta_c, s.delta_s)) for s in scenarios]


def expected_loss(econ: LayerEconomics, mu: MuRecord, scenarios: Sequence[Scenario]) -> Decimal:
    """Weighted sum of the rounded per-scenario losses, rounded once at the end."""
    if not scenarios:
        raise ValueError("expected_loss needs at least one scenario")
    return weighted_cents_sum(loss_cents(econ, mu, scenarios), [s.weight for s in scenarios])


# --- utility ------------------------------------------------------------------


def utility_value(spec: UtilitySpec, x: float) -> float:
    if spec.kind == "linear":
        return float(x)
    a = spec.a
    ax = a * x
    if abs(ax) < 1e-8:
        return x - a * x * x / 2.0
    return -math.expm1(-ax) / a


def risk_aversion_check(spec: UtilitySpec, points: Sequence[float] = (-1000.0, 0.0, 1000.0)) -> float:
    """Max relative deviation of the finite-difference -u''/u' from ``a``.

    Test-suite helper for the CARA form.
    """
    if spec.kind != "cara":
        raise ValueError("risk aversion check applies only to CARA utility")
    a = spec.a
    h = min(1.0, 1e-2 / a)
    worst = 0.0
    for x in points:
        up, mid, down = (utility_value(spec, x + h), utility_value(spec, x), utility_value(spec, x - h))
        d1 = (up - down) / (2 * h)
        d2 = (up - 2 * mid + down) / (h * h)
        worst = max(worst, abs(-d2 / d1 - a) / a)
    return worst


def _expect(values: Sequence[float], weights: Sequence[float]) -> float:
    return math.fsum(v * w for v, w in zip(values, weights)) / math.fsum(weights)


def expected_utility(spec: UtilitySpec, pi: float, premium: float, losses: Sequence[float], weights: Sequence[float]) -> float:
    loss_side = _expect([utility_value(spec, premium - L) for L in losses], weights)
    return pi * loss_side + (1.0 - pi) * utility_value(spec, premium)


def insurer_utility(
    spec: UtilitySpec,
    pi: float,
    premium: float,
    scenarios: Sequence[Scenario],
    econ: LayerEconomics,
    mu: MuRecord,
) -> float:
    """One layer's expected utility at ``premium`` (losses in cents, as priced)."""
    if not 0.0 <= pi <= 1.0:
        raise ValueError(f"pi must lie in [0,1], got {pi}")
    losses = [c / 100 for c in loss_cents(econ, mu, scenarios)]
    return expected_utility(spec, pi, float(premium), losses, [s.weight for s in scenarios])


# --- premium solvers -----------------------------------------------------------


def bisect_premium(
    spec: UtilitySpec,
    pi: float,
    losses: Sequence[float],
    weights: Sequence[float],
    rel_tol: float = 1e-9,
    max_iter: int = BISECTION_MAX_ITER,
) -> float:
    """Solve expected_utility(P) = u(0) by bisection.

    The bracket starts at [0, pi*max(L)] and is widened (upward, or downward
    for negative losses) until the sign changes.
    """
    target = utility_value(spec, 0.0)

    def f(p: float) -> float:
        return expected_utility(spec, pi, p, losses, weights) - target

    lo, hi = 0.0, pi * max(losses)
    if hi <= lo:
        hi = 1.0
    iters = 0
    f_lo = f(lo)
    if f_lo == 0.0:
        return lo
    while f_lo > 0:
        lo = lo - max(1.0, abs(lo))
        f_lo = f(lo)
        iters += 1
        if iters > max_iter:
            raise NumericalError("could not bracket the premium from below")
    while f(hi) < 0:
        hi *= 2.0
        iters += 1
        if iters > max_iter:
            raise NumericalError("could not bracket the premium from above")

    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if f_mid == 0.0:
            return mid
        if f_mid < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rel_tol * max(abs(lo), abs(hi), 1e-300):
            return 0.5 * (lo + hi)
    raise NumericalError(f"bisection did not converge in {max_iter} iterations")


def indifference_premium(
    spec: UtilitySpec,
    pi: float,
    losses: Sequence[float],
    weights: Sequence[float],
    method: str = "closed",
) -> float:
    """Premium at which the insurer is indifferent to writing the layer.

    ``method="closed"`` uses pi*E[L] (linear) or log1p(pi*E[expm1(aL)])/a
    (CARA); ``method="bisection"`` solves numerically for either kind.
    """
    if not losses:
        raise ValueError("need at least one loss")
    if spec.kind == "cara" and spec.a * max(losses) > CARA_OVERFLOW:
        raise NumericalError(
            f"a*L = {spec.a * max(losses):.1f} exceeds {CARA_OVERFLOW:g}; rescale loss units or lower a"
        )
    if method == "bisection":
        return bisect_premium(spec, pi, losses, weights)
    if method != "closed":
        raise ValueError(f"unknown method {method!r}")
    if spec.kind == "linear":
        return pi * _expect(losses, weights)
    return math.log1p(pi * _expect([math.expm1(spec.a * L) for L in losses], weights)) / spec.a


@dataclass(frozen=True)
class LayerPrice:
    layer: Layer
    pi: float
    expected_loss: Decimal
    premium: Decimal
    rate: float | None
    limit_used: Decimal
    premium_value: float  # unrounded solver output
    warnings: tuple[Diagnostic, ...] = ()

    def to_dict(self) -> dict:
        return {
            "layer": int(self.layer),
            "pi": self.pi,
            "expected_loss": float(self.expected_loss),
            "premium": float(self.premium),
            "rate": self.rate,
            "limit_used": float(self.limit_used),
        }


def price_layer(
    econ: LayerEconomics,
    mu: MuRecord,
    scenarios: Sequence[Scenario],
    spec: UtilitySpec,
    method: str = "closed",
) -> LayerPrice:
    """Price one layer; the rate is premium / (kappa * m)."""
    if not scenarios:
        raise ValueError("price_layer needs at least one scenario")
    pi = breach_probability(econ, mu)
    cents = loss_cents(econ, mu, scenarios)
    losses = [c / 100 for c in cents]
    weights = [s.weight for s in scenarios]
    e_loss = weighted_cents_sum(cents, weights)
    premium = indifference_premium(spec, pi, losses, weights, method)
    limit = mu.m * econ.kappa
    notes: list[Diagnostic] = []
    if limit > 0:
        rate: float | None = premium / limit
    elif e_loss > 0:
        raise UninsurableLayerError(
            f"layer {int(econ.layer)}: effective limit m*kappa is 0 but expected loss is {e_loss}"
        )
    elif e_loss == 0:
        premium, rate = 0.0, 0.0
    else:
        rate = None
        notes.append(
            Diagnostic("warning", "rate-undefined", "effective limit is 0; rate undefined", f"layer {int(econ.layer)}")
        )
    return LayerPrice(
        layer=econ.layer,
        pi=pi,
        expected_loss=e_loss,
        premium=to_money(premium),
        rate=rate,
        limit_used=to_money(limit),
        premium_value=premium,
        warnings=tuple(notes),
    )


def check_coverage_constraint(econ: LayerEconomics, mu: MuRecord, strict: bool = False) -> list[Diagnostic]:
    """Flag lambda_c + lambda_s > m * kappa (boundary allowed)."""
    exposure = econ.lambda_c + econ.lambda_s
    limit = mu.m * econ.kappa
    if exposure <= limit:
        return []
    return [
        Diagnostic(
            "error" if strict else "warning",
            "coverage-constraint",
            f"lambda_c + lambda_s = {exposure:g} exceeds m*kappa = {limit:g}",
            f"layer {int(econ.layer)}",
        )
    ]


# --- full quote ----------------------------------------------------------------


@dataclass(frozen=True)
class Quote:
    layers: tuple[LayerPrice, ...]
    total_premium: Decimal
    utility: str
    warnings: tuple[Diagnostic, ...] = field(default=())

    def layer(self, layer: Layer | int) -> LayerPrice:
        layer = Layer.parse(layer)
        for lp in self.layers:
            if lp.layer == layer:
                return lp
        raise KeyError(layer)

    def to_dict(self) -> dict:
        return {
            "layers": [lp.to_dict() for lp in self.layers],
            "total_premium": float(self.total_premium),
            "utility": self.utility,
            "warnings": [w.to_dict() for w in self.warnings],
        }

    def to_text(self, with_warnings: bool = True) -> str:
        head = f"{'layer':<12}{'pi':>12}{'expected_loss':>16}{'premium':>14}{'rate':>12}{'limit_used':>14}"
        rows = [head, "-" * len(head)]
        for lp in self.layers:
            rate = "n/a" if lp.rate is None else f"{lp.rate:.7f}"
            rows.append(
                f"{lp.layer.title:<12}{lp.pi:>12.6f}{lp.expected_loss:>16}{lp.premium:>14}{rate:>12}{lp.limit_used:>14}"
            )
        rows.append("-" * len(head))
        rows.append(f"total premium ({self.utility}): {self.total_premium}")
        if with_warnings:
            rows.extend(str(w) for w in self.warnings)
        return "\n".join(rows) + "\n"


def quote_layers(
    economics: Mapping[Layer, LayerEconomics],
    mus: Mapping[Layer, MuRecord],
    scenarios: Mapping[Layer, Sequence[Scenario]],
    utility: UtilitySpec,
    *,
    strict: bool = False,
    method: str = "closed",
    extra_warnings: Sequence[Diagnostic] = (),
) -> Quote:
    """Price every layer in ``economics`` (ordered 1 -> 3) and total them."""
    layers = sorted(Layer.parse(k) for k in economics)
    if not layers:
        raise ValueError("no layers to price")
    prices: list[LayerPrice] = []
    notes: list[Diagnostic] = list(extra_warnings)
    for layer in layers:
        for name, table in (("assessment", mus), ("scenario set", scenarios)):
            if layer not in table:
                raise FormatError(f"layer {int(layer)} has economics but no {name}")
        econ, m = economics[layer], mus[layer]
        constraint = check_coverage_constraint(econ, m, strict)
        if strict and constraint:
            raise CoverageConstraintError(constraint)
        notes.extend(constraint)
        for code in m.warnings:
            notes.append(Diagnostic("warning", code, "maturity assessment", f"layer {int(layer)}"))
        lp = price_layer(econ, m, scenarios[layer], utility, method)
        notes.extend(lp.warnings)
        prices.append(lp)
    total = from_cents(sum(to_cents(float(lp.premium)) for lp in prices))
    return Quote(tuple(prices), total, utility.describe(), tuple(notes))


def quote(
    org: OrgModel,
    assessments: Mapping[Layer, LayerAssessment],
    spec: MaturityModelSpec,
    economics: Mapping[Layer, LayerEconomics],
    scenarios: Mapping[Layer, Sequence[Scenario]],
    utility: UtilitySpec,
    *,
    strict: bool = False,
    max_level: int | None = None,
    method: str = "closed",
) -> Quote:
    """Validate the organization, reduce each assessment and price all layers.

    Raises:
        ModelValidationError: the organization model has errors.
        CoverageConstraintError: strict mode and a layer breaks the constraint.
    """
    report = validate_model(org)
    errs = errors_only(report)
    if errs:
        raise ModelValidationError(errs)
    notes = [d for d in report if d.severity == "warning"]
    exposure = zone_exposure(org)
    for layer, econ in economics.items():
        layer = Layer.parse(layer)
        if econ.lambda_c > 0 and exposure[layer]["criticality"] == 0:
            notes.append(
                Diagnostic("warning", "no-critical-entities", "criticality loss priced but no critical entity", f"layer {int(layer)}")
            )
        if econ.lambda_s > 0 and exposure[layer]["sensitivity"] == 0:
            notes.append(
                Diagnostic("warning", "no-sensitive-entities", "sensitivity loss priced but no sensitive entity", f"layer {int(layer)}")
            )
    mus = {Layer.parse(k): compute_mu(a, spec, max_level) for k, a in assessments.items()}
    return quote_layers(
        {Layer.parse(k): v for k, v in economics.items()},
        mus,
        {Layer.parse(k): v for k, v in scenarios.items()},
        utility,
        strict=strict,
        method=method,
        extra_warnings=notes,
    )
