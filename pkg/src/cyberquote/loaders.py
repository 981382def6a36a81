"""Readers for the economics, scenario and utility configuration files."""

from __future__ import annotations

import csv
import io
from pathlib import Path

from .errors import FormatError
from .org import Layer
from .pricing import LayerEconomics, Scenario, UtilitySpec, normalize_weights
from .sim import DistributionBlock, parse_distribution_block

ECON_COLUMNS = ("layer", "v", "alpha", "beta", "gamma", "lambda_c", "lambda_s", "kappa")
ECON_OPTIONAL = ("c_bar", "s_bar")


def _rows(text: str) -> list[list[str]]:
    lines = [ln for ln in text.replace("\r\n", "\n").split("\n") if ln.strip() and not ln.lstrip().startswith("#")]
    return [[c.strip() for c in row] for row in csv.reader(io.StringIO("\n".join(lines)))]


def load_economics(text: str) -> dict[Layer, LayerEconomics]:
    """Parse rows ``layer,v,alpha,beta,gamma,lambda_c,lambda_s,kappa[,c_bar,s_bar]``."""
    rows = _rows(text)
    if not rows:
        raise FormatError("economics file is empty")
    header = [h.lower() for h in rows[0]]
    if tuple(header[:8]) != ECON_COLUMNS or tuple(header[8:]) not in ((), ECON_OPTIONAL):
        raise FormatError(f"economics header must be {','.join(ECON_COLUMNS + ECON_OPTIONAL)}")
    out: dict[Layer, LayerEconomics] = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise FormatError(f"economics row {lineno}: expected {len(header)} columns, got {len(row)}")
        try:
            values = dict(zip(header, row))
            layer = Layer.parse(values.pop("layer"))
            econ = LayerEconomics(layer=layer, **{k: float(v) for k, v in values.items()})
        except ValueError as exc:
            raise FormatError(f"economics row {lineno}: {exc}") from None
        if layer in out:
            raise FormatError(f"economics row {lineno}: layer {int(layer)} given twice")
        out[layer] = econ
    if not out:
        raise FormatError("economics file has no rows")
    return out


def load_scenarios(text: str, strict: bool = False) -> list[Scenario]:
    """Parse ``delta_c,delta_s,weight`` rows and normalize the weights.

    In strict mode negative deltas (discount scenarios) are rejected.
    """
    rows = _rows(text)
    if rows and [h.lower() for h in rows[0]] == ["delta_c", "delta_s", "weight"]:
        rows = rows[1:]
    if not rows:
        raise FormatError("scenario file has no rows")
    out = []
    for lineno, row in enumerate(rows, start=1):
        if len(row) != 3:
            raise FormatError(f"scenario row {lineno}: expected 3 columns, got {len(row)}")
        try:
            s = Scenario(float(row[0]), float(row[1]), float(row[2]))
        except ValueError as exc:
            raise FormatError(f"scenario row {lineno}: {exc}") from None
        if strict and (s.delta_c < 0 or s.delta_s < 0):
            raise FormatError(f"scenario row {lineno}: negative deltas are not allowed in strict mode")
        out.append(s)
    return list(normalize_weights(out))


def load_scenario_source(text: str, strict: bool = False) -> list[Scenario] | DistributionBlock:
    """A scenario file is either a CSV table or a one-line distribution block."""
    body = "\n".join(ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#"))
    if "dist_c" in body:
        return parse_distribution_block(body.replace("\n", ";"))
    return load_scenarios(text, strict)


def load_utility(text: str) -> UtilitySpec:
    """Utility config, e.g. ``kind=cara,a=1e-5``; newlines act as commas."""
    body = ",".join(ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#"))
    return UtilitySpec.parse(body)


def read_text(path: str | Path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc.strerror}") from None
