"""Security maturity models, per-layer assessments, and the reduction to a MuRecord.

A maturity model is a list of practices, each in a domain and at a level. An
assessment marks practices met (1), not met (-1) or not relevant (0), weights
domains, scores objectives, and may pin the maturity scalar directly.
"""

from __future__ import annotations

import csv
import io
import math
import statistics
import warnings
from dataclasses import dataclass, field, replace
from enum import IntEnum
from pathlib import Path
from typing import Mapping

from .errors import FormatError
from .org import Layer


class AssessmentWarning(UserWarning):
    """Non-fatal assessment finding (e.g. no relevant practices)."""


class PracticeStatus(IntEnum):
    NOT_MET = -1
    NOT_RELEVANT = 0
    MET = 1


@dataclass(frozen=True)
class Domain:
    code: str
    name: str


@dataclass(frozen=True)
class Practice:
    id: str
    domain_code: str
    level: int
    description: str = ""


@dataclass(frozen=True)
class MaturityModelSpec:
    name: str
    num_levels: int
    domains: tuple[Domain, ...]
    practices: tuple[Practice, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "domains", tuple(self.domains))
        object.__setattr__(self, "practices", tuple(self.practices))
        if self.num_levels < 1:
            raise FormatError(f"num_levels must be >= 1, got {self.num_levels}")
        codes = [d.code for d in self.domains]
        if len(set(codes)) != len(codes):
            raise FormatError("duplicate domain code")
        seen: set[str] = set()
        for p in self.practices:
            if p.id in seen:
                raise FormatError(f"duplicate practice id {p.id!r}")
            seen.add(p.id)
            if p.domain_code not in codes:
                raise FormatError(f"practice {p.id!r} references unknown domain {p.domain_code!r}")
            if not 1 <= p.level <= self.num_levels:
                raise FormatError(f"practice {p.id!r} level {p.level} outside [1, {self.num_levels}]")

    @property
    def domain_codes(self) -> tuple[str, ...]:
        return tuple(d.code for d in self.domains)

    def practice(self, practice_id: str) -> Practice:
        for p in self.practices:
            if p.id == practice_id:
                return p
        raise KeyError(practice_id)

    def count(self, level: int | None = None, domain: str | None = None) -> int:
        return sum(
            (level is None or p.level == level) and (domain is None or p.domain_code == domain)
            for p in self.practices
        )


@dataclass(frozen=True)
class LayerAssessment:
    """One layer's assessment against a maturity model.

    Practices absent from ``practice_status`` count as not met. Domains absent
    from ``domain_weights`` get weight 1.
    """

    layer: Layer
    practice_status: Mapping[str, PracticeStatus] = field(default_factory=dict)
    domain_weights: Mapping[str, float] = field(default_factory=dict)
    objectives: tuple[tuple[str, float], ...] = ()
    achieved_level: int | None = None
    maturity_override: float | None = None
    role: str = "underwriter"
    model_path: str | None = None
    objective_domain_matrix: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "layer", Layer.parse(self.layer))
        object.__setattr__(
            self, "practice_status", {k: PracticeStatus(v) for k, v in self.practice_status.items()}
        )
        object.__setattr__(self, "domain_weights", {k: float(v) for k, v in self.domain_weights.items()})
        object.__setattr__(self, "objectives", tuple((str(k), float(v)) for k, v in self.objectives))
        for code, w in self.domain_weights.items():
            if not 0.0 <= w <= 1.0:
                raise FormatError(f"domain weight for {code!r} outside [0,1]: {w}")
        for label, s in self.objectives:
            if not 0.0 <= s <= 1.0:
                raise FormatError(f"objective score for {label!r} outside [0,1]: {s}")
        if self.maturity_override is not None and not 0.0 <= self.maturity_override <= 1.0:
            raise FormatError(f"maturity_override outside [0,1]: {self.maturity_override}")

    @property
    def objective_scores(self) -> list[float]:
        return [s for _, s in self.objectives]

    def status(self, practice_id: str) -> PracticeStatus:
        return self.practice_status.get(practice_id, PracticeStatus.NOT_MET)

    def with_status(self, practice_id: str, status: PracticeStatus) -> "LayerAssessment":
        updated = dict(self.practice_status)
        updated[practice_id] = PracticeStatus(status)
        return replace(self, practice_status=updated)


@dataclass(frozen=True)
class MuRecord:
    layer: Layer
    p_bar: float
    o: float
    m: float
    domain_coverage: Mapping[str, float] = field(default_factory=dict)
    warnings: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "layer", Layer.parse(self.layer))
        for name in ("p_bar", "o", "m"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"MuRecord.{name} outside [0,1]: {v}")

    def to_dict(self) -> dict:
        return {
            "layer": int(self.layer),
            "p_bar": self.p_bar,
            "o": self.o,
            "m": self.m,
            "domain_coverage": dict(self.domain_coverage),
            "warnings": list(self.warnings),
        }


def check_binding(assessment: LayerAssessment, spec: MaturityModelSpec) -> None:
    """Raise FormatError if the assessment references ids the model lacks."""
    ids = {p.id for p in spec.practices}
    unknown = sorted(set(assessment.practice_status) - ids)
    if unknown:
        raise FormatError(f"assessment references unknown practice(s): {', '.join(unknown)}")
    unknown = sorted(set(assessment.domain_weights) - set(spec.domain_codes))
    if unknown:
        raise FormatError(f"assessment references unknown domain(s): {', '.join(unknown)}")
    if assessment.achieved_level is not None and not 0 <= assessment.achieved_level <= spec.num_levels:
        raise FormatError(f"achieved_level {assessment.achieved_level} outside [0, {spec.num_levels}]")


def _relevant(assessment: LayerAssessment, spec: MaturityModelSpec, max_level: int):
    return [
        p for p in spec.practices
        if p.level <= max_level and assessment.status(p.id) != PracticeStatus.NOT_RELEVANT
    ]


def _practice_score(assessment, spec, max_level) -> tuple[float, list[str]]:
    relevant = _relevant(assessment, spec, max_level)
    # fsum keeps the score independent of declaration order
    weights = [assessment.domain_weights.get(p.domain_code, 1.0) for p in relevant]
    den = math.fsum(weights)
    num = math.fsum(w for w, p in zip(weights, relevant) if assessment.status(p.id) == PracticeStatus.MET)
    if not relevant:
        return 0.0, ["no-relevant-practices"]
    if den == 0.0:
        return 0.0, ["zero-weight-practices"]
    return num / den, []


def _resolve_max_level(spec: MaturityModelSpec, max_level: int | None) -> int:
    if max_level is None:
        return spec.num_levels
    if not 1 <= max_level <= spec.num_levels:
        raise ValueError(f"max_level {max_level} outside [1, {spec.num_levels}]")
    return max_level


def _warn(codes: list[str]) -> None:
    for c in codes:
        warnings.warn(c, AssessmentWarning, stacklevel=3)


def practice_score(assessment: LayerAssessment, spec: MaturityModelSpec, max_level: int | None = None) -> float:
    """Domain-weighted fraction of relevant practices that are met.

    Only practices at or below ``max_level`` with a status other than "not
    relevant" count. Unmet practices add their weight to the denominator
    only, so the score stays in [0, 1].
    """
    check_binding(assessment, spec)
    value, codes = _practice_score(assessment, spec, _resolve_max_level(spec, max_level))
    _warn(codes)
    return value


def _objective_score(assessment: LayerAssessment) -> tuple[float, list[str]]:
    scores = assessment.objective_scores
    if not scores:
        return 0.0, ["no-objectives"]
    return statistics.fmean(scores), []


def objective_score(assessment: LayerAssessment) -> float:
    value, codes = _objective_score(assessment)
    _warn(codes)
    return value


def normalize_maturity(achieved_level: int, num_levels: int) -> float:
    if num_levels < 1 or not 0 <= achieved_level <= num_levels:
        raise ValueError(f"need 0 <= achieved_level <= num_levels >= 1, got ({achieved_level}, {num_levels})")
    return achieved_level / num_levels


def _level_achieved(assessment, spec) -> tuple[int, list[str]]:
    codes: list[str] = []
    if not _relevant(assessment, spec, spec.num_levels):
        codes.append("no-relevant-practices")
    achieved = 0
    for level in range(1, spec.num_levels + 1):
        at_level = [p for p in spec.practices if p.level == level]
        if any(assessment.status(p.id) == PracticeStatus.NOT_MET for p in at_level):
            break
        if not any(assessment.status(p.id) == PracticeStatus.MET for p in at_level):
            codes.append(f"vacuous-level-{level}")
        achieved = level
    return achieved, codes


def level_achieved(assessment: LayerAssessment, spec: MaturityModelSpec) -> int:
    """Highest level L such that no practice at any level <= L is unmet."""
    check_binding(assessment, spec)
    value, codes = _level_achieved(assessment, spec)
    _warn(codes)
    return value


def domain_coverage(assessment: LayerAssessment, spec: MaturityModelSpec, max_level: int | None = None) -> dict[str, float]:
    """Per-domain fraction of relevant practices met; 1.0 where none are relevant."""
    max_level = _resolve_max_level(spec, max_level)
    out: dict[str, float] = {}
    for code in spec.domain_codes:
        rel = [p for p in _relevant(assessment, spec, max_level) if p.domain_code == code]
        met = sum(assessment.status(p.id) == PracticeStatus.MET for p in rel)
        out[code] = met / len(rel) if rel else 1.0
    return out


def mu(assessment: LayerAssessment, spec: MaturityModelSpec, max_level: int | None = None) -> MuRecord:
    """Reduce an assessment to the scalars consumed by pricing.

    ``m`` comes from ``maturity_override`` when set, else from a declared
    ``achieved_level``, else from :func:`level_achieved`.
    """
    check_binding(assessment, spec)
    max_level = _resolve_max_level(spec, max_level)
    p_bar, w1 = _practice_score(assessment, spec, max_level)
    o, w2 = _objective_score(assessment)
    if assessment.maturity_override is not None:
        m, w3 = assessment.maturity_override, []
    elif assessment.achieved_level is not None:
        m, w3 = normalize_maturity(assessment.achieved_level, spec.num_levels), []
    else:
        level, w3 = _level_achieved(assessment, spec)
        m = normalize_maturity(level, spec.num_levels)
    codes = list(dict.fromkeys(w1 + w2 + w3))
    return MuRecord(
        layer=assessment.layer,
        p_bar=p_bar,
        o=o,
        m=m,
        domain_coverage=domain_coverage(assessment, spec, max_level),
        warnings=tuple(codes),
    )


# --- file formats -----------------------------------------------------------


def _data_lines(text: str) -> tuple[list[str], list[str]]:
    """Split text into (directive lines starting with '#', other non-blank lines)."""
    directives, rows = [], []
    for raw in text.replace("\r\n", "\n").split("\n"):
        line = raw.strip()
        if not line:
            continue
        (directives if line.startswith("#") else rows).append(line)
    return directives, rows


def load_maturity_model(csv_text: str, name: str | None = None) -> MaturityModelSpec:
    """Parse a maturity model CSV (header ``id,domain,level,description``).

    Optional directive lines before or among rows::

        #name CMMC 2.0
        #levels 3
        #domain AC,Access Control

    Without ``#domain`` lines the domains are inferred from the rows; with
    them, a row naming an undeclared domain is an error. Without ``#levels``
    the number of levels is the highest level present.
    """
    directives, rows = _data_lines(csv_text)
    model_name = name or ""
    num_levels: int | None = None
    domains: list[Domain] = []
    for d in directives:
        key, _, rest = d[1:].partition(" ")
        rest = rest.strip()
        if key == "name" and name is None:
            model_name = rest
        elif key == "levels":
            try:
                num_levels = int(rest)
            except ValueError:
                raise FormatError(f"#levels expects an integer, got {rest!r}") from None
        elif key == "domain":
            parts = next(csv.reader([rest]))
            if len(parts) != 2:
                raise FormatError(f"#domain expects 'CODE,Name', got {rest!r}")
            domains.append(Domain(parts[0].strip(), parts[1].strip()))

    if not rows:
        raise FormatError("maturity model has no header row")
    reader = csv.reader(io.StringIO("\n".join(rows)))
    header = [h.strip().lower() for h in next(reader)]
    if header != ["id", "domain", "level", "description"]:
        raise FormatError(f"expected header id,domain,level,description, got {','.join(header)}")

    practices: list[Practice] = []
    declared = {d.code for d in domains}
    inferred: list[str] = []
    for lineno, row in enumerate(reader, start=2):
        if len(row) != 4:
            raise FormatError(f"row {lineno}: expected 4 columns, got {len(row)}")
        pid, dom, level, desc = (c.strip() for c in row)
        try:
            lvl = int(level)
        except ValueError:
            raise FormatError(f"row {lineno}: level {level!r} is not an integer") from None
        if domains and dom not in declared:
            raise FormatError(f"row {lineno}: unknown domain {dom!r}")
        if not domains and dom not in inferred:
            inferred.append(dom)
        practices.append(Practice(pid, dom, lvl, desc))

    if not domains:
        domains = [Domain(c, c) for c in inferred]
    if num_levels is None:
        num_levels = max((p.level for p in practices), default=1)
    return MaturityModelSpec(model_name, num_levels, tuple(domains), tuple(practices))


@dataclass(frozen=True)
class ObjectiveDomainMatrix:
    """Objective-to-domain relevance cells, each in [0,1]."""

    objectives: tuple[str, ...]
    cells: Mapping[str, Mapping[str, float]]  # domain -> objective -> cell

    def cell(self, domain: str, objective: str) -> float:
        return self.cells.get(domain, {}).get(objective, 0.0)


def load_objective_domain_matrix(csv_text: str) -> ObjectiveDomainMatrix:
    _, rows = _data_lines(csv_text)
    reader = csv.reader(io.StringIO("\n".join(rows)))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise FormatError("empty domain-objective matrix") from None
    if not header or header[0].lower() != "domain":
        raise FormatError("domain-objective matrix must start with a 'Domain' column")
    objectives = tuple(header[1:])
    cells: dict[str, dict[str, float]] = {}
    for lineno, row in enumerate(reader, start=2):
        if len(row) != len(header):
            raise FormatError(f"row {lineno}: expected {len(header)} columns, got {len(row)}")
        try:
            values = [float(c) for c in row[1:]]
        except ValueError as exc:
            raise FormatError(f"row {lineno}: {exc}") from None
        if any(not 0.0 <= v <= 1.0 for v in values):
            raise FormatError(f"row {lineno}: cells must lie in [0,1]")
        cells[row[0].strip()] = dict(zip(objectives, values))
    return ObjectiveDomainMatrix(objectives, cells)


def objective_breakdown(
    assessment: LayerAssessment,
    spec: MaturityModelSpec,
    matrix: ObjectiveDomainMatrix,
    max_level: int | None = None,
) -> dict[str, float | None]:
    """Practice score per objective, with domain weights gated by matrix cells.

    An objective whose gated weights are all zero maps to ``None``.
    """
    check_binding(assessment, spec)
    relevant = _relevant(assessment, spec, _resolve_max_level(spec, max_level))
    out: dict[str, float | None] = {}
    for obj in matrix.objectives:
        weights = [
            assessment.domain_weights.get(p.domain_code, 1.0) * matrix.cell(p.domain_code, obj) for p in relevant
        ]
        den = math.fsum(weights)
        num = math.fsum(w for w, p in zip(weights, relevant) if assessment.status(p.id) == PracticeStatus.MET)
        out[obj] = num / den if den > 0 else None
    return out


_SECTIONS = {
    "practice_status": ("id", "value"),
    "domain_weights": ("domain", "weight"),
    "objectives": ("label", "score"),
}


def load_assessment(text: str) -> LayerAssessment:
    """Parse an assessment file.

    Layout: ``key=value`` header lines (``layer``, ``role``, ``model``,
    ``maturity_override``, ``achieved_level``, ``objective_domain_matrix``),
    then ``[practice_status]``, ``[domain_weights]`` and ``[objectives]``
    sections of two-column CSV rows. A section's column-name row is optional.
    ``#`` lines are comments.
    """
    meta: dict[str, str] = {}
    sections: dict[str, list[list[str]]] = {k: [] for k in _SECTIONS}
    current: str | None = None
    for lineno, raw in enumerate(text.replace("\r\n", "\n").split("\n"), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if current not in _SECTIONS:
                raise FormatError(f"line {lineno}: unknown section [{current}]")
            continue
        if current is None:
            key, eq, value = line.partition("=")
            if not eq:
                raise FormatError(f"line {lineno}: expected key=value before the first section")
            meta[key.strip()] = value.strip()
            continue
        row = [c.strip() for c in next(csv.reader([line]))]
        if len(row) != 2:
            raise FormatError(f"line {lineno}: expected 2 columns in [{current}], got {len(row)}")
        if tuple(c.lower() for c in row) == _SECTIONS[current]:
            continue
        sections[current].append(row + [str(lineno)])

    if "layer" not in meta:
        raise FormatError("assessment is missing 'layer='")
    try:
        layer = Layer.parse(meta["layer"])
        status = {}
        for pid, val, ln in sections["practice_status"]:
            v = int(val)
            if v not in (-1, 0, 1):
                raise FormatError(f"line {ln}: practice status must be -1, 0 or 1, got {val}")
            status[pid] = PracticeStatus(v)
        weights = {d: float(w) for d, w, _ in sections["domain_weights"]}
        objectives = tuple((lbl, float(s)) for lbl, s, _ in sections["objectives"])
        override = float(meta["maturity_override"]) if "maturity_override" in meta else None
        level = int(meta["achieved_level"]) if "achieved_level" in meta else None
    except ValueError as exc:
        raise FormatError(f"bad assessment value: {exc}") from None
    if override is not None and not math.isfinite(override):
        raise FormatError("maturity_override must be finite")
    return LayerAssessment(
        layer=layer,
        practice_status=status,
        domain_weights=weights,
        objectives=objectives,
        achieved_level=level,
        maturity_override=override,
        role=meta.get("role", "underwriter"),
        model_path=meta.get("model"),
        objective_domain_matrix=meta.get("objective_domain_matrix"),
    )


def read_assessment(path: str | Path) -> LayerAssessment:
    return load_assessment(Path(path).read_text(encoding="utf-8"))
