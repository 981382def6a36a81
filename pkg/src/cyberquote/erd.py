"""Text format for organization models, plus DOT export.

Grammar::

    org        := "org" STRING "{" (layerblock | zoneblock | relstmt)* "}"
    layerblock := ("operations"|"service"|"systems") "{" entitydecl* "}"
    entitydecl := "entity" IDENT ("as" STRING)? attrblock?
    attrblock  := "[" STRING ("," STRING)* "]"
    relstmt    := "rel" IDENT STRING "(" IDENT ("," IDENT)+ ")" attrblock?
    zoneblock  := "zone" ("criticality"|"sensitivity") "{" IDENT ("," IDENT)* "}"

Each layer block and each zone block may appear at most once. Keywords are
contextual, so an entity may be called ``service``. ``#`` starts a comment.
An empty (or comment-only) source yields an empty, unnamed model.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import Diagnostic, ModelValidationError, ParseError
from .org import (
    EntityNode,
    Layer,
    OrgModel,
    RelationshipEdge,
    ZoneAssignment,
    errors_only,
    validate_model,
)

IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_-]*")
_PUNCT = set("{}[](),")
_ESCAPES = {"n": "\n", "t": "\t", '"': '"', "\\": "\\"}
_LAYER_KEYWORDS = {"operations": Layer.OPERATIONS, "service": Layer.SERVICE, "systems": Layer.SYSTEMS}


@dataclass(frozen=True)
class _Tok:
    kind: str  # IDENT, STRING, PUNCT, EOF
    value: str
    line: int
    col: int

    def shown(self) -> str:
        return "end of input" if self.kind == "EOF" else self.value


def _tokenize(src: str) -> list[_Tok]:
    toks: list[_Tok] = []
    i, line, col = 0, 1, 1
    n = len(src)
    while i < n:
        ch = src[i]
        if ch == "\n":
            i, line, col = i + 1, line + 1, 1
        elif ch.isspace():
            i, col = i + 1, col + 1
        elif ch == "#":
            while i < n and src[i] != "\n":
                i += 1
        elif ch in _PUNCT:
            toks.append(_Tok("PUNCT", ch, line, col))
            i, col = i + 1, col + 1
        elif ch == '"':
            start_line, start_col = line, col
            i, col = i + 1, col + 1
            buf = []
            while True:
                if i >= n or src[i] == "\n":
                    raise ParseError(start_line, start_col, "closing '\"'", "end of line")
                c = src[i]
                if c == '"':
                    i, col = i + 1, col + 1
                    break
                if c == "\\":
                    if i + 1 >= n or src[i + 1] not in _ESCAPES:
                        raise ParseError(line, col, "escape sequence", src[i : i + 2])
                    buf.append(_ESCAPES[src[i + 1]])
                    i, col = i + 2, col + 2
                    continue
                buf.append(c)
                i, col = i + 1, col + 1
            toks.append(_Tok("STRING", "".join(buf), start_line, start_col))
        else:
            m = IDENT_RE.match(src, i)
            if not m:
                raise ParseError(line, col, "identifier, string or punctuation", ch)
            toks.append(_Tok("IDENT", m.group(), line, col))
            col += m.end() - i
            i = m.end()
    toks.append(_Tok("EOF", "", line, col))
    return toks


class _Parser:
    def __init__(self, toks: list[_Tok]):
        self.toks = toks
        self.pos = 0
        self.lines: dict[str, int] = {}

    @property
    def cur(self) -> _Tok:
        return self.toks[self.pos]

    def fail(self, expected: str) -> ParseError:
        t = self.cur
        return ParseError(t.line, t.col, expected, t.shown())

    def advance(self) -> _Tok:
        t = self.cur
        self.pos += 1
        return t

    def punct(self, ch: str) -> _Tok:
        if self.cur.kind == "PUNCT" and self.cur.value == ch:
            return self.advance()
        raise self.fail(f"'{ch}'")

    def at_punct(self, ch: str) -> bool:
        return self.cur.kind == "PUNCT" and self.cur.value == ch

    def keyword(self, *words: str) -> str:
        if self.cur.kind == "IDENT" and self.cur.value in words:
            return self.advance().value
        raise self.fail("keyword " + "|".join(words))

    def ident(self) -> _Tok:
        if self.cur.kind == "IDENT":
            return self.advance()
        raise self.fail("identifier")

    def string(self) -> str:
        if self.cur.kind == "STRING":
            return self.advance().value
        raise self.fail("string")

    def attrs(self) -> tuple[str, ...]:
        if not self.at_punct("["):
            return ()
        self.advance()
        out = [self.string()]
        while self.at_punct(","):
            self.advance()
            out.append(self.string())
        self.punct("]")
        return tuple(out)

    def parse(self) -> OrgModel:
        if self.cur.kind == "EOF":
            return OrgModel()
        self.keyword("org")
        name = self.string()
        self.punct("{")
        entities: list[EntityNode] = []
        rels: list[RelationshipEdge] = []
        zones: dict[str, frozenset[str]] = {}
        seen_layers: set[Layer] = set()
        while not self.at_punct("}"):
            if self.cur.kind != "IDENT":
                raise self.fail("keyword operations|service|systems|zone|rel or '}'")
            word = self.cur.value
            if word in _LAYER_KEYWORDS:
                layer = _LAYER_KEYWORDS[word]
                if layer in seen_layers:
                    raise self.fail(f"at most one {word} block")
                seen_layers.add(layer)
                self.advance()
                entities.extend(self.layer_block(layer))
            elif word == "zone":
                self.advance()
                kind = self.cur
                zone = self.keyword("criticality", "sensitivity")
                if zone in zones:
                    raise ParseError(kind.line, kind.col, f"at most one {zone} zone", zone)
                zones[zone] = self.zone_members()
            elif word == "rel":
                rels.append(self.rel_stmt())
            else:
                raise self.fail("keyword operations|service|systems|zone|rel or '}'")
        self.punct("}")
        if self.cur.kind != "EOF":
            raise self.fail("end of input")
        return OrgModel(
            name=name,
            entities=tuple(entities),
            relationships=tuple(rels),
            zones=ZoneAssignment(
                zones.get("criticality", frozenset()), zones.get("sensitivity", frozenset())
            ),
        )

    def layer_block(self, layer: Layer) -> list[EntityNode]:
        self.punct("{")
        out = []
        while not self.at_punct("}"):
            self.keyword("entity")
            tok = self.ident()
            display = ""
            if self.cur.kind == "IDENT" and self.cur.value == "as":
                self.advance()
                display = self.string()
            self.lines.setdefault(f"entity {tok.value}", tok.line)
            out.append(EntityNode(tok.value, layer, display, self.attrs()))
        self.punct("}")
        return out

    def zone_members(self) -> frozenset[str]:
        self.punct("{")
        members = [self.ident().value]
        while self.at_punct(","):
            self.advance()
            members.append(self.ident().value)
        self.punct("}")
        return frozenset(members)

    def rel_stmt(self) -> RelationshipEdge:
        self.keyword("rel")
        tok = self.ident()
        label = self.string()
        self.punct("(")
        ends = [self.ident().value]
        if not self.at_punct(","):
            raise self.fail("',' (relationships need at least two endpoints)")
        while self.at_punct(","):
            self.advance()
            ends.append(self.ident().value)
        self.punct(")")
        self.lines.setdefault(f"rel {tok.value}", tok.line)
        return RelationshipEdge(tok.value, label, tuple(ends), self.attrs())


def parse_org(source: str) -> OrgModel:
    """Parse an organization description.

    Raises:
        ParseError: on the first syntax error.
        ModelValidationError: if the text parses but the model is invalid
            (dangling endpoints, duplicate ids, ...). Locations carry line numbers.
    """
    src = source.replace("\r\n", "\n").replace("\r", "\n")
    parser = _Parser(_tokenize(src))
    model = parser.parse()
    errs = errors_only(validate_model(model))
    if errs:
        located = [
            Diagnostic(d.severity, d.code, d.message, f"{d.location} (line {parser.lines[d.location]})")
            if d.location in parser.lines
            else d
            for d in errs
        ]
        raise ModelValidationError(located)
    return model


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t") + '"'


def _attr_suffix(attrs: tuple[str, ...]) -> str:
    return " [" + ", ".join(_quote(a) for a in attrs) + "]" if attrs else ""


def serialize_org(model: OrgModel) -> str:
    """Canonical text form: layers in order, declarations sorted by id."""
    body: list[str] = []
    for layer in Layer:
        ents = sorted((e for e in model.entities if e.layer == layer), key=lambda e: e.id)
        if not ents:
            continue
        body.append(f"  {layer.name.lower()} {{")
        for e in ents:
            alias = f" as {_quote(e.display_name)}" if e.display_name != e.id else ""
            body.append(f"    entity {e.id}{alias}{_attr_suffix(e.attributes)}")
        body.append("  }")
    for zone, members in (
        ("criticality", model.zones.criticality_members),
        ("sensitivity", model.zones.sensitivity_members),
    ):
        if members:
            body.append(f"  zone {zone} {{ {', '.join(sorted(members))} }}")
    for r in sorted(model.relationships, key=lambda r: r.id):
        body.append(f"  rel {r.id} {_quote(r.label)} ({', '.join(r.endpoints)}){_attr_suffix(r.attributes)}")
    if not body:
        return f"org {_quote(model.name)} {{}}\n"
    return f"org {_quote(model.name)} {{\n" + "\n".join(body) + "\n}\n"


ZONE_FILL = {
    "criticality": "#f8cecc",  # red tint
    "sensitivity": "#dae8fc",  # blue tint
    "both": "#e1d5e7",  # purple tint
}


def _dot_id(prefix: str, *parts: object) -> str:
    return _quote(":".join([prefix, *map(str, parts)]))


def export_dot(model: OrgModel) -> str:
    """Render the model as a DOT digraph, one cluster per layer."""
    crit = model.zones.criticality_members
    sens = model.zones.sensitivity_members
    lines = [f"digraph {_quote(model.name or 'org')} {{", "  compound=true;", "  node [fontname=\"Helvetica\"];"]
    for layer in Layer:
        lines.append(f"  subgraph cluster_{layer.name.lower()} {{")
        lines.append(f"    label={_quote(f'{layer.title} ({layer.value})')};")
        lines.append("    style=dashed;")
        for e in sorted((e for e in model.entities if e.layer == layer), key=lambda e: e.id):
            zone = (
                "both" if e.id in crit and e.id in sens
                else "criticality" if e.id in crit
                else "sensitivity" if e.id in sens
                else None
            )
            fill = f", style=filled, fillcolor={_quote(ZONE_FILL[zone])}" if zone else ""
            lines.append(f"    {_dot_id('e', e.id)} [shape=box, label={_quote(e.display_name)}{fill}];")
            for i, a in enumerate(e.attributes):
                lines.append(f"    {_dot_id('a', e.id, i)} [shape=ellipse, label={_quote(a)}];")
                lines.append(f"    {_dot_id('a', e.id, i)} -> {_dot_id('e', e.id)} [dir=none];")
        lines.append("  }")
    for r in sorted(model.relationships, key=lambda r: r.id):
        lines.append(f"  {_dot_id('r', r.id)} [shape=diamond, label={_quote(r.label)}];")
        for ep in r.endpoints:
            lines.append(f"  {_dot_id('r', r.id)} -> {_dot_id('e', ep)} [dir=none];")
        for i, a in enumerate(r.attributes):
            lines.append(f"  {_dot_id('a', r.id, i)} [shape=ellipse, label={_quote(a)}];")
            lines.append(f"  {_dot_id('a', r.id, i)} -> {_dot_id('r', r.id)} [dir=none];")
    lines.append("}")
    return "\n".join(lines) + "\n"
