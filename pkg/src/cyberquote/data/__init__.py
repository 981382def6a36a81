"""Bundled fixtures: organization files, maturity models, assessments and economics."""

from __future__ import annotations

from pathlib import Path

DATA_DIR = Path(__file__).resolve().parent


def path(name: str) -> Path:
    return DATA_DIR / name


def read(name: str) -> str:
    return path(name).read_text(encoding="utf-8")
