"""Dependence analysis and loop transformations over a small SSA IR."""

from ._pdgkit import IrError, Module, check_equiv, describe, link

__all__ = ["IrError", "Module", "check_equiv", "describe", "link", "parse", "load"]


def parse(text):
    return Module.parse(text)


def load(path):
    with open(path, encoding="utf-8") as f:
        return Module.parse(f.read())
