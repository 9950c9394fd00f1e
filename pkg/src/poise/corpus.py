"""The bundled example policies (P1-P7)."""
from importlib import resources

NAMES = ("p1", "p2", "p3", "p4", "p5", "p6", "p7")


def source(name):
    return resources.files("poise.policies").joinpath(f"{name}.poise").read_text(encoding="utf-8")


def path(name):
    return resources.files("poise.policies").joinpath(f"{name}.poise")


def load(name):
    from .lang import parse
    return parse(source(name), name=name)
