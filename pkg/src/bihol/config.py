"""Run configuration: a YAML document with a ``run`` section and ``examples``.

Example::

    run:
      points: 20
      seed: 7
      tolerance: 1.0e-6
      conditions: [theorem_real, lck]   # optional filter on condition groups
    examples:
      - builtin: conformal_c2
        params: {alpha1: 2, alpha2: 2}
        expect: {gck_B: pass}          # optional overrides
      - name: my_chart                 # inline definition, as written by export-example
        base: ...
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import yaml

from . import atlas
from .conditions import CONDITIONS
from .errors import BiholError, ConfigError, ExpressionError

FORMATS = ("json", "csv", "both")
GROUPS = sorted({c.group for c in CONDITIONS.values()})


@dataclass
class RunConfig:
    examples: list
    points: int = 20
    seed: int = 0
    tolerance: float = 1e-6
    groups: Optional[list] = None
    out: Optional[str] = None
    format: str = "json"
    source: dict = field(default_factory=dict)

    def validate(self):
        if self.points < 1:
            raise ConfigError("run.points must be >= 1")
        if not self.tolerance > 0:
            raise ConfigError("run.tolerance must be > 0")
        if self.format not in FORMATS:
            raise ConfigError(f"run.format must be one of {FORMATS}")
        if self.groups is not None:
            unknown = sorted(set(self.groups) - set(GROUPS))
            if unknown:
                raise ConfigError(f"unknown condition groups {unknown}; valid: {GROUPS}")
        names = [b.name for b in self.examples]
        dup = sorted({n for n in names if names.count(n) > 1})
        if dup:
            raise ConfigError(f"duplicate example names {dup}")
        return self


def _number(value, key, kind):
    try:
        return kind(float(value)) if kind is int else kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"run.{key} must be a number, got {value!r}") from None


def _example(entry, index) -> atlas.ExampleBundle:
    if not isinstance(entry, dict):
        raise ConfigError(f"examples[{index}] must be a mapping")
    try:
        if "builtin" in entry:
            params = entry.get("params") or {}
            if not isinstance(params, dict):
                raise ConfigError(f"examples[{index}].params must be a mapping")
            try:
                bundle = atlas.builtin(entry["builtin"], **params)
            except KeyError as exc:
                raise ConfigError(exc.args[0]) from None
            except TypeError as exc:
                raise ConfigError(f"examples[{index}]: bad params: {exc}") from None
            if "name" in entry:
                bundle.name = str(entry["name"])
        else:
            bundle = atlas.bundle_from_dict(entry)
        override = entry.get("expect") or {}
        bad = {k: v for k, v in override.items() if v not in atlas.VERDICTS}
        if bad:
            raise ConfigError(f"examples[{index}]: expected verdicts must be one of "
                              f"{atlas.VERDICTS}, got {bad}")
        if "builtin" in entry:
            bundle.expect.update(override)
        return bundle
    except ExpressionError as exc:
        raise ConfigError(f"examples[{index}]: {exc}") from None
    except (ValueError, BiholError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"examples[{index}]: {exc}") from None


def from_dict(doc) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping with 'run' and 'examples'")
    run = doc.get("run") or {}
    if not isinstance(run, dict):
        raise ConfigError("'run' must be a mapping")
    entries = doc.get("examples")
    if not entries or not isinstance(entries, list):
        raise ConfigError("config needs a non-empty 'examples' list")
    cfg = RunConfig(
        examples=[_example(e, i) for i, e in enumerate(entries)],
        points=_number(run.get("points", 20), "points", int),
        seed=_number(run.get("seed", 0), "seed", int),
        tolerance=_number(run.get("tolerance", 1e-6), "tolerance", float),
        groups=run.get("conditions"),
        out=run.get("out"),
        format=str(run.get("format", "json")),
        source=doc,
    )
    return cfg.validate()


def loads(text: str) -> RunConfig:
    try:
        doc = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        line = mark.line + 1 if mark else None
        col = mark.column + 1 if mark else None
        raise ConfigError(f"could not parse config: {exc.problem}", line, col) from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"could not parse config: {exc}") from None
    return from_dict(doc)


def load(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return loads(text)


def dump_example(bundle: atlas.ExampleBundle, points: int = 20, seed: int = 0,
                 tolerance: float = 1e-6) -> str:
    """A complete config that reproduces a bundle without referring to the built-ins."""
    doc = {"run": {"points": points, "seed": seed, "tolerance": tolerance},
           "examples": [bundle.to_config()]}
    return yaml.safe_dump(doc, sort_keys=False, width=100)
