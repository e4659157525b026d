"""JSON model files.

::

    {"dimension": 1, "radius": 1,
     "spec": {"kind": "domany-kinzel", "a0": 0.1, "a1": 0.2, "a2": 0.5}}

Other kinds: ``{"kind": "table", "p": {KEY: prob, ...}}`` listing every
subset, ``{"kind": "lambda", "lambda": {KEY: weight, ...}}`` (sparse) and
``{"kind": "binomial2d", "alpha": x}``.  Subset keys join offsets with ``;``
and coordinates with ``:``, offsets sorted lexicographically, ``""`` for the
empty set.  Numbers are read as decimals, rounded to 17 significant digits,
then stored as binary doubles.
"""

from __future__ import annotations

import decimal
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigurationError, ParseError
from .model import (
    LambdaTable,
    Model,
    TransitionTable,
    binomial2d,
    build_neighborhood,
    domany_kinzel,
    format_subset,
    parse_subset,
)

KINDS = ("table", "lambda", "domany-kinzel", "binomial2d")
_CTX = decimal.Context(prec=17, rounding=decimal.ROUND_HALF_EVEN)


def _position(text: str, needle: str) -> tuple[int | None, int | None]:
    i = text.find(needle)
    if i < 0:
        return None, None
    line = text.count("\n", 0, i) + 1
    return line, i - (text.rfind("\n", 0, i) + 1) + 1


def _pairs(pairs):
    seen = {}
    for k, v in pairs:
        if k in seen:
            raise ParseError(f"duplicate key {k!r}")
        seen[k] = v
    return seen


def to_float(x, what: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, decimal.Decimal, str, float)):
        raise ConfigurationError(f"{what}: expected a number, got {x!r}")
    try:
        dec = x if isinstance(x, decimal.Decimal) else decimal.Decimal(str(x))
        v = float(_CTX.create_decimal(dec))
    except decimal.InvalidOperation:
        raise ConfigurationError(f"{what}: {x!r} is not a decimal number") from None
    if v != v or v in (float("inf"), float("-inf")):
        raise ConfigurationError(f"{what}: {x!r} is not finite")
    return v


@dataclass(frozen=True)
class ModelFile:
    dimension: int
    radius: int
    spec: dict = field(hash=False)

    @property
    def kind(self) -> str:
        return self.spec["kind"]

    def to_dict(self) -> dict:
        return {"dimension": self.dimension, "radius": self.radius, "spec": self.spec}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()

    def build(self) -> Model:
        s = self.spec
        kind = s["kind"]
        if kind == "domany-kinzel":
            return domany_kinzel(s["a0"], s["a1"], s["a2"])
        if kind == "binomial2d":
            return binomial2d(s["alpha"])
        if kind == "table":
            nb = build_neighborhood(self.radius, self.dimension)
            p = [0.0] * (1 << nb.size)
            for key, v in s["p"].items():
                p[parse_subset(nb, key)] = v
            return TransitionTable(nb, p)
        nb = build_neighborhood(self.radius, self.dimension, dense=False)
        return LambdaTable(nb, {parse_subset(nb, k): v for k, v in s["lambda"].items()})


def parse_model(text: str) -> ModelFile:
    try:
        doc = json.loads(text, parse_float=decimal.Decimal, object_pairs_hook=_pairs)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON: {e.msg}", e.lineno, e.colno) from None
    if not isinstance(doc, dict):
        raise ParseError("model file must be a JSON object", 1, 1)
    extra = set(doc) - {"dimension", "radius", "spec"}
    if extra:
        raise ParseError(f"unknown top-level field(s) {sorted(extra)}", *_position(text, f'"{sorted(extra)[0]}"'))
    try:
        d, r, spec = doc["dimension"], doc["radius"], doc["spec"]
    except KeyError as e:
        raise ParseError(f"missing field {e.args[0]!r}") from None
    for name, v in (("dimension", d), ("radius", r)):
        if isinstance(v, bool) or not isinstance(v, int) or v < 1:
            raise ParseError(f"{name} must be a positive integer", *_position(text, f'"{name}"'))
    if not isinstance(spec, dict) or spec.get("kind") not in KINDS:
        raise ParseError(f"spec.kind must be one of {list(KINDS)}", *_position(text, '"spec"'))
    kind = spec["kind"]

    def fail(msg, needle=None):
        raise ParseError(msg, *_position(text, needle) if needle else (None, None))

    def prob(v, what, needle):
        try:
            x = to_float(v, what)
        except ConfigurationError as e:
            fail(str(e), needle)
        return x

    def expect(keys):
        got = set(spec) - {"kind"}
        if got != set(keys):
            fail(f"{kind} spec needs fields {sorted(keys)}, got {sorted(got)}", '"spec"')

    if kind == "domany-kinzel":
        expect(["a0", "a1", "a2"])
        if (d, r) != (1, 1):
            fail("domany-kinzel models have dimension 1 and radius 1", '"dimension"')
        out = {"kind": kind}
        for a in ("a0", "a1", "a2"):
            out[a] = prob(spec[a], a, f'"{a}"')
            if not 0.0 <= out[a] <= 1.0:
                fail(f"{a} = {out[a]!r} is not a probability", f'"{a}"')
        return ModelFile(d, r, out)
    if kind == "binomial2d":
        expect(["alpha"])
        if (d, r) != (2, 1):
            fail("binomial2d models have dimension 2 and radius 1", '"dimension"')
        alpha = prob(spec["alpha"], "alpha", '"alpha"')
        if not 0.0 <= alpha <= 2.0**-9:
            fail(f"alpha = {alpha!r} must lie in [0, 2^-9] for p to be a probability", '"alpha"')
        return ModelFile(d, r, {"kind": kind, "alpha": alpha})

    field_name = "p" if kind == "table" else "lambda"
    expect([field_name])
    entries = spec[field_name]
    if not isinstance(entries, dict):
        fail(f"spec.{field_name} must be an object", f'"{field_name}"')
    try:
        nb = build_neighborhood(r, d, dense=(kind == "table"))
    except ConfigurationError as e:
        fail(str(e), '"radius"')
    values = {}
    for key, v in entries.items():
        needle = json.dumps(key)
        try:
            mask = parse_subset(nb, key)
        except ConfigurationError as e:
            fail(str(e), needle)
        x = prob(v, f"{field_name}({key!r})", needle)
        if kind == "table" and not 0.0 <= x <= 1.0:
            fail(f"p({key!r}) = {x!r} is not a probability", needle)
        values[format_subset(nb, mask)] = x
    if kind == "table" and len(values) != 1 << nb.size:
        missing = next(format_subset(nb, m) for m in range(1 << nb.size) if format_subset(nb, m) not in values)
        fail(f"table must list all {1 << nb.size} subsets; missing {missing!r}", '"p"')
    return ModelFile(d, r, {"kind": kind, field_name: dict(sorted(values.items()))})


def load_model(path) -> ModelFile:
    if str(path) == "-":
        import sys

        return parse_model(sys.stdin.read())
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigurationError(f"cannot read model file {path}: {e.strerror}") from None
    return parse_model(text)


def model_file_from_table(table: TransitionTable) -> ModelFile:
    nb = table.neighborhood
    p = {format_subset(nb, m): float(table.p[m]) for m in range(1 << nb.size)}
    return ModelFile(nb.dimension, nb.radius, {"kind": "table", "p": dict(sorted(p.items()))})
