"""Affine control systems: drift, input fields, optional running cost, bound.

A system models dynamics x' = f(x) + sum_i g_i(x) u_i with |u_i| <= K(t).
An optional running cost (f0, g0_i) can be absorbed into an extra leading
state coordinate "x0", raising the dimension by one; the adjoint component
paired with x0 then stays constant because nothing depends on x0.
"""

from __future__ import annotations

import dataclasses
import random
from dataclasses import dataclass
from typing import Any, Mapping

from .expr import Expr, ExprError, evaluate, parse, to_text, variables
from .fields import VectorField

_RESERVED_TIME_NAME = "t"
_COST_STATE_NAME = "x0"
_IDENT_CHARS = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_")


class SystemLoadError(ValueError):
    """Document rejected; `location` points into the offending field."""

    def __init__(self, message: str, location: str):
        super().__init__(f"{location}: {message}")
        self.location = location


@dataclass(frozen=True)
class CostSpec:
    f0: Expr
    g0: tuple[Expr, ...]


@dataclass(frozen=True)
class ControlSystem:
    state_names: tuple[str, ...]
    drift: VectorField
    inputs: tuple[VectorField, ...]
    cost: CostSpec | None = None
    bound: Expr | None = None  # expression over "t"; None means the constant 1
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "state_names", tuple(self.state_names))
        object.__setattr__(self, "inputs", tuple(self.inputs))
        if self.drift.state_names != self.state_names:
            raise ValueError("drift coordinates do not match the system states")
        if len(self.inputs) < 1:
            raise ValueError("at least one input field is required")
        for i, g in enumerate(self.inputs):
            if g.state_names != self.state_names:
                raise ValueError(f"input field {i} coordinates do not match the states")
        if self.cost is not None:
            if len(self.cost.g0) != len(self.inputs):
                raise ValueError("cost needs one g0 entry per input")
            for e in (self.cost.f0, *self.cost.g0):
                extra = variables(e) - set(self.state_names)
                if extra:
                    raise ValueError(f"cost uses undeclared variables {sorted(extra)}")
        if self.bound is not None:
            extra = variables(self.bound) - {_RESERVED_TIME_NAME}
            if extra:
                raise ValueError(f"bound K may only use '{_RESERVED_TIME_NAME}', got {sorted(extra)}")

    @property
    def n(self) -> int:
        return len(self.state_names)

    @property
    def m(self) -> int:
        return len(self.inputs)


def without_cost(sys: ControlSystem) -> ControlSystem:
    """The same dynamics with any running cost dropped."""
    return dataclasses.replace(sys, cost=None)


def load(document: Mapping[str, Any]) -> ControlSystem:
    """Build a validated system from a key-value document (see README schema)."""
    if not isinstance(document, Mapping):
        raise SystemLoadError("document must be a key-value mapping", "$")
    known = {"states", "inputs", "f", "g", "cost", "K", "label"}
    for key in document:
        if key not in known:
            raise SystemLoadError(f"unknown key '{key}'", str(key))

    states = document.get("states")
    if not isinstance(states, list) or not states:
        raise SystemLoadError("'states' must be a non-empty list of names", "states")
    for i, name in enumerate(states):
        if not isinstance(name, str) or not name:
            raise SystemLoadError("state names must be non-empty strings", f"states[{i}]")
        if not (set(name) <= _IDENT_CHARS) or name[0].isdigit():
            raise SystemLoadError(f"'{name}' is not a valid identifier", f"states[{i}]")
    names = tuple(states)
    n = len(names)

    m = document.get("inputs")
    if not isinstance(m, int) or isinstance(m, bool) or m < 1:
        raise SystemLoadError("'inputs' must be an integer >= 1", "inputs")

    def parse_at(text: Any, location: str) -> Expr:
        if not isinstance(text, str):
            raise SystemLoadError("expected an expression string", location)
        try:
            return parse(text, names)
        except ExprError as err:
            raise SystemLoadError(str(err), location) from err

    f_doc = document.get("f")
    if not isinstance(f_doc, list) or len(f_doc) != n:
        raise SystemLoadError(f"'f' must list {n} expression strings", "f")
    drift = VectorField(names, tuple(parse_at(t, f"f[{i}]") for i, t in enumerate(f_doc)))

    g_doc = document.get("g")
    if not isinstance(g_doc, list) or len(g_doc) != m:
        raise SystemLoadError(f"'g' must list {m} input fields", "g")
    inputs = []
    for i, row in enumerate(g_doc):
        if not isinstance(row, list) or len(row) != n:
            raise SystemLoadError(f"input field must list {n} expression strings", f"g[{i}]")
        inputs.append(
            VectorField(names, tuple(parse_at(t, f"g[{i}][{j}]") for j, t in enumerate(row)))
        )

    cost = None
    cost_doc = document.get("cost")
    if cost_doc is not None:
        if not isinstance(cost_doc, Mapping) or set(cost_doc) - {"f0", "g0"}:
            raise SystemLoadError("'cost' must be a mapping with keys f0 and g0", "cost")
        f0 = parse_at(cost_doc.get("f0"), "cost.f0")
        g0_doc = cost_doc.get("g0")
        if not isinstance(g0_doc, list) or len(g0_doc) != m:
            raise SystemLoadError(f"'cost.g0' must list {m} expression strings", "cost.g0")
        g0 = tuple(parse_at(t, f"cost.g0[{i}]") for i, t in enumerate(g0_doc))
        cost = CostSpec(f0, g0)

    bound = None
    if document.get("K") is not None:
        text = document["K"]
        if not isinstance(text, str):
            raise SystemLoadError("'K' must be an expression string in 't'", "K")
        try:
            bound = parse(text, (_RESERVED_TIME_NAME,))
        except ExprError as err:
            raise SystemLoadError(str(err), "K") from err

    label = document.get("label", "")
    if not isinstance(label, str):
        raise SystemLoadError("'label' must be a string", "label")

    return ControlSystem(names, drift, tuple(inputs), cost, bound, label)


def to_document(sys: ControlSystem) -> dict:
    """Serialize back to the document schema (expressions via to_text)."""
    doc: dict[str, Any] = {
        "states": list(sys.state_names),
        "inputs": sys.m,
        "f": [to_text(c) for c in sys.drift.components],
        "g": [[to_text(c) for c in g.components] for g in sys.inputs],
    }
    if sys.cost is not None:
        doc["cost"] = {
            "f0": to_text(sys.cost.f0),
            "g0": [to_text(e) for e in sys.cost.g0],
        }
    if sys.bound is not None:
        doc["K"] = to_text(sys.bound)
    if sys.label:
        doc["label"] = sys.label
    return doc


def extend_with_cost(sys: ControlSystem) -> ControlSystem:
    """Absorb the running cost into a new leading state "x0".

    The drift becomes (f0, f) and input i becomes (g0_i, g_i); the result
    carries no cost and is one dimension larger.
    """
    if sys.cost is None:
        raise ValueError("system has no running cost to absorb")
    if _COST_STATE_NAME in sys.state_names:
        raise ValueError(f"state name '{_COST_STATE_NAME}' already taken")
    names = (_COST_STATE_NAME, *sys.state_names)
    drift = VectorField(names, (sys.cost.f0, *sys.drift.components))
    inputs = tuple(
        VectorField(names, (g0, *g.components))
        for g0, g in zip(sys.cost.g0, sys.inputs)
    )
    return ControlSystem(names, drift, inputs, None, sys.bound, sys.label)


@dataclass(frozen=True)
class Finding:
    severity: str  # "error" | "warning"
    message: str
    location: str


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple[Finding, ...]

    @property
    def ok(self) -> bool:
        return not any(f.severity == "error" for f in self.findings)

    def errors(self) -> tuple[Finding, ...]:
        return tuple(f for f in self.findings if f.severity == "error")


_K_SAMPLES = 100
_PROBE_SEED = 412739


def validate(sys: ControlSystem, horizon: float) -> ValidationReport:
    """Check names, bound positivity on [0, horizon], and evaluability."""
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    findings: list[Finding] = []

    seen: set[str] = set()
    for i, name in enumerate(sys.state_names):
        if name in seen:
            findings.append(Finding("error", f"duplicate state name '{name}'", f"states[{i}]"))
        seen.add(name)
        if name == _RESERVED_TIME_NAME:
            findings.append(
                Finding("warning", "state named 't' shadows the bound's time variable", f"states[{i}]")
            )
        if name in ("sin", "cos", "exp"):
            findings.append(
                Finding("warning", f"state named '{name}' collides with a function name", f"states[{i}]")
            )

    if sys.bound is not None:
        for s in range(_K_SAMPLES):
            t = horizon * s / (_K_SAMPLES - 1)
            try:
                value = evaluate(sys.bound, {_RESERVED_TIME_NAME: t})
            except ExprError as err:
                findings.append(Finding("error", f"bound K failed to evaluate: {err}", "K"))
                break
            if not value > 0:
                findings.append(
                    Finding("error", f"bound K is not strictly positive at t={t:.6g}", "K")
                )
                break

    rng = random.Random(_PROBE_SEED)
    probe = {name: rng.uniform(-1.0, 1.0) for name in sys.state_names}
    targets: list[tuple[Expr, str]] = [
        (comp, f"f[{i}]") for i, comp in enumerate(sys.drift.components)
    ]
    for i, g in enumerate(sys.inputs):
        targets.extend((comp, f"g[{i}][{j}]") for j, comp in enumerate(g.components))
    if sys.cost is not None:
        targets.append((sys.cost.f0, "cost.f0"))
        targets.extend((e, f"cost.g0[{i}]") for i, e in enumerate(sys.cost.g0))
    for e, location in targets:
        try:
            evaluate(e, probe)
        except ExprError as err:
            findings.append(
                Finding("error", f"failed to evaluate at a random interior point: {err}", location)
            )

    return ValidationReport(tuple(findings))
