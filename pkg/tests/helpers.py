"""Shared test utilities: canned systems, random generators, finite differences."""

from __future__ import annotations

import json
import random
from fractions import Fraction
from pathlib import Path

import numpy as np

from ctrlorder import (
    Constant,
    ControlSystem,
    Expr,
    IntPower,
    Negate,
    Product,
    Quotient,
    Sin,
    Cos,
    Exp,
    Sum,
    Variable,
    VectorField,
    const,
    evaluate,
    extend_with_cost,
    load,
    without_cost,
)

SYSTEMS_DIR = Path(__file__).resolve().parents[1] / "systems"


def load_system(name: str) -> ControlSystem:
    return load(json.loads((SYSTEMS_DIR / f"{name}.json").read_text()))


def counterexample_raw() -> ControlSystem:
    return without_cost(load_system("counterexample"))


def counterexample_extended() -> ControlSystem:
    return extend_with_cost(load_system("counterexample"))


def fuller() -> ControlSystem:
    return load_system("fuller")


def double_integrator() -> ControlSystem:
    return load_system("double_integrator")


def commuting() -> ControlSystem:
    return load_system("commuting")


def half_integer() -> ControlSystem:
    return load_system("half_integer")


# ---------------------------------------------------------------------------
# Random expressions
# ---------------------------------------------------------------------------


def random_expr(
    rng: random.Random,
    names: tuple[str, ...],
    depth: int,
    allow_quotient: bool = True,
    allow_trig: bool = True,
    exp_budget: int = 1,
) -> Expr:
    """Random tree with bounded constants so values stay O(1e3) on [-1, 1]^n."""
    if depth <= 0 or rng.random() < 0.3:
        if rng.random() < 0.4:
            kind = rng.random()
            if kind < 0.5:
                return const(rng.randint(-2, 2))
            if kind < 0.8:
                return Constant(Fraction(rng.randint(-4, 4), rng.randint(1, 4)))
            return Constant(round(rng.uniform(-2.0, 2.0), 3))
        return Variable(rng.choice(names))

    def sub(budget=exp_budget):
        return random_expr(rng, names, depth - 1, allow_quotient, allow_trig, budget)

    choices = ["sum", "product", "negate", "power"]
    if allow_trig:
        choices += ["sin", "cos"]
        if exp_budget > 0:
            choices.append("exp")
    if allow_quotient:
        choices.append("quotient")
    kind = rng.choice(choices)
    if kind == "sum":
        return Sum(tuple(sub() for _ in range(rng.randint(2, 3))))
    if kind == "product":
        return Product(tuple(sub() for _ in range(2)))
    if kind == "negate":
        return Negate(sub())
    if kind == "power":
        return IntPower(sub(), rng.randint(2, 3))
    if kind == "sin":
        return Sin(sub())
    if kind == "cos":
        return Cos(sub())
    if kind == "exp":
        return Exp(sub(0))
    # quotient: denominator bounded away from zero on the sampling box
    den = Sum((IntPower(Variable(rng.choice(names)), 2), const(rng.randint(1, 3))))
    return Quotient(sub(), den)


def random_binding(rng: random.Random, names) -> dict[str, float]:
    return {n: rng.uniform(-1.0, 1.0) for n in names}


# ---------------------------------------------------------------------------
# Random polynomial fields and systems
# ---------------------------------------------------------------------------


def random_polynomial(
    rng: random.Random,
    names: tuple[str, ...],
    max_monomials: int = 3,
    degree: int = 2,
    exclude_square_of: str | None = None,
) -> Expr:
    """Sparse integer-coefficient polynomial, monomial degree <= `degree`."""
    terms: list[Expr] = []
    for _ in range(rng.randint(0, max_monomials)):
        coeff = rng.choice([-2, -1, 1, 2])
        d = rng.randint(0, degree)
        while True:
            factors = [rng.choice(names) for _ in range(d)]
            if exclude_square_of is None or factors.count(exclude_square_of) < 2:
                break
        term: Expr = const(coeff)
        for name in factors:
            term = Product((term, Variable(name)))
        terms.append(term)
    if not terms:
        return const(0)
    if len(terms) == 1:
        return terms[0]
    return Sum(tuple(terms))


def random_poly_field(
    rng: random.Random, names: tuple[str, ...], **kwargs
) -> VectorField:
    return VectorField(
        names, tuple(random_polynomial(rng, names, **kwargs) for _ in names)
    )


def random_single_input_system(rng: random.Random) -> ControlSystem:
    """n <= 4 states, degree <= 2 monomials, integer coefficients in [-2, 2]."""
    n = rng.randint(2, 4)
    names = tuple(f"x{i + 1}" for i in range(n))
    drift = random_poly_field(rng, names, max_monomials=2)
    g = random_poly_field(rng, names, max_monomials=2)
    return ControlSystem(names, drift, (g,))


def random_k2_system(rng: random.Random) -> ControlSystem:
    """Single input with [g, ad_f g] = 0 by construction (so k* >= 2).

    g is a constant coordinate direction e_d and no drift component carries
    an x_d^2 monomial, which makes the second drift derivative along e_d
    vanish identically.
    """
    n = rng.randint(2, 4)
    names = tuple(f"x{i + 1}" for i in range(n))
    d = rng.randrange(n)
    drift = VectorField(
        names,
        tuple(
            random_polynomial(rng, names, max_monomials=2, exclude_square_of=names[d])
            for _ in names
        ),
    )
    g = VectorField(names, tuple(const(1 if i == d else 0) for i in range(n)))
    return ControlSystem(names, drift, (g,))


# ---------------------------------------------------------------------------
# Finite differences
# ---------------------------------------------------------------------------


def eval_field(vf: VectorField, point: dict[str, float]) -> np.ndarray:
    return np.array([evaluate(c, point) for c in vf.components])


def numeric_jacobian(vf: VectorField, point: dict[str, float], h: float = 1e-6) -> np.ndarray:
    names = vf.state_names
    out = np.empty((len(names), len(names)))
    for j, name in enumerate(names):
        up = dict(point)
        down = dict(point)
        up[name] += h
        down[name] -= h
        out[:, j] = (eval_field(vf, up) - eval_field(vf, down)) / (2 * h)
    return out


def numeric_bracket(
    a: VectorField, b: VectorField, point: dict[str, float], h: float = 1e-6
) -> np.ndarray:
    """[a, b] at a point via central-difference Jacobians."""
    ja = numeric_jacobian(a, point, h)
    jb = numeric_jacobian(b, point, h)
    return jb @ eval_field(a, point) - ja @ eval_field(b, point)
