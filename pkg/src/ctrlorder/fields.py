"""Vector fields as expression vectors: Jacobians, Lie brackets, iterated brackets.

The bracket convention is [a, b] = (Db)a - (Da)b, chosen so that along an
extremal d/dt<p, h(x)> = <p, [f, h] + sum_i u_i [g_i, h]> holds with the
adjoint dynamics p' = -(Df)^T p - sum_i u_i (Dg_i)^T p; the simulation module
checks that identity numerically.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

from .expr import (
    Expr,
    Negate,
    Product,
    Sum,
    ZeroTestPolicy,
    ZeroVerdict,
    const,
    diff,
    is_zero,
    parse,
    simplify,
    to_text,
    variables,
)


class DimensionMismatchError(ValueError):
    """Operands do not share state coordinates."""


@dataclass(frozen=True)
class VectorField:
    """Ordered expression components over named state coordinates."""

    state_names: tuple[str, ...]
    components: tuple[Expr, ...]

    def __post_init__(self):
        object.__setattr__(self, "state_names", tuple(self.state_names))
        object.__setattr__(self, "components", tuple(self.components))
        if len(self.components) != len(self.state_names):
            raise DimensionMismatchError(
                f"{len(self.components)} components for {len(self.state_names)} states"
            )
        declared = set(self.state_names)
        for i, comp in enumerate(self.components):
            extra = variables(comp) - declared
            if extra:
                raise ValueError(
                    f"component {i} uses undeclared variables {sorted(extra)}"
                )

    @property
    def dim(self) -> int:
        return len(self.state_names)

    @classmethod
    def from_strings(cls, state_names, texts) -> "VectorField":
        names = tuple(state_names)
        return cls(names, tuple(parse(t, names) for t in texts))

    @classmethod
    def zero(cls, state_names) -> "VectorField":
        names = tuple(state_names)
        return cls(names, tuple(const(0) for _ in names))

    def simplified(self) -> "VectorField":
        return VectorField(self.state_names, tuple(simplify(c) for c in self.components))

    def __str__(self) -> str:
        return "(" + ", ".join(to_text(c) for c in self.components) + ")"


@dataclass(frozen=True)
class ExprMatrix:
    """Rectangular grid of expressions (rows x cols)."""

    rows: tuple[tuple[Expr, ...], ...]

    def __post_init__(self):
        rows = tuple(tuple(r) for r in self.rows)
        object.__setattr__(self, "rows", rows)
        if rows:
            width = len(rows[0])
            if any(len(r) != width for r in rows):
                raise ValueError("matrix rows have unequal lengths")

    @property
    def shape(self) -> tuple[int, int]:
        if not self.rows:
            return (0, 0)
        return (len(self.rows), len(self.rows[0]))


def _require_same_space(a: VectorField, b: VectorField) -> None:
    if a.state_names != b.state_names:
        raise DimensionMismatchError(
            f"state coordinates differ: {a.state_names} vs {b.state_names}"
        )


def jacobian(h: VectorField) -> ExprMatrix:
    """Entry (i, j) = d(component_i)/d(state_j), simplified."""
    return ExprMatrix(
        tuple(
            tuple(diff(comp, name) for name in h.state_names)
            for comp in h.components
        )
    )


def lie_bracket(a: VectorField, b: VectorField) -> VectorField:
    """[a, b] = (Db)a - (Da)b, component-wise simplified."""
    _require_same_space(a, b)
    names = a.state_names
    comps = []
    for i in range(len(names)):
        terms = []
        for j, name in enumerate(names):
            terms.append(Product((diff(b.components[i], name), a.components[j])))
            terms.append(Negate(Product((diff(a.components[i], name), b.components[j]))))
        comps.append(simplify(Sum(tuple(terms))))
    return VectorField(names, tuple(comps))


# Iterated-bracket chains are cached per (f, g) object identity; recomputation
# is idempotent so last-write-wins races are harmless.
_AD_LOCK = threading.Lock()
_AD_CACHE: dict[tuple[int, int], tuple[VectorField, VectorField, list[VectorField]]] = {}


def ad_pow(f: VectorField, g: VectorField, k: int) -> VectorField:
    """Iterated bracket: ad^0 = g, ad^k = [f, ad^(k-1)]."""
    if not isinstance(k, int) or k < 0:
        raise ValueError("bracket level must be an integer >= 0")
    _require_same_space(f, g)
    key = (id(f), id(g))
    with _AD_LOCK:
        entry = _AD_CACHE.get(key)
        if entry is None or entry[0] is not f or entry[1] is not g:
            entry = (f, g, [g.simplified()])
            _AD_CACHE[key] = entry
        chain = entry[2]
        while len(chain) <= k:
            chain.append(lie_bracket(f, chain[-1]))
        return chain[k]


@dataclass(frozen=True)
class VfZeroVerdict:
    is_zero: bool
    component: int | None = None
    witness: dict | None = None
    value: float | None = None


def vf_is_zero(h: VectorField, policy: ZeroTestPolicy = ZeroTestPolicy()) -> VfZeroVerdict:
    """Zero iff every component tests zero; else first witnessing component."""
    for i, comp in enumerate(h.components):
        verdict: ZeroVerdict = is_zero(comp, policy.derive("component", i))
        if not verdict.is_zero:
            return VfZeroVerdict(
                False,
                component=i,
                witness=dict(verdict.witness) if verdict.witness else {},
                value=verdict.value,
            )
    return VfZeroVerdict(True)
