"""Residual-norm-weight cost composition.

A cost is ``sum_i w_i * sum_elements n_i(r_i)`` over named residual terms.
Residual values are laid out as one flat vector per (state, control) sample;
:class:`ResidualLayout` records which slice belongs to which term.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from horizon_bench.errors import ContractViolation

SMOOTH_ABS = "smooth_abs"
QUADRATIC = "quadratic"
NORM_KINDS = (SMOOTH_ABS, QUADRATIC)


@dataclass(frozen=True)
class Norm:
    kind: str = QUADRATIC
    p: float = 0.1  # smoothing radius for smooth_abs, same units as the residual

    def __post_init__(self):
        if self.kind not in NORM_KINDS:
            raise ContractViolation(f"unknown norm kind {self.kind!r}")
        if self.kind == SMOOTH_ABS and not self.p > 0:
            raise ContractViolation("smooth_abs norm needs p > 0")


def norm_eval(n: Norm, x):
    """Value, first and second derivative of the norm, elementwise."""
    x = np.asarray(x, dtype=float)
    if n.kind == QUADRATIC:
        return 0.5 * x * x, x.copy(), np.ones_like(x)
    if not n.p > 0:
        raise ContractViolation("smooth_abs norm needs p > 0")
    p2 = n.p * n.p
    s = np.sqrt(x * x + p2)
    return s - n.p, x / s, p2 / (s * s * s)


def reward_to_cost(r_hb, r_max: float = 1.0, p: float = 0.01):
    """Smooth absolute distance between a reward and its maximum."""
    if not p > 0:
        raise ContractViolation("reward_to_cost needs p > 0")
    value, _, _ = norm_eval(Norm(SMOOTH_ABS, p), np.asarray(r_max, float) - np.asarray(r_hb, float))
    return value


@dataclass(frozen=True)
class CostTerm:
    residual: str
    norm: Norm
    weight: float

    def __post_init__(self):
        if not (self.weight >= 0 and np.isfinite(self.weight)):
            raise ContractViolation(f"term {self.residual!r}: weight must be finite and non-negative")


@dataclass(frozen=True)
class CostSpec:
    name: str
    terms: tuple[CostTerm, ...]

    def __post_init__(self):
        if not self.terms:
            raise ContractViolation("a cost spec needs at least one term")
        ids = [t.residual for t in self.terms]
        if len(set(ids)) != len(ids):
            raise ContractViolation(f"duplicate residual ids in cost spec {self.name!r}")

    def scaled(self, factor: float) -> "CostSpec":
        return CostSpec(self.name, tuple(CostTerm(t.residual, t.norm, t.weight * factor) for t in self.terms))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "terms": [
                {"residual": t.residual, "norm": t.norm.kind, "p": t.norm.p, "weight": t.weight} for t in self.terms
            ],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "CostSpec":
        terms = []
        for i, t in enumerate(d.get("terms", ())):
            unknown = set(t) - {"residual", "norm", "p", "weight"}
            if unknown:
                raise ContractViolation(f"cost term {i}: unknown key(s) {sorted(unknown)}")
            terms.append(CostTerm(str(t["residual"]), Norm(t.get("norm", QUADRATIC), float(t.get("p", 0.1))),
                                  float(t["weight"])))
        return cls(str(d.get("name", "custom")), tuple(terms))


class ResidualLayout:
    """Term -> slice map for a spec, given each residual's dimension."""

    def __init__(self, spec: CostSpec, sizes: Mapping[str, int]):
        self.spec = spec
        self.slices: dict[str, slice] = {}
        offset = 0
        for t in spec.terms:
            if t.residual not in sizes:
                raise ContractViolation(f"residual {t.residual!r} is not registered")
            self.slices[t.residual] = slice(offset, offset + sizes[t.residual])
            offset += sizes[t.residual]
        self.size = offset
        self._weights = np.empty(offset)
        for t in spec.terms:
            self._weights[self.slices[t.residual]] = t.weight

    @property
    def weights(self) -> np.ndarray:
        """Per-element weight vector."""
        return self._weights

    def pack(self, parts: Mapping[str, np.ndarray]) -> np.ndarray:
        return np.concatenate([np.asarray(parts[t.residual], float).reshape(-1) for t in self.spec.terms])

    def unpack(self, r: np.ndarray) -> dict[str, np.ndarray]:
        return {k: r[..., s] for k, s in self.slices.items()}

    def check(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if r.ndim == 0 or r.shape[-1] != self.size:
            raise ContractViolation(f"residual vector has trailing size {r.shape[-1:] }, layout needs {self.size}")
        return r


def _norm_parts(spec: CostSpec, layout: ResidualLayout, r: np.ndarray):
    """Elementwise weighted norm value, first and second derivative."""
    val = np.empty_like(r)
    d1 = np.empty_like(r)
    d2 = np.empty_like(r)
    for t in spec.terms:
        s = layout.slices[t.residual]
        val[..., s], d1[..., s], d2[..., s] = norm_eval(t.norm, r[..., s])
    w = layout.weights
    return w * val, w * d1, w * d2


def cost_eval(spec: CostSpec, residuals, layout: ResidualLayout | None = None):
    """Weighted sum of norms. ``residuals`` may carry leading batch axes.

    Without a layout every term is taken to be scalar.
    """
    if layout is None:
        layout = ResidualLayout(spec, {t.residual: 1 for t in spec.terms})
    r = layout.check(residuals)
    val, _, _ = _norm_parts(spec, layout, r)
    return val.sum(axis=-1)


def cost_derivatives(spec: CostSpec, residuals, jacobians, layout: ResidualLayout | None = None):
    """Gauss-Newton gradient and Hessian of the cost over the Jacobian's columns.

    ``jacobians`` has shape (..., n_residual, n_var); residual curvature is dropped.
    """
    if layout is None:
        layout = ResidualLayout(spec, {t.residual: 1 for t in spec.terms})
    r = layout.check(residuals)
    J = np.asarray(jacobians, dtype=float)
    if J.ndim < 2 or J.shape[-2] != layout.size or J.shape[:-2] != r.shape[:-1]:
        raise ContractViolation(f"Jacobian shape {J.shape} does not match residuals {r.shape}")
    _, g1, g2 = _norm_parts(spec, layout, r)
    grad = np.einsum("...r,...rn->...n", g1, J)
    hess = np.einsum("...rn,...r,...rm->...nm", J, g2, J)
    return grad, hess


def spec_from_terms(name: str, terms: Iterable[tuple[str, str, float, float]]) -> CostSpec:
    """Build a spec from (residual, norm kind, p, weight) tuples."""
    return CostSpec(name, tuple(CostTerm(r, Norm(k, p), w) for r, k, p, w in terms))
