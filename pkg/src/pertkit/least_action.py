"""Least-action multi-block diagonalization.

The exact least-action unitary for a block structure is
U^dag = X^dag B(X) {B(X^dag) B(X)}^(-1/2), with X the full-diagonalization
frame and B the block projector.  Expanding X = exp(-Z) in the perturbative
full-diagonalization generator Z = sum_j Z^(j) turns U^dag into a series
I + sum_j U^(j) whose generator S (U^dag = exp(S)) follows from a recursion
over integer compositions:

    eps^(i)  -- order-i content of B(X^dag) B(X) - I (block diagonal),
    W^(i)    -- order-i content of X^dag B(X) - I,
    U^(i)    -- order-i content of U^dag - I after the (1+eps)^(-1/2) resum,
    S^(j)    =  U^(j) - sum over multi-factor compositions of S.

Products over compositions are cached so high orders stay cheap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Mapping

import numpy as np

from .engine import (
    DEFAULT_RES_TOL,
    Mask,
    TransformResult,
    run_fd,
)
from .graded import (
    CommutatorCache,
    GradedOperator,
    enumerate_compositions,
    nested_commutator,
    positive_compositions,
    zero_operator,
)


@dataclass(frozen=True)
class BlockStructure:
    """Ordered contiguous blocks partitioning the basis indices."""

    sizes: tuple[int, ...]

    def __post_init__(self):
        normalized = tuple(int(s) for s in self.sizes)
        if not normalized or any(s < 1 for s in normalized):
            raise ValueError("block sizes must be positive integers")
        object.__setattr__(self, "sizes", normalized)

    @property
    def dim(self) -> int:
        return sum(self.sizes)

    def membership(self) -> np.ndarray:
        """Index -> block id."""
        return np.repeat(np.arange(len(self.sizes)), self.sizes)

    def in_block(self) -> np.ndarray:
        """Boolean d x d matrix, True where both indices share a block."""
        labels = self.membership()
        return labels[:, None] == labels[None, :]

    def cross_mask(self) -> Mask:
        """Engine mask targeting every cross-block entry."""
        return Mask.block_off_diagonal(self.sizes)


def block_project(g: GradedOperator, blocks: BlockStructure) -> GradedOperator:
    """Zero all cross-block entries, per (order, harmonic) key."""
    keep = blocks.in_block()
    return GradedOperator(
        g.dim,
        {key: np.where(keep, mat, 0.0) for key, mat in g.items()},
        g.omega_d,
    )


def block_project_matrix(mat: np.ndarray, blocks: BlockStructure) -> np.ndarray:
    return np.where(blocks.in_block(), mat, 0.0)


def product_over_composition(
    series: Mapping[int, GradedOperator], comp: tuple[int, ...]
) -> GradedOperator:
    """Left-to-right product series[c1] @ ... @ series[cm].

    Orders absent from the series count as zero, collapsing the product.
    """
    if not comp:
        raise ValueError("composition must be nonempty")
    dim = next(iter(series.values())).dim
    out: GradedOperator | None = None
    for part in comp:
        factor = series.get(part)
        if factor is None or factor.is_zero:
            return zero_operator(dim)
        out = factor if out is None else out @ factor
    return out


class _ProductCache:
    """Memoized left-to-right products of a series over compositions."""

    def __init__(self, series: Mapping[int, GradedOperator], dim: int):
        self.series = series
        self.dim = dim
        self._memo: dict[tuple[int, ...], GradedOperator] = {}

    def get(self, comp: tuple[int, ...]) -> GradedOperator:
        found = self._memo.get(comp)
        if found is not None:
            return found
        if len(comp) == 1:
            value = self.series.get(comp[0], zero_operator(self.dim))
        else:
            left = self.get(comp[:-1])
            right = self.series.get(comp[-1], zero_operator(self.dim))
            value = zero_operator(self.dim) if (left.is_zero or right.is_zero) else left @ right
        self._memo[comp] = value
        return value


@lru_cache(maxsize=None)
def _half_binomial(m: int) -> float:
    """binom(-1/2, m), computed exactly and converted to float once."""
    value = Fraction(1)
    for i in range(1, m + 1):
        value *= Fraction(-1, 2) - (i - 1)
        value /= i
    return float(value)


def _splittings(i: int) -> list[tuple[int, int]]:
    """T(i, 2): ordered pairs of positive integers summing to i."""
    return [(j, i - j) for j in range(1, i)]


@dataclass
class LASeries:
    """All intermediate series of the least-action recursion."""

    Z: dict[int, GradedOperator]
    epsilon: dict[int, GradedOperator]
    W: dict[int, GradedOperator]
    U: dict[int, GradedOperator]
    S: dict[int, GradedOperator]


class _LABuilder:
    def __init__(self, z: Mapping[int, GradedOperator], blocks: BlockStructure, dim: int):
        self.blocks = blocks
        self.dim = dim
        self.z = dict(z)
        self.z_prod = _ProductCache(self.z, dim)
        self.bz_prod_memo: dict[tuple[int, ...], GradedOperator] = {}

    def bz(self, comp: tuple[int, ...]) -> GradedOperator:
        """B(Z^(comp)): block projection of a product over a composition."""
        found = self.bz_prod_memo.get(comp)
        if found is None:
            found = block_project(self.z_prod.get(comp), self.blocks)
            self.bz_prod_memo[comp] = found
        return found

    def epsilon_order(self, i: int) -> GradedOperator:
        """Order-i term of B(X^dag) B(X) - I; block diagonal by construction."""
        if i < 2:
            raise ValueError("epsilon terms start at order 2")
        total = zero_operator(self.dim)
        for comp in positive_compositions(i):
            if len(comp) % 2 == 0:
                total = total + self.bz(comp) * (2.0 / math.factorial(len(comp)))
        for j, k in _splittings(i):
            for theta in positive_compositions(j):
                bz_theta = self.bz(theta)
                if bz_theta.is_zero:
                    continue
                for phi in positive_compositions(k):
                    bz_phi = self.bz(phi)
                    if bz_phi.is_zero:
                        continue
                    sign = -1.0 if len(phi) % 2 else 1.0
                    coeff = sign / (math.factorial(len(theta)) * math.factorial(len(phi)))
                    total = total + (bz_theta @ bz_phi) * coeff
        return total

    def w_order(self, i: int) -> GradedOperator:
        """Order-i term of X^dag B(X) - I."""
        total = zero_operator(self.dim)
        for comp in positive_compositions(i):
            prod = self.z_prod.get(comp)
            if prod.is_zero:
                continue
            sign = -1.0 if len(comp) % 2 else 1.0
            total = total + (prod + self.bz(comp) * sign) * (1.0 / math.factorial(len(comp)))
        for j, k in _splittings(i):
            for theta in positive_compositions(j):
                z_theta = self.z_prod.get(theta)
                if z_theta.is_zero:
                    continue
                for phi in positive_compositions(k):
                    bz_phi = self.bz(phi)
                    if bz_phi.is_zero:
                        continue
                    sign = -1.0 if len(phi) % 2 else 1.0
                    coeff = sign / (math.factorial(len(theta)) * math.factorial(len(phi)))
                    total = total + (z_theta @ bz_phi) * coeff
        return total


def compute_epsilon(
    i: int, z: Mapping[int, GradedOperator], blocks: BlockStructure
) -> GradedOperator:
    """Order-i term of B(X^dag) B(X) - I for X = exp(-Z)."""
    dim = next(iter(z.values())).dim if z else blocks.dim
    return _LABuilder(z, blocks, dim).epsilon_order(i)


def compute_la_generator(
    z: Mapping[int, GradedOperator],
    blocks: BlockStructure,
    max_order: int,
    dim: int | None = None,
) -> LASeries:
    """Run the least-action recursion through ``max_order``.

    ``z`` is the full-diagonalization generator series.  Products of epsilon
    over compositions skip any composition containing a part below 2, since
    the epsilon series starts at order 2.
    """
    if dim is None:
        dim = next(iter(z.values())).dim if z else blocks.dim
    builder = _LABuilder(z, blocks, dim)
    epsilon: dict[int, GradedOperator] = {}
    for i in range(2, max_order + 1):
        epsilon[i] = builder.epsilon_order(i)
    eps_prod = _ProductCache(epsilon, dim)

    def eps_composite(comp: tuple[int, ...]) -> GradedOperator:
        if any(part < 2 for part in comp):
            return zero_operator(dim)
        return eps_prod.get(comp)

    w: dict[int, GradedOperator] = {}
    u: dict[int, GradedOperator] = {}
    s: dict[int, GradedOperator] = {}
    s_prod = _ProductCache(s, dim)
    for i in range(1, max_order + 1):
        w[i] = builder.w_order(i)
        total = w[i]
        for theta in positive_compositions(i):
            eps_term = eps_composite(theta)
            if eps_term.is_zero:
                continue
            total = total + eps_term * _half_binomial(len(theta))
        for j, k in _splittings(i):
            w_j = w.get(j)
            if w_j is None or w_j.is_zero:
                continue
            for theta in positive_compositions(k):
                eps_term = eps_composite(theta)
                if eps_term.is_zero:
                    continue
                total = total + (w_j @ eps_term) * _half_binomial(len(theta))
        u[i] = total
        s_i = u[i]
        for theta in positive_compositions(i):
            if len(theta) == 1:
                continue
            prod = s_prod.get(theta)
            if prod.is_zero:
                continue
            s_i = s_i - prod * (1.0 / math.factorial(len(theta)))
        s[i] = s_i
    return LASeries(Z=dict(z), epsilon=epsilon, W=w, U=u, S=s)


def run_la(
    h: GradedOperator,
    blocks: BlockStructure | list[int] | tuple[int, ...],
    max_order: int,
    hbar: float = 1.0,
    deg_tol: float | None = None,
    res_tol: float = DEFAULT_RES_TOL,
) -> TransformResult:
    """Least-action block diagonalization of a static Hamiltonian.

    Runs the full-diagonalization routine to obtain the Z series, builds the
    least-action generator from it, then rotates the input through the
    nested-commutator series.  Time-periodic input is not supported.
    """
    if not isinstance(blocks, BlockStructure):
        blocks = BlockStructure(blocks)
    if blocks.dim != h.dim:
        raise ValueError(f"block sizes sum to {blocks.dim}, operator dim is {h.dim}")
    if any(k != 0 for k in h.harmonics()):
        raise ValueError("least-action transformation supports static input only")
    fd = run_fd(h, max_order, hbar=hbar, deg_tol=deg_tol, res_tol=res_tol)
    la = compute_la_generator(fd.generator, blocks, max_order, dim=h.dim)
    cache = CommutatorCache()
    base = h.by_order()
    corrections: dict[int, GradedOperator] = {0: h.order_part(0)}
    for n in range(1, max_order + 1):
        total = zero_operator(h.dim)
        for comp in enumerate_compositions(n, allow_zero_head=True):
            if comp.head not in base:
                continue
            chain = nested_commutator(base, comp, la.S, cache, "H")
            if chain.is_zero:
                continue
            total = total + chain * (1.0 / math.factorial(comp.nestedness))
        corrections[n] = total
    diagnostics = fd.diagnostics
    diagnostics.cache_hits += cache.hits
    diagnostics.cache_misses += cache.misses
    return TransformResult(
        corrections=corrections,
        generator=la.S,
        frame=fd.frame,
        mask=blocks.cross_mask(),
        method="la",
        max_order=max_order,
        hbar=hbar,
        omega_d=None,
        diagnostics=diagnostics,
    )
