"""Graded-operator arithmetic, composition enumeration and nested commutators.

A graded operator is a family of dense d x d complex matrices indexed by
(order, harmonic): it represents

    sum_{j,k} M[j, k] * lambda^j * exp(i k omega_d t),

where lambda is the formal perturbation bookkeeping parameter, j >= 0 the
perturbative order and k the integer drive harmonic.  Orders combine
additively under products; harmonics likewise.  Absent keys are zero.

The nested-commutator engine at the bottom of this module evaluates chains

    [...[[base^(h), S^(s1)], S^(s2)], ..., S^(sm)]

indexed by integer compositions (h; s1..sm) and caches every prefix, so a
chain computed at one order is extended rather than recomputed at the next.
Series coefficients (1/m! and friends) are deliberately not baked into the
cache; they are applied at assembly time by the callers.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Mapping, NamedTuple

import numpy as np

#: Relative magnitude below which a term matrix counts as zero and is pruned.
ZERO_RTOL = 1e-14

Key = tuple[int, int]


def _as_term_matrix(dim: int, mat) -> np.ndarray:
    out = np.array(mat, dtype=complex)  # own copy; frozen by the constructor
    if out.shape != (dim, dim):
        raise ValueError(f"term matrix has shape {out.shape}, expected ({dim}, {dim})")
    return out


class GradedOperator:
    """Immutable family of d x d complex matrices keyed by (order, harmonic)."""

    __slots__ = ("dim", "omega_d", "_terms")

    def __init__(self, dim: int, terms: Mapping[Key, np.ndarray] | None = None,
                 omega_d: float | None = None, prune_scale: float = 0.0):
        if dim < 1:
            raise ValueError("dim must be a positive integer")
        self.dim = int(dim)
        self.omega_d = None if omega_d is None else float(omega_d)
        staged: dict[Key, np.ndarray] = {}
        for key, mat in (terms or {}).items():
            j, k = int(key[0]), int(key[1])
            if j < 0:
                raise ValueError(f"perturbative order must be >= 0, got {j}")
            if k != 0 and self.omega_d is None:
                raise ValueError("omega_d is required when nonzero harmonics are present")
            staged[(j, k)] = _as_term_matrix(self.dim, mat)
        self._terms = _prune(staged, prune_scale)
        for mat in self._terms.values():
            mat.flags.writeable = False

    # -- basic queries -------------------------------------------------

    def term(self, order: int, harmonic: int = 0) -> np.ndarray:
        """Matrix at (order, harmonic); the zero matrix if absent."""
        mat = self._terms.get((order, harmonic))
        if mat is None:
            return np.zeros((self.dim, self.dim), dtype=complex)
        return mat

    def keys(self):
        return self._terms.keys()

    def items(self):
        return self._terms.items()

    def orders(self) -> tuple[int, ...]:
        return tuple(sorted({j for j, _ in self._terms}))

    def harmonics(self) -> tuple[int, ...]:
        return tuple(sorted({k for _, k in self._terms}))

    @property
    def is_zero(self) -> bool:
        return not self._terms

    def max_abs(self) -> float:
        if not self._terms:
            return 0.0
        return max(np.abs(m).max() for m in self._terms.values())

    def __repr__(self) -> str:
        keys = sorted(self._terms)
        return f"GradedOperator(dim={self.dim}, keys={keys})"

    # -- structure tests -----------------------------------------------

    def is_hermitian_graded(self, tol: float = 1e-12) -> bool:
        """True when M[j, k]^dag == M[j, -k] for every stored key."""
        scale = self.max_abs() or 1.0
        for (j, k), mat in self._terms.items():
            partner = self.term(j, -k)
            if np.abs(mat.conj().T - partner).max() > tol * scale:
                return False
        return True

    def is_anti_hermitian_graded(self, tol: float = 1e-12) -> bool:
        """True when M[j, k]^dag == -M[j, -k] for every stored key."""
        scale = self.max_abs() or 1.0
        for (j, k), mat in self._terms.items():
            partner = self.term(j, -k)
            if np.abs(mat.conj().T + partner).max() > tol * scale:
                return False
        return True

    # -- arithmetic ------------------------------------------------------

    def __add__(self, other: "GradedOperator") -> "GradedOperator":
        self._check_compatible(other)
        merged: dict[Key, np.ndarray] = dict(self._terms)
        for key, mat in other._terms.items():
            if key in merged:
                merged[key] = merged[key] + mat
            else:
                merged[key] = mat
        # cancellations are judged against the operands, so a difference of
        # nearly equal operators prunes to zero instead of keeping noise
        floor = max(self.max_abs(), other.max_abs())
        return GradedOperator(self.dim, merged, self._merged_omega(other), prune_scale=floor)

    def __sub__(self, other: "GradedOperator") -> "GradedOperator":
        return self + (-other)

    def __neg__(self) -> "GradedOperator":
        return self * (-1.0)

    def __mul__(self, scalar: complex) -> "GradedOperator":
        return GradedOperator(
            self.dim, {k: m * scalar for k, m in self._terms.items()}, self.omega_d
        )

    __rmul__ = __mul__

    def __matmul__(self, other: "GradedOperator") -> "GradedOperator":
        """Graded product: convolution over both orders and harmonics."""
        self._check_compatible(other)
        out: dict[Key, np.ndarray] = {}
        for (j1, k1), m1 in self._terms.items():
            for (j2, k2), m2 in other._terms.items():
                key = (j1 + j2, k1 + k2)
                prod = m1 @ m2
                if key in out:
                    out[key] += prod
                else:
                    out[key] = prod
        return GradedOperator(self.dim, out, self._merged_omega(other))

    def adjoint(self) -> "GradedOperator":
        """Termwise conjugate transpose with the harmonic negated."""
        return GradedOperator(
            self.dim,
            {(j, -k): m.conj().T for (j, k), m in self._terms.items()},
            self.omega_d,
        )

    def time_derivative(self) -> "GradedOperator":
        """d/dt of the operator: multiplies each term by i*k*omega_d.

        Static content (k = 0) drops out.  The i*hbar factor appearing in
        time-dependent generator conditions is applied by callers.
        """
        out: dict[Key, np.ndarray] = {}
        for (j, k), mat in self._terms.items():
            if k == 0:
                continue
            if self.omega_d is None:
                raise ValueError("omega_d is required to differentiate nonzero harmonics")
            out[(j, k)] = (1j * k * self.omega_d) * mat
        return GradedOperator(self.dim, out, self.omega_d)

    def truncated(self, max_order: int) -> "GradedOperator":
        """Drop every term with order above ``max_order``."""
        return GradedOperator(
            self.dim,
            {key: m for key, m in self._terms.items() if key[0] <= max_order},
            self.omega_d,
        )

    def order_part(self, order: int) -> "GradedOperator":
        """The sub-operator holding only the terms of one order."""
        return GradedOperator(
            self.dim,
            {key: m for key, m in self._terms.items() if key[0] == order},
            self.omega_d,
        )

    def by_order(self) -> dict[int, "GradedOperator"]:
        """Split into single-order operators, keyed by order."""
        return {j: self.order_part(j) for j in self.orders()}

    # -- helpers ---------------------------------------------------------

    def _check_compatible(self, other: "GradedOperator") -> None:
        if not isinstance(other, GradedOperator):
            raise TypeError(f"expected GradedOperator, got {type(other).__name__}")
        if self.dim != other.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")
        if (self.omega_d is not None and other.omega_d is not None
                and self.omega_d != other.omega_d):
            raise ValueError(
                f"omega_d mismatch: {self.omega_d} vs {other.omega_d}"
            )

    def _merged_omega(self, other: "GradedOperator") -> float | None:
        return self.omega_d if self.omega_d is not None else other.omega_d


def _prune(terms: dict[Key, np.ndarray], floor_scale: float = 0.0) -> dict[Key, np.ndarray]:
    """Drop term matrices negligibly small next to the operator scale.

    The scale is the largest entry over all staged terms, or ``floor_scale``
    when that is larger (used by sums so cancellation residue is dropped).
    """
    if not terms:
        return {}
    scale = max(max(np.abs(m).max() for m in terms.values()), floor_scale)
    tol = ZERO_RTOL * scale
    return {k: m for k, m in terms.items() if np.abs(m).max() > tol}


def zero_operator(dim: int, omega_d: float | None = None) -> GradedOperator:
    return GradedOperator(dim, {}, omega_d)


def identity_operator(dim: int, omega_d: float | None = None) -> GradedOperator:
    return GradedOperator(dim, {(0, 0): np.eye(dim)}, omega_d)


def commutator(a: GradedOperator, b: GradedOperator) -> GradedOperator:
    """[a, b] = a@b - b@a under the graded product."""
    return (a @ b) - (b @ a)


# ---------------------------------------------------------------------------
# Compositions
# ---------------------------------------------------------------------------


class Composition(NamedTuple):
    """Ordered integer tuple indexing one nested-commutator chain.

    ``head`` is the order of the base operator (0 allowed only for the
    unperturbed base); ``tail`` holds the orders of the successive generator
    factors.  head + sum(tail) is the total order, len(tail) the nestedness.
    """

    head: int
    tail: tuple[int, ...] = ()

    @property
    def order(self) -> int:
        return self.head + sum(self.tail)

    @property
    def nestedness(self) -> int:
        return len(self.tail)

    def prefix(self) -> "Composition":
        if not self.tail:
            raise ValueError("a bare composition has no prefix")
        return Composition(self.head, self.tail[:-1])

    def as_tuple(self) -> tuple[int, ...]:
        return (self.head, *self.tail)


@lru_cache(maxsize=None)
def positive_compositions(n: int) -> tuple[tuple[int, ...], ...]:
    """All ordered tuples of positive integers summing to n (2^(n-1) of them).

    n = 0 yields the single empty tuple.  Ordered by increasing length, then
    lexicographically.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return ((),)
    out: list[tuple[int, ...]] = []
    for first in range(1, n + 1):
        for rest in positive_compositions(n - first):
            out.append((first, *rest))
    out.sort(key=lambda t: (len(t), t))
    return tuple(out)


@lru_cache(maxsize=None)
def enumerate_compositions(n: int, allow_zero_head: bool) -> tuple[Composition, ...]:
    """All compositions (head; tail) of total order n.

    Tail parts are >= 1; the head is >= 0 when ``allow_zero_head`` else >= 1.
    Deterministic order: ascending length, then lexicographic on the full
    (head, *tail) tuple.  The count is 2^n with a zero head allowed and
    2^(n-1) without.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    lo = 0 if allow_zero_head else 1
    out = [
        Composition(head, tail)
        for head in range(lo, n + 1)
        for tail in positive_compositions(n - head)
    ]
    out.sort(key=lambda c: (1 + len(c.tail), c.as_tuple()))
    return tuple(out)


# ---------------------------------------------------------------------------
# Nested commutator engine
# ---------------------------------------------------------------------------


class CommutatorCache:
    """Memo table for nested-commutator chains, shared across one run.

    Entries are keyed by (base tag, Composition); the entry for
    (h; s1..sm) is the commutator of the entry for (h; s1..s_{m-1}) with
    S^(sm).  Confined to a single transformation run (single writer).
    """

    def __init__(self) -> None:
        self.entries: dict[tuple[str, Composition], GradedOperator] = {}
        self.hits = 0
        self.misses = 0

    def __len__(self) -> int:
        return len(self.entries)


def nested_commutator(
    base: Mapping[int, GradedOperator],
    comp: Composition,
    generator: Mapping[int, GradedOperator],
    cache: CommutatorCache,
    tag: str = "H",
) -> GradedOperator:
    """Evaluate [...[base^(head), S^(s1)], ..., S^(sm)] with prefix caching.

    ``base`` maps orders to single-order operators; ``generator`` maps orders
    to solved generator terms.  Raises KeyError when the base order is absent
    and LookupError when a referenced generator order has not been solved.
    """
    key = (tag, comp)
    found = cache.entries.get(key)
    if found is not None:
        cache.hits += 1
        return found
    cache.misses += 1
    if not comp.tail:
        if comp.head not in base:
            raise KeyError(f"base series has no order-{comp.head} term")
        value = base[comp.head]
    else:
        left = nested_commutator(base, comp.prefix(), generator, cache, tag)
        s_order = comp.tail[-1]
        if s_order not in generator:
            raise LookupError(
                f"generator order {s_order} referenced before being solved"
            )
        value = commutator(left, generator[s_order])
    cache.entries[key] = value
    return value
