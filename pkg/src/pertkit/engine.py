"""Generator conditions and the SWT / FD / ACE transformation routines.

All routines share one iterative loop.  At order n the known content K_n of
the transformed Hamiltonian is assembled from cached nested-commutator
chains (coefficient 1/m! for a chain of nestedness m, and -i*hbar/(m+1)! for
chains whose base is a time derivative of an already-solved generator term).
The part of K_n landing on masked entries fixes the generator order S^(n)
through the elementwise condition

    S_ij,k = T_ij,k / (E_j - E_i - hbar*k*omega_d),

which solves [H0, S] - i*hbar*dS/dt = -T in the eigenbasis of the diagonal
unperturbed part.  The kept (unmasked) part of K_n is the order-n correction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import DegenerateSpectrum, PertError, ResonantDenominator
from .graded import (
    CommutatorCache,
    Composition,
    GradedOperator,
    ZERO_RTOL,
    enumerate_compositions,
    nested_commutator,
    zero_operator,
)

#: Default relative tolerance declaring two levels degenerate.
DEFAULT_DEG_TOL = 1e-9
#: Default relative tolerance declaring a denominator resonant.
DEFAULT_RES_TOL = 1e-9


@dataclass(frozen=True)
class EigenFrame:
    """Spectrum of the diagonal unperturbed part, with degeneracy classes."""

    energies: np.ndarray
    deg_tol: float
    classes: tuple[tuple[int, ...], ...]

    @staticmethod
    def from_energies(energies: np.ndarray, deg_tol: float | None = None) -> "EigenFrame":
        e = np.array(energies, dtype=float)  # own copy; frozen below
        scale = np.abs(e).max() if e.size else 0.0
        tol = deg_tol if deg_tol is not None else DEFAULT_DEG_TOL * (scale or 1.0)
        order = np.argsort(e, kind="stable")
        classes: list[list[int]] = []
        for idx in order:
            if classes and abs(e[idx] - e[classes[-1][-1]]) <= tol:
                classes[-1].append(int(idx))
            else:
                classes.append([int(idx)])
        frozen = tuple(tuple(sorted(c)) for c in classes)
        e.flags.writeable = False
        return EigenFrame(e, tol, frozen)

    @property
    def dim(self) -> int:
        return len(self.energies)

    def energy_scale(self) -> float:
        s = float(np.abs(self.energies).max()) if self.dim else 0.0
        return s or 1.0


class Mask:
    """Hermitian-symmetric boolean pattern of couplings to eliminate."""

    __slots__ = ("eliminate",)

    def __init__(self, eliminate: np.ndarray):
        el = np.asarray(eliminate, dtype=bool).copy()
        if el.ndim != 2 or el.shape[0] != el.shape[1]:
            raise ValueError(f"mask must be square, got shape {el.shape}")
        if not np.array_equal(el, el.T):
            raise ValueError("mask must be symmetric")
        if el.diagonal().any():
            raise ValueError("mask must not target diagonal entries")
        el.flags.writeable = False
        self.eliminate = el

    @property
    def dim(self) -> int:
        return self.eliminate.shape[0]

    @property
    def is_empty(self) -> bool:
        return not self.eliminate.any()

    @staticmethod
    def full_off_diagonal(dim: int) -> "Mask":
        return Mask(~np.eye(dim, dtype=bool))

    @staticmethod
    def block_off_diagonal(block_sizes: list[int] | tuple[int, ...]) -> "Mask":
        """Mask every entry connecting two different contiguous blocks."""
        sizes = [int(s) for s in block_sizes]
        if any(s < 1 for s in sizes):
            raise ValueError("block sizes must be positive")
        labels = np.repeat(np.arange(len(sizes)), sizes)
        return Mask(labels[:, None] != labels[None, :])

    @staticmethod
    def from_pairs(dim: int, pairs) -> "Mask":
        el = np.zeros((dim, dim), dtype=bool)
        for i, j in pairs:
            if i == j:
                raise ValueError("mask pairs must be off-diagonal")
            el[i, j] = el[j, i] = True
        return Mask(el)

    def project(self, g: GradedOperator) -> GradedOperator:
        """Keep only masked entries, per (order, harmonic) key."""
        return GradedOperator(
            g.dim,
            {key: np.where(self.eliminate, mat, 0.0) for key, mat in g.items()},
            g.omega_d,
        )

    def complement_project(self, g: GradedOperator) -> GradedOperator:
        return GradedOperator(
            g.dim,
            {key: np.where(self.eliminate, 0.0, mat) for key, mat in g.items()},
            g.omega_d,
        )


@dataclass
class Diagnostics:
    cache_hits: int = 0
    cache_misses: int = 0
    notes: list[str] = field(default_factory=list)


@dataclass
class TransformResult:
    """Per-order corrections, the generator series and the frame metadata."""

    corrections: dict[int, GradedOperator]
    generator: dict[int, GradedOperator]
    frame: EigenFrame
    mask: Mask
    method: str
    max_order: int
    hbar: float
    omega_d: float | None
    diagnostics: Diagnostics

    @property
    def dim(self) -> int:
        return self.frame.dim

    def effective_hamiltonian(self, up_to_order: int | None = None) -> GradedOperator:
        """Sum of the corrections through the given order (default: all)."""
        top = self.max_order if up_to_order is None else up_to_order
        if top > self.max_order:
            raise ValueError(f"order {top} exceeds solved order {self.max_order}")
        total = zero_operator(self.dim, self.omega_d)
        for n, corr in self.corrections.items():
            if n <= top:
                total = total + corr
        return total


def solve_generator_order(
    target: GradedOperator,
    frame: EigenFrame,
    mask: Mask,
    hbar: float = 1.0,
    omega_d: float | None = None,
    res_tol: float = DEFAULT_RES_TOL,
) -> GradedOperator:
    """Solve [H0, S] - i*hbar*dS/dt = -target elementwise in the eigenbasis.

    ``target`` must be hermitian-graded, live at a single order and be
    supported on masked entries only (callers project first).  Masked entries
    whose target is zero get S = 0 even when the denominator vanishes; a
    nonzero target on a resonant denominator raises ResonantDenominator.
    """
    if target.is_zero:
        return zero_operator(frame.dim, omega_d)
    orders = target.orders()
    if len(orders) != 1:
        raise ValueError(f"target must hold a single order, found {orders}")
    (order,) = orders
    energies = frame.energies
    scale = frame.energy_scale()
    out: dict[tuple[int, int], np.ndarray] = {}
    for (_, k), mat in target.items():
        if k != 0 and omega_d is None:
            raise ValueError("omega_d is required for nonzero harmonics")
        shift = hbar * k * (omega_d or 0.0)
        denom = energies[None, :] - energies[:, None] - shift
        significant = mask.eliminate & (np.abs(mat) > ZERO_RTOL * np.abs(mat).max())
        resonant = significant & (np.abs(denom) < res_tol * scale)
        if resonant.any():
            i, j = np.argwhere(resonant)[0]
            raise ResonantDenominator(int(i), int(j), k, float(denom[i, j]), order)
        safe = np.where(significant, denom, 1.0)
        out[(order, k)] = np.where(significant, mat / safe, 0.0)
    return GradedOperator(frame.dim, out, omega_d)


# ---------------------------------------------------------------------------
# Shared transformation loop
# ---------------------------------------------------------------------------


def _merged_omega(*ops: GradedOperator) -> float | None:
    omega = None
    for op in ops:
        if op.omega_d is not None:
            if omega is not None and op.omega_d != omega:
                raise ValueError("omega_d mismatch between inputs")
            omega = op.omega_d
    return omega


def _require_static_diagonal_order0(h: GradedOperator) -> np.ndarray:
    """Validate the order-0 part: one static, diagonal matrix."""
    for (j, k) in h.keys():
        if j == 0 and k != 0:
            raise PertError("the unperturbed part must be static (harmonic 0)")
    if (0, 0) not in h.keys():
        raise PertError("an order-0 term is required")
    h0 = h.term(0, 0)
    off = h0 - np.diag(np.diag(h0))
    if np.abs(off).max() > ZERO_RTOL * max(np.abs(h0).max(), 1.0):
        raise PertError("the order-0 part must be supplied diagonal")
    diag = np.diag(h0)
    if np.abs(diag.imag).max() > 1e-12 * max(np.abs(diag).max(), 1.0):
        raise PertError("the order-0 diagonal must be real")
    return diag.real.copy()


def _assemble_known(
    n: int,
    bases: list[tuple[str, Mapping[int, GradedOperator]]],
    generator: dict[int, GradedOperator],
    d_generator: dict[int, GradedOperator],
    cache: CommutatorCache,
    hbar: float,
    time_dependent: bool,
    dim: int,
    omega_d: float | None,
) -> GradedOperator:
    """Order-n content of the transformed Hamiltonian, excluding S^(n) terms."""
    total = zero_operator(dim, omega_d)
    for tag, series in bases:
        allow_zero_head = tag == "H"
        for comp in enumerate_compositions(n, allow_zero_head):
            if tag == "H" and comp == Composition(0, (n,)):
                continue  # [H0, S^(n)] enters through the generator solve
            if comp.head not in series:
                continue
            chain = nested_commutator(series, comp, generator, cache, tag)
            if chain.is_zero:
                continue
            total = total + chain * (1.0 / math.factorial(comp.nestedness))
    if time_dependent:
        for comp in enumerate_compositions(n, allow_zero_head=False):
            if comp == Composition(n, ()):
                continue  # -i*hbar*dS^(n)/dt enters through the generator solve
            if comp.head not in d_generator:
                continue
            chain = nested_commutator(d_generator, comp, generator, cache, "dS")
            if chain.is_zero:
                continue
            total = total + chain * (-1j * hbar / math.factorial(comp.nestedness + 1))
    return total


def _transform(
    method: str,
    bases: list[tuple[str, Mapping[int, GradedOperator]]],
    frame: EigenFrame,
    mask: Mask,
    max_order: int,
    hbar: float,
    omega_d: float | None,
    res_tol: float,
    time_dependent: bool,
    order0: GradedOperator,
) -> TransformResult:
    if max_order < 0:
        raise ValueError("max_order must be >= 0")
    cache = CommutatorCache()
    generator: dict[int, GradedOperator] = {}
    d_generator: dict[int, GradedOperator] = {}
    corrections: dict[int, GradedOperator] = {0: order0}
    for n in range(1, max_order + 1):
        known = _assemble_known(
            n, bases, generator, d_generator, cache, hbar,
            time_dependent, frame.dim, omega_d,
        )
        masked = mask.project(known)
        s_n = solve_generator_order(masked, frame, mask, hbar, omega_d, res_tol)
        generator[n] = s_n
        if time_dependent:
            ds = s_n.time_derivative()
            if not ds.is_zero:
                d_generator[n] = ds
        corrections[n] = known - masked
    diagnostics = Diagnostics(cache_hits=cache.hits, cache_misses=cache.misses)
    return TransformResult(
        corrections=corrections,
        generator=generator,
        frame=frame,
        mask=mask,
        method=method,
        max_order=max_order,
        hbar=hbar,
        omega_d=omega_d,
        diagnostics=diagnostics,
    )


# ---------------------------------------------------------------------------
# Public routines
# ---------------------------------------------------------------------------


def run_swt(
    h_blocks: GradedOperator,
    v: GradedOperator,
    block_sizes: list[int] | tuple[int, ...],
    max_order: int,
    hbar: float = 1.0,
    deg_tol: float | None = None,
    res_tol: float = DEFAULT_RES_TOL,
) -> TransformResult:
    """Schrieffer-Wolff transformation eliminating inter-block couplings.

    ``h_blocks`` must be block-diagonal with respect to ``block_sizes`` and
    carry a static diagonal order-0 part; ``v`` holds the perturbative
    couplings (orders >= 1).  Block-diagonal content of ``v`` is legal and is
    simply retained in the corrections.
    """
    if h_blocks.dim != v.dim:
        raise ValueError(f"dimension mismatch: {h_blocks.dim} vs {v.dim}")
    mask = Mask.block_off_diagonal(block_sizes)
    if mask.dim != h_blocks.dim:
        raise ValueError("block sizes must sum to the operator dimension")
    if not mask.project(h_blocks).is_zero:
        raise PertError("h_blocks has content outside its declared blocks")
    if 0 in v.orders():
        raise PertError("the perturbation must not carry an order-0 term")
    omega_d = _merged_omega(h_blocks, v)
    diag = _require_static_diagonal_order0(h_blocks)
    frame = EigenFrame.from_energies(diag, deg_tol)
    time_dependent = any(k != 0 for k in (*h_blocks.harmonics(), *v.harmonics()))
    bases = [("H", h_blocks.by_order()), ("V", v.by_order())]
    return _transform(
        "swt", bases, frame, mask, max_order, hbar, omega_d, res_tol,
        time_dependent, h_blocks.order_part(0),
    )


def run_fd(
    h: GradedOperator,
    max_order: int,
    hbar: float = 1.0,
    deg_tol: float | None = None,
    res_tol: float = DEFAULT_RES_TOL,
) -> TransformResult:
    """Full diagonalization: eliminate every off-diagonal coupling.

    Requires the order-0 part diagonal and nondegenerate on every statically
    coupled pair of levels.
    """
    mask = Mask.full_off_diagonal(h.dim)
    diag = _require_static_diagonal_order0(h)
    frame = EigenFrame.from_energies(diag, deg_tol)
    _check_no_degenerate_coupling(h, frame)
    omega_d = _merged_omega(h)
    time_dependent = any(k != 0 for k in h.harmonics())
    return _transform(
        "fd", [("H", h.by_order())], frame, mask, max_order, hbar, omega_d,
        res_tol, time_dependent, h.order_part(0),
    )


def run_ace(
    h: GradedOperator,
    mask: Mask,
    max_order: int,
    hbar: float = 1.0,
    deg_tol: float | None = None,
    res_tol: float = DEFAULT_RES_TOL,
) -> TransformResult:
    """Arbitrary-coupling elimination: zero exactly the masked entries.

    Unmasked off-diagonal content is retained in the corrections.  An empty
    mask yields the identity transformation.
    """
    if mask.dim != h.dim:
        raise ValueError(f"mask dimension {mask.dim} does not match operator {h.dim}")
    diag = _require_static_diagonal_order0(h)
    frame = EigenFrame.from_energies(diag, deg_tol)
    omega_d = _merged_omega(h)
    time_dependent = any(k != 0 for k in h.harmonics())
    return _transform(
        "ace", [("H", h.by_order())], frame, mask, max_order, hbar, omega_d,
        res_tol, time_dependent, h.order_part(0),
    )


def _check_no_degenerate_coupling(h: GradedOperator, frame: EigenFrame) -> None:
    """Reject static input couplings between degenerate levels."""
    degenerate = (
        np.abs(frame.energies[:, None] - frame.energies[None, :]) <= frame.deg_tol
    ) & ~np.eye(frame.dim, dtype=bool)
    if not degenerate.any():
        return
    for (j, k), mat in h.items():
        if j == 0 or k != 0:
            continue
        coupled = degenerate & (np.abs(mat) > ZERO_RTOL * max(np.abs(mat).max(), 1.0))
        if coupled.any():
            i, jdx = np.argwhere(coupled)[0]
            raise DegenerateSpectrum(int(i), int(jdx), float(frame.energies[i]))


def rotate_operator(
    operator: GradedOperator,
    result: TransformResult,
    up_to_order: int,
) -> GradedOperator:
    """Rotate an arbitrary operator into the transformed frame.

    Returns exp(-S) O exp(S) truncated at total order ``up_to_order``,
    assembled from cached nested-commutator chains with base O.
    """
    if up_to_order > result.max_order:
        raise ValueError(
            f"rotation order {up_to_order} exceeds solved order {result.max_order}"
        )
    if operator.dim != result.dim:
        raise ValueError("operator dimension does not match the frame")
    omega_d = operator.omega_d if operator.omega_d is not None else result.omega_d
    cache = CommutatorCache()
    base = operator.by_order()
    total = base.get(0, zero_operator(operator.dim, omega_d))
    for n in range(1, up_to_order + 1):
        for comp in enumerate_compositions(n, allow_zero_head=True):
            if comp.head not in base:
                continue
            if any(s > result.max_order for s in comp.tail):
                continue
            chain = nested_commutator(base, comp, result.generator, cache, "O")
            if chain.is_zero:
                continue
            total = total + chain * (1.0 / math.factorial(comp.nestedness))
    return total
