"""Samplable joinings of two systems with declared marginals and invariance.

A joining couples the invariant laws of two systems and is invariant under
the joint dynamics.  Sampling produces pairs of orbit extensions so that
downstream code can read consistent orbit segments of both coordinates.
The catalogue is the family used by the experiments: product, diagonal,
graph joinings of group rotations, the relatively independent joining over a
shared factor realized on explicit product systems, and convex mixtures.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from fractions import Fraction
from typing import Any, List, Sequence, Tuple

import numpy as np

from .systems import CircleRotation, CyclicRotation, ProductSystem, System, same_system


class Joining(ABC):
    """A samplable coupling of ``left`` and ``right`` with invariant marginals."""

    left: System
    right: System
    kind: str
    jid: str

    @abstractmethod
    def sample_ext_pairs(self, rng: np.random.Generator, count: int, m: int) -> Tuple[Any, Any]:
        """``count`` i.i.d. coupled pairs of orbit extensions supporting m iterates."""

    def exact_support(self) -> List[Tuple[int, int, Fraction]]:
        """Atoms (x, y, mass) for finitely supported joinings of cyclic systems."""
        raise TypeError(f"{self.jid} has no exact finite support")

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"<Joining {self.jid}>"


class ProductJoining(Joining):
    kind = "product"

    def __init__(self, X: System, Y: System):
        self.left = X
        self.right = Y
        self.jid = f"product[{X.sid};{Y.sid}]"

    def sample_ext_pairs(self, rng, count, m):
        return self.left.sample_ext(rng, count, m), self.right.sample_ext(rng, count, m)

    def exact_support(self):
        ax, ay = _cyclic_atoms(self.left), _cyclic_atoms(self.right)
        return [(i, j, mi * mj) for i, mi in ax for j, mj in ay]


class DiagonalJoining(Joining):
    kind = "diagonal"

    def __init__(self, X: System, Y: System | None = None):
        Y = X if Y is None else Y
        if not same_system(X, Y):
            raise ValueError(f"diagonal joining needs identical systems, got {X.sid} and {Y.sid}")
        self.left = X
        self.right = Y
        self.jid = f"diagonal[{X.sid}]"

    def sample_ext_pairs(self, rng, count, m):
        ext = self.left.sample_ext(rng, count, m)
        return ext, ext

    def exact_support(self):
        return [(i, i, mass) for i, mass in _cyclic_atoms(self.left)]


class GraphJoining(Joining):
    """Pushforward of the invariant law under x -> (x, x + h) on a group rotation."""

    kind = "graph"

    def __init__(self, X: System, h):
        if not isinstance(X, (CircleRotation, CyclicRotation)):
            raise ValueError(f"graph joinings require a group rotation, got {X.sid}")
        if isinstance(X, CyclicRotation):
            h = int(h) % X.q
        else:
            h = float(h) % 1.0
        self.left = X
        self.right = X
        self.h = h
        self.jid = f"graph[{X.sid};h={h!r}]"

    def sample_ext_pairs(self, rng, count, m):
        ext = self.left.sample_ext(rng, count, m)
        return ext, self.left.translate_ext(ext, self.h)

    def exact_support(self):
        q = _cyclic_order(self.left)
        return [(i, (i + self.h) % q, mass) for i, mass in _cyclic_atoms(self.left)]


class RelativelyIndependentJoining(Joining):
    """Coupling of Z x A and Z x B that shares the Z draw and is independent given it."""

    kind = "relindep"

    def __init__(self, Z: System, A: System, B: System):
        self.factor = Z
        self.left = ProductSystem(Z, A)
        self.right = ProductSystem(Z, B)
        self.left_component = A
        self.right_component = B
        self.jid = f"relindep[{Z.sid};{A.sid};{B.sid}]"

    def sample_ext_pairs(self, rng, count, m):
        zext = self.factor.sample_ext(rng, count, m)
        aext = self.left_component.sample_ext(rng, count, m)
        bext = self.right_component.sample_ext(rng, count, m)
        return (zext, aext), (zext, bext)


class MixtureJoining(Joining):
    """Convex mixture: each draw picks a component with its weight, then samples it."""

    kind = "mixture"

    def __init__(self, components: Sequence[Joining], weights: Sequence[float]):
        components = list(components)
        weights = np.asarray(list(weights), dtype=float)
        if not components:
            raise ValueError("mixture needs at least one component")
        if len(components) != len(weights):
            raise ValueError("component and weight counts differ")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1")
        base = components[0]
        for c in components[1:]:
            if not (same_system(c.left, base.left) and same_system(c.right, base.right)):
                raise ValueError("mixture components must couple the same pair of systems")
        self.components = components
        self.weights = weights
        self.left = base.left
        self.right = base.right
        parts = ",".join(f"({w:.12g}){c.jid}" for w, c in zip(weights, components))
        self.jid = f"mixture[{parts}]"

    def sample_ext_pairs(self, rng, count, m):
        cut = np.cumsum(self.weights)
        choice = np.searchsorted(cut, rng.random(count), side="right")
        choice = np.minimum(choice, len(self.components) - 1)
        xs_pieces, ys_pieces = [], []
        for c, component in enumerate(self.components):
            idx = np.flatnonzero(choice == c)
            if idx.size == 0:
                continue
            ex, ey = component.sample_ext_pairs(rng, idx.size, m)
            xs_pieces.append((idx, ex))
            ys_pieces.append((idx, ey))
        return _ext_merge(xs_pieces, count), _ext_merge(ys_pieces, count)

    def exact_support(self):
        acc: dict[Tuple[int, int], Fraction] = {}
        for w, component in zip(self.weights, self.components):
            fw = Fraction(w).limit_denominator(10**12)
            if float(fw) != float(w):
                fw = Fraction(float(w))
            for i, j, mass in component.exact_support():
                key = (i, j)
                acc[key] = acc.get(key, Fraction(0)) + fw * mass
        return [(i, j, mass) for (i, j), mass in sorted(acc.items()) if mass > 0]


def _ext_merge(pieces: List[Tuple[np.ndarray, Any]], total: int) -> Any:
    """Scatter per-component extensions back to their sample indices."""
    first = pieces[0][1]
    if isinstance(first, tuple):
        return tuple(
            _ext_merge([(idx, ext[k]) for idx, ext in pieces], total) for k in range(len(first))
        )
    out = np.empty((total,) + first.shape[1:], dtype=first.dtype)
    for idx, ext in pieces:
        out[idx] = ext
    return out


def _cyclic_atoms(system: System) -> List[Tuple[int, Fraction]]:
    if not isinstance(system, CyclicRotation):
        raise TypeError(f"exact enumeration requires cyclic systems, got {system.sid}")
    return system.exact_atoms()


def _cyclic_order(system: System) -> int:
    if not isinstance(system, CyclicRotation):
        raise TypeError(f"exact enumeration requires cyclic systems, got {system.sid}")
    return system.q


def product_joining(X: System, Y: System) -> ProductJoining:
    return ProductJoining(X, Y)


def diagonal_joining(X: System, Y: System | None = None) -> DiagonalJoining:
    return DiagonalJoining(X, Y)


def graph_joining_rotation(X: System, h) -> GraphJoining:
    return GraphJoining(X, h)


def relindep_joining(Z: System, A: System, B: System) -> RelativelyIndependentJoining:
    return RelativelyIndependentJoining(Z, A, B)


def convex_mixture(components: Sequence[Joining], weights: Sequence[float]) -> MixtureJoining:
    return MixtureJoining(components, weights)
