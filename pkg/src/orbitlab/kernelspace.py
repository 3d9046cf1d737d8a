"""Finite marked colored kernel spaces: twins, quotients, exact laws, isomorphism.

A finite kernel space is a weighted atom set with real vertex marks (one
value per atom per mark label) and real kernels (one matrix per color
label).  Two atoms are twins when no mark and no kernel row or column
separates them; merging twins yields the canonical twin-free quotient, which
generates the same exchangeable array law.  All of this is computed exactly
on atoms: masses are handled as exact rationals whenever possible, so law
comparisons are exact dictionary equality.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .arrays import BudgetError
from .joinings import Joining
from .systems import CyclicRotation

Mass = Union[Fraction, float]

#: Twin tolerance defaults: exact in rational mode, loose in float mode.  Any
#: tolerance above zero is an engineering approximation of an exact relation,
#: so it is recorded in every result.
DEFAULT_REAL_TOL = 1e-9


class ToleranceError(RuntimeError):
    """Merged atoms disagree beyond the tolerance used to merge them."""


@dataclass
class FiniteKernelSpace:
    masses: Tuple[Mass, ...]
    marks: Dict[str, np.ndarray]    # label -> (size,)
    kernels: Dict[str, np.ndarray]  # label -> (size, size)

    def __post_init__(self):
        self.masses = tuple(self.masses)
        k = len(self.masses)
        if k == 0:
            raise ValueError("a kernel space needs at least one atom")
        if any((m <= 0) for m in self.masses):
            raise ValueError("atom masses must be positive")
        total = sum(self.masses, Fraction(0) if self.exact else 0.0)
        if self.exact:
            if total != 1:
                raise ValueError(f"exact masses must sum to 1, got {total}")
        elif abs(float(total) - 1.0) > 1e-12:
            raise ValueError(f"masses must sum to 1 within 1e-12, got {total}")
        self.marks = {str(a): np.asarray(v, dtype=float) for a, v in self.marks.items()}
        self.kernels = {str(c): np.asarray(v, dtype=float) for c, v in self.kernels.items()}
        for a, v in self.marks.items():
            if v.shape != (k,):
                raise ValueError(f"mark {a} must have one value per atom, got shape {v.shape}")
        for c, v in self.kernels.items():
            if v.shape != (k, k):
                raise ValueError(f"kernel {c} must be a {k} x {k} matrix, got shape {v.shape}")

    @property
    def size(self) -> int:
        return len(self.masses)

    @property
    def exact(self) -> bool:
        return all(isinstance(m, Fraction) for m in self.masses)

    def exact_masses(self) -> Tuple[Fraction, ...]:
        """Masses as exact rationals (floats convert exactly)."""
        return tuple(m if isinstance(m, Fraction) else Fraction(m) for m in self.masses)

    def relabel(self, perm: Sequence[int]) -> "FiniteKernelSpace":
        """The same space with atom i renamed to position perm.index(i)."""
        perm = list(perm)
        if sorted(perm) != list(range(self.size)):
            raise ValueError(f"not a permutation of {self.size} atoms: {perm}")
        idx = np.asarray(perm)
        return FiniteKernelSpace(
            tuple(self.masses[i] for i in perm),
            {a: v[idx] for a, v in self.marks.items()},
            {c: v[np.ix_(idx, idx)] for c, v in self.kernels.items()},
        )


@dataclass
class TwinPartition:
    blocks: Tuple[Tuple[int, ...], ...]
    tolerance: float

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)


def _default_tol(space: FiniteKernelSpace, tol: Optional[float]) -> float:
    if tol is None:
        return 0.0 if space.exact else DEFAULT_REAL_TOL
    if tol < 0:
        raise ValueError(f"tolerance must be >= 0, got {tol}")
    return float(tol)


def _twin_deviation(space: FiniteKernelSpace, i: int, j: int) -> float:
    """Largest mark/row/column discrepancy between atoms i and j."""
    dev = 0.0
    for v in space.marks.values():
        dev = max(dev, abs(float(v[i] - v[j])))
    for kmat in space.kernels.values():
        dev = max(dev, float(np.max(np.abs(kmat[i, :] - kmat[j, :]))))
        dev = max(dev, float(np.max(np.abs(kmat[:, i] - kmat[:, j]))))
    return dev


def twin_partition(space: FiniteKernelSpace, tol: Optional[float] = None) -> TwinPartition:
    """Coarsest partition merging atoms indistinguishable within tol.

    Atoms are twins when every mark agrees and every kernel row and column
    agrees entrywise (all atoms have positive mass, so "almost every" reads
    "every" here).  For tol > 0 the pairwise relation is closed transitively.
    """
    tol = _default_tol(space, tol)
    k = space.size
    parent = list(range(k))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i in range(k):
        for j in range(i + 1, k):
            if _twin_deviation(space, i, j) <= tol:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
    groups: Dict[int, List[int]] = {}
    for i in range(k):
        groups.setdefault(find(i), []).append(i)
    blocks = tuple(tuple(groups[r]) for r in sorted(groups))
    return TwinPartition(blocks, tol)


def twin_quotient(space: FiniteKernelSpace, tol: Optional[float] = None) -> FiniteKernelSpace:
    """Merge twin blocks: masses add, marks and kernels come from representatives.

    Raises ToleranceError when transitive merging chained atoms that disagree
    beyond the tolerance, which would make the inherited values ill-defined.
    """
    tol = _default_tol(space, tol)
    part = twin_partition(space, tol)
    for block in part.blocks:
        for i, j in itertools.combinations(block, 2):
            dev = _twin_deviation(space, i, j)
            if dev > tol:
                raise ToleranceError(
                    f"atoms {i} and {j} merged transitively but disagree by {dev:g} > {tol:g}"
                )
    reps = [block[0] for block in part.blocks]
    idx = np.asarray(reps)
    exact = space.exact
    masses = tuple(
        sum((space.masses[i] for i in block), Fraction(0) if exact else 0.0)
        for block in part.blocks
    )
    return FiniteKernelSpace(
        masses,
        {a: v[idx] for a, v in space.marks.items()},
        {c: v[np.ix_(idx, idx)] for c, v in space.kernels.items()},
    )


def exact_array_law(space: FiniteKernelSpace, n: int,
                    marks: Optional[Sequence[str]] = None,
                    colors: Optional[Sequence[str]] = None,
                    cap: int = 10 ** 6) -> Dict[Tuple[float, ...], Fraction]:
    """Exact joint law of marks and kernels over ordered n-tuples of atoms.

    Keys list, per particle, the selected mark values in label order, then for
    each selected color the kernel values over ordered distinct pairs in
    lexicographic order.  Masses are exact rationals, so two spaces generate
    equal laws iff the returned dictionaries are equal.
    """
    if n < 1:
        raise ValueError(f"particle count must be >= 1, got {n}")
    if space.size ** n > cap:
        raise BudgetError(f"enumeration of {space.size ** n} tuples exceeds cap {cap}")
    mark_labels = sorted(space.marks) if marks is None else list(marks)
    color_labels = sorted(space.kernels) if colors is None else list(colors)
    masses = space.exact_masses()
    law: Dict[Tuple[float, ...], Fraction] = {}
    for combo in itertools.product(range(space.size), repeat=n):
        mass = Fraction(1)
        for i in combo:
            mass *= masses[i]
        key: List[float] = []
        for i in combo:
            key.extend(float(space.marks[a][i]) for a in mark_labels)
        for c in color_labels:
            kmat = space.kernels[c]
            key.extend(
                float(kmat[combo[s], combo[t]])
                for s in range(n) for t in range(n) if s != t
            )
        tk = tuple(key)
        law[tk] = law.get(tk, Fraction(0)) + mass
    return law


@dataclass
class IsomorphismResult:
    isomorphic: bool
    witness: Optional[Tuple[int, ...]] = None  # witness[i] = matched atom in b
    checked: int = 0

    def __bool__(self) -> bool:
        return self.isomorphic


def kernel_isomorphic(a: FiniteKernelSpace, b: FiniteKernelSpace,
                      tol: Optional[float] = None, cap: int = 10) -> IsomorphismResult:
    """Search mass-preserving atom bijections matching all marks and kernels.

    Backtracking over candidate matches, pruned by (mass, marks, sorted kernel
    row/column profiles).  Exhaustive within the atom-count cap: a negative
    answer is a refusal over all bijections.  Mass comparison is exact when
    both spaces are rational.
    """
    if a.size > cap or b.size > cap:
        raise BudgetError(f"atom counts {a.size}, {b.size} exceed brute-force cap {cap}")
    if a.size != b.size:
        return IsomorphismResult(False)
    if sorted(a.marks) != sorted(b.marks) or sorted(a.kernels) != sorted(b.kernels):
        raise ValueError("spaces must share mark and color label sets")
    tol = max(_default_tol(a, tol), _default_tol(b, tol))
    exact = a.exact and b.exact
    k = a.size
    mark_labels = sorted(a.marks)
    color_labels = sorted(a.kernels)

    def profile(space: FiniteKernelSpace, i: int):
        rows = [tuple(np.sort(np.round(space.kernels[c][i, :], 9))) for c in color_labels]
        cols = [tuple(np.sort(np.round(space.kernels[c][:, i], 9))) for c in color_labels]
        return rows, cols

    prof_b = [profile(b, j) for j in range(k)]
    candidates: List[List[int]] = []
    for i in range(k):
        rows_i, cols_i = profile(a, i)
        cand = []
        for j in range(k):
            if exact:
                if a.exact_masses()[i] != b.exact_masses()[j]:
                    continue
            elif abs(float(a.masses[i]) - float(b.masses[j])) > max(tol, 1e-12):
                continue
            if any(abs(a.marks[l][i] - b.marks[l][j]) > tol for l in mark_labels):
                continue
            if tol == 0.0 and (rows_i, cols_i) != prof_b[j]:
                continue
            cand.append(j)
        if not cand:
            return IsomorphismResult(False)
        candidates.append(cand)

    order = sorted(range(k), key=lambda i: len(candidates[i]))
    assigned_a: List[int] = []
    match = [-1] * k
    used = [False] * k
    checked = 0

    def consistent(i: int, j: int) -> bool:
        for c in color_labels:
            ka, kb = a.kernels[c], b.kernels[c]
            if abs(ka[i, i] - kb[j, j]) > tol:
                return False
            for i2 in assigned_a:
                j2 = match[i2]
                if abs(ka[i, i2] - kb[j, j2]) > tol or abs(ka[i2, i] - kb[j2, j]) > tol:
                    return False
        return True

    def search(pos: int) -> bool:
        nonlocal checked
        if pos == k:
            return True
        i = order[pos]
        for j in candidates[i]:
            if used[j]:
                continue
            checked += 1
            if not consistent(i, j):
                continue
            match[i] = j
            used[j] = True
            assigned_a.append(i)
            if search(pos + 1):
                return True
            assigned_a.pop()
            used[j] = False
            match[i] = -1
        return False

    if search(0):
        return IsomorphismResult(True, tuple(match), checked)
    return IsomorphismResult(False, None, checked)


def joining_to_kernel_space(joining: Joining, cutoff: int) -> FiniteKernelSpace:
    """Kernel space of a finitely supported cyclic joining.

    Atoms are the support pairs with their masses.  For orbit times
    0 <= a, b < cutoff, marks record same-particle orbit distances in each
    coordinate and kernels the cross-particle ones.
    """
    if cutoff < 1:
        raise ValueError(f"orbit cutoff must be >= 1, got {cutoff}")
    X, Y = joining.left, joining.right
    if not (isinstance(X, CyclicRotation) and isinstance(Y, CyclicRotation)):
        raise TypeError("kernel spaces from joinings require cyclic systems")
    support = joining.exact_support()
    xs = np.array([x for x, _, _ in support], dtype=np.int64)
    ys = np.array([y for _, y, _ in support], dtype=np.int64)
    masses = tuple(mass for _, _, mass in support)
    marks: Dict[str, np.ndarray] = {}
    kernels: Dict[str, np.ndarray] = {}
    for ta in range(cutoff):
        for tb in range(cutoff):
            ox_a, ox_b = (xs + ta * X.g) % X.q, (xs + tb * X.g) % X.q
            oy_a, oy_b = (ys + ta * Y.g) % Y.q, (ys + tb * Y.g) % Y.q
            marks[f"MX[{ta},{tb}]"] = X.dist_numerator(ox_a, ox_b) / X.q
            marks[f"MY[{ta},{tb}]"] = Y.dist_numerator(oy_a, oy_b) / Y.q
            kernels[f"KX[{ta},{tb}]"] = X.dist_numerator(ox_a[:, None], ox_b[None, :]) / X.q
            kernels[f"KY[{ta},{tb}]"] = Y.dist_numerator(oy_a[:, None], oy_b[None, :]) / Y.q
    return FiniteKernelSpace(masses, marks, kernels)


# -- JSON file format -------------------------------------------------------------

def _mass_to_json(m: Mass):
    return f"{m.numerator}/{m.denominator}" if isinstance(m, Fraction) else float(m)


def _mass_from_json(v) -> Mass:
    if isinstance(v, str):
        return Fraction(v)
    if isinstance(v, (int, float)):
        return float(v)
    raise ValueError(f"mass must be a number or a fraction string, got {v!r}")


def save_space(space: FiniteKernelSpace, path) -> None:
    doc = {
        "masses": [_mass_to_json(m) for m in space.masses],
        "marks": {a: v.tolist() for a, v in space.marks.items()},
        "kernels": {c: v.tolist() for c, v in space.kernels.items()},
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=1, sort_keys=True)
        f.write("\n")


def load_space(path) -> FiniteKernelSpace:
    with open(path) as f:
        doc = json.load(f)
    for key in ("masses", "marks", "kernels"):
        if key not in doc:
            raise ValueError(f"kernel space file is missing the '{key}' field")
    return FiniteKernelSpace(
        tuple(_mass_from_json(v) for v in doc["masses"]),
        {a: np.asarray(v, dtype=float) for a, v in doc["marks"].items()},
        {c: np.asarray(v, dtype=float) for c, v in doc["kernels"].items()},
    )
