"""Multi-particle orbit distance arrays, empirical laws, and observables.

One draw at spec (n, m, R) samples n independent pairs from a joining,
materializes the m-step orbit of each coordinate, and records

* ``dX[i, j, a, b]`` : left metric between iterate a of particle i and
  iterate b of particle j (``dY`` likewise on the right), and
* ``aX[i, a, r]``    : left metric from iterate a of particle i to the
  r-th anchor (``aY`` likewise), when R > 0.

Flattened storage order is dX, dY, aX, aY, each row-major; this order
defines the coordinate Euclidean metric used by the transport layer and is
part of the on-disk format.

Observables declare which array slices they need, so heavy projections
(long orbit averages) are evaluated without materializing full arrays.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import rng as rngmod
from .joinings import Joining
from .systems import System

# Soft cap on transient float temporaries in chunked distance evaluation.
_CHUNK_FLOATS = 2 ** 24


class BudgetError(RuntimeError):
    """Raised when a requested computation exceeds its configured budget."""


@dataclass(frozen=True)
class ArraySpec:
    """Array shape parameters: n particles, m orbit steps, R anchors (0 = unanchored)."""

    n: int
    m: int
    R: int = 0

    def __post_init__(self):
        if self.n < 1 or self.m < 1 or self.R < 0:
            raise ValueError(f"need n, m >= 1 and R >= 0, got {self}")

    @property
    def pair_dim(self) -> int:
        return self.n * self.n * self.m * self.m

    @property
    def anchor_dim(self) -> int:
        return self.n * self.m * self.R

    @property
    def flat_dim(self) -> int:
        return 2 * self.pair_dim + 2 * self.anchor_dim


@dataclass
class ArraySample:
    """One draw of the distance-array pair, with optional anchor blocks."""

    spec: ArraySpec
    dX: np.ndarray  # (n, n, m, m)
    dY: np.ndarray
    aX: np.ndarray  # (n, m, R)
    aY: np.ndarray

    def flatten(self) -> np.ndarray:
        return np.concatenate(
            [self.dX.ravel(), self.dY.ravel(), self.aX.ravel(), self.aY.ravel()]
        )

    @staticmethod
    def from_flat(spec: ArraySpec, flat: np.ndarray) -> "ArraySample":
        flat = np.asarray(flat, dtype=float)
        if flat.shape != (spec.flat_dim,):
            raise ValueError(f"expected flat length {spec.flat_dim}, got {flat.shape}")
        p, a = spec.pair_dim, spec.anchor_dim
        n, m, R = spec.n, spec.m, spec.R
        return ArraySample(
            spec,
            flat[:p].reshape(n, n, m, m),
            flat[p:2 * p].reshape(n, n, m, m),
            flat[2 * p:2 * p + a].reshape(n, m, R),
            flat[2 * p + a:].reshape(n, m, R),
        )


@dataclass
class ArraySlices:
    """Array components for a batch of samples; unused parts stay None."""

    spec: ArraySpec
    pair_dX: Optional[np.ndarray] = None  # (B, m): particle (0,1) time diagonal
    pair_dY: Optional[np.ndarray] = None
    aX: Optional[np.ndarray] = None       # (B, n, m, R)
    aY: Optional[np.ndarray] = None
    dX: Optional[np.ndarray] = None       # (B, n, n, m, m)
    dY: Optional[np.ndarray] = None


# ---------------------------------------------------------------------------
# observables
# ---------------------------------------------------------------------------

class Observable:
    """A map from array samples to a low-dimensional vector.

    ``lipschitz`` bounds the map's constant w.r.t. the Euclidean metric on the
    flattened array; ``needs`` names the slices the evaluation reads, one of
    "pair", "anchors", "full".
    """

    name: str
    dim: int
    lipschitz: float
    needs: frozenset

    def evaluate(self, slices: ArraySlices) -> np.ndarray:
        raise NotImplementedError

    def check_spec(self, spec: ArraySpec) -> None:
        """Raise if the observable cannot be read off arrays of this spec."""

    def __repr__(self):  # pragma: no cover - debugging aid
        return f"<Observable {self.name}>"


class PairDistance00(Observable):
    """(dX[0,1,0,0], dY[0,1,0,0]): the time-zero two-particle distances."""

    def __init__(self):
        self.name = "pair_00"
        self.dim = 2
        self.lipschitz = 1.0
        self.needs = frozenset({"pair"})

    def check_spec(self, spec):
        if spec.n < 2:
            raise ValueError("pair_00 needs at least two particles")

    def evaluate(self, slices):
        return np.stack([slices.pair_dX[:, 0], slices.pair_dY[:, 0]], axis=1)


class OrbitAveragedDistance(Observable):
    """Orbit-averaged two-particle distance in each coordinate, Lipschitz m^-1/2."""

    def __init__(self, m: int):
        if m < 1:
            raise ValueError(f"orbit length must be >= 1, got {m}")
        self.m = m
        self.name = f"avg_distance(m={m})"
        self.dim = 2
        self.lipschitz = m ** -0.5
        self.needs = frozenset({"pair"})

    def check_spec(self, spec):
        if spec.n < 2:
            raise ValueError("orbit-averaged distance needs at least two particles")
        if spec.m != self.m:
            raise ValueError(f"observable averages m={self.m} steps, spec has m={spec.m}")

    def evaluate(self, slices):
        return np.stack(
            [slices.pair_dX.mean(axis=1), slices.pair_dY.mean(axis=1)], axis=1
        )


class MismatchFraction(Observable):
    """Ramped orbit-average: chi((d - tau)/(1 - tau)) clipped to [0,1], then averaged.

    For shift metrics with leading weight 1 and tail bound tau, the ramp
    recovers the leading-symbol mismatch indicator exactly.  Lipschitz
    constant 1/((1 - tau) sqrt(m)).
    """

    def __init__(self, m: int, tau: float):
        if m < 1:
            raise ValueError(f"orbit length must be >= 1, got {m}")
        if not 0.0 < tau < 1.0:
            raise ValueError(f"ramp threshold must lie in (0,1), got {tau}")
        self.m = m
        self.tau = tau
        self.name = f"mismatch(m={m},tau={tau:.6g})"
        self.dim = 2
        self.lipschitz = 1.0 / ((1.0 - tau) * m ** 0.5)
        self.needs = frozenset({"pair"})

    def check_spec(self, spec):
        if spec.n < 2:
            raise ValueError("mismatch fraction needs at least two particles")
        if spec.m != self.m:
            raise ValueError(f"observable averages m={self.m} steps, spec has m={spec.m}")

    def _chi(self, d: np.ndarray) -> np.ndarray:
        return np.clip((d - self.tau) / (1.0 - self.tau), 0.0, 1.0)

    def evaluate(self, slices):
        return np.stack(
            [self._chi(slices.pair_dX).mean(axis=1), self._chi(slices.pair_dY).mean(axis=1)],
            axis=1,
        )


class AnchoredPairDistance(Observable):
    """(aX[0,0,0], aY[0,0,0]): first-particle time-zero distance to the first anchor."""

    def __init__(self):
        self.name = "anchored_pair"
        self.dim = 2
        self.lipschitz = 1.0
        self.needs = frozenset({"anchors"})

    def check_spec(self, spec):
        if spec.R < 1:
            raise ValueError("anchored pair needs R >= 1")

    def evaluate(self, slices):
        return np.stack([slices.aX[:, 0, 0, 0], slices.aY[:, 0, 0, 0]], axis=1)


@dataclass(frozen=True)
class PlaneFunction:
    """A scalar function of a 2-d projection with a declared Lipschitz constant."""

    name: str
    fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    lipschitz: float


def squared_gap(diam: float) -> PlaneFunction:
    """(a-b)^2 normalized to be 1-Lipschitz on [0, diam]^2."""
    scale = 1.0 / (2.0 * np.sqrt(2.0) * diam)
    return PlaneFunction(f"squared_gap(diam={diam:g})", lambda a, b: scale * (a - b) ** 2, 1.0)


def abs_gap() -> PlaneFunction:
    """|a-b|/sqrt(2), 1-Lipschitz on the plane."""
    return PlaneFunction("abs_gap", lambda a, b: np.abs(a - b) / np.sqrt(2.0), 1.0)


def raw_squared_gap() -> PlaneFunction:
    """(a-b)^2 without normalization; Lipschitz only on a declared bounded domain."""
    return PlaneFunction("raw_squared_gap", lambda a, b: (a - b) ** 2, float("inf"))


class ComposedCertificate(Observable):
    """Scalar certificate: a plane function applied to a 2-d observable."""

    def __init__(self, plane: PlaneFunction, base: Observable):
        if base.dim != 2:
            raise ValueError(f"certificates compose with 2-d observables, got dim {base.dim}")
        self.plane = plane
        self.base = base
        self.name = f"{plane.name}[{base.name}]"
        self.dim = 1
        self.lipschitz = plane.lipschitz * base.lipschitz
        self.needs = base.needs

    def check_spec(self, spec):
        self.base.check_spec(spec)

    def evaluate(self, slices):
        v = self.base.evaluate(slices)
        return self.plane.fn(v[:, 0], v[:, 1])[:, None]


def pair_00() -> PairDistance00:
    return PairDistance00()


def obs_avg_distance(m: int) -> OrbitAveragedDistance:
    return OrbitAveragedDistance(m)


def obs_mismatch(m: int, tau: float) -> MismatchFraction:
    return MismatchFraction(m, tau)


def anchored_pair() -> AnchoredPairDistance:
    return AnchoredPairDistance()


def test_functions() -> Dict[str, Any]:
    """The named 1-Lipschitz certificate pieces used throughout the experiments.

    ``psi_bernoulli`` is the squared gap normalized for diameter 3/4,
    ``psi_sq`` the squared gap normalized for diameter 1/2, ``phi_abs`` the
    absolute gap, and ``anchored_pair`` the anchored coordinate extractor.
    """
    return {
        "psi_bernoulli": squared_gap(0.75),
        "psi_sq": squared_gap(0.5),
        "phi_abs": abs_gap(),
        "anchored_pair": anchored_pair(),
    }


def standard_catalogue(spec: ArraySpec, diam: float) -> List[Observable]:
    """Scalar certificates appropriate for a spec: squared/absolute gaps on the
    time-zero pair plus, when anchors are present, the anchored absolute gap."""
    cat: List[Observable] = []
    if spec.n >= 2:
        base = pair_00()
        cat.append(ComposedCertificate(squared_gap(diam), base))
        cat.append(ComposedCertificate(abs_gap(), base))
    if spec.R >= 1:
        cat.append(ComposedCertificate(abs_gap(), anchored_pair()))
    if not cat:
        raise ValueError(f"no certificates available at spec {spec}")
    return cat


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def _ext_count(ext: Any) -> int:
    return _ext_count(ext[0]) if isinstance(ext, tuple) else ext.shape[0]

def _ext_select(ext: Any, idx: np.ndarray) -> Any:
    if isinstance(ext, tuple):
        return tuple(_ext_select(e, idx) for e in ext)
    return ext[idx]


def _pair_diag_dists(system: System, ext0: Any, ext1: Any, m: int) -> np.ndarray:
    """d(T^t x0, T^t x1) for t < m."""
    return system.pair_orbit_dists(ext0, ext1, m)


def _full_dists(system: System, orbits: np.ndarray) -> np.ndarray:
    """All pairwise orbit distances: (B, n, m, w) -> (B, n, n, m, m)."""
    B, n, m, w = orbits.shape
    out = np.empty((B, n, n, m, m))
    chunk = max(1, _CHUNK_FLOATS // max(1, n * n * m * m * w))
    for s0 in range(0, B, chunk):
        sl = orbits[s0:s0 + chunk]
        out[s0:s0 + chunk] = system.dist(sl[:, :, None, :, None, :], sl[:, None, :, None, :, :])
    return out


def _anchor_dists(system: System, orbits: np.ndarray, R: int) -> np.ndarray:
    """Distances to the first R anchors: (B, n, m, w) -> (B, n, m, R)."""
    B, n, m, w = orbits.shape
    anchors = np.asarray(system.anchors(R), dtype=float)
    out = np.empty((B, n, m, R))
    chunk = max(1, _CHUNK_FLOATS // max(1, n * m * R * w))
    for s0 in range(0, B, chunk):
        sl = np.asarray(orbits[s0:s0 + chunk], dtype=float)
        out[s0:s0 + chunk] = system.dist(sl[:, :, :, None, :], anchors[None, None, None, :, :])
    return out


def _orbit_tensor(system: System, ext: Any, size: int, n: int, m: int) -> np.ndarray:
    states = np.asarray(system.states(ext, 0, m))
    return states.reshape(size, n, m, system.state_width)


def _block_slices(joining: Joining, spec: ArraySpec, rng: np.random.Generator,
                  size: int, needs: frozenset) -> ArraySlices:
    """Sample one block of ``size`` draws and fill the requested slices."""
    n, m, R = spec.n, spec.m, spec.R
    extX, extY = joining.sample_ext_pairs(rng, size * n, m)
    out = ArraySlices(spec)
    if "pair" in needs:
        idx0 = np.arange(size) * n
        out.pair_dX = _pair_diag_dists(joining.left, _ext_select(extX, idx0),
                                       _ext_select(extX, idx0 + 1), m)
        out.pair_dY = _pair_diag_dists(joining.right, _ext_select(extY, idx0),
                                       _ext_select(extY, idx0 + 1), m)
    if "full" in needs or ("anchors" in needs and R > 0):
        ox = _orbit_tensor(joining.left, extX, size, n, m)
        oy = _orbit_tensor(joining.right, extY, size, n, m)
        if "full" in needs:
            out.dX = _full_dists(joining.left, ox)
            out.dY = _full_dists(joining.right, oy)
        if "anchors" in needs and R > 0:
            out.aX = _anchor_dists(joining.left, ox, R)
            out.aY = _anchor_dists(joining.right, oy, R)
    if "anchors" in needs and R == 0:
        out.aX = np.empty((size, n, m, 0))
        out.aY = np.empty((size, n, m, 0))
    return out


def slices_from_flat(spec: ArraySpec, flat: np.ndarray, needs: frozenset) -> ArraySlices:
    """Rebuild the requested slices from flattened stored samples."""
    flat = np.asarray(flat, dtype=float)
    if flat.ndim == 1:
        flat = flat[None, :]
    N = flat.shape[0]
    n, m, R = spec.n, spec.m, spec.R
    p, a = spec.pair_dim, spec.anchor_dim
    out = ArraySlices(spec)
    dX = flat[:, :p].reshape(N, n, n, m, m)
    dY = flat[:, p:2 * p].reshape(N, n, n, m, m)
    if "full" in needs:
        out.dX, out.dY = dX, dY
    if "pair" in needs:
        if n < 2:
            raise ValueError("pair slices need n >= 2")
        t = np.arange(m)
        out.pair_dX = dX[:, 0, 1, t, t]
        out.pair_dY = dY[:, 0, 1, t, t]
    if "anchors" in needs:
        out.aX = flat[:, 2 * p:2 * p + a].reshape(N, n, m, R)
        out.aY = flat[:, 2 * p + a:].reshape(N, n, m, R)
    return out


def sample_array(joining: Joining, spec: ArraySpec, rng: np.random.Generator) -> ArraySample:
    """One array draw from an explicit random stream."""
    s = _block_slices(joining, spec, rng, 1, frozenset({"full", "anchors"}))
    return ArraySample(spec, s.dX[0], s.dY[0], s.aX[0], s.aY[0])


@dataclass
class EmpiricalLaw:
    """N i.i.d. flattened array samples with provenance."""

    spec: ArraySpec
    samples: np.ndarray  # (N, flat_dim)
    provenance: Dict[str, Any] = field(default_factory=dict)

    @property
    def N(self) -> int:
        return self.samples.shape[0]

    def to_csv(self, path) -> None:
        header = {
            "spec": {"n": self.spec.n, "m": self.spec.m, "R": self.spec.R},
            "provenance": self.provenance,
            "layout": "dX,dY,aX,aY row-major",
        }
        with open(path, "w") as f:
            f.write("# " + json.dumps(header, sort_keys=True) + "\n")
            np.savetxt(f, self.samples, fmt="%.17g", delimiter=",")

    @staticmethod
    def from_csv(path) -> "EmpiricalLaw":
        with open(path) as f:
            first = f.readline()
            if not first.startswith("# "):
                raise ValueError("missing law header line")
            header = json.loads(first[2:])
            data = np.loadtxt(f, delimiter=",", ndmin=2)
        spec = ArraySpec(**header["spec"])
        return EmpiricalLaw(spec, data, header.get("provenance", {}))


@dataclass
class ProjectedLaw:
    """Pushforward of an empirical law under an observable."""

    values: np.ndarray  # (N, dim)
    name: str
    lipschitz_chain: float
    provenance: Dict[str, Any] = field(default_factory=dict)

    @property
    def N(self) -> int:
        return self.values.shape[0]


def _provenance(joining: Joining, spec: ArraySpec, N: int, seed: int) -> Dict[str, Any]:
    return {
        "joining": joining.jid,
        "seed": int(seed),
        "N": int(N),
        "block": rngmod.BLOCK,
        "metric_tail_bounds": {
            "left": joining.left.metric_tail_bound,
            "right": joining.right.metric_tail_bound,
        },
    }


def empirical_law(joining: Joining, spec: ArraySpec, N: int, seed: int,
                  max_entries: int = 50_000_000) -> EmpiricalLaw:
    """N samples from deterministically derived block streams.

    Output depends only on (joining, spec, N, seed); block generation is
    order-independent.  Fails fast when N * flat_dim exceeds the memory
    budget, since exact transport needs all samples resident.
    """
    if N * spec.flat_dim > max_entries:
        raise BudgetError(
            f"law of {N} x {spec.flat_dim} entries exceeds the budget of {max_entries}"
        )
    samples = np.empty((N, spec.flat_dim))
    needs = frozenset({"full", "anchors"})
    for start, size, rng in rngmod.iter_blocks(seed, N):
        s = _block_slices(joining, spec, rng, size, needs)
        samples[start:start + size, :spec.pair_dim] = s.dX.reshape(size, -1)
        samples[start:start + size, spec.pair_dim:2 * spec.pair_dim] = s.dY.reshape(size, -1)
        samples[start:start + size, 2 * spec.pair_dim:2 * spec.pair_dim + spec.anchor_dim] = \
            s.aX.reshape(size, -1)
        samples[start:start + size, 2 * spec.pair_dim + spec.anchor_dim:] = s.aY.reshape(size, -1)
    return EmpiricalLaw(spec, samples, _provenance(joining, spec, N, seed))


def sample_observable(joining: Joining, spec: ArraySpec, obs: Observable,
                      N: int, seed: int) -> ProjectedLaw:
    """Evaluate an observable over N fresh samples without retaining arrays.

    Uses the same stream derivation as ``empirical_law``, so projecting a
    stored law gives the same values as sampling the observable directly.
    """
    obs.check_spec(spec)
    values = np.empty((N, obs.dim))
    for start, size, rng in rngmod.iter_blocks(seed, N):
        s = _block_slices(joining, spec, rng, size, obs.needs)
        values[start:start + size] = obs.evaluate(s)
    prov = _provenance(joining, spec, N, seed)
    prov["observable"] = obs.name
    return ProjectedLaw(values, obs.name, obs.lipschitz, prov)


def project(law: EmpiricalLaw, obs: Observable) -> ProjectedLaw:
    """Apply an observable to every stored sample, recording its constant."""
    obs.check_spec(law.spec)
    slices = slices_from_flat(law.spec, law.samples, obs.needs)
    values = obs.evaluate(slices)
    prov = dict(law.provenance)
    prov["observable"] = obs.name
    return ProjectedLaw(values, obs.name, obs.lipschitz, prov)
