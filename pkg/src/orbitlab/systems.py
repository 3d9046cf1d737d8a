"""Compact metric measure-preserving systems with invariant samplers and anchors.

Every system exposes the same surface: a metric on encoded states, one step of
the dynamics, an invariant-measure sampler, and a fixed dense anchor
enumeration.  States are numpy arrays of shape ``(..., state_width)``.

Orbit segments are materialized eagerly: ``sample_ext`` draws one extended
random configuration wide enough for ``m`` iterates plus the metric window,
and ``states(ext, t0, t1)`` exposes the iterates as cheap views of it.  This
guarantees that all iterates of one sample are mutually consistent.

Anchor enumerations are fixed (version 1).  Changing them is a breaking
change: anchored laws depend on the enumeration.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from fractions import Fraction
from typing import Any, List, Optional, Sequence, Tuple

import numpy as np

#: Default metric truncation half-width for the two-sided binary shift.
DEFAULT_BERNOULLI_K = 24
#: Default word length for the one-sided Markov shift.
DEFAULT_MARKOV_L = 48
#: Default rotation angle: the golden-ratio conjugate (sqrt(5)-1)/2.  In
#: finite precision this is rational; acceptable at the orbit lengths used
#: here, where nothing approaches the implied period.
GOLDEN_ANGLE = (math.sqrt(5.0) - 1.0) / 2.0

# Bits used to reconstruct a circle point from a binary extension (doubling map).
_DYADIC_BITS = 53
_DYADIC_WEIGHTS = 0.5 ** np.arange(1, _DYADIC_BITS + 1)


class System(ABC):
    """A compact metric system: metric, dynamics, sampler, anchors."""

    sid: str
    state_width: int
    diameter_bound: float
    metric_tail_bound: float = 0.0
    translation_invariant: bool = False

    # -- sampling -------------------------------------------------------

    @abstractmethod
    def sample_ext(self, rng: np.random.Generator, size: int, m: int) -> Any:
        """Draw ``size`` extended configurations supporting ``m`` consistent iterates."""

    @abstractmethod
    def states(self, ext: Any, t0: int, t1: int) -> np.ndarray:
        """Orbit slice of an extension: array of shape (size, t1 - t0, state_width)."""

    def orbits(self, ext: Any, m: int) -> np.ndarray:
        return self.states(ext, 0, m)

    def sample_states(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """``size`` i.i.d. draws from the invariant law, shape (size, state_width)."""
        return self.states(self.sample_ext(rng, size, 1), 0, 1)[:, 0]

    # -- metric and dynamics ---------------------------------------------

    @abstractmethod
    def dist(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Metric, broadcasting over leading axes of (..., state_width) inputs."""

    def pair_orbit_dists(self, ext0: Any, ext1: Any, m: int) -> np.ndarray:
        """d(T^t x0, T^t x1) for t < m, one row per extension pair.

        The default evaluates the metric on orbit windows in time chunks
        sized to bound float temporaries; window metrics override this with
        a single mismatch pass.
        """
        size = self.states(ext0, 0, 1).shape[0]
        out = np.empty((size, m))
        chunk = max(1, (2 ** 24) // max(1, size * self.state_width))
        for t0 in range(0, m, chunk):
            t1 = min(m, t0 + chunk)
            out[:, t0:t1] = self.dist(self.states(ext0, t0, t1), self.states(ext1, t0, t1))
        return out

    @abstractmethod
    def step(self, states: np.ndarray, rng: Optional[np.random.Generator] = None) -> np.ndarray:
        """One step of the dynamics.  Shift systems consume fresh randomness."""

    # -- anchors ----------------------------------------------------------

    @abstractmethod
    def anchor(self, r: int) -> np.ndarray:
        """The r-th member (r >= 1) of the fixed dense anchor sequence."""

    def anchors(self, R: int) -> np.ndarray:
        if R < 0:
            raise ValueError(f"anchor count must be >= 0, got {R}")
        if R == 0:
            return np.empty((0, self.state_width))
        return np.stack([self.anchor(r) for r in range(1, R + 1)])

    # -- group structure (rotations only) ---------------------------------

    def translate(self, states: np.ndarray, h) -> np.ndarray:
        raise TypeError(f"{self.sid} has no translation structure")

    def translate_ext(self, ext: Any, h) -> Any:
        raise TypeError(f"{self.sid} has no translation structure")

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"<System {self.sid}>"


def same_system(a: System, b: System) -> bool:
    return a.sid == b.sid


# ---------------------------------------------------------------------------
# circle geometry helpers
# ---------------------------------------------------------------------------

def circle_dist(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Wraparound metric min(|u-v|, 1-|u-v|) on representatives in [0,1)."""
    d = np.abs(np.asarray(u, dtype=float) - np.asarray(v, dtype=float)) % 1.0
    return np.minimum(d, 1.0 - d)


def _weighted_mismatch(a: np.ndarray, b: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """sum_k weights[k] * 1_{a_k != b_k}, contracted through BLAS."""
    mism = (np.asarray(a) != np.asarray(b)).astype(float)
    lead = mism.shape[:-1]
    return (mism.reshape(-1, mism.shape[-1]) @ weights).reshape(lead)


def _mismatch_orbit_dists(ext0: np.ndarray, ext1: np.ndarray, weights: np.ndarray,
                          m: int) -> np.ndarray:
    """Time-diagonal distances for window metrics: one mismatch pass over the
    extensions, then sliding weighted sums (equals dist on orbit windows)."""
    mism = (ext0 != ext1).astype(float)
    windows = np.lib.stride_tricks.sliding_window_view(mism, weights.shape[0], axis=1)
    out = np.empty((mism.shape[0], m))
    for t0 in range(0, m, 512):
        t1 = min(m, t0 + 512)
        out[:, t0:t1] = np.matmul(windows[:, t0:t1], weights)
    return out


def _dyadic_anchor(r: int) -> float:
    """Breadth-first dyadic enumeration: 0, 1/2, 1/4, 3/4, 1/8, 3/8, ..."""
    if r < 1:
        raise ValueError(f"anchor index must be >= 1, got {r}")
    if r == 1:
        return 0.0
    # level j >= 1 contributes the 2^(j-1) odd multiples of 2^-j, in order
    j = (r - 1).bit_length()
    offset = r - 1 - (1 << (j - 1))  # position within level j
    return (2 * offset + 1) / (1 << j)


class CircleRotation(System):
    """Rotation x -> x + alpha (mod 1) on the circle with Haar measure."""

    state_width = 1
    diameter_bound = 0.5
    translation_invariant = True

    def __init__(self, alpha: float = GOLDEN_ANGLE):
        if not math.isfinite(alpha):
            raise ValueError(f"rotation angle must be finite, got {alpha}")
        self.alpha = float(alpha) % 1.0
        self.sid = f"circle(alpha={self.alpha!r})"

    def sample_ext(self, rng, size, m):
        return rng.random(size)

    def states(self, ext, t0, t1):
        t = np.arange(t0, t1, dtype=float)
        return ((ext[:, None] + self.alpha * t) % 1.0)[..., None]

    def dist(self, a, b):
        return circle_dist(a[..., 0], b[..., 0])

    def step(self, states, rng=None):
        return (states + self.alpha) % 1.0

    def anchor(self, r):
        return np.array([_dyadic_anchor(r)])

    def translate(self, states, h):
        return (states + float(h)) % 1.0

    def translate_ext(self, ext, h):
        return (ext + float(h)) % 1.0


class DoublingMap(System):
    """x -> 2x (mod 1) with Haar measure and the circle metric.

    Orbits are reconstructed from a sampled binary extension: the point at
    time t is the dyadic value of bits t..t+52.  This keeps all m iterates
    statistically faithful; naive float doubling dies after ~53 steps.
    Consecutive reconstructed iterates satisfy the doubling relation up to
    2^-53.
    """

    state_width = 1
    diameter_bound = 0.5

    def __init__(self):
        self.sid = "doubling"

    def sample_ext(self, rng, size, m):
        return rng.integers(0, 2, size=(size, m - 1 + _DYADIC_BITS), dtype=np.int8)

    def states(self, ext, t0, t1):
        # u_{t+1} = frac(2 u_t) + b_{t+53} 2^-53: exact in binary floating point,
        # and identical to re-reading 53 bits at each t.
        out = np.empty((ext.shape[0], t1 - t0))
        u = ext[:, t0:t0 + _DYADIC_BITS].astype(float) @ _DYADIC_WEIGHTS
        for k in range(t1 - t0):
            out[:, k] = u
            nxt = t0 + k + _DYADIC_BITS
            if nxt < ext.shape[1]:
                u = (2.0 * u) % 1.0 + ext[:, nxt] * _DYADIC_WEIGHTS[-1]
        return out[..., None]

    def dist(self, a, b):
        return circle_dist(a[..., 0], b[..., 0])

    def step(self, states, rng=None):
        return (2.0 * states) % 1.0

    def anchor(self, r):
        return np.array([_dyadic_anchor(r)])


class CyclicRotation(System):
    """Rotation i -> i + g (mod q) on Z/q with uniform measure, exact arithmetic.

    Supports exact (enumerative) law computation downstream: the metric takes
    values k/q, and ``dist_numerator`` exposes the integer numerator.
    """

    state_width = 1
    translation_invariant = True

    def __init__(self, q: int, g: int):
        if q < 2:
            raise ValueError(f"group order must be >= 2, got {q}")
        if not 0 <= g < q:
            raise ValueError(f"rotation element must satisfy 0 <= g < q, got {g}")
        self.q = int(q)
        self.g = int(g)
        self.diameter_bound = (q // 2) / q
        self.sid = f"cyclic(q={q},g={g})"

    def sample_ext(self, rng, size, m):
        return rng.integers(0, self.q, size=size, dtype=np.int64)

    def states(self, ext, t0, t1):
        t = np.arange(t0, t1, dtype=np.int64)
        return ((ext[:, None] + self.g * t) % self.q)[..., None]

    def dist_numerator(self, i, j) -> np.ndarray:
        c = np.abs(np.asarray(i, dtype=np.int64) - np.asarray(j, dtype=np.int64)) % self.q
        return np.minimum(c, self.q - c)

    def dist(self, a, b):
        c = np.abs(np.rint(a[..., 0] - b[..., 0]).astype(np.int64)) % self.q
        return np.minimum(c, self.q - c) / self.q

    def step(self, states, rng=None):
        return (states + self.g) % self.q

    def anchor(self, r):
        if r < 1:
            raise ValueError(f"anchor index must be >= 1, got {r}")
        return np.array([(r - 1) % self.q], dtype=np.int64)

    def translate(self, states, h):
        return (states + int(h)) % self.q

    def translate_ext(self, ext, h):
        return (ext + int(h)) % self.q

    def exact_atoms(self) -> List[Tuple[int, Fraction]]:
        """All states with their exact invariant masses."""
        return [(i, Fraction(1, self.q)) for i in range(self.q)]


class BernoulliShift(System):
    """Two-sided fair-coin shift observed through a window of half-width K.

    The metric is sum_{|k|<=K} 2^(-|k|-2) |x_k - x'_k|; truncating the full
    two-sided series at K costs at most 2^(-K-1).  Orbit segments of length m
    come from one sampled extension of 2K + m fresh bits, so the m iterates
    are windows of a single two-sided configuration.
    """

    diameter_bound = 0.75  # untruncated series total

    def __init__(self, K: int = DEFAULT_BERNOULLI_K):
        if K < 1:
            raise ValueError(f"window half-width must be >= 1, got {K}")
        self.K = int(K)
        self.state_width = 2 * K + 1
        offsets = np.abs(np.arange(-K, K + 1))
        self.weights = 0.5 ** (offsets + 2)
        self.metric_tail_bound = 2.0 ** (-K - 1)
        self.sid = f"bernoulli(K={K})"

    def sample_ext(self, rng, size, m):
        return rng.integers(0, 2, size=(size, 2 * self.K + m), dtype=np.int8)

    def states(self, ext, t0, t1):
        windows = np.lib.stride_tricks.sliding_window_view(ext, self.state_width, axis=1)
        return windows[:, t0:t1]

    def dist(self, a, b):
        return _weighted_mismatch(a, b, self.weights)

    def pair_orbit_dists(self, ext0, ext1, m):
        return _mismatch_orbit_dists(ext0, ext1, self.weights, m)

    def step(self, states, rng=None):
        if rng is None:
            raise ValueError("stepping the shift needs a random stream for the exposed bit")
        states = np.asarray(states)
        fresh = rng.integers(0, 2, size=states.shape[:-1] + (1,), dtype=np.int8)
        return np.concatenate([states[..., 1:], fresh.astype(states.dtype)], axis=-1)

    def anchor(self, r):
        if r < 1:
            raise ValueError(f"anchor index must be >= 1, got {r}")
        if r - 1 >= 1 << min(self.state_width, 62):
            raise ValueError(f"anchor index {r} exceeds the window configuration count")
        # bits of r-1 laid out over coordinates ordered 0, -1, +1, -2, +2, ...
        bits = np.zeros(self.state_width, dtype=np.int8)
        index = r - 1
        j = 0
        while index:
            if index & 1:
                bits[_coordinate_order(j) + self.K] = 1
            index >>= 1
            j += 1
        return bits


def _coordinate_order(j: int) -> int:
    """Coordinate visited at position j of the order 0, -1, +1, -2, +2, ..."""
    if j == 0:
        return 0
    half = (j + 1) // 2
    return -half if j % 2 == 1 else half


class MarkovShift(System):
    """Stationary one-sided shift of a reversible finite Markov chain.

    States are length-L words; the metric is
    1_{x_0 != x'_0} + eta * sum_{1<=r<L} beta^r 1_{x_r != x'_r},
    a truncation of the full compatible metric with tail eta*beta^L/(1-beta).
    Requires tau = eta*beta/(1-beta) < 1 so that the leading mismatch
    indicator is recoverable from the metric by a fixed ramp.
    """

    def __init__(self, P: np.ndarray, beta: float, eta: float, L: int = DEFAULT_MARKOV_L):
        P = np.asarray(P, dtype=float)
        validate_transition_matrix(P)
        if not 0.0 < beta < 1.0:
            raise ValueError(f"beta must lie in (0,1), got {beta}")
        if eta <= 0.0:
            raise ValueError(f"eta must be positive, got {eta}")
        tau = eta * beta / (1.0 - beta)
        if tau >= 1.0:
            raise ValueError(f"need eta*beta/(1-beta) < 1, got {tau}")
        if L < 1:
            raise ValueError(f"word length must be >= 1, got {L}")
        self.P = P
        self.n_symbols = P.shape[0]
        self.pi = stationary_distribution(P)
        check_reversible(P, self.pi)
        self.beta = float(beta)
        self.eta = float(eta)
        self.tau = tau
        self.L = int(L)
        self.state_width = int(L)
        r = np.arange(L, dtype=float)
        self.weights = np.concatenate([[1.0], eta * beta ** r[1:]])
        self.metric_tail_bound = eta * beta ** L / (1.0 - beta)
        self.diameter_bound = 1.0 + tau
        self._cum = np.cumsum(P, axis=1)
        # flattened per-state cumulative boundaries: transition sampling becomes
        # one searchsorted of (state + uniform) into this sorted grid
        flat = (np.arange(self.n_symbols)[:, None] + self._cum).ravel()
        flat[-1] = np.inf
        self._flat_cum = flat
        entries = ",".join(f"{v:.12g}" for v in P.ravel())
        self.sid = f"markov(P=[{entries}],beta={beta!r},eta={eta!r},L={L})"

    def sample_ext(self, rng, size, m):
        length = self.L + m - 1
        s = self.n_symbols
        seq = np.empty((size, length), dtype=np.int8)
        cum_pi = np.cumsum(self.pi)
        seq[:, 0] = np.searchsorted(cum_pi, rng.random(size), side="right")
        cur = seq[:, 0].astype(np.int64)
        for t in range(1, length):
            idx = np.searchsorted(self._flat_cum, cur + rng.random(size), side="left")
            cur = idx - cur * s
            seq[:, t] = cur
        return seq

    def states(self, ext, t0, t1):
        windows = np.lib.stride_tricks.sliding_window_view(ext, self.L, axis=1)
        return windows[:, t0:t1]

    def dist(self, a, b):
        return _weighted_mismatch(a, b, self.weights)

    def pair_orbit_dists(self, ext0, ext1, m):
        return _mismatch_orbit_dists(ext0, ext1, self.weights, m)

    def step(self, states, rng=None):
        if rng is None:
            raise ValueError("stepping the shift needs a random stream for the exposed symbol")
        states = np.asarray(states)
        flat_last = states[..., -1].astype(np.int64).ravel()
        u = rng.random(flat_last.shape[0])
        fresh = (u[:, None] > self._cum[flat_last]).sum(axis=1)
        fresh = fresh.reshape(states.shape[:-1] + (1,)).astype(states.dtype)
        return np.concatenate([states[..., 1:], fresh], axis=-1)

    def anchor(self, r):
        if r < 1:
            raise ValueError(f"anchor index must be >= 1, got {r}")
        # r-th word (lexicographic) whose transitions all have positive
        # probability, so anchors lie in the support of the stationary law.
        allowed = self.P > 0.0
        s = self.n_symbols
        counts = np.ones((self.L, s), dtype=object)  # valid completions by position
        for pos in range(self.L - 2, -1, -1):
            for sym in range(s):
                counts[pos][sym] = sum(counts[pos + 1][t] for t in range(s) if allowed[sym, t])
        total = sum(counts[0][sym] for sym in range(s))
        index = r - 1
        if index >= total:
            raise ValueError(f"anchor index {r} exceeds the {total} supported words of length {self.L}")
        word = np.empty(self.L, dtype=np.int8)
        prev = None
        for pos in range(self.L):
            for sym in range(s):
                if prev is not None and not allowed[prev, sym]:
                    continue
                c = counts[pos][sym]
                if index < c:
                    word[pos] = sym
                    prev = sym
                    break
                index -= c
        return word


def validate_transition_matrix(P: np.ndarray, tol: float = 1e-10) -> None:
    """Reject matrices that are not irreducible aperiodic stochastic matrices."""
    if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] < 2:
        raise ValueError(f"transition matrix must be square with >= 2 states, got shape {P.shape}")
    if np.any(P < -tol) or np.any(np.abs(P.sum(axis=1) - 1.0) > tol):
        raise ValueError("rows of the transition matrix must be probability vectors")
    n = P.shape[0]
    reach = (P > tol).astype(np.int64)
    closure = reach | np.eye(n, dtype=np.int64)
    for _ in range(n):
        closure = ((closure @ closure) > 0).astype(np.int64)
    if not closure.all():
        raise ValueError("transition matrix must be irreducible")
    # period = gcd of return times to state 0 within a window of 2n steps
    power = np.eye(n, dtype=np.int64)
    period = 0
    for t in range(1, 2 * n + 1):
        power = ((power @ reach) > 0).astype(np.int64)
        if power[0, 0]:
            period = math.gcd(period, t)
    if period != 1:
        raise ValueError(f"transition matrix must be aperiodic, found period {period}")


def stationary_distribution(P: np.ndarray) -> np.ndarray:
    """Stationary law of an irreducible chain via the unit left eigenvector."""
    vals, vecs = np.linalg.eig(P.T)
    k = int(np.argmin(np.abs(vals - 1.0)))
    pi = np.real(vecs[:, k])
    pi = pi / pi.sum()
    if np.any(pi < 1e-14):
        raise ValueError("stationary distribution has non-positive entries")
    return pi


def check_reversible(P: np.ndarray, pi: np.ndarray, tol: float = 1e-10) -> None:
    flux = pi[:, None] * P
    if np.max(np.abs(flux - flux.T)) > tol:
        raise ValueError("transition matrix is not reversible for its stationary law")


class ProductSystem(System):
    """Product of two systems with product dynamics and the max metric."""

    def __init__(self, first: System, second: System):
        self.first = first
        self.second = second
        self.state_width = first.state_width + second.state_width
        self.diameter_bound = max(first.diameter_bound, second.diameter_bound)
        self.metric_tail_bound = max(first.metric_tail_bound, second.metric_tail_bound)
        self.translation_invariant = first.translation_invariant and second.translation_invariant
        self.sid = f"product_system[{first.sid};{second.sid}]"

    def _split(self, states: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        w = self.first.state_width
        return states[..., :w], states[..., w:]

    def sample_ext(self, rng, size, m):
        return (self.first.sample_ext(rng, size, m), self.second.sample_ext(rng, size, m))

    def states(self, ext, t0, t1):
        a = np.asarray(self.first.states(ext[0], t0, t1), dtype=float)
        b = np.asarray(self.second.states(ext[1], t0, t1), dtype=float)
        return np.concatenate([a, b], axis=-1)

    def dist(self, a, b):
        a1, a2 = self._split(np.asarray(a, dtype=float))
        b1, b2 = self._split(np.asarray(b, dtype=float))
        return np.maximum(self.first.dist(a1, b1), self.second.dist(a2, b2))

    def pair_orbit_dists(self, ext0, ext1, m):
        return np.maximum(self.first.pair_orbit_dists(ext0[0], ext1[0], m),
                          self.second.pair_orbit_dists(ext0[1], ext1[1], m))

    def step(self, states, rng=None):
        a, b = self._split(np.asarray(states, dtype=float))
        return np.concatenate(
            [np.asarray(self.first.step(a, rng), dtype=float),
             np.asarray(self.second.step(b, rng), dtype=float)],
            axis=-1,
        )

    def anchor(self, r):
        i, j = _cantor_pair(r)
        return np.concatenate(
            [np.asarray(self.first.anchor(i), dtype=float),
             np.asarray(self.second.anchor(j), dtype=float)]
        )


def _cantor_pair(r: int) -> Tuple[int, int]:
    """Diagonal enumeration of pairs of positive integers: (1,1),(1,2),(2,1),(1,3),..."""
    if r < 1:
        raise ValueError(f"anchor index must be >= 1, got {r}")
    d = 2
    remaining = r
    while remaining > d - 1:
        remaining -= d - 1
        d += 1
    return remaining, d - remaining


def circle_rotation(alpha: float = GOLDEN_ANGLE) -> CircleRotation:
    return CircleRotation(alpha)


def doubling_map() -> DoublingMap:
    return DoublingMap()


def bernoulli_shift(K: int = DEFAULT_BERNOULLI_K) -> BernoulliShift:
    return BernoulliShift(K)


def markov_shift(P, beta: float, eta: float, L: int = DEFAULT_MARKOV_L) -> MarkovShift:
    return MarkovShift(np.asarray(P, dtype=float), beta, eta, L)


def cyclic_rotation(q: int, g: int) -> CyclicRotation:
    return CyclicRotation(q, g)


def product_system(first: System, second: System) -> ProductSystem:
    return ProductSystem(first, second)
