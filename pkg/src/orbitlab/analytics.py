"""Closed-form and quadrature oracles for the constants the experiments target.

Every constant is computed by at least two independent routes where feasible
(covariance series vs spectral sum for the Markov chain variance, quadrature
vs formula for circle-metric moments); the test suite cross-checks them.
Exact finite laws over cyclic rotations replace Monte Carlo where the state
space is enumerable.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.linalg import eigh

from .arrays import ArraySpec, BudgetError
from .joinings import Joining
from .systems import (
    CyclicRotation,
    check_reversible,
    stationary_distribution,
    validate_transition_matrix,
)

SQRT2 = math.sqrt(2.0)

# -- two-sided fair-coin shift ------------------------------------------------

def bernoulli_weight_sum(K: Optional[int] = None) -> float:
    """sum_{|k|<=K} 2^(-|k|-2); the full series totals 3/4."""
    if K is None:
        return 0.75
    if K < 1:
        raise ValueError(f"half-width must be >= 1, got {K}")
    return 0.25 + 2 * sum(2.0 ** (-k - 2) for k in range(1, K + 1))


def bernoulli_weight_square_sum(K: Optional[int] = None) -> float:
    """sum_{|k|<=K} 2^(-2|k|-4); the full series totals 5/48."""
    if K is None:
        return 5.0 / 48.0
    if K < 1:
        raise ValueError(f"half-width must be >= 1, got {K}")
    return 2.0 ** -4 + 2 * sum(2.0 ** (-2 * k - 4) for k in range(1, K + 1))


def bernoulli_var_R(K: Optional[int] = None) -> float:
    """Variance of the distance between two independent fair-coin windows.

    The independent per-coordinate mismatches each carry variance 1/4, so the
    variance is (1/4) * sum of squared weights; the full series gives 5/192.
    """
    return 0.25 * bernoulli_weight_square_sum(K)


def bernoulli_certificate_value(K: Optional[int] = None) -> float:
    """Mean of the diameter-3/4 squared-gap certificate under the product law:
    (2/(3 sqrt 2)) * 2 Var(R); the untruncated value is 5/(144 sqrt 2)."""
    return (2.0 / (3.0 * SQRT2)) * 2.0 * bernoulli_var_R(K)


# -- doubling map --------------------------------------------------------------

def doubling_var_Am(m: int) -> float:
    """Variance of the orbit-averaged pair distance: 1/(48 m).

    The time-zero distance f(U) has variance 1/12 - 1/16 = 1/48, and distinct
    dyadic time-dilations of f are uncorrelated, so averaging m of them
    divides the variance by m exactly.
    """
    if m < 1:
        raise ValueError(f"orbit length must be >= 1, got {m}")
    return 1.0 / (48.0 * m)


def doubling_rate_bounds(m: int) -> Tuple[float, float]:
    """(lower, upper) for the W_1 gap of the averaged pair law at length m:
    lower 1/(24 sqrt2 m) from the squared-gap certificate, upper 1/sqrt(24 m)
    from the shared-coordinate coupling."""
    if m < 1:
        raise ValueError(f"orbit length must be >= 1, got {m}")
    return 1.0 / (24.0 * SQRT2 * m), 1.0 / math.sqrt(24.0 * m)


def circle_metric_moment(power: int, points: int = 2 ** 20) -> float:
    """Quadrature oracle for int f(u)^power du with f(u) = min(u, 1-u)."""
    u = np.linspace(0.0, 1.0, points + 1)
    f = np.minimum(u, 1.0 - u)
    return float(np.trapezoid(f ** power, u))


def doubling_cov_quadrature(s: int, t: int, points: int = 2 ** 20) -> float:
    """Quadrature oracle for Cov(f(2^s U), f(2^t U)), f the circle distance to 0."""
    if not 0 <= s < t:
        raise ValueError(f"need 0 <= s < t, got {(s, t)}")
    u = np.linspace(0.0, 1.0, points + 1)
    fs = np.minimum(2.0 ** s * u % 1.0, 1.0 - (2.0 ** s * u % 1.0))
    ft = np.minimum(2.0 ** t * u % 1.0, 1.0 - (2.0 ** t * u % 1.0))
    mean = 0.25
    return float(np.trapezoid(fs * ft, u)) - mean * mean


# -- reversible Markov shifts ---------------------------------------------------

def mismatch_kernel(n_symbols: int) -> np.ndarray:
    """h(i,j) = 1_{i != j} on E x E."""
    return 1.0 - np.eye(n_symbols)


@dataclass
class MarkovSpectrum:
    """Spectral data of a reversible chain and the CLT variance of a pair statistic."""

    P: np.ndarray
    pi: np.ndarray
    theta: float
    v_h: float
    sigma_h2_series: float
    sigma_h2_spectral: float

    @property
    def sigma_h(self) -> float:
        return math.sqrt(self.sigma_h2_spectral)


def markov_spectrum(P: np.ndarray, h: Optional[np.ndarray] = None,
                    series_tol: float = 1e-14, series_cap: int = 100_000) -> MarkovSpectrum:
    """CLT variance of a statistic of two independent copies of a reversible chain.

    The product chain has transition kron(P, P); the variance is computed both
    as the truncated covariance series v_h + 2 sum_t Cov(h_0, h_t) (truncated
    once theta^t v_h < series_tol, using |gamma_t| <= theta^t v_h) and through
    the eigendecomposition sum (1+rho)/(1-rho) |<e_rho, h_centered>|^2 of the
    reversibility-symmetrized product chain on the mean-zero subspace.  An
    orthonormal eigenbasis makes degenerate eigenvalues unambiguous.
    """
    P = np.asarray(P, dtype=float)
    validate_transition_matrix(P)
    pi = stationary_distribution(P)
    check_reversible(P, pi)
    s = P.shape[0]
    h = mismatch_kernel(s) if h is None else np.asarray(h, dtype=float)
    if h.shape != (s, s):
        raise ValueError(f"statistic must be an {s} x {s} matrix, got {h.shape}")

    # theta: second largest eigenvalue modulus of P, via the symmetrized form
    dp = np.sqrt(pi)
    sym_p = (dp[:, None] * P) / dp[None, :]
    evals_p = np.sort(np.abs(eigh(sym_p, eigvals_only=True)))
    theta = float(evals_p[-2])

    R = np.kron(P, P)
    Pi = np.outer(pi, pi).ravel()
    hv = h.ravel()
    hbar = hv - float(Pi @ hv)
    v_h = float(Pi @ hbar ** 2)

    # covariance series on the product chain
    sigma_series = v_h
    v = hbar.copy()
    t = 0
    while t < series_cap:
        t += 1
        v = R @ v
        gamma = float(Pi @ (hbar * v))
        sigma_series += 2.0 * gamma
        if theta ** t * v_h < series_tol:
            break

    # spectral sum over an orthonormal eigenbasis of the symmetrized product chain
    d = np.sqrt(Pi)
    sym_r = (d[:, None] * R) / d[None, :]
    rho, vecs = eigh(sym_r)
    coeff = vecs.T @ (d * hbar)
    keep = np.abs(rho - 1.0) > 1e-12
    sigma_spectral = float(np.sum((1.0 + rho[keep]) / (1.0 - rho[keep]) * coeff[keep] ** 2))

    return MarkovSpectrum(P, pi, theta, v_h, float(sigma_series), sigma_spectral)


@dataclass
class MarkovRateBounds:
    """Bounds for the W_1 gap of the normalized mismatch pair law at length m."""

    upper: float                      # sqrt(2 v_h (1+theta) / (m (1-theta)))
    asymptotic_lower_scaled: float    # liminf of sqrt(m) * W_1 >= sqrt(2) sigma / sqrt(pi)
    eventual_lower: float             # sigma / sqrt(2 pi m), valid for large m


def markov_rate_bounds(spectrum: MarkovSpectrum, m: int) -> MarkovRateBounds:
    if m < 1:
        raise ValueError(f"orbit length must be >= 1, got {m}")
    upper = math.sqrt(2.0 * spectrum.v_h * (1.0 + spectrum.theta)
                      / (m * (1.0 - spectrum.theta)))
    asym = SQRT2 * spectrum.sigma_h / math.sqrt(math.pi)
    eventual = spectrum.sigma_h / math.sqrt(2.0 * math.pi * m)
    return MarkovRateBounds(upper, asym, eventual)


def gaussian_mean_abs_diff(sigma: float) -> float:
    """E|G - G'| for independent N(0, sigma^2) variables: 2 sigma / sqrt(pi)."""
    return 2.0 * sigma / math.sqrt(math.pi)


# -- exact laws over cyclic rotations -------------------------------------------

@dataclass
class ExactLaw:
    """Exact finite array law over a cyclic self-pair.

    Keys are flattened arrays of integer metric numerators (the metric takes
    values k/q), in the same dX, dY, aX, aY order as sampled arrays; values
    are exact rational masses.
    """

    spec: ArraySpec
    q: int
    entries: Dict[Tuple[int, ...], Fraction]

    @property
    def support_size(self) -> int:
        return len(self.entries)

    def atoms(self) -> Tuple[np.ndarray, np.ndarray]:
        """(points, masses) as floats, points scaled to metric values."""
        keys = sorted(self.entries)
        pts = np.asarray(keys, dtype=float) / self.q
        masses = np.asarray([float(self.entries[k]) for k in keys])
        return pts, masses

    def total_mass(self) -> Fraction:
        return sum(self.entries.values(), Fraction(0))


def cyclic_exact_law(joining: Joining, spec: ArraySpec, cap: int = 10 ** 6) -> ExactLaw:
    """Enumerate the exact array law of a finitely supported cyclic joining.

    Walks all ordered n-tuples of support atoms with product masses; all
    distances are exact integer numerators over the common group order.
    Equal-mass supports are enumerated vectorized, general masses atom by
    atom with exact rationals.
    """
    X, Y = joining.left, joining.right
    if not (isinstance(X, CyclicRotation) and isinstance(Y, CyclicRotation)):
        raise TypeError("exact laws require cyclic systems on both coordinates")
    if X.q != Y.q:
        raise ValueError("exact laws require a common group order")
    q = X.q
    support = joining.exact_support()
    total = len(support) ** spec.n
    if total > cap:
        raise BudgetError(f"enumeration of {total} tuples exceeds cap {cap}")

    n, m, R = spec.n, spec.m, spec.R
    ts = np.arange(m, dtype=np.int64)
    anchors_x = np.array([int(X.anchor(r)[0]) for r in range(1, R + 1)], dtype=np.int64)
    anchors_y = np.array([int(Y.anchor(r)[0]) for r in range(1, R + 1)], dtype=np.int64)

    def key_rows(ox: np.ndarray, oy: np.ndarray) -> np.ndarray:
        """Flattened integer arrays for a batch of orbit tuples (T, n, m)."""
        T = ox.shape[0]
        dX = X.dist_numerator(ox[:, :, None, :, None], ox[:, None, :, None, :])
        dY = Y.dist_numerator(oy[:, :, None, :, None], oy[:, None, :, None, :])
        parts = [dX.reshape(T, -1), dY.reshape(T, -1)]
        if R > 0:
            parts.append(X.dist_numerator(ox[..., None], anchors_x).reshape(T, -1))
            parts.append(Y.dist_numerator(oy[..., None], anchors_y).reshape(T, -1))
        return np.concatenate(parts, axis=1)

    entries: Dict[Tuple[int, ...], Fraction] = {}
    masses = [w for _, _, w in support]
    if len(set(masses)) == 1 and total * spec.flat_dim <= 2 ** 24:
        xs = np.array([x for x, _, _ in support], dtype=np.int64)
        ys = np.array([y for _, y, _ in support], dtype=np.int64)
        idx = np.indices((len(support),) * n).reshape(n, -1).T  # (total, n)
        ox = (xs[idx][:, :, None] + X.g * ts[None, None, :]) % q
        oy = (ys[idx][:, :, None] + Y.g * ts[None, None, :]) % q
        rows = key_rows(ox, oy)
        uniq, counts = np.unique(rows, axis=0, return_counts=True)
        base = masses[0] ** n
        for row, count in zip(uniq, counts):
            entries[tuple(int(v) for v in row)] = base * int(count)
    else:
        for combo in itertools.product(support, repeat=n):
            mass = Fraction(1)
            for _, _, w in combo:
                mass *= w
            ox = np.array([(x + X.g * ts) % q for x, _, _ in combo])[None]
            oy = np.array([(y + Y.g * ts) % q for _, y, _ in combo])[None]
            key = tuple(int(v) for v in key_rows(ox, oy)[0])
            entries[key] = entries.get(key, Fraction(0)) + mass
    return ExactLaw(spec, q, entries)


def cyclic_distance_law(q: int) -> Dict[int, Fraction]:
    """Exact law of the metric numerator between two independent uniform points.

    The difference of two uniforms is uniform on Z/q, so each residue d
    contributes mass 1/q at numerator min(d, q - d).
    """
    law: Dict[int, Fraction] = {}
    for d in range(q):
        k = min(d, q - d)
        law[k] = law.get(k, Fraction(0)) + Fraction(1, q)
    return law


def cyclic_pair_gap_second_moment(q: int) -> Fraction:
    """Exact E (r - s)^2 for independent copies of the pair distance on Z/q.

    Enumerates the product of the distance law with itself; this equals
    2 Var(R) and serves as the independent route to that constant.
    """
    law = cyclic_distance_law(q)
    acc = Fraction(0)
    for r, mr in law.items():
        for s, ms in law.items():
            acc += mr * ms * Fraction((r - s) ** 2, q * q)
    return acc


def exact_expectation(law: ExactLaw, fn: Callable[[np.ndarray], Fraction]) -> Fraction:
    """Exact expectation of a rational-valued function of the integer key array."""
    acc = Fraction(0)
    for key, mass in law.entries.items():
        acc += mass * fn(np.asarray(key, dtype=np.int64))
    return acc


def exact_pair00_squared_gap(law: ExactLaw) -> Fraction:
    """Exact E (r - s)^2 where (r, s) are the time-zero two-particle distances."""
    if law.spec.n < 2:
        raise ValueError("needs at least two particles")
    mm = law.spec.m * law.spec.m
    ix = mm  # dX[0, 1, 0, 0] in row-major (n, n, m, m)
    iy = law.spec.pair_dim + mm
    q2 = law.q * law.q

    def fn(key: np.ndarray) -> Fraction:
        d = int(key[ix]) - int(key[iy])
        return Fraction(d * d, q2)

    return exact_expectation(law, fn)


def cyclic_distance_variance(q: int) -> Fraction:
    """Exact Var d(X1, X2) for independent uniform points on Z/q."""
    vals = [Fraction(min(k, q - k), q) for k in range(q)]
    mean = sum(vals, Fraction(0)) / q
    return sum((v - mean) ** 2 for v in vals) / q


# -- constants table -------------------------------------------------------------

def constants_table(K: int = 24, markov_P: Optional[np.ndarray] = None) -> Dict[str, float]:
    """Oracle values consumed by the acceptance suite and the CLI reporter."""
    if markov_P is None:
        markov_P = np.array([[0.7, 0.3], [0.3, 0.7]])
    spec = markov_spectrum(markov_P)
    table = {
        "bernoulli_weight_sum": bernoulli_weight_sum(),
        "bernoulli_weight_square_sum": bernoulli_weight_square_sum(),
        "bernoulli_var_R": bernoulli_var_R(),
        "bernoulli_var_R_truncated": bernoulli_var_R(K),
        "bernoulli_pair_gap_second_moment": 2.0 * bernoulli_var_R(),
        "bernoulli_certificate_value": bernoulli_certificate_value(),
        "bernoulli_truncation_K": float(K),
        "doubling_mean_f": 0.25,
        "doubling_mean_f_sq": 1.0 / 12.0,
        "doubling_var_f": 1.0 / 48.0,
        "markov_theta": spec.theta,
        "markov_v_h": spec.v_h,
        "markov_sigma_h2_series": spec.sigma_h2_series,
        "markov_sigma_h2_spectral": spec.sigma_h2_spectral,
        "markov_sqrt_m_limit": gaussian_mean_abs_diff(spec.sigma_h),
    }
    for m in (1, 4, 16, 64):
        lo, hi = doubling_rate_bounds(m)
        table[f"doubling_w1_lower_m{m}"] = lo
        table[f"doubling_w1_upper_m{m}"] = hi
        table[f"doubling_var_Am_m{m}"] = doubling_var_Am(m)
    return table
