"""Ordered-eigenvalue moments of 4x4 complex Wishart matrices.

Let ``W = X X^H`` where ``X`` is 4 x n with i.i.d. standard complex Gaussian
entries (unit total variance per entry) and let the ordered eigenvalues be
``lam_1 > lam_2 > lam_3 > lam_4 > 0``.  Their joint density on the ordered
cone is

    p(lam) = K * V(lam)^2 * prod_k lam_k^(n-4) * exp(-lam_k)

with ``V`` the Vandermonde determinant and
``K = 1 / (12 (n-1)! (n-2)! (n-3)! (n-4)!)``.  Expanding ``V^2`` into its
201 monomials reduces every joint moment ``E[prod lam_k^m_k]`` to a signed
sum of ordered exponential-monomial integrals

    I(a_1..a_4) = int_{l1>l2>l3>l4>0} prod_k l_k^{a_k} e^{-l_k} dl .

``I`` is evaluated exactly (integer arithmetic) by a linear-time suffix
recursion, so all moments here are exact rationals: no floating-point
cancellation occurs no matter how large ``n`` gets.

A Monte Carlo sampler for the same ensemble is provided as the independent
oracle route; the two must never be merged.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache
from itertools import permutations

import numpy as np

__all__ = [
    "VANDERMONDE_SQ_MULTISET_COEFFS",
    "vandermonde_sq_monomials",
    "ordered_exp_monomial_integral",
    "joint_moment",
    "sample_wishart_eigs",
]

# Coefficients of the squared Vandermonde polynomial in four variables,
# keyed by the sorted exponent multiset (the polynomial is symmetric, so the
# coefficient depends only on the multiset).  Regenerable by expanding
# prod_{i<j} (x_i - x_j)^2; asserted against that expansion in the tests.
VANDERMONDE_SQ_MULTISET_COEFFS: dict[tuple[int, int, int, int], int] = {
    (0, 2, 4, 6): 1,
    (0, 2, 5, 5): -2,
    (0, 3, 3, 6): -2,
    (0, 3, 4, 5): 2,
    (0, 4, 4, 4): -6,
    (1, 1, 4, 6): -2,
    (1, 1, 5, 5): 4,
    (1, 2, 3, 6): 2,
    (1, 2, 4, 5): -2,
    (1, 3, 3, 5): -4,
    (1, 3, 4, 4): 4,
    (2, 2, 2, 6): -6,
    (2, 2, 3, 5): 4,
    (2, 2, 4, 4): 4,
    (2, 3, 3, 4): -6,
    (3, 3, 3, 3): 24,
}


def vandermonde_sq_monomials() -> list[tuple[tuple[int, int, int, int], int]]:
    """All 201 (exponent tuple, coefficient) monomials of V(x1..x4)^2."""
    out = []
    for ms, c in VANDERMONDE_SQ_MULTISET_COEFFS.items():
        for tup in set(permutations(ms)):
            out.append((tup, c))
    return out


_MONOMIALS = vandermonde_sq_monomials()


@lru_cache(maxsize=65536)
def ordered_exp_monomial_integral(alphas: tuple[int, int, int, int]) -> Fraction:
    """Exact integral of prod_k x_k^{a_k} e^{-x_k} over x1 > x2 > x3 > x4 > 0.

    Peels variables from the outside in.  The intermediate function of the
    next variable is held in the divided-power basis u_P = c_P * P!, where
    integrating ``t^P e^{-r t}`` from x to infinity becomes the suffix
    recursion ``S_j = u_j + S_{j+1} / r``: one pass per variable, all exact
    integers over a power-of-r denominator.
    """
    if any(a < 0 for a in alphas):
        raise ValueError("exponents must be non-negative")
    u = [1]  # u_P coefficients; current function is sum_P u_P x^P / P! * e^{-r x}
    den = 1
    r = 0
    for a in alphas:
        r += 1
        # multiply by x^a e^{-x}: shift powers, u'_{P+a} = u_P * (P+a)!/P!
        nu = [0] * (len(u) + a)
        for p, up in enumerate(u):
            if up:
                ratio = 1
                for t in range(p + 1, p + a + 1):
                    ratio *= t
                nu[p + a] = up * ratio
        # integrate from x to infinity at rate r via T_j = nu_j r^(L-1-j) + T_{j+1};
        # the new u-basis coefficients are T_j * r^j over an extra r^L denominator
        length = len(nu)
        pows = [1] * length
        for j in range(length - 2, -1, -1):
            pows[j] = pows[j + 1] * r
        out = [0] * length
        acc = 0
        for j in range(length - 1, -1, -1):
            acc = nu[j] * pows[j] + acc
            out[j] = acc
        rj = 1
        for j in range(length):
            out[j] *= rj
            rj *= r
        den *= r**length
        u = out
    # evaluate at the lower limit 0: only the constant u-basis term survives
    return Fraction(u[0], den)


def _normalizer(nnt: int) -> Fraction:
    k = Fraction(1, 12)
    for d in range(1, 5):
        k /= math.factorial(nnt - d)
    return k


def joint_moment(nnt: int, powers: tuple[int, int, int, int]) -> Fraction:
    """Exact E[lam_1^p1 lam_2^p2 lam_3^p3 lam_4^p4] for CW(nnt, I_4) ordered eigenvalues.

    ``nnt`` is the sample count (matrix columns); requires nnt >= 4.
    """
    if nnt < 4:
        raise ValueError(f"need at least 4 samples for a full-rank 4x4 Wishart, got {nnt}")
    base = nnt - 4
    total = Fraction(0)
    for tup, coeff in _MONOMIALS:
        al = (
            base + tup[0] + powers[0],
            base + tup[1] + powers[1],
            base + tup[2] + powers[2],
            base + tup[3] + powers[3],
        )
        total += coeff * ordered_exp_monomial_integral(al)
    return total * _normalizer(nnt)


def sample_wishart_eigs(
    nnt: int,
    draws: int,
    rng: np.random.Generator,
    chunk: int = 20000,
) -> np.ndarray:
    """Eigenvalues of `draws` complex Wishart(nnt, I_4) samples, descending order.

    Entries of the underlying 4 x nnt matrices are CN(0, 1).  Returns an
    array of shape (draws, 4).
    """
    if nnt < 4:
        raise ValueError("nnt must be >= 4")
    out = np.empty((draws, 4))
    for start in range(0, draws, chunk):
        m = min(chunk, draws - start)
        x = rng.standard_normal((m, 4, nnt)) + 1j * rng.standard_normal((m, 4, nnt))
        x *= np.sqrt(0.5)
        gram = x @ x.conj().transpose(0, 2, 1)
        out[start : start + m] = np.linalg.eigvalsh(gram)[:, ::-1]
    return out
