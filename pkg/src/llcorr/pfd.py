"""Leading partial-fraction coefficients of the reduced form factors.

The reduced form factor strips the Gaudin norms and powers of L from |FF|^2,
leaving a rational function of the rapidities. Its leading pole
coefficients have closed forms; ``residue_probe`` extracts them numerically
by driving the bra rapidities onto the ket roots and extrapolating.
"""
from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Literal, Sequence

import numpy as np

from .bethe import BetheState
from .formfactor import density_ff_batch, field_ff_batch

EPS_SEQUENCE = (1e-2, 1e-3, 1e-4, 1e-5)


class ExtrapolationError(RuntimeError):
    """Richardson table did not settle; usually a wrong assumed pole order."""


@dataclass(frozen=True)
class ReducedFormFactor:
    """F(lam, mu) = |FF|^2 N_lam N_mu L^(2N-1) (field) or L^(2N) (density)."""
    kind: Literal["field", "density"]
    c: float

    def __call__(self, lam, mu) -> float:
        lam = np.asarray(lam, float)
        mu = np.asarray(mu, float)
        # L and the norms drop out: evaluate at L = 1 with unit norms
        if self.kind == "field":
            if len(mu) != len(lam) - 1:
                raise ValueError("field kind needs len(mu) = len(lam) - 1")
            lm, _ = field_ff_batch(lam, mu[None, :], 1.0, self.c,
                                   log_norm_lam=0.0, log_norm_mus=np.zeros(1))
        elif self.kind == "density":
            if len(mu) != len(lam):
                raise ValueError("density kind needs len(mu) = len(lam)")
            lm, _ = density_ff_batch(lam, mu[None, :], 1.0, self.c,
                                     np.array([lam.sum() - mu.sum()]),
                                     log_norm_lam=0.0, log_norm_mus=np.zeros(1))
        else:
            raise ValueError(f"unknown kind {self.kind!r}")
        return float(np.exp(2 * lm[0]))


def pfd_coeff_field_leading(state: BetheState, a: int) -> float:
    """prod_{i != a} 4c^2/((lam_i - lam_a)^2 + c^2), a 0-based."""
    lam = np.asarray(state.roots)
    if not 0 <= a < state.N:
        raise IndexError(a)
    c = state.params.c
    d = np.delete(lam, a) - lam[a]
    return float(np.prod(4 * c * c / (d * d + c * c)))


def pfd_coeff_density_leading(state: BetheState, a: int, mu_a: float) -> float:
    """prod_{j != a} 4c^2 (lam_a - mu_a)^2 / ([(lam_j-lam_a)^2+c^2][(lam_j-mu_a)^2+c^2])."""
    lam = np.asarray(state.roots)
    if not 0 <= a < state.N:
        raise IndexError(a)
    c = state.params.c
    lo = np.delete(lam, a)
    g = (lam[a] - mu_a) ** 2
    return float(np.prod(4 * c * c * g / (((lo - lam[a]) ** 2 + c * c) * ((lo - mu_a) ** 2 + c * c))))


# --------------------------------------------------------------------------
# extrapolation
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ProbeResult:
    value: float
    error: float
    samples: tuple[float, ...]


def richardson(eps: Sequence[float], vals: Sequence[float], *, rtol: float = 1e-4,
               atol: float = 1e-12) -> ProbeResult:
    """Polynomial (Neville) extrapolation of vals(eps) to eps = 0.

    The error estimate is the change between the two highest orders.
    Raises ExtrapolationError if it exceeds rtol*|value| + atol.
    """
    x = np.asarray(eps, float)
    P = np.asarray(vals, float).copy()
    n = len(x)
    if n < 2:
        raise ValueError("need at least two samples")
    top = [P[0]]
    for k in range(1, n):
        for i in range(n - k):
            # extrapolate to 0 from nodes i..i+k
            P[i] = (x[i + k] * P[i] - x[i] * P[i + 1]) / (x[i + k] - x[i])
        top.append(P[0])
    value, err = float(top[-1]), float(abs(top[-1] - top[-2]))
    if not np.isfinite(value) or err > rtol * abs(value) + atol:
        raise ExtrapolationError(
            f"extrapolation did not converge: value {value:.6e}, change {err:.3e}")
    return ProbeResult(value, err, tuple(float(v) for v in vals))


def residue_probe(rf: ReducedFormFactor, state: BetheState, a: int,
                  mu_a: float | None = None, *,
                  eps: Sequence[float] = EPS_SEQUENCE,
                  direction: Sequence[float] | None = None,
                  rtol: float = 1e-4) -> ProbeResult:
    """Leading coefficient with lam_a unpaired, by a numerical limit.

    Each bra rapidity paired with lam_j (j != a) is set to lam_j + d_j eps,
    and prod_j (d_j eps)^2 F is extrapolated to eps = 0. For the density
    kind the remaining bra rapidity sits at ``mu_a``.

    Args:
        rf: reduced form factor evaluator.
        state: ket state, N <= 4.
        a: 0-based index of the unpaired ket root.
        mu_a: free bra rapidity (density kind only).
        eps: geometric offset sequence.
        direction: per-pair multipliers d_j (default all ones).
        rtol: convergence tolerance of the extrapolation table.
    """
    lam = np.asarray(state.roots, float)
    N = len(lam)
    if N > 4:
        raise ValueError("residue_probe is limited to N <= 4")
    if not 0 <= a < N:
        raise IndexError(a)
    if rf.c != state.params.c:
        raise ValueError("coupling of evaluator and state differ")
    others = np.delete(lam, a)
    d = np.ones(N - 1) if direction is None else np.asarray(direction, float)
    if rf.kind == "density" and mu_a is None:
        raise ValueError("density probe needs mu_a")
    vals = []
    for e in eps:
        mu = others + d * e
        if rf.kind == "density":
            mu = np.insert(mu, a, mu_a)
        vals.append(np.prod((d * e) ** 2) * rf(lam, mu))
    return richardson(eps, vals, rtol=rtol)


def density_vanishing_probe(state: BetheState, a: int, *,
                            eps: Sequence[float] = EPS_SEQUENCE,
                            direction: Sequence[float] | None = None) -> dict:
    """Probe the two density coefficients that should vanish.

    All N bra rapidities are driven onto their partners, mu_j = lam_j + d_j eps.
    The all-double-pole coefficient is the eps -> 0 limit of
    prod_j (d_j eps)^2 F; the coefficient with a simple pole at lam_a is the
    limit of the same quantity divided by d_a eps. Both limits are
    extrapolated and returned together with a scale, the leading non-zero
    coefficient at mu_a = lam_a + c, against which they can be judged.
    """
    lam = np.asarray(state.roots, float)
    N = len(lam)
    if N > 4:
        raise ValueError("probe is limited to N <= 4")
    c = state.params.c
    rf = ReducedFormFactor("density", c)
    d = np.ones(N) if direction is None else np.asarray(direction, float)
    v2, v1 = [], []
    for e in eps:
        g = np.prod((d * e) ** 2) * rf(lam, lam + d * e)
        v2.append(g)
        v1.append(g / (d[a] * e))
    scale = pfd_coeff_density_leading(state, a, lam[a] + c)
    big = 1e300     # never raise: the limits sit at the rounding floor
    r2 = richardson(eps, v2, rtol=big, atol=big)
    r1 = richardson(eps, v1, rtol=big, atol=big)
    return {"double": r2.value, "double_samples": r2.samples,
            "simple": r1.value, "simple_samples": r1.samples, "scale": scale}


# --------------------------------------------------------------------------
# combinatorics of the expansion
# --------------------------------------------------------------------------

def count_pole_assignments(N: int, n: int, m: int, p: int,
                           sets: tuple[frozenset, frozenset, frozenset] | None = None) -> int:
    """Number of (nu, f) giving fixed disjoint sets (I0, I1, I2).

    nu_i in {0, 1, 2} on the N-1 bra points, f maps points with nu_i > 0 to
    the N ket points with: a nu = 2 point shares its image with nobody, and no
    image is hit more than twice. I_k collects the ket points hit exactly k
    times, all by nu = 1 points (I0: not hit at all). Sizes are
    |I0| = n + p + 1, |I1| = m, |I2| = n.
    """
    if sets is None:
        pts = list(range(N))
        I2 = frozenset(pts[:n])
        I0 = frozenset(pts[n:2 * n + p + 1])
        I1 = frozenset(pts[2 * n + p + 1:2 * n + p + 1 + m])
        if 2 * n + p + 1 + m > N:
            return 0
    else:
        I0, I1, I2 = sets
    count = 0
    for nu in itertools.product((0, 1, 2), repeat=N - 1):
        if nu.count(0) != p:
            continue
        active = [i for i, v in enumerate(nu) if v > 0]
        for img in itertools.product(range(N), repeat=len(active)):
            hits = Counter(img)
            if any(h > 2 for h in hits.values()):
                continue
            ok = True
            ones = Counter()
            for i, j in zip(active, img):
                if nu[i] == 2 and hits[j] > 1:
                    ok = False
                    break
                if nu[i] == 1:
                    ones[j] += 1
            if not ok:
                continue
            two_img = {j for i, j in zip(active, img) if nu[i] == 2}
            got0 = frozenset(j for j in range(N) if hits[j] == 0)
            got1 = frozenset(j for j in range(N) if ones[j] == 1 and j not in two_img)
            got2 = frozenset(j for j in range(N) if ones[j] == 2)
            if (got0, got1, got2) == (I0, I1, I2):
                count += 1
    return count


def combinatorial_factor(N: int, n: int, p: int) -> int:
    """(N-1)!/(2^n p!) as an exact integer."""
    num = math.factorial(N - 1)
    den = 2 ** n * math.factorial(p)
    if num % den:
        raise ArithmeticError("factor is not an integer")
    return num // den


# --------------------------------------------------------------------------
# verification table
# --------------------------------------------------------------------------

def verify_table(N: int = 3, c: float = 1.0, L: float = 50.0, numbers: Sequence[float] | None = None,
                 tol: float = 1e-6, vanish_tol: float = 1e-8) -> list[dict]:
    """Residue, vanishing-coefficient and counting checks on one solved state.

    Rows carry name, value, reference, error, tolerance and pass flag. The
    default state has well separated integer-spaced numbers.
    """
    from .bethe import BetheNumbers, ModelParams, solve_bethe

    if numbers is None:
        numbers = np.arange(N) * 3.0 - 3.0 * (N - 1) / 2
    st = solve_bethe(ModelParams(L, c, N), BetheNumbers.from_values(numbers))
    rows = []

    def add(name, value, ref, err, tl):
        rows.append({"check": name, "value": float(value), "reference": float(ref),
                     "error": float(err), "tol": float(tl), "pass": bool(err <= tl)})

    for a in range(N):
        ref = pfd_coeff_field_leading(st, a)
        r = residue_probe(ReducedFormFactor("field", c), st, a)
        add(f"field_residue_a{a}", r.value, ref, abs(r.value / ref - 1), tol)
        mu_a = float(st.roots[a]) + 0.7 * c
        ref = pfd_coeff_density_leading(st, a, mu_a)
        r = residue_probe(ReducedFormFactor("density", c), st, a, mu_a)
        add(f"density_residue_a{a}", r.value, ref, abs(r.value / ref - 1), tol)
        v = density_vanishing_probe(st, a)
        add(f"density_double_a{a}", v["double"], 0.0, abs(v["double"]) / v["scale"], vanish_tol)
        add(f"density_simple_a{a}", v["simple"], 0.0, abs(v["simple"]) / v["scale"], vanish_tol)
    for n in range(0, N):
        for p in range(0, N):
            m = N - 2 * n - p - 1
            if m >= 0:
                cnt = count_pole_assignments(N, n, m, p)
                ref = combinatorial_factor(N, n, p)
                add(f"count_N{N}_n{n}_m{m}_p{p}", cnt, ref, abs(cnt - ref), 0)
    return rows
