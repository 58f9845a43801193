"""Normalized form factors of the field and density operators.

All products are accumulated as sums of logarithms with the phase tracked
separately, so that moduli stay representable for a dozen particles even
when rapidity differences are O(1/L). Batched cores take one ket and a
stack of bra rapidity sets.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bethe import BetheState, log_gaudin_det


@dataclass(frozen=True)
class FormFactorValue:
    """Complex number stored as (log-modulus, phase in (-pi, pi])."""
    log_magnitude: float
    phase: float

    @classmethod
    def from_complex(cls, z: complex) -> "FormFactorValue":
        if z == 0:
            return cls(-math.inf, 0.0)
        return cls(math.log(abs(z)), _wrap(math.atan2(z.imag, z.real)))

    @property
    def modulus(self) -> float:
        return math.exp(self.log_magnitude)

    @property
    def modulus_sq(self) -> float:
        return math.exp(2 * self.log_magnitude)

    @property
    def value(self) -> complex:
        if self.log_magnitude == -math.inf:
            return 0j
        return complex(math.exp(self.log_magnitude) * math.cos(self.phase),
                       math.exp(self.log_magnitude) * math.sin(self.phase))

    def to_record(self) -> dict:
        return {"log_magnitude": self.log_magnitude, "phase": self.phase,
                "modulus_sq": self.modulus_sq}


# single-pair evaluations switch to multiprecision above this condition number of 1 + U
COND_LIMIT = 1e3


def _dps_for(cond: float) -> int:
    return 30 + int(math.log10(max(cond, 1.0)))


def _wrap(phi):
    """Map angles to (-pi, pi]."""
    out = np.pi - np.mod(np.pi - np.asarray(phi, float), 2 * np.pi)
    return float(out) if np.ndim(out) == 0 else out


def _pair_logs(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """log|x| summed over the last axis and count of negative entries."""
    return np.log(np.abs(x)).sum(-1), (x < 0).sum(-1)


def _triu(n: int):
    return np.triu_indices(n, 1)


def _vplus_minus(lam: np.ndarray, mu: np.ndarray, c: float):
    """V_j^+ - V_j^- with V_j^{+-} = prod_m (mu_m - lam_j +- ic) / prod_m (lam_m - lam_j +- ic).

    lam: (N,), mu: (M, n). Returns (M, N) complex.
    """
    A = mu[:, None, :] - lam[None, :, None]              # (M, N, n)  mu_m - lam_j
    B = lam[None, :] - lam[:, None]                      # (N, N)     lam_m - lam_j
    vp = np.prod(A + 1j * c, -1) / np.prod(B + 1j * c, -1)
    vm = np.prod(A - 1j * c, -1) / np.prod(B - 1j * c, -1)
    return vp - vm, A, B


def _check_distinct(A: np.ndarray):
    if np.any(A == 0):
        raise ValueError("bra and ket share a rapidity; the formula is singular")


# --------------------------------------------------------------------------
# field
# --------------------------------------------------------------------------

def field_ff_batch(lam: np.ndarray, mus: np.ndarray, L: float, c: float, *,
                   log_norm_lam: float | None = None,
                   log_norm_mus: np.ndarray | None = None,
                   p: int | np.ndarray | None = None,
                   s: int | np.ndarray | None = None,
                   return_cond: bool = False):
    """Field form factors <mu|psi(0)|lam> for one ket and many bras.

    Args:
        lam: ket rapidities, shape (N,).
        mus: bra rapidities, shape (M, N-1).
        L, c: system length and coupling.
        log_norm_lam, log_norm_mus: log Gaudin determinants; computed if absent.
        p, s: internal reference indices; by default the index with the largest
            |V^+ - V^-| is used for both.
        return_cond: also return the 2-norm condition number of 1 + U.

    Returns:
        (log_magnitude, phase) arrays of shape (M,), plus the condition
        numbers if requested.
    """
    lam = np.asarray(lam, float)
    mus = np.asarray(mus, float)
    if mus.ndim == 1:
        mus = mus[None, :]
    N, M = len(lam), len(mus)
    if log_norm_lam is None:
        log_norm_lam = float(log_gaudin_det(lam, L, c))
    if log_norm_mus is None:
        log_norm_mus = log_gaudin_det(mus, L, c)
    log_norm_mus = np.broadcast_to(np.asarray(log_norm_mus, float), (M,))
    vd, A, B = _vplus_minus(lam, mus, c)
    _check_distinct(A)
    logvd = np.log(np.abs(vd))
    argvd = np.angle(vd)
    rows = np.arange(M)
    if p is None:
        p = np.argmax(logvd, axis=1)
    if s is None:
        s = p
    p = np.broadcast_to(np.asarray(p), (M,))
    s = np.broadcast_to(np.asarray(s), (M,))

    # U_jk = i/(V_j^+ - V_j^-) [K(l_j - l_k) - 4c^2/((c^2+(l_p-l_k)^2)(c^2+(l_s-l_j)^2))] * pr_j
    d = lam[:, None] - lam[None, :]
    K = 2 * c / (c * c + d * d)
    Bo = B.copy()
    np.fill_diagonal(Bo, 1.0)
    pr = np.prod(A, -1) / np.prod(Bo, -1)[None, :]       # (M, N)
    lp = lam[p][:, None]                                  # (M, 1)
    ls = lam[s][:, None]
    sec = 4 * c * c / ((c * c + (lp - lam[None, :]) ** 2)[:, None, :]
                       * (c * c + (ls - lam[None, :]) ** 2)[:, :, None])
    U = (1j / vd * pr)[:, :, None] * (K[None] - sec)
    sign_det, logdet = np.linalg.slogdet(np.eye(N)[None] + U)

    iu_l, iu_m = _triu(N), _triu(N - 1)
    dl = lam[iu_l[0]] - lam[iu_l[1]]
    dm = mus[:, iu_m[0]] - mus[:, iu_m[1]]
    log_vand = np.log(np.abs(dl)).sum() + np.log(np.abs(dm)).sum(-1)
    log_den, neg_den = _pair_logs(A.reshape(M, -1))
    log_rad = 0.5 * (np.log(c * c + dl * dl).sum() - np.log(c * c + dm * dm).sum(-1))
    log_vv = logvd.sum(-1) - logvd[rows, p] - logvd[rows, s]
    arg_vv = argvd.sum(-1) - argvd[rows, p] - argvd[rows, s]

    logmag = (-(N - 0.5) * math.log(L) - 0.5 * (log_norm_lam + log_norm_mus)
              + log_vand - log_den + log_rad + log_vv + logdet)
    # i^{N+1} (-1)^{N(N-1)/2} from the prefactor, i^{N-1} from the square root
    phase = (np.pi / 2 * (N + 1) + np.pi * (N * (N - 1) // 2) + np.pi / 2 * (N - 1)
             + np.pi * neg_den + arg_vv + np.angle(sign_det))
    if return_cond:
        return logmag, _wrap(phase), np.linalg.cond(np.eye(N)[None] + U)
    return logmag, _wrap(phase)


def field_ff(bra: BetheState, ket: BetheState, *, p: int | None = None,
             s: int | None = None) -> FormFactorValue:
    """Normalized <bra|psi(0)|ket> with bra holding one particle fewer.

    ``p`` and ``s`` are 0-based reference indices; the result does not depend
    on them up to rounding.
    """
    _same_model(bra, ket)
    if bra.N != ket.N - 1:
        raise ValueError("field form factor needs N(bra) = N(ket) - 1")
    lm, ph, cond = field_ff_batch(ket.roots, np.asarray(bra.roots)[None, :],
                                  ket.params.L, ket.params.c, p=p, s=s, return_cond=True)
    if cond[0] > COND_LIMIT:
        pp = int(np.argmax(np.abs(_vplus_minus(np.asarray(ket.roots), np.asarray(bra.roots)[None, :],
                                                ket.params.c)[0][0]))) if p is None else p
        z = ff_reference("field", ket.roots, bra.roots, ket.params.L, ket.params.c,
                         p=pp, s=pp if s is None else s, dps=_dps_for(cond[0]))
        return FormFactorValue.from_complex(z)
    return FormFactorValue(float(lm[0]), float(ph[0]))


# --------------------------------------------------------------------------
# density
# --------------------------------------------------------------------------

def density_ff_batch(lam: np.ndarray, mus: np.ndarray, L: float, c: float,
                     momentum_diff: np.ndarray | None = None, *,
                     log_norm_lam: float | None = None,
                     log_norm_mus: np.ndarray | None = None,
                     p: int | np.ndarray | None = None,
                     coincidence_shift: float | None = None,
                     return_cond: bool = False):
    """Density form factors <mu|sigma(0)|lam> for one ket and many bras.

    ``momentum_diff`` is sum(lam) - sum(mu) per bra; pass the exact value
    2 pi (sum I - sum J)/L when the Bethe numbers are known. Equal momenta
    give an exactly vanishing element (log_magnitude = -inf).

    Bras sharing a rapidity with the ket (this happens for symmetric states)
    make the expression 0/0. With ``coincidence_shift`` = h such rows are
    evaluated as the mean of the values with the shared mu_j moved by +-h,
    which is accurate to O(h^2).
    """
    lam = np.asarray(lam, float)
    mus = np.asarray(mus, float)
    if mus.ndim == 1:
        mus = mus[None, :]
    N, M = len(lam), len(mus)
    if momentum_diff is None:
        momentum_diff = lam.sum() - mus.sum(-1)
    momentum_diff = np.broadcast_to(np.asarray(momentum_diff, float), (M,))
    if log_norm_lam is None:
        log_norm_lam = float(log_gaudin_det(lam, L, c))
    if log_norm_mus is None:
        log_norm_mus = log_gaudin_det(mus, L, c)
    log_norm_mus = np.broadcast_to(np.asarray(log_norm_mus, float), (M,))
    if coincidence_shift is not None:
        A0 = np.abs(mus[:, None, :] - lam[None, :, None])
        near = A0 <= 1e-9 * (1.0 + np.abs(lam)[None, :, None])
        bad = near.any(axis=(1, 2))
        if bad.any():
            out_m = np.empty(M)
            out_p = np.empty(M)
            if (~bad).any():
                out_m[~bad], out_p[~bad] = density_ff_batch(
                    lam, mus[~bad], L, c, momentum_diff[~bad],
                    log_norm_lam=log_norm_lam, log_norm_mus=log_norm_mus[~bad])
            h = coincidence_shift * near[bad].any(axis=1)
            vals = 0
            for sgn in (1.0, -1.0):
                lm, ph = density_ff_batch(lam, mus[bad] + sgn * h, L, c, momentum_diff[bad],
                                          log_norm_lam=log_norm_lam,
                                          log_norm_mus=log_norm_mus[bad])
                vals = vals + 0.5 * np.exp(lm + 1j * ph)
            with np.errstate(divide="ignore"):
                out_m[bad] = np.log(np.abs(vals))
            out_p[bad] = np.angle(vals)
            return out_m, out_p
    vd, A, B = _vplus_minus(lam, mus, c)
    _check_distinct(A)
    logvd = np.log(np.abs(vd))
    argvd = np.angle(vd)
    rows = np.arange(M)
    if p is None:
        p = np.argmax(logvd, axis=1)
    p = np.broadcast_to(np.asarray(p), (M,))

    # U'_jk = i (mu_j - lam_j)/(V_j^+ - V_j^-) [K(l_j - l_k) - K(l_p - l_k)] prod_{m!=j} (mu_m - l_j)/(l_m - l_j)
    d = lam[:, None] - lam[None, :]
    K = 2 * c / (c * c + d * d)
    idx = np.arange(N)
    Ao = A.copy()
    Ao[:, idx, idx] = 1.0
    Bo = B.copy()
    np.fill_diagonal(Bo, 1.0)
    pr = np.prod(Ao, -1) / np.prod(Bo, -1)[None, :]
    diag = A[:, idx, idx]                                 # mu_j - lam_j
    Kp = 2 * c / (c * c + (lam[p][:, None] - lam[None, :]) ** 2)   # (M, N)
    U = (1j * diag / vd * pr)[:, :, None] * (K[None] - Kp[:, None, :])
    sign_det, logdet = np.linalg.slogdet(np.eye(N)[None] + U)

    iu = _triu(N)
    dl = lam[iu[0]] - lam[iu[1]]
    dm = mus[:, iu[0]] - mus[:, iu[1]]
    log_vand = np.log(np.abs(dl)).sum() + np.log(np.abs(dm)).sum(-1)
    log_den, neg_den = _pair_logs(A.reshape(M, -1))
    log_rad = 0.5 * (np.log(c * c + dl * dl).sum() - np.log(c * c + dm * dm).sum(-1))
    log_vv = logvd.sum(-1) - logvd[rows, p]
    arg_vv = argvd.sum(-1) - argvd[rows, p]

    with np.errstate(divide="ignore"):
        log_pd = np.log(np.abs(momentum_diff))
    logmag = (log_pd - N * math.log(L) - 0.5 * (log_norm_lam + log_norm_mus)
              + log_vand - log_den + log_rad + log_vv + logdet)
    phase = (np.pi / 2 * (N + 1) + np.pi * (N * (N - 1) // 2) + np.pi * (momentum_diff < 0)
             + np.pi * neg_den + arg_vv + np.angle(sign_det))
    phase = np.where(np.isneginf(logmag), 0.0, phase)
    if return_cond:
        return logmag, _wrap(phase), np.linalg.cond(np.eye(N)[None] + U)
    return logmag, _wrap(phase)


def density_ff(bra: BetheState, ket: BetheState, *, p: int | None = None) -> FormFactorValue:
    """Normalized <bra|sigma(0)|ket> between distinct states of equal N."""
    _same_model(bra, ket)
    if bra.N != ket.N:
        raise ValueError("density form factor needs equal particle numbers")
    if bra.numbers == ket.numbers:
        raise ValueError("diagonal element: use density_diagonal")
    dP = np.pi * (ket.numbers.total_momentum_index - bra.numbers.total_momentum_index) / ket.params.L
    lm, ph, cond = density_ff_batch(ket.roots, np.asarray(bra.roots)[None, :],
                                    ket.params.L, ket.params.c, np.array([dP]), p=p,
                                    return_cond=True)
    if cond[0] > COND_LIMIT and dP != 0:
        pp = int(np.argmax(np.abs(_vplus_minus(np.asarray(ket.roots), np.asarray(bra.roots)[None, :],
                                                ket.params.c)[0][0]))) if p is None else p
        z = ff_reference("density", ket.roots, bra.roots, ket.params.L, ket.params.c,
                         p=pp, momentum_diff=dP, dps=_dps_for(cond[0]))
        return FormFactorValue.from_complex(z)
    return FormFactorValue(float(lm[0]), float(ph[0]))


def density_diagonal(state: BetheState) -> float:
    """<lam|sigma(0)|lam>/<lam|lam> = N/L."""
    return state.N / state.params.L


def _same_model(a: BetheState, b: BetheState):
    if a.params.L != b.params.L or a.params.c != b.params.c:
        raise ValueError("states belong to different (L, c)")


# --------------------------------------------------------------------------
# low-density approximations
# --------------------------------------------------------------------------

def alpha_shift(lam_i, nu, c: float):
    """alpha_i(nu) = 1/2 + arctan((lam_i - nu)/c)/pi."""
    return 0.5 + np.arctan((np.asarray(lam_i) - nu) / c) / np.pi


def _others(n: int, a: int) -> np.ndarray:
    if not 0 <= a < n:
        raise IndexError(f"hole index {a} out of range for N={n}")
    return np.array([j for j in range(n) if j != a], dtype=int)


def lowdensity_field_bra(ket: BetheState, a: int, shifts: Sequence[int]) -> np.ndarray:
    """Decoupled bra rapidities mu_j = lam_j + (2 pi/L)(n_j + alpha_j(lam_a)), j != a."""
    lam = np.asarray(ket.roots)
    j = _others(ket.N, a)
    n = np.asarray(shifts, float)
    if n.shape != j.shape:
        raise ValueError(f"need {len(j)} shifts")
    return lam[j] + 2 * np.pi / ket.params.L * (n + alpha_shift(lam[j], lam[a], ket.params.c))


def field_ff_lowdensity(ket: BetheState, a: int, shifts: Sequence[int] | None = None, *,
                        mu: np.ndarray | None = None) -> FormFactorValue:
    """Low-density field form factor with hole at ``a`` (0-based).

    The bra rapidities are ``mu`` (matched one-to-one with the ket roots other
    than a) or, if absent, the decoupled values built from ``shifts``.
    """
    L, c = ket.params.L, ket.params.c
    lam = np.asarray(ket.roots)
    j = _others(ket.N, a)
    if mu is None:
        mu = lowdensity_field_bra(ket, a, shifts if shifts is not None else np.zeros(len(j), int))
    mu = np.asarray(mu, float)
    dl = lam[j] - lam[a]
    dmu = mu - lam[j]
    logmag = (-0.5 * math.log(L) + np.sum(np.log(2 * c) - 0.5 * np.log(dl * dl + c * c)
                                          - np.log(L * np.abs(dmu))))
    phase = -np.pi / 2 * ket.N + np.pi * np.sum(dl < 0) + np.pi * np.sum(dmu < 0)
    return FormFactorValue(float(logmag), float(_wrap(phase)))


def lowdensity_density_bra(ket: BetheState, a: int, mu_a: float, shifts: Sequence[int]) -> np.ndarray:
    """mu_j = lam_j + (2 pi/L)(p_j + alpha_j(lam_a) - alpha_j(mu_a)) for j != a."""
    lam = np.asarray(ket.roots)
    j = _others(ket.N, a)
    n = np.asarray(shifts, float)
    if n.shape != j.shape:
        raise ValueError(f"need {len(j)} shifts")
    c = ket.params.c
    return lam[j] + 2 * np.pi / ket.params.L * (n + alpha_shift(lam[j], lam[a], c)
                                                - alpha_shift(lam[j], mu_a, c))


def density_ff_lowdensity(ket: BetheState, a: int, mu_a: float,
                          shifts: Sequence[int] | None = None, *,
                          mu: np.ndarray | None = None) -> FormFactorValue:
    """Low-density density form factor for moving lam_a to mu_a (0-based a)."""
    L, c = ket.params.L, ket.params.c
    lam = np.asarray(ket.roots)
    j = _others(ket.N, a)
    if mu is None:
        mu = lowdensity_density_bra(ket, a, mu_a,
                                    shifts if shifts is not None else np.zeros(len(j), int))
    mu = np.asarray(mu, float)
    if mu_a == lam[a]:
        return FormFactorValue(-math.inf, 0.0)
    dl = lam[j] - lam[a]
    dla = lam[j] - mu_a
    dmu = mu - lam[j]
    gap = mu_a - lam[a]
    logmag = (-math.log(L) + np.sum(np.log(c) - 0.5 * np.log(dl * dl + c * c)
                                    + np.log(c) - 0.5 * np.log(dla * dla + c * c)
                                    + np.log(2 * abs(gap)) - np.log(c * L * np.abs(dmu))))
    phase = np.pi * (np.sum(dmu < 0) + (len(j) if gap < 0 else 0))
    return FormFactorValue(float(logmag), float(_wrap(phase)))


# --------------------------------------------------------------------------
# high-precision reference
# --------------------------------------------------------------------------

def ff_reference(kind: str, lam: Sequence[float], mu: Sequence[float], L: float, c: float, *,
                 p: int = 0, s: int = 0, momentum_diff: float | None = None,
                 dps: int = 40) -> complex:
    """Normalized form factor evaluated in multiprecision for given choices p, s.

    Used to separate the algebraic (p, s)-independence of the determinant
    expressions from the rounding of the double-precision evaluator: in
    double precision a choice with small |V_p^+ - V_p^-| loses digits to
    cancellation in det(1 + U). ``s`` is ignored for the density kind.
    """
    import mpmath as mp

    with mp.workdps(dps):
        I = mp.mpc(0, 1)
        lam = [mp.mpf(float(x)) for x in lam]
        mu = [mp.mpf(float(x)) for x in mu]
        c, L = mp.mpf(c), mp.mpf(L)
        N = len(lam)
        K = lambda x: 2 * c / (c * c + x * x)

        def gaudin(r):
            n = len(r)
            if n == 0:
                return mp.mpf(1)
            G = mp.matrix(n, n)
            for j in range(n):
                for k in range(n):
                    G[j, k] = -K(r[j] - r[k]) / L
                G[j, j] = 1 + sum(K(r[j] - r[m]) for m in range(n)) / L - K(0) / L
            return mp.det(G)

        def vd(j):
            vp = mp.fprod(m - lam[j] + I * c for m in mu) / mp.fprod(
                lam[m] - lam[j] + I * c for m in range(N))
            vm = mp.fprod(m - lam[j] - I * c for m in mu) / mp.fprod(
                lam[m] - lam[j] - I * c for m in range(N))
            return vp - vm

        Vd = [vd(j) for j in range(N)]
        norms = mp.sqrt(gaudin(lam) * gaudin(mu))
        U = mp.matrix(N, N)
        if kind == "field":
            if len(mu) != N - 1:
                raise ValueError("field kind needs N-1 bra rapidities")
            for j in range(N):
                pr = mp.fprod(m - lam[j] for m in mu) / mp.fprod(
                    lam[m] - lam[j] for m in range(N) if m != j)
                for k in range(N):
                    sec = 4 * c * c / ((c * c + (lam[p] - lam[k]) ** 2) * (c * c + (lam[s] - lam[j]) ** 2))
                    U[j, k] = (j == k) + I / Vd[j] * (K(lam[j] - lam[k]) - sec) * pr
            vand = mp.fprod(abs(lam[i] - lam[j]) for i in range(N) for j in range(i + 1, N)) * \
                mp.fprod(abs(mu[i] - mu[j]) for i in range(N - 1) for j in range(i + 1, N - 1))
            den = mp.fprod(m - l for m in mu for l in lam)
            rad = mp.fprod(c * c + (lam[i] - lam[j]) ** 2 for i in range(N) for j in range(i + 1, N)) / \
                mp.fprod(c * c + (mu[i] - mu[j]) ** 2 for i in range(N - 1) for j in range(i + 1, N - 1))
            pre = I ** (N + 1) * (-1) ** (N * (N - 1) // 2) / (L ** (N - mp.mpf(0.5)) * norms)
            val = pre * vand / den * I ** (N - 1) * mp.sqrt(rad) * \
                mp.fprod(Vd) / (Vd[p] * Vd[s]) * mp.det(U)
        elif kind == "density":
            if len(mu) != N:
                raise ValueError("density kind needs N bra rapidities")
            dP = sum(lam) - sum(mu) if momentum_diff is None else mp.mpf(momentum_diff)
            for j in range(N):
                pr = mp.fprod(mu[m] - lam[j] for m in range(N) if m != j) / mp.fprod(
                    lam[m] - lam[j] for m in range(N) if m != j)
                for k in range(N):
                    U[j, k] = (j == k) + I * (mu[j] - lam[j]) / Vd[j] * \
                        (K(lam[j] - lam[k]) - K(lam[p] - lam[k])) * pr
            vand = mp.fprod(abs(lam[i] - lam[j]) for i in range(N) for j in range(i + 1, N)) * \
                mp.fprod(abs(mu[i] - mu[j]) for i in range(N) for j in range(i + 1, N))
            den = mp.fprod(m - l for m in mu for l in lam)
            rad = mp.fprod(c * c + (lam[i] - lam[j]) ** 2 for i in range(N) for j in range(i + 1, N)) / \
                mp.fprod(c * c + (mu[i] - mu[j]) ** 2 for i in range(N) for j in range(i + 1, N))
            pre = I ** (N + 1) * (-1) ** (N * (N - 1) // 2) * dP / (L ** N * norms)
            val = pre * vand / den * mp.sqrt(rad) * mp.fprod(Vd) / Vd[p] * mp.det(U)
        else:
            raise ValueError(f"unknown kind {kind!r}")
        return complex(val)
