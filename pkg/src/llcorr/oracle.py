"""Brute-force Lehmann sums over exact finite-size form factors.

The field sum runs over (N-1)-particle states whose quantum numbers sit
near the ket's: each J_i is attached to an anchor I_j (an anchor may carry
at most two of them) and the offsets d_i = J_i - I_j must satisfy
sum d_i^2 <= W^2. The density sum moves one particle anywhere inside a
rapidity window, tapered smoothly to zero at its edge, while the others
stay within the same kind of ball around their own numbers.

All per-state work (Bethe solves, form factors) is batched; terms are
accumulated with math.fsum, which is exactly rounded and therefore
independent of chunking and thread count.
"""
from __future__ import annotations

import itertools
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bethe import BetheNumbers, BetheState, ModelParams, log_gaudin_det, solve_bethe, solve_bethe_batch
from .formfactor import (density_ff, density_ff_batch, field_ff, field_ff_batch,
                         field_ff_lowdensity, density_ff_lowdensity)
from .rootdensity import AtomicDensity, RootDensity, dilute_sampler, particle_density
from .correlator import density_correlator, field_correlator, free_field_correlator


class SaturationError(RuntimeError):
    """The enumerated states miss more sum-rule weight than allowed."""


@dataclass(frozen=True)
class LehmannConfig:
    """Truncation of the spectral sums.

    Attributes:
        number_window: radius W of the offset ball, in units of Bethe numbers.
        max_states: cap on enumerated states (lowest offset norm kept first).
        tol: allowed missing fraction of the x=t=0 field sum rule.
        double_occupancy: allow two bra numbers on one anchor (field).
        mu_window: density only, rapidity half-width for the moved particle.
        taper: density only, width of the smooth cutoff at the window edge.
        workers: threads for the batched evaluation.
        chunk: states per batch.
        strict: raise SaturationError instead of only reporting.
    """
    number_window: float = 40.0
    max_states: int = 20_000_000
    tol: float = 0.01
    double_occupancy: bool = True
    mu_window: float = 40.0
    taper: float = 15.0
    workers: int = 1
    chunk: int = 100_000
    strict: bool = False

    def __post_init__(self):
        if self.number_window <= 0 or self.max_states < 1 or not 0 < self.tol < 1:
            raise ValueError("invalid LehmannConfig")


@dataclass(frozen=True)
class LehmannResult:
    """Value of a truncated Lehmann sum plus diagnostics."""
    value: complex
    saturation: float
    n_states: int
    elapsed: float
    meta: dict = field(default_factory=dict)


# --------------------------------------------------------------------------
# enumeration
# --------------------------------------------------------------------------

def _ball_offsets(k: int, W: float, half: bool) -> np.ndarray:
    """All d in (Z + 1/2)^k (half) or Z^k with |d| <= W, as doubled ints."""
    if k == 0:
        return np.zeros((1, 0), dtype=np.int64)
    R = int(math.floor(W + 1))
    base = np.arange(-R, R + 1, dtype=np.int64)
    d1 = 2 * base + (1 if half else 0)             # doubled offsets
    d1 = d1[np.abs(d1) <= 2 * W]
    out = d1[:, None]
    for _ in range(k - 1):
        sq = (out ** 2).sum(1)
        pieces = []
        for v in d1:
            keep = sq + v * v <= 4 * W * W
            if keep.any():
                sub = out[keep]
                pieces.append(np.hstack([sub, np.full((len(sub), 1), v, dtype=np.int64)]))
        out = np.vstack(pieces) if pieces else np.zeros((0, out.shape[1] + 1), dtype=np.int64)
    return out


def _anchor_tuples(N: int, k: int, double: bool) -> list[tuple[int, ...]]:
    tuples = []
    for comb in itertools.combinations_with_replacement(range(N), k):
        counts = np.bincount(comb, minlength=N) if k else np.zeros(N, int)
        if counts.max(initial=0) > (2 if double else 1):
            continue
        tuples.append(comb)
    return tuples


def _finalize(states: list[np.ndarray], keys: list[np.ndarray], cap: int) -> np.ndarray:
    """Sort rows, drop invalid and duplicate ones, order by priority, apply cap."""
    S = np.vstack(states)
    K = np.concatenate(keys)
    S.sort(axis=1)
    if S.shape[1] > 1:
        ok = np.all(np.diff(S, axis=1) > 0, axis=1)
        S, K = S[ok], K[ok]
    order = np.lexsort(tuple(S[:, i] for i in range(S.shape[1] - 1, -1, -1)) + (K,))
    S = S[order]
    _, first = np.unique(S, axis=0, return_index=True)
    return S[np.sort(first)][:cap]


def field_states(state: BetheState, cfg: LehmannConfig) -> np.ndarray:
    """Doubled Bethe numbers (M, N-1) of the enumerated field intermediate states."""
    N = state.N
    I2 = np.asarray(state.numbers.doubled, dtype=np.int64)
    offs = _ball_offsets(N - 1, cfg.number_window, half=True)
    states, keys = [], []
    for anchors in _anchor_tuples(N, N - 1, cfg.double_occupancy):
        J = I2[list(anchors)][None, :] + offs
        states.append(J)
        keys.append((offs ** 2).sum(1))
    if N == 1:
        return np.zeros((1, 0), dtype=np.int64)
    return _finalize(states, keys, cfg.max_states)


def _smooth_step(s: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for s <= 0, 1 for s >= 1."""
    s = np.clip(s, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1)), 0.0)
        b = np.where(s < 1, np.exp(-1.0 / np.where(s < 1, 1 - s, 1)), 0.0)
    return a / (a + b)


def density_taper(mu: np.ndarray, window: float, width: float) -> np.ndarray:
    """1 for |mu| <= window - width, smoothly 0 at |mu| >= window."""
    return 1.0 - _smooth_step((np.abs(mu) - (window - width)) / width)


def density_states(state: BetheState, cfg: LehmannConfig) -> np.ndarray:
    """Doubled numbers (M, N) with one particle anywhere in the rapidity window."""
    N, L = state.N, state.params.L
    I2 = np.asarray(state.numbers.doubled, dtype=np.int64)
    Jmax = int(math.ceil(cfg.mu_window * L / (2 * math.pi))) + 2
    parity = (N + 1) % 2
    free = np.arange(-2 * Jmax, 2 * Jmax + 1, dtype=np.int64)
    free = free[np.abs(free % 2) == parity]
    offs = _ball_offsets(N - 1, cfg.number_window, half=False)
    states, keys = [], []
    for a in range(N):
        rest = np.delete(I2, a)
        base = rest[None, :] + offs
        key = (offs ** 2).sum(1)
        J = np.hstack([np.repeat(base, len(free), axis=0),
                       np.tile(free, len(base))[:, None]])
        states.append(J)
        keys.append(np.repeat(key, len(free)))
    S = _finalize(states, keys, cfg.max_states)
    # the diagonal is handled separately
    same = np.all(S == np.sort(I2)[None, :], axis=1)
    return S[~same]


# --------------------------------------------------------------------------
# sums
# --------------------------------------------------------------------------

def _map_chunks(fn, M: int, cfg: LehmannConfig):
    bounds = [(i, min(i + cfg.chunk, M)) for i in range(0, M, cfg.chunk)]
    if cfg.workers <= 1:
        return [fn(lo, hi) for lo, hi in bounds]
    with ThreadPoolExecutor(max_workers=cfg.workers) as ex:
        return list(ex.map(lambda b: fn(*b), bounds))


def _fsum_complex(parts: Sequence[np.ndarray]) -> complex:
    allv = np.concatenate(parts) if parts else np.zeros(0, complex)
    return complex(math.fsum(allv.real), math.fsum(allv.imag))


def _field_weights(state: BetheState, Jd: np.ndarray, cfg: LehmannConfig):
    """|FF|^2, energy and momentum per enumerated bra (computed in chunks)."""
    L, c, N = state.params.L, state.params.c, state.N
    lam = np.asarray(state.roots)
    lnl = float(log_gaudin_det(lam, L, c))
    bra_params = ModelParams(L, c, N - 1)

    def work(lo, hi):
        mus, _ = solve_bethe_batch(bra_params, Jd[lo:hi])
        lm, _ = field_ff_batch(lam, mus, L, c, log_norm_lam=lnl,
                               log_norm_mus=log_gaudin_det(mus, L, c))
        return np.exp(2 * lm), (mus * mus).sum(1)

    parts = _map_chunks(work, len(Jd), cfg) or [(np.zeros(0), np.zeros(0))]
    w = np.concatenate([p[0] for p in parts])
    E = np.concatenate([p[1] for p in parts])
    P = np.pi * Jd.sum(1) / L
    return w, E, P


class FieldLehmann:
    """Cached field Lehmann sum for one ket; evaluate at many (x, t)."""

    def __init__(self, state: BetheState, cfg: LehmannConfig = LehmannConfig()):
        if state.N < 1 or state.N > 6:
            raise ValueError("field oracle supports 1 <= N <= 6")
        t0 = time.perf_counter()
        self.state, self.cfg = state, cfg
        self.Jd = field_states(state, cfg)
        if state.N == 1:
            L, c = state.params.L, state.params.c
            self.w = np.array([1.0 / L])
            self.E = np.zeros(1)
            self.P = np.zeros(1)
        else:
            self.w, self.E, self.P = _field_weights(state, self.Jd, cfg)
        lam = np.asarray(state.roots)
        self.E0 = math.fsum(lam * lam)
        self.P0 = math.pi * state.numbers.total_momentum_index / state.params.L
        D = state.N / state.params.L
        self.saturation = math.fsum(self.w) / D
        self.setup_time = time.perf_counter() - t0
        if cfg.strict and self.saturation < 1 - cfg.tol:
            raise SaturationError(
                f"field sum rule saturated to {self.saturation:.5f} < {1 - cfg.tol}")

    def __call__(self, x: float, t: float) -> LehmannResult:
        t0 = time.perf_counter()
        ph = np.exp(1j * (t * (self.E0 - self.E) + x * (self.P - self.P0)))
        val = _fsum_complex([self.w * ph])
        return LehmannResult(val, self.saturation, len(self.w), time.perf_counter() - t0 + self.setup_time)


def lehmann_field(state: BetheState, x: float, t: float,
                  cfg: LehmannConfig = LehmannConfig()) -> LehmannResult:
    """sum_mu |<mu|psi|lam>|^2 exp(i t (E_lam - E_mu) + i x (P_mu - P_lam))."""
    return FieldLehmann(state, cfg)(x, t)


class DensityLehmann:
    """Cached density Lehmann sum for one ket, without the diagonal term.

    The moved particle's rapidity is tapered smoothly to zero at the edge of
    the window. The window actually used at time t is
    min(mu_window, L/(4|t|)): beyond it consecutive terms of the chirp
    exp(-i t mu^2) differ in phase by more than pi and the discrete sum
    stops resolving the oscillation.
    """

    COINCIDENCE_SHIFT = 1e-5

    def __init__(self, state: BetheState, cfg: LehmannConfig = LehmannConfig()):
        if state.N < 1 or state.N > 5:
            raise ValueError("density oracle supports 1 <= N <= 5")
        t0 = time.perf_counter()
        self.state, self.cfg = state, cfg
        L, c, N = state.params.L, state.params.c, state.N
        lam = np.asarray(state.roots)
        self.Jd = density_states(state, cfg)
        lnl = float(log_gaudin_det(lam, L, c))
        sumI = state.numbers.total_momentum_index
        params = state.params

        def work(lo, hi):
            J = self.Jd[lo:hi]
            mus, _ = solve_bethe_batch(params, J)
            dP = np.pi * (sumI - J.sum(1)) / L
            lm, _ = density_ff_batch(lam, mus, L, c, dP, log_norm_lam=lnl,
                                     log_norm_mus=log_gaudin_det(mus, L, c),
                                     coincidence_shift=self.COINCIDENCE_SHIFT)
            far = np.abs(mus[:, :, None] - lam[None, None, :]).min(2).max(1)
            return np.exp(2 * lm), (mus * mus).sum(1), far

        parts = _map_chunks(work, len(self.Jd), cfg)
        cat = (lambda i: np.concatenate([p[i] for p in parts])) if parts else (lambda i: np.zeros(0))
        self.w, self.E, self.far = cat(0), cat(1), cat(2)
        self.P = np.pi * self.Jd.sum(1) / L
        self.E0 = math.fsum(lam * lam)
        self.P0 = math.pi * sumI / L
        self.diagonal = (N / L) ** 2
        self.setup_time = time.perf_counter() - t0

    def window(self, t: float) -> float:
        L = self.state.params.L
        return self.cfg.mu_window if t == 0 else min(self.cfg.mu_window, L / (4 * abs(t)))

    def __call__(self, x: float, t: float, include_diagonal: bool = True) -> LehmannResult:
        t0 = time.perf_counter()
        win = self.window(t)
        width = self.cfg.taper * win / self.cfg.mu_window
        w = self.w * density_taper(self.far, win, width)
        ph = np.exp(1j * (t * (self.E0 - self.E) + x * (self.P - self.P0)))
        val = _fsum_complex([w * ph])
        if include_diagonal:
            val += self.diagonal
        return LehmannResult(val, float("nan"), int(np.count_nonzero(w)) + 1,
                             time.perf_counter() - t0 + self.setup_time,
                             {"diagonal": self.diagonal, "mu_window": win})


def lehmann_density(state: BetheState, x: float, t: float,
                    cfg: LehmannConfig = LehmannConfig(), include_diagonal: bool = True) -> LehmannResult:
    """sum_mu |<mu|sigma|lam>|^2 exp(...) including (N/L)^2 from mu = lam."""
    return DensityLehmann(state, cfg)(x, t, include_diagonal)


def density_window_stability(state: BetheState, x: float, t: float,
                             cfg: LehmannConfig = LehmannConfig()) -> tuple[complex, complex, float]:
    """Values at the configured window and at twice its size, and their gap."""
    a = lehmann_density(state, x, t, cfg).value
    big = LehmannConfig(**{**cfg.__dict__, "number_window": 2 * cfg.number_window,
                           "mu_window": 2 * cfg.mu_window, "taper": 2 * cfg.taper})
    b = lehmann_density(state, x, t, big).value
    return a, b, abs(a - b)


# --------------------------------------------------------------------------
# studies
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class StudyRow:
    D: float
    N: int
    L: float
    x: float
    t: float
    formula: complex
    oracle: complex
    rel_err: float
    saturation: float
    n_states: int
    extra: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        rec = {"D": self.D, "N": self.N, "L": self.L, "x": self.x, "t": self.t,
               "formula_abs": abs(self.formula), "oracle_abs": abs(self.oracle),
               "formula_re": self.formula.real, "formula_im": self.formula.imag,
               "oracle_re": self.oracle.real, "oracle_im": self.oracle.imag,
               "rel_err": self.rel_err, "saturation": self.saturation,
               "n_states": self.n_states}
        rec.update(self.extra)
        return rec


def dilute_state(shape: RootDensity, D: float, c: float, N: int | None = None,
                 L: float | None = None) -> BetheState:
    """Solved state following ``shape`` (normalised to unit mass) at density D.

    With N given, L = N/D and the density is D * shape/|shape|; otherwise L
    must be given and N = round(D L).
    """
    mass = particle_density(shape)
    if N is not None:
        L = N / D
    if L is None:
        raise ValueError("give N or L")
    rho = shape.scaled(D / mass)
    nums = dilute_sampler(rho, L, c=c, n=N)
    return solve_bethe(ModelParams(L, c, len(nums)), nums)


def fit_exponent(D: Sequence[float], err: Sequence[float]) -> float:
    """Least-squares slope of log err against log D."""
    return float(np.polyfit(np.log(np.asarray(D)), np.log(np.asarray(err)), 1)[0])


def lowdensity_convergence_study(shape: RootDensity, D_list: Sequence[float], c: float,
                                 x: float, t: float, *, N: int | None = None,
                                 L: float | None = None, kind: str = "field",
                                 cfg: LehmannConfig = LehmannConfig(),
                                 tol: float = 1e-10, measure: str = "atomic") -> list[StudyRow]:
    """Oracle against closed formula along a sequence of densities.

    Args:
        shape: root-density profile; only its shape matters.
        D_list: decreasing densities.
        c, x, t: coupling and separation.
        N: fixed particle number (L = N/D); otherwise L fixed and N = round(D L).
        kind: "field" or "density".
        cfg: truncation of the Lehmann sums.
        tol: quadrature tolerance for the formula.
        measure: "atomic" evaluates the formula on the empirical root measure
            of the solved state, "smooth" on D * shape.

    For the density kind the rows carry both the value without and with the
    disconnected (N/L)^2 piece.
    """
    D_list = list(D_list)
    if any(b >= a for a, b in zip(D_list, D_list[1:])):
        raise ValueError("D_list must be decreasing")
    rows = []
    mass = particle_density(shape)
    for D in D_list:
        st = dilute_state(shape, D, c, N=N, L=L)
        if st.N < 2:
            raise ValueError(f"D={D} gives N={st.N} < 2")
        rho = AtomicDensity.from_state(st) if measure == "atomic" else shape.scaled(D / mass)
        if kind == "field":
            orc = FieldLehmann(st, cfg)
            o = orc(x, t)
            f = field_correlator(rho, c, x, t, tol).value
            rows.append(StudyRow(D, st.N, st.params.L, x, t, f, o.value,
                                 abs(o.value - f) / abs(f), o.saturation, o.n_states))
        elif kind == "density":
            orc = DensityLehmann(st, cfg)
            o_ex = orc(x, t, include_diagonal=False).value
            o_in = o_ex + orc.diagonal
            f = density_correlator(rho, c, x, t, tol).value
            Dst = st.N / st.params.L
            f_in = f + Dst ** 2
            rows.append(StudyRow(D, st.N, st.params.L, x, t, f, o_ex,
                                 abs(o_ex - f) / abs(f), float("nan"), len(orc.w),
                                 {"rel_err_excl_vs_incl": abs(o_ex - f_in) / abs(f_in),
                                  "rel_err_incl_vs_excl": abs(o_in - f) / abs(f),
                                  "rel_err_incl_vs_incl": abs(o_in - f_in) / abs(f_in)}))
        else:
            raise ValueError(f"unknown kind {kind!r}")
    return rows


def ff_ratio_study(lam_targets: Sequence[float], L_list: Sequence[float], c: float,
                   a: int = 0, shifts: Sequence[int] | None = None) -> list[dict]:
    """|field_ff / field_ff_lowdensity - 1| along L at fixed target rapidities.

    The ket numbers are round(L lam/2pi) at the proper parity; the bra moves
    each j != a by n_j + 1/2. Records 1/(L * min gap) alongside the ratio.
    """
    lam_targets = np.sort(np.asarray(lam_targets, float))
    N = len(lam_targets)
    shifts = np.zeros(N - 1, int) if shifts is None else np.asarray(shifts, int)
    out = []
    for L in L_list:
        half = 0.0 if N % 2 else 0.5
        I = np.round(L * lam_targets / (2 * np.pi) - half) + half
        P = ModelParams(float(L), c, N)
        ket = solve_bethe(P, BetheNumbers.from_values(I))
        others = [j for j in range(N) if j != a]
        J = I[others] + shifts + 0.5
        bra = solve_bethe(P.with_n(N - 1), BetheNumbers.from_values(J))
        ex = field_ff(bra, ket)
        ld = field_ff_lowdensity(ket, a, shifts)
        gap = float(np.min(np.diff(ket.roots))) if N > 1 else float("inf")
        out.append({"L": float(L), "inv_L_gap": 1.0 / (L * gap),
                    "ratio_minus_one": abs(math.exp(ex.log_magnitude - ld.log_magnitude) - 1),
                    "phase_diff": float(np.angle(np.exp(1j * (ex.phase - ld.phase))))})
    return out
