"""Logarithmic Bethe equations of the Lieb-Liniger gas.

The equations are solved in the form

    r_k(lam) = lam_k + (2/L) sum_j arctan((lam_k - lam_j)/c) - 2 pi I_k / L = 0

whose Jacobian is exactly the Gaudin matrix. Bethe numbers are stored as
doubled integers ``2 I_k`` so that half-odd values never go through floats.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

TOL = 1e-12
MAX_ITER = 100


class BetheSolveError(RuntimeError):
    """Newton iteration failed to reach the requested residual."""


@dataclass(frozen=True)
class ModelParams:
    """System length L, coupling c and particle number N."""
    L: float
    c: float
    N: int

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L}")
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")
        if int(self.N) != self.N or self.N < 0:
            raise ValueError(f"N must be a non-negative integer, got {self.N}")

    @property
    def density(self) -> float:
        return self.N / self.L

    def with_n(self, n: int) -> "ModelParams":
        return ModelParams(self.L, self.c, n)


@dataclass(frozen=True)
class BetheNumbers:
    """Strictly increasing quantum numbers, stored doubled.

    Doubled values are even when N is odd and odd when N is even.
    """
    doubled: tuple[int, ...]

    def __post_init__(self):
        d = tuple(int(v) for v in self.doubled)
        object.__setattr__(self, "doubled", d)
        n = len(d)
        want = (n + 1) % 2          # parity of 2I: odd N -> even, even N -> odd
        for v in d:
            if v % 2 != want:
                raise ValueError(
                    f"Bethe number {v / 2} has the wrong parity for N={n}")
        if any(b <= a for a, b in zip(d, d[1:])):
            raise ValueError("Bethe numbers must be strictly increasing")

    @classmethod
    def from_values(cls, values: Sequence[float]) -> "BetheNumbers":
        """Build from plain (half-)integer values, e.g. [-0.5, 0.5]."""
        doubled = []
        for v in values:
            d = 2 * float(v)
            if abs(d - round(d)) > 1e-9:
                raise ValueError(f"{v} is neither integer nor half-odd")
            doubled.append(int(round(d)))
        return cls(tuple(sorted(doubled)))

    @classmethod
    def ground_state(cls, n: int) -> "BetheNumbers":
        return cls(tuple(range(-(n - 1), n, 2)))

    @property
    def values(self) -> np.ndarray:
        return np.asarray(self.doubled, dtype=float) / 2

    @property
    def total_momentum_index(self) -> int:
        """sum of the doubled numbers; P = pi * this / L."""
        return sum(self.doubled)

    def __len__(self) -> int:
        return len(self.doubled)


@dataclass(frozen=True)
class BetheState:
    """A solved eigenstate: parameters, quantum numbers and rapidities."""
    params: ModelParams
    numbers: BetheNumbers
    roots: np.ndarray = field(repr=False)
    residual: float = 0.0

    def __post_init__(self):
        r = np.asarray(self.roots, dtype=float)
        r.setflags(write=False)
        object.__setattr__(self, "roots", r)
        if r.shape != (self.params.N,) or len(self.numbers) != self.params.N:
            raise ValueError("roots, numbers and N disagree")
        if np.any(np.diff(r) <= 0):
            raise ValueError("roots must be strictly increasing")

    @property
    def N(self) -> int:
        return self.params.N

    def to_record(self) -> dict:
        """JSON-friendly record of the state."""
        return {"L": self.params.L, "c": self.params.c,
                "doubled_numbers": list(self.numbers.doubled),
                "roots": [float(v) for v in self.roots],
                "residual": float(self.residual)}

    @classmethod
    def from_record(cls, rec: dict) -> "BetheState":
        nums = BetheNumbers(tuple(rec["doubled_numbers"]))
        params = ModelParams(float(rec["L"]), float(rec["c"]), len(nums))
        return cls(params, nums, np.asarray(rec["roots"], float), float(rec["residual"]))


# --------------------------------------------------------------------------
# residual, Jacobian and solver
# --------------------------------------------------------------------------

def _residual(lam: np.ndarray, target: np.ndarray, L: float, c: float) -> np.ndarray:
    d = lam[..., :, None] - lam[..., None, :]
    return lam + (2.0 / L) * np.arctan(d / c).sum(-1) - target


def _gaudin(lam: np.ndarray, L: float, c: float) -> np.ndarray:
    d = lam[..., :, None] - lam[..., None, :]
    K = 2.0 * c / (c * c + d * d)
    n = lam.shape[-1]
    G = -K / L
    idx = np.arange(n)
    G[..., idx, idx] = 1.0 + (K.sum(-1) - K[..., idx, idx]) / L
    return G


def bethe_residual(params: ModelParams, numbers: BetheNumbers, lam) -> np.ndarray:
    """Residual map whose zero is the Bethe solution."""
    target = np.pi * np.asarray(numbers.doubled, float) / params.L
    return _residual(np.asarray(lam, float), target, params.L, params.c)


def solve_bethe_batch(params: ModelParams, doubled: np.ndarray, *,
                      tol: float = TOL, max_iter: int = MAX_ITER) -> tuple[np.ndarray, np.ndarray]:
    """Solve many states of the same (L, c, N) at once.

    Args:
        params: shared model parameters.
        doubled: integer array of shape (M, N) holding 2 I_k per row.
        tol: per-equation absolute residual target.
        max_iter: Newton iteration budget.

    Returns:
        (roots, residual) with shapes (M, N) and (M,).

    Raises:
        BetheSolveError: if any row does not converge.
    """
    doubled = np.asarray(doubled)
    if doubled.ndim != 2 or doubled.shape[1] != params.N:
        raise ValueError("doubled must have shape (M, N)")
    L, c = params.L, params.c
    target = np.pi * doubled.astype(float) / L
    lam = target.copy()
    if params.N <= 1:
        return lam, np.zeros(len(lam))
    r = _residual(lam, target, L, c)
    res = np.abs(r).max(-1)
    for _ in range(max_iter):
        active = res > tol
        if not active.any():
            break
        la, ra, ta = lam[active], r[active], target[active]
        step = np.linalg.solve(_gaudin(la, L, c), ra[..., None])[..., 0]
        scale = np.ones(len(la))
        new = la - step
        rn = _residual(new, ta, L, c)
        resn = np.abs(rn).max(-1)
        # halve the step where the residual went up
        for _h in range(30):
            bad = resn > res[active]
            bad &= resn > tol
            if not bad.any():
                break
            scale[bad] *= 0.5
            new[bad] = la[bad] - scale[bad, None] * step[bad]
            rn[bad] = _residual(new[bad], ta[bad], L, c)
            resn[bad] = np.abs(rn[bad]).max(-1)
        lam[active], r[active], res[active] = new, rn, resn
    if np.any(res > tol):
        raise BetheSolveError(
            f"Newton did not converge: worst residual {res.max():.3e} after {max_iter} iterations")
    return lam, res


def solve_bethe(params: ModelParams, numbers: BetheNumbers, *,
                tol: float = TOL, max_iter: int = MAX_ITER) -> BetheState:
    """Solve the Bethe equations from the free-fermion initial guess."""
    if len(numbers) != params.N:
        raise ValueError(f"got {len(numbers)} Bethe numbers for N={params.N}")
    lam, res = solve_bethe_batch(params, np.asarray([numbers.doubled], dtype=np.int64).reshape(1, params.N),
                                 tol=tol, max_iter=max_iter)
    return BetheState(params, numbers, lam[0], float(res[0]))


def gaudin_matrix(state: BetheState) -> np.ndarray:
    """G_jk = delta_jk (1 + sum_i K(lam_j - lam_i)/L) - K(lam_j - lam_k)/L."""
    if state.N == 0:
        return np.zeros((0, 0))
    return _gaudin(np.asarray(state.roots), state.params.L, state.params.c)


def gaudin_det(state: BetheState) -> float:
    """Determinant of the Gaudin matrix (1 for the vacuum)."""
    if state.N == 0:
        return 1.0
    sign, logdet = np.linalg.slogdet(gaudin_matrix(state))
    if sign <= 0:
        raise ArithmeticError("Gaudin determinant is not positive")
    return math.exp(logdet)


def log_gaudin_det(roots: np.ndarray, L: float, c: float) -> np.ndarray:
    """Batched log det of the Gaudin matrix over leading axes."""
    roots = np.asarray(roots, float)
    if roots.shape[-1] == 0:
        return np.zeros(roots.shape[:-1])
    return np.linalg.slogdet(_gaudin(roots, L, c))[1]


def energy_momentum(state: BetheState) -> tuple[float, float]:
    """(E, P) = (sum lam^2, sum lam)."""
    lam = np.asarray(state.roots)
    return math.fsum(lam * lam), math.fsum(lam)
