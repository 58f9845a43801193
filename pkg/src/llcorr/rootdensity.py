"""Root densities, hole densities and dilute representative states.

A density is anything that can hand out a quadrature rule for integrals
against rho(nu) d nu. Smooth families (Gaussian, box, sums of Gaussians,
tabulated CSV) build composite Gauss-Kronrod rules; ``AtomicDensity``
is the empirical measure (1/L) sum_j delta(nu - lam_j) of a finite state.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import erf

from .bethe import BetheNumbers, BetheState
from .quadrature import gk_quad, rule_from_edges

TWO_PI = 2 * math.pi
# e^{-(x/sigma)^2} < 1e-12 beyond this many sigmas
GAUSS_CUT = math.sqrt(12 * math.log(10))


@dataclass(frozen=True)
class RootDensity:
    """A smooth root density with compact numerical support [-cutoff, cutoff].

    Attributes:
        name: family label used in provenance records.
        params: family parameters.
        func: vectorised rho(lambda), zero outside the support.
        cutoff: support half-width Lambda.
        breaks: points where rho is not smooth (box edges), used as panel edges.
        grid, values: samples of rho for records and hashing.
    """
    name: str
    params: dict
    func: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    cutoff: float
    breaks: tuple[float, ...] = ()
    grid: np.ndarray = field(default=None, repr=False, compare=False)
    values: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.grid is None:
            g = np.linspace(-self.cutoff, self.cutoff, 401)
            object.__setattr__(self, "grid", g)
            object.__setattr__(self, "values", np.asarray(self.func(g), float))
        if np.any(self.values < 0):
            raise ValueError("root density must be non-negative")

    atomic = False

    def __call__(self, lam) -> np.ndarray:
        lam = np.asarray(lam, float)
        out = np.asarray(self.func(lam), float)
        return np.where(np.abs(lam) <= self.cutoff, out, 0.0)

    @property
    def support(self) -> tuple[float, float]:
        return -self.cutoff, self.cutoff

    def scaled(self, factor: float) -> "RootDensity":
        """factor * rho with the same shape."""
        f = self.func
        params = dict(self.params, scale=self.params.get("scale", 1.0) * factor)
        return RootDensity(self.name, params, lambda x: factor * f(x), self.cutoff,
                           self.breaks, self.grid, factor * self.values)

    def edges(self, points: Sequence[float] = (), tol: float = 1e-12,
              probe_c: float | None = None) -> np.ndarray:
        """Panel edges of a composite K15 rule for integrals against rho.

        The panels are refined until rho itself, and, if ``probe_c`` is given,
        rho times Lorentzian kernels of width probe_c centred across the
        support, are integrated to ``tol``.
        """
        lo, hi = self.support
        pts = sorted({*self.breaks, *(p for p in points if lo < p < hi)})
        if probe_c is None:
            def f(x):
                return self(x)[None, :]
        else:
            centres = np.linspace(lo, hi, 9)

            def f(x):
                r = self(x)
                k = probe_c / (probe_c ** 2 + (centres[:, None] - x[None, :]) ** 2)
                return np.vstack([r[None, :], k * r[None, :]])
        _, _, e = gk_quad(f, lo, hi, atol=tol, points=pts, n_init=8, full_output=True)
        return e

    def rule(self, points: Sequence[float] = (), tol: float = 1e-12,
             probe_c: float | None = None) -> tuple[np.ndarray, np.ndarray]:
        """(nodes, weights) such that sum w g(nodes) ~ int g(nu) rho(nu) d nu."""
        x, w = rule_from_edges(self.edges(points, tol, probe_c))
        return x, w * self(x)

    def fingerprint(self) -> str:
        rec = {"name": self.name, "params": self.params, "cutoff": self.cutoff}
        return hashlib.sha256(json.dumps(rec, sort_keys=True, default=float).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class AtomicDensity:
    """Empirical root density (1/L) sum_j delta(nu - lam_j) of a finite state."""
    roots: np.ndarray
    L: float
    atomic = True

    @classmethod
    def from_state(cls, state: BetheState) -> "AtomicDensity":
        return cls(np.asarray(state.roots, float), state.params.L)

    @property
    def support(self) -> tuple[float, float]:
        return float(self.roots.min()), float(self.roots.max())

    @property
    def cutoff(self) -> float:
        return float(np.abs(self.roots).max())

    def rule(self, points: Sequence[float] = (), tol: float = 0.0,
             probe_c: float | None = None) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.roots, float), np.full(len(self.roots), 1.0 / self.L)

    def fingerprint(self) -> str:
        rec = {"roots": [float(v) for v in self.roots], "L": self.L}
        return hashlib.sha256(json.dumps(rec).encode()).hexdigest()[:16]


# --------------------------------------------------------------------------
# families
# --------------------------------------------------------------------------

def gaussian(A: float, sigma: float = 1.0, centre: float = 0.0) -> RootDensity:
    """A exp(-((lam - centre)/sigma)^2)."""
    if A < 0 or sigma <= 0:
        raise ValueError("need A >= 0 and sigma > 0")
    cut = abs(centre) + GAUSS_CUT * sigma
    return RootDensity("gaussian", {"A": A, "sigma": sigma, "centre": centre},
                       lambda x: A * np.exp(-((np.asarray(x) - centre) / sigma) ** 2), cut)


def box(h: float, a: float) -> RootDensity:
    """h on [-a, a], zero elsewhere."""
    if h < 0 or a <= 0:
        raise ValueError("need h >= 0 and a > 0")
    return RootDensity("box", {"h": h, "a": a},
                       lambda x: np.where(np.abs(np.asarray(x)) <= a, h, 0.0),
                       a, breaks=(-a, a))


def sum_of_gaussians(terms: Sequence[tuple[float, float, float]]) -> RootDensity:
    """sum_k A_k exp(-((lam - m_k)/s_k)^2) for terms (A_k, m_k, s_k)."""
    terms = [tuple(map(float, t)) for t in terms]
    if not terms or any(A < 0 or s <= 0 for A, _, s in terms):
        raise ValueError("need non-empty terms with A >= 0, s > 0")
    cut = max(abs(m) + GAUSS_CUT * s for _, m, s in terms)

    def f(x):
        x = np.asarray(x, float)
        return sum(A * np.exp(-((x - m) / s) ** 2) for A, m, s in terms)
    return RootDensity("sum_of_gaussians", {"terms": terms}, f, cut)


def tabulated(lam: Sequence[float], rho: Sequence[float], name: str = "tabulated") -> RootDensity:
    """Cubic-spline interpolation of samples, zero outside the sampled range."""
    lam = np.asarray(lam, float)
    rho = np.asarray(rho, float)
    order = np.argsort(lam)
    lam, rho = lam[order], rho[order]
    if np.any(rho < 0):
        raise ValueError("tabulated density has negative samples")
    if np.any(np.diff(lam) <= 0):
        raise ValueError("tabulated abscissae must be distinct")
    spline = CubicSpline(lam, rho, bc_type="natural")
    lo, hi = lam[0], lam[-1]
    cut = max(abs(lo), abs(hi))

    def f(x):
        x = np.asarray(x, float)
        inside = (x >= lo) & (x <= hi)
        return np.where(inside, np.maximum(spline(np.clip(x, lo, hi)), 0.0), 0.0)
    digest = hashlib.sha256(np.concatenate([lam, rho]).tobytes()).hexdigest()[:16]
    return RootDensity(name, {"samples_sha": digest}, f, cut, breaks=(lo, hi))


def read_csv(path: str | Path) -> RootDensity:
    """Two-column CSV (lambda, rho); a non-numeric first row is treated as header."""
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except ValueError:
                if rows:
                    raise
    if len(rows) < 4:
        raise ValueError(f"{path}: need at least 4 samples")
    lam, rho = zip(*rows)
    return tabulated(lam, rho, name=f"csv:{Path(path).name}")


def parse_density(spec: str) -> RootDensity:
    """Build a density from ``family:key=val,...`` or a CSV path.

    Examples: ``family:gaussian,A=0.01,sigma=1``, ``family:box,h=0.02,a=2``,
    ``family:sum_of_gaussians,terms=0.01/-1/0.5;0.01/1/0.5``.
    """
    if not spec.startswith("family:"):
        p = Path(spec)
        if not p.exists():
            raise FileNotFoundError(f"density file {spec} not found")
        return read_csv(p)
    body = spec[len("family:"):]
    name, _, rest = body.partition(",")
    kw: dict = {}
    for item in filter(None, rest.split(",")):
        k, eq, v = item.partition("=")
        if not eq:
            raise ValueError(f"malformed density parameter {item!r}")
        kw[k.strip()] = v.strip()
    if name == "gaussian":
        allowed = {"A", "sigma", "centre"}
        _check_keys(kw, allowed, name)
        return gaussian(**{k: float(v) for k, v in kw.items()})
    if name == "box":
        _check_keys(kw, {"h", "a"}, name)
        return box(**{k: float(v) for k, v in kw.items()})
    if name == "sum_of_gaussians":
        _check_keys(kw, {"terms"}, name)
        terms = [tuple(float(t) for t in grp.split("/")) for grp in kw["terms"].split(";")]
        return sum_of_gaussians(terms)
    raise ValueError(f"unknown density family {name!r}")


def _check_keys(kw: dict, allowed: set, name: str):
    extra = set(kw) - allowed
    if extra:
        raise ValueError(f"unknown parameters for {name}: {sorted(extra)}")


# --------------------------------------------------------------------------
# derived quantities
# --------------------------------------------------------------------------

def particle_density(rho) -> float:
    """D = int rho."""
    if getattr(rho, "atomic", False):
        return len(rho.roots) / rho.L
    _, w = rho.rule()
    return float(math.fsum(w))


@dataclass(frozen=True)
class HoleDensity:
    """rho_h(lam) = 1/2pi + (1/2pi) int K(lam - nu) rho(nu) d nu - rho(lam).

    For an atomic rho the last term is a set of negative atoms; ``smooth``
    evaluates everything but those atoms and ``__call__`` the full density
    where rho is smooth.
    """
    rho: object
    c: float
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    def smooth(self, lam) -> np.ndarray:
        """1/2pi + (1/2pi) int K(lam - nu) rho(nu) d nu, valid for complex lam."""
        lam = np.asarray(lam)
        d = lam[..., None] - self.nodes
        K = 2 * self.c / (self.c * self.c + d * d)
        return (1.0 + (K * self.weights).sum(-1)) / TWO_PI

    def __call__(self, lam) -> np.ndarray:
        if getattr(self.rho, "atomic", False):
            raise TypeError("pointwise rho_h of an atomic density includes delta atoms; use smooth()")
        lam = np.asarray(lam, float)
        return self.smooth(lam) - self.rho(lam)

    @property
    def grid(self) -> np.ndarray:
        lo, hi = self.rho.support
        return np.linspace(lo - 3 * self.c, hi + 3 * self.c, 401)

    @property
    def values(self) -> np.ndarray:
        return self(self.grid)


def hole_density(rho, c: float, tol: float = 1e-12) -> HoleDensity:
    """Hole density of ``rho`` at coupling c."""
    if not c > 0:
        raise ValueError("c must be positive")
    x, w = rho.rule(tol=tol, probe_c=c)
    return HoleDensity(rho, c, x, w)


def zero_density(cutoff: float = 1.0) -> RootDensity:
    return RootDensity("zero", {}, lambda x: np.zeros_like(np.asarray(x, float)), cutoff)


# --------------------------------------------------------------------------
# dilute representative states
# --------------------------------------------------------------------------

def quantile_rapidities(rho: RootDensity, n: int) -> np.ndarray:
    """Points lam_k with int_{-inf}^{lam_k} rho = D (k - 1/2)/n."""
    lo, hi = rho.support
    edges = rho.edges(tol=1e-13)
    x, w = rule_from_edges(edges)
    vals = w * rho(x)
    cum = np.concatenate([[0.0], np.cumsum(vals)])
    D = cum[-1]
    xs = np.concatenate([[lo], x])
    targets = D * (np.arange(1, n + 1) - 0.5) / n
    guess = np.interp(targets, cum, xs)
    # polish with Newton on the exact CDF, which is cheap through the rule
    out = []
    for tgt, g in zip(targets, guess):
        lamk = g
        for _ in range(50):
            mass = float(np.sum(vals[x < lamk]))
            # the partial panel containing lamk
            j = np.searchsorted(edges, lamk) - 1
            j = min(max(j, 0), len(edges) - 2)
            a = edges[j]
            sel = (x >= a) & (x < lamk)
            mass -= float(np.sum(vals[sel]))
            if lamk > a:
                px, pw = rule_from_edges([a, lamk])
                mass += float(np.sum(pw * rho(px)))
            f = mass - tgt
            dens = float(rho(np.array([lamk]))[0])
            if dens <= 0 or abs(f) < 1e-15 * max(D, 1e-300):
                break
            step = f / dens
            lamk = min(max(lamk - step, lo), hi)
            if abs(step) < 1e-14:
                break
        out.append(lamk)
    return np.asarray(out)


def dilute_sampler(rho: RootDensity, L: float, c: float | None = None,
                   n: int | None = None) -> BetheNumbers:
    """Bethe numbers of a finite-L state whose roots follow ``rho``.

    N = round(D L) unless ``n`` is given. Target rapidities sit at the
    (k - 1/2)/N quantiles; they are turned into quantum numbers with the
    free relation I = L lam / 2 pi, plus the scattering phases when ``c``
    is given, then rounded to the parity required by N. Collisions are
    resolved by pushing numbers outward.
    """
    D = particle_density(rho)
    N = int(round(D * L)) if n is None else int(n)
    if N < 1:
        raise ValueError(f"D L = {D * L:.3g} rounds to N = 0")
    lam = quantile_rapidities(rho, N)
    I = L * lam / TWO_PI
    if c is not None:
        I = I + np.arctan((lam[:, None] - lam[None, :]) / c).sum(1) / math.pi
    shift = 0.0 if N % 2 else 0.5        # integers for odd N, half-odd for even N
    J = np.round(I - shift) + shift
    for k in range(1, N):                # push collisions to the right
        if J[k] <= J[k - 1]:
            J[k] = J[k - 1] + 1
    return BetheNumbers.from_values(J)
