"""Low-density field and density two-point functions.

Both correlators are outer integrals of exp(inner integrals against rho).
The inner nu-integrals are done on a fixed composite rule (nodes carrying
the rho weight) so that, for a batch of outer points, they reduce to
matrix-vector products. The density correlator's mu-integral runs over
the whole real line against the hole density; beyond the support its tails
are rotated into the complex plane where the chirp exp(-i t mu^2) decays.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .quadrature import QuadratureError, gk_quad, rule_from_edges
from .rootdensity import HoleDensity, hole_density, particle_density
from .special import chi

ROT = complex(math.cos(math.pi / 4), -math.sin(math.pi / 4))   # e^{-i pi/4}


@dataclass(frozen=True)
class CorrelatorSample:
    """One evaluated point of a correlator."""
    x: float
    t: float
    value: complex
    quad_error: float
    elapsed: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    def to_record(self) -> dict:
        return {"x": self.x, "t": self.t, "re": self.value.real, "im": self.value.imag,
                "err": self.quad_error, "elapsed": self.elapsed}


# --------------------------------------------------------------------------
# inner nu data
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class _NuData:
    """Nodes/weights of the nu rule plus the lambda-independent factors.

    damp = -2c^2 |x - 2 nu t| + (2c^2 sqrt|t|/pi) chi_-+((x - 2 nu t)/sqrt|t|)
    drift = x - 2 nu t
    """
    nu: np.ndarray
    w: np.ndarray
    damp: np.ndarray
    drift: np.ndarray


def _chi_term(c: float, x: float, t: float, nu: np.ndarray) -> np.ndarray:
    if t == 0:
        return np.zeros(nu.shape, complex)
    rt = math.sqrt(abs(t))
    sign = -1 if t > 0 else 1            # t > 0 uses chi_-, t < 0 chi_+
    return 2 * c * c * rt / math.pi * np.asarray(chi(sign, (x - 2 * nu * t) / rt))


def _kink(x: float, t: float) -> list[float]:
    return [x / (2 * t)] if t != 0 else []


def _nu_data(rho, c: float, x: float, t: float, tol: float) -> _NuData:
    if getattr(rho, "atomic", False):
        nu, w = rho.rule()
    else:
        lo, hi = rho.support
        centres = np.linspace(lo - c, hi + c, 13)

        def probe(v):
            r = rho(v)
            base = (-2 * c * c * np.abs(x - 2 * v * t) + _chi_term(c, x, t, v)) * r
            d = centres[:, None] - v[None, :]
            lor = 1.0 / (c * c + d * d)
            drift = c * (x - 2 * v * t) * r
            return np.vstack([r[None, :], lor * base[None, :], lor * d * drift[None, :]])
        pts = sorted({*rho.breaks, *(p for p in _kink(x, t) if lo < p < hi)})
        _, _, edges = gk_quad(probe, lo, hi, atol=tol, points=pts, n_init=8,
                              full_output=True, max_panels=20000)
        nu, w = rule_from_edges(edges)
        w = w * rho(nu)
        keep = w != 0
        nu, w = nu[keep], w[keep]
    damp = -2 * c * c * np.abs(x - 2 * nu * t) + _chi_term(c, x, t, nu)
    return _NuData(nu, w, damp, x - 2 * nu * t)


# --------------------------------------------------------------------------
# field
# --------------------------------------------------------------------------

def _field_exponent(nd: _NuData, c: float, lam: np.ndarray) -> np.ndarray:
    """Phi(lam) = sum_k w_k [damp_k - 2ic(nu_k - lam) drift_k]/((nu_k - lam)^2 + c^2)."""
    d = nd.nu[None, :] - lam[:, None]
    kern = (nd.damp[None, :] - 2j * c * d * nd.drift[None, :]) / (d * d + c * c)
    return kern @ nd.w


def field_integrand(rho, c: float, x: float, t: float, lam, tol: float = 1e-10) -> np.ndarray:
    """rho(lam) exp(i t lam^2 - i x lam + Phi(lam)) for smooth rho."""
    nd = _nu_data(rho, c, x, t, tol)
    lam = np.asarray(lam, float)
    return rho(lam) * np.exp(1j * (t * lam * lam - x * lam) + _field_exponent(nd, c, lam))


def field_correlator(rho, c: float, x: float, t: float, tol: float = 1e-8) -> CorrelatorSample:
    """Low-density <psi^dag(x,t) psi(0,0)>.

    Args:
        rho: RootDensity or AtomicDensity.
        c: coupling.
        x, t: separation.
        tol: absolute tolerance of the outer integral; inner rules use tol/10.

    The outer phase is exp(+i t lam^2 - i x lam), which makes G(x,t) the
    Lehmann sum sum |FF|^2 exp(i t (E_lam - E_mu) + i x (P_mu - P_lam)).
    """
    if not c > 0:
        raise ValueError("c must be positive")
    if tol < 1e-12:
        raise ValueError("tol below 1e-12 is not supported")
    t0 = time.perf_counter()
    nd = _nu_data(rho, c, x, t, tol / 10)

    def f(lam):
        return np.exp(1j * (t * lam * lam - x * lam) + _field_exponent(nd, c, lam))

    if getattr(rho, "atomic", False):
        vals = f(np.asarray(rho.roots, float)) / rho.L
        value, err = complex(np.sum(vals)), 0.0
    else:
        lo, hi = rho.support

        def g(lam):
            return rho(lam) * f(lam)
        value, err = gk_quad(g, lo, hi, atol=tol, points=rho.breaks, n_init=8,
                             max_panels=20000)
        value = complex(value)
    return CorrelatorSample(x, t, value, float(err), time.perf_counter() - t0,
                            {"kind": "field", "c": c, "tol": tol, "n_nu": int(nd.nu.size)})


def free_field_correlator(rho, x: float, t: float, tol: float = 1e-10) -> complex:
    """int rho(lam) exp(i t lam^2 - i x lam): the non-interacting limit."""
    if getattr(rho, "atomic", False):
        lam = np.asarray(rho.roots)
        return complex(np.sum(np.exp(1j * (t * lam * lam - x * lam))) / rho.L)
    lo, hi = rho.support
    v, _ = gk_quad(lambda l: rho(l) * np.exp(1j * (t * l * l - x * l)), lo, hi,
                   atol=tol, points=rho.breaks, n_init=8, max_panels=20000)
    return complex(v)


# --------------------------------------------------------------------------
# density
# --------------------------------------------------------------------------

def _density_exponent(nd: _NuData, c: float, lam: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """Psi(lam, mu) on the outer grid lam (P,) x mu (Q,), mu possibly complex.

    Psi = sum_k w_k [2ic(mu-lam)(c^2+(mu-nu)(lam-nu)) drift + (mu-lam)^2 damp]
          / ((c^2+(lam-nu)^2)(c^2+(mu-nu)^2))
    """
    lam = lam[:, None, None]
    mu = mu[None, :, None]
    nu = nd.nu[None, None, :]
    dl, dm = lam - nu, mu - nu
    gap = mu - lam
    num = 2j * c * gap * (c * c + dm * dl) * nd.drift + gap * gap * nd.damp
    return (num / ((c * c + dl * dl) * (c * c + dm * dm))) @ nd.w


def _ray_length(x: float, t: float, M: float, tol: float) -> float:
    """Ray length s where the integrand envelope drops below tol * 1e-3."""
    target = -math.log(max(tol, 1e-300) * 1e-3)
    if t == 0:
        return target / abs(x)
    a, b = abs(t), math.sqrt(2) * abs(t) * M - abs(x) / math.sqrt(2)
    # a s^2 + b s = target
    return (-b + math.sqrt(b * b + 4 * a * target)) / (2 * a)


@dataclass(frozen=True)
class _MuRule:
    """Complex nodes, weights (including the contour Jacobian) and rho_h values."""
    mu: np.ndarray
    w: np.ndarray
    rho_h: np.ndarray
    err: float


def _mu_rule(rho, hd: HoleDensity, nd: _NuData, c: float, x: float, t: float,
             tol: float, mu_cutoff: float | None, mu_split: float | None = None) -> _MuRule:
    atomic = getattr(rho, "atomic", False)
    lo, hi = rho.support
    lam_probe = (np.asarray(rho.roots, float) if atomic
                 else np.linspace(lo, hi, 7))
    span = max(abs(lo), abs(hi))
    if mu_cutoff is not None:
        M = float(mu_cutoff)
    else:
        M = span + 2 * c
        if t != 0:
            M = max(M, abs(x) / (2 * abs(t)) + 1.0)
        if mu_split is not None:
            if mu_split < M - 1.0 + 1e-12 and t != 0 or mu_split <= span + c:
                raise ValueError(f"mu_split {mu_split} too small for a safe contour")
            M = float(mu_split)
        if x == 0 and t == 0:
            raise ValueError("x = t = 0: the mu integral carries a delta(x) term; "
                             "pass mu_cutoff for a finite-window value")

    def seg_rho_h(mu):
        r = hd.smooth(mu)
        if not atomic:
            r = r - rho(mu.real)
        return r

    def seg(mu):
        mu = np.asarray(mu, float)
        ph = np.exp(1j * (x * mu - t * mu * mu))
        return (seg_rho_h(mu) * ph)[None, :] * np.exp(_density_exponent(nd, c, lam_probe, mu))

    pts = [p for p in (*getattr(rho, "breaks", ()), *_kink(x, t), 0.0) if -M < p < M]
    _, err, edges = gk_quad(seg, -M, M, atol=tol, points=pts, n_init=16,
                            full_output=True, max_panels=40000)
    mus, ws = rule_from_edges(edges)
    nodes, weights, rh = [mus.astype(complex)], [ws.astype(complex)], [seg_rho_h(mus).astype(complex)]
    total_err = float(err)

    if mu_cutoff is None:
        if t > 0:
            dirs = ROT
        elif t < 0:
            dirs = ROT.conjugate()
        else:
            dirs = 1j if x > 0 else -1j
        S = _ray_length(x, t, M, tol)
        for side in (1, -1):
            if t == 0:
                # vertical rays: mu = +-M + dirs s, Abel-regularised tails
                def point(s, side=side):
                    return side * M + dirs * s
                jac = side * dirs
            else:
                def point(s, side=side):
                    return side * (M + dirs * s)
                jac = dirs

            def ray(s, point=point, jac=jac):
                mu = point(np.asarray(s, float))
                ph = np.exp(1j * (x * mu - t * mu * mu))
                return jac * (hd.smooth(mu) * ph)[None, :] * np.exp(
                    _density_exponent(nd, c, lam_probe, mu))
            _, e, redges = gk_quad(ray, 0.0, S, atol=tol, n_init=8, full_output=True,
                                   max_panels=20000)
            s_nodes, s_w = rule_from_edges(redges)
            mu_r = point(s_nodes)
            nodes.append(mu_r)
            weights.append(jac * s_w)
            rh.append(hd.smooth(mu_r))
            total_err += float(e)
    return _MuRule(np.concatenate(nodes), np.concatenate(weights), np.concatenate(rh), total_err)


def density_integrand(rho, c: float, x: float, t: float, lam, mu, tol: float = 1e-10) -> np.ndarray:
    """rho(lam) rho_h(mu) exp(i t (lam^2 - mu^2) + i x (mu - lam) + Psi) on a lam x mu grid."""
    nd = _nu_data(rho, c, x, t, tol)
    hd = hole_density(rho, c)
    lam = np.asarray(lam, float)
    mu = np.asarray(mu, float)
    ph = np.exp(1j * (t * (lam[:, None] ** 2 - mu[None, :] ** 2) + x * (mu[None, :] - lam[:, None])))
    return rho(lam)[:, None] * hd(mu)[None, :] * ph * np.exp(_density_exponent(nd, c, lam, mu))


def density_correlator(rho, c: float, x: float, t: float, tol: float = 1e-8, *,
                       mu_cutoff: float | None = None,
                       mu_split: float | None = None) -> CorrelatorSample:
    """Low-density <sigma(x,t) sigma(0,0)> without any disconnected D^2 term.

    Args:
        rho: RootDensity or AtomicDensity.
        c: coupling.
        x, t: separation; x = t = 0 needs ``mu_cutoff``.
        tol: absolute tolerance per quadrature stage.
        mu_cutoff: restrict the mu-integral to [-mu_cutoff, mu_cutoff] on the
            real axis (no contour tails).
        mu_split: where the real mu segment hands over to the complex rays
            (default: beyond the support and the stationary point x/2t).
    """
    if not c > 0:
        raise ValueError("c must be positive")
    t0 = time.perf_counter()
    nd = _nu_data(rho, c, x, t, tol / 10)
    hd = hole_density(rho, c)
    mr = _mu_rule(rho, hd, nd, c, x, t, tol / 10, mu_cutoff, mu_split)
    atomic = getattr(rho, "atomic", False)
    mu_ph = mr.w * mr.rho_h * np.exp(1j * (x * mr.mu - t * mr.mu * mr.mu))

    def inner(lam):
        lam = np.asarray(lam, float)
        out = np.exp(_density_exponent(nd, c, lam, mr.mu)) @ mu_ph
        if atomic:
            # negative atoms of rho_h at the roots, only inside the real window
            roots = np.asarray(rho.roots, float)
            inside = np.abs(roots) <= (mu_cutoff if mu_cutoff is not None else np.inf)
            r = roots[inside]
            ph = np.exp(1j * (x * r - t * r * r))
            out = out - (np.exp(_density_exponent(nd, c, lam, r)) @ ph) / rho.L
        return out * np.exp(1j * (t * lam * lam - x * lam))

    if atomic:
        value = complex(np.sum(inner(np.asarray(rho.roots, float))) / rho.L)
        err = mr.err * particle_density(rho)
    else:
        lo, hi = rho.support

        def g(lam):
            return rho(lam) * inner(lam)
        value, err = gk_quad(g, lo, hi, atol=tol, points=rho.breaks, n_init=8, max_panels=20000)
        value = complex(value)
        err = float(err) + mr.err * particle_density(rho)
    return CorrelatorSample(x, t, value, float(err), time.perf_counter() - t0,
                            {"kind": "density", "c": c, "tol": tol, "n_nu": int(nd.nu.size),
                             "n_mu": int(mr.mu.size), "mu_cutoff": mu_cutoff})


# --------------------------------------------------------------------------
# phi diagnostic
# --------------------------------------------------------------------------

def phi_log_kernel(nu, lam, mu, c: float) -> np.ndarray:
    """Integrand logarithm of phi; <= 0, and exactly 0 when mu == lam."""
    nu, lam, mu = np.broadcast_arrays(np.asarray(nu, float), np.asarray(lam, float),
                                      np.asarray(mu, float))
    a = (mu - nu) / c
    b = (lam - nu) / c
    gap = (mu - lam) / c
    delta = np.arctan2(gap, 1 + a * b)          # arctan a - arctan b
    same = gap == 0
    ratio = np.where(same, 1.0, gap / np.where(same, 1.0, delta))
    out = 2 * np.log(np.abs(ratio)) - np.log1p(a * a) - np.log1p(b * b)
    return np.where(same, 0.0, out)


def phi_diagnostic(rho, c: float, lam: float, mu: float, tol: float = 1e-12) -> float:
    """phi(lam, mu) = int log-kernel(nu; lam, mu) rho(nu) d nu."""
    if lam == mu:
        return 0.0
    if getattr(rho, "atomic", False):
        nu, w = rho.rule()
    else:
        nu, w = rho.rule(points=(lam, mu), tol=tol, probe_c=c)
    return float(np.dot(w, phi_log_kernel(nu, lam, mu, c)))


# --------------------------------------------------------------------------
# grids
# --------------------------------------------------------------------------

def correlator_grid(rho, c: float, xs: Sequence[float], ts: Sequence[float],
                    kind: Literal["field", "density"] = "field", tol: float = 1e-8,
                    workers: int = 1) -> list[CorrelatorSample]:
    """Evaluate a correlator on the tensor grid xs x ts (t-major order)."""
    fn = field_correlator if kind == "field" else density_correlator
    jobs = [(float(x), float(t)) for t in ts for x in xs]
    if workers <= 1:
        return [fn(rho, c, x, t, tol) for x, t in jobs]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(lambda xt: fn(rho, c, xt[0], xt[1], tol), jobs))


@dataclass(frozen=True)
class SpectralGrid:
    """Windowed space-time Fourier transform of a correlator grid."""
    k: np.ndarray
    omega: np.ndarray
    values: np.ndarray
    meta: dict

    def __post_init__(self):
        if self.values.shape != (self.omega.size, self.k.size):
            raise ValueError("values must have shape (len(omega), len(k))")


def spectral_transform(xs, ts, G: np.ndarray, window: str = "hann") -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """S(k, w) = sum_{x,t} exp(i k x - i w t) G(x,t) win(x) win(t) dx dt.

    G has shape (len(ts), len(xs)). Grids must be uniform; k and w are the
    centred DFT frequencies.
    """
    xs, ts = np.asarray(xs, float), np.asarray(ts, float)
    for g in (xs, ts):
        if g.size > 1 and not np.allclose(np.diff(g), g[1] - g[0], rtol=1e-9, atol=0):
            raise ValueError("grids must be uniform")
    dx = xs[1] - xs[0] if xs.size > 1 else 1.0
    dt = ts[1] - ts[0] if ts.size > 1 else 1.0
    wx = _window(xs.size, window)
    wt = _window(ts.size, window)
    k = 2 * np.pi * np.fft.fftshift(np.fft.fftfreq(xs.size, dx))
    om = 2 * np.pi * np.fft.fftshift(np.fft.fftfreq(ts.size, dt))
    Ex = np.exp(1j * k[:, None] * xs[None, :]) * wx[None, :] * dx     # (k, x)
    Et = np.exp(-1j * om[:, None] * ts[None, :]) * wt[None, :] * dt  # (w, t)
    return k, om, Et @ np.asarray(G) @ Ex.T


def _window(n: int, kind: str) -> np.ndarray:
    if kind == "hann":
        return np.hanning(n) if n > 2 else np.ones(n)
    if kind in ("none", "rect"):
        return np.ones(n)
    raise ValueError(f"unknown window {kind!r}")


def spectral_grid(rho, c: float, xs, ts, kind: Literal["field", "density"] = "field",
                  tol: float = 1e-8, window: str = "hann", workers: int = 1) -> SpectralGrid:
    """Correlator on a uniform (x, t) grid, then its windowed DFT."""
    samples = correlator_grid(rho, c, xs, ts, kind, tol, workers)
    G = np.array([s.value for s in samples]).reshape(len(ts), len(xs))
    k, om, S = spectral_transform(xs, ts, G, window)
    meta = {"kind": kind, "c": c, "tol": tol, "window": window,
            "density": rho.fingerprint(), "max_quad_error": max(s.quad_error for s in samples)}
    return SpectralGrid(k, om, S, meta)
