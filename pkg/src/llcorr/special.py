"""The chi special function and the Fourier lattice sums built on it.

``chi(+1, x)`` is the oscillatory integral

    chi_+(x) = int_R exp(i x u) (exp(i u^2) - 1) / u^2 du

evaluated through the chirp (Fresnel-type) integral
``T(x) = int_x^inf exp(-i s^2/4) ds``:

    chi_+(x) = sqrt(pi) e^{i pi/4} [ |x| T(|x|) + 2i exp(-i x^2/4) ]

which follows from integrating chi'' = -sqrt(pi) e^{i pi/4} e^{-i x^2/4}
+ 2 pi delta(x) twice. ``chi(-1, x)`` is its complex conjugate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import sici

SQRT_PI = math.sqrt(math.pi)
E_IPI4 = complex(math.cos(math.pi / 4), math.sin(math.pi / 4))
CHI0 = math.sqrt(2 * math.pi) * complex(-1.0, 1.0)   # chi_+(0)

SERIES_SWITCH = 6.0
_SERIES_TERMS = 80
_CF_MAX_ITER = 500
_TINY = 1e-300


# --------------------------------------------------------------------------
# chirp integrals
# --------------------------------------------------------------------------

def _chirp_series(x: np.ndarray) -> np.ndarray:
    """int_0^x exp(-i s^2/4) ds by its Maclaurin series (fine for |x| <= 6)."""
    x = np.asarray(x, dtype=float)
    z = -0.25j * x * x
    term = x.astype(complex)          # z^n x / n!
    out = term.copy()
    for n in range(1, _SERIES_TERMS):
        term = term * z / n
        out = out + term / (2 * n + 1)
    return out


def _cf_reciprocal(z: np.ndarray) -> np.ndarray:
    """Laplace continued fraction f(z) with erfc(z) = exp(-z^2)/(sqrt(pi) f(z)).

    f(z) = z + (1/2)/(z + 1/(z + (3/2)/(z + ...))), evaluated by modified Lentz;
    accurate for Re z > 0 and |z| >~ 3.
    """
    z = np.asarray(z, dtype=complex)
    f = z.copy()
    f[np.abs(f) < _TINY] = _TINY
    C = f.copy()
    D = np.zeros_like(f)
    done = np.zeros(z.shape, dtype=bool)
    for k in range(1, _CF_MAX_ITER):
        a = 0.5 * k
        D = z + a * D
        D[np.abs(D) < _TINY] = _TINY
        C = z + a / C
        C[np.abs(C) < _TINY] = _TINY
        D = 1.0 / D
        delta = C * D
        f = np.where(done, f, f * delta)
        done |= np.abs(delta - 1.0) < 1e-16
        if done.all():
            break
    return f


def chirp_tail_scaled(x) -> np.ndarray:
    """exp(i x^2/4) T(x) for x >= 0, free of the fast chirp phase."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("chirp_tail defined for x >= 0")
    out = np.empty(x.shape, dtype=complex)
    small = x <= SERIES_SWITCH
    if small.any():
        xs = x[small]
        out[small] = np.exp(0.25j * xs * xs) * (SQRT_PI / E_IPI4 - _chirp_series(xs))
    if (~small).any():
        xs = x[~small]
        # T(x) = sqrt(pi) e^{-i pi/4} erfc(e^{i pi/4} x/2), exp(-z^2) = exp(-i x^2/4)
        out[~small] = 1.0 / (E_IPI4 * _cf_reciprocal(E_IPI4 * xs / 2))
    return out


def chirp_tail(x) -> np.ndarray:
    """T(x) = int_x^inf exp(-i s^2/4) ds for x >= 0.

    Series below ``SERIES_SWITCH``, continued fraction above it.
    """
    x = np.asarray(x, dtype=float)
    return np.exp(-0.25j * x * x) * chirp_tail_scaled(x)


def fresnel(z):
    """Normalised Fresnel integrals (S(z), C(z)), int_0^z sin/cos(pi t^2/2) dt."""
    z = np.asarray(z, dtype=float)
    a = np.abs(z)
    s = math.sqrt(2 * math.pi)
    # int_0^z exp(-i pi t^2/2) dt = (1/s) int_0^{s z} exp(-i u^2/4) du
    head = (SQRT_PI / E_IPI4 - chirp_tail(s * a)) / s
    sgn = np.sign(z)
    return -head.imag * sgn, head.real * sgn


# --------------------------------------------------------------------------
# chi
# --------------------------------------------------------------------------

def chi(sign: int, x):
    """chi_sign(x) for sign in {+1, -1}; vectorised over x."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    x = np.asarray(x, dtype=float)
    a = np.abs(x)
    # the bracket cancels to O(x^-2) at large |x|, so keep the chirp factored out
    val = SQRT_PI * E_IPI4 * np.exp(-0.25j * a * a) * (a * chirp_tail_scaled(a) + 2j)
    if sign < 0:
        val = np.conj(val)
    return val if val.ndim else complex(val)


def chi_quadrature(sign: int, x: float, cut: float = 30.0) -> complex:
    """Independent evaluation of chi by direct quadrature.

    The real segment [-cut, cut] is integrated numerically; the tails of
    exp(i x u + i sign u^2)/u^2 are rotated into the sector where the chirp
    decays, and the tails of -exp(i x u)/u^2 use the sine/cosine integrals.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if 2 * cut <= abs(x) + 1:
        cut = abs(x) + 10.0

    def body(u, part):
        if abs(u) < 1e-4:
            # (e^{i s u^2} - 1)/u^2 = i s - u^2/2 + ...
            v = np.exp(1j * x * u) * (1j * sign - 0.5 * u * u - 1j * sign * u ** 4 / 6)
        else:
            v = np.exp(1j * x * u) * (np.exp(1j * sign * u * u) - 1.0) / (u * u)
        return v.real if part == 0 else v.imag

    seg = complex(0.0, 0.0)
    pts = np.linspace(-cut, cut, 61)
    for lo, hi in zip(pts[:-1], pts[1:]):
        re = quad(body, lo, hi, args=(0,), epsabs=1e-13, epsrel=1e-13, limit=200)[0]
        im = quad(body, lo, hi, args=(1,), epsabs=1e-13, epsrel=1e-13, limit=200)[0]
        seg += complex(re, im)

    # chirp tails: u = +-(cut + r e^{i sign pi/4})
    rot = complex(math.cos(math.pi / 4), sign * math.sin(math.pi / 4))

    def ray(r, side, part):
        u = side * (cut + r * rot)
        v = rot * np.exp(1j * x * u + 1j * sign * u * u) / (u * u)
        return v.real if part == 0 else v.imag

    tails = complex(0.0, 0.0)
    for side in (1, -1):
        re = quad(ray, 0, np.inf, args=(side, 0), epsabs=1e-14, limit=200)[0]
        im = quad(ray, 0, np.inf, args=(side, 1), epsabs=1e-14, limit=200)[0]
        tails += complex(re, im)

    # -int_{|u|>cut} e^{ixu}/u^2 du = -2 int_cut^inf cos(xu)/u^2 du
    si, _ = sici(abs(x) * cut)
    cos_tail = math.cos(x * cut) / cut - abs(x) * (math.pi / 2 - si)
    return seg + tails - 2.0 * cos_tail


# --------------------------------------------------------------------------
# lattice sums
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LatticeSumParams:
    """Parameters of sum_n exp(i w/L (n+a) + i tau/L^2 (n+a)^2) / (n+a)^2."""
    alpha: float
    w: float
    tau: float
    L: float

    def __post_init__(self):
        if abs(self.alpha - round(self.alpha)) < 1e-14:
            raise ValueError("alpha must not be an integer")
        if self.L <= 0:
            raise ValueError("L must be positive")
        if abs(self.w / self.L) >= math.pi:
            raise ValueError("|w/L| must lie inside (-pi, pi)")


def lattice_sum2_closed(p: LatticeSumParams) -> complex:
    """Large-L closed form of the second-order sum.

    It keeps only the m = 0 Poisson image; the dropped images are O(L^-3)
    and oscillate in w.
    """
    s = math.sin(math.pi * p.alpha)
    W = p.w / p.L
    if p.tau == 0:
        # exact Fourier series on -pi < W <= pi
        phase = complex(math.cos(math.pi * p.alpha), math.copysign(1.0, W) * s) if W else 1.0
        return (math.pi / s) ** 2 + 1j * math.pi / s * W * phase
    rt = math.sqrt(abs(p.tau))
    sign = 1 if p.tau > 0 else -1
    return ((math.pi / s) ** 2 + 1j * math.pi * p.w / (p.L * math.tan(math.pi * p.alpha))
            - math.pi * abs(p.w) / p.L + rt / p.L * chi(sign, p.w / rt))


def _phase_tail(y0, dphase, power: int):
    """sum_{k>=0} z^k / (y0+k)^power with z = exp(i dphase), two-term expansion."""
    z = np.exp(1j * dphase)
    one = 1.0 - z
    if power == 1:
        return 1.0 / (y0 * one) - z / (y0 ** 2 * one ** 2)
    return 1.0 / (y0 ** 2 * one) - 2.0 * z / (y0 ** 3 * one ** 2)


def _auto_nmax(p: LatticeSumParams) -> int:
    # resolve a few stationary points of the chirp, which sit ~ pi L^2/|tau| apart
    if p.tau == 0:
        return 200_000
    spacing = math.pi * p.L ** 2 / abs(p.tau)
    return int(min(8_000_000, max(200_000, 8 * spacing)))


def lattice_sum2_direct(p: LatticeSumParams, n_max: int | None = None) -> complex:
    """Brute-force symmetric sum with a locally-linear-phase tail correction.

    Each side is cut where the per-step phase increment is far from a
    multiple of 2 pi, so that the geometric tail estimate is well conditioned.
    ``n_max=None`` picks a cutoff that covers several stationary points of
    the chirp.
    """
    if n_max is None:
        n_max = _auto_nmax(p)
    if n_max < 10_000:
        raise ValueError("n_max must be >= 1e4")
    W, tq = p.w / p.L, p.tau / p.L ** 2
    total = 0j
    for side in (1, -1):
        # local increment of the phase per step at distance k
        k = n_max
        for _ in range(64):
            dth = abs(math.remainder(W + 2 * tq * (side * k + p.alpha), 2 * math.pi))
            if dth > 0.5 or tq == 0:
                break
            k += max(1, int(0.5 / max(abs(2 * tq), 1e-300) / 16))
        n = np.arange(0 if side > 0 else 1, k + 1, dtype=float)
        y = side * n + p.alpha
        terms = np.exp(1j * (W * y + tq * y * y)) / (y * y)
        total += np.sum(terms[::-1])
        y0 = side * (k + 1) + p.alpha
        theta0 = W * y0 + tq * y0 * y0
        dtheta = side * (W + 2 * tq * y0)
        if abs(math.remainder(dtheta, 2 * math.pi)) < 1e-6:
            total += np.exp(1j * theta0) / abs(y0)
        else:
            total += np.exp(1j * theta0) * _phase_tail(abs(y0), dtheta, 2)
    return complex(total)


def lattice_sum2_poisson(p: LatticeSumParams, m_max: int = 2000) -> complex:
    """Poisson resummation of the second-order sum.

    The m = 0 image reproduces ``lattice_sum2_closed``; the images
    m != 0 add (sqrt|tau|/L) e^{2 pi i m alpha} chi((w - 2 pi m L)/sqrt|tau|),
    which are O(L^-3) because chi decays like x^-2.
    """
    base = lattice_sum2_closed(p)
    if p.tau == 0:
        return base
    rt = math.sqrt(abs(p.tau))
    sign = 1 if p.tau > 0 else -1
    m = np.concatenate([np.arange(-m_max, 0), np.arange(1, m_max + 1)])
    img = np.exp(2j * np.pi * m * p.alpha) * chi(sign, (p.w - 2 * np.pi * m * p.L) / rt)
    return base + rt / p.L * complex(np.sum(img[np.argsort(-np.abs(m))]))


def lattice_sum1_closed(alpha: float, W: float) -> complex:
    """sum_n exp(i W (n+alpha))/(n+alpha) for 0 < |W| <= pi."""
    if abs(alpha - round(alpha)) < 1e-14:
        raise ValueError("alpha must not be an integer")
    if W == 0 or not (-math.pi < W <= math.pi):
        raise ValueError("W must satisfy 0 < |W| <= pi (use lattice_sum1_midpoint at W=0)")
    s = math.sin(math.pi * alpha)
    return math.pi / s * complex(math.cos(math.pi * alpha),
                                 math.copysign(1.0, W) * s)


def lattice_sum1_midpoint(alpha: float) -> float:
    """Value of the first-order series at its jump W = 0."""
    return math.pi / math.tan(math.pi * alpha)


def lattice_sum1_direct(alpha: float, W: float, n_max: int = 1_000_000) -> complex:
    """Symmetric partial sum of the first-order series plus geometric tail."""
    n = np.arange(-n_max, n_max + 1, dtype=float)
    y = n + alpha
    terms = np.exp(1j * W * y) / y
    order = np.argsort(-np.abs(y))
    body = math.fsum(terms.real[order]) + 1j * math.fsum(terms.imag[order])
    if W == 0:
        # pair (n, -n) tails: 1/(n+a) + 1/(-n+a) ~ 2a/(a^2-n^2); remainder ~ -2a/n_max
        return complex(body - 2 * alpha / (n_max + 0.5))
    tail = 0j
    for side in (1, -1):
        y0 = side * (n_max + 1) + alpha
        tail += side * np.exp(1j * W * y0) * _phase_tail(np.array(abs(y0)),
                                                           np.array(side * W), 1)
    return complex(body + tail)
