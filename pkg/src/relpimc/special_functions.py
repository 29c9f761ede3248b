"""Modified Bessel functions of the second kind for real positive arguments.

Only the orders needed by the relativistic kernels are supported:
0, 1/2, 1, 3/2, 2 and 5/2. Everything is computed in exponentially
scaled form ``exp(x) * K_nu(x)`` so that arguments up to 1e8 never underflow.

Integer orders use Temme's series for ``x < 2`` and, for ``x >= 2``, a
Chebyshev expansion of ``sqrt(x) exp(x) K_nu(x)`` in ``4/x - 1``; both give
K_0 and K_1 together.
Half-integer orders are elementary. The compiled core mirrors these
routines operation for operation.
"""

from __future__ import annotations

import math
from fractions import Fraction

__all__ = [
    "BesselOrder",
    "bessel_k",
    "bessel_k01_ratio",
    "log_bessel_k",
    "scaled_bessel_k",
    "scaled_k0_k1",
]

EULER_GAMMA = 0.57721566490153286061
SERIES_SWITCH = 2.0
_EPS = 1e-16
_MAXITER = 100000

_ALLOWED = frozenset(Fraction(k, 2) for k in range(6))


class BesselOrder:
    """An order nu restricted to {0, 1/2, 1, 3/2, 2, 5/2}."""

    __slots__ = ("nu",)

    def __init__(self, nu):
        try:
            frac = Fraction(nu)
        except (TypeError, ValueError):
            frac = None
        if frac not in _ALLOWED:
            raise ValueError(f"unsupported Bessel order {nu!r}; allowed: 0, 1/2, 1, 3/2, 2, 5/2")
        self.nu = frac

    @property
    def twice(self) -> int:
        return int(2 * self.nu)

    def __float__(self) -> float:
        return float(self.nu)

    def __eq__(self, other):
        if isinstance(other, BesselOrder):
            return self.nu == other.nu
        return NotImplemented

    def __hash__(self):
        return hash(self.nu)

    def __repr__(self):
        return f"BesselOrder({self.nu})"


def _as_order(nu) -> BesselOrder:
    return nu if isinstance(nu, BesselOrder) else BesselOrder(nu)


def _check_arg(x: float) -> float:
    x = float(x)
    if not math.isfinite(x) or x <= 0.0:
        raise ValueError(f"Bessel K argument must be finite and positive, got {x!r}")
    return x


def _temme_k0_k1(x: float) -> tuple[float, float]:
    # Unscaled K_0, K_1 from Temme's series at mu = 0 (valid for x < 2).
    x2 = 0.5 * x
    ff = -EULER_GAMMA - math.log(x2)
    total = ff
    p = 0.5
    q = 0.5
    c = 1.0
    d = x2 * x2
    total1 = p
    i = 1
    while i < _MAXITER:
        fi = float(i)
        ff = (fi * ff + p + q) / (fi * fi)
        c *= d / fi
        p /= fi
        q /= fi
        delta = c * ff
        total += delta
        delta1 = c * (p - fi * ff)
        total1 += delta1
        if abs(delta) < abs(total) * _EPS:
            break
        i += 1
    return total, total1 * (2.0 / x)


# Chebyshev coefficients of sqrt(x) exp(x) K_nu(x) in t = 4/x - 1, for x >= 2.
# Generated by tools/gen_bessel_cheb.py (28 terms, truncation < 1e-18).
_CHEB_K0 = (
    1.2201515410329777,
    -3.1448101311964501e-2,
    1.5698838857300534e-3,
    -1.2849549581627803e-4,
    1.3949813718876499e-5,
    -1.8317555227191195e-6,
    2.7668136394450151e-7,
    -4.6604898976879477e-8,
    8.5740340174142261e-9,
    -1.6975345093890615e-9,
    3.5773972814003284e-10,
    -7.9574892444773966e-11,
    1.8559491149549256e-11,
    -4.5145978833744945e-12,
    1.1403405882072821e-12,
    -2.9800969231465999e-13,
    8.0328907750279716e-14,
    -2.2275133266420368e-14,
    6.3400764735635511e-15,
    -1.8485933707991104e-15,
    5.5120558107662761e-16,
    -1.6782306214037834e-16,
    5.2103781613311048e-17,
    -1.6475434593683222e-17,
    5.2994103047116732e-18,
    -1.7303192664670213e-18,
    5.6747218794717515e-19,
    -1.7097736336127543e-19,
)
_CHEB_K1 = (
    1.3603130952422213,
    1.0392373657681724e-1,
    -2.8578168596227794e-3,
    1.9521551847135163e-4,
    -1.936197974166083e-5,
    2.4064849478372171e-6,
    -3.5019606030878125e-7,
    5.7410841254500493e-8,
    -1.0345762465678097e-8,
    2.0150497551970346e-9,
    -4.1903547593419256e-10,
    9.2183151876053137e-11,
    -2.12996783842779e-11,
    5.1396396734823175e-12,
    -1.2891739609497572e-12,
    3.3484196660505732e-13,
    -8.97670518196736e-14,
    2.4771544241090745e-14,
    -7.0198370863355356e-15,
    2.0387031586733732e-15,
    -6.0570470699876335e-16,
    1.8380930380913018e-16,
    -5.6894483282828113e-17,
    1.794011391437408e-17,
    -5.7556499163478675e-18,
    1.8748104322268106e-18,
    -6.1354004667213072e-19,
    1.8454550128095664e-19,
)


def _clenshaw(coefs, t):
    b1 = 0.0
    b2 = 0.0
    t2 = 2.0 * t
    for j in range(len(coefs) - 1, 0, -1):
        b0 = t2 * b1 - b2 + coefs[j]
        b2 = b1
        b1 = b0
    return t * b1 - b2 + coefs[0]


def _cheb_k0_k1_scaled(x: float) -> tuple[float, float]:
    # Scaled K_0, K_1 for x >= 2 from the Chebyshev tables.
    t = 4.0 / x - 1.0
    r = 1.0 / math.sqrt(x)
    return _clenshaw(_CHEB_K0, t) * r, _clenshaw(_CHEB_K1, t) * r


def scaled_k0_k1(x: float) -> tuple[float, float]:
    """Return ``(exp(x) K_0(x), exp(x) K_1(x))`` for finite ``x > 0``."""
    x = _check_arg(x)
    if x < SERIES_SWITCH:
        k0, k1 = _temme_k0_k1(x)
        ex = math.exp(x)
        return k0 * ex, k1 * ex
    return _cheb_k0_k1_scaled(x)


def _scaled_half(x: float) -> tuple[float, float]:
    # scaled K_{1/2}, K_{3/2}
    base = math.sqrt(math.pi / (2.0 * x))
    return base, base * (1.0 + 1.0 / x)


def scaled_bessel_k(nu, x: float) -> float:
    """Exponentially scaled ``exp(x) * K_nu(x)``.

    Raises ``ValueError`` for an unsupported order or a non-positive,
    infinite or NaN argument.
    """
    order = _as_order(nu)
    x = _check_arg(x)
    n2 = order.twice
    if n2 % 2:
        k_half, k_3half = _scaled_half(x)
        if n2 == 1:
            return k_half
        if n2 == 3:
            return k_3half
        return k_half + (3.0 / x) * k_3half
    k0, k1 = scaled_k0_k1(x)
    if n2 == 0:
        return k0
    if n2 == 2:
        return k1
    return k0 + (2.0 / x) * k1


def log_bessel_k(nu, x: float) -> float:
    """Natural log of ``K_nu(x)``, finite for every representable ``x > 0``."""
    x = _check_arg(x)
    return math.log(scaled_bessel_k(nu, x)) - x


def bessel_k(nu, x: float) -> float:
    """Unscaled ``K_nu(x)``. Underflows to 0 beyond x ~ 700; for tests only."""
    x = _check_arg(x)
    return scaled_bessel_k(nu, x) * math.exp(-x)


def bessel_k01_ratio(x: float) -> float:
    """``K_0(x) / K_1(x)``, computed from scaled values so the exponentials cancel."""
    k0, k1 = scaled_k0_k1(x)
    return k0 / k1
