"""Generate the Chebyshev tables for the large-argument Bessel K branch.

For x >= 2 the functions g_nu(u) = sqrt(x) * exp(x) * K_nu(x), u = 2/x in (0, 1],
are smooth in u and are expanded in Chebyshev polynomials of t = 2u - 1.
Coefficients are computed at 50 digits with mpmath and printed as Python
literals for ``special_functions.py`` (and the compiled core).

    python tools/gen_bessel_cheb.py [n_terms]
"""

import sys

import mpmath as mp

mp.mp.dps = 50


def coefficients(nu, n):
    def g(t):
        u = (t + 1) / 2
        if u == 0:
            return mp.sqrt(mp.pi / 2)
        x = 2 / u
        return mp.sqrt(x) * mp.exp(x) * mp.besselk(nu, x)

    nodes = [mp.cos(mp.pi * (k + mp.mpf(1) / 2) / n) for k in range(n)]
    vals = [g(t) for t in nodes]
    out = []
    for j in range(n):
        c = mp.mpf(2) / n * mp.fsum(v * mp.cos(mp.pi * j * (k + mp.mpf(1) / 2) / n)
                                   for k, v in enumerate(vals))
        out.append(c / 2 if j == 0 else c)
    return out


if __name__ == "__main__":
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 40
    for nu in (0, 1):
        coefs = coefficients(nu, n)
        print(f"_CHEB_K{nu} = (")
        for c in coefs:
            print(f"    {mp.nstr(c, 17, min_fixed=-1, max_fixed=1)},")
        print(")")
