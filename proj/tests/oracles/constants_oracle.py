#!/usr/bin/env python3
"""Independent high-precision evaluation of the closed-form constants.

Values printed here are frozen into tests/constants_test.cpp and the
acceptance suite. Run: python3 tests/oracles/constants_oracle.py
"""
import mpmath as mp

mp.mp.dps = 40


def local(C, g, a, n, T, xi):
    delta = g**2 * mp.e**(-g * xi) / (8 * C * n)
    Cd = mp.e**(6 * g * C * T / (1 - a) + mp.mpf(3) / 2 * g * C * (n / delta)**((1 + a) / 2) * T)
    beta = (1 - a) / 2 * C**(2 / (1 - a)) * (2 * (1 + a))**((1 + a) / (1 - a))
    mu1 = 1 - a + (1 - a)**2 / ((1 + a) * g)
    mu2 = 1 + a + (1 - a) / g
    mu = (beta + C * mu1) * g**(2 / (a - 1)) + C * mu2
    eps_lip = 1 / (3 * n * C)
    eps_exp = C * n / (8 * mu * Cd) * g**-2 * mp.e**((1 - 3 * n / (1 - a)) * g * xi)
    eps = min(eps_lip, eps_exp)
    k = C * n * g**-2 * mp.e**(g * xi)
    E = mp.e**(3 * n * g * xi / (1 - a))
    Delta = (1 - 4 * k * delta)**2 - 16 * mu * delta * Cd * E * eps
    A = (3 - 2 * mp.sqrt(Delta)) / (4 * delta)
    lhs = k + mu * Cd * E * eps / (1 - delta * A) + A / 4
    return dict(delta=delta, C_delta=Cd, beta=beta, mu1=mu1, mu2=mu2, mu=mu,
                eps_lip=eps_lip, eps_exp=eps_exp, epsilon=eps, Delta=Delta, A=A,
                balance_lhs=lhs, balance_rhs=A / 2)


def phi(y, g):
    return (mp.e**(g * abs(y)) - g * abs(y) - 1) / g**2


def dphi(y, g):
    return (mp.e**(g * abs(y)) - 1) / g * mp.sign(y)


def Phi(x):
    return mp.sqrt(1 + x**-2 * mp.log((2 * x - 1) / (2 * (x - 1)))) - 1


def z_bound(C, g, n, T, xi, lam):
    return C * n * dphi(lam, g) * mp.sqrt(T) + mp.sqrt(2 * n * phi(xi, g) + 2 * C * n * dphi(lam, g) * (2 + lam) * T)


if __name__ == "__main__":
    one = mp.mpf(1)
    r = local(one, one, mp.mpf(0), 1, one, mp.mpf(0))
    print("worked instance (C=1,g=1,a=0,n=1,T=1,xi=0):")
    for key, v in r.items():
        print(f"  {key:12s} {mp.nstr(v, 20)}")
    lam = 2 * mp.e**(2 * one)  # (C+1) e^{(C+1)^2 T / 2}
    print("lambda       ", mp.nstr(lam, 20))
    print("eta_lambda   ", mp.nstr(local(one, one, mp.mpf(0), 1, one, lam)["epsilon"], 20))
    print("z_bmo_bound  ", mp.nstr(z_bound(one, one, 1, one, mp.mpf(0), lam), 20))
    print("Phi(2), Phi(3), Phi(10):", [mp.nstr(Phi(mp.mpf(x)), 15) for x in (2, 3, 10)])
    print("Phi(1e6)     ", mp.nstr(Phi(mp.mpf(10)**6), 15))
    print("Phi(1+1e-8)  ", mp.nstr(Phi(1 + mp.mpf(10)**-8), 15))
    # offset s = x - 1 at which Phi reaches 10: log1p(1/(2s)) = 120 (1+s)^2
    s = mp.findroot(lambda u: mp.log1p(1 / (2 * mp.e**u)) / (1 + mp.e**u)**2 - 120, -120)
    print("Phi(1+s)=10 at s =", mp.nstr(mp.e**s, 5))
    s300 = mp.mpf(10)**-300
    print("Phi(1+1e-300)  ", mp.nstr(mp.sqrt(1 + mp.log1p(1 / (2 * s300)) / (1 + s300)**2) - 1, 15))
    # E[exp(cos G)], G~N(0,1) and E[exp(tanh G)]
    f = lambda h: mp.quad(lambda x: mp.e**h(x) * mp.npdf(x), [-mp.inf, 0, mp.inf])
    print("log E[e^cos G]  ", mp.nstr(mp.log(f(mp.cos)), 20))
    print("log E[e^tanh G] ", mp.nstr(mp.log(f(mp.tanh)), 20))
    print("delta_alpha(1,1,0)", (1 - 0) / 2 * 1**2 * 1)
