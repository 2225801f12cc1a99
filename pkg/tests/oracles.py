"""
Independent reference computations used to freeze expected values.

These are written straight from the published formulas with hard-coded
coefficients, without going through the package's crystal files or helper
functions, so an error in the library code cannot hide in both places.
"""
import math

import numpy as np


def _ktp_thermal(lam, T, n1, n2):
    dT = T - 25.0
    p1 = sum(a / lam**m for m, a in enumerate(n1))
    p2 = sum(a / lam**m for m, a in enumerate(n2))
    return p1 * dT + p2 * dT**2


def ktp_nz(lam, T):
    """Fradkin (1999) n_z with the Emanueli & Arie (2003) thermal terms."""
    l2 = lam * lam
    n2 = 2.12725 + 1.18431 / (1 - 0.0514852 / l2) + 0.6603 / (1 - 100.00507 / l2) - 0.00968956 * l2
    return math.sqrt(n2) + _ktp_thermal(
        lam, T, (9.9587e-6, 9.9228e-6, -8.9603e-6, 4.1010e-6),
        (-1.1882e-8, 10.459e-8, -9.8136e-8, 3.1481e-8))


def ktp_ny(lam, T):
    """Fan (1987) n_y with the Emanueli & Arie (2003) thermal terms."""
    l2 = lam * lam
    n2 = 2.19229 + 0.83547 / (1 - 0.04970 / l2) - 0.01621 * l2
    return math.sqrt(n2) + _ktp_thermal(
        lam, T, (6.2897e-6, 6.3061e-6, -6.0629e-6, 2.6486e-6),
        (-0.14445e-8, 2.2244e-8, -3.5770e-8, 1.3470e-8))


def ktp_yyz_mismatch(lp, ls, li, T):
    """k_p(y) - k_s(y) - k_i(z) in rad/mm, wavelengths in um."""
    k = lambda n, lam: 2 * math.pi * n / lam * 1e3
    return k(ktp_ny(lp, T), lp) - k(ktp_ny(ls, T), ls) - k(ktp_nz(li, T), li)


def ktp_yzy_mismatch(lp, ls, li, T):
    k = lambda n, lam: 2 * math.pi * n / lam * 1e3
    return k(ktp_ny(lp, T), lp) - k(ktp_nz(ls, T), ls) - k(ktp_ny(li, T), li)


def bisect(f, a, b, tol=1e-13):
    fa = f(a)
    while b - a > tol:
        m = 0.5 * (a + b)
        fm = f(m)
        if (fm < 0) == (fa < 0):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)


# -- two-qubit quantities, by brute force -------------------------------------


def purity(rho):
    return sum((rho[i, j] * rho[j, i]).real for i in range(4) for j in range(4))


def wootters(rho):
    sy = np.array([[0, -1j], [1j, 0]])
    yy = np.kron(sy, sy)
    r = rho @ yy @ rho.conj() @ yy
    lam = sorted(np.sqrt(np.abs(np.linalg.eigvals(r))), reverse=True)
    return max(0.0, lam[0] - lam[1] - lam[2] - lam[3])


def overlap(rho, psi):
    return sum((psi[i].conjugate() * rho[i, j] * psi[j]).real for i in range(4) for j in range(4))


def reduced_spectrum_purity(f):
    """Tr(r^2) of the signal's reduced spectral matrix r = f f^dagger / Tr."""
    r = f @ f.conj().T
    r = r / np.trace(r).real
    ev = np.linalg.eigvalsh(r)
    return float(np.sum(ev**2))


def uhlmann_fidelity(rho, sigma):
    """(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2 for two mixed states."""
    from scipy.linalg import sqrtm
    r = sqrtm(rho)
    return float(np.trace(sqrtm(r @ sigma @ r)).real ** 2)
