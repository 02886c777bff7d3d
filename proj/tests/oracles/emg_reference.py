"""Reference EMG densities and MME fits at 50 digits (mpmath).

Prints C++ initializer rows used by test_emg_model.cpp.
"""
from mpmath import mp, mpf, exp, erfc, sqrt, cbrt

mp.dps = 50


def pdf(x, mu, sigma, tau):
    lam = 1 / tau
    return lam / 2 * exp(lam / 2 * (2 * mu + lam * sigma**2 - 2 * x)) * erfc((mu + lam * sigma**2 - x) / (sqrt(2) * sigma))


cases = [
    (0, 0, 1, 1),
    (1, 0, 1, 1),
    (-3, 0, 1, 1),
    (8, 0, 1, 1),
    (-10, 0, 1, 1),
    (30, 0, 1, 0.5),
    ("300e-6", "250e-6", "10e-6", "20e-6"),
    ("500e-6", "250e-6", "10e-6", "20e-6"),
    ("200e-6", "250e-6", "10e-6", "20e-6"),
    ("1e-3", "0", "1e-6", "100e-6"),
    ("-40e-6", "0", "1e-6", "100e-6"),
    (0.3, 0, 1, 0.05),
]
for c in cases:
    x, mu, s, t = (mpf(str(v)) for v in c)
    print("{%s, %s, %s, %s, %s}," % (c[0], c[1], c[2], c[3], mp.nstr(pdf(x, mu, s, t), 20)))

# MME on explicit moments
for m1, m2, m3 in [(1, 1, 1), ("3e-4", "1e-10", "5e-16"), (0, 4, "0.1")]:
    m1, m2, m3 = mpf(str(m1)), mpf(str(m2)), mpf(str(m3))
    g = m3 / m2**mpf(1.5)
    c = cbrt(g / 2)
    tau = sqrt(m2) * c
    print("mme", mp.nstr(m1 - tau, 20), mp.nstr(sqrt(m2) * sqrt(1 - c * c), 20), mp.nstr(tau, 20))
