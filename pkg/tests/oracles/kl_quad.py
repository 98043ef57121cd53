"""KL divergence of two normals by adaptive quadrature of p(x) ln(p(x)/q(x))."""

import math

from scipy import integrate


def _logpdf(x, mu, sigma):
    return -0.5 * ((x - mu) / sigma) ** 2 - math.log(sigma) - 0.5 * math.log(2 * math.pi)


def kl_quad(mu_p, sigma_p, mu_q, sigma_q):
    def integrand(x):
        lp = _logpdf(x, mu_p, sigma_p)
        return math.exp(lp) * (lp - _logpdf(x, mu_q, sigma_q))

    lo, hi = mu_p - 40 * sigma_p, mu_p + 40 * sigma_p
    points = sorted({mu_p, min(max(mu_q, lo), hi)})
    value, _ = integrate.quad(integrand, lo, hi, points=points, epsabs=1e-12, epsrel=1e-13, limit=500)
    return value
