"""The sigma change of variables linking CHNs to HAMs.

    sigma(s) = s / rho'(s)   (elementwise)

When sigma is a bijection on the operating range, substituting
s_sigma = sigma(s) turns the CHN fixed-point equation into a HAM one with
effective nonlinearity rho_sigma = rho o sigma^{-1}: the fixed point of
ham_sigma_map is sigma(s*) for the CHN fixed point s*.

Bijectivity is not provable for arbitrary rho, so it is checked numerically
on a dense grid over [-6, 6] before use; inversion is safeguarded
bisection with Newton polish per coordinate.
"""

from __future__ import annotations

import numpy as np

from .network import ModelParams, _padded_drive, input_drive, wtilde_matvec
from .nonlin import Nonlinearity

SIGMA_RANGE = (-6.0, 6.0)


def sigma(s, nl: Nonlinearity) -> np.ndarray:
    """s / rho'(s).  Fails where rho' vanishes (non-bijective region)."""
    s = np.asarray(s, dtype=np.float64)
    d = nl.derivative(s)
    zero = d == 0.0
    if np.any(zero):
        bad = int(np.flatnonzero(zero.ravel())[0])
        raise ValueError(f"rho' vanishes at flat index {bad}; sigma is undefined there")
    return s / d


def sigma_prime(s, nl: Nonlinearity) -> np.ndarray:
    """d sigma / ds = (rho' - s rho'') / rho'^2, used for Newton polish."""
    s = np.asarray(s, dtype=np.float64)
    d = nl.derivative(s)
    return (d - s * nl.second_derivative(s)) / (d * d)


def verify_sigma_bijective(nl: Nonlinearity, lo: float = SIGMA_RANGE[0],
                           hi: float = SIGMA_RANGE[1], num: int = 2401) -> bool:
    """Sample sigma on a dense grid and check strict monotonicity."""
    grid = np.linspace(lo, hi, num)
    try:
        vals = sigma(grid, nl)
    except ValueError:
        return False
    return bool(np.all(np.isfinite(vals)) and np.all(np.diff(vals) > 0.0))


def sigma_inverse(t, nl: Nonlinearity, tol: float = 1e-10,
                  lo: float = SIGMA_RANGE[0], hi: float = SIGMA_RANGE[1]) -> np.ndarray:
    """Solve sigma(s) = t per coordinate within [lo, hi].

    Safeguarded root finding: keep a bracket, try a Newton step, bisect
    whenever Newton leaves the bracket.  Targets outside [sigma(lo), sigma(hi)]
    raise, naming the offending coordinate.
    """
    t = np.asarray(t, dtype=np.float64)
    shape = t.shape
    t = np.atleast_1d(t.ravel())
    s_lo = float(sigma(np.array([lo]), nl)[0])
    s_hi = float(sigma(np.array([hi]), nl)[0])
    below, above = t < s_lo, t > s_hi
    if np.any(below | above):
        bad = int(np.flatnonzero(below | above)[0])
        raise ValueError(
            f"sigma_inverse target {t[bad]:.6g} at flat index {bad} outside "
            f"bijective range [{s_lo:.6g}, {s_hi:.6g}]"
        )

    a = np.full_like(t, lo)
    b = np.full_like(t, hi)
    s = 0.5 * (a + b)
    done = np.zeros(t.shape, dtype=bool)
    for _ in range(300):
        f = sigma(s, nl) - t
        pos = f > 0.0
        b = np.where(~done & pos, s, b)
        a = np.where(~done & ~pos, s, a)
        # freeze converged coordinates so a late safeguard reset cannot
        # move them off the root
        done = done | (b - a < tol)
        if np.all(done):
            break
        with np.errstate(divide="ignore", invalid="ignore"):
            step = f / sigma_prime(s, nl)
            s_newton = s - step
        ok = np.isfinite(s_newton) & (s_newton > a) & (s_newton < b)
        s_next = np.where(done, s, np.where(ok, s_newton, 0.5 * (a + b)))
        # Newton may approach the root one-sidedly, leaving the far bracket
        # endpoint in place; a stalled iterate is converged too
        done = done | (np.abs(s_next - s) < 1e-12 * np.maximum(1.0, np.abs(s)))
        s = s_next
    return s.reshape(shape)


def ham_sigma_map(s_sig, p: ModelParams, x) -> np.ndarray:
    """One iteration of the sigma-transformed HAM:

        s_sig <- W rho_sigma(s_sig) + b + U rho_sigma(sigma(x))

    using rho_sigma(sigma(x)) = rho(x) for the clamped input.
    """
    s_sig = np.asarray(s_sig, dtype=np.float64)
    if s_sig.shape[-1] != p.arch.state_dim:
        raise ValueError(
            f"state has last dimension {s_sig.shape[-1]}, expected {p.arch.state_dim}"
        )
    r = p.nonlin.evaluate(sigma_inverse(s_sig, p.nonlin))
    drive = p.biases_flat() + _padded_drive(p, input_drive(p, x))
    return wtilde_matvec(p, r) + drive
