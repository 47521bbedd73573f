"""Pointwise nonlinearities and their calculus.

A nonlinearity is a record of four callables: the function rho, its first and
second derivatives, and an antiderivative (the Lagrangian density whose sum
enters the associative-memory energy).  All callables are elementwise on
float64 arrays.  The default is the shifted sigmoid

    rho(x) = sigmoid(4x - 2)

which maps R onto (0, 1) with rho(0.5) = 0.5 and rho'(0.5) = 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class Nonlinearity:
    """Elementwise activation with exact analytic derivatives.

    antiderivative must satisfy d/dx antiderivative = evaluate, and
    derivative / second_derivative must be the exact first and second
    derivatives of evaluate (the solvers and the equilibrium backward
    pass rely on this, not on finite differences).
    """

    name: str
    evaluate: Callable[[np.ndarray], np.ndarray]
    derivative: Callable[[np.ndarray], np.ndarray]
    antiderivative: Callable[[np.ndarray], np.ndarray]
    second_derivative: Callable[[np.ndarray], np.ndarray]


def _sigmoid(z):
    # stable in both tails: only exp of non-positive arguments
    z = np.asarray(z, dtype=np.float64)
    pos = z >= 0
    ez = np.exp(np.where(pos, -z, z))
    return np.where(pos, 1.0 / (1.0 + ez), ez / (1.0 + ez))


def _shifted_sigmoid(x):
    return _sigmoid(np.asarray(x, dtype=np.float64) * 4.0 - 2.0)


def _shifted_sigmoid_prime(x):
    # sigmoid(z) sigmoid(-z), not sigmoid (1 - sigmoid): the subtraction
    # loses 7 digits in the saturated tails and the sigma inversion needs them
    z = np.asarray(x, dtype=np.float64) * 4.0 - 2.0
    return 4.0 * _sigmoid(z) * _sigmoid(-z)


def _shifted_sigmoid_second(x):
    z = np.asarray(x, dtype=np.float64) * 4.0 - 2.0
    s, c = _sigmoid(z), _sigmoid(-z)
    return 16.0 * s * c * (c - s)


def _shifted_sigmoid_antideriv(x):
    # integral of sigmoid(4x-2) is softplus(4x-2)/4
    z = np.asarray(x, dtype=np.float64) * 4.0 - 2.0
    return 0.25 * np.logaddexp(0.0, z)


def shifted_sigmoid() -> Nonlinearity:
    """The default activation, rho(x) = sigmoid(4x - 2)."""
    return Nonlinearity(
        name="shifted_sigmoid",
        evaluate=_shifted_sigmoid,
        derivative=_shifted_sigmoid_prime,
        antiderivative=_shifted_sigmoid_antideriv,
        second_derivative=_shifted_sigmoid_second,
    )


def identity() -> Nonlinearity:
    """rho(x) = x; antiderivative x^2 / 2.  Useful for linear memories."""
    return Nonlinearity(
        name="identity",
        evaluate=lambda x: np.asarray(x, dtype=np.float64).copy(),
        derivative=lambda x: np.ones_like(np.asarray(x, dtype=np.float64)),
        antiderivative=lambda x: 0.5 * np.square(np.asarray(x, dtype=np.float64)),
        second_derivative=lambda x: np.zeros_like(np.asarray(x, dtype=np.float64)),
    )


def _check_finite(s):
    s = np.asarray(s, dtype=np.float64)
    if not np.all(np.isfinite(s)):
        bad = int(np.flatnonzero(~np.isfinite(s.ravel()))[0])
        raise ValueError(f"non-finite input at flat index {bad}")
    return s


def rho_vec(s, nl: Nonlinearity) -> np.ndarray:
    """Elementwise rho.  Rejects non-finite input, naming the offending index."""
    return nl.evaluate(_check_finite(s))


def rho_prime_vec(s, nl: Nonlinearity) -> np.ndarray:
    """Elementwise rho'."""
    return nl.derivative(_check_finite(s))


def lagrangian_sum(s, nl: Nonlinearity) -> float:
    """Sum of the antiderivative of rho over all coordinates."""
    return float(np.sum(nl.antiderivative(_check_finite(s))))
