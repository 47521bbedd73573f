"""The sigma change of variables and the CHN -> HAM equivalence it induces."""

import numpy as np
import pytest

from helpers import contractive_model, spawn_rng
from hopeq.network import CHN, chn_deq_map
from hopeq.nonlin import identity, shifted_sigmoid
from hopeq.sigma import (
    SIGMA_RANGE,
    ham_sigma_map,
    sigma,
    sigma_inverse,
    sigma_prime,
    verify_sigma_bijective,
)
from hopeq.solvers import SolverConfig, picard_solve

NL = shifted_sigmoid()


def test_sigma_values():
    # sigma(s) = s / rho'(s); at the midpoint rho' = 1
    assert sigma(np.array(0.5), NL) == pytest.approx(0.5, abs=1e-15)
    assert sigma(np.array(0.0), NL) == pytest.approx(0.0, abs=1e-15)
    s = np.array(1.25)
    assert sigma(s, NL) == pytest.approx(float(s / NL.derivative(s)), abs=1e-14)


def test_sigma_prime_matches_finite_differences():
    grid = np.linspace(-2.5, 2.5, 41)
    h = 1e-6
    fd = (sigma(grid + h, NL) - sigma(grid - h, NL)) / (2 * h)
    np.testing.assert_allclose(sigma_prime(grid, NL), fd, rtol=1e-6, atol=1e-8)


def test_shifted_sigmoid_sigma_is_bijective_on_the_working_range():
    assert verify_sigma_bijective(NL)
    # identity nonlinearity: sigma is the identity, trivially bijective
    assert verify_sigma_bijective(identity())


def test_inverse_round_trip():
    # spec-level check: 1000 points across [-3, 3] recover to 1e-8
    s = np.linspace(-3.0, 3.0, 1000)
    back = sigma_inverse(sigma(s, NL), NL)
    assert float(np.max(np.abs(back - s))) < 1e-8


def test_inverse_rejects_out_of_range_targets():
    hi = float(sigma(np.array([SIGMA_RANGE[1]]), NL)[0])
    with pytest.raises(ValueError, match="flat index 1"):
        sigma_inverse(np.array([0.0, hi * 2.0]), NL)


def test_sigma_ham_map_with_zero_couplings_returns_the_bias():
    # with W = 0 and U = 0 the sigma-space map is constant at b
    from hopeq.network import Architecture, ModelParams

    p = ModelParams(
        arch=Architecture((1, 1)),
        blocks=[np.zeros((1, 1))],
        biases=[np.array([0.8])],
        variant=CHN,
        nonlin=NL,
    )
    for t in (-2.0, 0.0, 1.5):
        np.testing.assert_allclose(
            ham_sigma_map(np.array([t]), p, np.array([0.0])), [0.8], atol=1e-14
        )


def test_theorem_2_equivalence_on_small_models():
    # the sigma image of the CHN fixed point is the fixed point of the
    # sigma-space HAM, and both sides see the same activations
    rng = spawn_rng(71)
    cfg = SolverConfig(method="picard", damping=0.5, max_iters=4000, tol=1e-12)
    for trial in range(5):
        sizes = (int(rng.integers(2, 5)), int(rng.integers(2, 5)), int(rng.integers(2, 5)))
        p = contractive_model(700 + trial, sizes, float(rng.uniform(0.25, 0.6)), CHN)
        x = rng.uniform(0.0, 1.0, sizes[0])
        n = p.arch.state_dim

        res_chn = picard_solve(lambda s: chn_deq_map(s, p, x), np.zeros(n), cfg)
        res_sig = picard_solve(lambda t: ham_sigma_map(t, p, x), np.zeros(n), cfg)
        assert res_chn.converged and res_sig.converged

        s_star = res_chn.equilibrium
        t_star = res_sig.equilibrium
        assert float(np.max(np.abs(sigma(s_star, NL) - t_star))) < 1e-5
        rho_sigma = NL.evaluate(sigma_inverse(t_star, NL))
        assert float(np.max(np.abs(NL.evaluate(s_star) - rho_sigma))) < 1e-5
