import math

import numpy as np
import pytest

from impuritybound.errors import DomainError, PreconditionError
from impuritybound.kernels import l_continuum
from impuritybound.params import ModelParams
from impuritybound.torus_forms import (Mollifier, SingularAmplitude,
                                       l_periodic, l_periodic_richardson,
                                       off_bound_check,
                                       random_fermionic_amplitude,
                                       rep_sing_check, t_alpha_per,
                                       t_dia_per, t_off_per, t_tilde_vector)

# frozen oracle: Poisson closed form validated against the mollified
# brute-force definition (two bump shapes, rel. agreement ~4e-5)
ORACLE = dict(m=1.0, mu=1.3, ell=1.7)
ORACLE_LPER = 56.48701108110785


def _oracle_kvec():
    sp = 2.0 * math.pi / ORACLE["ell"]
    return np.array([[sp, 0.0, -sp]])


def test_l_periodic_frozen_oracle():
    params = ModelParams(n=1, **ORACLE)
    assert l_periodic(params, _oracle_kvec()) == pytest.approx(
        ORACLE_LPER, rel=1e-12)


def test_l_periodic_bruteforce_cross_check():
    params = ModelParams(n=1, **ORACLE)
    tau = Mollifier(shape=2.0)
    brute = l_periodic_richardson(params, _oracle_kvec(), tau)
    assert brute == pytest.approx(ORACLE_LPER, rel=1e-5)


def test_l_periodic_approaches_continuum_large_ell():
    """Dual-lattice correction dies off exponentially with the box side."""
    sp = 2.0 * math.pi / 12.0
    kvec = np.array([[sp, 0.0, 0.0]])
    params = ModelParams(m=1.0, mu=1.0, ell=12.0, n=1)
    cont = l_continuum(params, kvec[0], 0.0)
    assert l_periodic(params, kvec) == pytest.approx(cont, rel=1e-4)


def test_amplitude_antisymmetry_enforced():
    bad = {((0, 0, 0), (1, 0, 0), (0, 1, 0)): 1.0,
           ((0, 0, 0), (0, 1, 0), (1, 0, 0)): 1.0}
    with pytest.raises(PreconditionError):
        SingularAmplitude(n=3, ell=1.0, support=bad, antisymmetric=True)


def test_random_amplitude_is_fermionic():
    xi = random_fermionic_amplitude(3, ell=1.0, seed=11)
    for key, amp in xi.items():
        swapped = (key[0], key[2], key[1])
        assert xi.support.get(swapped, 0.0) == pytest.approx(-amp)


def test_form_breakdown_additivity():
    params = ModelParams(m=1.0, alpha=0.7, mu=2.0, n=2, ell=1.3)
    xi = random_fermionic_amplitude(2, ell=1.3, seed=3)
    br = t_alpha_per(xi, params)
    assert br.total == pytest.approx(br.alpha_term + br.t_dia + br.t_off)
    assert br.alpha_term == pytest.approx(
        (2.0 * params.m / (params.m + 1.0)) * params.alpha * params.n
        * xi.norm_sq())


def test_vector_form_reduces_to_fermionic():
    """Alternating-sign replicas of one amplitude reproduce n times the
    per-particle forms exactly."""
    params = ModelParams(m=1.0, alpha=0.0, mu=2.0, n=2, ell=1.3)
    xi = random_fermionic_amplitude(2, ell=1.3, seed=5)
    _, dia_t, off_t = t_tilde_vector([xi, SingularAmplitude(
        n=2, ell=1.3, support={k: -a for k, a in xi.items()},
        antisymmetric=True)], params)
    assert off_t == pytest.approx(2.0 * t_off_per(xi, params), rel=1e-12)
    assert dia_t == pytest.approx(2.0 * t_dia_per(xi, params), rel=1e-12)


def test_off_diagonal_is_real_for_fermions():
    from impuritybound.torus_forms import t_off_per_complex

    params = ModelParams(m=0.8, mu=3.0, n=3, ell=1.0)
    xi = random_fermionic_amplitude(3, ell=1.0, seed=9)
    val = t_off_per_complex(xi, params)
    assert abs(val.imag) < 1e-12 * max(abs(val.real), 1.0)


def test_rep_sing_gaussian_residual():
    params = ModelParams(m=1.0, alpha=0.5, mu=1.0, n=1)
    residual = rep_sing_check(lambda r: math.exp(-r * r / 2.0), params)
    assert residual < 1e-6


def test_off_bound_check_small_ensemble(registry):
    params = ModelParams(m=1.0, mu=2.0, n=2, ell=1.0)
    c_t = registry.value("c_t")
    for seed in range(5):
        xi = random_fermionic_amplitude(2, ell=1.0, seed=seed)
        lhs, rhs = off_bound_check(xi, params, lambda_tilde_val=0.3409,
                                   kappa=1.04, c_t=c_t)
        assert lhs >= rhs


def test_off_bound_check_preconditions(registry):
    xi = random_fermionic_amplitude(2, ell=1.0, seed=0)
    params = ModelParams(m=1.0, mu=-100.0, n=2, ell=1.0)
    with pytest.raises(PreconditionError):
        off_bound_check(xi, params, 0.3, kappa=1.0,
                        c_t=registry.value("c_t"))


def test_negative_mu_requires_antisymmetry():
    sym = SingularAmplitude(n=2, ell=1.0,
                            support={((0, 0, 0), (1, 0, 0)): 1.0},
                            antisymmetric=False)
    params = ModelParams(m=1.0, mu=-0.5, n=2, ell=1.0)
    with pytest.raises(PreconditionError):
        t_dia_per(sym, params)
