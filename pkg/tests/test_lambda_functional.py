import math

import numpy as np
import pytest

from impuritybound.errors import AccuracyError, PreconditionError
from impuritybound.lambda_functional import (_hybrid_lattice_sum,
                                             fit_c_lambda, integrate_lambda,
                                             lattice_lambda_sum,
                                             write_sweep_csv)
from impuritybound.params import LambdaArgs

# frozen in-repo reference: full quadrature ladder at tol 1e-5
SPOT_ARGS = dict(s_tilde=(1.0, 0.0, 0.0), k_vec=(0.0, 0.0, 1.1),
                 q_mu=0.4, m=1.0)
SPOT_VALUE = 0.1489504349749875


def test_integral_spot_value():
    val = integrate_lambda(LambdaArgs(**SPOT_ARGS), tol=1e-5)
    assert val == pytest.approx(SPOT_VALUE, rel=1e-9)


def test_integral_error_report():
    val, err = integrate_lambda(LambdaArgs(**SPOT_ARGS), tol=1e-5,
                                return_err=True)
    assert err < 1e-5 * max(1.0, abs(val))


def test_integral_unreachable_tolerance():
    with pytest.raises(AccuracyError) as exc:
        integrate_lambda(LambdaArgs(**SPOT_ARGS), tol=1e-12)
    # the failure carries a usable estimate
    assert exc.value.estimate == pytest.approx(SPOT_VALUE, rel=1e-4)


def test_integral_scale_invariance():
    """The integral of a (-3)-homogeneous kernel is dilation invariant."""
    nu = 2.7
    scaled = LambdaArgs(s_tilde=(nu, 0.0, 0.0), k_vec=(0.0, 0.0, 1.1 * nu),
                        q_mu=0.4 * nu, m=1.0)
    v0 = integrate_lambda(LambdaArgs(**SPOT_ARGS), tol=1e-5)
    v1 = integrate_lambda(scaled, tol=1e-5)
    assert v1 == pytest.approx(v0, rel=1e-6)


def test_integral_rotation_invariance():
    """Joint rotation of s, K leaves the integral unchanged."""
    c, s = math.cos(0.9), math.sin(0.9)
    rot = LambdaArgs(s_tilde=(c, 0.0, -s), k_vec=(1.1 * s, 0.0, 1.1 * c),
                     q_mu=0.4, m=1.0)
    v1 = integrate_lambda(rot, tol=1e-5)
    assert v1 == pytest.approx(SPOT_VALUE, rel=1e-6)


LATTICE_ARGS = dict(s_tilde=(40.0, 0.0, 0.0), k_vec=(0.0, 0.0, 30.0),
                    q_mu=25.0, m=1.0, delta=2.0, n=10, ell=1.0)
HYBRID_VALUE = 0.16380698821107123


def test_lattice_sum_and_hybrid_agree():
    args = LambdaArgs(**LATTICE_ARGS)
    direct = lattice_lambda_sum(args, cutoff=900.0)
    hybrid = _hybrid_lattice_sum(args, tol=1e-5)
    assert hybrid == pytest.approx(HYBRID_VALUE, rel=1e-6)
    # direct truncation explains the entire discrepancy
    assert abs(float(hybrid) - float(direct)) <= direct.tail_bound + 1e-4
    assert direct.n_points > 0
    assert direct.tail_bound >= 0.0


def test_lattice_sum_monotone_in_cutoff():
    args = LambdaArgs(**LATTICE_ARGS)
    small = lattice_lambda_sum(args, cutoff=400.0)
    large = lattice_lambda_sum(args, cutoff=900.0)
    assert float(large) >= float(small)
    assert large.tail_bound <= small.tail_bound


def test_fit_c_lambda_validation():
    with pytest.raises(PreconditionError):
        fit_c_lambda([{"m": 1.0, "kappa": 0.5, "n": 100, "value": 0.3,
                       "lambda_m": 0.3, "c_t": 3.0}] * 5)


def test_fit_c_lambda_envelope(lambda_tilde_rows):
    c_lam = fit_c_lambda(lambda_tilde_rows)
    assert c_lam > 0
    for row in lambda_tilde_rows:
        gap = row["value"] - row["lambda_m"]
        bound = (c_lam / row["m"]
                 / (1.0 - row["kappa"] / row["c_t"]) ** 2
                 * row["n"] ** (-2.0 / 9.0))
        assert gap <= bound * (1.0 + 1e-12)


def test_write_sweep_csv_roundtrip(tmp_path, lambda_tilde_rows):
    path = tmp_path / "sweep.csv"
    rows = [{"m": r["m"], "kappa": r["kappa"], "N": r["n"], "ell": 1.0,
             "delta": r["delta"], "value": r["value"], "err_quad": 0.0,
             "err_search": 0.0} for r in lambda_tilde_rows]
    write_sweep_csv(rows, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0].split(",")[0] == "m"
    assert len(lines) == len(rows) + 1
    # full-precision serialization round-trips
    back = float(lines[1].split(",")[5])
    assert back == rows[0]["value"]
