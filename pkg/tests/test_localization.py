import numpy as np
import pytest

from impuritybound import localization as loc
from impuritybound.errors import DomainError, PreconditionError


@pytest.fixture(scope="module")
def unit_partition():
    return loc.build_partition(loc.PartitionSpec(ell=1.0))


def test_spec_validation():
    with pytest.raises(PreconditionError):
        loc.PartitionSpec(ell=1.0, eps=0.3)
    with pytest.raises(DomainError):
        loc.PartitionSpec(ell=1.0, lbig=2.5)
    with pytest.raises(DomainError):
        loc.PartitionSpec(ell=-1.0)


def test_partition_of_unity(unit_partition):
    assert unit_partition.partition_residual() < 1e-12


def test_plateau(unit_partition):
    """J equals 1 away from the mollified cell boundary."""
    pts = np.linspace(0.125, 0.875, 9)
    x = np.stack(np.meshgrid(pts, pts, pts, indexing="ij"), -1)
    assert np.abs(unit_partition.j_values((0, 0, 0), x) - 1.0).max() < 1e-12


def test_cell_translation_symmetry(unit_partition):
    assert unit_partition.c_eta_spread < 1e-10


def test_scale_invariance():
    base = loc.build_partition(loc.PartitionSpec(ell=1.0))
    for ell in (0.5, 2.0):
        p = loc.build_partition(loc.PartitionSpec(ell=ell))
        assert p.c_eta == pytest.approx(base.c_eta, rel=1e-10)
        assert p.grad_sq_sum_max * ell**2 == pytest.approx(
            base.grad_sq_sum_max, rel=1e-10)


def test_overlap_bound(unit_partition):
    bounds = loc.ims_overlap_bound(unit_partition)
    assert bounds["measured"] <= bounds["universal"]
    assert bounds["universal"] == pytest.approx(8.0 * unit_partition.c_eta)


def test_cell_count_independence():
    vals = [loc.build_partition(
        loc.PartitionSpec(ell=1.0, lbig=float(k))).grad_sq_sum_max
        for k in (2, 3, 4)]
    assert max(vals) - min(vals) < 1e-8 * max(vals)


def test_v_partition_identity_and_invariance():
    base = loc.build_v_partition(loc.PartitionSpec(ell=1.0))
    assert np.abs(base["v"] ** 2 + base["v_tilde"] ** 2 - 1.0).max() < 1e-12
    assert np.all(base["v"] >= 0) and np.all(base["v"] <= 1.0 + 1e-12)
    for ell in (0.5, 2.0):
        vp = loc.build_v_partition(loc.PartitionSpec(ell=ell))
        assert vp["w_max_ell2"] == pytest.approx(base["w_max_ell2"],
                                                 rel=1e-10)
        assert vp["supp_w_ell3"] == pytest.approx(base["supp_w_ell3"],
                                                  rel=1e-10)


def test_v_partition_plateau_and_support():
    spec = loc.PartitionSpec(ell=1.0)
    vp = loc.build_v_partition(spec)
    ax = vp["axis"]
    h = ax[1] - ax[0]
    inner = (ax >= -spec.eps + 1e-9) & (ax <= 1.0 + spec.eps - 1e-9)
    idx = np.ix_(*[np.nonzero(inner)[0]] * 3)
    assert np.abs(vp["v"][idx] - 1.0).max() < 1e-12
    # W vanishes on the plateau, a finite-difference stencil away from
    # the transition edge
    strict = (ax >= -spec.eps + 3.0 * h) & (ax <= 1.0 + spec.eps - 3.0 * h)
    sidx = np.ix_(*[np.nonzero(strict)[0]] * 3)
    assert np.abs(vp["w"][sidx]).max() < 1e-10
