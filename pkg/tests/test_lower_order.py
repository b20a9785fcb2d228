import math

import numpy as np
import pytest
from conftest import make_problem

from uniqlab.errors import KappaZero
from uniqlab.forms import assemble_form
from uniqlab.lower_order import LowerOrderBounds, accretivity_shift, caccioppoli_gamma, compute_bounds


def _square(res=17, shape="box", **kw):
    coeffs = {"c11": "1", "c22": "1", **kw}
    extra = {"radius": 0.45, "center": (0.5, 0.5)} if shape == "disk" else {}
    return make_problem(2, (0, 0), (1, 1), coeffs, origin=(0.5, 0.5), shape=shape, **extra).discretize(res)


def test_no_lower_order_terms():
    b = compute_bounds(_square())
    assert (b.omega0, b.omega1, b.omega) == (0.0, 0.0, 0.0)
    assert b.kappa_max == math.inf
    assert all(b.conditions.values())
    assert b.as_dict()["kappa_max"] == "inf"


def test_constant_drift():
    b = compute_bounds(_square(c1="1"))
    assert b.kappa_max == pytest.approx(1.0)
    assert b.omega1 == pytest.approx(0.0, abs=1e-12)


def test_interval_square_and_linear_drift():
    f = make_problem(1, (0,), (1,), {"c11": "x^2", "c1": "x"}, origin=(0.5,)).discretize(101)
    b = compute_bounds(f)
    assert b.kappa_max == pytest.approx(1.0)
    assert b.omega1 == pytest.approx(1.0)
    assert b.omega == pytest.approx(-0.5)


@pytest.mark.parametrize("kappa, omega0, expected", [(1.0, 0.0, 0.25), (1.0, 2.0, 0.0)])
def test_accretivity_shift(kappa, omega0, expected):
    b = LowerOrderBounds(omega0, 0.0, kappa, omega0, 0)
    assert accretivity_shift(b) == pytest.approx(expected)


def test_accretivity_shift_without_drift():
    assert accretivity_shift(compute_bounds(_square(c0="1"))) == 0.0


def test_kappa_zero_raises():
    with pytest.raises(KappaZero):
        accretivity_shift(LowerOrderBounds(0.0, 0.0, 0.0, 0.0, 0))


def test_kappa_max_is_sharp():
    f = _square(c11="1 + x1", c12="0.2*x2", c22="2", c1="x2", c2="1 - x1")
    b = compute_bounds(f)
    cc = np.einsum("nk,nl->nkl", f.c, f.c)
    assert np.linalg.eigvalsh(f.C - b.kappa_max * cc).min() > -1e-10
    i = b.argmin
    assert np.linalg.eigvalsh(f.C[i] - (b.kappa_max * (1 + 1e-6)) * cc[i]).min() < 0


def test_drift_form_bound_sampled():
    f = _square(33, c11="1 + x1", c22="1", c1="0.5*x2", c2="-0.3")
    b = compute_bounds(f)
    form = assemble_form(f, "neumann")
    x, y = f.grid.points.T
    rng = np.random.default_rng(11)
    for _ in range(10):
        a = rng.normal(size=4)
        phi = a[0] * x + a[1] * y + a[2] * x * y + a[3] * x**2
        grad = np.stack([a[0] + a[2] * y + 2 * a[3] * x, a[1] + a[2] * x], axis=1)
        lhs = f.grid.vol * np.sum(np.einsum("nk,nk->n", f.c, grad) ** 2)
        assert lhs <= form.value(phi) / b.kappa_max * 1.1


def test_restriction_monotonicity():
    kw = dict(c0="x1 + x2", c1="x1^2", c2="x2")
    big, small = compute_bounds(_square(33, **kw)), compute_bounds(_square(33, "disk", **kw))
    assert small.omega0 >= big.omega0
    assert small.omega1 <= big.omega1


def test_gamma_constant():
    assert caccioppoli_gamma(compute_bounds(_square())) == 1.0
    assert caccioppoli_gamma(LowerOrderBounds(0, 0, 0.5, 0, 0)) == pytest.approx(1.5)
