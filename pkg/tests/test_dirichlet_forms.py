import numpy as np
import pytest
from conftest import make_problem
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from uniqlab.forms import FieldFunction, assemble_form, gamma, graph_norm

SQ = make_problem(2, (0, 0), (1, 1), {"c11": "1 + x1", "c12": "0.3", "c22": "2 - x2"}, origin=(0.5, 0.5))
SQF = SQ.discretize(17)


def _interval(c11="1", res=1001):
    return make_problem(1, (0,), (1,), {"c11": c11}, origin=(0.5,)).discretize(res)


def test_gamma_linear_function_identity():
    f = make_problem(2, (0, 0), (1, 1), {"c11": "1", "c22": "1"}, origin=(0.5, 0.5)).discretize(33)
    g = gamma(f, f.grid.points[:, 0])
    assert np.allclose(g, 1.0)


def test_gamma_constant_is_zero():
    assert np.all(gamma(SQF, np.full(SQF.grid.n, 3.0)) == 0)


def test_gamma_log_under_square_metric():
    f = _interval("x^2", 2001)
    x = f.grid.points[:, 0]
    g = gamma(f, np.log(x))
    away = (x > 0.1) & (x < 0.9)
    assert np.max(np.abs(g[away] - 1)) < 1e-4


def test_gamma_nonnegative():
    rng = np.random.default_rng(1)
    assert gamma(SQF, rng.normal(size=SQF.grid.n)).min() >= 0


def test_neumann_energy_of_identity_on_interval():
    vals = []
    for res in (101, 1001):
        f = _interval(res=res)
        vals.append(assemble_form(f, "neumann").value(f.grid.points[:, 0]))
    # node-centred lattice: the energy covers (h, 1-h), so the defect is 2h
    assert vals[1] == pytest.approx(1.0, abs=2.5e-3)
    assert abs(1 - vals[0]) / abs(1 - vals[1]) == pytest.approx(10, rel=0.05)


def test_forms_agree_on_compact_support():
    rng = np.random.default_rng(2)
    phi = rng.normal(size=SQF.grid.n)
    phi[SQF.grid.collar(1)] = 0
    d, n = assemble_form(SQF, "dirichlet"), assemble_form(SQF, "neumann")
    assert d.value(phi) == n.value(phi)


def test_five_node_hand_evaluation():
    f = _interval("x^2", 5)
    one = np.ones(3)
    assert assemble_form(f, "neumann").value(one) == pytest.approx(0.0, abs=1e-15)
    # ghost-zero edges at x = 1/4 and x = 3/4: c(x_i) h^-2 * h each
    assert assemble_form(f, "dirichlet").value(one) == pytest.approx((0.25**2 + 0.75**2) / 0.25)


def test_graph_norms():
    f = _interval(res=1001)
    form = assemble_form(f, "neumann")
    x = f.grid.points[:, 0]
    assert graph_norm(form, np.zeros(f.grid.n)) == 0.0
    assert graph_norm(form, np.ones(f.grid.n)) == pytest.approx(1.0, abs=1e-3)
    assert graph_norm(form, x) == pytest.approx(np.sqrt(4 / 3), abs=3e-3)


@pytest.mark.parametrize("flavor", ["dirichlet", "neumann"])
def test_symmetric_psd(flavor):
    A = assemble_form(SQF, flavor).A
    assert (A - A.T).nnz == 0 or abs(A - A.T).max() == 0
    ev = np.linalg.eigvalsh(A.toarray())
    assert ev.min() > -1e-10 * ev.max()


def test_dirichlet_dominates_neumann():
    rng = np.random.default_rng(3)
    d, n = assemble_form(SQF, "dirichlet"), assemble_form(SQF, "neumann")
    for _ in range(20):
        phi = rng.normal(size=SQF.grid.n)
        assert d.value(phi) >= n.value(phi) - 1e-12


def test_energy_density_sums_to_value():
    rng = np.random.default_rng(4)
    phi = rng.normal(size=SQF.grid.n)
    for flavor in ("dirichlet", "neumann"):
        form = assemble_form(SQF, flavor)
        assert SQF.grid.vol * form.energy_density(phi).sum() == pytest.approx(form.value(phi))


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, SQF.grid.n, elements=st.floats(-2, 3)), st.sampled_from(["dirichlet", "neumann"]))
def test_unit_contraction_does_not_increase_form(phi, flavor):
    form = assemble_form(SQF, flavor)
    assert form.value(np.clip(phi, 0, 1)) <= form.value(phi) * (1 + 1e-12) + 1e-12


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, SQF.grid.n, elements=st.floats(-1, 1)), arrays(np.float64, SQF.grid.n, elements=st.floats(0, 1)))
def test_ideal_property(phi, eta):
    eta = eta.copy()
    eta[SQF.grid.collar(1)] = 0
    form = assemble_form(SQF, "dirichlet")
    prod = FieldFunction(SQF, eta * phi, zero_extended=True)  # vanishes on collar(1)
    i, j, W = form.edges
    # edgewise (a b - a' b')^2 <= 2 b^2 (a - a')^2 + 2 max(a^2, a'^2) (b - b')^2
    cross = np.sum(W * np.maximum(eta[i], eta[j]) ** 2 * (phi[i] - phi[j]) ** 2)
    bound = 2 * np.max(np.abs(phi)) ** 2 * form.value(eta) + 2 * cross
    assert form.value(prod.values) <= bound * (1 + 1e-12) + 1e-14


def test_consistency_rate():
    p = make_problem(2, (0, 0), (1, 1), {"c11": "1", "c22": "1"}, origin=(0.5, 0.5))
    errs = []
    for res in (33, 65, 129):
        f = p.discretize(res)
        x, y = f.grid.points.T
        phi = np.sin(np.pi * x) * np.sin(np.pi * y)
        errs.append(abs(assemble_form(f, "dirichlet").value(phi) - np.pi**2 / 2))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 0.9)


def test_field_function_checks():
    with pytest.raises(ValueError):
        FieldFunction(SQF, np.ones(SQF.grid.n), zero_extended=True)
    with pytest.raises(ValueError):
        FieldFunction(SQF, np.full(SQF.grid.n, np.nan))
    with pytest.raises(ValueError):
        assemble_form(SQF, "robin")


def test_triplet_dump(tmp_path):
    form = assemble_form(SQF, "neumann")
    path = tmp_path / "a.txt"
    form.to_triplets(path)
    r, c, v = np.loadtxt(path, unpack=True)
    A = np.zeros(form.A.shape)
    A[r.astype(int), c.astype(int)] = v
    assert np.allclose(A, form.A.toarray())
