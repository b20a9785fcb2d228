import numpy as np
import pytest
from conftest import make_problem
from hypothesis import given, settings
from hypothesis import strategies as st

from uniqlab.config import parse_config
from uniqlab.errors import ConfigError, Disconnected, EmptyInterior, NonFinite, NotPositiveDefinite
from uniqlab.expr import compile_expression
from uniqlab.grid import CoefficientSpec, DomainSpec, build_grid, load_mask, sample_coefficients


def test_unit_square_counts():
    g = build_grid(DomainSpec(2, (0, 0), (1, 1), origin=(0.5, 0.5)), 65)
    assert g.shape == (65, 65)
    assert g.n == 63 * 63
    assert g.h == pytest.approx((1 / 64, 1 / 64))


def test_interval_counts():
    g = build_grid(DomainSpec(1, (0,), (1,), origin=(0.5,)), 1001)
    assert g.n == 999
    assert g.h[0] == pytest.approx(1e-3)


def test_punctured_disk_count_by_enumeration():
    spec = DomainSpec(2, (-1, -1), (1, 1), "punctured-disk", {"radius": 1.0, "puncture": (0.0, 0.0)}, origin=(0.5, 0))
    g = build_grid(spec, 129)
    ax = np.linspace(-1, 1, 129)
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    disk = X**2 + Y**2 < 1
    assert g.excluded.sum() >= 1
    assert g.n == disk.sum() - g.excluded.sum()
    assert not g.mask[64, 64]  # the puncture node itself is not interior


def test_collars_nested_and_interior():
    g = build_grid(DomainSpec(2, (0, 0), (1, 1), origin=(0.5, 0.5)), 33)
    c1, c2, c3 = (g.collar(k) for k in (1, 2, 3))
    assert c1.sum() == 4 * 31 - 4
    assert np.all(c1 <= c2) and np.all(c2 <= c3)
    assert c3.shape == (g.n,)


def test_truncated_faces_are_not_boundary():
    spec = DomainSpec(1, (-4,), (4,), truncated=frozenset({"x1-", "x1+"}), origin=(0,))
    g = build_grid(spec, 81)
    assert g.n == 79  # face nodes are reflecting window nodes, never interior
    assert g.window.sum() == 2
    assert not g.collar(1).any()
    assert g.window_edge.sum() == 2


def test_empty_interior():
    spec = DomainSpec(2, (-1, -1), (1, 1), "disk", {"radius": 0.01}, origin=(0, 0))
    with pytest.raises(EmptyInterior):
        build_grid(spec, 6)


def test_disconnected_annulus_slice():
    mask = np.array([[1, 1, 0, 0, 1, 1]] * 3, dtype=bool)
    spec = DomainSpec(2, (0, 0), (1, 1), "mask", mask=mask, origin=(0.0, 0.0))
    with pytest.raises(Disconnected):
        build_grid(spec, (3, 6))


def test_origin_outside_box_rejected():
    with pytest.raises(ConfigError):
        DomainSpec(1, (0,), (1,), origin=(2.0,))


@pytest.mark.parametrize("res", [(9, 17), (17, 33)])
def test_nested_grid_consistency(res):
    spec = DomainSpec(2, (-1, -1), (1, 1), "annulus", {"r_inner": 0.3, "r_outer": 0.9}, origin=(0.6, 0))
    coarse, fine = build_grid(spec, res[0]), build_grid(spec, res[1])
    assert np.array_equal(coarse.mask, fine.mask[::2, ::2])


def test_identity_coefficients():
    g = build_grid(DomainSpec(2, (0, 0), (1, 1), origin=(0.5, 0.5)), 17)
    f = sample_coefficients(CoefficientSpec(2, {"c11": "1", "c22": "1"}), g)
    assert np.array_equal(f.C, np.broadcast_to(np.eye(2), f.C.shape))
    assert not f.has_drift


def test_pointwise_evaluation():
    g = build_grid(DomainSpec(1, (0,), (1,), origin=(0.5,)), 11)
    f = sample_coefficients(CoefficientSpec(1, {"c11": "x^2"}), g)
    i = g.interior_index((0.5,))
    assert f.C[i, 0, 0] == pytest.approx(0.25)


def test_indefinite_matrix_rejected():
    g = build_grid(DomainSpec(2, (0, 0), (1, 1), origin=(0.5, 0.5)), 9)
    with pytest.raises(NotPositiveDefinite):
        sample_coefficients(CoefficientSpec(2, {"c11": "1", "c22": "-1"}), g)


def test_non_finite_rejected():
    g = build_grid(DomainSpec(1, (-1,), (1,), origin=(0.5,)), 9)
    with pytest.raises(NonFinite):
        sample_coefficients(CoefficientSpec(1, {"c11": "1/x"}), g)


def test_symmetry_from_upper_triangle():
    g = build_grid(DomainSpec(2, (0, 0), (1, 1), origin=(0.5, 0.5)), 9)
    f = sample_coefficients(CoefficientSpec(2, {"c11": "2", "c12": "0.5*x1", "c22": "2"}), g)
    assert np.array_equal(f.C, np.swapaxes(f.C, 1, 2))
    f.validate()


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 3.0), st.floats(-0.9, 0.9), st.floats(0.1, 3.0))
def test_validate_passes_for_pd_constants(a, rho, b):
    g = build_grid(DomainSpec(2, (0, 0), (1, 1), origin=(0.5, 0.5)), 7)
    off = rho * np.sqrt(a * b)
    f = sample_coefficients(CoefficientSpec(2, {"c11": repr(a), "c12": repr(float(off)), "c22": repr(b)}), g)
    f.validate()
    assert np.linalg.eigvalsh(f.C).min() > 0


def test_expression_grammar():
    f = compile_expression("x^2*(1-x)^2 + exp(-y) * max(x, 0.5)", 2)
    p = np.array([[0.5, 0.0], [0.25, 1.0]])
    expected = p[:, 0] ** 2 * (1 - p[:, 0]) ** 2 + np.exp(-p[:, 1]) * np.maximum(p[:, 0], 0.5)
    assert np.allclose(f(p), expected)


@pytest.mark.parametrize("bad", ["__import__('os')", "x.real", "x3", "lambda: 1", "open('f')"])
def test_expression_grammar_rejects(bad):
    with pytest.raises(ConfigError):
        compile_expression(bad, 2)


def test_mask_import(tmp_path):
    p = tmp_path / "m.txt"
    p.write_text("0110\n1111\n0110\n")
    m = load_mask(p, 2)
    assert m.shape == (3, 4) and m.sum() == 8


def test_config_round_trip():
    cfg = parse_config("""
[domain]
dim = 2
shape = disk
lower = -1 -1
upper = 1 1
radius = 0.8
origin = 0 0

[coefficients]
c11 = 1 + x1^2
c22 = 1

[grid]
resolutions = 17, 33x33

[analysis]
r_max = 0.5
""")
    assert cfg.resolutions == [17, (33, 33)]
    assert cfg.analysis["r_max"] == 0.5
    f = cfg.problem.discretize(17)
    assert f.grid.spec.shape == "disk"


@pytest.mark.parametrize("text", [
    "[domain]\ndim = 1\n",
    "[domain]\ndim = 1\n[coefficients]\nc99 = 1\n[grid]\nresolutions = 9\n",
    "[domain]\ndim = 1\n[coefficients]\nc11 = 1\n[grid]\nresolutions = nine\n",
    "[domain]\ndim = 1\n[coefficients]\nc11 = 1\n[grid]\nresolutions = 9\n[analysis]\nt = soon\n",
])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_problem_discretize_is_cached():
    p = make_problem(1, (0,), (1,), {"c11": "1"}, origin=(0.5,))
    assert p.discretize(21) is p.discretize(21)
