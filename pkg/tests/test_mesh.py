import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tmlab.errors import (MeshError, NonManifoldError, NonTriangularFaceError, OFFParseError,
                          OpenSurfaceError, OrientationError, ResourceGuardError,
                          TriangleInequalityError)
from tmlab.mesh import (TriangleMesh, apply_conformal_factor, gen_flat_torus, gen_icosphere,
                        geodesic_distances, load_off, save_off)

from conftest import GENUS2, genus2, icosphere


def counts(m):
    return m.vertex_count, m.edge_count, m.face_count, m.euler_characteristic


def test_icosahedron_counts():
    assert counts(gen_icosphere(0, 1.0)) == (12, 30, 20, 2)


def test_first_subdivision_counts():
    assert counts(gen_icosphere(1, 1.0)) == (42, 120, 80, 2)


@pytest.mark.parametrize("k", [0, 1, 2])
def test_radius_scales_lengths_only(k):
    a, b = gen_icosphere(k, 1.0), gen_icosphere(k, 2.0)
    assert np.array_equal(a.faces, b.faces)
    np.testing.assert_allclose(b.edge_lengths, 2.0 * a.edge_lengths, rtol=1e-15)


def test_icosphere_lengths_are_chords():
    m = gen_icosphere(2, 3.0)
    np.testing.assert_allclose(np.linalg.norm(m.positions, axis=1), 3.0, rtol=1e-15)
    i, j = m.edges.T
    np.testing.assert_allclose(m.edge_lengths, np.linalg.norm(m.positions[i] - m.positions[j], axis=1),
                               rtol=1e-15)


def test_icosphere_resource_guard():
    with pytest.raises(ResourceGuardError):
        gen_icosphere(9)


def test_small_torus_counts():
    assert counts(gen_flat_torus(3, 3, 1.0, 1.0)) == (9, 27, 18, 0)


def test_torus_area():
    assert gen_flat_torus(8, 8, 1.0, 1.0).total_area() == pytest.approx(1.0, rel=1e-14)


def test_torus_has_no_embedding():
    m = gen_flat_torus(4, 5, 2.0, 3.0)
    assert m.positions is None
    assert m.genus == 1
    assert m.total_area() == pytest.approx(6.0, rel=1e-14)


def test_torus_size_guard():
    with pytest.raises(ValueError):
        gen_flat_torus(2, 5)


def test_genus2_import():
    m, _ = genus2()
    assert m.euler_characteristic == -2
    assert m.genus == 2


# -- conformal rescaling ---------------------------------------------------

def test_zero_factor_is_identity():
    m, _ = icosphere(2)
    out = apply_conformal_factor(m, np.zeros(m.vertex_count))
    assert np.array_equal(out.edge_lengths, m.edge_lengths)
    assert np.array_equal(out.faces, m.faces)


def test_constant_factor_scales_lengths():
    m, _ = icosphere(2)
    c = 0.3
    out = apply_conformal_factor(m, np.full(m.vertex_count, 2 * c))
    np.testing.assert_allclose(out.edge_lengths, math.exp(c) * m.edge_lengths, rtol=1e-14)


def test_conformal_area_matches_weighted_mass():
    # e^{u} M against the rescaled mesh's true area, on refining meshes
    from tmlab.liouville import conformal_volume

    errs = []
    for k in (2, 3, 4):
        m, ops = icosphere(k)
        u = 0.3 * m.positions[:, 0] + 0.2 * m.positions[:, 1] * m.positions[:, 2]
        true = apply_conformal_factor(m, u).total_area()
        errs.append(abs(true - conformal_volume(ops, u)) / true)
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-3


def test_conformal_violation_reports_face():
    m = gen_icosphere(1)
    # raising both ends of one edge stretches it by e^{t/2} against e^{t/4}
    a, b = m.edges[0]
    u = np.zeros(m.vertex_count)
    u[[a, b]] = 4.0
    with pytest.raises(TriangleInequalityError) as exc:
        apply_conformal_factor(m, u)
    assert exc.value.face is not None
    assert {a, b} <= set(m.faces[exc.value.face])


def test_nonfinite_factor_rejected():
    m = gen_icosphere(0)
    u = np.zeros(12)
    u[3] = np.nan
    with pytest.raises(ValueError):
        apply_conformal_factor(m, u)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 0.5))
def test_conformal_round_trip(seed, scale):
    m, _ = icosphere(2)
    u = scale * np.random.default_rng(seed).standard_normal(m.vertex_count)
    back = apply_conformal_factor(apply_conformal_factor(m, u), -u)
    np.testing.assert_allclose(back.edge_lengths, m.edge_lengths, rtol=1e-12)


# -- OFF -------------------------------------------------------------------

def test_off_round_trip(tmp_path):
    m = gen_icosphere(1)
    p = tmp_path / "ico.off"
    save_off(m, p)
    back = load_off(p)
    assert np.array_equal(back.faces, m.faces)
    assert np.array_equal(back.positions, m.positions)
    assert np.array_equal(back.edge_lengths, m.edge_lengths)


def test_off_header_layout(tmp_path):
    p = tmp_path / "t.off"
    save_off(gen_icosphere(0), p)
    lines = p.read_text().splitlines()
    assert lines[0] == "OFF"
    assert lines[1].split() == ["12", "20", "30"]
    assert lines[-1].split()[0] == "3"


def _write(tmp_path, text, name="m.off"):
    p = tmp_path / name
    p.write_text(text)
    return p


TETRA = """OFF
4 4 6
0 0 0
1 0 0
0 1 0
0 0 1
3 0 2 1
3 0 1 3
3 0 3 2
3 1 2 3
"""


def test_tetrahedron_chi(tmp_path):
    m = load_off(_write(tmp_path, TETRA))
    assert m.euler_characteristic == 2


def test_off_comments_and_inline_counts(tmp_path):
    text = "# a tetrahedron\nOFF 4 4 6\n" + TETRA.split("\n", 2)[2]
    assert load_off(_write(tmp_path, text)).face_count == 4


def test_boundary_edge_rejected(tmp_path):
    text = TETRA.rsplit("3 1 2 3", 1)[0].replace("4 4 6", "4 3 6")
    with pytest.raises(OpenSurfaceError):
        load_off(_write(tmp_path, text))


def test_non_triangular_face(tmp_path):
    text = TETRA.replace("3 1 2 3", "4 1 2 3 0")
    with pytest.raises(NonTriangularFaceError):
        load_off(_write(tmp_path, text))


@pytest.mark.parametrize("text", ["", "PLY\n", "OFF\nx y z\n", "OFF\n4 4 6\n0 0 0\n"])
def test_parse_errors(tmp_path, text):
    with pytest.raises(OFFParseError):
        load_off(_write(tmp_path, text))


def test_error_types_are_distinct():
    assert not issubclass(OFFParseError, NonManifoldError)
    assert not issubclass(NonTriangularFaceError, OFFParseError)
    assert issubclass(NonManifoldError, MeshError)


def test_non_manifold_edge():
    # two tetrahedra sharing the edge (0, 1) through a third face pair
    faces = [(0, 2, 1), (0, 1, 3), (0, 3, 2), (1, 2, 3),
             (0, 1, 4), (0, 4, 5), (1, 5, 4), (0, 5, 1)]
    pos = np.random.default_rng(0).standard_normal((6, 3))
    with pytest.raises(NonManifoldError):
        TriangleMesh.build(np.array(faces), positions=pos)


def test_pinched_vertex():
    # two tetrahedra glued at vertex 0 only
    faces = [(0, 2, 1), (0, 1, 3), (0, 3, 2), (1, 2, 3),
             (0, 5, 4), (0, 4, 6), (0, 6, 5), (4, 5, 6)]
    pos = np.random.default_rng(0).standard_normal((7, 3))
    with pytest.raises(NonManifoldError):
        TriangleMesh.build(np.array(faces), positions=pos)


def test_inconsistent_orientation():
    faces = [(0, 1, 2), (0, 1, 3), (0, 3, 2), (1, 2, 3)]
    pos = np.eye(4, 3)
    with pytest.raises(OrientationError):
        TriangleMesh.build(np.array(faces), positions=pos)


def test_triangle_inequality_on_lengths():
    m = gen_icosphere(0)
    lengths = m.edge_lengths.copy()
    lengths[0] = 10.0
    with pytest.raises(TriangleInequalityError):
        TriangleMesh.build(m.faces, lengths=lengths)


@pytest.mark.parametrize("mesh_fn, genus", [
    (lambda: gen_icosphere(3), 0),
    (lambda: gen_flat_torus(7, 5, 1.0, 2.0), 1),
    (lambda: genus2()[0], 2),
])
def test_euler_characteristic_matches_genus(mesh_fn, genus):
    m = mesh_fn()
    assert m.euler_characteristic % 2 == 0
    assert m.euler_characteristic == 2 - 2 * genus


# -- geodesic distance -----------------------------------------------------

def test_geodesic_distance_on_sphere():
    m, _ = icosphere(4)
    r = geodesic_distances(m, 0)
    exact = np.arccos(np.clip(m.positions @ m.positions[0], -1, 1))
    near = exact < 0.5
    assert np.max(np.abs(r[near] - exact[near]) / np.maximum(exact[near], 1e-12)) < 0.03
    assert r[0] == 0.0


def test_refinement_never_exceeds_dijkstra():
    m, _ = icosphere(3)
    raw = geodesic_distances(m, 5, refine=False)
    ref = geodesic_distances(m, 5)
    assert np.all(ref <= raw + 1e-15)


def test_flat_torus_distances_are_euclidean_nearby():
    m = gen_flat_torus(32, 32, 1.0, 1.0)
    r = geodesic_distances(m, 0)
    idx = np.arange(m.vertex_count)
    i, j = idx // 32, idx % 32
    dx = np.minimum(i, 32 - i) / 32
    dy = np.minimum(j, 32 - j) / 32
    exact = np.hypot(dx, dy)
    near = (exact > 0) & (exact < 0.2)
    assert np.max(np.abs(r[near] - exact[near]) / exact[near]) < 0.03


def test_genus2_file_is_current():
    from data.make_genus2 import slab_with_holes  # noqa: F401

    m, _ = genus2()
    fresh = slab_with_holes()
    assert np.array_equal(fresh.faces, m.faces)
    assert open(GENUS2).read().startswith("OFF")
