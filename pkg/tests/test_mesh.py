import numpy as np
import pytest

from fembem_uq.geometry import Circle
from fembem_uq.mesh import (
    build_coarse_disk_mesh,
    build_curve_mesh,
    build_gamma_mesh,
    build_sigma_mesh,
    disk_mesh,
    dof_counts,
    refine,
)

TABLE = {1: (37, 32), 2: (129, 64), 3: (481, 128), 4: (1857, 256), 5: (7297, 512),
         6: (28929, 1024), 7: (115201, 2048), 8: (459777, 4096)}


def test_coarse_mesh():
    m = build_coarse_disk_mesh()
    assert m.n_triangles == 14
    assert m.n_vertices == 12
    assert len(m.edges()) == 25
    assert m.boundary_loop.size == 8
    assert np.allclose(np.hypot(*m.vertices[m.boundary_loop].T), 0.2, atol=1e-14)


@pytest.mark.parametrize("level", [0, 1, 2, 3])
def test_mesh_is_conforming(level):
    m = disk_mesh(level)
    mult = np.array(list(m.edge_multiplicity().values()))
    assert set(mult) <= {1, 2}
    assert np.sum(mult == 1) == 8 * 2**level
    # positive orientation of the straight-sided simplices
    p = m.vertices[m.triangles]
    a, b = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    area = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    assert np.all(area > 0)


def test_refinement_counts():
    m1 = refine(build_coarse_disk_mesh())
    assert (m1.n_triangles, m1.n_vertices) == (56, 37)
    assert refine(m1).n_vertices == 129
    assert disk_mesh(4).n_vertices == 1857


def test_refined_boundary_vertices_on_circle():
    m = disk_mesh(3)
    r = np.hypot(*m.vertices[m.boundary_loop].T)
    assert np.max(np.abs(r - 0.2)) < 1e-14
    assert np.all(np.diff(m.boundary_angles) > 0)


@pytest.mark.parametrize("level", sorted(TABLE))
def test_dof_counts_table(level):
    assert dof_counts(level) == TABLE[level]


@pytest.mark.parametrize("level", [1, 2, 3, 4])
def test_dof_counts_agree_with_meshes(level):
    fe, be = dof_counts(level)
    assert fe == disk_mesh(level).n_vertices
    assert be == 2 * build_sigma_mesh(disk_mesh(level)).n_panels


def test_sigma_panels():
    assert build_sigma_mesh(disk_mesh(1)).n_panels == 16
    s = build_sigma_mesh(disk_mesh(0))
    assert s.n_panels == 8
    assert s.breakpoints[-1] - s.breakpoints[0] == pytest.approx(2 * np.pi)
    assert np.all(s.widths > 0)


def test_gamma_mesh(zero_sample):
    g = build_gamma_mesh(zero_sample, 3)
    assert g.n_panels == 64
    assert g.n_panels + build_sigma_mesh(disk_mesh(3)).n_panels == 128
    g0 = build_gamma_mesh(zero_sample, 0)
    assert g0.n_panels == 8
    assert np.allclose(g0.vertex_points()[0], [0.6, 0.0], atol=1e-15)


def test_normals_orientation(zero_sample):
    s = build_sigma_mesh(disk_mesh(1))
    _, _, pts, nrm, _ = s.nodes(4)
    assert np.all(np.sum(pts * nrm, axis=-1) > 0)
    g = build_gamma_mesh(zero_sample, 1)
    _, _, pts, nrm, _ = g.nodes(4)
    assert np.all(np.sum(pts * nrm, axis=-1) < 0)


def test_panel_lengths_sum_to_circumference():
    c = build_curve_mesh(Circle(0.5), 2)
    assert np.sum(c.panel_lengths()) == pytest.approx(np.pi, rel=1e-14)


def test_dump_format(tmp_path):
    m = disk_mesh(0)
    path = tmp_path / "mesh.txt"
    m.dump(path)
    lines = path.read_text().splitlines()
    assert sum(l.startswith("v ") for l in lines) == 12
    assert sum(l.startswith("t ") for l in lines) == 14
    assert sum(l.startswith("t ") and len(l.split()) == 5 for l in lines) == 8
