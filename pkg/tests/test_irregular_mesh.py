"""The discrete identities do not depend on mesh structure: re-run the
edge-bubble lemma, divergence preservation, and the energy audit on an
irregular triangulation (structured mesh with deterministically perturbed
interior vertices)."""

import numpy as np
import pytest

from projnav import mms
from projnav.fem import (FieldP2Vector, SpaceP1, SpaceP2Vector, div_moments,
                         weak_div_moments)
from projnav.interp import divergence_correct, edge_bubble
from projnav.mesh import build_from_arrays, build_structured_unit_square
from projnav.scheme import SchemeConfig, SchemeOperators, run


@pytest.fixture(scope="module")
def irregular_mesh():
    base = build_structured_unit_square(4)
    rng = np.random.default_rng(2024)
    verts = base.vertices.copy()
    interior = base.interior_vertices
    # offsets below a quarter cell keep every triangle positively oriented
    verts[interior] += (rng.uniform(-1.0, 1.0, size=(len(interior), 2))
                        * 0.25 / 4.0)
    return build_from_arrays(verts, base.cells)


def test_invariants_hold(irregular_mesh):
    mesh = irregular_mesh
    assert mesh.n_vertices - mesh.n_edges + mesh.n_cells == 1
    assert abs(mesh.cell_areas.sum() - 1.0) <= 1e-12
    assert np.all(mesh.cell_areas > 0.0)
    assert np.all(mesh.cell_diameters >= mesh.cell_inball)
    for e in range(mesh.n_edges):
        expected = mesh.cell_areas[mesh.edge_cells[e]].sum()
        assert abs(mesh.edge_patch_area[e] - expected) <= 1e-15


def test_bubble_moments_on_irregular_mesh(irregular_mesh):
    s2 = SpaceP2Vector(irregular_mesh)
    s1 = SpaceP1(irregular_mesh)
    for e in range(irregular_mesh.n_edges):
        i, j = irregular_mesh.edges[e]
        moments = div_moments(edge_bubble(s2, (i, j)), s1)
        expected = np.zeros(s1.ndof)
        expected[i] = 1.0
        expected[j] = -1.0
        assert np.abs(moments - expected).max() <= 1e-12


def test_divergence_preservation_on_irregular_mesh(irregular_mesh, rng):
    s2 = SpaceP2Vector(irregular_mesh)
    s1 = SpaceP1(irregular_mesh)
    for _ in range(20):
        field = FieldP2Vector(s2)
        field.coeffs[s2.interior_dofs] = rng.standard_normal(
            (len(s2.interior_dofs), 2))
        out = divergence_correct(field, s2)
        gap = div_moments(out, s1) - div_moments(field, s1)
        assert np.abs(gap).max() <= 1e-11


def test_scheme_audits_on_irregular_mesh(irregular_mesh):
    s2 = SpaceP2Vector(irregular_mesh)
    s1 = SpaceP1(irregular_mesh, zero_mean=True)
    ops = SchemeOperators(s2, s1)
    config = SchemeConfig(n_steps=5, t_final=1.0, store_fields=True)
    result = run(s2, s1, mms.initial_velocity, mms.forcing, config, ops=ops)
    assert max(d.energy_residual for d in result.diagnostics) <= 1e-8
    for u in result.u_history:
        moments = weak_div_moments(u, s1, grad=ops.grad, lap=ops.lap)
        assert np.abs(moments).max() <= 1e-10
