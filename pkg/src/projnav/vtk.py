"""Legacy-VTK ASCII output on a 4-subtriangle visualization mesh.

Each quadratic cell is split into four subtriangles through its midpoint
nodes, so quadratic point data lives at genuine mesh points.  The
corrected velocity is discontinuous across parent cells; its gradient part
and the combined field are therefore emitted as cell data sampled at the
subcell centroids.
"""

import numpy as np

from .fem import p2_reference_values

__all__ = ["write_vtk_fields"]

# subtriangles in local node numbering (vertices 0..2, midpoints 3+l
# opposite vertex l)
_SUBTRIANGLES = ((0, 5, 4), (5, 1, 3), (4, 3, 2), (3, 4, 5))


def _centroid_bary():
    out = []
    corners = np.array([(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0),
                        (0.0, 0.5, 0.5), (0.5, 0.0, 0.5), (0.5, 0.5, 0.0)])
    for tri in _SUBTRIANGLES:
        out.append(corners[list(tri)].mean(axis=0))
    return np.array(out)


def write_vtk_fields(path, space2, u_tilde=None, u=None, pressure=None,
                     title="projnav fields"):
    """Write point/cell data for the given discrete fields.

    u_tilde: quadratic vector field (point data "u_tilde").
    u: composite corrected velocity (point data for its quadratic part,
       cell data "grad_part" and "u_corrected").
    pressure: affine scalar field (point data, midpoints averaged).
    """
    mesh = space2.mesh
    points = space2.node_coordinates()
    ncell = mesh.n_cells
    gdof = space2.gdof

    lines = ["# vtk DataFile Version 2.0", title, "ASCII",
             "DATASET UNSTRUCTURED_GRID", f"POINTS {len(points)} double"]
    for x, y in points:
        lines.append(f"{x:.17g} {y:.17g} 0")
    nsub = 4 * ncell
    lines.append(f"CELLS {nsub} {4 * nsub}")
    for c in range(ncell):
        for tri in _SUBTRIANGLES:
            a, b, d = (gdof[c, k] for k in tri)
            lines.append(f"3 {a} {b} {d}")
    lines.append(f"CELL_TYPES {nsub}")
    lines.extend(["5"] * nsub)

    point_blocks = []
    if u_tilde is not None:
        point_blocks.append(("u_tilde", u_tilde.coeffs))
    if u is not None:
        point_blocks.append(("u_p2_part", u.p2_part.coeffs))
    if pressure is not None:
        vals = np.empty(space2.n_scalar)
        vals[:mesh.n_vertices] = pressure.coeffs
        vals[mesh.n_vertices:] = 0.5 * (pressure.coeffs[mesh.edges[:, 0]]
                                        + pressure.coeffs[mesh.edges[:, 1]])
        point_blocks.append(("pressure", vals))
    if point_blocks:
        lines.append(f"POINT_DATA {len(points)}")
        for name, data in point_blocks:
            if data.ndim == 2:
                lines.append(f"VECTORS {name} double")
                for vx, vy in data:
                    lines.append(f"{vx:.17g} {vy:.17g} 0")
            else:
                lines.append(f"SCALARS {name} double 1")
                lines.append("LOOKUP_TABLE default")
                for v in data:
                    lines.append(f"{v:.17g}")

    if u is not None:
        grads = u.grad_part_cell_gradients()
        bary = _centroid_bary()
        p2v = p2_reference_values(bary)            # (6, 4)
        local = u.p2_part.coeffs[gdof]             # (nc, 6, 2)
        centers = np.einsum("cax,as->csx", local, p2v)
        lines.append(f"CELL_DATA {nsub}")
        lines.append("VECTORS grad_part double")
        for c in range(ncell):
            gx, gy = -u.scale * grads[c]
            for _ in range(4):
                lines.append(f"{gx:.17g} {gy:.17g} 0")
        lines.append("VECTORS u_corrected double")
        for c in range(ncell):
            for s in range(4):
                vx = centers[c, s, 0] - u.scale * grads[c, 0]
                vy = centers[c, s, 1] - u.scale * grads[c, 1]
                lines.append(f"{vx:.17g} {vy:.17g} 0")

    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
