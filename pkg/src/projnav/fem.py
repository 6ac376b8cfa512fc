"""Taylor-Hood spaces on triangles and assembly of every form the scheme uses.

Velocity: continuous piecewise quadratics, vector valued, with scalar dofs
at vertices and edge midpoints (vertex dofs first, then edge dofs).
Pressure: continuous piecewise affines at vertices, with an optional zero
mean constraint enforced through the nodal integration weights.

All operators acting on a single velocity component (mass, stiffness,
convection) are assembled as scalar matrices and applied per component;
the pressure-gradient coupling stacks the two component blocks.
One degree-5 rule integrates every form of the time scheme exactly
(the worst integrand, wind times gradient times test function, has
degree 5).
"""

import numpy as np

from .quadrature import gauss_legendre_01, triangle_rule
from .sparse import CsrMatrix

__all__ = [
    "SpaceP1", "SpaceP2Vector",
    "FieldP1Scalar", "FieldP2Vector", "CompositeVelocity",
    "DEFAULT_RULE", "eval_basis",
    "assemble_mass_p2", "assemble_stiffness_p2", "assemble_convection",
    "assemble_convection_unsplit", "assemble_grad_coupling",
    "assemble_pressure_laplacian", "assemble_load",
    "l2_inner", "h1_seminorm", "composite_moment", "composite_moment_vector",
    "weak_div_moments", "div_moments",
    "p2_values_at", "p2_gradients_at", "p1_values_at", "composite_values_at",
]

DEFAULT_RULE = triangle_rule(5)


# ---------------------------------------------------------------------------
# reference bases

def p1_reference_values(bary):
    """P1 values at barycentric points: identity, shape (3, nq)."""
    return np.asarray(bary, dtype=float).T.copy()


def p2_reference_values(bary):
    """P2 nodal values at barycentric points, shape (6, nq).

    Local numbering: 0..2 vertices, 3+l midpoint of the edge opposite
    vertex l.
    """
    lam = np.asarray(bary, dtype=float).T  # (3, nq)
    out = np.empty((6, len(lam[0])))
    for i in range(3):
        out[i] = lam[i] * (2.0 * lam[i] - 1.0)
    pairs = ((1, 2), (0, 2), (0, 1))
    for l, (a, b) in enumerate(pairs):
        out[3 + l] = 4.0 * lam[a] * lam[b]
    return out


def p2_reference_dlambda(bary):
    """Derivatives of the P2 basis w.r.t. the barycentric coordinates, (6, nq, 3)."""
    lam = np.asarray(bary, dtype=float).T
    nq = lam.shape[1]
    out = np.zeros((6, nq, 3))
    for i in range(3):
        out[i, :, i] = 4.0 * lam[i] - 1.0
    pairs = ((1, 2), (0, 2), (0, 1))
    for l, (a, b) in enumerate(pairs):
        out[3 + l, :, a] = 4.0 * lam[b]
        out[3 + l, :, b] = 4.0 * lam[a]
    return out


def _cell_geometry(mesh):
    """Per-cell P1 hat gradients, cached on the mesh (immutable)."""
    cached = getattr(mesh, "_p1_grads", None)
    if cached is not None:
        return cached
    p0 = mesh.vertices[mesh.cells[:, 0]]
    p1 = mesh.vertices[mesh.cells[:, 1]]
    p2 = mesh.vertices[mesh.cells[:, 2]]
    det = 2.0 * mesh.cell_areas
    grads = np.empty((mesh.n_cells, 3, 2))
    # rows of the inverse Jacobian of x = p0 + [p1-p0, p2-p0] (xi, eta)
    grads[:, 1, 0] = (p2[:, 1] - p0[:, 1]) / det
    grads[:, 1, 1] = -(p2[:, 0] - p0[:, 0]) / det
    grads[:, 2, 0] = -(p1[:, 1] - p0[:, 1]) / det
    grads[:, 2, 1] = (p1[:, 0] - p0[:, 0]) / det
    grads[:, 0] = -grads[:, 1] - grads[:, 2]
    mesh._p1_grads = grads
    return grads


class _Tables:
    """Basis values/gradients of one mesh at the points of one rule."""

    def __init__(self, mesh, rule):
        self.rule = rule
        self.weights = rule.weights
        self.p1val = p1_reference_values(rule.points)           # (3, nq)
        self.p2val = p2_reference_values(rule.points)           # (6, nq)
        dlam = p2_reference_dlambda(rule.points)                # (6, nq, 3)
        gl = _cell_geometry(mesh)                               # (nc, 3, 2)
        self.p1grad = gl
        self.p2grad = np.einsum("aqi,cix->caqx", dlam, gl)      # (nc, 6, nq, 2)
        corners = mesh.vertices[mesh.cells]                     # (nc, 3, 2)
        self.points = rule.physical_points(corners)             # (nc, nq, 2)


def _tables(mesh, rule):
    cache = getattr(mesh, "_fem_tables", None)
    if cache is None:
        cache = {}
        mesh._fem_tables = cache
    key = (rule.degree, len(rule))
    if key not in cache:
        cache[key] = _Tables(mesh, rule)
    return cache[key]


# ---------------------------------------------------------------------------
# spaces and fields

class SpaceP1:
    """Continuous piecewise-affine scalars; one dof per vertex."""

    def __init__(self, mesh, zero_mean=False):
        self.mesh = mesh
        self.zero_mean = zero_mean
        self.ndof = mesh.n_vertices

    def mass_row_weights(self):
        """Integration weight of each nodal basis function, sum = |Omega|."""
        w = np.zeros(self.ndof)
        np.add.at(w, self.mesh.cells.ravel(),
                  np.repeat(self.mesh.cell_areas / 3.0, 3))
        return w

    def integral(self, coeffs):
        return float(self.mass_row_weights() @ np.asarray(coeffs, dtype=float))


class SpaceP2Vector:
    """Continuous piecewise-quadratic vectors; scalar dofs at vertices then
    edge midpoints, two components per scalar dof.

    A scalar dof is interior iff its node lies strictly inside the domain:
    vertex dofs at interior vertices, midpoint dofs on non-boundary edges.
    """

    ncomp = 2

    def __init__(self, mesh):
        self.mesh = mesh
        self.n_scalar = mesh.n_vertices + mesh.n_edges
        mask = np.zeros(self.n_scalar, dtype=bool)
        mask[: mesh.n_vertices][mesh.interior_vertices] = True
        mask[mesh.n_vertices:][~mesh.is_boundary_edge] = True
        self.interior_mask = mask
        self.interior_dofs = np.where(mask)[0]
        # local-to-global scalar dof map per cell, (nc, 6)
        self.gdof = np.hstack([mesh.cells, mesh.n_vertices + mesh.cell_edges])

    def node_coordinates(self):
        return np.vstack([self.mesh.vertices, self.mesh.edge_midpoints()])


class FieldP1Scalar:
    def __init__(self, space, coeffs=None):
        self.space = space
        if coeffs is None:
            coeffs = np.zeros(space.ndof)
        self.coeffs = np.asarray(coeffs, dtype=float)
        if self.coeffs.shape != (space.ndof,):
            raise ValueError("P1 coefficient vector has wrong length")


class FieldP2Vector:
    def __init__(self, space, coeffs=None):
        self.space = space
        if coeffs is None:
            coeffs = np.zeros((space.n_scalar, 2))
        self.coeffs = np.asarray(coeffs, dtype=float)
        if self.coeffs.shape != (space.n_scalar, 2):
            raise ValueError("P2 coefficient array must be (n_scalar, 2)")

    def flat(self):
        """Component-blocked vector [all x; all y]."""
        return np.concatenate([self.coeffs[:, 0], self.coeffs[:, 1]])

    @classmethod
    def from_flat(cls, space, vec):
        vec = np.asarray(vec, dtype=float)
        n = space.n_scalar
        return cls(space, np.column_stack([vec[:n], vec[n:]]))

    def in_velocity_space(self, tol=0.0):
        """True if all non-interior dofs vanish (membership in H^1_0 x P2)."""
        outside = self.coeffs[~self.space.interior_mask]
        return bool(np.all(np.abs(outside) <= tol))


class CompositeVelocity:
    """u = p2_part - scale * grad(grad_part); the corrected velocity.

    The gradient part is a piecewise-constant vector per cell, so u is
    discontinuous and is never collapsed onto a nodal field; every use goes
    through moments or cellwise sampling.
    """

    def __init__(self, p2_part, grad_part, scale):
        if p2_part.space.mesh is not grad_part.space.mesh:
            raise ValueError("composite parts must share a mesh")
        self.p2_part = p2_part
        self.grad_part = grad_part
        self.scale = float(scale)

    def grad_part_cell_gradients(self):
        """(nc, 2) gradient of the P1 increment on each cell."""
        gl = _cell_geometry(self.p2_part.space.mesh)
        q = self.grad_part.coeffs[self.p2_part.space.mesh.cells]  # (nc, 3)
        return np.einsum("ci,cix->cx", q, gl)


# ---------------------------------------------------------------------------
# pointwise evaluation

def eval_basis(space, cell, bary):
    """Values and physical gradients of the local basis at one barycentric point.

    P1 spaces return 3 values and gradients, P2 spaces 6.
    """
    bary = np.asarray(bary, dtype=float).reshape(1, 3)
    if np.any(bary < -1e-12) or abs(bary.sum() - 1.0) > 1e-12:
        raise ValueError("barycentric point outside the reference triangle")
    gl = _cell_geometry(space.mesh)[cell]
    if isinstance(space, SpaceP1):
        vals = p1_reference_values(bary)[:, 0]
        return vals, gl.copy()
    vals = p2_reference_values(bary)[:, 0]
    dlam = p2_reference_dlambda(bary)[:, 0, :]
    return vals, dlam @ gl


def p2_values_at(field, rule=DEFAULT_RULE):
    """(nc, nq, 2) values of a P2 vector field at the rule points of each cell."""
    t = _tables(field.space.mesh, rule)
    local = field.coeffs[field.space.gdof]          # (nc, 6, 2)
    return np.einsum("cax,aq->cqx", local, t.p2val)


def p2_gradients_at(field, rule=DEFAULT_RULE):
    """(nc, nq, 2, 2) gradients d u_x / d x_j at the rule points."""
    t = _tables(field.space.mesh, rule)
    local = field.coeffs[field.space.gdof]
    return np.einsum("cax,caqj->cqxj", local, t.p2grad)


def p1_values_at(field, rule=DEFAULT_RULE):
    mesh = field.space.mesh
    t = _tables(mesh, rule)
    local = field.coeffs[mesh.cells]                # (nc, 3)
    return np.einsum("ca,aq->cq", local, t.p1val)


def composite_values_at(u, rule=DEFAULT_RULE):
    """(nc, nq, 2) cellwise values of the corrected velocity."""
    vals = p2_values_at(u.p2_part, rule)
    g = u.grad_part_cell_gradients()                # (nc, 2)
    return vals - u.scale * g[:, None, :]


# ---------------------------------------------------------------------------
# assembly

def _scatter_square(gdof, elem, ndof):
    nc, nl, _ = elem.shape
    rows = np.repeat(gdof, nl, axis=1).ravel()
    cols = np.tile(gdof, (1, nl)).ravel()
    return CsrMatrix.from_coo(rows, cols, elem.reshape(-1), (ndof, ndof))


def assemble_mass_p2(space, rule=DEFAULT_RULE):
    """Scalar P2 mass matrix (applied identically to each component)."""
    mesh = space.mesh
    t = _tables(mesh, rule)
    mref = np.einsum("q,aq,bq->ab", t.weights, t.p2val, t.p2val)
    mref = 0.5 * (mref + mref.T)
    elem = mesh.cell_areas[:, None, None] * mref[None, :, :]
    return _scatter_square(space.gdof, elem, space.n_scalar)


def assemble_stiffness_p2(space, rule=DEFAULT_RULE):
    """Scalar P2 stiffness matrix (grad-grad)."""
    mesh = space.mesh
    t = _tables(mesh, rule)
    elem = np.einsum("q,caqx,cbqx->cab", t.weights, t.p2grad, t.p2grad)
    elem = 0.5 * (elem + elem.transpose(0, 2, 1))
    elem *= mesh.cell_areas[:, None, None]
    return _scatter_square(space.gdof, elem, space.n_scalar)


def _convection_oneside(space, wind, rule):
    """B[i, j] = integral (wind . grad phi_j) phi_i, as element blocks."""
    mesh = space.mesh
    t = _tables(mesh, rule)
    wq = np.einsum("cax,aq->cqx", wind.coeffs[space.gdof], t.p2val)
    elem = np.einsum("q,cqx,cbqx,aq->cab", t.weights, wq, t.p2grad, t.p2val)
    elem *= mesh.cell_areas[:, None, None]
    return elem


def assemble_convection(space, wind, rule=DEFAULT_RULE):
    """Skew-symmetric convection matrix for a given P2 wind.

    Assembles B[i,j] = ((wind . grad) phi_j, phi_i) and returns
    (B - B^T)/2.  The split happens after B is summed into CSR form, so
    C[i,j] = -C[j,i] holds bitwise and v^T C v vanishes to rounding for
    every v.
    """
    elem = _convection_oneside(space, wind, rule)
    b = _scatter_square(space.gdof, elem, space.n_scalar)
    half = 0.5 * b.data
    return CsrMatrix.from_coo(
        np.concatenate([b._rows, b.indices]),
        np.concatenate([b.indices, b._rows]),
        np.concatenate([half, -half]), (space.n_scalar, space.n_scalar))


def assemble_convection_unsplit(space, wind, divwind_rhs=True, rule=DEFAULT_RULE):
    """The right-hand form of the convection identity:
    ((wind . grad) phi_j, phi_i) + (1/2) (div wind phi_j, phi_i).

    Used only to cross-check the half-difference form against the identity
    it satisfies for exact integration.
    """
    mesh = space.mesh
    t = _tables(mesh, rule)
    elem = _convection_oneside(space, wind, rule)
    if divwind_rhs:
        divw = np.einsum("cax,caqx->cq", wind.coeffs[space.gdof], t.p2grad)
        elem2 = np.einsum("q,cq,bq,aq->cab", t.weights, divw, t.p2val, t.p2val)
        elem = elem + 0.5 * elem2 * mesh.cell_areas[:, None, None]
    return _scatter_square(space.gdof, elem, space.n_scalar)


def assemble_grad_coupling(space2, space1, rule=DEFAULT_RULE):
    """G with (G q) . v_flat = (grad q, v) for all P1 q and P2 vector v.

    Shape (2 * n_scalar, n_vertices); rows are component blocked.
    G^T v_flat returns the weak-divergence moments ((v, grad phi_k))_k.
    """
    mesh = space2.mesh
    t = _tables(mesh, rule)
    ints = np.einsum("q,aq->a", t.weights, t.p2val)           # reference integrals
    # elem[c, a, i, x] = |K| * int_ref(phi_a) * d lambda_i / d x
    elem = np.einsum("c,a,cix->caix", mesh.cell_areas, ints, t.p1grad)
    n2 = space2.n_scalar
    gdof = space2.gdof
    rows = []
    cols = []
    vals = []
    for x in range(2):
        rows.append((gdof[:, :, None] + x * n2).repeat(3, axis=2).ravel())
        cols.append(np.broadcast_to(mesh.cells[:, None, :],
                                    gdof.shape + (3,)).ravel())
        vals.append(elem[:, :, :, x].ravel())
    return CsrMatrix.from_coo(np.concatenate(rows), np.concatenate(cols),
                              np.concatenate(vals), (2 * n2, space1.ndof))


def assemble_pressure_laplacian(space1, rule=DEFAULT_RULE):
    """P1 grad-grad matrix; symmetric positive semidefinite, kernel = constants."""
    mesh = space1.mesh
    gl = _cell_geometry(mesh)
    elem = np.einsum("c,cix,cjx->cij", mesh.cell_areas, gl, gl)
    elem = 0.5 * (elem + elem.transpose(0, 2, 1))
    return _scatter_square(mesh.cells, elem, space1.ndof)


def assemble_load(space2, f, t_a, t_b, rule=DEFAULT_RULE, time_points=3):
    """Moments of the time average of f over [t_a, t_b] against the P2 basis.

    f(points, t) maps (m, 2) coordinates and a time to (m, 2) values; the
    time average uses a Gauss rule (default 3 points, exact through t^5),
    the space integral the global triangle rule.  Returns the component
    blocked vector of length 2 * n_scalar.
    """
    if not t_a < t_b:
        raise ValueError("need t_a < t_b")
    mesh = space2.mesh
    t = _tables(mesh, rule)
    pts = t.points.reshape(-1, 2)
    tg, wg = gauss_legendre_01(time_points)
    favg = np.zeros((len(pts), 2))
    for g in range(time_points):
        favg += wg[g] * np.asarray(f(pts, t_a + (t_b - t_a) * tg[g]), dtype=float)
    favg = favg.reshape(mesh.n_cells, len(rule), 2)
    cellvec = np.einsum("c,q,cqx,aq->cax", mesh.cell_areas, t.weights, favg, t.p2val)
    out = np.zeros((space2.n_scalar, 2))
    np.add.at(out, space2.gdof.ravel(), cellvec.reshape(-1, 2))
    return np.concatenate([out[:, 0], out[:, 1]])


# ---------------------------------------------------------------------------
# products, norms, moments

def _require_same_mesh(a, b):
    if a.space.mesh is not b.space.mesh:
        raise ValueError("fields live on different meshes")


def l2_inner(field_a, field_b, rule=DEFAULT_RULE):
    """L2 inner product of two P2 vector fields or two P1 scalar fields."""
    _require_same_mesh(field_a, field_b)
    mesh = field_a.space.mesh
    t = _tables(mesh, rule)
    if isinstance(field_a, FieldP2Vector):
        va = p2_values_at(field_a, rule)
        vb = p2_values_at(field_b, rule)
        cell = np.einsum("q,cqx,cqx->c", t.weights, va, vb)
    else:
        va = p1_values_at(field_a, rule=rule)
        vb = p1_values_at(field_b, rule=rule)
        cell = np.einsum("q,cq,cq->c", t.weights, va, vb)
    return float(cell @ mesh.cell_areas)


def h1_seminorm(field, rule=DEFAULT_RULE):
    """L2 norm of the gradient of a P2 vector field."""
    g = p2_gradients_at(field, rule)
    t = _tables(field.space.mesh, rule)
    cell = np.einsum("q,cqxj,cqxj->c", t.weights, g, g)
    return float(np.sqrt(cell @ field.space.mesh.cell_areas))


def composite_l2_norm_sq(u, mass=None, grad=None, lap=None):
    """Exact squared L2 norm of a corrected velocity.

    |p2|^2 - 2 s (p2, grad g) + s^2 (grad g, grad g); all three terms are
    quadrature-exact.  Preassembled operators may be passed to skip work.
    """
    space2 = u.p2_part.space
    space1 = u.grad_part.space
    if mass is None:
        mass = assemble_mass_p2(space2)
    if grad is None:
        grad = assemble_grad_coupling(space2, space1)
    if lap is None:
        lap = assemble_pressure_laplacian(space1)
    c = u.p2_part.coeffs
    p2sq = c[:, 0] @ mass.matvec(c[:, 0]) + c[:, 1] @ mass.matvec(c[:, 1])
    cross = u.p2_part.flat() @ grad.matvec(u.grad_part.coeffs)
    gsq = u.grad_part.coeffs @ lap.matvec(u.grad_part.coeffs)
    return p2sq - 2.0 * u.scale * cross + u.scale ** 2 * gsq


def composite_moment(u, v, mass=None, grad=None):
    """(u, v) for a corrected velocity u and a P2 vector field v."""
    _require_same_mesh(u.p2_part, v)
    vec = composite_moment_vector(u, mass=mass, grad=grad)
    return float(vec @ v.flat())


def composite_moment_vector(u, mass=None, grad=None):
    """Vector of (u, phi_i e_x), (u, phi_i e_y), component blocked."""
    space2 = u.p2_part.space
    if mass is None:
        mass = assemble_mass_p2(space2)
    if grad is None:
        grad = assemble_grad_coupling(space2, u.grad_part.space)
    c = u.p2_part.coeffs
    out = np.concatenate([mass.matvec(c[:, 0]), mass.matvec(c[:, 1])])
    return out - u.scale * grad.matvec(u.grad_part.coeffs)


def weak_div_moments(u, space1, grad=None, lap=None):
    """((u, grad phi_k))_k over all P1 nodal functions.

    Zero for every member of the discrete weakly divergence free space.
    """
    space2 = u.p2_part.space if isinstance(u, CompositeVelocity) else u.space
    if space2.mesh is not space1.mesh:
        raise ValueError("fields live on different meshes")
    if grad is None:
        grad = assemble_grad_coupling(space2, space1)
    if isinstance(u, CompositeVelocity):
        if lap is None:
            lap = assemble_pressure_laplacian(space1)
        return grad.rmatvec(u.p2_part.flat()) - u.scale * lap.matvec(u.grad_part.coeffs)
    return grad.rmatvec(u.flat())


def div_moments(field, space1, rule=DEFAULT_RULE):
    """((div u, phi_k))_k for a P2 vector field; quadrature exact.

    Differs from ``weak_div_moments`` by the boundary flux when the field
    does not vanish on the boundary.
    """
    mesh = field.space.mesh
    t = _tables(mesh, rule)
    divu = np.einsum("cax,caqx->cq", field.coeffs[field.space.gdof], t.p2grad)
    cell = np.einsum("c,q,cq,aq->ca", mesh.cell_areas, t.weights, divu, t.p1val)
    out = np.zeros(space1.ndof)
    np.add.at(out, mesh.cells.ravel(), cell.ravel())
    return out
