"""2D polygonal meshes: generation, validation, serialization, quality.

A :class:`PolyMesh` stores polygonal elements as counter-clockwise vertex
loops together with derived face connectivity, per-element geometry and a
centroid-fan sub-triangulation used for quadrature.  Meshes are immutable
after construction and safe to share between assembly passes.

Generators:

- :func:`generate_voronoi` -- Lloyd-relaxed Voronoi tessellation of a
  rectangle, clipped exactly by mirroring the generators across the sides.
- :func:`generate_cartesian` -- structured quadrilateral grid (used for
  raster-backed heterogeneous runs), represented as a degenerate polygonal
  mesh.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial import Voronoi, cKDTree

from .errors import MeshFormatError, MeshTopologyError

_MERGE_TOL = 1e-10   # relative vertex-merge radius in the Voronoi cleanup
_SNAP_TOL = 1e-9     # relative snap distance onto rectangle sides

#: Boundary tags assigned to the four sides of a generated rectangle mesh.
RECT_SIDE_TAGS = ("left", "right", "bottom", "top")


@dataclass(frozen=True)
class InteriorFaces:
    """Interior face arrays; ``normal`` points from ``elem_plus`` to ``elem_minus``."""

    elem_plus: np.ndarray    # (nf,) int
    elem_minus: np.ndarray   # (nf,) int
    local_plus: np.ndarray   # (nf,) edge index within elem_plus
    local_minus: np.ndarray  # (nf,) edge index within elem_minus
    vertex_a: np.ndarray     # (nf,) int, endpoints ordered as in elem_plus
    vertex_b: np.ndarray     # (nf,) int
    normal: np.ndarray       # (nf, 2) unit, outward from elem_plus
    length: np.ndarray       # (nf,)

    def __len__(self):
        return len(self.elem_plus)


@dataclass(frozen=True)
class BoundaryFaces:
    """Boundary face arrays; ``normal`` is the outward unit normal."""

    elem: np.ndarray        # (nf,) int
    local_edge: np.ndarray  # (nf,) edge index within elem
    vertex_a: np.ndarray    # (nf,) int
    vertex_b: np.ndarray    # (nf,) int
    normal: np.ndarray      # (nf, 2)
    length: np.ndarray      # (nf,)
    tag: tuple              # (nf,) str

    def __len__(self):
        return len(self.elem)


@dataclass(frozen=True)
class MeshQualityReport:
    """Shape/contact regularity ratios of a mesh (all strictly positive)."""

    min_area_over_h2: float
    max_area_over_h2: float
    min_face_over_h: float
    n_elements: int
    n_faces: int


class PolyMesh:
    """Immutable 2D polygonal mesh with face connectivity.

    Parameters
    ----------
    vertices : (nv, 2) array
        Vertex coordinates in meters.
    elements : sequence of int sequences
        Counter-clockwise vertex loops, one per element.
    boundary_tags : dict, optional
        Maps ``(element, local_edge)`` to a tag string; untagged boundary
        faces get tag ``"boundary"``.
    """

    def __init__(self, vertices, elements, boundary_tags=None):
        self.vertices = np.asarray(vertices, dtype=float)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise MeshTopologyError("vertices must be an (nv, 2) array")
        self.elements = [np.asarray(e, dtype=int) for e in elements]
        self.n_elements = len(self.elements)
        self._build_geometry()
        self._build_faces(boundary_tags or {})
        self._validate()

    # -- construction -----------------------------------------------------

    def _build_geometry(self):
        areas, cents, diams, tris = [], [], [], []
        for k, loop in enumerate(self.elements):
            if len(loop) < 3:
                raise MeshTopologyError(f"element {k} has fewer than 3 vertices")
            v = self.vertices[loop]
            area, cent = _polygon_area_centroid(v)
            if area <= 0.0:
                raise MeshTopologyError(
                    f"element {k} is not positively oriented (area {area:g})")
            d = v[:, None, :] - v[None, :, :]
            diam = np.sqrt((d ** 2).sum(-1)).max()
            # centroid fan; valid for convex / centroid-star-shaped cells
            nxt = np.roll(loop, -1)
            tri = np.stack([np.broadcast_to(cent, (len(loop), 2)),
                            self.vertices[loop], self.vertices[nxt]], axis=1)
            tri_areas = _triangle_areas(tri)
            if (tri_areas <= 0.0).any():
                raise MeshTopologyError(
                    f"element {k} is not star-shaped with respect to its "
                    "centroid; cannot build the fan sub-triangulation")
            if abs(tri_areas.sum() - area) > 1e-12 * area:
                raise MeshTopologyError(
                    f"element {k}: sub-triangle areas do not sum to |K|")
            areas.append(area)
            cents.append(cent)
            diams.append(diam)
            tris.append(tri)
        self.areas = np.array(areas)
        self.centroids = np.array(cents)
        self.diameters = np.array(diams)
        self.sub_triangles = tris

    def _build_faces(self, boundary_tags):
        edge_map = {}
        for k, loop in enumerate(self.elements):
            for j in range(len(loop)):
                a, b = int(loop[j]), int(loop[(j + 1) % len(loop)])
                edge_map.setdefault((min(a, b), max(a, b)), []).append((k, j, a, b))

        ip, im, lp, lm, iva, ivb, inrm, ilen = [], [], [], [], [], [], [], []
        be, bl, bva, bvb, bnrm, blen, btag = [], [], [], [], [], [], []
        for key in sorted(edge_map):
            owners = edge_map[key]
            if len(owners) > 2:
                raise MeshTopologyError(
                    f"edge {key} is shared by {len(owners)} elements")
            if len(owners) == 2:
                owners = sorted(owners)       # element with lower id is "plus"
                (kp, jp, a, b), (km, jm, _, _) = owners
                n, ln = self._edge_normal(a, b)
                ip.append(kp); im.append(km); lp.append(jp); lm.append(jm)
                iva.append(a); ivb.append(b); inrm.append(n); ilen.append(ln)
            else:
                (k, j, a, b), = owners
                n, ln = self._edge_normal(a, b)
                be.append(k); bl.append(j); bva.append(a); bvb.append(b)
                bnrm.append(n); blen.append(ln)
                btag.append(boundary_tags.get((k, j), "boundary"))

        self.interior = InteriorFaces(
            np.array(ip, dtype=int), np.array(im, dtype=int),
            np.array(lp, dtype=int), np.array(lm, dtype=int),
            np.array(iva, dtype=int), np.array(ivb, dtype=int),
            np.array(inrm, dtype=float).reshape(-1, 2), np.array(ilen, dtype=float))
        self.boundary = BoundaryFaces(
            np.array(be, dtype=int), np.array(bl, dtype=int),
            np.array(bva, dtype=int), np.array(bvb, dtype=int),
            np.array(bnrm, dtype=float).reshape(-1, 2), np.array(blen, dtype=float),
            tuple(btag))

    def _edge_normal(self, a, b):
        t = self.vertices[b] - self.vertices[a]
        ln = np.linalg.norm(t)
        if ln <= 0.0:
            raise MeshTopologyError(f"degenerate edge between vertices {a} and {b}")
        return np.array([t[1], -t[0]]) / ln, ln

    def _validate(self):
        norms = np.linalg.norm(self.interior.normal, axis=1)
        if len(norms) and np.abs(norms - 1.0).max() > 1e-12:
            raise MeshTopologyError("interior face normals are not unit")
        norms = np.linalg.norm(self.boundary.normal, axis=1)
        if len(norms) and np.abs(norms - 1.0).max() > 1e-12:
            raise MeshTopologyError("boundary face normals are not unit")

    # -- queries -----------------------------------------------------------

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def h_max(self):
        return float(self.diameters.max())

    def face_endpoints(self, va, vb):
        return self.vertices[va], self.vertices[vb]

    def locate(self, point):
        """Index of the element containing ``point`` (boundary-inclusive)."""
        p = np.asarray(point, dtype=float)
        order = np.argsort(((self.centroids - p) ** 2).sum(axis=1))
        for k in order:
            if _point_in_polygon(p, self.vertices[self.elements[k]]):
                return int(k)
        raise MeshTopologyError(f"point {point} lies outside the mesh")

    def contains(self, point):
        try:
            self.locate(point)
            return True
        except MeshTopologyError:
            return False


def quality_report(mesh):
    """Shape and contact regularity ratios of ``mesh``."""
    ratio = mesh.areas / mesh.diameters ** 2
    face_ratios = []
    I, B = mesh.interior, mesh.boundary
    for side in ("plus", "minus"):
        elems = I.elem_plus if side == "plus" else I.elem_minus
        if len(elems):
            face_ratios.append(I.length / mesh.diameters[elems])
    if len(B):
        face_ratios.append(B.length / mesh.diameters[B.elem])
    all_face = np.concatenate(face_ratios) if face_ratios else np.array([np.inf])
    return MeshQualityReport(
        min_area_over_h2=float(ratio.min()),
        max_area_over_h2=float(ratio.max()),
        min_face_over_h=float(all_face.min()),
        n_elements=mesh.n_elements,
        n_faces=len(I) + len(B),
    )


# -- geometry helpers ------------------------------------------------------

def _polygon_area_centroid(v):
    x, y = v[:, 0], v[:, 1]
    xs, ys = np.roll(x, -1), np.roll(y, -1)
    cross = x * ys - xs * y
    area = 0.5 * cross.sum()
    if area == 0.0:
        return 0.0, v.mean(axis=0)
    cx = ((x + xs) * cross).sum() / (6.0 * area)
    cy = ((y + ys) * cross).sum() / (6.0 * area)
    return area, np.array([cx, cy])


def _triangle_areas(tri):
    e1 = tri[:, 1] - tri[:, 0]
    e2 = tri[:, 2] - tri[:, 0]
    return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def _point_in_polygon(p, v, tol=1e-12):
    # winding by signed areas against each CCW edge; boundary counts as inside
    scale = max(np.abs(v).max(), 1.0)
    vn = np.roll(v, -1, axis=0)
    cross = (vn[:, 0] - v[:, 0]) * (p[1] - v[:, 1]) - (vn[:, 1] - v[:, 1]) * (p[0] - v[:, 0])
    return bool((cross >= -tol * scale ** 2).all())


# -- Voronoi generation ----------------------------------------------------

def _mirror_generators(points, rect):
    x0, y0, x1, y1 = rect
    refl = [points.copy() for _ in range(4)]
    refl[0][:, 0] = 2.0 * x0 - points[:, 0]
    refl[1][:, 0] = 2.0 * x1 - points[:, 0]
    refl[2][:, 1] = 2.0 * y0 - points[:, 1]
    refl[3][:, 1] = 2.0 * y1 - points[:, 1]
    return np.vstack([points] + refl)


def _clipped_voronoi(points, rect):
    """Voronoi cells of ``points`` clipped exactly to ``rect`` by mirroring.

    Returns the global vertex array and one CCW index loop per generator.
    """
    vor = Voronoi(_mirror_generators(points, rect))
    verts = vor.vertices.copy()
    x0, y0, x1, y1 = rect
    scale = max(x1 - x0, y1 - y0)
    for dim, lo, hi in ((0, x0, x1), (1, y0, y1)):
        for side in (lo, hi):
            near = np.abs(verts[:, dim] - side) < _SNAP_TOL * scale
            verts[near, dim] = side
    # merge numerically coincident Voronoi vertices (needle-edge cleanup)
    remap = np.arange(len(verts))
    pairs = cKDTree(verts).query_pairs(_MERGE_TOL * scale, output_type="ndarray")
    for a, b in pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]:
        ra, rb = remap[a], remap[b]
        lo_, hi_ = (ra, rb) if ra < rb else (rb, ra)
        remap[remap == hi_] = lo_

    loops = []
    for i in range(len(points)):
        region = vor.regions[vor.point_region[i]]
        if -1 in region or len(region) < 3:
            raise MeshTopologyError("unbounded Voronoi cell (degenerate generators)")
        loop = []
        for idx in region:
            r = int(remap[idx])
            if not loop or (r != loop[-1] and r != loop[0]):
                loop.append(r)
        if len(loop) < 3:
            raise MeshTopologyError("Voronoi cell collapsed during vertex merge")
        v = verts[loop]
        ang = np.arctan2(v[:, 1] - points[i, 1], v[:, 0] - points[i, 0])
        order = np.argsort(ang)
        loops.append([loop[j] for j in order])
    return verts, loops


def lloyd_iteration(points, rect):
    """One Lloyd step: move every generator to its clipped-cell centroid.

    Returns the new generators and the relaxation energy before the move,
    the total squared distance of the cells' mass to their generators,
    sum_i int_{V_i} |x - g_i|^2 dx.  Both half-steps of the iteration
    minimize this functional, so it is non-increasing along the sweep
    (the plain generator-to-centroid distance is not).
    """
    verts, loops = _clipped_voronoi(points, rect)
    cents = []
    energy = 0.0
    for i, loop in enumerate(loops):
        v = verts[loop]
        _, cent = _polygon_area_centroid(v)
        cents.append(cent)
        for j in range(len(v)):
            tri = np.array([cent, v[j], v[(j + 1) % len(v)]])
            e1, e2 = tri[1] - tri[0], tri[2] - tri[0]
            jac = abs(e1[0] * e2[1] - e1[1] * e2[0])
            # |x - g|^2 is quadratic: the 3-midpoint rule integrates exactly
            mids = np.array([(tri[0] + tri[1]) / 2, (tri[1] + tri[2]) / 2,
                             (tri[0] + tri[2]) / 2])
            energy += jac * ((mids - points[i]) ** 2).sum(axis=1).mean() / 2.0
    return np.array(cents), float(energy)


def _compact_mesh(verts, loops, rect):
    """Renumber to used vertices only and attach rectangle side tags."""
    used = []
    index = {}
    new_loops = []
    for loop in loops:
        nl = []
        for v in loop:
            if v not in index:
                index[v] = len(used)
                used.append(v)
            nl.append(index[v])
        new_loops.append(nl)
    vertices = verts[used]
    tags = _rect_side_tags(vertices, new_loops, rect)
    return PolyMesh(vertices, new_loops, boundary_tags=tags)


def _rect_side_tags(vertices, loops, rect):
    x0, y0, x1, y1 = rect
    scale = max(x1 - x0, y1 - y0)
    tol = _SNAP_TOL * scale
    sides = (("left", 0, x0), ("right", 0, x1), ("bottom", 1, y0), ("top", 1, y1))
    tags = {}
    edge_count = {}
    for k, loop in enumerate(loops):
        for j in range(len(loop)):
            a, b = loop[j], loop[(j + 1) % len(loop)]
            key = (min(a, b), max(a, b))
            edge_count[key] = edge_count.get(key, 0) + 1
    for k, loop in enumerate(loops):
        for j in range(len(loop)):
            a, b = loop[j], loop[(j + 1) % len(loop)]
            if edge_count[(min(a, b), max(a, b))] != 1:
                continue
            pa, pb = vertices[a], vertices[b]
            for name, dim, val in sides:
                if abs(pa[dim] - val) < tol and abs(pb[dim] - val) < tol:
                    tags[(k, j)] = name
                    break
    return tags


def generate_voronoi(rect, n_elements, lloyd_iters=50, seed=0, generators=None,
                     max_retries=5):
    """Lloyd-relaxed clipped Voronoi tessellation of the rectangle ``rect``.

    Parameters
    ----------
    rect : (x0, y0, x1, y1)
        Axis-aligned domain with positive area.
    n_elements : int
        Number of cells (>= 2).
    lloyd_iters : int
        Fixed number of centroid relaxation sweeps.
    seed : int
        RNG seed for the uniform initial generators; the result is a pure
        function of ``(rect, n_elements, lloyd_iters, seed)``.
    generators : (n, 2) array, optional
        Explicit initial generators (overrides random sampling).

    Degenerate generator configurations are retried with a perturbed seed up
    to ``max_retries`` times before failing.
    """
    x0, y0, x1, y1 = (float(v) for v in rect)
    if x1 <= x0 or y1 <= y0:
        raise MeshTopologyError("domain rectangle must have positive area")
    if n_elements < 2:
        raise MeshTopologyError("need at least 2 elements")
    rect = (x0, y0, x1, y1)

    last_err = None
    for attempt in range(max_retries):
        if generators is not None:
            pts = np.asarray(generators, dtype=float).copy()
            if attempt > 0:
                rng = np.random.default_rng(seed + attempt)
                pts += 1e-9 * max(x1 - x0, y1 - y0) * rng.standard_normal(pts.shape)
        else:
            rng = np.random.default_rng(seed + attempt)
            pts = np.column_stack([rng.uniform(x0, x1, n_elements),
                                   rng.uniform(y0, y1, n_elements)])
        try:
            if _min_pairwise_distance(pts) < 1e-12 * max(x1 - x0, y1 - y0):
                raise MeshTopologyError("coincident generators")
            for _ in range(lloyd_iters):
                pts, _ = lloyd_iteration(pts, rect)
            verts, loops = _clipped_voronoi(pts, rect)
            return _compact_mesh(verts, loops, rect)
        except (MeshTopologyError, Exception) as err:  # Qhull raises plain errors
            last_err = err
    raise MeshTopologyError(
        f"Voronoi generation failed after {max_retries} attempts: {last_err}")


def _min_pairwise_distance(pts):
    if len(pts) < 2:
        return np.inf
    d, _ = cKDTree(pts).query(pts, k=2)
    return float(d[:, 1].min())


def generate_cartesian(rect, nx, ny):
    """Structured ``nx`` x ``ny`` quadrilateral grid on ``rect``.

    Elements are ordered row-major from the lower-left corner, matching the
    raster field layout of :mod:`porodg.models`.
    """
    x0, y0, x1, y1 = (float(v) for v in rect)
    if nx < 1 or ny < 1 or x1 <= x0 or y1 <= y0:
        raise MeshTopologyError("invalid cartesian grid specification")
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    vertices = np.column_stack([X.ravel(), Y.ravel()])
    vid = lambda i, j: j * (nx + 1) + i
    elements = [[vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)]
                for j in range(ny) for i in range(nx)]
    loops = elements
    tags = _rect_side_tags(vertices, loops, (x0, y0, x1, y1))
    return PolyMesh(vertices, loops, boundary_tags=tags)


# -- serialization ---------------------------------------------------------

def save_mesh(mesh, path):
    """Write ``mesh`` in the plain-text polymesh format (deterministic bytes)."""
    lines = ["polymesh 2d"]
    lines.append(f"vertices {mesh.n_vertices}")
    for v in mesh.vertices:
        lines.append(f"{float(v[0])!r} {float(v[1])!r}")
    lines.append(f"elements {mesh.n_elements}")
    for loop in mesh.elements:
        lines.append(" ".join([str(len(loop))] + [str(int(i)) for i in loop]))
    B = mesh.boundary
    lines.append(f"boundary_tags {len(B)}")
    for k in range(len(B)):
        lines.append(f"{int(B.elem[k])} {int(B.local_edge[k])} {B.tag[k]}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_mesh(path):
    """Parse a polymesh text file; malformed input raises with its line number."""
    tokens = []  # (lineno, [fields])
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if line:
                tokens.append((lineno, line.split()))
    cursor = 0

    def next_line(what):
        nonlocal cursor
        if cursor >= len(tokens):
            raise MeshFormatError(f"unexpected end of file, expected {what}",
                                  line=tokens[-1][0] if tokens else 0)
        item = tokens[cursor]
        cursor += 1
        return item

    lineno, fields = next_line("header")
    if fields != ["polymesh", "2d"]:
        raise MeshFormatError("expected header 'polymesh 2d'", line=lineno)

    lineno, fields = next_line("vertex count")
    if len(fields) != 2 or fields[0] != "vertices":
        raise MeshFormatError("expected 'vertices N'", line=lineno)
    nv = _parse_int(fields[1], lineno)
    vertices = np.empty((nv, 2))
    for i in range(nv):
        lineno, fields = next_line("vertex coordinates")
        if len(fields) != 2:
            raise MeshFormatError("expected 'x y'", line=lineno)
        vertices[i] = [_parse_float(fields[0], lineno), _parse_float(fields[1], lineno)]

    lineno, fields = next_line("element count")
    if len(fields) != 2 or fields[0] != "elements":
        raise MeshFormatError("expected 'elements M'", line=lineno)
    ne = _parse_int(fields[1], lineno)
    elements = []
    for _ in range(ne):
        lineno, fields = next_line("element loop")
        k = _parse_int(fields[0], lineno)
        if len(fields) != k + 1:
            raise MeshFormatError(f"expected {k} vertex indices", line=lineno)
        loop = [_parse_int(f, lineno) for f in fields[1:]]
        if any(i < 0 or i >= nv for i in loop):
            raise MeshFormatError("vertex index out of range", line=lineno)
        elements.append(loop)

    tags = {}
    if cursor < len(tokens):
        lineno, fields = next_line("boundary tag count")
        if len(fields) != 2 or fields[0] != "boundary_tags":
            raise MeshFormatError("expected 'boundary_tags B'", line=lineno)
        nb = _parse_int(fields[1], lineno)
        for _ in range(nb):
            lineno, fields = next_line("boundary tag")
            if len(fields) != 3:
                raise MeshFormatError("expected 'elem local_edge tag'", line=lineno)
            elem = _parse_int(fields[0], lineno)
            edge = _parse_int(fields[1], lineno)
            if elem < 0 or elem >= ne:
                raise MeshFormatError("element index out of range", line=lineno)
            tags[(elem, edge)] = fields[2]
    return PolyMesh(vertices, elements, boundary_tags=tags)


def _parse_int(tok, lineno):
    try:
        return int(tok)
    except ValueError:
        raise MeshFormatError(f"expected integer, got {tok!r}", line=lineno) from None


def _parse_float(tok, lineno):
    try:
        return float(tok)
    except ValueError:
        raise MeshFormatError(f"expected number, got {tok!r}", line=lineno) from None
