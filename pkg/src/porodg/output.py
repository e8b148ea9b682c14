"""Run artifacts: legacy-VTK field dumps, probe series, CSV reports.

All writers format floats with repr-faithful precision and carry no
timestamps, so identical runs produce byte-identical files.
"""

import numpy as np

from .errors import ConfigError

FIELD_NAMES = ("ux", "uy", "vx", "vy", "vmag", "phi", "wmag")


def element_fields(space, state, coeffs):
    """Element-mean output fields of a state snapshot."""
    mesh = space.mesh
    ne = mesh.n_elements
    out = {name: np.empty(ne) for name in FIELD_NAMES}
    for e in range(ne):
        w = space.vol_weights[e]
        area = mesh.areas[e]
        b = space.vol_basis[e]
        g = space.vol_grad[e]
        m = space.nloc[e]
        vd, sd = space.vector_dofs(e), space.scalar_dofs(e)
        u = np.column_stack([b @ state.U[vd[:m]], b @ state.U[vd[m:]]])
        v = np.column_stack([b @ state.Z[vd[:m]], b @ state.Z[vd[m:]]])
        phi = b @ state.Phi[sd]
        flux = np.einsum("qjd,j->qd", g, state.Phi[sd]) @ coeffs.D[e].T
        out["ux"][e] = np.dot(w, u[:, 0]) / area
        out["uy"][e] = np.dot(w, u[:, 1]) / area
        out["vx"][e] = np.dot(w, v[:, 0]) / area
        out["vy"][e] = np.dot(w, v[:, 1]) / area
        out["vmag"][e] = np.dot(w, np.linalg.norm(v, axis=1)) / area
        out["phi"][e] = np.dot(w, phi) / area
        out["wmag"][e] = np.dot(w, np.linalg.norm(flux, axis=1)) / area
    return out


def write_vtk(path, mesh, cell_data):
    """Legacy-VTK unstructured grid with polygon cells and cell data."""
    lines = ["# vtk DataFile Version 3.0", "porodg fields", "ASCII",
             "DATASET UNSTRUCTURED_GRID",
             f"POINTS {mesh.n_vertices} double"]
    for v in mesh.vertices:
        lines.append(f"{v[0]:.17g} {v[1]:.17g} 0")
    sizes = sum(len(e) + 1 for e in mesh.elements)
    lines.append(f"CELLS {mesh.n_elements} {sizes}")
    for loop in mesh.elements:
        lines.append(" ".join([str(len(loop))] + [str(int(i)) for i in loop]))
    lines.append(f"CELL_TYPES {mesh.n_elements}")
    lines.extend(["7"] * mesh.n_elements)     # VTK_POLYGON
    lines.append(f"CELL_DATA {mesh.n_elements}")
    for name, values in cell_data.items():
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines.extend(f"{v:.17g}" for v in values)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


class SnapshotWriter:
    """Observer writing VTK field dumps at the configured instants."""

    def __init__(self, space, coeffs, times, dt, out_dir, prefix="snapshot"):
        self.space = space
        self.coeffs = coeffs
        self.remaining = sorted(float(t) for t in times)
        self.half_step = 0.5 * dt
        self.out_dir = out_dir
        self.prefix = prefix
        self.written = []

    def __call__(self, state):
        while self.remaining and state.t >= self.remaining[0] - self.half_step:
            t_snap = self.remaining.pop(0)
            fields = element_fields(self.space, state, self.coeffs)
            path = f"{self.out_dir}/{self.prefix}_t{t_snap:.6f}.vtk"
            write_vtk(path, self.space.mesh, fields)
            self.written.append((t_snap, path))


class ProbeRecorder:
    """Observer sampling u, v = du/dt, phi and |w| at named points."""

    def __init__(self, space, coeffs, probes):
        self.space = space
        self.coeffs = coeffs
        self.names = []
        self.points = []
        self.elements = []
        for name, point in probes:
            self.names.append(name)
            p = np.asarray(point, dtype=float)
            self.points.append(p)
            self.elements.append(space.mesh.locate(p))
        self.rows = []

    def __call__(self, state):
        row = [state.t]
        for p, e in zip(self.points, self.elements):
            pts = p.reshape(1, 2)
            u = self.space.eval_vector(state.U, e, pts)[0]
            v = self.space.eval_vector(state.Z, e, pts)[0]
            phi = self.space.eval_scalar(state.Phi, e, pts)[0]
            flux = self.coeffs.D[e] @ self.space.eval_scalar_grad(
                state.Phi, e, pts)[0]
            row.extend([u[0], u[1], v[0], v[1], phi, float(np.linalg.norm(flux))])
        self.rows.append(row)

    def series(self, name):
        """Time series of one probe as a dict of column arrays."""
        if name not in self.names:
            raise ConfigError(f"unknown probe {name!r}")
        i = self.names.index(name)
        data = np.asarray(self.rows)
        cols = ("ux", "uy", "vx", "vy", "phi", "wmag")
        out = {"t": data[:, 0]}
        for j, c in enumerate(cols):
            out[c] = data[:, 1 + 6 * i + j]
        return out

    def to_csv(self, path):
        cols = ["t"]
        for name in self.names:
            cols.extend(f"{name}_{c}" for c in
                        ("ux", "uy", "vx", "vy", "phi", "wmag"))
        lines = [",".join(cols)]
        for row in self.rows:
            lines.append(",".join(f"{v:.17g}" for v in row))
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")


def read_probe_series(path, name):
    """Extract one probe's columns from a probes.csv written by a run."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        data = np.array([[float(v) for v in line.strip().split(",")]
                         for line in fh if line.strip()])
    prefix = f"{name}_"
    idx = [i for i, c in enumerate(header) if c == "t" or c.startswith(prefix)]
    if len(idx) < 2:
        raise ConfigError(f"probe {name!r} not present in {path}")
    return {header[i] if header[i] == "t" else header[i][len(prefix):]:
            data[:, i] for i in idx}
