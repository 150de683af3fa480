"""Room voxelization and sparse scatterer fields.

The room is cut into identical cuboid voxels. The environment is a vector of
per-voxel scattering coefficients in [0, 1]; empty voxels are exactly 0.
Voxel indexing is x-fastest row-major: index = ix + nx*(iy + ny*iz).
"""

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "RoomSpec",
    "ScattererField",
    "voxel_center",
    "voxel_centers",
    "nearest_voxel",
    "random_scene",
    "save_scene",
    "load_scene",
]

_DIV_TOL = 1e-9


@dataclass(frozen=True)
class RoomSpec:
    """Room dimensions and voxel dimensions, all in meters.

    Each room dimension must be an exact integer multiple of the matching
    voxel dimension.
    """

    room_dims: tuple  # (Lx, Ly, Lz)
    voxel_dims: tuple  # (lx, ly, lz)

    def __post_init__(self):
        room = tuple(float(v) for v in self.room_dims)
        vox = tuple(float(v) for v in self.voxel_dims)
        if len(room) != 3 or len(vox) != 3:
            raise ValueError("room_dims and voxel_dims must have 3 entries")
        if any(v <= 0 for v in room + vox):
            raise ValueError("room and voxel dimensions must be positive")
        for L, l in zip(room, vox):
            n = L / l
            if abs(n - round(n)) > _DIV_TOL * max(1.0, n):
                raise ValueError(
                    f"room dimension {L} is not an integer multiple of voxel dimension {l}"
                )
        object.__setattr__(self, "room_dims", room)
        object.__setattr__(self, "voxel_dims", vox)

    @property
    def grid_shape(self):
        """Number of voxels along (x, y, z)."""
        return tuple(
            int(round(L / l)) for L, l in zip(self.room_dims, self.voxel_dims)
        )

    @property
    def n_voxels(self):
        nx, ny, nz = self.grid_shape
        return nx * ny * nz


def voxel_center(spec: RoomSpec, index: int):
    """Geometric center of the indexed voxel as a length-3 array (meters)."""
    n = spec.n_voxels
    if not 0 <= index < n:
        raise IndexError(f"voxel index {index} out of range [0, {n})")
    nx, ny, nz = spec.grid_shape
    ix = index % nx
    iy = (index // nx) % ny
    iz = index // (nx * ny)
    lx, ly, lz = spec.voxel_dims
    return np.array([(ix + 0.5) * lx, (iy + 0.5) * ly, (iz + 0.5) * lz])


def voxel_centers(spec: RoomSpec):
    """All voxel centers as an (N_s, 3) array, in index order."""
    nx, ny, nz = spec.grid_shape
    lx, ly, lz = spec.voxel_dims
    ids = np.arange(spec.n_voxels)
    ix = ids % nx
    iy = (ids // nx) % ny
    iz = ids // (nx * ny)
    return np.stack(
        [(ix + 0.5) * lx, (iy + 0.5) * ly, (iz + 0.5) * lz], axis=1
    )


def nearest_voxel(spec: RoomSpec, point):
    """Index of the voxel whose cube contains (or is nearest to) the point."""
    p = np.asarray(point, dtype=float)
    nx, ny, nz = spec.grid_shape
    idx = []
    for coord, l, nmax in zip(p, spec.voxel_dims, (nx, ny, nz)):
        i = int(np.floor(coord / l))
        idx.append(min(max(i, 0), nmax - 1))
    ix, iy, iz = idx
    return ix + nx * (iy + ny * iz)


@dataclass
class ScattererField:
    """Per-voxel scattering coefficients x with 0 <= x <= 1."""

    spec: RoomSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.spec.n_voxels,):
            raise ValueError(
                f"expected {self.spec.n_voxels} values, got shape {v.shape}"
            )
        if np.any(v < 0) or np.any(v > 1):
            raise ValueError("scattering coefficients must lie in [0, 1]")
        self.values = v

    @property
    def nonzero_count(self):
        return int(np.count_nonzero(self.values))


def random_scene(spec: RoomSpec, sparsity: float, seed=None) -> ScattererField:
    """Random sparse scene: ceil(sparsity * N_s) voxels get values uniform in (0, 1].

    Deterministic given seed. Positions are drawn without replacement.
    """
    if not 0 < sparsity <= 1:
        raise ValueError(f"sparsity must lie in (0, 1], got {sparsity}")
    rng = np.random.default_rng(seed)
    n = spec.n_voxels
    k = math.ceil(sparsity * n)
    idx = rng.choice(n, size=k, replace=False)
    vals = np.zeros(n)
    # 1 - U[0,1) lies in (0, 1]
    vals[idx] = 1.0 - rng.random(k)
    return ScattererField(spec, vals)


def save_scene(path, fld: ScattererField):
    """Write a scene file: header line, then one line per nonzero voxel."""
    nx, ny, nz = fld.spec.grid_shape
    L = fld.spec.room_dims
    l = fld.spec.voxel_dims
    with open(path, "w") as f:
        f.write(
            "room %.17g %.17g %.17g voxel %.17g %.17g %.17g\n"
            % (L[0], L[1], L[2], l[0], l[1], l[2])
        )
        for i in np.flatnonzero(fld.values):
            ix = i % nx
            iy = (i // nx) % ny
            iz = i // (nx * ny)
            f.write("%d %d %d %.17g\n" % (ix, iy, iz, fld.values[i]))


def load_scene(path, spec: RoomSpec | None = None) -> ScattererField:
    """Read a scene file. If spec is given, the file header must match it."""
    with open(path) as f:
        lines = [ln.strip() for ln in f if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty scene file")
    head = lines[0].split()
    if len(head) != 8 or head[0] != "room" or head[4] != "voxel":
        raise ValueError(f"{path}: malformed scene header: {lines[0]!r}")
    file_spec = RoomSpec(
        tuple(float(x) for x in head[1:4]), tuple(float(x) for x in head[5:8])
    )
    if spec is not None and (
        spec.room_dims != file_spec.room_dims
        or spec.voxel_dims != file_spec.voxel_dims
    ):
        raise ValueError(f"{path}: scene dimensions do not match expected RoomSpec")
    spec = file_spec
    nx, ny, nz = spec.grid_shape
    vals = np.zeros(spec.n_voxels)
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 4:
            raise ValueError(f"{path}: malformed voxel line: {ln!r}")
        ix, iy, iz = (int(p) for p in parts[:3])
        v = float(parts[3])
        if not (0 <= ix < nx and 0 <= iy < ny and 0 <= iz < nz):
            raise ValueError(f"{path}: voxel index out of range: {ln!r}")
        if not 0 <= v <= 1:
            raise ValueError(f"{path}: scattering coefficient {v} outside [0, 1]")
        vals[ix + nx * (iy + ny * iz)] = v
    return ScattererField(spec, vals)
