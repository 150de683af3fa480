"""SCMA codebooks, encoder and the decoder factor graph.

Each user owns an R x M matrix of sparse codewords: all M columns share the
same d_v nonzero rows (the user's OREs). Codebook *design* is treated as
data: the default book is generated from phase-rotated QPSK symbols, and
arbitrary books can be loaded from file.
"""

import itertools
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Codebook",
    "FactorGraph",
    "CodebookError",
    "build_codebook",
    "default_codebook",
    "validate_codebook",
    "encode",
    "bits_to_index",
    "factor_graph",
    "save_codebook",
    "load_codebook",
]


class CodebookError(ValueError):
    """A structural codebook invariant is violated."""


@dataclass
class Codebook:
    """Per-user sparse codeword matrices.

    matrices[u] is the (R, M) complex codeword matrix of user u. d_f is the
    common per-ORE user count when d_f * R = d_v * N_u admits one, else None
    (irregular book with balanced ORE loads).
    """

    matrices: list = field(repr=False)

    def __post_init__(self):
        mats = [np.asarray(m, dtype=complex) for m in self.matrices]
        if not mats:
            raise CodebookError("codebook needs at least one user")
        shape = mats[0].shape
        if len(shape) != 2:
            raise CodebookError("codeword matrices must be 2-D (R x M)")
        for u, m in enumerate(mats):
            if m.shape != shape:
                raise CodebookError(f"user {u}: codeword matrix shape {m.shape} != {shape}")
        self.matrices = mats

    @property
    def n_users(self):
        return len(self.matrices)

    @property
    def n_ores(self):
        return self.matrices[0].shape[0]

    @property
    def m(self):
        """Codewords per user."""
        return self.matrices[0].shape[1]

    def support(self, u):
        """Row indices where user u's codewords are nonzero."""
        return tuple(np.flatnonzero(np.any(self.matrices[u] != 0, axis=1)))

    @property
    def d_v(self):
        return len(self.support(0))

    @property
    def d_f(self):
        """Common per-ORE user count, or None for an irregular book."""
        loads = self._ore_loads()
        return int(loads[0]) if len(set(loads)) == 1 else None

    @property
    def max_d_f(self):
        return int(max(self._ore_loads()))

    @property
    def overloading_factor(self):
        return self.n_users / self.n_ores

    def _ore_loads(self):
        loads = [0] * self.n_ores
        for u in range(self.n_users):
            for r in self.support(u):
                loads[r] += 1
        return loads

    def mapping_matrix(self, u):
        """Binary R x N_c matrix placing the N_c constellation dims on user u's OREs."""
        sup = self.support(u)
        v = np.zeros((self.n_ores, len(sup)), dtype=int)
        for t, r in enumerate(sup):
            v[r, t] = 1
        return v


@dataclass(frozen=True)
class FactorGraph:
    """FN/VN adjacency: lambda_r[r] = users on ORE r, omega_u[u] = user u's OREs."""

    lambda_r: tuple
    omega_u: tuple


def _balanced_supports(n_users, n_ores, d_v):
    """Pick one ORE subset of size d_v per user, keeping per-ORE loads balanced."""
    combos = list(itertools.combinations(range(n_ores), d_v))
    loads = [0] * n_ores
    used = {c: 0 for c in combos}
    supports = []
    for _ in range(n_users):
        # deterministic greedy: lowest resulting max load wins, prefer fresh
        # supports, then the least-loaded OREs
        best = min(
            combos,
            key=lambda c: (
                max(loads[r] + 1 if r in c else loads[r] for r in range(n_ores)),
                used[c],
                sum(loads[r] for r in c),
                c,
            ),
        )
        supports.append(best)
        used[best] += 1
        for r in best:
            loads[r] += 1
    return supports


def build_codebook(n_users, n_ores, m=4, d_v=2) -> Codebook:
    """Generate a phase-rotation codebook with balanced ORE loads.

    Codeword m of user u carries QPSK-like symbols exp(+-j*2*pi*m/M) on its
    d_v OREs (sign alternating per dimension for diversity), rotated per
    (user, ORE) so the users colliding on an ORE are distinguishable, and
    scaled to unit average codeword energy.
    """
    if d_v > n_ores:
        raise CodebookError("d_v cannot exceed the number of OREs")
    supports = _balanced_supports(n_users, n_ores, d_v)
    # per-ORE rotation slot for each of its users
    rot_index = {}
    loads = [0] * n_ores
    for u, sup in enumerate(supports):
        for r in sup:
            rot_index[(u, r)] = loads[r]
            loads[r] += 1
    mats = []
    amp = 1.0 / np.sqrt(d_v)
    for u, sup in enumerate(supports):
        cm = np.zeros((n_ores, m), dtype=complex)
        ms = np.arange(m)
        for t, r in enumerate(sup):
            sign = 1 if t % 2 == 0 else -1
            rot = rot_index[(u, r)] * 2 * np.pi / (m * loads[r])
            cm[r, :] = amp * np.exp(1j * (sign * 2 * np.pi * ms / m + rot))
        mats.append(cm)
    cb = Codebook(mats)
    validate_codebook(cb)
    return cb


def default_codebook() -> Codebook:
    """The bundled 6-user, 4-ORE, M=4, d_v=2 book (overloading factor 150%)."""
    return build_codebook(6, 4, m=4, d_v=2)


def validate_codebook(cb: Codebook):
    """Check all structural invariants; raises CodebookError on the first violation."""
    d_v = cb.d_v
    if d_v < 1:
        raise CodebookError("user 0: codewords have no nonzero rows")
    for u in range(cb.n_users):
        mat = cb.matrices[u]
        sup = cb.support(u)
        if len(sup) != d_v:
            raise CodebookError(
                f"user {u}: support size {len(sup)} != d_v {d_v}"
            )
        for m in range(cb.m):
            nz = np.flatnonzero(mat[:, m] != 0)
            if len(nz) != d_v or tuple(nz) != sup:
                raise CodebookError(
                    f"user {u} codeword {m}: nonzero rows {tuple(nz)} "
                    f"do not match the user support {sup}"
                )
    loads = cb._ore_loads()
    total = cb.d_v * cb.n_users
    if total % cb.n_ores == 0:
        d_f = total // cb.n_ores
        for r, L in enumerate(loads):
            if L != d_f:
                raise CodebookError(
                    f"ORE {r}: used by {L} users, expected d_f = {d_f}"
                )
    else:
        lo, hi = total // cb.n_ores, total // cb.n_ores + 1
        for r, L in enumerate(loads):
            if L not in (lo, hi):
                raise CodebookError(
                    f"ORE {r}: load {L} outside balanced range [{lo}, {hi}]"
                )


def encode(cb: Codebook, user: int, symbol_index: int):
    """Codeword column symbol_index of the given user."""
    if not 0 <= user < cb.n_users:
        raise IndexError(f"user index {user} out of range")
    if not 0 <= symbol_index < cb.m:
        raise IndexError(f"symbol index {symbol_index} out of range [0, {cb.m})")
    return cb.matrices[user][:, symbol_index].copy()


def bits_to_index(bits) -> int:
    """Big-endian binary bit block -> symbol index."""
    out = 0
    for b in bits:
        if b not in (0, 1):
            raise ValueError(f"bits must be 0/1, got {b}")
        out = (out << 1) | int(b)
    return out


def factor_graph(cb: Codebook) -> FactorGraph:
    """FN/VN adjacency induced by codeword supports."""
    validate_codebook(cb)
    omega = tuple(cb.support(u) for u in range(cb.n_users))
    lam = tuple(
        tuple(u for u in range(cb.n_users) if r in omega[u])
        for r in range(cb.n_ores)
    )
    return FactorGraph(lam, omega)


def _fmt_complex(z):
    return "%.17g%+.17gj" % (z.real, z.imag)


def save_codebook(path, cb: Codebook):
    with open(path, "w") as f:
        f.write(f"scma {cb.n_users} {cb.n_ores} {cb.m} {cb.d_v}\n")
        for u in range(cb.n_users):
            for m in range(cb.m):
                f.write(" ".join(_fmt_complex(z) for z in cb.matrices[u][:, m]))
                f.write("\n")


def load_codebook(path) -> Codebook:
    with open(path) as f:
        lines = [ln.strip() for ln in f if ln.strip()]
    if not lines:
        raise CodebookError(f"{path}: empty codebook file")
    head = lines[0].split()
    if len(head) != 5 or head[0] != "scma":
        raise CodebookError(f"{path}: malformed header: {lines[0]!r}")
    n_u, r, m, d_v = (int(x) for x in head[1:])
    if len(lines) != 1 + n_u * m:
        raise CodebookError(
            f"{path}: expected {n_u * m} codeword lines, got {len(lines) - 1}"
        )
    mats = []
    for u in range(n_u):
        cm = np.zeros((r, m), dtype=complex)
        for mi in range(m):
            parts = lines[1 + u * m + mi].split()
            if len(parts) != r:
                raise CodebookError(
                    f"{path}: user {u} codeword {mi}: expected {r} entries"
                )
            cm[:, mi] = [complex(p) for p in parts]
        mats.append(cm)
    cb = Codebook(mats)
    validate_codebook(cb)
    if cb.d_v != d_v:
        raise CodebookError(f"{path}: header d_v {d_v} != actual {cb.d_v}")
    return cb
