"""Three-dimensional elliptic problem with a two-parameter random coefficient.

    -div(a(x; Y) grad u) = 1   in (0, 1)^3,   u = 0 on the boundary,
    a(x; Y) = 1 + exp(2 Y_1 Phi_121(x) + 2 Y_2 Phi_877(x)),   Y_j ~ U[-1, 1],

with ``Phi_ijk(x) = phi_i(x_1) phi_j(x_2) phi_k(x_3)``, ``phi_i(x) = cos(i pi x/2)``
for even ``i`` and ``sin((i+1) pi x/2)`` for odd ``i``.  The quantity of
interest is a Gaussian-weighted average of ``u``.

Index ``alpha`` uses a uniform mesh with ``N_i = 4 * 2^alpha_i`` elements in
direction ``i`` and trilinear elements.  Each element carries one coefficient
value, by default ``a`` at its centroid, and the QoI integral uses nodal
(lumped) quadrature.  The centroid rule aliases on the coarsest mesh in the
first direction, since ``phi_8`` vanishes at every centroid of a 4-element
grid; the first difference along that direction is therefore unusually large.
Averaging over the 2x2x2 Gauss points of each element avoids this and is
available through ``coefficient_rule``.  (Nodal values would not help: the
``sin(4 pi x)`` factors of the same field vanish at the nodes of that grid.)

Two solvers are available.  Meshes whose stiffness matrix has a narrow band
(with the longest direction ordered outermost) are factored by banded
Cholesky, one sample at a time.  Larger meshes use a Jacobi-preconditioned
conjugate gradient method applied matrix-free to a whole batch of samples;
a sample that has converged is frozen, so its result does not depend on
which other samples share the batch.  Either way the residual is checked
against ``rtol`` after the solve.
"""
from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solveh_banded

from ..estimator import Sampler
from ..rng import uniforms

REFERENCE_VALUE = 1.3301
REFERENCE_ERROR = 1e-4


@dataclass
class EllipticProblemParams:
    sigma: float = 0.16
    x0: tuple = (0.5, 0.2, 0.6)
    amplitudes: tuple = (2.0, 2.0)
    basis: tuple = ((1, 2, 1), (8, 7, 7))
    base_mesh: int = 4
    beta: float = 2.0
    qoi_scale: float = 100.0
    work_exponent: float = 1.5
    rtol: float = 1e-10
    max_cg_iter: int = 5000
    max_elements: int = 128
    coefficient_rule: str = "centroid"
    batch_size: int = 64
    solver: str = "auto"
    banded_limit: float = 5e8
    band_memory: int = 8_000_000
    check_residual: bool = True


def basis_function(i: int, x: np.ndarray) -> np.ndarray:
    if i % 2 == 0:
        return np.cos(i * np.pi * x / 2)
    return np.sin((i + 1) * np.pi * x / 2)


class SolverError(RuntimeError):
    pass


_CORNERS = list(itertools.product((0, 1), repeat=3))


class _Mesh:
    """Geometry, local stiffness and QoI weights of one tensor mesh."""

    def __init__(self, N: Sequence[int], params: EllipticProblemParams):
        self.N = tuple(int(n) for n in N)
        self.h = np.array([1.0 / n for n in self.N])
        self.params = params
        k1 = [np.array([[1.0, -1.0], [-1.0, 1.0]]) / h for h in self.h]
        m1 = [np.array([[2.0, 1.0], [1.0, 2.0]]) * h / 6 for h in self.h]
        K = np.zeros((8, 8))
        for p, cp in enumerate(_CORNERS):
            for q, cq in enumerate(_CORNERS):
                val = 0.0
                for axis in range(3):
                    term = 1.0
                    for j in range(3):
                        mat = k1[j] if j == axis else m1[j]
                        term *= mat[cp[j], cq[j]]
                    val += term
                K[p, q] = val
        self.K = K
        self.kdiag = K[0, 0]
        # Points where a is evaluated: "centroid" takes the midpoint value,
        # "gauss" averages over the 2x2x2 Gauss points of the element.
        rule = params.coefficient_rule
        if rule == "gauss":
            off = 0.5 / np.sqrt(3.0)
            pts = [[(np.arange(n) + 0.5 + o) / n for o in (-off, off)] for n in self.N]
        elif rule == "centroid":
            pts = [[(np.arange(n) + 0.5) / n] for n in self.N]
        else:
            raise ValueError(f"unknown coefficient rule {rule!r}")
        self.fields = [
            [
                basis_function(i, p0)[:, None, None]
                * basis_function(j, p1)[None, :, None]
                * basis_function(k, p2)[None, None, :]
                for (i, j, k) in params.basis
            ]
            for p0 in pts[0] for p1 in pts[1] for p2 in pts[2]
        ]
        nodes = [np.linspace(0.0, 1.0, n + 1) for n in self.N]
        sig2 = params.sigma**2
        g = [np.exp(-((x - c) ** 2) / (2 * sig2)) for x, c in zip(nodes, params.x0)]
        weight = params.qoi_scale * (2 * np.pi * sig2) ** -1.5 * np.prod(self.h)
        W = weight * g[0][:, None, None] * g[1][None, :, None] * g[2][None, None, :]
        self.interior = np.zeros([n + 1 for n in self.N], dtype=bool)
        self.interior[1:-1, 1:-1, 1:-1] = True
        self.qoi_weights = np.where(self.interior, W, 0.0)
        self.load = np.where(self.interior, np.prod(self.h), 0.0)

        n_int = [n - 1 for n in self.N]
        self.n = int(np.prod(n_int))
        order = sorted(range(3), key=lambda i: -n_int[i])
        strides = [0, 0, 0]
        st = 1
        for ax in reversed(order):
            strides[ax] = st
            st *= n_int[ax]
        self.strides = strides
        self.bandwidth = sum(strides) if self.n > 1 else 0
        if params.solver not in ("auto", "cg", "banded"):
            raise ValueError(f"unknown solver {params.solver!r}")
        cost = self.n * max(self.bandwidth, 1) ** 2
        self.method = params.solver
        if self.method == "auto":
            self.method = "banded" if cost <= params.banded_limit else "cg"
        self._band_map = None

    def _node_numbers(self) -> np.ndarray:
        """Unknown number of every node; -1 on the boundary."""
        num = -np.ones([n + 1 for n in self.N], dtype=np.int64)
        grids = np.meshgrid(*[np.arange(n - 1) for n in self.N], indexing="ij")
        num[1:-1, 1:-1, 1:-1] = sum(g * s for g, s in zip(grids, self.strides))
        return num

    def band_map(self) -> sp.csr_matrix:
        """Sparse map from element coefficients to upper band storage."""
        if self._band_map is None:
            n, b = self.n, self.bandwidth
            num = self._node_numbers()
            n_el = int(np.prod(self.N))
            elements = np.arange(n_el).reshape(self.N)
            views = [num[i:i + self.N[0], j:j + self.N[1], k:k + self.N[2]] for (i, j, k) in _CORNERS]
            rows, cols, vals = [], [], []
            for p in range(8):
                for q in range(8):
                    gi, gj = views[p], views[q]
                    ok = (gi >= 0) & (gj >= 0) & (gi <= gj)
                    rows.append(elements[ok])
                    cols.append((b + gi[ok] - gj[ok]) * n + gj[ok])
                    vals.append(np.full(int(ok.sum()), self.K[p, q]))
            self._band_map = sp.csr_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                shape=(n_el, (b + 1) * n),
            )
        return self._band_map

    def solve_banded(self, a: np.ndarray) -> np.ndarray:
        """Per-sample banded Cholesky; returns node-grid solutions."""
        batch = a.shape[0]
        n, b = self.n, self.bandwidth
        M = self.band_map()
        rhs = np.full(n, float(np.prod(self.h)))
        num = self._node_numbers()
        inner = num[1:-1, 1:-1, 1:-1]
        u = np.zeros((batch,) + num.shape)
        step = max(1, self.params.band_memory // ((b + 1) * n))
        flat = a.reshape(batch, -1)
        for lo in range(0, batch, step):
            bands = (M.T @ flat[lo:lo + step].T).T.reshape(-1, b + 1, n)
            for i, ab in enumerate(bands):
                x = solveh_banded(ab, rhs, check_finite=False)
                u[lo + i, 1:-1, 1:-1, 1:-1] = x[inner]
        return u

    def residual(self, a: np.ndarray, u: np.ndarray) -> np.ndarray:
        b = np.broadcast_to(self.load, u.shape)
        r = b - self.apply(a, u)
        return np.sqrt(_dot(r, r) / _dot(b, b))

    def solve_qoi(self, a: np.ndarray) -> np.ndarray:
        if self.method == "banded":
            u = self.solve_banded(a)
            if self.params.check_residual:
                res = self.residual(a, u)
                if np.any(res > self.params.rtol):
                    raise SolverError(f"banded solve residual {res.max():.3g} on mesh {self.N}")
        else:
            u, _ = self.solve(a)
        return self.qoi(u)

    @property
    def dofs(self) -> int:
        return int(np.prod([n - 1 for n in self.N]))

    def coefficient(self, y: np.ndarray) -> np.ndarray:
        """Element coefficients, shape ``(batch, N1, N2, N3)``."""
        amp = self.params.amplitudes
        total = 0.0
        for point in self.fields:
            expo = sum(amp[b] * y[:, b, None, None, None] * f[None] for b, f in enumerate(point))
            total = total + np.exp(expo)
        return 1.0 + total / len(self.fields)

    def _views(self, arr):
        n1, n2, n3 = self.N
        return [arr[:, i:i + n1, j:j + n2, k:k + n3] for (i, j, k) in _CORNERS]

    def apply(self, a: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Stiffness times ``x`` on the node grid; boundary rows are zeroed."""
        xs = self._views(x)
        y = np.zeros_like(x)
        ys = self._views(y)
        K = self.K
        for p in range(8):
            acc = K[p, 0] * xs[0]
            for q in range(1, 8):
                acc = acc + K[p, q] * xs[q]
            ys[p] += a * acc
        y[:, ~self.interior] = 0.0
        return y

    def diagonal(self, a: np.ndarray) -> np.ndarray:
        shape = (a.shape[0],) + tuple(n + 1 for n in self.N)
        diag = np.zeros(shape)
        for view in self._views(diag):
            view += self.kdiag * a
        diag[:, ~self.interior] = 1.0
        return diag

    def solve(self, a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Batched Jacobi-PCG; returns solutions and final relative residuals."""
        p_ = self.params
        batch = a.shape[0]
        b = np.broadcast_to(self.load, (batch,) + self.load.shape)
        inv_diag = 1.0 / self.diagonal(a)
        x = np.zeros_like(b)
        r = b.copy()
        z = inv_diag * r
        d = z.copy()
        rz = _dot(r, z)
        bnorm = np.sqrt(_dot(b, b))
        rnorm = bnorm.copy()
        active = rnorm > p_.rtol * bnorm
        it = 0
        while np.any(active):
            if it >= p_.max_cg_iter:
                raise SolverError(
                    f"CG did not reach {p_.rtol:g} on mesh {self.N} within {it} iterations"
                )
            Ad = self.apply(a, d)
            dAd = _dot(d, Ad)
            step = np.where(active, rz / np.where(active, dAd, 1.0), 0.0)
            x = x + step[:, None, None, None] * d
            r = r - step[:, None, None, None] * Ad
            rnorm = np.sqrt(_dot(r, r))
            z = inv_diag * r
            rz_new = _dot(r, z)
            still = active & (rnorm > p_.rtol * bnorm)
            mom = np.where(still, rz_new / np.where(active, rz, 1.0), 0.0)
            d = np.where(still[:, None, None, None], z + mom[:, None, None, None] * d, d)
            rz = np.where(still, rz_new, rz)
            active = still
            it += 1
        return x, rnorm / bnorm

    def qoi(self, u: np.ndarray) -> np.ndarray:
        return _dot(u, np.broadcast_to(self.qoi_weights, u.shape))


def _dot(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    # row-wise dot over a fixed contiguous layout, so each sample's value does
    # not depend on the batch it sits in
    n = x.shape[0]
    return np.einsum("ij,ij->i", x.reshape(n, -1), y.reshape(n, -1))


class EllipticSampler(Sampler):
    d = 3

    def __init__(self, params: EllipticProblemParams | None = None):
        self.params = params or EllipticProblemParams()
        self._meshes: dict = {}

    def mesh_size(self, alpha) -> tuple:
        p = self.params
        return tuple(p.base_mesh * int(round(p.beta)) ** int(a) for a in alpha)

    def mesh(self, alpha) -> _Mesh:
        N = self.mesh_size(alpha)
        if max(N) > self.params.max_elements:
            raise MemoryError(f"mesh {N} exceeds the limit of {self.params.max_elements} elements per direction")
        mesh = self._meshes.get(N)
        if mesh is None:
            # a benign race only builds an identical mesh twice
            mesh = self._meshes.setdefault(N, _Mesh(N, self.params))
        return mesh

    def draws(self, sample_ids, seed, key) -> np.ndarray:
        return 2.0 * uniforms(seed, key, sample_ids, 2) - 1.0

    def qoi_at(self, alpha, y: np.ndarray) -> np.ndarray:
        """QoI on mesh ``alpha`` for parameter rows ``y`` of shape ``(n, 2)``."""
        mesh = self.mesh(alpha)
        out = np.empty(y.shape[0])
        bs = self.params.batch_size
        for lo in range(0, y.shape[0], bs):
            out[lo:lo + bs] = mesh.solve_qoi(mesh.coefficient(y[lo:lo + bs]))
        return out

    def qoi(self, corners, sample_ids, seed, key):
        y = self.draws(sample_ids, seed, key)
        out = np.empty((y.shape[0], len(corners)))
        for c, alpha in enumerate(corners):
            out[:, c] = self.qoi_at(alpha, y)
        return out

    def work(self, corners):
        return float(sum(self.mesh(c).dofs ** self.params.work_exponent for c in corners))

    def dof(self, corners):
        return float(max(self.mesh(c).dofs for c in corners))

    def solution_slice_csv(self, alpha, y: Sequence[float], axis: int = 2, index: int | None = None) -> str:
        """Solution values on one grid plane as CSV (x, y, z, u), for debugging."""
        mesh = self.mesh(alpha)
        a = mesh.coefficient(np.asarray([y], dtype=float))
        u = (mesh.solve_banded(a) if mesh.method == "banded" else mesh.solve(a)[0])[0]
        if index is None:
            index = mesh.N[axis] // 2
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["x", "y", "z", "u"])
        grids = [np.linspace(0, 1, n + 1) for n in mesh.N]
        for ijk in itertools.product(*(range(n + 1) for n in mesh.N)):
            if ijk[axis] != index:
                continue
            writer.writerow([f"{grids[k][ijk[k]]:.17g}" for k in range(3)] + [f"{u[ijk]:.17g}"])
        return buf.getvalue()
