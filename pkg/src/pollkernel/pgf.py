"""Truncated joint PGFs and their torus-grid transforms.

A joint PGF ``E[prod z_m^{N_m}]`` is stored as its coefficient tensor of
shape ``(n_max + 1,) * M``.  Evaluating on the product of ``G``-th roots of
unity is an inverse DFT and coefficient extraction is a forward DFT, which is
the trapezoidal rule applied to the Cauchy integral over the unit circle and
is exact for per-axis degree ``<= G - 1``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError, NegativeMass

POLYDISC_TOL = 1e-12


@dataclass(frozen=True)
class CoeffTensor:
    coeffs: np.ndarray
    epoch: str | None = None

    @property
    def M(self) -> int:
        return self.coeffs.ndim

    @property
    def n_max(self) -> int:
        return self.coeffs.shape[0] - 1

    def total_mass(self) -> float:
        return float(np.real(self.coeffs.sum()))

    def with_epoch(self, epoch: str) -> "CoeffTensor":
        return replace(self, epoch=epoch)


def point_mass(M: int, n_max: int, index=None, epoch=None) -> CoeffTensor:
    c = np.zeros((n_max + 1,) * M)
    c[tuple(index) if index is not None else (0,) * M] = 1.0
    return CoeffTensor(c, epoch)


def from_array(arr, epoch=None) -> CoeffTensor:
    arr = np.asarray(arr)
    if len(set(arr.shape)) > 1:
        raise ValueError(f"coefficient tensor must be hyper-cubic, got shape {arr.shape}")
    return CoeffTensor(arr, epoch)


def resize(t: CoeffTensor, n_max: int) -> CoeffTensor:
    """Zero-pad or truncate every axis to ``n_max + 1`` entries."""
    c = t.coeffs
    old = c.shape[0]
    if n_max + 1 <= old:
        return CoeffTensor(c[(slice(0, n_max + 1),) * c.ndim].copy(), t.epoch)
    out = np.zeros((n_max + 1,) * c.ndim, dtype=c.dtype)
    out[(slice(0, old),) * c.ndim] = c
    return CoeffTensor(out, t.epoch)


def _check_polydisc(z):
    if np.any(np.abs(z) > 1 + POLYDISC_TOL):
        raise DomainError("point outside the closed unit polydisc")


def contract_points(coeffs: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Evaluate polynomials batched over the leading axis.

    ``coeffs`` has shape ``(A, n_1, ..., n_d)`` and ``z`` has shape ``(P, d)``;
    returns ``(A, P)`` with ``sum_n coeffs[a, n] prod_m z[p, m]^{n_m}``.
    """
    z = np.asarray(z, dtype=complex)
    d = z.shape[1]
    if d == 0:
        return np.repeat(coeffs.reshape(coeffs.shape[0], 1), z.shape[0], axis=1).astype(complex)
    V = z[:, 0, None] ** np.arange(coeffs.shape[1])
    res = np.einsum("aj...,pj->ap...", coeffs, V)
    for m in range(1, d):
        V = z[:, m, None] ** np.arange(res.shape[2])
        res = np.einsum("apj...,pj->ap...", res, V)
    return res


def evaluate_at(t: CoeffTensor, z) -> complex | np.ndarray:
    """``sum_n coeffs[n] z^n`` at one point ``(M,)`` or a batch ``(P, M)``."""
    z = np.asarray(z, dtype=complex)
    _check_polydisc(z)
    single = z.ndim == 1
    pts = z.reshape(1, -1) if single else z
    if pts.shape[1] != t.M:
        raise ValueError(f"point has {pts.shape[1]} coordinates, tensor has {t.M} axes")
    out = contract_points(t.coeffs[None, ...], pts)[0]
    return out[0] if single else out


# --------------------------------------------------------------------------
# torus grids


@dataclass(frozen=True)
class TorusGrid:
    G: int
    M: int

    @property
    def nodes(self) -> np.ndarray:
        return np.exp(2j * np.pi * np.arange(self.G) / self.G)

    def points(self, axes=None) -> np.ndarray:
        """Product points over ``axes`` (default all) in C order, shape ``(G**d, d)``."""
        d = self.M if axes is None else len(axes)
        if d == 0:
            return np.zeros((1, 0), dtype=complex)
        mesh = np.meshgrid(*([self.nodes] * d), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def reduced_points(self, i: int) -> np.ndarray:
        return self.points(axes=[m for m in range(self.M) if m != i])


def default_grid_size(n_max: int) -> int:
    """Smallest power of two >= 2 (n_max + 1)."""
    return 1 << int(np.ceil(np.log2(2 * (n_max + 1))))


def tensor_to_grid(t: CoeffTensor, grid: TorusGrid | int) -> np.ndarray:
    G = grid.G if isinstance(grid, TorusGrid) else int(grid)
    if G < t.n_max + 1:
        raise ValueError(f"grid size {G} too small for n_max={t.n_max}")
    return np.fft.ifftn(t.coeffs, s=(G,) * t.M, axes=tuple(range(t.M)), norm="forward")


def grid_to_tensor(values: np.ndarray, n_max: int, epoch=None) -> CoeffTensor:
    G = values.shape[0]
    if G < n_max + 1:
        raise ValueError(f"grid size {G} too small for n_max={n_max}")
    coeffs = np.fft.fftn(values, norm="forward")
    return CoeffTensor(coeffs[(slice(0, n_max + 1),) * values.ndim], epoch)


def served_sections(t: CoeffTensor, i: int, zred=None, G: int | None = None) -> np.ndarray:
    """Split ``t`` along axis ``i`` and evaluate each slice on the reduced torus.

    Returns ``S`` with ``S[v, p] = E[1{N_i = v} prod_{m != i} z_m^{N_m}]`` at
    reduced point ``p``.  With ``G`` the points are the reduced grid (FFT
    path, C order); otherwise ``zred`` of shape ``(P, M - 1)`` is used.
    """
    c = np.moveaxis(t.coeffs, i, 0)
    n1 = c.shape[0]
    if G is not None:
        if t.M == 1:
            return c.reshape(n1, 1).astype(complex)
        axes = tuple(range(1, t.M))
        vals = np.fft.ifftn(c, s=(G,) * (t.M - 1), axes=axes, norm="forward")
        return vals.reshape(n1, -1)
    zred = np.asarray(zred, dtype=complex)
    _check_polydisc(zred)
    return contract_points(c, zred)


def sections_at(S: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``sum_v S[v, p] w[p, ...]^v`` by Horner; ``w`` is ``(P,)`` or ``(P, G)``."""
    w = np.asarray(w, dtype=complex)
    extra = (None,) * (w.ndim - 1)
    acc = np.zeros(w.shape, dtype=complex)
    for v in range(S.shape[0] - 1, -1, -1):
        acc = acc * w + S[v][(slice(None),) + extra]
    return acc


# --------------------------------------------------------------------------
# functionals


def marginal(t: CoeffTensor, i: int) -> np.ndarray:
    axes = tuple(m for m in range(t.M) if m != i)
    return np.real(t.coeffs.sum(axis=axes)) if axes else np.real(t.coeffs).copy()


def mean(t: CoeffTensor, i: int) -> float:
    p = marginal(t, i)
    return float(np.dot(np.arange(p.size), p))


def slice_fix(t: CoeffTensor, i: int, v: int, keep_exponent: bool = False) -> CoeffTensor:
    """``E[1{N_i = v} z^N]`` with the ``z_i^v`` factor kept or dropped."""
    if not 0 <= v <= t.n_max:
        raise IndexError(f"slice index {v} outside 0..{t.n_max}")
    out = np.zeros_like(t.coeffs)
    src = [slice(None)] * t.M
    dst = [slice(None)] * t.M
    src[i] = v
    dst[i] = v if keep_exponent else 0
    out[tuple(dst)] = t.coeffs[tuple(src)]
    return CoeffTensor(out, t.epoch)


def total_variation(p, q) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    n = max(p.size, q.size)
    p = np.pad(p, (0, n - p.size))
    q = np.pad(q, (0, n - q.size))
    return 0.5 * float(np.abs(p - q).sum())


@dataclass
class Projection:
    tensor: CoeffTensor
    max_imag: float
    min_real: float
    drift: float


def project_to_probability(t: CoeffTensor, tol_im=1e-9, tol_neg=1e-9, renorm_tol=1e-6) -> Projection:
    """Drop FFT noise: imaginary parts, tiny negatives, small mass drift.

    Raises :class:`NegativeMass` when the noise exceeds the tolerances, so
    that a kernel bug is never hidden by the clean-up.
    """
    c = t.coeffs
    max_imag = float(np.max(np.abs(np.imag(c)))) if np.iscomplexobj(c) else 0.0
    re = np.real(c).astype(float)
    min_real = float(re.min())
    if max_imag > tol_im:
        raise NegativeMass(f"imaginary residue {max_imag:.3e} exceeds {tol_im:.1e}")
    if min_real < -tol_neg:
        raise NegativeMass(f"coefficient {min_real:.3e} below -{tol_neg:.1e}")
    re = np.clip(re, 0.0, None)
    mass = re.sum()
    drift = abs(1.0 - mass)
    if drift > renorm_tol:
        raise NegativeMass(f"mass drift {drift:.3e} exceeds renormalisation tolerance {renorm_tol:.1e}")
    return Projection(CoeffTensor(re / mass, t.epoch), max_imag, min_real, drift)


# --------------------------------------------------------------------------
# export


def marginal_csv(prob) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "prob"])
    for n, p in enumerate(prob):
        w.writerow([n, f"{float(p):.10e}"])
    return buf.getvalue()


def read_marginal_csv(text: str) -> np.ndarray:
    rows = list(csv.DictReader(io.StringIO(text)))
    return np.array([float(r["prob"]) for r in rows])


def tensor_to_json(t: CoeffTensor) -> str:
    c = np.asarray(t.coeffs, dtype=complex)
    return json.dumps(
        {
            "shape": list(c.shape),
            "epoch": t.epoch,
            "real": np.real(c).ravel().tolist(),
            "imag": np.imag(c).ravel().tolist(),
        }
    )


def tensor_from_json(text: str) -> CoeffTensor:
    d = json.loads(text)
    c = np.array(d["real"]) + 1j * np.array(d["imag"])
    c = c.reshape(d["shape"])
    if not np.any(np.imag(c)):
        c = np.real(c)
    return CoeffTensor(c, d.get("epoch"))
