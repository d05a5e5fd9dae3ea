"""Two-component wavefields on a uniform 2-D grid.

The grid is cell-centered: node i sits at ``min + (i + 1/2) * h``, so no node
ever coincides with the coordinate origin (where the electronic basis of the
cone models is singular).  Fields carry two complex components ``g1`` (upper,
excited channel in the adiabatic picture) and ``g2`` (lower, ground channel).

Dumps use the CISCAT-FIELD v1 format: three ASCII header lines followed by
little-endian float64 payload, ``g1`` then ``g2``, each flattened row-major
with the xi index outermost and (re, im) interleaved.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import NamedTuple

import numpy as np
import scipy.fft as sfft

from .errors import FieldError, SingularBasisError

_MAGIC = "CISCAT-FIELD v1"


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid2D:
    """Uniform cell-centered grid over a rectangle.

    Parameters
    ----------
    n_xi, n_eta : int
        Node counts per axis; powers of two, at least 8 (FFT-friendly).
    xi_range, eta_range : (float, float)
        Box edges; nodes are offset half a cell from them.
    """

    n_xi: int
    n_eta: int
    xi_range: tuple[float, float]
    eta_range: tuple[float, float]

    def __post_init__(self):
        for n, name in ((self.n_xi, "n_xi"), (self.n_eta, "n_eta")):
            if not _is_pow2(n) or n < 8:
                raise FieldError(f"{name} must be a power of two >= 8, got {n}")
        for rng, name in ((self.xi_range, "xi_range"), (self.eta_range, "eta_range")):
            if not rng[1] > rng[0]:
                raise FieldError(f"{name} must be increasing, got {rng}")

    @property
    def h_xi(self) -> float:
        return (self.xi_range[1] - self.xi_range[0]) / self.n_xi

    @property
    def h_eta(self) -> float:
        return (self.eta_range[1] - self.eta_range[0]) / self.n_eta

    @property
    def cell_area(self) -> float:
        return self.h_xi * self.h_eta

    @property
    def xi(self) -> np.ndarray:
        """Node coordinates along xi (cell centers)."""
        return self.xi_range[0] + (np.arange(self.n_xi) + 0.5) * self.h_xi

    @property
    def eta(self) -> np.ndarray:
        return self.eta_range[0] + (np.arange(self.n_eta) + 0.5) * self.h_eta

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray]:
        """Node coordinate arrays of shape (n_xi, n_eta)."""
        return np.meshgrid(self.xi, self.eta, indexing="ij")

    def wavenumbers(self) -> tuple[np.ndarray, np.ndarray]:
        """FFT wavenumber arrays (1-D) conjugate to xi and eta."""
        k_xi = 2.0 * np.pi * sfft.fftfreq(self.n_xi, d=self.h_xi)
        k_eta = 2.0 * np.pi * sfft.fftfreq(self.n_eta, d=self.h_eta)
        return k_xi, k_eta

    def k_squared(self) -> np.ndarray:
        """|k|^2 on the spectral grid, shape (n_xi, n_eta)."""
        k_xi, k_eta = self.wavenumbers()
        return k_xi[:, None] ** 2 + k_eta[None, :] ** 2


@dataclass
class SpinorField:
    """Two-component complex field sampled on a Grid2D at one instant."""

    grid: Grid2D
    g1: np.ndarray
    g2: np.ndarray
    tau: float = 0.0

    def __post_init__(self):
        shape = (self.grid.n_xi, self.grid.n_eta)
        self.g1 = np.asarray(self.g1, dtype=np.complex128)
        self.g2 = np.asarray(self.g2, dtype=np.complex128)
        if self.g1.shape != shape or self.g2.shape != shape:
            raise FieldError(
                f"component shape {self.g1.shape}/{self.g2.shape} does not "
                f"match grid {shape}"
            )

    def copy(self) -> "SpinorField":
        return SpinorField(self.grid, self.g1.copy(), self.g2.copy(), self.tau)


class Populations(NamedTuple):
    ground: float
    excited: float


def zeros_like_field(grid: Grid2D, tau: float = 0.0) -> SpinorField:
    shape = (grid.n_xi, grid.n_eta)
    return SpinorField(grid, np.zeros(shape, np.complex128),
                       np.zeros(shape, np.complex128), tau)


def norm(field: SpinorField) -> float:
    """Total probability mass, cell-quadrature of |g1|^2 + |g2|^2."""
    total = (np.vdot(field.g1, field.g1).real
             + np.vdot(field.g2, field.g2).real) * field.grid.cell_area
    if not np.isfinite(total):
        raise FieldError("field norm is not finite")
    return float(total)


def _check_unitary(u: np.ndarray, tol: float = 1e-10) -> None:
    # u has shape (2, 2, ...); spot-check unitarity on the full array
    p00 = u[0, 0] * u[0, 0].conj() + u[0, 1] * u[0, 1].conj()
    p11 = u[1, 0] * u[1, 0].conj() + u[1, 1] * u[1, 1].conj()
    p01 = u[0, 0] * u[1, 0].conj() + u[0, 1] * u[1, 1].conj()
    err = max(np.abs(p00 - 1.0).max(), np.abs(p11 - 1.0).max(),
              np.abs(p01).max())
    if not err < tol:
        raise SingularBasisError(
            f"basis transform is not unitary (max deviation {err:.2e}); "
            "a node may coincide with a conical intersection"
        )


def apply_unitary(field: SpinorField, u: np.ndarray, dagger: bool = False,
                  check: bool = True) -> SpinorField:
    """Apply a nodewise 2x2 unitary u (shape (2, 2, n_xi, n_eta)) to a field."""
    if check:
        _check_unitary(u)
    if dagger:
        a, b = u[0, 0].conj(), u[1, 0].conj()
        c, d = u[0, 1].conj(), u[1, 1].conj()
    else:
        a, b, c, d = u[0, 0], u[0, 1], u[1, 0], u[1, 1]
    return SpinorField(field.grid,
                       a * field.g1 + b * field.g2,
                       c * field.g1 + d * field.g2,
                       field.tau)


def to_diabatic(field_adiabatic: SpinorField, unitary: np.ndarray) -> SpinorField:
    """Adiabatic -> diabatic picture: G = U F.

    ``unitary`` is the model's single-valued diagonalizer evaluated on the
    grid; its columns are the (excited, ground) adiabatic eigenvectors, so a
    pure ground-channel field F = (0, psi) maps to the ground eigenvector
    amplitude psi in the diabatic frame.
    """
    return apply_unitary(field_adiabatic, unitary, dagger=False)


def to_adiabatic(field_diabatic: SpinorField, unitary: np.ndarray) -> SpinorField:
    """Diabatic -> adiabatic picture: F = U^dag G (inverse of to_diabatic)."""
    return apply_unitary(field_diabatic, unitary, dagger=True)


def populations_in_basis(field_diabatic: SpinorField,
                         unitary: np.ndarray) -> Populations:
    """Probability mass on the (ground, excited) columns of a basis field."""
    f = to_adiabatic(field_diabatic, unitary)
    area = field_diabatic.grid.cell_area
    p_exc = float(np.vdot(f.g1, f.g1).real * area)
    p_gnd = float(np.vdot(f.g2, f.g2).real * area)
    if not (np.isfinite(p_gnd) and np.isfinite(p_exc)):
        raise FieldError("populations are not finite")
    return Populations(ground=p_gnd, excited=p_exc)


def adiabatic_populations(field_diabatic: SpinorField, model) -> Populations:
    """Probability mass on the ground and excited branches of ``model``.

    ``model`` must provide ``unitary(x, y)``, the nodewise single-valued
    diagonalizer whose columns are the (excited, ground) eigenvectors.
    """
    xx, yy = field_diabatic.grid.meshgrid()
    return populations_in_basis(field_diabatic, model.unitary(xx, yy))


def forward_spectrum(field: SpinorField, workers: int = 1):
    """Unitary (norm-preserving) 2-D FFT of both components."""
    k1 = sfft.fft2(field.g1, norm="ortho", workers=workers)
    k2 = sfft.fft2(field.g2, norm="ortho", workers=workers)
    return k1, k2


def inverse_spectrum(grid: Grid2D, k1: np.ndarray, k2: np.ndarray,
                     tau: float = 0.0, workers: int = 1) -> SpinorField:
    g1 = sfft.ifft2(k1, norm="ortho", workers=workers)
    g2 = sfft.ifft2(k2, norm="ortho", workers=workers)
    return SpinorField(grid, g1, g2, tau)


def spectral_roundtrip(field: SpinorField, workers: int = 1) -> SpinorField:
    """Forward then inverse transform; identity up to float roundoff."""
    k1, k2 = forward_spectrum(field, workers=workers)
    return inverse_spectrum(field.grid, k1, k2, field.tau, workers=workers)


def mean_wavenumber_xi(field: SpinorField) -> float:
    """Spectral expectation of k_xi over both components."""
    k1, k2 = forward_spectrum(field)
    w = (np.abs(k1) ** 2 + np.abs(k2) ** 2)
    k_xi, _ = field.grid.wavenumbers()
    total = w.sum()
    if total == 0.0:
        raise FieldError("cannot take mean wavenumber of an empty field")
    return float((k_xi[:, None] * w).sum() / total)


# ---------------------------------------------------------------------------
# CISCAT-FIELD v1 dump format
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def write_field(field: SpinorField, path, encoding: str = "binary") -> None:
    """Write a field dump (CISCAT-FIELD v1).

    Header: three ASCII lines (magic+version; grid shape, box and time;
    encoding).  Payload: g1 then g2, xi index outermost, little-endian
    float64 with re/im interleaved; the ascii encoding writes one "re im"
    pair per line in the same order.
    """
    if encoding not in ("binary", "ascii"):
        raise FieldError(f"unknown encoding {encoding!r}")
    g = field.grid
    header = (
        f"{_MAGIC}\n"
        f"{g.n_xi} {g.n_eta} {_fmt(g.xi_range[0])} {_fmt(g.xi_range[1])} "
        f"{_fmt(g.eta_range[0])} {_fmt(g.eta_range[1])} {_fmt(field.tau)}\n"
        f"encoding {encoding}\n"
    )
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        if encoding == "binary":
            fh.write(np.ascontiguousarray(field.g1, dtype="<c16").tobytes())
            fh.write(np.ascontiguousarray(field.g2, dtype="<c16").tobytes())
        else:
            lines = []
            for comp in (field.g1, field.g2):
                flat = comp.ravel(order="C")
                lines.extend(f"{_fmt(v.real)} {_fmt(v.imag)}" for v in flat)
            fh.write(("\n".join(lines) + "\n").encode("ascii"))


def read_field(path) -> SpinorField:
    """Read a CISCAT-FIELD v1 dump written by :func:`write_field`."""
    path = Path(path)
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        l1, rest = raw.split(b"\n", 1)
        l2, rest = rest.split(b"\n", 1)
        l3, payload = rest.split(b"\n", 1)
    except ValueError:
        raise FieldError(f"{path}: truncated header") from None
    if l1.decode("ascii", "replace") != _MAGIC:
        raise FieldError(f"{path}: bad magic line {l1!r}")
    parts = l2.decode("ascii").split()
    if len(parts) != 7:
        raise FieldError(f"{path}: malformed geometry line")
    n_xi, n_eta = int(parts[0]), int(parts[1])
    xi_min, xi_max, eta_min, eta_max, tau = map(float, parts[2:])
    enc_parts = l3.decode("ascii").split()
    if len(enc_parts) != 2 or enc_parts[0] != "encoding":
        raise FieldError(f"{path}: malformed encoding line")
    encoding = enc_parts[1]
    grid = Grid2D(n_xi, n_eta, (xi_min, xi_max), (eta_min, eta_max))
    count = n_xi * n_eta
    if encoding == "binary":
        expected = 2 * count * 16
        if len(payload) != expected:
            raise FieldError(
                f"{path}: payload is {len(payload)} bytes, expected {expected}")
        data = np.frombuffer(payload, dtype="<c16")
    elif encoding == "ascii":
        values = np.array(payload.split(), dtype=np.float64)
        if values.size != 4 * count:
            raise FieldError(
                f"{path}: payload has {values.size} numbers, expected {4 * count}")
        data = values[0::2] + 1j * values[1::2]
    else:
        raise FieldError(f"{path}: unknown encoding {encoding!r}")
    g1 = data[:count].reshape(n_xi, n_eta).astype(np.complex128)
    g2 = data[count:].reshape(n_xi, n_eta).astype(np.complex128)
    return SpinorField(grid, g1, g2, tau)
