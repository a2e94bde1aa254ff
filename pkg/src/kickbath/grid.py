"""Chord function storage on a uniform, origin-centred (k, s) grid."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "GridError",
    "GridFormatError",
    "BadMagicError",
    "HeaderError",
    "DimensionMismatchError",
    "TruncatedPayloadError",
    "GridSpec",
    "ChordState",
    "coherent_state",
    "sample",
    "bilinear_sample",
    "hermitian_defect",
    "write_grid",
    "read_grid",
    "write_real_grid",
    "read_real_grid",
    "read_header",
    "CHORD_MAGIC",
    "WIGNER_MAGIC",
]

CHORD_MAGIC = "CHORD1"
WIGNER_MAGIC = "WIGNR1"
_SEPARATOR = "---"


class GridError(ValueError):
    pass


class GridFormatError(GridError):
    """Base class for grid file parse errors."""


class BadMagicError(GridFormatError):
    pass


class HeaderError(GridFormatError):
    pass


class DimensionMismatchError(GridFormatError):
    pass


class TruncatedPayloadError(GridFormatError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid spanning ``[-k_max, k_max] x [-s_max, s_max]``.

    Point counts are odd so that the origin and both axes are nodes.
    In ``commensurate_mode`` the kick displacement ``sqrt(2)*eta`` is expected
    to be an integer multiple of ``dk``; :meth:`commensurate` builds such grids.
    """

    nk: int
    ns: int
    k_max: float
    s_max: float
    commensurate_mode: bool = field(default=False, compare=False)

    def __post_init__(self):
        for name in ("nk", "ns"):
            n = getattr(self, name)
            if int(n) != n or n < 17 or n % 2 == 0:
                raise GridError(f"{name} must be an odd integer >= 17, got {n}")
        for name in ("k_max", "s_max"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise GridError(f"{name} must be positive and finite, got {v}")

    @classmethod
    def square(cls, n: int, extent: float, commensurate_mode: bool = False) -> "GridSpec":
        return cls(n, n, extent, extent, commensurate_mode)

    @classmethod
    def commensurate(cls, n: int, extent: float, shift: float, ns: int | None = None,
                     s_max: float | None = None) -> "GridSpec":
        """Grid whose ``dk`` divides ``shift`` exactly, with ``k_max`` close to ``extent``.

        When ``s_max`` is not given, ``ds = dk`` (square cells).
        """
        half = (n - 1) // 2
        stride = max(1, round(shift * half / extent))
        dk = shift / stride
        k_max = half * dk
        ns = n if ns is None else ns
        if s_max is None:
            s_max = (ns - 1) // 2 * dk
        return cls(n, ns, k_max, s_max, True)

    @property
    def ck(self) -> int:
        return (self.nk - 1) // 2

    @property
    def cs(self) -> int:
        return (self.ns - 1) // 2

    @property
    def dk(self) -> float:
        return 2.0 * self.k_max / (self.nk - 1)

    @property
    def ds(self) -> float:
        return 2.0 * self.s_max / (self.ns - 1)

    @property
    def shape(self) -> tuple[int, int]:
        # rows are s, columns k: k is the fastest index
        return (self.ns, self.nk)

    @property
    def k(self) -> np.ndarray:
        return np.arange(-self.ck, self.ck + 1) * self.dk

    @property
    def s(self) -> np.ndarray:
        return np.arange(-self.cs, self.cs + 1) * self.ds

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """``(K, S)`` coordinate arrays of shape :attr:`shape`."""
        return np.meshgrid(self.k, self.s)

    @property
    def is_square(self) -> bool:
        return self.nk == self.ns and self.dk == self.ds

    def stride_for(self, shift: float, rtol: float = 1e-9) -> int | None:
        """Integer node stride equal to ``shift``, or ``None`` if not commensurate."""
        ratio = shift / self.dk
        m = round(ratio)
        if m >= 1 and abs(ratio - m) <= rtol * max(1.0, ratio):
            return int(m)
        return None


@dataclass
class ChordState:
    """Chord function ``w(k, s)`` sampled on ``grid``.

    ``values[i, j]`` holds ``w(k_j, s_i)``.  ``boundary_leak`` counts reads
    outside the grid that could have picked up a non-negligible value.
    """

    grid: GridSpec
    values: np.ndarray
    tau: float = 0.0
    n_kicks: int = 0
    boundary_leak: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.complex128)
        if self.values.shape != self.grid.shape:
            raise GridError(
                f"values shape {self.values.shape} does not match grid {self.grid.shape}"
            )

    @property
    def trace(self) -> complex:
        return complex(self.values[self.grid.cs, self.grid.ck])

    def copy(self) -> "ChordState":
        return replace(self, values=self.values.copy())

    def evolve(self, values, *, dtau: float = 0.0, kicks: int = 0, leaks: int = 0) -> "ChordState":
        return ChordState(self.grid, values, self.tau + dtau, self.n_kicks + kicks,
                          self.boundary_leak + leaks)


def coherent_state(grid: GridSpec, x0: float = 0.0, p0: float = 0.0) -> ChordState:
    """Chord function of the coherent state centred at ``(x0, p0)``."""
    K, S = grid.mesh()
    w = np.exp(1j * (x0 * K + p0 * S) - (K**2 + S**2) / 4.0)
    return ChordState(grid, w)


def bilinear_sample(values: np.ndarray, grid: GridSpec, k, s):
    """Bilinear interpolation at points ``(k, s)``; outside points give 0.

    Returns ``(result, outside_mask)``.
    """
    k = np.asarray(k, dtype=float)
    s = np.asarray(s, dtype=float)
    x = k / grid.dk + grid.ck
    y = s / grid.ds + grid.cs
    eps = 1e-12
    outside = (x < -eps) | (x > grid.nk - 1 + eps) | (y < -eps) | (y > grid.ns - 1 + eps)
    x = np.clip(x, 0.0, grid.nk - 1)
    y = np.clip(y, 0.0, grid.ns - 1)
    j0 = np.minimum(np.floor(x).astype(np.intp), grid.nk - 2)
    i0 = np.minimum(np.floor(y).astype(np.intp), grid.ns - 2)
    t = x - j0
    u = y - i0
    v00 = values[i0, j0]
    v01 = values[i0, j0 + 1]
    v10 = values[i0 + 1, j0]
    v11 = values[i0 + 1, j0 + 1]
    out = (1 - u) * ((1 - t) * v00 + t * v01) + u * ((1 - t) * v10 + t * v11)
    # exact on nodes
    on_node = (t == 0.0) & (u == 0.0)
    out = np.where(on_node, v00, out)
    out = np.where(outside, 0.0, out)
    return out, outside


def sample(state: ChordState, k: float, s: float) -> complex:
    """Bilinear point evaluation; reads outside the grid return 0 and count as a leak."""
    value, outside = bilinear_sample(state.values, state.grid, k, s)
    if bool(outside):
        state.boundary_leak += 1
    return complex(value)


def hermitian_defect(values: np.ndarray) -> float:
    """``max |w(-k,-s) - conj(w(k,s))|`` over all nodes."""
    return float(np.max(np.abs(values[::-1, ::-1] - np.conj(values))))


# -- file format -----------------------------------------------------------------------

def _format_header(magic, n1, n2, e1, e2, tau, n_kicks) -> bytes:
    lines = [magic, f"{n1} {n2}", f"{float(e1)!r} {float(e2)!r}",
             f"{float(tau)!r} {int(n_kicks)}", _SEPARATOR]
    return ("\n".join(lines) + "\n").encode("ascii")


def _write(path, header: bytes, payload: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload.astype("<f8", copy=False).tobytes(order="C"))


def write_grid(state: ChordState, path: str | os.PathLike) -> None:
    """Write a ``CHORD1`` file: ASCII header then interleaved little-endian (re, im)."""
    g = state.grid
    header = _format_header(CHORD_MAGIC, g.nk, g.ns, g.k_max, g.s_max, state.tau, state.n_kicks)
    payload = np.ascontiguousarray(state.values, dtype=np.complex128).view(np.float64)
    _write(path, header, payload)


def write_real_grid(path, values: np.ndarray, x_max: float, y_max: float,
                    tau: float = 0.0, n_kicks: int = 0, magic: str = WIGNER_MAGIC) -> None:
    """Write a real field (``WIGNR1``); ``values[i, j]`` is row ``y_i``, column ``x_j``."""
    ny, nx = values.shape
    header = _format_header(magic, nx, ny, x_max, y_max, tau, n_kicks)
    _write(path, header, np.ascontiguousarray(values, dtype=np.float64))


@dataclass
class _Header:
    magic: str
    n1: int
    n2: int
    e1: float
    e2: float
    tau: float
    n_kicks: int
    offset: int = field(repr=False, default=0)


def _parse_header(data: bytes, expected_magic: str | None) -> _Header:
    lines = []
    pos = 0
    for _ in range(5):
        nl = data.find(b"\n", pos)
        if nl < 0:
            if not lines and expected_magic is not None:
                first = data[:len(expected_magic)].decode("ascii", "replace")
                if first != expected_magic[:len(first)]:
                    raise BadMagicError(f"bad magic {first!r}")
            raise HeaderError("incomplete header")
        try:
            lines.append(data[pos:nl].decode("ascii"))
        except UnicodeDecodeError:
            if not lines:
                raise BadMagicError("bad magic: header is not ASCII") from None
            raise HeaderError("header is not ASCII") from None
        pos = nl + 1
    magic = lines[0].strip()
    allowed = (CHORD_MAGIC, WIGNER_MAGIC) if expected_magic is None else (expected_magic,)
    if magic not in allowed:
        raise BadMagicError(f"bad magic {magic!r}, expected one of {allowed}")
    if lines[4].strip() != _SEPARATOR:
        raise HeaderError("missing '---' header terminator")
    try:
        n1, n2 = (int(x) for x in lines[1].split())
        e1, e2 = (float(x) for x in lines[2].split())
        tau_s, nk_s = lines[3].split()
        tau, n_kicks = float(tau_s), int(nk_s)
    except ValueError as exc:
        raise HeaderError(f"malformed header: {exc}") from None
    if n1 <= 0 or n2 <= 0:
        raise DimensionMismatchError(f"non-positive dimensions {n1} x {n2}")
    return _Header(magic, n1, n2, e1, e2, tau, n_kicks, pos)


def _payload(data: bytes, h: _Header, per_node: int) -> np.ndarray:
    expected = h.n1 * h.n2 * per_node * 8
    got = len(data) - h.offset
    if got < expected:
        raise TruncatedPayloadError(f"truncated payload: {got} of {expected} bytes")
    if got > expected:
        raise DimensionMismatchError(
            f"payload has {got} bytes but header dimensions {h.n1} x {h.n2} imply {expected}"
        )
    return np.frombuffer(data, dtype="<f8", offset=h.offset, count=h.n1 * h.n2 * per_node)


def read_header(path) -> dict:
    with open(path, "rb") as fh:
        data = fh.read(4096)
    h = _parse_header(data, None)
    return dict(magic=h.magic, n1=h.n1, n2=h.n2, extent1=h.e1, extent2=h.e2,
                tau=h.tau, n_kicks=h.n_kicks)


def read_grid(path: str | os.PathLike) -> ChordState:
    """Inverse of :func:`write_grid`; bit-identical round trip."""
    with open(path, "rb") as fh:
        data = fh.read()
    h = _parse_header(data, CHORD_MAGIC)
    raw = _payload(data, h, 2)
    try:
        grid = GridSpec(h.n1, h.n2, h.e1, h.e2)
    except GridError as exc:
        raise DimensionMismatchError(str(exc)) from None
    values = raw.astype(np.float64).view(np.complex128).reshape(h.n2, h.n1).copy()
    return ChordState(grid, values, h.tau, h.n_kicks)


def read_real_grid(path, magic: str = WIGNER_MAGIC):
    """Read a real field; returns ``(values, x_max, y_max, tau, n_kicks)``."""
    with open(path, "rb") as fh:
        data = fh.read()
    h = _parse_header(data, magic)
    raw = _payload(data, h, 1)
    return raw.astype(np.float64).reshape(h.n2, h.n1), h.e1, h.e2, h.tau, h.n_kicks
