"""Binary container for morphable models.

Layout (all little-endian):

    bytes 0..6   magic ``PW3DMM\\0``
    u32          version (currently 1)
    u32          n_vertices N
    u32          K_id
    u32          K_exp
    u32          n_triangles T
    u32          flags (bit 0: basis_scales present)
    f32[3N]      mean_shape
    f32[3N*K_id] id_basis, column-major
    f32[3N*K_exp] exp_basis, column-major
    u32[68]      landmark_indices
    u32[3T]      triangles, row-major triples
    f32[K_id+K_exp] basis_scales (only if flag set)

Save-then-load is the identity on every field (arrays are held as
float32/int32 in memory, so no precision is lost).
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import ModelFormatError
from .morphable import MorphableModel, N_LANDMARKS

MAGIC = b"PW3DMM\x00"
VERSION = 1

_FLAG_BASIS_SCALES = 1


def save_model(model: MorphableModel, path) -> None:
    """Write a model to the binary container format."""
    path = Path(path)
    flags = _FLAG_BASIS_SCALES if model.basis_scales is not None else 0
    n_tri = model.triangles.shape[0]
    header = MAGIC + struct.pack(
        "<6I", VERSION, model.n_vertices, model.k_id, model.k_exp, n_tri, flags
    )
    chunks = [
        header,
        model.mean_shape.astype("<f4").tobytes(),
        np.asfortranarray(model.id_basis.astype("<f4")).tobytes(order="F"),
        np.asfortranarray(model.exp_basis.astype("<f4")).tobytes(order="F"),
        model.landmark_indices.astype("<u4").tobytes(),
        model.triangles.astype("<u4").tobytes(),
    ]
    if model.basis_scales is not None:
        chunks.append(model.basis_scales.astype("<f4").tobytes())
    path.write_bytes(b"".join(chunks))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise ModelFormatError(f"truncated payload while reading {what}")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]

    def f32_array(self, count: int, what: str) -> np.ndarray:
        return np.frombuffer(self.take(4 * count, what), dtype="<f4").copy()

    def u32_array(self, count: int, what: str) -> np.ndarray:
        return np.frombuffer(self.take(4 * count, what), dtype="<u4").copy()


def load_model(path) -> MorphableModel:
    """Read a model container; raises ModelFormatError naming any bad field."""
    data = Path(path).read_bytes()
    r = _Reader(data)
    if r.take(len(MAGIC), "magic") != MAGIC:
        raise ModelFormatError("bad magic: not a PW3DMM container")
    version = r.u32("version")
    if version != VERSION:
        raise ModelFormatError(f"version: unsupported value {version}")
    n = r.u32("n_vertices")
    if n < 1:
        raise ModelFormatError("n_vertices: must be >= 1")
    k_id = r.u32("K_id")
    k_exp = r.u32("K_exp")
    n_tri = r.u32("n_triangles")
    flags = r.u32("flags")
    if flags & ~_FLAG_BASIS_SCALES:
        raise ModelFormatError(f"flags: unknown bits 0x{flags:x}")

    mean = r.f32_array(3 * n, "mean_shape")
    id_basis = r.f32_array(3 * n * k_id, "id_basis").reshape((3 * n, k_id), order="F")
    exp_basis = r.f32_array(3 * n * k_exp, "exp_basis").reshape((3 * n, k_exp), order="F")
    landmarks = r.u32_array(N_LANDMARKS, "landmark_indices")
    if (landmarks >= n).any():
        raise ModelFormatError("landmark_indices: index out of range")
    tris = r.u32_array(3 * n_tri, "triangles").reshape(-1, 3)
    if tris.size and tris.max() >= n:
        raise ModelFormatError("triangles: vertex index out of range")
    scales = None
    if flags & _FLAG_BASIS_SCALES:
        scales = r.f32_array(k_id + k_exp, "basis_scales")
        if (scales <= 0).any():
            raise ModelFormatError("basis_scales: non-positive entry")
    if r.pos != len(data):
        raise ModelFormatError(f"trailing data: {len(data) - r.pos} unexpected bytes")

    return MorphableModel(
        n_vertices=n,
        mean_shape=mean,
        id_basis=id_basis,
        exp_basis=exp_basis,
        landmark_indices=landmarks.astype(np.int32),
        triangles=tris.astype(np.int32),
        basis_scales=scales,
    )
