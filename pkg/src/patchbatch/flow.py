"""Flow and descriptor containers plus their file formats.

PBFL1 flow files are an ASCII header line ``PBFL1 <width> <height>``
followed by ``height * width`` packed little-endian records
``(float32 u, float32 v, uint8 valid)`` in row-major order.
"""
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError

PBFL1_RECORD = np.dtype([("u", "<f4"), ("v", "<f4"), ("valid", "u1")])


@dataclass
class DescriptorField:
    """``[H, W, D]`` descriptors; ``mask`` flags pixels that carry one."""

    data: np.ndarray
    mask: np.ndarray = None

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 3 or min(self.data.shape[:2]) < 1:
            raise DimensionError(f"descriptor field must be [H, W, D], got {self.data.shape}")
        if self.mask is None:
            self.mask = np.ones(self.data.shape[:2], dtype=bool)
        self.mask = np.asarray(self.mask, dtype=bool)

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def dim(self):
        return self.data.shape[2]


@dataclass
class FlowField:
    """Sparse flow: displacement ``(u, v)`` per pixel plus a validity mask.

    Pixel ``(x, y)`` of the source maps to ``(x + u, y + v)``; ``u`` runs
    along columns and ``v`` along rows.
    """

    u: np.ndarray
    v: np.ndarray
    valid: np.ndarray = None

    def __post_init__(self):
        self.u = np.asarray(self.u)
        self.v = np.asarray(self.v)
        if self.u.ndim != 2 or self.u.shape != self.v.shape:
            raise DimensionError(f"u {self.u.shape} and v {self.v.shape} must be equal 2-D grids")
        if self.valid is None:
            self.valid = np.ones(self.u.shape, dtype=bool)
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.valid.shape != self.u.shape:
            raise DimensionError("validity mask does not match the flow grid")

    @property
    def shape(self):
        return self.u.shape

    def with_valid(self, valid):
        return FlowField(self.u.copy(), self.v.copy(), valid)

    def copy(self):
        return FlowField(self.u.copy(), self.v.copy(), self.valid.copy())


@dataclass
class DenseFlow:
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=np.float64)
        self.v = np.asarray(self.v, dtype=np.float64)
        if self.u.ndim != 2 or self.u.shape != self.v.shape:
            raise DimensionError("u and v must be equal 2-D grids")

    @property
    def shape(self):
        return self.u.shape

    def as_flow_field(self):
        return FlowField(self.u, self.v, np.ones(self.u.shape, dtype=bool))


def write_pbfl1(path, flow):
    """Write a :class:`FlowField` or :class:`DenseFlow` (dense = all valid)."""
    if isinstance(flow, DenseFlow):
        flow = flow.as_flow_field()
    h, w = flow.shape
    rec = np.empty((h, w), dtype=PBFL1_RECORD)
    rec["u"] = flow.u
    rec["v"] = flow.v
    rec["valid"] = flow.valid
    with open(path, "wb") as fh:
        fh.write(f"PBFL1 {w} {h}\n".encode("ascii"))
        fh.write(rec.tobytes())


def read_pbfl1(path):
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").split()
        if len(header) != 3 or header[0] != "PBFL1":
            raise DomainError(f"{path}: not a PBFL1 file")
        w, h = int(header[1]), int(header[2])
        body = fh.read()
    if len(body) != w * h * PBFL1_RECORD.itemsize:
        raise DomainError(f"{path}: expected {w * h} records, file holds {len(body)} bytes")
    rec = np.frombuffer(body, dtype=PBFL1_RECORD).reshape(h, w)
    return FlowField(rec["u"].astype(np.float64), rec["v"].astype(np.float64), rec["valid"] != 0)


def _pgm_tokens(fh, count):
    tokens = []
    while len(tokens) < count:
        line = fh.readline()
        if not line:
            raise DomainError("truncated PGM header")
        line = line.split(b"#", 1)[0]
        tokens += line.split()
    return tokens


def read_pgm(path):
    """Read a binary (P5) PGM as a float64 array of raw grey levels."""
    with open(path, "rb") as fh:
        magic, w, h, maxval = _pgm_tokens(fh, 4)[:4]
        if magic != b"P5":
            raise DomainError(f"{path}: only binary P5 PGM is supported")
        w, h, maxval = int(w), int(h), int(maxval)
        dtype = ">u2" if maxval > 255 else "u1"
        data = np.frombuffer(fh.read(), dtype=dtype, count=w * h)
    return data.reshape(h, w).astype(np.float64)


def write_pgm(path, image):
    """Write an image as 8-bit P5; values are clipped to [0, 255] and rounded."""
    img = np.clip(np.rint(np.asarray(image, dtype=np.float64)), 0, 255).astype(np.uint8)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())
