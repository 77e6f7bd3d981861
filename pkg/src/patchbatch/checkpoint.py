"""PBNET1 model checkpoints.

Layout (all integers little-endian):

    b"PBNET1"
    uint32 layer_count
    uint32 input_rank, uint32 input_shape[input_rank]
    per layer:  uint8 kind_len, kind (ascii),
                uint8 n_ints,   uint32 ints[n_ints],
                uint8 n_floats, float64 floats[n_floats]
    per layer, in order: parameter arrays, then buffers (batch-norm running
    statistics), each as row-major float64 data.

Array shapes are implied by the layer descriptors, so the blob section
carries no shape headers.
"""
import io
import os
import struct
import tempfile

import numpy as np

from .errors import DomainError
from .net import LAYER_KINDS, BatchNormConventional, BatchNormFineGrained, EncoderModel

MAGIC = b"PBNET1"


def _build(kind, ints, floats):
    cls = LAYER_KINDS.get(kind)
    if cls is None:
        raise DomainError(f"unknown layer kind {kind!r}")
    if cls is BatchNormFineGrained:
        rank = ints[0]
        return cls(tuple(ints[1 : 1 + rank]), *floats)
    if cls is BatchNormConventional:
        return cls(ints[0], *floats)
    return cls(*ints, *floats)


def dumps(model):
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", len(model.layers)))
    buf.write(struct.pack("<I", len(model.input_shape)))
    buf.write(struct.pack(f"<{len(model.input_shape)}I", *model.input_shape))
    for layer in model.layers:
        ints, floats = layer.config()
        kind = layer.kind.encode("ascii")
        buf.write(struct.pack("<B", len(kind)) + kind)
        buf.write(struct.pack(f"<B{len(ints)}I", len(ints), *ints))
        buf.write(struct.pack(f"<B{len(floats)}d", len(floats), *floats))
    for layer in model.layers:
        for name in layer.param_names + layer.buffer_names:
            buf.write(np.ascontiguousarray(getattr(layer, name), dtype="<f8").tobytes())
    return buf.getvalue()


def loads(data):
    view = memoryview(data)
    if bytes(view[:6]) != MAGIC:
        raise DomainError("not a PBNET1 checkpoint")
    pos = 6

    def take(fmt):
        nonlocal pos
        vals = struct.unpack_from(fmt, view, pos)
        pos += struct.calcsize(fmt)
        return vals

    (count,) = take("<I")
    (rank,) = take("<I")
    input_shape = take(f"<{rank}I")
    layers = []
    for _ in range(count):
        (klen,) = take("<B")
        kind = bytes(view[pos : pos + klen]).decode("ascii")
        pos += klen
        (ni,) = take("<B")
        ints = take(f"<{ni}I")
        (nf,) = take("<B")
        floats = take(f"<{nf}d")
        layers.append(_build(kind, ints, floats))
    for layer in layers:
        for name in layer.param_names + layer.buffer_names:
            ref = getattr(layer, name)
            nbytes = ref.size * 8
            arr = np.frombuffer(view[pos : pos + nbytes], dtype="<f8").reshape(ref.shape)
            pos += nbytes
            setattr(layer, name, arr.astype(np.float64))
    if pos != len(view):
        raise DomainError("trailing bytes after PBNET1 parameter blobs")
    return EncoderModel(layers, input_shape)


def save(model, path):
    """Write atomically: a crash never leaves a truncated checkpoint behind."""
    data = dumps(model)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".pbnet-")
    with os.fdopen(fd, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def load(path):
    with open(path, "rb") as fh:
        return loads(fh.read())
