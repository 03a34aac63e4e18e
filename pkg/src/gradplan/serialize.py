"""Parameter checkpoints.

Layout: a text header (magic line, architecture name, precision, one line
per parameter with its shape, then "end"), followed by the raw little-endian
float64 values of every parameter in declaration order.
"""

from __future__ import annotations

import numpy as np

MAGIC = b"GRADPLAN-CKPT v1\n"


class CheckpointError(Exception):
    pass


def _shape_str(shape):
    return "x".join(str(d) for d in shape) if shape else "scalar"


def save_params(model, path):
    named = model.named_parameters()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(f"arch={model.arch_name}\n".encode())
        fh.write(b"precision=float64\n")
        for name, p in named:
            fh.write(f"param={name}:{_shape_str(p.data.shape)}\n".encode())
        fh.write(b"end\n")
        for _, p in named:
            fh.write(np.ascontiguousarray(p.data, dtype="<f8").tobytes())


def load_params(model, path):
    """Load a checkpoint into model, verifying architecture and shapes."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) == 0:
        raise CheckpointError(f"{path}: empty checkpoint file")
    if not blob.startswith(MAGIC):
        raise CheckpointError(f"{path}: not a parameter checkpoint (bad magic)")
    header_end = blob.find(b"\nend\n")
    if header_end < 0:
        raise CheckpointError(f"{path}: truncated header")
    lines = blob[len(MAGIC):header_end].decode().splitlines()
    body = blob[header_end + len(b"\nend\n"):]

    fields = dict(line.split("=", 1) for line in lines if not line.startswith("param="))
    stored = []
    for line in lines:
        if line.startswith("param="):
            name, shape_s = line[len("param="):].split(":", 1)
            shape = () if shape_s == "scalar" else tuple(int(d) for d in shape_s.split("x"))
            stored.append((name, shape))

    if fields.get("arch") != model.arch_name:
        raise CheckpointError(
            f"{path}: checkpoint is for arch {fields.get('arch')!r}, "
            f"model is {model.arch_name!r}"
        )
    if fields.get("precision") != "float64":
        raise CheckpointError(f"{path}: unsupported precision {fields.get('precision')!r}")

    named = model.named_parameters()
    if len(named) != len(stored):
        raise CheckpointError(
            f"{path}: checkpoint has {len(stored)} parameters, model has {len(named)}"
        )
    for (mname, p), (sname, sshape) in zip(named, stored):
        if mname != sname or p.data.shape != sshape:
            raise CheckpointError(
                f"{path}: parameter mismatch, model {mname}{p.data.shape} "
                f"vs checkpoint {sname}{sshape}"
            )

    expected = sum(int(np.prod(s)) if s else 1 for _, s in stored) * 8
    if len(body) != expected:
        raise CheckpointError(
            f"{path}: expected {expected} value bytes, found {len(body)}"
        )
    offset = 0
    for _, p in named:
        n = p.data.size
        vals = np.frombuffer(body, dtype="<f8", count=n, offset=offset)
        p.data = vals.reshape(p.data.shape).astype(np.float64)
        offset += n * 8
