"""Writes checkpoint_v1.bin with struct, independent of the C++ writer."""
import struct
from pathlib import Path

params = [
    ("trunk.0.fully_connected.weight", [2, 3], [0.5, -1.25, 3.0, 0.0, 1e-3, -7.5]),
    ("trunk.0.fully_connected.bias", [2], [0.25, -0.5]),
]
stats = [
    ("rmsprop/trunk.0.fully_connected.weight", [2, 3], [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]),
    ("rmsprop/trunk.0.fully_connected.bias", [2], [0.125, 0.0625]),
]
version = 42

out = bytearray(b"GRLCKPT1")
out += struct.pack("<I", len(params) + len(stats))
for name, shape, values in params + stats:
    raw = name.encode("ascii")
    out += struct.pack("<H", len(raw)) + raw
    out += struct.pack("<B", len(shape))
    out += b"".join(struct.pack("<Q", d) for d in shape)
    out += b"".join(struct.pack("<f", v) for v in values)
out += struct.pack("<Q", version)

Path(__file__).resolve().parent.parent.joinpath("checkpoint_v1.bin").write_bytes(bytes(out))
