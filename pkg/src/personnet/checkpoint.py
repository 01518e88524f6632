"""Binary checkpoint format (all integers little-endian).

    magic        4 bytes  b"PNET"
    version      u32
    config       u32 byte length + UTF-8 run-config text
    count        u32 number of parameters
    per parameter:
      name       u32 byte length + UTF-8
      rank       u8
      extents    u32 * rank
      values     float32 * prod(extents), row-major
"""
import struct

import numpy as np

from .config import RunConfig, format_config, parse_config
from .crossnet import NetworkConfig, ParameterStore, parameter_shapes
from .errors import ConfigError, FormatError
from .io_utils import atomic_write_bytes

MAGIC = b"PNET"
VERSION = 1


def _string(s):
    b = s.encode("utf-8")
    return struct.pack("<I", len(b)) + b


def encode_checkpoint(params, cfg):
    if isinstance(cfg, NetworkConfig):
        cfg = RunConfig(network=cfg)
    out = [MAGIC, struct.pack("<I", VERSION), _string(format_config(cfg)),
           struct.pack("<I", len(params))]
    for name, value in params.items():
        out.append(_string(name))
        out.append(struct.pack("<B", value.ndim))
        out.append(struct.pack(f"<{value.ndim}I", *value.shape))
        out.append(np.ascontiguousarray(value, dtype="<f4").tobytes())
    return b"".join(out)


def checkpoint_save(params, cfg, path):
    atomic_write_bytes(path, encode_checkpoint(params, cfg))


class _Reader:
    def __init__(self, buf):
        self.buf = buf
        self.pos = 0

    def take(self, n, what):
        if self.pos + n > len(self.buf):
            raise FormatError(f"truncated file while reading {what}", self.pos)
        chunk = self.buf[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u32(self, what):
        return struct.unpack("<I", self.take(4, what))[0]

    def string(self, what):
        start = self.pos
        raw = self.take(self.u32(what), what)
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError:
            raise FormatError(f"{what} is not valid UTF-8", start) from None


def decode_checkpoint(buf):
    r = _Reader(buf)
    magic = r.take(4, "magic")
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}", 0)
    version = r.u32("version")
    if version != VERSION:
        raise FormatError(f"unsupported format version {version}", 4)
    cfg_at = r.pos
    try:
        cfg = parse_config(r.string("config"))
    except ConfigError as exc:
        raise FormatError(f"embedded config is invalid: {exc}", cfg_at) from None
    params = ParameterStore()
    for _ in range(r.u32("parameter count")):
        name = r.string("parameter name")
        rank = r.take(1, "rank")[0]
        shape = struct.unpack(f"<{rank}I", r.take(4 * rank, "extents"))
        count = int(np.prod(shape))
        values = np.frombuffer(r.take(4 * count, f"values of {name}"), dtype="<f4")
        params.add(name, values.astype(np.float32).reshape(shape))
    if r.pos != len(buf):
        raise FormatError(f"{len(buf) - r.pos} trailing bytes after last parameter", r.pos)
    expected = parameter_shapes(cfg.network)
    got = {name: value.shape for name, value in params.items()}
    if got != dict(expected):
        raise FormatError("parameters do not match the embedded network config", cfg_at)
    return params, cfg


def checkpoint_load(path):
    """Return ``(ParameterStore, RunConfig)``."""
    with open(path, "rb") as fh:
        return decode_checkpoint(fh.read())
