"""Binary model files.

Little-endian layout, version 1::

    magic        4s   b"FSPN"
    version      u16
    n_input      u32
    n_exc        u32
    mode         u8   0 lateral, 1 inhibitory layer
    ratio        f32
    wordlength   u8   0 = reference precision
    n_f          u8   fractional bits of the weights
    theta_n_f    u8   fractional bits of theta
    weights      n_input * n_exc, row-major; f32 at reference precision,
                 otherwise unsigned codes of ceil(wordlength / 8) bytes
    theta        n_exc; f64 at reference precision, otherwise codes as above
    labels       n_exc u8, 255 = unassigned
    seed         u64
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from stdpsim.errors import ModelFileError
from stdpsim.evaluation import UNASSIGNED, ClassAssignment
from stdpsim.neuron import NeuronParams
from stdpsim.quantize import FixedPointFormat, from_integers, theta_format, to_integers
from stdpsim.topology import InhibitionMode, Network, NetworkConfig, build_network

MAGIC = b"FSPN"
VERSION = 1
_HEADER = struct.Struct("<4sHIIBfBBB")
HEADER_SIZE = _HEADER.size  # 22
UNASSIGNED_CODE = 255
_MODES = {InhibitionMode.LATERAL: 0, InhibitionMode.LAYER: 1}


def _code_dtype(wordlength: int) -> np.dtype:
    return {1: np.dtype("<u1"), 2: np.dtype("<u2"), 4: np.dtype("<u4")}[-(-wordlength // 8)]


def _pack_codes(codes: np.ndarray, wordlength: int) -> bytes:
    nbytes = -(-wordlength // 8)
    if nbytes == 3:  # no 24-bit numpy type; slice the low bytes of u4
        return codes.astype("<u4").view(np.uint8).reshape(-1, 4)[:, :3].tobytes()
    return codes.astype(_code_dtype(wordlength)).tobytes()


def _unpack_codes(raw: bytes, wordlength: int, count: int) -> np.ndarray:
    nbytes = -(-wordlength // 8)
    if nbytes == 3:
        b = np.frombuffer(raw, dtype=np.uint8).reshape(count, 3)
        return (b[:, 0].astype(np.int64) | (b[:, 1].astype(np.int64) << 8) | (b[:, 2].astype(np.int64) << 16))
    return np.frombuffer(raw, dtype=_code_dtype(wordlength), count=count).astype(np.int64)


def payload_size(n_input: int, n_exc: int, wordlength: int) -> int:
    """Expected file length in bytes for a given shape and wordlength."""
    if wordlength == 0:
        return HEADER_SIZE + 4 * n_input * n_exc + 8 * n_exc + n_exc + 8
    b = -(-wordlength // 8)
    return HEADER_SIZE + b * (n_input * n_exc + n_exc) + n_exc + 8


def save_model(network: Network, assignment: ClassAssignment | None, path,
               fmt: FixedPointFormat | None = None) -> int:
    """Write ``network`` (and its class labels) to ``path``; returns bytes written.

    ``fmt`` defaults to the format the network was quantized to, if any.
    """
    cfg = network.config
    fmt = fmt if fmt is not None else network.fmt
    W = network.weights.w
    theta = network.exc.theta
    if fmt is None:
        wl, nf, tnf = 0, 0, 0
        w_bytes = W.astype("<f4").tobytes()
        t_bytes = theta.astype("<f8").tobytes()
    else:
        if fmt.wordlength > 32:
            raise ModelFileError(f"wordlength {fmt.wordlength} exceeds the 32-bit code limit", 0)
        tf = theta_format(theta, fmt.wordlength)
        wl, nf, tnf = fmt.wordlength, fmt.n_f, tf.n_f
        w_bytes = _pack_codes(to_integers(W, fmt), wl)
        t_bytes = _pack_codes(to_integers(theta, tf), wl)

    labels = np.full(cfg.n_exc, UNASSIGNED_CODE, dtype=np.uint8)
    if assignment is not None:
        lab = np.asarray(assignment.labels)
        labels[lab != UNASSIGNED] = lab[lab != UNASSIGNED]

    blob = b"".join([
        _HEADER.pack(MAGIC, VERSION, cfg.n_input, cfg.n_exc, _MODES[cfg.inhibition_mode],
                     cfg.inhibition_ratio, wl, nf, tnf),
        w_bytes, t_bytes, labels.tobytes(), struct.pack("<Q", cfg.seed),
    ])
    Path(path).write_bytes(blob)
    return len(blob)


def load_model(path, exc_params: NeuronParams | None = None, inh_params: NeuronParams | None = None,
               **config_overrides) -> tuple[Network, ClassAssignment]:
    """Read a model file back into a network and its class assignment.

    Parameters the file does not carry (neuron constants, coupling
    strengths, w_max) come from the keyword arguments or their defaults.
    """
    data = Path(path).read_bytes()
    if len(data) < HEADER_SIZE:
        raise ModelFileError(f"file truncated in header: expected {HEADER_SIZE} bytes, got {len(data)}", len(data))
    magic, version, n_input, n_exc, mode, ratio, wl, nf, tnf = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ModelFileError(f"bad magic {magic!r}, expected {MAGIC!r}", 0)
    if version != VERSION:
        raise ModelFileError(f"unsupported format version {version}", 4)
    if mode not in (0, 1):
        raise ModelFileError(f"unknown inhibition mode {mode}", 14)
    if wl > 32 or nf > wl or tnf > wl:
        raise ModelFileError(f"inconsistent fixed-point header: wordlength {wl}, n_f {nf}, theta n_f {tnf}", 19)
    need = payload_size(n_input, n_exc, wl)
    if len(data) != need:
        raise ModelFileError(f"file length {len(data)} does not match the expected {need} bytes", min(len(data), need))

    seed = struct.unpack_from("<Q", data, need - 8)[0]
    cfg = NetworkConfig(
        **{"n_input": n_input, "n_exc": n_exc,
           "inhibition_mode": InhibitionMode.LAYER if mode else InhibitionMode.LATERAL,
           "inhibition_ratio": float(np.float32(ratio)), "seed": int(seed), **config_overrides}
    )
    net = build_network(cfg, exc_params, inh_params)

    off = HEADER_SIZE
    n_w = n_input * n_exc
    if wl == 0:
        W = np.frombuffer(data, dtype="<f4", count=n_w, offset=off).reshape(n_input, n_exc)
        off += 4 * n_w
        theta = np.frombuffer(data, dtype="<f8", count=n_exc, offset=off)
        off += 8 * n_exc
        fmt = None
    else:
        b = -(-wl // 8)
        fmt = FixedPointFormat(wl - nf, nf)
        W = from_integers(_unpack_codes(data[off:off + b * n_w], wl, n_w), fmt).reshape(n_input, n_exc)
        off += b * n_w
        theta = from_integers(_unpack_codes(data[off:off + b * n_exc], wl, n_exc), FixedPointFormat(wl - tnf, tnf))
        off += b * n_exc
    if np.any(~np.isfinite(W)) or np.any(W < 0) or np.any(W > cfg.w_max):
        raise ModelFileError(f"weights outside [0, {cfg.w_max}]", HEADER_SIZE)
    net.weights.w[:] = W.astype(np.float32)
    net.exc.theta[:] = theta
    net.fmt = fmt

    raw = np.frombuffer(data, dtype=np.uint8, count=n_exc, offset=off)
    labels = np.where(raw == UNASSIGNED_CODE, UNASSIGNED, raw.astype(np.int64))
    if np.any(labels >= 10):
        raise ModelFileError("class label outside [0, 9]", off + int(np.argmax(labels >= 10)))
    return net, ClassAssignment(labels.astype(np.int64))
