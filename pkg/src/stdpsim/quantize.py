"""Fixed-point formats, round-half-up quantization, and bit-width sweeps."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from stdpsim.encoding import EncodingParams
from stdpsim.errors import ConfigurationError, NumericalFault
from stdpsim.evaluation import ClassAssignment, evaluate, memory_report
from stdpsim.topology import Network

REFERENCE_WORDLENGTH = 32  # float32, the unquantized reference


@dataclass(frozen=True)
class FixedPointFormat:
    """<N_i.N_f> fixed point; ``epsilon = 2**-N_f``."""

    n_i: int
    n_f: int
    signed: bool = False

    def __post_init__(self):
        if self.n_i < 0 or self.n_f < 0 or self.n_i + self.n_f < 1:
            raise ConfigurationError(f"invalid fixed-point format Q{self.n_i}.{self.n_f}")
        if self.signed and self.n_i < 1:
            raise ConfigurationError("a signed format needs at least one integer (sign) bit")

    @property
    def wordlength(self) -> int:
        return self.n_i + self.n_f

    @property
    def epsilon(self) -> float:
        return 2.0 ** -self.n_f

    @property
    def min_value(self) -> float:
        return -(2.0 ** (self.n_i - 1)) if self.signed else 0.0

    @property
    def max_value(self) -> float:
        top = 2.0 ** (self.n_i - 1) if self.signed else 2.0 ** self.n_i
        return top - self.epsilon

    def __str__(self) -> str:
        return f"{'s' if self.signed else 'u'}Q{self.n_i}.{self.n_f}"


def weight_format(wordlength: int, w_m: float = 1.0) -> FixedPointFormat:
    """Unsigned format for weights in [0, w_m]: just enough integer bits for w_m."""
    n_i = integer_bits(w_m)
    if wordlength <= n_i:
        raise ConfigurationError(f"{wordlength}-bit word cannot hold {n_i} integer bits")
    return FixedPointFormat(n_i, wordlength - n_i)


def integer_bits(max_value: float) -> int:
    """Smallest N_i with 2**N_i > max_value, at least 1.

    Strictly greater so that ``max_value`` itself is not clipped by the
    ``2**N_i - epsilon`` ceiling when it is a power of two (w_m = 1 -> Q1.x).
    """
    if not math.isfinite(max_value) or max_value < 0:
        raise ConfigurationError(f"cannot size integer bits for {max_value}")
    return max(1, int(math.floor(math.log2(max_value))) + 1) if max_value >= 1 else 1


def quantize_value(x, fmt: FixedPointFormat):
    """``epsilon * floor(x / epsilon + 1/2)`` saturated to the format's range.

    Works elementwise on arrays; returns float64.
    """
    a = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise NumericalFault("cannot quantize non-finite values")
    eps = fmt.epsilon
    q = np.clip(eps * np.floor(a / eps + 0.5), fmt.min_value, fmt.max_value)
    return float(q) if q.ndim == 0 else q


def to_integers(x, fmt: FixedPointFormat) -> np.ndarray:
    """Raw fixed-point codes ``round(q / epsilon)`` of already quantized values."""
    q = np.asarray(quantize_value(x, fmt))
    return np.rint(q / fmt.epsilon).astype(np.int64)


def from_integers(codes, fmt: FixedPointFormat) -> np.ndarray:
    return np.asarray(codes, dtype=np.float64) * fmt.epsilon


@dataclass(frozen=True)
class QuantizationPolicy:
    weights: bool = True
    theta: bool = True


def theta_format(theta: np.ndarray, wordlength: int) -> FixedPointFormat:
    """Unsigned format with N_i sized to the largest observed theta."""
    top = float(np.max(theta)) if theta.size else 0.0
    n_i = min(integer_bits(top), wordlength)
    return FixedPointFormat(n_i, wordlength - n_i) if wordlength > n_i else FixedPointFormat(wordlength, 0)


def quantize_model(network: Network, fmt: FixedPointFormat | int | None,
                   policy: QuantizationPolicy = QuantizationPolicy()) -> Network:
    """Return a quantized copy of ``network``; ``None`` returns an untouched copy.

    An int is taken as a wordlength and expanded with ``weight_format``.
    Weights are stored back as float32, which holds every grid point of a
    format up to 24 significant bits exactly.
    """
    net = network.clone()
    if fmt is None:
        return net
    if isinstance(fmt, int):
        fmt = weight_format(fmt, net.weights.w_m)
    if policy.weights:
        net.weights.w[:] = quantize_value(net.weights.w, fmt).astype(np.float32)
    if policy.theta:
        tf = theta_format(net.exc.theta, fmt.wordlength)
        net.exc.theta[:] = quantize_value(net.exc.theta, tf)
    net.fmt = fmt
    return net


@dataclass
class SweepRow:
    wordlength: int
    n_f: int
    accuracy: float
    model_bytes: float


SWEEP_HEADER = ("wordlength", "n_f", "accuracy", "model_bytes")


def parse_formats(spec: str | list) -> list[int | None]:
    """"4,8,16,32" -> wordlengths; "ref" (or "fp") selects the float32 reference."""
    items = spec.split(",") if isinstance(spec, str) else list(spec)
    out = []
    for it in items:
        s = str(it).strip().lower()
        if not s:
            continue
        if s in ("ref", "fp", "float32"):
            out.append(None)
            continue
        try:
            out.append(int(s))
        except ValueError:
            raise ConfigurationError(f"bad wordlength {it!r}") from None
    if not out:
        raise ConfigurationError("empty format list")
    return out


def sweep_quantization(
    network: Network,
    assignment: ClassAssignment,
    images: np.ndarray,
    labels: np.ndarray,
    encoding: EncodingParams,
    formats: list,
    *,
    policy: QuantizationPolicy = QuantizationPolicy(),
    threads: int = 1,
) -> list[SweepRow]:
    """Accuracy and model size per format, ordered by wordlength.

    ``None`` in ``formats`` is the unquantized reference and is reported
    with wordlength 32 and n_f 0.  The class assignment is the one learned
    at reference precision; only the stored parameters are quantized.
    """
    if not formats:
        raise ConfigurationError("empty format list")
    rows = []
    for f in formats:
        if isinstance(f, int):
            f = weight_format(f, network.weights.w_m)
        net = quantize_model(network, f, policy)
        res = evaluate(net, assignment, images, labels, encoding, threads=threads)
        wl = REFERENCE_WORDLENGTH if f is None else f.wordlength
        mem = memory_report(net, None if f is None else f.wordlength)
        rows.append(SweepRow(wl, 0 if f is None else f.n_f, res.accuracy, mem.total_bytes))
    rows.sort(key=lambda r: (r.wordlength, r.n_f))
    return rows
