"""Arithmetic edge coding of crack-contour chains with a geometric context.

The probability of the next relative direction is driven by a total
least-squares line fitted through the most recent edge endpoints: a candidate
direction is weighted by ``exp(kappa * cos(angle to the line))`` times
``exp(-dist^2 / (2 * omega^2))``, where ``dist`` is the perpendicular
distance from the candidate edge's end point to the line.  Normalizing over
the three relative symbols cancels the von-Mises constant.

The first edge of a contour is uniform over the four absolute directions
(2 bits) and is carried in the bitstream header; edges whose preceding
window is shorter than the context length are uniform over the three
relative symbols.  Rate estimation, encoding and decoding all share one
cached context-conditional distribution, so the entropy estimate and the
coder are synchronized by construction.

Bitstream layout (all integers big-endian):
magic "AEC1" | u16 contour count | per contour: u16 p, u16 q,
first-direction code in one byte, u32 symbol count (length - 1) |
arithmetic payload | u8 terminator 0x00.
"""

from __future__ import annotations

import logging
import math
import struct
from dataclasses import dataclass
from functools import lru_cache

from .contour import ABSOLUTE, DIR_VECTOR, Contour, step, turn

logger = logging.getLogger(__name__)

LOG2_3 = math.log2(3.0)
PROB_FLOOR = 2.0 ** -16
# uniform mixing weight enforcing the probability floor (1/12288 > 2^-16)
_MIX = 2.0 ** -12

_FREQ_TOTAL = 1 << 16
_TOP = 1 << 24


class DegenerateContextError(ValueError):
    """All context points coincide; no line direction is defined."""


class BitstreamError(ValueError):
    """Raised for malformed or truncated coded streams."""


@dataclass(frozen=True)
class AecParams:
    """Geometric context model parameters.

    context_len is the number of previous edges in the window; kappa the
    von-Mises concentration of the angle term; omega the scale of the
    distance term (lattice units).
    """

    context_len: int = 3
    kappa: float = 2.0
    omega: float = 1.0

    def __post_init__(self):
        if self.context_len < 1:
            raise ValueError("context_len must be >= 1")
        if self.kappa <= 0 or self.omega <= 0:
            raise ValueError("kappa and omega must be > 0")


def fit_line(points, orient=None):
    """Total-least-squares line through 2D lattice points.

    Returns ((mean_p, mean_q), (up, uq)) with a unit direction vector.  The
    sign is chosen to agree with ``orient`` when given; if the line happens to
    be exactly perpendicular to it, the sign falls back to the chord and then
    to the most recent point differences, keeping the choice covariant under
    lattice rotations.  Raises DegenerateContextError when the points carry no
    direction at all (coincident, or an isotropic scatter).
    """
    pts = list(points)
    if len(pts) < 2:
        raise ValueError("need at least two points")
    mp = sum(p for p, _ in pts) / len(pts)
    mq = sum(q for _, q in pts) / len(pts)
    spp = sqq = spq = 0.0
    for p, q in pts:
        dp, dq = p - mp, q - mq
        spp += dp * dp
        sqq += dq * dq
        spq += dp * dq
    spread = spp + sqq
    if spread < 1e-12 or math.hypot(sqq - spp, 2.0 * spq) < 1e-9 * spread:
        raise DegenerateContextError("degenerate context")
    theta = 0.5 * math.atan2(2.0 * spq, sqq - spp)
    up, uq = math.sin(theta), math.cos(theta)
    refs = [] if orient is None else [orient]
    refs.append((pts[-1][0] - pts[0][0], pts[-1][1] - pts[0][1]))
    refs.extend((b[0] - a[0], b[1] - a[1]) for a, b in zip(pts[-2::-1], pts[::-1]))
    for ref in refs:
        dot = up * ref[0] + uq * ref[1]
        if abs(dot) > 1e-9:
            if dot < 0.0:
                up, uq = -up, -uq
            return (mp, mq), (up, uq)
    raise DegenerateContextError("degenerate context")


def line_point_distance(line, point) -> float:
    """Perpendicular distance from a point to a fitted line."""
    (mp, mq), (up, uq) = line
    return abs((point[1] - mq) * up - (point[0] - mp) * uq)


def _uniform3():
    return {"l": 1.0 / 3.0, "s": 1.0 / 3.0, "r": 1.0 / 3.0}


def edge_probabilities(context_points, last_dir: str, params: AecParams) -> dict:
    """Distribution over the relative symbols given recent edge endpoints.

    ``context_points`` are the crack points of the recent polyline, oldest
    first and ending at the current head.  Falls back to the uniform
    distribution on a degenerate (single-point) context.
    """
    pts = list(context_points)
    if len(pts) < 2:
        return _uniform3()
    try:
        line = fit_line(pts, orient=DIR_VECTOR[last_dir])
    except DegenerateContextError:
        logger.debug("degenerate context at %s; using uniform distribution", pts[-1])
        return _uniform3()
    head = pts[-1]
    (_, _), (up, uq) = line
    log_weights = {}
    for rel in "lsr":
        d = turn(last_dir, rel)
        vp, vq = DIR_VECTOR[d]
        cos_gamma = up * vp + uq * vq
        dist = line_point_distance(line, step(head, d))
        log_weights[rel] = params.kappa * cos_gamma - dist * dist / (2.0 * params.omega * params.omega)
    # normalize in log space so extreme concentrations cannot overflow
    peak = max(log_weights.values())
    weights = {rel: math.exp(lw - peak) for rel, lw in log_weights.items()}
    total = sum(weights.values())
    return {rel: (1.0 - _MIX) * w / total + _MIX / 3.0 for rel, w in weights.items()}


def context_points(head, recent_dirs):
    """Polyline vertices ending at ``head``, reconstructed from directions."""
    pts = [head]
    p, q = head
    for d in reversed(recent_dirs):
        dp, dq = DIR_VECTOR[d]
        p, q = p - dp, q - dq
        pts.append((p, q))
    pts.reverse()
    return pts


@lru_cache(maxsize=None)
def relative_distribution(recent_dirs: tuple, params: AecParams) -> tuple:
    """Cached (l, s, r) probabilities for a full context window.

    The model is translation invariant, so the distribution depends only on
    the direction sequence; the head is fixed at the origin.
    """
    probs = edge_probabilities(context_points((0, 0), recent_dirs), recent_dirs[-1], params)
    return (probs["l"], probs["s"], probs["r"])


@lru_cache(maxsize=None)
def relative_bits(recent_dirs: tuple, params: AecParams) -> tuple:
    return tuple(-math.log2(p) for p in relative_distribution(recent_dirs, params))


def _quantize(probs) -> tuple:
    freqs = [max(1, round(p * _FREQ_TOTAL)) for p in probs]
    freqs[freqs.index(max(freqs))] += _FREQ_TOTAL - sum(freqs)
    if min(freqs) < 1:
        raise AssertionError("frequency underflow")
    return tuple(freqs)


_UNIFORM3_FREQS = _quantize((1.0 / 3.0,) * 3)


@lru_cache(maxsize=None)
def relative_freqs(recent_dirs: tuple, params: AecParams) -> tuple:
    return _quantize(relative_distribution(recent_dirs, params))


def estimate_rate(contour: Contour, params: AecParams) -> float:
    """Entropy estimate in bits of coding one contour, context evolved in place.

    The first edge costs exactly 2 bits (uniform over four absolute
    directions); later edges cost log2(3) until a full context window exists,
    then the geometric model applies.
    """
    k = params.context_len
    bits = 2.0
    recent = (contour.first,)
    for rel in contour.rest:
        if len(recent) < k:
            bits += LOG2_3
        else:
            bits += relative_bits(recent, params)["lsr".index(rel)]
        recent = (recent + (turn(recent[-1], rel),))[-k:]
    return bits


# ---------------------------------------------------------------------------
# Range coder (32-bit, byte-aligned output)
# ---------------------------------------------------------------------------


class RangeEncoder:
    """Range encoder keeping the full low value as an integer.

    Carries resolve exactly because ``low`` is never truncated; ``finish``
    emits the shortest byte string whose zero-padded value falls in the final
    interval.
    """

    def __init__(self):
        self._low = 0
        self._range = 1 << 32
        self._bits = 32

    def encode(self, cum_lo: int, cum_hi: int, total: int) -> None:
        r = self._range // total
        self._low += r * cum_lo
        if cum_hi == total:
            self._range -= r * cum_lo
        else:
            self._range = r * (cum_hi - cum_lo)
        while self._range < _TOP:
            self._low <<= 8
            self._range <<= 8
            self._bits += 8

    def finish(self) -> bytes:
        z = self._range.bit_length() - 1
        value = ((self._low + (1 << z) - 1) >> z) << z
        return value.to_bytes(self._bits // 8, "big").rstrip(b"\x00")


class RangeDecoder:
    """Mirror of RangeEncoder tracking code - low, which stays bounded."""

    def __init__(self, data: bytes):
        self._data = data
        self._pos = 0
        self._range = 1 << 32
        self._diff = 0
        for _ in range(4):
            self._diff = (self._diff << 8) | self._next_byte()

    def _next_byte(self) -> int:
        b = self._data[self._pos] if self._pos < len(self._data) else 0
        self._pos += 1
        return b

    def decode(self, freqs, total: int) -> int:
        r = self._range // total
        t = min(self._diff // r, total - 1)
        sym = 0
        cum = 0
        while cum + freqs[sym] <= t:
            cum += freqs[sym]
            sym += 1
        self._diff -= r * cum
        if cum + freqs[sym] == total:
            self._range -= r * cum
        else:
            self._range = r * freqs[sym]
        while self._range < _TOP:
            self._diff = (self._diff << 8) | self._next_byte()
            self._range <<= 8
        return sym


_MAGIC = b"AEC1"
_HEADER = struct.Struct(">HHBI")


def encode(contours, params: AecParams) -> bytes:
    """Losslessly encode a list of contours into one bitstream."""
    contours = list(contours)
    if len(contours) > 0xFFFF:
        raise ValueError("too many contours for a u16 count")
    out = bytearray(_MAGIC)
    out += struct.pack(">H", len(contours))
    for c in contours:
        p, q = c.start
        if not (0 <= p <= 0xFFFF and 0 <= q <= 0xFFFF):
            raise ValueError("contour start outside u16 range")
        out += _HEADER.pack(p, q, ABSOLUTE.index(c.first), len(c.rest))
    k = params.context_len
    enc = RangeEncoder()
    for c in contours:
        recent = (c.first,)
        for rel in c.rest:
            freqs = _UNIFORM3_FREQS if len(recent) < k else relative_freqs(recent, params)
            sym = "lsr".index(rel)
            enc.encode(sum(freqs[:sym]), sum(freqs[: sym + 1]), _FREQ_TOTAL)
            recent = (recent + (turn(recent[-1], rel),))[-k:]
    out += enc.finish()
    out.append(0)
    return bytes(out)


def decode(data: bytes, params: AecParams):
    """Decode a bitstream produced by :func:`encode` with identical params."""
    if len(data) < len(_MAGIC) + 2 + 1:
        raise BitstreamError("truncated stream")
    if data[: len(_MAGIC)] != _MAGIC:
        raise BitstreamError("bad magic")
    (count,) = struct.unpack_from(">H", data, len(_MAGIC))
    off = len(_MAGIC) + 2
    headers = []
    for _ in range(count):
        if off + _HEADER.size > len(data) - 1:
            raise BitstreamError("truncated stream")
        p, q, dircode, nsyms = _HEADER.unpack_from(data, off)
        if dircode >= len(ABSOLUTE):
            raise BitstreamError("invalid first-direction code")
        headers.append(((p, q), ABSOLUTE[dircode], nsyms))
        off += _HEADER.size
    if data[-1] != 0:
        raise BitstreamError("truncated stream")
    k = params.context_len
    dec = RangeDecoder(data[off:-1])
    contours = []
    for start, first, nsyms in headers:
        recent = (first,)
        rest = []
        for _ in range(nsyms):
            freqs = _UNIFORM3_FREQS if len(recent) < k else relative_freqs(recent, params)
            rel = "lsr"[dec.decode(freqs, _FREQ_TOTAL)]
            rest.append(rel)
            recent = (recent + (turn(recent[-1], rel),))[-k:]
        contour = Contour(start, first, "".join(rest))
        if len(contour.rest) != nsyms:
            raise BitstreamError("symbol count mismatch")
        contours.append(contour)
    return contours


def payload_bits(data: bytes) -> int:
    """Length in bits of the arithmetic payload of an encoded stream."""
    if len(data) < len(_MAGIC) + 2 + 1 or data[: len(_MAGIC)] != _MAGIC:
        raise BitstreamError("bad magic")
    (count,) = struct.unpack_from(">H", data, len(_MAGIC))
    off = len(_MAGIC) + 2 + count * _HEADER.size
    return 8 * max(0, len(data) - 1 - off)
