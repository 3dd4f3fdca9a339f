"""Between-pixel (crack) contours of depth images as differential chain codes.

Contours live on the pixel-corner lattice: a corner point (p, q) satisfies
0 <= p <= height and 0 <= q <= width.  A vertical crack edge between the
horizontally adjacent pixels (r, c-1) and (r, c) runs from corner (r, c) to
(r+1, c); a horizontal crack between the vertically adjacent pixels (r-1, c)
and (r, c) runs from (r, c) to (r, c+1).

A chain stores one absolute starting direction plus relative turns, the
differential chain code.  Absolute directions are the characters "E", "S",
"W", "N" (east/south/west/north in image coordinates, row axis pointing
down); relative symbols are "l", "s", "r" (left, straight, right).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .image_io import DepthImage

ABSOLUTE = "ESWN"
RELATIVE = "lsr"

DIR_VECTOR = {"E": (0, 1), "S": (1, 0), "W": (0, -1), "N": (-1, 0)}
OPPOSITE = {"E": "W", "S": "N", "W": "E", "N": "S"}

_IDX = {d: i for i, d in enumerate(ABSOLUTE)}
_TURN = {"l": -1, "s": 0, "r": 1}


def turn(direction: str, rel: str) -> str:
    """Absolute direction after taking relative step ``rel`` from ``direction``."""
    return ABSOLUTE[(_IDX[direction] + _TURN[rel]) % 4]


def relative_between(prev: str, nxt: str) -> str:
    """Relative symbol from one absolute direction to the next.

    Raises ValueError for a 180-degree turn, which a crack chain cannot take.
    """
    delta = (_IDX[nxt] - _IDX[prev]) % 4
    if delta == 0:
        return "s"
    if delta == 1:
        return "r"
    if delta == 3:
        return "l"
    raise ValueError("doubling back")


def step(point, direction: str):
    dp, dq = DIR_VECTOR[direction]
    return (point[0] + dp, point[1] + dq)


@dataclass(frozen=True)
class Contour:
    """A crack-edge chain: start corner, first absolute direction, relative turns."""

    start: tuple
    first: str
    rest: str = ""

    def __post_init__(self):
        if self.first not in DIR_VECTOR:
            raise ValueError(f"invalid absolute direction {self.first!r}")
        if any(c not in _TURN for c in self.rest):
            raise ValueError("invalid relative symbol")
        object.__setattr__(self, "start", (int(self.start[0]), int(self.start[1])))

    def __len__(self) -> int:
        return 1 + len(self.rest)

    def absolute_dirs(self) -> list:
        dirs = [self.first]
        for rel in self.rest:
            dirs.append(turn(dirs[-1], rel))
        return dirs

    def points(self) -> list:
        """Corner points visited, start first; length len(self) + 1."""
        pts = [self.start]
        for d in self.absolute_dirs():
            pts.append(step(pts[-1], d))
        return pts

    @property
    def end(self) -> tuple:
        return self.points()[-1]

    @property
    def is_closed(self) -> bool:
        return self.end == self.start

    def canonical(self) -> "Contour":
        """Closed contours rotated to start at the topmost-then-leftmost corner."""
        if not self.is_closed:
            return self
        pts = self.points()[:-1]
        dirs = self.absolute_dirs()
        i = min(range(len(pts)), key=lambda j: pts[j])
        return to_relative(pts[i], dirs[i:] + dirs[:i])


def to_relative(start, dirs) -> Contour:
    """Build a Contour from a nonempty chain of absolute directions."""
    dirs = list(dirs)
    if not dirs:
        raise ValueError("empty chain")
    rest = "".join(relative_between(a, b) for a, b in zip(dirs, dirs[1:]))
    return Contour(tuple(start), dirs[0], rest)


def to_absolute(contour: Contour) -> list:
    return contour.absolute_dirs()


@dataclass(frozen=True)
class Segment:
    """A contour run restricted to two non-opposite absolute directions.

    ``dirpair`` is stored as (vertical, horizontal); for runs that use only
    one axis the unused slot is filled with a default ("S" or "E") that the
    endpoint arithmetic never consults.
    """

    start: tuple
    dirpair: tuple  # (vertical direction, horizontal direction)
    dirs: str

    def __post_init__(self):
        v, h = self.dirpair
        if v not in "SN" or h not in "EW":
            raise ValueError(f"invalid direction pair {self.dirpair!r}")
        if any(d not in (v, h) for d in self.dirs):
            raise ValueError("segment direction outside its pair")
        object.__setattr__(self, "start", (int(self.start[0]), int(self.start[1])))

    @property
    def length(self) -> int:
        return len(self.dirs)

    @property
    def vertical_count(self) -> int:
        return sum(1 for d in self.dirs if d == self.dirpair[0])


def segment_endpoint(seg: Segment) -> tuple:
    """End corner from the closed-form displacement, not from walking."""
    p, q = seg.start
    v = seg.vertical_count
    h = seg.length - v
    p += v if seg.dirpair[0] == "S" else -v
    q += h if seg.dirpair[1] == "E" else -h
    return (p, q)


def split_segments(contour: Contour) -> list:
    """Split into maximal two-direction runs; corner edges stay with the
    earlier segment (maximal-prefix rule)."""
    dirs = contour.absolute_dirs()
    pts = contour.points()
    segments = []
    seg_start = 0
    vert = horiz = None
    for i, d in enumerate(dirs):
        axis_vertical = d in "SN"
        current = vert if axis_vertical else horiz
        if current is not None and current != d:
            segments.append(_make_segment(pts[seg_start], dirs[seg_start:i], vert, horiz))
            seg_start = i
            vert = horiz = None
        if axis_vertical:
            vert = d
        else:
            horiz = d
    segments.append(_make_segment(pts[seg_start], dirs[seg_start:], vert, horiz))
    return segments


def _make_segment(start, dirs, vert, horiz) -> Segment:
    return Segment(tuple(start), (vert or "S", horiz or "E"), "".join(dirs))


def join_segments(segments) -> Contour:
    """Reassemble consecutive segments into one contour."""
    dirs = []
    for seg in segments:
        dirs.extend(seg.dirs)
    return to_relative(segments[0].start, dirs)


def segment_vertical_columns(seg: Segment) -> dict:
    """Map each pixel row crossed by a vertical edge to that edge's column."""
    cols = {}
    p, q = seg.start
    for d in seg.dirs:
        if d == "S":
            cols[p] = q
        elif d == "N":
            cols[p - 1] = q
        p, q = step((p, q), d)
    return cols


# ---------------------------------------------------------------------------
# Detection: thresholded 4-neighbour differences linked by crack following
# ---------------------------------------------------------------------------


def edge_maps(depth, threshold: int = 30):
    """Boolean crack-edge maps of a depth image.

    Returns (vert, horiz): vert[r, c] marks the crack between pixels
    (r, c-1) and (r, c) and has shape (h, w+1); horiz[r, c] marks the crack
    between (r-1, c) and (r, c) and has shape (h+1, w).  Image-border columns
    and rows are always False.
    """
    if threshold < 1:
        raise ValueError("threshold must be >= 1")
    pix = depth.pixels if isinstance(depth, DepthImage) else np.asarray(depth)
    a = pix.astype(np.int32)
    h, w = a.shape
    vert = np.zeros((h, w + 1), bool)
    horiz = np.zeros((h + 1, w), bool)
    vert[:, 1:w] = np.abs(a[:, 1:] - a[:, :-1]) >= threshold
    horiz[1:h, :] = np.abs(a[1:, :] - a[:-1, :]) >= threshold
    return vert, horiz


def contour_edge_maps(contours, height: int, width: int):
    """Rasterize contours back into crack-edge maps (inverse of tracing)."""
    vert = np.zeros((height, width + 1), bool)
    horiz = np.zeros((height + 1, width), bool)
    for c in contours:
        p, q = c.start
        for d in c.absolute_dirs():
            if d == "S":
                vert[p, q] = True
            elif d == "N":
                vert[p - 1, q] = True
            elif d == "E":
                horiz[p, q] = True
            else:
                horiz[p, q - 1] = True
            p, q = step((p, q), d)
    return vert, horiz


def _available(vert, horiz, p, q):
    h, w1 = vert.shape
    dirs = []
    if q < w1 - 1 and horiz[p, q]:
        dirs.append("E")
    if p < h and vert[p, q]:
        dirs.append("S")
    if q > 0 and horiz[p, q - 1]:
        dirs.append("W")
    if p > 0 and vert[p - 1, q]:
        dirs.append("N")
    return dirs


def _consume(vert, horiz, p, q, d):
    if d == "S":
        vert[p, q] = False
    elif d == "N":
        vert[p - 1, q] = False
    elif d == "E":
        horiz[p, q] = False
    else:
        horiz[p, q - 1] = False


def _trace_from(vert, horiz, p, q) -> Contour:
    start = (p, q)
    d = _available(vert, horiz, p, q)[0]
    _consume(vert, horiz, p, q, d)
    p, q = step((p, q), d)
    dirs = [d]
    while True:
        # straight, then right, then left; never reverse
        options = _available(vert, horiz, p, q)
        d = next((c for c in (dirs[-1], turn(dirs[-1], "r"), turn(dirs[-1], "l")) if c in options), None)
        if d is None:
            break
        _consume(vert, horiz, p, q, d)
        p, q = step((p, q), d)
        dirs.append(d)
    contour = to_relative(start, dirs)
    return contour.canonical() if contour.is_closed else contour


def _corner_degrees(vert, horiz) -> np.ndarray:
    h, w1 = vert.shape
    deg = np.zeros((h + 1, w1), np.int8)
    deg[:h, :] += vert
    deg[1:, :] += vert
    deg[:, : w1 - 1] += horiz
    deg[:, 1:] += horiz
    return deg


def trace_edge_maps(vert, horiz):
    """Link crack edges into chains: open chains from degree-1 corners first
    (raster order), then remaining closed loops, each cut at its
    topmost-then-leftmost corner.  Deterministic."""
    vert = vert.copy()
    horiz = horiz.copy()
    contours = []
    while True:
        deg = _corner_degrees(vert, horiz)
        ends = np.argwhere(deg == 1)
        if len(ends) == 0:
            break
        for p, q in ends:
            if len(_available(vert, horiz, p, q)) == 1:
                contours.append(_trace_from(vert, horiz, int(p), int(q)))
    while True:
        deg = _corner_degrees(vert, horiz)
        seeds = np.argwhere(deg > 0)
        if len(seeds) == 0:
            break
        for p, q in seeds:
            if _available(vert, horiz, p, q):
                contours.append(_trace_from(vert, horiz, int(p), int(q)))
    return contours


def detect_contours(depth, threshold: int = 30):
    """Detect object contours of a depth image as crack chains."""
    vert, horiz = edge_maps(depth, threshold)
    return trace_edge_maps(vert, horiz)


# ---------------------------------------------------------------------------
# Text dump format: one contour per line
# ---------------------------------------------------------------------------


def format_contours(contours) -> str:
    return "".join(
        f"start=({c.start[0]},{c.start[1]}) first={c.first} rest={c.rest}\n" for c in contours
    )


def parse_contours(text: str):
    contours = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            fields = dict(part.split("=", 1) for part in line.split())
            p, q = fields["start"].strip("()").split(",")
            contours.append(Contour((int(p), int(q)), fields["first"], fields.get("rest", "")))
        except (ValueError, KeyError) as exc:
            raise ValueError(f"bad contour dump at line {lineno}: {raw!r}") from exc
    return contours
