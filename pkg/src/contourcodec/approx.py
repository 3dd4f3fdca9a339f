"""RD-optimal contour approximation by dynamic programming over segments.

A two-direction segment must keep its endpoints, so every candidate is a
monotone lattice path inside the rectangle spanned by them; the DP state is
(recent direction window, head corner), and the cost of an edge is
``lambda * bits + row_distortion`` (the distortion term only for vertical
edges, whose horizontal shift against the original edge in the same pixel
row is what the proxy charges).  Adjacent segments are merged greedily when
re-optimizing the pair inside their joint rectangle, plus the distortion of
projecting out-of-rectangle original edges onto it, beats the pair's summed
cost.

Rate terms reuse the coder's cached context distributions, so what the DP
minimizes is exactly what the arithmetic coder will spend (up to the uniform
early-context positions, which cost the same for every candidate).
"""

from __future__ import annotations

import logging
import math
from collections import defaultdict, deque
from dataclasses import dataclass

from .aec import LOG2_3, AecParams, estimate_rate, relative_bits
from .contour import (
    OPPOSITE,
    Contour,
    Segment,
    join_segments,
    relative_between,
    segment_endpoint,
    segment_vertical_columns,
    split_segments,
    step,
)
from .swim import SwimConfig, luminance, row_distortion, window_anchor

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ApproxConfig:
    """lagrange: bits-to-distortion exchange rate; interview_weight: squared
    edge-shift penalty used when approximating the dependent view; merge:
    enable greedy segment merging."""

    lagrange: float = 0.0
    interview_weight: float = 1e6
    merge: bool = True
    aec: AecParams = AecParams()
    swim: SwimConfig = SwimConfig()

    def __post_init__(self):
        if self.lagrange < 0:
            raise ValueError("lagrange must be >= 0")
        if self.interview_weight < 0:
            raise ValueError("interview_weight must be >= 0")


@dataclass(frozen=True)
class RdCost:
    distortion: float
    rate: float  # bits
    total: float  # distortion + lambda * rate


def interview_row_distortion(image, row, window_start, q_orig, q_new, cfg: SwimConfig, weight: float) -> float:
    """Row distortion plus the inter-view consistency penalty weight*|shift|^2."""
    return row_distortion(image, row, window_start, q_orig, q_new, cfg) + weight * (q_new - q_orig) ** 2


def _edge_bits(recent, edges_before: int, next_dir: str, params: AecParams) -> float:
    if edges_before == 0:
        return 2.0
    if edges_before < params.context_len:
        return LOG2_3
    rel = relative_between(recent[-1], next_dir)
    return relative_bits(recent, params)["lsr".index(rel)]


class _RowCosts:
    """Lazy (row, column) table of shifted-edge distortions for one segment."""

    def __init__(self, lum, vertical_columns, cfg: ApproxConfig, penalty_weight: float):
        self._lum = lum
        self._cols = vertical_columns
        self._cfg = cfg
        self._weight = penalty_weight
        self._memo = {}

    def cost(self, row: int, q: int) -> float:
        key = (row, q)
        value = self._memo.get(key)
        if value is None:
            q_orig = self._cols[row]
            anchor = window_anchor(q_orig, self._lum.shape[1], self._cfg.swim.block)
            value = row_distortion(self._lum, row, anchor, q_orig, q, self._cfg.swim)
            if self._weight:
                value += self._weight * (q - q_orig) ** 2
            self._memo[key] = value
        return value


def _crossed_rows(seg: Segment):
    p0 = seg.start[0]
    p1 = segment_endpoint(seg)[0]
    return range(p0, p1) if p1 >= p0 else range(p1, p0)


def row_cost_table(color, vertical_columns, cfg: ApproxConfig, penalty_weight: float = 0.0) -> "_RowCosts":
    """Shareable lazy table of shifted-edge distortions (one per segment)."""
    return _RowCosts(luminance(color), vertical_columns, cfg, penalty_weight)


def segment_path_cost(seg: Segment, dirs, prior_dirs, prior_count, color, vertical_columns, cfg: ApproxConfig, penalty_weight: float = 0.0, rows: "_RowCosts | None" = None) -> RdCost:
    """Cost of one explicit candidate path, accumulated edge by edge in the
    same order the DP uses (so totals are bit-comparable)."""
    lum = luminance(color)
    k = cfg.aec.context_len
    if rows is None:
        rows = _RowCosts(lum, vertical_columns, cfg, penalty_weight)
    recent = tuple(prior_dirs)[-k:]
    dir_v = seg.dirpair[0]
    p, q = seg.start
    total = 0.0
    rate = 0.0
    dist = 0.0
    for t, d in enumerate(dirs, 1):
        bits = _edge_bits(recent, prior_count + t - 1, d, cfg.aec)
        total += cfg.lagrange * bits
        rate += bits
        if d == dir_v:
            row = p if d == "S" else p - 1
            c = rows.cost(row, q)
            total += c
            dist += c
        recent = (recent + (d,))[-k:]
        p, q = step((p, q), d)
    return RdCost(dist, rate, total)


def approximate_segment(seg: Segment, prior_dirs, color, vertical_columns, cfg: ApproxConfig, *, prior_count: int | None = None, penalty_weight: float = 0.0, forbidden_last: str | None = None):
    """Minimize distortion + lambda*rate over all same-endpoint paths.

    ``prior_dirs`` are the directions already coded before this segment (the
    context seed); ``prior_count`` the number of contour edges preceding it
    (defaults to len(prior_dirs)).  ``vertical_columns`` maps each pixel row
    crossed by the original segment's vertical edges to the edge column.
    ``forbidden_last`` excludes paths ending in that direction, so the next
    segment of the contour can never be forced into a 180-degree turn.

    Returns (approximated Segment, RdCost).
    """
    lum = luminance(color)
    k = cfg.aec.context_len
    prior = tuple(prior_dirs)[-k:]
    if prior_count is None:
        prior_count = len(prior)
    if seg.length == 0:
        return seg, RdCost(0.0, 0.0, 0.0)
    missing = [r for r in _crossed_rows(seg) if r not in vertical_columns]
    if missing:
        raise ValueError(f"vertical_columns missing rows {missing}")

    dir_v, dir_h = seg.dirpair
    p_end, q_end = segment_endpoint(seg)
    rows = _RowCosts(lum, vertical_columns, cfg, penalty_weight)

    layer = {(prior, seg.start[0], seg.start[1]): 0.0}
    parents = []
    for t in range(1, seg.length + 1):
        nxt = {}
        par = {}
        edges_before = prior_count + t - 1
        for (recent, p, q), cost in layer.items():
            for d in (dir_v, dir_h):  # vertical evaluated first (tie preference)
                if d == dir_v:
                    if p == p_end:
                        continue
                else:
                    if q == q_end:
                        continue
                if recent and OPPOSITE[recent[-1]] == d:
                    continue
                c = cost + cfg.lagrange * _edge_bits(recent, edges_before, d, cfg.aec)
                if d == dir_v:
                    c += rows.cost(p if d == "S" else p - 1, q)
                np_, nq_ = step((p, q), d)
                state = ((recent + (d,))[-k:], np_, nq_)
                if state not in nxt or c < nxt[state]:
                    nxt[state] = c
                    par[state] = ((recent, p, q), d)
        if not nxt:
            raise ValueError("unreachable endpoint: malformed segment")
        layer = nxt
        parents.append(par)

    best_state = None
    best_cost = math.inf
    for state, cost in layer.items():
        if forbidden_last is not None and state[0] and state[0][-1] == forbidden_last:
            continue
        if cost < best_cost:
            best_cost = cost
            best_state = state
    if best_state is None or math.isinf(best_cost):
        # reachable when a projected merge candidate leaves no finite path;
        # callers reject the infinite cost
        logger.debug("every candidate path has infinite distortion; keeping the original segment")
        original = segment_path_cost(seg, seg.dirs, prior, prior_count, lum, vertical_columns, cfg, penalty_weight)
        return seg, RdCost(math.inf, original.rate, math.inf)

    dirs = []
    state = best_state
    for par in reversed(parents):
        state, d = par[state]
        dirs.append(d)
    dirs.reverse()
    result = Segment(seg.start, seg.dirpair, "".join(dirs))
    cost = segment_path_cost(result, dirs, prior, prior_count, lum, vertical_columns, cfg, penalty_weight)
    return result, cost


def project_onto_rectangle(a: Segment, b: Segment):
    """Project the pair's edges onto the rectangle spanned by a's start and
    b's end, clamping vertices and dropping collapsed edges.

    Returns the projected two-direction Segment, or None when the pair is not
    mergeable (coincident corners, or the clamped walk is not monotone).
    """
    if segment_endpoint(a) != b.start:
        raise ValueError("segments are not adjacent")
    l0 = a.start
    l2 = segment_endpoint(b)
    if l0 == l2:
        return None
    p_lo, p_hi = sorted((l0[0], l2[0]))
    q_lo, q_hi = sorted((l0[1], l2[1]))
    dir_v = "S" if l2[0] >= l0[0] else "N"
    dir_h = "E" if l2[1] >= l0[1] else "W"
    dirs = []
    p, q = l0
    prev = l0
    for d in a.dirs + b.dirs:
        p, q = step((p, q), d)
        clamped = (min(max(p, p_lo), p_hi), min(max(q, q_lo), q_hi))
        if clamped != prev:
            dp, dq = clamped[0] - prev[0], clamped[1] - prev[1]
            if dp == 1 and dq == 0:
                nd = "S"
            elif dp == -1 and dq == 0:
                nd = "N"
            elif dp == 0 and dq == 1:
                nd = "E"
            elif dp == 0 and dq == -1:
                nd = "W"
            else:
                return None
            if nd not in (dir_v, dir_h):
                return None
            dirs.append(nd)
            prev = clamped
    if prev != l2:
        return None
    return Segment(l0, (dir_v, dir_h), "".join(dirs))


def projection_shifts(a: Segment, b: Segment):
    """(row, original column, projected column) for every vertical edge of the
    pair whose column the rectangle projection moves."""
    l0 = a.start
    l2 = segment_endpoint(b)
    q_lo, q_hi = sorted((l0[1], l2[1]))
    shifts = []
    p, q = l0
    for d in a.dirs + b.dirs:
        if d in "SN":
            row = p if d == "S" else p - 1
            qc = min(max(q, q_lo), q_hi)
            if qc != q:
                shifts.append((row, q, qc))
        p, q = step((p, q), d)
    return shifts


def merge_segments(a: Segment, b: Segment, prior_dirs, color, cfg: ApproxConfig, *, prior_count: int | None = None, cost_a: RdCost | None = None, cost_b: RdCost | None = None, next_dir: str | None = None, penalty_weight: float = 0.0):
    """Try to replace two adjacent segments by one re-optimized segment.

    Returns (merged Segment, RdCost including the merge distortion) when the
    merge strictly lowers the summed cost, else None.  When per-segment costs
    are not supplied they are computed here with the same configuration.
    """
    lum = luminance(color)
    k = cfg.aec.context_len
    prior = tuple(prior_dirs)[-k:]
    if prior_count is None:
        prior_count = len(prior)
    if cost_a is None or cost_b is None:
        a_seg, cost_a = approximate_segment(
            a, prior, lum, segment_vertical_columns(a), cfg,
            prior_count=prior_count, penalty_weight=penalty_weight,
            forbidden_last=OPPOSITE[b.dirs[0]],
        )
        prior_b = (prior + tuple(a_seg.dirs))[-k:]
        _, cost_b = approximate_segment(b, prior_b, lum, segment_vertical_columns(b), cfg, prior_count=prior_count + a.length, penalty_weight=penalty_weight)

    projected = project_onto_rectangle(a, b)
    if projected is None:
        return None
    merge_d = 0.0
    for row, q_orig, q_proj in projection_shifts(a, b):
        anchor = window_anchor(q_orig, lum.shape[1], cfg.swim.block)
        merge_d += row_distortion(lum, row, anchor, q_orig, q_proj, cfg.swim)
        if penalty_weight:
            merge_d += penalty_weight * (q_proj - q_orig) ** 2
    if math.isinf(merge_d):
        return None
    try:
        mseg, mcost = approximate_segment(
            projected, prior, lum, segment_vertical_columns(projected), cfg,
            prior_count=prior_count, penalty_weight=penalty_weight,
            forbidden_last=None if next_dir is None else OPPOSITE[next_dir],
        )
    except ValueError:
        return None
    if math.isinf(mcost.total):
        return None
    if mseg.dirs and prior and OPPOSITE[prior[-1]] == mseg.dirs[0]:
        return None
    if next_dir is not None and mseg.dirs and OPPOSITE[mseg.dirs[-1]] == next_dir:
        return None
    total = mcost.total + merge_d
    if total < cost_a.total + cost_b.total:
        return mseg, RdCost(mcost.distortion + merge_d, mcost.rate, total)
    return None


def _prefix_context(slots, index: int, k: int):
    dirs = []
    count = 0
    for source, approx, _cost in slots[:index]:
        dirs.extend(approx.dirs)
        count += approx.length
    return tuple(dirs)[-k:], count


def _duplicate_edges(contour: Contour) -> bool:
    seen = set()
    p, q = contour.start
    for d in contour.absolute_dirs():
        nxt = step((p, q), d)
        edge = ((p, q), nxt) if (p, q) < nxt else (nxt, (p, q))
        if edge in seen:
            return True
        seen.add(edge)
        p, q = nxt
    return False


def approximate_contour(contour: Contour, depth, color, cfg: ApproxConfig, *, penalty_weight: float = 0.0):
    """Approximate a whole contour: per-segment DP, then greedy merging of
    adjacent pairs (left-to-right passes repeated until no pass improves).

    Returns (approximated Contour, RdCost).  The reported rate is the entropy
    estimate of the final reassembled contour; the distortion is the sum over
    segments including any merge distortion.
    """
    if depth is not None:
        pix = depth.pixels if hasattr(depth, "pixels") else depth
        h, w = pix.shape
        for p, q in contour.points():
            if not (0 <= p <= h and 0 <= q <= w):
                raise ValueError("contour leaves the depth image lattice")
    lum = luminance(color)
    k = cfg.aec.context_len
    slots = []
    recent = ()
    count = 0
    originals = split_segments(contour)
    for i, seg in enumerate(originals):
        # ending against the next segment's original first step would force a
        # 180-degree turn at the seam (or push it onto edges beyond the match
        # window); the original seam direction always leaves a finite path
        forbidden = OPPOSITE[originals[i + 1].dirs[0]] if i + 1 < len(originals) else None
        approx, cost = approximate_segment(
            seg, recent, lum, segment_vertical_columns(seg), cfg,
            prior_count=count, penalty_weight=penalty_weight, forbidden_last=forbidden,
        )
        slots.append([seg, approx, cost])
        recent = (recent + tuple(approx.dirs))[-k:]
        count += approx.length

    if cfg.merge:
        improved = True
        while improved:
            improved = False
            i = 0
            while i + 1 < len(slots):
                prior, pcount = _prefix_context(slots, i, k)
                nd = slots[i + 2][1].dirs[0] if i + 2 < len(slots) else None
                res = merge_segments(
                    slots[i][0], slots[i + 1][0], prior, lum, cfg,
                    prior_count=pcount, cost_a=slots[i][2], cost_b=slots[i + 1][2],
                    next_dir=nd, penalty_weight=penalty_weight,
                )
                if res is None:
                    i += 1
                    continue
                mseg, mcost = res
                projected = project_onto_rectangle(slots[i][0], slots[i + 1][0])
                slots[i : i + 2] = [[projected, mseg, mcost]]
                improved = True

    assembled = join_segments([s[1] for s in slots])
    if _duplicate_edges(assembled):
        logger.warning("approximation produced a self-touching contour; keeping the original")
        rate = estimate_rate(contour, cfg.aec)
        return contour, RdCost(0.0, rate, cfg.lagrange * rate)
    distortion = sum(s[2].distortion for s in slots)
    rate = estimate_rate(assembled, cfg.aec)
    return assembled, RdCost(distortion, rate, distortion + cfg.lagrange * rate)


def contour_row_shifts(original: Contour, approximated: Contour):
    """Per-row (original column, new column) pairs of vertical edges, matched
    by the order rows are crossed along the two contours.

    Both contours share endpoints, so they cross the same multiset of rows;
    pairing in traversal order matches each vertical edge with its shifted
    counterpart.
    """

    def crossings(c: Contour):
        out = []
        p, q = c.start
        for d in c.absolute_dirs():
            if d == "S":
                out.append((p, q))
            elif d == "N":
                out.append((p - 1, q))
            p, q = step((p, q), d)
        return out

    orig = crossings(original)
    new = crossings(approximated)
    shifts = []
    by_row = defaultdict(deque)
    for row, q in orig:
        by_row[row].append(q)
    for row, q in new:
        if by_row[row]:
            shifts.append((row, by_row[row].popleft(), q))
        else:
            shifts.append((row, q, q))
    return shifts
