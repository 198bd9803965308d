"""Conforming Delaunay triangulation of a simple polygon with quality refinement.

Incremental Bowyer-Watson construction over the polygon vertices, followed by
segment conformity (split any polygon segment until it appears as a mesh edge
and its diametral disk is empty) and Ruppert-style refinement (split segments
encroached by circumcenters, insert circumcenters of triangles violating the
area or angle bounds).

Geometric predicates use a floating-point filter with an exact fallback on
``fractions.Fraction`` (floats convert to Fraction losslessly), so results are
deterministic and independent of degeneracies such as cocircular grid points.

No randomness anywhere: identical input produces identical output arrays.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .errors import DegenerateBoundary, RefinementDiverged

# Shewchuk-style filter constants for double precision.
_O2D_BOUND = 3.3306690738754716e-16
_ICC_BOUND = 1.1102230246251565e-15
_DOT_BOUND = 3.3306690738754716e-16


def _orient2d(pa, pb, pc) -> int:
    """Sign of the signed area of (pa, pb, pc): +1 counter-clockwise."""
    detl = (pb[0] - pa[0]) * (pc[1] - pa[1])
    detr = (pb[1] - pa[1]) * (pc[0] - pa[0])
    det = detl - detr
    detsum = abs(detl) + abs(detr)
    if abs(det) > _O2D_BOUND * detsum:
        return 1 if det > 0 else -1
    ax, ay = Fraction(pa[0]), Fraction(pa[1])
    bx, by = Fraction(pb[0]), Fraction(pb[1])
    cx, cy = Fraction(pc[0]), Fraction(pc[1])
    d = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    return (d > 0) - (d < 0)


def _incircle(pa, pb, pc, pd) -> int:
    """+1 iff pd lies strictly inside the circumcircle of CCW (pa, pb, pc)."""
    adx = pa[0] - pd[0]
    ady = pa[1] - pd[1]
    bdx = pb[0] - pd[0]
    bdy = pb[1] - pd[1]
    cdx = pc[0] - pd[0]
    cdy = pc[1] - pd[1]
    bdxcdy = bdx * cdy
    cdxbdy = cdx * bdy
    alift = adx * adx + ady * ady
    cdxady = cdx * ady
    adxcdy = adx * cdy
    blift = bdx * bdx + bdy * bdy
    adxbdy = adx * bdy
    bdxady = bdx * ady
    clift = cdx * cdx + cdy * cdy
    det = (alift * (bdxcdy - cdxbdy)
           + blift * (cdxady - adxcdy)
           + clift * (adxbdy - bdxady))
    permanent = ((abs(bdxcdy) + abs(cdxbdy)) * alift
                 + (abs(cdxady) + abs(adxcdy)) * blift
                 + (abs(adxbdy) + abs(bdxady)) * clift)
    if abs(det) > _ICC_BOUND * permanent:
        return 1 if det > 0 else -1
    fax, fay = Fraction(pa[0]) - Fraction(pd[0]), Fraction(pa[1]) - Fraction(pd[1])
    fbx, fby = Fraction(pb[0]) - Fraction(pd[0]), Fraction(pb[1]) - Fraction(pd[1])
    fcx, fcy = Fraction(pc[0]) - Fraction(pd[0]), Fraction(pc[1]) - Fraction(pd[1])
    d = ((fax * fax + fay * fay) * (fbx * fcy - fcx * fby)
         + (fbx * fbx + fby * fby) * (fcx * fay - fax * fcy)
         + (fcx * fcx + fcy * fcy) * (fax * fby - fbx * fay))
    return (d > 0) - (d < 0)


def _in_diametral(pa, pb, pp) -> bool:
    """True iff pp lies strictly inside the closed diametral disk of (pa, pb)."""
    t1 = (pa[0] - pp[0]) * (pb[0] - pp[0])
    t2 = (pa[1] - pp[1]) * (pb[1] - pp[1])
    dot = t1 + t2
    if abs(dot) > _DOT_BOUND * (abs(t1) + abs(t2)):
        return dot < 0
    d = ((Fraction(pa[0]) - Fraction(pp[0])) * (Fraction(pb[0]) - Fraction(pp[0]))
         + (Fraction(pa[1]) - Fraction(pp[1])) * (Fraction(pb[1]) - Fraction(pp[1])))
    return d < 0


def _circumcenter(pa, pb, pc):
    d = 2.0 * ((pa[0] * (pb[1] - pc[1]))
               + (pb[0] * (pc[1] - pa[1]))
               + (pc[0] * (pa[1] - pb[1])))
    if d == 0.0:
        return None
    a2 = pa[0] * pa[0] + pa[1] * pa[1]
    b2 = pb[0] * pb[0] + pb[1] * pb[1]
    c2 = pc[0] * pc[0] + pc[1] * pc[1]
    ux = (a2 * (pb[1] - pc[1]) + b2 * (pc[1] - pa[1]) + c2 * (pa[1] - pb[1])) / d
    uy = (a2 * (pc[0] - pb[0]) + b2 * (pa[0] - pc[0]) + c2 * (pb[0] - pa[0])) / d
    if not (np.isfinite(ux) and np.isfinite(uy)):
        return None
    return (ux, uy)


def _tri_area(pa, pb, pc) -> float:
    return 0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pb[1] - pa[1]) * (pc[0] - pa[0]))


def _min_angle_deg(pa, pb, pc) -> float:
    # law of cosines on the three corners
    pts = (pa, pb, pc)
    best = 180.0
    for i in range(3):
        o = pts[i]
        u = (pts[(i + 1) % 3][0] - o[0], pts[(i + 1) % 3][1] - o[1])
        v = (pts[(i + 2) % 3][0] - o[0], pts[(i + 2) % 3][1] - o[1])
        nu = np.hypot(u[0], u[1])
        nv = np.hypot(v[0], v[1])
        if nu == 0.0 or nv == 0.0:
            return 0.0
        cosang = min(1.0, max(-1.0, (u[0] * v[0] + u[1] * v[1]) / (nu * nv)))
        best = min(best, float(np.degrees(np.arccos(cosang))))
    return best


def _segments_properly_intersect(p1, p2, p3, p4) -> bool:
    d1 = _orient2d(p3, p4, p1)
    d2 = _orient2d(p3, p4, p2)
    d3 = _orient2d(p1, p2, p3)
    d4 = _orient2d(p1, p2, p4)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 and d2 and d3 and d4:
        return True

    def on_segment(a, b, c):
        return (_orient2d(a, b, c) == 0
                and min(a[0], b[0]) <= c[0] <= max(a[0], b[0])
                and min(a[1], b[1]) <= c[1] <= max(a[1], b[1]))

    return (on_segment(p3, p4, p1) or on_segment(p3, p4, p2)
            or on_segment(p1, p2, p3) or on_segment(p1, p2, p4))


class _Triangulation:
    """Delaunay triangulation maintained under incremental insertion."""

    def __init__(self, bbox_min, bbox_max):
        cx = 0.5 * (bbox_min[0] + bbox_max[0])
        cy = 0.5 * (bbox_min[1] + bbox_max[1])
        r = 32.0 * max(bbox_max[0] - bbox_min[0], bbox_max[1] - bbox_min[1], 1.0)
        # vertices 0..2 are the enclosing super-triangle, dropped at extraction
        self.points = [(cx - r, cy - r), (cx + r, cy - r), (cx, cy + r)]
        self.tris: list = [(0, 1, 2)]
        self.edges: dict = {}
        for e in ((0, 1), (1, 2), (0, 2)):
            self.edges[e] = [0]
        self.hint = 0

    @staticmethod
    def _ekey(u, v):
        return (u, v) if u < v else (v, u)

    def alive(self, t) -> bool:
        return self.tris[t] is not None

    def edge_tris(self, u, v):
        return self.edges.get(self._ekey(u, v), ())

    def _locate(self, p) -> int:
        t = self.hint
        if not self.alive(t):
            t = next(i for i in range(len(self.tris) - 1, -1, -1) if self.alive(i))
        seen = set()
        while True:
            if t in seen:
                break
            seen.add(t)
            a, b, c = self.tris[t]
            pa, pb, pc = self.points[a], self.points[b], self.points[c]
            if _orient2d(pa, pb, p) < 0:
                nxt = [x for x in self.edge_tris(a, b) if x != t]
            elif _orient2d(pb, pc, p) < 0:
                nxt = [x for x in self.edge_tris(b, c) if x != t]
            elif _orient2d(pc, pa, p) < 0:
                nxt = [x for x in self.edge_tris(c, a) if x != t]
            else:
                return t
            if not nxt:
                break
            t = nxt[0]
        # fallback scan; only reached on walk cycles through degenerate regions
        for i, tri in enumerate(self.tris):
            if tri is None:
                continue
            a, b, c = tri
            if (_orient2d(self.points[a], self.points[b], p) >= 0
                    and _orient2d(self.points[b], self.points[c], p) >= 0
                    and _orient2d(self.points[c], self.points[a], p) >= 0):
                return i
        raise DegenerateBoundary("point escaped the triangulation bounds")

    def _kill(self, t):
        a, b, c = self.tris[t]
        for u, v in ((a, b), (b, c), (c, a)):
            lst = self.edges[self._ekey(u, v)]
            lst.remove(t)
            if not lst:
                del self.edges[self._ekey(u, v)]
        self.tris[t] = None

    def _spawn(self, a, b, c) -> int:
        t = len(self.tris)
        self.tris.append((a, b, c))
        for u, v in ((a, b), (b, c), (c, a)):
            self.edges.setdefault(self._ekey(u, v), []).append(t)
        return t

    def insert(self, p):
        """Insert p, returning (vertex_id, created) with created False on duplicates."""
        t0 = self._locate(p)
        for vid in self.tris[t0]:
            q = self.points[vid]
            if q[0] == p[0] and q[1] == p[1]:
                return vid, False
        # cavity: connected triangles whose circumdisk strictly contains p
        cavity = {t0}
        stack = [t0]
        while stack:
            t = stack.pop()
            a, b, c = self.tris[t]
            for u, v in ((a, b), (b, c), (c, a)):
                for nb in self.edge_tris(u, v):
                    if nb == t or nb in cavity:
                        continue
                    na, nbv, nc = self.tris[nb]
                    if _incircle(self.points[na], self.points[nbv], self.points[nc], p) > 0:
                        cavity.add(nb)
                        stack.append(nb)
        boundary = []
        for t in sorted(cavity):
            a, b, c = self.tris[t]
            for u, v in ((a, b), (b, c), (c, a)):
                others = [x for x in self.edge_tris(u, v) if x != t]
                if not others or others[0] not in cavity:
                    boundary.append((u, v))
        vid = len(self.points)
        self.points.append((p[0], p[1]))
        for t in sorted(cavity):
            self._kill(t)
        last = None
        for u, v in boundary:
            last = self._spawn(u, v, vid)
        self.hint = last
        return vid, True


class _Refiner:
    def __init__(self, polygon: np.ndarray, max_area: float, min_angle: float,
                 steiner_cap: int):
        self.max_area = max_area
        self.min_angle = min_angle
        self.steiner_cap = steiner_cap
        self.steiner_used = 0
        lo = polygon.min(axis=0)
        hi = polygon.max(axis=0)
        self.dt = _Triangulation(lo, hi)
        ids = []
        for x, y in polygon:
            vid, created = self.dt.insert((float(x), float(y)))
            if not created:
                raise DegenerateBoundary("duplicate boundary vertex")
            ids.append(vid)
        n = len(ids)
        self.n_roots = n
        # directed polygon subsegments; entry [u, v, root] keeps the original
        # polygon edge index so corner-aware rules survive splitting
        self.segments = [[ids[i], ids[(i + 1) % n], i] for i in range(n)]
        # roots i-1 and i meet at input vertex ids[i]; record its interior angle
        self.on_roots = {ids[i]: {(i - 1) % n, i} for i in range(n)}
        self.corner_angle = {}
        self.corner_vertex = {}
        for i in range(n):
            prev_pt = polygon[(i - 1) % n]
            here = polygon[i]
            nxt = polygon[(i + 1) % n]
            u = (prev_pt[0] - here[0], prev_pt[1] - here[1])
            v = (nxt[0] - here[0], nxt[1] - here[1])
            nu = np.hypot(*u)
            nv = np.hypot(*v)
            cosang = min(1.0, max(-1.0, (u[0] * v[0] + u[1] * v[1]) / (nu * nv)))
            pair = frozenset(((i - 1) % n, i))
            self.corner_angle[pair] = float(np.degrees(np.arccos(cosang)))
            self.corner_vertex[pair] = ids[i]

    # -- corner bookkeeping -----------------------------------------------

    def _sharp_corner(self, root_a, root_b):
        """Shared input corner of two roots when its angle is below 60 degrees."""
        pair = frozenset((root_a, root_b))
        if root_a != root_b and pair in self.corner_angle and self.corner_angle[pair] < 60.0:
            return self.corner_vertex[pair]
        return None

    # -- segment machinery ----------------------------------------------

    def _walls(self):
        return {self.dt._ekey(u, v) for u, v, _ in self.segments}

    def _seg_present(self, u, v) -> bool:
        return bool(self.dt.edge_tris(u, v))

    def _seg_apex_encroached(self, u, v, root) -> bool:
        pu, pv = self.dt.points[u], self.dt.points[v]
        for t in self.dt.edge_tris(u, v):
            for w in self.dt.tris[t]:
                if w in (u, v) or w < 3:
                    continue
                # a vertex across a sharp input corner can encroach forever;
                # the corner geometry is the user's, leave it alone
                if any(self._sharp_corner(root, r) is not None
                       for r in self.on_roots.get(w, ())):
                    continue
                if _in_diametral(pu, pv, self.dt.points[w]):
                    return True
        return False

    def _split_segment(self, i) -> bool:
        u, v, root = self.segments[i]
        pu, pv = self.dt.points[u], self.dt.points[v]
        length = float(np.hypot(pv[0] - pu[0], pv[1] - pu[1]))
        mid = (0.5 * (pu[0] + pv[0]), 0.5 * (pu[1] + pv[1]))
        # concentric-shell split off sharp input corners: both legs of the
        # corner acquire split points at matching power-of-two distances,
        # which stops midpoint ping-pong across the corner
        for end, other in ((u, v), (v, u)):
            roots_here = self.on_roots.get(end, ())
            if len(roots_here) == 2 and any(
                    self._sharp_corner(a, b) == end
                    for a in roots_here for b in roots_here if a != b):
                shell = 2.0 ** round(np.log2(0.5 * length))
                while shell >= 0.9 * length:
                    shell *= 0.5
                frac = shell / length
                pe = self.dt.points[end]
                po = self.dt.points[other]
                mid = (pe[0] + frac * (po[0] - pe[0]), pe[1] + frac * (po[1] - pe[1]))
                break
        if mid == pu or mid == pv:
            return False  # segment at float resolution, cannot halve further
        self._budget()
        m, created = self.dt.insert(mid)
        if not created:
            return False
        self.on_roots[m] = {root}
        self.segments[i] = [u, m, root]
        self.segments.insert(i + 1, [m, v, root])
        return True

    def _budget(self):
        self.steiner_used += 1
        if self.steiner_used > self.steiner_cap:
            raise RefinementDiverged(
                f"refinement exceeded the Steiner insertion cap ({self.steiner_cap})")

    def conform(self):
        """Split subsegments until all are mesh edges with empty diametral disks."""
        changed = True
        while changed:
            changed = False
            i = 0
            while i < len(self.segments):
                u, v, root = self.segments[i]
                if not self._seg_present(u, v) or self._seg_apex_encroached(u, v, root):
                    if self._split_segment(i):
                        changed = True
                        continue
                i += 1

    # -- interior classification -----------------------------------------

    def classify(self):
        """Interior flags via flood fill; polygon segments act as walls."""
        dt = self.dt
        walls = self._walls()
        interior = [False] * len(dt.tris)
        seeds = []
        for u, v, _ in self.segments:
            pu, pv = dt.points[u], dt.points[v]
            for t in dt.edge_tris(u, v):
                w = next(x for x in dt.tris[t] if x != u and x != v)
                if _orient2d(pu, pv, dt.points[w]) > 0:
                    seeds.append(t)
        stack = sorted(set(seeds))
        for t in stack:
            interior[t] = True
        while stack:
            t = stack.pop()
            a, b, c = dt.tris[t]
            for u, v in ((a, b), (b, c), (c, a)):
                if dt._ekey(u, v) in walls:
                    continue
                for nb in dt.edge_tris(u, v):
                    if nb != t and not interior[nb]:
                        interior[nb] = True
                        stack.append(nb)
        return interior

    # -- quality refinement -----------------------------------------------

    def _is_bad(self, t, walls):
        a, b, c = self.dt.tris[t]
        pa, pb, pc = self.dt.points[a], self.dt.points[b], self.dt.points[c]
        area = abs(_tri_area(pa, pb, pc))
        if area > self.max_area:
            return True
        if self.min_angle <= 0.0:
            return False
        if _min_angle_deg(pa, pb, pc) >= self.min_angle:
            return False
        # an angle pinned between two polygon segments is input geometry;
        # splitting it cannot help and would not terminate
        pts = (a, b, c)
        for i in range(3):
            o, u, v = pts[i], pts[(i + 1) % 3], pts[(i + 2) % 3]
            po = self.dt.points[o]
            vu = (self.dt.points[u][0] - po[0], self.dt.points[u][1] - po[1])
            vv = (self.dt.points[v][0] - po[0], self.dt.points[v][1] - po[1])
            nu = np.hypot(*vu)
            nv = np.hypot(*vv)
            cosang = (vu[0] * vv[0] + vu[1] * vv[1]) / (nu * nv)
            if np.degrees(np.arccos(min(1.0, max(-1.0, cosang)))) < self.min_angle:
                if (self.dt._ekey(o, u) in walls) and (self.dt._ekey(o, v) in walls):
                    return False
        if self._seditious_edge(a, b, c):
            return False
        return True

    def _seditious_edge(self, a, b, c) -> bool:
        """Shortest edge spans a sharp input corner at matching shell radii.

        Splitting such a triangle recreates the same configuration one shell
        down; the corner angle is input geometry, so leave it be.
        """
        pts = self.dt.points
        edges = sorted(((a, b), (b, c), (c, a)),
                       key=lambda e: (pts[e[0]][0] - pts[e[1]][0]) ** 2
                       + (pts[e[0]][1] - pts[e[1]][1]) ** 2)
        p, q = edges[0]
        for rp in self.on_roots.get(p, ()):
            for rq in self.on_roots.get(q, ()):
                w = self._sharp_corner(rp, rq)
                if w is None or w in (p, q):
                    continue
                pw = pts[w]
                dp = np.hypot(pts[p][0] - pw[0], pts[p][1] - pw[1])
                dq = np.hypot(pts[q][0] - pw[0], pts[q][1] - pw[1])
                if abs(dp - dq) <= 1e-6 * max(dp, dq):
                    return True
        return False

    def refine(self, max_passes: int = 500):
        self.conform()
        for _ in range(max_passes):
            walls = self._walls()
            interior = self.classify()
            bad = [t for t in range(len(self.dt.tris))
                   if self.dt.alive(t) and interior[t] and self._is_bad(t, walls)]
            if not bad:
                return
            for t in bad:
                if not self.dt.alive(t):
                    continue
                a, b, c = self.dt.tris[t]
                cc = _circumcenter(self.dt.points[a], self.dt.points[b], self.dt.points[c])
                if cc is None:
                    continue
                hit = [i for i, (u, v, _) in enumerate(self.segments)
                       if _in_diametral(self.dt.points[u], self.dt.points[v], cc)]
                if hit:
                    # split in reverse so earlier indices stay valid
                    for i in reversed(hit):
                        self._split_segment(i)
                else:
                    self._budget()
                    self.dt.insert(cc)
                self.conform()
        raise RefinementDiverged(f"refinement did not settle in {max_passes} passes")

    # -- extraction --------------------------------------------------------

    def extract(self):
        dt = self.dt
        interior = self.classify()
        kept = [t for t in range(len(dt.tris)) if dt.alive(t) and interior[t]]
        used = sorted({v for t in kept for v in dt.tris[t]})
        remap = {v: i for i, v in enumerate(used)}
        pts = np.array([dt.points[v] for v in used], dtype=np.float64)
        tris = np.array([[remap[v] for v in dt.tris[t]] for t in kept], dtype=np.int64)
        for k in range(len(tris)):
            a, b, c = tris[k]
            if _orient2d(pts[a], pts[b], pts[c]) < 0:
                tris[k] = (a, c, b)
        kept_edges = set()
        for a, b, c in tris:
            for u, v in ((a, b), (b, c), (c, a)):
                kept_edges.add((min(u, v), max(u, v)))
        bedges = []
        for u, v, _ in self.segments:
            ru, rv = remap.get(u), remap.get(v)
            if ru is None or rv is None or (min(ru, rv), max(ru, rv)) not in kept_edges:
                raise DegenerateBoundary("boundary segment missing from final mesh")
            bedges.append((ru, rv))
        return pts, tris, np.array(bedges, dtype=np.int64)


def _validate_polygon(polygon: np.ndarray):
    n = len(polygon)
    if n < 3:
        raise DegenerateBoundary(f"polygon needs at least 3 points, got {n}")
    if not np.all(np.isfinite(polygon)):
        raise DegenerateBoundary("polygon contains non-finite coordinates")
    for i in range(n):
        if tuple(polygon[i]) == tuple(polygon[(i + 1) % n]):
            raise DegenerateBoundary(f"repeated consecutive point at index {i}")
    area2 = 0.0
    for i in range(n):
        x0, y0 = polygon[i]
        x1, y1 = polygon[(i + 1) % n]
        area2 += x0 * y1 - x1 * y0
    if abs(area2) < 1e-12:
        raise DegenerateBoundary("polygon is collinear (zero area)")
    for i in range(n):
        a, b = polygon[i], polygon[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or j == (i + 1) % n:
                continue
            c, d = polygon[j], polygon[(j + 1) % n]
            if _segments_properly_intersect(tuple(a), tuple(b), tuple(c), tuple(d)):
                raise DegenerateBoundary(
                    f"polygon self-intersects between edges {i} and {j}")
    return area2


def conforming_triangulation(polygon, max_area: float, min_angle: float,
                             steiner_cap: int = 20000):
    """Triangulate the interior of a simple closed polygon.

    Returns (points, triangles, boundary_edges). Every input segment appears
    as a chain of mesh edges (split points lie exactly on the input segment),
    every triangle has positive orientation, area at most ``max_area`` and
    minimum angle at least ``min_angle`` degrees (angles forced by the input
    geometry excepted).
    """
    polygon = np.asarray(polygon, dtype=np.float64)
    area2 = _validate_polygon(polygon)
    if area2 < 0:
        polygon = polygon[::-1].copy()
    refiner = _Refiner(polygon, max_area, min_angle, steiner_cap)
    refiner.refine()
    return refiner.extract()
