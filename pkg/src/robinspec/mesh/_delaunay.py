"""Delaunay refinement kernel (Ruppert style) for tagged planar straight-line graphs.

This file is written in Cython's pure-Python mode.  When the package is built
with Cython it is compiled to an extension module of the same name, which the
import system prefers; otherwise it runs unchanged as ordinary Python.  Both
paths perform the same floating-point operations in the same order, so they
produce identical meshes.

Algorithm outline:
  1. Bowyer-Watson insertion of the boundary points inside a super triangle.
  2. Conforming recovery: split boundary segments until each one is an
     unencroached Delaunay edge.
  3. Inside/outside classification by flood fill that does not cross segments.
  4. Refinement of interior triangles that are skinny (circumradius to
     shortest edge ratio above ``ratio``) or larger than the sizing field,
     inserting circumcenters; a circumcenter that encroaches a segment is
     rejected and the segment is split instead.  Splits next to corner
     vertices use concentric shells.
"""

try:
    import cython
except ImportError:  # pragma: no cover - plain interpreter without Cython
    from . import _cython_shim as cython

import numpy as np


@cython.cfunc
@cython.inline
@cython.exceptval(check=False)
def _orient(ax: cython.double, ay: cython.double, bx: cython.double, by: cython.double,
            cx: cython.double, cy: cython.double) -> cython.double:
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


@cython.cfunc
@cython.inline
@cython.exceptval(check=False)
def _incircle(ax: cython.double, ay: cython.double, bx: cython.double, by: cython.double,
              cx: cython.double, cy: cython.double, dx: cython.double, dy: cython.double) -> cython.double:
    adx: cython.double = ax - dx
    ady: cython.double = ay - dy
    bdx: cython.double = bx - dx
    bdy: cython.double = by - dy
    cdx: cython.double = cx - dx
    cdy: cython.double = cy - dy
    ad: cython.double = adx * adx + ady * ady
    bd: cython.double = bdx * bdx + bdy * bdy
    cd: cython.double = cdx * cdx + cdy * cdy
    return (adx * (bdy * cd - bd * cdy)
            - ady * (bdx * cd - bd * cdx)
            + ad * (bdx * cdy - bdy * cdx))


@cython.cclass
class Refiner:
    # points
    px: cython.double[::1]
    py: cython.double[::1]
    pflag: cython.int[::1]      # 1 for corner input points
    vt: cython.int[::1]         # some triangle incident to each point
    npts: cython.int
    ninput: cython.int
    # triangles: vertices, neighbours across the edge opposite each vertex,
    # segment id on that edge, liveness, inside flag, scratch stamp
    tv: cython.int[::1]
    tn: cython.int[::1]
    tm: cython.int[::1]
    talive: cython.int[::1]
    tin: cython.int[::1]
    tstamp: cython.int[::1]
    ntri: cython.int
    stamp: cython.int
    # segments
    sa: cython.int[::1]
    sb: cython.int[::1]
    ssrc: cython.int[::1]
    st0: cython.double[::1]
    st1: cython.double[::1]
    nseg: cython.int
    marks_valid: cython.int
    # cavity scratch
    cav: cython.int[::1]
    ncav: cython.int
    bnd: cython.int[::1]        # per boundary edge: s, e, outer tri, mark, owner tri
    nbnd: cython.int
    # queues
    tq: cython.int[::1]
    tq_head: cython.int
    tq_tail: cython.int
    sq: cython.int[::1]
    nsq: cython.int
    # sizing grid
    gx0: cython.double
    gy0: cython.double
    gdx: cython.double
    gdy: cython.double
    gnx: cython.int
    gny: cython.int
    gval: cython.double[::1]
    ratio: cython.double
    max_points: cython.int
    last: cython.int

    def __init__(self, x, y, corner, seg_a, seg_b, seg_t0, seg_t1,
                 grid_origin, grid_step, grid_values, ratio, max_points):
        n = len(x)
        self.ninput = n
        cap = max(64, 4 * n)
        self.px = np.zeros(cap)
        self.py = np.zeros(cap)
        self.pflag = np.zeros(cap, dtype=np.int32)
        self.vt = np.full(cap, -1, dtype=np.int32)
        tcap = 2 * cap + 16
        self.tv = np.zeros(3 * tcap, dtype=np.int32)
        self.tn = np.full(3 * tcap, -1, dtype=np.int32)
        self.tm = np.full(3 * tcap, -1, dtype=np.int32)
        self.talive = np.zeros(tcap, dtype=np.int32)
        self.tin = np.zeros(tcap, dtype=np.int32)
        self.tstamp = np.zeros(tcap, dtype=np.int32)
        scap = max(16, 2 * len(seg_a))
        self.sa = np.zeros(scap, dtype=np.int32)
        self.sb = np.zeros(scap, dtype=np.int32)
        self.ssrc = np.zeros(scap, dtype=np.int32)
        self.st0 = np.zeros(scap)
        self.st1 = np.zeros(scap)
        self.cav = np.zeros(256, dtype=np.int32)
        self.bnd = np.zeros(5 * 256, dtype=np.int32)
        self.tq = np.zeros(1024, dtype=np.int32)
        self.sq = np.zeros(256, dtype=np.int32)
        self.npts = 0
        self.ntri = 0
        self.nseg = 0
        self.stamp = 0
        self.ncav = 0
        self.nbnd = 0
        self.tq_head = 0
        self.tq_tail = 0
        self.nsq = 0
        self.marks_valid = 0
        self.last = 0
        self.ratio = ratio
        self.max_points = max_points
        gv = np.ascontiguousarray(grid_values, dtype=float)
        self.gny, self.gnx = gv.shape[0], gv.shape[1]
        self.gval = gv.ravel()
        self.gx0, self.gy0 = float(grid_origin[0]), float(grid_origin[1])
        self.gdx, self.gdy = float(grid_step[0]), float(grid_step[1])

        xmin, xmax = float(np.min(x)), float(np.max(x))
        ymin, ymax = float(np.min(y)), float(np.max(y))
        cx, cy = 0.5 * (xmin + xmax), 0.5 * (ymin + ymax)
        big = 20.0 * max(xmax - xmin, ymax - ymin, 1e-300)
        self._add_point(cx - 2.0 * big, cy - big, 0)
        self._add_point(cx + 2.0 * big, cy - big, 0)
        self._add_point(cx, cy + 2.0 * big, 0)
        t = self._new_tri(0, 1, 2)
        self.tn[3 * t] = -1
        self.tn[3 * t + 1] = -1
        self.tn[3 * t + 2] = -1
        for i in range(n):
            self._add_point(float(x[i]), float(y[i]), int(corner[i]))
        for i in range(len(seg_a)):
            self._add_segment(int(seg_a[i]) + 3, int(seg_b[i]) + 3, i, float(seg_t0[i]), float(seg_t1[i]))

    # ------------------------------------------------------------------
    # storage

    @cython.cfunc
    def _add_point(self, x: cython.double, y: cython.double, flag: cython.int) -> cython.int:
        i: cython.int = self.npts
        if i >= self.px.shape[0]:
            cap = 2 * self.px.shape[0]
            self.px = np.concatenate([np.asarray(self.px), np.zeros(cap - self.px.shape[0])])
            self.py = np.concatenate([np.asarray(self.py), np.zeros(cap - self.py.shape[0])])
            self.pflag = np.concatenate([np.asarray(self.pflag), np.zeros(cap - self.pflag.shape[0], dtype=np.int32)])
            self.vt = np.concatenate([np.asarray(self.vt), np.full(cap - self.vt.shape[0], -1, dtype=np.int32)])
        self.px[i] = x
        self.py[i] = y
        self.pflag[i] = flag
        self.npts = i + 1
        return i

    @cython.cfunc
    def _new_tri(self, a: cython.int, b: cython.int, c: cython.int) -> cython.int:
        t: cython.int = self.ntri
        if t >= self.talive.shape[0]:
            cap = 2 * self.talive.shape[0]
            old = self.talive.shape[0]
            self.tv = np.concatenate([np.asarray(self.tv), np.zeros(3 * (cap - old), dtype=np.int32)])
            self.tn = np.concatenate([np.asarray(self.tn), np.full(3 * (cap - old), -1, dtype=np.int32)])
            self.tm = np.concatenate([np.asarray(self.tm), np.full(3 * (cap - old), -1, dtype=np.int32)])
            self.talive = np.concatenate([np.asarray(self.talive), np.zeros(cap - old, dtype=np.int32)])
            self.tin = np.concatenate([np.asarray(self.tin), np.zeros(cap - old, dtype=np.int32)])
            self.tstamp = np.concatenate([np.asarray(self.tstamp), np.zeros(cap - old, dtype=np.int32)])
        self.tv[3 * t] = a
        self.tv[3 * t + 1] = b
        self.tv[3 * t + 2] = c
        self.tn[3 * t] = -1
        self.tn[3 * t + 1] = -1
        self.tn[3 * t + 2] = -1
        self.tm[3 * t] = -1
        self.tm[3 * t + 1] = -1
        self.tm[3 * t + 2] = -1
        self.talive[t] = 1
        self.tin[t] = 0
        self.tstamp[t] = 0
        self.vt[a] = t
        self.vt[b] = t
        self.vt[c] = t
        self.ntri = t + 1
        return t

    @cython.cfunc
    def _add_segment(self, a: cython.int, b: cython.int, src: cython.int,
                     t0: cython.double, t1: cython.double) -> cython.int:
        s: cython.int = self.nseg
        if s >= self.sa.shape[0]:
            old = self.sa.shape[0]
            self.sa = np.concatenate([np.asarray(self.sa), np.zeros(old, dtype=np.int32)])
            self.sb = np.concatenate([np.asarray(self.sb), np.zeros(old, dtype=np.int32)])
            self.ssrc = np.concatenate([np.asarray(self.ssrc), np.zeros(old, dtype=np.int32)])
            self.st0 = np.concatenate([np.asarray(self.st0), np.zeros(old)])
            self.st1 = np.concatenate([np.asarray(self.st1), np.zeros(old)])
        self.sa[s] = a
        self.sb[s] = b
        self.ssrc[s] = src
        self.st0[s] = t0
        self.st1[s] = t1
        self.nseg = s + 1
        return s

    @cython.cfunc
    def _push_cav(self, t: cython.int):
        if self.ncav >= self.cav.shape[0]:
            self.cav = np.concatenate([np.asarray(self.cav), np.zeros(self.cav.shape[0], dtype=np.int32)])
        self.cav[self.ncav] = t
        self.ncav += 1

    @cython.cfunc
    def _push_bnd(self, s: cython.int, e: cython.int, nb: cython.int, m: cython.int, owner: cython.int):
        k: cython.int = 5 * self.nbnd
        if k + 5 > self.bnd.shape[0]:
            self.bnd = np.concatenate([np.asarray(self.bnd), np.zeros(self.bnd.shape[0], dtype=np.int32)])
        self.bnd[k] = s
        self.bnd[k + 1] = e
        self.bnd[k + 2] = nb
        self.bnd[k + 3] = m
        self.bnd[k + 4] = owner
        self.nbnd += 1

    @cython.cfunc
    def _push_tq(self, t: cython.int):
        if self.tq_tail >= self.tq.shape[0]:
            live = self.tq_tail - self.tq_head
            if self.tq_head > self.tq.shape[0] // 2:
                self.tq[0:live] = self.tq[self.tq_head:self.tq_tail]
            else:
                arr = np.zeros(2 * self.tq.shape[0], dtype=np.int32)
                arr[0:live] = np.asarray(self.tq)[self.tq_head:self.tq_tail]
                self.tq = arr
            self.tq_head = 0
            self.tq_tail = live
        self.tq[self.tq_tail] = t
        self.tq_tail += 1

    @cython.cfunc
    def _push_sq(self, s: cython.int):
        if self.nsq >= self.sq.shape[0]:
            self.sq = np.concatenate([np.asarray(self.sq), np.zeros(self.sq.shape[0], dtype=np.int32)])
        self.sq[self.nsq] = s
        self.nsq += 1

    # ------------------------------------------------------------------
    # geometry helpers

    @cython.cfunc
    @cython.exceptval(check=False)
    def _size_at(self, x: cython.double, y: cython.double) -> cython.double:
        fx: cython.double = (x - self.gx0) / self.gdx
        fy: cython.double = (y - self.gy0) / self.gdy
        i: cython.int
        j: cython.int
        if fx < 0.0:
            fx = 0.0
        if fy < 0.0:
            fy = 0.0
        if fx > self.gnx - 1.000001:
            fx = self.gnx - 1.000001
        if fy > self.gny - 1.000001:
            fy = self.gny - 1.000001
        i = cython.cast(cython.int, fx)
        j = cython.cast(cython.int, fy)
        fx -= i
        fy -= j
        return ((1.0 - fx) * (1.0 - fy) * self.gval[j * self.gnx + i]
                + fx * (1.0 - fy) * self.gval[j * self.gnx + i + 1]
                + (1.0 - fx) * fy * self.gval[(j + 1) * self.gnx + i]
                + fx * fy * self.gval[(j + 1) * self.gnx + i + 1])

    @cython.cfunc
    @cython.exceptval(check=False)
    def _in_circ(self, t: cython.int, x: cython.double, y: cython.double) -> cython.double:
        a: cython.int = self.tv[3 * t]
        b: cython.int = self.tv[3 * t + 1]
        c: cython.int = self.tv[3 * t + 2]
        return _incircle(self.px[a], self.py[a], self.px[b], self.py[b], self.px[c], self.py[c], x, y)

    @cython.cfunc
    def _is_bad(self, t: cython.int) -> cython.int:
        a: cython.int = self.tv[3 * t]
        b: cython.int = self.tv[3 * t + 1]
        c: cython.int = self.tv[3 * t + 2]
        ax: cython.double = self.px[a]
        ay: cython.double = self.py[a]
        bx: cython.double = self.px[b]
        by: cython.double = self.py[b]
        cx: cython.double = self.px[c]
        cy: cython.double = self.py[c]
        la: cython.double = (bx - cx) * (bx - cx) + (by - cy) * (by - cy)
        lb: cython.double = (ax - cx) * (ax - cx) + (ay - cy) * (ay - cy)
        lc: cython.double = (ax - bx) * (ax - bx) + (ay - by) * (ay - by)
        lmin: cython.double = la
        lmax: cython.double = la
        if lb < lmin:
            lmin = lb
        if lc < lmin:
            lmin = lc
        if lb > lmax:
            lmax = lb
        if lc > lmax:
            lmax = lc
        area2: cython.double = _orient(ax, ay, bx, by, cx, cy)
        if area2 <= 0.0:
            return 0
        # R^2 = la*lb*lc / (4 area)^2 = la*lb*lc / (2*area2)^2
        r2: cython.double = la * lb * lc / (4.0 * area2 * area2)
        if r2 > self.ratio * self.ratio * lmin:
            return 1
        h: cython.double = self._size_at((ax + bx + cx) / 3.0, (ay + by + cy) / 3.0)
        if lmax > h * h:
            return 1
        return 0

    # ------------------------------------------------------------------
    # location and insertion

    @cython.cfunc
    def _locate(self, x: cython.double, y: cython.double, t: cython.int, stop_at_segments: cython.int) -> cython.int:
        """Visibility walk.  Returns a triangle, or -(seg+2) if a segment blocks the walk."""
        k: cython.int
        j: cython.int
        a: cython.int
        b: cython.int
        moved: cython.int
        steps: cython.int = 0
        start: cython.int = 0
        while True:
            moved = 0
            for j in range(3):
                k = (start + j) % 3
                a = self.tv[3 * t + (k + 1) % 3]
                b = self.tv[3 * t + (k + 2) % 3]
                if _orient(self.px[a], self.py[a], self.px[b], self.py[b], x, y) < 0.0:
                    if stop_at_segments and self.tm[3 * t + k] >= 0:
                        return -(self.tm[3 * t + k] + 2)
                    if self.tn[3 * t + k] < 0:
                        return -1
                    t = self.tn[3 * t + k]
                    moved = 1
                    break
            if not moved:
                return t
            steps += 1
            start = steps % 3
            if steps > 4 * self.ntri + 100:
                raise RuntimeError("point location did not terminate")

    @cython.cfunc
    def _collect_cavity(self, x: cython.double, y: cython.double, t0: cython.int,
                        split_seg: cython.int, check_encroach: cython.int) -> cython.int:
        """Fill ``cav`` and ``bnd`` for a point at (x, y).

        Returns -1 on success or the id of an encroached segment.
        """
        i: cython.int
        k: cython.int
        t: cython.int
        nb: cython.int
        m: cython.int
        s: cython.int
        e: cython.int
        ok: cython.int
        rounds: cython.int
        mx: cython.double
        my: cython.double
        self.stamp += 1
        self.ncav = 0
        self._push_cav(t0)
        self.tstamp[t0] = self.stamp
        i = 0
        while i < self.ncav:
            t = self.cav[i]
            i += 1
            for k in range(3):
                nb = self.tn[3 * t + k]
                m = self.tm[3 * t + k]
                if m >= 0 and check_encroach:
                    s = self.sa[m]
                    e = self.sb[m]
                    mx = 0.5 * (self.px[s] + self.px[e])
                    my = 0.5 * (self.py[s] + self.py[e])
                    if ((x - mx) * (x - mx) + (y - my) * (y - my)
                            < 0.25 * ((self.px[s] - self.px[e]) ** 2 + (self.py[s] - self.py[e]) ** 2)):
                        return m
                if nb < 0 or self.tstamp[nb] == self.stamp:
                    continue
                if m >= 0 and m != split_seg:
                    continue
                if self._in_circ(nb, x, y) > 0.0:
                    self.tstamp[nb] = self.stamp
                    self._push_cav(nb)
        # boundary edges; repair non-star-shaped cavities caused by round-off
        for rounds in range(100):
            self.nbnd = 0
            ok = 1
            for i in range(self.ncav):
                t = self.cav[i]
                if self.tstamp[t] != self.stamp:
                    continue
                for k in range(3):
                    nb = self.tn[3 * t + k]
                    if nb >= 0 and self.tstamp[nb] == self.stamp:
                        continue
                    s = self.tv[3 * t + (k + 1) % 3]
                    e = self.tv[3 * t + (k + 2) % 3]
                    if _orient(self.px[s], self.py[s], self.px[e], self.py[e], x, y) <= 0.0:
                        ok = 0
                        m = self.tm[3 * t + k]
                        if nb >= 0 and (m < 0 or m == split_seg):
                            self.tstamp[nb] = self.stamp
                            self._push_cav(nb)
                        elif t != t0:
                            self.tstamp[t] = self.stamp - 1
                        else:
                            raise RuntimeError("cannot form a star-shaped cavity")
                        break
                    self._push_bnd(s, e, nb, self.tm[3 * t + k], t)
                if not ok:
                    break
            if ok:
                return -1
        raise RuntimeError("cavity repair did not converge")

    @cython.cfunc
    def _fill_cavity(self, p: cython.int, split_seg: cython.int, new_seg: cython.int,
                     seg_a: cython.int, seg_b: cython.int) -> cython.int:
        """Replace the collected cavity by a fan around point p; returns first new triangle."""
        i: cython.int
        j: cython.int
        k: cython.int
        t: cython.int
        nb: cython.int
        owner: cython.int
        s: cython.int
        e: cython.int
        first: cython.int = self.ntri
        nb_count: cython.int = self.nbnd
        for i in range(self.ncav):
            t = self.cav[i]
            if self.tstamp[t] == self.stamp:
                self.talive[t] = 0
        for i in range(nb_count):
            s = self.bnd[5 * i]
            e = self.bnd[5 * i + 1]
            nb = self.bnd[5 * i + 2]
            owner = self.bnd[5 * i + 4]
            t = self._new_tri(s, e, p)
            self.tn[3 * t + 2] = nb
            self.tm[3 * t + 2] = self.bnd[5 * i + 3]
            self.tin[t] = self.tin[owner]
            if nb >= 0:
                for k in range(3):
                    if self.tn[3 * nb + k] == owner:
                        self.tn[3 * nb + k] = t
                        break
        # link the fan: edge 0 of (s_i, e_i, p) is (e_i, p), shared with the
        # triangle whose first vertex is e_i (its edge 1 is (p, s_j))
        for i in range(nb_count):
            t = first + i
            e = self.tv[3 * t + 1]
            for j in range(nb_count):
                if self.tv[3 * (first + j)] == e:
                    self.tn[3 * t] = first + j
                    self.tn[3 * (first + j) + 1] = t
                    break
        if split_seg >= 0 and self.marks_valid:
            for i in range(nb_count):
                t = first + i
                s = self.tv[3 * t]
                # edge 1 of t is (p, s); mark halves of the split segment
                if s == seg_a or s == seg_b:
                    m = split_seg if s == seg_a else new_seg
                    self.tm[3 * t + 1] = m
                    j = self.tn[3 * t + 1]
                    if j >= 0:
                        self.tm[3 * j] = m
        self.last = first
        return first

    @cython.cfunc
    def _insert_free(self, p: cython.int, t_start: cython.int) -> cython.int:
        """Unconstrained insertion of an existing point index (no segment marks)."""
        t: cython.int = self._locate(self.px[p], self.py[p], t_start, 0)
        if t < 0:
            raise RuntimeError("point outside the super triangle")
        self._collect_cavity(self.px[p], self.py[p], t, -1, 0)
        return self._fill_cavity(p, -1, -1, -1, -1)

    # ------------------------------------------------------------------
    # segments

    @cython.cfunc
    def _find_edge(self, a: cython.int, b: cython.int) -> cython.int:
        """Return 3*t+k for an edge (a, b) of a live triangle, or -1."""
        t0: cython.int = self.vt[a]
        t: cython.int = t0
        k: cython.int
        i: cython.int
        count: cython.int = 0
        if t < 0 or not self.talive[t]:
            return -1
        while True:
            k = 0
            while self.tv[3 * t + k] != a:
                k += 1
            # edges incident to a: opposite (k+1) is (k+2, k); opposite (k+2) is (k, k+1)
            if self.tv[3 * t + (k + 1) % 3] == b:
                return 3 * t + (k + 2) % 3
            if self.tv[3 * t + (k + 2) % 3] == b:
                return 3 * t + (k + 1) % 3
            t = self.tn[3 * t + (k + 1) % 3]
            count += 1
            if t < 0 or t == t0 or count > 10000:
                break
        # walk the other way if we hit the hull
        t = t0
        count = 0
        while True:
            k = 0
            while self.tv[3 * t + k] != a:
                k += 1
            t = self.tn[3 * t + (k + 2) % 3]
            count += 1
            if t < 0 or t == t0 or count > 10000:
                return -1
            k = 0
            while self.tv[3 * t + k] != a:
                k += 1
            if self.tv[3 * t + (k + 1) % 3] == b:
                return 3 * t + (k + 2) % 3
            if self.tv[3 * t + (k + 2) % 3] == b:
                return 3 * t + (k + 1) % 3

    @cython.cfunc
    def _encroached(self, s: cython.int) -> cython.int:
        """1 if segment s is missing or an apex lies in its closed diametral circle."""
        a: cython.int = self.sa[s]
        b: cython.int = self.sb[s]
        code: cython.int = self._find_edge(a, b)
        t: cython.int
        k: cython.int
        c: cython.int
        nb: cython.int
        j: cython.int
        if code < 0:
            return 1
        t = code // 3
        k = code % 3
        c = self.tv[3 * t + k]
        if c >= 3 and ((self.px[a] - self.px[c]) * (self.px[b] - self.px[c])
                       + (self.py[a] - self.py[c]) * (self.py[b] - self.py[c])) <= 0.0:
            return 1
        nb = self.tn[3 * t + k]
        if nb >= 0:
            for j in range(3):
                c = self.tv[3 * nb + j]
                if c != a and c != b:
                    if c >= 3 and ((self.px[a] - self.px[c]) * (self.px[b] - self.px[c])
                                   + (self.py[a] - self.py[c]) * (self.py[b] - self.py[c])) <= 0.0:
                        return 1
        return 0

    @cython.cfunc
    def _split_point(self, s: cython.int):
        """Split location (x, y, t) for segment s; concentric shells next to corners."""
        a: cython.int = self.sa[s]
        b: cython.int = self.sb[s]
        ax: cython.double = self.px[a]
        ay: cython.double = self.py[a]
        bx: cython.double = self.px[b]
        by: cython.double = self.py[b]
        length: cython.double = ((bx - ax) ** 2 + (by - ay) ** 2) ** 0.5
        f: cython.double = 0.5
        d: cython.double
        ca: cython.int = self.pflag[a]
        cb: cython.int = self.pflag[b]
        if ca != cb and length > 0.0:
            d = 1.0
            while d > 0.75 * length:
                d *= 0.5
            while 2.0 * d < 0.75 * length:
                d *= 2.0
            # d is the power of two in (3L/8, 3L/4]; keep it if it is not too lopsided
            if d >= 0.25 * length:
                f = d / length if ca else 1.0 - d / length
        return (ax + f * (bx - ax), ay + f * (by - ay), self.st0[s] + f * (self.st1[s] - self.st0[s]), f)

    @cython.cfunc
    def _split_segment(self, s: cython.int) -> cython.int:
        """Insert the split point of segment s; returns the first new triangle."""
        x: cython.double
        y: cython.double
        tm_: cython.double
        f: cython.double
        x, y, tm_, f = self._split_point(s)
        a: cython.int = self.sa[s]
        b: cython.int = self.sb[s]
        code: cython.int
        t: cython.int
        if self.marks_valid:
            code = self._find_edge(a, b)
            if code < 0:
                raise RuntimeError("segment lost from triangulation")
            t = code // 3
            self._collect_cavity(x, y, t, s, 0)
        else:
            t = self._locate(x, y, self.vt[a], 0)
            self._collect_cavity(x, y, t, -1, 0)
        p: cython.int = self._add_point(x, y, 0)
        new_seg: cython.int = self._add_segment(p, b, self.ssrc[s], tm_, self.st1[s])
        self.sb[s] = p
        self.st1[s] = tm_
        return self._fill_cavity(p, s, new_seg, a, b)

    # ------------------------------------------------------------------
    # phases

    def insert_input(self):
        i: cython.int
        for i in range(3, self.npts):
            self._insert_free(i, self.last)

    def recover_segments(self):
        """Split segments until all are unencroached Delaunay edges, then mark them."""
        s: cython.int
        changed: cython.int = 1
        passes: cython.int = 0
        code: cython.int
        t: cython.int
        k: cython.int
        nb: cython.int
        j: cython.int
        while changed:
            changed = 0
            passes += 1
            s = 0
            while s < self.nseg:
                if self._encroached(s):
                    self._split_segment(s)
                    changed = 1
                    if self.npts > self.max_points:
                        raise MemoryError("point budget exhausted during segment recovery")
                else:
                    s += 1
            if passes > 200:
                raise RuntimeError("segment recovery did not converge")
        for s in range(self.nseg):
            code = self._find_edge(self.sa[s], self.sb[s])
            t = code // 3
            k = code % 3
            self.tm[3 * t + k] = s
            nb = self.tn[3 * t + k]
            if nb >= 0:
                for j in range(3):
                    if self.tn[3 * nb + j] == t:
                        self.tm[3 * nb + j] = s
        self.marks_valid = 1

    def classify(self):
        """Flood fill from the super triangle; everything unreachable is inside."""
        t: cython.int
        k: cython.int
        nb: cython.int
        i: cython.int
        for t in range(self.ntri):
            self.tin[t] = 1
        self.stamp += 1
        self.ncav = 0
        for t in range(self.ntri):
            if self.talive[t] and (self.tv[3 * t] < 3 or self.tv[3 * t + 1] < 3 or self.tv[3 * t + 2] < 3):
                self._push_cav(t)
                self.tstamp[t] = self.stamp
        i = 0
        while i < self.ncav:
            t = self.cav[i]
            i += 1
            self.tin[t] = 0
            for k in range(3):
                nb = self.tn[3 * t + k]
                if nb >= 0 and self.tm[3 * t + k] < 0 and self.tstamp[nb] != self.stamp:
                    self.tstamp[nb] = self.stamp
                    self._push_cav(nb)

    @cython.cfunc
    def _after_insert(self, first: cython.int, p: cython.int):
        """Queue new bad triangles and segments encroached by the new point."""
        t: cython.int
        m: cython.int
        a: cython.int
        b: cython.int
        for t in range(first, self.ntri):
            if self.tin[t] and self._is_bad(t):
                self._push_tq(t)
            m = self.tm[3 * t + 2]
            if m >= 0:
                a = self.sa[m]
                b = self.sb[m]
                if ((self.px[a] - self.px[p]) * (self.px[b] - self.px[p])
                        + (self.py[a] - self.py[p]) * (self.py[b] - self.py[p])) <= 0.0:
                    self._push_sq(m)

    def refine(self):
        t: cython.int
        s: cython.int
        a: cython.int
        b: cython.int
        c: cython.int
        loc: cython.int
        enc: cython.int
        first: cython.int
        p: cython.int
        ax: cython.double
        ay: cython.double
        bx: cython.double
        by: cython.double
        cx: cython.double
        cy: cython.double
        d: cython.double
        ux: cython.double
        uy: cython.double
        for t in range(self.ntri):
            if self.talive[t] and self.tin[t] and self._is_bad(t):
                self._push_tq(t)
        for s in range(self.nseg):
            if self._encroached(s):
                self._push_sq(s)
        while True:
            if self.npts > self.max_points:
                raise MemoryError("point budget exhausted during refinement")
            if self.nsq > 0:
                self.nsq -= 1
                s = self.sq[self.nsq]
                if self._encroached(s):
                    p = self.npts
                    first = self._split_segment(s)
                    self._after_insert(first, p)
                continue
            if self.tq_head >= self.tq_tail:
                break
            t = self.tq[self.tq_head]
            self.tq_head += 1
            if not self.talive[t] or not self._is_bad(t):
                continue
            a = self.tv[3 * t]
            b = self.tv[3 * t + 1]
            c = self.tv[3 * t + 2]
            ax = self.px[a]
            ay = self.py[a]
            bx = self.px[b] - ax
            by = self.py[b] - ay
            cx = self.px[c] - ax
            cy = self.py[c] - ay
            d = 2.0 * (bx * cy - by * cx)
            ux = ax + (cy * (bx * bx + by * by) - by * (cx * cx + cy * cy)) / d
            uy = ay + (bx * (cx * cx + cy * cy) - cx * (bx * bx + by * by)) / d
            loc = self._locate(ux, uy, t, 1)
            if loc <= -2:
                # the circumcenter lies beyond a segment: split that segment instead
                p = self.npts
                first = self._split_segment(-loc - 2)
                self._after_insert(first, p)
                self._push_tq(t)
                continue
            if loc < 0:
                continue
            enc = self._collect_cavity(ux, uy, loc, -1, 1)
            if enc >= 0:
                p = self.npts
                first = self._split_segment(enc)
                self._after_insert(first, p)
                self._push_tq(t)
                continue
            p = self._add_point(ux, uy, 0)
            first = self._fill_cavity(p, -1, -1, -1, -1)
            self._after_insert(first, p)

    def result(self):
        """Nodes, interior triangles and boundary segments with the super triangle removed."""
        n = self.npts
        x = np.asarray(self.px)[3:n].copy()
        y = np.asarray(self.py)[3:n].copy()
        nt = self.ntri
        tv = np.asarray(self.tv)[: 3 * nt].reshape(nt, 3)
        keep = (np.asarray(self.talive)[:nt] == 1) & (np.asarray(self.tin)[:nt] == 1)
        tris = tv[keep].astype(np.int64) - 3
        ns = self.nseg
        seg = np.stack([np.asarray(self.sa)[:ns], np.asarray(self.sb)[:ns]], axis=1).astype(np.int64) - 3
        src = np.asarray(self.ssrc)[:ns].astype(np.int64).copy()
        par = np.stack([np.asarray(self.st0)[:ns], np.asarray(self.st1)[:ns]], axis=1).copy()
        return np.stack([x, y], axis=1), tris, seg, src, par


def build(x, y, corner, seg_a, seg_b, seg_t0, seg_t1, grid_origin, grid_step, grid_values,
          ratio=1.4142135623730951, max_points=2_000_000):
    """Run all phases and return (nodes, triangles, segments, segment_source, segment_params)."""
    r = Refiner(x, y, corner, seg_a, seg_b, seg_t0, seg_t1, grid_origin, grid_step, grid_values,
                ratio, max_points)
    r.insert_input()
    r.recover_segments()
    r.classify()
    r.refine()
    return r.result()
