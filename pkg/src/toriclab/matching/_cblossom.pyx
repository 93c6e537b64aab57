# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled maximum-weight matching; a typed port of ``_pyblossom``.

Per-vertex and per-edge state lives in C-typed numpy buffers; the blossom
child/endpoint lists stay Python lists because they are short and rarely
touched.  The operation order matches ``_pyblossom`` exactly so both backends
return the same matching.
"""
import numpy as np
cimport numpy as cnp

ctypedef cnp.int64_t i64


cdef inline Py_ssize_t _wrap(Py_ssize_t j, Py_ssize_t n):
    return j + n if j < 0 else j


cdef class _Matcher:
    cdef Py_ssize_t nvertex, nedge
    cdef bint maxcardinality
    cdef i64[::1] weight, endpoint, mate, label, labelend, inblossom
    cdef i64[::1] blossomparent, blossombase, bestedge, dualvar
    cdef cnp.uint8_t[::1] allowedge
    cdef list neighbend, blossomchilds, blossomendps, blossombestedges
    cdef list unusedblossoms, queue

    def __init__(self, i64[:, ::1] edges, bint maxcardinality):
        cdef Py_ssize_t k, i, j
        cdef Py_ssize_t nedge = edges.shape[0]
        cdef Py_ssize_t nvertex = 0
        cdef i64 maxweight = 0
        self.nedge = nedge
        for k in range(nedge):
            i = edges[k, 0]
            j = edges[k, 1]
            if i == j or i < 0 or j < 0:
                raise ValueError(f"invalid edge ({i}, {j})")
            if i + 1 > nvertex:
                nvertex = i + 1
            if j + 1 > nvertex:
                nvertex = j + 1
        self.nvertex = nvertex
        self.maxcardinality = maxcardinality
        self.weight = np.empty(nedge, dtype=np.int64)
        self.endpoint = np.empty(2 * nedge, dtype=np.int64)
        self.neighbend = [[] for _ in range(nvertex)]
        for k in range(nedge):
            self.weight[k] = 2 * edges[k, 2]
            if self.weight[k] > maxweight:
                maxweight = self.weight[k]
            self.endpoint[2 * k] = edges[k, 0]
            self.endpoint[2 * k + 1] = edges[k, 1]
            self.neighbend[edges[k, 0]].append(2 * k + 1)
            self.neighbend[edges[k, 1]].append(2 * k)
        self.mate = np.full(nvertex, -1, dtype=np.int64)
        self.label = np.zeros(2 * nvertex, dtype=np.int64)
        self.labelend = np.full(2 * nvertex, -1, dtype=np.int64)
        self.inblossom = np.arange(nvertex, dtype=np.int64)
        self.blossomparent = np.full(2 * nvertex, -1, dtype=np.int64)
        self.blossomchilds = [None] * (2 * nvertex)
        self.blossombase = np.concatenate([np.arange(nvertex), np.full(nvertex, -1)]).astype(np.int64)
        self.blossomendps = [None] * (2 * nvertex)
        self.bestedge = np.full(2 * nvertex, -1, dtype=np.int64)
        self.blossombestedges = [None] * (2 * nvertex)
        self.unusedblossoms = list(range(nvertex, 2 * nvertex))
        self.dualvar = np.concatenate([np.full(nvertex, maxweight), np.zeros(nvertex)]).astype(np.int64)
        self.allowedge = np.zeros(nedge, dtype=np.uint8)
        self.queue = []

    cdef inline i64 slack(self, Py_ssize_t k):
        return self.dualvar[self.endpoint[2 * k]] + self.dualvar[self.endpoint[2 * k + 1]] - 2 * self.weight[k]

    cdef list leaves(self, Py_ssize_t b):
        cdef list out, stack
        cdef Py_ssize_t t
        if b < self.nvertex:
            return [b]
        out = []
        stack = [b]
        while stack:
            t = stack.pop()
            if t < self.nvertex:
                out.append(t)
            else:
                stack.extend(reversed(self.blossomchilds[t]))
        return out

    cdef int assign_label(self, Py_ssize_t w, i64 t, i64 p) except -1:
        cdef Py_ssize_t b, base
        while True:
            b = self.inblossom[w]
            self.label[w] = t
            self.label[b] = t
            self.labelend[w] = p
            self.labelend[b] = p
            self.bestedge[w] = -1
            self.bestedge[b] = -1
            if t == 1:
                self.queue.extend(self.leaves(b))
                return 0
            base = self.blossombase[b]
            p = self.mate[base] ^ 1
            w = self.endpoint[self.mate[base]]
            t = 1

    cdef Py_ssize_t scan_blossom(self, Py_ssize_t v, Py_ssize_t w) except -2:
        cdef list path = []
        cdef Py_ssize_t base = -1, b, tmp
        while v != -1 or w != -1:
            b = self.inblossom[v]
            if self.label[b] & 4:
                base = self.blossombase[b]
                break
            path.append(b)
            self.label[b] = 5
            if self.labelend[b] == -1:
                v = -1
            else:
                v = self.endpoint[self.labelend[b]]
                b = self.inblossom[v]
                v = self.endpoint[self.labelend[b]]
            if w != -1:
                tmp = v
                v = w
                w = tmp
        for b in path:
            self.label[b] = 1
        return base

    cdef int add_blossom(self, Py_ssize_t base, Py_ssize_t k) except -1:
        cdef Py_ssize_t v = self.endpoint[2 * k]
        cdef Py_ssize_t w = self.endpoint[2 * k + 1]
        cdef Py_ssize_t bb = self.inblossom[base]
        cdef Py_ssize_t bv = self.inblossom[v]
        cdef Py_ssize_t bw = self.inblossom[w]
        cdef Py_ssize_t b, i, j, bj, k2, x
        cdef list path, endps, nblists, nblist, best
        cdef i64[::1] bestedgeto
        b = self.unusedblossoms.pop()
        self.blossombase[b] = base
        self.blossomparent[b] = -1
        self.blossomparent[bb] = b
        path = []
        endps = []
        while bv != bb:
            self.blossomparent[bv] = b
            path.append(bv)
            endps.append(self.labelend[bv])
            v = self.endpoint[self.labelend[bv]]
            bv = self.inblossom[v]
        path.append(bb)
        path.reverse()
        endps.reverse()
        endps.append(2 * k)
        while bw != bb:
            self.blossomparent[bw] = b
            path.append(bw)
            endps.append(self.labelend[bw] ^ 1)
            w = self.endpoint[self.labelend[bw]]
            bw = self.inblossom[w]
        self.blossomchilds[b] = path
        self.blossomendps[b] = endps
        self.label[b] = 1
        self.labelend[b] = self.labelend[bb]
        self.dualvar[b] = 0
        for x in self.leaves(b):
            if self.label[self.inblossom[x]] == 2:
                self.queue.append(x)
            self.inblossom[x] = b
        bestedgeto = np.full(2 * self.nvertex, -1, dtype=np.int64)
        for bv in path:
            if self.blossombestedges[bv] is None:
                nblists = [[p // 2 for p in self.neighbend[x]] for x in self.leaves(bv)]
            else:
                nblists = [self.blossombestedges[bv]]
            for nblist in nblists:
                for k2 in nblist:
                    i = self.endpoint[2 * k2]
                    j = self.endpoint[2 * k2 + 1]
                    if self.inblossom[j] == b:
                        i, j = j, i
                    bj = self.inblossom[j]
                    if bj != b and self.label[bj] == 1 and (
                            bestedgeto[bj] == -1 or self.slack(k2) < self.slack(bestedgeto[bj])):
                        bestedgeto[bj] = k2
            self.blossombestedges[bv] = None
            self.bestedge[bv] = -1
        best = [bestedgeto[x] for x in range(2 * self.nvertex) if bestedgeto[x] != -1]
        self.blossombestedges[b] = best
        self.bestedge[b] = -1
        for k2 in best:
            if self.bestedge[b] == -1 or self.slack(k2) < self.slack(self.bestedge[b]):
                self.bestedge[b] = k2
        return 0

    cdef int expand_blossom(self, Py_ssize_t b, bint endstage) except -1:
        cdef Py_ssize_t s, x, j, jstep, endptrick, p, bv, entrychild, found, L
        cdef list childs, endps
        for s in self.blossomchilds[b]:
            self.blossomparent[s] = -1
            if s < self.nvertex:
                self.inblossom[s] = s
            elif endstage and self.dualvar[s] == 0:
                self.expand_blossom(s, endstage)
            else:
                for x in self.leaves(s):
                    self.inblossom[x] = s
        if (not endstage) and self.label[b] == 2:
            childs = self.blossomchilds[b]
            endps = self.blossomendps[b]
            L = len(childs)
            entrychild = self.inblossom[self.endpoint[self.labelend[b] ^ 1]]
            j = childs.index(entrychild)
            if j & 1:
                j -= L
                jstep = 1
                endptrick = 0
            else:
                jstep = -1
                endptrick = 1
            p = self.labelend[b]
            while j != 0:
                self.label[self.endpoint[p ^ 1]] = 0
                self.label[self.endpoint[(<Py_ssize_t>endps[_wrap(j - endptrick, L)]) ^ endptrick ^ 1]] = 0
                self.assign_label(self.endpoint[p ^ 1], 2, p)
                self.allowedge[(<Py_ssize_t>endps[_wrap(j - endptrick, L)]) // 2] = 1
                j += jstep
                p = (<Py_ssize_t>endps[_wrap(j - endptrick, L)]) ^ endptrick
                self.allowedge[p // 2] = 1
                j += jstep
            bv = childs[_wrap(j, L)]
            self.label[self.endpoint[p ^ 1]] = 2
            self.label[bv] = 2
            self.labelend[self.endpoint[p ^ 1]] = p
            self.labelend[bv] = p
            self.bestedge[bv] = -1
            j += jstep
            while childs[_wrap(j, L)] != entrychild:
                bv = childs[_wrap(j, L)]
                if self.label[bv] == 1:
                    j += jstep
                    continue
                found = -1
                for x in self.leaves(bv):
                    if self.label[x] != 0:
                        found = x
                        break
                if found != -1:
                    self.label[found] = 0
                    self.label[self.endpoint[self.mate[self.blossombase[bv]]]] = 0
                    self.assign_label(found, 2, self.labelend[found])
                j += jstep
        self.label[b] = -1
        self.labelend[b] = -1
        self.blossomchilds[b] = None
        self.blossomendps[b] = None
        self.blossombase[b] = -1
        self.blossombestedges[b] = None
        self.bestedge[b] = -1
        self.unusedblossoms.append(b)
        return 0

    cdef int augment_blossom(self, Py_ssize_t b, Py_ssize_t v) except -1:
        cdef Py_ssize_t t = v, i, j, jstep, endptrick, p, L
        cdef list childs, endps
        while self.blossomparent[t] != b:
            t = self.blossomparent[t]
        if t >= self.nvertex:
            self.augment_blossom(t, v)
        childs = self.blossomchilds[b]
        endps = self.blossomendps[b]
        L = len(childs)
        i = childs.index(t)
        j = i
        if i & 1:
            j -= L
            jstep = 1
            endptrick = 0
        else:
            jstep = -1
            endptrick = 1
        while j != 0:
            j += jstep
            t = childs[_wrap(j, L)]
            p = (<Py_ssize_t>endps[_wrap(j - endptrick, L)]) ^ endptrick
            if t >= self.nvertex:
                self.augment_blossom(t, self.endpoint[p])
            j += jstep
            t = childs[_wrap(j, L)]
            if t >= self.nvertex:
                self.augment_blossom(t, self.endpoint[p ^ 1])
            self.mate[self.endpoint[p]] = p ^ 1
            self.mate[self.endpoint[p ^ 1]] = p
        self.blossomchilds[b] = childs[i:] + childs[:i]
        self.blossomendps[b] = endps[i:] + endps[:i]
        self.blossombase[b] = self.blossombase[self.blossomchilds[b][0]]
        return 0

    cdef int augment_matching(self, Py_ssize_t k) except -1:
        cdef Py_ssize_t s, p, bs, t, bt, j, side
        for side in range(2):
            if side == 0:
                s = self.endpoint[2 * k]
                p = 2 * k + 1
            else:
                s = self.endpoint[2 * k + 1]
                p = 2 * k
            while True:
                bs = self.inblossom[s]
                if bs >= self.nvertex:
                    self.augment_blossom(bs, s)
                self.mate[s] = p
                if self.labelend[bs] == -1:
                    break
                t = self.endpoint[self.labelend[bs]]
                bt = self.inblossom[t]
                s = self.endpoint[self.labelend[bt]]
                j = self.endpoint[self.labelend[bt] ^ 1]
                if bt >= self.nvertex:
                    self.augment_blossom(bt, j)
                self.mate[j] = self.labelend[bt]
                p = self.labelend[bt] ^ 1
        return 0

    cdef i64 min_vertex_dual(self):
        cdef i64 m = self.dualvar[0]
        cdef Py_ssize_t v
        for v in range(1, self.nvertex):
            if self.dualvar[v] < m:
                m = self.dualvar[v]
        return m

    def run(self):
        cdef Py_ssize_t nvertex = self.nvertex, nedge = self.nedge
        cdef Py_ssize_t stage, i, j, v, w, k, p, b, base, deltaedge, deltablossom
        cdef int deltatype
        cdef i64 kslack, delta, dd, lb
        cdef bint augmented
        cdef list nb
        for stage in range(nvertex):
            for i in range(2 * nvertex):
                self.label[i] = 0
                self.bestedge[i] = -1
            for i in range(nvertex, 2 * nvertex):
                self.blossombestedges[i] = None
            for i in range(nedge):
                self.allowedge[i] = 0
            del self.queue[:]
            for v in range(nvertex):
                if self.mate[v] == -1 and self.label[self.inblossom[v]] == 0:
                    self.assign_label(v, 1, -1)
            augmented = False
            while True:
                while self.queue and not augmented:
                    v = self.queue.pop()
                    nb = self.neighbend[v]
                    for p in nb:
                        k = p // 2
                        w = self.endpoint[p]
                        if self.inblossom[v] == self.inblossom[w]:
                            continue
                        kslack = 0
                        if not self.allowedge[k]:
                            kslack = self.slack(k)
                            if kslack <= 0:
                                self.allowedge[k] = 1
                        if self.allowedge[k]:
                            if self.label[self.inblossom[w]] == 0:
                                self.assign_label(w, 2, p ^ 1)
                            elif self.label[self.inblossom[w]] == 1:
                                base = self.scan_blossom(v, w)
                                if base >= 0:
                                    self.add_blossom(base, k)
                                else:
                                    self.augment_matching(k)
                                    augmented = True
                                    break
                            elif self.label[w] == 0:
                                self.label[w] = 2
                                self.labelend[w] = p ^ 1
                        elif self.label[self.inblossom[w]] == 1:
                            b = self.inblossom[v]
                            if self.bestedge[b] == -1 or kslack < self.slack(self.bestedge[b]):
                                self.bestedge[b] = k
                        elif self.label[w] == 0:
                            if self.bestedge[w] == -1 or kslack < self.slack(self.bestedge[w]):
                                self.bestedge[w] = k
                if augmented:
                    break

                deltatype = -1
                delta = 0
                deltaedge = 0
                deltablossom = 0
                if not self.maxcardinality:
                    deltatype = 1
                    delta = self.min_vertex_dual()
                for v in range(nvertex):
                    if self.label[self.inblossom[v]] == 0 and self.bestedge[v] != -1:
                        dd = self.slack(self.bestedge[v])
                        if deltatype == -1 or dd < delta:
                            delta = dd
                            deltatype = 2
                            deltaedge = self.bestedge[v]
                for b in range(2 * nvertex):
                    if self.blossomparent[b] == -1 and self.label[b] == 1 and self.bestedge[b] != -1:
                        kslack = self.slack(self.bestedge[b])
                        dd = kslack // 2
                        if deltatype == -1 or dd < delta:
                            delta = dd
                            deltatype = 3
                            deltaedge = self.bestedge[b]
                for b in range(nvertex, 2 * nvertex):
                    if (self.blossombase[b] >= 0 and self.blossomparent[b] == -1 and self.label[b] == 2
                            and (deltatype == -1 or self.dualvar[b] < delta)):
                        delta = self.dualvar[b]
                        deltatype = 4
                        deltablossom = b
                if deltatype == -1:
                    deltatype = 1
                    delta = self.min_vertex_dual()
                    if delta < 0:
                        delta = 0

                for v in range(nvertex):
                    lb = self.label[self.inblossom[v]]
                    if lb == 1:
                        self.dualvar[v] -= delta
                    elif lb == 2:
                        self.dualvar[v] += delta
                for b in range(nvertex, 2 * nvertex):
                    if self.blossombase[b] >= 0 and self.blossomparent[b] == -1:
                        if self.label[b] == 1:
                            self.dualvar[b] += delta
                        elif self.label[b] == 2:
                            self.dualvar[b] -= delta

                if deltatype == 1:
                    break
                elif deltatype == 2:
                    self.allowedge[deltaedge] = 1
                    i = self.endpoint[2 * deltaedge]
                    j = self.endpoint[2 * deltaedge + 1]
                    if self.label[self.inblossom[i]] == 0:
                        i = j
                    self.queue.append(i)
                elif deltatype == 3:
                    self.allowedge[deltaedge] = 1
                    self.queue.append(self.endpoint[2 * deltaedge])
                else:
                    self.expand_blossom(deltablossom, False)

            if not augmented:
                break
            for b in range(nvertex, 2 * nvertex):
                if (self.blossomparent[b] == -1 and self.blossombase[b] >= 0
                        and self.label[b] == 1 and self.dualvar[b] == 0):
                    self.expand_blossom(b, True)

        return [self.endpoint[self.mate[v]] if self.mate[v] >= 0 else -1 for v in range(nvertex)]


def max_weight_matching(edges, maxcardinality=False):
    """Same contract as ``_pyblossom.max_weight_matching``."""
    arr = np.ascontiguousarray(np.asarray(edges, dtype=np.int64).reshape(-1, 3))
    if arr.shape[0] == 0:
        return []
    return _Matcher(arr, maxcardinality).run()


def min_weight_perfect_matching(cnp.int64_t[:, ::1] weights):
    """Minimum-weight perfect matching of a complete graph given a symmetric weight matrix."""
    cdef Py_ssize_t n = weights.shape[0], i, j, k
    cdef i64 top = 0
    if n % 2:
        raise ValueError("perfect matching needs an even number of vertices")
    if n == 0:
        return []
    for i in range(n):
        for j in range(i + 1, n):
            if weights[i, j] > top:
                top = weights[i, j]
    top += 1
    edges = np.empty((n * (n - 1) // 2, 3), dtype=np.int64)
    cdef i64[:, ::1] e = edges
    k = 0
    for i in range(n):
        for j in range(i + 1, n):
            e[k, 0] = i
            e[k, 1] = j
            e[k, 2] = top - weights[i, j]
            k += 1
    mate = _Matcher(edges, True).run()
    return [(i, mate[i]) for i in range(n) if i < mate[i]]
