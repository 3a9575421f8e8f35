# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled simulation kernels.

Mirror of :mod:`oilwater._pycore`: same PRF words, same scheduling rules,
bit-identical results. Sites live on a dense row-major grid of odd side
``L`` centred on the origin; the grid doubles whenever a particle lands on
its outer layer, so a firing site always has all neighbours in range.
"""

import numpy as np

from libc.stdint cimport int64_t, uint64_t, uint8_t

from .errors import IllegalFiring, SupportViolation, WindowCapExceeded

cdef extern from *:
    """
    static inline int ow_popcount(unsigned long long x) { return __builtin_popcountll(x); }
    """
    int ow_popcount(unsigned long long x) noexcept nogil

NAME = "cython"

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15
cdef uint64_t K_TAG = 0xE7037ED1A0B428DB
cdef uint64_t K_SITE = 0xD1B54A32D192ED03
cdef uint64_t K_WORD = 0xA0761D6478BD642F
cdef uint64_t M1 = 0xBF58476D1CE4E5B9
cdef uint64_t M2 = 0x94D049BB133111EB
cdef uint64_t EVEN_BITS = 0x5555555555555555

DEF MAXDIM = 8

cdef enum:
    TAG_STACK = 0
    TAG_MERGED = 1
    TAG_BINOMIAL = 2
    TAG_POLICY = 3
    TAG_WALK = 4

cdef enum:
    P_LEFT = 0
    P_RIGHT = 1
    P_UNIFORM = 2
    P_SWEEP = 3
    P_SCRIPT = 4


cdef inline uint64_t mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * M1
    z = (z ^ (z >> 27)) * M2
    return z ^ (z >> 31)


cdef inline uint64_t key_chain(uint64_t seed, int tag, int species, int64_t* coords, int d) noexcept nogil:
    cdef uint64_t h = mix64(seed ^ GOLDEN)
    cdef int a
    h = mix64(h + <uint64_t>(tag * 2 + species + 1) * K_TAG)
    for a in range(d):
        h = mix64(h + (<uint64_t>coords[a]) * K_SITE + GOLDEN)
    return h


cdef inline uint64_t word_at(uint64_t key, uint64_t w) noexcept nogil:
    return mix64(key + (w + 1) * K_WORD)


cdef inline uint64_t visit_key(uint64_t key, uint64_t v) noexcept nogil:
    return mix64(key + v * K_TAG)


cdef inline int direction(uint64_t key, int64_t k, int m, int b, int per) noexcept nogil:
    cdef uint64_t i = <uint64_t>(k - 1)
    if b == 0:
        return <int>(word_at(key, i) % <uint64_t>m)
    return <int>((word_at(key, i // per) >> (b * (i % per))) & ((1ULL << b) - 1))


cdef void count_range(uint64_t key, int64_t start, int64_t k, int m, int b, int per,
                      int64_t* counts) noexcept nogil:
    """Direction counts among draws start+1 .. start+k."""
    cdef int j, p, p0, p1, c3
    cdef int64_t i = start, end = start + k, w
    cdef uint64_t word, fmask, lo, hi
    for j in range(m):
        counts[j] = 0
    if k <= 0:
        return
    if b == 0:
        while i < end:
            counts[word_at(key, <uint64_t>i) % <uint64_t>m] += 1
            i += 1
        return
    while i < end:
        w = i // per
        p0 = <int>(i - w * per)
        p1 = per if end >= (w + 1) * per else <int>(end - w * per)
        word = word_at(key, <uint64_t>w)
        if b == 1:
            if p1 - p0 == 64:
                fmask = 0xFFFFFFFFFFFFFFFF
            else:
                fmask = ((1ULL << (p1 - p0)) - 1) << p0
            c3 = ow_popcount(word & fmask)
            counts[1] += c3
            counts[0] += (p1 - p0) - c3
        elif b == 2:
            if p1 - p0 == 32:
                fmask = EVEN_BITS
            else:
                fmask = (((1ULL << (2 * (p1 - p0))) - 1) << (2 * p0)) & EVEN_BITS
            lo = word & fmask
            hi = (word >> 1) & fmask
            c3 = ow_popcount(hi & lo)
            counts[3] += c3
            counts[2] += ow_popcount(hi) - c3
            counts[1] += ow_popcount(lo) - c3
            counts[0] += (p1 - p0) - ow_popcount(hi | lo)
        else:
            for p in range(p0, p1):
                counts[(word >> (b * p)) & ((1ULL << b) - 1)] += 1
        i = w * per + p1


def prf_word(uint64_t seed, int tag, int species, coords, uint64_t w):
    """Single PRF word; used to cross-check against :mod:`oilwater.prf`."""
    cdef int64_t buf[MAXDIM]
    cdef int d = len(coords), a
    for a in range(d):
        buf[a] = coords[a]
    return word_at(key_chain(seed, tag, species, buf, d), w)


cdef class I64Vec:
    cdef public object arr
    cdef int64_t[::1] data
    cdef public int64_t size

    def __init__(self, int64_t cap=64):
        self.arr = np.zeros(max(cap, 4), dtype=np.int64)
        self.data = self.arr
        self.size = 0

    cdef inline void push(self, int64_t v):
        if self.size == self.data.shape[0]:
            self.arr = np.concatenate([self.arr, np.zeros(self.size, dtype=np.int64)])
            self.data = self.arr
        self.data[self.size] = v
        self.size += 1


cdef void heap_push(I64Vec h, int64_t v):
    h.push(v)
    cdef int64_t i = h.size - 1, parent
    cdef int64_t[::1] a = h.data
    while i > 0:
        parent = (i - 1) >> 1
        if a[parent] <= v:
            break
        a[i] = a[parent]
        i = parent
    a[i] = v


cdef void heap_pop(I64Vec h):
    cdef int64_t[::1] a = h.data
    h.size -= 1
    cdef int64_t n = h.size, v, i = 0, child
    if n == 0:
        return
    v = a[n]
    while True:
        child = 2 * i + 1
        if child >= n:
            break
        if child + 1 < n and a[child + 1] < a[child]:
            child += 1
        if a[child] >= v:
            break
        a[i] = a[child]
        i = child
    a[i] = v


cdef class Grid:
    cdef public int dim
    cdef public int m
    cdef int b, per
    cdef public int64_t L, c, ncell, prev_L, prev_c
    cdef public int64_t max_radius
    cdef uint64_t seed
    cdef int64_t stride[MAXDIM]
    cdef int64_t off[2 * MAXDIM]
    cdef public bint need_grow
    cdef public object a_eta1, a_eta2, a_u, a_entries, a_returns, a_mcount, a_visits, a_pos, a_flux, a_key1, a_key2, a_flag
    cdef int64_t[::1] eta1, eta2, u, entries, returns_site, mcount, visits, pos
    cdef int64_t[:, ::1] flux
    cdef uint64_t[::1] key1, key2
    cdef uint8_t[::1] flag

    def __init__(self, int dim, uint64_t seed, int64_t max_radius, int64_t L0, int b, int per):
        self.dim = dim
        self.m = 2 * dim
        self.b = b
        self.per = per
        self.seed = seed
        self.max_radius = max_radius
        self.L = 0
        self.need_grow = False
        self._allocate(L0)

    cdef void _strides(self):
        cdef int a
        cdef int64_t s = 1
        for a in range(self.dim - 1, -1, -1):
            self.stride[a] = s
            s *= self.L
        self.ncell = s
        for a in range(self.dim):
            self.off[2 * a] = -self.stride[a]
            self.off[2 * a + 1] = self.stride[a]

    def _allocate(self, int64_t L):
        cdef int64_t oldL = self.L
        shape = (L,) * self.dim
        new = {}
        names = ("eta1", "eta2", "u", "entries", "returns", "mcount", "visits")
        for name in names:
            new[name] = np.zeros(shape, dtype=np.int64)
        new["pos"] = np.full(shape, -1, dtype=np.int64)
        new["key1"] = np.zeros(shape, dtype=np.uint64)
        new["key2"] = np.zeros(shape, dtype=np.uint64)
        new["flag"] = np.zeros(shape, dtype=np.uint8)
        new["flux"] = np.zeros((self.m,) + shape, dtype=np.int64)
        if oldL:
            s = (L - oldL) // 2
            sl = (slice(s, s + oldL),) * self.dim
            oshape = (oldL,) * self.dim
            for name, old in (("eta1", self.a_eta1), ("eta2", self.a_eta2), ("u", self.a_u),
                              ("entries", self.a_entries), ("returns", self.a_returns),
                              ("mcount", self.a_mcount), ("visits", self.a_visits), ("pos", self.a_pos),
                              ("key1", self.a_key1), ("key2", self.a_key2), ("flag", self.a_flag)):
                new[name][sl] = old.reshape(oshape)
            new["flux"][(slice(None),) + sl] = self.a_flux.reshape((self.m,) + oshape)
        self.prev_L = oldL
        self.prev_c = self.c
        self.L = L
        self.c = L // 2
        self._strides()
        self.a_eta1 = new["eta1"].reshape(-1); self.eta1 = self.a_eta1
        self.a_eta2 = new["eta2"].reshape(-1); self.eta2 = self.a_eta2
        self.a_u = new["u"].reshape(-1); self.u = self.a_u
        self.a_entries = new["entries"].reshape(-1); self.entries = self.a_entries
        self.a_returns = new["returns"].reshape(-1); self.returns_site = self.a_returns
        self.a_mcount = new["mcount"].reshape(-1); self.mcount = self.a_mcount
        self.a_visits = new["visits"].reshape(-1); self.visits = self.a_visits
        self.a_pos = new["pos"].reshape(-1); self.pos = self.a_pos
        self.a_key1 = new["key1"].reshape(-1); self.key1 = self.a_key1
        self.a_key2 = new["key2"].reshape(-1); self.key2 = self.a_key2
        self.a_flag = new["flag"].reshape(-1); self.flag = self.a_flag
        self.a_flux = new["flux"].reshape(self.m, -1); self.flux = self.a_flux

    def grow(self):
        self._allocate(2 * self.L + 1)
        self.need_grow = False

    cdef int64_t remap(self, int64_t idx) noexcept:
        """Old flat index to the current layout (after one grow)."""
        cdef int64_t out = 0, q, s = (self.L - self.prev_L) // 2, pl = self.prev_L
        cdef int a
        cdef int64_t ostride = 1
        for a in range(self.dim - 1, -1, -1):
            q = (idx // ostride) % pl
            out += (q + s) * self.stride[a]
            ostride *= pl
        return out

    cdef inline int64_t origin(self) noexcept:
        cdef int64_t o = 0
        cdef int a
        for a in range(self.dim):
            o += self.c * self.stride[a]
        return o

    cdef inline void coords(self, int64_t idx, int64_t* out) noexcept:
        cdef int a
        for a in range(self.dim):
            out[a] = (idx // self.stride[a]) % self.L - self.c

    cdef int land(self, int64_t y, int64_t a1, int64_t a2) except -1:
        cdef int64_t q, r
        cdef int a
        self.eta1[y] += a1
        self.eta2[y] += a2
        self.entries[y] += a1 + a2
        for a in range(self.dim):
            q = (y // self.stride[a]) % self.L
            if q == 0 or q == self.L - 1:
                self.need_grow = True
            r = q - self.c
            if r < 0:
                r = -r
            if r > self.max_radius:
                raise WindowCapExceeded(f"particle reached radius {r} > {self.max_radius}")
        return 0

    cdef inline uint64_t stack_key(self, int64_t x, int sp) noexcept:
        cdef uint64_t v
        cdef int64_t buf[MAXDIM]
        v = self.key1[x] if sp == 0 else self.key2[x]
        if v == 0:
            self.coords(x, buf)
            v = key_chain(self.seed, TAG_STACK, sp, buf, self.dim)
            if sp == 0:
                self.key1[x] = v
            else:
                self.key2[x] = v
        return v

    cdef inline uint64_t other_key(self, int64_t x, int tag, int sp) noexcept:
        cdef int64_t buf[MAXDIM]
        self.coords(x, buf)
        return key_chain(self.seed, tag, sp, buf, self.dim)

    cdef inline bint legal(self, int64_t x) noexcept:
        return self.eta1[x] > 0 and self.eta2[x] > 0

    cdef inline int64_t pmin(self, int64_t x) noexcept:
        return self.eta1[x] if self.eta1[x] < self.eta2[x] else self.eta2[x]

    def result(self):
        return {
            "L": self.L,
            "center": self.c,
            "eta1": self.a_eta1.copy(),
            "eta2": self.a_eta2.copy(),
            "u": self.a_u.copy(),
            "entries": self.a_entries.copy(),
            "flux": self.a_flux.copy(),
            "returns_site": self.a_returns.copy(),
        }


cdef class Series:
    cdef I64Vec vals
    cdef public int64_t stride, cap, target

    def __init__(self, int64_t p0, int64_t cap, int64_t target):
        self.vals = I64Vec(1024)
        self.vals.push(p0)
        self.stride = 1
        self.cap = cap
        self.target = target

    cdef void push(self, int64_t t, int64_t p):
        cdef int64_t f
        if t % self.stride:
            return
        self.vals.push(p)
        if self.vals.size > self.cap:
            f = (self.vals.size + self.target - 1) // self.target
            if f < 2:
                f = 2
            kept = self.vals.arr[: self.vals.size : f].copy()
            self.vals.size = 0
            for v in kept:
                self.vals.push(v)
            self.stride *= f
            self.cap = self.target

    def values(self):
        return self.vals.arr[: self.vals.size].copy()


cdef inline int classify(int64_t l, int64_t r) noexcept:
    if (l < 0 and r > 0) or (l > 0 and r < 0):
        return 0
    if (l > 0 and r > 0) or (l < 0 and r < 0):
        return 3
    if l == 0 and r == 0:
        return 2
    return 1


def _layout(int dim):
    cdef int m = 2 * dim
    if m & (m - 1):
        return 0, 1
    b = m.bit_length() - 1
    return b, 64 // b


def simulate(int64_t n, int dim=1, uint64_t seed=0, engine="exact", policy="leftmost",
             sampler="stack", bint merged=False, script=None, bint track=True,
             int64_t budget=(1 << 62), int64_t max_radius=(1 << 20), bint fault=False,
             int64_t series_cap=10**7, int64_t series_points=10**6):
    if dim < 1 or dim > MAXDIM:
        raise ValueError(f"dimension must be in 1..{MAXDIM}")
    b, per = _layout(dim)
    cdef int64_t L0 = 33 if dim == 1 else (17 if dim == 2 else 9)
    cdef Grid g = Grid(dim, seed, max_radius, L0, b, per)
    if engine == "batched":
        out = _run_batched(g, n, sampler == "binomial", budget)
    else:
        out = _run_exact(g, n, policy, merged, script, track, budget, fault, series_cap, series_points)
    out.update(g.result())
    return out


cdef dict _run_batched(Grid g, int64_t n, bint binomial, int64_t budget):
    cdef int64_t t = 0, x, y, k, done, j, v, head = 0
    cdef int m = g.m
    cdef int64_t c1[2 * MAXDIM]
    cdef int64_t c2[2 * MAXDIM]
    cdef I64Vec q = I64Vec(1024)
    status = "fixated"
    if n > 0:
        x = g.origin()
        g.eta1[x] = n
        g.eta2[x] = n
        q.push(x)
        g.flag[x] = 1
    while head < q.size:
        x = q.data[head]
        head += 1
        if head > 4096 and head * 2 > q.size:
            q.arr[: q.size - head] = q.arr[head : q.size]
            q.size -= head
            head = 0
        g.flag[x] = 0
        k = g.pmin(x)
        if k == 0:
            continue
        if t + k > budget:
            status = "budget"
            break
        done = g.u[x]
        if binomial:
            v = g.visits[x] + 1
            g.visits[x] = v
            count_range(visit_key(g.other_key(x, TAG_BINOMIAL, 0), <uint64_t>v), 0, k, m, g.b, g.per, c1)
            count_range(visit_key(g.other_key(x, TAG_BINOMIAL, 1), <uint64_t>v), 0, k, m, g.b, g.per, c2)
        else:
            count_range(g.stack_key(x, 0), done, k, m, g.b, g.per, c1)
            count_range(g.stack_key(x, 1), done, k, m, g.b, g.per, c2)
        g.eta1[x] -= k
        g.eta2[x] -= k
        g.u[x] = done + k
        t += k
        for j in range(m):
            if c1[j] or c2[j]:
                y = x + g.off[j]
                g.land(y, c1[j], c2[j])
                g.flux[j, x] += c1[j] + c2[j]
        for j in range(m):
            if c1[j] or c2[j]:
                y = x + g.off[j]
                if not g.flag[y] and g.legal(y):
                    q.push(y)
                    g.flag[y] = 1
        if g.need_grow:
            g.grow()
            for j in range(head, q.size):
                q.data[j] = g.remap(q.data[j])
    cdef int64_t P = 0
    for x in range(g.ncell):
        P += g.pmin(x)
    return {"status": status, "tau": t, "N": [0, 0, 0, 0], "returns_total": 0, "sum_z": 0,
            "p_final": P, "p_series": np.array([n], dtype=np.int64), "p_stride": 1}


cdef dict _run_exact(Grid g, int64_t n, policy, bint merged, script, bint track, int64_t budget,
                     bint fault, int64_t series_cap, int64_t series_points):
    cdef int pol
    if policy == "leftmost":
        pol = P_LEFT
    elif policy == "rightmost":
        pol = P_RIGHT
    elif policy == "uniform":
        pol = P_UNIFORM
    elif policy == "sweep":
        pol = P_SWEEP
    elif policy == "scripted":
        pol = P_SCRIPT
    else:
        raise ValueError(f"unknown policy {policy!r}")
    cdef int dim = g.dim, m = g.m
    cdef int64_t t = 0, x = 0, y1, y2, k, i2, anchor, r, l = 0, rr = 0, before = 0, after, dp, P = n
    cdef int64_t sum_z = 0, returns_total = 0, i, last, head = 0, o
    cdef int64_t N[4]
    cdef int64_t local[3]
    cdef int nlocal = 0, cls = 0, j1, j2, s
    cdef int64_t buf[MAXDIM]
    cdef uint64_t pkey
    cdef I64Vec heap = I64Vec(64)
    cdef I64Vec active = I64Vec(64)
    cdef I64Vec rounds = I64Vec(64)
    cdef Series series = Series(n, series_cap, series_points)
    cdef int64_t sgn = -1 if pol == P_RIGHT else 1
    N[0] = N[1] = N[2] = N[3] = 0
    status = "fixated"
    script_list = list(script or ())
    cdef int64_t script_pos = 0, nscript = len(script_list)
    pkey = key_chain(g.seed, TAG_POLICY, 0, buf, 0)
    o = g.origin()
    if n > 0:
        g.eta1[o] = n
        g.eta2[o] = n
        if pol == P_LEFT or pol == P_RIGHT:
            heap_push(heap, sgn * o)
            g.flag[o] = 1
        elif pol == P_UNIFORM:
            g.pos[o] = 0
            active.push(o)

    while True:
        if pol == P_LEFT or pol == P_RIGHT:
            while heap.size and not g.legal(sgn * heap.data[0]):
                g.flag[sgn * heap.data[0]] = 0
                heap_pop(heap)
            if heap.size == 0:
                break
            x = sgn * heap.data[0]
        elif pol == P_UNIFORM:
            if active.size == 0:
                break
            x = active.data[word_at(pkey, <uint64_t>t) % <uint64_t>active.size]
        elif pol == P_SWEEP:
            if head == rounds.size:
                rounds.size = 0
                head = 0
                for i in range(g.ncell):
                    if g.legal(i):
                        rounds.push(i)
                if rounds.size == 0:
                    break
            x = rounds.data[head]
            head += 1
        else:
            if script_pos == nscript:
                status = "script-end"
                break
            site = script_list[script_pos]
            script_pos += 1
            coords = (site,) if dim == 1 else tuple(site)
            x = 0
            for s in range(dim):
                r = coords[s]
                if r < -g.c or r > g.c:
                    raise IllegalFiring(f"site {site} is not legal at firing {t}")
                x += (r + g.c) * g.stride[s]
            if not g.legal(x):
                raise IllegalFiring(f"site {site} is not legal at firing {t}")
        if t >= budget:
            status = "budget"
            break

        k = g.u[x] + 1
        if merged:
            g.coords(x, buf)
            r = buf[0] % 3
            if r < 0:
                r += 3
            if r == 0:
                j1 = direction(g.stack_key(x, 0), k, 2, 1, 64)
                j2 = direction(g.stack_key(x, 1), k, 2, 1, 64)
            else:
                anchor = x + 1 if r == 2 else x - 1
                i2 = g.mcount[anchor] + 1
                g.mcount[anchor] = i2
                j1 = direction(g.other_key(anchor, TAG_MERGED, 0), i2, 2, 1, 64)
                j2 = direction(g.other_key(anchor, TAG_MERGED, 1), i2, 2, 1, 64)
                if r == 1:
                    j1 ^= 1
                    j2 ^= 1
        else:
            j1 = direction(g.stack_key(x, 0), k, m, g.b, g.per)
            j2 = direction(g.stack_key(x, 1), k, m, g.b, g.per)
        if fault and x == o and (t & 1):
            j1 ^= 1
        y1 = x + g.off[j1]
        y2 = x + g.off[j2]

        if track:
            if dim == 1:
                l = g.eta1[x - 1] - g.eta2[x - 1]
                rr = g.eta1[x + 1] - g.eta2[x + 1]
                cls = classify(l, rr)
                local[0] = x - 1
                local[1] = x
                local[2] = x + 1
                nlocal = 3
            else:
                local[0] = x
                local[1] = y1
                nlocal = 2
                if y2 != y1:
                    local[2] = y2
                    nlocal = 3
            before = 0
            for s in range(nlocal):
                before += g.pmin(local[s])

        g.eta1[x] -= 1
        g.eta2[x] -= 1
        g.land(y1, 1, 0)
        g.land(y2, 0, 1)
        g.u[x] = k
        g.flux[j1, x] += 1
        g.flux[j2, x] += 1

        if track:
            after = 0
            for s in range(nlocal):
                after += g.pmin(local[s])
            dp = after - before
            if dim == 1:
                if cls == 3 and dp != 0:
                    raise SupportViolation(f"class 4 increment {dp}")
                if (cls == 1 or cls == 2) and dp > 0:
                    raise SupportViolation(f"class {cls + 1} increment {dp}")
                N[cls] += 1
                if l == 0:
                    g.returns_site[x - 1] += 1
                    returns_total += 1
                if rr == 0:
                    g.returns_site[x + 1] += 1
                    returns_total += 1
            sum_z += dp
            P += dp
            series.push(t + 1, P)

        if pol == P_LEFT or pol == P_RIGHT:
            if not g.flag[y1] and g.legal(y1):
                heap_push(heap, sgn * y1)
                g.flag[y1] = 1
            if not g.flag[y2] and g.legal(y2):
                heap_push(heap, sgn * y2)
                g.flag[y2] = 1
        elif pol == P_UNIFORM:
            _sync(g, active, x)
            _sync(g, active, y1)
            if y2 != y1:
                _sync(g, active, y2)
        t += 1

        if g.need_grow:
            g.grow()
            for i in range(heap.size):
                heap.data[i] = sgn * g.remap(sgn * heap.data[i])
            for i in range(active.size):
                active.data[i] = g.remap(active.data[i])
            for i in range(head, rounds.size):
                rounds.data[i] = g.remap(rounds.data[i])
            o = g.origin()

    if not track:
        P = 0
        for i in range(g.ncell):
            P += g.pmin(i)
    return {"status": status, "tau": t, "N": [N[0], N[1], N[2], N[3]],
            "returns_total": returns_total, "sum_z": sum_z, "p_final": P,
            "p_series": series.values(), "p_stride": series.stride}


cdef void _sync(Grid g, I64Vec active, int64_t s):
    cdef int64_t i, last
    if g.legal(s):
        if g.pos[s] < 0:
            g.pos[s] = active.size
            active.push(s)
    elif g.pos[s] >= 0:
        i = g.pos[s]
        g.pos[s] = -1
        active.size -= 1
        last = active.data[active.size]
        if i < active.size:
            active.data[i] = last
            g.pos[last] = i


def lazy_walk(int64_t t, int64_t trials, uint64_t seed):
    """Per-trial |R_t|, max_{i<t}|R_i| and zeros of R_0..R_{floor(0.9t)}."""
    end_a = np.zeros(trials, dtype=np.int64)
    peak_a = np.zeros(trials, dtype=np.int64)
    zeros_a = np.zeros(trials, dtype=np.int64)
    cdef int64_t[::1] end = end_a, peak = peak_a, zeros = zeros_a
    cdef int64_t i, s, pos, absmax, z, horizon = (9 * t) // 10
    cdef uint64_t key, word = 0
    cdef int64_t buf[1]
    for i in range(trials):
        buf[0] = i
        key = key_chain(seed, TAG_WALK, 0, buf, 1)
        pos = 0
        absmax = 0
        z = 1
        for s in range(t):
            if s & 31 == 0:
                word = word_at(key, <uint64_t>(s >> 5))
            if pos > absmax:
                absmax = pos
            elif -pos > absmax:
                absmax = -pos
            pos += <int64_t>(word & 1) + <int64_t>((word >> 1) & 1) - 1
            word >>= 2
            if pos == 0 and s + 1 <= horizon:
                z += 1
        end[i] = pos if pos >= 0 else -pos
        peak[i] = absmax
        zeros[i] = z
    return end_a, peak_a, zeros_a
