"""Pure-Python simulation kernels.

Selected at import when the compiled core is unavailable (or when
``OILWATER_PURE=1``). Results are bit-identical to the compiled core: both
follow the same scheduling rules and read the same PRF words.
"""

from __future__ import annotations

import heapq
from collections import deque

import numpy as np

from . import prf
from .errors import IllegalFiring, SupportViolation, WindowCapExceeded

NAME = "python"

DRIFT_CLASSES = 4


def _neighbors(dim):
    if dim == 1:
        return lambda x, j: x + 1 if j & 1 else x - 1

    def step(x, j):
        a = j >> 1
        return x[:a] + (x[a] + (1 if j & 1 else -1),) + x[a + 1 :]

    return step


def _radius(x, dim):
    return abs(x) if dim == 1 else max(abs(c) for c in x)


def _coords(x, dim):
    return (x,) if dim == 1 else x


class _Series:
    """P_t recorder: exact up to ``cap`` points, then strided to <= ``target``."""

    def __init__(self, p0, cap, target):
        self.values = [p0]
        self.stride = 1
        self.cap = cap
        self.target = target

    def push(self, t, p):
        if t % self.stride:
            return
        self.values.append(p)
        if len(self.values) > self.cap:
            f = -(-len(self.values) // self.target)
            if f < 2:
                f = 2
            self.values = self.values[::f]
            self.stride *= f
            self.cap = self.target


def _classify(l, r):
    if l * r < 0:
        return 0
    if l * r > 0:
        return 3
    if l == 0 and r == 0:
        return 2
    return 1


def _check_support(cls, dp):
    if cls == 3 and dp != 0:
        raise SupportViolation(f"class 4 increment {dp}")
    if cls in (1, 2) and dp > 0:
        raise SupportViolation(f"class {cls + 1} increment {dp}")


def _count_range(key, start, k, dim):
    """Direction counts among draws ``start+1 .. start+k`` of one stream."""
    m = 2 * dim
    counts = [0] * m
    b, per = prf.layout(dim)
    if b == 0:
        for i in range(start, start + k):
            counts[prf.word_at(key, i) % m] += 1
        return counts
    if b == 1:
        ones = prf.count_ones_prefix(key, start + k) - prf.count_ones_prefix(key, start)
        counts[1] = ones
        counts[0] = k - ones
        return counts
    mask = (1 << b) - 1
    i = start
    end = start + k
    while i < end:
        w, off = divmod(i, per)
        word = prf.word_at(key, w)
        stop = min(end, (w + 1) * per)
        for p in range(off, off + stop - i):
            counts[(word >> (b * p)) & mask] += 1
        i = stop
    return counts


def simulate(
    n,
    dim=1,
    seed=0,
    engine="exact",
    policy="leftmost",
    sampler="stack",
    merged=False,
    script=None,
    track=True,
    budget=1 << 62,
    max_radius=1 << 20,
    fault=False,
    series_cap=10**7,
    series_points=10**6,
):
    step = _neighbors(dim)
    origin = 0 if dim == 1 else (0,) * dim
    m = 2 * dim
    eta1 = {}
    eta2 = {}
    u = {}
    entries = {}
    flux = [dict() for _ in range(m)]
    returns_site = {}
    mcount = {}
    visits = {}
    if n > 0:
        eta1[origin] = n
        eta2[origin] = n

    def legal(x):
        return eta1.get(x, 0) > 0 and eta2.get(x, 0) > 0

    def pmin(x):
        return min(eta1.get(x, 0), eta2.get(x, 0))

    def g(x):
        return eta1.get(x, 0) - eta2.get(x, 0)

    keys = {}

    def key(x, sp, tag=prf.TAG_STACK):
        kk = (x, sp, tag)
        v = keys.get(kk)
        if v is None:
            v = prf.site_key(seed, tag, sp, _coords(x, dim))
            keys[kk] = v
        return v

    def land(y, a1, a2):
        if a1 or a2:
            if _radius(y, dim) > max_radius:
                raise WindowCapExceeded(f"particle reached radius {_radius(y, dim)} > {max_radius}")
        if a1:
            eta1[y] = eta1.get(y, 0) + a1
        if a2:
            eta2[y] = eta2.get(y, 0) + a2
        entries[y] = entries.get(y, 0) + a1 + a2

    t = 0
    status = "fixated"
    N = [0, 0, 0, 0]
    returns_total = 0
    sum_z = 0
    P = n
    series = _Series(n, series_cap, series_points)

    if engine == "batched":
        queue = deque()
        queued = set()
        if n > 0:
            queue.append(origin)
            queued.add(origin)
        while queue:
            x = queue.popleft()
            queued.discard(x)
            k = pmin(x)
            if k == 0:
                continue
            if t + k > budget:
                status = "budget"
                break
            done = u.get(x, 0)
            if sampler == "stack":
                c1 = _count_range(key(x, prf.OIL), done, k, dim)
                c2 = _count_range(key(x, prf.WATER), done, k, dim)
            else:
                v = visits.get(x, 0) + 1
                visits[x] = v
                c1 = _count_range(prf.visit_key(key(x, prf.OIL, prf.TAG_BINOMIAL), v), 0, k, dim)
                c2 = _count_range(prf.visit_key(key(x, prf.WATER, prf.TAG_BINOMIAL), v), 0, k, dim)
            eta1[x] -= k
            eta2[x] -= k
            u[x] = done + k
            t += k
            for j in range(m):
                if c1[j] or c2[j]:
                    y = step(x, j)
                    land(y, c1[j], c2[j])
                    flux[j][x] = flux[j].get(x, 0) + c1[j] + c2[j]
            for j in range(m):
                if c1[j] or c2[j]:
                    y = step(x, j)
                    if y not in queued and legal(y):
                        queue.append(y)
                        queued.add(y)
        P = sum(pmin(x) for x in eta1)
    else:
        heap = []
        inheap = set()
        sign = -1 if policy == "rightmost" else 1

        def hkey(x):
            if dim == 1:
                return sign * x
            return tuple(sign * c for c in x)

        active = []
        pos = {}

        def sync(s):
            if legal(s):
                if s not in pos:
                    pos[s] = len(active)
                    active.append(s)
            elif s in pos:
                i = pos.pop(s)
                last = active.pop()
                if i < len(active):
                    active[i] = last
                    pos[last] = i

        rounds = deque()
        script_iter = iter(script or ())
        pkey = prf.site_key(seed, prf.TAG_POLICY, 0, ())
        if n > 0:
            if policy in ("leftmost", "rightmost"):
                heapq.heappush(heap, (hkey(origin), origin))
                inheap.add(origin)
            elif policy == "uniform":
                sync(origin)

        while True:
            if policy in ("leftmost", "rightmost"):
                while heap and not legal(heap[0][1]):
                    inheap.discard(heapq.heappop(heap)[1])
                if not heap:
                    break
                x = heap[0][1]
            elif policy == "uniform":
                if not active:
                    break
                x = active[prf.word_at(pkey, t) % len(active)]
            elif policy == "sweep":
                if not rounds:
                    rounds.extend(sorted(s for s in eta1 if legal(s)))
                    if not rounds:
                        break
                x = rounds.popleft()
            elif policy == "scripted":
                try:
                    x = next(script_iter)
                except StopIteration:
                    status = "script-end"
                    break
                if dim > 1:
                    x = tuple(x)
                if not legal(x):
                    raise IllegalFiring(f"site {x} is not legal at firing {t}")
            else:
                raise ValueError(f"unknown policy {policy!r}")
            if t >= budget:
                status = "budget"
                break

            k = u.get(x, 0) + 1
            if merged:
                r = x % 3
                if r == 0:
                    j1 = prf.direction_index(key(x, prf.OIL), k, 1)
                    j2 = prf.direction_index(key(x, prf.WATER), k, 1)
                else:
                    anchor = x + 1 if r == 2 else x - 1
                    i2 = mcount.get(anchor, 0) + 1
                    mcount[anchor] = i2
                    j1 = prf.direction_index(key(anchor, prf.OIL, prf.TAG_MERGED), i2, 1)
                    j2 = prf.direction_index(key(anchor, prf.WATER, prf.TAG_MERGED), i2, 1)
                    if r == 1:
                        j1 ^= 1
                        j2 ^= 1
            else:
                j1 = prf.direction_index(key(x, prf.OIL), k, dim)
                j2 = prf.direction_index(key(x, prf.WATER), k, dim)
            if fault and x == origin and t & 1:
                j1 ^= 1
            y1 = step(x, j1)
            y2 = step(x, j2)

            if track:
                if dim == 1:
                    l = g(x - 1)
                    r_ = g(x + 1)
                    cls = _classify(l, r_)
                    local = (x - 1, x, x + 1)
                else:
                    local = (x, y1) if y1 == y2 else (x, y1, y2)
                before = sum(pmin(s) for s in local)

            eta1[x] -= 1
            eta2[x] -= 1
            land(y1, 1, 0)
            land(y2, 0, 1)
            u[x] = k
            flux[j1][x] = flux[j1].get(x, 0) + 1
            flux[j2][x] = flux[j2].get(x, 0) + 1

            if track:
                dp = sum(pmin(s) for s in local) - before
                if dim == 1:
                    _check_support(cls, dp)
                    N[cls] += 1
                    if l == 0:
                        returns_site[x - 1] = returns_site.get(x - 1, 0) + 1
                        returns_total += 1
                    if r_ == 0:
                        returns_site[x + 1] = returns_site.get(x + 1, 0) + 1
                        returns_total += 1
                sum_z += dp
                P += dp
                series.push(t + 1, P)

            if policy in ("leftmost", "rightmost"):
                for s in (y1, y2):
                    if s not in inheap and legal(s):
                        heapq.heappush(heap, (hkey(s), s))
                        inheap.add(s)
            elif policy == "uniform":
                sync(x)
                sync(y1)
                if y2 != y1:
                    sync(y2)
            t += 1
        if not track:
            P = sum(pmin(s) for s in eta1)

    # dense layout: side 2R+3 centred on the origin
    R = 0
    for d_ in (eta1, eta2, u, entries, returns_site, *flux):
        for s in d_:
            R = max(R, _radius(s, dim))
    L = 2 * R + 3
    c = R + 1

    def dense(d_):
        a = np.zeros((L,) * dim, dtype=np.int64)
        for s, v in d_.items():
            if v:
                a[tuple(ci + c for ci in _coords(s, dim))] = v
        return a.reshape(-1)

    return {
        "status": status,
        "L": L,
        "center": c,
        "eta1": dense(eta1),
        "eta2": dense(eta2),
        "u": dense(u),
        "entries": dense(entries),
        "flux": np.stack([dense(f) for f in flux]),
        "returns_site": dense(returns_site),
        "tau": t,
        "N": N,
        "returns_total": returns_total,
        "sum_z": sum_z,
        "p_final": P,
        "p_series": np.asarray(series.values, dtype=np.int64),
        "p_stride": series.stride,
    }


def lazy_walk(t, trials, seed):
    """Lazy walks with steps -1, 0, +1 w.p. 1/4, 1/2, 1/4.

    Returns per-trial ``|R_t|``, ``max_{i<t} |R_i|`` and the number of
    zeros of ``R_0 .. R_{floor(0.9 t)}``.
    """
    end = np.zeros(trials, dtype=np.int64)
    peak = np.zeros(trials, dtype=np.int64)
    zeros = np.zeros(trials, dtype=np.int64)
    horizon = (9 * t) // 10
    nwords = (t + 31) // 32
    shifts = np.arange(32, dtype=np.uint64) * np.uint64(2)
    for i in range(trials):
        key = prf.site_key(seed, prf.TAG_WALK, 0, (i,))
        words = prf.words_np(key, np.arange(nwords))
        fields = ((words[:, None] >> shifts[None, :]) & np.uint64(3)).reshape(-1)[:t]
        steps = (fields & np.uint64(1)).astype(np.int64) + (fields >> np.uint64(1)).astype(np.int64) - 1
        path = np.concatenate(([0], np.cumsum(steps)))
        end[i] = abs(path[t])
        peak[i] = np.abs(path[:t]).max() if t > 0 else 0
        zeros[i] = np.count_nonzero(path[: horizon + 1] == 0)
    return end, peak, zeros
