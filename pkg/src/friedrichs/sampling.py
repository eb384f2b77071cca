"""Uniform interior and boundary sampling with measure weights and normals.

Every domain reports its volume, a bounding box, a containment predicate,
and a list of boundary pieces (each with exact area, an on-surface sampler,
and outward unit normals).  Interior sampling is rejection from the bounding
box where the geometry requires it; a collapsing acceptance rate signals a
degenerate configuration instead of spinning forever.  High-order Gauss
quadrature is available on the geometries where tensor or polar rules are
exact, for the verification oracles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DegenerateGeometryError",
    "BoundaryPiece",
    "SampleBatch",
    "Domain",
    "Hypercube",
    "Ball",
    "AnnulusSector",
    "Cylinder",
    "PolygonHolesCylinder",
    "make_batch",
    "gauss_legendre",
]


class DegenerateGeometryError(RuntimeError):
    """Rejection sampling acceptance collapsed below the safe threshold."""


@dataclass
class BoundaryPiece:
    name: str
    area: float
    sample: object          # (n, rng) -> (n, d) points on the surface
    normal: object          # (points) -> (n, d) outward unit normals


@dataclass
class SampleBatch:
    """Interior and boundary Monte Carlo points with measure weights."""

    interior: np.ndarray          # (N1, d)
    volume_weight: float          # |Omega| / N1
    boundary: np.ndarray          # (N2, d)
    normals: np.ndarray           # (N2, d)
    surface_weight: float         # |sampled boundary| / N2
    piece_index: np.ndarray       # (N2,) index into piece_names
    piece_names: list

    @property
    def n_interior(self):
        return self.interior.shape[0]

    @property
    def n_boundary(self):
        return self.boundary.shape[0]


def gauss_legendre(order: int, a: float, b: float):
    """Gauss-Legendre nodes/weights on [a, b]."""
    x, w = np.polynomial.legendre.leggauss(order)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return mid + half * x, half * w


def _tensor_quad(order, bounds):
    axes = [gauss_legendre(order, lo, hi) for lo, hi in bounds]
    grids = np.meshgrid(*[x for x, _ in axes], indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    w = np.ones(pts.shape[0])
    shape = [len(axes[i][0]) for i in range(len(axes))]
    for i, (_, wi) in enumerate(axes):
        full = np.ones(shape)
        idx = [None] * len(axes)
        idx[i] = slice(None)
        full = full * wi[tuple(idx)]
        w = w * full.ravel()
    return pts, w


class Domain:
    """Base geometry; subclasses fill in volume, containment and pieces."""

    d: int
    volume: float
    name: str = "domain"

    # proposals drawn per rejection round, acceptance guarded after warmup
    _CHUNK = 4096
    _MIN_ACCEPT = 1e-3

    def contains(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def bounding_box(self):
        raise NotImplementedError

    def boundary_pieces(self) -> list:
        raise NotImplementedError

    def sample_interior(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """i.i.d. uniform with respect to Lebesgue measure on the domain."""
        if n < 1:
            raise ValueError("need n >= 1")
        lo, hi = self.bounding_box()
        out = np.empty((n, self.d))
        have = 0
        proposed = 0
        accepted = 0
        while have < n:
            cand = rng.uniform(lo, hi, size=(self._CHUNK, self.d))
            keep = cand[self.contains(cand)]
            proposed += self._CHUNK
            accepted += keep.shape[0]
            take = min(n - have, keep.shape[0])
            out[have:have + take] = keep[:take]
            have += take
            if proposed >= 10 * self._CHUNK and accepted / proposed < self._MIN_ACCEPT:
                raise DegenerateGeometryError(
                    f"{self.name}: acceptance rate {accepted / proposed:.2e} below "
                    f"{self._MIN_ACCEPT}")
        return out

    def sample_boundary(self, n: int, rng: np.random.Generator, pieces=None):
        """Uniform w.r.t. surface measure; piece choice proportional to area.

        Returns (points, outward unit normals, piece index array).
        """
        all_pieces = self.boundary_pieces()
        if pieces is not None:
            wanted = set(pieces)
            chosen = [p for p in all_pieces if p.name in wanted]
            missing = wanted - {p.name for p in chosen}
            if missing:
                raise ValueError(f"unknown boundary pieces: {sorted(missing)}")
        else:
            chosen = all_pieces
        if not chosen:
            raise ValueError("empty boundary piece selection")
        areas = np.array([p.area for p in chosen])
        counts = rng.multinomial(n, areas / areas.sum())
        pts, nrm, idx = [], [], []
        for i, (piece, c) in enumerate(zip(chosen, counts)):
            if c == 0:
                continue
            P = piece.sample(int(c), rng)
            pts.append(P)
            nrm.append(piece.normal(P))
            idx.append(np.full(int(c), i, dtype=np.int64))
        X = np.concatenate(pts, axis=0)
        N = np.concatenate(nrm, axis=0)
        I = np.concatenate(idx, axis=0)
        return X, N, I, [p.name for p in chosen]

    def total_boundary_area(self, pieces=None) -> float:
        ps = self.boundary_pieces()
        if pieces is not None:
            wanted = set(pieces)
            ps = [p for p in ps if p.name in wanted]
        return float(sum(p.area for p in ps))

    def quadrature(self, order: int):
        raise NotImplementedError(f"{self.name}: no exact quadrature rule")

    def mc_volume_estimate(self, n: int, rng: np.random.Generator):
        """(estimate, sigma) of |Omega| by containment counting."""
        lo, hi = self.bounding_box()
        box = float(np.prod(np.asarray(hi) - np.asarray(lo)))
        hits = self.contains(rng.uniform(lo, hi, size=(n, self.d))).mean()
        est = hits * box
        sigma = box * np.sqrt(max(hits * (1 - hits), 1e-12) / n)
        return est, sigma


class Hypercube(Domain):
    """Axis-aligned box, including the unit square and the 15-d cube."""

    def __init__(self, lo, hi, d: int | None = None):
        lo = np.atleast_1d(np.asarray(lo, dtype=np.float64))
        hi = np.atleast_1d(np.asarray(hi, dtype=np.float64))
        if d is not None and lo.size == 1:
            lo = np.full(d, lo[0])
            hi = np.full(d, hi[0])
        if np.any(hi <= lo):
            raise ValueError("need hi > lo per axis")
        self.lo, self.hi = lo, hi
        self.d = lo.size
        self.volume = float(np.prod(hi - lo))
        self.name = f"hypercube{self.d}d"

    def contains(self, X):
        return np.all((X >= self.lo) & (X <= self.hi), axis=1)

    def bounding_box(self):
        return self.lo, self.hi

    def sample_interior(self, n, rng):
        if n < 1:
            raise ValueError("need n >= 1")
        return rng.uniform(self.lo, self.hi, size=(n, self.d))

    def boundary_pieces(self):
        pieces = []
        side = self.hi - self.lo
        for k in range(self.d):
            face_area = float(np.prod(np.delete(side, k))) if self.d > 1 else 1.0
            for sign, value in ((-1.0, self.lo[k]), (1.0, self.hi[k])):
                def sample(n, rng, k=k, value=value):
                    P = rng.uniform(self.lo, self.hi, size=(n, self.d))
                    P[:, k] = value
                    return P

                def normal(P, k=k, sign=sign):
                    out = np.zeros_like(P)
                    out[:, k] = sign
                    return out

                tag = "min" if sign < 0 else "max"
                pieces.append(BoundaryPiece(f"x{k}={tag}", face_area, sample, normal))
        return pieces

    def quadrature(self, order):
        if self.d > 4:
            raise NotImplementedError("tensor rule impractical beyond d = 4")
        return _tensor_quad(order, list(zip(self.lo, self.hi)))

    def boundary_quadrature(self, order):
        """(points, normals, weights) over all faces; d = 2 only."""
        if self.d != 2:
            raise NotImplementedError
        xs, ws = gauss_legendre(order, self.lo[0], self.hi[0])
        ys, wys = gauss_legendre(order, self.lo[1], self.hi[1])
        pts, nrm, w = [], [], []
        for k, (coords, cw) in ((0, (ys, wys)), (1, (xs, ws))):
            for sign, value in ((-1.0, self.lo[k]), (1.0, self.hi[k])):
                P = np.zeros((coords.size, 2))
                P[:, k] = value
                P[:, 1 - k] = coords
                nv = np.zeros((coords.size, 2))
                nv[:, k] = sign
                pts.append(P)
                nrm.append(nv)
                w.append(cw)
        return np.concatenate(pts), np.concatenate(nrm), np.concatenate(w)


class Ball(Domain):
    def __init__(self, center, radius: float):
        self.center = np.asarray(center, dtype=np.float64)
        self.radius = float(radius)
        self.d = self.center.size
        if self.d == 2:
            self.volume = np.pi * radius**2
        elif self.d == 3:
            self.volume = 4.0 / 3.0 * np.pi * radius**3
        else:
            from math import gamma
            self.volume = np.pi ** (self.d / 2) / gamma(self.d / 2 + 1) * radius ** self.d
        self.name = f"ball{self.d}d"

    def contains(self, X):
        return np.sum((X - self.center) ** 2, axis=1) <= self.radius**2

    def bounding_box(self):
        return self.center - self.radius, self.center + self.radius

    def boundary_pieces(self):
        if self.d == 2:
            area = 2 * np.pi * self.radius
        elif self.d == 3:
            area = 4 * np.pi * self.radius**2
        else:
            area = self.d * self.volume / self.radius

        def sample(n, rng):
            g = rng.normal(size=(n, self.d))
            g /= np.linalg.norm(g, axis=1, keepdims=True)
            return self.center + self.radius * g

        def normal(P):
            v = P - self.center
            return v / np.linalg.norm(v, axis=1, keepdims=True)

        return [BoundaryPiece("sphere", area, sample, normal)]

    def quadrature(self, order):
        if self.d != 2:
            raise NotImplementedError
        r, wr = gauss_legendre(order, 0.0, self.radius)
        t, wt = gauss_legendre(order, 0.0, 2 * np.pi)
        R, T = np.meshgrid(r, t, indexing="ij")
        pts = np.stack([self.center[0] + (R * np.cos(T)).ravel(),
                        self.center[1] + (R * np.sin(T)).ravel()], axis=1)
        w = (np.outer(wr * r, wt)).ravel()
        return pts, w


class AnnulusSector(Domain):
    """Radial band r0 <= |x| <= r1 within an angular range, in the plane."""

    def __init__(self, r0: float, r1: float, theta0: float, theta1: float):
        if not (0 <= r0 < r1):
            raise ValueError("need 0 <= r0 < r1")
        if not (theta0 < theta1 <= theta0 + 2 * np.pi):
            raise ValueError("bad angular range")
        self.r0, self.r1 = float(r0), float(r1)
        self.theta0, self.theta1 = float(theta0), float(theta1)
        self.volume = 0.5 * (r1**2 - r0**2) * (theta1 - theta0)
        self.d = 2
        self.name = "annulus-sector"

    def contains(self, X):
        r = np.hypot(X[:, 0], X[:, 1])
        theta = np.arctan2(X[:, 1], X[:, 0])
        ok_r = (r >= self.r0) & (r <= self.r1)
        ok_t = (theta >= self.theta0) & (theta <= self.theta1)
        return ok_r & ok_t

    def bounding_box(self):
        ts = np.linspace(self.theta0, self.theta1, 181)
        xs = np.concatenate([self.r0 * np.cos(ts), self.r1 * np.cos(ts)])
        ys = np.concatenate([self.r0 * np.sin(ts), self.r1 * np.sin(ts)])
        return (np.array([xs.min(), ys.min()]), np.array([xs.max(), ys.max()]))

    def _arc_piece(self, name, radius, outward_sign):
        def sample(n, rng, radius=radius):
            t = rng.uniform(self.theta0, self.theta1, size=n)
            return np.stack([radius * np.cos(t), radius * np.sin(t)], axis=1)

        def normal(P, outward_sign=outward_sign):
            v = P / np.linalg.norm(P, axis=1, keepdims=True)
            return outward_sign * v

        return BoundaryPiece(name, radius * (self.theta1 - self.theta0), sample, normal)

    def _radial_piece(self, name, theta, outward):
        direction = np.array([np.cos(theta), np.sin(theta)])
        nvec = np.asarray(outward, dtype=np.float64)

        def sample(n, rng):
            r = rng.uniform(self.r0, self.r1, size=n)
            return np.outer(r, direction)

        def normal(P):
            return np.tile(nvec, (P.shape[0], 1))

        return BoundaryPiece(name, self.r1 - self.r0, sample, normal)

    def boundary_pieces(self):
        pieces = [self._arc_piece("inner-arc", self.r0, -1.0) if self.r0 > 0 else None,
                  self._arc_piece("outer-arc", self.r1, 1.0)]
        t0, t1 = self.theta0, self.theta1
        if (t1 - t0) < 2 * np.pi - 1e-12:
            # outward normal of a radial cut rotates the edge direction
            n0 = np.array([np.sin(t0), -np.cos(t0)])
            n1 = np.array([-np.sin(t1), np.cos(t1)])
            pieces.append(self._radial_piece("edge-theta0", t0, n0))
            pieces.append(self._radial_piece("edge-theta1", t1, n1))
        return [p for p in pieces if p is not None]

    def quadrature(self, order):
        r, wr = gauss_legendre(order, self.r0, self.r1)
        t, wt = gauss_legendre(order, self.theta0, self.theta1)
        R, T = np.meshgrid(r, t, indexing="ij")
        pts = np.stack([(R * np.cos(T)).ravel(), (R * np.sin(T)).ravel()], axis=1)
        w = np.outer(wr * r, wt).ravel()
        return pts, w


class Cylinder(Domain):
    """Time interval times a disk, coordinates (t, x, y)."""

    def __init__(self, t0: float, t1: float, radius: float = 1.0, center=(0.0, 0.0)):
        self.t0, self.t1 = float(t0), float(t1)
        self.radius = float(radius)
        self.center = np.asarray(center, dtype=np.float64)
        self.d = 3
        self.volume = (t1 - t0) * np.pi * radius**2
        self.name = "cylinder"

    def contains(self, X):
        inside_t = (X[:, 0] >= self.t0) & (X[:, 0] <= self.t1)
        r2 = (X[:, 1] - self.center[0]) ** 2 + (X[:, 2] - self.center[1]) ** 2
        return inside_t & (r2 <= self.radius**2)

    def bounding_box(self):
        lo = np.array([self.t0, self.center[0] - self.radius, self.center[1] - self.radius])
        hi = np.array([self.t1, self.center[0] + self.radius, self.center[1] + self.radius])
        return lo, hi

    def _disk_points(self, n, rng):
        out = np.empty((n, 2))
        have = 0
        while have < n:
            cand = rng.uniform(-self.radius, self.radius, size=(self._CHUNK, 2))
            keep = cand[np.sum(cand**2, axis=1) <= self.radius**2]
            take = min(n - have, keep.shape[0])
            out[have:have + take] = keep[:take]
            have += take
        return self.center + out

    def boundary_pieces(self):
        disk_area = np.pi * self.radius**2

        def sample_cap(n, rng, t):
            xy = self._disk_points(n, rng)
            return np.column_stack([np.full(n, t), xy])

        def normal_cap(P, sign):
            out = np.zeros_like(P)
            out[:, 0] = sign
            return out

        def sample_side(n, rng):
            t = rng.uniform(self.t0, self.t1, size=n)
            ang = rng.uniform(0, 2 * np.pi, size=n)
            return np.column_stack([t,
                                    self.center[0] + self.radius * np.cos(ang),
                                    self.center[1] + self.radius * np.sin(ang)])

        def normal_side(P):
            v = P[:, 1:] - self.center
            v /= np.linalg.norm(v, axis=1, keepdims=True)
            return np.column_stack([np.zeros(P.shape[0]), v])

        return [
            BoundaryPiece("initial", disk_area,
                          lambda n, rng: sample_cap(n, rng, self.t0),
                          lambda P: normal_cap(P, -1.0)),
            BoundaryPiece("final", disk_area,
                          lambda n, rng: sample_cap(n, rng, self.t1),
                          lambda P: normal_cap(P, 1.0)),
            BoundaryPiece("side", 2 * np.pi * self.radius * (self.t1 - self.t0),
                          sample_side, normal_side),
        ]

    def quadrature(self, order):
        tq, wt = gauss_legendre(order, self.t0, self.t1)
        r, wr = gauss_legendre(order, 0.0, self.radius)
        a, wa = gauss_legendre(order, 0.0, 2 * np.pi)
        T, R, A = np.meshgrid(tq, r, a, indexing="ij")
        pts = np.stack([T.ravel(),
                        self.center[0] + (R * np.cos(A)).ravel(),
                        self.center[1] + (R * np.sin(A)).ravel()], axis=1)
        w = np.einsum("i,j,k->ijk", wt, wr * r, wa).ravel()
        return pts, w


class PolygonHolesCylinder(Domain):
    """Planar polygon with circular holes, extruded over a time interval.

    Coordinates are (t, x, y).  The polygon is a closed vertex loop; holes
    are (cx, cy, radius) triples strictly inside it.
    """

    def __init__(self, vertices, holes=(), t0: float = 0.0, t1: float = 1.0):
        self.vertices = np.asarray(vertices, dtype=np.float64)
        if self.vertices.ndim != 2 or self.vertices.shape[0] < 3:
            raise ValueError("polygon needs at least 3 vertices")
        self.holes = [(float(cx), float(cy), float(r)) for cx, cy, r in holes]
        self.t0, self.t1 = float(t0), float(t1)
        self.d = 3
        area = self._shoelace(self.vertices)
        if area <= 0:
            raise ValueError("vertices must wind counter-clockwise")
        self.plane_area = area - sum(np.pi * r**2 for _, _, r in self.holes)
        self.volume = self.plane_area * (t1 - t0)
        self.name = "polygon-holes-cylinder"

    @staticmethod
    def _shoelace(v):
        x, y = v[:, 0], v[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    def _in_polygon(self, P):
        # even-odd ray casting, vectorized over points
        x, y = P[:, 0], P[:, 1]
        inside = np.zeros(P.shape[0], dtype=bool)
        v = self.vertices
        n = v.shape[0]
        for i in range(n):
            x1, y1 = v[i]
            x2, y2 = v[(i + 1) % n]
            crosses = ((y1 > y) != (y2 > y))
            with np.errstate(divide="ignore", invalid="ignore"):
                xin = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            inside ^= crosses & (x < xin)
        return inside

    def _in_plane(self, P):
        ok = self._in_polygon(P)
        for cx, cy, r in self.holes:
            ok &= (P[:, 0] - cx) ** 2 + (P[:, 1] - cy) ** 2 >= r**2
        return ok

    def contains(self, X):
        ok_t = (X[:, 0] >= self.t0) & (X[:, 0] <= self.t1)
        return ok_t & self._in_plane(X[:, 1:])

    def bounding_box(self):
        lo = np.array([self.t0, self.vertices[:, 0].min(), self.vertices[:, 1].min()])
        hi = np.array([self.t1, self.vertices[:, 0].max(), self.vertices[:, 1].max()])
        return lo, hi

    def _plane_points(self, n, rng):
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        out = np.empty((n, 2))
        have = 0
        while have < n:
            cand = rng.uniform(lo, hi, size=(self._CHUNK, 2))
            keep = cand[self._in_plane(cand)]
            take = min(n - have, keep.shape[0])
            out[have:have + take] = keep[:take]
            have += take
        return out

    def boundary_pieces(self):
        T = self.t1 - self.t0
        pieces = [
            BoundaryPiece(
                "initial", self.plane_area,
                lambda n, rng: np.column_stack([np.full(n, self.t0), self._plane_points(n, rng)]),
                lambda P: np.tile([-1.0, 0.0, 0.0], (P.shape[0], 1))),
            BoundaryPiece(
                "final", self.plane_area,
                lambda n, rng: np.column_stack([np.full(n, self.t1), self._plane_points(n, rng)]),
                lambda P: np.tile([1.0, 0.0, 0.0], (P.shape[0], 1))),
        ]
        v = self.vertices
        nv = v.shape[0]
        for i in range(nv):
            p0, p1 = v[i], v[(i + 1) % nv]
            edge = p1 - p0
            length = float(np.hypot(*edge))
            # counter-clockwise winding puts the outward normal to the right
            nrm = np.array([0.0, edge[1], -edge[0]]) / length

            def sample(n, rng, p0=p0, edge=edge):
                s = rng.uniform(0, 1, size=n)
                xy = p0 + np.outer(s, edge)
                t = rng.uniform(self.t0, self.t1, size=n)
                return np.column_stack([t, xy])

            def normal(P, nrm=nrm):
                return np.tile(nrm, (P.shape[0], 1))

            pieces.append(BoundaryPiece(f"edge{i}", length * T, sample, normal))
        for j, (cx, cy, r) in enumerate(self.holes):
            def sample(n, rng, cx=cx, cy=cy, r=r):
                ang = rng.uniform(0, 2 * np.pi, size=n)
                t = rng.uniform(self.t0, self.t1, size=n)
                return np.column_stack([t, cx + r * np.cos(ang), cy + r * np.sin(ang)])

            def normal(P, cx=cx, cy=cy):
                radial = P[:, 1:] - [cx, cy]
                radial /= np.linalg.norm(radial, axis=1, keepdims=True)
                # outward from the domain means into the hole
                return np.column_stack([np.zeros(P.shape[0]), -radial])

            pieces.append(BoundaryPiece(f"hole{j}", 2 * np.pi * r * T, sample, normal))
        return pieces

    def _is_rectangle(self):
        v = self.vertices
        if v.shape[0] != 4:
            return None
        xs, ys = np.unique(v[:, 0]), np.unique(v[:, 1])
        if xs.size == 2 and ys.size == 2:
            return xs[0], xs[1], ys[0], ys[1]
        return None

    def quadrature(self, order):
        """Exact rule: tensor Gauss on the rectangle minus polar patches on
        the holes; integrands must extend smoothly across the holes."""
        rect = self._is_rectangle()
        if rect is None:
            raise NotImplementedError("quadrature implemented for rectangular outlines")
        x0, x1, y0, y1 = rect
        pts, w = _tensor_quad(order, [(self.t0, self.t1), (x0, x1), (y0, y1)])
        parts = [(pts, w)]
        for cx, cy, r in self.holes:
            tq, wt = gauss_legendre(order, self.t0, self.t1)
            rr, wr = gauss_legendre(order, 0.0, r)
            aa, wa = gauss_legendre(order, 0.0, 2 * np.pi)
            T, R, A = np.meshgrid(tq, rr, aa, indexing="ij")
            hp = np.stack([T.ravel(),
                           cx + (R * np.cos(A)).ravel(),
                           cy + (R * np.sin(A)).ravel()], axis=1)
            hw = -np.einsum("i,j,k->ijk", wt, wr * rr, wa).ravel()
            parts.append((hp, hw))
        return (np.concatenate([p for p, _ in parts]),
                np.concatenate([w for _, w in parts]))


def make_batch(domain: Domain, n_interior: int, n_boundary: int,
               rng: np.random.Generator, pieces=None) -> SampleBatch:
    """Draw one training batch with measure weights."""
    interior = domain.sample_interior(n_interior, rng)
    if n_boundary > 0:
        X, N, I, names = domain.sample_boundary(n_boundary, rng, pieces=pieces)
        sw = domain.total_boundary_area(pieces) / n_boundary
    else:
        X = np.zeros((0, domain.d))
        N = np.zeros((0, domain.d))
        I = np.zeros(0, dtype=np.int64)
        names = []
        sw = 0.0
    return SampleBatch(
        interior=interior,
        volume_weight=domain.volume / n_interior,
        boundary=X,
        normals=N,
        surface_weight=sw,
        piece_index=I,
        piece_names=names,
    )
