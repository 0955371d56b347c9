"""Weighted point clouds standing in for compact metric measure spaces.

A cloud is a finite set of points with strictly positive weights, a metric
(either Euclidean coordinates or an explicit distance matrix), and a recorded
mesh scale ``h`` (the largest nearest-neighbour distance).  Every integral
over the underlying space is discretized as a weighted sum, and every ball is
an open ball ``{y : d(x, y) < r}`` resolved by exact comparison, so results
do not depend on the index used to accelerate the query.

The module also carries the volume-doubling diagnostics: sampled ratios
``mu(B(x, 2r)) / mu(B(x, r))``, a fitted mass-growth exponent, and lower mass
bounds ``mu(B(x, r)) >= c r^Q``.

Built-in model spaces:

* ``interval_grid(n)``  - n equispaced points on [0, 1], uniform weights;
* ``square_grid(n)``    - n x n grid on [0, 1]^2, uniform weights;
* ``gasket(level)``     - vertices of the level-m Sierpinski gasket graph;
* ``carpet(level)``     - cell centres of the level-m Sierpinski carpet;
* ``file(path)``        - plain-text import, coordinates or distance matrix.

Scales below ``kappa * h`` are considered unresolved: operations that take a
radius refuse them.  ``kappa = 3`` is the package-wide default.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
from scipy.spatial import cKDTree

# Admissibility factor: radii below DEFAULT_KAPPA * mesh are refused.
DEFAULT_KAPPA = 3.0

# Spot-check budget for the triangle inequality on imported distance matrices.
TRIANGLE_BUDGET = 10_000


def _point_distances(coords: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Canonical Euclidean distance from one point to many.

    Every ball query funnels through this single formula so that brute-force
    scans and tree-accelerated scans agree bit for bit.
    """
    diff = coords - x
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def segment_sums(values: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """Sum consecutive segments of ``values`` with the given lengths.

    Safe for zero-length segments, unlike a bare ``np.add.reduceat``.
    """
    ends = np.cumsum(counts)
    if values.size == 0:
        return np.zeros(counts.size)
    run = np.concatenate([[0.0], np.cumsum(values)])
    return run[ends] - run[ends - counts]


def segment_max(values: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """Max over consecutive segments; empty segments give -inf."""
    out = np.full(counts.size, -np.inf)
    nonempty = counts > 0
    if values.size == 0 or not np.any(nonempty):
        return out
    starts = np.cumsum(counts) - counts
    out[nonempty] = np.maximum.reduceat(values, starts[nonempty])
    return out


@dataclass(frozen=True)
class Ball:
    """Open metric ball around a cloud point.

    Attributes
    ----------
    center : int
        Id of the centre point.
    radius : float
        Ball radius.
    member_ids : np.ndarray
        Sorted ids of the points with ``d(center, y) < radius``.
    mass : float
        Total weight of the members.
    """

    center: int
    radius: float
    member_ids: np.ndarray
    mass: float


class MeasuredPointCloud:
    """Finite weighted metric space.

    Exactly one of ``coords`` / ``dist_matrix`` must be given.  Instances are
    immutable after construction; all queries are read-only and safe to issue
    concurrently.

    Parameters
    ----------
    weights : array_like
        Strictly positive point weights (the measure).
    coords : array_like, optional
        (n, d) coordinates; the metric is Euclidean.
    dist_matrix : array_like, optional
        (n, n) symmetric distance matrix with zero diagonal.
    mesh : float, optional
        Mesh scale h.  Computed (max nearest-neighbour distance) if omitted.
        Constructors for exact model spaces pass the closed-form value.
    meta : dict, optional
        Provenance tags, e.g. ``{"kind": "gasket", "level": 5}``.
    """

    def __init__(
        self,
        weights: Sequence[float] | np.ndarray,
        coords: np.ndarray | None = None,
        dist_matrix: np.ndarray | None = None,
        mesh: float | None = None,
        meta: dict | None = None,
        triangle_budget: int = TRIANGLE_BUDGET,
        triangle_seed: int = 0,
    ):
        w = np.asarray(weights, dtype=float).reshape(-1)
        if w.size == 0:
            raise ValueError("cloud must contain at least one point")
        if not np.all(np.isfinite(w)) or np.any(w <= 0.0):
            raise ValueError("weights must be finite and strictly positive")
        self._weights = w
        self._weights.setflags(write=False)

        if (coords is None) == (dist_matrix is None):
            raise ValueError("give exactly one of coords or dist_matrix")

        if coords is not None:
            c = np.asarray(coords, dtype=float)
            if c.ndim == 1:
                c = c.reshape(-1, 1)
            if c.shape[0] != w.size:
                raise ValueError("coords and weights disagree on point count")
            if not np.all(np.isfinite(c)):
                raise ValueError("coordinates must be finite")
            self._coords: np.ndarray | None = c
            self._coords.setflags(write=False)
            self._dist: np.ndarray | None = None
        else:
            d = np.asarray(dist_matrix, dtype=float)
            if d.shape != (w.size, w.size):
                raise ValueError("distance matrix must be square, one row per point")
            if not np.all(np.isfinite(d)):
                raise ValueError("distances must be finite")
            if np.any(np.abs(np.diag(d)) > 0.0):
                raise ValueError("distance matrix must have a zero diagonal")
            if not np.array_equal(d, d.T):
                raise ValueError("distance matrix must be symmetric")
            off = d + np.diag(np.full(w.size, np.inf))
            if w.size > 1 and np.any(off <= 0.0):
                raise ValueError("off-diagonal distances must be positive")
            self._coords = None
            self._dist = d
            self._dist.setflags(write=False)
            self._spot_check_triangles(triangle_budget, triangle_seed)

        self.meta = dict(meta or {})
        self._tree: cKDTree | None = None
        self._diameter: float | None = None

        nn = self._nearest_neighbour_distances()
        if self.n > 1 and np.any(nn == 0.0):
            raise ValueError("duplicate points: mesh would be zero")
        computed_h = float(nn.max()) if self.n > 1 else 0.0
        self._mesh = computed_h if mesh is None else float(mesh)
        if self.n > 1 and self._mesh <= 0.0:
            raise ValueError("mesh must be positive")

    # ------------------------------------------------------------------
    # basic geometry
    # ------------------------------------------------------------------

    @property
    def n(self) -> int:
        return self._weights.size

    @property
    def weights(self) -> np.ndarray:
        return self._weights

    @property
    def coords(self) -> np.ndarray | None:
        return self._coords

    @property
    def is_abstract(self) -> bool:
        return self._coords is None

    @property
    def dim(self) -> int | None:
        return None if self._coords is None else self._coords.shape[1]

    @property
    def mesh(self) -> float:
        """Mesh scale h: the largest nearest-neighbour distance."""
        return self._mesh

    @property
    def total_mass(self) -> float:
        return float(self._weights.sum())

    @property
    def diameter(self) -> float:
        if self._diameter is None:
            self._diameter = self._compute_diameter()
        return self._diameter

    def _compute_diameter(self) -> float:
        if self._dist is not None:
            return float(self._dist.max())
        c = self._coords
        assert c is not None
        if c.shape[1] == 1:
            return float(c.max() - c.min())
        if c.shape[0] <= 2048:
            from scipy.spatial.distance import pdist

            return float(pdist(c).max()) if c.shape[0] > 1 else 0.0
        # Large Euclidean clouds: the diameter is attained on the hull.
        from scipy.spatial import ConvexHull
        from scipy.spatial.distance import pdist

        hull = c[ConvexHull(c).vertices]
        return float(pdist(hull).max())

    def _spot_check_triangles(self, budget: int, seed: int) -> None:
        d = self._dist
        assert d is not None
        if self.n < 3 or budget <= 0:
            return
        rng = np.random.default_rng(seed)
        idx = rng.integers(0, self.n, size=(budget, 3))
        i, j, k = idx[:, 0], idx[:, 1], idx[:, 2]
        slack = 1e-12 * max(1.0, float(d.max()))
        if np.any(d[i, k] > d[i, j] + d[j, k] + slack):
            raise ValueError("triangle inequality fails on a sampled triple")

    def _nearest_neighbour_distances(self) -> np.ndarray:
        if self.n == 1:
            return np.zeros(1)
        if self._dist is not None:
            off = self._dist + np.diag(np.full(self.n, np.inf))
            return off.min(axis=1)
        d, _ = self._kdtree().query(self._coords, k=2)
        return d[:, 1]

    def _kdtree(self) -> cKDTree:
        if self._tree is None:
            self._tree = cKDTree(self._coords)
        return self._tree

    # ------------------------------------------------------------------
    # distances and balls
    # ------------------------------------------------------------------

    def distances_from(self, x: int) -> np.ndarray:
        """Distances from point ``x`` to every point, in id order."""
        if self._dist is not None:
            return self._dist[x]
        return _point_distances(self._coords, self._coords[x])

    def distance(self, i: int, j: int) -> float:
        if self._dist is not None:
            return float(self._dist[i, j])
        return float(_point_distances(self._coords[j : j + 1], self._coords[i])[0])

    def pair_distances(self, ids_a: np.ndarray, ids_b: np.ndarray) -> np.ndarray:
        """Elementwise distances d(a_k, b_k) for two equal-length id arrays."""
        ids_a = np.asarray(ids_a, dtype=np.intp)
        ids_b = np.asarray(ids_b, dtype=np.intp)
        if self._dist is not None:
            return self._dist[ids_a, ids_b]
        diff = self._coords[ids_a] - self._coords[ids_b]
        return np.sqrt(np.einsum("ij,ij->i", diff, diff))

    def require_admissible(self, r: float, kappa: float = DEFAULT_KAPPA) -> None:
        """Refuse radii the mesh cannot resolve (r < kappa * h)."""
        if not np.isfinite(r) or r <= 0.0:
            raise ValueError(f"radius must be positive, got {r!r}")
        if r < kappa * self._mesh:
            raise ValueError(
                f"radius {r:g} below admissibility floor {kappa:g} * h = "
                f"{kappa * self._mesh:g}"
            )

    def ball_ids(self, x: int, r: float) -> np.ndarray:
        """Sorted member ids of the open ball B(x, r).

        The tree only proposes candidates; membership is always decided by
        the canonical distance formula, so an O(n) scan gives the same set.
        """
        if self._dist is not None:
            return np.flatnonzero(self._dist[x] < r)
        cand = np.asarray(
            self._kdtree().query_ball_point(
                self._coords[x], r * (1.0 + 1e-12), return_sorted=True
            ),
            dtype=np.intp,
        )
        d = _point_distances(self._coords[cand], self._coords[x])
        return cand[d < r]

    def ball(self, x: int, r: float) -> Ball:
        """Open ball around point ``x`` with its members and mass."""
        if not (0 <= x < self.n):
            raise ValueError(f"center id {x} out of range")
        if not np.isfinite(r) or r <= 0.0:
            raise ValueError(f"radius must be positive, got {r!r}")
        ids = self.ball_ids(x, r)
        return Ball(int(x), float(r), ids, float(self._weights[ids].sum()))

    def ball_chunks(
        self,
        r: float,
        centers: np.ndarray | None = None,
        flat_budget: int = 4_000_000,
    ) -> Iterator[tuple[np.ndarray, np.ndarray, np.ndarray]]:
        """Stream ball memberships for many centres without holding them all.

        Yields ``(center_ids, flat_member_ids, counts)`` where the members of
        ``center_ids[i]`` occupy the i-th slice of ``flat_member_ids``.
        Centres are processed in ascending id order, so any reduction over
        the chunks is order-deterministic.
        """
        if centers is None:
            centers = np.arange(self.n, dtype=np.intp)
        else:
            centers = np.asarray(centers, dtype=np.intp)
        if centers.size == 0:
            return
        if self._dist is not None:
            block = max(1, int(flat_budget // max(1, self.n)))
            for lo in range(0, centers.size, block):
                sub = centers[lo : lo + block]
                hits = self._dist[sub] < r
                counts = hits.sum(axis=1)
                yield sub, np.flatnonzero(hits.ravel()) % self.n, counts
            return

        # Estimate the ball size from one centre to pick the block size.
        tree = self._kdtree()
        probe = len(tree.query_ball_point(self._coords[centers[0]], r))
        block = int(np.clip(flat_budget // max(1, probe), 16, 8192))
        r_query = r * (1.0 + 1e-12)
        for lo in range(0, centers.size, block):
            sub = centers[lo : lo + block]
            lists = tree.query_ball_point(
                self._coords[sub], r_query, workers=-1, return_sorted=True
            )
            counts = np.fromiter((len(l) for l in lists), dtype=np.intp, count=len(lists))
            if counts.sum() == 0:
                yield sub, np.empty(0, dtype=np.intp), counts
                continue
            flat = np.concatenate([np.asarray(l, dtype=np.intp) for l in lists])
            # Exact filter: candidate lists may include points at d in [r, r_query].
            rep = np.repeat(sub, counts)
            diff = self._coords[flat] - self._coords[rep]
            d = np.sqrt(np.einsum("ij,ij->i", diff, diff))
            keep = d < r
            if not np.all(keep):
                counts = segment_sums(keep.astype(float), counts).astype(np.intp)
                flat = flat[keep]
            yield sub, flat, counts

    def boundary_margin(self) -> np.ndarray:
        """Per-point distance to the coordinate bounding box (coords mode).

        Used to restrict doubling samples to interior centres; meaningless
        for abstract clouds, which raise.
        """
        if self._coords is None:
            raise ValueError("boundary margin needs coordinates")
        lo = self._coords.min(axis=0)
        hi = self._coords.max(axis=0)
        return np.minimum(self._coords - lo, hi - self._coords).min(axis=1)

    # ------------------------------------------------------------------
    # export
    # ------------------------------------------------------------------

    def to_csv(self, path: str | Path) -> None:
        """Write the cloud as CSV with columns id, x0..x{d-1}, weight."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            if self._coords is not None:
                header = ["id"] + [f"x{k}" for k in range(self.dim)] + ["weight"]
                writer.writerow(header)
                for i in range(self.n):
                    writer.writerow(
                        [i, *(repr(float(v)) for v in self._coords[i]), repr(float(self._weights[i]))]
                    )
            else:
                writer.writerow(["id", "weight"])
                for i in range(self.n):
                    writer.writerow([i, repr(float(self._weights[i]))])

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        kind = self.meta.get("kind", "custom")
        return (
            f"MeasuredPointCloud(n={self.n}, kind={kind!r}, h={self._mesh:.3g}, "
            f"abstract={self.is_abstract})"
        )


def ball_average(cloud: MeasuredPointCloud, values: np.ndarray, x: int, r: float) -> float:
    """Weighted mean of ``values`` over the open ball B(x, r)."""
    b = cloud.ball(x, r)
    if b.member_ids.size == 0:
        raise ValueError(f"ball B({x}, {r:g}) is empty")
    w = cloud.weights[b.member_ids]
    return float(np.dot(w, values[b.member_ids]) / b.mass)


# ----------------------------------------------------------------------
# model spaces
# ----------------------------------------------------------------------


def interval_grid(n: int) -> MeasuredPointCloud:
    """n equispaced points on [0, 1] with uniform weights summing to one."""
    if n < 2:
        raise ValueError("interval grid needs at least two points")
    coords = np.linspace(0.0, 1.0, n).reshape(-1, 1)
    return MeasuredPointCloud(
        np.full(n, 1.0 / n),
        coords=coords,
        mesh=1.0 / (n - 1),
        meta={"kind": "interval_grid", "n": n},
    )


def square_grid(n: int) -> MeasuredPointCloud:
    """n x n grid on the unit square with uniform weights summing to one."""
    if n < 2:
        raise ValueError("square grid needs at least two points per side")
    axis = np.linspace(0.0, 1.0, n)
    xx, yy = np.meshgrid(axis, axis, indexing="ij")
    coords = np.column_stack([xx.ravel(), yy.ravel()])
    return MeasuredPointCloud(
        np.full(n * n, 1.0 / (n * n)),
        coords=coords,
        mesh=1.0 / (n - 1),
        meta={"kind": "square_grid", "n": n},
    )


def gasket_graph(level: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vertices, cells, and edges of the level-m Sierpinski gasket graph.

    Vertices are returned as integer lattice pairs (a, b): the embedded point
    is ``(a + b/2, b*sqrt(3)/2) / 2**level``.  Cells are the 3**level upward
    triangles as vertex-id triples, edges the distinct cell sides.  Vertex
    ids follow the lexicographic order of (b, a), which fixes every
    downstream labelling.
    """
    if level < 0:
        raise ValueError("gasket level must be nonnegative")
    side = 2**level
    corners = ((0, 0), (side, 0), (0, side))
    cells = [corners]
    for _ in range(level):
        nxt = []
        for a, b, c in cells:
            ab = ((a[0] + b[0]) // 2, (a[1] + b[1]) // 2)
            ac = ((a[0] + c[0]) // 2, (a[1] + c[1]) // 2)
            bc = ((b[0] + c[0]) // 2, (b[1] + c[1]) // 2)
            nxt.extend([(a, ab, ac), (ab, b, bc), (ac, bc, c)])
        cells = nxt

    verts = sorted({v for cell in cells for v in cell}, key=lambda p: (p[1], p[0]))
    index = {v: i for i, v in enumerate(verts)}
    tri = np.array([[index[a], index[b], index[c]] for a, b, c in cells], dtype=np.intp)
    edge_set = set()
    for a, b, c in tri:
        for u, v in ((a, b), (a, c), (b, c)):
            edge_set.add((min(u, v), max(u, v)))
    edges = np.array(sorted(edge_set), dtype=np.intp)
    return np.array(verts, dtype=np.int64), tri, edges


def gasket_coords(int_coords: np.ndarray, level: int) -> np.ndarray:
    """Embed integer gasket lattice pairs into the plane."""
    scale = 1.0 / 2**level
    x = (int_coords[:, 0] + 0.5 * int_coords[:, 1]) * scale
    y = int_coords[:, 1] * (np.sqrt(3.0) / 2.0) * scale
    return np.column_stack([x, y])


def gasket(level: int) -> MeasuredPointCloud:
    """Level-m Sierpinski gasket vertex cloud, uniform weights, mesh 2**-m."""
    ints, _, _ = gasket_graph(level)
    coords = gasket_coords(ints, level)
    n = coords.shape[0]
    return MeasuredPointCloud(
        np.full(n, 1.0 / n),
        coords=coords,
        mesh=0.5**level,
        meta={"kind": "gasket", "level": level},
    )


def carpet(level: int) -> MeasuredPointCloud:
    """Level-m Sierpinski carpet: retained-cell centres, uniform weights."""
    if level < 0:
        raise ValueError("carpet level must be nonnegative")
    cells = [(0, 0)]
    for _ in range(level):
        nxt = []
        for cx, cy in cells:
            for dx in range(3):
                for dy in range(3):
                    if dx == 1 and dy == 1:
                        continue
                    nxt.append((3 * cx + dx, 3 * cy + dy))
        cells = nxt
    cells.sort()
    side = 3**level
    coords = (np.array(cells, dtype=float) + 0.5) / side
    n = coords.shape[0]
    return MeasuredPointCloud(
        np.full(n, 1.0 / n),
        coords=coords,
        mesh=1.0 / side if level > 0 else None,
        meta={"kind": "carpet", "level": level},
    )


def read_cloud_file(path: str | Path) -> MeasuredPointCloud:
    """Import a cloud from the plain-text exchange format.

    Line 1: ``<n> <mode>`` with mode ``euclidean`` or ``abstract``.  Then one
    line per point: coordinates (euclidean) or the point's distance-matrix
    row (abstract), followed by the point weight.
    """
    path = Path(path)
    try:
        raw = path.read_text()
    except OSError as exc:
        raise ValueError(f"cannot read cloud file {path}: {exc}") from exc
    lines = [ln for ln in raw.splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"cloud file {path} is empty")
    head = lines[0].split()
    if len(head) != 2:
        raise ValueError("header must be '<n> <mode>'")
    try:
        n = int(head[0])
    except ValueError as exc:
        raise ValueError(f"bad point count {head[0]!r}") from exc
    mode = head[1].lower()
    if n <= 0:
        raise ValueError("point count must be positive")
    if mode not in ("euclidean", "abstract"):
        raise ValueError(f"unknown mode {mode!r}")
    if len(lines) != n + 1:
        raise ValueError(f"expected {n} point lines, found {len(lines) - 1}")
    rows = []
    for ln in lines[1:]:
        try:
            rows.append([float(tok) for tok in ln.split()])
        except ValueError as exc:
            raise ValueError(f"non-numeric entry in line {ln!r}") from exc
    width = len(rows[0])
    if any(len(rw) != width for rw in rows):
        raise ValueError("ragged point lines")
    arr = np.array(rows, dtype=float)
    weights = arr[:, -1]
    body = arr[:, :-1]
    meta = {"kind": "file", "path": str(path)}
    if mode == "euclidean":
        if body.shape[1] == 0:
            raise ValueError("euclidean mode needs at least one coordinate")
        return MeasuredPointCloud(weights, coords=body, meta=meta)
    if body.shape != (n, n):
        raise ValueError("abstract mode needs an n x n distance matrix")
    return MeasuredPointCloud(weights, dist_matrix=body, meta=meta)


def build_cloud(spec: str | dict) -> MeasuredPointCloud:
    """Build a cloud from a descriptor.

    Accepts either a dict (``{"kind": "gasket", "level": 5}``) or the compact
    string form ``"gasket:5"`` / ``"interval_grid:2001"`` / ``"file:PATH"``.
    """
    if isinstance(spec, str):
        kind, _, arg = spec.partition(":")
        kind = kind.strip()
        if kind == "file":
            spec = {"kind": "file", "path": arg}
        else:
            if not arg:
                raise ValueError(f"descriptor {spec!r} is missing its size argument")
            try:
                num = int(arg)
            except ValueError as exc:
                raise ValueError(f"bad size in descriptor {spec!r}") from exc
            key = "level" if kind in ("gasket", "carpet") else "n"
            spec = {"kind": kind, key: num}
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ValueError(f"cannot interpret cloud descriptor {spec!r}")
    kind = spec["kind"]
    if kind == "interval_grid":
        return interval_grid(int(spec["n"]))
    if kind == "square_grid":
        return square_grid(int(spec["n"]))
    if kind == "gasket":
        return gasket(int(spec["level"]))
    if kind == "carpet":
        return carpet(int(spec["level"]))
    if kind == "file":
        return read_cloud_file(spec["path"])
    raise ValueError(f"unknown cloud kind {kind!r}")


# ----------------------------------------------------------------------
# doubling diagnostics
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class DoublingProfile:
    """Sampled volume-doubling behaviour of a cloud.

    ``samples`` has one row per (center, scale) pair with columns
    (center, r, mass_r, mass_2r, ratio).  ``c_d`` is the observed doubling
    constant, ``q_fit`` the mass-growth exponent from a through-origin
    log-log regression of cross-scale mass ratios, ``c_low`` the largest
    constant with ``mu(B(x, r)) >= c_low * r**q_fit`` on the samples.
    """

    centers: np.ndarray
    radii: np.ndarray
    mass_r: np.ndarray
    mass_2r: np.ndarray
    ratios: np.ndarray
    c_d: float
    q_fit: float
    c_low: float
    scales: np.ndarray
    seed: int
    meta: dict = field(default_factory=dict)

    def to_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["center", "r", "mass_r", "mass_2r", "ratio"])
            for row in zip(self.centers, self.radii, self.mass_r, self.mass_2r, self.ratios):
                writer.writerow([int(row[0]), *(repr(float(v)) for v in row[1:])])

    def summary(self) -> dict:
        return {
            "c_d": self.c_d,
            "q_fit": self.q_fit,
            "c_low": self.c_low,
            "n_samples": int(self.centers.size),
            "scales": [float(s) for s in self.scales],
            "seed": self.seed,
        }


def estimate_doubling(
    cloud: MeasuredPointCloud,
    n_samples: int,
    scales: Sequence[float],
    seed: int,
    kappa: float = DEFAULT_KAPPA,
    interior_only: bool = False,
) -> DoublingProfile:
    """Sample doubling ratios ``mu(B(x, 2r)) / mu(B(x, r))``.

    ``n_samples`` centres are drawn uniformly with replacement; each centre
    is paired with every admissible scale (kappa*h <= r <= diam/2).  With
    ``interior_only`` a (centre, r) pair is kept only when the doubled ball
    clears the coordinate bounding box, which removes boundary clipping from
    the ratios.

    Raises ``ValueError`` when no scale is admissible.
    """
    if n_samples <= 0:
        raise ValueError("n_samples must be positive")
    req = np.asarray(sorted(float(s) for s in scales))
    if req.size == 0:
        raise ValueError("no scales given")
    lo, hi = kappa * cloud.mesh, cloud.diameter / 2.0
    adm = req[(req >= lo) & (req <= hi)]
    if adm.size == 0:
        raise ValueError(
            f"no admissible scale in [{lo:g}, {hi:g}] among {req.tolist()}"
        )

    rng = np.random.default_rng(seed)
    centers = rng.integers(0, cloud.n, size=n_samples)
    margin = None
    if interior_only and not cloud.is_abstract:
        margin = cloud.boundary_margin()

    cols_c, cols_r, cols_m, cols_m2 = [], [], [], []
    for x in centers:
        d = cloud.distances_from(int(x))
        for r in adm:
            if margin is not None and margin[x] < 2.0 * r:
                continue
            cols_c.append(int(x))
            cols_r.append(float(r))
            cols_m.append(float(cloud.weights[d < r].sum()))
            cols_m2.append(float(cloud.weights[d < 2.0 * r].sum()))
    if not cols_c:
        raise ValueError("interior restriction removed every sample")

    mass_r = np.array(cols_m)
    mass_2r = np.array(cols_m2)
    ratios = mass_2r / mass_r
    radii = np.array(cols_r)
    centers_out = np.array(cols_c, dtype=np.intp)

    # Exponent fit: within each sampled centre, compare the mass at every
    # pair of resolved scales (the 2r masses included) and regress the log
    # ratios through the origin.
    xs, ys = [], []
    for x in np.unique(centers_out):
        sel = centers_out == x
        rr = np.concatenate([radii[sel], 2.0 * radii[sel]])
        mm = np.concatenate([mass_r[sel], mass_2r[sel]])
        order = np.argsort(rr)
        rr, mm = rr[order], mm[order]
        for i in range(rr.size):
            for j in range(i + 1, rr.size):
                if rr[j] > rr[i]:
                    xs.append(np.log(rr[j] / rr[i]))
                    ys.append(np.log(mm[j] / mm[i]))
    xs_a, ys_a = np.array(xs), np.array(ys)
    q_fit = float(np.dot(xs_a, ys_a) / np.dot(xs_a, xs_a)) if xs_a.size else 0.0
    c_low = float(np.min(mass_r / radii**q_fit))

    return DoublingProfile(
        centers=centers_out,
        radii=radii,
        mass_r=mass_r,
        mass_2r=mass_2r,
        ratios=ratios,
        c_d=float(ratios.max()),
        q_fit=q_fit,
        c_low=c_low,
        scales=adm,
        seed=seed,
        meta=dict(cloud.meta),
    )


@dataclass(frozen=True)
class MassBoundReport:
    """Outcome of a lower mass-bound check ``mu(B(x, r)) >= c r^Q``."""

    q: float
    worst_c: float
    holds: bool
    n_samples: int


def check_mass_bounds(profile: DoublingProfile, q: float, c_min: float = 0.0) -> MassBoundReport:
    """Largest feasible ``c`` for the bound ``mu(B(x, r)) >= c r^q``.

    Evaluated on the sampled (centre, r) pairs of ``profile``; ``holds`` is
    the comparison against ``c_min`` (default: mere positivity).
    """
    if not np.isfinite(q):
        raise ValueError("exponent q must be finite")
    ratios = profile.mass_r / profile.radii**q
    worst = float(ratios.min())
    return MassBoundReport(
        q=float(q), worst_c=worst, holds=bool(worst > c_min), n_samples=int(ratios.size)
    )
