"""Graphs, normalized adjacency, distance-pair sampling, and hyperbolicity.

Undirected simple graphs at desk scale. The normalized adjacency is kept
dense; Gromov delta uses exact four-point enumeration (O(n^4), intended for
n up to a few hundred).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Graph",
    "normalized_adjacency",
    "matrix_power",
    "adjacency_power_entry",
    "pairs_at_distance",
    "bfs_distances",
    "all_pairs_distances",
    "gromov_delta",
    "generate",
    "load_edge_list",
    "save_edge_list",
]


@dataclass(frozen=True)
class Graph:
    """Undirected graph on nodes 0..n-1 with a canonical sorted edge set.

    Self-loops are never stored; normalization adds them.
    """

    n: int
    edges: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("graph needs at least one node")
        canon = set()
        for u, v in self.edges:
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"edge ({u}, {v}) out of range for n={self.n}")
            if u == v:
                continue
            canon.add((min(u, v), max(u, v)))
        object.__setattr__(self, "edges", tuple(sorted(canon)))

    @property
    def m(self):
        return len(self.edges)

    def degrees(self):
        deg = np.zeros(self.n, dtype=int)
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    def adjacency(self):
        a = np.zeros((self.n, self.n))
        for u, v in self.edges:
            a[u, v] = 1.0
            a[v, u] = 1.0
        return a

    def neighbors(self, u):
        out = []
        for a, b in self.edges:
            if a == u:
                out.append(b)
            elif b == u:
                out.append(a)
        return sorted(out)

    def is_connected(self):
        return not np.any(np.isinf(bfs_distances(self, 0)))


def normalized_adjacency(g: Graph) -> np.ndarray:
    """A_hat = D^{-1/2} (A + I) D^{-1/2} with degrees counting the self-loop."""
    a = g.adjacency() + np.eye(g.n)
    d = g.degrees() + 1.0
    inv_sqrt = 1.0 / np.sqrt(d)
    return inv_sqrt[:, None] * a * inv_sqrt[None, :]


def matrix_power(a: np.ndarray, ell: int) -> np.ndarray:
    """ell-fold matrix product by repeated multiplication (exact, no eig)."""
    if ell < 0:
        raise ValueError("power must be nonnegative")
    out = np.eye(a.shape[0])
    for _ in range(ell):
        out = out @ a
    return out


def adjacency_power_entry(a: np.ndarray, ell: int, i: int, j: int) -> float:
    return float(matrix_power(a, ell)[i, j])


def bfs_distances(g: Graph, source: int) -> np.ndarray:
    adj = [[] for _ in range(g.n)]
    for u, v in g.edges:
        adj[u].append(v)
        adj[v].append(u)
    dist = np.full(g.n, np.inf)
    dist[source] = 0
    frontier = [source]
    d = 0
    while frontier:
        d += 1
        nxt = []
        for u in frontier:
            for w in adj[u]:
                if np.isinf(dist[w]):
                    dist[w] = d
                    nxt.append(w)
        frontier = nxt
    return dist


def all_pairs_distances(g: Graph) -> np.ndarray:
    return np.stack([bfs_distances(g, s) for s in range(g.n)])


def pairs_at_distance(g: Graph, d: int, count: int, seed: int):
    """Uniform sample without replacement of node pairs at exact distance d.

    Returns all such pairs (sorted) when fewer than ``count`` exist; raises
    when none do. Deterministic for a given seed.
    """
    if d < 1:
        raise ValueError("distance must be >= 1")
    if count < 1:
        raise ValueError("count must be >= 1")
    dist = all_pairs_distances(g)
    ii, jj = np.where(np.triu(dist == d, k=1))
    pairs = list(zip(ii.tolist(), jj.tolist()))
    if not pairs:
        raise ValueError(f"no node pair at distance {d}")
    if len(pairs) <= count:
        return pairs
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(pairs), size=count, replace=False)
    return sorted(pairs[k] for k in idx)


def gromov_delta(g: Graph) -> float:
    """Four-point-condition delta: max over quadruples of (M1 - M2)/2.

    M1 >= M2 are the two largest of the three pairwise distance sums. Exact
    enumeration over all quadruples, vectorized per node pair.
    """
    dist = all_pairs_distances(g)
    if np.any(np.isinf(dist)):
        raise ValueError("gromov_delta requires a connected graph")
    n = g.n
    iu, ju = np.triu_indices(n, k=1)
    best = 0.0
    # for fixed (i, j), sweep all (k, l) pairs at once
    for i in range(n):
        for j in range(i + 1, n):
            s1 = dist[i, j] + dist[iu, ju]
            s2 = dist[i, iu] + dist[j, ju]
            s3 = dist[i, ju] + dist[j, iu]
            stack = np.stack([s1, s2, s3])
            top = np.max(stack, axis=0)
            mid = np.sum(stack, axis=0) - top - np.min(stack, axis=0)
            cand = np.max(top - mid)
            if cand > 2 * best:
                best = cand / 2.0
    return float(best)


def _prufer_tree(n: int, seed: int) -> list:
    """Uniform random labeled tree via Prufer-sequence decoding."""
    if n == 1:
        return []
    if n == 2:
        return [(0, 1)]
    rng = np.random.default_rng(seed)
    seq = rng.integers(0, n, size=n - 2)
    degree = np.ones(n, dtype=int)
    for s in seq:
        degree[s] += 1
    edges = []
    import heapq

    leaves = [i for i in range(n) if degree[i] == 1]
    heapq.heapify(leaves)
    for s in seq:
        leaf = heapq.heappop(leaves)
        edges.append((leaf, int(s)))
        degree[s] -= 1
        if degree[s] == 1:
            heapq.heappush(leaves, int(s))
    u = heapq.heappop(leaves)
    v = heapq.heappop(leaves)
    edges.append((u, v))
    return edges


def generate(kind: str, **params) -> Graph:
    """Deterministic graph generators.

    Kinds: binary_tree(depth), rary_tree(r, depth), path(n), cycle(n),
    ring_of_cliques(c, k), random_tree(n, seed).
    """
    def need(name):
        if name not in params:
            raise ValueError(f"generator '{kind}' requires parameter '{name}'")
        val = int(params[name])
        return val

    if kind == "binary_tree":
        return generate("rary_tree", r=2, depth=need("depth"))
    if kind == "rary_tree":
        r, depth = need("r"), need("depth")
        if r < 1 or depth < 0:
            raise ValueError("rary_tree parameters must be positive")
        n = sum(r**k for k in range(depth + 1))
        edges = []
        for i in range(n):
            for c in range(1, r + 1):
                child = r * i + c
                if child < n:
                    edges.append((i, child))
        return Graph(n, tuple(edges))
    if kind == "path":
        n = need("n")
        if n < 1:
            raise ValueError("path needs n >= 1")
        return Graph(n, tuple((i, i + 1) for i in range(n - 1)))
    if kind == "cycle":
        n = need("n")
        if n < 3:
            raise ValueError("cycle needs n >= 3")
        return Graph(n, tuple((i, (i + 1) % n) for i in range(n)))
    if kind == "ring_of_cliques":
        c, k = need("c"), need("k")
        if c < 1 or k < 2:
            raise ValueError("ring_of_cliques needs c >= 1 cliques of size k >= 2")
        edges = []
        for q in range(c):
            base = q * k
            for a in range(k):
                for b in range(a + 1, k):
                    edges.append((base + a, base + b))
        if c >= 2:
            for q in range(c):
                edges.append((q * k + k - 1, ((q + 1) % c) * k))
        return Graph(c * k, tuple(edges))
    if kind == "random_tree":
        n = need("n")
        if n < 1:
            raise ValueError("random_tree needs n >= 1")
        seed = need("seed")
        return Graph(n, tuple(_prufer_tree(n, seed)))
    raise ValueError(f"unknown generator kind '{kind}'")


def load_edge_list(path) -> Graph:
    """Read whitespace-separated "u v" integer lines; '#' starts a comment.

    Duplicate edges and self-loops are dropped; node ids are compacted onto
    [0, n) in sorted order of the original ids.
    """
    raw_edges = []
    ids = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            parts = body.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'u v', got {line.strip()!r}")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise ValueError(
                    f"{path}:{lineno}: non-integer node id in {line.strip()!r}"
                ) from None
            if u < 0 or v < 0:
                raise ValueError(f"{path}:{lineno}: negative node id")
            ids.update((u, v))
            if u != v:
                raw_edges.append((u, v))
    if not ids:
        raise ValueError(f"{path}: no nodes found")
    remap = {orig: new for new, orig in enumerate(sorted(ids))}
    edges = tuple((remap[u], remap[v]) for u, v in raw_edges)
    return Graph(len(remap), edges)


def save_edge_list(g: Graph, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# nodes {g.n}\n")
        for u, v in g.edges:
            fh.write(f"{u} {v}\n")
