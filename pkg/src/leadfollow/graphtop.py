"""Leader-rooted directed graphs and their structure matrices.

Node 0 is the leader; followers are numbered ``1..N``. An edge ``(j, i)``
means follower ``j`` sends to follower ``i``. Leader links are stored
separately as the set of followers that hear node 0.

All graphs carry weights. An unweighted graph is just one whose weights
are all 1, so the weighted union used for joint connectivity and the plain
structure matrices share one code path.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .matrixkit import EIG_TOL, Matrix, as_square, eigenvalues

__all__ = [
    "LeaderGraph",
    "StructureMatrices",
    "GershgorinDisc",
    "structure_matrices",
    "union",
    "is_connected",
    "jointly_connected",
    "unreachable",
    "gershgorin_discs",
    "in_gershgorin_union",
    "min_real_eig",
    "random_jointly_connected",
    "random_graph",
]

WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class LeaderGraph:
    """Directed graph on ``{0, 1, ..., N}`` with node 0 as the leader.

    ``edges`` maps ``(j, i)`` to a positive weight and ``leader_links``
    maps follower ``i`` to the weight of the link ``0 -> i``.
    """

    n_followers: int
    edges: Mapping[tuple[int, int], float] = field(default_factory=dict)
    leader_links: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        n = self.n_followers
        if not isinstance(n, (int, np.integer)) or n < 1:
            raise ValueError(f"n_followers must be a positive integer, got {n!r}")
        edges = {}
        for (j, i), w in dict(self.edges).items():
            j, i = int(j), int(i)
            if i == 0:
                raise ValueError("the leader (node 0) never receives an edge")
            if j == i:
                raise ValueError(f"self-loop on node {i}")
            if not (1 <= j <= n and 1 <= i <= n):
                raise ValueError(f"edge ({j}, {i}) outside followers 1..{n}")
            edges[(j, i)] = _check_weight(w, f"edge ({j}, {i})")
        links = {}
        for i, w in dict(self.leader_links).items():
            i = int(i)
            if not 1 <= i <= n:
                raise ValueError(f"leader link to {i} outside followers 1..{n}")
            links[i] = _check_weight(w, f"leader link to {i}")
        object.__setattr__(self, "n_followers", int(n))
        object.__setattr__(self, "edges", dict(sorted(edges.items())))
        object.__setattr__(self, "leader_links", dict(sorted(links.items())))

    @classmethod
    def from_lists(
        cls,
        n_followers: int,
        edges: Iterable[Sequence[float]] = (),
        leader_links: Iterable[int | Sequence[float]] = (),
    ) -> "LeaderGraph":
        """Build from ``[[j, i, weight?], ...]`` and ``[[i, weight?], ...]``.

        Leader links may also be given as bare follower indices.
        """
        e = {}
        for item in edges:
            item = list(item)
            if len(item) not in (2, 3):
                raise ValueError(f"edge entry must be [j, i] or [j, i, w], got {item}")
            w = item[2] if len(item) == 3 else 1.0
            e[(_as_index(item[0]), _as_index(item[1]))] = w
        d = {}
        for item in leader_links:
            if isinstance(item, (int, np.integer)):
                d[int(item)] = 1.0
                continue
            item = list(item)
            if len(item) not in (1, 2):
                raise ValueError(f"leader link entry must be [i] or [i, w], got {item}")
            d[_as_index(item[0])] = item[1] if len(item) == 2 else 1.0
        return cls(n_followers, e, d)

    @classmethod
    def from_dict(cls, obj: Mapping) -> "LeaderGraph":
        try:
            n = obj["n_followers"]
        except (KeyError, TypeError):
            raise ValueError("graph object needs 'n_followers'") from None
        return cls.from_lists(n, obj.get("edges", ()), obj.get("leader_links", ()))

    def to_dict(self) -> dict:
        return {
            "n_followers": self.n_followers,
            "edges": [[j, i, w] for (j, i), w in self.edges.items()],
            "leader_links": [[i, w] for i, w in self.leader_links.items()],
        }

    def scaled(self, k: float) -> "LeaderGraph":
        """The graph ``k * G``: every existing weight multiplied by ``k``."""
        k = _check_weight(k, "scale")
        return LeaderGraph(
            self.n_followers,
            {e: k * w for e, w in self.edges.items()},
            {i: k * w for i, w in self.leader_links.items()},
        )

    def __eq__(self, other):
        if not isinstance(other, LeaderGraph):
            return NotImplemented
        return (
            self.n_followers == other.n_followers
            and _weights_close(self.edges, other.edges)
            and _weights_close(self.leader_links, other.leader_links)
        )

    def __hash__(self):
        return hash((self.n_followers, tuple(self.edges), tuple(self.leader_links)))

    @property
    def h(self) -> Matrix:
        return structure_matrices(self).h


def _as_index(v) -> int:
    if isinstance(v, bool) or float(v) != int(v):
        raise ValueError(f"node index must be an integer, got {v!r}")
    return int(v)


def _check_weight(w, what: str) -> float:
    w = float(w)
    if not np.isfinite(w) or w <= 0:
        raise ValueError(f"{what}: weight must be positive and finite, got {w}")
    return w


def _weights_close(a: Mapping, b: Mapping) -> bool:
    if a.keys() != b.keys():
        return False
    return all(abs(a[k] - b[k]) <= WEIGHT_TOL for k in a)


@dataclass(frozen=True)
class StructureMatrices:
    adjacency: Matrix
    in_degree: Matrix
    laplacian: Matrix
    leader_diag: Matrix
    h: Matrix


def structure_matrices(g: LeaderGraph) -> StructureMatrices:
    """Adjacency, in-degree, Laplacian, leader-link diagonal and ``H = L + D``.

    ``adjacency[i-1, j-1]`` holds the weight of edge ``(j, i)``.
    """
    n = g.n_followers
    adj = np.zeros((n, n))
    for (j, i), w in g.edges.items():
        adj[i - 1, j - 1] = w
    deg = np.diag(adj.sum(axis=1))
    lap = deg - adj
    d = np.zeros((n, n))
    for i, w in g.leader_links.items():
        d[i - 1, i - 1] = w
    h = lap + d
    for arr in (adj, deg, lap, d, h):
        arr.setflags(write=False)
    return StructureMatrices(adj, deg, lap, d, h)


def union(gs: Sequence[LeaderGraph], scales: Sequence[float] | None = None) -> LeaderGraph:
    """Weighted union: each edge weight is the scale-weighted sum over ``gs``.

    The union's ``H`` is ``sum(scale_i * H_i)``.
    """
    gs = list(gs)
    if not gs:
        raise ValueError("union of an empty collection")
    n = _shared_n(gs)
    if scales is None:
        scales = [1.0] * len(gs)
    if len(scales) != len(gs):
        raise ValueError(f"{len(scales)} scales for {len(gs)} graphs")
    edges: dict[tuple[int, int], float] = {}
    links: dict[int, float] = {}
    for g, s in zip(gs, scales):
        s = _check_weight(s, "scale")
        for e, w in g.edges.items():
            edges[e] = edges.get(e, 0.0) + s * w
        for i, w in g.leader_links.items():
            links[i] = links.get(i, 0.0) + s * w
    return LeaderGraph(n, edges, links)


def _shared_n(gs: Sequence[LeaderGraph]) -> int:
    ns = {g.n_followers for g in gs}
    if len(ns) != 1:
        raise ValueError(f"graphs disagree on the number of followers: {sorted(ns)}")
    return ns.pop()


def unreachable(g: LeaderGraph) -> list[int]:
    """Followers not reachable from node 0, by breadth-first search."""
    succ: dict[int, list[int]] = {}
    for j, i in g.edges:
        succ.setdefault(j, []).append(i)
    seen = set(g.leader_links)
    queue = deque(sorted(seen))
    while queue:
        j = queue.popleft()
        for i in succ.get(j, ()):
            if i not in seen:
                seen.add(i)
                queue.append(i)
    return [i for i in range(1, g.n_followers + 1) if i not in seen]


def is_connected(g: LeaderGraph) -> bool:
    """True iff node 0 reaches every follower."""
    return not unreachable(g)


def jointly_connected(gs: Sequence[LeaderGraph]) -> bool:
    return is_connected(union(gs))


@dataclass(frozen=True)
class GershgorinDisc:
    center: complex
    radius: float

    def contains(self, z: complex, tol: float = 0.0) -> bool:
        return abs(z - self.center) <= self.radius + tol


def gershgorin_discs(m) -> list[GershgorinDisc]:
    """One disc per row: centre ``m[i, i]``, radius the off-diagonal abs row sum."""
    m = as_square(m)
    absm = np.abs(m)
    radii = absm.sum(axis=1) - np.diag(absm)
    return [GershgorinDisc(complex(m[i, i]), float(r)) for i, r in enumerate(radii)]


def in_gershgorin_union(m, tol: float = EIG_TOL) -> bool:
    """Check every eigenvalue of ``m`` lies within ``tol`` of its disc union."""
    discs = gershgorin_discs(m)
    return all(any(d.contains(z, tol) for d in discs) for z in eigenvalues(m))


def min_real_eig(h) -> float:
    """Least real part over the eigenvalues of ``h``."""
    return eigenvalues(h).min_real


def random_graph(
    rng: np.random.Generator,
    n_followers: int,
    edge_prob: float = 0.2,
    leader_prob: float = 0.2,
) -> LeaderGraph:
    """Erdos-Renyi style directed leader graph, possibly disconnected."""
    n = n_followers
    edges = {
        (j, i): 1.0
        for j in range(1, n + 1)
        for i in range(1, n + 1)
        if j != i and rng.random() < edge_prob
    }
    links = {i: 1.0 for i in range(1, n + 1) if rng.random() < leader_prob}
    return LeaderGraph(n, edges, links)


def random_jointly_connected(
    rng: np.random.Generator,
    n_followers: int,
    m: int,
    edge_prob: float = 0.1,
    leader_prob: float = 0.1,
) -> list[LeaderGraph]:
    """``m`` graphs whose union is connected from node 0.

    A random spanning arborescence rooted at node 0 is drawn first and its
    edges are dealt out at random among the ``m`` graphs; random extra
    edges are then sprinkled on top. Individual graphs are usually
    disconnected.
    """
    n = n_followers
    order = rng.permutation(np.arange(1, n + 1))
    edge_sets: list[dict] = [dict() for _ in range(m)]
    link_sets: list[dict] = [dict() for _ in range(m)]
    placed = [0]
    for i in order:
        parent = int(rng.choice(placed))
        k = int(rng.integers(m))
        if parent == 0:
            link_sets[k][int(i)] = 1.0
        else:
            edge_sets[k][(parent, int(i))] = 1.0
        placed.append(int(i))
    for k in range(m):
        extra = random_graph(rng, n, edge_prob, leader_prob)
        edge_sets[k].update(extra.edges)
        link_sets[k].update(extra.leader_links)
    return [LeaderGraph(n, e, d) for e, d in zip(edge_sets, link_sets)]
