"""Undirected graphs on a small vertex set, stored as adjacency bitmasks.

Vertex ``k`` corresponds to bit ``1 << k``. Sets of vertices are passed around
as integer masks throughout the package; :func:`bits` and :func:`mask_of`
convert between masks and index tuples.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Iterable, Sequence

from .errors import DomainError

__all__ = [
    "Graph",
    "PrimeDecomposition",
    "bits",
    "mask_of",
    "popcount",
    "mask_key",
    "is_decomposable",
    "is_connected",
    "cliques",
    "prime_decomposition",
    "graphical_neighbors",
    "decomposable_neighbors",
    "parse_graph",
]


def popcount(mask: int) -> int:
    return bin(mask).count("1")


def bits(mask: int) -> tuple[int, ...]:
    out = []
    k = 0
    while mask:
        if mask & 1:
            out.append(k)
        mask >>= 1
        k += 1
    return tuple(out)


def mask_of(indices: Iterable[int]) -> int:
    m = 0
    for k in indices:
        m |= 1 << k
    return m


def mask_key(mask: int):
    """Canonical sort key: by size, then lexicographically by vertex index."""
    return (popcount(mask), bits(mask))


def _lowest(mask: int) -> int:
    return (mask & -mask).bit_length() - 1


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph; ``adj[k]`` is the neighbour mask of vertex k."""

    names: tuple[str, ...]
    adj: tuple[int, ...] = field(default=())

    def __post_init__(self):
        names = tuple(self.names)
        adj = tuple(self.adj) or (0,) * len(names)
        if len(adj) != len(names):
            raise DomainError("adjacency does not match vertex count")
        full = (1 << len(names)) - 1
        for k, a in enumerate(adj):
            if a & (1 << k):
                raise DomainError(f"self-loop at {names[k]!r}")
            if a & ~full:
                raise DomainError("edge references unknown vertex")
            for j in bits(a):
                if not adj[j] & (1 << k):
                    raise DomainError("adjacency is not symmetric")
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "adj", adj)

    @classmethod
    def from_edges(cls, names: Sequence[str], edges: Iterable[tuple[int, int]]) -> "Graph":
        adj = [0] * len(names)
        for i, j in edges:
            if i == j:
                raise DomainError(f"self-loop at {names[i]!r}")
            if not (0 <= i < len(names) and 0 <= j < len(names)):
                raise DomainError("edge references unknown vertex")
            adj[i] |= 1 << j
            adj[j] |= 1 << i
        return cls(tuple(names), tuple(adj))

    @classmethod
    def complete(cls, names: Sequence[str]) -> "Graph":
        n = len(names)
        return cls.from_edges(names, combinations(range(n), 2))

    @property
    def n(self) -> int:
        return len(self.names)

    @property
    def vertices(self) -> int:
        return (1 << self.n) - 1

    @cached_property
    def edges(self) -> tuple[tuple[int, int], ...]:
        return tuple((i, j) for i in range(self.n) for j in bits(self.adj[i]) if j > i)

    @cached_property
    def key(self) -> int:
        """Integer encoding of the edge set (bit per vertex pair)."""
        key = 0
        for i, j in self.edges:
            key |= 1 << _pair_index(i, j, self.n)
        return key

    def has_edge(self, i: int, j: int) -> bool:
        return bool(self.adj[i] >> j & 1)

    def toggle(self, i: int, j: int) -> "Graph":
        adj = list(self.adj)
        adj[i] ^= 1 << j
        adj[j] ^= 1 << i
        return Graph(self.names, tuple(adj))

    def is_complete(self, mask: int) -> bool:
        return all((self.adj[v] | (1 << v)) & mask == mask for v in bits(mask))

    def induced(self, mask: int) -> "Graph":
        """Subgraph induced by ``mask``, with vertices relabelled 0..k-1."""
        keep = bits(mask)
        pos = {v: k for k, v in enumerate(keep)}
        edges = [(pos[i], pos[j]) for i, j in self.edges if i in pos and j in pos]
        return Graph.from_edges([self.names[v] for v in keep], edges)

    def __str__(self) -> str:
        parts = [f"{self.names[i]}-{self.names[j]}" for i, j in self.edges]
        isolated = [self.names[k] for k in range(self.n) if not self.adj[k]]
        text = ",".join(parts)
        if isolated:
            text += ";isolated:" + ",".join(isolated)
        return text


def _pair_index(i: int, j: int, n: int) -> int:
    if i > j:
        i, j = j, i
    return i * n + j


def parse_graph(text: str, names: Sequence[str] | None = None) -> Graph:
    """Parse ``a-b,b-c;isolated:d`` into a graph.

    Vertex order follows ``names`` when given, otherwise first appearance.
    """
    edge_part, _, iso_part = text.partition(";")
    iso = []
    if iso_part:
        tag, _, rest = iso_part.partition(":")
        if tag.strip() != "isolated":
            raise DomainError(f"unknown graph suffix {iso_part!r}")
        iso = [v.strip() for v in rest.split(",") if v.strip()]
    pairs = []
    for item in edge_part.split(","):
        item = item.strip()
        if not item:
            continue
        u, sep, v = item.partition("-")
        if not sep or not u.strip() or not v.strip():
            raise DomainError(f"bad edge {item!r}")
        pairs.append((u.strip(), v.strip()))
    if names is None:
        order = []
        for u, v in pairs:
            for w in (u, v):
                if w not in order:
                    order.append(w)
        order += [w for w in iso if w not in order]
        names = order
    names = tuple(names)
    index = {w: k for k, w in enumerate(names)}
    for w in iso:
        if w not in index:
            raise DomainError(f"unknown vertex {w!r}")
    try:
        edges = [(index[u], index[v]) for u, v in pairs]
    except KeyError as exc:
        raise DomainError(f"unknown vertex {exc.args[0]!r}") from None
    return Graph.from_edges(names, edges)


def mcs_order(g: Graph, mask: int | None = None) -> list[int]:
    """Maximum cardinality search ordering of the vertices in ``mask``."""
    mask = g.vertices if mask is None else mask
    order = []
    visited = 0
    remaining = mask
    while remaining:
        best, best_w = -1, -1
        for v in bits(remaining):
            w = popcount(g.adj[v] & visited)
            if w > best_w:
                best, best_w = v, w
        order.append(best)
        visited |= 1 << best
        remaining &= ~(1 << best)
    return order


def is_decomposable(g: Graph, mask: int | None = None) -> bool:
    """Chordality test: MCS order followed by the zero fill-in check."""
    order = mcs_order(g, mask)
    visited = 0
    last_seen = {}
    for step, v in enumerate(order):
        earlier = g.adj[v] & visited
        if earlier:
            parent = max(bits(earlier), key=last_seen.__getitem__)
            rest = earlier & ~(1 << parent)
            if rest & ~g.adj[parent]:
                return False
        visited |= 1 << v
        last_seen[v] = step
    return True


def components(g: Graph, mask: int | None = None) -> list[int]:
    """Connected components of the subgraph induced by ``mask``."""
    mask = g.vertices if mask is None else mask
    out = []
    remaining = mask
    while remaining:
        seed = remaining & -remaining
        comp = seed
        frontier = seed
        while frontier:
            v = _lowest(frontier)
            frontier &= frontier - 1
            new = g.adj[v] & mask & ~comp
            comp |= new
            frontier |= new
        out.append(comp)
        remaining &= ~comp
    return out


def is_connected(g: Graph, mask: int | None = None) -> bool:
    mask = g.vertices if mask is None else mask
    return mask != 0 and len(components(g, mask)) == 1


def _bron_kerbosch(g: Graph, r: int, p: int, x: int, out: list[int]) -> None:
    if not p and not x:
        out.append(r)
        return
    pivot_pool = p | x
    pivot = max(bits(pivot_pool), key=lambda u: popcount(p & g.adj[u]))
    for v in bits(p & ~g.adj[pivot]):
        bit = 1 << v
        _bron_kerbosch(g, r | bit, p & g.adj[v], x & g.adj[v], out)
        p &= ~bit
        x |= bit


def cliques(g: Graph, mask: int | None = None) -> list[int]:
    """Maximal complete subsets (as masks), canonically sorted."""
    mask = g.vertices if mask is None else mask
    if not mask:
        return []
    sub = Graph(g.names, tuple(a & mask if (mask >> k) & 1 else 0 for k, a in enumerate(g.adj)))
    out: list[int] = []
    _bron_kerbosch(sub, 0, mask, 0, out)
    return sorted(out, key=mask_key)


def complete_subsets(g: Graph, mask: int | None = None) -> list[int]:
    """All nonempty complete subsets, canonically sorted."""
    seen = set()
    for c in cliques(g, mask):
        sub = c
        while sub:
            seen.add(sub)
            sub = (sub - 1) & c
    return sorted(seen, key=mask_key)


@dataclass(frozen=True)
class PrimeDecomposition:
    """Perfect sequence of prime components.

    ``separators[l]`` and ``residuals[l]`` belong to ``components[l]``;
    index 0 has an empty separator and residual equal to the component.
    """

    components: tuple[int, ...]
    separators: tuple[int, ...]
    complete: tuple[bool, ...]

    @property
    def residuals(self) -> tuple[int, ...]:
        return tuple(p & ~s for p, s in zip(self.components, self.separators))

    def __len__(self) -> int:
        return len(self.components)


def _complete_separator(g: Graph, mask: int) -> int | None:
    """A smallest complete vertex set whose removal disconnects G[mask]."""
    candidates = complete_subsets(g, mask)
    for s in sorted(candidates, key=mask_key):
        rest = mask & ~s
        if rest and len(components(g, rest)) > 1:
            return s
    return None


def _atoms(g: Graph, mask: int) -> list[int]:
    """Vertex sets of the pieces left by recursive splitting at complete separators."""
    comps = components(g, mask)
    if len(comps) > 1:
        out = []
        for c in comps:
            out.extend(_atoms(g, c))
        return out
    if is_decomposable(g, mask):
        return cliques(g, mask)
    sep = _complete_separator(g, mask)
    if sep is None:
        return [mask]
    out = []
    for c in components(g, mask & ~sep):
        out.extend(_atoms(g, c | sep))
    return out


def prime_decomposition(g: Graph) -> PrimeDecomposition:
    """Maximal prime subgraphs of ``g`` arranged in a perfect sequence.

    Pieces are joined by a maximum-weight spanning forest of the
    intersection graph (a junction tree of the prime components); the
    sequence is a breadth-first traversal, connected components taken in
    order of their smallest vertex.
    """
    if g.n == 0:
        return PrimeDecomposition((), (), ())
    atoms = set(_atoms(g, g.vertices))
    primes = sorted((a for a in atoms if not any(a != b and a & b == a for b in atoms)),
                    key=lambda m: (_lowest(m), mask_key(m)))
    k = len(primes)
    # Kruskal on intersection sizes; zero-weight edges only link across
    # connected components and are added afterwards in vertex order.
    parent = list(range(k))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    weighted = sorted(
        ((popcount(primes[i] & primes[j]), i, j) for i in range(k) for j in range(i + 1, k)
         if primes[i] & primes[j]),
        key=lambda t: (-t[0], t[1], t[2]))
    tree = {i: [] for i in range(k)}
    for _, i, j in weighted:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
            tree[i].append(j)
            tree[j].append(i)

    order, seps = [], []
    placed = set()
    covered = 0
    for root in range(k):
        if root in placed:
            continue
        queue = [root]
        placed.add(root)
        while queue:
            node = queue.pop(0)
            order.append(primes[node])
            seps.append(primes[node] & covered)
            covered |= primes[node]
            for nb in sorted(tree[node], key=lambda t: (_lowest(primes[t]), mask_key(primes[t]))):
                if nb not in placed:
                    placed.add(nb)
                    queue.append(nb)
    return PrimeDecomposition(tuple(order), tuple(seps), tuple(g.is_complete(p) for p in order))


def graphical_neighbors(g: Graph) -> list[Graph]:
    """Every single-edge toggle of ``g``."""
    return [g.toggle(i, j) for i, j in combinations(range(g.n), 2)]


def decomposable_neighbors(g: Graph) -> list[Graph]:
    """Single-edge toggles of a chordal graph that leave it chordal."""
    if not is_decomposable(g):
        raise DomainError("graph is not decomposable")
    return [h for h in graphical_neighbors(g) if is_decomposable(h)]
