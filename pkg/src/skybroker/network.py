"""Skyway network graph, region grid, per-company density heatmaps, dataset ingestion.

Networks are immutable after construction and safe to share across parallel
per-provider compositions.
"""

from __future__ import annotations

import heapq
import json
import math
import random
import warnings
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

from .config import ConfigurationError

LENGTH_RTOL = 1e-6


class ParseError(ValueError):
    pass


@dataclass(frozen=True)
class SkywayNode:
    node_id: int
    x: float  # projected meters
    y: float
    station_owner: int  # charging provider owning the rooftop station
    pad_count: int

    def __post_init__(self) -> None:
        if self.pad_count < 1:
            raise ValueError(f"node {self.node_id}: pad_count must be at least 1")


@dataclass(frozen=True)
class SkywaySegment:
    a: int
    b: int
    length: float  # meters

    def __post_init__(self) -> None:
        if self.a == self.b:
            raise ValueError(f"segment endpoints must differ (node {self.a})")
        if self.length <= 0:
            raise ValueError(f"segment ({self.a}, {self.b}): length must be positive")


class SkywayNetwork:
    """Undirected geometric graph of charging-station rooftops and line-of-sight segments."""

    def __init__(self, nodes: Iterable[SkywayNode], segments: Iterable[SkywaySegment]):
        self.nodes: dict[int, SkywayNode] = {}
        for node in nodes:
            if node.node_id in self.nodes:
                raise ValueError(f"duplicate node id {node.node_id}")
            self.nodes[node.node_id] = node
        if not self.nodes:
            raise ValueError("network must contain at least one node")

        lengths: dict[tuple[int, int], float] = {}
        for seg in segments:
            a, b = min(seg.a, seg.b), max(seg.a, seg.b)
            for end in (a, b):
                if end not in self.nodes:
                    raise ValueError(f"segment references unknown node {end}")
            na, nb = self.nodes[a], self.nodes[b]
            euclid = math.hypot(na.x - nb.x, na.y - nb.y)
            if not math.isclose(seg.length, euclid, rel_tol=LENGTH_RTOL, abs_tol=1e-9):
                raise ValueError(
                    f"segment ({a}, {b}): length {seg.length} does not match "
                    f"the euclidean node distance {euclid}"
                )
            if lengths.setdefault((a, b), seg.length) != seg.length:
                raise ValueError(f"conflicting duplicate segment ({a}, {b})")

        self.segments: tuple[SkywaySegment, ...] = tuple(
            SkywaySegment(a, b, lengths[(a, b)]) for a, b in sorted(lengths)
        )
        adjacency: dict[int, list[tuple[int, float]]] = {nid: [] for nid in self.nodes}
        for seg in self.segments:
            adjacency[seg.a].append((seg.b, seg.length))
            adjacency[seg.b].append((seg.a, seg.length))
        self._adjacency = {nid: tuple(sorted(nbrs)) for nid, nbrs in adjacency.items()}
        self.charging_providers: tuple[int, ...] = tuple(
            sorted({n.station_owner for n in self.nodes.values()})
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SkywayNetwork):
            return NotImplemented
        return self.nodes == other.nodes and self.segments == other.segments

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def node(self, node_id: int) -> SkywayNode:
        return self.nodes[node_id]

    def neighbors(self, node_id: int) -> tuple[tuple[int, float], ...]:
        return self._adjacency[node_id]

    def length(self, a: int, b: int) -> float:
        for nbr, length in self._adjacency[a]:
            if nbr == b:
                return length
        raise ValueError(f"no segment between {a} and {b}")

    def heading(self, a: int, b: int) -> float:
        """Flight heading in radians when traversing the segment from a to b."""
        na, nb = self.nodes[a], self.nodes[b]
        return math.atan2(nb.y - na.y, nb.x - na.x)

    def components(self) -> list[set[int]]:
        seen: set[int] = set()
        comps = []
        for start in sorted(self.nodes):
            if start in seen:
                continue
            comp = {start}
            frontier = [start]
            while frontier:
                v = frontier.pop()
                for nbr, _ in self._adjacency[v]:
                    if nbr not in comp:
                        comp.add(nbr)
                        frontier.append(nbr)
            seen |= comp
            comps.append(comp)
        return comps

    def is_connected(self) -> bool:
        return len(self.components()) == 1


def _parse_fields(line: str, line_no: int, n_fields: int, what: str) -> list[str]:
    parts = line.split()
    if len(parts) != n_fields:
        raise ParseError(f"{what} line {line_no}: expected {n_fields} fields, got {len(parts)}: {line!r}")
    return parts


def _iter_lines(stream: Iterable[str]) -> Iterator[tuple[int, str]]:
    for line_no, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield line_no, line


def load_network(
    edge_list: Iterable[str],
    coords: Iterable[str],
    stations: Iterable[str],
) -> SkywayNetwork:
    """Build a network from the three text inputs.

    Formats, one record per line, whitespace separated:
      coords     "node_id x y"                       (projected meters)
      stations   "node_id charging_provider_id pad_count"
      edge list  "node_a node_b"                     (lengths derived from coords)

    Disconnected inputs keep the largest connected component with a warning.
    """
    positions: dict[int, tuple[float, float]] = {}
    for line_no, line in _iter_lines(coords):
        parts = _parse_fields(line, line_no, 3, "coords")
        try:
            nid, x, y = int(parts[0]), float(parts[1]), float(parts[2])
        except ValueError as exc:
            raise ParseError(f"coords line {line_no}: {exc}") from None
        if nid in positions:
            raise ParseError(f"coords line {line_no}: duplicate node {nid}")
        positions[nid] = (x, y)
    if not positions:
        raise ParseError("empty network: no coordinates given")

    station_info: dict[int, tuple[int, int]] = {}
    for line_no, line in _iter_lines(stations):
        parts = _parse_fields(line, line_no, 3, "stations")
        try:
            nid, owner, pads = int(parts[0]), int(parts[1]), int(parts[2])
        except ValueError as exc:
            raise ParseError(f"stations line {line_no}: {exc}") from None
        if nid not in positions:
            raise ParseError(f"stations line {line_no}: node {nid} has no coordinates")
        if nid in station_info:
            raise ParseError(f"stations line {line_no}: duplicate station record for node {nid}")
        station_info[nid] = (owner, pads)
    missing = sorted(set(positions) - set(station_info))
    if missing:
        raise ParseError(f"node {missing[0]} has no station record")

    edges: list[tuple[int, int]] = []
    for line_no, line in _iter_lines(edge_list):
        parts = _parse_fields(line, line_no, 2, "edge list")
        try:
            a, b = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise ParseError(f"edge list line {line_no}: {exc}") from None
        for end in (a, b):
            if end not in positions:
                raise ParseError(f"edge list line {line_no}: node {end} has no coordinates")
        if a == b:
            raise ParseError(f"edge list line {line_no}: self-loop on node {a}")
        edges.append((a, b))

    nodes = [
        SkywayNode(nid, positions[nid][0], positions[nid][1], *station_info[nid])
        for nid in sorted(positions)
    ]
    segments = []
    for a, b in edges:
        (xa, ya), (xb, yb) = positions[a], positions[b]
        length = math.hypot(xa - xb, ya - yb)
        if length <= 0:
            raise ParseError(f"edge ({a}, {b}) connects coincident coordinates")
        segments.append(SkywaySegment(a, b, length))

    network = SkywayNetwork(nodes, segments)
    comps = network.components()
    if len(comps) > 1:
        keep = max(comps, key=lambda c: (len(c), -min(c)))
        warnings.warn(
            f"network is disconnected; keeping the largest component "
            f"({len(keep)} of {network.n_nodes} nodes)",
            stacklevel=2,
        )
        network = SkywayNetwork(
            [n for n in nodes if n.node_id in keep],
            [s for s in segments if s.a in keep and s.b in keep],
        )
    return network


def dump_network(network: SkywayNetwork) -> str:
    """Canonical single-file dump, round-trippable via load_network_dump."""
    payload = {
        "nodes": [
            [n.node_id, n.x, n.y, n.station_owner, n.pad_count]
            for n in sorted(network.nodes.values(), key=lambda n: n.node_id)
        ],
        "edges": [[s.a, s.b] for s in network.segments],
    }
    return json.dumps(payload, separators=(",", ":"))


def load_network_dump(text: str) -> SkywayNetwork:
    try:
        payload = json.loads(text)
        nodes = [SkywayNode(int(i), float(x), float(y), int(o), int(p)) for i, x, y, o, p in payload["nodes"]]
        positions = {n.node_id: (n.x, n.y) for n in nodes}
        segments = [
            SkywaySegment(a, b, math.hypot(positions[a][0] - positions[b][0], positions[a][1] - positions[b][1]))
            for a, b in payload["edges"]
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed network dump: {exc}") from None
    return SkywayNetwork(nodes, segments)


def network_to_streams(network: SkywayNetwork) -> tuple[str, str, str]:
    """Render a network back into the (edge list, coords, stations) text form."""
    edges = "\n".join(f"{s.a} {s.b}" for s in network.segments) + "\n"
    ordered = sorted(network.nodes.values(), key=lambda n: n.node_id)
    coords = "\n".join(f"{n.node_id} {n.x!r} {n.y!r}" for n in ordered) + "\n"
    stations = "\n".join(f"{n.node_id} {n.station_owner} {n.pad_count}" for n in ordered) + "\n"
    return edges, coords, stations


# --- region grid and density heatmaps -------------------------------------


def _axis_cell(value: float, lo: float, hi: float, resolution: int) -> int:
    span = hi - lo
    if span <= 0:
        return 0
    position = (value - lo) / span * resolution
    index = math.ceil(position) - 1  # exact boundary hits go to the lower cell
    return min(max(index, 0), resolution - 1)


@dataclass(frozen=True)
class RegionGrid:
    """G x G partition of the network bounding box; cells are flat row-major indices."""

    xmin: float
    ymin: float
    xmax: float
    ymax: float
    resolution: int
    cell_of: Mapping[int, int]  # node_id -> flat cell index

    @property
    def cell_count(self) -> int:
        return self.resolution * self.resolution

    def locate(self, x: float, y: float) -> int:
        ix = _axis_cell(x, self.xmin, self.xmax, self.resolution)
        iy = _axis_cell(y, self.ymin, self.ymax, self.resolution)
        return iy * self.resolution + ix

    def cell_xy(self, cell: int) -> tuple[int, int]:
        return cell % self.resolution, cell // self.resolution

    def chebyshev(self, cell_a: int, cell_b: int) -> int:
        ax, ay = self.cell_xy(cell_a)
        bx, by = self.cell_xy(cell_b)
        return max(abs(ax - bx), abs(ay - by))

    def cell_neighbors(self, cell: int) -> tuple[int, ...]:
        g = self.resolution
        cx, cy = self.cell_xy(cell)
        out = []
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                if dx == 0 and dy == 0:
                    continue
                nx, ny = cx + dx, cy + dy
                if 0 <= nx < g and 0 <= ny < g:
                    out.append(ny * g + nx)
        return tuple(sorted(out))


def build_region_grid(network: SkywayNetwork, resolution: int = 8) -> RegionGrid:
    if resolution < 2:
        raise ConfigurationError("grid resolution must be at least 2")
    xs = [n.x for n in network.nodes.values()]
    ys = [n.y for n in network.nodes.values()]
    xmin, xmax, ymin, ymax = min(xs), max(xs), min(ys), max(ys)
    membership = {
        nid: _axis_cell(n.y, ymin, ymax, resolution) * resolution
        + _axis_cell(n.x, xmin, xmax, resolution)
        for nid, n in network.nodes.items()
    }
    return RegionGrid(
        xmin=xmin, ymin=ymin, xmax=xmax, ymax=ymax,
        resolution=resolution, cell_of=membership,
    )


@dataclass(frozen=True)
class DensityHeatmap:
    """Per-cell pad density of one charging company across the region grid."""

    charging_provider: int
    resolution: int
    cells: tuple[float, ...]

    def density(self, cell: int) -> float:
        return self.cells[cell]

    @property
    def total(self) -> float:
        return sum(self.cells)


def build_heatmap(network: SkywayNetwork, grid: RegionGrid, charging_provider: int) -> DensityHeatmap:
    if charging_provider not in network.charging_providers:
        raise ValueError(f"unknown charging provider {charging_provider}")
    cells = [0.0] * grid.cell_count
    for nid, node in network.nodes.items():
        if node.station_owner == charging_provider:
            cells[grid.cell_of[nid]] += node.pad_count
    return DensityHeatmap(charging_provider, grid.resolution, tuple(cells))


def build_all_heatmaps(network: SkywayNetwork, grid: RegionGrid) -> dict[int, DensityHeatmap]:
    return {cp: build_heatmap(network, grid, cp) for cp in network.charging_providers}


def t_shortest_region_paths(
    grid: RegionGrid, source_cell: int, dest_cell: int, t: int = 3
) -> list[tuple[int, ...]]:
    """Up to t loop-free cell paths ordered by hop count, then lexicographically.

    Cells are 8-connected and all hops count equally. Intended for small t; the
    enumeration deepens one hop level at a time and stops as soon as t paths exist.
    """
    if t < 1:
        raise ValueError("t must be at least 1")
    for cell in (source_cell, dest_cell):
        if not 0 <= cell < grid.cell_count:
            raise ValueError(f"cell {cell} outside the {grid.resolution}x{grid.resolution} grid")
    if source_cell == dest_cell:
        return [(source_cell,)]

    out: list[tuple[int, ...]] = []
    max_hops = grid.cell_count - 1

    def extend(path: list[int], visited: set[int], used: int, budget: int) -> Iterator[tuple[int, ...]]:
        current = path[-1]
        if current == dest_cell:
            if used == budget:
                yield tuple(path)
            return
        remaining = budget - used
        if remaining <= 0:
            return
        for nbr in grid.cell_neighbors(current):
            if nbr in visited or grid.chebyshev(nbr, dest_cell) > remaining - 1:
                continue
            path.append(nbr)
            visited.add(nbr)
            yield from extend(path, visited, used + 1, budget)
            visited.remove(nbr)
            path.pop()

    for budget in range(grid.chebyshev(source_cell, dest_cell), max_hops + 1):
        for path in extend([source_cell], {source_cell}, 0, budget):
            out.append(path)
            if len(out) == t:
                return out
    return out


# --- shortest paths ---------------------------------------------------------


def shortest_path_tree(network: SkywayNetwork, root: int) -> tuple[dict[int, float], dict[int, int | None]]:
    """Dijkstra by segment length from root; returns (distance, parent) maps."""
    dist: dict[int, float] = {root: 0.0}
    parent: dict[int, int | None] = {root: None}
    heap: list[tuple[float, int]] = [(0.0, root)]
    done: set[int] = set()
    while heap:
        d, v = heapq.heappop(heap)
        if v in done:
            continue
        done.add(v)
        for nbr, length in network.neighbors(v):
            nd = d + length
            if nbr not in dist or nd < dist[nbr]:
                dist[nbr] = nd
                parent[nbr] = v
                heapq.heappush(heap, (nd, nbr))
    return dist, parent


def tree_path(parent: Mapping[int, int | None], start: int) -> list[int]:
    """Walk parent pointers from start to the tree root (inclusive)."""
    path = [start]
    while True:
        nxt = parent[path[-1]]
        if nxt is None:
            return path
        path.append(nxt)


# --- synthetic networks ------------------------------------------------------


def synthetic_network(
    seed: int,
    n_nodes: int,
    n_charging_providers: int = 5,
    area_m: float = 30000.0,
    k_nearest: int = 4,
    pad_counts: tuple[int, int] = (1, 4),
    cluster_bias: float = 0.6,
) -> SkywayNetwork:
    """Seeded random geometric network: k-nearest-neighbour edges, stitched connected."""
    if n_nodes < 2:
        raise ValueError("need at least 2 nodes")
    if n_charging_providers < 1:
        raise ValueError("need at least one charging provider")
    if not 0.0 <= cluster_bias <= 1.0:
        raise ValueError("cluster_bias must be in [0, 1]")
    rng = random.Random(seed)
    positions = {nid: (rng.uniform(0, area_m), rng.uniform(0, area_m)) for nid in range(1, n_nodes + 1)}
    # Charging companies concentrate in districts (soft Voronoi around seeded
    # anchors) but keep scattered background presence elsewhere, mirroring how
    # real operators cover a city; cluster_bias sets the district share.
    anchors = {
        cp: (rng.uniform(0, area_m), rng.uniform(0, area_m))
        for cp in range(1, n_charging_providers + 1)
    }
    owners = {}
    for nid, (x, y) in positions.items():
        if rng.random() < cluster_bias:
            best_cp, best_score = 1, float("inf")
            for cp, (ax, ay) in anchors.items():
                score = math.hypot(x - ax, y - ay) * rng.uniform(0.7, 1.3)
                if score < best_score:
                    best_cp, best_score = cp, score
            owners[nid] = best_cp
        else:
            owners[nid] = rng.randint(1, n_charging_providers)
    pads = {nid: rng.randint(*pad_counts) for nid in positions}

    def d2(a: int, b: int) -> float:
        (xa, ya), (xb, yb) = positions[a], positions[b]
        return (xa - xb) ** 2 + (ya - yb) ** 2

    edges: set[tuple[int, int]] = set()
    ids = sorted(positions)
    for nid in ids:
        nearest = sorted((d2(nid, other), other) for other in ids if other != nid)
        for _, other in nearest[: k_nearest]:
            edges.add((min(nid, other), max(nid, other)))

    # stitch components together via their closest cross pairs
    def comps_of(edge_set: set[tuple[int, int]]) -> list[set[int]]:
        adj: dict[int, list[int]] = {nid: [] for nid in ids}
        for a, b in edge_set:
            adj[a].append(b)
            adj[b].append(a)
        seen: set[int] = set()
        comps = []
        for start in ids:
            if start in seen:
                continue
            comp = {start}
            stack = [start]
            while stack:
                v = stack.pop()
                for nbr in adj[v]:
                    if nbr not in comp:
                        comp.add(nbr)
                        stack.append(nbr)
            seen |= comp
            comps.append(comp)
        return comps

    comps = comps_of(edges)
    while len(comps) > 1:
        base = comps[0]
        best = min(
            (d2(a, b), a, b)
            for a in sorted(base)
            for comp in comps[1:]
            for b in sorted(comp)
        )
        _, a, b = best
        edges.add((min(a, b), max(a, b)))
        comps = comps_of(edges)

    nodes = [SkywayNode(nid, positions[nid][0], positions[nid][1], owners[nid], pads[nid]) for nid in ids]
    segments = [SkywaySegment(a, b, math.hypot(positions[a][0] - positions[b][0], positions[a][1] - positions[b][1])) for a, b in sorted(edges)]
    return SkywayNetwork(nodes, segments)
