"""Relatedness graph: canonical ads joined by shared identifiers.

Each identifier shared by n ads could induce a clique of n(n-1)/2
edges; instead edges are materialized as a star around the lowest ad_id
sharing it. Connectivity (hence components) is identical to the clique
form, edge count stays linear, and every edge records which identifiers
back it.
"""

from __future__ import annotations

import json
import logging
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .dedup import DuplicateCluster
from .extract import Identifier
from .unionfind import UnionFind

log = logging.getLogger(__name__)

MATERIALIZATION = "star"


@dataclass
class GraphEdge:
    """Edge between two canonical ads, with the identifiers they share."""

    a: str
    b: str
    shared: list[str]  # "kind:canonical" strings, sorted


@dataclass
class RelatednessGraph:
    nodes: list[str]
    edges: list[GraphEdge]
    component_of: dict[str, int]
    components: dict[int, list[str]]
    # per canonical node: all "kind:canonical" identifier keys, and raw
    # location strings, unioned over the duplicate cluster's members
    node_identifiers: dict[str, list[str]] = field(default_factory=dict)
    node_locations: dict[str, list[str]] = field(default_factory=dict)
    quarantined: list[dict] = field(default_factory=list)

    @property
    def materialization(self) -> str:
        return MATERIALIZATION


@dataclass
class ComponentStats:
    """Component count histogram over fixed size buckets."""

    buckets: dict[str, int]
    total_components: int
    total_nodes: int
    largest_size: int


BUCKET_LABELS = ("1", "2-10", "10-100", "100-1000", "1000+")


def size_bucket(size: int) -> str:
    """Bucket label for one component size (2-10 inclusive, then half-open)."""
    if size <= 0:
        raise ValueError("component size must be positive")
    if size == 1:
        return "1"
    if size <= 10:
        return "2-10"
    if size <= 100:
        return "10-100"
    if size <= 1000:
        return "100-1000"
    return "1000+"


def _identifier_key(ident: Identifier) -> str:
    return f"{ident.kind}:{ident.canonical}"


def build_graph(
    clusters: Iterable[DuplicateCluster],
    identifiers_by_ad: Mapping[str, Iterable[Identifier]],
    locations_by_ad: Mapping[str, Iterable[str]] | None = None,
    quarantine_cap: int | None = None,
) -> RelatednessGraph:
    """Build the graph over cluster canonicals.

    Identifiers (and location strings) found on any cluster member
    count for its canonical. An identifier shared by more ads than
    quarantine_cap (when set) is excluded from linking and recorded in
    graph.quarantined.
    """
    clusters = list(clusters)
    nodes = sorted(c.canonical_id for c in clusters)
    if len(nodes) != len(set(nodes)):
        raise ValueError("duplicate canonical ids across clusters")

    ids_of_node: dict[str, set[str]] = {n: set() for n in nodes}
    locs_of_node: dict[str, set[str]] = {n: set() for n in nodes}
    for cluster in clusters:
        bag = ids_of_node[cluster.canonical_id]
        locs = locs_of_node[cluster.canonical_id]
        for member in cluster.member_ids:
            for ident in identifiers_by_ad.get(member, ()):
                bag.add(_identifier_key(ident))
            if locations_by_ad is not None:
                for loc in locations_by_ad.get(member, ()):
                    loc = loc.strip()
                    if loc:
                        locs.add(loc)

    sharers: dict[str, list[str]] = {}
    for node in nodes:
        for key in ids_of_node[node]:
            sharers.setdefault(key, []).append(node)

    quarantined: list[dict] = []
    uf = UnionFind(nodes)
    edge_shared: dict[tuple[str, str], list[str]] = {}
    for key in sorted(sharers):
        members = sorted(sharers[key])
        if len(members) < 2:
            continue
        if quarantine_cap is not None and len(members) > quarantine_cap:
            quarantined.append({"identifier": key, "ad_count": len(members)})
            log.info("quarantined identifier %s shared by %d ads", key, len(members))
            continue
        hub = members[0]
        for other in members[1:]:
            uf.union(hub, other)
            edge_shared.setdefault((hub, other), []).append(key)

    edges = [
        GraphEdge(a=a, b=b, shared=sorted(shared))
        for (a, b), shared in sorted(edge_shared.items())
    ]

    components: dict[int, list[str]] = {}
    component_of: dict[str, int] = {}
    groups = sorted(uf.groups().values(), key=lambda members: members[0])
    for idx, members in enumerate(groups):
        components[idx] = members
        for node in members:
            component_of[node] = idx

    return RelatednessGraph(
        nodes=nodes,
        edges=edges,
        component_of=component_of,
        components=components,
        node_identifiers={n: sorted(ids_of_node[n]) for n in nodes},
        node_locations={n: sorted(locs_of_node[n]) for n in nodes},
        quarantined=quarantined,
    )


def component_stats(graph: RelatednessGraph) -> ComponentStats:
    buckets = {label: 0 for label in BUCKET_LABELS}
    largest = 0
    for members in graph.components.values():
        size = len(members)
        buckets[size_bucket(size)] += 1
        largest = max(largest, size)
    return ComponentStats(
        buckets=buckets,
        total_components=len(graph.components),
        total_nodes=len(graph.nodes),
        largest_size=largest,
    )


def stats_to_csv(stats: ComponentStats, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["bucket,components"]
    lines.extend(f"{label},{stats.buckets[label]}" for label in BUCKET_LABELS)
    lines.append(f"total,{stats.total_components}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def graph_to_dict(graph: RelatednessGraph) -> dict:
    return {
        "materialization": graph.materialization,
        "nodes": list(graph.nodes),
        "edges": [{"a": e.a, "b": e.b, "shared": list(e.shared)} for e in graph.edges],
        "components": {str(k): list(v) for k, v in sorted(graph.components.items())},
        "node_identifiers": {n: list(graph.node_identifiers.get(n, [])) for n in graph.nodes},
        "node_locations": {n: list(graph.node_locations.get(n, [])) for n in graph.nodes},
        "quarantined": list(graph.quarantined),
    }


def graph_from_dict(obj: dict) -> RelatednessGraph:
    components = {int(k): list(v) for k, v in obj["components"].items()}
    component_of = {node: idx for idx, members in components.items() for node in members}
    return RelatednessGraph(
        nodes=list(obj["nodes"]),
        edges=[GraphEdge(e["a"], e["b"], list(e["shared"])) for e in obj["edges"]],
        component_of=component_of,
        components=components,
        node_identifiers={k: list(v) for k, v in obj.get("node_identifiers", {}).items()},
        node_locations={k: list(v) for k, v in obj.get("node_locations", {}).items()},
        quarantined=list(obj.get("quarantined", [])),
    )


def write_graph_json(graph: RelatednessGraph, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(graph_to_dict(graph), fh, ensure_ascii=False, sort_keys=True, indent=1)
        fh.write("\n")


def read_graph_json(path: str | Path) -> RelatednessGraph:
    with open(path, encoding="utf-8") as fh:
        return graph_from_dict(json.load(fh))


def _subgraph_view(graph: RelatednessGraph, component: int | None):
    if component is None:
        return graph.nodes, graph.edges
    if component not in graph.components:
        raise ValueError(f"no component {component} in graph")
    keep = set(graph.components[component])
    nodes = [n for n in graph.nodes if n in keep]
    edges = [e for e in graph.edges if e.a in keep and e.b in keep]
    return nodes, edges


def export_graphml(graph: RelatednessGraph, path: str | Path, component: int | None = None) -> None:
    """Write GraphML with component and shared-identifier attributes."""
    nodes, edges = _subgraph_view(graph, component)
    root = ET.Element("graphml", xmlns="http://graphml.graphdrawing.org/xmlns")
    for key_id, target, name, typ in (
        ("d0", "graph", "materialization", "string"),
        ("d1", "node", "component", "int"),
        ("d2", "edge", "shared_identifiers", "string"),
        ("d3", "node", "ad_id", "string"),
    ):
        ET.SubElement(root, "key", id=key_id, attrib={"for": target}, **{"attr.name": name, "attr.type": typ})
    g = ET.SubElement(root, "graph", id="relatedness", edgedefault="undirected")
    data = ET.SubElement(g, "data", key="d0")
    data.text = graph.materialization
    for node in nodes:
        el = ET.SubElement(g, "node", id=node)
        d = ET.SubElement(el, "data", key="d1")
        d.text = str(graph.component_of[node])
        d = ET.SubElement(el, "data", key="d3")
        d.text = node
    for idx, edge in enumerate(edges):
        el = ET.SubElement(g, "edge", id=f"e{idx}", source=edge.a, target=edge.b)
        d = ET.SubElement(el, "data", key="d2")
        d.text = ";".join(edge.shared)
    ET.indent(root)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tree = ET.ElementTree(root)
    with open(path, "wb") as fh:
        tree.write(fh, encoding="utf-8", xml_declaration=True)
        fh.write(b"\n")


def _dot_quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_dot(graph: RelatednessGraph, path: str | Path, component: int | None = None) -> None:
    """Write a Graphviz DOT rendering of the graph."""
    nodes, edges = _subgraph_view(graph, component)
    lines = ["graph relatedness {", f"  // materialization: {graph.materialization}"]
    for node in nodes:
        lines.append(f"  {_dot_quote(node)} [ad_id={_dot_quote(node)}, component={graph.component_of[node]}];")
    for edge in edges:
        label = _dot_quote(";".join(edge.shared))
        lines.append(f"  {_dot_quote(edge.a)} -- {_dot_quote(edge.b)} [shared_identifiers={label}];")
    lines.append("}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
