"""Passing networks and the team indicators built on them.

Player networks have one node per player of the team who generated an
event; an edge passer -> receiver counts completed passes. The zone network
does the same over a 10 x 10 grid of pitch zones of 11 m x 6.5 m.

Current-flow betweenness follows the electrical interpretation: a unit
current is injected at every source and extracted at every sink, and a
node's score is the current flowing through it, summed over pairs and
normalized by (n - 1)(n - 2) / 2.
"""
from __future__ import annotations

import json
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import UndefinedValueError
from .features import infer_receivers
from .ingest import Event, EventType

log = logging.getLogger(__name__)

N_ZONES_X = 10
N_ZONES_Y = 10


@dataclass
class PassingNetwork:
    nodes: list
    edges: dict  # (passer, receiver) -> completed passes
    passes_made: dict  # player -> passes attempted
    w: int  # passes produced by the team

    def strength(self):
        """Managed passes per node: passes made plus completed passes received."""
        managed = {n: self.passes_made.get(n, 0) for n in self.nodes}
        for (_, v), c in self.edges.items():
            managed[v] += c
        return managed

    def symmetric_matrix(self) -> tuple:
        idx = {n: i for i, n in enumerate(self.nodes)}
        a = np.zeros((len(self.nodes), len(self.nodes)))
        for (u, v), c in self.edges.items():
            a[idx[u], idx[v]] += c
            a[idx[v], idx[u]] += c
        return a, idx


@dataclass
class ZoneNetwork:
    edges: dict  # (zone, zone) -> passes
    managed: np.ndarray  # (10, 10) managed passes per zone, indexed [zx, zy]

    @property
    def mu(self) -> float:
        return float(self.managed.mean())

    @property
    def sigma(self) -> float:
        return float(self.managed.std())


@dataclass
class NetworkSummary:
    w: int
    mu_p: float
    sigma_p: float
    mu_z: float
    sigma_z: float
    h: float | None
    fc_avg: float | None
    fc_std: float | None
    centrality: dict = field(default_factory=dict)


def zone_of(pos) -> tuple:
    x, y = pos
    return (min(int(x // 10), N_ZONES_X - 1), min(int(y // 10), N_ZONES_Y - 1))


def build_passing_network(team_events: Sequence[Event]) -> PassingNetwork:
    receivers = infer_receivers(team_events)
    nodes = []
    seen = set()
    for e in team_events:
        if e.player_id and e.player_id not in seen:
            seen.add(e.player_id)
            nodes.append(e.player_id)
    edges, made = {}, {}
    w = 0
    for e, r in zip(team_events, receivers):
        if e.event_type is not EventType.PASS:
            continue
        w += 1
        made[e.player_id] = made.get(e.player_id, 0) + 1
        if r is not None:
            edges[(e.player_id, r)] = edges.get((e.player_id, r), 0) + 1
    return PassingNetwork(nodes=nodes, edges=edges, passes_made=made, w=w)


def build_zone_network(team_events: Sequence[Event]) -> ZoneNetwork:
    receivers = infer_receivers(team_events)
    managed = np.zeros((N_ZONES_X, N_ZONES_Y))
    edges = {}
    for e, r in zip(team_events, receivers):
        if e.event_type is not EventType.PASS:
            continue
        zo = zone_of(e.origin)
        managed[zo] += 1
        if r is not None and e.destination is not None:
            zd = zone_of(e.destination)
            managed[zd] += 1
            edges[(zo, zd)] = edges.get((zo, zd), 0) + 1
    return ZoneNetwork(edges=edges, managed=managed)


def harmonic_mean(values) -> float:
    values = list(values)
    if not values or any(v <= 0 for v in values):
        raise UndefinedValueError(f"harmonic mean undefined for non-positive components {values}")
    return len(values) / math.fsum(1.0 / v for v in values)


def h_components(network: PassingNetwork, zones: ZoneNetwork) -> tuple:
    managed = np.array(list(network.strength().values()), dtype=float)
    if managed.size == 0:
        return (float(network.w), 0.0, 0.0, zones.mu, zones.sigma)
    return (float(network.w), float(managed.mean()), float(managed.std()), zones.mu, zones.sigma)


def h_indicator(network: PassingNetwork, zones: ZoneNetwork) -> float:
    """Harmonic mean of w, player-level mean/std and zone-level mean/std of managed passes."""
    return harmonic_mean(h_components(network, zones))


# ---------------------------------------------------------------- centrality


def _components(adj: np.ndarray) -> list:
    n = adj.shape[0]
    seen = np.zeros(n, dtype=bool)
    comps = []
    for s in range(n):
        if seen[s]:
            continue
        comp, queue = [], deque([s])
        seen[s] = True
        while queue:
            u = queue.popleft()
            comp.append(u)
            for v in np.nonzero(adj[u])[0]:
                if not seen[v]:
                    seen[v] = True
                    queue.append(v)
        comps.append(sorted(comp))
    return comps


def current_flow_betweenness_matrix(adj: np.ndarray) -> np.ndarray:
    """Normalized current-flow betweenness for a symmetric weighted adjacency matrix."""
    adj = np.asarray(adj, dtype=float)
    n = adj.shape[0]
    if n < 3:
        raise UndefinedValueError(f"current-flow betweenness needs >= 3 nodes, got {n}")
    out = np.zeros(n)
    comps = _components(adj)
    if len(comps) > 1:
        log.debug("network has %d components; cross-component pairs contribute 0", len(comps))
    for comp in comps:
        m = len(comp)
        if m < 3:
            continue
        sub = adj[np.ix_(comp, comp)]
        lap = np.diag(sub.sum(axis=1)) - sub
        # grounded inverse: potentials relative to node 0 of the component
        c = np.zeros((m, m))
        c[1:, 1:] = np.linalg.inv(lap[1:, 1:])
        through = np.zeros(m)
        for s in range(m):
            for t in range(s + 1, m):
                p = c[:, s] - c[:, t]
                flow = sub * np.abs(p[:, None] - p[None, :])
                node_flow = 0.5 * flow.sum(axis=1)
                node_flow[s] = node_flow[t] = 0.0
                through += node_flow
        out[comp] = through
    return out * 2.0 / ((n - 1) * (n - 2))


def current_flow_betweenness(network: PassingNetwork) -> dict:
    adj, idx = network.symmetric_matrix()
    values = current_flow_betweenness_matrix(adj)
    return {node: float(values[i]) for node, i in idx.items()}


def shortest_path_betweenness_matrix(adj: np.ndarray) -> np.ndarray:
    """Brandes accumulation over hop-count shortest paths, undirected, normalized."""
    adj = np.asarray(adj)
    n = adj.shape[0]
    nbrs = [list(np.nonzero(adj[u])[0]) for u in range(n)]
    bc = np.zeros(n)
    for s in range(n):
        stack, preds = [], [[] for _ in range(n)]
        sigma = np.zeros(n)
        sigma[s] = 1.0
        dist = np.full(n, -1)
        dist[s] = 0
        queue = deque([s])
        while queue:
            v = queue.popleft()
            stack.append(v)
            for w in nbrs[v]:
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    queue.append(w)
                if dist[w] == dist[v] + 1:
                    sigma[w] += sigma[v]
                    preds[w].append(v)
        delta = np.zeros(n)
        while stack:
            w = stack.pop()
            for v in preds[w]:
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w])
            if w != s:
                bc[w] += delta[w]
    # each unordered pair was counted from both ends
    bc /= 2.0
    if n > 2:
        bc *= 2.0 / ((n - 1) * (n - 2))
    return bc


def shortest_path_betweenness(network: PassingNetwork) -> dict:
    adj, idx = network.symmetric_matrix()
    values = shortest_path_betweenness_matrix(adj)
    return {node: float(values[i]) for node, i in idx.items()}


def team_flow_centrality(network: PassingNetwork) -> tuple:
    vals = np.array(list(current_flow_betweenness(network).values()))
    return float(vals.mean()), float(vals.std())


def summarize(team_events: Sequence[Event]) -> NetworkSummary:
    net = build_passing_network(team_events)
    zones = build_zone_network(team_events)
    w, mu_p, sigma_p, mu_z, sigma_z = h_components(net, zones)
    try:
        h = harmonic_mean((w, mu_p, sigma_p, mu_z, sigma_z))
    except UndefinedValueError:
        h = None
    try:
        cent = current_flow_betweenness(net)
        vals = np.array(list(cent.values()))
        fc_avg, fc_std = float(vals.mean()), float(vals.std())
    except UndefinedValueError:
        cent, fc_avg, fc_std = {}, None, None
    return NetworkSummary(w, mu_p, sigma_p, mu_z, sigma_z, h, fc_avg, fc_std, cent)


def export_network(network: PassingNetwork, centrality: dict, fh, **meta) -> None:
    """Line-delimited node and edge records for plotting."""
    for node in network.nodes:
        rec = {"kind": "node", "player_id": node, "centrality": centrality.get(node, 0.0),
               "in_passes": sum(c for (_, v), c in network.edges.items() if v == node), **meta}
        fh.write(json.dumps(rec, sort_keys=True) + "\n")
    for (u, v), c in sorted(network.edges.items()):
        fh.write(json.dumps({"kind": "edge", "source": u, "target": v, "weight": c, **meta}, sort_keys=True) + "\n")
