"""Maximum bipartite matching (Hopcroft-Karp) with a Hall deficiency witness.

The matcher works on adjacency given as ``{left: sorted tuple of rights}``;
determinism follows from the sorted adjacency and sorted vertex iteration.
When the matching does not saturate the left side, ``deficiency_witness``
returns a set M of left vertices with |N(M)| < |M| (Koenig-style alternating
reachability from the unmatched left vertices).
"""

from __future__ import annotations

from collections import deque

__all__ = ["max_bipartite_matching", "deficiency_witness"]

_INF = float("inf")


def max_bipartite_matching(adj: dict) -> dict:
    """Hopcroft-Karp.  Returns {left: right} for the matched pairs."""
    match_l: dict = {}
    match_r: dict = {}
    lefts = sorted(adj)

    def bfs():
        dist = {}
        queue = deque()
        for u in lefts:
            if u not in match_l:
                dist[u] = 0
                queue.append(u)
        found = False
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                w = match_r.get(v)
                if w is None:
                    found = True
                elif w not in dist:
                    dist[w] = dist[u] + 1
                    queue.append(w)
        return found, dist

    def dfs(u, dist):
        for v in adj[u]:
            w = match_r.get(v)
            if w is None or (dist.get(w) == dist[u] + 1 and dfs(w, dist)):
                match_l[u] = v
                match_r[v] = u
                return True
        dist[u] = _INF
        return False

    while True:
        found, dist = bfs()
        if not found:
            break
        for u in lefts:
            if u not in match_l:
                dfs(u, dist)
    return match_l


def deficiency_witness(adj: dict, matching: dict):
    """Hall violator from a maximum matching, or None if the left side is
    saturated.  Returns (M, N(M)) with |N(M)| < |M|."""
    unmatched = [u for u in sorted(adj) if u not in matching]
    if not unmatched:
        return None
    match_r = {v: u for u, v in matching.items()}
    reach_l = set(unmatched)
    reach_r = set()
    queue = deque(unmatched)
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in reach_r:
                reach_r.add(v)
                w = match_r.get(v)
                if w is not None and w not in reach_l:
                    reach_l.add(w)
                    queue.append(w)
    # every right vertex reached is matched (else the matching was not maximum)
    return sorted(reach_l), sorted(reach_r)
