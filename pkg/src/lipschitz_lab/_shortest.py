"""Heap-based Dijkstra on CSR adjacency with arbitrary initial labels."""

import heapq

import numba
import numpy as np


@numba.njit(cache=True)
def _dijkstra(indptr, indices, costs, init, limit):
    n = indptr.shape[0] - 1
    dist = init.copy()
    done = np.zeros(n, dtype=np.bool_)
    heap = [(0.0, 0)]
    heap.pop()
    for v in range(n):
        if dist[v] < np.inf:
            heapq.heappush(heap, (dist[v], v))
    while len(heap) > 0:
        d, v = heapq.heappop(heap)
        if done[v] or d > dist[v]:
            continue
        if d > limit:
            break
        done[v] = True
        for k in range(indptr[v], indptr[v + 1]):
            w = indices[k]
            nd = d + costs[k]
            if nd < dist[w]:
                dist[w] = nd
                heapq.heappush(heap, (nd, w))
    return dist


def dijkstra(indptr, indices, costs, init, limit=np.inf):
    """Shortest-path values given per-vertex starting labels ``init`` (``inf`` = not a source).

    Distances are accumulated as ``d[u] + c`` along paths, so results coincide with a
    left-to-right summation oracle. With a finite ``limit`` vertices beyond it may hold
    tentative (over-estimated) values.
    """
    init = np.asarray(init, dtype=np.float64)
    return _dijkstra(
        np.asarray(indptr, dtype=np.int64),
        np.asarray(indices, dtype=np.int64),
        np.asarray(costs, dtype=np.float64),
        init,
        float(limit),
    )
