"""
Maximum-cardinality bipartite matching and Hall certificates.

Rows of a boolean adjacency matrix are the left vertices, columns the right
ones. Matching is delegated to scipy's Hopcroft-Karp implementation; the
Hall violator is read off a maximum matching by alternating search.
"""

import logging
from collections import deque
from typing import Deque, List, Optional, Tuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

logger = logging.getLogger(__name__)

__all__ = ["UNMATCHED", "maximum_matching", "hall_violator"]

UNMATCHED = -1


def maximum_matching(adjacency: np.ndarray) -> np.ndarray:
    """
    Maximum matching of a boolean relation.

    Args:
        adjacency (np.ndarray): Boolean matrix, rows are left vertices

    Returns:
        np.ndarray: match[u] = matched column or -1
    """
    adjacency = np.asarray(adjacency, dtype=bool)
    if adjacency.ndim != 2:
        raise ValueError(f"Adjacency must be a matrix, got shape {adjacency.shape}")
    num_u = adjacency.shape[0]
    if not adjacency.any():
        return np.full(num_u, UNMATCHED, dtype=np.int64)

    graph = csr_matrix(adjacency.astype(np.int8))
    match = np.asarray(maximum_bipartite_matching(graph, perm_type="column"), dtype=np.int64)
    logger.debug(f"Matching: {int(np.sum(match != UNMATCHED))} of {num_u} rows on {graph.nnz} edges")
    return match


def hall_violator(adjacency: np.ndarray, match_u: Optional[np.ndarray] = None) -> Tuple[List[int], List[int]]:
    """
    Rows A with |N(A)| < |A|, from a maximum matching (Konig construction).

    A is the set of rows reachable by alternating paths from the unmatched
    rows; its neighbourhood is exactly the set of columns reached, all of
    which are matched back into A.

    Args:
        adjacency (np.ndarray): Boolean matrix
        match_u (np.ndarray, optional): A maximum matching; computed if omitted

    Returns:
        Tuple[List[int], List[int]]: (A, N(A)), both sorted; empty lists if
            every row can be matched
    """
    adjacency = np.asarray(adjacency, dtype=bool)
    if match_u is None:
        match_u = maximum_matching(adjacency)
    num_u, num_v = adjacency.shape
    match_v = np.full(num_v, UNMATCHED, dtype=np.int64)
    for u, v in enumerate(match_u):
        if v != UNMATCHED:
            match_v[v] = u

    free = [u for u in range(num_u) if match_u[u] == UNMATCHED]
    if not free:
        return [], []

    rows = set(free)
    cols = set()
    queue: Deque[int] = deque(free)
    while queue:
        u = queue.popleft()
        for v in np.flatnonzero(adjacency[u]):
            v = int(v)
            if v in cols:
                continue
            cols.add(v)
            partner = int(match_v[v])
            # a free column here would mean the matching was not maximum
            if partner != UNMATCHED and partner not in rows:
                rows.add(partner)
                queue.append(partner)
    return sorted(rows), sorted(cols)
