"""Hierarchical navigable small-world graph for approximate cosine search.

Vectors are unit-normalized once, so similarity is a plain dot product.
Construction follows the usual insertion scheme: draw a level from an
exponential distribution, descend greedily through the upper layers, then
run a beam search on each remaining layer and wire the new point to a
diversified subset of the beam.
"""

from __future__ import annotations

import heapq
import math
from typing import Iterable, Mapping, Sequence

import numpy as np

from .embedding import VectorIndex


class HNSWIndex(VectorIndex):
    mode = "approximate"

    def __init__(
        self,
        items: Mapping[str, Sequence[float]],
        M: int = 16,
        ef_construction: int = 100,
        ef_search: int = 200,
        seed: int = 0,
    ):
        super().__init__(items)
        if M < 2:
            raise ValueError("M must be >= 2")
        self.M = M
        self.M0 = 2 * M
        self.ef_construction = ef_construction
        self.ef_search = ef_search
        self._ml = 1.0 / math.log(M)
        self._rng = np.random.default_rng(seed)
        # _links[level][node] -> neighbor list
        self._links: list[dict[int, list[int]]] = []
        self._entry: int | None = None
        self._top = -1
        for i in range(len(self.ids)):
            self._insert(i)

    # -- construction ---------------------------------------------------------

    def _random_level(self) -> int:
        return int(-math.log(1.0 - self._rng.random()) * self._ml)

    def _search_layer(self, q: np.ndarray, entry: list[tuple[float, int]], ef: int,
                      level: int) -> list[tuple[float, int]]:
        """Beam search on one layer. Returns (sim, node) pairs, best first."""
        X = self._unit
        links = self._links[level]
        visited = {n for _, n in entry}
        cand = [(-s, n) for s, n in entry]
        heapq.heapify(cand)
        best = list(entry)  # min-heap on sim: best[0] is the worst kept
        heapq.heapify(best)
        while len(best) > ef:
            heapq.heappop(best)
        while cand:
            neg, c = heapq.heappop(cand)
            if -neg < best[0][0] and len(best) >= ef:
                break
            fresh = [n for n in links[c] if n not in visited]
            if not fresh:
                continue
            visited.update(fresh)
            sims = X[fresh] @ q
            worst = best[0][0]
            for n, s in zip(fresh, sims.tolist()):
                if len(best) < ef or s > worst:
                    heapq.heappush(cand, (-s, n))
                    heapq.heappush(best, (s, n))
                    if len(best) > ef:
                        heapq.heappop(best)
                    worst = best[0][0]
        return sorted(best, reverse=True)

    def _select(self, base: np.ndarray, cands: list[tuple[float, int]], m: int) -> list[int]:
        """Diversity heuristic: keep a candidate only if it is closer to the
        base point than to every neighbor already kept."""
        if len(cands) <= m:
            return [n for _, n in cands]
        X = self._unit
        kept: list[int] = []
        for s, n in cands:
            if kept and float((X[kept] @ X[n]).max()) > s:
                continue
            kept.append(n)
            if len(kept) == m:
                break
        return kept

    def _insert(self, i: int) -> None:
        X = self._unit
        q = X[i]
        level = self._random_level()
        while len(self._links) <= level:
            self._links.append({})
        for lv in range(level + 1):
            self._links[lv][i] = []
        if self._entry is None:
            self._entry, self._top = i, level
            return
        ep = [(float(X[self._entry] @ q), self._entry)]
        for lv in range(self._top, level, -1):
            ep = self._search_layer(q, ep, 1, lv)[:1]
        for lv in range(min(level, self._top), -1, -1):
            found = self._search_layer(q, ep, self.ef_construction, lv)
            mmax = self.M0 if lv == 0 else self.M
            nbrs = self._select(q, found, self.M)
            layer = self._links[lv]
            layer[i] = nbrs
            for n in nbrs:
                lst = layer[n]
                lst.append(i)
                if len(lst) > mmax:
                    sims = (X[lst] @ X[n]).tolist()
                    ranked = sorted(zip(sims, lst), reverse=True)
                    layer[n] = self._select(X[n], ranked, mmax)
            ep = found
        if level > self._top:
            self._entry, self._top = i, level

    # -- queries --------------------------------------------------------------

    def _candidates(self, q: np.ndarray, ef: int) -> list[tuple[float, int]]:
        if self._entry is None:
            return []
        X = self._unit
        ep = [(float(X[self._entry] @ q), self._entry)]
        for lv in range(self._top, 0, -1):
            ep = self._search_layer(q, ep, 1, lv)[:1]
        return self._search_layer(q, ep, ef, 0)

    def top_k_nodes(self, query, k: int, exclude: Iterable[str] = ()) -> list[tuple[str, float]]:
        if k < 1:
            raise ValueError("k must be >= 1")
        if not self.ids:
            return []
        q = self._unit_query(query)
        excluded = {self._pos[e] for e in exclude if e in self._pos}
        ef = max(self.ef_search, k + len(excluded))
        found = self._candidates(q, ef)
        hits = [(min(1.0, max(-1.0, s)), n) for s, n in found if n not in excluded]
        hits.sort(key=lambda p: (-p[0], p[1]))
        return [(self.ids[n], s) for s, n in hits[:k]]
