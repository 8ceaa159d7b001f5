from __future__ import annotations

from collections import defaultdict


class UnionFind:
    """Disjoint sets over ``0..size-1`` with path compression and union by size."""

    def __init__(self, size: int) -> None:
        self.size = size
        self.parents = list(range(size))
        self.sizes = [1] * size
        self.num_components = size

    def find_parent(self, elem: int) -> int:
        root = elem
        while root != self.parents[root]:
            root = self.parents[root]
        # compress the path taken so every visited element points at the root
        while elem != root:
            parent = self.parents[elem]
            self.parents[elem] = root
            elem = parent
        return root

    def union(self, a: int, b: int) -> bool:
        """Merge the sets of ``a`` and ``b``; returns False if already joined."""
        root_a = self.find_parent(a)
        root_b = self.find_parent(b)
        if root_a == root_b:
            return False
        if self.sizes[root_a] < self.sizes[root_b]:
            root_a, root_b = root_b, root_a
        self.parents[root_b] = root_a
        self.sizes[root_a] += self.sizes[root_b]
        self.num_components -= 1
        return True

    def connected(self, a: int, b: int) -> bool:
        return self.find_parent(a) == self.find_parent(b)

    def retrieve_components(self) -> list[list[int]]:
        components: dict[int, list[int]] = defaultdict(list)
        for elem in range(self.size):
            components[self.find_parent(elem)].append(elem)
        return list(components.values())
