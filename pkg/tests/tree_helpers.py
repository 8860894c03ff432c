"""Builders for synthetic skeleton trees used across the test suite."""

import numpy as np

from skelseg.tree_extraction import SkeletonTree


def tree_from_links(coords, edges, root=0, weight_floor=1e-12):
    """SkeletonTree from explicit (parent, child) edges and coordinates."""
    coords = np.asarray(coords, dtype=float)
    tree = SkeletonTree(root=root, coords=coords, weight_floor=weight_floor)
    tree.children[root] = []
    for p, c in edges:
        tree.add_edge(int(p), int(c))
    tree.recompute_depths()
    return tree


def tree_from_polylines(centerlines, spacing):
    """Sample ground-truth centerline polylines into a skeleton tree.

    The first polyline roots the tree at its first point; every other
    polyline must start at a point already sampled (a junction), to which its
    chain is attached. Returns ``(tree, coords)`` with one node per sample.
    """
    coords = []
    parent_edges = []
    key_of = {}

    def key(p):
        return tuple(np.round(np.asarray(p, float), 9))

    def add_point(p):
        coords.append(np.asarray(p, float))
        return len(coords) - 1

    for li, line in enumerate(centerlines):
        line = np.asarray(line, dtype=float)
        start = key(line[0])
        if li == 0:
            anchor = add_point(line[0])
            key_of[start] = anchor
        else:
            if start not in key_of:
                raise ValueError("polyline does not start on an existing node")
            anchor = key_of[start]
        prev = anchor
        for a, b in zip(line, line[1:]):
            seg = b - a
            n = max(1, int(round(np.linalg.norm(seg) / spacing)))
            for i in range(1, n + 1):
                p = a + seg * (i / n)
                idx = add_point(p)
                parent_edges.append((prev, idx))
                key_of[key(p)] = idx
                prev = idx
    return tree_from_links(np.asarray(coords), parent_edges, root=0)


def inject_hairs(tree, n_hairs, hair_spacing, rng):
    """Attach 3-node perpendicular stubs at random non-junction nodes.

    Returns the set of injected node ids (each hair contributes 3 new nodes).
    Mutates ``tree`` in place, extending its coordinate array.
    """
    # interior chain nodes only: a stub grafted onto a leaf would extend that
    # leaf's root path instead of forming a removable side subtree
    nodes = [n for n in tree.nodes()
             if tree.degree(n) == 2 and n != tree.root and tree.parent.get(n) is not None]
    anchors = rng.choice(len(nodes), size=n_hairs, replace=False)
    coords = list(np.asarray(tree.coords, dtype=float))
    injected = set()
    for k in anchors:
        anchor = nodes[int(k)]
        p = coords[anchor]
        direction = rng.normal(size=3)
        axis = coords[anchor] - coords[tree.parent[anchor]]
        norm = np.linalg.norm(axis)
        if norm > 0:  # push the stub off the local chain direction
            axis = axis / norm
            direction = direction - (direction @ axis) * axis
        direction = direction / max(np.linalg.norm(direction), 1e-12)
        prev = anchor
        for i in range(1, 4):
            coords.append(p + direction * hair_spacing * i)
            idx = len(coords) - 1
            tree.coords = np.asarray(coords)
            tree.add_edge(prev, idx)
            injected.add(idx)
            prev = idx
    tree.coords = np.asarray(coords)
    tree.recompute_depths()
    return injected
