"""Network reconstruction from linear measurements.

Three recovery routes plus a small-scale exhaustive oracle:

* ``dtr``          -- directed-tree recovery of the latent subnetwork when
                      every latent node has a unique observed parent and
                      every latent leaf a unique observed child.
* ``nm``           -- node-merging search returning every consistent network
                      with the minimum number of latent nodes.
* ``recover_tree`` -- the unique realization when the unobserved network is a
                      directed tree whose latent nodes all have two parents
                      and two children.
* ``oracle_minimal`` -- exhaustive enumeration, the test oracle for the two
                      search algorithms (the underlying minimization is
                      NP-hard, so scale limits are enforced).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AmbiguousDistance,
    CapExceeded,
    InconsistentRecovery,
    NotIdentifiable,
    ScaleExceeded,
)
from .model import (
    LinearMeasurements,
    UnobservedNetwork,
    canonical_form,
    consistent,
    single_path_per_length,
)

#: Initial-graph latent budget per connected class before NM gives up.
DEFAULT_CAP = 40

#: Hard limits of the exhaustive oracle.
ORACLE_MAX_N = 6
ORACLE_MAX_M = 5
ORACLE_MAX_K = 4

#: Safety valve for the tree-assignment search inside dtr.
_DTR_SEARCH_LIMIT = 200_000


@dataclass(frozen=True)
class NodeProfile:
    """Latent-path profile of one observed node.

    ``l_i`` is the length of the longest directed latent path leaving the
    node (0 when there is none), ``r_i`` the observed nodes reached at that
    length, and ``m_i`` every (target, length) pair with length >= 2.
    """

    node: int
    l_i: int
    r_i: frozenset[int]
    m_i: frozenset[tuple[int, int]]


@dataclass(frozen=True)
class DistanceMatrix:
    """Latent-path lengths d[i, j] between observed nodes (0 = no path)."""

    d: np.ndarray


@dataclass
class MergeSearchState:
    """One level of the merge search: merge count and deduplicated frontier."""

    level: int
    frontier: dict[bytes, UnobservedNetwork] = field(default_factory=dict)


def node_profiles(meas: LinearMeasurements) -> list[NodeProfile]:
    """Profiles of all observed nodes, read off S_1.. (path lengths >= 2)."""
    n = meas.n
    profiles = []
    for i in range(n):
        pairs = set()
        for k in range(1, meas.max_k + 1):
            for j in np.flatnonzero(meas.supports[k][:, i]):
                pairs.add((int(j), k + 1))
        if pairs:
            l_i = max(r for _, r in pairs)
            r_i = frozenset(j for j, r in pairs if r == l_i)
        else:
            l_i = 0
            r_i = frozenset()
        profiles.append(NodeProfile(i, l_i, r_i, frozenset(pairs)))
    return profiles


def _unique_parents_ordered(profiles: list[NodeProfile]) -> list[int]:
    """Unique-observed-parent candidates in ascending node order.

    A node qualifies when, against every other node of equal longest length,
    either its top reach set is not covered or the two profiles are nested
    the right way; among nodes with identical profiles only the smallest
    index survives.
    """
    chosen: list[int] = []
    for p in profiles:
        if p.l_i < 2:
            continue
        ok = True
        for q in profiles:
            if q.node == p.node or q.l_i != p.l_i:
                continue
            if not (not q.r_i <= p.r_i or (q.r_i == p.r_i and p.m_i <= q.m_i)):
                ok = False
                break
        if not ok:
            continue
        twin = min(
            q.node for q in profiles if q.r_i == p.r_i and q.m_i == p.m_i
        )
        if twin == p.node:
            chosen.append(p.node)
    return chosen


def unique_parents(profiles: list[NodeProfile]) -> set[int]:
    """Observed nodes that are the unique parent of some latent node."""
    return set(_unique_parents_ordered(profiles))


def dtr(meas: LinearMeasurements) -> UnobservedNetwork:
    """Directed-tree recovery of the unobserved network.

    Creates one latent node per unique observed parent, attaches observed
    children from S_1, widens the observed parent sets by profile
    containment, and wires the latent tree itself by trying parent
    candidates (the exact-depth rule first, then any profile-shift
    containment, then root) until the rebuilt network reproduces the
    measurements.  Raises InconsistentRecovery when no wiring does, which
    signals that the input violates the tree assumptions.
    """
    n = meas.n
    profiles = node_profiles(meas)
    prof = {p.node: p for p in profiles}
    anchors = _unique_parents_ordered(profiles)
    m = len(anchors)
    empty = UnobservedNetwork(meas.names, 0, frozenset())
    if m == 0:
        if meas.has_latent_paths():
            raise InconsistentRecovery("measurements carry latent paths but no unique parent was found")
        return empty

    latent_id = {s: n + pos for pos, s in enumerate(anchors)}
    base_edges: set[tuple[int, int]] = set()
    s1 = meas.supports[1]
    for s in anchors:
        base_edges.add((s, latent_id[s]))
        for j in np.flatnonzero(s1[:, s]):
            base_edges.add((latent_id[s], int(j)))
    for i in range(n):
        for s in anchors:
            if prof[s].m_i <= prof[i].m_i:
                base_edges.add((i, latent_id[s]))

    options: list[list[int | None]] = []
    for s in anchors:
        shifted = {(j, r + 1) for j, r in prof[s].m_i}
        viable = [k for k in anchors if k != s and shifted <= prof[k].m_i]
        exact = [
            k
            for k in viable
            if prof[k].l_i == prof[s].l_i + 1 and prof[s].r_i <= prof[k].r_i
        ]
        rest = sorted((k for k in viable if k not in exact), key=lambda k: (prof[k].l_i, k))
        options.append([*exact, *rest, None])

    tried = 0
    for assignment in itertools.product(*options):
        tried += 1
        if tried > _DTR_SEARCH_LIMIT:
            raise InconsistentRecovery("tree-assignment search exceeded its limit")
        edges = set(base_edges)
        for s, parent in zip(anchors, assignment):
            if parent is not None:
                edges.add((latent_id[parent], latent_id[s]))
        candidate = UnobservedNetwork(meas.names, m, frozenset(edges))
        if consistent(candidate, meas):
            return candidate
    raise InconsistentRecovery("no latent tree reproduces the measurements")


def distance_matrix(meas: LinearMeasurements) -> DistanceMatrix:
    """d[i, j] = k + 1 where S_k[j, i] = 1 (k >= 1); one length per pair."""
    n = meas.n
    d = np.zeros((n, n), dtype=int)
    for k in range(1, meas.max_k + 1):
        for j, i in zip(*np.nonzero(meas.supports[k])):
            if d[i, j] != 0:
                raise AmbiguousDistance(
                    f"pair ({i}, {j}) has latent paths of lengths {d[i, j]} and {k + 1}"
                )
            d[i, j] = k + 1
    return DistanceMatrix(d)


def connected_classes(meas: LinearMeasurements) -> list[frozenset[int]]:
    """Components of the undirected share-a-latent-path graph.

    Nodes without any incident latent path are omitted; classes come back
    ordered by their smallest member.
    """
    n = meas.n
    und = np.zeros((n, n), dtype=bool)
    for s in meas.supports[1:]:
        und |= s.astype(bool) | s.astype(bool).T
    incident = und.any(axis=0)
    classes = []
    seen: set[int] = set()
    for start in range(n):
        if not incident[start] or start in seen:
            continue
        comp = {start}
        stack = [start]
        while stack:
            u = stack.pop()
            for v in np.flatnonzero(und[u]):
                if int(v) not in comp:
                    comp.add(int(v))
                    stack.append(int(v))
        seen |= comp
        classes.append(frozenset(comp))
    return classes


def init_graph(meas: LinearMeasurements, cls: frozenset[int], cap: int = DEFAULT_CAP) -> UnobservedNetwork:
    """Initial merge graph: one private latent chain per measurement entry.

    Every S_r[j, i] = 1 with i, j in the class contributes r fresh latent
    nodes forming a path i -> ... -> j of length r + 1.
    """
    n = meas.n
    members = sorted(cls)
    needed = 0
    ones = []
    for k in range(1, meas.max_k + 1):
        s = meas.supports[k]
        for i in members:
            for j in members:
                if s[j, i]:
                    ones.append((k, i, j))
                    needed += k
    if needed > cap:
        raise CapExceeded(f"initial graph needs {needed} latent nodes, cap is {cap}")
    edges: set[tuple[int, int]] = set()
    m = 0
    for k, i, j in ones:
        chain = [i] + [n + m + t for t in range(k)] + [j]
        m += k
        edges.update(zip(chain, chain[1:]))
    return UnobservedNetwork(meas.names, m, frozenset(edges))


def merge(g: UnobservedNetwork, u: int, v: int) -> UnobservedNetwork:
    """Contract latent v into latent u: drop the pair's mutual edges, hand
    v's remaining parents and children to u, and renumber the latents."""
    if u == v or not (g.is_latent(u) and g.is_latent(v)):
        raise ValueError("merge needs two distinct latent node ids")
    edges = set()
    for a, b in g.edges:
        if {a, b} == {u, v}:
            continue
        edges.add((u if a == v else a, u if b == v else b))
    shifted = {
        (a - 1 if a > v else a, b - 1 if b > v else b) for a, b in edges
    }
    return UnobservedNetwork(g.observed, g.latent_count - 1, frozenset(shifted))


def check(g: UnobservedNetwork, u: int, v: int, meas: LinearMeasurements) -> bool:
    """Whether merging u and v keeps the latent subgraph acyclic and the
    census equal to the measurements."""
    merged = merge(g, u, v)
    return merged.latent_subgraph_is_dag() and consistent(merged, meas)


def _restrict(meas: LinearMeasurements, cls: frozenset[int]) -> LinearMeasurements:
    """Measurements with every latent entry outside cls x cls zeroed out."""
    mask = np.zeros(meas.n, dtype=bool)
    mask[list(cls)] = True
    outer = np.outer(mask, mask).astype(np.uint8)
    supports = [np.zeros((meas.n, meas.n), dtype=np.uint8)]
    supports += [s * outer for s in meas.supports[1:]]
    return LinearMeasurements(meas.n, supports, meas.names)


def _network_blocks(g: UnobservedNetwork) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(obs->latent, latent->latent, latent->obs) integer blocks of a network."""
    _, a_ol, a_ll, a_lo = g.adjacency_blocks()
    return a_ol.astype(np.int64), a_ll.astype(np.int64), a_lo.astype(np.int64)


def _merge_blocks(p, b, q, x: int, y: int):
    """Block form of merge(): fold latent y into latent x, drop their mutual
    edges, remove y's row/column."""
    p2 = p.copy()
    p2[x] |= p2[y]
    b2 = b.copy()
    b2[x] |= b2[y]
    b2[:, x] |= b2[:, y]
    b2[x, x] = 0  # edges between the merged pair vanish
    q2 = q.copy()
    q2[:, x] |= q2[:, y]
    keep = [z for z in range(b.shape[0]) if z != y]
    return p2[keep], b2[np.ix_(keep, keep)], q2[:, keep]


def _blocks_acyclic(b: np.ndarray) -> bool:
    m = b.shape[0]
    indeg = b.sum(axis=1)
    ready = [z for z in range(m) if indeg[z] == 0]
    seen = 0
    while ready:
        z = ready.pop()
        seen += 1
        for w in np.flatnonzero(b[:, z]):
            indeg[w] -= 1
            if indeg[w] == 0:
                ready.append(int(w))
    return seen == m


def _blocks_valid(p, b, q, supports) -> bool:
    """Census of the block-form network equals ``supports`` (the S_1.. list)
    entrywise with at most one path per pair and length."""
    m = b.shape[0]
    reach = p
    for s in supports:
        cnt = q @ reach
        if (cnt > 1).any() or not np.array_equal(cnt > 0, s):
            return False
        reach = b @ reach
    for _ in range(m):
        if not reach.any():
            return True
        if (q @ reach).any():
            return False
        reach = b @ reach
    return not reach.any()


def _blocks_to_network(names, p, b, q) -> UnobservedNetwork:
    n = len(names)
    edges = set()
    for z, i in zip(*np.nonzero(p)):
        edges.add((int(i), n + int(z)))
    for z2, z1 in zip(*np.nonzero(b)):
        edges.add((n + int(z1), n + int(z2)))
    for j, z in zip(*np.nonzero(q)):
        edges.add((n + int(z), int(j)))
    return UnobservedNetwork(names, b.shape[0], frozenset(edges))


def _disjoint_union(names: tuple[str, ...], nets: tuple[UnobservedNetwork, ...]) -> UnobservedNetwork:
    n = len(names)
    edges: set[tuple[int, int]] = set()
    offset = 0
    for g in nets:
        for a, b in g.edges:
            edges.add((a + offset if a >= n else a, b + offset if b >= n else b))
        offset += g.latent_count
    return UnobservedNetwork(names, offset, frozenset(edges))


def nm(meas: LinearMeasurements, cap: int = DEFAULT_CAP) -> list[UnobservedNetwork]:
    """Node-merging search for all minimal consistent unobserved networks.

    Per connected class: start from the private-path graph and, level by
    level, collect every valid merge of the previous level (canonical-form
    deduplicated); the last non-empty level holds that class's minimal
    networks.  The search stays inside the single-path-per-length universe
    the merge operation lives in: a merge result with duplicated same-length
    paths is dropped (splitting such a node back would not reproduce the
    private-path graph, so no minimal in-universe network is lost).  Classes
    combine by disjoint union; output is sorted by canonical key.
    """
    classes = connected_classes(meas)
    per_class: list[list[UnobservedNetwork]] = []
    for cls in classes:
        meas_c = _restrict(meas, cls)
        targets = [s.astype(bool) for s in meas_c.supports[1:]]
        g0 = init_graph(meas, cls, cap)
        g0_key = canonical_form(g0).key
        state = MergeSearchState(0, {g0_key: g0})
        blocks = {g0_key: _network_blocks(g0)}
        final = state.frontier
        while True:
            nxt: dict[bytes, UnobservedNetwork] = {}
            nxt_blocks: dict[bytes, tuple] = {}
            for key, g in state.frontier.items():
                p, b, q = blocks[key]
                m = b.shape[0]
                for x, y in itertools.combinations(range(m), 2):
                    p2, b2, q2 = _merge_blocks(p, b, q, x, y)
                    if not (_blocks_acyclic(b2) and _blocks_valid(p2, b2, q2, targets)):
                        continue
                    merged = _blocks_to_network(meas.names, p2, b2, q2)
                    mkey = canonical_form(merged).key
                    if mkey not in nxt:
                        nxt[mkey] = merged
                        nxt_blocks[mkey] = (p2, b2, q2)
            if not nxt:
                break
            state = MergeSearchState(state.level + 1, nxt)
            blocks = nxt_blocks
            final = nxt
        per_class.append([g for _, g in sorted(final.items())])
    if not per_class:
        return [UnobservedNetwork(meas.names, 0, frozenset())]
    combos = {}
    for choice in itertools.product(*per_class):
        g = _disjoint_union(meas.names, choice)
        combos[canonical_form(g).key] = g
    return [g for _, g in sorted(combos.items())]


def _latent_skeleton_is_forest(g: UnobservedNetwork) -> bool:
    parent = {z: z for z in g.latent_ids}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in g.latent_edges:
        ra, rb = find(a), find(b)
        if ra == rb:
            return False
        parent[ra] = rb
    return True


def recover_tree(meas: LinearMeasurements) -> UnobservedNetwork:
    """Unique tree realization of the measurements.

    Valid when the unobserved network is a directed tree and every latent
    node has at least two parents and two children: the minimal networks are
    searched and the single candidate passing the tree and degree filters is
    returned.  Raises NotIdentifiable when zero or several survive and
    AmbiguousDistance when the measurements cannot come from a tree at all.
    """
    distance_matrix(meas)
    keep = []
    for g in nm(meas):
        if not _latent_skeleton_is_forest(g):
            continue
        if all(len(g.parents(z)) >= 2 and len(g.children(z)) >= 2 for z in g.latent_ids):
            keep.append(g)
    if len(keep) != 1:
        raise NotIdentifiable(f"{len(keep)} candidate networks satisfy the tree conditions")
    return keep[0]


def _latent_dags_up_to_iso(m: int) -> list[np.ndarray]:
    """Strictly lower-triangular adjacency masks, one per latent isomorphism class."""
    pairs = [(r, c) for r in range(m) for c in range(r)]
    seen: set[bytes] = set()
    out = []
    for bits in range(1 << len(pairs)):
        adj = np.zeros((m, m), dtype=bool)
        for idx, (r, c) in enumerate(pairs):
            if bits >> idx & 1:
                adj[r, c] = True  # edge c -> r
        g = UnobservedNetwork(
            (), m, frozenset((int(c), int(r)) for r, c in zip(*np.nonzero(adj)))
        )
        key = canonical_form(g).key
        if key not in seen:
            seen.add(key)
            out.append(adj)
    return out


def _submasks(mask: int):
    """All subsets of a bitmask, including 0."""
    sub = mask
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask


def _enumerate_consistent(meas: LinearMeasurements, m: int) -> list[UnobservedNetwork]:
    """All consistent networks with exactly m latent nodes.

    For each latent DAG shape, backtracks over per-latent (observed parent
    set, observed child set) bitmask pairs.  Pruning is sound: a pair
    (i in parents(u), j in children(v)) forces a latent path of every length
    the DAG admits between u and v, so it is allowed only where the matching
    supports are 1; requirements are checked once all pairs that could cover
    them are assigned.  Survivors are confirmed with consistent().
    """
    n = meas.n
    k_meas = meas.max_k
    required = [
        (k, int(i), int(j))
        for k in range(1, k_meas + 1)
        for j, i in zip(*np.nonzero(meas.supports[k]))
    ]
    full_mask = (1 << n) - 1
    # scol[k][i]: targets j with S_k[j, i] = 1, as a bitmask
    scol = [
        [int(sum(1 << int(j) for j in np.flatnonzero(meas.supports[k][:, i]))) for i in range(n)]
        for k in range(k_meas + 1)
    ]
    solutions: list[UnobservedNetwork] = []

    for adj in _latent_dags_up_to_iso(m):
        # path-length sets between latent pairs, from boolean powers
        paths = [np.eye(m, dtype=bool)]
        while paths[-1].any():
            paths.append((adj.astype(np.uint8) @ paths[-1].astype(np.uint8)) > 0)
        paths.pop()
        depth: dict[tuple[int, int], list[int]] = {}
        for u in range(m):
            for v in range(m):
                ds = [d for d, mat in enumerate(paths) if mat[v, u]]
                if ds:
                    depth[(u, v)] = ds
        # a too-long chain always forces an out-of-range path: its endpoints
        # have no latent parents/children, so they need observed ones
        if any(d + 1 > k_meas for ds in depth.values() for d in ds):
            continue
        if any(
            all((k - 1) not in ds for ds in depth.values()) for k, _, _ in required
        ):
            continue
        indeg = adj.sum(axis=1)
        outdeg = adj.sum(axis=0)

        colmask = {
            pair: [_and_all(scol[d + 1][i] for d in ds) for i in range(n)]
            for pair, ds in depth.items()
        }
        target_cache: dict[tuple[int, int, int], int] = {}

        def allowed_targets(pair: tuple[int, int], p: int) -> int:
            key = (pair[0], pair[1], p)
            got = target_cache.get(key)
            if got is None:
                cols = colmask[pair]
                got = full_mask
                for i in range(n):
                    if p >> i & 1:
                        got &= cols[i]
                target_cache[key] = got
            return got

        # static bit filters: source i at u is impossible when a descendant v
        # that is forced to keep observed children admits no target for i;
        # dually for target bits under forced-parent ancestors
        p_allow = [full_mask] * m
        q_allow = [full_mask] * m
        for (u, v), cols in colmask.items():
            if outdeg[v] == 0:
                for i in range(n):
                    if cols[i] == 0:
                        p_allow[u] &= ~(1 << i)
            if indeg[u] == 0:
                for j in range(n):
                    if not any(cols[i] >> j & 1 for i in range(n)):
                        q_allow[v] &= ~(1 << j)

        cover_pairs: list[list[tuple[int, int]]] = []
        deadlines: dict[int, list[int]] = {}
        for ridx, (k, _, _) in enumerate(required):
            prs = [pair for pair, ds in depth.items() if (k - 1) in ds]
            cover_pairs.append(prs)
            deadlines.setdefault(max(max(pair) for pair in prs), []).append(ridx)

        pmask = [0] * m
        qmask = [0] * m
        covered = [False] * len(required)

        def backtrack(z: int):
            if z == m:
                edges = set()
                for zz in range(m):
                    for i in range(n):
                        if pmask[zz] >> i & 1:
                            edges.add((i, n + zz))
                    for j in range(n):
                        if qmask[zz] >> j & 1:
                            edges.add((n + zz, j))
                for r, c in zip(*np.nonzero(adj)):
                    edges.add((n + int(c), n + int(r)))
                g = UnobservedNetwork(meas.names, m, frozenset(edges))
                if consistent(g, meas) and single_path_per_length(g):
                    solutions.append(g)
                return
            for p in _submasks(p_allow[z]):
                if p == 0 and indeg[z] == 0:
                    continue
                if any(
                    (z, u) in colmask and qmask[u] & ~allowed_targets((z, u), p)
                    for u in range(z)
                ):
                    continue
                qlim = q_allow[z] & allowed_targets((z, z), p)
                for u in range(z):
                    if (u, z) in colmask:
                        qlim &= allowed_targets((u, z), pmask[u])
                for q in _submasks(qlim):
                    if q == 0 and outdeg[z] == 0:
                        continue
                    pmask[z], qmask[z] = p, q
                    newly = []
                    feasible = True
                    for ridx in deadlines.get(z, []):
                        if covered[ridx]:
                            continue
                        _, i, j = required[ridx]
                        if any(
                            pmask[u] >> i & 1 and qmask[v] >> j & 1
                            for u, v in cover_pairs[ridx]
                        ):
                            covered[ridx] = True
                            newly.append(ridx)
                        else:
                            feasible = False
                            break
                    if feasible:
                        backtrack(z + 1)
                    for ridx in newly:
                        covered[ridx] = False
            pmask[z] = qmask[z] = 0

        backtrack(0)
    return solutions


def _and_all(masks) -> int:
    out = None
    for v in masks:
        out = v if out is None else out & v
    return out if out is not None else 0


def oracle_minimal(meas: LinearMeasurements, m_max: int) -> list[UnobservedNetwork]:
    """Exhaustive minimal-network search for verification at small scale.

    Enumerates every latent-DAG network with up to m_max latent nodes (up to
    canonical form), keeps the consistent ones within the merge search's
    universe (at most one latent path per length between any ordered pair;
    networks outside it are unreachable by node merges), and returns those
    with the smallest latent count, sorted by canonical key.
    """
    if meas.n > ORACLE_MAX_N or m_max > ORACLE_MAX_M or meas.max_k > ORACLE_MAX_K:
        raise ScaleExceeded(
            f"oracle limited to n <= {ORACLE_MAX_N}, m_max <= {ORACLE_MAX_M}, K <= {ORACLE_MAX_K}"
        )
    if not meas.has_latent_paths():
        return [UnobservedNetwork(meas.names, 0, frozenset())]
    start = meas.max_k  # a length-(k+1) path needs k interior latents
    for m in range(start, m_max + 1):
        sols = _enumerate_consistent(meas, m)
        if sols:
            dedup = {canonical_form(g).key: g for g in sols}
            return [g for _, g in sorted(dedup.items())]
    return []
