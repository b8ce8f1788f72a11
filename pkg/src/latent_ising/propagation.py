"""Belief propagation and mirror belief propagation on the latent graph.

Standard sum-product messages run between pairwise factors and nodes.  A
node whose belief is pinned to b* does not relay information: it reflects
each factor's message back as b* / m, so at a fixed point its belief equals
b* exactly while the rest of the graph re-balances around it.

The schedule is a deterministic sequential sweep over directed
(factor, endpoint) message slots in fixed order; convergence is declared
when the largest message change over a sweep drops below the tolerance.
Non-convergence is reported, never raised.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coding import build_decoder
from .ising import GraphTopology, LatentIsingModel

_FLOOR = 1e-12  # divisor floor for mirror ratios against vanishing messages

__all__ = [
    "Schedule",
    "ConvergenceReport",
    "BeliefState",
    "Engine",
    "bp_run",
    "mbp_run",
    "impose_observations",
    "predict",
    "graph_cut_check",
]


@dataclass(frozen=True)
class Schedule:
    """Sweep parameters.

    Damping 0 is a pure update; tol is the L-inf message change per sweep
    below which the run stops.  ``mode`` picks the traversal: sequential
    sweeps update slots in place in fixed (factor, endpoint) order, the
    synchronous mode updates every slot from the previous sweep's messages
    with vectorized arithmetic (same fixed points, faster on large graphs).
    ``auto_damp`` engages damping 0.5 mid-run if the residual plateaus,
    which rescues period-2 message oscillations without changing the fixed
    point; it stays off by default so that pure-update dynamics (and their
    instabilities, which the temperature calibration deliberately probes)
    are observable.
    """

    damping: float = 0.0
    max_sweeps: int = 10_000
    tol: float = 1e-9
    mode: str = "sequential"
    auto_damp: bool = False

    def __post_init__(self):
        if not 0.0 <= self.damping < 1.0:
            raise ValueError("damping must lie in [0, 1)")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be positive")
        if self.mode not in ("sequential", "synchronous"):
            raise ValueError(f"unknown schedule mode: {self.mode!r}")


@dataclass(frozen=True)
class ConvergenceReport:
    converged: bool
    sweeps: int
    residual: float


@dataclass(frozen=True)
class BeliefState:
    """Converged (or last-sweep) messages and beliefs.

    ``node_beliefs[i, s]`` and ``edge_beliefs[e, s_i, s_j]`` are normalized;
    ``messages[e, 0]`` flows toward the first endpoint of edge e,
    ``messages[e, 1]`` toward the second.  Constrained nodes carry their
    imposed belief.
    """

    node_beliefs: np.ndarray
    edge_beliefs: np.ndarray | None
    messages: np.ndarray
    constraints: dict = field(default_factory=dict)


class Engine:
    """Reusable sweep engine bound to one model.

    Building the engine precomputes flat slot structures; individual runs
    (with different constraints or warm-started messages) then avoid any
    per-run graph work.  One engine instance is single-threaded; separate
    runs on separate engines may proceed concurrently.
    """

    def __init__(self, model: LatentIsingModel):
        self.model = model
        topo = model.topology
        n_edges = topo.n_edges
        self.n_slots = 2 * n_edges

        src = [0] * self.n_slots
        coef = [None] * self.n_slots
        for e, (i, j) in enumerate(topo.edges):
            p = model.psi[e]
            # slot 2e sends toward i (source j); slot 2e+1 toward j (source i)
            src[2 * e] = j
            coef[2 * e] = (p[0, 0], p[0, 1], p[1, 0], p[1, 1])
            src[2 * e + 1] = i
            coef[2 * e + 1] = (p[0, 0], p[1, 0], p[0, 1], p[1, 1])

        in_slots = [[] for _ in range(topo.n_nodes)]
        for e, (i, j) in enumerate(topo.edges):
            in_slots[i].append(2 * e)
            in_slots[j].append(2 * e + 1)
        self.in_slots = in_slots
        # incoming slots of the source node, excluding the slot's own edge
        self.src_in = [
            [s2 for s2 in in_slots[src[s]] if s2 // 2 != s // 2]
            for s in range(self.n_slots)
        ]
        self.src = src
        self.coef = coef
        self.phi0 = [float(model.phi[i, 0]) for i in range(topo.n_nodes)]
        self.phi1 = [float(model.phi[i, 1]) for i in range(topo.n_nodes)]

        # vectorized layout for the synchronous mode
        self._src_arr = np.asarray(src, dtype=np.intp)
        self._opp_arr = np.arange(self.n_slots, dtype=np.intp) ^ 1
        self._coef_arr = np.asarray(coef, dtype=float).reshape(self.n_slots, 2, 2)
        order = [s for slots in in_slots for s in slots]
        self._order = np.asarray(order, dtype=np.intp)
        degrees = np.asarray([len(slots) for slots in in_slots], dtype=np.intp)
        self._active_nodes = np.flatnonzero(degrees > 0)
        self._seg_starts = np.concatenate(
            ([0], np.cumsum(degrees[self._active_nodes])[:-1])
        ) if self._active_nodes.size else np.empty(0, dtype=np.intp)

    def run(self, constraints=None, schedule: Schedule | None = None,
            init_messages=None, with_edge_beliefs: bool = True):
        """Sweep to a fixed point; returns (BeliefState, ConvergenceReport).

        ``with_edge_beliefs=False`` skips pair-belief assembly, which
        matters in tight experiment loops that only read node beliefs.
        """
        schedule = schedule or Schedule()
        constraints = dict(constraints or {})

        n_nodes = self.model.topology.n_nodes
        bstar0 = [0.0] * n_nodes
        bstar1 = [0.0] * n_nodes
        pinned = [False] * n_nodes
        for i, b in constraints.items():
            vec = np.asarray(b, dtype=float)
            total = vec.sum()
            if vec.shape != (2,) or np.any(vec < 0.0) or total <= 0.0:
                raise ValueError(f"invalid constraint at node {i}")
            pinned[i] = True
            bstar0[i] = float(vec[0] / total)
            bstar1[i] = float(vec[1] / total)

        if init_messages is None:
            init = np.full((self.n_slots, 2), 0.5)
        else:
            init = np.asarray(init_messages, dtype=float).reshape(self.n_slots, 2)
            norm = init.sum(axis=1, keepdims=True)
            if np.any(init < 0.0) or np.any(norm <= 0.0):
                raise ValueError("invalid initial messages")
            init = init / norm

        if schedule.mode == "synchronous":
            m0, m1, converged, sweeps, residual = self._sweep_synchronous(
                init, pinned, bstar0, bstar1, schedule
            )
        else:
            m0, m1, converged, sweeps, residual = self._sweep_sequential(
                init, pinned, bstar0, bstar1, schedule
            )

        state = self._beliefs(
            m0, m1, pinned, bstar0, bstar1, constraints, with_edge_beliefs
        )
        return state, ConvergenceReport(converged, sweeps, float(residual))

    def _sweep_sequential(self, init, pinned, bstar0, bstar1, schedule: Schedule):
        m0 = init[:, 0].tolist()
        m1 = init[:, 1].tolist()
        src = self.src
        coef = self.coef
        src_in = self.src_in
        phi0, phi1 = self.phi0, self.phi1
        gamma = schedule.damping
        tol = schedule.tol
        floor = _FLOOR

        converged = False
        residual = np.inf
        plateau_ref = np.inf
        sweeps = 0
        for sweeps in range(1, schedule.max_sweeps + 1):
            delta = 0.0
            for s in range(self.n_slots):
                u = src[s]
                if pinned[u]:
                    opp = s ^ 1
                    d0 = m0[opp]
                    d1 = m1[opp]
                    n0 = bstar0[u] / (d0 if d0 > floor else floor)
                    n1 = bstar1[u] / (d1 if d1 > floor else floor)
                else:
                    n0 = phi0[u]
                    n1 = phi1[u]
                    for s2 in src_in[s]:
                        n0 *= m0[s2]
                        n1 *= m1[s2]
                c = coef[s]
                t0 = c[0] * n0 + c[1] * n1
                t1 = c[2] * n0 + c[3] * n1
                tot = t0 + t1
                t0 /= tot
                t1 /= tot
                if gamma:
                    t0 = (1.0 - gamma) * t0 + gamma * m0[s]
                    t1 = (1.0 - gamma) * t1 + gamma * m1[s]
                d = t0 - m0[s]
                if d < 0.0:
                    d = -d
                if d > delta:
                    delta = d
                d = t1 - m1[s]
                if d < 0.0:
                    d = -d
                if d > delta:
                    delta = d
                m0[s] = t0
                m1[s] = t1
            residual = delta
            if delta < tol:
                converged = True
                break
            if schedule.auto_damp and sweeps % 20 == 0:
                if sweeps >= 40 and residual > max(100 * tol, 1e-10) \
                        and residual > 0.93 * plateau_ref:
                    gamma = 0.5 + 0.5 * gamma  # escalate on a true plateau
                plateau_ref = residual
        return m0, m1, converged, sweeps, residual

    def _sweep_synchronous(self, init, pinned, bstar0, bstar1, schedule: Schedule):
        m = np.maximum(init, 1e-30)
        src = self._src_arr
        opp = self._opp_arr
        c = self._coef_arr
        c00, c01 = c[:, 0, 0], c[:, 0, 1]
        c10, c11 = c[:, 1, 0], c[:, 1, 1]
        phi = self.model.phi
        gamma = schedule.damping
        tol = schedule.tol

        pin_slots = np.flatnonzero(np.asarray(pinned, dtype=bool)[src])
        if pin_slots.size:
            bstar = np.column_stack([bstar0, bstar1])
            bstar_pin = bstar[src[pin_slots]]
            opp_pin = opp[pin_slots]

        converged = False
        residual = np.inf
        plateau_ref = np.inf
        sweeps = 0
        m_new = np.empty_like(m)
        for sweeps in range(1, schedule.max_sweeps + 1):
            prod = phi.copy()
            if self._active_nodes.size:
                prod[self._active_nodes] *= np.multiply.reduceat(
                    m[self._order], self._seg_starts, axis=0
                )
            n = prod[src]
            n /= m[opp]
            if pin_slots.size:
                n[pin_slots] = bstar_pin / np.maximum(m[opp_pin], _FLOOR)
            n0, n1 = n[:, 0], n[:, 1]
            t0 = c00 * n0 + c01 * n1
            t1 = c10 * n0 + c11 * n1
            tot = t0 + t1
            m_new[:, 0] = t0 / tot
            m_new[:, 1] = t1 / tot
            np.maximum(m_new, 1e-30, out=m_new)
            if gamma:
                m_new *= 1.0 - gamma
                m_new += gamma * m
            residual = float(np.abs(m_new - m).max())
            m, m_new = m_new, m
            if residual < tol:
                converged = True
                break
            if schedule.auto_damp and sweeps % 20 == 0:
                if sweeps >= 40 and residual > max(100 * tol, 1e-10) \
                        and residual > 0.93 * plateau_ref:
                    gamma = 0.5 + 0.5 * gamma  # escalate on a true plateau
                plateau_ref = residual
        return m[:, 0].tolist(), m[:, 1].tolist(), converged, sweeps, residual

    def _node_to_factor(self, m0, m1, pinned, bstar0, bstar1, s):
        """n message along slot s's reverse direction (source node -> factor)."""
        u = self.src[s]
        if pinned[u]:
            opp = s ^ 1
            d0, d1 = m0[opp], m1[opp]
            return (bstar0[u] / (d0 if d0 > _FLOOR else _FLOOR),
                    bstar1[u] / (d1 if d1 > _FLOOR else _FLOOR))
        n0, n1 = self.phi0[u], self.phi1[u]
        for s2 in self.src_in[s]:
            n0 *= m0[s2]
            n1 *= m1[s2]
        return n0, n1

    def _beliefs(self, m0, m1, pinned, bstar0, bstar1, constraints,
                 with_edge_beliefs=True):
        topo = self.model.topology
        n_nodes = topo.n_nodes
        node_beliefs = np.empty((n_nodes, 2))
        for i in range(n_nodes):
            if pinned[i]:
                node_beliefs[i] = (bstar0[i], bstar1[i])
                continue
            b0, b1 = self.phi0[i], self.phi1[i]
            for s in self.in_slots[i]:
                b0 *= m0[s]
                b1 *= m1[s]
            tot = b0 + b1
            node_beliefs[i] = (b0 / tot, b1 / tot)

        edge_beliefs = None
        if with_edge_beliefs:
            edge_beliefs = np.empty((topo.n_edges, 2, 2))
            for e in range(topo.n_edges):
                # n from i flows through slot 2e+1 (whose source is i), and
                # n from j through slot 2e
                ni = self._node_to_factor(m0, m1, pinned, bstar0, bstar1, 2 * e + 1)
                nj = self._node_to_factor(m0, m1, pinned, bstar0, bstar1, 2 * e)
                table = self.model.psi[e] * np.outer(ni, nj)
                edge_beliefs[e] = table / table.sum()

        messages = np.array([m0, m1]).T.reshape(topo.n_edges, 2, 2)
        return BeliefState(node_beliefs, edge_beliefs, messages, constraints)


def bp_run(model: LatentIsingModel, schedule: Schedule | None = None,
           init_messages=None):
    """Plain belief propagation: no constraints."""
    return Engine(model).run(None, schedule, init_messages)


def mbp_run(model: LatentIsingModel, constraints, schedule: Schedule | None = None,
            init_messages=None):
    """Belief propagation with imposed beliefs at the constrained nodes."""
    return Engine(model).run(constraints, schedule, init_messages)


def impose_observations(model: LatentIsingModel, observed: dict) -> dict:
    """Encode observed values into belief constraints.

    Returns per-node vectors indexed by state: [b*(0), b*(1)] with
    b*(1) = Lambda_i(x_i).
    """
    if model.encoders is None:
        raise ValueError("model carries no encoders")
    out = {}
    for i, x in observed.items():
        lam = model.encoders[i].encode(x)
        out[int(i)] = np.array([1.0 - lam, lam])
    return out


def predict(model: LatentIsingModel, beliefs: BeliefState,
            decoder: str = "inverse-cdf", observed=None) -> dict:
    """Decode beliefs into real predictions for the unobserved nodes."""
    if model.encoders is None:
        raise ValueError("model carries no encoders")
    skip = set(beliefs.constraints) if observed is None else set(observed)
    out = {}
    for i in range(model.topology.n_nodes):
        if i in skip:
            continue
        dec = build_decoder(decoder, model.encoders[i])
        out[i] = float(dec.decode(beliefs.node_beliefs[i, 1]))
    return out


def graph_cut_check(factors, constrained) -> str:
    """Convergence diagnostic by cutting the factor graph at the
    constrained nodes.

    Each constrained variable is cloned into one leaf per incident factor.
    If every connected component of the cut graph is a tree containing at
    most two clones, the mirror updates are guaranteed to converge
    (``guaranteed``); otherwise nothing is claimed (``unknown``).
    """
    if isinstance(factors, GraphTopology):
        factors = factors.factors()
    factors = [tuple(f) for f in factors]
    constrained = set(constrained)

    parent: dict = {}

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
            return True
        return False

    clones = []

    def add_vertex(v):
        if v not in parent:
            parent[v] = v

    for f_idx, members in enumerate(factors):
        fv = ("f", f_idx)
        add_vertex(fv)
        for i in members:
            if i in constrained:
                vv = ("c", i, f_idx)
                clones.append(vv)
            else:
                vv = ("v", i)
            add_vertex(vv)
            if not union(fv, vv):
                return "unknown"  # a cycle survives the cutting

    clone_count: dict = {}
    for v in clones:
        r = find(v)
        clone_count[r] = clone_count.get(r, 0) + 1
    if any(c > 2 for c in clone_count.values()):
        return "unknown"
    return "guaranteed"
