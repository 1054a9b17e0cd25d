"""Post-decision reformulation: split each slot at the point where the
controller's own influence ends.

After transmitting f of z packets and settling the radio command, the slot
reaches an intermediate point ("post-decision state") whose distribution and
cost depend only on quantities the controller knows a priori. What remains
(packet arrivals and the channel move) does not depend on the action at all,
so a value table indexed by post-decision states can be learned from samples
without ever estimating those distributions.

Post-decision value tables are kept as (n_b, n_h, n_x) cubes; the matching
pre-decision tables use the planner's flat layout when exchanged with it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, FeasibilityError, InitializationError
from .model import Action, JointModel, State
from .planner import TIE_TOL, greedy_from_q
from .power import PmAction, PowerState
from .queueing import ArrivalDistribution


@dataclass(frozen=True)
class PostDecisionState:
    """Mid-slot state: transmission resolved, arrivals and channel move pending."""

    b: int
    h: int
    x: PowerState


def pds_of(s: State, a: Action, f_realized: int, x_next: PowerState) -> PostDecisionState:
    """Post-decision state reached from s after f deliveries and the radio settle."""
    if not 0 <= f_realized <= a.z:
        raise FeasibilityError(f"delivered f={f_realized} outside [0, z={a.z}]")
    return PostDecisionState(s.b - f_realized, s.h, x_next)


class FactoredDynamics:
    """Known/unknown split of the one-slot dynamics of a JointModel."""

    def __init__(self, model: JointModel) -> None:
        self.model = model

    # ---- the controller-dependent half ----------------------------------

    def known_pmf(self, s: State, a: Action) -> np.ndarray:
        """Distribution over post-decision states, flat state indexing."""
        m = self.model
        if not m.is_feasible(s, a):
            raise FeasibilityError(f"action {a} infeasible in state {s}")
        ai = m.action_index[a]
        pb = m.G_stack[ai, s.b]  # transmission only, no arrivals
        ph = np.zeros(m.n_h)
        ph[s.h] = 1.0  # channel has not moved yet
        px = m.px_stack[ai, int(s.x)]
        return np.einsum("b,h,x->bhx", pb, ph, px).reshape(m.n_s)

    def known_cost(self, s: State, a: Action, mu: float | None = None) -> float:
        """Power plus mu-weighted expected holding (drops are not known yet)."""
        m = self.model
        if not m.is_feasible(s, a):
            raise FeasibilityError(f"action {a} infeasible in state {s}")
        ai = m.action_index[a]
        mu_v = m.mu if mu is None else mu
        return float(m.rho_hxa[s.h, int(s.x), ai] + mu_v * m.hold_ba[s.b, ai])

    # ---- the controller-independent half ---------------------------------

    def unknown_pmf(self, st: PostDecisionState) -> np.ndarray:
        """Distribution over next pre-decision states, flat state indexing."""
        m = self.model
        pb = m.A_clamp[st.b]  # arrivals with the capacity clamp
        ph = m.channel_matrix[st.h]
        px = np.zeros(m.n_x)
        px[int(st.x)] = 1.0  # radio already settled
        return np.einsum("b,h,x->bhx", pb, ph, px).reshape(m.n_s)

    def unknown_cost(self, st: PostDecisionState, mu: float | None = None) -> float:
        """mu-weighted expected drop penalty for arrivals on this buffer level."""
        m = self.model
        mu_v = m.mu if mu is None else mu
        return float(mu_v * m.queue.eta * m.o_exp[st.b])

    def realized_unknown_cost(self, b_post: int, l: int) -> float:
        """Drop penalty for one observed arrival burst (not mu-weighted)."""
        m = self.model
        return m.queue.eta * max(b_post + l - m.queue.capacity, 0)

    # ---- vectorized lookahead over one channel slice ----------------------

    def action_values_slice(
        self, h: int, v_tilde: np.ndarray, mu: float | None = None
    ) -> np.ndarray:
        """Lookahead cost of every action from every (b, x) at channel h.

        Returns (n_b, n_x, n_a) with +inf at infeasible entries:
        known cost plus the post-decision value of where the action lands.
        """
        m = self.model
        mu_v = m.mu if mu is None else mu
        ev = np.einsum(
            "abB,axX,BX->bxa",
            m.G_stack,
            m.px_stack,
            v_tilde[:, h, :],
            optimize=True,
        )
        q = (
            m.rho_hxa[h][None, :, :]
            + mu_v * m.hold_ba[:, None, :]
            + ev
        )
        return np.where(m.feasible_bxa, q, np.inf)

    def state_values_slice(
        self, h: int, v_tilde: np.ndarray, mu: float | None = None
    ) -> tuple[np.ndarray, np.ndarray]:
        """Greedy value and action index for every (b, x) at channel h."""
        q = self.action_values_slice(h, v_tilde, mu)
        vals = q.min(axis=2)
        greedy = np.argmax(q <= vals[:, :, None] + TIE_TOL, axis=2)
        return vals, greedy


def pds_value_iteration(
    factored: FactoredDynamics,
    tol: float = 1e-9,
    max_iters: int = 200_000,
    v0: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Solve the split recursion exactly; returns (post-decision, pre-decision) cubes.

    Alternates the two halves until the pre-decision table stops moving:
    the post-decision table absorbs arrival/channel expectations and the
    discount, the pre-decision table minimizes known cost plus landing value.
    """
    m = factored.model
    shape = (m.n_b, m.n_h, m.n_x)
    v = np.zeros(shape) if v0 is None else v0.reshape(shape).copy()
    c_u = m.mu * m.queue.eta * m.o_exp  # per post-decision buffer level
    rho = np.transpose(m.rho_hxa, (2, 0, 1))  # (a, h, x)
    feas = np.transpose(m.feasible_bxa, (2, 0, 1))[:, :, None, :]  # (a, b, 1, x)
    resid = np.inf
    for _ in range(max_iters):
        v_tilde = c_u[:, None, None] + m.gamma * np.einsum(
            "bB,hH,BHx->bhx", m.A_clamp, m.channel_matrix, v, optimize=True
        )
        ev = np.einsum(
            "abB,axX,BhX->abhx", m.G_stack, m.px_stack, v_tilde, optimize=True
        )
        q = rho[:, None, :, :] + m.mu * m.hold_ba.T[:, :, None, None] + ev
        v_new = np.where(feas, q, np.inf).min(axis=0)
        resid = float(np.max(np.abs(v_new - v)))
        v = v_new
        if resid < tol:
            v_tilde = c_u[:, None, None] + m.gamma * np.einsum(
                "bB,hH,BHx->bhx", m.A_clamp, m.channel_matrix, v, optimize=True
            )
            return v_tilde, v
    raise ConvergenceError(
        f"split value iteration stuck at residual {resid!r} after {max_iters} sweeps"
    )


def policy_from_pds(
    v_tilde: np.ndarray, factored: FactoredDynamics, mu: float | None = None
) -> np.ndarray:
    """Greedy policy induced by a post-decision value table (flat layout).

    Uses the same canonical tie rule as the planner, so at the respective
    fixed points the two routes select identical actions.
    """
    m = factored.model
    q_sa = np.empty((m.n_s, m.n_a))
    for h in range(m.n_h):
        q = factored.action_values_slice(h, v_tilde, mu)  # (n_b, n_x, n_a)
        idx = (np.arange(m.n_b)[:, None] * m.n_h + h) * m.n_x + np.arange(m.n_x)[None, :]
        q_sa[idx.reshape(-1)] = q.reshape(-1, m.n_a)
    return greedy_from_q(q_sa, m.feasible_sa)


def init_pds_values(
    factored: FactoredDynamics,
    assumed_arrivals: ArrivalDistribution,
    assumed_channel: np.ndarray | None = None,
    mu_init: float = 1.0,
    tol: float = 1e-9,
) -> np.ndarray:
    """Offline starting table from assumed arrival/channel statistics.

    The assumed traffic should be heavy enough that staying off fills the
    buffer and drops packets, otherwise the greedy start policy never turns
    the radio on and online learning cannot leave the off state. That
    degenerate case raises InitializationError: retry with a larger assumed
    arrival rate or a positive mu_init.
    """
    m = factored.model
    channel = np.eye(m.n_h) if assumed_channel is None else assumed_channel
    assumed = FactoredDynamics(
        m.with_arrivals(assumed_arrivals).with_channel(channel).with_mu(mu_init)
    )
    v_tilde, _ = pds_value_iteration(assumed, tol=tol)
    greedy_y_off = np.empty((m.n_h, m.n_b), dtype=np.int64)
    for h in range(m.n_h):
        _, greedy = assumed.state_values_slice(h, v_tilde, mu_init)
        greedy_y_off[h] = m.action_y[greedy[:, int(PowerState.OFF)]]
    # Walk the off region as the assumed dynamics see it: buffer moves by
    # arrival bursts of positive probability, channel by the assumed matrix.
    # Only levels reachable from an empty buffer count; a switch-on choice
    # at a level the assumed system never visits cannot wake the radio.
    bursts = [int(l) for l in np.flatnonzero(assumed_arrivals.pmf > 0.0)]
    hops = [np.flatnonzero(channel[h] > 0.0) for h in range(m.n_h)]
    cap = m.queue.capacity
    for h0 in range(m.n_h):
        seen = {(0, h0)}
        frontier = [(0, h0)]
        wakes = False
        while frontier and not wakes:
            b, h = frontier.pop()
            if greedy_y_off[h, b] == int(PmAction.S_ON):
                wakes = True
                break
            for l in bursts:
                nb = min(b + l, cap)
                for nh in hops[h]:
                    nxt = (nb, int(nh))
                    if nxt not in seen:
                        seen.add(nxt)
                        frontier.append(nxt)
        if not wakes:
            raise InitializationError(
                "assumed statistics never favor switching on from the off state; "
                "increase the assumed arrival rate or mu_init"
            )
    return v_tilde
