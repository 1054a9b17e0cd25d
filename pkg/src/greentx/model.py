"""Joint decision model over (buffer, channel, radio) with a transmission grid.

State: buffer occupancy b in 0..capacity, quantized channel index h, radio
state x. Action: a quality level on the PLR grid, a radio command y, and a
packet count z. Transmitting (z > 0) requires the radio on and kept on, and
no more packets than the buffer holds.

Everything the solvers need is precomputed here as stacked arrays indexed by
the global action list, which is ordered canonically: radio command first,
then z ascending, then PLR ascending. Ties in any argmin are broken toward
the earliest action in this order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, FeasibilityError
from .phy import BepLevel, ChannelState, PhyConfig, bits_per_symbol, goodput_pmf, tx_power
from .power import PmAction, PowerProfile, PowerState, pm_transition_pmf
from .queueing import (
    ArrivalDistribution,
    QueueConfig,
    buffer_transition_pmf,
    expected_overflow,
)


@dataclass(frozen=True)
class State:
    """Pre-decision state at the start of a slot."""

    b: int
    h: int
    x: PowerState


@dataclass(frozen=True)
class Action:
    """Transmission quality, radio command, and packet count for one slot.

    ``bep`` is a placeholder (lowest-PLR grid entry) when z == 0.
    """

    bep: BepLevel
    y: PmAction
    z: int


class JointModel:
    """Finite MDP assembled from the channel, queue, radio, and PHY pieces."""

    def __init__(
        self,
        *,
        gains_db,
        channel_matrix,
        arrivals: ArrivalDistribution,
        phy: PhyConfig,
        profile: PowerProfile,
        queue: QueueConfig,
        plr_grid,
        z_max: int,
        gamma: float,
        mu: float = 0.0,
    ) -> None:
        self.gains_db = np.asarray(gains_db, dtype=np.float64)
        self.channel_matrix = np.asarray(channel_matrix, dtype=np.float64)
        self.arrivals = arrivals
        self.phy = phy
        self.profile = profile
        self.queue = queue
        self.plr_grid = tuple(float(p) for p in plr_grid)
        self.z_max = int(z_max)
        self.gamma = float(gamma)
        self.mu = float(mu)
        self._validate()
        self._build_grids()
        self._build_tables()

    def _validate(self) -> None:
        if self.gains_db.ndim != 1 or self.gains_db.size == 0:
            raise ConfigError("gains_db must be a nonempty vector")
        n_h = self.gains_db.size
        if self.channel_matrix.shape != (n_h, n_h):
            raise ConfigError("channel matrix must be square and match gains_db")
        if np.any(self.channel_matrix < 0):
            raise ConfigError("channel matrix has negative entries")
        if np.any(np.abs(self.channel_matrix.sum(axis=1) - 1.0) > 1e-12):
            raise ConfigError("channel matrix rows must sum to 1")
        if not (0.0 <= self.gamma < 1.0):
            raise ConfigError("gamma must lie in [0, 1)")
        if self.mu < 0.0:
            raise ConfigError("mu must be nonnegative")
        if self.z_max < 1:
            raise ConfigError("z_max must be at least 1")
        if len(self.plr_grid) == 0 or any(
            not (0.0 < p < 1.0) for p in self.plr_grid
        ):
            raise ConfigError("plr grid entries must lie in (0, 1)")
        if list(self.plr_grid) != sorted(set(self.plr_grid)):
            raise ConfigError("plr grid must be strictly increasing")
        for z in range(1, self.z_max + 1):
            beta = bits_per_symbol(z, self.phy)
            if beta > self.phy.max_bits_per_symbol:
                raise ConfigError(
                    f"z={z} needs {beta} bits/symbol, above the "
                    f"limit {self.phy.max_bits_per_symbol}"
                )

    def _build_grids(self) -> None:
        self.n_b = self.queue.capacity + 1
        self.n_h = self.gains_db.size
        self.n_x = 2
        self.n_s = self.n_b * self.n_h * self.n_x
        self.channel_states = tuple(
            ChannelState(i, float(g)) for i, g in enumerate(self.gains_db)
        )
        self.bep_levels = tuple(
            BepLevel.from_plr(p, self.phy.packet_bits) for p in self.plr_grid
        )
        placeholder = self.bep_levels[0]
        actions: list[Action] = [
            Action(placeholder, PmAction.S_OFF, 0),
            Action(placeholder, PmAction.S_ON, 0),
        ]
        for z in range(1, self.z_max + 1):
            for lvl in self.bep_levels:
                actions.append(Action(lvl, PmAction.S_ON, z))
        self.actions = tuple(actions)
        self.n_a = len(actions)
        self.action_index = {a: i for i, a in enumerate(actions)}
        self.action_z = np.array([a.z for a in actions], dtype=np.int64)
        self.action_y = np.array([int(a.y) for a in actions], dtype=np.int64)
        self.action_plr = np.array([a.bep.plr for a in actions])
        self.action_bep = np.array([a.bep.bep for a in actions])

    def _build_tables(self) -> None:
        n_b, n_h, n_x, n_a = self.n_b, self.n_h, self.n_x, self.n_a
        cap = self.queue.capacity

        # arrivals with the capacity clamp, rows indexed by post-transmission level
        self.A_clamp = np.zeros((n_b, n_b))
        for b_post in range(n_b):
            hi = min(cap - 1 - b_post, self.arrivals.l_max)
            if hi >= 0:
                self.A_clamp[b_post, b_post : b_post + hi + 1] = self.arrivals.pmf[
                    : hi + 1
                ]
            self.A_clamp[b_post, cap] += self.arrivals.pmf[
                max(cap - b_post, 0) :
            ].sum()

        self.o_exp = np.array(
            [expected_overflow(b, self.arrivals, cap) for b in range(n_b)]
        )

        # per-action goodput and radio-state transitions
        self.G_stack = np.zeros((n_a, n_b, n_b))
        self.px_stack = np.zeros((n_a, n_x, n_x))
        for i, a in enumerate(self.actions):
            fp = goodput_pmf(a.z, a.bep.plr)
            for b in range(n_b):
                if a.z > b:
                    self.G_stack[i, b, b] = 1.0  # masked infeasible; keep stochastic
                else:
                    self.G_stack[i, b, b - a.z : b + 1] = fp[::-1]
            for x in (PowerState.OFF, PowerState.ON):
                self.px_stack[i, int(x)] = pm_transition_pmf(
                    x, a.y, self.profile.theta
                )
        self.pb_stack = self.G_stack @ self.A_clamp

        # power draw per (channel, radio state, action); impossible combos -> inf
        self.tx_ha = np.zeros((n_h, n_a))
        for h in range(n_h):
            for i, a in enumerate(self.actions):
                self.tx_ha[h, i] = tx_power(
                    float(self.gains_db[h]), a.bep.bep, a.z, self.phy
                )
        self.rho_hxa = np.zeros((n_h, n_x, n_a))
        for h in range(n_h):
            for x in (PowerState.OFF, PowerState.ON):
                for i, a in enumerate(self.actions):
                    if a.z > 0 and x != PowerState.ON:
                        self.rho_hxa[h, int(x), i] = np.inf
                        continue
                    on_and_kept = x == PowerState.ON and a.y == PmAction.S_ON
                    if on_and_kept:
                        p = self.profile.p_on + self.tx_ha[h, i]
                    elif x == PowerState.OFF and a.y == PmAction.S_OFF:
                        p = self.profile.p_off
                    else:
                        p = self.profile.p_tr
                    self.rho_hxa[h, int(x), i] = p

        # expected holding and drops per (buffer, action)
        bs = np.arange(n_b, dtype=np.float64)[:, None]
        self.hold_ba = bs - (self.action_z * (1.0 - self.action_plr))[None, :]
        self.ovf_ba = np.einsum("abB,B->ba", self.G_stack, self.o_exp)
        self.g_ba = self.hold_ba + self.queue.eta * self.ovf_ba

        z_ok = self.action_z[None, None, :] <= np.arange(n_b)[:, None, None]
        on_needed = (self.action_z[None, None, :] == 0) | (
            np.arange(n_x)[None, :, None] == int(PowerState.ON)
        )
        self.feasible_bxa = z_ok & on_needed
        # same mask expanded to flat state indexing
        self.feasible_sa = np.repeat(
            self.feasible_bxa, n_h, axis=0
        ).reshape(self.n_s, n_a)

    # ---- indexing ----------------------------------------------------------

    def state_index(self, s: State) -> int:
        return (s.b * self.n_h + s.h) * self.n_x + int(s.x)

    def state_of(self, idx: int) -> State:
        idx, x = divmod(idx, self.n_x)
        b, h = divmod(idx, self.n_h)
        return State(b, h, PowerState(x))

    def all_states(self) -> list[State]:
        return [self.state_of(i) for i in range(self.n_s)]

    # ---- feasibility -------------------------------------------------------

    def is_feasible(self, s: State, a: Action) -> bool:
        if a.z == 0:
            return True
        return s.x == PowerState.ON and a.y == PmAction.S_ON and a.z <= s.b

    def feasible_action_indices(self, s: State) -> np.ndarray:
        return np.flatnonzero(self.feasible_bxa[s.b, int(s.x)])

    def feasible_actions(self, s: State) -> list[Action]:
        """Allowed actions in canonical order (y, then z, then PLR)."""
        return [self.actions[i] for i in self.feasible_action_indices(s)]

    # ---- single-pair quantities (reference paths, used heavily in tests) ----

    def joint_transition_pmf(self, s: State, a: Action) -> np.ndarray:
        """One-slot transition pmf over flat state indices."""
        if not self.is_feasible(s, a):
            raise FeasibilityError(f"action {a} infeasible in state {s}")
        pb = buffer_transition_pmf(
            s.b, a.z, a.bep.plr, self.arrivals, self.queue.capacity
        )
        ph = self.channel_matrix[s.h]
        px = pm_transition_pmf(s.x, a.y, self.profile.theta)
        return np.einsum("b,h,x->bhx", pb, ph, px).reshape(self.n_s)

    def power_cost(self, s: State, a: Action) -> float:
        """Expected power draw (watts) for the slot."""
        if not self.is_feasible(s, a):
            raise FeasibilityError(f"action {a} infeasible in state {s}")
        return float(self.rho_hxa[s.h, int(s.x), self.action_index[a]])

    def expected_buffer_cost(self, s: State, a: Action) -> float:
        """Expected holding plus eta-weighted expected drops."""
        if not self.is_feasible(s, a):
            raise FeasibilityError(f"action {a} infeasible in state {s}")
        return float(self.g_ba[s.b, self.action_index[a]])

    def lagrangian_cost(self, s: State, a: Action, mu: float | None = None) -> float:
        """Power plus mu-weighted buffer cost for one slot."""
        m = self.mu if mu is None else mu
        return self.power_cost(s, a) + m * self.expected_buffer_cost(s, a)

    # ---- derived models ------------------------------------------------------

    def _clone(self, **overrides) -> "JointModel":
        kw = dict(
            gains_db=self.gains_db,
            channel_matrix=self.channel_matrix,
            arrivals=self.arrivals,
            phy=self.phy,
            profile=self.profile,
            queue=self.queue,
            plr_grid=self.plr_grid,
            z_max=self.z_max,
            gamma=self.gamma,
            mu=self.mu,
        )
        kw.update(overrides)
        return JointModel(**kw)

    def with_arrivals(self, arrivals: ArrivalDistribution) -> "JointModel":
        return self._clone(arrivals=arrivals)

    def with_channel(self, channel_matrix) -> "JointModel":
        return self._clone(channel_matrix=channel_matrix)

    def with_mu(self, mu: float) -> "JointModel":
        return self._clone(mu=mu)
