"""Exact solvers for the joint model: value iteration and policy evaluation.

Value tables are flat float64 vectors over the model's state indexing;
policies are int vectors of global action indices. All argmin extraction
goes through the same tie rule: earliest canonical action within TIE_TOL
of the minimum, so independently computed solutions pick identical actions.
"""
from __future__ import annotations

import numpy as np

from .errors import ConvergenceError
from .model import Action, JointModel, State

# Values within this distance of the row minimum count as tied.
TIE_TOL = 1e-9


def greedy_from_q(q_sa: np.ndarray, feasible_sa: np.ndarray, tie_tol: float = TIE_TOL) -> np.ndarray:
    """First feasible action within tie_tol of each row's minimum."""
    q = np.where(feasible_sa, q_sa, np.inf)
    qmin = q.min(axis=1, keepdims=True)
    return np.argmax(q <= qmin + tie_tol, axis=1)


def _cost_cube(model: JointModel, mu: float) -> np.ndarray:
    """Per-slot cost indexed (a, b, h, x); infeasible entries are +inf."""
    rho = np.transpose(model.rho_hxa, (2, 0, 1))  # (a, h, x)
    cost = rho[:, None, :, :] + mu * model.g_ba.T[:, :, None, None]
    feas = np.transpose(model.feasible_bxa, (2, 0, 1))  # (a, b, x)
    cost = np.where(feas[:, :, None, :], cost, np.inf)
    return cost


def _expected_next_values(model: JointModel, v_cube: np.ndarray) -> np.ndarray:
    """E[V(s') | s, a] indexed (a, b, h, x), using the factored transition."""
    v1 = np.einsum("hH,BHX->BhX", model.channel_matrix, v_cube)
    return np.einsum(
        "abB,axX,BhX->abhx", model.pb_stack, model.px_stack, v1, optimize=True
    )


def q_values(model: JointModel, v: np.ndarray, mu: float | None = None) -> np.ndarray:
    """One-step lookahead values for every (state, action); infeasible -> +inf."""
    m = model.mu if mu is None else mu
    v_cube = v.reshape(model.n_b, model.n_h, model.n_x)
    q = _cost_cube(model, m) + model.gamma * _expected_next_values(model, v_cube)
    return np.transpose(q, (1, 2, 3, 0)).reshape(model.n_s, model.n_a)


def value_iteration(
    model: JointModel,
    tol: float = 1e-9,
    max_iters: int = 200_000,
    v0: np.ndarray | None = None,
    residuals: list | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Solve the discounted control problem to sup-norm residual below tol.

    Returns (value table, greedy policy). Raises ConvergenceError if the
    residual is still above tol after max_iters sweeps.
    """
    shape = (model.n_b, model.n_h, model.n_x)
    v_cube = np.zeros(shape) if v0 is None else v0.reshape(shape).copy()
    cost = _cost_cube(model, model.mu)
    for _ in range(max_iters):
        q = cost + model.gamma * _expected_next_values(model, v_cube)
        v_new = q.min(axis=0)
        resid = float(np.max(np.abs(v_new - v_cube)))
        if residuals is not None:
            residuals.append(resid)
        v_cube = v_new
        if resid < tol:
            v = v_cube.reshape(model.n_s)
            policy = greedy_from_q(q_values(model, v), model.feasible_sa)
            return v, policy
    raise ConvergenceError(
        f"value iteration stuck at residual {resid!r} after {max_iters} sweeps"
    )


def action_value(s: State, a: Action, v: np.ndarray, model: JointModel) -> float:
    """Cost plus discounted expected continuation, via the joint transition pmf."""
    pmf = model.joint_transition_pmf(s, a)
    return model.lagrangian_cost(s, a) + model.gamma * float(pmf @ v)


def policy_evaluate(
    policy: np.ndarray,
    model: JointModel,
    tol: float = 1e-9,
    max_iters: int = 200_000,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Discounted (total, power-only, buffer-only) cost of a stationary policy.

    The three value vectors satisfy total = power + mu * buffer at the fixed
    point, since the policy is shared and cost splits linearly.
    """
    n_s = model.n_s
    states = model.all_states()
    pb_sel = np.empty((n_s, model.n_b))
    ph_sel = np.empty((n_s, model.n_h))
    px_sel = np.empty((n_s, model.n_x))
    rho_sel = np.empty(n_s)
    g_sel = np.empty(n_s)
    for i, s in enumerate(states):
        a = int(policy[i])
        if not model.feasible_sa[i, a]:
            raise ConvergenceError(f"policy picks infeasible action {a} in state {s}")
        pb_sel[i] = model.pb_stack[a, s.b]
        ph_sel[i] = model.channel_matrix[s.h]
        px_sel[i] = model.px_stack[a, int(s.x)]
        rho_sel[i] = model.rho_hxa[s.h, int(s.x), a]
        g_sel[i] = model.g_ba[s.b, a]

    costs = np.stack([rho_sel + model.mu * g_sel, rho_sel, g_sel])
    values = np.zeros((3, n_s))
    shape = (model.n_b, model.n_h, model.n_x)
    for _ in range(max_iters):
        new = np.empty_like(values)
        for k in range(3):
            ev = np.einsum(
                "sB,sH,sX,BHX->s",
                pb_sel,
                ph_sel,
                px_sel,
                values[k].reshape(shape),
                optimize=True,
            )
            new[k] = costs[k] + model.gamma * ev
        resid = float(np.max(np.abs(new - values)))
        values = new
        if resid < tol:
            return values[0], values[1], values[2]
    raise ConvergenceError(f"policy evaluation stuck at residual {resid!r}")


def dense_value_iteration(
    costs: np.ndarray,
    transitions: np.ndarray,
    gamma: float,
    tol: float = 1e-9,
    max_iters: int = 200_000,
    feasible: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Plain tabular solver for an explicit (S, A) cost / (S, A, S) transition MDP.

    Returns (V, Q, policy). Useful for small reference problems and oracles.
    """
    n_s, n_a = costs.shape
    if feasible is None:
        feasible = np.ones((n_s, n_a), dtype=bool)
    c = np.where(feasible, costs, np.inf)
    v = np.zeros(n_s)
    for _ in range(max_iters):
        q = c + gamma * np.einsum("saS,S->sa", transitions, v)
        v_new = q.min(axis=1)
        resid = float(np.max(np.abs(v_new - v)))
        v = v_new
        if resid < tol:
            return v, q, greedy_from_q(q, feasible)
    raise ConvergenceError(f"dense value iteration stuck at residual {resid!r}")
