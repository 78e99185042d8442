"""Explicit Runge-Kutta integration usable on expressions and on numbers."""

from typing import Callable, List, Sequence, Union

import numpy as np

from trigopt.nlp.expr import Expr

Vector = Union[Sequence, np.ndarray]
Dynamics = Callable[[Sequence, Sequence], Sequence]


def _is_symbolic(values: Sequence) -> bool:
    return any(isinstance(v, Expr) for v in values)


def _axpy(x: Sequence, k: Sequence, h) -> List:
    return [xi + h * ki for xi, ki in zip(x, k)]


def rk4_step(f: Dynamics, x: Vector, u: Vector, h) -> Union[List, np.ndarray]:
    """
    One classical fourth-order Runge-Kutta step.

    Args:
        f: Right-hand side f(x, u) returning a sequence of len(x)
        x: State (expressions or numbers)
        u: Control held constant over the step
        h: Step size (positive number, or an expression for free final time)

    Returns:
        Next state: a list of expressions when any input is symbolic,
        otherwise a float array

    Raises:
        ValueError: If a numeric step size is not positive
        DomainError: Propagated from f
    """
    if not isinstance(h, Expr) and not h > 0:
        raise ValueError(f"Step size must be positive, got {h}")
    x = list(x)
    u = list(u)
    k1 = list(f(x, u))
    if len(k1) != len(x):
        raise ValueError(f"Dynamics returned {len(k1)} components for a state of size {len(x)}")
    k2 = list(f(_axpy(x, k1, 0.5 * h), u))
    k3 = list(f(_axpy(x, k2, 0.5 * h), u))
    k4 = list(f(_axpy(x, k3, h), u))
    sixth = h * (1.0 / 6.0)
    nxt = [xi + sixth * (a + 2.0 * b + 2.0 * c + d) for xi, a, b, c, d in zip(x, k1, k2, k3, k4)]
    if _is_symbolic(nxt) or isinstance(h, Expr):
        return nxt
    return np.asarray(nxt, dtype=float)


def integrate(f: Dynamics, x: Vector, u: Vector, duration, steps: int = 1) -> Union[List, np.ndarray]:
    """
    Integrate over ``duration`` with ``steps`` equal RK4 sub-steps.

    Args:
        f: Right-hand side f(x, u)
        x: Initial state
        u: Control held constant over the interval
        duration: Interval length (number or expression)
        steps: Number of sub-steps, at least 1

    Returns:
        State at the end of the interval
    """
    if steps < 1:
        raise ValueError(f"steps must be at least 1, got {steps}")
    h = duration * (1.0 / steps)
    state = x
    for _ in range(steps):
        state = rk4_step(f, state, u, h)
    return state


def simulate(f: Dynamics, x0: Vector, controls: np.ndarray, interval: float, steps: int = 1) -> np.ndarray:
    """
    Roll a piecewise-constant control sequence forward from x0.

    Args:
        f: Right-hand side f(x, u)
        x0: Initial state
        controls: Control per interval, shape (N, n_u)
        interval: Interval length
        steps: RK4 sub-steps per interval

    Returns:
        States at the grid nodes, shape (N + 1, n_x)
    """
    controls = np.atleast_2d(np.asarray(controls, dtype=float))
    states = [np.asarray(x0, dtype=float)]
    for u in controls:
        states.append(np.asarray(integrate(f, states[-1], u, interval, steps), dtype=float))
    return np.vstack(states)
