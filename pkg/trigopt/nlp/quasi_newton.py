"""Damped BFGS approximation of the Lagrangian Hessian."""

import numpy as np

# Powell damping keeps s^T r >= DAMPING * s^T B s.
DAMPING = 0.2
CURVATURE_FLOOR = 1e-12


class DampedBfgs:
    """Dense positive definite Hessian approximation with Powell damping."""

    def __init__(self, dimension: int, initial_scale: float = 1.0) -> None:
        self.matrix = initial_scale * np.eye(dimension)
        self.updates = 0
        self.skipped = 0

    def update(self, step: np.ndarray, gradient_change: np.ndarray) -> None:
        """
        Apply one damped BFGS update.

        Args:
            step: Primal step s = x_new - x_old
            gradient_change: y = grad L(x_new) - grad L(x_old), both taken
                with the new multipliers
        """
        bs = self.matrix @ step
        sbs = float(step @ bs)
        if sbs <= CURVATURE_FLOOR * max(1.0, float(step @ step)):
            self.skipped += 1
            return

        sy = float(step @ gradient_change)
        if sy >= DAMPING * sbs:
            r = gradient_change
        else:
            theta = (1.0 - DAMPING) * sbs / (sbs - sy)
            r = theta * gradient_change + (1.0 - theta) * bs
        sr = float(step @ r)
        if sr <= CURVATURE_FLOOR:
            self.skipped += 1
            return

        self.matrix = self.matrix + np.outer(r, r) / sr - np.outer(bs, bs) / sbs
        self.updates += 1
