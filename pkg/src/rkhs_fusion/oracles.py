"""Independent reference solvers used to cross-check closed forms.

These minimise the same objectives by iterative descent and never touch
the closed-form code paths.
"""

import numpy as np

from . import _accel


def minimize_quadratic(a, b, x0, n_steps=10_000, projector=None):
    """Minimise ``x^T a x - 2 b^T x`` by fixed-step projected gradient descent.

    The step is ``1 / (2 lambda_max(a))`` on the subspace given by
    ``projector`` (identity by default), which guarantees monotone descent.
    Convergence is geometric with rate ``1 - lambda_min / lambda_max`` on
    that subspace.
    """
    a = 0.5 * (np.asarray(a, float) + np.asarray(a, float).T)
    proj = np.eye(len(a)) if projector is None else np.asarray(projector, float)
    top = np.linalg.eigvalsh(proj @ a @ proj)[-1]
    step = 0.5 / top if top > 0 else 1.0
    return _accel.projected_gradient_descent(a, b, proj, x0, step, n_steps)


def agent_cost_quadratic(gram, k, y, rho, alpha_bar):
    """``(A, b, c)`` with ``(y - k^T x)^2 + rho (x - a)^T G (x - a) = x^T A x - 2 b^T x + c``."""
    gram = np.asarray(gram, float)
    a = np.outer(k, k) + rho * gram
    b = k * y + rho * gram @ alpha_bar
    c = y * y + rho * alpha_bar @ gram @ alpha_bar
    return a, b, c


def fusion_cost_quadratic(gram, y, rho):
    """``(A, b, c)`` with ``|G x - y|^2 + rho x^T G x = x^T A x - 2 b^T x + c``."""
    gram = np.asarray(gram, float)
    return gram @ gram + rho * gram, gram @ y, float(y @ y)


def best_of_starts(a, b, c, starts, n_steps=10_000, projector=None):
    """Lowest objective value reached by descent from each start."""
    best = np.inf
    for x0 in starts:
        x = minimize_quadratic(a, b, x0, n_steps, projector)
        best = min(best, float(x @ a @ x - 2 * b @ x + c))
    return best
