"""Logistic regression (damped Newton / IRLS) and elastic-net logistic
regression (IRLS outer loop, cyclic coordinate descent inner loop).

Both standardize features internally and penalize the standardized slopes;
the intercept is never penalized. Learned coefficients are mapped back to
the raw feature scale so prediction is a single affine map.
"""
import numpy as np
from scipy.special import expit

from .. import _kernels, errors

TOL = 1e-8
MAX_ITER = 500


def _standardize(X):
    center = X.mean(axis=0)
    scale = X.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    return (X - center) / scale, center, scale


def log_loss_terms(eta, y):
    """Per-row log loss written in terms of the linear predictor."""
    return np.logaddexp(0.0, eta) - y * eta


def penalized_loss(intercept, beta, X, y, l2=0.0, l1=0.0):
    eta = intercept + X @ beta
    return (float(np.mean(log_loss_terms(eta, y)))
            + 0.5 * l2 * float(beta @ beta) + l1 * float(np.abs(beta).sum()))


def loss_gradient(intercept, beta, X, y, l2=0.0):
    """Analytic gradient of mean log loss + (l2/2)|beta|^2.

    Returns ``(d/d intercept, d/d beta)``.
    """
    p = expit(intercept + X @ beta)
    resid = p - y
    n = len(y)
    return float(resid.sum() / n), X.T @ resid / n + l2 * beta


def _to_raw_scale(intercept, beta, center, scale):
    raw_beta = beta / scale
    return float(intercept - raw_beta @ center), raw_beta


def fit_logistic(X, y, l2=1e-8):
    """Ridge-jittered logistic regression by damped Newton steps."""
    Z, center, scale = _standardize(X)
    n, p = Z.shape
    A = np.column_stack([np.ones(n), Z])
    theta = np.zeros(p + 1)
    ybar = y.mean()
    theta[0] = np.log(ybar / (1 - ybar))
    pen = np.full(p + 1, l2)
    pen[0] = 0.0

    def objective(t):
        return float(np.mean(log_loss_terms(A @ t, y))) + 0.5 * float(pen @ (t * t))

    obj = objective(theta)
    grad_norm = np.inf
    for it in range(1, MAX_ITER + 1):
        prob = expit(A @ theta)
        grad = A.T @ (prob - y) / n + pen * theta
        grad_norm = float(np.linalg.norm(grad))
        w = prob * (1 - prob)
        hess = (A.T * w) @ A / n + np.diag(pen) + 1e-12 * np.eye(p + 1)
        step = np.linalg.solve(hess, grad)
        t = 1.0
        while True:
            cand = theta - t * step
            cand_obj = objective(cand)
            if cand_obj <= obj + 1e-4 * t * float(grad @ -step) or t < 1e-10:
                break
            t *= 0.5
        change = float(np.max(np.abs(cand - theta)))
        theta, obj = cand, cand_obj
        if change < TOL:
            intercept, beta = _to_raw_scale(theta[0], theta[1:], center, scale)
            return {"intercept": intercept, "coef": beta, "n_iter": it}
    raise errors.NonConvergence(
        f"logistic Newton did not converge in {MAX_ITER} iterations "
        f"(gradient norm {grad_norm:.3g})",
        iterations=MAX_ITER, grad_norm=grad_norm,
    )


def fit_elastic_net(X, y, lam, alpha):
    """Elastic-net logistic regression.

    Objective: mean log loss + lam * (alpha |b|_1 + (1 - alpha)/2 |b|^2).
    """
    Z, center, scale = _standardize(X)
    Zf = np.asfortranarray(Z)
    n, p = Z.shape
    l1 = lam * alpha
    l2 = lam * (1 - alpha)
    ybar = y.mean()
    b0 = float(np.log(ybar / (1 - ybar)))
    beta = np.zeros(p)
    kern = _kernels.get()
    obj = penalized_loss(b0, beta, Z, y, l2, l1)
    grad_norm = np.inf
    for it in range(1, MAX_ITER + 1):
        eta = b0 + Z @ beta
        prob = expit(eta)
        w_raw = np.maximum(prob * (1 - prob), 1e-10)
        z = eta + (y - prob) / w_raw
        w = w_raw / n
        new_beta = beta.copy()
        new_b0, _, _ = kern.enet_cd(Zf, w, z, new_beta, b0, l1, l2, TOL * 0.1, 10_000)
        # Backtrack along the proximal Newton direction if the objective rises.
        t = 1.0
        while True:
            cand_b0 = b0 + t * (new_b0 - b0)
            cand_beta = beta + t * (new_beta - beta)
            cand_obj = penalized_loss(cand_b0, cand_beta, Z, y, l2, l1)
            if cand_obj <= obj + 1e-12 or t < 1e-10:
                break
            t *= 0.5
        change = max(abs(cand_b0 - b0), float(np.max(np.abs(cand_beta - beta), initial=0.0)))
        b0, beta, obj = cand_b0, cand_beta, cand_obj
        if change < TOL:
            intercept, raw_beta = _to_raw_scale(b0, beta, center, scale)
            return {"intercept": intercept, "coef": raw_beta, "n_iter": it}
        g0, gb = loss_gradient(b0, beta, Z, y, l2)
        grad_norm = float(np.hypot(g0, np.linalg.norm(gb)))
    raise errors.NonConvergence(
        f"elastic-net IRLS did not converge in {MAX_ITER} iterations "
        f"(smooth-part gradient norm {grad_norm:.3g})",
        iterations=MAX_ITER, grad_norm=grad_norm,
    )


def predict_linear(params, X):
    return expit(params["intercept"] + X @ params["coef"])
