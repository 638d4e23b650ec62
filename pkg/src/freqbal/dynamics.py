"""Executable checks of the gradient-coupling and eigen-decay claims.

Two mechanisms motivate frequency-based rebalancing. First, under concat
fusion the modality branches share a single error signal, so a branch that
collapses the loss early throttles everyone else's gradients; the coupling
probe and the suppression experiment measure that directly on the small
classifier. Second, full-batch gradient descent on a linear model contracts
each residual eigen-direction of the feature Gram matrix by exactly
(1 - eta * lambda_i) per step, so large-eigenvalue (low-frequency)
directions converge first; decay_check verifies the law numerically.

The eigendecomposition uses cyclic Jacobi rotations: dependency-free,
deterministic, and plenty fast for the N <= 256 problems used here.
"""

from dataclasses import dataclass

import numpy as np

from .seeds import stream_rng, stream_seed
from .tinynet import (
    NetConfig,
    backward,
    cross_entropy,
    encoder_grad_norms,
    forward,
    init_network,
    sgd_step,
)


@dataclass
class SpectrumReport:
    """Eigen-structure of a Gram matrix, plus decay-law fit results.

    eigenvalues are descending; eigenvectors are orthonormal columns.
    After decay_check, factors holds (1 - eta*lambda_i), trajectories the
    measured projections <q_t - y, u_i> for t = 0..steps (rows), and
    max_rel_deviation the largest deviation from the predicted geometric
    decay per direction, normalized by that direction's initial projection.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    eta: float = None
    steps: int = 0
    factors: np.ndarray = None
    trajectories: np.ndarray = None
    max_rel_deviation: np.ndarray = None


def gram_matrix(x) -> np.ndarray:
    """H = X X^T: pairwise inner products of the sample feature rows."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected (N, d) features, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("features contain non-finite values")
    return x @ x.T


def jacobi_eigh(h, tol: float = 1e-12, max_sweeps: int = 100):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns (eigenvalues, eigenvectors) sorted descending, with
    H = V diag(w) V^T. Sweeps run until the off-diagonal Frobenius mass
    falls below tol relative to the matrix scale.
    """
    a = np.array(h, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    scale = max(float(np.abs(a).max()), 1.0)
    if float(np.abs(a - a.T).max()) > 1e-10 * scale:
        raise ValueError("matrix is not symmetric")
    n = a.shape[0]
    v = np.eye(n)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2) * 2.0)
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-30 * scale:
                    continue
                phi = 0.5 * np.arctan2(2.0 * apq, a[q, q] - a[p, p])
                c, s = np.cos(phi), np.sin(phi)
                rp, rq = a[p].copy(), a[q].copy()
                a[p], a[q] = c * rp - s * rq, s * rp + c * rq
                cp, cq = a[:, p].copy(), a[:, q].copy()
                a[:, p], a[:, q] = c * cp - s * cq, s * cp + c * cq
                a[p, q] = a[q, p] = 0.0
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p], v[:, q] = c * vp - s * vq, s * vp + c * vq
    w = np.diag(a).copy()
    order = np.argsort(w)[::-1]
    return w[order], v[:, order]


def eigendecompose(h) -> SpectrumReport:
    """Spectrum skeleton of a symmetric Gram matrix (no dynamics yet)."""
    w, v = jacobi_eigh(h)
    return SpectrumReport(eigenvalues=w, eigenvectors=v)


def decay_check(x, y, eta: float = None, steps: int = 50) -> SpectrumReport:
    """Train the linear model f = theta^T x by full-batch gradient descent
    from theta = 0 on the squared loss and compare each eigen-direction's
    residual against its closed-form geometric decay.

    eta defaults to 0.5 / lambda_1 and must satisfy eta < 2 / lambda_1.
    Deviations are normalized by |<q_0 - y, u_i>|, each direction's
    initial residual projection, so directions that decay to the float
    noise floor are judged against their own starting scale.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ValueError(f"features {x.shape} do not match {y.shape[0]} targets")
    report = eigendecompose(gram_matrix(x))
    lam, u = report.eigenvalues, report.eigenvectors
    lam_max = float(lam[0])
    if lam_max <= 0:
        raise ValueError("Gram matrix has no positive eigenvalues")
    if eta is None:
        eta = 0.5 / lam_max
    if not 0 < eta < 2.0 / lam_max:
        raise ValueError(f"eta={eta} unstable; requires 0 < eta < {2.0 / lam_max}")

    n, d = x.shape
    theta = np.zeros(d)
    projections = np.empty((steps + 1, n))
    for t in range(steps + 1):
        residual = x @ theta - y
        projections[t] = u.T @ residual
        if t < steps:
            theta = theta - eta * (x.T @ residual)

    factors = 1.0 - eta * lam
    exponents = np.arange(steps + 1)[:, None]
    predicted = projections[0][None, :] * factors[None, :] ** exponents
    denom = np.maximum(np.abs(projections[0]), 1e-30)
    deviation = np.abs(np.abs(projections) - np.abs(predicted)) / denom[None, :]

    report.eta = float(eta)
    report.steps = steps
    report.factors = factors
    report.trajectories = projections
    report.max_rel_deviation = deviation.max(axis=0)
    return report


@dataclass
class CouplingReport:
    """Shared-error norm, per-branch gradient norms, and the linearity check.

    scaling_max_rel_err is the worst relative mismatch, over the probed
    scale factors and encoders, between the gradient norm under a rescaled
    error signal and the proportionally rescaled original norm.
    """

    error_norm: float
    encoder_grad_norms: np.ndarray
    classifier_grad_norm: float
    scaling_max_rel_err: float


def coupling_probe(net_cfg: NetConfig, params, inputs, labels, scales=(0.5, 0.25)) -> CouplingReport:
    """Measure how every branch's gradient tracks the shared error signal.

    Holding the batch (hence all features) fixed, the main-path error
    signal softmax - onehot is replaced by r * itself for each r in
    scales; each encoder's gradient norm must shrink by exactly r.
    """
    grads, error = backward(net_cfg, params, inputs, labels)
    base_norms = encoder_grad_norms(net_cfg, grads)
    clf_norm = float(
        np.sqrt(np.sum(grads["clf.w"] ** 2) + np.sum(grads["clf.b"] ** 2))
    )
    worst = 0.0
    for r in scales:
        scaled_grads, _ = backward(net_cfg, params, inputs, labels, error_override=r * error)
        scaled_norms = encoder_grad_norms(net_cfg, scaled_grads)
        expected = r * base_norms
        live = expected > 0
        if np.any(live):
            rel = np.abs(scaled_norms[live] - expected[live]) / expected[live]
            worst = max(worst, float(rel.max()))
    return CouplingReport(
        error_norm=float(np.linalg.norm(error)),
        encoder_grad_norms=base_norms,
        classifier_grad_norm=clf_norm,
        scaling_max_rel_err=worst,
    )


def suppression_experiment(
    dataset,
    dominant: int = 0,
    weak: int = 2,
    hidden=(64, 32),
    eta: float = 0.3,
    batch_size: int = 64,
    prefit_target: float = 0.05,
    prefit_max_iters: int = 2000,
    measure_iters: int = 20,
    seed: int = 0,
):
    """Quantify gradient suppression of a weak branch by a pre-fitted one.

    The treatment arm first trains the dominant branch alone (mask limited
    to it, plain SGD) until the full training loss drops below
    prefit_target, then both arms run measure_iters joint steps over the
    identical batch sequence; the control arm starts from the same joint
    initialization without any pre-fit. Returns a dict with the mean weak-
    encoder gradient norm of each arm and their ratio (treatment/control).
    """
    m = dataset.n_modalities
    if not (0 <= dominant < m and 0 <= weak < m and dominant != weak):
        raise ValueError(f"bad branch indices dominant={dominant}, weak={weak} for M={m}")
    train_images, train_labels = dataset.train_split()
    n = len(train_labels)
    h, w = dataset.dims
    net_cfg = NetConfig(
        input_dims=(h * w,) * m,
        hidden=tuple(hidden),
        n_classes=dataset.n_classes,
        seed=stream_seed(seed, "init"),
    )
    params0 = init_network(net_cfg)
    solo_mask = [i == dominant for i in range(m)]

    prefit = dict(params0)
    rng = stream_rng(seed, "prefit")
    prefit_loss = None
    for it in range(prefit_max_iters):
        idx = rng.integers(0, n, size=batch_size)
        xb = [img[idx] for img in train_images]
        grads, _ = backward(net_cfg, prefit, xb, train_labels[idx], mask=solo_mask)
        prefit = sgd_step(net_cfg, prefit, grads, eta)
        if it % 25 == 24:
            logits, _ = forward(net_cfg, prefit, train_images, mask=solo_mask)
            prefit_loss = cross_entropy(logits, train_labels)
            if prefit_loss < prefit_target:
                break
    else:
        raise ValueError(
            f"dominant branch failed to reach loss {prefit_target} "
            f"within {prefit_max_iters} iterations (last {prefit_loss})"
        )

    def measure(start_params):
        batch_rng = stream_rng(seed, "measure")
        params = dict(start_params)
        norms = []
        for _ in range(measure_iters):
            idx = batch_rng.integers(0, n, size=batch_size)
            xb = [img[idx] for img in train_images]
            grads, _ = backward(net_cfg, params, xb, train_labels[idx])
            norms.append(encoder_grad_norms(net_cfg, grads)[weak])
            params = sgd_step(net_cfg, params, grads, eta)
        return float(np.mean(norms))

    treated = measure(prefit)
    control = measure(params0)
    return {
        "weak_norm_prefit": treated,
        "weak_norm_control": control,
        "ratio": treated / control,
        "prefit_loss": prefit_loss,
    }
