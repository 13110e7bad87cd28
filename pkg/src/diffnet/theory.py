"""Closed-form mean and mean-square analysis of the noisy diffusion recursion.

Everything here works on the stacked network error vector (node-major, M
coordinates per node). The central objects are the mean-transition matrix B,
the mean driving vector z induced by regressor link noise (it biases the
mean), and the second-order noise moments feeding the steady-state metric

    value = [vec(numerator)]^* (I - F)^{-1} vec(weighting),   F = B^T kron B^H,

evaluated by a direct Kronecker solve for small networks and by geometric
series accumulation for large ones. Network MSD uses weighting I/N, network
EMSE the block-diagonal regressor covariance over N.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import kron_lift, spectral_radius, vec
from .network import CombinationMatrices, NetworkModel, link_index

__all__ = [
    "InstabilityError",
    "MeanDynamics",
    "NoiseMoments",
    "StepSizeBounds",
    "StabilityInfo",
    "TrackingMetrics",
    "TheoryReport",
    "assemble_mean_dynamics",
    "bias",
    "step_size_bounds",
    "assemble_noise_moments",
    "steady_state_metric",
    "network_msd",
    "network_emse",
    "series_msd",
    "series_emse",
    "tracking_metrics",
    "block_max_norm",
    "stability_report",
    "theory_report",
]

DIRECT_SOLVE_LIMIT = 64  # stacked dimension above which the series path is used
IMAG_RESIDUAL_TOL = 1e-8
ILL_CONDITIONED_TOL = 1e-6


class InstabilityError(RuntimeError):
    """Raised when a steady-state quantity does not exist or cannot be trusted."""


def _block_diag(blocks: np.ndarray) -> np.ndarray:
    """(N, M, M) stack -> (NM, NM) block diagonal."""
    n, m, _ = blocks.shape
    out = np.zeros((n * m, n * m), dtype=complex)
    for k in range(n):
        out[k * m:(k + 1) * m, k * m:(k + 1) * m] = blocks[k]
    return out


@dataclass
class MeanDynamics:
    """Mean error recursion  E err_i = b (E err_{i-1}) - a2_lift^T big_m z."""

    n_nodes: int
    m_dim: int
    w_o: np.ndarray
    r_prime: np.ndarray
    b: np.ndarray
    z: np.ndarray
    big_m: np.ndarray
    a1_lift: np.ndarray
    a2_lift: np.ndarray
    c_lift: np.ndarray


def assemble_mean_dynamics(network: NetworkModel, matrices: CombinationMatrices,
                           w_o: np.ndarray | None = None) -> MeanDynamics:
    """Build the mean-error recursion for a network/matrices pair.

    r_prime[k] aggregates the regressor covariances node k consumes through
    data sharing, link noise included; z stacks the per-node mean drift that
    regressor link noise injects (zero without it).
    """
    topo = network.topology
    n, m = network.n_nodes, network.m_dim
    if w_o is None:
        w_o = np.asarray(network.weights.w0, dtype=complex)
    links = link_index(topo)
    pos = {lk: p for p, lk in enumerate(links)}
    c = matrices.c
    r_u = network.nodes.r_u
    r_u_link = network.link_noise.r_u_link

    r_prime = np.zeros((n, m, m), dtype=complex)
    z_blocks = np.zeros((n, m), dtype=complex)
    for k in range(n):
        for l in np.flatnonzero(topo.adjacency[:, k]):
            coeff = c[l, k]
            r_prime[k] += coeff * r_u[l]
            if l != k:
                noise = r_u_link[pos[(int(l), k)]]
                r_prime[k] += coeff * noise
                z_blocks[k] -= coeff * (noise @ w_o)

    big_m = np.kron(np.diag(network.nodes.mu), np.eye(m))
    a1_lift = kron_lift(matrices.a1, m)
    a2_lift = kron_lift(matrices.a2, m)
    c_lift = kron_lift(c, m)
    b = a2_lift.T @ (np.eye(n * m) - big_m @ _block_diag(r_prime)) @ a1_lift.T
    return MeanDynamics(n_nodes=n, m_dim=m, w_o=w_o, r_prime=r_prime, b=b,
                        z=z_blocks.reshape(-1), big_m=big_m,
                        a1_lift=a1_lift, a2_lift=a2_lift, c_lift=c_lift)


def bias(mean_dynamics: MeanDynamics) -> np.ndarray:
    """Asymptotic mean error: the fixed point of the mean recursion.

    Solves (I - b) g = -a2_lift^T big_m z. Zero exactly when z is zero.
    """
    md = mean_dynamics
    rhs = -(md.a2_lift.T @ (md.big_m @ md.z))
    return np.linalg.solve(np.eye(len(rhs)) - md.b, rhs)


@dataclass
class StepSizeBounds:
    """Per-node step-size stability bounds.

    ``tight`` comes from the aggregated covariances r_prime (always valid);
    ``robust`` is the per-neighbor bound that needs a doubly stochastic
    data-sharing matrix (None otherwise); ``noise_free`` is the same bound
    with link noise removed, so robust <= noise_free always.
    """

    mu: np.ndarray
    tight: np.ndarray
    robust: np.ndarray | None
    noise_free: np.ndarray
    c_doubly_stochastic: bool

    def ok_tight(self) -> np.ndarray:
        return self.mu < self.tight

    def ok_robust(self) -> np.ndarray | None:
        return None if self.robust is None else self.mu < self.robust


def _lambda_max(mat: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(0.5 * (mat + mat.conj().T))[-1])


def _safe_bound(lam: float) -> float:
    return 2.0 / lam if lam > 0 else np.inf


def step_size_bounds(network: NetworkModel, matrices: CombinationMatrices) -> StepSizeBounds:
    topo = network.topology
    n = network.n_nodes
    md = assemble_mean_dynamics(network, matrices)
    links = link_index(topo)
    pos = {lk: p for p, lk in enumerate(links)}
    r_u = network.nodes.r_u
    r_u_link = network.link_noise.r_u_link

    tight = np.array([_safe_bound(_lambda_max(md.r_prime[k])) for k in range(n)])
    robust = np.empty(n)
    noise_free = np.empty(n)
    for k in range(n):
        lam_noisy, lam_clean = 0.0, 0.0
        for l in np.flatnonzero(topo.adjacency[:, k]):
            clean = _lambda_max(r_u[l])
            lam_clean = max(lam_clean, clean)
            if l == k:
                lam_noisy = max(lam_noisy, clean)
            else:
                lam_noisy = max(lam_noisy, _lambda_max(r_u[l] + r_u_link[pos[(int(l), k)]]))
        robust[k] = _safe_bound(lam_noisy)
        noise_free[k] = _safe_bound(lam_clean)

    c = matrices.c
    doubly = (
        bool(np.all(c >= 0))
        and bool(np.all(np.abs(c.sum(axis=0) - 1.0) <= 1e-12))
        and bool(np.all(np.abs(c.sum(axis=1) - 1.0) <= 1e-12))
    )
    return StepSizeBounds(mu=network.nodes.mu.copy(), tight=tight,
                          robust=robust if doubly else None,
                          noise_free=noise_free, c_doubly_stochastic=doubly)


@dataclass
class NoiseMoments:
    """Second-order moments of the aggregated perturbations.

    s: block-diagonal gradient-noise covariance from own measurements.
    t: block-diagonal extra covariance from sharing noisy data.
    r_z: covariance of the adapt-step noise vector (shared data included).
    r_v: covariance of all additive terms entering the error recursion.
    y: cross-moment between the error and the additive noise (zero without
       regressor link noise).
    r_v_w / r_v_psi: block-diagonal link-noise aggregates for the two
       combine steps (kept for the simplified assembly path).
    """

    s: np.ndarray
    t: np.ndarray
    r_z: np.ndarray
    r_v: np.ndarray
    y: np.ndarray
    r_v_w: np.ndarray
    r_v_psi: np.ndarray


def assemble_noise_moments(network: NetworkModel, matrices: CombinationMatrices,
                           mean_dynamics: MeanDynamics | None = None) -> NoiseMoments:
    md = mean_dynamics if mean_dynamics is not None else assemble_mean_dynamics(network, matrices)
    topo = network.topology
    n, m = network.n_nodes, network.m_dim
    links = link_index(topo)
    ln = network.link_noise
    r_u = network.nodes.r_u
    sigma_v2 = network.nodes.sigma_v2
    w_o = md.w_o
    c = matrices.c

    s = _block_diag(sigma_v2[:, None, None] * r_u)

    t_blocks = np.zeros((n, m, m), dtype=complex)
    rvw_blocks = np.zeros((n, m, m), dtype=complex)
    rvpsi_blocks = np.zeros((n, m, m), dtype=complex)
    for p, (l, k) in enumerate(links):
        sd2 = ln.sigma_d2[p]
        ru_noise = ln.r_u_link[p]
        quad = float((w_o.conj() @ ru_noise @ w_o).real)
        t_blocks[k] += c[l, k] ** 2 * (
            (sigma_v2[l] + sd2) * ru_noise + (sd2 + quad) * r_u[l]
        )
        rvw_blocks[k] += matrices.a1[l, k] ** 2 * ln.r_w[p]
        rvpsi_blocks[k] += matrices.a2[l, k] ** 2 * ln.r_psi[p]

    t = _block_diag(t_blocks)
    r_v_w = _block_diag(rvw_blocks)
    r_v_psi = _block_diag(rvpsi_blocks)
    zz = np.outer(md.z, md.z.conj())
    r_z = md.c_lift.T @ s @ md.c_lift + t + zz

    a2t = md.a2_lift.T
    r_v = a2t @ r_v_w @ md.a2_lift + r_v_psi + a2t @ md.big_m @ (t + zz) @ md.big_m @ md.a2_lift

    g = bias(md)
    y = -a2t @ md.a1_lift.T @ np.outer(g, md.z.conj()) @ md.big_m @ md.a2_lift
    return NoiseMoments(s=s, t=t, r_z=r_z, r_v=r_v, y=y, r_v_w=r_v_w, r_v_psi=r_v_psi)


# ---------------------------------------------------------------------------
# steady-state metrics


def _general_numerator(md: MeanDynamics, nm: NoiseMoments) -> np.ndarray:
    a2t = md.a2_lift.T
    core = a2t @ md.big_m @ md.c_lift.T @ nm.s @ md.c_lift @ md.big_m @ md.a2_lift
    return core + nm.r_v + nm.y + nm.y.conj().T


def _simplified_numerator(md: MeanDynamics, nm: NoiseMoments) -> np.ndarray:
    a2t = md.a2_lift.T
    return a2t @ (md.big_m @ nm.s @ md.big_m + nm.r_v_w) @ md.a2_lift + nm.r_v_psi


def _check_real(value: complex, context: str) -> float:
    scale = max(abs(value), 1e-300)
    if abs(value.imag) > IMAG_RESIDUAL_TOL * scale:
        raise InstabilityError(
            f"{context}: imaginary residual {value.imag:.3e} exceeds tolerance"
        )
    return float(value.real)


def _series_accumulate(b: np.ndarray, numerator: np.ndarray, omega: np.ndarray,
                       rho2: float, tol: float, max_terms: int):
    bh = b.conj().T
    x = numerator.astype(complex)
    total = 0.0 + 0.0j
    tail_gain = rho2 / max(1.0 - rho2, 1e-300)
    for j in range(max_terms):
        term = np.einsum("ij,ji->", x, omega)
        total += term
        if abs(term) * tail_gain <= tol * max(abs(total), 1e-300) or abs(term) == 0.0:
            return total, j + 1
        x = b @ x @ bh
    raise InstabilityError(f"series did not converge within {max_terms} terms")


def _steady_state_values(b: np.ndarray, pairs, *, direct_limit: int = DIRECT_SOLVE_LIMIT,
                         tol: float = 1e-9, max_terms: int = 10 ** 6):
    """Evaluate [vec(W)]^* (I-F)^{-1} vec(omega) for (W, omega) pairs."""
    rho2 = spectral_radius(b) ** 2
    if rho2 >= 1.0:
        raise InstabilityError(
            f"mean-square recursion unstable: rho(B)^2 = {rho2:.6f} >= 1"
        )
    dim = b.shape[0]
    values = []
    if dim <= direct_limit:
        f = np.kron(b.T, b.conj().T)
        rhs = np.stack([vec(omega) for _, omega in pairs], axis=1)
        sol = np.linalg.solve(np.eye(dim * dim) - f, rhs)
        for j, (num, _) in enumerate(pairs):
            values.append(_check_real(complex(vec(num).conj() @ sol[:, j]),
                                      "steady-state metric"))
    else:
        for num, omega in pairs:
            total, _ = _series_accumulate(b, num, omega, rho2, tol, max_terms)
            values.append(_check_real(total, "steady-state metric (series)"))
    return values


def steady_state_metric(mean_dynamics: MeanDynamics, noise_moments: NoiseMoments,
                        omega: np.ndarray) -> float:
    """Steady-state weighted error power for an arbitrary PSD weighting."""
    num = _general_numerator(mean_dynamics, noise_moments)
    return _steady_state_values(mean_dynamics.b, [(num, omega)])[0]


def _omega_msd(network: NetworkModel) -> np.ndarray:
    nm_dim = network.n_nodes * network.m_dim
    return np.eye(nm_dim) / network.n_nodes


def _omega_emse(network: NetworkModel) -> np.ndarray:
    return _block_diag(network.nodes.r_u) / network.n_nodes


def _require_identity_c(matrices: CombinationMatrices) -> None:
    n = matrices.c.shape[0]
    if not np.allclose(matrices.c, np.eye(n), atol=1e-14):
        raise ValueError("the simplified path requires the data-sharing matrix to be identity")


def network_metrics(network: NetworkModel, matrices: CombinationMatrices,
                    simplified: bool = False) -> tuple[float, float]:
    """(MSD, EMSE) in linear scale, one factorization for both."""
    md = assemble_mean_dynamics(network, matrices)
    nm = assemble_noise_moments(network, matrices, md)
    if simplified:
        _require_identity_c(matrices)
        num = _simplified_numerator(md, nm)
    else:
        num = _general_numerator(md, nm)
    vals = _steady_state_values(md.b, [(num, _omega_msd(network)),
                                       (num, _omega_emse(network))])
    return vals[0], vals[1]


def network_msd(network: NetworkModel, matrices: CombinationMatrices,
                simplified: bool = False) -> float:
    return network_metrics(network, matrices, simplified)[0]


def network_emse(network: NetworkModel, matrices: CombinationMatrices,
                 simplified: bool = False) -> float:
    return network_metrics(network, matrices, simplified)[1]


def series_msd(mean_dynamics: MeanDynamics, noise_moments: NoiseMoments,
               weighting: np.ndarray | None = None, tol: float = 1e-9,
               max_terms: int = 10 ** 6):
    """Geometric-series evaluation of the steady-state metric.

    Returns (value, terms_used). Default weighting is I/N (network MSD).
    Stops once the estimated tail drops below ``tol`` relative to the sum.
    """
    md, nm = mean_dynamics, noise_moments
    if weighting is None:
        weighting = np.eye(md.b.shape[0]) / md.n_nodes
    rho2 = spectral_radius(md.b) ** 2
    if rho2 >= 1.0:
        raise InstabilityError(
            f"mean-square recursion unstable: rho(B)^2 = {rho2:.6f} >= 1"
        )
    num = _general_numerator(md, nm)
    total, terms = _series_accumulate(md.b, num, weighting, rho2, tol, max_terms)
    return _check_real(total, "steady-state metric (series)"), terms


def series_emse(mean_dynamics: MeanDynamics, noise_moments: NoiseMoments,
                r_u: np.ndarray, tol: float = 1e-9, max_terms: int = 10 ** 6):
    """Series evaluation with the EMSE weighting built from (N, M, M) r_u."""
    omega = _block_diag(r_u) / mean_dynamics.n_nodes
    return series_msd(mean_dynamics, noise_moments, omega, tol, max_terms)


# ---------------------------------------------------------------------------
# tracking


@dataclass
class TrackingMetrics:
    msd: float
    emse: float
    msd_stationary: float
    emse_stationary: float


def tracking_metrics(network: NetworkModel, matrices: CombinationMatrices,
                     r_eta: np.ndarray | None = None) -> TrackingMetrics:
    """Steady-state metrics when the target performs a random walk.

    The target increments add a rank-structured covariance (every node sees
    the same increment) to the metric numerator. That covariance must be
    invariant under the lifted combine steps, which holds whenever A1 and A2
    are left stochastic; the identity is verified numerically.
    """
    if r_eta is None:
        r_eta = network.weights.r_eta
    if r_eta is None:
        raise ValueError("tracking metrics need r_eta (none on the network)")
    md = assemble_mean_dynamics(network, matrices)
    nm = assemble_noise_moments(network, matrices, md)
    n = network.n_nodes
    r_zeta = np.kron(np.ones((n, n)), np.asarray(r_eta, dtype=complex))

    lhs = md.a2_lift.T @ md.a1_lift.T @ r_zeta @ md.a1_lift @ md.a2_lift
    scale = max(float(np.linalg.norm(r_zeta)), 1.0)
    if float(np.linalg.norm(lhs - r_zeta)) > 1e-10 * scale:
        raise ValueError(
            "tracking correction requires left-stochastic combination matrices"
        )

    num = _general_numerator(md, nm)
    omega_msd, omega_emse = _omega_msd(network), _omega_emse(network)
    vals = _steady_state_values(md.b, [
        (num + r_zeta, omega_msd),
        (num + r_zeta, omega_emse),
        (num, omega_msd),
        (num, omega_emse),
    ])
    return TrackingMetrics(msd=vals[0], emse=vals[1],
                           msd_stationary=vals[2], emse_stationary=vals[3])


# ---------------------------------------------------------------------------
# block maximum norm and stability


def _split_blocks(x: np.ndarray, m_dim: int) -> np.ndarray:
    dim = x.shape[0]
    n = dim // m_dim
    return x.reshape(n, m_dim, n, m_dim).transpose(0, 2, 1, 3)


def block_max_norm(x: np.ndarray, m_dim: int) -> float:
    """Block maximum norm of a stacked vector or its induced matrix norm.

    Vectors: the largest per-node Euclidean norm. Matrices: exact for the
    two structured cases that arise in the stability analysis (Kronecker
    lifts of right-stochastic matrices give exactly 1; block-diagonal
    Hermitian matrices give their spectral radius); anything else falls back
    to a bounded power-ascent lower-bound estimate.
    """
    x = np.asarray(x)
    if x.ndim == 1:
        if x.size % m_dim:
            raise ValueError("vector length is not a multiple of the block size")
        return float(np.max(np.linalg.norm(x.reshape(-1, m_dim), axis=1)))
    if x.ndim != 2 or x.shape[0] != x.shape[1] or x.shape[0] % m_dim:
        raise ValueError("expected a square matrix of stacked blocks")
    blocks = _split_blocks(x, m_dim)
    n = blocks.shape[0]
    off = blocks.copy()
    off[np.arange(n), np.arange(n)] = 0.0

    scale = max(float(np.abs(x).max()), 1e-300)
    if not np.any(np.abs(off) > 1e-14 * scale):
        diag = blocks[np.arange(n), np.arange(n)]
        herm = max(float(np.abs(diag[k] - diag[k].conj().T).max()) for k in range(n))
        if herm <= 1e-12 * scale:
            return max(float(np.abs(np.linalg.eigvalsh(diag[k])).max()) for k in range(n))

    coeff = blocks[:, :, 0, 0]
    lift = coeff[:, :, None, None] * np.eye(m_dim)[None, None]
    if np.all(np.abs(blocks - lift) <= 1e-12 * scale):
        a = coeff.real
        if (np.all(np.abs(coeff.imag) <= 1e-12 * scale) and np.all(a >= -1e-12)
                and np.all(np.abs(a.sum(axis=1) - 1.0) <= 1e-12)):
            return 1.0
    return _power_ascent(blocks)


def _power_ascent(blocks: np.ndarray, iters: int = 80, restarts: int = 4) -> float:
    """Lower-bound estimate of the induced block-max norm by alternating ascent."""
    n, _, m, _ = blocks.shape
    rng = np.random.default_rng(0)
    best = 0.0
    for _ in range(restarts):
        x = rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        for _ in range(iters):
            y = np.einsum("lkab,kb->la", blocks, x)
            norms = np.linalg.norm(y, axis=1)
            best = max(best, float(norms.max()))
            l_star = int(np.argmax(norms))
            if norms[l_star] == 0.0:
                break
            u = y[l_star] / norms[l_star]
            x_new = np.einsum("kba,b->ka", blocks[l_star].conj(), u)
            nrm = np.linalg.norm(x_new, axis=1)
            keep = nrm <= 1e-300
            x = np.where(keep[:, None], x, x_new / np.where(keep, 1.0, nrm)[:, None])
    return best


@dataclass
class StabilityInfo:
    rho_b: float
    rho_spectral_bound: float
    rho_f: float
    mean_stable: bool
    mean_square_stable: bool
    ill_conditioned: bool


def stability_report(mean_dynamics: MeanDynamics) -> StabilityInfo:
    """Spectral radii of the mean and mean-square recursions.

    rho_spectral_bound is the spectral radius of the block-diagonal adapt
    factor; it upper-bounds rho(B) because the combine lifts have unit block
    maximum norm.
    """
    md = mean_dynamics
    rho_b = spectral_radius(md.b)
    m = md.m_dim
    eye = np.eye(m)
    mu = np.real(np.diag(md.big_m)).reshape(md.n_nodes, m)[:, 0]
    rho_bound = 0.0
    for k in range(md.n_nodes):
        block = eye - mu[k] * md.r_prime[k]
        rho_bound = max(rho_bound, float(np.abs(np.linalg.eigvalsh(
            0.5 * (block + block.conj().T))).max()))
    rho_f = rho_b ** 2
    return StabilityInfo(
        rho_b=rho_b,
        rho_spectral_bound=rho_bound,
        rho_f=rho_f,
        mean_stable=rho_b < 1.0,
        mean_square_stable=rho_f < 1.0,
        ill_conditioned=abs(1.0 - rho_b) <= ILL_CONDITIONED_TOL,
    )


# ---------------------------------------------------------------------------
# full report


@dataclass
class TheoryReport:
    stability: StabilityInfo
    bounds: StepSizeBounds
    bias_g: np.ndarray | None
    msd: float | None
    emse: float | None
    msd_track: float | None
    emse_track: float | None
    warnings: list[str]

    def to_dict(self) -> dict:
        def to_db(x):
            if x is None:
                return None
            return float(10.0 * np.log10(x)) if x > 0 else float("-inf")

        b = self.bounds
        ok_r = b.ok_robust()
        mu_bounds = []
        for k in range(len(b.mu)):
            mu_bounds.append({
                "node": k + 1,
                "mu": float(b.mu[k]),
                "bound_tight": float(b.tight[k]),
                "bound_robust": None if b.robust is None else float(b.robust[k]),
                "bound_noise_free": float(b.noise_free[k]),
                "ok_tight": bool(b.mu[k] < b.tight[k]),
                "ok_robust": None if ok_r is None else bool(ok_r[k]),
            })
        out = {
            "rho_b": float(self.stability.rho_b),
            "rho_spectral_bound": float(self.stability.rho_spectral_bound),
            "rho_f": float(self.stability.rho_f),
            "mu_bounds": mu_bounds,
            "bias_norm": (None if self.bias_g is None
                          else float(np.linalg.norm(self.bias_g))),
            "msd_db": to_db(self.msd),
            "emse_db": to_db(self.emse),
            "warnings": list(self.warnings),
        }
        if self.msd_track is not None:
            out["msd_track_db"] = to_db(self.msd_track)
            out["emse_track_db"] = to_db(self.emse_track)
        return out


def theory_report(network: NetworkModel, matrices: CombinationMatrices) -> TheoryReport:
    """Assemble stability, bounds, bias, and steady-state metrics.

    Instability never raises here: it lands in ``warnings`` and the affected
    metrics are left as None.
    """
    md = assemble_mean_dynamics(network, matrices)
    stab = stability_report(md)
    bounds = step_size_bounds(network, matrices)
    warnings: list[str] = []

    if not stab.mean_stable or not np.all(bounds.ok_tight()):
        bad = np.flatnonzero(~bounds.ok_tight()) + 1
        detail = f" (nodes {bad.tolist()} above the spectral bound)" if bad.size else ""
        warnings.append(f"mean-unstable: rho(B) = {stab.rho_b:.6f}{detail}")
    if stab.ill_conditioned:
        warnings.append("ill-conditioned: rho(B) within 1e-6 of 1")
    if bounds.robust is None:
        warnings.append(
            "robust step-size bound skipped: data-sharing matrix is not doubly stochastic"
        )

    bias_g = None
    try:
        bias_g = bias(md)
    except np.linalg.LinAlgError:
        warnings.append("bias solve failed: mean recursion is singular")

    msd = emse = msd_track = emse_track = None
    if not stab.mean_square_stable:
        warnings.append(f"mean-square-unstable: rho(B)^2 = {stab.rho_f:.6f}")
    else:
        nm = assemble_noise_moments(network, matrices, md)
        num = _general_numerator(md, nm)
        try:
            vals = _steady_state_values(md.b, [(num, _omega_msd(network)),
                                               (num, _omega_emse(network))])
            msd, emse = vals
        except InstabilityError as exc:
            warnings.append(f"steady-state solve failed: {exc}")
        if (network.weights.mode == "random_walk"
                and network.weights.r_eta is not None and msd is not None):
            try:
                tm = tracking_metrics(network, matrices)
                msd_track, emse_track = tm.msd, tm.emse
            except (InstabilityError, ValueError) as exc:
                warnings.append(f"tracking metrics failed: {exc}")

    return TheoryReport(stability=stab, bounds=bounds, bias_g=bias_g,
                        msd=msd, emse=emse, msd_track=msd_track,
                        emse_track=emse_track, warnings=warnings)
