"""Monte-Carlo engine for diffusion adaptation with noisy information exchange.

Each iteration of the simulated recursion runs three steps per node:
combine neighbor estimates received over noisy links, adapt against shared
(measurement, regressor) pairs received over noisy links, then combine the
neighbors' intermediate estimates received over noisy links. Self links are
perfect; the four exchange-noise sources (estimates, intermediate estimates,
measurements, regressors) act only on cross links.

Reproducibility contract: every (run, node, noise-source) triple owns an
independent RNG stream derived from the master seed, link noise being owned
by the receiving node. Curves are bit-identical for a fixed master seed
regardless of the thread count; runs are reduced in run-index order.

``diffusion_step`` is the single implementation of the recursion. It accepts
arbitrary leading batch dimensions on the state, so the Monte-Carlo driver
vectorizes across runs by calling it on stacked states.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .linalg import crandn, db10, psd_factor
from .network import CombinationMatrices, NetworkModel, NodeProfile, link_index

__all__ = [
    "RngPolicy",
    "SimulationOptions",
    "StepData",
    "AdaptiveArrays",
    "DiffusionState",
    "LearningCurve",
    "sample_data",
    "perturb_exchange",
    "diffusion_step",
    "run_monte_carlo",
    "steady_state_level",
    "curve_to_csv",
    "trajectory_to_csv",
]

_SOURCE_IDS = {"u": 0, "v": 1, "eta": 2, "w": 3, "psi": 4, "d": 5, "u_link": 6}

_MODES = ("stationary", "random_walk", "rotation")


@dataclass(frozen=True)
class RngPolicy:
    """Deterministic stream derivation from a single master seed.

    Stream (run, source, owner) is seeded by
    SeedSequence(master_seed, spawn_key=(run, source_id, owner)); sources are
    "u" and "v" (owner = node), "eta" (the target's random-walk increments,
    owner 0), and the link sources "w", "psi", "d", "u_link" (owner = the
    receiving node, covering its in-links in canonical link order).
    """

    master_seed: int

    def stream(self, run: int, source: str, owner: int = 0) -> np.random.Generator:
        sid = _SOURCE_IDS[source]
        ss = np.random.SeedSequence(self.master_seed, spawn_key=(run, sid, owner))
        return np.random.default_rng(ss)


@dataclass
class SimulationOptions:
    """Engine knobs; ``mode`` of None follows the network's weight trajectory."""

    mode: str | None = None
    adaptive_slot: str | None = None
    nu: float = 0.05
    record_mean_error: bool = False
    record_trajectory: bool = False
    divergence_threshold: float = 1e12
    threads: int = 1
    chunk_size: int = 16
    window: int = 256


@dataclass
class StepData:
    """One iteration's random draws.

    u : (..., N, M) clean regressors; v : (..., N) measurement noise;
    w_true : (..., M) or (M,) true weight vector for this iteration.
    v_w, v_psi, v_u : (..., L, M) link noise on exchanged estimates,
    intermediate estimates, and regressors; v_d : (..., L) on measurements.
    Link arrays follow canonical link order; None means zero.
    """

    u: np.ndarray
    v: np.ndarray
    w_true: np.ndarray
    v_w: np.ndarray | None = None
    v_psi: np.ndarray | None = None
    v_d: np.ndarray | None = None
    v_u: np.ndarray | None = None


@dataclass
class AdaptiveArrays:
    """Vector form of the adaptive rule's state (batched over runs)."""

    nu: np.ndarray
    gamma2_self: np.ndarray
    gamma2_link: np.ndarray
    a_self: np.ndarray | None = None
    a_link: np.ndarray | None = None


@dataclass
class DiffusionState:
    """Per-node estimates; leading dimensions of ``w`` batch over runs."""

    w: np.ndarray
    phi: np.ndarray | None = None
    psi: np.ndarray | None = None
    adaptive: AdaptiveArrays | None = None

    @classmethod
    def initial(cls, n_nodes: int, m_dim: int, batch=(), adaptive_nu=None,
                n_links: int = 0) -> "DiffusionState":
        w = np.zeros(batch + (n_nodes, m_dim), dtype=complex)
        adaptive = None
        if adaptive_nu is not None:
            nu = np.broadcast_to(np.asarray(adaptive_nu, dtype=float), (n_nodes,)).copy()
            if np.any(nu <= 0) or np.any(nu >= 1):
                raise ValueError("engine forgetting factor must lie in (0, 1)")
            adaptive = AdaptiveArrays(
                nu=nu,
                gamma2_self=np.ones(batch + (n_nodes,)),
                gamma2_link=np.ones(batch + (n_links,)),
            )
        return cls(w=w, adaptive=adaptive)


# ---------------------------------------------------------------------------
# data sampling ops


def sample_data(stream: np.random.Generator, nodes: NodeProfile, node: int,
                w_true: np.ndarray):
    """Draw one (d, u, v) triple for a node: d = u w_true + v.

    The regressor is drawn first, then the measurement noise, both circular
    complex Gaussian with the node's statistics.
    """
    factor = psd_factor(nodes.r_u[node])
    u = crandn(stream, (nodes.m_dim,)) @ factor.conj().T
    v = complex(crandn(stream, ()) * np.sqrt(nodes.sigma_v2[node]))
    d = complex(u @ np.asarray(w_true, dtype=complex)) + v
    return d, u, v


def perturb_exchange(streams, network: NetworkModel, payloads: dict, pairs):
    """Apply link noise to exchanged payloads for the given directed pairs.

    ``streams`` is a Generator or a mapping from source name ("w", "psi",
    "d", "u") to Generators. ``payloads`` maps source names to per-node
    arrays; batch dimensions may precede the node axis. Self pairs (k, k)
    pass through unperturbed. Returns {source: (..., P, ...) received}.
    """
    if isinstance(streams, np.random.Generator):
        streams = {s: streams for s in ("w", "psi", "d", "u")}
    pos = {lk: p for p, lk in enumerate(link_index(network.topology))}
    ln = network.link_noise
    m = network.m_dim
    stats = {
        "w": ("vector", ln.r_w),
        "psi": ("vector", ln.r_psi),
        "d": ("scalar", ln.sigma_d2),
        "u": ("vector", ln.r_u_link),
    }
    out = {}
    for source in ("w", "psi", "d", "u"):
        if source not in payloads:
            continue
        arr = np.asarray(payloads[source], dtype=complex)
        kind, stat = stats[source]
        node_axis = -2 if kind == "vector" else -1
        received = []
        for l, k in pairs:
            clean = np.take(arr, l, axis=node_axis)
            if l == k:
                received.append(clean)
                continue
            p = pos[(l, k)]
            batch = clean.shape[:-1] if kind == "vector" else clean.shape
            if kind == "vector":
                noise = crandn(streams[source], batch + (m,)) @ psd_factor(stat[p]).conj().T
            else:
                noise = crandn(streams[source], batch) * np.sqrt(stat[p])
            received.append(clean + noise)
        out[source] = np.stack(received, axis=node_axis if kind == "vector" else -1)
    return out


# ---------------------------------------------------------------------------
# the recursion


class _StepOperator:
    """Precompiled structure for one network/matrices pair."""

    def __init__(self, network: NetworkModel, matrices: CombinationMatrices):
        topo = network.topology
        n, m = network.n_nodes, network.m_dim
        links = link_index(topo)
        self.n, self.m = n, m
        self.links = links
        self.src = np.array([l for l, _ in links], dtype=int)
        self.dst = np.array([k for _, k in links], dtype=int)
        self.mu = network.nodes.mu
        eye = np.eye(n)
        self.a1, self.c, self.a2 = matrices.a1, matrices.c, matrices.a2
        self.a1_identity = np.array_equal(self.a1, eye)
        self.a2_identity = np.array_equal(self.a2, eye)
        n_links = len(links)
        a1_link = self.a1[self.src, self.dst] if n_links else np.zeros(0)
        a2_link = self.a2[self.src, self.dst] if n_links else np.zeros(0)
        c_link = self.c[self.src, self.dst] if n_links else np.zeros(0)
        self.need_v_w = bool(np.any(a1_link))
        self.need_v_psi_static = bool(np.any(a2_link))
        self.c_cross = bool(np.any(c_link))
        self.c_link = c_link
        self.mu_c_diag = (self.mu * np.diag(self.c))[:, None]

        def scatter(values):
            g = np.zeros((n, n_links))
            g[self.dst, np.arange(n_links)] = values
            return g

        self.g1 = scatter(a1_link)
        self.g2 = scatter(a2_link)
        self.gc = scatter(self.mu[self.dst] * c_link) if n_links else np.zeros((n, 0))
        self.ind = scatter(np.ones(n_links))


def diffusion_step(state: DiffusionState, network: NetworkModel,
                   matrices: CombinationMatrices, data: StepData,
                   operator: _StepOperator | None = None) -> DiffusionState:
    """Advance the three-step recursion by one iteration.

    Runs combine (received estimates), adapt (received data pairs), combine
    (received intermediate estimates). When ``state.adaptive`` is set the
    second combine uses online inverse-variance weights updated from the
    received intermediate estimates; otherwise the static matrices apply.
    Returns a new state carrying w, phi, psi, and the updated adaptive state.
    """
    op = operator if operator is not None else _StepOperator(network, matrices)
    w = state.w
    u = data.u
    wt = np.asarray(data.w_true, dtype=complex)
    if wt.ndim == 1:
        wt = np.broadcast_to(wt, u.shape[:-2] + wt.shape)

    phi = w if op.a1_identity else np.einsum("lk,...lm->...km", op.a1, w)
    if data.v_w is not None and op.need_v_w:
        phi = phi + np.einsum("kp,...pm->...km", op.g1, data.v_w)

    d = np.einsum("...km,...m->...k", u, wt) + data.v
    e_self = d - np.einsum("...km,...km->...k", u, phi)
    psi = phi + op.mu_c_diag * u.conj() * e_self[..., None]
    if op.c_cross:
        u_pair = u[..., op.src, :]
        if data.v_u is not None:
            u_pair = u_pair + data.v_u
        d_pair = d[..., op.src]
        if data.v_d is not None:
            d_pair = d_pair + data.v_d
        e_pair = d_pair - np.einsum("...pm,...pm->...p", u_pair, phi[..., op.dst, :])
        psi = psi + np.einsum("kp,...pm->...km", op.gc, u_pair.conj() * e_pair[..., None])

    if state.adaptive is not None:
        ad = state.adaptive
        psi_recv = psi[..., op.src, :]
        if data.v_psi is not None:
            psi_recv = psi_recv + data.v_psi
        n_self = np.sum(np.abs(psi - w) ** 2, axis=-1)
        n_link = np.sum(np.abs(psi_recv - w[..., op.dst, :]) ** 2, axis=-1)
        g2s = (1.0 - ad.nu) * ad.gamma2_self + ad.nu * n_self
        g2l = (1.0 - ad.nu[op.dst]) * ad.gamma2_link + ad.nu[op.dst] * n_link
        inv_s = 1.0 / g2s
        inv_l = 1.0 / g2l
        den = inv_s + np.einsum("kp,...p->...k", op.ind, inv_l)
        a_self = inv_s / den
        a_link = inv_l / den[..., op.dst]
        w_new = a_self[..., None] * psi + np.einsum(
            "kp,...p,...pm->...km", op.ind, a_link, psi_recv
        )
        new_ad = AdaptiveArrays(nu=ad.nu, gamma2_self=g2s, gamma2_link=g2l,
                                a_self=a_self, a_link=a_link)
        return DiffusionState(w=w_new, phi=phi, psi=psi, adaptive=new_ad)

    w_new = psi if op.a2_identity else np.einsum("lk,...lm->...km", op.a2, psi)
    if data.v_psi is not None and op.need_v_psi_static:
        w_new = w_new + np.einsum("kp,...pm->...km", op.g2, data.v_psi)
    return DiffusionState(w=w_new, phi=phi, psi=psi, adaptive=None)


# ---------------------------------------------------------------------------
# Monte-Carlo driver


@dataclass
class LearningCurve:
    """Run-averaged learning curves (linear scale) plus optional recordings.

    mean_error stacks nodes then coordinates (node-major), matching the
    stacked error-vector convention of the analysis module.
    mean_error_stderr is the per-component standard error of the complex
    mean (deviation modulus). Divergent runs are excluded from every average.
    """

    msd: np.ndarray
    emse: np.ndarray
    runs: int
    divergent_runs: int
    mean_error: np.ndarray | None = None
    mean_error_stderr: np.ndarray | None = None
    avg_estimate: np.ndarray | None = None
    avg_target: np.ndarray | None = None

    @property
    def msd_db(self) -> np.ndarray:
        return db10(self.msd)

    @property
    def emse_db(self) -> np.ndarray:
        return db10(self.emse)

    @property
    def iterations(self) -> int:
        return len(self.msd)


def _resolve_mode(network: NetworkModel, options: SimulationOptions) -> str:
    mode = options.mode
    if mode is None:
        mode = {"constant": "stationary"}.get(network.weights.mode, network.weights.mode)
    if mode not in _MODES:
        raise ValueError(f"unknown simulation mode '{mode}'")
    if mode == "random_walk" and network.weights.r_eta is None:
        raise ValueError("random_walk mode requires the network to carry r_eta")
    if mode == "rotation" and network.weights.omega is None:
        raise ValueError("rotation mode requires the network to carry omega")
    return mode


class _Sampler:
    """Window-sized noise draws for a chunk of runs, per-stream bulk draws."""

    def __init__(self, network: NetworkModel, op: _StepOperator, mode: str,
                 policy: RngPolicy, runs: list[int], adaptive: bool):
        n, m = op.n, op.m
        self.op = op
        self.mode = mode
        self.m = m
        self.chol_u = np.stack([psd_factor(network.nodes.r_u[k]) for k in range(n)])
        self.sig_v = np.sqrt(network.nodes.sigma_v2)
        ln = network.link_noise
        n_links = len(op.links)
        self.need_w = op.need_v_w and bool(np.any(ln.r_w))
        self.need_psi = (op.need_v_psi_static or adaptive) and bool(np.any(ln.r_psi))
        self.need_d = op.c_cross and bool(np.any(ln.sigma_d2))
        self.need_u_link = op.c_cross and bool(np.any(ln.r_u_link))
        if n_links:
            self.chol_w = np.stack([psd_factor(ln.r_w[p]) for p in range(n_links)])
            self.chol_psi = np.stack([psd_factor(ln.r_psi[p]) for p in range(n_links)])
            self.chol_u_link = np.stack([psd_factor(ln.r_u_link[p]) for p in range(n_links)])
            self.sig_d = np.sqrt(ln.sigma_d2)
        self.n_links = n_links
        # in-links of node k occupy slots starts[k]:starts[k+1] in link order
        self.starts = np.searchsorted(op.dst, np.arange(n + 1))
        self.chol_eta = (psd_factor(network.weights.r_eta)
                         if mode == "random_walk" else None)
        self.gens = []
        for run in runs:
            g = {
                "u": [policy.stream(run, "u", k) for k in range(n)],
                "v": [policy.stream(run, "v", k) for k in range(n)],
            }
            if mode == "random_walk":
                g["eta"] = policy.stream(run, "eta")
            for source, needed in (("w", self.need_w), ("psi", self.need_psi),
                                   ("d", self.need_d), ("u_link", self.need_u_link)):
                if needed:
                    g[source] = [policy.stream(run, source, k) for k in range(n)]
            self.gens.append(g)

    def _draw_links(self, source: str, t: int):
        r = len(self.gens)
        z = np.zeros((r, t, self.n_links, self.m), dtype=complex)
        for i, g in enumerate(self.gens):
            for k, gen in enumerate(g[source]):
                lo, hi = self.starts[k], self.starts[k + 1]
                if hi > lo:
                    z[i, :, lo:hi, :] = crandn(gen, (t, hi - lo, self.m))
        return z

    def window(self, t: int) -> dict:
        """Draw all noise for the next ``t`` iterations of this chunk."""
        r = len(self.gens)
        n = self.op.n
        zu = np.empty((r, t, n, self.m), dtype=complex)
        zv = np.empty((r, t, n), dtype=complex)
        for i, g in enumerate(self.gens):
            for k in range(n):
                zu[i, :, k, :] = crandn(g["u"][k], (t, self.m))
                zv[i, :, k] = crandn(g["v"][k], (t,))
        out = {
            "u": np.einsum("rtkm,kpm->rtkp", zu, self.chol_u.conj()),
            "v": zv * self.sig_v,
        }
        if self.mode == "random_walk":
            zeta = np.stack([crandn(g["eta"], (t, self.m)) for g in self.gens])
            out["eta"] = np.einsum("rtm,pm->rtp", zeta, self.chol_eta.conj())
        if self.need_w:
            out["v_w"] = np.einsum("rtpm,pqm->rtpq", self._draw_links("w", t),
                                   self.chol_w.conj())
        if self.need_psi:
            out["v_psi"] = np.einsum("rtpm,pqm->rtpq", self._draw_links("psi", t),
                                     self.chol_psi.conj())
        if self.need_d:
            zd = np.zeros((r, t, self.n_links), dtype=complex)
            for i, g in enumerate(self.gens):
                for k in range(self.op.n):
                    lo, hi = self.starts[k], self.starts[k + 1]
                    if hi > lo:
                        zd[i, :, lo:hi] = crandn(g["d"][k], (t, hi - lo))
            out["v_d"] = zd * self.sig_d
        if self.need_u_link:
            out["v_u"] = np.einsum("rtpm,pqm->rtpq", self._draw_links("u_link", t),
                                   self.chol_u_link.conj())
        return out


def _simulate_chunk(network, op, mode, options, policy, runs, iterations):
    n, m = op.n, op.m
    r = len(runs)
    sampler = _Sampler(network, op, mode, policy, runs,
                       adaptive=options.adaptive_slot is not None)
    nu = options.nu if options.adaptive_slot is not None else None
    state = DiffusionState.initial(n, m, batch=(r,), adaptive_nu=nu,
                                   n_links=len(op.links))
    w_true = np.tile(np.asarray(network.weights.w0, dtype=complex), (r, 1))
    if mode == "rotation":
        phase = np.exp(1j * network.weights.omega)

    msd = np.empty((r, iterations))
    emse = np.empty((r, iterations))
    bad = np.zeros(r, dtype=bool)
    err_traj = (np.empty((r, iterations, n, m), dtype=complex)
                if options.record_mean_error else None)
    wbar = np.empty((r, iterations, m), dtype=complex) if options.record_trajectory else None
    wtrue_traj = (np.empty((r, iterations, m), dtype=complex)
                  if options.record_trajectory else None)

    matrices = CombinationMatrices(a1=op.a1, c=op.c, a2=op.a2)
    done = 0
    with np.errstate(over="ignore", invalid="ignore"):
        while done < iterations:
            t_win = min(options.window, iterations - done)
            draws = sampler.window(t_win)
            for t in range(t_win):
                i = done + t
                if mode == "random_walk":
                    w_true = w_true + draws["eta"][:, t]
                elif mode == "rotation":
                    w_true = w_true * phase
                u_t = draws["u"][:, t]
                err_prev = w_true[:, None, :] - state.w
                emse[:, i] = np.mean(
                    np.abs(np.einsum("rkm,rkm->rk", u_t, err_prev)) ** 2, axis=1
                )
                data = StepData(
                    u=u_t,
                    v=draws["v"][:, t],
                    w_true=w_true,
                    v_w=draws["v_w"][:, t] if "v_w" in draws else None,
                    v_psi=draws["v_psi"][:, t] if "v_psi" in draws else None,
                    v_d=draws["v_d"][:, t] if "v_d" in draws else None,
                    v_u=draws["v_u"][:, t] if "v_u" in draws else None,
                )
                state = diffusion_step(state, network, matrices, data, operator=op)
                err = w_true[:, None, :] - state.w
                err2 = np.sum(np.abs(err) ** 2, axis=-1)
                msd[:, i] = np.mean(err2, axis=1)
                node_max = np.max(err2, axis=1)
                bad |= ~np.isfinite(node_max) | (node_max > options.divergence_threshold)
                if err_traj is not None:
                    err_traj[:, i] = err
                if wbar is not None:
                    wbar[:, i] = np.mean(state.w, axis=1)
                    wtrue_traj[:, i] = w_true
            done += t_win
    return {"msd": msd, "emse": emse, "bad": bad, "err": err_traj,
            "wbar": wbar, "wtrue": wtrue_traj}


def run_monte_carlo(network: NetworkModel, matrices: CombinationMatrices,
                    options: SimulationOptions, runs: int, iterations: int,
                    rng_policy: RngPolicy) -> LearningCurve:
    """Average ``runs`` independent realizations over ``iterations`` steps.

    Runs are simulated in fixed-size chunks (vectorized across the chunk) and
    reduced in run order, so results do not depend on chunking or threads.
    Runs whose error leaves the divergence threshold are excluded from all
    averages and counted.
    """
    if iterations < 1:
        raise ValueError("iterations must be at least 1")
    if runs < 1:
        raise ValueError("runs must be at least 1")
    if options.adaptive_slot not in (None, "a2"):
        raise ValueError("adaptive_slot must be None or 'a2'")
    mode = _resolve_mode(network, options)
    op = _StepOperator(network, matrices)
    n, m = op.n, op.m

    chunks = [list(range(lo, min(lo + options.chunk_size, runs)))
              for lo in range(0, runs, options.chunk_size)]
    jobs = (lambda ch: _simulate_chunk(network, op, mode, options, rng_policy,
                                       ch, iterations))
    if options.threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=options.threads) as pool:
            results = pool.map(jobs, chunks)
            return _reduce(list(results), runs, iterations, n, m, options)
    return _reduce([jobs(ch) for ch in chunks], runs, iterations, n, m, options)


def _reduce(results, runs, iterations, n, m, options) -> LearningCurve:
    msd_all = np.concatenate([r["msd"] for r in results])
    emse_all = np.concatenate([r["emse"] for r in results])
    bad = np.concatenate([r["bad"] for r in results])
    valid = ~bad
    n_valid = int(valid.sum())
    if n_valid == 0:
        nanrow = np.full(iterations, np.nan)
        return LearningCurve(msd=nanrow, emse=nanrow.copy(), runs=runs,
                             divergent_runs=runs)
    msd = msd_all[valid].mean(axis=0)
    emse = emse_all[valid].mean(axis=0)

    mean_error = mean_error_stderr = None
    if options.record_mean_error:
        sum_err = np.zeros((iterations, n, m), dtype=complex)
        sum_sq = np.zeros((iterations, n, m))
        offset = 0
        for res in results:
            err = res["err"]
            for j in range(err.shape[0]):
                if valid[offset + j]:
                    sum_err += err[j]
                    sum_sq += np.abs(err[j]) ** 2
            offset += err.shape[0]
        mean = sum_err / n_valid
        if n_valid > 1:
            var = (sum_sq - np.abs(sum_err) ** 2 / n_valid) / (n_valid - 1)
            stderr = np.sqrt(np.clip(var, 0.0, None) / n_valid)
        else:
            stderr = np.full((iterations, n, m), np.inf)
        mean_error = mean.reshape(iterations, n * m)
        mean_error_stderr = stderr.reshape(iterations, n * m)

    avg_estimate = avg_target = None
    if options.record_trajectory:
        sum_wbar = np.zeros((iterations, m), dtype=complex)
        sum_wtrue = np.zeros((iterations, m), dtype=complex)
        offset = 0
        for res in results:
            for j in range(res["wbar"].shape[0]):
                if valid[offset + j]:
                    sum_wbar += res["wbar"][j]
                    sum_wtrue += res["wtrue"][j]
            offset += res["wbar"].shape[0]
        avg_estimate = sum_wbar / n_valid
        avg_target = sum_wtrue / n_valid

    return LearningCurve(msd=msd, emse=emse, runs=runs,
                         divergent_runs=runs - n_valid,
                         mean_error=mean_error,
                         mean_error_stderr=mean_error_stderr,
                         avg_estimate=avg_estimate, avg_target=avg_target)


def steady_state_level(values: np.ndarray, rho_b: float | None = None,
                       fraction: float = 0.2, tc_factor: float = 5.0) -> float:
    """Average of the trailing ``fraction`` of a learning curve.

    If the mean-transition spectral radius is supplied, the averaging window
    must start after ``tc_factor`` times the slowest time constant
    1/(1 - rho_b); otherwise the curve is judged too short to have settled.
    """
    values = np.asarray(values, dtype=float)
    iters = len(values)
    start = int(np.ceil((1.0 - fraction) * iters))
    if rho_b is not None:
        if rho_b >= 1.0:
            raise ValueError("steady state undefined: mean recursion is unstable")
        needed = tc_factor / (1.0 - rho_b)
        if start < needed:
            raise ValueError(
                f"curve too short for steady state: window starts at {start}, "
                f"needs at least {needed:.0f} iterations of settling"
            )
    return float(values[start:].mean())


# ---------------------------------------------------------------------------
# CSV output


def curve_to_csv(curve: LearningCurve, path) -> None:
    """Columns: iter, msd_db, emse_db, msd_linear, emse_linear, divergent_runs."""
    msd_db, emse_db = curve.msd_db, curve.emse_db
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iter", "msd_db", "emse_db", "msd_linear", "emse_linear",
                         "divergent_runs"])
        for i in range(curve.iterations):
            writer.writerow([i, repr(float(msd_db[i])), repr(float(emse_db[i])),
                             repr(float(curve.msd[i])), repr(float(curve.emse[i])),
                             curve.divergent_runs])


def trajectory_to_csv(curve: LearningCurve, path) -> None:
    """Network-average estimate next to the true target, per coordinate."""
    if curve.avg_estimate is None:
        raise ValueError("curve was recorded without trajectories")
    m = curve.avg_estimate.shape[1]
    header = ["iter"]
    for j in range(1, m + 1):
        header += [f"est_re_{j}", f"est_im_{j}"]
    for j in range(1, m + 1):
        header += [f"true_re_{j}", f"true_im_{j}"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(curve.iterations):
            row = [i]
            for j in range(m):
                row += [repr(float(curve.avg_estimate[i, j].real)),
                        repr(float(curve.avg_estimate[i, j].imag))]
            for j in range(m):
                row += [repr(float(curve.avg_target[i, j].real)),
                        repr(float(curve.avg_target[i, j].imag))]
            writer.writerow(row)
