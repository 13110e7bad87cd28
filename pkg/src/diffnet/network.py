"""Network description for diffusion adaptation with noisy information exchange.

A network bundles four things: an undirected connected topology whose
neighborhoods include the node itself, per-node signal statistics (regressor
covariance, measurement-noise variance, step-size), per-directed-link noise
statistics for the four exchanged quantities (estimates, intermediate
estimates, measurements, regressors), and the trajectory of the true weight
vector being estimated (constant, random walk, or phase rotation).

Link noise lives only on cross links: a node reads its own data perfectly, so
the (k, k) entries of every link-noise statistic are structurally zero. Link
statistics are stored as arrays aligned with the canonical directed-link
ordering produced by :func:`link_index`.

External JSON files use 1-based node indices and [re, im] pairs for complex
numbers; in memory everything is 0-based ndarray data.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .linalg import crandn, hermitian_residual, min_eig_floor

__all__ = [
    "Topology",
    "NodeProfile",
    "LinkNoiseProfile",
    "CombinationMatrices",
    "WeightTrajectory",
    "NetworkModel",
    "ValidationReport",
    "VarianceRanges",
    "link_index",
    "validate",
    "random_network",
    "network_to_dict",
    "network_from_dict",
    "save_network",
    "load_network",
]

HERMITIAN_TOL = 1e-10
PSD_FLOOR = -1e-10
STOCHASTIC_TOL = 1e-8

WEIGHT_MODES = ("constant", "random_walk", "rotation")


@dataclass
class Topology:
    """Undirected connectivity with implicit self-loops.

    ``adjacency`` is a boolean (N, N) matrix, symmetric with a True diagonal.
    Neighborhood of node k = {l : adjacency[l, k]} and always contains k.
    """

    n_nodes: int
    adjacency: np.ndarray

    @classmethod
    def from_edges(cls, n_nodes: int, edges) -> "Topology":
        """Build from a list of undirected cross pairs (0-based)."""
        adj = np.eye(n_nodes, dtype=bool)
        for l, k in edges:
            adj[l, k] = True
            adj[k, l] = True
        return cls(n_nodes=n_nodes, adjacency=adj)

    def neighbors(self, k: int) -> np.ndarray:
        """Sorted neighborhood of node k, including k itself."""
        return np.flatnonzero(self.adjacency[:, k])

    def degree(self, k: int) -> int:
        """Neighborhood size |N_k|, counting the node itself."""
        return int(np.count_nonzero(self.adjacency[:, k]))

    def cross_edges(self):
        """Undirected cross pairs (l, k) with l < k."""
        n = self.n_nodes
        return [(l, k) for k in range(n) for l in range(k) if self.adjacency[l, k]]

    def is_connected(self) -> bool:
        n = self.n_nodes
        if n == 0:
            return False
        seen = np.zeros(n, dtype=bool)
        stack = [0]
        seen[0] = True
        while stack:
            k = stack.pop()
            for l in np.flatnonzero(self.adjacency[:, k]):
                if not seen[l]:
                    seen[l] = True
                    stack.append(int(l))
        return bool(seen.all())


def link_index(topology: Topology) -> list[tuple[int, int]]:
    """Canonical ordering of directed cross links (sender l -> receiver k).

    Receivers are visited in ascending order and, within a receiver, senders
    ascend as well, so the list is grouped by receiving node. Self links are
    excluded; they carry no noise.
    """
    out: list[tuple[int, int]] = []
    for k in range(topology.n_nodes):
        for l in np.flatnonzero(topology.adjacency[:, k]):
            if l != k:
                out.append((int(l), k))
    return out


@dataclass
class NodeProfile:
    """Per-node signal statistics and step-sizes.

    r_u : (N, M, M) complex PSD regressor covariances.
    sigma_v2 : (N,) nonnegative measurement-noise variances.
    mu : (N,) positive step-sizes.
    """

    m_dim: int
    r_u: np.ndarray
    sigma_v2: np.ndarray
    mu: np.ndarray


@dataclass
class LinkNoiseProfile:
    """Noise statistics for the four exchanged quantities, one row per link.

    Arrays align with :func:`link_index`: r_w and r_psi are (L, M, M)
    covariances of the noise added to exchanged estimates and intermediate
    estimates, sigma_d2 is the (L,) variance on exchanged measurements, and
    r_u_link is the (L, M, M) covariance of the noise on exchanged regressors.
    """

    r_w: np.ndarray
    sigma_d2: np.ndarray
    r_u_link: np.ndarray
    r_psi: np.ndarray

    @classmethod
    def zeros(cls, n_links: int, m_dim: int) -> "LinkNoiseProfile":
        return cls(
            r_w=np.zeros((n_links, m_dim, m_dim), dtype=complex),
            sigma_d2=np.zeros(n_links),
            r_u_link=np.zeros((n_links, m_dim, m_dim), dtype=complex),
            r_psi=np.zeros((n_links, m_dim, m_dim), dtype=complex),
        )

    def is_zero(self) -> bool:
        return (
            not np.any(self.r_w)
            and not np.any(self.sigma_d2)
            and not np.any(self.r_u_link)
            and not np.any(self.r_psi)
        )


@dataclass
class CombinationMatrices:
    """The (A1, C, A2) triple steering the three-step diffusion recursion.

    A1 and A2 are left stochastic (columns sum to one); C is right stochastic
    (rows sum to one). Entries are zero off the neighborhood sparsity pattern.
    """

    a1: np.ndarray
    c: np.ndarray
    a2: np.ndarray

    @classmethod
    def identity(cls, n_nodes: int) -> "CombinationMatrices":
        i = np.eye(n_nodes)
        return cls(a1=i.copy(), c=i.copy(), a2=i.copy())


@dataclass
class WeightTrajectory:
    """True weight-vector trajectory.

    mode "constant": fixed at w0. mode "random_walk": w0 plus i.i.d.
    zero-mean increments with covariance r_eta. mode "rotation": every entry
    multiplied by exp(j*omega) per iteration, starting from w0.
    """

    mode: str
    w0: np.ndarray
    r_eta: np.ndarray | None = None
    omega: float | None = None


@dataclass
class NetworkModel:
    topology: Topology
    nodes: NodeProfile
    link_noise: LinkNoiseProfile
    weights: WeightTrajectory

    @property
    def n_nodes(self) -> int:
        return self.topology.n_nodes

    @property
    def m_dim(self) -> int:
        return self.nodes.m_dim

    @property
    def links(self) -> list[tuple[int, int]]:
        return link_index(self.topology)


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, message: str) -> None:
        self.violations.append(message)

    def __str__(self) -> str:
        if self.ok:
            return "ok"
        return "\n".join(self.violations)


def _check_cov(report, label, mat):
    if hermitian_residual(mat) > HERMITIAN_TOL:
        report.add(f"{label} is not Hermitian")
    elif min_eig_floor(mat) < PSD_FLOOR:
        report.add(f"{label} is not positive semi-definite")


def validate(network: NetworkModel, matrices: CombinationMatrices | None = None) -> ValidationReport:
    """Check every structural invariant; returns a report, never raises.

    Messages use 1-based node indices. Passing ``matrices`` additionally
    checks stochasticity and the neighborhood sparsity pattern.
    """
    rep = ValidationReport()
    topo = network.topology
    n = topo.n_nodes
    m = network.nodes.m_dim

    adj = topo.adjacency
    if adj.shape != (n, n):
        rep.add(f"adjacency has shape {adj.shape}, expected ({n}, {n})")
        return rep
    if not np.array_equal(adj, adj.T):
        rep.add("adjacency is not symmetric")
    if not np.all(np.diag(adj)):
        missing = np.flatnonzero(~np.diag(adj)) + 1
        rep.add(f"nodes {missing.tolist()} are missing self-loops")
    if not topo.is_connected():
        rep.add("topology is not connected")

    prof = network.nodes
    if prof.r_u.shape != (n, m, m):
        rep.add(f"r_u has shape {prof.r_u.shape}, expected ({n}, {m}, {m})")
    else:
        for k in range(n):
            _check_cov(rep, f"node {k + 1} regressor covariance", prof.r_u[k])
    if prof.sigma_v2.shape != (n,):
        rep.add(f"sigma_v2 has shape {prof.sigma_v2.shape}, expected ({n},)")
    elif np.any(prof.sigma_v2 < 0):
        bad = np.flatnonzero(prof.sigma_v2 < 0) + 1
        rep.add(f"nodes {bad.tolist()} have negative measurement-noise variance")
    if prof.mu.shape != (n,):
        rep.add(f"mu has shape {prof.mu.shape}, expected ({n},)")
    elif np.any(prof.mu <= 0):
        bad = np.flatnonzero(prof.mu <= 0) + 1
        rep.add(f"nodes {bad.tolist()} have non-positive step-size")

    links = link_index(topo)
    ln = network.link_noise
    n_links = len(links)
    shapes = {
        "r_w": (n_links, m, m),
        "sigma_d2": (n_links,),
        "r_u_link": (n_links, m, m),
        "r_psi": (n_links, m, m),
    }
    for name, want in shapes.items():
        got = getattr(ln, name).shape
        if got != want:
            rep.add(f"link_noise.{name} has shape {got}, expected {want}")
    if ln.r_w.shape == (n_links, m, m):
        for p, (l, k) in enumerate(links):
            tag = f"link {l + 1}->{k + 1}"
            _check_cov(rep, f"{tag} estimate-noise covariance", ln.r_w[p])
            _check_cov(rep, f"{tag} intermediate-noise covariance", ln.r_psi[p])
            _check_cov(rep, f"{tag} regressor-noise covariance", ln.r_u_link[p])
        if np.any(ln.sigma_d2 < 0):
            rep.add("negative measurement link-noise variance")

    w = network.weights
    if w.mode not in WEIGHT_MODES:
        rep.add(f"unknown weight mode '{w.mode}'")
    if np.asarray(w.w0).shape != (m,):
        rep.add(f"w0 has shape {np.asarray(w.w0).shape}, expected ({m},)")
    if w.mode == "random_walk":
        if w.r_eta is None:
            rep.add("random_walk mode requires r_eta")
        elif np.asarray(w.r_eta).shape != (m, m):
            rep.add(f"r_eta has shape {np.asarray(w.r_eta).shape}, expected ({m}, {m})")
        else:
            _check_cov(rep, "r_eta", w.r_eta)
    if w.mode == "rotation" and w.omega is None:
        rep.add("rotation mode requires omega")

    if matrices is not None:
        _validate_matrices(rep, topo, matrices)
    return rep


def _validate_matrices(rep: ValidationReport, topo: Topology, mats: CombinationMatrices) -> None:
    n = topo.n_nodes
    off_pattern = ~topo.adjacency
    for name, mat, axis in (("A1", mats.a1, 0), ("C", mats.c, 1), ("A2", mats.a2, 0)):
        if mat.shape != (n, n):
            rep.add(f"{name} has shape {mat.shape}, expected ({n}, {n})")
            continue
        if np.any(mat < 0):
            rep.add(f"{name} has negative entries")
        sums = mat.sum(axis=axis)
        kind = "column" if axis == 0 else "row"
        for idx in np.flatnonzero(np.abs(sums - 1.0) > STOCHASTIC_TOL):
            rep.add(f"{name} {kind} {idx + 1} sums to {sums[idx]:.4f}")
        if np.any(mat[off_pattern] != 0):
            rep.add(f"{name} has nonzero entries outside the neighborhood pattern")


# ---------------------------------------------------------------------------
# random generation


@dataclass(frozen=True)
class VarianceRanges:
    """Uniform sampling ranges for randomly generated network profiles.

    regressor_style "isotropic" draws R_u = sigma_u^2 I with sigma_u^2 in
    ``sigma_u2``; "trace_normalized" draws a random PSD matrix scaled to unit
    trace (``sigma_u2`` then ignored). Link-noise covariances are isotropic
    with variances drawn from the matching range.
    """

    sigma_u2: tuple[float, float] = (0.5, 2.0)
    sigma_v2: tuple[float, float] = (0.01, 0.1)
    sigma_w2: tuple[float, float] = (0.0, 0.0)
    sigma_d2: tuple[float, float] = (0.0, 0.0)
    sigma_u_link2: tuple[float, float] = (0.0, 0.0)
    sigma_psi2: tuple[float, float] = (0.0, 0.0)
    mu: tuple[float, float] = (0.01, 0.01)
    regressor_style: str = "isotropic"


def _uniform(gen, rng_pair, size=None):
    lo, hi = rng_pair
    if lo == hi:
        return np.full(size, float(lo)) if size is not None else float(lo)
    return gen.uniform(lo, hi, size=size)


def random_connected_topology(gen: np.random.Generator, n_nodes: int, connectivity: float,
                              max_tries: int = 200) -> Topology:
    """Erdos-Renyi draw retried until connected."""
    if n_nodes == 1:
        return Topology.from_edges(1, [])
    for _ in range(max_tries):
        mask = gen.random((n_nodes, n_nodes)) < connectivity
        upper = np.triu(mask, k=1)
        adj = upper | upper.T | np.eye(n_nodes, dtype=bool)
        topo = Topology(n_nodes, adj)
        if topo.is_connected():
            return topo
    raise RuntimeError(
        f"no connected topology found in {max_tries} draws (n={n_nodes}, p={connectivity})"
    )


def random_network(seed: int, n_nodes: int, m_dim: int, connectivity: float,
                   variance_ranges: VarianceRanges | None = None) -> NetworkModel:
    """Generate a connected network with randomly drawn profiles.

    Deterministic in ``seed``. The true weight vector is drawn circular
    Gaussian and the trajectory mode is "constant"; callers wanting tracking
    replace the weights block.
    """
    vr = variance_ranges or VarianceRanges()
    gen = np.random.default_rng(seed)
    topo = random_connected_topology(gen, n_nodes, connectivity)

    if vr.regressor_style == "isotropic":
        s2 = _uniform(gen, vr.sigma_u2, n_nodes)
        r_u = s2[:, None, None] * np.eye(m_dim)[None, :, :].astype(complex)
    elif vr.regressor_style == "trace_normalized":
        r_u = np.empty((n_nodes, m_dim, m_dim), dtype=complex)
        for k in range(n_nodes):
            g = crandn(gen, (m_dim, 2 * m_dim))
            cov = g @ g.conj().T
            r_u[k] = cov / np.trace(cov).real
    else:
        raise ValueError(f"unknown regressor_style '{vr.regressor_style}'")

    nodes = NodeProfile(
        m_dim=m_dim,
        r_u=r_u,
        sigma_v2=_uniform(gen, vr.sigma_v2, n_nodes),
        mu=_uniform(gen, vr.mu, n_nodes),
    )

    links = link_index(topo)
    n_links = len(links)
    eye = np.eye(m_dim, dtype=complex)
    ln = LinkNoiseProfile(
        r_w=_uniform(gen, vr.sigma_w2, n_links)[:, None, None] * eye,
        sigma_d2=_uniform(gen, vr.sigma_d2, n_links),
        r_u_link=_uniform(gen, vr.sigma_u_link2, n_links)[:, None, None] * eye,
        r_psi=_uniform(gen, vr.sigma_psi2, n_links)[:, None, None] * eye,
    )

    weights = WeightTrajectory(mode="constant", w0=crandn(gen, (m_dim,)))
    return NetworkModel(topology=topo, nodes=nodes, link_noise=ln, weights=weights)


# ---------------------------------------------------------------------------
# JSON serialization (1-based indices, complex numbers as [re, im] pairs)


def _complex_matrix_to_pairs(mat: np.ndarray) -> list[list[float]]:
    flat = np.asarray(mat, dtype=complex).reshape(-1)
    return [[float(z.real), float(z.imag)] for z in flat]


def _pairs_to_complex_matrix(pairs, m_dim: int) -> np.ndarray:
    flat = np.array([p[0] + 1j * p[1] for p in pairs], dtype=complex)
    if flat.size != m_dim * m_dim:
        raise ValueError(f"expected {m_dim * m_dim} complex entries, got {flat.size}")
    return flat.reshape(m_dim, m_dim)


def _complex_vector_to_pairs(v: np.ndarray) -> list[list[float]]:
    return [[float(z.real), float(z.imag)] for z in np.asarray(v, dtype=complex)]


def _pairs_to_complex_vector(pairs) -> np.ndarray:
    return np.array([p[0] + 1j * p[1] for p in pairs], dtype=complex)


def network_to_dict(network: NetworkModel) -> dict:
    topo = network.topology
    m = network.m_dim
    links = link_index(topo)
    pos = {lk: p for p, lk in enumerate(links)}
    ln = network.link_noise

    link_entries = []
    for (l, k), p in pos.items():
        if (np.any(ln.r_w[p]) or ln.sigma_d2[p] != 0
                or np.any(ln.r_u_link[p]) or np.any(ln.r_psi[p])):
            link_entries.append({
                "from": l + 1,
                "to": k + 1,
                "r_w": _complex_matrix_to_pairs(ln.r_w[p]),
                "sigma_d2": float(ln.sigma_d2[p]),
                "r_u_link": _complex_matrix_to_pairs(ln.r_u_link[p]),
                "r_psi": _complex_matrix_to_pairs(ln.r_psi[p]),
            })

    w = network.weights
    weights: dict = {"mode": w.mode, "w0": _complex_vector_to_pairs(w.w0)}
    if w.mode == "random_walk":
        weights["r_eta"] = _complex_matrix_to_pairs(w.r_eta)
    elif w.mode == "rotation":
        weights["omega"] = float(w.omega)

    return {
        "n_nodes": topo.n_nodes,
        "m_dim": m,
        "edges": [[l + 1, k + 1] for l, k in topo.cross_edges()],
        "nodes": [
            {
                "mu": float(network.nodes.mu[k]),
                "sigma_v2": float(network.nodes.sigma_v2[k]),
                "r_u": _complex_matrix_to_pairs(network.nodes.r_u[k]),
            }
            for k in range(topo.n_nodes)
        ],
        "links": link_entries,
        "weights": weights,
    }


def network_from_dict(data: dict) -> NetworkModel:
    n = int(data["n_nodes"])
    m = int(data["m_dim"])
    topo = Topology.from_edges(n, [(l - 1, k - 1) for l, k in data["edges"]])

    node_entries = data["nodes"]
    if len(node_entries) != n:
        raise ValueError(f"expected {n} node entries, got {len(node_entries)}")
    nodes = NodeProfile(
        m_dim=m,
        r_u=np.stack([_pairs_to_complex_matrix(e["r_u"], m) for e in node_entries]),
        sigma_v2=np.array([float(e["sigma_v2"]) for e in node_entries]),
        mu=np.array([float(e["mu"]) for e in node_entries]),
    )

    links = link_index(topo)
    pos = {lk: p for p, lk in enumerate(links)}
    ln = LinkNoiseProfile.zeros(len(links), m)
    for entry in data.get("links", []):
        l, k = int(entry["from"]) - 1, int(entry["to"]) - 1
        if (l, k) not in pos:
            raise ValueError(f"link entry {l + 1}->{k + 1} is not an edge of the topology")
        p = pos[(l, k)]
        ln.r_w[p] = _pairs_to_complex_matrix(entry["r_w"], m)
        ln.sigma_d2[p] = float(entry["sigma_d2"])
        ln.r_u_link[p] = _pairs_to_complex_matrix(entry["r_u_link"], m)
        ln.r_psi[p] = _pairs_to_complex_matrix(entry["r_psi"], m)

    wd = data["weights"]
    mode = wd["mode"]
    if mode not in WEIGHT_MODES:
        raise ValueError(f"unknown weight mode '{mode}'")
    weights = WeightTrajectory(
        mode=mode,
        w0=_pairs_to_complex_vector(wd["w0"]),
        r_eta=_pairs_to_complex_matrix(wd["r_eta"], m) if mode == "random_walk" else None,
        omega=float(wd["omega"]) if mode == "rotation" else None,
    )
    return NetworkModel(topology=topo, nodes=nodes, link_noise=ln, weights=weights)


def save_network(network: NetworkModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(network_to_dict(network), fh, indent=2)
        fh.write("\n")


def load_network(path) -> NetworkModel:
    with open(path) as fh:
        return network_from_dict(json.load(fh))
