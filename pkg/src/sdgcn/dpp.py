"""L-ensembles and exact k-DPP sampling.

Four kernel variants are supported. "cosine" scores pairs purely by node
representations; "qd" multiplies a per-item quality scalar (community
agreement terms) with a pairwise diversity factor; "community" and "node"
are its two ablations. All quality/diversity factors are plain cosine
scalars, so the point-wise products in the definitions reduce to ordinary
multiplication.

The sampler follows the classic two-phase eigendecomposition scheme: an
index set J of eigenvectors is drawn using elementary-symmetric-polynomial
ratios, then items are drawn one by one from the projection DPP of span(J),
orthogonalizing the basis against each chosen coordinate axis.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DegeneracyWarning, NumericError
from .linalg import EigenDecomposition, eigendecompose, esp_table, lu_det

KERNEL_VARIANTS = ("qd", "cosine", "community", "node")


@dataclass
class KernelSpec:
    variant: str = "qd"
    epsilon: float = 0.01  # PSD jitter added to every pipeline kernel

    def __post_init__(self):
        if self.variant not in KERNEL_VARIANTS:
            raise ValueError(f"unknown kernel variant {self.variant!r}")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")


@dataclass
class KernelContext:
    """Everything a per-anchor kernel needs, in candidate order."""
    anchor: int
    candidates: np.ndarray            # node ids, no anchor, no duplicates
    candidate_features: np.ndarray    # s x d rows x_j
    candidate_mean: np.ndarray        # b_i, mean of candidate rows
    anchor_community_feature: np.ndarray | None = None   # a_i
    candidate_community_features: np.ndarray | None = None  # s x d rows a_j
    community_of: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.candidates.size == 0:
            raise ValueError("candidate set must be nonempty")
        if np.unique(self.candidates).size != self.candidates.size:
            raise ValueError("candidate set contains duplicates")
        if self.anchor in self.candidates:
            raise ValueError("anchor must not appear among candidates")

    @property
    def size(self) -> int:
        return int(self.candidates.size)


def make_context(x: np.ndarray, membership: np.ndarray | None,
                 community_feats: np.ndarray | None,
                 anchor: int, candidates: np.ndarray) -> KernelContext:
    """Assemble a KernelContext from an embedding matrix and communities."""
    candidates = np.asarray(candidates, dtype=np.int64)
    feats = x[candidates]
    mean = feats.mean(axis=0)
    a_i = comm_rows = comm_of = None
    if membership is not None:
        if community_feats is None:
            raise ValueError("community features required alongside membership")
        membership = np.asarray(membership, dtype=np.int64)
        if membership[anchor] < 0:
            raise ValueError(f"anchor {anchor} has no community")
        a_i = community_feats[membership[anchor]]
        comm_of = membership[candidates]
        comm_rows = community_feats[comm_of]
    return KernelContext(anchor=int(anchor), candidates=candidates,
                         candidate_features=feats, candidate_mean=mean,
                         anchor_community_feature=a_i,
                         candidate_community_features=comm_rows,
                         community_of=comm_of)


def _unit_rows(m: np.ndarray) -> np.ndarray:
    """Rows scaled to unit norm; zero rows stay zero (cosine -> 0)."""
    m = np.atleast_2d(np.asarray(m, dtype=np.float64))
    norms = np.linalg.norm(m, axis=1)
    zero = norms == 0.0
    if zero.any():
        warnings.warn("zero-norm feature row: cosine treated as 0",
                      DegeneracyWarning, stacklevel=3)
    norms[zero] = 1.0
    return m / norms[:, None]


def _cos_scalar(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.clip(_unit_rows(a)[0] @ _unit_rows(b)[0], -1.0, 1.0))


def _sym_gram(u: np.ndarray) -> np.ndarray:
    """Exactly symmetric clipped Gram matrix of unit rows."""
    c = np.clip(u @ u.T, -1.0, 1.0)
    return np.triu(c) + np.triu(c, 1).T


def build_cosine_kernel(ctx: KernelContext) -> np.ndarray:
    """Pure representation kernel exp(cos(x_j, x_j') - 1), unit diagonal.

    A zero-norm feature row contributes cosine 0 everywhere, including its
    own diagonal, so its entries become exp(-1).
    """
    u = _unit_rows(ctx.candidate_features)
    c = _sym_gram(u)
    nonzero = np.linalg.norm(ctx.candidate_features, axis=1) != 0.0
    c[np.diag_indices_from(c)] = np.where(nonzero, 1.0, 0.0)
    return np.exp(c - 1.0)


def _require_communities(ctx: KernelContext) -> None:
    if ctx.anchor_community_feature is None or ctx.candidate_community_features is None:
        raise ValueError("kernel variant requires community information")


def _cross_cos(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.clip(_unit_rows(a) @ _unit_rows(b).T, -1.0, 1.0)


def _qd_assemble(q: np.ndarray, phi: np.ndarray, epsilon: float) -> np.ndarray:
    raw = np.outer(q, q) * phi
    return psd_repair(raw, epsilon)


def psd_repair(raw: np.ndarray, epsilon: float) -> np.ndarray:
    """Jitter by epsilon*I; if the smallest eigenvalue still sits below
    epsilon/2, shift it up to exactly epsilon (for a negative minimum this
    is the |lambda_min| + epsilon shift). Eigenvectors are untouched."""
    jittered = raw + epsilon * np.eye(raw.shape[0])
    lmin = float(np.linalg.eigvalsh(jittered)[0])
    if lmin < epsilon / 2:
        jittered = jittered + (epsilon - lmin) * np.eye(raw.shape[0])
    return jittered


def build_qd_kernel(ctx: KernelContext, epsilon: float = 0.01) -> np.ndarray:
    """Quality-diversity kernel.

    Quality per item j: cos(a_i, b_i) * cos(a_i, a_j). Diversity between
    items j, j': cos(x_j, a_j') * cos(a_j, x_j') * exp(cos(x_j, x_j') - 1).
    """
    _require_communities(ctx)
    q = (_cos_scalar(ctx.anchor_community_feature, ctx.candidate_mean)
         * _cross_cos(ctx.anchor_community_feature, ctx.candidate_community_features)[0])
    m = _cross_cos(ctx.candidate_features, ctx.candidate_community_features)
    phi = (m * m.T) * np.exp(_sym_gram(_unit_rows(ctx.candidate_features)) - 1.0)
    return _qd_assemble(q, phi, epsilon)


def build_community_kernel(ctx: KernelContext, epsilon: float = 0.01) -> np.ndarray:
    """Ablation keeping only community terms: quality cos(a_i, a_j),
    diversity cos(x_j, a_j') * cos(a_j, x_j')."""
    _require_communities(ctx)
    q = _cross_cos(ctx.anchor_community_feature, ctx.candidate_community_features)[0]
    m = _cross_cos(ctx.candidate_features, ctx.candidate_community_features)
    phi = m * m.T
    return _qd_assemble(q, phi, epsilon)


def build_node_kernel(ctx: KernelContext, epsilon: float = 0.01) -> np.ndarray:
    """Ablation keeping only node features: the cosine kernel scaled by
    the constant quality cos(a_i, b_i) squared, plus jitter."""
    _require_communities(ctx)
    q = _cos_scalar(ctx.anchor_community_feature, ctx.candidate_mean)
    return psd_repair(q * q * build_cosine_kernel(ctx), epsilon)


def build_kernel(ctx: KernelContext, spec: KernelSpec) -> np.ndarray:
    """Variant dispatch; every returned kernel is repaired positive definite."""
    if spec.variant == "cosine":
        return psd_repair(build_cosine_kernel(ctx), spec.epsilon)
    if spec.variant == "qd":
        return build_qd_kernel(ctx, spec.epsilon)
    if spec.variant == "community":
        return build_community_kernel(ctx, spec.epsilon)
    return build_node_kernel(ctx, spec.epsilon)


def kernel_with_decomposition(ctx: KernelContext, spec: KernelSpec
                              ) -> tuple[np.ndarray, EigenDecomposition]:
    """Repaired kernel plus its spectrum, with a single decomposition.

    The jitter/repair shifts only eigenvalues, so the raw kernel is
    decomposed once and the shift applied to the spectrum directly.
    """
    if spec.variant == "cosine":
        raw = build_cosine_kernel(ctx)
    elif spec.variant == "qd":
        _require_communities(ctx)
        q = (_cos_scalar(ctx.anchor_community_feature, ctx.candidate_mean)
             * _cross_cos(ctx.anchor_community_feature, ctx.candidate_community_features)[0])
        m = _cross_cos(ctx.candidate_features, ctx.candidate_community_features)
        raw = np.outer(q, q) * ((m * m.T)
                                * np.exp(_sym_gram(_unit_rows(ctx.candidate_features)) - 1.0))
    elif spec.variant == "community":
        _require_communities(ctx)
        q = _cross_cos(ctx.anchor_community_feature, ctx.candidate_community_features)[0]
        m = _cross_cos(ctx.candidate_features, ctx.candidate_community_features)
        raw = np.outer(q, q) * (m * m.T)
    else:
        _require_communities(ctx)
        q = _cos_scalar(ctx.anchor_community_feature, ctx.candidate_mean)
        raw = q * q * build_cosine_kernel(ctx)

    dec = eigendecompose(raw)
    shift = spec.epsilon
    lmin = dec.eigenvalues[-1] + spec.epsilon
    if lmin < spec.epsilon / 2:
        shift += spec.epsilon - lmin
    kernel = raw + shift * np.eye(raw.shape[0])
    return kernel, EigenDecomposition(dec.eigenvalues + shift, dec.eigenvectors)


def kdpp_probability(L: np.ndarray, subset, k: int) -> float:
    """Exact probability det(L_Y) / e_k(lambda) of a k-subset."""
    idx = np.asarray(sorted(subset), dtype=np.int64)
    if idx.size != k:
        raise ValueError(f"subset size {idx.size} != k={k}")
    if np.unique(idx).size != idx.size:
        raise ValueError("subset contains duplicate indices")
    if idx.size and (idx.min() < 0 or idx.max() >= L.shape[0]):
        raise ValueError("subset index out of range")
    lam = eigendecompose(np.asarray(L, dtype=np.float64)).eigenvalues
    normalizer = esp_table(lam, k)[k, lam.size]
    return lu_det(L[np.ix_(idx, idx)]) / normalizer


class KdppSampler:
    """Draws fixed-size subsets from the DPP of a decomposed kernel.

    Precomputes the ESP table once; draw() and draw_many() share one code
    path (a single draw is a batch of one).
    """

    def __init__(self, decomposition: EigenDecomposition, k: int):
        self.lam = np.asarray(decomposition.eigenvalues, dtype=np.float64)
        self.vec = np.asarray(decomposition.eigenvectors, dtype=np.float64)
        self.k = int(k)
        if not 0 <= self.k <= self.lam.size:
            raise ValueError(f"k={k} outside [0, {self.lam.size}]")
        self.esp = esp_table(self.lam, self.k)

    def draw(self, rng: np.random.Generator) -> np.ndarray:
        return self.draw_many(1, rng)[0]

    def draw_many(self, count: int, rng: np.random.Generator) -> np.ndarray:
        if self.k == 0:
            return np.empty((count, 0), dtype=np.int64)
        J, ok = self._select_eigenvectors(count, rng)
        if not ok.all():
            # fp pathology: retry the failed draws once, then give up
            J_retry, ok_retry = self._select_eigenvectors(int((~ok).sum()), rng)
            if not ok_retry.all():
                raise NumericError("failed to select k eigenvector indices")
            J[~ok] = J_retry
        return self._select_items(J, rng)

    def _select_eigenvectors(self, count: int, rng) -> tuple[np.ndarray, np.ndarray]:
        m, k, e = self.lam.size, self.k, self.esp
        J = np.zeros((count, k), dtype=np.int64)
        slots_left = np.full(count, k, dtype=np.int64)
        for v in range(m, 0, -1):
            if not slots_left.any():
                break
            u = rng.random(count)
            active = np.flatnonzero(slots_left > 0)
            l = slots_left[active]
            with np.errstate(divide="ignore", invalid="ignore"):
                p = self.lam[v - 1] * e[l - 1, v - 1] / e[l, v]
            p = np.nan_to_num(p, nan=0.0, posinf=0.0, neginf=0.0)
            accepted = active[u[active] < p]
            J[accepted, k - slots_left[accepted]] = v - 1
            slots_left[accepted] -= 1
        return J, slots_left == 0

    def _select_items(self, J: np.ndarray, rng) -> np.ndarray:
        count, k = J.shape
        basis = np.ascontiguousarray(np.moveaxis(self.vec[:, J], 0, 1))  # (R, m, k)
        out = np.empty((count, k), dtype=np.int64)
        rows = np.arange(count)
        for t in range(k, 0, -1):
            probs = np.einsum("rmc,rmc->rm", basis, basis)
            cum = np.cumsum(probs, axis=1)
            u = rng.random(count) * cum[:, -1]
            item = (cum > u[:, None]).argmax(axis=1)
            out[:, k - t] = item
            if t == 1:
                break
            comp = basis[rows, item, :]                         # (R, t)
            piv = np.abs(comp).argmax(axis=1)
            pivcol = np.take_along_axis(basis, piv[:, None, None], axis=2)[:, :, 0]
            pval = np.take_along_axis(comp, piv[:, None], axis=1)[:, 0]
            basis = basis - (comp / pval[:, None])[:, None, :] * pivcol[:, :, None]
            keep = np.ones((count, t), dtype=bool)
            keep[rows, piv] = False
            keep_idx = np.argsort(~keep, axis=1, kind="stable")[:, :t - 1]
            basis = np.take_along_axis(basis, keep_idx[:, None, :], axis=2)
            basis = _orthonormalize(basis)
        out = np.sort(out, axis=1)
        if k > 1 and (np.diff(out, axis=1) == 0).any():
            raise NumericError("duplicate item selected during sampling")
        return out


def _orthonormalize(basis: np.ndarray) -> np.ndarray:
    """Batched modified Gram-Schmidt with one re-orthogonalization pass."""
    cols = basis.shape[2]
    for c in range(cols):
        v = basis[:, :, c]
        for _ in range(2):
            for prev in range(c):
                u = basis[:, :, prev]
                v = v - np.einsum("rm,rm->r", u, v)[:, None] * u
        basis[:, :, c] = v / np.linalg.norm(v, axis=1)[:, None]
    return basis


def sample_kdpp(L: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """One k-subset of indices of L, distributed as det(L_Y)/e_k."""
    dec = eigendecompose(np.asarray(L, dtype=np.float64))
    return KdppSampler(dec, k).draw(rng)
