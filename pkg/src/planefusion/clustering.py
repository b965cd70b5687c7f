"""
Plane clustering with a MAP Gaussian mixture.

Each world-frame plane becomes a 4D feature ``(s * n, d)``. A diagonal GMM with
a symmetric Dirichlet prior on the weights is trained by EM; components that
converge onto the same plane are merged and EM resumes until the component set
is stable. Surviving components above a weight threshold are the room planes.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np
from scipy.special import logsumexp

from planefusion.errors import ConfigError, NoPlanesSelected, SingularCovariance, TooFewSamples
from planefusion.geometry import Plane, canonicalize, normal_angle_deg
from planefusion.measurements import GlobalMeasurement, split_by_class

logger = logging.getLogger(__name__)

_LOG_2PI = math.log(2.0 * math.pi)


def plane_feature(plane: Plane, scale: float = 1.0) -> np.ndarray:
    """Feature vector of a plane; canonicalized first so antipodal inputs agree."""
    p = canonicalize(plane)
    return np.append(scale * p.normal, p.offset)


def plane_features(
    items: Sequence[Union[Plane, GlobalMeasurement]], scale: float = 1.0
) -> np.ndarray:
    rows = [
        plane_feature(it.plane_world if isinstance(it, GlobalMeasurement) else it, scale)
        for it in items
    ]
    return np.array(rows, dtype=float).reshape(-1, 4)


def mean_to_plane(mean: np.ndarray) -> Plane:
    normal = mean[:3] / np.linalg.norm(mean[:3])
    return canonicalize(np.append(normal, mean[3]))


@dataclass(frozen=True, eq=False)
class PlaneCluster:
    index: int
    weight: float
    mean: np.ndarray
    covariance: np.ndarray
    members: Tuple[int, ...]
    plane: Plane
    feature_scale: float = 1.0

    @property
    def variance(self) -> np.ndarray:
        return np.diag(self.covariance).copy()

    def log_density(self, features: np.ndarray) -> np.ndarray:
        x = np.asarray(features, dtype=float).reshape(-1, 4)
        var = self.variance
        return -0.5 * (np.sum(np.log(var)) + 4 * _LOG_2PI + np.sum((x - self.mean) ** 2 / var, axis=1))


@dataclass(frozen=True, eq=False)
class MixtureModel:
    clusters: List[PlaneCluster]
    log_likelihood: float
    iterations: int
    seed: int
    # MAP objective per EM iteration since the component set last changed
    trace: Tuple[float, ...] = ()
    merges: int = 0

    @property
    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.clusters])


# EM ------------------------------------------------------------------------


def _kmeanspp(
    x: np.ndarray, k: int, rng: np.random.Generator
) -> np.ndarray:
    """Seed means from the distinct feature values, weighted by multiplicity."""
    values, counts = np.unique(x, axis=0, return_counts=True)
    counts = counts.astype(float)
    first = rng.choice(len(values), p=counts / counts.sum())
    centers = [values[first]]
    d2 = np.sum((values - values[first]) ** 2, axis=1)
    while len(centers) < k:
        mass = counts * d2
        total = mass.sum()
        if total <= 0:
            break
        idx = rng.choice(len(values), p=mass / total)
        centers.append(values[idx])
        d2 = np.minimum(d2, np.sum((values - values[idx]) ** 2, axis=1))
    return np.array(centers)


def _log_joint(x: np.ndarray, w: np.ndarray, mu: np.ndarray, var: np.ndarray) -> np.ndarray:
    quad = np.sum((x[:, None, :] - mu[None, :, :]) ** 2 / var[None, :, :], axis=2)
    log_norm = np.sum(np.log(var), axis=1) + x.shape[1] * _LOG_2PI
    return np.log(w)[None, :] - 0.5 * (quad + log_norm[None, :])


@dataclass
class _Params:
    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray


class _EM:
    def __init__(self, x: np.ndarray, alpha0: float, var_floor: float, tol: float, max_iter: int):
        self.x = x
        self.alpha0 = alpha0
        self.var_floor = var_floor
        self.tol = tol
        self.max_iter = max_iter

    def e_step(self, p: _Params) -> Tuple[np.ndarray, float, float]:
        log_p = _log_joint(self.x, p.weights, p.means, p.variances)
        lse = logsumexp(log_p, axis=1)
        ll = float(np.sum(lse))
        objective = ll + (self.alpha0 - 1.0) * float(np.sum(np.log(p.weights)))
        return np.exp(log_p - lse[:, None]), ll, objective

    def m_step(self, resp: np.ndarray) -> Tuple[_Params, bool]:
        nk = resp.sum(axis=0)
        raw = np.maximum(0.0, nk + self.alpha0 - 1.0)
        if raw.sum() <= 0:
            raw = nk.copy()
        keep = raw > 0
        pruned = not bool(keep.all())
        resp, nk, raw = resp[:, keep], nk[keep], raw[keep]
        weights = raw / raw.sum()
        means = (resp.T @ self.x) / nk[:, None]
        sq = (self.x[:, None, :] - means[None, :, :]) ** 2
        variances = np.einsum("nk,nkd->kd", resp, sq) / nk[:, None]
        if self.var_floor > 0:
            variances = np.maximum(variances, self.var_floor)
        elif np.any(variances <= 0):
            raise SingularCovariance("a component collapsed onto a single point")
        return _Params(weights, means, variances), pruned

    def run(self, p: _Params) -> Tuple[_Params, np.ndarray, float, List[float], int]:
        trace: List[float] = []
        resp, ll, obj = self.e_step(p)
        iterations = 0
        while iterations < self.max_iter:
            trace.append(obj)
            p, pruned = self.m_step(resp)
            iterations += 1
            if pruned:
                trace = []
            resp, ll, new_obj = self.e_step(p)
            if not pruned and new_obj - obj < self.tol:
                obj = new_obj
                break
            obj = new_obj
        trace.append(obj)
        return p, resp, ll, trace, iterations


def _same_plane(
    mu_a: np.ndarray, mu_b: np.ndarray, angle_deg: float, offset_m: float
) -> Tuple[bool, bool]:
    """(duplicate, antipodal) for two component means."""
    na = mu_a[:3] / np.linalg.norm(mu_a[:3])
    nb = mu_b[:3] / np.linalg.norm(mu_b[:3])
    if normal_angle_deg(na, nb) <= angle_deg and abs(mu_a[3] - mu_b[3]) <= offset_m:
        return True, False
    if normal_angle_deg(na, -nb) <= angle_deg and abs(mu_a[3] + mu_b[3]) <= offset_m:
        return True, True
    return False, False


def _merge_duplicates(
    p: _Params, angle_deg: float, offset_m: float, var_floor: float
) -> Tuple[_Params, int]:
    order = np.argsort(-p.weights, kind="stable")
    used: set = set()
    groups: List[Tuple[int, int, bool]] = []
    for a_pos, a in enumerate(order):
        if a in used:
            continue
        for b in order[a_pos + 1:]:
            if b in used:
                continue
            dup, antipodal = _same_plane(p.means[a], p.means[b], angle_deg, offset_m)
            if dup:
                groups.append((int(a), int(b), antipodal))
                used.update((a, b))
                break
    if not groups:
        return p, 0
    merged_from = {b for _, b, _ in groups}
    weights, means, variances = p.weights.copy(), p.means.copy(), p.variances.copy()
    for a, b, antipodal in groups:
        wa, wb = weights[a], weights[b]
        w = wa + wb
        if not antipodal:
            mu = (wa * means[a] + wb * means[b]) / w
            second = (wa * (variances[a] + means[a] ** 2) + wb * (variances[b] + means[b] ** 2)) / w
            variances[a] = np.maximum(second - mu ** 2, var_floor)
            means[a] = mu
        weights[a] = w
    keep = np.array([i not in merged_from for i in range(len(weights))])
    merged = _Params(weights[keep] / weights[keep].sum(), means[keep], variances[keep])
    return merged, len(groups)


def fit_mixture(
    features: np.ndarray,
    k_max: int,
    seed: int,
    *,
    alpha0: float = 0.5,
    var_floor: float = 1e-6,
    tol: float = 1e-6,
    max_iter: int = 200,
    merge_angle_deg: float = 5.0,
    merge_offset_m: float = 0.15,
    feature_scale: float = 1.0,
) -> MixtureModel:
    """
    Fit the plane mixture.

    The data are processed in lexicographic order and the means are seeded from
    distinct feature values, so the result does not depend on input order.

    Raises:
        TooFewSamples: fewer than two features.
        SingularCovariance: a component collapsed while ``var_floor`` is 0.
    """
    x_in = np.asarray(features, dtype=float).reshape(-1, 4)
    if len(x_in) < 2:
        raise TooFewSamples(f"need at least 2 plane features, got {len(x_in)}")
    if k_max < 1:
        raise ConfigError(f"k_max must be >= 1, got {k_max}")
    order = np.lexsort(x_in.T[::-1])
    x = x_in[order]

    rng = np.random.default_rng(seed)
    means = _kmeanspp(x, k_max, rng)
    k = len(means)
    spread = np.maximum(x.var(axis=0), max(var_floor, 1e-12))
    params = _Params(np.full(k, 1.0 / k), means, np.tile(spread, (k, 1)))

    em = _EM(x, alpha0, var_floor, tol, max_iter)
    total_iterations = 0
    total_merges = 0
    while True:
        params, resp, ll, trace, iterations = em.run(params)
        total_iterations += iterations
        params, merged = _merge_duplicates(
            params, merge_angle_deg, merge_offset_m, max(var_floor, 1e-12)
        )
        if not merged:
            break
        total_merges += merged
        logger.debug("merged %d duplicate components, resuming EM", merged)

    labels_sorted = np.argmax(resp, axis=1)
    labels = np.empty(len(x), dtype=int)
    labels[order] = labels_sorted

    ranking = np.argsort(-params.weights, kind="stable")
    clusters = []
    for new_index, k_idx in enumerate(ranking):
        members = tuple(int(i) for i in np.flatnonzero(labels == k_idx))
        clusters.append(
            PlaneCluster(
                index=new_index,
                weight=float(params.weights[k_idx]),
                mean=params.means[k_idx].copy(),
                covariance=np.diag(params.variances[k_idx]),
                members=members,
                plane=mean_to_plane(params.means[k_idx]),
                feature_scale=feature_scale,
            )
        )
    logger.info(
        "mixture fit: %d samples, %d components, %d iterations, %d merges",
        len(x), len(clusters), total_iterations, total_merges,
    )
    return MixtureModel(
        clusters=clusters,
        log_likelihood=ll,
        iterations=total_iterations,
        seed=seed,
        trace=tuple(trace),
        merges=total_merges,
    )


def select_room_planes(model: MixtureModel, w_min: float = 0.05) -> List[PlaneCluster]:
    """Clusters with ``weight >= w_min``, heaviest first."""
    selected = [c for c in model.clusters if c.weight >= w_min]
    if not selected:
        raise NoPlanesSelected(f"no component reaches weight {w_min}")
    return sorted(selected, key=lambda c: (-c.weight, c.index))


def rank_voters(
    cluster: PlaneCluster, measurements: Sequence[GlobalMeasurement], n: int = 100
) -> List[int]:
    """Indices of the ``n`` members most likely under the cluster, best first."""
    members = list(cluster.members)
    if not members:
        return []
    feats = plane_features([measurements[i] for i in members], cluster.feature_scale)
    dens = cluster.log_density(feats)
    ranked = sorted(zip(members, dens), key=lambda item: (-item[1], item[0]))
    return [i for i, _ in ranked[:n]]


def dump_mixture(model: MixtureModel, path: Union[str, Path]) -> None:
    """One JSON record per component."""
    with open(path, "w", encoding="utf-8") as f:
        for c in model.clusters:
            record = {
                "cluster": c.index,
                "weight": c.weight,
                "mean": c.mean.tolist(),
                "variance": c.variance.tolist(),
                "members": len(c.members),
                "plane": c.plane.vector.tolist(),
            }
            f.write(json.dumps(record) + "\n")


__all__ = [
    "MixtureModel",
    "PlaneCluster",
    "dump_mixture",
    "fit_mixture",
    "mean_to_plane",
    "plane_feature",
    "plane_features",
    "rank_voters",
    "select_room_planes",
    "split_by_class",
]
