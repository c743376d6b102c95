"""Polynomial logistic (IRLS) and ridge least-squares regression backends."""

from __future__ import annotations

import hashlib
import itertools
import json
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.special import expit

CLIP = 1e-9


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class RegressionConfig:
    degree: int = 3
    ridge: float = 1e-6
    tol: float = 1e-8
    max_iter: int = 100
    link: str = "auto"  # "logit" | "identity" | "auto"
    outer_degree: int | None = None

    def to_dict(self) -> dict:
        return {"degree": self.degree, "ridge": self.ridge, "tol": self.tol, "max_iter": self.max_iter,
                "link": self.link, "outer_degree": self.outer_degree}


@dataclass(frozen=True)
class FeatureMap:
    """Full polynomial basis up to ``degree`` over standardized inputs."""

    inputs: tuple[str, ...]
    degree: int
    means: tuple[float, ...]
    scales: tuple[float, ...]

    @classmethod
    def fit(cls, data: Mapping[str, np.ndarray], inputs: Sequence[str], degree: int) -> "FeatureMap":
        if degree < 1:
            raise ValueError("degree must be >= 1")
        cols = [np.asarray(data[k], dtype=float) for k in inputs]
        means = tuple(float(c.mean()) for c in cols)
        # constant columns keep unit scale; ridge then pins their coefficients
        scales = tuple(float(c.std()) if c.std() > 0 else 1.0 for c in cols)
        return cls(tuple(inputs), degree, means, scales)

    @property
    def exponents(self) -> list[tuple[int, ...]]:
        k = len(self.inputs)
        out = []
        for total in range(self.degree + 1):
            for combo in itertools.combinations_with_replacement(range(k), total):
                e = [0] * k
                for i in combo:
                    e[i] += 1
                out.append(tuple(e))
        return out

    @property
    def size(self) -> int:
        return len(self.exponents)

    def transform(self, data: Mapping[str, np.ndarray]) -> np.ndarray:
        cols = []
        for name, m, s in zip(self.inputs, self.means, self.scales):
            if name not in data:
                raise KeyError(f"missing input variable {name!r}")
            cols.append((np.asarray(data[name], dtype=float) - m) / s)
        n = len(cols[0]) if cols else 1
        powers = [[np.ones(n), c] for c in cols]
        for pw in powers:
            for _ in range(2, self.degree + 1):
                pw.append(pw[-1] * pw[1])
        basis = np.empty((n, self.size))
        for j, e in enumerate(self.exponents):
            col = np.ones(n)
            for i, p in enumerate(e):
                if p:
                    col = col * powers[i][p]
            basis[:, j] = col
        return basis

    def to_dict(self) -> dict:
        return {"inputs": list(self.inputs), "degree": self.degree, "means": list(self.means),
                "scales": list(self.scales)}


@dataclass(frozen=True)
class FittedModel:
    """A fitted conditional expectation ``E[target | inputs]``.

    Also usable as a prediction function ``f(x, theta)`` when its only input
    is ``x``.
    """

    feature_map: FeatureMap
    link: str
    coefficients: tuple[float, ...]
    ridge: float
    diagnostics: Mapping = field(default_factory=dict)
    name: str | None = None

    @property
    def theta_id(self) -> str:
        if self.name:
            return self.name
        h = hashlib.sha256(json.dumps([self.link, list(self.coefficients), self.feature_map.to_dict()]).encode())
        return "model-" + h.hexdigest()[:12]

    def predict(self, data: Mapping[str, np.ndarray]) -> np.ndarray:
        eta = self.feature_map.transform(data) @ np.asarray(self.coefficients)
        if self.link == "logit":
            return np.clip(expit(eta), CLIP, 1.0 - CLIP)
        return eta

    def __call__(self, x) -> np.ndarray:
        if self.feature_map.inputs != ("x",):
            raise ValueError("only models with the single input 'x' can act as a predictor")
        return self.predict({"x": np.atleast_1d(np.asarray(x, dtype=float))})

    def raw_coefficients(self) -> np.ndarray:
        """Degree-1 coefficients on the raw (unstandardized) inputs, intercept first."""
        if self.feature_map.degree != 1:
            raise ValueError("raw coefficients are only defined for degree 1")
        b = np.asarray(self.coefficients)
        m, s = np.array(self.feature_map.means), np.array(self.feature_map.scales)
        slopes = b[1:] / s
        return np.concatenate([[b[0] - np.sum(slopes * m)], slopes])

    def to_dict(self) -> dict:
        return {
            "feature_map": self.feature_map.to_dict(),
            "link": self.link,
            "coefficients": list(self.coefficients),
            "ridge": self.ridge,
            "diagnostics": dict(self.diagnostics),
            "name": self.name,
            "theta_id": self.theta_id,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "FittedModel":
        fm = d["feature_map"]
        return cls(
            FeatureMap(tuple(fm["inputs"]), fm["degree"], tuple(fm["means"]), tuple(fm["scales"])),
            d["link"], tuple(d["coefficients"]), d["ridge"], dict(d.get("diagnostics", {})), d.get("name"),
        )


def predict(model: FittedModel, row: Mapping[str, float]) -> float:
    """Prediction for a single row (mapping of input name to value)."""
    for k in model.feature_map.inputs:
        if k not in row:
            raise KeyError(f"missing input variable {k!r}")
    return float(model.predict({k: np.array([row[k]]) for k in model.feature_map.inputs})[0])


def _penalty(size: int, ridge: float) -> np.ndarray:
    p = np.full(size, ridge)
    p[0] = 0.0  # intercept is not penalized
    return p


def objective(beta: np.ndarray, basis: np.ndarray, target: np.ndarray, ridge: float) -> float:
    """Penalized mean Bernoulli quasi-log-likelihood (to be maximised)."""
    eta = basis @ beta
    ll = np.mean(target * eta - np.logaddexp(0.0, eta))
    return float(ll - 0.5 * np.sum(_penalty(len(beta), ridge) * beta**2))


def gradient(beta: np.ndarray, basis: np.ndarray, target: np.ndarray, ridge: float) -> np.ndarray:
    mu = expit(basis @ beta)
    return basis.T @ (target - mu) / len(target) - _penalty(len(beta), ridge) * beta


def _irls(basis, target, ridge, tol, max_iter, init=None):
    n, k = basis.shape
    if init is None:
        beta = np.zeros(k)
        m = float(np.clip(target.mean(), 1e-6, 1 - 1e-6))
        beta[0] = np.log(m / (1 - m))
    else:
        beta = np.array(init, dtype=float)
    pen = _penalty(k, ridge)
    obj = objective(beta, basis, target, ridge)
    history = [obj]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        mu = expit(basis @ beta)
        grad = basis.T @ (target - mu) / n - pen * beta
        if np.linalg.norm(grad) < tol:
            converged = True
            it -= 1
            break
        w = mu * (1.0 - mu)
        hess = (basis.T * w) @ basis / n + np.diag(pen)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]
        t = 1.0
        for _ in range(31):
            cand = beta + t * step
            new = objective(cand, basis, target, ridge)
            if new >= obj - 1e-15 * abs(obj):
                break
            t *= 0.5
        else:
            break
        beta, obj = cand, max(new, obj)
        history.append(obj)
        if np.max(np.abs(t * step)) < tol:
            converged = True
            break
    grad = gradient(beta, basis, target, ridge)
    return beta, {"iterations": it, "gradient_norm": float(np.linalg.norm(grad)), "converged": converged,
                  "objective": obj, "objective_history": history}


def fit(
    data: Mapping[str, np.ndarray],
    target: np.ndarray,
    inputs: Sequence[str],
    link: str = "logit",
    degree: int = 3,
    ridge: float = 1e-6,
    tol: float = 1e-8,
    max_iter: int = 100,
    name: str | None = None,
    feature_map: FeatureMap | None = None,
    init: Sequence[float] | None = None,
) -> FittedModel:
    """Fit ``E[target | inputs]`` with a polynomial basis.

    ``link="logit"`` runs IRLS with step-halving on the penalized Bernoulli
    quasi-likelihood (fractional targets in [0, 1] allowed);
    ``link="identity"`` solves the ridge normal equations in closed form.
    A given ``feature_map`` (and ``init`` coefficients) warm-starts refits,
    e.g. bootstrap replicates.
    """
    target = np.asarray(target, dtype=float)
    fmap = feature_map or FeatureMap.fit(data, inputs, degree)
    basis = fmap.transform(data)
    n, k = basis.shape
    if n < k:
        raise ValueError(f"need at least {k} rows for a basis of size {k}, got {n}")
    if link == "logit":
        if target.min() < 0 or target.max() > 1:
            raise ValueError("logit link requires targets in [0, 1]")
        beta, diag = _irls(basis, target, ridge, tol, max_iter, init)
        if not diag["converged"]:
            warnings.warn(f"IRLS did not converge in {max_iter} iterations", ConvergenceWarning, stacklevel=2)
    elif link == "identity":
        gram = basis.T @ basis / n + np.diag(_penalty(k, ridge))
        rhs = basis.T @ target / n
        if ridge == 0 and np.linalg.matrix_rank(gram) < k:
            raise np.linalg.LinAlgError("singular normal matrix; use ridge > 0")
        beta = np.linalg.solve(gram, rhs)
        resid_grad = basis.T @ (target - basis @ beta) / n - _penalty(k, ridge) * beta
        diag = {"iterations": 0, "gradient_norm": float(np.linalg.norm(resid_grad)), "converged": True}
    else:
        raise ValueError(f"unknown link {link!r}")
    diag["training_rows"] = n
    return FittedModel(fmap, link, tuple(float(b) for b in beta), ridge, diag, name)


def fit_config(data, target, inputs, cfg: RegressionConfig, degree: int | None = None, name=None,
               warm: FittedModel | None = None) -> FittedModel:
    target = np.asarray(target, dtype=float)
    link = cfg.link
    if link == "auto":
        link = "logit" if target.min() >= 0 and target.max() <= 1 else "identity"
    if warm is not None:
        return fit(data, target, inputs, link, warm.feature_map.degree, cfg.ridge, cfg.tol, cfg.max_iter, name,
                   feature_map=warm.feature_map, init=warm.coefficients)
    return fit(data, target, inputs, link, degree or cfg.degree, cfg.ridge, cfg.tol, cfg.max_iter, name)


def finite_difference_gradient(beta, basis, target, ridge, h: float = 1e-6) -> np.ndarray:
    out = np.empty_like(beta)
    for j in range(len(beta)):
        e = np.zeros_like(beta)
        e[j] = h
        out[j] = (objective(beta + e, basis, target, ridge) - objective(beta - e, basis, target, ridge)) / (2 * h)
    return out
