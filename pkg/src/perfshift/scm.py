"""Structural causal models with input nodes ``D`` and ``Theta``.

Structural equations are JSON-style expression trees built from a closed set
of forms, so that the same scenario can be sampled (vectorised over rows) and
evaluated exactly by enumeration in :mod:`perfshift.oracle`.

Expression forms
----------------
``{"const": c}``
``{"var": name}``                       parent node, input ``D`` or a noise
``{"op": "affine", "intercept": c, "terms": [[coef, expr], ...]}``
``{"op": "mul", "args": [expr, ...]}``
``{"op": "logistic", "arg": expr}``
``{"op": "bernoulli", "p": expr, "noise": U}``   ``1{U < p}`` with ``U ~ Unif(0, 1)``
``{"op": "gt", "args": [a, b]}``        ``1{a > b}``
``{"op": "xor", "args": [a, b]}``
``{"op": "gate", "on": name, "cases": {"0": expr, "1": expr}}``
``{"op": "predict"}``                   ``f(x, theta)``; prediction node only
``{"op": "theta_ne", "ref": theta_id}`` ``1{theta != ref}``
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Protocol, Sequence

import numpy as np
from scipy.special import expit

D = "D"
THETA = "Theta"
INPUTS = (D, THETA)

ROLES = (
    "feature",
    "prediction",
    "action",
    "confounder",
    "mediator",
    "outcome",
    "s_sample",
    "s_label",
    "auxiliary",
)
# canonical node names for the roles that map onto fixed Dataset columns
CANONICAL = {"feature": "x", "prediction": "yhat", "outcome": "y", "s_sample": "s_sample", "s_label": "s_label"}


class ScenarioError(ValueError):
    """Raised for structurally unusable scenarios (e.g. cyclic graphs)."""


class StateSpaceError(ValueError):
    """Raised when a structural equation leaves its node's state space."""


def sigmoid(z):
    return expit(z)


# ---------------------------------------------------------------------------
# predictors: the values Theta can take


class Predictor(Protocol):
    theta_id: str

    def __call__(self, x: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class ParametricPredictor:
    """A named prediction function ``f(x, theta)``.

    ``kind`` is one of ``constant`` (``value``), ``logistic``
    (``sigma(slope * x + intercept)``), ``linear`` (``slope * x + intercept``)
    or ``identity``.
    """

    kind: str
    params: tuple[tuple[str, float], ...] = ()
    name: str | None = None

    def __post_init__(self):
        if self.kind not in ("constant", "logistic", "linear", "identity"):
            raise ValueError(f"unknown predictor kind {self.kind!r}")

    @property
    def theta_id(self) -> str:
        if self.name:
            return self.name
        body = ",".join(f"{k}={v:.12g}" for k, v in self.params)
        return f"{self.kind}({body})"

    def __call__(self, x):
        p = dict(self.params)
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.full_like(x, p["value"])
        if self.kind == "logistic":
            return sigmoid(p.get("slope", 1.0) * x + p.get("intercept", 0.0))
        if self.kind == "linear":
            return p.get("slope", 1.0) * x + p.get("intercept", 0.0)
        return x.copy()

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params), "name": self.name}


def constant_predictor(value: float) -> ParametricPredictor:
    return ParametricPredictor("constant", (("value", float(value)),))


def logistic_predictor(slope: float = 1.0, intercept: float = -0.5, name: str | None = None) -> ParametricPredictor:
    return ParametricPredictor("logistic", (("slope", float(slope)), ("intercept", float(intercept))), name)


def linear_predictor(slope: float, intercept: float = 0.0, name: str | None = None) -> ParametricPredictor:
    return ParametricPredictor("linear", (("slope", float(slope)), ("intercept", float(intercept))), name)


IDEAL_EXAMPLE1 = logistic_predictor(1.0, -0.5, name="ideal")
OFF = constant_predictor(0.0)


@dataclass(frozen=True)
class OpaqueTheta:
    """Placeholder for a theta read back from a Dataset CSV (id only)."""

    theta_id: str

    def __call__(self, x):
        raise ValueError(f"theta {self.theta_id!r} carries no prediction function")


@dataclass(frozen=True)
class DomainSetting:
    """Input-node assignment ``(d, theta)``."""

    d: int
    theta: Any = OFF

    def __post_init__(self):
        if self.d not in (0, 1):
            raise ValueError("d must be 0 or 1")

    @property
    def theta_id(self) -> str:
        return self.theta.theta_id

    @property
    def tag(self) -> tuple[int, str]:
        return (self.d, self.theta_id)

    def to_dict(self) -> dict:
        return {"d": self.d, "theta_id": self.theta_id}


# ---------------------------------------------------------------------------
# scenario description


@dataclass(frozen=True)
class Noise:
    """Exogenous distribution: ``uniform(a, b)``, ``gaussian(mu, sigma)``,
    ``bernoulli(p)``, ``point(value)`` or ``categorical(values, probs)``."""

    kind: str
    params: tuple = ()

    @property
    def discrete(self) -> bool:
        return self.kind in ("bernoulli", "point", "categorical")

    def support(self) -> list[tuple[float, float]]:
        if self.kind == "bernoulli":
            p = self.params[0]
            return [(v, w) for v, w in ((0.0, 1.0 - p), (1.0, p)) if w > 0]
        if self.kind == "point":
            return [(float(self.params[0]), 1.0)]
        if self.kind == "categorical":
            values, probs = self.params
            return [(float(v), float(w)) for v, w in zip(values, probs) if w > 0]
        raise ValueError(f"{self.kind} noise has no finite support")

    def mean(self) -> float:
        if self.kind == "uniform":
            return 0.5 * (self.params[0] + self.params[1])
        if self.kind == "gaussian":
            return float(self.params[0])
        return sum(v * w for v, w in self.support())

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        k, p = self.kind, self.params
        if k == "uniform":
            return rng.uniform(p[0], p[1], size=n)
        if k == "gaussian":
            return rng.normal(p[0], p[1], size=n)
        if k == "bernoulli":
            return (rng.random(n) < p[0]).astype(float)
        if k == "point":
            return np.full(n, float(p[0]))
        if k == "categorical":
            values, probs = p
            return np.asarray(values, dtype=float)[rng.choice(len(values), size=n, p=probs)]
        raise ValueError(f"unknown noise kind {k!r}")

    def to_dict(self) -> dict:
        if self.kind == "categorical":
            return {"kind": self.kind, "values": list(self.params[0]), "probs": list(self.params[1])}
        return {"kind": self.kind, "params": list(self.params)}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Noise":
        if d["kind"] == "categorical":
            return cls("categorical", (tuple(d["values"]), tuple(d["probs"])))
        return cls(d["kind"], tuple(d["params"]))


@dataclass(frozen=True)
class NodeSpec:
    """``space`` is ``("interval", lo, hi)``, ``("binary",)`` or ``("finite", values)``."""

    name: str
    role: str
    space: tuple = ("interval", -math.inf, math.inf)

    def contains(self, v: np.ndarray) -> np.ndarray:
        kind = self.space[0]
        if kind == "binary":
            return (v == 0.0) | (v == 1.0)
        if kind == "finite":
            return np.isin(v, np.asarray(self.space[1], dtype=float))
        lo, hi = self.space[1], self.space[2]
        return np.isfinite(v) & (v >= lo) & (v <= hi)

    def values(self) -> list[float] | None:
        if self.space[0] == "binary":
            return [0.0, 1.0]
        if self.space[0] == "finite":
            return [float(v) for v in self.space[1]]
        return None


@dataclass(frozen=True)
class Scenario:
    name: str
    nodes: tuple[NodeSpec, ...]
    noises: Mapping[str, Noise]
    equations: Mapping[str, dict]
    parents: Mapping[str, tuple[str, ...]]
    pivot: tuple[str, ...] = ()
    description: str = ""

    def node(self, name: str) -> NodeSpec:
        for nd in self.nodes:
            if nd.name == name:
                return nd
        raise KeyError(name)

    def by_role(self, role: str) -> list[str]:
        return [nd.name for nd in self.nodes if nd.role == role]

    @property
    def names(self) -> list[str]:
        return [nd.name for nd in self.nodes]

    def children(self, name: str) -> list[str]:
        return [v for v in self.names if name in self.parents.get(v, ())]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "nodes": [{"name": n.name, "role": n.role, "space": _space_to_json(n.space)} for n in self.nodes],
            # a list: noise order fixes the random stream each noise draws from
            "exogenous": [{"name": k, **v.to_dict()} for k, v in self.noises.items()],
            "equations": dict(self.equations),
            "graph": {k: list(v) for k, v in self.parents.items()},
            "pivot": list(self.pivot),
            "description": self.description,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Scenario":
        nodes = tuple(NodeSpec(n["name"], n["role"], _space_from_json(n["space"])) for n in d["nodes"])
        return cls(
            name=d["name"],
            nodes=nodes,
            noises=_noises_from_json(d["exogenous"]),
            equations=dict(d["equations"]),
            parents={k: tuple(v) for k, v in d["graph"].items()},
            pivot=tuple(d.get("pivot", ())),
            description=d.get("description", ""),
        )


def _noises_from_json(exo) -> dict[str, "Noise"]:
    if isinstance(exo, Mapping):
        return {k: Noise.from_dict(v) for k, v in exo.items()}
    return {e["name"]: Noise.from_dict({k: v for k, v in e.items() if k != "name"}) for e in exo}


def _space_to_json(space):
    if space[0] == "interval":
        return ["interval", _num_to_json(space[1]), _num_to_json(space[2])]
    if space[0] == "finite":
        return ["finite", list(space[1])]
    return list(space)


def _space_from_json(space):
    if space[0] == "interval":
        return ("interval", float(space[1]), float(space[2]))
    if space[0] == "finite":
        return ("finite", tuple(space[1]))
    return tuple(space)


def _num_to_json(v):
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def save_scenario(scenario: Scenario, path) -> None:
    Path(path).write_text(json.dumps(scenario.to_dict(), indent=2, sort_keys=True))


def load_scenario(path) -> Scenario:
    return Scenario.from_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# expressions


def references(expr: Mapping) -> set[str]:
    """Names an expression reads (parents, inputs and noises)."""
    if "const" in expr:
        return set()
    if "var" in expr:
        return {expr["var"]}
    op = expr["op"]
    if op == "affine":
        out: set[str] = set()
        for _, e in expr["terms"]:
            out |= references(e)
        return out
    if op in ("mul", "gt", "xor"):
        return set().union(*(references(e) for e in expr["args"]))
    if op == "logistic":
        return references(expr["arg"])
    if op == "bernoulli":
        return references(expr["p"]) | {expr["noise"]}
    if op == "gate":
        return {expr["on"]}.union(*(references(e) for e in expr["cases"].values()))
    if op == "predict":
        return {"x", THETA}
    if op == "theta_ne":
        return {THETA}
    raise ScenarioError(f"unknown expression op {op!r}")


def evaluate(expr: Mapping, env: Mapping[str, Any], theta) -> Any:
    """Vectorised evaluation; ``env`` maps names to arrays or scalars."""
    if "const" in expr:
        return float(expr["const"])
    if "var" in expr:
        return env[expr["var"]]
    op = expr["op"]
    if op == "affine":
        out = float(expr["intercept"])
        for coef, e in expr["terms"]:
            out = out + float(coef) * evaluate(e, env, theta)
        return out
    if op == "mul":
        out = 1.0
        for e in expr["args"]:
            out = out * evaluate(e, env, theta)
        return out
    if op == "logistic":
        return sigmoid(evaluate(expr["arg"], env, theta))
    if op == "bernoulli":
        p = evaluate(expr["p"], env, theta)
        return (env[expr["noise"]] < p) * 1.0
    if op == "gt":
        a, b = (evaluate(e, env, theta) for e in expr["args"])
        return (a > b) * 1.0
    if op == "xor":
        a, b = (evaluate(e, env, theta) for e in expr["args"])
        return (a != b) * 1.0
    if op == "gate":
        on = env[expr["on"]]
        if np.ndim(on) == 0:
            return evaluate(_gate_case(expr, on), env, theta)
        out = np.full(np.shape(on), np.nan)
        for key, e in expr["cases"].items():
            mask = on == float(key)
            if mask.any():
                out = np.where(mask, evaluate(e, env, theta), out)
        return out
    if op == "predict":
        return theta(np.atleast_1d(np.asarray(env["x"], dtype=float))).reshape(np.shape(env["x"]))
    if op == "theta_ne":
        return float(theta.theta_id != expr["ref"])
    raise ScenarioError(f"unknown expression op {op!r}")


def _gate_case(expr, on):
    for key, e in expr["cases"].items():
        if float(on) == float(key):
            return e
    raise ScenarioError(f"gate on {expr['on']!r} has no case for value {on!r}")


def branches(expr: Mapping, env: Mapping[str, float], theta) -> list[tuple[float, float]]:
    """Exact law of a scalar expression as ``[(value, prob), ...]``.

    Uniform noises inside ``bernoulli`` forms are integrated out analytically;
    every other name must be bound in ``env``.
    """
    if "const" in expr or "var" in expr or expr["op"] in ("predict", "theta_ne"):
        return [(float(evaluate(expr, env, theta)), 1.0)]
    op = expr["op"]
    if op == "bernoulli":
        out = []
        for p, w in branches(expr["p"], env, theta):
            if p > 0:
                out.append((1.0, w * min(p, 1.0)))
            if p < 1:
                out.append((0.0, w * (1.0 - max(p, 0.0))))
        return out
    if op == "gate":
        return branches(_gate_case(expr, env[expr["on"]]), env, theta)
    if op == "logistic":
        return [(float(sigmoid(v)), w) for v, w in branches(expr["arg"], env, theta)]
    if op == "affine":
        children = [e for _, e in expr["terms"]]
        coefs = [float(c) for c, _ in expr["terms"]]

        def combine(vals):
            return float(expr["intercept"]) + sum(c * v for c, v in zip(coefs, vals))

    elif op == "mul":
        children = expr["args"]

        def combine(vals):
            return float(np.prod(vals))

    elif op == "gt":
        children = expr["args"]

        def combine(vals):
            return float(vals[0] > vals[1])

    elif op == "xor":
        children = expr["args"]

        def combine(vals):
            return float(vals[0] != vals[1])

    else:
        raise ScenarioError(f"unknown expression op {op!r}")
    laws = [branches(e, env, theta) for e in children]
    out = [((), 1.0)]
    for law in laws:
        out = [(vals + (v,), w * u) for vals, w in out for v, u in law]
    merged: dict[float, float] = {}
    for vals, w in out:
        v = combine(vals)
        merged[v] = merged.get(v, 0.0) + w
    return list(merged.items())


# ---------------------------------------------------------------------------
# graph utilities and validation


def topological_order(scenario: Scenario) -> list[str]:
    """Endogenous nodes in a parents-first order; raises on cycles."""
    endo = set(scenario.names)
    indeg = {v: sum(p in endo for p in scenario.parents.get(v, ())) for v in scenario.names}
    ready = [v for v in scenario.names if indeg[v] == 0]
    order = []
    while ready:
        v = ready.pop(0)
        order.append(v)
        for c in scenario.children(v):
            indeg[c] -= 1
            if indeg[c] == 0:
                ready.append(c)
    if len(order) != len(scenario.names):
        raise ScenarioError(f"scenario {scenario.name!r} has a cyclic graph")
    return order


def _noise_users(scenario: Scenario) -> dict[str, set[str]]:
    users: dict[str, set[str]] = {k: set() for k in scenario.noises}
    for v, eq in scenario.equations.items():
        for r in references(eq):
            if r in users:
                users[r].add(v)
    return users


def bidirected_edges(scenario: Scenario) -> set[frozenset]:
    out = set()
    for users in _noise_users(scenario).values():
        us = sorted(users)
        for i in range(len(us)):
            for j in range(i + 1, len(us)):
                out.add(frozenset((us[i], us[j])))
    return out


def latent_projection(scenario: Scenario, keep: Sequence[str]) -> tuple[set[tuple[str, str]], set[frozenset]]:
    """Directed and bidirected edges of the latent projection onto ``keep``."""
    keep = set(keep)
    all_nodes = list(INPUTS) + scenario.names
    children = {v: scenario.children(v) for v in all_nodes}
    directed = set()
    for u in keep:
        stack, seen = list(children[u]), set()
        while stack:
            w = stack.pop()
            if w in seen:
                continue
            seen.add(w)
            if w in keep:
                directed.add((u, w))
            else:
                stack.extend(children[w])

    def latent_ancestors(v):
        out, stack = {v}, [v]
        while stack:
            w = stack.pop()
            for p in scenario.parents.get(w, ()):
                if p not in keep and p not in out and p in scenario.names:
                    out.add(p)
                    stack.append(p)
        return out

    bi_g = bidirected_edges(scenario)
    bidirected = set()
    kept = sorted(k for k in keep if k in scenario.names)
    anc = {k: latent_ancestors(k) for k in kept}
    for i in range(len(kept)):
        for j in range(i + 1, len(kept)):
            u, v = kept[i], kept[j]
            common = (anc[u] & anc[v]) - keep
            linked = any(frozenset((a, b)) in bi_g for a in anc[u] for b in anc[v] if a != b)
            if common or linked:
                bidirected.add(frozenset((u, v)))
    return directed, bidirected


ALLOWED_DIRECTED = {("x", "yhat"), ("x", "y"), ("yhat", "y"), (THETA, "yhat"), (D, "y")}
ALLOWED_BIDIRECTED = {frozenset(("x", "y"))}


def validate(scenario: Scenario) -> list[str]:
    """List every violated structural constraint; empty means usable.

    Raises :class:`ScenarioError` for cyclic graphs.
    """
    report: list[str] = []
    names = scenario.names
    for role, canon in CANONICAL.items():
        holders = scenario.by_role(role)
        if role in ("feature", "prediction", "outcome") and len(holders) != 1:
            report.append(f"exactly one node with role {role!r} required")
        if any(h != canon for h in holders):
            report.append(f"node with role {role!r} must be named {canon!r}")
    for nd in scenario.nodes:
        if nd.role not in ROLES:
            report.append(f"node {nd.name!r} has unknown role {nd.role!r}")
        if nd.name not in scenario.equations:
            report.append(f"node {nd.name!r} has no structural equation")
    if report:
        return report
    topological_order(scenario)

    for v in names:
        declared = set(scenario.parents.get(v, ()))
        unknown = declared - set(names) - set(INPUTS)
        if unknown:
            report.append(f"parents of {v!r} not declared as nodes: {sorted(unknown)}")
        refs = references(scenario.equations[v])
        stray = refs - declared - set(scenario.noises)
        if v == "yhat":
            stray -= {"x", THETA}
        if stray:
            report.append(f"equation of {v!r} references undeclared parents {sorted(stray)}")
        report.extend(_check_gates(scenario, scenario.equations[v], v))

    if set(scenario.parents.get("yhat", ())) != {"x", THETA}:
        report.append("Pa(yhat) must be {x, Theta}")
    ch_d = set(scenario.children(D))
    ch_yhat = set(scenario.children("yhat"))
    if ch_d != ch_yhat:
        report.append(f"Ch(D)=Ch(yhat) violated: Ch(D)={sorted(ch_d)}, Ch(yhat)={sorted(ch_yhat)}")
    directed, bidirected = latent_projection(scenario, ["x", "yhat", "y", D, THETA])
    for e in sorted(directed - ALLOWED_DIRECTED):
        report.append(f"latent projection has forbidden edge {e[0]}->{e[1]}")
    for e in bidirected - ALLOWED_BIDIRECTED:
        report.append(f"latent projection has forbidden confounding {'<->'.join(sorted(e))}")
    for p in scenario.pivot:
        if p not in names:
            report.append(f"pivot variable {p!r} is not a node")
    if not report:
        report.extend(_check_domain0_invariance(scenario))
    return report


def _check_gates(scenario, expr, owner) -> list[str]:
    out = []
    if "op" not in expr:
        return out
    op = expr["op"]
    if op == "gate":
        on = expr["on"]
        if on == D:
            required = [0.0, 1.0]
        elif on in scenario.names:
            required = scenario.node(on).values()
        else:
            required = None
        present = {float(k) for k in expr["cases"]}
        if required is None:
            out.append(f"gate in {owner!r} switches on non-discrete {on!r}")
        elif not set(required) <= present:
            out.append(f"gate in {owner!r} on {on!r} misses cases {sorted(set(required) - present)}")
        for e in expr["cases"].values():
            out.extend(_check_gates(scenario, e, owner))
    elif op == "affine":
        for _, e in expr["terms"]:
            out.extend(_check_gates(scenario, e, owner))
    elif op in ("mul", "gt", "xor"):
        for e in expr["args"]:
            out.extend(_check_gates(scenario, e, owner))
    elif op == "logistic":
        out.extend(_check_gates(scenario, expr["arg"], owner))
    elif op == "bernoulli":
        out.extend(_check_gates(scenario, expr["p"], owner))
    return out


def _check_domain0_invariance(scenario) -> list[str]:
    ref = None
    for value in (0.0, 1.0, 0.5):
        vals = _simulate(scenario, DomainSetting(0, constant_predictor(value)), 64, 12345)
        vals = {k: v for k, v in vals.items() if k != "yhat"}
        if ref is None:
            ref = vals
        elif any(not np.array_equal(ref[k], vals[k]) for k in ref):
            return ["under d=0 theta influences nodes other than yhat"]
    return []


# ---------------------------------------------------------------------------
# sampling


def noise_stream(seed: int, index: int) -> np.random.Generator:
    """Counter-based stream keyed by ``(seed, noise index)``; row i is draw i."""
    key = np.array([seed % 2**64, index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _simulate(scenario: Scenario, setting: DomainSetting, n: int, seed: int) -> dict[str, np.ndarray]:
    env: dict[str, Any] = {D: float(setting.d)}
    for i, (name, noise) in enumerate(scenario.noises.items()):
        env[name] = noise.draw(noise_stream(seed, i), n)
    out = {}
    for v in topological_order(scenario):
        val = np.broadcast_to(np.asarray(evaluate(scenario.equations[v], env, setting.theta), dtype=float), (n,))
        ok = scenario.node(v).contains(val)
        if not ok.all():
            row = int(np.flatnonzero(~ok)[0])
            raise StateSpaceError(f"node {v!r} left its state space at row {row} (value {val[row]!r})")
        env[v] = val
        out[v] = np.array(val)
    return out


def sample(scenario: Scenario, setting: DomainSetting, n: int, seed: int, check: bool = True) -> "Dataset":
    """Draw ``n`` i.i.d. units from ``P(. | do(D=d, Theta=theta))``."""
    if n < 1:
        raise ValueError("n must be positive")
    if check:
        report = validate(scenario)
        if report:
            raise ScenarioError(f"scenario {scenario.name!r} is invalid: {report}")
    vals = _simulate(scenario, setting, n, seed)
    ones = np.ones(n, dtype=np.int8)
    s_sample = vals.pop("s_sample").astype(np.int8) if "s_sample" in vals else ones
    s_label = vals.pop("s_label").astype(np.int8) if "s_label" in vals else ones.copy()
    y = vals.pop("y")
    y = np.where(s_label == 1, y, np.nan)
    roles = {nd.name: nd.role for nd in scenario.nodes if nd.name in vals}
    selection = set(scenario.by_role("s_sample") + scenario.by_role("s_label"))
    relevant = tuple(v for v in scenario.names if set(scenario.parents.get(v, ())) & selection and v in vals)
    return Dataset(vals, roles, s_sample, s_label, y, setting, seed, relevant)


# ---------------------------------------------------------------------------
# datasets


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable table of sampled units.

    ``y`` is NaN exactly where ``s_label == 0``; label reads go through
    :meth:`labels`, which refuses rows without labels.
    """

    columns: Mapping[str, np.ndarray]
    roles: Mapping[str, str]
    s_sample: np.ndarray
    s_label: np.ndarray
    y: np.ndarray
    setting: DomainSetting
    seed: int | None = None
    selection_relevant: tuple[str, ...] = ()
    extra: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "columns", {k: _readonly(v) for k, v in self.columns.items()})
        object.__setattr__(self, "extra", {k: _readonly(v) for k, v in self.extra.items()})
        for name in ("s_sample", "s_label", "y"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))
        n = len(self.y)
        if any(len(v) != n for v in list(self.columns.values()) + [self.s_sample, self.s_label]):
            raise ValueError("ragged dataset")
        if not np.array_equal(np.isnan(self.y), self.s_label == 0):
            raise ValueError("y must be present exactly where s_label == 1")
        for k, v in self.columns.items():
            if not np.isfinite(v).all():
                raise ValueError(f"non-finite entries in column {k!r}")

    @property
    def n(self) -> int:
        return len(self.y)

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, name: str) -> np.ndarray:
        if name == "y":
            return self.labels()
        if name in self.columns:
            return self.columns[name]
        if name in self.extra:
            return self.extra[name]
        raise KeyError(f"dataset has no column {name!r}")

    @property
    def has_all_labels(self) -> bool:
        return bool(np.all(self.s_label == 1))

    def labels(self) -> np.ndarray:
        if not self.has_all_labels:
            raise ValueError("dataset contains unlabeled rows; use .labeled() first")
        return self.y

    def take(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(
            {k: v[idx] for k, v in self.columns.items()},
            self.roles,
            self.s_sample[idx],
            self.s_label[idx],
            self.y[idx],
            self.setting,
            self.seed,
            self.selection_relevant,
            {k: v[idx] for k, v in self.extra.items()},
        )

    def observed(self) -> "Dataset":
        """Rows that survive sample selection (``s_sample == 1``)."""
        return self.take(np.flatnonzero(self.s_sample == 1))

    def labeled(self) -> "Dataset":
        """Observed rows that carry a label."""
        return self.take(np.flatnonzero((self.s_sample == 1) & (self.s_label == 1)))

    def unlabeled(self) -> "Dataset":
        """Same rows with every label removed (a pivot-only target sample)."""
        return Dataset(
            self.columns,
            self.roles,
            self.s_sample,
            np.zeros(self.n, dtype=np.int8),
            np.full(self.n, np.nan),
            self.setting,
            self.seed,
            self.selection_relevant,
            self.extra,
        )

    def with_column(self, name: str, values) -> "Dataset":
        extra = dict(self.extra)
        extra[name] = np.asarray(values, dtype=float)
        return Dataset(self.columns, self.roles, self.s_sample, self.s_label, self.y, self.setting, self.seed,
                       self.selection_relevant, extra)

    def mean_y(self) -> float:
        return float(np.mean(self.labels()))

    def to_csv(self, path) -> None:
        header = ["domain_d", "domain_theta_id"] + list(self.columns) + list(self.extra) + ["s_sample", "s_label", "y"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for i in range(self.n):
                row = [self.setting.d, self.setting.theta_id]
                row += [repr(float(v[i])) for v in self.columns.values()]
                row += [repr(float(v[i])) for v in self.extra.values()]
                row += [int(self.s_sample[i]), int(self.s_label[i])]
                row.append("" if np.isnan(self.y[i]) else repr(float(self.y[i])))
                w.writerow(row)


def read_dataset_csv(path, roles: Mapping[str, str] | None = None) -> Dataset:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if header[:2] != ["domain_d", "domain_theta_id"] or header[-3:] != ["s_sample", "s_label", "y"]:
        raise ValueError("not a dataset CSV")
    names = header[2:-3]
    cols = {k: np.array([float(r[2 + j]) for r in body]) for j, k in enumerate(names)}
    y = np.array([float(r[-1]) if r[-1] != "" else np.nan for r in body])
    setting = DomainSetting(int(body[0][0]) if body else 0, OpaqueTheta(body[0][1] if body else "unknown"))
    extra = {k: cols.pop(k) for k in list(cols) if k.startswith("y_tilde")}
    roles = dict(roles or {k: ("feature" if k == "x" else "prediction" if k == "yhat" else "auxiliary") for k in cols})
    return Dataset(cols, roles, np.array([int(r[-3]) for r in body], dtype=np.int8),
                   np.array([int(r[-2]) for r in body], dtype=np.int8), y, setting, None, (), extra)


def concat(datasets: Sequence[Dataset]) -> Dataset:
    """Stack datasets that share a schema (pooling epochs); keeps the first tag."""
    first = datasets[0]
    return Dataset(
        {k: np.concatenate([d.columns[k] for d in datasets]) for k in first.columns},
        first.roles,
        np.concatenate([d.s_sample for d in datasets]),
        np.concatenate([d.s_label for d in datasets]),
        np.concatenate([d.y for d in datasets]),
        first.setting,
        None,
        first.selection_relevant,
    )


def fingerprint(ds: Dataset) -> str:
    h = hashlib.sha256()
    for k in sorted(ds.columns):
        h.update(k.encode())
        h.update(np.ascontiguousarray(ds.columns[k]).tobytes())
    h.update(np.nan_to_num(ds.y, nan=-1.0).tobytes())
    return h.hexdigest()
