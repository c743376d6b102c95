"""Exact ground truth by enumeration (finite parts) and adaptive quadrature (x).

Given ``x``, every scenario in scope is a finite mixture: discrete noises are
enumerated and each ``bernoulli`` form contributes two weighted branches. The
remaining integral over a continuous ``x`` is done by adaptive Simpson.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from . import scm
from .quadrature import adaptive_simpson, gaussian_density
from .scm import D, DomainSetting, Scenario

QUAD_TOL = 1e-9
N_PROBES = 101


class OracleError(ValueError):
    pass


class ZeroProbabilityError(OracleError):
    pass


class AbsoluteContinuityError(OracleError):
    pass


@dataclass(frozen=True)
class OracleValue:
    value: float
    method: str  # "enumeration" | "quadrature"
    abs_error_bound: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class XLaw:
    kind: str  # "continuous" | "finite"
    lo: float = 0.0
    hi: float = 0.0
    probe_lo: float = 0.0
    probe_hi: float = 0.0
    density: object = None
    atoms: tuple = ()

    def probes(self, n: int = N_PROBES) -> np.ndarray:
        if self.kind == "finite":
            return np.array([v for v, _ in self.atoms])
        return np.linspace(self.probe_lo, self.probe_hi, n)

    def contains(self, x: float) -> bool:
        if self.kind == "finite":
            return any(abs(x - v) < 1e-12 for v, _ in self.atoms)
        return self.lo <= x <= self.hi


def x_law(scenario: Scenario) -> XLaw:
    eq = scenario.equations["x"]
    if "var" not in eq or eq["var"] not in scenario.noises:
        raise OracleError("oracle requires x to be a copy of a single noise")
    noise = scenario.noises[eq["var"]]
    users = scm._noise_users(scenario)[eq["var"]]
    if users != {"x"}:
        raise OracleError("oracle requires the noise of x to be used by x only")
    if noise.kind == "uniform":
        a, b = noise.params
        return XLaw("continuous", a, b, a, b, lambda t, c=1.0 / (b - a): c)
    if noise.kind == "gaussian":
        mu, sd = noise.params
        return XLaw("continuous", mu - 12 * sd, mu + 12 * sd, mu - 3 * sd, mu + 3 * sd, gaussian_density(mu, sd))
    return XLaw("finite", atoms=tuple(noise.support()))


def _check_support(scenario: Scenario) -> None:
    x_noise = scenario.equations["x"].get("var")
    users = scm._noise_users(scenario)
    bern_noises: dict[str, int] = {}

    def walk(e):
        if "op" not in e:
            return
        if e["op"] == "bernoulli":
            bern_noises[e["noise"]] = bern_noises.get(e["noise"], 0) + 1
            walk(e["p"])
        elif e["op"] == "affine":
            for _, t in e["terms"]:
                walk(t)
        elif e["op"] in ("mul", "gt", "xor"):
            for t in e["args"]:
                walk(t)
        elif e["op"] == "logistic":
            walk(e["arg"])
        elif e["op"] == "gate":
            for t in e["cases"].values():
                walk(t)

    for eq in scenario.equations.values():
        walk(eq)
    for name, noise in scenario.noises.items():
        if name == x_noise or noise.discrete:
            continue
        if noise.kind == "uniform" and bern_noises.get(name, 0) == 1 and len(users[name]) == 1:
            # a uniform noise used by one bernoulli form, and nowhere else
            (owner,) = users[name]
            if _count_var(scenario.equations[owner], name) == 0:
                continue
        raise OracleError(f"noise {name!r} is outside the oracle's closed form library")


def _count_var(e, name) -> int:
    if "var" in e:
        return int(e["var"] == name)
    if "const" in e:
        return 0
    op = e["op"]
    if op == "affine":
        return sum(_count_var(t, name) for _, t in e["terms"])
    if op in ("mul", "gt", "xor"):
        return sum(_count_var(t, name) for t in e["args"])
    if op == "logistic":
        return _count_var(e["arg"], name)
    if op == "bernoulli":
        return _count_var(e["p"], name)
    if op == "gate":
        return int(e["on"] == name) + sum(_count_var(t, name) for t in e["cases"].values())
    return 0


def enumerate_units(
    scenario: Scenario,
    setting: DomainSetting,
    x: float,
    overrides: Mapping[str, float] | None = None,
) -> list[tuple[dict, float]]:
    """All joint states of the endogenous nodes given ``x``, with probabilities."""
    _check_support(scenario)
    overrides = dict(overrides or {})
    x_noise = scenario.equations["x"]["var"]
    discrete = [(k, v.support()) for k, v in scenario.noises.items() if v.discrete and k != x_noise]
    states: list[tuple[dict, float]] = [({D: float(setting.d), "x": float(x)}, 1.0)]
    for name, support in discrete:
        states = [({**env, name: v}, w * p) for env, w in states for v, p in support]
    for node in scm.topological_order(scenario):
        if node == "x":
            continue
        new = []
        for env, w in states:
            if node in overrides:
                law = [(float(overrides[node]), 1.0)]
            else:
                law = scm.branches(scenario.equations[node], env, setting.theta)
            for v, p in law:
                if p > 0:
                    new.append(({**env, node: v}, w * p))
        states = new
    return states


def _matches(env: Mapping, cond: Mapping) -> bool:
    return all(abs(env[k] - v) < 1e-12 for k, v in cond.items())


def _moments(scenario, setting, x, cond, overrides=None) -> tuple[float, float]:
    num = den = 0.0
    for env, w in enumerate_units(scenario, setting, x, overrides):
        if _matches(env, cond):
            num += w * env["y"]
            den += w
    return num, den


def _integrate(law: XLaw, f) -> tuple[float, float, str]:
    if law.kind == "finite":
        return sum(p * f(v) for v, p in law.atoms), 0.0, "enumeration"
    val, err = adaptive_simpson(lambda t: f(t) * law.density(t), law.lo, law.hi, tol=QUAD_TOL)
    return val, err, "quadrature"


def exact_cond_expectation(
    scenario: Scenario,
    setting: DomainSetting,
    conditioning: Mapping[str, float] | None = None,
) -> OracleValue:
    """``E[Y | conditioning, do(D=d, Theta=theta)]``.

    ``conditioning`` is a partial assignment over ``x`` and other nodes
    (pivot variables or selection indicators).
    """
    cond = dict(conditioning or {})
    law = x_law(scenario)
    if "x" in cond:
        x = float(cond.pop("x"))
        if not law.contains(x) or (law.kind == "continuous" and law.density(x) <= 0):
            raise ZeroProbabilityError(f"zero-probability conditioning: x={x}")
        num, den = _moments(scenario, setting, x, cond)
        if den <= 0:
            raise ZeroProbabilityError(f"zero-probability conditioning: {conditioning}")
        return OracleValue(num / den, "enumeration", 0.0)

    cache: dict[float, tuple[float, float]] = {}

    def mom(t):
        if t not in cache:
            cache[t] = _moments(scenario, setting, t, cond)
        return cache[t]

    num, err_n, method = _integrate(law, lambda t: mom(t)[0])
    if not cond:
        return OracleValue(num, method, err_n)
    den, err_d, _ = _integrate(law, lambda t: mom(t)[1])
    if den <= 1e-14:
        raise ZeroProbabilityError(f"zero-probability conditioning: {conditioning}")
    value = num / den
    bound = (err_n + abs(value) * err_d) / den if method == "quadrature" else 0.0
    return OracleValue(value, method, bound)


def exact_probability(scenario: Scenario, setting: DomainSetting, event: Mapping[str, float]) -> OracleValue:
    """``P(event | do(D=d, Theta=theta))`` for a partial assignment of non-x nodes."""
    law = x_law(scenario)
    p, err, method = _integrate(law, lambda t: _moments(scenario, setting, t, event)[1])
    return OracleValue(p, method, err)


def exact_mean(scenario: Scenario, setting: DomainSetting) -> OracleValue:
    return exact_cond_expectation(scenario, setting, {})


def exact_effects(scenario: Scenario, theta, theta_prev) -> tuple[OracleValue, OracleValue]:
    """Deployment effect of ``theta`` and retraining effect of ``theta`` over ``theta_prev``."""
    on = exact_mean(scenario, DomainSetting(1, theta))
    off = exact_mean(scenario, DomainSetting(0, theta))
    prev = on if theta_prev is theta else exact_mean(scenario, DomainSetting(1, theta_prev))
    method = "quadrature" if "quadrature" in (on.method, off.method, prev.method) else "enumeration"
    tau = OracleValue(on.value - off.value, method, on.abs_error_bound + off.abs_error_bound)
    rho = OracleValue(on.value - prev.value, method, on.abs_error_bound + prev.abs_error_bound)
    return tau, rho


def conditional_curve(scenario: Scenario, setting: DomainSetting, grid: Sequence[float]) -> np.ndarray:
    """``x -> E[Y | X=x, do(setting)]`` on a grid."""
    return np.array([exact_cond_expectation(scenario, setting, {"x": float(x)}).value for x in grid])


# ---------------------------------------------------------------------------
# identification checks


def _z_law(states, z_names, cond=None):
    law: dict[tuple, list[float]] = {}
    for env, w in states:
        if cond and not _matches(env, cond):
            continue
        key = tuple(env[z] for z in z_names)
        acc = law.setdefault(key, [0.0, 0.0])
        acc[0] += w
        acc[1] += w * env["y"]
    return law


def verify_identification(
    scenario: Scenario,
    source: DomainSetting,
    target: DomainSetting,
    z_names: Sequence[str] | None = None,
    source_condition: Mapping[str, float] | None = None,
    grid: Sequence[float] | None = None,
) -> dict:
    """Evaluate both sides of the transport formula on a probe grid of x.

    ``lhs(x) = E[Y | x, do(target)]`` and
    ``rhs(x) = sum_z E[Y | x, z, S, do(source)] P(z | x, do(target))`` where
    ``S`` is the optional ``source_condition`` (e.g. selection indicators).
    Raises :class:`AbsoluteContinuityError` when a target stratum has no
    source mass.
    """
    z_names = tuple(scenario.pivot if z_names is None else z_names)
    law = x_law(scenario)
    grid = law.probes() if grid is None else np.asarray(grid, dtype=float)

    def sides(x):
        tgt = _z_law(enumerate_units(scenario, target, x), z_names)
        src = _z_law(enumerate_units(scenario, source, x), z_names, source_condition)
        lhs = sum(m for _, m in tgt.values())
        rhs = 0.0
        for z, (p, _) in tgt.items():
            mass, ym = src.get(z, (0.0, 0.0))
            if mass <= 0:
                raise AbsoluteContinuityError(
                    f"absolute continuity violated at x={x:.6g}, stratum {dict(zip(z_names, z))}"
                )
            rhs += p * ym / mass
        return lhs, rhs

    pairs = [sides(float(x)) for x in grid]
    lhs = np.array([p[0] for p in pairs])
    rhs = np.array([p[1] for p in pairs])
    mean_lhs, err_l, method = _integrate(law, lambda t: sides(t)[0])
    mean_rhs, err_r, _ = _integrate(law, lambda t: sides(t)[1])
    return {
        "scenario": scenario.name,
        "z_names": list(z_names),
        "source": source.to_dict(),
        "target": target.to_dict(),
        "grid": grid.tolist(),
        "lhs": lhs.tolist(),
        "rhs": rhs.tolist(),
        "max_abs_gap": float(np.max(np.abs(lhs - rhs))),
        "mean_lhs": mean_lhs,
        "mean_rhs": mean_rhs,
        "mean_gap": abs(mean_lhs - mean_rhs),
        "method": method,
        "abs_error_bound": err_l + err_r,
    }


def _observed_law(scenario, setting, x, names) -> dict[tuple, float]:
    law: dict[tuple, float] = {}
    for env, w in enumerate_units(scenario, setting, x):
        key = tuple(round(env[k], 12) for k in names)
        law[key] = law.get(key, 0.0) + w
    return law


def _tv(p: Mapping, q: Mapping) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def nonid_demo(
    scenario_a: Scenario,
    scenario_b: Scenario,
    source: DomainSetting,
    target: DomainSetting,
    probes: Sequence[float] | None = None,
) -> dict:
    """Compare two scenarios: equal source laws, possibly different targets.

    Source equality is checked exactly: the x laws must coincide and, at each
    probe x, the conditional laws of the measured variables (y and the pivot)
    are compared in total variation.
    """
    law_a, law_b = x_law(scenario_a), x_law(scenario_b)
    x_equal = law_a.kind == law_b.kind and (
        law_a.atoms == law_b.atoms if law_a.kind == "finite"
        else scenario_a.noises[scenario_a.equations["x"]["var"]] == scenario_b.noises[scenario_b.equations["x"]["var"]]
    )
    probes = law_a.probes() if probes is None else np.asarray(probes, dtype=float)
    measured = ["y"] + [z for z in scenario_a.pivot if z in scenario_b.names]
    disc = 0.0
    tgt_disc = 0.0
    for x in probes:
        disc = max(disc, _tv(_observed_law(scenario_a, source, x, measured),
                             _observed_law(scenario_b, source, x, measured)))
        pivot = measured[1:]
        if pivot:
            tgt_disc = max(tgt_disc, _tv(_observed_law(scenario_a, target, x, pivot),
                                         _observed_law(scenario_b, target, x, pivot)))
    ce_a = conditional_curve(scenario_a, target, probes)
    ce_b = conditional_curve(scenario_b, target, probes)
    return {
        "scenario_a": scenario_a.name,
        "scenario_b": scenario_b.name,
        "source": source.to_dict(),
        "target": target.to_dict(),
        "measured": measured,
        "source_distribution_equal": bool(x_equal and disc <= 1e-12),
        "max_discrepancy": disc if x_equal else math.inf,
        "target_pivot_discrepancy": tgt_disc,
        "probes": probes.tolist(),
        "target_ce_a": ce_a.tolist(),
        "target_ce_b": ce_b.tolist(),
        "max_target_difference": float(np.max(np.abs(ce_a - ce_b))),
    }


# ---------------------------------------------------------------------------
# optimality of the baseline predictor


@dataclass(frozen=True)
class TabularPredictor:
    """Prediction function given as a table over a finite x space."""

    table: tuple[tuple[float, float], ...]
    theta_id: str = "table"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape, np.nan)
        for k, v in self.table:
            out[np.abs(x - k) < 1e-12] = v
        if np.isnan(out).any():
            raise ValueError("x outside the predictor's table")
        return out


def baseline_table(scenario: Scenario) -> TabularPredictor:
    """Exact baseline predictor ``x -> E[Y | x, do(D=0)]`` on a finite x space."""
    law = x_law(scenario)
    if law.kind != "finite":
        raise OracleError("baseline_table requires a finite x space")
    off = DomainSetting(0, scm.OFF)
    return TabularPredictor(
        tuple((v, exact_cond_expectation(scenario, off, {"x": v}).value) for v, _ in law.atoms),
        theta_id="oracle-baseline",
    )


def _threshold_expr(scenario: Scenario):
    actions = scenario.by_role("action")
    if len(actions) != 1:
        raise OracleError("not a threshold-action scenario")
    eq = scenario.equations[actions[0]]
    ok = (
        eq.get("op") == "mul"
        and len(eq["args"]) == 2
        and eq["args"][0] == {"var": D}
        and eq["args"][1].get("op") == "gt"
        and eq["args"][1]["args"][0] == {"var": "yhat"}
        and scm.references(eq["args"][1]["args"][1]) <= {"x"}
    )
    if not ok:
        raise OracleError("not a threshold-action scenario")
    return actions[0], eq["args"][1]["args"][1]


def verify_baseline_optimality(scenario: Scenario, theta) -> dict:
    """Check a prediction function against the bilevel optimality criteria.

    Per x state: (i) the induced action minimises ``P(Y=1 | x)`` over the two
    actions; (ii) among minimisers it acts only where acting strictly lowers
    the risk. Requires ``A = D * 1{yhat > eps(x)}`` with
    ``eps(x) = P(Y=1 | x, A=1)``.
    """
    law = x_law(scenario)
    if law.kind != "finite":
        raise OracleError("verify_baseline_optimality requires a finite x space")
    action, eps_expr = _threshold_expr(scenario)
    on = DomainSetting(1, theta)
    rows = []
    for x, _ in law.atoms:
        risk = {}
        for a in (0.0, 1.0):
            num, den = _moments(scenario, on, x, {}, overrides={action: a})
            risk[a] = num / den
        eps = float(scm.evaluate(eps_expr, {"x": x}, theta))
        if abs(eps - risk[1.0]) > 1e-12:
            raise OracleError("not a threshold-action scenario: threshold differs from P(Y=1 | x, A=1)")
        yhat = float(theta(np.array([x]))[0])
        a_theta = float(yhat > eps)
        baseline = exact_cond_expectation(scenario, DomainSetting(0, theta), {"x": x}).value
        crit_i = risk[a_theta] <= min(risk.values()) + 1e-12
        crit_ii = not (a_theta == 1.0 and risk[1.0] >= risk[0.0])
        rows.append({
            "x": x, "yhat": yhat, "eps": eps, "risk_no_action": risk[0.0], "risk_action": risk[1.0],
            "baseline": baseline, "action": int(a_theta), "criterion_i": crit_i, "criterion_ii": crit_ii,
        })
    ci = all(r["criterion_i"] for r in rows)
    cii = all(r["criterion_ii"] for r in rows)
    return {"scenario": scenario.name, "theta_id": theta.theta_id, "criterion_i": ci,
            "criterion_ii": cii, "passed": ci and cii, "states": rows}
