"""Library of scenarios used throughout the package.

All scenarios keep ``x`` free of ``D``/``Theta`` ancestry and route every
effect of the prediction through the declared children of ``yhat``.
"""

from __future__ import annotations

import math

from .scm import D, THETA, NodeSpec, Noise, Scenario, linear_predictor

UNIT = ("interval", 0.0, 1.0)
REAL = ("interval", -math.inf, math.inf)
BINARY = ("binary",)


def const(c):
    return {"const": float(c)}


def var(name):
    return {"var": name}


def affine(intercept, *terms):
    return {"op": "affine", "intercept": float(intercept), "terms": [[float(c), e] for c, e in terms]}


def mul(*args):
    return {"op": "mul", "args": list(args)}


def logistic(arg):
    return {"op": "logistic", "arg": arg}


def bernoulli(p, noise):
    return {"op": "bernoulli", "p": p, "noise": noise}


def gt(a, b):
    return {"op": "gt", "args": [a, b]}


def xor(a, b):
    return {"op": "xor", "args": [a, b]}


def gate(on, cases):
    return {"op": "gate", "on": on, "cases": {str(int(k)): v for k, v in cases.items()}}


PREDICT = {"op": "predict"}


def theta_ne(ref):
    return {"op": "theta_ne", "ref": ref}


def example1(eps_deployed: float = 0.0, eps_off: float = 0.0, name: str | None = None) -> Scenario:
    """Alarm example: ``A = D * 1{yhat > 1/2}``, ``Y ~ Ber(sigma(x - 1/2) * (1 - A))``.

    ``eps_deployed`` flips the deployed action with that probability;
    ``eps_off`` takes the action at random with that probability when the
    system is off. Both are exploration noises independent of everything
    else, so ``{x, A}`` stays a valid pivot.
    """
    noises = {"E_x": Noise("uniform", (0.0, 1.0)), "U_y": Noise("uniform", (0.0, 1.0))}
    alarm = gt(var("yhat"), const(0.5))
    if eps_deployed == 0.0 and eps_off == 0.0:
        action = mul(var(D), alarm)
    else:
        deployed, off = alarm, const(0.0)
        if eps_deployed > 0:
            noises["E_flip"] = Noise("bernoulli", (eps_deployed,))
            deployed = xor(alarm, var("E_flip"))
        if eps_off > 0:
            noises["E_off"] = Noise("bernoulli", (eps_off,))
            off = var("E_off")
        action = gate(D, {0: off, 1: deployed})
    risk = logistic(affine(-0.5, (1.0, var("x"))))
    return Scenario(
        name=name or "example1",
        nodes=(
            NodeSpec("x", "feature", UNIT),
            NodeSpec("yhat", "prediction", UNIT),
            NodeSpec("A", "action", BINARY),
            NodeSpec("y", "outcome", BINARY),
        ),
        noises=noises,
        equations={
            "x": var("E_x"),
            "yhat": PREDICT,
            "A": action,
            "y": bernoulli(mul(risk, affine(1.0, (-1.0, var("A")))), "U_y"),
        },
        parents={"x": (), "yhat": ("x", THETA), "A": ("yhat", D), "y": ("x", "A")},
        pivot=("A",),
        description="X~Unif[0,1], A = D*1{yhat>1/2}, Y~Ber(sigma(X-1/2)(1-A))",
    )


MEDIATOR_PARAMS = {
    "a0": -1.5, "a_x": 0.5, "a_c": 3.0, "a_alarm": 3.0,
    "y0": -1.0, "y_x": 0.5, "y_a": -2.0, "y_c": 2.5,
}


def mediator_confounded(**overrides) -> Scenario:
    """Action mediates the prediction and shares an observed cause ``C`` with ``Y``."""
    p = {**MEDIATOR_PARAMS, **overrides}
    alarm = mul(var(D), gt(var("yhat"), const(0.5)))
    return Scenario(
        name="mediator_confounded",
        nodes=(
            NodeSpec("x", "feature", UNIT),
            NodeSpec("yhat", "prediction", UNIT),
            NodeSpec("C", "confounder", BINARY),
            NodeSpec("A", "action", BINARY),
            NodeSpec("y", "outcome", BINARY),
        ),
        noises={
            "E_x": Noise("uniform", (0.0, 1.0)),
            "E_c": Noise("bernoulli", (0.5,)),
            "U_a": Noise("uniform", (0.0, 1.0)),
            "U_y": Noise("uniform", (0.0, 1.0)),
        },
        equations={
            "x": var("E_x"),
            "yhat": PREDICT,
            "C": var("E_c"),
            "A": bernoulli(logistic(affine(p["a0"], (p["a_x"], var("x")), (p["a_c"], var("C")),
                                           (p["a_alarm"], alarm))), "U_a"),
            "y": bernoulli(logistic(affine(p["y0"], (p["y_x"], var("x")), (p["y_a"], var("A")),
                                           (p["y_c"], var("C")))), "U_y"),
        },
        parents={"x": (), "yhat": ("x", THETA), "C": (), "A": ("x", "C", "yhat", D), "y": ("x", "A", "C")},
        pivot=("A", "C"),
        description="Performative prediction through a mediator A with observed common cause C",
    )


SELECTION_PARAMS = {
    **MEDIATOR_PARAMS,
    "a_c": 1.5, "a_alarm": 2.0,  # keeps A=0 reachable under the alarm so overlap holds
    "s0": 0.0, "s_x": 0.5, "s_c": -0.75, "s_a": 1.0,
    "l0": 1.0, "l_x": 0.5, "l_a": -1.0,
    "m0": -1.5, "m_s": 3.0,
    "y_m": 2.0,
}


def selection(always_selected: bool = False, **overrides) -> Scenario:
    """Mediator scenario extended with sample selection, selective labelling and
    a mediator ``M`` between the selection indicator and the outcome."""
    p = {**SELECTION_PARAMS, **overrides}
    alarm = mul(var(D), gt(var("yhat"), const(0.5)))
    if always_selected:
        s_sample, s_label = const(1.0), const(1.0)
    else:
        s_sample = bernoulli(logistic(affine(p["s0"], (p["s_x"], var("x")), (p["s_c"], var("C")),
                                             (p["s_a"], var("A")))), "U_s")
        s_label = bernoulli(logistic(affine(p["l0"], (p["l_x"], var("x")), (p["l_a"], var("A")))), "U_l")
    return Scenario(
        name="selection_unselected" if always_selected else "selection",
        nodes=(
            NodeSpec("x", "feature", UNIT),
            NodeSpec("yhat", "prediction", UNIT),
            NodeSpec("C", "confounder", BINARY),
            NodeSpec("A", "action", BINARY),
            NodeSpec("s_sample", "s_sample", BINARY),
            NodeSpec("s_label", "s_label", BINARY),
            NodeSpec("M", "mediator", BINARY),
            NodeSpec("y", "outcome", BINARY),
        ),
        noises={
            "E_x": Noise("uniform", (0.0, 1.0)),
            "E_c": Noise("bernoulli", (0.5,)),
            "U_a": Noise("uniform", (0.0, 1.0)),
            "U_s": Noise("uniform", (0.0, 1.0)),
            "U_l": Noise("uniform", (0.0, 1.0)),
            "U_m": Noise("uniform", (0.0, 1.0)),
            "U_y": Noise("uniform", (0.0, 1.0)),
        },
        equations={
            "x": var("E_x"),
            "yhat": PREDICT,
            "C": var("E_c"),
            "A": bernoulli(logistic(affine(p["a0"], (p["a_x"], var("x")), (p["a_c"], var("C")),
                                           (p["a_alarm"], alarm))), "U_a"),
            "s_sample": s_sample,
            "s_label": s_label,
            "M": bernoulli(logistic(affine(p["m0"], (p["m_s"], mul(var("s_sample"), var("s_label")))) ), "U_m"),
            "y": bernoulli(logistic(affine(p["y0"], (p["y_x"], var("x")), (p["y_a"], var("A")),
                                           (p["y_c"], var("C")), (p["y_m"], var("M")))), "U_y"),
        },
        parents={
            "x": (),
            "yhat": ("x", THETA),
            "C": (),
            "A": ("x", "C", "yhat", D),
            "s_sample": () if always_selected else ("x", "C", "A"),
            "s_label": () if always_selected else ("x", "A"),
            "M": ("s_sample", "s_label"),
            "y": ("x", "A", "C", "M"),
        },
        pivot=("A", "C", "M"),
        description="Selection graph: S = S^s and S^l, with S -> M -> Y",
    )


def prop3(i: int, d_ref: int = 1, theta_ref: float = 0.5) -> Scenario:
    """Linear-Gaussian pair member ``M_i`` with source domain ``(d_ref, theta_ref)``.

    ``yhat = theta * x + i * 1{theta != theta_ref}`` and
    ``y = x + 1{D=1} * yhat + i * 1{D != d_ref}``; theta is a linear
    predictor with slope ``theta``.
    """
    ref = linear_predictor(theta_ref).theta_id
    return Scenario(
        name=f"prop3_m{i}",
        nodes=(
            NodeSpec("x", "feature", REAL),
            NodeSpec("yhat", "prediction", REAL),
            NodeSpec("y", "outcome", REAL),
        ),
        noises={"E_x": Noise("gaussian", (0.0, 1.0))},
        equations={
            "x": var("E_x"),
            "yhat": affine(0.0, (1.0, PREDICT), (float(i), theta_ne(ref))),
            "y": gate(D, {
                0: affine(i * float(d_ref != 0), (1.0, var("x"))),
                1: affine(i * float(d_ref != 1), (1.0, var("x")), (1.0, var("yhat"))),
            }),
        },
        parents={"x": (), "yhat": ("x", THETA), "y": ("x", "yhat", D)},
        pivot=(),
        description=f"non-identifiability pair member {i}, source (d'={d_ref}, theta'={theta_ref})",
    )


def prop4(model: int, d: int = 1) -> Scenario:
    """XOR pair with target domain ``d`` and source ``d' = 1 - d``.

    ``prop4_m1`` uses ``Z1 = XOR(D, E_z1y)`` in every domain, so its target
    conditional expectation is ``d``; ``prop4_m2`` switches to an independent
    noise in the target domain, giving ``1/2``. Source laws coincide.
    """
    if model == 1:
        z1 = xor(var(D), var("E_z1y"))
    else:
        z1 = gate(D, {d: xor(var(D), var("E_z1")), 1 - d: xor(var(D), var("E_z1y"))})
    return Scenario(
        name=f"prop4_m{model}",
        nodes=(
            NodeSpec("x", "feature", ("finite", (0.0, 1.0))),
            NodeSpec("yhat", "prediction", UNIT),
            NodeSpec("Z1", "mediator", BINARY),
            NodeSpec("y", "outcome", BINARY),
        ),
        noises={
            "E_x": Noise("bernoulli", (0.5,)),
            "E_z1": Noise("bernoulli", (0.5,)),
            "E_z1y": Noise("bernoulli", (0.5,)),
        },
        equations={"x": var("E_x"), "yhat": PREDICT, "Z1": z1, "y": xor(var("Z1"), var("E_z1y"))},
        parents={"x": (), "yhat": ("x", THETA), "Z1": ("yhat", D), "y": ("Z1",)},
        pivot=("Z1",),
        description=f"XOR non-identifiability pair member {model}, target d={d}",
    )


def example1_discrete(n_states: int = 10, residual_risk: float = 0.0, explore: float = 0.0,
                      name: str = "example1_discrete") -> Scenario:
    """Example 1 on ``n_states`` equiprobable x values in threshold-action form.

    ``A = D * 1{yhat > eps}`` with ``eps = residual_risk = P(Y=1 | x, A=1)``.
    ``explore > 0`` randomizes the action with that probability in both
    domains, which gives overlap but leaves the threshold form.
    """
    values = tuple((k + 0.5) / n_states for k in range(n_states))
    risk = logistic(affine(-0.5, (1.0, var("x"))))
    noises = {
        "E_x": Noise("categorical", (values, tuple([1.0 / n_states] * n_states))),
        "U_y": Noise("uniform", (0.0, 1.0)),
    }
    action = mul(var(D), gt(var("yhat"), const(residual_risk)))
    if explore > 0:
        noises["E_off"] = Noise("bernoulli", (explore,))
        noises["E_flip"] = Noise("bernoulli", (explore,))
        action = gate(D, {0: var("E_off"), 1: xor(gt(var("yhat"), const(residual_risk)), var("E_flip"))})
    return Scenario(
        name=name,
        nodes=(
            NodeSpec("x", "feature", ("finite", values)),
            NodeSpec("yhat", "prediction", UNIT),
            NodeSpec("A", "action", BINARY),
            NodeSpec("y", "outcome", BINARY),
        ),
        noises=noises,
        equations={
            "x": var("E_x"),
            "yhat": PREDICT,
            "A": action,
            "y": bernoulli(affine(0.0, (1.0, mul(risk, affine(1.0, (-1.0, var("A"))))),
                                  (residual_risk, var("A"))), "U_y"),
        },
        parents={"x": (), "yhat": ("x", THETA), "A": ("yhat", D), "y": ("x", "A")},
        pivot=("A",),
        description="discretised threshold-action example",
    )


EPS_EXPLORE = 0.05
EPS_OFF = 0.01


def scenario_library() -> dict[str, Scenario]:
    return {
        "example1": example1(),
        "example1_explore": example1(EPS_EXPLORE, 0.0, name="example1_explore"),
        "example1_randomized": example1(EPS_EXPLORE, EPS_OFF, name="example1_randomized"),
        "example1_discrete": example1_discrete(),
        "example1_binary_explore": example1_discrete(2, 0.45, 0.1, name="example1_binary_explore"),
        "mediator_confounded": mediator_confounded(),
        "selection": selection(),
        "selection_unselected": selection(always_selected=True),
        "prop3_m1": prop3(1),
        "prop3_m2": prop3(2),
        "prop4_m1": prop4(1),
        "prop4_m2": prop4(2),
    }


def get_scenario(name: str) -> Scenario:
    lib = scenario_library()
    if name not in lib:
        raise KeyError(f"unknown scenario {name!r}; known: {sorted(lib)}")
    return lib[name]
