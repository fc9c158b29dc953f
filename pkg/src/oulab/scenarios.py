"""Scenario library and study execution.

A scenario bundles a system (inline matrices or a named generator), a
study to run on it, and parameters.  Studies return plain dictionaries
ready for JSON emission; every Monte Carlo quantity carries its method
and error bound, and each study embeds pass/fail invariant checks that
drive the CLI exit code.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import normgap, spectral
from .budget import DEFAULT_BUDGET, Budget
from .engine import OUSystem
from .errors import ConfigError

STUDIES = ("norm-gap-buc", "norm-gap-l1", "norm-gap-invariant",
           "dichotomy", "spectral-map", "witness-gallery")

SYSTEM_KINDS = ("rotation", "stable-random", "jordan",
                "discretized-1d-diffusion", "inline")


@dataclass(frozen=True)
class Scenario:
    name: str
    system: dict
    study: str
    seed: int
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.study not in STUDIES:
            raise ConfigError(
                f"scenario {self.name!r}: unknown study {self.study!r}; "
                f"choose one of {', '.join(STUDIES)}"
            )
        build_system(self.system)  # validates eagerly
        for t in self.parameters.get("times", []):
            if float(t) < 0:
                raise ConfigError(f"scenario {self.name!r}: negative time {t}")


def build_system(spec):
    """Construct an OUSystem from a scenario system table."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("system table must contain a 'kind' field")
    kind = spec["kind"]
    if kind == "rotation":
        omega = float(spec.get("omega", 1.0))
        A = np.array([[0.0, -omega], [omega, 0.0]])
        return OUSystem(A, np.eye(2))
    if kind == "stable-random":
        seed = int(spec.get("seed", 0))
        dim = int(spec.get("dim", 2))
        rng = np.random.default_rng(seed)
        M = rng.standard_normal((dim, dim))
        shift = max(np.linalg.eigvals(M).real.max(), 0.0) + 1.0
        A = M - shift * np.eye(dim)
        B = np.eye(dim) + 0.2 * rng.standard_normal((dim, dim))
        return OUSystem(A, B)
    if kind == "jordan":
        dim = int(spec.get("dim", 2))
        lam = float(spec.get("eigenvalue", -1.0))
        A = lam * np.eye(dim) + np.diag(np.ones(dim - 1), 1)
        return OUSystem(A, np.eye(dim))
    if kind == "discretized-1d-diffusion":
        dim = int(spec.get("dim", 8))
        # Dirichlet Laplacian on a unit interval: stable, eventually
        # smoothing drift with widely spread spectrum.
        h = 1.0 / (dim + 1)
        A = (np.diag(-2.0 * np.ones(dim)) + np.diag(np.ones(dim - 1), 1)
             + np.diag(np.ones(dim - 1), -1)) / h**2
        A = A / (dim + 1)  # keep time scales desk-sized
        return OUSystem(A, np.eye(dim))
    if kind == "inline":
        try:
            A = np.array(spec["A"], dtype=float)
            B = np.array(spec["B"], dtype=float)
        except KeyError as exc:
            raise ConfigError(f"inline system missing matrix {exc}") from exc
        return OUSystem(A, B)
    raise ConfigError(
        f"unknown system kind {kind!r}; choose one of {', '.join(SYSTEM_KINDS)}"
    )


def _budget_from(params):
    if "max_evals" in params or "target_std_error" in params:
        return Budget(
            max_evals=int(params.get("max_evals", DEFAULT_BUDGET.max_evals)),
            target_std_error=float(params.get(
                "target_std_error", DEFAULT_BUDGET.target_std_error)),
        )
    return DEFAULT_BUDGET


def _witness_dict(rep):
    return {
        "space": rep.space,
        "witness": rep.witness,
        "lower_bound": rep.lower_bound,
        "upper_bound": rep.upper_bound,
        "diagnostics": rep.diagnostics,
    }


def _times_pair(params):
    times = params.get("times", [1.0, 0.5])
    if len(times) != 2:
        raise ConfigError("parameter 'times' must be a pair [t, s]")
    return float(times[0]), float(times[1])


def run_study(scenario):
    """Execute the scenario's study; returns (results dict, checks list).

    Each check is {'name', 'passed', 'detail'}; the CLI exits nonzero if
    any check fails.
    """
    sys_ = build_system(scenario.system)
    params = scenario.parameters
    rng = np.random.default_rng(scenario.seed)
    budget = _budget_from(params)
    checks = []

    def check(name, passed, detail=""):
        checks.append({"name": name, "passed": bool(passed), "detail": detail})

    if scenario.study == "dichotomy":
        verdict = normgap.dichotomy_classify(
            sys_, tolerance=float(params.get("tolerance", 1e-8)))
        result = {"kind": verdict.kind, "period": verdict.period,
                  "eigen_report": verdict.eigen_report}
        check("verdict-well-formed",
              verdict.kind in ("periodic", "gap-everywhere")
              and (verdict.period is None or verdict.period >= 0))
        return result, checks

    if scenario.study == "norm-gap-buc":
        t, s = _times_pair(params)
        if "t_grid" in params:
            tg = [float(v) for v in params["t_grid"]]
            sg = [float(v) for v in params.get("s_grid", params["t_grid"])]
            grid = []
            for tv in tg:
                for sv in sg:
                    if abs(tv - sv) < 1e-12:
                        grid.append({"t": tv, "s": sv, "lower_bound": 0.0})
                        continue
                    rep = normgap.buc_gap(sys_, max(tv, sv), min(tv, sv),
                                          schedule=(1.0, 10.0, 100.0),
                                          budget=budget, rng=rng)
                    grid.append({"t": tv, "s": sv,
                                 "lower_bound": rep.lower_bound})
            result = {"grid": grid}
            check("grid-bounds-in-range",
                  all(0.0 <= g["lower_bound"] <= 2.0 for g in grid))
            return result, checks
        rep = normgap.buc_gap(sys_, t, s, budget=budget, rng=rng)
        result = _witness_dict(rep)
        check("bounds-ordered", rep.lower_bound <= rep.upper_bound)
        return result, checks

    if scenario.study == "norm-gap-l1":
        t, s = _times_pair(params)
        rep_r = normgap.l1_lebesgue_gap(sys_, t, s, semigroup="R",
                                        budget=budget, rng=rng)
        rep_p = normgap.l1_lebesgue_gap(sys_, t, s, semigroup="P",
                                        budget=budget, rng=rng)
        result = {"drift": _witness_dict(rep_r), "ou": _witness_dict(rep_p)}
        check("drift-gap-exact", rep_r.lower_bound >= 2.0 - 1e-9,
              f"lower bound {rep_r.lower_bound}")
        check("balls-disjoint", rep_r.diagnostics.get("disjoint", False))
        levels = rep_p.diagnostics["levels"]
        check("dilation-monotone",
              all(levels[i + 1]["certified"] >= levels[i]["certified"]
                  for i in range(len(levels) - 1)))
        return result, checks

    if scenario.study == "norm-gap-invariant":
        t, s = _times_pair(params)
        n_values = tuple(int(n) for n in params.get("n_values", (1, 4, 16, 64)))
        rep = normgap.l1_invariant_gap(sys_, t, s, budget=budget, rng=rng,
                                       n_values=n_values)
        result = _witness_dict(rep)
        levels = rep.diagnostics["levels"]
        check("dilation-monotone",
              all(levels[i + 1]["certified"] >= levels[i]["certified"]
                  for i in range(len(levels) - 1)))
        check("final-level-near-2", levels[-1]["certified"] >= 1.9,
              f"certified {levels[-1]['certified']}")
        return result, checks

    if scenario.study == "spectral-map":
        g = params.get("grid", {})
        grid = spectral.ComplexGrid(
            re_min=float(g.get("re_min", -2.0)),
            re_max=float(g.get("re_max", 1.0)),
            im_min=float(g.get("im_min", -1.0)),
            im_max=float(g.get("im_max", 1.0)),
            n_re=int(g.get("n_re", 13)),
            n_im=int(g.get("n_im", 9)),
        )
        norm_kind = params.get("norm_kind", "weighted-L1")
        disc_dim = int(params.get("disc_dim", 500))
        smap = spectral.resolvent_map(sys_, grid, norm_kind, disc_dim, rng=rng)
        re, im = grid.points()
        values = [[None if not np.isfinite(v) else float(v) for v in row]
                  for row in smap.values]
        result = {
            "grid": {"re": re.tolist(), "im": im.tolist()},
            "values": values,
            "norm_kind": smap.norm_kind,
            "discretization_dim": smap.discretization_dim,
            "artifacts": smap.artifacts,
            "failures": smap.failures,
        }
        finite = smap.values[np.isfinite(smap.values)]
        check("values-positive", finite.size == 0 or float(finite.min()) > 0)
        bad = [a for a in smap.artifacts
               if a["value"] > a["bound"] * 1.05]
        check("contraction-artifacts-small", not bad,
              f"{len(bad)} grid points exceed the bound by more than 5%")
        return result, checks

    if scenario.study == "witness-gallery":
        t, s = _times_pair(params)
        gallery = {}
        try:
            rep = normgap.cosine_witness(sys_, t, s, rng=rng)
            gallery["cosine"] = _witness_dict(rep)
            check("cosine-lower-bound-large", rep.lower_bound >= 1.99,
                  f"achieved {rep.lower_bound}")
        except Exception as exc:  # equal flows
            gallery["cosine"] = {"inapplicable": str(exc)}
        try:
            balls = normgap.disjoint_balls_witness(sys_, max(t, s), min(t, s),
                                                   rng=rng)
            gallery["disjoint_balls"] = {
                "x0": balls.x0.tolist(), "r": balls.r, "M": balls.M,
                "min_separation": balls.min_separation,
            }
            check("balls-disjoint",
                  balls.min_separation >= balls.r * (1 - 1e-9))
        except Exception as exc:
            gallery["disjoint_balls"] = {"inapplicable": str(exc)}
        lam = complex(*params.get("heat_lambda", (-1.0, 0.5)))
        n = int(params.get("heat_n", 3))
        _, _, norms = spectral.heat_approx_eigenvector(lam, n, rng=rng)
        gallery["heat_approx"] = {
            "lambda": [lam.real, lam.imag], "n": n,
            "g_sup": norms["g_sup"], "g_sup_formula": norms["g_sup_formula"],
            "identity_defect": norms["identity_defect"],
        }
        check("heat-norm-formula",
              abs(norms["g_sup"] - norms["g_sup_formula"]) <= 1e-10)
        return gallery, checks

    raise ConfigError(f"unhandled study {scenario.study!r}")


def bundled_scenarios():
    """The built-in scenario gallery (name, study, system kind)."""
    entries = [
        ("rotation-dichotomy", "dichotomy", {"kind": "rotation"}),
        ("rotation-buc-halfgap", "norm-gap-buc", {"kind": "rotation"}),
        ("stable-random-invariant", "norm-gap-invariant",
         {"kind": "stable-random", "seed": 7}),
        ("jordan-lebesgue", "norm-gap-l1", {"kind": "jordan"}),
        ("diffusion-spectral", "spectral-map",
         {"kind": "discretized-1d-diffusion", "dim": 1}),
        ("standard-ou-witnesses", "witness-gallery",
         {"kind": "inline", "A": [[-1.0]], "B": [[1.0]]}),
    ]
    out = []
    for i, (name, study, system) in enumerate(entries):
        params = {}
        if name == "rotation-buc-halfgap":
            params = {"times": [2.0 * math.pi, 4.0 * math.pi]}
        out.append(Scenario(name=name, system=system, study=study,
                            seed=100 + i, parameters=params))
    return out
