"""Desk-scale experiment pipelines behind the ``rkhm`` command line.

Every command maps a validated :class:`ExperimentConfig` to an
:class:`ExperimentReport`: a JSON-ready summary (parameters, measured values,
acceptance booleans) plus CSV tables.  Nothing in a report depends on wall
time, so identical ``(config, seed)`` pairs give byte-identical outputs.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from .algebra import AlgebraDescriptor
from .checks import (impact_suite, kme_suite, koopman_suite, make_rng, quantum_suite, random_psd_matrix_gram,
                     selftest)
from .io import DataError, Table, load_array, load_samples_csv
from .kernels import FunctionalMoment, Gaussian, IntegralOperatorKernel, gram
from .kme import (abs_u, bivariate_values, estimation_error, functional_measure_gram, interaction_fit,
                  interaction_max, interaction_max_exact, nu_kernel)
from .koopman import (eig_residual, estimate_pf, invariant_heatmap, mode_decompose, pf_eig1,
                      predict_similarity)
from .module import r_adj, r_matvec
from .pca import PcaConfig, fit_pca_gd, fit_pca_trace, flat_gram, reconstruction_error

COMMANDS = ("selftest", "pca-functional", "pca-trace", "koopman", "interaction", "mmd", "quantum-check")

# descent and flattening are judged over f(c_0) .. f(c_10)
DESCENT_TOL = 1e-9

DEFAULTS = {
    "selftest": {"trials": 100},
    "pca-functional": {
        "samples_per_class": 20, "grid_points": 11, "noise_sd": 0.3, "order": 10, "r": 1,
        "lam": 0.1, "eta": 0.01, "max_iters": 100, "gram_scaling": "operator_norm", "descent_steps": 10,
    },
    "pca-trace": {"m": 2, "n": 5, "trials": 20, "r": 2},
    "koopman": {
        "period": 3, "length": 13, "degree": 3, "order": 5, "gamma": 1.0, "epsilon": None,
        "lam": 0.01, "eta": "auto", "iters": 2000, "random_starts": 0, "heatmap_size": 50,
        "scalar_periods": [2, 3], "scalar_length": 7,
    },
    "interaction": {
        "n": 30, "alphas": [3.0, 0.5], "r": 3, "degree": 5, "coef_low": 0.0, "coef_high": 0.1,
        "order": 5, "gamma": 1.0, "lam": 0.5, "eta": 0.01, "max_iters": 200,
        "epsilons": [0.1, 0.01, 0.001], "target_nodes": 200, "heatmap_size": 50,
        "lower": 0.0, "upper": 0.1, "compare_r": [1, 3], "matrix_trials": 20,
    },
    "mmd": {"trials": 50},
    "quantum-check": {"ms": [2, 3, 4], "trials": 100},
}

_CHOICES = {"gram_scaling": ("none", "operator_norm")}
_RESERVED = ("command", "seed", "input")


class ConfigError(ValueError):
    def __init__(self, name, message):
        super().__init__(f"config field {name!r}: {message}")
        self.field = name


def _coerce(name, default, value):
    if name in _CHOICES:
        if value not in _CHOICES[name]:
            raise ConfigError(name, f"expected one of {_CHOICES[name]}, got {value!r}")
        return value
    if name == "eta" and isinstance(default, str):
        if value == "auto":
            return value
        return _coerce(name, 0.1, value)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(name, "expected a boolean")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
            raise ConfigError(name, "expected an integer")
        return int(value)
    if isinstance(default, float) or default is None:
        if value is None and default is None:
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float, np.integer, np.floating)):
            raise ConfigError(name, "expected a number")
        if not np.isfinite(value):
            raise ConfigError(name, "expected a finite number")
        return float(value)
    if isinstance(default, list):
        if not isinstance(value, (list, tuple)) or not value:
            raise ConfigError(name, "expected a non-empty list")
        kind = type(default[0])
        return [_coerce(name, kind(0), v) for v in value]
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(name, "expected a string")
        return value
    raise ConfigError(name, "unsupported field")


def _positive(params, names, strict=True):
    for n in names:
        v = params.get(n)
        if v is None:
            continue
        values = v if isinstance(v, list) else [v]
        for x in values:
            if isinstance(x, str):
                continue
            if (strict and x <= 0) or (not strict and x < 0):
                raise ConfigError(n, "must be positive" if strict else "must be non-negative")


_POSITIVE = ("samples_per_class", "grid_points", "order", "r", "lam", "eta", "max_iters", "descent_steps",
             "m", "n", "trials", "period", "length", "gamma", "iters", "heatmap_size", "scalar_periods",
             "scalar_length", "alphas", "target_nodes", "epsilons", "compare_r", "matrix_trials", "ms")


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    seed: int = 0
    params: dict = field(default_factory=dict)
    input: str | None = None

    @classmethod
    def from_dict(cls, obj, command=None, seed=None):
        """Validate a config mapping; ``command`` and ``seed`` override the mapping's values."""
        if not isinstance(obj, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        cmd = command if command is not None else obj.get("command")
        if cmd not in COMMANDS:
            raise ConfigError("command", f"expected one of {COMMANDS}, got {cmd!r}")
        if obj.get("command") not in (None, cmd):
            raise ConfigError("command", f"config is for {obj['command']!r}, not {cmd!r}")
        s = seed if seed is not None else obj.get("seed", 0)
        if isinstance(s, bool) or not isinstance(s, (int, np.integer)) or not 0 <= int(s) < 2 ** 64:
            raise ConfigError("seed", "expected an integer in [0, 2**64)")
        defaults = DEFAULTS[cmd]
        params = copy.deepcopy(defaults)
        for key, value in obj.items():
            if key in _RESERVED:
                continue
            if key not in defaults:
                raise ConfigError(key, f"unknown field for {cmd!r}")
            params[key] = _coerce(key, defaults[key], value)
        _positive(params, _POSITIVE)
        _positive(params, ("noise_sd", "random_starts"), strict=False)
        if params.get("epsilon") is not None and params["epsilon"] < 0:
            raise ConfigError("epsilon", "must be non-negative")
        if cmd == "koopman" and params["length"] < 2:
            raise ConfigError("length", "need at least two samples")
        if cmd == "koopman" and not 0 < params["lam"] < 1:
            raise ConfigError("lam", "must lie in (0, 1)")
        if cmd == "interaction" and params["coef_high"] < params["coef_low"]:
            raise ConfigError("coef_high", "must be at least coef_low")
        if cmd == "pca-functional" and params["grid_points"] < 2:
            raise ConfigError("grid_points", "need at least two grid points")
        if cmd == "pca-trace" and params["r"] > params["m"] * params["n"]:
            raise ConfigError("r", "must not exceed m * n")
        inp = obj.get("input")
        if inp is not None and not isinstance(inp, str):
            raise ConfigError("input", "expected a path string")
        return cls(cmd, int(s), params, inp)

    def to_dict(self):
        out = {"command": self.command, "seed": self.seed}
        out.update(self.params)
        if self.input is not None:
            out["input"] = self.input
        return out


@dataclass(frozen=True, eq=False)
class ExperimentReport:
    command: str
    seed: int
    config: dict
    results: dict
    acceptance: dict
    tables: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(bool(v) for v in self.acceptance.values())

    def summary_dict(self):
        return {"command": self.command, "seed": self.seed, "config": self.config,
                "results": self.results, "acceptance": self.acceptance, "passed": self.passed}


def _check_table(checks):
    return Table(("name", "passed", "worst", "tolerance", "trials"),
                 [(c.name, c.passed, c.worst, c.tolerance, c.trials) for c in checks])


def _check_results(checks):
    # timings are left out so that summaries are reproducible
    return {c.name: {"passed": c.passed, "worst": c.worst, "tolerance": c.tolerance, "trials": c.trials}
            for c in checks}


def _suite_report(cfg, checks):
    return ExperimentReport(cfg.command, cfg.seed, cfg.to_dict(), {"checks": _check_results(checks)},
                            {c.name: c.passed for c in checks}, {"checks": _check_table(checks)})


# data generation
def pca_functions(points):
    """``exp(10 (s - t))``, ``10 s t`` and ``cos(10 (s - t))`` on an equispaced grid."""
    g = np.linspace(0.0, 1.0, points)
    s, t = np.meshgrid(g, g, indexing="ij")
    return [np.exp(10 * (s - t)), 10 * s * t, np.cos(10 * (s - t))]


def pca_samples(rng, per_class=20, points=11, noise_sd=0.3):
    """Noisy grid samples of the three generating functions; noise hits the grid values."""
    xs, labels = [], []
    for k, f in enumerate(pca_functions(points)):
        xs.append(f[None] + noise_sd * rng.standard_normal((per_class,) + f.shape))
        labels += [k] * per_class
    return np.concatenate(xs).reshape(len(labels), -1), np.asarray(labels)


def interaction_samples(rng, n=30, degree=5, low=0.0, high=0.1):
    """Monomial coefficients ``eta[j, l]`` of ``x_i(s, t)``, i.i.d. uniform."""
    return rng.uniform(low, high, (n, degree + 1, degree + 1))


def interaction_targets(samples, alpha, nodes=200):
    """``y_i = int int x_i(s, t) ** (-alpha + alpha |s + t|) ds dt`` by Gauss-Legendre."""
    z, w = np.polynomial.legendre.leggauss(nodes)
    z, w = 0.5 * (z + 1.0), 0.5 * w
    s, t = np.meshgrid(z, z, indexing="ij")
    expo = -alpha + alpha * np.abs(s + t)
    ww = np.outer(w, w)
    return np.array([np.sum(ww * bivariate_values(x, z, z) ** expo) for x in samples])


def periodic_functional_series(rng, period=3, length=13, degree=3):
    """``x_t = base[t mod period]`` with random monomial coefficients on ``[0, 1]``."""
    base = rng.uniform(0.0, 1.0, (period, degree + 1))
    return np.stack([base[t % period] for t in range(length)])


def _grid_shape(size):
    side = int(round(np.sqrt(size)))
    return (side, side) if side * side == size else (size,)


# pipelines
def run_pca_functional(cfg):
    p = cfg.params
    rng = make_rng(cfg.seed)
    if cfg.input:
        x, labels = load_samples_csv(cfg.input)
        shape = _grid_shape(x.shape[1])
    else:
        x, labels = pca_samples(rng, p["samples_per_class"], p["grid_points"], p["noise_sd"])
        shape = (p["grid_points"], p["grid_points"])
    if min(shape) < 2:
        raise DataError("need at least two grid points per axis")
    d = AlgebraDescriptor.function(p["order"])
    spec = FunctionalMoment.on_uniform_grid(shape, d)
    g = gram(spec, x)
    iters = max(p["max_iters"], p["descent_steps"] + 1)
    pcfg = PcaConfig(r=p["r"], lam=p["lam"], eta=p["eta"], max_iters=iters, gram_scaling=p["gram_scaling"])
    model = fit_pca_gd(g, pcfg, samples=x)
    nodes, weights = d.quadrature
    f = model.objective_values(0)[:, :, 0, 0].real                    # (iterations, Q)
    steps = min(p["descent_steps"], len(f) - 1)
    increase = float(np.max(f[1:steps + 1] - f[:steps])) if steps else 0.0
    first = float(np.max(np.abs(f[1] - f[0]))) if steps else 0.0
    last = float(np.max(np.abs(f[steps] - f[steps - 1]))) if steps else 0.0
    # weights <p_j, phi(x_i)> at the nodes, exact before any refit
    grep = g.rep
    wvals = np.stack([r_adj(r_matvec(grep, c.rep))[:, :, 0, 0] for c in model.coeffs])   # (r, n, Q)
    results = {
        "n_samples": int(len(x)), "grid_shape": list(shape), "nodes": int(len(nodes)),
        "gram_scale": model.scale, "iterations": int(len(f)),
        "descent": {"steps": steps, "max_increase": increase, "tolerance": DESCENT_TOL,
                    "first_step_change": first, "last_step_change": last},
    }
    acceptance = {"descent_monotone": bool(increase <= DESCENT_TOL), "descent_flattening": bool(last < first)}
    if labels is not None:
        w0 = wvals[0].real
        diff = w0[:, None, :] - w0[None, :, :]
        dist = np.sqrt(np.einsum("q,ijq->ij", weights, diff ** 2))
        same = labels[:, None] == labels[None, :]
        off = ~np.eye(len(x), dtype=bool)
        within = float(dist[same & off].mean())
        between = float(dist[~same].mean())
        results["separation"] = {"within": within, "between": between}
        acceptance["class_separation"] = bool(within < between)
    rows_w = []
    lab = labels if labels is not None else -np.ones(len(x), dtype=int)
    for j in range(wvals.shape[0]):
        for i in range(len(x)):
            for q, tq in enumerate(nodes):
                rows_w.append((i, int(lab[i]), j, float(tq), float(wvals[j, i, q].real)))
    rows_f = [(k, float(tq), float(f[k, q])) for k in range(len(f)) for q, tq in enumerate(nodes)]
    tables = {"weights": Table(("sample_id", "label", "axis_id", "t", "value"), rows_w),
              "objective": Table(("iteration", "t", "value"), rows_f)}
    return ExperimentReport(cfg.command, cfg.seed, cfg.to_dict(), results, acceptance, tables)


def run_pca_trace(cfg):
    p = cfg.params
    rng = make_rng(cfg.seed)
    rows, worst = [], 0.0
    for t in range(p["trials"]):
        g = random_psd_matrix_gram(p["m"], p["n"], rng)
        model = fit_pca_trace(g, p["r"])
        got = float(np.trace(reconstruction_error(g, model).payload).real)
        w = np.sort(np.linalg.eigvalsh(flat_gram(g)))[::-1]
        oracle = float(np.sum(w) - np.sum(w[:p["r"]]))
        err = abs(got - oracle) / max(abs(oracle), 1.0)
        worst = max(worst, err)
        rows.append((t, got, oracle, err))
    results = {"trace_oracle": {"worst_relative_error": worst, "tolerance": 1e-8}}
    tables = {"trace_oracle": Table(("instance", "reconstruction_trace", "oracle", "relative_error"), rows)}
    return ExperimentReport(cfg.command, cfg.seed, cfg.to_dict(), results,
                            {"trace_oracle": bool(worst <= 1e-8)}, tables)


def run_koopman(cfg):
    p = cfg.params
    checks = koopman_suite(tuple(p["scalar_periods"]), p["scalar_length"], seed=cfg.seed + 5)
    rng = make_rng(cfg.seed)
    if cfg.input:
        xs = load_array(cfg.input, "series")
        if xs.ndim != 2:
            raise DataError(f"{cfg.input}: series must be a (time, coefficient) array")
    else:
        xs = periodic_functional_series(rng, p["period"], p["length"], p["degree"])
    spec = IntegralOperatorKernel(Gaussian(p["gamma"]), AlgebraDescriptor.integral_operator(p["order"]))
    model = estimate_pf(spec, xs, p["epsilon"])
    init = p["random_starts"] if p["random_starts"] else None
    vecs = pf_eig1(model, p["lam"], p["eta"], p["iters"], init=init, seed=cfg.seed)
    dec = mode_decompose(model, vecs)
    t = model.T
    g = model.gram_full
    decomp = max((dec.invariant_term + dec.residual_fn(a, b) - g[a, b]).norm()
                 for a in range(t + 1) for b in range(t + 1))
    pred = max((predict_similarity(model, a, b) - g[a, b]).norm() for a in range(t + 1) for b in range(t + 1))
    residuals = [float(eig_residual(model, v)) for v in vecs]
    results = {
        "scalar_checks": _check_results(checks),
        "functional": {"T": t, "epsilon": model.epsilon, "kept": [bool(k) for k in model.qr.kept],
                       "eigvecs_found": len(vecs), "eig_residuals": residuals,
                       "invariant_norm": dec.invariant_term.norm(), "decomposition_error": decomp,
                       "prediction_error": pred},
    }
    acceptance = {c.name: c.passed for c in checks}
    heat = invariant_heatmap(dec, p["heatmap_size"])
    tables = {"checks": _check_table(checks),
              "invariant_heatmap": Table(("s", "t", "value"), heat),
              "eig_residuals": Table(("index", "residual"), [(i, r) for i, r in enumerate(residuals)])}
    return ExperimentReport(cfg.command, cfg.seed, cfg.to_dict(), results, acceptance, tables)


def _alpha_label(alpha):
    return f"{alpha:g}".replace("-", "m")


def run_interaction(cfg):
    p = cfg.params
    rng = make_rng(cfg.seed)
    if cfg.input:
        x = load_array(cfg.input, "samples")
        if x.ndim != 3 or x.shape[1] != x.shape[2]:
            raise DataError(f"{cfg.input}: samples must be (n, K, K) coefficient arrays")
        if np.any(x < 0):
            raise DataError(f"{cfg.input}: coefficients must be non-negative")
    else:
        x = interaction_samples(rng, p["n"], p["degree"], p["coef_low"], p["coef_high"])
    d = AlgebraDescriptor.integral_operator(p["order"])
    fm = functional_measure_gram(x, Gaussian(p["gamma"]), d)
    pcfg = PcaConfig(lam=p["lam"], eta=p["eta"], max_iters=p["max_iters"], gram_scaling="operator_norm")
    per_alpha, tables, nu_means, target_rows = {}, {}, {}, []
    bound_ok = True
    for alpha in p["alphas"]:
        y = interaction_targets(x, alpha, p["target_nodes"])
        target_rows += [(i, alpha, float(v)) for i, v in enumerate(y)]
        est = interaction_fit(fm, y, p["r"], pcfg)
        au = abs_u(est)
        bounds = {f"{eps:g}": (au - interaction_max(est, eps)[1]).norm() for eps in p["epsilons"]}
        bound_ok &= all(v <= eps for v, eps in zip(bounds.values(), p["epsilons"]))
        v_exact, imp_exact = interaction_max_exact(est)
        grid, nu = nu_kernel(est, v_exact, p["lower"], p["upper"], p["heatmap_size"])
        nu_means[alpha] = float(np.mean(np.abs(nu.real)))
        errors = {str(r): estimation_error(interaction_fit(fm, y, r, pcfg), x, y) for r in p["compare_r"]}
        per_alpha[_alpha_label(alpha)] = {
            "abs_u_norm": au.norm(), "impact_error": bounds, "exact_impact_error": (au - imp_exact).norm(),
            "nu_mean_abs": nu_means[alpha], "estimation_error": errors,
        }
        s, t = np.meshgrid(grid, grid, indexing="ij")
        tables[f"nu_kernel_alpha_{_alpha_label(alpha)}"] = Table(
            ("s", "t", "value"), np.column_stack([s.ravel(), t.ravel(), nu.real.ravel()]))
    checks = impact_suite(trials=p["matrix_trials"], seed=cfg.seed + 8, epsilons=tuple(p["epsilons"]))
    hi, lo = max(p["alphas"]), min(p["alphas"])
    results = {"n": int(len(x)), "alphas": per_alpha, "matrix_checks": _check_results(checks),
               "nu_ordering": {"high_alpha": hi, "low_alpha": lo,
                               "high_mean_abs": nu_means[hi], "low_mean_abs": nu_means[lo]}}
    acceptance = {"impact_bound": bool(bound_ok)}
    acceptance.update({c.name: c.passed for c in checks})
    if hi != lo:
        acceptance["nu_ordering"] = bool(nu_means[hi] > nu_means[lo])
    tables["targets"] = Table(("sample_id", "alpha", "y"), target_rows)
    tables["checks"] = _check_table(checks)
    return ExperimentReport(cfg.command, cfg.seed, cfg.to_dict(), results, acceptance, tables)


def run_experiment(cfg):
    """Run the pipeline selected by ``cfg.command``."""
    if cfg.command == "selftest":
        return _suite_report(cfg, selftest(cfg.seed, cfg.params["trials"]))
    if cfg.command == "mmd":
        return _suite_report(cfg, kme_suite(cfg.params["trials"], seed=cfg.seed))
    if cfg.command == "quantum-check":
        return _suite_report(cfg, quantum_suite(cfg.params["trials"], tuple(cfg.params["ms"]), seed=cfg.seed))
    runners = {"pca-functional": run_pca_functional, "pca-trace": run_pca_trace, "koopman": run_koopman,
               "interaction": run_interaction}
    return runners[cfg.command](cfg)
