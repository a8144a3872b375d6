"""Batch front end.

    hodecoherence --config run.json [--out-dir DIR] [--threads N] [--verbose]

The config is a JSON document with keys ``command``, ``system``, ``bath``,
``output`` and optionally ``units``, ``params``, ``seed`` and ``sweep``.
Each run writes ``<name>.csv`` plus a ``<name>.json`` sidecar that echoes
the fully resolved config; the sidecar is itself accepted as ``--config``.

Exit status: 0 success, 1 config/schema error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
import warnings
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, List, Tuple

import jsonschema
import numpy as np

from . import __version__
from . import bath as bk
from . import histories as hs
from . import influence as inf
from . import master_eq as me
from . import validation as val
from .errors import DecoherenceError
from .oscillator import (
    DensityMatrix,
    GridSpec,
    GridWavefunction,
    OscillatorSystem,
    StateVector,
    UnitSystem,
    cat_state,
    coherent_state,
)

log = logging.getLogger("hodecoherence")

COMMANDS = ("kernel", "influence", "tdec", "evolve", "energyloss", "histories", "hjcheck", "oracle")

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_posint = {"type": "integer", "minimum": 1}


def _obj(props: Dict[str, Any], required=()) -> Dict[str, Any]:
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


_initial = _obj({
    "kind": {"enum": ["cat", "coherent", "fock"]},
    "alpha": _num,
    "n": {"type": "integer", "minimum": 0},
}, ["kind"])

PARAM_SCHEMAS: Dict[str, Dict[str, Any]] = {
    "kernel": _obj({"tau_min": _num, "tau_max": _num, "n_tau": {"type": "integer", "minimum": 2},
                    "quadrature_check": {"type": "boolean"}}),
    "influence": _obj({
        "t_final": _pos,
        "n_steps": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
        "path": _obj({"kind": {"enum": ["constant", "random", "cosine"]}, "separation": _num,
                      "amplitude": _num, "n_modes": _posint}, ["kind"]),
    }),
    "tdec": _obj({
        "delta_x": _pos,
        "temperatures": {"type": "array", "items": _pos},
        "optical": _obj({"n_photons": {"type": "array", "items": {"type": "number", "minimum": 1}},
                         "gain": _pos, "light_speed": _pos}),
    }),
    "evolve": _obj({"initial": _initial, "t_final": _pos, "n_samples": _posint,
                    "rel_tol": _pos, "abs_tol": _pos}),
    "energyloss": _obj({"initial": _initial, "t": _pos, "rel_tol": _pos, "abs_tol": _pos}),
    "histories": _obj({
        "construction": {"enum": ["random", "commuting", "complementary"]},
        "system_dim": {"type": "integer", "minimum": 2},
        "env_dim": _posint,
        "times": {"type": "array", "items": _nonneg, "minItems": 1},
        "epsilon": _pos,
    }),
    "hjcheck": _obj({
        "state": {"enum": ["ground", "plane_wave", "random"]},
        "convention": {"enum": list(val.CONVENTIONS)},
        "x_min": _num, "x_max": _num, "n_points": {"type": "integer", "minimum": 16},
        "dt": _pos, "k": _num,
    }),
    "oracle": _obj({
        "n_modes": _posint, "local_dim": {"type": "integer", "minimum": 2},
        "coupling_scale": _nonneg, "t_final": _pos, "n_samples": _posint,
        "levels": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
    }),
}

PARAM_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "kernel": {"tau_min": -5.0, "tau_max": 5.0, "n_tau": 51, "quadrature_check": True},
    "influence": {"t_final": 1.0, "n_steps": [1024, 2048, 4096],
                  "path": {"kind": "constant", "separation": 1.0}},
    "tdec": {"delta_x": 1.0, "temperatures": [1.0],
             "optical": {"n_photons": [1, 10, 100], "gain": 1.0, "light_speed": inf.SPEED_OF_LIGHT_CM}},
    "evolve": {"initial": {"kind": "cat", "alpha": 1.0}, "t_final": 10.0, "n_samples": 101,
               "rel_tol": 1e-9, "abs_tol": 1e-11},
    "energyloss": {"initial": {"kind": "fock", "n": 0}, "t": 1.0, "rel_tol": 1e-9, "abs_tol": 1e-11},
    "histories": {"construction": "random", "system_dim": 3, "env_dim": 2, "times": [0.5, 1.0],
                  "epsilon": 0.1},
    "hjcheck": {"state": "ground", "convention": "standard_madelung", "x_min": -8.0, "x_max": 8.0,
                "n_points": 2048, "dt": 1e-3, "k": 3.0},
    "oracle": {"n_modes": 4, "local_dim": 3, "coupling_scale": 1.0, "t_final": math.pi / 2,
               "n_samples": 26, "levels": [0, 3]},
}

CONFIG_SCHEMA: Dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    **_obj({
        "command": {"enum": list(COMMANDS)},
        "system": _obj({"mass": _pos, "omega": _pos, "dim": {"type": "integer", "minimum": 2}}),
        "bath": _obj({"eta": _nonneg, "omega_cut": _pos, "temperature": _nonneg}),
        "units": _obj({"hbar": _pos, "boltzmann": _pos}),
        "output": _obj({"name": {"type": "string", "pattern": r"^[A-Za-z0-9_.\-]+$"},
                        "dir": {"type": "string"}}, ["name"]),
        "params": {"type": "object"},
        "seed": {"type": "integer", "minimum": 0},
        "sweep": _obj({"path": {"type": "string", "pattern": r"^(system|bath|units|params)\.[A-Za-z_.]+$"},
                       "values": {"type": "array", "minItems": 1}}, ["path", "values"]),
    }, ["command", "system", "bath", "output"]),
}

DESIGN_DECISIONS = {
    **inf.CONVENTIONS,
    "w_imag_vs_asymptotic": "reported as ratio; no coefficient asserted",
    "master_equation_unitary_term": "-i omega_nm rho_nm with omega_nm = (E_n - E_m)/hbar",
    "first_order_interval": "finite interval t replaces the divergent infinite time integral",
    "heisenberg_projector": "exp(iHt/hbar) P exp(-iHt/hbar)",
    "kernel_coth_argument": "hbar omega / 2 k_B T",
    "energy_sign": "delta_e = E(t) - E(0)",
}


class ConfigError(Exception):
    pass


def _merge(defaults: Dict[str, Any], given: Dict[str, Any]) -> Dict[str, Any]:
    out = copy.deepcopy(defaults)
    for k, v in given.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k not in ("path", "initial"):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def load_config(path: str) -> Dict[str, Any]:
    """Read, unwrap (if a sidecar), validate and default-fill a config file."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    if isinstance(doc, dict) and "resolved_config" in doc:
        doc = doc["resolved_config"]
    return resolve_config(doc)


def resolve_config(doc: Any) -> Dict[str, Any]:
    try:
        jsonschema.validate(doc, CONFIG_SCHEMA)
        cmd = doc["command"]
        params = doc.get("params", {})
        jsonschema.validate(params, PARAM_SCHEMAS[cmd])
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"schema error at {'/'.join(map(str, exc.absolute_path)) or '<root>'}: {exc.message}")
    cfg = {
        "command": cmd,
        "system": _merge({"mass": 1.0, "omega": 1.0, "dim": 32}, doc["system"]),
        "bath": _merge({"eta": 1.0, "omega_cut": 10.0, "temperature": 0.0}, doc["bath"]),
        "units": _merge({"hbar": 1.0, "boltzmann": 1.0}, doc.get("units", {})),
        "output": _merge({"dir": "."}, doc["output"]),
        "params": _merge(PARAM_DEFAULTS[cmd], params),
        "seed": doc.get("seed", 0),
    }
    if "sweep" in doc:
        cfg["sweep"] = copy.deepcopy(doc["sweep"])
        for v in cfg["sweep"]["values"]:
            try:
                resolve_config(_set_path(_without_sweep(cfg), cfg["sweep"]["path"], v))
            except ConfigError as exc:
                raise ConfigError(f"sweep value {v!r}: {exc}")
    return cfg


def _without_sweep(cfg: Dict[str, Any]) -> Dict[str, Any]:
    return {k: copy.deepcopy(v) for k, v in cfg.items() if k != "sweep"}


def _set_path(cfg: Dict[str, Any], dotted: str, value: Any) -> Dict[str, Any]:
    out = copy.deepcopy(cfg)
    keys = dotted.split(".")
    node = out
    for k in keys[:-1]:
        node = node.setdefault(k, {})
    node[keys[-1]] = value
    return out


# -- command implementations: each returns (columns, rows, results) ----------

Rows = List[List[Any]]


def _objects(cfg):
    s, b, u = cfg["system"], cfg["bath"], cfg["units"]
    return (OscillatorSystem(s["mass"], s["omega"], s["dim"]),
            bk.BathSpec(b["eta"], b["omega_cut"], b["temperature"]),
            UnitSystem(u["hbar"], u["boltzmann"]))


def _initial_state(spec: Dict[str, Any], dim: int) -> StateVector:
    kind = spec["kind"]
    if kind == "fock":
        n = spec.get("n", 0)
        if n >= dim:
            raise DecoherenceError(f"Fock level {n} outside dim {dim}")
        return StateVector.basis(dim, n)
    alpha = spec.get("alpha", 1.0)
    return cat_state(alpha, dim) if kind == "cat" else coherent_state(alpha, dim)


def run_kernel(cfg) -> Tuple[List[str], Rows, Dict[str, Any]]:
    _, bath, units = _objects(cfg)
    p = cfg["params"]
    taus = np.linspace(p["tau_min"], p["tau_max"], p["n_tau"])
    cols = ["tau", "alpha_imag", "alpha_real_zero_temp", "alpha_real"]
    if p["quadrature_check"]:
        cols += ["alpha_real_quadrature_coth_one", "closed_form_rel_error"]
    rows, worst = [], 0.0
    for tau in taus:
        zt = bk.alpha_real_zero_temp(tau, bath)
        row = [tau, bk.alpha_imag(tau, bath), zt, bk.alpha_real_finite_temp(tau, bath, units)]
        if p["quadrature_check"]:
            q = bk.alpha_real_quadrature(tau, bath, units, coth_one=True)
            rel = abs(zt - q) / abs(zt) if zt else abs(q)
            worst = max(worst, rel)
            row += [q, rel]
        rows.append(row)
    return cols, rows, {"max_closed_form_rel_error": worst} if p["quadrature_check"] else {}


def _make_paths(p, n_steps: int, seed: int) -> inf.PathPair:
    spec = p["path"]
    tf = p["t_final"]
    if spec["kind"] == "constant":
        return inf.PathPair.constant_separation(spec.get("separation", 1.0), tf, n_steps)
    if spec["kind"] == "cosine":
        a, d = spec.get("amplitude", 1.0), spec.get("separation", 1.0)
        return inf.PathPair.from_functions(lambda t: a * np.cos(t) + d / 2, lambda t: a * np.cos(t) - d / 2, tf, n_steps)
    rng = np.random.default_rng(seed)
    m = spec.get("n_modes", 3)
    amp = spec.get("amplitude", 1.0)
    cx, cy = rng.normal(size=(2, m)) * amp
    freqs = np.arange(1, m + 1) * math.pi / tf

    def smooth(c):
        return lambda t: np.sum(c[:, None] * np.cos(freqs[:, None] * t[None, :]), axis=0)

    return inf.PathPair.from_functions(smooth(cx), smooth(cy), tf, n_steps)


def run_influence(cfg):
    system, bath, units = _objects(cfg)
    p = cfg["params"]
    cols = ["n_steps", "w_imag_discrete", "w_imag_asymptotic", "w_imag_over_hbar", "ratio_discrete_to_asymptotic",
            "influence_phase_re", "influence_phase_im"]
    rows = []
    for n in p["n_steps"]:
        paths = _make_paths(p, n, cfg["seed"])
        w = inf.influence_phase(paths, bath, units)
        if bath.temperature == 0:
            disc = inf.w_imag_discrete(paths, bath)
            asym = inf.w_imag_asymptotic(paths, bath, units)
            ratio = disc / asym.w_imag if asym.w_imag else math.nan
            rows.append([n, disc, asym.w_imag, asym.exponent, ratio, w.real, w.imag])
        else:
            rows.append([n, math.nan, math.nan, math.nan, math.nan, w.real, w.imag])
    return cols, rows, {}


def run_tdec(cfg):
    _, bath, units = _objects(cfg)
    p = cfg["params"]
    cols = ["estimate", "delta_x", "temperature", "n_photons", "t_d", "ratio_to_zero_temperature"]
    dx = p["delta_x"]
    z = inf.decoherence_time_zero_temp(dx, bath, units)
    rows = [["zero_temperature", dx, 0.0, math.nan, z.t_d, 1.0]]
    for temp in p["temperatures"]:
        e = inf.decoherence_time_thermal(dx, bath.eta, temp, units, omega_cut=bath.omega_cut)
        rows.append(["high_temperature", dx, temp, math.nan, e.t_d, e.ratio_to_zero_temperature])
    o = p["optical"]
    for n in o["n_photons"]:
        t = inf.optical_estimate(inf.OpticalSpec(n, o["gain"], o["light_speed"]))
        rows.append(["optical_seconds", math.nan, math.nan, n, t, math.nan])
    return cols, rows, {}


def run_evolve(cfg):
    system, bath, units = _objects(cfg)
    p = cfg["params"]
    rho0 = _initial_state(p["initial"], system.dim).density()
    times = np.linspace(0.0, p["t_final"], p["n_samples"])
    ctrl = me.EvolutionControl(rel_tol=p["rel_tol"], abs_tol=p["abs_tol"])
    traj = me.evolve(rho0, system, bath, p["t_final"], ctrl, units, times)
    energies = system.energies(units)
    pops = traj.populations()
    cols = ["t", "trace", "purity", "energy", "coherence_l1"] + [f"pop_{n}" for n in range(system.dim)]
    rows = []
    for k, t in enumerate(times):
        r = traj.states[k]
        l1 = float(np.abs(r).sum() - np.abs(np.diag(r)).sum())
        rows.append([t, float(np.real(np.trace(r))), float(traj.purities()[k]), float(pops[k] @ energies), l1,
                     *pops[k]])
    return cols, rows, {"steps_accepted": traj.n_accepted, "steps_rejected": traj.n_rejected}


def run_energyloss(cfg):
    system, bath, units = _objects(cfg)
    p = cfg["params"]
    rho0 = _initial_state(p["initial"], system.dim).density()
    first = me.delta_rho_first_order(rho0, system, bath, p["t"], units)
    ctrl = me.EvolutionControl(rel_tol=p["rel_tol"], abs_tol=p["abs_tol"])
    full = me.energy_change_full(me.evolve(rho0, system, bath, p["t"], ctrl, units), system, units)
    cols = ["order", "elapsed", "delta_e"] + [f"delta_rho_{n}" for n in range(system.dim)]
    rows = [[r.order, r.elapsed, r.delta_e, *r.delta_rho_diag] for r in (first, full)]
    return cols, rows, {"dephasing_rate_times_t": bath.dephasing_rate * p["t"] / units.hbar}


def _random_unitary(rng, d):
    z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def histories_setup(p, seed: int):
    """Build (times, families, rho0, H) for the ``histories`` command."""
    rng = np.random.default_rng(seed)
    construction = p["construction"]
    times = p["times"]
    if construction == "complementary":
        plus = np.array([1, 1]) / math.sqrt(2)
        minus = np.array([1, -1]) / math.sqrt(2)
        z = hs.basis_family(np.eye(2))
        x = hs.basis_family(np.column_stack([plus, minus]))
        rho0 = StateVector(plus.astype(complex)).density()
        fams = [z, x] + [x] * (len(times) - 2)
        return times, fams, rho0, np.zeros((2, 2), dtype=complex)
    ds, de = p["system_dim"], p["env_dim"]
    dim = ds * de
    if construction == "commuting":
        h = np.diag(rng.normal(size=dim)).astype(complex)
        w = rng.uniform(size=dim)
        rho0 = _density(np.diag(w / w.sum()))
        fams = [hs.basis_family(np.eye(ds), de)] * len(times)
        return times, fams, rho0, h
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    h = 0.5 * (a + a.conj().T)
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    r = g @ g.conj().T
    rho0 = _density(r / np.trace(r))
    fams = [hs.basis_family(_random_unitary(rng, ds), de) for _ in times]
    return times, fams, rho0, h


def _density(m) -> DensityMatrix:
    return DensityMatrix(0.5 * (m + m.conj().T))


def run_histories(cfg):
    _, _, units = _objects(cfg)
    p = cfg["params"]
    times, fams, rho0, h = histories_setup(p, cfg["seed"])
    d, labels = hs.decoherence_matrix(times, fams, rho0, h, units)
    cls = hs.classify_decoherent(d, p["epsilon"])
    cols = ["history_a", "history_b", "re", "im", "abs"]
    rows = []
    for a, la in enumerate(labels):
        for b, lb in enumerate(labels):
            rows.append(["-".join(map(str, la)), "-".join(map(str, lb)), d[a, b].real, d[a, b].imag, abs(d[a, b])])
    return cols, rows, {
        "decoherent": cls.decoherent,
        "max_off_diagonal": cls.max_off_diagonal,
        "max_relative_off_diagonal": cls.max_relative,
        "diagonal_sum": float(np.real(np.trace(d))),
    }


def run_hjcheck(cfg):
    system, _, units = _objects(cfg)
    p = cfg["params"]
    g = GridSpec(p["x_min"], p["x_max"], p["n_points"])
    x = g.x
    dt = p["dt"]
    m, w, hbar = system.mass, system.omega, units.hbar
    if p["state"] == "ground":
        ell = system.length_scale(units)
        base = (math.pi * ell**2) ** -0.25 * np.exp(-0.5 * (x / ell) ** 2)
        slices = [GridWavefunction(g, base * np.exp(-0.5j * w * t)) for t in (0.0, dt)]
        potential = lambda xx: 0.5 * m * w**2 * xx**2  # noqa: E731
    elif p["state"] == "plane_wave":
        k = p["k"]
        slices = [GridWavefunction(g, np.exp(1j * (k * x - hbar * k * k * t / (2 * m)))) for t in (0.0, dt)]
        potential = lambda xx: np.zeros_like(xx)  # noqa: E731
    else:
        rng = np.random.default_rng(cfg["seed"])
        v = sum(rng.normal() * np.exp(-(x - rng.uniform(-2, 2)) ** 2 / rng.uniform(0.5, 2) + 1j * rng.normal() * x)
                for _ in range(4))
        wf = GridWavefunction(g, v).normalize()
        slices = [wf, wf]
        potential = lambda xx: np.zeros_like(xx)  # noqa: E731
    rep = val.hamilton_jacobi_residual(slices, dt, potential, units, m, p["convention"])
    rows = [[x[i], rep.lhs[i], rep.rhs[i], rep.residual[i]] for i in np.nonzero(rep.interior)[0]]
    return ["x", "lhs", "rhs", "residual"], rows, {"max_abs_residual": rep.max_abs}


def run_oracle(cfg):
    system, bath, units = _objects(cfg)
    p = cfg["params"]
    amps = np.zeros(system.dim, dtype=complex)
    for n in p["levels"]:
        if n >= system.dim:
            raise DecoherenceError(f"level {n} outside dim {system.dim}")
        amps[n] = 1.0
    psi_s = StateVector.normalized(amps).amplitudes
    modes = val.ohmic_modes(bath, p["n_modes"], p["local_dim"], units, p["coupling_scale"])
    times = np.linspace(0.0, p["t_final"], p["n_samples"])
    res = val.exact_system_bath(system, modes, val.product_state(psi_s, modes), times, units)
    lo, hi = min(p["levels"]), max(p["levels"])
    rows = [[t, res.purity[k], abs(res.reduced[k, lo, hi]), res.norm[k]] for k, t in enumerate(times)]
    return ["t", "purity", "coherence", "norm"], rows, {"joint_dim": system.dim * modes.total_dim}


RUNNERS = {
    "kernel": run_kernel, "influence": run_influence, "tdec": run_tdec, "evolve": run_evolve,
    "energyloss": run_energyloss, "histories": run_histories, "hjcheck": run_hjcheck, "oracle": run_oracle,
}


# -- output ----------------------------------------------------------------


def format_value(v: Any) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".16e")
    return str(v)


def render_csv(columns: List[str], rows: Rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([format_value(v) for v in r])
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    return v


def _atomic_write(path: str, text: str):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def execute(cfg: Dict[str, Any], out_dir: str, threads: int = 1) -> Tuple[str, str]:
    """Run a resolved config and write CSV + sidecar.  Returns both paths."""
    os.makedirs(out_dir, exist_ok=True)
    stem = cfg["output"]["name"]
    csv_path = os.path.join(out_dir, stem + ".csv")
    meta_path = os.path.join(out_dir, stem + ".json")
    runner = RUNNERS[cfg["command"]]

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if "sweep" not in cfg:
            columns, rows, results = runner(cfg)
            text = render_csv(columns, rows)
        else:
            columns, text, results = _run_sweep(cfg, runner, out_dir, stem, threads)
    for w in caught:
        log.warning("%s", w.message)

    meta = {
        "package_version": __version__,
        "command": cfg["command"],
        "columns": columns,
        "resolved_config": cfg,
        "design_decisions": DESIGN_DECISIONS,
        "results": _jsonable(results),
        "warnings": sorted({str(w.message) for w in caught}),
    }
    _atomic_write(csv_path, text)
    _atomic_write(meta_path, json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return csv_path, meta_path


def _run_sweep(cfg, runner, out_dir, stem, threads):
    sweep = cfg["sweep"]
    base = _without_sweep(cfg)
    jobs = [(k, v, _set_path(base, sweep["path"], v)) for k, v in enumerate(sweep["values"])]
    part_paths = [os.path.join(out_dir, f".{stem}.part{k}.csv") for k, _, _ in jobs]

    def work(job):
        k, value, sub = job
        columns, rows, results = runner(sub)
        _atomic_write(part_paths[k], render_csv(["sweep_value"] + columns, [[value] + r for r in rows]))
        return columns, results

    try:
        with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
            outcomes = list(pool.map(work, jobs))
        headers = {tuple(c) for c, _ in outcomes}
        if len(headers) != 1:
            raise DecoherenceError("sweep values produced different column sets")
        pieces = []
        for k, path in enumerate(part_paths):
            with open(path) as fh:
                lines = fh.read().splitlines(keepends=True)
            pieces.extend(lines if k == 0 else lines[1:])
    finally:
        for path in part_paths:
            if os.path.exists(path):
                os.remove(path)
    columns = ["sweep_value"] + list(outcomes[0][0])
    results = {"sweep": [{"value": v, **r} for (_, v, _), (_, r) in zip(jobs, outcomes)]}
    return columns, "".join(pieces), results


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hodecoherence", description=__doc__.split("\n\n")[0])
    ap.add_argument("--config", required=True, help="JSON config (or a previous run's sidecar)")
    ap.add_argument("--out-dir", default=None, help="output directory (overrides output.dir)")
    ap.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
    ap.add_argument("--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"hodecoherence: {exc}", file=sys.stderr)
        return 1
    out_dir = args.out_dir or cfg["output"]["dir"]
    log.info("running %s -> %s", cfg["command"], out_dir)
    try:
        csv_path, meta_path = execute(cfg, out_dir, args.threads)
    except (DecoherenceError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"hodecoherence: numerical failure in {cfg['command']}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    log.info("wrote %s and %s", csv_path, meta_path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
