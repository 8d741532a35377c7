"""Experiment runner: wires JSON configs to the library, manages seeds and
parallel trials, and emits machine-readable reports and CSV data.

Exit codes: 0 = all checks passed, 1 = a check failed, 2 = config/schema
error, 3 = numeric failure during the run.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import profile as profile_mod
from .ensemble import Deformation, EnsembleError, make_entry_law
from .fluctuation import (
    FluctuationError,
    collect_fluctuations,
    compare_distributions,
    laplace_check,
    sample_Z_batch,
)
from .parallel import run_trials
from .profile import ProfileError, compute_limit_params
from .spectral import (
    SpectralError,
    outlier_limit,
    run_bbp_experiment,
    verify_spectral_measure,
)
from .wick import (
    WickError,
    binom_identity_check,
    catalan_tree_count,
    connected_cumulants,
    cumulants_to_moments,
    dominating_sum,
    exact_moment_oracle,
    oracle_expansion_check,
)

EXPERIMENTS = {
    # name -> (one-line description, claim checked)
    "bbp_lln": ("extreme-eigenvalue location law vs a + 1/a prediction", "Theorem 1.2"),
    "fluctuation_ks": ("scaled outlier sample vs limiting-matrix sample (KS)", "Theorem 1.3"),
    "spectral_measure": ("moments of the spike-vector spectral measure", "Theorem 1.5"),
    "laplace": ("long-power trace limit vs exponential trace of Z", "Theorem 1.7"),
    "identities": ("exact tree-count/binomial/cumulant identities", "Prop 2.6 toolkit"),
    "diagram_suite": ("exhaustive small-diagram graph lemmas", "Lemmas 2.10/2.11"),
    "oracle_crosscheck": ("diagram expansion vs brute-force moment oracle", "Prop 2.5"),
}

_PROFILE_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["uniform", "band", "dregular", "chiral", "custom"]},
        "n": {"type": "integer", "minimum": 1},
        "L": {"type": "integer", "minimum": 1},
        "d": {"type": "integer", "minimum": 1},
        "bandwidth": {"type": "number", "exclusiveMinimum": 0},
        "kernel": {"enum": ["gaussian", "flat", "grid"]},
        "psi_rows": {"type": "array"},
        "phi_rows": {"type": "array"},
        "sigma_rows": {"type": "array"},
    },
    "required": ["kind"],
    "additionalProperties": False,
}

_DEFORMATION_SCHEMA = {
    "type": "object",
    "properties": {
        "positions": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "a_tilde": {"type": "array"},
    },
    "required": ["positions", "a_tilde"],
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "experiment": {"enum": sorted(EXPERIMENTS)},
        "profile": _PROFILE_SCHEMA,
        "entry_law": {"enum": ["gaussian", "rademacher", "uniform_symmetric"]},
        "beta": {"enum": [1, 2]},
        "deformation": {"oneOf": [_DEFORMATION_SCHEMA, {"type": "null"}]},
        "trials": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "j_max": {"type": "integer", "minimum": 1},
        "m_max": {"type": "integer", "minimum": 0, "maximum": 30},
        "t_list": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
        "a_index": {"type": "integer", "minimum": 0},
        "tolerances": {"type": "object"},
        "k_budget": {"type": "integer", "minimum": 1, "maximum": 10},
        "faces": {"type": "integer", "minimum": 1, "maximum": 3},
    },
    "required": ["experiment", "seed"],
    "additionalProperties": False,
}


class ConfigError(ValueError):
    pass


def validate_config(doc: dict) -> None:
    import jsonschema

    try:
        jsonschema.validate(doc, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config rejected: {exc.message}") from exc


def build_profile(spec: dict):
    kind = spec["kind"]
    if kind == "uniform":
        return profile_mod.build_uniform_profile(spec["n"])
    if kind == "band":
        kernels = {
            "gaussian": profile_mod.gaussian_kernel,
            "flat": profile_mod.flat_kernel,
            "grid": profile_mod.grid_kernel,
        }
        return profile_mod.build_band_profile(
            spec["L"], spec["d"], spec["bandwidth"], kernels[spec["kernel"]]()
        )
    if kind == "dregular":
        psi = np.asarray(spec["psi_rows"])
        return profile_mod.build_dregular_profile(psi.shape[0], psi)
    if kind == "chiral":
        return profile_mod.build_chiral_profile(np.asarray(spec["phi_rows"]))
    if kind == "custom":
        return profile_mod.build_custom_profile(np.asarray(spec["sigma_rows"]))
    raise ConfigError(f"unknown profile kind {kind!r}")


def build_deformation(spec: dict | None) -> Deformation | None:
    if spec is None:
        return None
    return Deformation(
        positions=tuple(spec["positions"]), a_tilde=np.asarray(spec["a_tilde"], dtype=float)
    )


def config_hash(doc: dict) -> str:
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) if isinstance(v, float) else v for v in row])


# ---------------------------------------------------------------------------
# Experiment implementations: each returns (checks, csv_files) where checks
# is a list of {name, measured, expected, tolerance, pass}.
# ---------------------------------------------------------------------------


def _tol(cfg: dict, key: str, default: float) -> float:
    return float(cfg.get("tolerances", {}).get(key, default))


def _exp_bbp_lln(cfg: dict, workers: int | None):
    prof = build_profile(cfg["profile"])
    law = make_entry_law(cfg.get("entry_law", "gaussian"), cfg.get("beta", 1))
    defo = build_deformation(cfg.get("deformation"))
    tol = _tol(cfg, "mean_abs_err", 0.05)
    warn: list[str] = []
    rows = run_bbp_experiment(
        prof, law, cfg.get("beta", 1), defo, cfg["trials"], cfg["seed"],
        j_max=cfg.get("j_max", 1), workers=workers, warn=warn,
    )
    checks = [
        {
            "name": f"lambda[{r.index}] vs {r.prediction:.6g}",
            "measured": r.mean,
            "expected": r.prediction,
            "tolerance": tol,
            "pass": r.abs_err <= tol,
        }
        for r in rows
    ]
    csv_rows = [
        [r.index, "" if r.a is None else r.a, r.prediction, r.mean, r.stderr, r.abs_err, r.abs_err <= tol]
        for r in rows
    ]
    files = {"bbp_lln.csv": (["index", "a", "prediction", "mean", "stderr", "abs_err", "pass"], csv_rows)}
    return checks, files, warn


def _exp_fluctuation_ks(cfg: dict, workers: int | None):
    prof = build_profile(cfg["profile"])
    beta = cfg.get("beta", 1)
    law = make_entry_law(cfg.get("entry_law", "gaussian"), beta)
    defo = build_deformation(cfg.get("deformation"))
    if defo is None:
        raise ConfigError("fluctuation_ks requires a deformation")
    a = float(defo.eigenvalues[0])
    q = int(np.sum(np.isclose(defo.eigenvalues, a)))
    params = compute_limit_params(
        prof, list(defo.positions), a, law, beta, u=defo.eigvecs, q=q
    )
    warn: list[str] = []
    samples = collect_fluctuations(
        prof, law, beta, defo, cfg["trials"], cfg["seed"], j_range=tuple(range(1, q + 1)),
        workers=workers, warn=warn,
    )
    scaled = np.array([s.scaled for s in samples if s.j == 1])
    zdraws = sample_Z_batch(params, law, cfg["trials"], cfg["seed"] + 1)[:, 0]
    threshold = _tol(cfg, "ks_threshold", 0.08)
    ks = compare_distributions(scaled, zdraws, threshold)
    checks = [
        {
            "name": "two-sample KS scaled outlier vs Z",
            "measured": ks["ks_stat"],
            "expected": 0.0,
            "tolerance": threshold,
            "pass": ks["pass"],
        }
    ]
    csv_rows = [[i, s.j, s.lam, s.scaled] for i, s in enumerate(samples)]
    files = {
        "fluctuation_ks.csv": (["trial", "j", "lambda", "scaled"], csv_rows),
        "z_draws.csv": (["draw", "z"], [[i, float(z)] for i, z in enumerate(zdraws)]),
    }
    return checks, files, warn


def _exp_spectral_measure(cfg: dict, workers: int | None):
    prof = build_profile(cfg["profile"])
    beta = cfg.get("beta", 1)
    law = make_entry_law(cfg.get("entry_law", "gaussian"), beta)
    defo = build_deformation(cfg.get("deformation"))
    if defo is None:
        raise ConfigError("spectral_measure requires a deformation")
    tol = _tol(cfg, "moment_scaled_err", 0.05)
    res = verify_spectral_measure(
        prof, law, beta, defo, cfg.get("a_index", 0), cfg["trials"], cfg["seed"],
        m_max=cfg.get("m_max", 10), workers=workers,
    )
    checks = [
        {
            "name": f"moment m={row['m']}",
            "measured": row["empirical"],
            "expected": row["exact"],
            "tolerance": tol * res["rho"] ** row["m"],
            "pass": row["scaled_err"] <= tol,
        }
        for row in res["rows"]
    ]
    csv_rows = [
        [row["m"], row["empirical"], row["stderr"], row["exact"], row["abs_err"], row["scaled_err"]]
        for row in res["rows"]
    ]
    files = {"spectral_measure.csv": (["m", "empirical", "stderr", "exact", "abs_err", "scaled_err"], csv_rows)}
    return checks, files, []


def _exp_laplace(cfg: dict, workers: int | None):
    prof = build_profile(cfg["profile"])
    beta = cfg.get("beta", 1)
    law = make_entry_law(cfg.get("entry_law", "gaussian"), beta)
    defo = build_deformation(cfg.get("deformation"))
    if defo is None:
        raise ConfigError("laplace requires a deformation")
    a = float(defo.eigenvalues[0])
    q = int(np.sum(np.isclose(defo.eigenvalues, a)))
    params = compute_limit_params(prof, list(defo.positions), a, law, beta, u=defo.eigvecs, q=q)
    res = laplace_check(
        prof, law, beta, defo, params, tuple(cfg.get("t_list", [1.0])),
        cfg["trials"], cfg["seed"], workers=workers,
    )
    nsig = _tol(cfg, "sigma_band", 4.0)
    ok = abs(res["diff"]) <= nsig * res["combined_stderr"]
    checks = [
        {
            "name": f"trace limit lhs vs rhs (k={res['k_list']})",
            "measured": res["lhs"],
            "expected": res["rhs"],
            "tolerance": nsig * res["combined_stderr"],
            "pass": ok,
        }
    ]
    files = {
        "laplace.csv": (
            ["side", "mean", "stderr"],
            [["lhs", res["lhs"], res["lhs_stderr"]], ["rhs", res["rhs"], res["rhs_stderr"]]],
        )
    }
    return checks, files, []


def _exp_identities(cfg: dict, workers: int | None):
    checks = []
    worst_tree = 0
    for k in range(1, 21):
        for n in range(1, k + 1):
            lhs, rhs = catalan_tree_count(k, n)
            worst_tree = max(worst_tree, abs(lhs - rhs))
    checks.append(
        {"name": "tree-count identity k<=20", "measured": float(worst_tree),
         "expected": 0.0, "tolerance": 0.0, "pass": worst_tree == 0}
    )
    worst_binom = 0.0
    for a in (1.0, 1.5, 2.0, 5.0):
        for k in range(0, 31):
            for n in range(k % 2, k + 1, 2):
                lhs, rhs = binom_identity_check(k, n, a)
                worst_binom = max(worst_binom, abs(lhs - rhs))
    checks.append(
        {"name": "binomial identity grid", "measured": worst_binom,
         "expected": 0.0, "tolerance": 1e-12, "pass": worst_binom <= 1e-12}
    )
    rng = np.random.default_rng(cfg["seed"])
    worst_rt = 0.0
    for _ in range(20):
        keys = [(2,), (4,), (2, 2), (2, 4), (4, 4), (2, 2, 4), (2, 4, 4), (2, 2, 2)]
        table = {k: float(rng.normal()) for k in keys}
        T = connected_cumulants(table)
        for k in keys:
            worst_rt = max(worst_rt, abs(cumulants_to_moments(T, k) - table[k]))
    checks.append(
        {"name": "cumulant inversion round-trip", "measured": worst_rt,
         "expected": 0.0, "tolerance": 1e-10, "pass": worst_rt <= 1e-10}
    )
    graph = _graph_lemma_checks(k_budget=min(cfg.get("k_budget", 6), 6), s_max=2)
    checks.extend(graph)
    return checks, {}, []


def _graph_lemma_checks(k_budget: int, s_max: int) -> list[dict]:
    from .combinatorics import classify_diagram, enumerate_small_diagrams

    bad_ineq = bad_eq13 = bad_euler = bad_equality = bad_l211 = 0
    n_diagrams = 0
    for s in range(1, s_max + 1):
        for d in enumerate_small_diagrams(k_budget, s):
            n_diagrams += 1
            cls = classify_diagram(d)
            c = cls.counts
            if c["E_b"] != c["V_b"]:
                bad_eq13 += 1
            comps = d.components()
            for comp in comps:
                if comp["chi"] != 2 - comp["g"] - comp["t"]:
                    bad_euler += 1
            if not d.point_faces():
                lhs = c["E_b"] + 3 * c["V_int"]
                rhs = 2 * c["E_int"] + c["s"]
                if lhs > rhs:
                    bad_ineq += 1
                if (lhs == rhs) != (cls.trivalent and cls.marks_distinct):
                    bad_equality += 1
            if (
                d.connected
                and cls.trivalent
                and cls.marks_distinct
                and not d.point_faces()
                and all(any(d.edges[e].kind == "boundary" for e, _ in w) for w in d.face_walks)
            ):
                comp = comps[0]
                g, t, s_ = comp["g"], comp["t"], c["s"]
                el = c["V_int"]
                if c["V"] != 2 * g + 2 * t + 3 * s_ - 4 or c["E"] != 3 * g + 3 * t + 4 * s_ - 6:
                    bad_l211 += 1
                if c["V_b"] != 2 * g + 2 * t + 3 * s_ - 4 - el or c["E_int"] != g + t + s_ + el - 2:
                    bad_l211 += 1
    return [
        {"name": f"edge-count inequality ({n_diagrams} diagrams)", "measured": float(bad_ineq),
         "expected": 0.0, "tolerance": 0.0, "pass": bad_ineq == 0},
        {"name": "boundary edge=vertex count", "measured": float(bad_eq13),
         "expected": 0.0, "tolerance": 0.0, "pass": bad_eq13 == 0},
        {"name": "Euler formula per component", "measured": float(bad_euler),
         "expected": 0.0, "tolerance": 0.0, "pass": bad_euler == 0},
        {"name": "equality cases = trivalent+distinct", "measured": float(bad_equality),
         "expected": 0.0, "tolerance": 0.0, "pass": bad_equality == 0},
        {"name": "trivalent exact counts", "measured": float(bad_l211),
         "expected": 0.0, "tolerance": 0.0, "pass": bad_l211 == 0},
    ]


def _exp_diagram_suite(cfg: dict, workers: int | None):
    checks = _graph_lemma_checks(k_budget=cfg.get("k_budget", 8), s_max=cfg.get("faces", 3))
    conv = dominating_sum(s=1, xi=1.0, a=2.0, lam=1.0, max_gt=200)
    checks.append(
        {"name": "dominating sum tail ratio", "measured": conv["tail_ratio"],
         "expected": 0.0, "tolerance": 1e-6, "pass": conv["tail_ratio"] < 1e-6}
    )
    return checks, {}, []


def _exp_oracle_crosscheck(cfg: dict, workers: int | None):
    prof_u = profile_mod.build_uniform_profile(4)
    prof_b = profile_mod.build_band_profile(4, 1, 2.0, profile_mod.flat_kernel())
    defo = Deformation(positions=(0,), a_tilde=np.array([[2.0]]))
    k_lists = [[1], [2], [3], [4], [5], [6], [1, 1], [2, 2], [3, 2], [4, 2], [3, 3], [1, 5]]
    worst = 0.0
    count = 0
    for prof in (prof_u, prof_b):
        for d in (None, defo):
            for klist in k_lists:
                res = oracle_expansion_check(prof, d, klist, a=2.0)
                worst = max(worst, res["abs_err"])
                count += 1
    checks = [
        {"name": f"diagram sum vs oracle ({count} configs)", "measured": worst,
         "expected": 0.0, "tolerance": 1e-9, "pass": worst <= 1e-9}
    ]
    return checks, {}, []


_RUNNERS = {
    "bbp_lln": _exp_bbp_lln,
    "fluctuation_ks": _exp_fluctuation_ks,
    "spectral_measure": _exp_spectral_measure,
    "laplace": _exp_laplace,
    "identities": _exp_identities,
    "diagram_suite": _exp_diagram_suite,
    "oracle_crosscheck": _exp_oracle_crosscheck,
}


def run(config_path: str, out_dir: str | None = None, threads: int | None = None,
        seed_override: int | None = None) -> int:
    """Execute one experiment config; returns the process exit code."""
    try:
        doc = json.loads(Path(config_path).read_text())
        validate_config(doc)
    except (OSError, json.JSONDecodeError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if seed_override is not None:
        doc["seed"] = seed_override
    out = Path(out_dir) if out_dir else Path(config_path).resolve().parent
    t0 = time.perf_counter()
    try:
        checks, files, warnings = _RUNNERS[doc["experiment"]](doc, threads)
    except (ProfileError, EnsembleError, SpectralError, FluctuationError, WickError, ConfigError) as exc:
        print(f"run failed (seed={doc.get('seed')}): {exc}", file=sys.stderr)
        return 3
    wall = time.perf_counter() - t0

    out.mkdir(parents=True, exist_ok=True)
    for fname, (header, rows) in files.items():
        _write_csv(out / fname, header, rows)
    overall = all(c["pass"] for c in checks)
    report = {
        "experiment": doc["experiment"],
        "config_hash": config_hash(doc),
        "seed": doc["seed"],
        "checks": checks,
        "warnings": warnings,
        "wall_time_s": round(wall, 3),
        "pass": overall,
    }
    (out / "report.json").write_text(json.dumps(report, indent=2, default=float) + "\n")
    for c in checks:
        status = "PASS" if c["pass"] else "FAIL"
        print(f"[{status}] {c['name']}: measured={c['measured']:.6g} expected={c['expected']:.6g} tol={c['tolerance']:.3g}")
    for w in warnings:
        print(f"[warn] {w}")
    print(f"report: {out / 'report.json'} ({'pass' if overall else 'FAIL'}, {wall:.1f}s)")
    return 0 if overall else 1


def list_experiments() -> str:
    """Stable-order table of experiments, descriptions, and claims checked."""
    lines = ["experiment        description                                            checks"]
    for name in sorted(EXPERIMENTS):
        desc, claim = EXPERIMENTS[name]
        lines.append(f"{name:<17} {desc:<54} {claim}")
    return "\n".join(lines)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="bbp-lab",
        description="Deformed inhomogeneous random-matrix experiments and exact checks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    runp = sub.add_parser("run", help="run an experiment config")
    runp.add_argument("config", help="path to a JSON experiment config")
    runp.add_argument("--threads", type=int, default=None, help="worker processes (default: cores; env BBP_LAB_THREADS)")
    runp.add_argument("--out", default=None, help="output directory (default: beside the config)")
    runp.add_argument("--seed", type=int, default=None, help="override the config seed")
    sub.add_parser("list", help="list available experiments")

    args = parser.parse_args(argv)
    if args.command == "list":
        print(list_experiments())
        return 0
    return run(args.config, out_dir=args.out, threads=args.threads, seed_override=args.seed)


if __name__ == "__main__":
    sys.exit(main())
