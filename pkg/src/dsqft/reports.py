"""Run configurations, command implementations and report bundles."""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import fixtures
from .errors import ContractError, MissingEntry
from .geometry import GridSpec, ModelParams, unit

COMMANDS = ("modes-validate", "kernel-eval", "npoint", "smatrix", "out-npoint", "gns-gram",
            "dispersion-scan", "stationary-check", "contrast")

EXIT_OK, EXIT_VERIFY, EXIT_BUDGET, EXIT_CONFIG = 0, 2, 3, 64


class VerificationFailed(RuntimeError):
    """A computed result violates an invariant; carries the artifacts written so far."""


@dataclass
class RunConfig:
    command: str
    params: ModelParams | None = None
    grid: GridSpec | None = None
    fixtures: tuple = ()
    seed: int | None = None
    output_dir: str | None = None
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ContractError(f"unknown command {self.command!r}")
        self.fixtures = tuple(self.fixtures)
        if self.seed is not None and self.grid is not None:
            self.grid = self.grid.replace(seed=int(self.seed))

    def to_dict(self) -> dict:
        return {"command": self.command,
                "params": self.params.to_dict() if self.params else None,
                "grid": json.loads(self.grid.to_json()) if self.grid else None,
                "fixtures": list(self.fixtures), "seed": self.seed,
                "output_dir": self.output_dir, "options": self.options}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    @classmethod
    def from_dict(cls, data) -> "RunConfig":
        data = dict(data)
        if data.get("params") is not None:
            data["params"] = ModelParams.from_dict(data["params"])
        if data.get("grid") is not None:
            data["grid"] = GridSpec.from_json(data["grid"])
        data["options"] = dict(data.get("options") or {})
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls.from_dict(json.loads(text))


# ------------------------------------------------------------------ helpers


def _num(z) -> dict:
    z = complex(z)
    return {"re": z.real, "im": z.imag}


def _result(r) -> dict:
    d = r.to_dict()
    return {"value": _num(r.value), "error": r.error, "exact": r.exact, "terms": d["terms"], "notes": d["notes"]}


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _fixture(cfg: RunConfig) -> dict:
    if not cfg.fixtures:
        raise MissingEntry("this command needs --fixture")
    fx = fixtures.load(cfg.fixtures[0])
    if cfg.params is not None and cfg.params.d != fx["d"]:
        raise ContractError(f"fixture {fx['name']} lives in d={fx['d']}, not d={cfg.params.d}")
    return fx


def _params(cfg: RunConfig, fx=None) -> ModelParams:
    if cfg.params is not None:
        return cfg.params
    if fx is not None:
        return ModelParams.from_frak_m(fx["d"], frak_m=fx["frak_m"])
    raise ContractError("model parameters (--d and --frak-m / --frak-m2) are required")


def _fns(fx, n=None):
    fs = fixtures.functions(fx["name"])
    if n is not None:
        if n > len(fs):
            raise ContractError(f"fixture {fx['name']} has only {len(fs)} functions")
        fs = fs[:n]
    return fs


# ------------------------------------------------------------------ commands


def _modes_validate(cfg):
    from .modes import RESIDUAL_TOL, build_mode

    p = _params(cfg)
    rows = []
    for s in range(int(cfg.options.get("s_max", 30)) + 1):
        m = build_mode(p, s)
        nodes = m.check_nodes()
        drift = float(np.max(m.wronskian_drift_at(nodes)))
        rows.append((s, m.max_residual(), drift, m.formula_residual))
    worst_r = max(r[1] for r in rows)
    worst_w = max(r[2] for r in rows)
    ok = worst_r < RESIDUAL_TOL and worst_w < RESIDUAL_TOL
    summary = {"max_residual": worst_r, "max_wronskian_drift": worst_w, "passed": ok,
               "mu": _num(m.mu), "reading": m.reading}
    return summary, {"modes.csv": _csv(rows, ["s", "residual", "wronskian_drift", "formula_residual"])}, ok


def _kernel_eval(cfg):
    from .geometry import DeSitterPoint
    from .kernels import SmearedKernel
    from .testfn import make_bump

    p = _params(cfg)
    o = cfg.options
    f = make_bump(o.get("tau_lo", -0.3), o.get("tau_hi", 0.3), int(o.get("degree", 0)), unit(p.d))
    th = float(o.get("angle", 0.0))
    alpha = np.cos(th) * unit(p.d) + np.sin(th) * unit(p.d, 0)
    y = DeSitterPoint.make(float(o.get("tau", 0.0)), alpha)
    kind = o.get("kind", "Dplus")
    v, e = SmearedKernel(kind, f, p, int(o.get("s_max", 160))).at(y, with_error=True)
    return {"kind": kind, "value": _num(v), "error": e, "test_function": f.to_dict()}, {}, True


def _slots_from(tags, fns):
    from .wightman import Current, In, Loc, Out

    make = {"in": In, "loc": Loc, "out": Out, "current": Current}
    if len(tags) != len(fns):
        raise ContractError("one tag per slot is required")
    return [make[t.lower()](f) for t, f in zip(tags, fns)]


def _npoint(cfg):
    from .wightman import truncated_npoint

    fx = _fixture(cfg)
    p = _params(cfg, fx)
    n = int(cfg.options.get("n", fx["n"]))
    tags = cfg.options.get("tags") or ["loc"] * n
    r = truncated_npoint(_slots_from(tags, _fns(fx, n)), p, cfg.grid)
    rows = [(t["k"], complex(t["value"]).real, complex(t["value"]).imag, t["error"]) for t in r.term_breakdown]
    return {"fixture": fx["name"], "tags": tags, **_result(r)}, {"terms.csv": _csv(rows, ["k", "re", "im", "error"])}, True


def _smatrix(cfg):
    from .wightman import smatrix_element

    fx = _fixture(cfg)
    p = _params(cfg, fx)
    n = int(cfg.options.get("n", fx["n"]))
    k = int(cfg.options.get("n_in", 0))
    fs = _fns(fx, n)
    r = smatrix_element(fs[:k], fs[k:], p, cfg.grid)
    return {"fixture": fx["name"], "n_in": k, **_result(r)}, {}, True


def _out_npoint(cfg):
    from .wightman import out_npoint, smatrix_element

    fx = _fixture(cfg)
    p = _params(cfg, fx)
    fs = _fns(fx, int(cfg.options.get("n", fx["n"])))
    r = out_npoint(fs, p, cfg.grid)
    s = smatrix_element([], fs, p, cfg.grid)
    xpath = abs(r.value - s.value) / max(abs(r.value), abs(s.value), 1e-300)
    ratio = abs(r.value) / r.error if r.error > 0 else float("inf")
    return {"fixture": fx["name"], **_result(r), "ratio": ratio, "cross_path_relative": xpath}, {}, True


def _gns_gram(cfg):
    from .gns import gram, null_quotient
    from .wightman import Current, In, Loc

    fx = _fixture(cfg)
    p = _params(cfg, fx)
    fs = _fns(fx)
    preset = cfg.options.get("basis", "j-phiphi")
    if preset == "j-phiphi":
        basis = [(Current(fs[1]),), (Loc(fs[0]), Loc(fs[2]))]
    elif preset == "in-sector":
        basis = [(In(f),) for f in fs]
    elif preset == "vacuum":
        basis = [()]
    else:
        raise ContractError(f"unknown basis preset {preset!r}")
    g = gram(basis, p, cfg.grid)
    tol = cfg.options.get("tol")
    sig = g.signature(tol)
    q = null_quotient(g, tol)
    herm_ok = g.hermiticity_defect <= 1e-12 * max(g.norm, 1e-300)
    rows = [(i, j, g.matrix[i, j].real, g.matrix[i, j].imag, g.errors[i, j])
            for i in range(len(basis)) for j in range(len(basis))]
    summary = {"fixture": fx["name"], "basis": preset, "signature": list(sig), "norm": g.norm,
               "hermiticity_defect": g.hermiticity_defect, "null_directions_removed": q.removed,
               "eigenvalues": q.eigenvalues.tolist()}
    return summary, {"gram.csv": _csv(rows, ["i", "j", "re", "im", "error"])}, herm_ok


def _dispersion_scan(cfg):
    from .dispersion import envelope_fit, scan_In, scan_matches_threshold, threshold
    from .testfn import make_bump

    p = _params(cfg)
    o = cfg.options
    n = int(o.get("n", 3))
    f = make_bump(o.get("tau_lo", -0.4), o.get("tau_hi", 0.3), int(o.get("degree", 0)), unit(p.d))
    eps = np.logspace(-1, np.log10(float(o.get("eps_min", 1e-8))), int(o.get("eps_count", 8)))
    sc = scan_In(f, n, p, eps)
    env = envelope_fit(f, p)
    th = threshold(p.d, n)
    match = scan_matches_threshold(sc, p.d)
    asserted = float(np.real(sc.diagnostics["mu"][0])) >= 0
    summary = {"scan": sc.to_dict(), "threshold": th.to_dict(), "matches_threshold": match,
               "asserted": asserted, "envelope": env.to_dict()}
    return summary, {"scan.csv": sc.to_csv()}, match or not asserted


def _stationary_check(cfg):
    from .stationary import TermPattern, verify_out_in_equivalence, verify_spectral_support

    n = int(cfg.options.get("n", 3))
    eps = str(cfg.options.get("epsilon", "0.1"))
    certs = [verify_out_in_equivalence(n, eps)]
    certs += [verify_spectral_support(TermPattern.from_term(n, k), eps) for k in range(1, n + 1)]
    ok = all(c["body"]["status"] in ("zero", "certified") for c in certs)
    return {"n": n, "epsilon": eps, "certificates": certs}, {}, ok


def _contrast(cfg):
    from .stationary import contrast_report

    names = cfg.fixtures or ("tri-bump",)
    rows, reports = [], []
    for name in names:
        fx = fixtures.load(name)
        rep = contrast_report(ModelParams.from_frak_m(fx["d"], frak_m=fx["frak_m"]), fx, cfg.grid)
        reports.append(rep)
        rows.append((name, rep["d"], rep["n"], "0", rep["stationary"]["certificate_id"],
                     rep["desitter"]["value"], rep["desitter"]["error"], rep["desitter"]["ratio"]))
    ok = all(r["desitter"]["nonzero"] for r in reports)
    header = ["fixture", "d", "n", "stationary_value", "certificate_id", "desitter_value",
              "desitter_error", "ratio"]
    return {"reports": reports}, {"contrast.csv": _csv(rows, header)}, ok


_IMPL = {"modes-validate": _modes_validate, "kernel-eval": _kernel_eval, "npoint": _npoint,
         "smatrix": _smatrix, "out-npoint": _out_npoint, "gns-gram": _gns_gram,
         "dispersion-scan": _dispersion_scan, "stationary-check": _stationary_check,
         "contrast": _contrast}


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, complex):
        return _num(obj)
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    return obj


def run(cfg: RunConfig) -> tuple:
    """Execute a configuration; returns (exit status, summary dict, {filename: text})."""
    summary, tables, ok = _IMPL[cfg.command](cfg)
    summary = _clean({"command": cfg.command, "passed": bool(ok), **summary})
    files = {"summary.json": json.dumps(summary, sort_keys=True, indent=1) + "\n",
             "config.json": cfg.to_json() + "\n", **tables}
    if cfg.output_dir:
        os.makedirs(cfg.output_dir, exist_ok=True)
        for name, text in files.items():
            with open(os.path.join(cfg.output_dir, name), "w") as fh:
                fh.write(text)
    return (EXIT_OK if ok else EXIT_VERIFY), summary, files


# ------------------------------------------------------------------ bundles


def threshold_table(ds=range(3, 8), ns=range(3, 7)) -> list:
    from .dispersion import threshold

    return [threshold(d, n).to_dict() for d in ds for n in ns]


def report_bundle(run_ids, output_dir=None) -> dict:
    """Collate stored runs (directories holding summary.json) into markdown and CSV."""
    run_ids = list(run_ids)
    if not run_ids:
        raise MissingEntry("no runs given")
    runs = []
    for rid in run_ids:
        path = os.path.join(rid, "summary.json")
        if not os.path.exists(path):
            raise MissingEntry(f"run {rid!r} has no summary.json")
        with open(path) as fh:
            runs.append((rid, json.load(fh)))

    th = threshold_table()
    md = ["# Report", "", "## Dispersion threshold (dn-2n-2d)/2 > -1", "",
          "| d | n | exponent | passes |", "|---|---|---|---|"]
    md += [f"| {t['d']} | {t['n']} | {t['exponent']:g} | {t['passes']} |" for t in th]
    files = {"threshold.csv": _csv([(t["d"], t["n"], t["exponent"], t["passes"]) for t in th],
                                   ["d", "n", "exponent", "passes"])}

    env = [(rid, s["envelope"]) for rid, s in runs if s["command"] == "dispersion-scan"]
    if env:
        md += ["", "## Envelope slopes", "", "| run | slope | envelope | indicial | R2 |", "|---|---|---|---|---|"]
        md += [f"| {rid} | {e['slope']:.4f} | {e['reference']:g} | {e['indicial']:g} | {e['r2']:.6f} |"
               for rid, e in env]
        files["envelope.csv"] = _csv([(rid, e["slope"], e["reference"], e["indicial"], e["r2"]) for rid, e in env],
                                     ["run", "slope", "envelope", "indicial", "r2"])

    con = [rep for _, s in runs if s["command"] == "contrast" for rep in s["reports"]]
    if con:
        md += ["", "## Stationary vs de Sitter out-field 3-point values", "",
               "| fixture | d | stationary | certificate | de Sitter value | error | ratio |",
               "|---|---|---|---|---|---|---|"]
        md += [f"| {c['fixture']} | {c['d']} | 0 (exact) | {c['stationary']['certificate_id'][:12]} | "
               f"{c['desitter']['value']:.3e} | {c['desitter']['error']:.1e} | {float(c['desitter']['ratio']):.3g} |"
               for c in con]
        files["contrast.csv"] = _csv([(c["fixture"], c["d"], "exact 0", c["stationary"]["certificate_id"],
                                       c["desitter"]["value"], c["desitter"]["error"], float(c["desitter"]["ratio"]))
                                      for c in con],
                                     ["fixture", "d", "stationary", "certificate_id", "desitter_value",
                                      "desitter_error", "ratio"])

    grams = [(rid, s) for rid, s in runs if s["command"] == "gns-gram"]
    if grams:
        md += ["", "## Gram signatures", "", "| run | basis | (n+, n0, n-) | hermiticity defect |",
               "|---|---|---|---|"]
        md += [f"| {rid} | {s['basis']} | {tuple(s['signature'])} | {s['hermiticity_defect']:.1e} |"
               for rid, s in grams]
        files["signatures.csv"] = _csv([(rid, s["basis"], *s["signature"]) for rid, s in grams],
                                       ["run", "basis", "n_plus", "n_zero", "n_minus"])

    files["report.md"] = "\n".join(md) + "\n"
    if output_dir:
        os.makedirs(output_dir, exist_ok=True)
        for name, text in files.items():
            with open(os.path.join(output_dir, name), "w") as fh:
                fh.write(text)
    return files
