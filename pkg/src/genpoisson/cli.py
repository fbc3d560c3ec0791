"""Manifest-driven command line front end.

Usage::

    genpoisson <subcommand> --manifest PATH [--degree-bound N] [--tolerance T]
               [--quadrature-order Q] [--json OUT]

Exit status is 0 when every check meets its expectation, 1 when some check
does not, and 2 for unreadable manifests or bad arguments.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path

from . import __version__
from .distr import (
    Dirac,
    DiracDerivative,
    Distribution,
    LeafDelta,
    TransversalDelta,
    delta_N_annihilator_check,
    genc_check,
    leaf_delta_independence,
    pair_with_refinement,
    transversal_delta_flatness,
)
from .exterior import CONVENTIONS, KVector, parse_kvector, volume_form
from .leaf import (
    Chart,
    bott_derivative_multi,
    bott_derivative_point,
    bott_extension_probe,
    bott_flat_sections_point,
    flat_section_correspondence_check,
    parameterized_leaf,
    point_leaf,
    sphere_charts,
    transversal_class,
)
from .poisson import (
    PoissonStructure,
    casimir_scan,
    modular_change_of_volume_check,
    modular_field,
    modular_triviality_witness,
    sigma,
)
from .report import FAIL, NONE_UP_TO_BOUND, PASS, WITNESS, Report, jsonable
from .suites import delta_suite, jacobi_check, schouten_suite
from .symexpr import Expr, SymexprError, parse, to_fraction
from . import _linalg

SUBCOMMANDS = (
    "jacobi",
    "schouten-suite",
    "delta-suite",
    "modular",
    "casimirs",
    "bott",
    "genc",
    "leafdelta",
    "flatness",
)


class ManifestError(ValueError):
    pass


# ---------------------------------------------------------------------------
# manifest model


@dataclass
class Model:
    raw: dict
    name: str
    vars: tuple
    ps: PoissonStructure
    volumes: dict
    leaves: dict
    distributions: dict
    bounds: dict
    checks: dict = field(default_factory=dict)


def _expr(text, vars, where) -> Expr:
    try:
        return parse(str(text), vars)
    except SymexprError as e:
        raise ManifestError(f"{where}: {e}") from None


def _kvector(text, vars, where, grade=None) -> KVector:
    try:
        return parse_kvector(str(text), vars, grade)
    except (SymexprError, ValueError) as e:
        raise ManifestError(f"{where}: {e}") from None


def _point(values, vars, where) -> tuple:
    if len(values) != len(vars):
        raise ManifestError(f"{where}: expected {len(vars)} coordinates")
    try:
        return tuple(to_fraction(str(v)) if not isinstance(v, (int, Fraction)) else Fraction(v) for v in values)
    except (ValueError, ZeroDivisionError) as e:
        raise ManifestError(f"{where}: {e}") from None


def normalize(raw: dict) -> dict:
    """Canonical re-serialization: expressions printed in canonical form, keys sorted."""
    m = load_model(raw)
    out = dict(raw)
    out["dim"] = len(m.vars)
    out["variables"] = list(m.vars)
    out["bivector"] = [[i, j, str(c)] for (i, j), c in sorted(m.ps.P.coeffs.items())]
    out["volume_forms"] = {k: str(v.coeffs[tuple(range(len(m.vars)))]) for k, v in sorted(m.volumes.items())}
    return json.loads(json.dumps(out, sort_keys=True))


def load_model(raw: dict) -> Model:
    try:
        vars = tuple(raw["variables"])
        dim = int(raw.get("dim", len(vars)))
        table = raw["bivector"]
    except (KeyError, TypeError) as e:
        raise ManifestError(f"missing manifest field {e}") from None
    if dim != len(vars) or len(set(vars)) != dim:
        raise ManifestError("dim must equal the number of distinct variables")
    coeffs = {}
    for entry in table:
        i, j, text = entry
        if not (0 <= i < j < dim):
            raise ManifestError(f"bivector entry ({i},{j}) is not a strictly-upper pair")
        coeffs[(i, j)] = _expr(text, vars, f"bivector[{i},{j}]")
    ps = PoissonStructure(KVector(vars, 2, coeffs))
    volumes = {k: volume_form(_expr(v, vars, f"volume_forms.{k}")) for k, v in raw.get("volume_forms", {}).items()}
    bounds = {"degree_bound": 4, "tolerance": 1e-8, "quadrature_order": 32}
    bounds.update(raw.get("bounds", {}))
    model = Model(raw, raw.get("name", "manifest"), vars, ps, volumes, {}, {}, bounds, raw.get("checks", {}))
    for name, desc in raw.get("leaves", {}).items():
        model.leaves[name] = ("point", desc) if "point" in desc else ("param", desc)
    return model


def build_leaf(model: Model, name: str, order_override=None):
    if name not in model.leaves:
        raise ManifestError(f"unknown leaf {name!r}")
    kind, desc = model.leaves[name]
    if kind == "point":
        return point_leaf(model.ps, _point(desc["point"], model.vars, f"leaves.{name}"), name)
    order = order_override or desc.get("quadrature_order") or model.bounds["quadrature_order"]
    casimirs = [_expr(c, model.vars, f"leaves.{name}.casimirs") for c in desc.get("casimirs", [])]
    if "sphere" in desc:
        charts = sphere_charts(to_fraction(str(desc["sphere"])))
    else:
        charts = []
        for c in desc["charts"]:
            params = tuple(c["params"])
            charts.append(
                Chart(params, tuple(tuple(float(b) for b in box) for box in c["box"]),
                      tuple(_expr(e, params, f"leaves.{name}.map") for e in c["map"]))
            )
    return parameterized_leaf(model.ps, charts, casimirs, int(order), name)


def build_distribution(model: Model, name: str, leaf_cache) -> Distribution:
    if name not in model.raw.get("distributions", {}):
        raise ManifestError(f"unknown distribution {name!r}")
    terms = []
    for t in model.raw["distributions"][name]:
        w = to_fraction(str(t.get("weight", "1")))
        kind = t["type"]
        if kind == "dirac":
            p = Dirac(_point(t["point"], model.vars, name))
        elif kind == "dirac_derivative":
            p = DiracDerivative(_point(t["point"], model.vars, name), _point(t["direction"], model.vars, name))
        elif kind == "leaf_delta":
            p = LeafDelta(leaf_cache(t["leaf"]))
        elif kind == "transversal_delta":
            p = TransversalDelta(leaf_cache(t["leaf"]), _kvector(t["u"], model.vars, name))
        else:
            raise ManifestError(f"unknown distribution type {kind!r}")
        terms.append((w, p))
    return Distribution(terms)


# ---------------------------------------------------------------------------
# record helpers


def _record(rep: Report, name: str, expected: str = PASS) -> dict:
    rec = rep.to_json()
    rec["name"] = name
    rec["expected"] = expected
    rec["ok"] = rep.verdict == expected or (expected == PASS and rep.verdict in (PASS, WITNESS))
    return rec


def _errored(name: str, exc: Exception, expected: str = PASS) -> dict:
    return _record(Report(name, FAIL, None, {"error": f"{type(exc).__name__}: {exc}"}), name, expected)


def _guard(name, expected, fn):
    try:
        return _record(fn(), name, expected)
    except ManifestError:
        raise
    except Exception as e:  # a check that cannot run is a failed check
        return _errored(name, e, expected)


def _same_span(computed, expected) -> bool:
    if len(computed) != len(expected):
        return False
    if not expected:
        return True
    n = len(expected[0])
    r_both = len(_linalg.rref([list(v) for v in computed] + [list(v) for v in expected], n)[1])
    return r_both == len(computed) == len(_linalg.rref([list(v) for v in computed], n)[1])


# ---------------------------------------------------------------------------
# suites


class Runner:
    def __init__(self, model: Model, flags: dict):
        self.m = model
        self.flags = flags
        self._leaves = {}

    @property
    def degree_bound(self):
        return self.flags.get("degree_bound") or self.m.bounds["degree_bound"]

    def bound_for(self, item: dict, default=None) -> int:
        """A command-line bound beats a per-check bound, which beats the manifest default."""
        return (self.flags.get("degree_bound") or item.get("degree_bound") or default
                or self.m.bounds["degree_bound"])

    @property
    def tolerance(self):
        return self.flags.get("tolerance") or self.m.bounds["tolerance"]

    def leaf(self, name):
        if name not in self._leaves:
            self._leaves[name] = build_leaf(self.m, name, self.flags.get("quadrature_order"))
        return self._leaves[name]

    def distribution(self, name):
        return build_distribution(self.m, name, self.leaf)

    def section(self, key, default=None):
        return self.m.checks.get(key, default)

    # -- subcommands -------------------------------------------------------

    def jacobi(self):
        return [_record(jacobi_check(self.m.ps), "jacobi", self.section("jacobi", {}).get("expect", PASS))]

    def schouten_suite(self):
        cfg = self.section("schouten-suite", {})
        reps = schouten_suite(cfg.get("samples", 200), cfg.get("lie_samples", 100), cfg.get("seed", 0))
        return [_record(r, r.check) for r in reps]

    def delta_suite(self):
        cfg = self.section("delta-suite", {})
        reps = delta_suite(self.m.ps, cfg.get("samples", 100), cfg.get("degree", 3), cfg.get("seed", 0))
        exp = cfg.get("expect", {})
        return [_record(r, r.check, exp.get(r.check, PASS)) for r in reps]

    def modular(self):
        cfg = self.section("modular")
        if cfg is None:
            return []
        vol_name = cfg.get("volume") or next(iter(self.m.volumes))
        W = self.m.volumes[vol_name]
        ps = self.m.ps
        out = []

        def field_check():
            mu = modular_field(ps, W).field
            det = {"volume": vol_name, "field": str(mu)}
            if "expected" in cfg:
                want = _kvector(cfg["expected"], self.m.vars, "modular.expected", 1)
                det["expected"] = str(want)
                return Report("modular.field", PASS if want == mu else FAIL, str(mu - want), det)
            return Report("modular.field", PASS, None, det)

        out.append(_guard("modular.field", PASS, field_check))

        def sigma_check():
            s = sigma(ps, modular_field(ps, W).field)
            return Report("modular.sigma", PASS if s.is_zero() else FAIL, str(s))

        out.append(_guard("modular.sigma", PASS, sigma_check))
        for phi_text in cfg.get("changes", []):
            phi = _expr(phi_text, self.m.vars, "modular.changes")
            name = f"modular.change-of-volume[{phi}]"
            out.append(_guard(name, PASS, lambda phi=phi: Report(
                name, PASS if modular_change_of_volume_check(ps, W, phi, self.degree_bound) else FAIL, None,
                {"phi": str(phi), "degree_bound": self.degree_bound})))
        bound = cfg.get("witness_degree_bound", 8)

        def witness():
            rep = modular_triviality_witness(ps, W, bound)
            verdict = WITNESS if rep.found else NONE_UP_TO_BOUND
            return Report("modular.triviality", verdict, str(rep.witness) if rep.found else None,
                          {"degree_bound": bound, "message": rep.message})

        out.append(_guard("modular.triviality", cfg.get("expect_triviality", PASS), witness))
        return out

    def casimirs(self):
        cfg = self.section("casimirs", {})
        bound = self.bound_for(cfg)

        def run():
            basis = casimir_scan(self.m.ps, bound)
            det = {"degree_bound": bound, "basis": [str(b) for b in basis]}
            if "expected" in cfg:
                want = [_expr(e, self.m.vars, "casimirs.expected") for e in cfg["expected"]]
                same = _casimir_span_equal(basis, want)
                det["expected"] = [str(w) for w in want]
                return Report("casimirs", PASS if same else FAIL, len(basis), det)
            return Report("casimirs", PASS, len(basis), det)

        return [_guard("casimirs", PASS, run)]

    def bott(self):
        cfg = self.section("bott", {})
        ps, vars = self.m.ps, self.m.vars
        out = []
        for k, c in enumerate(cfg.get("derivatives", [])):
            name = f"bott.derivative[{k}:{c['leaf']}]"

            def run(c=c, name=name):
                leaf = self.leaf(c["leaf"])
                alpha = _point(c["alpha"], vars, name)
                V = _point(c["v"], vars, name)
                got = bott_derivative_point(ps, leaf, alpha, V)
                det = {"alpha": alpha, "v": V, "value": got}
                if "expected" in c:
                    want = _point(c["expected"], vars, name)
                    det["expected"] = want
                    return Report(name, PASS if got == want else FAIL, None, det)
                return Report(name, PASS, None, det)

            out.append(_guard(name, c.get("expect", PASS), run))
        for c in cfg.get("flat_sections", []):
            name = f"bott.flat-sections[{c['leaf']}]"

            def run(c=c, name=name):
                basis = bott_flat_sections_point(ps, self.leaf(c["leaf"]))
                det = {"basis": basis}
                if "expected" in c:
                    want = [_point(v, vars, name) for v in c["expected"]]
                    det["expected"] = want
                    return Report(name, PASS if _same_span(basis, want) else FAIL, len(basis), det)
                return Report(name, PASS, len(basis), det)

            out.append(_guard(name, c.get("expect", PASS), run))
        for k, c in enumerate(cfg.get("multi", [])):
            name = f"bott.multi[{k}:{c['leaf']}]"

            def run(c=c, name=name):
                leaf = self.leaf(c["leaf"])
                u = _kvector(c["u"], vars, name)
                cls = bott_derivative_multi(ps, leaf, _point(c["alpha"], vars, name), u)
                det = {"u": str(u), "alpha": c["alpha"], "class_coords": cls.coords}
                if "expected" in c:
                    want = _kvector(c["expected"], vars, name, cls.grade)
                    wcls = transversal_class(ps, leaf.point, want.at(leaf.point), cls.grade)
                    det["expected"] = str(want)
                    return Report(name, PASS if wcls.equals(cls) else FAIL, None, det)
                return Report(name, PASS, None, det)

            out.append(_guard(name, c.get("expect", PASS), run))
        for c in cfg.get("correspondence", []):
            name = f"bott.correspondence[{c['leaf']}:{c['field']}]"
            out.append(_guard(name, c.get("expect", PASS), lambda c=c, name=name: flat_section_correspondence_check(
                ps, self.leaf(c["leaf"]), _kvector(c["field"], vars, name, 1), self.degree_bound, self.tolerance)))
        probe = cfg.get("extension_probe")
        if probe is not None:
            for lname, (kind, _) in sorted(self.m.leaves.items()):
                if kind != "point":
                    continue
                name = f"bott.extension-probe[{lname}]"
                out.append(_guard(name, PASS, lambda lname=lname: bott_extension_probe(
                    ps, self.leaf(lname), probe.get("samples", 50), probe.get("seed", 0))))
        return out

    def genc(self):
        items = self.section("genc")
        if items is None:
            items = [{"distribution": d} for d in sorted(self.m.raw.get("distributions", {}))]
        out = []
        for c in items:
            bound = self.bound_for(c)
            name = f"genc[{c['distribution']}]"
            out.append(_guard(name, c.get("expect", PASS), lambda c=c, bound=bound: genc_check(
                self.m.ps, self.distribution(c["distribution"]), bound, self.tolerance)))
        return out

    def leafdelta(self):
        cfg = self.section("leafdelta", {})
        out = []
        for c in cfg.get("pairings", []):
            fn = _expr(c.get("function", "1"), self.m.vars, "leafdelta.pairings")
            name = f"leafdelta.pair[{c['distribution']}:{fn}]"

            def run(c=c, fn=fn, name=name):
                value, refinement = pair_with_refinement(self.distribution(c["distribution"]), fn)
                det = {"value": value, "refinement_estimate": refinement}
                if "expected_abs" in c:
                    want = float(c["expected_abs"])
                    tol = float(c.get("tolerance", 1e-6))
                    err = abs(abs(float(value)) - want)
                    det.update({"expected_abs": want, "tolerance": tol})
                    return Report(name, PASS if err <= tol else FAIL, err, det)
                return Report(name, PASS, None, det)

            out.append(_guard(name, c.get("expect", PASS), run))
        for k, c in enumerate(cfg.get("independence", [])):
            name = f"leafdelta.independence[{k}:{','.join(c['leaves'])}]"
            out.append(_guard(name, c.get("expect", PASS), lambda c=c: leaf_delta_independence(
                self.m.ps, [self.leaf(n) for n in c["leaves"]],
                [_expr(f, self.m.vars, "leafdelta.independence") for f in c["functions"]],
                float(c.get("rel_tol", 1e-6)))))
        for c in cfg.get("annihilators", []):
            name = f"leafdelta.annihilator[{c['leaf']}:{c['field']}]"
            out.append(_guard(name, c.get("expect", PASS), lambda c=c, name=name: delta_N_annihilator_check(
                self.m.ps, self.leaf(c["leaf"]), _kvector(c["field"], self.m.vars, name, 1),
                self.bound_for(c, 3), self.tolerance)))
        return out

    def flatness(self):
        out = []
        for c in self.section("flatness", []):
            name = f"flatness[{c['leaf']}:{c['u']}]"
            bound = self.bound_for(c)
            out.append(_guard(name, c.get("expect", PASS), lambda c=c, bound=bound, name=name: transversal_delta_flatness(
                self.m.ps, self.leaf(c["leaf"]), _kvector(c["u"], self.m.vars, name), bound, self.tolerance)))
        return out

    def run(self, subcommand: str) -> list[dict]:
        names = SUBCOMMANDS if subcommand == "all" else (subcommand,)
        records = []
        for sub in names:
            records.extend(getattr(self, sub.replace("-", "_"))())
        return sorted(records, key=lambda r: r["name"])


def _casimir_span_equal(basis, want) -> bool:
    if any(not e.den.is_ground for e in basis + want):
        return False
    keys = sorted({m for e in basis + want for m, _ in e.poly_terms()})

    def coords(e):
        terms = dict(e.poly_terms())
        return [terms.get(k, Fraction(0)) for k in keys]

    return _same_span([coords(e) for e in basis], [coords(e) for e in want])


# ---------------------------------------------------------------------------
# entry point


def read_manifest(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        bundled = resources.files("genpoisson") / "manifests" / (path if path.endswith(".json") else path + ".json")
        if bundled.is_file():
            return json.loads(bundled.read_text(encoding="utf-8"))
        raise ManifestError(f"manifest not found: {path}")
    try:
        return json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ManifestError(f"invalid JSON: {e}") from None


def bundled_manifests() -> list[str]:
    root = resources.files("genpoisson") / "manifests"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def run(subcommand: str, raw: dict, flags: dict) -> tuple[dict, int]:
    model = load_model(raw)
    digest = hashlib.sha256(json.dumps(raw, sort_keys=True).encode()).hexdigest()
    records = Runner(model, flags).run(subcommand)
    report = {
        "tool": "genpoisson",
        "version": __version__,
        "manifest": model.name,
        "manifest_digest": digest,
        "subcommand": subcommand,
        "flags": jsonable({k: v for k, v in flags.items() if v is not None}),
        "conventions": CONVENTIONS,
        "checks": records,
        "summary": {"total": len(records), "ok": sum(r["ok"] for r in records)},
    }
    return report, 0 if all(r["ok"] for r in records) else 1


def render(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="genpoisson", description="Verify identities of degenerate Poisson structures.")
    ap.add_argument("subcommand", choices=SUBCOMMANDS + ("all",))
    ap.add_argument("--manifest", required=True, help="manifest path or bundled manifest name")
    ap.add_argument("--degree-bound", type=int)
    ap.add_argument("--tolerance", type=float)
    ap.add_argument("--quadrature-order", type=int)
    ap.add_argument("--json", dest="json_out", help="write the report here instead of stdout")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    flags = {"degree_bound": args.degree_bound, "tolerance": args.tolerance, "quadrature_order": args.quadrature_order}
    try:
        raw = read_manifest(args.manifest)
        report, code = run(args.subcommand, raw, flags)
    except (ManifestError, KeyError, TypeError, ValueError) as e:
        print(f"genpoisson: manifest error: {e}", file=sys.stderr)
        return 2
    text = render(report)
    if args.json_out:
        Path(args.json_out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    for r in report["checks"]:
        if not r["ok"]:
            print(f"genpoisson: {r['name']}: {r['verdict']} (expected {r['expected']}) residual={r['residual']}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
