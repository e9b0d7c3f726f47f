"""
Scenario-driven command line front end.

A scenario file holds ``key = value`` lines and, optionally, the signed box
lines of the set format::

    # middle-third set, constant integrand
    name = middle third
    domain = middle_third
    function = const 1
    modes = dm_ext, dm_piece
    tol = 1e-6
    depth = 6

``domain`` names a built-in set (``middle_third [m]``, ``l_shape``,
``countable_gap [K]``, ``disk``, ``box [m]``) or is replaced by lines such
as ``+ [0,1]x[0,1]`` and ``- [1/3,2/3]x[1/3,2/3]``.  ``function`` is a
catalog entry with its parameters; ``&`` stacks entries into a vector
bundle.  Other keys: ``box`` (the box ``I0``), ``norm``, ``seed``,
``inject`` (a defect added to the primitive checked by the reports),
``trials`` (report trials) and ``radius`` (falsifier gauge radius).

Exit codes: 0 when every ledger entry passes, 2 for scenario errors, 3 for
convergence failures, 4 for failed checks, 1 for I/O errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction

from . import catalog
from .catalog import Integrand, bundle
from .divisions import DivisionError, dump_division, dyadic_division
from .dunford import (
    SETS,
    DomainSpec,
    DunfordIntegralResult,
    dhk_integral_extension,
    dhk_integral_piecewise,
    dm_integral_extension,
    dm_integral_piecewise,
    fremlin_t222_check,
    report_radius,
    zero_extend,
)
from .gauges import ConstantGauge
from .geometry import NORMS, GeometryError, Interval, parse_box, scalar, set_normalize
from .integrators import NoConvergence, dunford_componentwise_check, primitive_of
from .interval_functions import (
    PreconditionError,
    SeriesError,
    inject_local_defect,
    negligible_variation_falsifier,
)

MODES = ("dm_ext", "dm_piece", "dhk_ext", "dhk_piece", "t222", "dunford_check", "negvar")
KEYS = ("name", "domain", "box", "function", "norm", "modes", "tol", "depth", "seed", "inject", "trials", "radius")

EXIT_OK, EXIT_IO, EXIT_PARSE, EXIT_CONVERGENCE, EXIT_CHECK = 0, 1, 2, 3, 4


class ScenarioError(ValueError):
    """Scenario text that cannot be turned into a valid scenario."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.message = message
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}" if line else message)


@dataclass
class Scenario:
    name: str
    domain: DomainSpec
    domain_text: str
    function: Integrand
    function_text: str
    norm: str = "max"
    modes: tuple = ("dm_ext",)
    tol: float = 1e-6
    depth: int = 6
    seed: int = 0
    inject: tuple | None = None
    trials: int = 16
    radius: float | None = None

    def to_record(self) -> dict:
        return {
            "name": self.name,
            "domain": self.domain_text,
            "box": str(self.domain.I0),
            "function": self.function_text,
            "value_dim": self.function.value_dim,
            "norm": self.norm,
            "modes": list(self.modes),
            "tol": self.tol,
            "depth": self.depth,
            "seed": self.seed,
            "inject": None if self.inject is None else [float(x) for x in self.inject],
            "trials": self.trials,
            "radius": self.radius,
        }


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def _bad_token_column(text: str, start: int, exc: Exception) -> int:
    """1-based column of the token quoted in ``exc`` (or of the value start)."""
    msg = str(exc)
    if "'" in msg:
        token = msg.split("'")[1]
        at = text.find(token, start)
        if at >= 0:
            return at + 1
    return start + 1


def _parse_function(text: str, dim: int) -> Integrand:
    parts = [p.strip() for p in text.split("&")]
    fs = []
    for part in parts:
        words = part.split()
        if not words:
            raise ValueError("empty function description")
        fs.append(catalog.build(words[0], words[1:], dim))
    return fs[0] if len(fs) == 1 else bundle(*fs)


def _parse_domain(text: str) -> DomainSpec:
    words = text.split()
    name, args = words[0], words[1:]
    if name not in SETS:
        raise KeyError(f"unknown domain {name!r}; built-in sets: {', '.join(sorted(SETS))}")
    if name in ("middle_third", "box", "countable_gap"):
        return SETS[name](*(int(a) for a in args))
    if args:
        raise ValueError(f"{name} takes no parameters")
    return SETS[name]()


def parse_scenario(text: str) -> Scenario:
    """Validate scenario text; errors carry 1-based line and column numbers."""
    values: dict = {}
    where: dict = {}
    set_lines = []
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        stripped = line.lstrip()
        indent = len(line) - len(stripped)
        if stripped[0] in "+-":
            set_lines.append((n, indent, stripped))
            continue
        if "=" not in stripped:
            raise ScenarioError("expected 'key = value' or a signed box line", n, indent + 1)
        key, value = stripped.split("=", 1)
        key = key.strip()
        if key not in KEYS:
            raise ScenarioError(f"unknown key {key!r}; keys: {', '.join(KEYS)}", n, indent + 1)
        if key in values:
            raise ScenarioError(f"duplicate key {key!r}", n, indent + 1)
        # 0-based offset of the value
        start = line.index("=") + 1
        start += len(value) - len(value.lstrip())
        values[key] = value.strip()
        where[key] = (n, start, raw)

    def fail(key, message, exc=None):
        n, start, raw = where[key]
        col = _bad_token_column(raw, start, exc) if exc is not None else start + 1
        raise ScenarioError(message, n, col)

    # domain
    if set_lines and "domain" in values:
        fail("domain", "give either 'domain' or signed box lines, not both")
    if set_lines:
        signed = []
        for n, indent, body in set_lines:
            try:
                signed.append((parse_box(body[1:]), body[0]))
            except GeometryError as exc:
                raise ScenarioError(str(exc), n, _bad_token_column(body, 1, exc) + indent) from exc
        try:
            G = set_normalize(signed)
        except GeometryError as exc:
            raise ScenarioError(str(exc), set_lines[0][0], 1) from exc
        domain_text = " ; ".join(body for _, _, body in set_lines)
        I0 = G.bounding_box
        if "box" in values:
            try:
                I0 = parse_box(values["box"])
            except GeometryError as exc:
                fail("box", str(exc), exc)
        try:
            spec = DomainSpec.of(G, I0, name="set")
        except GeometryError as exc:
            if "box" in values:
                fail("box", str(exc))
            raise ScenarioError(str(exc), set_lines[0][0], 1) from exc
    elif "domain" in values:
        try:
            spec = _parse_domain(values["domain"])
        except (KeyError, ValueError, TypeError) as exc:
            fail("domain", exc.args[0] if exc.args else str(exc))
        domain_text = values["domain"]
        if "box" in values:
            try:
                I0 = parse_box(values["box"])
                spec = DomainSpec(spec.G, I0, spec.certificate, spec.omitted_measure, spec.name)
            except GeometryError as exc:
                fail("box", str(exc), exc)
    else:
        raise ScenarioError("missing domain (a 'domain' key or signed box lines)")

    # function
    if "function" not in values:
        raise ScenarioError("missing 'function'")
    try:
        f = _parse_function(values["function"], spec.dim)
    except KeyError as exc:
        fail("function", exc.args[0])
    except (ValueError, IndexError, GeometryError) as exc:
        fail("function", f"bad function {values['function']!r}: {exc}", exc)
    if f.dim != spec.dim:
        fail("function", f"dimension mismatch: function on R^{f.dim}, domain in R^{spec.dim}")
    norm = values.get("norm", "max")
    if norm not in NORMS:
        fail("norm", f"unknown norm {norm!r}; norms: {', '.join(NORMS)}")
    f = f.with_norm(norm)

    modes = ("dm_ext",)
    if "modes" in values:
        modes = tuple(m.strip() for m in values["modes"].split(",") if m.strip())
        bad = [m for m in modes if m not in MODES]
        if bad or not modes:
            fail("modes", f"unknown mode {bad[0] if bad else ''!r}; modes: {', '.join(MODES)}")
        if len(set(modes)) != len(modes):
            fail("modes", "a mode is listed twice")

    def number(key, kind, default):
        if key not in values:
            return default
        try:
            return kind(values[key])
        except ValueError:
            fail(key, f"malformed {kind.__name__} {values[key]!r}")

    tol = number("tol", float, 1e-6)
    if not (tol > 0 and math.isfinite(tol)):
        fail("tol", "tolerance must be positive")
    depth = number("depth", int, 6)
    if depth < 1:
        fail("depth", "depth must be at least 1")
    seed = number("seed", int, 0)
    trials = number("trials", int, 16)
    if trials < 1:
        fail("trials", "trials must be at least 1")
    radius = number("radius", float, None)
    if radius is not None and not radius > 0:
        fail("radius", "radius must be positive")
    inject = None
    if "inject" in values:
        try:
            inject = tuple(scalar(v) for v in values["inject"].split(","))
        except GeometryError as exc:
            fail("inject", str(exc), exc)
        if len(inject) == 1:
            inject = inject * f.value_dim
        if len(inject) != f.value_dim:
            fail("inject", f"defect needs {f.value_dim} components")
    return Scenario(
        name=values.get("name", "scenario"),
        domain=spec,
        domain_text=domain_text,
        function=f,
        function_text=values["function"],
        norm=norm,
        modes=modes,
        tol=tol,
        depth=depth,
        seed=seed,
        inject=inject,
        trials=trials,
        radius=radius,
    )


# ---------------------------------------------------------------------------
# running
# ---------------------------------------------------------------------------

@dataclass
class LedgerEntry:
    check: str
    passed: bool
    kind: str  # "check" or "convergence"
    detail: str = ""

    def to_record(self) -> dict:
        return {"check": self.check, "passed": self.passed, "class": self.kind, "detail": self.detail}


@dataclass
class RunReport:
    scenario: Scenario
    results: dict = field(default_factory=dict)
    deltas: list = field(default_factory=list)
    ledger: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def exit_code(self) -> int:
        failed = [e for e in self.ledger if not e.passed]
        if any(e.kind == "convergence" for e in failed):
            return EXIT_CONVERGENCE
        return EXIT_CHECK if failed else EXIT_OK

    def to_record(self) -> dict:
        # wall time is left out so that equal inputs give equal documents
        return {
            "scenario": self.scenario.to_record(),
            "results": self.results,
            "deltas": self.deltas,
            "ledger": [e.to_record() for e in self.ledger],
            "passed": all(e.passed for e in self.ledger),
            "exit_code": self.exit_code,
        }


CROSS = (("dm_ext", "dm_piece"), ("dhk_ext", "dhk_piece"), ("dm_ext", "dhk_ext"), ("dm_piece", "dhk_piece"))


def _rows(mode, history):
    out = []
    for cell, h in history:
        out.append((mode, cell, h))
    return out


def _division(sc: Scenario):
    return dyadic_division(sc.domain.G, sc.depth)


def _negvar(sc: Scenario):
    spec, f = sc.domain, sc.function
    D = _division(sc)
    F = primitive_of(f, "M", sc.tol, box=spec.I0)
    W = spec.I0.dilate(Fraction(spec.G.bounding_box.max_edge) / 8)
    if sc.inject is not None:
        F = inject_local_defect(F, W, sc.inject)
    r = sc.radius or report_radius(spec, f.norm_bound(spec.I0), sc.tol)
    return negligible_variation_falsifier(
        F, spec.complement(W), D, sc.tol, ConstantGauge(r), trials=sc.trials, seed=sc.seed, W=W
    )


def run(sc: Scenario) -> RunReport:
    """Run every requested mode; the report is deterministic for a fixed seed."""
    start = time.perf_counter()
    rep = RunReport(sc)
    spec, f, tol = sc.domain, sc.function, sc.tol
    objs = {}
    for mode in sc.modes:
        try:
            if mode == "dm_ext":
                r = dm_integral_extension(f, spec, tol)
                rep.ledger.append(LedgerEntry("dm_ext converged", True, "convergence"))
            elif mode == "dhk_ext":
                r = dhk_integral_extension(f, spec, tol, seed=sc.seed)
                rep.ledger.append(LedgerEntry("dhk_ext converged", True, "convergence"))
                ident = r.reports.get("identity", {})
                if "passed" in ident:
                    rep.ledger.append(
                        LedgerEntry("dhk_ext series identity", ident["passed"], "check",
                                    f"max defect {ident['max_defect']!r} on {ident['checked']} boxes")
                    )
            elif mode in ("dm_piece", "dhk_piece"):
                run_piece = dm_integral_piecewise if mode == "dm_piece" else dhk_integral_piecewise
                r = run_piece(
                    f, spec, _division(sc), tol, report_trials=sc.trials, seed=sc.seed, inject=sc.inject
                )
                rep.ledger.append(LedgerEntry(f"{mode} converged", True, "convergence"))
                for name in ("dunford", "variation"):
                    sub = r.reports.get(name)
                    if sub is not None:
                        detail = f"{sub['trials']} trials"
                        if sub.get("inconclusive"):
                            detail += f", {sub['inconclusive']} inconclusive"
                        if name == "dunford" and sub["witness"] is not None:
                            detail += f", witness {sub['witness']['interval']}"
                        if name == "variation":
                            detail += f", max observed {sub['max_observed']!r}"
                        rep.ledger.append(LedgerEntry(f"{mode} {name} report", sub["passed"], "check", detail))
            elif mode == "t222":
                r = fremlin_t222_check(f, spec, tol)
                rep.ledger.append(LedgerEntry("t222 biconditional", r.upheld, "check", r.verdict))
                rep.rows += _rows("t222:dhk", [(None, h) for h in r.dhk.history])
                rep.rows += _rows("t222:dm", [(None, h) for h in r.dm.history])
            elif mode == "dunford_check":
                r = dunford_componentwise_check(zero_extend(f, spec), spec.I0, 100.0, tol)
                rep.ledger.append(LedgerEntry("dunford_check", r.dunford_ok, "check", r.reason))
            elif mode == "negvar":
                r = _negvar(sc)
                detail = f"max observed {r.max_observed!r} vs epsilon {r.epsilon!r}"
                rep.ledger.append(LedgerEntry("negvar falsifier", r.passed, "check", detail))
        except NoConvergence as exc:
            rep.results[mode] = {"error": str(exc)}
            rep.ledger.append(LedgerEntry(f"{mode} converged", False, "convergence", str(exc)))
            continue
        except (DivisionError, SeriesError, PreconditionError, GeometryError) as exc:
            rep.results[mode] = {"error": str(exc)}
            rep.ledger.append(LedgerEntry(mode, False, "check", str(exc)))
            continue
        objs[mode] = r
        rep.results[mode] = r.to_record()
        if isinstance(r, DunfordIntegralResult):
            rep.rows += _rows(mode, r.history)
    for a, b in CROSS:
        ra, rb = objs.get(a), objs.get(b)
        if ra is None or rb is None:
            continue
        delta = ra.value.dist(rb.value)
        bound = ra.error_budget + rb.error_budget
        ok = delta <= bound
        rep.deltas.append({"pair": [a, b], "delta": delta, "bound": bound, "passed": ok})
        rep.ledger.append(LedgerEntry(f"{a} vs {b}", ok, "check", f"{delta!r} <= {bound!r}"))
    rep.wall_time = time.perf_counter() - start
    return rep


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    if x is None:
        return "-"
    return f"{x:.10g}" if isinstance(x, float) else str(x)


def render_text(rep: RunReport, timing: bool = True) -> str:
    sc = rep.scenario
    out = io.StringIO()
    w = out.write
    w(f"scenario  {sc.name}\n")
    w(f"domain    {sc.domain_text} ({sc.domain.certificate}), I0 = {sc.domain.I0}\n")
    w(f"function  {sc.function_text} (d = {sc.function.value_dim}, norm {sc.norm})\n")
    w(f"tol {sc.tol!r}  depth {sc.depth}  seed {sc.seed}\n\n")
    w(f"{'mode':<15}{'value':<40}{'budget':<18}verdict\n")
    for mode in sc.modes:
        rec = rep.results.get(mode, {})
        if "error" in rec:
            w(f"{mode:<15}error: {rec['error']}\n")
        elif "route" in rec:
            val = ", ".join(_fmt(v) for v in rec["value"])
            w(f"{mode:<15}{val:<40}{_fmt(rec['error_budget']):<18}{rec['verdict']}\n")
        elif mode == "t222":
            w(f"{mode:<15}{rec['verdict']} (dunford_ok {rec['dunford_ok']}, "
              f"dhk {rec['dhk_converged']}, dm {rec['dm_converged']})\n")
        elif mode == "dunford_check":
            est = ", ".join(_fmt(v) for v in rec["abs_integral_estimates"])
            w(f"{mode:<15}dunford_ok {rec['dunford_ok']}, |f| estimates {est}\n")
        elif mode == "negvar":
            w(f"{mode:<15}max observed {_fmt(rec['max_observed'])} vs epsilon {_fmt(rec['epsilon'])}\n")
    if rep.deltas:
        w("\ncross-route deltas\n")
        for d in rep.deltas:
            w(f"  {d['pair'][0]} - {d['pair'][1]}: {_fmt(d['delta'])} (bound {_fmt(d['bound'])})\n")
    w("\nledger\n")
    for e in rep.ledger:
        tag = "PASS" if e.passed else "FAIL"
        w(f"  {tag}  {e.check}" + (f": {e.detail}" if e.detail else "") + "\n")
    w(f"\nexit code {rep.exit_code}\n")
    if timing:
        w(f"wall time {rep.wall_time:.2f} s\n")
    return out.getvalue()


def render_json(rep: RunReport) -> str:
    return json.dumps(rep.to_record(), indent=2) + "\n"


def render_csv(rep: RunReport) -> str:
    """One row per refinement level of every sweep that ran."""
    d = rep.scenario.function.value_dim
    out = io.StringIO()
    wr = csv.writer(out, lineterminator="\n")
    wr.writerow(["mode", "cell", "level", "cells", "spread", "residue", "error"] + [f"value_{j + 1}" for j in range(d)])
    for mode, cell, h in rep.rows:
        wr.writerow(
            [mode, "" if cell is None else cell, h.level, h.cells,
             "" if h.spread is None else repr(h.spread), repr(h.residue),
             "" if h.error is None else repr(h.error)] + [repr(v) for v in h.value]
        )
    return out.getvalue()


def emit(rep: RunReport, fmt: str = "text", path: str | None = None, timing: bool = True) -> str:
    text = {"text": lambda: render_text(rep, timing), "json": lambda: render_json(rep), "csv": lambda: render_csv(rep)}[fmt]()
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gaugeint", description="Run Dunford gauge-integral scenarios.")
    p.add_argument("--scenario", required=True, metavar="FILE", help="scenario file ('-' for stdin)")
    p.add_argument("--mode", metavar="LIST", help="comma-separated modes, overriding the scenario")
    p.add_argument("--tol", type=float, metavar="X")
    p.add_argument("--depth", type=int, metavar="N")
    p.add_argument("--seed", type=int, metavar="N")
    p.add_argument("--format", choices=("text", "json", "csv"), default="text")
    p.add_argument("--out", metavar="PATH", help="write the report here instead of stdout")
    p.add_argument(
        "--dump-division", nargs="?", const="-", metavar="PATH",
        help="write the division prefix (one 'generation | box' line per cell); stdout by default",
    )
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.scenario == "-":
            text = sys.stdin.read()
        else:
            with open(args.scenario, encoding="utf-8") as fh:
                text = fh.read()
    except OSError as exc:
        print(f"gaugeint: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        sc = parse_scenario(text)
        if args.mode:
            modes = tuple(m.strip() for m in args.mode.split(",") if m.strip())
            bad = [m for m in modes if m not in MODES]
            if bad or not modes:
                raise ScenarioError(f"unknown mode {bad[0] if bad else ''!r}; modes: {', '.join(MODES)}")
            sc = replace(sc, modes=modes)
        if args.tol is not None:
            if not args.tol > 0:
                raise ScenarioError("tolerance must be positive")
            sc = replace(sc, tol=args.tol)
        if args.depth is not None:
            if args.depth < 1:
                raise ScenarioError("depth must be at least 1")
            sc = replace(sc, depth=args.depth)
        if args.seed is not None:
            sc = replace(sc, seed=args.seed)
    except ScenarioError as exc:
        print(f"{args.scenario}: {exc}", file=sys.stderr)
        return EXIT_PARSE
    try:
        if args.dump_division is not None:
            dump = dump_division(_division(sc))
            if args.dump_division == "-":
                sys.stdout.write(dump)
            else:
                with open(args.dump_division, "w", encoding="utf-8") as fh:
                    fh.write(dump)
        rep = run(sc)
        emit(rep, args.format, args.out)
    except OSError as exc:
        print(f"gaugeint: {exc}", file=sys.stderr)
        return EXIT_IO
    return rep.exit_code


if __name__ == "__main__":
    sys.exit(main())
