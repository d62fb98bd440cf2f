"""``iqsp`` command-line front end.

Every subcommand prints (or writes with ``--out``) a report holding the
resolved configuration, the library version and the results.  Floats are
printed with 17 significant digits so reports round-trip exactly and
repeated runs with the same configuration are byte-identical, apart from
``wall_time_ms`` which ``--no-timing`` removes.

Exit codes: 0 success, 1 usage or input error, 2 numerical failure or a
violated input promise.
"""

from __future__ import annotations

import csv
import io
import json
import math
import sys
from functools import wraps

import click
import numpy as np

from . import __version__
from .blockenc import (
    SMALL_ANGLE_LIMIT,
    achieved_z_angle,
    coulomb_block_encode,
    phase_multiply,
    phase_polynomial,
    phase_power,
    phase_square,
    phase_square_small,
    small_square_queries,
    write_matrix,
)
from .bosonic import BandedHamiltonian, TrotterPlan, boson_report, plan_sqrt_rotation, trotter_simulate
from .errors import (
    ConstructionError,
    DomainError,
    PostselectionError,
    PromiseViolation,
    SimulationError,
    SolverError,
)
from .numerics import phase_distance
from .polyapprox import ComplexPolynomial, RealPolynomial, arcsin_taylor
from .qsp import SOLVER_TOL, SignalRotation, gqsp_pq, qsp_response, solve_gqsp_phases, solve_qsp_phases

__all__ = ["main", "format_float", "render"]

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2


# ---------------------------------------------------------------------------
# Report rendering
# ---------------------------------------------------------------------------


def format_float(v: float) -> str:
    return format(float(v), ".17g")


def _json_text(obj, indent: int = 0) -> str:
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_json_text(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in seq):
            return "[" + ", ".join(_json_text(v, indent + 1) for v in seq) + "]"
        return "[\n" + ",\n".join(pad + _json_text(v, indent + 1) for v in seq) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _csv_cell(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, (float, np.floating)):
        return format_float(v) if math.isfinite(v) else "nan"
    if isinstance(v, (list, tuple)):
        return " ".join(_csv_cell(x) for x in v)
    return str(v)


def _flatten(prefix: str, obj: dict, out: dict) -> dict:
    for k, v in obj.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            _flatten(key + ".", v, out)
        else:
            out[key] = v
    return out


def render(report: dict, fmt: str) -> str:
    """JSON text, or CSV (the report's ``rows`` if present, else one flattened row)."""
    if fmt == "json":
        return _json_text(report) + "\n"
    rows = report.get("rows")
    if not rows:
        flat = _flatten("", {k: v for k, v in report.items() if k != "rows"}, {})
        rows = [flat]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = list(rows[0].keys())
    writer.writerow(header)
    for row in rows:
        writer.writerow([_csv_cell(row.get(h, "")) for h in header])
    return buf.getvalue()


def _emit(ctx_obj: dict, report: dict) -> None:
    text = render(report, ctx_obj["format"])
    out = ctx_obj.get("out")
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


def _report(command: str, config: dict, result: dict, rows=None) -> dict:
    rep = {"command": command, "version": __version__, "config": config, "result": result}
    if rows is not None:
        rep["rows"] = rows
    return rep


def _guard(fn):
    """Map library exceptions to the exit-code contract."""

    @wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (PromiseViolation, SolverError, ConstructionError, SimulationError, PostselectionError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_NUMERIC)
        except (DomainError, OSError, ValueError, KeyError, TypeError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_INPUT)

    return wrapper


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__, prog_name="iqsp")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Write the report here instead of stdout.")
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True, help="Seed for stochastic solver fallbacks.")
@click.pass_context
def main(ctx, out, fmt, seed):
    """Iterated QSP toolkit: phase solvers, phase gadgets and the boson pipeline."""
    ctx.ensure_object(dict)
    ctx.obj.update(out=out, format=fmt, seed=seed)


# ---------------------------------------------------------------------------
# qsp-solve
# ---------------------------------------------------------------------------


def _load_target(path: str | None, arcsin_k: int | None, radius: float):
    if (path is None) == (arcsin_k is None):
        raise DomainError("give exactly one of TARGET_FILE or --arcsin-k")
    if arcsin_k is not None:
        return "qsp", arcsin_taylor(arcsin_k, radius).to_chebyshev()
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DomainError(f"{path}: malformed JSON ({exc})") from exc
    if not isinstance(obj, dict):
        raise DomainError(f"{path}: expected a JSON object")
    kind = obj.get("kind", "qsp")
    if kind == "qsp":
        return kind, RealPolynomial.from_json(obj)
    if kind == "gqsp":
        return kind, ComplexPolynomial.from_json(obj)
    raise DomainError(f"{path}: unknown kind {kind!r}")


@main.command("qsp-solve")
@click.argument("target_file", required=False, type=click.Path(dir_okay=False))
@click.option("--arcsin-k", type=int, default=None, help="Use the k-term (2/pi) arcsin series as the target.")
@click.option("--radius", type=float, default=0.5, show_default=True, help="Domain radius for --arcsin-k.")
@click.pass_context
@_guard
def qsp_solve(ctx, target_file, arcsin_k, radius):
    """Solve QSP (real target) or GQSP (complex monomial target) phases.

    TARGET_FILE is JSON with ``kind`` ("qsp" or "gqsp"), ``basis`` and
    ``coefficients`` (complex entries as [re, im]).
    """
    seed = ctx.obj["seed"]
    kind, target = _load_target(target_file, arcsin_k, radius)
    config = {"target_file": target_file, "arcsin_k": arcsin_k, "radius": radius, "kind": kind, "seed": seed}
    if kind == "qsp":
        seq = solve_qsp_phases(target, seed=seed)
        a = np.cos(np.linspace(0, np.pi, 401))
        check = float(np.max(np.abs(qsp_response(seq, a).real - target(a))))
        result = {"convention": seq.convention, "degree": len(seq.phases) - 1, "phases": list(seq.phases),
                  "residual": seq.residual, "check_error": check}
        rows = [{"index": i, "phase": p} for i, p in enumerate(seq.phases)]
    else:
        seq = solve_gqsp_phases(target, seed=seed)
        z = np.exp(2j * np.pi * np.arange(401) / 401)
        check = float(np.max(np.abs(gqsp_pq(seq, z)[0] - target(z))))
        result = {"degree": seq.degree, "thetas": list(seq.thetas), "omegas": list(seq.omegas),
                  "lambda": float(seq.lam), "residual": seq.residual, "check_error": check}
        rows = [{"index": i, "theta": t, "omega": o} for i, (t, o) in enumerate(zip(seq.thetas, seq.omegas))]
    if not check <= 10 * SOLVER_TOL:
        raise SolverError(f"emitted phases reproduce the target only to {check:.3e}", check)
    _emit(ctx.obj, _report("qsp-solve", config, result, rows))


# ---------------------------------------------------------------------------
# Phase gadgets
# ---------------------------------------------------------------------------


def _phase_result(target: float, m: np.ndarray, ancillas: int, prob: float, queries: int, extra=None) -> dict:
    achieved = achieved_z_angle(m)
    exact = np.diag([np.exp(1j * target), np.exp(-1j * target)])
    out = {
        "target_angle": target,
        "achieved_angle": achieved,
        "error": abs(achieved - target),
        "operator_error": phase_distance(m / np.sqrt(abs(np.linalg.det(m))), exact),
        "ancillas": ancillas,
        "success_probability": prob,
        "query_count": queries,
    }
    out.update(extra or {})
    return out


@main.command("phase-square")
@click.option("--theta", type=float, required=True, help="Signal angle of W_Z(theta).")
@click.option("--eps", type=float, default=1e-3, show_default=True)
@click.option("--backend", type=click.Choice(["auto", "ancilla", "small"]), default="auto", show_default=True)
@click.pass_context
@_guard
def cmd_phase_square(ctx, theta, eps, backend):
    """Encode exp(i (theta/2)^2 Z)."""
    if backend == "auto":
        backend = "small" if abs(theta) <= SMALL_ANGLE_LIMIT and eps >= 1e-5 else "ancilla"
    w = SignalRotation("Z", theta)
    target = (theta / 2) ** 2
    if backend == "small":
        m = phase_square_small(w, eps)
        result = _phase_result(target, m, 0, 1.0, small_square_queries(eps))
    else:
        be = phase_square(w, eps)
        result = _phase_result(target, be.block, be.ancillas, be.success_probability, be.queries)
    config = {"theta": theta, "eps": eps, "backend": backend, "seed": ctx.obj["seed"]}
    _emit(ctx.obj, _report("phase-square", config, result))


@main.command("phase-power")
@click.option("--theta", type=float, required=True)
@click.option("--power", "l", type=int, required=True, help="Exponent l of (theta/2)^l.")
@click.option("--eps", type=float, default=1e-3, show_default=True)
@click.pass_context
@_guard
def cmd_phase_power(ctx, theta, l, eps):
    """Encode exp(i (theta/2)^l Z)."""
    be = phase_power(SignalRotation("Z", theta), l, eps)
    result = _phase_result((theta / 2) ** l, be.block, be.ancillas, be.success_probability, be.queries)
    config = {"theta": theta, "power": l, "eps": eps, "seed": ctx.obj["seed"]}
    _emit(ctx.obj, _report("phase-power", config, result))


@main.command("phase-multiply")
@click.option("--theta1", type=float, required=True)
@click.option("--theta2", type=float, required=True)
@click.option("--eps", type=float, default=1e-3, show_default=True)
@click.pass_context
@_guard
def cmd_phase_multiply(ctx, theta1, theta2, eps):
    """Encode W_Z(theta1 theta2) = exp(i theta1 theta2 Z / 2)."""
    be = phase_multiply(SignalRotation("Z", theta1), SignalRotation("Z", theta2), eps)
    result = _phase_result(theta1 * theta2 / 2, be.block, be.ancillas, be.success_probability, be.queries,
                           {"backend": be.meta.get("backend"), "identity": be.meta.get("identity")})
    config = {"theta1": theta1, "theta2": theta2, "eps": eps, "seed": ctx.obj["seed"]}
    _emit(ctx.obj, _report("phase-multiply", config, result))


def _parse_term(text: str):
    """``COEF:ANGLE^POW*ANGLE^POW...`` (power defaults to 1)."""
    try:
        coef, body = text.split(":", 1)
        factors = []
        for part in body.split("*"):
            angle, _, power = part.partition("^")
            factors.append((float(angle), int(power) if power else 1))
        return float(coef), factors
    except ValueError as exc:
        raise DomainError(f"cannot parse term {text!r}: expected COEF:ANGLE^POW*ANGLE^POW") from exc


@main.command("phase-poly")
@click.option("--term", "terms", multiple=True, required=True, help="Monomial COEF:ANGLE^POW*ANGLE^POW (repeatable).")
@click.option("--eps", type=float, default=1e-2, show_default=True)
@click.pass_context
@_guard
def cmd_phase_poly(ctx, terms, eps):
    """Encode exp(i sum_j a_j prod_i (theta_ij/2)^l_ij Z)."""
    parsed = [_parse_term(t) for t in terms]
    monomials = [(c, [(SignalRotation("Z", a), p) for a, p in fs]) for c, fs in parsed]
    be = phase_polynomial(monomials, eps)
    result = _phase_result(be.meta["target_angle"], be.block, be.ancillas, be.success_probability, be.queries)
    config = {"terms": list(terms), "eps": eps, "seed": ctx.obj["seed"]}
    _emit(ctx.obj, _report("phase-poly", config, result))


@main.command("coulomb")
@click.option("--x1", type=float, required=True)
@click.option("--y1", type=float, required=True)
@click.option("--x2", type=float, required=True)
@click.option("--y2", type=float, required=True)
@click.option("--delta", type=float, default=0.25, show_default=True, help="Promised lower bound on d^2.")
@click.option("--eps", type=float, default=1e-2, show_default=True)
@click.pass_context
@_guard
def cmd_coulomb(ctx, x1, y1, x2, y2, delta, eps):
    """Encode the 2-D Coulomb magnitude (sqrt(delta)/2)/d between two charges."""
    be = coulomb_block_encode(x1, y1, x2, y2, delta, eps)
    d = be.meta["distance"]
    magnitude = float(abs(be.encoded[0, 0]))
    analytic = (math.sqrt(delta) / 2) / d
    result = {"distance": d, "magnitude": magnitude, "analytic": analytic, "error": abs(magnitude - analytic),
              "ancillas": be.ancillas, "success_probability": be.success_probability, "query_count": be.queries}
    config = {"x1": x1, "y1": y1, "x2": x2, "y2": y2, "delta": delta, "eps": eps, "seed": ctx.obj["seed"]}
    _emit(ctx.obj, _report("coulomb", config, result))


# ---------------------------------------------------------------------------
# Boson pipeline
# ---------------------------------------------------------------------------


def _slope(xs, ys) -> float:
    lx, ly = np.log(np.asarray(xs, dtype=float)), np.log(np.asarray(ys, dtype=float))
    return float(np.polyfit(lx, ly, 1)[0])


@main.command("boson")
@click.option("--ncut", type=int, default=7, show_default=True, help="Fock cutoff (matrix dimension).")
@click.option("--time", "total_time", type=float, default=1.0, show_default=True, help="Total evolution time T.")
@click.option("--steps", type=int, default=100, show_default=True, help="Trotter steps N.")
@click.option("--tau", type=float, default=None, help="Step size; sets N = round(T / tau).")
@click.option("--order", type=click.Choice(["1", "2"]), default="1", show_default=True)
@click.option("--eps", type=float, default=1e-4, show_default=True, help="Accuracy of each QSP stage.")
@click.option("--delta", type=float, default=0.1, show_default=True)
@click.option("--backend", type=click.Choice(["qsp", "exact"]), default="qsp", show_default=True)
@click.option("--sweep", default=None, help="Comma-separated step counts for a fidelity-vs-N sweep.")
@click.option("--no-timing", is_flag=True, help="Omit wall-clock fields.")
@click.option("--state-out", type=click.Path(dir_okay=False), default=None, help="Write the final state (IQSPMAT1).")
@click.pass_context
@_guard
def cmd_boson(ctx, ncut, total_time, steps, tau, order, eps, delta, backend, sweep, no_timing, state_out):
    """Simulate H = a + a^dagger from the vacuum and compare with the dense oracle."""
    order = int(order)
    if tau is not None:
        if tau <= 0:
            raise DomainError("tau must be positive")
        steps = max(1, round(total_time / tau))
    config = {"ncut": ncut, "time": total_time, "steps": steps, "order": order, "eps": eps, "delta": delta,
              "backend": backend, "sweep": sweep, "seed": ctx.obj["seed"]}
    if sweep:
        counts = [int(s) for s in sweep.split(",") if s.strip()]
        if not counts or min(counts) < 1:
            raise DomainError("sweep needs positive step counts")
        rows = []
        for n in counts:
            rep = boson_report(ncut, total_time, n, order, eps, eps, delta, backend)
            rows.append({"N": n, "tau": rep["tau"], "fidelity": rep["fidelity"],
                         "infidelity": 1 - rep["fidelity"], "success_probability": rep["success_probability"]})
        infid = [max(r["infidelity"], 1e-300) for r in rows]
        result = {"slope": _slope([r["tau"] for r in rows], infid) if len(rows) > 1 else float("nan")}
        _emit(ctx.obj, _report("boson", config, result, rows))
        return
    rep = boson_report(ncut, total_time, steps, order, eps, eps, delta, backend)
    if no_timing:
        rep.pop("wall_time_ms")
    if state_out:
        h = BandedHamiltonian.boson(ncut)
        plan = TrotterPlan.from_time(total_time, steps, order)
        sp = plan_sqrt_rotation(ncut, plan.tau, eps, eps, delta) if backend == "qsp" and steps else None
        state, _ = trotter_simulate(h, plan, sp, None, backend)
        write_matrix(state_out, state.amplitudes)
    _emit(ctx.obj, _report("boson", config, rep))


if __name__ == "__main__":  # pragma: no cover
    main()
