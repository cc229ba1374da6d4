"""
Command line interface.

Every command prints one JSON document {"config": ..., "result": ...} with sorted keys and
floats written with 17 significant digits, so identical inputs and seeds give identical
bytes. Exit codes: 0 success, 1 computation failure, 2 usage error or malformed input.
"""
import json
import logging
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import click
import numpy as np
from pydantic import BaseModel, ValidationError

from qmoment import logger
from qmoment.catalog import catalog
from qmoment.config import AtlasOptions, FlowOptions, WitnessOptions, settings
from qmoment.critical_atlas import enumerate_B, expand_permutations, is_critical
from qmoment.errors import QMomentError, UnknownStateError
from qmoment.lu_equiv import LUMode, counterexample_report, lu_decide
from qmoment.mixed_orbits import SCAN_HEADER, cc_simplex_scan, cc_state, orbit_report
from qmoment.models import DensityFile, DensityMatrix, GroupSpec, PolytopeMembership, PureState, RunConfig
from qmoment.momentum_map import (
    kirwan_contains, kirwan_inequalities, mean_linear_entropy, momentum, norm_mu_squared, psi, reduced_space_dim,
)
from qmoment.numkit import eigh_desc
from qmoment.slocc_flow import (
    classify_slocc_3qubit, flow_to_critical, ghz_to_w_demo, local_rank_profile, null_cone_test, polytope_sample,
    three_tangle, write_sample_csv,
)
from qmoment.tensor_state import density_from_file, load_state_json, reduced_blocks

# ============================== serialization ==============================


def _plain(obj: Any) -> Any:
    if isinstance(obj, BaseModel):
        return _plain(obj.model_dump(mode="json"))
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if hasattr(obj, "value") and isinstance(obj.value, str):
        return obj.value
    return obj


def _encode(obj: Any) -> str:
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        if not np.isfinite(obj):
            return "null"
        return format(obj + 0.0, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, list):
        return "[" + ", ".join(_encode(v) for v in obj) + "]"
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(k)}: {_encode(obj[k])}" for k in sorted(obj)) + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj: Any) -> str:
    """Deterministic JSON: sorted keys, floats with 17 significant digits."""
    return _encode(_plain(obj))


# ============================== parameter types ==============================


def _remember(ctx: Optional[click.Context], param: Optional[click.Parameter], value: str) -> None:
    if ctx is not None and param is not None:
        ctx.meta.setdefault("qmoment.sources", {})[param.name] = value


def _describe_validation(e: ValidationError) -> str:
    err = e.errors()[0]
    loc = ".".join(str(x) for x in err["loc"]) or "<root>"
    return f"field '{loc}': {err['msg']}"


class StateParam(click.ParamType):
    """A StateFile JSON path, or the name of a catalog state."""

    name = "state"

    def convert(self, value, param, ctx) -> PureState:
        if isinstance(value, PureState):
            return value
        _remember(ctx, param, value)
        path = Path(value)
        if not path.exists():
            try:
                return catalog.get(value)
            except UnknownStateError:
                self.fail(f"'{value}' is neither a file nor a catalog state", param, ctx)
        try:
            return load_state_json(path.read_text())
        except OSError as e:
            self.fail(f"cannot read {value}: {e.strerror}", param, ctx)
        except json.JSONDecodeError as e:
            self.fail(f"malformed JSON in {value} at line {e.lineno} column {e.colno}: {e.msg}", param, ctx)
        except ValidationError as e:
            self.fail(f"invalid state file {value}: {_describe_validation(e)}", param, ctx)
        except QMomentError as e:
            self.fail(f"invalid state in {value}: {e.message}", param, ctx)


class DensityParam(click.ParamType):
    """A DensityFile JSON path, or cc:p00,p01,p10,p11 for a diagonal two-qubit state."""

    name = "density"

    def convert(self, value, param, ctx) -> DensityMatrix:
        if isinstance(value, DensityMatrix):
            return value
        _remember(ctx, param, value)
        try:
            if value.startswith("cc:"):
                return cc_state([float(x) for x in value[3:].split(",")])
            return density_from_file(DensityFile.model_validate(json.loads(Path(value).read_text())))
        except OSError as e:
            self.fail(f"cannot read {value}: {e.strerror}", param, ctx)
        except json.JSONDecodeError as e:
            self.fail(f"malformed JSON in {value} at line {e.lineno} column {e.colno}: {e.msg}", param, ctx)
        except ValidationError as e:
            self.fail(f"invalid density file {value}: {_describe_validation(e)}", param, ctx)
        except (QMomentError, ValueError) as e:
            self.fail(f"invalid density matrix {value}: {e}", param, ctx)


class FloatList(click.ParamType):
    name = "floats"

    def convert(self, value, param, ctx) -> List[float]:
        if isinstance(value, list):
            return value
        try:
            return [float(Fraction(x.strip())) for x in value.split(",")]
        except ValueError:
            self.fail(f"expected comma-separated numbers, got '{value}'", param, ctx)


STATE = StateParam()
DENSITY = DensityParam()
FLOATS = FloatList()


# ============================== output ==============================


def run_config(ctx: click.Context, output: Optional[str] = None) -> RunConfig:
    sources = ctx.meta.get("qmoment.sources", {})
    args = {k: sources.get(k, v) for k, v in ctx.params.items() if k != "output"}
    return RunConfig(
        command=ctx.info_name,
        args=_plain(args),
        seed=ctx.obj["seed"],
        tolerances=settings.TOLERANCES,
        output=output,
    )


def config_comment(ctx: click.Context, output: Optional[str] = None) -> str:
    """The run config as one CSV comment line."""
    return "# config: " + dumps(run_config(ctx, output))


def emit(ctx: click.Context, result: Any, output: Optional[str] = None) -> None:
    text = dumps({"config": run_config(ctx, output), "result": result})
    if output:
        Path(output).write_text(text + "\n")
        logger.info(f"wrote {output}")
    else:
        click.echo(text)


class QMomentGroup(click.Group):
    """Maps library failures to exit 1 and, with --json-errors, reports every error as JSON."""

    def invoke(self, ctx: click.Context):
        try:
            return super().invoke(ctx)
        except QMomentError as e:
            logger.debug(f"{e.kind}: {e.message}")
            self._report(ctx, e.kind, e.message, _plain(e.detail) if e.detail is not None else None)
            ctx.exit(1)
        except click.ClickException as e:
            if not (ctx.obj or {}).get("json_errors"):
                raise
            self._report(ctx, "usage_error", e.format_message(), None)
            ctx.exit(e.exit_code)

    @staticmethod
    def _report(ctx: click.Context, kind: str, message: str, detail: Any) -> None:
        if (ctx.obj or {}).get("json_errors"):
            click.echo(dumps({"error": kind, "message": message, "detail": detail}), err=True)
        else:
            click.echo(f"Error: {message}", err=True)


@click.group(cls=QMomentGroup)
@click.option("--seed", type=int, default=None, help="Random seed (default: the configured fixed seed).")
@click.option("--json-errors", is_flag=True, help="Report errors on stderr as JSON objects.")
@click.option("--verbose", "-v", is_flag=True, help="Debug logging on stderr.")
@click.pass_context
def cli(ctx: click.Context, seed: Optional[int], json_errors: bool, verbose: bool):
    """Momentum-map classification of multipartite quantum states."""
    level = logging.DEBUG if verbose else getattr(logging, settings.LOG_LEVEL.upper(), logging.WARNING)
    logging.basicConfig(stream=sys.stderr, level=level, format="%(levelname)s %(name)s: %(message)s", force=True)
    ctx.obj = {"seed": settings.SEED if seed is None else seed, "json_errors": json_errors}


output_option = click.option(
    "--output", "-o", "--json", "output", type=click.Path(dir_okay=False), default=None, help="Write to a file."
)


def _override_seed(ctx: click.Context, param: click.Parameter, value: Optional[int]) -> Optional[int]:
    if value is not None:
        ctx.obj["seed"] = value
    return value


seed_option = click.option(
    "--seed", type=int, default=None, expose_value=False, callback=_override_seed,
    help="Random seed for this command, overriding the group option.",
)
strict_option = click.option("--strict", is_flag=True, help="Fail with exit 1 when the budget runs out.")


# ============================== momentum map ==============================


@cli.command(name="momentum")
@click.argument("state", type=STATE)
@output_option
@click.pass_context
def momentum_cmd(ctx, state: PureState, output):
    """Shifted reduced density matrices m_k = rho_k - I/N_k."""
    emit(ctx, {
        "blocks": momentum(state),
        "norm_mu_sq": norm_mu_squared(state),
        "mean_linear_entropy": mean_linear_entropy(state),
    }, output)


@cli.command(name="psi")
@click.argument("state", type=STATE)
@output_option
@click.pass_context
def psi_cmd(ctx, state: PureState, output):
    """Sorted shifted spectra (one array per subsystem)."""
    point = psi(state)
    result = {"lambdas": point.lambdas}
    if state.sector.is_qubits:
        result["qubit_lambdas"] = point.qubit_lambdas
    emit(ctx, result, output)


def _lambdas(state: Optional[PureState], lambdas: Optional[List[float]]) -> List[float]:
    if (state is None) == (lambdas is None):
        raise click.UsageError("give exactly one of STATE or --lambdas")
    if state is not None:
        if not state.sector.is_qubits:
            raise click.UsageError("Kirwan inequalities are implemented for qubits")
        return psi(state).qubit_lambdas
    return lambdas


@cli.command(name="polytope")
@click.argument("state", type=STATE, required=False)
@click.option("--lambdas", type=FLOATS, default=None, help="Per-qubit lambdas, e.g. 1/4,1/4,1/4.")
@output_option
@click.pass_context
def polytope_cmd(ctx, state, lambdas, output):
    """Kirwan polytope membership for qubits."""
    lam = _lambdas(state, lambdas)
    emit(ctx, {
        "lambdas": lam,
        "membership": kirwan_contains(lam, len(lam)),
        "slacks": kirwan_inequalities(lam, len(lam)),
    }, output)


@cli.command(name="dim")
@click.argument("state", type=STATE, required=False)
@click.option("--lambdas", type=FLOATS, default=None)
@output_option
@click.pass_context
def dim_cmd(ctx, state, lambdas, output):
    """Dimension of the reduced space over a point of the polytope."""
    lam = _lambdas(state, lambdas)
    emit(ctx, reduced_space_dim(lam, len(lam)), output)


# ============================== critical atlas ==============================


@cli.command(name="critical")
@click.option("--qubits", "n_qubits", type=click.IntRange(2, 5), required=True)
@click.option("--max-size", type=click.IntRange(1), default=None, help="Largest weight subset enumerated.")
@click.option("--all", "show_all", is_flag=True, help="Include unrealizable candidates.")
@click.option("--restarts", type=click.IntRange(1), default=None, help="Witness restarts per candidate.")
@click.option("--workers", type=click.IntRange(1), default=None)
@click.option("--expand", is_flag=True, help="List every qubit placement of each value.")
@seed_option
@strict_option
@output_option
@click.pass_context
def critical_cmd(ctx, n_qubits, max_size, show_all, restarts, workers, expand, strict, output):
    """Minimal weight combinations beta, their critical subspaces and witnesses."""
    atlas_opts = AtlasOptions.model_validate({**settings.ATLAS.model_dump(), "workers": workers or settings.ATLAS.workers})
    witness_opts = WitnessOptions.model_validate({**settings.WITNESS.model_dump(), "restarts": restarts or settings.WITNESS.restarts})
    atlas = enumerate_B(
        n_qubits, opts=atlas_opts, witness_opts=witness_opts, seed=ctx.obj["seed"], max_size=max_size, strict=strict
    )
    values = []
    for value in atlas.values:
        if not (show_all or value.realizable):
            continue
        entry = {
            "beta": value.beta,
            "norm_sq": value.norm_sq,
            "support_size": len(value.support),
            "realizable": value.realizable,
        }
        if value.witness is not None:
            entry["witness"] = value.witness.amplitudes
        if expand:
            entry["placements"] = expand_permutations(value.beta)
        values.append(entry)
    emit(ctx, {"n_qubits": n_qubits, "complete": atlas.complete, "subsets_checked": atlas.subsets_checked,
               "values": values}, output)


@cli.command(name="check-critical")
@click.argument("state", type=STATE)
@click.pass_context
def check_critical_cmd(ctx, state):
    """Is mu([v]).v proportional to v?"""
    emit(ctx, is_critical(state))


# ============================== SLOCC ==============================


def _stratum_summary(stratum) -> Dict[str, Any]:
    return {
        "beta": stratum.beta.beta if stratum.beta is not None else None,
        "matched": stratum.matched,
        "limit_lambdas": stratum.limit_spectra.lambdas,
        "limit_state": stratum.limit_state.amplitudes,
        "iterations": stratum.iterations,
        "final_norm_mu_sq": stratum.final_norm_mu_sq,
        "residual": stratum.residual,
        "converged": stratum.converged,
        "semistable": stratum.semistable,
    }


@cli.command(name="flow")
@click.argument("state", type=STATE)
@click.option("--perturb", type=click.FloatRange(0.0), default=0.0, help="Seeded random kick before flowing.")
@click.option("--max-iter", type=click.IntRange(1), default=None)
@seed_option
@strict_option
@output_option
@click.pass_context
def flow_cmd(ctx, state, perturb, max_iter, strict, output):
    """Gradient flow of |mu|^2 to a critical point; reports the stratum."""
    opts = settings.FLOW if max_iter is None else FlowOptions.model_validate({**settings.FLOW.model_dump(), "max_iter": max_iter})
    stratum = flow_to_critical(state, opts=opts, perturb=perturb, seed=ctx.obj["seed"], strict=strict)
    emit(ctx, _stratum_summary(stratum), output)


@cli.command(name="nullcone")
@click.argument("state", type=STATE)
@output_option
@click.pass_context
def nullcone_cmd(ctx, state, output):
    """Semistable or unstable, with the stratum of unstable states."""
    verdict = null_cone_test(state)
    emit(ctx, {
        "status": verdict.status,
        "infimum": verdict.infimum,
        "iterations": verdict.iterations,
        "beta": verdict.beta,
        "converged": verdict.converged,
    }, output)


@cli.command(name="classify3")
@click.argument("state", type=STATE)
@output_option
@click.pass_context
def classify3_cmd(ctx, state, output):
    """One of the six three-qubit SLOCC classes."""
    emit(ctx, {
        "class": classify_slocc_3qubit(state),
        "local_ranks": local_rank_profile(state),
        "three_tangle": three_tangle(state),
    }, output)


@cli.command(name="ghz-to-w")
@click.option("--a", "values", type=FLOATS, default="1,0.5,0.1,0.01", show_default=True)
@click.pass_context
def ghz_to_w_cmd(ctx, values):
    """Fidelity with W3 of A(a)^{x3} GHZ3 as a shrinks to 0."""
    emit(ctx, [{"a": a, "fidelity": ghz_to_w_demo(a)} for a in values])


@cli.command(name="polytope-sample")
@click.argument("state", type=STATE)
@click.option("-n", "n_samples", type=click.IntRange(1), default=1000, show_default=True)
@click.option("--csv", "csv_path", "-o", type=click.Path(dir_okay=False), default=None, help="Write the cloud as CSV.")
@seed_option
@click.pass_context
def polytope_sample_cmd(ctx, state, n_samples, csv_path):
    """Spectra of random SLOCC images of the state."""
    sample = polytope_sample(state, n_samples, seed=ctx.obj["seed"])
    if csv_path:
        with open(csv_path, "w", newline="") as fh:
            fh.write(config_comment(ctx, csv_path) + "\n")
            write_sample_csv(sample, fh)
    inside = sum(
        kirwan_contains(p, state.n_slots) != PolytopeMembership.outside for p in sample.points
    ) if state.sector.is_qubits and state.n_slots >= 2 else None
    emit(ctx, {
        "n": len(sample.points),
        "min_norm_sq": sample.min_norm_sq,
        "in_polytope": inside,
        "rejected": sample.rejected,
        "csv": csv_path,
    })


# ============================== LU ==============================


@cli.command(name="luequiv")
@click.argument("a", type=STATE)
@click.argument("b", type=STATE)
@click.option("--mode", type=click.Choice([m.value for m in LUMode]), default="auto", show_default=True)
@output_option
@click.pass_context
def luequiv_cmd(ctx, a, b, mode, output):
    """Local-unitary equivalence verdict with evidence."""
    emit(ctx, lu_decide(a, b, LUMode(mode)), output)


@cli.command(name="lu-counterexample")
@output_option
@click.pass_context
def lu_counterexample_cmd(ctx, output):
    """Equal spectra, different three-tangle."""
    emit(ctx, counterexample_report(), output)


# ============================== mixed states ==============================


@cli.command(name="ccq")
@click.argument("rho", type=DENSITY)
@click.option("--group", type=click.Choice(["full", "a-only"]), default="full", show_default=True)
@output_option
@click.pass_context
def ccq_cmd(ctx, rho: DensityMatrix, group, output):
    """Orbit dimension, omega rank, D, Euler characteristic and CQ/CC verdicts."""
    spec = GroupSpec.full(list(rho.dims)) if group == "full" else GroupSpec.first_only(list(rho.dims))
    emit(ctx, orbit_report(rho, spec), output)


@cli.command(name="ccq-scan")
@click.option("--grid", type=click.IntRange(1), default=10, show_default=True)
@click.option("--workers", type=click.IntRange(1), default=1)
@output_option
@click.pass_context
def ccq_scan_cmd(ctx, grid, workers, output):
    """CSV scan of the two-qubit CC simplex, after a comment line holding the run config."""
    rows = cc_simplex_scan(grid, workers)
    lines = [config_comment(ctx, output), ",".join(SCAN_HEADER)]
    for row in rows:
        lines.append(",".join(format(x, ".17g") if isinstance(x, float) else str(x) for x in row))
    text = "\n".join(lines) + "\n"
    if output:
        Path(output).write_text(text)
    else:
        click.echo(text, nl=False)


# ============================== reference states ==============================


def critical_states_report() -> List[Dict[str, Any]]:
    """Computed against listed shifted spectra and E for the nine four-qubit critical states."""
    rows = []
    for row in catalog.critical_state_rows():
        blocks = [eigh_desc(rho - np.eye(2) / 2)[0] for rho in reduced_blocks(row.state)]
        computed = sorted(float(b[0]) for b in blocks)
        expected = sorted(x for _, x in row.expected_diagonals)
        entropy = mean_linear_entropy(row.state)
        target = row.expected_entropy[0] / row.expected_entropy[1]
        check = is_critical(row.state)
        rows.append({
            "name": row.name,
            "computed": computed,
            "expected": expected,
            "entropy": entropy,
            "expected_entropy": f"{row.expected_entropy[0]}/{row.expected_entropy[1]}",
            "critical": check.critical,
            "match": bool(np.max(np.abs(np.subtract(computed, expected))) < 1e-10 and abs(entropy - target) < 1e-12),
        })
    return rows


@cli.command(name="table2")
@click.option("--text", "as_text", is_flag=True, help="Aligned table instead of JSON.")
@click.pass_context
def table2_cmd(ctx, as_text):
    """The nine four-qubit critical states: computed vs listed spectra and E."""
    rows = critical_states_report()
    if as_text:
        click.echo(f"{'state':<8} {'lambda (sorted)':<44} {'E':>10} {'listed':>7}  ok")
        for r in rows:
            lam = " ".join(f"{x:.6f}" for x in r["computed"])
            click.echo(f"{r['name']:<8} {lam:<44} {r['entropy']:>10.6f} {r['expected_entropy']:>7}  {'yes' if r['match'] else 'NO'}")
    else:
        emit(ctx, rows)
    failed = [r["name"] for r in rows if not r["match"]]
    if failed:
        raise QMomentError(f"rows do not match: {', '.join(failed)}")


cli.add_command(table2_cmd, name="critical-states")


@cli.command(name="states")
@click.argument("name", required=False)
@click.pass_context
def states_cmd(ctx, name):
    """List catalog states, or dump one as a state file."""
    if name is None:
        emit(ctx, catalog.names())
        return
    click.echo(dumps(catalog.get(name).to_file()))


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        # without standalone mode click returns the code of ctx.exit() instead of raising
        code = cli.main(args=list(argv) if argv is not None else None, prog_name="qmoment", standalone_mode=False)
        return code if isinstance(code, int) else 0
    except click.exceptions.Exit as e:
        return e.exit_code
    except click.ClickException as e:
        e.show()
        return e.exit_code
    except click.Abort:
        return 1
