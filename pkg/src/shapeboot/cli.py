"""Command-line client for the analysis service.

Subcommands build the same request models the HTTP endpoints accept and
dispatch them either in-process (the default) or to a running server via
``--server URL``. All logic lives behind the service layer; this module only
parses flags and renders results.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 degenerate
sample.
"""

from __future__ import annotations

import csv
import io
import json
import sys
import urllib.error
import urllib.request

import click
from pydantic import ValidationError

from .analysis import ConfigError, render_report_json
from .bootstrap import ResampleDegeneracyError
from .dataset import CsvError, UnknownColumn, format_number
from .hypotheses import PredicateError
from .ols import DegenerateDesign, UnknownTerm
from .service import handlers
from .service.schemas import (
    AnalyzeRequest,
    AnalyzeResponse,
    CiTargetBody,
    CoverageRequest,
    CoverageResponse,
    CurvesRequest,
    DataSource,
    DirectionalBody,
    GridBody,
    HypothesisBody,
    ModelSpecBody,
    ResamplePlanBody,
    SynthRequest,
    TableResponse,
)

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_DEGENERATE = 4

_EXIT_BY_KIND = {"config": EXIT_CONFIG, "data": EXIT_DATA, "degenerate": EXIT_DEGENERATE}


class RemoteServiceError(Exception):
    def __init__(self, kind: str, message: str):
        self.kind = kind
        super().__init__(message)


def _fail(message: str, code: int):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _run_guarded(action):
    try:
        return action()
    except RemoteServiceError as exc:
        _fail(str(exc), _EXIT_BY_KIND.get(exc.kind, EXIT_CONFIG))
    except (ConfigError, PredicateError, UnknownTerm, ValidationError, ValueError) as exc:
        _fail(str(exc), EXIT_CONFIG)
    except (CsvError, UnknownColumn, FileNotFoundError, IsADirectoryError) as exc:
        _fail(str(exc), EXIT_DATA)
    except (DegenerateDesign, ResampleDegeneracyError) as exc:
        _fail(str(exc), EXIT_DEGENERATE)


def _post(server: str, endpoint: str, payload: dict) -> dict:
    url = server.rstrip("/") + endpoint
    request = urllib.request.Request(
        url,
        data=json.dumps(payload).encode("utf-8"),
        headers={"Content-Type": "application/json"},
        method="POST",
    )
    try:
        with urllib.request.urlopen(request) as response:
            return json.loads(response.read().decode("utf-8"))
    except urllib.error.HTTPError as err:
        try:
            body = json.loads(err.read().decode("utf-8") or "{}")
        except json.JSONDecodeError:
            body = {}
        error = body.get("error")
        if error:
            raise RemoteServiceError(
                error.get("kind", "config"), error.get("message", "server error")
            ) from None
        raise RemoteServiceError("config", f"server rejected request: {body or err}") from None
    except urllib.error.URLError as err:
        raise RemoteServiceError("config", f"cannot reach server: {err.reason}") from None


def _data_source(path: str, server: str | None) -> DataSource:
    # remote servers get the file contents inline; local runs read the path
    if server is None:
        return DataSource(path=path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return DataSource(csv_text=fh.read())
    except OSError as exc:
        raise CsvError(f"cannot read {path}: {exc}") from None


def _write_output(text: str, out: str | None):
    if out is None:
        click.echo(text, nl=False)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


# --- flag parsing helpers ---------------------------------------------------


def _split_list(raw: str) -> list[str]:
    return [part.strip() for part in raw.split(",") if part.strip()]


def _float_list(raw: str, flag: str) -> list[float]:
    try:
        return [float(part) for part in _split_list(raw)]
    except ValueError:
        raise click.UsageError(f"{flag} expects comma-separated numbers, got {raw!r}")


def _parse_hypothesis(raw: str) -> HypothesisBody:
    if "=" in raw:
        name, text = raw.split("=", 1)
        name, text = name.strip(), text.strip()
        if not name or not text:
            raise click.UsageError(f"--hypothesis expects NAME=PREDICATE, got {raw!r}")
        return HypothesisBody(name=name, predicate=text)
    return HypothesisBody(name=raw.strip())


def _parse_ci(raw: str) -> CiTargetBody:
    parts = [p.strip() for p in raw.split(",")]
    if len(parts) == 1:
        return CiTargetBody(coefficient=parts[0])
    if len(parts) == 2:
        try:
            return CiTargetBody(coefficient=parts[0], level=float(parts[1]))
        except ValueError:
            pass
    raise click.UsageError(f"--ci expects COEF or COEF,LEVEL, got {raw!r}")


def _parse_directional(raw: str) -> DirectionalBody:
    parts = [p.strip() for p in raw.split(",")]
    if len(parts) == 2 and parts[1] in ("negative", "positive"):
        return DirectionalBody(coefficient=parts[0], direction=parts[1])
    raise click.UsageError(f"--directional expects COEF,negative|positive, got {raw!r}")


def _parse_adjust(values) -> dict[str, float] | None:
    if not values:
        return None
    out = {}
    for raw in values:
        if "=" not in raw:
            raise click.UsageError(f"--adjust expects NAME=VALUE, got {raw!r}")
        name, value = raw.split("=", 1)
        try:
            out[name.strip()] = float(value)
        except ValueError:
            raise click.UsageError(f"--adjust value is not a number: {raw!r}")
    return out


def _parse_grid(raw: str) -> GridBody:
    parts = raw.split(":")
    if len(parts) == 3:
        try:
            return GridBody(lo=float(parts[0]), hi=float(parts[1]), step=float(parts[2]))
        except ValueError:
            pass
    raise click.UsageError(f"--curve-grid expects MIN:MAX:STEP, got {raw!r}")


def _parse_range(raw: str) -> tuple[float, float]:
    parts = raw.split(":")
    if len(parts) == 2:
        try:
            return float(parts[0]), float(parts[1])
        except ValueError:
            pass
    raise click.UsageError(f"--x-range expects LO:HI, got {raw!r}")


# --- renderers ----------------------------------------------------------------


def _dump_json(payload: dict) -> str:
    return json.dumps(payload, indent=2, allow_nan=False) + "\n"


def _table_csv(table: TableResponse) -> str:
    lines = [",".join(table.header)]
    for row in table.rows:
        lines.append(",".join(format_number(v) for v in row))
    return "\n".join(lines) + "\n"


def _report_csv(report: dict) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["section", "name", "field", "value"])

    def emit(section, name, mapping, skip=()):
        for key, value in mapping.items():
            if key in skip:
                continue
            if isinstance(value, list):
                value = ";".join(str(v) for v in value)
            writer.writerow([section, name, key, value])

    emit("model", "", report["model"])
    emit("resampling", "", report["resampling"])
    for name, value in report["adjustment"].items():
        writer.writerow(["adjustment", name, "value", value])
    for row in report["coefficients"]:
        emit("coefficient", row["name"], row, skip=("name",))
    for row in report["hypotheses"]:
        emit("hypothesis", row["name"], row, skip=("name",))
    for row in report["directional"]:
        emit("directional", row["coefficient"], row, skip=("coefficient",))
    for i, note in enumerate(report["notes"]):
        writer.writerow(["note", str(i), "text", note])
    return buffer.getvalue()


def _coverage_csv(result: CoverageResponse) -> str:
    lines = ["field,value"]
    for key in ("reps", "level", "b", "seed", "true_curvature"):
        lines.append(f"{key},{format_number(getattr(result, key))}")
    for method in ("classical", "percentile"):
        cov = getattr(result, method)
        lines.append(f"{method}_covered,{cov.covered}")
        lines.append(f"{method}_coverage,{format_number(cov.coverage)}")
    return "\n".join(lines) + "\n"


# --- shared option groups -------------------------------------------------------


def model_options(fn):
    for option in reversed(
        [
            click.option("--data", "data_path", required=True, help="CSV file to analyze."),
            click.option("--response", required=True, help="Response column."),
            click.option("--focal", required=True, help="Focal predictor column."),
            click.option("--degree", default=2, show_default=True, help="Focal polynomial degree."),
            click.option(
                "--controls",
                default="",
                help="Comma-separated control columns.",
            ),
        ]
    ):
        fn = option(fn)
    return fn


def plan_options(fn):
    for option in reversed(
        [
            click.option("--resamples", "-b", default=1000, show_default=True, help="Replicates."),
            click.option("--seed", default=0, show_default=True, help="64-bit resampling seed."),
            click.option(
                "--max-redraws",
                default=100,
                show_default=True,
                help="Redraw budget per replicate for degenerate resamples.",
            ),
        ]
    ):
        fn = option(fn)
    return fn


def population_options(fn):
    for option in reversed(
        [
            click.option("--n", "n", type=int, required=True, help="Sample size."),
            click.option("--beta0", type=float, default=0.0, show_default=True),
            click.option("--beta1", type=float, required=True),
            click.option("--beta2", type=float, required=True),
            click.option("--noise-sd", type=float, required=True),
            click.option("--x-range", default="0:30", show_default=True, help="Focal range LO:HI."),
            click.option("--gammas", default="", help="Comma-separated control coefficients."),
            click.option("--control-means", default="", help="Comma-separated control means."),
            click.option("--control-sds", default="", help="Comma-separated control sds."),
            click.option("--control-names", default="", help="Comma-separated control names."),
            click.option("--response-name", default="y", show_default=True),
            click.option("--focal-name", default="x", show_default=True),
        ]
    ):
        fn = option(fn)
    return fn


def output_options(default_format):
    def wrap(fn):
        for option in reversed(
            [
                click.option(
                    "--format",
                    "output_format",
                    type=click.Choice(["json", "csv"]),
                    default=default_format,
                    show_default=True,
                ),
                click.option("--out", default=None, help="Write here instead of stdout."),
                click.option("--server", default=None, help="Dispatch to this service URL."),
            ]
        ):
            fn = option(fn)
        return fn

    return wrap


def _synth_request(
    n, beta0, beta1, beta2, noise_sd, x_range, gammas, control_means,
    control_sds, control_names, response_name, focal_name, seed,
) -> SynthRequest:
    x_lo, x_hi = _parse_range(x_range)
    return SynthRequest(
        n=n,
        beta0=beta0,
        beta1=beta1,
        beta2=beta2,
        noise_sd=noise_sd,
        x_lo=x_lo,
        x_hi=x_hi,
        gammas=_float_list(gammas, "--gammas"),
        control_means=_float_list(control_means, "--control-means"),
        control_sds=_float_list(control_sds, "--control-sds"),
        control_names=_split_list(control_names),
        response_name=response_name,
        focal_name=focal_name,
        seed=seed,
    )


@click.group()
def main():
    """Bootstrap confidence levels for hypotheses about regression shape."""


@main.command()
@model_options
@plan_options
@click.option(
    "--hypothesis",
    "hypothesis_flags",
    multiple=True,
    help="NAME=PREDICATE, or a built-in name; replaces the default set.",
)
@click.option("--ci", "ci_flags", multiple=True, help="COEF or COEF,LEVEL.")
@click.option("--ci-level", default=0.95, show_default=True, help="Default interval level.")
@click.option(
    "--directional",
    "directional_flags",
    multiple=True,
    help="COEF,negative|positive: directional confidence from the coefficient p-value.",
)
@click.option("--adjust", "adjust_flags", multiple=True, help="NAME=VALUE control adjustment.")
@click.option("--workers", default=None, type=int, help="Bootstrap worker threads.")
@output_options("json")
def analyze(
    data_path, response, focal, degree, controls, resamples, seed, max_redraws,
    hypothesis_flags, ci_flags, ci_level, directional_flags, adjust_flags,
    workers, output_format, out, server,
):
    """Fit, bootstrap, and report confidence levels and intervals."""

    def action():
        request = AnalyzeRequest(
            data=_data_source(data_path, server),
            model=ModelSpecBody(
                response=response, focal=focal, degree=degree, controls=_split_list(controls)
            ),
            plan=ResamplePlanBody(
                b=resamples, seed=seed, max_redraws_per_replicate=max_redraws
            ),
            hypotheses=(
                [_parse_hypothesis(h) for h in hypothesis_flags] if hypothesis_flags else None
            ),
            ci=[_parse_ci(c) for c in ci_flags],
            ci_level=ci_level,
            directional=[_parse_directional(d) for d in directional_flags],
            adjust=_parse_adjust(adjust_flags),
            workers=workers,
        )
        if server is None:
            report = handlers.handle_analyze(request).report
        else:
            report = AnalyzeResponse.model_validate(
                _post(server, "/analyze", request.model_dump(mode="json"))
            ).report
        text = render_report_json(report) if output_format == "json" else _report_csv(report)
        _write_output(text, out)

    _run_guarded(action)


@main.command()
@model_options
@plan_options
@click.option("--curve-grid", required=True, help="Focal grid MIN:MAX:STEP.")
@click.option("--spaghetti", default=3, show_default=True, help="Replicate curves to export.")
@click.option("--adjust", "adjust_flags", multiple=True, help="NAME=VALUE control adjustment.")
@output_options("csv")
def curves(
    data_path, response, focal, degree, controls, resamples, seed, max_redraws,
    curve_grid, spaghetti, adjust_flags, output_format, out, server,
):
    """Export adjusted prediction curves for the sample and resamples."""

    def action():
        request = CurvesRequest(
            data=_data_source(data_path, server),
            model=ModelSpecBody(
                response=response, focal=focal, degree=degree, controls=_split_list(controls)
            ),
            plan=ResamplePlanBody(
                b=resamples, seed=seed, max_redraws_per_replicate=max_redraws
            ),
            grid=_parse_grid(curve_grid),
            spaghetti=spaghetti,
            adjust=_parse_adjust(adjust_flags),
        )
        if server is None:
            table = handlers.handle_curves(request)
        else:
            table = TableResponse.model_validate(
                _post(server, "/curves", request.model_dump(mode="json"))
            )
        text = _table_csv(table) if output_format == "csv" else _dump_json(table.model_dump())
        _write_output(text, out)

    _run_guarded(action)


@main.command()
@population_options
@click.option("--seed", default=0, show_default=True, help="Generation seed.")
@output_options("csv")
def synth(
    n, beta0, beta1, beta2, noise_sd, x_range, gammas, control_means, control_sds,
    control_names, response_name, focal_name, seed, output_format, out, server,
):
    """Generate a seeded sample from a known quadratic population."""

    def action():
        request = _synth_request(
            n, beta0, beta1, beta2, noise_sd, x_range, gammas, control_means,
            control_sds, control_names, response_name, focal_name, seed,
        )
        if server is None:
            table = handlers.handle_synth(request)
        else:
            table = TableResponse.model_validate(
                _post(server, "/synth", request.model_dump(mode="json"))
            )
        text = _table_csv(table) if output_format == "csv" else _dump_json(table.model_dump())
        _write_output(text, out)

    _run_guarded(action)


@main.command()
@population_options
@click.option("--reps", default=200, show_default=True, help="Monte Carlo repetitions.")
@click.option("--level", default=0.95, show_default=True, help="Interval level.")
@click.option("--resamples", "-b", default=500, show_default=True, help="Replicates per rep.")
@click.option("--seed", default=0, show_default=True, help="Master study seed.")
@click.option("--workers", default=None, type=int, help="Bootstrap worker threads.")
@output_options("json")
def coverage(
    n, beta0, beta1, beta2, noise_sd, x_range, gammas, control_means, control_sds,
    control_names, response_name, focal_name, reps, level, resamples, seed,
    workers, output_format, out, server,
):
    """Check interval coverage of the true curvature on synthetic samples."""

    def action():
        request = CoverageRequest(
            population=_synth_request(
                n, beta0, beta1, beta2, noise_sd, x_range, gammas, control_means,
                control_sds, control_names, response_name, focal_name, 0,
            ),
            reps=reps,
            level=level,
            b=resamples,
            seed=seed,
            workers=workers,
        )
        if server is None:
            result = handlers.handle_coverage(request)
        else:
            result = CoverageResponse.model_validate(
                _post(server, "/coverage", request.model_dump(mode="json"))
            )
        text = (
            _dump_json(result.model_dump()) if output_format == "json" else _coverage_csv(result)
        )
        _write_output(text, out)

    _run_guarded(action)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    uvicorn.run("shapeboot.service.app:app", host=host, port=port)


if __name__ == "__main__":
    main()
