"""Command-line entry points.

``generate``, ``analyze``, and ``bench`` run locally against the library;
``serve`` starts the HTTP service; ``session`` and ``query`` are thin clients
that drive a running service over its JSON API. Exit codes: 0 ok, 2 config
error, 3 data error, 4 rank deficiency, 5 verify mismatch.
"""

from __future__ import annotations

import functools
import json
import math
import os
import statistics
import tempfile
import time

import click
import httpx

from .covariance import CovarianceType
from .design import ModelSpec, spec_from_dict
from .effects import EffectEstimate, EffectQuery
from .errors import LmfxError, SpecError
from .generate import GenerateConfig, generate_to_files
from .pipeline import Analysis, analyze_file, verify_query

_EXIT_BY_STATUS = {400: 2, 404: 3, 409: 2, 422: 4, 429: 2}


def _run(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except LmfxError as exc:
            click.echo(f"error: {exc}", err=True)
            raise SystemExit(exc.exit_code)
        except httpx.HTTPError as exc:
            click.echo(f"error: service request failed: {exc}", err=True)
            raise SystemExit(1)

    return wrapper


@click.group()
def main():
    """Treatment-effect engine: generate, fit, query, serve."""


# ---------------------------------------------------------------- generate


@main.command()
@click.option("--users", type=int, required=True, help="Number of users.")
@click.option("--arms", type=int, default=2, show_default=True)
@click.option("--metrics", type=int, default=1, show_default=True)
@click.option(
    "--covariates",
    default="country:cat:8,device:cat:3",
    show_default=True,
    help="Comma list of name:cat:K / name:num covariate specs.",
)
@click.option("--periods", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option(
    "--effect",
    type=float,
    default=None,
    help="Force every non-control arm effect to this value (else random).",
)
@click.option("--noise", type=float, default=1.0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option(
    "--truth",
    type=click.Path(dir_okay=False),
    default=None,
    help="Truth sidecar path [default: OUT.truth.json].",
)
@_run
def generate(users, arms, metrics, covariates, periods, seed, effect, noise, out, truth):
    """Write a synthetic randomized experiment and its ground-truth sidecar."""
    cfg = GenerateConfig(
        users=users,
        arms=arms,
        metrics=metrics,
        covariates=covariates,
        periods=periods,
        seed=seed,
        effect=effect,
        noise=noise,
    )
    sidecar = generate_to_files(cfg, out, truth)
    click.echo(
        f"wrote {sidecar['rows']} rows ({arms} arms, {metrics} metrics) to {out}"
    )


# ----------------------------------------------------------------- analyze


def _load_spec_file(path: str) -> tuple[ModelSpec, list[str], dict | None]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except FileNotFoundError:
        raise SpecError(f"spec file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise SpecError(f"spec file is not valid JSON: {exc}") from None
    spec = spec_from_dict(obj)
    keys = list(obj.get("compression_keys", []))
    columns = obj.get("columns")
    return spec, keys, columns


_TABLE_COLUMNS = (
    ("outcome", 8),
    ("arm", 8),
    ("group", 16),
    ("estimate", 12),
    ("std_error", 12),
    ("statistic", 10),
    ("p_value", 10),
    ("ci_low", 12),
    ("ci_high", 12),
    ("n", 9),
    ("support", 12),
)


def _format_row(cell: EffectEstimate) -> dict[str, str]:
    return {
        "outcome": cell.outcome,
        "arm": cell.arm,
        "group": ",".join(str(v) for v in cell.group_key) or "-",
        "estimate": f"{cell.estimate:.6g}",
        "std_error": f"{cell.std_error:.6g}",
        "statistic": f"{cell.statistic:.4g}" if math.isfinite(cell.statistic) else "inf",
        "p_value": f"{cell.p_value:.4g}",
        "ci_low": f"{cell.ci_low:.6g}",
        "ci_high": f"{cell.ci_high:.6g}",
        "n": str(cell.n_group),
        "support": cell.arm_support,
    }


def _print_table(cells: list[EffectEstimate]) -> None:
    header = "".join(name.ljust(width) for name, width in _TABLE_COLUMNS)
    click.echo(header)
    click.echo("-" * len(header))
    for cell in cells:
        row = _format_row(cell)
        click.echo(
            "".join(row[name].ljust(width) for name, width in _TABLE_COLUMNS)
        )


def _queries(
    analysis: Analysis, outcomes, arms, grouping, covariance, level
) -> list[EffectQuery]:
    spec = analysis.spec
    chosen_outcomes = list(outcomes) or list(spec.outcomes)
    all_arms = [
        a for a in analysis.matrix.treatment_levels if a != analysis.matrix.reference
    ]
    chosen_arms = list(arms) or all_arms
    return [
        EffectQuery(
            outcome=o,
            arm=a,
            grouping=tuple(grouping),
            covariance=CovarianceType.parse(covariance),
            confidence_level=level,
        )
        for o in chosen_outcomes
        for a in chosen_arms
    ]


@main.command()
@click.option("--data", type=click.Path(dir_okay=False), required=True)
@click.option("--spec", "spec_path", type=click.Path(dir_okay=False), required=True)
@click.option("--outcome", "outcomes", multiple=True, help="Default: every outcome.")
@click.option("--arm", "arms", multiple=True, help="Default: every non-reference arm.")
@click.option(
    "--group-by",
    "group_by",
    multiple=True,
    help="CATE grouping column; repeat for multi-key cells.",
)
@click.option(
    "--covariance",
    default="homoskedastic",
    show_default=True,
    type=click.Choice([c.value for c in CovarianceType]),
)
@click.option("--level", type=float, default=0.95, show_default=True)
@click.option(
    "--extra-key",
    "extra_keys",
    multiple=True,
    help="Additional compression keys beyond the spec file's list.",
)
@click.option(
    "--no-compression",
    is_flag=True,
    help="Fit row-by-row instead of over compressed groups (diagnostic).",
)
@click.option(
    "--verify",
    is_flag=True,
    help="Also run the materialized reference path and require agreement.",
)
@click.option(
    "--json-out",
    type=click.Path(dir_okay=False),
    default=None,
    help="Write the JSON document here instead of stdout.",
)
@_run
def analyze(
    data,
    spec_path,
    outcomes,
    arms,
    group_by,
    covariance,
    level,
    extra_keys,
    no_compression,
    verify,
    json_out,
):
    """Fit one model over a CSV and print the requested effect estimates."""
    spec, file_keys, columns = _load_spec_file(spec_path)
    grouping = []
    for chunk in group_by:
        grouping.extend(g for g in chunk.split(",") if g)
    keys = list(dict.fromkeys(file_keys + list(extra_keys) + grouping))
    analysis = analyze_file(
        data,
        spec,
        extra_keys=tuple(keys),
        compression=not no_compression,
        schema_overrides=columns,
    )
    queries = _queries(analysis, outcomes, arms, grouping, covariance, level)

    cells: list[EffectEstimate] = []
    reports = []
    for q in queries:
        cells.extend(analysis.query(q))
        if verify:
            reports.append(verify_query(analysis, q))

    _print_table(cells)
    if verify:
        worst = max(r["max_abs_difference"] for r in reports)
        click.echo(
            f"verify: {len(reports)} queries agree with the reference path "
            f"(max |diff| {worst:.3e})"
        )
    document = {
        "diagnostics": analysis.diagnostics(),
        "effects": [c.to_dict() for c in cells],
    }
    payload = json.dumps(document, indent=2, sort_keys=True, default=str)
    if json_out:
        with open(json_out, "w", encoding="utf-8") as fh:
            fh.write(payload + "\n")
        click.echo(f"json written to {json_out}")
    else:
        click.echo(payload)


# ------------------------------------------------------------------- bench


def _parse_sizes(text: str) -> list[int]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            out.append(int(float(part)))
        except ValueError:
            raise SpecError(f"bad size {part!r}; use numbers like 1e5,1e6")
    if not out:
        raise SpecError("no benchmark sizes given")
    return out


def _memory_guard(n: int, metrics: int) -> None:
    # Rough peak estimate: generated frame + loaded dataset + sorted copies.
    needed = n * (metrics + 8) * 8 * 4
    total = os.sysconf("SC_PHYS_PAGES") * os.sysconf("SC_PAGE_SIZE")
    if needed > 0.8 * total:
        raise SpecError(
            f"benchmark at n={n} needs roughly {needed / 1e9:.1f} GB; "
            f"machine has {total / 1e9:.1f} GB"
        )


def _bench_one(n: int, arms: int, metrics: int, groups: int, seed: int, tmpdir: str):
    """Time every phase once at one size; returns {phase: seconds}."""
    from .generate import arm_names, metric_names

    path = os.path.join(tmpdir, f"bench_{n}.csv")
    cfg = GenerateConfig(
        users=n,
        arms=arms,
        metrics=metrics,
        covariates=f"country:cat:{groups},device:cat:4",
        seed=seed,
    )
    generate_to_files(cfg, path)

    spec = spec_from_dict(
        {
            "outcomes": metric_names(metrics),
            "treatment": {"column": "arm", "reference": "control"},
            "terms": [
                {"kind": "intercept"},
                {"kind": "treatment"},
                {"kind": "categorical", "column": "country"},
                {"kind": "categorical", "column": "device"},
            ],
        }
    )
    analysis = analyze_file(path, spec, extra_keys=("country",))
    timings = dict(analysis.timings)

    non_reference = arm_names(arms)[1:]
    t0 = time.perf_counter()
    ate_count = 0
    for metric in metric_names(metrics):
        for arm in non_reference:
            ate_count += len(analysis.query(EffectQuery(outcome=metric, arm=arm)))
    timings["ate_block"] = time.perf_counter() - t0
    assert ate_count == len(non_reference) * metrics

    t0 = time.perf_counter()
    cate_count = 0
    for metric in metric_names(metrics):
        for arm in non_reference:
            cate_count += len(
                analysis.query(
                    EffectQuery(outcome=metric, arm=arm, grouping=("country",))
                )
            )
    timings["cate_block"] = time.perf_counter() - t0
    assert cate_count == len(non_reference) * metrics * groups

    os.remove(path)
    os.remove(path + ".truth.json")
    counts = {
        "ate_estimates": ate_count,
        "cate_estimates": cate_count,
        "fit_count": analysis.fit_count,
    }
    return timings, counts


_PHASES = ("load", "matrix", "compress", "fit", "ate_block", "cate_block")


@main.command()
@click.option("--sizes", default="1e5,1e6", show_default=True)
@click.option("--arms", type=int, default=8, show_default=True)
@click.option("--metrics", type=int, default=10, show_default=True)
@click.option("--groups", type=int, default=10, show_default=True, help="CATE grouping levels.")
@click.option("--repeat", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(file_okay=False), required=True)
@_run
def bench(sizes, arms, metrics, groups, repeat, seed, out):
    """Time load/matrix/compress/fit plus ATE and CATE query blocks by size.

    The query blocks issue one ATE per (non-reference arm, metric) and one
    CATE per (arm, metric, group level); with the defaults that is 70 ATEs
    and 700 CATEs per repetition.
    """
    size_list = _parse_sizes(sizes)
    for n in size_list:
        _memory_guard(n, metrics)
    os.makedirs(out, exist_ok=True)

    rows = []
    runs = []
    with tempfile.TemporaryDirectory() as tmpdir:
        for n in size_list:
            for rep in range(repeat):
                timings, counts = _bench_one(
                    n, arms, metrics, groups, seed + rep, tmpdir
                )
                for phase in _PHASES:
                    rows.append((n, phase, timings[phase], rep))
                runs.append({"n": n, "repetition": rep, **counts})
                click.echo(
                    f"n={n} rep={rep}: "
                    + " ".join(f"{ph}={timings[ph]:.3f}s" for ph in _PHASES)
                )

    csv_path = os.path.join(out, "bench.csv")
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write("n,phase,seconds,repetition\n")
        for n, phase, seconds, rep in rows:
            fh.write(f"{n},{phase},{seconds:.6f},{rep}\n")

    meta = {
        "sizes": size_list,
        "arms": arms,
        "metrics": metrics,
        "groups": groups,
        "repeat": repeat,
        "seed": seed,
        "parallelism": {"processes": 1, "cpu_count": os.cpu_count()},
        "runs": runs,
    }
    with open(os.path.join(out, "meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")

    plot_path = os.path.join(out, "scaling.png")
    _scaling_plot(rows, plot_path)
    click.echo(f"wrote {csv_path} and {plot_path}")


def _scaling_plot(rows, path: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 5))
    sizes = sorted({n for n, *_ in rows})
    for phase in _PHASES:
        medians = []
        for n in sizes:
            vals = [sec for rn, ph, sec, _ in rows if rn == n and ph == phase]
            medians.append(statistics.median(vals))
        ax.plot(sizes, medians, marker="o", label=phase)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("rows")
    ax.set_ylabel("median wall seconds")
    ax.set_title("Phase timing vs experiment size")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


# ------------------------------------------------------------------- serve


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8321, show_default=True)
@click.option("--max-sessions", type=int, default=None, help="Default from LMFX_MAX_SESSIONS.")
@click.option("--max-rows", type=int, default=None, help="Default from LMFX_MAX_ROWS.")
@_run
def serve(host, port, max_sessions, max_rows):
    """Run the HTTP service (blocking)."""
    import uvicorn

    from .service import create_app

    app = create_app(max_sessions=max_sessions, max_rows=max_rows)
    uvicorn.run(app, host=host, port=port, log_level="info")


# ------------------------------------------------------------- thin client


def _check_response(resp: httpx.Response) -> dict:
    if resp.status_code >= 400:
        try:
            message = resp.json()["error"]["message"]
        except Exception:
            message = resp.text
        click.echo(f"error ({resp.status_code}): {message}", err=True)
        raise SystemExit(_EXIT_BY_STATUS.get(resp.status_code, 1))
    if resp.status_code == 204:
        return {}
    return resp.json()


@main.group()
def session():
    """Manage sessions on a running service."""


_SERVER = click.option(
    "--server", default="http://127.0.0.1:8321", show_default=True
)


@session.command("create")
@_SERVER
@click.option("--data", required=True, help="CSV path as seen by the server.")
@click.option("--spec", "spec_path", type=click.Path(dir_okay=False), required=True)
@click.option("--key", "keys", multiple=True, help="Extra compression keys.")
@click.option("--no-compression", is_flag=True)
@_run
def session_create(server, data, spec_path, keys, no_compression):
    """Create (fit) a session from a spec file."""
    try:
        with open(spec_path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except FileNotFoundError:
        raise SpecError(f"spec file not found: {spec_path}") from None
    except json.JSONDecodeError as exc:
        raise SpecError(f"spec file is not valid JSON: {exc}") from None
    body = {
        "data_path": data,
        "spec": obj,
        "compression_keys": list(dict.fromkeys(list(obj.get("compression_keys", [])) + list(keys))),
        "compression": not no_compression,
    }
    if obj.get("columns"):
        body["columns"] = obj["columns"]
    with httpx.Client(base_url=server, timeout=600.0) as client:
        out = _check_response(client.post("/sessions", json=body))
    click.echo(json.dumps(out, indent=2, sort_keys=True))


@session.command("list")
@_SERVER
@_run
def session_list(server):
    with httpx.Client(base_url=server, timeout=60.0) as client:
        out = _check_response(client.get("/sessions"))
    click.echo(json.dumps(out, indent=2, sort_keys=True))


@session.command("show")
@_SERVER
@click.argument("session_id")
@_run
def session_show(server, session_id):
    with httpx.Client(base_url=server, timeout=60.0) as client:
        out = _check_response(client.get(f"/sessions/{session_id}"))
    click.echo(json.dumps(out, indent=2, sort_keys=True))


@session.command("delete")
@_SERVER
@click.argument("session_id")
@_run
def session_delete(server, session_id):
    with httpx.Client(base_url=server, timeout=60.0) as client:
        _check_response(client.delete(f"/sessions/{session_id}"))
    click.echo(f"deleted {session_id}")


@main.command()
@_SERVER
@click.option("--session", "session_id", required=True)
@click.option("--outcome", required=True)
@click.option("--arm", required=True)
@click.option("--group-by", "group_by", multiple=True)
@click.option(
    "--covariance",
    default="homoskedastic",
    show_default=True,
    type=click.Choice([c.value for c in CovarianceType]),
)
@click.option("--level", type=float, default=0.95, show_default=True)
@_run
def query(server, session_id, outcome, arm, group_by, covariance, level):
    """Ask a running service for one effect estimate (or one per group)."""
    params = [
        ("outcome", outcome),
        ("arm", arm),
        ("covariance", covariance),
        ("level", level),
    ]
    for g in group_by:
        params.append(("group_by", g))
    with httpx.Client(base_url=server, timeout=600.0) as client:
        out = _check_response(
            client.get(f"/sessions/{session_id}/effects", params=params)
        )
    click.echo(json.dumps(out, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
