"""Command line surface: dataset validation, backtests, service, export.

The CLI never computes anything itself; it loads inputs, calls the core
modules and renders their results. The render helpers are module-level
functions so that tests can assert byte-equality between CLI output and
a direct invocation.

Exit codes: 0 success, 1 load/usage errors, 2 corrupt dataset
(validate), 3 every requested release skipped (backtest).
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .datamodel import ValidationReport, load_dataset, validate_dataset
from .errors import RtsError
from .evaluation import BacktestReport, backtest, random_baseline
from .features import FeatureScope
from .ranker import TrainConfig
from .service import DEFAULT_STORE_DIR, ServiceConfig, create_app
from .session import SessionStore, export_document


def render_validation_text(report: ValidationReport) -> str:
    status = "corrupt" if report.corrupt else "ok"
    lines = [f"{status}: {len(report.issues)} issues"]
    for issue in report.issues:
        subject = f" {issue.entity_id}" if issue.entity_id else ""
        lines.append(f"  [{issue.severity}] {issue.code}{subject}: {issue.message}")
    return "\n".join(lines)


def render_validation_json(report: ValidationReport) -> str:
    return json.dumps(report.to_dict(), indent=2, ensure_ascii=False)


def render_backtest_json(
    report: BacktestReport, baselines: dict[str, float], trials: int, seed: int
) -> str:
    doc = report.to_dict()
    for row in doc["per_release"]:
        row["random_baseline"] = baselines[row["release"]]
    doc["trials"] = trials
    doc["seed"] = seed
    return json.dumps(doc, indent=2, ensure_ascii=False)


def render_backtest_text(
    report: BacktestReport, baselines: dict[str, float], trials: int, seed: int
) -> str:
    lines = [f"{'release':<12} {'n':>5} {'m':>5} {'apfd':>8} {'baseline':>9} {'excluded':>9}"]
    for row in report.per_release:
        lines.append(
            f"{row.release:<12} {row.n:>5} {row.m:>5} {row.apfd:>8.4f} "
            f"{baselines[row.release]:>9.4f} {row.excluded_fault_count:>9}"
        )
    for release, reason in report.skipped:
        lines.append(f"{release:<12} skipped: {reason}")
    if report.empty:
        lines.append("no release could be evaluated")
    else:
        lines.append(f"mean apfd {report.mean_apfd:.4f} over {len(report.per_release)} releases")
    lines.append(f"baseline: {trials} random orderings per release, seed {seed}")
    return "\n".join(lines)


def render_export_json(doc: dict) -> str:
    return json.dumps(doc, indent=2, ensure_ascii=False)


@click.group()
def main() -> None:
    """Learning-assisted regression test selection."""


@main.command()
@click.argument("path", type=click.Path())
@click.option("--json", "as_json", is_flag=True, help="Emit the report as JSON.")
def validate(path: str, as_json: bool) -> None:
    """Check a dataset file for structural and referential problems."""
    try:
        dataset = load_dataset(path)
    except RtsError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    report = validate_dataset(dataset)
    click.echo(render_validation_json(report) if as_json else render_validation_text(report))
    sys.exit(2 if report.corrupt else 0)


@main.command("backtest")
@click.argument("path", type=click.Path())
@click.option("--releases", required=True, help="Comma-separated target releases.")
@click.option("--trials", default=1000, show_default=True, help="Random orderings per release.")
@click.option("--seed", default=1, show_default=True, help="Baseline generator seed.")
@click.option("--json", "as_json", is_flag=True, help="Emit the report as JSON.")
def backtest_command(path: str, releases: str, trials: int, seed: int, as_json: bool) -> None:
    """Evaluate the ranking pipeline against past releases (APFD)."""
    try:
        dataset = load_dataset(path)
    except RtsError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    names = [r.strip() for r in releases.split(",") if r.strip()]
    if not names:
        click.echo("error: --releases names no releases", err=True)
        sys.exit(1)
    scope_template = FeatureScope(target_release=names[0])
    try:
        report = backtest(dataset, scope_template, TrainConfig(), names)
        baselines = {
            row.release: random_baseline(dataset, row.release, trials, seed)
            for row in report.per_release
        }
    except RtsError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    render = render_backtest_json if as_json else render_backtest_text
    click.echo(render(report, baselines, trials, seed))
    if report.empty and report.skipped:
        sys.exit(3)


@main.command()
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True),
    default=None,
    help="JSON file with service settings.",
)
def serve(config_path: str | None) -> None:
    """Run the HTTP service for the web client."""
    import uvicorn

    cfg = ServiceConfig.from_file(config_path) if config_path else ServiceConfig()
    uvicorn.run(create_app(cfg), host=cfg.host, port=cfg.port, log_level="warning")


@main.group()
def session() -> None:
    """Inspect persisted workflow sessions."""


@session.command("export")
@click.argument("session_id")
@click.option("--out", type=click.Path(), default=None, help="Write to a file instead of stdout.")
@click.option("--store", type=click.Path(), default=DEFAULT_STORE_DIR, show_default=True)
def session_export(session_id: str, out: str | None, store: str) -> None:
    """Write the selection document of a session with an accepted cutoff."""
    try:
        s = SessionStore(Path(store) / "sessions").restore(session_id)
        doc = export_document(s)
    except RtsError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    text = render_export_json(doc)
    if out:
        Path(out).write_text(text + "\n")
        click.echo(f"wrote {out}")
    else:
        click.echo(text)


if __name__ == "__main__":
    main()
