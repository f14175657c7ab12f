"""Command-line entry points.

Exit codes: 0 ok, 1 usage error, 2 data error, 3 provider error.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import analytics, diversity, judge, pipeline, rubric, storage
from .gateway import Cassette, Gateway, GatewayError, MODE_RECORD, MODE_REPLAY
from .model import AnnotationRecord, QuestionRecord, Strategy, validate_record
from .prompts import PromptError
from .service import create_app


def _open_cassette(manifest: pipeline.RunManifest, replay: str | None, record: str | None) -> Cassette:
    if replay and record:
        raise click.UsageError("--replay and --record are mutually exclusive")
    if record:
        return Cassette.open(record, MODE_RECORD)
    if replay:
        return Cassette.open(replay, MODE_REPLAY)
    if manifest.cassette:
        return Cassette.open(manifest.cassette, MODE_REPLAY)
    raise click.UsageError("no cassette: pass --replay/--record or set one in the manifest")


def _gateway_for(manifest: pipeline.RunManifest) -> Gateway:
    return Gateway.from_specs(manifest.providers)


@click.group()
def cli() -> None:
    """Generate Bloom's-taxonomy educational questions and evaluate them."""


@cli.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--replay", "replay_path", default=None, help="Replay from this cassette.")
@click.option("--record", "record_path", default=None, help="Record live calls into this cassette.")
@click.option("--out", "out_dir", default="run_out", show_default=True)
@click.option("--workers", default=8, show_default=True)
def generate(manifest_path: str, replay_path: str | None, record_path: str | None, out_dir: str, workers: int) -> None:
    """Run the full (model x strategy x topic x level) generation grid."""
    manifest = storage.load_manifest(manifest_path)
    cassette = _open_cassette(manifest, replay_path, record_path)
    gateway = _gateway_for(manifest)
    records, report = pipeline.run_generation(
        manifest, gateway, cassette, out_dir, workers=workers
    )
    if report.failures and not records:
        first = report.failures[0]
        raise GatewayError(
            f"all {len(report.failures)} requests failed; "
            f"first: {first.error}: {first.detail}"
        )
    click.echo(
        f"generated {len(records)}/{report.planned} questions "
        f"({report.resumed} resumed, {len(report.failures)} failed) -> {out_dir}"
    )


@cli.command(name="auto-eval")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--evaluator", required=True, help="Judge as provider_id:model_id.")
@click.option("--questions", "questions_path", required=True, type=click.Path(exists=True))
@click.option("--replay", "replay_path", default=None)
@click.option("--record", "record_path", default=None)
@click.option("--out", "out_dir", default="eval_out", show_default=True)
def auto_eval(
    manifest_path: str,
    evaluator: str,
    questions_path: str,
    replay_path: str | None,
    record_path: str | None,
    out_dir: str,
) -> None:
    """Judge every question with an LLM at the evaluation temperature."""
    manifest = storage.load_manifest(manifest_path)
    if ":" not in evaluator:
        raise click.UsageError("--evaluator must look like provider_id:model_id")
    provider_id, model_id = evaluator.split(":", 1)
    for warning in judge.check_evaluator_independence(manifest, model_id):
        click.echo(f"warning: {warning}", err=True)
    questions = storage.load_questions(questions_path)
    cassette = _open_cassette(manifest, replay_path, record_path)
    gateway = _gateway_for(manifest)
    records, report = judge.evaluate_questions(
        questions, manifest, gateway, cassette, (provider_id, model_id), out_dir=out_dir
    )
    if report.failures and not records:
        first = report.failures[0]
        raise GatewayError(
            f"all {len(report.failures)} evaluations failed; "
            f"first: {first.error}: {first.detail}"
        )
    click.echo(
        f"evaluated {report.evaluated}/{len(questions)} questions "
        f"({len(report.failures)} failed) -> {out_dir}"
    )


@cli.command()
@click.option("--questions", "questions_path", required=True, type=click.Path(exists=True))
@click.option("--annotators", required=True, help="Comma-separated annotator names.")
@click.option("--port", default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--out", "out_path", default="annotations.jsonl", show_default=True)
@click.option("--ui", "ui_dir", default=None, type=click.Path(), help="Built UI bundle to serve at /.")
@click.option("--run-id", "run_id", default=None)
def serve(
    questions_path: str,
    annotators: str,
    port: int,
    host: str,
    out_path: str,
    ui_dir: str | None,
    run_id: str | None,
) -> None:
    """Serve blinded annotation sessions over JSON HTTP."""
    import uvicorn

    questions = storage.load_questions(questions_path)
    names = [name.strip() for name in annotators.split(",") if name.strip()]
    if not names:
        raise click.UsageError("--annotators must name at least one annotator")
    app = create_app(questions, names, out_path, run_id=run_id, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")


@cli.group()
def stats() -> None:
    """Agreement, quality, and diversity statistics."""


def _load_all_annotations(paths: tuple[str, ...]) -> list[AnnotationRecord]:
    records: list[AnnotationRecord] = []
    for path in paths:
        records.extend(storage.load_annotations(path))
    return records


def _pick_annotator_pair(records: list[AnnotationRecord], pair: str | None) -> tuple[str, str]:
    if pair:
        names = [p.strip() for p in pair.split(",")]
        if len(names) != 2:
            raise click.UsageError("--pair must name exactly two annotators")
        return names[0], names[1]
    ids = sorted({r.annotator_id for r in records})
    if len(ids) != 2:
        raise click.UsageError(
            f"found {len(ids)} annotators {ids}; use --pair a,b to choose two"
        )
    return ids[0], ids[1]


@stats.command()
@click.option("--annotations", "annotation_paths", multiple=True, required=True, type=click.Path(exists=True))
@click.option("--pair", default=None, help="Two annotator ids, comma-separated.")
@click.option("--out", "out_path", default=None, type=click.Path())
def agreement(annotation_paths: tuple[str, ...], pair: str | None, out_path: str | None) -> None:
    """Per-item percent agreement and (weighted) Cohen's kappa for two raters."""
    records = _load_all_annotations(annotation_paths)
    a, b = _pick_annotator_pair(records, pair)
    pairs = analytics.make_pairs(records, a, b)
    cells = analytics.agreement_report(pairs)
    payload = {"annotators": [a, b], "items": [c.to_json_dict() for c in cells]}
    _emit(payload, out_path)
    rows = [
        [c.item, str(c.n), storage.fmt_pct(None if c.percent_agreement is None else 100 * c.percent_agreement), storage.fmt_ratio(c.kappa), c.kappa_kind]
        for c in cells
    ]
    click.echo(storage.render_table(["Item", "N", "% agree", "kappa", "kind"], rows), nl=False)


@stats.command()
@click.option("--questions", "questions_path", required=True, type=click.Path(exists=True))
@click.option("--annotations", "annotation_paths", multiple=True, required=True, type=click.Path(exists=True))
@click.option("--policy", type=click.Choice(analytics.POLICIES), default=analytics.POLICY_BOTH_HUMANS, show_default=True)
@click.option("--strict/--no-strict", default=False, show_default=True, help="Also require TopicRelated=yes and Central=yes.")
@click.option("--skill-any", is_flag=True, default=False, help="Count skill match when any policy rater matches (default: all).")
@click.option("--out", "out_path", default=None, type=click.Path())
def quality(
    questions_path: str,
    annotation_paths: tuple[str, ...],
    policy: str,
    strict: bool,
    skill_any: bool,
    out_path: str | None,
) -> None:
    """Quality% and Skill% per (model, strategy) cell plus overall rows."""
    questions = storage.load_questions(questions_path)
    records = _load_all_annotations(annotation_paths)
    report = analytics.quality_metrics(
        questions,
        records,
        policy=policy,
        strict=strict,
        skill_requires_all=not skill_any,
    )
    _emit(report.to_json_dict(), out_path)
    click.echo(_quality_table(report), nl=False)


@stats.command()
@click.option("--questions", "questions_path", required=True, type=click.Path(exists=True))
@click.option("--n", "n_max", default=4, show_default=True)
@click.option("--group", "group_fields", default="model,strategy,level", show_default=True)
@click.option("--out", "out_path", default=None, type=click.Path())
def pinc(questions_path: str, n_max: int, group_fields: str, out_path: str | None) -> None:
    """Mean pairwise n-gram novelty within question groups."""
    questions = storage.load_questions(questions_path)
    fields = tuple(f.strip() for f in group_fields.split(",") if f.strip())
    if fields == diversity.GROUP_FIELDS:
        report = diversity.group_pinc(questions, n_max=n_max)
        _emit(report.to_json_dict(), out_path)
        rows = [
            [g.model_id, g.strategy, g.level, str(g.n_pairs), storage.fmt_ratio(g.mean_pinc)]
            for g in report.groups
        ]
        rows.append(["overall", "", "", "", storage.fmt_ratio(report.overall)])
        click.echo(
            storage.render_table(["Model", "Strategy", "Level", "Pairs", "PINC"], rows),
            nl=False,
        )
    else:
        grouped = diversity.group_pinc_by(questions, n_max=n_max, fields=fields)
        payload = {
            "n_max": n_max,
            "group_fields": list(fields),
            "groups": [
                {"key": list(key), "n_pairs": n, "mean_pinc": mean}
                for key, (n, mean) in grouped.items()
            ],
        }
        _emit(payload, out_path)
        rows = [
            [", ".join(key), str(n), storage.fmt_ratio(mean)]
            for key, (n, mean) in grouped.items()
        ]
        click.echo(storage.render_table(["Group", "Pairs", "PINC"], rows), nl=False)


@cli.command()
@click.option("--questions", "questions_path", required=True, type=click.Path(exists=True))
@click.option("--annotations", "annotation_paths", multiple=True, type=click.Path(exists=True))
@click.option("--auto", "auto_path", default=None, type=click.Path(exists=True))
@click.option("--lexicon", "lexicon_path", default=None, type=click.Path(exists=True))
@click.option("--n", "n_max", default=4, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
def report(
    questions_path: str,
    annotation_paths: tuple[str, ...],
    auto_path: str | None,
    lexicon_path: str | None,
    n_max: int,
    out_dir: str,
) -> None:
    """Emit quality/agreement/diversity tables and theme counts to a directory."""
    questions = storage.load_questions(questions_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    human_records = _load_all_annotations(annotation_paths) if annotation_paths else []
    if human_records:
        human_ids = sorted({r.annotator_id for r in human_records if r.annotator_id.startswith("human:")})
        policy = analytics.POLICY_BOTH_HUMANS if len(human_ids) >= 2 else analytics.POLICY_SINGLE
        quality_report = analytics.quality_metrics(questions, human_records, policy=policy)
        storage.write_json_atomic(out / "quality_human.json", quality_report.to_json_dict())
        storage.write_text_atomic(out / "quality_human.txt", _quality_table(quality_report))
        if len(human_ids) >= 2:
            pairs = analytics.make_pairs(human_records, human_ids[0], human_ids[1])
            agreement_payload = {
                "annotators": human_ids[:2],
                "pooled": [c.to_json_dict() for c in analytics.agreement_report(pairs)],
                "per_strategy": _per_strategy_agreement(questions, human_records, human_ids[0], human_ids[1]),
            }
            storage.write_json_atomic(out / "agreement.json", agreement_payload)
            storage.write_text_atomic(
                out / "agreement.txt", _agreement_table(agreement_payload)
            )

    if auto_path:
        auto_records = storage.load_annotations(auto_path)
        auto_report = analytics.quality_metrics(
            questions, auto_records, policy=analytics.POLICY_LLM
        )
        storage.write_json_atomic(out / "quality_llm.json", auto_report.to_json_dict())
        storage.write_text_atomic(out / "quality_llm.txt", _quality_table(auto_report))

    diversity_report = diversity.group_pinc(questions, n_max=n_max)
    storage.write_json_atomic(out / "pinc.json", diversity_report.to_json_dict())

    lexicon = None
    if lexicon_path:
        lexicon = json.loads(Path(lexicon_path).read_text("utf-8"))
    themes = analytics.theme_frequencies(questions, lexicon)
    storage.write_json_atomic(out / "themes.json", themes)
    storage.write_text_atomic(out / "themes.txt", _themes_table(themes))
    click.echo(f"reports written to {out_dir}")


@cli.command()
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--mapping", "mapping_arg", required=True, help="JSON object or path to one.")
@click.option("--out", "out_path", default="ingested_questions.jsonl", show_default=True)
@click.option("--run-id", "run_id", default="ingested", show_default=True)
def ingest(in_path: str, mapping_arg: str, out_path: str, run_id: str) -> None:
    """Normalize an externally released question table into the dataset schema."""
    if Path(mapping_arg).exists():
        mapping = json.loads(Path(mapping_arg).read_text("utf-8"))
    else:
        mapping = json.loads(mapping_arg)
    records, counts = storage.ingest_external_questions(in_path, mapping, run_id=run_id)
    if not records:
        click.echo("warning: ingested 0 rows", err=True)
    storage.save_questions(out_path, records)
    rows = [
        [model, strategy, str(count)]
        for (model, strategy), count in sorted(counts.items())
    ]
    click.echo(storage.render_table(["Model", "Strategy", "Count"], rows), nl=False)
    click.echo(f"ingested {len(records)} questions -> {out_path}")


@cli.command()
@click.argument("path", type=click.Path(exists=True))
def validate(path: str) -> None:
    """Schema-validate a questions or annotations JSONL file."""
    first = None
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                first = json.loads(line)
                break
    if first is None:
        click.echo(f"{path}: empty dataset (ok)")
        return
    if "responses" in first:
        records = storage.load_annotations(path)
        bad = 0
        for record in records:
            violations = validate_record(record)
            for violation in violations:
                bad += 1
                where = violation.item.value if violation.item else "record"
                click.echo(f"{record.question_id} [{where}]: {violation.message}", err=True)
        if bad:
            raise storage.StorageError(f"{bad} gating violations in {path}")
        click.echo(f"{path}: {len(records)} annotation records ok")
    else:
        records = storage.load_questions(path)
        seen: set[str] = set()
        for record in records:
            if record.question_id in seen:
                raise storage.StorageError(
                    f"duplicate question_id {record.question_id} in {path}"
                )
            seen.add(record.question_id)
        click.echo(f"{path}: {len(records)} question records ok")


def _emit(payload: dict, out_path: str | None) -> None:
    if out_path:
        storage.write_json_atomic(out_path, payload)
    else:
        click.echo(json.dumps(payload, indent=2, ensure_ascii=False))


def _quality_table(report: analytics.QualityReport) -> str:
    strategies = sorted({c.strategy for c in report.cells if c.strategy})
    headers = ["LLM"] + [f"{s} Quality" for s in strategies] + [f"{s} Skill" for s in strategies]
    headers += ["Overall Quality", "Overall Skill"]
    by_cell = {(c.model_id, c.strategy): c for c in report.cells}
    rows = []
    for model_row in report.model_rows:
        row = [model_row.model_id or ""]
        for s in strategies:
            cell = by_cell.get((model_row.model_id, s))
            row.append(storage.fmt_pct(cell.quality_pct if cell else None))
        for s in strategies:
            cell = by_cell.get((model_row.model_id, s))
            row.append(storage.fmt_pct(cell.skill_pct if cell else None))
        row += [storage.fmt_pct(model_row.quality_pct), storage.fmt_pct(model_row.skill_pct)]
        rows.append(row)
    overall = report.overall
    rows.append(
        ["Overall"]
        + ["" for _ in strategies] * 2
        + [storage.fmt_pct(overall.quality_pct), storage.fmt_pct(overall.skill_pct)]
    )
    return storage.render_table(headers, rows)


def _per_strategy_agreement(
    questions: list[QuestionRecord],
    records: list[AnnotationRecord],
    a: str,
    b: str,
) -> dict:
    strategy_of = {q.question_id: q.strategy for q in questions}
    out = {}
    for strategy in sorted({q.strategy for q in questions}, key=lambda s: s.value):
        subset = [r for r in records if strategy_of.get(r.question_id) is strategy]
        pairs = analytics.make_pairs(subset, a, b)
        out[strategy.value] = [c.to_json_dict() for c in analytics.agreement_report(pairs)]
    return out


def _agreement_table(payload: dict) -> str:
    rows = [
        [
            cell["item"],
            str(cell["n"]),
            storage.fmt_pct(None if cell["percent_agreement"] is None else 100 * cell["percent_agreement"]),
            storage.fmt_ratio(cell["kappa"]),
            cell["kappa_kind"],
        ]
        for cell in payload["pooled"]
    ]
    return storage.render_table(["Item", "N", "% agree", "kappa", "kind"], rows)


def _themes_table(themes: dict[str, dict[str, int]]) -> str:
    models = sorted({m for counts in themes.values() for m in counts})
    headers = ["Theme"] + models
    rows = [
        [theme] + [str(themes[theme].get(m, 0)) for m in models] for theme in themes
    ]
    return storage.render_table(headers, rows)


def main(argv: list[str] | None = None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.Abort:
        return 1
    except (
        storage.StorageError,
        analytics.AnalyticsError,
        pipeline.EmptyResponse,
        PromptError,
        rubric.RubricError,
        judge.JudgeError,
        ValueError,
        KeyError,
    ) as exc:
        click.echo(f"data error: {exc}", err=True)
        return 2
    except GatewayError as exc:
        click.echo(f"provider error: {exc}", err=True)
        return 3
    except OSError as exc:
        click.echo(f"io error: {exc}", err=True)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
