"""Command-line entry points: interactive refinement, batch evaluation,
labor statistics, report merging and the HTTP service."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import engine as eng
from . import evaluation as ev
from .data import load_humaneval, load_mbpp_sanitized
from .errors import ChatCoderError
from .gateway import ChatGateway, ModelConfig
from .prompts import AUTO_REFINE, CHATCODER, FREE_PARAPHRASE, FREE_QA
from .refinement import Angle, labor_stats, render_spec
from .sandbox import Limits, run_candidate


def _load_tasks(path: str):
    if path.endswith(".jsonl"):
        return load_humaneval(path)
    return load_mbpp_sanitized(path)


def _model_config(provider, model, cassette, n_samples=1, temperature=0.0, top_p=1.0, base_url=None):
    kwargs = dict(
        provider=provider,
        model_name=model,
        cassette_path=cassette,
        n_samples=n_samples,
        temperature=temperature,
        top_p=top_p,
    )
    if base_url:
        kwargs["base_url"] = base_url
    return ModelConfig(**kwargs)


def _fail(exc: Exception):
    click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
    sys.exit(1)


provider_opt = click.option("--provider", default="live", type=click.Choice(["live", "replay", "record"]))
model_opt = click.option("--model", default="gpt-3.5-turbo", show_default=True)
cassette_opt = click.option("--cassette", default=None, help="cassette file for record/replay")
base_url_opt = click.option("--base-url", default=None, help="OpenAI-compatible API base URL")


@click.group()
def main():
    """Requirement-refinement workbench and pass@k evaluation harness."""


@main.command()
@click.option("--dataset", required=True, type=click.Path(exists=True), help="task file (.jsonl HumanEval-style, .json sanitized-MBPP-style)")
@click.option("--task-id", required=True)
@click.option("--mode", default=CHATCODER, type=click.Choice([CHATCODER, FREE_PARAPHRASE, FREE_QA, AUTO_REFINE]))
@provider_opt
@model_opt
@cassette_opt
@base_url_opt
@click.option("--generate/--no-generate", default=True, help="generate and test one candidate after finalize")
@click.option("--non-interactive", is_flag=True, help="accept all model output without prompting")
def refine(dataset, task_id, mode, provider, model, cassette, base_url, generate, non_interactive):
    """Interactively refine one task's requirement, then optionally generate."""
    try:
        tasks = _load_tasks(dataset)
        task = next((t for t in tasks if t.task_id == task_id), None)
        if task is None:
            raise click.UsageError(f"task {task_id} not found in {dataset}")
        config = _model_config(provider, model, cassette, base_url=base_url)
        gateway = ChatGateway(config)
        session = eng.create_session(task, mode, config)

        if mode in (CHATCODER, AUTO_REFINE, FREE_PARAPHRASE):
            click.echo("== Round 1: paraphrase ==")
            eng.run_paraphrase(session, gateway)
            if mode == FREE_PARAPHRASE:
                click.echo(session.spec.free_text)
                eng.submit_review(session, {})
            elif mode == CHATCODER:
                edits = {}
                for angle in Angle:
                    section = session.spec.sections[angle]
                    click.echo(f"\n### {angle.title}\n{section.text}")
                    if not non_interactive:
                        new_text = click.edit(section.text)
                        if new_text is not None and new_text.strip() != section.text.strip():
                            edits[angle] = new_text.strip()
                eng.submit_review(session, edits)

        if mode != FREE_PARAPHRASE:
            click.echo("\n== Round 2: questions ==")
            eng.run_questioning(session, gateway)
            if mode != AUTO_REFINE:
                answers = {}
                for index, item in enumerate(session.spec.qa_items):
                    if item.status != "open":
                        continue
                    click.echo(f"\nQ{index}: {item.question}\nproposed: {item.proposed_answer}")
                    if non_interactive:
                        answers[index] = (eng.ACCEPT, None)
                        continue
                    action = click.prompt(
                        "action", default="accept",
                        type=click.Choice(["accept", "answer", "flag_loopback"]),
                    )
                    text = click.prompt("answer") if action == "answer" else None
                    answers[index] = (action, text)
                eng.resolve_questions(session, answers)
                if session.state == eng.ROUND1_REVIEWED:
                    click.echo("loop-back: re-running questioning with zero extra edits")
                    eng.run_questioning(session, gateway)
                    open_items = {
                        i: (eng.ACCEPT, None)
                        for i, item in enumerate(session.spec.qa_items)
                        if item.status == "open"
                    }
                    eng.resolve_questions(session, open_items)

        final = eng.finalize(session)
        click.echo("\n== Final refined requirement ==")
        click.echo(final)
        stats = labor_stats(session.spec)
        click.echo(f"\nlabor: {stats.human_tokens}/{stats.total_tokens} human tokens "
                   f"(fraction {stats.fraction:.3f})")

        if generate:
            from .prompts import build_codegen_prompt

            bundle = build_codegen_prompt(task, final, [])
            reply = gateway.complete(bundle, n=1)[0]
            code = ev.extract_code(reply, task.entry_point)
            if code is None:
                click.echo("candidate: extraction failure")
            else:
                verdict = run_candidate(code, task)
                click.echo(f"candidate verdict: {verdict.outcome}")
    except click.UsageError:
        raise
    except ChatCoderError as exc:
        _fail(exc)


@main.command("eval")
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True))
@click.option("--mode", default=ev.BASELINE, type=click.Choice(list(ev.EVAL_MODES)))
@click.option("--reviewer", default="none", help="scripted reviewer JSON file, or 'none'")
@click.option("--n", default=1, show_default=True, type=int)
@click.option("--k", default="1", show_default=True, help="comma-separated k values")
@click.option("--shots", default=0, show_default=True, type=int)
@click.option("--out", required=True, type=click.Path())
@provider_opt
@model_opt
@cassette_opt
@base_url_opt
@click.option("--temperature", default=0.0, type=float)
@click.option("--top-p", default=1.0, type=float)
@click.option("--timeout", default=10.0, type=float, help="sandbox timeout per candidate (s)")
def eval_cmd(dataset_path, mode, reviewer, n, k, shots, out, provider, model, cassette,
             base_url, temperature, top_p, timeout):
    """Batch-evaluate a dataset under one mode; writes report.json/report.md."""
    try:
        k_list = tuple(int(part) for part in k.split(",") if part.strip())
    except ValueError:
        raise click.UsageError(f"bad --k value {k!r}")
    if not k_list or any(kv < 1 or kv > n for kv in k_list):
        raise click.UsageError(f"every k in {k_list} must lie in [1, n={n}]")
    if mode in (ev.AUTO_REFINE, ev.BASELINE):
        policy = ev.ReviewerPolicy(kind="none")
    elif reviewer == "none":
        raise click.UsageError(f"mode {mode} requires --reviewer <script.json>")
    else:
        policy = ev.ReviewerPolicy.from_file(reviewer)
    try:
        tasks = _load_tasks(dataset_path)
        config = _model_config(provider, model, cassette, n_samples=n,
                               temperature=temperature, top_p=top_p, base_url=base_url)
        gen_cfg = ev.GenerationConfig(n=n, k_list=k_list, shots=shots,
                                      limits=Limits(timeout_s=timeout))
        report = ev.run_experiment(tasks, mode, policy, config, gen_cfg, out)
        click.echo(ev.emit_report(report, "markdown-table"))
        click.echo(f"report written to {Path(out) / 'report.json'}")
    except ChatCoderError as exc:
        _fail(exc)


@main.command()
@click.option("--sessions", required=True, type=click.Path(exists=True), help="directory of stored session documents")
def stats(sessions):
    """Recompute labor statistics from stored sessions."""
    rows = []
    for path in sorted(Path(sessions).glob("*.json")):
        doc = json.loads(path.read_text(encoding="utf-8"))
        doc.pop("candidates", None)
        session = eng.session_from_dict(doc)
        s = labor_stats(session.spec)
        rows.append((session.task.task_id, s))
        click.echo(f"{session.task.task_id}\t{s.human_tokens}/{s.total_tokens}\t{s.fraction:.4f}")
    if rows:
        mean = sum(s.fraction for _, s in rows) / len(rows)
        click.echo(f"aggregate labor fraction: {mean:.4f}")
    else:
        click.echo("no sessions found")


@main.command()
@click.argument("reports", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("--format", "fmt", default="markdown-table", type=click.Choice(["json", "markdown-table"]))
def report(reports, fmt):
    """Merge stored report.json files and emit one document."""
    loaded = [ev.report_from_dict(json.loads(Path(p).read_text())) for p in reports]
    if fmt == "markdown-table":
        click.echo(ev.reports_to_markdown(loaded))
    else:
        click.echo(json.dumps([ev.report_to_dict(r) for r in loaded], indent=2, sort_keys=True))


@main.command()
@click.option("--port", default=8765, show_default=True, type=int)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--store", default="./sessions", show_default=True, type=click.Path())
@click.option("--dataset", "dataset_path", default=None, type=click.Path(exists=True))
@provider_opt
@model_opt
@cassette_opt
@base_url_opt
def serve(port, host, store, dataset_path, provider, model, cassette, base_url):
    """Run the HTTP service for the browser workspace."""
    import uvicorn

    from .service import create_app

    try:
        config = _model_config(provider, model, cassette, base_url=base_url)
        gateway = ChatGateway(config)
        tasks = _load_tasks(dataset_path) if dataset_path else []
        app = create_app(gateway, store, tasks=tasks)
    except ChatCoderError as exc:
        _fail(exc)
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
