"""Command-line entry point.

Exit codes are a stable scripting contract: 0 success, 1 domain error
(budget, divergence, precondition), 2 usage or input-format error. Every
command that produces artifacts also writes its merged effective config
next to them so a run can be reproduced from its output directory alone.
"""

from __future__ import annotations

import functools
import json
import socket
import sys
from pathlib import Path

import click

from . import contrastive, corpus, curation, evalkit, icl, prompting
from .errors import DataFormatError, FewIntentError
from .seeding import derive_seed

STYLE_CHOICES = [s.value for s in prompting.PromptStyle]


def _fail(message: str, code: int):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def cli_errors(fn):
    """Map toolkit exceptions onto the exit-code contract."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except DataFormatError as exc:
            _fail(str(exc), 2)
        except FewIntentError as exc:
            _fail(str(exc), 1)

    return wrapper


def _load_json_config(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise DataFormatError(f"config file not found: {p}")
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{p}: invalid JSON config: {exc}") from exc
    if not isinstance(data, dict):
        raise DataFormatError(f"{p}: config must be a JSON object")
    return data


def _write_effective_config(out_dir: Path, config: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "effective_config.json").write_text(
        json.dumps(config, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def _provenance(strategy: str, seed: int, manifest: str | None):
    if strategy == "curated":
        if not manifest:
            raise DataFormatError("--strategy curated requires --manifest")
        return corpus.CuratedProvenance(str(manifest))
    return corpus.RandomProvenance(derive_seed(seed, "sample"))


@click.group()
def main():
    """Few-shot intent classification toolkit."""


@main.command()
@click.option("--data", required=True, type=click.Path(), help="Dataset CSV.")
@click.option("--split", default="train", type=click.Choice([s.value for s in corpus.Split]))
@cli_errors
def stats(data, split):
    """Print dataset statistics (sizes, length summaries, intent count)."""
    dataset = corpus.load_csv(data, corpus.Split(split))
    summary = corpus.compute_stats(dataset)
    click.echo(corpus.render_stats(summary, title=f"Dataset statistics ({split})"))


@main.command()
@click.option("--data", required=True, type=click.Path(), help="Training CSV.")
@click.option("--shots", required=True, type=int, help="Examples per class.")
@click.option("--strategy", default="random", type=click.Choice(["random", "curated"]))
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--manifest", type=click.Path(), help="Curation manifest (curated strategy).")
@click.option("--config", "config_path", type=click.Path(), help="JSON hyperparameter overrides.")
@click.option("--out", required=True, type=click.Path(), help="Artifact directory.")
@cli_errors
def train(data, shots, strategy, seed, manifest, config_path, out):
    """Contrastively train the encoder and fit the classification head."""
    dataset = corpus.load_csv(data, corpus.Split.TRAIN)
    overrides = _load_json_config(config_path)
    base = contrastive.TrainConfig().to_dict()
    unknown = set(overrides) - set(base)
    if unknown:
        raise DataFormatError(
            f"unknown hyperparameters in config: {', '.join(sorted(unknown))}"
        )
    config = contrastive.TrainConfig.from_dict({**base, **overrides})
    provenance = _provenance(strategy, seed, manifest)
    params, head, report = contrastive.train_pipeline(
        dataset, shots, config=config, seed=seed, provenance=provenance
    )
    out_dir = Path(out)
    contrastive.save_artifact(
        out_dir, params, head, report, dataset.label_space.names, dataset.fingerprint
    )
    _write_effective_config(
        out_dir,
        {
            "command": "train",
            "data": str(data),
            "shots": shots,
            "strategy": strategy,
            "seed": seed,
            "manifest": manifest,
            "hyperparams": config.to_dict(),
        },
    )
    trajectory = report.loss_trajectory
    click.echo(
        f"trained on {shots} shots x {len(dataset.label_space)} classes: "
        f"contrastive loss {trajectory[0]:.4f} -> {trajectory[-1]:.4f}, "
        f"head train accuracy {report.head_train_accuracy:.3f}"
    )
    click.echo(f"artifact written to {out_dir}")


def _build_backend(backend, transcript, model, base_url, prices):
    table = prompting.load_price_table(prices)
    if model not in table:
        raise DataFormatError(
            f"model {model!r} not in price table ({', '.join(sorted(table))})"
        )
    pricing = table[model]
    info = icl.BackendInfo(
        name=f"{backend}:{model}",
        context_limit=pricing.context_limit,
        prompt_rate=pricing.prompt_rate,
        completion_rate=pricing.completion_rate,
        deterministic=backend == "mock",
    )
    if backend == "mock":
        if not transcript:
            raise DataFormatError("--backend mock requires --transcript")
        return icl.TranscriptBackend(transcript, info)
    if not base_url:
        raise DataFormatError("--backend http requires --base-url")
    return icl.HttpBackend(base_url, model, info)


@main.command(name="icl")
@click.option("--data", required=True, type=click.Path(), help="Training CSV (demonstrations).")
@click.option("--eval-data", required=True, type=click.Path(), help="CSV of instances to classify.")
@click.option("--shots", required=True, type=int)
@click.option("--strategy", default="random", type=click.Choice(["random", "curated"]))
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--manifest", type=click.Path())
@click.option("--style", default="system_context", type=click.Choice(STYLE_CHOICES))
@click.option("--backend", default="mock", type=click.Choice(["mock", "http"]))
@click.option("--transcript", type=click.Path(), help="Replay transcript (mock backend).")
@click.option("--model", default="gpt-3.5-turbo", show_default=True)
@click.option("--base-url", help="Chat-completion endpoint (http backend).")
@click.option("--prices", type=click.Path(), help="Price table JSON (bundled one by default).")
@click.option("--resume", is_flag=True, help="Continue an interrupted run.")
@click.option("--out", required=True, type=click.Path(), help="Run output directory.")
@cli_errors
def icl_run(
    data, eval_data, shots, strategy, seed, manifest, style, backend,
    transcript, model, base_url, prices, resume, out,
):
    """Classify a dataset by prompting a chat backend, resumably."""
    train_ds = corpus.load_csv(data, corpus.Split.TRAIN)
    eval_ds = corpus.load_csv(eval_data, corpus.Split.TEST)
    if train_ds.label_space.names != eval_ds.label_space.names:
        raise DataFormatError("training and evaluation label spaces differ")
    provenance = _provenance(strategy, seed, manifest)
    sample = corpus.sample_few_shot(train_ds, shots, provenance)
    chat = _build_backend(backend, transcript, model, base_url, prices)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    checkpoint = out_dir / "run.jsonl"
    if checkpoint.exists() and checkpoint.stat().st_size > 0 and not resume:
        _fail(f"{checkpoint} already exists; pass --resume to continue it", 1)
    _write_effective_config(
        out_dir,
        {
            "command": "icl",
            "data": str(data),
            "eval_data": str(eval_data),
            "shots": shots,
            "strategy": strategy,
            "seed": seed,
            "manifest": manifest,
            "style": style,
            "backend": backend,
            "model": model,
            "transcript": transcript,
        },
    )
    record = icl.run_batch(
        chat, eval_ds, sample, prompting.PromptStyle(style), checkpoint, seed=seed
    )
    report = evalkit.score(
        record.golds(), record.predictions(), len(eval_ds.label_space)
    )
    (out_dir / "report.json").write_text(report.to_json(), encoding="utf-8")
    click.echo(evalkit.render_report(report, name=f"{backend}:{model}"))
    click.echo(
        f"estimated cost: ${record.cost.total_usd:.2f} "
        f"({record.cost.prompt_tokens} prompt + "
        f"{record.cost.completion_tokens} completion tokens)"
    )
    click.echo(f"run record: {checkpoint}")


@main.command(name="eval")
@click.option("--record", "record_path", required=True, type=click.Path(), help="run.jsonl to rescore.")
@click.option("--data", required=True, type=click.Path(), help="Dataset the run classified.")
@click.option("--out", type=click.Path(), help="Where to write the report JSON.")
@cli_errors
def eval_cmd(record_path, data, out):
    """Rescore a stored run: re-parse raw replies without re-querying."""
    dataset = corpus.load_csv(data, corpus.Split.TEST)
    record = icl.load_run_record(record_path)
    for rec in record.instances:
        utt = dataset.utterances[rec.index] if rec.index < len(dataset) else None
        if utt is None or utt.text != rec.query:
            raise FewIntentError(
                f"run record does not match dataset at instance {rec.index}"
            )
    preds = [
        icl.parse_response(rec.prediction.raw_text, dataset.label_space)
        for rec in record.instances
    ]
    golds = [rec.gold_label_id for rec in record.instances]
    report = evalkit.score(golds, preds, len(dataset.label_space))
    if out:
        Path(out).write_text(report.to_json(), encoding="utf-8")
    click.echo(evalkit.render_report(report, name=Path(record_path).name))


@main.command()
@click.option("--data", required=True, type=click.Path(), help="Training CSV (demonstrations).")
@click.option("--eval-data", type=click.Path(), help="CSV whose first row is the example query.")
@click.option("--shots", required=True, type=int)
@click.option("--strategy", default="random", type=click.Choice(["random", "curated"]))
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--manifest", type=click.Path())
@click.option("--style", default="system_context", type=click.Choice(STYLE_CHOICES))
@click.option("--model", default="gpt-3.5-turbo", show_default=True)
@click.option("--prices", type=click.Path())
@click.option("--instances", type=int, help="Projection size (defaults to eval set size).")
@cli_errors
def cost(data, eval_data, shots, strategy, seed, manifest, style, model, prices, instances):
    """Project the dollar cost of a full classification run."""
    train_ds = corpus.load_csv(data, corpus.Split.TRAIN)
    table = prompting.load_price_table(prices)
    if model not in table:
        raise DataFormatError(
            f"model {model!r} not in price table ({', '.join(sorted(table))})"
        )
    pricing = table[model]
    provenance = _provenance(strategy, seed, manifest)
    sample = corpus.sample_few_shot(train_ds, shots, provenance)
    if eval_data:
        eval_ds = corpus.load_csv(eval_data, corpus.Split.TEST)
        query = eval_ds.utterances[0].text
        n = instances if instances is not None else len(eval_ds)
    else:
        if instances is None:
            raise DataFormatError("pass --eval-data or --instances")
        query = train_ds.utterances[0].text
        n = instances
    if n < 0:
        raise DataFormatError("--instances must be nonnegative")
    bundle = prompting.build_prompt(
        train_ds.label_space, sample, query, prompting.PromptStyle(style)
    )
    reserve = prompting.DEFAULT_COMPLETION_RESERVE
    budget = prompting.check_budget(bundle.estimated_tokens, pricing.context_limit, reserve)
    per_instance = prompting.estimate_cost(
        bundle.estimated_tokens, reserve, pricing.prompt_rate, pricing.completion_rate
    )
    projected = per_instance.total_usd * n
    click.echo(f"model:               {model}")
    click.echo(f"prompt style:        {style}, {shots}-shot, {bundle.class_count} classes")
    click.echo(
        f"tokens per instance: {bundle.estimated_tokens} prompt + {reserve} reserved "
        f"(default counter: ceil(chars/4) + 4/message)"
    )
    click.echo(
        f"context budget:      {'fits' if budget.ok else 'EXCEEDS'} "
        f"{pricing.context_limit} (margin {budget.margin})"
    )
    click.echo(f"per-instance cost:   ${per_instance.total_usd:.6f}")
    click.echo(f"projected cost:      ${projected:.2f} for {n} instances")


@main.command()
@click.option("--data", required=True, type=click.Path(), help="CSV to curate from.")
@click.option("--out", required=True, type=click.Path(), help="Session state directory.")
@click.option("--port", default=8777, type=int, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--candidates", default=curation.DEFAULT_CANDIDATES_PER_CLASS, type=int, show_default=True)
@click.option("--picks", default=curation.DEFAULT_PICKS_PER_CLASS, type=int, show_default=True)
@click.option("--seed", default=0, type=int, show_default=True)
@cli_errors
def curate(data, out, port, host, candidates, picks, seed):
    """Serve the curation API (and create a session) until interrupted."""
    import uvicorn

    from .curation_api import create_app

    dataset = corpus.load_csv(data, corpus.Split.TRAIN)
    store = curation.SessionStore(out)
    existing = store.session_ids()
    if existing:
        session_id = existing[-1]
        click.echo(f"resuming session {session_id} from {out}")
    else:
        session = curation.start_session(
            dataset,
            candidates_per_class=candidates,
            picks_per_class=picks,
            seed=seed,
            dataset_path=str(data),
        )
        store.save(session)
        store.append_audit(
            session.session_id, {"event": "session_created", "dataset_path": str(data)}
        )
        session_id = session.session_id
        click.echo(f"created session {session_id}")
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as probe:
        # Match the server's bind semantics: lingering sockets from a killed
        # instance must not read as a conflict, only a live listener should.
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            probe.bind((host, port))
        except OSError:
            _fail(f"port {port} is already in use; pass --port", 1)
    click.echo(f"curation service at http://{host}:{port}/sessions/{session_id}")
    click.echo(f"state directory: {out} (selections survive restarts)")
    uvicorn.run(create_app(store), host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
