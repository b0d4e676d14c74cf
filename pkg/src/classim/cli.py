"""Command-line entry points: dataset ingestion and the session service."""

from __future__ import annotations

import json
import logging
import sys

import click

from .ingest import (
    ModelBackedExtractor,
    ScriptedExtractor,
    build_dataset,
    load_lessons_dir,
)
from .model import ClassimError
from .providers import BACKEND_MODEL, BACKEND_SCRIPTED, ProviderConfig, \
    build_provider
from .retrieval import ProfileIndex


@click.group()
def main():
    """Classroom argumentation training simulator."""
    logging.basicConfig(level=logging.INFO)


@main.command()
@click.option("--in", "in_dir", required=True,
              type=click.Path(exists=True, file_okay=False),
              help="Directory of lesson transcripts (*.txt).")
@click.option("--out", "out_path", required=True, type=click.Path(),
              help="Output JSONL dataset path.")
@click.option("--extractor", "extractor_name",
              type=click.Choice(["scripted", "model"]), default="scripted")
@click.option("--seed", type=int, default=0,
              help="Reserved for extractor variants that sample.")
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None, help="Provider config JSON (model extractor).")
def ingest(in_dir, out_path, extractor_name, seed, config_path):
    """Build the student profile dataset from lesson transcripts."""
    del seed  # scripted extraction is deterministic; kept for CLI stability
    if extractor_name == "model":
        config = _load_config(config_path, default_backend=BACKEND_MODEL)
        extractor = ModelBackedExtractor(build_provider(config))
    else:
        extractor = ScriptedExtractor()
    lessons = load_lessons_dir(in_dir)
    try:
        dataset = build_dataset(lessons, extractor, out_path=out_path)
    except ClassimError as exc:
        raise click.ClickException(str(exc))
    click.echo(f"wrote {len(dataset.profiles)} profiles to {out_path}")


@main.command()
@click.option("--profiles", required=True, type=click.Path(exists=True),
              help="Profile dataset JSONL (ingest output).")
@click.option("--backend", type=click.Choice(["scripted", "model"]),
              default="scripted")
@click.option("--port", type=int, default=8000)
@click.option("--host", default="127.0.0.1")
@click.option("--data-dir", "data_dir", required=True, type=click.Path(),
              help="Directory for per-session event logs.")
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None, help="Provider config JSON (model backend).")
def serve(profiles, backend, port, host, data_dir, config_path):
    """Run the HTTP session service."""
    import uvicorn

    from .service import create_app

    if backend == "model":
        config = _load_config(config_path, default_backend=BACKEND_MODEL)
    else:
        config = ProviderConfig(backend=BACKEND_SCRIPTED)
    index = ProfileIndex.from_jsonl(profiles)
    app = create_app(index, config, data_dir)
    uvicorn.run(app, host=host, port=port)


def _load_config(config_path, default_backend: str) -> ProviderConfig:
    if config_path is None:
        raise click.ClickException(
            "the model backend requires --config with endpoint/model_name")
    with open(config_path, encoding="utf-8") as fh:
        d = json.load(fh)
    d.setdefault("backend", default_backend)
    try:
        return ProviderConfig.from_json_dict(d)
    except ClassimError as exc:
        raise click.ClickException(str(exc))


if __name__ == "__main__":
    main()
