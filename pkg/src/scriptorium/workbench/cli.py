"""Command-line entry points for the whole workbench pipeline."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .. import conventions, imaging, synth
from ..embeddings import EmbeddingTable, cluster_ward, project_2d, scatter_svg
from ..lemma_align import (
    AlignmentDecision,
    DecisionLog,
    LemmaLexicon,
    glossary_entries,
    inject_lemmas,
    propose_candidates,
)
from ..project import open_project
from ..tei import PatternSet, assign_ids, emit_tei, parse_tei, pre_encode
from .jobs import JobKind, PipelineJob, run_job


@click.group()
def main():
    """Workbench for recognizing, structuring and lemmatizing historical texts."""


def _project(path):
    return open_project(path)


def _run(project, kind, params, force):
    job = run_job(project, PipelineJob(kind=kind, params=params), force=force)
    if job.state == "failed":
        click.echo(f"job {job.kind.value} failed: {job.error}", err=True)
        sys.exit(1)
    click.echo(f"{job.kind.value}: {job.state} ({len(job.artifacts)} artifacts)")
    if job.note:
        click.echo(f"  {job.note}")
    return job


@main.command()
@click.argument("path", type=click.Path())
def init(path):
    """Create (or reopen) a project directory."""
    project = _project(path)
    project.save_config()
    click.echo(f"project ready at {project.root}")


@main.command()
@click.argument("pages", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("--project", "project_path", required=True, type=click.Path())
@click.option("--min-gap", default=4, show_default=True, help="line merge gap in px")
@click.option("--force", is_flag=True)
def preprocess(pages, project_path, min_gap, force):
    """Binarize, deskew and segment page images into line records."""
    project = _project(project_path)
    for page in pages:
        _run(
            project,
            JobKind.PREPROCESS,
            {"page": str(page), "min_gap_px": min_gap},
            force,
        )


@main.command()
@click.option("--project", "project_path", required=True, type=click.Path())
@click.option("--multiplier", default=9, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option(
    "--recipes",
    "recipes_file",
    default=None,
    type=click.Path(exists=True),
    help="JSON list of degradation recipes; default battery (or the "
    "augment.recipes config key) otherwise",
)
@click.option("--force", is_flag=True)
def augment(project_path, multiplier, seed, recipes_file, force):
    """Expand transcribed lines with degraded synthetic copies."""
    project = _project(project_path)
    params = {"multiplier": multiplier, "seed": seed}
    if recipes_file:
        params["recipes"] = json.loads(Path(recipes_file).read_text(encoding="utf-8"))
    _run(project, JobKind.AUGMENT, params, force)


@main.command("train-htr")
@click.option("--project", "project_path", required=True, type=click.Path())
@click.option("--iterations", default=10000, show_default=True)
@click.option("--checkpoint-interval", default=1000, show_default=True)
@click.option("--lr", default=1e-4, show_default=True)
@click.option("--momentum", default=0.9, show_default=True)
@click.option("--hidden", default=100, show_default=True)
@click.option("--height", default=48, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--name", default="htr", show_default=True)
@click.option("--force", is_flag=True)
def train_htr(project_path, iterations, checkpoint_interval, lr, momentum, hidden, height, seed, name, force):
    """Train the line recognizer on all transcribed lines."""
    project = _project(project_path)
    _run(
        project,
        JobKind.TRAIN_HTR,
        {
            "max_iterations": iterations,
            "checkpoint_interval": checkpoint_interval,
            "lr": lr,
            "momentum": momentum,
            "hidden_size": hidden,
            "input_height": height,
            "seed": seed,
            "name": name,
        },
        force,
    )


@main.command()
@click.option("--project", "project_path", required=True, type=click.Path())
@click.option("--model", default=None, type=click.Path())
@click.option("--all", "recognize_all", is_flag=True, help="also re-predict seen lines")
def recognize(project_path, model, recognize_all):
    """Apply the best model to lines without a transcription."""
    project = _project(project_path)
    params = {"only_unseen": not recognize_all}
    if model:
        params["model"] = model
    _run(project, JobKind.RECOGNIZE, params, force=True)


@main.command()
@click.option("--project", "project_path", required=True, type=click.Path())
@click.option("--model", default=None, type=click.Path())
@click.option("--name", default="eval", show_default=True)
def eval(project_path, model, name):
    """Evaluate a model against every transcribed line; writes JSON + diff."""
    project = _project(project_path)
    params = {"name": name}
    if model:
        params["model"] = model
    job = _run(project, JobKind.EVAL, params, force=True)
    report = json.loads(Path(job.artifacts[0]).read_text(encoding="utf-8"))
    click.echo(f"CER {report['cer']:.4f}  (no spaces {report['cer_no_spaces']:.4f})")
    if report["confusion"]:
        click.echo("most frequent confusions:")
        click.echo("freq\tpred.\tGT")
        for row in report["confusion"][:10]:
            pred = "[espace]" if row["pred"] == " " else row["pred"]
            gt = "[espace]" if row["gt"] == " " else row["gt"]
            click.echo(f"{row['freq']}\t{pred}\t{gt}")


@main.command()
@click.argument("textfile", type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--id-prefix", default="w", show_default=True)
@click.option("--id-start", default=1, show_default=True)
def tokenize_cmd(textfile, out, id_prefix, id_start):
    """Tokenize raw text into a flat TEI-subset document."""
    text = Path(textfile).read_text(encoding="utf-8")
    doc = pre_encode(text, PatternSet())
    assign_ids(doc, id_prefix, id_start)
    Path(out).write_bytes(emit_tei(doc))
    click.echo(f"wrote {out} ({len(doc.tokens())} tokens)")


main.add_command(tokenize_cmd, name="tokenize")


@main.command("pre-encode")
@click.argument("textfile", type=click.Path(exists=True))
@click.option("--patterns", "patterns_file", default=None, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--id-prefix", default="w", show_default=True)
def pre_encode_cmd(textfile, patterns_file, out, id_prefix):
    """Structure raw text into folios/stanzas/verses via patterns."""
    text = Path(textfile).read_text(encoding="utf-8")
    if patterns_file:
        patterns = PatternSet.from_dict(
            json.loads(Path(patterns_file).read_text(encoding="utf-8"))
        )
    else:
        patterns = PatternSet.default()
    doc = pre_encode(text, patterns)
    assign_ids(doc, id_prefix, 1)
    Path(out).write_bytes(emit_tei(doc))
    click.echo(f"wrote {out} ({len(doc.tokens())} tokens)")


@main.command()
@click.argument("textfile", type=click.Path(exists=True))
@click.option("--profile", required=True, type=click.Path(exists=True))
@click.option("--to", "target", type=click.Choice(["graphematic", "interpreted"]), required=True)
@click.option("--out", default=None, type=click.Path())
def convert(textfile, profile, target, out):
    """Convert a transcription between convention states."""
    prof = conventions.load_profile(profile)
    text = Path(textfile).read_text(encoding="utf-8")
    if target == "graphematic":
        result = conventions.to_graphematic(text, prof)
    else:
        result = conventions.expand_abbreviations(text, prof).interpreted
    if out:
        Path(out).write_text(result, encoding="utf-8")
    else:
        click.echo(result)


@main.command("align-lemmas")
@click.option("--project", "project_path", required=True, type=click.Path())
@click.option("--glossary", "glossary_file", default=None, type=click.Path(exists=True))
@click.option("--accept-top", is_flag=True, help="auto-accept the best candidate")
@click.option("--threshold", default=0.5, show_default=True)
@click.option("--apply-to", "corpus_file", default=None, type=click.Path(exists=True))
def align_lemmas(project_path, glossary_file, accept_top, threshold, corpus_file):
    """Propose lexicon matches for glossary entries; optionally auto-accept."""
    project = _project(project_path)
    glossary_path = Path(glossary_file) if glossary_file else project.lexicon_dir / "glossary.xml"
    entries = glossary_entries(parse_tei(glossary_path.read_bytes()))
    lexicon = LemmaLexicon.load(
        project.lexicon_dir / "lexicon.tsv", project.lexicon_dir / "project_lemmas.tsv"
    )
    log = DecisionLog(project.decisions_log, known_gloss_ids={e.id for e in entries})
    decided = log.replay()
    pending = 0
    for entry in entries:
        if entry.id in decided:
            continue
        candidates = propose_candidates(entry, lexicon, threshold=threshold)
        if accept_top and candidates:
            decision = AlignmentDecision(
                entry.id,
                "accept",
                lemma=candidates[0][0],
                reviewer="cli:accept-top",
                candidates_shown=[list(c) for c in candidates],
            )
            log.append(decision, lexicon)
            click.echo(f"{entry.id}: accepted {candidates[0][0]} ({candidates[0][1]:.2f})")
        else:
            pending += 1
            shown = ", ".join(f"{l} ({s:.2f})" for l, s in candidates) or "none"
            click.echo(f"{entry.id}: {entry.headword} -> {shown}")
    if pending:
        click.echo(f"{pending} entries pending review (serve + UI, or --accept-top)")
    if corpus_file:
        doc = parse_tei(Path(corpus_file).read_bytes())
        _, report = inject_lemmas(doc, log.replay(), lexicon)
        Path(corpus_file).write_bytes(emit_tei(doc))
        click.echo(
            f"injected {report.resolved} lemmas, {report.numerals} numerals, "
            f"{len(report.unresolved)} unresolved"
        )


@main.group()
def embed():
    """Train and query word embeddings."""


@embed.command("train")
@click.option("--project", "project_path", required=True, type=click.Path())
@click.option("--dim", default=100, show_default=True)
@click.option("--window", default=5, show_default=True)
@click.option("--negatives", default=5, show_default=True)
@click.option("--epochs", default=5, show_default=True)
@click.option("--min-count", default=5, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--force", is_flag=True)
def embed_train(project_path, dim, window, negatives, epochs, min_count, seed, force):
    project = _project(project_path)
    _run(
        project,
        JobKind.EMBED,
        {
            "dim": dim,
            "window": window,
            "negatives": negatives,
            "epochs": epochs,
            "min_count": min_count,
            "seed": seed,
        },
        force,
    )


def _load_table(project_path):
    project = _project(project_path)
    return EmbeddingTable.load(project.models_dir / "embeddings.bin")


@embed.command("nearest")
@click.argument("word")
@click.option("--project", "project_path", required=True, type=click.Path())
@click.option("-k", default=10, show_default=True)
def embed_nearest(word, project_path, k):
    table = _load_table(project_path)
    for neighbour, score in table.nearest(word, k):
        click.echo(f"{neighbour}\t{score:.3f}")


@embed.command("cluster")
@click.option("--project", "project_path", required=True, type=click.Path())
@click.option("-n", "n_clusters", default=8, show_default=True)
def embed_cluster(project_path, n_clusters):
    table = _load_table(project_path)
    labels = cluster_ward(table, min(n_clusters, len(table.vocab)))
    for word in table.vocab.words:
        click.echo(f"{word}\t{labels[word]}")


@embed.command("project")
@click.option("--project", "project_path", required=True, type=click.Path())
@click.option("--out", default=None, type=click.Path())
@click.option("--clusters", default=8, show_default=True)
def embed_project(project_path, out, clusters):
    project = _project(project_path)
    table = _load_table(project_path)
    points = project_2d(table)
    labels = cluster_ward(table, min(clusters, len(table.vocab)))
    svg = scatter_svg(points, labels)
    out = Path(out) if out else project.models_dir / "embeddings.svg"
    Path(out).write_text(svg, encoding="utf-8")
    click.echo(f"wrote {out}")


@main.group()
def lemmatize():
    """Train, apply and evaluate the lemmatizer."""


@lemmatize.command("train")
@click.option("--project", "project_path", required=True, type=click.Path())
@click.option("--epochs", default=100, show_default=True)
@click.option("--lr", default=0.1, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--force", is_flag=True)
def lemmatize_train(project_path, epochs, lr, seed, force):
    project = _project(project_path)
    _run(
        project,
        JobKind.LEMMATIZE_TRAIN,
        {"epochs": epochs, "lr": lr, "seed": seed},
        force,
    )


@lemmatize.command("apply")
@click.option("--project", "project_path", required=True, type=click.Path())
@click.option("--file", "files", multiple=True, type=click.Path(exists=True))
def lemmatize_apply(project_path, files):
    project = _project(project_path)
    params = {}
    if files:
        params["files"] = [str(f) for f in files]
    _run(project, JobKind.LEMMATIZE_APPLY, params, force=True)


@lemmatize.command("eval")
@click.option("--project", "project_path", required=True, type=click.Path())
def lemmatize_eval(project_path):
    project = _project(project_path)
    report_path = project.root / "reports" / "lemmatizer.json"
    if not report_path.exists():
        click.echo("no lemmatizer report yet; run lemmatize train", err=True)
        sys.exit(1)
    click.echo(report_path.read_text(encoding="utf-8"))


@main.command()
@click.option("--project", "project_path", required=True, type=click.Path())
@click.option("--port", default=8023, show_default=True)
@click.option("--ui", "ui_dir", default=None, type=click.Path(exists=True))
@click.option("--host", default="127.0.0.1", show_default=True)
def serve(project_path, port, ui_dir, host):
    """Run the review service (lines + alignments + jobs API)."""
    from .service import serve as run_service

    project = _project(project_path)
    if ui_dir is None:
        bundled = Path(__file__).resolve().parents[3] / "frontend" / "dist"
        ui_dir = bundled if bundled.exists() else None
    click.echo(f"serving {project.root} on http://{host}:{port}")
    run_service(project, port=port, ui_dir=ui_dir, host=host)


@main.command()
@click.option("--project", "project_path", required=True, type=click.Path())
@click.option("--pages", default=3, show_default=True)
@click.option("--lines-per-page", default=8, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option(
    "--holdout",
    default=0,
    show_default=True,
    help="keep the last N pages untranscribed (their text goes to .heldout.txt)",
)
@click.option(
    "--attach-gt",
    is_flag=True,
    help="after preprocess: attach the bundled page transcriptions to the "
    "segmented line records (stand-in for the human correction pass)",
)
def fixture(project_path, pages, lines_per_page, seed, holdout, attach_gt):
    """Generate the bundled synthetic demo fixture (pages, gt, lexicon)."""
    import random as _random

    from ..project import LineStatus

    project = _project(project_path)
    if attach_gt:
        attached = 0
        for gt_path in sorted(project.images_dir.glob("*.gt.txt")):
            page_id = gt_path.name[: -len(".gt.txt")]
            texts = gt_path.read_text(encoding="utf-8").splitlines()
            records = [r for r in project.load_lines() if r.page_id == page_id]
            records.sort(key=lambda r: r.bbox[1] if r.bbox else 0)
            if len(records) != len(texts):
                raise click.ClickException(
                    f"{page_id}: {len(records)} segmented lines vs {len(texts)} gt lines"
                )
            for record, text in zip(records, texts):
                record.gt_text = text
                record.status = LineStatus.CORRECTED
                project.save_line(record)
                attached += 1
        click.echo(f"attached ground truth to {attached} lines")
        return
    fonts = synth.available_fonts()
    rng = _random.Random(seed)
    font_names = list(fonts)
    for p in range(pages):
        texts = [synth.sample_text(rng) for _ in range(lines_per_page)]
        font = fonts[font_names[p % len(font_names)]]
        page = synth.make_page(texts, font)
        page_path = project.images_dir / f"page{p:02d}.png"
        imaging.write_gray(page, page_path)
        suffix = ".heldout.txt" if p >= pages - holdout else ".gt.txt"
        gt_path = project.images_dir / f"page{p:02d}{suffix}"
        gt_path.write_text("\n".join(texts), encoding="utf-8")
    synth.write_lexicon(project.lexicon_dir / "lexicon.tsv")
    synth.write_glossary(project.lexicon_dir / "glossary.xml")
    synth.write_demo_profile(project.lexicon_dir / "profiles" / "demo.profile")
    corpus_src = synth.write_corpus_source(project.corpus_dir / "source.xml", seed=seed)
    click.echo(f"fixture ready: {pages} pages, corpus source {corpus_src.name}")


if __name__ == "__main__":
    main()
