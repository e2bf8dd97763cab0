"""Command line interface.

Exit codes: 0 on success, 1 on usage errors, 2 on data errors.
"""

from __future__ import annotations

import json
import sys

import click

from .bpe import ByteLevelBPE
from .corpus import Corpus, preprocess, split
from .errors import DataError
from .ngram import (
    ORIGINAL,
    KneserNeyLM,
    delta_surprisal,
    ingest_external,
    surprisal,
)
from .shuffling import PermutationManifest, apply_shuffle, invert_shuffle
from .sweep import ExperimentConfig, pls_report, report, run_sweep
from .vocab_stats import (
    VocabStatsRecord,
    coverage_curve,
    stats_record,
)


def _parse_theta(value: str):
    if value == ORIGINAL:
        return None
    try:
        return float(value)
    except ValueError:
        raise click.UsageError(f"theta must be a number or '{ORIGINAL}': {value!r}")


@click.group()
def cli():
    """Deterministic word-order perturbation and learnability metrics."""


@cli.command("preprocess")
@click.argument("input_path", type=click.Path(exists=True))
@click.argument("output_path", type=click.Path())
@click.option("--language", default=None, help="Language tag for language-specific rules.")
@click.option("--max-len", default=80, show_default=True, help="Drop longer sentences.")
def preprocess_cmd(input_path, output_path, language, max_len):
    """Clean raw text (one candidate sentence per line) into a corpus."""
    with open(input_path, "rb") as fh:
        corpus, rep = preprocess(fh.read().splitlines(), language=language, max_len=max_len)
    corpus.save(output_path)
    click.echo(
        f"kept {rep.kept} sentences ({len(corpus)} after splitting), "
        f"dropped {rep.dropped}, invalid utf-8 lines {rep.invalid_utf8}"
    )


@cli.command("split")
@click.argument("input_path", type=click.Path(exists=True))
@click.option("--train", required=True, type=int)
@click.option("--valid", required=True, type=int)
@click.option("--test", required=True, type=int)
@click.option("--seed", default=0, show_default=True)
@click.option("--out-prefix", default="corpus", show_default=True)
def split_cmd(input_path, train, valid, test, seed, out_prefix):
    """Deterministically split a corpus into train/valid/test files."""
    corpus = Corpus.load(input_path)
    parts = split(corpus, (train, valid, test), seed)
    for name, part in zip(("train", "valid", "test"), parts):
        path = f"{out_prefix}.{name}.txt"
        part.save(path)
        click.echo(f"{path}: {len(part)} sentences")


@cli.command("shuffle")
@click.argument("input_path", type=click.Path(exists=True))
@click.argument("output_path", type=click.Path())
@click.option("--theta", required=True, help=f"Order parameter, or '{ORIGINAL}'.")
@click.option("--granularity", type=click.Choice(["word", "subword"]), default="word",
              show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--max-len", default=80, show_default=True)
@click.option("--manifest-out", type=click.Path(), default=None,
              help="Write the permutation manifest JSON here.")
@click.option("--manifest", "manifest_in", type=click.Path(exists=True), default=None,
              help="Reuse an existing manifest instead of sampling one.")
@click.option("--tokenizer", "tokenizer_path", type=click.Path(exists=True), default=None,
              help="Tokenizer model (required for subword granularity).")
def shuffle_cmd(input_path, output_path, theta, granularity, seed, max_len,
                manifest_out, manifest_in, tokenizer_path):
    """Apply deterministic per-length shuffling to a corpus."""
    corpus = Corpus.load(input_path)
    if manifest_in is not None:
        manifest = PermutationManifest.load(manifest_in)
    else:
        manifest = PermutationManifest.build(_parse_theta(theta), max_len, granularity, seed)
    tokenizer = ByteLevelBPE.load(tokenizer_path) if tokenizer_path else None
    if manifest.granularity == "subword" and tokenizer is None:
        raise click.UsageError("subword shuffling requires --tokenizer")
    shuffled = apply_shuffle(corpus, manifest, tokenizer)
    shuffled.save(output_path)
    if manifest_out is not None:
        manifest.save(manifest_out)
    click.echo(f"shuffled {len(corpus)} sentences -> {output_path}")


@cli.command("unshuffle")
@click.argument("input_path", type=click.Path(exists=True))
@click.argument("output_path", type=click.Path())
@click.option("--manifest", "manifest_in", type=click.Path(exists=True), required=True)
@click.option("--tokenizer", "tokenizer_path", type=click.Path(exists=True), default=None)
def unshuffle_cmd(input_path, output_path, manifest_in, tokenizer_path):
    """Invert a shuffle given its manifest."""
    corpus = Corpus.load(input_path)
    manifest = PermutationManifest.load(manifest_in)
    tokenizer = ByteLevelBPE.load(tokenizer_path) if tokenizer_path else None
    if manifest.granularity == "subword" and tokenizer is None:
        raise click.UsageError("subword unshuffling requires --tokenizer")
    restored = invert_shuffle(corpus, manifest, tokenizer)
    restored.save(output_path)
    click.echo(f"restored {len(corpus)} sentences -> {output_path}")


@cli.command("train-bpe")
@click.argument("input_path", type=click.Path(exists=True))
@click.argument("model_path", type=click.Path())
@click.option("--vocab-size", default=16000, show_default=True)
@click.option("--min-freq", default=2, show_default=True)
def train_bpe_cmd(input_path, model_path, vocab_size, min_freq):
    """Train a byte-level BPE tokenizer on a corpus."""
    corpus = Corpus.load(input_path)
    model = ByteLevelBPE(vocab_size=vocab_size, min_frequency=min_freq).fit(corpus.texts())
    model.save(model_path)
    click.echo(f"trained {model.n_tokens} tokens ({len(model.merges_)} merges) -> {model_path}")


@cli.command("stats")
@click.argument("input_path", type=click.Path(exists=True))
@click.option("--tokenizer", "tokenizer_path", type=click.Path(exists=True), required=True)
@click.option("--unit", type=click.Choice(["word", "subword"]), default="word",
              show_default=True, help="Unit for the emitted coverage curve.")
@click.option("--r-max", default=100000, show_default=True)
@click.option("--language", default="und", show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Write the stats CSV row here (default stdout).")
@click.option("--curve-out", type=click.Path(), default=None,
              help="Also write the full (rank, coverage) curve CSV.")
def stats_cmd(input_path, tokenizer_path, unit, r_max, language, out_path, curve_out):
    """Compute the nine vocabulary predictors (and optionally a curve)."""
    corpus = Corpus.load(input_path, language)
    tokenizer = ByteLevelBPE.load(tokenizer_path)
    record = stats_record(corpus, tokenizer, r_max)
    header = ",".join(["language", *VocabStatsRecord.FIELDS])
    row = ",".join([language] + [repr(v) for v in record.as_row()])
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(header + "\n" + row + "\n")
    else:
        click.echo(header)
        click.echo(row)
    if curve_out:
        curve = coverage_curve(corpus, unit, tokenizer if unit == "subword" else None)
        with open(curve_out, "w", encoding="utf-8") as fh:
            fh.write("rank,coverage\n")
            for r, c in enumerate(curve.coverage, start=1):
                fh.write(f"{r},{c!r}\n")


@cli.command("train-lm")
@click.argument("input_path", type=click.Path(exists=True))
@click.option("--tokenizer", "tokenizer_path", type=click.Path(exists=True), required=True)
@click.option("--order", default=4, show_default=True)
@click.option("--discount", default=0.75, show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True,
              help="Path for the pickled model.")
def train_lm_cmd(input_path, tokenizer_path, order, discount, out_path):
    """Train the Kneser-Ney n-gram proxy on a tokenized corpus."""
    import pickle

    corpus = Corpus.load(input_path)
    tokenizer = ByteLevelBPE.load(tokenizer_path)
    sequences = [tokenizer.encode(t) for t in corpus.texts()]
    lm = KneserNeyLM(order=order, discount=discount, vocab_size=tokenizer.n_tokens)
    lm.fit(sequences)
    with open(out_path, "wb") as fh:
        pickle.dump(lm, fh)
    click.echo(f"trained order-{order} model on {len(sequences)} sentences -> {out_path}")


@cli.command("surprisal")
@click.argument("input_path", type=click.Path(exists=True))
@click.option("--lm", "lm_path", type=click.Path(exists=True), required=True)
@click.option("--tokenizer", "tokenizer_path", type=click.Path(exists=True), required=True)
@click.option("--theta", default=ORIGINAL, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--bits", is_flag=True, help="Report surprisal in bits instead of nats.")
@click.option("--records-out", type=click.Path(), default=None,
              help="Write per-token log-prob records (ingest format).")
def surprisal_cmd(input_path, lm_path, tokenizer_path, theta, seed, bits, records_out):
    """Measure mean per-token surprisal of a corpus under a trained model."""
    import math
    import pickle

    corpus = Corpus.load(input_path)
    tokenizer = ByteLevelBPE.load(tokenizer_path)
    with open(lm_path, "rb") as fh:
        lm = pickle.load(fh)
    sequences = [tokenizer.encode(t) for t in corpus.texts()]
    theta_value = theta if theta == ORIGINAL else float(theta)
    result = surprisal(lm, sequences, theta=theta_value, seed=seed, records_path=records_out)
    value = result.S / math.log(2) if bits else result.S
    unit = "bits" if bits else "nats"
    click.echo(json.dumps({"theta": str(result.theta), "seed": result.seed,
                           "S": value, "unit": unit, "N": result.N}))


@cli.command("ingest")
@click.argument("records_path", type=click.Path(exists=True))
def ingest_cmd(records_path):
    """Aggregate external per-token log-prob records to surprisal values."""
    for res in ingest_external(records_path):
        click.echo(json.dumps({"variant": res.variant, "theta": str(res.theta),
                               "seed": res.seed, "S": res.S, "N": res.N}))


@cli.command("delta")
@click.argument("records_path", type=click.Path(exists=True))
@click.option("--baseline", "baseline_path", type=click.Path(exists=True), required=True,
              help="Records of the original-order variant.")
def delta_cmd(records_path, baseline_path):
    """Surprisal change per theta relative to an original-order baseline."""
    results = ingest_external(records_path)
    baselines = ingest_external(baseline_path)
    curve = delta_surprisal(results, baselines)
    click.echo("theta,median_delta_S,q25,q75")
    for t, med, q25, q75 in zip(curve.thetas, curve.median, curve.q25, curve.q75):
        click.echo(f"{t},{med!r},{q25!r},{q75!r}")


@cli.command("pls")
@click.argument("predictors_path", type=click.Path(exists=True))
@click.argument("responses_path", type=click.Path(exists=True))
@click.option("--components", default="auto", show_default=True,
              help="Number of latent components, or 'auto' for LOO-CV selection.")
@click.option("--loo", is_flag=True, default=True, help="Kept for interface compatibility.")
@click.option("--out", "out_dir", type=click.Path(), default="pls_out", show_default=True)
def pls_cmd(predictors_path, responses_path, components, loo, out_dir):
    """PLS regression of surprisal responses on vocabulary predictors."""
    if components != "auto":
        try:
            components = int(components)
        except ValueError:
            raise click.UsageError("--components must be an integer or 'auto'")
    summary = pls_report(predictors_path, responses_path, components, out_dir)
    click.echo(json.dumps({"n_components": summary["n_components"],
                           "overall_r2": summary["overall_r2"]}))


@cli.command("sweep")
@click.option("--config", "config_path", type=click.Path(exists=True), required=True)
def sweep_cmd(config_path):
    """Run the full (theta, seed, vocab size) experiment grid."""
    config = ExperimentConfig.from_file(config_path)
    summary = run_sweep(config)
    click.echo(json.dumps(summary))


@cli.command("report")
@click.option("--store", "store_path", type=click.Path(exists=True), required=True)
@click.option("--kind", type=click.Choice(["surprisal", "delta-scatter", "vocab-size", "stats"]),
              required=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
def report_cmd(store_path, kind, out_path):
    """Emit a figure-ready CSV table from a sweep result store."""
    report(store_path, kind, out_path)
    click.echo(f"wrote {kind} report -> {out_path}")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Abort:
        return 1
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return 1
    except (DataError, OSError, ValueError) as exc:
        click.echo(f"data error: {exc}", err=True)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
