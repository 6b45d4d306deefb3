"""Pipeline orchestration: ingest -> embed -> train -> eval -> project/serve.

All subcommands read one JSON config file and write artifacts under the
output directory. Seeds come from the config or flags, never from the clock,
so identical invocations produce byte-identical artifacts. Exit codes: 0 all
requested artifacts produced, 2 usage/config problems, 1 stage failures.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import DatasetSplit, PromptRecord, validate_corpus
from .embed import (
    CacheFormatError,
    ProviderConfig,
    embed_corpus,
    read_embedding_cache,
)
from .ingest import CorpusManifest, deduplicate, load_corpus, stratified_split
from .learn import CONFIG_TYPES, FAMILIES, TRAINERS, load_model, save_model
from .metrics import evaluate, read_reports, render_comparison, write_reports
from .project import (
    emit_scatter,
    pca_project,
    perplexity_sweep,
    stratified_subsample,
)
from .serve import DetectionService, ServiceConfig, run_service

logger = logging.getLogger(__name__)


class UsageError(Exception):
    """Config/invocation problems: reported with a hint, exit code 2."""


@dataclass(frozen=True)
class PipelineConfig:
    """Parsed JSON config shared by every subcommand."""

    manifest_path: str
    provider: ProviderConfig
    test_fraction: float
    seed: int
    output_dir: str = "out"
    cache_dir: str = ""
    classifiers: tuple[str, ...] = FAMILIES
    hyperparameters: dict = field(default_factory=dict)
    threshold: float = 0.5
    project_seed: int = 0
    perplexities: tuple[float, ...] = (5.0, 15.0, 30.0, 50.0)
    max_projection_rows: int = 5000

    def __post_init__(self) -> None:
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError(f"split.test_fraction must be in (0, 1), got {self.test_fraction}")
        for family in self.classifiers:
            if family not in FAMILIES:
                raise ValueError(f"unknown classifier {family!r}, expected one of {FAMILIES}")
        for family in self.hyperparameters:
            if family not in FAMILIES:
                raise ValueError(f"hyperparameters for unknown classifier {family!r}")

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        path = Path(path)
        if not path.exists():
            raise UsageError(f"config file not found: {path}")
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise UsageError(f"config {path} is not valid JSON: {exc}") from None
        try:
            manifest = raw["manifest"]
            split = raw.get("split", {})
            if "seed" not in split:
                raise KeyError("split.seed (seeds are mandatory; there is no wall-clock default)")
            provider = ProviderConfig(**raw.get("provider", {"kind": "local-hash"}))
            project = raw.get("project", {})
            return cls(
                manifest_path=manifest,
                provider=provider,
                test_fraction=float(split.get("test_fraction", 0.2)),
                seed=int(split["seed"]),
                output_dir=raw.get("output_dir", "out"),
                cache_dir=raw.get("cache_dir", ""),
                classifiers=tuple(raw.get("classifiers", FAMILIES)),
                hyperparameters=raw.get("hyperparameters", {}),
                threshold=float(raw.get("threshold", 0.5)),
                project_seed=int(project.get("seed", 0)),
                perplexities=tuple(float(p) for p in project.get("perplexities", (5, 15, 30, 50))),
                max_projection_rows=int(project.get("max_rows", 5000)),
            )
        except KeyError as exc:
            raise UsageError(f"config {path} is missing required field {exc}") from None
        except (TypeError, ValueError) as exc:
            raise UsageError(f"config {path} is invalid: {exc}") from None

    @property
    def out(self) -> Path:
        return Path(self.output_dir)

    @property
    def cache_path(self) -> Path:
        base = Path(self.cache_dir) if self.cache_dir else self.out
        return base / f"embeddings-{self.provider.tag}.csv"

    def model_path(self, family: str) -> Path:
        return self.out / f"model-{self.provider.tag}-{family}.json"

    def report_path(self, family: str) -> Path:
        return self.out / f"report-{self.provider.tag}-{family}.json"


def _apply_overrides(config: PipelineConfig, args: argparse.Namespace) -> PipelineConfig:
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
        changes["project_seed"] = args.seed
    if getattr(args, "provider", None):
        changes["provider"] = dataclasses.replace(config.provider, kind=args.provider)
    if getattr(args, "out", None):
        changes["output_dir"] = args.out
    return dataclasses.replace(config, **changes) if changes else config


class _StageOutputs:
    """Tracks files a stage writes so a failed stage leaves nothing partial."""

    def __init__(self) -> None:
        self.paths: list[Path] = []

    def add(self, path: Path) -> Path:
        self.paths.append(path)
        return path

    def discard_all(self) -> None:
        for path in self.paths:
            try:
                path.unlink(missing_ok=True)
            except OSError:  # pragma: no cover - best-effort cleanup
                logger.warning("could not remove partial output %s", path)


def _write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------- ingest


def _load_clean_records(config: PipelineConfig):
    manifest_path = Path(config.manifest_path)
    if not manifest_path.exists():
        raise UsageError(f"manifest not found: {manifest_path}")
    manifest = CorpusManifest.load(manifest_path)
    records, row_errors = load_corpus(manifest)
    summary = validate_corpus(records)
    kept, dedup = deduplicate(summary.accepted)
    return kept, row_errors, summary, dedup


def cmd_ingest(args: argparse.Namespace) -> int:
    config = _apply_overrides(PipelineConfig.load(args.config), args)
    kept, row_errors, summary, dedup = _load_clean_records(config)
    split = stratified_split(kept, test_fraction=config.test_fraction, seed=config.seed)

    outputs = _StageOutputs()
    try:
        corpus_path = outputs.add(config.out / "corpus.csv")
        corpus_path.parent.mkdir(parents=True, exist_ok=True)
        with open(corpus_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["id", "source", "label", "text"])
            for r in kept:
                writer.writerow([r.id, r.source, r.label, r.text])

        split_path = outputs.add(config.out / "split.json")
        _write_json(
            split_path,
            {
                "seed": config.seed,
                "test_fraction": config.test_fraction,
                "train_ids": [kept[i].id for i in split.train_indices],
                "test_ids": [kept[i].id for i in split.test_indices],
            },
        )
    except Exception:
        outputs.discard_all()
        raise

    labels = [r.label for r in kept]
    print(
        f"accepted {len(kept)} records ({labels.count(0)} benign, {labels.count(1)} malicious); "
        f"rejected {len(row_errors) + summary.n_rejected()} rows "
        f"({len(row_errors)} unparseable, {summary.n_rejected()} invalid); "
        f"removed {dedup.removed} duplicates ({dedup.label_conflicts} label conflicts)"
    )
    print(f"split seed {config.seed}: {len(split.train_indices)} train / {len(split.test_indices)} test")
    print(f"wrote {corpus_path} and {split_path}")
    return 0


def _read_corpus_csv(path: Path) -> list[PromptRecord]:
    if not path.exists():
        raise UsageError(f"corpus file not found: {path} (run `promptgate ingest` first)")
    records = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            records.append(
                PromptRecord(
                    id=row["id"], source=row["source"], label=int(row["label"]), text=row["text"]
                )
            )
    return records


def _read_split(config: PipelineConfig, ids: tuple[str, ...]) -> DatasetSplit:
    split_path = config.out / "split.json"
    if not split_path.exists():
        raise UsageError(f"split file not found: {split_path} (run `promptgate ingest` first)")
    raw = json.loads(split_path.read_text(encoding="utf-8"))
    position = {rec_id: i for i, rec_id in enumerate(ids)}
    try:
        train = [position[i] for i in raw["train_ids"]]
        test = [position[i] for i in raw["test_ids"]]
    except KeyError as exc:
        raise ValueError(f"{split_path} references id {exc} not present in the dataset") from None
    return DatasetSplit(
        train_indices=np.asarray(sorted(train), dtype=np.int64),
        test_indices=np.asarray(sorted(test), dtype=np.int64),
        seed=int(raw["seed"]),
        test_fraction=float(raw["test_fraction"]),
    )


# ----------------------------------------------------------------- embed


def cmd_embed(args: argparse.Namespace) -> int:
    config = _apply_overrides(PipelineConfig.load(args.config), args)
    records = _read_corpus_csv(config.out / "corpus.csv")
    dataset = embed_corpus(config.provider, records, config.cache_path)
    print(f"embedded {len(dataset)} records at dim {dataset.dim} -> {config.cache_path}")
    return 0


# ----------------------------------------------------------------- train


def _load_dataset(config: PipelineConfig):
    if not config.cache_path.exists():
        raise UsageError(f"embedding cache not found: {config.cache_path} (run `promptgate embed` first)")
    dataset = read_embedding_cache(config.cache_path)
    if dataset.provider_tag != config.provider.tag:
        raise UsageError(
            f"cache {config.cache_path} was built by provider {dataset.provider_tag!r}, "
            f"config wants {config.provider.tag!r}"
        )
    return dataset


def _train_family(config: PipelineConfig, family: str, dataset, split: DatasetSplit):
    params = dict(config.hyperparameters.get(family, {}))
    if family in ("forest", "gbt") and "seed" not in params:
        params["seed"] = config.seed
    family_config = CONFIG_TYPES[family](**params)
    X = dataset.matrix[split.train_indices]
    y = dataset.labels[split.train_indices]
    model = TRAINERS[family](X, y, family_config, provider_tag=dataset.provider_tag)
    return model


def cmd_train(args: argparse.Namespace) -> int:
    config = _apply_overrides(PipelineConfig.load(args.config), args)
    dataset = _load_dataset(config)
    split = _read_split(config, dataset.ids)
    outputs = _StageOutputs()
    try:
        for family in config.classifiers:
            model = _train_family(config, family, dataset, split)
            path = outputs.add(config.model_path(family))
            save_model(model, path)
            print(f"trained {family} on {len(split.train_indices)} rows -> {path}")
    except Exception:
        outputs.discard_all()
        raise
    return 0


# ------------------------------------------------------------------ eval


def cmd_eval(args: argparse.Namespace) -> int:
    config = _apply_overrides(PipelineConfig.load(args.config), args)
    dataset = _load_dataset(config)
    split = _read_split(config, dataset.ids)
    outputs = _StageOutputs()
    reports = []
    try:
        for family in config.classifiers:
            model_path = config.model_path(family)
            if not model_path.exists():
                raise UsageError(f"model not found: {model_path} (run `promptgate train` first)")
            model = load_model(model_path)
            report = evaluate(model, dataset, split, threshold=config.threshold)
            write_reports([report], outputs.add(config.report_path(family)))
            reports.append(report)
        comparison_md = render_comparison(reports, format="markdown")
        comparison_json = render_comparison(reports, format="json")
        md_path = outputs.add(config.out / "comparison.md")
        md_path.write_text(comparison_md, encoding="utf-8")
        json_path = outputs.add(config.out / "comparison.json")
        json_path.write_text(comparison_json, encoding="utf-8")
    except Exception:
        outputs.discard_all()
        raise
    print(comparison_md, end="")
    print(f"wrote {len(reports)} reports and comparison files to {config.out}", file=sys.stderr)
    return 0


# -------------------------------------------------------------- pipeline


def cmd_pipeline(args: argparse.Namespace) -> int:
    for stage_name, handler in (
        ("ingest", cmd_ingest),
        ("embed", cmd_embed),
        ("train", cmd_train),
        ("eval", cmd_eval),
    ):
        try:
            code = handler(args)
        except UsageError:
            raise
        except Exception as exc:
            raise RuntimeError(f"stage {stage_name} failed: {exc}") from exc
        if code != 0:  # pragma: no cover - handlers raise instead
            raise RuntimeError(f"stage {stage_name} failed with exit code {code}")
    return 0


# --------------------------------------------------------------- project


def cmd_project(args: argparse.Namespace) -> int:
    config = _apply_overrides(PipelineConfig.load(args.config), args)
    dataset = _load_dataset(config)
    keep = stratified_subsample(
        dataset.labels, max_rows=config.max_projection_rows, seed=config.project_seed
    )
    X = dataset.matrix[keep]
    labels = dataset.labels[keep]

    outputs = _StageOutputs()
    try:
        pca_result = pca_project(X)
        emit_scatter(pca_result, labels, outputs.add(config.out / "pca.svg"), format="svg")
        _write_json(
            outputs.add(config.out / "variance.json"),
            {"explained_variance_ratio": list(pca_result.explained_variance_ratio)},
        )
        entries = perplexity_sweep(X, config.perplexities, seed=config.project_seed)
        for entry in entries:
            name = f"tsne_p{entry.perplexity:g}.svg"
            emit_scatter(entry.result, labels, outputs.add(config.out / name), format="svg")
        _write_json(
            outputs.add(config.out / "sweep.json"),
            [
                {"perplexity": e.perplexity, "knn_preservation": e.knn_preservation}
                for e in entries
            ],
        )
    except Exception:
        outputs.discard_all()
        raise
    print(
        f"projected {len(labels)} rows: pca.svg, {len(entries)} t-SNE figures, "
        f"variance.json, sweep.json in {config.out}"
    )
    return 0


# ------------------------------------------------------------ serve/detect


def _service_config(args: argparse.Namespace, config: PipelineConfig) -> ServiceConfig:
    model_path = args.model or os.environ.get("PROMPTGATE_MODEL", "")
    if not model_path:
        raise UsageError("no model given: pass --model or set PROMPTGATE_MODEL")
    listen = args.listen or os.environ.get("PROMPTGATE_LISTEN", "") or "127.0.0.1:8000"
    threshold = config.threshold
    env_threshold = os.environ.get("PROMPTGATE_THRESHOLD", "")
    if env_threshold:
        threshold = float(env_threshold)
    if args.threshold is not None:
        threshold = args.threshold
    return ServiceConfig(
        model_path=model_path,
        provider=config.provider,
        listen_address=listen,
        threshold=threshold,
        fail_closed=bool(getattr(args, "fail_closed", False)),
    )


def cmd_serve(args: argparse.Namespace) -> int:
    config = _apply_overrides(PipelineConfig.load(args.config), args)
    run_service(_service_config(args, config))
    return 0


def cmd_detect(args: argparse.Namespace) -> int:
    config = _apply_overrides(PipelineConfig.load(args.config), args)
    service = DetectionService(_service_config(args, config))
    service.load()
    result = service.detect(args.text)
    print(json.dumps(result, indent=2, sort_keys=True))
    return 0


# ------------------------------------------------------------------ main


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="promptgate",
        description="Prompt-injection detection pipeline: ingest, embed, train, evaluate, project, serve.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, handler, help_text: str, serve_flags: bool = False):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="JSON pipeline config")
        p.add_argument("--seed", type=int, default=None, help="override config seeds")
        p.add_argument(
            "--provider", choices=("remote", "local-hash"), default=None,
            help="override provider kind",
        )
        p.add_argument("--out", default=None, help="override output directory")
        if serve_flags:
            p.add_argument("--model", default=None, help="model file (or PROMPTGATE_MODEL)")
            p.add_argument("--listen", default=None, help="host:port (or PROMPTGATE_LISTEN)")
            p.add_argument(
                "--threshold", type=float, default=None,
                help="decision threshold (or PROMPTGATE_THRESHOLD)",
            )
            p.add_argument(
                "--fail-closed", dest="fail_closed", action="store_true",
                help="on provider failure, label malicious instead of returning 502",
            )
        p.set_defaults(func=handler)
        return p

    add("ingest", cmd_ingest, "load, validate, deduplicate, split the corpus")
    add("embed", cmd_embed, "embed the ingested corpus into the cache")
    add("train", cmd_train, "train configured classifiers on the train split")
    add("eval", cmd_eval, "evaluate trained models and render the comparison")
    add("pipeline", cmd_pipeline, "run ingest, embed, train, eval in sequence")
    add("project", cmd_project, "emit PCA/t-SNE scatter figures and summaries")
    add("serve", cmd_serve, "serve a trained model over HTTP", serve_flags=True)
    detect_p = add("detect", cmd_detect, "score one prompt offline", serve_flags=True)
    detect_p.add_argument("--text", required=True, help="prompt text to score")

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print("hint: see `promptgate <subcommand> --help` for usage", file=sys.stderr)
        return 2
    except Exception as exc:
        logger.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
