"""Stage orchestration: artifacts, manifests, staleness checks.

Every stage reads artifacts from the workdir and writes artifacts plus a
manifest holding sha256 hashes of its inputs and outputs, the config
hash, and the package version. No timestamps: reruns with the same
inputs and config produce byte-identical files. A stage refuses to run
when an input artifact no longer matches the manifest of the stage that
produced it, unless forced.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping

from . import __version__, corpus, dedup, extract, synth
from .analysis import compare_label_variants, render_report
from .config import PipelineConfig
from .errors import PipelineError
from .extract import Identifier
from .graph import (
    RelatednessGraph,
    build_graph,
    component_stats,
    export_dot,
    export_graphml,
    read_graph_json,
    stats_to_csv,
    write_graph_json,
)
from .label import (
    generate_oad_pairs,
    label_htrp,
    labeled_ad_from_dict,
    labeled_ad_to_dict,
    pair_to_dict,
    split_components,
    split_report,
)

log = logging.getLogger("adgraph")

ARTIFACTS: dict[str, str] = {
    "records": "records.jsonl",
    "normalized": "normalized.jsonl",
    "rejects": "rejects.jsonl",
    "clusters": "clusters.jsonl",
    "identifiers": "identifiers.jsonl",
    "annotation_rejects": "annotation_rejects.jsonl",
    "graph": "graph.json",
    "stats": "component_stats.csv",
    "split": "split.json",
    "split_report": "split_report.json",
    "oad_pairs": "oad_pairs.jsonl",
    "htrp_labels": "htrp_labels.jsonl",
    "htrp_variant_labels": "htrp_labels_variant.jsonl",
    "compare_report": "compare_report.json",
    "graphml": "graph.graphml",
    "dot": "graph.dot",
    "synth_corpus": "corpus.jsonl",
    "ground_truth": "ground_truth.json",
}


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _pmap(fn: Callable, items: list, threads: int) -> list:
    # worker startup is not free; small batches run inline
    if threads <= 1 or len(items) < 512:
        return [fn(x) for x in items]
    chunk = max(64, len(items) // (threads * 8))
    with ProcessPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items, chunksize=chunk))


def _extract_worker(args: tuple[str | None, corpus.NormalizedAd]) -> list[Identifier]:
    declared, norm = args
    return extract.extract_identifiers(declared, norm)


class StageContext:
    """Workdir paths plus lazily cached artifact readers."""

    def __init__(self, cfg: PipelineConfig, force: bool = False):
        self.cfg = cfg
        self.workdir = cfg.workdir
        self.force = force
        self.threads = cfg.threads
        self._cache: dict[str, object] = {}

    def path(self, artifact: str) -> Path:
        return self.workdir / ARTIFACTS[artifact]

    def records(self) -> list[corpus.AdRecord]:
        if "records" not in self._cache:
            rows = corpus.read_jsonl(self.path("records"))
            self._cache["records"] = [corpus.record_from_dict(r) for r in rows]
        return self._cache["records"]

    def records_by_id(self) -> dict[str, corpus.AdRecord]:
        return {r.ad_id: r for r in self.records()}

    def normalized(self) -> list[corpus.NormalizedAd]:
        if "normalized" not in self._cache:
            rows = corpus.read_jsonl(self.path("normalized"))
            self._cache["normalized"] = [corpus.normalized_from_dict(r) for r in rows]
        return self._cache["normalized"]

    def clusters(self) -> list[dedup.DuplicateCluster]:
        rows = corpus.read_jsonl(self.path("clusters"))
        return [dedup.cluster_from_dict(r) for r in rows]

    def identifiers_by_ad(self) -> dict[str, list[Identifier]]:
        out: dict[str, list[Identifier]] = {}
        for row in corpus.read_jsonl(self.path("identifiers")):
            ident = extract.identifier_from_dict(
                {k: row[k] for k in ("kind", "raw", "canonical", "start", "end")}
            )
            out.setdefault(row["ad_id"], []).append(ident)
        return out

    def graph(self) -> RelatednessGraph:
        if "graph" not in self._cache:
            self._cache["graph"] = read_graph_json(self.path("graph"))
        return self._cache["graph"]

    def split_assignment(self) -> dict[int, str]:
        with open(self.path("split"), encoding="utf-8") as fh:
            data = json.load(fh)
        return {int(cid): side for cid, side in data["components"].items()}

    def write_json(self, artifact: str, obj: dict) -> None:
        p = self.path(artifact)
        p.parent.mkdir(parents=True, exist_ok=True)
        with open(p, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(obj, fh, ensure_ascii=False, sort_keys=True, indent=1)
            fh.write("\n")


def _resolve_corpus(cfg: PipelineConfig) -> Path:
    if cfg.corpus_path is not None:
        return cfg.corpus_path
    fallback = cfg.workdir / ARTIFACTS["synth_corpus"]
    if fallback.exists():
        log.info("corpus.path not set, using %s", fallback)
        return fallback
    raise PipelineError(
        "no corpus configured: set corpus.path (or --corpus), "
        "or run the 'synth' stage first"
    )


# ---------------------------------------------------------------- stages


def _run_synth(ctx: StageContext) -> None:
    synth.generate(ctx.cfg.synth_spec(), ctx.workdir)


def _run_ingest(ctx: StageContext) -> None:
    path = _resolve_corpus(ctx.cfg)
    records, rejects = corpus.ingest(path, ctx.cfg.corpus_format)
    normalized = _pmap(corpus.normalize, records, ctx.threads)
    corpus.write_jsonl(ctx.path("records"), (corpus.record_to_dict(r) for r in records))
    corpus.write_jsonl(
        ctx.path("rejects"), ({"line": r.line, "reason": r.reason} for r in rejects)
    )
    corpus.write_jsonl(
        ctx.path("normalized"), (corpus.normalized_to_dict(n) for n in normalized)
    )
    log.info("ingested %d records, rejected %d", len(records), len(rejects))


def _run_dedup(ctx: StageContext) -> None:
    posted = {r.ad_id: r.posted_at for r in ctx.records()}
    clusters = dedup.deduplicate(ctx.normalized(), ctx.cfg.similarity(), posted)
    corpus.write_jsonl(
        ctx.path("clusters"), (dedup.cluster_to_dict(c) for c in clusters)
    )
    near = sum(1 for c in clusters if c.method == "near")
    log.info("%d clusters (%d near-duplicate)", len(clusters), near)


def _run_extract(ctx: StageContext) -> None:
    records = ctx.records()
    norm_by_id = {n.ad_id: n for n in ctx.normalized()}
    args = [(r.declared_phone, norm_by_id[r.ad_id]) for r in records]
    found = _pmap(_extract_worker, args, ctx.threads)
    ids_by_ad = {r.ad_id: ids for r, ids in zip(records, found)}

    ann_rejects: list = []
    if ctx.cfg.annotations_path is not None:
        annotated, ann_rejects = extract.import_annotations(
            ctx.cfg.annotations_path, norm_by_id
        )
        for ad_id, idents in annotated.items():
            ids_by_ad[ad_id] = extract.merge_identifiers(
                ids_by_ad.get(ad_id, []), idents
            )

    rows = []
    for ad_id in sorted(ids_by_ad):
        for ident in ids_by_ad[ad_id]:
            rows.append({"ad_id": ad_id, **extract.identifier_to_dict(ident)})
    corpus.write_jsonl(ctx.path("identifiers"), rows)
    corpus.write_jsonl(
        ctx.path("annotation_rejects"),
        ({"line": r.line, "reason": r.reason} for r in ann_rejects),
    )
    log.info("%d identifiers across %d ads", len(rows), sum(1 for v in ids_by_ad.values() if v))


def _run_graph(ctx: StageContext) -> None:
    locations = {r.ad_id: r.locations for r in ctx.records()}
    graph = build_graph(
        ctx.clusters(),
        ctx.identifiers_by_ad(),
        locations,
        quarantine_cap=ctx.cfg.quarantine_cap,
    )
    write_graph_json(graph, ctx.path("graph"))
    log.info(
        "%d nodes, %d edges, %d components",
        len(graph.nodes),
        len(graph.edges),
        len(graph.components),
    )


def _run_stats(ctx: StageContext) -> None:
    stats_to_csv(component_stats(ctx.graph()), ctx.path("stats"))


def _run_split(ctx: StageContext) -> None:
    graph = ctx.graph()
    cfg = ctx.cfg.labeling()
    assignment = split_components(graph, cfg)
    report = split_report(graph, assignment, cfg)
    ctx.write_json("split", {"components": {str(c): s for c, s in assignment.items()}})
    ctx.write_json("split_report", report)
    log.info(
        "split: %d train ads, %d test ads, deviation %.4f",
        report["train_ads"],
        report["test_ads"],
        report["deviation"],
    )


def _run_label_oad(ctx: StageContext) -> None:
    graph = ctx.graph()
    texts = {n.ad_id: n.norm_text for n in ctx.normalized() if n.ad_id in graph.component_of}
    pairs = generate_oad_pairs(graph, texts, ctx.cfg.labeling(), ctx.split_assignment())
    corpus.write_jsonl(ctx.path("oad_pairs"), (pair_to_dict(p) for p in pairs))
    log.info("%d labeled pairs", len(pairs))


def _run_label_htrp(ctx: StageContext) -> None:
    labels = label_htrp(ctx.graph(), ctx.cfg.gazetteer(), ctx.cfg.labeling())
    corpus.write_jsonl(ctx.path("htrp_labels"), (labeled_ad_to_dict(a) for a in labels))
    pos = sum(a.label for a in labels)
    log.info("%d ads labeled, %d positive", len(labels), pos)


def _strata_map(ctx: StageContext, graph: RelatednessGraph) -> dict[str, str]:
    key = ctx.cfg.strata_key
    out: dict[str, str] = {}
    if key == "location":
        for node in graph.nodes:
            locs = sorted(
                {s.strip().casefold() for s in graph.node_locations.get(node, []) if s.strip()}
            )
            out[node] = locs[0] if locs else "(none)"
    else:
        by_id = ctx.records_by_id()
        for node in graph.nodes:
            rec = by_id.get(node)
            out[node] = rec.source if rec and rec.source else "(none)"
    return out


def _run_compare(ctx: StageContext) -> None:
    graph = ctx.graph()
    baseline = [labeled_ad_from_dict(r) for r in corpus.read_jsonl(ctx.path("htrp_labels"))]
    variant = label_htrp(graph, ctx.cfg.gazetteer(), ctx.cfg.labeling(variant=True))
    corpus.write_jsonl(
        ctx.path("htrp_variant_labels"), (labeled_ad_to_dict(a) for a in variant)
    )
    report = compare_label_variants(baseline, variant, _strata_map(ctx, graph))
    ctx.write_json("compare_report", report)
    print(render_report(report))


def _run_export(ctx: StageContext) -> None:
    graph = ctx.graph()
    comp = ctx.cfg.export_component
    fmt = ctx.cfg.export_format
    if fmt in ("graphml", "both"):
        export_graphml(graph, ctx.path("graphml"), component=comp)
    if fmt in ("dot", "both"):
        export_dot(graph, ctx.path("dot"), component=comp)


def _export_outputs(cfg: PipelineConfig) -> tuple[str, ...]:
    fmt = cfg.export_format
    if fmt == "both":
        return ("graphml", "dot")
    return ("graphml",) if fmt == "graphml" else ("dot",)


@dataclass(frozen=True)
class StageDef:
    name: str
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    fn: Callable[[StageContext], None]

    def expected_outputs(self, cfg: PipelineConfig) -> tuple[str, ...]:
        if self.name == "export":
            return _export_outputs(cfg)
        return self.outputs


STAGES: dict[str, StageDef] = {
    s.name: s
    for s in (
        StageDef("synth", (), ("synth_corpus", "ground_truth"), _run_synth),
        StageDef("ingest", (), ("records", "normalized", "rejects"), _run_ingest),
        StageDef("dedup", ("records", "normalized"), ("clusters",), _run_dedup),
        StageDef(
            "extract",
            ("records", "normalized"),
            ("identifiers", "annotation_rejects"),
            _run_extract,
        ),
        StageDef("graph", ("clusters", "identifiers", "records"), ("graph",), _run_graph),
        StageDef("stats", ("graph",), ("stats",), _run_stats),
        StageDef("split", ("graph",), ("split", "split_report"), _run_split),
        StageDef(
            "label-oad", ("graph", "split", "normalized"), ("oad_pairs",), _run_label_oad
        ),
        StageDef("label-htrp", ("graph",), ("htrp_labels",), _run_label_htrp),
        StageDef(
            "compare",
            ("graph", "htrp_labels", "records"),
            ("htrp_variant_labels", "compare_report"),
            _run_compare,
        ),
        StageDef("export", ("graph",), ("graphml", "dot"), _run_export),
    )
}

PRODUCER: dict[str, str] = {
    art: s.name for s in STAGES.values() for art in s.outputs
}

ALL_CHAIN = (
    "ingest",
    "dedup",
    "extract",
    "graph",
    "stats",
    "split",
    "label-oad",
    "label-htrp",
    "compare",
    "export",
)


def manifest_path(workdir: Path, stage: str) -> Path:
    return workdir / "manifests" / f"{stage}.json"


def _read_manifest(path: Path) -> dict | None:
    if not path.exists():
        return None
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, OSError):
        return None


def _external_inputs(name: str, cfg: PipelineConfig) -> dict[str, Path]:
    out: dict[str, Path] = {}
    if name == "ingest":
        out["corpus"] = _resolve_corpus(cfg)
    if name == "extract" and cfg.annotations_path is not None:
        out["annotations"] = cfg.annotations_path
    if name in ("label-htrp", "compare") and cfg.raw["gazetteer"]:
        out["gazetteer"] = Path(cfg.raw["gazetteer"])
    return out


def _check_inputs(stage: StageDef, ctx: StageContext) -> dict[str, str]:
    """Validate inputs against producer manifests; return their hashes."""
    hashes: dict[str, str] = {}
    for name in stage.inputs:
        p = ctx.path(name)
        producer = PRODUCER[name]
        if not p.exists():
            raise PipelineError(
                f"missing artifact {p.name}; run the '{producer}' stage first"
            )
        hashes[name] = _sha256_file(p)
        if ctx.force:
            continue
        man = _read_manifest(manifest_path(ctx.workdir, producer))
        if man is None:
            raise PipelineError(
                f"artifact {p.name} has no manifest from stage '{producer}'; "
                f"rerun '{producer}' or pass --force"
            )
        if man.get("outputs", {}).get(name) != hashes[name]:
            raise PipelineError(
                f"artifact {p.name} does not match the manifest written by "
                f"stage '{producer}' (stale or edited); rerun '{producer}' "
                "or pass --force"
            )
    for name, p in _external_inputs(stage.name, ctx.cfg).items():
        if not p.exists():
            raise PipelineError(f"input file not found: {p}")
        hashes[name] = _sha256_file(p)
    return hashes


def _is_fresh(stage: StageDef, ctx: StageContext, input_hashes: dict[str, str]) -> bool:
    man = _read_manifest(manifest_path(ctx.workdir, stage.name))
    if man is None:
        return False
    if man.get("config_hash") != ctx.cfg.hash() or man.get("version") != __version__:
        return False
    if man.get("inputs", {}) != input_hashes:
        return False
    expected = set(stage.expected_outputs(ctx.cfg))
    recorded = man.get("outputs", {})
    if set(recorded) != expected:
        return False
    for name, digest in recorded.items():
        p = ctx.path(name)
        if not p.exists() or _sha256_file(p) != digest:
            return False
    return True


def run_stage(name: str, cfg: PipelineConfig, force: bool = False) -> dict:
    if name not in STAGES:
        raise PipelineError(f"unknown stage: {name}")
    stage = STAGES[name]
    ctx = StageContext(cfg, force=force)
    ctx.workdir.mkdir(parents=True, exist_ok=True)

    start = time.perf_counter()
    input_hashes = _check_inputs(stage, ctx)
    if not force and _is_fresh(stage, ctx, input_hashes):
        log.info("[%s] up to date, skipping", name)
        return {"stage": name, "seconds": time.perf_counter() - start, "ran": False}

    stage.fn(ctx)

    outputs = {}
    for art in stage.expected_outputs(cfg):
        p = ctx.path(art)
        if not p.exists():
            raise PipelineError(f"stage '{name}' did not write {p.name}")
        outputs[art] = _sha256_file(p)
    mpath = manifest_path(ctx.workdir, name)
    mpath.parent.mkdir(parents=True, exist_ok=True)
    manifest = {
        "stage": name,
        "version": __version__,
        "config_hash": cfg.hash(),
        "inputs": input_hashes,
        "outputs": outputs,
    }
    with open(mpath, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=1)
        fh.write("\n")

    elapsed = time.perf_counter() - start
    log.info("[%s] finished in %.2fs", name, elapsed)
    return {"stage": name, "seconds": elapsed, "ran": True}


def run_all(cfg: PipelineConfig, force: bool = False) -> list[dict]:
    results = []
    for name in ALL_CHAIN:
        if name in ("compare", "export") and not cfg.stage_enabled(name):
            log.info("[%s] disabled, skipping", name)
            continue
        results.append(run_stage(name, cfg, force=force))
    return results
