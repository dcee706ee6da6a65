import hashlib
import json
from pathlib import Path

import pytest

from adgraph import pipeline
from adgraph.config import load_config
from adgraph.errors import PipelineError
from adgraph.pipeline import ALL_CHAIN, ARTIFACTS, run_all, run_stage

SYNTH_ARGS = [
    "synth.n_ads=150",
    "synth.n_components=12",
    "synth.dup_rate=0.5",
    "label.pairs_per_class=40",
]


def make_cfg(workdir, extra=()):
    return load_config(overrides=SYNTH_ARGS + list(extra), cli_values={"workdir": str(workdir)})


def artifact_bytes(workdir):
    out = {}
    for p in sorted(Path(workdir).rglob("*")):
        if p.is_file():
            out[str(p.relative_to(workdir))] = hashlib.sha256(p.read_bytes()).hexdigest()
    return out


@pytest.fixture(scope="module")
def full_run(tmp_path_factory):
    workdir = tmp_path_factory.mktemp("work")
    cfg = make_cfg(workdir)
    run_stage("synth", cfg)
    results = run_all(cfg)
    return workdir, cfg, results


class TestFullChain:
    def test_all_stages_ran(self, full_run):
        _, _, results = full_run
        assert [r["stage"] for r in results] == list(ALL_CHAIN)
        assert all(r["ran"] for r in results)

    def test_all_artifacts_exist(self, full_run):
        workdir, _, _ = full_run
        for name in ARTIFACTS.values():
            assert (workdir / name).exists(), name

    def test_manifest_shape(self, full_run):
        workdir, cfg, _ = full_run
        man = json.loads((workdir / "manifests" / "dedup.json").read_text())
        assert set(man) == {"stage", "version", "config_hash", "inputs", "outputs"}
        assert man["stage"] == "dedup"
        assert man["config_hash"] == cfg.hash()
        assert set(man["inputs"]) == {"records", "normalized"}
        assert set(man["outputs"]) == {"clusters"}
        recorded = man["outputs"]["clusters"]
        actual = hashlib.sha256((workdir / "clusters.jsonl").read_bytes()).hexdigest()
        assert recorded == actual

    def test_rerun_is_fresh_noop(self, full_run):
        workdir, cfg, _ = full_run
        before = artifact_bytes(workdir)
        results = run_all(cfg)
        assert not any(r["ran"] for r in results)
        assert artifact_bytes(workdir) == before

    def test_compare_report_written(self, full_run):
        workdir, _, _ = full_run
        report = json.loads((workdir / "compare_report.json").read_text())
        assert {"n_ads", "n_strata", "flips", "wilcoxon", "strata"} <= set(report)


class TestDeterminism:
    def test_byte_identical_across_workdirs_and_threads(self, tmp_path):
        runs = {}
        for name, extra in (
            ("one", []),
            ("two", []),
            ("threaded", ["threads=2"]),
        ):
            workdir = tmp_path / name
            cfg = make_cfg(workdir, extra)
            run_stage("synth", cfg)
            run_all(cfg)
            runs[name] = artifact_bytes(workdir)
        assert runs["one"] == runs["two"]
        assert runs["one"] == runs["threaded"]


class TestStaleness:
    @pytest.fixture()
    def prepared(self, tmp_path):
        cfg = make_cfg(tmp_path / "w")
        run_stage("synth", cfg)
        run_stage("ingest", cfg)
        return cfg

    def test_missing_artifact_names_producer(self, tmp_path):
        cfg = make_cfg(tmp_path / "w")
        run_stage("synth", cfg)
        with pytest.raises(PipelineError, match="run the 'ingest' stage first"):
            run_stage("dedup", cfg)

    def test_edited_artifact_detected(self, prepared):
        cfg = prepared
        records = cfg.workdir / "records.jsonl"
        records.write_bytes(records.read_bytes() + b"\n")
        with pytest.raises(PipelineError, match="stale or edited.*rerun 'ingest'"):
            run_stage("dedup", cfg)

    def test_missing_manifest_detected(self, prepared):
        cfg = prepared
        (cfg.workdir / "manifests" / "ingest.json").unlink()
        with pytest.raises(PipelineError, match="no manifest"):
            run_stage("dedup", cfg)

    def test_force_bypasses_staleness(self, prepared):
        cfg = prepared
        (cfg.workdir / "manifests" / "ingest.json").unlink()
        result = run_stage("dedup", cfg, force=True)
        assert result["ran"]
        assert (cfg.workdir / "clusters.jsonl").exists()

    def test_config_change_defeats_fresh_skip(self, prepared):
        cfg = prepared
        assert run_stage("dedup", cfg)["ran"]
        assert not run_stage("dedup", cfg)["ran"]
        changed = load_config(
            overrides=SYNTH_ARGS + ["dedup.dup_threshold=0.95"],
            cli_values={"workdir": str(cfg.workdir)},
        )
        assert run_stage("dedup", changed)["ran"]

    def test_unknown_stage(self, prepared):
        with pytest.raises(PipelineError, match="unknown stage"):
            run_stage("compile", prepared)

    def test_no_corpus_configured(self, tmp_path):
        cfg = load_config(cli_values={"workdir": str(tmp_path / "empty")})
        with pytest.raises(PipelineError, match="no corpus configured"):
            run_stage("ingest", cfg)


class TestExportOptions:
    @pytest.fixture()
    def graph_ready(self, tmp_path):
        cfg = make_cfg(tmp_path / "w", ["stages.compare=false", "stages.export=false"])
        run_stage("synth", cfg)
        run_all(cfg)
        return tmp_path / "w"

    def test_dot_only(self, graph_ready):
        cfg = load_config(
            overrides=SYNTH_ARGS + ["export.format=dot"],
            cli_values={"workdir": str(graph_ready)},
        )
        run_stage("export", cfg)
        assert (graph_ready / "graph.dot").exists()
        assert not (graph_ready / "graph.graphml").exists()

    def test_graphml_only(self, graph_ready):
        pytest.importorskip("networkx")
        cfg = load_config(
            overrides=SYNTH_ARGS + ["export.format=graphml"],
            cli_values={"workdir": str(graph_ready)},
        )
        run_stage("export", cfg)
        assert (graph_ready / "graph.graphml").exists()
        assert not (graph_ready / "graph.dot").exists()

    def test_component_filter(self, graph_ready):
        graph = json.loads((graph_ready / "graph.json").read_text())
        cid = int(min(graph["components"], key=int))
        cfg = load_config(
            overrides=SYNTH_ARGS + ["export.format=dot", f"export.component={cid}"],
            cli_values={"workdir": str(graph_ready)},
        )
        run_stage("export", cfg)
        text = (graph_ready / "graph.dot").read_text()
        members = set(graph["components"][str(cid)])
        mentioned = {m for m in members if f'"{m}"' in text}
        assert mentioned == members
        other = next(c for c in graph["components"] if int(c) != cid)
        stranger = graph["components"][other][0]
        assert f'"{stranger}"' not in text


class TestStageToggles:
    def test_disabled_stages_skipped(self, tmp_path):
        cfg = make_cfg(tmp_path / "w", ["stages.compare=false", "stages.export=false"])
        run_stage("synth", cfg)
        results = run_all(cfg)
        names = [r["stage"] for r in results]
        assert "compare" not in names and "export" not in names
        assert not (tmp_path / "w" / "compare_report.json").exists()
        assert not (tmp_path / "w" / "graph.dot").exists()
