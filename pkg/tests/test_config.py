import json

import pytest

from adgraph.config import DEFAULTS, PipelineConfig, config_hash, load_config
from adgraph.errors import ConfigError


class TestDefaults:
    def test_defaults_validate(self):
        load_config().validate()

    def test_key_defaults(self):
        cfg = load_config()
        assert cfg.seed == 0
        assert cfg.threads == 1
        assert str(cfg.workdir) == "out"
        assert cfg.corpus_path is None
        assert cfg.corpus_format == "jsonl"
        assert cfg.quarantine_cap is None
        assert cfg.strata_key == "location"
        assert cfg.export_format == "both"
        assert cfg.stage_enabled("compare") and cfg.stage_enabled("export")

    def test_derived_configs_carry_seed(self):
        cfg = load_config(overrides=["seed=9"])
        assert cfg.similarity().seed == 9
        assert cfg.labeling().seed == 9
        assert cfg.synth_spec().seed == 9


class TestFileLoading:
    def test_file_values_override_defaults(self, tmp_path):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps({"seed": 7, "dedup": {"dup_threshold": 0.95}}))
        cfg = load_config(p)
        assert cfg.seed == 7
        assert cfg.similarity().dup_threshold == 0.95
        # untouched keys keep defaults
        assert cfg.similarity().shingle_k == 5

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "nope.json")

    def test_invalid_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{nope")
        with pytest.raises(ConfigError, match="invalid json"):
            load_config(p)

    def test_non_object_json(self, tmp_path):
        p = tmp_path / "list.json"
        p.write_text("[1, 2]")
        with pytest.raises(ConfigError, match="object"):
            load_config(p)

    def test_unknown_key_named_with_dotted_path(self, tmp_path):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps({"dedup": {"bands_count": 16}}))
        with pytest.raises(ConfigError, match="unknown config key: dedup.bands_count"):
            load_config(p)

    def test_type_mismatch(self, tmp_path):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps({"seed": "zero"}))
        with pytest.raises(ConfigError):
            load_config(p)

    def test_int_promotes_to_float(self, tmp_path):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps({"label": {"distance_threshold_miles": 400}}))
        cfg = load_config(p)
        assert cfg.labeling().distance_threshold_miles == 400.0


class TestOverrides:
    def test_set_expression(self):
        cfg = load_config(overrides=["label.pairs_per_class=50", "seed=3"])
        assert cfg.labeling().pairs_per_class == 50
        assert cfg.seed == 3

    def test_set_json_values(self):
        cfg = load_config(overrides=["graph.quarantine_cap=25", "stages.compare=false"])
        assert cfg.quarantine_cap == 25
        assert not cfg.stage_enabled("compare")

    def test_set_raw_string_fallback(self):
        cfg = load_config(overrides=["corpus.format=csv"])
        assert cfg.corpus_format == "csv"

    def test_set_malformed(self):
        with pytest.raises(ConfigError, match="key=value"):
            load_config(overrides=["seed"])

    def test_set_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown config key"):
            load_config(overrides=["dedup.rows=4"])

    def test_cli_values_win_over_file_and_set(self, tmp_path):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps({"seed": 7}))
        cfg = load_config(p, overrides=["seed=8"], cli_values={"seed": 9})
        assert cfg.seed == 9

    def test_cli_none_values_ignored(self):
        cfg = load_config(cli_values={"seed": None, "workdir": None})
        assert cfg.seed == 0

    def test_variant_labeling_applies_only_non_null(self):
        cfg = load_config(
            overrides=[
                "analysis.variant.distance_threshold_miles=500",
                "analysis.variant.rule_combination=and",
            ]
        )
        base = cfg.labeling()
        variant = cfg.labeling(variant=True)
        assert base.distance_threshold_miles == 300.0 and base.rule_combination == "or"
        assert variant.distance_threshold_miles == 500.0
        assert variant.rule_combination == "and"
        # fields with null variant entries inherit the base value
        assert variant.phone_count_threshold == base.phone_count_threshold
        assert variant.pair_sim_threshold == base.pair_sim_threshold


class TestValidate:
    @pytest.mark.parametrize(
        "override, fragment",
        [
            ("threads=0", "threads"),
            ("corpus.format=xml", "corpus.format"),
            ("graph.quarantine_cap=1", "quarantine_cap"),
            ("analysis.strata=city", "analysis.strata"),
            ("export.format=png", "export.format"),
            ("dedup.bands=0", "dedup"),
            ("label.split_ratio=2.0", "label"),
            ("synth.dup_rate=1.5", "synth"),
        ],
    )
    def test_bad_values_rejected(self, override, fragment):
        # load_config validates before returning
        with pytest.raises(ConfigError, match=fragment):
            load_config(overrides=[override])

    def test_bool_not_accepted_as_int(self):
        with pytest.raises(ConfigError):
            load_config(overrides=["seed=true"])


class TestHash:
    def test_stable_across_processes(self):
        # fixed expected value guards against dict-ordering or repr drift
        a = load_config().hash()
        b = load_config().hash()
        assert a == b and len(a) == 64

    def test_semantic_change_changes_hash(self):
        assert load_config().hash() != load_config(overrides=["seed=1"]).hash()
        assert (
            load_config().hash()
            != load_config(overrides=["dedup.dup_threshold=0.8"]).hash()
        )

    @pytest.mark.parametrize(
        "override",
        [
            "workdir=elsewhere",
            "corpus.path=other.jsonl",
            "corpus.annotations=ann.jsonl",
            "gazetteer=custom.csv",
            "threads=8",
        ],
    )
    def test_location_and_execution_keys_excluded(self, override):
        assert load_config().hash() == load_config(overrides=[override]).hash()

    def test_hash_matches_function(self):
        cfg = load_config()
        assert cfg.hash() == config_hash(cfg.raw)


class TestRawIsolation:
    def test_loads_do_not_share_state(self):
        a = load_config(overrides=["dedup.bands=16"])
        b = load_config()
        assert b.similarity().bands == 32
        assert a.similarity().bands == 16
        assert DEFAULTS["dedup"]["bands"] == 32

    def test_default_constructor_copies(self):
        cfg = PipelineConfig()
        cfg.raw["seed"] = 123
        assert DEFAULTS["seed"] == 0
