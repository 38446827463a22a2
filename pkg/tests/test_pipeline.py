import dataclasses
import json

import pandas as pd
import pytest

from lingconv import cli, pipeline as pipe, synth
from lingconv.corpus import CountryMeta, load_country_meta, load_field_map, read_corpus, build_panel
from lingconv.errors import AllMissing, DegenerateSplit


@pytest.fixture(scope="session")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("synthdata")
    # small pre-period "assisted" rates stand in for background false
    # positives so the treatment indicator is not collinear with its
    # post-period interactions
    params = synth.CorpusParams(
        n_pubs_per_field_year=60,
        seed=11,
        assisted_rate={2021: 0.10, 2022: 0.10, 2023: 0.2, 2024: 0.35},
    )
    paths = synth.write_synth_dataset(root, params, dim=16)
    return paths


def make_config(dataset, out_dir, **overrides):
    kwargs = dict(
        corpus_path=dataset["corpus"],
        country_meta_path=dataset["countries"],
        field_map_path=dataset["field_map"],
        vector_store_path=dataset["vectors"],
        output_dir=str(out_dir),
        threshold_fold=3.0,
        min_support=2,
        min_benchmark=3,
    )
    kwargs.update(overrides)
    return pipe.RunConfig(**kwargs)


class TestRunConfig:
    def test_validation(self, dataset, tmp_path):
        with pytest.raises(ValueError):
            make_config(dataset, tmp_path, threshold_fold=2.0)
        with pytest.raises(ValueError):
            make_config(dataset, tmp_path, min_distinct=3)
        with pytest.raises(ValueError):
            make_config(dataset, tmp_path, benchmark_variant="Bogus")
        with pytest.raises(ValueError):
            make_config(dataset, tmp_path, subsample="Everything")
        with pytest.raises(ValueError):
            make_config(dataset, tmp_path, partitions=0)

    def test_by_aggregated_field_rule_accepted(self, dataset, tmp_path):
        cfg = make_config(dataset, tmp_path, subsample="ByAggregatedField:PhysSci")
        assert cfg.subsample == "ByAggregatedField:PhysSci"

    def test_from_file_round_trip(self, dataset, tmp_path):
        cfg = make_config(dataset, tmp_path)
        path = tmp_path / "config.json"
        path.write_text(json.dumps(dataclasses.asdict(cfg)))
        assert pipe.RunConfig.from_file(path) == cfg

    def test_hash_ignores_scheduling_knobs(self, dataset, tmp_path):
        a = make_config(dataset, tmp_path)
        b = make_config(dataset, tmp_path / "elsewhere", partitions=8,
                        cache_dir=str(tmp_path / "cache"))
        assert a.config_hash() == b.config_hash()

    def test_hash_sees_analysis_knobs_and_inputs(self, dataset, tmp_path):
        a = make_config(dataset, tmp_path)
        assert a.config_hash() != make_config(
            dataset, tmp_path, threshold_fold=5.0
        ).config_hash()
        # content change in an input file changes the hash
        alt = dict(dataset)
        alt_corpus = tmp_path / "corpus2.jsonl"
        alt_corpus.write_text(open(dataset["corpus"]).read() + "\n")
        alt["corpus"] = str(alt_corpus)
        assert a.config_hash() != make_config(alt, tmp_path).config_hash()

    def test_env_var_overrides_cache_dir(self, dataset, tmp_path, monkeypatch):
        cfg = make_config(dataset, tmp_path, cache_dir=str(tmp_path / "a"))
        monkeypatch.setenv(pipe.CACHE_ENV_VAR, str(tmp_path / "b"))
        assert cfg.resolve_cache_dir() == tmp_path / "b"


class TestMedianSplitCli:
    def test_three_countries(self):
        out = pipe.median_split_cli({"a": 0.1, "b": 0.5, "c": 0.9})
        assert out == {"a": "Distant", "b": "Close", "c": "Close"}

    def test_at_median_is_close(self):
        out = pipe.median_split_cli({"a": 0.3, "b": 0.3, "c": 0.7})
        # distinct scores {0.3, 0.7}: lower median 0.3, everyone at/above it
        assert set(out.values()) == {"Close"}

    def test_four_distinct_scores(self):
        out = pipe.median_split_cli({"a": 0.1, "b": 0.2, "c": 0.3, "d": 0.4})
        assert out == {"a": "Distant", "b": "Close", "c": "Close", "d": "Close"}

    def test_single_country_degenerate(self):
        with pytest.raises(DegenerateSplit):
            pipe.median_split_cli({"a": 0.5})

    def test_empty(self):
        with pytest.raises(AllMissing):
            pipe.median_split_cli({})


@pytest.fixture(scope="session")
def panel_inputs(dataset):
    records = list(read_corpus(dataset["corpus"]))
    meta = load_country_meta(dataset["countries"])
    field_map = load_field_map(dataset["field_map"])
    cells = build_panel(records, meta, field_map)
    pub_countries = {r.id: set(r.author_countries) for r in records}
    return cells, meta, pub_countries


def keys(cells):
    return {(c.pub_id, c.country_code, c.detailed_field_code) for c in cells}


class TestSplitSubsample:
    def test_domestic_international_partition_all(self, panel_inputs):
        cells, meta, pub_countries = panel_inputs
        dom = pipe.split_subsample(cells, "DomesticOnly", meta, pub_countries)
        intl = pipe.split_subsample(cells, "InternationalOnly", meta, pub_countries)
        assert keys(dom) | keys(intl) == keys(cells)
        assert keys(dom) & keys(intl) == set()

    def test_eng_coauthor_partition_international(self, panel_inputs):
        cells, meta, pub_countries = panel_inputs
        intl = pipe.split_subsample(cells, "InternationalOnly", meta, pub_countries)
        with_eng = pipe.split_subsample(
            cells, "Intl_WithEngCoauthor", meta, pub_countries
        )
        without = pipe.split_subsample(cells, "Intl_NoEngCoauthor", meta, pub_countries)
        assert keys(with_eng) | keys(without) == keys(intl)
        assert keys(with_eng) & keys(without) == set()

    def test_impact_partition_all(self, panel_inputs):
        cells, meta, pub_countries = panel_inputs
        hi = pipe.split_subsample(cells, "HighImpactJournal", meta, pub_countries)
        lo = pipe.split_subsample(cells, "LowImpactJournal", meta, pub_countries)
        assert keys(hi) | keys(lo) == keys(cells)
        assert keys(hi) & keys(lo) == set()

    def test_cli_partition_domestic(self, panel_inputs):
        cells, meta, pub_countries = panel_inputs
        dom = pipe.split_subsample(cells, "DomesticOnly", meta, pub_countries)
        close = pipe.split_subsample(cells, "Domestic_CLI_Close", meta, pub_countries)
        far = pipe.split_subsample(cells, "Domestic_CLI_Distant", meta, pub_countries)
        assert keys(close) | keys(far) == keys(dom)
        assert keys(close) & keys(far) == set()

    def test_by_aggregated_field(self, panel_inputs):
        cells, meta, pub_countries = panel_inputs
        groups = {c.aggregated_group for c in cells}
        union = set()
        for g in sorted(groups):
            part = pipe.split_subsample(
                cells, f"ByAggregatedField:{g}", meta, pub_countries
            )
            assert all(c.aggregated_group == g for c in part)
            union |= keys(part)
        assert union == keys(cells)

    def test_all_returns_copy(self, panel_inputs):
        cells, meta, pub_countries = panel_inputs
        out = pipe.split_subsample(cells, "All", meta, pub_countries)
        assert out == cells and out is not cells


def run_once(dataset, out_dir, **overrides):
    return pipe.run_pipeline(make_config(dataset, out_dir, **overrides))


class TestRunPipeline:
    def test_outputs_written(self, dataset, tmp_path):
        bundle = run_once(dataset, tmp_path / "out")
        for name in ("flags", "markers", "scores", "benchmarks", "plot_data",
                     "manifest", "coefficients", "fit_manifest"):
            assert name in bundle.files, name
            assert bundle.files[name].exists(), name

    def test_manifest_deterministic_across_runs(self, dataset, tmp_path):
        b1 = run_once(dataset, tmp_path / "r1")
        b2 = run_once(dataset, tmp_path / "r2")
        assert (
            b1.files["manifest"].read_bytes() == b2.files["manifest"].read_bytes()
        )

    def test_partition_count_does_not_change_results(self, dataset, tmp_path):
        b1 = run_once(dataset, tmp_path / "p1", partitions=1)
        b8 = run_once(dataset, tmp_path / "p8", partitions=8)
        assert (
            b1.files["manifest"].read_bytes() == b8.files["manifest"].read_bytes()
        )

    def test_cache_round_trip_matches_fresh_run(self, dataset, tmp_path):
        cache = tmp_path / "cache"
        fresh = run_once(dataset, tmp_path / "fresh")
        warm1 = run_once(dataset, tmp_path / "w1", cache_dir=str(cache))
        assert list(cache.iterdir())  # populated
        warm2 = run_once(dataset, tmp_path / "w2", cache_dir=str(cache))
        for name in ("flags", "markers", "manifest"):
            ref = fresh.files[name].read_bytes()
            assert warm1.files[name].read_bytes() == ref, name
            assert warm2.files[name].read_bytes() == ref, name

    def test_plot_data_reference_year_pinned_to_zero(self, dataset, tmp_path):
        bundle = run_once(dataset, tmp_path / "out")
        frame = bundle.plot_data
        row = frame[frame.year == 2022]
        assert len(row) == 1
        assert row.iloc[0]["estimate"] == 0.0
        assert row.iloc[0]["ci_low"] == 0.0 and row.iloc[0]["ci_high"] == 0.0
        assert sorted(frame.year) == [2021, 2022, 2023, 2024]

    def test_strict_mode_drops_single_hit_records(self, dataset, tmp_path):
        loose = run_once(dataset, tmp_path / "loose", min_distinct=1)
        strict = run_once(dataset, tmp_path / "strict", min_distinct=2)
        n_loose = int(loose.plot_data["n_obs"].iloc[0])
        n_strict = int(strict.plot_data["n_obs"].iloc[0])
        assert n_strict <= n_loose

    def test_empty_subsample_warns_without_fit(self, dataset, tmp_path):
        bundle = run_once(
            dataset, tmp_path / "out", subsample="ByAggregatedField:SocSci"
        )
        assert any("empty subsample" in w for w in bundle.warnings)
        assert "coefficients" not in bundle.files


class TestEmitReport:
    def test_formats_numerically_identical(self, dataset, tmp_path):
        bundle = run_once(dataset, tmp_path / "out")
        (csv_path, *coef_paths) = pipe.emit_report(bundle, "delimited")
        (json_path,) = pipe.emit_report(bundle, "structured")
        payload = json.loads(json_path.read_text())
        csv_rows = pd.read_csv(
            csv_path, float_precision="round_trip"
        ).to_dict(orient="records")
        assert len(csv_rows) == len(payload["plot_data"])
        for a, b in zip(csv_rows, payload["plot_data"]):
            for col in ("year", "estimate", "ci_low", "ci_high", "n_obs"):
                assert a[col] == pytest.approx(b[col], abs=0.0), col
        for path in coef_paths:
            name = path.stem.replace("report_coefficients_", "")
            table = pd.read_csv(path, float_precision="round_trip")
            ref = payload["coefficients"][name]
            for a, b in zip(table.to_dict(orient="records"), ref):
                assert a["estimate"] == pytest.approx(b["estimate"], abs=0.0)

    def test_unknown_format_rejected(self, dataset, tmp_path):
        bundle = run_once(dataset, tmp_path / "out")
        with pytest.raises(ValueError):
            pipe.emit_report(bundle, "spreadsheet")


class TestCli:
    def _args(self, dataset, out_dir, *extra):
        return [
            "run",
            "--corpus", dataset["corpus"],
            "--countries", dataset["countries"],
            "--field-map", dataset["field_map"],
            "--vectors", dataset["vectors"],
            "--output", str(out_dir),
            "--threshold-fold", "3",
            "--min-support", "2",
            *extra,
        ]

    def test_run_exits_zero(self, dataset, tmp_path, capsys):
        config = dataclasses.asdict(make_config(dataset, tmp_path / "out"))
        path = tmp_path / "config.json"
        path.write_text(json.dumps(config))
        assert cli.main(["run", "--config", str(path)]) == cli.EXIT_OK
        assert (tmp_path / "out" / "manifest.json").exists()

    def test_missing_inputs_is_usage_error(self, capsys):
        assert cli.main(["run"]) == cli.EXIT_USAGE

    def test_nonexistent_corpus_is_data_error(self, dataset, tmp_path, capsys):
        args = self._args(dict(dataset, corpus="/nonexistent.jsonl"), tmp_path)
        assert cli.main(args) == cli.EXIT_DATA

    def test_bad_choice_is_argparse_exit(self, dataset, tmp_path):
        with pytest.raises(SystemExit):
            cli.main(self._args(dataset, tmp_path, "--threshold-fold", "7"))

    def test_synth_then_detect(self, tmp_path, capsys):
        data_dir = tmp_path / "data"
        assert cli.main(
            ["synth", "--output", str(data_dir), "--size", "10", "--dim", "8"]
        ) == cli.EXIT_OK
        assert cli.main([
            "detect",
            "--corpus", str(data_dir / "corpus.jsonl"),
            "--countries", str(data_dir / "countries.csv"),
            "--field-map", str(data_dir / "field_map.csv"),
            "--output", str(tmp_path / "det"),
            "--threshold-fold", "3",
            "--min-support", "2",
        ]) == cli.EXIT_OK
        assert (tmp_path / "det" / "flags.csv").exists()

    def test_panel_then_fit(self, dataset, tmp_path, capsys):
        out = tmp_path / "panel"
        assert cli.main([
            "panel",
            "--corpus", dataset["corpus"],
            "--countries", dataset["countries"],
            "--field-map", dataset["field_map"],
            "--output", str(out),
        ]) == cli.EXIT_OK
        assert (out / "panel.csv").exists()
