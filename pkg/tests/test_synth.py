import json

import numpy as np
import pytest

from lingconv import detector as det
from lingconv import synth
from lingconv.vecstore import l2_normalize, read_store


class TestRng:
    def test_counter_based_algorithm(self):
        assert synth.PRNG_ALGORITHM == "philox4x64"
        gen = synth.make_rng(42)
        assert gen.bit_generator.__class__.__name__ == "Philox"

    def test_same_seed_same_stream(self):
        a = synth.make_rng(7).normal(size=10)
        b = synth.make_rng(7).normal(size=10)
        assert np.array_equal(a, b)


class TestGenPanel:
    def test_deterministic_per_seed(self):
        p = synth.DGPParams(n_journals=5, n_countries=3, n_fields=2, pubs_per_year=20)
        c1, t1 = synth.gen_panel(p)
        c2, t2 = synth.gen_panel(p)
        assert [vars(a) for a in c1] == [vars(b) for b in c2]
        assert t1.fe_values == t2.fe_values

    def test_seed_changes_draws(self):
        base = synth.DGPParams(n_journals=5, n_countries=3, n_fields=2, pubs_per_year=20)
        other = synth.DGPParams(
            n_journals=5, n_countries=3, n_fields=2, pubs_per_year=20, seed=1
        )
        c1, _ = synth.gen_panel(base)
        c2, _ = synth.gen_panel(other)
        assert [a.similarity for a in c1] != [b.similarity for b in c2]

    def test_degenerate_zero_noise_rejected(self):
        with pytest.raises(ValueError):
            synth.DGPParams(noise_sd=0.0)

    def test_bad_probability_rejected(self):
        with pytest.raises(ValueError):
            synth.DGPParams(genai_prob={2023: 1.5})

    def test_outcome_composition(self):
        """With all effects and noise off except the FE draws, the outcome
        equals base + covariates + the recorded FE values exactly."""
        p = synth.DGPParams(
            n_journals=4,
            n_countries=3,
            n_fields=2,
            pubs_per_year=30,
            delta0=0.0,
            beta={},
            gamma_authors=0.0,
            gamma_eng=0.0,
            fe_scale=0.05,
            noise_sd=1e-300,
        )
        cells, truth = synth.gen_panel(p)
        for cell in cells:
            expected = (
                p.base_similarity
                + truth.fe_values["country"][cell.country_code]
                + truth.fe_values["field"][cell.detailed_field_code]
                + truth.fe_values["journal"][cell.journal_id]
                + truth.fe_values["year"][cell.year]
                + truth.fe_values["journal_x_year"][f"{cell.journal_id}#{cell.year}"]
            )
            assert cell.similarity == pytest.approx(expected, abs=1e-12)

    def test_flags_match_cells(self):
        p = synth.DGPParams(n_journals=5, n_countries=3, n_fields=2, pubs_per_year=50)
        cells, truth = synth.gen_panel(p)
        for cell in cells:
            assert truth.flags[cell.pub_id] == cell.genai_flag


class TestGenTextCorpus:
    def test_assisted_records_carry_exact_marker_count(self):
        params = synth.CorpusParams(seed=3)
        records, assisted = synth.gen_text_corpus(params)
        vocab = det.load_vocabulary()
        for rec in records:
            tokens = det.tokenize_normalize(rec.text)
            stems = det.match_stems(tokens, vocab)
            if assisted[rec.id]:
                assert len(stems) == params.markers_per_assisted, rec.id
            else:
                assert len(stems) <= 1, rec.id

    def test_no_assistance_before_2023(self):
        records, assisted = synth.gen_text_corpus(synth.CorpusParams(seed=4))
        for rec in records:
            if rec.year < 2023:
                assert not assisted[rec.id]

    def test_phrase_bank_is_marker_free(self):
        vocab = det.load_vocabulary()
        for phrase in synth._PHRASES:
            assert det.match_stems(det.tokenize_normalize(phrase), vocab) == set()

    def test_deterministic(self):
        a, fa = synth.gen_text_corpus(synth.CorpusParams(seed=9))
        b, fb = synth.gen_text_corpus(synth.CorpusParams(seed=9))
        assert [vars(r) for r in a] == [vars(r) for r in b]
        assert fa == fb

    def test_pure_us_records_present_every_field_year(self):
        params = synth.CorpusParams(seed=1)
        records, _ = synth.gen_text_corpus(params)
        seen = {
            (r.scopus_fields[0], r.year)
            for r in records
            if set(r.author_countries) == {"US"}
        }
        assert seen == {(f, y) for f in params.fields for y in params.years}


class TestGenVectors:
    def test_targets_hit_exactly(self):
        targets = {"a": 0.82, "b": -0.5, "c": 0.0, "d": 0.999}
        store, c = synth.gen_vectors(targets, dim=64, seed=0)
        for pid, t in targets.items():
            v = l2_normalize(store.get(pid))
            assert float(v @ c) == pytest.approx(t, abs=1e-6)

    def test_float32_round_trip_preserves_target(self, tmp_path):
        from lingconv.vecstore import write_store

        store, c = synth.gen_vectors({"p": 0.82}, dim=768, seed=5)
        path = tmp_path / "v.emb1"
        write_store(store, path)
        v = l2_normalize(read_store(path).get("p"))
        assert float(v @ c) == pytest.approx(0.82, abs=1e-6)

    @pytest.mark.parametrize("bad", [1.0, -1.0, 1.5])
    def test_boundary_targets_rejected(self, bad):
        with pytest.raises(ValueError):
            synth.gen_vectors({"p": bad}, dim=16, seed=0)

    def test_direction_is_unit(self):
        _, c = synth.gen_vectors({"p": 0.5}, dim=128, seed=2)
        assert np.linalg.norm(c) == pytest.approx(1.0, abs=1e-12)


class TestWriteSynthDataset:
    def test_complete_and_reloadable(self, tmp_path):
        paths = synth.write_synth_dataset(
            tmp_path, synth.CorpusParams(n_pubs_per_field_year=10, seed=6), dim=32
        )
        from lingconv import corpus

        records = list(corpus.read_corpus(paths["corpus"]))
        assert records
        meta = corpus.load_country_meta(paths["countries"])
        assert meta["US"].is_english_core and not meta["DE"].is_english_core
        fmap = corpus.load_field_map(paths["field_map"])
        assert fmap["Multidisciplinary"] == "Excluded"
        store = read_store(paths["vectors"])
        assert store.dim == 32
        assert set(store.vectors) == {r.id for r in records}
        truth = json.loads((tmp_path / "truth.json").read_text())
        assert truth["prng"] == "philox4x64"
        assert set(truth["assisted"]) == {r.id for r in records}

    def test_byte_identical_reruns(self, tmp_path):
        params = synth.CorpusParams(n_pubs_per_field_year=5, seed=8)
        p1 = synth.write_synth_dataset(tmp_path / "a", params, dim=16)
        p2 = synth.write_synth_dataset(tmp_path / "b", params, dim=16)
        for key in ("corpus", "countries", "field_map", "vectors", "truth"):
            from pathlib import Path

            assert Path(p1[key]).read_bytes() == Path(p2[key]).read_bytes(), key
