"""Layer-view extraction, hierarchical selection, and view export."""

import json

import numpy as np
import pytest

from naestudio.deconstruct import (
    SILENT_THRESHOLD,
    extract,
    export_view,
    hierarchical_select,
    load_view,
    view_document,
)
from naestudio.errors import InputError, ShapeError
from naestudio.model import NaeConfig, NaeModel, init_model, model_hash
from naestudio.stft import Spectrogram, StftParams


def _spec(f, t, seed=0, window=64, hop=16):
    rng = np.random.default_rng(seed)
    params = StftParams(window_size=window, hop_size=hop, sample_rate=8000)
    assert params.num_bins == f
    return Spectrogram(rng.uniform(0, 3, size=(f, t)), np.zeros((f, t)), params)


class TestExtract:
    def test_two_layer_view_shapes(self):
        """Config (3, 9) on 513 bins: activations 3xT and 9xT, weights 9x3 and 513x9."""
        params = StftParams(window_size=1024, hop_size=256, sample_rate=16000)
        rng = np.random.default_rng(0)
        spec = Spectrogram(rng.uniform(0, 1, (513, 100)), np.zeros((513, 100)), params)
        model = init_model(NaeConfig(input_dim=513, layer_sizes=(3, 9), seed=0))
        cset = extract(model, spec)
        assert cset.num_layers == 2
        assert cset.layers[0].activations.shape == (3, 100)
        assert cset.layers[0].weights_to_next.shape == (9, 3)
        assert cset.layers[1].activations.shape == (9, 100)
        assert cset.layers[1].weights_to_next.shape == (513, 9)
        assert cset.spectra.shape == (513, 9)

    def test_three_layer_view_sizes(self):
        model = init_model(NaeConfig(input_dim=33, layer_sizes=(3, 6, 12), seed=1))
        cset = extract(model, _spec(33, 20, seed=1))
        assert [v.num_units for v in cset.layers] == [3, 6, 12]
        assert cset.spectra.shape == (33, 12)

    def test_zero_input_gives_zero_latent(self):
        model = init_model(NaeConfig(input_dim=33, layer_sizes=(2, 5), seed=2))
        params = StftParams(window_size=64, hop_size=16, sample_rate=8000)
        spec = Spectrogram(np.zeros((33, 7)), np.zeros((33, 7)), params)
        cset = extract(model, spec)
        np.testing.assert_array_equal(cset.layers[0].activations, 0.0)
        assert cset.layers[0].silent.all()

    def test_all_matrices_nonnegative(self):
        model = init_model(NaeConfig(input_dim=33, layer_sizes=(2, 4, 8), seed=3))
        cset = extract(model, _spec(33, 9, seed=3))
        for view in cset.layers:
            assert np.all(view.activations >= 0.0)
            assert np.all(view.weights_to_next >= 0.0)

    def test_extract_is_pure(self):
        model = init_model(NaeConfig(input_dim=33, layer_sizes=(2, 5), seed=4))
        spec = _spec(33, 8, seed=4)
        a, b = extract(model, spec), extract(model, spec)
        for va, vb in zip(a.layers, b.layers):
            np.testing.assert_array_equal(va.activations, vb.activations)
            np.testing.assert_array_equal(va.weights_to_next, vb.weights_to_next)

    def test_dimension_mismatch_rejected(self):
        model = init_model(NaeConfig(input_dim=20, layer_sizes=(2,), seed=0))
        with pytest.raises(ShapeError):
            extract(model, _spec(33, 5))


class TestHierarchicalSelect:
    def test_additivity_over_inner_units(self):
        """Selections over all inner units sum to the full pre-output signal."""
        model = init_model(NaeConfig(input_dim=33, layer_sizes=(3, 7), seed=5))
        cset = extract(model, _spec(33, 12, seed=5))
        full = cset.outer_pre_activation()
        acc = np.zeros_like(full)
        for u in range(3):
            acc = acc + hierarchical_select(cset, u).outer_pre_activation()
        assert np.abs(acc - full).max() < 1e-9

    def test_single_connection_propagates_to_one_unit(self):
        """An inner unit wired to one outer unit leaves only that unit audible."""
        cfg = NaeConfig(input_dim=33, layer_sizes=(2, 4), seed=0)
        model = init_model(cfg)
        w = np.zeros((4, 2))
        w[3, 0] = 1.0  # unit 0 feeds only outer unit 3
        w[0, 1] = 0.7
        w[1, 1] = 0.7
        model = NaeModel(cfg, model.encoder_weights, [w, model.decoder_weights[1]])
        cset = extract(model, _spec(33, 10, seed=6))
        selected = hierarchical_select(cset, 0)
        outer = selected.layers[1]
        assert not outer.silent[3]
        assert outer.silent[[0, 1, 2]].all()

    def test_zero_activation_unit_silences_everything(self):
        model = init_model(NaeConfig(input_dim=33, layer_sizes=(2, 4), seed=7))
        cset = extract(model, _spec(33, 10, seed=7))
        cset.layers[0].activations[1] = 0.0
        selected = hierarchical_select(cset, 1)
        assert selected.layers[1].silent.all()
        np.testing.assert_array_equal(selected.layers[1].activations, 0.0)

    def test_weights_unchanged_and_index_validated(self):
        model = init_model(NaeConfig(input_dim=33, layer_sizes=(2, 4), seed=8))
        cset = extract(model, _spec(33, 10, seed=8))
        selected = hierarchical_select(cset, 0)
        for va, vb in zip(cset.layers, selected.layers):
            np.testing.assert_array_equal(va.weights_to_next, vb.weights_to_next)
        with pytest.raises(InputError):
            hierarchical_select(cset, 2)


class TestExport:
    def test_round_trip_matrices_identical(self, tmp_path):
        model = init_model(NaeConfig(input_dim=33, layer_sizes=(2, 5), seed=9))
        cset = extract(model, _spec(33, 14, seed=9))
        path = tmp_path / "view.json"
        export_view(cset, path)
        doc = load_view(path)
        for view, layer in zip(cset.layers, doc["layers"]):
            np.testing.assert_allclose(
                np.array(layer["activations"]), view.activations, rtol=0, atol=1e-12
            )
            np.testing.assert_array_equal(
                np.array(layer["weights_to_next"]), view.weights_to_next
            )

    def test_silent_flags_match_zero_energy(self):
        model = init_model(NaeConfig(input_dim=33, layer_sizes=(2, 5), seed=10))
        cset = extract(model, _spec(33, 14, seed=10))
        cset.layers[0].activations[0] = 0.0
        selected = hierarchical_select(cset, 1)
        doc = view_document(selected)
        for view, layer in zip(selected.layers, doc["layers"]):
            expected = view.activations.max(axis=1) < SILENT_THRESHOLD
            assert layer["silent"] == expected.tolist()

    def test_decimation_preserves_global_maxima(self):
        model = init_model(NaeConfig(input_dim=33, layer_sizes=(2, 5), seed=11))
        cset = extract(model, _spec(33, 500, seed=11))
        doc = view_document(cset, max_frames=100)
        for view, layer in zip(cset.layers, doc["layers"]):
            assert layer["decimation_factor"] == 5
            pooled = np.array(layer["activations"])
            assert pooled.shape[1] == 100
            np.testing.assert_allclose(pooled.max(axis=1), view.activations.max(axis=1))

    def test_provenance_has_model_hash_and_params(self, tmp_path):
        model = init_model(NaeConfig(input_dim=33, layer_sizes=(2, 5), seed=12))
        cset = extract(model, _spec(33, 6, seed=12))
        doc = export_view(cset, tmp_path / "v.json", source="toy.wav")
        assert doc["provenance"]["model_hash"] == model_hash(model)
        assert doc["provenance"]["source"] == "toy.wav"
        assert doc["provenance"]["stft"]["window_size"] == 64
        reloaded = json.loads((tmp_path / "v.json").read_text())
        assert reloaded["provenance"] == doc["provenance"]
