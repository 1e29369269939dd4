"""Weight serialization: engine compatibility, folding, round-trips.

These tests deliberately cross the package boundary: the exported bytes
must parse in the runtime engine (aecnet) and compute the same function.
"""

import struct

import numpy as np
import pytest
import torch
from aecnet import rnn

from aectrain.errors import ModelImportError
from aectrain.export import (export_model, import_model, serialize_model)
from aectrain.model import random_model, zero_model


def engine_outputs(blob, far, near):
    weights = rnn.load_weights(blob)
    state = rnn.NetState()
    rows = [rnn.forward(weights, far[i], near[i], state)
            for i in range(far.shape[0])]
    return (np.array([r.vad_near for r in rows]),
            np.array([r.vad_far for r in rows]),
            np.stack([r.band_gains for r in rows]))


def trainer_outputs(model, far, near):
    with torch.no_grad():
        vn, vf, g = model(torch.from_numpy(far)[None],
                          torch.from_numpy(near)[None])
    return vn[0].numpy(), vf[0].numpy(), g[0].numpy()


@pytest.fixture
def feature_block():
    rng = np.random.default_rng(17)
    return (rng.normal(0, 1, (12, 42)).astype(np.float32),
            rng.normal(0, 1, (12, 42)).astype(np.float32))


class TestEngineCompatibility:
    def test_export_validates_in_engine(self):
        blob = serialize_model(random_model(3))
        weights = rnn.load_weights(blob)
        assert weights.parameter_count() == 80832

    @pytest.mark.parametrize("seed", [1, 2])
    def test_engine_computes_same_function(self, feature_block, seed):
        model = random_model(seed)
        far, near = feature_block
        blob = serialize_model(model)
        for mine, engine in zip(trainer_outputs(model, far, near),
                                engine_outputs(blob, far, near)):
            np.testing.assert_allclose(mine, engine, atol=1e-5)

    def test_normalization_folds_into_front_layer(self, feature_block):
        model = random_model(9)
        rng = np.random.default_rng(40)
        model.set_normalization(rng.normal(0.0, 0.5, 84),
                                rng.uniform(0.5, 2.0, 84))
        far, near = feature_block
        # trainer normalizes internally; the engine gets raw features
        blob = serialize_model(model)
        for mine, engine in zip(trainer_outputs(model, far, near),
                                engine_outputs(blob, far, near)):
            np.testing.assert_allclose(mine, engine, atol=1e-5)

    def test_identity_stats_export_unchanged_weights(self):
        model = random_model(5)
        blob = serialize_model(model)
        weights = rnn.load_weights(blob)
        np.testing.assert_array_equal(
            weights["input_dense"].weights,
            model.input_dense.weight.detach().numpy())


class TestRoundTrips:
    def test_trainer_import_reexports_identical_bytes(self, tmp_path):
        path = tmp_path / "m.resw"
        export_model(random_model(21), path)
        blob = path.read_bytes()
        assert serialize_model(import_model(path)) == blob

    def test_engine_load_resave_identical_bytes(self):
        blob = serialize_model(random_model(22))
        assert rnn.save_weights(rnn.load_weights(blob)) == blob

    def test_folded_export_survives_both_round_trips(self, tmp_path):
        model = zero_model()
        model.set_normalization(np.linspace(-1, 1, 84), np.linspace(0.5, 2, 84))
        path = tmp_path / "folded.resw"
        export_model(model, path)
        blob = path.read_bytes()
        assert serialize_model(import_model(path)) == blob
        assert rnn.save_weights(rnn.load_weights(blob)) == blob


class TestImportErrors:
    def test_rejects_wrong_magic(self, tmp_path):
        path = tmp_path / "bad.resw"
        path.write_bytes(b"NOPE" + bytes(20))
        with pytest.raises(ModelImportError, match="not an RESW"):
            import_model(path)

    def test_rejects_corrupt_crc(self, tmp_path):
        path = tmp_path / "corrupt.resw"
        blob = bytearray(serialize_model(zero_model()))
        blob[100] ^= 0xFF
        path.write_bytes(bytes(blob))
        with pytest.raises(ModelImportError, match="CRC"):
            import_model(path)

    def test_rejects_wrong_layer_count(self, tmp_path):
        import zlib
        path = tmp_path / "layers.resw"
        body = struct.pack("<4sII", b"RESW", 1, 3)
        path.write_bytes(body + struct.pack("<I", zlib.crc32(body)))
        with pytest.raises(ModelImportError, match="unsupported header"):
            import_model(path)
