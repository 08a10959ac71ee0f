"""Round-trip and corruption tests for the binary model format."""

import numpy as np
import pytest

from sleepstager.features_low import FrameConfig
from sleepstager.features_mid import kmeans_fit, zscore_fit
from sleepstager.ingest import DataValidationError
from sleepstager.modelio import (
    DICT_MAGIC,
    MODEL_MAGIC,
    load_dictionary,
    load_model,
    save_dictionary,
    save_model,
)
from sleepstager.network import NetSpec, network_forward
from sleepstager.pipeline import FittedModel, FittedPipeline
from sleepstager.training import init_params


def tiny_model(seed=0, layers=(("blstm", 6),), num_classes=5, num_words=7):
    rng = np.random.default_rng(np.random.Philox(seed))
    low_dim = 11
    samples = rng.normal(size=(60, low_dim))
    d = kmeans_fit(samples, k=num_words, seed=seed)
    final_dim = low_dim + num_words
    stats = zscore_fit(rng.normal(size=(40, final_dim)))
    spec = NetSpec(input_dim=final_dim, num_classes=num_classes, layers=layers)
    net = init_params(spec, seed=seed + 1)
    return FittedModel(
        frame=FrameConfig(frame_epochs=3, freq_components=3, cepstrum_components=2),
        num_classes=num_classes,
        pipeline=FittedPipeline(dictionary=d, stats=stats),
        net=net,
    )


def test_model_round_trip_exact(tmp_path):
    for seed in range(4):
        model = tiny_model(seed=seed, layers=(("lstm", 5), ("mlp", 4)))
        path = str(tmp_path / f"m{seed}.slpnet")
        save_model(model, path)
        back = load_model(path)
        assert back.num_classes == model.num_classes
        assert back.frame == model.frame
        assert back.net.spec == model.net.spec
        np.testing.assert_array_equal(
            back.pipeline.dictionary.centers, model.pipeline.dictionary.centers
        )
        assert back.pipeline.dictionary.iterations == model.pipeline.dictionary.iterations
        assert back.pipeline.dictionary.objective == model.pipeline.dictionary.objective
        assert (
            back.pipeline.dictionary.objective_history
            == model.pipeline.dictionary.objective_history
        )
        np.testing.assert_array_equal(back.pipeline.stats.mean, model.pipeline.stats.mean)
        np.testing.assert_array_equal(back.pipeline.stats.std, model.pipeline.stats.std)
        for (name_a, a), (name_b, b) in zip(
            model.net.named_params(), back.net.named_params()
        ):
            assert name_a == name_b
            np.testing.assert_array_equal(a, b)


def test_save_load_save_byte_identical(tmp_path):
    model = tiny_model(seed=3)
    p1 = str(tmp_path / "a.slpnet")
    p2 = str(tmp_path / "b.slpnet")
    save_model(model, p1)
    save_model(load_model(p1), p2)
    with open(p1, "rb") as fh:
        raw1 = fh.read()
    with open(p2, "rb") as fh:
        raw2 = fh.read()
    assert raw1 == raw2
    assert raw1[:8] == MODEL_MAGIC


def test_reloaded_model_predicts_identically(tmp_path):
    model = tiny_model(seed=5)
    path = str(tmp_path / "m.slpnet")
    save_model(model, path)
    back = load_model(path)
    rng = np.random.default_rng(np.random.Philox(99))
    low = rng.normal(size=(12, model.pipeline.dictionary.centers.shape[1]))
    xa = model.pipeline.transform(low)
    xb = back.pipeline.transform(low)
    np.testing.assert_array_equal(xa, xb)
    pa, _ = network_forward(model.net, xa)
    pb, _ = network_forward(back.net, xb)
    np.testing.assert_array_equal(pa, pb)


def test_bad_magic_rejected(tmp_path):
    path = str(tmp_path / "m.slpnet")
    save_model(tiny_model(), path)
    with open(path, "rb") as fh:
        raw = fh.read()
    with open(path, "wb") as fh:
        fh.write(b"NOTMAGIC" + raw[8:])
    with pytest.raises(DataValidationError):
        load_model(path)


def test_truncated_body_rejected(tmp_path):
    path = str(tmp_path / "m.slpnet")
    save_model(tiny_model(), path)
    with open(path, "rb") as fh:
        raw = fh.read()
    with open(path, "wb") as fh:
        fh.write(raw[:-16])
    with pytest.raises(DataValidationError):
        load_model(path)


def test_trailing_bytes_rejected(tmp_path):
    path = str(tmp_path / "m.slpnet")
    save_model(tiny_model(), path)
    with open(path, "ab") as fh:
        fh.write(b"\x00" * 8)
    with pytest.raises(DataValidationError):
        load_model(path)


def test_non_finite_refused_on_save(tmp_path):
    model = tiny_model()
    model.net.out_b[0] = np.nan
    with pytest.raises(DataValidationError):
        save_model(model, str(tmp_path / "m.slpnet"))


def test_non_finite_refused_on_load(tmp_path):
    model = tiny_model()
    path = str(tmp_path / "m.slpnet")
    save_model(model, path)
    with open(path, "rb") as fh:
        raw = bytearray(fh.read())
    # overwrite the last float64 of the body with NaN
    raw[-8:] = np.array([np.nan]).tobytes()
    with open(path, "wb") as fh:
        fh.write(bytes(raw))
    with pytest.raises(DataValidationError):
        load_model(path)


def test_dictionary_round_trip(tmp_path):
    rng = np.random.default_rng(np.random.Philox(11))
    d = kmeans_fit(rng.normal(size=(80, 9)), k=6, seed=2)
    p1 = str(tmp_path / "a.slpdict")
    p2 = str(tmp_path / "b.slpdict")
    save_dictionary(d, p1)
    back = load_dictionary(p1)
    np.testing.assert_array_equal(back.centers, d.centers)
    assert back.iterations == d.iterations
    assert back.objective == d.objective
    assert back.objective_history == d.objective_history
    save_dictionary(back, p2)
    with open(p1, "rb") as fh:
        raw1 = fh.read()
    with open(p2, "rb") as fh:
        raw2 = fh.read()
    assert raw1 == raw2
    assert raw1[:8] == DICT_MAGIC


def test_model_magic_does_not_open_as_dictionary(tmp_path):
    path = str(tmp_path / "m.slpnet")
    save_model(tiny_model(), path)
    with pytest.raises(DataValidationError):
        load_dictionary(path)
