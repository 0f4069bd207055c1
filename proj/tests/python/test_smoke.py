import os
import subprocess

import numpy as np
import pytest

import spoofdet


def test_descriptor_lengths():
    assert spoofdet.descriptor_length() == 8034
    img = np.random.default_rng(1).integers(0, 256, size=(32, 32, 3), dtype=np.uint8)
    values, layout = spoofdet.descriptor_vector(img)
    assert values.shape == (8034,)
    assert len(layout) == 18
    totals = {}
    for descriptor, plane, offset, length in layout:
        totals[descriptor] = totals.get(descriptor, 0) + length
    assert totals == {"lbp": 354, "coalbp": 6144, "lpq": 1536}


def test_histograms_are_normalized():
    plane = np.random.default_rng(2).integers(0, 256, size=(24, 24), dtype=np.uint8)
    for hist, bins in [
        (spoofdet.lbp_histogram(plane), 59),
        (spoofdet.coalbp_histogram(plane), 1024),
        (spoofdet.lpq_histogram(plane), 256),
    ]:
        assert hist.shape == (bins,)
        assert hist.min() >= 0.0
        assert abs(hist.sum() - 1.0) < 1e-5


def test_descriptor_determinism():
    img = np.random.default_rng(3).integers(0, 256, size=(20, 20, 3), dtype=np.uint8)
    a, _ = spoofdet.descriptor_vector(img)
    b, _ = spoofdet.descriptor_vector(img)
    assert np.array_equal(a, b)


def test_bad_shape_raises():
    with pytest.raises(spoofdet.SpoofdetError):
        spoofdet.lbp_histogram(np.zeros((2, 2), dtype=np.uint8))
    with pytest.raises(Exception):
        spoofdet.descriptor_vector(np.zeros((8, 8), dtype=np.uint8))


def test_metrics():
    eer_value, threshold = spoofdet.eer([0, 0, 1, 1], [0.1, 0.2, 0.8, 0.9])
    assert eer_value == 0.0
    assert 0.2 <= threshold <= 0.8

    report = spoofdet.evaluate([0, 0, 1, 1], [0.1, 0.2, 0.8, 0.9],
                               [0, 0, 1, 1], [0.05, 0.15, 0.7, 0.9])
    assert report["eer"] == 0.0
    assert report["hter"] == 0.0


def test_architecture_tables():
    assert spoofdet.deep_channel_total() == 13791392
    deep = spoofdet.deep_layer_table()
    by_name = {row["name"]: row["params"] for row in deep}
    assert by_name["Conv1"] == 896
    assert by_name["Dense1"] == 12845568
    fusion = {row["name"]: row["params"] for row in spoofdet.fusion_layer_table()}
    assert fusion["Dense3"] == 524800


def test_cli_inspect():
    cli = os.environ.get("SPOOFDET_CLI")
    if not cli:
        pytest.skip("SPOOFDET_CLI not set")
    out = subprocess.run([cli, "inspect"], capture_output=True, text=True, check=True)
    assert "13791392" in out.stdout.replace(",", "")
