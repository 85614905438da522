import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_scene
from gr2n.data import (
    UNLABELED,
    DatasetFormatError,
    Scene,
    as_batch,
    class_weights,
    make_batches,
    pad_scene,
    read_dataset,
    write_dataset,
)
from gr2n.synth import default_scenario, generate_dataset


def _scene_with_counts(counts):
    labels, n = {}, 1
    total = sum(counts)
    while n * (n - 1) < total:
        n += 1
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    it = iter(pairs)
    for k, c in enumerate(counts):
        for _ in range(c):
            labels[next(it)] = k
    return Scene("counts", np.zeros((n, 2)), labels)


def test_scene_validation():
    with pytest.raises(ValueError, match="self-pair"):
        Scene("a", np.zeros((2, 2)), {(0, 0): 1})
    with pytest.raises(ValueError, match="outside"):
        Scene("a", np.zeros((2, 2)), {(0, 2): 1})
    with pytest.raises(ValueError, match="non-finite"):
        Scene("a", np.array([[np.nan, 0.0]]))


def test_pad_identity():
    s = Scene("a", np.ones((2, 3)), {(0, 1): 2})
    p = pad_scene(s, 2)
    assert p.node_mask.all()
    assert p.pair_mask.tolist() == [[False, True], [False, False]]
    assert p.labels[0, 1] == 2 and p.labels[1, 0] == UNLABELED


def test_pad_with_empty_nodes():
    s = Scene("a", np.ones((2, 3)), {(0, 1): 2, (1, 0): 0})
    p = pad_scene(s, 4)
    assert p.node_mask.tolist() == [True, True, False, False]
    assert np.array_equal(p.features[2:], np.zeros((2, 3)))
    real_pairs = p.node_mask[:, None] & p.node_mask[None, :]
    assert (~real_pairs).sum() == 12
    assert p.pair_mask.sum() == 2 and not (p.pair_mask & ~real_pairs).any()


def test_pad_too_small_rejected():
    with pytest.raises(ValueError, match="n_max"):
        pad_scene(Scene("a", np.ones((3, 1))), 2)


def test_class_weights_formula():
    w = class_weights([_scene_with_counts([10, 30, 60])], 3)
    assert np.allclose(w, [10 / 3, 10 / 9, 5 / 9], rtol=0, atol=1e-15)


def test_class_weights_uniform_and_single():
    assert np.array_equal(class_weights([_scene_with_counts([4, 4, 4])], 3), np.ones(3))
    assert class_weights([_scene_with_counts([5])], 1).tolist() == [1.0]


def test_class_weights_zero_count_names_class():
    with pytest.raises(ValueError, match="class 1"):
        class_weights([_scene_with_counts([3, 0, 2])], 3)


def test_empty_file_gives_empty_dataset(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    assert read_dataset(path) == []


def test_one_scene_round_trip(tmp_path, rng):
    s = random_scene(rng, 4, 3, 5)
    write_dataset([s], tmp_path / "d.jsonl", 5)
    back = read_dataset(tmp_path / "d.jsonl")
    assert back == [s] and back.num_classes == 5 and back.feature_dim == 3
    assert back[0].features.tobytes() == s.features.tobytes()


def test_generated_dataset_round_trip(tmp_path):
    spec = default_scenario()
    scenes = list(generate_dataset(spec, 100, 3).train)
    write_dataset(scenes, tmp_path / "g.jsonl", spec.num_classes, spec.class_names)
    back = read_dataset(tmp_path / "g.jsonl")
    assert back == scenes and back.class_names == list(spec.class_names)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 6), st.integers(1, 4))
def test_round_trip_property(tmp_path_factory, seed, n, F):
    s = random_scene(np.random.default_rng(seed), n, F, 3)
    path = tmp_path_factory.mktemp("rt") / "s.jsonl"
    write_dataset([s], path, 3)
    assert read_dataset(path) == [s]


def test_malformed_record_reports_line(tmp_path, rng):
    path = tmp_path / "bad.jsonl"
    write_dataset([random_scene(rng, 3, 2, 2, scene_id=str(i)) for i in range(2)], path, 2)
    lines = path.read_text().splitlines()
    lines.insert(2, "{not json")
    path.write_text("\n".join(lines))
    with pytest.raises(DatasetFormatError, match="line 3"):
        read_dataset(path)


def test_inconsistent_feature_dimension(tmp_path, rng):
    with pytest.raises(ValueError, match="inconsistent"):
        write_dataset([random_scene(rng, 3, 2, 2), random_scene(rng, 3, 4, 2)], tmp_path / "x.jsonl", 2)
    path = tmp_path / "y.jsonl"
    write_dataset([random_scene(rng, 3, 2, 2)], path, 2)
    rec = json.loads(path.read_text().splitlines()[1])
    rec["features"] = [[0.0] * 4] * 3
    path.write_text(path.read_text() + json.dumps(rec) + "\n")
    with pytest.raises(DatasetFormatError, match="line 3.*dimension"):
        read_dataset(path)


def test_label_outside_classes_rejected(tmp_path):
    path = tmp_path / "k.jsonl"
    header = {"version": 1, "F": 1, "K": 2, "class_names": ["a", "b"]}
    rec = {"id": "x", "n_real": 2, "features": [[0.0], [1.0]], "labels": [{"i": 0, "j": 1, "k": 5}]}
    path.write_text(json.dumps(header) + "\n" + json.dumps(rec) + "\n")
    with pytest.raises(DatasetFormatError, match="line 2"):
        read_dataset(path)


def _scenes(count, rng):
    return [random_scene(rng, int(rng.integers(1, 5)), 2, 3, scene_id=str(i)) for i in range(count)]


def test_batches_small_and_even(rng):
    assert [len(b) for b in make_batches(_scenes(10, rng), 32, 4, 0)] == [10]
    assert [len(b) for b in make_batches(_scenes(64, rng), 32, 4, 0)] == [32, 32]


def test_batches_deterministic(rng):
    scenes = _scenes(20, rng)
    ids = lambda seed: [p.scene_id for b in make_batches(scenes, 6, 4, seed) for p in b]  # noqa: E731
    assert ids(5) == ids(5)
    assert sorted(ids(5)) == sorted(s.id for s in scenes)


def test_batches_reject_oversized_scene(rng):
    with pytest.raises(ValueError, match="exceeds"):
        make_batches([random_scene(rng, 5, 2, 2)], 4, 4, 0)


def test_as_batch_masks(rng):
    b = as_batch([random_scene(rng, 2, 3, 2), random_scene(rng, 4, 3, 2)])
    assert b.features.shape == (2, 4, 3)
    assert b.valid_pairs[0].sum() == 2 and b.valid_pairs[1].sum() == 12
