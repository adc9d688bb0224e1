import numpy as np
import pytest

from lascl.checkpoint import Checkpoint, from_dict, load, save, to_dict
from lascl.encoder import EncoderDims, init_params
from lascl.hierarchy import TemplateSpec, build_tree
from lascl.label_space import init_label_space

PATHS = [["a", "x"], ["a", "y"], ["b", "z"]]


@pytest.fixture
def ckpt():
    rng = np.random.default_rng(0)
    params = init_params(EncoderDims(64, 5, 4, 3), 1)
    params.b1 = rng.normal(size=4) * 1e-7  # awkward decimals
    labels = init_label_space(params, build_tree(enumerate(PATHS)), TemplateSpec("{label}"))
    return Checkpoint(params, labels, {"seed": 1, "tau": 0.3}, PATHS, PATHS, "{label}", 12, 0.75)


def test_round_trip_is_bit_exact(ckpt, tmp_path):
    save(ckpt, tmp_path / "c.json")
    back = load(tmp_path / "c.json")
    for (name, a), (_, b) in zip(ckpt.params.items(), back.params.items()):
        assert a.tobytes() == b.tobytes(), name
    for name in ("U", "W", "S"):
        assert getattr(ckpt.labels, name).tobytes() == getattr(back.labels, name).tobytes()
    assert back.labels.sentences == ckpt.labels.sentences
    assert (back.step, back.val_node_acc, back.config) == (12, 0.75, ckpt.config)


def test_save_is_deterministic(ckpt, tmp_path):
    save(ckpt, tmp_path / "a.json")
    save(from_dict(to_dict(ckpt)), tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_tree_and_index(ckpt):
    assert ckpt.tree.paths() == PATHS
    assert ckpt.class_index()[("b", "z")] == 2


def test_rejects_foreign_document():
    with pytest.raises(ValueError):
        from_dict({"format": "other"})
