"""Model serialization: bit-exact round-trips and document validation."""

import json
import math
import os

import numpy as np
import pytest

from clickcast import (
    MODEL_FORMAT,
    MODEL_VERSION,
    AdditiveModel,
    BaggedModel,
    DataError,
    InternalNode,
    LeafNode,
    LearnerSpec,
    LinearModel,
    ParseError,
    atomic_write_text,
    decode_model,
    encode_model,
    fit_learner,
    fit_linear,
    fit_m5p,
    load_model,
    load_model_document,
    predict_learner,
    predict_model,
    save_model,
)


def linear(coefficients, intercept, eps=1e-8):
    return LinearModel(
        coefficients=np.asarray(coefficients, dtype=np.float64),
        intercept=float(intercept),
        ridge_epsilon=float(eps),
    )


def small_tree():
    left = LeafNode(model=2.5, n_training=3, training_sd=0.5)
    right = LeafNode(model=linear([1.0, -0.25], 0.75), n_training=5, training_sd=1.25)
    return InternalNode(
        feature=1, threshold=3.5, left=left, right=right, n_training=8, model=None
    )


class TestEncodeDecode:
    def test_linear_round_trip_is_bit_exact(self):
        model = linear([0.1, 1.0 / 3.0, -2.5e-17], 7.1)
        back = decode_model(json.loads(json.dumps(encode_model(model))))
        assert isinstance(back, LinearModel)
        np.testing.assert_array_equal(back.coefficients, model.coefficients)
        assert back.intercept == model.intercept
        assert back.ridge_epsilon == model.ridge_epsilon

    def test_constant_leaf_round_trip(self):
        leaf = LeafNode(model=41.125, n_training=9, training_sd=3.0)
        back = decode_model(json.loads(json.dumps(encode_model(leaf))))
        assert isinstance(back, LeafNode)
        assert isinstance(back.model, float) and back.model == 41.125
        assert back.n_training == 9 and back.training_sd == 3.0

    def test_linear_leaf_round_trip(self):
        leaf = LeafNode(model=linear([0.3], -0.7), n_training=4, training_sd=0.1)
        back = decode_model(json.loads(json.dumps(encode_model(leaf))))
        assert isinstance(back.model, LinearModel)
        np.testing.assert_array_equal(back.model.coefficients, [0.3])
        assert back.model.intercept == -0.7

    def test_split_round_trip(self):
        tree = small_tree()
        back = decode_model(json.loads(json.dumps(encode_model(tree))))
        assert isinstance(back, InternalNode)
        assert back.feature == 1 and back.threshold == 3.5 and back.n_training == 8
        assert back.model is None
        assert isinstance(back.left, LeafNode) and back.left.model == 2.5
        assert isinstance(back.right, LeafNode)

    def test_bagged_round_trip(self):
        bag = BaggedModel(members=(small_tree(), small_tree()), rounds=2, seed=17)
        back = decode_model(json.loads(json.dumps(encode_model(bag))))
        assert isinstance(back, BaggedModel)
        assert back.rounds == 2 and back.seed == 17 and len(back.members) == 2
        assert all(isinstance(m, InternalNode) for m in back.members)

    def test_additive_round_trip(self):
        model = AdditiveModel(
            initial_prediction=12.5,
            stages=((small_tree(), 0.5), (linear([2.0], 0.0), 0.5)),
            subsample_fraction=0.5,
            seed=3,
        )
        back = decode_model(json.loads(json.dumps(encode_model(model))))
        assert isinstance(back, AdditiveModel)
        assert back.initial_prediction == 12.5
        assert back.subsample_fraction == 0.5 and back.seed == 3
        assert len(back.stages) == 2
        assert back.stages[0][1] == 0.5 and back.stages[1][1] == 0.5
        assert isinstance(back.stages[1][0], LinearModel)

    def test_awkward_floats_survive_json(self):
        # Shortest round-trip decimal must restore every bit.
        values = [
            0.1,
            1.0 / 3.0,
            math.pi,
            -1e-308,
            1.7976931348623157e308,
            np.nextafter(1.0, 2.0),
            np.nextafter(0.0, 1.0),
            -0.0,
        ]
        model = linear(values, np.nextafter(2.0, 3.0))
        back = decode_model(json.loads(json.dumps(encode_model(model))))
        for got, want in zip(back.coefficients, values):
            assert got == want and math.copysign(1.0, got) == math.copysign(1.0, want)
        assert back.intercept == np.nextafter(2.0, 3.0)

    def test_unknown_record_type_rejected(self):
        with pytest.raises(DataError, match="unknown model record type"):
            decode_model({"type": "forest"})

    def test_non_dict_record_rejected(self):
        with pytest.raises(DataError, match="must be an object"):
            decode_model([1, 2, 3])

    def test_missing_field_rejected(self):
        with pytest.raises(DataError, match="missing field"):
            decode_model({"type": "linear", "coefficients": [1.0]})

    def test_bool_is_not_a_number(self):
        record = encode_model(small_tree())
        record["n_training"] = True
        with pytest.raises(DataError, match="wrong type"):
            decode_model(record)

    def test_bool_coefficient_rejected(self):
        with pytest.raises(DataError, match="coefficients must be numbers"):
            decode_model(
                {
                    "type": "linear",
                    "coefficients": [1.0, True],
                    "intercept": 0.0,
                    "ridge_epsilon": 0.0,
                }
            )

    def test_bare_constant_record_rejected(self):
        with pytest.raises(DataError, match="only inside leaves"):
            decode_model({"type": "constant", "value": 3.0})

    def test_leaf_model_must_be_linear_or_constant(self):
        record = encode_model(LeafNode(model=1.0, n_training=1, training_sd=0.0))
        record["model"] = encode_model(small_tree())
        with pytest.raises(DataError):
            decode_model(record)

    def test_split_children_must_be_tree_nodes(self):
        record = encode_model(small_tree())
        record["left"] = encode_model(linear([1.0], 0.0))
        with pytest.raises(DataError, match="children must be tree nodes"):
            decode_model(record)

    def test_additive_stage_must_be_object(self):
        record = encode_model(
            AdditiveModel(
                initial_prediction=0.0,
                stages=((small_tree(), 1.0),),
                subsample_fraction=1.0,
                seed=0,
            )
        )
        record["stages"] = [3]
        with pytest.raises(DataError, match="stages must be objects"):
            decode_model(record)

    def test_unserializable_object_rejected(self):
        with pytest.raises(TypeError):
            encode_model(object())


class TestSaveLoad:
    def test_document_shape(self, tmp_path):
        path = tmp_path / "model.json"
        save_model(small_tree(), path)
        document = json.loads(path.read_text())
        assert document["format"] == MODEL_FORMAT
        assert document["version"] == MODEL_VERSION
        assert document["model"]["type"] == "split"
        assert path.read_text().endswith("\n")

    def test_learner_echo_round_trip(self, tmp_path):
        spec = LearnerSpec(
            kind="bagging",
            params={"rounds": 3},
            base=LearnerSpec(kind="m5p", params={"min_leaf_instances": 8}),
        )
        path = tmp_path / "model.json"
        save_model(small_tree(), path, learner=spec)
        document = load_model_document(path)
        assert LearnerSpec.from_config(document["learner"]) == spec

    def test_extra_metadata_is_kept(self, tmp_path):
        path = tmp_path / "model.json"
        save_model(small_tree(), path, extra={"note": "hand-built"})
        assert load_model_document(path)["note"] == "hand-built"

    def test_no_learner_key_when_not_given(self, tmp_path):
        path = tmp_path / "model.json"
        save_model(small_tree(), path)
        assert "learner" not in load_model_document(path)

    def test_fitted_models_predict_identically_after_reload(self, tmp_path):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(120, 3))
        y = X[:, 0] * 2.0 + np.where(X[:, 1] > 0, 5.0, -1.0) + rng.normal(size=120)
        specs = [
            LearnerSpec(kind="linear"),
            LearnerSpec(kind="m5p", params={"min_leaf_instances": 8}),
            LearnerSpec(
                kind="bagging",
                params={"rounds": 3},
                base=LearnerSpec(kind="m5p", params={"min_leaf_instances": 10}),
            ),
            LearnerSpec(
                kind="additive",
                params={"iterations": 3, "shrinkage": 0.5, "subsample_fraction": 0.7},
                base=LearnerSpec(kind="reptree"),
            ),
        ]
        Xq = rng.normal(size=(40, 3))
        for index, spec in enumerate(specs):
            model = fit_learner(spec, X, y, seed=9)
            path = tmp_path / f"model-{index}.json"
            save_model(model, path, learner=spec)
            reloaded = load_model(path)
            np.testing.assert_array_equal(
                predict_learner(model, Xq), predict_learner(reloaded, Xq)
            )

    def test_m5p_with_smoothing_survives_reload(self, tmp_path):
        rng = np.random.default_rng(11)
        X = rng.normal(size=(90, 2))
        y = np.where(X[:, 0] > 0, 10.0, 2.0) + 0.5 * X[:, 1]
        model = fit_m5p(X, y)
        path = tmp_path / "m5p.json"
        save_model(model, path)
        np.testing.assert_array_equal(
            predict_model(model, X), predict_model(load_model(path), X)
        )

    def test_nan_coefficients_cannot_be_saved(self, tmp_path):
        model = linear([float("nan")], 0.0)
        with pytest.raises(ValueError):
            save_model(model, tmp_path / "bad.json")

    def test_malformed_json_raises_parse_error(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{ not json")
        with pytest.raises(ParseError, match="not a valid model file"):
            load_model_document(path)

    def test_non_object_document_rejected(self, tmp_path):
        path = tmp_path / "array.json"
        path.write_text("[1, 2, 3]\n")
        with pytest.raises(DataError, match="must be an object"):
            load_model_document(path)

    def test_wrong_format_marker_rejected(self, tmp_path):
        path = tmp_path / "other.json"
        path.write_text(json.dumps({"format": "other", "version": 1, "model": {}}))
        with pytest.raises(DataError, match=MODEL_FORMAT):
            load_model_document(path)

    def test_unsupported_version_rejected(self, tmp_path):
        path = tmp_path / "v2.json"
        document = {"format": MODEL_FORMAT, "version": 99, "model": {"type": "leaf"}}
        path.write_text(json.dumps(document))
        with pytest.raises(DataError, match="unsupported version"):
            load_model_document(path)

    def test_missing_model_record_rejected(self, tmp_path):
        path = tmp_path / "empty.json"
        path.write_text(json.dumps({"format": MODEL_FORMAT, "version": MODEL_VERSION}))
        with pytest.raises(DataError, match="missing model record"):
            load_model_document(path)

    def test_saving_twice_is_byte_identical(self, tmp_path):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(60, 2))
        y = X[:, 0] + rng.normal(size=60)
        model = fit_linear(X, y)
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        save_model(model, a, learner=LearnerSpec(kind="linear"))
        save_model(model, b, learner=LearnerSpec(kind="linear"))
        assert a.read_bytes() == b.read_bytes()


class TestAtomicWrite:
    def test_writes_content(self, tmp_path):
        path = tmp_path / "out.txt"
        atomic_write_text(path, "hello\n")
        assert path.read_text() == "hello\n"

    def test_overwrites_existing_file(self, tmp_path):
        path = tmp_path / "out.txt"
        path.write_text("old")
        atomic_write_text(path, "new")
        assert path.read_text() == "new"

    def test_leaves_no_temp_files(self, tmp_path):
        atomic_write_text(tmp_path / "out.txt", "x")
        assert os.listdir(tmp_path) == ["out.txt"]

    def test_relative_path_in_cwd(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        atomic_write_text("plain.txt", "y")
        assert (tmp_path / "plain.txt").read_text() == "y"
