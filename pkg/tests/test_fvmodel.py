"""Tests for the bundled Fisher-vector pipeline model and its file format."""

import numpy as np
import pytest

from sklearn.exceptions import NotFittedError

from relprop.errors import FormatError
from relprop.fisher import normalize_fv
from relprop.fvmodel import (
    FvPipelineModel,
    load_fv_model,
    require_fitted_pipeline,
    save_fv_model,
)
from relprop.pca import PcaReducer

from helpers import make_gmm, make_pca, random_orthonormal_rows


def toy_model(seed=0, normalize=True):
    rng = np.random.default_rng(seed)
    pca = make_pca(random_orthonormal_rows(4, 128, rng), rng.normal(size=128))
    gmm = make_gmm(
        weights=[0.4, 0.6],
        means=rng.normal(size=(2, 4)),
        variances=rng.uniform(0.5, 1.5, size=(2, 4)),
    )
    return FvPipelineModel(
        sizes=(16, 24), stride=8, pca=pca, gmm=gmm, normalize=normalize,
        class_names=["neg", "pos"], weights=rng.normal(size=(2, 16)),
        biases=rng.normal(size=2),
    )


def test_constructor_validates_classifier_shapes():
    model = toy_model()
    with pytest.raises(ValueError, match="does not match 2 classes x FV length 16"):
        FvPipelineModel(
            sizes=(16,), stride=8, pca=model.pca, gmm=model.gmm, normalize=True,
            class_names=["neg", "pos"], weights=np.zeros((2, 10)),
            biases=np.zeros(2),
        )
    with pytest.raises(ValueError, match="one bias per class"):
        FvPipelineModel(
            sizes=(16,), stride=8, pca=model.pca, gmm=model.gmm, normalize=True,
            class_names=["neg", "pos"], weights=np.zeros((2, 16)),
            biases=np.zeros(3),
        )


def test_class_index_accepts_names_indices_and_digit_strings():
    model = toy_model()
    assert model.class_index("neg") == 0
    assert model.class_index("pos") == 1
    assert model.class_index(1) == 1
    assert model.class_index("1") == 1
    with pytest.raises(ValueError, match="unknown class 'cat'; known: neg, pos"):
        model.class_index("cat")
    with pytest.raises(ValueError, match="class index 2 out of range"):
        model.class_index(2)


def test_encode_shapes_and_score_arithmetic():
    model = toy_model()
    image = np.random.default_rng(1).uniform(0.0, 255.0, size=(24, 48))
    descriptors, reduced, raw_fv, scored_fv = model.encode(image)
    assert len(descriptors) > 0
    assert reduced.shape == (len(descriptors), 4)
    assert raw_fv.shape == (16,)
    assert np.array_equal(scored_fv, normalize_fv(raw_fv))
    scores = model.predict_scores(image)
    assert np.allclose(
        scores, model.weights @ scored_fv + model.biases, atol=1e-15
    )


def test_unnormalized_model_scores_the_raw_vector():
    model = toy_model(normalize=False)
    image = np.random.default_rng(2).uniform(0.0, 255.0, size=(24, 24))
    _, _, raw_fv, scored_fv = model.encode(image)
    assert np.array_equal(scored_fv, raw_fv)


def test_too_small_image_is_rejected():
    with pytest.warns(UserWarning, match="exceeds image"):
        with pytest.raises(ValueError, match="produced no descriptors"):
            toy_model().encode(np.zeros((8, 8)))


def test_save_load_round_trip_preserves_everything(tmp_path):
    model = toy_model()
    path = tmp_path / "model.fvm"
    save_fv_model(model, path)
    loaded = load_fv_model(path)
    assert loaded.sizes == (16, 24)
    assert loaded.stride == 8
    assert loaded.normalize is True
    assert loaded.class_names == ["neg", "pos"]
    assert np.array_equal(loaded.pca.mean_, model.pca.mean_)
    assert np.array_equal(loaded.pca.components_, model.pca.components_)
    assert np.array_equal(loaded.gmm.weights_, model.gmm.weights_)
    assert np.array_equal(loaded.gmm.means_, model.gmm.means_)
    assert np.array_equal(loaded.gmm.variances_, model.gmm.variances_)
    assert np.array_equal(loaded.weights, model.weights)
    assert np.array_equal(loaded.biases, model.biases)
    again = tmp_path / "again.fvm"
    save_fv_model(loaded, again)
    assert path.read_bytes() == again.read_bytes()


def test_loaded_model_reproduces_scores(tmp_path):
    model = toy_model(seed=3)
    path = tmp_path / "model.fvm"
    save_fv_model(model, path)
    image = np.random.default_rng(4).uniform(0.0, 255.0, size=(24, 32))
    assert np.array_equal(
        load_fv_model(path).predict_scores(image), model.predict_scores(image)
    )


def saved_text(tmp_path):
    path = tmp_path / "model.fvm"
    save_fv_model(toy_model(), path)
    return path, path.read_text()


def test_load_rejects_wrong_header(tmp_path):
    path, text = saved_text(tmp_path)
    path.write_text(text.replace("RELPROP-FVMODEL v1", "RELPROP-SOMETHING v9", 1))
    with pytest.raises(FormatError, match="expected 'RELPROP-FVMODEL v1'"):
        load_fv_model(path)


def test_load_rejects_non_integer_sizes(tmp_path):
    path, text = saved_text(tmp_path)
    path.write_text(text.replace("sizes 16 24", "sizes 16 wide", 1))
    with pytest.raises(FormatError, match="bad integer in 'sizes' line"):
        load_fv_model(path)


def test_load_rejects_empty_class_name(tmp_path):
    path, text = saved_text(tmp_path)
    path.write_text(text.replace("\nclass neg\n", "\nclass\n", 1))
    with pytest.raises(FormatError, match="empty class name"):
        load_fv_model(path)


def test_load_rejects_truncated_file(tmp_path):
    path, text = saved_text(tmp_path)
    path.write_bytes(text.encode()[: len(text) // 2])
    with pytest.raises(FormatError):
        load_fv_model(path)


def test_class_names_with_spaces_round_trip(tmp_path):
    model = toy_model()
    model.class_names = ["desk lamp", "coffee mug"]
    path = tmp_path / "model.fvm"
    save_fv_model(model, path)
    assert load_fv_model(path).class_names == ["desk lamp", "coffee mug"]


def test_require_fitted_pipeline():
    model = toy_model()
    require_fitted_pipeline(model)  # fitted: no error
    model.pca = PcaReducer(n_components=4)
    with pytest.raises(NotFittedError, match="PcaReducer is not fitted"):
        require_fitted_pipeline(model)
