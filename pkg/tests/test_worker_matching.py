# -*- coding: utf-8 -*-

import math

import numpy as np
import pytest

from newton_scenarios.catalog import build_catalog
from newton_scenarios.errors import BankError, LabelError, ParameterError
from newton_scenarios.worker_dynamics import STATES_PER_ENTRY
from newton_scenarios.worker_matching import (
    COSINE_EPS,
    EncoderParams,
    FusionConfig,
    ScenarioBank,
    StateDescriptorMatrix,
    accuracy,
    bank_from_columns,
    cosine_sim,
    encode,
    fuse,
    image_scores,
    loss_and_gradients,
    loss_gradients,
    loss_value,
    motion_scores,
    nll_loss,
    one_hot,
    output_classes,
    predict,
    score_entry,
    state_accuracy,
    state_motion_scores,
    state_one_hot,
    state_similarities,
    supervision_of,
)


def _random_params(rng, dim=6, raw=4, classes=5):
    return EncoderParams(
        weight=rng.normal(size=(dim, raw)),
        bias=0.1 * rng.normal(size=dim),
        classifier_weight=0.3 * rng.normal(size=(classes, dim)),
        classifier_bias=0.1 * rng.normal(size=classes),
    )


def test_cosine_sim_parallel_vectors():
    x = np.array([3.0, 4.0])
    assert cosine_sim(x, 2 * x) == pytest.approx(50 / (50 + COSINE_EPS))


def test_cosine_sim_zero_vector():
    assert cosine_sim(np.zeros(3), np.array([1.0, 2.0, 3.0])) == 0.0


def test_cosine_sim_bounds_and_symmetry():
    rng = np.random.default_rng(7)
    for _ in range(50):
        x, y = rng.normal(size=(2, 8))
        s = cosine_sim(x, y)
        assert -1.0 < s < 1.0
        assert s == cosine_sim(y, x)


def test_state_descriptor_matrix_shape():
    with pytest.raises(BankError):
        StateDescriptorMatrix(1, np.zeros((4, STATES_PER_ENTRY - 1)))


def test_state_descriptor_matrix_non_finite():
    cols = np.zeros((4, STATES_PER_ENTRY))
    cols[2, 3] = np.nan
    with pytest.raises(BankError):
        StateDescriptorMatrix(1, cols)


def test_scenario_bank_mismatched_lengths():
    catalog = build_catalog()[:2]
    with pytest.raises(BankError):
        ScenarioBank(catalog, [StateDescriptorMatrix(1, np.ones((3, 10)))], 3)


def test_scenario_bank_misplaced_matrix():
    catalog = build_catalog()[:2]
    matrices = [
        StateDescriptorMatrix(2, np.ones((3, 10))),
        StateDescriptorMatrix(1, np.ones((3, 10))),
    ]
    with pytest.raises(BankError):
        ScenarioBank(catalog, matrices, 3)


def test_scenario_bank_mixed_dimensions():
    catalog = build_catalog()[:2]
    matrices = [
        StateDescriptorMatrix(1, np.ones((3, 10))),
        StateDescriptorMatrix(2, np.ones((4, 10))),
    ]
    with pytest.raises(BankError):
        ScenarioBank(catalog, matrices, 3)


def test_scenario_bank_unknown_entry(synthetic_bank):
    bank = synthetic_bank()
    with pytest.raises(BankError):
        bank.entry(6)


def test_scenario_bank_accessors(synthetic_bank):
    bank = synthetic_bank(k=4, dim=3)
    assert len(bank) == 4
    assert bank.stack.shape == (4, 3, STATES_PER_ENTRY)
    assert bank.norms.shape == (4, STATES_PER_ENTRY)
    assert bank.matrix(3).entry_id == 3
    assert bank.entry(4).entry_id == 4


def test_state_similarities_match_score_entry(synthetic_bank):
    bank = synthetic_bank()
    x = np.random.default_rng(3).normal(size=6)
    sims = state_similarities(x, bank)
    for i, entry in enumerate(bank.catalog):
        per_state, confidence = score_entry(x, bank.matrix(entry.entry_id))
        assert np.allclose(sims[i], per_state)
        assert confidence == pytest.approx(per_state.max())


def test_state_similarities_wrong_dimension(synthetic_bank):
    with pytest.raises(BankError):
        state_similarities(np.ones(5), synthetic_bank())


def test_score_entry_picks_matching_column():
    rng = np.random.default_rng(11)
    cols = rng.normal(size=(8, STATES_PER_ENTRY))
    per_state, confidence = score_entry(cols[:, 6], StateDescriptorMatrix(1, cols))
    assert int(np.argmax(per_state)) == 6
    assert confidence == pytest.approx(1.0, abs=1e-4)


def test_motion_and_image_scores_are_distributions(synthetic_bank):
    rng = np.random.default_rng(5)
    bank = synthetic_bank()
    params = _random_params(rng)
    x = rng.normal(size=6)
    for scores in (motion_scores(x, bank), image_scores(x, params)):
        assert scores.shape == (5,)
        assert np.all(scores > 0)
        assert scores.sum() == pytest.approx(1.0)


def test_image_scores_wrong_dimension():
    params = EncoderParams.identity(6, 4, 5)
    with pytest.raises(ParameterError):
        image_scores(np.ones(4), params)


@pytest.mark.parametrize("lam", [-0.1, 1.5])
def test_fusion_config_range(lam):
    with pytest.raises(ParameterError):
        FusionConfig(lam)


def test_fuse_extremes_return_copies():
    img = np.array([0.7, 0.2, 0.1])
    mot = np.array([0.1, 0.3, 0.6])
    only_img = fuse(img, mot, FusionConfig(1.0))
    only_mot = fuse(img, mot, FusionConfig(0.0))
    assert np.array_equal(only_img, img) and only_img is not img
    assert np.array_equal(only_mot, mot) and only_mot is not mot


def test_fuse_mixture():
    img = np.array([0.7, 0.2, 0.1])
    mot = np.array([0.1, 0.3, 0.6])
    fused = fuse(img, mot, FusionConfig(0.25))
    assert np.allclose(fused, [0.25, 0.275, 0.475])
    assert fused.sum() == pytest.approx(1.0)


def test_fuse_shape_mismatch():
    with pytest.raises(ParameterError):
        fuse(np.ones(3) / 3, np.ones(4) / 4, FusionConfig())


def test_encode_identity_pads_with_zeros():
    params = EncoderParams.identity(6, 4, 5)
    x = encode([1.0, 2.0, 3.0, 4.0], params)
    assert np.array_equal(x, [1.0, 2.0, 3.0, 4.0, 0.0, 0.0])


def test_encode_is_affine():
    rng = np.random.default_rng(2)
    params = _random_params(rng)
    a, b = rng.normal(size=(2, 4))
    assert np.allclose(
        encode(a + b, params) + params.bias, encode(a, params) + encode(b, params)
    )


def test_encode_wrong_length():
    with pytest.raises(ParameterError):
        encode(np.ones(3), EncoderParams.identity(6, 4, 5))


def test_encoder_params_identity_needs_room():
    with pytest.raises(ParameterError):
        EncoderParams.identity(3, 4, 5)


def test_encoder_params_inconsistent_shapes():
    with pytest.raises(ParameterError):
        EncoderParams(np.ones((6, 4)), np.ones(5), np.ones((5, 6)), np.ones(5))


def test_encoder_params_initialize_is_seeded():
    a = EncoderParams.initialize(6, 4, 5, np.random.default_rng(9))
    b = EncoderParams.initialize(6, 4, 5, np.random.default_rng(9))
    assert a.allclose(b)
    assert (a.descriptor_dim, a.raw_dim, a.classes) == (6, 4, 5)
    assert not np.any(a.bias) and not np.any(a.classifier_bias)
    assert not np.any(a.classifier_weight)
    assert np.any(a.weight)


def test_encoder_params_copy_is_deep():
    params = EncoderParams.identity(6, 4, 5)
    clone = params.copy()
    clone.weight[0, 0] = 5.0
    assert params.weight[0, 0] == 1.0


def test_predict_self_retrieval(canonical_bank, canonical_queries, identity_params):
    cfg = FusionConfig(0.0)
    assert len(canonical_queries) == 660
    for query in canonical_queries:
        result = predict(
            encode(query.features, identity_params),
            canonical_bank,
            identity_params,
            cfg,
        )
        assert (result.entry_id, result.state) == (query.entry_id, query.state)


def test_predict_state_is_brute_force_argmax(canonical_bank, identity_params):
    rng = np.random.default_rng(4)
    for _ in range(20):
        x = encode(rng.normal(size=10), identity_params)
        result = predict(x, canonical_bank, identity_params, FusionConfig(0.3))
        per_state, _ = score_entry(x, canonical_bank.matrix(result.entry_id))
        best = max(range(STATES_PER_ENTRY), key=lambda k: (per_state[k], -k))
        assert result.state == best + 1
        assert np.allclose(result.per_state_sims, per_state)


def test_predict_result_scores(canonical_bank, canonical_queries, identity_params):
    query = canonical_queries[123]
    x = encode(query.features, identity_params)
    result = predict(x, canonical_bank, identity_params, FusionConfig(0.5))
    assert result.confidences.shape == (66,)
    assert result.confidences.sum() == pytest.approx(1.0)
    assert result.confidence == pytest.approx(result.confidences.max())
    assert np.allclose(result.image, 1 / 66)
    assert np.allclose(result.confidences, 0.5 * result.image + 0.5 * result.motion)


def test_predict_untrained_head_ties_to_first_entry(
    canonical_bank, canonical_queries, identity_params
):
    query = canonical_queries[-1]
    x = encode(query.features, identity_params)
    result = predict(x, canonical_bank, identity_params, FusionConfig(1.0))
    assert result.entry_id == 1


def test_predict_empty_bank():
    bank = bank_from_columns([], [])
    with pytest.raises(BankError):
        predict(np.ones(64), bank, EncoderParams.identity(64, 10, 0), FusionConfig())


def test_predict_head_does_not_fit_bank(synthetic_bank):
    params = EncoderParams.identity(6, 4, 3)
    with pytest.raises(ParameterError):
        predict(np.ones(6), synthetic_bank(), params, FusionConfig())


def test_nll_loss_perfect_prediction():
    p = np.array([0.0, 1.0, 0.0])
    assert nll_loss(p, p) == pytest.approx(0.0, abs=1e-9)


def test_nll_loss_uniform_prediction():
    k = 66
    p = np.zeros(k)
    p[0] = 1.0
    expected = -(math.log(1 / k) + (k - 1) * math.log(1 - 1 / k)) / k
    loss = nll_loss(p, np.full(k, 1 / k))
    assert loss == pytest.approx(expected)
    assert loss == pytest.approx(0.0785, abs=1e-3)


def test_nll_loss_clamps_zero_probability():
    p = np.array([1.0, 0.0])
    loss = nll_loss(p, np.array([0.0, 1.0]))
    assert math.isfinite(loss)
    assert loss == pytest.approx(-math.log(1e-12), rel=1e-4)


@pytest.mark.parametrize(
    "p", [[0.5, 0.5, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 0.0], [[1.0, 0.0, 0.0]]]
)
def test_nll_loss_rejects_non_one_hot(p):
    with pytest.raises(LabelError):
        nll_loss(np.array(p), np.full(3, 1 / 3))


def test_nll_loss_shape_mismatch():
    with pytest.raises(LabelError):
        nll_loss(np.array([1.0, 0.0, 0.0]), np.full(4, 0.25))


def test_one_hot(synthetic_bank):
    bank = synthetic_bank()
    assert np.array_equal(one_hot(3, bank), [0, 0, 1, 0, 0])
    with pytest.raises(LabelError):
        one_hot(9, bank)


def _directional_check(bank, params, raw, label, cfg, rng, h=1e-6, state=None):
    grads = loss_gradients(raw, label, bank, params, cfg, state)
    dirs = [rng.normal(size=a.shape) for a in params.arrays()]
    analytic = sum(float(np.sum(g * d)) for g, d in zip(grads.arrays(), dirs))
    plus = EncoderParams(*(a + h * d for a, d in zip(params.arrays(), dirs)))
    minus = EncoderParams(*(a - h * d for a, d in zip(params.arrays(), dirs)))
    numeric = (
        loss_value(raw, label, bank, plus, cfg, state)
        - loss_value(raw, label, bank, minus, cfg, state)
    ) / (2 * h)
    tolerance = 1e-4 * max(abs(analytic), abs(numeric)) + 1e-9
    assert abs(analytic - numeric) <= tolerance


@pytest.mark.parametrize("lam", [0.0, 0.5, 1.0])
@pytest.mark.parametrize("seed", range(34))
def test_loss_gradients_match_finite_differences(synthetic_bank, lam, seed):
    rng = np.random.default_rng(seed)
    bank = synthetic_bank(seed=seed)
    params = _random_params(rng)
    raw = rng.normal(size=4)
    label = int(rng.integers(1, 6))
    _directional_check(bank, params, raw, label, FusionConfig(lam), rng)


def test_batch_gradient_is_mean_of_examples(synthetic_bank):
    rng = np.random.default_rng(21)
    bank = synthetic_bank()
    params = _random_params(rng)
    raw = rng.normal(size=(3, 4))
    labels = [1, 4, 4]
    cfg = FusionConfig(0.5)
    loss, grads = loss_and_gradients(raw, labels, bank, params, cfg)
    pairs = list(zip(raw, labels))
    singles = [loss_gradients(r, lab, bank, params, cfg) for r, lab in pairs]
    assert loss == pytest.approx(
        np.mean([loss_value(r, lab, bank, params, cfg) for r, lab in pairs])
    )
    for k, batch_grad in enumerate(grads.arrays()):
        mean = np.mean([g.arrays()[k] for g in singles], axis=0)
        assert np.allclose(batch_grad, mean)


def test_gradients_without_motion_flow_through_head(synthetic_bank):
    rng = np.random.default_rng(8)
    params = EncoderParams(
        rng.normal(size=(6, 4)), rng.normal(size=6), np.zeros((5, 6)), np.zeros(5)
    )
    cfg = FusionConfig(1.0)
    grads = loss_gradients(rng.normal(size=4), 2, synthetic_bank(), params, cfg)
    assert not np.any(grads.weight)
    assert not np.any(grads.bias)
    assert np.any(grads.classifier_weight)
    assert np.any(grads.classifier_bias)


def test_gradients_without_head_leave_classifier(synthetic_bank):
    rng = np.random.default_rng(12)
    params = _random_params(rng)
    cfg = FusionConfig(0.0)
    grads = loss_gradients(rng.normal(size=4), 2, synthetic_bank(), params, cfg)
    assert not np.any(grads.classifier_weight)
    assert not np.any(grads.classifier_bias)
    assert np.any(grads.weight)


def test_loss_and_gradients_label_errors(synthetic_bank):
    bank = synthetic_bank()
    params = _random_params(np.random.default_rng(1))
    with pytest.raises(LabelError):
        loss_and_gradients(np.ones((2, 4)), [1], bank, params, FusionConfig())
    with pytest.raises(LabelError):
        loss_and_gradients(np.ones((1, 4)), [42], bank, params, FusionConfig())


def test_loss_and_gradients_shape_errors(synthetic_bank):
    bank = synthetic_bank()
    params = _random_params(np.random.default_rng(1))
    with pytest.raises(ParameterError):
        loss_and_gradients(np.ones((1, 3)), [1], bank, params, FusionConfig())
    with pytest.raises(ParameterError):
        loss_and_gradients(
            np.ones((1, 4)), [1], synthetic_bank(k=4), params, FusionConfig()
        )


def test_accuracy(synthetic_bank):
    bank = synthetic_bank(k=3, dim=4)
    params = EncoderParams.identity(4, 4, 3)
    dataset = [(bank.stack[i][:, 2], i + 1) for i in range(3)]
    assert accuracy(dataset, bank, params, FusionConfig(0.0)) == 1.0
    assert accuracy([], bank, params, FusionConfig(0.0)) == 0.0


def _unit_bank(k=5, dim=6, seed=0):
    rng = np.random.default_rng(seed)
    columns = []
    for _ in range(k):
        cols = rng.normal(size=(dim, STATES_PER_ENTRY))
        columns.append(cols / np.linalg.norm(cols, axis=0))
    return bank_from_columns(build_catalog()[:k], columns)


def test_predict_ignores_positive_query_scale():
    bank = _unit_bank()
    params = EncoderParams.identity(6, 6, 5)
    cfg = FusionConfig(0.0)
    rng = np.random.default_rng(17)
    for _ in range(1000):
        x = rng.normal(size=6)
        base = predict(x, bank, params, cfg)
        for c in (0.5, 2.0, 10.0):
            scaled = predict(c * x, bank, params, cfg)
            assert (scaled.entry_id, scaled.state) == (base.entry_id, base.state)


def test_output_classes(synthetic_bank):
    bank = synthetic_bank()
    assert output_classes(bank) == 5
    assert output_classes(bank, "state") == 5 * STATES_PER_ENTRY
    with pytest.raises(ParameterError):
        output_classes(bank, "viewpoint")


def test_supervision_of(synthetic_bank):
    bank = synthetic_bank()
    assert supervision_of(EncoderParams.identity(6, 4, 5), bank) == "entry"
    assert supervision_of(EncoderParams.identity(6, 4, 50), bank) == "state"
    with pytest.raises(ParameterError):
        supervision_of(EncoderParams.identity(6, 4, 7), bank)


def test_with_zero_head_keeps_encoder():
    params = _random_params(np.random.default_rng(2))
    wide = params.with_zero_head(50)
    assert wide.classes == 50
    assert np.array_equal(wide.weight, params.weight)
    assert wide.weight is not params.weight
    assert not np.any(wide.classifier_weight) and not np.any(wide.classifier_bias)


def test_state_one_hot(synthetic_bank):
    bank = synthetic_bank()
    p = state_one_hot(3, 4, bank)
    assert p.shape == (50,)
    assert p.sum() == 1.0
    assert p[2 * STATES_PER_ENTRY + 3] == 1.0


@pytest.mark.parametrize("label,state", [(3, 0), (3, 11), (3, None), (9, 2)])
def test_state_one_hot_rejects(synthetic_bank, label, state):
    with pytest.raises(LabelError):
        state_one_hot(label, state, synthetic_bank())


def test_state_motion_scores_cover_every_state(synthetic_bank):
    bank = synthetic_bank()
    x = np.random.default_rng(6).normal(size=6)
    scores = state_motion_scores(x, bank)
    assert scores.shape == (50,)
    assert scores.sum() == pytest.approx(1.0)
    sims = state_similarities(x, bank)
    assert int(np.argmax(scores)) == int(np.argmax(sims))


def test_predict_state_head_self_retrieval(synthetic_bank):
    bank = synthetic_bank()
    params = EncoderParams.identity(6, 6, 50)
    cfg = FusionConfig(0.5)
    for i, entry in enumerate(bank.catalog):
        for k in range(STATES_PER_ENTRY):
            result = predict(bank.stack[i][:, k], bank, params, cfg)
            assert (result.entry_id, result.state) == (entry.entry_id, k + 1)
    assert result.motion.shape == (5, STATES_PER_ENTRY)
    assert result.image.shape == (5, STATES_PER_ENTRY)
    assert result.confidences.shape == (5,)
    assert result.confidence == pytest.approx(
        0.5 * result.image.max() + 0.5 * result.motion.max()
    )


def test_predict_state_head_ties_to_first_state(synthetic_bank):
    params = EncoderParams.identity(6, 6, 50)
    result = predict(np.ones(6), synthetic_bank(), params, FusionConfig(1.0))
    assert (result.entry_id, result.state) == (1, 1)


@pytest.mark.parametrize("lam", [0.0, 0.5, 1.0])
@pytest.mark.parametrize("seed", range(10))
def test_state_head_gradients_match_finite_differences(synthetic_bank, lam, seed):
    rng = np.random.default_rng(100 + seed)
    bank = synthetic_bank(seed=seed)
    params = _random_params(rng, classes=50)
    raw = rng.normal(size=4)
    label = int(rng.integers(1, 6))
    state = int(rng.integers(1, STATES_PER_ENTRY + 1))
    _directional_check(bank, params, raw, label, FusionConfig(lam), rng, state=state)


def test_state_head_batch_gradient_is_mean_of_examples(synthetic_bank):
    rng = np.random.default_rng(23)
    bank = synthetic_bank()
    params = _random_params(rng, classes=50)
    raw = rng.normal(size=(3, 4))
    labels, states = [2, 5, 5], [1, 10, 4]
    cfg = FusionConfig(0.5)
    loss, grads = loss_and_gradients(raw, labels, bank, params, cfg, states)
    triples = list(zip(raw, labels, states))
    singles = [loss_gradients(r, h, bank, params, cfg, s) for r, h, s in triples]
    assert loss == pytest.approx(
        np.mean([loss_value(r, h, bank, params, cfg, s) for r, h, s in triples])
    )
    for k, batch_grad in enumerate(grads.arrays()):
        mean = np.mean([g.arrays()[k] for g in singles], axis=0)
        assert np.allclose(batch_grad, mean)


def test_state_head_needs_state_labels(synthetic_bank):
    bank = synthetic_bank()
    params = _random_params(np.random.default_rng(1), classes=50)
    with pytest.raises(LabelError):
        loss_and_gradients(np.ones((1, 4)), [1], bank, params, FusionConfig())
    with pytest.raises(LabelError):
        loss_and_gradients(np.ones((2, 4)), [1, 2], bank, params, FusionConfig(), [3])


def test_state_accuracy(synthetic_bank):
    bank = synthetic_bank(k=3, dim=4)
    params = EncoderParams.identity(4, 4, 3)
    dataset = [(bank.stack[i][:, 2], i + 1, 3) for i in range(3)]
    cfg = FusionConfig(0.0)
    assert state_accuracy(dataset, bank, params, cfg) == 1.0
    wrong = [(raw, h, 4) for raw, h, _ in dataset]
    assert state_accuracy(wrong, bank, params, cfg) == 0.0
    assert accuracy(wrong, bank, params, cfg) == 1.0
    assert state_accuracy([], bank, params, cfg) == 0.0
