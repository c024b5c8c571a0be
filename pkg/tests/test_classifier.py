import math

import numpy as np
import pytest

from regmap.classifier import (
    CnnParams,
    TextCnnModel,
    TrainConfig,
    Vocabulary,
    bce_loss,
    build_vocabulary,
    forward,
    init_params,
    train,
    train_model,
    vectorize,
)
from regmap.classifier.vocab import PAD_ID, UNK_ID
from regmap.corpus import TokenStream
from regmap.errors import (
    EmptyTrainingSetError,
    NonFiniteLossError,
    ShapeMismatchError,
    UnknownLabelError,
)

from .oracles import cnn_reference_forward


def stream(*tokens):
    return TokenStream(tokens=tuple(tokens), origin_len=len(tokens))


def random_params(rng, vocab_size=9, n_labels=2, d=4, widths=(2,), n_filters=3):
    params = init_params(vocab_size, n_labels, d, tuple(widths), n_filters, rng)
    # random biases too, so gradient checks stay away from the relu kink
    for w in params.widths:
        params.conv_biases[w] = rng.uniform(-0.1, 0.1, size=params.conv_biases[w].shape)
    params.out_bias = rng.uniform(-0.1, 0.1, size=params.out_bias.shape)
    return params


# -- vocabulary -------------------------------------------------------------


def test_build_vocabulary_min_freq():
    streams = [stream("a", "a", "b"), stream("a")]
    vocab = build_vocabulary(streams, min_freq=2)
    assert "a" in vocab.token_to_id
    assert "b" not in vocab.token_to_id
    assert vocab.size == 3


def test_build_vocabulary_min_freq_one():
    vocab = build_vocabulary([stream("x", "y")], min_freq=1)
    assert vocab.size == 4


def test_build_vocabulary_empty():
    with pytest.raises(EmptyTrainingSetError):
        build_vocabulary([])


def test_vectorize_unk_and_pad():
    vocab = Vocabulary(token_to_id={"a": 2})
    out = vectorize(stream("a", "zzz"), vocab, max_seq_len=4)
    assert out.tolist() == [2, UNK_ID, PAD_ID, PAD_ID]


def test_vectorize_truncates():
    vocab = Vocabulary(token_to_id={"a": 2})
    out = vectorize(stream(*["a"] * 10), vocab, max_seq_len=3)
    assert out.tolist() == [2, 2, 2]


def test_vectorize_empty():
    vocab = Vocabulary(token_to_id={})
    assert vectorize(stream(), vocab, 3).tolist() == [PAD_ID] * 3


# -- forward ----------------------------------------------------------------


def test_forward_all_zero_params_gives_half():
    params = CnnParams(
        embeddings=np.zeros((5, 4)),
        conv_weights={2: np.zeros((3, 2, 4))},
        conv_biases={2: np.zeros(3)},
        out_weights=np.zeros((2, 3)),
        out_bias=np.zeros(2),
    )
    scores = forward(params, np.array([2, 3, 4, 2, 3]))
    assert np.allclose(scores, 0.5)


def test_forward_matches_loop_reference():
    rng = np.random.default_rng(5)
    params = random_params(rng)
    ids = np.array([2, 5, 3, 8, 4])
    got = forward(params, ids)
    want = cnn_reference_forward(params, ids, PAD_ID)
    assert np.max(np.abs(got - want)) < 1e-10


def test_forward_reference_with_padding_and_multiwidth():
    rng = np.random.default_rng(17)
    params = random_params(rng, widths=(2, 3), n_filters=2, n_labels=3)
    for ids in ([2, 3, 4, PAD_ID, PAD_ID], [5, PAD_ID, PAD_ID, PAD_ID, PAD_ID]):
        arr = np.array(ids)
        got = forward(params, arr)
        want = cnn_reference_forward(params, arr, PAD_ID)
        assert np.max(np.abs(got - want)) < 1e-10


def test_forward_pad_only_pools_relu_bias():
    rng = np.random.default_rng(3)
    params = random_params(rng, widths=(2,), n_filters=3, n_labels=2)
    ids = np.full(6, PAD_ID)
    pooled = np.maximum(params.conv_biases[2], 0.0)
    expected_logits = params.out_weights @ pooled + params.out_bias
    expected = 1.0 / (1.0 + np.exp(-expected_logits))
    assert np.allclose(forward(params, ids), expected)


def test_forward_invariant_to_trailing_padding():
    rng = np.random.default_rng(11)
    params = random_params(rng, widths=(2, 3), n_filters=4, n_labels=3)
    short = np.array([2, 3, 4, PAD_ID])
    long = np.array([2, 3, 4] + [PAD_ID] * 9)
    assert np.allclose(forward(params, short), forward(params, long))


def test_forward_label_permutation_covariance():
    rng = np.random.default_rng(23)
    params = random_params(rng, n_labels=4)
    ids = np.array([2, 3, 4, 5, 6])
    base = forward(params, ids)
    perm = np.array([2, 0, 3, 1])
    permuted = CnnParams(
        embeddings=params.embeddings,
        conv_weights=params.conv_weights,
        conv_biases=params.conv_biases,
        out_weights=params.out_weights[perm],
        out_bias=params.out_bias[perm],
    )
    assert np.allclose(forward(permuted, ids), base[perm])


def test_forward_shape_mismatch():
    rng = np.random.default_rng(1)
    params = random_params(rng)
    params.out_weights = np.zeros((2, 99))
    with pytest.raises(ShapeMismatchError):
        forward(params, np.array([2, 3, 4]))


def test_forward_scores_in_open_interval():
    rng = np.random.default_rng(7)
    params = random_params(rng, n_labels=6)
    scores = forward(params, np.array([2, 3, 4, 5, 6, 7, 8]))
    assert np.all(scores > 0.0) and np.all(scores < 1.0)


# -- loss ---------------------------------------------------------------------


def test_loss_all_half_is_ln2():
    scores = np.full(4, 0.5)
    truth = np.array([1.0, 0.0, 1.0, 0.0])
    assert bce_loss(scores, truth) == pytest.approx(math.log(2.0), abs=1e-9)


def test_loss_perfect_scores_near_zero():
    scores = np.array([1.0, 0.0])
    truth = np.array([1.0, 0.0])
    assert bce_loss(scores, truth) == pytest.approx(0.0, abs=1e-9)


def test_loss_hand_value():
    scores = np.array([0.9, 0.2])
    truth = np.array([1.0, 0.0])
    expected = (-math.log(0.9) - math.log(0.8)) / 2.0
    assert bce_loss(scores, truth) == pytest.approx(expected, abs=1e-9)
    assert expected == pytest.approx(0.164252, abs=1e-6)


# -- training -----------------------------------------------------------------


def _toy_data(rng, vocab_size, n_labels, n, seq_len=6):
    data = []
    for i in range(n):
        label = i % n_labels
        # token identity correlates perfectly with the label
        tok = 2 + label
        ids = np.full(seq_len, PAD_ID)
        ids[: seq_len // 2] = tok
        data.append((ids, {label}))
    return data


def test_train_descends_on_separable_data():
    rng = np.random.default_rng(0)
    config = TrainConfig(
        d=8, widths=(2,), n_filters=4, epochs=30, batch_size=5,
        learning_rate=1e-2, seed=0, max_seq_len=6, min_freq=1,
    )
    data = _toy_data(rng, vocab_size=6, n_labels=2, n=20)
    _, history = train(data, config, n_labels=2, vocab_size=6)
    assert history[-1] < history[0]


def test_train_deterministic_history():
    config = TrainConfig(
        d=8, widths=(2,), n_filters=4, epochs=5, batch_size=4,
        learning_rate=1e-3, seed=42, max_seq_len=6, min_freq=1,
    )
    data = _toy_data(None, 6, 2, 12)
    _, h1 = train(data, config, n_labels=2, vocab_size=6)
    _, h2 = train(data, config, n_labels=2, vocab_size=6)
    assert h1 == h2


def test_train_identical_parameter_bytes():
    config = TrainConfig(
        d=8, widths=(2,), n_filters=4, epochs=3, batch_size=4,
        learning_rate=1e-3, seed=7, max_seq_len=6, min_freq=1,
    )
    data = _toy_data(None, 6, 2, 12)
    p1, _ = train(data, config, n_labels=2, vocab_size=6)
    p2, _ = train(data, config, n_labels=2, vocab_size=6)
    for (n1, a1), (n2, a2) in zip(p1.tensor_items(), p2.tensor_items()):
        assert n1 == n2
        assert a1.tobytes() == a2.tobytes()


def test_train_empty():
    with pytest.raises(EmptyTrainingSetError):
        train([], TrainConfig(max_seq_len=6), n_labels=2, vocab_size=6)


def test_train_diverges_to_error_not_nan():
    # adaptive-moment updates are bounded by ~lr per step, so the rate has
    # to be astronomically large before float64 genuinely overflows
    config = TrainConfig(
        d=8, widths=(2,), n_filters=4, epochs=60, batch_size=4,
        learning_rate=1e160, seed=1, max_seq_len=6, min_freq=1,
    )
    data = _toy_data(None, 6, 2, 12)
    with np.errstate(all="ignore"), pytest.raises(NonFiniteLossError):
        train(data, config, n_labels=2, vocab_size=6)


def test_train_model_rejects_unknown_labels():
    config = TrainConfig(d=8, widths=(2,), n_filters=2, epochs=1, max_seq_len=8, min_freq=1)
    with pytest.raises(UnknownLabelError):
        train_model(["some text"], [{"ZZ-1"}], ["AC-1"], config)


# -- end-to-end predict and snapshot ------------------------------------------


@pytest.fixture(scope="module")
def tiny_model():
    texts = []
    labels = []
    for i in range(30):
        if i % 2 == 0:
            texts.append("disk volumes must be encrypted at rest always")
            labels.append({"SC-28"})
        else:
            texts.append("administrator accounts follow least privilege rules")
            labels.append({"AC-6"})
    config = TrainConfig(
        d=12, widths=(2, 3), n_filters=4, epochs=25, batch_size=8,
        learning_rate=5e-3, seed=3, max_seq_len=16, min_freq=1,
    )
    return train_model(texts, labels, ["AC-6", "SC-28"], config).model


def test_predict_learns_separable_mapping(tiny_model):
    scores = tiny_model.predict("are the disk volumes encrypted")
    assert scores.get("SC-28", 0.0) > scores.get("AC-6", 0.0)
    assert scores["SC-28"] > 0.5


def test_predict_empty_text_is_defined(tiny_model):
    scores = tiny_model.scores_for("")
    assert scores.shape == (2,)
    assert np.all((scores > 0.0) & (scores < 1.0))


def test_predict_floor_omits_labels(tiny_model):
    everything = tiny_model.predict("x", floor=0.0)
    assert set(everything) == {"AC-6", "SC-28"}


def test_snapshot_round_trip(tmp_path, tiny_model):
    path = tmp_path / "model.bin"
    tiny_model.save(path)
    loaded = TextCnnModel.load(path)
    text = "check whether data disks are encrypted"
    assert np.array_equal(loaded.scores_for(text), tiny_model.scores_for(text))
    assert loaded.labels == tiny_model.labels
    assert loaded.vocab.token_to_id == tiny_model.vocab.token_to_id
    assert loaded.config == tiny_model.config


def test_snapshot_bytes_deterministic(tmp_path, tiny_model):
    a = tmp_path / "a.bin"
    b = tmp_path / "b.bin"
    tiny_model.save(a)
    tiny_model.save(b)
    assert a.read_bytes() == b.read_bytes()
