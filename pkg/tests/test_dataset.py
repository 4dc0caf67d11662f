import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from trackdiag.dataset import (
    LabeledDataset,
    SplitSpec,
    Window,
    build_training_corpus,
    dumps_dataset,
    load_dataset,
    loads_dataset,
    sample_seed,
    save_dataset,
    split_dataset,
    split_indices,
    window_trace,
)
from trackdiag.errors import InvalidArgumentError, ParseError
from trackdiag.generator import AnomalyClass, SeverityProfile, generate_window
from trackdiag.signal import TrackCircuitConfig, VoltageTrace


def tiny(width=4, labels=(0, 1, 2, 0, 1, 2)):
    X = np.arange(len(labels) * width, dtype=float).reshape(len(labels), width) / 7.0
    return LabeledDataset(X, labels)


def test_corpus_size_order_and_meta():
    ds = build_training_corpus(per_class=5, seed=3)
    assert len(ds) == 15 and ds.width == 600
    assert ds.labels.tolist() == [0] * 5 + [1] * 5 + [2] * 5
    assert ds.meta["seed"] == 3 and ds.meta["per_class"] == 5
    assert ds.meta["severity"]["min_square_amplitude_v"] == 1.0


def test_corpus_one_per_class():
    assert len(build_training_corpus(per_class=1, seed=0)) == 3


def test_corpus_rows_match_per_sample_seeds():
    ds = build_training_corpus(per_class=3, seed=9)
    tr, _ = generate_window(AnomalyClass.ContactInterrupted, seed=sample_seed(9, AnomalyClass.ContactInterrupted, 2))
    assert np.array_equal(ds.X[8], tr.samples)


def test_corpus_prefix_stable_across_sizes():
    small = build_training_corpus(per_class=2, seed=4)
    big = build_training_corpus(per_class=5, seed=4)
    assert np.array_equal(small.X[:2], big.X[:2])
    assert np.array_equal(small.X[2:4], big.X[5:7])


def test_severity_changes_corpus():
    a = build_training_corpus(per_class=3, seed=1)
    b = build_training_corpus(TrackCircuitConfig(), SeverityProfile(min_square_amplitude_v=3.0), per_class=3, seed=1)
    assert a != b


def test_window_trace_drops_partial_tail():
    tr = VoltageTrace(np.full(1500, 20.0), start_time=50, circuit_id="c1")
    ws = window_trace(tr)
    assert len(ws) == 2
    assert [w.origin for w in ws] == [("c1", 50), ("c1", 650)]
    assert window_trace(tr, stride=300)[1].start_time == 350
    assert len(window_trace(VoltageTrace(np.full(1800, 20.0)), stride=300)) == 5
    assert len(window_trace(VoltageTrace(np.full(1799, 20.0)))) == 2
    assert window_trace(VoltageTrace(np.full(100, 20.0))) == []
    with pytest.raises(InvalidArgumentError):
        window_trace(tr, stride=0)


def test_split_exact_counts_and_disjoint():
    ds = build_training_corpus(per_class=10, seed=0)
    tr, te = split_indices(ds, SplitSpec(0.7, seed=2))
    assert len(tr) == 21 and len(te) == 9
    assert np.intersect1d(tr, te).size == 0
    assert np.union1d(tr, te).tolist() == list(range(30))
    for code in range(3):
        assert np.sum(ds.labels[tr] == code) == 7


def test_split_rounds_half_up():
    # 0.7 * 5 = 3.5 -> 4 train per class
    ds = tiny(labels=[0] * 5 + [1] * 5 + [2] * 5)
    tr, te = split_indices(ds, SplitSpec(0.7))
    assert len(tr) == 12 and len(te) == 3


def test_split_single_window_class_rejected():
    with pytest.raises(InvalidArgumentError):
        split_indices(tiny(labels=[0, 0, 1, 1, 2]))


def test_split_seed_dependence():
    ds = build_training_corpus(per_class=10, seed=0)
    a = split_indices(ds, SplitSpec(seed=1))[0]
    assert np.array_equal(a, split_indices(ds, SplitSpec(seed=1))[0])
    assert not np.array_equal(a, split_indices(ds, SplitSpec(seed=2))[0])
    train, test = split_dataset(ds, SplitSpec(seed=1))
    assert len(train) + len(test) == len(ds)


def test_round_trip_exact(tmp_path):
    ds = build_training_corpus(per_class=2, seed=5)
    path = tmp_path / "ds.csv"
    save_dataset(ds, path)
    back = load_dataset(path)
    assert back == ds and back.meta == ds.meta
    assert dumps_dataset(back) == dumps_dataset(ds)


def test_header_layout():
    text = dumps_dataset(tiny(width=3))
    assert text.splitlines()[0] == "label,v0,v1,v2"


@pytest.mark.parametrize(
    "text, message",
    [
        ("", "missing header"),
        ("label,v0,v1\n1,2.0\n", "row has 1 values"),
        ("label,v0\n7,2.0\n", "outside"),
        ("label,v0\nx,2.0\n", "not an integer"),
        ("lbl,v0\n0,2.0\n", "expected header"),
        ("label,v0\n0,abc\n", "bad voltage"),
    ],
)
def test_malformed_files_raise_parse_error(text, message):
    with pytest.raises(ParseError, match=message):
        loads_dataset(text, width=None)


def test_wrong_width_reports_line():
    text = "label," + ",".join(f"v{k}" for k in range(600)) + "\n0," + ",".join(["20.0"] * 599) + "\n"
    with pytest.raises(ParseError) as info:
        loads_dataset(text, path="d.csv")
    assert info.value.line == 2 and "d.csv" in str(info.value)


def test_window_requires_labels_for_dataset():
    with pytest.raises(InvalidArgumentError):
        LabeledDataset.from_windows([Window(np.ones(3))])
    ds = LabeledDataset.from_windows([Window(np.ones(3), 0), Window(np.zeros(3), 2)])
    assert ds.class_counts == {AnomalyClass(0): 1, AnomalyClass(1): 0, AnomalyClass(2): 1}
    with pytest.raises(InvalidArgumentError):
        ds.require_all_classes()


@settings(max_examples=40, deadline=None)
@given(
    counts=st.lists(st.integers(2, 40), min_size=3, max_size=3),
    frac=st.floats(0.05, 0.95),
    seed=st.integers(0, 1000),
)
def test_split_partitions_every_class(counts, frac, seed):
    labels = np.repeat([0, 1, 2], counts)
    ds = LabeledDataset(np.zeros((labels.size, 2)), labels)
    tr, te = split_indices(ds, SplitSpec(frac, seed))
    assert np.array_equal(np.sort(np.concatenate([tr, te])), np.arange(labels.size))
    for code in range(3):
        assert np.sum(labels[tr] == code) >= 1 and np.sum(labels[te] == code) >= 1


@settings(max_examples=30, deadline=None)
@given(rows=st.lists(st.lists(st.floats(0, 40), min_size=3, max_size=3), min_size=1, max_size=8),
       data=st.data())
def test_serialization_round_trip(rows, data):
    labels = data.draw(st.lists(st.integers(0, 2), min_size=len(rows), max_size=len(rows)))
    ds = LabeledDataset(np.array(rows), labels, meta={"k": 1})
    back = loads_dataset(dumps_dataset(ds), width=3)
    assert back == ds and back.meta == {"k": 1}
