# tests/data_pipeline/test_sampler.py
import pytest

from src.data_pipeline.sampler import SamplingPlan, group_by_source, next_pair_batch
from src.data_pipeline.schemas import PairRecord
from src.exceptions import DataError


def _pairs(source, n):
    return [PairRecord(query=f"{source}-q{i}", target=f"{source}-t{i}", source=source) for i in range(n)]


def test_single_source_always_chosen():
    plan = SamplingPlan({"only": list(range(7))}, seed=3)
    assert {plan.next_batch(3)[0] for _ in range(20)} == {"only"}


def test_batches_are_source_homogeneous():
    plan = SamplingPlan(group_by_source(_pairs("alpha", 20) + _pairs("beta", 20)), seed=1)
    for _ in range(30):
        batch = next_pair_batch(plan, 4)
        assert all(q.startswith(batch.source) for q in batch.queries)


def test_source_frequency_follows_weights():
    plan = SamplingPlan({"a": list(range(50)), "b": list(range(50))}, weights={"a": 0.9, "b": 0.1}, seed=0)
    draws = [plan.next_batch(2)[0] for _ in range(10_000)]
    assert draws.count("a") / len(draws) == pytest.approx(0.9, abs=0.02)


def test_default_weights_are_source_sizes():
    plan = SamplingPlan({"big": list(range(30)), "small": list(range(10))})
    assert plan.probabilities == pytest.approx({"big": 0.75, "small": 0.25})


def test_every_record_once_per_epoch():
    plan = SamplingPlan({"s": list(range(10))}, seed=5)
    seen = plan.next_batch(5)[1] + plan.next_batch(5)[1]
    assert sorted(seen) == list(range(10))
    # the next epoch reshuffles but still covers everything
    seen = plan.next_batch(4)[1] + plan.next_batch(6)[1]
    assert sorted(seen) == list(range(10))


def test_empty_sources_are_dropped():
    plan = SamplingPlan({"empty": [], "full": [1, 2, 3]})
    assert plan.probabilities == {"full": 1.0}
    with pytest.raises(DataError, match="no non-empty source"):
        SamplingPlan({"empty": []})


def test_state_dict_resumes_the_same_stream():
    records = {"a": list(range(13)), "b": list(range(100, 107))}
    reference = SamplingPlan(records, seed=9)
    for _ in range(5):
        reference.next_batch(3)
    saved = reference.state_dict()
    expected = [reference.next_batch(3) for _ in range(10)]

    resumed = SamplingPlan(records, seed=9)
    resumed.load_state_dict(saved)
    assert [resumed.next_batch(3) for _ in range(10)] == expected


def test_state_for_other_sources_is_rejected():
    plan = SamplingPlan({"a": [1, 2]})
    other = SamplingPlan({"b": [1, 2]})
    with pytest.raises(DataError):
        plan.load_state_dict(other.state_dict())


def test_batches_never_repeat_a_record_across_epochs():
    plan = SamplingPlan({"s": list(range(10))}, seed=2)
    for _ in range(50):
        _, rows = plan.next_batch(4)
        assert len(set(rows)) == 4


def test_batch_is_capped_at_a_small_source():
    plan = SamplingPlan(group_by_source(_pairs("tiny", 3)), seed=0)
    for _ in range(5):
        batch = next_pair_batch(plan, 8)
        assert sorted(batch.queries) == ["tiny-q0", "tiny-q1", "tiny-q2"]
