import numpy as np
import pytest

from recode import NonFiniteEmbedding, RecodeConfig, RecodeMemory, RewardNormalizer, normalize_reward
from recode.experiments import actor_stream, invariant_report, telescoped_total
from recode.service import ActorFailure, MemoryService, SchedulingMode, round_robin_order, spawn_actors

CFG = RecodeConfig(capacity=32, k=5, seed=11)


def service():
    return MemoryService(RecodeMemory(4, CFG))


def streams(n, m, seed=0):
    return [actor_stream(seed, i, m, 4, 8) for i in range(n)]


def feed(ss):
    def body(port, i):
        for e in ss[i]:
            port.submit(e)
    return body


def test_single_actor_equals_direct_calls():
    es = streams(1, 300)[0]
    svc = service()
    out = [svc.submit(e) for e in es]
    mem, norm = RecodeMemory(4, CFG), RewardNormalizer()
    direct = [normalize_reward(norm, mem.process(e)) for e in es]
    assert out == direct and svc.memory.snapshot() == mem.snapshot()


def test_rejection_leaves_state_and_counter():
    svc = service()
    svc.submit(np.zeros(4))
    snap = svc.memory.snapshot()
    with pytest.raises(NonFiniteEmbedding):
        svc.submit(np.array([0, np.nan, 0, 0]))
    assert svc.submissions == 1 and svc.memory.snapshot() == snap and svc.normalizer.count == 1


def test_round_robin_order():
    assert round_robin_order([[1, 2, 3], [4], [5, 6]]) == [1, 4, 5, 2, 6, 3]
    assert round_robin_order([[], [1]]) == [1]


@pytest.mark.parametrize("n", [1, 2, 4])
def test_round_robin_matches_sequential_replay(n):
    ss = streams(n, 400)
    svc = service()
    stats = spawn_actors(svc, n, feed(ss), SchedulingMode.ROUND_ROBIN)
    seq = service()
    for e in round_robin_order([list(s) for s in ss]):
        seq.submit(e)
    assert svc.memory.snapshot() == seq.memory.snapshot()
    assert svc.normalizer == seq.normalizer
    assert stats.per_actor == [400] * n and svc.submissions == 400 * n


def test_uneven_actors_round_robin():
    ss = [streams(1, 50, seed=1)[0], streams(1, 10, seed=2)[0], streams(1, 30, seed=3)[0]]
    svc = service()
    spawn_actors(svc, 3, feed(ss), "deterministic_round_robin")
    seq = service()
    for e in round_robin_order([list(s) for s in ss]):
        seq.submit(e)
    assert svc.memory.snapshot() == seq.memory.snapshot()


def test_repeat_runs_identical():
    snaps = []
    for _ in range(2):
        svc = service()
        spawn_actors(svc, 4, feed(streams(4, 300)), SchedulingMode.ROUND_ROBIN)
        snaps.append(svc.memory.snapshot())
    assert snaps[0] == snaps[1]


def test_single_actor_modes_agree():
    ss = streams(1, 200)
    a, b = service(), service()
    spawn_actors(a, 1, feed(ss), SchedulingMode.ROUND_ROBIN)
    spawn_actors(b, 1, feed(ss), SchedulingMode.FREE_RUNNING)
    assert a.memory.snapshot() == b.memory.snapshot()


def test_free_running_invariants():
    ss = streams(8, 300, seed=5)
    svc = service()
    svc.record()
    stats = spawn_actors(svc, 8, feed(ss), SchedulingMode.FREE_RUNNING)
    assert svc.submissions == sum(stats.per_actor) == 2400
    rep = invariant_report(svc)
    assert rep["conserved"] and rep["bounded"] and rep["replayed"] and rep["monotone"]
    assert svc.memory.total_count() == pytest.approx(telescoped_total(CFG.gamma, 2400), rel=1e-9)


@pytest.mark.parametrize("mode", list(SchedulingMode))
def test_actor_failure_aborts_and_releases(mode):
    svc = service()

    def body(port, i):
        for t, e in enumerate(streams(1, 200, seed=i)[0]):
            port.submit(e)
            if i == 2 and t == 20:
                raise RuntimeError("actor exploded")

    with pytest.raises(ActorFailure, match="actor 2 failed"):
        spawn_actors(svc, 4, body, mode)
    # the service is still usable afterwards
    svc.submit(np.zeros(4))


def test_spawn_requires_actor():
    with pytest.raises(ValueError):
        spawn_actors(service(), 0, lambda p, i: None)
