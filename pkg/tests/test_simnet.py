import pytest

from treebft.errors import CausalityViolation, Drained, FaultBudgetExceeded
from treebft.simnet import (BOTTOM, EventQueue, FaultEntry, FaultKind, FaultSchedule, Kind,
                            NetParams, Network, Simulator)

PARAMS = NetParams(rtt_us=200_000, bandwidth_bps=25e6, delta_us=300_000)


def net(n=4, params=PARAMS, **kw):
    sim = Simulator()
    return sim, Network(sim, n, params, **kw)


def test_single_send_arrives_after_tx_plus_half_rtt():
    sim, nw = net()
    got = []
    nw.handlers[1] = lambda m: got.append(sim.now)
    assert nw.send(0, 1, 100_000) == 104_000
    sim.run()
    assert got == [104_000]


def test_back_to_back_sends_queue_on_egress():
    sim, nw = net()
    got = []
    nw.handlers[1] = lambda m: got.append((sim.now, m.payload))
    nw.send(0, 1, 100_000, "a")
    nw.send(0, 1, 100_000, "b")
    sim.run()
    assert got == [(104_000, "a"), (108_000, "b")]


def test_cpu_shares_the_egress_clock():
    sim, nw = net()
    assert nw.cpu(0, 1000) == 1000
    assert nw.send(0, 1, 100_000) == 105_000


def test_impatient_receive_value():
    sim, nw = net()
    out = []
    nw.impatient_receive(0, 1, 300_000, lambda v: out.append((sim.now, v)))
    nw.send(0, 1, 100_000, "x")
    sim.run()
    assert out == [(104_000, "x")]


def test_impatient_receive_bottom_when_sender_omits():
    faults = FaultSchedule([FaultEntry(0, FaultKind.OMIT_ALL, 0)])
    sim, nw = net(faults=faults)
    out = []
    nw.impatient_receive(0, 1, 300_000, lambda v: out.append((sim.now, v)))
    assert nw.send(0, 1, 100_000, "x") is None
    sim.run()
    assert out == [(300_000, BOTTOM)]


def test_impatient_receive_returns_buffered_value():
    sim, nw = net()
    nw.send(0, 1, 1000, "early")
    sim.run()
    out = []
    nw.impatient_receive(0, 1, 300_000, lambda v: out.append(v))
    sim.run()
    assert out == ["early"]


def test_gather_resolves_once():
    sim, nw = net()
    out = []
    g = nw.gather(3, [0, 1], 300_000, lambda got: out.append((sim.now, got)))
    g.offer(0, "a")
    g.offer(0, "again")
    sim.run()
    assert out == [(300_000, {0: "a", 1: BOTTOM})]


def test_after_gst_correct_endpoints_never_bottom():
    params = NetParams(rtt_us=200_000, bandwidth_bps=25e6, delta_us=300_000, gst_us=1_000_000)
    sim, nw = net(params=params, seed=3)
    out = []

    def probe():
        nw.impatient_receive(0, 1, 300_000, out.append)
        nw.send(0, 1, 100_000, "v")

    for k in range(20):
        sim.schedule(1_000_000 + k * 400_000, probe)
    sim.run()
    assert out == ["v"] * 20


def test_pre_gst_delay_is_bounded_and_seeded():
    params = NetParams(rtt_us=200_000, bandwidth_bps=25e6, delta_us=300_000, gst_us=10**9)

    def times(seed):
        sim, nw = net(params=params, seed=seed)
        return [nw.send(0, 1, 0) for _ in range(50)]

    a = times(1)
    assert a == times(1)
    assert a != times(2)
    assert all(100_000 <= t <= 100_000 + 5 * 200_000 for t in a)


def test_equal_times_pop_in_insertion_order():
    q = EventQueue()
    q.push(5, "first")
    q.push(5, "second")
    q.push(1, "earliest")
    assert [q.pop()[2] for _ in range(3)] == ["earliest", "first", "second"]
    with pytest.raises(Drained):
        q.pop()


def test_step_on_empty_queue():
    with pytest.raises(Drained):
        Simulator().step()


def test_causality_guard():
    sim = Simulator()
    sim.schedule(10, lambda: None)
    sim.run()
    with pytest.raises(CausalityViolation):
        sim.schedule(5, lambda: None)


def test_fault_budget():
    too_many = FaultSchedule([FaultEntry(p, FaultKind.CRASH_SILENT) for p in range(2)])
    with pytest.raises(FaultBudgetExceeded):
        net(n=4, faults=too_many)
    sim, nw = net(n=4, faults=FaultSchedule([FaultEntry(0, FaultKind.CRASH_SILENT)]))
    with pytest.raises(FaultBudgetExceeded):
        nw.inject_fault(FaultEntry(1, FaultKind.CRASH_SILENT))


def test_crash_takes_effect_at_activation():
    faults = FaultSchedule([FaultEntry(0, FaultKind.CRASH_SILENT, 60_000_000)])
    sim, nw = net(faults=faults)
    assert nw.send(0, 1, 1000) is not None
    sim.run(until_us=60_000_000)
    assert nw.send(0, 1, 1000) is None


def test_crashed_receiver_drops():
    faults = FaultSchedule([FaultEntry(1, FaultKind.CRASH_SILENT, 0)])
    sim, nw = net(faults=faults)
    got = []
    nw.handlers[1] = got.append
    nw.send(0, 1, 1000)
    sim.run()
    assert got == [] and nw.dropped == 1


def test_omit_aggregates_only_drops_votes():
    faults = FaultSchedule([FaultEntry(1, FaultKind.OMIT_AGGREGATES, 0)])
    sim, nw = net(faults=faults)
    assert nw.send(1, 2, 1000, kind=Kind.PROPOSAL) is not None
    assert nw.send(1, 0, 1000, kind=Kind.VOTE) is None


def test_bandwidth_conservation():
    sim, nw = net(trace=True)
    for k in range(30):
        sim.schedule(k * 3000, nw.send, 0, 1 + k % 3, 100_000)
    sim.run()
    for window in (1000, 4000, 50_000, 200_000):
        assert nw.check_bandwidth(0, window)


def test_params_validation():
    with pytest.raises(ValueError):
        NetParams(rtt_us=0, bandwidth_bps=1)
    with pytest.raises(ValueError):
        NetParams(rtt_us=10, bandwidth_bps=1, delta_us=5)


def test_trace_format_and_determinism():
    def trace():
        sim, nw = net(trace=True)
        nw.send(0, 1, 100_000, kind=Kind.PROPOSAL)
        nw.send(1, 0, 768, kind=Kind.VOTE)
        nw.impatient_receive(2, 3, 300_000, lambda v: None)
        sim.run()
        return nw.trace_text()

    text = trace()
    assert text == trace()
    assert text.splitlines() == ["100031 Vote 1 0 768", "104000 Proposal 0 1 100000",
                                 "300000 Bottom 2 3 0"]
