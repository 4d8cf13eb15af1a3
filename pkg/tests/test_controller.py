import pytest

from flowagg.models.schemas import FlowKey, FlowModOp, MatchScheme, PacketFlag, PacketIn
from flowagg.sim.controller import AggregationPolicy, ReactiveForwarding
from flowagg.sim.dataplane import apply_flow_mod
from flowagg.utils.errors import SwitchUnreachable

from tests.helpers import HOST_A, HOST_B, SERVER, Fabric, make_packet


def packet_in(pkt, switch_id=1, t=0.0):
    return PacketIn(switch_id=switch_id, packet=pkt, time=t)


def test_packet_in_under_mmos_installs_destination_key():
    policy = AggregationPolicy(MatchScheme.FMS)
    policy.set(1, SERVER, MatchScheme.MMOS)
    controller = ReactiveForwarding(policy, idle_timeout=10.0)

    mod = controller.handle_packet_in(packet_in(make_packet()))

    assert mod.op == FlowModOp.ADD
    assert mod.key == FlowKey.mmos(SERVER)
    assert mod.idle_timeout == 10.0


def test_packet_in_under_fms_installs_full_key():
    controller = ReactiveForwarding(AggregationPolicy(MatchScheme.FMS))
    pkt = make_packet(src_port=4000)
    assert controller.handle_packet_in(packet_in(pkt)).key == FlowKey.fms(pkt)


def test_distinct_source_ports_make_distinct_fms_keys():
    controller = ReactiveForwarding(AggregationPolicy(MatchScheme.FMS))
    keys = {controller.handle_packet_in(packet_in(make_packet(src_port=p))).key for p in (1, 2)}
    assert len(keys) == 2
    assert controller.packet_in_total == 2


def test_response_scheme_applies_to_ack_packets_only():
    policy = AggregationPolicy(MatchScheme.FMS, response_scheme=MatchScheme.MMOS)
    assert policy.scheme_for_packet(1, HOST_A, PacketFlag.ACK) == MatchScheme.MMOS
    assert policy.scheme_for_packet(1, HOST_A, PacketFlag.SYN) == MatchScheme.FMS
    policy.set(1, HOST_A, MatchScheme.FMS)
    policy.set(1, HOST_B, MatchScheme.MMOS)
    assert policy.overrides() == {(1, HOST_B): MatchScheme.MMOS}


def test_demotion_collapses_fms_entries(fabric):
    fabric.fill(1, SERVER, 40)
    fabric.fill(1, HOST_B, 5)
    before = fabric.switches[1].f

    mods = fabric.controller.set_scheme(1, SERVER, MatchScheme.MMOS)

    assert [m.op for m in mods] == [FlowModOp.REMOVE, FlowModOp.ADD]
    assert len(mods[0].keys) == 40
    assert fabric.switches[1].f == before - 39
    assert fabric.controller.policy.mmos_hosts(1) == [SERVER]


def test_set_same_scheme_twice_is_a_no_op(fabric):
    fabric.fill(1, SERVER, 3)
    assert fabric.controller.set_scheme(1, SERVER, MatchScheme.MMOS)
    assert fabric.controller.set_scheme(1, SERVER, MatchScheme.MMOS) == []
    assert fabric.controller.set_scheme(1, HOST_A, MatchScheme.FMS) == []


def test_promotion_removes_mmos_entry_lazily(fabric):
    fabric.fill(1, SERVER, 10)
    fabric.controller.set_scheme(1, SERVER, MatchScheme.MMOS)

    mods = fabric.controller.set_scheme(1, SERVER, MatchScheme.FMS)

    assert [(m.op, m.keys) for m in mods] == [(FlowModOp.REMOVE, [FlowKey.mmos(SERVER)])]
    assert fabric.switches[1].f == 0
    assert fabric.controller.policy.mmos_hosts(1) == []


def test_promoted_host_repopulates_fms_entries(fabric):
    # 5 new flows per second over one idle_timeout: one entry per packet
    fabric.controller.set_scheme(1, SERVER, MatchScheme.MMOS)
    fabric.controller.set_scheme(1, SERVER, MatchScheme.FMS)
    sw = fabric.switches[1]
    for i in range(50):
        fabric.now = i * 0.2
        pkt = make_packet(src_port=5000 + i, t=fabric.now)
        apply_flow_mod(sw, fabric.controller.handle_packet_in(packet_in(pkt, t=fabric.now)), fabric.now)
    assert sw.table.dest_flow_counts().pairs == [(SERVER, 50)]
    assert sw.f <= fabric.controller.idle_timeout * 5.0


def test_suspended_controller_rejects_scheme_changes(fabric):
    fabric.controller.suspend(12.0)
    with pytest.raises(SwitchUnreachable):
        fabric.controller.set_scheme(1, SERVER, MatchScheme.MMOS)
    assert fabric.controller.suspended_at == 12.0


def test_controller_metrics_windows():
    controller = ReactiveForwarding(AggregationPolicy(), stats_window=3.0)
    assert controller.controller_metrics(0).packet_in_rate == 0.0

    for i, t in enumerate((0.5, 1.0, 2.9, 3.0)):
        controller.handle_packet_in(packet_in(make_packet(src_port=i), t=t))

    first = controller.controller_metrics(0)
    assert (first.packet_in_count, first.flow_mod_count) == (3, 3)
    assert first.packet_in_rate == pytest.approx(1.0)
    assert [w.window_index for w in controller.windows()] == [0, 1]
    assert controller.controller_metrics().window_index == 1
