"""Device configuration, raw flash operations, views, and latency ledger."""

import pytest

import dslcsim._kernels as K
from dslcsim.flash import (
    DeviceConfig,
    FlashDevice,
    LatencyLedger,
    bare_policy,
    build_geom,
    build_timing,
    table_arrays,
)
from dslcsim.retention import baseline_table, preset_table

SMALL = dict(chips=2, blocks_per_chip=4, pages_per_block=4, endurance=3)


def test_default_config_values():
    c = DeviceConfig()
    assert (c.chips, c.blocks_per_chip, c.pages_per_block) == (8, 8192, 128)
    assert (c.page_size_bytes, c.endurance) == (8192, 50_000)
    assert (c.read_us, c.write_us, c.erase_us) == (35.0, 350.0, 1500.0)
    assert c.transfer_mb_per_s == 200.0
    assert c.gc_clean_threshold == 0.05
    assert c.scrub_period_s == 60.0
    assert c.overprovision == 0.0
    assert c.dummy_write_mult == 1.0
    assert c.total_blocks == 8 * 8192
    assert c.total_pages == 8 * 8192 * 128
    assert c.logical_pages == c.total_pages
    assert c.us_per_byte == pytest.approx(0.005)
    assert c.transfer_us(8192) == pytest.approx(40.96)
    assert c.scrub_period_us == 60_000_000


def test_config_overprovision():
    c = DeviceConfig(**SMALL, overprovision=0.25)
    assert c.total_pages == 32
    assert c.logical_pages == 24


@pytest.mark.parametrize("bad", [
    dict(chips=0),
    dict(blocks_per_chip=-1),
    dict(pages_per_block=0),
    dict(page_size_bytes=0),
    dict(endurance=0),
    dict(read_us=0.0),
    dict(write_us=-1.0),
    dict(erase_us=0.0),
    dict(transfer_mb_per_s=0.0),
    dict(gc_clean_threshold=0.0),
    dict(gc_clean_threshold=1.0),
    dict(scrub_period_s=0.0),
    dict(scrub_period_s=3601.0),
    dict(overprovision=1.0),
    dict(overprovision=-0.1),
    dict(dummy_write_mult=-1.0),
])
def test_config_validation(bad):
    with pytest.raises(ValueError):
        DeviceConfig(**bad)


def test_geom_and_timing_packing():
    c = DeviceConfig(**SMALL, overprovision=0.5)
    g = build_geom(c)
    assert (g.chips, g.blocks_per_chip, g.pages_per_block) == (2, 4, 4)
    assert g.logical_pages == 16
    assert g.total_blocks == 8
    t = build_timing(c)
    assert t.scrub_period_us == 60_000_000
    assert t.gc_threshold == 0.05
    assert t.us_per_byte == pytest.approx(0.005)


def test_table_arrays_normal3():
    mode_states, assign, cap_us = table_arrays(preset_table("normal3"))
    assert list(mode_states) == [8, 4, 2]
    assert assign.tolist() == [[8, 8, 8, 8, 8], [8, 8, 8, 4, 4],
                               [4, 4, 4, 2, 2], [2, 2, 2, 2, 2]]
    # 8-state holds up to 10 h while the block is young, 1 h when old.
    assert cap_us[0].tolist() == [36_000_000_000] * 3 + [3_600_000_000] * 2
    # 4-state: 72 h young, 10 h old.
    assert cap_us[1].tolist() == [259_200_000_000] * 3 + [36_000_000_000] * 2
    # 2-state never expires.
    assert all(v == K.UNBOUNDED for v in cap_us[2])


def test_table_arrays_baseline():
    mode_states, assign, cap_us = table_arrays(baseline_table())
    assert list(mode_states) == [2]
    assert (assign == 2).all()
    assert (cap_us == K.UNBOUNDED).all()


def test_fresh_device_state():
    fd = FlashDevice(DeviceConfig(**SMALL))
    assert fd.n_modes == 3
    blocks = list(fd.iter_blocks())
    assert len(blocks) == 8
    for b in blocks:
        assert b.is_clean and b.states is None and not b.retired
        assert b.write_ptr == 0 and b.valid_count == 0 and b.pe_count == 0
        assert not b.is_active and not b.is_full
        assert b.deadline_us is None
        assert b.page_lpn(0) == "free"
    assert fd.clean_count(0) == 4 and fd.clean_count(1) == 4
    assert fd.block(5).chip == 1


def test_program_invalidate_erase_cycle():
    c = DeviceConfig(**SMALL)
    fd = FlashDevice(c)
    gid = int(K.activate_no_gc_k(fd.dev, fd.geom, 0, 0))
    blk = fd.block(gid)
    assert blk.states == 8 and blk.round_no == 1 and blk.is_active
    assert fd.clean_count(0) == 3

    lat = fd.program_page(gid, 0, 7, now=1_000)
    assert lat == pytest.approx(350.0)
    # Deadline anchored at the round's first program: 10 h for young 8-state.
    assert blk.deadline_us == 1_000 + 36_000_000_000
    assert blk.page_lpn(0) == 7 and blk.valid_count == 1

    fd.invalidate(gid, 0)
    assert blk.page_lpn(0) == "invalid" and blk.valid_count == 0

    for i in range(1, 4):
        fd.program_page(gid, i, 10 + i, now=2_000)
    assert blk.is_full and blk.write_ptr == 4
    # Deadline did not move: page 0 anchored this round.
    assert blk.deadline_us == 1_000 + 36_000_000_000

    for i in range(1, 4):
        fd.invalidate(gid, i)
    lat = fd.dummy_write(gid)
    assert lat == pytest.approx(4 * 350.0 * 1.0)
    assert blk.round_no == 2 and blk.write_ptr == 0 and blk.valid_count == 0
    assert blk.deadline_us is None
    assert blk.page_lpn(0) == "free"

    K.detach_active_k(fd.dev, fd.geom, gid)
    lat = fd.erase_block(gid)
    assert lat == pytest.approx(1500.0)
    assert blk.is_clean and blk.pe_count == 1 and blk.states is None
    assert fd.clean_count(0) == 4


def test_program_guards():
    fd = FlashDevice(DeviceConfig(**SMALL))
    with pytest.raises(RuntimeError):
        fd.program_page(0, 0, 1, now=0)  # Clean block
    gid = int(K.activate_no_gc_k(fd.dev, fd.geom, 0, 0))
    with pytest.raises(RuntimeError):
        fd.program_page(gid, 1, 1, now=0)  # out of order
    fd.program_page(gid, 0, 1, now=0)
    with pytest.raises(RuntimeError):
        fd.invalidate(gid, 1)  # not Valid
    with pytest.raises(RuntimeError):
        fd.dummy_write(gid)  # Valid pages remain
    with pytest.raises(RuntimeError):
        fd.erase_block(gid)  # Valid pages remain


def test_erase_retires_at_endurance_silently():
    c = DeviceConfig(chips=1, blocks_per_chip=1, pages_per_block=4, endurance=1)
    fd = FlashDevice(c)
    gid = int(K.activate_no_gc_k(fd.dev, fd.geom, 0, 0))
    K.detach_active_k(fd.dev, fd.geom, gid)
    assert fd.erase_block(gid) == pytest.approx(1500.0)
    assert fd.block(gid).pe_count == 1

    gid2 = int(K.activate_no_gc_k(fd.dev, fd.geom, 0, 0))
    assert gid2 == gid  # only block on the chip
    K.detach_active_k(fd.dev, fd.geom, gid2)
    assert fd.erase_block(gid2) == 0.0  # retirement: no latency, no count
    blk = fd.block(gid)
    assert blk.retired and blk.pe_count == 1 and blk.is_clean
    assert int(fd.dev.counters[K.C_ERASES]) == 1
    assert int(fd.dev.counters[K.C_RETIRED]) == 1


def test_dummy_write_final_round_guard():
    fd = FlashDevice(DeviceConfig(**SMALL))
    # Mode index 2 is the 2-state mode: round 1 is already the final round.
    gid = int(K.activate_no_gc_k(fd.dev, fd.geom, 0, 2))
    with pytest.raises(RuntimeError):
        fd.dummy_write(gid)


def test_latency_ledger():
    c = DeviceConfig(**SMALL)
    fd = FlashDevice(c)
    gid = int(K.activate_no_gc_k(fd.dev, fd.geom, 0, 0))
    for i in range(4):
        fd.program_page(gid, i, i, now=0)
    led = fd.ledger()
    assert led.write_us == pytest.approx(4 * 350.0)
    assert led.transfer_us == pytest.approx(4 * 8192 * c.us_per_byte)
    assert led.read_us == 0.0 and led.erase_us == 0.0 and led.dummy_us == 0.0
    assert led.total_us == pytest.approx(led.write_us + led.transfer_us)
    assert led.per_chip_us[1] == 0.0
    assert led.busiest_chip_us == pytest.approx(led.per_chip_us[0])


def test_latency_ledger_empty():
    led = LatencyLedger.from_busy(FlashDevice(DeviceConfig(**SMALL)).dev.busy)
    assert led.total_us == 0.0
    assert led.busiest_chip_us == 0.0


def test_flash_device_rejects_non_table():
    with pytest.raises(TypeError):
        FlashDevice(DeviceConfig(**SMALL), table="normal3")


def test_bare_policy_codes():
    pol = bare_policy(preset_table("normal3"))
    assert pol.code == K.POLICY_DSLC
    assert pol.oracle_times.shape == (0,)
    base = bare_policy(baseline_table(), code=K.POLICY_BASELINE)
    assert base.code == K.POLICY_BASELINE
    assert list(base.mode_states) == [2]
