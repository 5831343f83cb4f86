"""Smoke tests for the chdr_rt python module against numpy references."""

import numpy as np
import pytest

import chdr_rt


def test_header_golden_roundtrip():
    h = chdr_rt.decode_header(0x00E0000100180002)
    assert h.pkt_type == chdr_rt.PktType.DataWithTs
    assert h.seq_num == 1
    assert h.length == 24
    assert h.dst_epid == 2
    assert not h.eob
    assert chdr_rt.encode_header(h) == 0x00E0000100180002

    with pytest.raises(RuntimeError):
        chdr_rt.decode_header(0x3 << 53)  # reserved packet type


def test_data_packet_roundtrip():
    rng = np.random.default_rng(7)
    samples = (rng.uniform(-0.9, 0.9, 64) + 1j * rng.uniform(-0.9, 0.9, 64)).astype(
        np.complex64
    )
    wire = chdr_rt.encode_data_packet(
        samples, start_tick=4096, seq_num=5, dst_epid=2, with_ts=True
    )
    assert len(wire) == 8 + 8 + 64 * 4  # header, timestamp, sc16 payload

    pkt = chdr_rt.decode_packet(wire)
    assert pkt["header"].pkt_type == chdr_rt.PktType.DataWithTs
    assert pkt["header"].seq_num == 5
    assert pkt["timestamp"] == 4096

    back = chdr_rt.wire_to_samples(pkt["payload"])
    # sc16 quantization: half an LSB per axis, sqrt(2) of that in magnitude
    assert np.max(np.abs(back - samples)) <= np.sqrt(2) * 0.5 / 32767 + 1e-6
    assert chdr_rt.quantize_sc16(0.25) == 8192


def test_upols_matches_numpy_convolve():
    rng = np.random.default_rng(11)
    taps, block, blocks = 40, 32, 6
    h = rng.normal(size=taps) + 1j * rng.normal(size=taps)
    x = rng.normal(size=block * blocks) + 1j * rng.normal(size=block * blocks)

    conv = chdr_rt.UpolsConvolver(h, block)
    assert conv.partitions == 2  # ceil(40 / 32)
    y = np.concatenate(
        [conv.process(x[i * block : (i + 1) * block]) for i in range(blocks)]
    )

    want = np.convolve(x, h)[: x.size]
    assert np.linalg.norm(y - want) / np.linalg.norm(want) < 1e-12
    assert conv.blocks_processed == blocks


def test_mimo_emulator_superposition():
    rng = np.random.default_rng(13)
    block = 64
    cirs = [
        [rng.normal(size=20) + 0j, rng.normal(size=33) + 0j],
        [np.array([1.0 + 0j]), np.zeros(1, dtype=complex)],
    ]
    emu = chdr_rt.MimoEmulator(cirs, block)
    assert (emu.n_inputs, emu.n_outputs) == (2, 2)

    x0 = rng.normal(size=block) + 1j * rng.normal(size=block)
    x1 = rng.normal(size=block) + 1j * rng.normal(size=block)
    y0, y1 = emu.process([x0, x1])

    want0 = np.convolve(x0, cirs[0][0])[:block] + np.convolve(x1, cirs[0][1])[:block]
    np.testing.assert_allclose(y0, want0, atol=1e-10)
    np.testing.assert_allclose(y1, x0, atol=1e-12)  # identity row


def test_estimate_channel_recovers_taps():
    period = np.array(chdr_rt.zadoff_chu(256))
    h = np.array([0.9, 0.0, -0.3 + 0.2j, 0.1], dtype=np.complex64)
    x = np.tile(period, 4)
    y = np.convolve(x, h)[: x.size].astype(np.complex64)

    est = chdr_rt.estimate_channel(period, y, offset=256, n_periods=2, taps=4)
    assert chdr_rt.error_db(est, h) < -100

    with pytest.raises(RuntimeError):
        chdr_rt.estimate_channel(period, y[:100], offset=0, n_periods=2, taps=4)


def test_scenario_passthrough_hits_model():
    rep = chdr_rt.run_scenario(mode="pass_through", spp=256, ports=1, seed=3)
    assert rep["a2a"][0][0]["delay_us"] == pytest.approx(rep["predicted_a2a_us"])
    assert rep["a2a_model_dev_ticks"] == 0
    assert rep["rx_cadence_ticks"] == 256
    assert rep["recovery_episodes"] == 0
    assert rep["zeros_played"] == 0
    assert rep["rx_packets"] == rep["tx_packets"] > 0
    assert rep["csv"].startswith("metric,value,unit\nmode,pass_through,")
    assert "a2a_out0_in0,12.800000,us" in rep["csv"]


def test_scenario_emulation_estimates_channel():
    rep = chdr_rt.run_scenario(
        mode="lti_emulation", spp=256, ports=1, cir_taps=64, seed=9
    )
    assert rep["transforms_per_block"] == 2
    assert rep["worst_est_err_db"] < -80
    assert rep["host_latency"]["worst_us"] >= rep["host_latency"]["p50_us"]


def test_scenario_rejects_bad_config():
    with pytest.raises(ValueError):
        chdr_rt.run_scenario(mode="pass_through", spp=7)
    with pytest.raises(ValueError):
        chdr_rt.run_scenario(nonsense_key=1)
