import math

import pytest

import cardiospike as cs


def test_receptive_field_and_shapes():
    assert cs.receptive_field(3, 3) == 27
    cfg = cs.DetectorConfig()
    assert cfg.target_length == 24
    params = cs.init_params(cfg, 7)
    assert params.scalar_count == cs.param_count(cfg)
    shape, logits = cs.forward(params, cfg, [0.0] * 32)
    assert shape == [24, 1]
    assert all(math.isfinite(v) for v in logits)


def test_focal_loss_oracle():
    # gamma = 0, alpha = 0.5 reduces to half the binary cross-entropy
    for z in (-3.0, -0.2, 0.0, 1.5):
        bce = math.log1p(math.exp(-z))
        assert cs.focal_loss(z, 1, 0.5, 0.0) == pytest.approx(0.5 * bce, abs=1e-12)
    assert cs.focal_loss(0.0, 1, 0.25, 2.0) == pytest.approx(0.25 * 0.25 * math.log(2.0), abs=1e-12)


def test_synth_csv_roundtrip():
    cfg = cs.SynthConfig()
    cfg.records = 3
    cfg.samples_per_record = 200
    corpus = cs.synth_corpus(cfg)
    assert [r.id for r in corpus] == ["1", "2", "3"]
    again = cs.parse_csv_text(cs.format_csv(corpus))
    assert again == corpus
    stats = cs.corpus_stats(corpus)
    assert stats.samples == 600
    assert stats.positives == sum(sum(r.labels) for r in corpus)


def test_packet_codec():
    p = cs.SensorPacket("S1", 65535, 123456, list(range(700, 715)))
    frame = cs.encode_packet(p)
    assert len(frame) == 48
    assert cs.decode_packet(frame) == p
    bad = bytearray(frame)
    bad[20] ^= 0x01
    with pytest.raises(cs.PacketError, match="corrupt"):
        cs.decode_packet(bytes(bad))
    with pytest.raises(cs.PacketError, match="short read"):
        cs.decode_packet(b"")


def test_stream_matches_offline():
    cfg = cs.DetectorConfig()
    params = cs.init_params(cfg, 3)
    record = cs.synth_record(cs.SynthConfig(), 11, "A")
    offline = cs.detect_probabilities(record.rr, params, cfg)
    session = cs.Session(params, cfg, 0.01)
    events = []
    for packet in cs.sensor_packets(record, "A"):
        events += session.on_packet(packet)
    events += session.finish()
    assert session.rr == record.rr
    expected = [(i, p) for i, p in enumerate(offline) if p > 0.01]
    assert [(e.index, e.probability) for e in events] == expected


def test_short_training_run_is_deterministic():
    scfg = cs.SynthConfig()
    scfg.records = 4
    scfg.samples_per_record = 120
    corpus = cs.synth_corpus(scfg)
    tcfg = cs.TrainConfig()
    tcfg.epochs = 1
    tcfg.batch_size = 8
    cfg = cs.DetectorConfig()
    a = cs.cross_validate(corpus, cfg, tcfg, 2)
    b = cs.cross_validate(corpus, cfg, tcfg, 2)
    assert len(a.folds) == 2
    assert a.params[0].tensors() == b.params[0].tensors()
    assert [f.f_score for f in a.folds] == [f.f_score for f in b.folds]
