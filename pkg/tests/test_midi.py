"""MIDI import tests against hand-assembled files; the byte writer below is
the timing oracle."""

import struct

import pytest

from symalign import MidiParseError, load_performance_midi


def vlq(value: int) -> bytes:
    out = [value & 0x7F]
    value >>= 7
    while value:
        out.append((value & 0x7F) | 0x80)
        value >>= 7
    return bytes(reversed(out))


def track_chunk(events: bytes) -> bytes:
    body = events + vlq(0) + bytes([0xFF, 0x2F, 0x00])
    return b"MTrk" + struct.pack(">I", len(body)) + body


def midi_file(tracks, division: int = 480, fmt: int = 1) -> bytes:
    header = b"MThd" + struct.pack(">IHHH", 6, fmt, len(tracks), division)
    return header + b"".join(tracks)


def note_on(delta: int, pitch: int, velocity: int = 80, channel: int = 0) -> bytes:
    return vlq(delta) + bytes([0x90 | channel, pitch, velocity])


def note_off(delta: int, pitch: int, channel: int = 0) -> bytes:
    return vlq(delta) + bytes([0x80 | channel, pitch, 0])


def tempo(delta: int, usec_per_quarter: int) -> bytes:
    return vlq(delta) + bytes([0xFF, 0x51, 0x03]) + usec_per_quarter.to_bytes(3, "big")


def test_single_note(tmp_path):
    path = tmp_path / "one.mid"
    path.write_bytes(midi_file([track_chunk(note_on(0, 60) + note_off(240, 60))], fmt=0))
    perf, dropped = load_performance_midi(path)
    assert dropped == 0
    assert len(perf) == 1
    assert perf.notes[0].pitch == 40  # MIDI 60 - 20
    assert perf.notes[0].onset_sec == 0.0


def test_same_tick_orders_low_pitch_first(tmp_path):
    events = note_on(0, 64) + note_on(0, 60) + note_off(100, 64) + note_off(0, 60)
    path = tmp_path / "tie.mid"
    path.write_bytes(midi_file([track_chunk(events)], fmt=0))
    perf, _ = load_performance_midi(path)
    assert [n.pitch for n in perf.notes] == [40, 44]


def test_three_note_fixture_times(tmp_path):
    # division 480; default tempo 0.5 s/qn, halved to 0.25 s/qn at tick 480
    control = track_chunk(tempo(480, 250000))
    notes = track_chunk(
        note_on(0, 60)
        + note_off(240, 60)
        + note_on(240, 62)  # tick 480
        + note_off(240, 62)
        + note_on(240, 64)  # tick 960
        + note_off(240, 64)
    )
    path = tmp_path / "three.mid"
    path.write_bytes(midi_file([control, notes]))
    perf, _ = load_performance_midi(path)
    expected = [0.0, 0.5, 0.75]
    assert len(perf) == 3
    for note, t in zip(perf.notes, expected):
        assert note.onset_sec == pytest.approx(t, abs=1e-6)


def test_running_status_and_velocity_zero_off(tmp_path):
    # one status byte drives three events; velocity 0 acts as note-off
    events = (
        vlq(0)
        + bytes([0x90, 60, 80])
        + vlq(120)
        + bytes([60, 0])
        + vlq(0)
        + bytes([62, 90])
    )
    path = tmp_path / "rs.mid"
    path.write_bytes(midi_file([track_chunk(events)], fmt=0))
    perf, _ = load_performance_midi(path)
    assert [n.pitch for n in perf.notes] == [40, 42]


def test_out_of_range_pitches_dropped_with_count(tmp_path):
    events = note_on(0, 5) + note_on(0, 60) + note_on(0, 110)
    path = tmp_path / "range.mid"
    path.write_bytes(midi_file([track_chunk(events)], fmt=0))
    perf, dropped = load_performance_midi(path)
    assert dropped == 2
    assert [n.pitch for n in perf.notes] == [40]


def test_bad_magic_reports_offset(tmp_path):
    path = tmp_path / "bad.mid"
    path.write_bytes(b"RIFF" + b"\x00" * 20)
    with pytest.raises(MidiParseError, match="offset 0"):
        load_performance_midi(path)


def test_bad_track_magic_reports_offset(tmp_path):
    good = midi_file([track_chunk(note_on(0, 60))], fmt=0)
    mangled = good[:14] + b"XTrk" + good[18:]
    path = tmp_path / "bad.mid"
    path.write_bytes(mangled)
    with pytest.raises(MidiParseError, match="offset 14"):
        load_performance_midi(path)


def test_truncated_track_reports_offset(tmp_path):
    good = midi_file([track_chunk(note_on(0, 60) + note_off(240, 60))], fmt=0)
    path = tmp_path / "short.mid"
    path.write_bytes(good[:-4])
    with pytest.raises(MidiParseError, match="byte offset"):
        load_performance_midi(path)


def test_format_2_rejected(tmp_path):
    path = tmp_path / "f2.mid"
    path.write_bytes(midi_file([track_chunk(note_on(0, 60))], fmt=2))
    with pytest.raises(MidiParseError, match="format 2"):
        load_performance_midi(path)
