"""Standard MIDI file import for performances.

Supports type 0 and type 1 files, honors the tempo map (and SMPTE divisions),
and keeps only note onsets: one performed note per note-on with velocity > 0.
Pitches outside the piano range (MIDI 21..108) are dropped and counted.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from .notes import MIDI_PITCH_OFFSET, PITCH_MAX, PITCH_MIN, Performance, PerfNote

_DEFAULT_TEMPO = 500000  # microseconds per quarter note


class MidiParseError(ValueError):
    """Malformed MIDI data; the message carries the byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


@dataclass
class _Reader:
    data: bytes
    pos: int = 0

    def read(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise MidiParseError(f"unexpected end of data while reading {what}", self.pos)
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self, what: str) -> int:
        return self.read(1, what)[0]

    def u16(self, what: str) -> int:
        return struct.unpack(">H", self.read(2, what))[0]

    def u32(self, what: str) -> int:
        return struct.unpack(">I", self.read(4, what))[0]

    def varint(self, what: str) -> int:
        value = 0
        for _ in range(4):
            byte = self.u8(what)
            value = (value << 7) | (byte & 0x7F)
            if not byte & 0x80:
                return value
        raise MidiParseError(f"variable-length quantity too long in {what}", self.pos)


def _parse_track(reader: _Reader, track_index: int):
    """Return (note_events, tempo_events) with absolute ticks."""
    start = reader.pos
    if reader.read(4, "track header") != b"MTrk":
        raise MidiParseError(f"track {track_index}: bad chunk magic", start)
    length = reader.u32("track length")
    end = reader.pos + length
    if end > len(reader.data):
        raise MidiParseError(f"track {track_index}: declared length overruns file", start + 4)

    notes = []   # (tick, kind, pitch, velocity); kind: 1 note-on, 0 note-off
    tempos = []  # (tick, usec_per_quarter)
    tick = 0
    running_status = None
    while reader.pos < end:
        tick += reader.varint("delta time")
        status = reader.u8("event status")
        if status < 0x80:
            if running_status is None:
                raise MidiParseError(
                    f"track {track_index}: data byte with no running status", reader.pos - 1
                )
            status_offset = reader.pos - 1
            reader.pos -= 1
            status = running_status
        else:
            status_offset = reader.pos - 1

        if status == 0xFF:  # meta event
            running_status = None
            meta_type = reader.u8("meta type")
            meta_len = reader.varint("meta length")
            payload = reader.read(meta_len, "meta payload")
            if meta_type == 0x51:
                if meta_len != 3:
                    raise MidiParseError(
                        f"track {track_index}: tempo event with length {meta_len}", status_offset
                    )
                tempos.append((tick, int.from_bytes(payload, "big")))
            elif meta_type == 0x2F:
                break  # end of track
        elif status in (0xF0, 0xF7):  # sysex
            running_status = None
            reader.read(reader.varint("sysex length"), "sysex payload")
        elif status >= 0xF0:
            raise MidiParseError(
                f"track {track_index}: unsupported system message 0x{status:02X}", status_offset
            )
        else:
            running_status = status
            kind = status & 0xF0
            if kind in (0x80, 0x90, 0xA0, 0xB0, 0xE0):
                d1 = reader.u8("event data")
                d2 = reader.u8("event data")
                if kind == 0x90:
                    notes.append((tick, 1 if d2 > 0 else 0, d1, d2))
                elif kind == 0x80:
                    notes.append((tick, 0, d1, d2))
            elif kind in (0xC0, 0xD0):
                reader.u8("event data")
            else:  # pragma: no cover - kinds above are exhaustive
                raise MidiParseError(
                    f"track {track_index}: bad status byte 0x{status:02X}", status_offset
                )
    reader.pos = end
    return notes, tempos


def _tick_to_seconds(ticks, division: int, tempos):
    """Map absolute ticks to seconds under the tempo map (or SMPTE timing)."""
    if division & 0x8000:  # SMPTE: high byte is negative frames/sec, low is ticks/frame
        fps = 256 - (division >> 8)
        if fps == 29:
            fps = 29.97
        tpf = division & 0xFF
        per_tick = 1.0 / (fps * tpf)
        return {t: t * per_tick for t in ticks}

    changes = sorted(tempos)
    merged = []
    for tick, usec in changes:
        if merged and merged[-1][0] == tick:
            merged[-1] = (tick, usec)
        else:
            merged.append((tick, usec))
    if not merged or merged[0][0] > 0:
        merged.insert(0, (0, _DEFAULT_TEMPO))

    out = {}
    seg = 0
    seg_start_sec = 0.0
    for t in sorted(set(ticks)):
        while seg + 1 < len(merged) and merged[seg + 1][0] <= t:
            nxt_tick, _ = merged[seg + 1]
            seg_start_sec += (nxt_tick - merged[seg][0]) * merged[seg][1] / (1e6 * division)
            seg += 1
        out[t] = seg_start_sec + (t - merged[seg][0]) * merged[seg][1] / (1e6 * division)
    return out


def load_performance_midi(path) -> tuple[Performance, int]:
    """Parse a type-0/1 standard MIDI file into a Performance.

    Returns ``(performance, dropped)`` where ``dropped`` counts note-ons whose
    pitch lies outside MIDI 21..108.
    """
    with open(path, "rb") as fh:
        reader = _Reader(fh.read())

    if reader.read(4, "file header") != b"MThd":
        raise MidiParseError("bad file magic, expected MThd", 0)
    header_len = reader.u32("header length")
    if header_len < 6:
        raise MidiParseError(f"header length {header_len} < 6", 4)
    fmt = reader.u16("format")
    ntrks = reader.u16("track count")
    division = reader.u16("division")
    reader.read(header_len - 6, "header padding")
    if fmt not in (0, 1):
        raise MidiParseError(f"unsupported format {fmt}, expected 0 or 1", 8)
    if division == 0:
        raise MidiParseError("division of zero", 12)

    all_notes = []   # (tick, track, seq, kind, pitch, velocity)
    all_tempos = []
    for track_index in range(ntrks):
        notes, tempos = _parse_track(reader, track_index)
        for seq, (tick, kind, pitch, velocity) in enumerate(notes):
            all_notes.append((tick, track_index, seq, kind, pitch, velocity))
        all_tempos.extend(tempos)

    onsets = [e for e in all_notes if e[3] == 1]
    seconds = _tick_to_seconds([e[0] for e in onsets], division, all_tempos)

    dropped = 0
    perf_notes = []
    for counter, (tick, _track, _seq, _kind, midi_pitch, velocity) in enumerate(sorted(onsets)):
        pitch = midi_pitch - MIDI_PITCH_OFFSET
        if not PITCH_MIN <= pitch <= PITCH_MAX:
            dropped += 1
            continue
        perf_notes.append(
            PerfNote(
                id=f"n{len(perf_notes)}",
                pitch=pitch,
                onset_sec=seconds[tick],
                velocity=velocity,
            )
        )
    return Performance(perf_notes), dropped
