"""Sequencer data-availability wire objects: batches, channels, frames.

A channel is the ZLIB compression of an RLP-encoded batch sequence; frames
chunk a channel so it fits into L1 transactions and may land in any order.
Decompression starts only once every frame of a channel is present.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from typing import Iterable, Sequence

from .. import rlp


class ChannelIncomplete(ValueError):
    """Frames are missing; the channel cannot be reassembled yet."""


@dataclass(frozen=True)
class Batch:
    """One L2 block's worth of sequenced transactions, anchored to its epoch."""

    epoch_number: int
    epoch_hash: bytes
    parent_hash: bytes
    timestamp: int
    tx_list: tuple[bytes, ...]

    def to_rlp_item(self):
        return [
            self.epoch_number,
            self.epoch_hash,
            self.parent_hash,
            self.timestamp,
            list(self.tx_list),
        ]

    @classmethod
    def from_rlp_item(cls, item) -> "Batch":
        if not isinstance(item, list) or len(item) != 5 or not isinstance(item[4], list):
            raise ValueError("batch item has the wrong shape")
        return cls(
            epoch_number=rlp.decode_int(item[0]),
            epoch_hash=item[1],
            parent_hash=item[2],
            timestamp=rlp.decode_int(item[3]),
            tx_list=tuple(item[4]),
        )


@dataclass(frozen=True)
class Channel:
    """Identified by (timestamp, random) so publication order is free."""

    timestamp: int
    random: int
    payload: bytes  # zlib(rlp([batches]))

    @property
    def channel_id(self) -> bytes:
        return self.timestamp.to_bytes(8, "big") + self.random.to_bytes(8, "big")


@dataclass(frozen=True)
class Frame:
    channel_id: bytes  # 16 bytes
    random: int
    timestamp: int
    frame_number: int
    frame_data: bytes
    is_last: bool

    @property
    def frame_data_length(self) -> int:
        return len(self.frame_data)

    def encode(self) -> bytes:
        """Fixed field order: channel_id 16, random 8, timestamp 8,
        frame_number 2, frame_data_length 4, frame_data, is_last 1."""
        return (
            self.channel_id
            + struct.pack(">QQHI", self.random, self.timestamp, self.frame_number,
                          self.frame_data_length)
            + self.frame_data
            + (b"\x01" if self.is_last else b"\x00")
        )

    @classmethod
    def decode(cls, blob: bytes, offset: int = 0) -> tuple["Frame", int]:
        """Parse one frame starting at ``offset``; returns (frame, next offset)."""
        header_end = offset + 16 + struct.calcsize(">QQHI")
        if header_end > len(blob):
            raise ValueError("truncated frame header")
        channel_id = blob[offset : offset + 16]
        random, timestamp, frame_number, data_len = struct.unpack(
            ">QQHI", blob[offset + 16 : header_end]
        )
        data_end = header_end + data_len
        if data_end + 1 > len(blob):
            raise ValueError("truncated frame data")
        return (
            cls(
                channel_id=channel_id,
                random=random,
                timestamp=timestamp,
                frame_number=frame_number,
                frame_data=blob[header_end:data_end],
                is_last=blob[data_end] == 1,
            ),
            data_end + 1,
        )


def parse_frames(blob: bytes) -> list[Frame]:
    """Greedily parse consecutive frames out of one calldata blob."""
    frames = []
    offset = 0
    while offset < len(blob):
        frame, offset = Frame.decode(blob, offset)
        frames.append(frame)
    return frames


def build_channel(batches: Sequence[Batch], timestamp: int = 0, random: int = 0) -> Channel:
    payload = zlib.compress(rlp.encode([b.to_rlp_item() for b in batches]))
    return Channel(timestamp=timestamp, random=random, payload=payload)


def split_frames(channel: Channel, max_frame_bytes: int) -> list[Frame]:
    """Chunk a channel payload into frames numbered from zero."""
    if max_frame_bytes < 1:
        raise ValueError("max_frame_bytes must be at least 1")
    chunks = [
        channel.payload[i : i + max_frame_bytes]
        for i in range(0, len(channel.payload), max_frame_bytes)
    ] or [b""]
    return [
        Frame(
            channel_id=channel.channel_id,
            random=channel.random,
            timestamp=channel.timestamp,
            frame_number=number,
            frame_data=chunk,
            is_last=number == len(chunks) - 1,
        )
        for number, chunk in enumerate(chunks)
    ]


def assemble_channel_payload(frames: Iterable[Frame]) -> bytes:
    """Stitch one channel's frames back together, any arrival order.

    Raises ChannelIncomplete until frame numbers 0..last are all present and
    the last frame is marked.
    """
    by_number: dict[int, Frame] = {}
    last_number = None
    for frame in frames:
        by_number[frame.frame_number] = frame
        if frame.is_last:
            last_number = frame.frame_number
    if last_number is None:
        raise ChannelIncomplete("no frame marked last has arrived")
    missing = [n for n in range(last_number + 1) if n not in by_number]
    if missing:
        raise ChannelIncomplete(f"missing frames {missing}")
    return b"".join(by_number[n].frame_data for n in range(last_number + 1))


def decode_channel_payload(payload: bytes) -> list[Batch]:
    """Decompress and decode; malformed payloads yield no batches.

    Invalid batches are ignored rather than surfaced: a sequencer that posts
    garbage simply contributes nothing to derivation.
    """
    try:
        items = rlp.decode(zlib.decompress(payload))
    except (zlib.error, rlp.RlpDecodingError):
        return []
    if not isinstance(items, list):
        return []
    batches = []
    for item in items:
        try:
            batches.append(Batch.from_rlp_item(item))
        except (ValueError, rlp.RlpDecodingError):
            continue
    return batches


def reassemble(frames: Iterable[Frame]) -> list[Batch]:
    """Group frames by channel and decode every complete channel's batches."""
    channels: dict[bytes, list[Frame]] = {}
    order: list[bytes] = []
    for frame in frames:
        if frame.channel_id not in channels:
            order.append(frame.channel_id)
        channels.setdefault(frame.channel_id, []).append(frame)
    batches: list[Batch] = []
    for channel_id in order:
        payload = assemble_channel_payload(channels[channel_id])
        batches.extend(decode_channel_payload(payload))
    return batches
