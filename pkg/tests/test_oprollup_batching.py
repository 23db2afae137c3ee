import random

import pytest

from rollsim.oprollup.batching import (
    Batch,
    ChannelIncomplete,
    Frame,
    assemble_channel_payload,
    build_channel,
    decode_channel_payload,
    parse_frames,
    reassemble,
    split_frames,
)


def random_batch(rng: random.Random, epoch: int = 0) -> Batch:
    return Batch(
        epoch_number=epoch,
        epoch_hash=rng.randbytes(32),
        parent_hash=rng.randbytes(32),
        timestamp=rng.randrange(10**9),
        tx_list=tuple(rng.randbytes(rng.randrange(1, 80)) for _ in range(rng.randrange(0, 6))),
    )


class TestFrameWire:
    def test_encode_decode_round_trip(self):
        frame = Frame(
            channel_id=bytes(range(16)), random=7, timestamp=1234,
            frame_number=2, frame_data=b"payload", is_last=True,
        )
        decoded, consumed = Frame.decode(frame.encode())
        assert decoded == frame
        assert consumed == len(frame.encode())

    def test_fixed_field_order(self):
        frame = Frame(
            channel_id=b"\xaa" * 16, random=1, timestamp=2,
            frame_number=3, frame_data=b"zz", is_last=False,
        )
        blob = frame.encode()
        assert blob[:16] == b"\xaa" * 16
        assert int.from_bytes(blob[16:24], "big") == 1  # random
        assert int.from_bytes(blob[24:32], "big") == 2  # timestamp
        assert int.from_bytes(blob[32:34], "big") == 3  # frame_number
        assert int.from_bytes(blob[34:38], "big") == 2  # frame_data_length
        assert blob[38:40] == b"zz"
        assert blob[40] == 0  # is_last

    def test_multiple_frames_one_blob(self):
        channel = build_channel([random_batch(random.Random(0))], timestamp=5, random=6)
        frames = split_frames(channel, 20)
        blob = b"".join(f.encode() for f in frames)
        assert parse_frames(blob) == frames

    def test_truncated_frame(self):
        frame = Frame(
            channel_id=bytes(16), random=0, timestamp=0,
            frame_number=0, frame_data=b"abc", is_last=True,
        )
        with pytest.raises(ValueError):
            Frame.decode(frame.encode()[:-2])


class TestChannelRoundTrip:
    def test_single_batch_single_frame(self):
        batch = random_batch(random.Random(1))
        channel = build_channel([batch], timestamp=9, random=9)
        frames = split_frames(channel, 10**6)
        assert len(frames) == 1
        assert frames[0].is_last
        assert reassemble(frames) == [batch]

    def test_out_of_order_frames(self):
        rng = random.Random(2)
        batches = [random_batch(rng) for _ in range(4)]
        channel = build_channel(batches, timestamp=1, random=2)
        frames = split_frames(channel, 17)
        assert len(frames) >= 3
        shuffled = [frames[i] for i in (2, 0, 1)] + frames[3:]
        assert reassemble(shuffled) == batches

    def test_random_permutations_and_chunkings(self):
        rng = random.Random(3)
        for _ in range(60):
            batches = [random_batch(rng) for _ in range(rng.randrange(1, 5))]
            channel = build_channel(
                batches, timestamp=rng.randrange(100), random=rng.randrange(2**64)
            )
            frames = split_frames(channel, rng.randrange(1, 60))
            rng.shuffle(frames)
            assert reassemble(frames) == batches

    def test_missing_frame_is_incomplete(self):
        rng = random.Random(4)
        channel = build_channel([random_batch(rng)], timestamp=0, random=1)
        frames = split_frames(channel, 10)
        assert len(frames) > 2
        with pytest.raises(ChannelIncomplete):
            assemble_channel_payload(frames[:-1])  # last frame missing
        with pytest.raises(ChannelIncomplete):
            assemble_channel_payload([frames[0], frames[-1]])  # gap

    def test_retransmission_completes(self):
        rng = random.Random(5)
        batches = [random_batch(rng)]
        channel = build_channel(batches, timestamp=0, random=1)
        frames = split_frames(channel, 10)
        partial = frames[:-1]
        with pytest.raises(ChannelIncomplete):
            assemble_channel_payload(partial)
        assert reassemble(partial + [frames[-1]]) == batches

    def test_corrupt_payload_yields_no_batches(self):
        assert decode_channel_payload(b"not zlib at all") == []

    def test_corrupt_rlp_inside_zlib(self):
        import zlib

        assert decode_channel_payload(zlib.compress(b"\xf9\xff\xff")) == []

    def test_two_channels_interleaved(self):
        rng = random.Random(6)
        b1, b2 = [random_batch(rng)], [random_batch(rng)]
        f1 = split_frames(build_channel(b1, timestamp=1, random=1), 15)
        f2 = split_frames(build_channel(b2, timestamp=2, random=2), 15)
        interleaved = [f for pair in zip(f1, f2) for f in pair]
        leftovers = f1[len(f2):] + f2[len(f1):]
        assert reassemble(interleaved + leftovers) == b1 + b2
