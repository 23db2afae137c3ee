"""Derivation: the L2 chain as a pure function of the L1 chain.

Each L1 block number n is an epoch. An epoch's first L2 block carries the
L1-attributes transaction and every portal deposit from block n; further L2
blocks come from sequencer batches whose channel frames all landed inside the
sequencing window [n, n+w). Epochs are only derived once their window has
fully arrived, so transaction ordering inside a window is never revised.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from ..hashing import keccak256
from ..l1sim import Chain, l1_attributes
from .batching import Batch, Frame, parse_frames
from .deposits import (
    DepositedTx,
    L1_ATTRIBUTES_DEPOSITOR,
    L1_ATTRIBUTES_PREDEPLOY,
    PORTAL_ADDRESS,
    deposit_from_event,
    source_hash,
)
from .l2 import OpL2State, apply_deposit, initiate_withdrawal
from . import l2 as l2mod

BATCH_INBOX_ADDRESS = 0x90000000000000000000000000000000000000B1


@dataclass(frozen=True)
class L2Block:
    number: int
    epoch_number: int
    epoch_hash: bytes
    timestamp: int
    sequence_number: int
    txs: tuple[bytes, ...]

    @property
    def hash(self) -> bytes:
        tx_digest = keccak256(b"".join(keccak256(tx) for tx in self.txs))
        return keccak256(
            self.number.to_bytes(8, "big")
            + self.epoch_number.to_bytes(8, "big")
            + self.epoch_hash
            + self.timestamp.to_bytes(8, "big")
            + self.sequence_number.to_bytes(4, "big")
            + tx_digest
        )


def chain_hash(blocks: list[L2Block]) -> bytes:
    return keccak256(b"".join(b.hash for b in blocks))


@dataclass(frozen=True)
class DerivationConfig:
    portal_address: int = PORTAL_ADDRESS
    inbox_address: int = BATCH_INBOX_ADDRESS


def _attributes_tx(block, sequence_number: int) -> bytes:
    attrs = l1_attributes(block, sequence_number)
    return DepositedTx(
        source_hash=source_hash(block.hash, 2**32 + sequence_number),
        from_address=L1_ATTRIBUTES_DEPOSITOR,
        to_address=L1_ATTRIBUTES_PREDEPLOY,
        mint=0,
        value=0,
        data=l2mod.encode_attributes(attrs),
        gas_limit=150_000,
    ).encode()


def derive(
    l1_chain: Chain, window_w: int, config: DerivationConfig = DerivationConfig()
) -> list[L2Block]:
    """Derive the full L2 chain for every epoch whose window is complete."""
    if window_w < 1:
        raise ValueError("sequencing window must span at least one block")
    blocks = l1_chain.blocks
    n_epochs = len(blocks) - window_w + 1
    if n_epochs <= 0:
        return []

    # collect frames with the block number each landed in
    frame_arrivals: list[tuple[Frame, int, int]] = []  # (frame, block, arrival idx)
    for block in blocks:
        for tx in block.txs:
            if tx.to != config.inbox_address or not tx.calldata:
                continue
            try:
                frames = parse_frames(tx.calldata)
            except ValueError:
                continue  # garbage in the inbox is ignored
            for frame in frames:
                frame_arrivals.append((frame, block.number, len(frame_arrivals)))

    # channel id -> (frames, span of arrival blocks)
    channels: dict[bytes, dict] = {}
    for frame, block_number, arrival in frame_arrivals:
        entry = channels.setdefault(
            frame.channel_id, {"frames": [], "lo": block_number, "hi": block_number,
                              "arrival": arrival}
        )
        entry["frames"].append(frame)
        entry["lo"] = min(entry["lo"], block_number)
        entry["hi"] = max(entry["hi"], block_number)
        entry["arrival"] = min(entry["arrival"], arrival)

    # decode complete channels into candidate batches
    candidates: list[tuple[Batch, int, int, int]] = []  # (batch, lo, hi, arrival)
    from .batching import ChannelIncomplete, assemble_channel_payload, decode_channel_payload

    for entry in channels.values():
        try:
            payload = assemble_channel_payload(entry["frames"])
        except ChannelIncomplete:
            continue
        for batch in decode_channel_payload(payload):
            candidates.append((batch, entry["lo"], entry["hi"], entry["arrival"]))

    l2_blocks: list[L2Block] = []
    for epoch in range(n_epochs):
        l1_block = blocks[epoch]
        deposits = [
            deposit_from_event(event, l1_block.hash)
            for event in l1_chain.events_in_block(epoch)
            if event.address == config.portal_address and event.name == "TransactionDeposited"
        ]
        seq = 0
        l2_blocks.append(
            L2Block(
                number=len(l2_blocks),
                epoch_number=epoch,
                epoch_hash=l1_block.hash,
                timestamp=l1_block.timestamp,
                sequence_number=seq,
                txs=(_attributes_tx(l1_block, seq), *(d.encode() for d in deposits)),
            )
        )
        # batches for this epoch: correct epoch hash, frames inside the window
        epoch_batches = sorted(
            (
                (batch, arrival)
                for batch, lo, hi, arrival in candidates
                if batch.epoch_number == epoch
                and batch.epoch_hash == l1_block.hash
                and lo >= epoch
                and hi < epoch + window_w
            ),
            key=lambda pair: (pair[0].timestamp, pair[1]),
        )
        for batch, _ in epoch_batches:
            seq += 1
            l2_blocks.append(
                L2Block(
                    number=len(l2_blocks),
                    epoch_number=epoch,
                    epoch_hash=l1_block.hash,
                    timestamp=batch.timestamp,
                    sequence_number=seq,
                    txs=(_attributes_tx(l1_block, seq), *batch.tx_list),
                )
            )
    return l2_blocks


# --- L2 transaction payloads and execution ------------------------------------


def transfer_tx(sender: int, to: int, value: int) -> bytes:
    return json.dumps(
        {"kind": "transfer", "from": sender, "to": to, "value": value}
    ).encode()


def withdraw_tx(sender: int, target: int, value: int, gas_limit: int, data: bytes = b"") -> bytes:
    return json.dumps(
        {
            "kind": "withdraw",
            "sender": sender,
            "target": target,
            "value": value,
            "gas_limit": gas_limit,
            "data": data.hex(),
        }
    ).encode()


def execute_block(state: OpL2State, block: L2Block) -> OpL2State:
    """Apply a derived block; invalid or failing transactions are skipped."""
    from .deposits import DEPOSIT_TX_PREFIX

    for tx in block.txs:
        if tx and tx[0] == DEPOSIT_TX_PREFIX:
            try:
                apply_deposit(state, DepositedTx.decode(tx))
            except ValueError:
                continue
            continue
        try:
            payload = json.loads(tx.decode())
        except (ValueError, UnicodeDecodeError):
            continue
        kind = payload.get("kind")
        try:
            if kind == "transfer":
                sender, to, value = payload["from"], payload["to"], payload["value"]
                if state.balance(sender) < value:
                    continue
                state.balances[sender] -= value
                state.credit(to, value)
            elif kind == "withdraw":
                initiate_withdrawal(
                    state,
                    sender=payload["sender"],
                    target=payload["target"],
                    gas_limit=payload["gas_limit"],
                    value=payload["value"],
                    data=bytes.fromhex(payload["data"]),
                )
        except (KeyError, ValueError):
            continue
    return state


@dataclass(frozen=True)
class ExecutedChain:
    blocks: list[L2Block]
    state: OpL2State
    roots_by_block: dict[int, "l2mod.OutputRootProof"]


def execute_chain(blocks: list[L2Block]) -> ExecutedChain:
    """Run all derived blocks, recording output-root preimages per block."""
    state = OpL2State()
    roots: dict[int, l2mod.OutputRootProof] = {}
    for block in blocks:
        execute_block(state, block)
        roots[block.number] = l2mod.output_root_proof(state, block.hash)
    return ExecutedChain(blocks=blocks, state=state, roots_by_block=roots)
