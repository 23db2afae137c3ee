"""Optimistic-rollup L2 state: accounts, the withdrawal ledger, output roots.

L2 execution here is deliberately small (balance transfers, withdrawal
initiation, attribute registration); what matters to the protocol is that the
state and the sent-withdrawals set commit to Merkle roots that L1 contracts
can check proofs against.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dataclass_field

from ..hashing import keccak256
from ..l1sim import L1Attributes
from ..merkle import MerkleProof, MerkleTree
from .deposits import DepositedTx, L1_ATTRIBUTES_PREDEPLOY

OUTPUT_ROOT_VERSION = b"\x00" * 32
ZERO32 = b"\x00" * 32


class InsufficientFunds(ValueError):
    """Sender balance cannot cover the requested value."""


@dataclass(frozen=True)
class WithdrawalTx:
    nonce: int
    sender: int
    target: int
    value: int
    gas_limit: int
    data: bytes

    @property
    def hash(self) -> bytes:
        return keccak256(
            self.nonce.to_bytes(32, "big")
            + self.sender.to_bytes(20, "big")
            + self.target.to_bytes(20, "big")
            + self.value.to_bytes(32, "big")
            + self.gas_limit.to_bytes(32, "big")
            + self.data
        )


@dataclass(frozen=True)
class OutputRootProof:
    """The four preimage fields of an output root."""

    version: bytes
    state_root: bytes
    withdrawal_root: bytes
    l2_block_hash: bytes

    @property
    def output_root(self) -> bytes:
        return keccak256(
            self.version + self.state_root + self.withdrawal_root + self.l2_block_hash
        )


@dataclass
class OpL2State:
    balances: dict[int, int] = dataclass_field(default_factory=dict)
    nonces: dict[int, int] = dataclass_field(default_factory=dict)
    withdrawal_nonce: int = 0
    sent_withdrawals: list[WithdrawalTx] = dataclass_field(default_factory=list)
    latest_attributes: L1Attributes | None = None
    events: list[tuple[str, bytes]] = dataclass_field(default_factory=list)

    def balance(self, address: int) -> int:
        return self.balances.get(address, 0)

    def credit(self, address: int, amount: int) -> None:
        self.balances[address] = self.balances.get(address, 0) + amount

    def state_root(self) -> bytes:
        blob = json.dumps(
            {
                "balances": {str(k): v for k, v in sorted(self.balances.items())},
                "nonces": {str(k): v for k, v in sorted(self.nonces.items())},
                "withdrawal_nonce": self.withdrawal_nonce,
            },
            sort_keys=True,
        ).encode()
        return keccak256(blob)

    def withdrawal_root(self) -> bytes:
        if not self.sent_withdrawals:
            return ZERO32
        return MerkleTree([w.hash for w in self.sent_withdrawals]).root

    def withdrawal_proof(self, withdrawal_hash: bytes) -> MerkleProof:
        hashes = [w.hash for w in self.sent_withdrawals]
        index = hashes.index(withdrawal_hash)
        return MerkleTree(hashes).prove(index)


def apply_deposit(state: OpL2State, deposit: DepositedTx) -> OpL2State:
    """Execute a deposited transaction: mint, transfer, bump the nonce.

    A failing inner transfer does not undo the mint or the nonce bump; the
    deposit itself always lands.
    """
    state.credit(deposit.from_address, deposit.mint)
    state.nonces[deposit.from_address] = state.nonces.get(deposit.from_address, 0) + 1
    if deposit.to_address == L1_ATTRIBUTES_PREDEPLOY:
        attrs = _decode_attributes(deposit.data)
        if attrs is not None:
            state.latest_attributes = attrs
        return state
    if deposit.value:
        if state.balance(deposit.from_address) >= deposit.value:
            state.balances[deposit.from_address] -= deposit.value
            state.credit(deposit.to_address, deposit.value)
        # else: inner call failed; deposit still consumed
    return state


def initiate_withdrawal(
    state: OpL2State,
    sender: int,
    target: int,
    gas_limit: int,
    value: int,
    data: bytes,
) -> bytes:
    """Queue an L2-to-L1 message; returns the withdrawal hash."""
    if state.balance(sender) < value:
        raise InsufficientFunds(f"{sender:#x} holds {state.balance(sender)} < {value}")
    tx = WithdrawalTx(
        nonce=state.withdrawal_nonce,
        sender=sender,
        target=target,
        value=value,
        gas_limit=gas_limit,
        data=bytes(data),
    )
    state.balances[sender] = state.balance(sender) - value
    state.sent_withdrawals.append(tx)
    state.withdrawal_nonce += 1
    state.events.append(("WithdrawalInitiated", tx.hash))
    return tx.hash


def output_root_proof(state: OpL2State, l2_block_hash: bytes) -> OutputRootProof:
    return OutputRootProof(
        version=OUTPUT_ROOT_VERSION,
        state_root=state.state_root(),
        withdrawal_root=state.withdrawal_root(),
        l2_block_hash=l2_block_hash,
    )


# attribute registration payloads (the L1-attributes deposited transaction)

def encode_attributes(attrs: L1Attributes) -> bytes:
    from .. import rlp

    return rlp.encode(
        [attrs.number, attrs.timestamp, attrs.basefee, attrs.hash, attrs.sequence_number]
    )


def _decode_attributes(data: bytes) -> L1Attributes | None:
    from .. import rlp

    try:
        fields = rlp.decode(data)
        return L1Attributes(
            number=rlp.decode_int(fields[0]),
            timestamp=rlp.decode_int(fields[1]),
            basefee=rlp.decode_int(fields[2]),
            hash=fields[3],
            sequence_number=rlp.decode_int(fields[4]),
        )
    except Exception:
        return None
