"""Validity-proof settlement: prove a state transition, verify it on L1.

The proof is the toy SNARK over a fixed two-gate digest-binding circuit: the
prover feeds in a digest of (old root, published diff, bridged messages) and
exposes the circuit output next to the proof; the L1 side recomputes the
digest from what was actually submitted and rejects on any mismatch. The full
machine-level check (the deterministic machine accepting the trace) runs in
the prover and in test oracles, not inside the circuit.

Settlement is atomic: the root update and every message-counter change land
together or not at all.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..algebra import Field, PairingGroup
from ..hashing import keccak256
from ..snark import (
    SnarkProof,
    build_qap,
    compile_r1cs,
    flatten,
    prove,
    setup,
    verify,
    witness,
)
from .cairo import RunResult, deterministic_accept
from .messaging import StarkNetCore, l2_to_l1_message_hash
from .statediff import StateDiff, diff_calldata_bytes, encode_state_diff


class ProofRejected(ValueError):
    """Validity proof failed verification against the submitted data."""


class StateMismatch(ValueError):
    """Claimed post-root does not follow from the submitted diff."""


DIGEST_CIRCUIT = "x*x + x"


@dataclass(frozen=True)
class SettlementMessages:
    """Message effects bridged by one proven transition."""

    consumed_l1_to_l2: tuple[bytes, ...] = ()
    sent_l2_to_l1: tuple[tuple[int, int, tuple[int, ...]], ...] = ()


@dataclass(frozen=True)
class ValidityProof:
    snark: SnarkProof
    claimed_output: int  # exposed circuit output binding the digest
    new_root: bytes


class SharpProver:
    """Shared prover: one circuit, one CRS, proofs for every transition."""

    def __init__(self, group: PairingGroup, rng):
        self.group = group
        self.field = Field(group.order)
        self.program = flatten(DIGEST_CIRCUIT, inputs=("x",))
        self.r1cs = compile_r1cs(self.program, self.field)
        self.qap = build_qap(self.r1cs)
        self.crs = setup(self.qap, group, rng)

    def transition_digest(
        self, old_root: bytes, diff_words: list[int], messages: SettlementMessages
    ) -> int:
        blob = old_root + diff_calldata_bytes(diff_words)
        for msg_hash in messages.consumed_l1_to_l2:
            blob += msg_hash
        for from_addr, to_addr, payload in messages.sent_l2_to_l1:
            blob += l2_to_l1_message_hash(from_addr, to_addr, payload)
        return int.from_bytes(keccak256(blob), "big") % self.group.order

    def expected_output(self, digest: int) -> int:
        return (digest * digest + digest) % self.group.order

    def prove_digest(self, digest: int) -> tuple[SnarkProof, int]:
        solution = witness(self.program, self.field, {"x": digest})
        return prove(self.crs, self.qap, solution), solution[-1].value

    def verify_digest(self, proof: SnarkProof, claimed_output: int, digest: int) -> bool:
        if claimed_output != self.expected_output(digest):
            return False
        return verify(self.crs.vk, proof, self.group)


def next_root(old_root: bytes, diff_words: list[int]) -> bytes:
    return keccak256(old_root + diff_calldata_bytes(diff_words))


def prove_transition(
    old_root: bytes,
    diff: StateDiff,
    trace: RunResult | None,
    prover: SharpProver,
    messages: SettlementMessages = SettlementMessages(),
) -> ValidityProof:
    """Produce the validity proof for one state transition.

    ``trace`` is the runner output for the transition's execution; it must be
    accepted by the deterministic machine (the prover refuses otherwise).
    Pass None for transitions whose execution is outside the simulated
    machine (pure bridge bookkeeping).
    """
    if trace is not None and not deterministic_accept(
        trace.steps, trace.memory, trace.states, trace.prime
    ):
        raise ValueError("trace is not accepted by the deterministic machine")
    diff_words = encode_state_diff(diff)
    digest = prover.transition_digest(old_root, diff_words, messages)
    snark_proof, output = prover.prove_digest(digest)
    return ValidityProof(
        snark=snark_proof,
        claimed_output=output,
        new_root=next_root(old_root, diff_words),
    )


def settle(
    core: StarkNetCore,
    prover: SharpProver,
    proof: ValidityProof,
    diff_words: list[int],
    messages: SettlementMessages = SettlementMessages(),
) -> bytes:
    """Verify a transition proof and apply its effects to the L1 core.

    Checks first, one commit at the end: the root history, both counter maps
    and the fee escrow move together.
    """
    digest = prover.transition_digest(core.state_root, diff_words, messages)
    if not prover.verify_digest(proof.snark, proof.claimed_output, digest):
        raise ProofRejected("validity proof does not match the submitted data")
    expected_root = next_root(core.state_root, diff_words)
    if proof.new_root != expected_root:
        raise StateMismatch(
            f"claimed root {proof.new_root.hex()} != recomputed {expected_root.hex()}"
        )
    # stage counter effects, validating before any mutation
    consumed_deltas: dict[bytes, int] = {}
    for msg_hash in messages.consumed_l1_to_l2:
        consumed_deltas[msg_hash] = consumed_deltas.get(msg_hash, 0) + 1
    for msg_hash, count in consumed_deltas.items():
        if core.l1_to_l2_counters.get(msg_hash, 0) < count:
            raise ProofRejected(
                f"transition consumes unsent L1->L2 message {msg_hash.hex()}"
            )
    sent_hashes = [
        l2_to_l1_message_hash(from_addr, to_addr, payload)
        for from_addr, to_addr, payload in messages.sent_l2_to_l1
    ]
    fee_release = sum(core.fee_escrow.get(h, 0) for h in consumed_deltas)

    # commit
    core.root_history.append(expected_root)
    core.settled_at_block.append(core.chain.pending_block_number)
    for msg_hash, count in consumed_deltas.items():
        core.l1_to_l2_counters[msg_hash] -= count
        core.fee_escrow.pop(msg_hash, None)
    for msg_hash in sent_hashes:
        core.l2_to_l1_counters[msg_hash] = core.l2_to_l1_counters.get(msg_hash, 0) + 1
    if fee_release:
        core.chain.fund(core.sequencer, fee_release)
    core.chain._emit(core.address, "StateUpdate", expected_root)
    return expected_root
