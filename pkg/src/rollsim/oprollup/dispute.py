"""The bisection dispute game over a Merkleized step-VM.

A challenged output root is resolved by interactively halving the execution
trace until the parties disagree on a single instruction, then executing that
one instruction "on-chain" against memory cells proven into the pre-state
memory root. The VM is a small register machine standing in for a MIPS
minigeth: 8 registers, word-addressed power-of-two memory, and a LOADPRE
opcode backed by the preimage oracle.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from ..hashing import keccak256
from ..merkle import MerkleProof, fold_proof, hash_leaf, hash_node, verify_inclusion

WORD_MASK = (1 << 64) - 1
NUM_REGISTERS = 8

OP_ADD = "ADD"
OP_MUL = "MUL"
OP_LOAD = "LOAD"
OP_STORE = "STORE"
OP_JUMPZ = "JUMPZ"
OP_LOADPRE = "LOADPRE"
OP_HALT = "HALT"


class PreimageUnavailable(KeyError):
    """No preimage registered under this hash."""


class BadStepProof(ValueError):
    """Memory witness or pre-state does not check out against the root."""


class IllegalInstruction(ValueError):
    """Unknown opcode."""


class NotYourTurn(PermissionError):
    """Move submitted out of turn."""


class PreimageOracle:
    """Keyed store of hash preimages, populated by full nodes.

    Registration recomputes the hash, so an adversary cannot bind bytes to a
    key they do not hash to.
    """

    def __init__(self):
        self._store: dict[bytes, bytes] = {}

    def register(self, data: bytes) -> bytes:
        key = keccak256(data)
        self._store[key] = bytes(data)
        return key

    def register_with_key(self, key: bytes, data: bytes) -> None:
        if keccak256(data) != key:
            raise ValueError("preimage does not hash to the claimed key")
        self._store[key] = bytes(data)

    def get(self, key: bytes) -> bytes:
        if key not in self._store:
            raise PreimageUnavailable(key.hex())
        return self._store[key]


def preimage_get(oracle: PreimageOracle, key: bytes) -> bytes:
    return oracle.get(key)


# --- VM ----------------------------------------------------------------------


@dataclass(frozen=True)
class Instruction:
    op: str
    a: int = 0
    b: int = 0
    c: int = 0
    key: bytes = b""  # immediate hash operand for LOADPRE


@dataclass(frozen=True)
class VmState:
    pc: int
    registers: tuple[int, ...]
    memory_root: bytes

    def hash(self) -> bytes:
        return keccak256(
            self.pc.to_bytes(8, "big")
            + b"".join(r.to_bytes(8, "big") for r in self.registers)
            + self.memory_root
        )


def _word_bytes(word: int) -> bytes:
    return word.to_bytes(8, "big")


class MemoryTree:
    """Merkle tree over a power-of-two array of words, with path updates."""

    def __init__(self, words: list[int]):
        size = len(words)
        if size & (size - 1) or size == 0:
            raise ValueError("memory size must be a power of two")
        self.size = size
        self.words = list(words)
        level = [hash_leaf(_word_bytes(w)) for w in self.words]
        self.levels = [level]
        while len(level) > 1:
            level = [hash_node(level[i], level[i + 1]) for i in range(0, len(level), 2)]
            self.levels.append(level)

    @property
    def root(self) -> bytes:
        return self.levels[-1][0]

    def update(self, index: int, word: int) -> None:
        self.words[index] = word
        self.levels[0][index] = hash_leaf(_word_bytes(word))
        pos = index
        for depth in range(1, len(self.levels)):
            pos //= 2
            left = self.levels[depth - 1][2 * pos]
            right = self.levels[depth - 1][2 * pos + 1]
            self.levels[depth][pos] = hash_node(left, right)

    def prove(self, index: int) -> MerkleProof:
        siblings = []
        pos = index
        for level in self.levels[:-1]:
            sib = pos ^ 1
            siblings.append((level[sib], "left" if sib < pos else "right"))
            pos //= 2
        return MerkleProof(leaf_index=index, siblings=tuple(siblings))


MemoryWitness = dict[int, tuple[int, MerkleProof]]


def _witness_cell(
    witness: MemoryWitness, addr: int, memory_root: bytes
) -> tuple[int, MerkleProof]:
    if addr not in witness:
        raise BadStepProof(f"no witness for memory cell {addr}")
    value, proof = witness[addr]
    if proof.leaf_index != addr or not verify_inclusion(
        memory_root, _word_bytes(value), proof
    ):
        raise BadStepProof(f"witness for cell {addr} fails against the memory root")
    return value, proof


def vm_step(
    pre: VmState,
    instruction: Instruction,
    memory_witness: MemoryWitness | None = None,
    oracle: PreimageOracle | None = None,
    memory_size: int = 64,
) -> VmState:
    """Execute a single instruction against proven memory cells.

    Every cell the instruction reads or writes must come with an inclusion
    proof against ``pre.memory_root``; a store's new root is derived by
    folding the updated leaf through the same path.
    """
    witness = memory_witness or {}
    regs = list(pre.registers)
    pc = pre.pc + 1
    root = pre.memory_root
    op = instruction.op
    if op == OP_ADD:
        regs[instruction.c] = (regs[instruction.a] + regs[instruction.b]) & WORD_MASK
    elif op == OP_MUL:
        regs[instruction.c] = (regs[instruction.a] * regs[instruction.b]) & WORD_MASK
    elif op == OP_LOAD:
        addr = regs[instruction.a] % memory_size
        value, _ = _witness_cell(witness, addr, root)
        regs[instruction.c] = value
    elif op == OP_STORE:
        addr = regs[instruction.a] % memory_size
        _, proof = _witness_cell(witness, addr, root)
        root = fold_proof(_word_bytes(regs[instruction.b]), proof)
    elif op == OP_JUMPZ:
        if regs[instruction.a] == 0:
            pc = instruction.b
    elif op == OP_LOADPRE:
        if oracle is None:
            raise BadStepProof("LOADPRE requires the preimage oracle")
        preimage = oracle.get(instruction.key)
        regs[instruction.c] = int.from_bytes(preimage[:8].ljust(8, b"\x00"), "big")
    elif op == OP_HALT:
        pc = pre.pc
    else:
        raise IllegalInstruction(op)
    return VmState(pc=pc, registers=tuple(regs), memory_root=root)


@dataclass(frozen=True)
class StepProof:
    pre_state: VmState
    memory_witness: MemoryWitness


class VmRunner:
    """Off-chain executor: runs the program directly and serves step proofs."""

    def __init__(
        self,
        program: list[Instruction],
        memory_size: int = 64,
        oracle: PreimageOracle | None = None,
        initial_registers: tuple[int, ...] | None = None,
        initial_memory: list[int] | None = None,
    ):
        self.program = list(program)
        self.memory_size = memory_size
        self.oracle = oracle
        words = list(initial_memory) if initial_memory else [0] * memory_size
        self._initial_memory = list(words)
        self._initial_registers = tuple(initial_registers or (0,) * NUM_REGISTERS)
        self.memory = MemoryTree(words)
        self.state = VmState(
            pc=0,
            registers=self._initial_registers,
            memory_root=self.memory.root,
        )

    def instruction_at(self, pc: int) -> Instruction:
        if 0 <= pc < len(self.program):
            return self.program[pc]
        return Instruction(OP_HALT)

    def step_witness(self) -> MemoryWitness:
        """Inclusion proofs for the cells the next instruction touches."""
        instr = self.instruction_at(self.state.pc)
        witness: MemoryWitness = {}
        if instr.op in (OP_LOAD, OP_STORE):
            addr = self.state.registers[instr.a] % self.memory_size
            witness[addr] = (self.memory.words[addr], self.memory.prove(addr))
        return witness

    def step(self) -> VmState:
        instr = self.instruction_at(self.state.pc)
        witness = self.step_witness()
        post = vm_step(self.state, instr, witness, self.oracle, self.memory_size)
        if instr.op == OP_STORE:
            addr = self.state.registers[instr.a] % self.memory_size
            self.memory.update(addr, self.state.registers[instr.b])
        self.state = post
        return post

    def run_trace(self, steps: int) -> "VmTrace":
        """Execute ``steps`` instructions, recording every state hash."""
        states = [self.state]
        hashes = [self.state.hash()]
        for _ in range(steps):
            states.append(self.step())
            hashes.append(self.state.hash())
        return VmTrace(
            program=self.program,
            memory_size=self.memory_size,
            oracle=self.oracle,
            states=states,
            hashes=hashes,
            initial_registers=self._initial_registers,
            initial_memory=self._initial_memory,
        )


def _replay_raw(
    program: list[Instruction],
    memory_size: int,
    oracle: PreimageOracle | None,
    registers: tuple[int, ...],
    words: list[int],
    steps: int,
) -> tuple[int, list[int], list[int]]:
    """Execute ``steps`` instructions on raw words, no Merkle maintenance.

    Returns (pc, registers, words); used to rebuild memory at an arbitrary
    trace index without paying per-step hashing.
    """
    pc = 0
    regs = list(registers)
    for _ in range(steps):
        instr = program[pc] if 0 <= pc < len(program) else Instruction(OP_HALT)
        op = instr.op
        next_pc = pc + 1
        if op == OP_ADD:
            regs[instr.c] = (regs[instr.a] + regs[instr.b]) & WORD_MASK
        elif op == OP_MUL:
            regs[instr.c] = (regs[instr.a] * regs[instr.b]) & WORD_MASK
        elif op == OP_LOAD:
            regs[instr.c] = words[regs[instr.a] % memory_size]
        elif op == OP_STORE:
            words[regs[instr.a] % memory_size] = regs[instr.b]
        elif op == OP_JUMPZ:
            if regs[instr.a] == 0:
                next_pc = instr.b
        elif op == OP_LOADPRE:
            preimage = oracle.get(instr.key) if oracle else b""
            regs[instr.c] = int.from_bytes(preimage[:8].ljust(8, b"\x00"), "big")
        elif op == OP_HALT:
            next_pc = pc
        else:
            raise IllegalInstruction(op)
        pc = next_pc
    return pc, regs, words


@dataclass
class VmTrace:
    """A completed execution: full states plus precomputed state hashes."""

    program: list[Instruction]
    memory_size: int
    oracle: PreimageOracle | None
    states: list[VmState]
    hashes: list[bytes]
    initial_registers: tuple[int, ...]
    initial_memory: list[int]

    @property
    def length(self) -> int:
        return len(self.states) - 1

    def step_proof(self, index: int) -> StepProof:
        """Pre-state and memory witness for instruction ``index``.

        Replays raw execution from the initial configuration (traces do not
        snapshot memory per step), then Merkleizes memory once at the target.
        """
        pc, regs, words = _replay_raw(
            self.program,
            self.memory_size,
            self.oracle,
            self.initial_registers,
            list(self.initial_memory),
            index,
        )
        tree = MemoryTree(words)
        pre = VmState(pc=pc, registers=tuple(regs), memory_root=tree.root)
        instr = (
            self.program[pc] if 0 <= pc < len(self.program) else Instruction(OP_HALT)
        )
        witness: MemoryWitness = {}
        if instr.op in (OP_LOAD, OP_STORE):
            addr = regs[instr.a] % self.memory_size
            witness[addr] = (words[addr], tree.prove(addr))
        return StepProof(pre_state=pre, memory_witness=witness)


# --- the game -----------------------------------------------------------------


@dataclass(frozen=True)
class GameParams:
    program: list[Instruction]
    memory_size: int = 64
    move_timeout: int = 3600
    oracle: PreimageOracle | None = None


PHASE_BISECT = "bisect"
PHASE_STEP = "step"
PHASE_OVER = "over"

DEFENDER = "defender"
CHALLENGER = "challenger"


@dataclass
class DisputeGame:
    params: GameParams
    challenger: int
    defender: int
    lo: int
    hi: int
    agreed_lo_hash: bytes
    defender_hi_claim: bytes
    phase: str = PHASE_BISECT
    turn: str = DEFENDER
    rounds: int = 0
    winner: str | None = None
    deadline: int = 0
    _pending_defender_mid: bytes | None = None

    def midpoint(self) -> int:
        return self.lo + (self.hi - self.lo) // 2

    def party_of(self, address: int) -> str:
        if address == self.defender:
            return DEFENDER
        if address == self.challenger:
            return CHALLENGER
        raise NotYourTurn(f"{address:#x} is not a participant")


def dispute_open(
    params: GameParams,
    challenger: int,
    defender: int,
    claimed_final_state: bytes,
    trace_length: int,
    agreed_start_hash: bytes,
    now: int = 0,
) -> DisputeGame:
    """Open a game over a trace of ``trace_length`` instructions.

    The parties agree on the state before instruction 0 and dispute the
    defender's claimed state after instruction ``trace_length - 1``.
    """
    if trace_length < 1:
        raise ValueError("cannot dispute an empty trace")
    game = DisputeGame(
        params=params,
        challenger=challenger,
        defender=defender,
        lo=0,
        hi=trace_length,
        agreed_lo_hash=agreed_start_hash,
        defender_hi_claim=claimed_final_state,
        deadline=now + params.move_timeout,
    )
    if game.hi - game.lo == 1:
        game.phase = PHASE_STEP
        game.turn = CHALLENGER
    return game


def dispute_bisect(
    game: DisputeGame, party: int, midpoint_state_hash: bytes, now: int = 0
) -> DisputeGame:
    """Submit one party's claim for the state hash at the current midpoint.

    The defender moves first. Once both have answered: matching hashes mean
    the first half is agreed (recurse right), differing hashes disagree
    already in the first half (recurse left).
    """
    if game.phase != PHASE_BISECT:
        raise NotYourTurn(f"game is in phase {game.phase}")
    role = game.party_of(party)
    if role != game.turn:
        raise NotYourTurn(f"it is the {game.turn}'s turn")
    mid = game.midpoint()
    if role == DEFENDER:
        game._pending_defender_mid = midpoint_state_hash
        game.turn = CHALLENGER
    else:
        defender_mid = game._pending_defender_mid
        game._pending_defender_mid = None
        game.rounds += 1
        if midpoint_state_hash == defender_mid:
            game.lo = mid
            game.agreed_lo_hash = defender_mid
        else:
            game.hi = mid
            game.defender_hi_claim = defender_mid
        game.turn = DEFENDER
        if game.hi - game.lo == 1:
            game.phase = PHASE_STEP
            game.turn = CHALLENGER
    game.deadline = now + game.params.move_timeout
    return game


def dispute_step(game: DisputeGame, step_proof: StepProof) -> str:
    """Execute the single disputed instruction on-chain and settle the game.

    The pre-state must hash to the agreed state at ``lo``; the defender wins
    iff the computed post-state matches their claim at ``hi``.
    """
    if game.phase != PHASE_STEP:
        raise NotYourTurn(f"game is in phase {game.phase}, not {PHASE_STEP}")
    pre = step_proof.pre_state
    if pre.hash() != game.agreed_lo_hash:
        raise BadStepProof("pre-state does not match the agreed state")
    program = game.params.program
    instruction = (
        program[pre.pc] if 0 <= pre.pc < len(program) else Instruction(OP_HALT)
    )
    post = vm_step(
        pre,
        instruction,
        step_proof.memory_witness,
        game.params.oracle,
        game.params.memory_size,
    )
    game.winner = DEFENDER if post.hash() == game.defender_hi_claim else CHALLENGER
    game.phase = PHASE_OVER
    return game.winner


def dispute_timeout(game: DisputeGame, now: int) -> str | None:
    """Award the game to the opponent of whoever let the clock expire."""
    if game.phase == PHASE_OVER:
        return game.winner
    if now < game.deadline:
        return None
    game.winner = CHALLENGER if game.turn == DEFENDER else DEFENDER
    game.phase = PHASE_OVER
    return game.winner


# --- agents and the driver ------------------------------------------------------


class HonestAgent:
    """Answers midpoint queries and produces step proofs from a real trace."""

    def __init__(self, trace: VmTrace):
        self.trace = trace

    def state_hash(self, index: int) -> bytes:
        return self.trace.hashes[index]

    def step_proof(self, index: int) -> StepProof:
        return self.trace.step_proof(index)


class FaultyAgent:
    """Claims the honest trace up to ``fault_index``, then a corrupted one.

    The corruption bumps a register and recomputes hashes, so the first (and
    only) invalid transition in the claimed trace is fault_index-1 ->
    fault_index: exactly the instruction the bisection must find.
    """

    def __init__(self, trace: VmTrace, fault_index: int, register: int = 3, delta: int = 1):
        self.trace = trace
        self.fault_index = fault_index
        self.register = register
        self.delta = delta
        self._hash_cache: dict[int, bytes] = {}

    def corrupted_state(self, index: int) -> VmState:
        honest = self.trace.states[index]
        regs = list(honest.registers)
        regs[self.register] = (regs[self.register] + self.delta) & WORD_MASK
        return VmState(pc=honest.pc, registers=tuple(regs), memory_root=honest.memory_root)

    def state_hash(self, index: int) -> bytes:
        if index < self.fault_index:
            return self.trace.hashes[index]
        if index not in self._hash_cache:
            self._hash_cache[index] = self.corrupted_state(index).hash()
        return self._hash_cache[index]

    def step_proof(self, index: int) -> StepProof:
        return self.trace.step_proof(index)


def run_dispute(
    game: DisputeGame,
    defender_agent,
    challenger_agent,
    now_fn: Callable[[], int] = lambda: 0,
) -> str:
    """Drive a game to completion with both parties responding."""
    while game.phase == PHASE_BISECT:
        mid = game.midpoint()
        dispute_bisect(game, game.defender, defender_agent.state_hash(mid), now_fn())
        dispute_bisect(game, game.challenger, challenger_agent.state_hash(mid), now_fn())
    return dispute_step(game, challenger_agent.step_proof(game.lo))
