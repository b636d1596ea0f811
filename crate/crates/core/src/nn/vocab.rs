//! The 22-token instruction vocabulary and per-slot legality.
//!
//! An instruction is three tokens: opcode, source, destination. Token ids
//! pack the four opcodes first, then the four registers, the ten digit
//! immediates, and the four stack slots. Legality of a token depends on the
//! slot, the space configuration, and (for destinations) the tokens already
//! chosen, mirroring the operand rules of the machine.

use alloc::string::String;
use alloc::vec::Vec;

use crate::machine::{Instruction, MemSlot, Opcode, Operand, Register, SpaceConfig};

pub const VOCAB: usize = 22;
pub const TOKENS_PER_INSTRUCTION: usize = 3;

pub const OPCODE_BASE: u16 = 0;
pub const REG_BASE: u16 = 4;
pub const DIGIT_BASE: u16 = 8;
pub const MEM_BASE: u16 = 18;

/// Start-of-decode marker. Not a real token: it has an embedding row but is
/// never a legal output.
pub const TOK_START: u16 = 22;

pub fn opcode_token(op: Opcode) -> u16 {
    OPCODE_BASE + op.index() as u16
}

pub fn operand_token(op: Operand) -> u16 {
    match op {
        Operand::Reg(r) => REG_BASE + r.index() as u16,
        Operand::Imm(d) => DIGIT_BASE + d as u16,
        Operand::Mem(m) => MEM_BASE + m.index() as u16,
    }
}

pub fn instruction_tokens(instr: &Instruction) -> [u16; 3] {
    [
        opcode_token(instr.opcode),
        operand_token(instr.src),
        operand_token(instr.dst),
    ]
}

fn operand_from_token(token: u16) -> Option<Operand> {
    match token {
        t if (REG_BASE..DIGIT_BASE).contains(&t) => {
            Some(Operand::Reg(Register::ALL[(t - REG_BASE) as usize]))
        }
        t if (DIGIT_BASE..MEM_BASE).contains(&t) => Some(Operand::Imm((t - DIGIT_BASE) as u8)),
        t if (MEM_BASE..VOCAB as u16).contains(&t) => {
            Some(Operand::Mem(MemSlot::ALL[(t - MEM_BASE) as usize]))
        }
        _ => None,
    }
}

/// Rebuilds an instruction from its three tokens. `None` when any token is
/// out of place or the combination breaks an operand rule.
pub fn instruction_from_tokens(tokens: [u16; 3]) -> Option<Instruction> {
    if tokens[0] >= REG_BASE {
        return None;
    }
    let opcode = Opcode::ALL[tokens[0] as usize];
    let src = operand_from_token(tokens[1])?;
    let dst = operand_from_token(tokens[2])?;
    Instruction::new(opcode, src, dst).ok()
}

/// Human-readable token text, for traces.
pub fn token_name(token: u16) -> String {
    use alloc::string::ToString;
    if token == TOK_START {
        return String::from("<start>");
    }
    match instruction_piece(token) {
        Some(Piece::Op(op)) => op.name().to_string(),
        Some(Piece::Operand(op)) => op.to_string(),
        None => alloc::format!("<invalid {token}>"),
    }
}

enum Piece {
    Op(Opcode),
    Operand(Operand),
}

fn instruction_piece(token: u16) -> Option<Piece> {
    if token < REG_BASE {
        Some(Piece::Op(Opcode::ALL[token as usize]))
    } else {
        operand_from_token(token).map(Piece::Operand)
    }
}

/// Tokens allowed in the opcode slot.
pub fn legal_opcode_tokens(_space: SpaceConfig) -> Vec<u16> {
    (OPCODE_BASE..REG_BASE).collect()
}

/// Tokens allowed in the source slot. Sources never depend on the opcode:
/// live registers, all ten digits, and the stack slots when RAM is on.
pub fn legal_src_tokens(space: SpaceConfig, _opcode_token: u16) -> Vec<u16> {
    let mut legal: Vec<u16> =
        (REG_BASE..REG_BASE + space.num_registers as u16).collect();
    legal.extend(DIGIT_BASE..MEM_BASE);
    if space.ram_enabled {
        legal.extend(MEM_BASE..VOCAB as u16);
    }
    legal
}

/// Tokens allowed in the destination slot given the opcode and source
/// already chosen: live registers always; stack slots only when RAM is on,
/// the source is not a stack slot, and the opcode is not `imull`.
pub fn legal_dst_tokens(space: SpaceConfig, opcode_token: u16, src_token: u16) -> Vec<u16> {
    let mut legal: Vec<u16> =
        (REG_BASE..REG_BASE + space.num_registers as u16).collect();
    let src_is_mem = (MEM_BASE..VOCAB as u16).contains(&src_token);
    let is_imull = opcode_token == opcode_token_of(Opcode::Imull);
    if space.ram_enabled && !src_is_mem && !is_imull {
        legal.extend(MEM_BASE..VOCAB as u16);
    }
    legal
}

fn opcode_token_of(op: Opcode) -> u16 {
    opcode_token(op)
}
