//! DEVM/1 instruction set and its byte encoding.

use std::fmt;

use crate::error::{Error, Result};

pub const MAX_CHANNEL_LEN: usize = 16;

/// A decoded instruction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Instr {
    Halt,
    Push(u64),
    Pop,
    Dup,
    Swap,
    Pick,
    Add,
    Sub,
    Mul,
    DivMod,
    And,
    Or,
    Xor,
    Not,
    Shl,
    Shr,
    Cmp,
    Jmp(u32),
    Jz(u32),
    Call(u32),
    Ret,
    Load8,
    Load64,
    Store8,
    Store64,
    InSize,
    InRead,
    OutB,
    Emit(String),
}

/// `(opcode, mnemonic)` for every instruction, in opcode order.
pub const OPCODES: [(u8, &str); 29] = [
    (0x00, "HALT"),
    (0x01, "PUSH"),
    (0x02, "POP"),
    (0x03, "DUP"),
    (0x04, "SWAP"),
    (0x05, "PICK"),
    (0x10, "ADD"),
    (0x11, "SUB"),
    (0x12, "MUL"),
    (0x13, "DIVMOD"),
    (0x14, "AND"),
    (0x15, "OR"),
    (0x16, "XOR"),
    (0x17, "NOT"),
    (0x18, "SHL"),
    (0x19, "SHR"),
    (0x1a, "CMP"),
    (0x20, "JMP"),
    (0x21, "JZ"),
    (0x22, "CALL"),
    (0x23, "RET"),
    (0x30, "LOAD8"),
    (0x31, "LOAD64"),
    (0x32, "STORE8"),
    (0x33, "STORE64"),
    (0x40, "INSIZE"),
    (0x41, "INREAD"),
    (0x42, "OUTB"),
    (0x43, "EMIT"),
];

pub fn valid_channel(name: &str) -> bool {
    !name.is_empty()
        && name.len() <= MAX_CHANNEL_LEN
        && name
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'.' | b'_' | b'-'))
}

impl Instr {
    pub fn opcode(&self) -> u8 {
        match self {
            Instr::Halt => 0x00,
            Instr::Push(_) => 0x01,
            Instr::Pop => 0x02,
            Instr::Dup => 0x03,
            Instr::Swap => 0x04,
            Instr::Pick => 0x05,
            Instr::Add => 0x10,
            Instr::Sub => 0x11,
            Instr::Mul => 0x12,
            Instr::DivMod => 0x13,
            Instr::And => 0x14,
            Instr::Or => 0x15,
            Instr::Xor => 0x16,
            Instr::Not => 0x17,
            Instr::Shl => 0x18,
            Instr::Shr => 0x19,
            Instr::Cmp => 0x1a,
            Instr::Jmp(_) => 0x20,
            Instr::Jz(_) => 0x21,
            Instr::Call(_) => 0x22,
            Instr::Ret => 0x23,
            Instr::Load8 => 0x30,
            Instr::Load64 => 0x31,
            Instr::Store8 => 0x32,
            Instr::Store64 => 0x33,
            Instr::InSize => 0x40,
            Instr::InRead => 0x41,
            Instr::OutB => 0x42,
            Instr::Emit(_) => 0x43,
        }
    }

    pub fn mnemonic(&self) -> &'static str {
        let op = self.opcode();
        OPCODES
            .iter()
            .find(|(o, _)| *o == op)
            .map(|(_, m)| *m)
            .unwrap_or("?")
    }

    /// Encoded size in bytes.
    pub fn size(&self) -> usize {
        match self {
            Instr::Push(_) => 9,
            Instr::Jmp(_) | Instr::Jz(_) | Instr::Call(_) => 5,
            Instr::Emit(ch) => 2 + ch.len(),
            _ => 1,
        }
    }

    pub fn target(&self) -> Option<u32> {
        match self {
            Instr::Jmp(t) | Instr::Jz(t) | Instr::Call(t) => Some(*t),
            _ => None,
        }
    }

    pub fn encode_into(&self, out: &mut Vec<u8>) {
        out.push(self.opcode());
        match self {
            Instr::Push(v) => out.extend_from_slice(&v.to_le_bytes()),
            Instr::Jmp(t) | Instr::Jz(t) | Instr::Call(t) => out.extend_from_slice(&t.to_le_bytes()),
            Instr::Emit(ch) => {
                out.push(ch.len() as u8);
                out.extend_from_slice(ch.as_bytes());
            }
            _ => {}
        }
    }

    /// Decode the instruction starting at `pc`.
    pub fn decode(code: &[u8], pc: usize) -> Result<Instr> {
        let op = *code
            .get(pc)
            .ok_or_else(|| Error::ProgramLoad(format!("offset {pc} outside code")))?;
        let imm = |n: usize| -> Result<&[u8]> {
            code.get(pc + 1..pc + 1 + n)
                .ok_or_else(|| Error::ProgramLoad(format!("truncated immediate at offset {pc}")))
        };
        let target = || -> Result<u32> {
            Ok(u32::from_le_bytes(imm(4)?.try_into().expect("4 bytes")))
        };
        Ok(match op {
            0x00 => Instr::Halt,
            0x01 => Instr::Push(u64::from_le_bytes(imm(8)?.try_into().expect("8 bytes"))),
            0x02 => Instr::Pop,
            0x03 => Instr::Dup,
            0x04 => Instr::Swap,
            0x05 => Instr::Pick,
            0x10 => Instr::Add,
            0x11 => Instr::Sub,
            0x12 => Instr::Mul,
            0x13 => Instr::DivMod,
            0x14 => Instr::And,
            0x15 => Instr::Or,
            0x16 => Instr::Xor,
            0x17 => Instr::Not,
            0x18 => Instr::Shl,
            0x19 => Instr::Shr,
            0x1a => Instr::Cmp,
            0x20 => Instr::Jmp(target()?),
            0x21 => Instr::Jz(target()?),
            0x22 => Instr::Call(target()?),
            0x23 => Instr::Ret,
            0x30 => Instr::Load8,
            0x31 => Instr::Load64,
            0x32 => Instr::Store8,
            0x33 => Instr::Store64,
            0x40 => Instr::InSize,
            0x41 => Instr::InRead,
            0x42 => Instr::OutB,
            0x43 => {
                let len = *imm(1)?.first().expect("1 byte") as usize;
                let name = code
                    .get(pc + 2..pc + 2 + len)
                    .ok_or_else(|| Error::ProgramLoad(format!("truncated channel at offset {pc}")))?;
                let name = std::str::from_utf8(name)
                    .ok()
                    .filter(|n| valid_channel(n))
                    .ok_or_else(|| Error::ProgramLoad(format!("invalid channel name at offset {pc}")))?;
                Instr::Emit(name.to_string())
            }
            other => {
                return Err(Error::ProgramLoad(format!(
                    "unknown opcode 0x{other:02x} at offset {pc}"
                )))
            }
        })
    }
}

impl fmt::Display for Instr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instr::Push(v) => write!(f, "PUSH {v}"),
            Instr::Jmp(t) | Instr::Jz(t) | Instr::Call(t) => write!(f, "{} {t}", self.mnemonic()),
            Instr::Emit(ch) => write!(f, "EMIT {ch}"),
            other => f.write_str(other.mnemonic()),
        }
    }
}
