use std::collections::BTreeSet;

use super::isa::Instr;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 6] = b"DEVM/1";

/// A loaded DEVM/1 program. Construction checks that the code decodes
/// completely and that every jump, call and entry target is an instruction
/// boundary inside the code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VmProgram {
    code: Vec<u8>,
    entry: u32,
}

impl VmProgram {
    pub fn new(code: Vec<u8>, entry: u32) -> Result<Self> {
        let boundaries = boundaries(&code)?;
        if !boundaries.contains(&entry) {
            return Err(Error::ProgramLoad(format!(
                "entry {entry} is not an instruction boundary"
            )));
        }
        let mut pc = 0usize;
        while pc < code.len() {
            let instr = Instr::decode(&code, pc)?;
            if let Some(t) = instr.target() {
                if !boundaries.contains(&t) {
                    return Err(Error::ProgramLoad(format!(
                        "target {t} of {} at offset {pc} is out of range",
                        instr.mnemonic()
                    )));
                }
            }
            pc += instr.size();
        }
        Ok(VmProgram { code, entry })
    }

    pub fn from_instrs(instrs: &[Instr], entry: u32) -> Result<Self> {
        let mut code = Vec::new();
        for i in instrs {
            i.encode_into(&mut code);
        }
        VmProgram::new(code, entry)
    }

    pub fn code(&self) -> &[u8] {
        &self.code
    }

    pub fn entry(&self) -> u32 {
        self.entry
    }

    /// `(offset, instruction)` in code order.
    pub fn instructions(&self) -> Vec<(u32, Instr)> {
        let mut out = Vec::new();
        let mut pc = 0usize;
        while pc < self.code.len() {
            let i = Instr::decode(&self.code, pc).expect("validated at load");
            let size = i.size();
            out.push((pc as u32, i));
            pc += size;
        }
        out
    }

    /// Binary form: magic, entry (u32 LE), code length (u32 LE), code.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(14 + self.code.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.entry.to_le_bytes());
        out.extend_from_slice(&(self.code.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.code);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 14 || &bytes[..6] != MAGIC {
            return Err(Error::ProgramLoad("missing DEVM/1 magic".into()));
        }
        let entry = u32::from_le_bytes(bytes[6..10].try_into().expect("4 bytes"));
        let len = u32::from_le_bytes(bytes[10..14].try_into().expect("4 bytes")) as usize;
        if bytes.len() != 14 + len {
            return Err(Error::ProgramLoad(format!(
                "code length {len} does not match {} remaining bytes",
                bytes.len() - 14
            )));
        }
        VmProgram::new(bytes[14..].to_vec(), entry)
    }
}

fn boundaries(code: &[u8]) -> Result<BTreeSet<u32>> {
    if code.is_empty() {
        return Err(Error::ProgramLoad("empty code".into()));
    }
    if code.len() > u32::MAX as usize {
        return Err(Error::ProgramLoad("code too large".into()));
    }
    let mut out = BTreeSet::new();
    let mut pc = 0usize;
    while pc < code.len() {
        out.insert(pc as u32);
        pc += Instr::decode(code, pc)?.size();
    }
    Ok(out)
}
