//! DEVM/1 assembly text (`.devm`).
//!
//! One instruction per line, optionally preceded by `label:`. `;` starts a
//! comment. `.entry <label|offset>` selects the entry point (default 0).
//! `PUSH` takes a decimal (optionally negative, two's complement), `0x` hex,
//! `'c'` ASCII literal, or a label (its offset). Jumps and calls take a
//! label or a numeric offset. `EMIT` takes a channel name.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use super::isa::{valid_channel, Instr, OPCODES};
use super::program::VmProgram;
use crate::error::{Error, Result};

enum Operand {
    None,
    Value(String),
}

struct Line {
    number: usize,
    mnemonic: String,
    operand: Operand,
}

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::Assembly {
        line,
        message: message.into(),
    }
}

fn valid_label(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn size_of(mnemonic: &str, operand: &Operand) -> usize {
    match (mnemonic, operand) {
        ("PUSH", _) => 9,
        ("JMP" | "JZ" | "CALL", _) => 5,
        ("EMIT", Operand::Value(ch)) => 2 + ch.len(),
        _ => 1,
    }
}

fn parse_number(s: &str) -> Option<u64> {
    if let Some(h) = s.strip_prefix("0x") {
        u64::from_str_radix(h, 16).ok()
    } else if let Some(n) = s.strip_prefix('-') {
        n.parse::<i64>().ok().map(|v| (-v) as u64).or_else(|| {
            (s == "-9223372036854775808").then_some(i64::MIN as u64)
        })
    } else if s.len() == 3 && s.starts_with('\'') && s.ends_with('\'') {
        let c = s.as_bytes()[1];
        c.is_ascii().then_some(c as u64)
    } else {
        s.parse::<u64>().ok()
    }
}

/// Assemble source text into a loadable program.
pub fn assemble(source: &str) -> Result<VmProgram> {
    let mut labels: HashMap<String, u32> = HashMap::new();
    let mut lines = Vec::new();
    let mut entry: Option<(usize, String)> = None;
    let mut offset: usize = 0;

    for (idx, raw) in source.lines().enumerate() {
        let number = idx + 1;
        let mut text = raw.split(';').next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        if let Some(rest) = text.strip_prefix(".entry") {
            let target = rest.trim();
            if target.is_empty() {
                return Err(err(number, ".entry needs a label or offset"));
            }
            if entry.replace((number, target.to_string())).is_some() {
                return Err(err(number, "duplicate .entry"));
            }
            continue;
        }
        if let Some((label, rest)) = text.split_once(':') {
            let label = label.trim();
            if !valid_label(label) {
                return Err(err(number, format!("invalid label `{label}`")));
            }
            if labels.insert(label.to_string(), offset as u32).is_some() {
                return Err(err(number, format!("duplicate label `{label}`")));
            }
            text = rest.trim();
            if text.is_empty() {
                continue;
            }
        }
        let mut parts = text.split_whitespace();
        let mnemonic = parts.next().unwrap_or_default().to_ascii_uppercase();
        if !OPCODES.iter().any(|(_, m)| *m == mnemonic) {
            return Err(err(number, format!("unknown mnemonic `{mnemonic}`")));
        }
        let operand = match parts.next() {
            Some(v) => Operand::Value(v.to_string()),
            None => Operand::None,
        };
        if parts.next().is_some() {
            return Err(err(number, "too many operands"));
        }
        let takes_operand = matches!(mnemonic.as_str(), "PUSH" | "JMP" | "JZ" | "CALL" | "EMIT");
        match (&operand, takes_operand) {
            (Operand::None, true) => return Err(err(number, format!("{mnemonic} needs an operand"))),
            (Operand::Value(_), false) => {
                return Err(err(number, format!("{mnemonic} takes no operand")))
            }
            _ => {}
        }
        if let ("EMIT", Operand::Value(ch)) = (mnemonic.as_str(), &operand) {
            if !valid_channel(ch) {
                return Err(err(number, format!("invalid channel name `{ch}`")));
            }
        }
        offset += size_of(&mnemonic, &operand);
        if offset > u32::MAX as usize {
            return Err(err(number, "program too large"));
        }
        lines.push(Line {
            number,
            mnemonic,
            operand,
        });
    }

    let code_len = offset as u32;
    let resolve = |line: usize, s: &str, is_target: bool| -> Result<u64> {
        if let Some(&off) = labels.get(s) {
            return Ok(off as u64);
        }
        if valid_label(s) {
            return Err(err(line, format!("unresolved label `{s}`")));
        }
        let v = parse_number(s).ok_or_else(|| err(line, format!("bad operand `{s}`")))?;
        if is_target && v >= code_len as u64 {
            return Err(err(line, format!("target {v} out of range")));
        }
        Ok(v)
    };

    let mut instrs = Vec::with_capacity(lines.len());
    for l in &lines {
        let value = match &l.operand {
            Operand::Value(v) => Some(v.as_str()),
            Operand::None => None,
        };
        let target = |v: Option<&str>| -> Result<u32> {
            Ok(resolve(l.number, v.expect("checked"), true)? as u32)
        };
        let instr = match l.mnemonic.as_str() {
            "HALT" => Instr::Halt,
            "PUSH" => Instr::Push(resolve(l.number, value.expect("checked"), false)?),
            "POP" => Instr::Pop,
            "DUP" => Instr::Dup,
            "SWAP" => Instr::Swap,
            "PICK" => Instr::Pick,
            "ADD" => Instr::Add,
            "SUB" => Instr::Sub,
            "MUL" => Instr::Mul,
            "DIVMOD" => Instr::DivMod,
            "AND" => Instr::And,
            "OR" => Instr::Or,
            "XOR" => Instr::Xor,
            "NOT" => Instr::Not,
            "SHL" => Instr::Shl,
            "SHR" => Instr::Shr,
            "CMP" => Instr::Cmp,
            "JMP" => Instr::Jmp(target(value)?),
            "JZ" => Instr::Jz(target(value)?),
            "CALL" => Instr::Call(target(value)?),
            "RET" => Instr::Ret,
            "LOAD8" => Instr::Load8,
            "LOAD64" => Instr::Load64,
            "STORE8" => Instr::Store8,
            "STORE64" => Instr::Store64,
            "INSIZE" => Instr::InSize,
            "INREAD" => Instr::InRead,
            "OUTB" => Instr::OutB,
            "EMIT" => Instr::Emit(value.expect("checked").to_string()),
            other => return Err(err(l.number, format!("unknown mnemonic `{other}`"))),
        };
        instrs.push(instr);
    }

    let entry = match entry {
        None => 0,
        Some((line, e)) => resolve(line, &e, true)? as u32,
    };
    VmProgram::from_instrs(&instrs, entry).map_err(|e| match e {
        Error::ProgramLoad(m) => err(0, m),
        other => other,
    })
}

/// Render a program as assembly text that reassembles to the same bytes.
pub fn disassemble(program: &VmProgram) -> String {
    let instrs = program.instructions();
    let mut targets: BTreeSet<u32> = instrs.iter().filter_map(|(_, i)| i.target()).collect();
    targets.insert(program.entry());
    let label = |off: u32| format!("L{off}");

    let mut out = String::new();
    let _ = writeln!(out, ".entry {}", label(program.entry()));
    for (off, instr) in &instrs {
        if targets.contains(off) {
            let _ = writeln!(out, "{}:", label(*off));
        }
        match instr {
            Instr::Jmp(t) | Instr::Jz(t) | Instr::Call(t) => {
                let _ = writeln!(out, "    {} {}", instr.mnemonic(), label(*t));
            }
            other => {
                let _ = writeln!(out, "    {other}");
            }
        }
    }
    out
}
