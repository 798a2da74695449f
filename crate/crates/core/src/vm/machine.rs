//! The DEVM/1 interpreter.
//!
//! Execution has no ambient inputs: the only things a program can observe
//! are its code and its input blob, so identical inputs yield identical
//! results on every run and platform. Every error condition is a trap.

use super::isa::Instr;
use super::program::VmProgram;
use super::replay::TimedEvent;

pub const STACK_LIMIT: usize = 4096;
pub const CALL_DEPTH_LIMIT: usize = 1024;
pub const MEMORY_LIMIT: u64 = 16 * 1024 * 1024;
/// Largest memory extension a single instruction may cause.
pub const MEMORY_GROWTH_PER_STEP: u64 = 64 * 1024;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Halt {
    Normal,
    FuelExhausted,
    Trap { offset: u32, reason: String },
}

impl Halt {
    pub fn as_str(&self) -> &'static str {
        match self {
            Halt::Normal => "normal",
            Halt::FuelExhausted => "fuel_exhausted",
            Halt::Trap { .. } => "trap",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionResult {
    pub output: Vec<u8>,
    pub events: Vec<TimedEvent>,
    pub halted: Halt,
    /// Completed instructions. A trapping instruction does not complete.
    pub instructions_executed: u64,
}

struct Machine<'a> {
    stack: Vec<u64>,
    calls: Vec<u32>,
    memory: Vec<u8>,
    input: &'a [u8],
    output: Vec<u8>,
    events: Vec<TimedEvent>,
}

type Step = Result<Flow, String>;

enum Flow {
    Next,
    Jump(u32),
    Halt,
}

impl Machine<'_> {
    fn push(&mut self, v: u64) -> Result<(), String> {
        if self.stack.len() >= STACK_LIMIT {
            return Err("stack overflow".into());
        }
        self.stack.push(v);
        Ok(())
    }

    fn pop(&mut self) -> Result<u64, String> {
        self.stack.pop().ok_or_else(|| "stack underflow".to_string())
    }

    fn binary(&mut self, f: impl FnOnce(u64, u64) -> u64) -> Result<(), String> {
        let b = self.pop()?;
        let a = self.pop()?;
        self.push(f(a, b))
    }

    /// Make `[addr, addr + width)` addressable, growing memory if needed.
    fn region(&mut self, addr: u64, width: u64) -> Result<std::ops::Range<usize>, String> {
        let end = addr
            .checked_add(width)
            .filter(|&e| e <= MEMORY_LIMIT)
            .ok_or_else(|| format!("address {addr} beyond memory limit"))?;
        let len = self.memory.len() as u64;
        if end > len {
            if end - len > MEMORY_GROWTH_PER_STEP {
                return Err(format!("memory growth to {end} exceeds per-step limit"));
            }
            self.memory.resize(end as usize, 0);
        }
        Ok(addr as usize..end as usize)
    }

    fn step(&mut self, instr: &Instr, next: u32) -> Step {
        match instr {
            Instr::Halt => return Ok(Flow::Halt),
            Instr::Push(v) => self.push(*v)?,
            Instr::Pop => {
                self.pop()?;
            }
            Instr::Dup => {
                let v = *self.stack.last().ok_or("stack underflow")?;
                self.push(v)?;
            }
            Instr::Swap => {
                let b = self.pop()?;
                let a = self.pop()?;
                self.push(b)?;
                self.push(a)?;
            }
            Instr::Pick => {
                let n = self.pop()?;
                let len = self.stack.len() as u64;
                if n >= len {
                    return Err(format!("PICK {n} with stack depth {len}"));
                }
                let v = self.stack[(len - 1 - n) as usize];
                self.push(v)?;
            }
            Instr::Add => self.binary(u64::wrapping_add)?,
            Instr::Sub => self.binary(u64::wrapping_sub)?,
            Instr::Mul => self.binary(u64::wrapping_mul)?,
            Instr::DivMod => {
                let b = self.pop()?;
                let a = self.pop()?;
                if b == 0 {
                    return Err("division by zero".into());
                }
                self.push(a / b)?;
                self.push(a % b)?;
            }
            Instr::And => self.binary(|a, b| a & b)?,
            Instr::Or => self.binary(|a, b| a | b)?,
            Instr::Xor => self.binary(|a, b| a ^ b)?,
            Instr::Not => {
                let a = self.pop()?;
                self.push(!a)?;
            }
            Instr::Shl => self.binary(|a, b| if b < 64 { a << b } else { 0 })?,
            Instr::Shr => self.binary(|a, b| if b < 64 { a >> b } else { 0 })?,
            Instr::Cmp => self.binary(|a, b| match a.cmp(&b) {
                std::cmp::Ordering::Equal => 0,
                std::cmp::Ordering::Greater => 1,
                std::cmp::Ordering::Less => u64::MAX,
            })?,
            Instr::Jmp(t) => return Ok(Flow::Jump(*t)),
            Instr::Jz(t) => {
                if self.pop()? == 0 {
                    return Ok(Flow::Jump(*t));
                }
            }
            Instr::Call(t) => {
                if self.calls.len() >= CALL_DEPTH_LIMIT {
                    return Err("call depth exceeded".into());
                }
                self.calls.push(next);
                return Ok(Flow::Jump(*t));
            }
            Instr::Ret => {
                let r = self.calls.pop().ok_or("RET with empty call stack")?;
                return Ok(Flow::Jump(r));
            }
            Instr::Load8 => {
                let addr = self.pop()?;
                let r = self.region(addr, 1)?;
                let v = self.memory[r.start] as u64;
                self.push(v)?;
            }
            Instr::Load64 => {
                let addr = self.pop()?;
                let r = self.region(addr, 8)?;
                let v = u64::from_le_bytes(self.memory[r].try_into().expect("8 bytes"));
                self.push(v)?;
            }
            Instr::Store8 => {
                let v = self.pop()?;
                let addr = self.pop()?;
                if v > 0xff {
                    return Err(format!("STORE8 value {v} exceeds a byte"));
                }
                let r = self.region(addr, 1)?;
                self.memory[r.start] = v as u8;
            }
            Instr::Store64 => {
                let v = self.pop()?;
                let addr = self.pop()?;
                let r = self.region(addr, 8)?;
                self.memory[r].copy_from_slice(&v.to_le_bytes());
            }
            Instr::InSize => self.push(self.input.len() as u64)?,
            Instr::InRead => {
                let i = self.pop()?;
                let b = *usize::try_from(i)
                    .ok()
                    .and_then(|i| self.input.get(i))
                    .ok_or_else(|| format!("input index {i} out of range"))?;
                self.push(b as u64)?;
            }
            Instr::OutB => {
                let v = self.pop()?;
                if v > 0xff {
                    return Err(format!("OUTB value {v} exceeds a byte"));
                }
                self.output.push(v as u8);
            }
            Instr::Emit(channel) => {
                let len = self.pop()?;
                let addr = self.pop()?;
                let t = self.pop()?;
                if let Some(last) = self.events.last() {
                    if t < last.t {
                        return Err(format!("event time {t} precedes {}", last.t));
                    }
                }
                let r = self.region(addr, len)?;
                self.events.push(TimedEvent {
                    t,
                    channel: channel.clone(),
                    payload: self.memory[r].to_vec(),
                });
            }
        }
        Ok(Flow::Next)
    }
}

/// Run `program` over `input` for at most `fuel` instructions.
pub fn execute(program: &VmProgram, input: &[u8], fuel: u64) -> ExecutionResult {
    let listing = program.instructions();
    let mut index_of = vec![u32::MAX; program.code().len()];
    for (i, (off, _)) in listing.iter().enumerate() {
        index_of[*off as usize] = i as u32;
    }

    let mut m = Machine {
        stack: Vec::new(),
        calls: Vec::new(),
        memory: Vec::new(),
        input,
        output: Vec::new(),
        events: Vec::new(),
    };
    let mut pc = program.entry();
    let mut executed: u64 = 0;
    let halted = loop {
        if executed == fuel {
            break Halt::FuelExhausted;
        }
        let Some((off, instr)) = index_of
            .get(pc as usize)
            .filter(|&&i| i != u32::MAX)
            .map(|&i| &listing[i as usize])
        else {
            break Halt::Trap {
                offset: pc,
                reason: "execution ran past the end of code".into(),
            };
        };
        let next = off + instr.size() as u32;
        match m.step(instr, next) {
            Err(reason) => break Halt::Trap { offset: *off, reason },
            Ok(flow) => {
                executed += 1;
                match flow {
                    Flow::Next => pc = next,
                    Flow::Jump(t) => pc = t,
                    Flow::Halt => break Halt::Normal,
                }
            }
        }
    };
    ExecutionResult {
        output: m.output,
        events: m.events,
        halted,
        instructions_executed: executed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vm::asm::assemble;

    fn run(src: &str, input: &[u8]) -> ExecutionResult {
        execute(&assemble(src).unwrap(), input, 10_000)
    }

    #[test]
    fn emits_byte_and_halts() {
        let r = run("PUSH 72\nOUTB\nHALT", b"");
        assert_eq!(r.output, b"H");
        assert_eq!(r.halted, Halt::Normal);
        assert_eq!(r.instructions_executed, 3);
    }

    #[test]
    fn arithmetic_semantics() {
        let r = run(
            "PUSH 7\nPUSH 2\nDIVMOD\nOUTB\nOUTB\nPUSH 3\nPUSH 5\nCMP\nPUSH 1\nADD\nOUTB\nPUSH 0\nPUSH 1\nSUB\nPUSH 64\nSHR\nOUTB\nHALT",
            b"",
        );
        assert_eq!(r.output, vec![1, 3, 0, 0]);
    }

    #[test]
    fn traps_carry_offsets() {
        let r = run("PUSH 1\nPUSH 0\nDIVMOD\nHALT", b"");
        assert_eq!(
            r.halted,
            Halt::Trap {
                offset: 18,
                reason: "division by zero".into()
            }
        );
        assert_eq!(r.instructions_executed, 2);
        assert!(matches!(run("POP\nHALT", b"").halted, Halt::Trap { offset: 0, .. }));
        assert!(matches!(run("RET", b"").halted, Halt::Trap { .. }));
        assert!(matches!(run("PUSH 0\nINREAD\nHALT", b"").halted, Halt::Trap { .. }));
        assert!(matches!(run("PUSH 300\nOUTB\nHALT", b"").halted, Halt::Trap { .. }));
        assert!(matches!(run("PUSH 1\nPOP", b"").halted, Halt::Trap { offset: 10, .. }));
    }

    #[test]
    fn memory_growth_is_bounded() {
        let r = run("PUSH 65528\nLOAD64\nHALT", b"");
        assert_eq!(r.halted, Halt::Normal);
        let r = run("PUSH 65529\nLOAD64\nHALT", b"");
        assert!(matches!(r.halted, Halt::Trap { .. }));
        let r = run("PUSH 0\nNOT\nPUSH 7\nSTORE8\nHALT", b"");
        assert!(matches!(r.halted, Halt::Trap { .. }));
    }

    #[test]
    fn fuel_law() {
        let looping = assemble("top: JMP top").unwrap();
        let r = execute(&looping, b"", 25);
        assert_eq!(r.halted, Halt::FuelExhausted);
        assert_eq!(r.instructions_executed, 25);
        let r = execute(&assemble("HALT").unwrap(), b"", 1);
        assert_eq!((r.halted, r.instructions_executed), (Halt::Normal, 1));
        let r = execute(&assemble("HALT").unwrap(), b"", 0);
        assert_eq!((r.halted, r.instructions_executed), (Halt::FuelExhausted, 0));
    }

    #[test]
    fn events_must_not_go_back_in_time() {
        let ok = run("PUSH 5\nPUSH 0\nPUSH 0\nEMIT a\nPUSH 5\nPUSH 0\nPUSH 1\nEMIT b\nHALT", b"");
        assert_eq!(ok.events.len(), 2);
        assert_eq!(ok.events[1].payload, vec![0]);
        let bad = run("PUSH 5\nPUSH 0\nPUSH 0\nEMIT a\nPUSH 4\nPUSH 0\nPUSH 0\nEMIT a\nHALT", b"");
        assert!(matches!(bad.halted, Halt::Trap { .. }));
        assert_eq!(bad.events.len(), 1);
    }

    #[test]
    fn call_and_return() {
        let r = run(".entry main\nsub: PUSH 66\nOUTB\nRET\nmain: CALL sub\nCALL sub\nHALT", b"");
        assert_eq!(r.output, b"BB");
    }
}
