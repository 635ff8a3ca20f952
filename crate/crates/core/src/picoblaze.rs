//! A five-instruction subset of the KCPSM6 (PicoBlaze) soft core.
//!
//! Encodings follow KCPSM6 where the subset overlaps it; the all-zero word is
//! repurposed as HALT so bounded runs terminate.
//!
//! | instruction      | 18-bit encoding   |
//! |------------------|-------------------|
//! | `HALT`           | `00000`           |
//! | `LOAD sX, kk`    | `01xkk`           |
//! | `ADD sX, kk`     | `11xkk`           |
//! | `JUMP aaa`       | `22aaa`           |
//! | `OUTPUT sX, pp`  | `2Dxpp`           |
//!
//! Only the low 18 bits of a BRAM word are decoded; fetch requires an open
//! [`ExecutionGate`].

use std::fmt;

use thiserror::Error;

use crate::authenticator::ExecutionGate;
use crate::image::{BramImage, ProgramHex, INSTRUCTION_MASK};

const OP_LOAD: u32 = 0x01;
const OP_ADD: u32 = 0x11;
const OP_JUMP: u32 = 0x22;
const OP_OUTPUT: u32 = 0x2D;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CoreError {
    #[error("instruction fetch refused: execution gate is closed")]
    GateClosed,
    #[error("undecodable instruction {word:#07x} at {pc:#05x}")]
    Undecodable { pc: usize, word: u32 },
    #[error("program counter {pc:#x} outside the {limit}-word program region")]
    PcOutOfRange { pc: usize, limit: usize },
    #[error("core is halted")]
    Halted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Instruction {
    Halt,
    Load { reg: u8, imm: u8 },
    Add { reg: u8, imm: u8 },
    Jump { addr: u16 },
    Output { reg: u8, port: u8 },
}

impl Instruction {
    pub fn decode(word: u32) -> Option<Instruction> {
        let inst = word & INSTRUCTION_MASK;
        let op = inst >> 12;
        let reg = ((inst >> 8) & 0xF) as u8;
        let low = (inst & 0xFF) as u8;
        Some(match op {
            0x00 if inst == 0 => Instruction::Halt,
            OP_LOAD => Instruction::Load { reg, imm: low },
            OP_ADD => Instruction::Add { reg, imm: low },
            OP_JUMP => Instruction::Jump {
                addr: (inst & 0xFFF) as u16,
            },
            OP_OUTPUT => Instruction::Output { reg, port: low },
            _ => return None,
        })
    }

    pub fn encode(self) -> u32 {
        let rk = |op: u32, reg: u8, low: u8| op << 12 | (reg as u32 & 0xF) << 8 | low as u32;
        match self {
            Instruction::Halt => 0,
            Instruction::Load { reg, imm } => rk(OP_LOAD, reg, imm),
            Instruction::Add { reg, imm } => rk(OP_ADD, reg, imm),
            Instruction::Jump { addr } => OP_JUMP << 12 | (addr as u32 & 0xFFF),
            Instruction::Output { reg, port } => rk(OP_OUTPUT, reg, port),
        }
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Instruction::Halt => write!(f, "HALT"),
            Instruction::Load { reg, imm } => write!(f, "LOAD s{reg:X}, {imm:02X}"),
            Instruction::Add { reg, imm } => write!(f, "ADD s{reg:X}, {imm:02X}"),
            Instruction::Jump { addr } => write!(f, "JUMP {addr:03X}"),
            Instruction::Output { reg, port } => write!(f, "OUTPUT s{reg:X}, {port:02X}"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CoreState {
    pub pc: usize,
    pub registers: [u8; 16],
    pub output_port: u8,
    pub halted: bool,
    pub instructions_retired: u64,
}

impl CoreState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Execute one instruction. Returns the value written if the
    /// instruction was an OUTPUT.
    pub fn step(&mut self, image: &BramImage, gate: &ExecutionGate) -> Result<Option<u8>, CoreError> {
        if !gate.is_enabled() {
            return Err(CoreError::GateClosed);
        }
        if self.halted {
            return Err(CoreError::Halted);
        }
        let region = image.program_region();
        let word = *region.get(self.pc).ok_or(CoreError::PcOutOfRange {
            pc: self.pc,
            limit: region.len(),
        })?;
        let inst = Instruction::decode(word).ok_or(CoreError::Undecodable { pc: self.pc, word })?;

        let mut written = None;
        let mut next_pc = self.pc + 1;
        match inst {
            Instruction::Halt => {
                self.halted = true;
                next_pc = self.pc;
            }
            Instruction::Load { reg, imm } => self.registers[reg as usize] = imm,
            Instruction::Add { reg, imm } => {
                let r = &mut self.registers[reg as usize];
                *r = r.wrapping_add(imm);
            }
            Instruction::Jump { addr } => next_pc = addr as usize,
            Instruction::Output { reg, .. } => {
                self.output_port = self.registers[reg as usize];
                written = Some(self.output_port);
            }
        }
        self.pc = next_pc;
        self.instructions_retired += 1;
        Ok(written)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunOutcome {
    pub state: CoreState,
    pub port_writes: Vec<u8>,
}

/// Step until HALT or `max_steps` instructions.
pub fn run(
    mut core: CoreState,
    image: &BramImage,
    gate: &ExecutionGate,
    max_steps: u64,
) -> Result<RunOutcome, CoreError> {
    let mut port_writes = Vec::new();
    for _ in 0..max_steps {
        if core.halted {
            break;
        }
        if let Some(v) = core.step(image, gate)? {
            port_writes.push(v);
        }
    }
    Ok(RunOutcome {
        state: core,
        port_writes,
    })
}

/// Eight LEDs lit one at a time, in rotation, forever.
pub fn ring_counter_program() -> ProgramHex {
    let mut prog = vec![Instruction::Load { reg: 0, imm: 0x01 }];
    prog.push(Instruction::Output { reg: 0, port: 0 });
    // Adding the current value doubles it; 0x80 + 0x81 wraps back to 0x01.
    for step in [0x01, 0x02, 0x04, 0x08, 0x10, 0x20, 0x40] {
        prog.push(Instruction::Add { reg: 0, imm: step });
        prog.push(Instruction::Output { reg: 0, port: 0 });
    }
    prog.push(Instruction::Add { reg: 0, imm: 0x81 });
    prog.push(Instruction::Jump { addr: 1 });
    ProgramHex::new(prog.into_iter().map(Instruction::encode).collect())
        .expect("demo encodes within 18 bits")
}
