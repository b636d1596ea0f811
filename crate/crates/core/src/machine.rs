//! Deterministic simulator for a reduced x86 instruction set.
//!
//! Programs are straight-line sequences over four opcodes (`addl`, `subl`,
//! `movl`, `imull`), four 32-bit registers, single-digit immediates, and an
//! optional block of four stack slots. Text form is AT&T syntax with the
//! source operand first: `addl $3, %eax`. Arithmetic wraps at 32 bits.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Deref;
use core::str::FromStr;

/// One of the four general-purpose registers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Register {
    Eax,
    Ebx,
    Ecx,
    Edx,
}

impl Register {
    pub const ALL: [Register; 4] = [Register::Eax, Register::Ebx, Register::Ecx, Register::Edx];

    pub fn index(self) -> usize {
        match self {
            Register::Eax => 0,
            Register::Ebx => 1,
            Register::Ecx => 2,
            Register::Edx => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Register::Eax => "%eax",
            Register::Ebx => "%ebx",
            Register::Ecx => "%ecx",
            Register::Edx => "%edx",
        }
    }
}

impl fmt::Display for Register {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One of the four addressable stack slots.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MemSlot {
    M0,
    M4,
    M8,
    M12,
}

impl MemSlot {
    pub const ALL: [MemSlot; 4] = [MemSlot::M0, MemSlot::M4, MemSlot::M8, MemSlot::M12];

    pub fn index(self) -> usize {
        match self {
            MemSlot::M0 => 0,
            MemSlot::M4 => 1,
            MemSlot::M8 => 2,
            MemSlot::M12 => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MemSlot::M0 => "-0(%rbp)",
            MemSlot::M4 => "-4(%rbp)",
            MemSlot::M8 => "-8(%rbp)",
            MemSlot::M12 => "-12(%rbp)",
        }
    }
}

impl fmt::Display for MemSlot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// An instruction operand: a digit immediate, a register, or a stack slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Operand {
    Imm(u8),
    Reg(Register),
    Mem(MemSlot),
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Imm(d) => write!(f, "${d}"),
            Operand::Reg(r) => f.write_str(r.name()),
            Operand::Mem(m) => f.write_str(m.name()),
        }
    }
}

/// One of the four supported opcodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Opcode {
    Addl,
    Subl,
    Movl,
    Imull,
}

impl Opcode {
    pub const ALL: [Opcode; 4] = [Opcode::Addl, Opcode::Subl, Opcode::Movl, Opcode::Imull];

    pub fn index(self) -> usize {
        match self {
            Opcode::Addl => 0,
            Opcode::Subl => 1,
            Opcode::Movl => 2,
            Opcode::Imull => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Opcode::Addl => "addl",
            Opcode::Subl => "subl",
            Opcode::Movl => "movl",
            Opcode::Imull => "imull",
        }
    }

    fn from_name(s: &str) -> Option<Opcode> {
        Opcode::ALL.into_iter().find(|op| op.name() == s)
    }
}

impl fmt::Display for Opcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A structural rule an instruction can break even when it tokenizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintViolation {
    /// The destination operand is an immediate.
    ImmediateDst,
    /// Both operands address memory.
    MemToMem,
    /// `imull` with a memory destination.
    ImullMemDst,
    /// An immediate outside 0..=9.
    ImmediateRange,
}

impl fmt::Display for ConstraintViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = match self {
            ConstraintViolation::ImmediateDst => "destination cannot be an immediate",
            ConstraintViolation::MemToMem => "source and destination cannot both be memory",
            ConstraintViolation::ImullMemDst => "imull destination must be a register",
            ConstraintViolation::ImmediateRange => "immediates must be single digits 0-9",
        };
        f.write_str(msg)
    }
}

impl core::error::Error for ConstraintViolation {}

/// A single two-operand instruction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Instruction {
    pub opcode: Opcode,
    pub src: Operand,
    pub dst: Operand,
}

impl Instruction {
    /// Builds an instruction, rejecting operand combinations the machine
    /// does not support.
    pub fn new(opcode: Opcode, src: Operand, dst: Operand) -> Result<Instruction, ConstraintViolation> {
        let instr = Instruction { opcode, src, dst };
        instr.validate()?;
        Ok(instr)
    }

    /// Checks the operand constraints without executing.
    pub fn validate(&self) -> Result<(), ConstraintViolation> {
        if let Operand::Imm(d) = self.src {
            if d > 9 {
                return Err(ConstraintViolation::ImmediateRange);
            }
        }
        match self.dst {
            Operand::Imm(_) => return Err(ConstraintViolation::ImmediateDst),
            Operand::Mem(_) => {
                if matches!(self.src, Operand::Mem(_)) {
                    return Err(ConstraintViolation::MemToMem);
                }
                if self.opcode == Opcode::Imull {
                    return Err(ConstraintViolation::ImullMemDst);
                }
            }
            Operand::Reg(_) => {}
        }
        Ok(())
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}, {}", self.opcode, self.src, self.dst)
    }
}

/// Why a line of text failed to become an instruction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParseError {
    /// The line does not tokenize as `opcode src, dst`.
    Syntax(String),
    /// The line tokenizes but breaks an operand rule.
    Constraint(ConstraintViolation),
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseError::Syntax(msg) => write!(f, "syntax error: {msg}"),
            ParseError::Constraint(v) => write!(f, "constraint error: {v}"),
        }
    }
}

impl core::error::Error for ParseError {}

fn syntax(msg: &str) -> ParseError {
    ParseError::Syntax(String::from(msg))
}

fn parse_operand(text: &str) -> Result<Operand, ParseError> {
    let text = text.trim();
    if text.is_empty() {
        return Err(syntax("empty operand"));
    }
    if let Some(digits) = text.strip_prefix('$') {
        let value: u32 = digits
            .parse()
            .map_err(|_| syntax("immediate must be a decimal digit"))?;
        if value > 9 {
            return Err(ParseError::Constraint(ConstraintViolation::ImmediateRange));
        }
        return Ok(Operand::Imm(value as u8));
    }
    for r in Register::ALL {
        if r.name() == text {
            return Ok(Operand::Reg(r));
        }
    }
    for m in MemSlot::ALL {
        if m.name() == text {
            return Ok(Operand::Mem(m));
        }
    }
    Err(syntax("unrecognized operand"))
}

impl FromStr for Instruction {
    type Err = ParseError;

    fn from_str(line: &str) -> Result<Instruction, ParseError> {
        let line = line.trim();
        let (mnemonic, rest) = line
            .split_once(char::is_whitespace)
            .ok_or_else(|| syntax("expected `opcode src, dst`"))?;
        let opcode = Opcode::from_name(mnemonic).ok_or_else(|| syntax("unknown opcode"))?;
        let mut operands = rest.split(',');
        let src = operands.next().ok_or_else(|| syntax("missing source operand"))?;
        let dst = operands
            .next()
            .ok_or_else(|| syntax("missing destination operand"))?;
        if operands.next().is_some() {
            return Err(syntax("expected exactly two operands"));
        }
        let instr = Instruction {
            opcode,
            src: parse_operand(src)?,
            dst: parse_operand(dst)?,
        };
        instr.validate().map_err(ParseError::Constraint)?;
        Ok(instr)
    }
}

/// A straight-line program.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Program(pub Vec<Instruction>);

impl Program {
    /// Parses one instruction per line. Blank lines and lines starting with
    /// `#` are skipped; errors carry the 1-based line number.
    pub fn parse(text: &str) -> Result<Program, ProgramParseError> {
        let mut instructions = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let instr: Instruction = line
                .parse()
                .map_err(|error| ProgramParseError { line: i + 1, error })?;
            instructions.push(instr);
        }
        Ok(Program(instructions))
    }
}

impl Deref for Program {
    type Target = [Instruction];

    fn deref(&self) -> &[Instruction] {
        &self.0
    }
}

impl FromIterator<Instruction> for Program {
    fn from_iter<I: IntoIterator<Item = Instruction>>(iter: I) -> Program {
        Program(iter.into_iter().collect())
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for instr in &self.0 {
            writeln!(f, "{instr}")?;
        }
        Ok(())
    }
}

/// A parse failure located in a multi-line program.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProgramParseError {
    pub line: usize,
    pub error: ParseError,
}

impl fmt::Display for ProgramParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.error)
    }
}

impl core::error::Error for ProgramParseError {}

/// Full machine state: four registers and, when enabled, four stack slots.
///
/// RAM slots are stored in address order `[-0, -4, -8, -12]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MachineState {
    pub regs: [i32; 4],
    pub ram: Option<[i32; 4]>,
}

impl MachineState {
    pub fn regs_only(regs: [i32; 4]) -> MachineState {
        MachineState { regs, ram: None }
    }

    pub fn with_ram(regs: [i32; 4], ram: [i32; 4]) -> MachineState {
        MachineState { regs, ram: Some(ram) }
    }

    pub fn zeroed(ram_enabled: bool) -> MachineState {
        MachineState {
            regs: [0; 4],
            ram: if ram_enabled { Some([0; 4]) } else { None },
        }
    }

    /// The active cells in display order: the first `num_registers`
    /// registers, then the stack slots when the space enables them.
    pub fn cells(&self, space: SpaceConfig) -> Result<Vec<i32>, ConfigMismatch> {
        if space.ram_enabled != self.ram.is_some() {
            return Err(ConfigMismatch);
        }
        let mut out = Vec::with_capacity(space.cells());
        out.extend_from_slice(&self.regs[..space.num_registers]);
        if let Some(ram) = self.ram {
            out.extend_from_slice(&ram);
        }
        Ok(out)
    }
}

/// Why a single step could not execute.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepError {
    IllegalInstruction(ConstraintViolation),
    /// A memory operand was used on a state with no RAM block.
    RamDisabled,
}

impl fmt::Display for StepError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepError::IllegalInstruction(v) => write!(f, "illegal instruction: {v}"),
            StepError::RamDisabled => f.write_str("memory operand used without RAM"),
        }
    }
}

impl core::error::Error for StepError {}

/// A step failure located in a program run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunError {
    /// 0-based index of the failing instruction.
    pub index: usize,
    pub error: StepError,
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "instruction {}: {}", self.index, self.error)
    }
}

impl core::error::Error for RunError {}

fn read_operand(state: &MachineState, op: Operand) -> Result<i32, StepError> {
    match op {
        Operand::Imm(d) => Ok(d as i32),
        Operand::Reg(r) => Ok(state.regs[r.index()]),
        Operand::Mem(m) => state
            .ram
            .map(|ram| ram[m.index()])
            .ok_or(StepError::RamDisabled),
    }
}

fn write_operand(state: &mut MachineState, op: Operand, value: i32) -> Result<(), StepError> {
    match op {
        Operand::Imm(_) => Err(StepError::IllegalInstruction(ConstraintViolation::ImmediateDst)),
        Operand::Reg(r) => {
            state.regs[r.index()] = value;
            Ok(())
        }
        Operand::Mem(m) => match state.ram.as_mut() {
            Some(ram) => {
                ram[m.index()] = value;
                Ok(())
            }
            None => Err(StepError::RamDisabled),
        },
    }
}

/// Executes one instruction against a state, producing the next state.
/// Arithmetic wraps at 32 bits.
pub fn step(state: &MachineState, instr: &Instruction) -> Result<MachineState, StepError> {
    instr.validate().map_err(StepError::IllegalInstruction)?;
    let src = read_operand(state, instr.src)?;
    let old = read_operand(state, instr.dst)?;
    let value = match instr.opcode {
        Opcode::Addl => old.wrapping_add(src),
        Opcode::Subl => old.wrapping_sub(src),
        Opcode::Movl => src,
        Opcode::Imull => old.wrapping_mul(src),
    };
    let mut next = *state;
    write_operand(&mut next, instr.dst, value)?;
    Ok(next)
}

/// Executes a whole program front to back.
pub fn run(state: &MachineState, program: &Program) -> Result<MachineState, RunError> {
    let mut current = *state;
    for (index, instr) in program.iter().enumerate() {
        current = step(&current, instr).map_err(|error| RunError { index, error })?;
    }
    Ok(current)
}

/// Two states were compared whose RAM blocks do not both exist.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConfigMismatch;

impl fmt::Display for ConfigMismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("states have different RAM configurations")
    }
}

impl core::error::Error for ConfigMismatch {}

/// Compares two states cell for cell. Errors when exactly one of them has a
/// RAM block.
pub fn state_equals(a: &MachineState, b: &MachineState) -> Result<bool, ConfigMismatch> {
    if a.ram.is_some() != b.ram.is_some() {
        return Err(ConfigMismatch);
    }
    Ok(a == b)
}

/// Which cells instructions may touch: how many registers are live and
/// whether the stack slots exist.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SpaceConfig {
    pub num_registers: usize,
    pub ram_enabled: bool,
}

impl SpaceConfig {
    pub fn new(num_registers: usize, ram_enabled: bool) -> SpaceConfig {
        assert!(
            (1..=4).contains(&num_registers),
            "num_registers must be 1..=4, got {num_registers}"
        );
        SpaceConfig { num_registers, ram_enabled }
    }

    /// Number of observable cells: live registers plus stack slots.
    pub fn cells(&self) -> usize {
        self.num_registers + if self.ram_enabled { 4 } else { 0 }
    }

    /// The live registers, in display order.
    pub fn registers(&self) -> &'static [Register] {
        &Register::ALL[..self.num_registers]
    }
}

impl Default for SpaceConfig {
    fn default() -> SpaceConfig {
        SpaceConfig { num_registers: 4, ram_enabled: false }
    }
}

/// The complete, ordered set of legal instructions for a space.
///
/// Order is opcode-major; within an opcode, sources run registers, then
/// immediates, then stack slots, and destinations run registers, then
/// stack slots.
#[derive(Clone, Debug)]
pub struct ActionSpace {
    config: SpaceConfig,
    actions: Vec<Instruction>,
    index: BTreeMap<Instruction, u16>,
}

impl ActionSpace {
    pub fn enumerate(config: SpaceConfig) -> ActionSpace {
        assert!(
            (1..=4).contains(&config.num_registers),
            "num_registers must be 1..=4, got {}",
            config.num_registers
        );
        let mut sources = Vec::new();
        for r in config.registers() {
            sources.push(Operand::Reg(*r));
        }
        for d in 0..=9u8 {
            sources.push(Operand::Imm(d));
        }
        let mut dests: Vec<Operand> = config.registers().iter().map(|r| Operand::Reg(*r)).collect();
        if config.ram_enabled {
            for m in MemSlot::ALL {
                sources.push(Operand::Mem(m));
                dests.push(Operand::Mem(m));
            }
        }

        let mut actions = Vec::new();
        for opcode in Opcode::ALL {
            for &src in &sources {
                for &dst in &dests {
                    if let Ok(instr) = Instruction::new(opcode, src, dst) {
                        actions.push(instr);
                    }
                }
            }
        }
        let index = actions
            .iter()
            .enumerate()
            .map(|(i, instr)| (*instr, i as u16))
            .collect();
        ActionSpace { config, actions, index }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn get(&self, action: u16) -> Instruction {
        self.actions[action as usize]
    }

    pub fn index_of(&self, instr: &Instruction) -> Option<u16> {
        self.index.get(instr).copied()
    }

    pub fn actions(&self) -> &[Instruction] {
        &self.actions
    }

    pub fn config(&self) -> SpaceConfig {
        self.config
    }
}
