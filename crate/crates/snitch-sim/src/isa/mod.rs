//! Instruction definitions shared by the assembler, disassembler, and the
//! execution model: mnemonics, operand-field conventions, register naming,
//! and per-instruction classification (issue class, scoreboard sources and
//! destinations, sequencer eligibility).

pub mod asm;
pub mod disasm;

pub use asm::{assemble, AsmError};
pub use disasm::disassemble;

/// Stream-register enable CSR: bit 0 turns `ft0`/`ft1` interception on.
pub const CSR_SSR_ENABLE: u32 = 0x7C0;
/// Measurement-region marker CSR: write 1 to open a region, 0 to close it.
pub const CSR_PERF_MARKER: u32 = 0x7C2;
/// Hart id CSR (read-only).
pub const CSR_MHARTID: u32 = 0xF14;

/// Base address of the instruction segment when `.text` gives none.
pub const DEFAULT_TEXT_BASE: u32 = 0x8000_0000;

/// Every mnemonic the machine executes. Pseudo-instructions (`li`, `mv`,
/// `nop`, `j`, `la`, `csrr`, `csrw`, `csrwi`, `csrsi`, `csrci`, `fmv.d`,
/// `fneg.d`, `fabs.d`) are expanded by the assembler and never appear here.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub enum Mnemonic {
    // RV32I
    Lui,
    Auipc,
    Jal,
    Jalr,
    Beq,
    Bne,
    Blt,
    Bge,
    Bltu,
    Bgeu,
    Lb,
    Lh,
    Lw,
    Lbu,
    Lhu,
    Sb,
    Sh,
    Sw,
    Addi,
    Slti,
    Sltiu,
    Xori,
    Ori,
    Andi,
    Slli,
    Srli,
    Srai,
    Add,
    Sub,
    Sll,
    Slt,
    Sltu,
    Xor,
    Srl,
    Sra,
    Or,
    And,
    Csrrw,
    Csrrs,
    Csrrc,
    Csrrwi,
    Csrrsi,
    Csrrci,
    Ecall,
    Wfi,
    // M
    Mul,
    Mulh,
    Mulhsu,
    Mulhu,
    Div,
    Divu,
    Rem,
    Remu,
    // A
    LrW,
    ScW,
    AmoswapW,
    AmoaddW,
    AmoxorW,
    AmoandW,
    AmoorW,
    AmominW,
    AmomaxW,
    AmominuW,
    AmomaxuW,
    // D
    Fld,
    Fsd,
    FaddD,
    FsubD,
    FmulD,
    FmaddD,
    FmsubD,
    FnmsubD,
    FnmaddD,
    FsgnjD,
    FsgnjnD,
    FsgnjxD,
    FminD,
    FmaxD,
    FeqD,
    FltD,
    FleD,
    FcvtWD,
    FcvtWuD,
    FcvtDW,
    FcvtDWu,
    // FP repetition sequencer
    FrepO,
    FrepI,
    // Stream configuration write
    Scfgwi,
}

/// Which issue path an instruction takes out of the integer core.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum IssueClass {
    /// Executes locally in the integer core (ALU, branches, LSU, CSR, ...).
    Local,
    /// Offloaded to the shared multiply/divide unit.
    MulDiv,
    /// Offloaded to the FP subsystem.
    Fpss,
}

/// Fields of a `frep` instruction. `max_inst` counts the following
/// instructions captured into the sequencer buffer (0..=15). The total
/// iteration count comes from the register named by the instruction's `rs1`
/// at offload time. `stagger_mask` selects which operand fields advance with
/// the iteration index (bit 0 = rs1, 1 = rs2, 2 = rs3, 3 = rd); a staggered
/// field reads `base + (iteration mod (stagger_count + 1))`, wrapping mod 32.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub struct FrepFields {
    pub is_outer: bool,
    pub max_inst: u8,
    pub stagger_mask: u8,
    pub stagger_count: u8,
}

/// One decoded instruction. Field use follows the hardware encoding slots:
///
/// * loads: `rd, imm(rs1)`; stores: data in `rs2`, address `imm(rs1)`
/// * branches: `rs1, rs2`, byte offset in `imm` (target = pc + imm)
/// * `jal`: byte offset in `imm`; `jalr`: target = (`rs1` + `imm`) & !1
/// * CSR ops: CSR number in `imm`; immediate forms keep the 5-bit value in
///   the `rs1` slot (as the encoding does)
/// * `lui`/`auipc`: 20-bit upper value in `imm` (result = imm << 12 [+ pc])
/// * `fcvt.w.d`/`fcvt.wu.d`: rounding mode in `rs2` (7 = dynamic, the
///   default, which resolves to round-to-nearest-even)
/// * `frep.*`: repetition register in `rs1`, the rest in `frep`
/// * `scfgwi`: value register in `rs1`, `imm` = byte offset into the core's
///   stream-configuration window (lane * 0x100 + field offset)
///
/// Unused fields are zero, which makes derived equality meaningful.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Instruction {
    pub op: Mnemonic,
    pub rd: u8,
    pub rs1: u8,
    pub rs2: u8,
    pub rs3: u8,
    pub imm: i64,
    pub frep: Option<FrepFields>,
}

impl Instruction {
    pub fn new(op: Mnemonic) -> Self {
        Instruction { op, rd: 0, rs1: 0, rs2: 0, rs3: 0, imm: 0, frep: None }
    }
}

/// An assembled program: decoded instructions at `text_base` (4 bytes per
/// slot) plus one optional initialized data span. Symbols are kept for
/// debugging and are ignored by equality, so a disassemble/assemble round
/// trip compares equal.
#[derive(Clone, Debug, Default)]
pub struct Program {
    pub text_base: u32,
    pub instrs: Vec<Instruction>,
    pub data_base: u32,
    pub data: Vec<u8>,
    pub symbols: Vec<(String, u32)>,
}

impl PartialEq for Program {
    fn eq(&self, other: &Self) -> bool {
        self.text_base == other.text_base
            && self.instrs == other.instrs
            && self.data_base == other.data_base
            && self.data == other.data
    }
}

impl Program {
    /// Index of the instruction at `pc`, if `pc` lies inside the text span.
    pub fn instr_index(&self, pc: u32) -> Option<usize> {
        if pc < self.text_base || pc % 4 != 0 {
            return None;
        }
        let idx = ((pc - self.text_base) / 4) as usize;
        if idx < self.instrs.len() {
            Some(idx)
        } else {
            None
        }
    }

    pub fn symbol(&self, name: &str) -> Option<u32> {
        self.symbols.iter().find(|(n, _)| n == name).map(|&(_, a)| a)
    }
}

use Mnemonic::*;

/// All mnemonics, for exhaustive table-driven tests.
pub const ALL_MNEMONICS: &[Mnemonic] = &[
    Lui, Auipc, Jal, Jalr, Beq, Bne, Blt, Bge, Bltu, Bgeu, Lb, Lh, Lw, Lbu, Lhu, Sb, Sh, Sw, Addi,
    Slti, Sltiu, Xori, Ori, Andi, Slli, Srli, Srai, Add, Sub, Sll, Slt, Sltu, Xor, Srl, Sra, Or,
    And, Csrrw, Csrrs, Csrrc, Csrrwi, Csrrsi, Csrrci, Ecall, Wfi, Mul, Mulh, Mulhsu, Mulhu, Div,
    Divu, Rem, Remu, LrW, ScW, AmoswapW, AmoaddW, AmoxorW, AmoandW, AmoorW, AmominW, AmomaxW,
    AmominuW, AmomaxuW, Fld, Fsd, FaddD, FsubD, FmulD, FmaddD, FmsubD, FnmsubD, FnmaddD, FsgnjD,
    FsgnjnD, FsgnjxD, FminD, FmaxD, FeqD, FltD, FleD, FcvtWD, FcvtWuD, FcvtDW, FcvtDWu, FrepO,
    FrepI, Scfgwi,
];

impl Mnemonic {
    pub fn name(self) -> &'static str {
        match self {
            Lui => "lui",
            Auipc => "auipc",
            Jal => "jal",
            Jalr => "jalr",
            Beq => "beq",
            Bne => "bne",
            Blt => "blt",
            Bge => "bge",
            Bltu => "bltu",
            Bgeu => "bgeu",
            Lb => "lb",
            Lh => "lh",
            Lw => "lw",
            Lbu => "lbu",
            Lhu => "lhu",
            Sb => "sb",
            Sh => "sh",
            Sw => "sw",
            Addi => "addi",
            Slti => "slti",
            Sltiu => "sltiu",
            Xori => "xori",
            Ori => "ori",
            Andi => "andi",
            Slli => "slli",
            Srli => "srli",
            Srai => "srai",
            Add => "add",
            Sub => "sub",
            Sll => "sll",
            Slt => "slt",
            Sltu => "sltu",
            Xor => "xor",
            Srl => "srl",
            Sra => "sra",
            Or => "or",
            And => "and",
            Csrrw => "csrrw",
            Csrrs => "csrrs",
            Csrrc => "csrrc",
            Csrrwi => "csrrwi",
            Csrrsi => "csrrsi",
            Csrrci => "csrrci",
            Ecall => "ecall",
            Wfi => "wfi",
            Mul => "mul",
            Mulh => "mulh",
            Mulhsu => "mulhsu",
            Mulhu => "mulhu",
            Div => "div",
            Divu => "divu",
            Rem => "rem",
            Remu => "remu",
            LrW => "lr.w",
            ScW => "sc.w",
            AmoswapW => "amoswap.w",
            AmoaddW => "amoadd.w",
            AmoxorW => "amoxor.w",
            AmoandW => "amoand.w",
            AmoorW => "amoor.w",
            AmominW => "amomin.w",
            AmomaxW => "amomax.w",
            AmominuW => "amominu.w",
            AmomaxuW => "amomaxu.w",
            Fld => "fld",
            Fsd => "fsd",
            FaddD => "fadd.d",
            FsubD => "fsub.d",
            FmulD => "fmul.d",
            FmaddD => "fmadd.d",
            FmsubD => "fmsub.d",
            FnmsubD => "fnmsub.d",
            FnmaddD => "fnmadd.d",
            FsgnjD => "fsgnj.d",
            FsgnjnD => "fsgnjn.d",
            FsgnjxD => "fsgnjx.d",
            FminD => "fmin.d",
            FmaxD => "fmax.d",
            FeqD => "feq.d",
            FltD => "flt.d",
            FleD => "fle.d",
            FcvtWD => "fcvt.w.d",
            FcvtWuD => "fcvt.wu.d",
            FcvtDW => "fcvt.d.w",
            FcvtDWu => "fcvt.d.wu",
            FrepO => "frep.o",
            FrepI => "frep.i",
            Scfgwi => "scfgwi",
        }
    }
}

impl Instruction {
    /// Issue path out of the integer core.
    pub fn class(&self) -> IssueClass {
        match self.op {
            Mul | Mulh | Mulhsu | Mulhu | Div | Divu | Rem | Remu => IssueClass::MulDiv,
            Fld | Fsd | FaddD | FsubD | FmulD | FmaddD | FmsubD | FnmsubD | FnmaddD | FsgnjD
            | FsgnjnD | FsgnjxD | FminD | FmaxD | FeqD | FltD | FleD | FcvtWD | FcvtWuD
            | FcvtDW | FcvtDWu | FrepO | FrepI => IssueClass::Fpss,
            _ => IssueClass::Local,
        }
    }

    /// True for instructions the core hands to another unit (mul/div or FPSS).
    pub fn is_offloaded(&self) -> bool {
        self.class() != IssueClass::Local
    }

    /// FP compute as counted by the FPU utilization counter: arithmetic,
    /// fused multiply-add, comparisons, sign injection, min/max, and
    /// conversions. FP loads/stores and `frep` are not compute.
    pub fn is_fp_arith(&self) -> bool {
        matches!(
            self.op,
            FaddD
                | FsubD
                | FmulD
                | FmaddD
                | FmsubD
                | FnmsubD
                | FnmaddD
                | FsgnjD
                | FsgnjnD
                | FsgnjxD
                | FminD
                | FmaxD
                | FeqD
                | FltD
                | FleD
                | FcvtWD
                | FcvtWuD
                | FcvtDW
                | FcvtDWu
        )
    }

    /// An instruction may sit inside a `frep` block only if every operand it
    /// reads or writes is an FP register. Comparisons and conversions talk to
    /// the integer register file and would need the core in the loop, so they
    /// are excluded, as are FP loads/stores (their addresses come from the
    /// core) and `frep` itself.
    pub fn is_sequenceable(&self) -> bool {
        matches!(
            self.op,
            FaddD
                | FsubD
                | FmulD
                | FmaddD
                | FmsubD
                | FnmsubD
                | FnmaddD
                | FsgnjD
                | FsgnjnD
                | FsgnjxD
                | FminD
                | FmaxD
        )
    }

    pub fn is_fp_mem(&self) -> bool {
        matches!(self.op, Fld | Fsd)
    }

    pub fn is_branch(&self) -> bool {
        matches!(self.op, Beq | Bne | Blt | Bge | Bltu | Bgeu)
    }

    pub fn is_int_load(&self) -> bool {
        matches!(self.op, Lb | Lh | Lw | Lbu | Lhu)
    }

    pub fn is_int_store(&self) -> bool {
        matches!(self.op, Sb | Sh | Sw)
    }

    /// Atomics, including load-reserved / store-conditional.
    pub fn is_amo(&self) -> bool {
        matches!(
            self.op,
            LrW | ScW
                | AmoswapW
                | AmoaddW
                | AmoxorW
                | AmoandW
                | AmoorW
                | AmominW
                | AmomaxW
                | AmominuW
                | AmomaxuW
        )
    }

    /// Integer register written, if any. `x0` writes are legal no-ops; the
    /// scoreboard never tracks x0.
    pub fn int_dest(&self) -> Option<u8> {
        match self.op {
            Lui | Auipc | Jal | Jalr | Lb | Lh | Lw | Lbu | Lhu | Addi | Slti | Sltiu | Xori
            | Ori | Andi | Slli | Srli | Srai | Add | Sub | Sll | Slt | Sltu | Xor | Srl | Sra
            | Or | And | Csrrw | Csrrs | Csrrc | Csrrwi | Csrrsi | Csrrci | Mul | Mulh | Mulhsu
            | Mulhu | Div | Divu | Rem | Remu | LrW | ScW | AmoswapW | AmoaddW | AmoxorW
            | AmoandW | AmoorW | AmominW | AmomaxW | AmominuW | AmomaxuW | FeqD | FltD | FleD
            | FcvtWD | FcvtWuD => Some(self.rd),
            _ => None,
        }
    }

    /// Integer registers read (up to two).
    pub fn int_srcs(&self) -> [Option<u8>; 2] {
        match self.op {
            Jalr | Lb | Lh | Lw | Lbu | Lhu | Addi | Slti | Sltiu | Xori | Ori | Andi | Slli
            | Srli | Srai | Csrrw | Csrrs | Csrrc | LrW | Fld | FcvtDW | FcvtDWu | FrepO
            | FrepI | Scfgwi => [Some(self.rs1), None],
            Beq | Bne | Blt | Bge | Bltu | Bgeu | Sb | Sh | Sw | Add | Sub | Sll | Slt | Sltu
            | Xor | Srl | Sra | Or | And | Mul | Mulh | Mulhsu | Mulhu | Div | Divu | Rem
            | Remu | ScW | AmoswapW | AmoaddW | AmoxorW | AmoandW | AmoorW | AmominW | AmomaxW
            | AmominuW | AmomaxuW => [Some(self.rs1), Some(self.rs2)],
            Fsd => [Some(self.rs1), None],
            _ => [None, None],
        }
    }

    /// FP register written, if any.
    pub fn fp_dest(&self) -> Option<u8> {
        match self.op {
            Fld | FaddD | FsubD | FmulD | FmaddD | FmsubD | FnmsubD | FnmaddD | FsgnjD
            | FsgnjnD | FsgnjxD | FminD | FmaxD | FcvtDW | FcvtDWu => Some(self.rd),
            _ => None,
        }
    }

    /// FP registers read (up to three).
    pub fn fp_srcs(&self) -> [Option<u8>; 3] {
        match self.op {
            FaddD | FsubD | FmulD | FsgnjD | FsgnjnD | FsgnjxD | FminD | FmaxD | FeqD | FltD
            | FleD => [Some(self.rs1), Some(self.rs2), None],
            FmaddD | FmsubD | FnmsubD | FnmaddD => [Some(self.rs1), Some(self.rs2), Some(self.rs3)],
            FcvtWD | FcvtWuD => [Some(self.rs1), None, None],
            Fsd => [None, Some(self.rs2), None],
            _ => [None, None, None],
        }
    }
}

/// Canonical ABI names, used by the disassembler.
pub const INT_REG_NAMES: [&str; 32] = [
    "zero", "ra", "sp", "gp", "tp", "t0", "t1", "t2", "s0", "s1", "a0", "a1", "a2", "a3", "a4",
    "a5", "a6", "a7", "s2", "s3", "s4", "s5", "s6", "s7", "s8", "s9", "s10", "s11", "t3", "t4",
    "t5", "t6",
];

pub const FP_REG_NAMES: [&str; 32] = [
    "ft0", "ft1", "ft2", "ft3", "ft4", "ft5", "ft6", "ft7", "fs0", "fs1", "fa0", "fa1", "fa2",
    "fa3", "fa4", "fa5", "fa6", "fa7", "fs2", "fs3", "fs4", "fs5", "fs6", "fs7", "fs8", "fs9",
    "fs10", "fs11", "ft8", "ft9", "ft10", "ft11",
];

/// Parse an integer register name (numeric `x7` or ABI `t2`, plus `fp`).
pub fn parse_int_reg(s: &str) -> Option<u8> {
    if let Some(rest) = s.strip_prefix('x') {
        if let Ok(n) = rest.parse::<u8>() {
            if n < 32 {
                return Some(n);
            }
        }
        return None;
    }
    if s == "fp" {
        return Some(8);
    }
    INT_REG_NAMES.iter().position(|&n| n == s).map(|i| i as u8)
}

/// Parse an FP register name (numeric `f9` or ABI `fa1`).
pub fn parse_fp_reg(s: &str) -> Option<u8> {
    if let Some(rest) = s.strip_prefix('f') {
        if !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit()) {
            if let Ok(n) = rest.parse::<u8>() {
                if n < 32 {
                    return Some(n);
                }
            }
            return None;
        }
    }
    FP_REG_NAMES.iter().position(|&n| n == s).map(|i| i as u8)
}

/// Named CSRs understood by the assembler and printed by the disassembler.
pub const CSR_NAMES: [(&str, u32); 3] = [
    ("ssr", CSR_SSR_ENABLE),
    ("marker", CSR_PERF_MARKER),
    ("mhartid", CSR_MHARTID),
];

/// Field names inside one lane's stream-configuration window, with their
/// byte offsets. The commit field arms the stream: its value packs the
/// dimension count in bits 2..0 and write mode in bit 3.
pub const SCFG_FIELDS: [(&str, u32); 10] = [
    ("base", 0x00),
    ("stride0", 0x10),
    ("stride1", 0x14),
    ("stride2", 0x18),
    ("stride3", 0x1C),
    ("bound0", 0x20),
    ("bound1", 0x24),
    ("bound2", 0x28),
    ("bound3", 0x2C),
    ("commit", 0x30),
];

/// Bytes occupied by one lane's configuration window.
pub const SCFG_LANE_STRIDE: u32 = 0x100;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_mnemonic_has_exactly_one_issue_class() {
        for &m in ALL_MNEMONICS {
            let i = Instruction::new(m);
            // `class()` is total by construction; check the partition against
            // the offload flag.
            match i.class() {
                IssueClass::Local => assert!(!i.is_offloaded(), "{}", m.name()),
                IssueClass::MulDiv | IssueClass::Fpss => {
                    assert!(i.is_offloaded(), "{}", m.name())
                }
            }
        }
    }

    #[test]
    fn classification_table() {
        // (mnemonic, class, fp_arith, sequenceable, fp_mem)
        let table: &[(Mnemonic, IssueClass, bool, bool, bool)] = &[
            (Addi, IssueClass::Local, false, false, false),
            (Lw, IssueClass::Local, false, false, false),
            (Sw, IssueClass::Local, false, false, false),
            (Beq, IssueClass::Local, false, false, false),
            (Csrrwi, IssueClass::Local, false, false, false),
            (Ecall, IssueClass::Local, false, false, false),
            (Wfi, IssueClass::Local, false, false, false),
            (AmoaddW, IssueClass::Local, false, false, false),
            (LrW, IssueClass::Local, false, false, false),
            (Scfgwi, IssueClass::Local, false, false, false),
            (Mul, IssueClass::MulDiv, false, false, false),
            (Div, IssueClass::MulDiv, false, false, false),
            (Rem, IssueClass::MulDiv, false, false, false),
            (Fld, IssueClass::Fpss, false, false, true),
            (Fsd, IssueClass::Fpss, false, false, true),
            (FaddD, IssueClass::Fpss, true, true, false),
            (FsubD, IssueClass::Fpss, true, true, false),
            (FmulD, IssueClass::Fpss, true, true, false),
            (FmaddD, IssueClass::Fpss, true, true, false),
            (FmsubD, IssueClass::Fpss, true, true, false),
            (FnmsubD, IssueClass::Fpss, true, true, false),
            (FnmaddD, IssueClass::Fpss, true, true, false),
            (FsgnjD, IssueClass::Fpss, true, true, false),
            (FsgnjnD, IssueClass::Fpss, true, true, false),
            (FsgnjxD, IssueClass::Fpss, true, true, false),
            (FminD, IssueClass::Fpss, true, true, false),
            (FmaxD, IssueClass::Fpss, true, true, false),
            // Integer-destination FP ops: compute, but not sequenceable.
            (FeqD, IssueClass::Fpss, true, false, false),
            (FltD, IssueClass::Fpss, true, false, false),
            (FleD, IssueClass::Fpss, true, false, false),
            (FcvtWD, IssueClass::Fpss, true, false, false),
            (FcvtWuD, IssueClass::Fpss, true, false, false),
            // Integer-source conversions: compute, but not sequenceable.
            (FcvtDW, IssueClass::Fpss, true, false, false),
            (FcvtDWu, IssueClass::Fpss, true, false, false),
            (FrepO, IssueClass::Fpss, false, false, false),
            (FrepI, IssueClass::Fpss, false, false, false),
        ];
        for &(m, class, arith, seq, fpmem) in table {
            let i = Instruction::new(m);
            assert_eq!(i.class(), class, "{}", m.name());
            assert_eq!(i.is_fp_arith(), arith, "{}", m.name());
            assert_eq!(i.is_sequenceable(), seq, "{}", m.name());
            assert_eq!(i.is_fp_mem(), fpmem, "{}", m.name());
        }
    }

    #[test]
    fn sequenceable_implies_fp_arith_and_fpss() {
        for &m in ALL_MNEMONICS {
            let i = Instruction::new(m);
            if i.is_sequenceable() {
                assert!(i.is_fp_arith(), "{}", m.name());
                assert_eq!(i.class(), IssueClass::Fpss, "{}", m.name());
                // No integer registers touched at all.
                assert_eq!(i.int_srcs(), [None, None], "{}", m.name());
                assert_eq!(i.int_dest(), None, "{}", m.name());
            }
        }
    }

    #[test]
    fn fp_mem_is_offloaded_but_not_arith() {
        for m in [Fld, Fsd] {
            let i = Instruction::new(m);
            assert!(i.is_offloaded());
            assert!(!i.is_fp_arith());
            assert!(!i.is_sequenceable());
        }
    }

    #[test]
    fn operand_conventions() {
        // sw a1, 12(a0): data in rs2, base in rs1
        let mut sw = Instruction::new(Sw);
        sw.rs1 = 10;
        sw.rs2 = 11;
        sw.imm = 12;
        assert_eq!(sw.int_srcs(), [Some(10), Some(11)]);
        assert_eq!(sw.int_dest(), None);

        // fsd fa0, 0(a1): fp data in rs2, int base in rs1
        let mut fsd = Instruction::new(Fsd);
        fsd.rs1 = 11;
        fsd.rs2 = 10;
        assert_eq!(fsd.int_srcs(), [Some(11), None]);
        assert_eq!(fsd.fp_srcs(), [None, Some(10), None]);
        assert_eq!(fsd.fp_dest(), None);

        // feq.d writes an integer register from FP sources.
        let mut feq = Instruction::new(FeqD);
        feq.rd = 10;
        feq.rs1 = 1;
        feq.rs2 = 2;
        assert_eq!(feq.int_dest(), Some(10));
        assert_eq!(feq.fp_srcs(), [Some(1), Some(2), None]);

        // fcvt.d.w reads an integer register and writes an FP register.
        let mut cvt = Instruction::new(FcvtDW);
        cvt.rd = 3;
        cvt.rs1 = 10;
        assert_eq!(cvt.int_srcs(), [Some(10), None]);
        assert_eq!(cvt.fp_dest(), Some(3));

        // fmadd.d fa0, fa1, fa2, fa3
        let mut fma = Instruction::new(FmaddD);
        fma.rd = 10;
        fma.rs1 = 11;
        fma.rs2 = 12;
        fma.rs3 = 13;
        assert_eq!(fma.fp_srcs(), [Some(11), Some(12), Some(13)]);
        assert_eq!(fma.fp_dest(), Some(10));
    }

    #[test]
    fn register_name_round_trip() {
        for i in 0..32u8 {
            assert_eq!(parse_int_reg(INT_REG_NAMES[i as usize]), Some(i));
            assert_eq!(parse_int_reg(&format!("x{i}")), Some(i));
            assert_eq!(parse_fp_reg(FP_REG_NAMES[i as usize]), Some(i));
            assert_eq!(parse_fp_reg(&format!("f{i}")), Some(i));
        }
        assert_eq!(parse_int_reg("fp"), Some(8));
        assert_eq!(parse_int_reg("x32"), None);
        assert_eq!(parse_int_reg("q1"), None);
        assert_eq!(parse_fp_reg("f32"), None);
        assert_eq!(parse_fp_reg("fx"), None);
    }
}
