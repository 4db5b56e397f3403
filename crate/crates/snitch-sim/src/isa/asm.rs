//! Two-pass text assembler.
//!
//! Grammar (one statement per line):
//!
//! ```text
//! line      := { label ":" } [ statement ] [ comment ]
//! comment   := "#" ... | "//" ...
//! statement := directive | instruction
//! directive := ".text" [ addr ]          (at most once with an address,
//!                                         before any instruction)
//!            | ".data" addr              (starts/extends the data span;
//!                                         addresses must ascend, gaps are
//!                                         zero-filled)
//!            | ".word"  value {"," value}    (4 bytes each, little endian)
//!            | ".dword" value {"," value}    (8 bytes each, little endian)
//! ```
//!
//! Operands are comma separated. Integer literals take decimal, `0x` hex, or
//! `0b` binary form, optionally negated, with `_` separators allowed.
//! Registers accept numeric (`x5`, `f9`) and ABI (`t0`, `fa1`) names.
//! Memory operands are `offset(reg)` or `(reg)`. Branch and jump targets are
//! labels or numeric byte offsets relative to the instruction. CSR operands
//! are numeric or one of the named CSRs (`ssr`, `marker`, `mhartid`).
//!
//! Pseudo-instructions: `nop`, `mv`, `li`, `la`, `j`, `csrr`, `csrw`,
//! `csrwi`, `csrsi`, `csrci`, `fmv.d`, `fabs.d`, `fneg.d`.
//!
//! Extension syntax:
//!
//! ```text
//! frep.o rs1, max_inst, stagger_mask, stagger_count
//! frep.i rs1, max_inst, stagger_mask, stagger_count
//! scfgwi rs1, lane, field      field in { base, stride0..stride3,
//!                                         bound0..bound3, commit }
//! ```

use super::*;
use std::fmt;

/// Assembly error with 1-based source position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AsmError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

impl fmt::Display for AsmError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, col {}: {}", self.line, self.col, self.msg)
    }
}

impl std::error::Error for AsmError {}

fn err<T>(line: usize, col: usize, msg: impl Into<String>) -> Result<T, AsmError> {
    Err(AsmError { line, col, msg: msg.into() })
}

#[derive(Debug, Clone)]
struct Token {
    text: String,
    line: usize,
    col: usize,
}

impl Token {
    fn error<T>(&self, msg: impl Into<String>) -> Result<T, AsmError> {
        err(self.line, self.col, msg)
    }
}

#[derive(Debug)]
enum Stmt {
    Instr { mnem: Token, ops: Vec<Token> },
    Word { vals: Vec<Token>, addr: u32 },
    Dword { vals: Vec<Token>, addr: u32 },
}

/// Assemble source text into a program.
pub fn assemble(src: &str) -> Result<Program, AsmError> {
    let mut asm = Assembler::default();
    asm.pass1(src)?;
    asm.pass2()
}

#[derive(Default)]
struct Assembler {
    text_base: u32,
    text_base_explicit: bool,
    instr_count: u32,
    data_base: Option<u32>,
    data_cursor: u32,
    in_data: bool,
    symbols: Vec<(String, u32)>,
    stmts: Vec<Stmt>,
}

fn is_ident(s: &str) -> bool {
    let mut ch = s.chars();
    matches!(ch.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && ch.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Integer literal: decimal, 0x hex, 0b binary, optional leading '-',
/// '_' separators. Hex/binary parse as u64 bit patterns.
pub(crate) fn parse_int_literal(s: &str) -> Option<i64> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, s),
    };
    let body = body.replace('_', "");
    let v = if let Some(h) = body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) {
        u64::from_str_radix(h, 16).ok()? as i64
    } else if let Some(b) = body.strip_prefix("0b").or_else(|| body.strip_prefix("0B")) {
        u64::from_str_radix(b, 2).ok()? as i64
    } else {
        if body.is_empty() || !body.bytes().all(|c| c.is_ascii_digit()) {
            return None;
        }
        body.parse::<i64>().ok()?
    };
    Some(if neg { v.wrapping_neg() } else { v })
}

/// Split an instruction expansion's length without emitting it (pass 1).
fn pseudo_len(mnem: &Token, ops: &[Token]) -> Result<u32, AsmError> {
    match mnem.text.as_str() {
        "li" => {
            if ops.len() != 2 {
                return mnem.error("li takes 2 operands: rd, value");
            }
            let v = match parse_int_literal(&ops[1].text) {
                Some(v) => v,
                None => return ops[1].error("li needs a numeric value (use la for labels)"),
            };
            let (hi, lo) = li_parts(check_li_range(v, &ops[1])?);
            Ok(hi.is_some() as u32 + lo.is_some() as u32)
        }
        "la" => Ok(2),
        _ => Ok(1),
    }
}

fn check_li_range(v: i64, tok: &Token) -> Result<u32, AsmError> {
    if v < -(1 << 31) || v > u32::MAX as i64 {
        return tok.error("value does not fit in 32 bits");
    }
    Ok(v as u32)
}

/// Split a 32-bit value into lui/addi parts. Returns (hi20, lo12); either
/// half may be absent when zero-or-covered.
fn li_parts(v: u32) -> (Option<u32>, Option<i32>) {
    let sv = v as i32;
    if (-2048..=2047).contains(&sv) {
        return (None, Some(sv));
    }
    let mut lo = (v & 0xFFF) as i32;
    if lo >= 0x800 {
        lo -= 0x1000;
    }
    let hi = v.wrapping_sub(lo as u32) >> 12;
    (Some(hi), if lo != 0 { Some(lo) } else { None })
}

impl Assembler {
    fn pass1(&mut self, src: &str) -> Result<(), AsmError> {
        self.text_base = DEFAULT_TEXT_BASE;
        for (lidx, raw) in src.lines().enumerate() {
            let line_no = lidx + 1;
            self.line(raw, line_no)?;
        }
        Ok(())
    }

    fn line(&mut self, raw: &str, line_no: usize) -> Result<(), AsmError> {
        // Strip comments.
        let mut text = raw;
        if let Some(p) = text.find('#') {
            text = &text[..p];
        }
        if let Some(p) = text.find("//") {
            text = &text[..p];
        }

        // Lex: words separated by whitespace/commas; commas split operands.
        let mut toks: Vec<Token> = Vec::new();
        let mut commas: Vec<usize> = Vec::new(); // token index a comma precedes
        let mut cur = String::new();
        let mut cur_col = 0usize;
        let bytes: Vec<char> = text.chars().collect();
        let mut i = 0usize;
        while i <= bytes.len() {
            let c = if i < bytes.len() { bytes[i] } else { ' ' };
            if c.is_whitespace() || c == ',' {
                if !cur.is_empty() {
                    toks.push(Token { text: std::mem::take(&mut cur), line: line_no, col: cur_col + 1 });
                }
                if c == ',' {
                    commas.push(toks.len());
                }
            } else {
                if cur.is_empty() {
                    cur_col = i;
                }
                cur.push(c);
            }
            i += 1;
        }

        // Labels: leading tokens ending in ':'.
        let mut k = 0usize;
        while k < toks.len() {
            let t = &toks[k];
            if let Some(name) = t.text.strip_suffix(':') {
                if !is_ident(name) {
                    return t.error(format!("bad label name '{name}'"));
                }
                let addr = if self.in_data {
                    self.data_cursor
                } else {
                    self.text_base + 4 * self.instr_count
                };
                if self.symbols.iter().any(|(n, _)| n == name) {
                    return t.error(format!("duplicate label '{name}'"));
                }
                self.symbols.push((name.to_string(), addr));
                k += 1;
            } else if t.text.contains(':') {
                return t.error("unexpected ':' inside token");
            } else {
                break;
            }
        }
        if k >= toks.len() {
            return Ok(()); // label-only or empty line
        }

        let mnem = Token {
            text: toks[k].text.to_ascii_lowercase(),
            line: toks[k].line,
            col: toks[k].col,
        };
        let ops: Vec<Token> = toks[k + 1..].to_vec();
        // Every operand after the first must be introduced by a comma.
        for (j, _) in ops.iter().enumerate().skip(1) {
            let tok_index = k + 1 + j;
            if !commas.contains(&tok_index) {
                return ops[j].error("expected ',' before operand");
            }
        }

        if let Some(dir) = mnem.text.strip_prefix('.') {
            return self.directive(dir, &mnem, ops);
        }

        if self.in_data {
            return mnem.error("instruction outside .text section");
        }
        self.instr_count += pseudo_len(&mnem, &ops)?;
        self.stmts.push(Stmt::Instr { mnem, ops });
        Ok(())
    }

    fn directive(&mut self, dir: &str, tok: &Token, ops: Vec<Token>) -> Result<(), AsmError> {
        match dir {
            "text" => {
                if ops.len() > 1 {
                    return tok.error(".text takes at most one address");
                }
                if let Some(a) = ops.first() {
                    if self.instr_count > 0 || self.text_base_explicit {
                        return a.error(".text address must precede all instructions");
                    }
                    let v = parse_int_literal(&a.text)
                        .ok_or_else(|| AsmError { line: a.line, col: a.col, msg: "bad address".into() })?;
                    let v = check_li_range(v, a)?;
                    if v % 4 != 0 {
                        return a.error(".text address must be 4-byte aligned");
                    }
                    self.text_base = v;
                    self.text_base_explicit = true;
                }
                self.in_data = false;
                Ok(())
            }
            "data" => {
                if ops.len() != 1 {
                    return tok.error(".data takes an address");
                }
                let a = &ops[0];
                let v = parse_int_literal(&a.text)
                    .ok_or_else(|| AsmError { line: a.line, col: a.col, msg: "bad address".into() })?;
                let v = check_li_range(v, a)?;
                match self.data_base {
                    None => {
                        self.data_base = Some(v);
                        self.data_cursor = v;
                    }
                    Some(_) => {
                        if v < self.data_cursor {
                            return a.error("data regions must have ascending addresses");
                        }
                        self.data_cursor = v;
                    }
                }
                self.in_data = true;
                Ok(())
            }
            "word" | "dword" => {
                if !self.in_data {
                    return tok.error(format!(".{dir} outside .data section"));
                }
                if ops.is_empty() {
                    return tok.error(format!(".{dir} needs at least one value"));
                }
                let size = if dir == "word" { 4 } else { 8 };
                if self.data_cursor % size != 0 {
                    return tok.error(format!(
                        ".{dir} at address {:#x} is not {size}-byte aligned",
                        self.data_cursor
                    ));
                }
                let addr = self.data_cursor;
                self.data_cursor += size * ops.len() as u32;
                self.stmts.push(if dir == "word" {
                    Stmt::Word { vals: ops, addr }
                } else {
                    Stmt::Dword { vals: ops, addr }
                });
                Ok(())
            }
            _ => tok.error(format!("unknown directive '.{dir}'")),
        }
    }

    fn pass2(mut self) -> Result<Program, AsmError> {
        let mut prog = Program {
            text_base: self.text_base,
            data_base: self.data_base.unwrap_or(0),
            ..Program::default()
        };
        let stmts = std::mem::take(&mut self.stmts);
        for stmt in &stmts {
            match stmt {
                Stmt::Instr { mnem, ops } => self.emit_instr(&mut prog, mnem, ops)?,
                Stmt::Word { vals, addr } => {
                    self.fill_to(&mut prog, *addr);
                    for v in vals {
                        let x = self.value(v)?;
                        if x < -(1 << 31) || x > u32::MAX as i64 {
                            return v.error("value does not fit in 32 bits");
                        }
                        prog.data.extend_from_slice(&(x as u32).to_le_bytes());
                    }
                }
                Stmt::Dword { vals, addr } => {
                    self.fill_to(&mut prog, *addr);
                    for v in vals {
                        let x = self.value(v)?;
                        prog.data.extend_from_slice(&(x as u64).to_le_bytes());
                    }
                }
            }
        }
        prog.symbols = self.symbols;
        Ok(prog)
    }

    fn fill_to(&self, prog: &mut Program, addr: u32) {
        let want = (addr - prog.data_base) as usize;
        debug_assert!(want >= prog.data.len());
        prog.data.resize(want, 0);
    }

    /// Literal or label value.
    fn value(&self, t: &Token) -> Result<i64, AsmError> {
        if let Some(v) = parse_int_literal(&t.text) {
            return Ok(v);
        }
        if is_ident(&t.text) {
            if let Some(&(_, a)) = self.symbols.iter().find(|(n, _)| *n == t.text) {
                return Ok(a as i64);
            }
            return t.error(format!("undefined label '{}'", t.text));
        }
        t.error(format!("bad value '{}'", t.text))
    }

    fn emit_instr(&self, prog: &mut Program, mnem: &Token, ops: &[Token]) -> Result<(), AsmError> {
        use Mnemonic::*;
        let pc = prog.text_base + 4 * prog.instrs.len() as u32;

        let nops = |want: usize, what: &str| -> Result<(), AsmError> {
            if ops.len() != want {
                mnem.error(format!("{} takes {} operand{}: {}", mnem.text, want,
                    if want == 1 { "" } else { "s" }, what))
            } else {
                Ok(())
            }
        };
        let ireg = |t: &Token| -> Result<u8, AsmError> {
            parse_int_reg(&t.text)
                .ok_or_else(|| AsmError { line: t.line, col: t.col, msg: format!("bad integer register '{}'", t.text) })
        };
        let freg = |t: &Token| -> Result<u8, AsmError> {
            parse_fp_reg(&t.text)
                .ok_or_else(|| AsmError { line: t.line, col: t.col, msg: format!("bad FP register '{}'", t.text) })
        };
        let imm_in = |t: &Token, lo: i64, hi: i64| -> Result<i64, AsmError> {
            let v = self.value(t)?;
            if v < lo || v > hi {
                return t.error(format!("immediate {v} out of range [{lo}, {hi}]"));
            }
            Ok(v)
        };
        // "offset(reg)" | "(reg)" with offset a literal or label value.
        let memop = |t: &Token| -> Result<(i64, u8), AsmError> {
            let open = t.text.find('(').ok_or_else(|| AsmError {
                line: t.line, col: t.col, msg: format!("expected offset(reg), got '{}'", t.text),
            })?;
            if !t.text.ends_with(')') {
                return t.error("expected closing ')'");
            }
            let off_s = &t.text[..open];
            let reg_s = &t.text[open + 1..t.text.len() - 1];
            let off = if off_s.is_empty() {
                0
            } else {
                let tok = Token { text: off_s.to_string(), line: t.line, col: t.col };
                let v = self.value(&tok)?;
                if !(-2048..=2047).contains(&v) {
                    return t.error(format!("offset {v} out of range [-2048, 2047]"));
                }
                v
            };
            let rtok = Token { text: reg_s.to_string(), line: t.line, col: t.col + open as usize + 1 };
            Ok((off, ireg(&rtok)?))
        };
        // "(reg)" only, for atomics.
        let memop0 = |t: &Token| -> Result<u8, AsmError> {
            let (off, r) = memop(t)?;
            if off != 0 {
                return t.error("atomics take no address offset: use (reg)");
            }
            Ok(r)
        };
        let csr = |t: &Token| -> Result<i64, AsmError> {
            if let Some(&(_, n)) = CSR_NAMES.iter().find(|(name, _)| *name == t.text) {
                return Ok(n as i64);
            }
            match parse_int_literal(&t.text) {
                Some(v) if (0..=0xFFF).contains(&v) => Ok(v),
                Some(v) => t.error(format!("CSR number {v} out of range [0, 4095]")),
                None => t.error(format!("bad CSR '{}'", t.text)),
            }
        };
        // Branch/jump target: label => pc-relative; numeric => already relative.
        let target = |t: &Token, range: i64| -> Result<i64, AsmError> {
            let off = if parse_int_literal(&t.text).is_some() {
                parse_int_literal(&t.text).unwrap()
            } else {
                self.value(t)? - pc as i64
            };
            if off % 4 != 0 {
                return t.error("target offset must be a multiple of 4");
            }
            if off < -range || off >= range {
                return t.error(format!("target offset {off} out of range"));
            }
            Ok(off)
        };
        let mut push = |i: Instruction| prog.instrs.push(i);
        let mk = |op: Mnemonic| Instruction::new(op);

        match mnem.text.as_str() {
            // ---- integer register-register ----
            m @ ("add" | "sub" | "sll" | "slt" | "sltu" | "xor" | "srl" | "sra" | "or" | "and"
            | "mul" | "mulh" | "mulhsu" | "mulhu" | "div" | "divu" | "rem" | "remu") => {
                nops(3, "rd, rs1, rs2")?;
                let op = match m {
                    "add" => Add, "sub" => Sub, "sll" => Sll, "slt" => Slt, "sltu" => Sltu,
                    "xor" => Xor, "srl" => Srl, "sra" => Sra, "or" => Or, "and" => And,
                    "mul" => Mul, "mulh" => Mulh, "mulhsu" => Mulhsu, "mulhu" => Mulhu,
                    "div" => Div, "divu" => Divu, "rem" => Rem, _ => Remu,
                };
                let mut i = mk(op);
                i.rd = ireg(&ops[0])?;
                i.rs1 = ireg(&ops[1])?;
                i.rs2 = ireg(&ops[2])?;
                push(i);
            }
            // ---- integer register-immediate ----
            m @ ("addi" | "slti" | "sltiu" | "xori" | "ori" | "andi") => {
                nops(3, "rd, rs1, imm")?;
                let op = match m {
                    "addi" => Addi, "slti" => Slti, "sltiu" => Sltiu,
                    "xori" => Xori, "ori" => Ori, _ => Andi,
                };
                let mut i = mk(op);
                i.rd = ireg(&ops[0])?;
                i.rs1 = ireg(&ops[1])?;
                i.imm = imm_in(&ops[2], -2048, 2047)?;
                push(i);
            }
            m @ ("slli" | "srli" | "srai") => {
                nops(3, "rd, rs1, shamt")?;
                let op = match m { "slli" => Slli, "srli" => Srli, _ => Srai };
                let mut i = mk(op);
                i.rd = ireg(&ops[0])?;
                i.rs1 = ireg(&ops[1])?;
                i.imm = imm_in(&ops[2], 0, 31)?;
                push(i);
            }
            m @ ("lui" | "auipc") => {
                nops(2, "rd, imm20")?;
                let mut i = mk(if m == "lui" { Lui } else { Auipc });
                i.rd = ireg(&ops[0])?;
                i.imm = imm_in(&ops[1], 0, 0xF_FFFF)?;
                push(i);
            }
            // ---- loads / stores ----
            m @ ("lb" | "lh" | "lw" | "lbu" | "lhu") => {
                nops(2, "rd, offset(rs1)")?;
                let op = match m { "lb" => Lb, "lh" => Lh, "lw" => Lw, "lbu" => Lbu, _ => Lhu };
                let mut i = mk(op);
                i.rd = ireg(&ops[0])?;
                let (off, base) = memop(&ops[1])?;
                i.imm = off;
                i.rs1 = base;
                push(i);
            }
            m @ ("sb" | "sh" | "sw") => {
                nops(2, "rs2, offset(rs1)")?;
                let op = match m { "sb" => Sb, "sh" => Sh, _ => Sw };
                let mut i = mk(op);
                i.rs2 = ireg(&ops[0])?;
                let (off, base) = memop(&ops[1])?;
                i.imm = off;
                i.rs1 = base;
                push(i);
            }
            // ---- control flow ----
            m @ ("beq" | "bne" | "blt" | "bge" | "bltu" | "bgeu") => {
                nops(3, "rs1, rs2, target")?;
                let op = match m {
                    "beq" => Beq, "bne" => Bne, "blt" => Blt, "bge" => Bge,
                    "bltu" => Bltu, _ => Bgeu,
                };
                let mut i = mk(op);
                i.rs1 = ireg(&ops[0])?;
                i.rs2 = ireg(&ops[1])?;
                i.imm = target(&ops[2], 4096)?;
                push(i);
            }
            "jal" => {
                let mut i = mk(Jal);
                match ops.len() {
                    1 => {
                        i.rd = 1;
                        i.imm = target(&ops[0], 1 << 20)?;
                    }
                    2 => {
                        i.rd = ireg(&ops[0])?;
                        i.imm = target(&ops[1], 1 << 20)?;
                    }
                    _ => return mnem.error("jal takes [rd,] target"),
                }
                push(i);
            }
            "j" => {
                nops(1, "target")?;
                let mut i = mk(Jal);
                i.rd = 0;
                i.imm = target(&ops[0], 1 << 20)?;
                push(i);
            }
            "jalr" => {
                nops(2, "rd, offset(rs1)")?;
                let mut i = mk(Jalr);
                i.rd = ireg(&ops[0])?;
                let (off, base) = memop(&ops[1])?;
                i.imm = off;
                i.rs1 = base;
                push(i);
            }
            // ---- CSR ----
            m @ ("csrrw" | "csrrs" | "csrrc") => {
                nops(3, "rd, csr, rs1")?;
                let op = match m { "csrrw" => Csrrw, "csrrs" => Csrrs, _ => Csrrc };
                let mut i = mk(op);
                i.rd = ireg(&ops[0])?;
                i.imm = csr(&ops[1])?;
                i.rs1 = ireg(&ops[2])?;
                push(i);
            }
            m @ ("csrrwi" | "csrrsi" | "csrrci") => {
                nops(3, "rd, csr, zimm")?;
                let op = match m { "csrrwi" => Csrrwi, "csrrsi" => Csrrsi, _ => Csrrci };
                let mut i = mk(op);
                i.rd = ireg(&ops[0])?;
                i.imm = csr(&ops[1])?;
                i.rs1 = imm_in(&ops[2], 0, 31)? as u8;
                push(i);
            }
            "csrr" => {
                nops(2, "rd, csr")?;
                let mut i = mk(Csrrs);
                i.rd = ireg(&ops[0])?;
                i.imm = csr(&ops[1])?;
                push(i);
            }
            "csrw" => {
                nops(2, "csr, rs")?;
                let mut i = mk(Csrrw);
                i.imm = csr(&ops[0])?;
                i.rs1 = ireg(&ops[1])?;
                push(i);
            }
            m @ ("csrwi" | "csrsi" | "csrci") => {
                nops(2, "csr, zimm")?;
                let op = match m { "csrwi" => Csrrwi, "csrsi" => Csrrsi, _ => Csrrci };
                let mut i = mk(op);
                i.imm = csr(&ops[0])?;
                i.rs1 = imm_in(&ops[1], 0, 31)? as u8;
                push(i);
            }
            "ecall" => {
                nops(0, "")?;
                push(mk(Ecall));
            }
            "wfi" => {
                nops(0, "")?;
                push(mk(Wfi));
            }
            // ---- atomics ----
            "lr.w" => {
                nops(2, "rd, (rs1)")?;
                let mut i = mk(LrW);
                i.rd = ireg(&ops[0])?;
                i.rs1 = memop0(&ops[1])?;
                push(i);
            }
            m @ ("sc.w" | "amoswap.w" | "amoadd.w" | "amoxor.w" | "amoand.w" | "amoor.w"
            | "amomin.w" | "amomax.w" | "amominu.w" | "amomaxu.w") => {
                nops(3, "rd, rs2, (rs1)")?;
                let op = match m {
                    "sc.w" => ScW, "amoswap.w" => AmoswapW, "amoadd.w" => AmoaddW,
                    "amoxor.w" => AmoxorW, "amoand.w" => AmoandW, "amoor.w" => AmoorW,
                    "amomin.w" => AmominW, "amomax.w" => AmomaxW, "amominu.w" => AmominuW,
                    _ => AmomaxuW,
                };
                let mut i = mk(op);
                i.rd = ireg(&ops[0])?;
                i.rs2 = ireg(&ops[1])?;
                i.rs1 = memop0(&ops[2])?;
                push(i);
            }
            // ---- FP memory ----
            "fld" => {
                nops(2, "rd, offset(rs1)")?;
                let mut i = mk(Fld);
                i.rd = freg(&ops[0])?;
                let (off, base) = memop(&ops[1])?;
                i.imm = off;
                i.rs1 = base;
                push(i);
            }
            "fsd" => {
                nops(2, "rs2, offset(rs1)")?;
                let mut i = mk(Fsd);
                i.rs2 = freg(&ops[0])?;
                let (off, base) = memop(&ops[1])?;
                i.imm = off;
                i.rs1 = base;
                push(i);
            }
            // ---- FP arithmetic ----
            m @ ("fadd.d" | "fsub.d" | "fmul.d" | "fsgnj.d" | "fsgnjn.d" | "fsgnjx.d"
            | "fmin.d" | "fmax.d") => {
                nops(3, "rd, rs1, rs2")?;
                let op = match m {
                    "fadd.d" => FaddD, "fsub.d" => FsubD, "fmul.d" => FmulD,
                    "fsgnj.d" => FsgnjD, "fsgnjn.d" => FsgnjnD, "fsgnjx.d" => FsgnjxD,
                    "fmin.d" => FminD, _ => FmaxD,
                };
                let mut i = mk(op);
                i.rd = freg(&ops[0])?;
                i.rs1 = freg(&ops[1])?;
                i.rs2 = freg(&ops[2])?;
                push(i);
            }
            m @ ("fmadd.d" | "fmsub.d" | "fnmsub.d" | "fnmadd.d") => {
                nops(4, "rd, rs1, rs2, rs3")?;
                let op = match m {
                    "fmadd.d" => FmaddD, "fmsub.d" => FmsubD,
                    "fnmsub.d" => FnmsubD, _ => FnmaddD,
                };
                let mut i = mk(op);
                i.rd = freg(&ops[0])?;
                i.rs1 = freg(&ops[1])?;
                i.rs2 = freg(&ops[2])?;
                i.rs3 = freg(&ops[3])?;
                push(i);
            }
            m @ ("feq.d" | "flt.d" | "fle.d") => {
                nops(3, "rd, rs1, rs2")?;
                let op = match m { "feq.d" => FeqD, "flt.d" => FltD, _ => FleD };
                let mut i = mk(op);
                i.rd = ireg(&ops[0])?;
                i.rs1 = freg(&ops[1])?;
                i.rs2 = freg(&ops[2])?;
                push(i);
            }
            m @ ("fcvt.w.d" | "fcvt.wu.d") => {
                if ops.len() != 2 && ops.len() != 3 {
                    return mnem.error(format!("{m} takes rd, rs1 [, rounding-mode]"));
                }
                let mut i = mk(if m == "fcvt.w.d" { FcvtWD } else { FcvtWuD });
                i.rd = ireg(&ops[0])?;
                i.rs1 = freg(&ops[1])?;
                i.rs2 = 7; // dynamic rounding unless spelled out
                if let Some(rm) = ops.get(2) {
                    i.rs2 = match rm.text.as_str() {
                        "rne" => 0, "rtz" => 1, "rdn" => 2, "rup" => 3, "rmm" => 4, "dyn" => 7,
                        other => return rm.error(format!("bad rounding mode '{other}'")),
                    };
                }
                push(i);
            }
            m @ ("fcvt.d.w" | "fcvt.d.wu") => {
                nops(2, "rd, rs1")?;
                let mut i = mk(if m == "fcvt.d.w" { FcvtDW } else { FcvtDWu });
                i.rd = freg(&ops[0])?;
                i.rs1 = ireg(&ops[1])?;
                push(i);
            }
            // ---- FP pseudos ----
            m @ ("fmv.d" | "fabs.d" | "fneg.d") => {
                nops(2, "rd, rs")?;
                let op = match m { "fmv.d" => FsgnjD, "fabs.d" => FsgnjxD, _ => FsgnjnD };
                let mut i = mk(op);
                i.rd = freg(&ops[0])?;
                i.rs1 = freg(&ops[1])?;
                i.rs2 = i.rs1;
                push(i);
            }
            // ---- sequencer / streams ----
            m @ ("frep.o" | "frep.i") => {
                nops(4, "rs1, max_inst, stagger_mask, stagger_count")?;
                let mut i = mk(if m == "frep.o" { FrepO } else { FrepI });
                i.rs1 = ireg(&ops[0])?;
                let max_inst = imm_in(&ops[1], 0, 15)? as u8;
                let stagger_mask = imm_in(&ops[2], 0, 15)? as u8;
                let stagger_count = imm_in(&ops[3], 0, 7)? as u8;
                i.frep = Some(FrepFields {
                    is_outer: m == "frep.o",
                    max_inst,
                    stagger_mask,
                    stagger_count,
                });
                push(i);
            }
            "scfgwi" => {
                nops(3, "rs1, lane, field")?;
                let mut i = mk(Scfgwi);
                i.rs1 = ireg(&ops[0])?;
                let lane = imm_in(&ops[1], 0, 1)?;
                let f = &ops[2];
                let off = match SCFG_FIELDS.iter().find(|(n, _)| *n == f.text) {
                    Some(&(_, o)) => o,
                    None => return f.error(format!("bad stream config field '{}'", f.text)),
                };
                i.imm = (lane as u32 * SCFG_LANE_STRIDE + off) as i64;
                push(i);
            }
            // ---- integer pseudos ----
            "nop" => {
                nops(0, "")?;
                push(mk(Addi));
            }
            "mv" => {
                nops(2, "rd, rs")?;
                let mut i = mk(Addi);
                i.rd = ireg(&ops[0])?;
                i.rs1 = ireg(&ops[1])?;
                push(i);
            }
            "li" => {
                nops(2, "rd, value")?;
                let rd = ireg(&ops[0])?;
                let v = parse_int_literal(&ops[1].text)
                    .ok_or_else(|| AsmError {
                        line: ops[1].line, col: ops[1].col,
                        msg: "li needs a numeric value (use la for labels)".into(),
                    })?;
                let (hi, lo) = li_parts(check_li_range(v, &ops[1])?);
                if let Some(hi) = hi {
                    let mut i = mk(Lui);
                    i.rd = rd;
                    i.imm = hi as i64;
                    push(i);
                }
                if let Some(lo) = lo {
                    let mut i = mk(Addi);
                    i.rd = rd;
                    i.rs1 = if hi.is_some() { rd } else { 0 };
                    i.imm = lo as i64;
                    push(i);
                }
            }
            "la" => {
                nops(2, "rd, label")?;
                let rd = ireg(&ops[0])?;
                let v = self.value(&ops[1])? as u32;
                // Fixed two-instruction expansion keeps pass-1 layout exact.
                let (hi, lo) = li_parts(v);
                let hi = hi.unwrap_or(0);
                let mut i = mk(Lui);
                i.rd = rd;
                i.imm = hi as i64;
                push(i);
                let mut i = mk(Addi);
                i.rd = rd;
                i.rs1 = rd;
                i.imm = lo.unwrap_or(0) as i64;
                push(i);
            }
            // ---- helpful rejections ----
            m if m.ends_with(".s") => {
                return mnem.error(format!(
                    "'{m}': single-precision FP is not implemented; use the .d forms"
                ));
            }
            m @ ("fdiv.d" | "fsqrt.d") => {
                return mnem.error(format!("'{m}' is not implemented by this FPU"));
            }
            m @ ("fmv.x.d" | "fmv.d.x" | "fmv.x.w" | "fmv.w.x") => {
                return mnem.error(format!(
                    "'{m}': no FP<->integer register moves on a 32-bit datapath; \
                     go through memory or use fcvt/feq"
                ));
            }
            other => return mnem.error(format!("unknown mnemonic '{other}'")),
        }
        Ok(())
    }
}
