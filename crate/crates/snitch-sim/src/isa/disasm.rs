//! Disassembler. Output is canonical assembler input: ABI register names,
//! named CSRs where known, numeric pc-relative branch targets. Reassembling
//! the output reproduces the original program (symbols excepted — they do
//! not affect execution and are ignored by `Program` equality).

use super::*;
use std::fmt::Write;

fn csr_name(n: i64) -> String {
    match CSR_NAMES.iter().find(|&&(_, v)| v as i64 == n) {
        Some(&(name, _)) => name.to_string(),
        None => format!("{n:#x}"),
    }
}

/// Render one instruction (no trailing newline).
pub fn disassemble_instr(i: &Instruction) -> String {
    use Mnemonic::*;
    let x = |r: u8| INT_REG_NAMES[r as usize];
    let f = |r: u8| FP_REG_NAMES[r as usize];
    let n = i.op.name();
    match i.op {
        Add | Sub | Sll | Slt | Sltu | Xor | Srl | Sra | Or | And | Mul | Mulh | Mulhsu
        | Mulhu | Div | Divu | Rem | Remu => {
            format!("{n} {}, {}, {}", x(i.rd), x(i.rs1), x(i.rs2))
        }
        Addi | Slti | Sltiu | Xori | Ori | Andi | Slli | Srli | Srai => {
            format!("{n} {}, {}, {}", x(i.rd), x(i.rs1), i.imm)
        }
        Lui | Auipc => format!("{n} {}, {:#x}", x(i.rd), i.imm),
        Jal => format!("{n} {}, {}", x(i.rd), i.imm),
        Jalr => format!("{n} {}, {}({})", x(i.rd), i.imm, x(i.rs1)),
        Beq | Bne | Blt | Bge | Bltu | Bgeu => {
            format!("{n} {}, {}, {}", x(i.rs1), x(i.rs2), i.imm)
        }
        Lb | Lh | Lw | Lbu | Lhu => format!("{n} {}, {}({})", x(i.rd), i.imm, x(i.rs1)),
        Sb | Sh | Sw => format!("{n} {}, {}({})", x(i.rs2), i.imm, x(i.rs1)),
        Csrrw | Csrrs | Csrrc => {
            format!("{n} {}, {}, {}", x(i.rd), csr_name(i.imm), x(i.rs1))
        }
        Csrrwi | Csrrsi | Csrrci => {
            format!("{n} {}, {}, {}", x(i.rd), csr_name(i.imm), i.rs1)
        }
        Ecall | Wfi => n.to_string(),
        LrW => format!("{n} {}, ({})", x(i.rd), x(i.rs1)),
        ScW | AmoswapW | AmoaddW | AmoxorW | AmoandW | AmoorW | AmominW | AmomaxW | AmominuW
        | AmomaxuW => format!("{n} {}, {}, ({})", x(i.rd), x(i.rs2), x(i.rs1)),
        Fld => format!("{n} {}, {}({})", f(i.rd), i.imm, x(i.rs1)),
        Fsd => format!("{n} {}, {}({})", f(i.rs2), i.imm, x(i.rs1)),
        FaddD | FsubD | FmulD | FsgnjD | FsgnjnD | FsgnjxD | FminD | FmaxD => {
            format!("{n} {}, {}, {}", f(i.rd), f(i.rs1), f(i.rs2))
        }
        FmaddD | FmsubD | FnmsubD | FnmaddD => {
            format!("{n} {}, {}, {}, {}", f(i.rd), f(i.rs1), f(i.rs2), f(i.rs3))
        }
        FeqD | FltD | FleD => format!("{n} {}, {}, {}", x(i.rd), f(i.rs1), f(i.rs2)),
        FcvtWD | FcvtWuD => {
            let rm = match i.rs2 {
                0 => ", rne",
                1 => ", rtz",
                2 => ", rdn",
                3 => ", rup",
                4 => ", rmm",
                _ => "",
            };
            format!("{n} {}, {}{rm}", x(i.rd), f(i.rs1))
        }
        FcvtDW | FcvtDWu => format!("{n} {}, {}", f(i.rd), x(i.rs1)),
        FrepO | FrepI => {
            let fr = i.frep.unwrap_or_default();
            format!(
                "{n} {}, {}, 0b{:04b}, {}",
                x(i.rs1),
                fr.max_inst,
                fr.stagger_mask,
                fr.stagger_count
            )
        }
        Scfgwi => {
            let lane = i.imm as u32 / SCFG_LANE_STRIDE;
            let off = i.imm as u32 % SCFG_LANE_STRIDE;
            let field = SCFG_FIELDS
                .iter()
                .find(|&&(_, o)| o == off)
                .map(|&(name, _)| name)
                .unwrap_or("base");
            format!("{n} {}, {lane}, {field}", x(i.rs1))
        }
    }
}

/// Render a whole program as reassemblable text.
pub fn disassemble(p: &Program) -> String {
    let mut out = String::new();
    writeln!(out, ".text {:#x}", p.text_base).unwrap();
    for i in &p.instrs {
        writeln!(out, "    {}", disassemble_instr(i)).unwrap();
    }
    if !p.data.is_empty() {
        writeln!(out, ".data {:#x}", p.data_base).unwrap();
        let mut k = 0usize;
        while k + 8 <= p.data.len() && (p.data_base as usize + k) % 8 == 0 {
            let v = u64::from_le_bytes(p.data[k..k + 8].try_into().unwrap());
            writeln!(out, "    .dword {v:#018x}").unwrap();
            k += 8;
        }
        while k < p.data.len() {
            // Word-sized tail; short or unaligned remainders are zero-padded.
            let mut w = [0u8; 4];
            let take = (p.data.len() - k).min(4);
            w[..take].copy_from_slice(&p.data[k..k + take]);
            writeln!(out, "    .word {:#010x}", u32::from_le_bytes(w)).unwrap();
            k += take;
        }
    }
    out
}
