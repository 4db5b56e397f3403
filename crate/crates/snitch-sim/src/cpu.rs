//! Integer core state and functional execution.
//!
//! The core is a single-stage, single-issue pipeline: one instruction is
//! fetched, checked against the register scoreboard, and either executed
//! locally (ALU, branches, CSR), sent to the shared multiply/divide unit, or
//! offloaded to the FP subsystem.  Loads allocate a response slot and mark
//! the destination busy; the result is written back when the memory response
//! arrives, through the single register-file write port (ALU result beats a
//! load writeback, which beats an accelerator response).
//!
//! The cycle-by-cycle issue logic lives in the cluster, which owns all the
//! units a core talks to; this module holds the architectural state and the
//! pure functions for ALU, branch, and multiply/divide semantics.

use crate::icache::L0Cache;
use crate::isa::Mnemonic;
use crate::mem::MemReq;
use std::collections::VecDeque;

/// Outstanding integer load/AMO response slot; consumed in program order.
#[derive(Debug, Clone)]
pub struct IntLoadSlot {
    pub tag: u32,
    pub rd: u8,
    pub width: u8,
    pub signed: bool,
    pub data: u64,
    pub ready: bool,
}

/// A result headed for the integer register file over the accelerator
/// response channel (mul/div and integer-destination FP ops), ordered by
/// readiness with a stable sequence tiebreak.
#[derive(Debug, Clone, Copy)]
pub struct AccResult {
    pub ready_at: u64,
    pub seq: u64,
    pub rd: u8,
    pub data: u32,
}

pub struct Core {
    pub id: u32,
    pub pc: u32,
    pub rf: [u32; 32],
    busy: [bool; 32],
    pub halted: bool,
    /// Parked in `wfi`, waiting for the sticky wake flag kept by the wake
    /// peripheral.
    pub sleeping: bool,
    /// Fetch latch: (pc, instruction index) of the instruction held at the
    /// pipeline head. Avoids re-reading the instruction cache every cycle.
    pub fetched: Option<(u32, usize)>,
    /// Line address of an instruction fetch in flight.
    pub fetch_pending: Option<u32>,
    /// Remaining pipeline bubbles after a taken branch.
    pub bubbles: u32,
    pub l0: L0Cache,
    /// Requests awaiting a memory port grant, in program order.
    pub lsu_req: VecDeque<MemReq>,
    /// Outstanding load-class responses, consumed in order.
    pub lsu_resp: VecDeque<IntLoadSlot>,
    acc: Vec<AccResult>,
    acc_seq: u64,
    pub ssr_enabled: bool,
    pub next_tag: u32,
}

impl Core {
    pub fn new(id: u32, pc: u32, l0_lines: usize) -> Self {
        Core {
            id,
            pc,
            rf: [0; 32],
            busy: [false; 32],
            halted: false,
            sleeping: false,
            fetched: None,
            fetch_pending: None,
            bubbles: 0,
            l0: L0Cache::new(l0_lines),
            lsu_req: VecDeque::new(),
            lsu_resp: VecDeque::new(),
            acc: Vec::new(),
            acc_seq: 0,
            ssr_enabled: false,
            next_tag: 0,
        }
    }

    pub fn reg(&self, r: u8) -> u32 {
        if r == 0 { 0 } else { self.rf[r as usize] }
    }

    pub fn set_reg(&mut self, r: u8, v: u32) {
        if r != 0 {
            self.rf[r as usize] = v;
        }
    }

    pub fn reg_busy(&self, r: u8) -> bool {
        r != 0 && self.busy[r as usize]
    }

    pub fn set_busy(&mut self, r: u8) {
        if r != 0 {
            self.busy[r as usize] = true;
        }
    }

    pub fn clear_busy(&mut self, r: u8) {
        self.busy[r as usize] = false;
    }

    /// Queue an accelerator-channel result, keeping (ready_at, seq) order.
    pub fn push_acc(&mut self, ready_at: u64, rd: u8, data: u32) {
        let seq = self.acc_seq;
        self.acc_seq += 1;
        let r = AccResult {
            ready_at,
            seq,
            rd,
            data,
        };
        let pos = self
            .acc
            .iter()
            .position(|e| (e.ready_at, e.seq) > (ready_at, seq))
            .unwrap_or(self.acc.len());
        self.acc.insert(pos, r);
    }

    pub fn pop_acc(&mut self, cycle: u64) -> Option<AccResult> {
        if self.acc.first().is_some_and(|e| e.ready_at <= cycle) {
            Some(self.acc.remove(0))
        } else {
            None
        }
    }

    pub fn acc_pending(&self) -> bool {
        !self.acc.is_empty()
    }

    pub fn fresh_tag(&mut self) -> u32 {
        let t = self.next_tag;
        self.next_tag = self.next_tag.wrapping_add(1);
        t
    }

    /// True when all outstanding integer-side work has drained (used by the
    /// end-of-run check so a halted core can't leave stores in flight).
    pub fn lsu_idle(&self) -> bool {
        self.lsu_req.is_empty() && self.lsu_resp.is_empty() && self.acc.is_empty()
    }
}

/// Result of a locally executed (single-cycle) instruction.
pub struct LocalExec {
    /// Register write, if any (claims the RF write port this cycle).
    pub write: Option<(u8, u32)>,
    /// Branch/jump redirect target.
    pub next_pc: Option<u32>,
    pub taken: bool,
}

/// Execute an ALU/branch/jump instruction. CSR, memory, and system
/// instructions are handled by the cluster. `rs1`/`rs2` are operand values.
pub fn exec_local(m: Mnemonic, rs1: u32, rs2: u32, imm: i64, pc: u32, rd: u8) -> LocalExec {
    use Mnemonic::*;
    let i = imm as i32 as u32;
    let shamt = |x: u32| x & 31;
    let val: Option<u32> = match m {
        Lui => Some((imm as u32) << 12),
        Auipc => Some(pc.wrapping_add((imm as u32) << 12)),
        Addi => Some(rs1.wrapping_add(i)),
        Slti => Some(((rs1 as i32) < (i as i32)) as u32),
        Sltiu => Some((rs1 < i) as u32),
        Xori => Some(rs1 ^ i),
        Ori => Some(rs1 | i),
        Andi => Some(rs1 & i),
        Slli => Some(rs1 << shamt(i)),
        Srli => Some(rs1 >> shamt(i)),
        Srai => Some(((rs1 as i32) >> shamt(i)) as u32),
        Add => Some(rs1.wrapping_add(rs2)),
        Sub => Some(rs1.wrapping_sub(rs2)),
        Sll => Some(rs1 << shamt(rs2)),
        Slt => Some(((rs1 as i32) < (rs2 as i32)) as u32),
        Sltu => Some((rs1 < rs2) as u32),
        Xor => Some(rs1 ^ rs2),
        Srl => Some(rs1 >> shamt(rs2)),
        Sra => Some(((rs1 as i32) >> shamt(rs2)) as u32),
        Or => Some(rs1 | rs2),
        And => Some(rs1 & rs2),
        Jal | Jalr => Some(pc.wrapping_add(4)),
        Beq | Bne | Blt | Bge | Bltu | Bgeu => None,
        other => panic!("not a local ALU instruction: {:?}", other),
    };
    let taken = match m {
        Jal | Jalr => true,
        Beq => rs1 == rs2,
        Bne => rs1 != rs2,
        Blt => (rs1 as i32) < (rs2 as i32),
        Bge => (rs1 as i32) >= (rs2 as i32),
        Bltu => rs1 < rs2,
        Bgeu => rs1 >= rs2,
        _ => false,
    };
    let next_pc = if taken {
        Some(match m {
            Jalr => rs1.wrapping_add(i) & !1,
            _ => pc.wrapping_add(i),
        })
    } else {
        None
    };
    LocalExec {
        write: val.map(|v| (rd, v)),
        next_pc,
        taken,
    }
}

/// Shared multiply/divide unit (one per hive). Multiplies are pipelined at
/// one accept per cycle; a divide blocks the unit for its whole latency.
pub struct MulDiv {
    accepted_at: u64,
    busy_until: u64,
}

impl MulDiv {
    pub fn new() -> Self {
        MulDiv {
            accepted_at: u64::MAX,
            busy_until: 0,
        }
    }

    /// One accept per cycle; nothing accepted while a divide is in flight.
    pub fn try_accept(&mut self, cycle: u64) -> bool {
        if self.accepted_at == cycle || self.busy_until > cycle {
            return false;
        }
        self.accepted_at = cycle;
        true
    }

    /// Mark the unit blocked until the divide completes.
    pub fn block_until(&mut self, cycle: u64) {
        self.busy_until = cycle;
    }
}

impl Default for MulDiv {
    fn default() -> Self {
        Self::new()
    }
}

pub fn muldiv_value(m: Mnemonic, a: u32, b: u32) -> u32 {
    use Mnemonic::*;
    match m {
        Mul => a.wrapping_mul(b),
        Mulh => (((a as i32 as i64) * (b as i32 as i64)) >> 32) as u32,
        Mulhsu => (((a as i32 as i64) * (b as i64)) >> 32) as u32,
        Mulhu => (((a as u64) * (b as u64)) >> 32) as u32,
        Div => {
            if b == 0 {
                u32::MAX
            } else if a == i32::MIN as u32 && b == u32::MAX {
                a // overflow: MIN / -1 = MIN
            } else {
                ((a as i32) / (b as i32)) as u32
            }
        }
        Divu => {
            if b == 0 { u32::MAX } else { a / b }
        }
        Rem => {
            if b == 0 {
                a
            } else if a == i32::MIN as u32 && b == u32::MAX {
                0
            } else {
                ((a as i32) % (b as i32)) as u32
            }
        }
        Remu => {
            if b == 0 { a } else { a % b }
        }
        other => panic!("not a mul/div instruction: {:?}", other),
    }
}

/// Dependent-issue latency. Multiplies are fixed; divides iterate over the
/// significant bits of the dividend.
pub fn muldiv_latency(m: Mnemonic, a: u32, mul_latency: u64) -> u64 {
    use Mnemonic::*;
    match m {
        Mul | Mulh | Mulhsu | Mulhu => mul_latency,
        Div | Rem => {
            let mag = (a as i32).unsigned_abs();
            2 + u64::from((32 - mag.leading_zeros()).max(1))
        }
        Divu | Remu => 2 + u64::from((32 - a.leading_zeros()).max(1)),
        other => panic!("not a mul/div instruction: {:?}", other),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::Mnemonic::*;

    #[test]
    fn alu_basics() {
        let e = exec_local(Addi, 5, 0, -3, 0x100, 1);
        assert_eq!(e.write, Some((1, 2)));
        assert!(!e.taken);
        let e = exec_local(Sub, 3, 5, 0, 0, 2);
        assert_eq!(e.write, Some((2, (-2i32) as u32)));
        let e = exec_local(Sra, 0x8000_0000, 4, 0, 0, 2);
        assert_eq!(e.write, Some((2, 0xF800_0000)));
        let e = exec_local(Srl, 0x8000_0000, 4, 0, 0, 2);
        assert_eq!(e.write, Some((2, 0x0800_0000)));
        let e = exec_local(Slt, (-1i32) as u32, 1, 0, 0, 2);
        assert_eq!(e.write, Some((2, 1)));
        let e = exec_local(Sltu, (-1i32) as u32, 1, 0, 0, 2);
        assert_eq!(e.write, Some((2, 0)));
        let e = exec_local(Lui, 0, 0, 0x12345, 0, 2);
        assert_eq!(e.write, Some((2, 0x12345000)));
        let e = exec_local(Auipc, 0, 0, 1, 0x80000010, 2);
        assert_eq!(e.write, Some((2, 0x80001010)));
    }

    #[test]
    fn branches_and_jumps() {
        let e = exec_local(Bne, 1, 2, 16, 0x100, 0);
        assert!(e.taken);
        assert_eq!(e.next_pc, Some(0x110));
        assert_eq!(e.write, None);
        let e = exec_local(Beq, 1, 2, 16, 0x100, 0);
        assert!(!e.taken);
        let e = exec_local(Bge, (-5i32) as u32, (-5i32) as u32, -8, 0x100, 0);
        assert!(e.taken);
        assert_eq!(e.next_pc, Some(0xF8));
        let e = exec_local(Jal, 0, 0, 0x20, 0x100, 1);
        assert_eq!(e.write, Some((1, 0x104)));
        assert_eq!(e.next_pc, Some(0x120));
        let e = exec_local(Jalr, 0x205, 0, 2, 0x100, 1);
        assert_eq!(e.next_pc, Some(0x206)); // low bit cleared
    }

    #[test]
    fn muldiv_riscv_edge_cases() {
        assert_eq!(muldiv_value(Mul, 7, 6), 42);
        assert_eq!(muldiv_value(Mulh, (-2i32) as u32, 3), u32::MAX);
        assert_eq!(muldiv_value(Mulhu, 0x8000_0000, 2), 1);
        assert_eq!(muldiv_value(Div, (-7i32) as u32, 2), (-3i32) as u32);
        assert_eq!(muldiv_value(Div, 5, 0), u32::MAX);
        assert_eq!(muldiv_value(Div, i32::MIN as u32, u32::MAX), i32::MIN as u32);
        assert_eq!(muldiv_value(Rem, (-7i32) as u32, 2), (-1i32) as u32);
        assert_eq!(muldiv_value(Rem, 5, 0), 5);
        assert_eq!(muldiv_value(Rem, i32::MIN as u32, u32::MAX), 0);
        assert_eq!(muldiv_value(Divu, u32::MAX, 2), 0x7FFF_FFFF);
    }

    #[test]
    fn divide_latency_tracks_dividend_magnitude() {
        assert_eq!(muldiv_latency(Div, 1024, 2), 13); // 2 + (32 - 21)
        assert_eq!(muldiv_latency(Div, 0, 2), 3); // floor of one iteration
        assert_eq!(muldiv_latency(Div, u32::MAX, 1), 3); // |-1| = 1
        assert_eq!(muldiv_latency(Divu, u32::MAX, 1), 34); // unsigned: full width
        assert_eq!(muldiv_latency(Mul, 123, 2), 2);
    }

    #[test]
    fn muldiv_unit_accepts_one_per_cycle_and_blocks_on_div() {
        let mut u = MulDiv::new();
        assert!(u.try_accept(5));
        assert!(!u.try_accept(5));
        assert!(u.try_accept(6));
        u.block_until(10);
        assert!(!u.try_accept(7));
        assert!(!u.try_accept(9));
        assert!(u.try_accept(10));
    }

    #[test]
    fn acc_channel_orders_by_readiness() {
        let mut c = Core::new(0, 0, 4);
        c.push_acc(10, 1, 111);
        c.push_acc(5, 2, 222);
        c.push_acc(10, 3, 333);
        assert!(c.pop_acc(4).is_none());
        assert_eq!(c.pop_acc(5).unwrap().rd, 2);
        assert!(c.pop_acc(9).is_none());
        // Equal readiness: insertion order wins.
        assert_eq!(c.pop_acc(10).unwrap().rd, 1);
        assert_eq!(c.pop_acc(10).unwrap().rd, 3);
    }

    #[test]
    fn x0_never_written_or_busy() {
        let mut c = Core::new(0, 0, 4);
        c.set_reg(0, 99);
        assert_eq!(c.reg(0), 0);
        c.set_busy(0);
        assert!(!c.reg_busy(0));
    }
}
