//! Hardware loop sequencer for the FP subsystem.
//!
//! A `frep` instruction arms the sequencer: the next `max_inst` FP
//! instructions are captured into a micro-loop buffer instead of being
//! offloaded directly, and the sequencer then injects `max_inst × rep`
//! instances into the FP issue queue at up to one per cycle.  The cursor
//! trails capture, so issue overlaps with the tail of capture.
//!
//! Two loop shapes exist: the outer form repeats the whole block
//! (I0 I1 I0 I1 ...), the inner form repeats each instruction in place
//! (I0 I0 I1 I1 ...).  Register staggering rewrites selected operand fields
//! by adding `k mod (stagger_count+1)` to the register index (mod 32), where
//! k is the block iteration for the outer form and the per-instruction
//! repetition index for the inner form.  Staggering gives each iteration a
//! private accumulator so reductions pipeline without data hazards.
//!
//! Up to `config_depth` loops can be buffered: a second frep can be captured
//! while the first still issues.  Only FP-register-only compute instructions
//! are sequenceable; anything touching integer registers or memory inside a
//! capture window is a programming error and faults.

use crate::isa::{FrepFields, Instruction};

#[derive(Debug, Clone)]
struct LoopConfig {
    fields: FrepFields,
    /// Total iteration count, read from the integer register at offload.
    reps: u32,
    /// Captured block; grows while the capture window is open.
    buffer: Vec<Instruction>,
    /// True until `max_inst` instructions have been captured.
    capturing: bool,
    /// Cursor: next instruction slot to issue.
    inst_idx: usize,
    /// Outer form: current block iteration. Inner form: repetition count of
    /// the current instruction.
    iter: u32,
}

impl LoopConfig {
    fn done(&self) -> bool {
        let n = self.fields.max_inst as usize;
        if n == 0 || self.reps == 0 {
            return !self.capturing || n == 0;
        }
        if self.fields.is_outer {
            self.iter >= self.reps
        } else {
            self.inst_idx >= n
        }
    }
}

pub struct Sequencer {
    configs: std::collections::VecDeque<LoopConfig>,
    pub config_depth: usize,
    /// Total instances injected (performance counter food).
    pub issued: u64,
}

/// Outcome of handing an FP instruction to the core's offload stage while
/// the sequencer has state.
#[derive(Debug, PartialEq, Eq)]
pub enum Gate {
    /// Sequencer idle; offload normally.
    Pass,
    /// Instruction was captured into the open loop buffer.
    Captured,
    /// Sequencer busy; core must stall to preserve FP program order.
    Busy,
    /// Programming error (nested frep in capture, non-sequenceable in block).
    Fault(String),
}

impl Sequencer {
    pub fn new(config_depth: usize) -> Self {
        Sequencer {
            configs: std::collections::VecDeque::new(),
            config_depth,
            issued: 0,
        }
    }

    pub fn busy(&self) -> bool {
        !self.configs.is_empty()
    }

    fn capturing(&self) -> bool {
        self.configs.back().is_some_and(|c| c.capturing)
    }

    /// Offer a frep instruction. `reps` is the iteration count read from the
    /// integer register file at this moment. Returns false when the config
    /// queue is full (core stalls and retries).
    pub fn push_config(&mut self, fields: FrepFields, reps: u32) -> Result<bool, String> {
        if self.capturing() {
            return Err("frep inside an open frep capture window".to_string());
        }
        if self.configs.len() >= self.config_depth {
            return Ok(false);
        }
        let capturing = fields.max_inst > 0;
        self.configs.push_back(LoopConfig {
            fields,
            reps,
            buffer: Vec::with_capacity(fields.max_inst as usize),
            capturing,
            inst_idx: 0,
            iter: 0,
        });
        Ok(true)
    }

    /// Route an FP (non-frep) instruction arriving at the offload stage.
    pub fn gate(&mut self, instr: &Instruction) -> Gate {
        if self.capturing() {
            if !instr.is_sequenceable() {
                return Gate::Fault(format!(
                    "'{}' is not sequenceable inside a frep block \
                     (only FP-register-only compute instructions repeat)",
                    instr.op.name()
                ));
            }
            let cfg = self.configs.back_mut().expect("capturing implies config");
            cfg.buffer.push(*instr);
            if cfg.buffer.len() >= cfg.fields.max_inst as usize {
                cfg.capturing = false;
            }
            return Gate::Captured;
        }
        if self.busy() {
            return Gate::Busy;
        }
        Gate::Pass
    }

    /// One sequencer cycle: emit at most one staggered instance from the
    /// head loop if the FP issue queue has room. Completed loops are
    /// retired so the next queued config can start.
    pub fn step(&mut self, queue_free: bool) -> Option<Instruction> {
        // Retire finished head configs (zero-rep or fully issued).
        while self.configs.front().is_some_and(|c| c.done()) {
            self.configs.pop_front();
        }
        if !queue_free {
            return None;
        }
        let cfg = self.configs.front_mut()?;
        // A zero-rep config issues nothing, even while its capture window is
        // still open (it retires once capture closes).
        if cfg.reps == 0 {
            return None;
        }
        // Cursor may not pass the capture point.
        if cfg.inst_idx >= cfg.buffer.len() {
            return None;
        }
        let n = cfg.fields.max_inst as usize;
        // `iter` is the block iteration in the outer form and the current
        // instruction's repetition index in the inner form; either way it is
        // exactly the stagger index k.
        let instance = stagger(&cfg.buffer[cfg.inst_idx], cfg.fields, cfg.iter);

        if cfg.fields.is_outer {
            cfg.inst_idx += 1;
            if cfg.inst_idx >= n {
                cfg.inst_idx = 0;
                cfg.iter += 1;
            }
        } else {
            cfg.iter += 1;
            if cfg.iter >= cfg.reps {
                cfg.iter = 0;
                cfg.inst_idx += 1;
            }
        }
        if cfg.done() && !cfg.capturing {
            self.configs.pop_front();
        }
        self.issued += 1;
        Some(instance)
    }
}

/// Rewrite the operand registers selected by the stagger mask:
/// reg' = (reg + (k mod (count+1))) mod 32.
fn stagger(instr: &Instruction, f: FrepFields, k: u32) -> Instruction {
    let mut out = *instr;
    if f.stagger_count == 0 || f.stagger_mask == 0 {
        return out;
    }
    let off = (k % (f.stagger_count as u32 + 1)) as u8;
    let adj = |r: u8| (r + off) % 32;
    if f.stagger_mask & 0b0001 != 0 {
        out.rs1 = adj(out.rs1);
    }
    if f.stagger_mask & 0b0010 != 0 {
        out.rs2 = adj(out.rs2);
    }
    if f.stagger_mask & 0b0100 != 0 {
        out.rs3 = adj(out.rs3);
    }
    if f.stagger_mask & 0b1000 != 0 {
        out.rd = adj(out.rd);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::Mnemonic;

    fn fmadd(rd: u8, rs1: u8, rs2: u8, rs3: u8) -> Instruction {
        Instruction {
            op: Mnemonic::FmaddD,
            rd,
            rs1,
            rs2,
            rs3,
            imm: 0,
            frep: None,
        }
    }

    fn fields(is_outer: bool, max_inst: u8, mask: u8, count: u8) -> FrepFields {
        FrepFields {
            is_outer,
            max_inst,
            stagger_mask: mask,
            stagger_count: count,
        }
    }

    fn drain(seq: &mut Sequencer) -> Vec<Instruction> {
        let mut out = Vec::new();
        for _ in 0..10_000 {
            match seq.step(true) {
                Some(i) => out.push(i),
                None if !seq.busy() => break,
                None => {}
            }
        }
        out
    }

    #[test]
    fn outer_repeats_whole_block() {
        let mut s = Sequencer::new(2);
        assert_eq!(s.push_config(fields(true, 2, 0, 0), 3), Ok(true));
        assert_eq!(s.gate(&fmadd(4, 5, 6, 4)), Gate::Captured);
        assert_eq!(s.gate(&fmadd(7, 8, 9, 7)), Gate::Captured);
        // Capture closed: further FP offloads must wait.
        assert_eq!(s.gate(&fmadd(1, 1, 1, 1)), Gate::Busy);
        let got = drain(&mut s);
        assert_eq!(got.len(), 6);
        let rds: Vec<u8> = got.iter().map(|i| i.rd).collect();
        assert_eq!(rds, [4, 7, 4, 7, 4, 7]);
        assert!(!s.busy());
    }

    #[test]
    fn inner_repeats_each_instruction() {
        let mut s = Sequencer::new(2);
        s.push_config(fields(false, 2, 0, 0), 3).unwrap();
        s.gate(&fmadd(4, 5, 6, 4));
        s.gate(&fmadd(7, 8, 9, 7));
        let rds: Vec<u8> = drain(&mut s).iter().map(|i| i.rd).collect();
        assert_eq!(rds, [4, 4, 4, 7, 7, 7]);
    }

    #[test]
    fn stagger_rotates_selected_fields() {
        let mut s = Sequencer::new(2);
        // rd+rs3 staggered over 4 registers: classic reduction pattern.
        s.push_config(fields(true, 1, 0b1100, 3), 6).unwrap();
        s.gate(&fmadd(8, 0, 1, 8));
        let got = drain(&mut s);
        let rds: Vec<u8> = got.iter().map(|i| i.rd).collect();
        let rs3s: Vec<u8> = got.iter().map(|i| i.rs3).collect();
        assert_eq!(rds, [8, 9, 10, 11, 8, 9]);
        assert_eq!(rs3s, rds);
        // Unstaggered fields untouched.
        assert!(got.iter().all(|i| i.rs1 == 0 && i.rs2 == 1));
    }

    #[test]
    fn stagger_wraps_mod_32() {
        let mut s = Sequencer::new(2);
        s.push_config(fields(true, 1, 0b1000, 1), 2).unwrap();
        s.gate(&fmadd(31, 0, 1, 2));
        let rds: Vec<u8> = drain(&mut s).iter().map(|i| i.rd).collect();
        assert_eq!(rds, [31, 0]);
    }

    #[test]
    fn zero_reps_issues_nothing() {
        let mut s = Sequencer::new(2);
        s.push_config(fields(true, 2, 0, 0), 0).unwrap();
        s.gate(&fmadd(4, 5, 6, 4));
        s.gate(&fmadd(7, 8, 9, 7));
        assert!(drain(&mut s).is_empty());
        assert!(!s.busy());
    }

    #[test]
    fn zero_reps_issues_nothing_while_capture_is_still_open() {
        // step() runs between captures in the cluster; the trailing cursor
        // must not leak iteration-0 instances out of a zero-rep config.
        let mut s = Sequencer::new(2);
        s.push_config(fields(true, 2, 0, 0), 0).unwrap();
        assert_eq!(s.step(true), None);
        s.gate(&fmadd(4, 5, 6, 4));
        assert_eq!(s.step(true), None);
        s.gate(&fmadd(7, 8, 9, 7));
        assert!(drain(&mut s).is_empty());
        assert!(!s.busy());
        assert_eq!(s.issued, 0);
    }

    #[test]
    fn cursor_trails_capture() {
        let mut s = Sequencer::new(2);
        s.push_config(fields(true, 2, 0, 0), 2).unwrap();
        s.gate(&fmadd(4, 5, 6, 4));
        // Only I0 captured: cursor can issue I0 but must then wait.
        assert_eq!(s.step(true).unwrap().rd, 4);
        assert_eq!(s.step(true), None);
        s.gate(&fmadd(7, 8, 9, 7));
        assert_eq!(s.step(true).unwrap().rd, 7);
        assert_eq!(s.step(true).unwrap().rd, 4);
        assert_eq!(s.step(true).unwrap().rd, 7);
        assert!(!s.busy());
    }

    #[test]
    fn second_config_queues_behind_first() {
        let mut s = Sequencer::new(2);
        s.push_config(fields(true, 1, 0, 0), 2).unwrap();
        s.gate(&fmadd(4, 5, 6, 4));
        // First loop still issuing; a second frep and its block capture fine.
        assert_eq!(s.push_config(fields(true, 1, 0, 0), 1), Ok(true));
        assert_eq!(s.gate(&fmadd(7, 8, 9, 7)), Gate::Captured);
        // Queue full now.
        assert_eq!(s.push_config(fields(true, 1, 0, 0), 1), Ok(false));
        let rds: Vec<u8> = drain(&mut s).iter().map(|i| i.rd).collect();
        assert_eq!(rds, [4, 4, 7]);
    }

    #[test]
    fn faults_on_bad_blocks() {
        let mut s = Sequencer::new(2);
        s.push_config(fields(true, 2, 0, 0), 2).unwrap();
        assert!(matches!(
            s.push_config(fields(true, 1, 0, 0), 1),
            Err(_)
        ));
        let fld = Instruction {
            op: Mnemonic::Fld,
            rd: 3,
            rs1: 10,
            rs2: 0,
            rs3: 0,
            imm: 0,
            frep: None,
        };
        assert!(matches!(s.gate(&fld), Gate::Fault(_)));
    }

    #[test]
    fn back_pressure_holds_cursor() {
        let mut s = Sequencer::new(2);
        s.push_config(fields(true, 1, 0, 0), 2).unwrap();
        s.gate(&fmadd(4, 5, 6, 4));
        assert_eq!(s.step(false), None);
        assert_eq!(s.step(true).unwrap().rd, 4);
    }
}
