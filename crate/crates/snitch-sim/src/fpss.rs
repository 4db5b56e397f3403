//! Decoupled floating-point subsystem.
//!
//! The integer core hands FP instructions over an offload channel; they wait
//! in a small issue queue here and execute against a private 32-entry f64
//! register file with its own scoreboard.  The subsystem owns the FP load/
//! store unit (addresses are precomputed by the integer core at offload
//! time) and talks to the stream lanes: when streaming is enabled, reads of
//! ft0/ft1 pop lane FIFOs and writes to them reserve write-lane slots.
//!
//! Timing contract: an operation issued in cycle T with latency L commits in
//! cycle T+L-1, so a dependent operation can issue in cycle T+L.  The FPU is
//! fully pipelined but has a single result port: at most one completion per
//! cycle, and completions destined for the register file arbitrate against
//! FP-load writebacks (FPU result wins).  Results destined for a stream lane
//! or for the integer core bypass the FP register-file port.

use crate::isa::{Instruction, Mnemonic};
use crate::mem::{Client, MemKind, MemReq};
use crate::ssr::SsrLane;

const CANONICAL_NAN: u64 = 0x7ff8_0000_0000_0000;
const SIGN: u64 = 0x8000_0000_0000_0000;

/// Where a queued FP operation delivers its result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FpDest {
    /// FP register file (normal case).
    Reg(u8),
    /// Stream write lane; the u32 is the reserved slot sequence number.
    Lane(u8, u32),
    /// Integer register, returned to the core over the response channel.
    Int(u8),
    /// No architectural result (fsd).
    None,
}

/// An offloaded FP instruction waiting in the issue queue.
#[derive(Debug, Clone)]
pub struct FpOp {
    pub instr: Instruction,
    /// Precomputed byte address for fld/fsd (integer core resolves rs1+imm).
    pub addr: u32,
    /// Integer operand captured at offload time (fcvt.d.w/fcvt.d.wu).
    pub int_src: u32,
    /// Program-order stamp, used for deterministic tie-breaking.
    pub seq: u64,
    /// True if this instance was injected by the sequencer.
    pub sequenced: bool,
}

/// An in-flight FPU operation waiting for its completion cycle.
#[derive(Debug, Clone)]
struct InFlight {
    complete_at: u64,
    seq: u64,
    dest: FpDest,
    value: u64,
}

/// FP load/store unit response slot (loads only; stores are fire-and-forget).
#[derive(Debug, Clone)]
pub struct FpLoadSlot {
    pub tag: u32,
    pub dest: FpDest,
    pub data: u64,
    pub ready: bool,
}

/// Result handed back to the integer core (int-destination FP ops).
#[derive(Debug, Clone, Copy)]
pub struct IntResult {
    pub rd: u8,
    pub data: u32,
}

/// Why the issue stage could not make progress this cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IssueStall {
    Empty,
    Scoreboard,
    SsrEmpty,
    SsrFull,
    Lsu,
}

pub struct Fpss {
    pub queue: std::collections::VecDeque<FpOp>,
    pub queue_depth: usize,
    pub rf: [u64; 32],
    busy: [bool; 32],
    pipe: Vec<InFlight>,
    /// Requests awaiting a memory port grant, in program order.
    pub lsu_req: std::collections::VecDeque<MemReq>,
    /// Outstanding load response slots, consumed in order.
    pub lsu_resp: std::collections::VecDeque<FpLoadSlot>,
    pub lsu_slots: usize,
    next_tag: u32,
}

impl Fpss {
    pub fn new(queue_depth: usize, lsu_slots: usize) -> Self {
        Fpss {
            queue: std::collections::VecDeque::new(),
            queue_depth,
            rf: [0; 32],
            busy: [false; 32],
            pipe: Vec::new(),
            lsu_req: std::collections::VecDeque::new(),
            lsu_resp: std::collections::VecDeque::new(),
            lsu_slots,
            next_tag: 0,
        }
    }

    pub fn queue_full(&self) -> bool {
        self.queue.len() >= self.queue_depth
    }

    /// True when nothing is queued or in flight (needed to quiesce before
    /// stream-enable changes and at end of run).
    pub fn idle(&self) -> bool {
        self.queue.is_empty()
            && self.pipe.is_empty()
            && self.lsu_req.is_empty()
            && self.lsu_resp.is_empty()
    }

    /// Try to issue the queue head. `enabled` is the stream-enable CSR bit.
    /// Returns the issued op on success, the stall cause otherwise (with a
    /// message when the stall is actually a fault, e.g. stream overrun).
    ///
    /// On success the op is popped, source lanes are popped, write lanes are
    /// reserved, FP loads/stores are enqueued to the LSU, and the completion
    /// is scheduled.  `fld`/`fsd` count as issued here even though their data
    /// arrives later.
    pub fn try_issue(
        &mut self,
        lanes: &mut [SsrLane; 2],
        enabled: bool,
        cycle: u64,
        lat: impl Fn(Mnemonic) -> u64,
    ) -> Result<FpOp, (IssueStall, Option<String>)> {
        let Some(op) = self.queue.front() else {
            return Err((IssueStall::Empty, None));
        };
        let instr = op.instr;
        let (addr, int_src, seq) = (op.addr, op.int_src, op.seq);
        let m = instr.op;

        // Count lane pops per source operand.  rs1 is bound first, so a
        // dual read of the same lane takes two consecutive elements.
        let mut pops = [0u8; 2];
        let srcs = instr.fp_srcs();
        if enabled {
            for r in srcs.iter().flatten() {
                if *r < 2 {
                    pops[*r as usize] += 1;
                }
            }
        }
        // fsd data (rs2 slot) is also an FP read; fp_srcs covers it.

        for l in 0..2 {
            if pops[l] > 0 {
                match lanes[l].can_pop(pops[l] as u64) {
                    Err(e) => return Err((IssueStall::SsrEmpty, Some(e))),
                    Ok(false) => return Err((IssueStall::SsrEmpty, None)),
                    Ok(true) => {}
                }
            }
        }

        // Scoreboard: non-stream FP sources and destination must be free.
        for r in srcs.iter().flatten() {
            if (!enabled || *r >= 2) && self.busy[*r as usize] {
                return Err((IssueStall::Scoreboard, None));
            }
        }
        let fp_rd = instr.fp_dest();
        let stream_dest = enabled && fp_rd.is_some_and(|r| r < 2);
        if let Some(rd) = fp_rd {
            if !stream_dest && self.busy[rd as usize] {
                return Err((IssueStall::Scoreboard, None));
            }
        }
        if stream_dest {
            match lanes[fp_rd.unwrap() as usize].can_reserve_write() {
                Err(e) => return Err((IssueStall::SsrFull, Some(e))),
                Ok(false) => return Err((IssueStall::SsrFull, None)),
                Ok(true) => {}
            }
        }
        if instr.is_fp_mem() {
            let outstanding = self.lsu_req.len() + self.lsu_resp.len();
            if outstanding >= self.lsu_slots {
                return Err((IssueStall::Lsu, None));
            }
        }

        // All checks passed: commit to issuing.
        let dest = if stream_dest {
            let lane = fp_rd.unwrap();
            let seq = lanes[lane as usize].reserve_write();
            FpDest::Lane(lane, seq)
        } else if let Some(rd) = fp_rd {
            FpDest::Reg(rd)
        } else if let Some(rd) = instr.int_dest() {
            FpDest::Int(rd)
        } else {
            FpDest::None
        };

        // Source binding: stream registers pop the lane FIFO (rs1 first),
        // everything else reads the register file.
        let rf = self.rf;
        let mut read = |r: u8| -> u64 {
            if enabled && r < 2 {
                lanes[r as usize].pop()
            } else {
                rf[r as usize]
            }
        };

        match m {
            Mnemonic::Fld => {
                let tag = self.next_tag;
                self.next_tag = self.next_tag.wrapping_add(1);
                if let FpDest::Reg(rd) = dest {
                    self.busy[rd as usize] = true;
                }
                self.lsu_resp.push_back(FpLoadSlot {
                    tag,
                    dest,
                    data: 0,
                    ready: false,
                });
                self.lsu_req.push_back(MemReq {
                    core: 0, // cluster fills in
                    client: Client::FpLsu,
                    tag,
                    addr,
                    kind: MemKind::Load { width: 8 },
                });
            }
            Mnemonic::Fsd => {
                let data = read(instr.rs2);
                let tag = self.next_tag;
                self.next_tag = self.next_tag.wrapping_add(1);
                self.lsu_req.push_back(MemReq {
                    core: 0,
                    client: Client::FpLsu,
                    tag,
                    addr,
                    kind: MemKind::Store { width: 8, data },
                });
            }
            _ => {
                let a = srcs[0].map(&mut read);
                let b = srcs[1].map(&mut read);
                let c = srcs[2].map(&mut read);
                let value = fpu_exec(instr, a, b, c, int_src);
                if !stream_dest {
                    if let Some(rd) = fp_rd {
                        self.busy[rd as usize] = true;
                    }
                }
                let latency = lat(m);
                debug_assert!(latency >= 1);
                self.pipe.push(InFlight {
                    complete_at: cycle + latency - 1,
                    seq,
                    dest,
                    value,
                });
            }
        }
        Ok(self.queue.pop_front().expect("head exists"))
    }

    /// Commit stage: retire at most one FPU completion (single result port)
    /// and, if the register-file write port is still free, one FP load.
    /// Returns an integer-core result if one completed this cycle.
    pub fn commit(&mut self, lanes: &mut [SsrLane; 2], cycle: u64) -> Option<IntResult> {
        let mut int_result = None;
        let mut port_used = false;

        // Oldest ready completion first: (complete_at, seq) order.
        let mut best: Option<usize> = None;
        for (i, f) in self.pipe.iter().enumerate() {
            if f.complete_at <= cycle
                && best.is_none_or(|b| {
                    let bb = &self.pipe[b];
                    (f.complete_at, f.seq) < (bb.complete_at, bb.seq)
                })
            {
                best = Some(i);
            }
        }
        if let Some(i) = best {
            let f = self.pipe.swap_remove(i);
            match f.dest {
                FpDest::Reg(rd) => {
                    self.rf[rd as usize] = f.value;
                    self.busy[rd as usize] = false;
                    port_used = true;
                }
                FpDest::Lane(lane, seq) => {
                    lanes[lane as usize].fill_write(seq, f.value);
                }
                FpDest::Int(rd) => {
                    int_result = Some(IntResult {
                        rd,
                        data: f.value as u32,
                    });
                }
                FpDest::None => {}
            }
        }

        // FP load writeback: in-order head, loses the port to an FPU result.
        if let Some(slot) = self.lsu_resp.front() {
            if slot.ready {
                match slot.dest {
                    FpDest::Reg(rd) => {
                        if !port_used {
                            self.rf[rd as usize] = slot.data;
                            self.busy[rd as usize] = false;
                            self.lsu_resp.pop_front();
                        }
                    }
                    FpDest::Lane(lane, seq) => {
                        lanes[lane as usize].fill_write(seq, slot.data);
                        self.lsu_resp.pop_front();
                    }
                    _ => unreachable!("fld destinations are FP regs or lanes"),
                }
            }
        }
        int_result
    }

    /// Deliver a memory response into the matching load slot.
    pub fn fill_load(&mut self, tag: u32, data: u64) {
        for slot in self.lsu_resp.iter_mut() {
            if slot.tag == tag && !slot.ready {
                slot.data = data;
                slot.ready = true;
                return;
            }
        }
        panic!("FP load response with no matching slot (tag {tag})");
    }

    pub fn reg_busy(&self, r: u8) -> bool {
        self.busy[r as usize]
    }
}

/// Execute one FP instruction functionally. `a`,`b`,`c` follow the rs1/rs2/
/// rs3 slots; `int_src` carries the integer operand for int→FP converts.
/// Returns raw result bits (f64 bits, or a 32-bit value zero-extended for
/// integer-destination ops).
pub fn fpu_exec(
    instr: Instruction,
    a: Option<u64>,
    b: Option<u64>,
    c: Option<u64>,
    int_src: u32,
) -> u64 {
    use Mnemonic::*;
    let fa = || f64::from_bits(a.unwrap());
    let fb = || f64::from_bits(b.unwrap());
    let fc = || f64::from_bits(c.unwrap());
    match instr.op {
        FaddD => canon(fa() + fb()),
        FsubD => canon(fa() - fb()),
        FmulD => canon(fa() * fb()),
        FmaddD => canon(fa().mul_add(fb(), fc())),
        FmsubD => canon(fa().mul_add(fb(), -fc())),
        FnmsubD => canon((-fa()).mul_add(fb(), fc())),
        FnmaddD => canon((-fa()).mul_add(fb(), -fc())),
        FsgnjD => (a.unwrap() & !SIGN) | (b.unwrap() & SIGN),
        FsgnjnD => (a.unwrap() & !SIGN) | (!b.unwrap() & SIGN),
        FsgnjxD => a.unwrap() ^ (b.unwrap() & SIGN),
        FminD => fp_min(a.unwrap(), b.unwrap()),
        FmaxD => fp_max(a.unwrap(), b.unwrap()),
        FeqD => (fa() == fb()) as u64,
        FltD => (fa() < fb()) as u64,
        FleD => (fa() <= fb()) as u64,
        FcvtWD => fcvt_w(fa(), instr.rs2) as u32 as u64,
        FcvtWuD => fcvt_wu(fa(), instr.rs2) as u64,
        FcvtDW => (int_src as i32 as f64).to_bits(),
        FcvtDWu => (int_src as f64).to_bits(),
        other => panic!("not an FPU operation: {:?}", other),
    }
}

/// NaN results are canonicalized, matching hardware that never propagates
/// payload bits.
fn canon(x: f64) -> u64 {
    if x.is_nan() {
        CANONICAL_NAN
    } else {
        x.to_bits()
    }
}

fn fp_min(a: u64, b: u64) -> u64 {
    let fa = f64::from_bits(a);
    let fb = f64::from_bits(b);
    if fa.is_nan() && fb.is_nan() {
        return CANONICAL_NAN;
    }
    if fa.is_nan() {
        return b;
    }
    if fb.is_nan() {
        return a;
    }
    // -0 < +0 here: OR in the other sign bit when the values compare equal.
    if fa == fb {
        return a | (b & SIGN);
    }
    if fa < fb { a } else { b }
}

fn fp_max(a: u64, b: u64) -> u64 {
    let fa = f64::from_bits(a);
    let fb = f64::from_bits(b);
    if fa.is_nan() && fb.is_nan() {
        return CANONICAL_NAN;
    }
    if fa.is_nan() {
        return b;
    }
    if fb.is_nan() {
        return a;
    }
    // +0 > -0 here: AND clears the sign when the values compare equal.
    if fa == fb {
        return a & (b | !SIGN);
    }
    if fa > fb { a } else { b }
}

fn round_rm(x: f64, rm: u8) -> f64 {
    match rm {
        0 | 7 => x.round_ties_even(),
        1 => x.trunc(),
        2 => x.floor(),
        3 => x.ceil(),
        4 => x.round(), // ties away from zero
        _ => x.round_ties_even(),
    }
}

fn fcvt_w(x: f64, rm: u8) -> i32 {
    if x.is_nan() {
        return i32::MAX;
    }
    let r = round_rm(x, rm);
    if r < i32::MIN as f64 {
        i32::MIN
    } else if r > i32::MAX as f64 {
        i32::MAX
    } else {
        r as i32
    }
}

fn fcvt_wu(x: f64, rm: u8) -> u32 {
    if x.is_nan() {
        return u32::MAX;
    }
    let r = round_rm(x, rm);
    if r < 0.0 {
        0
    } else if r > u32::MAX as f64 {
        u32::MAX
    } else {
        r as u32
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::Mnemonic::*;

    fn op(m: Mnemonic) -> Instruction {
        Instruction {
            op: m,
            rd: 0,
            rs1: 0,
            rs2: 7, // dynamic rounding for converts
            rs3: 0,
            imm: 0,
            frep: None,
        }
    }

    fn bits(x: f64) -> Option<u64> {
        Some(x.to_bits())
    }

    #[test]
    fn arith_matches_host() {
        let r = fpu_exec(op(FmaddD), bits(2.0), bits(3.0), bits(1.5), 0);
        assert_eq!(f64::from_bits(r), 2.0f64.mul_add(3.0, 1.5));
        let r = fpu_exec(op(FnmaddD), bits(2.0), bits(3.0), bits(1.5), 0);
        assert_eq!(f64::from_bits(r), -(2.0 * 3.0) - 1.5);
        let r = fpu_exec(op(FnmsubD), bits(2.0), bits(3.0), bits(1.5), 0);
        assert_eq!(f64::from_bits(r), -(2.0 * 3.0) + 1.5);
    }

    #[test]
    fn sign_injection_is_bitwise() {
        let a = (-1.5f64).to_bits();
        let b = 2.0f64.to_bits();
        assert_eq!(f64::from_bits(fpu_exec(op(FsgnjD), Some(a), Some(b), None, 0)), 1.5);
        assert_eq!(f64::from_bits(fpu_exec(op(FsgnjnD), Some(a), Some(b), None, 0)), -1.5);
        assert_eq!(f64::from_bits(fpu_exec(op(FsgnjxD), Some(a), Some(b), None, 0)), -1.5);
        // fabs idiom: fsgnjx with itself squares the sign away? No: fsgnj with
        // cleared sign. fabs = fsgnjx(a,a) gives |a| only via sign xor sign = +.
        assert_eq!(f64::from_bits(fpu_exec(op(FsgnjxD), Some(a), Some(a), None, 0)), 1.5);
    }

    #[test]
    fn min_max_ieee_zero_and_nan() {
        let nz = (-0.0f64).to_bits();
        let pz = 0.0f64.to_bits();
        assert_eq!(fp_min(nz, pz), nz);
        assert_eq!(fp_min(pz, nz), nz);
        assert_eq!(fp_max(nz, pz), pz);
        assert_eq!(fp_max(pz, nz), pz);
        let nan = f64::NAN.to_bits();
        assert_eq!(fp_min(nan, pz), pz);
        assert_eq!(fp_max(pz, nan), pz);
        assert_eq!(fp_min(nan, nan), CANONICAL_NAN);
        assert_eq!(fp_min(1.0f64.to_bits(), 2.0f64.to_bits()), 1.0f64.to_bits());
        assert_eq!(fp_max(1.0f64.to_bits(), 2.0f64.to_bits()), 2.0f64.to_bits());
    }

    #[test]
    fn compares_quiet_on_nan() {
        let nan = bits(f64::NAN);
        assert_eq!(fpu_exec(op(FeqD), nan, bits(1.0), None, 0), 0);
        assert_eq!(fpu_exec(op(FltD), nan, bits(1.0), None, 0), 0);
        assert_eq!(fpu_exec(op(FleD), bits(1.0), bits(1.0), None, 0), 1);
        assert_eq!(fpu_exec(op(FltD), bits(1.0), bits(2.0), None, 0), 1);
    }

    #[test]
    fn converts_saturate() {
        assert_eq!(fcvt_w(f64::NAN, 0), i32::MAX);
        assert_eq!(fcvt_w(3.0e12, 0), i32::MAX);
        assert_eq!(fcvt_w(-3.0e12, 0), i32::MIN);
        assert_eq!(fcvt_w(2.5, 0), 2); // ties to even
        assert_eq!(fcvt_w(3.5, 0), 4);
        assert_eq!(fcvt_w(-2.7, 1), -2); // trunc
        assert_eq!(fcvt_wu(-1.0, 0), 0);
        assert_eq!(fcvt_wu(4.6e9, 0), u32::MAX);
        let r = fpu_exec(op(FcvtDW), None, None, None, (-7i32) as u32);
        assert_eq!(f64::from_bits(r), -7.0);
        let r = fpu_exec(op(FcvtDWu), None, None, None, 0xFFFF_FFFF);
        assert_eq!(f64::from_bits(r), 4294967295.0);
    }

    #[test]
    fn nan_results_canonicalized() {
        let r = fpu_exec(op(FaddD), bits(f64::INFINITY), bits(f64::NEG_INFINITY), None, 0);
        assert_eq!(r, CANONICAL_NAN);
    }
}
