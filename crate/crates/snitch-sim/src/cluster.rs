//! The cluster: cores, FP subsystems, stream lanes, sequencers, caches, and
//! banked memory advancing in lock step.
//!
//! Each simulated cycle runs a fixed phase order. Earlier phases never see
//! effects of later phases in the same cycle, which pins down every timing
//! question in one place:
//!
//! 1. **deliver** — memory responses granted earlier become visible (integer
//!    and FP load slots, stream-lane fills).
//! 2. **sequence** — each sequencer may inject one loop instance into its FP
//!    issue queue.
//! 3. **cores** — each integer core fetches, checks hazards, and executes or
//!    offloads one instruction. ALU results write back immediately and claim
//!    the register-file write port for this cycle. The iteration order
//!    rotates with the cycle so shared-unit (mul/div) arbitration is fair.
//! 4. **fp issue** — each FP subsystem issues at most one queued operation:
//!    scoreboard and stream checks, lane pops, write-lane reservations, FP
//!    memory requests. An op issued at T with latency L commits at T+L-1.
//! 5. **memory** — per-core-complex port arbitration (integer LSU and lane 0
//!    on port 0, FP LSU and lane 1 on port 1), then per-bank round-robin
//!    grants. A request that wins its port but loses its bank wastes the
//!    port and counts as a conflict. Granted scratchpad accesses respond
//!    next cycle; external accesses respond after the configured latency.
//! 6. **icache** — completed line fills install into L0 buffers.
//! 7. **commit** — integer write port (ALU result, else load response, else
//!    accelerator response) and FP write port (FPU completion, else FP
//!    load). Stream-destined completions bypass the FP port. Scoreboard
//!    clears become visible next cycle.
//! 8. **housekeeping** — progress tracking and the deadlock watchdog.

use crate::config::SimConfig;
use crate::cpu::{self, Core, IntLoadSlot, MulDiv};
use crate::fpss::{FpOp, Fpss, IssueStall};
use crate::frep::{Gate, Sequencer};
use crate::icache::HiveIcache;
use crate::isa::{
    self, Instruction, IssueClass, Mnemonic, Program, CSR_MHARTID, CSR_PERF_MARKER,
    CSR_SSR_ENABLE,
};
use crate::mem::{self, Client, MemKind, MemReq, Memory, Region};
use crate::perf::{Counters, RegionTrack};
use crate::ssr::SsrLane;
use crate::trace::Trace;

/// A simulation-ending error: the faulting cycle, the core at fault (when
/// attributable), and a human-readable cause.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fault {
    pub cycle: u64,
    pub core: Option<u32>,
    pub msg: String,
}

impl std::fmt::Display for Fault {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.core {
            Some(c) => write!(f, "cycle {}: core {}: {}", self.cycle, c, self.msg),
            None => write!(f, "cycle {}: {}", self.cycle, self.msg),
        }
    }
}

impl std::error::Error for Fault {}

/// A granted memory access waiting for its response cycle.
#[derive(Debug, Clone)]
struct PendingResp {
    ready_at: u64,
    req: MemReq,
    data: u64,
}

pub struct Cluster {
    pub cfg: SimConfig,
    pub program: Program,
    pub mem: Memory,
    pub cores: Vec<Core>,
    pub fpss: Vec<Fpss>,
    pub lanes: Vec<[SsrLane; 2]>,
    pub seqs: Vec<Sequencer>,
    pub icaches: Vec<HiveIcache>,
    pub muldivs: Vec<MulDiv>,
    pub counters: Vec<Counters>,
    pub regions: Vec<RegionTrack>,
    pub trace: Trace,
    pub cycle: u64,
    resps: Vec<PendingResp>,
    /// Per core complex, per port: round-robin pointer between the LSU-class
    /// client (candidate 0) and the stream lane (candidate 1).
    port_rr: Vec<[usize; 2]>,
    /// Did the core's ALU claim the integer RF write port this cycle?
    port_claimed: Vec<bool>,
    /// Per-core FP program-order stamps.
    fp_seq: Vec<u64>,
    last_progress: u64,
    prev_work: u64,
}

impl Cluster {
    pub fn new(cfg: SimConfig, program: Program) -> Result<Self, String> {
        let n = cfg.cores();
        let mut mem = Memory::new(&cfg);
        mem.load_data(program.data_base, &program.data)?;
        let cores = (0..n)
            .map(|i| Core::new(i as u32, program.text_base, cfg.l0_lines))
            .collect();
        let fpss = (0..n)
            .map(|_| Fpss::new(cfg.fpss_queue, cfg.fp_lsu_slots))
            .collect();
        let lanes = (0..n)
            .map(|_| [SsrLane::new(cfg.ssr_fifo), SsrLane::new(cfg.ssr_fifo)])
            .collect();
        let seqs = (0..n).map(|_| Sequencer::new(cfg.frep_configs)).collect();
        let icaches = (0..cfg.hives)
            .map(|_| {
                HiveIcache::new(
                    cfg.l1_bytes,
                    cfg.l1_ways,
                    cfg.icache_line,
                    cfg.icache_refill_latency,
                )
            })
            .collect();
        let muldivs = (0..cfg.hives).map(|_| MulDiv::new()).collect();
        Ok(Cluster {
            program,
            mem,
            cores,
            fpss,
            lanes,
            seqs,
            icaches,
            muldivs,
            counters: vec![Counters::default(); n],
            regions: vec![RegionTrack::default(); n],
            trace: Trace::new(false),
            cycle: 0,
            resps: Vec::new(),
            port_rr: vec![[0, 0]; n],
            port_claimed: vec![false; n],
            fp_seq: vec![0; n],
            last_progress: 0,
            prev_work: 0,
            cfg,
        })
    }

    /// Assemble `src` and build a cluster around it.
    pub fn from_asm(cfg: SimConfig, src: &str) -> Result<Self, String> {
        let program = isa::asm::assemble(src).map_err(|e| e.to_string())?;
        Cluster::new(cfg, program)
    }

    fn fault(&self, core: usize, msg: impl Into<String>) -> Fault {
        Fault {
            cycle: self.cycle,
            core: Some(core as u32),
            msg: msg.into(),
        }
    }

    /// Run until every core has halted and all queues have drained. Errors
    /// on faults, on the deadlock watchdog, and on exceeding `max_cycles`.
    pub fn run(&mut self, max_cycles: u64) -> Result<u64, Fault> {
        while !self.finished() {
            if self.cycle >= max_cycles {
                return Err(Fault {
                    cycle: self.cycle,
                    core: None,
                    msg: format!("exceeded the cycle limit ({max_cycles})"),
                });
            }
            self.step()?;
        }
        Ok(self.cycle)
    }

    pub fn finished(&self) -> bool {
        self.cores.iter().all(|c| c.halted && c.lsu_idle())
            && self.fpss.iter().all(|f| f.idle())
            && self.seqs.iter().all(|s| !s.busy())
            && self.resps.is_empty()
            && self
                .lanes
                .iter()
                .flat_map(|l| l.iter())
                .all(|l| !l.active_is_write() || l.idle())
    }

    /// Advance the cluster by one cycle.
    pub fn step(&mut self) -> Result<(), Fault> {
        let t = self.cycle;

        self.deliver_responses(t);
        self.sequence_phase(t);
        self.port_claimed.fill(false);
        let n = self.cores.len();
        for k in 0..n {
            let c = (t as usize + k) % n;
            self.core_cycle(c, t)?;
        }
        self.fp_issue_phase(t)?;
        self.memory_phase(t)?;
        self.icache_phase(t);
        self.commit_phase(t);
        self.housekeeping(t)?;
        self.cycle = t + 1;
        Ok(())
    }

    // ---- phase 1: response delivery ----

    fn deliver_responses(&mut self, t: u64) {
        let mut i = 0;
        while i < self.resps.len() {
            if self.resps[i].ready_at > t {
                i += 1;
                continue;
            }
            let r = self.resps.remove(i);
            let cc = r.req.core;
            match r.req.client {
                Client::IntLsu => {
                    let slot = self.cores[cc]
                        .lsu_resp
                        .iter_mut()
                        .find(|s| s.tag == r.req.tag && !s.ready)
                        .expect("integer load response with no matching slot");
                    slot.data = r.data;
                    slot.ready = true;
                }
                Client::FpLsu => self.fpss[cc].fill_load(r.req.tag, r.data),
                Client::Lane(l) => self.lanes[cc][l as usize].fill_read(r.req.tag, r.data),
            }
        }
    }

    // ---- phase 2: sequencers ----

    fn sequence_phase(&mut self, _t: u64) {
        for c in 0..self.cores.len() {
            let free = !self.fpss[c].queue_full();
            if let Some(inst) = self.seqs[c].step(free) {
                let seq = self.fp_seq[c];
                self.fp_seq[c] += 1;
                self.fpss[c].queue.push_back(FpOp {
                    instr: inst,
                    addr: 0,
                    int_src: 0,
                    seq,
                    sequenced: true,
                });
                self.counters[c].frep_sequenced += 1;
            }
        }
    }

    // ---- phase 3: integer cores ----

    fn core_cycle(&mut self, c: usize, t: u64) -> Result<(), Fault> {
        if self.cores[c].halted {
            return Ok(());
        }

        if self.cores[c].sleeping {
            if self.mem.periph.wake[c] {
                self.mem.periph.wake[c] = false;
                self.cores[c].sleeping = false;
                self.cores[c].pc = self.cores[c].pc.wrapping_add(4);
                self.counters[c].int_retired += 1;
            } else {
                self.counters[c].stall_sync += 1;
            }
            return Ok(());
        }

        if self.cores[c].bubbles > 0 {
            self.cores[c].bubbles -= 1;
            self.counters[c].stall_fetch += 1;
            return Ok(());
        }

        // Fetch.
        let pc = self.cores[c].pc;
        let line_mask = !(self.cfg.icache_line as u32 - 1);
        let line = pc & line_mask;
        if self.cores[c].fetched.is_none_or(|(fpc, _)| fpc != pc) {
            if let Some(wait) = self.cores[c].fetch_pending {
                if wait == line {
                    self.counters[c].stall_fetch += 1;
                    return Ok(());
                }
                // Redirected away from the pending line; the fill completes
                // on its own and simply installs.
                self.cores[c].fetch_pending = None;
            }
            if self.cores[c].l0.contains(line) {
                self.counters[c].l0_hits += 1;
                let idx = self.program.instr_index(pc).ok_or_else(|| {
                    self.fault(c, format!("pc {pc:#010x} is outside the program text"))
                })?;
                self.cores[c].fetched = Some((pc, idx));
            } else {
                self.counters[c].l0_misses += 1;
                let hive = c / self.cfg.cores_per_hive;
                let (h0, m0) = (self.icaches[hive].l1.hits, self.icaches[hive].l1.misses);
                self.icaches[hive].request(c % self.cfg.cores_per_hive, line, t);
                if self.icaches[hive].l1.hits > h0 {
                    self.counters[c].l1_hits += 1;
                } else if self.icaches[hive].l1.misses > m0 {
                    self.counters[c].l1_misses += 1;
                }
                self.cores[c].fetch_pending = Some(line);
                self.counters[c].stall_fetch += 1;
                return Ok(());
            }
        }
        let (_, idx) = self.cores[c].fetched.expect("just fetched");
        let instr = self.program.instrs[idx];

        // Scoreboard: integer sources and destination must be free.
        for r in instr.int_srcs().into_iter().flatten() {
            if self.cores[c].reg_busy(r) {
                self.counters[c].stall_scoreboard += 1;
                return Ok(());
            }
        }
        if let Some(rd) = instr.int_dest() {
            if self.cores[c].reg_busy(rd) {
                self.counters[c].stall_scoreboard += 1;
                return Ok(());
            }
        }

        match instr.class() {
            IssueClass::Local => self.issue_local(c, t, instr),
            IssueClass::MulDiv => self.issue_muldiv(c, t, instr),
            IssueClass::Fpss => self.issue_fp_offload(c, t, instr),
        }
    }

    fn retire(&mut self, c: usize) {
        self.counters[c].int_retired += 1;
        self.cores[c].pc = self.cores[c].pc.wrapping_add(4);
    }

    fn issue_local(&mut self, c: usize, t: u64, instr: Instruction) -> Result<(), Fault> {
        use Mnemonic::*;
        let m = instr.op;

        if instr.is_int_load() || instr.is_int_store() || instr.is_amo() {
            return self.issue_mem(c, instr);
        }

        match m {
            Csrrw | Csrrs | Csrrc | Csrrwi | Csrrsi | Csrrci => self.issue_csr(c, t, instr),
            Ecall => {
                self.cores[c].halted = true;
                self.counters[c].int_retired += 1;
                if self.trace.enabled {
                    self.trace.emit(t, c as u32, "core", "halt", String::new());
                }
                Ok(())
            }
            Wfi => {
                if self.mem.periph.wake[c] {
                    self.mem.periph.wake[c] = false;
                    self.retire(c);
                } else {
                    self.cores[c].sleeping = true;
                    self.counters[c].stall_sync += 1;
                }
                Ok(())
            }
            Scfgwi => {
                if !self.cfg.ssr_enabled {
                    return Err(self.fault(c, "stream registers are disabled in this configuration"));
                }
                let off = instr.imm as u32;
                let lane = (off / 0x100) as usize;
                if lane >= 2 {
                    return Err(self.fault(c, format!("scfgwi to nonexistent lane {lane}")));
                }
                let val = self.cores[c].reg(instr.rs1);
                match self.lanes[c][lane].cfg_write(off % 0x100, val) {
                    Ok(true) => {
                        self.retire(c);
                        Ok(())
                    }
                    Ok(false) => {
                        self.counters[c].stall_offload += 1;
                        Ok(())
                    }
                    Err(e) => Err(self.fault(c, e)),
                }
            }
            _ => {
                let e = cpu::exec_local(
                    m,
                    self.cores[c].reg(instr.rs1),
                    self.cores[c].reg(instr.rs2),
                    instr.imm,
                    self.cores[c].pc,
                    instr.rd,
                );
                if let Some((rd, v)) = e.write {
                    self.cores[c].set_reg(rd, v);
                    if rd != 0 {
                        self.port_claimed[c] = true;
                    }
                }
                self.counters[c].int_retired += 1;
                match e.next_pc {
                    Some(target) => {
                        self.cores[c].pc = target;
                        self.cores[c].bubbles = self.cfg.branch_penalty;
                    }
                    None => self.cores[c].pc = self.cores[c].pc.wrapping_add(4),
                }
                Ok(())
            }
        }
    }

    fn issue_mem(&mut self, c: usize, instr: Instruction) -> Result<(), Fault> {
        use Mnemonic::*;
        let m = instr.op;
        let addr = if instr.is_amo() {
            self.cores[c].reg(instr.rs1)
        } else {
            self.cores[c]
                .reg(instr.rs1)
                .wrapping_add(instr.imm as i32 as u32)
        };
        let width: u8 = match m {
            Lb | Lbu | Sb => 1,
            Lh | Lhu | Sh => 2,
            _ => 4,
        };
        if !mem::aligned(addr, width) {
            return Err(self.fault(
                c,
                format!("misaligned {}-byte access at {addr:#010x}", width),
            ));
        }
        let region = self.mem.region(addr);
        if region == Region::Invalid {
            return Err(self.fault(c, format!("access to unmapped address {addr:#010x}")));
        }
        if instr.is_amo() && region != Region::Tcdm {
            return Err(self.fault(
                c,
                format!("atomic access outside the scratchpad at {addr:#010x}"),
            ));
        }
        if region == Region::SsrCfg && width != 4 {
            return Err(self.fault(c, "stream-configuration access must be word-sized"));
        }

        let is_store = instr.is_int_store();
        if self.cores[c].lsu_req.len() >= self.cfg.lsu_slots {
            self.counters[c].stall_lsu += 1;
            return Ok(());
        }
        if !is_store && self.cores[c].lsu_resp.len() >= self.cfg.lsu_slots {
            self.counters[c].stall_lsu += 1;
            return Ok(());
        }

        let kind = match m {
            Lb | Lh | Lw | Lbu | Lhu => MemKind::Load { width },
            Sb | Sh | Sw => MemKind::Store {
                width,
                data: self.cores[c].reg(instr.rs2) as u64,
            },
            LrW => MemKind::Lr,
            ScW => MemKind::Sc {
                data: self.cores[c].reg(instr.rs2),
            },
            _ => MemKind::Amo {
                op: m,
                data: self.cores[c].reg(instr.rs2),
            },
        };
        let tag = self.cores[c].fresh_tag();
        if !is_store {
            self.cores[c].lsu_resp.push_back(IntLoadSlot {
                tag,
                rd: instr.rd,
                width: kind.width(),
                signed: matches!(m, Lb | Lh),
                data: 0,
                ready: false,
            });
            self.cores[c].set_busy(instr.rd);
        }
        self.cores[c].lsu_req.push_back(MemReq {
            core: c,
            client: Client::IntLsu,
            tag,
            addr,
            kind,
        });
        self.retire(c);
        Ok(())
    }

    fn issue_csr(&mut self, c: usize, t: u64, instr: Instruction) -> Result<(), Fault> {
        use Mnemonic::*;
        let m = instr.op;
        let csr = instr.imm as u32;
        // Immediate forms carry the 5-bit value in the rs1 slot; register
        // forms read the register file.
        let operand = match m {
            Csrrwi | Csrrsi | Csrrci => instr.rs1 as u32,
            _ => self.cores[c].reg(instr.rs1),
        };
        // A csrrs/csrrc with x0 (or a zero immediate) is a pure read and
        // must not trigger write side effects.
        let writes = match m {
            Csrrw | Csrrwi => true,
            Csrrs | Csrrc => instr.rs1 != 0,
            Csrrsi | Csrrci => operand != 0,
            _ => unreachable!(),
        };
        let old = match csr {
            CSR_SSR_ENABLE => self.cores[c].ssr_enabled as u32,
            CSR_PERF_MARKER => 0,
            CSR_MHARTID => c as u32,
            other => return Err(self.fault(c, format!("unknown CSR {other:#x}"))),
        };
        let new = match m {
            Csrrw | Csrrwi => operand,
            Csrrs | Csrrsi => old | operand,
            Csrrc | Csrrci => old & !operand,
            _ => unreachable!(),
        };
        if writes {
            match csr {
                CSR_SSR_ENABLE => {
                    let enabling = new & 1 == 1;
                    if enabling && !self.cfg.ssr_enabled {
                        return Err(self.fault(
                            c,
                            "stream registers are disabled in this configuration",
                        ));
                    }
                    if !enabling && self.cores[c].ssr_enabled {
                        // Disabling requires the FP subsystem and both lanes
                        // to be quiescent so no stream access is in flight.
                        let quiet = self.fpss[c].idle()
                            && !self.seqs[c].busy()
                            && self.lanes[c][0].idle()
                            && self.lanes[c][1].idle();
                        if !quiet {
                            self.counters[c].stall_sync += 1;
                            return Ok(());
                        }
                    }
                    self.cores[c].ssr_enabled = enabling;
                }
                CSR_PERF_MARKER => {
                    self.regions[c].mark(new, t, &self.counters[c]);
                    if self.trace.enabled {
                        self.trace
                            .emit(t, c as u32, "core", "marker", format!("{new}"));
                    }
                }
                CSR_MHARTID => {} // read-only; writes are ignored
                _ => unreachable!(),
            }
        }
        if instr.rd != 0 {
            self.cores[c].set_reg(instr.rd, old);
            self.port_claimed[c] = true;
        }
        self.retire(c);
        Ok(())
    }

    fn issue_muldiv(&mut self, c: usize, t: u64, instr: Instruction) -> Result<(), Fault> {
        use Mnemonic::*;
        let hive = c / self.cfg.cores_per_hive;
        if !self.muldivs[hive].try_accept(t) {
            self.counters[c].stall_offload += 1;
            return Ok(());
        }
        let a = self.cores[c].reg(instr.rs1);
        let b = self.cores[c].reg(instr.rs2);
        let value = cpu::muldiv_value(instr.op, a, b);
        let lat = cpu::muldiv_latency(instr.op, a, self.cfg.mul_latency as u64);
        if matches!(instr.op, Div | Divu | Rem | Remu) {
            self.muldivs[hive].block_until(t + lat - 1);
        }
        self.cores[c].set_busy(instr.rd);
        self.cores[c].push_acc(t + lat - 1, instr.rd, value);
        self.retire(c);
        Ok(())
    }

    fn issue_fp_offload(&mut self, c: usize, t: u64, instr: Instruction) -> Result<(), Fault> {
        use Mnemonic::*;
        let m = instr.op;

        if matches!(m, FrepO | FrepI) {
            if !self.cfg.frep_enabled {
                return Err(self.fault(c, "the loop sequencer is disabled in this configuration"));
            }
            let fields = instr.frep.expect("frep instruction carries its fields");
            if fields.max_inst as usize > self.cfg.frep_buffer {
                return Err(self.fault(
                    c,
                    format!(
                        "frep block of {} instructions exceeds the sequencer buffer ({})",
                        fields.max_inst, self.cfg.frep_buffer
                    ),
                ));
            }
            let reps = self.cores[c].reg(instr.rs1);
            return match self.seqs[c].push_config(fields, reps) {
                Ok(true) => {
                    // The frep itself counts as one FP-subsystem issue; its
                    // instances are counted as they are injected.
                    self.counters[c].fpss_issued += 1;
                    self.cores[c].pc = self.cores[c].pc.wrapping_add(4);
                    if self.trace.enabled {
                        self.trace.emit(
                            t,
                            c as u32,
                            "seq",
                            "config",
                            format!("reps={reps}"),
                        );
                    }
                    Ok(())
                }
                Ok(false) => {
                    self.counters[c].stall_offload += 1;
                    Ok(())
                }
                Err(e) => Err(self.fault(c, e)),
            };
        }

        match self.seqs[c].gate(&instr) {
            Gate::Fault(e) => return Err(self.fault(c, e)),
            Gate::Captured => {
                self.cores[c].pc = self.cores[c].pc.wrapping_add(4);
                return Ok(());
            }
            Gate::Busy => {
                self.counters[c].stall_offload += 1;
                return Ok(());
            }
            Gate::Pass => {}
        }

        if self.fpss[c].queue_full() {
            self.counters[c].stall_offload += 1;
            return Ok(());
        }

        let mut addr = 0u32;
        if instr.is_fp_mem() {
            addr = self.cores[c]
                .reg(instr.rs1)
                .wrapping_add(instr.imm as i32 as u32);
            if !mem::aligned(addr, 8) {
                return Err(self.fault(c, format!("misaligned FP access at {addr:#010x}")));
            }
            let region = self.mem.region(addr);
            if region != Region::Tcdm && region != Region::External {
                return Err(self.fault(
                    c,
                    format!("FP memory access outside data memory at {addr:#010x}"),
                ));
            }
        }
        let int_src = match m {
            FcvtDW | FcvtDWu => self.cores[c].reg(instr.rs1),
            _ => 0,
        };
        if let Some(rd) = instr.int_dest() {
            self.cores[c].set_busy(rd);
        }
        let seq = self.fp_seq[c];
        self.fp_seq[c] += 1;
        self.fpss[c].queue.push_back(FpOp {
            instr,
            addr,
            int_src,
            seq,
            sequenced: false,
        });
        self.cores[c].pc = self.cores[c].pc.wrapping_add(4);
        Ok(())
    }

    // ---- phase 4: FP subsystem issue ----

    fn fp_issue_phase(&mut self, t: u64) -> Result<(), Fault> {
        for c in 0..self.cores.len() {
            let enabled = self.cores[c].ssr_enabled;
            let cfg = &self.cfg;
            let res = self.fpss[c].try_issue(&mut self.lanes[c], enabled, t, |m| {
                cfg.fpu_latency(m) as u64
            });
            match res {
                Ok(op) => {
                    if op.instr.is_fp_mem() {
                        if let Some(r) = self.fpss[c].lsu_req.back_mut() {
                            r.core = c;
                        }
                        self.counters[c].fp_mem += 1;
                    }
                    self.counters[c].fpss_issued += 1;
                    if op.instr.is_fp_arith() {
                        self.counters[c].fpu_arith += 1;
                    }
                    if self.trace.enabled {
                        self.trace.emit(
                            t,
                            c as u32,
                            "fpss",
                            "issue",
                            crate::isa::disasm::disassemble_instr(&op.instr),
                        );
                    }
                }
                Err((_, Some(msg))) => return Err(self.fault(c, msg)),
                Err((IssueStall::SsrEmpty, None)) => {
                    self.counters[c].ssr_stall_empty += 1;
                }
                Err((IssueStall::SsrFull, None)) => {
                    self.counters[c].ssr_stall_full += 1;
                }
                Err(_) => {}
            }
        }
        Ok(())
    }

    // ---- phase 5: memory ----

    fn memory_phase(&mut self, t: u64) -> Result<(), Fault> {
        // Pass 1: port arbitration inside each core complex.
        let mut tcdm: Vec<(usize, usize, MemReq)> = Vec::new(); // (bank, global port, req)
        for cc in 0..self.cores.len() {
            for port in 0..2 {
                let lsu_head = match port {
                    0 => self.cores[cc].lsu_req.front().copied(),
                    _ => self.fpss[cc].lsu_req.front().copied(),
                };
                let lane_req = self.lane_request(cc, port as u8);
                let mut cands: Vec<usize> = Vec::with_capacity(2);
                if lsu_head.is_some() {
                    cands.push(0);
                }
                if lane_req.is_some() {
                    cands.push(1);
                }
                if cands.is_empty() {
                    continue;
                }
                let pick = mem::rr_pick(&mut self.port_rr[cc][port], &cands);
                let req = if pick == 0 {
                    lsu_head.unwrap()
                } else {
                    lane_req.unwrap()
                };
                match self.mem.region(req.addr) {
                    Region::Tcdm => {
                        tcdm.push((self.mem.bank_of(req.addr), cc * 2 + port, req));
                    }
                    Region::Periph => self.grant_periph(t, req),
                    Region::SsrCfg => self.grant_ssr_cfg(t, req)?,
                    Region::External => self.grant_external(t, req)?,
                    Region::Invalid => {
                        return Err(self.fault(
                            req.core,
                            format!("access to unmapped address {:#010x}", req.addr),
                        ));
                    }
                }
            }
        }

        // Pass 2: bank arbitration among port winners.
        // Group by bank, preserving ascending global-port order per bank.
        let mut banks: Vec<usize> = tcdm.iter().map(|&(b, _, _)| b).collect();
        banks.sort_unstable();
        banks.dedup();
        for bank in banks {
            let slots: Vec<usize> = tcdm
                .iter()
                .filter(|&&(b, _, _)| b == bank)
                .map(|&(_, s, _)| s)
                .collect();
            if !self.mem.bank_free(bank, t) {
                for &(b, _, req) in &tcdm {
                    if b == bank {
                        self.counters[req.core].tcdm_conflicts += 1;
                    }
                }
                continue;
            }
            let winner = self.mem.bank_arbitrate(bank, &slots);
            for &(b, s, req) in &tcdm {
                if b != bank {
                    continue;
                }
                if s == winner {
                    self.grant_tcdm(t, req)?;
                } else {
                    self.counters[req.core].tcdm_conflicts += 1;
                }
            }
        }
        Ok(())
    }

    /// The request a stream lane wants to put on `port` this cycle, if any.
    /// Lane 0 rides port 0, lane 1 rides port 1.
    fn lane_request(&self, cc: usize, port: u8) -> Option<MemReq> {
        let lane = &self.lanes[cc][port as usize];
        if let Some((addr, seq)) = lane.want_request() {
            return Some(MemReq {
                core: cc,
                client: Client::Lane(port),
                tag: seq,
                addr,
                kind: MemKind::Load { width: 8 },
            });
        }
        if let Some((addr, data)) = lane.want_drain() {
            return Some(MemReq {
                core: cc,
                client: Client::Lane(port),
                tag: 0,
                addr,
                kind: MemKind::Store { width: 8, data },
            });
        }
        None
    }

    /// Dequeue the granted request from its owning queue and update lane
    /// pattern state. Returns the request (possibly refreshed).
    fn consume_granted(&mut self, req: &MemReq) {
        match req.client {
            Client::IntLsu => {
                self.cores[req.core].lsu_req.pop_front();
            }
            Client::FpLsu => {
                self.fpss[req.core].lsu_req.pop_front();
            }
            Client::Lane(l) => {
                let lane = &mut self.lanes[req.core][l as usize];
                match req.kind {
                    MemKind::Load { .. } => lane.on_read_grant(),
                    MemKind::Store { .. } => lane.on_drain_grant(),
                    _ => unreachable!("lanes only load and store"),
                }
            }
        }
    }

    fn trace_grant(&mut self, t: u64, req: &MemReq) {
        if !self.trace.enabled {
            return;
        }
        let client = match req.client {
            Client::IntLsu => "int",
            Client::FpLsu => "fp",
            Client::Lane(0) => "lane0",
            Client::Lane(_) => "lane1",
        };
        let kind = match req.kind {
            MemKind::Load { .. } => "load",
            MemKind::Store { .. } => "store",
            MemKind::Amo { .. } => "amo",
            MemKind::Lr => "lr",
            MemKind::Sc { .. } => "sc",
        };
        self.trace.emit(
            t,
            req.core as u32,
            "mem",
            "grant",
            format!("{client} {kind} {:#010x}", req.addr),
        );
    }

    fn grant_tcdm(&mut self, t: u64, req: MemReq) -> Result<(), Fault> {
        // Stream elements are 8 bytes and must not straddle banks.
        if matches!(req.client, Client::Lane(_)) && !mem::aligned(req.addr, 8) {
            return Err(self.fault(
                req.core,
                format!("misaligned stream address {:#010x}", req.addr),
            ));
        }
        let data = self
            .mem
            .apply(&req, t)
            .map_err(|e| self.fault(req.core, e))?;
        self.counters[req.core].tcdm_accesses += 1;
        self.consume_granted(&req);
        self.trace_grant(t, &req);
        if !matches!(req.kind, MemKind::Store { .. }) {
            self.resps.push(PendingResp {
                ready_at: t + 1,
                req,
                data,
            });
        }
        Ok(())
    }

    fn grant_external(&mut self, t: u64, req: MemReq) -> Result<(), Fault> {
        if matches!(req.client, Client::Lane(_)) && !mem::aligned(req.addr, 8) {
            return Err(self.fault(
                req.core,
                format!("misaligned stream address {:#010x}", req.addr),
            ));
        }
        let data = self
            .mem
            .apply(&req, t)
            .map_err(|e| self.fault(req.core, e))?;
        self.consume_granted(&req);
        self.trace_grant(t, &req);
        if !matches!(req.kind, MemKind::Store { .. }) {
            self.resps.push(PendingResp {
                ready_at: t + self.cfg.ext_latency as u64,
                req,
                data,
            });
        }
        Ok(())
    }

    fn grant_periph(&mut self, t: u64, req: MemReq) {
        let off = req.addr - self.mem.periph_base;
        match req.kind {
            MemKind::Store { data, .. } => {
                self.mem.periph.write(off, data as u32);
                self.consume_granted(&req);
                self.trace_grant(t, &req);
            }
            MemKind::Load { .. } => {
                let data = self.mem.periph.read(off, t) as u64;
                self.consume_granted(&req);
                self.trace_grant(t, &req);
                self.resps.push(PendingResp {
                    ready_at: t + 1,
                    req,
                    data,
                });
            }
            _ => unreachable!("atomics to peripherals are rejected at issue"),
        }
    }

    fn grant_ssr_cfg(&mut self, t: u64, req: MemReq) -> Result<(), Fault> {
        let off = req.addr - self.mem.ssr_cfg_base;
        let lane = (off / 0x100) as usize;
        if lane >= 2 {
            return Err(self.fault(
                req.core,
                format!("stream-configuration access to nonexistent lane {lane}"),
            ));
        }
        match req.kind {
            MemKind::Store { data, .. } => {
                match self.lanes[req.core][lane].cfg_write(off % 0x100, data as u32) {
                    Ok(true) => {
                        self.consume_granted(&req);
                        self.trace_grant(t, &req);
                    }
                    // Shadow slot still occupied: the head request retries
                    // next cycle (and keeps its port).
                    Ok(false) => {}
                    Err(e) => return Err(self.fault(req.core, e)),
                }
            }
            MemKind::Load { .. } => {
                let data = self.lanes[req.core][lane].cfg_read(off % 0x100) as u64;
                self.consume_granted(&req);
                self.trace_grant(t, &req);
                self.resps.push(PendingResp {
                    ready_at: t + 1,
                    req,
                    data,
                });
            }
            _ => unreachable!("atomics to the configuration window are rejected at issue"),
        }
        Ok(())
    }

    // ---- phase 6: icache ----

    fn icache_phase(&mut self, t: u64) {
        for hive in 0..self.icaches.len() {
            for (line, waiters) in self.icaches[hive].take_ready(t) {
                for b in 0..self.cfg.cores_per_hive {
                    if waiters & (1 << b) == 0 {
                        continue;
                    }
                    let c = hive * self.cfg.cores_per_hive + b;
                    self.cores[c].l0.install(line);
                    if self.cores[c].fetch_pending == Some(line) {
                        self.cores[c].fetch_pending = None;
                    }
                }
            }
        }
    }

    // ---- phase 7: commit ----

    fn commit_phase(&mut self, t: u64) {
        for c in 0..self.cores.len() {
            // FP side first: its integer-destination results may commit over
            // the accelerator channel in this same phase.
            if let Some(ir) = self.fpss[c].commit(&mut self.lanes[c], t) {
                self.cores[c].push_acc(t, ir.rd, ir.data);
            }
            if self.port_claimed[c] {
                continue;
            }
            // Load response head, then accelerator channel.
            let mut consumed = false;
            if self.cores[c].lsu_resp.front().is_some_and(|s| s.ready) {
                let slot = self.cores[c].lsu_resp.pop_front().expect("head exists");
                let v = extend_load(slot.data, slot.width, slot.signed);
                self.cores[c].set_reg(slot.rd, v);
                self.cores[c].clear_busy(slot.rd);
                consumed = true;
            }
            if !consumed {
                if let Some(a) = self.cores[c].pop_acc(t) {
                    self.cores[c].set_reg(a.rd, a.data);
                    self.cores[c].clear_busy(a.rd);
                }
            }
        }
    }

    // ---- phase 8: housekeeping ----

    fn housekeeping(&mut self, t: u64) -> Result<(), Fault> {
        for c in 0..self.cores.len() {
            self.counters[c].ssr_elements =
                self.lanes[c][0].elements + self.lanes[c][1].elements;
        }
        let work: u64 = self
            .counters
            .iter()
            .map(|c| c.int_retired + c.fpss_issued)
            .sum();
        if work != self.prev_work {
            self.prev_work = work;
            self.last_progress = t;
        } else if t - self.last_progress > self.cfg.watchdog {
            return Err(Fault {
                cycle: t,
                core: None,
                msg: format!(
                    "no instruction retired for {} cycles; likely deadlock\n{}",
                    self.cfg.watchdog,
                    self.stall_summary()
                ),
            });
        }
        Ok(())
    }

    /// Metrics over the marked measurement region (see `perf::run_metrics`).
    pub fn metrics(&self) -> Result<crate::perf::RunMetrics, String> {
        crate::perf::run_metrics(&self.regions, self.cycle)
    }

    fn stall_summary(&self) -> String {
        use std::fmt::Write as _;
        let mut s = String::new();
        for (i, core) in self.cores.iter().enumerate() {
            let st = if core.halted {
                "halted"
            } else if core.sleeping {
                "sleeping"
            } else {
                "running"
            };
            let k = &self.counters[i];
            let _ = writeln!(
                s,
                "  core {i}: pc={:#010x} {st}; stalls: scoreboard={} lsu={} offload={} \
                 fetch={} sync={} ssr_empty={} ssr_full={}",
                core.pc,
                k.stall_scoreboard,
                k.stall_lsu,
                k.stall_offload,
                k.stall_fetch,
                k.stall_sync,
                k.ssr_stall_empty,
                k.ssr_stall_full
            );
        }
        s
    }
}

/// Width/sign extension for integer load data.
fn extend_load(data: u64, width: u8, signed: bool) -> u32 {
    match (width, signed) {
        (1, false) => data as u8 as u32,
        (1, true) => data as u8 as i8 as i32 as u32,
        (2, false) => data as u16 as u32,
        (2, true) => data as u16 as i16 as i32 as u32,
        _ => data as u32,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg1() -> SimConfig {
        SimConfig {
            hives: 1,
            cores_per_hive: 1,
            ..SimConfig::default()
        }
    }

    fn run_one(cfg: SimConfig, src: &str) -> Cluster {
        let mut cl = Cluster::from_asm(cfg, src).expect("assembles");
        cl.run(200_000).expect("runs to completion");
        cl
    }

    #[test]
    fn halts_with_computed_registers() {
        let cl = run_one(
            cfg1(),
            "
            li t0, 7
            li t1, 5
            add t2, t0, t1
            sub t3, t0, t1
            ecall
            ",
        );
        assert!(cl.cores[0].halted);
        assert_eq!(cl.cores[0].reg(7), 12); // t2
        assert_eq!(cl.cores[0].reg(28), 2); // t3
    }

    #[test]
    fn loads_and_stores_round_trip_all_widths() {
        let cl = run_one(
            cfg1(),
            "
            li a0, 0x100000
            li t0, -2
            sw t0, 0(a0)
            lw t1, 0(a0)
            lh t2, 0(a0)
            lhu t3, 0(a0)
            lb t4, 0(a0)
            lbu t5, 0(a0)
            li t6, 0xbeef
            sh t6, 8(a0)
            lhu s0, 8(a0)
            ecall
            ",
        );
        let c = &cl.cores[0];
        assert_eq!(c.reg(6), 0xffff_fffe); // lw
        assert_eq!(c.reg(7), 0xffff_fffe); // lh sign-extends
        assert_eq!(c.reg(28), 0xfffe); // lhu
        assert_eq!(c.reg(29), 0xffff_fffe); // lb
        assert_eq!(c.reg(30), 0xfe); // lbu
        assert_eq!(c.reg(8), 0xbeef);
    }

    #[test]
    fn fp_pipeline_computes_through_memory() {
        let cl = run_one(
            cfg1(),
            "
            .data 0x100000
        vals:
            .dword 0x3ff0000000000000, 0x4000000000000000  # 1.0, 2.0
            .text
            la a0, vals
            fld ft2, 0(a0)
            fld ft3, 8(a0)
            fadd.d ft4, ft2, ft3
            fmul.d ft5, ft4, ft3
            fsd ft4, 16(a0)
            fsd ft5, 24(a0)
            ecall
            ",
        );
        // run() only finishes once the FP store queue has drained.
        assert_eq!(cl.mem.read(0x10_0010, 8).unwrap(), 3.0f64.to_bits());
        assert_eq!(cl.mem.read(0x10_0018, 8).unwrap(), 6.0f64.to_bits());
    }

    #[test]
    fn fp_compare_returns_to_integer_side() {
        let cl = run_one(
            cfg1(),
            "
            .data 0x100000
            .dword 0x4008000000000000, 0x3ff0000000000000  # 3.0, 1.0
            .text
            li a0, 0x100000
            fld ft2, 0(a0)
            fld ft3, 8(a0)
            flt.d t0, ft3, ft2
            flt.d t1, ft2, ft3
            fcvt.w.d t2, ft2
            add t3, t0, t1
            ecall
            ",
        );
        let c = &cl.cores[0];
        assert_eq!(c.reg(5), 1);
        assert_eq!(c.reg(6), 0);
        assert_eq!(c.reg(7), 3);
        assert_eq!(c.reg(28), 1);
    }

    #[test]
    fn wake_store_releases_wfi_on_another_core() {
        let cfg = SimConfig {
            hives: 1,
            cores_per_hive: 2,
            ..SimConfig::default()
        };
        let cl = run_one(
            cfg,
            "
            csrr t0, mhartid
            bne t0, x0, sleeper
            li t1, 0x200014
            li t2, 0b10
            sw t2, 0(t1)
            ecall
        sleeper:
            wfi
            li s0, 1
            ecall
            ",
        );
        assert!(cl.cores.iter().all(|c| c.halted));
        assert_eq!(cl.cores[1].reg(8), 1);
        assert!(cl.counters[1].stall_sync > 0);
    }

    #[test]
    fn watchdog_reports_deadlock() {
        let cfg = SimConfig {
            watchdog: 100,
            ..cfg1()
        };
        let mut cl = Cluster::from_asm(cfg, "wfi\necall").unwrap();
        let e = cl.run(10_000).unwrap_err();
        assert!(e.msg.contains("likely deadlock"), "{}", e.msg);
        assert!(e.msg.contains("sleeping"), "{}", e.msg);
    }

    #[test]
    fn faults_carry_core_and_cycle() {
        let mut cl = Cluster::from_asm(
            cfg1(),
            "
            li a0, 0x100001
            lw t0, 0(a0)
            ecall
            ",
        )
        .unwrap();
        let e = cl.run(10_000).unwrap_err();
        assert_eq!(e.core, Some(0));
        assert!(e.msg.contains("misaligned"), "{}", e.msg);
    }

    #[test]
    fn unmapped_access_faults() {
        let mut cl = Cluster::from_asm(
            cfg1(),
            "
            li a0, 0x300000
            li a1, 0x12345678
            sw a1, 0x400(a0)   # just past the config window
            ecall
            ",
        )
        .unwrap();
        let e = cl.run(10_000).unwrap_err();
        assert!(e.msg.contains("unmapped"), "{}", e.msg);
    }

    #[test]
    fn peripheral_window_reports_machine_shape() {
        let cl = run_one(
            cfg1(),
            "
            li a0, 0x200000
            lw t0, 0(a0)    # core count
            lw t1, 4(a0)    # scratchpad base
            lw t2, 8(a0)    # scratchpad end
            ecall
            ",
        );
        let c = &cl.cores[0];
        assert_eq!(c.reg(5), 1);
        assert_eq!(c.reg(6), 0x10_0000);
        assert_eq!(c.reg(7), 0x12_0000);
    }

    #[test]
    fn mhartid_distinguishes_cores() {
        let cfg = SimConfig::default(); // 8 cores
        let cl = run_one(
            cfg,
            "
            csrr t0, mhartid
            slli t1, t0, 2
            li a0, 0x100000
            add a0, a0, t1
            sw t0, 0(a0)
            ecall
            ",
        );
        for i in 0..8u32 {
            assert_eq!(
                cl.mem.read(0x10_0000 + 4 * i, 4).unwrap(),
                i as u64,
                "core {i} slot"
            );
        }
    }

    #[test]
    fn atomics_serialize_across_cores() {
        let cfg = SimConfig::default(); // 8 cores
        let cl = run_one(
            cfg,
            "
            li a0, 0x100000
            li t1, 1
            li t2, 100
        loop:
            amoadd.w t0, t1, (a0)
            addi t2, t2, -1
            bne t2, x0, loop
            ecall
            ",
        );
        assert_eq!(cl.mem.read(0x10_0000, 4).unwrap(), 800);
    }

    #[test]
    fn lr_sc_retry_loop_counts_exactly() {
        let cfg = SimConfig::default();
        let cl = run_one(
            cfg,
            "
            li a0, 0x100000
            li t2, 50
        retry:
            lr.w t0, (a0)
            addi t0, t0, 1
            sc.w t1, t0, (a0)
            bne t1, x0, retry
            addi t2, t2, -1
            bne t2, x0, retry
            ecall
            ",
        );
        assert_eq!(cl.mem.read(0x10_0000, 4).unwrap(), 400);
    }

    #[test]
    fn ssr_stream_feeds_fp_and_drains_to_memory() {
        // Lane 0 reads 8 doubles, lane 1 writes 8 doubles: y[i] = 2 * x[i].
        let mut src = String::from(".data 0x100000\nx:\n    .dword ");
        let xs: Vec<String> = (0..8).map(|i| format!("{:#x}", (i as f64 + 1.0).to_bits())).collect();
        src.push_str(&xs.join(", "));
        src.push_str(
            "
        y:
            .dword 0, 0, 0, 0, 0, 0, 0, 0
        two:
            .dword 0x4000000000000000
            .text
            li a2, 0x100080
            fld ft3, 0(a2)              # 2.0, read while ft registers are ordinary
            li a0, 0x100000
            scfgwi a0, 0, base
            li t0, 8
            scfgwi t0, 0, stride0
            scfgwi t0, 0, bound0
            li t1, 1
            scfgwi t1, 0, commit        # read, 1 dim
            li a1, 0x100040
            scfgwi a1, 1, base
            scfgwi t0, 1, stride0
            scfgwi t0, 1, bound0
            li t1, 0b1001
            scfgwi t1, 1, commit        # write, 1 dim
            csrsi ssr, 1
            fmul.d ft1, ft0, ft3
            fmul.d ft1, ft0, ft3
            fmul.d ft1, ft0, ft3
            fmul.d ft1, ft0, ft3
            fmul.d ft1, ft0, ft3
            fmul.d ft1, ft0, ft3
            fmul.d ft1, ft0, ft3
            fmul.d ft1, ft0, ft3
            csrci ssr, 1
            ecall
            ",
        );
        let cl = run_one(cfg1(), &src);
        for i in 0..8 {
            let want = ((i as f64 + 1.0) * 2.0).to_bits();
            assert_eq!(
                cl.mem.read(0x10_0040 + 8 * i, 8).unwrap(),
                want,
                "y[{i}]"
            );
        }
        assert_eq!(cl.counters[0].ssr_elements, 16);
    }

    #[test]
    fn frep_repeats_a_block_without_refetching(){
        // Sum 1.0 eight times into ft2 via an outer loop over one fadd.
        let cl = run_one(
            cfg1(),
            "
            .data 0x100000
            .dword 0x3ff0000000000000
            .text
            li a0, 0x100000
            fld ft3, 0(a0)
            fcvt.d.w ft2, x0
            li t0, 8
            frep.o t0, 1, 0, 0
            fadd.d ft2, ft2, ft3
            fcvt.w.d t1, ft2
            add t2, t1, x0
            ecall
            ",
        );
        assert_eq!(cl.cores[0].reg(7), 8);
        assert_eq!(cl.counters[0].frep_sequenced, 8);
        // One issue for the frep configuration itself plus the sequenced
        // instances plus fld/fcvt/fcvt.
        assert_eq!(cl.counters[0].fpss_issued, 1 + 8 + 3);
    }

    #[test]
    fn deterministic_across_runs() {
        let src = "
            .data 0x100000
            .dword 0x3ff0000000000000, 0x4000000000000000
            .text
            csrr t0, mhartid
            li a0, 0x100000
            fld ft2, 0(a0)
            fld ft3, 8(a0)
            fmadd.d ft4, ft2, ft3, ft2
            fsd ft4, 16(a0)
            amoadd.w t1, t0, (a0)
            ecall
            ";
        let run = || {
            let mut cl = Cluster::from_asm(SimConfig::default(), src).unwrap();
            cl.trace.enabled = true;
            let cycles = cl.run(100_000).unwrap();
            (cycles, cl.trace.render())
        };
        let (c1, t1) = run();
        let (c2, t2) = run();
        assert_eq!(c1, c2);
        assert_eq!(t1, t2);
        assert!(!t2.is_empty());
    }

    #[test]
    fn feature_flags_gate_streams_and_sequencer() {
        let plain = "
            .data 0x100000
            .dword 0x4000000000000000
            .text
            li a0, 0x100000
            fld ft2, 0(a0)
            fadd.d ft3, ft2, ft2
            fsd ft3, 8(a0)
            ecall
            ";
        // Code that touches neither feature behaves identically with both
        // features compiled out.
        let run = |cfg: SimConfig| {
            let mut cl = Cluster::from_asm(cfg, plain).unwrap();
            cl.trace.enabled = true;
            let cycles = cl.run(100_000).unwrap();
            (cycles, cl.trace.render())
        };
        let stripped = SimConfig {
            ssr_enabled: false,
            frep_enabled: false,
            ..cfg1()
        };
        assert_eq!(run(cfg1()), run(stripped.clone()));

        // Touching a disabled feature faults rather than misbehaving.
        let mut cl = Cluster::from_asm(stripped.clone(), "csrsi ssr, 1\necall").unwrap();
        assert!(cl.run(1000).unwrap_err().msg.contains("disabled"));
        let mut cl = Cluster::from_asm(stripped.clone(), "scfgwi t0, 0, base\necall").unwrap();
        assert!(cl.run(1000).unwrap_err().msg.contains("disabled"));
        let mut cl = Cluster::from_asm(
            stripped,
            "li t0, 4\nfrep.o t0, 1, 0, 0\nfadd.d ft3, ft3, ft3\necall",
        )
        .unwrap();
        assert!(cl.run(1000).unwrap_err().msg.contains("disabled"));
    }
}
