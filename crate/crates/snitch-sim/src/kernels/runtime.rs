//! Shared scaffolding for building benchmark programs in assembly text.
//!
//! `Prog` owns the text/data sections plus a bump allocator over scratchpad
//! memory, and provides the common idioms every kernel needs: unique labels,
//! `li` convenience, an all-core barrier, stream-descriptor programming, and
//! the timed-region harness.
//!
//! Register conventions baked into these helpers:
//!
//! * `s8` holds the hart id (written once by the harness prologue),
//!   `s9`-`s11` drive the warm/measure pass loop — kernel bodies must treat
//!   all four as reserved.
//! * the barrier clobbers `t0`-`t2`; stream helpers clobber `t3`.

use crate::config::SimConfig;
use std::fmt::Write as _;

/// One dimension of a stream descriptor: byte stride and iteration count.
/// Dimension 0 is innermost (fastest varying).
#[derive(Clone, Copy, Debug)]
pub struct Dim {
    pub stride: i32,
    pub bound: u32,
}

pub struct Prog {
    text: String,
    dseg: Vec<(u32, Seg)>,
    labels: u32,
    cursor: u32,
    limit: u32,
    pub tcdm_base: u32,
    pub wake_addr: u32,
    pub ncores: u32,
}

enum Seg {
    Dwords(Vec<u64>),
    Words(Vec<u32>),
}

impl Prog {
    pub fn new(cfg: &SimConfig) -> Self {
        Prog {
            text: String::new(),
            dseg: Vec::new(),
            labels: 0,
            cursor: cfg.tcdm_base,
            limit: cfg.tcdm_end(),
            tcdm_base: cfg.tcdm_base,
            wake_addr: cfg.periph_base + 0x14,
            ncores: cfg.cores() as u32,
        }
    }

    /// Reserve `bytes` of scratchpad (8-aligned). Fails up front when the
    /// working set cannot fit, so no program is ever run on bad addresses.
    pub fn alloc(&mut self, what: &str, bytes: u32) -> Result<u32, String> {
        let addr = self.cursor;
        let end = addr
            .checked_add(bytes.checked_add(7).ok_or("allocation size overflow")? & !7)
            .ok_or("allocation address overflow")?;
        if end > self.limit {
            return Err(format!(
                "{what}: {bytes} bytes at {addr:#010x} exceed scratchpad end {:#010x}",
                self.limit
            ));
        }
        self.cursor = end;
        Ok(addr)
    }

    /// Skip bytes so the next allocation lands on a chosen bank offset
    /// (used to keep read and write traffic off the same banks).
    pub fn skip(&mut self, bytes: u32) {
        self.cursor += bytes;
    }

    pub fn dwords(&mut self, addr: u32, vals: &[u64]) {
        self.dseg.push((addr, Seg::Dwords(vals.to_vec())));
    }

    pub fn doubles(&mut self, addr: u32, vals: &[f64]) {
        let bits: Vec<u64> = vals.iter().map(|v| v.to_bits()).collect();
        self.dwords(addr, &bits);
    }

    pub fn words(&mut self, addr: u32, vals: &[u32]) {
        self.dseg.push((addr, Seg::Words(vals.to_vec())));
    }

    /// Append one instruction (or raw line) to the text section.
    pub fn op(&mut self, line: &str) {
        writeln!(self.text, "    {line}").unwrap();
    }

    /// Place a previously minted label.
    pub fn bind(&mut self, label: &str) {
        writeln!(self.text, "{label}:").unwrap();
    }

    /// Mint a unique label from a stem.
    pub fn label(&mut self, stem: &str) -> String {
        self.labels += 1;
        format!("{stem}_{}", self.labels)
    }

    pub fn li(&mut self, reg: &str, val: i64) {
        self.op(&format!("li {reg}, {val}"));
    }

    pub fn li_addr(&mut self, reg: &str, addr: u32) {
        self.op(&format!("li {reg}, {:#x}", addr));
    }

    /// All-core rendezvous on an atomic counter at `ctr` (one zeroed word in
    /// scratchpad). The last arriver resets the counter and wakes everyone,
    /// itself included; the wake flag is sticky so order cannot deadlock.
    /// Clobbers t0-t2.
    pub fn barrier(&mut self, ctr: u32) {
        let skip = self.label("bar");
        self.li_addr("t0", ctr);
        self.li("t1", 1);
        self.op("amoadd.w t1, t1, (t0)");
        self.li("t2", i64::from(self.ncores) - 1);
        self.op(&format!("bne t1, t2, {skip}"));
        self.op("sw zero, 0(t0)");
        self.li_addr("t1", self.wake_addr);
        self.li("t2", (1i64 << self.ncores) - 1);
        self.op("sw t2, 0(t1)");
        self.bind(&skip);
        self.op("wfi");
    }

    /// Wrap `body` in the timed-region harness and finish with `ecall`.
    ///
    /// Warm mode runs the body twice: the first pass writes marker value 2
    /// (ignored by the region tracker) so caches, predictors and stream
    /// plumbing are hot; the second writes 1/0 and is the measured region.
    /// Cold mode runs once with markers 1/0 around the body, so fills and
    /// configuration cost land inside the measurement.
    ///
    /// An all-core barrier precedes each pass so the region windows line up
    /// across cores. The body is emitted once; it must be idempotent
    /// (re-running it must produce the same outputs).
    pub fn harness(&mut self, ctr: u32, cold: bool, body: impl FnOnce(&mut Prog)) {
        self.op("csrr s8, mhartid");
        if cold {
            self.barrier(ctr);
            self.op("csrwi marker, 1");
            body(self);
            self.op("csrwi marker, 0");
            self.op("ecall");
            return;
        }
        let pass = self.label("pass");
        let done = self.label("done");
        self.li("s9", 0);
        self.li("s10", 2);
        self.li("s11", 2);
        self.bind(&pass);
        self.barrier(ctr);
        self.op("csrw marker, s10");
        body(self);
        self.op("csrw marker, s11");
        self.op(&format!("bne s9, zero, {done}"));
        self.li("s9", 1);
        self.li("s10", 1);
        self.li("s11", 0);
        self.op(&format!("j {pass}"));
        self.bind(&done);
        self.op("ecall");
    }

    /// Program every field of a stream descriptor and arm it. Dimension 0 of
    /// `dims` is innermost. Clobbers t3.
    pub fn stream_full(&mut self, lane: u8, base: u32, dims: &[Dim], write: bool) {
        self.li_addr("t3", base);
        self.op(&format!("scfgwi t3, {lane}, base"));
        self.stream_rest(lane, dims, write);
    }

    /// Same as [`stream_full`](Self::stream_full) but the base address comes
    /// from a register (for bases computed per core or walked per tile).
    pub fn stream_full_reg(&mut self, lane: u8, base_reg: &str, dims: &[Dim], write: bool) {
        self.op(&format!("scfgwi {base_reg}, {lane}, base"));
        self.stream_rest(lane, dims, write);
    }

    fn stream_rest(&mut self, lane: u8, dims: &[Dim], write: bool) {
        assert!(!dims.is_empty() && dims.len() <= 4, "1-4 stream dimensions");
        for (d, dim) in dims.iter().enumerate() {
            self.li("t3", i64::from(dim.stride));
            self.op(&format!("scfgwi t3, {lane}, stride{d}"));
            self.li("t3", i64::from(dim.bound));
            self.op(&format!("scfgwi t3, {lane}, bound{d}"));
        }
        self.li("t3", i64::from(commit_value(dims.len(), write)));
        self.op(&format!("scfgwi t3, {lane}, commit"));
    }

    /// Re-arm a lane whose shape is unchanged: write a new base from a
    /// register and commit again. Clobbers t3.
    pub fn stream_rebase(&mut self, lane: u8, base_reg: &str, ndims: usize, write: bool) {
        self.op(&format!("scfgwi {base_reg}, {lane}, base"));
        self.li("t3", i64::from(commit_value(ndims, write)));
        self.op(&format!("scfgwi t3, {lane}, commit"));
    }

    /// Emit a per-core parameter table (`rows[c]` for core `c`, all rows the
    /// same length, padded to a power of two words) and return a closure-free
    /// recipe: generators call [`load_core_row`](Self::load_core_row) to pull
    /// fields into registers.
    pub fn core_table(&mut self, what: &str, rows: &[Vec<u32>]) -> Result<CoreTable, String> {
        assert_eq!(rows.len(), self.ncores as usize, "one row per core");
        let width = rows.iter().map(Vec::len).max().unwrap_or(1).max(1);
        let padded = width.next_power_of_two();
        let base = self.alloc(what, (rows.len() * padded * 4) as u32)?;
        let mut flat = Vec::with_capacity(rows.len() * padded);
        for row in rows {
            flat.extend_from_slice(row);
            flat.extend(std::iter::repeat_n(0, padded - row.len()));
        }
        self.words(base, &flat);
        Ok(CoreTable { base, shift: padded.trailing_zeros() + 2 })
    }

    /// Load fields of this core's table row into registers. `fields` pairs a
    /// destination register with a word index into the row. Clobbers t3.
    pub fn load_core_row(&mut self, tbl: &CoreTable, fields: &[(&str, usize)]) {
        self.li_addr("t3", tbl.base);
        self.op(&format!("slli t4, s8, {}", tbl.shift));
        self.op("add t3, t3, t4");
        for (reg, idx) in fields {
            self.op(&format!("lw {reg}, {}(t3)", idx * 4));
        }
    }

    /// Assemble the final program text: code first, then data segments in
    /// ascending address order (the assembler requires ascending `.data`).
    pub fn finish(self) -> String {
        let mut out = String::with_capacity(self.text.len() + 64 * self.dseg.len());
        out.push_str(".text\n");
        out.push_str(&self.text);
        let mut segs = self.dseg;
        segs.sort_by_key(|(addr, _)| *addr);
        for pair in segs.windows(2) {
            let (a, seg) = &pair[0];
            let len = match seg {
                Seg::Dwords(v) => v.len() * 8,
                Seg::Words(v) => v.len() * 4,
            } as u32;
            assert!(a + len <= pair[1].0, "data segments overlap at {:#x}", pair[1].0);
        }
        for (addr, seg) in &segs {
            writeln!(out, ".data {addr:#x}").unwrap();
            match seg {
                Seg::Dwords(vals) => {
                    for chunk in vals.chunks(8) {
                        let row: Vec<String> =
                            chunk.iter().map(|v| format!("{v:#018x}")).collect();
                        writeln!(out, ".dword {}", row.join(", ")).unwrap();
                    }
                }
                Seg::Words(vals) => {
                    for chunk in vals.chunks(8) {
                        let row: Vec<String> = chunk.iter().map(|v| format!("{v:#x}")).collect();
                        writeln!(out, ".word {}", row.join(", ")).unwrap();
                    }
                }
            }
        }
        out
    }
}

/// Handle to a per-core parameter table in scratchpad.
pub struct CoreTable {
    pub base: u32,
    shift: u32,
}

/// Commit-register value arming a descriptor: dimension count plus the
/// write-direction flag in bit 3.
pub fn commit_value(ndims: usize, write: bool) -> u32 {
    ndims as u32 | if write { 8 } else { 0 }
}

/// Split `total` items over `parts` workers: worker `idx` gets `(start, len)`
/// with the first `total % parts` workers one item longer.
pub fn chunk(total: u32, parts: u32, idx: u32) -> (u32, u32) {
    let base = total / parts;
    let extra = total % parts;
    let len = base + u32::from(idx < extra);
    let start = idx * base + idx.min(extra);
    (start, len)
}
