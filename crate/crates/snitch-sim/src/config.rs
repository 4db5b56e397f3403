//! Machine configuration: every timing and sizing knob of the simulated
//! cluster, with a `key = value` text format for overrides.

use crate::isa::asm::parse_int_literal;
use crate::isa::Mnemonic;
use std::fmt;

/// All configurable parameters. `Default` describes the reference machine:
/// 2 hives x 4 cores, 128 KiB of TCDM in 32 banks, 0-cycle taken branches,
/// a 3-cycle fused multiply-add pipeline, and 4-deep stream FIFOs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimConfig {
    /// Core groups sharing an L1 instruction cache and a mul/div unit.
    pub hives: usize,
    pub cores_per_hive: usize,
    /// Scratchpad memory (TCDM) base address.
    pub tcdm_base: u32,
    /// Number of TCDM banks; addresses interleave across banks at 8-byte
    /// granularity.
    pub tcdm_banks: usize,
    /// Bytes per bank.
    pub tcdm_bank_bytes: usize,
    /// Cluster peripheral window base (core count, cycle counter, scratch,
    /// wake register).
    pub periph_base: u32,
    /// Per-core stream-configuration window base (lane L at +L*0x100).
    pub ssr_cfg_base: u32,
    /// Addresses at or above this are external memory.
    pub ext_base: u32,
    /// Flat external-memory access latency in cycles.
    pub ext_latency: u32,
    /// Cycles for an L1 instruction-cache line refill from external memory.
    pub icache_refill_latency: u32,
    /// Fully associative per-core L0 loop buffer, in lines.
    pub l0_lines: usize,
    /// Per-hive L1 instruction cache size in bytes.
    pub l1_bytes: usize,
    pub l1_ways: usize,
    /// Instruction cache line size in bytes (both levels).
    pub icache_line: usize,
    /// Outstanding integer-LSU operations per core.
    pub lsu_slots: usize,
    /// Outstanding FP-LSU operations per FP subsystem.
    pub fp_lsu_slots: usize,
    /// FP subsystem issue-queue depth.
    pub fpss_queue: usize,
    /// Stream lane data-FIFO depth, in 8-byte elements.
    pub ssr_fifo: usize,
    /// Sequencer instruction-buffer capacity.
    pub frep_buffer: usize,
    /// Sequencer configuration-queue depth (back-to-back frep blocks).
    pub frep_configs: usize,
    /// Extra cycles after a taken branch or jump.
    pub branch_penalty: u32,
    /// Dependent-issue distance of add/mul/fused ops.
    pub lat_fma: u32,
    /// Dependent-issue distance of comparisons, sign injection, min/max.
    pub lat_cmp: u32,
    /// Dependent-issue distance of int<->double conversions.
    pub lat_cvt: u32,
    /// Dependent-issue distance of integer multiply.
    pub mul_latency: u32,
    /// Abort if no core retires anything for this many cycles.
    pub watchdog: u64,
    /// Stream registers available. When false, touching the stream CSR or a
    /// stream configuration register faults.
    pub ssr_enabled: bool,
    /// Loop sequencer available. When false, `frep` faults.
    pub frep_enabled: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            hives: 2,
            cores_per_hive: 4,
            tcdm_base: 0x0010_0000,
            tcdm_banks: 32,
            tcdm_bank_bytes: 4096,
            periph_base: 0x0020_0000,
            ssr_cfg_base: 0x0030_0000,
            ext_base: 0x4000_0000,
            ext_latency: 20,
            icache_refill_latency: 10,
            l0_lines: 4,
            l1_bytes: 8192,
            l1_ways: 2,
            icache_line: 32,
            lsu_slots: 4,
            fp_lsu_slots: 4,
            fpss_queue: 8,
            ssr_fifo: 4,
            frep_buffer: 16,
            frep_configs: 2,
            branch_penalty: 0,
            lat_fma: 3,
            lat_cmp: 1,
            lat_cvt: 2,
            mul_latency: 2,
            watchdog: 10_000,
            ssr_enabled: true,
            frep_enabled: true,
        }
    }
}

/// Configuration file error with 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: usize,
    pub msg: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config line {}: {}", self.line, self.msg)
    }
}

impl std::error::Error for ConfigError {}

impl SimConfig {
    pub fn cores(&self) -> usize {
        self.hives * self.cores_per_hive
    }

    pub fn tcdm_bytes(&self) -> usize {
        self.tcdm_banks * self.tcdm_bank_bytes
    }

    pub fn tcdm_end(&self) -> u32 {
        self.tcdm_base + self.tcdm_bytes() as u32
    }

    /// Dependent-issue distance of an FP operation.
    pub fn fpu_latency(&self, m: Mnemonic) -> u32 {
        use Mnemonic::*;
        match m {
            FaddD | FsubD | FmulD | FmaddD | FmsubD | FnmsubD | FnmaddD => self.lat_fma,
            FsgnjD | FsgnjnD | FsgnjxD | FminD | FmaxD | FeqD | FltD | FleD => self.lat_cmp,
            FcvtWD | FcvtWuD | FcvtDW | FcvtDWu => self.lat_cvt,
            _ => panic!("{} is not an FPU operation", m.name()),
        }
    }

    /// Parse `key = value` lines (# comments) on top of the defaults.
    pub fn from_kv_text(text: &str) -> Result<SimConfig, ConfigError> {
        let mut cfg = SimConfig::default();
        cfg.apply_kv_text(text)?;
        Ok(cfg)
    }

    /// Apply `key = value` lines to this configuration.
    pub fn apply_kv_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError {
                line: line_no,
                msg: format!("expected 'key = value', got '{line}'"),
            })?;
            self.apply_kv(key.trim(), value.trim())
                .map_err(|msg| ConfigError { line: line_no, msg })?;
        }
        Ok(())
    }

    /// Apply one key/value pair. Unknown keys and malformed values error.
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<(), String> {
        let v = parse_int_literal(value).ok_or_else(|| format!("bad number '{value}'"))?;
        let pos = |v: i64| -> Result<usize, String> {
            if v < 1 {
                Err(format!("'{key}' must be positive"))
            } else {
                Ok(v as usize)
            }
        };
        let nonneg = |v: i64| -> Result<u32, String> {
            if !(0..=u32::MAX as i64).contains(&v) {
                Err(format!("'{key}' must be a 32-bit non-negative value"))
            } else {
                Ok(v as u32)
            }
        };
        let flag = |v: i64| -> Result<bool, String> {
            match v {
                0 => Ok(false),
                1 => Ok(true),
                _ => Err(format!("'{key}' must be 0 or 1")),
            }
        };
        match key {
            "hives" => self.hives = pos(v)?,
            "cores_per_hive" => self.cores_per_hive = pos(v)?,
            "tcdm_base" => self.tcdm_base = nonneg(v)?,
            "tcdm_banks" => self.tcdm_banks = pos(v)?,
            "tcdm_bank_bytes" => self.tcdm_bank_bytes = pos(v)?,
            "ext_latency" => self.ext_latency = nonneg(v)?,
            "icache_refill_latency" => self.icache_refill_latency = nonneg(v)?,
            "l0_lines" => self.l0_lines = pos(v)?,
            "l1_bytes" => self.l1_bytes = pos(v)?,
            "l1_ways" => self.l1_ways = pos(v)?,
            "icache_line" => self.icache_line = pos(v)?,
            "lsu_slots" => self.lsu_slots = pos(v)?,
            "fp_lsu_slots" => self.fp_lsu_slots = pos(v)?,
            "fpss_queue" => self.fpss_queue = pos(v)?,
            "ssr_fifo" => self.ssr_fifo = pos(v)?,
            "frep_buffer" => self.frep_buffer = pos(v)?,
            "frep_configs" => self.frep_configs = pos(v)?,
            "branch_penalty" => self.branch_penalty = nonneg(v)?,
            "lat_fma" => self.lat_fma = nonneg(v)?.max(1),
            "lat_cmp" => self.lat_cmp = nonneg(v)?.max(1),
            "lat_cvt" => self.lat_cvt = nonneg(v)?.max(1),
            "mul_latency" => self.mul_latency = nonneg(v)?.max(1),
            "watchdog" => self.watchdog = v.max(1) as u64,
            "ssr_enabled" => self.ssr_enabled = flag(v)?,
            "frep_enabled" => self.frep_enabled = flag(v)?,
            _ => return Err(format!("unknown config key '{key}'")),
        }
        // Keep derived address windows coherent even for odd TCDM sizes.
        if self.tcdm_end() > self.periph_base {
            self.periph_base = (self.tcdm_end() + 0xFFFF) & !0xFFFF;
            self.ssr_cfg_base = self.periph_base + 0x1_0000;
        }
        Ok(())
    }
}
