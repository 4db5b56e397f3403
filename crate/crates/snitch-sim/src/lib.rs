//! Cycle-level simulator of a small RISC-V compute cluster built for
//! floating-point streaming workloads.
//!
//! The modelled hardware:
//!
//! * tiny single-stage, single-issue integer cores (RV32IMAD subset) with an
//!   accelerator offload port and a register scoreboard,
//! * one decoupled double-precision FP subsystem (FPSS) per core with its own
//!   register file, scoreboard, and fully pipelined FPU,
//! * stream semantic registers (SSR): two FP registers per core that can be
//!   turned into hardware-generated memory streams with 4-dimensional affine
//!   address patterns,
//! * a floating-point repetition sequencer (FREP) that captures short FP
//!   instruction blocks and re-issues them without instruction fetches,
//! * a banked scratchpad (TCDM) with per-bank round-robin arbitration, atomic
//!   memory operations, and cycle-accurate conflict modelling,
//! * a two-level instruction cache (per-core L0 loop buffer, per-hive L1),
//! * a shared per-hive integer multiply/divide unit,
//! * performance counters with region markers, and an eight-kernel benchmark
//!   suite with golden-model validation.
//!
//! Everything is deterministic: two runs of the same configuration produce
//! byte-identical traces and metrics.

pub mod cluster;
pub mod config;
pub mod cpu;
pub mod fpss;
pub mod frep;
pub mod icache;
pub mod isa;
pub mod kernels;
pub mod mem;
pub mod perf;
pub mod ssr;
pub mod trace;
