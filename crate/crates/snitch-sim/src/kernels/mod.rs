//! Benchmark kernel generators.
//!
//! Each generator builds a complete assembly program — code, input data and
//! per-core work split — for one kernel variant, problem size and core
//! count, together with golden-model checks on the program's outputs. The
//! golden values are computed host-side by mirroring the kernel's exact
//! operation order (fused multiply-adds included), so a passing check means
//! the simulated datapath produced bit-identical results; kernels whose
//! rounding order is deliberately reassociated carry tolerance checks
//! against an independent reference instead.
//!
//! Variants per kernel:
//!
//! * `baseline`: scalar loads/stores, plain loops, no stream or sequencer use.
//! * `ssr`: data streamed through the stream registers, loop kept on the
//!   integer core.
//! * `ssr_frep`: streams plus the sequencer repeating the inner block, so
//!   the integer core runs ahead (`axpy` is pure data movement and has no
//!   sequencer variant worth the name — it is omitted deliberately).

pub mod runtime;
pub mod xoshiro;

mod axpy;
mod dgemm;
mod dot;
mod relu;

use crate::cluster::Cluster;
use crate::config::SimConfig;
use xoshiro::Xoshiro128Plus;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Variant {
    Baseline,
    Ssr,
    SsrFrep,
}

impl Variant {
    pub fn parse(s: &str) -> Result<Variant, String> {
        match s {
            "baseline" => Ok(Variant::Baseline),
            "ssr" => Ok(Variant::Ssr),
            "ssr_frep" => Ok(Variant::SsrFrep),
            _ => Err(format!(
                "unknown variant '{s}' (expected baseline, ssr or ssr_frep)"
            )),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Ssr => "ssr",
            Variant::SsrFrep => "ssr_frep",
        }
    }

    pub fn all() -> [Variant; 3] {
        [Variant::Baseline, Variant::Ssr, Variant::SsrFrep]
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum KernelName {
    Axpy,
    Conv2d,
    Dgemm,
    Dot,
    Fft,
    KnnDist,
    MontecarloPi,
    Relu,
}

impl KernelName {
    pub fn all() -> [KernelName; 8] {
        [
            KernelName::Axpy,
            KernelName::Conv2d,
            KernelName::Dgemm,
            KernelName::Dot,
            KernelName::Fft,
            KernelName::KnnDist,
            KernelName::MontecarloPi,
            KernelName::Relu,
        ]
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelName::Axpy => "axpy",
            KernelName::Conv2d => "conv2d",
            KernelName::Dgemm => "dgemm",
            KernelName::Dot => "dot",
            KernelName::Fft => "fft",
            KernelName::KnnDist => "knn_dist",
            KernelName::MontecarloPi => "montecarlo_pi",
            KernelName::Relu => "relu",
        }
    }

    pub fn parse(s: &str) -> Result<KernelName, String> {
        KernelName::all()
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = KernelName::all().iter().map(|k| k.name()).collect();
                format!("unknown kernel '{s}' (valid kernels: {})", names.join(", "))
            })
    }

    /// Problem size used when none is requested.
    pub fn default_size(self) -> u32 {
        match self {
            KernelName::Axpy => 1024,
            KernelName::Conv2d => 32,
            KernelName::Dgemm => 32,
            KernelName::Dot => 4096,
            KernelName::Fft => 256,
            KernelName::KnnDist => 256,
            KernelName::MontecarloPi => 4096,
            KernelName::Relu => 1024,
        }
    }

    /// Variants this kernel implements.
    pub fn variants(self) -> &'static [Variant] {
        match self {
            KernelName::Axpy => &[Variant::Baseline, Variant::Ssr],
            _ => &[Variant::Baseline, Variant::Ssr, Variant::SsrFrep],
        }
    }
}

/// Everything needed to build one benchmark program.
#[derive(Clone, Debug)]
pub struct KernelSpec {
    pub kernel: KernelName,
    pub variant: Variant,
    pub size: u32,
    pub seed: u64,
    /// Cold measurement: one pass with the markers around it, so cache fills
    /// and stream setup land inside the region. Warm (default) runs the body
    /// twice and measures the second pass.
    pub cold: bool,
}

impl KernelSpec {
    pub fn new(kernel: KernelName, variant: Variant) -> KernelSpec {
        KernelSpec { kernel, variant, size: kernel.default_size(), seed: 1, cold: false }
    }
}

/// A built program plus the checks that decide whether a run was correct.
#[derive(Debug)]
pub struct Generated {
    pub asm: String,
    pub checks: Vec<Check>,
}

/// One golden-model expectation on a memory location after the run.
#[derive(Debug)]
pub enum Check {
    /// The 8 bytes at `addr` must equal `bits` exactly.
    Dword { what: String, addr: u32, bits: u64 },
    /// The f64 at `addr` must be within `tol * max(1, |want|)` of `want`.
    Close { what: String, addr: u32, want: f64, tol: f64 },
}

/// Run every check against the finished cluster's memory. Returns the number
/// of checks passed, or the first few failures.
pub fn run_checks(cl: &Cluster, checks: &[Check]) -> Result<usize, String> {
    let mut failures = Vec::new();
    for c in checks {
        let (what, addr) = match c {
            Check::Dword { what, addr, .. } | Check::Close { what, addr, .. } => (what, *addr),
        };
        let got = match cl.mem.read(addr, 8) {
            Ok(v) => v,
            Err(e) => {
                failures.push(format!("{what}: unreadable at {addr:#010x}: {e}"));
                continue;
            }
        };
        match c {
            Check::Dword { bits, .. } => {
                if got != *bits {
                    failures.push(format!(
                        "{what} at {addr:#010x}: got {got:#018x} ({}), want {bits:#018x} ({})",
                        f64::from_bits(got),
                        f64::from_bits(*bits)
                    ));
                }
            }
            Check::Close { want, tol, .. } => {
                let gotf = f64::from_bits(got);
                let bound = tol * want.abs().max(1.0);
                if !((gotf - want).abs() <= bound) {
                    failures.push(format!(
                        "{what} at {addr:#010x}: got {gotf}, want {want} within {bound:e}"
                    ));
                }
            }
        }
        if failures.len() >= 8 {
            failures.push("... further failures suppressed".into());
            break;
        }
    }
    if failures.is_empty() {
        Ok(checks.len())
    } else {
        Err(failures.join("\n"))
    }
}

/// Build the program for `spec` under `cfg`.
pub fn generate(spec: &KernelSpec, cfg: &SimConfig) -> Result<Generated, String> {
    if !spec.kernel.variants().contains(&spec.variant) {
        return Err(format!(
            "kernel {} has no {} variant",
            spec.kernel.name(),
            spec.variant.name()
        ));
    }
    match spec.kernel {
        KernelName::Axpy => axpy::generate(spec, cfg),
        KernelName::Dgemm => dgemm::generate(spec, cfg),
        KernelName::Dot => dot::generate(spec, cfg),
        KernelName::Relu => relu::generate(spec, cfg),
        other => Err(format!("kernel {} is still being wired up", other.name())),
    }
}

/// A finished run: the cluster (for metrics and traces), the program, and
/// the golden-check outcome.
pub struct Executed {
    pub cluster: Cluster,
    pub generated: Generated,
    pub cycles: u64,
    pub golden: Result<usize, String>,
}

/// Generate, assemble, simulate and validate one kernel. `Err` means the
/// program could not be built or did not finish; golden failures are
/// reported in [`Executed::golden`] so callers can still inspect metrics.
pub fn execute(spec: &KernelSpec, cfg: &SimConfig, max_cycles: u64) -> Result<Executed, String> {
    let generated = generate(spec, cfg)?;
    let mut cluster = Cluster::from_asm(cfg.clone(), &generated.asm)
        .map_err(|e| format!("{} {}: {e}", spec.kernel.name(), spec.variant.name()))?;
    let cycles = cluster
        .run(max_cycles)
        .map_err(|e| format!("{} {}: {e}", spec.kernel.name(), spec.variant.name()))?;
    let golden = run_checks(&cluster, &generated.checks);
    Ok(Executed { cluster, generated, cycles, golden })
}

/// Map a flat core count onto the hive topology: up to 4 cores in one hive,
/// even counts up to 8 across two.
pub fn config_for_cores(cores: u32) -> Result<SimConfig, String> {
    let mut cfg = SimConfig::default();
    match cores {
        1..=4 => {
            cfg.hives = 1;
            cfg.cores_per_hive = cores as usize;
        }
        6 | 8 => {
            cfg.hives = 2;
            cfg.cores_per_hive = (cores / 2) as usize;
        }
        _ => return Err(format!("unsupported core count {cores} (1-4, 6 or 8)")),
    }
    Ok(cfg)
}

/// Deterministic input data in [-1, 1), one stream per purpose.
fn rand_doubles(seed: u64, stream: u32, n: usize) -> Vec<f64> {
    let mut g = Xoshiro128Plus::from_seed(seed, stream);
    (0..n).map(|_| g.next_double()).collect()
}
