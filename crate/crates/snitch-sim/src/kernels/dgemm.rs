//! Square matrix multiply: `C = A * B`, row-major doubles.
//!
//! The streamed variants walk one 8-column tile of C at a time.  Per tile,
//! lane 0 delivers each A[i,k] twice (a zero-stride inner dimension) and
//! lane 1 walks the tile's eight B columns k-row by k-row.  Each k step
//! opens with a snapshot of the A value into a scratch register (max
//! against -inf is an exact copy) and the first product reads the lane's
//! second pop directly; the other seven products read the scratch.  The
//! ordering matters: the copy retires through the same single register-file
//! write port as the multiply-adds and can slip one cycle behind an older
//! completion, so the first scratch consumer must trail the copy by two
//! issue slots or the whole block stalls a cycle per k.  A two-deep dwell
//! on one bank is harmless; replaying A for all eight products (an
//! eight-deep dwell) is what starves the other cores' B walkers.  k=0 uses
//! plain multiplies to seed the accumulators, later steps fuse.
//!
//! The finished tile leaves through lane 1 as an eight-element write
//! stream queued behind the B walk: a register copy into ft1 pushes one
//! element, and copies are plain FP compute, so the store block is
//! sequenceable.  That keeps the FP pipe saturated across tile seams —
//! with explicit stores the core would have to wait for the sequencer to
//! drain before issuing them, idling the FP side for a dozen cycles per
//! tile.  The sequencer variant runs seed, accumulate and store blocks
//! back to back in hardware while the integer core reprograms the stream
//! bases for the *next* tile and retires loop bookkeeping — that
//! concurrent progress is what pushes the combined issue rate past one
//! per cycle.  The ssr variant issues the same blocks from the core.  The
//! baseline ping-pongs two operand register groups so loads run one k
//! step ahead of the math.
//!
//! A and B rows are padded by one double so consecutive rows start on
//! consecutive banks; without the pad every row of a power-of-two matrix
//! lands on the same bank set and the cores' streams pile up.  B gets one
//! junk row at the end so the baseline's k+1 prefetch stays in bounds on
//! the last iteration.
//!
//! Golden model: all n*n outputs bit-for-bit — every variant computes
//! c = a[i,0]*b[0,j], then accumulates k ascending with fused
//! multiply-adds — plus sampled tolerance checks against an unfused
//! reference.

use super::runtime::{chunk, commit_value, Prog};
use super::{rand_doubles, Check, Generated, KernelSpec};
use crate::config::SimConfig;

pub fn generate(spec: &KernelSpec, cfg: &SimConfig) -> Result<Generated, String> {
    let n = spec.size;
    let ncores = cfg.cores() as u32;
    if n < 16 || n % 8 != 0 {
        return Err(format!("dgemm: size {n} must be a multiple of 8, at least 16"));
    }
    if n > 240 {
        return Err(format!(
            "dgemm: size {n} exceeds the 240 limit of the baseline's addressing"
        ));
    }
    if n < ncores {
        return Err(format!("dgemm: size {n} smaller than core count {ncores}"));
    }
    let nu = n as usize;
    let rowd = nu + 1; // padded row length in doubles
    let rowb = (rowd * 8) as u32; // …and in bytes

    let a = rand_doubles(spec.seed, 0, nu * nu);
    let b = rand_doubles(spec.seed, 1, nu * nu);
    let mut a_pad = vec![0.0f64; nu * rowd];
    for i in 0..nu {
        a_pad[i * rowd..i * rowd + nu].copy_from_slice(&a[i * nu..(i + 1) * nu]);
    }
    // one junk row at the end for the baseline's k+1 prefetch
    let mut b_pad = vec![0.0f64; (nu + 1) * rowd];
    for k in 0..nu {
        b_pad[k * rowd..k * rowd + nu].copy_from_slice(&b[k * nu..(k + 1) * nu]);
    }

    let mut p = Prog::new(cfg);
    let a_at = p.alloc("dgemm A", (a_pad.len() * 8) as u32)?;
    let b_at = p.alloc("dgemm B", (b_pad.len() * 8) as u32)?;
    let c_at = p.alloc("dgemm C", n * n * 8)?;
    let sent_at = p.alloc("dgemm sentinel", 8)?;
    let bar_at = p.alloc("dgemm barrier", 8)?;
    p.doubles(a_at, &a_pad);
    p.doubles(b_at, &b_pad);
    p.doubles(sent_at, &[f64::NEG_INFINITY]);
    p.dwords(bar_at, &[0]);

    // Per-core row: A chunk base, C chunk base, row count.
    let mut rows = Vec::new();
    for c in 0..ncores {
        let (start, nrows) = chunk(n, ncores, c);
        if nrows == 0 {
            return Err(format!("dgemm: core {c} would receive no rows"));
        }
        rows.push(vec![a_at + start * rowb, c_at + start * n * 8, nrows]);
    }
    let tbl = p.core_table("dgemm core table", &rows)?;

    let variant = spec.variant;
    p.harness(bar_at, spec.cold, |p| {
        p.load_core_row(&tbl, &[("s0", 0), ("s1", 1), ("s5", 2)]);
        match variant {
            super::Variant::Baseline => baseline_body(p, n, rowb, b_at),
            super::Variant::Ssr | super::Variant::SsrFrep => {
                streamed_body(p, n, rowb, b_at, sent_at, variant == super::Variant::SsrFrep)
            }
        }
    });

    // Host mirror: k=0 is a plain product, the rest fused, k ascending —
    // identical to every variant's association.
    let mut checks = Vec::with_capacity(nu * nu + 16);
    for i in 0..nu {
        for j in 0..nu {
            let mut acc = a[i * nu] * b[j];
            for k in 1..nu {
                acc = a[i * nu + k].mul_add(b[k * nu + j], acc);
            }
            checks.push(Check::Dword {
                what: format!("dgemm C[{i}][{j}]"),
                addr: c_at + ((i * nu + j) * 8) as u32,
                bits: acc.to_bits(),
            });
        }
    }
    let step = (nu * nu / 16).max(1);
    for idx in (0..nu * nu).step_by(step) {
        let (i, j) = (idx / nu, idx % nu);
        let unfused: f64 = (0..nu).map(|k| a[i * nu + k] * b[k * nu + j]).sum();
        checks.push(Check::Close {
            what: format!("dgemm C[{i}][{j}] vs unfused"),
            addr: c_at + (idx * 8) as u32,
            want: unfused,
            tol: 1e-9,
        });
    }

    Ok(Generated { asm: p.finish(), checks })
}

/// Shared tile walk for the ssr and ssr_frep variants.  Lane 0 is the A
/// row (two pops per k: scratch copy, then the first product).  Lane 1
/// alternates between the tile's 2-D B walk and its 1-D C write — the
/// write commit is queued behind the B walk and promotes once the last
/// fused multiply-add pops B.  Read streams for the *next* tile are
/// committed from the integer core while the FP side is still consuming
/// the current one.
fn streamed_body(p: &mut Prog, n: u32, rowb: u32, b_at: u32, sent_at: u32, frep: bool) {
    let ntiles = n / 8;
    // f31 = -inf: `fmax.d f9, ft0, f31` is an exact copy of the popped
    // A value (inputs are finite).
    p.li_addr("t1", sent_at);
    p.op("fld f31, 0(t1)");
    // Static lane shape: strides and bounds never change, only the bases.
    // The C write is one-dimensional and reuses lane 1's dim 0 (stride 8,
    // bound 8).
    p.op("scfgwi zero, 0, stride0");
    p.li("t3", 2);
    p.op("scfgwi t3, 0, bound0");
    p.li("t3", 8);
    p.op("scfgwi t3, 0, stride1");
    p.op("scfgwi t3, 1, stride0");
    p.op("scfgwi t3, 1, bound0");
    p.li("t3", rowb as i64);
    p.op("scfgwi t3, 1, stride1");
    p.li("t3", n as i64);
    p.op("scfgwi t3, 0, bound1");
    p.op("scfgwi t3, 1, bound1");
    p.li("s6", 1); // sequencer repeat count for the seed and store blocks
    p.li("t3", commit_value(2, false) as i64);
    p.li("s8", commit_value(1, true) as i64);
    p.li_addr("t0", b_at);
    // Commit the first tile's read pair before entering the loop.
    p.op("scfgwi s0, 0, base");
    p.op("scfgwi t0, 1, base");
    p.op("scfgwi t3, 0, commit");
    p.op("scfgwi t3, 1, commit");
    p.op("csrsi ssr, 1");
    p.li("s7", (n - 1) as i64);
    p.op("addi t5, s5, 0");
    let rowl = p.label("grow");
    p.bind(&rowl);
    p.li("t6", ntiles as i64);
    let tilel = p.label("gtile");
    p.bind(&tilel);
    if frep {
        p.op("frep.o s6, 9, 0, 0");
    }
    p.op("fmax.d f9, ft0, f31");
    p.op("fmul.d f10, ft0, ft1");
    for t in 1..8 {
        p.op(&format!("fmul.d f{}, f9, ft1", 10 + t));
    }
    if frep {
        p.op("frep.o s7, 9, 0, 0");
        p.op("fmax.d f9, ft0, f31");
        p.op("fmadd.d f10, ft0, ft1, f10");
        for t in 1..8 {
            p.op(&format!("fmadd.d f{r}, f9, ft1, f{r}", r = 10 + t));
        }
    }
    // Queue this tile's C write on lane 1 now; it sits armed behind the
    // B walk until the accumulate block drains it.
    p.op("scfgwi s1, 1, base");
    p.op("scfgwi s8, 1, commit");
    p.op("addi s1, s1, 64");
    if !frep {
        p.op("addi t4, s7, 0");
        let kl = p.label("gk");
        p.bind(&kl);
        p.op("fmax.d f9, ft0, f31");
        p.op("fmadd.d f10, ft0, ft1, f10");
        for t in 1..8 {
            p.op(&format!("fmadd.d f{r}, f9, ft1, f{r}", r = 10 + t));
        }
        p.op("addi t4, t4, -1");
        p.op(&format!("bne t4, zero, {kl}"));
    }
    // The store block: each copy into ft1 pushes one element of the C
    // write stream.
    if frep {
        p.op("frep.o s6, 8, 0, 0");
    }
    for t in 0..8 {
        p.op(&format!("fsgnj.d ft1, f{r}, f{r}", r = 10 + t));
    }
    // While the FP side chews on this tile, aim the read streams at the
    // next one: either the next 8 columns, or the first tile of the next
    // row.
    let midrow = p.label("gmid");
    let commit = p.label("gcommit");
    let nocommit = p.label("gnocommit");
    p.op("addi t6, t6, -1");
    p.op(&format!("bne t6, zero, {midrow}"));
    p.op(&format!("addi s0, s0, {rowb}"));
    p.li_addr("t0", b_at);
    p.op("addi t5, t5, -1");
    p.op(&format!("bne t5, zero, {commit}"));
    p.op(&format!("j {nocommit}"));
    p.bind(&midrow);
    p.op("addi t0, t0, 64");
    p.bind(&commit);
    p.op("scfgwi s0, 0, base");
    p.op("scfgwi t3, 0, commit");
    // Lane 1's next B walk queues once the C write promotes out of the
    // armed slot; the core retries the commit until then.
    p.op("scfgwi t0, 1, base");
    p.op("scfgwi t3, 1, commit");
    p.bind(&nocommit);
    p.op(&format!("bne t6, zero, {tilel}"));
    p.op(&format!("bne t5, zero, {rowl}"));
    p.op("csrci ssr, 1");
}

/// Scalar loops with two operand register groups ping-ponged so the loads
/// for step k+1 issue while step k's multiply-adds execute.  Group even:
/// A in f8, B in f0..f7; group odd: A in f9, B in f18..f25.  k=0 is peeled
/// to seed the accumulators with plain products.
fn baseline_body(p: &mut Prog, n: u32, rowb: u32, b_at: u32) {
    let ntiles = n / 8;
    p.op("addi t5, s5, 0");
    let rowl = p.label("brow");
    p.bind(&rowl);
    p.li("t6", ntiles as i64);
    p.li_addr("s4", b_at);
    let tilel = p.label("btile");
    p.bind(&tilel);
    p.op("addi s6, s0, 0");
    p.op("addi t0, s4, 0");
    // k = 0: load group even, seed the accumulators.
    p.op("fld f8, 0(s6)");
    for t in 0..8 {
        p.op(&format!("fld f{}, {}(t0)", t, 8 * t));
    }
    for t in 0..8 {
        p.op(&format!("fmul.d f{r}, f8, f{t}", r = 10 + t));
    }
    // Prefetch k = 1 into group odd.
    p.op("fld f9, 8(s6)");
    for t in 0..8 {
        p.op(&format!("fld f{}, {}(t0)", 18 + t, rowb + 8 * t));
    }
    p.op("addi s6, s6, 8");
    p.op(&format!("addi t0, t0, {rowb}"));
    // Pairs (1,2), (3,4), …, (n-3, n-2); k = n-1 is the epilogue.
    p.li("t4", ((n - 2) / 2) as i64);
    let kl = p.label("bk");
    p.bind(&kl);
    for t in 0..8 {
        p.op(&format!("fmadd.d f{r}, f9, f{s}, f{r}", r = 10 + t, s = 18 + t));
    }
    p.op("fld f8, 8(s6)");
    for t in 0..8 {
        p.op(&format!("fld f{}, {}(t0)", t, rowb + 8 * t));
    }
    p.op("addi s6, s6, 8");
    p.op(&format!("addi t0, t0, {rowb}"));
    for t in 0..8 {
        p.op(&format!("fmadd.d f{r}, f8, f{t}, f{r}", r = 10 + t));
    }
    p.op("fld f9, 8(s6)");
    for t in 0..8 {
        p.op(&format!("fld f{}, {}(t0)", 18 + t, rowb + 8 * t));
    }
    p.op("addi s6, s6, 8");
    p.op(&format!("addi t0, t0, {rowb}"));
    p.op("addi t4, t4, -1");
    p.op(&format!("bne t4, zero, {kl}"));
    for t in 0..8 {
        p.op(&format!("fmadd.d f{r}, f9, f{s}, f{r}", r = 10 + t, s = 18 + t));
    }
    for t in 0..8 {
        p.op(&format!("fsd f{}, {}(s1)", 10 + t, 8 * t));
    }
    p.op("addi s1, s1, 64");
    p.op("addi s4, s4, 64");
    p.op("addi t6, t6, -1");
    p.op(&format!("bne t6, zero, {tilel}"));
    p.op(&format!("addi s0, s0, {rowb}"));
    p.op("addi t5, t5, -1");
    p.op(&format!("bne t5, zero, {rowl}"));
}

#[cfg(test)]
mod tests {
    use super::super::{config_for_cores, execute, KernelName, KernelSpec, Variant};

    fn run(variant: Variant, size: u32, cores: u32) -> super::super::Executed {
        let cfg = config_for_cores(cores).unwrap();
        let mut spec = KernelSpec::new(KernelName::Dgemm, variant);
        spec.size = size;
        execute(&spec, &cfg, 4_000_000).unwrap()
    }

    #[test]
    fn golden_all_variants_small() {
        for v in Variant::all() {
            let ex = run(v, 16, 1);
            ex.golden.as_ref().unwrap_or_else(|e| panic!("{}: {e}", v.name()));
        }
    }

    #[test]
    fn golden_multicore_uneven_rows() {
        for v in [Variant::Baseline, Variant::SsrFrep] {
            let ex = run(v, 32, 3);
            ex.golden.as_ref().unwrap_or_else(|e| panic!("{}: {e}", v.name()));
        }
    }

    #[test]
    fn sequencer_keeps_the_fpu_nearly_saturated() {
        let ex = run(Variant::SsrFrep, 32, 1);
        ex.golden.as_ref().unwrap();
        let m = ex.cluster.metrics().unwrap();
        assert!(m.fpu_util > 0.85, "dgemm frep fpu_util {}", m.fpu_util);
        assert!(m.ipc > 1.0, "dgemm frep ipc {} should exceed one", m.ipc);
    }

    #[test]
    fn eight_cores_scale_nearly_linearly() {
        let one = run(Variant::SsrFrep, 32, 1);
        let eight = run(Variant::SsrFrep, 32, 8);
        one.golden.as_ref().unwrap();
        eight.golden.as_ref().unwrap();
        let r1 = one.cluster.metrics().unwrap().region_cycles() as f64;
        let r8 = eight.cluster.metrics().unwrap().region_cycles() as f64;
        let speedup = r1 / r8;
        assert!(speedup >= 7.0, "dgemm 8-core speedup {speedup:.2} (1c {r1}, 8c {r8})");
        let util = eight.cluster.metrics().unwrap().fpu_util;
        assert!(util >= 0.80, "dgemm 8-core fpu_util {util}");
    }
}
