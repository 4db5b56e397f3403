//! Elementwise rectifier: `out[i] = max(x[i], 0)`.
//!
//! Pure data movement around a single compare-class operation, so it shows
//! the cost structure of the machine more than of the math: the baseline is
//! bound by its integer loop, the streamed variants by the two memory lanes.
//! The output array is placed a half-rotation of the bank ring away from the
//! input so the read and write streams never meet on a bank.
//!
//! Golden model: every output element is checked bit-for-bit (`max` with a
//! positive-zero second operand has one well-defined answer for inputs that
//! are never negative zero, which ours cannot produce).

use super::runtime::{chunk, commit_value, Prog};
use super::{rand_doubles, Check, Generated, KernelSpec};
use crate::config::SimConfig;

pub fn generate(spec: &KernelSpec, cfg: &SimConfig) -> Result<Generated, String> {
    let n = spec.size;
    let ncores = cfg.cores() as u32;
    if n == 0 {
        return Err("relu: size must be positive".into());
    }
    if n < ncores {
        return Err(format!("relu: size {n} smaller than core count {ncores}"));
    }
    let unroll = n >= 512;

    let x = rand_doubles(spec.seed, 0, n as usize);

    let mut p = Prog::new(cfg);
    let x_at = p.alloc("relu in", n * 8)?;
    p.skip(16 * 8); // half the bank ring, keeps the write stream off the read banks
    let out_at = p.alloc("relu out", n * 8)?;
    let bar_at = p.alloc("relu barrier", 8)?;
    p.doubles(x_at, &x);
    p.dwords(bar_at, &[0]);

    // Per-core row: input pointer, output pointer, pipelined-loop end,
    // input end, length.
    let mut rows = Vec::new();
    for c in 0..ncores {
        let (start, len) = chunk(n, ncores, c);
        if len == 0 {
            return Err(format!("relu: core {c} would receive no elements"));
        }
        let x0 = x_at + start * 8;
        let pairs = if unroll { len / 2 } else { 0 };
        let pipe_end = x0 + pairs.saturating_sub(1) * 16;
        rows.push(vec![x0, out_at + start * 8, pipe_end, x0 + len * 8, len]);
    }
    let tbl = p.core_table("relu core table", &rows)?;

    let variant = spec.variant;
    p.harness(bar_at, spec.cold, |p| {
        p.load_core_row(&tbl, &[("s0", 0), ("s1", 1), ("s2", 2), ("s3", 3), ("s5", 4)]);
        p.op("fcvt.d.w f28, zero");
        match variant {
            super::Variant::Baseline => {
                if unroll {
                    // Loads run one pair ahead of the compares and stores.
                    let lp = p.label("rmain");
                    let epi = p.label("rmain_epi");
                    p.op("fld ft2, 0(s0)");
                    p.op("fld ft3, 8(s0)");
                    p.op(&format!("beq s0, s2, {epi}"));
                    p.bind(&lp);
                    p.op("fmax.d ft4, ft2, f28");
                    p.op("fmax.d ft5, ft3, f28");
                    p.op("fsd ft4, 0(s1)");
                    p.op("fsd ft5, 8(s1)");
                    p.op("fld ft2, 16(s0)");
                    p.op("fld ft3, 24(s0)");
                    p.op("addi s0, s0, 16");
                    p.op("addi s1, s1, 16");
                    p.op(&format!("bne s0, s2, {lp}"));
                    p.bind(&epi);
                    p.op("fmax.d ft4, ft2, f28");
                    p.op("fmax.d ft5, ft3, f28");
                    p.op("fsd ft4, 0(s1)");
                    p.op("fsd ft5, 8(s1)");
                    p.op("addi s0, s0, 16");
                    p.op("addi s1, s1, 16");
                }
                let lp = p.label("rtail");
                let done = p.label("rtail_done");
                p.op(&format!("beq s0, s3, {done}"));
                p.bind(&lp);
                p.op("fld ft2, 0(s0)");
                p.op("fmax.d ft4, ft2, f28");
                p.op("fsd ft4, 0(s1)");
                p.op("addi s0, s0, 8");
                p.op("addi s1, s1, 8");
                p.op(&format!("bne s0, s3, {lp}"));
                p.bind(&done);
            }
            super::Variant::Ssr => {
                cfg_elementwise(p);
                p.op("csrsi ssr, 1");
                p.op("srli t5, s5, 1");
                p.op("andi t6, s5, 1");
                let lp = p.label("rpair");
                let odd_check = p.label("rpair_end");
                p.op(&format!("beq t5, zero, {odd_check}"));
                p.bind(&lp);
                p.op("fmax.d ft1, ft0, f28");
                p.op("fmax.d ft1, ft0, f28");
                p.op("addi t5, t5, -1");
                p.op(&format!("bne t5, zero, {lp}"));
                p.bind(&odd_check);
                let even = p.label("rodd");
                p.op(&format!("beq t6, zero, {even}"));
                p.op("fmax.d ft1, ft0, f28");
                p.bind(&even);
                p.op("csrci ssr, 1");
            }
            super::Variant::SsrFrep => {
                cfg_elementwise(p);
                p.op("csrsi ssr, 1");
                p.op("frep.o s5, 1, 0, 0");
                p.op("fmax.d ft1, ft0, f28");
                p.op("csrci ssr, 1");
            }
        }
    });

    let checks = (0..n as usize)
        .map(|i| Check::Dword {
            what: format!("relu out[{i}]"),
            addr: out_at + 8 * i as u32,
            bits: (if x[i] > 0.0 { x[i] } else { 0.0 }).to_bits(),
        })
        .collect();

    Ok(Generated { asm: p.finish(), checks })
}

/// Lane 0 reads the chunk, lane 1 writes the mirror chunk; both 1-D over
/// `s5` elements.
fn cfg_elementwise(p: &mut Prog) {
    p.op("scfgwi s0, 0, base");
    p.op("scfgwi s1, 1, base");
    p.li("t3", 8);
    p.op("scfgwi t3, 0, stride0");
    p.op("scfgwi t3, 1, stride0");
    p.op("scfgwi s5, 0, bound0");
    p.op("scfgwi s5, 1, bound0");
    p.li("t3", commit_value(1, false) as i64);
    p.op("scfgwi t3, 0, commit");
    p.li("t3", commit_value(1, true) as i64);
    p.op("scfgwi t3, 1, commit");
}

#[cfg(test)]
mod tests {
    use super::super::{config_for_cores, execute, KernelName, KernelSpec, Variant};

    fn run(variant: Variant, size: u32, cores: u32) -> super::super::Executed {
        let cfg = config_for_cores(cores).unwrap();
        let mut spec = KernelSpec::new(KernelName::Relu, variant);
        spec.size = size;
        execute(&spec, &cfg, 2_000_000).unwrap()
    }

    #[test]
    fn golden_all_variants_small() {
        for v in [Variant::Baseline, Variant::Ssr, Variant::SsrFrep] {
            let ex = run(v, 96, 1);
            ex.golden.as_ref().unwrap_or_else(|e| panic!("{}: {e}", v.name()));
        }
    }

    #[test]
    fn golden_multicore_uneven() {
        for v in [Variant::Baseline, Variant::Ssr, Variant::SsrFrep] {
            let ex = run(v, 515, 3);
            ex.golden.as_ref().unwrap_or_else(|e| panic!("{}: {e}", v.name()));
        }
    }

    #[test]
    fn baseline_runs_at_one_instruction_per_cycle() {
        let ex = run(Variant::Baseline, 1024, 1);
        ex.golden.as_ref().unwrap();
        let m = ex.cluster.metrics().unwrap();
        assert!((m.ipc - 1.0).abs() < 0.03, "relu baseline ipc {}", m.ipc);
    }

    #[test]
    fn sequencer_moves_one_element_per_cycle() {
        let ex = run(Variant::SsrFrep, 1024, 1);
        ex.golden.as_ref().unwrap();
        let m = ex.cluster.metrics().unwrap();
        let d = &m.per_core[0].d;
        // one fmax per element, region dominated by the n instances
        assert!(
            (m.region_cycles() as f64) < 1024.0 * 1.15,
            "frep relu region {} should approach one element/cycle",
            m.region_cycles()
        );
        assert_eq!(d.frep_sequenced, 1024);
        assert!(
            d.tcdm_conflicts < 64,
            "read/write streams should not collide on banks, got {} conflicts",
            d.tcdm_conflicts
        );
    }
}
