//! Scaled vector add: `z[i] = a*x[i] + y[i]`.
//!
//! The two inputs are interleaved as (x, y) pairs in one array so the
//! streamed variant can feed both multiply-add operands from a single read
//! lane: a source register that names lane 0 twice takes two consecutive
//! elements, first for rs1 and then for rs3.  There is no sequencer variant
//! — with two reads per operation one lane is already the bottleneck, and a
//! hardware loop could not push past it.
//!
//! Golden model: every output element bit-for-bit (fused multiply-add), plus
//! a sampled tolerance check against the unfused form.

use super::runtime::{chunk, commit_value, Prog};
use super::{rand_doubles, Check, Generated, KernelSpec};
use crate::config::SimConfig;

pub fn generate(spec: &KernelSpec, cfg: &SimConfig) -> Result<Generated, String> {
    let n = spec.size;
    let ncores = cfg.cores() as u32;
    if n == 0 {
        return Err("axpy: size must be positive".into());
    }
    if n < ncores {
        return Err(format!("axpy: size {n} smaller than core count {ncores}"));
    }
    let unroll = n >= 512;

    let x = rand_doubles(spec.seed, 0, n as usize);
    let y = rand_doubles(spec.seed, 1, n as usize);
    let a = rand_doubles(spec.seed, 2, 1)[0];
    let mut xy = Vec::with_capacity(2 * n as usize);
    for i in 0..n as usize {
        xy.push(x[i]);
        xy.push(y[i]);
    }

    let mut p = Prog::new(cfg);
    let xy_at = p.alloc("axpy in pairs", 2 * n * 8)?;
    p.skip(16 * 8); // offset the output stream half a bank ring away
    let z_at = p.alloc("axpy out", n * 8)?;
    let a_at = p.alloc("axpy scalar", 8)?;
    let bar_at = p.alloc("axpy barrier", 8)?;
    p.doubles(xy_at, &xy);
    p.doubles(a_at, &[a]);
    p.dwords(bar_at, &[0]);

    // Per-core row: pair pointer, output pointer, pipelined-loop end,
    // pair end, length.
    let mut rows = Vec::new();
    for c in 0..ncores {
        let (start, len) = chunk(n, ncores, c);
        if len == 0 {
            return Err(format!("axpy: core {c} would receive no elements"));
        }
        let xy0 = xy_at + start * 16;
        let pairs = if unroll { len / 2 } else { 0 };
        let pipe_end = xy0 + pairs.saturating_sub(1) * 32;
        rows.push(vec![xy0, z_at + start * 8, pipe_end, xy0 + len * 16, len]);
    }
    let tbl = p.core_table("axpy core table", &rows)?;

    let variant = spec.variant;
    p.harness(bar_at, spec.cold, |p| {
        p.load_core_row(&tbl, &[("s0", 0), ("s1", 1), ("s2", 2), ("s3", 3), ("s5", 4)]);
        p.li_addr("t0", a_at);
        p.op("fld fa0, 0(t0)");
        match variant {
            super::Variant::Baseline => {
                if unroll {
                    // Loads stay one pair of elements ahead of the math.
                    let lp = p.label("amain");
                    let epi = p.label("amain_epi");
                    p.op("fld ft2, 0(s0)");
                    p.op("fld ft3, 8(s0)");
                    p.op("fld ft4, 16(s0)");
                    p.op("fld ft5, 24(s0)");
                    p.op(&format!("beq s0, s2, {epi}"));
                    p.bind(&lp);
                    p.op("fmadd.d ft6, ft2, fa0, ft3");
                    p.op("fmadd.d ft7, ft4, fa0, ft5");
                    p.op("fsd ft6, 0(s1)");
                    p.op("fsd ft7, 8(s1)");
                    p.op("fld ft2, 32(s0)");
                    p.op("fld ft3, 40(s0)");
                    p.op("fld ft4, 48(s0)");
                    p.op("fld ft5, 56(s0)");
                    p.op("addi s0, s0, 32");
                    p.op("addi s1, s1, 16");
                    p.op(&format!("bne s0, s2, {lp}"));
                    p.bind(&epi);
                    p.op("fmadd.d ft6, ft2, fa0, ft3");
                    p.op("fmadd.d ft7, ft4, fa0, ft5");
                    p.op("fsd ft6, 0(s1)");
                    p.op("fsd ft7, 8(s1)");
                    p.op("addi s0, s0, 32");
                    p.op("addi s1, s1, 16");
                }
                let lp = p.label("atail");
                let done = p.label("atail_done");
                p.op(&format!("beq s0, s3, {done}"));
                p.bind(&lp);
                p.op("fld ft2, 0(s0)");
                p.op("fld ft3, 8(s0)");
                p.op("fmadd.d ft6, ft2, fa0, ft3");
                p.op("fsd ft6, 0(s1)");
                p.op("addi s0, s0, 16");
                p.op("addi s1, s1, 8");
                p.op(&format!("bne s0, s3, {lp}"));
                p.bind(&done);
            }
            super::Variant::Ssr => {
                p.op("scfgwi s0, 0, base");
                p.op("scfgwi s1, 1, base");
                p.li("t3", 8);
                p.op("scfgwi t3, 0, stride0");
                p.op("scfgwi t3, 1, stride0");
                p.op("slli t4, s5, 1");
                p.op("scfgwi t4, 0, bound0");
                p.op("scfgwi s5, 1, bound0");
                p.li("t3", commit_value(1, false) as i64);
                p.op("scfgwi t3, 0, commit");
                p.li("t3", commit_value(1, true) as i64);
                p.op("scfgwi t3, 1, commit");
                p.op("csrsi ssr, 1");
                p.op("srli t5, s5, 1");
                p.op("andi t6, s5, 1");
                let pair_end = p.label("apair_end");
                p.op(&format!("beq t5, zero, {pair_end}"));
                let lp = p.label("apair");
                p.bind(&lp);
                p.op("fmadd.d ft1, ft0, fa0, ft0");
                p.op("fmadd.d ft1, ft0, fa0, ft0");
                p.op("addi t5, t5, -1");
                p.op(&format!("bne t5, zero, {lp}"));
                p.bind(&pair_end);
                let even = p.label("aeven");
                p.op(&format!("beq t6, zero, {even}"));
                p.op("fmadd.d ft1, ft0, fa0, ft0");
                p.bind(&even);
                p.op("csrci ssr, 1");
            }
            super::Variant::SsrFrep => unreachable!("axpy has no sequencer variant"),
        }
    });

    let mut checks: Vec<Check> = (0..n as usize)
        .map(|i| Check::Dword {
            what: format!("axpy z[{i}]"),
            addr: z_at + 8 * i as u32,
            bits: x[i].mul_add(a, y[i]).to_bits(),
        })
        .collect();
    for i in (0..n as usize).step_by(128) {
        checks.push(Check::Close {
            what: format!("axpy z[{i}] vs unfused"),
            addr: z_at + 8 * i as u32,
            want: a * x[i] + y[i],
            tol: 1e-9,
        });
    }

    Ok(Generated { asm: p.finish(), checks })
}
