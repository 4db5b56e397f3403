use snitch_sim::kernels::{config_for_cores, execute, KernelName, KernelSpec, Variant};

fn main() {
    for cores in [1u32, 8] {
        let cfg = config_for_cores(cores).unwrap();
        let mut spec = KernelSpec::new(KernelName::Dgemm, Variant::SsrFrep);
        spec.size = 32;
        let ex = execute(&spec, &cfg, 4_000_000).unwrap();
        ex.golden.as_ref().unwrap();
        let m = ex.cluster.metrics().unwrap();
        println!(
            "cores={cores} region={} ipc={:.4} fpu_util={:.4} fpss_util={:.4} snitch_util={:.4}",
            m.region_cycles(),
            m.ipc,
            m.fpu_util,
            m.fpss_util,
            m.snitch_util
        );
        let c = &ex.cluster.counters[0];
        println!(
            "  core0: int={} fpss={} arith={} fp_mem={} seq'd={} ssr_el={}",
            c.int_retired, c.fpss_issued, c.fpu_arith, c.fp_mem, c.frep_sequenced, c.ssr_elements
        );
        println!(
            "  stalls: sb={} lsu={} off={} fetch={} sync={} ssr_e={} ssr_f={} tcdm_acc={} conf={}",
            c.stall_scoreboard,
            c.stall_lsu,
            c.stall_offload,
            c.stall_fetch,
            c.stall_sync,
            c.ssr_stall_empty,
            c.ssr_stall_full,
            c.tcdm_accesses,
            c.tcdm_conflicts
        );
    }
}
