//! Performance counters, marked measurement regions, derived metrics, and
//! the energy model.
//!
//! Each core owns one `Counters` block, incremented by the cluster as events
//! happen.  A program brackets its measured phase by writing 1 and then 0 to
//! the marker CSR; the tracker snapshots the counters at both writes.  For a
//! multi-core run the reported window is the union [earliest start, latest
//! end] across cores, each core's counter deltas are taken between its own
//! markers, and utilizations average arithmetically across cores.

use std::fmt::Write as _;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counters {
    /// Instructions the integer pipeline finished itself (ALU, branches,
    /// loads/stores at issue, CSR, mul/div at accept). FP offloads are not
    /// counted here — they count once at FP-subsystem issue.
    pub int_retired: u64,
    /// Everything issued by the FP subsystem (compute + fld/fsd), plus one
    /// per accepted frep configuration.
    pub fpss_issued: u64,
    /// FP compute operations issued (excludes fld/fsd).
    pub fpu_arith: u64,
    /// fld/fsd issued.
    pub fp_mem: u64,
    /// Instances injected by the sequencer.
    pub frep_sequenced: u64,
    /// Stream elements moved (reads popped + writes drained).
    pub ssr_elements: u64,
    pub stall_scoreboard: u64,
    pub stall_lsu: u64,
    pub stall_offload: u64,
    pub stall_fetch: u64,
    pub stall_sync: u64,
    pub ssr_stall_empty: u64,
    pub ssr_stall_full: u64,
    pub tcdm_accesses: u64,
    pub tcdm_conflicts: u64,
    pub l0_hits: u64,
    pub l0_misses: u64,
    pub l1_hits: u64,
    pub l1_misses: u64,
}

impl Counters {
    pub fn delta(&self, since: &Counters) -> Counters {
        Counters {
            int_retired: self.int_retired - since.int_retired,
            fpss_issued: self.fpss_issued - since.fpss_issued,
            fpu_arith: self.fpu_arith - since.fpu_arith,
            fp_mem: self.fp_mem - since.fp_mem,
            frep_sequenced: self.frep_sequenced - since.frep_sequenced,
            ssr_elements: self.ssr_elements - since.ssr_elements,
            stall_scoreboard: self.stall_scoreboard - since.stall_scoreboard,
            stall_lsu: self.stall_lsu - since.stall_lsu,
            stall_offload: self.stall_offload - since.stall_offload,
            stall_fetch: self.stall_fetch - since.stall_fetch,
            stall_sync: self.stall_sync - since.stall_sync,
            ssr_stall_empty: self.ssr_stall_empty - since.ssr_stall_empty,
            ssr_stall_full: self.ssr_stall_full - since.ssr_stall_full,
            tcdm_accesses: self.tcdm_accesses - since.tcdm_accesses,
            tcdm_conflicts: self.tcdm_conflicts - since.tcdm_conflicts,
            l0_hits: self.l0_hits - since.l0_hits,
            l0_misses: self.l0_misses - since.l0_misses,
            l1_hits: self.l1_hits - since.l1_hits,
            l1_misses: self.l1_misses - since.l1_misses,
        }
    }

    pub fn add(&mut self, other: &Counters) {
        self.int_retired += other.int_retired;
        self.fpss_issued += other.fpss_issued;
        self.fpu_arith += other.fpu_arith;
        self.fp_mem += other.fp_mem;
        self.frep_sequenced += other.frep_sequenced;
        self.ssr_elements += other.ssr_elements;
        self.stall_scoreboard += other.stall_scoreboard;
        self.stall_lsu += other.stall_lsu;
        self.stall_offload += other.stall_offload;
        self.stall_fetch += other.stall_fetch;
        self.stall_sync += other.stall_sync;
        self.ssr_stall_empty += other.ssr_stall_empty;
        self.ssr_stall_full += other.ssr_stall_full;
        self.tcdm_accesses += other.tcdm_accesses;
        self.tcdm_conflicts += other.tcdm_conflicts;
        self.l0_hits += other.l0_hits;
        self.l0_misses += other.l0_misses;
        self.l1_hits += other.l1_hits;
        self.l1_misses += other.l1_misses;
    }
}

/// Marker-CSR bookkeeping for one core: counter snapshots at the first
/// region start and the last region end.
#[derive(Clone, Debug, Default)]
pub struct RegionTrack {
    pub start: Option<(u64, Counters)>,
    pub end: Option<(u64, Counters)>,
}

impl RegionTrack {
    /// A write of 1 opens the region (first write wins), a write of 0 closes
    /// it (last write wins). Other values are reserved and ignored.
    pub fn mark(&mut self, value: u32, cycle: u64, counters: &Counters) {
        match value {
            1 if self.start.is_none() => self.start = Some((cycle, *counters)),
            0 if self.start.is_some() => self.end = Some((cycle, *counters)),
            _ => {}
        }
    }
}

/// Derived per-core metrics over the measurement window.
#[derive(Clone, Debug)]
pub struct CoreMetrics {
    pub core: usize,
    pub d: Counters,
    pub ipc: f64,
    pub fpu_util: f64,
    pub fpss_util: f64,
    pub snitch_util: f64,
}

/// Whole-run metrics: the global window, per-core breakdown, cross-core
/// means, and summed counters.
#[derive(Clone, Debug)]
pub struct RunMetrics {
    pub cycles: u64,
    pub region_start: u64,
    pub region_end: u64,
    pub per_core: Vec<CoreMetrics>,
    pub ipc: f64,
    pub fpu_util: f64,
    pub fpss_util: f64,
    pub snitch_util: f64,
    pub totals: Counters,
}

impl RunMetrics {
    pub fn region_cycles(&self) -> u64 {
        self.region_end - self.region_start
    }
}

/// Compute run metrics from the per-core region tracks. Cores that never
/// touched the marker CSR are treated as idle and skipped; at least one core
/// must have completed a region.
pub fn run_metrics(tracks: &[RegionTrack], total_cycles: u64) -> Result<RunMetrics, String> {
    let mut per_core = Vec::new();
    let mut lo = u64::MAX;
    let mut hi = 0u64;
    for (i, t) in tracks.iter().enumerate() {
        match (&t.start, &t.end) {
            (None, _) => continue,
            (Some(_), None) => {
                return Err(format!(
                    "core {i} opened a measurement region but never closed it"
                ));
            }
            (Some((s, sc)), Some((e, ec))) => {
                lo = lo.min(*s);
                hi = hi.max(*e);
                per_core.push((i, *s, *e, ec.delta(sc)));
            }
        }
    }
    if per_core.is_empty() {
        return Err("no measurement region: no core wrote the marker CSR".to_string());
    }
    if hi <= lo {
        return Err("empty measurement region (end does not follow start)".to_string());
    }
    let window = (hi - lo) as f64;
    let mut cores = Vec::new();
    let mut totals = Counters::default();
    for (i, _s, _e, d) in per_core {
        totals.add(&d);
        cores.push(CoreMetrics {
            core: i,
            ipc: (d.int_retired + d.fpss_issued) as f64 / window,
            fpu_util: d.fpu_arith as f64 / window,
            fpss_util: d.fpss_issued as f64 / window,
            snitch_util: d.int_retired as f64 / window,
            d,
        });
    }
    let n = cores.len() as f64;
    let mean = |f: fn(&CoreMetrics) -> f64| cores.iter().map(f).sum::<f64>() / n;
    Ok(RunMetrics {
        cycles: total_cycles,
        region_start: lo,
        region_end: hi,
        ipc: mean(|c| c.ipc),
        fpu_util: mean(|c| c.fpu_util),
        fpss_util: mean(|c| c.fpss_util),
        snitch_util: mean(|c| c.snitch_util),
        per_core: cores,
        totals,
    })
}

// ---- energy model ----

/// Event classes the energy model charges for. `count` extracts the class
/// count from summed counters (`cycles` is per-core window cycles summed).
pub const ENERGY_CLASSES: [&str; 7] = [
    "cycle",
    "int_issue",
    "fpu_arith",
    "fp_mem",
    "ssr_element",
    "tcdm_access",
    "l1_miss",
];

fn class_count(class: &str, totals: &Counters, core_cycles: u64) -> u64 {
    match class {
        "cycle" => core_cycles,
        "int_issue" => totals.int_retired,
        "fpu_arith" => totals.fpu_arith,
        "fp_mem" => totals.fp_mem,
        "ssr_element" => totals.ssr_elements,
        "tcdm_access" => totals.tcdm_accesses,
        "l1_miss" => totals.l1_misses,
        _ => unreachable!(),
    }
}

/// Parse an energy table: one `class = picojoules` line per class, `#`
/// comments. Unknown class names are rejected.
pub fn parse_energy_table(text: &str) -> Result<Vec<(String, f64)>, String> {
    let mut table = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("energy table line {}: expected 'class = pJ'", n + 1))?;
        let k = k.trim();
        if !ENERGY_CLASSES.contains(&k) {
            return Err(format!(
                "energy table line {}: unknown class '{}' (known: {})",
                n + 1,
                k,
                ENERGY_CLASSES.join(", ")
            ));
        }
        let pj: f64 = v
            .trim()
            .parse()
            .map_err(|_| format!("energy table line {}: bad number '{}'", n + 1, v.trim()))?;
        if table.iter().any(|(name, _)| name == k) {
            return Err(format!("energy table line {}: duplicate class '{}'", n + 1, k));
        }
        table.push((k.to_string(), pj));
    }
    Ok(table)
}

#[derive(Clone, Debug)]
pub struct EnergyRow {
    pub class: String,
    pub count: u64,
    pub pj_each: f64,
    pub pj_total: f64,
}

#[derive(Clone, Debug)]
pub struct EnergyReport {
    pub rows: Vec<EnergyRow>,
    pub total_pj: f64,
}

impl EnergyReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<12} {:>12} {:>10} {:>14}", "class", "count", "pJ/event", "pJ");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<12} {:>12} {:>10.3} {:>14.1}",
                r.class, r.count, r.pj_each, r.pj_total
            );
        }
        let _ = writeln!(out, "{:<12} {:>12} {:>10} {:>14.1}", "total", "", "", self.total_pj);
        out
    }
}

/// Charge the run against an energy table. Every class with a nonzero count
/// must be priced; unpriced zero-count classes are fine.
pub fn energy_report(
    totals: &Counters,
    core_cycles: u64,
    table: &[(String, f64)],
) -> Result<EnergyReport, String> {
    let mut rows = Vec::new();
    let mut total = 0.0;
    for class in ENERGY_CLASSES {
        let count = class_count(class, totals, core_cycles);
        match table.iter().find(|(k, _)| k == class) {
            Some((_, pj)) => {
                let pj_total = count as f64 * pj;
                total += pj_total;
                rows.push(EnergyRow {
                    class: class.to_string(),
                    count,
                    pj_each: *pj,
                    pj_total,
                });
            }
            None if count > 0 => {
                return Err(format!(
                    "energy table prices no '{class}' events but the run produced {count}"
                ));
            }
            None => {}
        }
    }
    Ok(EnergyReport { rows, total_pj: total })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counters(int: u64, fpss: u64, arith: u64) -> Counters {
        Counters {
            int_retired: int,
            fpss_issued: fpss,
            fpu_arith: arith,
            ..Counters::default()
        }
    }

    #[test]
    fn region_deltas_and_means() {
        let mut tracks = vec![RegionTrack::default(), RegionTrack::default()];
        tracks[0].mark(1, 100, &counters(10, 0, 0));
        tracks[1].mark(1, 120, &counters(5, 0, 0));
        tracks[0].mark(0, 300, &counters(110, 50, 40));
        tracks[1].mark(0, 320, &counters(105, 30, 20));
        let m = run_metrics(&tracks, 400).unwrap();
        assert_eq!((m.region_start, m.region_end), (100, 320));
        assert_eq!(m.region_cycles(), 220);
        // Core 0: 100 int + 50 fpss over 220; core 1: 100 + 30 over 220.
        assert!((m.per_core[0].ipc - 150.0 / 220.0).abs() < 1e-12);
        assert!((m.ipc - (150.0 + 130.0) / 2.0 / 220.0).abs() < 1e-12);
        assert!((m.fpu_util - (40.0 + 20.0) / 2.0 / 220.0).abs() < 1e-12);
        assert_eq!(m.totals.int_retired, 200);
    }

    #[test]
    fn marker_first_start_last_end() {
        let mut t = RegionTrack::default();
        t.mark(1, 10, &counters(1, 0, 0));
        t.mark(1, 20, &counters(2, 0, 0)); // ignored: already open
        t.mark(0, 30, &counters(3, 0, 0));
        t.mark(0, 40, &counters(4, 0, 0)); // later end wins
        assert_eq!(t.start.unwrap().0, 10);
        assert_eq!(t.end.unwrap().0, 40);
    }

    #[test]
    fn missing_region_is_an_error() {
        let tracks = vec![RegionTrack::default()];
        assert!(run_metrics(&tracks, 100).is_err());
        let mut open = RegionTrack::default();
        open.mark(1, 10, &Counters::default());
        assert!(run_metrics(&[open], 100).is_err());
    }

    #[test]
    fn idle_cores_are_skipped() {
        let mut tracks = vec![RegionTrack::default(), RegionTrack::default()];
        tracks[0].mark(1, 10, &counters(0, 0, 0));
        tracks[0].mark(0, 110, &counters(100, 0, 0));
        let m = run_metrics(&tracks, 200).unwrap();
        assert_eq!(m.per_core.len(), 1);
        assert!((m.ipc - 1.0).abs() < 1e-12);
    }

    #[test]
    fn energy_table_round_trip() {
        let table = parse_energy_table(
            "# costs\ncycle = 1.0\nint_issue = 2\nfpu_arith = 10.5\n",
        )
        .unwrap();
        let totals = counters(100, 0, 7);
        let rep = energy_report(&totals, 1000, &table).unwrap();
        assert!((rep.total_pj - (1000.0 + 200.0 + 73.5)).abs() < 1e-9);
        assert_eq!(rep.rows.len(), 3);
    }

    #[test]
    fn energy_errors() {
        assert!(parse_energy_table("bogus_class = 1").is_err());
        assert!(parse_energy_table("cycle 1").is_err());
        assert!(parse_energy_table("cycle = x").is_err());
        assert!(parse_energy_table("cycle = 1\ncycle = 2").is_err());
        // fpu_arith events exist but are not priced.
        let table = parse_energy_table("cycle = 1").unwrap();
        let totals = counters(0, 0, 5);
        let err = energy_report(&totals, 10, &table).unwrap_err();
        assert!(err.contains("fpu_arith"));
    }
}
