//! Instruction caches: a tiny per-core L0 loop buffer backed by a per-hive
//! set-associative L1, which in turn refills from external memory.
//!
//! Timing: an L0 hit feeds issue in the same cycle. An L0 miss that hits L1
//! installs the line one cycle later, so the instruction issues two cycles
//! after the first attempt. An L1 miss adds the external refill burst on
//! top (default 10 cycles, so the instruction issues at T+12). Outstanding
//! line fills are tracked in MSHR entries; cores missing on a line already
//! in flight attach to the existing entry instead of generating traffic.
//!
//! Only timing is modelled here — instructions are stored pre-decoded and
//! fetched by index, so the caches carry line addresses, not bytes.

/// Per-core fully associative loop buffer with FIFO replacement.
#[derive(Clone, Debug)]
pub struct L0Cache {
    lines: Vec<u32>,
    next: usize,
    pub hits: u64,
    pub misses: u64,
}

const INVALID: u32 = u32::MAX;

impl L0Cache {
    pub fn new(lines: usize) -> Self {
        L0Cache { lines: vec![INVALID; lines], next: 0, hits: 0, misses: 0 }
    }

    pub fn contains(&self, line: u32) -> bool {
        self.lines.contains(&line)
    }

    pub fn install(&mut self, line: u32) {
        if self.contains(line) {
            return;
        }
        self.lines[self.next] = line;
        self.next = (self.next + 1) % self.lines.len();
    }
}

/// Set-associative cache with true-LRU replacement, tags only.
#[derive(Clone, Debug)]
pub struct L1Cache {
    sets: usize,
    ways: usize,
    line_bytes: u32,
    tags: Vec<u32>,
    last_use: Vec<u64>,
    tick: u64,
    pub hits: u64,
    pub misses: u64,
}

impl L1Cache {
    pub fn new(bytes: usize, ways: usize, line_bytes: usize) -> Self {
        let sets = (bytes / (ways * line_bytes)).max(1);
        L1Cache {
            sets,
            ways,
            line_bytes: line_bytes as u32,
            tags: vec![INVALID; sets * ways],
            last_use: vec![0; sets * ways],
            tick: 0,
            hits: 0,
            misses: 0,
        }
    }

    fn set_of(&self, line: u32) -> usize {
        ((line / self.line_bytes) as usize) % self.sets
    }

    /// Look a line up, updating recency on hit.
    pub fn lookup(&mut self, line: u32) -> bool {
        let s = self.set_of(line);
        self.tick += 1;
        for w in 0..self.ways {
            let i = s * self.ways + w;
            if self.tags[i] == line {
                self.last_use[i] = self.tick;
                self.hits += 1;
                return true;
            }
        }
        self.misses += 1;
        false
    }

    /// Install a line, evicting the least recently used way.
    pub fn install(&mut self, line: u32) {
        let s = self.set_of(line);
        self.tick += 1;
        let mut victim = s * self.ways;
        for w in 0..self.ways {
            let i = s * self.ways + w;
            if self.tags[i] == line {
                self.last_use[i] = self.tick;
                return;
            }
            if self.tags[i] == INVALID {
                victim = i;
                break;
            }
            if self.last_use[i] < self.last_use[victim] {
                victim = i;
            }
        }
        self.tags[victim] = line;
        self.last_use[victim] = self.tick;
    }
}

/// One outstanding line fill, with the cores waiting on it.
#[derive(Clone, Debug)]
struct Fill {
    line: u32,
    ready_at: u64,
    waiters: u32,
    from_ext: bool,
}

/// Per-hive instruction cache: L1 plus the fill (MSHR) machinery.
#[derive(Clone, Debug)]
pub struct HiveIcache {
    pub l1: L1Cache,
    refill_latency: u64,
    fills: Vec<Fill>,
}

impl HiveIcache {
    pub fn new(l1_bytes: usize, ways: usize, line_bytes: usize, refill_latency: u32) -> Self {
        HiveIcache {
            l1: L1Cache::new(l1_bytes, ways, line_bytes),
            refill_latency: refill_latency as u64,
            fills: Vec::new(),
        }
    }

    /// Register a core's need for a line at cycle `now`. Idempotent per
    /// core: attaching to an in-flight fill is free.
    pub fn request(&mut self, core_in_hive: usize, line: u32, now: u64) {
        let bit = 1u32 << core_in_hive;
        if let Some(f) = self.fills.iter_mut().find(|f| f.line == line) {
            f.waiters |= bit;
            return;
        }
        if self.l1.lookup(line) {
            self.fills.push(Fill { line, ready_at: now + 1, waiters: bit, from_ext: false });
        } else {
            self.fills.push(Fill {
                line,
                ready_at: now + 1 + self.refill_latency,
                waiters: bit,
                from_ext: true,
            });
        }
    }

    /// Drain fills completing at `now`; external ones install into L1.
    /// Returns (line, waiter bitmask) pairs for L0 installation.
    pub fn take_ready(&mut self, now: u64) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < self.fills.len() {
            if self.fills[i].ready_at <= now {
                let f = self.fills.remove(i);
                if f.from_ext {
                    self.l1.install(f.line);
                }
                out.push((f.line, f.waiters));
            } else {
                i += 1;
            }
        }
        out
    }

    pub fn pending(&self) -> usize {
        self.fills.len()
    }
}
