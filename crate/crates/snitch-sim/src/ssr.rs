//! Stream semantic register lanes.
//!
//! When the stream CSR is enabled, FP registers `ft0` and `ft1` stop being
//! registers: reads pop elements from a hardware-generated memory stream and
//! writes push elements into a store stream. Each lane walks an affine
//! pattern of up to 4 dimensions (dimension 0 innermost):
//!
//! ```text
//! addr(i0, i1, i2, i3) = base + i0*stride0 + i1*stride1 + i2*stride2 + i3*stride3
//! id in [0, bound_d)
//! ```
//!
//! A lane is configured through its register window (directly via `scfgwi`,
//! or memory-mapped through stores): write `base`, `strideN`, `boundN`, then
//! arm the lane by writing `commit` (bits 2..0 = dimension count, bit 3 =
//! write mode). The armed configuration is held in a depth-1 shadow and
//! promotes when the lane finishes the address phase of the current stream
//! (read: all elements requested; write: all elements stored), so back-to-
//! back streams overlap. A commit while the shadow is occupied stalls the
//! writer.
//!
//! Data moves through a small credit-based FIFO (default 4 elements).
//! Read lanes reserve a FIFO slot when they issue a memory request and fill
//! it when the response arrives; the FP subsystem pops filled slots in
//! order. Write lanes reserve slots in program order at FP issue time, fill
//! them when the producing instruction completes, and drain filled slots to
//! memory in order. Reading more elements than were configured, or reading
//! an enabled lane that was never configured, is a fault.

use std::collections::VecDeque;

/// One committed stream configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StreamCfg {
    pub base: u32,
    pub stride: [i32; 4],
    pub bound: [u32; 4],
    pub dims: u8,
    pub write: bool,
}

impl StreamCfg {
    pub fn total(&self) -> u64 {
        let mut t = 1u64;
        for d in 0..self.dims as usize {
            t *= self.bound[d] as u64;
        }
        t
    }
}

#[derive(Clone, Debug)]
struct ActiveStream {
    cfg: StreamCfg,
    idx: [u32; 4],
    /// Read: elements requested so far. Write: elements drained so far.
    advanced: u64,
    total: u64,
}

impl ActiveStream {
    fn new(cfg: StreamCfg) -> Self {
        let total = cfg.total();
        ActiveStream { cfg, idx: [0; 4], advanced: 0, total }
    }

    fn addr(&self) -> u32 {
        let mut a = self.cfg.base as i64;
        for d in 0..self.cfg.dims as usize {
            a += self.idx[d] as i64 * self.cfg.stride[d] as i64;
        }
        a as u32
    }

    /// Odometer step, dimension 0 fastest.
    fn advance(&mut self) {
        self.advanced += 1;
        for d in 0..self.cfg.dims as usize {
            self.idx[d] += 1;
            if self.idx[d] < self.cfg.bound[d] {
                return;
            }
            self.idx[d] = 0;
        }
    }

    fn done(&self) -> bool {
        self.advanced == self.total
    }
}

#[derive(Clone, Copy, Debug)]
struct Slot {
    seq: u32,
    filled: bool,
    data: u64,
}

/// One stream lane with its shadow configuration and element FIFO.
#[derive(Clone, Debug)]
pub struct SsrLane {
    depth: usize,
    /// Raw shadow registers: base, stride0..3, bound0..3.
    shadow: [u32; 9],
    armed: Option<StreamCfg>,
    active: Option<ActiveStream>,
    fifo: VecDeque<Slot>,
    next_seq: u32,
    /// Committed read elements not yet popped.
    read_budget: u64,
    /// Committed write elements not yet reserved.
    write_budget: u64,
    committed_ever: bool,
    /// Elements delivered (read pops + write drains).
    pub elements: u64,
}

/// Byte offsets of the lane's configuration registers.
pub const OFF_BASE: u32 = 0x00;
pub const OFF_STRIDE: u32 = 0x10; // stride0..3 at 0x10, 0x14, 0x18, 0x1C
pub const OFF_BOUND: u32 = 0x20; // bound0..3  at 0x20, 0x24, 0x28, 0x2C
pub const OFF_COMMIT: u32 = 0x30;

impl SsrLane {
    pub fn new(depth: usize) -> Self {
        SsrLane {
            depth,
            shadow: [0; 9],
            armed: None,
            active: None,
            fifo: VecDeque::new(),
            next_seq: 0,
            read_budget: 0,
            write_budget: 0,
            committed_ever: false,
            elements: 0,
        }
    }

    /// Write one configuration register. `Ok(false)` means the commit could
    /// not be accepted yet (shadow occupied) and the writer must retry.
    pub fn cfg_write(&mut self, offset: u32, value: u32) -> Result<bool, String> {
        match offset {
            OFF_BASE => self.shadow[0] = value,
            o if (OFF_STRIDE..OFF_STRIDE + 16).contains(&o) && o % 4 == 0 => {
                self.shadow[1 + ((o - OFF_STRIDE) / 4) as usize] = value;
            }
            o if (OFF_BOUND..OFF_BOUND + 16).contains(&o) && o % 4 == 0 => {
                self.shadow[5 + ((o - OFF_BOUND) / 4) as usize] = value;
            }
            OFF_COMMIT => {
                if self.armed.is_some() {
                    return Ok(false);
                }
                let dims = (value & 0x7) as u8;
                if !(1..=4).contains(&dims) {
                    return Err(format!("stream commit with bad dimension count {dims}"));
                }
                let write = value & 0x8 != 0;
                let cfg = StreamCfg {
                    base: self.shadow[0],
                    stride: [
                        self.shadow[1] as i32,
                        self.shadow[2] as i32,
                        self.shadow[3] as i32,
                        self.shadow[4] as i32,
                    ],
                    bound: [self.shadow[5], self.shadow[6], self.shadow[7], self.shadow[8]],
                    dims,
                    write,
                };
                if write {
                    self.write_budget += cfg.total();
                } else {
                    self.read_budget += cfg.total();
                }
                self.committed_ever = true;
                self.armed = Some(cfg);
                self.try_promote();
            }
            o => return Err(format!("stream config write to bad offset {o:#x}")),
        }
        Ok(true)
    }

    /// Read back a shadow register (commit reads as 0).
    pub fn cfg_read(&self, offset: u32) -> u32 {
        match offset {
            OFF_BASE => self.shadow[0],
            o if (OFF_STRIDE..OFF_STRIDE + 16).contains(&o) && o % 4 == 0 => {
                self.shadow[1 + ((o - OFF_STRIDE) / 4) as usize]
            }
            o if (OFF_BOUND..OFF_BOUND + 16).contains(&o) && o % 4 == 0 => {
                self.shadow[5 + ((o - OFF_BOUND) / 4) as usize]
            }
            _ => 0,
        }
    }

    fn try_promote(&mut self) {
        let Some(next) = self.armed else { return };
        let ready = match &self.active {
            None => true,
            // A mode switch additionally waits for the FIFO to drain, so the
            // new stream never touches the old stream's buffered elements.
            Some(a) => a.done() && (a.cfg.write == next.write || self.fifo.is_empty()),
        };
        if ready {
            self.active = Some(ActiveStream::new(next));
            self.armed = None;
        }
    }

    // ---- read-mode data path ----

    /// Address and tag of the next read request, if the lane wants one.
    pub fn want_request(&self) -> Option<(u32, u32)> {
        let a = self.active.as_ref()?;
        if a.cfg.write || a.done() || self.fifo.len() >= self.depth {
            return None;
        }
        Some((a.addr(), self.next_seq))
    }

    /// The request was granted: reserve its FIFO slot and step the pattern.
    pub fn on_read_grant(&mut self) {
        let seq = self.next_seq;
        self.next_seq = self.next_seq.wrapping_add(1);
        self.fifo.push_back(Slot { seq, filled: false, data: 0 });
        self.active.as_mut().expect("grant without active stream").advance();
        self.try_promote();
    }

    /// Memory response for the reservation tagged `seq`.
    pub fn fill_read(&mut self, seq: u32, data: u64) {
        let slot = self
            .fifo
            .iter_mut()
            .find(|s| s.seq == seq)
            .expect("read fill for unknown slot");
        debug_assert!(!slot.filled);
        slot.filled = true;
        slot.data = data;
    }

    /// Filled elements available at the head of the FIFO.
    pub fn available(&self) -> usize {
        self.fifo.iter().take_while(|s| s.filled).count()
    }

    /// May `n` elements be popped right now? `Err` is the overrun /
    /// unconfigured fault, `Ok(false)` means wait for data.
    pub fn can_pop(&self, n: u64) -> Result<bool, String> {
        if self.read_budget < n {
            if !self.committed_ever {
                return Err("stream read from an enabled but unconfigured lane".into());
            }
            return Err("stream overrun: more reads than configured elements".into());
        }
        Ok(self.available() as u64 >= n)
    }

    pub fn pop(&mut self) -> u64 {
        let s = self.fifo.pop_front().expect("pop from empty stream FIFO");
        debug_assert!(s.filled);
        self.read_budget -= 1;
        self.elements += 1;
        // An emptied FIFO may unblock a deferred mode-switch promotion.
        self.try_promote();
        s.data
    }

    // ---- write-mode data path ----

    /// May a write be reserved right now? `Err` is the overrun fault,
    /// `Ok(false)` means the FIFO is full.
    pub fn can_reserve_write(&self) -> Result<bool, String> {
        if self.write_budget == 0 {
            if !self.committed_ever {
                return Err("stream write to an enabled but unconfigured lane".into());
            }
            return Err("stream overrun: more writes than configured elements".into());
        }
        Ok(self.fifo.len() < self.depth)
    }

    /// Reserve the next write slot (program order) and return its tag.
    pub fn reserve_write(&mut self) -> u32 {
        debug_assert!(self.fifo.len() < self.depth);
        let seq = self.next_seq;
        self.next_seq = self.next_seq.wrapping_add(1);
        self.fifo.push_back(Slot { seq, filled: false, data: 0 });
        self.write_budget -= 1;
        seq
    }

    /// The producing instruction completed: deposit its result.
    pub fn fill_write(&mut self, seq: u32, data: u64) {
        let slot = self
            .fifo
            .iter_mut()
            .find(|s| s.seq == seq)
            .expect("write fill for unknown slot");
        debug_assert!(!slot.filled);
        slot.filled = true;
        slot.data = data;
    }

    /// Address and data of the next store, if the head slot is ready.
    pub fn want_drain(&self) -> Option<(u32, u64)> {
        let a = self.active.as_ref()?;
        if !a.cfg.write || a.done() {
            return None;
        }
        let head = self.fifo.front()?;
        if !head.filled {
            return None;
        }
        Some((a.addr(), head.data))
    }

    /// The store was granted: free the slot and step the pattern.
    pub fn on_drain_grant(&mut self) {
        self.fifo.pop_front();
        self.elements += 1;
        self.active.as_mut().expect("drain without active stream").advance();
        self.try_promote();
    }

    // ---- status ----

    /// Quiesced: nothing armed, nothing mid-stream, FIFO empty. The stream
    /// CSR may only be disabled once every lane is idle.
    pub fn idle(&self) -> bool {
        self.armed.is_none()
            && self.fifo.is_empty()
            && self.active.as_ref().map_or(true, |a| a.done())
            && self.read_budget == 0
            && self.write_budget == 0
    }

    pub fn active_is_write(&self) -> bool {
        self.active.as_ref().map_or(false, |a| a.cfg.write)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Rng(u64);
    impl Rng {
        fn next(&mut self) -> u64 {
            self.0 = self.0.wrapping_add(0x9E3779B97F4A7C15);
            let mut z = self.0;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
            z ^ (z >> 31)
        }
        fn below(&mut self, n: u64) -> u64 {
            self.next() % n
        }
    }

    fn commit_value(dims: u8, write: bool) -> u32 {
        dims as u32 | if write { 8 } else { 0 }
    }

    fn configure(lane: &mut SsrLane, cfg: &StreamCfg) {
        lane.cfg_write(OFF_BASE, cfg.base).unwrap();
        for d in 0..4 {
            lane.cfg_write(OFF_STRIDE + 4 * d as u32, cfg.stride[d] as u32).unwrap();
            lane.cfg_write(OFF_BOUND + 4 * d as u32, cfg.bound[d]).unwrap();
        }
        assert_eq!(lane.cfg_write(OFF_COMMIT, commit_value(cfg.dims, cfg.write)), Ok(true));
    }

    /// Drive a read stream to completion with immediate fills and pops,
    /// collecting the generated addresses.
    fn run_read(lane: &mut SsrLane) -> Vec<u32> {
        let mut got = Vec::new();
        loop {
            let mut progressed = false;
            if let Some((addr, seq)) = lane.want_request() {
                got.push(addr);
                lane.on_read_grant();
                lane.fill_read(seq, addr as u64);
                progressed = true;
            }
            while lane.can_pop(1) == Ok(true) {
                lane.pop();
                progressed = true;
            }
            if !progressed {
                break;
            }
        }
        got
    }

    /// Independent oracle: four explicit nested loops.
    fn oracle_addrs(cfg: &StreamCfg) -> Vec<u32> {
        let mut v = Vec::new();
        let b = |d: usize| if d < cfg.dims as usize { cfg.bound[d] as i64 } else { 1 };
        let s = |d: usize| if d < cfg.dims as usize { cfg.stride[d] as i64 } else { 0 };
        for i3 in 0..b(3) {
            for i2 in 0..b(2) {
                for i1 in 0..b(1) {
                    for i0 in 0..b(0) {
                        let a = cfg.base as i64
                            + i0 * s(0)
                            + i1 * s(1)
                            + i2 * s(2)
                            + i3 * s(3);
                        v.push(a as u32);
                    }
                }
            }
        }
        v
    }

    #[test]
    fn two_dim_walkthrough() {
        // 4 x 2 pattern: stride 8 inner, stride 256 outer.
        let cfg = StreamCfg {
            base: 0,
            stride: [8, 256, 0, 0],
            bound: [4, 2, 0, 0],
            dims: 2,
            write: false,
        };
        let mut lane = SsrLane::new(4);
        configure(&mut lane, &cfg);
        assert_eq!(run_read(&mut lane), vec![0, 8, 16, 24, 256, 264, 272, 280]);
        assert!(lane.idle());
        assert_eq!(lane.elements, 8);
    }

    #[test]
    fn addresses_match_nested_loop_oracle_randomized() {
        let mut rng = Rng(0xA5A5);
        for trial in 0..12_000 {
            let dims = 1 + rng.below(4) as u8;
            let mut cfg = StreamCfg {
                base: (rng.below(1 << 20) * 8) as u32,
                stride: [0; 4],
                bound: [0; 4],
                dims,
                write: false,
            };
            for d in 0..dims as usize {
                cfg.stride[d] = (rng.below(65) as i32 - 32) * 8;
                cfg.bound[d] = 1 + rng.below(5) as u32;
            }
            // Sprinkle degenerate zero-trip dimensions in some trials.
            if trial % 17 == 0 {
                cfg.bound[rng.below(dims as u64) as usize] = 0;
            }
            let mut lane = SsrLane::new(4);
            configure(&mut lane, &cfg);
            let got = run_read(&mut lane);
            assert_eq!(got, oracle_addrs(&cfg), "trial {trial} cfg {cfg:?}");
            assert!(lane.idle(), "trial {trial}");
        }
    }

    #[test]
    fn fifo_depth_caps_outstanding_elements() {
        let cfg = StreamCfg {
            base: 0,
            stride: [8, 0, 0, 0],
            bound: [100, 0, 0, 0],
            dims: 1,
            write: false,
        };
        let mut lane = SsrLane::new(4);
        configure(&mut lane, &cfg);
        for _ in 0..4 {
            let (_, seq) = lane.want_request().unwrap();
            lane.on_read_grant();
            lane.fill_read(seq, 0);
        }
        assert!(lane.want_request().is_none(), "no credit left at depth 4");
        assert_eq!(lane.can_pop(1), Ok(true));
        lane.pop();
        assert!(lane.want_request().is_some(), "pop frees a credit");
    }

    #[test]
    fn shadow_promotes_on_fetch_completion_and_commit_stalls_when_full() {
        let mk = |base: u32| StreamCfg {
            base,
            stride: [8, 0, 0, 0],
            bound: [2, 0, 0, 0],
            dims: 1,
            write: false,
        };
        let mut lane = SsrLane::new(4);
        configure(&mut lane, &mk(0));
        // Arm a second stream behind the first.
        lane.cfg_write(OFF_BASE, 1000).unwrap();
        assert_eq!(lane.cfg_write(OFF_COMMIT, commit_value(1, false)), Ok(true));
        // Third commit finds the shadow occupied: caller must retry.
        assert_eq!(lane.cfg_write(OFF_COMMIT, commit_value(1, false)), Ok(false));
        // Addresses run seamlessly from stream A into stream B.
        assert_eq!(run_read(&mut lane), vec![0, 8, 1000, 1008]);
        // Shadow drained: the commit is accepted now.
        assert_eq!(lane.cfg_write(OFF_COMMIT, commit_value(1, false)), Ok(true));
    }

    #[test]
    fn read_faults() {
        let mut lane = SsrLane::new(4);
        assert!(lane.can_pop(1).unwrap_err().contains("unconfigured"));

        let cfg = StreamCfg {
            base: 0,
            stride: [8, 0, 0, 0],
            bound: [1, 0, 0, 0],
            dims: 1,
            write: false,
        };
        configure(&mut lane, &cfg);
        let (_, seq) = lane.want_request().unwrap();
        lane.on_read_grant();
        lane.fill_read(seq, 7);
        assert_eq!(lane.can_pop(1), Ok(true));
        lane.pop();
        assert!(lane.can_pop(1).unwrap_err().contains("overrun"));
        // A dual-pop needing 2 elements overruns a 1-element stream even
        // before any data arrives.
        let mut lane2 = SsrLane::new(4);
        configure(&mut lane2, &cfg);
        assert!(lane2.can_pop(2).unwrap_err().contains("overrun"));
    }

    #[test]
    fn commit_dimension_validation() {
        let mut lane = SsrLane::new(4);
        assert!(lane.cfg_write(OFF_COMMIT, 0).unwrap_err().contains("dimension"));
        assert!(lane.cfg_write(OFF_COMMIT, 5).unwrap_err().contains("dimension"));
        assert!(lane.cfg_write(0x34, 1).unwrap_err().contains("bad offset"));
    }

    #[test]
    fn write_stream_reserves_in_order_fills_out_of_order_drains_in_order() {
        let cfg = StreamCfg {
            base: 0x80,
            stride: [8, 0, 0, 0],
            bound: [3, 0, 0, 0],
            dims: 1,
            write: true,
        };
        let mut lane = SsrLane::new(4);
        configure(&mut lane, &cfg);

        assert_eq!(lane.can_reserve_write(), Ok(true));
        let s0 = lane.reserve_write();
        let s1 = lane.reserve_write();
        let s2 = lane.reserve_write();
        // Nothing drains until the head is filled.
        assert!(lane.want_drain().is_none());
        lane.fill_write(s1, 111);
        assert!(lane.want_drain().is_none(), "head still empty");
        lane.fill_write(s0, 100);
        assert_eq!(lane.want_drain(), Some((0x80, 100)));
        lane.on_drain_grant();
        assert_eq!(lane.want_drain(), Some((0x88, 111)));
        lane.on_drain_grant();
        lane.fill_write(s2, 122);
        assert_eq!(lane.want_drain(), Some((0x90, 122)));
        lane.on_drain_grant();
        assert!(lane.idle());
        assert_eq!(lane.elements, 3);
        assert!(lane.can_reserve_write().unwrap_err().contains("overrun"));
    }

    #[test]
    fn write_fifo_full_reports_wait_not_fault() {
        let cfg = StreamCfg {
            base: 0,
            stride: [8, 0, 0, 0],
            bound: [10, 0, 0, 0],
            dims: 1,
            write: true,
        };
        let mut lane = SsrLane::new(2);
        configure(&mut lane, &cfg);
        lane.reserve_write();
        lane.reserve_write();
        assert_eq!(lane.can_reserve_write(), Ok(false));
    }

    #[test]
    fn mode_switch_waits_for_fifo_to_drain() {
        // Read stream followed by an armed write stream: the write must not
        // begin while read data is still buffered.
        let rd = StreamCfg {
            base: 0,
            stride: [8, 0, 0, 0],
            bound: [2, 0, 0, 0],
            dims: 1,
            write: false,
        };
        let mut lane = SsrLane::new(4);
        configure(&mut lane, &rd);
        let (_, s0) = lane.want_request().unwrap();
        lane.on_read_grant();
        lane.fill_read(s0, 1);
        let (_, s1) = lane.want_request().unwrap();
        lane.on_read_grant();
        lane.fill_read(s1, 2);
        // Fetch phase done; arm a write stream.
        lane.cfg_write(OFF_BASE, 0x40).unwrap();
        lane.cfg_write(OFF_COMMIT, commit_value(1, true)).unwrap();
        // Two read elements still buffered: write reservations must wait.
        assert!(!lane.active_is_write());
        lane.pop();
        lane.pop();
        assert!(lane.active_is_write(), "promotion happens once the FIFO empties");
        assert_eq!(lane.can_reserve_write(), Ok(true));
    }
}
