//! Execution tracing: a flat, deterministic event stream.
//!
//! Rendered lines have the fixed shape `cycle,core,unit,event,detail`.
//! Tracing is off by default; when enabled the cluster records issue,
//! offload, memory-grant, commit, and marker events, which is enough to
//! reconstruct pipeline behavior and to check memory address streams in
//! tests.

use std::fmt;

#[derive(Clone, Debug, PartialEq)]
pub struct TraceEvent {
    pub cycle: u64,
    pub core: u32,
    /// Producing unit: "core", "fpss", "seq", "mem", "icache".
    pub unit: &'static str,
    /// Event name, e.g. "issue", "offload", "grant", "commit", "fault".
    pub event: &'static str,
    pub detail: String,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{},{}",
            self.cycle, self.core, self.unit, self.event, self.detail
        )
    }
}

#[derive(Default)]
pub struct Trace {
    pub enabled: bool,
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn new(enabled: bool) -> Self {
        Trace {
            enabled,
            events: Vec::new(),
        }
    }

    #[inline]
    pub fn emit(&mut self, cycle: u64, core: u32, unit: &'static str, event: &'static str, detail: String) {
        if self.enabled {
            self.events.push(TraceEvent {
                cycle,
                core,
                unit,
                event,
                detail,
            });
        }
    }

    /// Render the whole stream, one line per event.
    pub fn render(&self) -> String {
        let mut out = String::with_capacity(self.events.len() * 32);
        for e in &self.events {
            out.push_str(&e.to_string());
            out.push('\n');
        }
        out
    }

    /// Events matching a `unit:event` filter; either side may be "*".
    pub fn filter<'a>(&'a self, unit: &'a str, event: &'a str) -> impl Iterator<Item = &'a TraceEvent> {
        self.events
            .iter()
            .filter(move |e| (unit == "*" || e.unit == unit) && (event == "*" || e.event == event))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disabled_trace_records_nothing() {
        let mut t = Trace::new(false);
        t.emit(1, 0, "core", "issue", "addi".into());
        assert!(t.events.is_empty());
    }

    #[test]
    fn render_and_filter() {
        let mut t = Trace::new(true);
        t.emit(5, 0, "core", "issue", "addi x1, x0, 1".into());
        t.emit(6, 1, "mem", "grant", "0x00100000 load".into());
        assert_eq!(t.render().lines().count(), 2);
        assert_eq!(t.render().lines().next().unwrap(), "5,0,core,issue,addi x1, x0, 1");
        assert_eq!(t.filter("mem", "grant").count(), 1);
        assert_eq!(t.filter("*", "*").count(), 2);
    }
}
