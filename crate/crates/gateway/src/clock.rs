use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{SystemTime, UNIX_EPOCH};

use collvote_core::ledger::ClockMapping;

/// Source of logical ticks stamped on ledger writes.
pub trait Clock: Send + Sync {
    fn now(&self) -> u64;
}

/// Tick set explicitly; for tests and replays.
#[derive(Debug, Default)]
pub struct ManualClock(AtomicU64);

impl ManualClock {
    pub fn new(tick: u64) -> Self {
        ManualClock(AtomicU64::new(tick))
    }

    pub fn set(&self, tick: u64) {
        self.0.store(tick, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}

/// Wall clock mapped to ticks by the session's advisory mapping.
#[derive(Debug, Clone, Copy)]
pub struct WallClock(pub ClockMapping);

impl Clock for WallClock {
    fn now(&self) -> u64 {
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        self.0.tick_at(secs)
    }
}
