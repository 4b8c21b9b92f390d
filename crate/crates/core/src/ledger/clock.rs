//! Simulated block time.
//!
//! Stands in for `block.timestamp`. Time moves only when the driving test
//! or CLI advances it, which keeps every expiration boundary deterministic.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

/// A shared monotonic clock in whole seconds.
#[derive(Clone, Debug, Default)]
pub struct SimClock {
    now: Arc<AtomicU64>,
}

impl SimClock {
    pub fn new(start: u64) -> Self {
        SimClock {
            now: Arc::new(AtomicU64::new(start)),
        }
    }

    pub fn now(&self) -> u64 {
        self.now.load(Ordering::Acquire)
    }

    /// Advances by `seconds`. There is no way to move backwards.
    pub fn advance(&self, seconds: u64) {
        self.now.fetch_add(seconds, Ordering::Release);
    }

    /// Jumps forward to `target` if it is ahead of the current time.
    pub fn advance_to(&self, target: u64) {
        self.now.fetch_max(target, Ordering::Release);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn advances_and_never_rewinds() {
        let clock = SimClock::new(100);
        assert_eq!(clock.now(), 100);
        clock.advance(50);
        assert_eq!(clock.now(), 150);
        clock.advance_to(120);
        assert_eq!(clock.now(), 150);
        clock.advance_to(200);
        assert_eq!(clock.now(), 200);
    }

    #[test]
    fn clones_share_time() {
        let a = SimClock::new(0);
        let b = a.clone();
        a.advance(7);
        assert_eq!(b.now(), 7);
    }
}
