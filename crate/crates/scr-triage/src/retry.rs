//! Exponential-backoff retry schedule shared by the remote embedding and
//! chat clients and the classification runner.

use std::time::Duration;

use rand::Rng;

/// Backoff schedule: attempt `i` (1-based) that fails waits
/// `base_delay * factor^(i-1)` before the next try. Full jitter is off by
/// default so tests stay deterministic; production callers enable it.
#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub factor: f64,
    pub jitter: bool,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            base_delay: Duration::from_secs(1),
            factor: 2.0,
            jitter: false,
        }
    }
}

impl RetryPolicy {
    /// Policy with no waiting between attempts, for tests and mocks.
    pub fn immediate(max_attempts: u32) -> Self {
        RetryPolicy {
            max_attempts,
            base_delay: Duration::ZERO,
            factor: 2.0,
            jitter: false,
        }
    }

    /// Delay to wait after the given failed attempt (1-based).
    pub fn delay_after(&self, attempt: u32) -> Duration {
        let exp = attempt.saturating_sub(1).min(16);
        let scaled = self.base_delay.as_secs_f64() * self.factor.powi(exp as i32);
        let mut secs = scaled.min(Duration::MAX.as_secs_f64());
        if self.jitter {
            secs = rand::rng().random_range(0.0..=secs.max(f64::MIN_POSITIVE));
        }
        Duration::from_secs_f64(secs)
    }

    /// Sleeps for the post-attempt delay when one applies.
    pub fn wait_after(&self, attempt: u32) {
        let delay = self.delay_after(attempt);
        if !delay.is_zero() {
            std::thread::sleep(delay);
        }
    }
}
