//! Token-bucket rate limiting for backend admission.
//!
//! Callers block until a token is available; requests are never dropped. A
//! budget of zero disables limiting entirely (the scripted backend and warm
//! caches need no pacing).

use std::time::{Duration, Instant};

use parking_lot::Mutex;

struct Bucket {
    tokens: f64,
    capacity: f64,
    refill_per_sec: f64,
    last_refill: Instant,
}

pub struct RateLimiter {
    bucket: Option<Mutex<Bucket>>,
}

impl RateLimiter {
    pub fn per_minute(requests: u32) -> Self {
        if requests == 0 {
            return Self { bucket: None };
        }
        let capacity = requests as f64;
        Self {
            bucket: Some(Mutex::new(Bucket {
                tokens: capacity,
                capacity,
                refill_per_sec: capacity / 60.0,
                last_refill: Instant::now(),
            })),
        }
    }

    pub fn unlimited() -> Self {
        Self::per_minute(0)
    }

    /// Block until one request token is available.
    pub fn acquire(&self) {
        let Some(bucket) = &self.bucket else { return };
        loop {
            let wait = {
                let mut b = bucket.lock();
                let now = Instant::now();
                let elapsed = now.duration_since(b.last_refill).as_secs_f64();
                b.tokens = (b.tokens + elapsed * b.refill_per_sec).min(b.capacity);
                b.last_refill = now;
                if b.tokens >= 1.0 {
                    b.tokens -= 1.0;
                    return;
                }
                (1.0 - b.tokens) / b.refill_per_sec
            };
            std::thread::sleep(Duration::from_secs_f64(wait.min(1.0)));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unlimited_never_blocks() {
        let limiter = RateLimiter::unlimited();
        let start = Instant::now();
        for _ in 0..10_000 {
            limiter.acquire();
        }
        assert!(start.elapsed() < Duration::from_millis(200));
    }

    #[test]
    fn burst_within_capacity_is_immediate() {
        let limiter = RateLimiter::per_minute(600);
        let start = Instant::now();
        for _ in 0..600 {
            limiter.acquire();
        }
        assert!(start.elapsed() < Duration::from_millis(500));
    }

    #[test]
    fn exhausted_bucket_blocks_until_refill() {
        // 6000/min = 100/sec: draining capacity then asking for 10 more
        // should take roughly 100ms.
        let limiter = RateLimiter::per_minute(6000);
        for _ in 0..6000 {
            limiter.acquire();
        }
        let start = Instant::now();
        for _ in 0..10 {
            limiter.acquire();
        }
        let elapsed = start.elapsed();
        assert!(elapsed >= Duration::from_millis(50), "refill happened too fast: {elapsed:?}");
        assert!(elapsed < Duration::from_secs(2), "refill too slow: {elapsed:?}");
    }
}
