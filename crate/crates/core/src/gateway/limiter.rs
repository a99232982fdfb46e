use std::sync::Mutex;
use std::time::{Duration, Instant};

/// Token bucket; the only synchronized state in a shared gateway.
#[derive(Debug)]
pub struct TokenBucket {
    capacity: f64,
    refill_per_sec: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    pub fn per_minute(requests_per_minute: f64) -> Self {
        let rpm = requests_per_minute.max(f64::MIN_POSITIVE);
        Self::new(rpm.max(1.0), rpm / 60.0, Instant::now())
    }

    pub fn new(capacity: f64, refill_per_sec: f64, now: Instant) -> Self {
        Self { capacity, refill_per_sec, state: Mutex::new((capacity, now)) }
    }

    /// Takes a token at `now`, or returns how long to wait for one.
    pub fn try_acquire_at(&self, now: Instant) -> Result<(), Duration> {
        let mut st = self.state.lock().unwrap();
        let elapsed = now.saturating_duration_since(st.1).as_secs_f64();
        st.0 = (st.0 + elapsed * self.refill_per_sec).min(self.capacity);
        st.1 = st.1.max(now);
        if st.0 >= 1.0 {
            st.0 -= 1.0;
            Ok(())
        } else {
            Err(Duration::from_secs_f64((1.0 - st.0) / self.refill_per_sec))
        }
    }

    pub fn acquire(&self) {
        while let Err(wait) = self.try_acquire_at(Instant::now()) {
            std::thread::sleep(wait);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn burst_then_wait() {
        let t0 = Instant::now();
        let b = TokenBucket::new(2.0, 1.0, t0);
        assert!(b.try_acquire_at(t0).is_ok());
        assert!(b.try_acquire_at(t0).is_ok());
        let wait = b.try_acquire_at(t0).unwrap_err();
        assert!((wait.as_secs_f64() - 1.0).abs() < 1e-9);
        assert!(b.try_acquire_at(t0 + Duration::from_millis(1000)).is_ok());
    }
}
