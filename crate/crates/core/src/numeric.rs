//! Small numeric helpers: compensated summation and the shifted logarithm.

/// Neumaier-compensated running sum. Long accumulations of squared gradient
/// norms drift past 1e-12 relative error with plain summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// `log_+(z) = 1 + ln(z)`.
#[inline]
pub fn log_plus(z: f64) -> f64 {
    1.0 + libm::log(z)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_beats_naive_on_small_increments() {
        let mut kahan = KahanSum::new();
        kahan.add(1e16);
        for _ in 0..10_000 {
            kahan.add(1.0);
        }
        // Naive summation loses all 10_000 increments here.
        assert_eq!(kahan.value(), 1e16 + 10_000.0);
    }

    #[test]
    fn log_plus_at_one() {
        assert_eq!(log_plus(1.0), 1.0);
    }
}
