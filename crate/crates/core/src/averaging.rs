//! Output rules: the distance-weighted running average with online selection
//! of the best prefix, the uniform average, and polynomial decay averaging.

use alloc::string::ToString;

use crate::error::CoreError;
use crate::vector::ParamVector;

pub const DEFAULT_GAMMA: f64 = 8.0;

/// Running averages over a stream of iterates.
///
/// `record` is called once per step with the iterate about to be updated and
/// the weight `r̄_t` used in that step; the weighted average over a prefix is
/// snapshotted online whenever the prefix score `Σ_{i<t} r̄_i / r̄_t` reaches
/// a new maximum, so no iterate history is kept (O(dim) memory). Ties go to
/// the larger step to include more averaging mass.
#[derive(Clone, Debug)]
pub struct AverageState {
    weighted_sum: ParamVector,
    weight_total: f64,
    uniform_sum: ParamVector,
    count: u64,
    poly_avg: ParamVector,
    gamma: f64,
    best_score: f64,
    best_snapshot: Option<ParamVector>,
    tau: u64,
}

impl AverageState {
    /// `x0` seeds the polynomial average so its recursion is defined from t = 1.
    pub fn new(x0: &ParamVector, gamma: f64) -> Result<Self, CoreError> {
        if !gamma.is_finite() || gamma <= 0.0 {
            return Err(CoreError::parameter("gamma must be positive".to_string()));
        }
        Ok(Self {
            weighted_sum: ParamVector::zeros(x0.dim()),
            weight_total: 0.0,
            uniform_sum: ParamVector::zeros(x0.dim()),
            count: 0,
            poly_avg: x0.clone(),
            gamma,
            best_score: f64::NEG_INFINITY,
            best_snapshot: None,
            tau: 0,
        })
    }

    /// Record iterate `x_t` with weight `r̄_t`; `prefix_weight` is the weight
    /// total before this call (the caller's `Σ_{i<t} r̄_i`).
    pub fn record(&mut self, x_t: &ParamVector, r_bar_t: f64, prefix_weight: f64) {
        debug_assert_eq!(x_t.dim(), self.weighted_sum.dim());
        debug_assert!(r_bar_t > 0.0);
        debug_assert!((prefix_weight - self.weight_total).abs() <= 1e-9 * (1.0 + self.weight_total));
        self.score_prefix(r_bar_t, prefix_weight);
        self.weighted_sum.axpy(r_bar_t, x_t);
        self.weight_total += r_bar_t;
        self.uniform_sum.axpy(1.0, x_t);
        self.count += 1;
    }

    /// Score the final iterate's prefix without adding it to any sum. Call
    /// once after the last step with `r̄_T` measured on the final iterate.
    pub fn finalize(&mut self, r_bar_final: f64) {
        self.score_prefix(r_bar_final, self.weight_total);
    }

    fn score_prefix(&mut self, r_bar_t: f64, prefix_weight: f64) {
        // The empty prefix (t = 0) has no average to snapshot.
        if self.count == 0 {
            return;
        }
        let score = prefix_weight / r_bar_t;
        if score >= self.best_score {
            self.best_score = score;
            self.tau = self.count;
            let mut snapshot = self.weighted_sum.clone();
            snapshot.scale(1.0 / self.weight_total);
            self.best_snapshot = Some(snapshot);
        }
    }

    /// Polynomial decay update `x̄_t = (1 − (1+γ)/(t+γ))·x̄_{t−1} + ((1+γ)/(t+γ))·x_t`.
    pub fn poly_update(&mut self, x_t: &ParamVector, t: u64) -> Result<(), CoreError> {
        if t == 0 {
            return Err(CoreError::parameter(
                "polynomial decay update needs t >= 1 (the coefficient would exceed 1)".to_string(),
            ));
        }
        let coeff = (1.0 + self.gamma) / (t as f64 + self.gamma);
        debug_assert!(coeff > 0.0 && coeff <= 1.0);
        self.poly_avg.lerp(coeff, x_t);
        Ok(())
    }

    /// Weighted average over everything recorded so far.
    pub fn weighted_average(&self) -> Option<ParamVector> {
        if self.weight_total > 0.0 {
            let mut avg = self.weighted_sum.clone();
            avg.scale(1.0 / self.weight_total);
            Some(avg)
        } else {
            None
        }
    }

    /// Uniform average `(1/t) Σ_{k<t} x_k` of the first `t` recorded iterates.
    pub fn uniform_average(&self, t: u64) -> Result<ParamVector, CoreError> {
        if t == 0 {
            return Err(CoreError::parameter("uniform average needs t >= 1".to_string()));
        }
        debug_assert_eq!(t, self.count, "uniform average is kept for the full recorded prefix");
        let mut avg = self.uniform_sum.clone();
        avg.scale(1.0 / t as f64);
        Ok(avg)
    }

    pub fn poly_average(&self) -> &ParamVector {
        &self.poly_avg
    }

    /// The snapshotted `x̄_τ`, if any prefix has been scored.
    pub fn best_snapshot(&self) -> Option<&ParamVector> {
        self.best_snapshot.as_ref()
    }

    pub fn tau(&self) -> u64 {
        self.tau
    }

    pub fn best_score(&self) -> f64 {
        self.best_score
    }

    pub fn weight_total(&self) -> f64 {
        self.weight_total
    }

    pub fn recorded(&self) -> u64 {
        self.count
    }
}
