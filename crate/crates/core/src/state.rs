//! Projected-SGD state machine shared by every step-size schedule.
//!
//! A step executes in a fixed order: update the distance maximum with the
//! current iterate, fold the incoming gradient into the accumulators, compute
//! the step size, then move and project. The step size at step `t` therefore
//! sees `r̄_t` including `x_t` and `G_t` including `g_t`.

use alloc::format;
use alloc::string::{String, ToString};

use crate::error::CoreError;
use crate::numeric::KahanSum;
use crate::problems::Projection;
use crate::schedule::{self, Schedule};
use crate::vector::ParamVector;

/// A step size this many times larger than the first nonzero one is treated
/// as divergence. Blow-ups announce themselves within a few steps, long
/// before reaching this factor.
pub const DIVERGENCE_ETA_RATIO: f64 = 1e6;

/// Per-step annotation carried into run logs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepFlag {
    None,
    /// All gradients observed so far are zero; the step size was forced to 0.
    ZeroGradSum,
    /// Cosine schedule queried past its horizon; clamped to the final value.
    CosineClamped,
}

impl StepFlag {
    pub fn as_str(&self) -> &'static str {
        match self {
            StepFlag::None => "",
            StepFlag::ZeroGradSum => "zero_grad_sum",
            StepFlag::CosineClamped => "cosine_clamped",
        }
    }
}

/// What one call to [`RunState::step`] did.
#[derive(Clone, Copy, Debug)]
pub struct StepOutcome {
    /// Index `t` of the step just taken (0-based).
    pub step_index: u64,
    pub eta: f64,
    /// `r̄_t` as used in the step size.
    pub r_bar: f64,
    /// `G_t`, including the current gradient.
    pub grad_sq_sum: f64,
    /// `G'_t` (equals `G_t` except under the tamed schedule).
    pub grad_sq_sum_prime: f64,
    pub grad_norm_sq: f64,
    pub flag: StepFlag,
}

/// Full optimizer state at step `t`.
#[derive(Clone, Debug)]
pub struct RunState {
    iterate: ParamVector,
    anchor: ParamVector,
    step: u64,
    r_bar: f64,
    grad_sq_sum: KahanSum,
    prev_grad_sq_sum: f64,
    grad_sq_sum_prime: f64,
    lbar: f64,
    lbar0: f64,
    r_eps: f64,
    eta0: Option<f64>,
    last_eta: f64,
    grad_norm_surrogate: bool,
}

impl RunState {
    /// Start a run at `x0` with initial movement size `r_eps`.
    pub fn init(x0: ParamVector, r_eps: f64) -> Result<Self, CoreError> {
        if !r_eps.is_finite() || r_eps <= 0.0 {
            return Err(CoreError::parameter(format!(
                "r_eps must be positive and finite, got {r_eps}"
            )));
        }
        if !x0.is_finite() {
            return Err(CoreError::input("initial point has non-finite entries"));
        }
        Ok(Self {
            anchor: x0.clone(),
            iterate: x0,
            step: 0,
            r_bar: r_eps,
            grad_sq_sum: KahanSum::new(),
            prev_grad_sq_sum: 0.0,
            grad_sq_sum_prime: 0.0,
            lbar: 0.0,
            lbar0: 0.0,
            r_eps,
            eta0: None,
            last_eta: 0.0,
            grad_norm_surrogate: false,
        })
    }

    /// One projected-SGD step with gradient `grad`.
    ///
    /// `ell_at_iterate` is the problem's local gradient-norm bound evaluated
    /// at the current iterate, when available; otherwise the running maximum
    /// of observed gradient norms stands in for it (valid as a lower
    /// surrogate) and the run is flagged.
    pub fn step(
        &mut self,
        grad: &ParamVector,
        ell_at_iterate: Option<f64>,
        schedule: &Schedule,
        projection: &Projection,
    ) -> Result<StepOutcome, CoreError> {
        let t = self.step;
        if grad.dim() != self.dim() {
            return Err(CoreError::input(format!(
                "gradient dimension {} does not match state dimension {}",
                grad.dim(),
                self.dim()
            )));
        }
        if !grad.is_finite() {
            return Err(CoreError::input("gradient has non-finite entries"));
        }

        // (1) distance from the anchor, running maximum
        let r_t = self.iterate.distance(&self.anchor);
        self.r_bar = self.r_bar.max(r_t);

        // (2) accumulators
        let grad_norm_sq = grad.norm_sq();
        self.prev_grad_sq_sum = self.grad_sq_sum.value();
        self.grad_sq_sum.add(grad_norm_sq);
        match ell_at_iterate {
            Some(ell) => {
                if !ell.is_finite() || ell < 0.0 {
                    return Err(CoreError::input(format!(
                        "local gradient bound must be finite and nonnegative, got {ell}"
                    )));
                }
                self.lbar = self.lbar.max(ell);
            }
            None => {
                self.lbar = self.lbar.max(libm::sqrt(grad_norm_sq));
                self.grad_norm_surrogate = true;
            }
        }
        if t == 0 {
            self.lbar0 = self.lbar;
        }

        // (3) step size
        let (eta, mut flag) = schedule::step_size(self, schedule)?;
        self.check_divergence(t, eta, "step size")?;
        if self.eta0.is_none() && eta > 0.0 {
            self.eta0 = Some(eta);
        }
        if flag == StepFlag::None && self.grad_sq_sum.value() == 0.0 && schedule.is_dog_family() {
            flag = StepFlag::ZeroGradSum;
        }

        // (4) move and project
        self.iterate.axpy(-eta, grad);
        projection.apply(&mut self.iterate);
        if !self.iterate.is_finite() {
            return Err(CoreError::Divergence {
                step: t,
                detail: "iterate left the finite range".to_string(),
            });
        }

        // (5) advance
        self.step = t + 1;
        self.last_eta = eta;

        debug_assert!(self.grad_sq_sum_prime >= self.grad_sq_sum.value() * (1.0 - 1e-12));
        Ok(StepOutcome {
            step_index: t,
            eta,
            r_bar: self.r_bar,
            grad_sq_sum: self.grad_sq_sum.value(),
            grad_sq_sum_prime: self.grad_sq_sum_prime,
            grad_norm_sq,
            flag,
        })
    }

    fn check_divergence(&self, step: u64, eta: f64, what: &str) -> Result<(), CoreError> {
        if !eta.is_finite() {
            return Err(CoreError::Divergence {
                step,
                detail: format!("non-finite {what}"),
            });
        }
        if let Some(eta0) = self.eta0 {
            if eta > DIVERGENCE_ETA_RATIO * eta0 {
                return Err(CoreError::Divergence {
                    step,
                    detail: format!(
                        "{what} {eta:e} exceeds {DIVERGENCE_ETA_RATIO:e} times the initial {eta0:e}"
                    ),
                });
            }
        }
        Ok(())
    }

    pub(crate) fn set_grad_sq_sum_prime(&mut self, gprime: f64) {
        debug_assert!(
            gprime >= self.grad_sq_sum_prime,
            "G' must be nondecreasing: {gprime} < {}",
            self.grad_sq_sum_prime
        );
        self.grad_sq_sum_prime = gprime;
    }

    pub fn dim(&self) -> usize {
        self.anchor.dim()
    }

    /// Current iterate `x_t`.
    pub fn iterate(&self) -> &ParamVector {
        &self.iterate
    }

    /// Anchor `x_0`.
    pub fn anchor(&self) -> &ParamVector {
        &self.anchor
    }

    /// Completed step count `t`.
    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn r_bar(&self) -> f64 {
        self.r_bar
    }

    pub fn r_eps(&self) -> f64 {
        self.r_eps
    }

    /// `G_t`: compensated sum of squared gradient norms seen so far.
    pub fn grad_sq_sum(&self) -> f64 {
        self.grad_sq_sum.value()
    }

    /// `G_{t-1}`: the sum before the most recent gradient was folded in.
    pub fn prev_grad_sq_sum(&self) -> f64 {
        self.prev_grad_sq_sum
    }

    pub fn grad_sq_sum_prime(&self) -> f64 {
        self.grad_sq_sum_prime
    }

    /// Running maximum of the local gradient bound (or observed norms).
    pub fn lbar(&self) -> f64 {
        self.lbar
    }

    pub fn lbar0(&self) -> f64 {
        self.lbar0
    }

    pub fn last_eta(&self) -> f64 {
        self.last_eta
    }

    pub fn first_nonzero_eta(&self) -> Option<f64> {
        self.eta0
    }

    /// True when the run ever substituted observed gradient norms for a
    /// missing local bound.
    pub fn used_grad_norm_surrogate(&self) -> bool {
        self.grad_norm_surrogate
    }
}

/// Index ranges splitting `[0, dim)` into parameter groups.
#[derive(Clone, Debug)]
pub struct GroupPartition {
    ranges: alloc::vec::Vec<core::ops::Range<usize>>,
}

impl GroupPartition {
    /// Ranges must be nonempty, in order, and cover `[0, dim)` exactly.
    pub fn new(
        ranges: alloc::vec::Vec<core::ops::Range<usize>>,
        dim: usize,
    ) -> Result<Self, CoreError> {
        if ranges.is_empty() {
            return Err(CoreError::input("partition needs at least one group"));
        }
        let mut expected = 0usize;
        for (i, r) in ranges.iter().enumerate() {
            if r.start != expected || r.end <= r.start {
                return Err(CoreError::input(format!(
                    "group {i} ({}..{}) does not tile [0, {dim})",
                    r.start, r.end
                )));
            }
            expected = r.end;
        }
        if expected != dim {
            return Err(CoreError::input(format!(
                "groups cover [0, {expected}) but the vector has dimension {dim}"
            )));
        }
        Ok(Self { ranges })
    }

    pub fn single(dim: usize) -> Self {
        Self { ranges: alloc::vec![0..dim] }
    }

    /// Split into `count` contiguous chunks of near-equal size.
    pub fn chunks(dim: usize, count: usize) -> Result<Self, CoreError> {
        if count == 0 || count > dim {
            return Err(CoreError::input(format!(
                "cannot split dimension {dim} into {count} groups"
            )));
        }
        let base = dim / count;
        let extra = dim % count;
        let mut ranges = alloc::vec::Vec::with_capacity(count);
        let mut start = 0;
        for i in 0..count {
            let len = base + usize::from(i < extra);
            ranges.push(start..start + len);
            start += len;
        }
        Self::new(ranges, dim)
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn range(&self, index: usize) -> Option<&core::ops::Range<usize>> {
        self.ranges.get(index)
    }

    pub fn iter(&self) -> core::slice::Iter<'_, core::ops::Range<usize>> {
        self.ranges.iter()
    }
}

#[derive(Clone, Debug)]
struct GroupAccum {
    r_bar: f64,
    r_eps: f64,
    grad_sq_sum: KahanSum,
    eta0: Option<f64>,
}

/// Per-group accumulators for the layer-wise schedule: each group keeps its
/// own `r̄`, `G` and `r_ε` and evolves independently of the others.
#[derive(Clone, Debug)]
pub struct GroupState {
    iterate: ParamVector,
    anchor: ParamVector,
    step: u64,
    partition: GroupPartition,
    groups: alloc::vec::Vec<GroupAccum>,
}

/// Step report for a grouped run.
#[derive(Clone, Debug)]
pub struct GroupStepOutcome {
    pub step_index: u64,
    pub etas: alloc::vec::Vec<f64>,
    pub r_bars: alloc::vec::Vec<f64>,
    pub grad_sq_sums: alloc::vec::Vec<f64>,
}

impl GroupState {
    /// Per-group initial movement `r_ε^l = alpha · (1 + ‖x_0^l‖)`.
    pub fn init(
        x0: ParamVector,
        alpha: f64,
        partition: GroupPartition,
    ) -> Result<Self, CoreError> {
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(CoreError::parameter(format!(
                "alpha must be positive and finite, got {alpha}"
            )));
        }
        let r_eps: alloc::vec::Vec<f64> = partition
            .iter()
            .map(|r| alpha * (1.0 + x0.norm_range(r.clone())))
            .collect();
        Self::init_with_group_r_eps(x0, &r_eps, partition)
    }

    pub fn init_with_group_r_eps(
        x0: ParamVector,
        r_eps: &[f64],
        partition: GroupPartition,
    ) -> Result<Self, CoreError> {
        if !x0.is_finite() {
            return Err(CoreError::input("initial point has non-finite entries"));
        }
        if r_eps.len() != partition.len() {
            return Err(CoreError::input("one r_eps per group required"));
        }
        if let Some(bad) = r_eps.iter().find(|v| !v.is_finite() || **v <= 0.0) {
            return Err(CoreError::parameter(format!(
                "group r_eps must be positive and finite, got {bad}"
            )));
        }
        let groups = r_eps
            .iter()
            .map(|&r| GroupAccum {
                r_bar: r,
                r_eps: r,
                grad_sq_sum: KahanSum::new(),
                eta0: None,
            })
            .collect();
        Ok(Self {
            anchor: x0.clone(),
            iterate: x0,
            step: 0,
            partition,
            groups,
        })
    }

    /// One layer-wise step: every group applies the distance-over-gradients
    /// ratio with `eps_denom` added under the square root.
    pub fn step(
        &mut self,
        grad: &ParamVector,
        eps_denom: f64,
        projection: &Projection,
    ) -> Result<GroupStepOutcome, CoreError> {
        let t = self.step;
        if grad.dim() != self.anchor.dim() {
            return Err(CoreError::input(format!(
                "gradient dimension {} does not match state dimension {}",
                grad.dim(),
                self.anchor.dim()
            )));
        }
        if !grad.is_finite() {
            return Err(CoreError::input("gradient has non-finite entries"));
        }
        if !(eps_denom >= 0.0) {
            return Err(CoreError::parameter("eps_denom must be nonnegative".to_string()));
        }

        let n_groups = self.partition.len();
        let mut etas = alloc::vec::Vec::with_capacity(n_groups);
        let mut r_bars = alloc::vec::Vec::with_capacity(n_groups);
        let mut sums = alloc::vec::Vec::with_capacity(n_groups);

        for (idx, range) in self.partition.iter().enumerate() {
            let group = &mut self.groups[idx];
            let r_t = self.iterate.distance_range(&self.anchor, range.clone());
            group.r_bar = group.r_bar.max(r_t);
            let gnorm_sq: f64 = grad.as_slice()[range.clone()].iter().map(|v| v * v).sum();
            group.grad_sq_sum.add(gnorm_sq);

            let eta = guarded_ratio(group.r_bar, group.grad_sq_sum.value(), eps_denom);
            if !eta.is_finite() {
                return Err(CoreError::Divergence {
                    step: t,
                    detail: format!("non-finite step size in group {idx}"),
                });
            }
            if let Some(eta0) = group.eta0 {
                if eta > DIVERGENCE_ETA_RATIO * eta0 {
                    return Err(CoreError::Divergence {
                        step: t,
                        detail: format!(
                            "group {idx} step size {eta:e} exceeds {DIVERGENCE_ETA_RATIO:e} \
                             times its initial {eta0:e}"
                        ),
                    });
                }
            } else if eta > 0.0 {
                group.eta0 = Some(eta);
            }

            for (x, g) in self.iterate.values_mut()[range.clone()]
                .iter_mut()
                .zip(grad.as_slice()[range.clone()].iter())
            {
                *x -= eta * g;
            }

            etas.push(eta);
            r_bars.push(group.r_bar);
            sums.push(group.grad_sq_sum.value());
        }

        projection.apply(&mut self.iterate);
        if !self.iterate.is_finite() {
            return Err(CoreError::Divergence {
                step: t,
                detail: "iterate left the finite range".to_string(),
            });
        }
        self.step = t + 1;

        Ok(GroupStepOutcome {
            step_index: t,
            etas,
            r_bars,
            grad_sq_sums: sums,
        })
    }

    /// Step size group `index` would use right now.
    pub fn group_eta(&self, index: usize, eps_denom: f64) -> Result<f64, CoreError> {
        let group = self
            .groups
            .get(index)
            .ok_or_else(|| CoreError::input(format!("no group with index {index}")))?;
        Ok(guarded_ratio(group.r_bar, group.grad_sq_sum.value(), eps_denom))
    }

    pub fn iterate(&self) -> &ParamVector {
        &self.iterate
    }

    pub fn anchor(&self) -> &ParamVector {
        &self.anchor
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn partition(&self) -> &GroupPartition {
        &self.partition
    }

    pub fn group_r_bar(&self, index: usize) -> Option<f64> {
        self.groups.get(index).map(|g| g.r_bar)
    }

    pub fn group_grad_sq_sum(&self, index: usize) -> Option<f64> {
        self.groups.get(index).map(|g| g.grad_sq_sum.value())
    }

    pub fn group_r_eps(&self, index: usize) -> Option<f64> {
        self.groups.get(index).map(|g| g.r_eps)
    }
}

/// `r̄ / sqrt(G + eps)`, with the all-zero-gradients case pinned to 0.
fn guarded_ratio(r_bar: f64, grad_sq_sum: f64, eps_denom: f64) -> f64 {
    let denom_sq = grad_sq_sum + eps_denom;
    if denom_sq == 0.0 {
        0.0
    } else {
        r_bar / libm::sqrt(denom_sq)
    }
}

#[allow(unused_imports)]
pub(crate) use guarded_ratio as ldog_ratio;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::Schedule;
    use alloc::vec;

    fn scalar(v: f64) -> ParamVector {
        ParamVector::new(vec![v]).unwrap()
    }

    #[test]
    fn init_sets_definitions() {
        let state = RunState::init(ParamVector::new(vec![1.0, 1.0]).unwrap(), 0.1).unwrap();
        assert_eq!(state.r_bar(), 0.1);
        assert_eq!(state.grad_sq_sum(), 0.0);
        assert_eq!(state.step_count(), 0);
        assert_eq!(state.iterate(), state.anchor());
    }

    #[test]
    fn init_scaled_r_eps_from_zero_anchor() {
        let x0 = ParamVector::zeros(4);
        let r_eps = 1e-6 * (1.0 + x0.norm());
        let state = RunState::init(x0, r_eps).unwrap();
        assert_eq!(state.r_bar(), 1e-6);
    }

    #[test]
    fn init_rejects_bad_inputs() {
        let x0 = ParamVector::zeros(2);
        assert!(matches!(
            RunState::init(x0.clone(), 0.0),
            Err(CoreError::Parameter(_))
        ));
        assert!(matches!(
            RunState::init(x0, -1.0),
            Err(CoreError::Parameter(_))
        ));
        // A NaN entry is already rejected by the vector constructor.
        assert!(matches!(
            ParamVector::new(vec![f64::NAN]),
            Err(CoreError::Input(_))
        ));
    }

    #[test]
    fn two_step_quadratic_recursion() {
        // f(x) = x²/2 from x0 = 1 with r_eps = 0.1: the first step is the
        // normalized step of size r_eps, the second follows the ratio with
        // both accumulators updated first.
        let mut state = RunState::init(scalar(1.0), 0.1).unwrap();
        let out0 = state
            .step(&scalar(1.0), None, &Schedule::Dog, &Projection::Unconstrained)
            .unwrap();
        assert!((out0.eta - 0.1).abs() < 1e-15);
        assert!((state.iterate()[0] - 0.9).abs() < 1e-15);

        let out1 = state
            .step(&scalar(0.9), None, &Schedule::Dog, &Projection::Unconstrained)
            .unwrap();
        assert!((out1.r_bar - 0.1).abs() < 1e-15);
        assert!((out1.grad_sq_sum - 1.81).abs() < 1e-12);
        let eta1 = 0.1 / libm::sqrt(1.81);
        assert!((out1.eta - eta1).abs() < 1e-15);
        assert!((state.iterate()[0] - (0.9 - 0.9 * eta1)).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_at_start_stays_put() {
        let mut state = RunState::init(scalar(1.0), 0.1).unwrap();
        let out = state
            .step(&scalar(0.0), None, &Schedule::Dog, &Projection::Unconstrained)
            .unwrap();
        assert_eq!(out.eta, 0.0);
        assert_eq!(out.flag, StepFlag::ZeroGradSum);
        assert_eq!(state.iterate()[0], 1.0);
    }

    #[test]
    fn dimension_mismatch_is_an_input_error() {
        let mut state = RunState::init(ParamVector::zeros(2), 0.1).unwrap();
        let err = state
            .step(
                &ParamVector::zeros(3),
                None,
                &Schedule::Dog,
                &Projection::Unconstrained,
            )
            .unwrap_err();
        assert!(matches!(err, CoreError::Input(_)));
    }

    #[test]
    fn non_finite_iterate_is_divergence_with_step_index() {
        let mut state = RunState::init(scalar(1.0), 0.1).unwrap();
        let schedule = Schedule::ConstantSgd { eta: 1e308 };
        state
            .step(&scalar(1.0), None, &schedule, &Projection::Unconstrained)
            .unwrap();
        let err = state
            .step(&scalar(1e308), None, &schedule, &Projection::Unconstrained)
            .unwrap_err();
        match err {
            CoreError::Divergence { step, .. } => assert_eq!(step, 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn ball_projection_keeps_iterates_inside() {
        let center = ParamVector::zeros(2);
        let projection = crate::problems::ball_projection(center.clone(), 0.5).unwrap();
        let mut state = RunState::init(center.clone(), 0.1).unwrap();
        for i in 0..50 {
            let g = ParamVector::new(vec![if i % 2 == 0 { 2.0 } else { -1.0 }, 1.5]).unwrap();
            state.step(&g, None, &Schedule::Dog, &projection).unwrap();
            assert!(state.iterate().distance(&center) <= 0.5 + 1e-12);
        }
    }

    #[test]
    fn partition_must_tile_exactly() {
        assert!(GroupPartition::new(vec![0..2, 2..5], 5).is_ok());
        assert!(GroupPartition::new(vec![0..2, 3..5], 5).is_err());
        assert!(GroupPartition::new(vec![0..2, 1..5], 5).is_err());
        assert!(GroupPartition::new(vec![0..2], 5).is_err());
        assert!(GroupPartition::new(vec![], 5).is_err());
        let chunks = GroupPartition::chunks(10, 3).unwrap();
        assert_eq!(chunks.len(), 3);
        let total: usize = chunks.iter().map(|r| r.end - r.start).sum();
        assert_eq!(total, 10);
    }

    #[test]
    fn grouped_accumulators_evolve_independently() {
        // Two groups with disjoint gradient support: pushing only on the
        // first group must leave the second group's step size untouched.
        let x0 = ParamVector::zeros(4);
        let partition = GroupPartition::new(vec![0..2, 2..4], 4).unwrap();
        let mut state =
            GroupState::init_with_group_r_eps(x0, &[0.1, 0.1], partition).unwrap();
        let g = ParamVector::new(vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        for _ in 0..5 {
            state.step(&g, 0.0, &Projection::Unconstrained).unwrap();
        }
        assert!(state.group_grad_sq_sum(0).unwrap() > 0.0);
        assert_eq!(state.group_grad_sq_sum(1).unwrap(), 0.0);
        assert_eq!(state.group_eta(1, 0.0).unwrap(), 0.0);
        assert_eq!(state.group_r_bar(1).unwrap(), 0.1);
    }
}
