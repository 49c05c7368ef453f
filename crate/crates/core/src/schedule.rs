//! Step-size rules: distance-over-gradients and its tamed, scaled and
//! layer-wise variants, plus the usual tuned baselines.

use alloc::format;
use alloc::string::ToString;

use crate::error::CoreError;
use crate::numeric::log_plus;
use crate::state::{GroupState, RunState, StepFlag};

/// A step-size rule together with its fixed parameters. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub enum Schedule {
    /// `η_t = r̄_t / sqrt(G_t)`, no learning-rate parameter.
    Dog,
    /// Base-multiplier variant `η_t = c · r̄_t / sqrt(G_t)`; `c = 1` is
    /// bit-identical to [`Schedule::Dog`].
    ScaledDog { c: f64 },
    /// Tamed variant with the inflated denominator `G'_t`; needs the horizon
    /// and failure probability. In noiseless mode the time-uniform log factor
    /// is dropped (set to 1).
    TDog { horizon: u64, delta: f64, noiseless: bool },
    /// Layer-wise rule; runs on a [`GroupState`], with `eps_denom` added
    /// under the square root for numerical stability.
    LDog { eps_denom: f64 },
    ConstantSgd { eta: f64 },
    /// `peak · ½(1 + cos(π t / horizon))`, clamped past the horizon.
    CosineSgd { peak: f64, horizon: u64 },
    /// Norm-accumulator adaptive rule `η_t = rho / sqrt(G_t)`.
    AdaGradNorm { rho: f64 },
}

impl Schedule {
    pub fn validate(&self) -> Result<(), CoreError> {
        match self {
            Schedule::Dog => Ok(()),
            Schedule::ScaledDog { c } => {
                if !c.is_finite() || *c <= 0.0 {
                    return Err(CoreError::parameter(format!("base multiplier c must be positive, got {c}")));
                }
                Ok(())
            }
            Schedule::TDog { horizon, delta, noiseless } => {
                if *horizon == 0 {
                    return Err(CoreError::parameter("tamed schedule needs a positive horizon".to_string()));
                }
                if !noiseless && !(*delta > 0.0 && *delta < 1.0) {
                    return Err(CoreError::parameter(format!("delta must lie in (0,1), got {delta}")));
                }
                Ok(())
            }
            Schedule::LDog { eps_denom } => {
                if !eps_denom.is_finite() || *eps_denom < 0.0 {
                    return Err(CoreError::parameter(format!("eps_denom must be nonnegative, got {eps_denom}")));
                }
                Ok(())
            }
            Schedule::ConstantSgd { eta } => {
                if !eta.is_finite() || *eta <= 0.0 {
                    return Err(CoreError::parameter(format!("constant step size must be positive, got {eta}")));
                }
                Ok(())
            }
            Schedule::CosineSgd { peak, horizon } => {
                if !peak.is_finite() || *peak <= 0.0 {
                    return Err(CoreError::parameter(format!("peak step size must be positive, got {peak}")));
                }
                if *horizon == 0 {
                    return Err(CoreError::parameter("cosine schedule needs a positive horizon".to_string()));
                }
                Ok(())
            }
            Schedule::AdaGradNorm { rho } => {
                if !rho.is_finite() || *rho <= 0.0 {
                    return Err(CoreError::parameter(format!("rho must be positive, got {rho}")));
                }
                Ok(())
            }
        }
    }

    /// Rules whose step size is the distance-over-gradients ratio.
    pub fn is_dog_family(&self) -> bool {
        matches!(
            self,
            Schedule::Dog | Schedule::ScaledDog { .. } | Schedule::TDog { .. } | Schedule::LDog { .. }
        )
    }

    pub fn name(&self) -> &'static str {
        match self {
            Schedule::Dog => "dog",
            Schedule::ScaledDog { .. } => "scaled_dog",
            Schedule::TDog { .. } => "tdog",
            Schedule::LDog { .. } => "ldog",
            Schedule::ConstantSgd { .. } => "constant_sgd",
            Schedule::CosineSgd { .. } => "cosine_sgd",
            Schedule::AdaGradNorm { .. } => "adagrad_norm",
        }
    }
}

/// `η_t = r̄_t / sqrt(G_t)`, with `G_t = 0` (all gradients so far zero)
/// pinned to `η_t = 0`: at a stationary start no movement is correct.
pub fn dog_eta(state: &RunState) -> f64 {
    let g = state.grad_sq_sum();
    if g == 0.0 {
        0.0
    } else {
        state.r_bar() / libm::sqrt(g)
    }
}

/// Time-uniform log factor `log(60 · log(6t) / delta)`.
pub fn theta(t: u64, delta: f64) -> Result<f64, CoreError> {
    if t == 0 {
        return Err(CoreError::parameter("theta requires t >= 1".to_string()));
    }
    if !(delta > 0.0 && delta < 1.0) && delta != 1.0 {
        return Err(CoreError::parameter(format!("delta must lie in (0,1), got {delta}")));
    }
    Ok(libm::log(60.0 * libm::log(6.0 * t as f64) / delta))
}

/// Inflated denominator for the tamed schedule at the state's current step:
///
/// `G'_t = 8⁴ · θ²_{T,δ} · log_+²(1 + t·L̄_t²/L̄_0²) · (G_{t-1} + 16·L̄_t²)`
///
/// with `G_{-1} = 0`. Nondecreasing in `t` and at least `G_t`. In noiseless
/// mode the θ factor is 1.
pub fn tdog_gprime(
    state: &RunState,
    horizon: u64,
    delta: f64,
    noiseless: bool,
) -> Result<f64, CoreError> {
    let lbar0 = state.lbar0();
    if lbar0 <= 0.0 {
        return Err(CoreError::parameter(
            "tamed schedule undefined with a zero initial gradient bound \
             (instance starts exactly stationary)"
                .to_string(),
        ));
    }
    let th = if noiseless { 1.0 } else { theta(horizon, delta)? };
    let t = state.step_count() as f64;
    let lbar = state.lbar();
    let log_term = log_plus(1.0 + t * (lbar / lbar0) * (lbar / lbar0));
    let gprime = 4096.0 * th * th * log_term * log_term
        * (state.prev_grad_sq_sum() + 16.0 * lbar * lbar);
    debug_assert!(
        gprime >= state.grad_sq_sum(),
        "G' = {gprime} fell below G = {}",
        state.grad_sq_sum()
    );
    Ok(gprime)
}

/// Step size of group `group_index` in a layer-wise run.
pub fn ldog_eta(groups: &GroupState, group_index: usize, eps_denom: f64) -> Result<f64, CoreError> {
    groups.group_eta(group_index, eps_denom)
}

/// Step size for the non-adaptive baselines.
pub fn baseline_eta(schedule: &Schedule, state: &RunState) -> Result<(f64, StepFlag), CoreError> {
    match schedule {
        Schedule::ConstantSgd { eta } => Ok((*eta, StepFlag::None)),
        Schedule::CosineSgd { peak, horizon } => {
            let t = state.step_count();
            if t > *horizon {
                // Past the horizon the annealed value stays at its endpoint.
                Ok((0.0, StepFlag::CosineClamped))
            } else {
                let phase = core::f64::consts::PI * t as f64 / *horizon as f64;
                Ok((peak * 0.5 * (1.0 + libm::cos(phase)), StepFlag::None))
            }
        }
        Schedule::AdaGradNorm { rho } => {
            let g = state.grad_sq_sum();
            let eta = if g == 0.0 { 0.0 } else { rho / libm::sqrt(g) };
            Ok((eta, StepFlag::None))
        }
        other => Err(CoreError::input(format!(
            "{} is not a baseline schedule",
            other.name()
        ))),
    }
}

/// Dispatch used by [`RunState::step`]: computes `η_t` for the current step
/// and records `G'_t` on the state.
pub(crate) fn step_size(
    state: &mut RunState,
    schedule: &Schedule,
) -> Result<(f64, StepFlag), CoreError> {
    schedule.validate()?;
    match schedule {
        Schedule::Dog => {
            state.set_grad_sq_sum_prime(state.grad_sq_sum());
            Ok((dog_eta(state), StepFlag::None))
        }
        Schedule::ScaledDog { c } => {
            state.set_grad_sq_sum_prime(state.grad_sq_sum());
            Ok((c * dog_eta(state), StepFlag::None))
        }
        Schedule::TDog { horizon, delta, noiseless } => {
            let gprime = tdog_gprime(state, *horizon, *delta, *noiseless)?;
            state.set_grad_sq_sum_prime(gprime);
            Ok((state.r_bar() / libm::sqrt(gprime), StepFlag::None))
        }
        Schedule::LDog { .. } => Err(CoreError::input(
            "layer-wise schedule runs on a grouped state".to_string(),
        )),
        _ => {
            state.set_grad_sq_sum_prime(state.grad_sq_sum());
            baseline_eta(schedule, state)
        }
    }
}
