//! Additive parameter decomposition with time-varying constraints.
//!
//! The trainable parameters are kept as two same-shaped groups,
//! `w = sigma + gamma`, never as a stored sum. Each mini-batch both groups
//! receive the shared data gradient (because `dw/dsigma = dw/dgamma = I`)
//! plus their own constraint gradient: sigma is pulled toward its
//! start-of-epoch snapshot with weight `beta1(t) = c1 * t`, gamma is pulled
//! toward zero with weight `beta2(t)` (power family `t^-c2` by default).
//! Both groups then take an SGD-with-momentum step.
//!
//! Note that with both groups active the sum `w` moves at twice the
//! per-group step size for a given data gradient, since each summand
//! absorbs the full gradient once. The update follows that literal form;
//! callers who want a standard-equivalent trajectory use
//! [`AblationMode::Standard`], which freezes gamma at zero.

use crate::error::{Error, Result};
use crate::mlp::ParamSet;
use crate::rng::SeededRng;
use std::fmt;

/// Which parts of the decomposition machinery are active, and which
/// parameters are used for prediction: the unconstrained modes evaluate
/// `w`, the gamma-constrained modes evaluate `sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AblationMode {
    /// No decomposition: plain SGD-with-momentum on `w`.
    Standard,
    /// Decomposition only, no constraints on either group.
    PdOnly,
    /// Constrain gamma's magnitude; sigma unconstrained.
    GammaOnly,
    /// Both constraints active.
    Full,
}

impl AblationMode {
    pub const ALL: [AblationMode; 4] = [
        AblationMode::Standard,
        AblationMode::PdOnly,
        AblationMode::GammaOnly,
        AblationMode::Full,
    ];

    /// Whether gamma exists as a trained group.
    pub fn decomposed(self) -> bool {
        self != AblationMode::Standard
    }

    pub fn sigma_constrained(self) -> bool {
        self == AblationMode::Full
    }

    pub fn gamma_constrained(self) -> bool {
        matches!(self, AblationMode::GammaOnly | AblationMode::Full)
    }

    /// Prediction uses sigma exactly when gamma is constrained.
    pub fn eval_with_sigma(self) -> bool {
        self.gamma_constrained()
    }
}

impl fmt::Display for AblationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AblationMode::Standard => "standard",
            AblationMode::PdOnly => "pd-only",
            AblationMode::GammaOnly => "gamma-only",
            AblationMode::Full => "full",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for AblationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(AblationMode::Standard),
            "pd-only" => Ok(AblationMode::PdOnly),
            "gamma-only" => Ok(AblationMode::GammaOnly),
            "full" => Ok(AblationMode::Full),
            other => Err(Error::Config(format!("unknown ablation mode `{other}`"))),
        }
    }
}

/// How gamma is initialized when decomposing `w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaInit {
    /// Gamma starts at zero, so sigma carries the whole init.
    Zeros,
    /// Gamma entries drawn i.i.d. normal with the given scale.
    Random { scale: f64 },
}

/// The two parameter groups plus the per-epoch sigma snapshot and the
/// momentum buffers. All five sets stay shape-identical.
#[derive(Debug, Clone)]
pub struct DecomposedParams {
    pub sigma: ParamSet,
    pub gamma: ParamSet,
    pub sigma_snapshot: ParamSet,
    pub vel_sigma: ParamSet,
    pub vel_gamma: ParamSet,
}

/// Split `w_init` into sigma and gamma so that `sigma + gamma` reproduces
/// it exactly; snapshot and velocities start as copies/zeros.
pub fn decompose(
    w_init: &ParamSet,
    init: GammaInit,
    rng: &mut SeededRng,
) -> Result<DecomposedParams> {
    let gamma = match init {
        GammaInit::Zeros => w_init.zeros_like(),
        GammaInit::Random { scale } => {
            if scale < 0.0 {
                return Err(Error::Config(format!(
                    "gamma init scale must be nonnegative, got {scale}"
                )));
            }
            let mut g = w_init.zeros_like();
            for layer in g.layers_mut() {
                for x in layer.weight.data_mut() {
                    *x = scale * rng.normal();
                }
                for x in layer.bias.data_mut() {
                    *x = scale * rng.normal();
                }
            }
            g
        }
    };
    let sigma = w_init.sub(&gamma)?;
    let sigma_snapshot = sigma.clone();
    let vel_sigma = w_init.zeros_like();
    let vel_gamma = w_init.zeros_like();
    Ok(DecomposedParams {
        sigma,
        gamma,
        sigma_snapshot,
        vel_sigma,
        vel_gamma,
    })
}

/// The effective parameters `w = sigma + gamma`, recomputed on demand.
pub fn effective_params(dp: &DecomposedParams) -> ParamSet {
    dp.sigma.add(&dp.gamma).expect("groups are shape-identical")
}

/// Freeze the current sigma as the epoch-boundary snapshot.
pub fn snapshot_epoch(dp: &mut DecomposedParams) {
    dp.sigma_snapshot = dp.sigma.clone();
}

/// The decreasing constraint-weight family for gamma. Every variant is
/// nonincreasing in the epoch index.
#[derive(Debug, Clone, PartialEq)]
pub enum Beta2Family {
    /// `t^-c2`.
    Power { c2: f64 },
    Constant {
        level: f64,
    },
    /// Linear ramp from `start` at t=1 to `end` at `end_epoch`, clamped
    /// afterwards.
    Linear {
        start: f64,
        end: f64,
        end_epoch: usize,
    },
    /// `factor^(t-1)`.
    Exponential { factor: f64 },
    /// `factor^floor((t-1)/interval)`.
    Step { factor: f64, interval: usize },
}

impl Beta2Family {
    pub fn name(&self) -> &'static str {
        match self {
            Beta2Family::Power { .. } => "power",
            Beta2Family::Constant { .. } => "constant",
            Beta2Family::Linear { .. } => "linear",
            Beta2Family::Exponential { .. } => "exponential",
            Beta2Family::Step { .. } => "step",
        }
    }
}

/// Constraint-weight schedules: `beta1(t) = c1 * t` (linear, increasing)
/// and a `beta2` family that is nonincreasing in `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleSpec {
    pub c1: f64,
    pub beta2: Beta2Family,
}

impl ScheduleSpec {
    pub fn power(c1: f64, c2: f64) -> ScheduleSpec {
        ScheduleSpec {
            c1,
            beta2: Beta2Family::Power { c2 },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.c1 < 0.0 || !self.c1.is_finite() {
            return Err(Error::Schedule(format!(
                "c1 must be a nonnegative finite scalar, got {}",
                self.c1
            )));
        }
        match &self.beta2 {
            Beta2Family::Power { c2 } => {
                if *c2 < 0.0 || !c2.is_finite() {
                    return Err(Error::Schedule(format!(
                        "power exponent c2 must be nonnegative, got {c2}"
                    )));
                }
            }
            Beta2Family::Constant { level } => {
                if *level < 0.0 || !level.is_finite() {
                    return Err(Error::Schedule(format!(
                        "constant level must be nonnegative, got {level}"
                    )));
                }
            }
            Beta2Family::Linear {
                start,
                end,
                end_epoch,
            } => {
                if end > start || *end < 0.0 {
                    return Err(Error::Schedule(format!(
                        "linear family must be nonincreasing: start {start}, end {end}"
                    )));
                }
                if *end_epoch < 1 {
                    return Err(Error::Schedule("linear end_epoch must be >= 1".into()));
                }
            }
            Beta2Family::Exponential { factor } => {
                if !(*factor > 0.0 && *factor <= 1.0) {
                    return Err(Error::Schedule(format!(
                        "exponential factor must be in (0, 1], got {factor}"
                    )));
                }
            }
            Beta2Family::Step { factor, interval } => {
                if !(*factor > 0.0 && *factor <= 1.0) {
                    return Err(Error::Schedule(format!(
                        "step factor must be in (0, 1], got {factor}"
                    )));
                }
                if *interval == 0 {
                    return Err(Error::Schedule("step interval must be >= 1".into()));
                }
            }
        }
        Ok(())
    }
}

fn check_epoch(t: usize) -> Result<()> {
    if t < 1 {
        return Err(Error::Schedule(format!(
            "schedules are defined for epochs t >= 1, got {t}"
        )));
    }
    Ok(())
}

/// The increasing sigma constraint weight, `c1 * t`.
pub fn beta1(t: usize, spec: &ScheduleSpec) -> Result<f64> {
    check_epoch(t)?;
    Ok(spec.c1 * t as f64)
}

/// The decreasing gamma constraint weight for the configured family.
pub fn beta2(t: usize, spec: &ScheduleSpec) -> Result<f64> {
    check_epoch(t)?;
    let t_f = t as f64;
    Ok(match &spec.beta2 {
        Beta2Family::Power { c2 } => t_f.powf(-c2),
        Beta2Family::Constant { level } => *level,
        Beta2Family::Linear {
            start,
            end,
            end_epoch,
        } => {
            if *end_epoch <= 1 || t >= *end_epoch {
                *end
            } else {
                let frac = (t - 1) as f64 / (*end_epoch - 1) as f64;
                start + (end - start) * frac
            }
        }
        Beta2Family::Exponential { factor } => factor.powi(t as i32 - 1),
        Beta2Family::Step { factor, interval } => factor.powi(((t - 1) / interval) as i32),
    })
}

/// Effective constraint weights after mode gating: a disabled constraint
/// contributes weight zero.
pub fn effective_betas(t: usize, spec: &ScheduleSpec, mode: AblationMode) -> Result<(f64, f64)> {
    let b1 = if mode.sigma_constrained() {
        beta1(t, spec)?
    } else {
        check_epoch(t)?;
        0.0
    };
    let b2 = if mode.gamma_constrained() {
        beta2(t, spec)?
    } else {
        0.0
    };
    Ok((b1, b2))
}

/// Optimizer settings for both groups: SGD with momentum, per-group weight
/// decay, and multiplicative step decay of the learning rate.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub lr_decay_epochs: Vec<usize>,
    pub lr_decay_factor: f64,
    pub norm_epsilon: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            learning_rate: 0.01,
            momentum: 0.9,
            weight_decay: 0.001,
            lr_decay_epochs: vec![],
            lr_decay_factor: 0.1,
            norm_epsilon: 1e-12,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let lr_ok = self.learning_rate.is_finite() && self.learning_rate > 0.0;
        if !lr_ok {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::Config(format!(
                "weight decay must be nonnegative, got {}",
                self.weight_decay
            )));
        }
        if !(self.lr_decay_factor > 0.0 && self.lr_decay_factor <= 1.0) {
            return Err(Error::Config(format!(
                "lr decay factor must be in (0, 1], got {}",
                self.lr_decay_factor
            )));
        }
        if self.lr_decay_epochs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "lr decay epochs must be strictly increasing".into(),
            ));
        }
        let eps_ok = self.norm_epsilon.is_finite() && self.norm_epsilon > 0.0;
        if !eps_ok {
            return Err(Error::Config("norm epsilon must be positive".into()));
        }
        Ok(())
    }

    /// Learning rate for epoch `t`: the base rate times one decay factor
    /// per configured epoch that has been reached.
    pub fn lr_at(&self, t: usize) -> f64 {
        let mut lr = self.learning_rate;
        for &d in &self.lr_decay_epochs {
            if t >= d {
                lr *= self.lr_decay_factor;
            }
        }
        lr
    }
}

/// Gradient of `beta1_value * ||sigma - sigma_snapshot||` with respect to
/// sigma, over the globally flattened vector. At the nondifferentiable
/// point (norm <= eps) the zero subgradient is used.
pub fn reg_grad_sigma(dp: &DecomposedParams, beta1_value: f64, eps: f64) -> ParamSet {
    let v = dp
        .sigma
        .sub(&dp.sigma_snapshot)
        .expect("groups are shape-identical");
    unit_scaled(v, beta1_value, eps)
}

/// Gradient of `beta2_value * ||gamma||` with respect to gamma; zero
/// subgradient at gamma = 0.
pub fn reg_grad_gamma(dp: &DecomposedParams, beta2_value: f64, eps: f64) -> ParamSet {
    unit_scaled(dp.gamma.clone(), beta2_value, eps)
}

fn unit_scaled(mut v: ParamSet, weight: f64, eps: f64) -> ParamSet {
    let r = v.l2_norm();
    if r <= eps {
        return v.zeros_like();
    }
    v.scale(weight / r);
    v
}

fn momentum_update(params: &mut ParamSet, vel: &mut ParamSet, grad: &ParamSet, momentum: f64, lr: f64) {
    for ((p_layer, v_layer), g_layer) in params
        .layers_mut()
        .iter_mut()
        .zip(vel.layers_mut())
        .zip(grad.layers())
    {
        for ((p, v), &g) in p_layer
            .weight
            .data_mut()
            .iter_mut()
            .zip(v_layer.weight.data_mut())
            .zip(g_layer.weight.data())
        {
            *v = momentum * *v + g;
            *p -= lr * *v;
        }
        for ((p, v), &g) in p_layer
            .bias
            .data_mut()
            .iter_mut()
            .zip(v_layer.bias.data_mut())
            .zip(g_layer.bias.data())
        {
            *v = momentum * *v + g;
            *p -= lr * *v;
        }
    }
}

/// One mini-batch update of both groups. `data_grad` is the gradient of
/// the data loss at `w = sigma + gamma`; both groups receive it in full,
/// plus their own constraint gradient (subject to `mode`) and per-group
/// weight decay. Constraint weights are functions of the epoch index `t`
/// only, so they are constant across an epoch's mini-batches.
pub fn step(
    dp: &mut DecomposedParams,
    data_grad: &ParamSet,
    t: usize,
    cfg: &OptimizerConfig,
    sched: &ScheduleSpec,
    mode: AblationMode,
) -> Result<()> {
    if !dp.sigma.shape_matches(data_grad) {
        return Err(Error::dim_mismatch(
            "optimizer step",
            &[dp.sigma.num_params()],
            &[data_grad.num_params()],
        ));
    }
    let (b1, b2) = effective_betas(t, sched, mode)?;
    let lr = cfg.lr_at(t);

    let mut g_sigma = data_grad.clone();
    if b1 > 0.0 {
        g_sigma.add_assign(&reg_grad_sigma(dp, b1, cfg.norm_epsilon))?;
    }
    if cfg.weight_decay > 0.0 {
        g_sigma.add_scaled(&dp.sigma, cfg.weight_decay)?;
    }
    momentum_update(&mut dp.sigma, &mut dp.vel_sigma, &g_sigma, cfg.momentum, lr);

    if mode.decomposed() {
        let mut g_gamma = data_grad.clone();
        if b2 > 0.0 {
            g_gamma.add_assign(&reg_grad_gamma(dp, b2, cfg.norm_epsilon))?;
        }
        if cfg.weight_decay > 0.0 {
            g_gamma.add_scaled(&dp.gamma, cfg.weight_decay)?;
        }
        momentum_update(&mut dp.gamma, &mut dp.vel_gamma, &g_gamma, cfg.momentum, lr);
    }
    Ok(())
}
