//! Continuous-time models of the two methods, each on an intrinsic clock `s`
//! and a rescaled clock `t`, with a fixed-step RK4 integrator.
//!
//! States are flattened for integration as `[x, z, θ]` (Nesterov models) and
//! `[x, y, ζ, η, φ, ψ, θ]` (primal-dual models); `θ` is always last.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::saddle::{SaddleProblem, Vector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Clock {
    Intrinsic,
    Rescaled,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelId {
    NagIntrinsic,
    NagRescaled,
    IcpdpsIntrinsic,
    IcpdpsRescaled,
}

impl ModelId {
    pub const ALL: [ModelId; 4] = [
        ModelId::NagIntrinsic,
        ModelId::NagRescaled,
        ModelId::IcpdpsIntrinsic,
        ModelId::IcpdpsRescaled,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelId::NagIntrinsic => "nag-intrinsic",
            ModelId::NagRescaled => "nag-rescaled",
            ModelId::IcpdpsIntrinsic => "icpdps-intrinsic",
            ModelId::IcpdpsRescaled => "icpdps-rescaled",
        }
    }

    pub fn clock(&self) -> Clock {
        match self {
            ModelId::NagIntrinsic | ModelId::IcpdpsIntrinsic => Clock::Intrinsic,
            ModelId::NagRescaled | ModelId::IcpdpsRescaled => Clock::Rescaled,
        }
    }

    pub fn is_nag(&self) -> bool {
        matches!(self, ModelId::NagIntrinsic | ModelId::NagRescaled)
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelId::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                Error::config(
                    "model",
                    format!(
                        "unknown model `{s}` (known: {})",
                        ModelId::ALL.map(|m| m.as_str()).join(", ")
                    ),
                )
            })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NagOdeState {
    pub x: Vector,
    pub z: Vector,
    pub theta: f64,
    pub clock: Clock,
    pub time: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NagDerivative {
    pub x: Vector,
    pub z: Vector,
    pub theta: f64,
}

fn positive_theta(theta: f64, time: f64) -> Result<()> {
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(Error::OdeDomain {
            time,
            reason: format!("theta = {theta} must be positive"),
        });
    }
    Ok(())
}

/// `x̃' = (z̃ - x̃)/θ̃`, `z̃' = -θ̃∇G(x̃)`, `θ̃' = 1/2`.
pub fn nag_intrinsic_rhs(problem: &SaddleProblem, state: &NagOdeState) -> Result<NagDerivative> {
    positive_theta(state.theta, state.time)?;
    Ok(NagDerivative {
        x: (&state.z - &state.x) / state.theta,
        z: problem.g.gradient(&state.x)? * (-state.theta),
        theta: 0.5,
    })
}

/// `x' = z - x`, `z' = -θ²∇G(x)`, `θ' = θ/2`.
pub fn nag_rescaled_rhs(problem: &SaddleProblem, state: &NagOdeState) -> Result<NagDerivative> {
    positive_theta(state.theta, state.time)?;
    Ok(NagDerivative {
        x: &state.z - &state.x,
        z: problem.g.gradient(&state.x)? * (-state.theta * state.theta),
        theta: 0.5 * state.theta,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct IcpdpsOdeState {
    pub x: Vector,
    pub y: Vector,
    pub zeta: Vector,
    pub eta: Vector,
    pub phi: f64,
    pub psi: f64,
    pub theta: f64,
    pub clock: Clock,
    pub time: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IcpdpsDerivative {
    pub x: Vector,
    pub y: Vector,
    pub zeta: Vector,
    pub eta: Vector,
    pub phi: f64,
    pub psi: f64,
    pub theta: f64,
}

/// Factors `≤ 1` on `φ', ψ', θ'` of the rescaled model (all 1 by default).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Relaxation {
    pub phi: f64,
    pub psi: f64,
    pub theta: f64,
}

impl Default for Relaxation {
    fn default() -> Self {
        Relaxation {
            phi: 1.0,
            psi: 1.0,
            theta: 1.0,
        }
    }
}

impl Relaxation {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("relax_phi", self.phi), ("relax_psi", self.psi), ("relax_theta", self.theta)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::config(name, format!("must lie in (0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

fn check_weights(state: &IcpdpsOdeState) -> Result<()> {
    for (name, v) in [("phi", state.phi), ("psi", state.psi), ("theta", state.theta)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::OdeDomain {
                time: state.time,
                reason: format!("{name} = {v} must be positive"),
            });
        }
    }
    Ok(())
}

/// The two bracketed forces `γ(x - ζ) - ∇G(x) - Kᵀη` and
/// `ρ(y - η) - ∇F*(y) + Kζ`.
fn forces(problem: &SaddleProblem, state: &IcpdpsOdeState, gamma: f64, rho: f64) -> Result<(Vector, Vector)> {
    let fx = (&state.x - &state.zeta) * gamma
        - problem.g.gradient(&state.x)?
        - problem.k.adjoint_apply(&state.eta)?;
    let fy = (&state.y - &state.eta) * rho - problem.f_star.gradient(&state.y)? + problem.k.apply(&state.zeta)?;
    Ok((fx, fy))
}

pub fn icpdps_rescaled_rhs(
    problem: &SaddleProblem,
    state: &IcpdpsOdeState,
    gamma: f64,
    rho: f64,
) -> Result<IcpdpsDerivative> {
    icpdps_rescaled_rhs_relaxed(problem, state, gamma, rho, Relaxation::default())
}

/// `x' = ζ - x`, `y' = η - y`, `ζ' = (θ/φ)[…]`, `η' = (θ/ψ)[…]`,
/// `φ' = 2γθ`, `ψ' = 2ρθ`, `θ' = θ`, the last three scaled by `relax`.
pub fn icpdps_rescaled_rhs_relaxed(
    problem: &SaddleProblem,
    state: &IcpdpsOdeState,
    gamma: f64,
    rho: f64,
    relax: Relaxation,
) -> Result<IcpdpsDerivative> {
    check_weights(state)?;
    let (fx, fy) = forces(problem, state, gamma, rho)?;
    Ok(IcpdpsDerivative {
        x: &state.zeta - &state.x,
        y: &state.eta - &state.y,
        zeta: fx * (state.theta / state.phi),
        eta: fy * (state.theta / state.psi),
        phi: relax.phi * 2.0 * gamma * state.theta,
        psi: relax.psi * 2.0 * rho * state.theta,
        theta: relax.theta * state.theta,
    })
}

/// With `r = √(φ̃ψ̃)`: `x̃' = (r/θ̃)(ζ̃ - x̃)`, `ζ̃' = √(ψ̃/φ̃)[…]`,
/// `η̃' = √(φ̃/ψ̃)[…]`, `φ̃' = 2γr`, `ψ̃' = 2ρr`, `θ̃' = r`.
pub fn icpdps_intrinsic_rhs(
    problem: &SaddleProblem,
    state: &IcpdpsOdeState,
    gamma: f64,
    rho: f64,
) -> Result<IcpdpsDerivative> {
    check_weights(state)?;
    let (fx, fy) = forces(problem, state, gamma, rho)?;
    let r = (state.phi * state.psi).sqrt();
    let ratio = (state.psi / state.phi).sqrt();
    Ok(IcpdpsDerivative {
        x: (&state.zeta - &state.x) * (r / state.theta),
        y: (&state.eta - &state.y) * (r / state.theta),
        zeta: fx * ratio,
        eta: fy / ratio,
        phi: 2.0 * gamma * r,
        psi: 2.0 * rho * r,
        theta: r,
    })
}

/// A system `u' = f(time, u)` on flat state vectors.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn eval(&self, time: f64, state: &[f64], out: &mut [f64]) -> Result<()>;
}

/// One of the two Nesterov models bound to a problem.
pub struct NagModel<'a> {
    pub problem: &'a SaddleProblem,
    pub clock: Clock,
}

impl NagModel<'_> {
    pub fn pack(state: &NagOdeState) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * state.x.len() + 1);
        out.extend(state.x.iter());
        out.extend(state.z.iter());
        out.push(state.theta);
        out
    }

    pub fn unpack(&self, time: f64, flat: &[f64]) -> NagOdeState {
        let n = self.problem.primal_dim();
        NagOdeState {
            x: Vector::from_column_slice(&flat[..n]),
            z: Vector::from_column_slice(&flat[n..2 * n]),
            theta: flat[2 * n],
            clock: self.clock,
            time,
        }
    }
}

impl OdeSystem for NagModel<'_> {
    fn dim(&self) -> usize {
        2 * self.problem.primal_dim() + 1
    }

    fn eval(&self, time: f64, state: &[f64], out: &mut [f64]) -> Result<()> {
        let s = self.unpack(time, state);
        let d = match self.clock {
            Clock::Intrinsic => nag_intrinsic_rhs(self.problem, &s)?,
            Clock::Rescaled => nag_rescaled_rhs(self.problem, &s)?,
        };
        let n = d.x.len();
        out[..n].copy_from_slice(d.x.as_slice());
        out[n..2 * n].copy_from_slice(d.z.as_slice());
        out[2 * n] = d.theta;
        Ok(())
    }
}

/// One of the two primal-dual models bound to a problem.
pub struct IcpdpsModel<'a> {
    pub problem: &'a SaddleProblem,
    pub clock: Clock,
    pub gamma: f64,
    pub rho: f64,
    /// Used by the rescaled clock only.
    pub relaxation: Relaxation,
}

impl<'a> IcpdpsModel<'a> {
    pub fn new(problem: &'a SaddleProblem, clock: Clock, gamma: f64, rho: f64) -> Self {
        IcpdpsModel {
            problem,
            clock,
            gamma,
            rho,
            relaxation: Relaxation::default(),
        }
    }

    pub fn pack(state: &IcpdpsOdeState) -> Vec<f64> {
        let mut out = Vec::new();
        for v in [&state.x, &state.y, &state.zeta, &state.eta] {
            out.extend(v.iter());
        }
        out.extend([state.phi, state.psi, state.theta]);
        out
    }

    pub fn unpack(&self, time: f64, flat: &[f64]) -> IcpdpsOdeState {
        let (n, m) = (self.problem.primal_dim(), self.problem.dual_dim());
        let base = 2 * (n + m);
        IcpdpsOdeState {
            x: Vector::from_column_slice(&flat[..n]),
            y: Vector::from_column_slice(&flat[n..n + m]),
            zeta: Vector::from_column_slice(&flat[n + m..2 * n + m]),
            eta: Vector::from_column_slice(&flat[2 * n + m..base]),
            phi: flat[base],
            psi: flat[base + 1],
            theta: flat[base + 2],
            clock: self.clock,
            time,
        }
    }

    /// `ζ(0) = x(0)`, `η(0) = y(0)` (so `u'(0) = 0`).
    pub fn initial_state(&self, x0: Vector, y0: Vector, phi0: f64, psi0: f64, theta0: f64) -> IcpdpsOdeState {
        IcpdpsOdeState {
            zeta: x0.clone(),
            eta: y0.clone(),
            x: x0,
            y: y0,
            phi: phi0,
            psi: psi0,
            theta: theta0,
            clock: self.clock,
            time: 0.0,
        }
    }
}

impl OdeSystem for IcpdpsModel<'_> {
    fn dim(&self) -> usize {
        2 * (self.problem.primal_dim() + self.problem.dual_dim()) + 3
    }

    fn eval(&self, time: f64, state: &[f64], out: &mut [f64]) -> Result<()> {
        let s = self.unpack(time, state);
        let d = match self.clock {
            Clock::Intrinsic => icpdps_intrinsic_rhs(self.problem, &s, self.gamma, self.rho)?,
            Clock::Rescaled => {
                icpdps_rescaled_rhs_relaxed(self.problem, &s, self.gamma, self.rho, self.relaxation)?
            }
        };
        let mut k = 0;
        for v in [&d.x, &d.y, &d.zeta, &d.eta] {
            out[k..k + v.len()].copy_from_slice(v.as_slice());
            k += v.len();
        }
        out[k] = d.phi;
        out[k + 1] = d.psi;
        out[k + 2] = d.theta;
        Ok(())
    }
}

/// A plain closure system, mostly for tests.
pub struct FnSystem<F> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(f64, &[f64], &mut [f64])> OdeSystem for FnSystem<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, time: f64, state: &[f64], out: &mut [f64]) -> Result<()> {
        (self.f)(time, state, out);
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrajectoryMeta {
    pub problem: String,
    pub model: String,
    /// Integration step, or the discrete time increment scale.
    pub step: f64,
}

/// Time-stamped flat states with strictly increasing times.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub meta: TrajectoryMeta,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn new(meta: TrajectoryMeta, times: Vec<f64>, states: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() != states.len() || times.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "{} times for {} states",
                times.len(),
                states.len()
            )));
        }
        if let Some(w) = times.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(Error::Domain(format!(
                "trajectory times must increase strictly ({} then {})",
                w[0], w[1]
            )));
        }
        let d = states[0].len();
        if states.iter().any(|s| s.len() != d) {
            return Err(Error::DimensionMismatch("ragged trajectory states".into()));
        }
        Ok(Trajectory { meta, times, states })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().expect("nonempty")
    }

    pub fn component(&self, k: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[k]).collect()
    }

    /// Linear interpolation; `None` outside `[start, end]`.
    pub fn interpolate(&self, time: f64) -> Option<Vec<f64>> {
        if !(time >= self.start() && time <= self.end()) {
            return None;
        }
        let hi = self.times.partition_point(|t| *t < time);
        if hi == 0 || self.times[hi] == time {
            return Some(self.states[hi].clone());
        }
        let lo = hi - 1;
        let w = (time - self.times[lo]) / (self.times[hi] - self.times[lo]);
        Some(
            self.states[lo]
                .iter()
                .zip(&self.states[hi])
                .map(|(a, b)| a + w * (b - a))
                .collect(),
        )
    }
}

/// Classical RK4 from `t0` to `t_end` with step `h`. Node `k` sits at
/// `t0 + k·h`; the last step is shortened to land on `t_end`.
pub fn integrate<S: OdeSystem + ?Sized>(
    system: &S,
    t0: f64,
    state0: Vec<f64>,
    t_end: f64,
    h: f64,
    meta: TrajectoryMeta,
) -> Result<Trajectory> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Domain(format!("step must be positive, got {h}")));
    }
    if !(t_end > t0) {
        return Err(Error::Domain(format!("end time {t_end} must exceed start {t0}")));
    }
    let dim = system.dim();
    if state0.len() != dim {
        return Err(Error::DimensionMismatch(format!(
            "system has dimension {dim}, initial state {}",
            state0.len()
        )));
    }
    let steps = ((t_end - t0) / h - 1e-9).ceil().max(1.0) as usize;
    let node = |k: usize| if k == steps { t_end } else { t0 + k as f64 * h };

    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(t0);
    states.push(state0);

    let mut k1 = vec![0.0; dim];
    let mut k2 = vec![0.0; dim];
    let mut k3 = vec![0.0; dim];
    let mut k4 = vec![0.0; dim];
    let mut tmp = vec![0.0; dim];
    for k in 0..steps {
        let t = node(k);
        let dt = node(k + 1) - t;
        let u = states.last().expect("nonempty");
        system.eval(t, u, &mut k1)?;
        for j in 0..dim {
            tmp[j] = u[j] + 0.5 * dt * k1[j];
        }
        system.eval(t + 0.5 * dt, &tmp, &mut k2)?;
        for j in 0..dim {
            tmp[j] = u[j] + 0.5 * dt * k2[j];
        }
        system.eval(t + 0.5 * dt, &tmp, &mut k3)?;
        for j in 0..dim {
            tmp[j] = u[j] + dt * k3[j];
        }
        system.eval(t + dt, &tmp, &mut k4)?;
        let next: Vec<f64> = (0..dim)
            .map(|j| u[j] + dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]))
            .collect();
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::OdeDomain {
                time: node(k + 1),
                reason: "state became non-finite".into(),
            });
        }
        times.push(node(k + 1));
        states.push(next);
    }
    Trajectory::new(meta, times, states)
}

/// `t(s) = ln θ̃(s) - ln θ̃(0)` for each node of an intrinsic primal-dual
/// trajectory.
pub fn time_transform_icpdps(intrinsic: &Trajectory) -> Vec<f64> {
    let last = intrinsic.dim() - 1;
    let theta0 = intrinsic.states[0][last];
    intrinsic
        .states
        .iter()
        .map(|s| (s[last] / theta0).ln())
        .collect()
}

/// `t = 2 ln(1 + s/(2θ(0)))`.
pub fn nag_time_from_intrinsic(s: f64, theta0: f64) -> f64 {
    2.0 * (0.5 * s / theta0).ln_1p()
}

/// Inverse of [`nag_time_from_intrinsic`].
pub fn nag_intrinsic_from_time(t: f64, theta0: f64) -> f64 {
    2.0 * theta0 * (0.5 * t).exp_m1()
}

/// `√(φ₀ψ₀/3)s + (γψ₀ + ρφ₀)s²/6 + θ₀ exp(2s√(γρ/3))`.
pub fn theta_lower_bound(s: f64, phi0: f64, psi0: f64, theta0: f64, gamma: f64, rho: f64) -> f64 {
    (phi0 * psi0 / 3.0).sqrt() * s
        + (gamma * psi0 + rho * phi0) / 6.0 * s * s
        + theta0 * (2.0 * s * (gamma * rho / 3.0).sqrt()).exp()
}

/// Rescaled-clock parameters `(φ, ψ, θ)` at time `t`:
/// `θ = θ₀eᵗ`, `φ = φ₀ + 2γθ₀(eᵗ - 1)`, `ψ = ψ₀ + 2ρθ₀(eᵗ - 1)`.
pub fn rescaled_params_closed_form(t: f64, phi0: f64, psi0: f64, theta0: f64, gamma: f64, rho: f64) -> (f64, f64, f64) {
    let grow = t.exp_m1();
    (
        phi0 + 2.0 * gamma * theta0 * grow,
        psi0 + 2.0 * rho * theta0 * grow,
        theta0 * t.exp(),
    )
}

/// Intrinsic-clock parameters when `γρ = 0`, where `θ̃` is the quadratic
/// `θ₀ + √(φ₀ψ₀)s + (γψ₀ + ρφ₀)s²/2` (affine when `γ = ρ = 0`).
pub fn intrinsic_params_closed_form(
    s: f64,
    phi0: f64,
    psi0: f64,
    theta0: f64,
    gamma: f64,
    rho: f64,
) -> Option<(f64, f64, f64)> {
    if gamma * rho != 0.0 {
        return None;
    }
    let grown = (phi0 * psi0).sqrt() * s + 0.5 * (gamma * psi0 + rho * phi0) * s * s;
    Some((phi0 + 2.0 * gamma * grown, psi0 + 2.0 * rho * grown, theta0 + grown))
}

/// Interior nodes `k` whose neighbours are both one step `h` away.
fn uniform_interior(traj: &Trajectory) -> impl Iterator<Item = (usize, f64)> + '_ {
    let h = traj.meta.step;
    (1..traj.len().saturating_sub(1)).filter_map(move |k| {
        let (a, b) = (traj.times[k] - traj.times[k - 1], traj.times[k + 1] - traj.times[k]);
        ((a - h).abs() <= 1e-9 * h && (b - h).abs() <= 1e-9 * h).then_some((k, h))
    })
}

fn central(traj: &Trajectory, k: usize, h: f64, range: std::ops::Range<usize>) -> (Vector, Vector, Vector) {
    let at = |j: usize| Vector::from_column_slice(&traj.states[j][range.clone()]);
    let (prev, here, next) = (at(k - 1), at(k), at(k + 1));
    let first = (&next - &prev) / (2.0 * h);
    let second = (&next - &here * 2.0 + &prev) / (h * h);
    (here, first, second)
}

/// Largest `‖x̃'' + 3/(2θ̃)x̃' + ∇G(x̃)‖` over interior nodes of an intrinsic
/// Nesterov trajectory, with central differences.
pub fn nag_intrinsic_second_order_residual(problem: &SaddleProblem, traj: &Trajectory) -> Result<f64> {
    let n = problem.primal_dim();
    let mut worst = 0.0_f64;
    for (k, h) in uniform_interior(traj) {
        let (x, d1, d2) = central(traj, k, h, 0..n);
        let theta = traj.states[k][2 * n];
        let r = d2 + d1 * (1.5 / theta) + problem.g.gradient(&x)?;
        worst = worst.max(r.norm());
    }
    Ok(worst)
}

/// Largest `‖x'' + x' + θ²∇G(x)‖` over interior nodes of a rescaled Nesterov
/// trajectory.
pub fn nag_rescaled_second_order_residual(problem: &SaddleProblem, traj: &Trajectory) -> Result<f64> {
    let n = problem.primal_dim();
    let mut worst = 0.0_f64;
    for (k, h) in uniform_interior(traj) {
        let (x, d1, d2) = central(traj, k, h, 0..n);
        let theta = traj.states[k][2 * n];
        let r = d2 + d1 + problem.g.gradient(&x)? * (theta * theta);
        worst = worst.max(r.norm());
    }
    Ok(worst)
}

/// Largest residual of the eliminated second-order form of the rescaled
/// primal-dual model,
/// `(φ/θ)x'' + (γ + φ/θ)x' + ∇G(x) + Kᵀ(y + y')` and
/// `(ψ/θ)y'' + (ρ + ψ/θ)y' + ∇F*(y) - K(x + x')`.
pub fn icpdps_rescaled_second_order_residual(
    problem: &SaddleProblem,
    traj: &Trajectory,
    gamma: f64,
    rho: f64,
) -> Result<f64> {
    let (n, m) = (problem.primal_dim(), problem.dual_dim());
    let base = 2 * (n + m);
    let mut worst = 0.0_f64;
    for (k, h) in uniform_interior(traj) {
        let (x, dx, ddx) = central(traj, k, h, 0..n);
        let (y, dy, ddy) = central(traj, k, h, n..n + m);
        let s = &traj.states[k];
        let (pt, qt) = (s[base] / s[base + 2], s[base + 1] / s[base + 2]);
        let rx = &ddx * pt + &dx * (gamma + pt) + problem.g.gradient(&x)? + problem.k.adjoint_apply(&(&y + &dy))?;
        let ry = &ddy * qt + &dy * (rho + qt) + problem.f_star.gradient(&y)? - problem.k.apply(&(&x + &dx))?;
        worst = worst.max(rx.norm()).max(ry.norm());
    }
    Ok(worst)
}

/// Largest `‖z - u - u'‖` over interior nodes of a rescaled primal-dual
/// trajectory, with `u' ` by central differences.
pub fn velocity_identity_residual(problem: &SaddleProblem, traj: &Trajectory) -> f64 {
    let (n, m) = (problem.primal_dim(), problem.dual_dim());
    let mut worst = 0.0_f64;
    for (k, h) in uniform_interior(traj) {
        let (u, du, _) = central(traj, k, h, 0..n + m);
        let z = Vector::from_column_slice(&traj.states[k][n + m..2 * (n + m)]);
        worst = worst.max((z - u - du).norm());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::saddle::quadratic1d;
    use approx::assert_relative_eq;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn meta(step: f64) -> TrajectoryMeta {
        TrajectoryMeta {
            problem: "test".into(),
            model: "test".into(),
            step,
        }
    }

    fn ones_state(clock: Clock) -> IcpdpsOdeState {
        IcpdpsOdeState {
            x: v(&[1.0]),
            y: v(&[1.0]),
            zeta: v(&[1.0]),
            eta: v(&[1.0]),
            phi: 1.0,
            psi: 1.0,
            theta: 1.0,
            clock,
            time: 0.0,
        }
    }

    #[test]
    fn nag_rhs_examples() {
        let p = quadratic1d().unwrap();
        let s = NagOdeState { x: v(&[1.0]), z: v(&[1.0]), theta: 1.0, clock: Clock::Intrinsic, time: 0.0 };
        let d = nag_intrinsic_rhs(&p, &s).unwrap();
        assert_eq!((d.x[0], d.z[0], d.theta), (0.0, -1.0, 0.5));
        let d = nag_rescaled_rhs(&p, &NagOdeState { clock: Clock::Rescaled, ..s.clone() }).unwrap();
        assert_eq!((d.x[0], d.z[0], d.theta), (0.0, -1.0, 0.5));
        let zero = NagOdeState { x: v(&[0.0]), z: v(&[0.0]), ..s.clone() };
        let d = nag_intrinsic_rhs(&p, &zero).unwrap();
        assert_eq!((d.x[0], d.z[0], d.theta), (0.0, 0.0, 0.5));
        assert!(matches!(
            nag_intrinsic_rhs(&p, &NagOdeState { theta: 0.0, ..s }),
            Err(Error::OdeDomain { .. })
        ));
    }

    #[test]
    fn icpdps_rhs_examples() {
        let p = quadratic1d().unwrap();
        let d = icpdps_rescaled_rhs(&p, &ones_state(Clock::Rescaled), 1.0, 1.0).unwrap();
        assert_eq!((d.x[0], d.y[0], d.zeta[0], d.eta[0]), (0.0, 0.0, -2.0, 0.0));
        assert_eq!((d.phi, d.psi, d.theta), (2.0, 2.0, 1.0));
        let d = icpdps_intrinsic_rhs(&p, &ones_state(Clock::Intrinsic), 1.0, 1.0).unwrap();
        assert_eq!((d.zeta[0], d.eta[0], d.theta), (-2.0, 0.0, 1.0));

        let mut at_saddle = ones_state(Clock::Rescaled);
        for v in [&mut at_saddle.x, &mut at_saddle.y, &mut at_saddle.zeta, &mut at_saddle.eta] {
            v[0] = 0.0;
        }
        let d = icpdps_rescaled_rhs(&p, &at_saddle, 1.0, 1.0).unwrap();
        assert_eq!((d.x[0], d.y[0], d.zeta[0], d.eta[0]), (0.0, 0.0, 0.0, 0.0));
        assert!(d.theta > 0.0 && d.phi > 0.0);
        let d = icpdps_intrinsic_rhs(&p, &at_saddle, 1.0, 1.0).unwrap();
        assert_eq!((d.x[0], d.y[0], d.zeta[0], d.eta[0]), (0.0, 0.0, 0.0, 0.0));

        let bad = IcpdpsOdeState { phi: -1.0, ..ones_state(Clock::Rescaled) };
        assert!(matches!(icpdps_rescaled_rhs(&p, &bad, 1.0, 1.0), Err(Error::OdeDomain { .. })));
    }

    #[test]
    fn model_ids_round_trip() {
        for m in ModelId::ALL {
            assert_eq!(m.as_str().parse::<ModelId>().unwrap(), m);
        }
        assert!("icpdps".parse::<ModelId>().is_err());
    }

    #[test]
    fn exponential_benchmark() {
        let sys = FnSystem { dim: 1, f: |_t: f64, u: &[f64], out: &mut [f64]| out[0] = u[0] };
        let traj = integrate(&sys, 0.0, vec![1.0], 1.0, 1e-3, meta(1e-3)).unwrap();
        assert_eq!(traj.len(), 1001);
        assert_eq!(traj.end(), 1.0);
        assert!((traj.states.last().unwrap()[0] - 1f64.exp()).abs() < 1e-11);
        let err = |h: f64| {
            let t = integrate(&sys, 0.0, vec![1.0], 1.0, h, meta(h)).unwrap();
            (t.states.last().unwrap()[0] - 1f64.exp()).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn node_count_and_short_last_step() {
        let sys = FnSystem { dim: 1, f: |_t: f64, _u: &[f64], out: &mut [f64]| out[0] = 0.0 };
        let traj = integrate(&sys, 0.0, vec![3.0], 20.0, 1e-3, meta(1e-3)).unwrap();
        assert_eq!(traj.len(), 20_001);
        assert!(traj.states.iter().all(|s| s[0] == 3.0));
        let traj = integrate(&sys, 0.0, vec![3.0], 1.05, 0.1, meta(0.1)).unwrap();
        assert_eq!(traj.len(), 12);
        assert_eq!(traj.end(), 1.05);
        assert!(integrate(&sys, 0.0, vec![3.0], 0.0, 0.1, meta(0.1)).is_err());
        assert!(integrate(&sys, 0.0, vec![3.0], 1.0, -0.1, meta(0.1)).is_err());
    }

    #[test]
    fn domain_errors_carry_time() {
        let p = quadratic1d().unwrap();
        // θ̃' = 1/2 backwards is not available, so force θ negative by a
        // negative start.
        let model = NagModel { problem: &p, clock: Clock::Intrinsic };
        let s0 = NagModel::pack(&NagOdeState { x: v(&[1.0]), z: v(&[1.0]), theta: -1.0, clock: Clock::Intrinsic, time: 0.0 });
        match integrate(&model, 0.0, s0, 1.0, 0.1, meta(0.1)) {
            Err(Error::OdeDomain { time, .. }) => assert_eq!(time, 0.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn interpolation() {
        let t = Trajectory::new(meta(1.0), vec![0.0, 1.0, 3.0], vec![vec![0.0], vec![2.0], vec![4.0]]).unwrap();
        assert_eq!(t.interpolate(0.5).unwrap(), vec![1.0]);
        assert_eq!(t.interpolate(2.0).unwrap(), vec![3.0]);
        assert_eq!(t.interpolate(3.0).unwrap(), vec![4.0]);
        assert!(t.interpolate(3.5).is_none());
        assert!(Trajectory::new(meta(1.0), vec![0.0, 0.0], vec![vec![0.0], vec![0.0]]).is_err());
    }

    #[test]
    fn parameter_laws_match_closed_forms() {
        let p = quadratic1d().unwrap();
        for (g, r) in [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)] {
            let model = IcpdpsModel::new(&p, Clock::Rescaled, g, r);
            let s0 = IcpdpsModel::pack(&model.initial_state(v(&[1.0]), v(&[1.0]), 1.0, 2.0, 0.5));
            let traj = integrate(&model, 0.0, s0, 6.0, 1e-3, meta(1e-3)).unwrap();
            for (t, s) in traj.times.iter().zip(&traj.states).step_by(500) {
                let (phi, psi, theta) = rescaled_params_closed_form(*t, 1.0, 2.0, 0.5, g, r);
                assert_relative_eq!(s[4], phi, max_relative = 1e-8);
                assert_relative_eq!(s[5], psi, max_relative = 1e-8);
                assert_relative_eq!(s[6], theta, max_relative = 1e-8);
            }

            let model = IcpdpsModel::new(&p, Clock::Intrinsic, g, r);
            let s0 = IcpdpsModel::pack(&model.initial_state(v(&[1.0]), v(&[1.0]), 1.0, 2.0, 0.5));
            let traj = integrate(&model, 0.0, s0, 10.0, 1e-3, meta(1e-3)).unwrap();
            for (s, st) in traj.times.iter().zip(&traj.states).step_by(500) {
                // φ̃ - 2γθ̃ and ψ̃ - 2ρθ̃ are conserved.
                assert_relative_eq!(st[4] - 2.0 * g * st[6], 1.0 - 2.0 * g * 0.5, epsilon = 1e-8 * st[6]);
                assert_relative_eq!(st[5] - 2.0 * r * st[6], 2.0 - 2.0 * r * 0.5, epsilon = 1e-8 * st[6]);
                if let Some((phi, psi, theta)) = intrinsic_params_closed_form(*s, 1.0, 2.0, 0.5, g, r) {
                    assert_relative_eq!(st[4], phi, max_relative = 1e-8);
                    assert_relative_eq!(st[5], psi, max_relative = 1e-8);
                    assert_relative_eq!(st[6], theta, max_relative = 1e-8);
                }
            }
        }
    }

    #[test]
    fn nag_theta_laws() {
        let p = quadratic1d().unwrap();
        let model = NagModel { problem: &p, clock: Clock::Rescaled };
        let s0 = NagModel::pack(&NagOdeState { x: v(&[1.0]), z: v(&[1.0]), theta: 1.5, clock: Clock::Rescaled, time: 0.0 });
        let traj = integrate(&model, 0.0, s0, 2.0, 1e-3, meta(1e-3)).unwrap();
        assert_relative_eq!(traj.states.last().unwrap()[2], 1.5 * 1f64.exp(), max_relative = 1e-8);
        let model = NagModel { problem: &p, clock: Clock::Intrinsic };
        let s0 = NagModel::pack(&NagOdeState { x: v(&[1.0]), z: v(&[1.0]), theta: 1.5, clock: Clock::Intrinsic, time: 0.0 });
        let traj = integrate(&model, 0.0, s0, 3.0, 1e-3, meta(1e-3)).unwrap();
        for (s, st) in traj.times.iter().zip(&traj.states) {
            assert!((st[2] - (1.5 + s / 2.0)).abs() <= 1e-12 * st[2]);
        }
    }

    #[test]
    fn time_transforms() {
        let target = 1f64.exp() - 1.0;
        let p = quadratic1d().unwrap();
        let model = IcpdpsModel::new(&p, Clock::Intrinsic, 0.0, 0.0);
        let s0 = IcpdpsModel::pack(&model.initial_state(v(&[1.0]), v(&[1.0]), 1.0, 1.0, 1.0));
        let traj = integrate(&model, 0.0, s0, target, 1e-3, meta(1e-3)).unwrap();
        let t = time_transform_icpdps(&traj);
        assert_eq!(t[0], 0.0);
        assert_relative_eq!(*t.last().unwrap(), 1.0, max_relative = 1e-12);
        for (s, ts) in traj.times.iter().zip(&t) {
            assert_relative_eq!(*ts, s.ln_1p(), epsilon = 1e-12);
        }
        let s = 2.0 * 1.5 * (0.5f64.exp() - 1.0);
        assert_relative_eq!(nag_time_from_intrinsic(s, 1.5), 1.0, max_relative = 1e-14);
        assert_relative_eq!(nag_intrinsic_from_time(1.0, 1.5), s, max_relative = 1e-14);
    }

    #[test]
    fn theta_bound_examples() {
        assert_relative_eq!(theta_lower_bound(3.0, 1.0, 1.0, 1.0, 0.0, 0.0), 3f64.sqrt() + 1.0, max_relative = 1e-15);
        assert_eq!(theta_lower_bound(0.0, 1.0, 2.0, 0.7, 1.0, 1.0), 0.7);
        let b = theta_lower_bound(1.0, 1.0, 1.0, 1.0, 1.0, 1.0);
        assert!((b - 4.084).abs() < 1e-3);
        let p = quadratic1d().unwrap();
        let model = IcpdpsModel::new(&p, Clock::Intrinsic, 1.0, 1.0);
        let s0 = IcpdpsModel::pack(&model.initial_state(v(&[1.0]), v(&[1.0]), 1.0, 1.0, 1.0));
        let traj = integrate(&model, 0.0, s0, 1.0, 1e-3, meta(1e-3)).unwrap();
        assert!(traj.states.last().unwrap()[6] >= b);
    }

    #[test]
    fn second_order_forms_converge_quadratically() {
        let p = quadratic1d().unwrap();
        let nag = |h: f64, clock: Clock| {
            let model = NagModel { problem: &p, clock };
            let s0 = NagModel::pack(&NagOdeState { x: v(&[1.0]), z: v(&[1.0]), theta: 1.0, clock, time: 0.0 });
            let traj = integrate(&model, 0.0, s0, 4.0, h, meta(h)).unwrap();
            match clock {
                Clock::Intrinsic => nag_intrinsic_second_order_residual(&p, &traj).unwrap(),
                Clock::Rescaled => nag_rescaled_second_order_residual(&p, &traj).unwrap(),
            }
        };
        for clock in [Clock::Intrinsic, Clock::Rescaled] {
            let ratio = nag(1e-2, clock) / nag(5e-3, clock);
            assert!((3.0..=5.0).contains(&ratio), "{clock:?} ratio {ratio}");
        }
        let pd = |h: f64| {
            let model = IcpdpsModel::new(&p, Clock::Rescaled, 1.0, 1.0);
            let s0 = IcpdpsModel::pack(&model.initial_state(v(&[1.0]), v(&[0.5]), 1.0, 1.0, 1.0));
            let traj = integrate(&model, 0.0, s0, 4.0, h, meta(h)).unwrap();
            (
                icpdps_rescaled_second_order_residual(&p, &traj, 1.0, 1.0).unwrap(),
                velocity_identity_residual(&p, &traj),
            )
        };
        let (a, va) = pd(1e-2);
        let (b, vb) = pd(5e-3);
        assert!((3.0..=5.0).contains(&(a / b)), "ratio {}", a / b);
        assert!((3.0..=5.0).contains(&(va / vb)), "ratio {}", va / vb);
    }
}
