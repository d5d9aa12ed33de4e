//! Lyapunov values along the primal-dual ODEs, decay checks, and
//! discrete-versus-continuous trajectory comparison.

use crate::error::{Error, Result};
use crate::ode::{Clock, IcpdpsModel, IcpdpsOdeState, Trajectory, TrajectoryMeta};
use crate::params::IcpdpsParamState;
use crate::saddle::{lagrangian_gap, shifted_gap_parts_scaled, PrimalDualPoint, SaddleProblem};
use crate::solvers::{IcpdpsRun, NagIterState};

/// Relative slack allowed per sample for integrator error.
pub const MONOTONE_SLACK: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LyapunovSample {
    pub time: f64,
    pub value: f64,
    /// `θ` times the shifted Lagrangian gap.
    pub gap_term: f64,
    /// `½(φ‖ζ - x̂‖² + ψ‖η - ŷ‖²)`.
    pub metric_term: f64,
}

fn shifted_gap(problem: &SaddleProblem, u: &PrimalDualPoint, u_hat: &PrimalDualPoint, gamma: f64, rho: f64) -> Result<f64> {
    if problem.is_smooth() {
        let (g, f) = shifted_gap_parts_scaled(problem, u, u_hat, gamma, rho, 0)?;
        return Ok(g + f);
    }
    let dx = (&u.x - &u_hat.x).norm_squared();
    let dy = (&u.y - &u_hat.y).norm_squared();
    Ok(lagrangian_gap(problem, u, u_hat)? - 0.5 * gamma * dx - 0.5 * rho * dy)
}

fn lyapunov(problem: &SaddleProblem, state: &IcpdpsOdeState, u_hat: &PrimalDualPoint, gamma: f64, rho: f64) -> Result<LyapunovSample> {
    let u = PrimalDualPoint::new(state.x.clone(), state.y.clone());
    problem.check_dims(&u)?;
    problem.check_dims(&PrimalDualPoint::new(state.zeta.clone(), state.eta.clone()))?;
    let gap_term = state.theta * shifted_gap(problem, &u, u_hat, gamma, rho)?;
    let metric_term = 0.5
        * (state.phi * (&state.zeta - &u_hat.x).norm_squared() + state.psi * (&state.eta - &u_hat.y).norm_squared());
    Ok(LyapunovSample {
        time: state.time,
        value: gap_term + metric_term,
        gap_term,
        metric_term,
    })
}

/// `E(t) = θ[L̂(x, ŷ) - L̂(x̂, y)] + ½‖z - û‖²_Υ` with `Υ = diag(φI, ψI)`.
pub fn lyapunov_rescaled(
    problem: &SaddleProblem,
    state: &IcpdpsOdeState,
    u_hat: &PrimalDualPoint,
    gamma: f64,
    rho: f64,
) -> Result<LyapunovSample> {
    if state.clock != Clock::Rescaled {
        return Err(Error::Domain("lyapunov_rescaled needs a rescaled-clock state".into()));
    }
    lyapunov(problem, state, u_hat, gamma, rho)
}

/// The same expression in the intrinsic variables.
pub fn lyapunov_intrinsic(
    problem: &SaddleProblem,
    state: &IcpdpsOdeState,
    u_hat: &PrimalDualPoint,
    gamma: f64,
    rho: f64,
) -> Result<LyapunovSample> {
    if state.clock != Clock::Intrinsic {
        return Err(Error::Domain("lyapunov_intrinsic needs an intrinsic-clock state".into()));
    }
    lyapunov(problem, state, u_hat, gamma, rho)
}

/// Lyapunov samples at every node of a primal-dual ODE trajectory.
pub fn lyapunov_along(
    problem: &SaddleProblem,
    traj: &Trajectory,
    clock: Clock,
    u_hat: &PrimalDualPoint,
    gamma: f64,
    rho: f64,
) -> Result<Vec<LyapunovSample>> {
    let model = IcpdpsModel::new(problem, clock, gamma, rho);
    traj.times
        .iter()
        .zip(&traj.states)
        .map(|(t, s)| lyapunov(problem, &model.unpack(*t, s), u_hat, gamma, rho))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonotoneReport {
    pub checked: usize,
    /// Largest `E(t_{k+1}) - E(t_k) - slack_k`; nonpositive when passing.
    pub worst_excess: f64,
    pub worst_index: Option<usize>,
}

impl MonotoneReport {
    pub fn passed(&self) -> bool {
        self.worst_index.is_none()
    }
}

/// `E(t_{k+1}) ≤ E(t_k) + 1e-8·(1 + E(t_k))` for consecutive samples.
pub fn check_monotone(samples: &[LyapunovSample]) -> MonotoneReport {
    let mut report = MonotoneReport {
        checked: 0,
        worst_excess: f64::NEG_INFINITY,
        worst_index: None,
    };
    for (k, w) in samples.windows(2).enumerate() {
        let excess = w[1].value - w[0].value - MONOTONE_SLACK * (1.0 + w[0].value.abs());
        report.checked += 1;
        if excess > report.worst_excess {
            report.worst_excess = excess;
        }
        if excess > 0.0 && report.worst_index.is_none() {
            report.worst_index = Some(k + 1);
        }
    }
    report
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GapDecayRow {
    pub time: f64,
    pub shifted_gap: f64,
    pub plain_gap: f64,
    /// `E(0)/θ(t)`.
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GapDecayReport {
    pub rows: Vec<GapDecayRow>,
}

impl GapDecayReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    /// Largest `shifted_gap / bound`.
    pub fn worst_ratio(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.shifted_gap / r.bound)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Checks `L̂ gap(t) ≤ E(0)/θ(t)` at every node of a rescaled trajectory,
/// with the integrator slack of [`check_monotone`] carried into the bound.
pub fn gap_decay_check(
    problem: &SaddleProblem,
    traj: &Trajectory,
    u_hat: &PrimalDualPoint,
    gamma: f64,
    rho: f64,
) -> Result<GapDecayReport> {
    let model = IcpdpsModel::new(problem, Clock::Rescaled, gamma, rho);
    let e0 = lyapunov_rescaled(problem, &model.unpack(traj.times[0], &traj.states[0]), u_hat, gamma, rho)?.value;
    let mut rows = Vec::with_capacity(traj.len());
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let state = model.unpack(*t, s);
        let u = PrimalDualPoint::new(state.x.clone(), state.y.clone());
        let shifted = shifted_gap(problem, &u, u_hat, gamma, rho)?;
        let plain = lagrangian_gap(problem, &u, u_hat)?;
        let bound = e0 / state.theta;
        let slack = MONOTONE_SLACK * (1.0 + e0) / state.theta;
        rows.push(GapDecayRow {
            time: *t,
            shifted_gap: shifted,
            plain_gap: plain,
            bound,
            pass: shifted <= bound + slack,
        });
    }
    Ok(GapDecayReport { rows })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryError {
    pub max_err: f64,
    /// `(time, ‖discrete - continuous‖)` for each compared sample.
    pub per_time: Vec<(f64, f64)>,
    /// Discrete samples beyond the continuous horizon, left out.
    pub truncated: usize,
}

/// Euclidean distance between each discrete sample and the interpolated
/// continuous state, over the leading `discrete.dim()` components.
pub fn trajectory_error(discrete: &Trajectory, continuous: &Trajectory) -> Result<TrajectoryError> {
    let d = discrete.dim();
    if continuous.dim() < d {
        return Err(Error::DimensionMismatch(format!(
            "discrete states have {d} components, continuous only {}",
            continuous.dim()
        )));
    }
    let end = continuous.end();
    let mut out = TrajectoryError {
        max_err: 0.0,
        per_time: Vec::with_capacity(discrete.len()),
        truncated: 0,
    };
    for (t, s) in discrete.times.iter().zip(&discrete.states) {
        // Accumulated times like 2000·0.01 may overshoot the horizon by an ulp.
        let at = if *t > end && *t - end <= 1e-9 * (1.0 + end.abs()) { end } else { *t };
        let Some(c) = continuous.interpolate(at) else {
            out.truncated += 1;
            continue;
        };
        let err = s.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        out.max_err = out.max_err.max(err);
        out.per_time.push((*t, err));
    }
    Ok(out)
}

/// Largest `‖X̃(s_k) - X(t(s_k))‖` over the leading `components` entries, for
/// an intrinsic trajectory, its clock map `t(s_k)`, and a rescaled
/// trajectory. Nodes mapped past the rescaled horizon are skipped.
pub fn rescaling_gap(intrinsic: &Trajectory, transform: &[f64], rescaled: &Trajectory, components: usize) -> f64 {
    let mut worst = 0.0_f64;
    for (s, t) in intrinsic.states.iter().zip(transform) {
        if let Some(r) = rescaled.interpolate(*t) {
            let d = s[..components]
                .iter()
                .zip(&r[..components])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(d);
        }
    }
    worst
}

/// `[x, y, ζ, η]` of a primal-dual run on the intrinsic clock `s_i = αi` or
/// the rescaled clock `t_i = Σ_{j<i} λ_j`.
pub fn icpdps_discrete_trajectory(run: &IcpdpsRun, clock: Clock, problem: &str) -> Result<Trajectory> {
    let params: &[IcpdpsParamState] = &run.params[..run.iterates.len()];
    let alpha = params[0].alpha;
    let times: Vec<f64> = match clock {
        Clock::Intrinsic => (0..params.len()).map(|i| alpha * i as f64).collect(),
        Clock::Rescaled => crate::params::rescaled_times(params),
    };
    let states = run
        .iterates
        .iter()
        .map(|it| {
            let mut v: Vec<f64> = Vec::new();
            for part in [&it.x, &it.y, &it.zeta, &it.eta] {
                v.extend(part.iter());
            }
            v
        })
        .collect();
    Trajectory::new(
        TrajectoryMeta {
            problem: problem.into(),
            model: "icpdps".into(),
            step: alpha,
        },
        times,
        states,
    )
}

/// `[x, z, θ̃]` of a Nesterov run with `s_i = i√τ` and `θ̃_i = √τ/λ_i`.
pub fn nag_discrete_trajectory(states: &[NagIterState], tau: f64, problem: &str) -> Result<Trajectory> {
    let h = tau.sqrt();
    let times = (0..states.len()).map(|i| h * i as f64).collect();
    let rows = states
        .iter()
        .map(|s| {
            let mut v: Vec<f64> = s.x.iter().chain(s.z.iter()).copied().collect();
            v.push(h / s.lambda);
            v
        })
        .collect();
    Trajectory::new(
        TrajectoryMeta {
            problem: problem.into(),
            model: "nag".into(),
            step: h,
        },
        times,
        rows,
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct RatioReport {
    pub alphas: Vec<f64>,
    pub errors: Vec<f64>,
    pub ratios: Vec<f64>,
    /// `max ratio / min ratio`.
    pub spread: f64,
}

impl RatioReport {
    pub fn new(alphas: Vec<f64>, errors: Vec<f64>) -> Self {
        let ratios: Vec<f64> = errors.iter().zip(&alphas).map(|(e, a)| e / a).collect();
        let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        RatioReport {
            alphas,
            errors,
            ratios,
            spread: max / min,
        }
    }

    pub fn within(&self, factor: f64) -> bool {
        self.spread <= factor
    }
}
