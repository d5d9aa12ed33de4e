//! Single runs of a discrete method or an ODE model, written as one
//! trajectory CSV.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use crate::certificate::evaluate_certificate;
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, Method};
use crate::harness::csvout::Table;
use crate::lyapunov::lyapunov_along;
use crate::ode::{
    integrate, nag_intrinsic_from_time, nag_time_from_intrinsic, time_transform_icpdps, Clock, IcpdpsModel, ModelId,
    NagModel, NagOdeState, Trajectory, TrajectoryMeta,
};
use crate::params::{icpdps_param_init, rescaled_times, IcpdpsParamState};
use crate::saddle::{lagrangian_gap, PieceKind, PrimalDualPoint, SaddleProblem, Vector};
use crate::solvers::{icpdps_run, nag_run, IcpdpsIterState};

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub method: Method,
    pub rows: usize,
    pub final_gap: Option<f64>,
    pub final_lyapunov: Option<f64>,
    pub wall_time: Duration,
    pub path: PathBuf,
}

impl RunSummary {
    pub fn line(&self) -> String {
        let show = |v: Option<f64>| v.map(|v| format!("{v:.6e}")).unwrap_or_else(|| "n/a".into());
        format!(
            "{}: {} rows, final gap {}, final lyapunov {}, {:.3}s -> {}",
            self.method,
            self.rows,
            show(self.final_gap),
            show(self.final_lyapunov),
            self.wall_time.as_secs_f64(),
            self.path.display()
        )
    }
}

/// A finished run before it is written.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub table: Table,
    pub final_gap: Option<f64>,
    pub final_lyapunov: Option<f64>,
}

fn block_names(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |k| format!("{prefix}_{k}"))
}

/// `i, t_i, s_i, x_*, y_*, zeta_*, eta_*, lagrangian_gap, lhs_partial, rhs`.
pub fn trajectory_header(n: usize, m: usize, with_params: bool) -> Vec<String> {
    let mut h = vec!["t_i".to_string(), "s_i".to_string()];
    h.extend(block_names("x", n));
    h.extend(block_names("y", m));
    h.extend(block_names("zeta", n));
    h.extend(block_names("eta", m));
    h.extend(["lagrangian_gap", "lhs_partial", "rhs"].map(String::from));
    if with_params {
        h.extend(["phi", "psi", "theta"].map(String::from));
    }
    h
}

fn initial_point(config: &ExperimentConfig, problem: &SaddleProblem) -> (Vector, Vector) {
    let x0 = config
        .x0
        .as_ref()
        .map(|v| Vector::from_column_slice(v))
        .unwrap_or_else(|| Vector::from_element(problem.primal_dim(), 1.0));
    let y0 = config
        .y0
        .as_ref()
        .map(|v| Vector::from_column_slice(v))
        .unwrap_or_else(|| Vector::from_element(problem.dual_dim(), 1.0));
    (x0, y0)
}

/// Parameter state at index 0 for the configured `α, γ, ρ, φ₀, ψ₀`.
pub fn initial_params(config: &ExperimentConfig, problem: &SaddleProblem) -> Result<IcpdpsParamState> {
    icpdps_param_init(
        config.phi0,
        config.psi0,
        problem.k_norm()?,
        config.alpha_for(problem)?,
        config.gamma,
        config.rho,
    )
}

/// Minimizer of `G` alone, for the objective gap of the Nesterov runs.
fn primal_minimizer(problem: &SaddleProblem) -> Option<Vector> {
    match &problem.g.kind {
        PieceKind::Quadratic(q) => q.hessian.clone().cholesky().map(|c| -c.solve(&q.linear)),
        PieceKind::L1 { dim, .. } => Some(Vector::zeros(*dim)),
    }
}

fn objective_gap(problem: &SaddleProblem, x: &Vector, x_min: Option<&Vector>) -> Result<Option<f64>> {
    match x_min {
        Some(m) => Ok(Some(problem.g.evaluate(x)? - problem.g.evaluate(m)?)),
        None => Ok(None),
    }
}

/// Runs `config` and returns its table without writing it.
pub fn run_table(config: &ExperimentConfig) -> Result<RunOutput> {
    let problem = config.build_problem()?;
    config.validate(&problem)?;
    match config.method {
        Method::Icpdps => run_icpdps(config, &problem),
        Method::Nag => run_nag(config, &problem),
        Method::Ode(model) if model.is_nag() => run_nag_ode(config, &problem, model.clock()),
        Method::Ode(model) => run_icpdps_ode(config, &problem, model.clock()),
    }
}

/// Runs `config`, writes the CSV atomically and returns a summary.
pub fn run(config: &ExperimentConfig, out_dir: &Path) -> Result<RunSummary> {
    let start = Instant::now();
    let out = run_table(config)?;
    let path = config.output_path(out_dir);
    out.table.write_atomic(&path)?;
    Ok(RunSummary {
        method: config.method,
        rows: out.table.rows.len(),
        final_gap: out.final_gap,
        final_lyapunov: out.final_lyapunov,
        wall_time: start.elapsed(),
        path,
    })
}

fn run_icpdps(config: &ExperimentConfig, problem: &SaddleProblem) -> Result<RunOutput> {
    let steps = config.iterations.expect("validated");
    let (x0, y0) = initial_point(config, problem);
    let params0 = initial_params(config, problem)?;
    let run = icpdps_run(problem, IcpdpsIterState::new(x0, y0), params0, steps)?;
    let u_hat = problem.saddle_point().ok();
    let cert = match &u_hat {
        Some(u) if problem.is_smooth() => Some(evaluate_certificate(problem, &run, u)?),
        _ => None,
    };
    let t = rescaled_times(&run.params[..=steps]);
    let (n, m) = (problem.primal_dim(), problem.dual_dim());
    let mut table = Table::with_index("i", trajectory_header(n, m, false));
    let mut final_gap = None;
    for (i, it) in run.iterates.iter().enumerate() {
        let mut row = vec![Some(t[i]), Some(params0.alpha * i as f64)];
        for part in [&it.x, &it.y, &it.zeta, &it.eta] {
            row.extend(part.iter().map(|v| Some(*v)));
        }
        let gap = match &u_hat {
            Some(u) => Some(lagrangian_gap(problem, &it.point(), u)?),
            None => None,
        };
        final_gap = gap;
        row.push(gap);
        row.push(cert.as_ref().map(|c| c.lhs[i]));
        row.push(cert.as_ref().map(|c| c.rhs));
        table.push_indexed(i, row);
    }
    Ok(RunOutput {
        table,
        final_gap,
        final_lyapunov: None,
    })
}

fn run_nag(config: &ExperimentConfig, problem: &SaddleProblem) -> Result<RunOutput> {
    let steps = config.iterations.expect("validated");
    let (x0, _) = initial_point(config, problem);
    let h = config.tau.sqrt();
    let theta0 = config.nag_theta0;
    let states = nag_run(problem, x0, h / theta0, config.tau, steps)?;
    let x_min = primal_minimizer(problem);
    let n = problem.primal_dim();
    let mut table = Table::with_index("i", trajectory_header(n, 0, false));
    let mut final_gap = None;
    for (i, st) in states.iter().enumerate() {
        let s = h * i as f64;
        let mut row = vec![Some(nag_time_from_intrinsic(s, theta0)), Some(s)];
        row.extend(st.x.iter().map(|v| Some(*v)));
        row.extend(st.z.iter().map(|v| Some(*v)));
        final_gap = objective_gap(problem, &st.x, x_min.as_ref())?;
        row.extend([final_gap, None, None]);
        table.push_indexed(i, row);
    }
    Ok(RunOutput {
        table,
        final_gap,
        final_lyapunov: None,
    })
}

fn ode_meta(config: &ExperimentConfig, model: ModelId) -> TrajectoryMeta {
    TrajectoryMeta {
        problem: config.problem.clone(),
        model: model.as_str().into(),
        step: config.ode_step,
    }
}

/// Integrates a Nesterov model from `x(0) = z(0) = x0`.
pub fn integrate_nag(
    problem: &SaddleProblem,
    clock: Clock,
    x0: Vector,
    theta0: f64,
    horizon: f64,
    h: f64,
    meta: TrajectoryMeta,
) -> Result<Trajectory> {
    let model = NagModel { problem, clock };
    let s0 = NagModel::pack(&NagOdeState {
        z: x0.clone(),
        x: x0,
        theta: theta0,
        clock,
        time: 0.0,
    });
    integrate(&model, 0.0, s0, horizon, h, meta)
}

/// Integrates a primal-dual model from `ζ(0) = x0`, `η(0) = y0` with
/// parameter initials `(Φ₀, Ψ₀, Θ₀)` taken from `params0`.
pub fn integrate_icpdps(
    model: &IcpdpsModel<'_>,
    x0: Vector,
    y0: Vector,
    params0: &IcpdpsParamState,
    horizon: f64,
    h: f64,
    meta: TrajectoryMeta,
) -> Result<Trajectory> {
    let w = params0.weights;
    let s0 = IcpdpsModel::pack(&model.initial_state(x0, y0, w.big_phi, w.big_psi, w.theta));
    integrate(model, 0.0, s0, horizon, h, meta)
}

fn run_nag_ode(config: &ExperimentConfig, problem: &SaddleProblem, clock: Clock) -> Result<RunOutput> {
    let model = if clock == Clock::Intrinsic { ModelId::NagIntrinsic } else { ModelId::NagRescaled };
    let (x0, _) = initial_point(config, problem);
    let theta0 = config.nag_theta0;
    let traj = integrate_nag(
        problem,
        clock,
        x0,
        theta0,
        config.time.expect("validated"),
        config.ode_step,
        ode_meta(config, model),
    )?;
    let x_min = primal_minimizer(problem);
    let n = problem.primal_dim();
    let mut table = Table::with_index("i", trajectory_header(n, 0, true));
    let mut final_gap = None;
    for (k, (time, st)) in traj.times.iter().zip(&traj.states).enumerate() {
        let (t, s) = match clock {
            Clock::Intrinsic => (nag_time_from_intrinsic(*time, theta0), *time),
            Clock::Rescaled => (*time, nag_intrinsic_from_time(*time, theta0)),
        };
        let mut row = vec![Some(t), Some(s)];
        row.extend(st[..2 * n].iter().map(|v| Some(*v)));
        final_gap = objective_gap(problem, &Vector::from_column_slice(&st[..n]), x_min.as_ref())?;
        row.extend([final_gap, None, None, None, None, Some(st[2 * n])]);
        table.push_indexed(k, row);
    }
    Ok(RunOutput {
        table,
        final_gap,
        final_lyapunov: None,
    })
}

/// `s(t)` along a rescaled trajectory from `ds/dt = θ/√(φψ)`, by the
/// trapezoid rule.
fn intrinsic_clock_of(traj: &Trajectory) -> Vec<f64> {
    let d = traj.dim();
    let rate = |st: &[f64]| st[d - 1] / (st[d - 3] * st[d - 2]).sqrt();
    let mut s = Vec::with_capacity(traj.len());
    s.push(0.0);
    for k in 1..traj.len() {
        let dt = traj.times[k] - traj.times[k - 1];
        let prev = s[k - 1];
        s.push(prev + 0.5 * dt * (rate(&traj.states[k - 1]) + rate(&traj.states[k])));
    }
    s
}

fn run_icpdps_ode(config: &ExperimentConfig, problem: &SaddleProblem, clock: Clock) -> Result<RunOutput> {
    let id = if clock == Clock::Intrinsic { ModelId::IcpdpsIntrinsic } else { ModelId::IcpdpsRescaled };
    let (x0, y0) = initial_point(config, problem);
    let params0 = initial_params(config, problem)?;
    let mut model = IcpdpsModel::new(problem, clock, config.gamma, config.rho);
    model.relaxation = config.relaxation;
    let traj = integrate_icpdps(
        &model,
        x0,
        y0,
        &params0,
        config.time.expect("validated"),
        config.ode_step,
        ode_meta(config, id),
    )?;
    let (t, s) = match clock {
        Clock::Intrinsic => (time_transform_icpdps(&traj), traj.times.clone()),
        Clock::Rescaled => (traj.times.clone(), intrinsic_clock_of(&traj)),
    };
    let u_hat: Option<PrimalDualPoint> = problem.saddle_point().ok();
    let energy = match &u_hat {
        Some(u) => Some(lyapunov_along(problem, &traj, clock, u, config.gamma, config.rho)?),
        None => None,
    };
    let (n, m) = (problem.primal_dim(), problem.dual_dim());
    let mut table = Table::with_index("i", trajectory_header(n, m, true));
    let mut final_gap = None;
    for (k, st) in traj.states.iter().enumerate() {
        let mut row = vec![Some(t[k]), Some(s[k])];
        row.extend(st.iter().map(|v| Some(*v)));
        let params = row.split_off(row.len() - 3);
        let gap = match &u_hat {
            Some(u) => {
                let point = PrimalDualPoint::from_slices(&st[..n], &st[n..n + m]);
                Some(lagrangian_gap(problem, &point, u)?)
            }
            None => None,
        };
        final_gap = gap;
        row.push(gap);
        row.push(energy.as_ref().map(|e| e[k].value));
        row.push(energy.as_ref().map(|e| e[0].value));
        row.extend(params);
        table.push_indexed(k, row);
    }
    let final_lyapunov = energy.as_ref().and_then(|e| e.last()).map(|e| e.value);
    if final_lyapunov.is_some_and(|v| !v.is_finite()) {
        return Err(Error::Domain("lyapunov value became non-finite".into()));
    }
    Ok(RunOutput {
        table,
        final_gap,
        final_lyapunov,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_kv_str(text).unwrap()
    }

    #[test]
    fn row_counts() {
        let out = run_table(&cfg("algo = icpdps\nalpha = 1\ngamma = 1\nrho = 1\nN = 100")).unwrap();
        assert_eq!(out.table.rows.len(), 101);
        let out = run_table(&cfg("model = icpdps-intrinsic\nT = 20\nh = 1e-3")).unwrap();
        assert_eq!(out.table.rows.len(), 20_001);
        assert!(out.final_lyapunov.unwrap() <= out.table.rows[0][11].unwrap());
    }

    #[test]
    fn header_layout() {
        let out = run_table(&cfg("problem = quadratic-nd\nN = 3")).unwrap();
        let bytes = out.table.to_bytes().unwrap();
        let header = String::from_utf8(bytes).unwrap().lines().next().unwrap().to_string();
        assert!(header.starts_with("i,t_i,s_i,x_1,x_2,x_3,x_4,x_5,y_1,"));
        assert!(header.ends_with("eta_5,lagrangian_gap,lhs_partial,rhs"));
        let out = run_table(&cfg("model = nag-rescaled\nT = 1")).unwrap();
        let bytes = out.table.to_bytes().unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "i,t_i,s_i,x_1,zeta_1,lagrangian_gap,lhs_partial,rhs,phi,psi,theta"
        );
    }

    #[test]
    fn certificate_columns_hold() {
        let out = run_table(&cfg("gamma = 1\nrho = 0\nN = 50")).unwrap();
        for row in &out.table.rows {
            let (lhs, rhs) = (row[7].unwrap(), row[8].unwrap());
            assert!(lhs <= rhs * (1.0 + 1e-9));
        }
    }

    #[test]
    fn lasso_runs_without_certificate() {
        let out = run_table(&cfg("problem = lasso-demo\nalgo = icpdps\nN = 20")).unwrap();
        assert_eq!(out.table.rows.len(), 21);
        assert!(out.table.rows[5].last().unwrap().is_none());
        assert!(run_table(&cfg("problem = lasso-demo\nalgo = nag\nN = 20")).is_err());
    }

    #[test]
    fn rescaled_intrinsic_clock_matches_closed_form() {
        // γ = ρ = 0 with unit weights: θ = eᵗ, φ = ψ = 1, so s = eᵗ - 1.
        let out = run_table(&cfg("model = icpdps-rescaled\nT = 2\nh = 1e-3")).unwrap();
        let last = out.table.rows.last().unwrap();
        assert!((last[1].unwrap() - (2f64.exp() - 1.0)).abs() < 1e-6);
    }
}
