//! Figure recipes: fixed experiment bundles written as CSV files.
//!
//! All recipes use `quadratic1d` (`G = x²/2`, `F* = y²/2`, `K = 1`) started
//! from `x⁰ = y⁰ = 1`. The primal-dual recipes use `γ = ρ = 1`, `φ₀ = ψ₀ = 1`
//! and ODE weights `(Φ₀, Ψ₀, Θ₀)` from the parameter initialization with
//! `α = 1/‖K‖`; the ODE paths do not depend on a common scaling of these.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::harness::csvout::{write_atomic, Table};
use crate::harness::run::{integrate_icpdps, integrate_nag};
use crate::lyapunov::{icpdps_discrete_trajectory, nag_discrete_trajectory, rescaling_gap, trajectory_error};
use crate::ode::{
    nag_intrinsic_from_time, nag_time_from_intrinsic, time_transform_icpdps, Clock, IcpdpsModel, Trajectory,
    TrajectoryMeta,
};
use crate::params::icpdps_param_init;
use crate::saddle::{lagrangian_gap, quadratic1d, PrimalDualPoint, SaddleProblem, Vector};
use crate::solvers::{icpdps_run, nag_run, IcpdpsIterState, IcpdpsRun};

pub const FIG_STEP: f64 = 1e-3;
pub const FIG_HORIZON: f64 = 20.0;
pub const FIG_TAUS: [f64; 2] = [1e-2, 1e-4];
pub const FIG_ALPHAS: [f64; 2] = [0.1, 0.01];
pub const FIG_GAMMA: f64 = 1.0;
pub const FIG_RHO: f64 = 1.0;
pub const NAG_THETA0: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Recipe {
    Fig1,
    Fig2,
    Fig3,
}

impl Recipe {
    pub const ALL: [Recipe; 3] = [Recipe::Fig1, Recipe::Fig2, Recipe::Fig3];

    pub fn as_str(&self) -> &'static str {
        match self {
            Recipe::Fig1 => "fig1",
            Recipe::Fig2 => "fig2",
            Recipe::Fig3 => "fig3",
        }
    }
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Recipe {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Recipe::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::config("recipe", format!("unknown recipe `{s}` (known: fig1, fig2, fig3)")))
    }
}

/// Tables and scalar results of one recipe, before writing.
#[derive(Clone, Debug, PartialEq)]
pub struct Bundle {
    pub recipe: Recipe,
    pub tables: Vec<(String, Table)>,
    /// `key = value` lines describing the defaults used.
    pub meta: String,
    pub metrics: Vec<(String, f64)>,
}

impl Bundle {
    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }

    pub fn file_names(&self) -> impl Iterator<Item = &str> {
        self.tables.iter().map(|(n, _)| n.as_str())
    }
}

fn names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|k| format!("{prefix}_{k}")).collect()
}

fn cols(parts: &[(&str, usize)]) -> Vec<String> {
    parts.iter().flat_map(|(p, n)| names(p, *n)).collect()
}

fn header(lead: &[&str], parts: &[(&str, usize)], tail: &[&str]) -> Vec<String> {
    let mut h: Vec<String> = lead.iter().map(|s| s.to_string()).collect();
    h.extend(cols(parts));
    h.extend(tail.iter().map(|s| s.to_string()));
    h
}

fn some(xs: &[f64]) -> impl Iterator<Item = Option<f64>> + '_ {
    xs.iter().map(|v| Some(*v))
}

fn meta(step: f64) -> TrajectoryMeta {
    TrajectoryMeta {
        problem: "quadratic1d".into(),
        model: String::new(),
        step,
    }
}

fn ones(n: usize) -> Vector {
    Vector::from_element(n, 1.0)
}

fn tag(v: f64) -> String {
    format!("{v:e}")
}

pub fn build(recipe: Recipe) -> Result<Bundle> {
    match recipe {
        Recipe::Fig1 => fig1(),
        Recipe::Fig2 => fig23(Recipe::Fig2),
        Recipe::Fig3 => fig23(Recipe::Fig3),
    }
}

/// Writes every table of the bundle plus `meta.txt` under
/// `out_dir/<recipe>/`.
pub fn write(bundle: &Bundle, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let dir = out_dir.join(bundle.recipe.as_str());
    let mut files = Vec::new();
    for (name, table) in &bundle.tables {
        let path = dir.join(name);
        table.write_atomic(&path)?;
        files.push(path);
    }
    let path = dir.join("meta.txt");
    write_atomic(&path, bundle.meta.as_bytes())?;
    files.push(path);
    Ok(files)
}

pub fn figure(recipe: Recipe, out_dir: &Path) -> Result<(Bundle, Vec<PathBuf>)> {
    let bundle = build(recipe)?;
    let files = write(&bundle, out_dir)?;
    Ok((bundle, files))
}

/// Nesterov iterates for `τ ∈ {1e-2, 1e-4}` against both Nesterov ODEs.
fn fig1() -> Result<Bundle> {
    let p = quadratic1d()?;
    let mut tables = Vec::new();
    let mut metrics = Vec::new();

    let intrinsic = integrate_nag(&p, Clock::Intrinsic, ones(1), NAG_THETA0, FIG_HORIZON, FIG_STEP, meta(FIG_STEP))?;
    let t_end = nag_time_from_intrinsic(FIG_HORIZON, NAG_THETA0);
    let rescaled = integrate_nag(&p, Clock::Rescaled, ones(1), NAG_THETA0, t_end, FIG_STEP, meta(FIG_STEP))?;
    let xz = [("x", 1), ("z", 1)];

    let mut errors = Table::new(vec!["tau".into(), "max_err".into()]);
    for tau in FIG_TAUS {
        let h = tau.sqrt();
        let steps = (FIG_HORIZON / h).round() as usize;
        let states = nag_run(&p, ones(1), h / NAG_THETA0, tau, steps)?;
        let discrete = nag_discrete_trajectory(&states, tau, "quadratic1d")?;
        let mut t = Table::with_index("i", header(&["s_i", "t_i"], &xz, &["theta"]));
        for (i, (s, st)) in discrete.times.iter().zip(&discrete.states).enumerate() {
            let mut row = vec![Some(*s), Some(nag_time_from_intrinsic(*s, NAG_THETA0))];
            row.extend(some(st));
            t.push_indexed(i, row);
        }
        tables.push((format!("fig1_nag_tau_{}.csv", tag(tau)), t));
        let xz_only = Trajectory::new(
            discrete.meta.clone(),
            discrete.times.clone(),
            discrete.states.iter().map(|s| s[..2].to_vec()).collect(),
        )?;
        let err = trajectory_error(&xz_only, &intrinsic)?.max_err;
        errors.push(vec![Some(tau), Some(err)]);
        metrics.push((format!("err_tau_{}", tag(tau)), err));
    }

    let mut t = Table::with_index("k", header(&["s", "t"], &xz, &["theta"]));
    for (k, (s, st)) in intrinsic.times.iter().zip(&intrinsic.states).enumerate() {
        let mut row = vec![Some(*s), Some(nag_time_from_intrinsic(*s, NAG_THETA0))];
        row.extend(some(st));
        t.push_indexed(k, row);
    }
    tables.push(("fig1_ode_intrinsic.csv".into(), t));

    let mut t = Table::with_index(
        "k",
        header(&["t", "s"], &xz, &["theta", "x_1_overlay", "z_1_overlay", "theta_overlay"]),
    );
    let mut overlay_gap = 0.0_f64;
    for (k, (time, st)) in rescaled.times.iter().zip(&rescaled.states).enumerate() {
        let s = nag_intrinsic_from_time(*time, NAG_THETA0);
        let mut row = vec![Some(*time), Some(s)];
        row.extend(some(st));
        match intrinsic.interpolate(s.min(intrinsic.end())) {
            Some(o) => {
                overlay_gap = overlay_gap.max(((o[0] - st[0]).powi(2) + (o[1] - st[1]).powi(2)).sqrt());
                row.extend(some(&o));
            }
            None => row.extend([None, None, None]),
        }
        t.push_indexed(k, row);
    }
    tables.push(("fig1_ode_rescaled.csv".into(), t));
    tables.push(("fig1_errors.csv".into(), errors));
    metrics.push(("overlay_gap".into(), overlay_gap));

    let meta = format!(
        "recipe = fig1\nproblem = quadratic1d\nx0 = 1\ntheta0 = {NAG_THETA0}\nlambda0 = sqrt(tau)/theta0\nhorizon_s = {FIG_HORIZON}\nhorizon_t = {t_end}\nh = {FIG_STEP}\ntaus = 1e-2,1e-4\n"
    );
    Ok(Bundle {
        recipe: Recipe::Fig1,
        tables,
        meta,
        metrics,
    })
}

fn discrete_runs(p: &SaddleProblem) -> Result<Vec<(f64, IcpdpsRun)>> {
    FIG_ALPHAS
        .iter()
        .map(|alpha| {
            let params0 = icpdps_param_init(1.0, 1.0, p.k_norm()?, *alpha, FIG_GAMMA, FIG_RHO)?;
            let steps = (FIG_HORIZON / alpha).round() as usize;
            Ok((*alpha, icpdps_run(p, IcpdpsIterState::new(ones(1), ones(1)), params0, steps)?))
        })
        .collect()
}

/// Primal-dual iterates for `α ∈ {0.1, 0.01}` against the intrinsic ODE on
/// `s_i = αi` (fig2) or the rescaled ODE on `t_i = Σλ_j` (fig3).
fn fig23(recipe: Recipe) -> Result<Bundle> {
    let p = quadratic1d()?;
    let origin = PrimalDualPoint::zeros(1, 1);
    let (n, m) = (p.primal_dim(), p.dual_dim());
    let state = [("x", n), ("y", m), ("zeta", n), ("eta", m)];
    let clock = if recipe == Recipe::Fig2 { Clock::Intrinsic } else { Clock::Rescaled };
    let time_col = if recipe == Recipe::Fig2 { "s_i" } else { "t_i" };
    let ode_time = if recipe == Recipe::Fig2 { "s" } else { "t" };
    let prefix = recipe.as_str();
    let params0 = icpdps_param_init(1.0, 1.0, p.k_norm()?, 1.0 / p.k_norm()?, FIG_GAMMA, FIG_RHO)?;

    let runs = discrete_runs(&p)?;
    let mut discrete = Vec::new();
    for (alpha, run) in &runs {
        discrete.push((*alpha, icpdps_discrete_trajectory(run, clock, "quadratic1d")?));
    }
    let intrinsic_model = IcpdpsModel::new(&p, Clock::Intrinsic, FIG_GAMMA, FIG_RHO);
    let intrinsic = integrate_icpdps(&intrinsic_model, ones(1), ones(1), &params0, FIG_HORIZON, FIG_STEP, meta(FIG_STEP))?;
    let transform = time_transform_icpdps(&intrinsic);
    let rescaled_horizon = discrete
        .iter()
        .map(|(_, d)| d.end())
        .fold(*transform.last().expect("nonempty"), f64::max);

    let mut tables = Vec::new();
    let mut metrics = Vec::new();
    let mut horizon_note = String::new();
    let continuous = if recipe == Recipe::Fig2 {
        intrinsic.clone()
    } else {
        horizon_note = format!("horizon_t = {rescaled_horizon}\n");
        let model = IcpdpsModel::new(&p, Clock::Rescaled, FIG_GAMMA, FIG_RHO);
        integrate_icpdps(&model, ones(1), ones(1), &params0, rescaled_horizon, FIG_STEP, meta(FIG_STEP))?
    };

    let mut errors = Table::new(vec!["alpha".into(), "max_err".into()]);
    for ((alpha, traj), (_, run)) in discrete.iter().zip(&runs) {
        let mut phase = Table::with_index("i", header(&[time_col], &state, &[]));
        let mut decay = Table::with_index("i", header(&[time_col], &[], &["lagrangian_gap"]));
        for (i, (t, st)) in traj.times.iter().zip(&traj.states).enumerate() {
            let mut row = vec![Some(*t)];
            row.extend(some(st));
            phase.push_indexed(i, row);
            let gap = lagrangian_gap(&p, &run.iterates[i].point(), &origin)?;
            decay.push_indexed(i, vec![Some(*t), Some(gap)]);
        }
        tables.push((format!("{prefix}_phase_alpha_{}.csv", tag(*alpha)), phase));
        tables.push((format!("{prefix}_decay_alpha_{}.csv", tag(*alpha)), decay));
        let err = trajectory_error(traj, &continuous)?.max_err;
        errors.push(vec![Some(*alpha), Some(err)]);
        metrics.push((format!("err_alpha_{}", tag(*alpha)), err));
    }

    let d = 2 * (n + m);
    let mut phase = Table::with_index("k", header(&[ode_time], &state, &["phi", "psi", "theta"]));
    let mut decay = Table::with_index("k", header(&[ode_time], &[], &["lagrangian_gap"]));
    for (k, (t, st)) in continuous.times.iter().zip(&continuous.states).enumerate() {
        let mut row = vec![Some(*t)];
        row.extend(some(st));
        phase.push_indexed(k, row);
        let gap = lagrangian_gap(&p, &PrimalDualPoint::from_slices(&st[..n], &st[n..n + m]), &origin)?;
        decay.push_indexed(k, vec![Some(*t), Some(gap)]);
    }
    tables.push((format!("{prefix}_phase_ode.csv"), phase));
    tables.push((format!("{prefix}_decay_ode.csv"), decay));
    tables.push((format!("{prefix}_errors.csv"), errors));

    if recipe == Recipe::Fig3 {
        let mut overlay = Table::with_index(
            "k",
            header(&["s", "t"], &[("intrinsic_x", n), ("intrinsic_y", m), ("rescaled_x", n), ("rescaled_y", m)], &["distance"]),
        );
        for (k, (s, st)) in intrinsic.times.iter().zip(&intrinsic.states).enumerate() {
            let Some(r) = continuous.interpolate(transform[k]) else { continue };
            let dist = st[..d].iter().zip(&r[..d]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let mut row = vec![Some(*s), Some(transform[k])];
            row.extend(some(&st[..n + m]));
            row.extend(some(&r[..n + m]));
            row.push(Some(dist));
            overlay.push_indexed(k, row);
        }
        tables.push(("fig3_overlay.csv".into(), overlay));
        metrics.push(("phase_gap".into(), rescaling_gap(&intrinsic, &transform, &continuous, d)));
    }

    let w = params0.weights;
    let meta = format!(
        "recipe = {prefix}\nproblem = quadratic1d\nx0 = 1\ny0 = 1\ngamma = {FIG_GAMMA}\nrho = {FIG_RHO}\nphi0 = 1\npsi0 = 1\nalphas = 0.1,0.01\node_phi0 = {}\node_psi0 = {}\node_theta0 = {}\nhorizon_s = {FIG_HORIZON}\n{horizon_note}h = {FIG_STEP}\nclock = {}\n",
        w.big_phi,
        w.big_psi,
        w.theta,
        if clock == Clock::Intrinsic { "intrinsic" } else { "rescaled" },
    );
    Ok(Bundle {
        recipe,
        tables,
        meta,
        metrics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_recipe_is_config_error() {
        assert!(matches!("fig4".parse::<Recipe>(), Err(Error::Config { .. })));
    }

    #[test]
    fn fig2_has_phase_and_decay_files() {
        let b = build(Recipe::Fig2).unwrap();
        assert!(b.file_names().any(|n| n.contains("phase")));
        assert!(b.file_names().any(|n| n.contains("decay")));
        assert!(b.metric("err_alpha_1e-2").unwrap() < b.metric("err_alpha_1e-1").unwrap());
    }

    #[test]
    fn fig3_phase_curves_coincide() {
        let b = build(Recipe::Fig3).unwrap();
        assert!(b.metric("phase_gap").unwrap() <= 1e-4, "{:?}", b.metrics);
        assert!(b.meta.contains("horizon_t"));
    }

    #[test]
    fn fig1_has_both_time_axes() {
        let b = build(Recipe::Fig1).unwrap();
        let (_, t) = b.tables.iter().find(|(n, _)| n == "fig1_ode_rescaled.csv").unwrap();
        assert_eq!(t.header[..2], ["t".to_string(), "s".to_string()]);
        assert!(b.metric("overlay_gap").unwrap() < 1e-4);
        assert!(b.metric("err_tau_1e-4").unwrap() < b.metric("err_tau_1e-2").unwrap());
    }
}
