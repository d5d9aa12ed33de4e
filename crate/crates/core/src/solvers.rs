//! Discrete methods: Nesterov's accelerated gradient, the Chambolle–Pock /
//! PDHG baseline and the inertial corrected primal-dual proximal splitting.

use crate::error::{Error, Result};
use crate::params::{icpdps_param_step, IcpdpsParamState, NagParamState};
use crate::saddle::{PrimalDualPoint, SaddleProblem, Vector};

/// Smallest λ accepted as a divisor in the auxiliary updates.
pub const LAMBDA_FLOOR: f64 = 1e-300;

fn guarded_inverse(lambda: f64, what: &str) -> Result<f64> {
    if !(lambda > LAMBDA_FLOOR) || !lambda.is_finite() {
        return Err(Error::Domain(format!("{what} = {lambda} is too small to divide by")));
    }
    Ok(1.0 / lambda)
}

#[derive(Clone, Debug, PartialEq)]
pub struct NagIterState {
    pub x: Vector,
    pub x_bar: Vector,
    /// `z^i`, with `z^{i+1} = x^{i+1}/λ_i - (1/λ_i - 1)x^i`.
    pub z: Vector,
    pub lambda: f64,
    pub index: usize,
}

impl NagIterState {
    /// `x̄⁰ = z⁰ = x⁰`.
    pub fn new(x0: Vector, lambda0: f64) -> Result<Self> {
        let p = NagParamState::new(lambda0)?;
        Ok(NagIterState {
            x_bar: x0.clone(),
            z: x0.clone(),
            x: x0,
            lambda: p.lambda,
            index: 0,
        })
    }
}

/// `x^{i+1} = x̄^i - τ∇G(x̄^i)` followed by the momentum update with the
/// next λ. Convergence needs `τ ≤ 1/L`; that is not checked here.
pub fn nag_step(problem: &SaddleProblem, state: &NagIterState, tau: f64) -> Result<NagIterState> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::Domain(format!("step size must be positive, got {tau}")));
    }
    let x_next = &state.x_bar - problem.g.gradient(&state.x_bar)? * tau;
    let inv = guarded_inverse(state.lambda, "lambda")?;
    let lambda_next = NagParamState {
        lambda: state.lambda,
        index: state.index,
    }
    .next()?
    .lambda;
    let diff = &x_next - &state.x;
    let x_bar = &x_next + &diff * (lambda_next * (inv - 1.0));
    let z = &x_next * inv - &state.x * (inv - 1.0);
    Ok(NagIterState {
        x: x_next,
        x_bar,
        z,
        lambda: lambda_next,
        index: state.index + 1,
    })
}

/// `steps + 1` states starting from `x⁰`.
pub fn nag_run(
    problem: &SaddleProblem,
    x0: Vector,
    lambda0: f64,
    tau: f64,
    steps: usize,
) -> Result<Vec<NagIterState>> {
    let mut out = Vec::with_capacity(steps + 1);
    out.push(NagIterState::new(x0, lambda0)?);
    for _ in 0..steps {
        let next = nag_step(problem, out.last().expect("nonempty"), tau)?;
        out.push(next);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CpOutput {
    pub point: PrimalDualPoint,
    /// `τσ‖K‖² > 1`: the iteration may diverge.
    pub step_condition_violated: bool,
}

/// One Chambolle–Pock step with extrapolation `ω` (`ω = 0` is PDHG):
/// `x⁺ = prox_{τG}(x - τKᵀy)`, `x̄ = x⁺ + ω(x⁺ - x)`,
/// `y⁺ = prox_{σF*}(y + σKx̄)`.
pub fn cp_step(
    problem: &SaddleProblem,
    u: &PrimalDualPoint,
    tau: f64,
    sigma: f64,
    omega: f64,
) -> Result<CpOutput> {
    problem.check_dims(u)?;
    if !(0.0..=1.0).contains(&omega) {
        return Err(Error::Domain(format!("omega must lie in [0, 1], got {omega}")));
    }
    let x = problem
        .g
        .prox(tau, &(&u.x - problem.k.adjoint_apply(&u.y)? * tau))?;
    let x_bar = &x + (&x - &u.x) * omega;
    let y = problem
        .f_star
        .prox(sigma, &(&u.y + problem.k.apply(&x_bar)? * sigma))?;
    let k_norm = problem.k.norm().unwrap_or(0.0);
    Ok(CpOutput {
        point: PrimalDualPoint::new(x, y),
        step_condition_violated: tau * sigma * k_norm * k_norm > 1.0 + 1e-12,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct IcpdpsIterState {
    pub index: usize,
    pub x: Vector,
    pub y: Vector,
    pub zeta: Vector,
    pub eta: Vector,
    /// Damped interpolant `x̂` that produced `x` (equal to `x` initially).
    pub x_hat: Vector,
    /// Damped interpolant `ŷ` that produced `y`.
    pub y_hat: Vector,
    /// Corrected extrapolation `ū` used for `y` (equal to `ζ` initially).
    pub u_bar: Vector,
}

impl IcpdpsIterState {
    /// `ζ⁰ = x⁰`, `η⁰ = y⁰`.
    pub fn new(x0: Vector, y0: Vector) -> Self {
        Self::with_auxiliary(x0.clone(), y0.clone(), x0, y0)
    }

    pub fn with_auxiliary(x0: Vector, y0: Vector, zeta0: Vector, eta0: Vector) -> Self {
        IcpdpsIterState {
            index: 0,
            x_hat: x0.clone(),
            y_hat: y0.clone(),
            u_bar: zeta0.clone(),
            x: x0,
            y: y0,
            zeta: zeta0,
            eta: eta0,
        }
    }

    pub fn point(&self) -> PrimalDualPoint {
        PrimalDualPoint::new(self.x.clone(), self.y.clone())
    }

    pub fn auxiliary(&self) -> PrimalDualPoint {
        PrimalDualPoint::new(self.zeta.clone(), self.eta.clone())
    }

    fn check_dims(&self, problem: &SaddleProblem) -> Result<()> {
        let (n, m) = (problem.primal_dim(), problem.dual_dim());
        if self.x.len() != n || self.zeta.len() != n || self.y.len() != m || self.eta.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "iterate does not match a {n}+{m} dimensional problem"
            )));
        }
        Ok(())
    }
}

/// One full iteration: the parameters advance first, then the primal and
/// dual variables, using the new `λ_{i+1}` and `σ_{i+1}` in the dual half.
pub fn icpdps_step(
    problem: &SaddleProblem,
    iter: &IcpdpsIterState,
    params: &IcpdpsParamState,
) -> Result<(IcpdpsIterState, IcpdpsParamState)> {
    iter.check_dims(problem)?;
    let next = icpdps_param_step(params)?;
    let t = next.transition.expect("stepped state carries its transition");
    let lambda = params.lambda;
    let lambda_next = next.lambda;
    let inv = guarded_inverse(lambda, "lambda_i")?;
    let inv_next = guarded_inverse(lambda_next, "lambda_{i+1}")?;

    let x_hat = &iter.x + (&iter.zeta - &iter.x) * (lambda / (1.0 + t.s_damp));
    let x = problem
        .g
        .prox(t.tau_tilde, &(&x_hat - problem.k.adjoint_apply(&iter.eta)? * t.tau_tilde))?;
    let zeta = &iter.x + (&x - &iter.x) * inv;

    let y_hat = &iter.y + (&iter.eta - &iter.y) * (lambda_next / (1.0 + t.t_damp));
    let u_bar = &zeta + (&zeta - &iter.zeta) * t.omega;
    let y = problem
        .f_star
        .prox(t.sigma_tilde, &(&y_hat + problem.k.apply(&u_bar)? * t.sigma_tilde))?;
    let eta = &iter.y + (&y - &iter.y) * inv_next;

    Ok((
        IcpdpsIterState {
            index: iter.index + 1,
            x,
            y,
            zeta,
            eta,
            x_hat,
            y_hat,
            u_bar,
        },
        next,
    ))
}

/// A finished run: `iterates[i]` pairs with `params[i]`. `params` has one
/// extra state (index `N + 1`) because the certificate metric at `N` uses
/// `Ψ_{N+1}`.
#[derive(Clone, Debug)]
pub struct IcpdpsRun {
    pub iterates: Vec<IcpdpsIterState>,
    pub params: Vec<IcpdpsParamState>,
}

impl IcpdpsRun {
    pub fn steps(&self) -> usize {
        self.iterates.len() - 1
    }
}

pub fn icpdps_run(
    problem: &SaddleProblem,
    start: IcpdpsIterState,
    params0: IcpdpsParamState,
    steps: usize,
) -> Result<IcpdpsRun> {
    let mut iterates = Vec::with_capacity(steps + 1);
    let mut params = Vec::with_capacity(steps + 2);
    iterates.push(start);
    params.push(params0);
    for _ in 0..steps {
        let (it, p) = icpdps_step(problem, iterates.last().expect("nonempty"), params.last().expect("nonempty"))?;
        iterates.push(it);
        params.push(p);
    }
    let lookahead = icpdps_param_step(params.last().expect("nonempty"))?;
    params.push(lookahead);
    Ok(IcpdpsRun { iterates, params })
}

/// Largest relative deviation from `λ_i(ζ^{i+1} - x^i) = x^{i+1} - x^i` and
/// `λ_{i+1}(η^{i+1} - y^i) = y^{i+1} - y^i` over a run.
pub fn reconstruction_residual(run: &IcpdpsRun) -> f64 {
    let mut worst = 0.0_f64;
    for (i, pair) in run.iterates.windows(2).enumerate() {
        let (a, b) = (&pair[0], &pair[1]);
        let (li, ln) = (run.params[i].lambda, run.params[i + 1].lambda);
        let dx = &b.x - &a.x;
        let dy = &b.y - &a.y;
        let rx = ((&b.zeta - &a.x) * li - &dx).norm();
        let ry = ((&b.eta - &a.y) * ln - &dy).norm();
        let sx = ((&b.zeta - &a.x) * li).norm() + dx.norm();
        let sy = ((&b.eta - &a.y) * ln).norm() + dy.norm();
        if sx > 0.0 {
            worst = worst.max(rx / sx);
        }
        if sy > 0.0 {
            worst = worst.max(ry / sy);
        }
    }
    worst
}

/// Residuals of the semi-implicit Euler form of one step, divided by `Θ`:
///
/// `(Φ_i/(Θ_iλ_i))(ζ^{i+1} - ζ^i) - [γ(x^{i+1} - ζ^{i+1}) - ∇G(x^{i+1}) - Kᵀη^i]`
/// `(Ψ_{i+1}/(Θ_{i+1}λ_{i+1}))(η^{i+1} - η^i) - [ρ(y^{i+1} - η^{i+1}) - ∇F*(y^{i+1}) + Kū^{i+1}]`
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SemiImplicitResidual {
    pub r_zeta: f64,
    pub r_eta: f64,
    /// Sum of the norms of the terms entering `r_zeta`.
    pub zeta_scale: f64,
    pub eta_scale: f64,
}

impl SemiImplicitResidual {
    /// `max(r_zeta/zeta_scale, r_eta/eta_scale)`, taking `0/0 = 0`.
    pub fn relative(&self) -> f64 {
        let rel = |r: f64, s: f64| if r == 0.0 { 0.0 } else { r / s };
        rel(self.r_zeta, self.zeta_scale).max(rel(self.r_eta, self.eta_scale))
    }
}

pub fn semi_implicit_residual(
    problem: &SaddleProblem,
    before: &IcpdpsIterState,
    after: &IcpdpsIterState,
    params: &IcpdpsParamState,
    params_next: &IcpdpsParamState,
) -> Result<SemiImplicitResidual> {
    let (wi, wn) = (&params.weights, &params_next.weights);
    let zeta_rate = wi.big_phi / (wi.theta * params.lambda);
    let eta_rate = wn.big_psi / (wn.theta * params_next.lambda);

    let lhs = (&after.zeta - &before.zeta) * zeta_rate;
    let damp = (&after.x - &after.zeta) * params.gamma;
    let grad = problem.g.gradient(&after.x)?;
    let coupling = problem.k.adjoint_apply(&before.eta)?;
    let r_zeta = (&lhs - (&damp - &grad - &coupling)).norm();
    let zeta_scale = lhs.norm() + damp.norm() + grad.norm() + coupling.norm();

    let lhs = (&after.eta - &before.eta) * eta_rate;
    let damp = (&after.y - &after.eta) * params.rho;
    let grad = problem.f_star.gradient(&after.y)?;
    let coupling = problem.k.apply(&after.u_bar)?;
    let r_eta = (&lhs - (&damp - &grad + &coupling)).norm();
    let eta_scale = lhs.norm() + damp.norm() + grad.norm() + coupling.norm();

    Ok(SemiImplicitResidual {
        r_zeta,
        r_eta,
        zeta_scale,
        eta_scale,
    })
}

/// `|ω_i - (λ_i/λ_{i+1} - λ_i)|` for a stepped parameter state.
pub fn omega_identity_residual(params_next: &IcpdpsParamState) -> Option<f64> {
    let t = params_next.transition?;
    Some((t.omega - (t.lambda_prev / params_next.lambda - t.lambda_prev)).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::icpdps_param_init;
    use crate::saddle::{quadratic1d, quadratic_nd};
    use approx::assert_relative_eq;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn nag_first_step() {
        let p = quadratic1d().unwrap();
        let s0 = NagIterState::new(v(&[1.0]), 1.0).unwrap();
        let s1 = nag_step(&p, &s0, 0.1).unwrap();
        assert_relative_eq!(s1.x[0], 0.9, max_relative = 1e-15);
        assert_relative_eq!(s1.z[0], 0.9, max_relative = 1e-15);
        // λ₀ = 1 kills the momentum term.
        assert_relative_eq!(s1.x_bar[0], 0.9, max_relative = 1e-15);
        assert_relative_eq!(s1.lambda, 2.0 / (1.0 + 5f64.sqrt()), max_relative = 1e-15);
    }

    #[test]
    fn nag_fixed_point_and_descent() {
        let p = quadratic1d().unwrap();
        let run = nag_run(&p, v(&[0.0]), 1.0, 0.1, 10).unwrap();
        assert!(run.iter().all(|s| s.x[0] == 0.0 && s.z[0] == 0.0));

        let nd = quadratic_nd(5, 5, 9).unwrap();
        let lipschitz = 3.0;
        let run = nag_run(&nd, Vector::from_element(5, 1.0), 1.0, 1.0 / lipschitz, 100).unwrap();
        for pair in run.windows(2) {
            let after = nd.g.evaluate(&pair[1].x).unwrap();
            let before = nd.g.evaluate(&pair[0].x_bar).unwrap();
            assert!(after <= before + 1e-15);
        }
    }

    #[test]
    fn nag_auxiliary_reconstruction() {
        let p = quadratic1d().unwrap();
        let run = nag_run(&p, v(&[1.0]), 0.5, 0.01, 200).unwrap();
        for pair in run.windows(2) {
            let inv = 1.0 / pair[0].lambda;
            let z = &pair[1].x * inv - &pair[0].x * (inv - 1.0);
            assert!((z - &pair[1].z).norm() <= 1e-12 * (1.0 + pair[1].z.norm()));
        }
    }

    #[test]
    fn cp_examples() {
        let p = quadratic1d().unwrap();
        let out = cp_step(&p, &PrimalDualPoint::from_slices(&[1.0], &[1.0]), 0.5, 0.5, 1.0).unwrap();
        assert_relative_eq!(out.point.x[0], 1.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(out.point.y[0], 5.0 / 9.0, max_relative = 1e-15);
        assert!(!out.step_condition_violated);
        let zero = PrimalDualPoint::zeros(1, 1);
        assert_eq!(cp_step(&p, &zero, 0.5, 0.5, 1.0).unwrap().point, zero);
        assert!(cp_step(&p, &zero, 2.0, 2.0, 1.0).unwrap().step_condition_violated);
        assert!(cp_step(&p, &zero, 0.5, 0.5, 1.5).is_err());
    }

    #[test]
    fn extrapolation_beats_pdhg() {
        let p = quadratic1d().unwrap();
        let hat = PrimalDualPoint::zeros(1, 1);
        let mut cp = PrimalDualPoint::from_slices(&[1.0], &[1.0]);
        let mut pdhg = cp.clone();
        for _ in 0..500 {
            cp = cp_step(&p, &cp, 0.5, 0.5, 1.0).unwrap().point;
            pdhg = cp_step(&p, &pdhg, 0.5, 0.5, 0.0).unwrap().point;
        }
        assert!(pdhg.distance(&hat) > cp.distance(&hat));
    }

    #[test]
    fn icpdps_first_step_matches_hand_values() {
        let p = quadratic1d().unwrap();
        let params = icpdps_param_init(1.0, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let start = IcpdpsIterState::new(v(&[1.0]), v(&[1.0]));
        let (it, next) = icpdps_step(&p, &start, &params).unwrap();
        assert_eq!(it.x_hat[0], 1.0);
        assert_eq!(it.x[0], 0.0);
        assert_eq!(it.zeta[0], 0.0);
        assert_relative_eq!(it.u_bar[0], -1.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(it.y_hat[0], 1.0, max_relative = 1e-15);
        assert_relative_eq!(it.y[0], 0.5, max_relative = 1e-15);
        assert_relative_eq!(it.eta[0], 1.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(next.lambda, 0.75, max_relative = 1e-15);
    }

    #[test]
    fn icpdps_fixed_point() {
        let p = quadratic_nd(5, 5, 1).unwrap();
        let params = icpdps_param_init(1.0, 1.0, p.k_norm().unwrap(), 1.0 / p.k_norm().unwrap(), 1.0, 1.0).unwrap();
        let run = icpdps_run(&p, IcpdpsIterState::new(Vector::zeros(5), Vector::zeros(5)), params, 50).unwrap();
        assert!(run.iterates.iter().all(|s| s.x.norm() == 0.0 && s.y.norm() == 0.0 && s.zeta.norm() == 0.0));
        assert_eq!(run.params.len(), 52);
        for i in 0..run.steps() {
            let r = semi_implicit_residual(&p, &run.iterates[i], &run.iterates[i + 1], &run.params[i], &run.params[i + 1]).unwrap();
            assert_eq!((r.r_zeta, r.r_eta), (0.0, 0.0));
        }
    }

    #[test]
    fn icpdps_semi_implicit_form_and_omega() {
        for (g, r) in [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)] {
            let p = quadratic_nd(5, 5, 4).unwrap();
            let k = p.k_norm().unwrap();
            let params = icpdps_param_init(1.0, 1.0, k, 1.0 / k, g, r).unwrap();
            let start = IcpdpsIterState::new(Vector::from_element(5, 1.0), Vector::from_element(5, -1.0));
            let run = icpdps_run(&p, start, params, 300).unwrap();
            for i in 0..run.steps() {
                let res = semi_implicit_residual(&p, &run.iterates[i], &run.iterates[i + 1], &run.params[i], &run.params[i + 1]).unwrap();
                assert!(res.relative() <= 1e-10, "({g},{r}) step {i}: {res:?}");
                assert!(omega_identity_residual(&run.params[i + 1]).unwrap() <= 1e-12);
            }
            assert!(reconstruction_residual(&run) <= 1e-12);
        }
    }

    #[test]
    fn corrupted_step_is_detected() {
        let p = quadratic1d().unwrap();
        let params = icpdps_param_init(1.0, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let run = icpdps_run(&p, IcpdpsIterState::new(v(&[1.0]), v(&[1.0])), params, 5).unwrap();
        let mut bad = run.iterates[3].clone();
        bad.zeta[0] += 1e-3;
        let res = semi_implicit_residual(&p, &run.iterates[2], &bad, &run.params[2], &run.params[3]).unwrap();
        assert!(res.r_zeta >= 1e-4);
    }

    #[test]
    fn icpdps_converges() {
        let p = quadratic1d().unwrap();
        let params = icpdps_param_init(1.0, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let run = icpdps_run(&p, IcpdpsIterState::new(v(&[1.0]), v(&[1.0])), params, 100).unwrap();
        assert!(run.iterates.last().unwrap().point().norm() < 1e-10);
    }
}
