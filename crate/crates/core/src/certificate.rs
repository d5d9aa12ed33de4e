//! Descent certificate of the inertial corrected primal-dual method on
//! smooth problems: the metric `Υ_{i+1}`, the gap terms `V^{i+1}(û)`, the
//! telescoped descent inequality and its gap-unrolled form.
//!
//! Weights are carried as mantissas with a power-of-two exponent `e`; every
//! product `weight · ‖v‖²` is formed after scaling `v` by `2^⌊e/2⌋`, so the
//! reported sums are true values even when the weights alone overflow.

use crate::error::{Error, Result};
use crate::params::{IcpdpsParamState, Weights};
use crate::saddle::{ldexp, shifted_gap_parts_scaled, shifted_gradients, LinearMap, PrimalDualPoint, SaddleProblem, Vector};
use crate::solvers::IcpdpsRun;

/// `Υ = [[a I, -c Kᵀ], [-c K, b I]] · 2^exp2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpsilonBlock {
    /// `Φ_i = φ_iλ_i²`.
    pub primal: f64,
    /// `Ψ_{i+1} = ψ_{i+1}λ_{i+1}²`.
    pub dual: f64,
    /// `λ_iΘ_i = λ_iφ_iτ_i`.
    pub coupling: f64,
    pub exp2: i32,
}

impl UpsilonBlock {
    /// Metric of the transition `i → i + 1`.
    pub fn between(params: &IcpdpsParamState, params_next: &IcpdpsParamState) -> Self {
        let wi = params.weights;
        let wn: Weights = params_next.weights.in_frame(wi.exp2);
        UpsilonBlock {
            primal: wi.big_phi,
            dual: wn.big_psi,
            coupling: params.lambda * wi.theta,
            exp2: wi.exp2,
        }
    }

    /// Smallest eigenvalue (mantissa) for an operator of norm `k_norm`:
    /// `(a+b)/2 - √(((a-b)/2)² + c²‖K‖²)`, written without cancellation.
    pub fn min_eigenvalue(&self, k_norm: f64) -> f64 {
        let (a, b, c) = (self.primal, self.dual, self.coupling * k_norm);
        let half_diff = 0.5 * (a - b);
        let root = (half_diff * half_diff + c * c).sqrt();
        (a * b - c * c) / (0.5 * (a + b) + root)
    }

    /// Trace (mantissa) on `R^n × R^m`.
    pub fn trace(&self, n: usize, m: usize) -> f64 {
        n as f64 * self.primal + m as f64 * self.dual
    }

    pub fn is_psd(&self, k_norm: f64, n: usize, m: usize) -> bool {
        self.min_eigenvalue(k_norm) >= -1e-10 * self.trace(n, m)
    }

    /// The explicit matrix (mantissa), for small problems.
    pub fn matrix(&self, k: &LinearMap) -> crate::saddle::Matrix {
        let (n, m) = (k.cols(), k.rows());
        let mut out = crate::saddle::Matrix::zeros(n + m, n + m);
        out.view_mut((0, 0), (n, n)).fill_diagonal(self.primal);
        out.view_mut((n, n), (m, m)).fill_diagonal(self.dual);
        let off = k.matrix() * (-self.coupling);
        out.view_mut((n, 0), (m, n)).copy_from(&off);
        out.view_mut((0, n), (n, m)).copy_from(&off.transpose());
        out
    }

    /// `‖(vx, vy)‖²_Υ` as a true value.
    pub fn norm_squared(&self, k: &LinearMap, vx: &Vector, vy: &Vector) -> Result<f64> {
        let (h, r) = split_exponent(self.exp2);
        let vx = scale(vx, h);
        let vy = scale(vy, h);
        let cross = k.apply(&vx)?.dot(&vy);
        let m = self.primal * vx.norm_squared() - 2.0 * self.coupling * cross + self.dual * vy.norm_squared();
        Ok(ldexp(m, r))
    }
}

fn split_exponent(e: i32) -> (i32, i32) {
    (e.div_euclid(2), e.rem_euclid(2))
}

fn scale(v: &Vector, e: i32) -> Vector {
    v.map(|x| ldexp(x, e))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DescentCertificate {
    /// `Υ_1, …, Υ_{N+1}`.
    pub upsilon: Vec<UpsilonBlock>,
    /// `V^1(û), …, V^N(û)`.
    pub gap_terms: Vec<f64>,
    /// Left side of the descent inequality for each `N = 0, …, N`.
    pub lhs: Vec<f64>,
    /// `½‖z⁰ - û‖²_{Υ₁}`.
    pub rhs: f64,
    /// `C₀(û) = Θ₁(1-λ₁)(F̄*(y⁰;ŷ) - F*(ŷ)) + Θ₀(1-λ₀)(Ḡ(x⁰;x̂) - G(x̂))`.
    pub c0_hat: f64,
    /// Left side of the gap-unrolled inequality for each `N ≥ 1` (entry 0
    /// repeats `lhs[0]`).
    pub unrolled_lhs: Vec<f64>,
    /// `min(Θ_{N-1}, Θ_N) · (shifted gap at N)` for each `N ≥ 1` (entry 0 is 0).
    pub weighted_gap: Vec<f64>,
    /// `min_eigenvalue / trace` of each `Υ`.
    pub psd_ratio: Vec<f64>,
}

impl DescentCertificate {
    /// Smallest `(rhs - lhs_N)`, relative to `rhs` when `rhs > 0`.
    pub fn worst_margin(&self) -> f64 {
        relative_margin(self.rhs, &self.lhs)
    }

    pub fn worst_unrolled_margin(&self) -> f64 {
        relative_margin(self.rhs + self.c0_hat, &self.unrolled_lhs)
    }

    pub fn worst_nonergodic_margin(&self) -> f64 {
        relative_margin(self.rhs + self.c0_hat, &self.weighted_gap)
    }

    pub fn worst_psd_ratio(&self) -> f64 {
        self.psd_ratio.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn all_psd(&self) -> bool {
        self.worst_psd_ratio() >= -1e-10
    }

    /// Descent, unrolled and nonergodic inequalities within `rel_tol`, and
    /// every metric positive semidefinite.
    pub fn holds(&self, rel_tol: f64) -> bool {
        self.worst_margin() >= -rel_tol
            && self.worst_unrolled_margin() >= -rel_tol
            && self.worst_nonergodic_margin() >= -rel_tol
            && self.all_psd()
    }
}

fn relative_margin(bound: f64, values: &[f64]) -> f64 {
    let worst = values.iter().map(|v| bound - v).fold(f64::INFINITY, f64::min);
    if bound > 0.0 {
        worst / bound
    } else {
        worst
    }
}

/// Shifted gap parts `(Ḡ(x;x̂) - G(x̂), F̄*(y;ŷ) - F*(ŷ))` of `u`, each
/// multiplied by a weight given as mantissa and exponent.
fn weighted_gap_parts(
    problem: &SaddleProblem,
    u: &PrimalDualPoint,
    u_hat: &PrimalDualPoint,
    gamma: f64,
    rho: f64,
    primal_weight: f64,
    dual_weight: f64,
    exp2: i32,
) -> Result<(f64, f64)> {
    let (h, r) = split_exponent(exp2);
    let (g, f) = shifted_gap_parts_scaled(problem, u, u_hat, gamma, rho, h)?;
    Ok((ldexp(primal_weight * g, r), ldexp(dual_weight * f, r)))
}

/// Evaluates the certificate over a run. `run.params` must extend one index
/// past the last iterate, as [`crate::solvers::icpdps_run`] produces.
pub fn evaluate_certificate(
    problem: &SaddleProblem,
    run: &IcpdpsRun,
    u_hat: &PrimalDualPoint,
) -> Result<DescentCertificate> {
    if !problem.is_smooth() {
        return Err(Error::UnsupportedOracle {
            operation: "evaluate_certificate",
            piece: "l1",
        });
    }
    problem.check_dims(u_hat)?;
    let steps = run.steps();
    if run.params.len() < steps + 2 {
        return Err(Error::DimensionMismatch(format!(
            "certificate over {steps} steps needs {} parameter states, got {}",
            steps + 2,
            run.params.len()
        )));
    }
    let k = &problem.k;
    let k_norm = problem.k_norm()?;
    let (n, m) = (problem.primal_dim(), problem.dual_dim());
    let gamma = run.params[0].gamma;
    let rho = run.params[0].rho;

    let upsilon: Vec<UpsilonBlock> = (0..=steps)
        .map(|i| UpsilonBlock::between(&run.params[i], &run.params[i + 1]))
        .collect();
    let psd_ratio = upsilon
        .iter()
        .map(|u| u.min_eigenvalue(k_norm) / u.trace(n, m))
        .collect();

    let dist = |i: usize| -> (Vector, Vector) {
        let it = &run.iterates[i];
        (&it.zeta - &u_hat.x, &it.eta - &u_hat.y)
    };
    let (dx0, dy0) = dist(0);
    let rhs = 0.5 * upsilon[0].norm_squared(k, &dx0, &dy0)?;

    let p0 = &run.params[0];
    let p1 = &run.params[1];
    let w1 = p1.weights.in_frame(p0.weights.exp2);
    let (g0, f0) = weighted_gap_parts(
        problem,
        &run.iterates[0].point(),
        u_hat,
        gamma,
        rho,
        p0.weights.theta * (1.0 - p0.lambda),
        w1.theta * (1.0 - p1.lambda),
        p0.weights.exp2,
    )?;
    let c0_hat = g0 + f0;

    let mut gap_terms = Vec::with_capacity(steps);
    let mut lhs = Vec::with_capacity(steps + 1);
    let mut unrolled_lhs = Vec::with_capacity(steps + 1);
    let mut weighted_gap = Vec::with_capacity(steps + 1);
    lhs.push(rhs);
    unrolled_lhs.push(rhs);
    weighted_gap.push(0.0);

    let mut gap_sum = 0.0;
    let mut increment_sum = 0.0;
    for i in 0..steps {
        let (before, after) = (&run.iterates[i], &run.iterates[i + 1]);
        let (pi, pn) = (&run.params[i], &run.params[i + 1]);
        let e = pi.weights.exp2;
        let wn = pn.weights.in_frame(e);
        let (h, r) = split_exponent(e);

        let grads = shifted_gradients(problem, &after.point(), u_hat, gamma, rho)?;
        let primal = scale(&grads.x, h).dot(&scale(&(&after.zeta - &u_hat.x), h));
        let dual = scale(&grads.y, h).dot(&scale(&(&after.eta - &u_hat.y), h));
        let v = ldexp(pi.lambda * pi.weights.theta * primal + pn.lambda * wn.theta * dual, r);
        gap_terms.push(v);
        gap_sum += v;

        let step = &upsilon[i];
        let dzx = &after.zeta - &before.zeta;
        let dzy = &after.eta - &before.eta;
        increment_sum += 0.5 * step.norm_squared(k, &dzx, &dzy)?;

        let (dx, dy) = dist(i + 1);
        let terminal = 0.5 * upsilon[i + 1].norm_squared(k, &dx, &dy)?;
        lhs.push(terminal + gap_sum + increment_sum);

        // Θ_{N-1} g_N + Θ_N f_N with N = i + 1.
        let (g, f) = weighted_gap_parts(problem, &after.point(), u_hat, gamma, rho, pi.weights.theta, wn.theta, e)?;
        unrolled_lhs.push(g + f + terminal + increment_sum);
        let min_weight = pi.weights.theta.min(wn.theta);
        let (g, f) = weighted_gap_parts(problem, &after.point(), u_hat, gamma, rho, min_weight, min_weight, e)?;
        weighted_gap.push(g + f);
    }

    Ok(DescentCertificate {
        upsilon,
        gap_terms,
        lhs,
        rhs,
        c0_hat,
        unrolled_lhs,
        weighted_gap,
        psd_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::icpdps_param_init;
    use crate::saddle::{lasso_demo, quadratic1d, quadratic_nd, Matrix};
    use crate::solvers::{icpdps_run, IcpdpsIterState};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn run_on(problem: &SaddleProblem, gamma: f64, rho: f64, x0: f64, y0: f64, steps: usize) -> IcpdpsRun {
        let k = problem.k_norm().unwrap();
        let params = icpdps_param_init(1.0, 1.0, k, 1.0 / k, gamma, rho).unwrap();
        let start = IcpdpsIterState::new(
            Vector::from_element(problem.primal_dim(), x0),
            Vector::from_element(problem.dual_dim(), y0),
        );
        icpdps_run(problem, start, params, steps).unwrap()
    }

    #[test]
    fn min_eigenvalue_matches_dense_oracle() {
        let p = quadratic_nd(5, 5, 2).unwrap();
        for (a, b, c) in [(1.0, 1.0, 0.5), (3.0, 0.2, 0.7), (2.0, 2.0, 0.0), (1.0, 4.0, 2.0)] {
            let block = UpsilonBlock { primal: a, dual: b, coupling: c / p.k_norm().unwrap(), exp2: 0 };
            let oracle = block.matrix(&p.k).symmetric_eigen().eigenvalues.min();
            assert_relative_eq!(block.min_eigenvalue(p.k_norm().unwrap()), oracle, epsilon = 1e-12);
        }
        // Rectangular K: zero singular values add eigenvalues a and b.
        let k = LinearMap::new(Matrix::from_row_slice(1, 2, &[1.0, 0.0])).with_estimated_norm(1e-12, 100).unwrap();
        let block = UpsilonBlock { primal: 2.0, dual: 1.0, coupling: 1.0, exp2: 0 };
        let oracle = block.matrix(&k).symmetric_eigen().eigenvalues.min();
        assert_relative_eq!(block.min_eigenvalue(1.0), oracle, epsilon = 1e-12);
    }

    #[test]
    fn scaled_norm_matches_plain_norm() {
        let p = quadratic_nd(5, 5, 2).unwrap();
        let vx = Vector::from_fn(5, |i, _| i as f64 - 2.0);
        let vy = Vector::from_fn(5, |i, _| 0.5 * i as f64);
        let plain = UpsilonBlock { primal: 3.0, dual: 2.0, coupling: 0.4, exp2: 0 };
        let dense = plain.matrix(&p.k);
        let mut v = Vector::zeros(10);
        v.rows_mut(0, 5).copy_from(&vx);
        v.rows_mut(5, 5).copy_from(&vy);
        let oracle = v.dot(&(&dense * &v));
        assert_relative_eq!(plain.norm_squared(&p.k, &vx, &vy).unwrap(), oracle, max_relative = 1e-13);
        for e in [-7, 1, 600, 1001] {
            let shifted = UpsilonBlock { exp2: e, ..plain };
            let vx = vx.map(|x| ldexp(x, -e / 2));
            let vy = vy.map(|x| ldexp(x, -e / 2));
            let expected = ldexp(oracle, e - 2 * (e / 2));
            assert_relative_eq!(shifted.norm_squared(&p.k, &vx, &vy).unwrap(), expected, max_relative = 1e-13);
        }
    }

    #[test]
    fn stationary_run_is_zero() {
        let p = quadratic1d().unwrap();
        let run = run_on(&p, 1.0, 1.0, 0.0, 0.0, 20);
        let cert = evaluate_certificate(&p, &run, &PrimalDualPoint::zeros(1, 1)).unwrap();
        assert!(cert.gap_terms.iter().all(|v| *v == 0.0));
        assert!(cert.lhs.iter().all(|v| *v == 0.0));
        assert_eq!(cert.rhs, 0.0);
        assert!(cert.holds(1e-9));
    }

    #[test]
    fn descent_inequality_on_quadratics() {
        let nd = quadratic_nd(5, 5, 5).unwrap();
        let q1 = quadratic1d().unwrap();
        for p in [&q1, &nd] {
            let hat = p.saddle_point().unwrap();
            for (g, r) in [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)] {
                let run = run_on(p, g, r, 1.0, -0.5, 1000);
                let cert = evaluate_certificate(p, &run, &hat).unwrap();
                assert_eq!(cert.lhs.len(), 1001);
                assert_eq!(cert.upsilon.len(), 1001);
                assert!(cert.worst_margin() >= -1e-9, "{} ({g},{r}) {}", p.name, cert.worst_margin());
                assert!(cert.worst_unrolled_margin() >= -1e-9, "{} ({g},{r})", p.name);
                assert!(cert.worst_nonergodic_margin() >= -1e-9, "{} ({g},{r})", p.name);
                assert!(cert.all_psd(), "{} ({g},{r})", p.name);
                assert!(cert.rhs > 0.0 && cert.lhs.iter().all(|v| v.is_finite()));
            }
        }
    }

    #[test]
    fn corrupted_history_breaks_the_certificate() {
        let p = quadratic1d().unwrap();
        let mut run = run_on(&p, 1.0, 1.0, 1.0, 1.0, 30);
        run.iterates[10].zeta[0] += 10.0;
        let cert = evaluate_certificate(&p, &run, &PrimalDualPoint::zeros(1, 1)).unwrap();
        assert!(cert.worst_margin() < -1e-9);
    }

    #[test]
    fn nonsmooth_is_refused() {
        let p = lasso_demo(1).unwrap();
        let params = icpdps_param_init(1.0, 1.0, p.k_norm().unwrap(), 1.0 / p.k_norm().unwrap(), 0.0, 1.0).unwrap();
        let run = icpdps_run(&p, IcpdpsIterState::new(Vector::zeros(8), Vector::zeros(6)), params, 2).unwrap();
        assert!(matches!(
            evaluate_certificate(&p, &run, &PrimalDualPoint::zeros(8, 6)),
            Err(Error::UnsupportedOracle { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn certificate_holds_from_random_starts(seed in 0u64..500, gamma in 0.0..1.0f64, rho in 0.0..1.0f64,
                                                start in proptest::collection::vec(-5.0..5.0f64, 20)) {
            let p = quadratic_nd(5, 5, seed).unwrap();
            let k = p.k_norm().unwrap();
            let params = icpdps_param_init(1.0, 1.0, k, 1.0 / k, gamma, rho).unwrap();
            let it = IcpdpsIterState::with_auxiliary(
                Vector::from_column_slice(&start[0..5]), Vector::from_column_slice(&start[5..10]),
                Vector::from_column_slice(&start[10..15]), Vector::from_column_slice(&start[15..20]));
            let run = icpdps_run(&p, it, params, 200).unwrap();
            let cert = evaluate_certificate(&p, &run, &PrimalDualPoint::zeros(5, 5)).unwrap();
            prop_assert!(cert.holds(1e-9), "margins {} {} {}", cert.worst_margin(), cert.worst_unrolled_margin(), cert.worst_psd_ratio());
        }
    }
}
