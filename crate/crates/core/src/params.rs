//! Parameter sequences: the Nesterov λ-recursion and the step sizes and
//! weights of the inertial corrected primal-dual method.
//!
//! The weights `φ, ψ, Φ, Ψ, Θ` grow exponentially when both convexity
//! constants are positive. They are stored as mantissas sharing one
//! power-of-two exponent (see [`Weights`]) so that long runs stay finite; the
//! step sizes `τ, σ, λ` are ratios of weights and are stored directly.

use std::io::Write;

use crate::error::{Error, Result};
use crate::saddle::ldexp;

/// Values larger than this are refused when materialized.
pub const GROWTH_CAP: f64 = 1e300;

/// Relative tolerance of the per-step cross-check between the raw and the
/// integrated parameter forms.
pub const DRIFT_TOL: f64 = 1e-9;

/// Renormalize when the Θ mantissa exceeds `2^RENORM_BITS`.
const RENORM_BITS: i32 = 256;

pub fn nag_lambda_next(lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
    }
    let inv = 1.0 / lambda;
    Ok(1.0 / (0.5 + (inv * inv + 0.25).sqrt()))
}

/// `(2/(i + 2/λ₀ + C), 2/(i + 2/λ₀))` with `C = λ₀/4 + ½ ln(1 + λ₀ i/2)`.
pub fn nag_lambda_bounds(lambda0: f64, i: usize) -> Result<(f64, f64)> {
    if !(lambda0 > 0.0) || !lambda0.is_finite() {
        return Err(Error::Domain(format!("lambda0 must be positive, got {lambda0}")));
    }
    let i = i as f64;
    let c = lambda0 / 4.0 + 0.5 * (1.0 + lambda0 * i / 2.0).ln();
    let base = i + 2.0 / lambda0;
    Ok((2.0 / (base + c), 2.0 / base))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NagParamState {
    pub lambda: f64,
    pub index: usize,
}

impl NagParamState {
    pub fn new(lambda0: f64) -> Result<Self> {
        if !(lambda0 > 0.0) || !lambda0.is_finite() {
            return Err(Error::Domain(format!("lambda0 must be positive, got {lambda0}")));
        }
        Ok(NagParamState {
            lambda: lambda0,
            index: 0,
        })
    }

    pub fn next(&self) -> Result<Self> {
        Ok(NagParamState {
            lambda: nag_lambda_next(self.lambda)?,
            index: self.index + 1,
        })
    }
}

/// `λ₀, …, λ_{count-1}`.
pub fn nag_lambda_sequence(lambda0: f64, count: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(count);
    let mut state = NagParamState::new(lambda0)?;
    for _ in 0..count {
        out.push(state.lambda);
        state = state.next()?;
    }
    Ok(out)
}

/// Weights of one parameter state, each equal to `mantissa · 2^exp2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Weights {
    pub phi: f64,
    pub psi: f64,
    /// `Φ = φλ²`, carried by its own recurrence.
    pub big_phi: f64,
    /// `Ψ = ψλ²`.
    pub big_psi: f64,
    /// `Θ = φτ`.
    pub theta: f64,
    /// `Φ_{i+1} - 2γΘ_i`, the same for every index of a history.
    pub phi_offset: f64,
    /// `Ψ_{i+1} - 2ρΘ_i`, likewise constant.
    pub psi_offset: f64,
    pub exp2: i32,
}

impl Weights {
    /// The same weights expressed with exponent `exp2`.
    pub fn in_frame(&self, exp2: i32) -> Weights {
        let shift = self.exp2 - exp2;
        Weights {
            phi: ldexp(self.phi, shift),
            psi: ldexp(self.psi, shift),
            big_phi: ldexp(self.big_phi, shift),
            big_psi: ldexp(self.big_psi, shift),
            theta: ldexp(self.theta, shift),
            phi_offset: ldexp(self.phi_offset, shift),
            psi_offset: ldexp(self.psi_offset, shift),
            exp2,
        }
    }

    fn renormalized(self) -> Weights {
        if self.theta > ldexp(1.0, RENORM_BITS) {
            // Exact: only the exponents change.
            let shift = self.theta.log2().floor() as i32;
            self.in_frame(self.exp2 + shift)
        } else {
            self
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.phi, self.psi, self.big_phi, self.big_psi, self.theta]
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0)
    }
}

/// Quantities of the transition from index `i` to `i + 1`, stored on the
/// state with index `i + 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    /// `c_i = λ_i²φ_i + 2γφ_iτ_iλ_i`, a mantissa in the frame of state `i`.
    pub c: f64,
    /// `d_i = λ_i²ψ_i + 2ρψ_iσ_iλ_i`, same frame as `c`.
    pub d: f64,
    /// Exponent of the frame `c` and `d` are written in.
    pub exp2: i32,
    /// `λ_i`.
    pub lambda_prev: f64,
    /// `τ_i`.
    pub tau_prev: f64,
    /// `ω_i = λ_iφ_iτ_i / (λ_{i+1}φ_{i+1}τ_{i+1})`.
    pub omega: f64,
    /// `s_i = γτ_i(1/λ_i - 1)`.
    pub s_damp: f64,
    /// `t_{i+1} = ρσ_{i+1}(1/λ_{i+1} - 1)`.
    pub t_damp: f64,
    /// `τ_i / (1 + s_i)`.
    pub tau_tilde: f64,
    /// `σ_{i+1} / (1 + t_{i+1})`.
    pub sigma_tilde: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IcpdpsParamState {
    pub index: usize,
    pub tau: f64,
    pub sigma: f64,
    pub lambda: f64,
    pub weights: Weights,
    pub alpha: f64,
    pub gamma: f64,
    pub rho: f64,
    pub k_norm: f64,
    pub transition: Option<Transition>,
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::Domain(format!("{name} must be positive and finite, got {v}")));
    }
    Ok(())
}

fn check_nonnegative(name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0) || !v.is_finite() {
        return Err(Error::Domain(format!("{name} must be >= 0 and finite, got {v}")));
    }
    Ok(())
}

/// Validates `0 < α ≤ 1/‖K‖`, allowing rounding in `α = 1/‖K‖`.
pub fn check_alpha(alpha: f64, k_norm: f64) -> Result<()> {
    check_positive("operator norm", k_norm)?;
    if !(alpha > 0.0) || alpha * k_norm > 1.0 + 1e-12 {
        return Err(Error::config(
            "alpha",
            format!(
                "must satisfy 0 < alpha <= 1/‖K‖ = {}, got {alpha}",
                1.0 / k_norm
            ),
        ));
    }
    Ok(())
}

/// Initial parameters with `λ₀ = α‖K‖` and `τ₀ = λ₀α√(ψ₀/φ₀)`, so that
/// `λ₀ = √(φ₀/ψ₀)τ₀/α`. With `α = 1/‖K‖` this gives `λ₀ = 1` and
/// `‖K‖²Θ₀² = Φ₀Ψ₀`.
pub fn icpdps_param_init(
    phi0: f64,
    psi0: f64,
    k_norm: f64,
    alpha: f64,
    gamma: f64,
    rho: f64,
) -> Result<IcpdpsParamState> {
    check_positive("phi0", phi0)?;
    check_positive("psi0", psi0)?;
    check_alpha(alpha, k_norm)?;
    check_nonnegative("gamma", gamma)?;
    check_nonnegative("rho", rho)?;
    let lambda = (alpha * k_norm).min(1.0);
    let tau = lambda * alpha * (psi0 / phi0).sqrt();
    let sigma = phi0 * tau / psi0;
    let theta = phi0 * tau;
    let big_phi = phi0 * lambda * lambda;
    let big_psi = psi0 * lambda * lambda;
    Ok(IcpdpsParamState {
        index: 0,
        tau,
        sigma,
        lambda,
        weights: Weights {
            phi: phi0,
            psi: psi0,
            big_phi,
            big_psi,
            theta,
            phi_offset: big_phi - 2.0 * gamma * (1.0 - lambda) * theta,
            psi_offset: big_psi - 2.0 * rho * (1.0 - lambda) * theta,
            exp2: 0,
        },
        alpha,
        gamma,
        rho,
        k_norm,
        transition: None,
    })
}

fn rel_diff(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Advances the parameters by one step.
///
/// The raw sequences follow the closed-form updates for `τ, φ, ψ, λ, σ`;
/// `Φ, Ψ, Θ` follow their own first-order recurrences and the two are
/// compared every step ([`DRIFT_TOL`]).
///
/// The stored `λ_{i+1}` is evaluated as
/// `1/(1 + 1/(α√((P/Θ_i + 2γ)(Q/Θ_i + 2ρ))))` with the constant offsets
/// `P = Φ_{i+1} - 2γΘ_i`, `Q = Ψ_{i+1} - 2ρΘ_i`. Each floating-point operation
/// in it is monotone in `Θ_i`, so the computed sequence never increases when
/// `P, Q ≥ 0` (the case `λ₀ = 1`). The direct formula `√(c_i/d_i)τ_{i+1}/α`
/// agrees to rounding but jitters by an ulp once `λ` settles.
pub fn icpdps_param_step(state: &IcpdpsParamState) -> Result<IcpdpsParamState> {
    let IcpdpsParamState {
        tau,
        sigma,
        lambda,
        weights: w,
        alpha,
        gamma,
        rho,
        ..
    } = *state;
    let index = state.index + 1;

    let theta_raw = w.phi * tau;
    let c = lambda * lambda * w.phi + 2.0 * gamma * theta_raw * lambda;
    let d = lambda * lambda * w.psi + 2.0 * rho * w.psi * sigma * lambda;
    let tau_next = d * alpha * alpha / ((c * d).sqrt() * alpha + theta_raw);
    let phi_next = d * alpha * alpha / (tau_next * tau_next);
    let psi_next = d * d * alpha * alpha / (c * tau_next * tau_next);
    let lambda_raw = (c / d).sqrt() * tau_next / alpha;
    let sigma_next = tau_next * c / d;

    let big_phi = w.big_phi + 2.0 * gamma * lambda * w.theta;
    let big_psi = w.big_psi + 2.0 * rho * lambda * w.theta;
    let a = alpha * (big_phi * big_psi).sqrt();
    let theta = w.theta + a;
    let lambda_integrated = a / theta;
    let spread = alpha
        * ((w.phi_offset / w.theta + 2.0 * gamma) * (w.psi_offset / w.theta + 2.0 * rho)).sqrt();
    let lambda_next = 1.0 / (1.0 + 1.0 / spread);

    let checks = [
        ("Phi", rel_diff(big_phi, phi_next * lambda_next * lambda_next)),
        ("Psi", rel_diff(big_psi, psi_next * lambda_next * lambda_next)),
        ("Theta", rel_diff(theta, phi_next * tau_next)),
        ("lambda", rel_diff(lambda_integrated, lambda_next)),
        ("lambda (direct)", rel_diff(lambda_raw, lambda_next)),
    ];
    for (quantity, relative) in checks {
        if !(relative <= DRIFT_TOL) {
            return Err(Error::Drift {
                quantity,
                index,
                relative,
            });
        }
    }
    if !(lambda_next > 0.0) || !tau_next.is_finite() || !sigma_next.is_finite() {
        return Err(Error::Domain(format!(
            "step {index} produced lambda={lambda_next}, tau={tau_next}, sigma={sigma_next}"
        )));
    }

    let s_damp = gamma * tau * (1.0 / lambda - 1.0);
    let t_damp = rho * sigma_next * (1.0 / lambda_next - 1.0);
    let omega = lambda * theta_raw / (lambda_next * phi_next * tau_next);

    let weights = Weights {
        phi: phi_next,
        psi: psi_next,
        big_phi,
        big_psi,
        theta,
        phi_offset: w.phi_offset,
        psi_offset: w.psi_offset,
        exp2: w.exp2,
    }
    .renormalized();
    if !weights.is_finite() {
        return Err(Error::Overflow {
            quantity: "parameter weights",
            index,
            limit: f64::MAX,
        });
    }

    Ok(IcpdpsParamState {
        index,
        tau: tau_next,
        sigma: sigma_next,
        lambda: lambda_next,
        weights,
        alpha,
        gamma,
        rho,
        k_norm: state.k_norm,
        transition: Some(Transition {
            c,
            d,
            exp2: w.exp2,
            lambda_prev: lambda,
            tau_prev: tau,
            omega,
            s_damp,
            t_damp,
            tau_tilde: tau / (1.0 + s_damp),
            sigma_tilde: sigma_next / (1.0 + t_damp),
        }),
    })
}

/// `init` followed by `steps` parameter steps (`steps + 1` states).
pub fn icpdps_param_history(init: IcpdpsParamState, steps: usize) -> Result<Vec<IcpdpsParamState>> {
    let mut out = Vec::with_capacity(steps + 1);
    out.push(init);
    for _ in 0..steps {
        let next = icpdps_param_step(out.last().expect("nonempty"))?;
        out.push(next);
    }
    Ok(out)
}

impl IcpdpsParamState {
    fn materialize(&self, quantity: &'static str, mantissa: f64) -> Result<f64> {
        let v = ldexp(mantissa, self.weights.exp2);
        if !(v.abs() <= GROWTH_CAP) {
            return Err(Error::Overflow {
                quantity,
                index: self.index,
                limit: GROWTH_CAP,
            });
        }
        Ok(v)
    }

    pub fn phi(&self) -> Result<f64> {
        self.materialize("phi", self.weights.phi)
    }

    pub fn psi(&self) -> Result<f64> {
        self.materialize("psi", self.weights.psi)
    }

    pub fn big_phi(&self) -> Result<f64> {
        self.materialize("Phi", self.weights.big_phi)
    }

    pub fn big_psi(&self) -> Result<f64> {
        self.materialize("Psi", self.weights.big_psi)
    }

    pub fn theta(&self) -> Result<f64> {
        self.materialize("Theta", self.weights.theta)
    }

    /// `|λ - √(φ/ψ)τ/α|` and `|λ - α√(ΦΨ)/Θ|`, relative to `λ`.
    pub fn lambda_consistency(&self) -> (f64, f64) {
        let w = &self.weights;
        let raw = (w.phi / w.psi).sqrt() * self.tau / self.alpha;
        let integrated = self.alpha * (w.big_phi * w.big_psi).sqrt() / w.theta;
        (rel_diff(self.lambda, raw), rel_diff(self.lambda, integrated))
    }

    /// `|φτ - ψσ|` relative.
    pub fn coupling_consistency(&self) -> f64 {
        rel_diff(self.weights.phi * self.tau, self.weights.psi * self.sigma)
    }
}

/// Rescaled times `t_i = Σ_{j<i} λ_j` for each state of a history.
pub fn rescaled_times(history: &[IcpdpsParamState]) -> Vec<f64> {
    let mut t = 0.0;
    history
        .iter()
        .map(|p| {
            let here = t;
            t += p.lambda;
            here
        })
        .collect()
}

/// `10 + 24γρ/‖K‖² + (8γΨ₀ + 8ρΦ₀)/(‖K‖²Θ₀)`.
pub fn c0_constant(gamma: f64, rho: f64, k_norm: f64, phi0: f64, psi0: f64, theta0: f64) -> f64 {
    let k2 = k_norm * k_norm;
    10.0 + 24.0 * gamma * rho / k2 + (8.0 * gamma * psi0 + 8.0 * rho * phi0) / (k2 * theta0)
}

/// The constant `C₀` for a history, with `1/α` in the role of `‖K‖`.
pub fn history_c0(history: &[IcpdpsParamState]) -> Option<f64> {
    let first = history.first()?;
    let w = &first.weights;
    Some(c0_constant(
        first.gamma,
        first.rho,
        1.0 / first.alpha,
        w.big_phi,
        w.big_psi,
        w.theta,
    ))
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RecurrenceResiduals {
    /// `(Φ_{i+1} - Φ_i)/λ_i = 2γΘ_i`.
    pub phi: f64,
    /// `(Ψ_{i+1} - Ψ_i)/λ_i = 2ρΘ_i`.
    pub psi: f64,
    /// `(Θ_{i+1} - Θ_i)/λ_{i+1} = Θ_{i+1}`.
    pub theta: f64,
    /// `λ_i = α√(Φ_iΨ_i)/Θ_i`.
    pub lambda: f64,
    /// Stored `Φ, Ψ, Θ` against `φλ², ψλ², φτ` from the raw sequences.
    pub consistency: f64,
}

impl RecurrenceResiduals {
    pub fn max(&self) -> f64 {
        [self.phi, self.psi, self.theta, self.lambda, self.consistency]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

fn residual(lhs: f64, rhs: f64, scale: f64) -> f64 {
    if lhs == rhs {
        0.0
    } else {
        (lhs - rhs).abs() / scale
    }
}

/// Largest relative residuals of the integrated recurrences over a history.
pub fn verify_integrated_recurrences(history: &[IcpdpsParamState]) -> RecurrenceResiduals {
    let mut r = RecurrenceResiduals::default();
    for p in history {
        let w = &p.weights;
        let (_, lambda_res) = p.lambda_consistency();
        r.lambda = r.lambda.max(lambda_res);
        let l2 = p.lambda * p.lambda;
        r.consistency = r
            .consistency
            .max(rel_diff(w.big_phi, w.phi * l2))
            .max(rel_diff(w.big_psi, w.psi * l2))
            .max(rel_diff(w.theta, w.phi * p.tau));
    }
    for pair in history.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let wa = a.weights;
        let wb = b.weights.in_frame(wa.exp2);
        let (l0, l1) = (a.lambda, b.lambda);

        let lhs = (wb.big_phi - wa.big_phi) / l0;
        let rhs = 2.0 * a.gamma * wa.theta;
        r.phi = r.phi.max(residual(lhs, rhs, wb.big_phi.max(wa.big_phi) / l0 + rhs));

        let lhs = (wb.big_psi - wa.big_psi) / l0;
        let rhs = 2.0 * a.rho * wa.theta;
        r.psi = r.psi.max(residual(lhs, rhs, wb.big_psi.max(wa.big_psi) / l0 + rhs));

        let lhs = (wb.theta - wa.theta) / l1;
        r.theta = r.theta.max(residual(lhs, wb.theta, wb.theta / l1));
    }
    r
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub index: usize,
    pub check: &'static str,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegularityReport {
    pub checked: usize,
    pub first_violation: Option<Violation>,
}

impl RegularityReport {
    pub fn passed(&self) -> bool {
        self.first_violation.is_none()
    }
}

/// Checks, for every consecutive pair of a history:
/// `0 < λ_{i+1} ≤ λ_i ≤ 1`, `|λ_{i+1} - λ_i| ≤ (1 + 2C₀)λ_i²` and
/// `|λ_i/λ_{i+1} - 1| ≤ (1 + C₀)λ_i`. All comparisons are exact.
pub fn verify_lambda_regularity(history: &[IcpdpsParamState], c0: f64) -> RegularityReport {
    let mut checked = 0;
    for pair in history.windows(2) {
        let (li, ln) = (pair[0].lambda, pair[1].lambda);
        let index = pair[0].index;
        let tests: [(&'static str, f64, f64); 5] = [
            ("lambda_{i+1} > 0", 0.0, ln),
            ("lambda_{i+1} <= lambda_i", ln, li),
            ("lambda_i <= 1", li, 1.0),
            ("|lambda_{i+1} - lambda_i| <= (1+2C0) lambda_i^2", (ln - li).abs(), (1.0 + 2.0 * c0) * li * li),
            ("|lambda_i/lambda_{i+1} - 1| <= (1+C0) lambda_i", (li / ln - 1.0).abs(), (1.0 + c0) * li),
        ];
        for (check, lhs, rhs) in tests {
            let ok = if check == "lambda_{i+1} > 0" { rhs > lhs } else { lhs <= rhs };
            if !ok {
                return RegularityReport {
                    checked,
                    first_violation: Some(Violation { index, check, lhs, rhs }),
                };
            }
        }
        checked += 1;
    }
    RegularityReport {
        checked,
        first_violation: None,
    }
}

/// `A_i = 1 + 4γρα² + 2α(γΨ_i + ρΦ_i)/√(Φ_iΨ_i)` (with `1/α` for `‖K‖`).
pub fn key_estimate_a(state: &IcpdpsParamState) -> f64 {
    let w = &state.weights;
    let a = state.alpha;
    1.0 + 4.0 * state.gamma * state.rho * a * a
        + 2.0 * a * (state.gamma * w.big_psi + state.rho * w.big_phi) / (w.big_phi * w.big_psi).sqrt()
}

/// `A₀ ≥ 1` and `0 ≤ A_i - 1 ≤ C₀λ_i` for `i ≥ 1`.
pub fn verify_key_estimate(history: &[IcpdpsParamState]) -> RegularityReport {
    let Some(c0) = history_c0(history) else {
        return RegularityReport {
            checked: 0,
            first_violation: None,
        };
    };
    let mut checked = 0;
    for p in history {
        let a = key_estimate_a(p);
        let violation = if p.index == 0 {
            (a < 1.0).then_some(("A_0 >= 1", a, 1.0))
        } else if a - 1.0 < 0.0 {
            Some(("A_i - 1 >= 0", a - 1.0, 0.0))
        } else if a - 1.0 > c0 * p.lambda {
            Some(("A_i - 1 <= C0 lambda_i", a - 1.0, c0 * p.lambda))
        } else {
            None
        };
        if let Some((check, lhs, rhs)) = violation {
            return RegularityReport {
                checked,
                first_violation: Some(Violation {
                    index: p.index,
                    check,
                    lhs,
                    rhs,
                }),
            };
        }
        checked += 1;
    }
    RegularityReport {
        checked,
        first_violation: None,
    }
}

/// `S_i = Θ_i / (α√((Φ₀ + 2γΘ_i)(Ψ₀ + 2ρΘ_i)))`. When `λ₀ = 1` the
/// recurrences telescope to `Φ_{i+1} = Φ₀ + 2γΘ_i`, which gives
/// `λ_{i+1} = 1/(1 + S_i)`.
pub fn s_sequence(history: &[IcpdpsParamState]) -> Vec<f64> {
    let Some(first) = history.first() else {
        return Vec::new();
    };
    let w0 = first.weights;
    history
        .iter()
        .map(|p| {
            let theta = p.weights.in_frame(w0.exp2).theta;
            let phi = w0.big_phi + 2.0 * p.gamma * theta;
            let psi = w0.big_psi + 2.0 * p.rho * theta;
            theta / (p.alpha * (phi * psi).sqrt())
        })
        .collect()
}

/// Checks the four parameter conditions of the descent estimate on a
/// history: `ψ_{i+1}λ_{i+1}² ≥ φ_iτ_i²‖K‖²` (inequality), `φτ = ψσ`,
/// `φ_{i+1}λ_{i+1}² = c_i` and `ψ_{i+1}λ_{i+1}² = d_i`, plus the unrolling
/// condition `φ_iτ_i = (1 - λ_{i+1})φ_{i+1}τ_{i+1}`. Returns the largest
/// relative residual (inequality violations count as residuals).
pub fn verify_step_conditions(history: &[IcpdpsParamState]) -> f64 {
    let mut worst = 0.0_f64;
    for p in history {
        worst = worst.max(p.coupling_consistency());
    }
    for pair in history.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let wa = a.weights;
        let wb = b.weights.in_frame(wa.exp2);
        let lhs = wb.psi * b.lambda * b.lambda;
        let rhs = wa.phi * a.tau * a.tau * a.k_norm * a.k_norm;
        if lhs < rhs {
            worst = worst.max((rhs - lhs) / rhs);
        }
        if let Some(t) = b.transition {
            let scale = ldexp(1.0, t.exp2 - wa.exp2);
            worst = worst.max(rel_diff(wb.phi * b.lambda * b.lambda, t.c * scale));
            worst = worst.max(rel_diff(wb.psi * b.lambda * b.lambda, t.d * scale));
        }
        worst = worst.max(rel_diff(wa.phi * a.tau, (1.0 - b.lambda) * wb.phi * b.tau));
    }
    worst
}

/// Writes `i, lambda, phi, psi, tau, sigma, Phi, Psi, Theta, t_i`.
///
/// Fails with [`Error::Overflow`] if any weight exceeds [`GROWTH_CAP`].
pub fn write_param_csv<W: Write>(history: &[IcpdpsParamState], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["i", "lambda", "phi", "psi", "tau", "sigma", "Phi", "Psi", "Theta", "t_i"])?;
    let times = rescaled_times(history);
    for (p, t) in history.iter().zip(times) {
        let values = [
            p.lambda,
            p.phi()?,
            p.psi()?,
            p.tau,
            p.sigma,
            p.big_phi()?,
            p.big_psi()?,
            p.theta()?,
            t,
        ];
        let mut record = vec![p.index.to_string()];
        record.extend(values.iter().map(|v| crate::harness::csvout::fmt_float(*v)));
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io("parameter csv", e))?;
    Ok(())
}
