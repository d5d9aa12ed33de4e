//! Saddle-point problems `min_x max_y G(x) + <Kx, y> - F*(y)` in finite
//! dimensions, with the oracles every solver and model in this crate needs.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Default relative tolerance for power iteration.
pub const NORM_TOL: f64 = 1e-12;
pub const NORM_MAX_ITERS: usize = 10_000;

/// Dense linear operator `K: R^n -> R^m`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearMap {
    matrix: Matrix,
    norm_cache: Option<f64>,
}

impl LinearMap {
    pub fn new(matrix: Matrix) -> Self {
        LinearMap {
            matrix,
            norm_cache: None,
        }
    }

    /// `k * I` on `R^n`; the norm is known exactly.
    pub fn scaled_identity(n: usize, k: f64) -> Self {
        LinearMap {
            matrix: Matrix::identity(n, n) * k,
            norm_cache: Some(k.abs()),
        }
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn norm(&self) -> Option<f64> {
        self.norm_cache
    }

    pub fn apply(&self, x: &Vector) -> Result<Vector> {
        if x.len() != self.cols() {
            return Err(Error::DimensionMismatch(format!(
                "K has {} columns, got vector of length {}",
                self.cols(),
                x.len()
            )));
        }
        Ok(&self.matrix * x)
    }

    pub fn adjoint_apply(&self, y: &Vector) -> Result<Vector> {
        if y.len() != self.rows() {
            return Err(Error::DimensionMismatch(format!(
                "K has {} rows, got vector of length {}",
                self.rows(),
                y.len()
            )));
        }
        Ok(self.matrix.tr_mul(y))
    }

    /// Runs power iteration and caches the result.
    pub fn with_estimated_norm(mut self, tol: f64, max_iters: usize) -> Result<Self> {
        let norm = estimate_operator_norm(&self, tol, max_iters)?;
        self.norm_cache = Some(norm);
        Ok(self)
    }
}

/// Spectral norm of `K` by power iteration on `KᵀK`.
///
/// Seeded with the normalized all-ones vector. If that seed lies in the
/// kernel of `K`, the standard basis vectors are tried in order.
pub fn estimate_operator_norm(k: &LinearMap, tol: f64, max_iters: usize) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let n = k.cols();
    if n == 0 || k.rows() == 0 {
        return Err(Error::Domain("operator has an empty dimension".into()));
    }
    if k.matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("operator has non-finite entries".into()));
    }

    let gram = |v: &Vector| k.matrix.tr_mul(&(&k.matrix * v));
    let seeds = std::iter::once(Vector::from_element(n, 1.0 / (n as f64).sqrt()))
        .chain((0..n).map(|j| Vector::from_fn(n, |r, _| if r == j { 1.0 } else { 0.0 })));

    let mut v = None;
    for seed in seeds {
        if gram(&seed).norm() > 0.0 {
            v = Some(seed);
            break;
        }
    }
    let mut v = v.ok_or_else(|| Error::Domain("operator is zero".into()))?;

    let mut best = 0.0_f64;
    for _ in 0..max_iters {
        let w = gram(&v);
        let mu = v.dot(&w);
        best = best.max(mu.max(0.0).sqrt());
        let residual = (&w - &v * mu).norm() / mu;
        if residual <= tol {
            return Ok(mu.sqrt());
        }
        v = &w / w.norm();
    }
    Err(Error::NoConvergence {
        iterations: max_iters,
        best,
    })
}

/// `½ xᵀAx + bᵀx + c` with `A` symmetric positive semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct Quadratic {
    pub hessian: Matrix,
    pub linear: Vector,
    pub constant: f64,
}

impl Quadratic {
    pub fn new(hessian: Matrix, linear: Vector, constant: f64) -> Result<Self> {
        if !hessian.is_square() || hessian.nrows() != linear.len() {
            return Err(Error::DimensionMismatch(format!(
                "hessian {}x{} does not match linear term of length {}",
                hessian.nrows(),
                hessian.ncols(),
                linear.len()
            )));
        }
        let asym = (&hessian - hessian.transpose()).amax();
        if asym > 1e-12 * (1.0 + hessian.amax()) {
            return Err(Error::Domain("quadratic hessian is not symmetric".into()));
        }
        Ok(Quadratic {
            hessian,
            linear,
            constant,
        })
    }

    /// `(scale/2)‖x‖²`.
    pub fn isotropic(n: usize, scale: f64) -> Self {
        Quadratic {
            hessian: Matrix::identity(n, n) * scale,
            linear: Vector::zeros(n),
            constant: 0.0,
        }
    }

    pub fn diagonal(diag: &[f64], linear: Vector) -> Result<Self> {
        Quadratic::new(
            Matrix::from_diagonal(&Vector::from_column_slice(diag)),
            linear,
            0.0,
        )
    }
}

/// One of the two convex functions `G` or `F*` of a saddle problem.
#[derive(Clone, Debug, PartialEq)]
pub enum PieceKind {
    Quadratic(Quadratic),
    /// `weight · ‖x‖₁` on `R^dim`; prox-only.
    L1 { weight: f64, dim: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvexPiece {
    pub kind: PieceKind,
    convexity: f64,
}

impl ConvexPiece {
    /// `convexity` is the declared strong-convexity constant; it is not
    /// estimated (see [`ConvexPiece::check_convexity`]).
    pub fn new(kind: PieceKind, convexity: f64) -> Result<Self> {
        if !(convexity >= 0.0) || !convexity.is_finite() {
            return Err(Error::Domain(format!(
                "convexity constant must be finite and >= 0, got {convexity}"
            )));
        }
        if let PieceKind::L1 { weight, .. } = kind {
            if !(weight >= 0.0) {
                return Err(Error::Domain(format!("l1 weight must be >= 0, got {weight}")));
            }
        }
        Ok(ConvexPiece { kind, convexity })
    }

    pub fn quadratic(q: Quadratic, convexity: f64) -> Result<Self> {
        Self::new(PieceKind::Quadratic(q), convexity)
    }

    pub fn l1(weight: f64, dim: usize) -> Result<Self> {
        Self::new(PieceKind::L1 { weight, dim }, 0.0)
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            PieceKind::Quadratic(q) => q.linear.len(),
            PieceKind::L1 { dim, .. } => *dim,
        }
    }

    pub fn convexity_constant(&self) -> f64 {
        self.convexity
    }

    pub fn is_smooth(&self) -> bool {
        matches!(self.kind, PieceKind::Quadratic(_))
    }

    fn label(&self) -> &'static str {
        match self.kind {
            PieceKind::Quadratic(_) => "quadratic",
            PieceKind::L1 { .. } => "l1",
        }
    }

    fn check_dim(&self, x: &Vector) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{} piece has dimension {}, got vector of length {}",
                self.label(),
                self.dim(),
                x.len()
            )));
        }
        Ok(())
    }

    pub fn evaluate(&self, x: &Vector) -> Result<f64> {
        self.check_dim(x)?;
        let v = match &self.kind {
            PieceKind::Quadratic(q) => {
                0.5 * x.dot(&(&q.hessian * x)) + q.linear.dot(x) + q.constant
            }
            PieceKind::L1 { weight, .. } => weight * x.lp_norm(1),
        };
        if !v.is_finite() {
            return Err(Error::Domain(format!("{} piece evaluated to {v}", self.label())));
        }
        Ok(v)
    }

    /// `argmin_x f(x) + ‖x - v‖² / (2 step)`.
    pub fn prox(&self, step: f64, v: &Vector) -> Result<Vector> {
        self.check_dim(v)?;
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::Domain(format!("prox step must be positive, got {step}")));
        }
        match &self.kind {
            PieceKind::Quadratic(q) => {
                let n = v.len();
                let system = Matrix::identity(n, n) + &q.hessian * step;
                let rhs = v - &q.linear * step;
                let chol = system.cholesky().ok_or_else(|| {
                    Error::Singular("I + step·A is not positive definite".into())
                })?;
                Ok(chol.solve(&rhs))
            }
            PieceKind::L1 { weight, .. } => {
                let t = step * weight;
                Ok(v.map(|vi| vi.signum() * (vi.abs() - t).max(0.0)))
            }
        }
    }

    pub fn gradient(&self, x: &Vector) -> Result<Vector> {
        self.check_dim(x)?;
        match &self.kind {
            PieceKind::Quadratic(q) => Ok(&q.hessian * x + &q.linear),
            PieceKind::L1 { .. } => Err(Error::UnsupportedOracle {
                operation: "gradient",
                piece: "l1",
            }),
        }
    }

    /// `∇f(x) - ∇f(base)`, formed without evaluating either gradient so it
    /// stays accurate when `x` and `base` are close.
    pub fn gradient_difference(&self, x: &Vector, base: &Vector) -> Result<Vector> {
        self.check_dim(x)?;
        self.check_dim(base)?;
        match &self.kind {
            PieceKind::Quadratic(q) => Ok(&q.hessian * (x - base)),
            PieceKind::L1 { .. } => Err(Error::UnsupportedOracle {
                operation: "gradient_difference",
                piece: "l1",
            }),
        }
    }

    /// Bregman divergence `f(x) - f(base) - <∇f(base), x - base>` of the
    /// difference scaled by `2^exp2`, i.e. `4^exp2` times the divergence for
    /// quadratics. The scaling lets callers fold large weights into the
    /// vectors before squaring.
    pub fn bregman_scaled(&self, x: &Vector, base: &Vector, exp2: i32) -> Result<f64> {
        self.check_dim(x)?;
        self.check_dim(base)?;
        match &self.kind {
            PieceKind::Quadratic(q) => {
                let d = (x - base).map(|v| ldexp(v, exp2));
                Ok(0.5 * d.dot(&(&q.hessian * &d)))
            }
            PieceKind::L1 { .. } => Err(Error::UnsupportedOracle {
                operation: "bregman divergence",
                piece: "l1",
            }),
        }
    }

    /// Samples random segments in `[-scale, scale]^n` and returns the largest
    /// violation of `f(m) <= (f(a)+f(b))/2 - (μ/8)‖a-b‖²` (0 when none).
    pub fn check_convexity(&self, samples: usize, scale: f64, seed: u64) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.dim();
        let mut worst = 0.0_f64;
        for _ in 0..samples {
            let a = Vector::from_fn(n, |_, _| rng.gen_range(-scale..scale));
            let b = Vector::from_fn(n, |_, _| rng.gen_range(-scale..scale));
            let m = (&a + &b) * 0.5;
            let fa = self.evaluate(&a)?;
            let fb = self.evaluate(&b)?;
            let fm = self.evaluate(&m)?;
            let bound = 0.5 * (fa + fb) - self.convexity / 8.0 * (&a - &b).norm_squared();
            let slack = 1e-12 * (1.0 + fa.abs() + fb.abs());
            worst = worst.max(fm - bound - slack);
        }
        Ok(worst)
    }
}

/// Multiplies by `2^e` without overflowing in the factor itself.
pub fn ldexp(v: f64, e: i32) -> f64 {
    let mut v = v;
    let mut e = e;
    while e > 1000 {
        v *= 2f64.powi(1000);
        e -= 1000;
    }
    while e < -1000 {
        v *= 2f64.powi(-1000);
        e += 1000;
    }
    v * 2f64.powi(e)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrimalDualPoint {
    pub x: Vector,
    pub y: Vector,
}

impl PrimalDualPoint {
    pub fn new(x: Vector, y: Vector) -> Self {
        PrimalDualPoint { x, y }
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        PrimalDualPoint {
            x: Vector::zeros(n),
            y: Vector::zeros(m),
        }
    }

    pub fn from_slices(x: &[f64], y: &[f64]) -> Self {
        PrimalDualPoint {
            x: Vector::from_column_slice(x),
            y: Vector::from_column_slice(y),
        }
    }

    pub fn norm(&self) -> f64 {
        (self.x.norm_squared() + self.y.norm_squared()).sqrt()
    }

    pub fn distance(&self, other: &PrimalDualPoint) -> f64 {
        ((&self.x - &other.x).norm_squared() + (&self.y - &other.y).norm_squared()).sqrt()
    }
}

#[derive(Clone, Debug)]
pub struct SaddleProblem {
    pub name: String,
    pub g: ConvexPiece,
    pub f_star: ConvexPiece,
    pub k: LinearMap,
    known_saddle: Option<PrimalDualPoint>,
}

impl SaddleProblem {
    /// Estimates `‖K‖` if it is not already cached.
    pub fn new(
        name: impl Into<String>,
        g: ConvexPiece,
        f_star: ConvexPiece,
        k: LinearMap,
    ) -> Result<Self> {
        if g.dim() != k.cols() || f_star.dim() != k.rows() {
            return Err(Error::DimensionMismatch(format!(
                "G has dimension {}, F* has dimension {}, K is {}x{}",
                g.dim(),
                f_star.dim(),
                k.rows(),
                k.cols()
            )));
        }
        let k = if k.norm().is_some() {
            k
        } else {
            match k.clone().with_estimated_norm(NORM_TOL, NORM_MAX_ITERS) {
                Ok(k) => k,
                // A zero operator has no meaningful norm; leave the cache empty.
                Err(Error::Domain(_)) => k,
                Err(e) => return Err(e),
            }
        };
        Ok(SaddleProblem {
            name: name.into(),
            g,
            f_star,
            k,
            known_saddle: None,
        })
    }

    /// Attaches a saddle point after checking `0 ∈ H(û)` (smooth pieces only).
    pub fn with_known_saddle(mut self, u_hat: PrimalDualPoint) -> Result<Self> {
        self.check_dims(&u_hat)?;
        if self.is_smooth() {
            let h = monotone_operator(&self, &u_hat)?;
            let scale = 1.0 + u_hat.norm();
            if h.x.norm() > 1e-10 * scale || h.y.norm() > 1e-10 * scale {
                return Err(Error::Domain(format!(
                    "claimed saddle point has residual ({:e}, {:e})",
                    h.x.norm(),
                    h.y.norm()
                )));
            }
        }
        self.known_saddle = Some(u_hat);
        Ok(self)
    }

    pub fn known_saddle(&self) -> Option<&PrimalDualPoint> {
        self.known_saddle.as_ref()
    }

    /// Known saddle point, or the direct solve for quadratic problems.
    pub fn saddle_point(&self) -> Result<PrimalDualPoint> {
        match &self.known_saddle {
            Some(u) => Ok(u.clone()),
            None => solve_saddle_quadratic(self),
        }
    }

    pub fn primal_dim(&self) -> usize {
        self.k.cols()
    }

    pub fn dual_dim(&self) -> usize {
        self.k.rows()
    }

    pub fn is_smooth(&self) -> bool {
        self.g.is_smooth() && self.f_star.is_smooth()
    }

    pub fn k_norm(&self) -> Result<f64> {
        self.k
            .norm()
            .ok_or_else(|| Error::Domain("operator norm unavailable (K = 0?)".into()))
    }

    pub fn check_dims(&self, u: &PrimalDualPoint) -> Result<()> {
        if u.x.len() != self.primal_dim() || u.y.len() != self.dual_dim() {
            return Err(Error::DimensionMismatch(format!(
                "problem is {}+{} dimensional, point is {}+{}",
                self.primal_dim(),
                self.dual_dim(),
                u.x.len(),
                u.y.len()
            )));
        }
        Ok(())
    }

    /// Rejects convexity parameters above the declared constants.
    pub fn check_convexity_parameters(&self, gamma: f64, rho: f64) -> Result<()> {
        let g = self.g.convexity_constant();
        let f = self.f_star.convexity_constant();
        if !(gamma >= 0.0) || gamma > g * (1.0 + 1e-12) {
            return Err(Error::config(
                "gamma",
                format!("must lie in [0, {g}] (declared convexity of G), got {gamma}"),
            ));
        }
        if !(rho >= 0.0) || rho > f * (1.0 + 1e-12) {
            return Err(Error::config(
                "rho",
                format!("must lie in [0, {f}] (declared convexity of F*), got {rho}"),
            ));
        }
        Ok(())
    }
}

pub fn eval_lagrangian(problem: &SaddleProblem, u: &PrimalDualPoint) -> Result<f64> {
    problem.check_dims(u)?;
    let kx = problem.k.apply(&u.x)?;
    let v = problem.g.evaluate(&u.x)? + kx.dot(&u.y) - problem.f_star.evaluate(&u.y)?;
    if !v.is_finite() {
        return Err(Error::Domain(format!("lagrangian evaluated to {v}")));
    }
    Ok(v)
}

/// `L(x, ŷ) - L(x̂, y)`.
pub fn lagrangian_gap(
    problem: &SaddleProblem,
    u: &PrimalDualPoint,
    u_hat: &PrimalDualPoint,
) -> Result<f64> {
    problem.check_dims(u)?;
    problem.check_dims(u_hat)?;
    let a = eval_lagrangian(problem, &PrimalDualPoint::new(u.x.clone(), u_hat.y.clone()))?;
    let b = eval_lagrangian(problem, &PrimalDualPoint::new(u_hat.x.clone(), u.y.clone()))?;
    Ok(a - b)
}

/// The two halves of the Lagrangian gap for smooth problems, each written
/// as a Bregman divergence around the saddle point:
/// `L(x,ŷ) - L(x̂,ŷ) = D_G(x, x̂)` and `L(x̂,ŷ) - L(x̂,y) = D_F*(y, ŷ)`.
///
/// Both are multiplied by `4^exp2` (see [`ConvexPiece::bregman_scaled`]).
/// Unlike [`lagrangian_gap`] this has no cancellation near the saddle.
pub fn gap_parts_scaled(
    problem: &SaddleProblem,
    u: &PrimalDualPoint,
    u_hat: &PrimalDualPoint,
    exp2: i32,
) -> Result<(f64, f64)> {
    problem.check_dims(u)?;
    problem.check_dims(u_hat)?;
    Ok((
        problem.g.bregman_scaled(&u.x, &u_hat.x, exp2)?,
        problem.f_star.bregman_scaled(&u.y, &u_hat.y, exp2)?,
    ))
}

/// Gap of the shifted Lagrangian:
/// `L gap - (γ/2)‖x - x̂‖² - (ρ/2)‖y - ŷ‖²`.
pub fn shifted_lagrangian_gap(
    problem: &SaddleProblem,
    u: &PrimalDualPoint,
    u_hat: &PrimalDualPoint,
    gamma: f64,
    rho: f64,
) -> Result<f64> {
    let (g, f) = shifted_gap_parts_scaled(problem, u, u_hat, gamma, rho, 0)?;
    Ok(g + f)
}

/// `Ḡ(x; x̂) - G(x̂)` and `F̄*(y; ŷ) - F*(ŷ)` for smooth problems, both
/// multiplied by `4^exp2`.
pub fn shifted_gap_parts_scaled(
    problem: &SaddleProblem,
    u: &PrimalDualPoint,
    u_hat: &PrimalDualPoint,
    gamma: f64,
    rho: f64,
    exp2: i32,
) -> Result<(f64, f64)> {
    let (g, f) = gap_parts_scaled(problem, u, u_hat, exp2)?;
    let dx = (&u.x - &u_hat.x).map(|v| ldexp(v, exp2)).norm_squared();
    let dy = (&u.y - &u_hat.y).map(|v| ldexp(v, exp2)).norm_squared();
    Ok((g - 0.5 * gamma * dx, f - 0.5 * rho * dy))
}

/// `∇Ḡ(x; x̂) = ∇G(x) - ∇G(x̂) - γ(x - x̂)` and
/// `∇F̄*(y; ŷ) = ∇F*(y) - ∇F*(ŷ) - ρ(y - ŷ)`.
///
/// At a saddle point `∇G(x̂) = -Kᵀŷ` and `∇F*(ŷ) = Kx̂`, so these agree with
/// the definitions through `Kᵀŷ` and `Kx̂`.
pub fn shifted_gradients(
    problem: &SaddleProblem,
    u: &PrimalDualPoint,
    u_hat: &PrimalDualPoint,
    gamma: f64,
    rho: f64,
) -> Result<PrimalDualPoint> {
    problem.check_dims(u)?;
    problem.check_dims(u_hat)?;
    let gx = problem.g.gradient_difference(&u.x, &u_hat.x)? - (&u.x - &u_hat.x) * gamma;
    let gy = problem.f_star.gradient_difference(&u.y, &u_hat.y)? - (&u.y - &u_hat.y) * rho;
    Ok(PrimalDualPoint::new(gx, gy))
}

/// `H(u) = (∇G(x) + Kᵀy, ∇F*(y) - Kx)`.
pub fn monotone_operator(problem: &SaddleProblem, u: &PrimalDualPoint) -> Result<PrimalDualPoint> {
    problem.check_dims(u)?;
    let hx = problem.g.gradient(&u.x)? + problem.k.adjoint_apply(&u.y)?;
    let hy = problem.f_star.gradient(&u.y)? - problem.k.apply(&u.x)?;
    Ok(PrimalDualPoint::new(hx, hy))
}

/// Solves `H(u) = 0` for quadratic `G`, `F*` as one linear system
/// `[[A, Kᵀ], [-K, C]] (x, y) = (-b, -d)`.
pub fn solve_saddle_quadratic(problem: &SaddleProblem) -> Result<PrimalDualPoint> {
    let (PieceKind::Quadratic(g), PieceKind::Quadratic(f)) = (&problem.g.kind, &problem.f_star.kind)
    else {
        return Err(Error::UnsupportedOracle {
            operation: "solve_saddle_quadratic",
            piece: "l1",
        });
    };
    let n = problem.primal_dim();
    let m = problem.dual_dim();
    let k = problem.k.matrix();
    let mut system = Matrix::zeros(n + m, n + m);
    system.view_mut((0, 0), (n, n)).copy_from(&g.hessian);
    system.view_mut((0, n), (n, m)).copy_from(&k.transpose());
    system.view_mut((n, 0), (m, n)).copy_from(&(-k));
    system.view_mut((n, n), (m, m)).copy_from(&f.hessian);
    let mut rhs = Vector::zeros(n + m);
    rhs.rows_mut(0, n).copy_from(&(-&g.linear));
    rhs.rows_mut(n, m).copy_from(&(-&f.linear));

    let sol = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("saddle system [[A, Kᵀ], [-K, C]]".into()))?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("saddle system produced non-finite values".into()));
    }
    let u = PrimalDualPoint::new(sol.rows(0, n).into_owned(), sol.rows(n, m).into_owned());
    let h = monotone_operator(problem, &u)?;
    let scale = 1.0 + rhs.norm() + u.norm();
    if h.norm() > 1e-10 * scale {
        return Err(Error::Singular(format!(
            "saddle solve residual {:e} too large",
            h.norm()
        )));
    }
    Ok(u)
}

pub const BUILTIN_PROBLEMS: [&str; 3] = ["quadratic1d", "quadratic-nd", "lasso-demo"];

/// Short description for each built-in problem, for listings.
pub fn describe_builtin(name: &str) -> Option<&'static str> {
    match name {
        "quadratic1d" => Some("G = x²/2, F* = y²/2, K = 1; saddle at (0, 0)"),
        "quadratic-nd" => Some(
            "n = m = 5, diagonal G and F* hessians in [1, 3), dense random K (seeded); saddle at (0, 0)",
        ),
        "lasso-demo" => Some("G = 0.1‖x‖₁ (prox only), F* = ½‖y‖² + bᵀy, random K (seeded), 8x6"),
        _ => None,
    }
}

/// Builds a named problem. `seed` only affects the randomized ones.
pub fn builtin_problem(name: &str, seed: u64) -> Result<SaddleProblem> {
    match name {
        "quadratic1d" => quadratic1d(),
        "quadratic-nd" => quadratic_nd(5, 5, seed),
        "lasso-demo" => lasso_demo(seed),
        other => Err(Error::config(
            "problem",
            format!(
                "unknown problem `{other}` (known: {})",
                BUILTIN_PROBLEMS.join(", ")
            ),
        )),
    }
}

pub fn quadratic1d() -> Result<SaddleProblem> {
    let g = ConvexPiece::quadratic(Quadratic::isotropic(1, 1.0), 1.0)?;
    let f = ConvexPiece::quadratic(Quadratic::isotropic(1, 1.0), 1.0)?;
    SaddleProblem::new("quadratic1d", g, f, LinearMap::scaled_identity(1, 1.0))?
        .with_known_saddle(PrimalDualPoint::zeros(1, 1))
}

/// Diagonal hessians with entries in `[1, 3)` and a dense `K` with entries in
/// `[-1, 1]`. Linear terms are zero, so the saddle point is the origin.
pub fn quadratic_nd(n: usize, m: usize, seed: u64) -> Result<SaddleProblem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..3.0)).collect();
    let c: Vec<f64> = (0..m).map(|_| rng.gen_range(1.0..3.0)).collect();
    let k = Matrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..=1.0));
    let min_a = a.iter().cloned().fold(f64::INFINITY, f64::min);
    let min_c = c.iter().cloned().fold(f64::INFINITY, f64::min);
    let g = ConvexPiece::quadratic(Quadratic::diagonal(&a, Vector::zeros(n))?, min_a.min(1.0))?;
    let f = ConvexPiece::quadratic(Quadratic::diagonal(&c, Vector::zeros(m))?, min_c.min(1.0))?;
    SaddleProblem::new("quadratic-nd", g, f, LinearMap::new(k))?
        .with_known_saddle(PrimalDualPoint::zeros(n, m))
}

pub fn lasso_demo(seed: u64) -> Result<SaddleProblem> {
    let (n, m) = (8, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = Matrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..=1.0));
    let b = Vector::from_fn(m, |_, _| rng.gen_range(-1.0..=1.0));
    let g = ConvexPiece::l1(0.1, n)?;
    let f = ConvexPiece::quadratic(Quadratic::new(Matrix::identity(m, m), b, 0.0)?, 1.0)?;
    SaddleProblem::new("lasso-demo", g, f, LinearMap::new(k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn scalar_problem(g_center: f64, k: f64) -> SaddleProblem {
        let g = ConvexPiece::quadratic(
            Quadratic::new(Matrix::identity(1, 1), Vector::from_element(1, -g_center), 0.5 * g_center * g_center)
                .unwrap(),
            1.0,
        )
        .unwrap();
        let f = ConvexPiece::quadratic(Quadratic::isotropic(1, 1.0), 1.0).unwrap();
        SaddleProblem::new("scalar", g, f, LinearMap::new(Matrix::from_element(1, 1, k))).unwrap()
    }

    fn pt(x: f64, y: f64) -> PrimalDualPoint {
        PrimalDualPoint::from_slices(&[x], &[y])
    }

    #[test]
    fn lagrangian_examples() {
        let p = quadratic1d().unwrap();
        assert_eq!(eval_lagrangian(&p, &pt(1.0, 1.0)).unwrap(), 1.0);
        assert_eq!(eval_lagrangian(&p, &pt(0.0, 0.0)).unwrap(), 0.0);
        // 2 - 2 - 0.5
        assert_eq!(eval_lagrangian(&p, &pt(2.0, -1.0)).unwrap(), -0.5);
        assert!(matches!(
            eval_lagrangian(&p, &PrimalDualPoint::from_slices(&[1.0, 2.0], &[0.0])),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn gap_examples() {
        let p = quadratic1d().unwrap();
        let hat = pt(0.0, 0.0);
        assert_eq!(lagrangian_gap(&p, &pt(1.0, 2.0), &hat).unwrap(), 2.5);
        assert_eq!(lagrangian_gap(&p, &hat, &hat).unwrap(), 0.0);
        let (g, f) = gap_parts_scaled(&p, &pt(1.0, 2.0), &hat, 0).unwrap();
        assert_eq!(g + f, 2.5);
        let (g, f) = gap_parts_scaled(&p, &pt(1.0, 2.0), &hat, 3).unwrap();
        assert_eq!(g + f, 2.5 * 64.0);
        assert_eq!(shifted_lagrangian_gap(&p, &pt(1.0, 1.0), &hat, 1.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn operator_examples() {
        let p = quadratic1d().unwrap();
        let h = monotone_operator(&p, &pt(1.0, 1.0)).unwrap();
        assert_eq!((h.x[0], h.y[0]), (2.0, 0.0));
        let h = monotone_operator(&p, &pt(2.0, -1.0)).unwrap();
        assert_eq!((h.x[0], h.y[0]), (1.0, -3.0));
        let lasso = lasso_demo(1).unwrap();
        assert!(matches!(
            monotone_operator(&lasso, &PrimalDualPoint::zeros(8, 6)),
            Err(Error::UnsupportedOracle { .. })
        ));
    }

    #[test]
    fn norm_examples() {
        let eye = LinearMap::new(Matrix::identity(3, 3));
        assert_relative_eq!(estimate_operator_norm(&eye, 1e-12, 100).unwrap(), 1.0, epsilon = 1e-12);
        let diag = LinearMap::new(Matrix::from_diagonal(&Vector::from_vec(vec![3.0, 1.0])));
        assert_relative_eq!(estimate_operator_norm(&diag, 1e-12, 1000).unwrap(), 3.0, max_relative = 1e-10);
        let shear = LinearMap::new(Matrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]));
        let oracle = shear.matrix().clone().svd(false, false).singular_values.max();
        let est = estimate_operator_norm(&shear, 1e-13, 1000).unwrap();
        assert_relative_eq!(est, oracle, max_relative = 1e-10);
        assert_relative_eq!(est, (1.0 + 5f64.sqrt()) / 2.0, max_relative = 1e-10);
    }

    #[test]
    fn norm_seed_in_kernel_and_zero_operator() {
        let k = LinearMap::new(Matrix::from_row_slice(1, 2, &[1.0, -1.0]));
        assert_relative_eq!(estimate_operator_norm(&k, 1e-12, 100).unwrap(), 2f64.sqrt(), max_relative = 1e-12);
        let zero = LinearMap::new(Matrix::zeros(2, 2));
        assert!(matches!(estimate_operator_norm(&zero, 1e-12, 100), Err(Error::Domain(_))));
    }

    #[test]
    fn norm_nonconvergence_carries_estimate() {
        let k = LinearMap::new(Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 0.999_999])));
        match estimate_operator_norm(&k, 1e-15, 3) {
            Err(Error::NoConvergence { best, iterations }) => {
                assert_eq!(iterations, 3);
                assert!(best > 0.99 && best <= 1.0);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn saddle_solve_examples() {
        assert_eq!(solve_saddle_quadratic(&quadratic1d().unwrap()).unwrap(), pt(0.0, 0.0));
        let shifted = solve_saddle_quadratic(&scalar_problem(1.0, 1.0)).unwrap();
        assert_relative_eq!(shifted.x[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(shifted.y[0], 0.5, epsilon = 1e-15);
        let decoupled = solve_saddle_quadratic(&scalar_problem(0.0, 0.0)).unwrap();
        assert_eq!(decoupled, pt(0.0, 0.0));
    }

    #[test]
    fn saddle_solve_singular() {
        let zero = ConvexPiece::quadratic(Quadratic::isotropic(2, 0.0), 0.0).unwrap();
        let f = ConvexPiece::quadratic(Quadratic::isotropic(1, 0.0), 0.0).unwrap();
        // K has a kernel and neither piece is strongly convex.
        let k = LinearMap::new(Matrix::from_row_slice(1, 2, &[1.0, 0.0]));
        let p = SaddleProblem::new("singular", zero, f, k).unwrap();
        assert!(matches!(solve_saddle_quadratic(&p), Err(Error::Singular(_))));
    }

    #[test]
    fn known_saddle_is_validated() {
        let p = quadratic1d().unwrap();
        assert!(p.clone().with_known_saddle(pt(0.1, 0.0)).is_err());
        let nd = quadratic_nd(5, 5, 3).unwrap();
        let u = solve_saddle_quadratic(&nd).unwrap();
        assert!(u.norm() < 1e-14);
    }

    #[test]
    fn quadratic_nd_is_deterministic() {
        let a = quadratic_nd(5, 5, 42).unwrap();
        let b = quadratic_nd(5, 5, 42).unwrap();
        let c = quadratic_nd(5, 5, 43).unwrap();
        assert_eq!(a.k, b.k);
        assert_ne!(a.k.matrix(), c.k.matrix());
        assert_eq!(a.g.convexity_constant(), 1.0);
    }

    #[test]
    fn l1_prox_soft_thresholds() {
        let p = ConvexPiece::l1(0.5, 3).unwrap();
        let out = p.prox(2.0, &Vector::from_vec(vec![3.0, -0.5, -2.0])).unwrap();
        assert_eq!(out.as_slice(), &[2.0, 0.0, -1.0]);
        assert!(p.gradient(&Vector::zeros(3)).is_err());
    }

    #[test]
    fn convexity_parameters_are_bounded_by_declaration() {
        let p = quadratic1d().unwrap();
        assert!(p.check_convexity_parameters(1.0, 1.0).is_ok());
        assert!(matches!(
            p.check_convexity_parameters(1.5, 0.0),
            Err(Error::Config { field, .. }) if field == "gamma"
        ));
    }

    #[test]
    fn declared_convexity_holds_on_builtins() {
        for name in BUILTIN_PROBLEMS {
            let p = builtin_problem(name, 11).unwrap();
            assert!(p.g.check_convexity(200, 5.0, 1).unwrap() <= 0.0, "{name} G");
            assert!(p.f_star.check_convexity(200, 5.0, 2).unwrap() <= 0.0, "{name} F*");
        }
        let overclaimed = ConvexPiece::quadratic(Quadratic::isotropic(2, 1.0), 2.0).unwrap();
        assert!(overclaimed.check_convexity(50, 5.0, 3).unwrap() > 0.0);
    }

    fn vec_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-10.0..10.0f64, n)
    }

    proptest! {
        #[test]
        fn adjoint_consistency(seed in 0u64..1000, x in vec_strategy(5), y in vec_strategy(5)) {
            let p = quadratic_nd(5, 5, seed).unwrap();
            let x = Vector::from_vec(x);
            let y = Vector::from_vec(y);
            let lhs = p.k.apply(&x).unwrap().dot(&y);
            let rhs = x.dot(&p.k.adjoint_apply(&y).unwrap());
            let scale = p.k.matrix().abs().sum() * x.amax() * y.amax() + 1e-300;
            prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
            let bound = p.k.norm().unwrap() * x.norm() * (1.0 + 1e-12);
            prop_assert!(p.k.apply(&x).unwrap().norm() <= bound);
        }

        #[test]
        fn prox_optimality_and_nonexpansive(seed in 0u64..1000, step in 1e-3..10.0f64,
                                            a in vec_strategy(5), b in vec_strategy(5)) {
            let p = quadratic_nd(5, 5, seed).unwrap();
            let a = Vector::from_vec(a);
            let b = Vector::from_vec(b);
            let pa = p.g.prox(step, &a).unwrap();
            let pb = p.g.prox(step, &b).unwrap();
            let opt = (&a - &pa) / step - p.g.gradient(&pa).unwrap();
            prop_assert!(opt.norm() <= 1e-10 * (1.0 + a.norm()));
            prop_assert!((&pa - &pb).norm() <= (&a - &b).norm() * (1.0 + 1e-12));
            let l1 = ConvexPiece::l1(0.7, 5).unwrap();
            let la = l1.prox(step, &a).unwrap();
            let lb = l1.prox(step, &b).unwrap();
            prop_assert!((&la - &lb).norm() <= (&a - &b).norm() * (1.0 + 1e-12));
        }

        #[test]
        fn operator_is_monotone(seed in 0u64..1000, u in vec_strategy(10), v in vec_strategy(10)) {
            let p = quadratic_nd(5, 5, seed).unwrap();
            let u = PrimalDualPoint::from_slices(&u[..5], &u[5..]);
            let v = PrimalDualPoint::from_slices(&v[..5], &v[5..]);
            let hu = monotone_operator(&p, &u).unwrap();
            let hv = monotone_operator(&p, &v).unwrap();
            let inner = (&hu.x - &hv.x).dot(&(&u.x - &v.x)) + (&hu.y - &hv.y).dot(&(&u.y - &v.y));
            prop_assert!(inner >= -1e-10 * (1.0 + u.norm() + v.norm()).powi(2));
        }

        #[test]
        fn gap_nonnegative(seed in 0u64..1000, u in vec_strategy(10)) {
            let p = quadratic_nd(5, 5, seed).unwrap();
            let hat = p.saddle_point().unwrap();
            let u = PrimalDualPoint::from_slices(&u[..5], &u[5..]);
            prop_assert!(lagrangian_gap(&p, &u, &hat).unwrap() >= -1e-12);
            let (g, f) = gap_parts_scaled(&p, &u, &hat, 0).unwrap();
            let direct = lagrangian_gap(&p, &u, &hat).unwrap();
            prop_assert!((g + f - direct).abs() <= 1e-10 * (1.0 + direct.abs()));
        }
    }
}
