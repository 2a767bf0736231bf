//! Fenchel saddle data `F(x, y) = ⟨x, Ay + a⟩ + ψ(y)` and the dual
//! first-order oracle `f(y) = max_{x∈X} F(x, y)`.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
#[allow(unused_imports)]
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::certificate::PrimalPoint;
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, LinearForm, Mat};
use crate::lo::LoOracle;
use crate::prox::ProximalSetup;

/// The linear map `A : E_y → E_x` with its adjoint.
pub trait DualOperator: Send + Sync {
    fn dual_dim(&self) -> usize;
    fn primal_shape(&self) -> (usize, usize);
    /// `A y`
    fn apply(&self, y: &[f64]) -> LinearForm;
    /// `A* x`
    fn adjoint(&self, x: &PrimalPoint) -> Vec<f64>;
}

/// Convex term `ψ` of the dual objective.
pub enum Psi {
    /// `ψ(y) = ⟨c, y⟩`
    Linear(Vec<f64>),
    /// Value and subgradient oracle.
    Oracle(Box<dyn Fn(&[f64]) -> (f64, Vec<f64>) + Send + Sync>),
}

impl Psi {
    pub fn eval(&self, y: &[f64]) -> (f64, Vec<f64>) {
        match self {
            Psi::Linear(c) => (dot(c, y), c.clone()),
            Psi::Oracle(f) => f(y),
        }
    }

    pub fn linear(&self) -> Option<&[f64]> {
        match self {
            Psi::Linear(c) => Some(c),
            Psi::Oracle(_) => None,
        }
    }
}

pub type PrimalEvaluator = Box<dyn Fn(&PrimalPoint) -> Result<f64> + Send + Sync>;

pub struct FenchelProblem {
    pub name: String,
    pub op: Box<dyn DualOperator>,
    /// The shift `a ∈ E_x`; absent means zero.
    pub shift: Option<Mat>,
    pub psi: Psi,
    pub dual_setup: ProximalSetup,
    pub lo: LoOracle,
    /// Closed-form `f_*`; the generic evaluator is used when absent.
    pub primal_eval: Option<PrimalEvaluator>,
    /// Certified bound on `sup_Y ‖f'(y)‖_*`, when one is known in closed form.
    pub lf_bound: Option<f64>,
}

impl fmt::Debug for FenchelProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FenchelProblem")
            .field("name", &self.name)
            .field("dual_dim", &self.op.dual_dim())
            .field("primal_shape", &self.op.primal_shape())
            .field("dual_setup", &self.dual_setup)
            .field("lo", &self.lo)
            .field("lf_bound", &self.lf_bound)
            .finish()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualOracleAnswer {
    pub value: f64,
    pub g: Vec<f64>,
    pub x: PrimalPoint,
    pub delta: f64,
}

/// Answer of a (possibly inexact) vector field `y ↦ g(y)` over `Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldAnswer {
    pub g: Vec<f64>,
    pub x: Option<PrimalPoint>,
    pub delta: f64,
    pub value: Option<f64>,
}

/// A vector field over the dual domain; the solvers only need this.
pub trait VectorField {
    fn setup(&self) -> &ProximalSetup;
    fn eval(&self, y: &[f64]) -> Result<FieldAnswer>;
}

/// A vector field given by a closure.
pub struct FnField<F> {
    pub setup: ProximalSetup,
    pub f: F,
}

impl<F> VectorField for FnField<F>
where
    F: Fn(&[f64]) -> Result<FieldAnswer>,
{
    fn setup(&self) -> &ProximalSetup {
        &self.setup
    }

    fn eval(&self, y: &[f64]) -> Result<FieldAnswer> {
        (self.f)(y)
    }
}

impl VectorField for FenchelProblem {
    fn setup(&self) -> &ProximalSetup {
        &self.dual_setup
    }

    fn eval(&self, y: &[f64]) -> Result<FieldAnswer> {
        let a = dual_eval(self, y)?;
        Ok(FieldAnswer {
            g: a.g,
            x: Some(a.x),
            delta: a.delta,
            value: Some(a.value),
        })
    }
}

impl FenchelProblem {
    /// `Ay + a`
    pub fn primal_form(&self, y: &[f64]) -> LinearForm {
        let ay = self.op.apply(y);
        match &self.shift {
            None => ay,
            Some(a) => {
                let mut d = ay.to_dense();
                d.add_scaled(1.0, a);
                LinearForm::Dense(d)
            }
        }
    }

    /// `⟨x, a⟩`
    pub fn shift_dot(&self, x: &PrimalPoint) -> f64 {
        self.shift.as_ref().map_or(0.0, |a| x.frob_dot(a))
    }

    /// `A*x + c` for linear `ψ`.
    fn dual_form(&self, x: &PrimalPoint) -> Result<Vec<f64>> {
        let c = self
            .psi
            .linear()
            .ok_or_else(|| Error::InvalidConfig("operation needs a linear ψ".into()))?;
        let mut v = self.op.adjoint(x);
        axpy(1.0, c, &mut v);
        Ok(v)
    }

    /// `f_*(x) = ⟨x, a⟩ + min_Y ⟨A*x + c, y⟩`, exact for linear `ψ`.
    pub fn primal_value_generic(&self, x: &PrimalPoint) -> Result<f64> {
        let v = self.dual_form(x)?;
        let neg: Vec<f64> = v.iter().map(|t| -t).collect();
        let (sup, _) = self.dual_setup.support(&neg)?;
        Ok(self.shift_dot(x) - sup)
    }

    pub fn primal_value(&self, x: &PrimalPoint) -> Result<f64> {
        match &self.primal_eval {
            Some(f) => f(x),
            None => self.primal_value_generic(x),
        }
    }

    /// `F(x, y)`
    pub fn saddle_value(&self, x: &PrimalPoint, y: &[f64]) -> f64 {
        let ay = self.op.apply(y);
        let xd = x.to_dense();
        ay.frob_dot(&xd) + self.shift_dot(x) + self.psi.eval(y).0
    }
}

/// `f(y)`, `f'(y) = A*x(y) + ψ'(y)` and `x(y)` from the LO oracle at `Ay + a`.
pub fn dual_eval(problem: &FenchelProblem, y: &[f64]) -> Result<DualOracleAnswer> {
    if y.len() != problem.op.dual_dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.op.dual_dim(),
            found: y.len(),
        });
    }
    let xi = problem.primal_form(y);
    let lo = problem.lo.maximize(&xi)?;
    let (psi, dpsi) = problem.psi.eval(y);
    let mut g = problem.op.adjoint(&lo.x);
    axpy(1.0, &dpsi, &mut g);
    Ok(DualOracleAnswer {
        value: lo.value + psi,
        g,
        x: lo.x,
        delta: lo.delta,
    })
}

/// Feasibility tolerance for gap evaluation.
const GAP_FEAS_TOL: f64 = 1e-8;

/// `f(ŷ) − f_*(x̂)` after checking feasibility of both points.
pub fn duality_gap(problem: &FenchelProblem, x_hat: &PrimalPoint, y_hat: &[f64]) -> Result<f64> {
    let vy = problem.dual_setup.violation(y_hat);
    if vy > GAP_FEAS_TOL {
        return Err(Error::Infeasible {
            domain: "dual domain",
            violation: vy,
        });
    }
    let vx = problem.lo.domain.violation(x_hat);
    if vx > GAP_FEAS_TOL * problem.lo.domain.radius().max(1.0) {
        return Err(Error::Infeasible {
            domain: "primal domain",
            violation: vx,
        });
    }
    let f = dual_eval(problem, y_hat)?.value;
    Ok(f - problem.primal_value(x_hat)?)
}

/// `L_f = sup_Y ‖f'(y)‖_*`: the closed-form bound when the problem carries
/// one, else the sampled maximum inflated by 10%.
pub fn estimate_lf(problem: &FenchelProblem, samples: usize, seed: u64) -> Result<f64> {
    if let Some(b) = problem.lf_bound {
        return Ok(b);
    }
    Ok(1.1 * sample_lf(problem, samples, seed)?)
}

/// Largest `‖f'(y)‖_*` over random points of `Y` (and its center).
pub fn sample_lf(problem: &FenchelProblem, samples: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let setup = &problem.dual_setup;
    let mut best = setup.dual_norm(&dual_eval(problem, &setup.center())?.g);
    for _ in 0..samples {
        let y = setup.random_point(&mut rng);
        best = best.max(setup.dual_norm(&dual_eval(problem, &y)?.g));
    }
    Ok(best)
}

/// Largest relative adjoint mismatch `|⟨Ay, x⟩ − ⟨y, A*x⟩|` over random pairs.
pub fn adjoint_mismatch(op: &dyn DualOperator, trials: usize, seed: u64) -> f64 {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (r, c) = op.primal_shape();
    let mut worst = 0.0_f64;
    for _ in 0..trials {
        let y: Vec<f64> = (0..op.dual_dim()).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let x = Mat::from_fn(r, c, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let lhs = op.apply(&y).frob_dot(&x);
        let rhs = dot(&y, &op.adjoint(&PrimalPoint::Dense(x)));
        worst = worst.max((lhs - rhs).abs() / (1.0 + lhs.abs().max(rhs.abs())));
    }
    worst
}

/// Smoothed primal objective `f_*^β(x) = min_Y [F(x, y) + β(ω(y) − min ω)]`
/// with its gradient `Ay(x) + a` and minimizer `y(x)`.
pub fn smoothed_value_grad(problem: &FenchelProblem, x: &PrimalPoint, beta: f64) -> Result<(f64, Mat, Vec<f64>)> {
    if !(beta > 0.0) {
        return Err(Error::InvalidConfig("smoothing parameter must be positive".into()));
    }
    let setup = &problem.dual_setup;
    let v = problem.dual_form(x)?;
    let eta: Vec<f64> = v.iter().map(|t| t / beta).collect();
    let y = setup.mirror(&eta)?;
    let value = dot(&v, &y) + problem.shift_dot(x) + beta * (setup.omega(&y) - setup.omega_min());
    let grad = problem.primal_form(&y).to_dense();
    Ok((value, grad, y))
}

/// A zero problem of the given shapes, handy for tests.
pub struct ZeroOperator {
    pub dual_dim: usize,
    pub shape: (usize, usize),
}

impl DualOperator for ZeroOperator {
    fn dual_dim(&self) -> usize {
        self.dual_dim
    }

    fn primal_shape(&self) -> (usize, usize) {
        self.shape
    }

    fn apply(&self, _y: &[f64]) -> LinearForm {
        LinearForm::Dense(Mat::zeros(self.shape.0, self.shape.1))
    }

    fn adjoint(&self, _x: &PrimalPoint) -> Vec<f64> {
        vec![0.0; self.dual_dim]
    }
}
