//! Proximal setups for the dual domain `Y`.
//!
//! A setup packages a compact convex domain with a norm and a
//! distance-generating function `ω` that is 1-strongly convex with respect to
//! that norm. Four domains are supported:
//!
//! | domain                        | norm | `ω`                                   |
//! |-------------------------------|------|----------------------------------------|
//! | Euclidean ball                | ℓ2   | `½‖y‖²`                                |
//! | ℓ1 ball (optionally symmetric)| ℓ2   | `½‖y‖²`                                |
//! | ℓ1 ball (optionally symmetric)| ℓ1   | `α ln n Σ|y_i|^{1+1/ln n}`             |
//! | `[0,1]^N ∩ {Σ ε_j y_j = 0}`    | ℓ2   | `½‖y‖²`                                |
//! | product of `N` scaled simplices| ℓ1  | `Σ y ln y`                             |
//!
//! The core primitive is the *mirror map* `η ↦ argmin_{z∈Y} ⟨η,z⟩ + ω(z)`;
//! the prox-mapping, the smoothed dual point and the inner iterations of the
//! level projection are all expressed through it.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm1, norm2, norm_inf};

/// Relative tolerance for membership tests.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

const ENTROPY_FLOOR: f64 = 1e-300;
const BISECTION_CAP: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Norm {
    L1,
    L2,
}

impl Norm {
    pub fn eval(self, v: &[f64]) -> f64 {
        match self {
            Norm::L1 => norm1(v),
            Norm::L2 => norm2(v),
        }
    }

    pub fn dual(self, v: &[f64]) -> f64 {
        match self {
            Norm::L1 => norm_inf(v),
            Norm::L2 => norm2(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Domain {
    EuclideanBall { dim: usize, radius: f64 },
    /// `{y : ‖y‖₁ ≤ radius}`; with `symmetric = Some(p)` the space is the
    /// `p × p` symmetric matrices stored row-major (`dim = p²`).
    L1Ball {
        dim: usize,
        radius: f64,
        symmetric: Option<usize>,
    },
    /// `{0 ≤ y ≤ 1, Σ ε_j y_j = 0}` with `ε_j ∈ {−1, 1}`.
    BoxHyperplane { signs: Vec<f64> },
    /// `N` blocks of size `M`, each block nonnegative with mass `1/N`.
    SimplexProduct { blocks: usize, block_size: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Dgf {
    Euclidean,
    /// `ω(y) = α ln(n) Σ|y_i|^{1+1/ln n}` with `n = max(dim, 3)`.
    Power { alpha: f64 },
    Entropy,
}

/// Default constant of the power d.g.f.; `α(1 + 1/ln n) ≥ e` gives modulus 1.
pub const POWER_ALPHA: f64 = core::f64::consts::E;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProximalSetup {
    domain: Domain,
    dgf: Dgf,
}

impl ProximalSetup {
    pub fn euclidean_ball(dim: usize, radius: f64) -> Self {
        assert!(dim > 0 && radius > 0.0);
        ProximalSetup {
            domain: Domain::EuclideanBall { dim, radius },
            dgf: Dgf::Euclidean,
        }
    }

    /// ℓ1 ball with the Euclidean d.g.f.
    pub fn l1_ball(dim: usize, radius: f64) -> Self {
        assert!(dim > 0 && radius > 0.0);
        ProximalSetup {
            domain: Domain::L1Ball {
                dim,
                radius,
                symmetric: None,
            },
            dgf: Dgf::Euclidean,
        }
    }

    /// Unit ℓ1 ball with the power d.g.f.
    pub fn l1_ball_power(dim: usize, alpha: f64) -> Self {
        assert!(dim > 0 && alpha > 0.0);
        ProximalSetup {
            domain: Domain::L1Ball {
                dim,
                radius: 1.0,
                symmetric: None,
            },
            dgf: Dgf::Power { alpha },
        }
    }

    /// Unit ℓ1 ball of symmetric `p × p` matrices.
    pub fn symmetric_l1_ball(p: usize, dgf: Dgf) -> Self {
        assert!(p > 0);
        assert!(matches!(dgf, Dgf::Euclidean | Dgf::Power { .. }));
        ProximalSetup {
            domain: Domain::L1Ball {
                dim: p * p,
                radius: 1.0,
                symmetric: Some(p),
            },
            dgf,
        }
    }

    pub fn box_hyperplane(signs: Vec<f64>) -> Result<Self> {
        if signs.iter().any(|s| *s != 1.0 && *s != -1.0) {
            return Err(Error::InvalidConfig("hyperplane signs must be ±1".into()));
        }
        let pos = signs.iter().filter(|s| **s > 0.0).count();
        if pos == 0 || pos == signs.len() {
            return Err(Error::InvalidConfig(
                "box-hyperplane domain needs both signs present".into(),
            ));
        }
        Ok(ProximalSetup {
            domain: Domain::BoxHyperplane { signs },
            dgf: Dgf::Euclidean,
        })
    }

    pub fn simplex_product(blocks: usize, block_size: usize) -> Self {
        assert!(blocks > 0 && block_size > 0);
        ProximalSetup {
            domain: Domain::SimplexProduct { blocks, block_size },
            dgf: Dgf::Entropy,
        }
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dgf(&self) -> Dgf {
        self.dgf
    }

    pub fn dim(&self) -> usize {
        match &self.domain {
            Domain::EuclideanBall { dim, .. } | Domain::L1Ball { dim, .. } => *dim,
            Domain::BoxHyperplane { signs } => signs.len(),
            Domain::SimplexProduct { blocks, block_size } => blocks * block_size,
        }
    }

    pub fn norm(&self) -> Norm {
        match self.dgf {
            Dgf::Euclidean => Norm::L2,
            Dgf::Power { .. } | Dgf::Entropy => Norm::L1,
        }
    }

    pub fn dual_norm(&self, v: &[f64]) -> f64 {
        self.norm().dual(v)
    }

    fn symmetric(&self) -> Option<usize> {
        match self.domain {
            Domain::L1Ball { symmetric, .. } => symmetric,
            _ => None,
        }
    }

    /// Power d.g.f. constants `(c, q)` with `ω = c Σ|y|^q`.
    fn power_constants(&self) -> (f64, f64) {
        let alpha = match self.dgf {
            Dgf::Power { alpha } => alpha,
            _ => unreachable!("power constants requested for non-power setup"),
        };
        let n = (self.dim().max(3)) as f64;
        let ln_n = n.ln();
        (alpha * ln_n, 1.0 + 1.0 / ln_n)
    }

    /// The ω-center `argmin_Y ω`.
    pub fn center(&self) -> Vec<f64> {
        match &self.domain {
            Domain::SimplexProduct { blocks, block_size } => {
                vec![1.0 / (*blocks * *block_size) as f64; blocks * block_size]
            }
            _ => vec![0.0; self.dim()],
        }
    }

    pub fn omega(&self, y: &[f64]) -> f64 {
        match self.dgf {
            Dgf::Euclidean => 0.5 * dot(y, y),
            Dgf::Power { .. } => {
                let (c, q) = self.power_constants();
                c * y.iter().map(|v| v.abs().powf(q)).sum::<f64>()
            }
            Dgf::Entropy => y
                .iter()
                .map(|&v| if v > 0.0 { v * v.ln() } else { 0.0 })
                .sum(),
        }
    }

    pub fn omega_grad(&self, y: &[f64]) -> Vec<f64> {
        match self.dgf {
            Dgf::Euclidean => y.to_vec(),
            Dgf::Power { .. } => {
                let (c, q) = self.power_constants();
                y.iter()
                    .map(|v| c * q * v.signum() * v.abs().powf(q - 1.0) * (*v != 0.0) as u8 as f64)
                    .collect()
            }
            Dgf::Entropy => y.iter().map(|v| v.max(ENTROPY_FLOOR).ln() + 1.0).collect(),
        }
    }

    /// `min_Y ω`.
    pub fn omega_min(&self) -> f64 {
        match &self.domain {
            Domain::SimplexProduct { blocks, block_size } => -((*blocks * *block_size) as f64).ln(),
            _ => 0.0,
        }
    }

    /// `max_Y ω`.
    pub fn omega_max(&self) -> f64 {
        match (&self.domain, self.dgf) {
            (Domain::EuclideanBall { radius, .. }, _) => 0.5 * radius * radius,
            (Domain::L1Ball { radius, .. }, Dgf::Euclidean) => 0.5 * radius * radius,
            (Domain::L1Ball { .. }, Dgf::Power { .. }) => self.power_constants().0,
            (Domain::BoxHyperplane { signs }, _) => {
                let pos = signs.iter().filter(|s| **s > 0.0).count();
                let neg = signs.len() - pos;
                pos.min(neg) as f64
            }
            (Domain::SimplexProduct { blocks, .. }, _) => -(*blocks as f64).ln(),
            _ => unreachable!("invalid domain/d.g.f. pairing"),
        }
    }

    /// `Ω = sqrt(2 [max_Y ω − min_Y ω])`; exact for every supported setup.
    pub fn omega_diameter(&self) -> f64 {
        (2.0 * (self.omega_max() - self.omega_min())).max(0.0).sqrt()
    }

    /// `V_y(z) = ω(z) − ω(y) − ⟨ω'(y), z − y⟩`.
    pub fn bregman(&self, y: &[f64], z: &[f64]) -> f64 {
        let g = self.omega_grad(y);
        let lin: f64 = g.iter().zip(z.iter().zip(y)).map(|(gi, (zi, yi))| gi * (zi - yi)).sum();
        self.omega(z) - self.omega(y) - lin
    }

    /// `Prox_y(ξ) = argmin_{z∈Y} ⟨ξ, z⟩ + V_y(z)`.
    pub fn prox(&self, y: &[f64], xi: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(y.len())?;
        self.check_dim(xi.len())?;
        let g = self.omega_grad(y);
        let eta: Vec<f64> = xi.iter().zip(&g).map(|(a, b)| a - b).collect();
        self.mirror(&eta)
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if n != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: n,
            });
        }
        Ok(())
    }

    /// `argmin_{z∈Y} ⟨η, z⟩ + ω(z)`.
    pub fn mirror(&self, eta: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(eta.len())?;
        match (&self.domain, self.dgf) {
            (Domain::EuclideanBall { radius, .. }, _) => {
                let n = norm2(eta);
                let s = if n <= *radius { -1.0 } else { -radius / n };
                Ok(eta.iter().map(|v| s * v).collect())
            }
            (Domain::L1Ball { radius, .. }, Dgf::Euclidean) => {
                let w: Vec<f64> = self.symmetrized(eta).iter().map(|v| -v).collect();
                Ok(project_l1_ball(&w, *radius))
            }
            (Domain::L1Ball { .. }, Dgf::Power { .. }) => {
                let eta = self.symmetrized(eta);
                self.power_mirror(&eta)
            }
            (Domain::BoxHyperplane { signs }, _) => {
                let w: Vec<f64> = eta.iter().map(|v| -v).collect();
                project_box_hyperplane(&w, signs)
            }
            (Domain::SimplexProduct { blocks, block_size }, _) => {
                let mass = 1.0 / *blocks as f64;
                let mut out = Vec::with_capacity(eta.len());
                for block in eta.chunks(*block_size) {
                    let m = block.iter().fold(f64::INFINITY, |a, b| a.min(*b));
                    let w: Vec<f64> = block.iter().map(|v| (-(v - m)).exp()).collect();
                    let s: f64 = w.iter().sum();
                    out.extend(w.iter().map(|v| mass * v / s));
                }
                Ok(out)
            }
            _ => unreachable!("invalid domain/d.g.f. pairing"),
        }
    }

    fn symmetrized(&self, eta: &[f64]) -> Vec<f64> {
        match self.symmetric() {
            Some(p) => {
                let mut out = eta.to_vec();
                for i in 0..p {
                    for j in 0..i {
                        let a = 0.5 * (eta[i * p + j] + eta[j * p + i]);
                        out[i * p + j] = a;
                        out[j * p + i] = a;
                    }
                }
                out
            }
            None => eta.to_vec(),
        }
    }

    fn power_mirror(&self, eta: &[f64]) -> Result<Vec<f64>> {
        let (c, q) = self.power_constants();
        let kappa = 1.0 / (q - 1.0);
        let cq = c * q;
        let coord = |a: f64, mu: f64| -> f64 {
            let t = a.abs() - mu;
            if t <= 0.0 {
                0.0
            } else {
                -a.signum() * (t / cq).powf(kappa)
            }
        };
        let mass = |mu: f64| -> f64 { eta.iter().map(|a| coord(*a, mu).abs()).sum() };
        let radius = 1.0;
        if mass(0.0) <= radius {
            return Ok(eta.iter().map(|a| coord(*a, 0.0)).collect());
        }
        let (mut lo, mut hi) = (0.0, norm_inf(eta));
        let mut converged = false;
        for _ in 0..BISECTION_CAP {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                converged = true;
                break;
            }
            let m = mass(mid);
            if m > radius {
                lo = mid;
            } else {
                hi = mid;
            }
            if (m - radius).abs() <= 1e-13 * radius {
                converged = true;
                if m <= radius {
                    break;
                }
            }
        }
        let residual = (mass(hi) - radius).abs();
        if !converged && residual > 1e-10 {
            return Err(Error::BisectionFailed {
                what: "power prox multiplier",
                iterations: BISECTION_CAP,
                residual,
            });
        }
        Ok(eta.iter().map(|a| coord(*a, hi)).collect())
    }

    /// Jacobian-vector product of the mirror map: `(∂ mirror(η) / ∂η) v`,
    /// evaluated at `y = mirror(η)`.
    pub fn mirror_jvp(&self, eta: &[f64], y: &[f64], v: &[f64]) -> Vec<f64> {
        match (&self.domain, self.dgf) {
            (Domain::EuclideanBall { radius, .. }, _) => {
                let n = norm2(eta);
                if n <= *radius {
                    v.iter().map(|x| -x).collect()
                } else {
                    let proj = dot(eta, v) / (n * n);
                    v.iter()
                        .zip(eta)
                        .map(|(vi, ei)| -(radius / n) * (vi - ei * proj))
                        .collect()
                }
            }
            (Domain::L1Ball { radius, .. }, Dgf::Euclidean) => {
                let v = self.symmetrized(v);
                let w_norm: f64 = self.symmetrized(eta).iter().map(|x| x.abs()).sum();
                if w_norm <= *radius {
                    return v.iter().map(|x| -x).collect();
                }
                let support: Vec<usize> = (0..y.len()).filter(|&i| y[i] != 0.0).collect();
                let mut out = vec![0.0; y.len()];
                if support.is_empty() {
                    return out;
                }
                let s_dot: f64 = support.iter().map(|&i| y[i].signum() * v[i]).sum();
                let k = support.len() as f64;
                for &i in &support {
                    out[i] = -(v[i] - y[i].signum() * s_dot / k);
                }
                out
            }
            (Domain::L1Ball { .. }, Dgf::Power { .. }) => {
                let v = self.symmetrized(v);
                let eta = self.symmetrized(eta);
                let (c, q) = self.power_constants();
                let kappa = 1.0 / (q - 1.0);
                let cq = c * q;
                // Recover the ℓ1 multiplier from the largest coordinate.
                let (imax, _) = y
                    .iter()
                    .enumerate()
                    .fold((0, -1.0), |acc, (i, x)| if x.abs() > acc.1 { (i, x.abs()) } else { acc });
                let mu = if y[imax] == 0.0 {
                    0.0
                } else {
                    (eta[imax].abs() - cq * y[imax].abs().powf(q - 1.0)).max(0.0)
                };
                let active = mu > 1e-12 * (1.0 + eta[imax].abs());
                // φ'_i = κ |y_i| / t_i with t_i = |η_i| − μ.
                let dphi: Vec<f64> = (0..y.len())
                    .map(|i| {
                        if y[i] == 0.0 {
                            0.0
                        } else {
                            let t = eta[i].abs() - mu;
                            if t > 0.0 {
                                kappa * y[i].abs() / t
                            } else {
                                0.0
                            }
                        }
                    })
                    .collect();
                let s: Vec<f64> = eta.iter().map(|e| e.signum()).collect();
                let dmu = if active {
                    let den: f64 = dphi.iter().sum();
                    if den > 0.0 {
                        (0..y.len()).map(|i| dphi[i] * s[i] * v[i]).sum::<f64>() / den
                    } else {
                        0.0
                    }
                } else {
                    0.0
                };
                let _ = cq;
                (0..y.len()).map(|i| -s[i] * dphi[i] * (s[i] * v[i] - dmu)).collect()
            }
            (Domain::BoxHyperplane { signs }, _) => {
                let free: Vec<usize> = (0..y.len()).filter(|&i| y[i] > 0.0 && y[i] < 1.0).collect();
                let mut out = vec![0.0; y.len()];
                if free.is_empty() {
                    return out;
                }
                // dw = −v
                let dmu: f64 = free.iter().map(|&i| -signs[i] * v[i]).sum::<f64>() / free.len() as f64;
                for &i in &free {
                    out[i] = -v[i] - signs[i] * dmu;
                }
                out
            }
            (Domain::SimplexProduct { blocks, block_size }, _) => {
                let nb = *blocks as f64;
                let mut out = vec![0.0; y.len()];
                for b in 0..*blocks {
                    let r = b * block_size..(b + 1) * block_size;
                    let yv: f64 = dot(&y[r.clone()], &v[r.clone()]);
                    for i in r {
                        out[i] = -(y[i] * v[i] - nb * y[i] * yv);
                    }
                }
                out
            }
            _ => unreachable!("invalid domain/d.g.f. pairing"),
        }
    }

    /// `max_{y∈Y} ⟨η, y⟩` together with a maximizer.
    pub fn support(&self, eta: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_dim(eta.len())?;
        match &self.domain {
            Domain::EuclideanBall { radius, .. } => {
                let n = norm2(eta);
                if n == 0.0 {
                    return Ok((0.0, vec![0.0; eta.len()]));
                }
                Ok((radius * n, eta.iter().map(|v| radius * v / n).collect()))
            }
            Domain::L1Ball {
                radius, symmetric, ..
            } => {
                let eta = self.symmetrized(eta);
                let mut best = 0;
                for (i, v) in eta.iter().enumerate() {
                    if v.abs() > eta[best].abs() {
                        best = i;
                    }
                }
                let val = eta[best].abs();
                let mut arg = vec![0.0; eta.len()];
                let sgn = if eta[best] < 0.0 { -1.0 } else { 1.0 };
                match symmetric {
                    Some(p) if best / p != best % p => {
                        let (i, j) = (best / p, best % p);
                        arg[i * p + j] = 0.5 * radius * sgn;
                        arg[j * p + i] = 0.5 * radius * sgn;
                    }
                    _ => arg[best] = radius * sgn,
                }
                Ok((radius * val, arg))
            }
            Domain::BoxHyperplane { signs } => Ok(support_box_hyperplane(eta, signs)),
            Domain::SimplexProduct { blocks, block_size } => {
                let mass = 1.0 / *blocks as f64;
                let mut val = 0.0;
                let mut arg = vec![0.0; eta.len()];
                for (b, block) in eta.chunks(*block_size).enumerate() {
                    let mut best = 0;
                    for (i, v) in block.iter().enumerate() {
                        if *v > block[best] {
                            best = i;
                        }
                    }
                    val += mass * block[best];
                    arg[b * block_size + best] = mass;
                }
                Ok((val, arg))
            }
        }
    }

    /// Largest constraint violation of `y` (0 when feasible).
    pub fn violation(&self, y: &[f64]) -> f64 {
        if y.len() != self.dim() || y.iter().any(|v| !v.is_finite()) {
            return f64::INFINITY;
        }
        let sym_violation = match self.symmetric() {
            Some(p) => {
                let mut m = 0.0_f64;
                for i in 0..p {
                    for j in 0..i {
                        m = m.max((y[i * p + j] - y[j * p + i]).abs());
                    }
                }
                m
            }
            None => 0.0,
        };
        match &self.domain {
            Domain::EuclideanBall { radius, .. } => (norm2(y) - radius).max(0.0),
            Domain::L1Ball { radius, .. } => (norm1(y) - radius).max(0.0).max(sym_violation),
            Domain::BoxHyperplane { signs } => {
                let box_v = y.iter().fold(0.0_f64, |m, v| m.max(-v).max(v - 1.0));
                box_v.max(dot(signs, y).abs())
            }
            Domain::SimplexProduct { blocks, block_size } => {
                let mass = 1.0 / *blocks as f64;
                let neg = y.iter().fold(0.0_f64, |m, v| m.max(-v));
                let sums = y
                    .chunks(*block_size)
                    .fold(0.0_f64, |m, b| m.max((b.iter().sum::<f64>() - mass).abs()));
                neg.max(sums)
            }
        }
    }

    /// Membership within relative tolerance `MEMBERSHIP_TOL`.
    pub fn contains(&self, y: &[f64]) -> bool {
        let scale = match &self.domain {
            Domain::EuclideanBall { radius, .. } | Domain::L1Ball { radius, .. } => radius.max(1.0),
            _ => 1.0,
        };
        self.violation(y) <= MEMBERSHIP_TOL * scale
    }

    /// A random point of `Y` (mirror image of a random linear form, or a
    /// support maximizer now and then so that the boundary is sampled too).
    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let n = self.dim();
        let scale = 10.0_f64.powf(rng.random_range(-1.0..2.0));
        let eta: Vec<f64> = (0..n).map(|_| scale * (rng.random::<f64>() * 2.0 - 1.0)).collect();
        let eta = match self.symmetric() {
            Some(_) => self.symmetrized(&eta),
            None => eta,
        };
        if rng.random::<f64>() < 0.1 {
            if let Ok((_, y)) = self.support(&eta) {
                return y;
            }
        }
        self.mirror(&eta).unwrap_or_else(|_| self.center())
    }
}

/// Cached Bregman data at a base point.
#[derive(Debug, Clone)]
pub struct BregmanState {
    pub point: Vec<f64>,
    pub grad: Vec<f64>,
    omega_at_point: f64,
}

impl BregmanState {
    pub fn new(setup: &ProximalSetup, point: Vec<f64>) -> Self {
        let grad = setup.omega_grad(&point);
        let omega_at_point = setup.omega(&point);
        BregmanState {
            point,
            grad,
            omega_at_point,
        }
    }

    pub fn distance(&self, setup: &ProximalSetup, z: &[f64]) -> f64 {
        let lin: f64 = self
            .grad
            .iter()
            .zip(z.iter().zip(&self.point))
            .map(|(g, (zi, yi))| g * (zi - yi))
            .sum();
        setup.omega(z) - self.omega_at_point - lin
    }

    pub fn prox(&self, setup: &ProximalSetup, xi: &[f64]) -> Result<Vec<f64>> {
        let eta: Vec<f64> = xi.iter().zip(&self.grad).map(|(a, b)| a - b).collect();
        setup.mirror(&eta)
    }
}

/// Euclidean projection onto `{‖z‖₁ ≤ radius}` (sort-based).
pub fn project_l1_ball(w: &[f64], radius: f64) -> Vec<f64> {
    if norm1(w) <= radius {
        return w.to_vec();
    }
    let mut mags: Vec<f64> = w.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.partial_cmp(a).unwrap_or(core::cmp::Ordering::Equal));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, m) in mags.iter().enumerate() {
        cum += m;
        let t = (cum - radius) / (k + 1) as f64;
        if t < *m {
            theta = t;
        } else {
            break;
        }
    }
    w.iter()
        .map(|v| v.signum() * (v.abs() - theta).max(0.0))
        .collect()
}

/// Euclidean projection onto `{0 ≤ z ≤ 1, Σ ε_j z_j = 0}`.
pub fn project_box_hyperplane(w: &[f64], signs: &[f64]) -> Result<Vec<f64>> {
    let at = |mu: f64| -> Vec<f64> {
        w.iter()
            .zip(signs)
            .map(|(wi, si)| (wi - mu * si).clamp(0.0, 1.0))
            .collect()
    };
    let resid = |z: &[f64]| dot(signs, z);
    let bound = norm_inf(w) + 1.0;
    let (mut lo, mut hi) = (-bound, bound);
    let tol = 1e-12;
    let mut mu = 0.0;
    let mut done = false;
    for _ in 0..BISECTION_CAP {
        mu = 0.5 * (lo + hi);
        let z = at(mu);
        let r = resid(&z);
        if r.abs() <= tol {
            done = true;
            break;
        }
        // Residual is nonincreasing in μ.
        if r > 0.0 {
            lo = mu;
        } else {
            hi = mu;
        }
        // Exact solve on the current free set once it is stable.
        let free: Vec<usize> = (0..w.len()).filter(|&i| z[i] > 0.0 && z[i] < 1.0).collect();
        if !free.is_empty() {
            let fixed: f64 = (0..w.len())
                .filter(|&i| z[i] >= 1.0)
                .map(|i| signs[i])
                .sum();
            let s: f64 = free.iter().map(|&i| signs[i] * w[i]).sum();
            let cand = (s + fixed) / free.len() as f64;
            if cand >= lo && cand <= hi {
                let zc = at(cand);
                if resid(&zc).abs() <= tol {
                    mu = cand;
                    done = true;
                    break;
                }
            }
        }
        if hi - lo <= f64::EPSILON * bound {
            break;
        }
    }
    let mut z = at(mu);
    let mut r = resid(&z);
    // Rounding noise of the residual grows with the size of `w`.
    let noise = 8.0 * f64::EPSILON * (w.iter().map(|v| v.abs()).sum::<f64>() + w.len() as f64 * mu.abs());
    if !done && r.abs() > 1e-10_f64.max(noise) {
        return Err(Error::BisectionFailed {
            what: "box-hyperplane projection multiplier",
            iterations: BISECTION_CAP,
            residual: r.abs(),
        });
    }
    // Move the leftover onto interior coordinates so that ⟨s, z⟩ = 0.
    for i in 0..z.len() {
        if r == 0.0 {
            break;
        }
        if z[i] > 0.0 && z[i] < 1.0 {
            let new = (z[i] - signs[i] * r).clamp(0.0, 1.0);
            r -= signs[i] * (z[i] - new);
            z[i] = new;
        }
    }
    Ok(z)
}

/// `max {⟨η, y⟩ : 0 ≤ y ≤ 1, Σ ε_j y_j = 0}` by exact minimization of the
/// piecewise-linear Lagrangian dual `μ ↦ Σ_j [η_j − μ ε_j]_+`.
pub fn support_box_hyperplane(eta: &[f64], signs: &[f64]) -> (f64, Vec<f64>) {
    let n = eta.len();
    // Term j equals [ε_j (b_j − μ)]_+ with breakpoint b_j = ε_j η_j.
    let mut order: Vec<usize> = (0..n).collect();
    let b: Vec<f64> = (0..n).map(|j| signs[j] * eta[j]).collect();
    order.sort_by(|&i, &j| b[i].partial_cmp(&b[j]).unwrap_or(core::cmp::Ordering::Equal));
    let n_pos = signs.iter().filter(|s| **s > 0.0).count();
    // Right-slope at μ: #{neg: b ≤ μ} − #{pos: b > μ}.
    let mut neg_le = 0usize;
    let mut pos_le = 0usize;
    let mut mu = b[order[0]];
    for (k, &j) in order.iter().enumerate() {
        if signs[j] > 0.0 {
            pos_le += 1;
        } else {
            neg_le += 1;
        }
        let last_at_value = k + 1 == n || b[order[k + 1]] > b[j];
        if last_at_value {
            let slope = neg_le as isize - (n_pos - pos_le) as isize;
            if slope >= 0 {
                mu = b[j];
                break;
            }
        }
    }
    let value: f64 = (0..n).map(|j| (eta[j] - mu * signs[j]).max(0.0)).sum();
    // Primal maximizer: strict terms at 1, ties filled to meet the hyperplane.
    let mut y = vec![0.0; n];
    let tie_tol = 1e-14 * (1.0 + norm_inf(eta));
    let mut ties_pos = Vec::new();
    let mut ties_neg = Vec::new();
    let mut balance = 0.0;
    for j in 0..n {
        let r = eta[j] - mu * signs[j];
        if r > tie_tol {
            y[j] = 1.0;
            balance += signs[j];
        } else if r.abs() <= tie_tol {
            if signs[j] > 0.0 {
                ties_pos.push(j);
            } else {
                ties_neg.push(j);
            }
        }
    }
    // Need Σ_{ties} ε_j y_j = −balance.
    let need = -balance;
    if need > 0.0 && !ties_pos.is_empty() {
        let each = (need / ties_pos.len() as f64).min(1.0);
        for &j in &ties_pos {
            y[j] = each;
        }
    } else if need < 0.0 && !ties_neg.is_empty() {
        let each = (-need / ties_neg.len() as f64).min(1.0);
        for &j in &ties_neg {
            y[j] = each;
        }
    }
    (value, y)
}
