//! Problem families: matrix completion with label sharing, uniform-norm PSD
//! completion, nuclear-norm SVM and multi-class ∞|2 classification.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::certificate::PrimalPoint;
use crate::duality::{DualOperator, FenchelProblem, Psi};
use crate::error::{Error, Result};
use crate::linalg::{norm2, LinearForm, Mat, SparseMat};
use crate::lo::{LoOracle, PrimalDomain};
use crate::prox::{Dgf, ProximalSetup, POWER_ALPHA};

/// RNG for a named stream of a seeded run.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const STREAM_CELLS: u64 = 1;
const STREAM_LABELS: u64 = 2;
const STREAM_SIGNAL: u64 = 3;
const STREAM_NOISE: u64 = 4;
const STREAM_DATA: u64 = 5;

const PERMUTATION_RESAMPLES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McInstance {
    pub p: usize,
    pub r: usize,
    /// Number of labels `N`.
    pub n: usize,
    pub d: usize,
    /// Observed cells `(row, col)`.
    pub cells: Vec<(usize, usize)>,
    /// Label of each cell, in `0..n`.
    pub labels: Vec<usize>,
    pub w: Vec<f64>,
    pub v: Mat,
    pub a: Mat,
    pub seed: u64,
}

impl McInstance {
    /// `[P x]_ℓ = Σ_{cells labelled ℓ} x_ij`.
    pub fn project(&self, x: &PrimalPoint) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        let dense;
        let get: Box<dyn Fn(usize, usize) -> f64 + '_> = match x {
            PrimalPoint::Dense(m) => Box::new(move |i, j| m.get(i, j)),
            PrimalPoint::Factored { terms, .. } if terms.len() * 4 < self.cells.len() => {
                Box::new(move |i, j| x.entry(i, j))
            }
            _ => {
                dense = x.to_dense();
                Box::new(|i, j| dense.get(i, j))
            }
        };
        for (&(i, j), &l) in self.cells.iter().zip(&self.labels) {
            out[l] += get(i, j);
        }
        out
    }

    /// `P* y`
    pub fn scatter(&self, y: &[f64]) -> SparseMat {
        SparseMat::new(
            self.p,
            self.p,
            self.cells
                .iter()
                .zip(&self.labels)
                .map(|(&(i, j), &l)| (i, j, y[l]))
                .collect(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |s: String| Err(Error::InvalidInstance(s));
        if self.cells.len() != self.p * self.r || self.labels.len() != self.cells.len() {
            return bad(format!("expected {} cells", self.p * self.r));
        }
        let mut rows = vec![0usize; self.p];
        let mut cols = vec![0usize; self.p];
        let mut per_label = vec![0usize; self.n];
        for (&(i, j), &l) in self.cells.iter().zip(&self.labels) {
            if i >= self.p || j >= self.p || l >= self.n {
                return bad("cell or label out of range".into());
            }
            rows[i] += 1;
            cols[j] += 1;
            per_label[l] += 1;
        }
        if rows.iter().chain(&cols).any(|c| *c != self.r) {
            return bad("row/column counts differ from r".into());
        }
        let share = self.p * self.r / self.n;
        if per_label.iter().any(|c| *c != share) {
            return bad("labels are not balanced".into());
        }
        Ok(())
    }
}

/// Random matrix-completion instance: `r` disjoint random permutations as the
/// cell set, balanced labels, a `d`-sparse signal and clipped Gaussian noise.
pub fn gen_mc(p: usize, r: usize, n: usize, d: usize, seed: u64) -> Result<McInstance> {
    if p == 0 || r == 0 || n == 0 {
        return Err(Error::InvalidConfig("p, r and N must be positive".into()));
    }
    if r > p {
        return Err(Error::InvalidConfig("r cannot exceed p".into()));
    }
    if (p * r) % n != 0 {
        return Err(Error::InvalidConfig(format!("N = {n} does not divide p·r = {}", p * r)));
    }
    if d == 0 || d > n {
        return Err(Error::InvalidConfig("need 1 ≤ d ≤ N".into()));
    }
    let mut rng = stream_rng(seed, STREAM_CELLS);
    let mut perms: Vec<Vec<usize>> = Vec::with_capacity(r);
    for k in 0..r {
        let mut tries = 0;
        loop {
            let mut perm: Vec<usize> = (0..p).collect();
            perm.shuffle(&mut rng);
            if perms.iter().all(|q| q.iter().zip(&perm).all(|(a, b)| a != b)) {
                perms.push(perm);
                break;
            }
            tries += 1;
            if tries >= PERMUTATION_RESAMPLES {
                return Err(Error::InvalidConfig(format!(
                    "could not draw permutation {} disjoint from the previous ones in {PERMUTATION_RESAMPLES} tries",
                    k + 1
                )));
            }
        }
    }
    let mut cells: Vec<(usize, usize)> = perms
        .iter()
        .flat_map(|perm| perm.iter().enumerate().map(|(i, &j)| (i, j)))
        .collect();
    cells.sort_unstable();

    let mut rng = stream_rng(seed, STREAM_LABELS);
    let share = p * r / n;
    let mut labels: Vec<usize> = (0..n).flat_map(|l| core::iter::repeat(l).take(share)).collect();
    labels.shuffle(&mut rng);

    let mut rng = stream_rng(seed, STREAM_SIGNAL);
    let mut support: Vec<usize> = (0..n).collect();
    support.shuffle(&mut rng);
    let mut w = vec![0.0; n];
    for &l in &support[..d] {
        w[l] = rng.sample(StandardNormal);
    }

    let mut inst = McInstance {
        p,
        r,
        n,
        d,
        cells,
        labels,
        w,
        v: Mat::zeros(p, p),
        a: Mat::zeros(p, p),
        seed,
    };
    let pw = inst.scatter(&inst.w).to_dense();
    let nuc = pw.nuclear_norm();
    if nuc == 0.0 {
        return Err(Error::InvalidInstance("zero signal".into()));
    }
    let v = Mat::from_fn(p, p, |i, j| pw.get(i, j) / nuc);
    let vmax = v.max_abs();
    let mut rng = stream_rng(seed, STREAM_NOISE);
    let a = Mat::from_fn(p, p, |i, j| {
        let xi: f64 = rng.sample(StandardNormal);
        v.get(i, j) + 2.0 * vmax * xi.clamp(-1.0, 1.0)
    });
    inst.v = v;
    inst.a = a;
    Ok(inst)
}

struct McOperator {
    inst: McInstance,
}

impl DualOperator for McOperator {
    fn dual_dim(&self) -> usize {
        self.inst.n
    }

    fn primal_shape(&self) -> (usize, usize) {
        (self.inst.p, self.inst.p)
    }

    fn apply(&self, y: &[f64]) -> LinearForm {
        LinearForm::Sparse(self.inst.scatter(y))
    }

    fn adjoint(&self, x: &PrimalPoint) -> Vec<f64> {
        self.inst.project(x)
    }
}

/// `min_{‖y‖₁≤1} f(y) = σ_max(P*y) − ⟨Pa, y⟩`, the dual of
/// `max_{‖σ(x)‖₁≤1} −‖P(x − a)‖_∞`.
pub fn build_mc_dual(inst: &McInstance) -> Result<FenchelProblem> {
    inst.validate()?;
    let pa = inst.project(&PrimalPoint::Dense(inst.a.clone()));
    let c: Vec<f64> = pa.iter().map(|v| -v).collect();
    let eval_inst = inst.clone();
    let lf = {
        // f'(y) = P x(y) − Pa and |[Px]_ℓ| ≤ #cells(ℓ) · max|x_ij| ≤ #cells(ℓ).
        let col = (inst.p * inst.r / inst.n) as f64;
        col + pa.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    };
    Ok(FenchelProblem {
        name: "mc".into(),
        op: Box::new(McOperator { inst: inst.clone() }),
        shift: None,
        psi: Psi::Linear(c),
        dual_setup: ProximalSetup::l1_ball(inst.n, 1.0),
        lo: LoOracle::new(PrimalDomain::NuclearBall {
            rows: inst.p,
            cols: inst.p,
            radius: 1.0,
        }),
        primal_eval: Some(Box::new(move |x| {
            let px = eval_inst.project(x);
            let pa = eval_inst.project(&PrimalPoint::Dense(eval_inst.a.clone()));
            Ok(-px.iter().zip(&pa).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())))
        })),
        lf_bound: Some(lf),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdCompletionInstance {
    pub b: Mat,
    pub radius: f64,
}

impl PsdCompletionInstance {
    pub fn validate(&self) -> Result<()> {
        if self.b.rows != self.b.cols || !self.b.is_symmetric(1e-12) {
            return Err(Error::InvalidInstance("b must be square and symmetric".into()));
        }
        if !(self.radius > 0.0) {
            return Err(Error::InvalidInstance("R must be positive".into()));
        }
        Ok(())
    }
}

/// Symmetric `b` with standard Gaussian entries scaled by `scale`.
pub fn random_psd_completion(p: usize, radius: f64, scale: f64, seed: u64) -> PsdCompletionInstance {
    let mut rng = stream_rng(seed, STREAM_DATA);
    let mut b = Mat::zeros(p, p);
    for i in 0..p {
        for j in 0..=i {
            let v: f64 = rng.sample(StandardNormal);
            b.set(i, j, scale * v);
            b.set(j, i, scale * v);
        }
    }
    PsdCompletionInstance { b, radius }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PsdDgf {
    Power,
    Euclidean,
}

struct NegIdentity {
    p: usize,
}

impl DualOperator for NegIdentity {
    fn dual_dim(&self) -> usize {
        self.p * self.p
    }

    fn primal_shape(&self) -> (usize, usize) {
        (self.p, self.p)
    }

    fn apply(&self, y: &[f64]) -> LinearForm {
        LinearForm::Dense(Mat::from_vec(self.p, self.p, y.iter().map(|v| -v).collect()))
    }

    fn adjoint(&self, x: &PrimalPoint) -> Vec<f64> {
        x.to_dense().data.iter().map(|v| -v).collect()
    }
}

/// `f_*(x) = −‖x − b‖_∞ = min_{‖y‖₁≤1} ⟨b − x, y⟩` over the spectrahedron.
pub fn build_psd_completion(inst: &PsdCompletionInstance, dgf: PsdDgf, sparsify: Option<f64>) -> Result<FenchelProblem> {
    inst.validate()?;
    let p = inst.b.rows;
    let setup = match dgf {
        PsdDgf::Power => ProximalSetup::symmetric_l1_ball(p, Dgf::Power { alpha: POWER_ALPHA }),
        PsdDgf::Euclidean => ProximalSetup::symmetric_l1_ball(p, Dgf::Euclidean),
    };
    let mut lo = LoOracle::new(PrimalDomain::Spectrahedron { dim: p, radius: inst.radius });
    lo.sparsify_eps = sparsify;
    let b = inst.b.clone();
    Ok(FenchelProblem {
        name: "psd".into(),
        op: Box::new(NegIdentity { p }),
        shift: None,
        psi: Psi::Linear(inst.b.data.clone()),
        dual_setup: setup,
        lo,
        primal_eval: Some(Box::new(move |x| {
            let m = x.to_dense();
            Ok(-m.data.iter().zip(&b.data).fold(0.0_f64, |a, (u, v)| a.max((u - v).abs())))
        })),
        // |[f'(y)]_ij| = |b_ij − x_ij| ≤ ‖b‖_∞ + R.
        lf_bound: Some(inst.b.max_abs() + inst.radius),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmInstance {
    pub z: Vec<Mat>,
    pub labels: Vec<f64>,
    pub radius: f64,
}

impl SvmInstance {
    pub fn shape(&self) -> (usize, usize) {
        (self.z[0].rows, self.z[0].cols)
    }

    pub fn validate(&self) -> Result<()> {
        if self.z.is_empty() || self.z.len() != self.labels.len() {
            return Err(Error::InvalidInstance("need one label per example".into()));
        }
        let shape = self.shape();
        for (j, z) in self.z.iter().enumerate() {
            if (z.rows, z.cols) != shape {
                return Err(Error::InvalidInstance(format!("example {j} has a different shape")));
            }
            let s = z.singular_values().first().copied().unwrap_or(0.0);
            if s > 1.0 + 1e-9 {
                return Err(Error::InvalidInstance(format!("example {j} has spectral norm {s} > 1")));
            }
        }
        if !self.labels.contains(&1.0) || !self.labels.contains(&-1.0) {
            return Err(Error::InvalidInstance("both classes must be present".into()));
        }
        if !(self.radius > 0.0) {
            return Err(Error::InvalidInstance("R must be positive".into()));
        }
        Ok(())
    }
}

/// Rescales each example to spectral norm at most one.
pub fn normalize_spectral(z: &mut Mat) {
    let s = z.singular_values().first().copied().unwrap_or(0.0);
    if s > 1.0 {
        for v in z.data.iter_mut() {
            *v /= s;
        }
    }
}

/// Two classes separated along a planted low-rank direction.
pub fn random_svm(n: usize, p: usize, q: usize, radius: f64, seed: u64) -> SvmInstance {
    let mut rng = stream_rng(seed, STREAM_DATA);
    let u: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
    let v: Vec<f64> = (0..q).map(|_| rng.sample(StandardNormal)).collect();
    let planted = Mat::outer(1.0 / (norm2(&u) * norm2(&v)), &u, &v);
    let mut z = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for j in 0..n {
        let eps = if j % 2 == 0 { 1.0 } else { -1.0 };
        let mut m = Mat::from_fn(p, q, |_, _| 0.3 * rng.sample::<f64, _>(StandardNormal));
        m.add_scaled(eps, &planted);
        normalize_spectral(&mut m);
        z.push(m);
        labels.push(eps);
    }
    SvmInstance { z, labels, radius }
}

struct SvmOperator {
    z: Vec<Mat>,
    labels: Vec<f64>,
    shape: (usize, usize),
}

impl DualOperator for SvmOperator {
    fn dual_dim(&self) -> usize {
        self.z.len()
    }

    fn primal_shape(&self) -> (usize, usize) {
        self.shape
    }

    fn apply(&self, y: &[f64]) -> LinearForm {
        let n = self.z.len() as f64;
        let mut out = Mat::zeros(self.shape.0, self.shape.1);
        for ((z, e), w) in self.z.iter().zip(&self.labels).zip(y) {
            if *w != 0.0 {
                out.add_scaled(w * e / n, z);
            }
        }
        LinearForm::Dense(out)
    }

    fn adjoint(&self, x: &PrimalPoint) -> Vec<f64> {
        let n = self.z.len() as f64;
        self.z
            .iter()
            .zip(&self.labels)
            .map(|(z, e)| e * x.frob_dot(z) / n)
            .collect()
    }
}

/// `f_*(x) = min_{y∈Y} N⁻¹ Σ y_j (ε_j⟨z_j, x⟩ − 1)` over
/// `Y = {0 ≤ y ≤ 1, Σ ε_j y_j = 0}` and the nuclear ball of radius `R`.
pub fn build_svm(inst: &SvmInstance) -> Result<FenchelProblem> {
    inst.validate()?;
    let n = inst.z.len();
    let (p, q) = inst.shape();
    Ok(FenchelProblem {
        name: "svm".into(),
        op: Box::new(SvmOperator {
            z: inst.z.clone(),
            labels: inst.labels.clone(),
            shape: (p, q),
        }),
        shift: None,
        psi: Psi::Linear(vec![-1.0 / n as f64; n]),
        dual_setup: ProximalSetup::box_hyperplane(inst.labels.clone())?,
        lo: LoOracle::new(PrimalDomain::NuclearBall {
            rows: p,
            cols: q,
            radius: inst.radius,
        }),
        // The generic evaluator is exact here: the box-hyperplane support
        // is an exact breakpoint search.
        primal_eval: None,
        // ‖f'(y)‖₂ = N⁻¹ ‖(ε_j⟨z_j, x⟩ − 1)_j‖₂ ≤ (R + 1)/√N.
        lf_bound: Some((inst.radius + 1.0) / (n as f64).sqrt()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticlassInstance {
    /// Feature vectors `z_j ∈ R^q`.
    pub z: Vec<Vec<f64>>,
    /// Class of each example, in `0..classes`.
    pub labels: Vec<usize>,
    pub classes: usize,
    pub radius: f64,
}

impl MulticlassInstance {
    pub fn features(&self) -> usize {
        self.z[0].len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.z.is_empty() || self.z.len() != self.labels.len() {
            return Err(Error::InvalidInstance("need one label per example".into()));
        }
        let q = self.features();
        for (j, z) in self.z.iter().enumerate() {
            if z.len() != q {
                return Err(Error::InvalidInstance(format!("example {j} has a different length")));
            }
            if norm2(z) > 1.0 + 1e-9 {
                return Err(Error::InvalidInstance(format!("example {j} has norm above 1")));
            }
        }
        if self.classes < 2 || self.labels.iter().any(|l| *l >= self.classes) {
            return Err(Error::InvalidInstance("labels out of range".into()));
        }
        if !(self.radius > 0.0) {
            return Err(Error::InvalidInstance("R must be positive".into()));
        }
        Ok(())
    }

    /// `f_*(x) = −N⁻¹ Σ_j max_i [z_jᵀ(x^i − x^{i(j)}) + χ̄_ji]`.
    pub fn primal_value(&self, x: &Mat) -> f64 {
        let n = self.z.len() as f64;
        let mut total = 0.0;
        for (z, &l) in self.z.iter().zip(&self.labels) {
            let s = x.matvec(z);
            let m = (0..self.classes)
                .map(|i| s[i] - s[l] + if i == l { 0.0 } else { 1.0 })
                .fold(f64::NEG_INFINITY, f64::max);
            total += m;
        }
        -total / n
    }
}

/// Class centroids on a sphere plus Gaussian noise, normalized to the unit ball.
pub fn random_multiclass(n: usize, classes: usize, q: usize, radius: f64, seed: u64) -> MulticlassInstance {
    let mut rng = stream_rng(seed, STREAM_DATA);
    let centers: Vec<Vec<f64>> = (0..classes)
        .map(|_| {
            let c: Vec<f64> = (0..q).map(|_| rng.sample(StandardNormal)).collect();
            let s = norm2(&c).max(1e-12);
            c.iter().map(|v| v / s).collect()
        })
        .collect();
    let mut z = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for j in 0..n {
        let l = j % classes;
        let mut v: Vec<f64> = centers[l]
            .iter()
            .map(|c| c + 0.4 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let s = norm2(&v);
        if s > 1.0 {
            for t in v.iter_mut() {
                *t /= s;
            }
        }
        z.push(v);
        labels.push(l);
    }
    MulticlassInstance {
        z,
        labels,
        classes,
        radius,
    }
}

struct MulticlassOperator {
    z: Vec<Vec<f64>>,
    labels: Vec<usize>,
    classes: usize,
}

impl DualOperator for MulticlassOperator {
    fn dual_dim(&self) -> usize {
        self.z.len() * self.classes
    }

    fn primal_shape(&self) -> (usize, usize) {
        (self.classes, self.z[0].len())
    }

    /// `Bᵀ y`: row `i(j)` gains `(Σ_i y^j_i) z_j`, row `i` loses `y^j_i z_j`.
    fn apply(&self, y: &[f64]) -> LinearForm {
        let (m, q) = self.primal_shape();
        let mut out = Mat::zeros(m, q);
        for (j, (z, &l)) in self.z.iter().zip(&self.labels).enumerate() {
            let block = &y[j * m..(j + 1) * m];
            let total: f64 = block.iter().sum();
            for i in 0..m {
                let w = if i == l { total - block[i] } else { -block[i] };
                if w != 0.0 {
                    crate::linalg::axpy(w, z, &mut out.data[i * q..(i + 1) * q]);
                }
            }
        }
        LinearForm::Dense(out)
    }

    /// `[B^j x]_i = z_jᵀ(x^{i(j)} − x^i)`.
    fn adjoint(&self, x: &PrimalPoint) -> Vec<f64> {
        let x = x.to_dense();
        let m = self.classes;
        let mut out = Vec::with_capacity(self.z.len() * m);
        for (z, &l) in self.z.iter().zip(&self.labels) {
            let s = x.matvec(z);
            out.extend((0..m).map(|i| s[l] - s[i]));
        }
        out
    }
}

/// `f_*(x) = min_{y ∈ Δ^N} ⟨Bx − χ̄, y⟩` over rows of norm at most `R`.
pub fn build_multiclass(inst: &MulticlassInstance) -> Result<FenchelProblem> {
    inst.validate()?;
    let (n, m, q) = (inst.z.len(), inst.classes, inst.features());
    let mut c = Vec::with_capacity(n * m);
    for &l in &inst.labels {
        c.extend((0..m).map(|i| if i == l { 0.0 } else { -1.0 }));
    }
    let eval = inst.clone();
    Ok(FenchelProblem {
        name: "multiclass".into(),
        op: Box::new(MulticlassOperator {
            z: inst.z.clone(),
            labels: inst.labels.clone(),
            classes: m,
        }),
        shift: None,
        psi: Psi::Linear(c),
        dual_setup: ProximalSetup::simplex_product(n, m),
        lo: LoOracle::new(PrimalDomain::InfTwoBox {
            blocks: m,
            block_size: q,
            radius: inst.radius,
        }),
        primal_eval: Some(Box::new(move |x| Ok(eval.primal_value(&x.to_dense())))),
        // ‖Bx‖_∞ ≤ 2R and χ̄ ∈ [0, 1].
        lf_bound: Some(2.0 * inst.radius + 1.0),
    })
}
