//! Linear optimization oracles `ξ ↦ argmax_{x∈X} ⟨x, ξ⟩` for the primal
//! domains: nuclear-norm ball, spectrahedron and the `∞|2` block box.
//!
//! The two spectral domains use restarted Lanczos from a random start seeded
//! by the form; the stopping rule is the eigen/singular residual, so the
//! reported `delta` is a residual-based estimate rather than a hard guarantee.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::certificate::PrimalPoint;
use crate::error::{Error, Result};

use crate::linalg::{axpy, dot, norm2, LinearForm, Mat, SparseMat};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PrimalDomain {
    /// `{x ∈ R^{rows×cols} : ‖σ(x)‖₁ ≤ radius}`
    NuclearBall { rows: usize, cols: usize, radius: f64 },
    /// `{x ⪰ 0 : Tr x = radius}`
    Spectrahedron { dim: usize, radius: f64 },
    /// `blocks × block_size` matrices whose rows have ℓ2 norm at most `radius`.
    InfTwoBox {
        blocks: usize,
        block_size: usize,
        radius: f64,
    },
}

impl PrimalDomain {
    pub fn shape(&self) -> (usize, usize) {
        match *self {
            PrimalDomain::NuclearBall { rows, cols, .. } => (rows, cols),
            PrimalDomain::Spectrahedron { dim, .. } => (dim, dim),
            PrimalDomain::InfTwoBox {
                blocks, block_size, ..
            } => (blocks, block_size),
        }
    }

    pub fn radius(&self) -> f64 {
        match *self {
            PrimalDomain::NuclearBall { radius, .. }
            | PrimalDomain::Spectrahedron { radius, .. }
            | PrimalDomain::InfTwoBox { radius, .. } => radius,
        }
    }

    /// Constraint violation of a point (0 when feasible).
    pub fn violation(&self, x: &PrimalPoint) -> f64 {
        if x.shape() != self.shape() {
            return f64::INFINITY;
        }
        let r = self.radius();
        match self {
            PrimalDomain::NuclearBall { .. } => {
                let nuc = match x {
                    PrimalPoint::Factored { terms, .. } => {
                        // Triangle inequality is exact for a single term.
                        if terms.len() == 1 {
                            terms[0].weight.abs() * norm2(&terms[0].u) * norm2(&terms[0].v)
                        } else {
                            x.to_dense().nuclear_norm()
                        }
                    }
                    PrimalPoint::Dense(m) => m.nuclear_norm(),
                };
                (nuc - r).max(0.0)
            }
            PrimalDomain::Spectrahedron { dim, .. } => {
                let m = x.to_dense();
                let tr: f64 = (0..*dim).map(|i| m.get(i, i)).sum();
                let asym = (0..*dim)
                    .flat_map(|i| (0..*dim).map(move |j| (i, j)))
                    .fold(0.0_f64, |a, (i, j)| a.max((m.get(i, j) - m.get(j, i)).abs()));
                let min_eig = match x {
                    PrimalPoint::Factored { terms, .. } if terms.iter().all(|t| t.weight >= 0.0 && t.u == t.v) => 0.0,
                    _ => symmetric_min_eig(&m),
                };
                (tr - r).abs().max(asym).max((-min_eig).max(0.0))
            }
            PrimalDomain::InfTwoBox { .. } => {
                let m = x.to_dense();
                (0..m.rows)
                    .map(|i| norm2(m.row(i)) - r)
                    .fold(0.0, f64::max)
            }
        }
    }
}

/// Smallest eigenvalue of a symmetric matrix via power iteration on the shift.
fn symmetric_min_eig(m: &Mat) -> f64 {
    let s = (0..m.rows)
        .map(|i| m.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    if s == 0.0 {
        return 0.0;
    }
    // Largest eigenvalue of sI − m is s − λ_min(m).
    let mut neg = Mat::identity(m.rows);
    for v in neg.data.iter_mut() {
        *v *= s;
    }
    neg.add_scaled(-1.0, m);
    let (q, _, _, _) = power_symmetric(&LinearForm::Dense(neg), 1e-12 * s, 20_000, 7);
    s - q
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoAnswer {
    pub x: PrimalPoint,
    /// `⟨x, ξ⟩`
    pub value: f64,
    /// Estimated suboptimality `max_X ⟨·, ξ⟩ − value`.
    pub delta: f64,
    /// Final eigen/singular residual (0 for closed forms).
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoOracle {
    pub domain: PrimalDomain,
    /// Target accuracy relative to `radius · scale(ξ)`.
    pub rel_tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Spectrahedron only: threshold `ξ` before the eigen solve.
    pub sparsify_eps: Option<f64>,
}

impl LoOracle {
    pub fn new(domain: PrimalDomain) -> Self {
        LoOracle {
            domain,
            rel_tol: 1e-8,
            max_iter: 20_000,
            seed: 0x5eed,
            sparsify_eps: None,
        }
    }

    /// Declared tolerance for a given linear form.
    pub fn declared_delta(&self, xi: &LinearForm) -> f64 {
        match self.domain {
            PrimalDomain::InfTwoBox { .. } => 0.0,
            _ => self.rel_tol * self.domain.radius() * spectral_scale(xi),
        }
    }

    pub fn maximize(&self, xi: &LinearForm) -> Result<LoAnswer> {
        if xi.shape() != self.domain.shape() {
            let (r, c) = self.domain.shape();
            return Err(Error::DimensionMismatch {
                expected: r * c,
                found: xi.shape().0 * xi.shape().1,
            });
        }
        match self.domain {
            PrimalDomain::NuclearBall { radius, .. } => Ok(lo_nuclear(xi, radius, self.rel_tol, self.max_iter, self.seed)),
            PrimalDomain::Spectrahedron { radius, .. } => match self.sparsify_eps {
                Some(eps) => Ok(sparsify_then_lo(xi, radius, eps, self.rel_tol, self.max_iter, self.seed)?.0),
                None => lo_spectrahedron(xi, radius, self.rel_tol, self.max_iter, self.seed),
            },
            PrimalDomain::InfTwoBox { radius, .. } => Ok(lo_inf2box(&xi.to_dense(), radius)),
        }
    }
}

/// Upper bound on the spectral norm: `sqrt(‖ξ‖₁ ‖ξ‖_∞)` (max column / row sums).
pub fn spectral_scale(xi: &LinearForm) -> f64 {
    let (rows, cols) = xi.shape();
    let mut rs = vec![0.0; rows];
    let mut cs = vec![0.0; cols];
    match xi {
        LinearForm::Dense(m) => {
            for i in 0..rows {
                for j in 0..cols {
                    let a = m.get(i, j).abs();
                    rs[i] += a;
                    cs[j] += a;
                }
            }
        }
        LinearForm::Sparse(s) => {
            for &(i, j, v) in &s.entries {
                rs[i] += v.abs();
                cs[j] += v.abs();
            }
        }
    }
    let r = rs.into_iter().fold(0.0, f64::max);
    let c = cs.into_iter().fold(0.0, f64::max);
    (r * c).sqrt()
}

/// FNV-1a over the entries of `ξ`, so start vectors depend on the form.
/// A fixed start is an exact eigenvector of forms built from earlier answers
/// (e.g. `αI + βv₀v₀ᵀ`), where the residual test stops at once on the wrong pair.
fn form_hash(xi: &LinearForm) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut mix = |bits: u64| {
        h ^= bits;
        h = h.wrapping_mul(0x0100_0000_01b3);
    };
    match xi {
        LinearForm::Dense(m) => m.data.iter().for_each(|v| mix(v.to_bits())),
        LinearForm::Sparse(s) => s.entries.iter().for_each(|&(i, j, v)| {
            mix(i as u64);
            mix(j as u64);
            mix(v.to_bits());
        }),
    }
    h
}

fn random_unit(n: usize, seed: u64, stream: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let nv = norm2(&v);
    for x in v.iter_mut() {
        *x /= nv;
    }
    v
}

/// Krylov dimension per Lanczos cycle; forms up to this size are solved in one cycle.
const KRYLOV_DIM: usize = 64;

/// Top eigenpair of a symmetric operator by Lanczos with full
/// reorthogonalization, restarted from the top Ritz vector.
/// `tol_of(θ)` is the residual target; returns `(θ, v, ‖Av − θv‖, matvecs)`.
fn lanczos_top(
    n: usize,
    apply: &dyn Fn(&[f64]) -> Vec<f64>,
    scale: f64,
    tol_of: &dyn Fn(f64) -> f64,
    max_iter: usize,
    start: Vec<f64>,
) -> (f64, Vec<f64>, f64, usize) {
    let kmax = n.min(KRYLOV_DIM);
    let mut total = 0;
    let mut best: Option<(f64, Vec<f64>, f64)> = None;
    let mut v0 = start;
    while total < max_iter {
        let mut q: Vec<Vec<f64>> = vec![v0.clone()];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        for j in 0..kmax {
            let mut w = apply(&q[j]);
            total += 1;
            alpha.push(dot(&q[j], &w));
            for _ in 0..2 {
                for qi in &q {
                    let c = dot(qi, &w);
                    axpy(-c, qi, &mut w);
                }
            }
            let b = norm2(&w);
            let k = j + 1;
            let breakdown = b <= 1e-14 * scale;
            let last = k == kmax || breakdown || total >= max_iter;
            if !(last || k % 4 == 0) {
                q.push(w.into_iter().map(|x| x / b).collect());
                beta.push(b);
                continue;
            }
            let (theta, z) = tridiagonal_top(&alpha, &beta);
            let estimate = b * z[k - 1].abs();
            if last || estimate <= 0.5 * tol_of(theta) {
                let mut v = vec![0.0; n];
                for (zi, qi) in z.iter().zip(&q) {
                    axpy(*zi, qi, &mut v);
                }
                let nv = norm2(&v);
                v.iter_mut().for_each(|x| *x /= nv);
                let av = apply(&v);
                total += 1;
                let rq = dot(&v, &av);
                let res = av.iter().zip(&v).map(|(a, c)| (a - rq * c) * (a - rq * c)).sum::<f64>().sqrt();
                if best.as_ref().map_or(true, |bb| res < bb.2) {
                    best = Some((rq, v.clone(), res));
                }
                if res <= tol_of(rq) || breakdown {
                    let (t, v, r) = best.unwrap();
                    return (t, v, r, total);
                }
                if last {
                    v0 = v;
                    break;
                }
            }
            q.push(w.into_iter().map(|x| x / b).collect());
            beta.push(b);
        }
    }
    let (t, v, r) = best.unwrap();
    (t, v, r, total)
}

/// Number of eigenvalues of the tridiagonal `T` below `x` (Sturm count).
fn sturm_count(alpha: &[f64], beta: &[f64], x: f64, tiny: f64) -> usize {
    let mut count = 0;
    let mut d = 1.0;
    for i in 0..alpha.len() {
        let off = if i == 0 { 0.0 } else { beta[i - 1] * beta[i - 1] };
        d = alpha[i] - x - off / d;
        if d.abs() < tiny {
            d = -tiny;
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// Solves `(T − σI) x = b` in place by Gaussian elimination with partial
/// pivoting; zero pivots are replaced by `tiny`.
fn tridiagonal_solve(alpha: &[f64], beta: &[f64], sigma: f64, b: &mut [f64], tiny: f64) {
    let k = alpha.len();
    let mut d: Vec<f64> = alpha.iter().map(|a| a - sigma).collect();
    let mut du: Vec<f64> = beta[..k - 1].to_vec();
    let mut dl: Vec<f64> = du.clone();
    let mut du2 = vec![0.0; k.saturating_sub(2)];
    let nonzero = |v: f64| if v.abs() < tiny { if v < 0.0 { -tiny } else { tiny } } else { v };
    for i in 0..k.saturating_sub(1) {
        if d[i].abs() >= dl[i].abs() {
            d[i] = nonzero(d[i]);
            let f = dl[i] / d[i];
            d[i + 1] -= f * du[i];
            b[i + 1] -= f * b[i];
        } else {
            let f = d[i] / dl[i];
            d[i] = dl[i];
            let t = d[i + 1];
            d[i + 1] = du[i] - f * t;
            if i + 2 < k {
                du2[i] = du[i + 1];
                du[i + 1] = -f * du2[i];
            }
            du[i] = t;
            let tb = b[i];
            b[i] = b[i + 1];
            b[i + 1] = tb - f * b[i + 1];
        }
        dl[i] = 0.0;
    }
    d[k - 1] = nonzero(d[k - 1]);
    for i in (0..k).rev() {
        let mut v = b[i];
        if i + 1 < k {
            v -= du[i] * b[i + 1];
        }
        if i + 2 < k {
            v -= du2[i] * b[i + 2];
        }
        b[i] = v / d[i];
    }
}

/// Largest eigenpair of the tridiagonal matrix with diagonal `alpha` and
/// off-diagonal `beta` (the first `alpha.len() − 1` entries): the value by
/// Sturm bisection, the vector by inverse iteration.
fn tridiagonal_top(alpha: &[f64], beta: &[f64]) -> (f64, Vec<f64>) {
    let k = alpha.len();
    let beta = &beta[..k - 1];
    let norm = (0..k)
        .map(|i| alpha[i].abs() + if i > 0 { beta[i - 1].abs() } else { 0.0 } + if i + 1 < k { beta[i].abs() } else { 0.0 })
        .fold(0.0, f64::max);
    if norm == 0.0 {
        let mut z = vec![0.0; k];
        z[0] = 1.0;
        return (0.0, z);
    }
    let tiny = f64::MIN_POSITIVE.sqrt() * norm;
    let (mut lo, mut hi) = (-norm, norm);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(alpha, beta, mid, tiny) < k {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theta = 0.5 * (lo + hi);
    let mut z: Vec<f64> = (0..k).map(|i| 1.0 + 0.1 * ((i * 7 % 11) as f64)).collect();
    for _ in 0..3 {
        tridiagonal_solve(alpha, beta, theta, &mut z, f64::EPSILON * norm);
        let n = norm2(&z);
        z.iter_mut().for_each(|v| *v /= n);
    }
    (theta, z)
}

/// Top eigenpair of a symmetric form; `(q, v, residual, iterations)` with `q = vᵀξv`.
fn power_symmetric(xi: &LinearForm, tol: f64, max_iter: usize, seed: u64) -> (f64, Vec<f64>, f64, usize) {
    let n = xi.shape().0;
    let scale = xi.max_abs_row_sum();
    lanczos_top(n, &|v| xi.matvec(v), scale, &|_| tol, max_iter, random_unit(n, seed ^ form_hash(xi), 0))
}

/// `argmax {⟨x, ξ⟩ : x ⪰ 0, Tr x = R}` as `R·vvᵀ`.
pub fn lo_spectrahedron(xi: &LinearForm, radius: f64, rel_tol: f64, max_iter: usize, seed: u64) -> Result<LoAnswer> {
    let (n, m) = xi.shape();
    if n != m {
        return Err(Error::DimensionMismatch { expected: n, found: m });
    }
    let scale = xi.max_abs_row_sum();
    if let LinearForm::Dense(d) = xi {
        if !d.is_symmetric(1e-12 * scale.max(1.0)) {
            return Err(Error::InvalidInstance("spectrahedron oracle needs a symmetric form".into()));
        }
    }
    if scale == 0.0 {
        let mut e1 = vec![0.0; n];
        e1[0] = 1.0;
        return Ok(LoAnswer {
            x: PrimalPoint::rank_one(radius, e1.clone(), e1),
            value: 0.0,
            delta: 0.0,
            residual: 0.0,
            iterations: 0,
            converged: true,
        });
    }
    let tol = rel_tol * scale / 2.0;
    let (q, v, res, iterations) = power_symmetric(xi, tol, max_iter, seed);
    Ok(LoAnswer {
        x: PrimalPoint::rank_one(radius, v.clone(), v),
        value: radius * q,
        delta: 2.0 * radius * res,
        residual: res,
        iterations,
        converged: res <= tol,
    })
}

/// `argmax {⟨x, ξ⟩ : ‖σ(x)‖₁ ≤ R}` as `R·uvᵀ`.
pub fn lo_nuclear(xi: &LinearForm, radius: f64, rel_tol: f64, max_iter: usize, seed: u64) -> LoAnswer {
    let (rows, cols) = xi.shape();
    let scale = spectral_scale(xi);
    if scale == 0.0 {
        let mut u = vec![0.0; rows];
        let mut v = vec![0.0; cols];
        u[0] = 1.0;
        v[0] = 1.0;
        return LoAnswer {
            x: PrimalPoint::rank_one(radius, u, v),
            value: 0.0,
            delta: 0.0,
            residual: 0.0,
            iterations: 0,
            converged: true,
        };
    }
    let tol = rel_tol * scale / 2.0;
    // Lanczos on the smaller Gram matrix; ‖ξᵀu − σv‖ = ‖ξᵀξv − σ²v‖ / σ.
    let wide = cols > rows;
    let side = if wide { rows } else { cols };
    let gram = |x: &[f64]| if wide { xi.matvec(&xi.t_matvec(x)) } else { xi.t_matvec(&xi.matvec(x)) };
    let (_, w, _, total) = lanczos_top(
        side,
        &gram,
        scale * scale,
        &|theta| tol * theta.max(0.0).sqrt(),
        max_iter,
        random_unit(side, seed ^ form_hash(xi), 0),
    );
    let z = if wide { xi.t_matvec(&w) } else { xi.matvec(&w) };
    let sigma = norm2(&z);
    let (sigma, u, v, res) = if sigma > 0.0 {
        let other: Vec<f64> = z.iter().map(|a| a / sigma).collect();
        let (u, v) = if wide { (w, other) } else { (other, w) };
        let back = xi.t_matvec(&u);
        let res = back.iter().zip(&v).map(|(a, b)| (a - sigma * b) * (a - sigma * b)).sum::<f64>().sqrt();
        (sigma, u, v, res)
    } else {
        // The start missed the range of ξ; fall back to its largest entry.
        let d = xi.to_dense();
        let (mut bi, mut bj) = (0, 0);
        for i in 0..rows {
            for j in 0..cols {
                if d.get(i, j).abs() > d.get(bi, bj).abs() {
                    bi = i;
                    bj = j;
                }
            }
        }
        let mut v = vec![0.0; cols];
        v[bj] = 1.0;
        let w = xi.matvec(&v);
        let s = norm2(&w);
        (s, w.iter().map(|a| a / s).collect(), v, f64::INFINITY)
    };
    LoAnswer {
        x: PrimalPoint::rank_one(radius, u, v),
        value: radius * sigma,
        delta: 2.0 * radius * res.min(scale),
        residual: res,
        iterations: total,
        converged: res <= tol,
    }
}

/// Row-wise normalization: `x^i = R ξ^i / ‖ξ^i‖₂`.
pub fn lo_inf2box(xi: &Mat, radius: f64) -> LoAnswer {
    let mut x = Mat::zeros(xi.rows, xi.cols);
    let mut value = 0.0;
    for i in 0..xi.rows {
        let row = xi.row(i);
        let n = norm2(row);
        if n > 0.0 {
            for j in 0..xi.cols {
                x.set(i, j, radius * row[j] / n);
            }
            value += radius * n;
        }
    }
    LoAnswer {
        x: PrimalPoint::Dense(x),
        value,
        delta: 0.0,
        residual: 0.0,
        iterations: 0,
        converged: true,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsifyInfo {
    pub nnz: usize,
    /// `‖ξ − ξ_ε‖_F`
    pub removed_frob: f64,
}

/// Zeroes the smallest symmetric pairs of `ξ` while `‖ξ − ξ_ε‖_F ≤ ε/R`,
/// then maximizes over the spectrahedron. The returned `value` and `delta`
/// refer to the original form.
pub fn sparsify_then_lo(
    xi: &LinearForm,
    radius: f64,
    eps: f64,
    rel_tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<(LoAnswer, SparsifyInfo)> {
    let d = xi.to_dense();
    let p = d.rows;
    if !d.is_symmetric(1e-12 * d.max_abs().max(1.0)) {
        return Err(Error::InvalidInstance("sparsification needs a symmetric form".into()));
    }
    let budget = (eps / radius) * (eps / radius);
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..p {
        for j in i..p {
            let v = d.get(i, j);
            if v != 0.0 {
                pairs.push((v.abs(), i, j));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(core::cmp::Ordering::Equal));
    let mut removed = 0.0;
    let mut cut = 0;
    for (k, &(a, i, j)) in pairs.iter().enumerate() {
        let mass = if i == j { a * a } else { 2.0 * a * a };
        if removed + mass > budget {
            break;
        }
        removed += mass;
        cut = k + 1;
    }
    let mut entries = Vec::new();
    for &(_, i, j) in &pairs[cut..] {
        let v = d.get(i, j);
        entries.push((i, j, v));
        if i != j {
            entries.push((j, i, v));
        }
    }
    let nnz = entries.len();
    let sparse = LinearForm::Sparse(SparseMat::new(p, p, entries));
    let mut ans = lo_spectrahedron(&sparse, radius, rel_tol, max_iter, seed)?;
    let removed_frob = removed.sqrt();
    ans.value = ans.x.frob_dot(&d);
    ans.delta += 2.0 * radius * removed_frob;
    Ok((ans, SparsifyInfo { nnz, removed_frob }))
}
