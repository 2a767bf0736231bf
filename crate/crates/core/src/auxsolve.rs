//! Auxiliary problems of the level methods.
//!
//! * `maxmin_affine`: `max_{y∈Y} min_j h_j(y)` for affine `h_j`, with the
//!   simplex weights `λ` of the von Neumann exchange. Column generation over
//!   points of `Y`: an exact matrix-game LP over the current point pool gives
//!   `λ` and a mixture `u`; a support call at `λ` either closes the bracket
//!   `min_j h_j(u) ≤ Opt ≤ φ(λ)` or yields a new point.
//! * `level_project`: Bregman projection onto `{y ∈ Y : h_j(y) ≥ ℓ}` by
//!   projected Newton on the Lagrange multipliers.
//! * `aggregate_bundle`: the multiplier-weighted aggregate cut.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot};
use crate::prox::{Domain, ProximalSetup};

/// `h(y) = c − ⟨g, y⟩`, a convex combination of step cuts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineCut {
    pub c: f64,
    pub g: Vec<f64>,
    /// `(protocol step, weight)` pairs; weights are nonnegative and sum to 1.
    pub provenance: Vec<(usize, f64)>,
}

impl AffineCut {
    /// `h_τ(y) = ⟨g_τ, y_τ − y⟩`.
    pub fn from_step(step: usize, y: &[f64], g: &[f64]) -> Self {
        AffineCut {
            c: dot(g, y),
            g: g.to_vec(),
            provenance: vec![(step, 1.0)],
        }
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        self.c - dot(&self.g, y)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AffineBundle {
    pub cuts: Vec<AffineCut>,
}

impl AffineBundle {
    pub fn new(cuts: Vec<AffineCut>) -> Self {
        AffineBundle { cuts }
    }

    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }

    pub fn min_value(&self, y: &[f64]) -> f64 {
        self.cuts.iter().map(|h| h.eval(y)).fold(f64::INFINITY, f64::min)
    }

    /// `Σ λ_j h_j` with composed provenance.
    pub fn combine(&self, lambda: &[f64]) -> AffineCut {
        let n = self.cuts[0].g.len();
        let mut g = vec![0.0; n];
        let mut c = 0.0;
        let mut prov: BTreeMap<usize, f64> = BTreeMap::new();
        for (h, w) in self.cuts.iter().zip(lambda) {
            if *w == 0.0 {
                continue;
            }
            c += w * h.c;
            axpy(*w, &h.g, &mut g);
            for (tau, pw) in &h.provenance {
                *prov.entry(*tau).or_insert(0.0) += w * pw;
            }
        }
        AffineCut {
            c,
            g,
            provenance: prov.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxMinAnswer {
    /// Upper end of the bracket, `φ(λ)`.
    pub opt: f64,
    pub lambda: Vec<f64>,
    pub u: Vec<f64>,
    /// `min_j h_j(u)`
    pub lower: f64,
    pub gap_aux: f64,
    pub iterations: usize,
}

/// Point pool reused across calls on the same domain.
#[derive(Debug, Clone, Default)]
pub struct MaxMinWorkspace {
    points: Vec<Vec<f64>>,
}

impl MaxMinWorkspace {
    pub fn new() -> Self {
        Self::default()
    }
}

const POOL_CAP: usize = 400;
const MAXMIN_ITER_CAP: usize = 2000;
/// Domains with at most this many vertices are seeded with all of them.
const VERTEX_SEED_CAP: usize = 1024;
const BALL_NEWTON_CAP: usize = 500;

/// `φ(λ) = Σ λ_j c_j + max_Y ⟨−Σ λ_j g_j, y⟩` and its maximizer.
fn phi(setup: &ProximalSetup, bundle: &AffineBundle, lambda: &[f64]) -> Result<(f64, Vec<f64>)> {
    let n = setup.dim();
    let mut agg = vec![0.0; n];
    let mut c = 0.0;
    for (h, w) in bundle.cuts.iter().zip(lambda) {
        c += w * h.c;
        axpy(-w, &h.g, &mut agg);
    }
    let (s, arg) = setup.support(&agg)?;
    Ok((c + s, arg))
}

fn vertex_seeds(setup: &ProximalSetup) -> Vec<Vec<f64>> {
    match setup.domain() {
        Domain::L1Ball {
            dim,
            radius,
            symmetric,
        } => {
            let mut out = Vec::new();
            match symmetric {
                None if 2 * dim <= VERTEX_SEED_CAP => {
                    for i in 0..*dim {
                        for s in [1.0, -1.0] {
                            let mut v = vec![0.0; *dim];
                            v[i] = s * radius;
                            out.push(v);
                        }
                    }
                }
                Some(p) if p * (p + 1) <= VERTEX_SEED_CAP => {
                    for i in 0..*p {
                        for j in i..*p {
                            for s in [1.0, -1.0] {
                                let mut v = vec![0.0; *dim];
                                if i == j {
                                    v[i * p + i] = s * radius;
                                } else {
                                    v[i * p + j] = 0.5 * s * radius;
                                    v[j * p + i] = 0.5 * s * radius;
                                }
                                out.push(v);
                            }
                        }
                    }
                }
                _ => {}
            }
            out
        }
        _ => Vec::new(),
    }
}

fn push_point(pool: &mut Vec<Vec<f64>>, p: Vec<f64>) -> bool {
    let scale = 1.0 + p.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if pool
        .iter()
        .any(|q| q.iter().zip(&p).all(|(a, b)| (a - b).abs() <= 1e-14 * scale))
    {
        return false;
    }
    pool.push(p);
    true
}

/// `max_{y∈Y} min_j h_j(y)` to bracket width `max(1e-9, 1e-9·scale)`.
pub fn maxmin_affine(setup: &ProximalSetup, bundle: &AffineBundle) -> Result<MaxMinAnswer> {
    maxmin_affine_ws(setup, bundle, &mut MaxMinWorkspace::new())
}

pub fn maxmin_affine_ws(
    setup: &ProximalSetup,
    bundle: &AffineBundle,
    ws: &mut MaxMinWorkspace,
) -> Result<MaxMinAnswer> {
    if bundle.is_empty() {
        return Err(Error::EmptyProtocol);
    }
    let m = bundle.len();
    if m == 1 {
        let (opt, u) = phi(setup, bundle, &[1.0])?;
        return Ok(MaxMinAnswer {
            opt,
            lambda: vec![1.0],
            lower: bundle.cuts[0].eval(&u),
            u,
            gap_aux: 0.0,
            iterations: 0,
        });
    }
    let gscale = bundle
        .cuts
        .iter()
        .map(|h| h.c.abs() + setup.dual_norm(&h.g) * (1.0 + setup.omega_diameter()))
        .fold(0.0, f64::max);
    let tol = (1e-9 * gscale).max(1e-9);
    if let Domain::EuclideanBall { radius, .. } = setup.domain() {
        if let Some(ans) = maxmin_ball(*radius, bundle, tol) {
            return Ok(ans);
        }
    }
    let mut pool: Vec<Vec<f64>> = Vec::new();
    for v in vertex_seeds(setup) {
        push_point(&mut pool, v);
    }
    push_point(&mut pool, setup.center());
    for h in &bundle.cuts {
        let neg: Vec<f64> = h.g.iter().map(|v| -v).collect();
        push_point(&mut pool, setup.support(&neg)?.1);
    }
    for p in ws.points.drain(..) {
        if pool.len() >= POOL_CAP {
            break;
        }
        push_point(&mut pool, p);
    }

    let mut best: Option<MaxMinAnswer> = None;
    for it in 0..MAXMIN_ITER_CAP {
        let payoff: Vec<Vec<f64>> = pool
            .iter()
            .map(|p| bundle.cuts.iter().map(|h| h.eval(p)).collect())
            .collect();
        let game = solve_matrix_game(&payoff)?;
        let mut u = vec![0.0; setup.dim()];
        for (w, p) in game.row.iter().zip(&pool) {
            if *w > 0.0 {
                axpy(*w, p, &mut u);
            }
        }
        let lower = bundle.min_value(&u);
        let (upper, arg) = phi(setup, bundle, &game.col)?;
        let cand = MaxMinAnswer {
            opt: upper,
            lambda: game.col.clone(),
            u,
            lower,
            gap_aux: upper - lower,
            iterations: it + 1,
        };
        let improved = best.as_ref().map_or(true, |b| cand.gap_aux < b.gap_aux);
        if improved {
            best = Some(cand);
        }
        if upper - lower <= tol {
            break;
        }
        if !push_point(&mut pool, arg) {
            // The LP has already seen this point: no further progress possible.
            break;
        }
    }
    // Keep the points carrying weight, then the most recent ones.
    let keep_from = pool.len().saturating_sub(POOL_CAP / 2);
    ws.points = pool.split_off(keep_from);
    let best = best.unwrap();
    if best.gap_aux > tol {
        // Tolerate tiny LP round-off beyond the target.
        if best.gap_aux > 1e3 * tol {
            return Err(Error::MaxMinNotConverged {
                lower: best.lower,
                upper: best.opt,
            });
        }
    }
    Ok(best)
}

/// Active-set Newton on `min_{λ∈Δ} cᵀλ + R‖Σλ_j g_j‖₂` for the Euclidean
/// ball, where column generation converges slowly. At the support argmax
/// `u = −R v/‖v‖` one has `h_j(u) = ∂_j φ(λ)`, so the bracket is
/// `λᵀ∇φ − min_j ∂_j φ`. Returns `None` when `Σλ_j g_j` vanishes at the
/// solution or Newton stalls; the caller then falls back.
fn maxmin_ball(radius: f64, bundle: &AffineBundle, tol: f64) -> Option<MaxMinAnswer> {
    let m = bundle.len();
    let dim = bundle.cuts[0].g.len();
    let c: Vec<f64> = bundle.cuts.iter().map(|h| h.c).collect();
    let mut q = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..=i {
            let v = dot(&bundle.cuts[i].g, &bundle.cuts[j].g);
            q[i * m + j] = v;
            q[j * m + i] = v;
        }
    }
    let gmax = (0..m).map(|i| q[i * m + i].sqrt()).fold(0.0, f64::max);
    if gmax == 0.0 {
        return None;
    }
    let phi = |lam: &[f64]| -> f64 {
        let mut quad = 0.0;
        for i in 0..m {
            if lam[i] == 0.0 {
                continue;
            }
            for j in 0..m {
                quad += lam[i] * q[i * m + j] * lam[j];
            }
        }
        dot(&c, lam) + radius * quad.max(0.0).sqrt()
    };
    let start = (0..m)
        .min_by(|&a, &b| {
            let fa = c[a] + radius * q[a * m + a].sqrt();
            let fb = c[b] + radius * q[b * m + b].sqrt();
            fa.total_cmp(&fb)
        })
        .unwrap();
    let mut lam = vec![0.0; m];
    lam[start] = 1.0;
    let mut on = vec![false; m];
    on[start] = true;
    for it in 0..BALL_NEWTON_CAP {
        let ql: Vec<f64> = (0..m).map(|i| (0..m).map(|j| q[i * m + j] * lam[j]).sum()).collect();
        let n = dot(&lam, &ql).max(0.0).sqrt();
        if n <= 1e-10 * gmax {
            return None;
        }
        let d: Vec<f64> = (0..m).map(|j| c[j] + radius * ql[j] / n).collect();
        let upper = dot(&lam, &d);
        let (jmin, lower) = d
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |a, (j, v)| if *v < a.1 { (j, *v) } else { a });
        if upper - lower <= tol {
            let mut u = vec![0.0; dim];
            for (h, w) in bundle.cuts.iter().zip(&lam) {
                if *w != 0.0 {
                    axpy(-radius * w / n, &h.g, &mut u);
                }
            }
            let lower = bundle.min_value(&u);
            let upper = phi(&lam);
            return Some(MaxMinAnswer {
                opt: upper,
                lambda: lam,
                u,
                lower,
                gap_aux: upper - lower,
                iterations: it + 1,
            })
            .filter(|a| a.gap_aux <= tol);
        }
        on[jmin] = true;
        // Equality-constrained Newton on the working set; indices at zero
        // that want to go negative leave the set.
        let mut dir = vec![0.0; m];
        loop {
            let set: Vec<usize> = (0..m).filter(|&j| on[j]).collect();
            let k = set.len();
            let mut a = vec![0.0; (k + 1) * (k + 1)];
            let mut diag = 0.0_f64;
            for (p, &i) in set.iter().enumerate() {
                for (r, &j) in set.iter().enumerate() {
                    let h = radius / n * (q[i * m + j] - ql[i] * ql[j] / (n * n));
                    a[p * (k + 1) + r] = h;
                }
                diag = diag.max(a[p * (k + 1) + p].abs());
                a[p * (k + 1) + k] = 1.0;
                a[k * (k + 1) + p] = 1.0;
            }
            for p in 0..k {
                a[p * (k + 1) + p] += 1e-12 * diag.max(1e-300);
            }
            let mut rhs: Vec<f64> = set.iter().map(|&i| -d[i]).collect();
            rhs.push(0.0);
            let sol = solve_dense(&mut a, &mut rhs, k + 1)?;
            let mut dropped = false;
            for (p, &i) in set.iter().enumerate() {
                if lam[i] == 0.0 && sol[p] < 0.0 {
                    on[i] = false;
                    dropped = true;
                }
            }
            if !dropped {
                dir = vec![0.0; m];
                for (p, &i) in set.iter().enumerate() {
                    dir[i] = sol[p];
                }
                break;
            }
            if !on.iter().any(|b| *b) {
                return None;
            }
        }
        let slope = dot(&d, &dir);
        if !(slope < 0.0) {
            return None;
        }
        let mut amax = 1.0_f64;
        let mut blocking = None;
        for j in 0..m {
            if dir[j] < 0.0 {
                let r = lam[j] / -dir[j];
                if r < amax {
                    amax = r;
                    blocking = Some(j);
                }
            }
        }
        let f0 = phi(&lam);
        let mut alpha = amax;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = lam.iter().zip(&dir).map(|(l, s)| (l + alpha * s).max(0.0)).collect();
            if phi(&trial) <= f0 + 1e-4 * alpha * slope {
                lam = trial;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            return None;
        }
        if alpha == amax {
            if let Some(j) = blocking {
                lam[j] = 0.0;
                on[j] = false;
            }
        }
        let s: f64 = lam.iter().sum();
        for l in lam.iter_mut() {
            *l /= s;
        }
    }
    None
}

/// Gaussian elimination with partial pivoting on a row-major `n × n` system.
fn solve_dense(a: &mut [f64], b: &mut [f64], n: usize) -> Option<Vec<f64>> {
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))?;
        if a[piv * n + col].abs() < 1e-300 {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
            }
            b.swap(piv, col);
        }
        for i in col + 1..n {
            let f = a[i * n + col] / a[col * n + col];
            if f != 0.0 {
                for k in col..n {
                    a[i * n + k] -= f * a[col * n + k];
                }
                b[i] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= a[i * n + k] * x[k];
        }
        x[i] = s / a[i * n + i];
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

/// Optimal mixed strategies of a zero-sum matrix game.
#[derive(Debug, Clone, PartialEq)]
pub struct GameSolution {
    pub value: f64,
    /// Maximizing (row) player's strategy.
    pub row: Vec<f64>,
    /// Minimizing (column) player's strategy.
    pub col: Vec<f64>,
}

/// `max_w min_λ wᵀ H λ` over simplices, by a tableau simplex on
/// `max Σ t s.t. H' t ≤ 1, t ≥ 0` with `H' = H − min H + 1 > 0`.
pub fn solve_matrix_game(payoff: &[Vec<f64>]) -> Result<GameSolution> {
    let k = payoff.len();
    let m = payoff.first().map_or(0, |r| r.len());
    if k == 0 || m == 0 {
        return Err(Error::EmptyProtocol);
    }
    let lo = payoff.iter().flatten().fold(f64::INFINITY, |a, b| a.min(*b));
    let hi = payoff.iter().flatten().fold(f64::NEG_INFINITY, |a, b| a.max(*b));
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidInstance("non-finite payoff".into()));
    }
    let span = (hi - lo).max(1e-300);
    // Normalize to [1, 2] so pivot tolerances are scale-free.
    let shift = |v: f64| 1.0 + (v - lo) / span;
    let width = m + k + 1;
    let mut tab = vec![0.0; (k + 1) * width];
    for i in 0..k {
        for j in 0..m {
            tab[i * width + j] = shift(payoff[i][j]);
        }
        tab[i * width + m + i] = 1.0;
        tab[i * width + width - 1] = 1.0;
    }
    let obj = k * width;
    for j in 0..m {
        tab[obj + j] = -1.0;
    }
    let mut basis: Vec<usize> = (m..m + k).collect();
    let eps = 1e-12;
    let mut degenerate_run = 0usize;
    let cap = 50 * (m + k) + 1000;
    let mut iters = 0;
    loop {
        iters += 1;
        if iters > cap {
            return Err(Error::InvalidInstance("matrix game simplex did not terminate".into()));
        }
        let bland = degenerate_run > 20;
        let mut enter = None;
        let mut best = -eps;
        for j in 0..m + k {
            let rc = tab[obj + j];
            if rc < -eps {
                if bland {
                    enter = Some(j);
                    break;
                }
                if rc < best {
                    best = rc;
                    enter = Some(j);
                }
            }
        }
        let Some(e) = enter else { break };
        // Harris two-pass ratio test: among rows within a small relaxation of
        // the minimum ratio, pivot on the largest entry.
        let cmax = (0..k).fold(0.0_f64, |a, i| a.max(tab[i * width + e].abs()));
        let ptol = 1e-9 * cmax.max(1.0);
        let relax = 1e-12;
        let mut bound = f64::INFINITY;
        for i in 0..k {
            let a = tab[i * width + e];
            if a > ptol {
                bound = bound.min((tab[i * width + width - 1].max(0.0) + relax) / a);
            }
        }
        let mut leave: Option<usize> = None;
        let mut ratio = f64::INFINITY;
        for i in 0..k {
            let a = tab[i * width + e];
            if a > ptol {
                let r = tab[i * width + width - 1].max(0.0) / a;
                if r <= bound {
                    let better = leave.map_or(true, |l| {
                        let al = tab[l * width + e];
                        if bland {
                            basis[i] < basis[l]
                        } else {
                            a > al
                        }
                    });
                    if better {
                        ratio = r;
                        leave = Some(i);
                    }
                }
            }
        }
        let Some(l) = leave else {
            return Err(Error::InvalidInstance("unbounded matrix game LP".into()));
        };
        degenerate_run = if ratio <= 1e-15 { degenerate_run + 1 } else { 0 };
        let piv = tab[l * width + e];
        for v in tab[l * width..(l + 1) * width].iter_mut() {
            *v /= piv;
        }
        let pivot_row: Vec<f64> = tab[l * width..(l + 1) * width].to_vec();
        for i in 0..=k {
            if i == l {
                continue;
            }
            let f = tab[i * width + e];
            if f != 0.0 {
                for (t, p) in tab[i * width..(i + 1) * width].iter_mut().zip(&pivot_row) {
                    *t -= f * p;
                }
            }
        }
        basis[l] = e;
    }
    let mut t = vec![0.0; m];
    for (i, &b) in basis.iter().enumerate() {
        if b < m {
            t[b] = tab[i * width + width - 1].max(0.0);
        }
    }
    let z: Vec<f64> = (0..k).map(|i| tab[obj + m + i].max(0.0)).collect();
    let st: f64 = t.iter().sum();
    let sz: f64 = z.iter().sum();
    if !(st > 0.0) || !(sz > 0.0) {
        return Err(Error::InvalidInstance("degenerate matrix game solution".into()));
    }
    let col: Vec<f64> = t.iter().map(|v| v / st).collect();
    let row: Vec<f64> = z.iter().map(|v| v / sz).collect();
    let value = lo + span * (1.0 / st - 1.0);
    Ok(GameSolution { value, row, col })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionAnswer {
    pub y: Vec<f64>,
    pub mu: Vec<f64>,
    /// Largest of the projected dual gradient and complementarity residuals.
    pub kkt_residual: f64,
    pub iterations: usize,
}

const PROJ_TOL: f64 = 1e-8;
const PROJ_ITER_CAP: usize = 500;
const MU_DIVERGED: f64 = 1e12;
const FISTA_ITER_CAP: usize = 2000;

#[derive(Clone)]
struct DualState {
    mu: Vec<f64>,
    eta: Vec<f64>,
    y: Vec<f64>,
    /// `∇d_j = ℓ − h_j(y(μ))`
    grad: Vec<f64>,
    value: f64,
}

/// `argmin {ω(y) − ⟨ω'(ŷ), y⟩ : y ∈ Y, h_j(y) ≥ ℓ ∀j}` with multipliers.
pub fn level_project(
    setup: &ProximalSetup,
    anchor: &[f64],
    bundle: &AffineBundle,
    level: f64,
    warm_mu: Option<&[f64]>,
) -> Result<ProjectionAnswer> {
    let m = bundle.len();
    let base: Vec<f64> = setup.omega_grad(anchor).iter().map(|v| -v).collect();
    let gnorm = bundle
        .cuts
        .iter()
        .map(|h| setup.dual_norm(&h.g))
        .fold(0.0, f64::max);
    let tol = PROJ_TOL * (1.0 + level.abs());
    let lip = bundle
        .cuts
        .iter()
        .map(|h| {
            let n = setup.dual_norm(&h.g);
            n * n
        })
        .sum::<f64>()
        .max(1e-300);

    let eval = |mu: &[f64]| -> Result<DualState> {
        let mut eta = base.clone();
        for (h, w) in bundle.cuts.iter().zip(mu) {
            if *w != 0.0 {
                axpy(*w, &h.g, &mut eta);
            }
        }
        let y = setup.mirror(&eta)?;
        let grad: Vec<f64> = bundle.cuts.iter().map(|h| level - h.eval(&y)).collect();
        let value = setup.omega(&y) + dot(&base, &y) + dot(mu, &grad);
        Ok(DualState {
            mu: mu.to_vec(),
            eta,
            y,
            grad,
            value,
        })
    };
    let residual = |s: &DualState| -> f64 {
        let mut r = 0.0_f64;
        for j in 0..m {
            let gj = s.grad[j];
            // Stationarity on free multipliers, feasibility on the rest.
            let pg = if s.mu[j] > 0.0 { gj.abs().min(s.mu[j].max(gj)) } else { gj.max(0.0) };
            r = r.max(pg).max((s.mu[j] * gj).abs() / (1.0 + gnorm));
        }
        r
    };

    let start: Vec<f64> = match warm_mu {
        Some(w) if w.len() == m => w.iter().map(|v| v.max(0.0)).collect(),
        _ => vec![0.0; m],
    };
    let mut st = eval(&start)?;
    if warm_mu.is_some() && residual(&st) > tol {
        let cold = eval(&vec![0.0; m])?;
        if residual(&cold) <= residual(&st) {
            st = cold;
        }
    }
    let mut iters = 0;
    // Levenberg-Marquardt damping; large values turn the step into projected
    // gradient ascent, which always makes progress on the concave dual.
    let mut damp = 0.0_f64;
    while residual(&st) > tol {
        iters += 1;
        if iters > PROJ_ITER_CAP {
            break;
        }
        let mu_norm = st.mu.iter().fold(0.0_f64, |a, b| a.max(*b));
        if mu_norm > MU_DIVERGED {
            return Err(Error::EmptyLevelSet {
                multiplier_norm: mu_norm,
            });
        }
        // Hessian of −d: −Gᵀ J G (positive semidefinite).
        let cols: Vec<Vec<f64>> = bundle
            .cuts
            .iter()
            .map(|h| setup.mirror_jvp(&st.eta, &st.y, &h.g))
            .collect();
        let mut hess = vec![0.0; m * m];
        for a in 0..m {
            for b in 0..m {
                hess[a * m + b] = -dot(&bundle.cuts[a].g, &cols[b]);
            }
        }
        for a in 0..m {
            for b in 0..a {
                let s = 0.5 * (hess[a * m + b] + hess[b * m + a]);
                hess[a * m + b] = s;
                hess[b * m + a] = s;
            }
        }
        let floor = 1e-12 * lip;
        damp = damp.max(floor);
        // Active set: multipliers at zero that the gradient pushes further down.
        let free: Vec<usize> = (0..m).filter(|&j| !(st.mu[j] <= 0.0 && st.grad[j] <= 0.0)).collect();
        if free.is_empty() {
            break;
        }
        let nf = free.len();
        let r0 = residual(&st);
        let mut accepted = false;
        for _ in 0..60 {
            let mut a = vec![0.0; nf * nf];
            for (p, &i) in free.iter().enumerate() {
                for (q, &j) in free.iter().enumerate() {
                    a[p * nf + q] = hess[i * m + j];
                }
                a[p * nf + p] += damp;
            }
            let rhs: Vec<f64> = free.iter().map(|&j| st.grad[j]).collect();
            let Some(sol) = cholesky_solve(&a, &rhs, nf) else {
                damp *= 8.0;
                continue;
            };
            let mut mu = st.mu.clone();
            for (p, &j) in free.iter().enumerate() {
                mu[j] = (mu[j] + sol[p]).max(0.0);
            }
            let step: Vec<f64> = mu.iter().zip(&st.mu).map(|(a, b)| a - b).collect();
            if step.iter().all(|v| *v == 0.0) {
                break;
            }
            let next = eval(&mu)?;
            let predicted = dot(&st.grad, &step);
            let enough = next.value.is_finite() && next.value >= st.value + 1e-4 * predicted;
            if enough && (next.value > st.value || residual(&next) < r0) {
                st = next;
                damp = (damp * 0.25).max(floor);
                accepted = true;
                break;
            }
            damp *= 8.0;
        }
        if !accepted {
            // Values no longer resolve; finish with accelerated projected gradient.
            st = fista_ascent(st, lip, &eval, &residual, tol, FISTA_ITER_CAP)?;
            break;
        }
    }
    Ok(ProjectionAnswer {
        kkt_residual: residual(&st),
        y: st.y,
        mu: st.mu,
        iterations: iters,
    })
}

/// Projected gradient ascent on `μ ≥ 0` with Nesterov momentum and
/// gradient restarts, step `1/L`.
fn fista_ascent<E, R>(st: DualState, lip: f64, eval: &E, residual: &R, tol: f64, cap: usize) -> Result<DualState>
where
    E: Fn(&[f64]) -> Result<DualState>,
    R: Fn(&DualState) -> f64,
{
    let mut best = st;
    let mut x = best.mu.clone();
    let mut z = eval(&x)?;
    let mut t = 1.0_f64;
    for _ in 0..cap {
        let next_mu: Vec<f64> = z.mu.iter().zip(&z.grad).map(|(m, g)| (m + g / lip).max(0.0)).collect();
        let next = eval(&next_mu)?;
        if residual(&next) < residual(&best) {
            best = next.clone();
            if residual(&best) <= tol {
                break;
            }
        }
        let t1 = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let restart = z
            .grad
            .iter()
            .zip(next_mu.iter().zip(&x))
            .map(|(g, (a, b))| g * (a - b))
            .sum::<f64>()
            < 0.0;
        let y: Vec<f64> = if restart {
            t = 1.0;
            next_mu.clone()
        } else {
            let beta = (t - 1.0) / t1;
            t = t1;
            next_mu.iter().zip(&x).map(|(a, b)| (a + beta * (a - b)).max(0.0)).collect()
        };
        x = next_mu;
        z = eval(&y)?;
    }
    Ok(best)
}

/// Solves `A x = b` for symmetric positive definite `A` (row-major `n × n`).
fn cholesky_solve(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut z = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * z[k];
        }
        z[i] = s / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

/// `(1/Σμ) Σ μ_j h_j`, or `None` when `Σμ = 0`.
pub fn aggregate_bundle(bundle: &AffineBundle, mu: &[f64]) -> Result<Option<AffineCut>> {
    if mu.len() != bundle.len() {
        return Err(Error::DimensionMismatch {
            expected: bundle.len(),
            found: mu.len(),
        });
    }
    for (i, v) in mu.iter().enumerate() {
        if *v < 0.0 || !v.is_finite() {
            return Err(Error::NegativeMultiplier { index: i, value: *v });
        }
    }
    let s: f64 = mu.iter().sum();
    if s == 0.0 {
        return Ok(None);
    }
    let w: Vec<f64> = mu.iter().map(|v| v / s).collect();
    Ok(Some(bundle.combine(&w)))
}
