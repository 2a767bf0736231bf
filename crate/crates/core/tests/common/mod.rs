//! Independent reference solvers shared by the integration tests.
#![allow(dead_code)]

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, ExponentialConeT, IPSolver, NonnegativeConeT, PowerConeT, SecondOrderConeT,
    SolverStatus, SupportedConeT, ZeroConeT,
};
use dualcert::auxsolve::AffineBundle;
use dualcert::prox::{Dgf, Domain, ProximalSetup};
use nalgebra::{DMatrix, DVector};

pub mod checks;

/// One coordinate of a separable `ω`.
#[derive(Clone, Copy)]
enum Piece {
    Quadratic,
    Power { c: f64, q: f64 },
    Entropy,
}

impl Piece {
    fn of(setup: &ProximalSetup) -> Piece {
        match setup.dgf() {
            Dgf::Euclidean => Piece::Quadratic,
            Dgf::Power { alpha } => {
                let ln_n = (setup.dim().max(3) as f64).ln();
                Piece::Power { c: alpha * ln_n, q: 1.0 + 1.0 / ln_n }
            }
            Dgf::Entropy => Piece::Entropy,
        }
    }

    fn deriv(self, z: f64) -> f64 {
        match self {
            Piece::Quadratic => z,
            Piece::Power { c, q } => c * q * z.signum() * z.abs().powf(q - 1.0) * (z != 0.0) as u8 as f64,
            Piece::Entropy => z.ln() + 1.0,
        }
    }
}

#[derive(Clone, Copy)]
enum Penalty {
    None,
    Abs,
    HalfSquare,
}

/// `argmin_{z∈[lo,hi]} a z + ω₁(z) + ν pen(z)` by bisection on the derivative.
fn scalar_argmin(piece: Piece, a: f64, nu: f64, pen: Penalty, lo: f64, hi: f64) -> f64 {
    let d = |z: f64, side: f64| {
        let p = match pen {
            Penalty::None => 0.0,
            Penalty::Abs => {
                if z > 0.0 {
                    1.0
                } else if z < 0.0 {
                    -1.0
                } else {
                    side
                }
            }
            Penalty::HalfSquare => z,
        };
        a + piece.deriv(z) + nu * p
    };
    if lo < 0.0 && hi > 0.0 && d(0.0, -1.0) <= 0.0 && d(0.0, 1.0) >= 0.0 {
        return 0.0;
    }
    let lo_val = if matches!(piece, Piece::Entropy) && lo <= 0.0 { f64::NEG_INFINITY } else { d(lo, 1.0) };
    if lo_val >= 0.0 {
        return lo;
    }
    if d(hi, -1.0) <= 0.0 {
        return hi;
    }
    let (mut l, mut h) = (lo, hi);
    for _ in 0..400 {
        let m = 0.5 * (l + h);
        if m <= l || m >= h {
            break;
        }
        if d(m, 0.0) < 0.0 {
            l = m;
        } else {
            h = m;
        }
    }
    0.5 * (l + h)
}

/// Root of a nonincreasing `f` on `[lo, ∞)` or `(−∞, ∞)` by bracketing and bisection.
fn monotone_root(f: impl Fn(f64) -> f64, lower: Option<f64>) -> f64 {
    let mut hi = 1.0;
    while f(hi) > 0.0 {
        hi *= 2.0;
        assert!(hi < 1e300, "no bracket");
    }
    let mut lo = match lower {
        Some(l) => l,
        None => {
            let mut l = -1.0;
            while f(l) < 0.0 {
                l *= 2.0;
                assert!(l > -1e300, "no bracket");
            }
            l
        }
    };
    if lower.is_some() && f(lo) <= 0.0 {
        return lo;
    }
    let mut h = hi;
    for _ in 0..400 {
        let m = 0.5 * (lo + h);
        if m <= lo || m >= h {
            break;
        }
        if f(m) > 0.0 {
            lo = m;
        } else {
            h = m;
        }
    }
    0.5 * (lo + h)
}

/// `argmin_{z∈Y} ⟨η, z⟩ + ω(z)` through one Lagrange multiplier per
/// constraint and coordinate-wise bisection; uses nothing but `ω'`.
pub fn generic_mirror(setup: &ProximalSetup, eta: &[f64]) -> Vec<f64> {
    let piece = Piece::of(setup);
    match setup.domain().clone() {
        Domain::EuclideanBall { radius, .. } => {
            let z_of = |nu: f64| -> Vec<f64> {
                eta.iter()
                    .map(|a| scalar_argmin(piece, *a, nu, Penalty::HalfSquare, -radius, radius))
                    .collect()
            };
            let nu = monotone_root(|nu| z_of(nu).iter().map(|v| v * v).sum::<f64>() - radius * radius, Some(0.0));
            z_of(nu)
        }
        Domain::L1Ball { radius, symmetric, dim } => {
            // Coordinates with weights: a symmetric pair counts twice.
            let (coef, weight, map): (Vec<f64>, Vec<f64>, Vec<Vec<usize>>) = match symmetric {
                None => (eta.to_vec(), vec![1.0; dim], (0..dim).map(|k| vec![k]).collect()),
                Some(p) => {
                    let mut c = Vec::new();
                    let mut w = Vec::new();
                    let mut m = Vec::new();
                    for i in 0..p {
                        for j in i..p {
                            if i == j {
                                c.push(eta[i * p + i]);
                                w.push(1.0);
                                m.push(vec![i * p + i]);
                            } else {
                                c.push(0.5 * (eta[i * p + j] + eta[j * p + i]));
                                w.push(2.0);
                                m.push(vec![i * p + j, j * p + i]);
                            }
                        }
                    }
                    (c, w, m)
                }
            };
            let t_of = |nu: f64| -> Vec<f64> {
                coef.iter()
                    .map(|a| scalar_argmin(piece, *a, nu, Penalty::Abs, -radius, radius))
                    .collect()
            };
            let nu = monotone_root(
                |nu| t_of(nu).iter().zip(&weight).map(|(t, w)| w * t.abs()).sum::<f64>() - radius,
                Some(0.0),
            );
            let t = t_of(nu);
            let mut z = vec![0.0; dim];
            for (v, idx) in t.iter().zip(&map) {
                for &k in idx {
                    z[k] = *v;
                }
            }
            z
        }
        Domain::BoxHyperplane { signs } => {
            let z_of = |nu: f64| -> Vec<f64> {
                eta.iter()
                    .zip(&signs)
                    .map(|(a, e)| scalar_argmin(piece, a + nu * e, 0.0, Penalty::None, 0.0, 1.0))
                    .collect()
            };
            let nu = monotone_root(|nu| z_of(nu).iter().zip(&signs).map(|(z, e)| z * e).sum::<f64>(), None);
            z_of(nu)
        }
        Domain::SimplexProduct { blocks, block_size } => {
            let mass = 1.0 / blocks as f64;
            let mut z = Vec::with_capacity(blocks * block_size);
            for b in 0..blocks {
                let block = &eta[b * block_size..(b + 1) * block_size];
                let z_of = |nu: f64| -> Vec<f64> {
                    block
                        .iter()
                        .map(|a| scalar_argmin(piece, a + nu, 0.0, Penalty::None, 0.0, mass))
                        .collect()
                };
                let nu = monotone_root(|nu| z_of(nu).iter().sum::<f64>() - mass, None);
                z.extend(z_of(nu));
            }
            z
        }
    }
}

/// `Prox_y(ξ)` through [`generic_mirror`].
pub fn generic_prox(setup: &ProximalSetup, y: &[f64], xi: &[f64]) -> Vec<f64> {
    let g = setup.omega_grad(y);
    let eta: Vec<f64> = xi.iter().zip(&g).map(|(a, b)| a - b).collect();
    generic_mirror(setup, &eta)
}

fn combinations(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    rec(0, n, k, &mut Vec::new(), f);
}

/// Inequalities `A y ≤ b` and equalities `E y = f` of a polyhedral domain.
fn polytope(setup: &ProximalSetup) -> Option<(Vec<Vec<f64>>, Vec<f64>, Vec<Vec<f64>>, Vec<f64>)> {
    let n = setup.dim();
    let unit = |k: usize, s: f64| {
        let mut v = vec![0.0; n];
        v[k] = s;
        v
    };
    match setup.domain().clone() {
        Domain::L1Ball { radius, symmetric: None, .. } => {
            let mut a = Vec::new();
            for mask in 0..(1usize << n) {
                a.push((0..n).map(|k| if mask >> k & 1 == 1 { -1.0 } else { 1.0 }).collect());
            }
            let b = vec![radius; a.len()];
            Some((a, b, Vec::new(), Vec::new()))
        }
        Domain::BoxHyperplane { signs } => {
            let mut a = Vec::new();
            let mut b = Vec::new();
            for k in 0..n {
                a.push(unit(k, -1.0));
                b.push(0.0);
                a.push(unit(k, 1.0));
                b.push(1.0);
            }
            Some((a, b, vec![signs], vec![0.0]))
        }
        Domain::SimplexProduct { blocks, block_size } => {
            let a = (0..n).map(|k| unit(k, -1.0)).collect();
            let e = (0..blocks)
                .map(|bl| (0..n).map(|k| if k / block_size == bl { 1.0 } else { 0.0 }).collect())
                .collect();
            Some((a, vec![0.0; n], e, vec![1.0 / blocks as f64; blocks]))
        }
        _ => None,
    }
}

/// Exact `max_{y∈Y} min_j h_j(y)` for `dim ≤ 3` by enumeration: LP vertices
/// of the epigraph for polytopes, active-set subspace maximizers for the ball.
/// Returns the value and a maximizer.
pub fn brute_maxmin(setup: &ProximalSetup, bundle: &AffineBundle) -> (f64, Vec<f64>) {
    let n = setup.dim();
    let m = bundle.len();
    let mut best = (f64::NEG_INFINITY, vec![0.0; n]);
    let consider = |y: Vec<f64>, best: &mut (f64, Vec<f64>)| {
        if setup.violation(&y) <= 1e-9 {
            let v = bundle.min_value(&y);
            if v > best.0 {
                *best = (v, y);
            }
        }
    };
    if let Some((a, b, e, f)) = polytope(setup) {
        // Variables (y, s): cut rows s + gᵀy ≤ c, domain rows, equalities.
        let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
        for h in &bundle.cuts {
            let mut r = h.g.clone();
            r.push(1.0);
            rows.push((r, h.c));
        }
        for (ai, bi) in a.iter().zip(&b) {
            let mut r = ai.clone();
            r.push(0.0);
            rows.push((r, *bi));
        }
        let k = n + 1 - e.len();
        combinations(rows.len(), k, &mut |idx| {
            if !idx.iter().any(|&i| i < m) {
                return;
            }
            let mut mat = DMatrix::<f64>::zeros(n + 1, n + 1);
            let mut rhs = DVector::<f64>::zeros(n + 1);
            for (r, &i) in idx.iter().enumerate() {
                for c in 0..=n {
                    mat[(r, c)] = rows[i].0[c];
                }
                rhs[r] = rows[i].1;
            }
            for (r, (ei, fi)) in e.iter().zip(&f).enumerate() {
                for c in 0..n {
                    mat[(k + r, c)] = ei[c];
                }
                rhs[k + r] = *fi;
            }
            if let Some(sol) = mat.clone().lu().solve(&rhs) {
                if (&mat * &sol - &rhs).amax() > 1e-9 {
                    return;
                }
                let y: Vec<f64> = sol.iter().take(n).copied().collect();
                if a.iter().zip(&b).all(|(ai, bi)| ai.iter().zip(&y).map(|(p, q)| p * q).sum::<f64>() <= bi + 1e-9) {
                    consider(y, &mut best);
                }
            }
        });
        return best;
    }
    let radius = match setup.domain() {
        Domain::EuclideanBall { radius, .. } => *radius,
        d => panic!("no brute-force maxmin for {d:?}"),
    };
    for k in 1..=m.min(n + 1) {
        combinations(m, k, &mut |idx| {
            let h0 = &bundle.cuts[idx[0]];
            // (g_i − g_0)ᵀ y = c_i − c_0 keeps the chosen cuts equal.
            let rows = idx.len() - 1;
            let d = DMatrix::<f64>::from_fn(rows, n, |r, c| bundle.cuts[idx[r + 1]].g[c] - h0.g[c]);
            let e = DVector::<f64>::from_fn(rows, |r, _| bundle.cuts[idx[r + 1]].c - h0.c);
            let (p0, proj) = if rows == 0 {
                (DVector::zeros(n), DMatrix::<f64>::identity(n, n))
            } else {
                let Some(inv) = (&d * d.transpose()).try_inverse() else { return };
                let p0 = d.transpose() * (&inv * &e);
                let proj = DMatrix::<f64>::identity(n, n) - d.transpose() * &inv * &d;
                (p0, proj)
            };
            let r2 = radius * radius - p0.norm_squared();
            if r2 < -1e-12 {
                return;
            }
            let v = &proj * (-DVector::from_column_slice(&h0.g));
            let y = if v.norm() <= 1e-12 {
                p0
            } else {
                &p0 + v.normalize() * r2.max(0.0).sqrt()
            };
            consider(y.iter().copied().collect(), &mut best);
        });
    }
    best
}

/// `max_{y∈Y} min_j h_j(y)` over random points: a lower bound.
pub fn sampled_maxmin<R: rand::Rng>(setup: &ProximalSetup, bundle: &AffineBundle, samples: usize, rng: &mut R) -> f64 {
    (0..samples)
        .map(|_| bundle.min_value(&setup.random_point(rng)))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `argmin {½‖y‖² − ⟨a, y⟩ : A y ≤ b, E y = f}` by enumerating active sets of
/// the KKT system; exact up to rounding, meant for `dim ≤ 3`.
fn quadratic_by_active_sets(a: &[f64], ineq: &[(Vec<f64>, f64)], eq: &[(Vec<f64>, f64)]) -> Vec<f64> {
    let n = a.len();
    let av = DVector::from_column_slice(a);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for k in 0..=n.saturating_sub(eq.len()) {
        combinations(ineq.len(), k, &mut |idx| {
            let rows: Vec<&(Vec<f64>, f64)> = idx.iter().map(|&i| &ineq[i]).chain(eq.iter()).collect();
            let y = if rows.is_empty() {
                av.clone()
            } else {
                let c = DMatrix::<f64>::from_fn(rows.len(), n, |r, j| rows[r].0[j]);
                let d = DVector::<f64>::from_fn(rows.len(), |r, _| rows[r].1);
                let Some(inv) = (&c * c.transpose()).try_inverse() else { return };
                let kappa = &inv * (&c * &av - d);
                // Inequality multipliers must be nonnegative.
                if kappa.iter().take(k).any(|v| *v < -1e-12) {
                    return;
                }
                &av - c.transpose() * kappa
            };
            let feasible = ineq.iter().all(|(r, b)| r.iter().zip(y.iter()).map(|(p, q)| p * q).sum::<f64>() <= b + 1e-10)
                && eq.iter().all(|(r, f)| (r.iter().zip(y.iter()).map(|(p, q)| p * q).sum::<f64>() - f).abs() <= 1e-10);
            if feasible {
                let obj = 0.5 * y.norm_squared() - av.dot(&y);
                if best.as_ref().map_or(true, |(o, _)| obj < *o) {
                    best = Some((obj, y.iter().copied().collect()));
                }
            }
        });
    }
    best.expect("no feasible active set").1
}

/// `argmin {ω(y) − ⟨ω'(ŷ), y⟩ : y ∈ Y, h_j(y) ≥ ℓ}`: exact active-set
/// enumeration for Euclidean `ω` on polytopes, an interior-point conic solve
/// otherwise.
pub fn reference_level_project(setup: &ProximalSetup, anchor: &[f64], bundle: &AffineBundle, level: f64) -> Vec<f64> {
    if let (Dgf::Euclidean, Some((a, b, e, f))) = (setup.dgf(), polytope(setup)) {
        let mut ineq: Vec<(Vec<f64>, f64)> = a.into_iter().zip(b).collect();
        ineq.extend(bundle.cuts.iter().map(|h| (h.g.clone(), h.c - level)));
        let eq: Vec<(Vec<f64>, f64)> = e.into_iter().zip(f).collect();
        return quadratic_by_active_sets(&setup.omega_grad(anchor), &ineq, &eq);
    }
    conic_level_project(setup, anchor, bundle, level)
}

/// `argmin {ω(y) − ⟨ω'(ŷ), y⟩ : y ∈ Y, h_j(y) ≥ ℓ}` by an interior-point conic solve.
pub fn conic_level_project(setup: &ProximalSetup, anchor: &[f64], bundle: &AffineBundle, level: f64) -> Vec<f64> {
    let n = setup.dim();
    let lin = setup.omega_grad(anchor);
    // Variable layout: y, then auxiliaries.
    let (naux, quadratic) = match (setup.domain(), setup.dgf()) {
        (Domain::L1Ball { .. }, Dgf::Euclidean) => (n, true),
        (Domain::L1Ball { .. }, Dgf::Power { .. }) => (2 * n, false),
        (Domain::SimplexProduct { .. }, _) => (n, false),
        _ => (0, true),
    };
    let nv = n + naux;
    let mut q = vec![0.0; nv];
    for k in 0..n {
        q[k] = -lin[k];
    }
    let mut p_rows = vec![vec![0.0; nv]; nv];
    if quadratic {
        for k in 0..n {
            p_rows[k][k] = 1.0;
        }
    }
    let mut zero: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut nonneg: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut extra: Vec<(Vec<(Vec<f64>, f64)>, SupportedConeT<f64>)> = Vec::new();
    let row = |pairs: &[(usize, f64)]| {
        let mut r = vec![0.0; nv];
        for &(i, v) in pairs {
            r[i] += v;
        }
        r
    };
    // Cuts: gᵀy ≤ c − ℓ.
    for h in &bundle.cuts {
        let mut r = vec![0.0; nv];
        r[..n].copy_from_slice(&h.g);
        nonneg.push((r, h.c - level));
    }
    match setup.domain().clone() {
        Domain::EuclideanBall { radius, .. } => {
            let mut block = vec![(vec![0.0; nv], radius)];
            for k in 0..n {
                block.push((row(&[(k, -1.0)]), 0.0));
            }
            extra.push((block, SecondOrderConeT(n + 1)));
        }
        Domain::L1Ball { radius, symmetric, .. } => {
            // u ≥ |y|, Σu ≤ R.
            for k in 0..n {
                nonneg.push((row(&[(k, 1.0), (n + k, -1.0)]), 0.0));
                nonneg.push((row(&[(k, -1.0), (n + k, -1.0)]), 0.0));
            }
            nonneg.push((row(&(n..2 * n).map(|i| (i, 1.0)).collect::<Vec<_>>()), radius));
            if let Some(p) = symmetric {
                for i in 0..p {
                    for j in i + 1..p {
                        zero.push((row(&[(i * p + j, 1.0), (j * p + i, -1.0)]), 0.0));
                    }
                }
            }
            if let Dgf::Power { alpha } = setup.dgf() {
                let ln_n = (n.max(3) as f64).ln();
                let (c, qexp) = (alpha * ln_n, 1.0 + 1.0 / ln_n);
                // t_k ≥ |y_k|^q as (t_k, 1, y_k) in the power cone with exponent 1/q.
                for k in 0..n {
                    q[2 * n + k] = c;
                    extra.push((
                        vec![
                            (row(&[(2 * n + k, -1.0)]), 0.0),
                            (vec![0.0; nv], 1.0),
                            (row(&[(k, -1.0)]), 0.0),
                        ],
                        PowerConeT(1.0 / qexp),
                    ));
                }
            }
        }
        Domain::BoxHyperplane { signs } => {
            for k in 0..n {
                nonneg.push((row(&[(k, -1.0)]), 0.0));
                nonneg.push((row(&[(k, 1.0)]), 1.0));
            }
            zero.push((row(&signs.iter().enumerate().map(|(k, s)| (k, *s)).collect::<Vec<_>>()), 0.0));
        }
        Domain::SimplexProduct { blocks, block_size } => {
            for bl in 0..blocks {
                zero.push((
                    row(&(bl * block_size..(bl + 1) * block_size).map(|k| (k, 1.0)).collect::<Vec<_>>()),
                    1.0 / blocks as f64,
                ));
            }
            // y ln y ≤ t as (−t, y, 1) in the exponential cone.
            for k in 0..n {
                q[n + k] = 1.0;
                extra.push((
                    vec![(row(&[(n + k, 1.0)]), 0.0), (row(&[(k, -1.0)]), 0.0), (vec![0.0; nv], 1.0)],
                    ExponentialConeT(),
                ));
            }
        }
    }
    let offset = zero.len();
    let (x, z) = solve_conic(nv, &p_rows, &q, zero, nonneg, extra);
    let mu: Vec<f64> = (0..bundle.len()).map(|j| z[offset + j]).collect();
    polish(setup, anchor, bundle, level, &mu).unwrap_or_else(|| x[..n].to_vec())
}

/// Newton on the active cut equations `h_j(y(μ)) = ℓ` with
/// `y(μ) = argmin ω(y) + ⟨Σμ_j g_j − ω'(ŷ), y⟩` from [`generic_mirror`];
/// the interior-point answer alone is only accurate to about `√gap`.
fn polish(setup: &ProximalSetup, anchor: &[f64], bundle: &AffineBundle, level: f64, mu0: &[f64]) -> Option<Vec<f64>> {
    let scale = mu0.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
    let active: Vec<usize> = (0..mu0.len()).filter(|&j| mu0[j] > 1e-6 * scale).collect();
    let base = setup.omega_grad(anchor);
    let y_of = |mu: &[f64]| {
        let mut eta: Vec<f64> = base.iter().map(|v| -v).collect();
        for (k, &j) in active.iter().enumerate() {
            for (e, g) in eta.iter_mut().zip(&bundle.cuts[j].g) {
                *e += mu[k] * g;
            }
        }
        generic_mirror(setup, &eta)
    };
    let resid = |mu: &[f64]| {
        let y = y_of(mu);
        DVector::from_iterator(active.len(), active.iter().map(|&j| bundle.cuts[j].eval(&y) - level))
    };
    let mut mu: Vec<f64> = active.iter().map(|&j| mu0[j]).collect();
    for _ in 0..20 {
        let r = resid(&mu);
        if r.amax() <= 1e-13 {
            break;
        }
        let k = mu.len();
        let mut jac = DMatrix::<f64>::zeros(k, k);
        for c in 0..k {
            let h = 1e-7 * (1.0 + mu[c].abs());
            let mut up = mu.clone();
            up[c] += h;
            let mut dn = mu.clone();
            dn[c] -= h;
            let col = (resid(&up) - resid(&dn)) / (2.0 * h);
            jac.set_column(c, &col);
        }
        let step = jac.lu().solve(&r)?;
        for (m, s) in mu.iter_mut().zip(step.iter()) {
            *m -= s;
        }
    }
    let y = y_of(&mu);
    let ok = mu.iter().all(|m| *m >= 0.0)
        && resid(&mu).amax() <= 1e-10
        && bundle.cuts.iter().all(|h| h.eval(&y) >= level - 1e-10);
    ok.then_some(y)
}

fn solve_conic(
    nv: usize,
    p_rows: &[Vec<f64>],
    q: &[f64],
    zero: Vec<(Vec<f64>, f64)>,
    nonneg: Vec<(Vec<f64>, f64)>,
    extra: Vec<(Vec<(Vec<f64>, f64)>, SupportedConeT<f64>)>,
) -> (Vec<f64>, Vec<f64>) {
    let mut a_rows: Vec<Vec<f64>> = Vec::new();
    let mut b = Vec::new();
    let mut cones = Vec::new();
    if !zero.is_empty() {
        cones.push(ZeroConeT(zero.len()));
        for (r, v) in zero {
            a_rows.push(r);
            b.push(v);
        }
    }
    if !nonneg.is_empty() {
        cones.push(NonnegativeConeT(nonneg.len()));
        for (r, v) in nonneg {
            a_rows.push(r);
            b.push(v);
        }
    }
    for (block, cone) in extra {
        for (r, v) in block {
            a_rows.push(r);
            b.push(v);
        }
        cones.push(cone);
    }
    let upper: Vec<Vec<f64>> = (0..nv)
        .map(|i| (0..nv).map(|j| if j >= i { p_rows[i][j] } else { 0.0 }).collect())
        .collect();
    let p = CscMatrix::from(&upper);
    let a = CscMatrix::from(&a_rows);
    let settings = DefaultSettings {
        verbose: false,
        tol_gap_abs: 1e-12,
        tol_gap_rel: 1e-12,
        tol_feas: 1e-12,
        max_iter: 400,
        ..DefaultSettings::default()
    };
    let mut solver = DefaultSolver::new(&p, q, &a, &b, &cones, settings).expect("conic setup");
    solver.solve();
    assert!(
        matches!(solver.solution.status, SolverStatus::Solved | SolverStatus::AlmostSolved),
        "conic solve: {:?}",
        solver.solution.status
    );
    (solver.solution.x.clone(), solver.solution.z.clone())
}

/// Eigenvalues of a symmetric matrix (row-major) by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(n: usize, data: &[f64]) -> Vec<f64> {
    let mut a = data.to_vec();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |j| *j != i).map(move |j| (i, j))).map(|(i, j)| a[i * n + j].powi(2)).sum();
        let total: f64 = a.iter().map(|v| v * v).sum();
        if off <= 1e-30 * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k * n + p], a[k * n + q]);
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p * n + k], a[q * n + k]);
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i * n + i]).collect()
}

/// Singular values of a row-major matrix by one-sided Jacobi on the columns.
pub fn jacobi_singular_values(rows: usize, cols: usize, data: &[f64]) -> Vec<f64> {
    // Work on the orientation with fewer columns.
    let (m, n, a0): (usize, usize, Vec<f64>) = if cols <= rows {
        (rows, cols, data.to_vec())
    } else {
        (cols, rows, (0..cols).flat_map(|j| (0..rows).map(move |i| data[i * cols + j])).collect())
    };
    let mut a = a0;
    for _ in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..m {
                    let (x, y) = (a[i * n + p], a[i * n + q]);
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let (x, y) = (a[i * n + p], a[i * n + q]);
                    a[i * n + p] = c * x - s * y;
                    a[i * n + q] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    (0..n).map(|j| (0..m).map(|i| a[i * n + j].powi(2)).sum::<f64>().sqrt()).collect()
}

pub fn dense_top_eigenvalue(n: usize, data: &[f64]) -> f64 {
    jacobi_eigenvalues(n, data).into_iter().fold(f64::NEG_INFINITY, f64::max)
}

pub fn dense_top_singular_value(rows: usize, cols: usize, data: &[f64]) -> f64 {
    jacobi_singular_values(rows, cols, data).into_iter().fold(0.0, f64::max)
}
