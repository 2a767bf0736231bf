//! Measured checks shared by the core integration tests and the acceptance
//! run. Each returns a one-line summary on success and the first violation
//! otherwise.

use core::cell::RefCell;

use dualcert::apps::{
    build_mc_dual, build_multiclass, build_psd_completion, build_svm, gen_mc, random_multiclass,
    random_psd_completion, random_svm, PsdDgf,
};
use dualcert::auxsolve::{level_project, maxmin_affine, AffineBundle, AffineCut};
use dualcert::certificate::{certificate_resolution, recover_primal_dual, NoClock, PrimalPoint};
use dualcert::duality::{duality_gap, smoothed_value_grad, FenchelProblem, FieldAnswer, FnField};
use dualcert::linalg::{LinearForm, Mat, SparseMat};
use dualcert::lo::{spectral_scale, LoOracle, PrimalDomain};
use dualcert::prox::{Dgf, ProximalSetup, POWER_ALPHA};
use dualcert::solvers::{
    cg_run, md_bound, md_run, mdl_run, mdl_step_bound, nerml_run, nerml_step_bound, scg_run, SolverConfig, SolverOutput,
    Status,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{
    brute_maxmin, dense_top_eigenvalue, dense_top_singular_value, generic_prox, reference_level_project, sampled_maxmin,
};

pub type Check = Result<String, String>;

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

// ---------------------------------------------------------------- prox

pub fn prox_setups() -> Vec<ProximalSetup> {
    vec![
        ProximalSetup::euclidean_ball(5, 1.0),
        ProximalSetup::euclidean_ball(3, 2.5),
        ProximalSetup::l1_ball(6, 1.0),
        ProximalSetup::l1_ball_power(6, POWER_ALPHA),
        ProximalSetup::l1_ball_power(2, POWER_ALPHA),
        ProximalSetup::symmetric_l1_ball(2, Dgf::Power { alpha: POWER_ALPHA }),
        ProximalSetup::symmetric_l1_ball(2, Dgf::Euclidean),
        ProximalSetup::box_hyperplane(vec![1.0, -1.0, 1.0, -1.0, 1.0, 1.0]).unwrap(),
        ProximalSetup::box_hyperplane(vec![1.0, -1.0]).unwrap(),
        ProximalSetup::simplex_product(2, 3),
        ProximalSetup::simplex_product(1, 6),
    ]
}

/// Fast prox against the generic inner solver, `trials` per setup.
pub fn prox_vs_generic(trials: usize, tol: f64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0_f64;
    for s in prox_setups() {
        for trial in 0..trials {
            let y = if trial % 4 == 0 { s.center() } else { s.random_point(&mut rng) };
            let scale = [0.01, 0.3, 1.0, 5.0][trial % 4];
            let xi: Vec<f64> = (0..s.dim()).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
            let fast = s.prox(&y, &xi).map_err(|e| e.to_string())?;
            let d = max_diff(&fast, &generic_prox(&s, &y, &xi));
            if d > tol {
                return Err(format!("{:?} trial {trial}: prox differs by {d:e}", s.domain()));
            }
            worst = worst.max(d);
        }
    }
    Ok(format!("max prox diff {worst:.1e}"))
}

/// Prox from the center of a simplex product against the blockwise softmax.
pub fn entropy_softmax(trials: usize, tol: f64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (blocks, m) = (3, 4);
    let s = ProximalSetup::simplex_product(blocks, m);
    let mut worst = 0.0_f64;
    for _ in 0..trials {
        let xi: Vec<f64> = (0..blocks * m).map(|_| 3.0 * rng.random_range(-1.0..1.0)).collect();
        let got = s.prox(&s.center(), &xi).map_err(|e| e.to_string())?;
        for b in 0..blocks {
            let blk = &xi[b * m..(b + 1) * m];
            let z: f64 = blk.iter().map(|v| (-v).exp()).sum();
            for i in 0..m {
                let want = (-blk[i]).exp() / (blocks as f64 * z);
                worst = worst.max((got[b * m + i] - want).abs());
            }
        }
    }
    if worst > tol {
        return Err(format!("softmax differs by {worst:e}"));
    }
    Ok(format!("max softmax diff {worst:.1e}"))
}

/// `⟨ξ, y₊ − z⟩ ≤ V_y(z) − V_{y₊}(z) − V_y(y₊)` on random triples.
pub fn three_point(triples: usize, tol: f64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = f64::INFINITY;
    for s in prox_setups() {
        for _ in 0..triples {
            let y = s.random_point(&mut rng);
            let xi: Vec<f64> = (0..s.dim()).map(|_| rng.random_range(-2.0..2.0)).collect();
            let z = s.random_point(&mut rng);
            let yp = s.prox(&y, &xi).map_err(|e| e.to_string())?;
            let lhs: f64 = xi.iter().zip(yp.iter().zip(&z)).map(|(a, (p, q))| a * (p - q)).sum();
            let rhs = s.bregman(&y, &z) - s.bregman(&yp, &z) - s.bregman(&y, &yp);
            let slack = rhs - lhs;
            if slack < -tol {
                return Err(format!("{:?}: three-point slack {slack:e}", s.domain()));
            }
            worst = worst.min(slack);
        }
    }
    Ok(format!("min three-point slack {worst:.1e}"))
}

// ---------------------------------------------------------------- auxsolve

pub fn small_setups() -> Vec<ProximalSetup> {
    vec![
        ProximalSetup::euclidean_ball(2, 1.0),
        ProximalSetup::euclidean_ball(3, 1.5),
        ProximalSetup::l1_ball(2, 1.0),
        ProximalSetup::l1_ball(3, 1.0),
        ProximalSetup::l1_ball_power(3, POWER_ALPHA),
        ProximalSetup::box_hyperplane(vec![1.0, -1.0, 1.0]).unwrap(),
        ProximalSetup::box_hyperplane(vec![1.0, -1.0]).unwrap(),
        ProximalSetup::simplex_product(1, 3),
    ]
}

pub fn random_bundle(rng: &mut ChaCha8Rng, s: &ProximalSetup, m: usize) -> AffineBundle {
    AffineBundle::new(
        (0..m)
            .map(|j| {
                let y = s.random_point(rng);
                let g: Vec<f64> = (0..s.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
                AffineCut::from_step(j, &y, &g)
            })
            .collect(),
    )
}

/// `maxmin_affine` against vertex/active-set enumeration, and the sampled
/// lower bound against the enumeration itself.
pub fn maxmin_vs_enumeration(bundles: usize, tol: f64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut worst = 0.0_f64;
    for s in small_setups() {
        for trial in 0..bundles {
            let m = rng.random_range(1..7);
            let b = random_bundle(&mut rng, &s, m);
            let (want, _) = brute_maxmin(&s, &b);
            if sampled_maxmin(&s, &b, 200, &mut rng) > want + 1e-9 {
                return Err(format!("{:?}: enumeration missed a point", s.domain()));
            }
            let got = maxmin_affine(&s, &b).map_err(|e| e.to_string())?;
            let d = (got.opt - want).abs();
            if d > tol || got.lower < want - tol || got.lower > want + 1e-9 {
                return Err(format!("{:?} trial {trial}: opt {} lower {} vs {want}", s.domain(), got.opt, got.lower));
            }
            if (b.min_value(&got.u) - got.lower).abs() > 1e-9 || !s.contains(&got.u) {
                return Err(format!("{:?} trial {trial}: bad maximizer", s.domain()));
            }
            worst = worst.max(d);
        }
    }
    Ok(format!("max-min diff {worst:.1e}"))
}

/// `level_project` against the reference projection.
pub fn level_project_vs_reference(bundles: usize, tol: f64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mut setups = small_setups();
    setups.push(ProximalSetup::simplex_product(2, 2));
    let mut worst = 0.0_f64;
    for s in setups {
        let mut done = 0;
        while done < bundles {
            let m = rng.random_range(1..6);
            let b = random_bundle(&mut rng, &s, m);
            let mm = maxmin_affine(&s, &b).map_err(|e| e.to_string())?;
            if mm.opt <= 1e-3 {
                continue;
            }
            done += 1;
            let level = rng.random_range(0.1..0.9) * mm.opt;
            let anchor = if done % 2 == 0 { s.center() } else { s.random_point(&mut rng) };
            let got = level_project(&s, &anchor, &b, level, None).map_err(|e| e.to_string())?;
            let d = max_diff(&got.y, &reference_level_project(&s, &anchor, &b, level));
            if d > tol {
                return Err(format!("{:?}: projection differs by {d:e}", s.domain()));
            }
            worst = worst.max(d);
        }
    }
    Ok(format!("projection diff {worst:.1e}"))
}

// ---------------------------------------------------------------- lo

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn sparse_of(m: &Mat) -> LinearForm {
    let mut e = Vec::new();
    for i in 0..m.rows {
        for j in 0..m.cols {
            if m.get(i, j) != 0.0 {
                e.push((i, j, m.get(i, j)));
            }
        }
    }
    LinearForm::Sparse(SparseMat::new(m.rows, m.cols, e))
}

/// Gaussian, low rank plus noise, sparse masks, and a handful of entries
/// (the shape of forms built from vertices of an ℓ1 ball).
fn random_form(rng: &mut ChaCha8Rng, rows: usize, cols: usize, kind: usize) -> Mat {
    match kind % 4 {
        3 => {
            let mut m = Mat::zeros(rows, cols);
            for _ in 0..rng.random_range(1..=4) {
                let (i, j) = (rng.random_range(0..rows), rng.random_range(0..cols));
                let v = rng.sample::<f64, _>(StandardNormal);
                m.set(i, j, v);
                if rows == cols {
                    m.set(j, i, v);
                }
            }
            m
        }
        0 => gaussian(rng, rows, cols),
        1 => {
            let u = gaussian(rng, rows, 2);
            let v = gaussian(rng, 2, cols);
            let mut m = Mat::from_fn(rows, cols, |i, j| u.get(i, 0) * v.get(0, j) + 0.7 * u.get(i, 1) * v.get(1, j));
            m.add_scaled(0.05, &gaussian(rng, rows, cols));
            m
        }
        _ => {
            let g = gaussian(rng, rows, cols);
            Mat::from_fn(rows, cols, |i, j| if (i * 7 + j * 3) % 5 == 0 { g.get(i, j) } else { 0.0 })
        }
    }
}

/// LO values on the spectrahedron and the nuclear ball against dense
/// eigen/singular value decompositions. A value must lie in
/// `[dense − δ, dense + 1e-12·R·scale]` with `δ` the declared accuracy.
pub fn lo_vs_dense(trials: usize, max_dim: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut worst = 0.0_f64;
    for trial in 0..trials {
        let n = rng.random_range(2..=max_dim);
        let radius = rng.random_range(0.5..3.0);
        let g = random_form(&mut rng, n, n, trial);
        let m = Mat::from_fn(n, n, |i, j| 0.5 * (g.get(i, j) + g.get(j, i)));
        let xi = if trial % 5 == 4 { sparse_of(&m) } else { LinearForm::Dense(m.clone()) };
        let oracle = LoOracle::new(PrimalDomain::Spectrahedron { dim: n, radius });
        let ans = oracle.maximize(&xi).map_err(|e| e.to_string())?;
        let want = radius * dense_top_eigenvalue(n, &m.data);
        let scale = radius * spectral_scale(&xi);
        let delta = oracle.declared_delta(&xi);
        if ans.value < want - delta || ans.value > want + 1e-12 * scale {
            return Err(format!("spectrahedron trial {trial} n={n}: {} vs {want} (δ {delta:e})", ans.value));
        }
        if (ans.x.frob_dot(&m) - ans.value).abs() > 1e-10 * (1.0 + want.abs()) {
            return Err(format!("spectrahedron trial {trial}: point does not attain the value"));
        }
        worst = worst.max((ans.value - want).abs() / scale);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for trial in 0..trials {
        let rows = rng.random_range(1..=max_dim);
        let cols = rng.random_range(1..=max_dim);
        let radius = rng.random_range(0.5..3.0);
        let m = random_form(&mut rng, rows, cols, trial);
        let xi = if trial % 5 == 4 { sparse_of(&m) } else { LinearForm::Dense(m.clone()) };
        let oracle = LoOracle::new(PrimalDomain::NuclearBall { rows, cols, radius });
        let ans = oracle.maximize(&xi).map_err(|e| e.to_string())?;
        let want = radius * dense_top_singular_value(rows, cols, &m.data);
        let scale = radius * spectral_scale(&xi);
        let delta = oracle.declared_delta(&xi);
        if ans.value < want - delta || ans.value > want + 1e-12 * scale {
            return Err(format!("nuclear trial {trial} {rows}x{cols}: {} vs {want} (δ {delta:e})", ans.value));
        }
        worst = worst.max((ans.value - want).abs() / scale);
    }
    Ok(format!("max |LO − dense|/scale {worst:.1e}"))
}

// ---------------------------------------------------------------- soundness

/// A small instance of one of the four applications; the dual dimension
/// stays at or below 64.
pub fn app_problem(index: usize, seed: u64) -> FenchelProblem {
    let k = index / 4;
    match index % 4 {
        0 => build_mc_dual(&gen_mc(8 + 4 * (k % 3), 2, 4 + 4 * (k % 2), 4, seed).unwrap()).unwrap(),
        1 => {
            let dgf = if k % 2 == 0 { PsdDgf::Power } else { PsdDgf::Euclidean };
            build_psd_completion(&random_psd_completion(3 + k % 4, 1.0, 1.0, seed), dgf, None).unwrap()
        }
        2 => build_svm(&random_svm(8 + 2 * (k % 5), 3 + k % 2, 2 + k % 2, 1.0 + k as f64 % 3.0, seed)).unwrap(),
        _ => build_multiclass(&random_multiclass(8 + 2 * (k % 4), 3 + k % 2, 4, 1.0 + k as f64 % 3.0, seed)).unwrap(),
    }
}

/// The gap of the recovered pair, its resolution and the certificate's δ.
fn audit(problem: &FenchelProblem, out: &SolverOutput) -> Result<(f64, f64, f64), String> {
    let eps = certificate_resolution(&out.protocol, &out.certificate, &problem.dual_setup).map_err(|e| e.to_string())?;
    if (eps - out.resolution).abs() > 1e-9 * (1.0 + eps.abs()) {
        return Err(format!("{}: reported resolution {} vs {eps}", out.solver, out.resolution));
    }
    let (x_hat, y_hat) = recover_primal_dual(&out.protocol, &out.certificate).map_err(|e| e.to_string())?;
    let x_hat = x_hat.ok_or("no primal point")?;
    let gap = duality_gap(problem, &x_hat, &y_hat).map_err(|e| e.to_string())?;
    Ok((gap, eps, out.protocol.max_delta(&out.certificate)))
}

/// `0 ≤ f(ŷ) − f_*(x̂) ≤ ε + δ + 1e-8` for MD, MDL and NERML on `instances`
/// application instances, alternating online and target runs. The lower
/// side is allowed `−1e-8` of rounding.
pub fn certificate_soundness(instances: usize, budget: usize) -> Check {
    let (mut min_gap, mut max_slack, mut runs) = (f64::INFINITY, f64::INFINITY, 0);
    for i in 0..instances {
        let problem = app_problem(i, i as u64);
        let config = SolverConfig {
            budget,
            online: i % 2 == 1,
            epsilon: Some(1e-3),
            memory: 1 + 4 * (i % 3),
            seed: i as u64,
            ..SolverConfig::default()
        };
        for run in [md_run, mdl_run, nerml_run] {
            let out = run(&problem, &config, &NoClock).map_err(|e| format!("{}: {e}", problem.name))?;
            let (gap, eps, delta) = audit(&problem, &out)?;
            if gap < -1e-8 || gap > eps + delta + 1e-8 {
                return Err(format!("{} on {} #{i} (online {}, m {}): gap {gap:e}, ε {eps:e}, δ {delta:e}", out.solver, problem.name, config.online, config.memory));
            }
            min_gap = min_gap.min(gap);
            max_slack = max_slack.min(eps + delta - gap);
            runs += 1;
        }
    }
    Ok(format!("{runs} runs, min gap {min_gap:.1e}, min (ε+δ−gap) {max_slack:.1e}"))
}

// ---------------------------------------------------------------- toy fields

/// Subgradient field of `max_i (a_iᵀy + b_i)`.
pub fn max_affine_field(
    setup: ProximalSetup,
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
) -> FnField<impl Fn(&[f64]) -> dualcert::Result<FieldAnswer>> {
    FnField {
        setup,
        f: move |y: &[f64]| {
            let (mut best, mut arg) = (f64::NEG_INFINITY, 0);
            for (i, (ai, bi)) in a.iter().zip(&b).enumerate() {
                let v: f64 = ai.iter().zip(y).map(|(p, q)| p * q).sum::<f64>() + bi;
                if v > best {
                    best = v;
                    arg = i;
                }
            }
            Ok(FieldAnswer { g: a[arg].clone(), x: None, delta: 0.0, value: Some(best) })
        },
    }
}

/// Pieces with unit dual norm, so `L[g] = 1`.
pub fn random_pieces(setup: &ProximalSetup, pieces: usize, rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<f64>) {
    let a = (0..pieces)
        .map(|_| {
            let v: Vec<f64> = (0..setup.dim()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let n = setup.dual_norm(&v);
            v.iter().map(|x| x / n).collect()
        })
        .collect();
    let b = (0..pieces).map(|_| rng.random_range(-0.2..0.2)).collect();
    (a, b)
}

/// An arbitrary bounded field: fresh random unit-dual-norm vectors.
pub fn noise_field(setup: ProximalSetup, seed: u64) -> FnField<impl Fn(&[f64]) -> dualcert::Result<FieldAnswer>> {
    let rng = RefCell::new(ChaCha8Rng::seed_from_u64(seed));
    let s = setup.clone();
    FnField {
        setup,
        f: move |_: &[f64]| {
            let mut r = rng.borrow_mut();
            let v: Vec<f64> = (0..s.dim()).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
            let n = s.dual_norm(&v);
            Ok(FieldAnswer { g: v.iter().map(|x| x / n).collect(), x: None, delta: 0.0, value: None })
        },
    }
}

/// Fixed-horizon MD: resolution `≤ ΩL/√t + 1e-9`.
pub fn md_resolution_bound(horizons: &[usize]) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = f64::NEG_INFINITY;
    for setup in [ProximalSetup::euclidean_ball(8, 1.0), ProximalSetup::simplex_product(3, 4)] {
        let omega = setup.omega_diameter();
        for k in 0..6 {
            for &t in horizons {
                let cfg = SolverConfig { budget: t, ..SolverConfig::default() };
                let out = if k < 4 {
                    let (a, b) = random_pieces(&setup, 2 * setup.dim(), &mut rng);
                    md_run(&max_affine_field(setup.clone(), a, b), &cfg, &NoClock)
                } else {
                    md_run(&noise_field(setup.clone(), rng.random()), &cfg, &NoClock)
                }
                .map_err(|e| e.to_string())?;
                let bound = md_bound(omega, 1.0, t);
                if out.resolution > bound + 1e-9 {
                    return Err(format!("{:?} t={t}: resolution {} > {bound}", setup.domain(), out.resolution));
                }
                worst = worst.max(out.resolution / bound);
            }
        }
    }
    Ok(format!("max resolution/bound {worst:.3}"))
}

/// Nonsmooth toys over several domains, with `L[g] = 1`.
pub fn toy_suite(count: usize) -> Vec<(String, ProximalSetup, Vec<Vec<f64>>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    (0..count)
        .map(|i| {
            let d = rng.random_range(4..=16);
            let setup = match i % 5 {
                0 => ProximalSetup::euclidean_ball(d, 1.0),
                1 => ProximalSetup::l1_ball(d, 1.0),
                2 => ProximalSetup::l1_ball_power(d, POWER_ALPHA),
                3 => ProximalSetup::simplex_product(2, d / 2),
                _ => ProximalSetup::box_hyperplane((0..d).map(|j| if j % 3 == 0 { -1.0 } else { 1.0 }).collect()).unwrap(),
            };
            let (a, b) = random_pieces(&setup, 2 * setup.dim(), &mut rng);
            (format!("toy{i} {:?}", setup.domain()), setup, a, b)
        })
        .collect()
}

fn first_resolution(field: &impl dualcert::duality::VectorField) -> Result<f64, String> {
    let out = md_run(field, &SolverConfig { budget: 1, ..SolverConfig::default() }, &NoClock).map_err(|e| e.to_string())?;
    Ok(out.resolution)
}

/// MDL reaches `ε = 0.05·ε₁` within `2Ω²L²/(γ⁴(1−γ²)ε²) + 1` steps.
pub fn mdl_step_counts(count: usize) -> Check {
    let mut worst = 0.0_f64;
    for (name, setup, a, b) in toy_suite(count) {
        let omega = setup.omega_diameter();
        let field = max_affine_field(setup, a, b);
        let eps = 0.05 * first_resolution(&field)?;
        let bound = mdl_step_bound(omega, 1.0, 0.5, eps);
        let cfg = SolverConfig { epsilon: Some(eps), budget: bound.floor() as usize, ..SolverConfig::default() };
        let out = mdl_run(&field, &cfg, &NoClock).map_err(|e| e.to_string())?;
        if out.status == Status::BudgetExhausted || out.resolution > eps {
            return Err(format!("{name}: not done after {} steps (bound {bound:.0})", out.steps()));
        }
        worst = worst.max(out.steps() as f64 / bound);
    }
    Ok(format!("max steps/bound {worst:.2e}"))
}

/// NERML reaches `ε = 0.05·ε₁` within `C(γ,θ)Ω²L²/ε²` steps for each memory.
pub fn nerml_step_counts(count: usize, memories: &[usize]) -> Check {
    let mut worst = 0.0_f64;
    for (name, setup, a, b) in toy_suite(count) {
        let omega = setup.omega_diameter();
        let field = max_affine_field(setup, a, b);
        let eps = 0.05 * first_resolution(&field)?;
        let bound = nerml_step_bound(omega, 1.0, 0.5, 0.5, eps);
        for &m in memories {
            let cfg = SolverConfig { epsilon: Some(eps), budget: bound.floor() as usize, memory: m, ..SolverConfig::default() };
            let out = nerml_run(&field, &cfg, &NoClock).map_err(|e| e.to_string())?;
            if out.status == Status::BudgetExhausted || out.resolution > eps {
                return Err(format!("{name} m={m}: not done after {} steps (bound {bound:.0})", out.steps()));
            }
            worst = worst.max(out.steps() as f64 / bound);
        }
    }
    Ok(format!("max steps/bound {worst:.2e}"))
}

// ---------------------------------------------------------------- smooth

/// `f(x) = −Σ d_i (x_i − c_i)²` on `[−ρ,ρ]^n`. With `‖·‖_X = ‖·‖_∞/ρ` the
/// curvature constant is `L = 2ρ²Σd_i`, and the maximizer is `clamp(c)`.
pub fn cg_rate(instances: usize, steps: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut worst = f64::INFINITY;
    for k in 0..instances {
        let n = rng.random_range(2..=32);
        let rho = rng.random_range(0.5..2.0);
        let d: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..2.0)).collect();
        let c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.5 * rho..1.5 * rho)).collect();
        let lip = 2.0 * rho * rho * d.iter().sum::<f64>();
        let f = |x: &[f64]| -> f64 { (0..n).map(|i| -d[i] * (x[i] - c[i]).powi(2)).sum() };
        let best = f(&c.iter().map(|v| v.clamp(-rho, rho)).collect::<Vec<_>>());
        let oracle = LoOracle::new(PrimalDomain::InfTwoBox { blocks: n, block_size: 1, radius: rho });
        let x1 = if k % 2 == 0 {
            Mat::zeros(n, 1)
        } else {
            Mat::from_fn(n, 1, |i, _| if i % 2 == 0 { rho } else { -rho })
        };
        let out = cg_run(
            |x: &PrimalPoint| {
                let x = x.to_dense();
                let g = Mat::from_fn(n, 1, |i, _| -2.0 * d[i] * (x.get(i, 0) - c[i]));
                Ok((f(&x.data), g))
            },
            |g: &Mat| oracle.maximize(&LinearForm::Dense(g.clone())),
            PrimalPoint::Dense(x1),
            steps,
            None,
        )
        .map_err(|e| e.to_string())?;
        for (t, v) in out.values.iter().enumerate() {
            let slack = 8.0 * lip / (t as f64 + 2.0) - (best - v);
            if slack < -1e-9 {
                return Err(format!("instance {k} t={}: ε_t exceeds 8L/(t+1) by {:e}", t + 1, -slack));
            }
            worst = worst.min(slack / lip);
        }
    }
    Ok(format!("min slack/L {worst:.2e}"))
}

/// A random point of the primal domain: a convex combination of LO answers.
pub fn random_primal_point(problem: &FenchelProblem, rng: &mut ChaCha8Rng) -> PrimalPoint {
    let (rows, cols) = problem.lo.domain.shape();
    let pts: Vec<PrimalPoint> = (0..3)
        .map(|_| {
            let mut g = gaussian(rng, rows, cols);
            if let PrimalDomain::Spectrahedron { .. } = problem.lo.domain {
                g = Mat::from_fn(rows, cols, |i, j| g.get(i, j) + g.get(j, i));
            }
            problem.lo.maximize(&LinearForm::Dense(g)).unwrap().x
        })
        .collect();
    let mut w: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    PrimalPoint::combine(&w, &pts.iter().collect::<Vec<_>>()).unwrap()
}

/// `f_*(x) ≤ f_*^β(x) ≤ f_*(x) + ε/2` at `β = ε/Ω²`.
pub fn smoothing_sandwich(samples: usize, tol: f64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut worst = f64::INFINITY;
    for app in 0..5 {
        let problem = if app == 4 {
            build_psd_completion(&random_psd_completion(5, 1.0, 1.0, 9), PsdDgf::Euclidean, None).unwrap()
        } else {
            app_problem(app, 9)
        };
        let omega = problem.dual_setup.omega_diameter();
        for k in 0..samples {
            let eps = [1.0, 0.1, 0.01][k % 3];
            let beta = eps / (omega * omega);
            let x = random_primal_point(&problem, &mut rng);
            let f = problem.primal_value(&x).map_err(|e| e.to_string())?;
            let (fb, _, _) = smoothed_value_grad(&problem, &x, beta).map_err(|e| e.to_string())?;
            let slack = (fb - f).min(f + eps / 2.0 - fb);
            if slack < -tol {
                return Err(format!("{}: f {f} f_β {fb} ε {eps}", problem.name));
            }
            worst = worst.min(slack);
        }
    }
    Ok(format!("min sandwich slack {worst:.1e}"))
}

/// Optimal values of an 8×8 psd completion instance from SCG and from
/// NERML; each estimate is the primal value of the returned point.
pub fn scg_vs_nerml(eps: f64, scg_budget: usize) -> Check {
    let problem = build_psd_completion(&random_psd_completion(8, 1.0, 1.0, 4), PsdDgf::Power, None).unwrap();
    let scg = scg_run(&problem, eps, scg_budget, None, &NoClock).map_err(|e| e.to_string())?;
    let v_scg = problem.primal_value(&scg.x).map_err(|e| e.to_string())?;
    let cfg = SolverConfig { epsilon: Some(eps), budget: 100_000, memory: 5, ..SolverConfig::default() };
    let out = nerml_run(&problem, &cfg, &NoClock).map_err(|e| e.to_string())?;
    let (x_hat, _) = recover_primal_dual(&out.protocol, &out.certificate).map_err(|e| e.to_string())?;
    let v_nerml = problem.primal_value(&x_hat.ok_or("no primal point")?).map_err(|e| e.to_string())?;
    let d = (v_scg - v_nerml).abs();
    let msg = format!(
        "SCG {v_scg:.6} ({} steps, certified {}), NERML {v_nerml:.6} ({} steps), diff {d:.1e}",
        scg.cg.values.len(),
        scg.reached,
        out.steps()
    );
    if d > 2.0 * eps || out.status == Status::BudgetExhausted {
        return Err(msg);
    }
    Ok(msg)
}
