//! Certificate-producing first-order methods.
//!
//! `md_run`, `mdl_run` and `nerml_run` process a vector field over the dual
//! domain and return the execution protocol together with an accuracy
//! certificate. `cg_run` is plain conditional gradient; `scg_run` applies it
//! to the smoothed primal objective.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::auxsolve::{
    aggregate_bundle, level_project, maxmin_affine_ws, AffineBundle, AffineCut, MaxMinWorkspace,
};
use crate::certificate::{
    recover_primal_dual, AccuracyCertificate, Clock, ExecutionProtocol, GapTrace, PrimalPoint,
    ProtocolStep,
};
use crate::duality::{dual_eval, smoothed_value_grad, FenchelProblem, FieldAnswer, VectorField};
use crate::error::{Error, Result};
use crate::linalg::{LinearForm, Mat};
use crate::lo::LoAnswer;
use crate::prox::ProximalSetup;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Target resolution; ignored in online mode.
    pub epsilon: Option<f64>,
    /// Step budget (the horizon `t` for fixed-budget MD).
    pub budget: usize,
    pub gamma: f64,
    pub theta: f64,
    /// NERML memory `m`.
    pub memory: usize,
    pub omega: Option<f64>,
    pub lipschitz: Option<f64>,
    pub seed: u64,
    /// Keep running to the budget and record every resolution.
    pub online: bool,
    /// MD only: `γ_τ = Ω/(√τ‖g_τ‖_*)` instead of the fixed-horizon rule.
    pub anytime: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            epsilon: None,
            budget: 1000,
            gamma: 0.5,
            theta: 0.5,
            memory: 1,
            omega: None,
            lipschitz: None,
            seed: 0,
            online: false,
            anytime: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |s: &str| Err(Error::InvalidConfig(s.into()));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)");
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return bad("theta must lie in (0, 1)");
        }
        if self.memory == 0 {
            return bad("memory must be at least 1");
        }
        if self.budget == 0 {
            return bad("budget must be positive");
        }
        if let Some(e) = self.epsilon {
            if !(e >= 0.0) || !e.is_finite() {
                return bad("epsilon must be finite and nonnegative");
            }
        }
        if let Some(o) = self.omega {
            if !(o > 0.0) {
                return bad("omega override must be positive");
            }
        }
        Ok(())
    }

    /// The target used for stopping: zero in online mode.
    fn target(&self) -> f64 {
        if self.online {
            0.0
        } else {
            self.epsilon.unwrap_or(0.0)
        }
    }

    fn omega_for(&self, setup: &ProximalSetup) -> f64 {
        self.omega.unwrap_or_else(|| setup.omega_diameter())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    TargetReached,
    BudgetExhausted,
    /// A zero field value or zero resolution: the point is exactly optimal.
    Exact,
}

/// Start of a phase: `Δ_s` for MDL, `f_s` for NERML.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub phase: usize,
    /// 1-based protocol step at which the phase starts.
    pub start_step: usize,
    pub reference: f64,
    pub level: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub max_aux_gap: f64,
    pub max_kkt_residual: f64,
    pub max_delta: f64,
    pub aux_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOutput {
    pub solver: String,
    pub protocol: ExecutionProtocol,
    /// The best certificate seen, padded to the protocol length.
    pub certificate: AccuracyCertificate,
    pub resolution: f64,
    pub trace: GapTrace,
    pub x_hat: Option<PrimalPoint>,
    pub y_hat: Vec<f64>,
    pub status: Status,
    pub phases: Vec<PhaseRecord>,
    /// MD stepsizes `γ_τ`.
    pub step_sizes: Vec<f64>,
    pub stats: RunStats,
}

impl SolverOutput {
    pub fn steps(&self) -> usize {
        self.protocol.len()
    }
}

/// Shared bookkeeping: protocol, trace and the best certificate.
struct Run<'a> {
    setup: &'a ProximalSetup,
    protocol: ExecutionProtocol,
    trace: GapTrace,
    best: Option<(AccuracyCertificate, f64)>,
    stats: RunStats,
}

impl<'a> Run<'a> {
    fn new(setup: &'a ProximalSetup) -> Self {
        Run {
            setup,
            protocol: ExecutionProtocol::new(),
            trace: GapTrace::new(),
            best: None,
            stats: RunStats::default(),
        }
    }

    fn step<F: VectorField + ?Sized>(&mut self, field: &F, y: Vec<f64>) -> Result<FieldAnswer> {
        let ans = field.eval(&y)?;
        self.record(y, &ans)?;
        Ok(ans)
    }

    fn record(&mut self, y: Vec<f64>, ans: &FieldAnswer) -> Result<()> {
        self.stats.max_delta = self.stats.max_delta.max(ans.delta);
        let norm = self.setup.dual_norm(&ans.g);
        self.protocol.push(
            self.setup,
            ProtocolStep {
                y,
                g: ans.g.clone(),
                x: ans.x.clone(),
                g_dual_norm: norm,
                delta: ans.delta,
            },
        )
    }

    /// Records resolution `eps` of `cert` (length ≤ protocol) at the current step.
    fn observe(&mut self, cert: AccuracyCertificate, eps: f64, clock: &dyn Clock) -> Result<()> {
        let step = self.protocol.len();
        let protocol = &self.protocol;
        let padded = cert.padded(protocol.len());
        let mut keep = None;
        self.trace.update_with(step, eps, clock.elapsed_sec(), || {
            let y = weighted_dual(protocol, &padded.weights);
            keep = Some(padded.clone());
            Ok((None, y))
        })?;
        if let Some(c) = keep {
            self.best = Some((c, eps));
        }
        if let Some(r) = self.trace.records.last() {
            clock.observe(r);
        }
        Ok(())
    }

    fn finish(mut self, solver: &str, status: Status, phases: Vec<PhaseRecord>, step_sizes: Vec<f64>) -> Result<SolverOutput> {
        let (cert, eps) = self.best.take().ok_or(Error::EmptyProtocol)?;
        let cert = cert.padded(self.protocol.len());
        let (x_hat, y_hat) = recover_primal_dual(&self.protocol, &cert)?;
        self.trace.best_primal = x_hat.clone();
        Ok(SolverOutput {
            solver: solver.into(),
            protocol: self.protocol,
            certificate: cert,
            resolution: eps,
            trace: self.trace,
            x_hat,
            y_hat,
            status,
            phases,
            step_sizes,
            stats: self.stats,
        })
    }
}

fn weighted_dual(protocol: &ExecutionProtocol, w: &[f64]) -> Vec<f64> {
    let n = protocol.steps[0].y.len();
    let mut y = vec![0.0; n];
    for (s, wi) in protocol.steps.iter().zip(w) {
        if *wi != 0.0 {
            crate::linalg::axpy(*wi, &s.y, &mut y);
        }
    }
    y
}

/// `max_Y h = c + support(−g)`.
fn cut_max(setup: &ProximalSetup, h: &AffineCut) -> Result<f64> {
    let neg: Vec<f64> = h.g.iter().map(|v| -v).collect();
    Ok(h.c + setup.support(&neg)?.0)
}

/// Certificate over the protocol from a composed cut's provenance.
fn cert_from_provenance(h: &AffineCut, len: usize) -> Result<AccuracyCertificate> {
    let mut w = vec![0.0; len];
    for (tau, p) in &h.provenance {
        w[*tau] += p;
    }
    AccuracyCertificate::from_unnormalized(w)
}

/// Mirror descent with the fixed-horizon stepsizes `γ_τ = Ω/(√t‖g_τ‖_*)` and
/// certificate `λ ∝ γ`.
pub fn md_run<F: VectorField + ?Sized>(field: &F, config: &SolverConfig, clock: &dyn Clock) -> Result<SolverOutput> {
    config.validate()?;
    let setup = field.setup();
    let omega = config.omega_for(setup);
    let t_total = config.budget;
    let target = config.target();
    let mut run = Run::new(setup);
    let mut y = setup.center();
    let mut gammas: Vec<f64> = Vec::new();
    // Running Σγ_τ g_τ and Σγ_τ⟨g_τ, y_τ⟩ give each prefix resolution in O(n).
    let mut sum_g = vec![0.0; setup.dim()];
    let mut sum_lin = 0.0;
    let mut status = Status::BudgetExhausted;
    for tau in 1..=t_total {
        let ans = run.step(field, y.clone())?;
        let gnorm = setup.dual_norm(&ans.g);
        if gnorm == 0.0 {
            run.observe(AccuracyCertificate::one_hot(tau, tau - 1), 0.0, clock)?;
            status = Status::Exact;
            break;
        }
        let horizon = if config.anytime { tau } else { t_total } as f64;
        let gamma = omega / (horizon.sqrt() * gnorm);
        gammas.push(gamma);
        crate::linalg::axpy(gamma, &ans.g, &mut sum_g);
        sum_lin += gamma * crate::linalg::dot(&ans.g, &y);
        let total: f64 = gammas.iter().sum();
        let neg: Vec<f64> = sum_g.iter().map(|v| -v / total).collect();
        let eps = sum_lin / total + setup.support(&neg)?.0;
        if config.online || tau == t_total || eps <= target {
            let cert = AccuracyCertificate::from_unnormalized(gammas.clone())?;
            run.observe(cert, eps, clock)?;
        }
        if eps <= target && !config.online {
            status = if eps <= 0.0 { Status::Exact } else { Status::TargetReached };
            break;
        }
        if tau < t_total {
            let xi: Vec<f64> = ans.g.iter().map(|v| gamma * v).collect();
            y = setup.prox(&y, &xi)?;
        }
    }
    run.finish("md", status, Vec::new(), gammas)
}

/// Mirror Descent Level method with full memory.
pub fn mdl_run<F: VectorField + ?Sized>(field: &F, config: &SolverConfig, clock: &dyn Clock) -> Result<SolverOutput> {
    config.validate()?;
    let setup = field.setup();
    let target = config.target();
    let gamma = config.gamma;
    let center = setup.center();
    let mut run = Run::new(setup);
    let mut ws = MaxMinWorkspace::new();
    let mut phases: Vec<PhaseRecord> = Vec::new();
    let mut delta_prev = f64::INFINITY;
    // I_t as protocol indices (0-based).
    let mut active: Vec<usize> = Vec::new();
    let mut cuts: Vec<AffineCut> = Vec::new();
    let mut y = center.clone();
    let mut status = Status::BudgetExhausted;
    for t in 1..=config.budget {
        let ans = run.step(field, y.clone())?;
        if setup.dual_norm(&ans.g) == 0.0 {
            run.observe(AccuracyCertificate::one_hot(t, t - 1), 0.0, clock)?;
            status = Status::Exact;
            break;
        }
        cuts.push(AffineCut::from_step(t - 1, &y, &ans.g));
        let mut plus = active.clone();
        plus.push(t - 1);
        let bundle = AffineBundle::new(plus.iter().map(|&i| cuts[i].clone()).collect());
        let mm = maxmin_affine_ws(setup, &bundle, &mut ws)?;
        run.stats.max_aux_gap = run.stats.max_aux_gap.max(mm.gap_aux);
        run.stats.aux_iterations += mm.iterations;
        let mut w = vec![0.0; t];
        for (&i, l) in plus.iter().zip(&mm.lambda) {
            w[i] = *l;
        }
        let cert = AccuracyCertificate::from_unnormalized(w)?;
        let agg = bundle.combine(&mm.lambda);
        let eps = cut_max(setup, &agg)?;
        run.observe(cert.clone(), eps, clock)?;
        let new_phase = eps <= gamma * delta_prev;
        if new_phase {
            delta_prev = eps;
            phases.push(PhaseRecord {
                phase: phases.len() + 1,
                start_step: t,
                reference: eps,
                level: gamma * eps,
            });
        }
        if eps <= target {
            status = if eps <= 0.0 { Status::Exact } else { Status::TargetReached };
            break;
        }
        if t == config.budget {
            break;
        }
        let anchor = if new_phase {
            let mut next: Vec<usize> = plus
                .iter()
                .filter(|&&i| cert.weights[i] > 0.0)
                .copied()
                .collect();
            if !next.contains(&0) {
                next.insert(0, 0);
            }
            active = next;
            center.clone()
        } else {
            active = plus;
            y.clone()
        };
        let level = gamma * eps;
        let level_bundle = AffineBundle::new(active.iter().map(|&i| cuts[i].clone()).collect());
        let proj = level_project(setup, &anchor, &level_bundle, level, None)?;
        run.stats.max_kkt_residual = run.stats.max_kkt_residual.max(proj.kkt_residual);
        y = proj.y;
    }
    run.finish("mdl", status, phases, Vec::new())
}

/// Non-Euclidean Restricted Memory Level method: at most `m + 1` cuts.
pub fn nerml_run<F: VectorField + ?Sized>(field: &F, config: &SolverConfig, clock: &dyn Clock) -> Result<SolverOutput> {
    config.validate()?;
    let setup = field.setup();
    let target = config.target();
    let (gamma, theta, m) = (config.gamma, config.theta, config.memory);
    let center = setup.center();
    let mut run = Run::new(setup);
    let mut ws = MaxMinWorkspace::new();
    let mut phases: Vec<PhaseRecord> = Vec::new();

    let first = run.step(field, center.clone())?;
    let h1 = AffineCut::from_step(0, &center, &first.g);
    let f1 = cut_max(setup, &h1)?;
    run.observe(AccuracyCertificate::one_hot(1, 0), f1.max(0.0), clock)?;
    if setup.dual_norm(&first.g) == 0.0 || f1 <= 0.0 {
        return run.finish("nerml", Status::Exact, phases, Vec::new());
    }
    // g(y_ω) is reused whenever a phase restarts at the ω-center.
    let center_answer = first;

    let mut f_s = f1;
    let mut level = gamma * f_s;
    let mut slots: Vec<AffineCut> = vec![h1; m];
    let mut u = center.clone();
    let mut at_center = true;
    phases.push(PhaseRecord {
        phase: 1,
        start_step: 1,
        reference: f_s,
        level,
    });
    let mut status = Status::BudgetExhausted;
    while run.protocol.len() < config.budget {
        let ans = if at_center {
            run.record(u.clone(), &center_answer)?;
            center_answer.clone()
        } else {
            run.step(field, u.clone())?
        };
        let t = run.protocol.len();
        if setup.dual_norm(&ans.g) == 0.0 {
            run.observe(AccuracyCertificate::one_hot(t, t - 1), 0.0, clock)?;
            status = Status::Exact;
            break;
        }
        let mut cuts = slots.clone();
        cuts.push(AffineCut::from_step(t - 1, &u, &ans.g));
        let bundle = AffineBundle::new(cuts);
        let mm = maxmin_affine_ws(setup, &bundle, &mut ws)?;
        run.stats.max_aux_gap = run.stats.max_aux_gap.max(mm.gap_aux);
        run.stats.aux_iterations += mm.iterations;
        let composed = bundle.combine(&mm.lambda);
        let opt = cut_max(setup, &composed)?;
        run.observe(cert_from_provenance(&composed, t)?, opt, clock)?;
        if opt <= target {
            status = if opt <= 0.0 { Status::Exact } else { Status::TargetReached };
            break;
        }
        if opt < level + theta * (f_s - level) {
            f_s = opt;
            level = gamma * f_s;
            slots = vec![composed; m];
            u = center.clone();
            at_center = true;
            phases.push(PhaseRecord {
                phase: phases.len() + 1,
                start_step: t + 1,
                reference: f_s,
                level,
            });
            continue;
        }
        if run.protocol.len() >= config.budget {
            break;
        }
        let proj = level_project(setup, &center, &bundle, level, None)?;
        run.stats.max_kkt_residual = run.stats.max_kkt_residual.max(proj.kkt_residual);
        let agg = aggregate_bundle(&bundle, &proj.mu)?;
        // Drop the cuts with the smallest max-min weights.
        let mut order: Vec<usize> = (0..bundle.len()).collect();
        order.sort_by(|&a, &b| mm.lambda[a].total_cmp(&mm.lambda[b]).then(a.cmp(&b)));
        let drop = if agg.is_some() { 2 } else { 1 }.min(order.len());
        let mut gone = vec![false; bundle.len()];
        for &i in &order[..drop] {
            gone[i] = true;
        }
        let mut next: Vec<AffineCut> = bundle
            .cuts
            .into_iter()
            .zip(gone)
            .filter(|(_, g)| !g)
            .map(|(h, _)| h)
            .collect();
        if let Some(h) = agg {
            next.insert(0, h);
        }
        slots = next;
        u = proj.y;
        at_center = false;
    }
    run.finish("nerml", status, phases, Vec::new())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgOutput {
    pub x: PrimalPoint,
    /// `f(x_t)` for `t = 1, 2, …`
    pub values: Vec<f64>,
    /// Frank-Wolfe gaps `⟨f'(x_t), x̄_t − x_t⟩`, an upper bound on `max f − f(x_t)`
    /// up to the LO inaccuracy.
    pub fw_gaps: Vec<f64>,
    pub deltas: Vec<f64>,
    pub stopped: bool,
}

/// Conditional gradient for maximizing a smooth concave `f` with step
/// `2/(t+1)`; a step is rejected in favor of the previous point when the
/// oracle's inaccuracy would make `f` decrease. Stops once
/// `fw_gap + δ ≤ stop_gap`.
pub fn cg_run<V, L>(
    mut value_grad: V,
    mut lo: L,
    x1: PrimalPoint,
    budget: usize,
    stop_gap: Option<f64>,
) -> Result<CgOutput>
where
    V: FnMut(&PrimalPoint) -> Result<(f64, Mat)>,
    L: FnMut(&Mat) -> Result<LoAnswer>,
{
    let mut x = x1;
    let (mut fx, mut grad) = value_grad(&x)?;
    let mut out = CgOutput {
        x: x.clone(),
        values: Vec::new(),
        fw_gaps: Vec::new(),
        deltas: Vec::new(),
        stopped: false,
    };
    for t in 1..=budget {
        let ans = lo(&grad)?;
        let gap = ans.value - x.frob_dot(&grad);
        out.values.push(fx);
        out.fw_gaps.push(gap);
        out.deltas.push(ans.delta);
        if let Some(s) = stop_gap {
            if gap + ans.delta <= s {
                out.stopped = true;
                break;
            }
        }
        if t == budget {
            break;
        }
        let step = 2.0 / (t as f64 + 1.0);
        let cand = PrimalPoint::combine(&[1.0 - step, step], &[&x, &ans.x])?;
        let (fc, gc) = value_grad(&cand)?;
        if fc >= fx {
            x = cand;
            fx = fc;
            grad = gc;
        }
    }
    out.x = x;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScgOutput {
    pub x: PrimalPoint,
    pub beta: f64,
    pub cg: CgOutput,
    /// `y(x)` at the returned point.
    pub y: Vec<f64>,
    pub trace: GapTrace,
    pub reached: bool,
}

/// Smoothing with `β = ε/Ω²`, then conditional gradient on `f_*^β` until its
/// Frank-Wolfe gap certifies `ε/2`.
pub fn scg_run(problem: &FenchelProblem, epsilon: f64, budget: usize, omega: Option<f64>, clock: &dyn Clock) -> Result<ScgOutput> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidConfig("epsilon must be positive".into()));
    }
    if budget == 0 {
        return Err(Error::InvalidConfig("budget must be positive".into()));
    }
    let om = omega.unwrap_or_else(|| problem.dual_setup.omega_diameter());
    let beta = epsilon / (om * om);
    let x1 = dual_eval(problem, &problem.dual_setup.center())?.x;
    let cg = cg_run(
        |x| smoothed_value_grad(problem, x, beta).map(|(v, g, _)| (v, g)),
        |g| problem.lo.maximize(&LinearForm::Dense(g.clone())),
        x1,
        budget,
        Some(epsilon / 2.0),
    )?;
    let mut trace = GapTrace::new();
    for (t, (gap, d)) in cg.fw_gaps.iter().zip(&cg.deltas).enumerate() {
        // Opt(P) − f_*(x_t) ≤ fw_gap + δ + ε/2 by the smoothing sandwich.
        trace.update_with(t + 1, gap + d + epsilon / 2.0, clock.elapsed_sec(), || Ok((None, Vec::new())))?;
        clock.observe(&trace.records[t]);
    }
    let (_, _, y) = smoothed_value_grad(problem, &cg.x, beta)?;
    trace.best_primal = Some(cg.x.clone());
    trace.best_dual = Some(y.clone());
    Ok(ScgOutput {
        x: cg.x.clone(),
        beta,
        reached: cg.stopped,
        y,
        trace,
        cg,
    })
}

/// `Ω L / √t`: the resolution guaranteed by fixed-horizon MD.
pub fn md_bound(omega: f64, lipschitz: f64, steps: usize) -> f64 {
    omega * lipschitz / (steps as f64).sqrt()
}

/// `2Ω²L²/(γ⁴(1−γ²)ε²) + 1`, the MDL step bound.
pub fn mdl_step_bound(omega: f64, lipschitz: f64, gamma: f64, epsilon: f64) -> f64 {
    let g2 = gamma * gamma;
    2.0 * (omega * lipschitz).powi(2) / (g2 * g2 * (1.0 - g2) * epsilon * epsilon) + 1.0
}

/// `(1+2γ²)/(γ²[1−(γ+(1−γ)θ)²])`; the `(1+γ²)` numerator that also circulates
/// is smaller, so this one is the safe choice.
pub fn nerml_constant(gamma: f64, theta: f64) -> f64 {
    let q = gamma + (1.0 - gamma) * theta;
    (1.0 + 2.0 * gamma * gamma) / (gamma * gamma * (1.0 - q * q))
}

/// `C(γ,θ) Ω²L²/ε²`, the NERML step bound.
pub fn nerml_step_bound(omega: f64, lipschitz: f64, gamma: f64, theta: f64, epsilon: f64) -> f64 {
    nerml_constant(gamma, theta) * (omega * lipschitz / epsilon).powi(2)
}
