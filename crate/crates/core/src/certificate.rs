//! Execution protocols, accuracy certificates and the online gap trace.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, Mat};
use crate::prox::ProximalSetup;

/// A point of the primal domain, dense or as a weighted sum of rank-one terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PrimalPoint {
    Dense(Mat),
    Factored {
        rows: usize,
        cols: usize,
        terms: Vec<RankOne>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankOne {
    pub weight: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl PrimalPoint {
    pub fn rank_one(weight: f64, u: Vec<f64>, v: Vec<f64>) -> Self {
        PrimalPoint::Factored {
            rows: u.len(),
            cols: v.len(),
            terms: vec![RankOne { weight, u, v }],
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            PrimalPoint::Dense(m) => (m.rows, m.cols),
            PrimalPoint::Factored { rows, cols, .. } => (*rows, *cols),
        }
    }

    /// Number of rank-one terms; `None` when dense.
    pub fn num_terms(&self) -> Option<usize> {
        match self {
            PrimalPoint::Dense(_) => None,
            PrimalPoint::Factored { terms, .. } => Some(terms.len()),
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match self {
            PrimalPoint::Dense(m) => m.get(i, j),
            PrimalPoint::Factored { terms, .. } => {
                terms.iter().map(|t| t.weight * t.u[i] * t.v[j]).sum()
            }
        }
    }

    pub fn to_dense(&self) -> Mat {
        match self {
            PrimalPoint::Dense(m) => m.clone(),
            PrimalPoint::Factored { rows, cols, terms } => {
                let mut m = Mat::zeros(*rows, *cols);
                for t in terms {
                    for i in 0..*rows {
                        let a = t.weight * t.u[i];
                        if a == 0.0 {
                            continue;
                        }
                        let row = &mut m.data[i * cols..(i + 1) * cols];
                        axpy(a, &t.v, row);
                    }
                }
                m
            }
        }
    }

    /// Frobenius inner product `⟨x, m⟩`.
    pub fn frob_dot(&self, m: &Mat) -> f64 {
        match self {
            PrimalPoint::Dense(x) => x.frob_dot(m),
            PrimalPoint::Factored { terms, .. } => terms
                .iter()
                .map(|t| t.weight * dot(&t.u, &m.matvec(&t.v)))
                .sum(),
        }
    }

    /// `Σ_k w_k x_k`; stays factored while that is the cheaper representation.
    pub fn combine(weights: &[f64], points: &[&PrimalPoint]) -> Result<PrimalPoint> {
        if weights.len() != points.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                found: weights.len(),
            });
        }
        let first = points.first().ok_or(Error::EmptyProtocol)?;
        let (rows, cols) = first.shape();
        for p in points {
            if p.shape() != (rows, cols) {
                return Err(Error::DimensionMismatch {
                    expected: rows * cols,
                    found: p.shape().0 * p.shape().1,
                });
            }
        }
        let all_factored = points.iter().all(|p| p.num_terms().is_some());
        let total_terms: usize = points.iter().filter_map(|p| p.num_terms()).sum();
        if all_factored && total_terms * (rows + cols) <= rows * cols {
            let mut terms = Vec::with_capacity(total_terms);
            for (w, p) in weights.iter().zip(points) {
                if *w == 0.0 {
                    continue;
                }
                if let PrimalPoint::Factored { terms: ts, .. } = p {
                    terms.extend(ts.iter().map(|t| RankOne {
                        weight: w * t.weight,
                        u: t.u.clone(),
                        v: t.v.clone(),
                    }));
                }
            }
            return Ok(PrimalPoint::Factored { rows, cols, terms });
        }
        let mut out = Mat::zeros(rows, cols);
        for (w, p) in weights.iter().zip(points) {
            if *w == 0.0 {
                continue;
            }
            match p {
                PrimalPoint::Dense(m) => axpy(*w, &m.data, &mut out.data),
                PrimalPoint::Factored { terms, .. } => {
                    for t in terms {
                        for i in 0..rows {
                            let a = w * t.weight * t.u[i];
                            if a != 0.0 {
                                axpy(a, &t.v, &mut out.data[i * cols..(i + 1) * cols]);
                            }
                        }
                    }
                }
            }
        }
        Ok(PrimalPoint::Dense(out))
    }
}

/// One oracle call of a first-order run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolStep {
    pub y: Vec<f64>,
    pub g: Vec<f64>,
    pub x: Option<PrimalPoint>,
    pub g_dual_norm: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExecutionProtocol {
    pub steps: Vec<ProtocolStep>,
}

impl ExecutionProtocol {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Appends a step after checking that `y` lies in `Y`.
    pub fn push(&mut self, setup: &ProximalSetup, step: ProtocolStep) -> Result<()> {
        if step.y.len() != setup.dim() || step.g.len() != setup.dim() {
            return Err(Error::DimensionMismatch {
                expected: setup.dim(),
                found: step.y.len().max(step.g.len()),
            });
        }
        if !setup.contains(&step.y) {
            return Err(Error::Infeasible {
                domain: "dual domain",
                violation: setup.violation(&step.y),
            });
        }
        self.steps.push(step);
        Ok(())
    }

    /// Largest declared oracle inaccuracy among steps with positive weight.
    pub fn max_delta(&self, cert: &AccuracyCertificate) -> f64 {
        self.steps
            .iter()
            .zip(&cert.weights)
            .filter(|(_, w)| **w > 0.0)
            .fold(0.0, |m, (s, _)| m.max(s.delta))
    }

    /// `h_τ(y) = ⟨g_τ, y_τ − y⟩`.
    pub fn cut_value(&self, tau: usize, y: &[f64]) -> f64 {
        let s = &self.steps[tau];
        dot(&s.g, &s.y) - dot(&s.g, y)
    }
}

/// Simplex weights over the steps of a protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyCertificate {
    pub weights: Vec<f64>,
}

impl AccuracyCertificate {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        let c = AccuracyCertificate { weights };
        c.validate()?;
        Ok(c)
    }

    pub fn one_hot(len: usize, tau: usize) -> Self {
        let mut weights = vec![0.0; len];
        weights[tau] = 1.0;
        AccuracyCertificate { weights }
    }

    /// Normalizes nonnegative weights to sum to one.
    pub fn from_unnormalized(mut weights: Vec<f64>) -> Result<Self> {
        for (i, w) in weights.iter_mut().enumerate() {
            if *w < 0.0 {
                if *w > -1e-14 {
                    *w = 0.0;
                } else {
                    return Err(Error::NegativeMultiplier { index: i, value: *w });
                }
            }
        }
        let s: f64 = weights.iter().sum();
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::InvalidCertificate(format!("weights sum to {s}")));
        }
        for w in weights.iter_mut() {
            *w /= s;
        }
        Self::new(weights)
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.is_empty() {
            return Err(Error::EmptyProtocol);
        }
        for (i, w) in self.weights.iter().enumerate() {
            if !w.is_finite() || *w < 0.0 {
                return Err(Error::NegativeMultiplier { index: i, value: *w });
            }
        }
        let s: f64 = self.weights.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidCertificate(format!(
                "weights sum to {s}, not 1"
            )));
        }
        Ok(())
    }

    /// Zero-pads to a longer protocol.
    pub fn padded(&self, len: usize) -> Self {
        let mut weights = self.weights.clone();
        weights.resize(len, 0.0);
        AccuracyCertificate { weights }
    }
}

fn check_lengths(protocol: &ExecutionProtocol, cert: &AccuracyCertificate) -> Result<()> {
    if protocol.is_empty() {
        return Err(Error::EmptyProtocol);
    }
    if cert.weights.len() != protocol.len() {
        return Err(Error::DimensionMismatch {
            expected: protocol.len(),
            found: cert.weights.len(),
        });
    }
    cert.validate()
}

/// `ε(y^t, λ^t) = Σ λ_τ ⟨g_τ, y_τ⟩ + max_{y∈Y} ⟨−Σ λ_τ g_τ, y⟩`.
pub fn certificate_resolution(
    protocol: &ExecutionProtocol,
    cert: &AccuracyCertificate,
    setup: &ProximalSetup,
) -> Result<f64> {
    check_lengths(protocol, cert)?;
    let n = setup.dim();
    let mut agg = vec![0.0; n];
    let mut lin = 0.0;
    for (s, w) in protocol.steps.iter().zip(&cert.weights) {
        if *w == 0.0 {
            continue;
        }
        if s.g.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: s.g.len(),
            });
        }
        lin += w * dot(&s.g, &s.y);
        axpy(-w, &s.g, &mut agg);
    }
    let (sup, _) = setup.support(&agg)?;
    Ok(lin + sup)
}

/// `(x̂, ŷ) = (Σ λ_τ x_τ, Σ λ_τ y_τ)`; `x̂` is absent when the protocol carries
/// no primal points.
pub fn recover_primal_dual(
    protocol: &ExecutionProtocol,
    cert: &AccuracyCertificate,
) -> Result<(Option<PrimalPoint>, Vec<f64>)> {
    check_lengths(protocol, cert)?;
    let n = protocol.steps[0].y.len();
    let mut y_hat = vec![0.0; n];
    let mut ws = Vec::new();
    let mut xs = Vec::new();
    let mut have_x = true;
    for (s, w) in protocol.steps.iter().zip(&cert.weights) {
        if *w == 0.0 {
            continue;
        }
        axpy(*w, &s.y, &mut y_hat);
        match &s.x {
            Some(x) => {
                ws.push(*w);
                xs.push(x);
            }
            None => have_x = false,
        }
    }
    let x_hat = if have_x && !xs.is_empty() {
        Some(PrimalPoint::combine(&ws, &xs)?)
    } else {
        None
    };
    Ok((x_hat, y_hat))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapRecord {
    pub step: usize,
    pub epsilon: f64,
    pub gap: f64,
    pub elapsed_sec: f64,
}

/// Running minimum of observed resolutions with the primal-dual pair that
/// attains it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GapTrace {
    pub records: Vec<GapRecord>,
    pub best_primal: Option<PrimalPoint>,
    pub best_dual: Option<Vec<f64>>,
    pub best_step: Option<usize>,
}

impl GapTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn gap(&self) -> f64 {
        self.records.last().map_or(f64::INFINITY, |r| r.gap)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records `ε_τ`; the candidate is built only when it improves the gap.
    pub fn update_with<F>(&mut self, step: usize, epsilon: f64, elapsed_sec: f64, candidate: F) -> Result<bool>
    where
        F: FnOnce() -> Result<(Option<PrimalPoint>, Vec<f64>)>,
    {
        if !epsilon.is_finite() {
            return Err(Error::InvalidCertificate(format!(
                "non-finite resolution at step {step}"
            )));
        }
        let prev = self.gap();
        let improved = epsilon < prev;
        if improved {
            let (x, y) = candidate()?;
            self.best_primal = x;
            self.best_dual = Some(y);
            self.best_step = Some(step);
        }
        self.records.push(GapRecord {
            step,
            epsilon,
            gap: if improved { epsilon } else { prev },
            elapsed_sec,
        });
        Ok(improved)
    }

    pub fn update(
        &mut self,
        step: usize,
        epsilon: f64,
        elapsed_sec: f64,
        candidate: (Option<PrimalPoint>, Vec<f64>),
    ) -> Result<bool> {
        self.update_with(step, epsilon, elapsed_sec, || Ok(candidate))
    }

    pub const CSV_HEADER: &'static str = "step,epsilon,gap,elapsed_sec";

    /// CSV with 17 significant digits so values round-trip exactly.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for r in &self.records {
            s.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e}\n",
                r.step, r.epsilon, r.gap, r.elapsed_sec
            ));
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Vec<GapRecord>> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == Self::CSV_HEADER => {}
            _ => return Err(Error::InvalidInstance("bad trace header".into())),
        }
        let mut out = Vec::new();
        for (k, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            let bad = || Error::InvalidInstance(format!("bad trace row {}", k + 2));
            if f.len() != 4 {
                return Err(bad());
            }
            out.push(GapRecord {
                step: f[0].trim().parse().map_err(|_| bad())?,
                epsilon: f[1].trim().parse().map_err(|_| bad())?,
                gap: f[2].trim().parse().map_err(|_| bad())?,
                elapsed_sec: f[3].trim().parse().map_err(|_| bad())?,
            });
        }
        Ok(out)
    }
}

/// Summary of one solver run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub solver: String,
    pub params: BTreeMap<String, f64>,
    pub seed: u64,
    pub final_gap: f64,
    pub steps: usize,
    pub wall_time: f64,
    pub extra: BTreeMap<String, f64>,
}

/// Wall-clock source for elapsed times; the default reports zero.
pub trait Clock {
    fn elapsed_sec(&self) -> f64;

    /// Called with each new trace record, so callers can stream the trace.
    fn observe(&self, _record: &GapRecord) {}
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn elapsed_sec(&self) -> f64 {
        0.0
    }
}
