//! Instance files: one JSON header line, then little-endian `f64` payloads,
//! each matrix stored column-major. Integer data (cells, labels) is stored
//! as `f64` payloads too; all values involved are exact in double precision.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use dualcert::apps::{
    build_mc_dual, build_multiclass, build_psd_completion, build_svm, gen_mc, normalize_spectral, random_multiclass,
    random_psd_completion, random_svm, McInstance, MulticlassInstance, PsdCompletionInstance, PsdDgf, SvmInstance,
};
use dualcert::duality::FenchelProblem;
use dualcert::linalg::Mat;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};

pub const FORMAT: &str = "dualcert-instance";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayloadInfo {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub format: String,
    pub version: u32,
    pub app: String,
    pub seed: Option<u64>,
    pub params: BTreeMap<String, Value>,
    pub payloads: Vec<PayloadInfo>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Instance {
    Mc(McInstance),
    Psd { inst: PsdCompletionInstance, dgf: PsdDgf },
    Svm(SvmInstance),
    Multiclass(MulticlassInstance),
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

/// Random generation request, mirroring the `generate` flags.
#[derive(Debug, Clone, PartialEq)]
pub enum GenSpec {
    Mc { p: usize, r: usize, n: usize, d: usize },
    Psd { p: usize, radius: f64, scale: f64, dgf: PsdDgf },
    Svm { n: usize, p: usize, q: usize, radius: f64 },
    Multiclass { n: usize, classes: usize, q: usize, radius: f64 },
}

pub fn generate(spec: &GenSpec, seed: u64) -> CliResult<(Instance, Option<u64>)> {
    let inst = match *spec {
        GenSpec::Mc { p, r, n, d } => Instance::Mc(gen_mc(p, r, n, d, seed)?),
        GenSpec::Psd { p, radius, scale, dgf } => {
            if p == 0 {
                return Err(bad("p must be positive"));
            }
            Instance::Psd { inst: random_psd_completion(p, radius, scale, seed), dgf }
        }
        GenSpec::Svm { n, p, q, radius } => {
            if n < 2 || p == 0 || q == 0 {
                return Err(bad("svm needs N ≥ 2 and positive p, q"));
            }
            Instance::Svm(random_svm(n, p, q, radius, seed))
        }
        GenSpec::Multiclass { n, classes, q, radius } => {
            if n == 0 || classes < 2 || q == 0 {
                return Err(bad("multiclass needs N ≥ 1, M ≥ 2 and q ≥ 1"));
            }
            Instance::Multiclass(random_multiclass(n, classes, q, radius, seed))
        }
    };
    inst.validate()?;
    Ok((inst, Some(seed)))
}

impl Instance {
    pub fn app(&self) -> &'static str {
        match self {
            Instance::Mc(_) => "mc",
            Instance::Psd { .. } => "psd",
            Instance::Svm(_) => "svm",
            Instance::Multiclass(_) => "multiclass",
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        match self {
            Instance::Mc(m) => m.validate()?,
            Instance::Psd { inst, .. } => inst.validate()?,
            Instance::Svm(s) => s.validate()?,
            Instance::Multiclass(m) => m.validate()?,
        }
        Ok(())
    }

    /// The saddle-point problem; `sparsify` thresholds the PSD oracle input.
    pub fn build(&self, sparsify: Option<f64>) -> CliResult<FenchelProblem> {
        Ok(match self {
            Instance::Mc(m) => build_mc_dual(m)?,
            Instance::Psd { inst, dgf } => build_psd_completion(inst, *dgf, sparsify)?,
            Instance::Svm(s) => build_svm(s)?,
            Instance::Multiclass(m) => build_multiclass(m)?,
        })
    }

    fn params(&self) -> BTreeMap<String, Value> {
        let mut p = BTreeMap::new();
        let mut put = |k: &str, v: Value| {
            p.insert(k.to_string(), v);
        };
        match self {
            Instance::Mc(m) => {
                put("p", m.p.into());
                put("r", m.r.into());
                put("N", m.n.into());
                put("d", m.d.into());
            }
            Instance::Psd { inst, dgf } => {
                put("p", inst.b.rows.into());
                put("R", inst.radius.into());
                put("dgf", dgf_name(*dgf).into());
            }
            Instance::Svm(s) => {
                let (rows, cols) = s.shape();
                put("N", s.z.len().into());
                put("p", rows.into());
                put("q", cols.into());
                put("R", s.radius.into());
            }
            Instance::Multiclass(m) => {
                put("N", m.z.len().into());
                put("M", m.classes.into());
                put("q", m.features().into());
                put("R", m.radius.into());
            }
        }
        p
    }

    fn payloads(&self) -> Vec<(String, Mat)> {
        let column = |v: Vec<f64>| Mat::from_vec(v.len(), 1, v);
        match self {
            Instance::Mc(m) => vec![
                (
                    "cells".into(),
                    Mat::from_fn(m.cells.len(), 2, |i, j| if j == 0 { m.cells[i].0 as f64 } else { m.cells[i].1 as f64 }),
                ),
                ("labels".into(), column(m.labels.iter().map(|l| *l as f64).collect())),
                ("w".into(), column(m.w.clone())),
                ("v".into(), m.v.clone()),
                ("a".into(), m.a.clone()),
            ],
            Instance::Psd { inst, .. } => vec![("b".into(), inst.b.clone())],
            Instance::Svm(s) => {
                let (rows, cols) = s.shape();
                let z = Mat::from_fn(rows, cols * s.z.len(), |i, j| s.z[j / cols].get(i, j % cols));
                vec![("labels".into(), column(s.labels.clone())), ("z".into(), z)]
            }
            Instance::Multiclass(m) => {
                let z = Mat::from_fn(m.features(), m.z.len(), |i, j| m.z[j][i]);
                vec![("labels".into(), column(m.labels.iter().map(|l| *l as f64).collect())), ("z".into(), z)]
            }
        }
    }

    pub fn to_bytes(&self, seed: Option<u64>) -> Vec<u8> {
        let payloads = self.payloads();
        let header = Header {
            format: FORMAT.into(),
            version: VERSION,
            app: self.app().into(),
            seed,
            params: self.params(),
            payloads: payloads
                .iter()
                .map(|(name, m)| PayloadInfo { name: name.clone(), rows: m.rows, cols: m.cols })
                .collect(),
        };
        let mut out = serde_json::to_vec(&header).expect("header serializes");
        out.push(b'\n');
        for (_, m) in &payloads {
            for j in 0..m.cols {
                for i in 0..m.rows {
                    out.extend_from_slice(&m.get(i, j).to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> CliResult<(Header, Instance)> {
        let nl = bytes.iter().position(|b| *b == b'\n').ok_or_else(|| bad("instance file has no header line"))?;
        let header: Header =
            serde_json::from_slice(&bytes[..nl]).map_err(|e| bad(format!("bad instance header: {e}")))?;
        if header.format != FORMAT || header.version != VERSION {
            return Err(bad(format!("unsupported instance format {} v{}", header.format, header.version)));
        }
        let mut body = &bytes[nl + 1..];
        let mut mats: BTreeMap<String, Mat> = BTreeMap::new();
        for p in &header.payloads {
            let len = p.rows * p.cols * 8;
            if body.len() < len {
                return Err(bad(format!("payload {} is truncated", p.name)));
            }
            let mut m = Mat::zeros(p.rows, p.cols);
            for j in 0..p.cols {
                for i in 0..p.rows {
                    let k = (j * p.rows + i) * 8;
                    let v = f64::from_le_bytes(body[k..k + 8].try_into().unwrap());
                    m.set(i, j, v);
                }
            }
            mats.insert(p.name.clone(), m);
            body = &body[len..];
        }
        if !body.is_empty() {
            return Err(bad("trailing bytes after the payloads"));
        }
        let inst = decode(&header, &mut mats)?;
        inst.validate()?;
        Ok((header, inst))
    }

    pub fn write(&self, path: &Path, seed: Option<u64>) -> CliResult<()> {
        fs::write(path, self.to_bytes(seed))?;
        Ok(())
    }

    pub fn read(path: &Path) -> CliResult<(Header, Instance)> {
        let bytes = fs::read(path).map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }
}

pub fn dgf_name(d: PsdDgf) -> &'static str {
    match d {
        PsdDgf::Power => "power",
        PsdDgf::Euclidean => "euclidean",
    }
}

pub fn parse_dgf(s: &str) -> CliResult<PsdDgf> {
    match s {
        "power" => Ok(PsdDgf::Power),
        "euclidean" => Ok(PsdDgf::Euclidean),
        _ => Err(bad(format!("unknown d.g.f. {s:?} (power | euclidean)"))),
    }
}

fn take(mats: &mut BTreeMap<String, Mat>, name: &str) -> CliResult<Mat> {
    mats.remove(name).ok_or_else(|| bad(format!("missing payload {name}")))
}

fn param_usize(h: &Header, key: &str) -> CliResult<usize> {
    h.params
        .get(key)
        .and_then(Value::as_u64)
        .map(|v| v as usize)
        .ok_or_else(|| bad(format!("missing integer parameter {key}")))
}

fn param_f64(h: &Header, key: &str) -> CliResult<f64> {
    h.params.get(key).and_then(Value::as_f64).ok_or_else(|| bad(format!("missing parameter {key}")))
}

fn as_index(v: f64, what: &str) -> CliResult<usize> {
    if v >= 0.0 && v.fract() == 0.0 && v < 1e15 {
        Ok(v as usize)
    } else {
        Err(bad(format!("{what} entry {v} is not an index")))
    }
}

fn decode(h: &Header, mats: &mut BTreeMap<String, Mat>) -> CliResult<Instance> {
    match h.app.as_str() {
        "mc" => {
            let cells = take(mats, "cells")?;
            let labels = take(mats, "labels")?;
            Ok(Instance::Mc(McInstance {
                p: param_usize(h, "p")?,
                r: param_usize(h, "r")?,
                n: param_usize(h, "N")?,
                d: param_usize(h, "d")?,
                cells: (0..cells.rows)
                    .map(|i| Ok((as_index(cells.get(i, 0), "cell")?, as_index(cells.get(i, 1), "cell")?)))
                    .collect::<CliResult<_>>()?,
                labels: labels.data.iter().map(|v| as_index(*v, "label")).collect::<CliResult<_>>()?,
                w: take(mats, "w")?.data,
                v: take(mats, "v")?,
                a: take(mats, "a")?,
                seed: h.seed.unwrap_or(0),
            }))
        }
        "psd" => {
            let dgf = parse_dgf(h.params.get("dgf").and_then(Value::as_str).unwrap_or("power"))?;
            Ok(Instance::Psd {
                inst: PsdCompletionInstance { b: take(mats, "b")?, radius: param_f64(h, "R")? },
                dgf,
            })
        }
        "svm" => {
            let (n, p, q) = (param_usize(h, "N")?, param_usize(h, "p")?, param_usize(h, "q")?);
            let z = take(mats, "z")?;
            if z.rows != p || z.cols != q * n {
                return Err(bad("svm payload z has the wrong shape"));
            }
            Ok(Instance::Svm(SvmInstance {
                z: (0..n).map(|k| Mat::from_fn(p, q, |i, j| z.get(i, k * q + j))).collect(),
                labels: take(mats, "labels")?.data,
                radius: param_f64(h, "R")?,
            }))
        }
        "multiclass" => {
            let z = take(mats, "z")?;
            Ok(Instance::Multiclass(MulticlassInstance {
                z: (0..z.cols).map(|j| (0..z.rows).map(|i| z.get(i, j)).collect()).collect(),
                labels: take(mats, "labels")?.data.iter().map(|v| as_index(*v, "label")).collect::<CliResult<_>>()?,
                classes: param_usize(h, "M")?,
                radius: param_f64(h, "R")?,
            }))
        }
        other => Err(bad(format!("unknown app {other:?}"))),
    }
}

/// SVM examples from CSV rows `label, z_11, …, z_1q, z_21, …, z_pq` (label in
/// {−1, 1}, entries of `z` row-major). Each `z` is scaled to spectral norm at
/// most 1.
pub fn svm_from_csv(path: &Path, p: usize, q: usize, radius: f64) -> CliResult<SvmInstance> {
    let rows = read_rows(path)?;
    let mut z = Vec::new();
    let mut labels = Vec::new();
    for (k, row) in rows.iter().enumerate() {
        if row.len() != 1 + p * q {
            return Err(bad(format!("row {}: expected {} fields, found {}", k + 1, 1 + p * q, row.len())));
        }
        let l = row[0];
        if l != 1.0 && l != -1.0 {
            return Err(bad(format!("row {}: label must be 1 or -1", k + 1)));
        }
        let mut m = Mat::from_vec(p, q, row[1..].to_vec());
        if m.singular_values().first().copied().unwrap_or(0.0) > 1.0 {
            normalize_spectral(&mut m);
        }
        labels.push(l);
        z.push(m);
    }
    let inst = SvmInstance { z, labels, radius };
    inst.validate()?;
    Ok(inst)
}

/// Multi-class examples from CSV rows `class, z_1, …, z_q` with classes in
/// `1..=M`. When some `‖z_j‖₂` exceeds 1, every row is divided by the largest norm.
pub fn multiclass_from_csv(path: &Path, classes: Option<usize>, radius: f64) -> CliResult<MulticlassInstance> {
    let rows = read_rows(path)?;
    let q = rows.first().map(|r| r.len().saturating_sub(1)).unwrap_or(0);
    if q == 0 {
        return Err(bad("no feature columns"));
    }
    let mut z = Vec::new();
    let mut labels = Vec::new();
    for (k, row) in rows.iter().enumerate() {
        if row.len() != q + 1 {
            return Err(bad(format!("row {}: expected {} fields, found {}", k + 1, q + 1, row.len())));
        }
        let c = as_index(row[0], "class")?;
        if c == 0 {
            return Err(bad(format!("row {}: classes are numbered from 1", k + 1)));
        }
        labels.push(c - 1);
        z.push(row[1..].to_vec());
    }
    let max_norm = z.iter().map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt()).fold(0.0, f64::max);
    if max_norm > 1.0 {
        for v in z.iter_mut() {
            v.iter_mut().for_each(|x| *x /= max_norm);
        }
    }
    let classes = classes.unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1));
    let inst = MulticlassInstance { z, labels, classes, radius };
    inst.validate()?;
    Ok(inst)
}

fn read_rows(path: &Path) -> CliResult<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(format!("csv row {}: {e}", k + 1)))?;
        let vals: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        rows.push(vals.map_err(|e| bad(format!("csv row {}: {e}", k + 1)))?);
    }
    if rows.is_empty() {
        return Err(bad("csv has no rows"));
    }
    Ok(rows)
}
