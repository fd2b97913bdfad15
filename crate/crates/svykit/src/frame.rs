//! Population frame, realized samples and design distributions.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::io::Read;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Unit {
    pub id: String,
    pub mos: f64,
    pub stratum: Option<String>,
    pub cluster: Option<String>,
    pub aux: Vec<f64>,
    pub y: Option<Vec<f64>>,
}

impl Unit {
    pub fn new(id: impl Into<String>) -> Self {
        Unit { id: id.into(), mos: 1.0, stratum: None, cluster: None, aux: Vec::new(), y: None }
    }
}

/// The population register. Units are addressed by their position in frame
/// order; ids are opaque labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    units: Vec<Unit>,
}

impl Frame {
    pub fn new(units: Vec<Unit>) -> Result<Frame> {
        let mut seen = HashMap::new();
        let k = units.first().map_or(0, |u| u.aux.len());
        let ny = units.iter().find_map(|u| u.y.as_ref().map(|y| y.len()));
        let mut cluster_home: HashMap<&str, Option<&str>> = HashMap::new();
        for (i, u) in units.iter().enumerate() {
            if seen.insert(u.id.as_str(), i).is_some() {
                return Err(Error::Data(format!("duplicate unit id {:?}", u.id)));
            }
            if !(u.mos >= 0.0) || !u.mos.is_finite() {
                return Err(Error::Data(format!("unit {:?}: mos must be finite and nonnegative", u.id)));
            }
            if u.aux.len() != k {
                return Err(Error::Data(format!("unit {:?}: expected {k} auxiliary values", u.id)));
            }
            if let (Some(n), Some(y)) = (ny, &u.y) {
                if y.len() != n {
                    return Err(Error::Data(format!("unit {:?}: expected {n} study values", u.id)));
                }
            }
            if let Some(c) = &u.cluster {
                let s = u.stratum.as_deref();
                if let Some(prev) = cluster_home.insert(c.as_str(), s) {
                    if prev != s {
                        return Err(Error::Data(format!("cluster {c:?} spans more than one stratum")));
                    }
                }
            }
        }
        Ok(Frame { units })
    }

    /// Units "1".."N" with unit mos.
    pub fn sequential(n: usize) -> Frame {
        Frame { units: (1..=n).map(|i| Unit::new(i.to_string())).collect() }
    }

    pub fn from_mos(mos: &[f64]) -> Result<Frame> {
        let mut f = Frame::sequential(mos.len());
        for (u, &m) in f.units.iter_mut().zip(mos) {
            u.mos = m;
        }
        Frame::new(f.units)
    }

    pub fn with_y(mut self, y: &[f64]) -> Result<Frame> {
        if y.len() != self.len() {
            return Err(Error::Data("y length differs from frame size".into()));
        }
        for (u, &v) in self.units.iter_mut().zip(y) {
            u.y = Some(vec![v]);
        }
        Ok(self)
    }

    pub fn with_strata(mut self, labels: &[&str]) -> Result<Frame> {
        if labels.len() != self.len() {
            return Err(Error::Data("stratum labels length differs from frame size".into()));
        }
        for (u, l) in self.units.iter_mut().zip(labels) {
            u.stratum = Some(l.to_string());
        }
        Frame::new(self.units)
    }

    pub fn with_clusters(mut self, labels: &[&str]) -> Result<Frame> {
        if labels.len() != self.len() {
            return Err(Error::Data("cluster labels length differs from frame size".into()));
        }
        for (u, l) in self.units.iter_mut().zip(labels) {
            u.cluster = Some(l.to_string());
        }
        Frame::new(self.units)
    }

    pub fn with_aux(mut self, rows: &[Vec<f64>]) -> Result<Frame> {
        if rows.len() != self.len() {
            return Err(Error::Data("aux rows differ from frame size".into()));
        }
        for (u, r) in self.units.iter_mut().zip(rows) {
            u.aux = r.clone();
        }
        Frame::new(self.units)
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn units(&self) -> &[Unit] {
        &self.units
    }

    pub fn unit(&self, i: usize) -> &Unit {
        &self.units[i]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.units.iter().position(|u| u.id == id)
    }

    pub fn mos(&self) -> Vec<f64> {
        self.units.iter().map(|u| u.mos).collect()
    }

    pub fn n_aux(&self) -> usize {
        self.units.first().map_or(0, |u| u.aux.len())
    }

    /// Study variable number `col` for every unit.
    pub fn y(&self, col: usize) -> Result<Vec<f64>> {
        self.units
            .iter()
            .map(|u| {
                u.y.as_ref()
                    .and_then(|y| y.get(col).copied())
                    .ok_or_else(|| Error::Data(format!("unit {:?} has no study value {col}", u.id)))
            })
            .collect()
    }

    pub fn aux_col(&self, col: usize) -> Result<Vec<f64>> {
        self.units
            .iter()
            .map(|u| {
                u.aux
                    .get(col)
                    .copied()
                    .ok_or_else(|| Error::Data(format!("unit {:?} has no x{}", u.id, col + 1)))
            })
            .collect()
    }

    pub fn aux_rows(&self) -> Vec<Vec<f64>> {
        self.units.iter().map(|u| u.aux.clone()).collect()
    }

    /// Strata in label order with their unit indices.
    pub fn strata(&self) -> Result<Vec<(String, Vec<usize>)>> {
        group_by(&self.units, |u| u.stratum.clone(), "stratum")
    }

    /// Clusters in label order with their unit indices.
    pub fn clusters(&self) -> Result<Vec<(String, Vec<usize>)>> {
        group_by(&self.units, |u| u.cluster.clone(), "cluster")
    }

    pub fn subset(&self, idx: &[usize]) -> Frame {
        Frame { units: idx.iter().map(|&i| self.units[i].clone()).collect() }
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Frame> {
        let f = std::fs::File::open(path.as_ref())
            .map_err(|e| Error::Data(format!("{}: {e}", path.as_ref().display())))?;
        Frame::from_csv_reader(f)
    }

    /// Read a frame from CSV. Required column `id`; optional `mos`, `stratum`,
    /// `cluster`, `y` (or `y1..ym`) and `x1..xk`.
    pub fn from_csv_reader<R: Read>(r: R) -> Result<Frame> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let headers = rdr.headers().map_err(|e| Error::Data(e.to_string()))?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let id_c = col("id").ok_or_else(|| Error::Data("missing required column `id`".into()))?;
        let mos_c = col("mos");
        let st_c = col("stratum");
        let cl_c = col("cluster");
        let numbered = |prefix: &str| -> Vec<usize> {
            let mut v: Vec<(usize, usize)> = headers
                .iter()
                .enumerate()
                .filter_map(|(i, h)| {
                    h.strip_prefix(prefix)
                        .and_then(|s| s.parse::<usize>().ok())
                        .map(|k| (k, i))
                })
                .collect();
            v.sort();
            v.into_iter().map(|(_, i)| i).collect()
        };
        let x_cs = numbered("x");
        let y_cs = match col("y") {
            Some(c) => vec![c],
            None => numbered("y"),
        };
        let mut units = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let line = row + 2;
            let rec = rec.map_err(|e| Error::Data(format!("row {line}: {e}")))?;
            let num = |c: usize| -> Result<f64> {
                let s = rec.get(c).unwrap_or("");
                s.parse::<f64>().map_err(|_| {
                    Error::Data(format!("row {line}, column `{}`: {s:?} is not a number", &headers[c]))
                })
            };
            let opt = |c: Option<usize>| c.and_then(|c| rec.get(c)).filter(|s| !s.is_empty()).map(str::to_string);
            let mut u = Unit::new(rec.get(id_c).unwrap_or(""));
            if let Some(c) = mos_c {
                u.mos = num(c)?;
            }
            u.stratum = opt(st_c);
            u.cluster = opt(cl_c);
            u.aux = x_cs.iter().map(|&c| num(c)).collect::<Result<_>>()?;
            if !y_cs.is_empty() {
                let blank = y_cs.iter().all(|&c| rec.get(c).unwrap_or("").is_empty());
                if !blank {
                    u.y = Some(y_cs.iter().map(|&c| num(c)).collect::<Result<_>>()?);
                }
            }
            units.push(u);
        }
        Frame::new(units)
    }
}

fn group_by(
    units: &[Unit],
    key: impl Fn(&Unit) -> Option<String>,
    what: &str,
) -> Result<Vec<(String, Vec<usize>)>> {
    let mut m: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, u) in units.iter().enumerate() {
        let k = key(u).ok_or_else(|| Error::Data(format!("unit {:?} has no {what} label", u.id)))?;
        m.entry(k).or_default().push(i);
    }
    Ok(m.into_iter().collect())
}

/// First-order and (optionally) joint inclusion probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InclusionProbs {
    pub first_order: Vec<f64>,
    pub joint: Option<Vec<Vec<f64>>>,
    /// False when some joint probability is zero (systematic designs).
    pub measurable: bool,
}

impl InclusionProbs {
    pub fn first(pi: Vec<f64>) -> Self {
        InclusionProbs { first_order: pi, joint: None, measurable: true }
    }

    pub fn with_joint(pi: Vec<f64>, joint: Vec<Vec<f64>>) -> Self {
        let measurable = joint.iter().all(|r| r.iter().all(|&p| p > 0.0));
        InclusionProbs { first_order: pi, joint: Some(joint), measurable }
    }

    pub fn expected_size(&self) -> f64 {
        self.first_order.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub unit: usize,
    pub multiplicity: u32,
    /// Inclusion probability (expected hits `n·p` for with-replacement draws).
    pub pi: f64,
    /// Per-draw selection probability for with-replacement designs.
    pub draw_prob: Option<f64>,
    /// First-stage or first-phase probability for nested designs.
    pub stage1_pi: Option<f64>,
    /// Second-stage or second-phase conditional probability.
    pub conditional_pi: Option<f64>,
    /// Index into `Frame::strata()`.
    pub stratum: Option<usize>,
    /// Index into `Frame::clusters()`.
    pub psu: Option<usize>,
}

impl Selection {
    pub fn new(unit: usize, pi: f64) -> Self {
        Selection {
            unit,
            multiplicity: 1,
            pi,
            draw_prob: None,
            stage1_pi: None,
            conditional_pi: None,
            stratum: None,
            psu: None,
        }
    }

    pub fn weight(&self) -> f64 {
        self.multiplicity as f64 / self.pi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub selections: Vec<Selection>,
    pub design_tag: String,
    pub with_replacement: bool,
    /// Phase-one sample for two-phase designs.
    pub phase1: Option<Vec<Selection>>,
    pub flags: Vec<String>,
}

impl Sample {
    pub fn new(tag: impl Into<String>, selections: Vec<Selection>) -> Self {
        Sample { selections, design_tag: tag.into(), with_replacement: false, phase1: None, flags: Vec::new() }
    }

    /// Build a without-replacement sample from unit indices and their π.
    pub fn from_units(tag: impl Into<String>, units: &[usize], pi: &[f64]) -> Self {
        Sample::new(tag, units.iter().map(|&u| Selection::new(u, pi[u])).collect())
    }

    pub fn len(&self) -> usize {
        self.selections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selections.is_empty()
    }

    /// Number of draws (sum of multiplicities).
    pub fn draws(&self) -> usize {
        self.selections.iter().map(|s| s.multiplicity as usize).sum()
    }

    pub fn units(&self) -> Vec<usize> {
        self.selections.iter().map(|s| s.unit).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.selections.iter().map(Selection::weight).collect()
    }

    pub fn pis(&self) -> Vec<f64> {
        self.selections.iter().map(|s| s.pi).collect()
    }

    /// Gather a frame column onto the sample.
    pub fn gather(&self, column: &[f64]) -> Vec<f64> {
        self.selections.iter().map(|s| column[s.unit]).collect()
    }

    pub fn check(&self) -> Result<()> {
        for s in &self.selections {
            if !(s.pi > 0.0 && s.pi <= 1.0 + 1e-12) && !self.with_replacement {
                return Err(Error::Data(format!("unit index {} has pi {} outside (0,1]", s.unit, s.pi)));
            }
            if !self.with_replacement && s.multiplicity != 1 {
                return Err(Error::Data("multiplicity above 1 in a without-replacement sample".into()));
            }
        }
        Ok(())
    }
}

/// Exact sampling distribution: index sets with their probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignDistribution {
    pub support: Vec<(Vec<usize>, f64)>,
}

impl DesignDistribution {
    /// Validate, merge duplicates and sort by index set (frame order).
    pub fn new(mut support: Vec<(Vec<usize>, f64)>, n_units: usize) -> Result<Self> {
        for (s, p) in support.iter_mut() {
            s.sort_unstable();
            if s.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Input("sample set lists a unit twice".into()));
            }
            if s.iter().any(|&i| i >= n_units) {
                return Err(Error::Input("sample set refers to a unit outside the frame".into()));
            }
            if !(*p >= 0.0 && *p <= 1.0 + 1e-12) {
                return Err(Error::Input(format!("probability {p} outside [0,1]")));
            }
        }
        support.sort_by(|a, b| a.0.cmp(&b.0));
        let mut merged: Vec<(Vec<usize>, f64)> = Vec::with_capacity(support.len());
        for (s, p) in support {
            match merged.last_mut() {
                Some(last) if last.0 == s => last.1 += p,
                _ => merged.push((s, p)),
            }
        }
        merged.retain(|(_, p)| *p > 0.0);
        let total: f64 = merged.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Input(format!("probabilities sum to {total}, not 1")));
        }
        Ok(DesignDistribution { support: merged })
    }

    pub fn first_order(&self, n_units: usize) -> Vec<f64> {
        let mut pi = vec![0.0; n_units];
        for (s, p) in &self.support {
            for &i in s {
                pi[i] += p;
            }
        }
        pi
    }

    pub fn joint(&self, n_units: usize) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; n_units]; n_units];
        for (s, p) in &self.support {
            for &i in s {
                for &j in s {
                    m[i][j] += p;
                }
            }
        }
        m
    }

    /// Mean and variance of a statistic over the support.
    pub fn moments(&self, mut stat: impl FnMut(&[usize]) -> f64) -> (f64, f64) {
        let vals: Vec<(f64, f64)> = self.support.iter().map(|(s, p)| (stat(s), *p)).collect();
        let mean: f64 = vals.iter().map(|(v, p)| v * p).sum();
        let var: f64 = vals.iter().map(|(v, p)| p * (v - mean).powi(2)).sum();
        (mean, var)
    }
}
