//! Sampling designs and the algorithms that draw from them.

pub mod element;
pub mod pips;
mod probs;

pub use element::*;
pub use pips::*;
pub use probs::*;

use crate::error::{input, Error, Result};
use crate::frame::{Frame, Sample, Selection, Unit};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PpsMethod {
    #[default]
    Cumulative,
    Lahiri,
}

/// Declarative sampling design. Unequal-probability variants read the
/// measure of size from the frame (`mos`). PSU designs run on the cluster
/// frame, whose size is the sum of unit sizes in each cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Design {
    Srs {
        n: usize,
        #[serde(default)]
        method: SrsMethod,
    },
    Srswr {
        n: usize,
    },
    Bernoulli {
        pi: f64,
    },
    Poisson {
        pi: Vec<f64>,
    },
    Systematic {
        n: usize,
    },
    SystematicPips {
        n: usize,
    },
    PpsWr {
        n: usize,
        #[serde(default)]
        method: PpsMethod,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bound: Option<f64>,
    },
    Brewer2 {},
    Durbin2 {},
    Chao {
        n: usize,
    },
    RejectivePoisson {
        n: usize,
        /// Working probabilities; when absent they are solved so that the
        /// conditional marginals match the πps probabilities.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        working: Option<Vec<f64>>,
    },
    Stratified {
        strata: BTreeMap<String, Design>,
    },
    OneStageCluster {
        psu: Box<Design>,
    },
    TwoStage {
        psu: Box<Design>,
        ssu: Box<Design>,
    },
    TwoPhase {
        phase1: Box<Design>,
        phase2: Phase2Rule,
    },
    /// A design given by its support over frame positions.
    Explicit {
        support: Vec<(Vec<usize>, f64)>,
    },
}

/// Second-phase selection rules. They see phase-one observations (stratum
/// labels and auxiliaries of the phase-one units).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Phase2Rule {
    All,
    /// SRS of `round(ν_h n_h)` (at least one) within each observed stratum.
    StratifiedRate { rates: BTreeMap<String, f64> },
    /// SRS of fixed size `r_h` within each observed stratum.
    StratifiedSize { sizes: BTreeMap<String, usize> },
    Bernoulli { rate: f64 },
    /// Poisson with π_{2i|1} = min(1, expected · x_i / Σ_{A1} x).
    PoissonPps { aux: usize, expected: f64 },
}

impl Design {
    pub fn tag(&self) -> &'static str {
        match self {
            Design::Srs { .. } => "srs",
            Design::Srswr { .. } => "srswr",
            Design::Bernoulli { .. } => "bernoulli",
            Design::Poisson { .. } => "poisson",
            Design::Systematic { .. } => "systematic",
            Design::SystematicPips { .. } => "systematic_pips",
            Design::PpsWr { .. } => "pps_wr",
            Design::Brewer2 {} => "brewer2",
            Design::Durbin2 {} => "durbin2",
            Design::Chao { .. } => "chao",
            Design::RejectivePoisson { .. } => "rejective_poisson",
            Design::Stratified { .. } => "stratified",
            Design::OneStageCluster { .. } => "one_stage_cluster",
            Design::TwoStage { .. } => "two_stage",
            Design::TwoPhase { .. } => "two_phase",
            Design::Explicit { .. } => "explicit",
        }
    }

    pub fn with_replacement(&self) -> bool {
        matches!(self, Design::Srswr { .. } | Design::PpsWr { .. })
    }

    /// Structural checks on nesting.
    pub fn validate(&self) -> Result<()> {
        self.validate_at(Level::Top)
    }

    fn validate_at(&self, level: Level) -> Result<()> {
        let bad = |what: &str| input(format!("{} design not allowed {what}", self.tag()));
        match self {
            Design::TwoPhase { phase1, phase2 } => {
                if level != Level::Top {
                    return bad("below the top level");
                }
                if phase1.with_replacement() {
                    return input("phase-one design must be without replacement");
                }
                if let Phase2Rule::Bernoulli { rate } = phase2 {
                    if !(*rate > 0.0 && *rate <= 1.0) {
                        return input("phase-two rate must be in (0,1]");
                    }
                }
                phase1.validate_at(Level::Nested)
            }
            Design::Stratified { strata } => {
                if level == Level::Element {
                    return bad("as a second-stage design");
                }
                if strata.is_empty() {
                    return input("stratified design without strata");
                }
                strata.values().try_for_each(|d| d.validate_at(Level::Nested))
            }
            Design::OneStageCluster { psu } => {
                if level == Level::Element || level == Level::Psu {
                    return bad("inside a clustered design");
                }
                psu.validate_at(Level::Psu)
            }
            Design::TwoStage { psu, ssu } => {
                if level == Level::Element || level == Level::Psu {
                    return bad("inside a clustered design");
                }
                psu.validate_at(Level::Psu)?;
                if ssu.with_replacement() {
                    return input("second-stage design must be without replacement");
                }
                ssu.validate_at(Level::Element)
            }
            Design::Poisson { .. } | Design::Explicit { .. } if level == Level::Element => {
                bad("as a second-stage design (sizes differ across clusters)")
            }
            Design::PpsWr { .. } | Design::Srswr { .. } if level == Level::Psu => {
                bad("for primary units; use a without-replacement πps scheme")
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Level {
    Top,
    Nested,
    Psu,
    Element,
}

/// Cluster-level frame: one unit per cluster, size = total size of members.
pub fn cluster_frame(frame: &Frame) -> Result<(Frame, Vec<Vec<usize>>)> {
    let groups = frame.clusters()?;
    let mut units = Vec::with_capacity(groups.len());
    let mut members = Vec::with_capacity(groups.len());
    for (label, idx) in groups {
        let mut u = Unit::new(label);
        u.mos = idx.iter().map(|&i| frame.unit(i).mos).sum();
        u.stratum = frame.unit(idx[0]).stratum.clone();
        units.push(u);
        members.push(idx);
    }
    Ok((Frame::new(units)?, members))
}

/// Draw a sample from `design` on `frame`.
pub fn draw<R: Rng + ?Sized>(design: &Design, frame: &Frame, rng: &mut R) -> Result<Sample> {
    design.validate()?;
    let all: Vec<usize> = (0..frame.len()).collect();
    let mut sample = match design {
        Design::TwoPhase { phase1, phase2 } => draw_two_phase(phase1, phase2, frame, rng)?,
        _ => {
            let sel = draw_on(design, frame, &all, rng)?;
            let mut s = Sample::new(design.tag(), sel);
            s.with_replacement = design.with_replacement();
            s
        }
    };
    sample.design_tag = design.tag().to_string();
    if let Design::RejectivePoisson { working: Some(_), .. } = design {
        sample.flags.push("rejective: pi are conditional-Poisson marginals, not the working probabilities".into());
    }
    Ok(sample)
}

pub(crate) fn hits_to_selections(idx: &[usize], hits: Vec<(usize, u32)>, p: &[f64], n: usize) -> Vec<Selection> {
    hits.into_iter()
        .map(|(k, h)| {
            let mut s = Selection::new(idx[k], n as f64 * p[k]);
            s.multiplicity = h;
            s.draw_prob = Some(p[k]);
            s
        })
        .collect()
}

/// Draw on the sub-frame `idx`. Returned selections refer to global positions.
pub(crate) fn draw_on<R: Rng + ?Sized>(
    design: &Design,
    frame: &Frame,
    idx: &[usize],
    rng: &mut R,
) -> Result<Vec<Selection>> {
    let m = idx.len();
    let mos: Vec<f64> = idx.iter().map(|&i| frame.unit(i).mos).collect();
    let local = |pos: Vec<usize>, pi: &[f64]| -> Vec<Selection> {
        pos.into_iter().map(|k| Selection::new(idx[k], pi[k])).collect()
    };
    let sel = match design {
        Design::Srs { n, method } => {
            let pi = vec![*n as f64 / m as f64; m];
            local(select_srs(m, *n, *method, rng)?, &pi)
        }
        Design::Srswr { n } => {
            let p = vec![1.0 / m as f64; m];
            hits_to_selections(idx, select_srswr(m, *n, rng)?, &p, *n)
        }
        Design::Bernoulli { pi } => local(select_bernoulli(m, *pi, rng)?, &vec![*pi; m]),
        Design::Poisson { pi } => {
            if pi.len() != m {
                return input(format!("Poisson design lists {} probabilities for {m} units", pi.len()));
            }
            local(select_poisson(pi, rng)?, pi)
        }
        Design::Systematic { n } => {
            let (g, _) = systematic_interval(m, *n)?;
            local(select_systematic(m, *n, rng)?, &vec![1.0 / g as f64; m])
        }
        Design::PpsWr { n, method, bound } => {
            let total: f64 = mos.iter().sum();
            let p: Vec<f64> = mos.iter().map(|x| x / total).collect();
            let hits = match method {
                PpsMethod::Cumulative => select_pps_wr_cumulative(&mos, *n, rng)?,
                PpsMethod::Lahiri => {
                    let b = bound.unwrap_or_else(|| default_lahiri_bound(&mos));
                    select_pps_wr_lahiri(&mos, *n, b, rng)?
                }
            };
            hits_to_selections(idx, hits, &p, *n)
        }
        Design::SystematicPips { n } => with_certainty(&mos, *n, |pi| select_systematic_pips(pi, rng), idx)?,
        Design::Brewer2 {} => {
            let pi = compute_pips(&mos, 2)?;
            local(select_brewer2(&pi, rng)?, &pi)
        }
        Design::Durbin2 {} => {
            let pi = compute_pips(&mos, 2)?;
            local(select_durbin2(&pi, rng)?, &pi)
        }
        Design::Chao { n } => {
            let pi = chao_pips(&mos, *n)?;
            local(select_chao(&mos, *n, rng)?, &pi)
        }
        Design::RejectivePoisson { n, working } => match working {
            Some(w) => {
                if w.len() != m {
                    return input("working probabilities do not match the frame size");
                }
                let pi = rejective_pips(w, *n)?;
                local(select_rejective(w, *n, rng)?, &pi)
            }
            None => with_certainty(
                &mos,
                *n,
                |pi| {
                    let n_r = pi.iter().sum::<f64>().round() as usize;
                    let w = rejective_working(pi, n_r)?;
                    select_rejective(&w, n_r, rng)
                },
                idx,
            )?,
        },
        Design::Stratified { strata } => {
            let sub = frame.subset(idx);
            let groups = sub.strata()?;
            let all_strata = frame.strata()?;
            let mut out = Vec::new();
            for (label, members) in &groups {
                let child = strata
                    .get(label)
                    .ok_or_else(|| Error::Input(format!("stratum {label:?} has no design")))?;
                let global: Vec<usize> = members.iter().map(|&k| idx[k]).collect();
                let h = all_strata.iter().position(|(l, _)| l == label).unwrap();
                for mut s in draw_on(child, frame, &global, rng)? {
                    s.stratum = Some(h);
                    out.push(s);
                }
            }
            if let Some(extra) = strata.keys().find(|k| !groups.iter().any(|(l, _)| l == *k)) {
                return input(format!("design names stratum {extra:?} absent from the frame"));
            }
            out
        }
        Design::OneStageCluster { psu } => {
            draw_clustered(psu, None, frame, idx, rng)?
        }
        Design::TwoStage { psu, ssu } => draw_clustered(psu, Some(ssu), frame, idx, rng)?,
        Design::TwoPhase { .. } => return input("two-phase design must be at the top level"),
        Design::Explicit { support } => {
            let dist = crate::frame::DesignDistribution::new(support.clone(), m)?;
            let pi = dist.first_order(m);
            let u = crate::rng::unif_oc(rng);
            let mut acc = 0.0;
            let mut chosen = &dist.support.last().unwrap().0;
            for (s, p) in &dist.support {
                acc += p;
                if u <= acc {
                    chosen = s;
                    break;
                }
            }
            local(chosen.clone(), &pi)
        }
    };
    Ok(sel)
}

/// Emit certainty units, then run `f` on the remaining π.
fn with_certainty(
    mos: &[f64],
    n: usize,
    mut f: impl FnMut(&[f64]) -> Result<Vec<usize>>,
    idx: &[usize],
) -> Result<Vec<Selection>> {
    let pi = compute_pips(mos, n)?;
    let (certain, rest) = split_certain(&pi);
    let mut out: Vec<Selection> = certain.iter().map(|&k| Selection::new(idx[k], 1.0)).collect();
    if certain.len() < n {
        let rpi: Vec<f64> = rest.iter().map(|&k| pi[k]).collect();
        for k in f(&rpi)? {
            out.push(Selection::new(idx[rest[k]], pi[rest[k]]));
        }
    }
    out.sort_by_key(|s| s.unit);
    Ok(out)
}

fn draw_clustered<R: Rng + ?Sized>(
    psu: &Design,
    ssu: Option<&Design>,
    frame: &Frame,
    idx: &[usize],
    rng: &mut R,
) -> Result<Vec<Selection>> {
    let (cframe, members) = cluster_frame(frame)?;
    let all_clusters = frame.clusters()?;
    // clusters present in this sub-frame
    let in_sub: Vec<usize> = (0..cframe.len())
        .filter(|&c| members[c].iter().any(|u| idx.contains(u)))
        .collect();
    let first = draw_on(psu, &cframe, &in_sub, rng)?;
    let mut out = Vec::new();
    for c in first {
        let units: Vec<usize> = members[c.unit].iter().copied().filter(|u| idx.contains(u)).collect();
        let psu_idx = all_clusters.iter().position(|(l, _)| *l == cframe.unit(c.unit).id).unwrap();
        let second = match ssu {
            None => units.iter().map(|&u| Selection::new(u, 1.0)).collect(),
            Some(d) => draw_on(d, frame, &units, rng)?,
        };
        for s in second {
            let mut t = Selection::new(s.unit, c.pi * s.pi);
            t.stage1_pi = Some(c.pi);
            t.conditional_pi = Some(s.pi);
            t.psu = Some(psu_idx);
            out.push(t);
        }
    }
    Ok(out)
}

fn draw_two_phase<R: Rng + ?Sized>(
    phase1: &Design,
    rule: &Phase2Rule,
    frame: &Frame,
    rng: &mut R,
) -> Result<Sample> {
    let all: Vec<usize> = (0..frame.len()).collect();
    let a1 = draw_on(phase1, frame, &all, rng)?;
    let cond = phase2_select(rule, frame, &a1, rng)?;
    let mut a2 = Vec::new();
    for (s, p2) in &cond {
        let mut t = s.clone();
        t.stage1_pi = Some(s.pi);
        t.conditional_pi = Some(*p2);
        t.pi = s.pi * p2;
        a2.push(t);
    }
    let mut sample = Sample::new("two_phase", a2);
    sample.phase1 = Some(a1);
    if matches!(rule, Phase2Rule::Bernoulli { .. } | Phase2Rule::PoissonPps { .. }) {
        sample.flags.push("phase2_poisson".into());
    }
    Ok(sample)
}

/// Phase-two selections with their conditional probabilities.
pub fn phase2_select<R: Rng + ?Sized>(
    rule: &Phase2Rule,
    frame: &Frame,
    a1: &[Selection],
    rng: &mut R,
) -> Result<Vec<(Selection, f64)>> {
    let mut out = Vec::new();
    match rule {
        Phase2Rule::All => out.extend(a1.iter().map(|s| (s.clone(), 1.0))),
        Phase2Rule::StratifiedRate { .. } | Phase2Rule::StratifiedSize { .. } => {
            let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
            for (k, s) in a1.iter().enumerate() {
                let label = frame
                    .unit(s.unit)
                    .stratum
                    .clone()
                    .ok_or_else(|| Error::Data(format!("unit {:?} has no stratum label", frame.unit(s.unit).id)))?;
                groups.entry(label).or_default().push(k);
            }
            let strata = frame.strata()?;
            for (label, ks) in groups {
                let nh = ks.len();
                let rh = match rule {
                    Phase2Rule::StratifiedRate { rates } => {
                        let nu = *rates
                            .get(&label)
                            .ok_or_else(|| Error::Input(format!("no phase-two rate for stratum {label:?}")))?;
                        if !(nu > 0.0 && nu <= 1.0) {
                            return input(format!("phase-two rate {nu} for stratum {label:?} outside (0,1]"));
                        }
                        ((nu * nh as f64).round() as usize).clamp(1, nh)
                    }
                    Phase2Rule::StratifiedSize { sizes } => {
                        let r = *sizes
                            .get(&label)
                            .ok_or_else(|| Error::Input(format!("no phase-two size for stratum {label:?}")))?;
                        if r > nh {
                            return input(format!("phase-two size {r} exceeds {nh} phase-one units in stratum {label:?}"));
                        }
                        r
                    }
                    _ => unreachable!(),
                };
                if rh == 0 {
                    continue;
                }
                let h = strata.iter().position(|(l, _)| *l == label);
                for pos in select_srs(nh, rh, SrsMethod::DrawByDraw, rng)? {
                    let mut s = a1[ks[pos]].clone();
                    s.stratum = h;
                    out.push((s, rh as f64 / nh as f64));
                }
            }
            out.sort_by_key(|(s, _)| s.unit);
        }
        Phase2Rule::Bernoulli { rate } => {
            for s in a1 {
                if crate::rng::unif(rng) < *rate {
                    out.push((s.clone(), *rate));
                }
            }
        }
        Phase2Rule::PoissonPps { aux, expected } => {
            let x: Vec<f64> = a1
                .iter()
                .map(|s| {
                    frame.unit(s.unit).aux.get(*aux).copied().ok_or_else(|| Error::Data(format!("missing x{}", aux + 1)))
                })
                .collect::<Result<_>>()?;
            let total: f64 = x.iter().sum();
            if x.iter().any(|&v| !(v > 0.0)) {
                return input("phase-two sizes must be positive");
            }
            for (s, xi) in a1.iter().zip(&x) {
                let p = (expected * xi / total).min(1.0);
                if crate::rng::unif(rng) < p {
                    out.push((s.clone(), p));
                }
            }
        }
    }
    Ok(out)
}
