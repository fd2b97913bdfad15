//! Inclusion probabilities and exact design enumeration.

use super::*;
use crate::frame::{DesignDistribution, InclusionProbs};

pub const DEFAULT_SUPPORT_CAP: usize = 1_000_000;

/// Exact support of an enumerable design, sorted by index set in frame order.
pub fn enumerate_design(design: &Design, frame: &Frame) -> Result<DesignDistribution> {
    enumerate_design_capped(design, frame, DEFAULT_SUPPORT_CAP)
}

pub fn enumerate_design_capped(design: &Design, frame: &Frame, cap: usize) -> Result<DesignDistribution> {
    design.validate()?;
    let all: Vec<usize> = (0..frame.len()).collect();
    let support = support_on(design, frame, &all, cap)?;
    DesignDistribution::new(support, frame.len())
}

fn too_large(size: f64, cap: usize) -> Result<()> {
    if size > cap as f64 {
        Err(Error::SupportTooLarge { size, cap })
    } else {
        Ok(())
    }
}

fn support_on(design: &Design, frame: &Frame, idx: &[usize], cap: usize) -> Result<Vec<(Vec<usize>, f64)>> {
    let m = idx.len();
    let mos: Vec<f64> = idx.iter().map(|&i| frame.unit(i).mos).collect();
    let map = |sup: Vec<(Vec<usize>, f64)>| -> Vec<(Vec<usize>, f64)> {
        sup.into_iter().map(|(s, p)| (s.into_iter().map(|k| idx[k]).collect(), p)).collect()
    };
    let out = match design {
        Design::Srs { n, .. } => {
            if *n == 0 || *n > m {
                return input(format!("SRS sample size {n} outside 1..={m}"));
            }
            let count = binom(m, *n);
            too_large(count, cap)?;
            map(combinations(m, *n).into_iter().map(|s| (s, 1.0 / count)).collect())
        }
        Design::Bernoulli { pi } => map(poisson_support(&vec![*pi; m], cap)?),
        Design::Poisson { pi } => {
            if pi.len() != m {
                return input("Poisson probabilities do not match the frame size");
            }
            map(poisson_support(pi, cap)?)
        }
        Design::Systematic { n } => {
            let (g, _) = systematic_interval(m, *n)?;
            too_large(g as f64, cap)?;
            map((1..=g).map(|r| (systematic_from_start(m, g, r), 1.0 / g as f64)).collect())
        }
        Design::SystematicPips { n } => map(certainty_support(&mos, *n, systematic_pips_support)?),
        Design::Brewer2 {} => map(two_draw_support(&compute_pips(&mos, 2)?, false)?),
        Design::Durbin2 {} => map(two_draw_support(&compute_pips(&mos, 2)?, true)?),
        Design::Chao { n } => map(chao_support(&mos, *n, cap)?),
        Design::RejectivePoisson { n, working } => match working {
            Some(w) => map(rejective_support(w, *n, cap)?),
            None => map(certainty_support(&mos, *n, |pi| {
                let n_r = pi.iter().sum::<f64>().round() as usize;
                rejective_support(&rejective_working(pi, n_r)?, n_r, cap)
            })?),
        },
        Design::Stratified { strata } => {
            let sub = frame.subset(idx);
            let mut acc: Vec<(Vec<usize>, f64)> = vec![(Vec::new(), 1.0)];
            for (label, members) in sub.strata()? {
                let child = strata
                    .get(&label)
                    .ok_or_else(|| Error::Input(format!("stratum {label:?} has no design")))?;
                let global: Vec<usize> = members.iter().map(|&k| idx[k]).collect();
                let part = support_on(child, frame, &global, cap)?;
                too_large(acc.len() as f64 * part.len() as f64, cap)?;
                acc = product(&acc, &part);
            }
            acc
        }
        Design::OneStageCluster { psu } => clustered_support(psu, None, frame, idx, cap)?,
        Design::TwoStage { psu, ssu } => clustered_support(psu, Some(ssu), frame, idx, cap)?,
        Design::Explicit { support } => {
            let d = DesignDistribution::new(support.clone(), m)?;
            map(d.support)
        }
        Design::Srswr { .. } | Design::PpsWr { .. } => {
            return Err(Error::NotEnumerable("with-replacement designs have multisets, not sets".into()))
        }
        Design::TwoPhase { .. } => {
            return Err(Error::NotEnumerable("two-phase selection depends on phase-one observations".into()))
        }
    };
    Ok(out)
}

fn product(a: &[(Vec<usize>, f64)], b: &[(Vec<usize>, f64)]) -> Vec<(Vec<usize>, f64)> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for (s, p) in a {
        for (t, q) in b {
            let mut u = s.clone();
            u.extend_from_slice(t);
            out.push((u, p * q));
        }
    }
    out
}

fn poisson_support(pi: &[f64], cap: usize) -> Result<Vec<(Vec<usize>, f64)>> {
    check_probs(pi)?;
    let free: Vec<usize> = (0..pi.len()).filter(|&i| pi[i] < 1.0).collect();
    let sure: Vec<usize> = (0..pi.len()).filter(|&i| pi[i] >= 1.0).collect();
    too_large(2f64.powi(free.len() as i32), cap)?;
    let mut out = Vec::with_capacity(1 << free.len());
    for mask in 0u64..(1u64 << free.len()) {
        let mut s = sure.clone();
        let mut p = 1.0;
        for (b, &i) in free.iter().enumerate() {
            if mask >> b & 1 == 1 {
                s.push(i);
                p *= pi[i];
            } else {
                p *= 1.0 - pi[i];
            }
        }
        s.sort_unstable();
        out.push((s, p));
    }
    Ok(out)
}

fn certainty_support(
    mos: &[f64],
    n: usize,
    f: impl Fn(&[f64]) -> Result<Vec<(Vec<usize>, f64)>>,
) -> Result<Vec<(Vec<usize>, f64)>> {
    let pi = compute_pips(mos, n)?;
    let (certain, rest) = split_certain(&pi);
    if certain.len() == n {
        return Ok(vec![(certain, 1.0)]);
    }
    let rpi: Vec<f64> = rest.iter().map(|&k| pi[k]).collect();
    Ok(f(&rpi)?
        .into_iter()
        .map(|(s, p)| {
            let mut u = certain.clone();
            u.extend(s.into_iter().map(|k| rest[k]));
            (u, p)
        })
        .collect())
}

fn clustered_support(
    psu: &Design,
    ssu: Option<&Design>,
    frame: &Frame,
    idx: &[usize],
    cap: usize,
) -> Result<Vec<(Vec<usize>, f64)>> {
    let (cframe, members) = cluster_frame(frame)?;
    let in_sub: Vec<usize> = (0..cframe.len())
        .filter(|&c| members[c].iter().any(|u| idx.contains(u)))
        .collect();
    let first = support_on(psu, &cframe, &in_sub, cap)?;
    let mut within: BTreeMap<usize, Vec<(Vec<usize>, f64)>> = BTreeMap::new();
    for &c in &in_sub {
        let units: Vec<usize> = members[c].iter().copied().filter(|u| idx.contains(u)).collect();
        let sup = match ssu {
            None => vec![(units, 1.0)],
            Some(d) => support_on(d, frame, &units, cap)?,
        };
        within.insert(c, sup);
    }
    let mut out = Vec::new();
    for (clusters, p) in first {
        let mut acc: Vec<(Vec<usize>, f64)> = vec![(Vec::new(), p)];
        for c in clusters {
            let part = &within[&c];
            too_large(acc.len() as f64 * part.len() as f64, cap)?;
            acc = product(&acc, part);
        }
        too_large((out.len() + acc.len()) as f64, cap)?;
        out.extend(acc);
    }
    Ok(out)
}

/// First-order inclusion probabilities. With-replacement designs report the
/// per-draw selection probability p_i.
pub fn first_order_pips(design: &Design, frame: &Frame) -> Result<InclusionProbs> {
    design.validate()?;
    let all: Vec<usize> = (0..frame.len()).collect();
    let pi = first_on(design, frame, &all)?;
    if let Some(i) = pi.iter().position(|&p| !(p > 0.0)) {
        return Err(Error::ZeroInclusion(frame.unit(i).id.clone()));
    }
    Ok(InclusionProbs::first(pi))
}

fn first_on(design: &Design, frame: &Frame, idx: &[usize]) -> Result<Vec<f64>> {
    let m = idx.len();
    let mos: Vec<f64> = idx.iter().map(|&i| frame.unit(i).mos).collect();
    Ok(match design {
        Design::Srs { n, .. } => {
            if *n == 0 || *n > m {
                return input(format!("SRS sample size {n} outside 1..={m}"));
            }
            vec![*n as f64 / m as f64; m]
        }
        Design::Srswr { .. } => vec![1.0 / m as f64; m],
        Design::Bernoulli { pi } => {
            check_probs(&[*pi])?;
            vec![*pi; m]
        }
        Design::Poisson { pi } => {
            check_probs(pi)?;
            if pi.len() != m {
                return input("Poisson probabilities do not match the frame size");
            }
            pi.clone()
        }
        Design::Systematic { n } => vec![1.0 / systematic_interval(m, *n)?.0 as f64; m],
        Design::SystematicPips { n } => compute_pips(&mos, *n)?,
        Design::PpsWr { .. } => {
            check_mos(&mos)?;
            let t: f64 = mos.iter().sum();
            mos.iter().map(|x| x / t).collect()
        }
        Design::Brewer2 {} | Design::Durbin2 {} => {
            let pi = compute_pips(&mos, 2)?;
            two_draw_joint(&pi)?;
            pi
        }
        Design::Chao { n } => chao_pips(&mos, *n)?,
        Design::RejectivePoisson { n, working } => match working {
            Some(w) => rejective_pips(w, *n)?,
            None => compute_pips(&mos, *n)?,
        },
        Design::Stratified { .. } | Design::OneStageCluster { .. } | Design::TwoStage { .. } => {
            let mut pi = vec![0.0; m];
            let pos: std::collections::HashMap<usize, usize> = idx.iter().enumerate().map(|(k, &i)| (i, k)).collect();
            for (unit, p) in nested_first(design, frame, idx)? {
                pi[pos[&unit]] = p;
            }
            pi
        }
        Design::Explicit { support } => DesignDistribution::new(support.clone(), m)?.first_order(m),
        Design::TwoPhase { phase2: Phase2Rule::All, phase1 } => first_on(phase1, frame, idx)?,
        Design::TwoPhase { .. } => {
            return Err(Error::NotEnumerable(
                "two-phase inclusion probabilities depend on phase-one observations".into(),
            ))
        }
    })
}

fn nested_first(design: &Design, frame: &Frame, idx: &[usize]) -> Result<Vec<(usize, f64)>> {
    match design {
        Design::Stratified { strata } => {
            let sub = frame.subset(idx);
            let mut out = Vec::new();
            for (label, members) in sub.strata()? {
                let child = strata
                    .get(&label)
                    .ok_or_else(|| Error::Input(format!("stratum {label:?} has no design")))?;
                let global: Vec<usize> = members.iter().map(|&k| idx[k]).collect();
                let pi = first_on(child, frame, &global)?;
                out.extend(global.into_iter().zip(pi));
            }
            Ok(out)
        }
        Design::OneStageCluster { psu } | Design::TwoStage { psu, .. } => {
            let ssu = if let Design::TwoStage { ssu, .. } = design { Some(ssu.as_ref()) } else { None };
            let (cframe, members) = cluster_frame(frame)?;
            let in_sub: Vec<usize> = (0..cframe.len())
                .filter(|&c| members[c].iter().any(|u| idx.contains(u)))
                .collect();
            let pi_i = first_on(psu, &cframe, &in_sub)?;
            let mut out = Vec::new();
            for (k, &c) in in_sub.iter().enumerate() {
                let units: Vec<usize> = members[c].iter().copied().filter(|u| idx.contains(u)).collect();
                let cond = match ssu {
                    None => vec![1.0; units.len()],
                    Some(d) => first_on(d, frame, &units)?,
                };
                out.extend(units.into_iter().zip(cond.into_iter().map(|q| q * pi_i[k])));
            }
            Ok(out)
        }
        _ => unreachable!(),
    }
}

/// Full joint inclusion matrix with π_ii = π_i. Systematic designs return
/// zeros for pairs that never appear together and clear `measurable`.
pub fn joint_pips(design: &Design, frame: &Frame) -> Result<InclusionProbs> {
    let first = first_order_pips(design, frame)?.first_order;
    if design.with_replacement() {
        return Err(Error::NotEnumerable(
            "joint inclusion is not defined for with-replacement draws; use the Hansen-Hurwitz variance".into(),
        ));
    }
    let n = frame.len();
    let joint = match design {
        Design::Srs { n: k, .. } => {
            let v = (*k as f64) * (*k as f64 - 1.0) / (n as f64 * (n as f64 - 1.0));
            square(n, |i, j| if i == j { first[i] } else { v })
        }
        Design::Bernoulli { .. } | Design::Poisson { .. } => {
            square(n, |i, j| if i == j { first[i] } else { first[i] * first[j] })
        }
        Design::Systematic { n: k } => {
            let (g, _) = systematic_interval(n, *k)?;
            square(n, |i, j| if i % g == j % g { 1.0 / g as f64 } else { 0.0 })
        }
        Design::Brewer2 {} | Design::Durbin2 {} => two_draw_joint(&first)?,
        Design::RejectivePoisson { n: k, working: Some(w) } => rejective_joint(w, *k)?,
        _ => enumerate_design(design, frame)?.joint(n),
    };
    Ok(InclusionProbs::with_joint(first, joint))
}

fn square(n: usize, f: impl Fn(usize, usize) -> f64) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| f(i, j)).collect()).collect()
}

/// Joint probabilities restricted to the units of `sample`, in sample order.
/// Closed forms avoid building the N×N matrix where they exist.
pub fn joint_for_sample(design: &Design, frame: &Frame, sample: &Sample) -> Result<Vec<Vec<f64>>> {
    let units = sample.units();
    let k = units.len();
    if let Some(f) = pair_rule(design, frame)? {
        return Ok((0..k).map(|a| (0..k).map(|b| f(units[a], units[b])).collect()).collect());
    }
    let full = joint_pips(design, frame)?;
    let j = full.joint.unwrap();
    Ok((0..k).map(|a| (0..k).map(|b| j[units[a]][units[b]]).collect()).collect())
}

type PairFn = Box<dyn Fn(usize, usize) -> f64>;

fn pair_rule(design: &Design, frame: &Frame) -> Result<Option<PairFn>> {
    let n = frame.len();
    Ok(match design {
        Design::Srs { n: k, .. } => {
            let pi = *k as f64 / n as f64;
            let v = (*k as f64) * (*k as f64 - 1.0) / (n as f64 * (n as f64 - 1.0));
            Some(Box::new(move |i, j| if i == j { pi } else { v }))
        }
        Design::Bernoulli { pi } => {
            let p = *pi;
            Some(Box::new(move |i, j| if i == j { p } else { p * p }))
        }
        Design::Poisson { pi } => {
            let p = pi.clone();
            Some(Box::new(move |i, j| if i == j { p[i] } else { p[i] * p[j] }))
        }
        Design::Stratified { strata } => {
            let labels = frame.strata()?;
            let mut of = vec![0usize; n];
            let mut pos = vec![0usize; n];
            let mut rules = Vec::new();
            for (h, (label, members)) in labels.iter().enumerate() {
                let child = strata
                    .get(label)
                    .ok_or_else(|| Error::Input(format!("stratum {label:?} has no design")))?;
                let sub = frame.subset(members);
                let rule = match pair_rule(child, &sub)? {
                    Some(r) => r,
                    None => {
                        let j = joint_pips(child, &sub)?.joint.unwrap();
                        Box::new(move |a: usize, b: usize| j[a][b]) as PairFn
                    }
                };
                for (k, &u) in members.iter().enumerate() {
                    of[u] = h;
                    pos[u] = k;
                }
                rules.push(rule);
            }
            Some(Box::new(move |i, j| {
                if of[i] == of[j] {
                    rules[of[i]](pos[i], pos[j])
                } else {
                    rules[of[i]](pos[i], pos[i]) * rules[of[j]](pos[j], pos[j])
                }
            }))
        }
        _ => None,
    })
}
