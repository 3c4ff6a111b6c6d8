//! Aggregation of ensemble verification results: satisfaction probabilities,
//! expected robustness, agreement with the realized outcome, and the Binder
//! point estimate of the coefficient clustering.

use std::collections::HashMap;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::spatial::fmt_f64;
use crate::strel::{Mode, VerificationField};

/// Mean, standard deviation and 10%/90% quantiles of a per-draw measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Spread {
    pub mean: f64,
    pub sd: f64,
    pub q10: f64,
    pub q90: f64,
}

impl Spread {
    /// Summary of `values`; sd uses the `1/M` normalization.
    pub fn of(values: &[f64]) -> Result<Spread> {
        if values.is_empty() {
            return Err(Error::EmptyEnsemble);
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Spread {
            mean,
            sd,
            q10: quantile(&sorted, 0.1),
            q90: quantile(&sorted, 0.9),
        })
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn check_ensemble(fields: &[VerificationField]) -> Result<usize> {
    let Some(first) = fields.first() else {
        return Err(Error::EmptyEnsemble);
    };
    let n = first.len();
    if let Some(k) = fields.iter().position(|f| f.len() != n) {
        return Err(Error::DimensionMismatch(format!("field {k} has {} locations, expected {n}", fields[k].len())));
    }
    Ok(n)
}

fn check_against(pred: &[VerificationField], obs: &VerificationField) -> Result<usize> {
    let n = check_ensemble(pred)?;
    if obs.len() != n {
        return Err(Error::DimensionMismatch(format!("observed field has {} locations, predictions {n}", obs.len())));
    }
    Ok(n)
}

/// Per-location share of draws satisfying the property.
pub fn satisfaction_probability(fields: &[VerificationField]) -> Result<Vec<f64>> {
    let n = check_ensemble(fields)?;
    let mut count = vec![0usize; n];
    for f in fields {
        for (c, s) in count.iter_mut().zip(f.satisfied()) {
            *c += s as usize;
        }
    }
    Ok(count.iter().map(|&c| c as f64 / fields.len() as f64).collect())
}

/// Per-location mean robustness across draws.
pub fn expected_robustness(fields: &[VerificationField]) -> Result<Vec<f64>> {
    let n = check_ensemble(fields)?;
    if fields.iter().any(|f| f.mode != Mode::Robustness) {
        return Err(Error::invalid("expected robustness needs robustness fields"));
    }
    let mut sum = vec![0.0; n];
    for f in fields {
        for (a, v) in sum.iter_mut().zip(&f.values) {
            *a += v;
        }
    }
    Ok(sum.iter().map(|s| s / fields.len() as f64).collect())
}

/// Per draw, `(1/I) Σ_i 1{pred_i} 1{obs_i}`: the share of locations that are
/// positive in both. There is no true-negative term.
pub fn accuracy_per_draw(pred: &[VerificationField], obs: &VerificationField) -> Result<Vec<f64>> {
    let n = check_against(pred, obs)?;
    let o = obs.satisfied();
    Ok(pred
        .iter()
        .map(|p| p.satisfied().iter().zip(&o).filter(|(a, b)| **a && **b).count() as f64 / n as f64)
        .collect())
}

pub fn satisfaction_accuracy(pred: &[VerificationField], obs: &VerificationField) -> Result<Spread> {
    Spread::of(&accuracy_per_draw(pred, obs)?)
}

/// Per-draw F1 between predicted and observed satisfaction. A draw whose
/// precision or recall has a zero denominator scores 0.
pub fn f1_per_draw(pred: &[VerificationField], obs: &VerificationField) -> Result<Vec<f64>> {
    check_against(pred, obs)?;
    let o = obs.satisfied();
    let observed_pos = o.iter().filter(|v| **v).count();
    Ok(pred
        .iter()
        .map(|p| {
            let s = p.satisfied();
            let predicted_pos = s.iter().filter(|v| **v).count();
            let tp = s.iter().zip(&o).filter(|(a, b)| **a && **b).count();
            if predicted_pos == 0 || observed_pos == 0 {
                return 0.0;
            }
            let precision = tp as f64 / predicted_pos as f64;
            let recall = tp as f64 / observed_pos as f64;
            if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            }
        })
        .collect())
}

pub fn satisfaction_f1(pred: &[VerificationField], obs: &VerificationField) -> Result<Spread> {
    Spread::of(&f1_per_draw(pred, obs)?)
}

fn draw_mse(pred: &[VerificationField], obs: &VerificationField) -> Result<Vec<f64>> {
    let n = check_against(pred, obs)?;
    Ok(pred
        .iter()
        .map(|p| p.values.iter().zip(&obs.values).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n as f64)
        .collect())
}

/// `sqrt( (1/M) Σ_m (1/I) Σ_i (R_i^(m) − R_i^o)² )`.
pub fn robustness_rmse(pred: &[VerificationField], obs: &VerificationField) -> Result<f64> {
    let mse = draw_mse(pred, obs)?;
    Ok((mse.iter().sum::<f64>() / mse.len() as f64).sqrt())
}

/// Per-draw RMSE, used to report posterior spread.
pub fn rmse_per_draw(pred: &[VerificationField], obs: &VerificationField) -> Result<Vec<f64>> {
    Ok(draw_mse(pred, obs)?.into_iter().map(f64::sqrt).collect())
}

/// Posterior co-clustering probabilities, row-major `I × I`.
pub fn coclustering_matrix(draws: &[Vec<usize>]) -> Result<Vec<f64>> {
    let Some(first) = draws.first() else {
        return Err(Error::EmptyEnsemble);
    };
    let n = first.len();
    if draws.iter().any(|d| d.len() != n) {
        return Err(Error::DimensionMismatch("partitions differ in length".into()));
    }
    let mut p = vec![0.0; n * n];
    for d in draws {
        for i in 0..n {
            for j in 0..n {
                if d[i] == d[j] {
                    p[i * n + j] += 1.0;
                }
            }
        }
    }
    let m = draws.len() as f64;
    p.iter_mut().for_each(|v| *v /= m);
    Ok(p)
}

/// Binder loss with equal costs: `Σ_{i<j} |1{c_i = c_j} − P_ij|`.
pub fn binder_loss(partition: &[usize], coclustering: &[f64]) -> f64 {
    let n = partition.len();
    let mut loss = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let same = (partition[i] == partition[j]) as u8 as f64;
            loss += (same - coclustering[i * n + j]).abs();
        }
    }
    loss
}

/// The sampled partition with least Binder loss; ties go to the earliest draw.
/// Returns the partition and its draw index.
pub fn binder_partition(draws: &[Vec<usize>]) -> Result<(Vec<usize>, usize)> {
    let p = coclustering_matrix(draws)?;
    let mut best = (f64::INFINITY, 0);
    for (k, d) in draws.iter().enumerate() {
        let loss = binder_loss(d, &p);
        // strict improvement beyond round-off keeps the earliest of equal losses
        if loss < best.0 - 1e-12 {
            best = (loss, k);
        }
    }
    Ok((draws[best.1].clone(), best.1))
}

/// Adjusted Rand index between two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch("labelings differ in length".into()));
    }
    let n = a.len();
    let pairs = |x: usize| (x * x.saturating_sub(1) / 2) as f64;
    let mut table: HashMap<(usize, usize), usize> = HashMap::new();
    let mut rows: HashMap<usize, usize> = HashMap::new();
    let mut cols: HashMap<usize, usize> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| pairs(c)).sum();
    let sa: f64 = rows.values().map(|&c| pairs(c)).sum();
    let sb: f64 = cols.values().map(|&c| pairs(c)).sum();
    let total = pairs(n);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sa * sb / total;
    let max = 0.5 * (sa + sb);
    if max == expected {
        // both labelings trivial (all singletons or one block): identical structure
        return Ok(if index == expected { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / (max - expected))
}

/// All measures for one property in one window.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyAssessment {
    pub property: String,
    pub satisfaction_prob: Vec<f64>,
    pub expected_robustness: Vec<f64>,
    pub accuracy: Spread,
    pub f1: Spread,
    /// The nested RMSE across draws.
    pub rmse: f64,
    /// Spread of the per-draw RMSE.
    pub rmse_spread: Spread,
}

/// Combines Boolean and robustness ensembles with the ex-post observed fields.
pub fn assess_property(
    property: &str,
    pred_bool: &[VerificationField],
    pred_rob: &[VerificationField],
    obs_bool: &VerificationField,
    obs_rob: &VerificationField,
) -> Result<PropertyAssessment> {
    Ok(PropertyAssessment {
        property: property.to_string(),
        satisfaction_prob: satisfaction_probability(pred_bool)?,
        expected_robustness: expected_robustness(pred_rob)?,
        accuracy: satisfaction_accuracy(pred_bool, obs_bool)?,
        f1: satisfaction_f1(pred_bool, obs_bool)?,
        rmse: robustness_rmse(pred_rob, obs_rob)?,
        rmse_spread: Spread::of(&rmse_per_draw(pred_rob, obs_rob)?)?,
    })
}

/// Assessments keyed by window.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AssessmentReport {
    pub entries: Vec<(usize, PropertyAssessment)>,
}

impl AssessmentReport {
    pub fn push(&mut self, window_id: usize, a: PropertyAssessment) {
        self.entries.push((window_id, a));
    }

    /// `window_id,property,measure,statistic,value`
    pub fn write_report_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["window_id", "property", "measure", "statistic", "value"])?;
        for (id, a) in &self.entries {
            let mut row = |measure: &str, stat: &str, v: f64| {
                w.write_record([id.to_string(), a.property.clone(), measure.into(), stat.into(), fmt_f64(v)])
            };
            for (measure, s) in [("accuracy", a.accuracy), ("f1", a.f1)] {
                row(measure, "mean", s.mean)?;
                row(measure, "sd", s.sd)?;
                row(measure, "q10", s.q10)?;
                row(measure, "q90", s.q90)?;
            }
            row("rmse", "value", a.rmse)?;
            row("rmse", "sd", a.rmse_spread.sd)?;
            row("rmse", "q10", a.rmse_spread.q10)?;
            row("rmse", "q90", a.rmse_spread.q90)?;
        }
        w.flush()?;
        Ok(())
    }

    /// `window_id,property,location_id,satisfaction_prob,expected_robustness`
    pub fn write_fields_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["window_id", "property", "location_id", "satisfaction_prob", "expected_robustness"])?;
        for (id, a) in &self.entries {
            for (i, (p, r)) in a.satisfaction_prob.iter().zip(&a.expected_robustness).enumerate() {
                w.write_record([id.to_string(), a.property.clone(), i.to_string(), fmt_f64(*p), fmt_f64(*r)])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn boolean(v: &[u8]) -> VerificationField {
        VerificationField {
            mode: Mode::Boolean,
            values: v.iter().map(|&b| b as f64).collect(),
        }
    }

    fn rob(v: &[f64]) -> VerificationField {
        VerificationField {
            mode: Mode::Robustness,
            values: v.to_vec(),
        }
    }

    #[test]
    fn probability_arithmetic() {
        let f = [boolean(&[1, 0]), boolean(&[1, 1]), boolean(&[1, 1]), boolean(&[1, 0])];
        assert_eq!(satisfaction_probability(&f).unwrap(), vec![1.0, 0.5]);
        let f = [boolean(&[1]), boolean(&[1]), boolean(&[1]), boolean(&[0])];
        assert_eq!(satisfaction_probability(&f).unwrap(), vec![0.75]);
        assert!(matches!(satisfaction_probability(&[]), Err(Error::EmptyEnsemble)));
    }

    #[test]
    fn robustness_symmetry() {
        let r = [rob(&[2.0, -1.0]), rob(&[-2.0, 1.0])];
        assert_eq!(expected_robustness(&r).unwrap(), vec![0.0, 0.0]);
        let same = [rob(&[3.0, 4.0]), rob(&[3.0, 4.0])];
        assert_eq!(expected_robustness(&same).unwrap(), vec![3.0, 4.0]);
    }

    #[test]
    fn fixtures() {
        let obs = boolean(&[1, 1, 0, 0]);
        let pred = [boolean(&[1, 0, 0, 0])];
        assert_eq!(satisfaction_accuracy(&pred, &obs).unwrap().mean, 0.25);
        assert_eq!(satisfaction_f1(&pred, &obs).unwrap().mean, 2.0 / 3.0);
        assert_eq!(robustness_rmse(&[rob(&[3.0])], &rob(&[1.0])).unwrap(), 2.0);
        assert_eq!(satisfaction_accuracy(&[boolean(&[1, 1])], &boolean(&[1, 1])).unwrap().mean, 1.0);
        assert_eq!(satisfaction_accuracy(&[boolean(&[1, 0])], &boolean(&[0, 0])).unwrap().mean, 0.0);
        assert_eq!(satisfaction_f1(&[boolean(&[0, 0])], &boolean(&[1, 0])).unwrap().mean, 0.0);
        assert_eq!(satisfaction_f1(&[boolean(&[0, 1])], &boolean(&[0, 1])).unwrap().mean, 1.0);
        assert!(satisfaction_f1(&[boolean(&[0])], &boolean(&[0, 1])).is_err());
    }

    #[test]
    fn spread_quantiles() {
        let s = Spread::of(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0]).unwrap();
        assert_eq!((s.mean, s.q10, s.q90), (5.0, 1.0, 9.0));
    }

    #[test]
    fn binder_ties_go_to_first_draw() {
        let draws = vec![vec![0, 1], vec![0, 0]];
        // co-clustering 0.5: both partitions lose 0.5
        let p = coclustering_matrix(&draws).unwrap();
        assert_eq!(binder_loss(&draws[0], &p), binder_loss(&draws[1], &p));
        assert_eq!(binder_partition(&draws).unwrap(), (vec![0, 1], 0));
        let draws = vec![vec![0, 0], vec![0, 1]];
        assert_eq!(binder_partition(&draws).unwrap().1, 0);
        assert_eq!(binder_partition(&[vec![2, 2, 1]]).unwrap().0, vec![2, 2, 1]);
        assert!(binder_partition(&[]).is_err());
    }

    #[test]
    fn ari_values() {
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[5, 5, 3, 3]).unwrap(), 1.0);
        // classic example: ARI of {0,0,0,1,1,1} vs {0,0,1,1,2,2} = 0.2424...
        let v = adjusted_rand_index(&[0, 0, 0, 1, 1, 1], &[0, 0, 1, 1, 2, 2]).unwrap();
        assert!((v - 0.24242424242424243).abs() < 1e-12);
    }

    #[test]
    fn report_csv_shapes() {
        let obs_b = boolean(&[1, 0]);
        let obs_r = rob(&[1.0, -1.0]);
        let a = assess_property("P1", &[boolean(&[1, 1])], &[rob(&[2.0, 0.5])], &obs_b, &obs_r).unwrap();
        let mut rep = AssessmentReport::default();
        rep.push(3, a);
        let mut buf = Vec::new();
        rep.write_report_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("window_id,property,measure,statistic,value\n"));
        assert!(text.contains("3,P1,accuracy,mean,0.5\n"));
        let mut buf = Vec::new();
        rep.write_fields_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "window_id,property,location_id,satisfaction_prob,expected_robustness\n3,P1,0,1,2\n3,P1,1,1,0.5\n"
        );
    }

    fn arb_ensemble() -> impl Strategy<Value = (Vec<Vec<u8>>, Vec<u8>)> {
        (1usize..8, 1usize..10).prop_flat_map(|(n, m)| {
            (
                proptest::collection::vec(proptest::collection::vec(0u8..2, n), m),
                proptest::collection::vec(0u8..2, n),
            )
        })
    }

    proptest! {
        #[test]
        fn probability_matches_recount((draws, _) in arb_ensemble()) {
            let fields: Vec<_> = draws.iter().map(|d| boolean(d)).collect();
            let p = satisfaction_probability(&fields).unwrap();
            for i in 0..draws[0].len() {
                let mut c = 0;
                for d in &draws {
                    if d[i] == 1 {
                        c += 1;
                    }
                }
                prop_assert_eq!(p[i], c as f64 / draws.len() as f64);
                prop_assert!((0.0..=1.0).contains(&p[i]));
            }
        }

        #[test]
        fn accuracy_bounded_and_f1_permutation_invariant((draws, obs) in arb_ensemble(), shift in 0usize..8) {
            let fields: Vec<_> = draws.iter().map(|d| boolean(d)).collect();
            let o = boolean(&obs);
            let acc = accuracy_per_draw(&fields, &o).unwrap();
            prop_assert!(acc.iter().all(|a| (0.0..=1.0).contains(a)));
            for (a, d) in acc.iter().zip(&draws) {
                let full = d.iter().all(|v| *v == 1) && obs.iter().all(|v| *v == 1);
                prop_assert_eq!(*a == 1.0, full);
            }
            let n = obs.len();
            let rot = |v: &[u8]| (0..n).map(|i| v[(i + shift) % n]).collect::<Vec<u8>>();
            let rf: Vec<_> = draws.iter().map(|d| boolean(&rot(d))).collect();
            prop_assert_eq!(f1_per_draw(&fields, &o).unwrap(), f1_per_draw(&rf, &boolean(&rot(&obs))).unwrap());
        }

        #[test]
        fn rmse_matches_double_loop(vals in proptest::collection::vec(-5.0f64..5.0, 12), m in 1usize..4) {
            let n = 12 / (m + 1);
            let pred: Vec<_> = (0..m).map(|k| rob(&vals[k * n..(k + 1) * n])).collect();
            let obs = rob(&vals[m * n..(m + 1) * n]);
            let mut total = 0.0;
            for p in &pred {
                let mut s = 0.0;
                for i in 0..n {
                    s += (p.values[i] - obs.values[i]).powi(2);
                }
                total += s / n as f64;
            }
            let r = robustness_rmse(&pred, &obs).unwrap();
            prop_assert!((r - (total / m as f64).sqrt()).abs() < 1e-12);
            prop_assert!(r >= 0.0);
            prop_assert_eq!(robustness_rmse(&[obs.clone()], &obs).unwrap(), 0.0);
        }

        #[test]
        fn binder_label_invariant(draws in proptest::collection::vec(proptest::collection::vec(0usize..3, 6), 1..8), perm in 0usize..6) {
            let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
            let relabeled: Vec<Vec<usize>> = draws.iter().map(|d| d.iter().map(|&c| perms[perm][c]).collect()).collect();
            prop_assert_eq!(binder_partition(&draws).unwrap().1, binder_partition(&relabeled).unwrap().1);
        }
    }
}
