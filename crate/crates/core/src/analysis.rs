//! Before/after comparison of an optimized user–topic matrix: per-topic
//! weight changes, topic signals, degree increases and the objective ratio.

use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::fj::OpinionVector;
use crate::gdpm::reduction_ratio;
use crate::lowrank::LowRankModel;
use crate::numeric::{dot, mean, NeumaierSum};
use crate::topics::TopicMatrixX;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TopicRow {
    pub topic: usize,
    /// `Σ_i X'_ij − Σ_i X_ij`.
    pub delta: f64,
    /// `Σ_u Y_ju s_u`.
    pub tau_s: f64,
    pub tau_z_before: f64,
    pub tau_z_after: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroupStats {
    pub group: usize,
    pub size: usize,
    pub mean: f64,
    pub stdev: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub topics: Vec<TopicRow>,
    pub delta_sum: f64,
    /// Spearman correlation between `|τ_{j,s}|` and `δ_j`.
    pub tau_delta_spearman: f64,
    pub tau_z_range_before: f64,
    pub tau_z_range_after: f64,
    /// Per-user `A_X` degree divided by the original degree, after optimization.
    pub degree_increase_by_influence: Vec<GroupStats>,
    pub degree_increase_by_degree: Vec<GroupStats>,
    pub objective_before: f64,
    pub objective_after: f64,
    pub reduction_ratio: f64,
}

/// Ranks with ties sharing their average rank (1-based).
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &p in &idx[i..=j] {
            ranks[p] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let da: Vec<f64> = a.iter().map(|x| x - ma).collect();
    let db: Vec<f64> = b.iter().map(|x| x - mb).collect();
    let den = (dot(&da, &da) * dot(&db, &db)).sqrt();
    if den > 0.0 {
        dot(&da, &db) / den
    } else {
        0.0
    }
}

/// Spearman rank correlation; 0 when either input is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    pearson(&average_ranks(a), &average_ranks(b))
}

fn range(v: &[f64]) -> f64 {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    hi - lo
}

/// Splits users into `groups` near-equal groups by ascending `key` (ties by
/// index) and summarizes `values` per group.
pub fn grouped_stats(key: &[f64], values: &[f64], groups: usize) -> Vec<GroupStats> {
    let n = key.len();
    let groups = groups.clamp(1, n.max(1));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| key[a].total_cmp(&key[b]).then(a.cmp(&b)));
    (0..groups)
        .map(|g| {
            let lo = g * n / groups;
            let hi = (g + 1) * n / groups;
            let members: Vec<f64> = order[lo..hi].iter().map(|&u| values[u]).collect();
            let m = mean(&members);
            let var = if members.len() > 1 {
                members.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (members.len() - 1) as f64
            } else {
                0.0
            };
            GroupStats {
                group: g,
                size: members.len(),
                mean: m,
                stdev: var.sqrt(),
            }
        })
        .collect()
}

/// Compares `model.x()` against `after`; opinions are estimated to
/// objective accuracy `eps`.
pub fn analyze(
    model: &LowRankModel,
    after: &TopicMatrixX,
    s: &OpinionVector,
    eps: f64,
    groups: usize,
) -> Result<AnalysisReport> {
    let (n, k) = (model.n(), model.k());
    check_len("analysis rows", n, after.n())?;
    check_len("analysis topics", k, after.k())?;
    check_len("analysis opinions", n, s.len())?;
    if groups == 0 {
        return Err(Error::Validation("need at least one group".into()));
    }
    let model_after = model.with_x(after.clone())?;
    let inner = eps / (n as f64).sqrt();
    let z_before = model.approx_opinions(s, inner)?.z;
    let z_after = model_after.approx_opinions(s, inner)?.z;
    let y = model.y();
    let tau_s = y.apply(s.as_slice());
    let tau_before = y.apply(&z_before);
    let tau_after = y.apply(&z_after);

    let before = model.x().matrix();
    let after_m = after.matrix();
    let mut delta_sum = NeumaierSum::new();
    let topics: Vec<TopicRow> = (0..k)
        .map(|j| {
            let mut d = NeumaierSum::new();
            for i in 0..n {
                d.add(after_m[(i, j)]);
                d.add(-before[(i, j)]);
            }
            delta_sum.add(d.value());
            TopicRow {
                topic: j,
                delta: d.value(),
                tau_s: tau_s[j],
                tau_z_before: tau_before[j],
                tau_z_after: tau_after[j],
            }
        })
        .collect();
    let abs_tau: Vec<f64> = tau_s.iter().map(|t| t.abs()).collect();
    let deltas: Vec<f64> = topics.iter().map(|t| t.delta).collect();

    let degrees = model.graph().degrees();
    let increase: Vec<f64> = model_after
        .ax_degree()
        .iter()
        .zip(degrees)
        .map(|(a, d)| if *d > 0.0 { a / d } else { 0.0 })
        .collect();
    let influence = y.influence_scores();

    let objective_before = dot(s.as_slice(), &z_before);
    let objective_after = dot(s.as_slice(), &z_after);
    Ok(AnalysisReport {
        delta_sum: delta_sum.value(),
        tau_delta_spearman: spearman(&abs_tau, &deltas),
        tau_z_range_before: range(&tau_before),
        tau_z_range_after: range(&tau_after),
        degree_increase_by_influence: grouped_stats(&influence, &increase, groups),
        degree_increase_by_degree: grouped_stats(degrees, &increase, groups),
        topics,
        objective_before,
        objective_after,
        reduction_ratio: reduction_ratio(objective_before, objective_after)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_share_ties() {
        assert_eq!(
            average_ranks(&[3.0, 1.0, 3.0, 2.0]),
            vec![3.5, 1.0, 3.5, 2.0]
        );
    }

    #[test]
    fn spearman_monotone_and_constant() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 100.0]) - 1.0).abs() < 1e-15);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0]), 0.0);
    }

    #[test]
    fn groups_cover_everyone() {
        let key = [5.0, 1.0, 3.0, 2.0, 4.0];
        let vals = [50.0, 10.0, 30.0, 20.0, 40.0];
        let g = grouped_stats(&key, &vals, 2);
        assert_eq!(g.iter().map(|s| s.size).sum::<usize>(), 5);
        assert_eq!(g[0].mean, 15.0);
        assert_eq!(g[1].mean, 40.0);
    }
}
