//! success@t, Mann-Whitney U, Vargha-Delaney A12 and the per-group tables
//! built from episode records.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::episode::EpisodeRecord;
use crate::prompt::Variant;

/// Below this smaller-sample size the exact permutation distribution is used.
pub const EXACT_BELOW: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("sample {0} is empty")]
    EmptySample(&'static str),
    #[error("non-finite value in sample")]
    NonFinite,
    #[error("turn {t} outside 1..={budget}")]
    TurnOutOfRange { t: usize, budget: usize },
    #[error("comparison needs t_low < t_high, got {0} and {1}")]
    TurnOrder(usize, usize),
}

/// Grouping used by every table: one row per (model, family, variant).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupKey {
    pub family: String,
    pub variant: Variant,
    pub model: String,
}

impl GroupKey {
    pub fn of(r: &EpisodeRecord) -> Self {
        Self { family: r.family.clone(), variant: r.variant, model: r.model_id.clone() }
    }
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.family, self.variant, self.model)
    }
}

/// Records per group; excluded episodes are kept so they can be counted.
pub fn group_records(records: &[EpisodeRecord]) -> BTreeMap<GroupKey, Vec<&EpisodeRecord>> {
    let mut out: BTreeMap<GroupKey, Vec<&EpisodeRecord>> = BTreeMap::new();
    for r in records {
        out.entry(GroupKey::of(r)).or_default().push(r);
    }
    out
}

/// `1(X <= t)` for one episode.
pub fn indicator(success_turn: Option<usize>, t: usize) -> f64 {
    if success_turn.is_some_and(|x| x <= t) {
        1.0
    } else {
        0.0
    }
}

/// Mean of `1(X <= t)`; `None` for an empty sample.
pub fn success_rate(success_turns: &[Option<usize>], t: usize) -> Option<f64> {
    if success_turns.is_empty() {
        return None;
    }
    Some(success_turns.iter().map(|&s| indicator(s, t)).sum::<f64>() / success_turns.len() as f64)
}

/// Indicator samples per group, excluded episodes dropped.
pub fn success_samples(records: &[EpisodeRecord], t: usize) -> BTreeMap<GroupKey, Vec<f64>> {
    group_records(records)
        .into_iter()
        .map(|(k, rs)| (k, rs.iter().filter(|r| !r.excluded()).map(|r| indicator(r.success_turn, t)).collect()))
        .collect()
}

/// success@t per group; groups whose episodes are all excluded map to `None`.
pub fn success_at(records: &[EpisodeRecord], t: usize) -> BTreeMap<GroupKey, Option<f64>> {
    group_records(records)
        .into_iter()
        .map(|(k, rs)| {
            let turns: Vec<Option<usize>> = rs.iter().filter(|r| !r.excluded()).map(|r| r.success_turn).collect();
            (k, success_rate(&turns, t))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MwuMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MwuResult {
    /// U statistic of the first sample: pairs where it is larger, ties counting half.
    pub u: f64,
    /// Two-sided.
    pub p_value: f64,
    pub method: MwuMethod,
    /// Every value in both samples is identical; `p_value` is 1 by convention.
    pub degenerate: bool,
}

fn check(a: &[f64], name: &'static str) -> Result<(), StatsError> {
    if a.is_empty() {
        return Err(StatsError::EmptySample(name));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    Ok(())
}

/// Mid-ranks of the pooled sample, doubled so they are integers, plus the
/// tie-group sizes.
fn doubled_ranks(pooled: &[f64]) -> (Vec<u64>, Vec<u64>) {
    let mut idx: Vec<usize> = (0..pooled.len()).collect();
    idx.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));
    let mut ranks = vec![0u64; pooled.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && pooled[idx[j + 1]] == pooled[idx[i]] {
            j += 1;
        }
        // Positions i..=j hold ranks i+1..=j+1; their mean doubled is i+j+2.
        for &k in &idx[i..=j] {
            ranks[k] = (i + j + 2) as u64;
        }
        ties.push((j - i + 1) as u64);
        i = j + 1;
    }
    (ranks, ties)
}

fn u_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut twice = 0u64;
    for x in a {
        for y in b {
            twice += match x.partial_cmp(y) {
                Some(std::cmp::Ordering::Greater) => 2,
                Some(std::cmp::Ordering::Equal) => 1,
                _ => 0,
            };
        }
    }
    twice as f64 / 2.0
}

fn all_identical(a: &[f64], b: &[f64]) -> bool {
    let first = a[0];
    a.iter().chain(b).all(|&x| x == first)
}

/// Exact two-sided p-value from the permutation distribution of the rank
/// sum, ties handled through mid-ranks.
pub fn mann_whitney_exact(a: &[f64], b: &[f64]) -> Result<MwuResult, StatsError> {
    check(a, "a")?;
    check(b, "b")?;
    let (na, n) = (a.len(), a.len() + b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, _) = doubled_ranks(&pooled);
    let observed: u64 = ranks[..na].iter().sum();
    let max_sum: u64 = ranks.iter().sum();
    // ways[k][s]: subsets of size k with doubled rank sum s.
    let mut ways = vec![vec![0f64; max_sum as usize + 1]; na + 1];
    ways[0][0] = 1.0;
    for &r in &ranks {
        for k in (1..=na).rev() {
            let (lower, upper) = ways.split_at_mut(k);
            let (prev, cur) = (&lower[k - 1], &mut upper[0]);
            for s in (r as usize..=max_sum as usize).rev() {
                cur[s] += prev[s - r as usize];
            }
        }
    }
    // Doubled mean of the rank sum: na * (n + 1).
    let mean2 = (na * (n + 1)) as i64;
    let dev = (observed as i64 - mean2).abs();
    let (mut extreme, mut total) = (0.0, 0.0);
    for (s, &w) in ways[na].iter().enumerate() {
        total += w;
        if (s as i64 - mean2).abs() >= dev {
            extreme += w;
        }
    }
    let degenerate = all_identical(a, b);
    Ok(MwuResult {
        u: u_statistic(a, b),
        p_value: if degenerate { 1.0 } else { (extreme / total).min(1.0) },
        method: MwuMethod::Exact,
        degenerate,
    })
}

/// Normal approximation with tie-corrected variance and continuity correction.
pub fn mann_whitney_normal(a: &[f64], b: &[f64]) -> Result<MwuResult, StatsError> {
    check(a, "a")?;
    check(b, "b")?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let n = na + nb;
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (_, ties) = doubled_ranks(&pooled);
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (n * (n - 1.0)).max(1.0);
    let variance = na * nb / 12.0 * ((n + 1.0) - tie_term);
    let u = u_statistic(a, b);
    let degenerate = all_identical(a, b);
    let p_value = if degenerate || variance <= 0.0 {
        1.0
    } else {
        let z = ((u - na * nb / 2.0).abs() - 0.5).max(0.0) / variance.sqrt();
        let normal = Normal::standard();
        (2.0 * normal.sf(z)).min(1.0)
    };
    Ok(MwuResult { u, p_value, method: MwuMethod::Normal, degenerate })
}

/// Two-sided Mann-Whitney U test: exact below [`EXACT_BELOW`] observations in
/// the smaller sample, normal approximation otherwise.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MwuResult, StatsError> {
    if a.len().min(b.len()) < EXACT_BELOW {
        mann_whitney_exact(a, b)
    } else {
        mann_whitney_normal(a, b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Magnitude {
    Negligible,
    Small,
    Medium,
    Large,
}

impl Magnitude {
    pub fn letter(self) -> char {
        match self {
            Magnitude::Negligible => 'N',
            Magnitude::Small => 'S',
            Magnitude::Medium => 'M',
            Magnitude::Large => 'L',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectSize {
    pub a12: f64,
    pub category: Magnitude,
}

/// Category of an A12 value; thresholds are strict and mirrored around 0.5.
pub fn effect_category(a12: f64) -> Magnitude {
    if !(0.30..=0.70).contains(&a12) {
        Magnitude::Large
    } else if !(0.37..=0.63).contains(&a12) {
        Magnitude::Medium
    } else if !(0.45..=0.55).contains(&a12) {
        Magnitude::Small
    } else {
        Magnitude::Negligible
    }
}

/// `A12 = (#(a > b) + 0.5 #(a = b)) / (|a| |b|)`.
pub fn vargha_delaney(a: &[f64], b: &[f64]) -> Result<EffectSize, StatsError> {
    check(a, "a")?;
    check(b, "b")?;
    let doubled = (2.0 * u_statistic(a, b)) as u64;
    let denom = 2 * (a.len() * b.len()) as u64;
    // Computing the smaller side and mirroring keeps A12(a,b) + A12(b,a) == 1.
    let a12 = if 2 * doubled <= denom {
        doubled as f64 / denom as f64
    } else {
        1.0 - (denom - doubled) as f64 / denom as f64
    };
    Ok(EffectSize { a12, category: effect_category(a12) })
}

/// What one observation in a comparison sample stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleUnit {
    /// `1(X <= t)` per episode.
    #[default]
    Episode,
    /// success@t of each instance over its repetitions.
    Instance,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub key: GroupKey,
    pub t_low: usize,
    pub t_high: usize,
    pub n: usize,
    pub success_low: f64,
    pub success_high: f64,
    pub mwu: MwuResult,
    /// A12 of the t_high sample over the t_low sample.
    pub effect: EffectSize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
    pub notes: Vec<String>,
}

fn unit_sample(records: &[&EpisodeRecord], t: usize, unit: SampleUnit) -> Vec<f64> {
    let kept = records.iter().filter(|r| !r.excluded());
    match unit {
        SampleUnit::Episode => kept.map(|r| indicator(r.success_turn, t)).collect(),
        SampleUnit::Instance => {
            let mut by_instance: BTreeMap<&str, Vec<Option<usize>>> = BTreeMap::new();
            for r in kept {
                by_instance.entry(&r.instance_id).or_default().push(r.success_turn);
            }
            by_instance.values().filter_map(|s| success_rate(s, t)).collect()
        }
    }
}

/// For every group, tests `1(X <= t_low)` against `1(X <= t_high)`.
pub fn compare_turns(
    records: &[EpisodeRecord],
    t_low: usize,
    t_high: usize,
    unit: SampleUnit,
) -> Result<ComparisonTable, StatsError> {
    if t_low >= t_high || t_low == 0 {
        return Err(StatsError::TurnOrder(t_low, t_high));
    }
    let mut table = ComparisonTable::default();
    for (key, rs) in group_records(records) {
        let budget = rs.iter().map(|r| r.turn_budget).min().unwrap_or(0);
        if t_high > budget {
            table.notes.push(format!("{key}: turn budget {budget} is below {t_high}; omitted"));
            continue;
        }
        let low = unit_sample(&rs, t_low, unit);
        let high = unit_sample(&rs, t_high, unit);
        if low.is_empty() {
            table.notes.push(format!("{key}: every episode excluded; omitted"));
            continue;
        }
        let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
        table.rows.push(ComparisonRow {
            n: low.len(),
            success_low: mean(&low),
            success_high: mean(&high),
            mwu: mann_whitney_u(&low, &high)?,
            effect: vargha_delaney(&high, &low)?,
            key,
            t_low,
            t_high,
        });
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DurationRow {
    pub key: GroupKey,
    /// Turn-1 wall time of every kept episode.
    pub turn1: Vec<f64>,
    /// Time to first success of every successful episode.
    pub to_success: Vec<f64>,
    pub mwu: Option<MwuResult>,
    /// A12 of time-to-success over turn-1 time.
    pub effect: Option<EffectSize>,
    pub log_scale: bool,
    pub note: Option<String>,
}

pub fn duration_report(records: &[EpisodeRecord]) -> Result<Vec<DurationRow>, StatsError> {
    let mut out = Vec::new();
    for (key, rs) in group_records(records) {
        let kept: Vec<&&EpisodeRecord> = rs.iter().filter(|r| !r.excluded()).collect();
        let turn1: Vec<f64> = kept.iter().map(|r| r.turn1_duration_s).collect();
        let to_success: Vec<f64> =
            kept.iter().filter(|r| r.success_turn.is_some()).map(|r| r.total_duration_s).collect();
        let (mwu, effect, note) = if turn1.is_empty() {
            (None, None, Some("every episode excluded".to_string()))
        } else if to_success.is_empty() {
            (None, None, Some("no successful episodes".to_string()))
        } else {
            (Some(mann_whitney_u(&to_success, &turn1)?), Some(vargha_delaney(&to_success, &turn1)?), None)
        };
        out.push(DurationRow { key, turn1, to_success, mwu, effect, log_scale: true, note });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn success_rate_examples() {
        let s = [Some(1), Some(3), None, None];
        assert_eq!(success_rate(&s, 1), Some(0.25));
        assert_eq!(success_rate(&s, 3), Some(0.5));
        assert_eq!(success_rate(&s, 10), Some(0.5));
        assert_eq!(success_rate(&[], 1), None);
    }

    #[test]
    fn mwu_examples() {
        let r = mann_whitney_u(&[0.0, 1.0, 0.0, 1.0], &[0.0, 1.0, 0.0, 1.0]).unwrap();
        assert!((r.p_value - 1.0).abs() < 1e-12);
        let r = mann_whitney_u(&[1.0, 1.0, 1.0], &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(r.method, MwuMethod::Exact);
        assert!((r.p_value - 0.1).abs() < 1e-12);
        assert_eq!(r.u, 9.0);
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [6.0, 7.0, 8.0, 9.0, 10.0];
        assert_eq!(mann_whitney_u(&a, &b).unwrap().u, 0.0);
        let d = mann_whitney_u(&[2.0; 9], &[2.0; 9]).unwrap();
        assert!(d.degenerate && d.p_value == 1.0);
        assert!(mann_whitney_u(&[], &[1.0]).is_err());
    }

    #[test]
    fn normal_matches_tied_four_by_four() {
        // One success out of four against none: z = 1.5 / 2 = 0.75.
        let r = mann_whitney_normal(&[1.0, 0.0, 0.0, 0.0], &[0.0; 4]).unwrap();
        assert!((r.p_value - 0.453_254_9).abs() < 1e-6, "{}", r.p_value);
    }

    #[test]
    fn a12_examples() {
        let e = vargha_delaney(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!((e.a12, e.category), (0.5, Magnitude::Negligible));
        let e = vargha_delaney(&[5.0, 6.0], &[1.0, 2.0]).unwrap();
        assert_eq!((e.a12, e.category), (1.0, Magnitude::Large));
        assert_eq!(effect_category(0.64), Magnitude::Medium);
        assert_eq!(effect_category(0.55), Magnitude::Negligible);
        assert_eq!(effect_category(0.63), Magnitude::Small);
        assert_eq!(effect_category(0.70), Magnitude::Medium);
        assert_eq!(effect_category(0.45), Magnitude::Negligible);
        assert_eq!(effect_category(0.30), Magnitude::Medium);
    }
}
