//! Text and CSV tables over episode records.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::adjudicator::{tail_categories, AdjudicatorError, Category, CauseDistribution, FailureCause};
use crate::episode::EpisodeRecord;
use crate::prompt::Variant;
use crate::stats::{group_records, indicator, success_rate, ComparisonRow, ComparisonTable, DurationRow, EffectSize, MwuResult};

/// Share of failures folded into Other in the causes table.
pub const DEFAULT_TAIL_FRACTION: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: &[&str]) -> Self {
        Self { headers: headers.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    /// Space-aligned columns, first column left-aligned, others right-aligned.
    pub fn to_text(&self) -> String {
        let n = self.headers.len();
        let mut width = vec![0; n];
        for row in std::iter::once(&self.headers).chain(&self.rows) {
            for (w, cell) in width.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let line = |row: &[String]| {
            row.iter()
                .enumerate()
                .map(|(i, c)| if i < 3 && !is_numeric(c) { format!("{c:<w$}", w = width[i]) } else { format!("{c:>w$}", w = width[i]) })
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
        };
        let mut out = line(&self.headers);
        out.push('\n');
        out.push_str(&"-".repeat(width.iter().sum::<usize>() + 2 * n.saturating_sub(1)));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&line(row));
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.headers).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
    }
}

fn is_numeric(s: &str) -> bool {
    let t = s.trim_end_matches('%');
    !t.is_empty() && t.parse::<f64>().is_ok()
}

fn family_label(family: &str, variant: Variant) -> String {
    match variant {
        Variant::Standard => family.to_string(),
        Variant::Informed => format!("{family} (inf.)"),
    }
}

fn percent(x: f64) -> String {
    format!("{:.1}%", x)
}

/// success@t per (family, variant, model) for each `t` in `ts`.
pub fn success_table(records: &[EpisodeRecord], ts: &[usize]) -> Table {
    let mut headers = vec!["PF".to_string(), "Model".into(), "N".into(), "Excl.".into()];
    headers.extend(ts.iter().map(|t| format!("success@{t}")));
    let mut table = Table { headers, rows: Vec::new() };
    for (key, rs) in group_records(records) {
        let kept: Vec<Option<usize>> = rs.iter().filter(|r| !r.excluded()).map(|r| r.success_turn).collect();
        let mut row = vec![
            family_label(&key.family, key.variant),
            key.model.clone(),
            kept.len().to_string(),
            (rs.len() - kept.len()).to_string(),
        ];
        row.extend(ts.iter().map(|&t| success_rate(&kept, t).map_or("-".into(), |r| format!("{r:.2}"))));
        table.push(row);
    }
    table
}

/// Per-episode indicators, one row per episode: violin-plot input.
pub fn success_series(records: &[EpisodeRecord], ts: &[usize]) -> Table {
    let mut headers = vec!["family", "variant", "model", "instance", "repetition", "success_turn", "excluded"]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
    headers.extend(ts.iter().map(|t| format!("success@{t}")));
    let mut table = Table { headers, rows: Vec::new() };
    let mut sorted: Vec<&EpisodeRecord> = records.iter().collect();
    sorted.sort_by(|a, b| {
        (&a.family, a.variant, &a.model_id, &a.instance_id, a.repetition)
            .cmp(&(&b.family, b.variant, &b.model_id, &b.instance_id, b.repetition))
    });
    for r in sorted {
        let mut row = vec![
            r.family.clone(),
            r.variant.to_string(),
            r.model_id.clone(),
            r.instance_id.clone(),
            r.repetition.to_string(),
            r.success_turn.map_or(String::new(), |t| t.to_string()),
            r.excluded().to_string(),
        ];
        row.extend(ts.iter().map(|&t| (indicator(r.success_turn, t) as u8).to_string()));
        table.push(row);
    }
    table
}

/// `p (C)` with `p < 0.05` shown as `< 0.05`.
pub fn format_cell(mwu: &MwuResult, effect: &EffectSize) -> String {
    let p = if mwu.p_value < 0.05 { "< 0.05".to_string() } else { format!("{:.2}", mwu.p_value) };
    format!("{p} ({})", effect.category.letter())
}

/// Wide layout: one row per (family, variant, comparison), one column per model.
pub fn comparison_table(table: &ComparisonTable) -> Table {
    let models: Vec<String> = {
        let mut m: Vec<String> = table.rows.iter().map(|r| r.key.model.clone()).collect();
        m.sort();
        m.dedup();
        m
    };
    let mut headers = vec!["PF".to_string(), "success".into()];
    headers.extend(models.iter().cloned());
    let mut out = Table { headers, rows: Vec::new() };
    let mut cells: BTreeMap<(String, Variant, usize, usize), BTreeMap<&str, String>> = BTreeMap::new();
    for r in &table.rows {
        cells
            .entry((r.key.family.clone(), r.key.variant, r.t_low, r.t_high))
            .or_default()
            .insert(&r.key.model, format_cell(&r.mwu, &r.effect));
    }
    for ((family, variant, lo, hi), by_model) in cells {
        let mut row = vec![family_label(&family, variant), format!("{lo} vs. {hi}")];
        row.extend(models.iter().map(|m| by_model.get(m.as_str()).cloned().unwrap_or_else(|| "-".into())));
        out.push(row);
    }
    out
}

/// Long layout with every number of a comparison row.
pub fn comparison_csv(rows: &[ComparisonRow]) -> Table {
    let mut t = Table::new(&[
        "family", "variant", "model", "t_low", "t_high", "n", "success_low", "success_high", "u", "p_value", "method",
        "degenerate", "a12", "effect",
    ]);
    for r in rows {
        t.push(vec![
            r.key.family.clone(),
            r.key.variant.to_string(),
            r.key.model.clone(),
            r.t_low.to_string(),
            r.t_high.to_string(),
            r.n.to_string(),
            format!("{}", r.success_low),
            format!("{}", r.success_high),
            format!("{}", r.mwu.u),
            format!("{}", r.mwu.p_value),
            format!("{:?}", r.mwu.method).to_lowercase(),
            r.mwu.degenerate.to_string(),
            format!("{}", r.effect.a12),
            format!("{:?}", r.effect.category).to_lowercase(),
        ]);
    }
    t
}

/// Causes of every failed turn of kept episodes, grouped by (family, model).
pub fn causes_by_group(records: &[EpisodeRecord]) -> BTreeMap<(String, String), (Vec<FailureCause>, usize)> {
    let mut out: BTreeMap<(String, String), (Vec<FailureCause>, usize)> = BTreeMap::new();
    for r in records {
        let entry = out.entry((r.family.clone(), r.model_id.clone())).or_default();
        if r.excluded() {
            entry.1 += 1;
            continue;
        }
        entry.0.extend(r.turns.iter().filter_map(|t| t.cause.clone()));
    }
    out
}

/// Failure-cause percentages per (family, model). The least common
/// `tail_fraction` of all failures, counted over the whole table, is shown
/// as Other.
pub fn causes_table(records: &[EpisodeRecord], tail_fraction: f64) -> Result<Table, AdjudicatorError> {
    let groups = causes_by_group(records);
    let overall = CauseDistribution::from_causes(groups.values().flat_map(|(c, _)| c), &[]);
    let folded = tail_categories(&overall.counts, tail_fraction)?;
    let mut headers = vec!["PF", "Model", "N.Fail."];
    headers.extend(Category::ALL.iter().map(|c| c.as_str()));
    headers.push("Excl.");
    let mut table = Table::new(&headers);
    for ((family, model), (causes, excluded)) in &groups {
        let d = CauseDistribution::from_causes(causes, &folded);
        let mut row = vec![family.clone(), model.clone(), d.total.to_string()];
        row.extend(Category::ALL.iter().map(|&c| d.percent(c).map_or("-".into(), percent)));
        row.push(excluded.to_string());
        table.push(row);
    }
    Ok(table)
}

/// Failure counts per (family, model, category): histogram input.
pub fn failure_histogram(records: &[EpisodeRecord]) -> Table {
    let mut t = Table::new(&["family", "model", "category", "count"]);
    for ((family, model), (causes, _)) in causes_by_group(records) {
        let d = CauseDistribution::from_causes(&causes, &[]);
        for c in Category::ALL {
            t.push(vec![family.clone(), model.clone(), c.to_string(), d.counts.get(&c).copied().unwrap_or(0).to_string()]);
        }
    }
    t
}

fn median(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    Some(if s.len() % 2 == 1 { s[m] } else { 0.5 * (s[m - 1] + s[m]) })
}

pub fn duration_summary(rows: &[DurationRow]) -> Table {
    let mut t = Table::new(&[
        "PF", "Model", "n(turn 1)", "median turn 1 [s]", "n(success)", "median to success [s]", "p", "A12", "note",
    ]);
    let fmt = |x: Option<f64>| x.map_or("-".into(), |v| format!("{v:.3}"));
    for r in rows {
        t.push(vec![
            family_label(&r.key.family, r.key.variant),
            r.key.model.clone(),
            r.turn1.len().to_string(),
            fmt(median(&r.turn1)),
            r.to_success.len().to_string(),
            fmt(median(&r.to_success)),
            r.mwu.map_or("-".into(), |m| format!("{:.3}", m.p_value)),
            r.effect.map_or("-".into(), |e| format!("{:.2} ({})", e.a12, e.category.letter())),
            r.note.clone().unwrap_or_default(),
        ]);
    }
    t
}

/// Two series per group, one value per row; plot on a log axis.
pub fn duration_series(rows: &[DurationRow]) -> Table {
    let mut t = Table::new(&["family", "variant", "model", "series", "index", "seconds"]);
    for r in rows {
        for (series, values) in [("turn1", &r.turn1), ("to_success", &r.to_success)] {
            for (i, v) in values.iter().enumerate() {
                t.push(vec![
                    r.key.family.clone(),
                    r.key.variant.to_string(),
                    r.key.model.clone(),
                    series.to_string(),
                    i.to_string(),
                    format!("{v}"),
                ]);
            }
        }
    }
    t
}
