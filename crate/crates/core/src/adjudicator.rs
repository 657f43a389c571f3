//! Numeric verification against the reference value and rule-based
//! classification of failed turns.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::registry::Tolerance;
use crate::sandbox::{parse_result, ExecutionResult, ParseFailure};

pub const BUNDLED_TAXONOMY: &str = include_str!("../data/taxonomy.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    NumErr,
    Timeout,
    #[serde(rename = "API")]
    Api,
    Deps,
    Type,
    Gen,
    Other,
}

impl Category {
    /// Report column order.
    pub const ALL: [Category; 7] = [
        Category::NumErr,
        Category::Timeout,
        Category::Api,
        Category::Deps,
        Category::Type,
        Category::Gen,
        Category::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::NumErr => "NumErr",
            Category::Timeout => "Timeout",
            Category::Api => "API",
            Category::Deps => "Deps",
            Category::Type => "Type",
            Category::Gen => "Gen",
            Category::Other => "Other",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = AdjudicatorError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| AdjudicatorError::Taxonomy(format!("unknown category {s:?}")))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdjudicatorError {
    #[error("reference value {0} is not finite")]
    NonFiniteReference(f64),
    #[error("classification is only defined for failed verdicts")]
    ClassifyPass,
    #[error("tail fraction {0} outside [0, 1)")]
    TailFraction(f64),
    #[error("taxonomy: {0}")]
    Taxonomy(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Pass,
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailReason {
    ParseFailure,
    OutOfTolerance,
    ExecutionFailure,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub outcome: Outcome,
    pub observed: Option<f64>,
    pub reference: f64,
    pub abs_deviation: Option<f64>,
    /// `abs_deviation / |reference|`; absent for a zero reference.
    pub rel_deviation: Option<f64>,
    /// Largest accepted deviation for this reference.
    pub bound: f64,
    pub reason: Option<FailReason>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        self.outcome == Outcome::Pass
    }

    fn failed(reference: f64, bound: f64, reason: FailReason, detail: impl Into<String>) -> Self {
        Verdict {
            outcome: Outcome::Fail,
            observed: None,
            reference,
            abs_deviation: None,
            rel_deviation: None,
            bound,
            reason: Some(reason),
            detail: Some(detail.into()),
        }
    }

    fn with_observed(mut self, observed: f64) -> Self {
        let abs = (observed - self.reference).abs();
        self.observed = Some(observed);
        self.abs_deviation = Some(abs);
        self.rel_deviation = (self.reference != 0.0).then(|| abs / self.reference.abs());
        self
    }
}

/// Pass iff `|observed - reference| <= max(absolute, relative * |reference|)`.
pub fn verify(
    observed: Result<f64, &ParseFailure>,
    reference: f64,
    tol: &Tolerance,
) -> Result<Verdict, AdjudicatorError> {
    if !reference.is_finite() {
        return Err(AdjudicatorError::NonFiniteReference(reference));
    }
    let bound = tol.bound(reference);
    Ok(match observed {
        Err(p) => Verdict::failed(reference, bound, FailReason::ParseFailure, p.to_string()),
        Ok(o) => {
            let mut v = Verdict::failed(reference, bound, FailReason::OutOfTolerance, "").with_observed(o);
            if v.abs_deviation.is_some_and(|d| d <= bound) {
                v.outcome = Outcome::Pass;
                v.reason = None;
                v.detail = None;
            } else {
                v.detail = Some(format!("deviation {:e} exceeds {:e}", v.abs_deviation.unwrap_or(f64::NAN), bound));
            }
            v
        }
    })
}

/// Verdict for an executed script. Timeouts and non-zero exits fail
/// regardless of stdout; a parsed value is still recorded for them.
pub fn judge(
    exec: &ExecutionResult,
    reference: f64,
    tol: &Tolerance,
    lenient: bool,
) -> Result<Verdict, AdjudicatorError> {
    let parsed = parse_result(&exec.stdout, lenient);
    let v = verify(parsed.as_ref().copied(), reference, tol)?;
    let reason = if exec.timed_out {
        FailReason::Timeout
    } else if !exec.exit_status.success() {
        FailReason::ExecutionFailure
    } else {
        return Ok(v);
    };
    let mut failed = Verdict::failed(reference, v.bound, reason, format!("{:?}", exec.exit_status));
    if let Ok(o) = parsed {
        failed = failed.with_observed(o);
    }
    Ok(failed)
}

/// Verdict for a reply from which no script could be extracted.
pub fn no_code_verdict(reference: f64, tol: &Tolerance) -> Verdict {
    Verdict::failed(reference, tol.bound(reference), FailReason::ParseFailure, "response contains no extractable code")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureCause {
    pub category: Category,
    /// Set exactly when a keyword rule assigned the category.
    pub matched_keyword: Option<String>,
}

impl FailureCause {
    pub fn new(category: Category) -> Self {
        Self { category, matched_keyword: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaxonomyEntry {
    pub id: Category,
    pub cause: String,
    pub explanation: String,
    pub keywords: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Taxonomy {
    pub precedence: Vec<Category>,
    #[serde(rename = "category")]
    pub categories: Vec<TaxonomyEntry>,
}

impl Taxonomy {
    pub fn bundled() -> Self {
        Self::from_toml(BUNDLED_TAXONOMY).expect("bundled taxonomy is valid")
    }

    pub fn load(path: &Path) -> Result<Self, AdjudicatorError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AdjudicatorError::Taxonomy(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, AdjudicatorError> {
        let t: Taxonomy = toml::from_str(text).map_err(|e| AdjudicatorError::Taxonomy(e.to_string()))?;
        t.check()?;
        Ok(t)
    }

    fn check(&self) -> Result<(), AdjudicatorError> {
        let bad = |m: String| Err(AdjudicatorError::Taxonomy(m));
        let mut seen = BTreeMap::new();
        for e in &self.categories {
            if seen.insert(e.id, ()).is_some() {
                return bad(format!("category {} listed twice", e.id));
            }
            if matches!(e.id, Category::NumErr | Category::Timeout | Category::Other) && !e.keywords.is_empty() {
                return bad(format!("category {} is not keyword-based", e.id));
            }
            if !e.keywords.is_empty() && !self.precedence.contains(&e.id) {
                return bad(format!("category {} has keywords but no precedence", e.id));
            }
            if e.keywords.iter().any(|k| k.is_empty()) {
                return bad(format!("category {} has an empty keyword", e.id));
            }
        }
        let mut keywords = BTreeMap::new();
        for e in &self.categories {
            for k in &e.keywords {
                if let Some(prev) = keywords.insert(k.as_str(), e.id) {
                    return bad(format!("keyword {k:?} listed under both {prev} and {}", e.id));
                }
            }
        }
        for (i, c) in self.precedence.iter().enumerate() {
            if self.precedence[..i].contains(c) {
                return bad(format!("category {c} repeated in precedence"));
            }
        }
        Ok(())
    }

    pub fn entry(&self, category: Category) -> Option<&TaxonomyEntry> {
        self.categories.iter().find(|e| e.id == category)
    }

    /// First category in precedence order with a keyword occurring in `text`,
    /// together with the first such keyword in table order.
    pub fn match_keywords<'a>(&'a self, text: &str) -> Option<(Category, &'a str)> {
        self.precedence.iter().find_map(|&c| {
            let entry = self.entry(c)?;
            entry.keywords.iter().find(|k| text.contains(k.as_str())).map(|k| (c, k.as_str()))
        })
    }
}

/// Assigns a cause to a failed turn. `exec` is `None` when the reply held no
/// extractable code.
pub fn classify(
    taxonomy: &Taxonomy,
    exec: Option<&ExecutionResult>,
    verdict: &Verdict,
) -> Result<FailureCause, AdjudicatorError> {
    if verdict.passed() {
        return Err(AdjudicatorError::ClassifyPass);
    }
    let Some(exec) = exec else {
        return Ok(FailureCause::new(Category::Gen));
    };
    if exec.timed_out {
        return Ok(FailureCause::new(Category::Timeout));
    }
    let text = format!("{}\n{}", exec.stderr, exec.stdout);
    if let Some((category, keyword)) = taxonomy.match_keywords(&text) {
        return Ok(FailureCause { category, matched_keyword: Some(keyword.to_string()) });
    }
    if exec.clean() && matches!(verdict.reason, Some(FailReason::OutOfTolerance | FailReason::ParseFailure)) {
        return Ok(FailureCause::new(Category::NumErr));
    }
    Ok(FailureCause::new(Category::Other))
}

/// Failure counts per category with the rare tail reported as Other.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CauseDistribution {
    pub total: usize,
    /// Counts by assigned label, before folding.
    pub counts: BTreeMap<Category, usize>,
    /// Categories reported under Other.
    pub folded: Vec<Category>,
}

impl CauseDistribution {
    pub fn from_causes<'a>(causes: impl IntoIterator<Item = &'a FailureCause>, folded: &[Category]) -> Self {
        let mut counts = BTreeMap::new();
        let mut total = 0;
        for c in causes {
            *counts.entry(c.category).or_insert(0) += 1;
            total += 1;
        }
        Self { total, counts, folded: folded.iter().copied().filter(|&c| c != Category::Other).collect() }
    }

    /// Count shown in the report column for `category`.
    pub fn reported_count(&self, category: Category) -> usize {
        let own = |c: Category| self.counts.get(&c).copied().unwrap_or(0);
        match category {
            Category::Other => own(Category::Other) + self.folded.iter().map(|&c| own(c)).sum::<usize>(),
            c if self.folded.contains(&c) => 0,
            c => own(c),
        }
    }

    /// Reported percentage, or `None` for an empty distribution.
    pub fn percent(&self, category: Category) -> Option<f64> {
        (self.total > 0).then(|| 100.0 * self.reported_count(category) as f64 / self.total as f64)
    }

    /// Non-zero reported percentages in column order.
    pub fn table(&self) -> BTreeMap<Category, f64> {
        Category::ALL
            .into_iter()
            .filter_map(|c| self.percent(c).filter(|&p| p > 0.0).map(|p| (c, p)))
            .collect()
    }

    /// Category with the largest reported share; ties go to the earlier column.
    pub fn dominant(&self) -> Option<Category> {
        Category::ALL
            .into_iter()
            .filter(|&c| self.reported_count(c) > 0)
            .fold(None, |best: Option<Category>, c| match best {
                Some(b) if self.reported_count(b) >= self.reported_count(c) => Some(b),
                _ => Some(c),
            })
    }
}

/// Least common categories whose cumulative share stays within `tail_fraction`.
pub fn tail_categories(counts: &BTreeMap<Category, usize>, tail_fraction: f64) -> Result<Vec<Category>, AdjudicatorError> {
    if !(0.0..1.0).contains(&tail_fraction) {
        return Err(AdjudicatorError::TailFraction(tail_fraction));
    }
    let total: usize = counts.values().sum();
    let mut ranked: Vec<(Category, usize)> =
        counts.iter().filter(|&(&c, &n)| n > 0 && c != Category::Other).map(|(&c, &n)| (c, n)).collect();
    ranked.sort_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)));
    let mut cumulative = 0usize;
    let mut folded = Vec::new();
    for (c, n) in ranked {
        cumulative += n;
        if cumulative as f64 > tail_fraction * total as f64 {
            break;
        }
        folded.push(c);
    }
    folded.sort();
    Ok(folded)
}

/// Distribution of `causes` with the least common `tail_fraction` of
/// failures folded into Other.
pub fn aggregate_causes(causes: &[FailureCause], tail_fraction: f64) -> Result<CauseDistribution, AdjudicatorError> {
    let raw = CauseDistribution::from_causes(causes, &[]);
    let folded = tail_categories(&raw.counts, tail_fraction)?;
    Ok(CauseDistribution { folded, ..raw })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sandbox::ExitStatus;

    fn tol() -> Tolerance {
        Tolerance { absolute: 1e-2, relative: 1e-3 }
    }

    fn exec(code: i32, stdout: &str, stderr: &str, timed_out: bool) -> ExecutionResult {
        ExecutionResult {
            exit_status: if timed_out { ExitStatus::Killed(9) } else { ExitStatus::Code(code) },
            stdout: stdout.into(),
            stderr: stderr.into(),
            duration_s: 0.1,
            timed_out,
        }
    }

    fn causes(spec: &[(Category, usize)]) -> Vec<FailureCause> {
        spec.iter().flat_map(|&(c, n)| std::iter::repeat_n(FailureCause::new(c), n)).collect()
    }

    #[test]
    fn verify_examples() {
        let r = -2.2360680;
        let v = verify(Ok(-2.236), r, &tol()).unwrap();
        assert!(v.passed());
        assert!(v.abs_deviation.unwrap() < 1e-4);
        let v = verify(Ok(-1.0), r, &tol()).unwrap();
        assert_eq!(v.reason, Some(FailReason::OutOfTolerance));
        assert_eq!(v.observed, Some(-1.0));
        assert!((v.abs_deviation.unwrap() - 1.236068).abs() < 1e-12);
        let v = verify(Err(&ParseFailure::NoResultLine), r, &tol()).unwrap();
        assert_eq!(v.reason, Some(FailReason::ParseFailure));
        assert_eq!(v.observed, None);
        assert_eq!(v.detail.as_deref(), Some("no RESULT line"));
        assert!(verify(Ok(0.0), f64::NAN, &tol()).is_err());
    }

    #[test]
    fn relative_bound_for_large_reference() {
        let v = verify(Ok(1000.9), 1000.0, &tol()).unwrap();
        assert!(v.passed());
        assert!(!verify(Ok(1001.1), 1000.0, &tol()).unwrap().passed());
    }

    #[test]
    fn judge_reasons() {
        let t = tol();
        assert!(judge(&exec(0, "RESULT: 2.0\n", "", false), 2.0, &t, false).unwrap().passed());
        let v = judge(&exec(1, "RESULT: 2.0\n", "Traceback", false), 2.0, &t, false).unwrap();
        assert_eq!(v.reason, Some(FailReason::ExecutionFailure));
        assert_eq!(v.observed, Some(2.0));
        let v = judge(&exec(0, "RESULT: 2.0\n", "", true), 2.0, &t, false).unwrap();
        assert_eq!(v.reason, Some(FailReason::Timeout));
        let v = judge(&exec(0, "energy 2.0\n", "", false), 2.0, &t, false).unwrap();
        assert_eq!(v.reason, Some(FailReason::ParseFailure));
        assert!(judge(&exec(0, "energy 2.0\n", "", false), 2.0, &t, true).unwrap().passed());
    }

    #[test]
    fn classify_examples() {
        let tax = Taxonomy::bundled();
        let fail = verify(Err(&ParseFailure::NoResultLine), 1.0, &tol()).unwrap();
        let e = exec(1, "", "Traceback\nModuleNotFoundError: No module named 'x'\n", false);
        let c = classify(&tax, Some(&e), &fail).unwrap();
        assert_eq!(c.category, Category::Deps);
        assert_eq!(c.matched_keyword.as_deref(), Some("ModuleNotFoundError"));
        let e = exec(0, "", "ModuleNotFoundError", true);
        assert_eq!(classify(&tax, Some(&e), &fail).unwrap(), FailureCause::new(Category::Timeout));
        let wrong = verify(Ok(3.0), 1.0, &tol()).unwrap();
        let e = exec(0, "RESULT: 3.0\n", "", false);
        assert_eq!(classify(&tax, Some(&e), &wrong).unwrap(), FailureCause::new(Category::NumErr));
        let e = exec(139, "", "Segmentation fault", false);
        assert_eq!(classify(&tax, Some(&e), &fail).unwrap(), FailureCause::new(Category::Other));
        assert_eq!(classify(&tax, None, &no_code_verdict(1.0, &tol())).unwrap(), FailureCause::new(Category::Gen));
        let pass = verify(Ok(1.0), 1.0, &tol()).unwrap();
        assert_eq!(classify(&tax, Some(&e), &pass), Err(AdjudicatorError::ClassifyPass));
    }

    #[test]
    fn precedence_under_multiple_keywords() {
        let tax = Taxonomy::bundled();
        let fail = verify(Err(&ParseFailure::NoResultLine), 1.0, &tol()).unwrap();
        let e = exec(1, "", "ValueError: x\nNameError: y\nImportError: z\nTypeError: w", false);
        assert_eq!(classify(&tax, Some(&e), &fail).unwrap().category, Category::Deps);
        let e = exec(1, "", "TypeError: unsupported operand type(s) for +", false);
        let c = classify(&tax, Some(&e), &fail).unwrap();
        assert_eq!((c.category, c.matched_keyword.as_deref()), (Category::Api, Some("TypeError")));
        let e = exec(1, "", "KeyError: 'a'\nSyntaxError: invalid syntax", false);
        assert_eq!(classify(&tax, Some(&e), &fail).unwrap().category, Category::Gen);
    }

    #[test]
    fn taxonomy_rejects_bad_tables() {
        let dup = BUNDLED_TAXONOMY.replace("\"KeyError\",", "\"KeyError\", \"NameError\",");
        assert!(Taxonomy::from_toml(&dup).is_err());
        let numerr = BUNDLED_TAXONOMY.replacen("keywords = []", "keywords = [\"nan\"]", 1);
        assert!(Taxonomy::from_toml(&numerr).is_err());
        let noprec = BUNDLED_TAXONOMY.replace("precedence = [\"Deps\", \"Gen\", \"API\", \"Type\"]", "precedence = [\"Deps\"]");
        assert!(Taxonomy::from_toml(&noprec).is_err());
    }

    #[test]
    fn aggregate_examples() {
        let d = aggregate_causes(&causes(&[(Category::Deps, 10)]), 0.25).unwrap();
        assert_eq!(d.table(), BTreeMap::from([(Category::Deps, 100.0)]));
        let d = aggregate_causes(&causes(&[(Category::NumErr, 3), (Category::Gen, 1)]), 0.0).unwrap();
        assert_eq!(d.table(), BTreeMap::from([(Category::NumErr, 75.0), (Category::Gen, 25.0)]));
        let d = aggregate_causes(&causes(&[(Category::NumErr, 3), (Category::Gen, 1)]), 0.25).unwrap();
        assert_eq!(d.table(), BTreeMap::from([(Category::NumErr, 75.0), (Category::Other, 25.0)]));
        assert_eq!(d.counts[&Category::Gen], 1);
        assert!(aggregate_causes(&[], 0.25).unwrap().table().is_empty());
        assert!(aggregate_causes(&[], 1.0).is_err());
    }

    #[test]
    fn tail_folds_least_common_first() {
        let c = causes(&[(Category::NumErr, 60), (Category::Api, 20), (Category::Type, 10), (Category::Gen, 5), (Category::Deps, 5)]);
        let d = aggregate_causes(&c, 0.25).unwrap();
        assert_eq!(d.folded, vec![Category::Deps, Category::Type, Category::Gen]);
        assert_eq!(d.reported_count(Category::Other), 20);
        assert_eq!(d.dominant(), Some(Category::NumErr));
    }
}
