//! Report layouts checked against published table cells.

mod common;

use common::*;
use qloop_core::adjudicator::{aggregate_causes, Category, FailureCause};
use qloop_core::episode::{Campaign, EpisodeRecord, EpisodeStatus};
use qloop_core::prompt::Variant;
use qloop_core::report::{causes_table, comparison_table, format_cell, success_table, DEFAULT_TAIL_FRACTION};
use qloop_core::stats::{compare_turns, mann_whitney_normal, vargha_delaney, SampleUnit};

/// A real one-turn record used as a template for synthetic ones.
fn template() -> EpisodeRecord {
    let (_f, fx) = tmp();
    write_fixtures(&fx.join("default"), &[wrong_reply()]);
    let (_d, repo) = tmp();
    let c = Campaign::prepare(replay_campaign(&fx, &repo, &["tfim-2-1-1"], 1, 1, 1, &[Variant::Standard])).unwrap();
    c.run(&|_| {}).unwrap();
    let mut r = c.records().unwrap().pop().unwrap();
    r.turn_budget = 10;
    r
}

fn with_causes(base: &EpisodeRecord, family: &str, model: &str, causes: &[Category]) -> EpisodeRecord {
    let mut r = base.clone();
    r.family = family.into();
    r.model_id = model.into();
    r.success_turn = None;
    let turn = r.turns[0].clone();
    r.turns = causes
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let mut t = turn.clone();
            t.turn = i + 1;
            t.cause = Some(FailureCause::new(c));
            t
        })
        .collect();
    r
}

fn repeat(c: Category, n: usize) -> Vec<Category> {
    vec![c; n]
}

#[test]
fn numerical_error_dominated_row() {
    // 43 failures: 39 numerical, 2 API, 2 unclassified.
    let base = template();
    let mut causes = repeat(Category::NumErr, 39);
    causes.extend(repeat(Category::Api, 2));
    causes.extend(repeat(Category::Other, 2));
    let recs = vec![
        with_causes(&base, "PF5", "GPT-5.2", &causes[..10]),
        with_causes(&base, "PF5", "GPT-5.2", &causes[10..20]),
        with_causes(&base, "PF5", "GPT-5.2", &causes[20..30]),
        with_causes(&base, "PF5", "GPT-5.2", &causes[30..]),
    ];
    let t = causes_table(&recs, 0.0).unwrap();
    assert_eq!(t.headers, ["PF", "Model", "N.Fail.", "NumErr", "Timeout", "API", "Deps", "Type", "Gen", "Other", "Excl."]);
    assert_eq!(t.rows[0], ["PF5", "GPT-5.2", "43", "90.7%", "0.0%", "4.7%", "0.0%", "0.0%", "0.0%", "4.7%", "0"]);

    let flat: Vec<FailureCause> = causes.iter().map(|&c| FailureCause::new(c)).collect();
    let d = aggregate_causes(&flat, DEFAULT_TAIL_FRACTION).unwrap();
    assert_eq!(d.dominant(), Some(Category::NumErr));
    // API (2 of 43) sits in the least common quarter and joins Other.
    assert_eq!(d.reported_count(Category::Api), 0);
    assert_eq!(d.reported_count(Category::Other), 4);
    assert!((d.percent(Category::NumErr).unwrap() - 90.7).abs() < 0.05);
}

#[test]
fn significant_large_effect_cell() {
    let base = template();
    let mut recs = Vec::new();
    for inst in 0..4 {
        for rep in 1..=10 {
            let mut r = base.clone();
            r.family = "PF2".into();
            r.instance_id = format!("i{inst}");
            r.repetition = rep;
            r.success_turn = Some(if rep <= 8 { 3 } else { 7 });
            recs.push(r);
        }
    }
    let cmp = compare_turns(&recs, 1, 5, SampleUnit::Episode).unwrap();
    assert_eq!(cmp.rows.len(), 1);
    let t = comparison_table(&cmp);
    assert_eq!(t.rows[0][..2], ["PF2".to_string(), "1 vs. 5".to_string()]);
    assert_eq!(t.rows[0][2], "< 0.05 (L)");
}

#[test]
fn small_effect_cell_from_instance_samples() {
    // One instance of four gains a success, compared asymptotically.
    let low = [0.0; 4];
    let high = [1.0, 0.0, 0.0, 0.0];
    let m = mann_whitney_normal(&low, &high).unwrap();
    let e = vargha_delaney(&high, &low).unwrap();
    assert!((m.p_value - 0.4533).abs() < 1e-4, "{}", m.p_value);
    assert_eq!(e.a12, 0.625);
    assert_eq!(format_cell(&m, &e), "0.45 (S)");
}

#[test]
fn excluded_episodes_are_counted_separately() {
    let base = template();
    let mut kept = base.clone();
    kept.success_turn = Some(2);
    let mut gone = base.clone();
    gone.status = EpisodeStatus::Invalid;
    gone.repetition = 2;
    gone.turns.clear();
    let t = success_table(&[kept, gone], &[1, 2, 10]);
    assert_eq!(t.rows[0][2..], ["1", "1", "0.00", "1.00", "1.00"].map(String::from));
    let c = causes_table(std::slice::from_ref(&base), DEFAULT_TAIL_FRACTION).unwrap();
    assert_eq!(c.rows[0][3], "100.0%");
}
