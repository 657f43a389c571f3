mod common;

use common::*;
use qloop_core::adjudicator::Category;
use qloop_core::episode::{Campaign, EpisodeRecord, EpisodeStatus};
use qloop_core::prompt::Variant;
use qloop_core::stats::{indicator, success_at as rate_at};

const TFIM: &str = "tfim-2-1-1";
const SQRT5: f64 = 2.23606797749979;

fn run_one(fixtures: &std::path::Path, variant: Variant, turns: usize) -> EpisodeRecord {
    let (_d, repo) = tmp();
    let c = Campaign::prepare(replay_campaign(fixtures, &repo, &[TFIM], 1, 1, turns, &[variant])).unwrap();
    let s = c.run(&|_| {}).unwrap();
    assert!(s.failed.is_empty(), "{:?}", s.failed);
    let mut records = c.records().unwrap();
    assert_eq!(records.len(), 1);
    records.pop().unwrap()
}

#[test]
fn success_turn_matches_fixture() {
    for k in [1, 2, 5, 10] {
        let (_f, fx) = tmp();
        write_fixtures(&fx.join(TFIM), &success_at(k, -SQRT5));
        let r = run_one(&fx, Variant::Standard, 10);
        assert_eq!(r.success_turn, Some(k));
        assert_eq!(r.turns.len(), k);
        assert_eq!(r.status, EpisodeStatus::Complete);
        for t in 1..=10 {
            let rate = rate_at(std::slice::from_ref(&r), t).into_values().next().unwrap();
            assert_eq!(rate, Some(indicator(Some(k), t)));
        }
        for turn in &r.turns[..k - 1] {
            assert_eq!(turn.cause.as_ref().unwrap().category, Category::Gen);
            assert_eq!(turn.cause.as_ref().unwrap().matched_keyword.as_deref(), Some("NameError"));
        }
        assert!(r.turns[k - 1].cause.is_none());
        assert!(r.total_duration_s >= r.turn1_duration_s);
    }
}

#[test]
fn budget_exhaustion() {
    let (_f, fx) = tmp();
    write_fixtures(&fx.join(TFIM), &(1..=5).map(broken_reply).collect::<Vec<_>>());
    let r = run_one(&fx, Variant::Standard, 3);
    assert_eq!(r.turns.len(), 3);
    assert_eq!(r.success_turn, None);
}

#[test]
fn feedback_carries_previous_output() {
    let (_f, fx) = tmp();
    write_fixtures(&fx.join(TFIM), &success_at(2, -SQRT5));
    let std_run = run_one(&fx, Variant::Standard, 5);
    let out1 = &std_run.turns[0].execution.as_ref().unwrap();
    assert!(out1.stderr.contains("NameError: name 'undefined_energy_1' is not defined"));
    let prompt2 = &std_run.turns[1].prompt;
    assert!(prompt2.contains(&out1.stdout));
    assert!(prompt2.contains(&out1.stderr));
    assert!(!prompt2.contains("-2.236"), "reference leaked into the standard prompt");
    assert!(!std_run.turns[0].prompt.contains("-2.236"));

    let inf_run = run_one(&fx, Variant::Informed, 5);
    let prompt2 = &inf_run.turns[1].prompt;
    assert!(prompt2.contains(&inf_run.turns[0].execution.as_ref().unwrap().stderr));
    assert!(prompt2.contains(&format!("{}", inf_run.reference)));
    assert!(!inf_run.turns[0].prompt.contains("-2.236"));
}

#[test]
fn prose_reply_is_a_generation_failure() {
    let (_f, fx) = tmp();
    write_fixtures(
        &fx.join(TFIM),
        &["The ground state energy is about minus two point two.".to_string(), correct_reply(-SQRT5)],
    );
    let r = run_one(&fx, Variant::Standard, 3);
    assert_eq!(r.success_turn, Some(2));
    assert!(r.turns[0].execution.is_none());
    assert_eq!(r.turns[0].cause.as_ref().unwrap().category, Category::Gen);
    assert!(r.turns[1].prompt.contains("no script was found"));
}

#[test]
fn wrong_value_is_numerical_error() {
    let (_f, fx) = tmp();
    write_fixtures(&fx.join(TFIM), &[wrong_reply()]);
    let r = run_one(&fx, Variant::Standard, 1);
    assert_eq!(r.turns[0].cause.as_ref().unwrap().category, Category::NumErr);
    assert_eq!(r.turns[0].verdict.as_ref().unwrap().observed, Some(12345.0));
}

#[test]
fn infrastructure_errors_do_not_consume_turns() {
    let (_f, fx) = tmp();
    let d = fx.join(TFIM);
    write_fixtures(&d, &[]);
    std::fs::write(d.join("01.err"), "HTTP 503").unwrap();
    std::fs::write(d.join("02.err"), "HTTP 503").unwrap();
    std::fs::write(d.join("03.md"), correct_reply(-SQRT5)).unwrap();
    let r = run_one(&fx, Variant::Standard, 2);
    assert_eq!(r.success_turn, Some(1));
    assert_eq!(r.infrastructure_errors.len(), 2);
    assert_eq!(r.status, EpisodeStatus::Complete);

    for i in 1..=3 {
        std::fs::write(d.join(format!("0{i}.err")), "HTTP 503").unwrap();
    }
    std::fs::remove_file(d.join("03.md")).unwrap();
    std::fs::write(d.join("04.md"), correct_reply(-SQRT5)).unwrap();
    let r = run_one(&fx, Variant::Standard, 2);
    assert_eq!(r.status, EpisodeStatus::Invalid);
    assert!(r.excluded());
    assert_eq!(r.success_turn, None);
    assert!(r.turns.is_empty());
    assert_eq!(r.infrastructure_errors.len(), 3);
    assert_eq!(rate_at(std::slice::from_ref(&r), 10).into_values().next().unwrap(), None);
}

#[test]
fn artifacts_written_per_turn() {
    let (_f, fx) = tmp();
    write_fixtures(&fx.join(TFIM), &success_at(2, -SQRT5));
    let (_d, repo) = tmp();
    let c = Campaign::prepare(replay_campaign(&fx, &repo, &[TFIM], 1, 1, 3, &[Variant::Standard])).unwrap();
    let s = c.run(&|_| {}).unwrap();
    let dir = s.records[0].parent().unwrap().to_path_buf();
    assert!(dir.ends_with("condensedmatter-tfim/tfim-2-1-1/replay-model/standard/rep1"));
    for f in ["prompt.txt", "response.txt", "script.py", "stdout.txt", "stderr.txt", "meta.json"] {
        assert!(dir.join("turn01").join(f).is_file(), "{f}");
        assert!(dir.join("turn02").join(f).is_file(), "{f}");
    }
    assert!(!dir.join("turn03").exists());
    let stderr = std::fs::read_to_string(dir.join("turn01/stderr.txt")).unwrap();
    assert!(stderr.contains("NameError"));
    assert!(c.directory().join("campaign.json").is_file());
}

#[test]
fn campaign_counts_and_resume() {
    let (_f, fx) = tmp();
    write_fixtures(&fx.join("default"), &success_at(2, -SQRT5));
    let (_d, repo) = tmp();
    let cfg = replay_campaign(&fx, &repo, &[TFIM], 1, 2, 3, &[Variant::Standard]);
    let s = Campaign::prepare(cfg.clone()).unwrap().run(&|_| {}).unwrap();
    assert_eq!((s.planned, s.new_episodes, s.skipped), (2, 2, 0));
    let s = Campaign::prepare(cfg).unwrap().run(&|_| {}).unwrap();
    assert_eq!((s.new_episodes, s.skipped), (0, 2));

    let both = replay_campaign(&fx, &repo, &[TFIM], 1, 2, 3, &[Variant::Standard, Variant::Informed]);
    let c = Campaign::prepare(both).unwrap();
    c.run(&|_| {}).unwrap();
    let recs = c.records().unwrap();
    let n_std = recs.iter().filter(|r| r.variant == Variant::Standard).count();
    let n_inf = recs.iter().filter(|r| r.variant == Variant::Informed).count();
    assert_eq!((n_std, n_inf), (2, 2));
}

#[test]
fn reference_cached_per_instance() {
    let (_f, fx) = tmp();
    write_fixtures(&fx.join("default"), &[correct_reply(-SQRT5)]);
    let (_d, repo) = tmp();
    let c = Campaign::prepare(replay_campaign(&fx, &repo, &[TFIM, "maxcut-triangle"], 1, 3, 1, &[Variant::Standard]))
        .unwrap();
    c.run(&|_| {}).unwrap();
    assert_eq!(c.cache.len(), 2);
}
