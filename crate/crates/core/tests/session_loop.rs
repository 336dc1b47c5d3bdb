use std::collections::HashSet;

use activelabel::data::{gen_synthetic, ClassId, Dataset, LabelSource};
use activelabel::eval::Selector;
use activelabel::session::{
    run_session, warmup_random_labels, Session, SessionConfig, SessionState, SessionStatus, SimulatedOracle,
};
use activelabel::Error;

fn small_dataset() -> Dataset {
    gen_synthetic(3, 2, 40, 3.0, 11).unwrap()
}

fn quick(n: usize, r: usize, seed: u64) -> SessionConfig {
    let mut cfg = SessionConfig::new("mixture", n, r, seed);
    cfg.schedule.epochs = 10 * r;
    cfg
}

fn check_bookkeeping(state: &SessionState, n: usize, r: usize) {
    assert_eq!(state.status, SessionStatus::Complete);
    assert_eq!(state.budget_labels(), n, "n={n} r={r}");
    assert!(state.labels.iter().all(|l| l.source != LabelSource::RandomWarmup));
    let ids: HashSet<u64> = state.labels.iter().map(|l| l.sample_id).collect();
    assert_eq!(ids.len(), n, "duplicate query for n={n} r={r}");
    assert_eq!(state.history.len(), r);
    assert_eq!(state.current_round, r);
    assert!(state.pending_query.is_empty());
    for (k, quota) in state.plan.per_round.iter().enumerate() {
        let in_round = state.labels.iter().filter(|l| l.round == k + 1).count();
        assert_eq!(in_round, *quota);
        assert_eq!(state.history[k].labeled_count, state.plan.cumulative(k + 1));
    }
}

#[test]
fn completed_sessions_hold_exactly_the_budget() {
    let ds = small_dataset();
    for (n, r) in [(12, 3), (13, 3), (10, 4), (7, 7), (20, 1), (23, 5), (5, 2)] {
        for selector in [Selector::LeastConfidence, Selector::Random, Selector::Margin] {
            let mut cfg = quick(n, r, 3);
            cfg.selector = selector;
            let outcome = run_session(cfg, &ds).unwrap();
            check_bookkeeping(&outcome.state, n, r);
        }
    }
}

#[test]
fn budget_errors() {
    let ds = small_dataset();
    assert!(matches!(
        Session::start("x", quick(200, 2, 1), &ds),
        Err(Error::BudgetExceedsPool { budget: 200, pool: 96 })
    ));
    assert!(matches!(
        Session::start("x", quick(3, 5, 1), &ds),
        Err(Error::InvalidBudget(_))
    ));
    assert!(Session::start("x", quick(0, 1, 1), &ds).is_err());
}

#[test]
fn mean_pool_uncertainty_falls_over_rounds() {
    let ds = gen_synthetic(4, 2, 100, 4.0, 8).unwrap();
    for seed in 0..5 {
        let mut cfg = SessionConfig::new("mixture", 100, 5, seed);
        cfg.epochs_per_round = Some(200);
        let outcome = run_session(cfg, &ds).unwrap();
        let first = outcome.state.initial.mean_pool_uncertainty;
        let last = outcome.history.last().unwrap().mean_pool_uncertainty;
        assert!(last < first, "seed {seed}: {first} -> {last}");
    }
}

#[test]
fn warmup_labels_are_uniform() {
    let ds = gen_synthetic(4, 2, 1000, 3.0, 1).unwrap();
    let labels = warmup_random_labels(&ds, 99);
    assert_eq!(labels.len(), ds.len());
    let n = ds.len() as f64;
    let p = 0.25;
    let sigma = (n * p * (1.0 - p)).sqrt();
    for k in 0..4 {
        let count = labels.iter().filter(|l| l.label == ClassId(k)).count() as f64;
        assert!((count - n * p).abs() < 4.0 * sigma, "class {k}: {count}");
    }
}

#[test]
fn submit_is_atomic_on_bad_answers() {
    let ds = small_dataset();
    let mut session = Session::start("s", quick(9, 3, 4), &ds).unwrap();
    let before = session.state().clone();
    let pending = before.pending_query.clone();
    let mut answers: Vec<(u64, ClassId)> = pending.iter().map(|&id| (id, ClassId(0))).collect();

    let partial = &answers[..2];
    assert!(matches!(
        session.submit_labels(partial, LabelSource::Human),
        Err(Error::MissingAnswers(1))
    ));
    answers[0].1 = ClassId(7);
    assert!(matches!(
        session.submit_labels(&answers, LabelSource::Human),
        Err(Error::LabelOutOfRange { .. })
    ));
    answers[0].1 = ClassId(0);
    let mut dup = answers.clone();
    dup[2] = dup[0];
    assert!(matches!(
        session.submit_labels(&dup, LabelSource::Human),
        Err(Error::DuplicateAnswer(_))
    ));
    let outsider = session.pool().ids().find(|id| !pending.contains(id)).unwrap();
    let mut stray = answers.clone();
    stray[1].0 = outsider;
    assert!(matches!(
        session.submit_labels(&stray, LabelSource::Human),
        Err(Error::NotPending(_))
    ));
    assert_eq!(session.state(), &before);

    session.submit_labels(&answers, LabelSource::Human).unwrap();
    assert_eq!(session.state().current_round, 1);
    assert!(session
        .state()
        .labels
        .iter()
        .all(|l| l.round == 1 && l.source == LabelSource::Human));
}

#[test]
fn resumed_session_continues_identically() {
    let ds = small_dataset();
    let oracle = SimulatedOracle::new(&ds);
    let mut straight = Session::start("s", quick(12, 3, 6), &ds).unwrap();
    straight.run_to_completion(&oracle).unwrap();

    let mut first = Session::start("s", quick(12, 3, 6), &ds).unwrap();
    first.answer_with(&oracle).unwrap();
    let text = first.state().to_json().unwrap();
    let mut resumed = Session::resume(SessionState::from_json(&text).unwrap(), &ds).unwrap();
    resumed.run_to_completion(&oracle).unwrap();
    assert_eq!(resumed.state().to_json().unwrap(), straight.state().to_json().unwrap());
    assert!(matches!(resumed.answer_with(&oracle), Err(Error::SessionComplete)));
}

#[test]
fn sessions_are_deterministic_per_seed() {
    let ds = small_dataset();
    let a = run_session(quick(12, 3, 21), &ds).unwrap();
    let b = run_session(quick(12, 3, 21), &ds).unwrap();
    let c = run_session(quick(12, 3, 22), &ds).unwrap();
    assert_eq!(a.state, b.state);
    assert_ne!(a.state.labels, c.state.labels);
}
