use std::str::FromStr;

use msgen_core::contract::{ContractState, VisualArtifact};
use msgen_core::evaluate::{
    aggregate_score, numeric_literals, run_evaluators, score_delta, Artifact, Dimension, FeedbackSignal,
    ScoreError, Weights,
};
use msgen_core::pipeline::Draft;
use msgen_core::story::parse_story;
use proptest::prelude::*;
use rust_decimal::Decimal;

fn signal(dimension: Dimension, score: Decimal) -> FeedbackSignal {
    FeedbackSignal {
        evaluator_id: dimension.as_str().to_string(),
        dimension,
        score,
        issues: vec![],
        deltas: vec![],
        confidence: Decimal::ONE,
    }
}

fn d(s: &str) -> Decimal {
    Decimal::from_str(s).unwrap()
}

fn signals_strategy() -> impl Strategy<Value = Vec<FeedbackSignal>> {
    proptest::sample::subsequence(Dimension::ALL.to_vec(), 1..=8).prop_flat_map(|dims| {
        let n = dims.len();
        proptest::collection::vec(0u32..=10_000, n).prop_map(move |scores| {
            dims.iter().zip(scores).map(|(dim, s)| signal(*dim, Decimal::new(s.into(), 3))).collect()
        })
    })
}

fn weights_strategy() -> impl Strategy<Value = Weights> {
    proptest::collection::vec(1u32..=1_000, 8).prop_map(|raw| {
        Weights::new(Dimension::ALL.into_iter().zip(raw).map(|(d, w)| (d, Decimal::new(w.into(), 2))).collect())
            .unwrap()
    })
}

proptest! {
    #[test]
    fn aggregate_stays_within_signal_range(signals in signals_strategy(), weights in weights_strategy()) {
        let agg = aggregate_score(&signals, &weights).unwrap();
        let lo = signals.iter().map(|s| s.score).min().unwrap();
        let hi = signals.iter().map(|s| s.score).max().unwrap();
        let slack = d("0.000001");
        prop_assert!(agg >= lo - slack && agg <= hi + slack, "{agg} outside [{lo}, {hi}]");
        prop_assert!(agg >= Decimal::ZERO && agg <= Decimal::TEN);
    }

    #[test]
    fn aggregate_is_scale_invariant(signals in signals_strategy(), weights in weights_strategy(), k in 1u32..50) {
        let scaled = Weights::new(weights.raw().iter().map(|(d, w)| (*d, *w * Decimal::from(k))).collect()).unwrap();
        prop_assert_eq!(aggregate_score(&signals, &weights).unwrap(), aggregate_score(&signals, &scaled).unwrap());
    }

    #[test]
    fn aggregate_ignores_signal_order(signals in signals_strategy(), weights in weights_strategy()) {
        let mut reversed = signals.clone();
        reversed.reverse();
        prop_assert_eq!(aggregate_score(&signals, &weights).unwrap(), aggregate_score(&reversed, &weights).unwrap());
    }

    #[test]
    fn equal_weights_give_the_plain_mean(signals in signals_strategy()) {
        let sum: Decimal = signals.iter().map(|s| s.score).sum();
        let mean = (sum / Decimal::from(signals.len())).round_dp(6);
        prop_assert_eq!(aggregate_score(&signals, &Weights::equal()).unwrap(), mean.normalize());
    }

    #[test]
    fn numeric_literals_match_a_regex(text in "[0-9a .\\-\\[\\]FIGCT:x]{0,40}") {
        let re = regex::Regex::new(r"-?[0-9]+\.[0-9]+").unwrap();
        let markers = regex::Regex::new(r"\[\[(FIG|TAB|CITE):[^\[\]\n]*\]\]").unwrap();
        let masked = markers.replace_all(&text, |c: &regex::Captures| " ".repeat(c[0].len()));
        let expected: Vec<&str> = re.find_iter(&masked).map(|m| &text[m.range()]).collect();
        prop_assert_eq!(numeric_literals(&text), expected);
    }
}

#[test]
fn duplicate_dimensions_and_empty_input_are_rejected() {
    let s = signal(Dimension::WritingClarity, d("5"));
    assert_eq!(
        aggregate_score(&[s.clone(), s], &Weights::equal()),
        Err(ScoreError::DuplicateDimension(Dimension::WritingClarity))
    );
    assert_eq!(aggregate_score(&[], &Weights::equal()), Err(ScoreError::NoSignals));
}

#[test]
fn score_delta_is_antisymmetric() {
    assert_eq!(score_delta(d("6.145"), d("3.963")), d("2.182"));
    assert_eq!(score_delta(d("3.963"), d("6.145")), d("-2.182"));
}

const STORY: &str = r#"{
  "schema_version": 1, "id": "t", "title": "T",
  "narrative": [{"tag": "motivation", "body": "m"}, {"tag": "method", "body": "x"}],
  "evidence": [{"id": "e", "kind": "claim", "statement": "s", "values": [1.25, 3.5]}],
  "references": [{"key": "k1", "text": "K."}]
}"#;

fn contract() -> ContractState {
    ContractState::new()
        .register_artifact(VisualArtifact::figure("fig:a", "A.", &["s1"]))
        .unwrap()
        .bind_obligation("s1", "fig:a")
        .unwrap()
        .add_citation("k1")
        .unwrap()
}

#[test]
fn evaluators_are_pure() {
    let story = parse_story(STORY.as_bytes()).unwrap();
    let c = contract();
    let draft = Draft::new("s1", "Values 1.25 and 9.75 appear [[CITE:k1]].");
    let first = run_evaluators(Artifact::Draft(&draft), &c, &story);
    assert_eq!(first, run_evaluators(Artifact::Draft(&draft), &c, &story));
    assert_eq!(c, contract(), "evaluation must not touch the contract");
    for s in &first {
        assert!(s.problems().is_empty(), "{:?}", s.problems());
    }
}

#[test]
fn fixing_a_missing_marker_never_lowers_visual_score() {
    let story = parse_story(STORY.as_bytes()).unwrap();
    let c = contract();
    let score = |text: &str| {
        let draft = Draft::new("s1", text);
        run_evaluators(Artifact::Draft(&draft), &c, &story)
            .into_iter()
            .find(|s| s.dimension == Dimension::VisualCommunication)
            .unwrap()
            .score
    };
    let missing = score("Nothing to see here.");
    let bare = score("See [[FIG:fig:a]].");
    let explained = score("[[FIG:fig:a]] plots the measured effect for every configuration we tried across all runs.");
    assert!(missing < bare && bare < explained, "{missing} {bare} {explained}");
    assert_eq!(explained, Decimal::TEN);
}

#[test]
fn unsupported_numbers_cost_data_fidelity() {
    let story = parse_story(STORY.as_bytes()).unwrap();
    let c = contract();
    let fidelity = |text: &str| {
        let draft = Draft::new("s1", text);
        run_evaluators(Artifact::Draft(&draft), &c, &story)
            .into_iter()
            .find(|s| s.dimension == Dimension::ExperimentalSubstance)
            .unwrap()
    };
    assert_eq!(fidelity("We saw 1.25 and 3.50.").score, Decimal::TEN);
    let bad = fidelity("We saw 1.25 and 7.5.");
    assert_eq!(bad.issues.len(), 1);
    assert_eq!(bad.issues[0].subject.as_deref(), Some("7.5"));
}
