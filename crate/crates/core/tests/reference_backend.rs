use std::thread;

use proptest::prelude::*;
use shannon_core::backend::{pieces, NGramConfig, ReferenceBackend, ScoreRequest, ScoringBackend};

const WORDS: [&str; 8] = ["ka", "lo", "mi", "nu", "pe", "ro", "su", "ti"];

fn sentence() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(WORDS.to_vec()), 1..8).prop_map(|w| w.join(" ") + ".")
}

fn corpus() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(sentence(), 1..6)
}

fn config() -> impl Strategy<Value = NGramConfig> {
    (1usize..=3, 0.05f64..2.0, 0.0f64..0.99, 1usize..=2).prop_map(|(order, alpha, lambda, cache_order)| NGramConfig {
        order,
        smoothing_alpha: alpha,
        cache_weight: lambda,
        cache_order,
    })
}

fn text(max: usize) -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select([&WORDS[..], &["zz", ",", "."]].concat()), 0..max)
        .prop_map(|w| w.join(" "))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn distributions_sum_to_one(corpus in corpus(), cfg in config(), prompt in text(10), prefix in text(6)) {
        let model = ReferenceBackend::train(&corpus, cfg).unwrap();
        prop_assert!(model.vocab_size() <= 50);
        let p = model.next_token_probabilities(&prompt, &prefix);
        prop_assert_eq!(p[0], 0.0);
        prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
        let total: f64 = p.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12, "sum {}", total);
    }

    #[test]
    fn surprisals_match_the_distribution_and_greedy_flags_pick_the_mode(
        corpus in corpus(), cfg in config(), prompt in text(10), continuation in text(8)
    ) {
        prop_assume!(!continuation.trim().is_empty());
        let model = ReferenceBackend::train(&corpus, cfg).unwrap();
        let scores = model.score(&ScoreRequest::new(&prompt, &continuation, true)).unwrap();
        let flags = scores.greedy_correct.clone().unwrap();
        let tokens = pieces(&continuation);
        prop_assert_eq!(scores.tokens.len(), tokens.len());
        for i in 0..tokens.len() {
            let prefix: String = tokens[..i].concat();
            let dist = model.next_token_probabilities(&prompt, &prefix);
            let id = model.token_id(tokens[i]) as usize;
            prop_assert!(scores.surprisals[i] >= 0.0);
            prop_assert!((scores.surprisals[i] - (-dist[id].ln()).max(0.0)).abs() < 1e-12);
            let best = dist.iter().cloned().fold(0.0, f64::max);
            let mode = dist.iter().position(|&p| p == best).unwrap();
            prop_assert_eq!(flags[i], mode == id, "position {}", i);
            if flags[i] {
                let min_surprisal = -best.ln();
                prop_assert!((scores.surprisals[i] - min_surprisal.max(0.0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn continuation_in_prompt_never_raises_its_information(
        corpus in corpus(),
        order in 1usize..=3,
        alpha in 0.05f64..2.0,
        lambda in 0.01f64..0.99,
        cache_order in 1usize..=2,
        continuation in text(8),
    ) {
        prop_assume!(!continuation.trim().is_empty());
        let cfg = NGramConfig { order, smoothing_alpha: alpha, cache_weight: lambda, cache_order };
        let model = ReferenceBackend::train(&corpus, cfg).unwrap();
        prop_assume!(pieces(&continuation).len() <= model.vocab_size());
        let plain = model.score(&ScoreRequest::new("", &continuation, false)).unwrap().total();
        let primed = model.score(&ScoreRequest::new(&continuation, &continuation, false)).unwrap().total();
        prop_assert!(primed <= plain + 1e-12, "primed {} > plain {}", primed, plain);
    }
}

#[test]
fn scoring_is_independent_of_batching_and_order() {
    let corpus = ["ka lo mi. nu pe ro.", "su ti ka lo. mi nu."];
    let model = ReferenceBackend::train(&corpus, NGramConfig::default()).unwrap();
    let requests: Vec<ScoreRequest> = (0..24)
        .map(|i| {
            let prompt = WORDS[..i % WORDS.len()].join(" ");
            let continuation = WORDS[i % 5..i % 5 + 3].join(" ");
            ScoreRequest::new(prompt, continuation, true)
        })
        .collect();
    let sequential: Vec<_> = requests.iter().map(|r| model.score(r).unwrap()).collect();
    let reversed: Vec<_> = requests.iter().rev().map(|r| model.score(r).unwrap()).collect();
    let mut reversed = reversed;
    reversed.reverse();
    assert_eq!(sequential, reversed);

    let concurrent: Vec<_> = thread::scope(|s| {
        let handles: Vec<_> = requests.iter().map(|r| s.spawn(|| model.score(r).unwrap())).collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    assert_eq!(sequential, concurrent);
}

#[test]
fn self_prompt_is_strictly_cheaper_on_a_repeating_document() {
    let doc = "The cat sat. The cat ran.";
    let cfg = NGramConfig {
        cache_weight: 0.5,
        cache_order: 2,
        ..NGramConfig::default()
    };
    let model = ReferenceBackend::train(&[doc], cfg).unwrap();
    let plain = model.score(&ScoreRequest::new("", doc, false)).unwrap().total();
    let primed = model.score(&ScoreRequest::new(doc, doc, false)).unwrap().total();
    assert!(primed < plain);
}
