use std::collections::{BTreeMap, HashSet};

use proptest::prelude::*;
use synstarts_core::corpus::Corpus;
use synstarts_core::evaluation::{evaluate, ActionLabel, EvalItem, EvaluationConfig, ScriptedResponder};
use synstarts_core::gateway::{mock_generate, ChatBackend, Cassette, ChatRequest, Recorder, ReplayBackend};
use synstarts_core::generation::parse_candidate;
use synstarts_core::sampling::{sample_replicates, SamplingConfig, SamplingError, TagDistribution};
use synstarts_core::stats::{linguistic_features, pearson, wilcoxon_signed_rank};
use synstarts_core::triage::{MentalStatus, Perfusion, Provenance, Respirations};
use synstarts_core::validation::validate;
use synstarts_core::{classify, minimal_info_satisfied, SynStartsCase, TriageTag, Vitals};

fn vitals() -> impl Strategy<Value = Vitals> {
    (
        any::<bool>(),
        proptest::option::of(0u32..90),
        proptest::option::of(any::<bool>()),
        proptest::option::of(any::<bool>()),
        proptest::option::of(any::<bool>()),
        proptest::option::of((1u32..=100).prop_map(|t| t as f64 / 10.0)),
        proptest::option::of(any::<bool>()),
    )
        .prop_map(|(can_walk, rate, ib, bam, pulse, refill, obeys)| Vitals {
            can_walk,
            respirations: Respirations { rate, initial_breathing: ib, breathing_after_maneuver: bam },
            perfusion: Perfusion { radial_pulse_present: pulse, capillary_refill_seconds: refill },
            mental_status: MentalStatus { obeys_commands: obeys },
        })
}

fn tag() -> impl Strategy<Value = TriageTag> {
    prop::sample::select(TriageTag::ALL.to_vec())
}

fn stub_corpus(per_tag: [usize; 4]) -> Corpus {
    let cases = TriageTag::ALL
        .iter()
        .zip(per_tag)
        .flat_map(|(&tag, k)| {
            (0..k).map(move |i| SynStartsCase {
                id: format!("{tag}-{i}"),
                tag,
                description: format!("{tag} {i}"),
                vitals: Vitals::ambulatory(),
                provenance: Provenance {
                    generator: "p".into(),
                    created_at: "t".into(),
                    rule_set_version: None,
                    validation_digest: None,
                },
            })
        })
        .collect();
    Corpus::new(cases).unwrap()
}

proptest! {
    #[test]
    fn minimal_info_iff_classifiable(v in vitals()) {
        prop_assert_eq!(minimal_info_satisfied(&v), classify(&v).is_ok());
    }

    #[test]
    fn walking_is_always_green(mut v in vitals()) {
        v.can_walk = true;
        prop_assert_eq!(classify(&v), Ok(TriageTag::Green));
    }

    #[test]
    fn vitals_json_round_trip(v in vitals()) {
        let json = serde_json::to_string(&v).unwrap();
        let back: Vitals = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(back, v);
    }

    #[test]
    fn tag_parsing_ignores_case(t in tag()) {
        prop_assert_eq!(t.as_str().to_uppercase().parse::<TriageTag>().unwrap(), t);
        prop_assert_eq!(t.as_str().to_lowercase().parse::<TriageTag>().unwrap(), t);
    }

    #[test]
    fn clean_mock_candidates_are_certified(t in tag(), seed in any::<u64>()) {
        let case = parse_candidate(&mock_generate(t, seed), "mock", "t").unwrap();
        prop_assert_eq!(case.tag, t);
        let report = validate(&case);
        prop_assert!(report.overall, "{:?}", report);
    }

    #[test]
    fn action_mapping_round_trips(t in tag()) {
        prop_assert_eq!(ActionLabel::from_tag(t).tag(), t);
        prop_assert_eq!(ActionLabel::normalize(&ActionLabel::from_tag(t).as_str().to_lowercase()), Some(ActionLabel::from_tag(t)));
    }

    #[test]
    fn sampler_is_exact_disjoint_or_refuses(
        counts in prop::array::uniform4(0usize..12),
        pool in prop::array::uniform4(0usize..60),
        replicates in 1usize..8,
        seed in any::<u64>(),
    ) {
        prop_assume!(counts.iter().sum::<usize>() > 0);
        let corpus = stub_corpus(pool);
        let index = corpus.index();
        let config = SamplingConfig { replicates, ..SamplingConfig::new(TagDistribution::from_array(counts), seed) };
        let feasible = (0..4).all(|i| counts[i] * replicates <= pool[i]);
        match sample_replicates(&corpus, &config) {
            Ok(manifests) => {
                prop_assert!(feasible);
                prop_assert_eq!(manifests.len(), replicates);
                let mut seen = HashSet::new();
                for m in &manifests {
                    let mut realized = [0usize; 4];
                    for id in &m.case_ids {
                        prop_assert!(seen.insert(id.clone()));
                        realized[index[id.as_str()].tag.index()] += 1;
                    }
                    prop_assert_eq!(realized, counts);
                }
                prop_assert_eq!(sample_replicates(&corpus, &config).unwrap(), manifests);
            }
            Err(SamplingError::InsufficientPool { .. }) => prop_assert!(!feasible),
            Err(e) => prop_assert!(false, "unexpected {e}"),
        }
    }

    #[test]
    fn pearson_symmetric_and_affine_invariant(
        xy in prop::collection::vec((-100i32..100, -100i32..100), 3..20),
        scale in 1u32..50,
        shift in -20i32..20,
    ) {
        let x: Vec<f64> = xy.iter().map(|p| p.0 as f64).collect();
        let y: Vec<f64> = xy.iter().map(|p| p.1 as f64).collect();
        let (Ok(a), Ok(b)) = (pearson(&x, &y), pearson(&y, &x)) else { return Ok(()); };
        prop_assert!((a.statistic - b.statistic).abs() < 1e-12);
        let x2: Vec<f64> = x.iter().map(|v| v * scale as f64 + shift as f64).collect();
        let c = pearson(&x2, &y).unwrap();
        prop_assert!((a.statistic - c.statistic).abs() < 1e-9);
        prop_assert!((-1.0..=1.0).contains(&a.statistic));
        prop_assert!((0.0..=1.0).contains(&a.p_value.unwrap()));
    }

    #[test]
    fn wilcoxon_p_is_a_probability_and_sign_symmetric(d in prop::collection::vec(-6i32..6, 1..40)) {
        let a: Vec<f64> = d.iter().map(|v| *v as f64).collect();
        let b = vec![0.0; a.len()];
        match wilcoxon_signed_rank(&a, &b) {
            Ok(r) => {
                let p = r.p_value.unwrap();
                prop_assert!((0.0..=1.0).contains(&p));
                let flipped = wilcoxon_signed_rank(&b, &a).unwrap();
                prop_assert!((flipped.p_value.unwrap() - p).abs() < 1e-12);
            }
            Err(_) => prop_assert!(d.iter().all(|v| *v == 0)),
        }
    }

    #[test]
    fn linguistics_permutation_invariant(texts in prop::collection::vec("[a-z0-9 -]{1,40}", 1..20), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut shuffled = texts.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let a = linguistic_features(&texts);
        let b = linguistic_features(&shuffled);
        prop_assert_eq!(a.vocabulary_size, b.vocabulary_size);
        prop_assert!((a.avg_narrative_length - b.avg_narrative_length).abs() < 1e-12);
        prop_assert!(a.vocabulary_size <= a.total_tokens);
    }

    #[test]
    fn evaluation_order_independent_and_consistent(
        counts in prop::array::uniform4(0usize..15),
        accuracy in 0.0f64..=1.0,
        seed in any::<u64>(),
    ) {
        prop_assume!(counts.iter().sum::<usize>() > 0);
        let items: Vec<EvalItem> = TriageTag::ALL.iter().zip(counts).flat_map(|(&t, k)| (0..k).map(move |i| EvalItem {
            case_id: format!("{t}-{i}"), truth: t, description: format!("{t} patient {i}"),
        })).collect();
        let responder = ScriptedResponder::noisy_for(items.iter().map(|i| (i.case_id.as_str(), i.truth)), accuracy, seed);
        let config = EvaluationConfig { workers: 2, ..Default::default() };
        let run = evaluate("m", &items, &responder, &config).unwrap();
        let mut reversed = items.clone();
        reversed.reverse();
        let rev = evaluate("m", &reversed, &responder, &config).unwrap();
        prop_assert_eq!(run.accuracy, rev.accuracy);
        prop_assert_eq!(&run.confusion, &rev.confusion);
        prop_assert!((run.accuracy - run.confusion.trace() / run.n as f64).abs() < 1e-12);
        let weighted: f64 = run.per_tag_accuracy.iter().map(|(t, a)| a * run.distribution.count(*t) as f64).sum::<f64>() / run.n as f64;
        prop_assert!((weighted - run.accuracy).abs() < 1e-12);
        for t in TriageTag::ALL {
            prop_assert_eq!(run.confusion.row_sum(t), counts[t.index()] as f64);
        }
    }
}

#[test]
fn record_then_replay_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cassette.jsonl");
    let truth: BTreeMap<String, TriageTag> = (0..20).map(|i| (format!("c{i}"), TriageTag::ALL[i % 4])).collect();
    let live = ScriptedResponder::noisy_for(truth.iter().map(|(k, v)| (k.as_str(), *v)), 0.6, 3);
    let items: Vec<EvalItem> = truth
        .iter()
        .map(|(id, t)| EvalItem { case_id: id.clone(), truth: *t, description: format!("patient {id}") })
        .collect();
    let config = EvaluationConfig::default();
    let recorded = {
        let recorder = Recorder::create(live, &path).unwrap();
        evaluate("m", &items, &recorder, &config).unwrap()
    };
    let replay = ReplayBackend::new(Cassette::load(&path).unwrap());
    let replayed = evaluate("m", &items, &replay, &config).unwrap();
    assert_eq!(recorded.records, replayed.records);
    let miss = ChatRequest {
        model_id: "other".into(),
        system_prompt: "s".into(),
        user_prompt: "u".into(),
        temperature: 0.0,
        max_tokens: 8,
        request_tag: "x".into(),
    };
    assert!(replay.complete(&miss).is_err());
}
