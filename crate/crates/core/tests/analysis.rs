mod common;

use std::collections::BTreeMap;
use std::sync::Arc;

use common::*;
use networks_core::analysis::{
    classify_run, count_events, detect_period, entropy_report, extract_events, shannon_entropy, BehaviorClass,
    EventDistribution, LogBase, MusicalEventKey, NoteSample, NoteSource, Outcome, PeriodParams, Piece,
};
use networks_core::engine::StopCondition;
use networks_core::lut::LutMethod;
use networks_core::rng::SimRng;
use networks_core::topology::build_paper64;
use proptest::prelude::*;

struct Samples(Vec<NoteSample>);

impl NoteSource for Samples {
    fn samples(&self) -> Vec<NoteSample> {
        self.0.clone()
    }
}

#[test]
fn uniform_gives_log2_n() {
    for n in 1..=512usize {
        let d = EventDistribution::<f64>::from_probabilities(&vec![1.0 / n as f64; n]).unwrap();
        let h = shannon_entropy(&d, LogBase::Two);
        assert!((h - (n as f64).log2()).abs() < 1e-12, "n={n}: {h}");
        let counts: BTreeMap<Outcome, u64> = (0..n as u64).map(|i| (Outcome::Label(i), 7)).collect();
        let h = shannon_entropy(&EventDistribution::<f64>::from_counts(&counts).unwrap(), LogBase::Two);
        assert!((h - (n as f64).log2()).abs() < 1e-12, "counts n={n}: {h}");
    }
}

#[test]
fn random_distributions_match_direct_sum() {
    let mut rng = SimRng::new(2024);
    for _ in 0..100 {
        let n = 1 + rng.below(200) as usize;
        let w: Vec<f64> = (0..n).map(|_| 1.0 + rng.below(1_000_000) as f64).collect();
        let total: f64 = w.iter().sum();
        let p: Vec<f64> = w.iter().map(|x| x / total).collect();
        let h = shannon_entropy(&EventDistribution::from_probabilities(&p).unwrap(), LogBase::Two);
        assert!((h - direct_entropy(&p)).abs() < 1e-9);
    }
}

#[test]
fn base_e_and_single_precision() {
    let d = EventDistribution::<f64>::from_probabilities(&[0.75, 0.25]).unwrap();
    assert!((shannon_entropy(&d, LogBase::Two) - 0.811_278_124_5).abs() < 1e-10);
    let nats = shannon_entropy(&d, LogBase::E);
    assert!((nats - (-(0.75f64 * 0.75f64.ln()) - 0.25 * 0.25f64.ln())).abs() < 1e-12);
    let d32 = EventDistribution::<f32>::from_probabilities(&[0.25; 4]).unwrap();
    assert!((shannon_entropy(&d32, LogBase::Two) - 2.0).abs() < 1e-6);
}

#[test]
fn recount_of_engine_stream() {
    let t = Arc::new(build_paper64());
    let (mut s, _) = start(&t, LutMethod::Random, 5, 6);
    let events = s.run(StopCondition::MaxEvents(1000));
    let mut counts: BTreeMap<(u8, u32), u64> = BTreeMap::new();
    for e in &events {
        *counts.entry((e.midi_note, e.duration_ms)).or_default() += 1;
    }
    let n = events.len() as f64;
    let p: Vec<f64> = counts.values().map(|&c| c as f64 / n).collect();
    let d = extract_events::<f64, _>(&events, MusicalEventKey::Note).unwrap();
    assert_eq!(d.support(), counts.len());
    assert_eq!(d.sample_count(), 1000);
    assert!((shannon_entropy(&d, LogBase::Two) - direct_entropy(&p)).abs() < 1e-9);
}

#[test]
fn report_constant_vs_random() {
    let t = Arc::new(build_paper64());
    let mut pieces = Vec::new();
    for seed in 0..3 {
        let (mut c, _) = start(&t, LutMethod::Constant(5), seed, seed);
        pieces.push(Piece::new(format!("c{seed}"), "constant", &c.run(StopCondition::MaxEvents(300))));
        let (mut r, _) = start(&t, LutMethod::Random, seed, seed);
        pieces.push(Piece::new(format!("r{seed}"), "random", &r.run(StopCondition::MaxEvents(300))));
    }
    pieces.push(Piece::failed("broken", "random", "unreadable"));
    let report = entropy_report::<f64>(&pieces, &[MusicalEventKey::Note], LogBase::Two);
    assert_eq!(report.rows.len(), 7);
    for row in &report.rows {
        match (row.group.as_str(), &row.result) {
            ("constant", Ok(s)) => assert_eq!(s.entropy, 0.0),
            ("random", Ok(s)) => assert!(s.entropy > 0.0),
            ("random", Err(e)) => assert_eq!(row.piece, "broken", "{e}"),
            other => panic!("unexpected row {other:?}"),
        }
    }
    assert!(entropy_report::<f64>(&[], &[MusicalEventKey::Note], LogBase::Two).rows.is_empty());
}

#[test]
fn period_exhaustive_small() {
    let mut checked = 0u64;
    for len in 1..=8usize {
        for code in 0..4u32.pow(len as u32) {
            let seq: Vec<u8> = (0..len).map(|i| ((code >> (2 * i)) & 3) as u8).collect();
            for mp in 1..=len {
                for mr in 1..=len / mp {
                    assert_eq!(
                        detect_period(&seq, mp, mr).unwrap(),
                        brute_period(&seq, mp, mr),
                        "{seq:?} max_period={mp} min_repeats={mr}"
                    );
                    checked += 1;
                }
            }
        }
    }
    assert!(checked > 500_000);
}

#[test]
fn constant_run_is_class1() {
    let t = Arc::new(build_paper64());
    let (mut s, _) = start(&t, LutMethod::Constant(9), 1, 2);
    let summary = classify_run(&s.run(StopCondition::MaxEvents(1000)), PeriodParams::default());
    assert_eq!(summary.voices.len(), 16);
    assert_eq!(summary.class1, 64);
    assert_eq!(summary.class2 + summary.aperiodic + summary.undetermined, 0);
}

#[test]
fn random_run_has_aperiodic_voice() {
    let t = Arc::new(build_paper64());
    let (mut s, _) = start(&t, LutMethod::Random, 12, 13);
    let summary = classify_run(&s.run(StopCondition::MaxEvents(1000)), PeriodParams::default());
    assert!(summary.voices_with_any_aperiodic() >= 1, "{summary:?}");
}

fn arb_seq() -> impl Strategy<Value = Vec<u8>> {
    prop_oneof![
        prop::collection::vec(0u8..4, 1..=64),
        // Periodic tails behind a noisy prefix.
        (prop::collection::vec(0u8..4, 0..20), prop::collection::vec(0u8..4, 1..9), 1usize..40).prop_map(
            |(prefix, unit, reps)| {
                let mut s = prefix;
                for _ in 0..reps {
                    s.extend(&unit);
                }
                s.truncate(64);
                s
            }
        ),
    ]
}

fn samples_strategy() -> impl Strategy<Value = Vec<NoteSample>> {
    prop::collection::vec((0u8..16, 40u8..52, prop::sample::select(vec![100u64, 150, 200, 650])), 1..300)
        .prop_map(|v| v.into_iter().map(|(channel, pitch, duration_ms)| NoteSample { channel, pitch, duration_ms }).collect())
}

proptest! {
    #[test]
    fn period_matches_brute_force(seq in arb_seq(), mp in 1usize..=32, mr in 1usize..=8) {
        prop_assume!(mp * mr <= seq.len());
        prop_assert_eq!(detect_period(&seq, mp, mr).unwrap(), brute_period(&seq, mp, mr));
    }

    #[test]
    fn period_rejects_short(seq in prop::collection::vec(0u8..4, 0..16)) {
        prop_assert!(detect_period(&seq, 4, 4).is_err() || seq.len() >= 16);
    }

    #[test]
    fn entropy_bounds(samples in samples_strategy(), key_i in 0usize..3) {
        let key = [MusicalEventKey::Pitch, MusicalEventKey::Duration, MusicalEventKey::Note][key_i];
        let d = extract_events::<f64, _>(&Samples(samples), key).unwrap();
        let h = shannon_entropy(&d, LogBase::Two);
        let cap = (d.support() as f64).log2();
        prop_assert!(h >= -1e-12);
        prop_assert!(h <= cap + 1e-12);
        let counts = d.counts().unwrap();
        let uniform = counts.iter().all(|&c| c == counts[0]);
        prop_assert_eq!(uniform, (cap - h).abs() < 1e-9, "h={} cap={}", h, cap);
    }

    #[test]
    fn entropy_permutation_invariant(w in prop::collection::vec(1u32..1000, 1..60), perm_seed in any::<u64>()) {
        let total: f64 = w.iter().map(|&x| f64::from(x)).sum();
        let p: Vec<f64> = w.iter().map(|&x| f64::from(x) / total).collect();
        let mut q = p.clone();
        let mut rng = SimRng::new(perm_seed);
        for i in (1..q.len()).rev() {
            q.swap(i, rng.below(i as u32 + 1) as usize);
        }
        let h = |v: &[f64]| shannon_entropy(&EventDistribution::from_probabilities(v).unwrap(), LogBase::Two);
        prop_assert!((h(&p) - h(&q)).abs() < 1e-12);
        prop_assert!((h(&p) - direct_entropy(&p)).abs() < 1e-9);
    }

    #[test]
    fn extraction_ignores_order(samples in samples_strategy(), perm_seed in any::<u64>()) {
        let mut shuffled = samples.clone();
        let mut rng = SimRng::new(perm_seed);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.below(i as u32 + 1) as usize);
        }
        for key in [MusicalEventKey::Pitch, MusicalEventKey::Duration, MusicalEventKey::Note] {
            prop_assert_eq!(count_events(&samples, key), count_events(&shuffled, key));
            let a = extract_events::<f64, _>(&Samples(samples.clone()), key).unwrap();
            let b = extract_events::<f64, _>(&Samples(shuffled.clone()), key).unwrap();
            prop_assert_eq!(shannon_entropy(&a, LogBase::Two), shannon_entropy(&b, LogBase::Two));
        }
    }
}

#[test]
fn class_labels() {
    assert_eq!(detect_period(&[7; 48], 16, 3).unwrap(), BehaviorClass::Class1);
    let alt: Vec<u8> = (0..48).map(|i| if i % 2 == 0 { 3 } else { 7 }).collect();
    assert_eq!(detect_period(&alt, 16, 3).unwrap(), BehaviorClass::Class2 { period: 2 });
}
