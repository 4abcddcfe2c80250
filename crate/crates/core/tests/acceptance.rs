//! Acceptance suite: one test per criterion, each printing a PASS line.
//! Run with `cargo test --test acceptance -- --nocapture` to see them.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use agora::analysis::{classify_regime, detect_bubble, detect_transitivity_violations};
use agora::config::Config;
use agora::engine::{replay_matches, run, run_from_setup, Setup};
use agora::genome::Genome;
use agora::kernel::{Kernel, Stimulus};
use agora::market::{Proposition, RecordKind};
use agora::network::{observation_criterion, AgentState, ObservationInputs, Population};
use agora::valuation::{encode_value, hash_gate, price_gate, price_gate_normalized, PriceInterval};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("../../fixtures/{name}"))
}

#[test]
fn criterion_1_price_gate_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut mismatches = 0usize;

    for _ in 0..10_000 {
        let lo: f64 = rng.gen_range(0.0..500.0);
        let width: f64 = rng.gen_range(0.0..500.0);
        let band = PriceInterval::new(lo, lo + width);
        let offer: f64 = rng.gen_range(0.0..1200.0);
        let expected = offer >= band.lo && offer <= band.hi;
        if price_gate(&band, offer).accepted != expected {
            mismatches += 1;
        }
        if offer > 0.0 && price_gate_normalized(&band, offer).accepted != expected {
            mismatches += 1;
        }
    }
    for _ in 0..50 {
        let lo: f64 = rng.gen_range(0.0..800.0);
        let width: f64 = rng.gen_range(0.0..400.0);
        let band = PriceInterval::new(lo, lo + width);
        for v in 0..=1000u32 {
            let offer = v as f64;
            let expected = offer >= band.lo && offer <= band.hi;
            if price_gate(&band, offer).accepted != expected {
                mismatches += 1;
            }
        }
    }

    assert_eq!(mismatches, 0);
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    println!("criterion 1 (price-gate oracle equivalence, 0 mismatches, {elapsed:?}): PASS");
}

/// Independent oracle: slide every window over the hash segment.
fn sliding_window_gate(hash: &str, v: u64) -> bool {
    let needle = encode_value(v).into_bytes();
    let hay = hash.as_bytes();
    if needle.len() > hay.len() {
        return false;
    }
    (0..=hay.len() - needle.len()).any(|i| hay[i..i + needle.len()] == needle[..])
}

#[test]
fn criterion_2_hash_gate_oracle_and_frame_shift() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut shifted_sets_differ = 0usize;

    for seed in 0..20u64 {
        let genome = Genome::random(1000 + seed, 2, 1, 16).unwrap();
        let mut accepted = BTreeSet::new();
        for v in 0..=10_000u64 {
            let gate = hash_gate(&genome, v);
            assert_eq!(
                gate,
                sliding_window_gate(genome.hash_genes(), v),
                "oracle disagreement at genome {seed}, v {v}"
            );
            if gate {
                accepted.insert(v);
            }
        }

        // One seeded frame-shift mutation: insert a random character mid-string.
        let ch = (b'a' + rng.gen_range(0..26u8)) as char;
        let shifted = genome.insert_hash_char(genome.hash_genes().len() / 2, ch);
        let accepted_after: BTreeSet<u64> = (0..=10_000u64)
            .filter(|&v| hash_gate(&shifted, v))
            .collect();
        if accepted
            .symmetric_difference(&accepted_after)
            .next()
            .is_some()
        {
            shifted_sets_differ += 1;
        }
    }

    assert!(
        shifted_sets_differ >= 18,
        "only {shifted_sets_differ}/20 genomes changed their accepted set"
    );
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    println!(
        "criterion 2 (hash-gate oracle, frame shift moved {shifted_sets_differ}/20 value sets, {elapsed:?}): PASS"
    );
}

fn random_kernel(rng: &mut ChaCha8Rng, dims: usize) -> Kernel {
    let lo: Vec<f64> = (0..dims).map(|_| rng.gen_range(-1.0..0.4)).collect();
    let hi: Vec<f64> = lo.iter().map(|l| l + rng.gen_range(0.1..1.5)).collect();
    let n_anchors = rng.gen_range(1..4);
    let anchors = (0..n_anchors)
        .map(|_| (0..dims).map(|d| rng.gen_range(lo[d]..hi[d])).collect())
        .collect();
    Kernel::from_bounds(lo, hi, anchors)
}

#[test]
fn criterion_3_kernel_laws() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut violations = 0usize;

    for _ in 0..1000 {
        let dims = rng.gen_range(1..4);
        let kernel = random_kernel(&mut rng, dims);
        let stimulus = Stimulus::new((0..dims).map(|_| rng.gen_range(-3.0..3.0)).collect());
        let flexibility: f64 = rng.gen();
        let rescaled = kernel.rescaled(&stimulus, flexibility);

        // Containment monotonicity.
        if rescaled.classify(&stimulus) <= 0.0 {
            violations += 1;
        }
        // Growth monotonicity.
        for d in 0..dims {
            if rescaled.extent(d) < kernel.extent(d) || rescaled.alpha()[d] < kernel.alpha()[d] {
                violations += 1;
            }
        }
        // Idempotence within 1e-12 per bound.
        let twice = rescaled.rescaled(&stimulus, flexibility);
        for d in 0..dims {
            if (twice.lo()[d] - rescaled.lo()[d]).abs() > 1e-12
                || (twice.hi()[d] - rescaled.hi()[d]).abs() > 1e-12
            {
                violations += 1;
            }
        }
        // Prior containment preserved.
        let interior = Stimulus::new(
            (0..dims)
                .map(|d| rng.gen_range(kernel.lo()[d]..kernel.hi()[d]))
                .collect(),
        );
        if kernel.classify(&interior) > 0.0 && rescaled.classify(&interior) <= 0.0 {
            violations += 1;
        }
    }

    assert_eq!(violations, 0);
    println!("criterion 3 (kernel laws on 1000 random triples, 0 violations): PASS");
}

#[test]
fn criterion_4_observation_criterion_exactness() {
    // Worked example, exactly.
    let worked = ObservationInputs {
        own_count: 4,
        neighbor_counts: vec![2, 4, 8],
        symbolic_premium: 0.5,
        scarcity_premium: 0.25,
    };
    assert_eq!(observation_criterion(&worked), 7.0);

    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for _ in 0..1000 {
        let own_count = rng.gen_range(0..40u32);
        let n_neighbors = rng.gen_range(0..12usize);
        let neighbor_counts: Vec<u32> = (0..n_neighbors).map(|_| rng.gen_range(0..30)).collect();
        let symbolic: f64 = rng.gen_range(0.0..1.0);
        let scarcity: f64 = rng.gen_range(0.05..1.0);

        // Independent direct evaluation, written as a plain loop.
        let mut network_term = 0.0;
        if neighbor_counts.is_empty() {
            network_term = 1.0;
        } else {
            for &k_n in &neighbor_counts {
                let denom = if k_n == 0 { 1 } else { k_n };
                network_term += own_count as f64 / denom as f64;
            }
        }
        let expected = network_term * symbolic / scarcity;

        let got = observation_criterion(&ObservationInputs {
            own_count,
            neighbor_counts,
            symbolic_premium: symbolic,
            scarcity_premium: scarcity,
        });
        let scale = expected.abs().max(1.0);
        assert!(
            (got - expected).abs() / scale <= 1e-9,
            "got {got}, expected {expected}"
        );
    }
    println!("criterion 4 (observation criterion exact on 1000 inputs + worked example): PASS");
}

#[test]
fn criterion_5_seeded_cascade_reads_as_a_bubble() {
    let start = Instant::now();

    // Seven agents, complete similarity graph, imitation on. Agent 0 holds
    // the object and values it at 100/1.2; agent 1 values it at 100 exactly,
    // so the opening trade books +20%; the rest find it unfamiliar.
    let dmax = (2.0f64).sqrt() / 2.0;
    let stim_x = 0.5 + dmax / 6.0;
    let mut agents = Vec::new();
    let seller = Genome::from_parts(2, vec![1.0, 1.0, 0.5, 0.5], "df".into(), 0.0).unwrap();
    agents.push(AgentState::new(0, seller, 1000.0));
    let buyer = Genome::from_parts(2, vec![1.0, 1.0, stim_x, 0.5], "df".into(), 0.2).unwrap();
    agents.push(AgentState::new(1, buyer, 1000.0));
    for id in 2..7u32 {
        let g = Genome::from_parts(2, vec![0.05, 0.05, 0.1, 0.1], "q".into(), 0.5).unwrap();
        agents.push(AgentState::new(id, g, 1000.0));
    }
    let mut population = Population::new(agents);
    population.get_mut(0).add_holding("relic");
    let config = Config::parse(
        "[population]\nagents = 7\n[simulation]\nticks = 6\nseed = 0\nsnapshot_every = 6\n\
         [objects]\nrelic = 100 @ 0.6178511301977579 0.5 @ owner=0\n",
    )
    .unwrap();
    let setup = Setup {
        population,
        catalog: vec![Proposition::new("relic", vec![stim_x, 0.5], 100.0)],
        ensembles: vec![],
    };
    let out = run_from_setup(&config, setup, ChaCha8Rng::seed_from_u64(config.seed));

    let opening = out
        .trace
        .records()
        .find(|r| r.kind == RecordKind::Complete)
        .expect("seeded trade");
    assert_eq!(opening.tick, 1);
    assert!((opening.gain_buyer_pct - 20.0).abs() < 1e-6);

    let report = detect_bubble(&out.trace, config.bubble_window, config.gain_floor);
    assert!(report.flagged, "cascade must register as a bubble");
    let window = &report.windows[0];
    assert!(window.onset_tick <= 5, "onset {}", window.onset_tick);
    assert!(window.trades >= 3, "cascade of {} trades", window.trades);

    // Universality: every completed trade in the flagged window gained.
    let in_window = out.trace.records().filter(|r| {
        r.kind == RecordKind::Complete
            && r.tick >= window.onset_tick
            && r.tick < window.onset_tick + window.window
    });
    for r in in_window {
        assert!(
            r.gain_buyer_pct > 0.0,
            "tick {} gain {}",
            r.tick,
            r.gain_buyer_pct
        );
    }

    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    println!(
        "criterion 5 (seeded +20% cascade flagged, onset tick {}, {} trades, {elapsed:?}): PASS",
        window.onset_tick, window.trades
    );
}

fn cloud(
    n: usize,
    seed: u64,
    sd_x: f64,
    sd_y: f64,
    heavy_x: bool,
    heavy_y: bool,
) -> Vec<agora::analysis::ValuationPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let zx: f64 = rng.sample(StandardNormal);
            let zy: f64 = rng.sample(StandardNormal);
            let mut x = zx * sd_x;
            let mut y = zy * sd_y;
            if heavy_x && i % 10 == 0 {
                x += sd_x * 30.0 * if rng.gen::<bool>() { 1.0 } else { -1.0 };
            }
            if heavy_y && i % 10 == 0 {
                y += sd_y * 30.0 * if rng.gen::<bool>() { 1.0 } else { -1.0 };
            }
            agora::analysis::ValuationPoint {
                value_coord: x,
                meaning_coord: y,
            }
        })
        .collect()
}

#[test]
fn criterion_6_regime_classifier_on_constructed_clouds() {
    use agora::analysis::RegimeLabel;
    let start = Instant::now();

    let emh = cloud(1000, 61, 1.0, 0.01, false, false);
    let strong = cloud(1000, 62, 0.01, 1.0, false, true);
    let weak = cloud(1000, 63, 0.01, 1.0, true, false);

    assert_eq!(
        classify_regime(&emh, 2.0, 1.5).unwrap(),
        RegimeLabel::EmhLike
    );
    assert_eq!(
        classify_regime(&strong, 2.0, 1.5).unwrap(),
        RegimeLabel::StrongPolysemy
    );
    assert_eq!(
        classify_regime(&weak, 2.0, 1.5).unwrap(),
        RegimeLabel::WeakPolysemy
    );

    // Labels survive independent per-axis affine rescaling.
    for (points, label) in [
        (&emh, RegimeLabel::EmhLike),
        (&strong, RegimeLabel::StrongPolysemy),
        (&weak, RegimeLabel::WeakPolysemy),
    ] {
        let rescaled: Vec<_> = points
            .iter()
            .map(|p| agora::analysis::ValuationPoint {
                value_coord: p.value_coord * 2500.0 - 13.0,
                meaning_coord: p.meaning_coord * 0.004 + 9.0,
            })
            .collect();
        assert_eq!(classify_regime(&rescaled, 2.0, 1.5).unwrap(), label);
        let mirrored: Vec<_> = points
            .iter()
            .map(|p| agora::analysis::ValuationPoint {
                value_coord: -7.0 * p.value_coord,
                meaning_coord: 0.5 * p.meaning_coord + 1.0,
            })
            .collect();
        assert_eq!(classify_regime(&mirrored, 2.0, 1.5).unwrap(), label);
    }

    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    println!("criterion 6 (regime labels + affine invariance on 3 clouds, {elapsed:?}): PASS");
}

#[test]
fn criterion_7_convergence_vs_divergence() {
    let start = Instant::now();

    let homogeneous = Config::load(&fixture("convergence_homogeneous.conf")).unwrap();
    let clustered = Config::load(&fixture("convergence_clustered.conf")).unwrap();
    assert_eq!(homogeneous.seed, clustered.seed, "same pinned seed");
    assert_eq!(homogeneous.agents, 50);
    assert_eq!(homogeneous.ticks, 200);

    let out_h = run(&homogeneous);
    let out_c = run(&clustered);

    let trades = |t: &agora::Trace| {
        t.records()
            .filter(|r| r.kind == RecordKind::Complete)
            .count()
    };
    assert!(trades(&out_h.trace) >= 50, "homogeneous market too quiet");
    assert!(trades(&out_c.trace) >= 20, "clustered market too quiet");

    let cv_h = agora::analysis::settled_price_cv(&out_h.trace, "gem").expect("settled prices");
    let cv_c = agora::analysis::settled_price_cv(&out_c.trace, "gem").expect("settled prices");

    assert!(
        cv_c > 1e-3,
        "divergent population shows real dispersion, cv = {cv_c}"
    );
    assert!(
        2.0 * cv_h <= cv_c,
        "homogeneous cv {cv_h} not at least 2x smaller than clustered cv {cv_c}"
    );

    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    println!(
        "criterion 7 (price convergence: homogeneous cv = {cv_h:.6}, two-cluster cv = {cv_c:.6}, {elapsed:?}): PASS"
    );
}

#[test]
fn criterion_8_conservation_and_determinism() {
    for name in [
        "demo.conf",
        "convergence_homogeneous.conf",
        "convergence_clustered.conf",
    ] {
        let config = Config::load(&fixture(name)).unwrap();
        let a = run(&config);
        let b = run(&config);

        // Byte-identical traces for the same (config, seed).
        assert_eq!(a.trace.to_text(), b.trace.to_text(), "{name} diverged");

        // Conservation at every tick.
        for audit in &a.audits {
            assert!(
                (audit.total_balance - (a.initial_balance_total + audit.minted_cumulative)).abs()
                    < 1e-6,
                "{name}: tick {} breaks conservation",
                audit.tick
            );
        }

        // Single-holder ownership at the end of the run.
        for prop in &a.trace.catalog {
            assert_eq!(
                a.population.total_copies(&prop.id),
                1,
                "{name}: {}",
                prop.id
            );
        }

        // Replay from the embedded config reproduces the bytes.
        assert!(replay_matches(&a.trace).unwrap(), "{name} replay mismatch");
    }
    println!(
        "criterion 8 (conservation, single ownership, byte-identical replay on 3 fixtures): PASS"
    );
}

#[test]
fn criterion_9_transitivity_brute_force_agreement() {
    use agora::analysis::Preference;

    // Planted cycle fixture.
    let planted = vec![
        Preference::new("a", "b", "a"),
        Preference::new("b", "c", "b"),
        Preference::new("c", "a", "c"),
    ];
    let cycles = detect_transitivity_violations(&planted);
    assert_eq!(cycles.len(), 1);
    assert_eq!(
        cycles[0],
        ["a".to_string(), "b".to_string(), "c".to_string()]
    );

    // 1000 random 7-item tournaments against an O(n^3) enumeration.
    let names = ["a", "b", "c", "d", "e", "f", "g"];
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    for _ in 0..1000 {
        let mut prefs = Vec::new();
        for i in 0..names.len() {
            for j in (i + 1)..names.len() {
                let winner = if rng.gen::<bool>() {
                    names[i]
                } else {
                    names[j]
                };
                prefs.push(Preference::new(names[i], names[j], winner));
            }
        }
        let got: BTreeSet<[String; 3]> =
            detect_transitivity_violations(&prefs).into_iter().collect();

        // Oracle: all ordered triples, canonicalized by rotation.
        let mut beats = BTreeSet::new();
        for p in &prefs {
            let loser = if p.winner == p.a { &p.b } else { &p.a };
            beats.insert((p.winner.clone(), loser.clone()));
        }
        let mut expected: BTreeSet<[String; 3]> = BTreeSet::new();
        for &x in &names {
            for &y in &names {
                for &z in &names {
                    if x == y || y == z || x == z {
                        continue;
                    }
                    if beats.contains(&(x.to_string(), y.to_string()))
                        && beats.contains(&(y.to_string(), z.to_string()))
                        && beats.contains(&(z.to_string(), x.to_string()))
                    {
                        let mut rotations = [
                            [x.to_string(), y.to_string(), z.to_string()],
                            [y.to_string(), z.to_string(), x.to_string()],
                            [z.to_string(), x.to_string(), y.to_string()],
                        ];
                        rotations.sort();
                        expected.insert(rotations[0].clone());
                    }
                }
            }
        }
        assert_eq!(got, expected);
    }
    println!("criterion 9 (transitivity detector matches brute force on 1000 tournaments): PASS");
}
