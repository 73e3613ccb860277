//! End-to-end exercises of the gluing construction: separation of the
//! glued families, the normalizer identity, support of the level measures,
//! the divergence witness, and the certified pressure bound.

use shiftlab::error::Error;
use shiftlab::irregular::{
    build_schedule, certified_lower_bound, extract_all_levels, glue_point, verify_divergence,
    FractalCoding, GluingSchedule, LevelData, RatioThresholds, SamplePlan, ScheduleParams,
};
use shiftlab::orbit::{bowen_distance, Potential};
use shiftlab::pressure::{transfer_pressure, MarkovMeasure};
use shiftlab::{SymbolicSystem, Word};

fn acceptance_setup() -> (
    SymbolicSystem,
    MarkovMeasure,
    MarkovMeasure,
    Potential,
    Potential,
) {
    let s = SymbolicSystem::full_shift(2);
    let mu1 = MarkovMeasure::bernoulli(&s, &[0.5, 0.5]).unwrap();
    let mu2 = MarkovMeasure::bernoulli(&s, &[0.25, 0.75]).unwrap();
    let phi = Potential::from_fn(&s, 1, |w| w[0] as f64).unwrap();
    let psi = Potential::constant(&s, 0.0);
    (s, mu1, mu2, phi, psi)
}

fn acceptance_params(gamma: f64, seed: u64) -> ScheduleParams {
    let mut p = ScheduleParams::new(gamma, 4, 1_000_000, seed);
    p.thresholds = RatioThresholds { r1: 0.4, r2: 2.25, r3: 0.1 };
    p
}

fn tiny_schedule(system: &SymbolicSystem) -> (GluingSchedule, Vec<LevelData>) {
    let mu1 = MarkovMeasure::bernoulli(system, &[0.5, 0.5]).unwrap();
    let mu2 = MarkovMeasure::bernoulli(system, &[0.25, 0.75]).unwrap();
    let sched = GluingSchedule::manual(
        system,
        [mu1, mu2],
        [0.5, 0.75],
        0.5,
        0.05,
        0.125,
        vec![2, 2],
        vec![2, 2],
        2f64.ln(),
        1.0,
        RatioThresholds { r1: 20.0, r2: 20.0, r3: 0.99 },
        1_000,
    )
    .unwrap();
    let w = |t: &str| Word::parse(system, t).unwrap();
    let psi_weight = |t: &str| 0.3 * t.bytes().filter(|&b| b == b'1').count() as f64;
    let levels = vec![
        LevelData::new(1, vec![w("01"), w("10")], vec![psi_weight("01"), psi_weight("10")])
            .unwrap(),
        LevelData::new(2, vec![w("00"), w("11")], vec![psi_weight("00"), psi_weight("11")])
            .unwrap(),
    ];
    (sched, levels)
}

fn all_codings(sched: &GluingSchedule, levels: &[LevelData], depth: usize) -> Vec<FractalCoding> {
    let mut out = Vec::new();
    let slots: Vec<usize> = (0..depth).flat_map(|i| vec![i; sched.big_n[i]]).collect();
    let sizes: Vec<usize> = slots.iter().map(|&i| levels[i].len()).collect();
    let mut counter = vec![0usize; sizes.len()];
    loop {
        let mut address: Vec<Vec<u32>> = vec![Vec::new(); depth];
        for (c, &lvl) in counter.iter().zip(&slots) {
            address[lvl].push(*c as u32);
        }
        out.push(FractalCoding::new(sched, levels, address).unwrap());
        let mut pos = 0;
        loop {
            if pos == counter.len() {
                return out;
            }
            counter[pos] += 1;
            if counter[pos] < sizes[pos] {
                break;
            }
            counter[pos] = 0;
            pos += 1;
        }
    }
}

#[test]
fn glued_family_pairs_separated() {
    // All pairs of distinct level-1 segment materializations are
    // (c_1, 3 eps)-separated, exhaustively at tiny scale.
    let s = SymbolicSystem::full_shift(2);
    let (sched, levels) = tiny_schedule(&s);
    let c1 = sched.c_k[0];
    let words: Vec<Word> = all_codings(&sched, &levels, 1)
        .iter()
        .map(|c| glue_point(&s, &sched, &levels, c).unwrap())
        .collect();
    assert_eq!(words.len(), 4);
    for (i, a) in words.iter().enumerate() {
        for b in &words[i + 1..] {
            let d = bowen_distance(a, b, c1).unwrap();
            assert!(d > 3.0 * sched.epsilon, "d={d}");
        }
    }
}

#[test]
fn tree_levels_separated_and_balls_disjoint() {
    // Full tree at depth 2: pairwise (t_2, 2 eps)-separated, and closed
    // balls of radius eps/2^k around distinct points are disjoint.
    let s = SymbolicSystem::full_shift(2);
    let (sched, levels) = tiny_schedule(&s);
    let t2 = sched.t_k[1];
    let words: Vec<Word> = all_codings(&sched, &levels, 2)
        .iter()
        .map(|c| glue_point(&s, &sched, &levels, c).unwrap())
        .collect();
    assert_eq!(words.len(), 16);
    let radius = sched.epsilon / 4.0; // eps / 2^k at k = 2
    for (i, a) in words.iter().enumerate() {
        for b in &words[i + 1..] {
            let d = bowen_distance(a, b, t2).unwrap();
            assert!(d > 2.0 * sched.epsilon, "d={d}");
            // Disjoint closed balls: the centers are further apart than
            // twice the radius.
            assert!(d > 2.0 * radius);
        }
    }
}

#[test]
fn descent_preserves_parent_prefix() {
    let s = SymbolicSystem::full_shift(2);
    let (sched, levels) = tiny_schedule(&s);
    let t1 = sched.t_k[0];
    for coding in all_codings(&sched, &levels, 2) {
        let child = glue_point(&s, &sched, &levels, &coding).unwrap();
        let parent_coding =
            FractalCoding::new(&sched, &levels, vec![coding.address[0].clone()]).unwrap();
        let parent = glue_point(&s, &sched, &levels, &parent_coding).unwrap();
        assert_eq!(&child.symbols()[..t1], parent.symbols());
    }
}

#[test]
fn normalizer_matches_brute_force() {
    // kappa_2 = (M_1)^{N_1} (M_2)^{N_2} equals the brute-force sum of the
    // atom weights over all 16 atoms.
    let s = SymbolicSystem::full_shift(2);
    let (sched, levels) = tiny_schedule(&s);
    let mut brute = 0.0f64;
    for coding in all_codings(&sched, &levels, 2) {
        let mut lw = 0.0;
        for (i, slots) in coding.address.iter().enumerate() {
            for &slot in slots {
                lw += levels[i].log_weights[slot as usize];
            }
        }
        brute += lw.exp();
    }
    let analytic: f64 = (0..2)
        .map(|i| sched.big_n[i] as f64 * levels[i].log_m)
        .sum();
    assert!((analytic.exp() - brute).abs() < 1e-9 * brute);

    // With zero weights the normalizer is the atom count.
    let w = |t: &str| Word::parse(&s, t).unwrap();
    let plain = vec![
        LevelData::new(1, vec![w("01"), w("10")], vec![0.0, 0.0]).unwrap(),
        LevelData::new(2, vec![w("00"), w("11")], vec![0.0, 0.0]).unwrap(),
    ];
    let analytic: f64 = (0..2)
        .map(|i| sched.big_n[i] as f64 * plain[i].log_m)
        .sum();
    assert!((analytic.exp() - 16.0).abs() < 1e-12);
}

#[test]
fn deeper_level_measures_stay_on_earlier_supports() {
    // Every depth-(k+p) atom agrees with its depth-k ancestor on the first
    // t_k coordinates, so the deeper level measures give the union of the
    // ancestor balls full mass.
    let s = SymbolicSystem::full_shift(2);
    let (sched, levels) = tiny_schedule(&s);
    let t1 = sched.t_k[0];
    let parents: Vec<Word> = all_codings(&sched, &levels, 1)
        .iter()
        .map(|c| glue_point(&s, &sched, &levels, c).unwrap())
        .collect();
    for coding in all_codings(&sched, &levels, 2) {
        let atom = glue_point(&s, &sched, &levels, &coding).unwrap();
        let within = parents
            .iter()
            .any(|p| bowen_distance(&atom, p, t1).unwrap() <= sched.epsilon / 2.0);
        assert!(within);
    }
}

#[test]
fn acceptance_pipeline_divergence_and_certificate() {
    let (s, mu1, mu2, phi, psi) = acceptance_setup();
    let params = acceptance_params(0.1, 11);
    let sched = build_schedule(&s, &mu1, &mu2, &phi, &psi, &params).unwrap();
    assert!(sched.t_k[3] <= 1_000_000);

    let levels =
        extract_all_levels(&s, &sched, &phi, &psi, params.enum_budget, params.sample_size, 11)
            .unwrap();
    for (i, lvl) in levels.iter().enumerate() {
        let rate = lvl.log_m / sched.n_k[i] as f64;
        assert!(rate >= sched.required_rate(), "level {} rate {rate}", i + 1);
    }

    // Divergence witness: alternating averages near 1/2 and 3/4.
    let mut rng = {
        use rand::SeedableRng;
        rand_chacha::ChaCha8Rng::seed_from_u64(11)
    };
    let coding = FractalCoding::sample(&sched, &levels, &mut rng).unwrap();
    let report = verify_divergence(&s, &sched, &levels, &phi, &coding).unwrap();
    assert!(!report.degenerate);
    for row in &report.rows {
        assert!(row.pass, "row {row:?}");
    }
    for pair in report.rows.windows(2) {
        assert!((pair[0].a_k - pair[1].a_k).abs() >= 0.15);
    }
    assert!(report.alternation_pass);

    // Certificate at s = C - 6 gamma, bracketed by the classical pressure.
    let plan = SamplePlan::for_schedule(&sched, 11);
    let cert = certified_lower_bound(&s, &sched, &levels, &psi, &plan).unwrap();
    assert!(cert.pass);
    assert!((cert.s - (2f64.ln() - 0.6)).abs() < 1e-12);
    assert!(cert.counting_min_margin >= 0.0);
    let upper = transfer_pressure(&s, &psi).unwrap();
    assert!(cert.s <= upper);
}

#[test]
fn golden_mean_pipeline_with_connectors() {
    // End to end on a system with a nonzero gluing gap: schedule, levels,
    // divergence and certificate all run through the connector paths.
    let s = SymbolicSystem::golden_mean();
    let mu1 = MarkovMeasure::new(&s, vec![vec![0.5, 0.5], vec![1.0, 0.0]], None).unwrap();
    let mu2 = MarkovMeasure::new(&s, vec![vec![0.8, 0.2], vec![1.0, 0.0]], None).unwrap();
    let phi = Potential::from_fn(&s, 1, |w| w[0] as f64).unwrap();
    let psi = Potential::constant(&s, 0.0);

    let mut params = ScheduleParams::new(0.1, 3, 1_000_000, 29);
    params.thresholds = RatioThresholds { r1: 0.4, r2: 2.25, r3: 0.1 };
    let sched = build_schedule(&s, &mu1, &mu2, &phi, &psi, &params).unwrap();
    assert_eq!(sched.m, 1);
    let levels =
        extract_all_levels(&s, &sched, &phi, &psi, params.enum_budget, params.sample_size, 29)
            .unwrap();
    let mut rng = {
        use rand::SeedableRng;
        rand_chacha::ChaCha8Rng::seed_from_u64(29)
    };
    let coding = FractalCoding::sample(&sched, &levels, &mut rng).unwrap();
    let point = glue_point(&s, &sched, &levels, &coding).unwrap();
    assert!(s.is_admissible(point.symbols()));
    assert_eq!(point.len(), sched.t_k[2]);

    let report = verify_divergence(&s, &sched, &levels, &phi, &coding).unwrap();
    for row in &report.rows {
        assert!(row.pass, "row {row:?}");
    }
    // Budget bound from the schedule invariants: each per-level budget is
    // at most delta + 0.15 ||phi|| under the configured ratio thresholds.
    for row in &report.rows {
        assert!(row.budget <= sched.delta + 0.15 * sched.phi_sup + 1e-12);
    }

    let plan = SamplePlan::for_schedule(&sched, 29);
    let cert = certified_lower_bound(&s, &sched, &levels, &psi, &plan).unwrap();
    assert!(cert.pass);
    // The certified bound sits below the classical pressure of the system.
    let upper = transfer_pressure(&s, &psi).unwrap();
    assert!(cert.s <= upper);
}

#[test]
fn acceptance_budget_bound_arithmetic() {
    let (s, mu1, mu2, phi, psi) = acceptance_setup();
    let params = acceptance_params(0.1, 11);
    let sched = build_schedule(&s, &mu1, &mu2, &phi, &psi, &params).unwrap();
    let levels =
        extract_all_levels(&s, &sched, &phi, &psi, params.enum_budget, params.sample_size, 11)
            .unwrap();
    let coding = FractalCoding::first(&sched, &levels).unwrap();
    let report = verify_divergence(&s, &sched, &levels, &phi, &coding).unwrap();
    for row in &report.rows {
        assert!(
            row.budget <= sched.delta + 0.15 * sched.phi_sup + 1e-12,
            "budget {} too large at level {}",
            row.budget,
            row.k
        );
    }
}

#[test]
fn sabotaged_level_fails_counting_bound() {
    let (s, mu1, mu2, phi, psi) = acceptance_setup();
    let params = acceptance_params(0.1, 11);
    let sched = build_schedule(&s, &mu1, &mu2, &phi, &psi, &params).unwrap();
    let mut levels =
        extract_all_levels(&s, &sched, &phi, &psi, params.enum_budget, params.sample_size, 11)
            .unwrap();
    // Scale one level weight down by e^{-n_k}.
    levels[2] = levels[2].with_scaled_weight(-(sched.n_k[2] as f64) * sched.big_n[2] as f64);
    let plan = SamplePlan::for_schedule(&sched, 11);
    match certified_lower_bound(&s, &sched, &levels, &psi, &plan) {
        Err(Error::CountingBoundFailed { .. }) => {}
        other => panic!("expected CountingBoundFailed, got {:?}", other.map(|c| c.pass)),
    }
}

#[test]
fn absurd_gamma_certifies_trivially() {
    let (s, mu1, mu2, phi, psi) = acceptance_setup();
    let params = acceptance_params(1.0, 3);
    let sched = build_schedule(&s, &mu1, &mu2, &phi, &psi, &params).unwrap();
    let levels =
        extract_all_levels(&s, &sched, &phi, &psi, params.enum_budget, params.sample_size, 3)
            .unwrap();
    let plan = SamplePlan::for_schedule(&sched, 3);
    let cert = certified_lower_bound(&s, &sched, &levels, &psi, &plan).unwrap();
    assert!(cert.pass);
    assert!(cert.s < 0.0);
}

#[test]
fn certified_bound_monotone_in_gamma() {
    let (s, mu1, mu2, phi, psi) = acceptance_setup();
    let mut prev_s = f64::INFINITY;
    for (i, gamma) in [0.1f64, 0.15, 0.25].iter().enumerate() {
        let params = acceptance_params(*gamma, 5 + i as u64);
        let sched = build_schedule(&s, &mu1, &mu2, &phi, &psi, &params).unwrap();
        let levels = extract_all_levels(
            &s,
            &sched,
            &phi,
            &psi,
            params.enum_budget,
            params.sample_size,
            5,
        )
        .unwrap();
        let plan = SamplePlan::for_schedule(&sched, 5);
        let cert = certified_lower_bound(&s, &sched, &levels, &psi, &plan).unwrap();
        assert!(cert.pass);
        assert!(cert.s <= prev_s + 1e-12, "gamma={gamma}");
        prev_s = cert.s;
    }
}

#[test]
fn randomized_tiny_schedules_mass_oracle() {
    // Random tiny instances: random primitive systems, random distinct
    // level words, random weights; every ball mass must match the brute
    // force over all atoms.
    use rand::{Rng, SeedableRng};
    use shiftlab::irregular::{ball_log_mass, PreparedLevels};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9090);
    let mut nontrivial_balls = 0usize;
    for trial in 0..40 {
        let a = rng.gen_range(2..=3);
        let sys = loop {
            let rows: Vec<Vec<u8>> = (0..a)
                .map(|_| (0..a).map(|_| rng.gen_range(0..=1u8)).collect())
                .collect();
            if let Ok(s) = SymbolicSystem::validate(&rows) {
                break s;
            }
        };
        let n1 = rng.gen_range(2..=3);
        let n2 = rng.gen_range(2..=3);
        let all1 = sys.enumerate_words(n1, 1 << 10).unwrap();
        let all2 = sys.enumerate_words(n2, 1 << 10).unwrap();
        if all1.len() < 2 || all2.len() < 2 {
            continue;
        }
        let pick = |rng: &mut rand_chacha::ChaCha8Rng, all: &[Word], count: usize| -> Vec<Word> {
            let mut chosen = std::collections::BTreeSet::new();
            while chosen.len() < count {
                chosen.insert(all[rng.gen_range(0..all.len())].clone());
            }
            chosen.into_iter().collect()
        };
        let w1 = pick(&mut rng, &all1, 2);
        let w2 = pick(&mut rng, &all2, 2.min(all2.len()));
        let lw1: Vec<f64> = (0..w1.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let lw2: Vec<f64> = (0..w2.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let levels = vec![
            LevelData::new(1, w1, lw1).unwrap(),
            LevelData::new(2, w2, lw2).unwrap(),
        ];

        let mu = MarkovMeasure::new(
            &sys,
            sys.transition_rows()
                .iter()
                .map(|row| {
                    let ones = row.iter().filter(|&&e| e == 1).count() as f64;
                    row.iter().map(|&e| e as f64 / ones).collect()
                })
                .collect(),
            None,
        )
        .unwrap();
        let sched = GluingSchedule::manual(
            &sys,
            [mu.clone(), mu],
            [0.0, 1.0],
            0.5,
            0.2,
            0.125,
            vec![n1, n2],
            vec![2, 2],
            0.1,
            1.0,
            RatioThresholds { r1: 40.0, r2: 40.0, r3: 0.999 },
            10_000,
        )
        .unwrap();

        let prepared = PreparedLevels::new(&levels);
        let codings = all_codings(&sched, &levels, 2);
        let atoms: Vec<Word> = codings
            .iter()
            .map(|c| glue_point(&sys, &sched, &levels, c).unwrap())
            .collect();
        let log_kappa: f64 = (0..2).map(|i| 2.0 * levels[i].log_m).sum();

        for n in sched.t_k[0]..sched.t_k[1] {
            let forced = n + 4;
            // Centers: every atom prefix (nontrivial masses) plus random
            // measure-typical words (mostly empty balls).
            let mut centers: Vec<Word> = atoms
                .iter()
                .map(|atom| {
                    if atom.len() >= forced {
                        atom.prefix(forced)
                    } else {
                        sys.canonical_extension(atom, forced - atom.len())
                    }
                })
                .collect();
            for _ in 0..10 {
                centers.push(sched.measures[0].sample_word(&mut rng, forced));
            }
            for q in centers.iter() {
                let got = ball_log_mass(&sys, &sched, &prepared, q, n).unwrap();
                // brute force with canonical extension
                let q_ext = if q.len() >= forced {
                    q.clone()
                } else {
                    sys.canonical_extension(q, forced - q.len())
                };
                let mut want = f64::NEG_INFINITY;
                for (coding, atom) in codings.iter().zip(&atoms) {
                    let atom_ext = if atom.len() >= forced {
                        atom.clone()
                    } else {
                        sys.canonical_extension(atom, forced - atom.len())
                    };
                    if atom_ext.symbols()[..forced] == q_ext.symbols()[..forced] {
                        let mut lw = 0.0;
                        for (i, slots) in coding.address.iter().enumerate() {
                            for &slot in slots {
                                lw += levels[i].log_weights[slot as usize];
                            }
                        }
                        let term = lw - log_kappa;
                        want = if want == f64::NEG_INFINITY {
                            term
                        } else {
                            let m = want.max(term);
                            m + ((want - m).exp() + (term - m).exp()).ln()
                        };
                    }
                }
                if want == f64::NEG_INFINITY {
                    assert_eq!(got, f64::NEG_INFINITY, "trial {trial} n={n} q={q}");
                } else {
                    nontrivial_balls += 1;
                    assert!(
                        (got - want).abs() < 1e-9,
                        "trial {trial} n={n} q={q}: {got} vs {want}"
                    );
                }
            }
        }
    }
    assert!(nontrivial_balls > 200, "only {nontrivial_balls} nontrivial balls exercised");
}

#[test]
fn weighted_certificate_at_scale() {
    // Nonzero weights through the full pipeline: the certified bound must
    // sit below the classical pressure of the weight.
    let s = SymbolicSystem::full_shift(2);
    let mu1 = MarkovMeasure::bernoulli(&s, &[0.5, 0.5]).unwrap();
    let mu2 = MarkovMeasure::bernoulli(&s, &[0.25, 0.75]).unwrap();
    let phi = Potential::from_fn(&s, 1, |w| w[0] as f64).unwrap();
    let psi = Potential::from_fn(&s, 1, |w| 0.8 * w[0] as f64).unwrap();
    let params = acceptance_params(0.2, 19);
    let sched = build_schedule(&s, &mu1, &mu2, &phi, &psi, &params).unwrap();
    // C_target is the better of the exact h + int psi values.
    let c1 = shiftlab::pressure::markov_h_plus_int(&s, &mu1, &psi).unwrap();
    let c2 = shiftlab::pressure::markov_h_plus_int(&s, &mu2, &psi).unwrap();
    assert!((sched.c_target - c1.max(c2)).abs() < 1e-12);

    let levels =
        extract_all_levels(&s, &sched, &phi, &psi, params.enum_budget, params.sample_size, 19)
            .unwrap();
    let plan = SamplePlan::for_schedule(&sched, 19);
    let cert = certified_lower_bound(&s, &sched, &levels, &psi, &plan).unwrap();
    assert!(cert.pass);
    assert!((cert.s - (sched.c_target - 6.0 * sched.gamma)).abs() < 1e-12);
    let classical = transfer_pressure(&s, &psi).unwrap();
    assert!(cert.s <= classical, "certified {} above classical {classical}", cert.s);
    assert!(cert.counting_min_margin >= 0.0);
}

#[test]
fn coding_shape_is_validated() {
    let s = SymbolicSystem::full_shift(2);
    let (sched, levels) = tiny_schedule(&s);
    assert!(FractalCoding::new(&sched, &levels, vec![vec![0]]).is_err());
    assert!(FractalCoding::new(&sched, &levels, vec![vec![0, 2]]).is_err());
    assert!(FractalCoding::new(&sched, &levels, vec![]).is_err());
}
