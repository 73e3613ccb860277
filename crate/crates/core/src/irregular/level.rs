//! Level sets of the construction: heavy separated families of words whose
//! Birkhoff averages sit inside the level filter, with their weights.

use super::schedule::GluingSchedule;
use crate::error::{Error, Result};
use crate::orbit::{birkhoff_sum, separated_set, Potential};
use crate::pressure::MarkovMeasure;
use crate::systems::{Symbol, SymbolicSystem, Word};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeSet, HashMap};

/// One level of the construction: the ordered separated word family and
/// its log weights. `log_m` is the log of the level weight
/// `M_k = sum exp S_{n_k} psi`.
#[derive(Clone, Debug)]
pub struct LevelData {
    pub k: usize,
    pub words: Vec<Word>,
    pub log_weights: Vec<f64>,
    pub log_m: f64,
}

impl LevelData {
    /// Builds a level from distinct equal-length words and their weights.
    pub fn new(k: usize, words: Vec<Word>, log_weights: Vec<f64>) -> Result<Self> {
        if words.is_empty() {
            return Err(Error::invalid("a level needs at least one word"));
        }
        if words.len() != log_weights.len() {
            return Err(Error::invalid("words and weights must pair up"));
        }
        let n = words[0].len();
        if words.iter().any(|w| w.len() != n) {
            return Err(Error::invalid("level words must share one length"));
        }
        let mut seen = BTreeSet::new();
        for w in &words {
            if !seen.insert(w.clone()) {
                return Err(Error::invalid(format!("duplicate level word {w}")));
            }
        }
        let log_m = log_sum_exp(&log_weights);
        Ok(LevelData { k, words, log_weights, log_m })
    }

    pub fn word_len(&self) -> usize {
        self.words[0].len()
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Copy with the level weight scaled by `exp(log_factor)`; a validation
    /// hook for exercising the counting checks downstream.
    pub fn with_scaled_weight(&self, log_factor: f64) -> LevelData {
        let mut out = self.clone();
        out.log_m += log_factor;
        out
    }
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Levels plus the word-to-index maps used by address parsing.
pub struct PreparedLevels<'a> {
    levels: &'a [LevelData],
    index: Vec<HashMap<&'a [Symbol], u32>>,
}

impl<'a> PreparedLevels<'a> {
    pub fn new(levels: &'a [LevelData]) -> Self {
        let index = levels
            .iter()
            .map(|lvl| {
                lvl.words
                    .iter()
                    .enumerate()
                    .map(|(i, w)| (w.symbols(), i as u32))
                    .collect()
            })
            .collect();
        PreparedLevels { levels, index }
    }

    pub fn level(&self, k: usize) -> &LevelData {
        &self.levels[k - 1]
    }

    pub fn count(&self) -> usize {
        self.levels.len()
    }

    /// Index of a block word inside level `k` (1-based).
    pub fn lookup(&self, k: usize, block: &[Symbol]) -> Option<u32> {
        self.index[k - 1].get(block).copied()
    }
}

/// Extracts level `k` (1-based): candidates come from exhaustive
/// enumeration when the word count fits `enum_budget`; otherwise words are
/// sampled from the level's measure until the filtered family already
/// carries the required weight (or a draw cap runs out). Either way the
/// family is reduced to a separated set and checked against the target.
pub fn extract_level(
    system: &SymbolicSystem,
    schedule: &GluingSchedule,
    k: usize,
    phi: &Potential,
    psi: &Potential,
    enum_budget: usize,
    sample_budget: usize,
    seed: u64,
) -> Result<LevelData> {
    if k == 0 || k > schedule.k_max {
        return Err(Error::invalid(format!("level {k} outside 1..={}", schedule.k_max)));
    }
    let n = schedule.n_k[k - 1];
    let delta = schedule.delta_k[k - 1];
    let target = schedule.targets[k - 1];
    let mu = &schedule.measures[schedule.rho[k - 1]];
    let extra = phi.depth().max(psi.depth()) - 1;

    let passes = |x: &Word| -> Result<bool> {
        // |S_n phi / n - target| < delta, scaled by n so integer-valued
        // sums keep exact boundary behavior.
        let sum = birkhoff_sum(phi, x, n)?;
        Ok((sum - n as f64 * target).abs() < n as f64 * delta)
    };

    let mut filtered: Vec<Word> = Vec::new();
    if system.word_count(n) <= enum_budget as u128 {
        for w in system.enumerate_words(n, enum_budget)? {
            let x = system.canonical_extension(&w, extra);
            if passes(&x)? {
                filtered.push(x);
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (k as u64).wrapping_mul(0x9e3779b97f4a7c15));
        let mut seen: BTreeSet<Word> = BTreeSet::new();
        let required_log_m = n as f64 * schedule.required_rate();
        let mut log_m = f64::NEG_INFINITY;
        let draw_cap = sample_budget.saturating_mul(64).max(1 << 20);
        let mut draws = 0usize;
        while log_m < required_log_m + 1e-9 && draws < draw_cap {
            let w = mu.sample_word(&mut rng, n);
            draws += 1;
            if !seen.insert(w.clone()) {
                continue;
            }
            let x = system.canonical_extension(&w, extra);
            if passes(&x)? {
                log_m = log_add(log_m, birkhoff_sum(psi, &x, n)?);
                filtered.push(x);
            }
        }
    }

    if filtered.is_empty() {
        return Err(Error::TargetMissed {
            level: k,
            achieved: f64::NEG_INFINITY,
            required: schedule.required_rate(),
        });
    }
    let separated = separated_set(&filtered, n, 4.0 * schedule.epsilon, psi)?;
    let mut words = Vec::with_capacity(separated.words.len());
    let mut log_weights = Vec::with_capacity(separated.words.len());
    for w in &separated.words {
        log_weights.push(birkhoff_sum(psi, w, n)?);
        words.push(w.prefix(n));
    }
    let level = LevelData::new(k, words, log_weights)?;
    let achieved = level.log_m / n as f64;
    if achieved < schedule.required_rate() - 1e-12 {
        return Err(Error::TargetMissed {
            level: k,
            achieved,
            required: schedule.required_rate(),
        });
    }
    Ok(level)
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Extracts all levels `1..=k_max`.
pub fn extract_all_levels(
    system: &SymbolicSystem,
    schedule: &GluingSchedule,
    phi: &Potential,
    psi: &Potential,
    enum_budget: usize,
    sample_budget: usize,
    seed: u64,
) -> Result<Vec<LevelData>> {
    (1..=schedule.k_max)
        .map(|k| extract_level(system, schedule, k, phi, psi, enum_budget, sample_budget, seed))
        .collect()
}

/// Builds a composite level for the two-measure variant: every word glues
/// a block that is typical for the first measure to a block typical for
/// the second, in time proportions `t1 : t2`. Level weights multiply.
#[allow(clippy::too_many_arguments)]
pub fn two_measure_level(
    system: &SymbolicSystem,
    schedule: &GluingSchedule,
    k: usize,
    mu1: &MarkovMeasure,
    nu: &MarkovMeasure,
    t1: f64,
    t2: f64,
    phi: &Potential,
    psi: &Potential,
    enum_budget: usize,
) -> Result<LevelData> {
    if k == 0 || k > schedule.k_max {
        return Err(Error::invalid(format!("level {k} outside 1..={}", schedule.k_max)));
    }
    if k % 2 != 0 {
        return Err(Error::invalid("composite levels are formed at even levels"));
    }
    if !(t1 > 0.0 && t1 < 1.0) || (t1 + t2 - 1.0).abs() > 1e-12 {
        return Err(Error::invalid("proportions must satisfy t1 in (0,1), t1 + t2 = 1"));
    }
    let m = schedule.m;
    let n = schedule.n_k[k - 1];
    if n <= m + 1 {
        return Err(Error::invalid("composite level word length too small"));
    }
    let n_hat = n - m;
    let len1 = ((t1 * n_hat as f64).floor() as usize).max(1);
    let len2 = ((t2 * n_hat as f64).floor() as usize).max(1);
    let delta = schedule.delta_k[k - 1];
    let extra = phi.depth().max(psi.depth()) - 1;

    let pool = |mu: &MarkovMeasure, len: usize| -> Result<Vec<(Word, f64)>> {
        let target = mu.integral(system, phi)?;
        let words = system.enumerate_words(len, enum_budget)?;
        let mut out = Vec::new();
        for w in words {
            let x = system.canonical_extension(&w, extra);
            let sum = birkhoff_sum(phi, &x, len)?;
            if (sum - len as f64 * target).abs() < len as f64 * delta {
                let lw = birkhoff_sum(psi, &x, len)?;
                out.push((w, lw));
            }
        }
        Ok(out)
    };
    let s1 = pool(mu1, len1)?;
    let s2 = pool(nu, len2)?;
    if s1.is_empty() || s2.is_empty() {
        return Err(Error::TargetMissed {
            level: k,
            achieved: f64::NEG_INFINITY,
            required: schedule.required_rate(),
        });
    }

    let mut words = Vec::with_capacity(s1.len() * s2.len());
    let mut log_weights = Vec::with_capacity(s1.len() * s2.len());
    for (w1, lw1) in &s1 {
        for (w2, lw2) in &s2 {
            let glued = system.connect(w1, w2)?;
            debug_assert_eq!(glued.len(), len1 + m + len2);
            words.push(glued);
            log_weights.push(lw1 + lw2);
        }
    }
    let level = LevelData::new(k, words, log_weights)?;

    // Composite weight target: M_k >= exp((1-gamma)^2 n_k (C - 5 gamma)).
    let g = schedule.gamma;
    let actual_n = len1 + m + len2;
    let required = (1.0 - g) * (1.0 - g) * actual_n as f64 * (schedule.c_target - 5.0 * g);
    if level.log_m < required - 1e-12 {
        return Err(Error::TargetMissed {
            level: k,
            achieved: level.log_m / actual_n as f64,
            required: required / actual_n as f64,
        });
    }
    Ok(level)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::irregular::schedule::RatioThresholds;

    fn two_level_schedule(system: &SymbolicSystem) -> GluingSchedule {
        let mu1 = MarkovMeasure::bernoulli(system, &[0.5, 0.5]).unwrap();
        let mu2 = MarkovMeasure::bernoulli(system, &[0.25, 0.75]).unwrap();
        GluingSchedule::manual(
            system,
            [mu1, mu2],
            [0.5, 0.75],
            0.5,
            0.05,
            0.125,
            vec![4, 8],
            vec![2, 2],
            2f64.ln(),
            1.0,
            RatioThresholds { r1: 20.0, r2: 20.0, r3: 0.99 },
            10_000,
        )
        .unwrap()
    }

    #[test]
    fn level_weight_identities() {
        // With a large filter width the filter is vacuous and the level is
        // every word; constant weights factor out of the level weight.
        let s = SymbolicSystem::full_shift(2);
        let mut sched = two_level_schedule(&s);
        sched.delta_k = vec![2.0, 2.0];
        let phi = Potential::from_fn(&s, 1, |w| w[0] as f64).unwrap();
        let c = 0.7;
        let psi = Potential::constant(&s, c);
        let lvl = extract_level(&s, &sched, 1, &phi, &psi, 1 << 20, 0, 1).unwrap();
        assert_eq!(lvl.len(), 16);
        let expect = (16f64).ln() + c * 4.0;
        assert!((lvl.log_m - expect).abs() < 1e-12);
    }

    #[test]
    fn binomial_filter_counts() {
        // Filter |#1s/n - 1/2| < 0.1 at n = 20 keeps symbol counts 9..=11;
        // the level weight is the binomial mass of that band.
        let s = SymbolicSystem::full_shift(2);
        let mu1 = MarkovMeasure::bernoulli(&s, &[0.5, 0.5]).unwrap();
        let mu2 = MarkovMeasure::bernoulli(&s, &[0.25, 0.75]).unwrap();
        let sched = GluingSchedule::manual(
            &s,
            [mu1, mu2],
            [0.5, 0.75],
            0.5,
            0.05,
            0.125,
            vec![20, 21],
            vec![2, 2],
            2f64.ln(),
            1.0,
            RatioThresholds { r1: 20.0, r2: 20.0, r3: 0.99 },
            10_000,
        )
        .unwrap();
        let mut sched = sched;
        sched.delta_k = vec![0.1, 0.1];
        let phi = Potential::from_fn(&s, 1, |w| w[0] as f64).unwrap();
        let psi = Potential::constant(&s, 0.0);
        let lvl = extract_level(&s, &sched, 1, &phi, &psi, 1 << 21, 0, 1).unwrap();
        let binom = |n: u64, k: u64| -> u64 {
            let mut r = 1u64;
            for i in 0..k {
                r = r * (n - i) / (i + 1);
            }
            r
        };
        let expected: u64 = (9..=11).map(|c| binom(20, c)).sum();
        assert_eq!(lvl.len() as u64, expected);
        assert_eq!(expected, 520_676);
        assert!((lvl.log_m - (expected as f64).ln()).abs() < 1e-9);
    }

    #[test]
    fn sampling_mode_levels_hit_targets() {
        // Force the sampling path with a small enumeration budget; the
        // sampler draws until the family weight clears the target.
        let s = SymbolicSystem::full_shift(2);
        let mut sched = two_level_schedule(&s);
        sched.gamma = 0.12; // required rate ln 2 - 0.48, needs ~6 words at n = 8
        let phi = Potential::from_fn(&s, 1, |w| w[0] as f64).unwrap();
        let psi = Potential::constant(&s, 0.0);
        let lvl = extract_level(&s, &sched, 2, &phi, &psi, 4, 4_000, 9).unwrap();
        assert_eq!(lvl.word_len(), 8);
        let rate = lvl.log_m / 8.0;
        assert!(rate >= sched.required_rate());
        assert!(lvl.len() >= 6, "len {}", lvl.len());
        // Deterministic for a fixed seed.
        let again = extract_level(&s, &sched, 2, &phi, &psi, 4, 4_000, 9).unwrap();
        assert_eq!(lvl.words, again.words);
        // All sampled words satisfy the filter window.
        for w in &lvl.words {
            let avg = birkhoff_sum(&phi, w, 8).unwrap() / 8.0;
            assert!((avg - 0.75).abs() < sched.delta_k[1]);
        }
    }

    #[test]
    fn target_missed_when_filter_empties() {
        let s = SymbolicSystem::full_shift(2);
        let mut sched = two_level_schedule(&s);
        // No 4-word has average within 1e-6 of 0.5 +- off-grid target.
        sched.targets = vec![0.507, 0.75];
        sched.delta_k = vec![1e-6, 0.025];
        let phi = Potential::from_fn(&s, 1, |w| w[0] as f64).unwrap();
        let psi = Potential::constant(&s, 0.0);
        match extract_level(&s, &sched, 1, &phi, &psi, 1 << 20, 0, 1) {
            Err(Error::TargetMissed { level: 1, .. }) => {}
            other => panic!("expected TargetMissed, got {other:?}"),
        }
    }

    #[test]
    fn composite_level_examples() {
        let s = SymbolicSystem::full_shift(2);
        let mut sched = two_level_schedule(&s);
        sched.n_k = vec![4, 8];
        // Widen the filters so each half-pool keeps exactly the words with
        // the right symbol count.
        sched.delta_k = vec![0.3, 0.3];
        let mu1 = MarkovMeasure::bernoulli(&s, &[0.5, 0.5]).unwrap();
        let nu = MarkovMeasure::bernoulli(&s, &[0.25, 0.75]).unwrap();
        let phi = Potential::from_fn(&s, 1, |w| w[0] as f64).unwrap();
        let psi = Potential::constant(&s, 0.0);

        match two_measure_level(&s, &sched, 2, &mu1, &nu, 1.0, 0.0, &phi, &psi, 1 << 16) {
            Err(Error::InvalidInput(_)) => {}
            other => panic!("expected proportion rejection, got {other:?}"),
        }
        match two_measure_level(&s, &sched, 1, &mu1, &nu, 0.5, 0.5, &phi, &psi, 1 << 16) {
            Err(Error::InvalidInput(_)) => {}
            other => panic!("expected even-level rejection, got {other:?}"),
        }

        let lvl = two_measure_level(&s, &sched, 2, &mu1, &nu, 0.5, 0.5, &phi, &psi, 1 << 16)
            .unwrap();
        // len1 = len2 = 4: pools are the words with average within 0.3 of
        // 1/2 resp. 3/4; every composite contains both sub-blocks verbatim.
        assert_eq!(lvl.word_len(), 8);
        let pool1: Vec<&Word> = lvl.words.iter().take(1).collect();
        assert_eq!(pool1[0].len(), 8);
        // Weight identity: log M = log M1 + log M2 for psi = 0 means
        // #composites = #pool1 * #pool2.
        let count = lvl.len() as f64;
        assert!((lvl.log_m - count.ln()).abs() < 1e-12);
    }

    #[test]
    fn composite_level_tiny_pools() {
        // Two words in each half-pool give four composites, each containing
        // its sub-blocks verbatim.
        let s = SymbolicSystem::full_shift(2);
        let mut sched = two_level_schedule(&s);
        sched.n_k = vec![4, 4];
        sched.delta_k = vec![0.3, 0.13];
        sched.gamma = 0.9;
        let mu1 = MarkovMeasure::bernoulli(&s, &[0.5, 0.5]).unwrap();
        let nu = MarkovMeasure::bernoulli(&s, &[0.25, 0.75]).unwrap();
        let phi = Potential::from_fn(&s, 1, |w| w[0] as f64).unwrap();
        let psi = Potential::constant(&s, 0.0);
        // len1 = len2 = 2: pool1 = words with avg in (0.37, 0.63) = {01, 10},
        // pool2 = words with avg in (0.62, 0.88) = {11}? avg of 2-words is
        // 0, 1/2 or 1; target 3/4 width 0.13 keeps nothing. Widen:
        sched.delta_k = vec![0.3, 0.3];
        let lvl =
            two_measure_level(&s, &sched, 2, &mu1, &nu, 0.5, 0.5, &phi, &psi, 1 << 16).unwrap();
        // pool2 = words with avg in (0.45, 1.05) = {01, 10, 11}.
        assert_eq!(lvl.len(), 2 * 3);
        for w in &lvl.words {
            let first = &w.symbols()[..2];
            let second = &w.symbols()[2..];
            assert!([[0u8, 1], [1, 0]].iter().any(|p| p == first));
            assert!([[0u8, 1], [1, 0], [1, 1]].iter().any(|p| p == second));
        }
    }
}
