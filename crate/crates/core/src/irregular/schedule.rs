//! Gluing schedules: every parameter of the construction (filter widths,
//! word lengths, block counts, prescription times) plus validation of the
//! finite-scale ratio requirements and the symbol budget.

use crate::error::{Error, Result};
use crate::orbit::Potential;
use crate::pressure::{markov_h_plus_int, MarkovMeasure};
use crate::systems::SymbolicSystem;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Finite-scale replacements for the asymptotic growth requirements on the
/// block counts: `(n_{k+1} + m) / N_k <= r1`,
/// `sum_{i<=k} N_i (n_i + m) / N_{k+1} <= r2`, and `c_k / t_k >= 1 - r3`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RatioThresholds {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
}

impl Default for RatioThresholds {
    fn default() -> Self {
        RatioThresholds { r1: 0.05, r2: 0.05, r3: 0.1 }
    }
}

/// Inputs to [`build_schedule`].
#[derive(Clone, Debug)]
pub struct ScheduleParams {
    pub gamma: f64,
    pub k_max: usize,
    /// Symbol budget: the final prescription time `t_K` may not exceed it.
    pub budget: usize,
    pub epsilon: f64,
    pub thresholds: RatioThresholds,
    /// Cap on exhaustive word enumeration; larger pools are sampled.
    pub enum_budget: usize,
    /// Number of draws used when a pool is estimated by sampling.
    pub sample_size: usize,
    pub seed: u64,
    /// Candidate word lengths examined for the levels, in increasing order.
    pub n_grid: Vec<usize>,
}

impl ScheduleParams {
    pub fn new(gamma: f64, k_max: usize, budget: usize, seed: u64) -> Self {
        ScheduleParams {
            gamma,
            k_max,
            budget,
            epsilon: 0.125,
            thresholds: RatioThresholds::default(),
            enum_budget: 1 << 21,
            sample_size: 20_000,
            seed,
            n_grid: (1..=16).map(|i| 4 * i).collect(),
        }
    }
}

/// Diagnostics recorded while the schedule was built.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ScheduleReport {
    /// Estimated probability that a measure-typical word of length `n_k`
    /// passes the level filter.
    pub filter_frequency: Vec<f64>,
    /// Estimated `(1/n) log` pool weight at the chosen `n_k`.
    pub pool_rate: Vec<f64>,
    /// Actual ratios achieved: `(n_{k+1}+m)/N_k`, cumulative time over
    /// `N_{k+1}`, and `c_k/t_k`.
    pub ratio1: Vec<f64>,
    pub ratio2: Vec<f64>,
    pub prescription_fraction: Vec<f64>,
}

/// All parameters of one gluing construction.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GluingSchedule {
    pub gamma: f64,
    pub delta: f64,
    pub epsilon: f64,
    /// Interior gap inserted by gluing: `p - 1` symbols, uniform in scale.
    pub m: usize,
    pub delta_k: Vec<f64>,
    pub l_k: Vec<usize>,
    pub n_k: Vec<usize>,
    pub big_n: Vec<usize>,
    pub c_k: Vec<usize>,
    pub t_k: Vec<usize>,
    pub k_max: usize,
    pub c_target: f64,
    pub budget: usize,
    pub thresholds: RatioThresholds,
    /// The two ergodic measures driving the alternation.
    pub measures: Vec<MarkovMeasure>,
    /// Measure index (0 or 1) per level: odd levels follow the first.
    pub rho: Vec<usize>,
    /// Oscillation targets per level: the observable integral of the
    /// level's measure.
    pub targets: Vec<f64>,
    pub phi_sup: f64,
    pub report: ScheduleReport,
}

impl GluingSchedule {
    /// Target weight rate each level must achieve:
    /// `(1/n_k) log M_k >= c_target - 4 gamma`.
    pub fn required_rate(&self) -> f64 {
        self.c_target - 4.0 * self.gamma
    }

    /// Level index (1-based) with `t_k <= n < t_{k+1}`.
    pub fn level_of_horizon(&self, n: usize) -> Result<usize> {
        if self.k_max < 2 || n < self.t_k[0] || n >= self.t_k[self.k_max - 1] {
            return Err(Error::invalid(format!(
                "horizon {n} outside [t_1, t_K) = [{}, {})",
                self.t_k[0],
                self.t_k[self.k_max - 1]
            )));
        }
        let mut k = 1;
        while k < self.k_max && self.t_k[k] <= n {
            k += 1;
        }
        Ok(k)
    }

    /// Number of fully prescribed blocks of level `k+1` below horizon `n`.
    pub fn forced_blocks(&self, k: usize, n: usize) -> usize {
        let span = self.n_k[k] + self.m;
        (n - self.t_k[k - 1]) / span
    }

    /// Hand-built schedule for small experiments and tests. The level word
    /// lengths and block counts are given directly; filter widths default
    /// to the halving sequence.
    #[allow(clippy::too_many_arguments)]
    pub fn manual(
        system: &SymbolicSystem,
        measures: [MarkovMeasure; 2],
        targets_by_measure: [f64; 2],
        gamma: f64,
        delta: f64,
        epsilon: f64,
        n_k: Vec<usize>,
        big_n: Vec<usize>,
        c_target: f64,
        phi_sup: f64,
        thresholds: RatioThresholds,
        budget: usize,
    ) -> Result<GluingSchedule> {
        let k_max = n_k.len();
        if big_n.len() != k_max || k_max == 0 {
            return Err(Error::invalid("n_k and N_k must have equal nonzero length"));
        }
        let m = system.gap();
        let delta_min = delta / 64.0;
        let delta_k: Vec<f64> = (0..k_max)
            .map(|i| (delta / 2f64.powi(i as i32)).max(delta_min))
            .collect();
        let rho: Vec<usize> = (0..k_max).map(|i| i % 2).collect();
        let targets: Vec<f64> = rho.iter().map(|&r| targets_by_measure[r]).collect();
        let (c_k, t_k) = prescription_times(&n_k, &big_n, m);
        let l_k: Vec<usize> = (1..=k_max).collect();
        let schedule = GluingSchedule {
            gamma,
            delta,
            epsilon,
            m,
            delta_k,
            l_k,
            n_k,
            big_n,
            c_k,
            t_k,
            k_max,
            c_target,
            budget,
            thresholds,
            measures: measures.to_vec(),
            rho,
            targets,
            phi_sup,
            report: ScheduleReport::default(),
        };
        schedule.validate()?;
        Ok(schedule)
    }

    /// Checks every structural invariant: vector shapes, monotonicity,
    /// the prescription-time recursion, the ratio thresholds and the
    /// symbol budget.
    pub fn validate(&self) -> Result<()> {
        let k = self.k_max;
        if k == 0 {
            return Err(Error::invalid("schedule must have at least one level"));
        }
        for (name, len) in [
            ("delta_k", self.delta_k.len()),
            ("l_k", self.l_k.len()),
            ("n_k", self.n_k.len()),
            ("N_k", self.big_n.len()),
            ("c_k", self.c_k.len()),
            ("t_k", self.t_k.len()),
            ("rho", self.rho.len()),
            ("targets", self.targets.len()),
        ] {
            if len != k {
                return Err(Error::invalid(format!("{name} has length {len}, expected {k}")));
            }
        }
        if !(self.gamma > 0.0) {
            return Err(Error::invalid("gamma must be positive"));
        }
        if self.measures.len() != 2 {
            return Err(Error::invalid("schedule carries exactly two measures"));
        }
        let spread = (self.targets_by_measure()[0] - self.targets_by_measure()[1]).abs();
        if !(spread > 4.0 * self.delta) {
            return Err(Error::invalid(format!(
                "observable spread {spread} does not exceed 4 delta = {}",
                4.0 * self.delta
            )));
        }
        for i in 0..k {
            if self.n_k[i] < self.l_k[i] {
                return Err(Error::invalid(format!("n_{} below onset l_{}", i + 1, i + 1)));
            }
            if self.big_n[i] < 1 {
                return Err(Error::invalid("block counts must be at least 1"));
            }
            if i > 0 {
                if self.delta_k[i] > self.delta_k[i - 1] {
                    return Err(Error::invalid("filter widths must be non-increasing"));
                }
                if self.l_k[i] <= self.l_k[i - 1] {
                    return Err(Error::invalid("onsets l_k must increase"));
                }
            }
        }
        let (c_k, t_k) = prescription_times(&self.n_k, &self.big_n, self.m);
        if c_k != self.c_k || t_k != self.t_k {
            return Err(Error::invalid("prescription times do not match the recursion"));
        }
        for i in 0..k.saturating_sub(1) {
            let r1 = (self.n_k[i + 1] + self.m) as f64 / self.big_n[i] as f64;
            if r1 > self.thresholds.r1 + 1e-12 {
                return Err(Error::invalid(format!(
                    "ratio (n_{}+m)/N_{} = {r1} exceeds r1 = {}",
                    i + 2,
                    i + 1,
                    self.thresholds.r1
                )));
            }
            let cum: usize = (0..=i).map(|j| self.big_n[j] * (self.n_k[j] + self.m)).sum();
            let r2 = cum as f64 / self.big_n[i + 1] as f64;
            if r2 > self.thresholds.r2 + 1e-12 {
                return Err(Error::invalid(format!(
                    "cumulative ratio {r2} at level {} exceeds r2 = {}",
                    i + 1,
                    self.thresholds.r2
                )));
            }
        }
        for i in 1..k {
            let frac = self.c_k[i] as f64 / self.t_k[i] as f64;
            if frac < 1.0 - self.thresholds.r3 - 1e-12 {
                return Err(Error::invalid(format!(
                    "prescription fraction c_{}/t_{} = {frac} below 1 - r3",
                    i + 1,
                    i + 1
                )));
            }
        }
        if self.t_k[k - 1] > self.budget {
            return Err(Error::BudgetExceeded {
                needed: self.t_k[k - 1] as u128,
                cap: self.budget as u128,
                context: format!("prescription time t_{k}"),
            });
        }
        Ok(())
    }

    pub fn targets_by_measure(&self) -> [f64; 2] {
        let mut out = [f64::NAN; 2];
        for (i, &r) in self.rho.iter().enumerate() {
            if out[r].is_nan() {
                out[r] = self.targets[i];
            }
        }
        if out[1].is_nan() {
            out[1] = out[0];
        }
        out
    }
}

fn prescription_times(n_k: &[usize], big_n: &[usize], m: usize) -> (Vec<usize>, Vec<usize>) {
    let mut c_k = Vec::with_capacity(n_k.len());
    let mut t_k = Vec::with_capacity(n_k.len());
    for i in 0..n_k.len() {
        let c = big_n[i] * n_k[i] + (big_n[i] - 1) * m;
        c_k.push(c);
        let t = if i == 0 { c } else { t_k[i - 1] + m + c };
        t_k.push(t);
    }
    (c_k, t_k)
}

/// Estimated `(1/n) log` of the filtered pool weight together with the
/// filter pass frequency, by exhaustive enumeration when the word count
/// fits the budget and by importance sampling from the measure otherwise.
#[allow(clippy::too_many_arguments)]
fn pool_estimate(
    system: &SymbolicSystem,
    mu: &MarkovMeasure,
    phi: &Potential,
    psi: &Potential,
    target: f64,
    delta: f64,
    n: usize,
    enum_budget: usize,
    sample_size: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, f64)> {
    let extra = phi.depth().max(psi.depth()) - 1;
    if system.word_count(n) <= enum_budget as u128 {
        let words = system.enumerate_words(n, enum_budget)?;
        let mut terms = Vec::new();
        let mut freq_mass = 0.0;
        for w in &words {
            let x = system.canonical_extension(w, extra);
            let sum = crate::orbit::birkhoff_sum(phi, &x, n)?;
            if (sum - n as f64 * target).abs() < n as f64 * delta {
                terms.push(crate::orbit::birkhoff_sum(psi, &x, n)?);
                let lm = mu.log_cylinder_mass(w);
                if lm.is_finite() {
                    freq_mass += lm.exp();
                }
            }
        }
        let rate = log_sum_exp(&terms) / n as f64;
        Ok((rate, freq_mass))
    } else {
        let mut terms = Vec::new();
        let mut hits = 0usize;
        for _ in 0..sample_size {
            let w = mu.sample_word(rng, n);
            let x = system.canonical_extension(&w, extra);
            let sum = crate::orbit::birkhoff_sum(phi, &x, n)?;
            if (sum - n as f64 * target).abs() < n as f64 * delta {
                hits += 1;
                terms.push(crate::orbit::birkhoff_sum(psi, &x, n)? - mu.log_cylinder_mass(&w));
            }
        }
        let rate = (log_sum_exp(&terms) - (sample_size as f64).ln()) / n as f64;
        Ok((rate, hits as f64 / sample_size as f64))
    }
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Builds a schedule for the alternating construction: filter widths from
/// the observable spread, onset lengths from the estimated pool rates,
/// block counts from the ratio thresholds, all within the symbol budget.
pub fn build_schedule(
    system: &SymbolicSystem,
    mu1: &MarkovMeasure,
    mu2: &MarkovMeasure,
    phi: &Potential,
    psi: &Potential,
    params: &ScheduleParams,
) -> Result<GluingSchedule> {
    if !(params.gamma > 0.0) {
        return Err(Error::invalid("gamma must be positive"));
    }
    if params.k_max < 2 {
        return Err(Error::invalid("the alternating construction needs at least two levels"));
    }
    let int1 = mu1.integral(system, phi)?;
    let int2 = mu2.integral(system, phi)?;
    let gap = (int1 - int2).abs();
    if gap < 1e-12 {
        return Err(Error::DegenerateMeasures { value: int1 });
    }
    let delta = gap / 5.0;
    let delta_min = delta / 64.0;
    let delta_k: Vec<f64> = (0..params.k_max)
        .map(|i| (delta / 2f64.powi(i as i32)).max(delta_min))
        .collect();
    let c1 = markov_h_plus_int(system, mu1, psi)?;
    let c2 = markov_h_plus_int(system, mu2, psi)?;
    let c_target = c1.max(c2);
    let required = c_target - 4.0 * params.gamma;

    let measures = [mu1.clone(), mu2.clone()];
    let ints = [int1, int2];
    let rho: Vec<usize> = (0..params.k_max).map(|i| i % 2).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    // Onsets and level lengths: the smallest grid length at which the
    // filtered pool already carries the required weight rate.
    let mut l_k = Vec::with_capacity(params.k_max);
    let mut n_k = Vec::with_capacity(params.k_max);
    let mut pool_rates = Vec::with_capacity(params.k_max);
    let mut freqs = Vec::with_capacity(params.k_max);
    for k in 0..params.k_max {
        let floor = if k == 0 { 0 } else { l_k[k - 1] };
        let mut found = None;
        for &n in params.n_grid.iter().filter(|&&n| n > floor) {
            let (rate, freq) = pool_estimate(
                system,
                &measures[rho[k]],
                phi,
                psi,
                ints[rho[k]],
                delta_k[k],
                n,
                params.enum_budget,
                params.sample_size,
                &mut rng,
            )?;
            if rate >= required {
                found = Some((n, rate, freq));
                break;
            }
        }
        let (n, rate, freq) = found.ok_or_else(|| Error::BudgetExceeded {
            needed: (params.n_grid.last().copied().unwrap_or(0) + 1) as u128,
            cap: *params.n_grid.last().unwrap_or(&0) as u128,
            context: format!(
                "no word length in the grid reaches the level-{} weight target",
                k + 1
            ),
        })?;
        l_k.push(n);
        n_k.push(n);
        pool_rates.push(rate);
        freqs.push(freq);
    }

    // Block counts: the prescription-fraction threshold drives the growth;
    // the r1 requirement seeds the first level.
    let m = system.gap();
    let t = &params.thresholds;
    let mut big_n: Vec<usize> = Vec::with_capacity(params.k_max);
    let mut t_prev = 0usize;
    for k in 0..params.k_max {
        let mut n_blocks = 2usize;
        if k + 1 < params.k_max {
            let r1_need = ((n_k[k + 1] + m) as f64 / t.r1).ceil() as usize;
            n_blocks = n_blocks.max(r1_need);
        }
        if k > 0 {
            let growth = (1.0 - t.r3) / t.r3;
            let c_need = growth * (t_prev + m) as f64;
            let from_r3 = ((c_need + m as f64) / (n_k[k] + m) as f64).ceil() as usize;
            n_blocks = n_blocks.max(from_r3);
            let cum: usize = (0..k).map(|j| big_n[j] * (n_k[j] + m)).sum();
            let from_r2 = (cum as f64 / t.r2).ceil() as usize;
            n_blocks = n_blocks.max(from_r2);
        }
        big_n.push(n_blocks);
        let c = n_blocks * n_k[k] + (n_blocks - 1) * m;
        t_prev = if k == 0 { c } else { t_prev + m + c };
        if t_prev > params.budget {
            return Err(Error::BudgetExceeded {
                needed: t_prev as u128,
                cap: params.budget as u128,
                context: format!("prescription time t_{} exceeds the symbol budget", k + 1),
            });
        }
    }

    let (c_k, t_k) = prescription_times(&n_k, &big_n, m);
    let report = ScheduleReport {
        filter_frequency: freqs,
        pool_rate: pool_rates,
        ratio1: (0..params.k_max - 1)
            .map(|i| (n_k[i + 1] + m) as f64 / big_n[i] as f64)
            .collect(),
        ratio2: (0..params.k_max - 1)
            .map(|i| {
                let cum: usize = (0..=i).map(|j| big_n[j] * (n_k[j] + m)).sum();
                cum as f64 / big_n[i + 1] as f64
            })
            .collect(),
        prescription_fraction: (0..params.k_max)
            .map(|i| c_k[i] as f64 / t_k[i] as f64)
            .collect(),
    };
    let targets: Vec<f64> = rho.iter().map(|&r| ints[r]).collect();
    let schedule = GluingSchedule {
        gamma: params.gamma,
        delta,
        epsilon: params.epsilon,
        m,
        delta_k,
        l_k,
        n_k,
        big_n,
        c_k,
        t_k,
        k_max: params.k_max,
        c_target,
        budget: params.budget,
        thresholds: params.thresholds,
        measures: measures.to_vec(),
        rho,
        targets,
        phi_sup: phi.sup_norm(),
        report,
    };
    schedule.validate()?;
    Ok(schedule)
}
