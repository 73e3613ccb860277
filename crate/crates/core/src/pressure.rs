//! Topological pressure: the exact spectral oracle for classical pressure,
//! the finite-horizon separated-set estimator, dimension-type pressure of
//! arbitrary word sets through weighted Bowen-ball covers, the ball-mass
//! distribution principle as a lower-bound certifier, and a weighted
//! spanning-set estimator for `h_mu + int psi dmu`.

use crate::error::{Error, Result};
use crate::lift::LiftGraph;
use crate::orbit::{self, birkhoff_sum, bowen_distance, separated_set, Potential};
use crate::systems::{Symbol, SymbolicSystem, Word};
use rand::Rng;
use serde::{Deserialize, Serialize};

const POWER_TOL: f64 = 1e-13;
const POWER_CAP: usize = 1_000_000;

/// An ergodic Markov (or Bernoulli) measure on a shift of finite type:
/// a stochastic matrix supported on the admissible transitions together
/// with its stationary vector.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MarkovMeasure {
    p: Vec<f64>,
    pi: Vec<f64>,
    alphabet: usize,
    bernoulli: bool,
}

impl MarkovMeasure {
    pub fn new(system: &SymbolicSystem, rows: Vec<Vec<f64>>, pi: Option<Vec<f64>>) -> Result<Self> {
        let a = system.alphabet_size();
        if rows.len() != a {
            return Err(Error::invalid("stochastic matrix size does not match alphabet"));
        }
        let mut p = Vec::with_capacity(a * a);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != a {
                return Err(Error::invalid("stochastic matrix must be square"));
            }
            let mut sum = 0.0;
            for (j, &e) in row.iter().enumerate() {
                if e < 0.0 || !e.is_finite() {
                    return Err(Error::invalid("stochastic entries must be finite and nonnegative"));
                }
                if e > 0.0 && !system.is_admissible_pair(i as Symbol, j as Symbol) {
                    return Err(Error::invalid(format!(
                        "measure puts mass on forbidden transition {i} -> {j}"
                    )));
                }
                sum += e;
                p.push(e);
            }
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::invalid(format!("row {i} sums to {sum}, not 1")));
            }
        }
        let pi = match pi {
            Some(v) => {
                if v.len() != a {
                    return Err(Error::invalid("stationary vector size mismatch"));
                }
                let sum: f64 = v.iter().sum();
                if (sum - 1.0).abs() > 1e-10 || v.iter().any(|&x| x <= 0.0) {
                    return Err(Error::invalid("stationary vector must be positive and sum to 1"));
                }
                for j in 0..a {
                    let img: f64 = (0..a).map(|i| v[i] * p[i * a + j]).sum();
                    if (img - v[j]).abs() > 1e-10 {
                        return Err(Error::invalid("supplied vector is not stationary"));
                    }
                }
                v
            }
            None => stationary_vector(&p, a)?,
        };
        let bernoulli = (1..a).all(|i| (0..a).all(|j| (p[i * a + j] - p[j]).abs() < 1e-15));
        Ok(MarkovMeasure { p, pi, alphabet: a, bernoulli })
    }

    /// A Bernoulli measure on the full shift with the given symbol
    /// probabilities.
    pub fn bernoulli(system: &SymbolicSystem, probs: &[f64]) -> Result<Self> {
        let rows = vec![probs.to_vec(); system.alphabet_size()];
        let m = Self::new(system, rows, None)?;
        debug_assert!(m.bernoulli);
        Ok(m)
    }

    pub fn is_bernoulli(&self) -> bool {
        self.bernoulli
    }

    pub fn stationary(&self) -> &[f64] {
        &self.pi
    }

    pub fn transition(&self, from: Symbol, to: Symbol) -> f64 {
        self.p[from as usize * self.alphabet + to as usize]
    }

    /// `log mu([w])`; `-inf` when the cylinder is null.
    pub fn log_cylinder_mass(&self, w: &Word) -> f64 {
        let syms = w.symbols();
        if syms.is_empty() {
            return 0.0;
        }
        let mut log = self.pi[syms[0] as usize].ln();
        for pair in syms.windows(2) {
            let t = self.transition(pair[0], pair[1]);
            if t == 0.0 {
                return f64::NEG_INFINITY;
            }
            log += t.ln();
        }
        log
    }

    /// Entropy rate `-sum_a pi_a sum_b P_ab log P_ab` (nats).
    pub fn entropy(&self) -> f64 {
        let a = self.alphabet;
        let mut h = 0.0;
        for i in 0..a {
            for j in 0..a {
                let t = self.p[i * a + j];
                if t > 0.0 {
                    h -= self.pi[i] * t * t.ln();
                }
            }
        }
        h
    }

    /// Exact integral of a locally constant potential: the cylinder sum
    /// `sum_u mu([u]) phi(u)` over admissible depth-words.
    pub fn integral(&self, system: &SymbolicSystem, phi: &Potential) -> Result<f64> {
        if system.alphabet_size() != self.alphabet {
            return Err(Error::invalid("measure and potential live on different alphabets"));
        }
        let mut sum = 0.0;
        for w in phi.table_words() {
            let log_mass = self.log_cylinder_mass(w);
            if log_mass.is_finite() {
                sum += log_mass.exp() * phi.eval(w.symbols())?;
            }
        }
        Ok(sum)
    }

    /// Samples an admissible word of length `n` from the measure.
    pub fn sample_word(&self, rng: &mut impl Rng, n: usize) -> Word {
        let a = self.alphabet;
        let mut syms = Vec::with_capacity(n);
        let mut cur = sample_index(rng, &self.pi);
        syms.push(cur as Symbol);
        for _ in 1..n {
            let row = &self.p[cur * a..(cur + 1) * a];
            cur = sample_index(rng, row);
            syms.push(cur as Symbol);
        }
        Word::from_vec_unchecked(syms)
    }
}

fn sample_index(rng: &mut impl Rng, weights: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

fn stationary_vector(p: &[f64], a: usize) -> Result<Vec<f64>> {
    let mut v = vec![1.0 / a as f64; a];
    for _ in 0..200_000 {
        let mut next = vec![0.0; a];
        for i in 0..a {
            for j in 0..a {
                next[j] += v[i] * p[i * a + j];
            }
        }
        let sum: f64 = next.iter().sum();
        for x in &mut next {
            *x /= sum;
        }
        let diff: f64 = next.iter().zip(&v).map(|(x, y)| (x - y).abs()).sum();
        v = next;
        if diff < 1e-15 {
            if v.iter().any(|&x| x <= 0.0) {
                return Err(Error::invalid("stationary vector is not strictly positive"));
            }
            return Ok(v);
        }
    }
    Err(Error::NonConvergence { iterations: 200_000 })
}

/// Exact oracle for `h_mu + int psi dmu` of a Markov measure.
pub fn markov_h_plus_int(
    system: &SymbolicSystem,
    mu: &MarkovMeasure,
    psi: &Potential,
) -> Result<f64> {
    Ok(mu.entropy() + mu.integral(system, psi)?)
}

/// Exact classical pressure of a locally constant potential: the log of
/// the Perron root of the weighted word-graph matrix
/// `L[w, w'] = exp psi(w . last(w'))`, computed by power iteration with
/// two-sided Collatz-Wielandt bounds to relative tolerance 1e-13.
pub fn transfer_pressure(system: &SymbolicSystem, psi: &Potential) -> Result<f64> {
    let lift = LiftGraph::for_depth(system, psi.depth())?;
    let m = lift.node_count();
    // Edge weights exp(psi(window)); scale by exp(-max) for stability.
    let mut log_weights: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
    let mut max_log = f64::NEG_INFINITY;
    for from in 0..m {
        for &(to, sym) in &lift.edges[from] {
            let lw = lift.edge_value(psi, from, sym)?;
            max_log = max_log.max(lw);
            log_weights[from].push((to, lw));
        }
    }
    let weights: Vec<Vec<(usize, f64)>> = log_weights
        .iter()
        .map(|row| row.iter().map(|&(to, lw)| (to, (lw - max_log).exp())).collect())
        .collect();

    let mut v = vec![1.0f64; m];
    for iter in 0..POWER_CAP {
        let mut next = vec![0.0f64; m];
        for from in 0..m {
            let vi = v[from];
            if vi == 0.0 {
                continue;
            }
            for &(to, w) in &weights[from] {
                next[to] += w * vi;
            }
        }
        let positive = next.iter().all(|&x| x > 0.0) && v.iter().all(|&x| x > 0.0);
        if positive {
            let mut lo = f64::INFINITY;
            let mut hi = 0.0f64;
            // Collatz-Wielandt bounds on the column-action: next = L^T-free;
            // we iterate x -> xL by rows, so compare componentwise growth.
            for i in 0..m {
                let r = next[i] / v[i];
                lo = lo.min(r);
                hi = hi.max(r);
            }
            if hi - lo <= POWER_TOL * hi {
                let lambda = 0.5 * (lo + hi);
                return Ok(lambda.ln() + max_log);
            }
        }
        let norm: f64 = next.iter().sum();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::NonConvergence { iterations: iter });
        }
        for x in &mut next {
            *x /= norm;
        }
        v = next;
    }
    Err(Error::NonConvergence { iterations: POWER_CAP })
}

/// Finite-horizon pressure estimate: `(1/n) log` of the separated-set
/// weight over all admissible `n`-words (periodically extended so the
/// weight windows are defined). Converges to [`transfer_pressure`] as
/// `n` grows.
pub fn pressure_estimate(
    system: &SymbolicSystem,
    psi: &Potential,
    n: usize,
    eps: f64,
    cap: usize,
) -> Result<f64> {
    let words = system.enumerate_words(n, cap)?;
    let extra = psi.depth() - 1;
    let extended: Vec<Word> = words.iter().map(|w| system.extend_periodic(w, extra)).collect();
    let set = separated_set(&extended, n, eps, psi)?;
    Ok(set.log_weight / n as f64)
}

/// One weighted Bowen ball of a cover: the `(n_i, eps)`-ball around a
/// materialized center.
#[derive(Clone, Debug)]
pub struct CoverElement {
    pub center: Word,
    pub horizon: usize,
}

/// Evaluates the weighted cover sum
/// `Q = sum_i exp(-alpha n_i + sup_{ball} S_{n_i} psi)` after verifying
/// that the collection covers `z` and respects the depth floor `n_min`.
/// Any valid collection upper-bounds the cover infimum at this scale.
pub fn pp_cover_value(
    system: &SymbolicSystem,
    z: &[Word],
    alpha: f64,
    eps: f64,
    n_min: usize,
    psi: &Potential,
    cover: &[CoverElement],
) -> Result<f64> {
    for el in cover {
        if el.horizon < n_min {
            return Err(Error::invalid(format!(
                "cover element horizon {} below the floor {n_min}",
                el.horizon
            )));
        }
    }
    for point in z {
        let mut covered = false;
        for el in cover {
            // Compare the canonical points out to the forced coordinates so
            // the open-ball membership decision is exact.
            let reach = orbit::forced_coords_open(el.horizon, eps).max(el.horizon);
            let x = materialize(system, point, reach);
            let c = materialize(system, &el.center, reach);
            if bowen_distance(&x, &c, el.horizon)? < eps {
                covered = true;
                break;
            }
        }
        if !covered {
            return Err(Error::NotACover { witness: point.to_string() });
        }
    }
    let mut terms = Vec::with_capacity(cover.len());
    for el in cover {
        let sup = ball_sup_weight(system, &el.center, el.horizon, eps, psi)?;
        terms.push(-alpha * el.horizon as f64 + sup);
    }
    Ok(log_sum_exp(&terms).exp())
}

fn materialize(system: &SymbolicSystem, w: &Word, len: usize) -> Word {
    if w.len() >= len {
        w.clone()
    } else {
        system.canonical_extension(w, len - w.len())
    }
}

/// `sup S_n psi` over the open `(n, eps)`-ball around `center`: windows
/// inside the forced coordinates are read off the center (canonically
/// materialized), remaining windows are maximized over admissible
/// completions.
fn ball_sup_weight(
    system: &SymbolicSystem,
    center: &Word,
    n: usize,
    eps: f64,
    psi: &Potential,
) -> Result<f64> {
    let forced = orbit::forced_coords_open(n, eps);
    if forced == 0 {
        return Err(Error::invalid("ball radius exceeds the space diameter"));
    }
    let need = n + psi.depth() - 1;
    if forced >= need {
        let x = materialize(system, center, need);
        return birkhoff_sum(psi, &x, n);
    }
    let x = materialize(system, center, forced);
    let mut buf = x.symbols()[..forced].to_vec();
    let overhang = need - forced;
    let mut best = f64::NEG_INFINITY;
    max_over_extensions(system, psi, n, &mut buf, overhang, &mut best)?;
    Ok(best)
}

fn max_over_extensions(
    system: &SymbolicSystem,
    psi: &Potential,
    n: usize,
    buf: &mut Vec<Symbol>,
    remaining: usize,
    best: &mut f64,
) -> Result<()> {
    if remaining == 0 {
        let w = Word::from_vec_unchecked(buf.clone());
        let s = birkhoff_sum(psi, &w, n)?;
        if s > *best {
            *best = s;
        }
        return Ok(());
    }
    let last = *buf.last().unwrap();
    for s in 0..system.alphabet_size() as Symbol {
        if system.is_admissible_pair(last, s) {
            buf.push(s);
            max_over_extensions(system, psi, n, buf, remaining - 1, best)?;
            buf.pop();
        }
    }
    Ok(())
}

/// The target set of a cover-pressure estimate: an explicit list of
/// materialized words, or the whole shift space (handled analytically, no
/// enumeration).
pub enum ZSet<'a> {
    Words(&'a [Word]),
    WholeSpace,
}

/// Upper estimate of the dimension-type pressure `P_Z(psi, eps)`:
/// bisection for the smallest `alpha` at which the uniform-depth cylinder
/// cover keeps `Q <= 1` across every horizon in `n_grid`.
pub fn pp_pressure_upper(
    system: &SymbolicSystem,
    z: &ZSet,
    eps: f64,
    psi: &Potential,
    n_grid: &[usize],
    alpha_tol: f64,
) -> Result<f64> {
    if n_grid.is_empty() {
        return Err(Error::invalid("empty horizon grid"));
    }
    let log_q = |alpha: f64| -> Result<f64> {
        let mut worst = f64::NEG_INFINITY;
        for &n in n_grid {
            let lq = match z {
                ZSet::Words(words) => log_q_words(system, words, alpha, eps, n, psi)?,
                ZSet::WholeSpace => log_q_space(system, alpha, eps, n, psi)?,
            };
            worst = worst.max(lq);
        }
        Ok(worst)
    };

    let mut lo = -psi.sup_norm() - 1.0;
    let mut hi = (system.alphabet_size() as f64).ln() + psi.sup_norm() + 1.0;
    if log_q(lo)? <= 0.0 {
        return Ok(lo);
    }
    if log_q(hi)? > 0.0 {
        return Err(Error::NonConvergence { iterations: 0 });
    }
    while hi - lo > alpha_tol {
        let mid = 0.5 * (lo + hi);
        if log_q(mid)? <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

fn log_q_words(
    system: &SymbolicSystem,
    words: &[Word],
    alpha: f64,
    eps: f64,
    n: usize,
    psi: &Potential,
) -> Result<f64> {
    let forced = orbit::forced_coords_open(n, eps).max(1);
    for w in words {
        if w.len() < forced {
            return Err(Error::InsufficientLength { required: forced, actual: w.len() });
        }
    }
    let mut prefixes: Vec<&[Symbol]> = words.iter().map(|w| &w.symbols()[..forced]).collect();
    prefixes.sort();
    prefixes.dedup();
    let mut terms = Vec::with_capacity(prefixes.len());
    for p in prefixes {
        let center = Word::from_vec_unchecked(p.to_vec());
        let sup = ball_sup_weight(system, &center, n, eps, psi)?;
        terms.push(-alpha * n as f64 + sup);
    }
    Ok(log_sum_exp(&terms))
}

/// `log sum_{|w| = forced} exp(sup over the cylinder of S_n psi)` via a
/// transfer DP over the word graph: no enumeration of centers. `forced` is
/// the number of coordinates pinned by an open `(n, eps)`-ball.
fn log_q_space(
    system: &SymbolicSystem,
    alpha: f64,
    eps: f64,
    n: usize,
    psi: &Potential,
) -> Result<f64> {
    let d = psi.depth();
    let e = orbit::open_offsets(eps);
    if e == 0 {
        return Err(Error::invalid("cover radius exceeds the space diameter"));
    }
    let forced = n + e - 1;
    let lift = LiftGraph::for_depth(system, d)?;
    let m = lift.node_count();
    let o = lift.order;
    let f = forced.max(o);

    // u[state]: log-sum over admissible prefixes ending in that state of
    // exp(sum of completed windows). Initial states occupy positions
    // 0..o-1; for d = 1 that already completes the window at position 0.
    let mut u: Vec<f64> = Vec::with_capacity(m);
    for i in 0..m {
        u.push(if d == 1 { psi.eval(&lift.states[i].symbols()[..1])? } else { 0.0 });
    }
    // Appends at absolute positions q = o..f-1. The window completing at q
    // starts at q - d + 1 and is weighted while that start lies in 0..n.
    for q in o..f {
        let weighted = q + 1 >= d && q + 1 - d < n;
        let mut next = vec![f64::NEG_INFINITY; m];
        for from in 0..m {
            if u[from] == f64::NEG_INFINITY {
                continue;
            }
            for &(to, sym) in &lift.edges[from] {
                let w = if !weighted {
                    0.0
                } else if d == 1 {
                    psi.eval(&[sym])?
                } else {
                    lift.edge_value(psi, from, sym)?
                };
                next[to] = log_add(next[to], u[from] + w);
            }
        }
        u = next;
    }
    // Windows extending beyond the cylinder (only when d > e): maximized
    // over admissible continuations by a max-plus pass per window.
    let r = (n + d - 1).saturating_sub(f);
    let mut bonus = vec![0.0f64; m];
    for _ in 0..r {
        let mut next = vec![f64::NEG_INFINITY; m];
        for from in 0..m {
            for &(to, sym) in &lift.edges[from] {
                let w = if d == 1 {
                    psi.eval(&[sym])?
                } else {
                    lift.edge_value(psi, from, sym)?
                };
                let cand = w + bonus[to];
                if cand > next[from] {
                    next[from] = cand;
                }
            }
        }
        bonus = next;
    }
    let terms: Vec<f64> = (0..m)
        .filter(|&i| u[i].is_finite())
        .map(|i| u[i] + bonus[i] - alpha * n as f64)
        .collect();
    Ok(log_sum_exp(&terms))
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn log_sum_exp(values: &[f64]) -> f64 {
    values.iter().fold(f64::NEG_INFINITY, |acc, &v| log_add(acc, v))
}

/// One ball checked by the distribution principle. `log_mass` is `None`
/// when the ball carries no mass at all (trivially within any bound).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BallCheck {
    pub center: String,
    pub n: usize,
    pub log_mass: Option<f64>,
    pub log_bound: f64,
    pub pass: bool,
}

/// Outcome of a distribution-principle certification run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CertResult {
    pub s: f64,
    pub k_const: f64,
    pub checked: usize,
    pub pass: bool,
    pub witness: Option<BallCheck>,
    /// Finite-scale caveat: the principle is checked on the tested horizons
    /// and measures only.
    pub caveat: String,
}

/// Checks the ball-mass inequality
/// `mass(B_n(x, .)) <= K exp(-n s + S_n psi(x))` on every supplied center
/// whose ball meets the target set, for every horizon in `n_values`.
/// A pass certifies `P_Z(psi, eps) >= s` at the tested scale.
pub fn pdp_certify(
    system: &SymbolicSystem,
    centers: &[Word],
    meets_z: impl Fn(&Word, usize) -> bool,
    s: f64,
    psi: &Potential,
    log_mass_oracle: impl Fn(&Word, usize) -> f64,
    k_const: f64,
    n_values: &[usize],
) -> Result<CertResult> {
    let mut checked = 0usize;
    for &n in n_values {
        for center in centers {
            if !meets_z(center, n) {
                continue;
            }
            let x = materialize(system, center, n + psi.depth() - 1);
            let log_bound = k_const.ln() - s * n as f64 + birkhoff_sum(psi, &x, n)?;
            let log_mass = log_mass_oracle(center, n);
            checked += 1;
            if log_mass > log_bound + 1e-9 {
                return Ok(CertResult {
                    s,
                    k_const,
                    checked,
                    pass: false,
                    witness: Some(BallCheck {
                        center: center.abbrev(48),
                        n,
                        log_mass: Some(log_mass),
                        log_bound,
                        pass: false,
                    }),
                    caveat: caveat_text(),
                });
            }
        }
    }
    Ok(CertResult {
        s,
        k_const,
        checked,
        pass: true,
        witness: None,
        caveat: caveat_text(),
    })
}

fn caveat_text() -> String {
    "finite-scale check: the mass inequality was verified on the sampled horizons and centers only".to_string()
}

/// Weighted spanning-set estimator for `h_mu + int psi dmu`: sort the
/// `n`-cylinders by weight-per-mass, discard up to `gamma` of the measure,
/// and return `(1/n) log` of the retained total weight.
pub fn katok_estimate(
    system: &SymbolicSystem,
    mu: &MarkovMeasure,
    psi: &Potential,
    gamma: f64,
    _eps: f64,
    n: usize,
    cap: usize,
) -> Result<f64> {
    if !(0.0..1.0).contains(&gamma) || gamma == 0.0 {
        return Err(Error::invalid("gamma must lie in (0, 1)"));
    }
    let words = system.enumerate_words(n, cap)?;
    let extra = psi.depth() - 1;
    struct Cyl {
        log_w: f64,
        mass: f64,
        ratio: f64,
        idx: usize,
    }
    let mut cyls = Vec::with_capacity(words.len());
    for (idx, w) in words.iter().enumerate() {
        let log_mass = mu.log_cylinder_mass(w);
        if log_mass == f64::NEG_INFINITY {
            continue;
        }
        let x = system.extend_periodic(w, extra);
        let log_w = birkhoff_sum(psi, &x, n)?;
        cyls.push(Cyl { log_w, mass: log_mass.exp(), ratio: log_w - log_mass, idx });
    }
    cyls.sort_by(|a, b| {
        a.ratio
            .partial_cmp(&b.ratio)
            .unwrap()
            .then_with(|| words[a.idx].cmp(&words[b.idx]))
    });
    let mut kept_logs = Vec::new();
    let mut mass_acc = 0.0;
    for c in &cyls {
        if mass_acc >= 1.0 - gamma {
            break;
        }
        mass_acc += c.mass;
        kept_logs.push(c.log_w);
    }
    Ok(log_sum_exp(&kept_logs) / n as f64)
}
