//! Orbit-scale machinery: the Bowen metric on words, locally constant
//! potentials with exact variation tables, Birkhoff sums, empirical
//! cylinder distributions, and greedy separated/spanning sets.
//!
//! Words are finite codings of points: the metric on the shift space is
//! `d(x, y) = 2^{-min{ j : x_j != y_j }}` (zero when the words agree on
//! their full overlap) and the orbit metric at horizon `n` is
//! `d_n(x, y) = max_{i < n} d(shift^i x, shift^i y)`.

use crate::error::{Error, Result};
use crate::systems::{Symbol, SymbolicSystem, Word};
use std::collections::HashMap;

/// Smallest `j >= 0` with `2^{-j} < eps` (open-ball offset count).
pub(crate) fn open_offsets(eps: f64) -> usize {
    let mut j = 0usize;
    while 2f64.powi(-(j as i32)) >= eps {
        j += 1;
        if j > 1080 {
            break;
        }
    }
    j
}

/// Number of leading coordinates two points must share so that
/// `d_n(x, y) < eps`: `n + open_offsets(eps) - 1` (zero when the ball is
/// the whole space).
pub(crate) fn forced_coords_open(n: usize, eps: f64) -> usize {
    let e = open_offsets(eps);
    if e == 0 {
        0
    } else {
        n + e - 1
    }
}

/// The Bowen distance `d_n` between two materialized words.
///
/// Both words must carry at least `n` symbols. Beyond that, suffixes are
/// compared on their common overlap and agreement on the full overlap
/// counts as distance zero (the words stand for cylinders).
pub fn bowen_distance(x: &Word, y: &Word, n: usize) -> Result<f64> {
    let need = n.max(1);
    if x.len() < need || y.len() < need {
        return Err(Error::InsufficientLength {
            required: need,
            actual: x.len().min(y.len()),
        });
    }
    let overlap = x.len().min(y.len());
    let first_diff = (0..overlap).find(|&i| x.symbols()[i] != y.symbols()[i]);
    match first_diff {
        None => Ok(0.0),
        Some(pos) if pos < n => Ok(1.0),
        Some(pos) => Ok(2f64.powi(-((pos - n + 1) as i32))),
    }
}

/// A locally constant observable of depth `d`: a value for every
/// admissible `d`-word, together with its exact variation table.
#[derive(Clone, Debug)]
pub struct Potential {
    depth: usize,
    alphabet: usize,
    words: Vec<Word>,
    values: Vec<f64>,
    /// Dense code -> index into `words`/`values`; -1 marks inadmissible.
    code_index: Vec<i32>,
    /// `var_by_agree[a]` = sup |phi(u) - phi(v)| over admissible depth-word
    /// pairs agreeing on their first `a` symbols.
    var_by_agree: Vec<f64>,
    sup_norm: f64,
}

impl Potential {
    /// Builds a potential from a value function on admissible `depth`-words.
    pub fn from_fn(
        system: &SymbolicSystem,
        depth: usize,
        f: impl Fn(&[Symbol]) -> f64,
    ) -> Result<Self> {
        if depth == 0 {
            return Err(Error::invalid("potential depth must be at least 1"));
        }
        let code_space = (system.alphabet_size() as u128).checked_pow(depth as u32);
        match code_space {
            Some(c) if c <= (1 << 24) => {}
            _ => return Err(Error::invalid("potential depth too large to tabulate")),
        }
        let words = system.enumerate_words(depth, 1 << 24)?;
        let values: Vec<f64> = words.iter().map(|w| f(w.symbols())).collect();
        for (w, v) in words.iter().zip(&values) {
            if !v.is_finite() {
                return Err(Error::invalid(format!("non-finite potential value at {w}")));
            }
        }
        Ok(Self::from_parts(system, depth, words, values))
    }

    /// Builds a potential from explicit `(word, value)` pairs; every
    /// admissible `depth`-word must appear exactly once.
    pub fn from_pairs(
        system: &SymbolicSystem,
        depth: usize,
        pairs: &[(String, f64)],
    ) -> Result<Self> {
        let mut map: HashMap<Word, f64> = HashMap::new();
        for (text, value) in pairs {
            let w = Word::parse(system, text)?;
            if w.len() != depth {
                return Err(Error::invalid(format!(
                    "table word {text} has length {} but depth is {depth}",
                    w.len()
                )));
            }
            if map.insert(w, *value).is_some() {
                return Err(Error::invalid(format!("duplicate table word {text}")));
            }
        }
        let words = system.enumerate_words(depth, 1 << 24)?;
        let mut values = Vec::with_capacity(words.len());
        for w in &words {
            match map.remove(w) {
                Some(v) => values.push(v),
                None => {
                    return Err(Error::MissingTableEntry { word: w.to_string() });
                }
            }
        }
        if let Some(extra) = map.keys().next() {
            return Err(Error::invalid(format!("table word {extra} is not admissible")));
        }
        Ok(Self::from_parts(system, depth, words, values))
    }

    /// The constant potential `phi = c` (depth 1).
    pub fn constant(system: &SymbolicSystem, c: f64) -> Self {
        Self::from_fn(system, 1, |_| c).expect("depth-1 table always fits")
    }

    fn from_parts(
        system: &SymbolicSystem,
        depth: usize,
        words: Vec<Word>,
        values: Vec<f64>,
    ) -> Self {
        let alphabet = system.alphabet_size();
        let code_space = alphabet.pow(depth as u32);
        let mut code_index = vec![-1i32; code_space];
        for (i, w) in words.iter().enumerate() {
            code_index[code_of(w.symbols(), alphabet)] = i as i32;
        }
        // Exact variation per agreement length: group words by shared prefix.
        let mut var_by_agree = vec![0.0; depth + 1];
        for agree in 0..depth {
            let mut groups: HashMap<&[Symbol], (f64, f64)> = HashMap::new();
            for (w, &v) in words.iter().zip(&values) {
                let key = &w.symbols()[..agree];
                let entry = groups.entry(key).or_insert((v, v));
                entry.0 = entry.0.min(v);
                entry.1 = entry.1.max(v);
            }
            var_by_agree[agree] = groups
                .values()
                .map(|(lo, hi)| hi - lo)
                .fold(0.0, f64::max);
        }
        let sup_norm = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Potential {
            depth,
            alphabet,
            words,
            values,
            code_index,
            var_by_agree,
            sup_norm,
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    /// Admissible depth-words of the table, in lexicographic order.
    pub fn table_words(&self) -> &[Word] {
        &self.words
    }

    pub fn table_values(&self) -> &[f64] {
        &self.values
    }

    /// Value on a window of exactly `depth` symbols.
    pub fn eval(&self, window: &[Symbol]) -> Result<f64> {
        debug_assert_eq!(window.len(), self.depth);
        let idx = self.code_index[code_of(window, self.alphabet)];
        if idx < 0 {
            return Err(Error::MissingTableEntry {
                word: Word::from_vec_unchecked(window.to_vec()).to_string(),
            });
        }
        Ok(self.values[idx as usize])
    }

    /// `Var(phi, c)`: sup of |phi(x) - phi(y)| over `d(x, y) < c`.
    pub fn variation(&self, c: f64) -> f64 {
        let agree = open_offsets(c).min(self.depth);
        self.var_by_agree[agree]
    }

    /// The dyadic variation table `v[k] = Var(phi, 2^{-k})` for
    /// `k = 0..=depth`; locally constant tables vanish from `k = depth - 1`.
    pub fn variation_table(&self) -> Vec<f64> {
        (0..=self.depth)
            .map(|k| self.variation(2f64.powi(-(k as i32))))
            .collect()
    }

    /// The affine combination `a * phi + b` on the same table.
    pub fn affine(&self, a: f64, b: f64) -> Potential {
        let mut out = self.clone();
        for v in &mut out.values {
            *v = a * *v + b;
        }
        out.var_by_agree = out.var_by_agree.iter().map(|v| v * a.abs()).collect();
        out.sup_norm = out.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        out
    }

    /// Re-tabulates the potential at a larger depth (value of the leading
    /// window), so observables of different depths can share one table.
    pub fn lift_to_depth(&self, system: &SymbolicSystem, depth: usize) -> Result<Potential> {
        if depth < self.depth {
            return Err(Error::invalid("cannot lift to a smaller depth"));
        }
        if depth == self.depth {
            return Ok(self.clone());
        }
        let d = self.depth;
        Self::from_fn(system, depth, |w| self.eval(&w[..d]).expect("prefix admissible"))
    }
}

fn code_of(window: &[Symbol], alphabet: usize) -> usize {
    window.iter().fold(0usize, |acc, &s| acc * alphabet + s as usize)
}

/// The Birkhoff sum `S_n phi(x)` of a materialized word: the exact sum of
/// table lookups on the `n` sliding depth-windows.
pub fn birkhoff_sum(phi: &Potential, x: &Word, n: usize) -> Result<f64> {
    let required = n + phi.depth() - 1;
    if x.len() < required {
        return Err(Error::InsufficientLength { required, actual: x.len() });
    }
    let mut sum = 0.0;
    for i in 0..n {
        sum += phi.eval(&x.symbols()[i..i + phi.depth()])?;
    }
    Ok(sum)
}

/// Finite-depth pushforward of the empirical measure along a word: the
/// frequency of each depth-window among the first `n` windows.
#[derive(Clone, Debug)]
pub struct CylinderDistribution {
    depth: usize,
    entries: Vec<(Word, f64)>,
}

impl CylinderDistribution {
    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Entries `(word, mass)` in lexicographic word order; masses sum to 1.
    pub fn entries(&self) -> &[(Word, f64)] {
        &self.entries
    }

    pub fn mass_of(&self, w: &Word) -> f64 {
        self.entries
            .binary_search_by(|(e, _)| e.cmp(w))
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }

    /// Integral of a potential of the same depth.
    pub fn integral(&self, phi: &Potential) -> Result<f64> {
        if phi.depth() != self.depth {
            return Err(Error::invalid("potential depth does not match distribution depth"));
        }
        let mut sum = 0.0;
        for (w, mass) in &self.entries {
            sum += mass * phi.eval(w.symbols())?;
        }
        Ok(sum)
    }
}

/// The depth-`d` empirical distribution of the first `n` windows of `x`.
pub fn empirical_measure(x: &Word, n: usize, depth: usize) -> Result<CylinderDistribution> {
    if n == 0 || depth == 0 {
        return Err(Error::invalid("empirical measure needs n >= 1 and depth >= 1"));
    }
    let required = n + depth - 1;
    if x.len() < required {
        return Err(Error::InsufficientLength { required, actual: x.len() });
    }
    let mut counts: HashMap<&[Symbol], usize> = HashMap::new();
    for i in 0..n {
        *counts.entry(&x.symbols()[i..i + depth]).or_insert(0) += 1;
    }
    let mut entries: Vec<(Word, f64)> = counts
        .into_iter()
        .map(|(w, c)| (Word::from_vec_unchecked(w.to_vec()), c as f64 / n as f64))
        .collect();
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    let total: f64 = entries.iter().map(|(_, m)| m).sum();
    debug_assert!((total - 1.0).abs() < 1e-12);
    Ok(CylinderDistribution { depth, entries })
}

/// A selected set of words together with the log of its total weight
/// `sum exp S_n psi`.
#[derive(Clone, Debug)]
pub struct WeightedSet {
    pub words: Vec<Word>,
    pub log_weight: f64,
}

impl WeightedSet {
    pub fn weight(&self) -> f64 {
        self.log_weight.exp()
    }
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn candidate_order(cands: &[Word], log_w: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..cands.len()).collect();
    order.sort_by(|&a, &b| {
        log_w[b]
            .partial_cmp(&log_w[a])
            .unwrap()
            .then_with(|| cands[a].cmp(&cands[b]))
    });
    order
}

/// Greedy maximal-weight-first extraction of a pairwise `(n, eps)`-separated
/// subset. The returned weight is a certified lower bound on the separated
/// supremum `P_n` over the candidate set.
pub fn separated_set(
    candidates: &[Word],
    n: usize,
    eps: f64,
    psi: &Potential,
) -> Result<WeightedSet> {
    let log_w = weights_of(candidates, n, psi)?;
    let order = candidate_order(candidates, &log_w);
    let mut selected: Vec<usize> = Vec::new();

    if eps < 1.0 {
        // Words that differ somewhere in their first n symbols are at
        // distance exactly 1 > eps, so conflicts only arise inside groups
        // sharing the length-n prefix.
        let mut groups: HashMap<&[Symbol], Vec<usize>> = HashMap::new();
        for &i in &order {
            groups
                .entry(&candidates[i].symbols()[..n])
                .or_default()
                .push(i);
        }
        let mut keys: Vec<&[Symbol]> = groups.keys().cloned().collect();
        keys.sort();
        for key in keys {
            let members = &groups[key];
            let mut kept: Vec<usize> = Vec::new();
            for &i in members {
                let ok = kept.iter().all(|&j| {
                    bowen_distance(&candidates[i], &candidates[j], n).unwrap() > eps
                });
                if ok {
                    kept.push(i);
                }
            }
            selected.extend(kept);
        }
    } else {
        for &i in &order {
            let ok = selected
                .iter()
                .all(|&j| bowen_distance(&candidates[i], &candidates[j], n).unwrap() > eps);
            if ok {
                selected.push(i);
            }
        }
    }

    selected.sort_by(|&a, &b| {
        log_w[b]
            .partial_cmp(&log_w[a])
            .unwrap()
            .then_with(|| candidates[a].cmp(&candidates[b]))
    });
    if selected.len() <= 512 {
        debug_assert!(pairwise_separated(candidates, &selected, n, eps));
    }
    let logs: Vec<f64> = selected.iter().map(|&i| log_w[i]).collect();
    Ok(WeightedSet {
        words: selected.iter().map(|&i| candidates[i].clone()).collect(),
        log_weight: log_sum_exp(&logs),
    })
}

fn pairwise_separated(cands: &[Word], sel: &[usize], n: usize, eps: f64) -> bool {
    for (a, &i) in sel.iter().enumerate() {
        for &j in &sel[a + 1..] {
            if bowen_distance(&cands[i], &cands[j], n).unwrap() <= eps {
                return false;
            }
        }
    }
    true
}

/// Greedy lightest-first cover: selected centers such that every candidate
/// lies within `d_n <= eps` of one of them. The weight is an upper-bound
/// surrogate for the spanning infimum `Q_n`.
pub fn spanning_set(
    candidates: &[Word],
    n: usize,
    eps: f64,
    psi: &Potential,
) -> Result<WeightedSet> {
    if candidates.is_empty() {
        return Ok(WeightedSet { words: vec![], log_weight: f64::NEG_INFINITY });
    }
    let log_w = weights_of(candidates, n, psi)?;
    let mut order = candidate_order(candidates, &log_w);
    order.reverse(); // lightest first, lexicographic tie-break preserved

    let mut centers: Vec<usize> = Vec::new();
    if eps >= 1.0 {
        centers.push(order[0]);
    } else {
        let mut groups: HashMap<&[Symbol], Vec<usize>> = HashMap::new();
        for &i in &order {
            groups
                .entry(&candidates[i].symbols()[..n])
                .or_default()
                .push(i);
        }
        let mut keys: Vec<&[Symbol]> = groups.keys().cloned().collect();
        keys.sort();
        for key in keys {
            let members = &groups[key];
            let mut covered = vec![false; members.len()];
            for (a, &i) in members.iter().enumerate() {
                if covered[a] {
                    continue;
                }
                centers.push(i);
                for (b, &j) in members.iter().enumerate() {
                    if !covered[b]
                        && bowen_distance(&candidates[i], &candidates[j], n).unwrap() <= eps
                    {
                        covered[b] = true;
                    }
                }
            }
        }
    }

    centers.sort_by(|&a, &b| {
        log_w[a]
            .partial_cmp(&log_w[b])
            .unwrap()
            .then_with(|| candidates[a].cmp(&candidates[b]))
    });
    let logs: Vec<f64> = centers.iter().map(|&i| log_w[i]).collect();
    Ok(WeightedSet {
        words: centers.iter().map(|&i| candidates[i].clone()).collect(),
        log_weight: log_sum_exp(&logs),
    })
}

fn weights_of(candidates: &[Word], n: usize, psi: &Potential) -> Result<Vec<f64>> {
    candidates
        .iter()
        .map(|w| birkhoff_sum(psi, w, n))
        .collect()
}
