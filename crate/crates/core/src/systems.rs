//! Mixing shifts of finite type with constructive orbit gluing.
//!
//! A [`SymbolicSystem`] is a one-sided shift space over a finite alphabet,
//! cut out by a 0/1 transition matrix. Validation computes the primitivity
//! exponent `p` (smallest power with all entries positive) and fixes, for
//! every ordered symbol pair, one admissible connecting path of length `p`.
//! Gluing two admissible words through that path reproduces both words
//! verbatim, so orbit segments are shadowed at distance zero with a uniform
//! gap of `p - 1` interior symbols.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Alphabet symbol. Alphabets are small; symbols are dense `0..alphabet_size`.
pub type Symbol = u8;

/// A finite admissible word: every adjacent pair must be allowed by the
/// transition matrix of the system it was built against.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Word(Vec<Symbol>);

impl Word {
    /// Builds a word, checking admissibility against `system`.
    pub fn new(system: &SymbolicSystem, symbols: Vec<Symbol>) -> Result<Self> {
        for &s in &symbols {
            if (s as usize) >= system.alphabet_size {
                return Err(Error::invalid(format!(
                    "symbol {s} out of range for alphabet of size {}",
                    system.alphabet_size
                )));
            }
        }
        for pair in symbols.windows(2) {
            if !system.is_admissible_pair(pair[0], pair[1]) {
                return Err(Error::invalid(format!(
                    "inadmissible transition {} -> {}",
                    pair[0], pair[1]
                )));
            }
        }
        Ok(Word(symbols))
    }

    /// Parses a word from its digit string, e.g. `"0110"`.
    pub fn parse(system: &SymbolicSystem, text: &str) -> Result<Self> {
        let mut symbols = Vec::with_capacity(text.len());
        for ch in text.chars() {
            let d = ch
                .to_digit(36)
                .ok_or_else(|| Error::invalid(format!("bad symbol character {ch:?}")))?;
            symbols.push(d as Symbol);
        }
        Word::new(system, symbols)
    }

    pub(crate) fn from_vec_unchecked(symbols: Vec<Symbol>) -> Self {
        Word(symbols)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.0
    }

    pub fn first(&self) -> Option<Symbol> {
        self.0.first().copied()
    }

    pub fn last(&self) -> Option<Symbol> {
        self.0.last().copied()
    }

    /// Prefix of the first `n` symbols.
    pub fn prefix(&self, n: usize) -> Word {
        Word(self.0[..n.min(self.0.len())].to_vec())
    }

    /// Compact display for long words: full text up to `max` symbols,
    /// otherwise a prefix with the total length appended.
    pub fn abbrev(&self, max: usize) -> String {
        if self.len() <= max {
            self.to_string()
        } else {
            format!("{}..[len {}]", self.prefix(max), self.len())
        }
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &s in &self.0 {
            write!(f, "{}", char::from_digit(s as u32, 36).unwrap_or('?'))?;
        }
        Ok(())
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "w\"{self}\"")
    }
}

/// A mixing shift of finite type with a fixed connector table.
#[derive(Clone, Serialize, Deserialize)]
pub struct SymbolicSystem {
    alphabet_size: usize,
    /// Row-major 0/1 adjacency, `transitions[a * alphabet + b]`.
    transitions: Vec<u8>,
    /// Smallest `p >= 1` with all entries of the p-th matrix power positive.
    primitivity_exponent: usize,
    /// For each ordered pair `(a, b)`, the interior of one fixed admissible
    /// path of length `p` from `a` to `b` (`p - 1` symbols, lexicographically
    /// smallest).
    connector_table: Vec<Vec<Symbol>>,
    name: Option<String>,
}

impl SymbolicSystem {
    /// Validates a 0/1 transition matrix and computes the primitivity
    /// exponent and the connector table.
    ///
    /// Rejects matrices with an empty row or column, and matrices that are
    /// not primitive within the Wielandt bound `A^2 - 2A + 2`.
    pub fn validate(rows: &[Vec<u8>]) -> Result<Self> {
        let a = rows.len();
        if a < 2 {
            return Err(Error::invalid("alphabet must have at least 2 symbols"));
        }
        if a > 64 {
            return Err(Error::invalid("alphabet larger than 64 symbols is unsupported"));
        }
        let mut transitions = Vec::with_capacity(a * a);
        for row in rows {
            if row.len() != a {
                return Err(Error::invalid("transition matrix must be square"));
            }
            for &e in row {
                if e > 1 {
                    return Err(Error::invalid("transition entries must be 0 or 1"));
                }
                transitions.push(e);
            }
        }
        for i in 0..a {
            if (0..a).all(|j| transitions[i * a + j] == 0) {
                return Err(Error::invalid(format!("row {i} of the transition matrix is zero")));
            }
            if (0..a).all(|j| transitions[j * a + i] == 0) {
                return Err(Error::invalid(format!("column {i} of the transition matrix is zero")));
            }
        }

        let wielandt = a * a - 2 * a + 2;
        let base: Vec<bool> = transitions.iter().map(|&e| e == 1).collect();
        let mut power = base.clone();
        let mut p = 1;
        while !power.iter().all(|&x| x) {
            if p >= wielandt {
                let idx = power.iter().position(|&x| !x).unwrap();
                return Err(Error::NotPrimitive {
                    from: (idx / a) as u8,
                    to: (idx % a) as u8,
                    power: p,
                });
            }
            power = bool_mat_mul(&power, &base, a);
            p += 1;
        }

        // Reachability powers base^t for t = 0..=p, used to pick the
        // lexicographically smallest connecting path of length p.
        let mut reach: Vec<Vec<bool>> = Vec::with_capacity(p + 1);
        let mut ident = vec![false; a * a];
        for i in 0..a {
            ident[i * a + i] = true;
        }
        reach.push(ident);
        for t in 1..=p {
            let next = bool_mat_mul(&reach[t - 1], &base, a);
            reach.push(next);
        }

        let mut connector_table = Vec::with_capacity(a * a);
        for from in 0..a {
            for to in 0..a {
                let mut interior = Vec::with_capacity(p.saturating_sub(1));
                let mut cur = from;
                for step in 1..p {
                    let remaining = p - step;
                    let next = (0..a)
                        .find(|&c| base[cur * a + c] && reach[remaining][c * a + to])
                        .expect("primitive matrix admits a connecting path");
                    interior.push(next as Symbol);
                    cur = next;
                }
                debug_assert!(base[cur * a + to] || p == 0);
                connector_table.push(interior);
            }
        }

        Ok(SymbolicSystem {
            alphabet_size: a,
            transitions,
            primitivity_exponent: p,
            connector_table,
            name: None,
        })
    }

    /// The full shift on `alphabet_size` symbols: all transitions allowed.
    pub fn full_shift(alphabet_size: usize) -> Self {
        let rows = vec![vec![1u8; alphabet_size]; alphabet_size];
        let mut s = Self::validate(&rows).expect("full shift is primitive");
        s.name = Some(format!("full-{alphabet_size}-shift"));
        s
    }

    /// The golden-mean shift: symbol 1 may not follow itself.
    pub fn golden_mean() -> Self {
        let mut s = Self::validate(&[vec![1, 1], vec![1, 0]]).expect("golden mean is primitive");
        s.name = Some("golden-mean".to_string());
        s
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn primitivity_exponent(&self) -> usize {
        self.primitivity_exponent
    }

    /// Number of interior symbols inserted by [`connect`](Self::connect):
    /// `p - 1`. This is the uniform gluing gap; it is zero on a full shift.
    pub fn gap(&self) -> usize {
        self.primitivity_exponent - 1
    }

    pub fn is_admissible_pair(&self, from: Symbol, to: Symbol) -> bool {
        self.transitions[from as usize * self.alphabet_size + to as usize] == 1
    }

    pub fn is_admissible(&self, symbols: &[Symbol]) -> bool {
        symbols.iter().all(|&s| (s as usize) < self.alphabet_size)
            && symbols.windows(2).all(|w| self.is_admissible_pair(w[0], w[1]))
    }

    /// Row-major copy of the transition matrix.
    pub fn transition_rows(&self) -> Vec<Vec<u8>> {
        (0..self.alphabet_size)
            .map(|i| self.transitions[i * self.alphabet_size..(i + 1) * self.alphabet_size].to_vec())
            .collect()
    }

    /// The fixed interior path from `from` to `to` (`p - 1` symbols).
    pub fn connector(&self, from: Symbol, to: Symbol) -> &[Symbol] {
        &self.connector_table[from as usize * self.alphabet_size + to as usize]
    }

    /// Glues two nonempty admissible words through the fixed connector.
    /// The result contains `w1` as a prefix and `w2` as a suffix with exactly
    /// `p - 1` symbols in between, so both orbit segments are reproduced
    /// verbatim (shadowing distance zero).
    pub fn connect(&self, w1: &Word, w2: &Word) -> Result<Word> {
        if w1.is_empty() || w2.is_empty() {
            return Err(Error::invalid("connect requires nonempty words"));
        }
        let interior = self.connector(w1.last().unwrap(), w2.first().unwrap());
        let mut out = Vec::with_capacity(w1.len() + interior.len() + w2.len());
        out.extend_from_slice(w1.symbols());
        out.extend_from_slice(interior);
        out.extend_from_slice(w2.symbols());
        debug_assert!(self.is_admissible(&out));
        Ok(Word(out))
    }

    /// Number of admissible words of length `n` (sum of the entries of the
    /// (n-1)-th matrix power), saturating at `u128::MAX`.
    pub fn word_count(&self, n: usize) -> u128 {
        if n == 0 {
            return 1;
        }
        let a = self.alphabet_size;
        // counts[s] = number of admissible words of current length ending at s
        let mut counts = vec![1u128; a];
        for _ in 1..n {
            let mut next = vec![0u128; a];
            for (from, &c) in counts.iter().enumerate() {
                if c == 0 {
                    continue;
                }
                for (to, slot) in next.iter_mut().enumerate() {
                    if self.transitions[from * a + to] == 1 {
                        *slot = slot.saturating_add(c);
                    }
                }
            }
            counts = next;
        }
        counts.iter().fold(0u128, |acc, &c| acc.saturating_add(c))
    }

    /// All admissible words of length `n` in lexicographic order.
    /// Fails with `BudgetExceeded` when the count surpasses `cap`; the
    /// caller should switch to sampling.
    pub fn enumerate_words(&self, n: usize, cap: usize) -> Result<Vec<Word>> {
        if n == 0 {
            return Err(Error::invalid("word length must be at least 1"));
        }
        let count = self.word_count(n);
        if count > cap as u128 {
            return Err(Error::BudgetExceeded {
                needed: count,
                cap: cap as u128,
                context: format!("enumeration of length-{n} words"),
            });
        }
        let mut out = Vec::with_capacity(count as usize);
        let mut buf = vec![0u8; n];
        self.enumerate_rec(&mut buf, 0, &mut out);
        Ok(out)
    }

    fn enumerate_rec(&self, buf: &mut Vec<Symbol>, depth: usize, out: &mut Vec<Word>) {
        if depth == buf.len() {
            out.push(Word(buf.clone()));
            return;
        }
        for s in 0..self.alphabet_size as Symbol {
            if depth == 0 || self.is_admissible_pair(buf[depth - 1], s) {
                buf[depth] = s;
                self.enumerate_rec(buf, depth + 1, out);
            }
        }
    }

    /// Lexicographically smallest admissible successor of `s`.
    pub fn lexmin_successor(&self, s: Symbol) -> Symbol {
        (0..self.alphabet_size as Symbol)
            .find(|&t| self.is_admissible_pair(s, t))
            .expect("rows are nonzero")
    }

    /// Extends `symbols` in place by `extra` symbols following the canonical
    /// rule: always append the lexicographically smallest admissible symbol.
    /// This is the fixed tail used whenever a finite word stands in for a
    /// point of the shift space.
    pub fn extend_canonical(&self, symbols: &mut Vec<Symbol>, extra: usize) {
        let mut last = *symbols.last().expect("cannot extend an empty word");
        for _ in 0..extra {
            let next = self.lexmin_successor(last);
            symbols.push(next);
            last = next;
        }
    }

    /// Canonically extended copy of a word, length `word.len() + extra`.
    pub fn canonical_extension(&self, word: &Word, extra: usize) -> Word {
        let mut symbols = word.symbols().to_vec();
        self.extend_canonical(&mut symbols, extra);
        Word(symbols)
    }

    /// Extends `word` by `extra` symbols, preferring the periodic wrap
    /// (repeat the word) and falling back to the canonical rule whenever the
    /// wrap transition is inadmissible.
    pub fn extend_periodic(&self, word: &Word, extra: usize) -> Word {
        let n = word.len();
        assert!(n > 0, "cannot extend an empty word");
        let mut symbols = word.symbols().to_vec();
        for i in 0..extra {
            let wrap = word.symbols()[i % n];
            let last = *symbols.last().unwrap();
            let next = if self.is_admissible_pair(last, wrap) {
                wrap
            } else {
                self.lexmin_successor(last)
            };
            symbols.push(next);
        }
        Word(symbols)
    }
}

impl fmt::Debug for SymbolicSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SymbolicSystem")
            .field("alphabet_size", &self.alphabet_size)
            .field("primitivity_exponent", &self.primitivity_exponent)
            .field("name", &self.name)
            .finish()
    }
}

fn bool_mat_mul(lhs: &[bool], rhs: &[bool], a: usize) -> Vec<bool> {
    let mut out = vec![false; a * a];
    for i in 0..a {
        for k in 0..a {
            if lhs[i * a + k] {
                for j in 0..a {
                    if rhs[k * a + j] {
                        out[i * a + j] = true;
                    }
                }
            }
        }
    }
    out
}
