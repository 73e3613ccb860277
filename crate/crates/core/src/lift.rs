//! Word-graph lift shared by the spectral, mean-cycle and root-finding
//! code. States are admissible words of a fixed order `o >= 1`; an edge
//! appends one symbol, and carries the `(o+1)`-window it reads.

use crate::error::{Error, Result};
use crate::orbit::Potential;
use crate::systems::{Symbol, SymbolicSystem, Word};

pub(crate) struct LiftGraph {
    pub order: usize,
    pub states: Vec<Word>,
    /// `edges[from]` = list of `(to, appended_symbol)`.
    pub edges: Vec<Vec<(usize, Symbol)>>,
}

impl LiftGraph {
    /// Builds the lift of order `max(depth - 1, 1)` for a potential depth.
    pub fn for_depth(system: &SymbolicSystem, depth: usize) -> Result<LiftGraph> {
        let order = depth.saturating_sub(1).max(1);
        let states = system.enumerate_words(order, 1 << 20).map_err(|e| match e {
            Error::BudgetExceeded { needed, cap, .. } => Error::BudgetExceeded {
                needed,
                cap,
                context: format!("word-graph lift of order {order}"),
            },
            other => other,
        })?;
        let mut edges = vec![Vec::new(); states.len()];
        for (i, w) in states.iter().enumerate() {
            for s in 0..system.alphabet_size() as Symbol {
                if !system.is_admissible_pair(w.last().unwrap(), s) {
                    continue;
                }
                let next = if order == 1 {
                    vec![s]
                } else {
                    let mut v = w.symbols()[1..].to_vec();
                    v.push(s);
                    v
                };
                let j = states
                    .binary_search(&Word::from_vec_unchecked(next))
                    .expect("shifted word is admissible");
                edges[i].push((j, s));
            }
        }
        Ok(LiftGraph { order, states, edges })
    }

    pub fn node_count(&self) -> usize {
        self.states.len()
    }

    /// The `(order + 1)`-window read by edge `(from, sym)`.
    pub fn window(&self, from: usize, sym: Symbol) -> Vec<Symbol> {
        let mut w = self.states[from].symbols().to_vec();
        w.push(sym);
        w
    }

    /// Evaluates a potential of depth `<= order + 1` on an edge window.
    pub fn edge_value(&self, phi: &Potential, from: usize, sym: Symbol) -> Result<f64> {
        let window = self.window(from, sym);
        phi.eval(&window[..phi.depth()])
    }

    /// Leading symbol of a state, used when a node cycle is read back as a
    /// periodic symbol sequence.
    pub fn leading_symbol(&self, state: usize) -> Symbol {
        self.states[state].symbols()[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lift_orders() {
        let s = SymbolicSystem::full_shift(2);
        let g = LiftGraph::for_depth(&s, 1).unwrap();
        assert_eq!(g.order, 1);
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edges[0].len(), 2);

        let g = LiftGraph::for_depth(&s, 3).unwrap();
        assert_eq!(g.order, 2);
        assert_eq!(g.node_count(), 4);

        let gm = SymbolicSystem::golden_mean();
        let g = LiftGraph::for_depth(&gm, 2).unwrap();
        assert_eq!(g.node_count(), 2);
        // State 1 (= word "1") only transitions to "0".
        assert_eq!(g.edges[1].len(), 1);
    }
}
