//! Shared brute-force oracles for the cycle-optimization tests: exhaustive
//! enumeration of the simple cycles of a small symbol graph, independent of
//! the production DP path.

use shiftlab::orbit::Potential;
use shiftlab::{Symbol, SymbolicSystem};

/// All simple cycles of the symbol graph (depth-1 transitions), each as a
/// node sequence in orbit order starting from its smallest node.
pub fn simple_cycles(system: &SymbolicSystem) -> Vec<Vec<Symbol>> {
    let a = system.alphabet_size();
    let mut cycles = Vec::new();
    // DFS from each start node, only visiting nodes >= start so each cycle
    // is found exactly once (rooted at its minimum).
    for start in 0..a as Symbol {
        let mut path = vec![start];
        let mut on_path = vec![false; a];
        on_path[start as usize] = true;
        dfs(system, start, start, &mut path, &mut on_path, &mut cycles);
    }
    cycles
}

fn dfs(
    system: &SymbolicSystem,
    start: Symbol,
    cur: Symbol,
    path: &mut Vec<Symbol>,
    on_path: &mut Vec<bool>,
    cycles: &mut Vec<Vec<Symbol>>,
) {
    for next in 0..system.alphabet_size() as Symbol {
        if !system.is_admissible_pair(cur, next) {
            continue;
        }
        if next == start {
            cycles.push(path.clone());
            continue;
        }
        if next > start && !on_path[next as usize] {
            on_path[next as usize] = true;
            path.push(next);
            dfs(system, start, next, path, on_path, cycles);
            path.pop();
            on_path[next as usize] = false;
        }
    }
}

/// Mean of a depth-1 potential along a node cycle.
pub fn cycle_mean(phi: &Potential, cycle: &[Symbol]) -> f64 {
    let sum: f64 = cycle.iter().map(|&s| phi.eval(&[s]).unwrap()).sum();
    sum / cycle.len() as f64
}

/// Ratio of two depth-1 potentials along a node cycle.
pub fn cycle_ratio(phi: &Potential, rho: &Potential, cycle: &[Symbol]) -> f64 {
    let num: f64 = cycle.iter().map(|&s| phi.eval(&[s]).unwrap()).sum();
    let den: f64 = cycle.iter().map(|&s| rho.eval(&[s]).unwrap()).sum();
    num / den
}

/// A random primitive system on `a` symbols: random 0/1 matrix, resampled
/// until validation succeeds.
pub fn random_primitive_system(rng: &mut impl rand::Rng, a: usize) -> SymbolicSystem {
    loop {
        let rows: Vec<Vec<u8>> = (0..a)
            .map(|_| (0..a).map(|_| rng.gen_range(0..=1u8)).collect())
            .collect();
        if let Ok(sys) = SymbolicSystem::validate(&rows) {
            return sys;
        }
    }
}
