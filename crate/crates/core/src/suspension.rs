//! Suspension flows over the base shift, represented entirely through the
//! roof function and fiber-integrated observables: the entropy root of
//! `s -> P(-s rho)`, ratio Birkhoff averages `S_n phi / S_n rho`, exact
//! ratio extrema over invariant measures (Dinkelbach iteration over mean
//! cycles), and the flow irregularity test.

use crate::ergopt::{mean_cycle_extremum, CycleOutcome, IrregularityVerdict, Sense};
use crate::error::{Error, Result};
use crate::orbit::{birkhoff_sum, Potential};
use crate::pressure::transfer_pressure;
use crate::systems::{SymbolicSystem, Word};

/// A strictly positive locally constant roof function.
#[derive(Clone, Debug)]
pub struct RoofFunction {
    potential: Potential,
    inf: f64,
    sup: f64,
}

impl RoofFunction {
    pub fn new(potential: Potential) -> Result<Self> {
        let inf = potential
            .table_values()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let sup = potential
            .table_values()
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        if !(inf > 0.0) {
            return Err(Error::invalid(format!(
                "roof function must be strictly positive (min table value {inf})"
            )));
        }
        Ok(RoofFunction { potential, inf, sup })
    }

    pub fn constant(system: &SymbolicSystem, c: f64) -> Result<Self> {
        Self::new(Potential::constant(system, c))
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn inf(&self) -> f64 {
        self.inf
    }

    pub fn sup(&self) -> f64 {
        self.sup
    }
}

/// Root of a continuous decreasing pressure function by bisection.
/// The bracket must straddle a sign change: `f(lo) >= 0 >= f(hi)`.
pub fn flow_entropy_of_set(
    pressure_fn: impl Fn(f64) -> Result<f64>,
    bracket: (f64, f64),
    tol: f64,
) -> Result<f64> {
    let (mut lo, mut hi) = bracket;
    if !(lo < hi) {
        return Err(Error::invalid("bracket must satisfy lo < hi"));
    }
    let f_lo = pressure_fn(lo)?;
    let f_hi = pressure_fn(hi)?;
    if f_lo < 0.0 || f_hi > 0.0 {
        return Err(Error::NoSignChange { lo, hi, f_lo, f_hi });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if pressure_fn(mid)? >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Topological entropy of the suspension flow: the unique root of
/// `P(-s rho) = 0` on `[0, h_top / inf rho]`.
pub fn abramov_entropy(system: &SymbolicSystem, roof: &RoofFunction) -> Result<f64> {
    let h_top = transfer_pressure(system, &Potential::constant(system, 0.0))?;
    let hi = h_top / roof.inf() + 1e-9;
    flow_entropy_of_set(
        |s| transfer_pressure(system, &roof.potential().affine(-s, 0.0)),
        (-1e-12, hi),
        1e-12,
    )
}

/// The finite ratio Birkhoff average `S_n phi(x) / S_n rho(x)`.
pub fn ratio_birkhoff(phi: &Potential, roof: &RoofFunction, x: &Word, n: usize) -> Result<f64> {
    let num = birkhoff_sum(phi, x, n)?;
    let den = birkhoff_sum(roof.potential(), x, n)?;
    debug_assert!(den >= n as f64 * roof.inf() - 1e-9);
    Ok(num / den)
}

/// Exact extremum of `int phi dmu / int rho dmu` over ergodic invariant
/// measures: Dinkelbach iteration, solving for `lambda` with extreme mean
/// cycle of `phi - lambda rho` equal to zero. Converges finitely over the
/// cycle-mean breakpoints.
pub fn ratio_extremum(
    system: &SymbolicSystem,
    phi: &Potential,
    roof: &RoofFunction,
    sense: Sense,
) -> Result<CycleOutcome> {
    let depth = phi.depth().max(roof.potential().depth());
    let phi = phi.lift_to_depth(system, depth)?;
    let rho = roof.potential().lift_to_depth(system, depth)?;

    let cycle_ratio = |cycle: &Word| -> Result<f64> {
        // Periodic extension by depth-1 symbols so every window is defined;
        // a cycle word wraps admissibly.
        let len = cycle.len();
        let mut ext = cycle.symbols().to_vec();
        for i in 0..depth - 1 {
            ext.push(cycle.symbols()[i % len]);
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..len {
            num += phi.eval(&ext[i..i + depth])?;
            den += rho.eval(&ext[i..i + depth])?;
        }
        Ok(num / den)
    };

    // Start from the phi-extreme cycle.
    let start = mean_cycle_extremum(system, &phi, sense)?;
    let mut lambda = cycle_ratio(&start.cycle)?;
    let mut witness = start.cycle;
    let scale = 1.0 + phi.sup_norm() + roof.sup();
    for _ in 0..200 {
        let table: Vec<f64> = phi
            .table_values()
            .iter()
            .zip(rho.table_values())
            .map(|(p, r)| p - lambda * r)
            .collect();
        let combined = tabulated(system, depth, &phi, &table)?;
        let out = mean_cycle_extremum(system, &combined, sense)?;
        if out.value.abs() <= 1e-13 * scale {
            // lambda is the fixed point; keep the better witness.
            let w = cycle_ratio(&out.cycle)?;
            if (w - lambda).abs() <= 1e-10 * scale {
                witness = out.cycle;
            }
            return Ok(CycleOutcome { value: lambda, cycle: witness, exact: None });
        }
        lambda = cycle_ratio(&out.cycle)?;
        witness = out.cycle;
    }
    Err(Error::NonConvergence { iterations: 200 })
}

fn tabulated(
    system: &SymbolicSystem,
    depth: usize,
    like: &Potential,
    values: &[f64],
) -> Result<Potential> {
    let words = like.table_words().to_vec();
    let pairs: Vec<(String, f64)> = words
        .iter()
        .zip(values)
        .map(|(w, &v)| (w.to_string(), v))
        .collect();
    Potential::from_pairs(system, depth, &pairs)
}

/// Flow irregularity: whether the time averages of the suspended
/// observable can diverge, decided through the spread of the exact ratio
/// extrema.
pub fn flow_irregularity_test(
    system: &SymbolicSystem,
    phi: &Potential,
    roof: &RoofFunction,
) -> Result<IrregularityVerdict> {
    let max = ratio_extremum(system, phi, roof, Sense::Max)?;
    let min = ratio_extremum(system, phi, roof, Sense::Min)?;
    let gap = max.value - min.value;
    if gap <= 1e-9 {
        Ok(IrregularityVerdict::Degenerate)
    } else {
        Ok(IrregularityVerdict::NonTrivial { gap })
    }
}
