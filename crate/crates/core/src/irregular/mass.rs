//! Exact ball masses of the level measures, computed analytically from the
//! address structure: a ball pins a unique ancestor and a run of forced
//! block indices; the remaining blocks contribute level-weight factors.
//! No atom enumeration takes place.

use super::level::PreparedLevels;
use super::schedule::GluingSchedule;
use crate::error::{Error, Result};
use crate::orbit;
use crate::systems::{Symbol, SymbolicSystem, Word};

/// `log mu_{k+1}(B_n(q, eps/2))` where `k` is determined by
/// `t_k <= n < t_{k+1}` and the ball center is the canonical point of `q`.
/// Returns `-inf` when no atom of the level measure meets the ball.
pub fn ball_log_mass(
    system: &SymbolicSystem,
    schedule: &GluingSchedule,
    prepared: &PreparedLevels,
    q: &Word,
    n: usize,
) -> Result<f64> {
    let k = schedule.level_of_horizon(n)?;
    if prepared.count() < k + 1 {
        return Err(Error::invalid(format!(
            "ball at horizon {n} needs levels through {}, have {}",
            k + 1,
            prepared.count()
        )));
    }
    if q.is_empty() {
        return Err(Error::invalid("ball center must be nonempty"));
    }
    let e = orbit::open_offsets(schedule.epsilon / 2.0);
    if e == 0 {
        return Ok(0.0); // the ball is the whole space
    }
    let forced = n + e - 1;
    let q_ext = if q.len() >= forced {
        q.clone()
    } else {
        system.canonical_extension(q, forced - q.len())
    };
    let qs = &q_ext.symbols()[..forced];
    let m = schedule.m;

    // log kappa_{k+1} = sum_{i <= k+1} N_i log M_i.
    let log_kappa: f64 = (1..=k + 1)
        .map(|i| schedule.big_n[i - 1] as f64 * prepared.level(i).log_m)
        .sum();

    // Forced walk through levels 1..=k: every block and connector is pinned
    // by the ball, so the ancestor address is unique or the mass is zero.
    let mut cursor = 0usize;
    let mut log_forced = 0.0f64;
    for i in 1..=k {
        let n_i = schedule.n_k[i - 1];
        for l in 0..schedule.big_n[i - 1] {
            if !(i == 1 && l == 0) && m > 0 {
                let next_first = qs[cursor + m];
                let interior = system.connector(qs[cursor - 1], next_first);
                if &qs[cursor..cursor + m] != interior {
                    return Ok(f64::NEG_INFINITY);
                }
                cursor += m;
            }
            let lvl = prepared.level(i);
            match prepared.lookup(i, &qs[cursor..cursor + n_i]) {
                Some(idx) => log_forced += lvl.log_weights[idx as usize],
                None => return Ok(f64::NEG_INFINITY),
            }
            cursor += n_i;
        }
    }
    debug_assert_eq!(cursor, schedule.t_k[k - 1]);

    // Level k+1: forced blocks while connector + block fit below the pinned
    // coordinates.
    let lvl = prepared.level(k + 1);
    let n1 = schedule.n_k[k];
    let big_n = schedule.big_n[k];
    let t_next = schedule.t_k[k];
    let spill = forced > t_next;
    let mut l0 = big_n;
    for l in 0..big_n {
        if cursor + m + n1 <= forced {
            if m > 0 {
                let next_first = qs[cursor + m];
                let interior = system.connector(qs[cursor - 1], next_first);
                if &qs[cursor..cursor + m] != interior {
                    return Ok(f64::NEG_INFINITY);
                }
            }
            cursor += m;
            match prepared.lookup(k + 1, &qs[cursor..cursor + n1]) {
                Some(idx) => log_forced += lvl.log_weights[idx as usize],
                None => return Ok(f64::NEG_INFINITY),
            }
            cursor += n1;
        } else {
            l0 = l;
            break;
        }
    }
    if l0 == big_n {
        // Every block pinned; only the canonical spill can still reject.
        if spill && !canonical_spill_matches(system, qs[t_next - 1], &qs[t_next..forced]) {
            return Ok(f64::NEG_INFINITY);
        }
        return Ok(log_forced - log_kappa);
    }

    // Remaining blocks: a distribution over the previous symbol, folded
    // block by block. Weight classes by last symbol cover the free blocks.
    let a = system.alphabet_size();
    let mut class_log = vec![f64::NEG_INFINITY; a];
    for (w, &lw) in lvl.words.iter().zip(&lvl.log_weights) {
        let b = w.last().unwrap() as usize;
        class_log[b] = log_add(class_log[b], lw);
    }
    let mut dist = vec![f64::NEG_INFINITY; a];
    dist[qs[cursor - 1] as usize] = 0.0;
    let mut pos = cursor;
    for l in l0..big_n {
        let last_with_spill = spill && l == big_n - 1;
        if pos >= forced && !spill {
            // No constraint can reach any remaining block.
            let free = (big_n - l) as f64;
            let total = log_sum_exp(&dist) + free * lvl.log_m;
            return Ok(log_forced + total - log_kappa);
        }
        let conn_lo = pos;
        let word_lo = pos + m;
        let word_hi = word_lo + n1;
        let unconstrained = conn_lo >= forced && !last_with_spill;
        let mut next = vec![f64::NEG_INFINITY; a];
        if unconstrained {
            let total = log_sum_exp(&dist);
            for b in 0..a {
                next[b] = total + class_log[b];
            }
        } else {
            for prev in 0..a {
                if dist[prev] == f64::NEG_INFINITY {
                    continue;
                }
                for (w, &lw) in lvl.words.iter().zip(&lvl.log_weights) {
                    if m > 0 && conn_lo < forced {
                        let interior = system.connector(prev as Symbol, w.first().unwrap());
                        let upto = (forced - conn_lo).min(m);
                        if interior[..upto] != qs[conn_lo..conn_lo + upto] {
                            continue;
                        }
                    }
                    if word_lo < forced {
                        let upto = (forced - word_lo).min(n1);
                        if w.symbols()[..upto] != qs[word_lo..word_lo + upto] {
                            continue;
                        }
                    }
                    if last_with_spill
                        && !canonical_spill_matches(
                            system,
                            w.last().unwrap(),
                            &qs[t_next..forced],
                        )
                    {
                        continue;
                    }
                    let b = w.last().unwrap() as usize;
                    next[b] = log_add(next[b], dist[prev] + lw);
                }
            }
        }
        dist = next;
        pos = word_hi;
    }
    Ok(log_forced + log_sum_exp(&dist) - log_kappa)
}

/// The ball mass as a probability; underflows to zero for deep schedules
/// (use [`ball_log_mass`] there).
pub fn ball_mass(
    system: &SymbolicSystem,
    schedule: &GluingSchedule,
    prepared: &PreparedLevels,
    q: &Word,
    n: usize,
) -> Result<f64> {
    Ok(ball_log_mass(system, schedule, prepared, q, n)?.exp())
}

fn canonical_spill_matches(system: &SymbolicSystem, last: Symbol, expected: &[Symbol]) -> bool {
    let mut cur = last;
    for &want in expected {
        let next = system.lexmin_successor(cur);
        if next != want {
            return false;
        }
        cur = next;
    }
    true
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
