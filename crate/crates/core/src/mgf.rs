//! Logarithmic moment generating functions of U-statistics: exact finite-space
//! values, the decoupling key bound, and the iterated Hölder/Jensen inequality.

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::numeric::{falling_factorial, LogSumExp};
use crate::potentials::Kernel;
use crate::space::{Configuration, Point, PointRef};
use crate::ustats::{decoupling_constant, for_each_ordered_tuple, u_statistic};

pub const ENUMERATION_CAP: u128 = 10_000_000;

fn dense_log_weights(alpha: &DiscreteMeasure) -> Result<Vec<f64>> {
    let dense = alpha.dense_weights()?;
    Ok(dense
        .iter()
        .map(|&w| if w > 0.0 { w.ln() } else { f64::NEG_INFINITY })
        .collect())
}

fn check_enumerable(states: usize, slots: usize) -> Result<()> {
    let count = (states as u128)
        .checked_pow(slots as u32)
        .unwrap_or(u128::MAX);
    if count > ENUMERATION_CAP {
        return Err(Error::TooLargeToEnumerate(format!(
            "{states}^{slots} configurations"
        )));
    }
    Ok(())
}

/// Odometer over S^slots; calls f with the current state vector.
fn for_each_assignment(states: usize, slots: usize, mut f: impl FnMut(&[usize])) {
    let mut cfg = vec![0usize; slots];
    loop {
        f(&cfg);
        let mut slot = 0;
        loop {
            if slot == slots {
                return;
            }
            cfg[slot] += 1;
            if cfg[slot] < states {
                break;
            }
            cfg[slot] = 0;
            slot += 1;
        }
    }
}

/// Λ_n(λ; W) = (1/n) log E[exp(λ n U_n(W))] computed exactly by summing over
/// all |S|^n configurations of the i.i.d.-α product law, in the log domain.
pub fn log_mgf_exact(
    w: &impl Kernel,
    alpha: &DiscreteMeasure,
    n: usize,
    lambda: f64,
) -> Result<f64> {
    let space = alpha.space().clone();
    let f = space
        .as_finite()
        .ok_or_else(|| Error::TooLargeToEnumerate("exact MGF needs a finite space".into()))?;
    let k = w.order();
    if n < k {
        return Err(Error::TooFewParticles { needed: k, got: n });
    }
    check_enumerable(f.len(), n)?;
    let log_w = dense_log_weights(alpha)?;

    let mut lse = LogSumExp::new();
    let mut config = Configuration::finite(vec![0; n]);
    for_each_assignment(f.len(), n, |states| {
        let mut log_prob = 0.0;
        for &s in states {
            log_prob += log_w[s];
        }
        if log_prob == f64::NEG_INFINITY {
            return;
        }
        if let Configuration::Finite(v) = &mut config {
            v.copy_from_slice(states);
        }
        let u = u_statistic(w, &space, &config).expect("n >= k checked");
        lse.add(log_prob + lambda * n as f64 * u);
    });
    Ok(lse.value() / n as f64)
}

/// Right side of the key decoupling bound:
/// (1/k) log E[exp(k C_k λ |W(X₁,…,X_k)|)], exact on finite-support α.
/// Dominates Λ_n(λ; W) for every n ≥ k.
pub fn log_mgf_key_bound(w: &impl Kernel, alpha: &DiscreteMeasure, lambda: f64) -> Result<f64> {
    let space = alpha.space().clone();
    let f = space
        .as_finite()
        .ok_or_else(|| Error::TooLargeToEnumerate("exact key bound needs a finite space".into()))?;
    let k = w.order();
    check_enumerable(f.len(), k)?;
    let ck = decoupling_constant(k)? as f64;
    let log_w = dense_log_weights(alpha)?;

    let mut lse = LogSumExp::new();
    let mut args_points: Vec<Point> = Vec::with_capacity(k);
    for_each_assignment(f.len(), k, |states| {
        let mut log_prob = 0.0;
        for &s in states {
            log_prob += log_w[s];
        }
        if log_prob == f64::NEG_INFINITY {
            return;
        }
        args_points.clear();
        args_points.extend(states.iter().map(|&s| Point::Finite(s)));
        let refs: Vec<PointRef<'_>> = args_points.iter().map(|p| p.as_ref()).collect();
        let v = w.eval(&space, &refs);
        lse.add(log_prob + k as f64 * ck * lambda * v.abs());
    });
    Ok(lse.value() / k as f64)
}

/// Per-tuple kernels Φ_{i₁,…,i_k} on a finite space, tabulated; tuple rank
/// follows the lexicographic enumeration of I_n^k.
#[derive(Debug, Clone)]
pub struct TupleKernelTable {
    n: usize,
    k: usize,
    side: usize,
    tables: Vec<Vec<f64>>,
}

impl TupleKernelTable {
    pub fn new(n: usize, k: usize, side: usize, tables: Vec<Vec<f64>>) -> Result<Self> {
        let tuples = falling_factorial(n, k)
            .ok_or(Error::TooFewParticles { needed: k, got: n })? as usize;
        if tables.len() != tuples {
            return Err(Error::InvalidPotential(format!(
                "need one table per tuple: {tuples} tuples, got {}",
                tables.len()
            )));
        }
        let cells = side.pow(k as u32);
        if tables.iter().any(|t| t.len() != cells) {
            return Err(Error::InvalidPotential(format!(
                "each tuple table needs {cells} entries"
            )));
        }
        Ok(Self { n, k, side, tables })
    }

    /// Same Φ for every tuple.
    pub fn constant(n: usize, k: usize, side: usize, table: Vec<f64>) -> Result<Self> {
        let tuples = falling_factorial(n, k)
            .ok_or(Error::TooFewParticles { needed: k, got: n })? as usize;
        Self::new(n, k, side, vec![table; tuples])
    }

    fn value(&self, tuple_rank: usize, states: &[usize]) -> f64 {
        let mut flat = 0usize;
        for &s in states {
            flat = flat * self.side + s;
        }
        self.tables[tuple_rank][flat]
    }
}

/// Both sides of the iterated log-MGF inequality for the decoupled sum
/// Σ_{I_n^k} Φ_{i₁,…,i_k}(X¹_{i₁},…,X^k_{i_k}) with independent replicas:
///
/// lhs = log E exp( ((n−k)!/n!) Σ Φ… )
/// rhs = ((n−k+1)!/n!) Σ log E exp( Φ…/(n−k+1) )
///
/// `laws[j]` is the common law of replica j's coordinates. Exact enumeration;
/// lhs ≤ rhs always, with equality at k = 1.
pub fn iterated_log_mgf_sides(
    phi: &TupleKernelTable,
    laws: &[Vec<f64>],
) -> Result<(f64, f64)> {
    let (n, k, side) = (phi.n, phi.k, phi.side);
    if laws.len() != k {
        return Err(Error::ArityMismatch {
            expected: k,
            got: laws.len(),
        });
    }
    for law in laws {
        if law.len() != side {
            return Err(Error::InvalidMeasure(format!(
                "replica law needs {side} entries"
            )));
        }
        let total: f64 = law.iter().sum();
        if (total - 1.0).abs() > 1e-9 || law.iter().any(|&p| p < 0.0) {
            return Err(Error::InvalidMeasure("replica law is not a probability".into()));
        }
    }
    check_enumerable(side, k * n)?;

    let ordered = falling_factorial(n, k).unwrap() as f64;
    let inv_count = 1.0 / ordered; // (n−k)!/n!
    let rhs_weight = (n - k + 1) as f64 / ordered; // (n−k+1)!/n!
    let inner_scale = 1.0 / (n - k + 1) as f64;

    // rhs: one small expectation per tuple
    let mut rhs = 0.0;
    {
        let mut rank = 0usize;
        let mut err = None;
        for_each_ordered_tuple(n, k, |_t| {
            let mut lse = LogSumExp::new();
            for_each_assignment(side, k, |states| {
                let mut log_prob = 0.0;
                for (j, &s) in states.iter().enumerate() {
                    let p = laws[j][s];
                    log_prob += if p > 0.0 { p.ln() } else { f64::NEG_INFINITY };
                }
                if log_prob == f64::NEG_INFINITY {
                    return;
                }
                lse.add(log_prob + inner_scale * phi.value(rank, states));
            });
            let v = lse.value();
            if !v.is_finite() {
                err = Some(v);
            }
            rhs += rhs_weight * v;
            rank += 1;
        });
        if let Some(v) = err {
            return Ok((v, v));
        }
    }

    // lhs: expectation over the full assignment of all k·n replica coordinates
    let mut lse = LogSumExp::new();
    let mut tuple_ranks: Vec<Vec<usize>> = Vec::new();
    for_each_ordered_tuple(n, k, |t| tuple_ranks.push(t.to_vec()));
    for_each_assignment(side, k * n, |assign| {
        // assign[j*n + i] is the state of X_i^{j+1}
        let mut log_prob = 0.0;
        for j in 0..k {
            for i in 0..n {
                let p = laws[j][assign[j * n + i]];
                log_prob += if p > 0.0 { p.ln() } else { f64::NEG_INFINITY };
            }
        }
        if log_prob == f64::NEG_INFINITY {
            return;
        }
        let mut total = 0.0;
        let mut states = vec![0usize; k];
        for (rank, tuple) in tuple_ranks.iter().enumerate() {
            for (j, &i) in tuple.iter().enumerate() {
                states[j] = assign[j * n + i];
            }
            total += phi.value(rank, &states);
        }
        lse.add(log_prob + inv_count * total);
    });
    Ok((lse.value(), rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::ReferenceMeasure;
    use crate::space::StateSpace;
    use crate::potentials::{FnKernel, InteractionFamily, InteractionPotential};

    fn uniform_spin_alpha() -> DiscreteMeasure {
        ReferenceMeasure::uniform(&StateSpace::spin())
            .unwrap()
            .alpha()
            .clone()
    }

    #[test]
    fn mgf_zero_kernel() {
        let alpha = uniform_spin_alpha();
        let w = FnKernel::new(2, |_: &StateSpace, _: &[PointRef<'_>]| 0.0);
        for n in 2..5 {
            assert!(log_mgf_exact(&w, &alpha, n, 0.7).unwrap().abs() < 1e-14);
        }
        assert!(log_mgf_key_bound(&w, &alpha, 0.7).unwrap().abs() < 1e-14);
    }

    #[test]
    fn mgf_constant_kernel() {
        let alpha = uniform_spin_alpha();
        let c = 0.4;
        let w = FnKernel::new(2, move |_: &StateSpace, _: &[PointRef<'_>]| c);
        let lambda = 0.9;
        for n in 2..5 {
            let v = log_mgf_exact(&w, &alpha, n, lambda).unwrap();
            assert!((v - lambda * c).abs() < 1e-12, "Λ_n = λc for constant W");
        }
        // key bound for constant positive W at k=2 equals 8λc and dominates λc
        let bound = log_mgf_key_bound(&w, &alpha, lambda).unwrap();
        assert!((bound - 8.0 * lambda * c).abs() < 1e-12);
        assert!(bound >= lambda * c);
    }

    #[test]
    fn mgf_spin_golden_value() {
        // S = {−1,1}, α uniform, W = −xy/2, n = 3, λ = 1;
        // golden value from the 8-configuration enumeration oracle
        let alpha = uniform_spin_alpha();
        let w = InteractionPotential::pair(InteractionFamily::SpinProduct { beta: 1.0 }).unwrap();
        let v = log_mgf_exact(&w, &alpha, 3, 1.0).unwrap();
        assert!((v - 0.085_480_585_215_751_46).abs() < 1e-12, "got {v}");
    }

    #[test]
    fn key_bound_dominates_exact_on_random_tables() {
        use rand::{RngExt, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let alpha = uniform_spin_alpha();
        for _ in 0..20 {
            let a = rng.random_range(-8..=8i32) as f64 / 4.0;
            let d = rng.random_range(-8..=8i32) as f64 / 4.0;
            let off = rng.random_range(-8..=8i32) as f64 / 4.0;
            let w = InteractionPotential::new(
                2,
                InteractionFamily::Table {
                    side: 2,
                    values: vec![a, off, off, d],
                },
            )
            .unwrap();
            let lambda = 0.3;
            let bound = log_mgf_key_bound(&w, &alpha, lambda).unwrap();
            for n in 2..=6 {
                let exact = log_mgf_exact(&w, &alpha, n, lambda).unwrap();
                assert!(
                    exact <= bound + 1e-10,
                    "Λ_{n} = {exact} > bound {bound}"
                );
            }
        }
    }

    #[test]
    fn iterated_bound_equality_at_k1() {
        let table = vec![0.3, -0.7];
        let phi = TupleKernelTable::constant(3, 1, 2, table).unwrap();
        let laws = vec![vec![0.4, 0.6]];
        let (lhs, rhs) = iterated_log_mgf_sides(&phi, &laws).unwrap();
        assert!((lhs - rhs).abs() < 1e-12, "k = 1 must be an equality");
    }

    #[test]
    fn iterated_bound_zero_tables() {
        let phi = TupleKernelTable::constant(3, 2, 2, vec![0.0; 4]).unwrap();
        let laws = vec![vec![0.5, 0.5]; 2];
        let (lhs, rhs) = iterated_log_mgf_sides(&phi, &laws).unwrap();
        assert!(lhs.abs() < 1e-12 && rhs.abs() < 1e-12);
    }

    #[test]
    fn iterated_bound_random_instances() {
        use rand::{RngExt, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(33);
        for _ in 0..30 {
            let tables: Vec<Vec<f64>> = (0..6)
                .map(|_| {
                    (0..4)
                        .map(|_| rng.random_range(-8..=8i32) as f64 / 4.0)
                        .collect()
                })
                .collect();
            let phi = TupleKernelTable::new(3, 2, 2, tables).unwrap();
            let p = rng.random_range(0.2..0.8);
            let q = rng.random_range(0.2..0.8);
            let laws = vec![vec![p, 1.0 - p], vec![q, 1.0 - q]];
            let (lhs, rhs) = iterated_log_mgf_sides(&phi, &laws).unwrap();
            assert!(lhs <= rhs + 1e-10, "lhs {lhs} > rhs {rhs}");
        }
    }

    #[test]
    fn enumeration_cap_enforced() {
        let alpha = uniform_spin_alpha();
        let w = FnKernel::new(2, |_: &StateSpace, _: &[PointRef<'_>]| 0.0);
        assert!(matches!(
            log_mgf_exact(&w, &alpha, 64, 1.0),
            Err(Error::TooLargeToEnumerate(_))
        ));
    }
}
