//! U-statistics over the ordered index set I_n^k: exact evaluation,
//! incrementally updated caches for single-site MCMC moves, decoupled
//! replica sums and the decoupling constants C_k.

use crate::error::{Error, Result};
use crate::numeric::falling_factorial;
use crate::potentials::Kernel;
use crate::space::{Configuration, Point, PointRef, StateSpace};

/// Visit all r-element combinations (ascending index slices) of 0..n.
pub fn for_each_combination(n: usize, r: usize, mut f: impl FnMut(&[usize])) {
    if r > n {
        return;
    }
    if r == 0 {
        f(&[]);
        return;
    }
    let mut idx: Vec<usize> = (0..r).collect();
    loop {
        f(&idx);
        // advance odometer
        let mut slot = r;
        loop {
            if slot == 0 {
                return;
            }
            slot -= 1;
            if idx[slot] != slot + n - r {
                break;
            }
            if slot == 0 {
                return;
            }
        }
        idx[slot] += 1;
        for j in slot + 1..r {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Visit all r-element combinations of 0..n that avoid `skip`.
pub fn for_each_combination_excluding(
    n: usize,
    r: usize,
    skip: usize,
    mut f: impl FnMut(&[usize]),
) {
    if n == 0 || r > n - 1 {
        if r == 0 {
            f(&[]);
        }
        return;
    }
    let mut mapped = vec![0usize; r];
    for_each_combination(n - 1, r, |c| {
        for (slot, &v) in c.iter().enumerate() {
            mapped[slot] = if v >= skip { v + 1 } else { v };
        }
        f(&mapped);
    });
}

/// Visit all ordered tuples of k distinct indices from 0..n (the set I_n^k),
/// in lexicographic order.
pub fn for_each_ordered_tuple(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    let mut tuple = vec![0usize; k];
    let mut used = vec![false; n];
    fn rec(
        n: usize,
        k: usize,
        depth: usize,
        tuple: &mut [usize],
        used: &mut [bool],
        f: &mut impl FnMut(&[usize]),
    ) {
        if depth == k {
            f(tuple);
            return;
        }
        for i in 0..n {
            if !used[i] {
                used[i] = true;
                tuple[depth] = i;
                rec(n, k, depth + 1, tuple, used, f);
                used[i] = false;
            }
        }
    }
    if k > n {
        return;
    }
    rec(n, k, 0, &mut tuple, &mut used, &mut f);
}

fn kernel_args<'a>(config: &'a Configuration, indices: &[usize], buf: &mut Vec<PointRef<'a>>) {
    buf.clear();
    buf.extend(indices.iter().map(|&i| config.point(i)));
}

/// U_n(W) = |I_n^k|⁻¹ Σ_{I_n^k} W(x_{i₁},…,x_{i_k}); +∞ if any contributing
/// tuple is +∞. Since W is symmetric the ordered sum is k!·(combination sum).
pub fn u_statistic(w: &impl Kernel, space: &StateSpace, config: &Configuration) -> Result<f64> {
    let cache = UStatCache::build(w, space, config)?;
    Ok(cache.value())
}

/// Running totals for one interaction order, supporting O(k·n^{k−1})
/// single-coordinate updates. Tuples with value +∞ are tracked by exact
/// count, so updates stay exact even for hard-core potentials and no
/// cache-invalidation fallback is ever needed.
#[derive(Debug, Clone)]
pub struct UStatCache {
    order: usize,
    n: usize,
    /// Sum of W over k-combinations with finite value.
    comb_total: f64,
    /// Number of k-combinations with value +∞.
    inf_combinations: u64,
    /// C(n,k) = |I_n^k| / k!.
    combination_count: f64,
}

/// The effect of one single-coordinate move, computed without committing.
#[derive(Debug, Clone, Copy)]
pub struct MoveDelta {
    index: usize,
    finite_delta: f64,
    inf_delta: i64,
}

impl UStatCache {
    pub fn build(w: &impl Kernel, space: &StateSpace, config: &Configuration) -> Result<Self> {
        let k = w.order();
        let n = config.len();
        if n < k {
            return Err(Error::TooFewParticles { needed: k, got: n });
        }
        let ordered = falling_factorial(n, k)
            .ok_or(Error::TooFewParticles { needed: k, got: n })? as f64;
        let mut kfact = 1.0;
        for j in 2..=k {
            kfact *= j as f64;
        }
        let mut comb_total = 0.0;
        let mut inf_combinations = 0u64;
        let mut args: Vec<PointRef<'_>> = Vec::with_capacity(k);
        for_each_combination(n, k, |c| {
            kernel_args(config, c, &mut args);
            let v = w.eval(space, &args);
            if v == f64::INFINITY {
                inf_combinations += 1;
            } else {
                comb_total += v;
            }
        });
        Ok(Self {
            order: k,
            n,
            comb_total,
            inf_combinations,
            combination_count: ordered / kfact,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn has_infinite(&self) -> bool {
        self.inf_combinations > 0
    }

    /// Current U_n value.
    pub fn value(&self) -> f64 {
        if self.inf_combinations > 0 {
            f64::INFINITY
        } else {
            self.comb_total / self.combination_count
        }
    }

    /// Ordered total T_k = Σ_{I_n^k} W (+∞ when any tuple is infinite).
    pub fn ordered_total(&self) -> f64 {
        if self.inf_combinations > 0 {
            f64::INFINITY
        } else {
            let mut kfact = 1.0;
            for j in 2..=self.order {
                kfact *= j as f64;
            }
            self.comb_total * kfact
        }
    }

    /// Delta from replacing coordinate `index` by `candidate`, not committed.
    pub fn delta_for_move(
        &self,
        w: &impl Kernel,
        space: &StateSpace,
        config: &Configuration,
        index: usize,
        candidate: &Point,
    ) -> Result<MoveDelta> {
        if index >= self.n {
            return Err(Error::IndexOutOfRange {
                index,
                len: self.n,
            });
        }
        let k = self.order;
        let mut finite_delta = 0.0;
        let mut inf_delta = 0i64;
        let mut args: Vec<PointRef<'_>> = Vec::with_capacity(k);
        let cand_ref = candidate.as_ref();
        for_each_combination_excluding(self.n, k - 1, index, |c| {
            args.clear();
            args.push(config.point(index));
            args.extend(c.iter().map(|&i| config.point(i)));
            let old_v = w.eval(space, &args);
            args[0] = cand_ref;
            let new_v = w.eval(space, &args);
            if old_v == f64::INFINITY {
                inf_delta -= 1;
            } else {
                finite_delta -= old_v;
            }
            if new_v == f64::INFINITY {
                inf_delta += 1;
            } else {
                finite_delta += new_v;
            }
        });
        Ok(MoveDelta {
            index,
            finite_delta,
            inf_delta,
        })
    }

    /// U_n value the cache would hold after applying `delta`.
    pub fn value_after(&self, delta: &MoveDelta) -> f64 {
        let infs = self.inf_combinations as i64 + delta.inf_delta;
        if infs > 0 {
            f64::INFINITY
        } else {
            (self.comb_total + delta.finite_delta) / self.combination_count
        }
    }

    /// Commit a previously computed move delta.
    pub fn apply(&mut self, delta: &MoveDelta) {
        let infs = self.inf_combinations as i64 + delta.inf_delta;
        debug_assert!(infs >= 0, "infinite-tuple count went negative");
        self.inf_combinations = infs.max(0) as u64;
        self.comb_total += delta.finite_delta;
    }

    /// Rebuild totals from scratch (drift audit).
    pub fn rebuild(&mut self, w: &impl Kernel, space: &StateSpace, config: &Configuration) -> Result<()> {
        *self = Self::build(w, space, config)?;
        Ok(())
    }

    #[allow(unused)]
    pub(crate) fn move_index(delta: &MoveDelta) -> usize {
        delta.index
    }
}

/// Replaces x_i by `candidate` in `config`, updating the cache, and returns
/// the new U_n value.
pub fn u_statistic_update(
    cache: &mut UStatCache,
    w: &impl Kernel,
    space: &StateSpace,
    config: &mut Configuration,
    index: usize,
    candidate: Point,
) -> Result<f64> {
    let delta = cache.delta_for_move(w, space, config, index, &candidate)?;
    cache.apply(&delta);
    config.set_point(index, &candidate);
    Ok(cache.value())
}

/// de la Peña decoupling constants: C₂ = 8 and C_k = 2^k ∏_{j=2}^k (j^j − 1)
/// for k > 2, exact.
pub fn decoupling_constant(k: usize) -> Result<u128> {
    if k < 2 {
        return Err(Error::InvalidPotential(format!(
            "decoupling constant defined for k >= 2, got {k}"
        )));
    }
    if k == 2 {
        return Ok(8);
    }
    let mut acc: u128 = 1u128
        .checked_shl(k as u32)
        .ok_or_else(|| Error::TooLargeToEnumerate(format!("2^{k} overflows")))?;
    for j in 2..=k {
        let jj = (j as u128)
            .checked_pow(j as u32)
            .ok_or_else(|| Error::TooLargeToEnumerate(format!("{j}^{j} overflows")))?;
        acc = acc
            .checked_mul(jj - 1)
            .ok_or_else(|| Error::TooLargeToEnumerate(format!("C_{k} overflows")))?;
    }
    Ok(acc)
}

const DECOUPLED_TUPLE_CAP: u128 = 100_000_000;

/// Σ_{I_n^k} W(X¹_{i₁},…,X^k_{i_k}) with coordinate j drawn from replica j.
/// This is a sum over I_n^k, not an average.
pub fn decoupled_u_sum(
    w: &impl Kernel,
    space: &StateSpace,
    replicas: &[Configuration],
) -> Result<f64> {
    let k = w.order();
    if replicas.len() != k {
        return Err(Error::ArityMismatch {
            expected: k,
            got: replicas.len(),
        });
    }
    let n = replicas[0].len();
    for (j, r) in replicas.iter().enumerate() {
        if r.len() != n {
            return Err(Error::ReplicaLengthMismatch {
                index: j,
                expected: n,
                got: r.len(),
            });
        }
    }
    let tuples = falling_factorial(n, k).ok_or(Error::TooFewParticles { needed: k, got: n })?;
    if tuples > DECOUPLED_TUPLE_CAP {
        return Err(Error::TooLargeToEnumerate(format!(
            "|I_n^k| = {tuples} ordered tuples"
        )));
    }
    let mut total = 0.0;
    let mut args: Vec<PointRef<'_>> = Vec::with_capacity(k);
    for_each_ordered_tuple(n, k, |t| {
        args.clear();
        for (j, &i) in t.iter().enumerate() {
            args.push(replicas[j].point(i));
        }
        total += w.eval(space, &args);
    });
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{FnKernel, InteractionFamily, InteractionPotential};
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn product_kernel() -> impl Kernel {
        FnKernel::new(2, |_: &StateSpace, a: &[PointRef<'_>]| {
            match (a[0], a[1]) {
                (PointRef::Euclidean(x), PointRef::Euclidean(y)) => x[0] * y[0],
                _ => f64::NAN,
            }
        })
    }

    #[test]
    fn u_statistic_constant_kernel() {
        let space = StateSpace::spin();
        let w = FnKernel::new(2, |_: &StateSpace, _: &[PointRef<'_>]| 2.5);
        for n in 2..6 {
            let cfg = Configuration::finite(vec![0; n]);
            assert_eq!(u_statistic(&w, &space, &cfg).unwrap(), 2.5);
        }
    }

    #[test]
    fn u_statistic_product_enumeration() {
        // x = (1,2,3), W(x,y) = xy: ordered pair sum = 2(2+3+6) = 22, U = 22/6
        let space = StateSpace::line();
        let cfg = Configuration::euclidean(1, vec![1.0, 2.0, 3.0]);
        let u = u_statistic(&product_kernel(), &space, &cfg).unwrap();
        assert!((u - 22.0 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn u_statistic_too_few_particles() {
        let space = StateSpace::line();
        let cfg = Configuration::euclidean(1, vec![1.0]);
        assert!(matches!(
            u_statistic(&product_kernel(), &space, &cfg),
            Err(Error::TooFewParticles { .. })
        ));
    }

    #[test]
    fn u_statistic_singular_diagonal() {
        let w = InteractionPotential::pair(InteractionFamily::Logarithmic { b: 1.0 }).unwrap();
        let space = StateSpace::line();
        let distinct = Configuration::euclidean(1, vec![0.0, 0.5, 2.0]);
        assert!(u_statistic(&w, &space, &distinct).unwrap().is_finite());
        let repeated = Configuration::euclidean(1, vec![0.0, 0.5, 0.5]);
        assert_eq!(
            u_statistic(&w, &space, &repeated).unwrap(),
            f64::INFINITY
        );
    }

    #[test]
    fn update_matches_paper_example() {
        // k=2, n=3, W=xy, x=(1,2,3), move x_1: 1 -> 4 gives U = 26/3... / recheck:
        // pairs (4,2),(4,3),(2,3) sum 8+12+6 = 26, ordered 52, U = 52/6 = 26/3
        let space = StateSpace::line();
        let mut cfg = Configuration::euclidean(1, vec![1.0, 2.0, 3.0]);
        let w = product_kernel();
        let mut cache = UStatCache::build(&w, &space, &cfg).unwrap();
        let u = u_statistic_update(
            &mut cache,
            &w,
            &space,
            &mut cfg,
            0,
            Point::Euclidean(vec![4.0]),
        )
        .unwrap();
        assert!((u - 26.0 / 3.0).abs() < 1e-14);
        // and agrees with a recomputation
        let direct = u_statistic(&w, &space, &cfg).unwrap();
        assert!((u - direct).abs() < 1e-14);
    }

    #[test]
    fn update_noop_move_keeps_totals() {
        let space = StateSpace::line();
        let mut cfg = Configuration::euclidean(1, vec![1.0, 2.0, 3.0, -1.5]);
        let w = product_kernel();
        let mut cache = UStatCache::build(&w, &space, &cfg).unwrap();
        let before = cache.value();
        let u = u_statistic_update(
            &mut cache,
            &w,
            &space,
            &mut cfg,
            2,
            Point::Euclidean(vec![3.0]),
        )
        .unwrap();
        assert!((u - before).abs() < 1e-12);
    }

    #[test]
    fn update_through_infinite_states() {
        // hard-core: +inf when |x−y| = 0; move a particle onto another and back off
        let w = InteractionPotential::pair(InteractionFamily::Logarithmic { b: 1.0 }).unwrap();
        let space = StateSpace::line();
        let mut cfg = Configuration::euclidean(1, vec![0.0, 1.0, 2.0]);
        let mut cache = UStatCache::build(&w, &space, &cfg).unwrap();
        assert!(!cache.has_infinite());

        let u = u_statistic_update(
            &mut cache,
            &w,
            &space,
            &mut cfg,
            0,
            Point::Euclidean(vec![1.0]),
        )
        .unwrap();
        assert_eq!(u, f64::INFINITY);
        assert!(cache.has_infinite());

        let u = u_statistic_update(
            &mut cache,
            &w,
            &space,
            &mut cfg,
            0,
            Point::Euclidean(vec![0.25]),
        )
        .unwrap();
        assert!(u.is_finite());
        let direct = u_statistic(&w, &space, &cfg).unwrap();
        assert!((u - direct).abs() < 1e-12);
    }

    #[test]
    fn cache_drift_after_many_updates() {
        let space = StateSpace::line();
        let n = 24;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let coords: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut cfg = Configuration::euclidean(1, coords);
        let w = product_kernel();
        let mut cache = UStatCache::build(&w, &space, &cfg).unwrap();
        for _ in 0..10_000 {
            let i = rng.random_range(0..n);
            let x = rng.random_range(-2.0..2.0);
            u_statistic_update(&mut cache, &w, &space, &mut cfg, i, Point::Euclidean(vec![x]))
                .unwrap();
        }
        let direct = u_statistic(&w, &space, &cfg).unwrap();
        let rel = (cache.value() - direct).abs() / direct.abs().max(1e-30);
        assert!(rel < 1e-10, "cache drift {rel}");
    }

    #[test]
    fn third_order_cache_updates() {
        // symmetric 3-body table on the spin space
        let mut values = vec![0.0; 8];
        for flat in 0..8 {
            let (a, b, c) = (flat >> 2 & 1, flat >> 1 & 1, flat & 1);
            values[flat] = (a + b + c) as f64 * 0.5 - 0.3;
        }
        let w =
            InteractionPotential::new(3, InteractionFamily::Table { side: 2, values }).unwrap();
        let space = StateSpace::spin();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut cfg = Configuration::finite((0..7).map(|_| rng.random_range(0..2)).collect());
        let mut cache = UStatCache::build(&w, &space, &cfg).unwrap();
        for _ in 0..200 {
            let i = rng.random_range(0..7);
            let s = rng.random_range(0..2);
            let u =
                u_statistic_update(&mut cache, &w, &space, &mut cfg, i, Point::Finite(s)).unwrap();
            let direct = u_statistic(&w, &space, &cfg).unwrap();
            assert!((u - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn update_rejects_bad_index() {
        let space = StateSpace::line();
        let mut cfg = Configuration::euclidean(1, vec![1.0, 2.0, 3.0]);
        let w = product_kernel();
        let mut cache = UStatCache::build(&w, &space, &cfg).unwrap();
        assert!(matches!(
            u_statistic_update(&mut cache, &w, &space, &mut cfg, 3, Point::Euclidean(vec![0.0])),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn decoupling_constants_exact() {
        assert_eq!(decoupling_constant(2).unwrap(), 8);
        assert_eq!(decoupling_constant(3).unwrap(), 624);
        assert_eq!(decoupling_constant(4).unwrap(), 318_240);
        assert!(decoupling_constant(1).is_err());
    }

    #[test]
    fn decoupled_sum_examples() {
        let space = StateSpace::line();
        let w = product_kernel();
        // identical replicas equal the plain ordered sum
        let cfg = Configuration::euclidean(1, vec![1.0, 2.0, 3.0]);
        let s = decoupled_u_sum(&w, &space, &[cfg.clone(), cfg.clone()]).unwrap();
        assert!((s - 22.0).abs() < 1e-13);
        // constant kernel sums to c · |I_n^k|
        let c = FnKernel::new(2, |_: &StateSpace, _: &[PointRef<'_>]| 1.5);
        let s = decoupled_u_sum(&c, &space, &[cfg.clone(), cfg.clone()]).unwrap();
        assert!((s - 1.5 * 6.0).abs() < 1e-13);
        // k=2, n=2 hand enumeration: 1·4 + 2·3 = 10
        let r1 = Configuration::euclidean(1, vec![1.0, 2.0]);
        let r2 = Configuration::euclidean(1, vec![3.0, 4.0]);
        let s = decoupled_u_sum(&w, &space, &[r1, r2]).unwrap();
        assert!((s - 10.0).abs() < 1e-14);
    }

    #[test]
    fn decoupled_sum_length_mismatch() {
        let space = StateSpace::line();
        let w = product_kernel();
        let r1 = Configuration::euclidean(1, vec![1.0, 2.0]);
        let r2 = Configuration::euclidean(1, vec![3.0]);
        assert!(matches!(
            decoupled_u_sum(&w, &space, &[r1, r2]),
            Err(Error::ReplicaLengthMismatch { .. })
        ));
    }

    #[test]
    fn exchangeability() {
        let space = StateSpace::line();
        let w = product_kernel();
        let cfg = Configuration::euclidean(1, vec![0.3, -1.2, 2.0, 0.7]);
        let u0 = u_statistic(&w, &space, &cfg).unwrap();
        let perm = Configuration::euclidean(1, vec![2.0, 0.3, 0.7, -1.2]);
        let u1 = u_statistic(&w, &space, &perm).unwrap();
        // same summands in a different order: equal up to round-off
        assert!((u0 - u1).abs() <= 1e-15 * u0.abs().max(1.0));
    }

    #[test]
    fn ordered_tuple_enumeration_count() {
        let mut count = 0u64;
        for_each_ordered_tuple(5, 3, |_| count += 1);
        assert_eq!(count, 60);
        let mut count = 0u64;
        for_each_combination(6, 3, |_| count += 1);
        assert_eq!(count, 20);
        let mut count = 0u64;
        for_each_combination_excluding(6, 2, 3, |c| {
            assert!(!c.contains(&3));
            count += 1;
        });
        assert_eq!(count, 10);
    }
}
