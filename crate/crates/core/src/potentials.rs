//! Confinement and k-body interaction potentials: built-in families,
//! truncation, and the Monte Carlo exponential-integrability diagnostics.


use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::ReferenceMeasure;
use crate::numeric::{derive_seed, jackknife_log_mean_stderr, log_sum_exp};
use crate::space::{PointRef, StateSpace};

/// Single-particle confinement V: S → (−∞, +∞].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ConfinementPotential {
    /// V(x) = a·|x|² on euclidean spaces.
    Quadratic { a: f64 },
    /// Tabulated values per label (finite) or per grid cell (euclidean);
    /// this is the file-based form of custom expressions.
    Table { values: Vec<f64> },
    Zero,
}

impl ConfinementPotential {
    pub fn value(&self, space: &StateSpace, p: PointRef<'_>) -> f64 {
        match (self, p) {
            (ConfinementPotential::Zero, _) => 0.0,
            (ConfinementPotential::Quadratic { a }, PointRef::Euclidean(x)) => {
                a * x.iter().map(|c| c * c).sum::<f64>()
            }
            (ConfinementPotential::Table { values }, PointRef::Finite(i)) => values[i],
            (ConfinementPotential::Table { values }, PointRef::Euclidean(x)) => match space {
                StateSpace::Euclidean(e) => values[e.cell_of(x[0])],
                _ => f64::NAN,
            },
            (ConfinementPotential::Quadratic { .. }, PointRef::Finite(_)) => f64::NAN,
        }
    }

    /// ∇V at a euclidean point, None for non-smooth families.
    pub fn grad(&self, x: &[f64]) -> Option<Vec<f64>> {
        match self {
            ConfinementPotential::Zero => Some(vec![0.0; x.len()]),
            ConfinementPotential::Quadratic { a } => Some(x.iter().map(|c| 2.0 * a * c).collect()),
            ConfinementPotential::Table { .. } => None,
        }
    }

    pub fn is_smooth(&self) -> bool {
        !matches!(self, ConfinementPotential::Table { .. })
    }
}

/// A symmetric extended-real kernel of fixed order on S^k.
pub trait Kernel {
    fn order(&self) -> usize;
    fn eval(&self, space: &StateSpace, args: &[PointRef<'_>]) -> f64;
}

impl<K: Kernel + ?Sized> Kernel for &K {
    fn order(&self) -> usize {
        (**self).order()
    }
    fn eval(&self, space: &StateSpace, args: &[PointRef<'_>]) -> f64 {
        (**self).eval(space, args)
    }
}

/// Wraps a closure as a kernel; handy for tests and diagnostics.
pub struct FnKernel<F> {
    order: usize,
    f: F,
}

impl<F: Fn(&StateSpace, &[PointRef<'_>]) -> f64> FnKernel<F> {
    pub fn new(order: usize, f: F) -> Self {
        Self { order, f }
    }
}

impl<F: Fn(&StateSpace, &[PointRef<'_>]) -> f64> Kernel for FnKernel<F> {
    fn order(&self) -> usize {
        self.order
    }
    fn eval(&self, space: &StateSpace, args: &[PointRef<'_>]) -> f64 {
        (self.f)(space, args)
    }
}

/// Built-in interaction families. Singular families (power-law, logarithmic)
/// are +∞ on the diagonal by convention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum InteractionFamily {
    /// b / ρ(x,y)^β with b > 0, β > 0 (Coulomb for β = 1).
    PowerLaw { b: f64, beta: f64 },
    /// −b · log ρ(x,y) with b > 0.
    #[serde(rename = "log")]
    Logarithmic { b: f64 },
    /// θ·x·y on euclidean d = 1.
    QuadraticProduct { theta: f64 },
    /// −(β/2)·s_x·s_y on the two-point spin space.
    SpinProduct { beta: f64 },
    /// Tabulated symmetric values on S^k, flattened row-major over indices.
    Table { side: usize, values: Vec<f64> },
}

/// A k-body interaction potential W^(k).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionPotential {
    #[serde(default = "default_order")]
    order: usize,
    #[serde(flatten)]
    family: InteractionFamily,
}

fn default_order() -> usize {
    2
}

impl InteractionPotential {
    pub fn new(order: usize, family: InteractionFamily) -> Result<Self> {
        if order < 2 {
            return Err(Error::InvalidPotential(format!(
                "interaction order must be >= 2, got {order}"
            )));
        }
        match &family {
            InteractionFamily::PowerLaw { b, beta } => {
                if !(order == 2 && *b > 0.0 && *beta > 0.0) {
                    return Err(Error::InvalidPotential(
                        "power_law needs order 2, b > 0, beta > 0".into(),
                    ));
                }
            }
            InteractionFamily::Logarithmic { b } => {
                if !(order == 2 && *b > 0.0) {
                    return Err(Error::InvalidPotential("log needs order 2 and b > 0".into()));
                }
            }
            InteractionFamily::QuadraticProduct { theta } => {
                if order != 2 || !theta.is_finite() {
                    return Err(Error::InvalidPotential(
                        "quadratic_product needs order 2 and finite theta".into(),
                    ));
                }
            }
            InteractionFamily::SpinProduct { beta } => {
                if order != 2 || !beta.is_finite() {
                    return Err(Error::InvalidPotential(
                        "spin_product needs order 2 and finite beta".into(),
                    ));
                }
            }
            InteractionFamily::Table { side, values } => {
                let expect = (*side as u128).checked_pow(order as u32);
                if expect != Some(values.len() as u128) {
                    return Err(Error::InvalidPotential(format!(
                        "table of order {order} on {side} states needs {side}^{order} values"
                    )));
                }
                if values.iter().any(|v| v.is_nan() || *v == f64::NEG_INFINITY) {
                    return Err(Error::InvalidPotential(
                        "table values must lie in (-inf, +inf]".into(),
                    ));
                }
                check_table_symmetry(*side, order, values)?;
            }
        }
        Ok(Self { order, family })
    }

    pub fn pair(family: InteractionFamily) -> Result<Self> {
        Self::new(2, family)
    }

    pub fn family(&self) -> &InteractionFamily {
        &self.family
    }

    /// Scale the potential by s > 0 (every family is closed under this).
    pub fn scaled(&self, s: f64) -> Self {
        assert!(s > 0.0, "use an empty interaction list for scale 0");
        let family = match &self.family {
            InteractionFamily::PowerLaw { b, beta } => InteractionFamily::PowerLaw {
                b: b * s,
                beta: *beta,
            },
            InteractionFamily::Logarithmic { b } => InteractionFamily::Logarithmic { b: b * s },
            InteractionFamily::QuadraticProduct { theta } => {
                InteractionFamily::QuadraticProduct { theta: theta * s }
            }
            InteractionFamily::SpinProduct { beta } => {
                InteractionFamily::SpinProduct { beta: beta * s }
            }
            InteractionFamily::Table { side, values } => InteractionFamily::Table {
                side: *side,
                values: values.iter().map(|v| v * s).collect(),
            },
        };
        Self {
            order: self.order,
            family,
        }
    }

    /// Effective coupling for spin-product models, None otherwise.
    pub fn spin_coupling(&self) -> Option<f64> {
        match self.family {
            InteractionFamily::SpinProduct { beta } => Some(beta),
            _ => None,
        }
    }

    /// True for families that are +∞ somewhere (hard singularities).
    pub fn is_singular(&self) -> bool {
        matches!(
            self.family,
            InteractionFamily::PowerLaw { .. } | InteractionFamily::Logarithmic { .. }
        ) || matches!(&self.family, InteractionFamily::Table { values, .. }
            if values.iter().any(|v| v.is_infinite()))
    }

    pub fn family_name(&self) -> &'static str {
        match self.family {
            InteractionFamily::PowerLaw { .. } => "power_law",
            InteractionFamily::Logarithmic { .. } => "log",
            InteractionFamily::QuadraticProduct { .. } => "quadratic_product",
            InteractionFamily::SpinProduct { .. } => "spin_product",
            InteractionFamily::Table { .. } => "table",
        }
    }

    /// ∇ with respect to the first argument, for the smooth families.
    /// Points must be off the singular set of power-law/log.
    pub fn grad_first(&self, space: &StateSpace, args: &[PointRef<'_>]) -> Result<Vec<f64>> {
        let (x, y) = match (args[0], args[1]) {
            (PointRef::Euclidean(x), PointRef::Euclidean(y)) => (x, y),
            _ => {
                return Err(Error::NonDifferentiableFamily(
                    self.family_name().to_string(),
                ))
            }
        };
        match &self.family {
            InteractionFamily::QuadraticProduct { theta } => Ok(vec![theta * y[0]]),
            InteractionFamily::PowerLaw { b, beta } => {
                let r = space.distance(args[0], args[1]);
                if r == 0.0 {
                    return Err(Error::SingularConfiguration("power_law".into()));
                }
                let factor = -b * beta * r.powf(-beta - 2.0);
                Ok(x.iter().zip(y).map(|(a, c)| factor * (a - c)).collect())
            }
            InteractionFamily::Logarithmic { b } => {
                let r = space.distance(args[0], args[1]);
                if r == 0.0 {
                    return Err(Error::SingularConfiguration("log".into()));
                }
                let factor = -b / (r * r);
                Ok(x.iter().zip(y).map(|(a, c)| factor * (a - c)).collect())
            }
            _ => Err(Error::NonDifferentiableFamily(
                self.family_name().to_string(),
            )),
        }
    }

    pub fn is_smooth(&self) -> bool {
        matches!(
            self.family,
            InteractionFamily::QuadraticProduct { .. }
                | InteractionFamily::PowerLaw { .. }
                | InteractionFamily::Logarithmic { .. }
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("potential serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: InteractionPotential =
            serde_json::from_str(s).map_err(|e| Error::InvalidPotential(e.to_string()))?;
        Self::new(p.order, p.family)
    }
}

fn check_table_symmetry(side: usize, order: usize, values: &[f64]) -> Result<()> {
    // exhaustive over all index tuples and adjacent transpositions
    let total = values.len();
    let mut idx = vec![0usize; order];
    for flat in 0..total {
        let mut rem = flat;
        for slot in (0..order).rev() {
            idx[slot] = rem % side;
            rem /= side;
        }
        for swap in 0..order - 1 {
            idx.swap(swap, swap + 1);
            let mut other = 0usize;
            for &i in &idx {
                other = other * side + i;
            }
            idx.swap(swap, swap + 1);
            let a = values[flat];
            let b = values[other];
            let same = (a.is_infinite() && b.is_infinite()) || (a - b).abs() <= 1e-12;
            if !same {
                return Err(Error::InvalidPotential(format!(
                    "table not symmetric at flat index {flat}"
                )));
            }
        }
    }
    Ok(())
}

impl Kernel for InteractionPotential {
    fn order(&self) -> usize {
        self.order
    }

    fn eval(&self, space: &StateSpace, args: &[PointRef<'_>]) -> f64 {
        debug_assert_eq!(args.len(), self.order);
        match &self.family {
            InteractionFamily::PowerLaw { b, beta } => {
                let r = space.distance(args[0], args[1]);
                if r == 0.0 {
                    f64::INFINITY
                } else {
                    b * r.powf(-beta)
                }
            }
            InteractionFamily::Logarithmic { b } => {
                let r = space.distance(args[0], args[1]);
                if r == 0.0 {
                    f64::INFINITY
                } else {
                    -b * r.ln()
                }
            }
            InteractionFamily::QuadraticProduct { theta } => match (args[0], args[1]) {
                (PointRef::Euclidean(x), PointRef::Euclidean(y)) => theta * x[0] * y[0],
                _ => f64::NAN,
            },
            InteractionFamily::SpinProduct { beta } => match (space, args[0], args[1]) {
                (StateSpace::Finite(f), PointRef::Finite(i), PointRef::Finite(j)) => {
                    -(beta / 2.0) * f.spin_value(i) * f.spin_value(j)
                }
                _ => f64::NAN,
            },
            InteractionFamily::Table { side, values } => {
                let mut flat = 0usize;
                for a in args {
                    match a {
                        PointRef::Finite(i) => flat = flat * side + i,
                        PointRef::Euclidean(_) => return f64::NAN,
                    }
                }
                values[flat]
            }
        }
    }
}

/// W^{(k),L} = (−L) ∨ (W ∧ L): the pointwise clamp of a base kernel.
#[derive(Debug, Clone)]
pub struct TruncatedPotential<K> {
    base: K,
    level: f64,
}

impl<K: Kernel> TruncatedPotential<K> {
    pub fn level(&self) -> f64 {
        self.level
    }

    pub fn base(&self) -> &K {
        &self.base
    }
}

/// Clamp `base` to [−L, L]; +∞ values become L.
pub fn truncate<K: Kernel>(base: K, level: f64) -> TruncatedPotential<K> {
    assert!(level > 0.0, "truncation level must be positive");
    TruncatedPotential { base, level }
}

impl<K: Kernel> Kernel for TruncatedPotential<K> {
    fn order(&self) -> usize {
        self.base.order()
    }

    fn eval(&self, space: &StateSpace, args: &[PointRef<'_>]) -> f64 {
        self.base.eval(space, args).clamp(-self.level, self.level)
    }
}

/// Result of a Monte Carlo exponential-moment estimate.
#[derive(Debug, Clone)]
pub struct ExpIntegrability {
    /// Estimate of E[exp(λ f(X₁,…,X_k))].
    pub estimate: f64,
    /// Jackknife standard error of the estimate.
    pub stderr: f64,
    /// Heavy-tail warning: the top 0.1% of summands carry more than half the mass.
    pub unstable: bool,
    pub samples: usize,
}

const EXP_CHECK_BLOCKS: usize = 100;

/// Monte Carlo estimate of E[exp(λ f(X₁,…,X_k))] with X_i i.i.d. α.
pub fn check_exp_integrability(
    f: &impl Kernel,
    reference: &ReferenceMeasure,
    lambda: f64,
    sample_budget: usize,
    seed: u64,
) -> ExpIntegrability {
    let space = reference.space().clone();
    let k = f.order();
    let mut summands = Vec::with_capacity(sample_budget);
    // fixed block order: per-block derived seeds, merged deterministically
    let block_len = sample_budget.div_ceil(EXP_CHECK_BLOCKS);
    let mut drawn = 0usize;
    for block in 0..EXP_CHECK_BLOCKS {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, block as u64));
        for _ in 0..block_len.min(sample_budget - drawn) {
            let pts: Vec<_> = (0..k).map(|_| reference.sample_point(&mut rng)).collect();
            let refs: Vec<PointRef<'_>> = pts.iter().map(|p| p.as_ref()).collect();
            let v = f.eval(&space, &refs);
            summands.push((lambda * v).exp());
            drawn += 1;
        }
    }
    summarize_summands(&summands)
}

fn summarize_summands(summands: &[f64]) -> ExpIntegrability {
    let n = summands.len();
    let total: f64 = summands.iter().sum();
    let estimate = total / n as f64;

    let blocks = EXP_CHECK_BLOCKS.min(n);
    let block_len = n.div_ceil(blocks);
    let block_means: Vec<f64> = summands
        .chunks(block_len)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    let (_, stderr) = crate::numeric::mean_and_stderr(&block_means);

    let mut sorted: Vec<f64> = summands.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let top = (n / 1000).max(1);
    let top_mass: f64 = sorted[..top].iter().sum();
    let unstable = !total.is_finite() || (total > 0.0 && top_mass > 0.5 * total);

    ExpIntegrability {
        estimate,
        stderr,
        unstable,
        samples: n,
    }
}

/// Certified truncation level for the exponential approximation step.
#[derive(Debug, Clone)]
pub struct TruncationLevel {
    pub level: f64,
    /// Monte Carlo estimate of log E[exp(m |W − W^L|)].
    pub log_estimate: f64,
    /// Jackknife standard error of the log estimate.
    pub stderr: f64,
    pub samples: usize,
}

const MAX_LEVEL_EXP: u32 = 60;

/// Finds the smallest L on the doubling grid {1, 2, 4, …, 2^60} whose Monte
/// Carlo certificate satisfies estimate + 2·stderr ≤ 1/m for
/// log E[exp(m |W − W^L|(X₁,…,X_k))], X_i i.i.d. α.
///
/// Sample streams are derived from (seed, L) only, so runs with different m
/// but the same seed share samples and L(m) is non-decreasing in m.
pub fn select_truncation_level(
    w: &impl Kernel,
    m: u32,
    reference: &ReferenceMeasure,
    sample_budget: usize,
    seed: u64,
) -> Result<TruncationLevel> {
    assert!(m >= 1, "m must be a positive integer");
    assert!(sample_budget >= 10_000, "sample budget below 10^4");
    let space = reference.space().clone();
    let k = w.order();
    let target = 1.0 / m as f64;

    for exp in 0..=MAX_LEVEL_EXP {
        let level = (1u128 << exp) as f64;
        // Δ = |W − W^L| = (|W| − L)^+ ; sampled once per (seed, L)
        let block_len = sample_budget.div_ceil(EXP_CHECK_BLOCKS);
        let mut block_means = Vec::with_capacity(EXP_CHECK_BLOCKS);
        let mut log_terms = Vec::with_capacity(sample_budget);
        let mut drawn = 0usize;
        for block in 0..EXP_CHECK_BLOCKS {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, (exp as u64) << 32 | block as u64));
            let mut block_sum = 0.0;
            let mut count = 0usize;
            for _ in 0..block_len.min(sample_budget - drawn) {
                let pts: Vec<_> = (0..k).map(|_| reference.sample_point(&mut rng)).collect();
                let refs: Vec<PointRef<'_>> = pts.iter().map(|p| p.as_ref()).collect();
                let v = w.eval(&space, &refs);
                let delta = (v.abs() - level).max(0.0);
                block_sum += (m as f64 * delta).exp();
                log_terms.push(m as f64 * delta);
                drawn += 1;
                count += 1;
            }
            if count > 0 {
                block_means.push(block_sum / count as f64);
            }
        }
        let log_estimate =
            log_sum_exp(&log_terms) - (log_terms.len() as f64).ln();
        let stderr = jackknife_log_mean_stderr(&block_means);
        if log_estimate.is_finite() && log_estimate + 2.0 * stderr <= target {
            return Ok(TruncationLevel {
                level,
                log_estimate,
                stderr,
                samples: sample_budget,
            });
        }
    }
    Err(Error::BudgetExhausted {
        m,
        budget: sample_budget,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::build_reference;
    use crate::space::{Configuration, EuclideanSpace};

    fn plane() -> StateSpace {
        StateSpace::Euclidean(EuclideanSpace::new(2, [-10.0, 10.0], 10).unwrap())
    }

    #[test]
    fn power_law_coulomb_value() {
        let w = InteractionPotential::pair(InteractionFamily::PowerLaw { b: 1.0, beta: 1.0 })
            .unwrap();
        let space = plane();
        let c = Configuration::euclidean(2, vec![0.0, 0.0, 3.0, 4.0]);
        let v = w.eval(&space, &[c.point(0), c.point(1)]);
        assert!((v - 0.2).abs() < 1e-15);
        // diagonal convention
        let d = Configuration::euclidean(2, vec![1.0, 1.0, 1.0, 1.0]);
        assert_eq!(w.eval(&space, &[d.point(0), d.point(1)]), f64::INFINITY);
    }

    #[test]
    fn log_potential_values() {
        let w = InteractionPotential::pair(InteractionFamily::Logarithmic { b: 1.0 }).unwrap();
        let space = StateSpace::line();
        let c = Configuration::euclidean(1, vec![0.0, 1.0]);
        assert_eq!(w.eval(&space, &[c.point(0), c.point(1)]), 0.0);
        let d = Configuration::euclidean(1, vec![0.5, 0.5]);
        assert_eq!(w.eval(&space, &[d.point(0), d.point(1)]), f64::INFINITY);
    }

    #[test]
    fn spin_product_value() {
        let w = InteractionPotential::pair(InteractionFamily::SpinProduct { beta: 1.0 }).unwrap();
        let space = StateSpace::spin();
        let c = Configuration::finite(vec![1, 1]);
        assert!((w.eval(&space, &[c.point(0), c.point(1)]) + 0.5).abs() < 1e-15);
        let c = Configuration::finite(vec![0, 1]);
        assert!((w.eval(&space, &[c.point(0), c.point(1)]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn table_symmetry_enforced() {
        // 2x2 table with W(0,1) != W(1,0)
        let bad = InteractionPotential::new(
            2,
            InteractionFamily::Table {
                side: 2,
                values: vec![0.0, 1.0, 2.0, 0.0],
            },
        );
        assert!(bad.is_err());
        let good = InteractionPotential::new(
            2,
            InteractionFamily::Table {
                side: 2,
                values: vec![0.0, 1.0, 1.0, 0.0],
            },
        );
        assert!(good.is_ok());
    }

    #[test]
    fn truncation_clamps() {
        let space = StateSpace::line();
        let c5 = FnKernel::new(2, |_: &StateSpace, _: &[PointRef<'_>]| 5.0);
        let t = truncate(&c5, 2.0);
        let cfg = Configuration::euclidean(1, vec![0.0, 1.0]);
        assert_eq!(t.eval(&space, &[cfg.point(0), cfg.point(1)]), 2.0);

        // W(x,y) = −log|x−y| at |x−y| = e² gives −2, clamped at L=1 to −1
        let w = InteractionPotential::pair(InteractionFamily::Logarithmic { b: 1.0 }).unwrap();
        let t = truncate(&w, 1.0);
        let e2 = std::f64::consts::E * std::f64::consts::E;
        let cfg = Configuration::euclidean(1, vec![0.0, e2]);
        assert!((t.eval(&space, &[cfg.point(0), cfg.point(1)]) + 1.0).abs() < 1e-12);

        // +inf at the diagonal clamps to L
        let cfg = Configuration::euclidean(1, vec![0.3, 0.3]);
        assert_eq!(t.eval(&space, &[cfg.point(0), cfg.point(1)]), 1.0);
    }

    #[test]
    fn truncation_idempotent() {
        let w = InteractionPotential::pair(InteractionFamily::Logarithmic { b: 1.0 }).unwrap();
        let once = truncate(&w, 2.0);
        let twice = truncate(truncate(&w, 2.0), 2.0);
        let space = StateSpace::line();
        for (a, b) in [(0.1, 0.9), (0.0, 20.0), (0.5, 0.5), (0.0, 1e-6)] {
            let cfg = Configuration::euclidean(1, vec![a, b]);
            let args = [cfg.point(0), cfg.point(1)];
            assert_eq!(once.eval(&space, &args), twice.eval(&space, &args));
        }
    }

    #[test]
    fn exp_integrability_trivial_cases() {
        let space = StateSpace::line();
        let e = space.as_euclidean().unwrap().clone();
        let m = vec![e.cell_width(); e.cells()];
        let v = vec![0.0; e.cells()];
        let reference = build_reference(&space, &m, &v).unwrap();

        let zero = FnKernel::new(2, |_: &StateSpace, _: &[PointRef<'_>]| 0.0);
        let out = check_exp_integrability(&zero, &reference, 3.0, 10_000, 1);
        assert_eq!(out.estimate, 1.0);
        assert_eq!(out.stderr, 0.0);
        assert!(!out.unstable);
    }

    #[test]
    fn exp_integrability_negative_part_of_power_law() {
        // W >= 0 so W^- = 0 and the estimate is exactly 1
        let space = StateSpace::line();
        let e = space.as_euclidean().unwrap().clone();
        let reference = build_reference(
            &space,
            &vec![e.cell_width(); e.cells()],
            &vec![0.0; e.cells()],
        )
        .unwrap();
        let w = InteractionPotential::pair(InteractionFamily::PowerLaw { b: 1.0, beta: 0.5 })
            .unwrap();
        let neg = FnKernel::new(2, move |s: &StateSpace, a: &[PointRef<'_>]| {
            (-w.eval(s, a)).max(0.0)
        });
        let out = check_exp_integrability(&neg, &reference, 2.0, 10_000, 3);
        assert_eq!(out.estimate, 1.0);
    }

    #[test]
    fn exp_integrability_log_positive_part_on_unit_box() {
        // (−log|x−y|)^- = max(log|x−y|, 0) = 0 on [0,1]; estimate exactly 1
        let e = EuclideanSpace::new(1, [0.0, 1.0], 500).unwrap();
        let space = StateSpace::Euclidean(e.clone());
        let reference = build_reference(
            &space,
            &vec![e.cell_width(); e.cells()],
            &vec![0.0; e.cells()],
        )
        .unwrap();
        let f = FnKernel::new(2, |s: &StateSpace, a: &[PointRef<'_>]| {
            let r = s.distance(a[0], a[1]);
            r.ln().max(0.0)
        });
        let out = check_exp_integrability(&f, &reference, 1.0, 10_000, 11);
        assert_eq!(out.estimate, 1.0);
    }

    #[test]
    fn truncation_level_bounded_kernel() {
        let space = StateSpace::spin();
        let reference = ReferenceMeasure::uniform(&space).unwrap();
        let c3 = FnKernel::new(2, |_: &StateSpace, _: &[PointRef<'_>]| 3.0);
        let out = select_truncation_level(&c3, 5, &reference, 10_000, 9).unwrap();
        assert_eq!(out.level, 4.0);
        assert_eq!(out.log_estimate, 0.0);
        assert_eq!(out.stderr, 0.0);
    }

    #[test]
    fn truncation_level_rejects_degenerate_kernel() {
        let space = StateSpace::spin();
        let reference = ReferenceMeasure::uniform(&space).unwrap();
        let inf = FnKernel::new(2, |_: &StateSpace, _: &[PointRef<'_>]| f64::INFINITY);
        assert!(matches!(
            select_truncation_level(&inf, 2, &reference, 10_000, 13),
            Err(Error::BudgetExhausted { .. })
        ));
    }

    #[test]
    fn potential_json_schemas() {
        let w = InteractionPotential::from_json(
            r#"{"order":2,"family":"power_law","b":1.0,"beta":1.0}"#,
        )
        .unwrap();
        assert_eq!(w.family_name(), "power_law");
        let w = InteractionPotential::from_json(r#"{"family":"log","b":1.0}"#).unwrap();
        assert_eq!(w.order(), 2);
        let w = InteractionPotential::from_json(r#"{"family":"spin_product","beta":1.5}"#).unwrap();
        assert_eq!(w.spin_coupling(), Some(1.5));
        let w = InteractionPotential::from_json(
            r#"{"family":"table","side":2,"values":[0.0,1.0,1.0,0.0]}"#,
        )
        .unwrap();
        assert_eq!(w.family_name(), "table");
    }
}
