//! Exact enumeration verification of the decoupling inequality, the iterated
//! log-MGF inequality and the key MGF bound on random small instances.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mfldp_core::numeric::{derive_seed, LogSumExp};
use mfldp_core::ustats::for_each_ordered_tuple;
use mfldp_core::{
    decoupling_constant, iterated_log_mgf_sides, log_mgf_exact, log_mgf_key_bound,
    DiscreteMeasure, InteractionFamily, InteractionPotential, Result, StateSpace,
    TupleKernelTable,
};

/// Outcome of one inequality suite.
#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub name: String,
    pub instances: usize,
    pub violations: usize,
    /// Smallest rhs − lhs observed (all should be ≥ 0).
    pub min_slack: f64,
    pub mean_slack: f64,
    /// Serialized failing instances, for audit.
    pub failures: Vec<String>,
    /// Per-instance slack rhs − lhs, in draw order (for --trace dumps).
    pub slacks: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct InequalityReport {
    pub suites: Vec<SuiteResult>,
}

impl InequalityReport {
    pub fn all_green(&self) -> bool {
        self.suites.iter().all(|s| s.violations == 0)
    }
}

/// Size caps for the random instances (all enumerated exactly).
#[derive(Debug, Clone)]
pub struct InstanceCaps {
    pub max_states: usize,
    pub max_n: usize,
}

impl Default for InstanceCaps {
    fn default() -> Self {
        Self {
            max_states: 3,
            max_n: 5,
        }
    }
}

struct Instance {
    space: StateSpace,
    alpha: Vec<f64>,
    table: Vec<f64>,
    n: usize,
    side: usize,
}

/// Random rational-valued symmetric pair table with a random rational law.
fn random_instance(rng: &mut ChaCha8Rng, caps: &InstanceCaps) -> Instance {
    let side = rng.random_range(2..=caps.max_states.max(2));
    let n = rng.random_range(2..=caps.max_n.max(2));
    let mut table = vec![0.0; side * side];
    for i in 0..side {
        for j in 0..=i {
            let v = rng.random_range(-8..=8i32) as f64 / 4.0;
            table[i * side + j] = v;
            table[j * side + i] = v;
        }
    }
    let mut alpha: Vec<f64> = (0..side)
        .map(|_| rng.random_range(1..=8u32) as f64)
        .collect();
    let total: f64 = alpha.iter().sum();
    alpha.iter_mut().for_each(|a| *a /= total);
    let labels = (0..side).map(|i| format!("s{i}")).collect();
    let mut rho = vec![vec![0.0; side]; side];
    for (i, row) in rho.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = if i == j { 0.0 } else { 1.0 };
        }
    }
    Instance {
        space: StateSpace::finite(labels, rho).expect("discrete metric is valid"),
        alpha,
        table,
        n,
        side,
    }
}

/// E Ψ(|Σ_{I_n^2} Φ(X_{i1}, X_{i2})|) vs E Ψ(C_2 |Σ Φ(X¹_{i1}, X²_{i2})|),
/// both enumerated exactly. For Ψ = exp(λ·) the comparison happens in the
/// log domain; for Ψ = x² in the plain domain.
fn decoupling_sides(inst: &Instance, psi: Psi) -> (f64, f64) {
    let k = 2usize;
    let c_k = decoupling_constant(k).unwrap() as f64;
    let n = inst.n;
    let side = inst.side;
    let phi = |a: usize, b: usize| inst.table[a * side + b];

    // |Σ Φ| over tuples given one configuration (coupled) or two (decoupled)
    let tuple_sum = |x1: &[usize], x2: &[usize]| {
        let mut total = 0.0;
        for_each_ordered_tuple(n, k, |t| {
            total += phi(x1[t[0]], x2[t[1]]);
        });
        total
    };

    let log_alpha: Vec<f64> = inst.alpha.iter().map(|a| a.ln()).collect();
    let enumerate = |slots: usize, mut value: Box<dyn FnMut(&[usize]) -> f64>| -> f64 {
        // returns E Ψ(value) with Ψ folded by the caller through `psi`
        let mut plain = 0.0;
        let mut lse = LogSumExp::new();
        let mut cfg = vec![0usize; slots];
        loop {
            let mut log_p = 0.0;
            for &s in &cfg {
                log_p += log_alpha[s % side];
            }
            let v = value(&cfg);
            match psi {
                Psi::Exp(lambda) => lse.add(log_p + lambda * v),
                Psi::Square => plain += log_p.exp() * v * v,
            }
            let mut slot = 0;
            loop {
                if slot == slots {
                    return match psi {
                        Psi::Exp(_) => lse.value(),
                        Psi::Square => plain,
                    };
                }
                cfg[slot] += 1;
                if cfg[slot] < side {
                    break;
                }
                cfg[slot] = 0;
                slot += 1;
            }
        }
    };

    let lhs = enumerate(
        n,
        Box::new(move |cfg: &[usize]| tuple_sum(cfg, cfg).abs()),
    );
    let tuple_sum2 = |x1: &[usize], x2: &[usize]| {
        let mut total = 0.0;
        for_each_ordered_tuple(n, k, |t| {
            total += phi(x1[t[0]], x2[t[1]]);
        });
        total
    };
    let rhs = enumerate(
        2 * n,
        Box::new(move |cfg: &[usize]| {
            let (x1, x2) = cfg.split_at(n);
            c_k * tuple_sum2(x1, x2).abs()
        }),
    );
    (lhs, rhs)
}

#[derive(Clone, Copy)]
enum Psi {
    Exp(f64),
    Square,
}

/// Runs the three exact inequality suites on `instances` random instances each.
pub fn verify_inequalities(
    instances: usize,
    caps: &InstanceCaps,
    seed: u64,
) -> Result<InequalityReport> {
    let mut suites = Vec::new();

    // replica decoupling: Ψ = exp(0.5·), exp(1·), square
    for (name, psi) in [
        ("decoupling_exp_half", Psi::Exp(0.5)),
        ("decoupling_exp_one", Psi::Exp(1.0)),
        ("decoupling_square", Psi::Square),
    ] {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, name.len() as u64));
        let mut suite = SuiteResult {
            name: name.into(),
            instances,
            violations: 0,
            min_slack: f64::INFINITY,
            mean_slack: 0.0,
            failures: Vec::new(),
            slacks: Vec::new(),
        };
        for _ in 0..instances {
            let inst = random_instance(&mut rng, caps);
            let (lhs, rhs) = decoupling_sides(&inst, psi);
            record(&mut suite, lhs, rhs, &inst);
        }
        suite.mean_slack /= instances as f64;
        suites.push(suite);
    }

    // iterated log-MGF inequality on per-tuple tables
    {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1000));
        let mut suite = SuiteResult {
            name: "iterated_log_mgf".into(),
            instances,
            violations: 0,
            min_slack: f64::INFINITY,
            mean_slack: 0.0,
            failures: Vec::new(),
            slacks: Vec::new(),
        };
        for _ in 0..instances {
            let side = rng.random_range(2..=caps.max_states.min(3).max(2));
            let n = rng.random_range(2..=3usize);
            let k = 2usize;
            let tuples = n * (n - 1);
            let tables: Vec<Vec<f64>> = (0..tuples)
                .map(|_| {
                    (0..side * side)
                        .map(|_| rng.random_range(-8..=8i32) as f64 / 4.0)
                        .collect()
                })
                .collect();
            let phi = TupleKernelTable::new(n, k, side, tables.clone())?;
            let laws: Vec<Vec<f64>> = (0..k)
                .map(|_| {
                    let mut law: Vec<f64> =
                        (0..side).map(|_| rng.random_range(1..=8u32) as f64).collect();
                    let total: f64 = law.iter().sum();
                    law.iter_mut().for_each(|p| *p /= total);
                    law
                })
                .collect();
            let (lhs, rhs) = iterated_log_mgf_sides(&phi, &laws)?;
            let fake = Instance {
                space: StateSpace::spin(),
                alpha: laws[0].clone(),
                table: tables.concat(),
                n,
                side,
            };
            record(&mut suite, lhs, rhs, &fake);
        }
        suite.mean_slack /= instances as f64;
        suites.push(suite);
    }

    // key MGF bound: Λ_n(λ; W) ≤ (1/k) log E exp(k C_k λ |W|)
    {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 2000));
        let mut suite = SuiteResult {
            name: "key_mgf_bound".into(),
            instances,
            violations: 0,
            min_slack: f64::INFINITY,
            mean_slack: 0.0,
            failures: Vec::new(),
            slacks: Vec::new(),
        };
        for _ in 0..instances {
            let inst = random_instance(&mut rng, caps);
            let w = InteractionPotential::new(
                2,
                InteractionFamily::Table {
                    side: inst.side,
                    values: inst.table.clone(),
                },
            )?;
            let alpha = DiscreteMeasure::from_dense(inst.space.clone(), inst.alpha.clone())?;
            let lambda = *[0.1, 0.5, 1.0, 2.0]
                .get(rng.random_range(0..4usize))
                .unwrap();
            let bound = log_mgf_key_bound(&w, &alpha, lambda)?;
            let mut worst_lhs = f64::NEG_INFINITY;
            for n in 2..=inst.n.max(2) {
                worst_lhs = worst_lhs.max(log_mgf_exact(&w, &alpha, n, lambda)?);
            }
            record(&mut suite, worst_lhs, bound, &inst);
        }
        suite.mean_slack /= instances as f64;
        suites.push(suite);
    }

    Ok(InequalityReport { suites })
}

fn record(suite: &mut SuiteResult, lhs: f64, rhs: f64, inst: &Instance) {
    let slack = rhs - lhs;
    suite.slacks.push(slack);
    suite.min_slack = suite.min_slack.min(slack);
    if slack.is_finite() {
        suite.mean_slack += slack;
    }
    if slack < -1e-9 {
        suite.violations += 1;
        suite.failures.push(format!(
            "n={} side={} alpha={:?} table={:?} lhs={lhs} rhs={rhs}",
            inst.n, inst.side, inst.alpha, inst.table
        ));
    }
}
