//! Concentration of L_n at the free-energy minimizer in W_p.

use rayon::prelude::*;

use mfldp_core::numeric::derive_seed;
use rand_chacha::rand_core::SeedableRng;

use mfldp_core::{
    empirical_measure, minimize, sample_mcmc, wasserstein_1d, wasserstein_exact, Configuration,
    DiscreteMeasure, GibbsModel, McmcConfig, Result, SearchSpec, StateSpace,
};

#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub n: usize,
    pub mean: f64,
    pub q10: f64,
    pub median: f64,
    pub q90: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// Whether the mean distance decreased monotonically along n_list.
    pub monotone: bool,
    pub p: f64,
    pub minimizer: DiscreteMeasure,
    /// True when the symmetric pair of minimizers was used (spin models).
    pub symmetric_pair: bool,
}

/// Per-n sampling effort.
#[derive(Debug, Clone)]
pub struct ConvergenceSampling {
    pub replicas: usize,
    pub burn_in: u64,
    /// Post-burn-in steps per replica before taking its final configuration,
    /// expressed in sweeps (multiples of n).
    pub sweeps: u64,
}

impl Default for ConvergenceSampling {
    fn default() -> Self {
        Self {
            replicas: 20,
            burn_in: 5000,
            sweeps: 40,
        }
    }
}

fn distance_to(
    model: &GibbsModel,
    ln: &DiscreteMeasure,
    targets: &[DiscreteMeasure],
    p: f64,
) -> Result<f64> {
    let mut best = f64::INFINITY;
    for t in targets {
        let d = match model.space() {
            StateSpace::Euclidean(e) if e.dim() == 1 => wasserstein_1d(ln, t, p)?,
            _ => wasserstein_exact(ln, t, p)?.0,
        };
        best = best.min(d);
    }
    Ok(best)
}

/// Table of W_p(L_n, ν*) statistics per n, sampling L_n from P_n (i.i.d. α
/// when there is no interaction, MCMC otherwise) and measuring the distance
/// to the minimizer (or the closer of the symmetric pair on spin models).
pub fn convergence_report(
    model: &GibbsModel,
    spec: &SearchSpec,
    n_list: &[usize],
    sampling: &ConvergenceSampling,
    p: f64,
    seed: u64,
) -> Result<ConvergenceReport> {
    let minimizer = minimize(model, spec)?;
    let mut targets = vec![minimizer.minimizer.clone()];
    let mut symmetric_pair = false;
    if let Some(f) = model.space().as_finite() {
        if f.len() == 2 && minimizer.minimizer.magnetization().abs() > 1e-6 {
            // spin symmetry: the mirrored measure is a minimizer too
            let dense = minimizer.minimizer.dense_weights()?;
            let mirrored = DiscreteMeasure::from_dense(
                model.space().clone(),
                dense.iter().rev().copied().collect(),
            )?;
            targets.push(mirrored);
            symmetric_pair = true;
        }
    }

    let mut rows = Vec::with_capacity(n_list.len());
    for (idx, &n) in n_list.iter().enumerate() {
        let mut distances: Vec<f64> = (0..sampling.replicas)
            .into_par_iter()
            .map(|replica| {
                let rep_seed = derive_seed(seed, ((idx as u64) << 32) | replica as u64);
                let ln = draw_empirical(model, n, sampling, rep_seed)?;
                distance_to(model, &ln, &targets, p)
            })
            .collect::<Result<Vec<_>>>()?;
        distances.sort_by(|a, b| a.total_cmp(b));
        let mean = distances.iter().sum::<f64>() / distances.len() as f64;
        let q = |f: f64| distances[(f * (distances.len() - 1) as f64).round() as usize];
        rows.push(ConvergenceRow {
            n,
            mean,
            q10: q(0.1),
            median: q(0.5),
            q90: q(0.9),
        });
    }
    let monotone = rows.windows(2).all(|w| w[1].mean <= w[0].mean + 1e-12);
    Ok(ConvergenceReport {
        rows,
        monotone,
        p,
        minimizer: minimizer.minimizer,
        symmetric_pair,
    })
}

fn draw_empirical(
    model: &GibbsModel,
    n: usize,
    sampling: &ConvergenceSampling,
    seed: u64,
) -> Result<DiscreteMeasure> {
    if model.interactions().is_empty() {
        // free case: L_n of n i.i.d. α draws
        let reference = model.reference()?;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let config = match model.space() {
            StateSpace::Finite(_) => Configuration::finite(
                (0..n)
                    .map(|_| match reference.sample_point(&mut rng) {
                        mfldp_core::Point::Finite(s) => s,
                        _ => unreachable!(),
                    })
                    .collect(),
            ),
            StateSpace::Euclidean(e) => {
                let mut coords = Vec::with_capacity(n * e.dim());
                for _ in 0..n {
                    match reference.sample_point(&mut rng) {
                        mfldp_core::Point::Euclidean(x) => coords.extend(x),
                        _ => unreachable!(),
                    }
                }
                Configuration::euclidean(e.dim(), coords)
            }
        };
        return empirical_measure(model.space(), &config);
    }
    let cfg = McmcConfig {
        steps: sampling.sweeps * n as u64,
        burn_in: sampling.burn_in,
        thinning: sampling.sweeps * n as u64,
        ..Default::default()
    };
    let run = sample_mcmc(model, n, &cfg, seed)?;
    let last = run
        .samples
        .last()
        .ok_or(mfldp_core::Error::EmptyConfiguration)?;
    empirical_measure(model.space(), last)
}
