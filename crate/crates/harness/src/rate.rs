//! Monte Carlo rate-slope estimation: naive frequencies of L_n events under
//! P_n with Wilson intervals, against the certified free-energy target.

use rayon::prelude::*;

use mfldp_core::numeric::derive_seed;
use mfldp_core::{
    empirical_measure, minimize, run_chain, Configuration, GibbsModel, McmcConfig, Result,
    SearchSpec,
};

use crate::events::SimplexEvent;
use crate::sanov::{RateReport, RateRow};

const WILSON_Z: f64 = 1.96;

/// Sampling effort per (n, replica) for rate estimation.
#[derive(Debug, Clone)]
pub struct RateSampling {
    pub replicas: usize,
    pub burn_in: u64,
    /// Chain steps between retained L_n draws.
    pub decorrelation: u64,
}

impl Default for RateSampling {
    fn default() -> Self {
        Self {
            replicas: 2000,
            burn_in: 5000,
            decorrelation: 50,
        }
    }
}

/// Estimates (1/n) log P_n(L_n ∈ event) per n by chain frequencies. Events
/// never hit are reported as −∞-censored rows rather than errors.
pub fn estimate_rate(
    model: &GibbsModel,
    event: &SimplexEvent,
    n_list: &[usize],
    sampling: &RateSampling,
    seed: u64,
) -> Result<RateReport> {
    // certified target when the free-energy oracle applies
    let target = rate_target(model, event);

    let mut rows = Vec::with_capacity(n_list.len());
    for (idx, &n) in n_list.iter().enumerate() {
        let chains: usize = 4;
        let per_chain = sampling.replicas.div_ceil(chains);
        let cfg = McmcConfig {
            steps: per_chain as u64 * sampling.decorrelation,
            burn_in: sampling.burn_in,
            thinning: sampling.decorrelation,
            ..Default::default()
        };
        let hits_draws: Vec<(usize, usize)> = (0..chains)
            .into_par_iter()
            .map(|chain| {
                let mut hits = 0usize;
                let mut draws = 0usize;
                let chain_seed = derive_seed(seed, ((idx as u64) << 32) | chain as u64);
                let space = model.space().clone();
                let event = event.clone();
                run_chain(model, n, &cfg, chain_seed, |config: &Configuration, _| {
                    draws += 1;
                    if let Ok(ln) = empirical_measure(&space, config) {
                        if event.contains_measure(&ln) {
                            hits += 1;
                        }
                    }
                })
                .map(|_| (hits, draws))
            })
            .collect::<Result<Vec<_>>>()?;
        let hits: usize = hits_draws.iter().map(|(h, _)| h).sum();
        let draws: usize = hits_draws.iter().map(|(_, d)| d).sum();

        let (value, lo, hi) = wilson_log_rate(hits, draws, n);
        let s = model
            .space()
            .as_finite()
            .map(|f| f.len() as f64)
            .unwrap_or(0.0);
        rows.push(RateRow {
            n,
            value,
            target,
            gap: target.map(|t| value - t),
            envelope: s * ((n + 1) as f64).ln() / n as f64,
            lo,
            hi,
        });
    }
    Ok(RateReport {
        rows,
        event: event.describe(),
        target,
        method: "mc-frequency".into(),
    })
}

/// −inf over the event of I_W, by simplex grid scan (finite spaces, |S| ≤ 4).
pub fn rate_target(model: &GibbsModel, event: &SimplexEvent) -> Option<f64> {
    let f = model.space().as_finite()?;
    if f.len() > 4 {
        return None;
    }
    let mesh = if f.len() == 2 { 5e-4 } else { 5e-3 };
    let global = minimize(model, &SearchSpec::GridScan { mesh }).ok()?;
    // inf of H_W over the event on the same grid
    let resolution = (1.0 / mesh).round() as usize;
    let mut inf_event = f64::INFINITY;
    let space = model.space().clone();
    mfldp_core::numeric::for_each_composition(resolution, f.len(), |counts| {
        let weights: Vec<f64> = counts
            .iter()
            .map(|&c| c as f64 / resolution as f64)
            .collect();
        if !event.contains(&space, &weights) {
            return;
        }
        if let Ok(nu) = mfldp_core::DiscreteMeasure::from_dense(space.clone(), weights) {
            if let Ok(b) = mfldp_core::free_energy(model, &nu) {
                inf_event = inf_event.min(b.total);
            }
        }
    });
    if inf_event.is_finite() {
        Some(-(inf_event - global.inf_value))
    } else {
        None
    }
}

/// ((1/n) log p̂, Wilson interval endpoints scaled the same way); −∞ when
/// the event was never hit.
fn wilson_log_rate(hits: usize, draws: usize, n: usize) -> (f64, f64, f64) {
    let nf = n as f64;
    if draws == 0 {
        return (f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    }
    let r = draws as f64;
    let p_hat = hits as f64 / r;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / r;
    let center = (p_hat + z2 / (2.0 * r)) / denom;
    let half = WILSON_Z * (p_hat * (1.0 - p_hat) / r + z2 / (4.0 * r * r)).sqrt() / denom;
    let lo = (center - half).max(0.0);
    let hi = (center + half).min(1.0);
    let log_scaled = |p: f64| {
        if p > 0.0 {
            p.ln() / nf
        } else {
            f64::NEG_INFINITY
        }
    };
    (log_scaled(p_hat), log_scaled(lo), log_scaled(hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use mfldp_core::GibbsModel;

    #[test]
    fn trivial_event_rate_is_zero() {
        let model = GibbsModel::free_spin();
        let sampling = RateSampling {
            replicas: 200,
            burn_in: 200,
            decorrelation: 5,
        };
        let report =
            estimate_rate(&model, &SimplexEvent::All, &[10, 20], &sampling, 99).unwrap();
        for row in &report.rows {
            assert_eq!(row.value, 0.0);
        }
        assert!((report.target.unwrap()).abs() < 1e-6);
    }

    #[test]
    fn wilson_interval_sane() {
        let (v, lo, hi) = wilson_log_rate(50, 100, 10);
        assert!(lo <= v && v <= hi);
        let (v, _, hi) = wilson_log_rate(0, 100, 10);
        assert_eq!(v, f64::NEG_INFINITY);
        assert!(hi.is_finite());
    }

    #[test]
    fn subcritical_band_event_target() {
        // spin β = 0.5, event {|m| ≥ 0.5}: target = −min_{|m| ≥ 0.5} I_W(m)
        let model = GibbsModel::spin(0.5);
        let event = SimplexEvent::AbsMagnetizationAtLeast { threshold: 0.5 };
        let target = rate_target(&model, &event).unwrap();
        let expect = -mfldp_core::spin_free_energy(0.5, 0.5);
        assert!(
            (target - expect).abs() < 1e-4,
            "target {target} vs closed form {expect}"
        );
    }
}
