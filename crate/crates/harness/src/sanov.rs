//! Exact Sanov-type rate checks over finite alphabets by the method of types.

use mfldp_core::numeric::{
    composition_count, for_each_composition, ln_factorial_table, LogSumExp,
};
use mfldp_core::{DiscreteMeasure, Error, Result};

use crate::events::SimplexEvent;

const TYPE_CLASS_CAP: u128 = 20_000_000;

/// One row of a rate report: an exact or estimated (1/n)·log probability
/// against the asymptotic target.
#[derive(Debug, Clone)]
pub struct RateRow {
    pub n: usize,
    /// (1/n) log P(L_n ∈ event); −∞ when censored/never hit.
    pub value: f64,
    pub target: Option<f64>,
    /// value − target.
    pub gap: Option<f64>,
    /// Method-of-types envelope |S|·log(n+1)/n.
    pub envelope: f64,
    /// Wilson-interval bounds for Monte Carlo rows (equal to value when exact).
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone)]
pub struct RateReport {
    pub rows: Vec<RateRow>,
    pub event: String,
    /// −inf over the event of the rate functional, when certifiable.
    pub target: Option<f64>,
    pub method: String,
}

/// Exact (1/n) log P(L_n ∈ event) under α^{⊗n} via multinomial type classes,
/// compared to −inf_{ν ∈ event} H(ν|α) (types refined by a simplex grid).
pub fn sanov_exact_check(
    alpha: &DiscreteMeasure,
    n_list: &[usize],
    event: &SimplexEvent,
) -> Result<RateReport> {
    let space = alpha.space().clone();
    let f = space
        .as_finite()
        .ok_or_else(|| Error::TooLargeToEnumerate("sanov check needs a finite space".into()))?;
    let s = f.len();
    if s > 5 {
        return Err(Error::TooLargeToEnumerate(format!(
            "method of types capped at |S| = 5, got {s}"
        )));
    }
    let alpha_dense = alpha.dense_weights()?;
    let log_alpha: Vec<f64> = alpha_dense
        .iter()
        .map(|&w| if w > 0.0 { w.ln() } else { f64::NEG_INFINITY })
        .collect();

    // target: inf of H(ν|α) over the event, over type classes refined by a grid
    let mut inf_h = f64::INFINITY;
    let grid_resolution = match s {
        2 => 4000,
        3 => 300,
        _ => 80,
    };
    for_each_composition(grid_resolution, s, |counts| {
        let weights: Vec<f64> = counts
            .iter()
            .map(|&c| c as f64 / grid_resolution as f64)
            .collect();
        if event.contains(&space, &weights) {
            inf_h = inf_h.min(entropy_vs(&weights, &alpha_dense));
        }
    });

    let mut rows = Vec::with_capacity(n_list.len());
    for &n in n_list {
        if composition_count(n, s) > TYPE_CLASS_CAP {
            return Err(Error::TooLargeToEnumerate(format!(
                "C({}+{}-1,{}-1) type classes at n = {n}",
                n, s, s
            )));
        }
        let lf = ln_factorial_table(n);
        let mut lse = LogSumExp::new();
        let mut hit = false;
        let mut weights = vec![0.0; s];
        for_each_composition(n, s, |counts| {
            for (w, &c) in weights.iter_mut().zip(counts) {
                *w = c as f64 / n as f64;
            }
            if !event.contains(&space, &weights) {
                return;
            }
            hit = true;
            let mut log_p = lf[n];
            for (&c, &la) in counts.iter().zip(&log_alpha) {
                log_p -= lf[c];
                if c > 0 {
                    log_p += c as f64 * la;
                }
            }
            // inf over types too (finite-n refinement of the target)
            inf_h = inf_h.min(entropy_vs(&weights, &alpha_dense));
            lse.add(log_p);
        });
        if !hit {
            return Err(Error::EventEmpty);
        }
        let value = lse.value() / n as f64;
        rows.push(RateRow {
            n,
            value,
            target: None,
            gap: None,
            envelope: s as f64 * ((n + 1) as f64).ln() / n as f64,
            lo: value,
            hi: value,
        });
    }
    let target = -inf_h;
    for row in &mut rows {
        row.target = Some(target);
        row.gap = Some(row.value - target);
    }
    Ok(RateReport {
        rows,
        event: event.describe(),
        target: Some(target),
        method: "method-of-types".into(),
    })
}

fn entropy_vs(weights: &[f64], alpha: &[f64]) -> f64 {
    let mut h = 0.0;
    for (&w, &a) in weights.iter().zip(alpha) {
        if w > 0.0 {
            if a == 0.0 {
                return f64::INFINITY;
            }
            h += w * (w / a).ln();
        }
    }
    h.max(0.0)
}
