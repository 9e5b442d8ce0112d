//! Probability measures on a state space: discrete measures, empirical
//! measures, reference measures α = e^{−V} m / C, and relative entropy.

use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{log_sum_exp, KahanSum};
use crate::space::{Configuration, Point, PointRef, StateSpace};

pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// A probability measure with finite support. Atoms are kept in a canonical
/// order (finite: by state index; euclidean: lexicographic by coordinates),
/// duplicates are merged and zero-weight atoms dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    space: StateSpace,
    support: Vec<Point>,
    weights: Vec<f64>,
}

fn point_key_cmp(a: &Point, b: &Point) -> std::cmp::Ordering {
    match (a, b) {
        (Point::Finite(i), Point::Finite(j)) => i.cmp(j),
        (Point::Euclidean(x), Point::Euclidean(y)) => x
            .iter()
            .zip(y)
            .map(|(u, v)| u.total_cmp(v))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal),
        _ => std::cmp::Ordering::Equal,
    }
}

impl DiscreteMeasure {
    pub fn new(space: StateSpace, support: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        if support.len() != weights.len() {
            return Err(Error::InvalidMeasure(
                "support and weights differ in length".into(),
            ));
        }
        if support.is_empty() {
            return Err(Error::InvalidMeasure("empty support".into()));
        }
        for (p, &w) in support.iter().zip(&weights) {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::InvalidMeasure(format!("bad weight {w}")));
            }
            match (p, &space) {
                (Point::Finite(i), StateSpace::Finite(f)) => {
                    if *i >= f.len() {
                        return Err(Error::InvalidMeasure(format!("atom index {i} out of range")));
                    }
                }
                (Point::Euclidean(x), StateSpace::Euclidean(e)) => {
                    if x.len() != e.dim() {
                        return Err(Error::DimensionMismatch(e.dim()));
                    }
                    if x.iter().any(|c| !c.is_finite()) {
                        return Err(Error::InvalidMeasure("non-finite atom coordinate".into()));
                    }
                }
                _ => return Err(Error::SpaceMismatch),
            }
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidMeasure(format!(
                "weights sum to {total}, expected 1"
            )));
        }

        let mut order: Vec<usize> = (0..support.len()).collect();
        order.sort_by(|&a, &b| point_key_cmp(&support[a], &support[b]));
        let mut merged_support: Vec<Point> = Vec::with_capacity(support.len());
        let mut merged_weights: Vec<f64> = Vec::with_capacity(support.len());
        for idx in order {
            let p = &support[idx];
            let w = weights[idx];
            if let Some(last) = merged_support.last() {
                if point_key_cmp(last, p).is_eq() {
                    *merged_weights.last_mut().unwrap() += w;
                    continue;
                }
            }
            merged_support.push(p.clone());
            merged_weights.push(w);
        }
        let keep: Vec<bool> = merged_weights.iter().map(|&w| w > 0.0).collect();
        let support: Vec<Point> = merged_support
            .into_iter()
            .zip(&keep)
            .filter_map(|(p, &k)| k.then_some(p))
            .collect();
        let weights: Vec<f64> = merged_weights
            .into_iter()
            .zip(&keep)
            .filter_map(|(w, &k)| k.then_some(w))
            .collect();
        if support.is_empty() {
            return Err(Error::InvalidMeasure("all weights are zero".into()));
        }
        Ok(Self {
            space,
            support,
            weights,
        })
    }

    /// Measure on a finite space from a dense weight vector over all labels.
    pub fn from_dense(space: StateSpace, weights: Vec<f64>) -> Result<Self> {
        let support = (0..weights.len()).map(Point::Finite).collect();
        Self::new(space, support, weights)
    }

    /// Point mass at `p`.
    pub fn dirac(space: StateSpace, p: Point) -> Result<Self> {
        Self::new(space, vec![p], vec![1.0])
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn support(&self) -> &[Point] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn atom(&self, i: usize) -> (PointRef<'_>, f64) {
        (self.support[i].as_ref(), self.weights[i])
    }

    /// Weight of an exact support point, 0 when absent.
    pub fn weight_of(&self, p: &Point) -> f64 {
        match self
            .support
            .binary_search_by(|q| point_key_cmp(q, p))
        {
            Ok(i) => self.weights[i],
            Err(_) => 0.0,
        }
    }

    /// Dense weights over all labels of a finite space.
    pub fn dense_weights(&self) -> Result<Vec<f64>> {
        let f = self
            .space
            .as_finite()
            .ok_or_else(|| Error::InvalidMeasure("dense weights need a finite space".into()))?;
        let mut out = vec![0.0; f.len()];
        for (p, &w) in self.support.iter().zip(&self.weights) {
            if let Point::Finite(i) = p {
                out[*i] = w;
            }
        }
        Ok(out)
    }

    /// Mean of a scalar function of support points.
    pub fn expect(&self, mut f: impl FnMut(PointRef<'_>) -> f64) -> f64 {
        let mut acc = KahanSum::new();
        for (p, &w) in self.support.iter().zip(&self.weights) {
            acc.add(w * f(p.as_ref()));
        }
        acc.value()
    }

    /// Mean spin (2i−1) for measures on a two-point space, mean coordinate for d=1.
    pub fn magnetization(&self) -> f64 {
        match &self.space {
            StateSpace::Finite(f) => self.expect(|p| match p {
                PointRef::Finite(i) => f.spin_value(i),
                _ => f64::NAN,
            }),
            StateSpace::Euclidean(_) => self.expect(|p| match p {
                PointRef::Euclidean(x) => x[0],
                _ => f64::NAN,
            }),
        }
    }

    /// Sample a support point index proportionally to the weights.
    pub fn sample_index<R: Rng>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, &w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return i;
            }
        }
        self.weights.len() - 1
    }

    pub fn to_json(&self) -> String {
        let schema = MeasureSchema {
            support: self
                .support
                .iter()
                .map(|p| match p {
                    Point::Finite(i) => match &self.space {
                        StateSpace::Finite(f) => SupportEntry::Label(f.label(*i).to_string()),
                        _ => unreachable!(),
                    },
                    Point::Euclidean(x) => SupportEntry::Coords(x.clone()),
                })
                .collect(),
            weights: self.weights.clone(),
        };
        serde_json::to_string(&schema).expect("measure serializes")
    }

    pub fn from_json(space: &StateSpace, s: &str) -> Result<Self> {
        let schema: MeasureSchema =
            serde_json::from_str(s).map_err(|e| Error::InvalidMeasure(e.to_string()))?;
        let support = schema
            .support
            .iter()
            .map(|entry| match (entry, space) {
                (SupportEntry::Label(l), StateSpace::Finite(f)) => f
                    .index_of(l)
                    .map(Point::Finite)
                    .ok_or_else(|| Error::InvalidMeasure(format!("unknown label `{l}`"))),
                (SupportEntry::Coords(x), StateSpace::Euclidean(_)) => {
                    Ok(Point::Euclidean(x.clone()))
                }
                _ => Err(Error::SpaceMismatch),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(space.clone(), support, schema.weights)
    }
}

#[derive(Serialize, Deserialize)]
struct MeasureSchema {
    support: Vec<SupportEntry>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SupportEntry {
    Label(String),
    Coords(Vec<f64>),
}

/// The empirical measure L_n of an ordered configuration.
#[derive(Debug, Clone)]
pub struct EmpiricalMeasure {
    configuration: Configuration,
}

impl EmpiricalMeasure {
    pub fn new(configuration: Configuration) -> Result<Self> {
        if configuration.is_empty() {
            return Err(Error::EmptyConfiguration);
        }
        Ok(Self { configuration })
    }

    pub fn n(&self) -> usize {
        self.configuration.len()
    }

    pub fn configuration(&self) -> &Configuration {
        &self.configuration
    }

    pub fn to_discrete(&self, space: &StateSpace) -> Result<DiscreteMeasure> {
        empirical_measure(space, &self.configuration)
    }
}

/// L_n(x^n) = (1/n) Σ δ_{x_i} as a normalized discrete measure.
pub fn empirical_measure(space: &StateSpace, config: &Configuration) -> Result<DiscreteMeasure> {
    if config.is_empty() {
        return Err(Error::EmptyConfiguration);
    }
    config.validate(space)?;
    let n = config.len() as f64;
    let support: Vec<Point> = config.points().map(|p| p.to_owned_point()).collect();
    let weights = vec![1.0 / n; config.len()];
    DiscreteMeasure::new(space.clone(), support, weights)
}

/// Relative entropy H(ν|μ) = Σ ν log(ν/μ), +∞ when ν is not absolutely
/// continuous w.r.t. μ; 0·log 0 := 0.
pub fn relative_entropy(nu: &DiscreteMeasure, mu: &DiscreteMeasure) -> Result<f64> {
    if nu.space() != mu.space() {
        return Err(Error::SpaceMismatch);
    }
    let mut acc = KahanSum::new();
    for (p, &w) in nu.support.iter().zip(&nu.weights) {
        let q = mu.weight_of(p);
        if q == 0.0 {
            return Ok(f64::INFINITY);
        }
        acc.add(w * (w / q).ln());
    }
    // clamp tiny negative round-off: H >= 0 always
    Ok(acc.value().max(0.0))
}

/// Reference measure α = C⁻¹ e^{−V} m on a finite space or a 1-D grid.
/// Keeps the base weights m, the confinement values V, log C and log α.
#[derive(Debug, Clone)]
pub struct ReferenceMeasure {
    alpha: DiscreteMeasure,
    base_weights: Vec<f64>,
    confinement: Vec<f64>,
    log_alpha: Vec<f64>,
    log_norm: f64,
}

/// Builds α from base weights m ≥ 0 and confinement values V ∈ (−∞, +∞],
/// both indexed by label (finite) or grid cell (euclidean, d = 1).
pub fn build_reference(space: &StateSpace, m: &[f64], v: &[f64]) -> Result<ReferenceMeasure> {
    let atoms = match space {
        StateSpace::Finite(f) => f.len(),
        StateSpace::Euclidean(e) => {
            if e.dim() != 1 {
                return Err(Error::DimensionMismatch(1));
            }
            e.cells()
        }
    };
    if m.len() != atoms || v.len() != atoms {
        return Err(Error::InvalidMeasure(format!(
            "m and V must have {atoms} entries"
        )));
    }
    if m.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidMeasure("base weights must be finite >= 0".into()));
    }
    if v.iter().any(|&x| x.is_nan() || x == f64::NEG_INFINITY) {
        return Err(Error::InvalidMeasure("V must take values in (-inf, +inf]".into()));
    }

    // log C = log Σ m_i e^{−V_i}, accumulated in the log domain
    let log_terms: Vec<f64> = m
        .iter()
        .zip(v)
        .map(|(&mi, &vi)| {
            if mi == 0.0 || vi == f64::INFINITY {
                f64::NEG_INFINITY
            } else {
                mi.ln() - vi
            }
        })
        .collect();
    let log_norm = log_sum_exp(&log_terms);
    if !log_norm.is_finite() {
        return Err(Error::NormalizationDiverged(format!(
            "log C = {log_norm}"
        )));
    }

    let log_alpha: Vec<f64> = log_terms.iter().map(|&t| t - log_norm).collect();
    let weights: Vec<f64> = log_alpha.iter().map(|&l| l.exp()).collect();
    let support: Vec<Point> = match space {
        StateSpace::Finite(_) => (0..atoms).map(Point::Finite).collect(),
        StateSpace::Euclidean(e) => (0..atoms)
            .map(|i| Point::Euclidean(vec![e.cell_center(i)]))
            .collect(),
    };
    // renormalize residual round-off so the measure constructor accepts it
    let total: f64 = weights.iter().sum();
    let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let alpha = DiscreteMeasure::new(space.clone(), support, weights)?;
    Ok(ReferenceMeasure {
        alpha,
        base_weights: m.to_vec(),
        confinement: v.to_vec(),
        log_alpha,
        log_norm,
    })
}

impl ReferenceMeasure {
    /// Uniform α on a finite space (m ≡ 1, V ≡ 0).
    pub fn uniform(space: &StateSpace) -> Result<Self> {
        let f = space
            .as_finite()
            .ok_or_else(|| Error::InvalidMeasure("uniform reference needs a finite space".into()))?;
        build_reference(space, &vec![1.0; f.len()], &vec![0.0; f.len()])
    }

    pub fn alpha(&self) -> &DiscreteMeasure {
        &self.alpha
    }

    pub fn space(&self) -> &StateSpace {
        self.alpha.space()
    }

    /// log of the normalization constant C = Σ m_i e^{−V_i}.
    pub fn log_norm(&self) -> f64 {
        self.log_norm
    }

    pub fn base_weights(&self) -> &[f64] {
        &self.base_weights
    }

    pub fn confinement(&self) -> &[f64] {
        &self.confinement
    }

    /// log α at a label / grid cell index (−∞ for zero-mass atoms).
    pub fn log_alpha(&self, idx: usize) -> f64 {
        self.log_alpha[idx]
    }

    pub fn atoms(&self) -> usize {
        self.log_alpha.len()
    }

    /// Draw one point from α. On euclidean grids the point is jittered
    /// uniformly inside its cell, so sampling is genuinely continuous.
    pub fn sample_point<R: Rng>(&self, rng: &mut R) -> Point {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut idx = self.atoms() - 1;
        for (i, &l) in self.log_alpha.iter().enumerate() {
            if l == f64::NEG_INFINITY {
                continue;
            }
            acc += l.exp();
            if u < acc {
                idx = i;
                break;
            }
        }
        match self.space() {
            StateSpace::Finite(_) => Point::Finite(idx),
            StateSpace::Euclidean(e) => {
                let w = e.cell_width();
                let x = e.cell_center(idx) + (rng.random::<f64>() - 0.5) * w;
                Point::Euclidean(vec![x])
            }
        }
    }
}
