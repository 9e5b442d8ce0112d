//! State spaces: finite metric spaces and 1-D-gridded euclidean boxes, plus
//! points and particle configurations on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TRIANGLE_TOL: f64 = 1e-12;

/// A finite metric space given by labels and a symmetric distance table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteSpace {
    labels: Vec<String>,
    rho: Vec<Vec<f64>>,
}

impl FiniteSpace {
    pub fn new(labels: Vec<String>, rho: Vec<Vec<f64>>) -> Result<Self> {
        let s = labels.len();
        if s == 0 {
            return Err(Error::InvalidSpace("no labels".into()));
        }
        if rho.len() != s || rho.iter().any(|row| row.len() != s) {
            return Err(Error::InvalidSpace(format!(
                "distance table must be {s}x{s}"
            )));
        }
        for i in 0..s {
            if rho[i][i] != 0.0 {
                return Err(Error::InvalidSpace(format!("rho({i},{i}) must be 0")));
            }
            for j in 0..s {
                if !(rho[i][j] >= 0.0) {
                    return Err(Error::InvalidSpace(format!("rho({i},{j}) negative or NaN")));
                }
                if (rho[i][j] - rho[j][i]).abs() > TRIANGLE_TOL {
                    return Err(Error::InvalidSpace(format!("rho({i},{j}) not symmetric")));
                }
                if i != j && rho[i][j] == 0.0 {
                    return Err(Error::InvalidSpace(format!(
                        "rho({i},{j}) = 0 for distinct points"
                    )));
                }
            }
        }
        for i in 0..s {
            for j in 0..s {
                for k in 0..s {
                    if rho[i][j] > rho[i][k] + rho[k][j] + TRIANGLE_TOL {
                        return Err(Error::InvalidSpace(format!(
                            "triangle inequality fails at ({i},{j},{k})"
                        )));
                    }
                }
            }
        }
        Ok(Self { labels, rho })
    }

    /// The two-point spin space {−1,+1} with ρ(−1,+1) = 2 (index 0 ↦ −1, index 1 ↦ +1).
    pub fn spin() -> Self {
        Self::new(
            vec!["-1".into(), "+1".into()],
            vec![vec![0.0, 2.0], vec![2.0, 0.0]],
        )
        .expect("spin space is valid")
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.rho[i][j]
    }

    /// Spin value 2i−1 ∈ {−1,+1} of a point index; only meaningful on two-point spaces.
    pub fn spin_value(&self, i: usize) -> f64 {
        2.0 * i as f64 - 1.0
    }
}

/// ℝ^d with the euclidean metric, a bounding box and a 1-D grid used for
/// measure-level computations. Samplers use continuous coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EuclideanSpace {
    dim: usize,
    #[serde(rename = "box")]
    bounds: [f64; 2],
    cells: usize,
    #[serde(default)]
    x0: Option<Vec<f64>>,
}

pub const DEFAULT_GRID_CELLS: usize = 1001;

impl EuclideanSpace {
    pub fn new(dim: usize, bounds: [f64; 2], cells: usize) -> Result<Self> {
        if dim < 1 {
            return Err(Error::InvalidSpace("dimension must be >= 1".into()));
        }
        if !(bounds[0] < bounds[1]) {
            return Err(Error::InvalidSpace("box must satisfy lo < hi".into()));
        }
        if cells < 2 {
            return Err(Error::InvalidSpace("grid needs at least 2 cells".into()));
        }
        Ok(Self {
            dim,
            bounds,
            cells,
            x0: None,
        })
    }

    /// The default real line representation: [−5, 5] with 1001 cells.
    pub fn line() -> Self {
        Self::new(1, [-5.0, 5.0], DEFAULT_GRID_CELLS).expect("default line is valid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bounds(&self) -> [f64; 2] {
        self.bounds
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn cell_width(&self) -> f64 {
        (self.bounds[1] - self.bounds[0]) / self.cells as f64
    }

    /// Center of grid cell `i` (d = 1).
    pub fn cell_center(&self, i: usize) -> f64 {
        self.bounds[0] + (i as f64 + 0.5) * self.cell_width()
    }

    pub fn grid_centers(&self) -> Vec<f64> {
        (0..self.cells).map(|i| self.cell_center(i)).collect()
    }

    /// Index of the grid cell containing x (clamped to the box).
    pub fn cell_of(&self, x: f64) -> usize {
        let w = self.cell_width();
        let idx = ((x - self.bounds[0]) / w).floor() as isize;
        idx.clamp(0, self.cells as isize - 1) as usize
    }

    /// Base point x₀ used by moment/tail conditions; defaults to the origin.
    pub fn base_point(&self) -> Vec<f64> {
        self.x0.clone().unwrap_or_else(|| vec![0.0; self.dim])
    }

    pub fn with_base_point(mut self, x0: Vec<f64>) -> Result<Self> {
        if x0.len() != self.dim {
            return Err(Error::InvalidSpace("base point has wrong dimension".into()));
        }
        self.x0 = Some(x0);
        Ok(self)
    }
}

/// A state space: either finite with an explicit metric, or euclidean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum StateSpace {
    Finite(FiniteSpace),
    Euclidean(EuclideanSpace),
}

impl StateSpace {
    pub fn finite(labels: Vec<String>, rho: Vec<Vec<f64>>) -> Result<Self> {
        Ok(StateSpace::Finite(FiniteSpace::new(labels, rho)?))
    }

    pub fn spin() -> Self {
        StateSpace::Finite(FiniteSpace::spin())
    }

    pub fn line() -> Self {
        StateSpace::Euclidean(EuclideanSpace::line())
    }

    pub fn as_finite(&self) -> Option<&FiniteSpace> {
        match self {
            StateSpace::Finite(f) => Some(f),
            StateSpace::Euclidean(_) => None,
        }
    }

    pub fn as_euclidean(&self) -> Option<&EuclideanSpace> {
        match self {
            StateSpace::Finite(_) => None,
            StateSpace::Euclidean(e) => Some(e),
        }
    }

    /// ρ between two points of this space.
    pub fn distance(&self, a: PointRef<'_>, b: PointRef<'_>) -> f64 {
        match (self, a, b) {
            (StateSpace::Finite(f), PointRef::Finite(i), PointRef::Finite(j)) => f.distance(i, j),
            (StateSpace::Euclidean(_), PointRef::Euclidean(x), PointRef::Euclidean(y)) => {
                euclidean_distance(x, y)
            }
            _ => f64::NAN,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("state space serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let space: StateSpace =
            serde_json::from_str(s).map_err(|e| Error::InvalidSpace(e.to_string()))?;
        // re-run the construction checks
        match space {
            StateSpace::Finite(f) => StateSpace::finite(f.labels, f.rho),
            StateSpace::Euclidean(e) => {
                let built = EuclideanSpace::new(e.dim, e.bounds, e.cells)?;
                Ok(StateSpace::Euclidean(match e.x0 {
                    Some(x0) => built.with_base_point(x0)?,
                    None => built,
                }))
            }
        }
    }
}

pub fn euclidean_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Borrowed view of a single point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PointRef<'a> {
    Finite(usize),
    Euclidean(&'a [f64]),
}

impl PointRef<'_> {
    pub fn to_owned_point(self) -> Point {
        match self {
            PointRef::Finite(i) => Point::Finite(i),
            PointRef::Euclidean(x) => Point::Euclidean(x.to_vec()),
        }
    }
}

/// Owned point of a state space.
#[derive(Debug, Clone, PartialEq)]
pub enum Point {
    Finite(usize),
    Euclidean(Vec<f64>),
}

impl Point {
    pub fn as_ref(&self) -> PointRef<'_> {
        match self {
            Point::Finite(i) => PointRef::Finite(*i),
            Point::Euclidean(x) => PointRef::Euclidean(x),
        }
    }
}

/// An ordered particle configuration x^n (repeats allowed).
#[derive(Debug, Clone, PartialEq)]
pub enum Configuration {
    Finite(Vec<usize>),
    Euclidean { dim: usize, coords: Vec<f64> },
}

impl Configuration {
    pub fn finite(states: Vec<usize>) -> Self {
        Configuration::Finite(states)
    }

    pub fn euclidean(dim: usize, coords: Vec<f64>) -> Self {
        debug_assert!(coords.len().is_multiple_of(dim));
        Configuration::Euclidean { dim, coords }
    }

    /// Number of particles.
    pub fn len(&self) -> usize {
        match self {
            Configuration::Finite(v) => v.len(),
            Configuration::Euclidean { dim, coords } => coords.len() / dim,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, i: usize) -> PointRef<'_> {
        match self {
            Configuration::Finite(v) => PointRef::Finite(v[i]),
            Configuration::Euclidean { dim, coords } => {
                PointRef::Euclidean(&coords[i * dim..(i + 1) * dim])
            }
        }
    }

    pub fn set_point(&mut self, i: usize, p: &Point) {
        match (self, p) {
            (Configuration::Finite(v), Point::Finite(s)) => v[i] = *s,
            (Configuration::Euclidean { dim, coords }, Point::Euclidean(x)) => {
                coords[i * *dim..(i + 1) * *dim].copy_from_slice(x);
            }
            _ => panic!("point kind does not match configuration kind"),
        }
    }

    pub fn points(&self) -> impl Iterator<Item = PointRef<'_>> {
        (0..self.len()).map(move |i| self.point(i))
    }

    /// Checks that all points are valid for `space`.
    pub fn validate(&self, space: &StateSpace) -> Result<()> {
        match (self, space) {
            (Configuration::Finite(v), StateSpace::Finite(f)) => {
                if let Some(&bad) = v.iter().find(|&&s| s >= f.len()) {
                    return Err(Error::InvalidMeasure(format!(
                        "state index {bad} out of range for space of size {}",
                        f.len()
                    )));
                }
                Ok(())
            }
            (Configuration::Euclidean { dim, .. }, StateSpace::Euclidean(e)) => {
                if *dim == e.dim() {
                    Ok(())
                } else {
                    Err(Error::DimensionMismatch(e.dim()))
                }
            }
            _ => Err(Error::SpaceMismatch),
        }
    }
}
