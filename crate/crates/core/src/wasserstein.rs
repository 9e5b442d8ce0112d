//! L^p-Wasserstein distances between discrete measures: the exact 1-D
//! quantile formula, an exact min-cost-flow transportation solver, and the
//! exponential tail diagnostic for the Wasserstein-topology hypotheses.

use crate::error::{Error, Result};
use crate::measure::{DiscreteMeasure, ReferenceMeasure};
use crate::potentials::{check_exp_integrability, FnKernel};
use crate::space::{Point, PointRef, StateSpace};

pub const SUPPORT_CAP: usize = 2000;
const FLOW_EPS: f64 = 1e-13;

/// W_p(μ, ν) on ℝ via the monotone (quantile) coupling, exact for discrete
/// measures by merging weight breakpoints.
pub fn wasserstein_1d(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Result<f64> {
    if mu.space() != nu.space() {
        return Err(Error::SpaceMismatch);
    }
    match mu.space() {
        StateSpace::Euclidean(e) if e.dim() == 1 => {}
        _ => return Err(Error::DimensionMismatch(1)),
    }
    assert!(p >= 1.0, "W_p needs p >= 1");

    let coord = |pt: &Point| match pt {
        Point::Euclidean(x) => x[0],
        Point::Finite(_) => f64::NAN,
    };
    // canonical support order is ascending for 1-D euclidean measures
    let xs: Vec<f64> = mu.support().iter().map(coord).collect();
    let ys: Vec<f64> = nu.support().iter().map(coord).collect();
    let wa = mu.weights();
    let wb = nu.weights();

    let (mut i, mut j) = (0usize, 0usize);
    let (mut ra, mut rb) = (wa[0], wb[0]);
    let mut cost = 0.0;
    loop {
        let step = ra.min(rb);
        cost += step * (xs[i] - ys[j]).abs().powf(p);
        ra -= step;
        rb -= step;
        if ra <= FLOW_EPS {
            i += 1;
            if i == xs.len() {
                break;
            }
            ra = wa[i];
        }
        if rb <= FLOW_EPS {
            j += 1;
            if j == ys.len() {
                break;
            }
            rb = wb[j];
        }
    }
    Ok(cost.powf(1.0 / p))
}

/// An explicit coupling ξ over supp(μ) × supp(ν).
#[derive(Debug, Clone)]
pub struct TransportPlan {
    /// (μ-atom index, ν-atom index, mass) triples with positive mass.
    pub entries: Vec<(usize, usize, f64)>,
    /// Σ ξ(i,j) ρ(x_i, y_j)^p.
    pub cost: f64,
}

impl TransportPlan {
    /// Row/column sums of the plan, for feasibility checks.
    pub fn marginals(&self, m: usize, n: usize) -> (Vec<f64>, Vec<f64>) {
        let mut row = vec![0.0; m];
        let mut col = vec![0.0; n];
        for &(i, j, w) in &self.entries {
            row[i] += w;
            col[j] += w;
        }
        (row, col)
    }
}

/// Exact W_p between discrete measures by successive shortest augmenting
/// paths with node potentials on the bipartite support graph. The returned
/// plan is the one produced by scanning nodes in index order (deterministic
/// lexicographic tie-breaking).
pub fn wasserstein_exact(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    p: f64,
) -> Result<(f64, TransportPlan)> {
    if mu.space() != nu.space() {
        return Err(Error::SpaceMismatch);
    }
    assert!(p >= 1.0, "W_p needs p >= 1");
    let m = mu.len();
    let n = nu.len();
    if m > SUPPORT_CAP || n > SUPPORT_CAP {
        return Err(Error::SupportTooLarge {
            got: m.max(n),
            cap: SUPPORT_CAP,
        });
    }
    let space = mu.space();

    // full cost matrix c[i][j] = rho(x_i, y_j)^p
    let cost: Vec<f64> = (0..m)
        .flat_map(|i| {
            let (xi, _) = mu.atom(i);
            (0..n).map(move |j| {
                let (yj, _) = nu.atom(j);
                space.distance(xi, yj).powf(p)
            })
        })
        .collect();
    let c = |i: usize, j: usize| cost[i * n + j];

    let mut supply: Vec<f64> = mu.weights().to_vec();
    let mut demand: Vec<f64> = nu.weights().to_vec();
    let total_nodes = m + n;
    let mut potential = vec![0.0f64; total_nodes];
    // flow[i] holds (sink, mass) pairs; incoming[j] lists sources with flow into j
    let mut flow: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
    let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); n];

    let flow_get = |flow: &Vec<Vec<(usize, f64)>>, i: usize, j: usize| -> f64 {
        flow[i]
            .iter()
            .find(|(jj, _)| *jj == j)
            .map(|(_, v)| *v)
            .unwrap_or(0.0)
    };

    loop {
        let remaining: f64 = demand.iter().sum();
        if remaining <= 1e-12 {
            break;
        }

        // Dijkstra over reduced costs from all sources with residual supply
        let mut dist = vec![f64::INFINITY; total_nodes];
        let mut parent: Vec<Option<usize>> = vec![None; total_nodes];
        let mut done = vec![false; total_nodes];
        for i in 0..m {
            if supply[i] > FLOW_EPS {
                dist[i] = 0.0;
            }
        }
        let mut target: Option<usize> = None;
        loop {
            let mut best = f64::INFINITY;
            let mut node = usize::MAX;
            for v in 0..total_nodes {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    node = v;
                }
            }
            if node == usize::MAX {
                break;
            }
            done[node] = true;
            if node >= m && demand[node - m] > FLOW_EPS {
                target = Some(node);
                break;
            }
            if node < m {
                // forward arcs i -> j, unlimited capacity
                let i = node;
                for j in 0..n {
                    let v = m + j;
                    if done[v] {
                        continue;
                    }
                    let rc = (c(i, j) + potential[i] - potential[v]).max(0.0);
                    if dist[i] + rc < dist[v] {
                        dist[v] = dist[i] + rc;
                        parent[v] = Some(i);
                    }
                }
            } else {
                // backward arcs j -> i along positive flow
                let j = node - m;
                for &i in &incoming[j] {
                    if done[i] {
                        continue;
                    }
                    let rc = (-c(i, j) + potential[node] - potential[i]).max(0.0);
                    if dist[node] + rc < dist[i] {
                        dist[i] = dist[node] + rc;
                        parent[i] = Some(node);
                    }
                }
            }
        }
        let target = match target {
            Some(t) => t,
            // no augmenting path left; only round-off dust remains
            None => break,
        };

        // Johnson potential update
        let dt = dist[target];
        for v in 0..total_nodes {
            potential[v] += dist[v].min(dt);
        }

        // walk back to the path root and find the bottleneck
        let mut path = vec![target];
        let mut v = target;
        while let Some(u) = parent[v] {
            path.push(u);
            v = u;
        }
        path.reverse();
        let root = path[0];
        debug_assert!(root < m);
        let mut bottleneck = supply[root].min(demand[target - m]);
        for w in path.windows(2) {
            if w[0] >= m {
                // backward arc sink -> source limited by existing flow
                bottleneck = bottleneck.min(flow_get(&flow, w[1], w[0] - m));
            }
        }
        if bottleneck <= FLOW_EPS {
            break;
        }

        supply[root] -= bottleneck;
        demand[target - m] -= bottleneck;
        for w in path.windows(2) {
            if w[0] < m {
                let (i, j) = (w[0], w[1] - m);
                match flow[i].iter_mut().find(|(jj, _)| *jj == j) {
                    Some(entry) => entry.1 += bottleneck,
                    None => {
                        flow[i].push((j, bottleneck));
                        incoming[j].push(i);
                    }
                }
            } else {
                let (i, j) = (w[1], w[0] - m);
                if let Some(pos) = flow[i].iter().position(|(jj, _)| *jj == j) {
                    flow[i][pos].1 -= bottleneck;
                    if flow[i][pos].1 <= FLOW_EPS {
                        flow[i].remove(pos);
                        incoming[j].retain(|&s| s != i);
                    }
                }
            }
        }
    }

    let mut entries = Vec::new();
    let mut total_cost = 0.0;
    for (i, row) in flow.iter().enumerate() {
        for &(j, w) in row {
            if w > 0.0 {
                entries.push((i, j, w));
                total_cost += w * c(i, j);
            }
        }
    }
    entries.sort_by_key(|a| (a.0, a.1));
    Ok((
        total_cost.max(0.0).powf(1.0 / p),
        TransportPlan {
            entries,
            cost: total_cost,
        },
    ))
}

/// One λ row of the exponential tail diagnostic ∫ exp(λ ρ^p(x, x₀)) dα.
#[derive(Debug, Clone)]
pub struct TailCheck {
    pub lambda: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub unstable: bool,
}

/// Checks the tail condition of the Wasserstein-topology hypotheses: exact
/// finite sums on finite spaces, Monte Carlo with a heavy-tail flag on
/// euclidean grids.
pub fn tail_condition_check(
    reference: &ReferenceMeasure,
    p: f64,
    lambdas: &[f64],
    x0: Option<Point>,
    sample_budget: usize,
    seed: u64,
) -> Vec<TailCheck> {
    assert!(lambdas.iter().all(|&l| l > 0.0), "lambdas must be positive");
    let space = reference.space().clone();
    let base = x0.unwrap_or_else(|| match &space {
        StateSpace::Finite(_) => Point::Finite(0),
        StateSpace::Euclidean(e) => Point::Euclidean(e.base_point()),
    });

    match &space {
        StateSpace::Finite(_) => lambdas
            .iter()
            .map(|&lambda| {
                let estimate = reference.alpha().expect(|pt| {
                    (lambda * space.distance(pt, base.as_ref()).powf(p)).exp()
                });
                TailCheck {
                    lambda,
                    estimate,
                    stderr: 0.0,
                    unstable: false,
                }
            })
            .collect(),
        StateSpace::Euclidean(_) => {
            let base_clone = base.clone();
            let kernel = FnKernel::new(1, move |s: &StateSpace, a: &[PointRef<'_>]| {
                s.distance(a[0], base_clone.as_ref()).powf(p)
            });
            lambdas
                .iter()
                .map(|&lambda| {
                    let out =
                        check_exp_integrability(&kernel, reference, lambda, sample_budget, seed);
                    TailCheck {
                        lambda,
                        estimate: out.estimate,
                        stderr: out.stderr,
                        unstable: out.unstable,
                    }
                })
                .collect()
        }
    }
}
