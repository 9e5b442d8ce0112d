//! The mean-field Hamiltonian, the Gibbs measure P_n, single-site
//! Metropolis–Hastings and Euler–Maruyama samplers, and exact/estimated
//! log-partition functions.

use rand::RngExt;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::free_energy::interaction_energy;
use crate::measure::{build_reference, ReferenceMeasure};
use crate::numeric::{derive_seed, falling_factorial, ln_factorial_table, mean_and_stderr, LogSumExp};
use crate::potentials::{ConfinementPotential, InteractionPotential, Kernel};
use crate::space::{Configuration, EuclideanSpace, Point, StateSpace};
use crate::ustats::{for_each_combination_excluding, u_statistic, UStatCache};

const INIT_ATTEMPTS: usize = 100_000;
const DIVERGENCE_BOUND: f64 = 1e6;
pub const ENUMERATION_CAP: u128 = 10_000_000;
const SPIN_REDUCTION_CAP: usize = 100_000;

/// The model (S, α, {W^(k)}) defining the mean-field Gibbs measure P_n.
#[derive(Debug, Clone)]
pub struct GibbsModel {
    space: StateSpace,
    confinement: ConfinementPotential,
    reference: Option<ReferenceMeasure>,
    interactions: Vec<InteractionPotential>,
}

impl GibbsModel {
    /// Finite-space model from base weights m and confinement values V.
    pub fn new_finite(
        space: StateSpace,
        m: Vec<f64>,
        v: Vec<f64>,
        interactions: Vec<InteractionPotential>,
    ) -> Result<Self> {
        if space.as_finite().is_none() {
            return Err(Error::InvalidSpace("new_finite needs a finite space".into()));
        }
        let reference = build_reference(&space, &m, &v)?;
        let model = Self {
            space,
            confinement: ConfinementPotential::Table { values: v },
            reference: Some(reference),
            interactions,
        };
        model.validate()?;
        Ok(model)
    }

    /// Euclidean model; a grid reference α = e^{−V}·dx / C is built for d = 1.
    pub fn new_euclidean(
        space: EuclideanSpace,
        confinement: ConfinementPotential,
        interactions: Vec<InteractionPotential>,
    ) -> Result<Self> {
        let reference = if space.dim() == 1 {
            let m = vec![space.cell_width(); space.cells()];
            let v: Vec<f64> = space
                .grid_centers()
                .iter()
                .map(|&x| {
                    confinement.value(
                        &StateSpace::Euclidean(space.clone()),
                        crate::space::PointRef::Euclidean(&[x]),
                    )
                })
                .collect();
            Some(build_reference(&StateSpace::Euclidean(space.clone()), &m, &v)?)
        } else {
            None
        };
        let model = Self {
            space: StateSpace::Euclidean(space),
            confinement,
            reference,
            interactions,
        };
        model.validate()?;
        Ok(model)
    }

    /// Curie–Weiss model: spin space, uniform α, W = −(β/2)·x·y.
    pub fn spin(beta: f64) -> Self {
        let w = InteractionPotential::pair(crate::potentials::InteractionFamily::SpinProduct {
            beta,
        })
        .expect("spin family is valid");
        Self::new_finite(StateSpace::spin(), vec![1.0, 1.0], vec![0.0, 0.0], vec![w])
            .expect("spin model is valid")
    }

    /// Free two-state model (no interaction) with uniform α.
    pub fn free_spin() -> Self {
        Self::new_finite(StateSpace::spin(), vec![1.0, 1.0], vec![0.0, 0.0], vec![])
            .expect("free spin model is valid")
    }

    /// V(x) = x²/2 on the default line grid with W(x,y) = θ·x·y.
    pub fn quadratic_line(theta: f64) -> Self {
        let w = InteractionPotential::pair(
            crate::potentials::InteractionFamily::QuadraticProduct { theta },
        )
        .expect("quadratic family is valid");
        Self::new_euclidean(
            EuclideanSpace::line(),
            ConfinementPotential::Quadratic { a: 0.5 },
            vec![w],
        )
        .expect("quadratic line model is valid")
    }

    fn validate(&self) -> Result<()> {
        let mut orders: Vec<usize> = self.interactions.iter().map(|w| w.order()).collect();
        orders.sort_unstable();
        orders.dedup();
        if orders.len() != self.interactions.len() {
            return Err(Error::InvalidPotential(
                "interaction orders must be distinct".into(),
            ));
        }
        for w in &self.interactions {
            match w.family() {
                crate::potentials::InteractionFamily::SpinProduct { .. } => {
                    let ok = self.space.as_finite().map(|f| f.len() == 2).unwrap_or(false);
                    if !ok {
                        return Err(Error::InvalidPotential(
                            "spin_product needs the two-point spin space".into(),
                        ));
                    }
                }
                crate::potentials::InteractionFamily::QuadraticProduct { .. } => {
                    let ok = self.space.as_euclidean().map(|e| e.dim() == 1).unwrap_or(false);
                    if !ok {
                        return Err(Error::InvalidPotential(
                            "quadratic_product needs euclidean d = 1".into(),
                        ));
                    }
                }
                crate::potentials::InteractionFamily::PowerLaw { beta, .. } => {
                    if let Some(e) = self.space.as_euclidean() {
                        if *beta >= e.dim() as f64 {
                            return Err(Error::InvalidPotential(format!(
                                "power_law needs beta < d, got beta = {beta}, d = {}",
                                e.dim()
                            )));
                        }
                    }
                }
                crate::potentials::InteractionFamily::Table { side, .. } => {
                    let ok = self.space.as_finite().map(|f| f.len() == *side).unwrap_or(false);
                    if !ok {
                        return Err(Error::InvalidPotential(
                            "table side must match the finite space size".into(),
                        ));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn confinement(&self) -> &ConfinementPotential {
        &self.confinement
    }

    pub fn interactions(&self) -> &[InteractionPotential] {
        &self.interactions
    }

    /// Grid/finite reference measure α; None only for euclidean d ≥ 2.
    pub fn reference(&self) -> Result<&ReferenceMeasure> {
        self.reference
            .as_ref()
            .ok_or(Error::DimensionMismatch(1))
    }

    /// Highest interaction order N (1 when there are no interactions).
    pub fn max_order(&self) -> usize {
        self.interactions.iter().map(|w| w.order()).max().unwrap_or(1)
    }

    /// Clone with all interactions scaled by s ∈ [0, 1]; s = 0 removes them.
    pub fn with_interaction_scale(&self, s: f64) -> Self {
        assert!(s >= 0.0);
        let interactions = if s == 0.0 {
            Vec::new()
        } else {
            self.interactions.iter().map(|w| w.scaled(s)).collect()
        };
        Self {
            space: self.space.clone(),
            confinement: self.confinement.clone(),
            reference: self.reference.clone(),
            interactions,
        }
    }

    pub fn has_singular_interaction(&self) -> bool {
        self.interactions.iter().any(|w| w.is_singular())
    }
}

/// H_n(x^n) = Σ V(x_i) + n Σ_k U_n(W^(k)); +∞ propagates.
pub fn hamiltonian(model: &GibbsModel, config: &Configuration) -> Result<f64> {
    config.validate(model.space())?;
    let n = config.len();
    let needed = model.max_order();
    if n < needed {
        return Err(Error::TooFewParticles { needed, got: n });
    }
    let mut total = 0.0;
    for p in config.points() {
        let v = model.confinement.value(model.space(), p);
        if v == f64::INFINITY {
            return Ok(f64::INFINITY);
        }
        total += v;
    }
    for w in &model.interactions {
        let u = u_statistic(w, model.space(), config)?;
        if u == f64::INFINITY {
            return Ok(f64::INFINITY);
        }
        total += n as f64 * u;
    }
    Ok(total)
}

/// ∇H_n as a flattened n×d array, for euclidean models with smooth built-in
/// families. For order-2 W the i-th block is ∇V(x_i) + (2/(n−1)) Σ_{j≠i} ∇₁W(x_i,x_j).
pub fn grad_hamiltonian(model: &GibbsModel, config: &Configuration) -> Result<Vec<f64>> {
    let e = model
        .space()
        .as_euclidean()
        .ok_or_else(|| Error::NonDifferentiableFamily("finite space".into()))?;
    config.validate(model.space())?;
    let n = config.len();
    let d = e.dim();
    let needed = model.max_order();
    if n < needed {
        return Err(Error::TooFewParticles { needed, got: n });
    }
    if !model.confinement.is_smooth() {
        return Err(Error::NonDifferentiableFamily("table confinement".into()));
    }
    let mut grad = vec![0.0; n * d];
    for i in 0..n {
        let x = match config.point(i) {
            crate::space::PointRef::Euclidean(x) => x,
            _ => unreachable!(),
        };
        let gv = model
            .confinement
            .grad(x)
            .ok_or_else(|| Error::NonDifferentiableFamily("confinement".into()))?;
        grad[i * d..(i + 1) * d].copy_from_slice(&gv);
    }
    for w in &model.interactions {
        let k = w.order();
        if !w.is_smooth() {
            return Err(Error::NonDifferentiableFamily(w.family_name().into()));
        }
        // n·k!/|I_n^k| multiplies the sum over (k−1)-combinations of ∇₁W
        let ordered = falling_factorial(n, k).unwrap() as f64;
        let mut kfact = 1.0;
        for j in 2..=k {
            kfact *= j as f64;
        }
        let factor = n as f64 * kfact / ordered;
        let mut err = None;
        for i in 0..n {
            let mut args = Vec::with_capacity(k);
            let mut block = vec![0.0; d];
            for_each_combination_excluding(n, k - 1, i, |c| {
                if err.is_some() {
                    return;
                }
                args.clear();
                args.push(config.point(i));
                args.extend(c.iter().map(|&j| config.point(j)));
                match w.grad_first(model.space(), &args) {
                    Ok(g) => {
                        for (b, gi) in block.iter_mut().zip(&g) {
                            *b += gi;
                        }
                    }
                    Err(e) => err = Some(e),
                }
            });
            if let Some(e) = err {
                return Err(e);
            }
            for (slot, b) in grad[i * d..(i + 1) * d].iter_mut().zip(&block) {
                *slot += factor * b;
            }
        }
    }
    Ok(grad)
}

/// Mean spin of a configuration on the two-point spin space.
pub fn spin_magnetization(space: &StateSpace, config: &Configuration) -> f64 {
    match (space, config) {
        (StateSpace::Finite(f), Configuration::Finite(states)) => {
            states.iter().map(|&s| f.spin_value(s)).sum::<f64>() / states.len() as f64
        }
        _ => f64::NAN,
    }
}

/// Single-site Metropolis–Hastings parameters.
#[derive(Debug, Clone)]
pub struct McmcConfig {
    /// Post-burn-in single-site proposals.
    pub steps: u64,
    pub burn_in: u64,
    pub thinning: u64,
    /// Gaussian proposal width for euclidean spaces.
    pub sigma: f64,
    /// Tune σ towards acceptance 0.3–0.5 during burn-in, then freeze.
    pub auto_tune: bool,
    /// Rebuild cached totals every this many steps and compare.
    pub audit_every: u64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            steps: 100_000,
            burn_in: 10_000,
            thinning: 10,
            sigma: 0.5,
            auto_tune: true,
            audit_every: 10_000,
        }
    }
}

/// Output of an MCMC run.
#[derive(Debug, Clone)]
pub struct McmcRun {
    pub samples: Vec<Configuration>,
    pub acceptance_rate: f64,
    pub tuned_sigma: f64,
    pub audit_failures: u64,
    pub n: usize,
    pub seed: u64,
}

struct Chain<'a> {
    model: &'a GibbsModel,
    config: Configuration,
    caches: Vec<UStatCache>,
    n: usize,
    sigma: f64,
}

impl<'a> Chain<'a> {
    fn init(model: &'a GibbsModel, n: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        let needed = model.max_order();
        if n < needed {
            return Err(Error::TooFewParticles { needed, got: n });
        }
        for _ in 0..INIT_ATTEMPTS {
            let config = draw_product_start(model, n, rng)?;
            if hamiltonian(model, &config)? < f64::INFINITY {
                let caches = model
                    .interactions
                    .iter()
                    .map(|w| UStatCache::build(w, model.space(), &config))
                    .collect::<Result<Vec<_>>>()?;
                return Ok(Self {
                    model,
                    config,
                    caches,
                    n,
                    sigma: 0.5,
                });
            }
        }
        Err(Error::NoFiniteStartingPoint {
            attempts: INIT_ATTEMPTS,
        })
    }

    /// One proposal; returns whether it was accepted.
    fn step(&mut self, rng: &mut ChaCha8Rng) -> bool {
        let i = rng.random_range(0..self.n);
        let (candidate, log_base_ratio) = match self.model.space() {
            StateSpace::Finite(f) => {
                let reference = self.model.reference().expect("finite models carry α");
                let s_new = rng.random_range(0..f.len());
                let s_old = match self.config.point(i) {
                    crate::space::PointRef::Finite(s) => s,
                    _ => unreachable!(),
                };
                let ratio = reference.log_alpha(s_new) - reference.log_alpha(s_old);
                (Point::Finite(s_new), ratio)
            }
            StateSpace::Euclidean(e) => {
                let d = e.dim();
                let x_old = match self.config.point(i) {
                    crate::space::PointRef::Euclidean(x) => x.to_vec(),
                    _ => unreachable!(),
                };
                let x_new: Vec<f64> = x_old
                    .iter()
                    .map(|&c| c + self.sigma * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                debug_assert_eq!(x_new.len(), d);
                let v_old = self
                    .model
                    .confinement
                    .value(self.model.space(), crate::space::PointRef::Euclidean(&x_old));
                let v_new = self
                    .model
                    .confinement
                    .value(self.model.space(), crate::space::PointRef::Euclidean(&x_new));
                if v_new == f64::INFINITY {
                    return false;
                }
                (Point::Euclidean(x_new), v_old - v_new)
            }
        };
        if log_base_ratio == f64::NEG_INFINITY {
            return false;
        }

        // interaction delta from the incremental caches, never a full recomputation
        let mut log_ratio = log_base_ratio;
        let mut deltas = Vec::with_capacity(self.caches.len());
        for (w, cache) in self.model.interactions.iter().zip(&self.caches) {
            let delta = cache
                .delta_for_move(w, self.model.space(), &self.config, i, &candidate)
                .expect("index in range");
            let u_new = cache.value_after(&delta);
            if u_new == f64::INFINITY {
                return false;
            }
            log_ratio += -(self.n as f64) * (u_new - cache.value());
            deltas.push(delta);
        }

        let accept = log_ratio >= 0.0 || rng.random::<f64>() < log_ratio.exp();
        if accept {
            for (cache, delta) in self.caches.iter_mut().zip(&deltas) {
                cache.apply(delta);
            }
            self.config.set_point(i, &candidate);
        }
        accept
    }

    /// Drift audit: rebuild all caches, count relative mismatches above 1e−8.
    fn audit(&mut self) -> u64 {
        let mut failures = 0;
        for (w, cache) in self.model.interactions.iter().zip(self.caches.iter_mut()) {
            let old = cache.value();
            cache
                .rebuild(w, self.model.space(), &self.config)
                .expect("configuration is valid");
            let fresh = cache.value();
            if old.is_finite() && fresh.is_finite() {
                let rel = (old - fresh).abs() / fresh.abs().max(1.0);
                if rel > 1e-8 {
                    failures += 1;
                }
            } else if old != fresh {
                failures += 1;
            }
        }
        failures
    }

    fn u_values(&self) -> Vec<f64> {
        self.caches.iter().map(|c| c.value()).collect()
    }
}


fn draw_product_start(model: &GibbsModel, n: usize, rng: &mut ChaCha8Rng) -> Result<Configuration> {
    match model.space() {
        StateSpace::Finite(_) => {
            let reference = model.reference()?;
            let states = (0..n)
                .map(|_| match reference.sample_point(rng) {
                    Point::Finite(s) => s,
                    _ => unreachable!(),
                })
                .collect();
            Ok(Configuration::finite(states))
        }
        StateSpace::Euclidean(e) => {
            let d = e.dim();
            if let Ok(reference) = model.reference() {
                let mut coords = Vec::with_capacity(n * d);
                for _ in 0..n {
                    match reference.sample_point(rng) {
                        Point::Euclidean(x) => coords.extend(x),
                        _ => unreachable!(),
                    }
                }
                Ok(Configuration::euclidean(d, coords))
            } else {
                // d >= 2 has no grid reference; start from standard normals
                let coords = (0..n * d)
                    .map(|_| rng.sample::<f64, _>(StandardNormal))
                    .collect();
                Ok(Configuration::euclidean(d, coords))
            }
        }
    }
}

/// Runs a chain, passing every emitted (thinned, post-burn-in) sample to
/// `emit` along with the current per-order U_n values.
pub fn run_chain(
    model: &GibbsModel,
    n: usize,
    cfg: &McmcConfig,
    seed: u64,
    mut emit: impl FnMut(&Configuration, &[f64]),
) -> Result<McmcRun> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chain = Chain::init(model, n, &mut rng)?;
    chain.sigma = cfg.sigma;

    // burn-in with optional σ auto-tuning on euclidean spaces
    let tune_window = 500u64;
    let mut window_accepts = 0u64;
    let mut window_count = 0u64;
    for _ in 0..cfg.burn_in {
        if chain.step(&mut rng) {
            window_accepts += 1;
        }
        window_count += 1;
        if cfg.auto_tune
            && model.space().as_euclidean().is_some()
            && window_count == tune_window
        {
            let rate = window_accepts as f64 / window_count as f64;
            if rate > 0.5 {
                chain.sigma = (chain.sigma * 1.25).min(100.0);
            } else if rate < 0.3 {
                chain.sigma = (chain.sigma * 0.8).max(1e-4);
            }
            window_accepts = 0;
            window_count = 0;
        }
    }

    let mut accepted = 0u64;
    let mut audit_failures = 0u64;
    let thinning = cfg.thinning.max(1);
    for t in 0..cfg.steps {
        if chain.step(&mut rng) {
            accepted += 1;
        }
        if cfg.audit_every > 0 && (t + 1) % cfg.audit_every == 0 {
            audit_failures += chain.audit();
        }
        if (t + 1) % thinning == 0 {
            emit(&chain.config, &chain.u_values());
        }
    }

    Ok(McmcRun {
        samples: Vec::new(),
        acceptance_rate: accepted as f64 / cfg.steps.max(1) as f64,
        tuned_sigma: chain.sigma,
        audit_failures,
        n,
        seed,
    })
}

/// Metropolis–Hastings sampling of P_n; returns thinned post-burn-in samples.
pub fn sample_mcmc(model: &GibbsModel, n: usize, cfg: &McmcConfig, seed: u64) -> Result<McmcRun> {
    let mut samples = Vec::with_capacity((cfg.steps / cfg.thinning.max(1)) as usize);
    let mut run = run_chain(model, n, cfg, seed, |config, _| samples.push(config.clone()))?;
    run.samples = samples;
    Ok(run)
}

/// Euler–Maruyama parameters for the interacting SDE.
#[derive(Debug, Clone)]
pub struct LangevinConfig {
    pub dt: f64,
    pub horizon: f64,
    /// 0 turns the SDE into the deterministic gradient flow.
    pub noise_scale: f64,
    pub record_every: usize,
    /// Allow singular families (power-law, logarithmic) despite the drift blow-up.
    pub force_singular: bool,
}

impl Default for LangevinConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            horizon: 50.0,
            noise_scale: 1.0,
            record_every: 10,
            force_singular: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SdeTrajectory {
    pub times: Vec<f64>,
    pub frames: Vec<Configuration>,
    pub final_config: Configuration,
}

/// X_{t+Δt} = X_t − ∇H_n Δt + √(2Δt) ξ on euclidean spaces with smooth families.
pub fn simulate_sde(
    model: &GibbsModel,
    n: usize,
    cfg: &LangevinConfig,
    seed: u64,
) -> Result<SdeTrajectory> {
    let e = model
        .space()
        .as_euclidean()
        .ok_or_else(|| Error::NonDifferentiableFamily("finite space".into()))?;
    assert!(cfg.dt > 0.0 && cfg.horizon >= cfg.dt, "need dt > 0, T >= dt");
    if model.has_singular_interaction() && !cfg.force_singular {
        let name = model
            .interactions
            .iter()
            .find(|w| w.is_singular())
            .map(|w| w.family_name().to_string())
            .unwrap_or_default();
        return Err(Error::SingularFamilyGuard(name));
    }
    let d = e.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut config = {
        let chain = Chain::init(model, n, &mut rng)?;
        chain.config
    };
    let steps = (cfg.horizon / cfg.dt).round() as usize;
    let noise = (2.0 * cfg.dt).sqrt() * cfg.noise_scale;
    let mut times = Vec::new();
    let mut frames = Vec::new();
    for step in 0..steps {
        let grad = grad_hamiltonian(model, &config)?;
        if let Configuration::Euclidean { coords, .. } = &mut config {
            for (c, g) in coords.iter_mut().zip(&grad) {
                *c += -g * cfg.dt + noise * rng.sample::<f64, _>(StandardNormal);
                if c.abs() > DIVERGENCE_BOUND {
                    return Err(Error::Diverged {
                        step,
                        magnitude: c.abs(),
                    });
                }
            }
        }
        if cfg.record_every > 0 && (step + 1) % cfg.record_every == 0 {
            times.push((step + 1) as f64 * cfg.dt);
            frames.push(config.clone());
        }
    }
    debug_assert_eq!(config.len() * d / d, n);
    Ok(SdeTrajectory {
        times,
        frames,
        final_config: config,
    })
}

/// (1/n) log Z̃_n, exact. Uses the magnetization-class reduction for
/// spin-product models (n up to 10^5) and full |S|^n enumeration otherwise.
pub fn log_partition_exact(model: &GibbsModel, n: usize) -> Result<f64> {
    let needed = model.max_order();
    if n < needed.max(2) && !model.interactions.is_empty() {
        return Err(Error::TooFewParticles { needed, got: n });
    }
    if model.interactions.is_empty() {
        return Ok(0.0);
    }
    let f = model.space().as_finite().ok_or_else(|| {
        Error::TooLargeToEnumerate("exact partition function needs a finite space".into())
    })?;
    let reference = model.reference()?;

    // magnetization-class reduction for the spin-product family
    if f.len() == 2 && model.interactions.len() == 1 {
        if let Some(beta) = model.interactions[0].spin_coupling() {
            if n > SPIN_REDUCTION_CAP {
                return Err(Error::TooLargeToEnumerate(format!(
                    "spin reduction capped at n = {SPIN_REDUCTION_CAP}"
                )));
            }
            let la0 = reference.log_alpha(0);
            let la1 = reference.log_alpha(1);
            let lf = ln_factorial_table(n);
            let mut lse = LogSumExp::new();
            for k in 0..=n {
                let m_total = 2.0 * k as f64 - n as f64;
                let log_binom = lf[n] - lf[k] - lf[n - k];
                let log_prob = k as f64 * la1 + (n - k) as f64 * la0;
                if log_prob == f64::NEG_INFINITY {
                    continue;
                }
                let exponent = beta * (m_total * m_total - n as f64) / (2.0 * (n as f64 - 1.0));
                lse.add(log_binom + log_prob + exponent);
            }
            return Ok(lse.value() / n as f64);
        }
    }

    // full enumeration
    let states = f.len();
    let count = (states as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if count > ENUMERATION_CAP {
        return Err(Error::TooLargeToEnumerate(format!(
            "{states}^{n} configurations"
        )));
    }
    let mut lse = LogSumExp::new();
    let mut config = Configuration::finite(vec![0; n]);
    let mut odometer = vec![0usize; n];
    loop {
        if let Configuration::Finite(v) = &mut config {
            v.copy_from_slice(&odometer);
        }
        let mut log_prob = 0.0;
        for &s in &odometer {
            log_prob += reference.log_alpha(s);
        }
        if log_prob > f64::NEG_INFINITY {
            let mut exponent = 0.0;
            for w in &model.interactions {
                let u = u_statistic(w, model.space(), &config)?;
                exponent -= n as f64 * u;
            }
            lse.add(log_prob + exponent);
        }
        // advance
        let mut slot = 0;
        loop {
            if slot == n {
                return Ok(lse.value() / n as f64);
            }
            odometer[slot] += 1;
            if odometer[slot] < states {
                break;
            }
            odometer[slot] = 0;
            slot += 1;
        }
    }
}

/// One interpolation point of a thermodynamic-integration run.
#[derive(Debug, Clone)]
pub struct TiPoint {
    pub s: f64,
    pub mean_u: f64,
    pub stderr: f64,
}

/// Thermodynamic-integration estimate of (1/n) log Z̃_n with error budget.
#[derive(Debug, Clone)]
pub struct TiEstimate {
    pub value: f64,
    pub mc_stderr: f64,
    /// Richardson estimate |T_full − T_half| / 3 of the trapezoid bias.
    pub quad_error: f64,
    pub combined_stderr: f64,
    pub points: Vec<TiPoint>,
}

const TI_BATCHES: usize = 20;

/// Estimates (1/n) log Z̃_n = −∫₀¹ E_s[Σ_k U_n(W^(k))] ds by the trapezoid
/// rule over `schedule`, sampling P_n^{(s)} by MCMC at each interior point.
/// The s = 0 endpoint is exact (i.i.d. α).
pub fn log_partition_estimate(
    model: &GibbsModel,
    n: usize,
    schedule: &[f64],
    mcmc: &McmcConfig,
    seed: u64,
) -> Result<TiEstimate> {
    assert!(schedule.len() >= 10, "schedule needs at least 10 points");
    assert!(
        schedule[0] == 0.0 && *schedule.last().unwrap() == 1.0,
        "schedule must run from 0 to 1"
    );
    assert!(
        schedule.windows(2).all(|w| w[0] < w[1]),
        "schedule must be increasing"
    );
    let reference = model.reference()?;

    let mut points = Vec::with_capacity(schedule.len());
    for (idx, &s) in schedule.iter().enumerate() {
        if s == 0.0 {
            // E_{α^{⊗n}}[Σ U_n(W)] = Σ_k ∫ W^(k) dα^{⊗k}, exactly
            let mut total = 0.0;
            for w in model.interactions() {
                let energy = interaction_energy(w, reference.alpha())?;
                total += energy.value;
            }
            points.push(TiPoint {
                s,
                mean_u: total,
                stderr: 0.0,
            });
            continue;
        }
        let scaled = model.with_interaction_scale(s);
        let mut sums = Vec::new();
        run_chain(
            &scaled,
            n,
            mcmc,
            derive_seed(seed, idx as u64),
            |_, u_values| {
                // caches hold U_n(s·W) = s·U_n(W)
                sums.push(u_values.iter().sum::<f64>() / s);
            },
        )?;
        let batch = sums.len().div_ceil(TI_BATCHES).max(1);
        let batch_means: Vec<f64> = sums
            .chunks(batch)
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect();
        let (mean_u, stderr) = mean_and_stderr(&batch_means);
        points.push(TiPoint { s, mean_u, stderr });
    }

    let trapezoid = |pts: &[(f64, f64)]| -> f64 {
        pts.windows(2)
            .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
            .sum()
    };
    let full: Vec<(f64, f64)> = points.iter().map(|p| (p.s, p.mean_u)).collect();
    let integral = trapezoid(&full);

    // trapezoid weights for the MC error
    let mut weights = vec![0.0; points.len()];
    for i in 0..points.len() - 1 {
        let h = points[i + 1].s - points[i].s;
        weights[i] += 0.5 * h;
        weights[i + 1] += 0.5 * h;
    }
    let mc_var: f64 = points
        .iter()
        .zip(&weights)
        .map(|(p, w)| (w * p.stderr) * (w * p.stderr))
        .sum();
    let mc_stderr = mc_var.sqrt();

    let quad_error = if points.len() >= 5 && points.len() % 2 == 1 {
        let half: Vec<(f64, f64)> = full.iter().copied().step_by(2).collect();
        (integral - trapezoid(&half)).abs() / 3.0
    } else {
        0.0
    };

    Ok(TiEstimate {
        value: -integral,
        mc_stderr,
        quad_error,
        combined_stderr: (mc_var + quad_error * quad_error).sqrt(),
        points,
    })
}
