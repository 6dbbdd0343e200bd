//! Isotropic evolution strategies with antithetic sampling and centered-rank
//! fitness shaping.
//!
//! Generation `g` perturbs the center with `population / 2` Gaussian
//! directions `ε_j`, each drawn from its own stream seeded by
//! `derive_seed([base_seed, g, j])`. Candidate `2j` is `center + σ ε_j` and
//! candidate `2j + 1` is `center − σ ε_j`. The update is
//!
//! ```text
//! center += lr / (population σ) · Σ_j (w_2j − w_2j+1) ε_j
//! ```
//!
//! summed in increasing `j`. Candidates may be evaluated on any number of
//! threads; the result depends only on the seeds.

use rayon::prelude::*;
use rayon::ThreadPool;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{Agent, AgentConfig};
use crate::rng::{derive_seed, RngState};

/// Stream tag for the per-generation evaluation seed.
const EVAL_TAG: u64 = 0xE7A1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EsConfig {
    pub population: usize,
    pub sigma: f64,
    pub learning_rate: f64,
    pub iterations: usize,
    pub episodes_per_eval: usize,
    pub base_seed: u64,
}

impl Default for EsConfig {
    fn default() -> Self {
        EsConfig {
            population: 64,
            sigma: 0.1,
            learning_rate: 0.05,
            iterations: 100,
            episodes_per_eval: 2,
            base_seed: 0,
        }
    }
}

impl EsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 2 || self.population % 2 != 0 {
            return Err(Error::InvalidConfig(format!(
                "population must be even and at least 2, got {}",
                self.population
            )));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be non-negative, got {}",
                self.learning_rate
            )));
        }
        if self.episodes_per_eval == 0 {
            return Err(Error::InvalidConfig("episodes_per_eval must be at least 1".into()));
        }
        Ok(())
    }
}

/// Raw-fitness summary of one generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub best: f64,
    pub mean: f64,
    pub std: f64,
}

impl GenerationStats {
    /// Mean and population standard deviation over the finite fitnesses;
    /// crashed candidates (`-inf`) only count towards `best` when nothing
    /// else is available.
    pub fn from_fitness(fitness: &[f64]) -> Self {
        let finite: Vec<f64> = fitness.iter().copied().filter(|f| f.is_finite()).collect();
        if finite.is_empty() {
            return GenerationStats {
                best: f64::NEG_INFINITY,
                mean: f64::NEG_INFINITY,
                std: 0.0,
            };
        }
        let n = finite.len() as f64;
        let mean = finite.iter().sum::<f64>() / n;
        let var = finite.iter().map(|f| (f - mean) * (f - mean)).sum::<f64>() / n;
        GenerationStats {
            best: finite.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean,
            std: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EsState {
    pub center: Vec<f64>,
    pub iteration: usize,
    /// Stream the initial center was drawn from; perturbations use derived
    /// seeds and never advance it.
    pub rng: RngState,
    pub history: Vec<GenerationStats>,
}

impl EsState {
    pub fn new(center: Vec<f64>, base_seed: u64) -> Self {
        EsState {
            center,
            iteration: 0,
            rng: RngState::new(base_seed),
            history: Vec::new(),
        }
    }
}

/// Weights `rank / (n − 1) − ½` with ascending ranks; ties keep index order.
pub fn rank_shape(fitness: &[f64]) -> Result<Vec<f64>> {
    let n = fitness.len();
    if n < 2 {
        return Err(Error::InvalidConfig(format!("rank shaping needs at least 2 fitness values, got {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| fitness[a].total_cmp(&fitness[b]));
    let mut weights = vec![0.0; n];
    let denom = (n - 1) as f64;
    for (rank, &idx) in order.iter().enumerate() {
        weights[idx] = rank as f64 / denom - 0.5;
    }
    Ok(weights)
}

/// Perturbation direction `j` of generation `iteration`.
pub fn perturbation(base_seed: u64, iteration: usize, j: usize, dim: usize) -> Vec<f64> {
    RngState::new(derive_seed(&[base_seed, iteration as u64, j as u64])).gaussian_vec(dim)
}

/// Seed shared by every candidate of one generation.
pub fn generation_eval_seed(base_seed: u64, iteration: usize) -> u64 {
    derive_seed(&[base_seed, iteration as u64, EVAL_TAG])
}

/// Candidates and their raw fitness for one generation.
#[derive(Debug, Clone)]
pub struct Generation {
    pub directions: Vec<Vec<f64>>,
    pub fitness: Vec<f64>,
}

pub fn evaluate_generation<F>(
    state: &EsState,
    config: &EsConfig,
    fitness_fn: &F,
    pool: Option<&ThreadPool>,
) -> Result<Generation>
where
    F: Fn(&[f64], u64) -> f64 + Sync,
{
    config.validate()?;
    let dim = state.center.len();
    let pairs = config.population / 2;
    let directions: Vec<Vec<f64>> = (0..pairs)
        .map(|j| perturbation(config.base_seed, state.iteration, j, dim))
        .collect();
    let eval_seed = generation_eval_seed(config.base_seed, state.iteration);
    let candidate = |k: usize| -> f64 {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let genome: Vec<f64> = state
            .center
            .iter()
            .zip(&directions[k / 2])
            .map(|(c, e)| c + sign * config.sigma * e)
            .collect();
        fitness_fn(&genome, eval_seed)
    };
    let fitness: Vec<f64> = match pool {
        Some(pool) => pool.install(|| (0..config.population).into_par_iter().map(candidate).collect()),
        None => (0..config.population).map(candidate).collect(),
    };
    Ok(Generation { directions, fitness })
}

/// Applies the shaped update for an evaluated generation.
pub fn apply_update(state: &EsState, config: &EsConfig, generation: &Generation) -> Result<EsState> {
    let weights = rank_shape(&generation.fitness)?;
    let scale = config.learning_rate / (config.population as f64 * config.sigma);
    let mut center = state.center.clone();
    for (j, eps) in generation.directions.iter().enumerate() {
        let w = scale * (weights[2 * j] - weights[2 * j + 1]);
        for (c, e) in center.iter_mut().zip(eps) {
            *c += w * e;
        }
    }
    let mut history = state.history.clone();
    history.push(GenerationStats::from_fitness(&generation.fitness));
    Ok(EsState {
        center,
        iteration: state.iteration + 1,
        rng: state.rng,
        history,
    })
}

pub fn es_step<F>(state: &EsState, config: &EsConfig, fitness_fn: &F, pool: Option<&ThreadPool>) -> Result<EsState>
where
    F: Fn(&[f64], u64) -> f64 + Sync,
{
    let generation = evaluate_generation(state, config, fitness_fn, pool)?;
    apply_update(state, config, &generation)
}

/// Mean return over `episodes` cart-pole rollouts with episode seeds
/// `derive_seed([eval_seed, e])`. A rollout that fails yields `-inf`.
pub fn evaluate_candidate(genome: &[f64], config: &AgentConfig, episodes: usize, eval_seed: u64) -> f64 {
    let Ok(mut agent) = Agent::from_genome(config, genome) else {
        return f64::NEG_INFINITY;
    };
    let mut total = 0.0;
    for e in 0..episodes {
        match agent.run_episode(derive_seed(&[eval_seed, e as u64]), false) {
            Ok(ret) if ret.is_finite() => total += ret,
            _ => return f64::NEG_INFINITY,
        }
    }
    total / episodes as f64
}

/// Initial genome: i.i.d. `N(0, scale²)` from the state's stream.
pub fn initial_center(dim: usize, seed: u64, scale: f64) -> Vec<f64> {
    let mut rng = RngState::new(derive_seed(&[seed, 0x1417]));
    (0..dim).map(|_| scale * rng.gaussian()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modulation::ModulationKind;

    fn sphere(theta: &[f64], _seed: u64) -> f64 {
        -theta.iter().map(|t| t * t).sum::<f64>()
    }

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn rank_shape_examples() {
        assert_eq!(rank_shape(&[3.0, 1.0, 2.0]).unwrap(), vec![0.5, -0.5, 0.0]);
        assert_eq!(rank_shape(&[4.0, 4.0, 4.0]).unwrap(), vec![-0.5, 0.0, 0.5]);
        assert!(rank_shape(&[1.0]).is_err());
        let w = rank_shape(&[0.3, f64::NEG_INFINITY, 5.0, -2.0]).unwrap();
        assert_eq!(w[1], -0.5);
    }

    proptest::proptest! {
        #[test]
        fn shaped_weights_sum_to_zero_and_ignore_monotone_maps(
            f in proptest::collection::vec(-1e3f64..1e3, 2..40)
        ) {
            let w = rank_shape(&f).unwrap();
            proptest::prop_assert!(w.iter().sum::<f64>().abs() < 1e-12);
            let g: Vec<f64> = f.iter().map(|x| (x / 100.0).exp() * 3.0 - 7.0).collect();
            proptest::prop_assert_eq!(rank_shape(&g).unwrap(), w);
        }
    }

    #[test]
    fn stats_skip_crashes() {
        let s = GenerationStats::from_fitness(&[1.0, f64::NEG_INFINITY, 3.0]);
        assert_eq!(s, GenerationStats { best: 3.0, mean: 2.0, std: 1.0 });
    }

    #[test]
    fn zero_learning_rate_keeps_center() {
        let config = EsConfig {
            learning_rate: 0.0,
            population: 8,
            ..EsConfig::default()
        };
        let state = EsState::new(vec![0.3, -0.2, 0.9], 1);
        let next = es_step(&state, &config, &sphere, None).unwrap();
        assert_eq!(next.center, state.center);
        assert_eq!(next.iteration, 1);
        assert_eq!(next.history.len(), 1);
    }

    #[test]
    fn odd_population_rejected() {
        let config = EsConfig {
            population: 7,
            ..EsConfig::default()
        };
        assert!(es_step(&EsState::new(vec![0.0], 1), &config, &sphere, None).is_err());
    }

    #[test]
    fn sphere_converges() {
        let config = EsConfig {
            population: 64,
            base_seed: 1,
            ..EsConfig::default()
        };
        let dim = 10;
        let start: Vec<f64> = (0..dim).map(|_| 1.0 / (dim as f64).sqrt()).collect();
        let mut state = EsState::new(start, 1);
        for _ in 0..200 {
            state = es_step(&state, &config, &sphere, None).unwrap();
        }
        assert!(norm(&state.center) <= 0.1, "|center| = {}", norm(&state.center));
    }

    #[test]
    fn thread_count_does_not_change_result() {
        let config = EsConfig {
            population: 16,
            base_seed: 5,
            ..EsConfig::default()
        };
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let mut serial = EsState::new(vec![0.5; 6], 5);
        let mut parallel = serial.clone();
        for _ in 0..10 {
            serial = es_step(&serial, &config, &sphere, None).unwrap();
            parallel = es_step(&parallel, &config, &sphere, Some(&pool)).unwrap();
        }
        assert_eq!(serial, parallel);
    }

    #[test]
    fn candidate_fitness_is_deterministic_and_bounded() {
        let config = AgentConfig::cooperator(ModulationKind::Cooperation);
        let genome = initial_center(config.genome_len(), 3, 0.5);
        let a = evaluate_candidate(&genome, &config, 2, 99);
        assert_eq!(a.to_bits(), evaluate_candidate(&genome, &config, 2, 99).to_bits());
        assert!((-1000.0..=1000.0).contains(&a));
        let zero = evaluate_candidate(&vec![0.0; config.genome_len()], &config, 2, 99);
        assert!(zero < 0.0);
        assert_eq!(evaluate_candidate(&[0.0; 3], &config, 2, 99), f64::NEG_INFINITY);
    }
}
