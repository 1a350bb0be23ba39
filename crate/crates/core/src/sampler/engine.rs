//! Adaptive Metropolis-within-Gibbs over an unconstrained parameter vector.
//!
//! Each block gets a multivariate random-walk proposal whose covariance is
//! learned from the warmup history (scaled by 2.38²/d and tuned toward 23.4%
//! acceptance), followed by a sweep of one-at-a-time random-walk updates
//! tuned toward 44%. All adaptation stops at the end of warmup, so the
//! retained draws come from a fixed kernel that leaves the target invariant.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub name: String,
    pub indices: Vec<usize>,
    /// Use a joint proposal before the coordinate sweep.
    pub joint: bool,
}

/// A log-density on an unconstrained vector, split into blocks.
pub trait Target: Sync {
    fn dim(&self) -> usize;

    fn blocks(&self) -> Vec<Block>;

    /// Every log-density term that depends on a coordinate of `block`
    /// (Jacobians included). Terms that do not involve the block may be left out.
    fn block_log_density(&self, x: &[f64], block: usize) -> f64;

    fn log_density(&self, x: &[f64]) -> f64;

    fn output_names(&self) -> Vec<String>;

    /// Appends the recorded quantities for state `x`; may draw from `rng`.
    fn emit(&self, x: &[f64], rng: &mut ChaCha20Rng, out: &mut Vec<f64>);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub n_chains: usize,
    pub iterations: usize,
    pub warmup: usize,
    pub seed: u64,
    pub thinning: usize,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            n_chains: 3,
            iterations: 10_000,
            warmup: 2_000,
            seed: 1,
            thinning: 1,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_chains == 0 {
            return Err(Error::InvalidConfig("at least one chain is required".into()));
        }
        if self.warmup >= self.iterations {
            return Err(Error::InvalidConfig(format!(
                "warmup {} must be below iterations {}",
                self.warmup, self.iterations
            )));
        }
        if self.thinning == 0 || (self.iterations - self.warmup) % self.thinning != 0 {
            return Err(Error::InvalidConfig(format!(
                "thinning {} must divide the {} retained iterations",
                self.thinning,
                self.iterations - self.warmup
            )));
        }
        Ok(())
    }

    pub fn draws_per_chain(&self) -> usize {
        (self.iterations - self.warmup) / self.thinning
    }

    /// 1-based iteration numbers of the retained draws.
    pub fn retained_iterations(&self) -> Vec<u32> {
        (1..=self.draws_per_chain())
            .map(|i| (self.warmup + i * self.thinning) as u32)
            .collect()
    }

    /// Independent stream for chain `index`.
    pub fn rng(&self, index: usize) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        rng
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Acceptance {
    pub block: String,
    /// Post-warmup acceptance of the joint move, if the block has one.
    pub joint: Option<f64>,
    /// Post-warmup acceptance of the coordinate moves.
    pub scalar: f64,
}

#[derive(Debug, Clone)]
pub struct ChainOutput {
    /// Row-major: one row of `output_names().len()` values per retained draw.
    pub draws: Vec<f64>,
    pub acceptance: Vec<Acceptance>,
}

const INITIAL_STEP: f64 = 0.1;
const TARGET_JOINT: f64 = 0.234;
const TARGET_SCALAR: f64 = 0.44;
const COV_REFRESH: usize = 50;

struct BlockState {
    indices: Vec<usize>,
    joint: bool,
    log_scale: f64,
    chol: DMatrix<f64>,
    empirical: bool,
    n: usize,
    mean: DVector<f64>,
    m2: DMatrix<f64>,
    scalar_log_step: Vec<f64>,
    joint_accepts: usize,
    scalar_accepts: usize,
    joint_tries: usize,
    scalar_tries: usize,
}

impl BlockState {
    fn new(block: &Block) -> Self {
        let d = block.indices.len();
        BlockState {
            indices: block.indices.clone(),
            joint: block.joint && d > 1,
            log_scale: 0.0,
            chol: DMatrix::identity(d, d) * INITIAL_STEP,
            empirical: false,
            n: 0,
            mean: DVector::zeros(d),
            m2: DMatrix::zeros(d, d),
            scalar_log_step: vec![INITIAL_STEP.ln(); d],
            joint_accepts: 0,
            scalar_accepts: 0,
            joint_tries: 0,
            scalar_tries: 0,
        }
    }

    fn record(&mut self, x: &[f64]) {
        let v = DVector::from_iterator(self.indices.len(), self.indices.iter().map(|&i| x[i]));
        self.n += 1;
        let delta = &v - &self.mean;
        self.mean += &delta / self.n as f64;
        let delta2 = &v - &self.mean;
        self.m2 += &delta * delta2.transpose();
    }

    fn refresh_covariance(&mut self) {
        let d = self.indices.len();
        if !self.joint || self.n < (2 * d).max(100) {
            return;
        }
        let mut cov = &self.m2 / (self.n - 1) as f64 * (2.38 * 2.38 / d as f64);
        let floor = 1e-10 * (0..d).map(|i| cov[(i, i)]).fold(0.0, f64::max).max(1e-12);
        for i in 0..d {
            cov[(i, i)] += floor;
        }
        if let Some(ch) = cov.cholesky() {
            self.chol = ch.l();
            if !self.empirical {
                self.empirical = true;
                self.log_scale = 0.0;
            }
        }
    }
}

fn accept_prob(new: f64, old: f64) -> f64 {
    if new.is_nan() || new == f64::NEG_INFINITY {
        0.0
    } else {
        (new - old).exp().min(1.0)
    }
}

/// Runs one chain from `x0`.
pub fn run_chain<T: Target>(target: &T, x0: Vec<f64>, config: &ChainConfig, chain: usize) -> Result<ChainOutput> {
    config.validate()?;
    let blocks = target.blocks();
    let mut rng = config.rng(chain);
    let mut x = x0;
    if x.len() != target.dim() {
        return Err(Error::InvalidConfig(format!(
            "initial state has {} values, target {}",
            x.len(),
            target.dim()
        )));
    }
    for (b, block) in blocks.iter().enumerate() {
        let lp = target.block_log_density(&x, b);
        if !lp.is_finite() {
            return Err(Error::InitializationFailure(format!(
                "chain {chain}: block {} has log-density {lp}",
                block.name
            )));
        }
    }
    let mut states: Vec<BlockState> = blocks.iter().map(BlockState::new).collect();
    let n_out = target.output_names().len();
    let mut draws = Vec::with_capacity(config.draws_per_chain() * n_out);
    let mut proposal = x.clone();
    for it in 0..config.iterations {
        let adapting = it < config.warmup;
        let gamma = ((it + 1) as f64).powf(-0.6);
        for (b, st) in states.iter_mut().enumerate() {
            let mut cur = target.block_log_density(&x, b);
            if st.joint {
                let d = st.indices.len();
                let z = DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
                let step = &st.chol * z * st.log_scale.exp();
                proposal.copy_from_slice(&x);
                for (k, &i) in st.indices.iter().enumerate() {
                    proposal[i] += step[k];
                }
                let new = target.block_log_density(&proposal, b);
                let a = accept_prob(new, cur);
                let accepted = rng.random::<f64>() < a;
                if accepted {
                    x.copy_from_slice(&proposal);
                    cur = new;
                }
                if adapting {
                    st.log_scale += gamma * (a - TARGET_JOINT);
                } else {
                    st.joint_tries += 1;
                    st.joint_accepts += usize::from(accepted);
                }
            }
            for k in 0..st.indices.len() {
                let i = st.indices[k];
                let old = x[i];
                let z: f64 = rng.sample(StandardNormal);
                x[i] = old + st.scalar_log_step[k].exp() * z;
                let new = target.block_log_density(&x, b);
                let a = accept_prob(new, cur);
                let accepted = rng.random::<f64>() < a;
                if accepted {
                    cur = new;
                } else {
                    x[i] = old;
                }
                if adapting {
                    st.scalar_log_step[k] += gamma * (a - TARGET_SCALAR);
                } else {
                    st.scalar_tries += 1;
                    st.scalar_accepts += usize::from(accepted);
                }
            }
            if adapting {
                st.record(&x);
                if (it + 1) % COV_REFRESH == 0 {
                    st.refresh_covariance();
                }
            }
        }
        if it >= config.warmup && (it + 1 - config.warmup) % config.thinning == 0 {
            let before = draws.len();
            target.emit(&x, &mut rng, &mut draws);
            debug_assert_eq!(draws.len() - before, n_out);
        }
    }
    let rate = |a: usize, n: usize| if n == 0 { 0.0 } else { a as f64 / n as f64 };
    let acceptance = blocks
        .iter()
        .zip(&states)
        .map(|(b, st)| Acceptance {
            block: b.name.clone(),
            joint: st.joint.then(|| rate(st.joint_accepts, st.joint_tries)),
            scalar: rate(st.scalar_accepts, st.scalar_tries),
        })
        .collect();
    Ok(ChainOutput { draws, acceptance })
}

/// Runs `config.n_chains` chains in parallel; `init(chain)` supplies starting points.
pub fn run_chains<T, F>(target: &T, config: &ChainConfig, init: F) -> Result<Vec<ChainOutput>>
where
    T: Target,
    F: Fn(usize) -> Vec<f64> + Sync,
{
    use rayon::prelude::*;
    config.validate()?;
    (0..config.n_chains)
        .into_par_iter()
        .map(|c| run_chain(target, init(c), config, c))
        .collect()
}

#[cfg(test)]
pub(crate) mod toy {
    use super::*;

    /// `x_i ~ N(mu, s2)`, `mu ~ N(m0, v0)`: one unknown, closed-form posterior.
    /// A second, independent coordinate `w ~ N(0, 1)` sits in its own block.
    pub struct NormalNormal {
        pub data: Vec<f64>,
        pub s2: f64,
        pub m0: f64,
        pub v0: f64,
    }

    impl NormalNormal {
        pub fn posterior(&self) -> (f64, f64) {
            let n = self.data.len() as f64;
            let prec = 1.0 / self.v0 + n / self.s2;
            let mean = (self.m0 / self.v0 + self.data.iter().sum::<f64>() / self.s2) / prec;
            (mean, 1.0 / prec)
        }
    }

    impl Target for NormalNormal {
        fn dim(&self) -> usize {
            2
        }

        fn blocks(&self) -> Vec<Block> {
            vec![
                Block {
                    name: "mu".into(),
                    indices: vec![0],
                    joint: false,
                },
                Block {
                    name: "w".into(),
                    indices: vec![1],
                    joint: false,
                },
            ]
        }

        fn block_log_density(&self, x: &[f64], block: usize) -> f64 {
            if block == 0 {
                let mu = x[0];
                let lik: f64 = self.data.iter().map(|d| -0.5 * (d - mu).powi(2) / self.s2).sum();
                lik - 0.5 * (mu - self.m0).powi(2) / self.v0
            } else {
                -0.5 * x[1] * x[1]
            }
        }

        fn log_density(&self, x: &[f64]) -> f64 {
            self.block_log_density(x, 0) + self.block_log_density(x, 1)
        }

        fn output_names(&self) -> Vec<String> {
            vec!["mu".into(), "w".into()]
        }

        fn emit(&self, x: &[f64], _rng: &mut ChaCha20Rng, out: &mut Vec<f64>) {
            out.extend_from_slice(x);
        }
    }

    /// Correlated bivariate Normal in one joint block.
    pub struct Correlated {
        pub rho: f64,
        pub scale: [f64; 2],
    }

    impl Target for Correlated {
        fn dim(&self) -> usize {
            2
        }

        fn blocks(&self) -> Vec<Block> {
            vec![Block {
                name: "xy".into(),
                indices: vec![0, 1],
                joint: true,
            }]
        }

        fn block_log_density(&self, x: &[f64], _: usize) -> f64 {
            let (a, b) = (x[0] / self.scale[0], x[1] / self.scale[1]);
            -0.5 * (a * a - 2.0 * self.rho * a * b + b * b) / (1.0 - self.rho * self.rho)
        }

        fn log_density(&self, x: &[f64]) -> f64 {
            self.block_log_density(x, 0)
        }

        fn output_names(&self) -> Vec<String> {
            vec!["x".into(), "y".into()]
        }

        fn emit(&self, x: &[f64], _rng: &mut ChaCha20Rng, out: &mut Vec<f64>) {
            out.extend_from_slice(x);
        }
    }
}
