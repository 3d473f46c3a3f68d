//! Replica-parallel estimators.
//!
//! Replicas are independent noise streams; results are collected in replica
//! order and reduced sequentially, so the answer never depends on the pool size.

use lorenzlab_core::estimators::{finish_estimate, growth_replica, mc_replica, EstimateWithCI, Method, ReplicaStats};
use lorenzlab_core::sde::SimConfig;
use lorenzlab_core::threshold::{scaled_config, FnOracle};
use lorenzlab_core::{DerivedConsts, Error, Result};
use rayon::prelude::*;

use crate::error::{CliError, CliResult};

/// Pool with `threads` workers, or one per available core.
pub fn pool(threads: Option<usize>) -> CliResult<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| CliError::Usage(format!("thread pool: {e}")))
}

pub fn run_replicas(
    method: Method,
    cfg: &SimConfig,
    replicas: u64,
    kernel: impl Fn(&SimConfig) -> Result<ReplicaStats> + Sync,
) -> Result<EstimateWithCI> {
    if replicas == 0 {
        return Err(Error::InvalidConfig("replicas must be at least 1".into()));
    }
    let parts = (0..replicas)
        .into_par_iter()
        .map(|i| {
            kernel(&SimConfig {
                stream_id: cfg.stream_id + i,
                ..*cfg
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(finish_estimate(method, &parts, cfg.seed))
}

pub fn lambda_mc(alpha: f64, cfg: &SimConfig, c: &DerivedConsts, replicas: u64) -> Result<EstimateWithCI> {
    run_replicas(Method::Mc, cfg, replicas, |k| mc_replica(k, c, alpha))
}

pub fn lambda_growth(alpha: f64, cfg: &SimConfig, c: &DerivedConsts, replicas: u64) -> Result<EstimateWithCI> {
    run_replicas(Method::Growth, cfg, replicas, |k| growth_replica(k, c, alpha))
}

/// Threshold oracle running the replicas of each point in parallel, with common random numbers.
pub fn mc_oracle<'a>(
    c: &'a DerivedConsts,
    cfg: &'a SimConfig,
    replicas: u64,
) -> FnOracle<impl FnMut(f64, u32) -> Result<EstimateWithCI> + 'a> {
    FnOracle {
        method: Method::Mc,
        f: move |alpha, level| lambda_mc(alpha, &scaled_config(cfg, level), c, replicas),
    }
}
