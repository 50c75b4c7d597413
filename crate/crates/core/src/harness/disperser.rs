//! Output-support and distance experiments for the full pipeline.

use rayon::prelude::*;
use serde::Serialize;

use crate::bits::BitString;
use crate::challenge::wilson_interval;
use crate::error::{Error, Result};
use crate::pipeline::{subext, PipelineConfig};
use crate::rng;
use crate::source::ExplicitSource;

use super::{ExperimentConfig, SampleFrom};

/// Trials per parallel chunk; each chunk draws from its own derived stream.
const CHUNK: u64 = 1024;

/// Widest output the histogram is kept for.
pub const MAX_OUTPUT_BITS: usize = 20;

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct OutputCount {
    pub value: BitString,
    pub count: u64,
    pub ci95: (f64, f64),
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Claim {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DisperserReport {
    pub m: usize,
    pub trials: u64,
    pub seed: u64,
    pub output_support_coverage: f64,
    pub empirical_sd: f64,
    /// `min(m, floor(log2(1 / sd)))`, or `m` when the histogram is exactly
    /// uniform.
    pub certified_width: usize,
    pub outputs: Vec<OutputCount>,
    pub claims: Vec<Claim>,
    pub pass: bool,
}

/// Samples `trials` pairs from `x` and `y`, applies `f` and aggregates the
/// output histogram.
pub fn disperser_experiment<F>(x: &ExplicitSource, y: &ExplicitSource, m: usize, f: F, trials: u64, seed: u64) -> Result<DisperserReport>
where
    F: Fn(&BitString, &BitString) -> Result<BitString> + Sync,
{
    if trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    if m == 0 || m > MAX_OUTPUT_BITS {
        return Err(Error::Config(format!("output width {m} outside 1..={MAX_OUTPUT_BITS}")));
    }
    let (sx, sy) = (x.sampler(), y.sampler());
    let chunks = trials.div_ceil(CHUNK);
    let merged = (0..chunks)
        .into_par_iter()
        .map(|c| -> Result<Vec<u64>> {
            let mut r = rng::derive(seed, c);
            let mut hist = vec![0u64; 1 << m];
            for _ in 0..CHUNK.min(trials - c * CHUNK) {
                let (a, b) = (sx.sample(&mut r), sy.sample(&mut r));
                let out = f(&a, &b)?;
                if out.len() != m {
                    return Err(Error::WidthMismatch { expected: m, found: out.len() });
                }
                hist[out.to_u64() as usize] += 1;
            }
            Ok(hist)
        })
        .try_reduce(|| vec![0u64; 1 << m], |a, b| Ok(a.iter().zip(&b).map(|(p, q)| p + q).collect()))?;
    Ok(summarize(m, trials, seed, &merged))
}

fn summarize(m: usize, trials: u64, seed: u64, hist: &[u64]) -> DisperserReport {
    let size = hist.len() as f64;
    let hit = hist.iter().filter(|&&c| c > 0).count();
    let coverage = hit as f64 / size;
    let sd = 0.5 * hist.iter().map(|&c| (c as f64 / trials as f64 - 1.0 / size).abs()).sum::<f64>();
    let certified_width = if sd <= 0.0 { m } else { m.min((1.0 / sd).log2().floor().max(0.0) as usize) };
    let outputs: Vec<OutputCount> = hist
        .iter()
        .enumerate()
        .map(|(i, &count)| OutputCount { value: BitString::from_u64(i as u64, m), count, ci95: wilson_interval(count, trials) })
        .collect();
    let missing: Vec<String> = outputs.iter().filter(|o| o.count == 0).map(|o| o.value.to_string()).collect();
    let full = Claim {
        name: "full-support".into(),
        pass: missing.is_empty(),
        detail: if missing.is_empty() { format!("all {} outputs hit", hist.len()) } else { format!("missing {}", missing.join(",")) },
    };
    let pass = full.pass;
    DisperserReport {
        m,
        trials,
        seed,
        output_support_coverage: coverage,
        empirical_sd: sd,
        certified_width,
        outputs,
        claims: vec![full],
        pass,
    }
}

/// Runs the configured experiment: fixtures are validated first and pairs are
/// drawn from the full fixtures or their conditioned subsources.
pub fn run_disperser_experiment(cfg: &ExperimentConfig) -> Result<DisperserReport> {
    cfg.check()?;
    let x = cfg.x.load()?;
    let y = cfg.y.load()?;
    x.require_valid()?;
    y.require_valid()?;
    let (xs, ys, pipeline) = match cfg.sample_from {
        SampleFrom::Full => (x.source.clone(), y.source.clone(), PipelineConfig::build(&cfg.pipeline)?),
        SampleFrom::Conditioned => {
            let setup = super::fixtures::build_setup(x, y, &cfg.pipeline)?;
            (setup.x_fi, setup.y_fi, setup.cfg)
        }
    };
    disperser_experiment(&xs, &ys, pipeline.m, |a, b| subext(a, b, &pipeline), cfg.trials, cfg.seed)
}
