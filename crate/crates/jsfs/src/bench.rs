//! Timing of precomputation and per-entry evaluation on random trees.
//!
//! Trees are built by successive random bifurcation: the set of populations
//! is split at a uniformly random point of a random permutation, and each
//! part is split again until single populations remain. Every non-root
//! population has constant size 1 and a duration drawn uniformly from
//! `[0.1, 1.0]`.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use jsfs_core::{DemographyTree, Engine, NodeSpec, SizeHistory};

use crate::entries::format_value;
use crate::error::Result;

pub const POPULATIONS: [usize; 3] = [2, 5, 10];
pub const SAMPLES_PER_POPULATION: [usize; 4] = [1, 2, 5, 10];

/// Minimum wall time spent on each measurement.
const MIN_SECONDS: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub populations: usize,
    pub per_population: usize,
    pub sample_size: usize,
    pub precompute_seconds: f64,
    pub per_entry_seconds: f64,
}

pub fn random_tree<R: Rng>(d: usize, per_population: usize, rng: &mut R) -> DemographyTree {
    let mut pops: Vec<usize> = (0..d).collect();
    pops.shuffle(rng);
    let root = split(&pops, per_population, rng, true);
    DemographyTree::new(root).expect("random trees are valid")
}

fn split<R: Rng>(pops: &[usize], n: usize, rng: &mut R, is_root: bool) -> NodeSpec {
    let duration = if is_root {
        f64::INFINITY
    } else {
        rng.random_range(0.1..=1.0)
    };
    let history = SizeHistory::constant(duration, 1.0).expect("valid history");
    if pops.len() == 1 {
        return NodeSpec::leaf(format!("p{}", pops[0]), history, n);
    }
    let cut = rng.random_range(1..pops.len());
    let left = split(&pops[..cut], n, rng, false);
    let right = split(&pops[cut..], n, rng, false);
    let name = format!("anc{}", pops.iter().map(|p| p.to_string()).collect::<Vec<_>>().join("_"));
    NodeSpec::split(name, history, vec![left, right])
}

fn random_entry<R: Rng>(sizes: &[usize], rng: &mut R) -> Vec<usize> {
    loop {
        let x: Vec<usize> = sizes.iter().map(|&n| rng.random_range(0..=n)).collect();
        if x.iter().any(|&c| c > 0) && x != sizes {
            return x;
        }
    }
}

/// Runs `f` until at least [`MIN_SECONDS`] have passed; returns the mean time
/// per call.
fn time_per_call(mut f: impl FnMut() -> Result<()>) -> Result<f64> {
    let start = Instant::now();
    let mut calls = 0u32;
    loop {
        f()?;
        calls += 1;
        let elapsed = start.elapsed().as_secs_f64();
        if elapsed >= MIN_SECONDS {
            return Ok(elapsed / calls as f64);
        }
    }
}

pub fn bench_cell(d: usize, per_population: usize, seed: u64) -> Result<BenchRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((d * 1000 + per_population) as u64);
    let tree = random_tree(d, per_population, &mut rng);
    let precompute_seconds = time_per_call(|| Engine::new(&tree).map(drop).map_err(Into::into))?;
    let engine = Engine::new(&tree)?;
    let sizes = tree.sample_sizes();
    let entries: Vec<Vec<usize>> = (0..64).map(|_| random_entry(&sizes, &mut rng)).collect();
    let per_batch = time_per_call(|| {
        for x in &entries {
            std::hint::black_box(engine.evaluate(x)?);
        }
        Ok(())
    })?;
    Ok(BenchRow {
        populations: d,
        per_population,
        sample_size: tree.total_sample_size(),
        precompute_seconds,
        per_entry_seconds: per_batch / entries.len() as f64,
    })
}

/// The full grid `POPULATIONS × SAMPLES_PER_POPULATION`.
pub fn bench_grid(seed: u64) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for d in POPULATIONS {
        for per in SAMPLES_PER_POPULATION {
            rows.push(bench_cell(d, per, seed)?);
        }
    }
    Ok(rows)
}

pub fn write_rows(rows: &[BenchRow]) -> String {
    let mut out = String::from("D\tn_per_pop\tn\tprecompute_s\tper_entry_s\n");
    for r in rows {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            r.populations,
            r.per_population,
            r.sample_size,
            format_value(r.precompute_seconds),
            format_value(r.per_entry_seconds)
        ));
    }
    out
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let logs: Vec<(f64, f64)> = points.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = logs.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = logs.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
