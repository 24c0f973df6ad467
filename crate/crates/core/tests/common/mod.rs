#![allow(dead_code)]

use nalgebra::DMatrix;
use nlbiplot::{Baseline, NominalDataset, VariableParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TERSCHELLING: &str = include_str!("../../../cli/data/terschelling.csv");

/// The 20-farm dune meadow table, first column used as row id.
pub fn terschelling() -> NominalDataset {
    let mut lines = TERSCHELLING.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> = lines.next().unwrap().split(',').map(|s| s.trim().to_string()).collect();
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for line in lines {
        let cells: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
        ids.push(cells[0].clone());
        rows.push(cells[1..].to_vec());
    }
    NominalDataset::from_labels(Some(ids), header[1..].to_vec(), &rows, None).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn standard_normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn random_params(rng: &mut impl Rng, k: usize, dims: usize, scale: f64, baseline: Baseline) -> VariableParams {
    let b0 = (0..k - 1).map(|_| rng.random_range(-scale..scale)).collect();
    let b = DMatrix::from_fn(k - 1, dims, |_, _| rng.random_range(-scale..scale));
    VariableParams::new(b0, b, baseline)
}

/// Samples a category from probabilities.
pub fn draw(rng: &mut impl Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs.len() - 1
}

/// Simulated table: true latent points, true parameters and the coded data.
pub struct Simulated {
    pub scores: Vec<Vec<f64>>,
    pub params: Vec<VariableParams>,
    pub dataset: NominalDataset,
}

pub fn simulate(seed: u64, rows: usize, levels: &[usize], dims: usize, slope_scale: f64) -> Simulated {
    let mut r = rng(seed);
    let params: Vec<VariableParams> = levels
        .iter()
        .map(|&k| {
            let b0 = (0..k - 1).map(|_| r.random_range(-0.5..0.5)).collect();
            let b = DMatrix::from_fn(k - 1, dims, |_, _| slope_scale * standard_normal(&mut r));
            VariableParams::new(b0, b, Baseline::Last)
        })
        .collect();
    loop {
        let scores: Vec<Vec<f64>> = (0..rows)
            .map(|_| (0..dims).map(|_| standard_normal(&mut r)).collect())
            .collect();
        let codes: Vec<Vec<usize>> = scores
            .iter()
            .map(|y| params.iter().map(|p| draw(&mut r, &nlbiplot::category_probabilities(p, y))).collect())
            .collect();
        let all_seen = (0..levels.len()).all(|j| (0..levels[j]).all(|k| codes.iter().any(|c| c[j] == k)));
        if !all_seen {
            continue;
        }
        let names = (0..levels.len()).map(|j| format!("v{j}")).collect();
        let cats = levels.iter().map(|&k| (0..k).map(|c| format!("c{c}")).collect()).collect();
        let ids = (1..=rows).map(|i| i.to_string()).collect();
        let dataset = NominalDataset::new(ids, names, cats, codes).unwrap();
        return Simulated { scores, params, dataset };
    }
}
