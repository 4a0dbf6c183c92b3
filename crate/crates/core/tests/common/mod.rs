#![allow(dead_code)]

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use simcache::cost::{DualState, PrimalState};
use simcache::model::{Catalog, DissimilarityMatrix, Edge, Network, Request, Scenario, SourceMap};
use simcache::scenario::{generate_seeded, shortest_path, GenConfig};

pub fn default_scenario(seed: u64) -> Scenario<f64> {
    generate_seeded(&GenConfig { seed, ..GenConfig::default() }).unwrap()
}

pub fn small_scenario(seed: u64) -> Scenario<f64> {
    let g = GenConfig {
        nodes_side: 3,
        num_contents: 4,
        num_requests: 6,
        num_origins: 4,
        capacity: 1,
        seed,
        ..GenConfig::default()
    };
    generate_seeded(&g).unwrap()
}

/// Path n0 - n1 - n2, two contents, unit capacities, two requests.
pub fn tiny_instance(seed: u64) -> Scenario<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = Network::new(
        vec!["n0".into(), "n1".into(), "n2".into()],
        vec![
            Edge { u: 0, v: 1, delay: rng.random_range(1.0..10.0) },
            Edge { u: 1, v: 2, delay: rng.random_range(1.0..10.0) },
        ],
    );
    let sources: Vec<Vec<usize>> = (0..2).map(|_| vec![rng.random_range(0..3)]).collect();
    let requests = (0..2)
        .map(|_| {
            let content = rng.random_range(0..2);
            let origin = rng.random_range(0..3);
            Request {
                content,
                path: shortest_path(&net, origin, sources[content][0]).unwrap(),
                rate: 1.0,
            }
        })
        .collect();
    Scenario::new(
        Catalog::ranked(2),
        net,
        SourceMap::new(sources),
        requests,
        DissimilarityMatrix::power_law(2, 3.0),
        vec![1; 3],
        1.0,
    )
}

/// Strictly interior primal point and a positive dual point.
pub fn random_interior(s: &Scenario<f64>, rng: &mut impl Rng) -> (PrimalState<f64>, DualState<f64>) {
    let x = Array2::from_shape_fn((s.num_nodes(), s.num_contents()), |_| rng.random_range(0.05..0.95));
    let q = Array2::from_shape_fn((s.num_requests(), s.num_contents()), |_| rng.random_range(0.05..0.95));
    let mu = Array2::from_shape_fn((s.num_requests(), s.num_contents()), |_| rng.random_range(0.0..5.0));
    (PrimalState { x, q }, DualState { mu })
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

/// Projection onto the capped box by enumerating which free coordinates sit
/// at 0, at 1 or strictly between, with the capacity constraint either slack
/// or tight; the nearest feasible candidate is the projection.
pub fn qp_cache_oracle(x: &[f64], capacity: usize, pinned: &[bool]) -> Vec<f64> {
    let free: Vec<usize> = (0..x.len()).filter(|&i| !pinned[i]).collect();
    let cap = capacity as f64;
    let mut best: Option<Vec<f64>> = None;
    let combos = 3usize.pow(free.len() as u32);
    for code in 0..combos {
        let mut state = vec![0u8; free.len()];
        let mut c = code;
        for s in state.iter_mut() {
            *s = (c % 3) as u8;
            c /= 3;
        }
        let mid: Vec<usize> = (0..free.len()).filter(|&k| state[k] == 2).map(|k| free[k]).collect();
        let ones = state.iter().filter(|&&s| s == 1).count() as f64;
        let mut thetas = vec![0.0];
        if !mid.is_empty() {
            thetas.push((mid.iter().map(|&i| x[i]).sum::<f64>() + ones - cap) / mid.len() as f64);
        }
        for theta in thetas {
            let mut y: Vec<f64> = (0..x.len()).map(|i| if pinned[i] { 1.0 } else { 0.0 }).collect();
            for (k, &i) in free.iter().enumerate() {
                y[i] = match state[k] {
                    0 => 0.0,
                    1 => 1.0,
                    _ => x[i] - theta,
                };
            }
            let feasible = free.iter().all(|&i| (-1e-12..=1.0 + 1e-12).contains(&y[i]))
                && free.iter().map(|&i| y[i]).sum::<f64>() <= cap + 1e-12;
            if feasible && best.as_ref().is_none_or(|b| dist2(&y, x) < dist2(b, x)) {
                best = Some(y);
            }
        }
    }
    best.expect("zero vector on free coordinates is always feasible")
}

/// Projection onto the probability simplex by enumerating the support.
pub fn qp_simplex_oracle(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut best: Option<Vec<f64>> = None;
    for mask in 1u32..(1 << n) {
        let support: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
        let theta = (support.iter().map(|&i| x[i]).sum::<f64>() - 1.0) / support.len() as f64;
        let mut y = vec![0.0; n];
        for &i in &support {
            y[i] = x[i] - theta;
        }
        if y.iter().all(|&v| v >= -1e-12) && best.as_ref().is_none_or(|b| dist2(&y, x) < dist2(b, x)) {
            best = Some(y);
        }
    }
    best.unwrap()
}
