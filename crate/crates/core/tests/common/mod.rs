#![allow(dead_code)]

use growthnet::NetworkModel;

pub const KAPPAS: [f64; 4] = [0.5, 1.0, 2.0, 8.0];

/// Tiny models for oracle comparisons: m <= 12, f <= 4, one to three
/// classes with dissociation constants from [`KAPPAS`].
pub fn oracle_grid() -> Vec<NetworkModel> {
    let mut shapes: Vec<Vec<(f64, u64)>> = Vec::new();
    for &k in &KAPPAS {
        for f in 1..=4 {
            shapes.push(vec![(k, f)]);
        }
    }
    for (i, &a) in KAPPAS.iter().enumerate() {
        for &b in &KAPPAS[i + 1..] {
            shapes.push(vec![(a, 1), (b, 1)]);
            shapes.push(vec![(a, 2), (b, 1)]);
            shapes.push(vec![(a, 1), (b, 3)]);
        }
    }
    shapes.push(vec![(0.5, 1), (1.0, 1), (2.0, 1)]);
    shapes.push(vec![(0.5, 2), (2.0, 1), (8.0, 1)]);
    shapes.push(vec![(1.0, 1), (2.0, 1), (8.0, 2)]);
    shapes.push(vec![(0.5, 1), (1.0, 2), (8.0, 1)]);

    let ms = [0u64, 1, 2, 3, 5, 8, 12];
    let mut out = Vec::new();
    for (s, shape) in shapes.iter().enumerate() {
        // two sizes per shape, cycling through ms
        for m in [ms[s % ms.len()], 12 - (s as u64 % 4)] {
            out.push(NetworkModel::new(m, shape).unwrap());
        }
    }
    out.push(NetworkModel::new(2, &[(1.0, 2)]).unwrap());
    out
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn mean_of(p: &[f64]) -> f64 {
    p.iter().enumerate().map(|(j, q)| j as f64 * q).sum()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
