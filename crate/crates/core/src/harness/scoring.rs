use serde::{Deserialize, Serialize};

use crate::numerics::C64;
use crate::recovery::SpikeModel;

/// Sets up to this size are matched by enumerating permutations.
pub const BRUTE_FORCE_LIMIT: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    /// Largest matched `|Δx|`, plus `diameter` for every unmatched spike.
    pub location_error: f64,
    /// Largest matched `|Δw|`, plus `|w|` of every unmatched spike.
    pub weight_error: f64,
}

/// `pairs[i] = j` assigns row `i` to column `j`; requires `rows ≤ cols`.
fn brute_force(cost: &[Vec<f64>]) -> Vec<usize> {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    let mut best = (f64::INFINITY, Vec::new());
    let mut used = vec![false; cols];
    let mut current = Vec::with_capacity(rows);
    fn go(
        cost: &[Vec<f64>],
        used: &mut [bool],
        current: &mut Vec<usize>,
        total: f64,
        best: &mut (f64, Vec<usize>),
    ) {
        if total >= best.0 {
            return;
        }
        let i = current.len();
        if i == cost.len() {
            *best = (total, current.clone());
            return;
        }
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                current.push(j);
                go(cost, used, current, total + cost[i][j], best);
                current.pop();
                used[j] = false;
            }
        }
    }
    go(cost, &mut used, &mut current, 0.0, &mut best);
    best.1
}

/// Hungarian method with potentials, `O(rows² · cols)`; requires `rows ≤ cols`.
fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let m = cost.first().map_or(0, Vec::len);
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    // p[j] = row matched to column j (1-based, 0 = free)
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut pairs = vec![0; n];
    for j in 1..=m {
        if p[j] != 0 {
            pairs[p[j] - 1] = j - 1;
        }
    }
    pairs
}

/// Assignment minimising the total distance; returns `(index in a, index in b)`.
pub fn optimal_matching(a: &[C64], b: &[C64]) -> Vec<(usize, usize)> {
    let transpose = a.len() > b.len();
    let (rows, cols) = if transpose { (b, a) } else { (a, b) };
    if rows.is_empty() {
        return Vec::new();
    }
    let cost: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| cols.iter().map(|c| (r - c).norm()).collect())
        .collect();
    let pairs = if cols.len() <= BRUTE_FORCE_LIMIT {
        brute_force(&cost)
    } else {
        hungarian(&cost)
    };
    pairs
        .into_iter()
        .enumerate()
        .map(|(i, j)| if transpose { (j, i) } else { (i, j) })
        .collect()
}

pub fn match_and_score(truth: &SpikeModel, estimate: &SpikeModel, diameter: f64) -> Score {
    let pairs = optimal_matching(&truth.locations, &estimate.locations);
    let mut location_error: f64 = 0.0;
    let mut weight_error: f64 = 0.0;
    let mut truth_hit = vec![false; truth.len()];
    let mut est_hit = vec![false; estimate.len()];
    for &(i, j) in &pairs {
        truth_hit[i] = true;
        est_hit[j] = true;
        location_error = location_error.max((truth.locations[i] - estimate.locations[j]).norm());
        weight_error = weight_error.max((truth.weights[i] - estimate.weights[j]).norm());
    }
    let unmatched = truth_hit.iter().filter(|h| !**h).count() + est_hit.iter().filter(|h| !**h).count();
    location_error += unmatched as f64 * diameter;
    weight_error += truth_hit
        .iter()
        .zip(&truth.weights)
        .chain(est_hit.iter().zip(&estimate.weights))
        .filter(|(hit, _)| !**hit)
        .map(|(_, w)| w.norm())
        .sum::<f64>();
    Score { location_error, weight_error }
}
