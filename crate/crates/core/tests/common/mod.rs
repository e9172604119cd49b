//! Brute-force reference implementations shared by the integration tests.

#![allow(dead_code)]

use rand::Rng;
use vcell::rate::{cell_sum_rate, CellView, ChannelAssignment};
use vcell::scenario::Point;
use vcell::tensor::Matrix;

pub fn random_points<R: Rng>(rng: &mut R, n: usize, side: f64) -> Vec<Point> {
    (0..n)
        .map(|_| Point { x: rng.random_range(0.0..side), y: rng.random_range(0.0..side) })
        .collect()
}

/// Points on a coarse integer grid, so that distance ties actually occur.
pub fn grid_points<R: Rng>(rng: &mut R, n: usize, cells: u32) -> Vec<Point> {
    (0..n)
        .map(|_| Point { x: rng.random_range(0..cells) as f64, y: rng.random_range(0..cells) as f64 })
        .collect()
}

/// Scans every member as a candidate center in ascending index order; the
/// first minimum wins.
pub fn radius_by_scan(points: &[Point], members: &[usize]) -> (f64, usize) {
    let mut candidates = members.to_vec();
    candidates.sort_unstable();
    let mut best = (f64::INFINITY, usize::MAX);
    for &c in &candidates {
        let mut worst: f64 = 0.0;
        for &j in members {
            worst = worst.max(points[c].distance(&points[j]));
        }
        if worst < best.0 {
            best = (worst, c);
        }
    }
    best
}

pub fn linkage_by_scan(points: &[Point], a: &[usize], b: &[usize]) -> f64 {
    let union: Vec<usize> = a.iter().chain(b).copied().collect();
    radius_by_scan(points, &union).0
}

/// Best total over every partial one-to-one matching, summing row by row.
pub fn matching_by_enumeration(w: &Matrix) -> f64 {
    fn go(w: &Matrix, row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
        if row == w.rows() {
            *best = best.max(acc);
            return;
        }
        go(w, row + 1, used, acc, best);
        for c in 0..w.cols() {
            if !used[c] {
                used[c] = true;
                go(w, row + 1, used, acc + w.at(row, c), best);
                used[c] = false;
            }
        }
    }
    let mut best = 0.0;
    go(w, 0, &mut vec![false; w.cols()], 0.0, &mut best);
    best
}

/// Total of a given matching, summed row by row like the enumeration.
pub fn matching_total(w: &Matrix, row_to_col: &[Option<usize>]) -> f64 {
    let mut acc = 0.0;
    for (r, c) in row_to_col.iter().enumerate() {
        if let Some(c) = c {
            acc += w.at(r, *c);
        }
    }
    acc
}

/// Per-user power splits over `nk` bands with each band at `l/levels·P̄`,
/// `l ∈ 0..=levels`, and the total within budget.
pub fn power_splits(nk: usize, levels: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0; nk];
    fn go(k: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k == cur.len() {
            out.push(cur.clone());
            return;
        }
        for l in 0..=left {
            cur[k] = l;
            go(k + 1, left - l, cur, out);
        }
    }
    go(0, levels, &mut cur, &mut out);
    out
}

/// Exhaustive discrete optimum of a tiny cell: every assignment with at most
/// one BS per (user, band), and every gridded per-user power split.
pub fn discrete_optimum(view: &CellView, levels: usize) -> f64 {
    let [nu, nb, nk] = view.dims();
    let choices = nb + 1;
    let assignments = choices.pow((nu * nk) as u32);
    let splits = power_splits(nk, levels);
    let mut best: f64 = 0.0;
    let mut gammas = Vec::with_capacity(assignments);
    for code in 0..assignments {
        let mut g = ChannelAssignment::empty([nu, nb, nk]);
        let mut c = code;
        for u in 0..nu {
            for k in 0..nk {
                let pick = c % choices;
                c /= choices;
                if pick > 0 {
                    g.gamma.set(u, pick - 1, k, true);
                }
            }
        }
        gammas.push(g);
    }
    let combos = splits.len().pow(nu as u32);
    for combo in 0..combos {
        let mut c = combo;
        let p = {
            let mut m = Matrix::zeros(nu, nk);
            for u in 0..nu {
                let s = &splits[c % splits.len()];
                c /= splits.len();
                for k in 0..nk {
                    m.set(u, k, view.budgets[u] * s[k] as f64 / levels as f64);
                }
            }
            m
        };
        for g in &gammas {
            best = best.max(cell_sum_rate(view, g, &p));
        }
    }
    best
}
