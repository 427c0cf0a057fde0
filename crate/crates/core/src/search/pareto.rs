//! Pareto front over `(A_loss, E)`: lower loss and higher energy efficiency win.

use crate::error::{Error, Result};

/// `p` dominates `q` when it is no worse on both axes and strictly better on one.
pub fn dominates(p: (f64, f64), q: (f64, f64)) -> bool {
    p.0 <= q.0 && p.1 >= q.1 && (p.0 < q.0 || p.1 > q.1)
}

/// Indices of the non-dominated points, ascending. Sorts by loss and sweeps
/// once, tracking the best efficiency seen at strictly smaller loss.
pub fn pareto_front(points: &[(f64, f64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a].0.total_cmp(&points[b].0).then(points[b].1.total_cmp(&points[a].1)));

    let mut front = Vec::new();
    let mut best_prev = f64::NEG_INFINITY;
    let mut i = 0;
    while i < order.len() {
        let loss = points[order[i]].0;
        let group_max = points[order[i]].1;
        let mut j = i;
        while j < order.len() && points[order[j]].0 == loss {
            let e = points[order[j]].1;
            if e == group_max && e > best_prev {
                front.push(order[j]);
            }
            j += 1;
        }
        best_prev = best_prev.max(group_max);
        i = j;
    }
    front.sort_unstable();
    front
}

/// Quadratic reference implementation.
pub fn pareto_front_bruteforce(points: &[(f64, f64)]) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| !points.iter().any(|&q| dominates(q, points[i])))
        .collect()
}

/// Positions of the two lowest-ranked keys. Keys are `(score, A_loss, group)`
/// and compare lexicographically. A single member is returned twice.
pub fn pick_two(keys: &[(f64, f64, usize)]) -> Result<(usize, usize)> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| super::cmp_keys(&keys[a], &keys[b]));
    match order.as_slice() {
        [] => Err(Error::NoFeasibleCandidate),
        [only] => Ok((*only, *only)),
        [first, second, ..] => Ok((*first, *second)),
    }
}
