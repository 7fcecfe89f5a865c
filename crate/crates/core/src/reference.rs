//! Slow, exact reference implementations used by the test suites as
//! independent oracles. Nothing here calls the cone-program machinery: the
//! 1-D results come from dynamic programming on breakpoint grids, the 2-D
//! results from dense grid search, and the Lyapunov reference from direct
//! series summation.

use nalgebra::{DMatrix, DVector};

/// Exact minimum chase cost over 1-D intervals.
///
/// Minimizes `Σ |q_s − q_{s−1}|` with `q_0 = anchor`, `q_s ∈ [lo_s, hi_s]`,
/// by dynamic programming over the breakpoint grid (the anchor and every
/// interval endpoint): some optimal trajectory only takes values there,
/// because any free stretch between pinned values can be made monotone.
pub fn interval_chase_optimal(intervals: &[(f64, f64)], anchor: f64) -> f64 {
    let (cost, _) = interval_chase_dp(intervals, anchor, None);
    cost
}

/// Exact 1-D work-function conjugate at a unit direction `v ∈ {−1, +1}`.
///
/// Uses `inf_x |x − q| − v·x = −v·q` for `|v| = 1`, then the same
/// breakpoint dynamic program with terminal cost `−v·q_t`.
pub fn interval_work_conjugate(intervals: &[(f64, f64)], anchor: f64, v: f64) -> f64 {
    assert!((v.abs() - 1.0).abs() < 1e-12, "v must be ±1");
    let (cost, _) = interval_chase_dp(intervals, anchor, Some(v));
    cost
}

fn interval_chase_dp(
    intervals: &[(f64, f64)],
    anchor: f64,
    terminal_direction: Option<f64>,
) -> (f64, Vec<f64>) {
    assert!(!intervals.is_empty());
    let mut grid = vec![anchor];
    for &(lo, hi) in intervals {
        assert!(lo <= hi, "empty interval");
        grid.push(lo);
        grid.push(hi);
    }
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup();
    let g = grid.len();

    let feasible = |s: usize, j: usize| -> bool {
        let (lo, hi) = intervals[s];
        grid[j] >= lo - 1e-12 && grid[j] <= hi + 1e-12
    };

    let mut dp = vec![f64::INFINITY; g];
    for j in 0..g {
        if feasible(0, j) {
            dp[j] = (grid[j] - anchor).abs();
        }
    }
    for s in 1..intervals.len() {
        let mut next = vec![f64::INFINITY; g];
        for j in 0..g {
            if !feasible(s, j) {
                continue;
            }
            for i in 0..g {
                if dp[i].is_finite() {
                    next[j] = next[j].min(dp[i] + (grid[j] - grid[i]).abs());
                }
            }
        }
        dp = next;
    }
    let mut best = f64::INFINITY;
    for j in 0..g {
        if dp[j].is_finite() {
            let terminal = terminal_direction.map_or(0.0, |v| -v * grid[j]);
            best = best.min(dp[j] + terminal);
        }
    }
    (best, grid)
}

/// Axis-aligned box in the plane, for grid oracles.
#[derive(Debug, Clone, Copy)]
pub struct PlaneBox {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl PlaneBox {
    fn grid(&self, pitch: f64) -> Vec<[f64; 2]> {
        let steps =
            |lo: f64, hi: f64| (((hi - lo) / pitch).ceil() as usize).max(1);
        let (sx, sy) = (steps(self.lo[0], self.hi[0]), steps(self.lo[1], self.hi[1]));
        let mut pts = Vec::with_capacity((sx + 1) * (sy + 1));
        for ix in 0..=sx {
            let x = self.lo[0] + (self.hi[0] - self.lo[0]) * ix as f64 / sx as f64;
            for iy in 0..=sy {
                let y = self.lo[1] + (self.hi[1] - self.lo[1]) * iy as f64 / sy as f64;
                pts.push([x, y]);
            }
        }
        pts
    }
}

/// Dense grid evaluation of the 2-D work-function conjugate over box
/// requests: layer-by-layer dynamic programming on each box's grid, with
/// the free endpoint eliminated through `inf_x ‖x − q‖ − v·x = −v·q`
/// (exact for `‖v‖ = 1`).
///
/// The result overestimates the true infimum by at most the total
/// grid-rounding error, about `2·(number of sets)·pitch`.
pub fn grid_conjugate_2d(
    boxes: &[PlaneBox],
    anchor: [f64; 2],
    v: [f64; 2],
    pitch: f64,
) -> f64 {
    assert!(!boxes.is_empty());
    assert!(((v[0] * v[0] + v[1] * v[1]).sqrt() - 1.0).abs() < 1e-9);
    let dist = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();

    let first = boxes[0].grid(pitch);
    let mut layer = first;
    let mut dp: Vec<f64> = layer.iter().map(|&p| dist(p, anchor)).collect();
    for b in &boxes[1..] {
        let next_layer = b.grid(pitch);
        let mut next_dp = vec![f64::INFINITY; next_layer.len()];
        for (j, &pj) in next_layer.iter().enumerate() {
            let mut best = f64::INFINITY;
            for (i, &pi) in layer.iter().enumerate() {
                let c = dp[i] + dist(pi, pj);
                if c < best {
                    best = c;
                }
            }
            next_dp[j] = best;
        }
        layer = next_layer;
        dp = next_dp;
    }
    layer
        .iter()
        .zip(dp.iter())
        .map(|(&p, &c)| c - (v[0] * p[0] + v[1] * p[1]))
        .fold(f64::INFINITY, f64::min)
}

/// Truncated series `Σ_{i=0}^{terms} (Fᵀ)^i M F^i` for the discrete
/// Lyapunov equation `X − FᵀXF = M`.
pub fn dlyap_series(f: &DMatrix<f64>, m: &DMatrix<f64>, terms: usize) -> DMatrix<f64> {
    let mut acc = m.clone();
    let mut power = m.clone();
    for _ in 1..=terms {
        power = f.transpose() * &power * f;
        acc += &power;
    }
    acc
}

/// Grid-search distance from `z` to the set `{y : a_i·y ≤ b_i}` inside the
/// scan box, evaluating the raw inequalities directly.
pub fn grid_project_distance(
    halfspaces: &[(DVector<f64>, f64)],
    scan_lo: f64,
    scan_hi: f64,
    pitch: f64,
    z: &DVector<f64>,
) -> f64 {
    let d = z.len();
    let steps = (((scan_hi - scan_lo) / pitch).ceil() as usize).max(1);
    let mut best = f64::INFINITY;
    let mut idx = vec![0usize; d];
    'outer: loop {
        let point = DVector::from_fn(d, |i, _| {
            scan_lo + (scan_hi - scan_lo) * idx[i] as f64 / steps as f64
        });
        let feasible = halfspaces.iter().all(|(a, b)| {
            let mut acc = 0.0;
            for k in 0..d {
                acc += a[k] * point[k];
            }
            acc <= *b + 1e-12
        });
        if feasible {
            best = best.min((&point - z).norm());
        }
        for i in 0..d {
            idx[i] += 1;
            if idx[i] <= steps {
                continue 'outer;
            }
            idx[i] = 0;
        }
        break;
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn interval_dp_matches_hand_examples() {
        assert_abs_diff_eq!(
            interval_chase_optimal(&[(2.0, 3.0), (5.0, 6.0)], 0.0),
            5.0
        );
        assert_abs_diff_eq!(
            interval_chase_optimal(&[(0.0, 10.0), (3.0, 5.0)], 0.0),
            3.0
        );
        assert_abs_diff_eq!(
            interval_work_conjugate(&[(2.0, 3.0), (5.0, 6.0)], 0.0, 1.0),
            0.0
        );
        assert_abs_diff_eq!(
            interval_work_conjugate(&[(2.0, 3.0), (5.0, 6.0)], 0.0, -1.0),
            10.0
        );
    }

    #[test]
    fn grid_conjugate_matches_point_set() {
        // Single near-point box at (1, 0): conjugate ≈ ‖c‖ − v·c.
        let b = PlaneBox {
            lo: [1.0, 0.0],
            hi: [1.0 + 1e-9, 1e-9],
        };
        let val = grid_conjugate_2d(&[b], [0.0, 0.0], [0.0, 1.0], 0.01);
        assert_abs_diff_eq!(val, 1.0, epsilon = 1e-6);
    }
}
