//! Dynamic time warping with a five-step slope-constrained pattern.
//!
//! The accumulated cost obeys
//!
//! ```text
//! C(n, m) = min { C(n-1, m-1) + d(n, m)
//!               , C(n-2, m-1) + d(n-1, m) + d(n, m)
//!               , C(n-1, m-2) + d(n, m-1) + d(n, m)
//!               , C(n-3, m-1) + d(n-2, m) + d(n-1, m) + d(n, m)
//!               , C(n-1, m-3) + d(n, m-2) + d(n, m-1) + d(n, m) }
//! ```
//!
//! with `d(a, b) = (a - b)^2`, `C(1, 1) = d(x_1, y_1)` and every reference
//! to an index below 1 treated as unreachable. A sample can therefore be
//! stretched over at most three samples of the other sequence; the local
//! slope is bounded, the total shift is not.
//!
//! Indices in this module's public types are zero based.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Shortest sequences the step pattern is defined for.
pub const MIN_LEN: usize = 4;
/// Longest input accepted by [`dtw_bruteforce`].
pub const BRUTE_FORCE_MAX_LEN: usize = 8;

const PAD: usize = 3;

/// One admissible move of the recursion. Variants are listed in
/// tie-breaking order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Step {
    /// (1, 1): one local cost term.
    Diagonal,
    /// (2, 1): `x` advances two samples against one of `y`.
    TwoOne,
    /// (1, 2)
    OneTwo,
    /// (3, 1)
    ThreeOne,
    /// (1, 3)
    OneThree,
}

impl Step {
    /// All steps in tie-breaking order.
    pub const ALL: [Step; 5] = [
        Step::Diagonal,
        Step::TwoOne,
        Step::OneTwo,
        Step::ThreeOne,
        Step::OneThree,
    ];

    /// Advance `(dx, dy)` made by the step.
    pub const fn delta(self) -> (usize, usize) {
        match self {
            Step::Diagonal => (1, 1),
            Step::TwoOne => (2, 1),
            Step::OneTwo => (1, 2),
            Step::ThreeOne => (3, 1),
            Step::OneThree => (1, 3),
        }
    }

    /// Number of local cost terms the step adds.
    pub const fn terms(self) -> usize {
        let (dx, dy) = self.delta();
        if dx > dy {
            dx
        } else {
            dy
        }
    }

    /// The step with the roles of the sequences swapped.
    pub const fn mirror(self) -> Step {
        match self {
            Step::Diagonal => Step::Diagonal,
            Step::TwoOne => Step::OneTwo,
            Step::OneTwo => Step::TwoOne,
            Step::ThreeOne => Step::OneThree,
            Step::OneThree => Step::ThreeOne,
        }
    }

    /// Cells whose local cost the step adds when it lands on `(i, j)`, in
    /// path order. The last one is `(i, j)`; the caller guarantees the step
    /// is admissible from the origin side.
    fn cells_into(self, i: usize, j: usize) -> impl Iterator<Item = (usize, usize)> {
        let (dx, dy) = self.delta();
        let count = self.terms();
        (0..count).rev().map(move |back| {
            if dx >= dy && dx > 1 {
                (i - back, j)
            } else if dy > 1 {
                (i, j - back)
            } else {
                (i, j)
            }
        })
    }
}

#[inline]
fn local(a: f64, b: f64) -> f64 {
    (a - b) * (a - b)
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < MIN_LEN {
        return Err(Error::TooShort {
            len: x.len(),
            min: MIN_LEN,
        });
    }
    Ok(())
}

/// Accumulated cost grid. Unreachable cells hold `f64::INFINITY`.
#[derive(Debug, Clone)]
pub struct AccumulatedCostMatrix {
    rows: usize,
    cols: usize,
    width: usize,
    data: Vec<f64>,
}

impl AccumulatedCostMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[(i + PAD) * self.width + j + PAD]
    }

    /// Cost of the full alignment.
    pub fn total(&self) -> f64 {
        self.get(self.rows - 1, self.cols - 1)
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        // padded coordinates
        self.data[i * self.width + j]
    }

    /// Value of arriving at padded cell `(pi, pj)` via `step`, evaluated in
    /// the same association order as the forward pass.
    #[inline]
    fn candidate(&self, d: &[f64], dw: usize, pi: usize, pj: usize, step: Step) -> f64 {
        let dc = |i: usize, j: usize| d[(i - PAD) * dw + (j - PAD)];
        match step {
            Step::Diagonal => self.at(pi - 1, pj - 1) + dc(pi, pj),
            Step::TwoOne => {
                let prev = self.at(pi - 2, pj - 1);
                if prev.is_infinite() {
                    return f64::INFINITY;
                }
                prev + dc(pi - 1, pj) + dc(pi, pj)
            }
            Step::OneTwo => {
                let prev = self.at(pi - 1, pj - 2);
                if prev.is_infinite() {
                    return f64::INFINITY;
                }
                prev + dc(pi, pj - 1) + dc(pi, pj)
            }
            Step::ThreeOne => {
                let prev = self.at(pi - 3, pj - 1);
                if prev.is_infinite() {
                    return f64::INFINITY;
                }
                prev + dc(pi - 2, pj) + dc(pi - 1, pj) + dc(pi, pj)
            }
            Step::OneThree => {
                let prev = self.at(pi - 1, pj - 3);
                if prev.is_infinite() {
                    return f64::INFINITY;
                }
                prev + dc(pi, pj - 2) + dc(pi, pj - 1) + dc(pi, pj)
            }
        }
    }
}

fn local_costs(x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut d = Vec::with_capacity(x.len() * y.len());
    for &a in x {
        for &b in y {
            d.push(local(a, b));
        }
    }
    d
}

fn fill(x: &[f64], y: &[f64], d: &[f64]) -> AccumulatedCostMatrix {
    let (n, m) = (x.len(), y.len());
    let width = m + PAD;
    let mut c = AccumulatedCostMatrix {
        rows: n,
        cols: m,
        width,
        data: vec![f64::INFINITY; (n + PAD) * width],
    };
    c.data[PAD * width + PAD] = d[0];
    for pi in PAD..n + PAD {
        for pj in PAD..m + PAD {
            if pi == PAD && pj == PAD {
                continue;
            }
            let mut best = f64::INFINITY;
            for step in Step::ALL {
                let v = c.candidate(d, m, pi, pj, step);
                if v < best {
                    best = v;
                }
            }
            c.data[pi * width + pj] = best;
        }
    }
    c
}

/// Accumulated cost grid for `x` against `y`.
pub fn accumulated_cost(x: &[f64], y: &[f64]) -> Result<AccumulatedCostMatrix> {
    check_pair(x, y)?;
    Ok(fill(x, y, &local_costs(x, y)))
}

/// Minimum summed squared difference over all admissible warp paths.
pub fn dtw_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    Ok(fill(x, y, &local_costs(x, y)).total())
}

/// A warp path: every cell whose local cost is charged, from `(0, 0)` to
/// `(n - 1, m - 1)`, and the steps that produced them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WarpPath {
    pub cells: Vec<(usize, usize)>,
    pub steps: Vec<Step>,
}

impl WarpPath {
    /// Summed local cost along the path.
    pub fn cost(&self, x: &[f64], y: &[f64]) -> f64 {
        self.cells.iter().map(|&(i, j)| local(x[i], y[j])).sum()
    }

    pub fn is_diagonal(&self) -> bool {
        self.steps.iter().all(|&s| s == Step::Diagonal)
    }
}

/// Optimal warp path, recovered by backtracking. At each cell the first
/// step in [`Step::ALL`] order that attains the stored cost is taken.
pub fn dtw_path(x: &[f64], y: &[f64]) -> Result<WarpPath> {
    check_pair(x, y)?;
    let d = local_costs(x, y);
    let c = fill(x, y, &d);
    let m = y.len();
    let (mut pi, mut pj) = (x.len() - 1 + PAD, m - 1 + PAD);
    let mut cells = Vec::new();
    let mut steps = Vec::new();
    while (pi, pj) != (PAD, PAD) {
        let target = c.at(pi, pj);
        let step = Step::ALL
            .into_iter()
            .find(|&s| c.candidate(&d, m, pi, pj, s) == target)
            .expect("a reachable cell has an attaining predecessor");
        let (i, j) = (pi - PAD, pj - PAD);
        for cell in step.cells_into(i, j).collect::<Vec<_>>().into_iter().rev() {
            cells.push(cell);
        }
        steps.push(step);
        let (dx, dy) = step.delta();
        pi -= dx;
        pj -= dy;
    }
    cells.push((0, 0));
    cells.reverse();
    steps.reverse();
    Ok(WarpPath { cells, steps })
}

/// Exhaustive minimum over every admissible path. Exponential; inputs are
/// capped at [`BRUTE_FORCE_MAX_LEN`] samples.
pub fn dtw_bruteforce(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() > BRUTE_FORCE_MAX_LEN || y.len() > BRUTE_FORCE_MAX_LEN {
        return Err(Error::TooLong {
            len: x.len().max(y.len()),
            max: BRUTE_FORCE_MAX_LEN,
        });
    }
    check_pair(x, y)?;
    let mut best = f64::INFINITY;
    walk(x, y, 0, 0, local(x[0], y[0]), &mut best);
    Ok(best)
}

fn walk(x: &[f64], y: &[f64], i: usize, j: usize, acc: f64, best: &mut f64) {
    let (n, m) = (x.len(), y.len());
    if i == n - 1 && j == m - 1 {
        if acc < *best {
            *best = acc;
        }
        return;
    }
    for step in Step::ALL {
        let (dx, dy) = step.delta();
        let (ni, nj) = (i + dx, j + dy);
        if ni >= n || nj >= m {
            continue;
        }
        let mut cost = acc;
        for (ci, cj) in step.cells_into(ni, nj) {
            cost += local(x[ci], y[cj]);
        }
        walk(x, y, ni, nj, cost, best);
    }
}
