//! K-medoids clustering under DTW, the Euclidean K-means baseline, and
//! cluster quality measures.
//!
//! Both algorithms alternate an assignment sweep with a prototype update
//! and stop once assignments no longer change. Prototypes of the DTW model
//! are always members of their cluster (medoids); the baseline uses means.
//!
//! Ties are broken towards the lowest cluster index in assignment and the
//! lowest curve index in the medoid update, so a fixed seed fixes the model
//! regardless of how the distance matrix was computed.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::dtw::dtw_distance;
use crate::math::{ln, sq_euclidean};
use crate::rng::{stream, ChaCha8Rng};
use crate::{par, Error, Result};

/// Dissimilarity a model was built with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Metric {
    Dtw,
    /// Squared Euclidean distance.
    Euclidean,
}

impl Metric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> Result<f64> {
        match self {
            Metric::Dtw => dtw_distance(a, b),
            Metric::Euclidean => {
                if a.len() != b.len() {
                    return Err(Error::LengthMismatch {
                        left: a.len(),
                        right: b.len(),
                    });
                }
                Ok(sq_euclidean(a, b))
            }
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Dtw => "dtw",
            Metric::Euclidean => "euclidean",
        }
    }
}

impl core::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dtw" => Ok(Metric::Dtw),
            "euclidean" => Ok(Metric::Euclidean),
            other => Err(Error::InvalidParameter(alloc::format!(
                "unknown metric `{other}`"
            ))),
        }
    }
}

/// Dense symmetric matrix of pairwise dissimilarities.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    /// Computes every pair once; rows are spread over the thread pool when
    /// the `parallel` feature is on.
    pub fn compute<S>(curves: &[S], metric: Metric) -> Result<Self>
    where
        S: AsRef<[f64]> + Sync,
    {
        let n = curves.len();
        let rows: Vec<Result<Vec<f64>>> = par::map_range(n, |i| {
            (i + 1..n)
                .map(|j| metric.distance(curves[i].as_ref(), curves[j].as_ref()))
                .collect()
        });
        let mut data = vec![0.0; n * n];
        for (i, row) in rows.into_iter().enumerate() {
            for (offset, d) in row?.into_iter().enumerate() {
                let j = i + 1 + offset;
                data[i * n + j] = d;
                data[j * n + i] = d;
            }
        }
        Ok(DistanceMatrix { n, data })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClusterOptions {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    /// Independent seeded starts; the lowest final WC wins.
    pub restarts: usize,
}

impl ClusterOptions {
    pub fn new(k: usize, seed: u64) -> Self {
        ClusterOptions {
            k,
            seed,
            max_iter: 100,
            restarts: 5,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter(
                "max_iter must be at least 1".into(),
            ));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidParameter(
                "restarts must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Result of one clustering run on one period.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClusterModel {
    pub metric: Metric,
    /// Zero-based period the curves were sliced from (0 for whole days).
    pub period: usize,
    pub k: usize,
    pub prototypes: Vec<Vec<f64>>,
    /// Cluster index (zero based) of each input curve, in input order.
    pub assignments: Vec<usize>,
    /// WC under `metric` after the last sweep.
    pub wc: f64,
    /// WC after every (assign, update) sweep of the selected restart.
    pub wc_history: Vec<f64>,
    pub converged: bool,
}

impl ClusterModel {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }

    /// Nearest prototype under the model metric; ties go to the lowest index.
    pub fn nearest(&self, curve: &[f64]) -> Result<usize> {
        nearest_prototype(&self.prototypes, curve, self.metric).map(|(k, _)| k)
    }
}

/// Index and distance of the closest prototype, lowest index on ties.
pub fn nearest_prototype<P: AsRef<[f64]>>(
    prototypes: &[P],
    curve: &[f64],
    metric: Metric,
) -> Result<(usize, f64)> {
    let mut best = (usize::MAX, f64::INFINITY);
    for (k, proto) in prototypes.iter().enumerate() {
        let d = metric.distance(curve, proto.as_ref())?;
        if d < best.1 || best.0 == usize::MAX {
            best = (k, d);
        }
    }
    if best.0 == usize::MAX {
        return Err(Error::EmptyInput);
    }
    Ok(best)
}

fn distinct_count<S: AsRef<[f64]>>(curves: &[S]) -> usize {
    let mut keys: Vec<Vec<u64>> = curves
        .iter()
        .map(|c| c.as_ref().iter().map(|v| v.to_bits()).collect())
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

fn check_inputs<S: AsRef<[f64]>>(curves: &[S], opts: &ClusterOptions) -> Result<()> {
    opts.validate()?;
    if curves.is_empty() {
        return Err(Error::EmptyInput);
    }
    let distinct = distinct_count(curves);
    if opts.k > distinct {
        return Err(Error::KTooLarge {
            k: opts.k,
            distinct,
        });
    }
    Ok(())
}

/// `k` indices of pairwise-distinct curves, uniformly at random.
fn sample_distinct<S: AsRef<[f64]>>(curves: &[S], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..curves.len()).collect();
    order.shuffle(rng);
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    for i in order {
        if chosen.len() == k {
            break;
        }
        if chosen
            .iter()
            .all(|&c| curves[c].as_ref() != curves[i].as_ref())
        {
            chosen.push(i);
        }
    }
    chosen
}

struct Run {
    prototypes: Vec<Vec<f64>>,
    assignments: Vec<usize>,
    history: Vec<f64>,
    converged: bool,
}

impl Run {
    fn wc(&self) -> f64 {
        *self.history.last().expect("at least one sweep")
    }
}

fn best_run(runs: Vec<Run>) -> Run {
    let mut best: Option<Run> = None;
    for run in runs {
        match &best {
            Some(b) if b.wc() <= run.wc() => {}
            _ => best = Some(run),
        }
    }
    best.expect("at least one restart")
}

/// Moves, into each empty cluster, the curve farthest from its current
/// prototype among clusters that can spare a member.
fn reseed_empty(
    assignments: &mut [usize],
    k: usize,
    dist_to_own: impl Fn(usize, usize) -> f64,
    is_anchor: impl Fn(usize) -> bool,
    mut on_reseed: impl FnMut(usize, usize),
) {
    let mut sizes = vec![0usize; k];
    for &a in assignments.iter() {
        sizes[a] += 1;
    }
    for c in 0..k {
        if sizes[c] > 0 {
            continue;
        }
        let mut pick: Option<(usize, f64)> = None;
        for (i, &a) in assignments.iter().enumerate() {
            if sizes[a] < 2 || is_anchor(i) {
                continue;
            }
            let d = dist_to_own(i, a);
            if pick.is_none_or(|(_, best)| d > best) {
                pick = Some((i, d));
            }
        }
        if let Some((i, _)) = pick {
            sizes[assignments[i]] -= 1;
            assignments[i] = c;
            sizes[c] += 1;
            on_reseed(c, i);
        }
    }
}

fn pam_run(
    matrix: &DistanceMatrix,
    mut medoids: Vec<usize>,
    max_iter: usize,
) -> (Vec<usize>, Vec<usize>, Vec<f64>, bool) {
    let n = matrix.len();
    let k = medoids.len();
    let mut assignments = vec![usize::MAX; n];
    let mut history = Vec::new();
    let mut converged = false;
    for _ in 0..max_iter {
        let mut next: Vec<usize> = (0..n)
            .map(|i| {
                let row = matrix.row(i);
                let mut best = 0;
                for c in 1..k {
                    if row[medoids[c]] < row[medoids[best]] {
                        best = c;
                    }
                }
                best
            })
            .collect();
        {
            let current = medoids.clone();
            reseed_empty(
                &mut next,
                k,
                |i, a| matrix.get(i, current[a]),
                |i| current.contains(&i),
                |c, i| medoids[c] = i,
            );
        }
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
        for (i, &a) in next.iter().enumerate() {
            members[a].push(i);
        }
        for (c, group) in members.iter().enumerate() {
            if group.is_empty() {
                continue;
            }
            let mut best = (group[0], f64::INFINITY);
            for &candidate in group {
                let row = matrix.row(candidate);
                let cost: f64 = group.iter().map(|&j| row[j]).sum();
                if cost < best.1 {
                    best = (candidate, cost);
                }
            }
            medoids[c] = best.0;
        }
        let wc: f64 = next
            .iter()
            .enumerate()
            .map(|(i, &a)| matrix.get(i, medoids[a]))
            .sum();
        history.push(wc);
        let stable = next == assignments;
        assignments = next;
        if stable {
            converged = true;
            break;
        }
    }
    (medoids, assignments, history, converged)
}

/// K-medoids under DTW. Computes the pairwise DTW matrix once and hands it
/// to [`kmedoids_with_matrix`].
pub fn kmedoids_dtw<S>(curves: &[S], opts: &ClusterOptions) -> Result<ClusterModel>
where
    S: AsRef<[f64]> + Sync,
{
    check_inputs(curves, opts)?;
    let matrix = DistanceMatrix::compute(curves, Metric::Dtw)?;
    kmedoids_with_matrix(curves, &matrix, Metric::Dtw, opts)
}

/// K-medoids over a precomputed dissimilarity matrix of `curves`.
pub fn kmedoids_with_matrix<S>(
    curves: &[S],
    matrix: &DistanceMatrix,
    metric: Metric,
    opts: &ClusterOptions,
) -> Result<ClusterModel>
where
    S: AsRef<[f64]>,
{
    check_inputs(curves, opts)?;
    if matrix.len() != curves.len() {
        return Err(Error::InvalidParameter(
            "distance matrix does not match the curves".into(),
        ));
    }
    let runs: Vec<Run> = (0..opts.restarts)
        .map(|r| {
            let mut rng = stream(opts.seed, "kmedoids", r as u64);
            let init = sample_distinct(curves, opts.k, &mut rng);
            let (medoids, assignments, history, converged) = pam_run(matrix, init, opts.max_iter);
            Run {
                prototypes: medoids
                    .iter()
                    .map(|&m| curves[m].as_ref().to_vec())
                    .collect(),
                assignments,
                history,
                converged,
            }
        })
        .collect();
    Ok(into_model(best_run(runs), metric, opts.k))
}

fn into_model(run: Run, metric: Metric, k: usize) -> ClusterModel {
    ClusterModel {
        metric,
        period: 0,
        k,
        wc: run.wc(),
        prototypes: run.prototypes,
        assignments: run.assignments,
        wc_history: run.history,
        converged: run.converged,
    }
}

fn lloyd_run<S: AsRef<[f64]>>(curves: &[S], init: &[usize], max_iter: usize) -> Run {
    let n = curves.len();
    let k = init.len();
    let dim = curves[0].as_ref().len();
    let mut centroids: Vec<Vec<f64>> = init.iter().map(|&i| curves[i].as_ref().to_vec()).collect();
    let mut assignments = vec![usize::MAX; n];
    let mut history = Vec::new();
    let mut converged = false;
    for _ in 0..max_iter {
        let mut next: Vec<usize> = curves
            .iter()
            .map(|c| {
                let mut best = (0, f64::INFINITY);
                for (j, centroid) in centroids.iter().enumerate() {
                    let d = sq_euclidean(c.as_ref(), centroid);
                    if d < best.1 {
                        best = (j, d);
                    }
                }
                best.0
            })
            .collect();
        reseed_empty(
            &mut next,
            k,
            |i, a| sq_euclidean(curves[i].as_ref(), &centroids[a]),
            |_| false,
            |_, _| {},
        );
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, &a) in next.iter().enumerate() {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(curves[i].as_ref()) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                let inv = counts[c] as f64;
                centroids[c] = sums[c].iter().map(|s| s / inv).collect();
            }
        }
        let wc: f64 = next
            .iter()
            .enumerate()
            .map(|(i, &a)| sq_euclidean(curves[i].as_ref(), &centroids[a]))
            .sum();
        history.push(wc);
        let stable = next == assignments;
        assignments = next;
        if stable {
            converged = true;
            break;
        }
    }
    Run {
        prototypes: centroids,
        assignments,
        history,
        converged,
    }
}

/// Lloyd's K-means with squared Euclidean distance and mean centroids.
pub fn kmeans_euclidean<S>(curves: &[S], opts: &ClusterOptions) -> Result<ClusterModel>
where
    S: AsRef<[f64]>,
{
    check_inputs(curves, opts)?;
    let dim = curves[0].as_ref().len();
    if let Some(bad) = curves.iter().find(|c| c.as_ref().len() != dim) {
        return Err(Error::LengthMismatch {
            left: dim,
            right: bad.as_ref().len(),
        });
    }
    let runs: Vec<Run> = (0..opts.restarts)
        .map(|r| {
            let mut rng = stream(opts.seed, "kmeans", r as u64);
            let init = sample_distinct(curves, opts.k, &mut rng);
            lloyd_run(curves, &init, opts.max_iter)
        })
        .collect();
    Ok(into_model(best_run(runs), Metric::Euclidean, opts.k))
}

/// Compactness and separation of a clustering.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityReport {
    /// Metric the three measures were evaluated under.
    pub metric: Metric,
    pub k: usize,
    /// Sum of distances from every curve to its prototype.
    pub wc: f64,
    /// Half the sum of distances over ordered prototype pairs.
    pub wb: f64,
    /// `wc / wb`, `None` when `wb = 0` (for example `k = 1`).
    pub wcbcr: Option<f64>,
    /// Entropy of each household's cluster memberships, when households
    /// were supplied.
    pub household_entropy: Vec<f64>,
}

impl QualityReport {
    pub fn mean_entropy(&self) -> Option<f64> {
        if self.household_entropy.is_empty() {
            None
        } else {
            Some(self.household_entropy.iter().sum::<f64>() / self.household_entropy.len() as f64)
        }
    }
}

/// WC, WB and WCBCR under the model's own metric.
pub fn quality<S: AsRef<[f64]>>(model: &ClusterModel, curves: &[S]) -> Result<QualityReport> {
    quality_under(model, curves, model.metric)
}

/// WC, WB and WCBCR of `model` evaluated under `metric`, which may differ
/// from the one the model was fitted with (e.g. scoring K-means under DTW).
pub fn quality_under<S: AsRef<[f64]>>(
    model: &ClusterModel,
    curves: &[S],
    metric: Metric,
) -> Result<QualityReport> {
    if curves.len() != model.assignments.len() {
        return Err(Error::InvalidParameter(alloc::format!(
            "model has {} assignments for {} curves",
            model.assignments.len(),
            curves.len()
        )));
    }
    let mut wc = 0.0;
    for (curve, &a) in curves.iter().zip(&model.assignments) {
        wc += metric.distance(curve.as_ref(), &model.prototypes[a])?;
    }
    let mut ordered_pairs = 0.0;
    for i in 0..model.k {
        for j in 0..model.k {
            if i != j {
                ordered_pairs += metric.distance(&model.prototypes[i], &model.prototypes[j])?;
            }
        }
    }
    let wb = 0.5 * ordered_pairs;
    Ok(QualityReport {
        metric,
        k: model.k,
        wc,
        wb,
        wcbcr: if wb > 0.0 { Some(wc / wb) } else { None },
        household_entropy: Vec::new(),
    })
}

/// Base-M entropy of one household's M cluster labels. 0 when every curve
/// falls into one cluster, at most 1.
pub fn household_entropy(assignments: &[usize], k: usize) -> Result<f64> {
    let m = assignments.len();
    if m < 2 {
        return Err(Error::SingleCurve);
    }
    let mut counts = vec![0usize; k];
    for &a in assignments {
        if a >= k {
            return Err(Error::InvalidParameter(alloc::format!(
                "cluster {a} out of range for k = {k}"
            )));
        }
        counts[a] += 1;
    }
    let log_m = ln(m as f64);
    let s: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / m as f64;
            -p * ln(p) / log_m
        })
        .sum();
    Ok(s.max(0.0))
}

/// Entropy per group (household), ordered by group key.
pub fn entropy_by_group<G: Ord + Clone>(
    assignments: &[usize],
    groups: &[G],
    k: usize,
) -> Result<Vec<(G, f64)>> {
    if assignments.len() != groups.len() {
        return Err(Error::InvalidParameter(
            "one group label per assignment required".into(),
        ));
    }
    let mut by_group: BTreeMap<G, Vec<usize>> = BTreeMap::new();
    for (g, &a) in groups.iter().zip(assignments) {
        by_group.entry(g.clone()).or_default().push(a);
    }
    by_group
        .into_iter()
        .map(|(g, labels)| Ok((g, household_entropy(&labels, k)?)))
        .collect()
}

fn comb2(n: usize) -> f64 {
    let n = n as f64;
    n * (n - 1.0) / 2.0
}

/// Adjusted Rand index between two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings must cover the same items");
    let mut table: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut rows: BTreeMap<usize, usize> = BTreeMap::new();
    let mut cols: BTreeMap<usize, usize> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| comb2(c)).sum();
    let sum_rows: f64 = rows.values().map(|&c| comb2(c)).sum();
    let sum_cols: f64 = cols.values().map(|&c| comb2(c)).sum();
    let expected = sum_rows * sum_cols / comb2(a.len());
    let max_index = 0.5 * (sum_rows + sum_cols);
    if max_index == expected {
        return 1.0;
    }
    (index - expected) / (max_index - expected)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(base: &[f64]) -> Vec<f64> {
        base.to_vec()
    }

    fn bump(at: usize, len: usize) -> Vec<f64> {
        let mut v = vec![0.01; len];
        v[at] = 1.0;
        v
    }

    #[test]
    fn identical_curves_single_cluster() {
        let curves = vec![bump(5, 24); 6];
        let opts = ClusterOptions::new(1, 3);
        let model = kmedoids_dtw(&curves, &opts).unwrap();
        assert_eq!(model.wc, 0.0);
        assert_eq!(model.prototypes[0], curves[0]);
        assert!(model.assignments.iter().all(|&a| a == 0));

        let km = kmeans_euclidean(&curves, &opts).unwrap();
        assert_eq!(km.wc, 0.0);
        assert_eq!(km.prototypes[0], curves[0]);
    }

    #[test]
    fn k_one_medoid_is_sum_minimiser() {
        let curves: Vec<Vec<f64>> = (0..7)
            .map(|i| (0..12).map(|h| ((h * (i + 2)) % 7) as f64 + 0.5).collect())
            .collect();
        let model = kmedoids_dtw(&curves, &ClusterOptions::new(1, 0)).unwrap();
        let mut best = (0, f64::INFINITY);
        for (i, c) in curves.iter().enumerate() {
            let s: f64 = curves.iter().map(|o| dtw_distance(c, o).unwrap()).sum();
            if s < best.1 {
                best = (i, s);
            }
        }
        assert_eq!(model.prototypes[0], curves[best.0]);
        assert!((model.wc - best.1).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let curves = vec![bump(3, 24), bump(3, 24)];
        assert_eq!(
            kmedoids_dtw(&curves, &ClusterOptions::new(2, 0)),
            Err(Error::KTooLarge { k: 2, distinct: 1 })
        );
        let empty: Vec<Vec<f64>> = Vec::new();
        assert_eq!(
            kmeans_euclidean(&empty, &ClusterOptions::new(1, 0)),
            Err(Error::EmptyInput)
        );
        assert!(kmedoids_dtw(&curves, &ClusterOptions::new(0, 0)).is_err());
    }

    #[test]
    fn well_separated_groups_recovered_by_kmeans() {
        let mut curves = Vec::new();
        let mut labels = Vec::new();
        for i in 0..10 {
            let eps = i as f64 * 1e-3;
            curves.push(curve(&[1.0 + eps, 1.0, 0.0, 0.0]));
            labels.push(0);
            curves.push(curve(&[0.0, 0.0, 1.0, 1.0 + eps]));
            labels.push(1);
        }
        let model = kmeans_euclidean(&curves, &ClusterOptions::new(2, 9)).unwrap();
        assert_eq!(adjusted_rand_index(&model.assignments, &labels), 1.0);
    }

    #[test]
    fn quality_examples() {
        let curves = vec![bump(2, 24), bump(9, 24), bump(17, 24)];
        let k1 = kmedoids_dtw(&curves, &ClusterOptions::new(1, 0)).unwrap();
        let q = quality(&k1, &curves).unwrap();
        assert_eq!(q.wb, 0.0);
        assert_eq!(q.wcbcr, None);

        let k2 = kmedoids_dtw(&curves, &ClusterOptions::new(2, 0)).unwrap();
        let q = quality(&k2, &curves).unwrap();
        let direct = dtw_distance(&k2.prototypes[0], &k2.prototypes[1]).unwrap();
        assert_eq!(q.wb, direct);
        assert_eq!(q.wcbcr, Some(q.wc / q.wb));
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(household_entropy(&[2, 2, 2, 2], 5).unwrap(), 0.0);
        assert!((household_entropy(&[0, 1, 2, 3], 4).unwrap() - 1.0).abs() < 1e-15);
        assert!((household_entropy(&[0, 0, 1, 1], 4).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(household_entropy(&[0], 4), Err(Error::SingleCurve));
    }

    #[test]
    fn entropy_grouping() {
        let groups = ["b", "a", "a", "b"];
        let out = entropy_by_group(&[0, 1, 1, 2], &groups, 3).unwrap();
        assert_eq!(out, vec![("a", 0.0), ("b", 1.0)]);
    }

    #[test]
    fn ari_basics() {
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[5, 5, 3, 3]), 1.0);
        assert!(adjusted_rand_index(&[0, 0, 1, 1], &[0, 1, 0, 1]) < 0.0);
    }

    #[test]
    fn empty_clusters_are_reseeded() {
        // Two distinct curves at DTW distance 0 from each other plus an outlier:
        // whichever start is drawn, every cluster ends up non-empty.
        let a = vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let b = vec![0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert_eq!(dtw_distance(&a, &b).unwrap(), 0.0);
        let c = vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 3.0, 3.0];
        let curves = vec![a, b, c.clone(), c];
        for seed in 0..20 {
            let model = kmedoids_dtw(&curves, &ClusterOptions::new(3, seed)).unwrap();
            assert!(model.cluster_sizes().iter().all(|&s| s > 0), "seed {seed}");
            for (k, proto) in model.prototypes.iter().enumerate() {
                assert!(curves
                    .iter()
                    .zip(&model.assignments)
                    .any(|(c, &a)| a == k && c == proto));
            }
        }
    }
}
