//! Next-day load prediction from Markov chains over cluster-encoded periods.
//!
//! A day is cut into `n_p` periods and each period slice is encoded as the
//! index of its nearest DTW prototype. The cluster of period `p` on day `d`
//! is modelled conditionally on the context
//! `<a(d, 0..p), a(d-1, p..n_p)>`: the periods already seen today followed
//! by the remaining periods of yesterday. For two periods that is
//! `<a(d-1, AM), a(d-1, PM)>` for the morning and `<a(d, AM), a(d-1, PM)>`
//! for the afternoon.
//!
//! The predicted prototypes are unit-sum shapes, so each period is then
//! scaled either by a weighted least-squares fit over past predictions or,
//! when no past predictions exist, by the mean of past period totals.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::cluster::{kmedoids_with_matrix, ClusterModel, ClusterOptions, DistanceMatrix, Metric};
use crate::curves::{check_periods, normalize_slice, DayType, LoadCurve};
use crate::dtw::dtw_distance;
use crate::math::{dot, norm_sq, powi, sqrt};
use crate::rng::derive_seed;
use crate::{par, Error, Result, HOURS};

/// Prototypes of one period together with their training cluster sizes.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PeriodPrototypes {
    pub prototypes: Vec<Vec<f64>>,
    pub sizes: Vec<usize>,
}

/// One prototype set per period of the day, all with the same `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeSet {
    n_p: usize,
    k: usize,
    periods: Vec<PeriodPrototypes>,
}

impl PrototypeSet {
    pub fn new(n_p: usize, periods: Vec<PeriodPrototypes>) -> Result<Self> {
        let width = check_periods(n_p)?;
        if periods.len() != n_p {
            return Err(Error::InvalidParameter(format!(
                "{} prototype sets for {n_p} periods",
                periods.len()
            )));
        }
        let k = periods[0].prototypes.len();
        if k == 0 {
            return Err(Error::InvalidParameter("empty prototype set".into()));
        }
        for period in &periods {
            if period.prototypes.len() != k || period.sizes.len() != k {
                return Err(Error::InvalidParameter(
                    "every period needs k prototypes".into(),
                ));
            }
            if let Some(p) = period.prototypes.iter().find(|p| p.len() != width) {
                return Err(Error::WrongLength {
                    expected: width,
                    actual: p.len(),
                });
            }
        }
        Ok(PrototypeSet { n_p, k, periods })
    }

    /// Collects per-period cluster models, ordered by period.
    pub fn from_models(models: &[ClusterModel]) -> Result<Self> {
        let periods = models
            .iter()
            .map(|m| PeriodPrototypes {
                prototypes: m.prototypes.clone(),
                sizes: m.cluster_sizes(),
            })
            .collect();
        PrototypeSet::new(models.len(), periods)
    }

    pub fn n_p(&self) -> usize {
        self.n_p
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn width(&self) -> usize {
        HOURS / self.n_p
    }

    pub fn period(&self, p: usize) -> &PeriodPrototypes {
        &self.periods[p]
    }

    pub fn prototype(&self, p: usize, k: usize) -> &[f64] {
        &self.periods[p].prototypes[k]
    }

    /// Largest training cluster of period `p`, lowest index on ties.
    pub fn majority(&self, p: usize) -> usize {
        argmax(&self.periods[p].sizes)
    }
}

fn argmax<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Encodes one period slice: normalise to unit sum, then return the index
/// of the nearest prototype under DTW (lowest index on ties).
pub fn dp_enc(slice: &[f64], prototypes: &[Vec<f64>]) -> Result<usize> {
    if prototypes.is_empty() {
        return Err(Error::InvalidParameter("no prototypes".into()));
    }
    let normalized = normalize_slice(slice).map_err(|_| Error::AllZeroSlice)?;
    let mut best = (0, f64::INFINITY);
    for (k, proto) in prototypes.iter().enumerate() {
        let d = dtw_distance(&normalized, proto)?;
        if d < best.1 {
            best = (k, d);
        }
    }
    Ok(best.0)
}

/// Cluster indices of every period of one day.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EncodedDay {
    pub day_type: DayType,
    pub clusters: Vec<usize>,
}

impl EncodedDay {
    pub fn new(day_type: DayType, clusters: Vec<usize>) -> Self {
        EncodedDay { day_type, clusters }
    }
}

pub fn encode_day(values: &[f64], day_type: DayType, set: &PrototypeSet) -> Result<EncodedDay> {
    if values.len() != HOURS {
        return Err(Error::WrongLength {
            expected: HOURS,
            actual: values.len(),
        });
    }
    let clusters = values
        .chunks(set.width())
        .enumerate()
        .map(|(p, slice)| dp_enc(slice, &set.periods[p].prototypes))
        .collect::<Result<Vec<_>>>()?;
    Ok(EncodedDay { day_type, clusters })
}

/// Conditioning tuple for period `period`: today's clusters before it,
/// followed by yesterday's clusters from `period` on.
pub fn transition_context(previous: &EncodedDay, today: &[usize], period: usize) -> Vec<usize> {
    let mut ctx = Vec::with_capacity(previous.clusters.len());
    ctx.extend_from_slice(&today[..period]);
    ctx.extend_from_slice(&previous.clusters[period..]);
    ctx
}

/// Observed outcomes for one context.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextCounts {
    pub counts: Vec<u64>,
    pub total: u64,
    /// `counts[i] / total`, unsmoothed.
    pub probabilities: Vec<f64>,
}

impl ContextCounts {
    fn from_counts(counts: Vec<u64>) -> Self {
        let total: u64 = counts.iter().sum();
        let probabilities = counts.iter().map(|&c| c as f64 / total as f64).collect();
        ContextCounts {
            counts,
            total,
            probabilities,
        }
    }

    /// Most frequent outcome, lowest index on ties.
    pub fn mode(&self) -> usize {
        argmax(&self.counts)
    }
}

/// Empirical transition law of one period.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionModel {
    pub period: usize,
    pub n_p: usize,
    pub k: usize,
    /// Day type of the target days counted, `None` when pooled.
    pub day_type: Option<DayType>,
    contexts: BTreeMap<Vec<usize>, ContextCounts>,
    pairs: usize,
}

impl TransitionModel {
    /// Counts transitions over `(previous day, day)` pairs. With
    /// `day_type = Some(t)` only pairs whose second day has type `t` count.
    pub fn from_pairs<'a, I>(
        pairs: I,
        period: usize,
        n_p: usize,
        k: usize,
        day_type: Option<DayType>,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a EncodedDay, &'a EncodedDay)>,
    {
        if period >= n_p {
            return Err(Error::InvalidParameter(format!(
                "period {period} out of range for n_p = {n_p}"
            )));
        }
        let mut raw: BTreeMap<Vec<usize>, Vec<u64>> = BTreeMap::new();
        let mut used = 0;
        for (prev, cur) in pairs {
            if day_type.is_some_and(|t| cur.day_type != t) {
                continue;
            }
            if prev.clusters.len() != n_p || cur.clusters.len() != n_p {
                return Err(Error::InvalidParameter(
                    "encoded day has the wrong number of periods".into(),
                ));
            }
            let outcome = cur.clusters[period];
            if outcome >= k || prev.clusters.iter().chain(&cur.clusters).any(|&a| a >= k) {
                return Err(Error::InvalidParameter(format!(
                    "cluster index out of range for k = {k}"
                )));
            }
            let ctx = transition_context(prev, &cur.clusters, period);
            raw.entry(ctx).or_insert_with(|| vec![0; k])[outcome] += 1;
            used += 1;
        }
        let contexts = raw
            .into_iter()
            .map(|(ctx, c)| (ctx, ContextCounts::from_counts(c)))
            .collect();
        Ok(TransitionModel {
            period,
            n_p,
            k,
            day_type,
            contexts,
            pairs: used,
        })
    }

    pub fn distribution(&self, context: &[usize]) -> Option<&ContextCounts> {
        self.contexts.get(context)
    }

    pub fn probability(&self, context: &[usize], outcome: usize) -> Option<f64> {
        self.contexts.get(context).map(|c| c.probabilities[outcome])
    }

    pub fn contexts(&self) -> impl Iterator<Item = (&[usize], &ContextCounts)> {
        self.contexts.iter().map(|(k, v)| (k.as_slice(), v))
    }

    /// Number of transitions that were counted.
    pub fn pair_count(&self) -> usize {
        self.pairs
    }
}

/// Transition model of period `period` over consecutive days.
pub fn p_transition(days: &[EncodedDay], period: usize, k: usize) -> Result<TransitionModel> {
    if days.len() < 2 {
        return Err(Error::InsufficientHistory {
            needed: 2,
            got: days.len(),
        });
    }
    let n_p = days[0].clusters.len();
    TransitionModel::from_pairs(
        days.windows(2).map(|w| (&w[0], &w[1])),
        period,
        n_p,
        k,
        None,
    )
}

/// Where a predicted cluster came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PredictionSource {
    /// Mode of the observed context.
    Transition,
    /// Context never observed: mode of the period over all training days.
    Marginal,
    /// No training days: largest training cluster.
    Majority,
}

/// Transition models for every period, optionally split by day type.
#[derive(Debug, Clone)]
pub struct MarkovPredictor {
    n_p: usize,
    pooled: Vec<TransitionModel>,
    split: Option<[Vec<TransitionModel>; 2]>,
    marginal: Vec<Vec<u64>>,
    majority: Vec<usize>,
}

fn type_slot(t: DayType) -> usize {
    match t {
        DayType::Weekday => 0,
        DayType::Weekend => 1,
    }
}

impl MarkovPredictor {
    /// `pairs` are (previous, current) day pairs; `training` are the days
    /// whose period marginals back off unseen contexts. The day-type split
    /// is used only when both day types occur among the pair targets.
    pub fn fit(
        pairs: &[(&EncodedDay, &EncodedDay)],
        training: &[&EncodedDay],
        set: &PrototypeSet,
        split_day_type: bool,
    ) -> Result<Self> {
        let (n_p, k) = (set.n_p(), set.k());
        let build = |t: Option<DayType>| -> Result<Vec<TransitionModel>> {
            (0..n_p)
                .map(|p| TransitionModel::from_pairs(pairs.iter().copied(), p, n_p, k, t))
                .collect()
        };
        let pooled = build(None)?;
        let has = |t: DayType| pairs.iter().any(|(_, cur)| cur.day_type == t);
        let split = if split_day_type && has(DayType::Weekday) && has(DayType::Weekend) {
            Some([
                build(Some(DayType::Weekday))?,
                build(Some(DayType::Weekend))?,
            ])
        } else {
            None
        };
        let mut marginal = vec![vec![0u64; k]; n_p];
        for day in training {
            for (p, &a) in day.clusters.iter().enumerate() {
                marginal[p][a] += 1;
            }
        }
        let majority = (0..n_p).map(|p| set.majority(p)).collect();
        Ok(MarkovPredictor {
            n_p,
            pooled,
            split,
            marginal,
            majority,
        })
    }

    pub fn is_split(&self) -> bool {
        self.split.is_some()
    }

    pub fn model(&self, period: usize, day_type: DayType) -> &TransitionModel {
        match &self.split {
            Some(models) => &models[type_slot(day_type)][period],
            None => &self.pooled[period],
        }
    }

    /// Predicts all periods of the day after `last`, one period at a time,
    /// feeding each predicted cluster into the next context.
    pub fn predict(
        &self,
        last: &EncodedDay,
        target: DayType,
    ) -> (Vec<usize>, Vec<PredictionSource>) {
        let mut clusters = Vec::with_capacity(self.n_p);
        let mut sources = Vec::with_capacity(self.n_p);
        for p in 0..self.n_p {
            let ctx = transition_context(last, &clusters, p);
            let (a, source) = match self.model(p, target).distribution(&ctx) {
                Some(dist) => (dist.mode(), PredictionSource::Transition),
                None if self.marginal[p].iter().any(|&c| c > 0) => {
                    (argmax(&self.marginal[p]), PredictionSource::Marginal)
                }
                None => (self.majority[p], PredictionSource::Majority),
            };
            clusters.push(a);
            sources.push(source);
        }
        (clusters, sources)
    }
}

/// Predicted clusters and their prototype shapes for one day.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeForecast {
    pub clusters: Vec<usize>,
    pub sources: Vec<PredictionSource>,
    pub shapes: Vec<Vec<f64>>,
}

/// Predicts the shapes of the day following `encoded`, training on all of
/// its consecutive pairs.
pub fn predict_encoded(
    encoded: &[EncodedDay],
    set: &PrototypeSet,
    target: DayType,
    split_day_type: bool,
) -> Result<ShapeForecast> {
    if encoded.len() < 2 {
        return Err(Error::InsufficientHistory {
            needed: 2,
            got: encoded.len(),
        });
    }
    let pairs: Vec<_> = encoded.windows(2).map(|w| (&w[0], &w[1])).collect();
    let training: Vec<_> = encoded.iter().collect();
    let predictor = MarkovPredictor::fit(&pairs, &training, set, split_day_type)?;
    let (clusters, sources) = predictor.predict(encoded.last().expect("non-empty"), target);
    let shapes = clusters
        .iter()
        .enumerate()
        .map(|(p, &a)| set.prototype(p, a).to_vec())
        .collect();
    Ok(ShapeForecast {
        clusters,
        sources,
        shapes,
    })
}

fn next_day_type(curve: &LoadCurve) -> DayType {
    DayType::of(curve.date.succ_opt().unwrap_or(curve.date))
}

/// Encodes `history` (consecutive days, oldest first) and predicts the
/// shapes of the following day.
pub fn shape_predict(
    history: &[LoadCurve],
    set: &PrototypeSet,
    split_day_type: bool,
) -> Result<ShapeForecast> {
    if history.len() < 2 {
        return Err(Error::InsufficientHistory {
            needed: 2,
            got: history.len(),
        });
    }
    let encoded = history
        .iter()
        .map(|c| encode_day(c.values(), c.day_type, set))
        .collect::<Result<Vec<_>>>()?;
    predict_encoded(
        &encoded,
        set,
        next_day_type(history.last().expect("non-empty")),
        split_day_type,
    )
}

/// A shape scaled to energy units.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledSlice {
    pub alpha: f64,
    pub values: Vec<f64>,
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "beta must lie in (0, 1], got {beta}"
        )));
    }
    Ok(())
}

/// Weighted least-squares scale `sum w <S, X> / sum w |S|^2` over past
/// (predicted shape, actual slice) pairs, oldest first. The newest pair has
/// weight 1 and each older one is discounted by another factor `beta`.
pub fn scale_factor(past: &[(&[f64], &[f64])], beta: f64) -> Result<f64> {
    check_beta(beta)?;
    if past.is_empty() {
        return Err(Error::NoHistory);
    }
    let newest = past.len() - 1;
    let (mut num, mut den) = (0.0, 0.0);
    for (idx, (shape, actual)) in past.iter().enumerate() {
        if shape.len() != actual.len() {
            return Err(Error::LengthMismatch {
                left: shape.len(),
                right: actual.len(),
            });
        }
        let w = if beta == 1.0 {
            1.0
        } else {
            powi(beta, (newest - idx) as i32)
        };
        num += w * dot(shape, actual);
        den += w * norm_sq(shape);
    }
    if !(den > 0.0) {
        return Err(Error::DegenerateScale);
    }
    Ok(num / den)
}

/// Scales `shape` by [`scale_factor`] of the past pairs.
pub fn scale_forecast(shape: &[f64], past: &[(&[f64], &[f64])], beta: f64) -> Result<ScaledSlice> {
    let alpha = scale_factor(past, beta)?;
    Ok(ScaledSlice {
        alpha,
        values: shape.iter().map(|v| alpha * v).collect(),
    })
}

/// Scales `shape` so its total equals the mean total of the past slices.
pub fn scale_naive(shape: &[f64], past: &[&[f64]]) -> Result<ScaledSlice> {
    if past.is_empty() {
        return Err(Error::NoHistory);
    }
    let shape_total: f64 = shape.iter().sum();
    if !(shape_total > 0.0) {
        return Err(Error::DegenerateScale);
    }
    let past_total: f64 = past.iter().map(|s| s.iter().sum::<f64>()).sum();
    let alpha = past_total / (past.len() as f64 * shape_total);
    Ok(ScaledSlice {
        alpha,
        values: shape.iter().map(|v| alpha * v).collect(),
    })
}

/// Normalised DTW error `sqrt(DTW(pred, actual) / |actual|^2)`.
pub fn dtwe(pred: &[f64], actual: &[f64]) -> Result<f64> {
    let energy = norm_sq(actual);
    if !(energy > 0.0) {
        return Err(Error::ZeroActual);
    }
    Ok(sqrt(dtw_distance(pred, actual)? / energy))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForecastOptions {
    pub beta: f64,
    pub split_day_type: bool,
    /// Past predictions used for scaling; `None` uses all of them.
    pub window: Option<usize>,
}

impl Default for ForecastOptions {
    fn default() -> Self {
        ForecastOptions {
            beta: 1.0,
            split_day_type: true,
            window: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ScalingMethod {
    /// Mean of past period totals.
    Naive,
    /// Weighted least squares over this many past predictions.
    Weighted { days: usize },
}

/// A scaled next-day prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct Forecast {
    pub day_type: DayType,
    pub clusters: Vec<usize>,
    pub sources: Vec<PredictionSource>,
    pub shapes: Vec<Vec<f64>>,
    pub alphas: Vec<f64>,
    pub scaling: ScalingMethod,
    /// 24 hourly values.
    pub values: Vec<f64>,
}

/// Full next-day forecast for one household.
///
/// Days `2..D` of the history are first predicted one step ahead from their
/// own past so that every period has (predicted shape, actual slice) pairs
/// for the weighted scale fit. With fewer than three days of history no such
/// pairs exist and the naive scale is used.
pub fn forecast_next_day(
    history: &[LoadCurve],
    set: &PrototypeSet,
    opts: &ForecastOptions,
) -> Result<Forecast> {
    check_beta(opts.beta)?;
    if history.len() < 2 {
        return Err(Error::InsufficientHistory {
            needed: 2,
            got: history.len(),
        });
    }
    let width = set.width();
    let encoded = history
        .iter()
        .map(|c| encode_day(c.values(), c.day_type, set))
        .collect::<Result<Vec<_>>>()?;

    let mut past_shapes: Vec<ShapeForecast> = Vec::new();
    for t in 2..history.len() {
        past_shapes.push(predict_encoded(
            &encoded[..t],
            set,
            encoded[t].day_type,
            opts.split_day_type,
        )?);
    }
    let first_scored = history.len() - past_shapes.len();
    let keep = opts
        .window
        .unwrap_or(past_shapes.len())
        .min(past_shapes.len());
    let skip = past_shapes.len() - keep;

    let day_type = next_day_type(history.last().expect("non-empty"));
    let next = predict_encoded(&encoded, set, day_type, opts.split_day_type)?;
    let mut alphas = Vec::with_capacity(set.n_p());
    let mut values = Vec::with_capacity(HOURS);
    for p in 0..set.n_p() {
        let range = p * width..(p + 1) * width;
        let scaled = if keep == 0 {
            let past: Vec<&[f64]> = history.iter().map(|c| &c.values()[range.clone()]).collect();
            scale_naive(&next.shapes[p], &past)?
        } else {
            let pairs: Vec<(&[f64], &[f64])> = past_shapes
                .iter()
                .enumerate()
                .skip(skip)
                .map(|(i, f)| {
                    (
                        f.shapes[p].as_slice(),
                        &history[first_scored + i].values()[range.clone()],
                    )
                })
                .collect();
            scale_forecast(&next.shapes[p], &pairs, opts.beta)?
        };
        alphas.push(scaled.alpha);
        values.extend(scaled.values);
    }
    Ok(Forecast {
        day_type,
        clusters: next.clusters,
        sources: next.sources,
        shapes: next.shapes,
        alphas,
        scaling: if keep == 0 {
            ScalingMethod::Naive
        } else {
            ScalingMethod::Weighted { days: keep }
        },
        values,
    })
}

/// One household's consecutive days, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct Household {
    pub id: String,
    pub days: Vec<LoadCurve>,
}

/// Groups curves by household and sorts each household by date.
pub fn group_households(curves: &[LoadCurve]) -> Vec<Household> {
    let mut map: BTreeMap<&str, Vec<LoadCurve>> = BTreeMap::new();
    for c in curves {
        map.entry(c.household_id.as_str())
            .or_default()
            .push(c.clone());
    }
    map.into_iter()
        .map(|(id, mut days)| {
            days.sort_by_key(|c| c.date);
            Household {
                id: id.into(),
                days,
            }
        })
        .collect()
}

/// DTWE of one held-out day.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoldError {
    pub day: usize,
    pub day_type: DayType,
    pub dtwe: f64,
}

/// Leave-one-day-out evaluation of the DTW-Markov predictor on one
/// household. Each day with a predecessor is held out in turn; transitions
/// touching it are dropped, the remaining days train the chains and the
/// naive scale.
pub fn leave_one_out(
    days: &[LoadCurve],
    encoded: &[EncodedDay],
    set: &PrototypeSet,
    split_day_type: bool,
) -> Result<Vec<FoldError>> {
    if days.len() < 3 {
        return Err(Error::InsufficientHistory {
            needed: 3,
            got: days.len(),
        });
    }
    let width = set.width();
    let mut folds = Vec::with_capacity(days.len() - 1);
    for held in 1..days.len() {
        let pairs: Vec<_> = (1..days.len())
            .filter(|&d| d != held && d - 1 != held)
            .map(|d| (&encoded[d - 1], &encoded[d]))
            .collect();
        let training: Vec<_> = (0..days.len())
            .filter(|&d| d != held)
            .map(|d| &encoded[d])
            .collect();
        let predictor = MarkovPredictor::fit(&pairs, &training, set, split_day_type)?;
        let (clusters, _) = predictor.predict(&encoded[held - 1], encoded[held].day_type);
        let mut pred = Vec::with_capacity(HOURS);
        for (p, &a) in clusters.iter().enumerate() {
            let range = p * width..(p + 1) * width;
            let past: Vec<&[f64]> = (0..days.len())
                .filter(|&d| d != held)
                .map(|d| &days[d].values()[range.clone()])
                .collect();
            pred.extend(scale_naive(set.prototype(p, a), &past)?.values);
        }
        folds.push(FoldError {
            day: held,
            day_type: days[held].day_type,
            dtwe: dtwe(&pred, days[held].values())?,
        });
    }
    Ok(folds)
}

/// Yesterday-repeats baseline over the same folds as [`leave_one_out`].
pub fn persistence_folds(days: &[LoadCurve]) -> Result<Vec<FoldError>> {
    (1..days.len())
        .map(|held| {
            Ok(FoldError {
                day: held,
                day_type: days[held].day_type,
                dtwe: dtwe(days[held - 1].values(), days[held].values())?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectOptions {
    pub k_grid: Vec<usize>,
    pub np_grid: Vec<usize>,
    pub seed: u64,
    pub restarts: usize,
    pub max_iter: usize,
    pub split_day_type: bool,
}

/// Mean DTWE and fold count, overall and per held-out day type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSummary {
    pub mean: f64,
    pub folds: usize,
    pub weekday: Option<f64>,
    pub weekend: Option<f64>,
}

impl ErrorSummary {
    pub fn from_folds(folds: &[FoldError]) -> Self {
        let mean_of = |filter: Option<DayType>| {
            let picked: Vec<f64> = folds
                .iter()
                .filter(|f| filter.is_none_or(|t| f.day_type == t))
                .map(|f| f.dtwe)
                .collect();
            if picked.is_empty() {
                None
            } else {
                Some(picked.iter().sum::<f64>() / picked.len() as f64)
            }
        };
        ErrorSummary {
            mean: mean_of(None).unwrap_or(f64::NAN),
            folds: folds.len(),
            weekday: mean_of(Some(DayType::Weekday)),
            weekend: mean_of(Some(DayType::Weekend)),
        }
    }
}

/// One (K, n_p) cell of the selection grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionCell {
    pub k: usize,
    pub n_p: usize,
    pub error: ErrorSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionReport {
    /// Ordered by n_p, then K, following the option grids.
    pub cells: Vec<SelectionCell>,
    pub persistence: ErrorSummary,
}

impl SelectionReport {
    pub fn cell(&self, k: usize, n_p: usize) -> Option<&SelectionCell> {
        self.cells.iter().find(|c| c.k == k && c.n_p == n_p)
    }

    /// Cell with the lowest mean DTWE.
    pub fn best(&self) -> Option<&SelectionCell> {
        self.cells
            .iter()
            .fold(None, |best: Option<&SelectionCell>, c| match best {
                Some(b) if b.error.mean <= c.error.mean => Some(b),
                _ => Some(c),
            })
    }
}

/// Seed of the clustering run for grid cell `(n_p, k)` and period `p`.
pub fn selection_seed(seed: u64, n_p: usize, k: usize, p: usize) -> u64 {
    derive_seed(
        seed,
        "select",
        ((n_p as u64) << 40) | ((k as u64) << 20) | p as u64,
    )
}

/// Leave-one-out model selection over a K x n_p grid.
///
/// For every n_p the period slices of all households are normalised and
/// their pairwise DTW matrices computed once; every K then clusters each
/// period, encodes all days and scores leave-one-out predictions.
pub fn model_select(households: &[Household], opts: &SelectOptions) -> Result<SelectionReport> {
    if households.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(h) = households.iter().find(|h| h.days.len() < 3) {
        return Err(Error::InsufficientHistory {
            needed: 3,
            got: h.days.len(),
        });
    }
    let all: Vec<&LoadCurve> = households.iter().flat_map(|h| h.days.iter()).collect();
    let mut cells = Vec::new();
    for &n_p in &opts.np_grid {
        let width = check_periods(n_p)?;
        let slices: Vec<Vec<Vec<f64>>> = (0..n_p)
            .map(|p| {
                all.iter()
                    .map(|c| {
                        normalize_slice(&c.values()[p * width..(p + 1) * width])
                            .map_err(|_| Error::AllZeroSlice)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let matrices = slices
            .iter()
            .map(|s| DistanceMatrix::compute(s, Metric::Dtw))
            .collect::<Result<Vec<_>>>()?;
        let results: Vec<Result<SelectionCell>> = par::map_range(opts.k_grid.len(), |ki| {
            let k = opts.k_grid[ki];
            let models = (0..n_p)
                .map(|p| {
                    let copts = ClusterOptions {
                        k,
                        seed: selection_seed(opts.seed, n_p, k, p),
                        max_iter: opts.max_iter,
                        restarts: opts.restarts,
                    };
                    kmedoids_with_matrix(&slices[p], &matrices[p], Metric::Dtw, &copts)
                })
                .collect::<Result<Vec<_>>>()?;
            let set = PrototypeSet::from_models(&models)?;
            let mut folds = Vec::new();
            for h in households {
                let encoded = h
                    .days
                    .iter()
                    .map(|c| encode_day(c.values(), c.day_type, &set))
                    .collect::<Result<Vec<_>>>()?;
                folds.extend(leave_one_out(&h.days, &encoded, &set, opts.split_day_type)?);
            }
            Ok(SelectionCell {
                k,
                n_p,
                error: ErrorSummary::from_folds(&folds),
            })
        });
        for r in results {
            cells.push(r?);
        }
    }
    let mut persistence = Vec::new();
    for h in households {
        persistence.extend(persistence_folds(&h.days)?);
    }
    Ok(SelectionReport {
        cells,
        persistence: ErrorSummary::from_folds(&persistence),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn day(t: DayType, c: &[usize]) -> EncodedDay {
        EncodedDay::new(t, c.to_vec())
    }

    #[test]
    fn contexts_for_two_periods() {
        let prev = day(DayType::Weekday, &[4, 7]);
        assert_eq!(transition_context(&prev, &[], 0), vec![4, 7]);
        assert_eq!(transition_context(&prev, &[2], 1), vec![2, 7]);
    }

    #[test]
    fn deterministic_chain() {
        let days = vec![day(DayType::Weekday, &[1]); 5];
        let model = p_transition(&days, 0, 3).unwrap();
        assert_eq!(model.probability(&[1], 1), Some(1.0));
        assert_eq!(model.pair_count(), 4);
        assert!(matches!(
            p_transition(&days[..1], 0, 3),
            Err(Error::InsufficientHistory { needed: 2, got: 1 })
        ));
    }

    fn set_with(n_p: usize, k: usize) -> PrototypeSet {
        let width = HOURS / n_p;
        let periods = (0..n_p)
            .map(|_| PeriodPrototypes {
                prototypes: (0..k)
                    .map(|i| {
                        let mut v = vec![0.01; width];
                        v[i % width] = 1.0;
                        normalize_slice(&v).unwrap()
                    })
                    .collect(),
                sizes: vec![1; k],
            })
            .collect();
        PrototypeSet::new(n_p, periods).unwrap()
    }

    #[test]
    fn cyclic_history_predicts_successor() {
        let set = set_with(1, 3);
        for len in 4..10 {
            let encoded: Vec<_> = (0..len).map(|d| day(DayType::Weekday, &[d % 3])).collect();
            let f = predict_encoded(&encoded, &set, DayType::Weekday, false).unwrap();
            assert_eq!(f.clusters, vec![len % 3]);
            assert_eq!(f.sources, vec![PredictionSource::Transition]);
        }
    }

    #[test]
    fn unseen_context_backs_off_to_marginal() {
        let set = set_with(1, 4);
        let encoded = vec![
            day(DayType::Weekday, &[0]),
            day(DayType::Weekday, &[2]),
            day(DayType::Weekday, &[2]),
            day(DayType::Weekday, &[3]),
        ];
        let f = predict_encoded(&encoded, &set, DayType::Weekday, false).unwrap();
        assert_eq!(f.clusters, vec![2]);
        assert_eq!(f.sources, vec![PredictionSource::Marginal]);
    }

    #[test]
    fn dp_enc_picks_prototype_and_ignores_scale() {
        let set = set_with(1, 5);
        let protos = &set.period(0).prototypes;
        assert_eq!(dp_enc(&protos[3], protos).unwrap(), 3);
        let scaled: Vec<f64> = protos[3].iter().map(|v| 5.0 * v).collect();
        assert_eq!(dp_enc(&scaled, protos).unwrap(), 3);
        assert_eq!(dp_enc(&[0.0; 24], protos), Err(Error::AllZeroSlice));
    }

    #[test]
    fn scaling_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(scale_factor(&[(&x, &x)], 1.0).unwrap(), 1.0);
        assert_eq!(scale_factor(&[], 1.0), Err(Error::NoHistory));
        assert!(scale_factor(&[(&x, &x)], 0.0).is_err());
        assert!(scale_factor(&[(&x, &x)], 1.5).is_err());

        let shape = [0.25; 4];
        let a = [1.0, 1.0, 1.0, 1.0];
        let b = [2.0, 2.0, 2.0, 2.0];
        let out = scale_naive(&shape, &[&a, &b]).unwrap();
        assert!((out.values.iter().sum::<f64>() - 6.0).abs() < 1e-12);
        assert_eq!(out.alpha, 6.0);
        let out = scale_naive(&shape, &[&b]).unwrap();
        assert!((out.values.iter().sum::<f64>() - 8.0).abs() < 1e-12);
        assert_eq!(scale_naive(&shape, &[]), Err(Error::NoHistory));
    }

    #[test]
    fn dtwe_examples() {
        let a = [2.0; 24];
        assert_eq!(dtwe(&a, &a).unwrap(), 0.0);
        let p = [3.0; 24];
        assert!((dtwe(&p, &a).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(dtwe(&p, &[0.0; 24]), Err(Error::ZeroActual));
    }

    fn curve(date: NaiveDate, values: &[f64]) -> LoadCurve {
        crate::curves::validate_curve(values, "h", date).unwrap()
    }

    #[test]
    fn identical_days_forecast_exactly() {
        let mut values = [0.2; 24];
        values[7] = 1.5;
        values[19] = 2.5;
        let start = NaiveDate::from_ymd_opt(2012, 7, 19).unwrap();
        let history: Vec<_> = (0..6)
            .map(|d| curve(start + chrono::Days::new(d), &values))
            .collect();
        let shape = normalize_slice(&values).unwrap();
        let set = PrototypeSet::new(
            1,
            vec![PeriodPrototypes {
                prototypes: vec![set_with(1, 1).prototype(0, 0).to_vec(), shape],
                sizes: vec![1, 1],
            }],
        )
        .unwrap();
        let f = forecast_next_day(&history, &set, &ForecastOptions::default()).unwrap();
        assert_eq!(f.clusters, vec![1]);
        assert_eq!(f.scaling, ScalingMethod::Weighted { days: 4 });
        for (a, b) in f.values.iter().zip(values) {
            assert!((a - b).abs() < 1e-12);
        }
        let f = forecast_next_day(&history[..2], &set, &ForecastOptions::default()).unwrap();
        assert_eq!(f.scaling, ScalingMethod::Naive);
        assert!(dtwe(&f.values, &values).unwrap() < 1e-7);
    }
}
