//! JSON form of a fitted cluster model.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use loadshape_core::cluster::{ClusterModel, Metric, QualityReport};
use loadshape_core::predict::{PeriodPrototypes, PrototypeSet};
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult};

pub const MODEL_VERSION: u32 = 1;

/// Prototypes and fit statistics of one period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodModel {
    /// 1-based.
    pub p: usize,
    pub prototypes: Vec<Vec<f64>>,
    pub sizes: Vec<usize>,
    #[serde(rename = "WC")]
    pub wc: f64,
    #[serde(rename = "WB")]
    pub wb: f64,
    #[serde(rename = "WCBCR")]
    pub wcbcr: Option<f64>,
    pub converged: bool,
    pub wc_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub household_id: String,
    pub date: NaiveDate,
    /// 1-based cluster of every period.
    pub clusters: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    pub metric: Metric,
    pub k: usize,
    pub n_p: usize,
    pub seed: u64,
    pub restarts: usize,
    pub max_iter: usize,
    pub smoothing: f64,
    pub periods: Vec<PeriodModel>,
    pub assignments: Vec<Assignment>,
}

impl ModelFile {
    /// Assembles the file from one model per period and the curve keys the
    /// models were fitted on, in fitting order.
    pub fn from_models(
        models: &[ClusterModel],
        reports: &[QualityReport],
        keys: &[(String, NaiveDate)],
        seed: u64,
        restarts: usize,
        max_iter: usize,
        smoothing: f64,
    ) -> CliResult<Self> {
        let first = models
            .first()
            .ok_or_else(|| CliError::Runtime("no periods".into()))?;
        let periods = models
            .iter()
            .zip(reports)
            .enumerate()
            .map(|(p, (m, q))| PeriodModel {
                p: p + 1,
                prototypes: m.prototypes.clone(),
                sizes: m.cluster_sizes(),
                wc: q.wc,
                wb: q.wb,
                wcbcr: q.wcbcr,
                converged: m.converged,
                wc_history: m.wc_history.clone(),
            })
            .collect();
        let mut assignments: Vec<Assignment> = keys
            .iter()
            .enumerate()
            .map(|(i, (id, date))| Assignment {
                household_id: id.clone(),
                date: *date,
                clusters: models.iter().map(|m| m.assignments[i] + 1).collect(),
            })
            .collect();
        assignments.sort_by(|a, b| (&a.household_id, a.date).cmp(&(&b.household_id, b.date)));
        Ok(ModelFile {
            version: MODEL_VERSION,
            metric: first.metric,
            k: first.k,
            n_p: models.len(),
            seed,
            restarts,
            max_iter,
            smoothing,
            periods,
            assignments,
        })
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.version != MODEL_VERSION {
            return Err(CliError::invalid(format!(
                "unsupported model version {}",
                self.version
            )));
        }
        if self.periods.len() != self.n_p {
            return Err(CliError::invalid(format!(
                "model lists {} periods for n_p = {}",
                self.periods.len(),
                self.n_p
            )));
        }
        for a in &self.assignments {
            if a.clusters.len() != self.n_p || a.clusters.iter().any(|&c| c == 0 || c > self.k) {
                return Err(CliError::invalid(format!(
                    "bad assignment for {} {} in model",
                    a.household_id, a.date
                )));
            }
        }
        self.prototype_set().map(|_| ())
    }

    pub fn prototype_set(&self) -> CliResult<PrototypeSet> {
        let periods = self
            .periods
            .iter()
            .map(|p| PeriodPrototypes {
                prototypes: p.prototypes.clone(),
                sizes: p.sizes.clone(),
            })
            .collect();
        let set = PrototypeSet::new(self.n_p, periods)?;
        if set.k() != self.k {
            return Err(CliError::invalid(format!(
                "model declares k = {} but stores {}",
                self.k,
                set.k()
            )));
        }
        Ok(set)
    }

    /// 0-based clusters keyed by (household, date).
    pub fn assignment_map(&self) -> BTreeMap<(&str, NaiveDate), Vec<usize>> {
        self.assignments
            .iter()
            .map(|a| {
                (
                    (a.household_id.as_str(), a.date),
                    a.clusters.iter().map(|c| c - 1).collect(),
                )
            })
            .collect()
    }
}
