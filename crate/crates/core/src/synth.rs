//! Synthetic households built from fixed device routines with hourly jitter.
//!
//! Every day each device's start hour is shifted by an integer drawn
//! uniformly from `-jitter..=jitter`. Hourly energy is the baseline load plus
//! the power of every device running in that hour, so the generator also
//! knows the true appliance usage matrix of each day.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use chrono::{Days, NaiveDate};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};

use crate::curves::{validate_curve, DayType, LoadCurve};
use crate::pld::{PldMatrix, PowerVector};
use crate::rng::{derive_seed, ChaCha8Rng};
use crate::{par, Error, Result, HOURS};

/// Largest supported start-time jitter, in hours.
pub const MAX_JITTER: u32 = 1;
/// Name of the always-on column of the ground-truth matrices.
pub const BASELINE_COLUMN: &str = "baseline";

/// One appliance routine.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DeviceProfile {
    pub name: String,
    /// kW
    pub power: f64,
    /// Nominal start hour, 0-based.
    pub start: usize,
    /// Hours.
    pub duration: usize,
    #[cfg_attr(feature = "serde", serde(default))]
    pub jitter: u32,
}

impl DeviceProfile {
    pub fn new(name: &str, power: f64, start: usize, duration: usize, jitter: u32) -> Self {
        DeviceProfile {
            name: name.to_string(),
            power,
            start,
            duration,
            jitter,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.power.is_finite()
            && self.power > 0.0
            && self.duration >= 1
            && self.start + self.duration <= HOURS
            && self.jitter <= MAX_JITTER
            && !self.name.is_empty()
            && self.name != BASELINE_COLUMN;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidDevice {
                name: self.name.clone(),
            })
        }
    }
}

/// A household routine. `weekend` falls back to `weekday` when absent.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HouseholdArchetype {
    pub id: String,
    /// kW drawn in every hour.
    pub baseline: f64,
    pub weekday: Vec<DeviceProfile>,
    #[cfg_attr(
        feature = "serde",
        serde(default, skip_serializing_if = "Option::is_none")
    )]
    pub weekend: Option<Vec<DeviceProfile>>,
}

impl HouseholdArchetype {
    pub fn devices(&self, day_type: DayType) -> &[DeviceProfile] {
        match (day_type, &self.weekend) {
            (DayType::Weekend, Some(w)) => w,
            _ => &self.weekday,
        }
    }

    /// Device names across both day types, weekday order first.
    pub fn device_names(&self) -> Vec<String> {
        let mut names: Vec<String> = Vec::new();
        let weekend = self.weekend.iter().flatten();
        for d in self.weekday.iter().chain(weekend) {
            if !names.contains(&d.name) {
                names.push(d.name.clone());
            }
        }
        names
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.baseline.is_finite() && self.baseline > 0.0) {
            return Err(Error::InvalidParameter("baseline must be positive".into()));
        }
        for list in core::iter::once(&self.weekday).chain(self.weekend.iter()) {
            if list.is_empty() {
                return Err(Error::InvalidParameter(
                    "an archetype needs at least one device".into(),
                ));
            }
            for (i, d) in list.iter().enumerate() {
                d.validate()?;
                if list[..i].iter().any(|o| o.name == d.name) {
                    return Err(Error::InvalidDevice {
                        name: d.name.clone(),
                    });
                }
            }
        }
        // A device name must denote one power level.
        let weekend = self.weekend.iter().flatten();
        for d in self.weekday.iter().chain(weekend.clone()) {
            if self
                .weekday
                .iter()
                .chain(weekend.clone())
                .any(|o| o.name == d.name && o.power != d.power)
            {
                return Err(Error::InvalidDevice {
                    name: d.name.clone(),
                });
            }
        }
        Ok(())
    }

    /// Ground-truth power levels: baseline first, then [`Self::device_names`].
    pub fn power_vector(&self) -> Result<PowerVector> {
        let mut power = vec![self.baseline];
        let weekend = self.weekend.iter().flatten();
        for name in self.device_names() {
            let dev = self
                .weekday
                .iter()
                .chain(weekend.clone())
                .find(|d| d.name == name)
                .expect("named device");
            power.push(dev.power);
        }
        PowerVector::new(power, 1.0)
    }
}

/// One generated day.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedDay {
    pub curve: LoadCurve,
    /// Hours x (baseline + devices) usage; `truth * p = curve`.
    pub truth: PldMatrix,
    /// Devices whose jittered run was pushed back inside the day.
    pub overflow: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedHousehold {
    pub id: String,
    pub archetype: String,
    /// Column names of the truth matrices.
    pub columns: Vec<String>,
    pub power: PowerVector,
    pub days: Vec<GeneratedDay>,
}

/// Simulate `days` consecutive days starting at `start`.
pub fn generate_household(
    archetype: &HouseholdArchetype,
    household_id: &str,
    start: NaiveDate,
    days: usize,
    seed: u64,
) -> Result<GeneratedHousehold> {
    if days == 0 {
        return Err(Error::InvalidParameter("days must be at least 1".into()));
    }
    archetype.validate()?;
    let names = archetype.device_names();
    let power = archetype.power_vector()?;
    let p = power.power();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(days);
    for offset in 0..days {
        let date = start
            .checked_add_days(Days::new(offset as u64))
            .ok_or_else(|| Error::InvalidParameter("date out of range".into()))?;
        let day_type = DayType::of(date);
        let mut usage = DMatrix::<f64>::zeros(HOURS, names.len() + 1);
        usage.column_mut(0).fill(1.0);
        let mut overflow = Vec::new();
        for dev in archetype.devices(day_type) {
            let j = dev.jitter as i64;
            let shift = if j == 0 { 0 } else { rng.random_range(-j..=j) };
            let mut first = dev.start as i64 + shift;
            let latest = (HOURS - dev.duration) as i64;
            if first < 0 || first > latest {
                first = first.clamp(0, latest);
                overflow.push(dev.name.clone());
            }
            let col = 1 + names
                .iter()
                .position(|n| *n == dev.name)
                .expect("named device");
            for h in first as usize..first as usize + dev.duration {
                usage[(h, col)] = 1.0;
            }
        }
        let mut raw = [0.0; HOURS];
        for (h, v) in raw.iter_mut().enumerate() {
            *v = (0..p.len()).map(|c| usage[(h, c)] * p[c]).sum();
        }
        let curve = validate_curve(&raw, household_id, date)?;
        out.push(GeneratedDay {
            curve,
            truth: PldMatrix::from_matrix(usage),
            overflow,
        });
    }
    let mut columns = vec![BASELINE_COLUMN.to_string()];
    columns.extend(names);
    Ok(GeneratedHousehold {
        id: household_id.to_string(),
        archetype: archetype.id.clone(),
        columns,
        power,
        days: out,
    })
}

/// Households of several archetypes with their generator labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Population {
    pub households: Vec<GeneratedHousehold>,
}

impl Population {
    /// All curves, household by household, day by day.
    pub fn curves(&self) -> Vec<LoadCurve> {
        self.households
            .iter()
            .flat_map(|h| h.days.iter().map(|d| d.curve.clone()))
            .collect()
    }

    /// Archetype index of every curve, aligned with [`Self::curves`].
    pub fn labels(&self) -> Vec<usize> {
        let mut ids: Vec<&str> = Vec::new();
        let mut labels = Vec::new();
        for h in &self.households {
            let idx = match ids.iter().position(|a| *a == h.archetype) {
                Some(i) => i,
                None => {
                    ids.push(&h.archetype);
                    ids.len() - 1
                }
            };
            labels.extend(core::iter::repeat_n(idx, h.days.len()));
        }
        labels
    }

    pub fn len(&self) -> usize {
        self.households.iter().map(|h| h.days.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `households_per` households of every archetype; household `n` overall
/// is named `h{n:03}` and seeded from `(seed, "household", n)`.
pub fn generate_population(
    archetypes: &[HouseholdArchetype],
    households_per: usize,
    days: usize,
    start: NaiveDate,
    seed: u64,
) -> Result<Population> {
    for a in archetypes {
        a.validate()?;
    }
    let total = archetypes.len() * households_per;
    if total > 0 && days == 0 {
        return Err(Error::InvalidParameter("days must be at least 1".into()));
    }
    let generated = par::map_range(total, |n| {
        let archetype = &archetypes[n / households_per];
        let id = alloc::format!("h{:03}", n + 1);
        generate_household(
            archetype,
            &id,
            start,
            days,
            derive_seed(seed, "household", n as u64),
        )
    });
    Ok(Population {
        households: generated.into_iter().collect::<Result<_>>()?,
    })
}

/// First day of the bundled benchmark (a Thursday).
pub fn benchmark_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2012, 7, 19).expect("valid date")
}

pub const BENCHMARK_HOUSEHOLDS: usize = 20;
pub const BENCHMARK_DAYS: usize = 22;
pub const BENCHMARK_SEED: u64 = 20_120_719;

/// The bundled corpus: 20 households of each archetype over 22 days.
pub fn benchmark_population(seed: u64) -> Result<Population> {
    generate_population(
        &benchmark_archetypes(),
        BENCHMARK_HOUSEHOLDS,
        BENCHMARK_DAYS,
        benchmark_start(),
        seed,
    )
}

/// The bundled morning-peak, evening-peak and dual-peak routines.
pub fn benchmark_archetypes() -> Vec<HouseholdArchetype> {
    let d = DeviceProfile::new;
    vec![
        HouseholdArchetype {
            id: "morning".into(),
            baseline: 0.2,
            weekday: vec![
                d("boiler", 1.0, 1, 2, 1),
                d("kettle", 2.0, 5, 1, 1),
                d("shower", 3.0, 8, 1, 1),
                d("dryer", 1.0, 11, 1, 1),
                d("lights", 0.5, 19, 2, 1),
            ],
            weekend: Some(vec![
                d("boiler", 1.0, 1, 2, 1),
                d("kettle", 2.0, 7, 1, 1),
                d("shower", 3.0, 10, 1, 1),
                d("vacuum", 1.0, 14, 1, 1),
                d("lights", 0.5, 19, 2, 1),
            ]),
        },
        HouseholdArchetype {
            id: "evening".into(),
            baseline: 0.3,
            weekday: vec![
                d("heater", 0.8, 2, 2, 1),
                d("aircon", 1.5, 13, 3, 1),
                d("oven", 3.0, 18, 1, 1),
                d("tv", 0.4, 19, 3, 1),
                d("dishwasher", 1.5, 21, 1, 1),
            ],
            weekend: Some(vec![
                d("heater", 0.8, 2, 2, 1),
                d("washer", 1.0, 9, 2, 1),
                d("aircon", 1.5, 13, 3, 1),
                d("oven", 3.0, 18, 1, 1),
                d("tv", 0.4, 19, 3, 1),
                d("dishwasher", 1.5, 21, 1, 1),
            ]),
        },
        HouseholdArchetype {
            id: "dual".into(),
            baseline: 0.25,
            weekday: vec![
                d("boiler", 1.2, 2, 1, 1),
                d("kettle", 2.5, 6, 1, 1),
                d("shower", 3.0, 9, 1, 1),
                d("oven", 2.5, 16, 1, 1),
                d("aircon", 1.5, 19, 2, 1),
                d("tv", 0.4, 18, 3, 1),
            ],
            weekend: None,
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(jitter: u32) -> HouseholdArchetype {
        HouseholdArchetype {
            id: "one".into(),
            baseline: 0.5,
            weekday: vec![DeviceProfile::new("heater", 2.0, 18, 3, jitter)],
            weekend: None,
        }
    }

    #[test]
    fn no_jitter_means_identical_days() {
        let h = generate_household(&single(0), "a", benchmark_start(), 10, 3).unwrap();
        assert!(h
            .days
            .iter()
            .all(|d| d.curve.values() == h.days[0].curve.values()));
    }

    #[test]
    fn single_device_block_positions() {
        let h = generate_household(&single(1), "a", benchmark_start(), 60, 11).unwrap();
        let mut seen = [false; 3];
        for day in &h.days {
            let v = day.curve.values();
            let on: Vec<usize> = (0..HOURS).filter(|&i| v[i] > 0.5).collect();
            assert_eq!(on.len(), 3);
            assert!(on.windows(2).all(|w| w[1] == w[0] + 1));
            assert!((17..=19).contains(&on[0]));
            seen[on[0] - 17] = true;
            assert!(on.iter().all(|&i| v[i] == 2.5));
            assert!((0..HOURS).filter(|i| !on.contains(i)).all(|i| v[i] == 0.5));
        }
        assert_eq!(seen, [true; 3]);
    }

    #[test]
    fn truth_reproduces_curve() {
        let pop = generate_population(&benchmark_archetypes(), 2, 9, benchmark_start(), 4).unwrap();
        for h in &pop.households {
            for d in &h.days {
                assert_eq!(d.truth.energy(&h.power).as_slice(), d.curve.values());
            }
        }
    }

    #[test]
    fn overflow_is_clamped_and_flagged() {
        let arch = HouseholdArchetype {
            id: "late".into(),
            baseline: 0.1,
            weekday: vec![DeviceProfile::new("lamp", 1.0, 21, 3, 1)],
            weekend: None,
        };
        let h = generate_household(&arch, "a", benchmark_start(), 40, 2).unwrap();
        assert!(h.days.iter().any(|d| d.overflow == ["lamp"]));
        for d in &h.days {
            assert_eq!(d.curve.values()[22], 1.1);
        }
    }

    #[test]
    fn population_shape_and_determinism() {
        let a = generate_population(&benchmark_archetypes(), 20, 22, benchmark_start(), 7).unwrap();
        assert_eq!(a.len(), 1320);
        assert_eq!(
            a,
            generate_population(&benchmark_archetypes(), 20, 22, benchmark_start(), 7).unwrap()
        );
        let labels = a.labels();
        assert_eq!(labels[0], 0);
        assert_eq!(labels[1319], 2);
        assert!(
            generate_population(&benchmark_archetypes(), 0, 22, benchmark_start(), 7)
                .unwrap()
                .is_empty()
        );
    }

    #[test]
    fn invalid_devices() {
        let mut bad = single(1);
        bad.weekday[0].start = 22;
        assert!(matches!(bad.validate(), Err(Error::InvalidDevice { .. })));
        let mut empty = single(1);
        empty.weekday.clear();
        assert!(empty.validate().is_err());
        assert!(generate_household(&single(1), "a", benchmark_start(), 0, 1).is_err());
    }
}
