//! Census histograms at three levels of detail: by gender, by gender and age
//! group, and by gender, age group and native country.

use std::collections::BTreeMap;

use crate::accuracy::{add, norm_inf};
use crate::data::{DatasetHandle, Datum};
use crate::error::{Error, Result};
use crate::model::{Epsilon, NoisyValue};
use crate::plan::{sequence, Query};

pub const GENDERS: [&str; 2] = ["Female", "Male"];

pub const AGE_GROUPS: [&str; 8] = ["<25", "25-34", "35-44", "45-54", "55-64", "65-74", "75-84", "85+"];

pub const NATIONALITIES: [&str; 39] = [
    "United-States",
    "Cambodia",
    "England",
    "Puerto-Rico",
    "Canada",
    "Germany",
    "Outlying-US(Guam-USVI-etc)",
    "India",
    "Japan",
    "Greece",
    "South",
    "China",
    "Cuba",
    "Iran",
    "Honduras",
    "Philippines",
    "Italy",
    "Poland",
    "Jamaica",
    "Vietnam",
    "Mexico",
    "Portugal",
    "Ireland",
    "France",
    "Dominican-Republic",
    "Laos",
    "Ecuador",
    "Taiwan",
    "Haiti",
    "Columbia",
    "Hungary",
    "Guatemala",
    "Nicaragua",
    "Scotland",
    "Thailand",
    "Yugoslavia",
    "El-Salvador",
    "Trinadad&Tobago",
    "Peru",
];

/// Level of detail of a histogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Level {
    Gen,
    GenAge,
    GenAgeNat,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Gen, Level::GenAge, Level::GenAgeNat];

    pub fn name(self) -> &'static str {
        match self {
            Level::Gen => "byGen",
            Level::GenAge => "byGenAge",
            Level::GenAgeNat => "byGenAgeNat",
        }
    }

    /// Every key of this level, in ascending order.
    pub fn keys(self) -> Vec<Datum> {
        let mut keys = Vec::new();
        for g in GENDERS {
            match self {
                Level::Gen => keys.push(Datum::Tuple(vec![Datum::text(g)])),
                _ => {
                    for a in AGE_GROUPS {
                        match self {
                            Level::GenAge => keys.push(Datum::Tuple(vec![Datum::text(g), Datum::text(a)])),
                            _ => {
                                for n in NATIONALITIES {
                                    keys.push(Datum::Tuple(vec![Datum::text(g), Datum::text(a), Datum::text(n)]))
                                }
                            }
                        }
                    }
                }
            }
        }
        keys.sort();
        keys
    }

    /// Key of `row` at this level, or `None` when a field is missing or
    /// outside the known domain.
    pub fn key_of(self, row: &Datum) -> Option<Datum> {
        let gender = row.field("sex")?.as_str()?;
        if !GENDERS.contains(&gender) {
            return None;
        }
        let mut key = vec![Datum::text(gender)];
        if self >= Level::GenAge {
            key.push(Datum::text(age_group(row.field("age")?.as_i64()?)?));
        }
        if self == Level::GenAgeNat {
            let nat = row.field("native_country")?.as_str()?;
            if !NATIONALITIES.contains(&nat) {
                return None;
            }
            key.push(Datum::text(nat));
        }
        Some(Datum::Tuple(key))
    }
}

pub fn age_group(age: i64) -> Option<&'static str> {
    let i = match age {
        i64::MIN..=-1 => return None,
        0..=24 => 0,
        85.. => 7,
        _ => ((age - 25) / 10 + 1) as usize,
    };
    Some(AGE_GROUPS[i])
}

/// Noisy count per key at ε, as one vector in key order measured in the
/// ∞-norm.
pub fn histogram(level: Level, eps: Epsilon, d: &DatasetHandle) -> Query<NoisyValue> {
    d.partition_repeat(
        move |row| level.key_of(row).unwrap_or(Datum::Bool(false)),
        level.keys(),
        move |part| part.count(eps),
    )
    .try_map(|counts| norm_inf(&counts.into_values().collect::<Vec<_>>()))
}

/// All three levels, each measured separately with its own ε. Costs
/// `e1 + e2 + e3`.
pub fn hierarchical_split(
    e1: Epsilon,
    e2: Epsilon,
    e3: Epsilon,
    d: &DatasetHandle,
) -> Query<(NoisyValue, NoisyValue, NoisyValue)> {
    sequence(vec![
        histogram(Level::Gen, e1, d),
        histogram(Level::GenAge, e2, d),
        histogram(Level::GenAgeNat, e3, d),
    ])
    .try_map(|levels| {
        let mut it = levels.into_iter();
        match (it.next(), it.next(), it.next()) {
            (Some(a), Some(b), Some(c)) => Ok((a, b, c)),
            _ => Err(Error::contract("expected three histograms")),
        }
    })
}

/// Only the finest level is measured, at ε. The coarser levels are sums of
/// its cells, so the whole plan costs ε.
pub fn hierarchical_bottom_up(eps: Epsilon, d: &DatasetHandle) -> Query<(NoisyValue, NoisyValue, NoisyValue)> {
    d.partition_repeat(
        |row| Level::GenAgeNat.key_of(row).unwrap_or(Datum::Bool(false)),
        Level::GenAgeNat.keys(),
        move |part| part.count(eps),
    )
    .try_map(|cells| {
        let gen = roll_up(&cells, 1)?;
        let gen_age = roll_up(&cells, 2)?;
        let finest: Vec<NoisyValue> = cells.into_values().collect();
        Ok((norm_inf(&gen)?, norm_inf(&gen_age)?, norm_inf(&finest)?))
    })
}

// sum the finest cells sharing the first `prefix` key components
fn roll_up(cells: &BTreeMap<Datum, NoisyValue>, prefix: usize) -> Result<Vec<NoisyValue>> {
    let mut groups: BTreeMap<Vec<Datum>, Vec<NoisyValue>> = BTreeMap::new();
    for (key, value) in cells {
        let Datum::Tuple(parts) = key else {
            return Err(Error::contract("histogram keys are tuples"));
        };
        groups
            .entry(parts[..prefix].to_vec())
            .or_default()
            .push(value.clone());
    }
    groups.values().map(|vs| add(vs)).collect()
}
