use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use log::warn;

use crate::error::{GraftError, Result};

pub const SLOTS_PER_DAY: usize = 48;

/// Longest run of missing half-hours that is filled by interpolation.
const MAX_INTERP_RUN: usize = 2;

/// Half-hourly load of one region, one row of 48 slots per calendar day.
/// Days are strictly increasing; dropped days leave gaps.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadPanel {
    pub region: String,
    pub days: Vec<NaiveDate>,
    pub values: Vec<[f64; SLOTS_PER_DAY]>,
}

impl LoadPanel {
    pub fn new(region: impl Into<String>, days: Vec<NaiveDate>, values: Vec<[f64; SLOTS_PER_DAY]>) -> Result<Self> {
        if days.len() != values.len() {
            return Err(GraftError::Input("days and value rows differ in length".into()));
        }
        if days.windows(2).any(|w| w[1] <= w[0]) {
            return Err(GraftError::Input("panel days must be strictly increasing".into()));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(GraftError::Input("panel values must be finite".into()));
        }
        Ok(Self {
            region: region.into(),
            days,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    pub fn day_index(&self, day: NaiveDate) -> Option<usize> {
        self.days.binary_search(&day).ok()
    }

    pub fn day(&self, day: NaiveDate) -> Option<&[f64; SLOTS_PER_DAY]> {
        self.day_index(day).map(|i| &self.values[i])
    }

    /// True when days `start..start+n` are consecutive calendar days.
    pub fn is_contiguous(&self, start: usize, n: usize) -> bool {
        self.days[start..start + n]
            .windows(2)
            .all(|w| (w[1] - w[0]).num_days() == 1)
    }
}

/// Fills missing points (`None`) in one day. Runs of at most two slots are
/// linearly interpolated (edge runs copy the nearest value); longer runs
/// reject the day.
fn clean_day(raw: &[Option<f64>; SLOTS_PER_DAY]) -> Option<[f64; SLOTS_PER_DAY]> {
    let mut out = [0.0; SLOTS_PER_DAY];
    let mut i = 0;
    while i < SLOTS_PER_DAY {
        if let Some(v) = raw[i] {
            out[i] = v;
            i += 1;
            continue;
        }
        let start = i;
        while i < SLOTS_PER_DAY && raw[i].is_none() {
            i += 1;
        }
        let run = i - start;
        if run > MAX_INTERP_RUN {
            return None;
        }
        let left = start.checked_sub(1).and_then(|j| raw[j]);
        let right = raw.get(i).copied().flatten();
        for (k, slot) in (start..i).enumerate() {
            out[slot] = match (left, right) {
                (Some(a), Some(b)) => a + (b - a) * (k + 1) as f64 / (run + 1) as f64,
                (Some(a), None) => a,
                (None, Some(b)) => b,
                (None, None) => return None,
            };
        }
    }
    Some(out)
}

fn parse_value(s: &str) -> Option<f64> {
    let v: f64 = s.trim().parse().ok()?;
    (v.is_finite() && v >= 0.0).then_some(v)
}

/// Reads `region,date,slot,load_mw` rows into one panel per region.
///
/// Every present day must list each slot 1..=48 exactly once. Empty,
/// non-numeric, negative or non-finite loads count as missing points.
pub fn read_load_csv(path: &Path) -> Result<Vec<LoadPanel>> {
    let schema = |line: usize, message: String| GraftError::Schema {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = rdr.headers()?.clone();
    let expected = ["region", "date", "slot", "load_mw"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(schema(1, format!("expected header {}", expected.join(","))));
    }

    type DayRows = (usize, [Option<f64>; SLOTS_PER_DAY], [bool; SLOTS_PER_DAY]);
    let mut regions: BTreeMap<String, BTreeMap<NaiveDate, DayRows>> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec?;
        if rec.len() != 4 {
            return Err(schema(line, format!("expected 4 fields, got {}", rec.len())));
        }
        let date = NaiveDate::parse_from_str(&rec[1], "%Y-%m-%d")
            .map_err(|e| schema(line, format!("bad date {:?}: {e}", &rec[1])))?;
        let slot: usize = rec[2]
            .parse()
            .map_err(|_| schema(line, format!("bad slot {:?}", &rec[2])))?;
        if !(1..=SLOTS_PER_DAY).contains(&slot) {
            return Err(schema(line, format!("slot {slot} outside 1..=48")));
        }
        let day = regions
            .entry(rec[0].to_string())
            .or_default()
            .entry(date)
            .or_insert((line, [None; SLOTS_PER_DAY], [false; SLOTS_PER_DAY]));
        if day.2[slot - 1] {
            return Err(schema(line, format!("duplicate slot {slot} on {date}")));
        }
        day.2[slot - 1] = true;
        day.1[slot - 1] = parse_value(&rec[3]);
    }

    let mut panels = Vec::new();
    for (region, days) in regions {
        let mut dates = Vec::new();
        let mut values = Vec::new();
        for (date, (line, raw, seen)) in days {
            let count = seen.iter().filter(|&&s| s).count();
            if count != SLOTS_PER_DAY {
                return Err(schema(
                    line,
                    format!("region {region} date {date} has {count} slots, expected 48"),
                ));
            }
            match clean_day(&raw) {
                Some(v) => {
                    dates.push(date);
                    values.push(v);
                }
                None => warn!("{region} {date}: missing run longer than {MAX_INTERP_RUN} slots, day dropped"),
            }
        }
        panels.push(LoadPanel::new(region, dates, values)?);
    }
    Ok(panels)
}

pub fn write_load_csv(panels: &[LoadPanel], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["region", "date", "slot", "load_mw"])?;
    for p in panels {
        for (day, vals) in p.days.iter().zip(&p.values) {
            let date = day.format("%Y-%m-%d").to_string();
            for (s, v) in vals.iter().enumerate() {
                w.write_record([p.region.as_str(), &date, &(s + 1).to_string(), &v.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
