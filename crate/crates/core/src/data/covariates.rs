use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::NaiveDate;

use crate::error::{GraftError, Result};

/// Named daily numeric covariates per region (weather, calendar flags).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Covariates {
    names: Vec<String>,
    values: BTreeMap<(String, NaiveDate), Vec<f64>>,
}

impl Covariates {
    pub fn new(names: Vec<String>) -> Self {
        Self {
            names,
            values: BTreeMap::new(),
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn insert(&mut self, region: &str, day: NaiveDate, row: Vec<f64>) -> Result<()> {
        if row.len() != self.names.len() {
            return Err(GraftError::Dimension(format!(
                "covariate row has {} values, expected {}",
                row.len(),
                self.names.len()
            )));
        }
        self.values.insert((region.to_string(), day), row);
        Ok(())
    }

    /// All covariates of one region/day, if every one is present.
    pub fn get(&self, region: &str, day: NaiveDate) -> Option<&[f64]> {
        self.values.get(&(region.to_string(), day)).map(Vec::as_slice)
    }
}

/// Reads long-format `region,date,name,value`. A region/day that lacks any
/// of the covariate names seen in the file is left out.
pub fn read_covariates_csv(path: &Path) -> Result<Covariates> {
    let schema = |line: usize, message: String| GraftError::Schema {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    if rdr.headers()?.iter().collect::<Vec<_>>() != ["region", "date", "name", "value"] {
        return Err(schema(1, "expected header region,date,name,value".into()));
    }
    let mut long: BTreeMap<(String, NaiveDate), BTreeMap<String, f64>> = BTreeMap::new();
    let mut names = BTreeSet::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec?;
        let day = NaiveDate::parse_from_str(&rec[1], "%Y-%m-%d").map_err(|e| schema(line, e.to_string()))?;
        let v: f64 = rec[3].parse().map_err(|_| schema(line, format!("bad value {:?}", &rec[3])))?;
        if !v.is_finite() {
            return Err(schema(line, "non-finite covariate".into()));
        }
        names.insert(rec[2].to_string());
        long.entry((rec[0].to_string(), day)).or_default().insert(rec[2].to_string(), v);
    }
    let names: Vec<String> = names.into_iter().collect();
    let mut cov = Covariates::new(names.clone());
    for ((region, day), row) in long {
        if row.len() == names.len() {
            cov.insert(&region, day, names.iter().map(|n| row[n]).collect())?;
        }
    }
    Ok(cov)
}

pub fn write_covariates_csv(cov: &Covariates, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["region", "date", "name", "value"])?;
    for ((region, day), row) in &cov.values {
        let date = day.format("%Y-%m-%d").to_string();
        for (n, v) in cov.names.iter().zip(row) {
            w.write_record([region.as_str(), &date, n, &v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cov.csv");
        let mut c = Covariates::new(vec!["holiday".into(), "temp".into()]);
        let d = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        c.insert("NSW", d, vec![1.0, 31.7]).unwrap();
        c.insert("NSW", d.succ_opt().unwrap(), vec![0.0, 28.25]).unwrap();
        write_covariates_csv(&c, &p).unwrap();
        assert_eq!(read_covariates_csv(&p).unwrap(), c);
    }
}
