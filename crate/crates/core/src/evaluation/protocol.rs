use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use log::warn;
use serde::{Deserialize, Serialize};

use super::baseline::{stat_baseline, SeasonalProfile};
use super::metrics::{point_metrics, PointMetrics};
use crate::data::SLOTS_PER_DAY;
use crate::error::{GraftError, Result};

/// One evaluation window with the truth and every source's forecast.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalTask {
    pub id: String,
    pub region: String,
    pub horizon: String,
    pub start: NaiveDate,
    /// Half-hour slot of the first point on `start`.
    pub start_slot: usize,
    pub truth: Vec<f64>,
    /// Observation immediately before the window, for persistence.
    pub previous: Option<f64>,
    pub predictions: BTreeMap<String, Vec<f64>>,
}

impl EvalTask {
    pub fn window(&self) -> usize {
        self.truth.len()
    }

    /// Calendar day and slot of point `t`.
    pub fn position(&self, t: usize) -> (NaiveDate, usize) {
        let abs = self.start_slot + t;
        (self.start + chrono::Days::new((abs / SLOTS_PER_DAY) as u64), abs % SLOTS_PER_DAY)
    }

    pub fn validate(&self) -> Result<()> {
        if self.truth.is_empty() || self.start_slot >= SLOTS_PER_DAY {
            return Err(GraftError::Input(format!("task {}: empty window or bad start slot", self.id)));
        }
        for (src, p) in &self.predictions {
            if p.len() != self.truth.len() {
                return Err(GraftError::Input(format!(
                    "task {}: source {src} has {} points, expected {}",
                    self.id,
                    p.len(),
                    self.truth.len()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskRmse {
    pub id: String,
    pub rmse_stat: f64,
    pub rmse: BTreeMap<String, f64>,
}

/// Per-task RMSE for every source plus the statistical baseline.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RmseTable {
    pub sources: Vec<String>,
    pub tasks: Vec<TaskRmse>,
}

impl RmseTable {
    fn cell(&self, task: &TaskRmse, src: &str) -> Result<f64> {
        match task.rmse.get(src) {
            Some(v) if v.is_finite() => Ok(*v),
            _ => Err(GraftError::Protocol(format!("task {} has no RMSE for source {src}", task.id))),
        }
    }
}

/// Reads `task,source,rmse` rows; the source name `stat` carries the baseline.
pub fn read_rmse_table(path: &Path) -> Result<RmseTable> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut table = RmseTable::default();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |m: String| GraftError::Schema { path: path.to_path_buf(), line: i + 2, message: m };
        if rec.len() != 3 {
            return Err(bad(format!("expected 3 fields, found {}", rec.len())));
        }
        let value: f64 = rec[2].trim().parse().map_err(|_| bad(format!("bad rmse {:?}", &rec[2])))?;
        let (task, src) = (rec[0].trim().to_string(), rec[1].trim().to_string());
        let k = *index.entry(task.clone()).or_insert_with(|| {
            table.tasks.push(TaskRmse { id: task, rmse_stat: f64::NAN, rmse: BTreeMap::new() });
            table.tasks.len() - 1
        });
        if src == "stat" {
            table.tasks[k].rmse_stat = value;
        } else {
            if !table.sources.contains(&src) {
                table.sources.push(src.clone());
            }
            table.tasks[k].rmse.insert(src, value);
        }
    }
    Ok(table)
}

/// `1 − rmse_k / rmse_stat`; `None` when the baseline is exact.
pub fn skill(rmse_k: f64, rmse_stat: f64) -> Option<f64> {
    (rmse_stat > 0.0).then(|| 1.0 - rmse_k / rmse_stat)
}

/// Competition ranks for one task: ties share the smallest rank.
fn task_ranks(values: &[f64]) -> Vec<usize> {
    values.iter().map(|v| 1 + values.iter().filter(|w| *w < v).count()).collect()
}

/// Mean RMSE rank per source across tasks.
pub fn rank_rmse(table: &RmseTable) -> Result<BTreeMap<String, f64>> {
    let mut sums = vec![0usize; table.sources.len()];
    for task in &table.tasks {
        let vals = table.sources.iter().map(|s| table.cell(task, s)).collect::<Result<Vec<_>>>()?;
        for (sum, r) in sums.iter_mut().zip(task_ranks(&vals)) {
            *sum += r;
        }
    }
    let n = table.tasks.len().max(1) as f64;
    Ok(table.sources.iter().cloned().zip(sums.iter().map(|&s| s as f64 / n)).collect())
}

/// Tasks on which each source attains the best RMSE, ties counted for all.
pub fn wins(table: &RmseTable) -> Result<BTreeMap<String, usize>> {
    let mut out: BTreeMap<String, usize> = table.sources.iter().map(|s| (s.clone(), 0)).collect();
    for task in &table.tasks {
        let vals = table.sources.iter().map(|s| table.cell(task, s)).collect::<Result<Vec<_>>>()?;
        let best = vals.iter().copied().fold(f64::INFINITY, f64::min);
        for (s, v) in table.sources.iter().zip(&vals) {
            if *v == best {
                *out.get_mut(s).unwrap() += 1;
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceRow {
    pub source: String,
    pub n: usize,
    pub rmse: f64,
    /// Absent when the report was built from RMSE values alone.
    pub mae: Option<f64>,
    pub mape: Option<f64>,
    pub smape: Option<f64>,
    pub skill: Option<f64>,
    pub rank_rmse: f64,
    pub wins: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub tasks: usize,
    /// Tasks left out of the Skill mean because the baseline RMSE was 0.
    pub skill_excluded: Vec<String>,
    pub mape_skipped: usize,
    pub rows: Vec<SourceRow>,
}

impl ProtocolReport {
    pub fn row(&self, source: &str) -> Option<&SourceRow> {
        self.rows.iter().find(|r| r.source == source)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["Source", "N", "RMSE", "MAE", "MAPE", "sMAPE", "Skill", "RankRMSE", "Wins"])?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.source.clone(),
                r.n.to_string(),
                format!("{:.4}", r.rmse),
                opt(r.mae),
                opt(r.mape),
                opt(r.smape),
                opt(r.skill),
                format!("{:.4}", r.rank_rmse),
                r.wins.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

fn assemble(table: &RmseTable, metrics: Option<&BTreeMap<String, Vec<PointMetrics>>>) -> Result<ProtocolReport> {
    let ranks = rank_rmse(table)?;
    let win = wins(table)?;
    let skill_excluded: Vec<String> =
        table.tasks.iter().filter(|t| !(t.rmse_stat > 0.0)).map(|t| t.id.clone()).collect();
    if !skill_excluded.is_empty() {
        warn!("{} task(s) excluded from Skill: baseline RMSE is 0", skill_excluded.len());
    }
    let mut rows = Vec::new();
    for src in &table.sources {
        let cells = table.tasks.iter().map(|t| table.cell(t, src)).collect::<Result<Vec<_>>>()?;
        let skills = table.tasks.iter().zip(&cells).filter_map(|(t, &r)| skill(r, t.rmse_stat));
        let m = metrics.and_then(|m| m.get(src));
        let field = |f: fn(&PointMetrics) -> f64| m.and_then(|m| mean(m.iter().map(f).filter(|x| x.is_finite())));
        rows.push(SourceRow {
            source: src.clone(),
            n: table.tasks.len(),
            rmse: mean(cells.iter().copied()).unwrap_or(f64::NAN),
            mae: field(|p| p.mae),
            mape: field(|p| p.mape),
            smape: field(|p| p.smape),
            skill: mean(skills),
            rank_rmse: ranks[src],
            wins: win[src],
        });
    }
    let mape_skipped = metrics.map_or(0, |m| m.values().flatten().map(|p| p.mape_skipped).sum());
    Ok(ProtocolReport { tasks: table.tasks.len(), skill_excluded, mape_skipped, rows })
}

/// Protocol from precomputed per-task RMSE values.
pub fn protocol_from_rmse(table: &RmseTable) -> Result<ProtocolReport> {
    assemble(table, None)
}

/// Full protocol: point metrics per task and source, baseline RMSE per task,
/// then Skill, RankRMSE and Wins over `sources`.
pub fn protocol(tasks: &[EvalTask], sources: &[String], profiles: &BTreeMap<String, SeasonalProfile>) -> Result<ProtocolReport> {
    if tasks.is_empty() {
        return Err(GraftError::Protocol("no evaluation tasks".into()));
    }
    let mut table = RmseTable { sources: sources.to_vec(), tasks: Vec::new() };
    let mut metrics: BTreeMap<String, Vec<PointMetrics>> = BTreeMap::new();
    for task in tasks {
        task.validate()?;
        let profile = profiles
            .get(&task.region)
            .ok_or_else(|| GraftError::Protocol(format!("no baseline history for region {}", task.region)))?;
        let (_, rmse_stat) = stat_baseline(task, profile)?;
        let mut rmse = BTreeMap::new();
        for src in sources {
            let pred = task.predictions.get(src).ok_or_else(|| {
                GraftError::Protocol(format!("task {} has no forecast from source {src}", task.id))
            })?;
            let m = point_metrics(&task.truth, pred)?;
            rmse.insert(src.clone(), m.rmse);
            metrics.entry(src.clone()).or_default().push(m);
        }
        table.tasks.push(TaskRmse { id: task.id.clone(), rmse_stat, rmse });
    }
    assemble(&table, Some(&metrics))
}
