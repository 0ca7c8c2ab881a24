use std::io::Write;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::mapgen::bench_instance;
use crate::baseline::{build_mamdp_from, mamdp_full_size, solve_mamdp, DEFAULT_CEILING};
use crate::error::{Error, Result};
use crate::product::RobotModel;
use crate::realloc::{run_with, Budget};
use crate::team::{StapuOptions, TeamMdp};

pub const CSV_HEADER: &str =
    "robots,tasks,failpoints,seed,team_states,team_trans,stapu_ms,reallocations,guarantee,mamdp_states,mamdp_trans,mamdp_ms,mamdp_value";

fn default_nodes() -> usize {
    30
}

fn default_pfail() -> f64 {
    0.1
}

fn default_reps() -> usize {
    3
}

fn default_ceiling() -> u128 {
    DEFAULT_CEILING
}

/// Sweep grid. Every combination of robots, tasks, failure points and seed
/// is one row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub robots: Vec<usize>,
    pub tasks: Vec<usize>,
    pub failpoints: Vec<usize>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    #[serde(default = "default_pfail")]
    pub pfail: f64,
    #[serde(default)]
    pub safety: Option<String>,
    /// Timing repetitions; times are medians.
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default = "default_ceiling")]
    pub mamdp_ceiling: u128,
    #[serde(default)]
    pub max_realloc: Option<usize>,
    #[serde(default)]
    pub realloc_time_ms: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MamdpCells {
    pub states: u128,
    pub transitions: usize,
    pub ms: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub robots: usize,
    pub tasks: usize,
    pub failpoints: usize,
    pub seed: u64,
    /// Full team size, the sum of the local product sizes.
    pub team_states: u128,
    pub team_trans: usize,
    pub stapu_ms: f64,
    pub reallocations: usize,
    pub guarantee: f64,
    /// `None` above the ceiling.
    pub mamdp: Option<MamdpCells>,
}

impl BenchRow {
    pub fn csv_line(&self) -> String {
        let mut cells = vec![
            self.robots.to_string(),
            self.tasks.to_string(),
            self.failpoints.to_string(),
            self.seed.to_string(),
            self.team_states.to_string(),
            self.team_trans.to_string(),
            format!("{:.3}", self.stapu_ms),
            self.reallocations.to_string(),
            format!("{:.9}", self.guarantee),
        ];
        match &self.mamdp {
            Some(m) => cells.extend([
                m.states.to_string(),
                m.transitions.to_string(),
                format!("{:.3}", m.ms),
                format!("{:.9}", m.value),
            ]),
            None => cells.extend(std::iter::repeat_n(String::new(), 4)),
        }
        cells.join(",")
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

/// Run one sweep cell.
pub fn bench_cell(cfg: &BenchConfig, robots: usize, tasks: usize, failpoints: usize, seed: u64) -> Result<BenchRow> {
    let (models, mission) =
        bench_instance(cfg.nodes, robots, tasks, failpoints, cfg.pfail, seed, cfg.safety.as_deref())?;
    let automata = Arc::new(mission.compile()?);
    let rs = models
        .iter()
        .map(|m| RobotModel::new(Arc::new(m.clone()), automata.clone()))
        .collect::<Result<Vec<_>>>()?;
    let entries: Vec<_> = rs.iter().map(|r| r.initial_state()).collect();
    let team = TeamMdp::build(&rs, &entries, 0)?;
    let budget = Budget { max_reallocations: cfg.max_realloc, time: cfg.realloc_time_ms.map(Duration::from_millis) };
    let reps = cfg.reps.max(1);

    let mut times = Vec::with_capacity(reps);
    let mut report = None;
    for _ in 0..reps {
        let t = Instant::now();
        let (_, r) = run_with(&rs, &budget, &StapuOptions::default())?;
        times.push(t.elapsed().as_secs_f64() * 1e3);
        report = Some(r);
    }
    let report = report.expect("at least one repetition");

    let mamdp = if mamdp_full_size(&rs).0 <= cfg.mamdp_ceiling {
        let mut times = Vec::with_capacity(reps);
        let mut last = None;
        for _ in 0..reps {
            let t = Instant::now();
            let mm = build_mamdp_from(&rs, cfg.mamdp_ceiling)?;
            let (value, _) = solve_mamdp(&mm)?;
            times.push(t.elapsed().as_secs_f64() * 1e3);
            last = Some((mm.full_size(), mm.num_transitions(), value));
        }
        let (states, transitions, value) = last.expect("at least one repetition");
        Some(MamdpCells { states, transitions, ms: median(times), value })
    } else {
        None
    };

    Ok(BenchRow {
        robots,
        tasks,
        failpoints,
        seed,
        team_states: team.full_size(),
        team_trans: team.num_transitions(),
        stapu_ms: median(times),
        reallocations: report.reallocations,
        guarantee: report.success,
        mamdp,
    })
}

/// Run every cell of the grid; failing cells are reported and skipped.
pub fn bench_sweep(cfg: &BenchConfig) -> (Vec<BenchRow>, Vec<String>) {
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for &r in &cfg.robots {
        for &m in &cfg.tasks {
            for &fp in &cfg.failpoints {
                for &seed in &cfg.seeds {
                    match bench_cell(cfg, r, m, fp, seed) {
                        Ok(row) => rows.push(row),
                        Err(e) => errors.push(format!("robots={r} tasks={m} failpoints={fp} seed={seed}: {e}")),
                    }
                }
            }
        }
    }
    (rows, errors)
}

pub fn write_csv(rows: &[BenchRow], mut out: impl Write) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", row.csv_line())?;
    }
    Ok(())
}

impl BenchConfig {
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<BenchConfig> {
        let text = std::fs::read_to_string(path)?;
        let cfg: BenchConfig = serde_json::from_str(&text)?;
        if cfg.robots.is_empty() || cfg.tasks.is_empty() || cfg.failpoints.is_empty() || cfg.seeds.is_empty() {
            return Err(Error::Mission("bench config needs robots, tasks, failpoints and seeds".into()));
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> BenchConfig {
        serde_json::from_str(r#"{"robots":[2],"tasks":[1,3],"failpoints":[3],"seeds":[1],"nodes":12,"reps":1}"#).unwrap()
    }

    #[test]
    fn rows_and_csv() {
        let (rows, errors) = bench_sweep(&cfg());
        assert!(errors.is_empty(), "{errors:?}");
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].team_states, 4 * rows[0].team_states);
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert!(lines[1..].iter().all(|l| l.split(',').count() == 13));
        for r in &rows {
            let m = r.mamdp.as_ref().unwrap();
            assert!(r.guarantee <= m.value + 1e-6);
        }
    }

    #[test]
    fn ceiling_blanks_mamdp_columns() {
        let mut c = cfg();
        c.mamdp_ceiling = 10;
        let row = bench_cell(&c, 2, 1, 3, 1).unwrap();
        assert!(row.mamdp.is_none());
        assert!(row.csv_line().ends_with(",,,,"));
    }

    #[test]
    fn median_of_reps() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0]), 2.5);
    }
}
