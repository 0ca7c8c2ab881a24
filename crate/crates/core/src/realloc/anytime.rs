use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::joint::{find_realloc_points, graft, solve_realloc, synchronize, JointPolicy};
use crate::error::{Error, Result};
use crate::logic::Mission;
use crate::mdp::Mdp;
use crate::product::RobotModel;
use crate::team::{solve_stapu_with, StapuOptions, TeamMdp};

/// Limits on the reallocation loop; `None` means unlimited.
#[derive(Clone, Copy, Debug, Default)]
pub struct Budget {
    pub max_reallocations: Option<usize>,
    pub time: Option<Duration>,
}

impl Budget {
    pub fn reallocations(n: usize) -> Budget {
        Budget { max_reallocations: Some(n), time: None }
    }

    pub fn unlimited() -> Budget {
        Budget::default()
    }
}

/// One line of the loop log. Iteration 0 is the initial solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub point_probability: f64,
    pub robot: Option<usize>,
    pub value: f64,
    pub guarantee: f64,
    pub failure: f64,
    pub unaddressed: f64,
}

impl std::fmt::Display for IterationLog {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "iter {:>4}  point {:.6}  value {:.6}  guarantee {:.6}  unaddressed {:.6}",
            self.iteration, self.point_probability, self.value, self.guarantee, self.unaddressed
        )
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub initial_ms: f64,
    pub realloc_ms: f64,
    pub total_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GuaranteeReport {
    pub success: f64,
    pub failure: f64,
    pub unaddressed: f64,
    pub initial_value: f64,
    pub reallocations: usize,
    /// True when open points remained as the budget ran out.
    pub interrupted: bool,
    pub joint_states: usize,
    pub timing: Timing,
    pub log: Vec<IterationLog>,
}

/// Solve the initial STAPU, synchronise it and keep reallocating at the most
/// probable open failure state until none remain or the budget runs out.
pub fn run_stapu_with_realloc(models: &[Mdp], mission: &Mission, budget: &Budget) -> Result<(JointPolicy, GuaranteeReport)> {
    let automata = Arc::new(mission.compile()?);
    let robots = models
        .iter()
        .map(|m| RobotModel::new(Arc::new(m.clone()), automata.clone()))
        .collect::<Result<Vec<_>>>()?;
    run_with(&robots, budget, &StapuOptions::default())
}

pub fn run_with(robots: &[RobotModel], budget: &Budget, opts: &StapuOptions) -> Result<(JointPolicy, GuaranteeReport)> {
    if robots.is_empty() {
        return Err(Error::Mission("no robots".into()));
    }
    let start = Instant::now();
    let entries: Vec<_> = robots.iter().map(|r| r.initial_state()).collect();
    let g = TeamMdp::build(robots, &entries, 0)?;
    let sol = solve_stapu_with(&g, opts)?;
    let mut jp = synchronize(&sol, robots)?;
    let initial_ms = ms(start.elapsed());

    let out = jp.outcome();
    let mut log = vec![IterationLog {
        iteration: 0,
        point_probability: 1.0,
        robot: None,
        value: sol.value,
        guarantee: out.success,
        failure: out.failure,
        unaddressed: out.unaddressed,
    }];
    let mut reallocations = 0;
    let mut interrupted = false;
    loop {
        let points = find_realloc_points(&jp);
        let Some(point) = points.into_iter().next() else { break };
        let over_count = budget.max_reallocations.is_some_and(|n| reallocations >= n);
        let over_time = budget.time.is_some_and(|t| start.elapsed() >= t);
        if over_count || over_time {
            interrupted = true;
            break;
        }
        let sol = solve_realloc(&point, robots, opts)?;
        graft(&mut jp, &point, &sol, robots)?;
        reallocations += 1;
        let out = jp.outcome();
        log.push(IterationLog {
            iteration: reallocations,
            point_probability: point.probability,
            robot: Some(point.robot),
            value: sol.value,
            guarantee: out.success,
            failure: out.failure,
            unaddressed: out.unaddressed,
        });
    }
    let out = jp.outcome();
    let total_ms = ms(start.elapsed());
    let report = GuaranteeReport {
        success: out.success,
        failure: out.failure,
        unaddressed: out.unaddressed,
        initial_value: sol.value,
        reallocations,
        interrupted,
        joint_states: jp.num_nodes(),
        timing: Timing { initial_ms, realloc_ms: total_ms - initial_ms, total_ms },
        log,
    };
    Ok((jp, report))
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}
