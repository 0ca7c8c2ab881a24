//! Benchmark maps, Monte Carlo rollouts of joint policies, and sweeps.

mod bench;
mod mapgen;
mod simulate;

pub use bench::{bench_cell, bench_sweep, write_csv, BenchConfig, BenchRow, MamdpCells, CSV_HEADER};
pub use mapgen::{
    bench_instance, gen_map, graph_instance, grid_edges, grid_shape, reach_mission, task_atoms, tree_instance, MapSpec,
};
pub use simulate::{simulate, SimReport, MAX_ROLLOUT_STEPS};
