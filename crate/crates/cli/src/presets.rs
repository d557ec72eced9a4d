//! Settings and published values for the seven result tables.

use lsnn_core::continuation::ContinuationPlan;
use lsnn_core::{ProblemKind, Schedule};

use crate::config::{Mode, RhoSpec, RunConfig};

/// Published `(rel_l2, rel_vbeta, loss_ratio, parameters)` for one row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PaperRow {
    pub arch: &'static str,
    pub rel_l2: f64,
    pub rel_vbeta: f64,
    pub loss_ratio: f64,
    pub params: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TablePreset {
    pub table: u8,
    pub problem: ProblemKind,
    pub iterations: usize,
    pub schedule: Schedule,
    pub rho: RhoSpec,
    pub seeds: usize,
    pub rows: Vec<PaperRow>,
}

const fn row(arch: &'static str, rel_l2: f64, rel_vbeta: f64, loss_ratio: f64, params: usize) -> PaperRow {
    PaperRow { arch, rel_l2, rel_vbeta, loss_ratio, params }
}

/// Rows of the continuation table: `(stage label, arch, ‖u_n−ū‖/‖u_n‖,
/// ⦀u_n−ū⦀/⦀u_n⦀, ‖u−ū‖/‖u‖, loss ratio, parameters)`.
pub const TABLE7: [(&str, &str, f64, f64, f64, f64, usize); 4] = [
    ("3", "2-6-6-1", 0.075817, 0.080026, 0.244483, 0.059422, 61),
    ("4", "2-6-6-1", 0.104372, 0.110954, 0.216481, 0.064744, 61),
    ("5", "2-8-8-1", 0.097836, 0.109648, 0.135606, 0.049938, 97),
    ("curve", "2-25-25-1", 0.141261, 0.187616, 0.141261, 0.077233, 726),
];

/// Tables 1 to 6. Two-layer rows do not depend on the seed, so their
/// best-of-k collapses to one run.
pub fn table_preset(table: u8) -> Option<TablePreset> {
    let fixed = Schedule::Fixed(0.003);
    let half = RhoSpec::TimesH(0.5);
    Some(match table {
        1 => TablePreset {
            table,
            problem: ProblemKind::VLine,
            iterations: 20000,
            schedule: fixed,
            rho: half,
            seeds: 3,
            rows: vec![row("2-4-1", 0.058046, 0.058304, 0.050491, 13), row("2-200-1", 0.058745, 0.058926, 0.048537, 601)],
        },
        2 => TablePreset {
            table,
            problem: ProblemKind::Diagonal,
            iterations: 20000,
            schedule: fixed,
            rho: half,
            seeds: 3,
            rows: vec![row("2-4-1", 0.393864, 0.393871, 0.126095, 13), row("2-6-1", 0.073534, 0.073826, 0.067531, 19)],
        },
        3 => TablePreset {
            table,
            problem: ProblemKind::Smooth,
            iterations: 30000,
            schedule: fixed,
            rho: half,
            seeds: 1,
            rows: vec![
                row("2-20-1", 0.110745, 0.110754, 0.035571, 61),
                row("2-30-1", 0.107525, 0.107641, 0.013568, 91),
                row("2-40-1", 0.101411, 0.101413, 0.003509, 121),
            ],
        },
        4 => TablePreset {
            table,
            problem: ProblemKind::TwoJump,
            iterations: 80000,
            schedule: Schedule::StepDecrease { lr0: 0.01, delta: 0.002, every: 20000 },
            rho: half,
            seeds: 1,
            rows: vec![
                row("2-20-1", 0.363573, 0.392153, 0.393907, 61),
                row("2-30-1", 0.147767, 0.152132, 0.132542, 91),
                row("2-34-1", 0.117451, 0.120213, 0.112463, 103),
            ],
        },
        5 => TablePreset {
            table,
            problem: ProblemKind::TwoSector,
            iterations: 50000,
            schedule: fixed,
            rho: half,
            seeds: 5,
            rows: vec![
                row("2-30-1", 0.487306, 0.556949, 0.386919, 91),
                row("2-200-1", 0.317839, 0.402699, 0.259592, 601),
                row("2-5-5-1", 0.086122, 0.086131, 0.016945, 46),
            ],
        },
        6 => TablePreset {
            table,
            problem: ProblemKind::Rotational,
            iterations: 150000,
            schedule: Schedule::Halving { lr0: 0.005, every: 50000 },
            rho: RhoSpec::TimesH(0.1),
            seeds: 3,
            rows: vec![
                row("2-40-40-1", 0.146226, 0.187823, 0.108551, 1761),
                row("2-30-30-30-1", 0.109266, 0.122252, 0.039993, 1951),
            ],
        },
        _ => return None,
    })
}

impl TablePreset {
    /// One training config per row, with iterations and schedule intervals
    /// scaled by `iters_scale`.
    pub fn configs(&self, h: f64, iters_scale: f64, seeds: Option<usize>) -> Vec<RunConfig> {
        self.rows
            .iter()
            .map(|r| RunConfig {
                mode: Mode::Train,
                problem: Some(self.problem),
                arch: Some(r.arch.parse().expect("preset architecture")),
                iterations: ((self.iterations as f64 * iters_scale).round() as usize).max(1),
                schedule: self.schedule.scaled(iters_scale),
                rho: Some(self.rho),
                h,
                seeds: (0..seeds.unwrap_or(self.seeds) as u64).collect(),
                output: Some(r.arch.into()),
                ..RunConfig::default()
            })
            .collect()
    }
}

pub fn table7_plan(iters_scale: f64) -> ContinuationPlan {
    ContinuationPlan::default_plan().scaled(iters_scale)
}
