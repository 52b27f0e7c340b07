//! Experiment orchestration: plans, the algorithm × slice × measure grid,
//! per-year temporal runs, caching and result output.

mod cache;
mod emit;
mod plan;
mod run;
mod temporal;

pub use cache::TrainingCache;
pub use emit::{emit, render_table, render_temporal, EmitFormat, Emittable, TABLE_COLUMNS, TEMPORAL_COLUMNS};
pub use plan::{AlgorithmSpec, BenchmarkSpec, ExperimentPlan, MeasureSet, SliceSpec, OUT_DIR_ENV};
pub use run::{run, Cell, DeltaRow, MeasureKind, Provenance, ResultTable, SpaceRecord, VarianceRow};
pub use temporal::{
    ols, temporal_accounting, temporal_run, OlsFit, TemporalAccounting, TemporalPlan, TemporalPoint,
    TemporalResult, TemporalSeries, YearCount,
};
