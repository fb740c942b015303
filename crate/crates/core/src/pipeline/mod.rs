//! Dataset generation, classifier scans and the experiment drivers built on
//! the lower layers.

mod bisep;
mod datasets;
mod experiments;
mod features;
mod output;
mod scan;
mod spec;

pub use bisep::{
    bisep_search, verify_certificate, BisepAtom, BisepBudget, BisepCertificate, BisepResult, CertificateCheck,
    MAX_BISEP_DIM, SCHMIDT_TOL,
};
pub use datasets::{
    audit_dataset, build_dataset, generate_state, plan_rows, sample_states, AuditReport, DatasetKind, RowPlan,
    RowSource, StateSet, CONCURRENCE_PROBES,
};
pub use experiments::{
    four_qubit_run, graph_experiment, kcorr_experiment, robustness_experiment, train_and_scan, FamilySummary,
    GraphParams, GraphReport, RobustnessReport, RunReport, Spread, FIXED_OBSERVABLE_PHI, FOUR_QUBIT_FAMILIES,
};
pub use features::FeatureMap;
pub use output::{alpha_beta_csv, fmt_sig, round_sig, scan_csv, to_json_rounded, SIGNIFICANT_DIGITS};
pub use scan::{
    ghz_werner_threshold, scan_alpha_beta, scan_werner, step_fit, unit_grid, AlphaBetaPoint, AlphaBetaReport,
    ScanReport, WernerFamily,
};
pub use spec::{ExperimentId, ExperimentSpec};
