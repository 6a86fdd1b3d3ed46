//! Angle-domain multi-user massive MIMO at desk scale.
//!
//! A base station with an M-element uniform linear array serves K
//! single-antenna users through a hybrid transmitter with one RF chain per
//! user. Everything hangs together in the beam domain: user channels
//! concentrate on a few DFT beams, zero-padded transforms refine those beams
//! below the 1/M grid, and the refined beams drive both the analog precoder
//! and a two-round limited-RF-chain channel estimator.
//!
//! Module map:
//! * [`channel`] - steering vectors, multipath synthesis, path loss and
//!   shadowing.
//! * [`angle`] - DFT/beam-domain transforms, rotations, the closed-form
//!   steering inner product, compact decomposition.
//! * [`selection`] - significant-beam selection under an RF budget.
//! * [`precoding`] - orthogonal/rotated analog stages, the MMSE digital
//!   stage, MRT and full-digital baselines, sum rate.
//! * [`estimation`] - two-round training, beam-domain gain readout, NMSE.
//! * [`config`] / [`experiment`] - TOML scenarios, Monte-Carlo runners, CSV.

pub mod angle;
pub mod channel;
pub mod config;
pub mod error;
pub mod estimation;
pub mod experiment;
pub mod precoding;
pub mod seeding;
pub mod selection;

mod linalg;

pub use angle::{
    beam_transform, compact_decompose, correlation, dft_matrix, oversampled_transform,
    rotation_matrix, significant_indices, steering_inner_product, BeamDomainChannel,
    CompactDecomposition, SignificantBeams,
};
pub use channel::{
    apply_link_budget, draw_cell_position, draw_user, path_loss_db, steering_vector, ArrayConfig,
    LinkBudget, UserChannel,
};
pub use config::{load_config, save_config, ExperimentConfig, Method, Scenario};
pub use error::{Error, Result};
pub use estimation::{
    nmse, stage1_beam_estimate, stage2_combiner, stage2_estimate, two_step_estimate,
    uplink_observation, ChannelEstimate, NmseReport, TrainingObservation, TwoStepOutcome,
};
pub use experiment::{
    run_nmse_sweep, run_orthogonality_study, run_sumrate_cdf, write_csv, ResultRow, ResultTable,
    SummaryRow,
};
pub use precoding::{
    effective_channel, effective_channel_from_paths, fd_mmse_precoder, mmse_digital, mrt_precoder,
    orthogonal_analog, refine_angle, refined_peak, rotated_analog, sum_rate, HybridPrecoder,
    RefinedBeam,
};
pub use selection::{select_significant_beams, SelectionResult};
