//! Training metrics CSV. One row per epoch; every column except `wall_s`
//! depends only on the seed, so two runs with the same flags differ at most
//! in that last column.

use autoasm_core::trainer::EpochMetrics;

pub const METRICS_HEADER: &str =
    "epoch,lambda,success_rate,mean_ep_len,loss_im,loss_rl,loss_value,wall_s";

/// Index of the only column that varies between identical runs.
pub const WALL_COLUMN: usize = 7;

pub fn metrics_row(m: &EpochMetrics, wall_s: f64) -> String {
    format!(
        "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.3}",
        m.epoch,
        m.lambda,
        m.success_rate,
        m.mean_episode_len,
        m.loss_imitation,
        m.loss_rl,
        m.loss_value,
        wall_s,
    )
}
