//! Point-set distances and the evaluation protocol built on them.

mod chamfer;
mod emd;
mod evaluate;

pub use chamfer::{chamfer_mean, chamfer_sum};
pub use emd::{
    emd_auction, emd_auction_detailed, emd_exact, AuctionConfig, AuctionResult, Matching, EXACT_LIMIT,
};
pub use evaluate::{
    evaluate_pair, subsample, MetricReport, EVAL_ICP_MAX_ITERS, EVAL_ICP_TOL, EVAL_POINTS, REPORT_SCALE,
};
