//! Entropic optimal transport: Wasserstein distances between point clouds,
//! Gromov-Wasserstein distances between metric spaces, and the per-frame
//! signal channels built from them.

mod gw;
mod signals;
mod sinkhorn;

pub use gw::{entropic_gw, GwResult};
pub use signals::{temporal_signals, SignalRecord, SignalSeries};
pub use sinkhorn::{
    sinkhorn_wd, squared_euclidean_costs, Epsilon, OtConfig, PointCloud, SinkhornResult,
    TransportPlan,
};
