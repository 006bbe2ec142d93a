//! Discrete-event MANET world: random-walk mobility, link-expiration-time
//! prediction, least-hop route discovery, and the auction-driven session
//! lifecycle with re-auction just before the predicted route break.

mod routes;
mod session;
mod world;

pub use routes::{discover_routes, predict_link_duration, RouteCandidate};
pub use session::{
    run_session, AuctionEngine, AuctionEvent, PricingBackend, Session, SessionParams,
};
pub use world::{NodeState, Snapshot, SnapshotNode, WorldState};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("nodes {0} and {1} are out of range: link absent")]
    LinkAbsent(usize, usize),
    #[error("unknown node id {0}")]
    UnknownNode(usize),
    #[error("time step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("session duration must be positive, got {0}")]
    NonPositiveDuration(f64),
    #[error("duration calibration failed: {0}")]
    Calibration(String),
    #[error(transparent)]
    Mechanism(#[from] crate::mechanism::MechanismError),
    #[error(transparent)]
    Vcg(#[from] crate::vcg::VcgError),
    #[error(transparent)]
    Fit(#[from] crate::statfit::FitError),
    #[error(transparent)]
    Sharing(#[from] crate::profit_sharing::SharingError),
}
