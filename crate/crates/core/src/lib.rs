//! Mobility-aware routing auctions for ad hoc networks.
//!
//! The crate has three layers:
//!
//! * the auction core ([`mechanism`], [`verifier`], [`profit_sharing`]) —
//!   a multi-dimensional optimal auction over discrete (cost, path-duration)
//!   types, its closed-form payment rule, and independent oracles (exhaustive
//!   incentive checks and a longest-path dual) that certify it;
//! * baselines and statistics ([`vcg`], [`statfit`]) — node- and path-level
//!   VCG payments on cost graphs, and MLE/AIC fitting of path-duration
//!   distributions;
//! * the simulator ([`mobsim`], [`metrics`], [`config`], [`sweep`]) —
//!   a random-walk MANET world with link-expiration prediction, route
//!   discovery, auction-driven sessions, and reproducible experiment sweeps.

pub mod config;
pub mod mechanism;
pub mod metrics;
pub mod mobsim;
pub mod profit_sharing;
pub mod statfit;
pub mod sweep;
pub mod vcg;
pub mod verifier;

pub use config::ScenarioConfig;
pub use mechanism::{AgentType, AuctionOutcome, Bid, MechanismTables, TypeSpace};
pub use metrics::MetricsRecord;
pub use mobsim::{RouteCandidate, Session, WorldState};
