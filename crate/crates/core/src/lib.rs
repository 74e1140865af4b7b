//! Two-stage learned pruning of the QT-MTT partition search for intra
//! coding.
//!
//! A toy intra codec ([`codec`]) gives every coding unit an exact RD cost.
//! [`rdo`] searches the split grammar of [`partition`] exhaustively or keeps
//! only the top-N splits proposed by a predictor. The predictor is a small
//! CNN ([`nn`]) producing 480 edge probabilities per 64x64 block, followed by
//! one boosted-tree classifier per CU size ([`gbdt`]). [`dataset`] turns
//! exhaustive searches into training data and [`harness`] measures the
//! complexity/RD trade-off.

mod binio;
pub mod codec;
pub mod config;
pub mod dataset;
pub mod error;
pub mod gbdt;
pub mod harness;
pub mod nn;
pub mod partition;
pub mod rdo;
pub mod synth;
pub mod timing;

pub use codec::{Frame, RdResult};
pub use error::{Error, Result};
pub use gbdt::{ModelBank, SplitDistribution};
pub use partition::{CuGeometry, EdgeVector, PartitionTree, SizeId, SplitType};
pub use rdo::{BlockContext, Predictor, SearchStats, TopNConfig};
