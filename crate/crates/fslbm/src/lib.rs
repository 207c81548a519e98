//! Fuzzy supervised classification over fixed-width binary codewords.
//!
//! The model is a *supervised hash table*: every training codeword is
//! expanded into its Hamming ball and each ball member's slot accumulates
//! per-class weight. Queries are a single table lookup, so prediction cost
//! does not depend on the number of training points, and overlapping balls
//! from differently-labeled points yield fuzzy (multi-label, weighted)
//! answers instead of a forced crisp decision.
//!
//! Pipeline:
//!
//! 1. [`metafeature`] turns raw tabular records into ordered `f`-bit
//!    codewords via a ranked template of yes/no rules.
//! 2. [`sht`] builds the table by ball expansion ([`sht::SupervisedHashTable`]),
//!    supports streaming absorption of new points, answers queries, and
//!    persists to a versioned checksummed binary format.
//! 3. [`eval`] scores predictions against crisp or fuzzy ground truth and
//!    measures the build/query scaling behavior.
//!
//! The `fslbm` binary exposes the whole pipeline as CLI subcommands.
//!
//! # Example
//!
//! ```
//! use fslbm::{Codeword, HammingRadius, LabelDistribution, LabelId};
//! use fslbm::sht::{Fallback, SupervisedHashTable, TrainConfig};
//!
//! # fn main() -> fslbm::Result<()> {
//! let config = TrainConfig::new(8, HammingRadius::new(1))?;
//! let training = vec![
//!     (Codeword::from_binary_str("00000011")?, LabelDistribution::crisp(LabelId(0), 2)?),
//!     (Codeword::from_binary_str("11110000")?, LabelDistribution::crisp(LabelId(1), 2)?),
//! ];
//! let mut table = SupervisedHashTable::build(&training, config, 2)?;
//!
//! // One bit away from the first training point: its ball covers the query.
//! let hit = table.query(Codeword::from_binary_str("00000111")?, Fallback::None)?;
//! assert_eq!(hit.distribution.unwrap().argmax_label(), LabelId(0));
//!
//! // Streaming update, then persistence round-trip.
//! table.absorb(Codeword::from_binary_str("11110001")?, &LabelDistribution::crisp(LabelId(1), 2)?)?;
//! let restored = SupervisedHashTable::from_bytes(&table.to_bytes())?;
//! assert!(restored == table);
//! # Ok(())
//! # }
//! ```

pub mod bitcode;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod labels;
pub mod metafeature;
pub mod sht;
pub mod synth;

pub use bitcode::{ball_enumerate, ball_size, hamming_distance, Codeword, HammingRadius};
pub use error::{Error, Result};
pub use labels::{LabelDistribution, LabelId, LabelWeights};
pub use sht::{Fallback, Prediction, StorageMode, SupervisedHashTable, TrainConfig, ZetaPolicy};
