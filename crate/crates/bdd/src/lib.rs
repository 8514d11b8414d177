//! Reduced ordered binary decision diagrams.
//!
//! A small, self-contained engine built for symbolic transition relations:
//! hash-consed nodes without complement edges, a fixed variable order given
//! by creation, an if-then-else kernel with a lossy computed table,
//! existential quantification (plain and fused with conjunction), exact
//! model counting, and a deterministic text format.
//!
//! ```
//! use ssabs_bdd::{BddManager, VarBlock};
//!
//! let mgr = BddManager::new();
//! let x: Vec<_> = (0..3).map(|i| mgr.new_var(format!("x.b{i}")).unwrap()).collect();
//! let block = VarBlock::new(x.clone());
//! let five = mgr.equals_const(&block, 5).unwrap();
//! assert_eq!(mgr.sat_count(&five, &x).unwrap(), 1u32.into());
//! ```

mod block;
mod count;
mod io;
mod manager;
mod snapshot;

pub use block::VarBlock;
pub use io::MAGIC;
pub use manager::{Bdd, BddManager, ManagerStats, VarId, VarSet};
pub use num_bigint::BigUint;
pub use snapshot::Snapshot;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BddError {
    #[error("unknown variable id {0}")]
    UnknownVariable(u32),
    #[error("variable `{0}` already declared")]
    DuplicateVariable(String),
    #[error("code {code} does not fit in {width} bits")]
    CodeOutOfRange { code: u64, width: usize },
    #[error("blocks have different widths ({0} vs {1})")]
    WidthMismatch(usize, usize),
    #[error("function depends on variable {0} outside the counting support")]
    SupportTooSmall(u32),
    #[error("more than {cap} satisfying assignments; enumeration refused")]
    EnumerationCap { cap: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}
