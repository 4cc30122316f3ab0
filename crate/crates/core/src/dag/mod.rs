//! Blocks, the append-only DAG and the global tip pool.

mod block;
mod dump;
mod pool;
mod store;

pub use block::{Block, BlockId, Issuer, RemovalCause};
pub use dump::{write_dump, DUMP_HEADER};
pub use pool::{insert_block, Removal, TipPool};
pub use store::DagStore;
