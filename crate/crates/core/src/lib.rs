//! Maximum k-plex search by branch and bound, with a bound predicate that can
//! be learned from traces of earlier searches.

pub mod bench;
pub mod error;
pub mod graph;
pub mod learn;
pub mod pipeline;
pub mod preprocess;
pub mod search;
pub mod trace;

pub use error::{Error, Result};
pub use graph::{load_edge_list, Graph, GraphStats, VertexId};
