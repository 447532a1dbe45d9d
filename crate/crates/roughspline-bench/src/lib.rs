//! No library code; see benches/core.rs.
