//! Holds the `acceptance` test target only; see `tests/acceptance.rs`.
//!
//! The suite lives in its own package so that it runs after every other test
//! binary in the workspace and a failing criterion cannot hide their results.
