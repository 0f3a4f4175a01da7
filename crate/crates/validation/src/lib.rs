//! Acceptance checks for the relaxhmc experiments live in `tests/acceptance.rs`.
