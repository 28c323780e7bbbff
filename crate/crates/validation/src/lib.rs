//! End-to-end acceptance checks for `jumpmg` live in `tests/acceptance.rs`.
