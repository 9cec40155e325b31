//! Acceptance suite for the workspace; everything lives in `tests/acceptance.rs`.
