//! End-to-end acceptance checks for `hybridsim`; see `tests/acceptance.rs`.
