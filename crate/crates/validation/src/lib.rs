//! Acceptance suite for `ndo-core`. Everything lives in `tests/acceptance.rs`;
//! run it with `cargo test -p ndo-validation --test acceptance`, adding
//! `-- --include-ignored` for the slow criteria or criterion ids such as `A4`
//! to select.
