//! End-to-end acceptance checks live in `tests/acceptance.rs`; run them with
//! `cargo test -p causalwb-acceptance --test acceptance`.
