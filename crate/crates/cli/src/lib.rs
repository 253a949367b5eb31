//! Support library for the `vbpbb` binary: deterministic SVG rendering and
//! run manifests.

pub mod manifest;
pub mod svg;
