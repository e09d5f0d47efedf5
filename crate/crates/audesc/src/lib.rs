//! Service layer for audio description: media ingest through an external
//! decoder, model providers, the event store, the end-to-end pipeline, the
//! HTTP API and fixture synthesis. Pure logic lives in `audesc_core`.

pub mod config;
pub mod ingest;
pub mod pipeline;
pub mod providers;
pub mod server;
pub mod speech;
pub mod store;
pub mod synth;
