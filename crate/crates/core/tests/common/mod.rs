//! Reference implementations and fixture generators shared by the
//! integration tests.
#![allow(dead_code)]

pub mod cky_oracle;
pub mod dedup_oracle;
pub mod linalg;
pub mod metrics_oracle;
pub mod optim;
pub mod sif_fixture;
