#![allow(dead_code)]

pub mod ntm_oracle;
pub mod pca_oracle;
