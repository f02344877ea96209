//! Files, parallel campaigns and the command-line front end for
//! `isogplm-core`.

pub mod campaign;
pub mod error;
pub mod format;
pub mod io;

pub use campaign::run_parallel;
pub use error::{Error, Result};
pub use format::{round6, sig6};
pub use io::{
    calibration_csv, fit_json, grid_text, parse_calibration, parse_dataset, read_calibration,
    read_dataset, write_dataset, LoadedData, ReadOptions,
};
