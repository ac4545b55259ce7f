//! File formats: key/value model files, CSV tables with `#` metadata
//! comments, and a compact binary layout for long time series.

mod binary;
mod model_file;
mod tables;

pub use binary::{read_series_binary, write_series_binary};
pub use model_file::{
    backward_from_toml, backward_to_toml, forward_from_toml, forward_to_toml, read_backward, read_forward, write_backward, write_forward,
};
pub use tables::{
    read_chart, read_dac_program, read_series_csv, read_spectrum, write_chart, write_dac_program, write_series_csv, write_spectrum,
    write_spur_table, write_table,
};
