pub mod diagram;
pub mod lyapunov;
pub mod noise;
pub mod reconstruct;
pub mod selftest;
pub mod threshold;

use std::path::PathBuf;

use clap::Args;

#[derive(Args, Debug, Default, Clone)]
pub struct OutputArgs {
    /// CSV destination; `-` or absent means standard output.
    #[arg(short, long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Clone)]
pub struct SvgArgs {
    /// Also write a scatter plot.
    #[arg(long, value_name = "FILE")]
    pub svg: Option<PathBuf>,
    /// Q window of the plot, `lo:hi`.
    #[arg(long, value_name = "LO:HI")]
    pub qrange: Option<String>,
}
