use std::path::PathBuf;

use clap::{Parser, ValueEnum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Subcommand {
    /// Superstable parameter in a bracket (or all of them in a range).
    Solve,
    /// Marked critical orbit with relations.
    Orbit,
    /// Transversality certificate (or a batch over a range).
    Certify,
    /// Spectrum and determinant polynomial of the transfer operator.
    Spectrum,
    /// Kneading/lap scan over a parameter range; `--format svg` draws a bifurcation diagram.
    Scan,
    /// Iterated lifts of a holomorphic motion.
    Lift,
    /// Cubic bones: trace, crossings, orientation and entropy.
    Bones,
    /// Lap-number entropy.
    Entropy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum Format {
    #[default]
    Json,
    Csv,
    Svg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum Velocity {
    /// `v = 1` at the critical values, 0 elsewhere.
    #[default]
    Critical,
    /// `v(x) = sign(Re x)`.
    Sign,
}

#[derive(Debug, Parser)]
#[command(name = "transversal", version, about = "Transversality, transfer operators and lifting for interval-map families")]
#[command(allow_negative_numbers = true)]
pub struct Cli {
    pub command: Subcommand,
    /// Family as JSON, e.g. '{"family":"monic_additive","d":2}'.
    #[arg(long)]
    pub family: String,
    #[arg(long)]
    pub c: Option<f64>,
    /// Cubic parameters `a b`.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    pub point: Option<Vec<f64>>,
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
    pub bracket: Option<Vec<f64>>,
    #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
    pub range: Option<Vec<f64>>,
    /// Bones search box `a_lo a_hi b_lo b_hi`.
    #[arg(long = "box", num_args = 4, value_names = ["A_LO", "A_HI", "B_LO", "B_HI"])]
    pub bbox: Option<Vec<f64>>,
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub kmax: Option<usize>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub ell: Option<f64>,
    /// Disk radius for lifts.
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long, value_enum, default_value_t)]
    pub velocity: Velocity,
    /// Arclength step for bones.
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}
