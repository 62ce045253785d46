//! Intensity-pattern statistics: densities, normalised entropy, Pearson
//! correlation, Porter–Thomas comparison and synthetic test patterns.

pub mod io;
pub mod pattern;
pub mod stats;
pub mod synth;

pub use pattern::{average_patterns, PatternMatrix, PatternMeta};
pub use stats::{
    density_pdf, neighbor_correlations, normalized_entropy, pearson_correlation, porter_thomas_fit, power_law_fit,
    DensityHistogram, EntropyResult, PorterThomasFit, PowerLawFit, DEFAULT_BINS,
};
pub use synth::{synthetic_pattern, PatternKind};
