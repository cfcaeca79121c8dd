//! Analytic line spectra and empirical DFT spectra of network outputs.

pub mod analytic;
pub mod empirical;

pub use analytic::{
    derivative_spectrum_bound, gaussian_line_spectrum, lines_low_fraction, rff_lattice,
    shallow_spectrum, sine_line_spectrum, DerivativeBound, Envelope, FrequencyLattice,
    LineSpectrum,
};
pub use empirical::{
    dft, dft_windowed, energy_summary, grid_coord, grid_coords, project_onto_line, sample_grid,
    EnergySummary, LineProjection, Samples, SpectrumGrid, Window, DOMAIN_EXTENT,
};
