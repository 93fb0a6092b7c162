// SPDX-License-Identifier: Apache-2.0

//! Cargo-flow uncertainty: autoregressive Poisson intensities, Gaussian
//! copula dependence, count generation, training lattices and simulation
//! paths.

mod copula;
mod intensity;
mod lattice;
mod poisson;
mod stream;

pub use copula::{normal_cdf, sample_copula_uniforms, CopulaSampler, CopulaSpec};
pub use intensity::{intensity_step, IntensityModel, IntensityParams};
pub use lattice::{
    build_lattice, panel_rows, sample_flows, sample_scenario, sample_spot_rates, FlowModel, LatticeNode, PanelRow,
    ScenarioLattice,
};
pub use poisson::{correlated_counts, poisson_count_from_uniforms, PoissonCounter};
pub use stream::RandomStream;
