//! Coupled stochastic / reaction–diffusion simulator for tip and stalk
//! endothelial cells migrating through a degradable extracellular matrix.
//!
//! Cells move by Euler–Maruyama under strain-energy, chemotaxis and durotaxis
//! drift; they secrete or consume four proteins through smooth mollifier
//! sources; the proteins diffuse with volume-fraction-dependent
//! diffusivities and degrade the basement membrane and fibrin matrix.
//!
//! All numerics are generic over [`Real`] (`f32` or `f64`); the `*64` aliases
//! below fix the scalar to `f64`, which is what the CLI uses.

// `!(x > 0)`-style tests are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cells;
pub mod engine;
pub mod fractions;
pub mod grid;
pub mod io;
pub mod oracles;
pub mod params;
pub mod protein;
pub mod scalar;
pub mod sources;

pub use cells::{CellKind, CellPopulation, DriftContext};
pub use engine::{EngineError, RunSummary, SimState, Simulation};
pub use fractions::VolumeFractions;
pub use grid::{Grid, ScalarField};
pub use params::{default_params, load_config, ModelParams, ReactionMode, SimConfig, Species};
pub use protein::{Concentrations, PentaSystem};
pub use scalar::{Real, Vec2};
pub use sources::{MollifierPotential, RateFields};

pub type Grid64 = Grid<f64>;
pub type ScalarField64 = ScalarField<f64>;
pub type ModelParams64 = ModelParams<f64>;
pub type Concentrations64 = Concentrations<f64>;
pub type VolumeFractions64 = VolumeFractions<f64>;
pub type CellPopulation64 = CellPopulation<f64>;
pub type SimState64 = SimState<f64>;
pub type Simulation64 = Simulation<f64>;

pub type Grid32 = Grid<f32>;
pub type ScalarField32 = ScalarField<f32>;
pub type Simulation32 = Simulation<f32>;
