//! Exact q-deformed colored Motzkin chains and their two-dimensional
//! spiral embedding.

pub mod acceptance;
pub mod config;
pub mod eigen;
pub mod entanglement;
pub mod error;
pub mod geometry;
pub mod hamiltonian;
pub mod mask;
pub mod numeric;
pub mod output;
pub mod paths;
pub mod qdp;
pub mod scaling;

pub use config::Caps;
pub use error::{Error, ErrorCategory, Result};
pub use mask::{Side, SubsystemMask};
pub use numeric::Deformation;
pub use paths::{Color, Colors, MotzkinPath, Step, StepKind};
pub use qdp::{NumericMode, WeightTable};
pub use hamiltonian::{GroundVector, HamiltonianOperator};
pub use entanglement::{EntanglementReport, InterfaceClass, SchmidtSpectrum};
pub use geometry::{EdgeCoord, SpiralEmbedding, Vertex};
pub use scaling::{ExperimentKind, ExperimentSpec, FitResult};
