//! Idempotent (max-plus) probability measures on finite metric spaces.
//!
//! * [`semiring`]: `ℝ_max` arithmetic and the `⊕_h` deformation.
//! * [`space`]: validated finite metric spaces and point maps.
//! * [`measure`]: finitely supported idempotent measures, Maslov integrals,
//!   pushforward.
//! * [`transport`]: the Kantorovich-type distance in paper and coupling modes.
//! * [`tower`]: iterated measure spaces and the direct-limit metric.
//! * [`verify`]: seeded random-instance checks of the theory's claims.
//! * [`formats`]: JSON file formats.

pub mod example1;
pub mod formats;
pub mod measure;
pub mod semiring;
pub mod space;
pub mod tower;
pub mod transport;
pub mod verify;

pub use measure::{IdempotentMeasure, MeasureError, ObservableFunction};
pub use semiring::{MaxPlus, TOL};
pub use space::{FiniteMetricSpace, Modulus, PointMap, SpaceError};
pub use transport::{Algorithm, Coupling, DistanceResult, Mode, TransportError};
