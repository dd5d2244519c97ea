pub mod dynamics;
pub mod error;
pub mod inverse;
pub mod measure;
pub mod quad;
pub mod resonance;
pub mod schema;
pub mod selfenergy;
pub mod special;
pub mod spectral;
