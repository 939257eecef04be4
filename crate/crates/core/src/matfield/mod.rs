//! The optimizable material field and its texture bake-out.
//!
//! Positions are normalized into the unit cube spanned by the scene bounds;
//! each level `l` places a lattice of resolution `N_l` over it and looks up
//! the eight surrounding corners in a hashed table of `T` entries with `F`
//! features. The concatenated, trilinearly interpolated features feed an MLP
//! with leaky-ReLU hidden layers and five sigmoid outputs.

mod bake;
mod checkpoint;
mod field;

pub use bake::{bake_textures, MIN_BAKE_RESOLUTION, load_maps, save_maps, BakedMaps, BASECOLOR_PNG, MASK_PNG, METALLIC_PNG, ROUGHNESS_PNG};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use field::{Domain, FieldConfig, MaterialField, MAX_FEATURES, MAX_LEVELS};
