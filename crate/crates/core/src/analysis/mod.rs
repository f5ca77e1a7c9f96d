//! Post-hoc analysis of trained trunks: class selectivity, class-activation
//! maps and the variance-explained curve of an embedding set.

mod cam;
mod csi;
mod export;
mod pca;
mod top;

pub use cam::{cam, mask_image, save_attention_png, AttentionMap, CamConfig, StdSource, DEGENERATE_STD};
pub use csi::{csi, csi_split_half, response_tables, FeatureResponseTable};
pub use export::{csi_csv, export_attention_maps, pca_csv, read_curve_csv};
pub use pca::{pca_curve, EXACT_LIMIT};
pub use top::top_activating_images;
