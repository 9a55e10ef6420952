//! Scattering flare: dirty-aperture masks, their diffraction PSFs, and the
//! splatted scatter layer.

mod aperture;
mod psf;
mod render;

pub use aperture::{aperture_mask, ApertureSpec, Occluder, OccluderRandomization};
pub use psf::{diffraction_energy, diffraction_psf, Psf, PSF1_MAGIC};
pub use render::render_scatter_layer;
