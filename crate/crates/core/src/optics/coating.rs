//! Normal-incidence reflectance of an interface with a single-layer coating.

use std::f64::consts::PI;

/// Index of the default anti-reflection layer (magnesium fluoride).
pub const DEFAULT_COATING_INDEX: f64 = 1.38;

/// Reflectance between media `n1` and `n2` with a single-layer coating of
/// physical thickness `coating_nm`, using the default coating index.
pub fn interface_reflectance(n1: f64, n2: f64, coating_nm: f64, wavelength_nm: f64) -> f64 {
    interface_reflectance_with_index(n1, n2, coating_nm, wavelength_nm, DEFAULT_COATING_INDEX)
}

/// Thin-film reflectance: amplitude coefficients of the two boundaries of the
/// layer combined with the round-trip phase `4π·n_c·t / λ`.
///
/// A zero-thickness layer reduces to the bare Fresnel term `((n1−n2)/(n1+n2))²`.
pub fn interface_reflectance_with_index(
    n1: f64,
    n2: f64,
    coating_nm: f64,
    wavelength_nm: f64,
    coating_index: f64,
) -> f64 {
    let r12 = (n1 - coating_index) / (n1 + coating_index);
    let r23 = (coating_index - n2) / (coating_index + n2);
    let phase = 4.0 * PI * coating_index * coating_nm.max(0.0) / wavelength_nm;
    let cross = 2.0 * r12 * r23 * phase.cos();
    let num = r12 * r12 + r23 * r23 + cross;
    let den = 1.0 + r12 * r12 * r23 * r23 + cross;
    let value = if coating_nm <= 0.0 {
        let r = (n1 - n2) / (n1 + n2);
        r * r
    } else {
        num / den
    };
    value.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matched_indices_reflect_nothing() {
        assert_eq!(interface_reflectance(1.5, 1.5, 0.0, 550.0), 0.0);
    }

    #[test]
    fn bare_air_glass_is_four_percent() {
        let r = interface_reflectance(1.0, 1.5, 0.0, 550.0);
        assert!((r - 0.04).abs() < 1e-15);
    }

    #[test]
    fn uncoated_reflectance_is_symmetric() {
        for (a, b) in [(1.0, 1.5), (1.2, 1.9), (1.62, 1.85)] {
            let ab = interface_reflectance(a, b, 0.0, 500.0);
            let ba = interface_reflectance(b, a, 0.0, 500.0);
            assert!((ab - ba).abs() < 1e-15);
        }
    }

    #[test]
    fn quarter_wave_coating_suppresses_reflection_at_design_wavelength() {
        let thickness = 550.0 / (4.0 * DEFAULT_COATING_INDEX);
        let coated = interface_reflectance(1.0, 1.7, thickness, 550.0);
        let bare = interface_reflectance(1.0, 1.7, 0.0, 550.0);
        assert!(coated < bare / 5.0, "coated {coated} bare {bare}");
        // Half-wave layers are optically absent.
        let half = interface_reflectance(1.0, 1.7, 2.0 * thickness, 550.0);
        assert!((half - bare).abs() < 1e-12);
    }

    #[test]
    fn reflectance_stays_in_unit_interval() {
        for c in [0.0, 50.0, 99.6, 180.0, 400.0] {
            for wl in [450.0, 550.0, 650.0] {
                let r = interface_reflectance(1.0, 1.9, c, wl);
                assert!((0.0..=1.0).contains(&r));
            }
        }
    }
}
