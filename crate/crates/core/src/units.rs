//! Conversions between the external mm / MPa / g / deg representation and
//! the SI values used internally.

pub const MM: f64 = 1e-3;
pub const MPA: f64 = 1e6;
pub const GRAM: f64 = 1e-3;

#[inline]
pub fn mm_to_m(v: f64) -> f64 {
    v * MM
}

#[inline]
pub fn m_to_mm(v: f64) -> f64 {
    v / MM
}

#[inline]
pub fn mpa_to_pa(v: f64) -> f64 {
    v * MPA
}

#[inline]
pub fn pa_to_mpa(v: f64) -> f64 {
    v / MPA
}

#[inline]
pub fn g_to_kg(v: f64) -> f64 {
    v * GRAM
}

#[inline]
pub fn kg_to_g(v: f64) -> f64 {
    v / GRAM
}

pub fn vec_to_mm(v: [f64; 3]) -> [f64; 3] {
    v.map(m_to_mm)
}

pub fn vec_to_m(v: [f64; 3]) -> [f64; 3] {
    v.map(mm_to_m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn external_round_trip(v in -1e6f64..1e6) {
            let tol = 1e-12 * v.abs().max(f64::MIN_POSITIVE);
            prop_assert!((m_to_mm(mm_to_m(v)) - v).abs() <= tol);
            prop_assert!((pa_to_mpa(mpa_to_pa(v)) - v).abs() <= tol);
            prop_assert!((kg_to_g(g_to_kg(v)) - v).abs() <= tol);
        }
    }

    #[test]
    fn scale_factors() {
        assert_eq!(mm_to_m(290.0), 0.29);
        assert_eq!(mpa_to_pa(0.2), 2e5);
    }
}
