//! Full-reference image quality indices: MSE, PSNR and single-window SSIM.

use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use super::image::GrayImage;
use crate::error::{Error, Result};
use crate::scalar::Real;

const PEAK: f64 = 255.0;

pub fn mse<T: Real>(f: &GrayImage, g: &GrayImage) -> Result<T> {
    f.same_shape(g)?;
    let sum: u64 = f
        .pixels()
        .iter()
        .zip(g.pixels())
        .map(|(&a, &b)| {
            let d = i64::from(a) - i64::from(b);
            (d * d) as u64
        })
        .sum();
    Ok(T::from_u64(sum).expect("u64 representable") / T::from_usize_lossy(f.pixels().len()))
}

/// Peak signal-to-noise ratio in dB. Identical images have no finite PSNR.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Psnr<T> {
    Finite(T),
    Infinite,
}

impl<T: Real> Psnr<T> {
    pub fn from_mse(mse: T) -> Self {
        if mse == T::zero() {
            Psnr::Infinite
        } else {
            Psnr::Finite(T::lit(10.0) * (T::lit(PEAK * PEAK) / mse).log10())
        }
    }

    pub fn finite(self) -> Option<T> {
        match self {
            Psnr::Finite(v) => Some(v),
            Psnr::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Psnr::Infinite)
    }
}

impl<T: Real> PartialOrd for Psnr<T> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        use std::cmp::Ordering::*;
        match (self, other) {
            (Psnr::Infinite, Psnr::Infinite) => Some(Equal),
            (Psnr::Infinite, _) => Some(Greater),
            (_, Psnr::Infinite) => Some(Less),
            (Psnr::Finite(a), Psnr::Finite(b)) => a.partial_cmp(b),
        }
    }
}

impl<T: Real> fmt::Display for Psnr<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Psnr::Finite(v) => write!(f, "{v}"),
            Psnr::Infinite => f.write_str("inf"),
        }
    }
}

/// Finite values as JSON numbers, the infinite case as the string `"inf"`.
impl<T: Real> Serialize for Psnr<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Psnr::Finite(v) => v.serialize(s),
            Psnr::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de, T: Real> Deserialize<'de> for Psnr<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct PsnrVisitor<T>(std::marker::PhantomData<T>);

        impl<T: Real> Visitor<'_> for PsnrVisitor<T> {
            type Value = Psnr<T>;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or \"inf\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Self::Value, E> {
                Ok(Psnr::Finite(T::lit(v)))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Self::Value, E> {
                Ok(Psnr::Finite(T::lit(v as f64)))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Self::Value, E> {
                Ok(Psnr::Finite(T::lit(v as f64)))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Self::Value, E> {
                if v == "inf" {
                    Ok(Psnr::Infinite)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
        }

        d.deserialize_any(PsnrVisitor(std::marker::PhantomData))
    }
}

pub fn psnr<T: Real>(f: &GrayImage, g: &GrayImage) -> Result<Psnr<T>> {
    Ok(Psnr::from_mse(mse::<T>(f, g)?))
}

/// Stabilizing constants of the SSIM factors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SsimConstants<T> {
    pub c1: T,
    pub c2: T,
    pub c3: T,
}

impl<T: Real> Default for SsimConstants<T> {
    /// `C1 = (0.01·255)²`, `C2 = (0.03·255)²`, `C3 = C2/2`.
    fn default() -> Self {
        let c1 = T::lit((0.01 * PEAK) * (0.01 * PEAK));
        let c2 = T::lit((0.03 * PEAK) * (0.03 * PEAK));
        SsimConstants {
            c1,
            c2,
            c3: c2 / T::lit(2.0),
        }
    }
}

/// Whole-image means, population standard deviations and covariance.
fn moments<T: Real>(f: &GrayImage, g: &GrayImage) -> (T, T, T, T, T) {
    let n = T::from_usize_lossy(f.pixels().len());
    let to = |p: u8| T::from_u8(p).expect("u8 representable");
    let mu_f = f.pixels().iter().map(|&p| to(p)).sum::<T>() / n;
    let mu_g = g.pixels().iter().map(|&p| to(p)).sum::<T>() / n;
    let (mut vf, mut vg, mut cov) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in f.pixels().iter().zip(g.pixels()) {
        let (da, db) = (to(a) - mu_f, to(b) - mu_g);
        vf += da * da;
        vg += db * db;
        cov += da * db;
    }
    (mu_f, mu_g, (vf / n).sqrt(), (vg / n).sqrt(), cov / n)
}

/// Product of the correlation, luminance and contrast factors computed over
/// one window covering the whole image.
pub fn ssim<T: Real>(f: &GrayImage, g: &GrayImage, c1: T, c2: T, c3: T) -> Result<T> {
    f.same_shape(g)?;
    if !(c1 > T::zero() && c2 > T::zero() && c3 > T::zero()) {
        return Err(Error::InvalidParameter(
            "SSIM constants must be positive".into(),
        ));
    }
    let (mu_f, mu_g, sd_f, sd_g, cov) = moments::<T>(f, g);
    let two = T::lit(2.0);
    let one = T::one();
    // Each factor is ≤ 1; clamp rounding overshoot.
    let structure = ((cov + c3) / (sd_f * sd_g + c3)).min(one);
    let luminance = ((two * mu_f * mu_g + c1) / (mu_f * mu_f + mu_g * mu_g + c1)).min(one);
    let contrast = ((two * sd_f * sd_g + c2) / (sd_f * sd_f + sd_g * sd_g + c2)).min(one);
    Ok(structure * luminance * contrast)
}

pub fn ssim_default<T: Real>(f: &GrayImage, g: &GrayImage) -> Result<T> {
    let k = SsimConstants::<T>::default();
    ssim(f, g, k.c1, k.c2, k.c3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn img(h: usize, w: usize, px: &[u8]) -> GrayImage {
        GrayImage::new(h, w, px.to_vec()).unwrap()
    }

    #[test]
    fn mse_examples() {
        let f = img(2, 2, &[1, 2, 3, 4]);
        assert_eq!(mse::<f64>(&f, &f).unwrap(), 0.0);
        let black = img(2, 2, &[0; 4]);
        let white = img(2, 2, &[255; 4]);
        assert_eq!(mse::<f64>(&black, &white).unwrap(), 65025.0);
        let g = img(2, 2, &[1, 2, 5, 4]);
        assert_eq!(mse::<f64>(&f, &g).unwrap(), 1.0);
        assert!(mse::<f64>(&f, &img(2, 3, &[0; 6])).is_err());
    }

    #[test]
    fn psnr_examples() {
        let f = img(2, 2, &[1, 2, 3, 4]);
        assert!(psnr::<f64>(&f, &f).unwrap().is_infinite());
        assert_eq!(Psnr::from_mse(65025.0f64), Psnr::Finite(0.0));
        assert_abs_diff_eq!(
            Psnr::from_mse(650.25f64).finite().unwrap(),
            20.0,
            epsilon = 1e-12
        );
        assert!(Psnr::Infinite > Psnr::Finite(1e300f64));
    }

    #[test]
    fn psnr_json_sentinel() {
        assert_eq!(serde_json::to_string(&Psnr::<f64>::Infinite).unwrap(), "\"inf\"");
        assert_eq!(serde_json::to_string(&Psnr::Finite(20.5f64)).unwrap(), "20.5");
        let back: Psnr<f64> = serde_json::from_str("\"inf\"").unwrap();
        assert!(back.is_infinite());
        let back: Psnr<f64> = serde_json::from_str("12").unwrap();
        assert_eq!(back, Psnr::Finite(12.0));
        assert!(serde_json::from_str::<Psnr<f64>>("\"nan\"").is_err());
    }

    #[test]
    fn ssim_examples() {
        let f = img(2, 3, &[10, 200, 30, 90, 0, 255]);
        assert_abs_diff_eq!(ssim_default::<f64>(&f, &f).unwrap(), 1.0, epsilon = 1e-12);
        let flat = img(2, 2, &[100; 4]);
        assert_abs_diff_eq!(ssim_default::<f64>(&flat, &flat).unwrap(), 1.0, epsilon = 1e-12);
        let g = img(2, 3, &[12, 180, 40, 90, 20, 230]);
        let ab = ssim_default::<f64>(&f, &g).unwrap();
        let ba = ssim_default::<f64>(&g, &f).unwrap();
        assert_abs_diff_eq!(ab, ba, epsilon = 1e-15);
        assert!(ab < 1.0 && ab > 0.0);
        assert!(ssim(&f, &g, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn ssim_of_inverted_image_is_negative() {
        let f = img(2, 2, &[0, 255, 255, 0]);
        let g = img(2, 2, &[255, 0, 0, 255]);
        let v = ssim_default::<f64>(&f, &g).unwrap();
        assert!((-1.0..0.0).contains(&v));
    }

    fn image_pair() -> impl Strategy<Value = (GrayImage, GrayImage)> {
        (2usize..8, 2usize..8).prop_flat_map(|(h, w)| {
            (
                proptest::collection::vec(any::<u8>(), h * w),
                proptest::collection::vec(any::<u8>(), h * w),
            )
                .prop_map(move |(a, b)| {
                    (GrayImage::new(h, w, a).unwrap(), GrayImage::new(h, w, b).unwrap())
                })
        })
    }

    proptest! {
        #[test]
        fn psnr_consistent_with_mse((f, g) in image_pair()) {
            let m = mse::<f64>(&f, &g).unwrap();
            match psnr::<f64>(&f, &g).unwrap() {
                Psnr::Infinite => prop_assert_eq!(m, 0.0),
                Psnr::Finite(p) => {
                    prop_assert!((p - 10.0 * (65025.0 / m).log10()).abs() < 1e-12);
                    prop_assert!(p >= 0.0);
                }
            }
        }

        #[test]
        fn ssim_bounded_and_symmetric((f, g) in image_pair()) {
            let ab = ssim_default::<f64>(&f, &g).unwrap();
            let ba = ssim_default::<f64>(&g, &f).unwrap();
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!((-1.0..=1.0 + 1e-12).contains(&ab));
            prop_assert!((ssim_default::<f64>(&f, &f).unwrap() - 1.0).abs() < 1e-12);
        }
    }
}
