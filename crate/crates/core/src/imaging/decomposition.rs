//! PCA on images, with rows as observations and columns as variables, and the
//! seeded row shuffle that destroys vertical correlation beforehand.
//!
//! Pixels share one unit, so the image is centered but not scaled before the
//! decomposition. Because the column covariance sums over rows, it is exactly
//! invariant under any row permutation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::image::{round_half_up, GrayImage};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::pca::{eig_sym, project_out_top, scatter, EigenSystem};
use crate::scalar::Real;

/// Identifies the shuffle: Fisher–Yates from the last row down, drawing each
/// swap index uniformly from `0..=i` with a ChaCha8 generator seeded from the
/// 64-bit seed.
pub const SHUFFLE_ALGORITHM: &str = "chacha8-fisher-yates-v1";

/// The permutation `shuffle_rows` applies: output row `i` is input row
/// `perm[i]`.
pub fn row_permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        perm.swap(i, j);
    }
    perm
}

pub fn shuffle_rows(img: &GrayImage, seed: u64) -> GrayImage {
    let perm = row_permutation(img.height(), seed);
    let mut pixels = Vec::with_capacity(img.pixels().len());
    for &src in &perm {
        pixels.extend_from_slice(img.row(src));
    }
    GrayImage::new(img.height(), img.width(), pixels).expect("same shape")
}

/// Column means and covariance eigensystem of an image, reusable across
/// several removal counts.
#[derive(Clone, Debug)]
pub struct ImagePca<T> {
    height: usize,
    width: usize,
    means: Vec<T>,
    centered: Matrix<T>,
    eigen: EigenSystem<T>,
}

impl<T: Real> ImagePca<T> {
    pub fn fit(img: &GrayImage) -> Result<Self> {
        let (n, m) = img.shape();
        let nf = T::from_usize_lossy(n);
        let to = |p: u8| T::from_u8(p).expect("u8 representable");
        let mut means = vec![T::zero(); m];
        for i in 0..n {
            for (mu, &p) in means.iter_mut().zip(img.row(i)) {
                *mu += to(p);
            }
        }
        for mu in &mut means {
            *mu /= nf;
        }
        let centered = Matrix::from_fn(n, m, |i, j| to(img.get(i, j)) - means[j]);
        let eigen = eig_sym(&scatter(&centered, n))?;
        Ok(ImagePca {
            height: n,
            width: m,
            means,
            centered,
            eigen,
        })
    }

    /// Column-covariance eigenvalues, descending.
    pub fn eigenvalues(&self) -> &[T] {
        &self.eigen.eigenvalues
    }

    pub fn eigensystem(&self) -> &EigenSystem<T> {
        &self.eigen
    }

    pub fn column_means(&self) -> &[T] {
        &self.means
    }

    /// Removes the `k` largest components, restores the column means, clamps
    /// to `[0, 255]` and rounds halves up.
    pub fn remove(&self, k: usize) -> Result<GrayImage> {
        if k >= self.width {
            return Err(Error::OutOfRange {
                what: "components to remove",
                value: k.to_string(),
                range: format!("0..={}", self.width - 1),
            });
        }
        let reduced = project_out_top(&self.centered, &self.eigen.eigenvectors, k);
        GrayImage::from_fn(self.height, self.width, |i, j| {
            round_half_up(reduced[(i, j)] + self.means[j])
        })
    }
}

pub fn image_pca_remove<T: Real>(img: &GrayImage, k: usize) -> Result<GrayImage> {
    if k >= img.width() {
        return Err(Error::OutOfRange {
            what: "components to remove",
            value: k.to_string(),
            range: format!("0..={}", img.width() - 1),
        });
    }
    if k == 0 {
        return Ok(img.clone());
    }
    ImagePca::<T>::fit(img)?.remove(k)
}

/// The `count` largest column-covariance eigenvalues of the centered image.
pub fn eigen_decay<T: Real>(img: &GrayImage, count: usize) -> Result<Vec<T>> {
    if count > img.width() {
        return Err(Error::OutOfRange {
            what: "eigenvalue count",
            value: count.to_string(),
            range: format!("0..={}", img.width()),
        });
    }
    let pca = ImagePca::<T>::fit(img)?;
    Ok(pca.eigenvalues()[..count].to_vec())
}
