//! Databases viewed as greyscale images, and the image-compression toolbox
//! used to judge how much of a picture survives principal-component removal.

mod decomposition;
mod image;
mod quality;
mod sigmoid;

pub use decomposition::{
    eigen_decay, image_pca_remove, row_permutation, shuffle_rows, ImagePca, SHUFFLE_ALGORITHM,
};
pub use image::{
    dataset_to_image, decode_pgm, encode_pgm, load_image, read_pgm, write_image, write_pgm,
    GrayImage, ImageScaling, Scaling,
};
pub use quality::{mse, psnr, ssim, ssim_default, Psnr, SsimConstants};
pub use sigmoid::{fit_sigmoid, fit_sigmoid_traced, SigmoidFit};
