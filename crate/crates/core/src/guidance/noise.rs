use std::f64::consts::FRAC_PI_2;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::GuidanceError;
use crate::image::Image;

/// Cosine schedule: `alpha_bar(0) = 1`, `alpha_bar(1) = 0`.
pub fn alpha_bar(t: f64) -> f64 {
    let c = (FRAC_PI_2 * t).cos();
    (c * c).clamp(0.0, 1.0)
}

/// `x_t = sqrt(alpha_bar) x + sqrt(1 - alpha_bar) eps`.
pub fn add_noise(x: &Image, t: f64, eps: &Image) -> Result<Image, GuidanceError> {
    if !(0.0..=1.0).contains(&t) {
        return Err(GuidanceError::InvalidRequest(format!("t = {t} outside [0, 1]")));
    }
    if !x.same_shape(eps) {
        return Err(GuidanceError::Shape("noise and image shapes differ".into()));
    }
    let a = alpha_bar(t);
    let (sa, sn) = (a.sqrt(), (1.0 - a).sqrt());
    Ok(Image {
        data: x.data.iter().zip(&eps.data).map(|(&x, &e)| sa * x + sn * e).collect(),
        ..x.clone()
    })
}

/// Standard normal image, deterministic in `seed`.
pub fn sample_noise(width: usize, height: usize, channels: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..width * height * channels).map(|_| StandardNormal.sample(&mut rng)).collect();
    Image {
        width,
        height,
        channels,
        data,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_endpoints() {
        assert_eq!(alpha_bar(0.0), 1.0);
        assert!(alpha_bar(1.0) < 1e-30);
        assert!(alpha_bar(0.1) > alpha_bar(0.2));
    }

    #[test]
    fn deterministic_branches() {
        let x = sample_noise(5, 4, 3, 1);
        let eps = sample_noise(5, 4, 3, 2);
        assert_eq!(add_noise(&x, 0.0, &eps).unwrap(), x);
        let zero = Image::new(5, 4, 3);
        let s = alpha_bar(0.3).sqrt();
        assert_eq!(add_noise(&x, 0.3, &zero).unwrap(), x.map(|v| s * v));
        assert!(add_noise(&x, 1.5, &eps).is_err());
        assert!(add_noise(&x, -0.1, &eps).is_err());
    }

    #[test]
    fn noise_moments_match_schedule() {
        let x = Image::from_data(1, 1, 2, vec![0.9, -0.8]).unwrap();
        let t = 0.4;
        let a = alpha_bar(t);
        let n = 10_000;
        let mut sum = [0.0; 2];
        let mut sq = [0.0; 2];
        for s in 0..n {
            let xt = add_noise(&x, t, &sample_noise(1, 1, 2, s)).unwrap();
            for c in 0..2 {
                sum[c] += xt.data[c];
                sq[c] += xt.data[c] * xt.data[c];
            }
        }
        for c in 0..2 {
            let mean = sum[c] / n as f64;
            let var = sq[c] / n as f64 - mean * mean;
            let expect = a.sqrt() * x.data[c];
            assert!((mean - expect).abs() <= 0.05 * expect.abs(), "mean {mean} vs {expect}");
            assert!((var - (1.0 - a)).abs() <= 0.05 * (1.0 - a), "var {var} vs {}", 1.0 - a);
        }
    }

    #[test]
    fn noise_is_seeded() {
        assert_eq!(sample_noise(8, 8, 3, 9), sample_noise(8, 8, 3, 9));
        assert_ne!(sample_noise(8, 8, 3, 9), sample_noise(8, 8, 3, 10));
    }
}
