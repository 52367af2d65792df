//! Test sources: Shepp-Logan with extra disks, raster images, a synthetic
//! striped image, and measurement noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid2D, Region, ScalarField, OMEGA_HALF_WIDTH};
use crate::io::{read_pgm, PgmImage};
use crate::wave::BoundaryTrace;

use std::path::Path;

/// `(value, a, b, x0, y0, phi_deg)`: the ten ellipses of the modified
/// (higher contrast) Shepp-Logan head on `[-1, 1]^2`.
pub const SHEPP_LOGAN: [[f64; 6]; 10] = [
    [1.0, 0.69, 0.92, 0.0, 0.0, 0.0],
    [-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0],
    [-0.2, 0.11, 0.31, 0.22, 0.0, -18.0],
    [-0.2, 0.16, 0.41, -0.22, 0.0, 18.0],
    [0.1, 0.21, 0.25, 0.0, 0.35, 0.0],
    [0.1, 0.046, 0.046, 0.0, 0.1, 0.0],
    [0.1, 0.046, 0.046, 0.0, -0.1, 0.0],
    [0.1, 0.046, 0.023, -0.08, -0.605, 0.0],
    [0.1, 0.023, 0.023, 0.0, -0.606, 0.0],
    [0.1, 0.023, 0.046, 0.06, -0.605, 0.0],
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center: [f64; 2],
    pub radius: f64,
    pub value: f64,
}

impl Disk {
    fn contains(&self, x: f64, y: f64) -> bool {
        (x - self.center[0]).powi(2) + (y - self.center[1]).powi(2) <= self.radius * self.radius
    }
}

/// The four bright disks added to the head, one near each corner.
pub fn default_disks() -> Vec<Disk> {
    [[-0.8, -0.8], [0.8, -0.8], [-0.8, 0.8], [0.8, 0.8]]
        .into_iter()
        .map(|center| Disk { center, radius: 0.1, value: 1.0 })
        .collect()
}

/// Sum of the Shepp-Logan ellipse values at a point of `[-1, 1]^2`.
pub fn shepp_logan_value(x: f64, y: f64) -> f64 {
    SHEPP_LOGAN
        .iter()
        .filter(|&&[_, a, b, x0, y0, phi]| {
            let (s, c) = phi.to_radians().sin_cos();
            let (dx, dy) = (x - x0, y - y0);
            let u = dx * c + dy * s;
            let v = -dx * s + dy * c;
            (u / a).powi(2) + (v / b).powi(2) <= 1.0
        })
        .map(|e| e[0])
        .sum()
}

/// Shepp-Logan head sampled at the nodes of `grid`, with `disks` painted
/// on top.
pub fn shepp_logan(grid: &Grid2D, disks: &[Disk]) -> Result<ScalarField> {
    for d in disks {
        let reach = d.center[0].abs().max(d.center[1].abs()) + d.radius;
        if !(d.radius > 0.0) || reach >= OMEGA_HALF_WIDTH {
            return Err(Error::InvalidParameter(format!("disk {d:?} is not inside the measurement square")));
        }
    }
    let field = ScalarField::from_fn(*grid, |x, y| {
        match disks.iter().rev().find(|d| d.contains(x, y)) {
            Some(d) => d.value,
            None => shepp_logan_value(x, y),
        }
    });
    Ok(field)
}

/// Bilinear sample of an image at fractional pixel position `(u, v)`,
/// column `u`, row `v`, values scaled by `1 / maxval`.
pub fn image_bilinear(img: &PgmImage, u: f64, v: f64) -> f64 {
    let u = u.clamp(0.0, (img.width - 1) as f64);
    let v = v.clamp(0.0, (img.height - 1) as f64);
    let c0 = (u.floor() as usize).min(img.width.saturating_sub(2));
    let r0 = (v.floor() as usize).min(img.height.saturating_sub(2));
    let c1 = (c0 + 1).min(img.width - 1);
    let r1 = (r0 + 1).min(img.height - 1);
    let (a, b) = (u - c0 as f64, v - r0 as f64);
    let px = |r: usize, c: usize| img.data[r * img.width + c] as f64;
    let val = (1.0 - b) * ((1.0 - a) * px(r0, c0) + a * px(r0, c1)) + b * ((1.0 - a) * px(r1, c0) + a * px(r1, c1));
    val / img.maxval as f64
}

/// Resample `img` onto the nodes of `fit` (corners aligned, first image row
/// at the top), zero elsewhere.
pub fn image_phantom(img: &PgmImage, grid: &Grid2D, fit: &Region) -> Result<ScalarField> {
    if fit.i1 >= grid.nx || fit.j1 >= grid.ny {
        return Err(Error::ShapeMismatch("fit region exceeds grid".into()));
    }
    if img.width == 0 || img.height == 0 {
        return Err(Error::Format("empty image".into()));
    }
    let mut f = ScalarField::zeros(*grid);
    let (w, h) = (fit.width(), fit.height());
    let su = if w > 1 { (img.width - 1) as f64 / (w - 1) as f64 } else { 0.0 };
    let sv = if h > 1 { (img.height - 1) as f64 / (h - 1) as f64 } else { 0.0 };
    for (i, j) in fit.nodes() {
        let u = (i - fit.i0) as f64 * su;
        let v = (fit.j1 - j) as f64 * sv;
        f.set(i, j, image_bilinear(img, u, v));
    }
    Ok(f)
}

/// Read a PGM file and resample it onto `fit`.
pub fn load_image_phantom(path: &Path, grid: &Grid2D, fit: &Region) -> Result<ScalarField> {
    image_phantom(&read_pgm(path)?, grid, fit)
}

/// A synthetic striped test image: two animal-like blobs covered in warped
/// black and white stripes over a grey background.
pub fn stripes_image(width: usize, height: usize) -> PgmImage {
    let mut data = Vec::with_capacity(width * height);
    for r in 0..height {
        for col in 0..width {
            let x = 2.0 * col as f64 / (width.max(2) - 1) as f64 - 1.0;
            let y = 1.0 - 2.0 * r as f64 / (height.max(2) - 1) as f64;
            let body = |cx: f64, cy: f64, a: f64, b: f64, tilt: f64| {
                let (s, c) = tilt.sin_cos();
                let (dx, dy) = (x - cx, y - cy);
                ((dx * c + dy * s) / a).powi(2) + ((-dx * s + dy * c) / b).powi(2) <= 1.0
            };
            let stripe = |freq: f64, warp: f64| {
                let phase = freq * (x + warp * (2.5 * y).sin() + 0.15 * (4.0 * x).cos() * y);
                if phase.sin() >= 0.0 { 255 } else { 20 }
            };
            let v = if body(-0.3, 0.1, 0.45, 0.28, 0.35) {
                stripe(18.0, 0.25)
            } else if body(0.35, -0.2, 0.4, 0.25, -0.5) {
                stripe(22.0, -0.2)
            } else {
                110
            };
            data.push(v);
        }
    }
    PgmImage { width, height, maxval: 255, data }
}

/// Add Gaussian noise with `||noise|| = level ||trace||` (Euclidean norm
/// over all samples), reproducible from `seed`.
pub fn add_noise(trace: &BoundaryTrace, level: f64, seed: u64) -> Result<BoundaryTrace> {
    if !(level >= 0.0 && level.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise level {level}")));
    }
    let norm = trace.norm();
    if level == 0.0 || norm == 0.0 {
        return Ok(trace.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<f64> = (0..trace.values.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let nn = noise.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = level * norm / nn;
    let mut out = trace.clone();
    for (v, n) in out.values.iter_mut().zip(&noise) {
        *v += scale * n;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shepp_logan_oracle_values() {
        // inside the skull ring only: 1
        assert_eq!(shepp_logan_value(0.0, 0.9), 1.0);
        // brain matter away from the small features: 1 - 0.8
        assert!((shepp_logan_value(0.0, -0.3) - 0.2).abs() < 1e-15);
        // left ventricle: 1 - 0.8 - 0.2
        assert!(shepp_logan_value(-0.22, 0.0).abs() < 1e-15);
        assert_eq!(shepp_logan_value(0.9, 0.9), 0.0);
    }

    #[test]
    fn disks_are_painted_and_validated() {
        let g = Grid2D::default_box(101);
        let d = Disk { center: [0.0, 0.0], radius: 0.1, value: 1.0 };
        let f = shepp_logan(&g, &[d]).unwrap();
        for (k, v) in f.data.iter().enumerate() {
            let (x, y) = (g.x(k % g.nx), g.y(k / g.nx));
            if x.hypot(y) <= 0.1 {
                assert_eq!(*v, 1.0);
            }
        }
        let f = shepp_logan(&g, &default_disks()).unwrap();
        let (i, j) = g.nearest([0.8, 0.8]);
        assert_eq!(f.at(i, j), 1.0);
        assert!(f.data.iter().all(|v| (-1e-12..=1.0).contains(v)));
        let bad = Disk { center: [1.2, 0.0], radius: 0.1, value: 1.0 };
        assert!(shepp_logan(&g, &[bad]).is_err());
    }

    fn image(w: usize, h: usize, data: Vec<u16>) -> PgmImage {
        PgmImage { width: w, height: h, maxval: 255, data }
    }

    #[test]
    fn uniform_images() {
        let g = Grid2D::default_box(31);
        let fit = Region::new(5, 25, 5, 25).unwrap();
        let white = image_phantom(&image(3, 3, vec![255; 9]), &g, &fit).unwrap();
        let black = image_phantom(&image(3, 3, vec![0; 9]), &g, &fit).unwrap();
        for (i, j) in fit.nodes() {
            assert_eq!(white.at(i, j), 1.0);
            assert_eq!(black.at(i, j), 0.0);
        }
        assert_eq!(white.at(0, 0), 0.0);
    }

    #[test]
    fn checkerboard_bilinear() {
        let img = image(2, 2, vec![255, 0, 0, 255]);
        let g = Grid2D::default_box(11);
        // 3 x 3 fit: the middle row and column sit halfway between pixels
        let fit = Region::new(4, 6, 4, 6).unwrap();
        let f = image_phantom(&img, &g, &fit).unwrap();
        for k in 4..=6 {
            assert!((f.at(5, k) - 0.5).abs() < 1e-15);
            assert!((f.at(k, 5) - 0.5).abs() < 1e-15);
        }
        // 4 x 4 fit: nodes at thirds, (1/3, 1/3) gives (2/3)^2 + (1/3)^2
        let fit = Region::new(3, 6, 3, 6).unwrap();
        let f = image_phantom(&img, &g, &fit).unwrap();
        assert!((f.at(4, 5) - 5.0 / 9.0).abs() < 1e-15);
        assert!((f.at(5, 5) - 4.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn stripes_image_has_both_tones() {
        let img = stripes_image(64, 48);
        assert_eq!(img.data.len(), 64 * 48);
        assert!(img.data.contains(&255) && img.data.contains(&20) && img.data.contains(&110));
    }

    fn trace() -> BoundaryTrace {
        let g = Grid2D::default_box(21);
        let r = Region::omega(&g).unwrap();
        let mut t = BoundaryTrace::zeros(&g, &r, 10, 0.1);
        for (k, v) in t.values.iter_mut().enumerate() {
            *v = (k as f64 * 0.37).sin();
        }
        t
    }

    #[test]
    fn noise_is_normalised_and_reproducible() {
        let t = trace();
        assert_eq!(add_noise(&t, 0.0, 3).unwrap(), t);
        let a = add_noise(&t, 0.1, 7).unwrap();
        let b = add_noise(&t, 0.1, 7).unwrap();
        assert_eq!(a, b);
        let diff: f64 = a.values.iter().zip(&t.values).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        assert!((diff / t.norm() - 0.1).abs() < 1e-10);
        let c = add_noise(&t, 0.1, 8).unwrap();
        assert_ne!(a, c);
        assert!(add_noise(&t, -0.1, 1).is_err());
    }
}
