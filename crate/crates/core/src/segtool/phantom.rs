//! Synthetic ellipsoid phantoms standing in for clinical MRI volumes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::SegError;
use crate::volume::{Grid, Mask, Volume};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ellipsoid {
    /// Center in mm; voxel `i` sits at `i·spacing`.
    pub center: [f64; 3],
    pub semi_axes: [f64; 3],
    pub intensity: f64,
}

impl Ellipsoid {
    pub fn sphere(center: [f64; 3], radius: f64, intensity: f64) -> Self {
        Ellipsoid {
            center,
            semi_axes: [radius; 3],
            intensity,
        }
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        let q: f64 = (0..3)
            .map(|a| ((p[a] - self.center[a]) / self.semi_axes[a]).powi(2))
            .sum();
        q <= 1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub dims: [usize; 3],
    pub spacing: [f32; 3],
    /// Lesions; their union is the ground-truth mask.
    pub ellipsoids: Vec<Ellipsoid>,
    /// Organs at risk, drawn into the volume and returned as separate masks.
    #[serde(default)]
    pub oars: Vec<Ellipsoid>,
    pub background: f64,
    pub noise_sigma: f64,
    pub rng_seed: u64,
}

#[derive(Debug, Clone)]
pub struct Phantom {
    pub volume: Volume,
    pub truth: Mask,
    pub oars: Vec<Mask>,
}

pub fn make_phantom(spec: &PhantomSpec) -> Result<Phantom, SegError> {
    let grid = Grid::new(spec.dims, spec.spacing)?;
    if !(spec.noise_sigma >= 0.0 && spec.noise_sigma.is_finite()) {
        return Err(SegError::BadPhantom("noise sigma must be finite and ≥ 0".into()));
    }
    let extent = grid.position_mm(spec.dims.map(|d| d - 1));
    for (i, e) in spec.ellipsoids.iter().chain(&spec.oars).enumerate() {
        if e.semi_axes.iter().any(|&a| a.is_nan() || a <= 0.0) {
            return Err(SegError::BadPhantom(format!("ellipsoid {i} has a non-positive semi-axis")));
        }
        let fits = (0..3).all(|a| {
            e.center[a] - e.semi_axes[a] >= 0.0 && e.center[a] + e.semi_axes[a] <= extent[a]
        });
        if !fits {
            return Err(SegError::EllipsoidOutOfBounds(i));
        }
    }

    let mut intensity = vec![spec.background as f32; grid.len()];
    let oar_masks: Vec<Mask> = spec
        .oars
        .iter()
        .map(|e| Mask::from_fn(&grid, |c| e.contains(grid.position_mm(c))))
        .collect();
    for (e, m) in spec.oars.iter().zip(&oar_masks) {
        for i in m.foreground() {
            intensity[i] = e.intensity as f32;
        }
    }
    let mut truth = Mask::empty_like(&grid);
    for e in &spec.ellipsoids {
        for (i, v) in intensity.iter_mut().enumerate() {
            if e.contains(grid.position_mm(grid.coords(i))) {
                *v = e.intensity as f32;
                truth.set(i, true);
            }
        }
    }
    if spec.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
        let normal = Normal::new(0.0, spec.noise_sigma).expect("sigma validated");
        for v in intensity.iter_mut() {
            *v += normal.sample(&mut rng) as f32;
        }
    }
    let volume = Volume::new(spec.dims, spec.spacing, intensity)?;
    Ok(Phantom {
        volume,
        truth,
        oars: oar_masks,
    })
}
