//! Synthetic labeled shapes: noisy spheres and figure-8s.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pdb_ingest::WeightedPointCloud;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Sphere,
    Figure8,
}

impl Shape {
    pub fn name(self) -> &'static str {
        match self {
            Shape::Sphere => "sphere",
            Shape::Figure8 => "figure8",
        }
    }

    /// Score written to the synthetic scores file. With the default
    /// threshold of 1, figure-8s are the positive ("stable") class.
    pub fn score(self) -> f64 {
        match self {
            Shape::Sphere => 0.0,
            Shape::Figure8 => 2.0,
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sphere" => Ok(Shape::Sphere),
            "figure8" | "figure-8" => Ok(Shape::Figure8),
            _ => Err(Error::Config(format!("unknown shape {s:?}"))),
        }
    }
}

fn add_noise(p: [f64; 3], noise: Option<&Normal<f64>>, rng: &mut impl Rng) -> [f64; 3] {
    match noise {
        Some(n) => [p[0] + n.sample(rng), p[1] + n.sample(rng), p[2] + n.sample(rng)],
        None => p,
    }
}

fn noise_dist(noise: f64) -> Result<Option<Normal<f64>>> {
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::Config(format!("noise must be finite and non-negative, got {noise}")));
    }
    Ok((noise > 0.0).then(|| Normal::new(0.0, noise).expect("valid sd")))
}

/// Uniform sample of the unit sphere plus isotropic Gaussian noise.
pub fn sample_sphere(n_points: usize, noise: f64, rng: &mut impl Rng) -> Result<Vec<[f64; 3]>> {
    let noise = noise_dist(noise)?;
    let mut out = Vec::with_capacity(n_points);
    while out.len() < n_points {
        let g: [f64; 3] = [
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        ];
        let r = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
        if r < 1e-12 {
            continue;
        }
        out.push(add_noise([g[0] / r, g[1] / r, g[2] / r], noise.as_ref(), rng));
    }
    Ok(out)
}

/// Two unit circles in the `z = 0` plane centered at `(±1, 0, 0)`, tangent
/// at the origin. Each point picks a circle and an angle uniformly.
pub fn sample_figure8(n_points: usize, noise: f64, rng: &mut impl Rng) -> Result<Vec<[f64; 3]>> {
    let noise = noise_dist(noise)?;
    Ok((0..n_points)
        .map(|_| {
            let cx = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let t = rng.random_range(0.0..std::f64::consts::TAU);
            add_noise([cx + t.cos(), t.sin(), 0.0], noise.as_ref(), rng)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_sphere: usize,
    pub n_figure8: usize,
    pub n_points: usize,
    pub noise: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSample {
    pub id: String,
    pub shape: Shape,
    pub cloud: WeightedPointCloud,
}

/// Generate a corpus. Each sample draws from its own ChaCha stream, so a
/// sample's points depend only on the seed, its shape and its index.
pub fn generate(spec: &SynthSpec) -> Result<Vec<SynthSample>> {
    if spec.n_points < 4 {
        return Err(Error::Config(format!("n_points must be at least 4, got {}", spec.n_points)));
    }
    let mut out = Vec::with_capacity(spec.n_sphere + spec.n_figure8);
    for (shape, count, stream_base) in [(Shape::Sphere, spec.n_sphere, 0u64), (Shape::Figure8, spec.n_figure8, 1u64 << 32)] {
        for i in 0..count {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(stream_base + i as u64);
            let points = match shape {
                Shape::Sphere => sample_sphere(spec.n_points, spec.noise, &mut rng)?,
                Shape::Figure8 => sample_figure8(spec.n_points, spec.noise, &mut rng)?,
            };
            out.push(SynthSample {
                id: format!("{}_{:04}", shape.name(), i),
                shape,
                cloud: WeightedPointCloud::unweighted(points),
            });
        }
    }
    Ok(out)
}
