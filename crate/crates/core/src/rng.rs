//! Brownian increments keyed by `(seed, step, mode)`.
//!
//! Each step owns its own ChaCha stream (`stream = step index`), and modes are
//! drawn in order from that stream, so an increment never depends on how many
//! steps were taken before it or on how trajectories are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub trait IncrementSource {
    /// `count` independent `N(0, dt)` increments for step `step`.
    fn increments(&mut self, step: u64, dt: f64, count: usize) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRng {
    pub seed: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    /// Standard normals for one step.
    pub fn standard_normals(&self, step: u64, count: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(step);
        (0..count)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect()
    }
}

impl IncrementSource for CounterRng {
    fn increments(&mut self, step: u64, dt: f64, count: usize) -> Result<Vec<f64>> {
        let s = dt.sqrt();
        Ok(self
            .standard_normals(step, count)
            .into_iter()
            .map(|z| z * s)
            .collect())
    }
}

/// A Brownian path sampled on a fine uniform grid. Coarser steps that are
/// integer multiples of the fine step receive summed fine increments, so
/// runs at several resolutions share one path.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    fine_dt: f64,
    modes: usize,
    /// `increments[step][mode]`
    increments: Vec<Vec<f64>>,
}

impl BrownianPath {
    pub fn sample(seed: u64, fine_dt: f64, steps: usize, modes: usize) -> Self {
        let mut src = CounterRng::new(seed);
        let increments = (0..steps as u64)
            .map(|s| {
                src.increments(s, fine_dt, modes)
                    .expect("counter source is infallible")
            })
            .collect();
        Self {
            fine_dt,
            modes,
            increments,
        }
    }

    pub fn fine_dt(&self) -> f64 {
        self.fine_dt
    }

    /// `W(t)` at the end of the sampled window, per mode.
    pub fn endpoint(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.modes];
        for inc in &self.increments {
            for (a, b) in w.iter_mut().zip(inc) {
                *a += b;
            }
        }
        w
    }

    fn ratio(&self, dt: f64) -> Result<usize> {
        let r = (dt / self.fine_dt).round();
        if r < 1.0 || ((r * self.fine_dt - dt).abs() > 1e-9 * dt) {
            return Err(Error::Parameter(format!(
                "step {dt} is not a multiple of the path resolution {}",
                self.fine_dt
            )));
        }
        Ok(r as usize)
    }
}

impl IncrementSource for BrownianPath {
    fn increments(&mut self, step: u64, dt: f64, count: usize) -> Result<Vec<f64>> {
        if count > self.modes {
            return Err(Error::IncrementLength {
                expected: count,
                got: self.modes,
            });
        }
        let r = self.ratio(dt)?;
        let start = step as usize * r;
        if start + r > self.increments.len() {
            return Err(Error::Parameter(
                "Brownian path is too short for this run".into(),
            ));
        }
        let mut out = vec![0.0; count];
        for inc in &self.increments[start..start + r] {
            for (o, v) in out.iter_mut().zip(inc) {
                *o += v;
            }
        }
        Ok(out)
    }
}
