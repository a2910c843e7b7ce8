//! Anisotropic norms on the torus: mixed Lebesgue `L^(q,zeta)` (horizontal
//! exponent q outside, vertical exponent zeta inside), Bessel potential,
//! Littlewood-Paley Besov and sampled Hölder norms.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::spectral::{GridSpec, RealField, SpectralField};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceParams {
    /// smoothness
    pub s: f64,
    /// horizontal integrability
    pub q: f64,
    /// vertical integrability
    pub zeta: f64,
    /// Besov fine index
    pub p: f64,
    /// Hölder exponent
    pub gamma: f64,
}

impl SpaceParams {
    pub fn besov(s: f64, q: f64, zeta: f64, p: f64) -> Self {
        Self {
            s,
            q,
            zeta,
            p,
            gamma: 0.5,
        }
    }

    /// `H^s = B^s_{(2,2),2}`
    pub fn sobolev(s: f64) -> Self {
        Self::besov(s, 2.0, 2.0, 2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormMethod {
    Quadrature,
    LittlewoodPaley,
    SampledDifferences,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormReport {
    pub value: f64,
    pub method: NormMethod,
    /// Unweighted `||Delta_j f||`, index 0 holding the low block `j = -1`.
    pub block_values: Option<Vec<f64>>,
}

impl NormReport {
    fn quadrature(value: f64) -> Self {
        Self {
            value,
            method: NormMethod::Quadrature,
            block_values: None,
        }
    }
}

fn check_exponent(name: &str, v: f64, open_at_one: bool) -> Result<()> {
    let bad = !v.is_finite() || v < 1.0 || (open_at_one && v == 1.0);
    if bad {
        let range = if open_at_one { "(1, inf)" } else { "[1, inf)" };
        return Err(Error::Parameter(format!(
            "{name} = {v} must lie in {range}"
        )));
    }
    Ok(())
}

/// Mixed norm `[ int_{T^2} ( int_{T_z} |f|^zeta dz )^{q/zeta} dx dy ]^{1/q}` by
/// equal-weight periodic quadrature. Vector fields are reduced pointwise with
/// the Euclidean norm first.
pub fn lebesgue_norm(f: &RealField, q: f64, zeta: f64) -> Result<NormReport> {
    check_exponent("q", q, false)?;
    check_exponent("zeta", zeta, false)?;
    Ok(NormReport::quadrature(mixed_lebesgue(f, q, zeta)))
}

fn mixed_lebesgue(f: &RealField, q: f64, zeta: f64) -> f64 {
    let mag = if f.components() == 1 {
        f.component(0).iter().map(|v| v.abs()).collect::<Vec<_>>()
    } else {
        f.magnitude().into_values()
    };
    let g = f.grid();
    let nz = g.nz();
    let columns = g.nx() * g.ny();
    let mut outer = 0.0;
    for col in mag.chunks(nz) {
        let inner = col.iter().map(|v| v.powf(zeta)).sum::<f64>() / nz as f64;
        outer += inner.powf(q / zeta);
    }
    (outer / columns as f64).powf(1.0 / q)
}

/// `|| (1 - Delta)^{s/2} f ||_{L^(q,zeta)}`
pub fn bessel_norm(f: &RealField, s: f64, q: f64, zeta: f64) -> Result<NormReport> {
    check_exponent("q", q, true)?;
    check_exponent("zeta", zeta, true)?;
    let lifted = f.to_spectral().bessel_multiplier(s).to_physical_unchecked();
    Ok(NormReport::quadrature(mixed_lebesgue(&lifted, q, zeta)))
}

fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// Radial cutoff: 1 on `[0, 1]`, 0 on `[3/2, inf)`, smooth and decreasing between.
fn cutoff(r: f64) -> f64 {
    if r <= 1.0 {
        1.0
    } else if r >= 1.5 {
        0.0
    } else {
        let a = smooth_step(1.5 - r);
        let b = smooth_step(r - 1.0);
        a / (a + b)
    }
}

/// Dyadic partition of unity in the frequency variable `xi = 2 pi k`:
/// `psi_{-1} = chi(|xi|)`, `psi_j = chi(|xi|/2^{j+1}) - chi(|xi|/2^j)`.
pub fn lp_weight(j: i32, xi: f64) -> f64 {
    if j < 0 {
        cutoff(xi)
    } else {
        let s = 2f64.powi(j);
        cutoff(xi / (2.0 * s)) - cutoff(xi / s)
    }
}

fn xi_norm(k: [i64; 3]) -> f64 {
    2.0 * PI * ((k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64).sqrt()
}

/// Highest block index whose support meets the grid's frequencies.
pub fn top_block(grid: GridSpec) -> i32 {
    let kmax = [grid.nx() / 2, grid.ny() / 2, grid.nz() / 2];
    let xi = 2.0 * PI * kmax.iter().map(|k| (k * k) as f64).sum::<f64>().sqrt();
    xi.log2().ceil() as i32
}

/// The Littlewood-Paley pieces `Delta_j f`, `j = -1 ..= top_block`.
pub fn lp_blocks(f: &RealField) -> Vec<RealField> {
    let spec = f.to_spectral();
    lp_blocks_spectral(&spec)
}

fn lp_blocks_spectral(spec: &SpectralField) -> Vec<RealField> {
    (-1..=top_block(spec.grid()))
        .map(|j| {
            spec.apply(|k| Complex64::new(lp_weight(j, xi_norm(k)), 0.0))
                .to_physical_unchecked()
        })
        .collect()
}

/// `( sum_{j >= -1} 2^{jsp} ||Delta_j f||^p_{L^(q,zeta)} )^{1/p}`, supremum for
/// `p = inf`. The low block carries weight 1.
pub fn besov_norm(f: &RealField, s: f64, q: f64, zeta: f64, p: f64) -> Result<NormReport> {
    check_exponent("q", q, true)?;
    check_exponent("zeta", zeta, true)?;
    if !(p >= 1.0) {
        return Err(Error::Parameter(format!("p = {p} must lie in [1, inf]")));
    }
    let blocks: Vec<f64> = lp_blocks(f)
        .iter()
        .map(|b| mixed_lebesgue(b, q, zeta))
        .collect();
    let weighted = blocks.iter().enumerate().map(|(i, b)| {
        let j = i as i32 - 1;
        let w = if j < 0 { 1.0 } else { 2f64.powf(j as f64 * s) };
        w * b
    });
    let value = if p.is_infinite() {
        weighted.fold(0.0, f64::max)
    } else {
        weighted.map(|v| v.powf(p)).sum::<f64>().powf(1.0 / p)
    };
    Ok(NormReport {
        value,
        method: NormMethod::LittlewoodPaley,
        block_values: Some(blocks),
    })
}

fn torus_distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    let mut d2 = 0.0;
    for i in 0..3 {
        let d = (a[i] - b[i]).abs();
        let d = d.min(1.0 - d);
        d2 += d * d;
    }
    d2.sqrt()
}

/// Sampled `C^gamma` norm `sup|f| + max |f(x) - f(x')| / dist(x, x')^gamma`.
///
/// Differences are Euclidean over all components, so a field whose components
/// are the members of a family gives the `C^gamma(l^2)` norm. Pairs scanned:
/// every one-cell axis neighbour plus `10 * len` random pairs drawn from
/// `seed`. The result is a lower bound for the true norm.
pub fn holder_norm(f: &RealField, gamma: f64, seed: u64) -> Result<NormReport> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Parameter(format!(
            "gamma = {gamma} must lie in (0, 1)"
        )));
    }
    let g = f.grid();
    let n = g.len();
    let comps = f.components();
    let vals = f.values();
    let diff = |i: usize, j: usize| -> f64 {
        let mut s = 0.0;
        for c in 0..comps {
            let d = vals[c * n + i] - vals[c * n + j];
            s += d * d;
        }
        s.sqrt()
    };
    let ratio = |i: usize, j: usize| -> f64 {
        let d = torus_distance(g.coords(i), g.coords(j));
        diff(i, j) / d.powf(gamma)
    };

    let mut semi = 0.0f64;
    for i in 0..n {
        let [ix, iy, iz] = g.unflat(i);
        let neighbours = [
            (g.nx() > 1).then(|| g.flat((ix + 1) % g.nx(), iy, iz)),
            (g.ny() > 1).then(|| g.flat(ix, (iy + 1) % g.ny(), iz)),
            (g.nz() > 1).then(|| g.flat(ix, iy, (iz + 1) % g.nz())),
        ];
        for j in neighbours.into_iter().flatten() {
            semi = semi.max(ratio(i, j));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..10 * n {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if i != j {
            semi = semi.max(ratio(i, j));
        }
    }
    let sup = f.magnitude().max_abs();
    Ok(NormReport {
        value: sup + semi,
        method: NormMethod::SampledDifferences,
        block_values: None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingReport {
    pub admissible: bool,
    pub max_ratio: f64,
}

const INDEX_EPS: f64 = 1e-12;

/// Index conditions for `B^{s0}_{(q0,q0,zeta0),p0} -> B^{s1}_{(q1,q1,zeta1),p1}`:
/// `s0 >= s1`, integrability not decreasing in any direction, `p1 >= p0`, and
/// `s0 - sum 1/q0_i >= s1 - sum 1/q1_i`.
pub fn embedding_admissible(source: &SpaceParams, target: &SpaceParams) -> bool {
    let sob = |sp: &SpaceParams| sp.s - 2.0 / sp.q - 1.0 / sp.zeta;
    source.s >= target.s - INDEX_EPS
        && source.q <= target.q + INDEX_EPS
        && source.zeta <= target.zeta + INDEX_EPS
        && target.p >= source.p - INDEX_EPS
        && sob(source) >= sob(target) - INDEX_EPS
}

/// Real field with coefficients drawn uniformly and truncated to `|k_i| <= band`.
pub fn random_band_limited(grid: GridSpec, components: usize, band: usize, seed: u64) -> RealField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..components * grid.len())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let f = RealField::from_values(grid, components, values).expect("shape is consistent");
    let band = band as i64;
    f.to_spectral()
        .apply(|k| {
            let keep = k.iter().all(|c| c.abs() <= band);
            Complex64::new(if keep { 1.0 } else { 0.0 }, 0.0)
        })
        .to_physical_unchecked()
}

/// Checks the index conditions and scans `trials` random band-limited scalar
/// fields on `grid` for the largest target/source norm ratio. Band limits
/// cycle through `1 ..= nyquist/2`.
pub fn verify_embedding(
    source: &SpaceParams,
    target: &SpaceParams,
    trials: usize,
    grid: GridSpec,
    seed: u64,
) -> Result<EmbeddingReport> {
    if trials == 0 {
        return Err(Error::Parameter("trials must be at least 1".into()));
    }
    let admissible = embedding_admissible(source, target);
    let top = (grid.nx().min(grid.ny()) / 4).max(1);
    let mut max_ratio = 0.0f64;
    for t in 0..trials {
        let band = 1 + t % top;
        let f = random_band_limited(grid, 1, band, seed.wrapping_add(t as u64));
        let num = besov_norm(&f, target.s, target.q, target.zeta, target.p)?.value;
        let den = besov_norm(&f, source.s, source.q, source.zeta, source.p)?.value;
        max_ratio = max_ratio.max(num / den);
    }
    Ok(EmbeddingReport {
        admissible,
        max_ratio,
    })
}
