//! Fourier grids on the unit torus and the multiplier operators built on them.
//!
//! Fields are stored component-major, then x, y and z fastest. The forward
//! transform divides by `nx*ny*nz`, so the zero mode of a spectral field is
//! the spatial mean of the physical field and Parseval reads
//! `mean(|f|^2) = sum_k |c_k|^2`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::fft3;

/// Tolerance on Hermitian symmetry accepted by [`SpectralField::to_physical`].
pub const HERMITIAN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

/// Grid on `[0,1)^3`. A planar grid (`nz == 1`) stands for the horizontal
/// torus and carries only the `kz = 0` slab.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridSpec {
    nx: usize,
    ny: usize,
    nz: usize,
}

fn check_axis(name: &str, n: usize) -> Result<()> {
    if n < 4 || !n.is_multiple_of(2) {
        return Err(Error::Grid(format!(
            "{name} = {n}: every axis needs at least 4 points and an even count"
        )));
    }
    Ok(())
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Result<Self> {
        check_axis("nx", nx)?;
        check_axis("ny", ny)?;
        check_axis("nz", nz)?;
        Ok(Self { nx, ny, nz })
    }

    pub fn cube(n: usize) -> Result<Self> {
        Self::new(n, n, n)
    }

    /// Horizontal torus `T^2`, represented with a single z level.
    pub fn planar(nx: usize, ny: usize) -> Result<Self> {
        check_axis("nx", nx)?;
        check_axis("ny", ny)?;
        Ok(Self { nx, ny, nz: 1 })
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn nz(&self) -> usize {
        self.nz
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    pub fn is_planar(&self) -> bool {
        self.nz == 1
    }

    /// The horizontal grid underlying this one.
    pub fn horizontal(&self) -> GridSpec {
        GridSpec {
            nx: self.nx,
            ny: self.ny,
            nz: 1,
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn n(&self, axis: Axis) -> usize {
        self.dims()[axis.index()]
    }

    /// Largest resolved wavenumber on `axis`.
    pub fn nyquist(&self, axis: Axis) -> usize {
        self.n(axis) / 2
    }

    #[inline]
    pub fn flat(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (ix * self.ny + iy) * self.nz + iz
    }

    #[inline]
    pub fn unflat(&self, i: usize) -> [usize; 3] {
        let iz = i % self.nz;
        let iy = (i / self.nz) % self.ny;
        let ix = i / (self.nz * self.ny);
        [ix, iy, iz]
    }

    /// Signed wavenumber of storage index `i` on an axis of length `n`;
    /// range `-n/2+1 ..= n/2`.
    #[inline]
    pub fn wavenumber_of(i: usize, n: usize) -> i64 {
        if i <= n / 2 {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    #[inline]
    pub fn wavevector(&self, i: usize) -> [i64; 3] {
        let [ix, iy, iz] = self.unflat(i);
        [
            Self::wavenumber_of(ix, self.nx),
            Self::wavenumber_of(iy, self.ny),
            Self::wavenumber_of(iz, self.nz),
        ]
    }

    /// Storage index of signed wavenumber `k` on an axis of length `n`.
    #[inline]
    pub fn index_of(k: i64, n: usize) -> usize {
        k.rem_euclid(n as i64) as usize
    }

    /// Storage index of the wavevector `-k` for flat index `i`.
    #[inline]
    pub fn mirror(&self, i: usize) -> usize {
        let [ix, iy, iz] = self.unflat(i);
        self.flat(
            (self.nx - ix) % self.nx,
            (self.ny - iy) % self.ny,
            (self.nz - iz) % self.nz,
        )
    }

    #[inline]
    pub fn coords(&self, i: usize) -> [f64; 3] {
        let [ix, iy, iz] = self.unflat(i);
        [
            ix as f64 / self.nx as f64,
            iy as f64 / self.ny as f64,
            iz as f64 / self.nz as f64,
        ]
    }

    /// Whether index `i` sits on the Nyquist plane of `axis`.
    #[inline]
    pub fn on_nyquist(&self, i: usize, axis: Axis) -> bool {
        let n = self.n(axis);
        n > 1 && self.unflat(i)[axis.index()] == n / 2
    }
}

/// Sampled real field with `components` values per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct RealField {
    grid: GridSpec,
    components: usize,
    values: Vec<f64>,
}

impl RealField {
    pub fn zeros(grid: GridSpec, components: usize) -> Self {
        assert!(components > 0, "a field needs at least one component");
        Self {
            grid,
            components,
            values: vec![0.0; components * grid.len()],
        }
    }

    pub fn from_values(grid: GridSpec, components: usize, values: Vec<f64>) -> Result<Self> {
        if components == 0 || values.len() != components * grid.len() {
            return Err(Error::Shape(format!(
                "{} values for {} components on a {:?} grid",
                values.len(),
                components,
                grid.dims()
            )));
        }
        Ok(Self {
            grid,
            components,
            values,
        })
    }

    /// Samples `f(component, [x, y, z])` at every grid point.
    pub fn from_fn(grid: GridSpec, components: usize, f: impl Fn(usize, [f64; 3]) -> f64) -> Self {
        let n = grid.len();
        let mut values = Vec::with_capacity(components * n);
        for c in 0..components {
            for i in 0..n {
                values.push(f(c, grid.coords(i)));
            }
        }
        Self {
            grid,
            components,
            values,
        }
    }

    pub fn from_components(parts: &[RealField]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Shape("no components given".into()))?;
        let grid = first.grid;
        let mut values = Vec::new();
        let mut components = 0;
        for p in parts {
            if p.grid != grid {
                return Err(Error::Shape("components live on different grids".into()));
            }
            values.extend_from_slice(&p.values);
            components += p.components;
        }
        Ok(Self {
            grid,
            components,
            values,
        })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let n = self.grid.len();
        &self.values[c * n..(c + 1) * n]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.grid.len();
        &mut self.values[c * n..(c + 1) * n]
    }

    pub fn component_field(&self, c: usize) -> RealField {
        RealField {
            grid: self.grid,
            components: 1,
            values: self.component(c).to_vec(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    fn check_same(&self, other: &RealField) {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        assert_eq!(
            self.components, other.components,
            "fields have different component counts"
        );
    }

    pub fn scale(&self, a: f64) -> RealField {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= a);
        out
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: f64, other: &RealField) {
        self.check_same(other);
        for (s, o) in self.values.iter_mut().zip(&other.values) {
            *s += a * o;
        }
    }

    pub fn add(&self, other: &RealField) -> RealField {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn sub(&self, other: &RealField) -> RealField {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Multiplies every component pointwise by the scalar field `s`.
    pub fn mul_scalar_field(&self, s: &RealField) -> RealField {
        assert_eq!(self.grid, s.grid);
        assert_eq!(s.components, 1, "multiplier must be scalar");
        let n = self.grid.len();
        let mut out = self.clone();
        for c in 0..self.components {
            for (v, m) in out.values[c * n..(c + 1) * n].iter_mut().zip(&s.values) {
                *v *= m;
            }
        }
        out
    }

    /// L^2 inner product on the unit torus, summed over components.
    pub fn inner(&self, other: &RealField) -> f64 {
        self.check_same(other);
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum();
        s / self.grid.len() as f64
    }

    /// `||f||_{L^2}^2` on the unit torus.
    pub fn norm_sq(&self) -> f64 {
        self.inner(self)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Pointwise Euclidean magnitude over components.
    pub fn magnitude(&self) -> RealField {
        let n = self.grid.len();
        let mut out = vec![0.0; n];
        for c in 0..self.components {
            for (o, v) in out.iter_mut().zip(self.component(c)) {
                *o += v * v;
            }
        }
        out.iter_mut().for_each(|o| *o = o.sqrt());
        RealField {
            grid: self.grid,
            components: 1,
            values: out,
        }
    }

    pub fn to_spectral(&self) -> SpectralField {
        let n = self.grid.len();
        let norm = 1.0 / n as f64;
        let mut coeffs: Vec<Complex64> = self
            .values
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        for block in coeffs.chunks_mut(n) {
            fft3(block, self.grid.dims(), false);
            block.iter_mut().for_each(|c| *c *= norm);
        }
        SpectralField {
            grid: self.grid,
            components: self.components,
            coeffs,
        }
    }
}

/// Fourier coefficients of a (usually real) field.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: GridSpec,
    components: usize,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: GridSpec, components: usize) -> Self {
        Self {
            grid,
            components,
            coeffs: vec![Complex64::default(); components * grid.len()],
        }
    }

    pub fn from_coeffs(grid: GridSpec, components: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if components == 0 || coeffs.len() != components * grid.len() {
            return Err(Error::Shape(format!(
                "{} coefficients for {} components on a {:?} grid",
                coeffs.len(),
                components,
                grid.dims()
            )));
        }
        Ok(Self {
            grid,
            components,
            coeffs,
        })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        let n = self.grid.len();
        &self.coeffs[c * n..(c + 1) * n]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [Complex64] {
        let n = self.grid.len();
        &mut self.coeffs[c * n..(c + 1) * n]
    }

    /// Coefficient of component `c` at signed wavevector `k`.
    pub fn get(&self, c: usize, k: [i64; 3]) -> Complex64 {
        self.coeffs[self.slot(c, k)]
    }

    pub fn set(&mut self, c: usize, k: [i64; 3], value: Complex64) {
        let s = self.slot(c, k);
        self.coeffs[s] = value;
    }

    fn slot(&self, c: usize, k: [i64; 3]) -> usize {
        let g = self.grid;
        c * g.len()
            + g.flat(
                GridSpec::index_of(k[0], g.nx()),
                GridSpec::index_of(k[1], g.ny()),
                GridSpec::index_of(k[2], g.nz()),
            )
    }

    /// Largest `|c(-k) - conj(c(k))|` relative to `max(1, max |c|)`.
    pub fn hermitian_violation(&self) -> f64 {
        let n = self.grid.len();
        let scale = self.coeffs.iter().fold(1.0f64, |m, c| m.max(c.norm()));
        let mut worst = 0.0f64;
        for block in self.coeffs.chunks(n) {
            for (i, c) in block.iter().enumerate() {
                let m = block[self.grid.mirror(i)];
                worst = worst.max((m - c.conj()).norm());
            }
        }
        worst / scale
    }

    /// Inverse transform. Rejects coefficient sets that do not describe a
    /// real field.
    pub fn to_physical(&self) -> Result<RealField> {
        let violation = self.hermitian_violation();
        if violation > HERMITIAN_TOL {
            return Err(Error::NotHermitian { violation });
        }
        Ok(self.to_physical_unchecked())
    }

    /// Inverse transform keeping the real part, for coefficients produced by
    /// operators that preserve Hermitian symmetry.
    pub fn to_physical_unchecked(&self) -> RealField {
        let n = self.grid.len();
        let mut work = self.coeffs.clone();
        for block in work.chunks_mut(n) {
            fft3(block, self.grid.dims(), true);
        }
        RealField {
            grid: self.grid,
            components: self.components,
            values: work.into_iter().map(|c| c.re).collect(),
        }
    }

    /// Multiplies each coefficient by `m(k)`, the same for every component.
    pub fn apply<F: Fn([i64; 3]) -> Complex64>(&self, m: F) -> SpectralField {
        let n = self.grid.len();
        let mut out = self.clone();
        for i in 0..n {
            let f = m(self.grid.wavevector(i));
            for c in 0..self.components {
                out.coeffs[c * n + i] *= f;
            }
        }
        out
    }

    /// Spectral derivative along `axis`; the Nyquist plane of that axis is
    /// zeroed so derivatives of real fields stay real.
    pub fn differentiate(&self, axis: Axis) -> SpectralField {
        let g = self.grid;
        let n = g.len();
        let a = axis.index();
        let mut out = self.clone();
        for i in 0..n {
            let f = if g.on_nyquist(i, axis) {
                Complex64::default()
            } else {
                Complex64::new(0.0, 2.0 * PI * g.wavevector(i)[a] as f64)
            };
            for c in 0..self.components {
                out.coeffs[c * n + i] *= f;
            }
        }
        out
    }

    /// Bessel potential `(1 - Delta)^{s/2}`.
    pub fn bessel_multiplier(&self, s: f64) -> SpectralField {
        self.apply(|k| {
            let k2 = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64;
            Complex64::new((1.0 + 4.0 * PI * PI * k2).powf(s / 2.0), 0.0)
        })
    }

    /// Two-thirds truncation: zero every mode with `3|k_i| > n_i` on some axis.
    pub fn dealias(&self) -> SpectralField {
        let g = self.grid;
        let dims = g.dims();
        self.apply(|k| {
            let keep = (0..3).all(|a| 3 * k[a].unsigned_abs() as usize <= dims[a]);
            Complex64::new(if keep { 1.0 } else { 0.0 }, 0.0)
        })
    }

    /// `sum_k |c_k|^2` over all components.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn axpy(&mut self, a: f64, other: &SpectralField) {
        assert_eq!(self.grid, other.grid);
        assert_eq!(self.components, other.components);
        for (s, o) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *s += o * a;
        }
    }

    pub fn component_field(&self, c: usize) -> SpectralField {
        SpectralField {
            grid: self.grid,
            components: 1,
            coeffs: self.component(c).to_vec(),
        }
    }

    pub fn from_components(parts: &[SpectralField]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Shape("no components given".into()))?;
        let mut coeffs = Vec::new();
        let mut components = 0;
        for p in parts {
            if p.grid != first.grid {
                return Err(Error::Shape("components live on different grids".into()));
            }
            coeffs.extend_from_slice(&p.coeffs);
            components += p.components;
        }
        Ok(Self {
            grid: first.grid,
            components,
            coeffs,
        })
    }
}

/// Dealiased pointwise product of `a` (any components) with scalar `s`.
pub fn dealiased_product(a: &RealField, s: &RealField) -> RealField {
    a.mul_scalar_field(s)
        .to_spectral()
        .dealias()
        .to_physical_unchecked()
}

/// Spectral partial derivatives `[d/dx, d/dy, d/dz]` of every component.
pub fn gradient(f: &RealField) -> [RealField; 3] {
    let s = f.to_spectral();
    Axis::ALL.map(|a| s.differentiate(a).to_physical_unchecked())
}

/// `sum_j s_j g_j` where `g = gradient(f)` and `s` has three components.
/// Products are pointwise (not dealiased).
pub fn transport_with(s: &RealField, grad: &[RealField; 3]) -> RealField {
    assert_eq!(s.components(), 3);
    let mut out = RealField::zeros(grad[0].grid(), grad[0].components());
    for (j, g) in grad.iter().enumerate() {
        let sj = s.component_field(j);
        if sj.values().iter().all(|v| *v == 0.0) {
            continue;
        }
        out.axpy(1.0, &g.mul_scalar_field(&sj));
    }
    out
}

/// `(s . grad) f`
pub fn transport(s: &RealField, f: &RealField) -> RealField {
    transport_with(s, &gradient(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(grid: GridSpec, comps: usize, seed: u64) -> RealField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..comps * grid.len())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        RealField::from_values(grid, comps, values).unwrap()
    }

    fn rel_diff(a: &RealField, b: &RealField) -> f64 {
        a.sub(b).max_abs() / b.max_abs().max(1e-300)
    }

    #[test]
    fn grid_rejects_small_or_odd_axes() {
        assert!(GridSpec::new(4, 4, 4).is_ok());
        assert!(GridSpec::new(2, 4, 4).is_err());
        assert!(GridSpec::new(4, 5, 4).is_err());
        assert!(GridSpec::planar(8, 6).unwrap().is_planar());
    }

    #[test]
    fn wavenumber_range() {
        let ks: Vec<i64> = (0..8).map(|i| GridSpec::wavenumber_of(i, 8)).collect();
        assert_eq!(ks, vec![0, 1, 2, 3, 4, -3, -2, -1]);
    }

    #[test]
    fn constant_maps_to_unit_zero_mode() {
        let g = GridSpec::cube(8).unwrap();
        let c = RealField::from_fn(g, 1, |_, _| 1.0).to_spectral();
        assert!((c.get(0, [0, 0, 0]) - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        let rest: f64 = c.coeffs().iter().skip(1).map(|z| z.norm()).sum();
        assert!(rest < 1e-13);
    }

    #[test]
    fn cosine_splits_into_two_halves() {
        let g = GridSpec::cube(8).unwrap();
        let c = RealField::from_fn(g, 1, |_, x| (2.0 * PI * x[0]).cos()).to_spectral();
        assert!((c.get(0, [1, 0, 0]).re - 0.5).abs() < 1e-14);
        assert!((c.get(0, [-1, 0, 0]).re - 0.5).abs() < 1e-14);
        assert!((c.energy() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn matches_brute_force_dft_on_4_cubed() {
        let g = GridSpec::cube(4).unwrap();
        let f = random_field(g, 1, 7);
        let c = f.to_spectral();
        let n = g.len();
        for j in 0..n {
            let k = g.wavevector(j);
            let mut acc = Complex64::default();
            for i in 0..n {
                let x = g.coords(i);
                let phase =
                    -2.0 * PI * (k[0] as f64 * x[0] + k[1] as f64 * x[1] + k[2] as f64 * x[2]);
                acc += Complex64::from_polar(f.values()[i], phase);
            }
            acc /= n as f64;
            assert!((acc - c.component(0)[j]).norm() < 1e-12, "mode {k:?}");
        }
    }

    #[test]
    fn zero_mode_only_gives_constant() {
        let g = GridSpec::cube(4).unwrap();
        let mut c = SpectralField::zeros(g, 1);
        c.set(0, [0, 0, 0], Complex64::new(2.5, 0.0));
        let f = c.to_physical().unwrap();
        assert!(f.values().iter().all(|v| (v - 2.5).abs() < 1e-14));
    }

    #[test]
    fn round_trip_identity() {
        let g = GridSpec::cube(8).unwrap();
        let f = random_field(g, 2, 3);
        let back = f.to_spectral().to_physical().unwrap();
        assert!(rel_diff(&back, &f) < 1e-12);
    }

    #[test]
    fn asymmetric_coefficients_rejected() {
        let g = GridSpec::cube(4).unwrap();
        let mut c = SpectralField::zeros(g, 1);
        c.set(0, [1, 0, 0], Complex64::new(1.0, 0.0));
        assert!(matches!(c.to_physical(), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn derivative_of_sine() {
        let g = GridSpec::cube(8).unwrap();
        let f = RealField::from_fn(g, 1, |_, x| (2.0 * PI * x[0]).sin());
        let d = f
            .to_spectral()
            .differentiate(Axis::X)
            .to_physical()
            .unwrap();
        let expect = RealField::from_fn(g, 1, |_, x| 2.0 * PI * (2.0 * PI * x[0]).cos());
        assert!(d.sub(&expect).max_abs() < 1e-12);
    }

    #[test]
    fn z_derivative_of_z_independent_field_vanishes() {
        let g = GridSpec::cube(8).unwrap();
        let f = RealField::from_fn(g, 1, |_, x| (2.0 * PI * (x[0] + 2.0 * x[1])).cos());
        let d = f
            .to_spectral()
            .differentiate(Axis::Z)
            .to_physical()
            .unwrap();
        assert!(d.max_abs() < 1e-13);
    }

    #[test]
    fn mixed_derivatives_commute_and_match_finite_differences() {
        let g = GridSpec::cube(8).unwrap();
        let f = random_field(g, 1, 11).to_spectral().dealias();
        let xy = f
            .differentiate(Axis::X)
            .differentiate(Axis::Y)
            .to_physical()
            .unwrap();
        let yx = f
            .differentiate(Axis::Y)
            .differentiate(Axis::X)
            .to_physical()
            .unwrap();
        assert!(xy.sub(&yx).max_abs() <= 1e-12 * xy.max_abs());

        // smooth field sampled on a fine grid against a centered difference
        let fine = GridSpec::cube(64).unwrap();
        let s = |x: [f64; 3]| (2.0 * PI * (x[0] + x[1])).sin() * (2.0 * PI * x[2]).cos();
        let sf = RealField::from_fn(fine, 1, |_, x| s(x));
        let spec = sf
            .to_spectral()
            .differentiate(Axis::X)
            .differentiate(Axis::Y)
            .to_physical()
            .unwrap();
        let h = 1e-4;
        for i in (0..fine.len()).step_by(97) {
            let x = fine.coords(i);
            let fd = (s([x[0] + h, x[1] + h, x[2]])
                - s([x[0] + h, x[1] - h, x[2]])
                - s([x[0] - h, x[1] + h, x[2]])
                + s([x[0] - h, x[1] - h, x[2]]))
                / (4.0 * h * h);
            assert!((fd - spec.values()[i]).abs() < 1e-4 * 4.0 * PI * PI);
        }
    }

    #[test]
    fn bessel_multiplier_cases() {
        let g = GridSpec::cube(8).unwrap();
        let f = RealField::from_fn(g, 1, |_, x| (2.0 * PI * x[0]).cos());
        let c = f.to_spectral();
        assert_eq!(c.bessel_multiplier(0.0), c);
        let two = c.bessel_multiplier(2.0).to_physical().unwrap();
        assert!(two.sub(&f.scale(1.0 + 4.0 * PI * PI)).max_abs() < 1e-12);
        let one = RealField::from_fn(g, 1, |_, _| 3.0).to_spectral();
        let m = one.bessel_multiplier(1.7).to_physical().unwrap();
        assert!(m.values().iter().all(|v| (v - 3.0).abs() < 1e-14));
    }

    #[test]
    fn bessel_inverse_pair() {
        let g = GridSpec::cube(8).unwrap();
        let f = random_field(g, 1, 5);
        let back = f
            .to_spectral()
            .bessel_multiplier(1.3)
            .bessel_multiplier(-1.3)
            .to_physical()
            .unwrap();
        assert!(rel_diff(&back, &f) < 1e-11);
    }

    #[test]
    fn dealias_keeps_band_limited_and_is_idempotent() {
        let g = GridSpec::cube(8).unwrap();
        let f = RealField::from_fn(g, 1, |_, x| {
            (2.0 * PI * x[0]).cos() + (2.0 * PI * x[2]).sin()
        });
        let c = f.to_spectral();
        let mut diff = c.dealias();
        diff.axpy(-1.0, &c);
        assert!(diff.energy() < 1e-28);
        let r = random_field(g, 1, 9).to_spectral();
        assert_eq!(r.dealias().dealias(), r.dealias());
    }

    #[test]
    fn dealiased_product_equals_truncated_convolution() {
        let g = GridSpec::cube(8).unwrap();
        let a = random_field(g, 1, 21).to_spectral().dealias();
        let b = random_field(g, 1, 22).to_spectral().dealias();
        let prod =
            dealiased_product(&a.to_physical().unwrap(), &b.to_physical().unwrap()).to_spectral();
        // direct convolution over the retained band |k_i| <= 2
        let band: Vec<[i64; 3]> = (0..g.len())
            .map(|i| g.wavevector(i))
            .filter(|k| k.iter().all(|c| 3 * c.unsigned_abs() <= 8))
            .collect();
        for k in &band {
            let mut acc = Complex64::default();
            for p in &band {
                let q = [k[0] - p[0], k[1] - p[1], k[2] - p[2]];
                if q.iter().all(|c| 3 * c.unsigned_abs() <= 8) {
                    acc += a.get(0, *p) * b.get(0, q);
                }
            }
            assert!((acc - prod.get(0, *k)).norm() < 1e-12, "mode {k:?}");
        }
    }

    #[test]
    fn parseval() {
        let g = GridSpec::new(8, 4, 6).unwrap();
        let f = random_field(g, 2, 1);
        let e = f.to_spectral().energy();
        assert!((e - f.norm_sq()).abs() <= 1e-12 * e);
    }

    #[test]
    fn planar_grid_transforms() {
        let g = GridSpec::planar(8, 8).unwrap();
        let f = RealField::from_fn(g, 1, |_, x| (2.0 * PI * x[1]).cos());
        let c = f.to_spectral();
        assert!((c.get(0, [0, 1, 0]).re - 0.5).abs() < 1e-14);
        assert!(rel_diff(&c.to_physical().unwrap(), &f) < 1e-12);
    }
}
