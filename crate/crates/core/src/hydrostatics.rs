//! Hydrostatic structure of the primitive equations: the planar Helmholtz
//! decomposition, the hydrostatic projection `P = Id - Q`, the diagnostic
//! vertical velocity, and the barotropic/baroclinic split.
//!
//! `Q v` is the horizontal gradient part of the vertical average of `v`; on
//! Fourier coefficients it acts only on the `kz = 0` slab as
//! `k_h k_h^T / |k_h|^2`. A Nyquist component of `k_h` has no discrete
//! derivative and is replaced by zero, so `div_h P v` vanishes exactly for
//! the spectral divergence.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{transport, Axis, GridSpec, RealField, SpectralField};

/// Barotropic divergence above this L^2 norm marks a velocity inadmissible.
pub const ADMISSIBILITY_TOL: f64 = 1e-8;

fn check_horizontal(v: &RealField) {
    assert_eq!(v.components(), 2, "horizontal velocity has two components");
}

/// Applies `k_h k_h^T / |k_h|^2`, on the `kz = 0` slab only if requested.
fn gradient_part(s: &SpectralField, only_zero_slab: bool) -> SpectralField {
    let g = s.grid();
    let n = g.len();
    let (nyx, nyy) = ((g.nx() / 2) as i64, (g.ny() / 2) as i64);
    let mut out = SpectralField::zeros(g, 2);
    let (src, dst) = (s.coeffs(), out.coeffs_mut());
    for i in 0..n {
        let mut k = g.wavevector(i);
        if only_zero_slab && k[2] != 0 {
            continue;
        }
        if k[0] == nyx {
            k[0] = 0;
        }
        if k[1] == nyy {
            k[1] = 0;
        }
        let k2 = (k[0] * k[0] + k[1] * k[1]) as f64;
        if k2 == 0.0 {
            continue;
        }
        let (kx, ky) = (k[0] as f64, k[1] as f64);
        let dot = src[i] * kx + src[n + i] * ky;
        dst[i] = dot * (kx / k2);
        dst[n + i] = dot * (ky / k2);
    }
    out
}

/// Planar Helmholtz decomposition `f = div_free + gradient`, applied to every
/// vertical wavenumber independently.
pub fn helmholtz_2d(f: &RealField) -> (RealField, RealField) {
    check_horizontal(f);
    let grad = gradient_part(&f.to_spectral(), false).to_physical_unchecked();
    (f.sub(&grad), grad)
}

/// `Q v`, z-independent.
pub fn hydrostatic_q(v: &RealField) -> RealField {
    check_horizontal(v);
    gradient_part(&v.to_spectral(), true).to_physical_unchecked()
}

/// `P v = v - Q v`
pub fn hydrostatic_project(v: &RealField) -> RealField {
    v.sub(&hydrostatic_q(v))
}

/// Spectral `P` for callers already holding coefficients.
pub fn hydrostatic_project_spectral(s: &SpectralField) -> SpectralField {
    let mut out = s.clone();
    out.axpy(-1.0, &gradient_part(s, true));
    out
}

/// Spectral horizontal divergence `d_x v_x + d_y v_y`.
pub fn horizontal_divergence(s: &SpectralField) -> SpectralField {
    let mut d = s.component_field(0).differentiate(Axis::X);
    d.axpy(1.0, &s.component_field(1).differentiate(Axis::Y));
    d
}

/// L^2 norm of the horizontal divergence of the vertical average of `v`.
pub fn barotropic_divergence(v: &RealField) -> f64 {
    check_horizontal(v);
    let d = horizontal_divergence(&v.to_spectral());
    let g = v.grid();
    d.coeffs()
        .iter()
        .enumerate()
        .filter(|(i, _)| g.wavevector(*i)[2] == 0)
        .map(|(_, c)| c.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

pub fn is_admissible(v: &RealField) -> bool {
    barotropic_divergence(v) <= ADMISSIBILITY_TOL
}

pub fn require_admissible(v: &RealField) -> Result<()> {
    let residual = barotropic_divergence(v);
    if residual > ADMISSIBILITY_TOL {
        return Err(Error::Inadmissible { residual });
    }
    Ok(())
}

/// `w(v) = -int_0^z div_h v dz'`, computed spectrally. Content of `div_h v`
/// on the vertical Nyquist plane has no antiderivative on the grid and is
/// discarded.
pub fn vertical_velocity(v: &RealField) -> Result<RealField> {
    require_admissible(v)?;
    Ok(vertical_velocity_unchecked(&v.to_spectral()))
}

pub(crate) fn vertical_velocity_unchecked(vs: &SpectralField) -> RealField {
    let g = vs.grid();
    let div = horizontal_divergence(vs);
    let mut w = SpectralField::zeros(g, 1);
    let nz = g.nz();
    let nyq = (nz / 2) as i64;
    let dc = div.coeffs();
    let wc = w.coeffs_mut();
    for i in 0..g.len() {
        let kz = g.wavevector(i)[2];
        if kz == 0 || (nz > 1 && kz == nyq) {
            continue;
        }
        let a = dc[i] / Complex64::new(0.0, 2.0 * PI * kz as f64);
        wc[i] = -a;
        // boundary term so that w vanishes at z = 0
        let [ix, iy, _] = g.unflat(i);
        wc[g.flat(ix, iy, 0)] += a;
    }
    w.to_physical_unchecked()
}

/// Vertical average over the z direction as a field on the planar grid.
pub fn vertical_mean(v: &RealField) -> RealField {
    let g = v.grid();
    let h = g.horizontal();
    let nz = g.nz();
    let n = g.len();
    let nh = h.len();
    let mut out = RealField::zeros(h, v.components());
    let vals = out.values_mut();
    for c in 0..v.components() {
        let src = v.component(c);
        for col in 0..nh {
            let s: f64 = src[col * nz..(col + 1) * nz].iter().sum();
            vals[c * nh + col] = s / nz as f64;
        }
    }
    debug_assert_eq!(n, nh * nz);
    out
}

/// Repeats a planar field along z.
pub fn broadcast_z(f: &RealField, grid: GridSpec) -> RealField {
    let h = f.grid();
    assert_eq!(h, grid.horizontal());
    let nz = grid.nz();
    let nh = h.len();
    let mut out = RealField::zeros(grid, f.components());
    let n = grid.len();
    let vals = out.values_mut();
    for c in 0..f.components() {
        let src = f.component(c);
        for col in 0..nh {
            vals[c * n + col * nz..c * n + (col + 1) * nz].fill(src[col]);
        }
    }
    out
}

/// `(vbar, vtilde)` with `vbar` the vertical average on the planar grid and
/// `vtilde = v - vbar`.
pub fn barotropic_split(v: &RealField) -> (RealField, RealField) {
    let vbar = vertical_mean(v);
    let vtilde = v.sub(&broadcast_z(&vbar, v.grid()));
    (vbar, vtilde)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PressureBundle {
    /// `Q[drift]`
    pub grad_p: RealField,
    /// `Q[(sigma_n . grad) v]`, one per noise field.
    pub grad_ptilde: Vec<RealField>,
}

/// Pressure gradients from an admissible velocity, noise fields
/// (3 components each) and the assembled deterministic drift.
pub fn recover_pressures(
    v: &RealField,
    sigmas: &[RealField],
    drift: &RealField,
) -> Result<PressureBundle> {
    require_admissible(v)?;
    let grad_ptilde = sigmas
        .iter()
        .map(|s| hydrostatic_q(&transport(s, v)))
        .collect();
    Ok(PressureBundle {
        grad_p: hydrostatic_q(drift),
        grad_ptilde,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::random_band_limited;

    fn g16() -> GridSpec {
        GridSpec::cube(16).unwrap()
    }

    fn rel(a: &RealField, b: &RealField) -> f64 {
        a.sub(b).norm_sq().sqrt()
    }

    fn curl_h(f: &RealField) -> f64 {
        let s = f.to_spectral();
        let mut c = s.component_field(1).differentiate(Axis::X);
        c.axpy(-1.0, &s.component_field(0).differentiate(Axis::Y));
        c.energy().sqrt()
    }

    #[test]
    fn helmholtz_of_gradient_and_rotational() {
        let g = GridSpec::planar(16, 16).unwrap();
        let tp = 2.0 * PI;
        let grad = RealField::from_fn(g, 2, |_, x| tp * (tp * (x[0] + x[1])).cos());
        let (df, gr) = helmholtz_2d(&grad);
        assert!(df.max_abs() < 1e-12);
        assert!(rel(&gr, &grad) < 1e-12);
        // psi = sin(2 pi x) cos(4 pi y)
        let rot = RealField::from_fn(g, 2, |c, x| {
            if c == 0 {
                2.0 * tp * (tp * x[0]).sin() * (2.0 * tp * x[1]).sin()
            } else {
                tp * (tp * x[0]).cos() * (2.0 * tp * x[1]).cos()
            }
        });
        let (df, gr) = helmholtz_2d(&rot);
        assert!(gr.max_abs() < 1e-12);
        assert!(rel(&df, &rot) < 1e-12);
    }

    #[test]
    fn helmholtz_random_split() {
        let g = GridSpec::planar(16, 16).unwrap();
        let f = random_band_limited(g, 2, 7, 3);
        let (df, gr) = helmholtz_2d(&f);
        assert!(rel(&df.add(&gr), &f) < 1e-13);
        assert!(horizontal_divergence(&df.to_spectral()).energy().sqrt() < 1e-12);
        assert!(curl_h(&gr) < 1e-12);
    }

    #[test]
    fn projection_algebra() {
        for t in 0..10 {
            let v = random_band_limited(g16(), 2, 7, 10 + t);
            let p = hydrostatic_project(&v);
            let q = hydrostatic_q(&v);
            assert!(rel(&hydrostatic_project(&p), &p) < 1e-12);
            assert!(hydrostatic_project(&q).norm_sq().sqrt() < 1e-12);
            assert!(hydrostatic_q(&p).norm_sq().sqrt() < 1e-12);
            assert!(rel(&p.add(&q), &v) < 1e-13);
            assert!(barotropic_divergence(&p) < 1e-12);
            // Q output is z-independent
            assert!(q.to_spectral().differentiate(Axis::Z).energy() < 1e-28);
        }
    }

    #[test]
    fn projection_keeps_admissible_and_kills_barotropic_gradients() {
        let v = hydrostatic_project(&random_band_limited(g16(), 2, 5, 4));
        assert!(rel(&hydrostatic_project(&v), &v) < 1e-12);
        let tp = 2.0 * PI;
        let grad = RealField::from_fn(g16(), 2, |c, x| {
            let d = [
                (tp * x[0]).cos() * (tp * x[1]).cos(),
                -(tp * x[0]).sin() * (tp * x[1]).sin(),
            ];
            tp * d[c]
        });
        assert!(hydrostatic_project(&grad).max_abs() < 1e-12);
    }

    #[test]
    fn barotropic_part_of_projection_is_planar_div_free_part() {
        let v = random_band_limited(g16(), 2, 6, 8);
        let (pbar, _) = barotropic_split(&hydrostatic_project(&v));
        let (vbar, _) = barotropic_split(&v);
        let (df, _) = helmholtz_2d(&vbar);
        assert!(rel(&pbar, &df) < 1e-12);
    }

    #[test]
    fn vertical_velocity_closed_form() {
        let tp = 2.0 * PI;
        let v = RealField::from_fn(g16(), 2, |c, x| {
            if c == 0 {
                (tp * x[0]).sin() * (tp * x[2]).cos()
            } else {
                0.0
            }
        });
        let w = vertical_velocity(&v).unwrap();
        let exact = RealField::from_fn(g16(), 1, |_, x| -(tp * x[0]).cos() * (tp * x[2]).sin());
        assert!(w.sub(&exact).max_abs() < 1e-12);
    }

    #[test]
    fn vertical_velocity_residual_and_boundary() {
        let g = g16();
        for t in 0..5 {
            let v = hydrostatic_project(&random_band_limited(g, 2, 7, 40 + t));
            let w = vertical_velocity(&v).unwrap();
            let mut r = w.to_spectral().differentiate(Axis::Z);
            r.axpy(1.0, &horizontal_divergence(&v.to_spectral()));
            assert!(r.energy().sqrt() <= 1e-10);
            for ix in 0..g.nx() {
                for iy in 0..g.ny() {
                    assert!(w.values()[g.flat(ix, iy, 0)].abs() < 1e-12);
                }
            }
            // full incompressibility of (v, w)
            let mut div = horizontal_divergence(&v.to_spectral());
            div.axpy(1.0, &w.to_spectral().differentiate(Axis::Z));
            assert!(div.energy().sqrt() <= 1e-10);
        }
    }

    #[test]
    fn vertical_velocity_of_planar_div_free_is_zero() {
        let g = g16();
        let tp = 2.0 * PI;
        let v = RealField::from_fn(g, 2, |c, x| {
            let s = [(tp * x[1]).cos(), (tp * x[0]).sin()];
            s[c]
        });
        assert!(vertical_velocity(&v).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn vertical_velocity_rejects_inadmissible() {
        let tp = 2.0 * PI;
        let v = RealField::from_fn(
            g16(),
            2,
            |c, x| if c == 0 { (tp * x[0]).sin() } else { 0.0 },
        );
        match vertical_velocity(&v) {
            Err(Error::Inadmissible { residual }) => assert!(residual > 1.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn vertical_velocity_is_linear() {
        let g = g16();
        let a = hydrostatic_project(&random_band_limited(g, 2, 5, 1));
        let b = hydrostatic_project(&random_band_limited(g, 2, 5, 2));
        let lhs = vertical_velocity(&a.scale(2.0).add(&b)).unwrap();
        let rhs = vertical_velocity(&a)
            .unwrap()
            .scale(2.0)
            .add(&vertical_velocity(&b).unwrap());
        assert!(lhs.sub(&rhs).max_abs() < 1e-12);
    }

    #[test]
    fn barotropic_split_cases() {
        let g = g16();
        let v = random_band_limited(g, 2, 7, 5);
        let (vbar, vt) = barotropic_split(&v);
        assert!(rel(&broadcast_z(&vbar, g).add(&vt), &v) < 1e-13);
        assert!(vertical_mean(&vt).max_abs() < 1e-15);
        let flat = broadcast_z(&vbar, g);
        assert!(barotropic_split(&flat).1.max_abs() < 1e-15);
        let tp = 2.0 * PI;
        let baroclinic = RealField::from_fn(g, 2, |_, x| (tp * x[2]).cos() * (tp * x[0]).sin());
        assert!(barotropic_split(&baroclinic).0.max_abs() < 1e-15);
    }

    /// Direct O(N^2) planar DFT-based Poisson solve returning the gradient
    /// part of a planar 2-component field.
    fn dense_gradient_part(f: &[Vec<f64>; 2], n: usize) -> [Vec<f64>; 2] {
        let mut out = [vec![0.0; n * n], vec![0.0; n * n]];
        let wn = |i: usize| {
            if i <= n / 2 {
                i as f64
            } else {
                i as f64 - n as f64
            }
        };
        for kx in 0..n {
            for ky in 0..n {
                let (fx, fy) = (wn(kx), wn(ky));
                let k2 = fx * fx + fy * fy;
                if k2 == 0.0 {
                    continue;
                }
                let mut c = [Complex64::new(0.0, 0.0); 2];
                for ix in 0..n {
                    for iy in 0..n {
                        let ph = -2.0 * PI * (kx * ix + ky * iy) as f64 / n as f64;
                        let e = Complex64::from_polar(1.0, ph);
                        for comp in 0..2 {
                            c[comp] += e * f[comp][ix * n + iy];
                        }
                    }
                }
                // psi_hat = (i xi . f_hat) / (-|xi|^2), grad = i xi psi_hat
                let dot = c[0] * fx + c[1] * fy;
                let g = [dot * (fx / k2), dot * (fy / k2)];
                for ix in 0..n {
                    for iy in 0..n {
                        let ph = 2.0 * PI * (kx * ix + ky * iy) as f64 / n as f64;
                        let e = Complex64::from_polar(1.0, ph);
                        for comp in 0..2 {
                            out[comp][ix * n + iy] += (e * g[comp]).re / (n * n) as f64;
                        }
                    }
                }
            }
        }
        out
    }

    #[test]
    fn pressure_of_constant_transport_matches_dense_poisson() {
        let g = GridSpec::cube(8).unwrap();
        let tp = 2.0 * PI;
        let c = 0.7;
        // admissible: barotropic part (cos(2pi(x+y)), -cos(2pi(x+y)) + sin(2pi x)) is div-free
        let v = RealField::from_fn(g, 2, |comp, x| {
            let a = (tp * (x[0] + x[1])).cos();
            if comp == 0 {
                (tp * x[1]).sin() * (tp * x[2]).cos() + a
            } else {
                -a + (tp * x[0]).sin()
            }
        });
        assert!(is_admissible(&v));
        let sigma = RealField::from_fn(g, 3, |comp, _| if comp == 0 { c } else { 0.0 });
        let zero = RealField::zeros(g, 2);
        let bundle = recover_pressures(&v, &[sigma], &zero).unwrap();
        assert_eq!(bundle.grad_p.max_abs(), 0.0);
        assert_eq!(bundle.grad_ptilde.len(), 1);
        // closed-form c d_x v, z-averaged, then dense solve
        let n = 8;
        let mut fbar = [vec![0.0; n * n], vec![0.0; n * n]];
        for ix in 0..n {
            for iy in 0..n {
                let (x, y) = (ix as f64 / n as f64, iy as f64 / n as f64);
                let s = (tp * (x + y)).sin();
                fbar[0][ix * n + iy] = c * (-tp * s);
                fbar[1][ix * n + iy] = c * (tp * s + tp * (tp * x).cos());
            }
        }
        let oracle = dense_gradient_part(&fbar, n);
        let got = &bundle.grad_ptilde[0];
        for ix in 0..n {
            for iy in 0..n {
                for iz in 0..n {
                    for comp in 0..2 {
                        let a = got.component(comp)[g.flat(ix, iy, iz)];
                        let b = oracle[comp][ix * n + iy];
                        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
                    }
                }
            }
        }
    }

    #[test]
    fn pressures_are_z_independent_and_curl_free() {
        let g = g16();
        let v = hydrostatic_project(&random_band_limited(g, 2, 5, 6));
        let e = crate::noise::build_kraichnan(2, 1.0, 3)
            .unwrap()
            .lift_horizontal()
            .unwrap();
        let sig = e.evaluate(g).unwrap();
        let drift = random_band_limited(g, 2, 5, 7);
        let b = recover_pressures(&v, &sig, &drift).unwrap();
        assert_eq!(b.grad_ptilde.len(), e.len());
        for f in b.grad_ptilde.iter().chain(std::iter::once(&b.grad_p)) {
            assert!(f.to_spectral().differentiate(Axis::Z).energy().sqrt() < 1e-13);
            assert!(curl_h(f) < 1e-12);
        }
        assert!(recover_pressures(&v, &[], &drift)
            .unwrap()
            .grad_ptilde
            .is_empty());
    }
}
