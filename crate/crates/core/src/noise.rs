//! Truncated Kraichnan transport noise.
//!
//! Each lattice pair `{k, -k}` with `0 < |k| <= kmax` contributes, for every
//! unit direction `a` orthogonal to `k`, a cosine mode `amp cos(2 pi k.x) a`
//! labelled `k` and a sine mode `amp sin(2 pi k.x) a` labelled `-k`, where `k`
//! is the lexicographically dominating member of the pair and
//! `amp = |k|^{-(1+alpha)/2} |k|^{-(d-1)/2}`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::spectral::{GridSpec, RealField};
use crate::tensor::MatrixField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Parity {
    Cos,
    Sin,
}

impl Parity {
    pub fn as_str(self) -> &'static str {
        match self {
            Parity::Cos => "cos",
            Parity::Sin => "sin",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseMode {
    /// Label: the dominating wavevector for cosine modes, its negative for sine modes.
    pub k: [i64; 3],
    /// Direction index, `1 ..= d-1`.
    pub ell: usize,
    pub parity: Parity,
    pub amplitude: f64,
    pub direction: [f64; 3],
}

impl NoiseMode {
    /// The dominating wavevector entering the phase.
    pub fn phase_wavevector(&self) -> [i64; 3] {
        match self.parity {
            Parity::Cos => self.k,
            Parity::Sin => [-self.k[0], -self.k[1], -self.k[2]],
        }
    }

    pub fn norm_k(&self) -> f64 {
        norm(self.k)
    }

    pub fn value_at(&self, x: [f64; 3]) -> [f64; 3] {
        let kd = self.phase_wavevector();
        let phase = 2.0 * PI * (kd[0] as f64 * x[0] + kd[1] as f64 * x[1] + kd[2] as f64 * x[2]);
        let s = self.amplitude
            * match self.parity {
                Parity::Cos => phase.cos(),
                Parity::Sin => phase.sin(),
            };
        [
            s * self.direction[0],
            s * self.direction[1],
            s * self.direction[2],
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseEnsemble {
    pub d: usize,
    pub alpha: f64,
    pub kmax: i64,
    pub modes: Vec<NoiseMode>,
    pub vertical_lift: bool,
}

fn norm(k: [i64; 3]) -> f64 {
    ((k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64).sqrt()
}

fn cross(a: [i64; 3], b: [i64; 3]) -> [i64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalized(v: [i64; 3]) -> [f64; 3] {
    let n = norm(v);
    [v[0] as f64 / n, v[1] as f64 / n, v[2] as f64 / n]
}

fn dominates(k: [i64; 3]) -> bool {
    k.iter().find(|&&c| c != 0).is_some_and(|&c| c > 0)
}

/// Integer vectors spanning the plane orthogonal to `k`, mutually orthogonal.
fn orthogonal_basis(d: usize, k: [i64; 3]) -> Vec<[i64; 3]> {
    if d == 2 {
        return vec![[-k[1], k[0], 0]];
    }
    let axis = (0..3).min_by_key(|&i| k[i].abs()).unwrap();
    let mut e = [0; 3];
    e[axis] = 1;
    let a1 = cross(k, e);
    let a2 = cross(k, a1);
    vec![a1, a2]
}

pub fn build_kraichnan(d: usize, alpha: f64, kmax: i64) -> Result<NoiseEnsemble> {
    if d != 2 && d != 3 {
        return Err(Error::Parameter(format!("d = {d} must be 2 or 3")));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Parameter(format!(
            "alpha = {alpha} must be positive"
        )));
    }
    if kmax < 1 {
        return Err(Error::Parameter(format!(
            "kmax = {kmax} must be at least 1"
        )));
    }
    let zr = if d == 3 { kmax } else { 0 };
    let mut ks = Vec::new();
    for kx in -kmax..=kmax {
        for ky in -kmax..=kmax {
            for kz in -zr..=zr {
                let k = [kx, ky, kz];
                let n2 = kx * kx + ky * ky + kz * kz;
                if n2 > 0 && n2 <= kmax * kmax && dominates(k) {
                    ks.push((n2, k));
                }
            }
        }
    }
    ks.sort();
    let df = d as f64;
    let mut modes = Vec::with_capacity(ks.len() * 2 * (d - 1));
    for (_, k) in ks {
        let nk = norm(k);
        let amplitude = nk.powf(-(1.0 + alpha) / 2.0) / nk.powf((df - 1.0) / 2.0);
        for (l, a) in orthogonal_basis(d, k).into_iter().enumerate() {
            let direction = normalized(a);
            modes.push(NoiseMode {
                k,
                ell: l + 1,
                parity: Parity::Cos,
                amplitude,
                direction,
            });
            modes.push(NoiseMode {
                k: [-k[0], -k[1], -k[2]],
                ell: l + 1,
                parity: Parity::Sin,
                amplitude,
                direction,
            });
        }
    }
    Ok(NoiseEnsemble {
        d,
        alpha,
        kmax,
        modes,
        vertical_lift: false,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularityReport {
    pub k_list: Vec<i64>,
    pub h_partial: Vec<f64>,
    pub c_gamma_partial: Vec<f64>,
    /// Least-squares slope of `h_partial` against `log K`.
    pub h_slope_vs_logk: f64,
    /// Coefficient of determination of that fit.
    pub h_r_squared: f64,
    /// Ratio of the last two increments of `c_gamma_partial` (NaN with fewer than three K).
    pub c_gamma_tail_ratio: f64,
}

/// Ordinary least squares `y = a + b x`; returns `(b, a, r^2)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    (slope, my - slope * mx, r2)
}

impl NoiseEnsemble {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Dimension of the vectors the modes act on.
    pub fn ambient_dim(&self) -> usize {
        if self.d == 2 && !self.vertical_lift {
            2
        } else {
            3
        }
    }

    /// Embed a planar ensemble into three dimensions (zero vertical component,
    /// z-independent). Idempotent.
    pub fn lift_horizontal(&self) -> Result<NoiseEnsemble> {
        if self.d != 2 {
            return Err(Error::Parameter(
                "only d = 2 ensembles can be lifted".into(),
            ));
        }
        let mut out = self.clone();
        out.vertical_lift = true;
        Ok(out)
    }

    pub fn scaled(&self, factor: f64) -> NoiseEnsemble {
        let mut out = self.clone();
        for m in &mut out.modes {
            m.amplitude *= factor;
        }
        out
    }

    fn check_resolved(&self, grid: GridSpec) -> Result<()> {
        let dims = grid.dims();
        for m in &self.modes {
            for (a, &n) in dims.iter().enumerate() {
                if 2 * m.k[a].unsigned_abs() as usize >= n {
                    return Err(Error::Unresolved {
                        kmax: self.kmax,
                        nyquist: n / 2,
                    });
                }
            }
        }
        Ok(())
    }

    /// Every mode as a 3-component field on `grid`, in ensemble order.
    pub fn evaluate(&self, grid: GridSpec) -> Result<Vec<RealField>> {
        self.check_resolved(grid)?;
        Ok(self
            .modes
            .iter()
            .map(|m| {
                let mut f = RealField::zeros(grid, 3);
                let n = grid.len();
                let vals = f.values_mut();
                for i in 0..n {
                    let v = m.value_at(grid.coords(i));
                    for c in 0..3 {
                        vals[c * n + i] = v[c];
                    }
                }
                f
            })
            .collect())
    }

    /// The family as one field with `3 * len` components, suitable for
    /// `holder_norm`'s l^2 reduction.
    pub fn family_field(&self, grid: GridSpec) -> Result<RealField> {
        let fields = self.evaluate(grid)?;
        let n = grid.len();
        let mut values = Vec::with_capacity(3 * n * fields.len());
        for f in &fields {
            values.extend_from_slice(f.values());
        }
        RealField::from_values(grid, 3 * fields.len(), values)
    }

    /// `sum_n sigma_n sigma_n^T` evaluated pointwise.
    pub fn correlation(&self, grid: GridSpec) -> Result<MatrixField> {
        let mut m = MatrixField::identity(grid, 0.0);
        for f in self.evaluate(grid)? {
            m.add_outer(&f, 1.0);
        }
        Ok(m)
    }

    /// Least-squares slope of `log amplitude` against `log |k|`.
    pub fn decay_slope(&self) -> Result<f64> {
        let (x, y): (Vec<f64>, Vec<f64>) = self
            .modes
            .iter()
            .map(|m| (m.norm_k().ln(), m.amplitude.ln()))
            .unzip();
        if x.iter().all(|v| *v == x[0]) {
            return Err(Error::Parameter(
                "decay slope needs at least two radii".into(),
            ));
        }
        Ok(linear_fit(&x, &y).0)
    }

    /// Slope of the dyadic shell spectrum: shell `[2^j, 2^{j+1})` energy
    /// `sum amp^2` divided by the shell width, against the mean `|k|` in the shell.
    pub fn spectrum_slope(&self) -> Result<f64> {
        let mut shells: Vec<(f64, f64, usize)> = Vec::new();
        let mut j = 0;
        while 1i64 << (j + 1) <= self.kmax {
            let lo = (1i64 << j) as f64;
            let hi = 2.0 * lo;
            let (mut e, mut ks, mut cnt) = (0.0, 0.0, 0usize);
            for m in &self.modes {
                let r = m.norm_k();
                if r >= lo && r < hi {
                    e += m.amplitude * m.amplitude;
                    ks += r;
                    cnt += 1;
                }
            }
            if cnt > 0 {
                shells.push((e / lo, ks / cnt as f64, cnt));
            }
            j += 1;
        }
        if shells.len() < 3 {
            return Err(Error::Parameter(format!(
                "spectrum slope needs at least 3 complete dyadic shells, kmax = {} gives {}",
                self.kmax,
                shells.len()
            )));
        }
        let x: Vec<f64> = shells.iter().map(|s| s.1.ln()).collect();
        let y: Vec<f64> = shells.iter().map(|s| s.0.ln()).collect();
        Ok(linear_fit(&x, &y).0)
    }

    pub fn regularity_report(&self, gamma: f64, k_list: &[i64]) -> Result<RegularityReport> {
        if k_list.is_empty() || k_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Parameter(
                "K list must be non-empty and increasing".into(),
            ));
        }
        if *k_list.last().unwrap() > self.kmax {
            return Err(Error::Parameter(
                "K list exceeds the ensemble's kmax".into(),
            ));
        }
        let mut h = vec![0.0; k_list.len()];
        let mut c = vec![0.0; k_list.len()];
        for m in &self.modes {
            let r = m.norm_k();
            let hm = (1.0 + r * r).powf(self.alpha / 2.0) * m.amplitude * m.amplitude;
            let cm = (m.amplitude * (2.0 * PI * r).powf(gamma)).powi(2);
            for (i, &kk) in k_list.iter().enumerate() {
                if r <= kk as f64 {
                    h[i] += hm;
                    c[i] += cm;
                }
            }
        }
        let (slope, r2) = if k_list.len() >= 2 {
            let x: Vec<f64> = k_list.iter().map(|&k| (k as f64).ln()).collect();
            let (s, _, r2) = linear_fit(&x, &h);
            (s, r2)
        } else {
            (f64::NAN, f64::NAN)
        };
        let tail = if c.len() >= 3 {
            let n = c.len();
            (c[n - 1] - c[n - 2]) / (c[n - 2] - c[n - 3])
        } else {
            f64::NAN
        };
        Ok(RegularityReport {
            k_list: k_list.to_vec(),
            h_partial: h,
            c_gamma_partial: c,
            h_slope_vs_logk: slope,
            h_r_squared: r2,
            c_gamma_tail_ratio: tail,
        })
    }

    /// `min` over the grid and unit `lambda` of `lambda^T (a - 1/2 sum sigma sigma^T) lambda`,
    /// with `a = Id` when absent. Planar ensembles use the horizontal block.
    pub fn parabolicity_margin(&self, grid: GridSpec, a: Option<&MatrixField>) -> Result<f64> {
        let mut m = match a {
            Some(a) => a.clone(),
            None => MatrixField::identity(grid, 1.0),
        };
        if m.grid() != grid {
            return Err(Error::Shape(
                "coefficient grid differs from evaluation grid".into(),
            ));
        }
        m.add_scaled(&self.correlation(grid)?, -0.5);
        Ok(m.min_eigenvalue(self.ambient_dim()))
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "# kraichnan d={} alpha={} kmax={}\n",
            self.d, self.alpha, self.kmax
        );
        if self.vertical_lift {
            s.push_str("# lifted\n");
        }
        for m in &self.modes {
            let _ = writeln!(
                s,
                "{} {} {} {} {} {} {} {} {}",
                m.k[0],
                m.k[1],
                m.k[2],
                m.ell,
                m.parity.as_str(),
                m.amplitude,
                m.direction[0],
                m.direction[1],
                m.direction[2]
            );
        }
        s
    }

    pub fn from_text(text: &str) -> Result<NoiseEnsemble> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty noise file".into()))?;
        let rest = header
            .strip_prefix("# kraichnan ")
            .ok_or_else(|| Error::Format(format!("bad noise header: {header}")))?;
        let (mut d, mut alpha, mut kmax) = (None, None, None);
        for tok in rest.split_whitespace() {
            let (key, val) = tok
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("bad header token {tok}")))?;
            let bad = || Error::Format(format!("bad header value {tok}"));
            match key {
                "d" => d = Some(val.parse::<usize>().map_err(|_| bad())?),
                "alpha" => alpha = Some(val.parse::<f64>().map_err(|_| bad())?),
                "kmax" => kmax = Some(val.parse::<i64>().map_err(|_| bad())?),
                _ => return Err(Error::Format(format!("unknown header key {key}"))),
            }
        }
        let missing = || Error::Format("noise header lacks d, alpha or kmax".into());
        let mut e = NoiseEnsemble {
            d: d.ok_or_else(missing)?,
            alpha: alpha.ok_or_else(missing)?,
            kmax: kmax.ok_or_else(missing)?,
            modes: Vec::new(),
            vertical_lift: false,
        };
        for (ln, line) in lines.enumerate() {
            let line = line.trim();
            if line == "# lifted" {
                e.vertical_lift = true;
                continue;
            }
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::Format(format!("bad noise record on line {}", ln + 2));
            if f.len() != 9 {
                return Err(bad());
            }
            let int = |s: &str| s.parse::<i64>().map_err(|_| bad());
            let real = |s: &str| s.parse::<f64>().map_err(|_| bad());
            let parity = match f[4] {
                "cos" => Parity::Cos,
                "sin" => Parity::Sin,
                _ => return Err(bad()),
            };
            e.modes.push(NoiseMode {
                k: [int(f[0])?, int(f[1])?, int(f[2])?],
                ell: f[3].parse().map_err(|_| bad())?,
                parity,
                amplitude: real(f[5])?,
                direction: [real(f[6])?, real(f[7])?, real(f[8])?],
            });
        }
        Ok(e)
    }
}
