//! Rectangular phase-space grids shared by the classical histogram and the
//! Husimi function.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Extent and resolution of an `(x, p)` grid. Cells are half-open
/// `[lo, lo + h)`; values are reported at cell centres.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub m_x: usize,
    pub m_p: usize,
}

impl GridSpec {
    pub fn new(x_min: f64, x_max: f64, p_min: f64, p_max: f64, m_x: usize, m_p: usize) -> Result<Self> {
        let ok = x_min.is_finite()
            && x_max.is_finite()
            && p_min.is_finite()
            && p_max.is_finite()
            && x_max > x_min
            && p_max > p_min
            && m_x > 0
            && m_p > 0;
        if !ok {
            return Err(Error::Grid(format!(
                "bad extent [{x_min}, {x_max}] x [{p_min}, {p_max}] at {m_x}x{m_p}"
            )));
        }
        Ok(Self {
            x_min,
            x_max,
            p_min,
            p_max,
            m_x,
            m_p,
        })
    }

    /// Square grid `[−l, l]²` with `m × m` cells.
    pub fn square(l: f64, m: usize) -> Result<Self> {
        Self::new(-l, l, -l, l, m, m)
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.m_x as f64
    }

    pub fn dp(&self) -> f64 {
        (self.p_max - self.p_min) / self.m_p as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dp()
    }

    pub fn x_center(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx()
    }

    pub fn p_center(&self, j: usize) -> f64 {
        self.p_min + (j as f64 + 0.5) * self.dp()
    }

    /// Row-major index (`p` row, `x` column) of the cell holding `(x, p)`.
    pub fn locate(&self, x: f64, p: f64) -> Option<usize> {
        let fx = (x - self.x_min) / self.dx();
        let fp = (p - self.p_min) / self.dp();
        if !(fx >= 0.0 && fp >= 0.0) {
            return None;
        }
        let (i, j) = (fx as usize, fp as usize);
        (i < self.m_x && j < self.m_p).then_some(j * self.m_x + i)
    }

    pub fn len(&self) -> usize {
        self.m_x * self.m_p
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Nonnegative densities on a [`GridSpec`], row-major with `M_p` rows of
/// `M_x` values. `overflow_mass` is the probability outside the extent.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseGrid {
    pub spec: GridSpec,
    pub values: Vec<f64>,
    pub overflow_mass: f64,
}

impl PhaseGrid {
    pub fn zeros(spec: GridSpec) -> Self {
        Self {
            spec,
            values: vec![0.0; spec.len()],
            overflow_mass: 0.0,
        }
    }

    pub fn value(&self, ix: usize, jp: usize) -> f64 {
        self.values[jp * self.spec.m_x + ix]
    }

    /// `Σ values × cell area`.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spec.cell_area()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Separable Gaussian blur with standard deviations in phase-space units.
    /// Mass pushed past the edges is dropped.
    pub fn gaussian_smooth(&self, sigma_x: f64, sigma_p: f64) -> PhaseGrid {
        fn kernel(sigma: f64, h: f64) -> Vec<f64> {
            if sigma <= 0.0 {
                return vec![1.0];
            }
            let half = (4.0 * sigma / h).ceil() as i64;
            let w: Vec<f64> = (-half..=half)
                .map(|k| (-0.5 * (k as f64 * h / sigma).powi(2)).exp())
                .collect();
            let total: f64 = w.iter().sum();
            w.into_iter().map(|v| v / total).collect()
        }
        fn blur(src: &[f64], len: usize, stride: usize, count: usize, step: usize, k: &[f64]) -> Vec<f64> {
            let half = (k.len() / 2) as i64;
            let mut out = vec![0.0; src.len()];
            for line in 0..count {
                let base = line * step;
                for i in 0..len {
                    let mut acc = 0.0;
                    for (t, w) in k.iter().enumerate() {
                        let j = i as i64 + t as i64 - half;
                        if (0..len as i64).contains(&j) {
                            acc += w * src[base + j as usize * stride];
                        }
                    }
                    out[base + i * stride] = acc;
                }
            }
            out
        }
        let s = &self.spec;
        let along_x = blur(&self.values, s.m_x, 1, s.m_p, s.m_x, &kernel(sigma_x, s.dx()));
        let along_p = blur(&along_x, s.m_p, s.m_x, s.m_x, 1, &kernel(sigma_p, s.dp()));
        PhaseGrid {
            spec: self.spec,
            values: along_p,
            overflow_mass: self.overflow_mass,
        }
    }

    /// CSV with a `# x_min x_max p_min p_max M_x M_p overflow_mass` header.
    pub fn to_csv(&self) -> String {
        let s = &self.spec;
        let mut out = String::with_capacity(self.values.len() * 24 + 128);
        let _ = writeln!(
            out,
            "# {} {} {} {} {} {} {}",
            s.x_min, s.x_max, s.p_min, s.p_max, s.m_x, s.m_p, self.overflow_mass
        );
        for row in self.values.chunks(s.m_x) {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{v:e}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .and_then(|h| h.strip_prefix('#'))
            .ok_or_else(|| Error::Grid("missing header".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 7 {
            return Err(Error::Grid(format!("header has {} fields, want 7", fields.len())));
        }
        let f = |i: usize| {
            fields[i]
                .parse::<f64>()
                .map_err(|_| Error::Grid(format!("bad header field `{}`", fields[i])))
        };
        let u = |i: usize| {
            fields[i]
                .parse::<usize>()
                .map_err(|_| Error::Grid(format!("bad header field `{}`", fields[i])))
        };
        let spec = GridSpec::new(f(0)?, f(1)?, f(2)?, f(3)?, u(4)?, u(5)?)?;
        let overflow_mass = f(6)?;
        let mut values = Vec::with_capacity(spec.len());
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let row: Vec<f64> = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Grid("bad value".into()))?;
            if row.len() != spec.m_x {
                return Err(Error::Grid(format!("row has {} values, want {}", row.len(), spec.m_x)));
            }
            values.extend(row);
        }
        if values.len() != spec.len() {
            return Err(Error::Grid(format!(
                "{} rows, want {}",
                values.len() / spec.m_x,
                spec.m_p
            )));
        }
        Ok(Self {
            spec,
            values,
            overflow_mass,
        })
    }

    /// Plain (P2) graymap, highest `p` on the top row. The scale factor is
    /// recorded in a header comment.
    pub fn to_pgm(&self) -> String {
        let s = &self.spec;
        let max = self.max_value();
        let mut out = String::new();
        let _ = writeln!(out, "P2");
        let _ = writeln!(out, "# max_value {max:e}");
        let _ = writeln!(out, "{} {}", s.m_x, s.m_p);
        let _ = writeln!(out, "255");
        for row in self.values.chunks(s.m_x).rev() {
            let line: Vec<String> = row
                .iter()
                .map(|&v| {
                    let level = if max > 0.0 {
                        (v.max(0.0) / max * 255.0).round()
                    } else {
                        0.0
                    };
                    (level as u8).to_string()
                })
                .collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }
}

/// Pearson correlation of two grids over all cells.
pub fn grid_correlation(a: &PhaseGrid, b: &PhaseGrid) -> Result<f64> {
    if a.spec != b.spec {
        return Err(Error::Grid("grids differ in extent or resolution".into()));
    }
    let flat = |g: &PhaseGrid| g.values.iter().all(|&v| v == g.values[0]);
    if flat(a) || flat(b) {
        return Ok(0.0);
    }
    let n = a.values.len() as f64;
    let mean_a = a.values.iter().sum::<f64>() / n;
    let mean_b = b.values.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&va, &vb) in a.values.iter().zip(&b.values) {
        let (da, db) = (va - mean_a, vb - mean_b);
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Ok(0.0);
    }
    Ok(sab / (saa * sbb).sqrt())
}
