//! The GOE Tracy-Widom distribution (index 1).
//!
//! The CDF is read from a table of `(s, F1(s))` pairs and interpolated with a
//! monotone piecewise cubic (Fritsch-Carlson slopes), so the interpolant is
//! nondecreasing wherever the table is. The bundled table spans [-10, 8] with
//! step 0.01 and was computed from the Fredholm determinant
//! `F1(s) = det(I - K)` on `L2(s, inf)` with kernel `K(x, y) = Ai((x + y) / 2) / 2`;
//! see `tools/tw1_table.py`.

use std::io::Read;
use std::path::Path;
use std::sync::OnceLock;

use crate::error::{Error, Result};

const EMBEDDED_TABLE: &str = include_str!("../data/tw1_cdf.csv");

/// Smallest and largest admissible significance levels for quantile lookups.
pub const ALPHA_MIN: f64 = 1e-4;
pub const ALPHA_MAX: f64 = 0.9999;

#[derive(Debug, Clone, PartialEq)]
pub struct Tw1Table {
    grid: Vec<f64>,
    cdf: Vec<f64>,
    slopes: Vec<f64>,
}

impl Tw1Table {
    /// The table compiled into the library.
    pub fn embedded() -> &'static Tw1Table {
        static TABLE: OnceLock<Tw1Table> = OnceLock::new();
        TABLE.get_or_init(|| {
            Tw1Table::from_csv(EMBEDDED_TABLE.as_bytes()).expect("embedded table is valid")
        })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv(std::fs::File::open(path)?)
    }

    /// Reads a two-column `s,F1(s)` CSV. A non-numeric first line is treated as a header.
    pub fn from_csv<R: Read>(mut reader: R) -> Result<Self> {
        let mut text = String::new();
        reader.read_to_string(&mut text)?;
        let mut grid = Vec::new();
        let mut cdf = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split(',').map(str::trim);
            let (Some(s), Some(f), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(Error::InvalidTable(format!(
                    "line {} does not have two fields",
                    lineno + 1
                )));
            };
            match (s.parse::<f64>(), f.parse::<f64>()) {
                (Ok(s), Ok(f)) => {
                    grid.push(s);
                    cdf.push(f);
                }
                _ if grid.is_empty() && lineno == 0 => continue,
                _ => {
                    return Err(Error::InvalidTable(format!(
                        "line {} is not numeric",
                        lineno + 1
                    )))
                }
            }
        }
        Self::new(grid, cdf)
    }

    pub fn new(grid: Vec<f64>, cdf: Vec<f64>) -> Result<Self> {
        validate_table(&grid, &cdf)?;
        let slopes = monotone_slopes(&grid, &cdf);
        Ok(Self { grid, cdf, slopes })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.cdf
    }

    /// F1(s), clamped to 0 below the grid and 1 above it.
    pub fn cdf(&self, s: f64) -> f64 {
        let last = self.grid.len() - 1;
        if s.is_nan() {
            return f64::NAN;
        }
        if s < self.grid[0] {
            return 0.0;
        }
        if s > self.grid[last] {
            return 1.0;
        }
        let k = self.grid.partition_point(|&x| x <= s).saturating_sub(1).min(last - 1);
        self.hermite(k, s).clamp(0.0, 1.0)
    }

    fn hermite(&self, k: usize, s: f64) -> f64 {
        let h = self.grid[k + 1] - self.grid[k];
        let t = (s - self.grid[k]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.cdf[k] + h10 * h * self.slopes[k] + h01 * self.cdf[k + 1] + h11 * h * self.slopes[k + 1]
    }

    /// Smallest `s` on the interpolant with `F1(s) >= prob`, clamped to the grid.
    pub fn quantile(&self, prob: f64) -> f64 {
        let last = self.grid.len() - 1;
        if prob <= self.cdf[0] {
            return self.grid[0];
        }
        if prob >= self.cdf[last] {
            return self.grid[last];
        }
        // First node with F >= prob; the answer lies in the interval ending there.
        let k = self.cdf.partition_point(|&f| f < prob).max(1) - 1;
        let (mut lo, mut hi) = (self.grid[k], self.grid[k + 1]);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.hermite(k, mid) < prob {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    /// `t` with `F1(t) = 1 - alpha`.
    pub fn upper_quantile(&self, alpha: f64) -> Result<f64> {
        if !(alpha > ALPHA_MIN && alpha < ALPHA_MAX) {
            return Err(Error::AlphaOutOfRange(alpha));
        }
        Ok(self.quantile(1.0 - alpha))
    }
}

fn validate_table(grid: &[f64], cdf: &[f64]) -> Result<()> {
    if grid.len() != cdf.len() {
        return Err(Error::InvalidTable("column lengths differ".into()));
    }
    if grid.len() < 2 {
        return Err(Error::InvalidTable("fewer than two rows".into()));
    }
    if grid.iter().chain(cdf).any(|v| !v.is_finite()) {
        return Err(Error::InvalidTable("non-finite value".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidTable("abscissae are not strictly increasing".into()));
    }
    if grid.windows(2).any(|w| w[1] - w[0] > 0.05 + 1e-12) {
        return Err(Error::InvalidTable("grid step exceeds 0.05".into()));
    }
    if grid[0] > -10.0 || grid[grid.len() - 1] < 6.0 {
        return Err(Error::InvalidTable("grid must span at least [-10, 6]".into()));
    }
    if cdf.iter().any(|&f| !(0.0..=1.0).contains(&f)) {
        return Err(Error::InvalidTable("CDF value outside [0, 1]".into()));
    }
    if cdf.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidTable("CDF values decrease".into()));
    }
    if cdf[0] >= 1e-8 || cdf[cdf.len() - 1] <= 1.0 - 1e-6 {
        return Err(Error::InvalidTable("table does not reach both tails".into()));
    }
    Ok(())
}

/// Fritsch-Carlson node slopes: weighted harmonic mean of adjacent secants,
/// zero at local extrema or flat segments.
fn monotone_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let m = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..m - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    let mut d = vec![0.0; m];
    d[0] = delta[0];
    d[m - 1] = delta[m - 2];
    for k in 1..m - 1 {
        let (a, b) = (delta[k - 1], delta[k]);
        if a * b > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / a + w2 / b);
        }
    }
    d
}

pub fn tw1_cdf(s: f64) -> f64 {
    Tw1Table::embedded().cdf(s)
}

pub fn tw1_upper_quantile(alpha: f64) -> Result<f64> {
    Tw1Table::embedded().upper_quantile(alpha)
}
