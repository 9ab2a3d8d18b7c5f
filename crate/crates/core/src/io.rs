//! Artifact files: atomic writes, the torus JSON document and the
//! `theta`-grid CSV.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Mode, TruncationBox};
use crate::oracles::ResidualReport;
use crate::spectral::FourierSeries;
use crate::C64;

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().ok_or_else(|| Error::InvalidArgument(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Pretty JSON with a trailing newline, written atomically.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusMode {
    pub q: Vec<i64>,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

/// On-disk form of a torus `x(q)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusFile {
    pub omega: Vec<f64>,
    pub lambda: f64,
    pub modes: Vec<TorusMode>,
    #[serde(default)]
    pub residuals: Option<ResidualReport>,
}

impl TorusFile {
    pub fn from_series(x: &FourierSeries, omega: &[f64], lambda: f64, residuals: Option<ResidualReport>) -> Self {
        let modes = x
            .modes()
            .map(|(q, c)| TorusMode { q: q.0, re: c.iter().map(|z| z.re).collect(), im: c.iter().map(|z| z.im).collect() })
            .collect();
        TorusFile { omega: omega.to_vec(), lambda, modes, residuals }
    }

    /// Rebuilds the series on the smallest box holding every listed mode.
    pub fn to_series(&self) -> Result<FourierSeries> {
        let d = self.omega.len();
        let corrupt = |m: String| Err(Error::InvalidArgument(format!("torus file: {m}")));
        if self.modes.is_empty() {
            return corrupt("no modes".into());
        }
        let mut radius = 0;
        for m in &self.modes {
            if m.q.len() != d || m.re.len() != d || m.im.len() != d {
                return corrupt(format!("mode {:?} does not have {d} components", m.q));
            }
            radius = radius.max(Mode(m.q.clone()).sup_norm() as usize);
        }
        let bx = TruncationBox::new(d, radius.max(1))?;
        let mut x = FourierSeries::zeros(&bx);
        for m in &self.modes {
            let i = bx.index_of(&m.q).expect("radius covers every mode");
            for (a, z) in x.get_mut(i).iter_mut().enumerate() {
                *z = C64::new(m.re[a], m.im[a]);
            }
        }
        Ok(x)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// `theta_1, .., theta_d, X_1, .., X_d` on a uniform `n^d` grid.
pub fn theta_grid_csv(x: &FourierSeries, n: usize) -> String {
    let d = x.dim();
    let mut s = String::new();
    let cols: Vec<String> = (1..=d).map(|a| format!("theta{a}")).chain((1..=d).map(|a| format!("X{a}"))).collect();
    s.push_str(&cols.join(","));
    s.push('\n');
    let two_pi = 2.0 * std::f64::consts::PI;
    for flat in 0..n.pow(d as u32) {
        let mut rem = flat;
        let theta: Vec<f64> = (0..d)
            .map(|_| {
                let k = rem % n;
                rem /= n;
                two_pi * k as f64 / n as f64
            })
            .collect();
        let val = x.eval(&theta);
        let row: Vec<String> = theta.iter().map(|t| format!("{t:.17e}")).chain(val.iter().map(|z| format!("{:.17e}", z.re))).collect();
        let _ = writeln!(s, "{}", row.join(","));
    }
    s
}
