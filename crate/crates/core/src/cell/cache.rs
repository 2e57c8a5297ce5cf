use super::{solve_adjoint_correctors, solve_correctors, CellOptions, CorrectorSet};
use crate::error::{Error, Result};
use crate::tensor::PeriodicCoefficientField;
use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

const FORMAT: &str = "homlab-correctors/1";

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    key: String,
    field_id: String,
    fingerprint: String,
    d: usize,
    n: usize,
    m: u32,
    resolution: usize,
    adjoint: bool,
    tol: f64,
    residual: f64,
    iterations: usize,
    mollification_width: Option<f64>,
    /// Little-endian `f64` samples, `chi[g][i * n + j]` concatenated in that order.
    samples: String,
}

/// Content hash of (field samples, N, m, tolerance, adjoint flag).
pub fn cache_key(field: &PeriodicCoefficientField, opts: CellOptions, adjoint: bool) -> String {
    let resolution = opts.resolution.unwrap_or(field.resolution());
    let target = if adjoint { field.adjoint() } else { field.clone() };
    let mut h = Sha256::new();
    h.update(target.fingerprint(resolution).as_bytes());
    h.update((resolution as u64).to_le_bytes());
    h.update(field.m().to_le_bytes());
    h.update(opts.tol.to_le_bytes());
    h.update([u8::from(adjoint)]);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CacheOutcome {
    Hit,
    Miss,
    Disabled,
}

fn path_for(dir: &Path, key: &str) -> PathBuf {
    dir.join(format!("{key}.json"))
}

impl CorrectorSet {
    pub fn to_json(&self, key: &str) -> Result<String> {
        let mut bytes = Vec::new();
        for v in self.chi.iter().flatten().flatten() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let header = Header {
            format: FORMAT.into(),
            key: key.into(),
            field_id: self.field_id.clone(),
            fingerprint: self.fingerprint.clone(),
            d: self.d,
            n: self.n,
            m: self.m,
            resolution: self.resolution,
            adjoint: self.adjoint,
            tol: self.tol,
            residual: self.residual,
            iterations: self.iterations,
            mollification_width: self.mollification_width,
            samples: STANDARD.encode(bytes),
        };
        Ok(serde_json::to_string_pretty(&header)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let h: Header = serde_json::from_str(text)?;
        if h.format != FORMAT {
            return Err(Error::InvalidInput(format!("unknown corrector format {:?}", h.format)));
        }
        let bytes = STANDARD.decode(h.samples.as_bytes()).map_err(|e| Error::InvalidInput(e.to_string()))?;
        let k = crate::tensor::enumerate_multiindices(h.d, h.m).len();
        let np = h.resolution.pow(h.d as u32);
        if bytes.len() != k * h.n * h.n * np * 8 {
            return Err(Error::InvalidInput("corrector payload has the wrong length".into()));
        }
        let mut vals = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
        let chi = (0..k)
            .map(|_| (0..h.n * h.n).map(|_| vals.by_ref().take(np).collect()).collect())
            .collect();
        Ok(Self {
            field_id: h.field_id,
            fingerprint: h.fingerprint,
            d: h.d,
            n: h.n,
            m: h.m,
            resolution: h.resolution,
            adjoint: h.adjoint,
            tol: h.tol,
            residual: h.residual,
            iterations: h.iterations,
            mollification_width: h.mollification_width,
            chi,
        })
    }

    /// Grid samples as CSV: cell coordinates followed by one column per `chi^gamma_{ij}`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(fs::File::create(path)?);
        let idx = self.indices();
        let mut head: Vec<String> = (1..=self.d).map(|k| format!("y{k}")).collect();
        for g in &idx {
            for i in 0..self.n {
                for j in 0..self.n {
                    let gs: Vec<String> = g.components().iter().map(|c| c.to_string()).collect();
                    head.push(format!("chi_{}_{}{}", gs.join(""), i + 1, j + 1));
                }
            }
        }
        writeln!(f, "{}", head.join(","))?;
        let np = self.resolution.pow(self.d as u32);
        let mut y = vec![0.0; self.d];
        for p in 0..np {
            crate::tensor::field::grid_point(p, self.resolution, self.d, &mut y);
            let mut row: Vec<String> = y.iter().map(|v| format!("{v:.17e}")).collect();
            for col in &self.chi {
                for f in col {
                    row.push(format!("{:.17e}", f[p]));
                }
            }
            writeln!(f, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Solves or loads correctors, writing fresh solves back when `dir` is set.
pub fn load_or_solve(
    field: &PeriodicCoefficientField,
    opts: CellOptions,
    adjoint: bool,
    dir: Option<&Path>,
) -> Result<(CorrectorSet, CacheOutcome)> {
    let solve = || if adjoint { solve_adjoint_correctors(field, opts) } else { solve_correctors(field, opts) };
    let Some(dir) = dir else {
        return Ok((solve()?, CacheOutcome::Disabled));
    };
    let key = cache_key(field, opts, adjoint);
    let path = path_for(dir, &key);
    if let Ok(text) = fs::read_to_string(&path) {
        if let Ok(set) = CorrectorSet::from_json(&text) {
            return Ok((set, CacheOutcome::Hit));
        }
    }
    let set = solve()?;
    fs::create_dir_all(dir)?;
    let tmp = dir.join(format!("{key}.tmp"));
    fs::write(&tmp, set.to_json(&key)?)?;
    fs::rename(&tmp, &path)?;
    Ok((set, CacheOutcome::Miss))
}

/// Removes cached corrector files; returns how many were deleted.
pub fn clear_cache(dir: &Path) -> Result<usize> {
    if !dir.exists() {
        return Ok(0);
    }
    let mut removed = 0;
    for entry in fs::read_dir(dir)? {
        let p = entry?.path();
        if p.extension().is_some_and(|e| e == "json" || e == "tmp") {
            fs::remove_file(p)?;
            removed += 1;
        }
    }
    Ok(removed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::builtin_field;

    #[test]
    fn json_roundtrip_is_exact() {
        let f = builtin_field("sin1d", None, 1, 1, None).unwrap();
        let set = solve_correctors(&f, CellOptions::default()).unwrap();
        let back = CorrectorSet::from_json(&set.to_json("k").unwrap()).unwrap();
        assert_eq!(back, set);
    }

    #[test]
    fn second_lookup_hits() {
        let dir = std::env::temp_dir().join(format!("homlab-cache-test-{}", std::process::id()));
        let f = builtin_field("laminate2d", None, 1, 1, None).unwrap().with_resolution(16);
        let opts = CellOptions::default();
        let (a, first) = load_or_solve(&f, opts, false, Some(&dir)).unwrap();
        let (b, second) = load_or_solve(&f, opts, false, Some(&dir)).unwrap();
        assert_eq!(first, CacheOutcome::Miss);
        assert_eq!(second, CacheOutcome::Hit);
        assert_eq!(a, b);
        assert_ne!(cache_key(&f, opts, false), cache_key(&f, opts, true));
        assert_eq!(clear_cache(&dir).unwrap(), 1);
        let _ = fs::remove_dir_all(&dir);
    }
}
