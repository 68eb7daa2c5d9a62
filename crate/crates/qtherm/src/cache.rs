//! Plain-text store of accepted eigenstates.
//!
//! ```text
//! # qtherm-samples v1 params_hash=<sha256> seed=<seed> K=<modes> N=<particles> M=<count> trials=<trials>
//! sample_index,E,beta,mu,bits
//! 0,-1.2345678901234567e1,2.2222222222222223e0,-3.0000000000000001e-3,a5f0...
//! ```
//!
//! Numbers carry 17 significant digits. `bits` is lowercase hex, two digits
//! per byte, mode `8j + b` at bit `b` of byte `j`. The hash covers every
//! parameter the sampled states depend on except `M`, so a file holding more
//! samples than requested is reused by taking its prefix.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use qtherm_core::ensemble::{OccupationVector, ReferenceEnsemble, SampleRun, SampledEigenstate};
use qtherm_core::model::{SetupParams, Spectrum};

use crate::error::{Result, RunError};

const MAGIC: &str = "qtherm-samples v1";
const COLUMNS: &str = "sample_index,E,beta,mu,bits";

/// What the sampled states were drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleKind {
    /// Eigenstates of the full coupled Hamiltonian.
    System,
    /// Eigenstates of the uncoupled bath; independent of the system level and
    /// the coupling.
    Bath,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleKey {
    pub kind: SampleKind,
    pub params: SetupParams,
}

impl SampleKey {
    pub fn system(params: &SetupParams) -> Self {
        Self {
            kind: SampleKind::System,
            params: params.clone(),
        }
    }

    pub fn bath(params: &SetupParams) -> Self {
        Self {
            kind: SampleKind::Bath,
            params: params.clone(),
        }
    }

    fn canonical(&self) -> String {
        let p = &self.params;
        let mut s = format!(
            "K={};W={:.16e};T_mid={:.16e};dT={:.16e};N={};seed={}",
            p.k, p.w, p.t_mid, p.dt, p.n, p.seed
        );
        match self.kind {
            SampleKind::System => {
                let _ = write!(s, ";kind=system;eps0={:.16e};gamma={:.16e}", p.eps0, p.gamma);
            }
            SampleKind::Bath => s.push_str(";kind=bath"),
        }
        s
    }

    /// Lowercase hex SHA-256 of the canonical parameter string.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().fold(String::with_capacity(64), |mut out, b| {
            let _ = write!(out, "{:02x}", b);
            out
        })
    }
}

/// `{:.16e}`: 17 significant digits, always `.` as decimal separator.
pub fn fmt_f64(x: f64) -> String {
    format!("{:.16e}", x)
}

pub fn write_samples(path: &Path, key: &SampleKey, spectrum: &Spectrum, run: &SampleRun) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# {} params_hash={} seed={} K={} N={} M={} trials={}",
        MAGIC,
        key.hash(),
        key.params.seed,
        spectrum.len(),
        key.params.n,
        run.samples.len(),
        run.trials
    );
    out.push_str(COLUMNS);
    out.push('\n');
    for s in &run.samples {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            s.sample_index,
            fmt_f64(s.energy),
            fmt_f64(s.reference.beta()),
            fmt_f64(s.reference.mu()),
            s.occ.to_hex()
        );
    }
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| RunError::io(dir, e))?;
        }
    }
    let tmp = path.with_extension("partial");
    let mut f = fs::File::create(&tmp).map_err(|e| RunError::io(&tmp, e))?;
    f.write_all(out.as_bytes()).map_err(|e| RunError::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| RunError::io(path, e))
}

/// Header fields of a cache file.
#[derive(Debug, Clone, PartialEq)]
pub struct CacheHeader {
    pub hash: String,
    pub seed: u64,
    pub modes: usize,
    pub particles: usize,
    pub count: usize,
    pub trials: u64,
}

fn parse_header(line: &str) -> Option<CacheHeader> {
    let rest = line.strip_prefix("# ")?.strip_prefix(MAGIC)?;
    let mut h = CacheHeader {
        hash: String::new(),
        seed: 0,
        modes: 0,
        particles: 0,
        count: 0,
        trials: 0,
    };
    let mut seen = 0;
    for field in rest.split_whitespace() {
        let (name, value) = field.split_once('=')?;
        match name {
            "params_hash" => h.hash = value.to_string(),
            "seed" => h.seed = value.parse().ok()?,
            "K" => h.modes = value.parse().ok()?,
            "N" => h.particles = value.parse().ok()?,
            "M" => h.count = value.parse().ok()?,
            "trials" => h.trials = value.parse().ok()?,
            _ => return None,
        }
        seen += 1;
    }
    (seen == 6).then_some(h)
}

/// Reads the first `m` samples of a cache file after checking that it was
/// produced for `key` and is consistent with `spectrum`. Returns the samples
/// and the trial count recorded with them.
pub fn read_samples(
    path: &Path,
    key: &SampleKey,
    spectrum: &Spectrum,
    m: usize,
) -> Result<(Vec<SampledEigenstate>, u64)> {
    let bad = |reason: String| RunError::Cache {
        path: path.to_path_buf(),
        reason,
    };
    let text = fs::read_to_string(path).map_err(|e| RunError::io(path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .and_then(parse_header)
        .ok_or_else(|| bad("missing or malformed header".into()))?;
    if header.hash != key.hash() {
        return Err(bad(format!(
            "params hash {} does not match {}",
            header.hash,
            key.hash()
        )));
    }
    if header.modes != spectrum.len() || header.particles != key.params.n {
        return Err(bad("mode or particle count differs".into()));
    }
    if header.count < m {
        return Err(bad(format!("holds {} samples, {} requested", header.count, m)));
    }
    if lines.next() != Some(COLUMNS) {
        return Err(bad("missing column header".into()));
    }
    let scale = spectrum.omega().iter().fold(1.0_f64, |a, w| a.max(w.abs()));
    let mut samples = Vec::with_capacity(m);
    for (i, line) in lines.take(m).enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(bad(format!("record {} has {} fields", i, fields.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("record {}: {}", i, e)));
        let index: usize = fields[0]
            .parse()
            .map_err(|e| bad(format!("record {}: {}", i, e)))?;
        if index != i {
            return Err(bad(format!("record {} carries index {}", i, index)));
        }
        let energy = num(fields[1])?;
        let beta = num(fields[2])?;
        let mu = num(fields[3])?;
        let occ = OccupationVector::from_hex(spectrum.len(), fields[4])
            .map_err(|e| bad(format!("record {}: {}", i, e)))?;
        if occ.count() != key.params.n {
            return Err(bad(format!("record {} holds {} particles", i, occ.count())));
        }
        let direct: f64 = occ.occupied().map(|l| spectrum.omega()[l]).sum();
        if (direct - energy).abs() > 1e-9 * scale {
            return Err(bad(format!(
                "record {} energy {} disagrees with the spectrum ({})",
                i, energy, direct
            )));
        }
        samples.push(SampledEigenstate {
            occ,
            energy,
            reference: ReferenceEnsemble::new(beta, mu),
            sample_index: i,
            // not stored; the header keeps the total trial count
            draw: 0,
        });
    }
    if samples.len() < m {
        return Err(bad(format!("only {} records present", samples.len())));
    }
    Ok((samples, header.trials))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_round_trip() {
        let line = "# qtherm-samples v1 params_hash=ab12 seed=7 K=10 N=5 M=3 trials=99";
        let h = parse_header(line).unwrap();
        assert_eq!(h.hash, "ab12");
        assert_eq!((h.seed, h.modes, h.particles, h.count, h.trials), (7, 10, 5, 3, 99));
        assert!(parse_header("# qtherm-samples v2 params_hash=ab").is_none());
        assert!(parse_header("# qtherm-samples v1 seed=1").is_none());
    }

    #[test]
    fn hash_ignores_sample_count_but_not_seed() {
        let p = SetupParams::default();
        let more = SetupParams { m: 7, ..p.clone() };
        let other = SetupParams { seed: 1, ..p.clone() };
        assert_eq!(SampleKey::system(&p).hash(), SampleKey::system(&more).hash());
        assert_ne!(SampleKey::system(&p).hash(), SampleKey::system(&other).hash());
        let g = SetupParams { gamma: 0.8, ..p.clone() };
        assert_ne!(SampleKey::system(&p).hash(), SampleKey::system(&g).hash());
        assert_eq!(SampleKey::bath(&p).hash(), SampleKey::bath(&g).hash());
        assert_eq!(SampleKey::bath(&p).hash().len(), 64);
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, -1.0 / 3.0, 6.02e23, 1e-300, 0.0] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(0.5), "5.0000000000000000e-1");
    }
}
