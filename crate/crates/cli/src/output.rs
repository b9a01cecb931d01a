//! Artifact emission: atomic writes, CSV tables, JSON documents.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;

use burgers_core::scheme::IterationRecord;

pub const RECORD_COLUMNS: &str = "m,t,sup_u,sup_grad_u,sup_hess_u,sup_dt_u,sup_v,sup_grad_v";

/// Writes `bytes` to a temporary sibling, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "output path has no file name"))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

pub fn json_bytes<T: Serialize + ?Sized>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("reports serialize");
    out.push(b'\n');
    out
}

pub fn records_csv(records: &[IterationRecord]) -> String {
    let mut out = String::from(RECORD_COLUMNS);
    out.push('\n');
    for r in records {
        for k in 0..r.times.len() {
            out.push_str(&r.m.to_string());
            for v in [
                r.times[k],
                r.sup_u[k],
                r.sup_grad_u[k],
                r.sup_hess_u[k],
                r.sup_dt_u[k],
                r.sup_v[k],
                r.sup_grad_v[k],
            ] {
                out.push_str(&format!(",{v:.16e}"));
            }
            out.push('\n');
        }
    }
    out
}
