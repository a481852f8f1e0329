//! CSV rendering for experiment outputs.
//!
//! Floats use Rust's shortest round-trip formatting unless a column fixes
//! the number of significant digits, so identical runs give identical bytes.

use std::io::Write;
use std::path::Path;

use crate::analysis::{BlerRecord, MomentReport};
use crate::autoencoder::LossHistory;
use crate::error::Result;

/// `v` with `digits` significant digits: fixed notation for moderate
/// magnitudes, scientific otherwise.
pub fn format_significant(v: f64, digits: usize) -> String {
    assert!(digits >= 1);
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    // Round first so that e.g. 9.9999996 is classified by its rounded exponent.
    let sci = format!("{:.*e}", digits - 1, v);
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    if (-5..digits as i32).contains(&exp) {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        format!("{v:.decimals$}")
    } else {
        sci
    }
}

pub fn loss_csv(history: &LossHistory) -> String {
    let mut out = String::from("epoch,loss\n");
    for (i, loss) in history.as_slice().iter().enumerate() {
        out.push_str(&format!("{},{}\n", i + 1, loss));
    }
    out
}

pub fn bler_csv(records: &[BlerRecord]) -> String {
    let mut out = String::from("ebn0_db,blocks,errors,bler\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.ebn0_db,
            r.blocks_sent,
            r.block_errors,
            format_significant(r.bler(), 6)
        ));
    }
    out
}

pub fn capacity_csv(table: &[(f64, f64)]) -> String {
    let mut out = String::from("ebn0_db,capacity_bits\n");
    for (ebn0, c) in table {
        out.push_str(&format!("{ebn0},{c}\n"));
    }
    out
}

pub fn snr_summary_csv(rows: &[(f64, f64)]) -> String {
    let mut out = String::from("trained_ebn0_db,final_loss\n");
    for (snr, loss) in rows {
        out.push_str(&format!("{snr},{loss}\n"));
    }
    out
}

pub fn moments_csv(report: &MomentReport) -> String {
    let mut out = String::from("i,e_u,d_u,e_exp,d_exp,emp_e_exp,emp_d_exp,n_samples\n");
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for (i, e) in report.elements.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            i,
            e.e_u,
            e.d_u,
            e.e_exp,
            e.d_exp,
            opt(e.emp_e_exp),
            opt(e.emp_d_exp),
            report.samples.map(|n| n.to_string()).unwrap_or_default()
        ));
    }
    out
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "output".into());
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    Ok(result?)
}
