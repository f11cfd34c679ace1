//! Structured run trace, one JSON object per line.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::numerics::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum TraceEvent {
    ClientVote {
        client: usize,
        pairs: Vec<(usize, usize)>,
    },
    Screen {
        active: Vec<usize>,
    },
    Exclusion {
        client: usize,
        n: usize,
        required: usize,
    },
    ClientUpload {
        client: usize,
        n: usize,
        m_checksum: String,
        sigma_checksum: String,
    },
    Merge {
        clients: usize,
        total_n: usize,
        m_checksum: String,
        sigma_checksum: String,
    },
    Estimate {
        d: usize,
        d_rule: usize,
        beta_checksum: String,
    },
}

/// First 16 hex digits of the SHA-256 of the shape and the little-endian
/// column-major entries.
pub fn checksum(m: &Matrix) -> String {
    let mut h = Sha256::new();
    h.update((m.nrows() as u64).to_le_bytes());
    h.update((m.ncols() as u64).to_le_bytes());
    for v in m.iter() {
        h.update(v.to_le_bytes());
    }
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Renders events as JSON lines tagged with `run_id`.
pub fn to_json_lines(run_id: &str, events: &[TraceEvent]) -> String {
    let mut out = String::new();
    for e in events {
        let mut v = serde_json::to_value(e).expect("trace events serialize");
        v["run_id"] = serde_json::Value::String(run_id.to_string());
        out.push_str(&v.to_string());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checksum_is_stable_and_shape_aware() {
        let a = Matrix::from_column_slice(2, 1, &[1.0, 2.0]);
        let b = Matrix::from_column_slice(1, 2, &[1.0, 2.0]);
        assert_eq!(checksum(&a).len(), 16);
        assert_eq!(checksum(&a), checksum(&a.clone()));
        assert_ne!(checksum(&a), checksum(&b));
    }

    #[test]
    fn json_lines_carry_run_id() {
        let lines = to_json_lines(
            "r1",
            &[TraceEvent::Screen { active: vec![0, 2] }, TraceEvent::Exclusion { client: 3, n: 5, required: 9 }],
        );
        let rows: Vec<serde_json::Value> = lines.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0]["event"], "screen");
        assert_eq!(rows[1]["run_id"], "r1");
        assert_eq!(rows[1]["required"], 9);
    }
}
