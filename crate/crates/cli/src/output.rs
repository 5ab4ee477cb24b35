//! CSV and JSON emission with a metadata header.

use std::fmt::Write as _;
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::Value;
use spinlab::sampler::RNG_ALGORITHM;

use crate::error::{CliError, CliResult};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Meta {
    pub command_line: String,
    pub config_hash: String,
    pub seed: u64,
    pub timestamp: u64,
}

impl Meta {
    pub fn new(command_line: String, config_hash: String, seed: u64) -> Self {
        Self { command_line, config_hash, seed, timestamp: timestamp() }
    }

    fn lines(&self) -> Vec<String> {
        vec![
            format!("spinlab {VERSION}"),
            format!("command: {}", self.command_line),
            format!("config_sha256: {}", self.config_hash),
            format!("seed: {} ({RNG_ALGORITHM})", self.seed),
            format!("timestamp: {}", self.timestamp),
        ]
    }
}

/// Seconds since the epoch, or `SOURCE_DATE_EPOCH` when set.
fn timestamp() -> u64 {
    if let Some(v) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.trim().parse().ok()) {
        return v;
    }
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    /// Extra `# key: value` lines after the metadata.
    pub notes: Vec<String>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Self { columns, ..Default::default() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Body {
    Csv(Table),
    Json(Value),
}

pub fn render(meta: &Meta, body: &Body) -> String {
    match body {
        Body::Csv(t) => {
            let mut s = String::new();
            for line in meta.lines().iter().chain(&t.notes) {
                let _ = writeln!(s, "# {line}");
            }
            let _ = writeln!(s, "{}", t.columns.join(","));
            for row in &t.rows {
                let _ = writeln!(s, "{}", row.join(","));
            }
            s
        }
        Body::Json(v) => {
            let meta_v = serde_json::json!({
                "version": VERSION,
                "command": meta.command_line,
                "config_sha256": meta.config_hash,
                "seed": meta.seed,
                "rng": RNG_ALGORITHM,
                "timestamp": meta.timestamp,
            });
            let doc = match v {
                Value::Object(map) => {
                    let mut map = map.clone();
                    map.insert("meta".into(), meta_v);
                    Value::Object(map)
                }
                other => serde_json::json!({ "meta": meta_v, "result": other }),
            };
            let mut s = serde_json::to_string_pretty(&doc).expect("json renders");
            s.push('\n');
            s
        }
    }
}

/// Data lines of a CSV document: everything after the comment header.
pub fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRow {
    pub beta: f64,
    pub h: f64,
    pub class: String,
    pub maximizers: Vec<f64>,
    pub height_gap: Option<f64>,
    pub curvature: f64,
}

pub const PHASE_COLUMNS: [&str; 6] = ["beta", "h", "class", "m_list", "height_gap", "curvature"];

/// Parses `phase-diagram` output. `m_list` is `;`-separated and an empty
/// `height_gap` means every stationary point is a global maximizer.
pub fn parse_phase_diagram(text: &str) -> CliResult<Vec<PhaseRow>> {
    let bad = |m: String| CliError::Config(format!("phase diagram: {m}"));
    let mut lines = data_lines(text).into_iter();
    let header = lines.next().ok_or_else(|| bad("missing header".into()))?;
    if header.split(',').collect::<Vec<_>>() != PHASE_COLUMNS {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("bad number {s:?}: {e}")));
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != PHASE_COLUMNS.len() {
                return Err(bad(format!("expected {} fields in {line:?}", PHASE_COLUMNS.len())));
            }
            let maximizers = f[3].split(';').map(num).collect::<CliResult<Vec<_>>>()?;
            let height_gap = if f[4].is_empty() { None } else { Some(num(f[4])?) };
            Ok(PhaseRow {
                beta: num(f[0])?,
                h: num(f[1])?,
                class: f[2].to_string(),
                maximizers,
                height_gap,
                curvature: num(f[5])?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(real(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn csv_header_and_rows() {
        let meta = Meta { command_line: "spinlab be".into(), config_hash: "ab".into(), seed: 3, timestamp: 7 };
        let mut t = Table::new(vec!["n", "d"]);
        t.push(vec!["10".into(), real(0.5)]);
        let s = render(&meta, &Body::Csv(t));
        assert!(s.starts_with("# spinlab "));
        assert!(s.contains("# seed: 3 (ChaCha8)\n"));
        assert_eq!(data_lines(&s), vec!["n,d", "10,5.0000000000000000e-1"]);
    }

    #[test]
    fn json_gets_meta() {
        let meta = Meta { command_line: "x".into(), config_hash: "h".into(), seed: 0, timestamp: 1 };
        let s = render(&meta, &Body::Json(serde_json::json!({"a": 1})));
        let v: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["a"], 1);
        assert_eq!(v["meta"]["config_sha256"], "h");
    }

    #[test]
    fn phase_parser_rejects_garbage() {
        assert!(parse_phase_diagram("# c\nbeta,h\n").is_err());
        let ok = "beta,h,class,m_list,height_gap,curvature\n1e0,0e0,regular,5e-1,,2e0\n";
        let rows = parse_phase_diagram(ok).unwrap();
        assert_eq!(rows[0].maximizers, vec![0.5]);
        assert_eq!(rows[0].height_gap, None);
    }
}
