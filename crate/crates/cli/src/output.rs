//! Deterministic CSV and JSON writers. Every file starts with the tool
//! version, the command line and the seed, and nothing else varies between
//! runs with the same arguments.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::Failure;

#[derive(Debug, Clone)]
pub struct Meta {
    pub command: String,
    pub seed: Option<u64>,
}

impl Meta {
    pub fn from_env(seed: Option<u64>) -> Self {
        let args: Vec<String> = std::env::args().skip(1).collect();
        Self {
            command: format!("imh {}", args.join(" ")),
            seed,
        }
    }

    fn seed_text(&self) -> String {
        self.seed.map_or_else(|| "none".to_string(), |s| s.to_string())
    }

    fn json(&self) -> Value {
        json!({
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "seed": self.seed,
        })
    }
}

/// Shortest round-trip formatting; blanks for missing values.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x}")
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub struct Csv {
    header: Vec<&'static str>,
    notes: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            notes: Vec::new(),
            rows: Vec::new(),
        }
    }

    /// An extra `# key: value` metadata line.
    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn row(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self, meta: &Meta) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# imh {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(out, "# command: {}", meta.command);
        let _ = writeln!(out, "# seed: {}", meta.seed_text());
        for n in &self.notes {
            let _ = writeln!(out, "# {n}");
        }
        out.push_str(&self.header.join(","));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

/// Pretty JSON with keys sorted at every level and a `_meta` entry.
pub fn render_json(mut value: Value, meta: &Meta) -> String {
    if let Value::Object(map) = &mut value {
        map.insert("_meta".into(), meta.json());
    }
    // `Value` objects are B-tree maps, so a round trip sorts nested keys too
    let sorted: Value = serde_json::from_str(&value.to_string()).expect("valid json");
    let mut s = serde_json::to_string_pretty(&sorted).expect("serializable");
    s.push('\n');
    s
}

pub struct OutDir {
    dir: PathBuf,
    pub meta: Meta,
}

impl OutDir {
    pub fn create(dir: &Path, meta: Meta) -> Result<Self, Failure> {
        fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("cannot create `{}`: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            meta,
        })
    }

    fn write(&self, name: &str, text: &str) -> Result<PathBuf, Failure> {
        let path = self.dir.join(name);
        fs::write(&path, text).map_err(|e| Failure::Io(format!("cannot write `{}`: {e}", path.display())))?;
        println!("wrote {}", path.display());
        Ok(path)
    }

    pub fn csv(&self, name: &str, csv: &Csv) -> Result<PathBuf, Failure> {
        self.write(name, &csv.render(&self.meta))
    }

    pub fn json(&self, name: &str, value: Value) -> Result<PathBuf, Failure> {
        self.write(name, &render_json(value, &self.meta))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> Meta {
        Meta {
            command: "imh test".into(),
            seed: Some(3),
        }
    }

    #[test]
    fn json_keys_are_sorted_with_meta() {
        let s = render_json(json!({"b": 1, "a": {"z": 1, "y": 2}}), &meta());
        let a = s.find("\"a\"").unwrap();
        let b = s.find("\"b\"").unwrap();
        let m = s.find("\"_meta\"").unwrap();
        assert!(m < a && a < b);
        assert!(s.find("\"y\"").unwrap() < s.find("\"z\"").unwrap());
        assert!(s.contains("\"seed\": 3"));
    }

    #[test]
    fn csv_has_metadata_header() {
        let mut c = Csv::new(&["n", "tv"]);
        c.note("model: x");
        c.row(vec!["0".into(), num(0.5)]);
        let s = c.render(&meta());
        let lines: Vec<&str> = s.lines().collect();
        assert!(lines[0].starts_with("# imh "));
        assert_eq!(lines[1], "# command: imh test");
        assert_eq!(lines[2], "# seed: 3");
        assert_eq!(lines[3], "# model: x");
        assert_eq!(lines[4], "n,tv");
        assert_eq!(lines[5], "0,0.5");
    }

    #[test]
    fn number_formatting() {
        assert_eq!(num(1.0), "1");
        assert_eq!(num(0.1), "0.1");
        assert_eq!(num(f64::NAN), "nan");
        assert_eq!(opt(None), "");
    }
}
