//! Number formatting and file emission. Every float is written with at most
//! 12 significant digits; infinities become `UNBOUNDED` /
//! `NEGATIVE_UNBOUNDED`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Number, Value};
use serde_value::Value as Raw;

pub const UNBOUNDED: &str = "UNBOUNDED";
pub const NEGATIVE_UNBOUNDED: &str = "NEGATIVE_UNBOUNDED";

/// `x` rounded to 12 significant digits.
pub fn round12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { 0.0 } else { x };
    }
    format!("{x:.11e}").parse().expect("formatted float parses")
}

pub fn fmt_num(x: f64) -> String {
    if x == f64::INFINITY {
        UNBOUNDED.into()
    } else if x == f64::NEG_INFINITY {
        NEGATIVE_UNBOUNDED.into()
    } else if x.is_nan() {
        "NaN".into()
    } else {
        format!("{}", round12(x))
    }
}

fn float(x: f64) -> Value {
    match Number::from_f64(round12(x)) {
        Some(n) => Value::Number(n),
        None => Value::String(fmt_num(x)),
    }
}

fn key(raw: Raw) -> String {
    match to_json(raw) {
        Value::String(s) => s,
        other => other.to_string(),
    }
}

fn to_json(raw: Raw) -> Value {
    match raw {
        Raw::Bool(b) => Value::Bool(b),
        Raw::U8(n) => n.into(),
        Raw::U16(n) => n.into(),
        Raw::U32(n) => n.into(),
        Raw::U64(n) => n.into(),
        Raw::I8(n) => n.into(),
        Raw::I16(n) => n.into(),
        Raw::I32(n) => n.into(),
        Raw::I64(n) => n.into(),
        Raw::F32(x) => float(x.into()),
        Raw::F64(x) => float(x),
        Raw::Char(c) => Value::String(c.into()),
        Raw::String(s) => Value::String(s),
        Raw::Unit | Raw::Option(None) => Value::Null,
        Raw::Option(Some(v)) | Raw::Newtype(v) => to_json(*v),
        Raw::Seq(items) => Value::Array(items.into_iter().map(to_json).collect()),
        Raw::Map(entries) => Value::Object(
            entries
                .into_iter()
                .map(|(k, v)| (key(k), to_json(v)))
                .collect::<Map<_, _>>(),
        ),
        Raw::Bytes(b) => Value::Array(b.into_iter().map(Value::from).collect()),
    }
}

/// JSON tree of `value` with rounded floats.
pub fn json<T: Serialize>(value: &T) -> Value {
    to_json(serde_value::to_value(value).expect("in-memory serialization cannot fail"))
}

/// Files produced by one run, written together and removed together if any
/// write fails.
#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn add(&mut self, name: &str, contents: Vec<u8>) {
        self.files.push((name.to_string(), contents));
    }

    pub fn add_json(&mut self, name: &str, value: &Value) {
        let mut text = serde_json::to_string_pretty(value).expect("JSON values serialize");
        text.push('\n');
        self.add(name, text.into_bytes());
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for (name, contents) in &self.files {
            let path = dir.join(name);
            if let Err(e) = fs::write(&path, contents) {
                for p in &written {
                    let _ = fs::remove_file(p);
                }
                return Err(e);
            }
            written.push(path);
        }
        Ok(written)
    }
}

/// CSV table with a fixed header; cells are preformatted strings.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).expect("writing to memory");
        Table { writer }
    }

    pub fn row<I, S>(&mut self, cells: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(cells).expect("writing to memory");
    }

    pub fn finish(self) -> Vec<u8> {
        self.writer.into_inner().expect("flushing to memory")
    }
}
