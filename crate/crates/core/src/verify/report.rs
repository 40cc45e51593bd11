//! Verification reports: records, summaries, JSON/CSV emission, parsing,
//! merging and a structural schema check.
//!
//! Floats are written with 17 significant digits; non-finite values are
//! written as the strings `"inf"`, `"-inf"` and `"nan"`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

use crate::error::{Error, Result};

/// JSON schema of the report format.
pub const REPORT_SCHEMA: &str = include_str!("../../schema/report.schema.json");

/// An `f64` that survives JSON even when not finite.
#[derive(Clone, Copy, Debug, Default, PartialEq, PartialOrd)]
pub struct Num(pub f64);

impl From<f64> for Num {
    fn from(v: f64) -> Self {
        Num(v)
    }
}

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let v = self.0;
        if v.is_finite() {
            s.serialize_f64(v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Num;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or one of \"inf\", \"-inf\", \"nan\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Num, E> {
                Ok(Num(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Num, E> {
                Ok(Num(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Num, E> {
                Ok(Num(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Num, E> {
                match v {
                    "inf" => Ok(Num(f64::INFINITY)),
                    "-inf" => Ok(Num(f64::NEG_INFINITY)),
                    "nan" => Ok(Num(f64::NAN)),
                    _ => Err(E::custom(format!("bad number `{v}`"))),
                }
            }
        }
        d.deserialize_any(V)
    }
}

fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Space-time cylinder a record refers to.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordCylinder {
    pub center: [f64; 3],
    pub t0: f64,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    /// Identifies the record within one resolution level.
    pub key: String,
    /// Lattice points per axis of the run the record came from.
    pub level: u64,
    pub cylinder: Option<RecordCylinder>,
    pub gamma: Num,
    pub lhs: Num,
    pub rhs_terms: Vec<Num>,
    pub constant: Num,
    pub pass: Option<bool>,
    #[serde(default)]
    pub extra: BTreeMap<String, Num>,
}

impl Record {
    pub fn new(key: impl Into<String>, level: u64) -> Self {
        Self {
            key: key.into(),
            level,
            cylinder: None,
            gamma: Num(0.0),
            lhs: Num(0.0),
            rhs_terms: Vec::new(),
            constant: Num(0.0),
            pass: None,
            extra: BTreeMap::new(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub records: u64,
    pub max_constant: Num,
    pub median_constant: Num,
    /// `|max_fine - max_coarse| / max_coarse` when two levels are present.
    pub refinement_delta: Option<Num>,
    pub pass: bool,
    #[serde(default)]
    pub flags: BTreeMap<String, bool>,
    #[serde(default)]
    pub extra: BTreeMap<String, Num>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub check: String,
    pub trajectory_hash: String,
    pub ensemble_seed: u64,
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
    #[serde(default)]
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub meta: ReportMeta,
    pub records: Vec<Record>,
    pub summary: Summary,
}

fn by_key(a: &Record, b: &Record) -> std::cmp::Ordering {
    (a.level, &a.key).cmp(&(b.level, &b.key))
}

impl VerificationReport {
    /// Sorts records and recomputes the summary; extra summary flags and
    /// values are kept.
    pub fn new(meta: ReportMeta, mut records: Vec<Record>) -> Self {
        records.sort_by(by_key);
        let mut r = Self { meta, records, summary: Summary::default() };
        r.summarize();
        r
    }

    pub fn summarize(&mut self) {
        let mut cs: Vec<f64> = self.records.iter().map(|r| r.constant.0).filter(|c| !c.is_nan()).collect();
        cs.sort_by(|a, b| a.total_cmp(b));
        let max = cs.last().copied().unwrap_or(0.0);
        let median = if cs.is_empty() {
            0.0
        } else if cs.len() % 2 == 1 {
            cs[cs.len() / 2]
        } else {
            0.5 * (cs[cs.len() / 2 - 1] + cs[cs.len() / 2])
        };
        self.summary.records = self.records.len() as u64;
        self.summary.max_constant = Num(max);
        self.summary.median_constant = Num(median);
        self.summary.refinement_delta = refinement_delta(&self.records).map(Num);
        let records_ok = self.records.iter().all(|r| r.pass.unwrap_or(true));
        self.summary.pass = records_ok && self.summary.flags.values().all(|f| *f);
    }

    /// Adds a pass flag that gates `summary.pass`.
    pub fn flag(&mut self, name: &str, ok: bool) {
        self.summary.flags.insert(name.to_string(), ok);
        self.summarize();
    }

    pub fn to_json(&self) -> Result<String> {
        let mut out = Vec::new();
        let mut ser = serde_json::Serializer::with_formatter(&mut out, FixedFormatter::default());
        self.serialize(&mut ser)?;
        out.push(b'\n');
        String::from_utf8(out).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text)?;
        schema_check(&v, &serde_json::from_str(REPORT_SCHEMA)?)?;
        Ok(serde_json::from_value(v)?)
    }

    /// One row per record.
    pub fn to_csv(&self) -> Result<String> {
        let width = self.records.iter().map(|r| r.rhs_terms.len()).max().unwrap_or(0);
        let extras: BTreeSet<&String> = self.records.iter().flat_map(|r| r.extra.keys()).collect();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> =
            ["check", "key", "level", "cx", "cy", "cz", "t0", "radius", "gamma", "lhs"].map(String::from).to_vec();
        header.extend((0..width).map(|i| format!("rhs_{i}")));
        header.extend(["constant", "pass"].map(String::from));
        header.extend(extras.iter().map(|s| s.to_string()));
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![self.meta.check.clone(), r.key.clone(), r.level.to_string()];
            match r.cylinder {
                Some(c) => {
                    row.extend(c.center.iter().map(|v| fmt_float(*v)));
                    row.push(fmt_float(c.t0));
                    row.push(fmt_float(c.radius));
                }
                None => row.extend(std::iter::repeat(String::new()).take(5)),
            }
            row.push(fmt_float(r.gamma.0));
            row.push(fmt_float(r.lhs.0));
            for i in 0..width {
                row.push(r.rhs_terms.get(i).map(|v| fmt_float(v.0)).unwrap_or_default());
            }
            row.push(fmt_float(r.constant.0));
            row.push(r.pass.map(|p| p.to_string()).unwrap_or_default());
            for k in &extras {
                row.push(r.extra.get(*k).map(|v| fmt_float(v.0)).unwrap_or_default());
            }
            w.write_record(&row)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
    }
}

/// Output format of [`emit_report`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

pub fn emit_report(report: &VerificationReport, path: &Path, format: ReportFormat) -> Result<()> {
    let text = match format {
        ReportFormat::Json => report.to_json()?,
        ReportFormat::Csv => report.to_csv()?,
    };
    let mut f = std::fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

pub fn parse_report(path: &Path) -> Result<VerificationReport> {
    VerificationReport::from_json(&std::fs::read_to_string(path)?)
}

/// `|max_fine - max_coarse| / max_coarse` over the two finest levels present.
fn refinement_delta(records: &[Record]) -> Option<f64> {
    let levels: BTreeSet<u64> = records.iter().map(|r| r.level).collect();
    if levels.len() < 2 {
        return None;
    }
    let mut it = levels.iter().rev();
    let fine = *it.next()?;
    let coarse = *it.next()?;
    let max_at = |l: u64| {
        records.iter().filter(|r| r.level == l).map(|r| r.constant.0).filter(|c| !c.is_nan()).fold(0.0, f64::max)
    };
    let (a, b) = (max_at(coarse), max_at(fine));
    Some(if a > 0.0 { (b - a).abs() / a } else { (b - a).abs() })
}

/// Merges reports of one check: duplicate `(level, key)` records are dropped
/// (first wins), records matched by key across levels get a
/// `refinement_delta` extra column.
pub fn merge_reports(reports: &[VerificationReport]) -> Result<VerificationReport> {
    let Some(first) = reports.first() else {
        return Ok(VerificationReport::new(ReportMeta::default(), Vec::new()));
    };
    if reports.iter().any(|r| r.meta.check != first.meta.check) {
        return Err(Error::Format("cannot merge reports of different checks".into()));
    }
    let mut seen = BTreeSet::new();
    let mut records = Vec::new();
    for r in reports {
        for rec in &r.records {
            if seen.insert((rec.level, rec.key.clone())) {
                records.push(rec.clone());
            }
        }
    }
    let levels: BTreeSet<u64> = records.iter().map(|r| r.level).collect();
    if levels.len() >= 2 {
        let coarse: BTreeMap<String, f64> = {
            let lo = *levels.iter().next().unwrap_or(&0);
            records.iter().filter(|r| r.level == lo).map(|r| (r.key.clone(), r.constant.0)).collect()
        };
        let lo = *levels.iter().next().unwrap_or(&0);
        for rec in records.iter_mut().filter(|r| r.level != lo) {
            if let Some(&c) = coarse.get(&rec.key) {
                let d = if c != 0.0 { (rec.constant.0 - c) / c } else { rec.constant.0 - c };
                rec.extra.insert("refinement_delta".into(), Num(d));
            }
        }
    }
    let mut meta = first.meta.clone();
    let mut hashes: Vec<String> = reports.iter().map(|r| r.meta.trajectory_hash.clone()).collect();
    hashes.sort();
    hashes.dedup();
    meta.trajectory_hash = hashes.join(",");
    let mut out = VerificationReport::new(meta, records);
    for r in reports {
        for (k, v) in &r.summary.flags {
            let cur = out.summary.flags.get(k).copied().unwrap_or(true);
            out.summary.flags.insert(k.clone(), cur && *v);
        }
    }
    out.summarize();
    Ok(out)
}

/// Checks `value` against the subset of JSON Schema used by
/// [`REPORT_SCHEMA`]: `type` (string or list), `required`, `properties`,
/// `additionalProperties` (schema form), `items`, `enum`.
pub fn schema_check(value: &Value, schema: &Value) -> Result<()> {
    check_at(value, schema, "$")
}

fn type_matches(v: &Value, t: &str) -> bool {
    match t {
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "number" => v.is_number(),
        "integer" => v.is_u64() || v.is_i64(),
        "boolean" => v.is_boolean(),
        "null" => v.is_null(),
        _ => false,
    }
}

fn check_at(v: &Value, s: &Value, path: &str) -> Result<()> {
    let fail = |msg: String| Err(Error::Format(format!("schema: {path}: {msg}")));
    if let Some(t) = s.get("type") {
        let ok = match t {
            Value::String(t) => type_matches(v, t),
            Value::Array(ts) => ts.iter().filter_map(|t| t.as_str()).any(|t| type_matches(v, t)),
            _ => false,
        };
        if !ok {
            return fail(format!("expected type {t}"));
        }
    }
    if let Some(Value::Array(choices)) = s.get("enum") {
        if !choices.contains(v) {
            return fail(format!("{v} not in enum"));
        }
    }
    if let (Some(obj), true) = (v.as_object(), s.is_object()) {
        if let Some(Value::Array(req)) = s.get("required") {
            for r in req.iter().filter_map(|r| r.as_str()) {
                if !obj.contains_key(r) {
                    return fail(format!("missing `{r}`"));
                }
            }
        }
        let props = s.get("properties").and_then(|p| p.as_object());
        for (k, child) in obj {
            match props.and_then(|p| p.get(k)) {
                Some(ps) => check_at(child, ps, &format!("{path}.{k}"))?,
                None => match s.get("additionalProperties") {
                    Some(Value::Bool(false)) => return fail(format!("unexpected `{k}`")),
                    Some(extra @ Value::Object(_)) => check_at(child, extra, &format!("{path}.{k}"))?,
                    _ => {}
                },
            }
        }
    }
    if let (Some(items), Some(schema)) = (v.as_array(), s.get("items")) {
        for (i, it) in items.iter().enumerate() {
            check_at(it, schema, &format!("{path}[{i}]"))?;
        }
    }
    Ok(())
}

/// Compact JSON with `{:.16e}` floats.
#[derive(Default)]
struct FixedFormatter;

impl serde_json::ser::Formatter for FixedFormatter {
    fn write_f64<W: ?Sized + std::io::Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        writer.write_all(fmt_float(value).as_bytes())
    }
}
