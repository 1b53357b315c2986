use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LABEL_COLUMN: &str = "label";

/// Vocabulary of one categorical field. The OOV bucket is index `values.len()`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "VocabRepr")]
pub struct FieldVocab {
    pub name: String,
    pub values: Vec<String>,
    #[serde(skip)]
    lookup: HashMap<String, u32>,
}

#[derive(Deserialize)]
struct VocabRepr {
    name: String,
    values: Vec<String>,
}

impl From<VocabRepr> for FieldVocab {
    fn from(r: VocabRepr) -> Self {
        FieldVocab::new(r.name, r.values)
    }
}

impl PartialEq for FieldVocab {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.values == other.values
    }
}

impl FieldVocab {
    pub fn new(name: impl Into<String>, values: Vec<String>) -> Self {
        let lookup = values.iter().enumerate().map(|(i, v)| (v.clone(), i as u32)).collect();
        Self {
            name: name.into(),
            values,
            lookup,
        }
    }

    pub fn oov_index(&self) -> u32 {
        self.values.len() as u32
    }

    /// Embedding rows needed by this field: every value plus the OOV bucket.
    pub fn rows(&self) -> usize {
        self.values.len() + 1
    }

    pub fn index_of(&self, value: &str) -> u32 {
        self.lookup.get(value).copied().unwrap_or(self.oov_index())
    }

    pub fn value_of(&self, index: u32) -> Option<&str> {
        self.values.get(index as usize).map(String::as_str)
    }
}

/// Ordered categorical fields with their vocabularies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSchema {
    pub fields: Vec<FieldVocab>,
    pub min_freq: u64,
}

/// One labelled example: a field index per field.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Instance {
    pub label: u8,
    pub indices: Vec<u32>,
}

impl FieldSchema {
    pub fn new(fields: Vec<FieldVocab>, min_freq: u64) -> Result<Self> {
        if fields.len() < 2 {
            return Err(Error::Schema(format!(
                "at least two fields are required, got {}",
                fields.len()
            )));
        }
        Ok(Self { fields, min_freq })
    }

    pub fn num_fields(&self) -> usize {
        self.fields.len()
    }

    /// Embedding rows per field (vocab size + OOV bucket).
    pub fn field_rows(&self) -> Vec<usize> {
        self.fields.iter().map(FieldVocab::rows).collect()
    }

    /// Σ over fields of (vocab size + 1).
    pub fn total_features(&self) -> usize {
        self.field_rows().iter().sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let schema: FieldSchema = serde_json::from_str(text)?;
        if schema.fields.len() < 2 {
            return Err(Error::Schema("schema has fewer than two fields".into()));
        }
        Ok(schema)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Encode one CSV row (`label,v1,...,vm`). Unseen values go to the OOV bucket.
    pub fn encode_instance(&self, row: &str) -> Result<Instance> {
        let cols: Vec<&str> = row.trim_end_matches(['\r', '\n']).split(',').collect();
        self.encode_columns(&cols)
    }

    pub fn encode_columns(&self, cols: &[&str]) -> Result<Instance> {
        if cols.len() != self.fields.len() + 1 {
            return Err(Error::Schema(format!(
                "expected {} columns, got {}",
                self.fields.len() + 1,
                cols.len()
            )));
        }
        let label = parse_label(cols[0])?;
        let indices = self.fields.iter().zip(&cols[1..]).map(|(f, v)| f.index_of(v)).collect();
        Ok(Instance { label, indices })
    }

    /// Inverse of encoding for in-vocabulary indices; OOV indices give `None`.
    pub fn decode_instance(&self, instance: &Instance) -> Vec<Option<&str>> {
        self.fields
            .iter()
            .zip(&instance.indices)
            .map(|(f, &i)| f.value_of(i))
            .collect()
    }

    /// Validate that every index addresses an embedding row.
    pub fn check_instance(&self, instance: &Instance) -> Result<()> {
        if instance.indices.len() != self.fields.len() {
            return Err(Error::Schema(format!(
                "instance has {} indices for {} fields",
                instance.indices.len(),
                self.fields.len()
            )));
        }
        for (field, (f, &i)) in self.fields.iter().zip(&instance.indices).enumerate() {
            if i as usize >= f.rows() {
                return Err(Error::Lookup {
                    field,
                    index: i,
                    rows: f.rows(),
                });
            }
        }
        Ok(())
    }
}

fn parse_label(s: &str) -> Result<u8> {
    match s.trim() {
        "0" => Ok(0),
        "1" => Ok(1),
        other => Err(Error::Schema(format!("label must be 0 or 1, got `{other}`"))),
    }
}

fn parse_header(line: &str) -> Result<Vec<String>> {
    let cols: Vec<&str> = line.trim_end_matches(['\r', '\n']).split(',').collect();
    if cols.first().map(|c| c.trim()) != Some(LABEL_COLUMN) {
        return Err(Error::Parse {
            line: 1,
            msg: format!("header must start with `{LABEL_COLUMN}`"),
        });
    }
    let names: Vec<String> = cols[1..].iter().map(|c| c.trim().to_owned()).collect();
    if names.len() < 2 {
        return Err(Error::Schema(format!(
            "at least two fields are required, got {}",
            names.len()
        )));
    }
    Ok(names)
}

fn at_line(line: usize, err: Error) -> Error {
    match err {
        Error::Schema(msg) => Error::Parse { line, msg },
        other => other,
    }
}

/// Build vocabularies from a CSV file with header `label,f1,...,fm`.
pub fn build_vocab(csv_path: &Path, min_freq: u64) -> Result<FieldSchema> {
    build_vocab_from_reader(File::open(csv_path)?, min_freq)
}

/// Values seen fewer than `min_freq` times map to the OOV bucket. Retained
/// values are indexed in lexicographic order so the result does not depend on
/// row order.
pub fn build_vocab_from_reader<R: Read>(reader: R, min_freq: u64) -> Result<FieldSchema> {
    let mut lines = BufReader::new(reader).lines();
    let header = lines.next().ok_or_else(|| Error::Parse {
        line: 1,
        msg: "empty file".into(),
    })??;
    let names = parse_header(&header)?;
    let m = names.len();
    let mut counts: Vec<BTreeMap<String, u64>> = vec![BTreeMap::new(); m];

    for (k, line) in lines.enumerate() {
        let line_no = k + 2;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != m + 1 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected {} columns, got {}", m + 1, cols.len()),
            });
        }
        parse_label(cols[0]).map_err(|e| at_line(line_no, e))?;
        for (field, value) in counts.iter_mut().zip(&cols[1..]) {
            *field.entry((*value).to_owned()).or_insert(0) += 1;
        }
    }

    let fields = names
        .into_iter()
        .zip(counts)
        .map(|(name, c)| {
            let values = c.into_iter().filter(|&(_, n)| n >= min_freq).map(|(v, _)| v).collect();
            FieldVocab::new(name, values)
        })
        .collect();
    FieldSchema::new(fields, min_freq)
}

/// Encode every data row of a CSV file against `schema`.
pub fn load_instances(csv_path: &Path, schema: &FieldSchema) -> Result<Vec<Instance>> {
    load_instances_from_reader(File::open(csv_path)?, schema)
}

pub fn load_instances_from_reader<R: Read>(reader: R, schema: &FieldSchema) -> Result<Vec<Instance>> {
    let mut lines = BufReader::new(reader).lines();
    let header = lines.next().ok_or_else(|| Error::Parse {
        line: 1,
        msg: "empty file".into(),
    })??;
    let names = parse_header(&header)?;
    if names.len() != schema.num_fields() {
        return Err(Error::Schema(format!(
            "file has {} fields, schema has {}",
            names.len(),
            schema.num_fields()
        )));
    }
    let mut out = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line?;
        if line.trim_end_matches('\r').is_empty() {
            continue;
        }
        out.push(schema.encode_instance(&line).map_err(|e| at_line(k + 2, e))?);
    }
    Ok(out)
}

/// Render instances back to CSV text using the schema's value strings.
/// OOV indices are written as `__oov__`.
pub fn instances_to_csv(schema: &FieldSchema, instances: &[Instance]) -> String {
    let mut out = String::from(LABEL_COLUMN);
    for f in &schema.fields {
        out.push(',');
        out.push_str(&f.name);
    }
    out.push('\n');
    for inst in instances {
        out.push_str(if inst.label == 1 { "1" } else { "0" });
        for v in schema.decode_instance(inst) {
            out.push(',');
            out.push_str(v.unwrap_or("__oov__"));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vocab(text: &str, min_freq: u64) -> Result<FieldSchema> {
        build_vocab_from_reader(text.as_bytes(), min_freq)
    }

    #[test]
    fn threshold_sends_rare_values_to_oov() {
        let s = vocab("label,f,g\n1,a,x\n0,a,x\n1,b,x\n", 2).unwrap();
        assert_eq!(s.fields[0].values, ["a"]);
        assert_eq!(s.fields[0].oov_index(), 1);
        assert_eq!(s.fields[0].index_of("b"), 1);
    }

    #[test]
    fn zero_threshold_keeps_everything() {
        let s = vocab("label,f,g\n1,a,x\n0,a,y\n1,b,z\n", 0).unwrap();
        assert_eq!(s.fields[0].values, ["a", "b"]);
        assert_eq!(s.fields[1].values, ["x", "y", "z"]);
        assert_eq!(s.total_features(), 3 + 4);
    }

    #[test]
    fn feature_count_of_two_ten_value_fields() {
        let mut text = String::from("label,f,g\n");
        for r in 0..1000 {
            text.push_str(&format!("{},a{},b{}\n", r % 2, r % 10, (r / 10) % 10));
        }
        let s = vocab(&text, 0).unwrap();
        assert_eq!(s.total_features(), 22);
    }

    #[test]
    fn malformed_row_reports_line_number() {
        match vocab("label,f,g\n1,a,b\n0,a\n", 0) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        match vocab("label,f,g\n1,a,b\n2,a,b\n", 0) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn single_field_is_a_schema_error() {
        assert!(matches!(vocab("label,f\n1,a\n", 0), Err(Error::Schema(_))));
    }

    #[test]
    fn encode_known_unknown_and_label() {
        let s = vocab("label,f,g\n1,a,x\n0,b,y\n", 0).unwrap();
        let i = s.encode_instance("1,b,x").unwrap();
        assert_eq!(
            i,
            Instance {
                label: 1,
                indices: vec![1, 0]
            }
        );
        let j = s.encode_instance("0,zzz,y").unwrap();
        assert_eq!(j.indices, vec![2, 1]);
        assert_eq!(j.label, 0);
        assert!(s.encode_instance("1,a").is_err());
    }

    #[test]
    fn schema_json_round_trip() {
        let s = vocab("label,f,g\n1,a,x\n0,b,y\n", 0).unwrap();
        let back = FieldSchema::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.fields[1].index_of("y"), 1);
        let v: serde_json::Value = serde_json::from_str(&s.to_json().unwrap()).unwrap();
        assert!(v["fields"][0]["name"].is_string());
        assert!(v["fields"][0]["values"].is_array());
        assert_eq!(v["min_freq"], 0);
    }

    proptest! {
        #[test]
        fn encode_decode_round_trips_in_vocab(picks in prop::collection::vec((0usize..5, 0usize..3), 1..20)) {
            let f = FieldVocab::new("f", (0..5).map(|i| format!("v{i}")).collect());
            let g = FieldVocab::new("g", (0..3).map(|i| format!("w{i}")).collect());
            let s = FieldSchema::new(vec![f, g], 0).unwrap();
            for (a, b) in picks {
                let row = format!("1,v{a},w{b}");
                let inst = s.encode_instance(&row).unwrap();
                let decoded = s.decode_instance(&inst);
                let expect_a = format!("v{a}");
                let expect_b = format!("w{b}");
                prop_assert_eq!(decoded, vec![Some(expect_a.as_str()), Some(expect_b.as_str())]);
            }
        }
    }
}
