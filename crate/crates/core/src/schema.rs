//! Survey schema, CSV ingestion and dataset profiling.
//!
//! The schema is declared once in [`SURVEY_COLUMNS`]: every column of the
//! household survey with its role and the number of missing cells the
//! published file is expected to carry. Column names use the data
//! dictionary's spellings; where the published CSV header spells a column
//! differently (lower-case `rooms`, `pisoother`, ...) that spelling is an
//! exact alias.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Id,
    Binary,
    Discrete,
    Continuous,
    Squared,
    Target,
}

impl Role {
    pub fn is_numeric(self) -> bool {
        !matches!(self, Role::Id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub role: Role,
    pub expected_missing: Option<usize>,
    /// Spelling used by the published CSV header when it differs from `name`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alias: Option<String>,
}

impl VariableSpec {
    /// The spelling downstream feature names use.
    pub fn feature_name(&self) -> &str {
        self.alias.as_deref().unwrap_or(&self.name)
    }
}

use Role::*;

/// (name, role, expected missing cells, published-file alias)
#[rustfmt::skip]
pub const SURVEY_COLUMNS: &[(&str, Role, Option<usize>, Option<&str>)] = &[
    ("Id", Id, Some(0), None),
    ("v2a1", Continuous, Some(6860), None),
    ("hacdor", Binary, Some(0), None),
    ("Rooms", Discrete, Some(0), Some("rooms")),
    ("hacapo", Binary, Some(0), None),
    ("v14a", Binary, Some(0), None),
    ("Refrig", Binary, Some(0), Some("refrig")),
    ("v18q", Binary, Some(0), None),
    ("v18q1", Discrete, Some(7342), None),
    ("r4h1", Discrete, Some(0), None),
    ("r4h2", Discrete, Some(0), None),
    ("r4h3", Discrete, Some(0), None),
    ("r4m1", Discrete, Some(0), None),
    ("r4m2", Discrete, Some(0), None),
    ("r4m3", Discrete, Some(0), None),
    ("r4t1", Discrete, Some(0), None),
    ("r4t2", Discrete, Some(0), None),
    ("r4t3", Discrete, Some(0), None),
    ("tamhog", Discrete, Some(0), None),
    ("tamviv", Discrete, Some(0), None),
    ("escolari", Discrete, Some(0), None),
    // Listed with 0 missing in the data dictionary, but the published file
    // leaves it blank outside school age; not asserted.
    ("rez_esc", Discrete, None, None),
    ("Hhsize", Discrete, Some(0), Some("hhsize")),
    ("paredblolad", Binary, Some(0), None),
    ("paredzocalo", Binary, Some(0), None),
    ("paredpreb", Binary, Some(0), None),
    ("pareddes", Binary, Some(0), None),
    ("paredmad", Binary, Some(0), None),
    ("paredzinc", Binary, Some(0), None),
    ("paredfibras", Binary, Some(0), None),
    ("paredother", Binary, Some(0), None),
    ("pisomoscer", Binary, Some(0), None),
    ("pisocemento", Binary, Some(0), None),
    ("pisooother", Binary, Some(0), Some("pisoother")),
    ("pcionatur", Binary, Some(0), Some("pisonatur")),
    ("pcionotiene", Binary, Some(0), Some("pisonotiene")),
    ("pisomadera", Binary, Some(0), None),
    ("techozinc", Binary, Some(0), None),
    ("techoentrepiso", Binary, Some(0), None),
    ("techocane", Binary, Some(0), None),
    ("techootro", Binary, Some(0), None),
    ("cielorazo", Binary, Some(0), None),
    ("abastaguadentro", Binary, Some(0), None),
    ("abastaguafuera", Binary, Some(0), None),
    ("abastaguano", Binary, Some(0), None),
    ("Public", Binary, Some(0), Some("public")),
    ("planpri", Binary, Some(0), None),
    ("noelec", Binary, Some(0), None),
    ("coopele", Binary, Some(0), None),
    ("sanitario1", Binary, Some(0), None),
    ("sanitario2", Binary, Some(0), None),
    ("sanitario3", Binary, Some(0), None),
    ("sanitario5", Binary, Some(0), None),
    ("sanitario6", Binary, Some(0), None),
    ("energcocinar1", Binary, Some(0), None),
    ("energcocinar2", Binary, Some(0), None),
    ("energcocinar3", Binary, Some(0), None),
    ("energcocinar4", Binary, Some(0), None),
    ("elimbasu1", Binary, Some(0), None),
    ("elimbasu2", Binary, Some(0), None),
    ("elimbasu3", Binary, Some(0), None),
    ("elimbasu4", Binary, Some(0), None),
    ("elimbasu5", Binary, Some(0), None),
    ("elimbasu6", Binary, Some(0), None),
    ("epared1", Binary, Some(0), None),
    ("epared2", Binary, Some(0), None),
    ("epared3", Binary, Some(0), None),
    ("etecho1", Binary, Some(0), None),
    ("etecho2", Binary, Some(0), None),
    ("etecho3", Binary, Some(0), None),
    ("eviv1", Binary, Some(0), None),
    ("eviv2", Binary, Some(0), None),
    ("eviv3", Binary, Some(0), None),
    ("Dis", Binary, Some(0), Some("dis")),
    ("Male", Binary, Some(0), Some("male")),
    ("female", Binary, Some(0), None),
    ("estadocivil1", Binary, Some(0), None),
    ("estadocivil2", Binary, Some(0), None),
    ("estadocivil3", Binary, Some(0), None),
    ("estadocivil4", Binary, Some(0), None),
    ("estadocivil5", Binary, Some(0), None),
    ("estadocivil6", Binary, Some(0), None),
    ("estadocivil7", Binary, Some(0), None),
    ("parentesco1", Binary, Some(0), None),
    ("parentesco2", Binary, Some(0), None),
    ("parentesco3", Binary, Some(0), None),
    ("parentesco4", Binary, Some(0), None),
    ("parentesco5", Binary, Some(0), None),
    ("parentesco6", Binary, Some(0), None),
    ("parentesco7", Binary, Some(0), None),
    ("parentesco8", Binary, Some(0), None),
    ("parentesco9", Binary, Some(0), None),
    ("parentesco10", Binary, Some(0), None),
    ("parentesco11", Binary, Some(0), None),
    ("parentesco12", Binary, Some(0), None),
    ("idhogar", Id, Some(0), None),
    ("hogar_nin", Discrete, Some(0), None),
    ("hogar_adul", Discrete, Some(0), None),
    ("hogar_mayor", Discrete, Some(0), None),
    ("hogar_total", Discrete, Some(0), None),
    ("dependency", Continuous, Some(2192), None),
    ("Edjefe", Discrete, Some(123), Some("edjefe")),
    ("Edjefa", Discrete, Some(69), Some("edjefa")),
    ("meaneduc", Continuous, Some(5), None),
    ("instlevel1", Binary, Some(0), None),
    ("instlevel2", Binary, Some(0), None),
    ("instlevel3", Binary, Some(0), None),
    ("instlevel4", Binary, Some(0), None),
    ("instlevel5", Binary, Some(0), None),
    ("instlevel6", Binary, Some(0), None),
    ("instlevel7", Binary, Some(0), None),
    ("instlevel8", Binary, Some(0), None),
    ("instlevel9", Binary, Some(0), None),
    ("bedrooms", Discrete, Some(0), None),
    ("overcrowding", Continuous, Some(0), None),
    ("tipovivi1", Binary, Some(0), None),
    ("tipovivi2", Binary, Some(0), None),
    ("tipovivi3", Binary, Some(0), None),
    ("tipovivi4", Binary, Some(0), None),
    ("tipovivi5", Binary, Some(0), None),
    ("computer", Binary, Some(0), None),
    ("television", Binary, Some(0), None),
    ("mobilephone", Binary, Some(0), None),
    ("qmobilephone", Discrete, Some(0), None),
    ("lugar1", Binary, Some(0), None),
    ("lugar2", Binary, Some(0), None),
    ("lugar3", Binary, Some(0), None),
    ("lugar4", Binary, Some(0), None),
    ("lugar5", Binary, Some(0), None),
    ("lugar6", Binary, Some(0), None),
    ("area1", Binary, Some(0), None),
    ("area2", Binary, Some(0), None),
    ("Age", Discrete, Some(0), Some("age")),
    ("SQBescolari", Squared, Some(0), None),
    ("SQBage", Squared, Some(0), None),
    ("SQBhogar_total", Squared, Some(0), None),
    ("SQBedjefe", Squared, Some(0), None),
    ("SQBhogar_nin", Squared, Some(0), None),
    ("SQBovercrowding", Squared, Some(0), None),
    ("SQBdependency", Squared, Some(0), None),
    ("SQBmeaned", Squared, Some(5), None),
    ("Agesq", Squared, Some(0), Some("agesq")),
    ("Target", Target, Some(0), None),
];

/// Ordered column declarations with unique names and exactly one target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<VariableSpec>", into = "Vec<VariableSpec>")]
pub struct Schema {
    columns: Vec<VariableSpec>,
    #[serde(skip)]
    index: HashMap<String, usize>,
    #[serde(skip)]
    target: usize,
}

impl Schema {
    pub fn new(columns: Vec<VariableSpec>) -> Result<Self> {
        let mut index = HashMap::with_capacity(columns.len() * 2);
        for (i, c) in columns.iter().enumerate() {
            if index.insert(c.name.clone(), i).is_some() {
                return Err(Error::InvalidParameter(format!("duplicate column {}", c.name)));
            }
        }
        for (i, c) in columns.iter().enumerate() {
            if let Some(alias) = &c.alias {
                match index.get(alias) {
                    Some(&j) if j != i => {
                        return Err(Error::InvalidParameter(format!("alias {alias} collides with a column")));
                    }
                    _ => {
                        index.insert(alias.clone(), i);
                    }
                }
            }
        }
        let targets: Vec<usize> = columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.role == Role::Target)
            .map(|(i, _)| i)
            .collect();
        if targets.len() != 1 {
            return Err(Error::InvalidParameter(format!(
                "schema must declare exactly one target, found {}",
                targets.len()
            )));
        }
        Ok(Self {
            columns,
            index,
            target: targets[0],
        })
    }

    /// The 143-column household survey schema.
    pub fn survey() -> Self {
        let columns = SURVEY_COLUMNS
            .iter()
            .map(|&(name, role, expected_missing, alias)| VariableSpec {
                name: name.to_string(),
                role,
                expected_missing,
                alias: alias.map(str::to_string),
            })
            .collect();
        Self::new(columns).expect("embedded survey schema is valid")
    }

    pub fn columns(&self) -> &[VariableSpec] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// Resolves a column by its name or its alias (exact, case-sensitive).
    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn column(&self, name: &str) -> Option<&VariableSpec> {
        self.position(name).map(|i| &self.columns[i])
    }

    pub fn target_index(&self) -> usize {
        self.target
    }
}

impl TryFrom<Vec<VariableSpec>> for Schema {
    type Error = Error;
    fn try_from(columns: Vec<VariableSpec>) -> Result<Self> {
        Schema::new(columns)
    }
}

impl From<Schema> for Vec<VariableSpec> {
    fn from(s: Schema) -> Self {
        s.columns
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Number(f64),
    Text(String),
    Missing,
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Number(v) => Some(*v),
            _ => None,
        }
    }

    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }
}

/// How "yes"/"no" tokens in numeric columns are read.
///
/// The published file mixes these tokens into `dependency`, `edjefe` and
/// `edjefa`. Under [`YesNoPolicy::YesMissing`] a "no" reads as 0 and a "yes"
/// is treated as missing, which reproduces the data dictionary's missing
/// counts for those columns. [`YesNoPolicy::YesOne`] reads them as 1/0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YesNoPolicy {
    #[default]
    YesMissing,
    YesOne,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadOptions {
    #[serde(default)]
    pub yes_no: YesNoPolicy,
}

/// Parsed survey rows, one cell per schema column in schema order.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    schema: Schema,
    rows: Vec<Vec<Cell>>,
}

impl RawTable {
    pub fn new(schema: Schema, rows: Vec<Vec<Cell>>) -> Result<Self> {
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != schema.len()) {
            return Err(Error::RowArity {
                line: i as u64 + 2,
                expected: schema.len(),
                found: r.len(),
            });
        }
        Ok(Self { schema, rows })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.schema.len()
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn cell(&self, row: usize, column: &str) -> Option<&Cell> {
        self.schema.position(column).map(|c| &self.rows[row][c])
    }
}

fn parse_cell(raw: &str, role: Role, policy: YesNoPolicy) -> Cell {
    let s = raw.trim();
    if s.is_empty() {
        return Cell::Missing;
    }
    if !role.is_numeric() {
        return Cell::Text(s.to_string());
    }
    match (s, policy) {
        ("no", _) => return Cell::Number(0.0),
        ("yes", YesNoPolicy::YesOne) => return Cell::Number(1.0),
        ("yes", YesNoPolicy::YesMissing) => return Cell::Missing,
        _ => {}
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Cell::Number(v),
        _ => Cell::Missing,
    }
}

/// Loads a survey CSV with the default token policy.
pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<RawTable> {
    load_csv_with(path, schema, LoadOptions::default())
}

pub fn load_csv_with(path: impl AsRef<Path>, schema: &Schema, options: LoadOptions) -> Result<RawTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    read_csv(file, schema, options)
}

/// Parses CSV from any reader. The header may list columns in any order.
pub fn read_csv<R: Read>(reader: R, schema: &Schema, options: LoadOptions) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers()?.clone();

    let mut mapping = Vec::with_capacity(header.len());
    let mut seen = vec![false; schema.len()];
    let mut unknown = Vec::new();
    for name in header.iter() {
        match schema.position(name) {
            Some(i) if !seen[i] => {
                seen[i] = true;
                mapping.push(i);
            }
            _ => unknown.push(name.to_string()),
        }
    }
    let absent: Vec<String> = schema
        .columns()
        .iter()
        .zip(&seen)
        .filter(|(_, s)| !**s)
        .map(|(c, _)| c.name.clone())
        .collect();
    if !unknown.is_empty() || !absent.is_empty() {
        return Err(Error::HeaderMismatch { unknown, absent });
    }

    let roles: Vec<Role> = schema.columns().iter().map(|c| c.role).collect();
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        if record.len() != mapping.len() {
            return Err(Error::RowArity {
                line: record.position().map_or(0, |p| p.line()),
                expected: mapping.len(),
                found: record.len(),
            });
        }
        let mut row = vec![Cell::Missing; schema.len()];
        for (field, &col) in record.iter().zip(&mapping) {
            row[col] = parse_cell(field, roles[col], options.yes_no);
        }
        rows.push(row);
    }
    Ok(RawTable {
        schema: schema.clone(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetProfile {
    pub n_rows: usize,
    pub n_cols: usize,
    pub missing_by_column: BTreeMap<String, usize>,
    pub class_counts: BTreeMap<u32, usize>,
    pub urban_count: usize,
}

impl DatasetProfile {
    pub fn class_share(&self, class: u32) -> f64 {
        share(self.class_counts.get(&class).copied().unwrap_or(0), self.n_rows)
    }

    pub fn urban_share(&self) -> f64 {
        share(self.urban_count, self.n_rows)
    }

    /// Columns whose missing count differs from the schema's expectation,
    /// as (column, expected, observed).
    pub fn missing_mismatches(&self, schema: &Schema) -> Vec<(String, usize, usize)> {
        schema
            .columns()
            .iter()
            .filter_map(|c| {
                let expected = c.expected_missing?;
                let observed = self.missing_by_column.get(&c.name).copied().unwrap_or(0);
                (expected != observed).then(|| (c.name.clone(), expected, observed))
            })
            .collect()
    }
}

fn share(count: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        count as f64 / total as f64
    }
}

pub fn profile(table: &RawTable) -> DatasetProfile {
    let schema = table.schema();
    let mut missing = vec![0usize; schema.len()];
    let mut class_counts = BTreeMap::new();
    let target = schema.target_index();
    let area = schema.position("area1");
    let mut urban_count = 0;
    for row in table.rows() {
        for (m, cell) in missing.iter_mut().zip(row) {
            if cell.is_missing() {
                *m += 1;
            }
        }
        if let Some(t) = row[target].as_f64() {
            *class_counts.entry(t as u32).or_insert(0) += 1;
        }
        if area.and_then(|a| row[a].as_f64()) == Some(1.0) {
            urban_count += 1;
        }
    }
    DatasetProfile {
        n_rows: table.n_rows(),
        n_cols: table.n_cols(),
        missing_by_column: schema
            .columns()
            .iter()
            .zip(missing)
            .map(|(c, m)| (c.name.clone(), m))
            .collect(),
        class_counts,
        urban_count,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_schema() -> Schema {
        Schema::new(vec![
            VariableSpec {
                name: "Id".into(),
                role: Role::Id,
                expected_missing: Some(0),
                alias: None,
            },
            VariableSpec {
                name: "dependency".into(),
                role: Role::Continuous,
                expected_missing: None,
                alias: None,
            },
            VariableSpec {
                name: "area1".into(),
                role: Role::Binary,
                expected_missing: Some(0),
                alias: None,
            },
            VariableSpec {
                name: "Target".into(),
                role: Role::Target,
                expected_missing: Some(0),
                alias: None,
            },
        ])
        .unwrap()
    }

    #[test]
    fn survey_schema_shape() {
        let s = Schema::survey();
        assert_eq!(s.len(), 143);
        assert_eq!(s.columns().iter().filter(|c| c.role == Role::Target).count(), 1);
        assert_eq!(s.position("rooms"), s.position("Rooms"));
        assert_eq!(s.position("ROOMS"), None);
        assert_eq!(s.column("v2a1").unwrap().expected_missing, Some(6860));
    }

    #[test]
    fn header_only_gives_empty_table() {
        let t = read_csv(
            "Target,area1,dependency,Id\n".as_bytes(),
            &tiny_schema(),
            LoadOptions::default(),
        )
        .unwrap();
        assert_eq!(t.n_rows(), 0);
        assert_eq!(t.n_cols(), 4);
    }

    #[test]
    fn missing_target_column_is_header_mismatch() {
        let err = read_csv(
            "Id,dependency,area1\n".as_bytes(),
            &tiny_schema(),
            LoadOptions::default(),
        )
        .unwrap_err();
        match err {
            Error::HeaderMismatch { absent, unknown } => {
                assert_eq!(absent, vec!["Target".to_string()]);
                assert!(unknown.is_empty());
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn header_names_are_case_sensitive() {
        let err = read_csv(
            "id,dependency,area1,Target\n".as_bytes(),
            &tiny_schema(),
            LoadOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::HeaderMismatch { .. }));
    }

    #[test]
    fn wrong_arity_rejected() {
        let csv = "Id,dependency,area1,Target\nA,1,1\n";
        let err = read_csv(csv.as_bytes(), &tiny_schema(), LoadOptions::default()).unwrap_err();
        assert!(matches!(
            err,
            Error::RowArity {
                expected: 4,
                found: 3,
                ..
            }
        ));
    }

    #[test]
    fn yes_no_tokens() {
        let csv = "Id,dependency,area1,Target\nA,yes,1,4\nB,no,0,1\nC,abc,1,4\nD,,1,2\nE,0.5,1,3\n";
        let t = read_csv(csv.as_bytes(), &tiny_schema(), LoadOptions::default()).unwrap();
        let dep: Vec<Cell> = (0..5).map(|r| t.cell(r, "dependency").unwrap().clone()).collect();
        assert_eq!(
            dep,
            vec![
                Cell::Missing,
                Cell::Number(0.0),
                Cell::Missing,
                Cell::Missing,
                Cell::Number(0.5)
            ]
        );
        let t = read_csv(
            csv.as_bytes(),
            &tiny_schema(),
            LoadOptions {
                yes_no: YesNoPolicy::YesOne,
            },
        )
        .unwrap();
        assert_eq!(t.cell(0, "dependency"), Some(&Cell::Number(1.0)));

        let p = profile(&t);
        assert_eq!(p.missing_by_column["dependency"], 2);
        assert_eq!(p.class_counts.values().sum::<usize>(), 5);
        assert_eq!(p.urban_count, 4);
    }

    #[test]
    fn quoted_fields_and_reordered_header() {
        let csv = "Target,\"Id\",area1,dependency\n4,\"x,y\",0,\"1.5\"\n";
        let t = read_csv(csv.as_bytes(), &tiny_schema(), LoadOptions::default()).unwrap();
        assert_eq!(t.cell(0, "Id"), Some(&Cell::Text("x,y".into())));
        assert_eq!(t.cell(0, "dependency"), Some(&Cell::Number(1.5)));
    }

    #[test]
    fn no_missing_cells_profile() {
        let csv = "Id,dependency,area1,Target\nA,1,1,4\nB,2,0,1\n";
        let p = profile(&read_csv(csv.as_bytes(), &tiny_schema(), LoadOptions::default()).unwrap());
        assert!(p.missing_by_column.values().all(|&m| m == 0));
    }
}
