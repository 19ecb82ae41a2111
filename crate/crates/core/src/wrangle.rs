//! Cleaning and re-encoding of the raw survey into a numeric feature matrix.
//!
//! The rules live in a declarative [`WranglePlan`] so they can be serialized
//! and diffed. [`encode`] applies everything except median imputation, which
//! is a separate fitted step ([`MedianImputer`]) so evaluation code can fit
//! medians on training rows only.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{FeatureMatrix, Matrix};
use crate::schema::{Cell, RawTable, Role};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeGroup {
    pub name: String,
    pub members: Vec<String>,
}

/// Inclusive integer age range mapped to one dummy column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeBin {
    pub label: String,
    pub lower: u32,
    pub upper: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowRule {
    AllMembersZero,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropRowRule {
    pub group: String,
    pub rule: RowRule,
    /// Count reported for the published file; recorded in the audit only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_rows: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantFill {
    pub column: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WranglePlan {
    pub drop_columns: Vec<String>,
    pub merge_groups: Vec<MergeGroup>,
    pub age_column: String,
    pub age_bins: Vec<AgeBin>,
    pub impute_median_columns: Vec<String>,
    #[serde(default)]
    pub fill_constant: Vec<ConstantFill>,
    pub drop_row_rules: Vec<DropRowRule>,
}

fn strings(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn numbered(prefix: &str, ids: impl IntoIterator<Item = u32>) -> Vec<String> {
    ids.into_iter().map(|i| format!("{prefix}{i}")).collect()
}

/// The default cleaning rules for the household survey.
pub fn build_default_plan() -> WranglePlan {
    let mut drop_columns = strings(&[
        "Id",
        "idhogar",
        "v2a1",
        "v18q1",
        // household size duplicates; r4t3 is kept
        "tamhog",
        "tamviv",
        "Hhsize",
        "hogar_total",
        // overlap with the r4* counts and rooms
        "hogar_nin",
        "hogar_adul",
        "hogar_mayor",
        "bedrooms",
        "qmobilephone",
    ]);
    drop_columns.extend(strings(&[
        "SQBescolari",
        "SQBage",
        "SQBhogar_total",
        "SQBedjefe",
        "SQBhogar_nin",
        "SQBovercrowding",
        "SQBdependency",
        "SQBmeaned",
        "Agesq",
    ]));

    let group = |name: &str, members: Vec<String>| MergeGroup {
        name: name.to_string(),
        members,
    };
    let merge_groups = vec![
        group(
            "walls",
            strings(&[
                "paredblolad",
                "paredzocalo",
                "paredpreb",
                "pareddes",
                "paredmad",
                "paredzinc",
                "paredfibras",
                "paredother",
            ]),
        ),
        group(
            "floor",
            strings(&[
                "pisomoscer",
                "pisocemento",
                "pisooother",
                "pcionatur",
                "pcionotiene",
                "pisomadera",
            ]),
        ),
        group(
            "roof",
            strings(&["techozinc", "techoentrepiso", "techocane", "techootro"]),
        ),
        group("water", strings(&["abastaguadentro", "abastaguafuera", "abastaguano"])),
        group("electricity", strings(&["Public", "planpri", "noelec", "coopele"])),
        group("sanitation", numbered("sanitario", [1, 2, 3, 5, 6])),
        group("cooking_energy", numbered("energcocinar", 1..=4)),
        group("rubbish", numbered("elimbasu", 1..=6)),
        group("wall_quality", numbered("epared", 1..=3)),
        group("roof_quality", numbered("etecho", 1..=3)),
        group("floor_quality", numbered("eviv", 1..=3)),
        group("sex", strings(&["Male", "female"])),
        group("civil_status", numbered("estadocivil", 1..=7)),
        group("household_role", numbered("parentesco", 1..=12)),
        group("education_level", numbered("instlevel", 1..=9)),
        group("dwelling_ownership", numbered("tipovivi", 1..=5)),
        group("region", numbered("lugar", 1..=6)),
        group("area", strings(&["area1", "area2"])),
    ];

    let bin = |label: &str, lower, upper| AgeBin {
        label: label.to_string(),
        lower,
        upper,
    };
    let age_bins = vec![
        bin("children", 0, 12),
        bin("adolescents", 13, 17),
        bin("young_adults", 18, 29),
        bin("adults", 30, 44),
        bin("middle_aged_adults", 45, 64),
        bin("old_adults", 65, 100),
    ];

    let rule = |group: &str, expected| DropRowRule {
        group: group.to_string(),
        rule: RowRule::AllMembersZero,
        expected_rows: Some(expected),
    };

    WranglePlan {
        drop_columns,
        merge_groups,
        age_column: "Age".to_string(),
        age_bins,
        impute_median_columns: strings(&["dependency", "Edjefe", "Edjefa", "meaneduc"]),
        fill_constant: vec![ConstantFill {
            column: "rez_esc".to_string(),
            value: 0.0,
        }],
        drop_row_rules: vec![rule("roof", 66), rule("electricity", 15), rule("education_level", 3)],
    }
}

impl WranglePlan {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Structural checks that do not need a table.
    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidPlan(msg));
        let mut seen = HashSet::new();
        for g in &self.merge_groups {
            if g.members.is_empty() {
                return invalid(format!("group {} has no members", g.name));
            }
            for m in &g.members {
                if !seen.insert(m.as_str()) {
                    return invalid(format!("column {m} appears in more than one merge group"));
                }
            }
        }
        for r in &self.drop_row_rules {
            if !self.merge_groups.iter().any(|g| g.name == r.group) {
                return invalid(format!("drop rule names unknown group {}", r.group));
            }
        }
        if self.age_bins.is_empty() {
            return invalid("no age bins".into());
        }
        let mut bins = self.age_bins.clone();
        bins.sort_by_key(|b| b.lower);
        if bins[0].lower != 0 || bins[bins.len() - 1].upper < 100 {
            return invalid("age bins must cover 0-100".into());
        }
        for b in &bins {
            if b.upper < b.lower {
                return invalid(format!("age bin {} is empty", b.label));
            }
        }
        for w in bins.windows(2) {
            if w[1].lower != w[0].upper + 1 {
                return invalid(format!(
                    "age bins {} and {} leave a gap or overlap",
                    w[0].label, w[1].label
                ));
            }
        }
        Ok(())
    }

    fn age_bin(&self, age: f64) -> Option<usize> {
        if !(age >= 0.0) {
            return None;
        }
        let a = age.floor() as u32;
        self.age_bins.iter().position(|b| b.lower <= a && a <= b.upper)
    }
}

/// Order-statistic median; the mean of the central pair for even counts.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("median"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Ok(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedRow {
    pub row: usize,
    pub id: Option<String>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RuleOutcome {
    pub group: String,
    pub dropped: usize,
    pub expected: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WrangleAudit {
    pub input_rows: usize,
    pub output_rows: usize,
    pub n_features: usize,
    pub dropped_columns: Vec<String>,
    pub rule_outcomes: Vec<RuleOutcome>,
    pub contradictory_rows: usize,
    /// Kept rows where some group has zero or several members set.
    pub irregular_group_rows: usize,
    pub dropped_rows: Vec<DroppedRow>,
    pub constant_fills: BTreeMap<String, usize>,
    pub imputed: BTreeMap<String, usize>,
    pub medians: BTreeMap<String, f64>,
}

impl WrangleAudit {
    pub fn to_log_lines(&self) -> Vec<String> {
        let mut out = vec![
            format!("wrangle: input rows {}", self.input_rows),
            format!(
                "wrangle: dropped columns ({}): {}",
                self.dropped_columns.len(),
                self.dropped_columns.join(",")
            ),
        ];
        for r in &self.rule_outcomes {
            let expected = r.expected.map_or(String::new(), |e| format!(" (reference count {e})"));
            out.push(format!(
                "wrangle: rule all-members-zero on {} dropped {} rows{expected}",
                r.group, r.dropped
            ));
        }
        out.push(format!(
            "wrangle: contradictory or incomplete rows dropped {}",
            self.contradictory_rows
        ));
        out.push(format!(
            "wrangle: rows kept with zero or several members set in a group {}",
            self.irregular_group_rows
        ));
        for d in &self.dropped_rows {
            out.push(format!(
                "wrangle: drop row {} id={} reason={}",
                d.row,
                d.id.as_deref().unwrap_or("-"),
                d.reason
            ));
        }
        for (c, n) in &self.constant_fills {
            out.push(format!("wrangle: constant fill {c} cells {n}"));
        }
        for (c, m) in &self.medians {
            let n = self.imputed.get(c).copied().unwrap_or(0);
            out.push(format!("wrangle: median impute {c} = {m} cells {n}"));
        }
        out.push(format!(
            "wrangle: output rows {} features {} (feature count excludes Target)",
            self.output_rows, self.n_features
        ));
        out
    }
}

/// Wrangled features before median imputation.
#[derive(Debug, Clone)]
pub struct Encoded {
    pub matrix: FeatureMatrix,
    /// Feature names of the columns still to be median-imputed.
    pub impute_columns: Vec<String>,
    pub audit: WrangleAudit,
}

enum Slot {
    Keep { col: usize },
    Group { members: Vec<usize> },
    Age { col: usize },
}

/// Applies every plan rule except median imputation. Imputation columns keep
/// NaN where the source was missing.
pub fn encode(table: &RawTable, plan: &WranglePlan) -> Result<Encoded> {
    plan.validate()?;
    let schema = table.schema();
    let resolve = |name: &str| {
        schema
            .position(name)
            .ok_or_else(|| Error::InvalidPlan(format!("column {name} is not in the table schema")))
    };

    let dropped: HashSet<usize> = plan.drop_columns.iter().map(|c| resolve(c)).collect::<Result<_>>()?;
    let groups: Vec<Vec<usize>> = plan
        .merge_groups
        .iter()
        .map(|g| g.members.iter().map(|m| resolve(m)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let age_col = resolve(&plan.age_column)?;
    let impute: HashSet<usize> = plan
        .impute_median_columns
        .iter()
        .map(|c| resolve(c))
        .collect::<Result<_>>()?;
    let fills: Vec<(usize, f64)> = plan
        .fill_constant
        .iter()
        .map(|f| Ok((resolve(&f.column)?, f.value)))
        .collect::<Result<_>>()?;
    let target = schema.target_index();

    let mut group_of = vec![None; schema.len()];
    for (gi, members) in groups.iter().enumerate() {
        for &m in members {
            if dropped.contains(&m) {
                return Err(Error::InvalidPlan(format!(
                    "column {} is both dropped and merged",
                    schema.columns()[m].name
                )));
            }
            group_of[m] = Some(gi);
        }
    }
    if dropped.contains(&age_col) || group_of[age_col].is_some() {
        return Err(Error::InvalidPlan("age column is dropped or merged".into()));
    }

    // Feature layout in schema order.
    let mut slots = Vec::new();
    let mut feature_names = Vec::new();
    let mut numeric_names = Vec::new();
    let mut emitted_groups = HashSet::new();
    for (i, spec) in schema.columns().iter().enumerate() {
        if i == target || dropped.contains(&i) {
            continue;
        }
        if i == age_col {
            slots.push(Slot::Age { col: i });
            for b in &plan.age_bins {
                feature_names.push(format!("{}_{}", spec.feature_name(), b.label));
            }
            continue;
        }
        if let Some(g) = group_of[i] {
            if emitted_groups.insert(g) {
                slots.push(Slot::Group {
                    members: groups[g].clone(),
                });
                feature_names.extend(
                    groups[g]
                        .iter()
                        .map(|&m| schema.columns()[m].feature_name().to_string()),
                );
            }
            continue;
        }
        match spec.role {
            Role::Id => {
                return Err(Error::InvalidPlan(format!(
                    "identifier column {} must be dropped",
                    spec.name
                )))
            }
            Role::Discrete | Role::Continuous | Role::Squared => {
                numeric_names.push(spec.feature_name().to_string());
            }
            Role::Binary | Role::Target => {}
        }
        slots.push(Slot::Keep { col: i });
        feature_names.push(spec.feature_name().to_string());
    }
    for &c in &impute {
        if dropped.contains(&c) || group_of[c].is_some() || c == age_col || c == target {
            return Err(Error::InvalidPlan(format!(
                "imputation column {} is not a retained plain column",
                schema.columns()[c].name
            )));
        }
    }

    let rules: Vec<(usize, &DropRowRule)> = plan
        .drop_row_rules
        .iter()
        .map(|r| {
            let gi = plan.merge_groups.iter().position(|g| g.name == r.group).unwrap_or(0);
            (gi, r)
        })
        .collect();
    let id_col = schema.columns().iter().position(|c| c.role == Role::Id);

    let mut audit = WrangleAudit {
        input_rows: table.n_rows(),
        dropped_columns: plan.drop_columns.clone(),
        rule_outcomes: plan
            .drop_row_rules
            .iter()
            .map(|r| RuleOutcome {
                group: r.group.clone(),
                dropped: 0,
                expected: r.expected_rows,
            })
            .collect(),
        ..Default::default()
    };
    for &(c, _) in &fills {
        audit
            .constant_fills
            .insert(schema.columns()[c].feature_name().to_string(), 0);
    }

    let mut values = Vec::with_capacity(table.n_rows() * feature_names.len());
    let mut labels = Vec::with_capacity(table.n_rows());
    let mut row_buf = Vec::with_capacity(feature_names.len());
    let mut fill_counts = vec![0usize; fills.len()];

    'rows: for (r, row) in table.rows().iter().enumerate() {
        let label = match row[target].as_f64() {
            Some(v) if v >= 0.0 && v.fract() == 0.0 => v as u32,
            _ => return Err(Error::MissingTarget { row: r }),
        };
        let id = id_col.and_then(|c| match &row[c] {
            Cell::Text(s) => Some(s.clone()),
            _ => None,
        });
        let reject = |reason: String, audit: &mut WrangleAudit| {
            audit.dropped_rows.push(DroppedRow {
                row: r,
                id: id.clone(),
                reason,
            });
        };

        for (k, (gi, _)) in rules.iter().enumerate() {
            let all_zero = groups[*gi].iter().all(|&m| row[m].as_f64() == Some(0.0));
            if all_zero {
                audit.rule_outcomes[k].dropped += 1;
                reject(format!("no member of {} set", plan.merge_groups[*gi].name), &mut audit);
                continue 'rows;
            }
        }
        let mut irregular = false;
        for (gi, members) in groups.iter().enumerate() {
            let mut ones = 0;
            for &m in members {
                match row[m].as_f64() {
                    Some(1.0) => ones += 1,
                    Some(0.0) => {}
                    _ => {
                        audit.contradictory_rows += 1;
                        reject(
                            format!("group {} has a non-binary cell", plan.merge_groups[gi].name),
                            &mut audit,
                        );
                        continue 'rows;
                    }
                }
            }
            irregular |= ones != 1;
        }
        if irregular {
            audit.irregular_group_rows += 1;
        }

        row_buf.clear();
        for slot in &slots {
            match slot {
                Slot::Keep { col } => {
                    let v = match row[*col].as_f64() {
                        Some(v) => v,
                        None if impute.contains(col) => f64::NAN,
                        None => match fills.iter().position(|(c, _)| c == col) {
                            Some(k) => {
                                fill_counts[k] += 1;
                                fills[k].1
                            }
                            None => {
                                audit.contradictory_rows += 1;
                                reject(format!("missing {}", schema.columns()[*col].name), &mut audit);
                                continue 'rows;
                            }
                        },
                    };
                    row_buf.push(v);
                }
                Slot::Group { members } => {
                    row_buf.extend(members.iter().map(|&m| row[m].as_f64().unwrap_or(0.0)));
                }
                Slot::Age { col } => {
                    let bin = match row[*col].as_f64().and_then(|a| plan.age_bin(a)) {
                        Some(b) => b,
                        None => {
                            audit.contradictory_rows += 1;
                            reject("age missing or outside the binned range".into(), &mut audit);
                            continue 'rows;
                        }
                    };
                    row_buf.extend((0..plan.age_bins.len()).map(|b| if b == bin { 1.0 } else { 0.0 }));
                }
            }
        }
        values.extend_from_slice(&row_buf);
        labels.push(label);
    }
    for (k, &(c, _)) in fills.iter().enumerate() {
        audit
            .constant_fills
            .insert(schema.columns()[c].feature_name().to_string(), fill_counts[k]);
    }

    let n_rows = labels.len();
    audit.output_rows = n_rows;
    audit.n_features = feature_names.len();
    let values = Matrix::from_vec(n_rows, feature_names.len(), values)?;
    let impute_columns = plan
        .impute_median_columns
        .iter()
        .map(|c| {
            schema
                .column(c)
                .map(|s| s.feature_name().to_string())
                .unwrap_or_default()
        })
        .collect();
    Ok(Encoded {
        matrix: FeatureMatrix::new(feature_names, values, labels, numeric_names)?,
        impute_columns,
        audit,
    })
}

/// Per-column medians of observed (non-NaN) values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianImputer {
    pub medians: BTreeMap<String, f64>,
}

impl MedianImputer {
    pub fn fit(matrix: &FeatureMatrix, columns: &[String]) -> Result<Self> {
        let mut medians = BTreeMap::new();
        for c in columns {
            let j = matrix.feature_index(c).ok_or_else(|| Error::NotNumeric(c.clone()))?;
            let observed: Vec<f64> = matrix.values.column(j).into_iter().filter(|v| !v.is_nan()).collect();
            medians.insert(c.clone(), median(&observed)?);
        }
        Ok(Self { medians })
    }

    /// Fills NaN cells in place; returns the number filled per column.
    pub fn transform(&self, matrix: &mut FeatureMatrix) -> Result<BTreeMap<String, usize>> {
        let mut filled = BTreeMap::new();
        for (c, &m) in &self.medians {
            let j = matrix.feature_index(c).ok_or_else(|| Error::NotNumeric(c.clone()))?;
            let mut n = 0;
            for i in 0..matrix.n_rows() {
                if matrix.values.get(i, j).is_nan() {
                    matrix.values.set(i, j, m);
                    n += 1;
                }
            }
            filled.insert(c.clone(), n);
        }
        Ok(filled)
    }
}

#[derive(Debug, Clone)]
pub struct Wrangled {
    pub matrix: FeatureMatrix,
    pub imputer: MedianImputer,
    pub audit: WrangleAudit,
}

/// Applies the whole plan, computing medians over every remaining row.
pub fn apply_plan(table: &RawTable, plan: &WranglePlan) -> Result<Wrangled> {
    let Encoded {
        mut matrix,
        impute_columns,
        mut audit,
    } = encode(table, plan)?;
    let imputer = MedianImputer::fit(&matrix, &impute_columns)?;
    audit.imputed = imputer.transform(&mut matrix)?;
    audit.medians = imputer.medians.clone();
    Ok(Wrangled { matrix, imputer, audit })
}
