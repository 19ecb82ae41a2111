//! Synthetic household-survey generator with the published file's header and
//! marginal counts (class sizes, urban rows, missing cells, rows the default
//! drop rules remove). Feature values carry a class-dependent signal so the
//! learners have something to find; they are not a model of the real data.

use std::collections::HashMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::Result;
use crate::rng::{seeded, Rng};
use crate::schema::Schema;

/// Marginal counts the generated file reproduces exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurveyCounts {
    /// Rows of class 1..=4.
    pub classes: [usize; 4],
    pub urban: usize,
    pub missing_rent: usize,
    /// Rows without a tablet (their tablet count is blank).
    pub no_tablet: usize,
    pub dependency_yes: usize,
    pub edjefe_yes: usize,
    pub edjefa_yes: usize,
    /// Rows with blank `meaneduc` and `SQBmeaned`.
    pub missing_meaneduc: usize,
    pub no_roof: usize,
    pub no_electricity: usize,
    pub no_education_level: usize,
}

impl Default for SurveyCounts {
    fn default() -> Self {
        Self {
            classes: [755, 1597, 1209, 5996],
            urban: 6829,
            missing_rent: 6860,
            no_tablet: 7342,
            dependency_yes: 2192,
            edjefe_yes: 123,
            edjefa_yes: 69,
            missing_meaneduc: 5,
            no_roof: 66,
            no_electricity: 15,
            no_education_level: 3,
        }
    }
}

impl SurveyCounts {
    pub fn n_rows(&self) -> usize {
        self.classes.iter().sum()
    }

    /// Every count scaled to `n` rows (at least one row per class and per
    /// drop rule).
    pub fn scaled(n: usize) -> Self {
        let full = Self::default();
        let total = full.n_rows() as f64;
        let s = |v: usize| ((v as f64 * n as f64 / total).round() as usize).min(n);
        let mut classes = full.classes.map(|c| s(c).max(1));
        classes[3] = n.saturating_sub(classes[..3].iter().sum::<usize>()).max(1);
        Self {
            classes,
            urban: s(full.urban),
            missing_rent: s(full.missing_rent),
            no_tablet: s(full.no_tablet),
            dependency_yes: s(full.dependency_yes),
            edjefe_yes: s(full.edjefe_yes),
            edjefa_yes: s(full.edjefa_yes),
            missing_meaneduc: s(full.missing_meaneduc),
            no_roof: s(full.no_roof).max(1),
            no_electricity: s(full.no_electricity).max(1),
            no_education_level: s(full.no_education_level).max(1),
        }
    }

    pub fn dropped_rows(&self) -> usize {
        self.no_roof + self.no_electricity + self.no_education_level
    }
}

fn pick(rng: &mut Rng, n: usize, count: usize) -> Vec<bool> {
    let mut flags = vec![false; n];
    for i in rand::seq::index::sample(rng, n, count.min(n)) {
        flags[i] = true;
    }
    flags
}

/// Index into a one-hot group: with probability `lean` the member at the
/// preferred end (last when `prefer_last`), otherwise uniform.
fn member(rng: &mut Rng, size: usize, lean: f64, prefer_last: bool) -> usize {
    if rng.gen_bool(lean.clamp(0.0, 1.0)) {
        if prefer_last {
            size - 1
        } else {
            0
        }
    } else {
        rng.gen_range(0..size)
    }
}

fn num(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:.4}")
    }
}

/// Writes a synthetic survey CSV.
pub fn write_survey<W: Write>(out: W, counts: &SurveyCounts, seed: u64) -> Result<()> {
    let schema = Schema::survey();
    let pos: HashMap<&str, usize> = schema
        .columns()
        .iter()
        .enumerate()
        .map(|(i, c)| (c.name.as_str(), i))
        .collect();
    let n = counts.n_rows();
    let mut rng = seeded(seed);

    let mut labels: Vec<u32> = counts
        .classes
        .iter()
        .enumerate()
        .flat_map(|(c, &k)| std::iter::repeat_n(c as u32 + 1, k))
        .collect();
    labels.shuffle(&mut rng);

    let urban = pick(&mut rng, n, counts.urban);
    let rent_missing = pick(&mut rng, n, counts.missing_rent);
    let no_tablet = pick(&mut rng, n, counts.no_tablet);
    let dep_yes = pick(&mut rng, n, counts.dependency_yes);
    let jefe_yes = pick(&mut rng, n, counts.edjefe_yes);
    let jefa_yes = pick(&mut rng, n, counts.edjefa_yes);
    let meaneduc_missing = pick(&mut rng, n, counts.missing_meaneduc);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    // 0 none, 1 roof, 2 electricity, 3 education level
    let mut empty_group = vec![0u8; n];
    let mut cursor = order.into_iter();
    for (tag, k) in [
        (1, counts.no_roof),
        (2, counts.no_electricity),
        (3, counts.no_education_level),
    ] {
        for i in cursor.by_ref().take(k) {
            empty_group[i] = tag;
        }
    }

    let groups: &[(&str, Vec<&str>, bool)] = &[
        (
            "pared",
            vec![
                "paredblolad",
                "paredzocalo",
                "paredpreb",
                "pareddes",
                "paredmad",
                "paredzinc",
                "paredfibras",
                "paredother",
            ],
            false,
        ),
        (
            "piso",
            vec![
                "pisomoscer",
                "pisocemento",
                "pisooother",
                "pcionatur",
                "pcionotiene",
                "pisomadera",
            ],
            false,
        ),
        (
            "abasta",
            vec!["abastaguadentro", "abastaguafuera", "abastaguano"],
            false,
        ),
        (
            "sanitario",
            vec!["sanitario1", "sanitario2", "sanitario3", "sanitario5", "sanitario6"],
            true,
        ),
        (
            "energcocinar",
            vec!["energcocinar1", "energcocinar2", "energcocinar3", "energcocinar4"],
            true,
        ),
        (
            "elimbasu",
            vec![
                "elimbasu1",
                "elimbasu2",
                "elimbasu3",
                "elimbasu4",
                "elimbasu5",
                "elimbasu6",
            ],
            false,
        ),
        ("epared", vec!["epared1", "epared2", "epared3"], true),
        ("etecho", vec!["etecho1", "etecho2", "etecho3"], true),
        ("eviv", vec!["eviv1", "eviv2", "eviv3"], true),
        ("estadocivil", (1..=7).map(|_| "").collect(), false),
        ("parentesco", (1..=12).map(|_| "").collect(), false),
        ("tipovivi", (1..=5).map(|_| "").collect(), false),
        ("lugar", (1..=6).map(|_| "").collect(), false),
    ];
    let numbered: HashMap<&str, Vec<String>> = ["estadocivil", "parentesco", "tipovivi", "lugar"]
        .iter()
        .map(|&p| {
            let k = groups.iter().find(|g| g.0 == p).expect("group").1.len();
            (p, (1..=k).map(|i| format!("{p}{i}")).collect())
        })
        .collect();

    let mut w = csv::Writer::from_writer(out);
    w.write_record(schema.columns().iter().map(|c| c.feature_name()))?;
    let mut row = vec![String::new(); schema.len()];
    for i in 0..n {
        let class = labels[i];
        let s = (class - 1) as f64 / 3.0;
        row.iter_mut().for_each(|c| c.clear());
        let mut set = |name: &str, v: String| row[pos[name]] = v;

        set("Id", format!("ID_{i:07}"));
        set("idhogar", format!("hh{:06}", i / 3));
        set("Target", class.to_string());

        let noise = |rng: &mut Rng, scale: f64| (rng.gen::<f64>() - 0.5) * scale;
        if !rent_missing[i] {
            set(
                "v2a1",
                num((60000.0 + 180000.0 * s + noise(&mut rng, 80000.0)).round().max(0.0)),
            );
        }
        for (name, p) in [
            ("hacdor", 0.12 - 0.1 * s),
            ("hacapo", 0.06 - 0.05 * s),
            ("v14a", 0.96 + 0.03 * s),
            ("Refrig", 0.85 + 0.12 * s),
            ("cielorazo", 0.4 + 0.5 * s),
            ("Dis", 0.06),
            ("computer", 0.05 + 0.3 * s),
            ("television", 0.2 + 0.5 * s),
            ("mobilephone", 0.9 + 0.08 * s),
        ] {
            set(name, (rng.gen_bool(p) as u8).to_string());
        }
        let tablet = !no_tablet[i];
        set("v18q", (tablet as u8).to_string());
        if tablet {
            set("v18q1", rng.gen_range(1..=3).to_string());
        }

        let boys: u32 = rng.gen_range(0..=(2 - s.round() as u32));
        let girls: u32 = rng.gen_range(0..=(2 - s.round() as u32));
        let men: u32 = rng.gen_range(0..=2);
        let women: u32 = rng.gen_range(1..=2);
        let (h3, m3) = (boys + men, girls + women);
        let (kids, adults, total) = (boys + girls, men + women, h3 + m3);
        let elders = rng.gen_range(0..=adults.min(1));
        for (name, v) in [
            ("r4h1", boys),
            ("r4h2", men),
            ("r4h3", h3),
            ("r4m1", girls),
            ("r4m2", women),
            ("r4m3", m3),
            ("r4t1", kids),
            ("r4t2", adults),
            ("r4t3", total),
            ("tamhog", total),
            ("tamviv", total),
            ("Hhsize", total),
            ("hogar_total", total),
            ("hogar_nin", kids),
            ("hogar_adul", adults),
            ("hogar_mayor", elders),
        ] {
            set(name, v.to_string());
        }
        let rooms = (2.0 + 3.0 * s + rng.gen_range(0.0..3.0)).floor();
        let bedrooms = rng.gen_range(1..=(rooms as u32 - 1).max(1)) as f64;
        let overcrowding = total as f64 / bedrooms;
        set("Rooms", num(rooms));
        set("bedrooms", num(bedrooms));
        set("overcrowding", num(overcrowding));
        set("qmobilephone", rng.gen_range(0..=4).to_string());

        let escolari = (3.0 + 10.0 * s + noise(&mut rng, 8.0)).round().clamp(0.0, 21.0);
        set("escolari", num(escolari));
        if rng.gen_bool(0.2) {
            set("rez_esc", rng.gen_range(0..=3).to_string());
        }
        let dep = (kids + elders) as f64 / adults as f64;
        set(
            "dependency",
            if dep_yes[i] {
                "yes".into()
            } else if dep == 0.0 {
                "no".into()
            } else {
                num(dep)
            },
        );
        let edjefe = (4.0 + 8.0 * s + noise(&mut rng, 8.0)).round().clamp(0.0, 21.0);
        let edjefa = if rng.gen_bool(0.5) {
            0.0
        } else {
            (4.0 + 8.0 * s + noise(&mut rng, 8.0)).round().clamp(0.0, 21.0)
        };
        let yes_no = |yes: bool, v: f64| {
            if yes {
                "yes".to_string()
            } else if v == 0.0 {
                "no".to_string()
            } else {
                num(v)
            }
        };
        set("Edjefe", yes_no(jefe_yes[i], edjefe));
        set("Edjefa", yes_no(jefa_yes[i], edjefa));
        let meaneduc = (4.0 + 9.0 * s + noise(&mut rng, 6.0)).clamp(0.0, 21.0);
        if !meaneduc_missing[i] {
            set("meaneduc", num((meaneduc * 100.0).round() / 100.0));
            set("SQBmeaned", num(((meaneduc * 100.0).round() / 100.0).powi(2)));
        }
        let age = rng.gen_range(0..=97) as f64;
        set("Age", num(age));
        set("Agesq", num(age * age));
        set("SQBage", num(age * age));
        set("SQBescolari", num(escolari * escolari));
        set("SQBhogar_total", num((total * total) as f64));
        set("SQBedjefe", num(if jefe_yes[i] { 1.0 } else { edjefe * edjefe }));
        set("SQBhogar_nin", num((kids * kids) as f64));
        set("SQBovercrowding", num(overcrowding * overcrowding));
        set("SQBdependency", num(if dep_yes[i] { 64.0 } else { dep * dep }));

        let one_hot = |set: &mut dyn FnMut(&str, String), members: &[&str], chosen: Option<usize>| {
            for (k, m) in members.iter().enumerate() {
                set(m, ((Some(k) == chosen) as u8).to_string());
            }
        };
        let lean = 0.2 + 0.6 * s;
        for (prefix, members, prefer_last) in groups {
            let owned;
            let names: Vec<&str> = match numbered.get(prefix) {
                Some(v) => {
                    owned = v;
                    owned.iter().map(String::as_str).collect()
                }
                None => members.clone(),
            };
            let k = member(&mut rng, names.len(), lean, *prefer_last);
            one_hot(&mut set, &names, Some(k));
        }
        let roof = ["techozinc", "techoentrepiso", "techocane", "techootro"];
        let roof_choice = (empty_group[i] != 1).then(|| member(&mut rng, 4, 0.7, false));
        one_hot(&mut set, &roof, roof_choice);
        let elec = ["Public", "planpri", "noelec", "coopele"];
        let elec_choice = (empty_group[i] != 2).then(|| member(&mut rng, 4, 0.8, false));
        one_hot(&mut set, &elec, elec_choice);
        let inst: Vec<String> = (1..=9).map(|k| format!("instlevel{k}")).collect();
        let inst_names: Vec<&str> = inst.iter().map(String::as_str).collect();
        let inst_choice = (empty_group[i] != 3).then(|| ((escolari / 2.5) as usize).min(8));
        one_hot(&mut set, &inst_names, inst_choice);
        let male = rng.gen_bool(0.5);
        set("Male", (male as u8).to_string());
        set("female", ((!male) as u8).to_string());
        set("area1", (urban[i] as u8).to_string());
        set("area2", ((!urban[i]) as u8).to_string());

        w.write_record(&row)?;
    }
    w.flush().map_err(|e| crate::error::Error::Csv(e.into()))?;
    Ok(())
}

/// Synthetic survey at the published size.
pub fn write_default_survey<W: Write>(out: W, seed: u64) -> Result<()> {
    write_survey(out, &SurveyCounts::default(), seed)
}
