//! Molecule and plan files, CSV output.

use anyhow::{Context, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;
use vibemu::emulator::{ProtocolMode, ProtocolPlan};
use vibemu::model::{Configuration, ForceField, Regulator};
use vibemu::{units, Error};

use crate::config::SCHEMA_VERSION;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoleculeUnits {
    pub mass: String,
    pub hessian: String,
    pub position: String,
}

impl Default for MoleculeUnits {
    fn default() -> Self {
        MoleculeUnits {
            mass: "amu".into(),
            hessian: "eV/Angstrom^2".into(),
            position: "Angstrom".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigurationData {
    /// Row-major, symmetric.
    pub hessian: Vec<Vec<f64>>,
    pub equilibrium: Vec<f64>,
}

/// Molecule description in laboratory units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoleculeFile {
    pub schema_version: u32,
    #[serde(default)]
    pub units: MoleculeUnits,
    #[serde(default)]
    pub labels: Vec<String>,
    pub masses: Vec<f64>,
    pub initial: ConfigurationData,
    #[serde(rename = "final")]
    pub final_: ConfigurationData,
}

fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if let Some(r) = rows.iter().find(|r| r.len() != n) {
        return Err(Error::Model(format!("{what} must be square: {n} rows but a row of length {}", r.len())).into());
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl MoleculeFile {
    pub fn read(path: &Path) -> Result<MoleculeFile> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading molecule {}", path.display()))?;
        let file: MoleculeFile =
            serde_json::from_str(&text).map_err(|e| Error::Argument(format!("molecule {}: {e}", path.display())))?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(Error::Argument(format!(
                "unsupported molecule schema_version {}",
                file.schema_version
            ))
            .into());
        }
        if file.units != MoleculeUnits::default() {
            return Err(Error::Argument(format!(
                "molecule units must be mass=amu, hessian=eV/Angstrom^2, position=Angstrom; got {:?}",
                file.units
            ))
            .into());
        }
        if !file.labels.is_empty() && file.labels.len() != file.masses.len() {
            return Err(Error::Dimension {
                expected: file.masses.len(),
                actual: file.labels.len(),
            }
            .into());
        }
        file.force_fields()?;
        Ok(file)
    }

    /// Both configurations in internal units.
    pub fn force_fields(&self) -> Result<(ForceField, ForceField)> {
        let masses = DVector::from_iterator(self.masses.len(), self.masses.iter().map(|&m| units::amu(m)));
        let build = |c: &ConfigurationData, label: Configuration, what: &str| -> Result<ForceField> {
            let hessian = matrix_from_rows(&c.hessian, what)?.map(units::ev_per_angstrom2);
            let eq = DVector::from_iterator(c.equilibrium.len(), c.equilibrium.iter().map(|&x| units::angstrom(x)));
            Ok(ForceField::new(masses.clone(), hessian, eq, label)?)
        };
        Ok((
            build(&self.initial, Configuration::Initial, "initial hessian")?,
            build(&self.final_, Configuration::Final, "final hessian")?,
        ))
    }

    pub fn from_force_fields(initial: &ForceField, final_: &ForceField, labels: Vec<String>) -> MoleculeFile {
        let data = |ff: &ForceField| ConfigurationData {
            hessian: matrix_to_rows(&ff.hessian().map(units::to_ev_per_angstrom2)),
            equilibrium: ff.equilibrium().iter().map(|&x| units::to_angstrom(x)).collect(),
        };
        MoleculeFile {
            schema_version: SCHEMA_VERSION,
            units: MoleculeUnits::default(),
            labels,
            masses: initial.masses().iter().map(|&m| units::to_amu(m)).collect(),
            initial: data(initial),
            final_: data(final_),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegulatorData {
    pub frequency_ghz: f64,
    pub direction: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanUnits {
    pub capacitance: String,
    pub coupling: String,
    pub drive: String,
}

/// Protocol plan in laboratory units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanFile {
    pub schema_version: u32,
    pub units: PlanUnits,
    pub protocol: u8,
    pub kappa: f64,
    pub capacitance: Vec<Vec<f64>>,
    pub b_start: Vec<Vec<f64>>,
    pub v_start: Vec<f64>,
    pub b_end: Vec<Vec<f64>>,
    pub v_end: Vec<f64>,
    pub basis: Option<Vec<Vec<f64>>>,
    pub regulators: Vec<RegulatorData>,
    pub warnings: Vec<String>,
}

impl PlanFile {
    pub fn from_plan(plan: &ProtocolPlan) -> PlanFile {
        let na = |v: &DVector<f64>| v.iter().map(|&x| units::to_nanoampere(x)).collect();
        PlanFile {
            schema_version: SCHEMA_VERSION,
            units: PlanUnits {
                capacitance: "pF".into(),
                coupling: "nH^-1".into(),
                drive: "nA".into(),
            },
            protocol: match plan.mode {
                ProtocolMode::ForceField => 1,
                ProtocolMode::NormalMode => 2,
            },
            kappa: plan.kappa,
            capacitance: matrix_to_rows(&plan.capacitance.map(units::to_picofarad)),
            b_start: matrix_to_rows(&plan.b_start.map(units::to_inverse_nanohenry)),
            v_start: na(&plan.v_start),
            b_end: matrix_to_rows(&plan.b_end.map(units::to_inverse_nanohenry)),
            v_end: na(&plan.v_end),
            basis: plan.basis.as_ref().map(matrix_to_rows),
            regulators: plan
                .regulators
                .iter()
                .map(|r| RegulatorData {
                    frequency_ghz: units::to_ghz(r.frequency),
                    direction: r.direction.iter().copied().collect(),
                })
                .collect(),
            warnings: plan.warnings.clone(),
        }
    }

    pub fn to_plan(&self) -> Result<ProtocolPlan> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Argument(format!("unsupported plan schema_version {}", self.schema_version)).into());
        }
        let expected = PlanUnits {
            capacitance: "pF".into(),
            coupling: "nH^-1".into(),
            drive: "nA".into(),
        };
        if self.units != expected {
            return Err(Error::Argument(format!("plan units must be pF, nH^-1 and nA; got {:?}", self.units)).into());
        }
        let mode = match self.protocol {
            1 => ProtocolMode::ForceField,
            2 => ProtocolMode::NormalMode,
            p => return Err(Error::Argument(format!("plan protocol must be 1 or 2, got {p}")).into()),
        };
        let vector = |v: &[f64]| DVector::from_iterator(v.len(), v.iter().map(|&x| units::nanoampere(x)));
        let plan = ProtocolPlan {
            mode,
            capacitance: matrix_from_rows(&self.capacitance, "capacitance")?.map(units::picofarad),
            kappa: self.kappa,
            b_start: matrix_from_rows(&self.b_start, "b_start")?.map(units::inverse_nanohenry),
            v_start: vector(&self.v_start),
            b_end: matrix_from_rows(&self.b_end, "b_end")?.map(units::inverse_nanohenry),
            v_end: vector(&self.v_end),
            basis: self.basis.as_ref().map(|b| matrix_from_rows(b, "basis")).transpose()?,
            regulators: self
                .regulators
                .iter()
                .map(|r| Regulator {
                    frequency: units::ghz(r.frequency_ghz),
                    direction: DVector::from_vec(r.direction.clone()),
                })
                .collect(),
            warnings: self.warnings.clone(),
        };
        // constructing both models runs the dimension and definiteness checks
        plan.start_model()?;
        plan.end_model()?;
        Ok(plan)
    }

    pub fn read(path: &Path) -> Result<PlanFile> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading plan {}", path.display()))?;
        Ok(serde_json::from_str(&text).map_err(|e| Error::Argument(format!("plan {}: {e}", path.display())))?)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Comma-separated table with `#` metadata lines and a column header.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(meta: &[(&str, String)], columns: &[&str]) -> Csv {
        let mut text = format!("# schema_version={SCHEMA_VERSION}\n");
        for (k, v) in meta {
            let _ = writeln!(text, "# {k}={v}");
        }
        text.push_str(&columns.join(","));
        text.push('\n');
        Csv { text }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, &self.text).with_context(|| format!("writing {}", path.display()))
    }
}

/// Numeric columns of a CSV written by [`Csv`], with its metadata.
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Table> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut meta = Vec::new();
        let mut columns = None;
        let mut rows = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(m) = line.strip_prefix('#') {
                if let Some((k, v)) = m.trim().split_once('=') {
                    meta.push((k.trim().to_string(), v.trim().to_string()));
                }
            } else if columns.is_none() {
                columns = Some(line.split(',').map(|c| c.trim().to_string()).collect::<Vec<_>>());
            } else {
                rows.push(line.split(',').map(|c| c.trim().to_string()).collect());
            }
        }
        let columns = columns.ok_or_else(|| Error::Argument(format!("{} has no header", path.display())))?;
        Ok(Table { meta, columns, rows })
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Argument(format!("missing column {name}")))?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let cell = r.get(idx).ok_or_else(|| Error::Argument(format!("row {} is short", i + 1)))?;
                cell.parse::<f64>()
                    .map_err(|_| Error::Argument(format!("row {}: {name} = {cell:?} is not a number", i + 1)).into())
            })
            .collect()
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}
