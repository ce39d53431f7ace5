//! Report rows and their CSV / JSON / text serializations.
//!
//! Column orders are fixed; identical runs emit byte-identical bytes.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
    Text,
}

impl std::str::FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "text" => Ok(Format::Text),
            other => Err(format!("unknown format '{other}' (expected csv, json, or text)")),
        }
    }
}

/// Capacity runs: one row per solve.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CapacityRow {
    pub budget: usize,
    pub points: usize,
    pub energy: f64,
    pub capacity: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Eigenvalue runs: one row per refinement level.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LambdaRow {
    pub h: f64,
    pub lambda: f64,
    /// Richardson value from the pair ending at this level; absent on the
    /// first row.
    pub extrapolated: Option<f64>,
    pub error_estimate: Option<f64>,
}

/// Inradius ladder: one row per tolerance rung.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct InradiusRow {
    pub epsilon: f64,
    pub radius: f64,
    pub center_x: f64,
    pub center_y: f64,
    pub center_z: f64,
    pub cap_at_witness: f64,
}

/// Measure dump: one row per support point.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MeasureRow {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub weight: f64,
    pub patch_radius: f64,
}

/// Certificate summary (emitted as a single JSON object).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CertifyReport {
    pub delta: f64,
    pub c: f64,
    pub m: f64,
    pub m_phi: f64,
    pub tail: f64,
    pub lower_bound_hormander: f64,
    pub lower_bound_lee: f64,
    /// Strict-inradius estimate for context on how the cube size was chosen.
    pub rho_reference: Option<f64>,
}

/// One law check: what was compared, against what, and whether it held.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct VerifyRecord {
    pub name: String,
    /// The mathematical law being checked, as it appears in the law map
    /// document.
    pub anchor: String,
    pub lhs: f64,
    pub rhs: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct VerifyReport {
    pub records: Vec<VerifyRecord>,
    pub pass: bool,
}

/// Everything a run can produce.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "report", rename_all = "snake_case")]
pub enum Report {
    Capacity { rows: Vec<CapacityRow> },
    Lambda { rows: Vec<LambdaRow> },
    Inradius { rows: Vec<InradiusRow>, unbounded_candidate: bool },
    Measure { rows: Vec<MeasureRow> },
    Certify(CertifyReport),
    Verify(VerifyReport),
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl Report {
    pub fn emit(&self, format: Format) -> String {
        match format {
            Format::Json => {
                serde_json::to_string_pretty(self).expect("report serialization cannot fail")
            }
            Format::Csv => self.to_csv(),
            Format::Text => self.to_text(),
        }
    }

    fn to_csv(&self) -> String {
        let mut out = String::new();
        match self {
            Report::Capacity { rows } => {
                out.push_str("budget,points,energy,capacity,iterations,converged\n");
                for r in rows {
                    out.push_str(&format!(
                        "{},{},{},{},{},{}\n",
                        r.budget, r.points, r.energy, r.capacity, r.iterations, r.converged
                    ));
                }
            }
            Report::Lambda { rows } => {
                out.push_str("h,lambda,extrapolated,error_estimate\n");
                for r in rows {
                    out.push_str(&format!(
                        "{},{},{},{}\n",
                        r.h,
                        r.lambda,
                        fmt_opt(r.extrapolated),
                        fmt_opt(r.error_estimate)
                    ));
                }
            }
            Report::Inradius { rows, .. } => {
                out.push_str("epsilon,radius,center_x,center_y,center_z,cap_at_witness\n");
                for r in rows {
                    out.push_str(&format!(
                        "{},{},{},{},{},{}\n",
                        r.epsilon, r.radius, r.center_x, r.center_y, r.center_z, r.cap_at_witness
                    ));
                }
            }
            Report::Measure { rows } => {
                out.push_str("x,y,z,weight,patch_radius\n");
                for r in rows {
                    out.push_str(&format!(
                        "{},{},{},{},{}\n",
                        r.x, r.y, r.z, r.weight, r.patch_radius
                    ));
                }
            }
            Report::Certify(c) => {
                out.push_str(
                    "delta,c,m,m_phi,tail,lower_bound_hormander,lower_bound_lee\n",
                );
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    c.delta, c.c, c.m, c.m_phi, c.tail, c.lower_bound_hormander, c.lower_bound_lee
                ));
            }
            Report::Verify(v) => {
                out.push_str("name,anchor,lhs,rhs,tolerance,pass\n");
                for r in &v.records {
                    out.push_str(&format!(
                        "{},\"{}\",{},{},{},{}\n",
                        r.name, r.anchor, r.lhs, r.rhs, r.tolerance, r.pass
                    ));
                }
            }
        }
        out
    }

    fn to_text(&self) -> String {
        match self {
            Report::Verify(v) => {
                let mut out = String::new();
                for r in &v.records {
                    out.push_str(&format!(
                        "{} {:<46} lhs = {:<12.6} rhs = {:<12.6} [{}]\n",
                        if r.pass { "PASS" } else { "FAIL" },
                        r.name,
                        r.lhs,
                        r.rhs,
                        r.anchor
                    ));
                }
                out.push_str(&format!(
                    "overall: {}\n",
                    if v.pass { "PASS" } else { "FAIL" }
                ));
                out
            }
            Report::Certify(c) => format!(
                "delta      = {}\nc          = {}\nm          = {}\nM_phi      = {}\ntail       = {}\nlower bound (weighted estimate) = {}\nlower bound (ratio estimate)    = {}\n",
                c.delta, c.c, c.m, c.m_phi, c.tail, c.lower_bound_hormander, c.lower_bound_lee
            ),
            other => other.to_csv(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_capacity_report_is_header_only() {
        let r = Report::Capacity { rows: vec![] };
        assert_eq!(r.emit(Format::Csv), "budget,points,energy,capacity,iterations,converged\n");
    }

    #[test]
    fn one_capacity_record_is_one_row_six_columns() {
        let r = Report::Capacity {
            rows: vec![CapacityRow {
                budget: 2000,
                points: 2000,
                energy: 1.0,
                capacity: 1.0,
                iterations: 42,
                converged: true,
            }],
        };
        let csv = r.emit(Format::Csv);
        let lines: Vec<&str> = csv.trim_end().lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[1].split(',').count(), 6);
    }

    #[test]
    fn json_round_trips() {
        let r = Report::Lambda {
            rows: vec![
                LambdaRow { h: 0.1, lambda: 9.4, extrapolated: None, error_estimate: None },
                LambdaRow {
                    h: 0.05,
                    lambda: 9.7,
                    extrapolated: Some(9.8),
                    error_estimate: Some(0.1),
                },
            ],
        };
        let json = r.emit(Format::Json);
        let back: Report = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }
}
