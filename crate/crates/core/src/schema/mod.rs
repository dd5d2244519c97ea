//! Serialised forms: model-spec documents, reports and traces.
//!
//! Every document carries `"schema": 1`. Floats are written with 12
//! significant digits and non-finite values as `"inf"`, `"-inf"`, `"nan"`.

pub mod num;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::SurvivalTrace;
use crate::error::{FlError, FlResult};
use crate::measure::{
    Atom, CouplingMeasure, DensityFamily, DensityPiece, DispersionModel, DispersionPiece,
    DyadicCascade, FormFactor, Geometry, Interval, MuMeasure, PeriodicComb,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpecDoc {
    pub schema: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<MeasureDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<DesignDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verification: Option<VerificationDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct MeasureDoc {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ac: Vec<AcDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub atoms: Vec<AtomDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comb: Option<CombDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cascade: Option<CascadeDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum AcDoc {
    Flat {
        #[serde(with = "num")]
        level: f64,
        #[serde(default = "real_line")]
        support: Interval,
    },
    Sinusoidal {
        #[serde(with = "num")]
        beta: f64,
        #[serde(with = "num")]
        tau: f64,
        #[serde(default = "real_line")]
        support: Interval,
    },
    Tabulated {
        #[serde(with = "num::vec")]
        grid: Vec<f64>,
        #[serde(with = "num::vec")]
        values: Vec<f64>,
    },
}

fn real_line() -> Interval {
    Interval::REAL_LINE
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomDoc {
    #[serde(with = "num")]
    pub location: f64,
    #[serde(with = "num")]
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CombDoc {
    #[serde(with = "num")]
    pub beta: f64,
    #[serde(with = "num")]
    pub tau: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CascadeDoc {
    #[serde(with = "num")]
    pub scale: f64,
    #[serde(with = "num")]
    pub ratio: f64,
    pub depth: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDoc {
    pub geometry: Geometry,
    pub dispersion: DispersionDoc,
    pub form_factor: FormFactorDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<MuDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DispersionDoc {
    Linear {
        #[serde(with = "num")]
        slope: f64,
        #[serde(with = "num", default)]
        offset: f64,
        #[serde(default = "real_line")]
        domain: Interval,
    },
    /// `coef k^p` on `[0, ∞)`.
    Power {
        #[serde(with = "num")]
        coef: f64,
        #[serde(with = "num")]
        p: f64,
    },
    Cubic {
        #[serde(with = "num")]
        coef: f64,
    },
    Quadratic {
        #[serde(with = "num")]
        coef: f64,
        #[serde(with = "num", default)]
        offset: f64,
    },
    Tent {
        #[serde(with = "num")]
        height: f64,
        #[serde(with = "num")]
        slope: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FormFactorDoc {
    Constant {
        #[serde(with = "num")]
        value: f64,
    },
    Power {
        #[serde(with = "num")]
        coef: f64,
        #[serde(with = "num")]
        p: f64,
    },
    Sinusoidal {
        #[serde(with = "num")]
        beta: f64,
        #[serde(with = "num")]
        tau: f64,
    },
    Tabulated {
        #[serde(with = "num::vec")]
        grid: Vec<f64>,
        #[serde(with = "num::vec")]
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MuDoc {
    Lebesgue,
    Point {
        #[serde(with = "num")]
        k: f64,
        #[serde(with = "num")]
        mass: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignDoc {
    pub geometry: Geometry,
    pub dispersion: DispersionDoc,
    /// Flat target `β/2π` unless a measure is given.
    #[serde(default, skip_serializing_if = "Option::is_none", with = "num::opt")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<MeasureDoc>,
    /// Export grid for the tabulated form factor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridDoc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDoc {
    #[serde(with = "num")]
    pub lo: f64,
    #[serde(with = "num")]
    pub hi: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerificationDoc {
    #[serde(with = "num")]
    pub max_relative_deviation: f64,
    pub intervals: usize,
}

/// What a model-spec document describes.
#[derive(Debug, Clone)]
pub enum ModelInput {
    Measure(CouplingMeasure),
    Model(DispersionModel),
}

impl ModelInput {
    pub fn coupling(&self) -> FlResult<CouplingMeasure> {
        match self {
            ModelInput::Measure(k) => Ok(k.clone()),
            ModelInput::Model(m) => crate::measure::pushforward(m),
        }
    }
}

fn finite(name: &str, x: f64) -> FlResult<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(FlError::Schema(format!("{name} must be finite, got {x}")))
    }
}

impl MeasureDoc {
    pub fn to_measure(&self) -> FlResult<CouplingMeasure> {
        let mut ac = Vec::new();
        for p in &self.ac {
            ac.push(match p {
                AcDoc::Flat { level, support } => {
                    DensityPiece::flat(*level, check_interval(support)?)?
                }
                AcDoc::Sinusoidal { beta, tau, support } => {
                    DensityPiece::sinusoidal(*beta, *tau, check_interval(support)?)?
                }
                AcDoc::Tabulated { grid, values } => {
                    DensityPiece::tabulated(grid.clone(), values.clone())?
                }
            });
        }
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom::new(a.location, a.weight))
            .collect::<FlResult<Vec<_>>>()?;
        let combs = self
            .comb
            .iter()
            .map(|c| PeriodicComb::new(c.beta, c.tau))
            .collect::<FlResult<Vec<_>>>()?;
        let cascades = self
            .cascade
            .iter()
            .map(|c| DyadicCascade::new(c.scale, c.ratio, c.depth))
            .collect::<FlResult<Vec<_>>>()?;
        CouplingMeasure::new(ac, atoms, combs, cascades)
    }

    /// Inverse of [`MeasureDoc::to_measure`]; function densities have no document form.
    pub fn from_measure(kappa: &CouplingMeasure) -> FlResult<Self> {
        if kappa.combs.len() > 1 || kappa.cascades.len() > 1 {
            return Err(FlError::Schema(
                "documents hold at most one comb and one cascade".into(),
            ));
        }
        let ac = kappa
            .ac
            .iter()
            .map(|p| match &p.family {
                DensityFamily::Flat { level } => Ok(AcDoc::Flat {
                    level: *level,
                    support: p.support,
                }),
                DensityFamily::Sinusoidal { beta, tau } => Ok(AcDoc::Sinusoidal {
                    beta: *beta,
                    tau: *tau,
                    support: p.support,
                }),
                DensityFamily::Tabulated { grid, values } => Ok(AcDoc::Tabulated {
                    grid: grid.clone(),
                    values: values.clone(),
                }),
                DensityFamily::Function { label, .. } => Err(FlError::Schema(format!(
                    "function density '{label}' cannot be serialised"
                ))),
            })
            .collect::<FlResult<Vec<_>>>()?;
        Ok(Self {
            ac,
            atoms: kappa
                .atoms
                .iter()
                .map(|a| AtomDoc {
                    location: a.location,
                    weight: a.weight,
                })
                .collect(),
            comb: kappa.combs.first().map(|c| CombDoc {
                beta: c.beta,
                tau: c.tau,
            }),
            cascade: kappa.cascades.first().map(|c| CascadeDoc {
                scale: c.scale,
                ratio: c.ratio,
                depth: c.depth,
            }),
        })
    }
}

fn check_interval(iv: &Interval) -> FlResult<Interval> {
    Interval::new(iv.lo, iv.hi).map_err(|e| FlError::Schema(e.to_string()))
}

impl DispersionDoc {
    pub fn pieces(&self) -> FlResult<Vec<DispersionPiece>> {
        Ok(match *self {
            DispersionDoc::Linear {
                slope,
                offset,
                domain,
            } => {
                vec![DispersionPiece::linear(
                    finite("slope", slope)?,
                    finite("offset", offset)?,
                    check_interval(&domain)?,
                )]
            }
            DispersionDoc::Power { coef, p } => {
                if !(p > 0.0) {
                    return Err(FlError::Schema(format!(
                        "power exponent must be positive, got {p}"
                    )));
                }
                vec![DispersionPiece::power(
                    finite("coef", coef)?,
                    finite("p", p)?,
                )]
            }
            DispersionDoc::Cubic { coef } => DispersionPiece::cubic(finite("coef", coef)?),
            DispersionDoc::Quadratic { coef, offset } => {
                DispersionPiece::quadratic(finite("coef", coef)?, finite("offset", offset)?)
            }
            DispersionDoc::Tent { height, slope } => {
                DispersionPiece::tent(finite("height", height)?, finite("slope", slope)?)
            }
        })
    }
}

impl FormFactorDoc {
    pub fn form_factor(&self) -> FlResult<FormFactor> {
        Ok(match self {
            FormFactorDoc::Constant { value } => FormFactor::constant(finite("value", *value)?),
            FormFactorDoc::Power { coef, p } => {
                FormFactor::power(finite("coef", *coef)?, finite("p", *p)?)
            }
            FormFactorDoc::Sinusoidal { beta, tau } => {
                FormFactor::sinusoidal(finite("beta", *beta)?, finite("tau", *tau)?)
            }
            FormFactorDoc::Tabulated { grid, values } => {
                FormFactor::tabulated(grid.clone(), values.clone())?
            }
        })
    }
}

impl ModelDoc {
    pub fn to_model(&self) -> FlResult<DispersionModel> {
        let mu = match self.mu.unwrap_or(MuDoc::Lebesgue) {
            MuDoc::Lebesgue => MuMeasure::lebesgue(),
            MuDoc::Point { k, mass } => {
                if !(mass > 0.0 && mass.is_finite()) || !k.is_finite() {
                    return Err(FlError::Schema(
                        "point mass needs finite k and positive mass".into(),
                    ));
                }
                MuMeasure::point(k, mass)
            }
        };
        DispersionModel::new(
            self.geometry,
            self.dispersion.pieces()?,
            mu,
            self.form_factor.form_factor()?,
        )
    }
}

impl DesignDoc {
    pub fn to_spec(&self) -> FlResult<crate::inverse::DesignSpec> {
        let pieces = self.dispersion.pieces()?;
        let target = match (&self.target, self.beta) {
            (Some(m), None) => m.to_measure()?,
            (None, Some(beta)) => CouplingMeasure::flat_line(beta)?,
            (None, None) => CouplingMeasure::flat_line(1.0)?,
            (Some(_), Some(_)) => {
                return Err(FlError::Schema(
                    "design takes either beta or target, not both".into(),
                ))
            }
        };
        Ok(crate::inverse::DesignSpec {
            geometry: self.geometry,
            pieces,
            target,
            phase: None,
        })
    }
}

impl ModelSpecDoc {
    pub fn parse(text: &str) -> FlResult<Self> {
        let doc: ModelSpecDoc =
            serde_json::from_str(text).map_err(|e| FlError::Schema(e.to_string()))?;
        if doc.schema != SCHEMA_VERSION {
            return Err(FlError::Schema(format!(
                "unsupported schema version {}",
                doc.schema
            )));
        }
        Ok(doc)
    }

    /// The measure or model; exactly one must be present.
    pub fn input(&self) -> FlResult<ModelInput> {
        match (&self.measure, &self.model) {
            (Some(m), None) => Ok(ModelInput::Measure(m.to_measure()?)),
            (None, Some(m)) => Ok(ModelInput::Model(m.to_model()?)),
            (Some(_), Some(_)) => Err(FlError::Schema(
                "document has both 'measure' and 'model'".into(),
            )),
            (None, None) => Err(FlError::Schema(
                "document has neither 'measure' nor 'model'".into(),
            )),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("documents always serialise")
    }
}

/// Parses and validates a model-spec document in one step.
pub fn parse_model_spec(text: &str) -> FlResult<ModelInput> {
    ModelSpecDoc::parse(text)?.input()
}

/// A document body tagged with the schema version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versioned<T> {
    pub schema: u32,
    #[serde(flatten)]
    pub body: T,
}

impl<T> Versioned<T> {
    pub fn new(body: T) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            body,
        }
    }
}

pub fn to_versioned_json<T: Serialize>(body: &T) -> String {
    serde_json::to_string_pretty(&Versioned::new(body)).expect("reports always serialise")
}

pub fn from_versioned_json<T: for<'de> Deserialize<'de>>(text: &str) -> FlResult<T> {
    let v: Versioned<T> = serde_json::from_str(text).map_err(|e| FlError::Schema(e.to_string()))?;
    if v.schema != SCHEMA_VERSION {
        return Err(FlError::Schema(format!(
            "unsupported schema version {}",
            v.schema
        )));
    }
    Ok(v.body)
}

fn parse_cell(s: &str) -> FlResult<f64> {
    match s.trim() {
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        "nan" => Ok(f64::NAN),
        t => t
            .parse()
            .map_err(|_| FlError::Schema(format!("bad number '{t}'"))),
    }
}

/// Reads the CSV written by [`SurvivalTrace::to_csv`].
pub fn parse_trace_csv(text: &str) -> FlResult<SurvivalTrace> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("t,re_x,im_x,abs2,error") {
        return Err(FlError::Schema(
            "survival CSV header must be 't,re_x,im_x,abs2,error'".into(),
        ));
    }
    let mut tr = SurvivalTrace {
        times: vec![],
        amplitudes: vec![],
        quadrature_error: vec![],
        approximate: false,
        warnings: vec![],
    };
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 5 {
            return Err(FlError::Schema(format!(
                "row {} has {} columns, expected 5",
                i + 2,
                cells.len()
            )));
        }
        let v = cells
            .iter()
            .map(|c| parse_cell(c))
            .collect::<FlResult<Vec<_>>>()?;
        tr.times.push(v[0]);
        tr.amplitudes.push(Complex64::new(v[1], v[2]));
        tr.quadrature_error.push(v[4]);
    }
    Ok(tr)
}

/// One row of `sigma.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaRow {
    pub lambda: f64,
    pub re: f64,
    pub im: f64,
    pub im_divergent: bool,
    pub log_singular: bool,
}

pub const SIGMA_CSV_HEADER: &str = "lambda,re_sigma,im_sigma,flags";

pub fn sigma_csv(rows: &[SigmaRow]) -> String {
    let mut out = format!("{SIGMA_CSV_HEADER}\n");
    for r in rows {
        let mut flags = Vec::new();
        if r.im_divergent {
            flags.push("atom");
        }
        if r.log_singular {
            flags.push("log");
        }
        out.push_str(&format!(
            "{},{},{},{}\n",
            crate::dynamics::fmt12(r.lambda),
            crate::dynamics::fmt12(r.re),
            crate::dynamics::fmt12(r.im),
            flags.join("|")
        ));
    }
    out
}

pub fn parse_sigma_csv(text: &str) -> FlResult<Vec<SigmaRow>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(SIGMA_CSV_HEADER) {
        return Err(FlError::Schema(format!(
            "sigma CSV header must be '{SIGMA_CSV_HEADER}'"
        )));
    }
    let mut rows = Vec::new();
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 4 {
            return Err(FlError::Schema(format!(
                "sigma row has {} columns, expected 4",
                cells.len()
            )));
        }
        let flags: Vec<&str> = cells[3].split('|').filter(|f| !f.is_empty()).collect();
        if let Some(bad) = flags.iter().find(|f| !matches!(**f, "atom" | "log")) {
            return Err(FlError::Schema(format!("unknown flag '{bad}'")));
        }
        rows.push(SigmaRow {
            lambda: parse_cell(cells[0])?,
            re: parse_cell(cells[1])?,
            im: parse_cell(cells[2])?,
            im_divergent: flags.contains(&"atom"),
            log_singular: flags.contains(&"log"),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measure_document_round_trip() {
        let text = r#"{
            "schema": 1,
            "measure": {
                "ac": [
                    {"family": "flat", "level": 0.5, "support": {"lo": 0, "hi": "inf"}},
                    {"family": "tabulated", "grid": [-3, -2, -1], "values": [0, 1, 0]}
                ],
                "atoms": [{"location": -5, "weight": 0.25}],
                "cascade": {"scale": 0.1, "ratio": 0.5, "depth": 12}
            }
        }"#;
        let doc = ModelSpecDoc::parse(text).unwrap();
        let ModelInput::Measure(k) = doc.input().unwrap() else {
            panic!()
        };
        assert_eq!(k.ac.len(), 2);
        assert_eq!(k.ac[0].support, Interval::half_line());
        let back = MeasureDoc::from_measure(&k).unwrap();
        assert_eq!(&back, doc.measure.as_ref().unwrap());
        let again = ModelSpecDoc::parse(&doc.to_json()).unwrap();
        assert_eq!(again, doc);
    }

    #[test]
    fn model_document() {
        let text = r#"{"schema": 1, "model": {
            "geometry": {"kind": "slab", "dim": 2},
            "dispersion": {"kind": "cubic", "coef": 1},
            "form_factor": {"kind": "constant", "value": 0.4}
        }}"#;
        let ModelInput::Model(m) = parse_model_spec(text).unwrap() else {
            panic!()
        };
        assert_eq!(m.pieces.len(), 2);
        assert!((m.form_factor.eval(1.0).re - 0.4).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_documents() {
        for text in [
            r#"{"schema": 2, "measure": {}}"#,
            r#"{"schema": 1}"#,
            r#"{"schema": 1, "measure": {"atoms": [{"location": 0, "weight": -1}]}}"#,
            r#"{"schema": 1, "measure": {"ac": [{"family": "flat", "level": 1, "support": {"lo": 0, "hi": "inf"}, "x": 1}]}}"#,
            r#"{"schema": 1, "measure": {"ac": [{"family": "flat", "level": 1, "support": {"lo": 2, "hi": 1}}]}}"#,
            r#"{"schema": 1, "model": {"geometry": {"kind": "line"}, "dispersion": {"kind": "power", "coef": 1, "p": -1}, "form_factor": {"kind": "constant", "value": 1}}}"#,
        ] {
            assert!(parse_model_spec(text).is_err(), "{text}");
        }
    }

    #[test]
    fn sigma_csv_round_trip() {
        let rows = vec![
            SigmaRow {
                lambda: 0.5,
                re: f64::NAN,
                im: 1.0 / 3.0,
                im_divergent: false,
                log_singular: true,
            },
            SigmaRow {
                lambda: 1.0,
                re: f64::NAN,
                im: f64::INFINITY,
                im_divergent: true,
                log_singular: false,
            },
        ];
        let text = sigma_csv(&rows);
        let back = parse_sigma_csv(&text).unwrap();
        assert_eq!(back.len(), 2);
        assert!(back[0].re.is_nan() && back[0].log_singular && back[1].im_divergent);
        assert_eq!(back[0].im, 0.333333333333);
    }

    #[test]
    fn trace_round_trips() {
        let tr =
            crate::dynamics::survival_amplitude(&CouplingMeasure::zero(), 1.0, &[0.0, 0.25, 2.0])
                .unwrap();
        let csv = parse_trace_csv(&tr.to_csv()).unwrap();
        assert_eq!(csv.times, tr.times);
        let json: SurvivalTrace = from_versioned_json(&to_versioned_json(&tr)).unwrap();
        for (a, b) in json.amplitudes.iter().zip(&tr.amplitudes) {
            assert!((a - b).norm() < 1e-11);
        }
    }
}
