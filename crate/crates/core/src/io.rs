//! Scenario documents (TOML on disk, the same field layout as JSON over the
//! wire) and trace export.
//!
//! The on-disk grammar is described in `docs/scenario-format.md`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{SettlementEvent, SimulationConfig, SimulationTrace};
use crate::error::Error;
use crate::model::{
    AlternateSupplierOffer, DiscountModel, GompertzParams, Installment, PerformanceKind,
    PerformanceType, PhasorConstraint, Scenario,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Invalid(#[from] Error),
}

impl ParseError {
    /// Name of the violated model invariant, for semantic errors.
    pub fn invariant_name(&self) -> Option<&'static str> {
        match self {
            ParseError::Invalid(e) => e.invariant_name(),
            ParseError::Syntax { .. } => None,
        }
    }
}

/// Optional simulation settings carried by a scenario file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
}

impl SimulationOverrides {
    pub fn apply(&self, mut cfg: SimulationConfig) -> SimulationConfig {
        if let Some(t) = self.t_max {
            cfg.t_max = t;
        }
        if let Some(n) = self.steps {
            cfg.steps = n;
        }
        cfg
    }
}

/// A validated scenario plus optional alternate offer and simulation settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(into = "DocumentFile")]
pub struct ScenarioDocument {
    pub schema_version: u32,
    pub scenario: Scenario,
    pub alternate_offer: Option<AlternateSupplierOffer>,
    pub simulation: Option<SimulationOverrides>,
}

impl ScenarioDocument {
    pub fn new(scenario: Scenario) -> Self {
        ScenarioDocument {
            schema_version: SCHEMA_VERSION,
            scenario,
            alternate_offer: None,
            simulation: None,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::invariant(
                "schema_version_supported",
                format!(
                    "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                    self.schema_version
                ),
            ));
        }
        self.scenario.validate()?;
        if let Some(offer) = &self.alternate_offer {
            offer.validate()?;
        }
        if let Some(sim) = &self.simulation {
            let cfg = sim.apply(SimulationConfig::default());
            cfg.validate()?;
        }
        Ok(())
    }

    pub fn simulation_config(&self) -> SimulationConfig {
        self.simulation
            .unwrap_or_default()
            .apply(SimulationConfig::default())
    }

    /// Build from a JSON value laid out like the TOML file.
    pub fn from_json(value: serde_json::Value) -> Result<Self, ParseError> {
        let file: DocumentFile = serde_json::from_value(value).map_err(|e| ParseError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let doc = ScenarioDocument::try_from(file)?;
        Ok(doc)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("scenario documents always serialize")
    }
}

// On-disk layout.

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DocumentFile {
    pub schema_version: u32,
    pub contract: ContractSection,
    pub dynamics: DynamicsSection,
    pub performances: Vec<PerformanceSection>,
    pub installments: Vec<InstallmentSection>,
    pub constraints: ConstraintsSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationOverrides>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alternate_offer: Option<AlternateSupplierOffer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractSection {
    pub unit_value: f64,
    pub unit_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSection {
    pub discount_rate: f64,
    pub gompertz_a: f64,
    pub gompertz_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerformanceSection {
    pub id: String,
    pub kind: PerformanceKind,
    pub value_per_unit: f64,
    #[serde(default = "one")]
    pub cost_per_unit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstallmentSection {
    pub delay: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit_cap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintsSection {
    pub buyer_demand: PhasorSection,
    pub supplier_solvency: PhasorSection,
    pub supplier_capacity: PhasorSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhasorSection {
    pub core: f64,
    #[serde(default)]
    pub modulation: f64,
    #[serde(default = "one")]
    pub phase_rate: f64,
}

fn one() -> f64 {
    1.0
}

impl From<PhasorSection> for PhasorConstraint {
    fn from(p: PhasorSection) -> Self {
        PhasorConstraint::new(p.core, p.modulation, p.phase_rate)
    }
}

impl From<PhasorConstraint> for PhasorSection {
    fn from(p: PhasorConstraint) -> Self {
        PhasorSection {
            core: p.core,
            modulation: p.modulation,
            phase_rate: p.phase_rate,
        }
    }
}

impl TryFrom<DocumentFile> for ScenarioDocument {
    type Error = Error;

    fn try_from(f: DocumentFile) -> Result<Self, Error> {
        let scenario = Scenario {
            performances: f
                .performances
                .into_iter()
                .map(|p| PerformanceType {
                    id: p.id,
                    kind: p.kind,
                    value_per_unit: p.value_per_unit,
                    cost_per_unit: p.cost_per_unit,
                })
                .collect(),
            installments: f
                .installments
                .iter()
                .enumerate()
                .map(|(i, inst)| Installment {
                    index: i + 1,
                    delay: inst.delay,
                })
                .collect(),
            unit_caps: f.installments.iter().map(|i| i.unit_cap).collect(),
            discount: DiscountModel::new(f.dynamics.discount_rate),
            buyer_demand: f.constraints.buyer_demand.into(),
            supplier_solvency: f.constraints.supplier_solvency.into(),
            supplier_capacity: f.constraints.supplier_capacity.into(),
            contract_unit_value: f.contract.unit_value,
            contract_unit_cost: f.contract.unit_cost,
            gompertz: GompertzParams::new(f.dynamics.gompertz_a, f.dynamics.gompertz_b),
        };
        let doc = ScenarioDocument {
            schema_version: f.schema_version,
            scenario,
            alternate_offer: f.alternate_offer,
            simulation: f.simulation,
        };
        doc.validate()?;
        Ok(doc)
    }
}

impl From<ScenarioDocument> for DocumentFile {
    fn from(d: ScenarioDocument) -> Self {
        let s = d.scenario;
        DocumentFile {
            schema_version: d.schema_version,
            contract: ContractSection {
                unit_value: s.contract_unit_value,
                unit_cost: s.contract_unit_cost,
            },
            dynamics: DynamicsSection {
                discount_rate: s.discount.rate,
                gompertz_a: s.gompertz.a,
                gompertz_b: s.gompertz.b,
            },
            performances: s
                .performances
                .into_iter()
                .map(|p| PerformanceSection {
                    id: p.id,
                    kind: p.kind,
                    value_per_unit: p.value_per_unit,
                    cost_per_unit: p.cost_per_unit,
                })
                .collect(),
            installments: s
                .installments
                .iter()
                .zip(&s.unit_caps)
                .map(|(i, cap)| InstallmentSection {
                    delay: i.delay,
                    unit_cap: *cap,
                })
                .collect(),
            constraints: ConstraintsSection {
                buyer_demand: s.buyer_demand.into(),
                supplier_solvency: s.supplier_solvency.into(),
                supplier_capacity: s.supplier_capacity.into(),
            },
            simulation: d.simulation,
            alternate_offer: d.alternate_offer,
        }
    }
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before
        .rfind('\n')
        .map_or(before.len(), |nl| before.len() - nl - 1)
        + 1;
    (line, column)
}

pub fn parse_scenario(text: &str) -> Result<ScenarioDocument, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError::Syntax {
            line: 1,
            column: 1,
            message: "empty scenario document".into(),
        });
    }
    let file: DocumentFile = toml::from_str(text).map_err(|e| syntax_error(text, e))?;
    Ok(ScenarioDocument::try_from(file)?)
}

fn syntax_error(text: &str, e: toml::de::Error) -> ParseError {
    let (line, column) = e
        .span()
        .map_or((1, 1), |span| line_column(text, span.start));
    ParseError::Syntax {
        line,
        column,
        message: e.message().to_string(),
    }
}

/// Read an alternate-supplier offer. Accepts a full scenario document (its
/// `[alternate_offer]` is used), a file holding only an `[alternate_offer]`
/// table, or the offer fields at top level.
pub fn parse_alternate_offer(text: &str) -> Result<AlternateSupplierOffer, ParseError> {
    let table: toml::Table = toml::from_str(text).map_err(|e| syntax_error(text, e))?;
    let offer = if table.contains_key("schema_version") {
        parse_scenario(text)?.alternate_offer.ok_or_else(|| {
            Error::invariant(
                "alternate_offer_present",
                "scenario document has no [alternate_offer] section",
            )
        })?
    } else if table.len() == 1 && table.contains_key("alternate_offer") {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Wrapped {
            alternate_offer: AlternateSupplierOffer,
        }
        toml::from_str::<Wrapped>(text)
            .map_err(|e| syntax_error(text, e))?
            .alternate_offer
    } else {
        toml::from_str(text).map_err(|e| syntax_error(text, e))?
    };
    offer.validate()?;
    Ok(offer)
}

pub fn serialize_scenario(doc: &ScenarioDocument) -> String {
    toml::to_string(&DocumentFile::from(doc.clone())).expect("scenario documents always serialize")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ExportFormat::Csv),
            "json" => Ok(ExportFormat::Json),
            other => Err(format!("unknown export format `{other}` (csv or json)")),
        }
    }
}

/// `x` rounded to six significant digits, without trailing zeros.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_finite() {
            "0".into()
        } else {
            x.to_string()
        };
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-5..=15).contains(&exp) {
        return format!("{x:.5e}");
    }
    let decimals = (5 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    let s = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

fn csv_header(s: &Scenario) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    cols.extend(
        s.decision_cells()
            .iter()
            .map(|(n, m)| format!("g_{}_{}", n + 1, m + 1)),
    );
    cols.extend(
        ["N_min", "S", "R", "G", "gompertz"]
            .iter()
            .map(|c| c.to_string()),
    );
    cols
}

fn settlement_footer(ev: &SettlementEvent) -> String {
    format!(
        "# settlement,t_star={},units={},money={},G={},rule={}",
        sig6(ev.t_star),
        sig6(ev.units_settled),
        sig6(ev.money_settled),
        sig6(ev.buyer_value),
        serde_json::to_value(ev.rule)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default()
    )
}

/// Trace as CSV (header row, one row per point, six significant digits,
/// `# settlement` footer when a settlement was found) or as JSON.
pub fn export_trace(s: &Scenario, trace: &SimulationTrace, format: ExportFormat) -> String {
    match format {
        ExportFormat::Json => {
            serde_json::to_string_pretty(trace).expect("traces always serialize") + "\n"
        }
        ExportFormat::Csv => {
            let cells = s.decision_cells();
            let mut out = csv_header(s).join(",");
            out.push('\n');
            for p in &trace.points {
                let mut row = vec![sig6(p.t)];
                row.extend(cells.iter().map(|&(n, m)| sig6(p.offers[n][m])));
                row.extend(
                    [
                        p.constraints.demand,
                        p.constraints.solvency,
                        p.constraints.capacity,
                        p.buyer_value,
                        p.gompertz,
                    ]
                    .iter()
                    .map(|v| sig6(*v)),
                );
                out.push_str(&row.join(","));
                out.push('\n');
            }
            if let Some(ev) = &trace.settlement {
                out.push_str(&settlement_footer(ev));
                out.push('\n');
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{evaluate_point, simulate, SettlementRule};
    use crate::model::Regime;
    use crate::presets::Preset;

    #[test]
    fn fig2_preset_values() {
        let doc = parse_scenario(Preset::Fig2Red.text()).unwrap();
        let s = &doc.scenario;
        assert_eq!(s.performances[0].value_per_unit, 1000.0);
        assert_eq!(s.performances[0].cost_per_unit, 1100.0);
        assert_eq!(s.performances[1].value_per_unit, 0.8);
        assert_eq!(s.contract_unit_value, 1000.0);
        assert_eq!(s.contract_unit_cost, 700.0);
        assert_eq!(s.unit_caps, vec![Some(100.0), None]);
        assert_eq!(s.buyer_demand, PhasorConstraint::new(170.0, 30.0, 1.0));
        assert_eq!(
            s.supplier_solvency,
            PhasorConstraint::new(200_000.0, -30_000.0, 1.5)
        );
        assert_eq!(
            s.supplier_capacity,
            PhasorConstraint::new(100_000.0, -5_000.0, 1.5)
        );
        assert_eq!(s.gompertz, GompertzParams::new(2.0, 20.0));
        assert_eq!(s.discount.rate, 0.2);
        assert_eq!(s.installments[0].delay, 1.1);
        assert_eq!(s.installments[1].delay, 1.5);
    }

    #[test]
    fn fig5_differs_only_in_second_delay() {
        let mut a = Preset::Fig2Red.scenario();
        let b = Preset::Fig5.scenario();
        assert_eq!(b.installments[1].delay, 4.0);
        a.installments[1].delay = 4.0;
        assert_eq!(a, b);
    }

    #[test]
    fn empty_input_is_a_syntax_error() {
        assert!(matches!(
            parse_scenario("  \n"),
            Err(ParseError::Syntax { line: 1, .. })
        ));
    }

    #[test]
    fn syntax_errors_carry_position() {
        let text = "schema_version = 1\n[contract]\nunit_value = = 3\n";
        match parse_scenario(text) {
            Err(ParseError::Syntax { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn semantic_errors_name_the_invariant() {
        let text = Preset::Fig2Red
            .text()
            .replace("value_per_unit = 0.8", "value_per_unit = 1.2");
        let err = parse_scenario(&text).unwrap_err();
        assert_eq!(err.invariant_name(), Some("money_value_fraction"));

        let text = Preset::Fig2Red
            .text()
            .replace("schema_version = 1", "schema_version = 7");
        let err = parse_scenario(&text).unwrap_err();
        assert_eq!(err.invariant_name(), Some("schema_version_supported"));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = format!("{}\nsurprise = 1\n", Preset::Fig2Red.text());
        assert!(parse_scenario(&text).is_err());
    }

    #[test]
    fn json_mirrors_toml_layout() {
        let doc = Preset::Fig4.document();
        let v = doc.to_json();
        assert_eq!(v["contract"]["unit_value"], 1000.0);
        assert_eq!(v["installments"][0]["unit_cap"], 100.0);
        assert_eq!(ScenarioDocument::from_json(v).unwrap(), doc);
    }

    #[test]
    fn sig6_formatting() {
        assert_eq!(sig6(27_272.727_27), "27272.7");
        assert_eq!(sig6(181.818_181), "181.818");
        assert_eq!(sig6(0.135_335_283), "0.135335");
        assert_eq!(sig6(200_000.0), "200000");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(1.0), "1");
        assert_eq!(sig6(-30_000.0), "-30000");
        assert_eq!(sig6(1.5e-9), "1.50000e-9");
    }

    fn trace_with(points: usize) -> (Scenario, SimulationTrace) {
        let s = Preset::Fig2Red.scenario();
        let trace = SimulationTrace {
            regime: Regime::UnitsPreferred,
            rule: SettlementRule::Crossing,
            points: (0..points)
                .map(|i| evaluate_point(&s, i as f64 * 0.1).unwrap())
                .collect(),
            settlement: None,
        };
        (s, trace)
    }

    #[test]
    fn csv_line_counts() {
        let (s, empty) = trace_with(0);
        let csv = export_trace(&s, &empty, ExportFormat::Csv);
        assert_eq!(csv, "t,g_1_1,g_1_2,g_2_1,N_min,S,R,G,gompertz\n");
        let (s, one) = trace_with(1);
        assert_eq!(export_trace(&s, &one, ExportFormat::Csv).lines().count(), 2);
    }

    #[test]
    fn csv_settlement_row_and_footer() {
        let s = Preset::Fig2Red.scenario();
        let trace = simulate(&s, &SimulationConfig::default()).unwrap();
        let csv = export_trace(&s, &trace, ExportFormat::Csv);
        let footer = csv.lines().last().unwrap();
        assert!(footer.starts_with("# settlement,t_star=1.16"), "{footer}");
        assert!(footer.contains("units=181.8"));
        assert!(footer.contains("money=27272"));

        let json: serde_json::Value =
            serde_json::from_str(&export_trace(&s, &trace, ExportFormat::Json)).unwrap();
        assert_eq!(json["points"].as_array().unwrap().len(), 400);
        assert_eq!(json["settlement"]["rule"], "crossing");
    }

    #[test]
    fn alternate_offer_layouts() {
        let from_doc = parse_alternate_offer(Preset::Fig4.text()).unwrap();
        assert_eq!(from_doc.alternate_value, 150_000.0);
        assert_eq!(from_doc.termination_cost, 10_000.0);

        let fields = "alternate_value = 150000.0\nexpected_damages = 50000.0\n\
                      damages_delay = 3.0\nlitigation_risk = 0.5\n\
                      alternate_failure_risk = 0.9\ntermination_cost = 10000.0\n";
        assert_eq!(parse_alternate_offer(fields).unwrap(), from_doc);
        let wrapped = format!("[alternate_offer]\n{fields}");
        assert_eq!(parse_alternate_offer(&wrapped).unwrap(), from_doc);

        let e = parse_alternate_offer(Preset::Fig2Red.text()).unwrap_err();
        assert_eq!(e.invariant_name(), Some("alternate_offer_present"));
        let e = parse_alternate_offer(&fields.replace("0.5", "1.5")).unwrap_err();
        assert_eq!(e.invariant_name(), Some("risk_weight_unit_interval"));
        let e = parse_alternate_offer(&format!("{fields}bonus = 1.0\n")).unwrap_err();
        assert!(matches!(e, ParseError::Syntax { line: 7, .. }), "{e}");
    }
}
