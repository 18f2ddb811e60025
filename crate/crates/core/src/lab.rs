//! Scenarios, built-in presets, and the end-to-end `𝒩 = 𝒞` verification.
//!
//! A [`Scenario`] is a complete, serializable description of one experiment:
//! the model, the truncated basis, the flow window and `μ` sweep, the sphere
//! grid and (optionally) the spectrum export. Identical scenarios produce
//! identical reports apart from the `timings` field.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::flow::{self, FlowError, FlowResult, FlowSetup, SpectralWindow};
use crate::models::{self, BranchLabel};
use crate::quantization::{AffineMatrixSymbol, GapCertificate, QuantizationError, TruncatedBasis, GAP_CERTIFICATE_RESOLUTION};
use crate::topology::{
    self, BandProjectorField, BandSelection, ChernMethod, ChernReport, SphereGrid, TopologyError,
};

pub const SCENARIO_SCHEMA: &str = "index-lab/scenario/v1";
pub const REPORT_SCHEMA: &str = "index-lab/report/v1";

pub const PRESETS: &[&str] = &[
    "normal-form",
    "normal-form-reflected",
    "normal-form-corrupted",
    "matsuno",
    "matsuno-upper-gap",
    "matsuno-lower-gap",
    "matsuno-corrupted",
    "ts2",
    "constant",
];

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("spectral flow failed: {0}")]
    Flow(#[from] FlowError),
    #[error("Chern computation failed: {0}")]
    Chern(#[from] TopologyError),
    #[error("Chern methods disagree for band {band}: curvature {curvature}, clutching {clutching}, section zeros {zeros}")]
    ChernDisagreement { band: usize, curvature: i64, clutching: i64, zeros: i64 },
    #[error("scenario JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl From<QuantizationError> for LabError {
    fn from(e: QuantizationError) -> Self {
        Self::Scenario(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    NormalForm,
    Matsuno,
    Ts2,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    Hermitian,
    Diagonal,
}

/// `δ · P · exp(−(x² + ξ²)/width²)` with a seeded random unit-norm `P`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    pub delta: f64,
    pub seed: u64,
    #[serde(default = "default_perturbation_kind")]
    pub kind: PerturbationKind,
    #[serde(default = "default_perturbation_width")]
    pub width: f64,
}

fn default_perturbation_kind() -> PerturbationKind {
    PerturbationKind::Hermitian
}

fn default_perturbation_width() -> f64 {
    flow::PERTURBATION_WIDTH
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// Use `μ ↦ −μ`.
    #[serde(default)]
    pub reflected: bool,
    /// Exchange `x` and `ξ` (reverses the sphere orientation).
    #[serde(default)]
    pub swapped: bool,
    /// Value of the constant model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationSpec>,
    /// Overrides of the model's gap data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_band: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_center: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_constant: Option<f64>,
}

impl ModelSpec {
    pub fn of(kind: ModelKind) -> Self {
        Self {
            kind,
            reflected: false,
            swapped: false,
            value: None,
            perturbation: None,
            gap_band: None,
            gap_center: None,
            gap_constant: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisSpec {
    pub max_level: usize,
    pub epsilon: f64,
    #[serde(default = "default_guard_levels")]
    pub guard_levels: usize,
}

fn default_guard_levels() -> usize {
    crate::quantization::DEFAULT_GUARD_LEVELS
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MuRange {
    pub min: f64,
    pub max: f64,
    /// Number of samples, endpoints included.
    pub steps: usize,
}

/// Grid for the tabular spectrum export.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSpec {
    pub mu: MuRange,
    pub omega_min: f64,
    pub omega_max: f64,
    /// Highest level of the closed-form branch table.
    #[serde(default = "default_closed_form_level")]
    pub closed_form_max_level: usize,
}

fn default_closed_form_level() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: String,
    pub name: String,
    pub model: ModelSpec,
    pub basis: BasisSpec,
    pub window: SpectralWindow,
    pub mu: MuRange,
    pub grid: usize,
    #[serde(default = "default_equator_samples")]
    pub equator_samples: usize,
    /// Bands (1-based) whose Chern numbers are reported; every band when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bands: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumSpec>,
}

fn default_equator_samples() -> usize {
    256
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, LabError> {
        let s: Self = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), LabError> {
        if self.schema != SCENARIO_SCHEMA {
            return Err(LabError::Scenario(format!("schema {:?} is not {SCENARIO_SCHEMA:?}", self.schema)));
        }
        self.symbol()?;
        self.basis()?;
        self.window.validate().map_err(|e| LabError::Scenario(e.to_string()))?;
        if !(self.mu.min < self.mu.max) || self.mu.steps < flow::MIN_STEPS {
            return Err(LabError::Scenario(format!(
                "mu range needs min < max and at least {} steps",
                flow::MIN_STEPS
            )));
        }
        SphereGrid::new(self.grid).map_err(|e| LabError::Scenario(e.to_string()))?;
        if self.equator_samples < 8 {
            return Err(LabError::Scenario("equator_samples must be at least 8".into()));
        }
        if let Some(sp) = &self.spectrum {
            if !(sp.mu.min <= sp.mu.max && sp.mu.steps >= 1 && sp.omega_min < sp.omega_max) {
                return Err(LabError::Scenario("spectrum grid is malformed".into()));
            }
        }
        let dim = self.symbol()?.dim();
        if let Some(bands) = &self.bands {
            if bands.is_empty() || bands.iter().any(|&b| b == 0 || b > dim) || bands.windows(2).any(|w| w[0] >= w[1]) {
                return Err(LabError::Scenario(format!("bands must be strictly increasing within 1..={dim}")));
            }
        }
        if self.model.kind == ModelKind::Matsuno && self.basis.epsilon != 1.0 {
            return Err(LabError::Scenario("the matsuno model is defined at epsilon = 1".into()));
        }
        Ok(())
    }

    pub fn symbol(&self) -> Result<AffineMatrixSymbol, LabError> {
        let m = &self.model;
        let mut s = match m.kind {
            ModelKind::NormalForm => models::normal_form_symbol(),
            ModelKind::Matsuno => models::matsuno_symbol(),
            ModelKind::Ts2 => models::ts2_symbol(),
            ModelKind::Constant => models::constant_symbol(
                m.value.ok_or_else(|| LabError::Scenario("the constant model needs a value".into()))?,
            ),
        };
        if m.reflected {
            s = s.mu_reflected();
        }
        if m.swapped {
            s = s.swapped_x_xi();
        }
        if let Some(r) = m.gap_band {
            s = s.with_gap_band(r)?;
        }
        if let Some(c) = m.gap_center {
            s = s.with_gap_center(c);
        }
        if let Some(c) = m.gap_constant {
            if !(c > 0.0) {
                return Err(LabError::Scenario("gap_constant must be positive".into()));
            }
            s = s.with_gap_constant(c);
        }
        if let Some(p) = &m.perturbation {
            if p.delta != 0.0 {
                let unit = match p.kind {
                    PerturbationKind::Hermitian => flow::random_hermitian_unit(s.dim(), p.seed),
                    PerturbationKind::Diagonal => flow::random_diagonal_unit(s.dim(), p.seed),
                };
                let scaled = crate::linalg::CMat::from_fn(s.dim(), s.dim(), |i, j| unit[(i, j)] * p.delta);
                s = s.with_localized_term(scaled, p.width)?;
            }
        }
        Ok(s.with_name(self.name.clone()))
    }

    pub fn basis(&self) -> Result<TruncatedBasis, LabError> {
        Ok(TruncatedBasis::new(self.basis.max_level, self.basis.epsilon, self.basis.guard_levels)?)
    }

    pub fn flow_setup(&self) -> FlowSetup {
        FlowSetup { window: self.window, mu_min: self.mu.min, mu_max: self.mu.max, steps: self.mu.steps }
    }

    /// Bands whose Chern numbers are reported.
    pub fn reported_bands(&self) -> Result<Vec<usize>, LabError> {
        Ok(match &self.bands {
            Some(b) => b.clone(),
            None => (1..=self.symbol()?.dim()).collect(),
        })
    }

    /// Bands below the gap, or `None` if the gap is below the whole spectrum.
    pub fn sub_gap_bands(&self) -> Result<Option<BandSelection>, LabError> {
        let r = self.symbol()?.gap_band();
        Ok(if r == 0 { None } else { Some(BandSelection::new(1, r)?) })
    }

    pub fn with_levels(mut self, max_level: usize) -> Self {
        self.basis.max_level = max_level;
        self
    }

    pub fn with_grid(mut self, grid: usize) -> Self {
        self.grid = grid;
        self
    }

    /// A built-in scenario by name; see [`PRESETS`].
    pub fn preset(name: &str) -> Result<Self, LabError> {
        let normal = || Scenario {
            schema: SCENARIO_SCHEMA.into(),
            name: "normal-form".into(),
            model: ModelSpec::of(ModelKind::NormalForm),
            basis: BasisSpec { max_level: 24, epsilon: 1.0, guard_levels: 5 },
            window: SpectralWindow { omega_min: -0.9, omega_max: 0.9, reference: 0.0 },
            mu: MuRange { min: -2.0, max: 2.0, steps: 161 },
            grid: 64,
            equator_samples: 256,
            bands: None,
            spectrum: Some(SpectrumSpec {
                mu: MuRange { min: -2.0, max: 2.0, steps: 161 },
                omega_min: -5.0,
                omega_max: 5.0,
                closed_form_max_level: 10,
            }),
        };
        let matsuno = || Scenario {
            schema: SCENARIO_SCHEMA.into(),
            name: "matsuno-upper-gap".into(),
            model: ModelSpec::of(ModelKind::Matsuno),
            basis: BasisSpec { max_level: 60, epsilon: 1.0, guard_levels: 5 },
            window: SpectralWindow { omega_min: 1.1, omega_max: 1.5, reference: 1.3 },
            mu: MuRange { min: -6.0, max: 6.0, steps: 241 },
            grid: 64,
            equator_samples: 256,
            bands: None,
            spectrum: Some(SpectrumSpec {
                mu: MuRange { min: -4.0, max: 4.0, steps: 161 },
                omega_min: -6.0,
                omega_max: 6.0,
                closed_form_max_level: 20,
            }),
        };
        let s = match name {
            "normal-form" => normal(),
            "normal-form-reflected" => {
                let mut s = normal();
                s.name = name.into();
                s.model.reflected = true;
                s
            }
            "normal-form-corrupted" => {
                let mut s = normal();
                s.name = name.into();
                s.model.gap_band = Some(2);
                s
            }
            "matsuno" => {
                let mut s = matsuno();
                s.name = name.into();
                s
            }
            "matsuno-upper-gap" => matsuno(),
            "matsuno-lower-gap" => {
                let mut s = matsuno();
                s.name = name.into();
                s.model.gap_band = Some(1);
                s.model.gap_center = Some(-0.5);
                s.window = SpectralWindow { omega_min: -1.5, omega_max: -1.1, reference: -1.3 };
                s
            }
            "matsuno-corrupted" => {
                let mut s = matsuno();
                s.name = name.into();
                s.model.gap_band = Some(1);
                s
            }
            "ts2" => Scenario {
                schema: SCENARIO_SCHEMA.into(),
                name: name.into(),
                model: ModelSpec::of(ModelKind::Ts2),
                basis: BasisSpec { max_level: 60, epsilon: 1.0, guard_levels: 5 },
                window: SpectralWindow { omega_min: -0.9, omega_max: -0.1, reference: -0.5 },
                mu: MuRange { min: -6.0, max: 6.0, steps: 241 },
                grid: 64,
                equator_samples: 256,
                bands: Some(vec![1]),
                spectrum: None,
            },
            "constant" => Scenario {
                schema: SCENARIO_SCHEMA.into(),
                name: name.into(),
                model: ModelSpec { value: Some(5.0), ..ModelSpec::of(ModelKind::Constant) },
                basis: BasisSpec { max_level: 24, epsilon: 1.0, guard_levels: 5 },
                window: SpectralWindow { omega_min: -0.9, omega_max: 0.9, reference: 0.0 },
                mu: MuRange { min: -2.0, max: 2.0, steps: 81 },
                grid: 16,
                equator_samples: 64,
                bands: None,
                spectrum: Some(SpectrumSpec {
                    mu: MuRange { min: -2.0, max: 2.0, steps: 41 },
                    omega_min: -0.9,
                    omega_max: 0.9,
                    closed_form_max_level: 0,
                }),
            },
            other => return Err(LabError::UnknownPreset(other.into())),
        };
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
}

/// The three Chern computations for one band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandChern {
    pub band: usize,
    pub curvature: ChernReport,
    pub clutching: ChernReport,
    pub section_zeros: ChernReport,
    pub agreement: bool,
}

impl BandChern {
    pub fn c(&self) -> i64 {
        self.curvature.c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapCheck {
    pub holds: bool,
    pub certificate: Option<GapCertificate>,
    pub violation: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub flow_ms: f64,
    pub chern_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub schema: String,
    pub scenario: Scenario,
    pub gap_band: usize,
    pub gap_certificate: GapCheck,
    /// Whether the flow window sits inside the symbol's certified gap
    /// interval; informational only.
    pub window_in_gap: bool,
    pub flow: FlowResult,
    pub bands: Vec<BandChern>,
    /// Sum over the reported bands; zero when every band is reported.
    pub band_sum: i64,
    /// Curvature Chern number of the bundle of bands below the gap
    /// (`None` when that bundle is empty).
    pub sub_gap_bundle: Option<ChernReport>,
    #[serde(rename = "N")]
    pub n: i64,
    #[serde(rename = "C")]
    pub c: i64,
    pub verdict: Verdict,
    pub timings: Timings,
}

impl VerificationReport {
    /// PASS iff the gap certificate holds and `𝒩 = 𝒞`.
    pub fn derive_verdict(gap_holds: bool, n: i64, c: i64) -> Verdict {
        if gap_holds && n == c {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

fn gap_check(symbol: &AffineMatrixSymbol) -> GapCheck {
    match symbol.certify_gap(GAP_CERTIFICATE_RESOLUTION) {
        Ok(c) => GapCheck { holds: true, certificate: Some(c), violation: None },
        Err(e) => GapCheck { holds: false, certificate: None, violation: Some(e.to_string()) },
    }
}

/// All three methods on one band; disagreement is an error.
pub fn band_chern(symbol: &AffineMatrixSymbol, band: usize, grid: &SphereGrid, equator_samples: usize) -> Result<BandChern, LabError> {
    let field = BandProjectorField::new(symbol.clone(), BandSelection::single(band)?)?;
    let curvature = topology::chern_curvature(&field, grid)?;
    let clutching = topology::chern_clutching(&field, equator_samples, None)?;
    let section_zeros = topology::chern_section_zeros(&field, None)?;
    let agreement = curvature.c == clutching.c && clutching.c == section_zeros.c;
    if !agreement {
        return Err(LabError::ChernDisagreement {
            band,
            curvature: curvature.c,
            clutching: clutching.c,
            zeros: section_zeros.c,
        });
    }
    Ok(BandChern { band, curvature, clutching, section_zeros, agreement })
}

/// Flow through the scenario's gap, Chern numbers of every band by all three
/// methods, and the verdict `𝒩 = 𝒞(bands below the gap)`.
pub fn run_verify(scenario: &Scenario) -> Result<VerificationReport, LabError> {
    let start = Instant::now();
    scenario.validate()?;
    let symbol = scenario.symbol()?;
    let basis = scenario.basis()?;
    let gap_certificate = gap_check(&symbol);
    let window_in_gap = scenario.window.fits_gap(&symbol, 0.0);

    let t = Instant::now();
    let flow = scenario.flow_setup().run(&symbol, &basis)?;
    let flow_ms = ms(t);

    let t = Instant::now();
    let grid = SphereGrid::new(scenario.grid)?;
    let bands = scenario
        .reported_bands()?
        .into_iter()
        .map(|b| band_chern(&symbol, b, &grid, scenario.equator_samples))
        .collect::<Result<Vec<_>, _>>()?;
    let band_sum = bands.iter().map(BandChern::c).sum();
    let sub_gap_bundle = match scenario.sub_gap_bands()? {
        None => None,
        Some(sel) => Some(topology::chern_curvature(&BandProjectorField::new(symbol.clone(), sel)?, &grid)?),
    };
    let chern_ms = ms(t);

    let c = sub_gap_bundle.as_ref().map_or(0, |r| r.c);
    let n = flow.n;
    let verdict = VerificationReport::derive_verdict(gap_certificate.holds, n, c);
    Ok(VerificationReport {
        schema: REPORT_SCHEMA.into(),
        scenario: scenario.clone(),
        gap_band: symbol.gap_band(),
        gap_certificate,
        window_in_gap,
        flow,
        bands,
        band_sum,
        sub_gap_bundle,
        n,
        c,
        verdict,
        timings: Timings { flow_ms, chern_ms, total_ms: ms(start) },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowExport {
    pub schema: String,
    pub scenario: String,
    pub flow: FlowResult,
    pub records: Vec<flow::SweepRecord>,
}

/// Just the spectral flow.
pub fn run_flow(scenario: &Scenario) -> Result<FlowExport, LabError> {
    scenario.validate()?;
    let sweep = scenario.flow_setup().sweep(&scenario.symbol()?, &scenario.basis()?)?;
    let flow = flow::spectral_index(&sweep)?;
    Ok(FlowExport { schema: REPORT_SCHEMA.into(), scenario: scenario.name.clone(), flow, records: sweep.records() })
}

/// One numerical eigenvalue of the spectrum export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub mu: f64,
    /// Closed-form label when the eigenvalue matches one, else `#k` (rank in the slice).
    pub branch: String,
    pub omega: f64,
    pub spurious_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormRow {
    pub mu: f64,
    pub branch: BranchLabel,
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumExport {
    pub schema: String,
    pub scenario: String,
    pub rows: Vec<SpectrumRow>,
    pub closed_form: Option<Vec<ClosedFormRow>>,
}

/// Tolerance for attaching a closed-form label to a numerical eigenvalue.
pub const LABEL_TOLERANCE: f64 = 1e-8;

/// Closed-form branches of the named models at `mu`, restricted to an ω range.
pub fn closed_form_branches(scenario: &Scenario, mu: f64, lo: f64, hi: f64, max_level: usize) -> Option<Vec<(BranchLabel, f64)>> {
    let m = &scenario.model;
    if m.perturbation.is_some_and(|p| p.delta != 0.0) || m.swapped {
        return None;
    }
    let mu_eff = if m.reflected { -mu } else { mu };
    let all = match m.kind {
        ModelKind::NormalForm => models::normal_form_branches(mu_eff, scenario.basis.epsilon, max_level).ok()?,
        ModelKind::Matsuno if scenario.basis.epsilon == 1.0 => models::matsuno_branches(mu_eff, max_level),
        _ => return None,
    };
    Some(all.into_iter().filter(|(_, w)| (lo..=hi).contains(w)).collect())
}

/// Eigenvalues on the export grid, spurious ones included, plus the
/// closed-form branch table for the named models.
pub fn run_spectrum(scenario: &Scenario) -> Result<SpectrumExport, LabError> {
    scenario.validate()?;
    let grid = scenario
        .spectrum
        .ok_or_else(|| LabError::Scenario(format!("scenario {} has no spectrum grid", scenario.name)))?;
    let symbol = scenario.symbol()?;
    let basis = scenario.basis()?;
    let n = grid.mu.steps;
    // Endpoints are placed exactly so that μ = ±max appears verbatim.
    let mus: Vec<f64> = (0..n)
        .map(|k| match k {
            0 => grid.mu.min,
            k if k == n - 1 => grid.mu.max,
            k => grid.mu.min + (grid.mu.max - grid.mu.min) * k as f64 / (n - 1) as f64,
        })
        .collect();
    use rayon::prelude::*;
    let slices = mus
        .par_iter()
        .map(|&mu| flow::spectrum_slice(&symbol, &basis, mu, grid.omega_min, grid.omega_max))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::new();
    let mut closed_rows: Option<Vec<ClosedFormRow>> = None;
    for (&mu, slice) in mus.iter().zip(&slices) {
        let table = closed_form_branches(scenario, mu, grid.omega_min, grid.omega_max, grid.closed_form_max_level);
        let mut used = vec![false; table.as_ref().map_or(0, Vec::len)];
        for (k, &(omega, weight)) in slice.iter().enumerate() {
            let mut branch = format!("#{k}");
            if let Some(t) = &table {
                if !flow::is_spurious_weight(weight) {
                    let best = t
                        .iter()
                        .enumerate()
                        .filter(|(i, (_, w))| !used[*i] && (w - omega).abs() < LABEL_TOLERANCE)
                        .min_by(|a, b| (a.1 .1 - omega).abs().total_cmp(&(b.1 .1 - omega).abs()));
                    if let Some((i, (label, _))) = best {
                        used[i] = true;
                        branch = label.to_string();
                    }
                }
            }
            rows.push(SpectrumRow { mu, branch, omega, spurious_weight: weight });
        }
        if let Some(t) = table {
            closed_rows
                .get_or_insert_with(Vec::new)
                .extend(t.into_iter().map(|(branch, omega)| ClosedFormRow { mu, branch, omega }));
        }
    }
    Ok(SpectrumExport { schema: REPORT_SCHEMA.into(), scenario: scenario.name.clone(), rows, closed_form: closed_rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChernRequest {
    Curvature,
    Clutching,
    Zeros,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChernExport {
    pub schema: String,
    pub scenario: String,
    pub method: ChernRequest,
    /// One Chern number per reported band, ascending band order.
    #[serde(rename = "C")]
    pub c: Vec<i64>,
    pub band_sum: i64,
    /// Present for `all`: whether the three methods agree on every band.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agreement: Option<bool>,
    pub reports: Vec<ChernReport>,
}

/// Chern numbers of every band of the scenario's symbol.
pub fn run_chern(scenario: &Scenario, method: ChernRequest) -> Result<ChernExport, LabError> {
    scenario.validate()?;
    let symbol = scenario.symbol()?;
    let grid = SphereGrid::new(scenario.grid)?;
    let mut reports = Vec::new();
    let mut c = Vec::new();
    let mut agreement = true;
    for band in scenario.reported_bands()? {
        let field = BandProjectorField::new(symbol.clone(), BandSelection::single(band)?)?;
        let mut run = |m: ChernMethod| -> Result<i64, LabError> {
            let r = match m {
                ChernMethod::Curvature => topology::chern_curvature(&field, &grid)?,
                ChernMethod::Clutching => topology::chern_clutching(&field, scenario.equator_samples, None)?,
                ChernMethod::SectionZeros => topology::chern_section_zeros(&field, None)?,
            };
            let value = r.c;
            reports.push(r);
            Ok(value)
        };
        let value = match method {
            ChernRequest::Curvature => run(ChernMethod::Curvature)?,
            ChernRequest::Clutching => run(ChernMethod::Clutching)?,
            ChernRequest::Zeros => run(ChernMethod::SectionZeros)?,
            ChernRequest::All => {
                let a = run(ChernMethod::Curvature)?;
                let b = run(ChernMethod::Clutching)?;
                let z = run(ChernMethod::SectionZeros)?;
                agreement &= a == b && b == z;
                a
            }
        };
        c.push(value);
    }
    Ok(ChernExport {
        schema: REPORT_SCHEMA.into(),
        scenario: scenario.name.clone(),
        method,
        band_sum: c.iter().sum(),
        c,
        agreement: (method == ChernRequest::All).then_some(agreement),
        reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip() {
        for name in PRESETS {
            let s = Scenario::preset(name).unwrap();
            s.validate().unwrap();
            let back = Scenario::from_json(&s.to_json()).unwrap();
            assert_eq!(back, s);
        }
        assert!(matches!(Scenario::preset("nope"), Err(LabError::UnknownPreset(_))));
    }

    #[test]
    fn schema_and_unknown_fields_are_checked() {
        let mut s = Scenario::preset("constant").unwrap();
        s.schema = "v0".into();
        assert!(Scenario::from_json(&s.to_json()).is_err());
        let text = Scenario::preset("constant").unwrap().to_json().replacen("{", "{\"bogus\": 1,", 1);
        assert!(Scenario::from_json(&text).is_err());
    }

    #[test]
    fn constant_scenario_passes() {
        let r = run_verify(&Scenario::preset("constant").unwrap()).unwrap();
        assert_eq!((r.n, r.c, r.verdict), (0, 0, Verdict::Pass));
        assert!(r.sub_gap_bundle.is_none());
        let sp = run_spectrum(&Scenario::preset("constant").unwrap()).unwrap();
        assert!(sp.rows.is_empty() && sp.closed_form.is_none());
    }

    #[test]
    fn verdict_rule() {
        assert_eq!(VerificationReport::derive_verdict(true, 2, 2), Verdict::Pass);
        assert_eq!(VerificationReport::derive_verdict(true, 1, 0), Verdict::Fail);
        assert_eq!(VerificationReport::derive_verdict(false, 1, 1), Verdict::Fail);
    }
}
