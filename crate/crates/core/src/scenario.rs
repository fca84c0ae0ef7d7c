//! TOML-driven scenarios.
//!
//! A scenario file has the sections `[plan]`, `[scene]`, `[receiver]`,
//! `[interference]` (optional), `[processing]` and `[output]`. Every
//! physical key carries its SI unit in its name and unknown keys are
//! rejected. See the README for the full grammar.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::dechirp::{apply_gap, dechirp_frame};
use crate::export;
use crate::gapfill::fill_gap;
use crate::isar::{
    aperture_angle, center_wavelength, collect_trains_with, cross_range_resolution, form_image,
    slow_time_profiles, ImageOptions, IsarImage, TrainProcessing,
};
use crate::plan::{validate_plan, PlanParams, ValidationReport, WaveformPlan};
use crate::profile::{
    extract_peaks, fft_size_for, mainlobe_width_392, measured_resolution, range_profile,
    spurious_sidelobe_db, Peak, RangeProfile, SPUR_EXCLUSION_WIDTHS,
};
use crate::scene::{make_two_target_scene, make_v_scene, GapSpec, Scatterer, Scene};
use crate::synth::{stitch, SyntheticSignal};
use crate::window::Window;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneKind {
    TwoTarget,
    VTarget,
    Points,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub kind: SceneKind,
    pub center_range_m: f64,
    #[serde(default)]
    pub omega_rad_s: f64,
    /// `two_target` only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub separation_m: Option<f64>,
    /// `v_target` only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing_m: Option<f64>,
    /// `points` only.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scatterers: Vec<Scatterer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverConfig {
    #[serde(default = "default_sample_rate")]
    pub sample_rate_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    #[serde(default)]
    pub rng_seed: u64,
}

fn default_sample_rate() -> f64 {
    100e6
}

impl Default for ReceiverConfig {
    fn default() -> Self {
        ReceiverConfig {
            sample_rate_hz: default_sample_rate(),
            snr_db: None,
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterferenceConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band_lo_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band_hi_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub indices: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ar_order: Option<usize>,
    /// Reconstruct the masked data; when false only the gapped result is produced.
    #[serde(default = "yes")]
    pub fill: bool,
}

fn yes() -> bool {
    true
}

impl InterferenceConfig {
    pub fn gap_spec(&self) -> Result<GapSpec> {
        match (self.band_lo_hz, self.band_hi_hz, &self.indices) {
            (Some(lo), Some(hi), None) => Ok(GapSpec::Band { lo, hi }),
            (None, None, Some(ix)) => Ok(GapSpec::Indices(ix.clone())),
            _ => Err(Error::Config(
                "[interference] needs either band_lo_hz and band_hi_hz, or indices".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Profile,
    Isar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessingConfig {
    #[serde(default = "default_mode")]
    pub mode: Mode,
    /// Fast-time (range) window.
    #[serde(default)]
    pub window: Window,
    /// FFT length is the next power of two at or above this multiple of the signal length.
    #[serde(default = "default_oversample")]
    pub fft_oversample: usize,
    /// Explicit FFT length; overrides `fft_oversample`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fft_size: Option<usize>,
    /// Subpulse counts to process; empty means the plan's own count.
    #[serde(default)]
    pub n_used: Vec<usize>,
    /// Trains per image (isar mode).
    #[serde(default = "default_trains")]
    pub n_trains: usize,
    #[serde(default = "default_slow_window")]
    pub slow_window: Window,
    #[serde(default = "default_zero_pad")]
    pub zero_pad: usize,
    /// Half-width of the range window kept around the scene center.
    #[serde(default = "default_range_half")]
    pub range_half_width_m: f64,
    /// Half-width of the exported cross-range window.
    #[serde(default = "default_cross_half")]
    pub crossrange_half_width_m: f64,
    #[serde(default = "default_threshold")]
    pub peak_threshold_db: f64,
    #[serde(default = "default_separation")]
    pub peak_min_separation_hz: f64,
}

fn default_mode() -> Mode {
    Mode::Profile
}
fn default_oversample() -> usize {
    8
}
fn default_trains() -> usize {
    1528
}
fn default_slow_window() -> Window {
    Window::Hann
}
fn default_zero_pad() -> usize {
    1
}
fn default_range_half() -> f64 {
    0.1
}
fn default_cross_half() -> f64 {
    0.1
}
fn default_threshold() -> f64 {
    -10.0
}
fn default_separation() -> f64 {
    10e3
}

impl Default for ProcessingConfig {
    fn default() -> Self {
        ProcessingConfig {
            mode: default_mode(),
            window: Window::Rect,
            fft_oversample: default_oversample(),
            fft_size: None,
            n_used: Vec::new(),
            n_trains: default_trains(),
            slow_window: default_slow_window(),
            zero_pad: default_zero_pad(),
            range_half_width_m: default_range_half(),
            crossrange_half_width_m: default_cross_half(),
            peak_threshold_db: default_threshold(),
            peak_min_separation_hz: default_separation(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub directory: PathBuf,
    #[serde(default = "default_format")]
    pub format: Format,
    #[serde(default = "default_floor")]
    pub image_floor_db: f64,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_format() -> Format {
    Format::Csv
}
fn default_floor() -> f64 {
    export::DEFAULT_IMAGE_FLOOR_DB
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: default_dir(),
            format: default_format(),
            image_floor_db: default_floor(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub plan: PlanParams,
    pub scene: SceneConfig,
    #[serde(default)]
    pub receiver: ReceiverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interference: Option<InterferenceConfig>,
    #[serde(default)]
    pub processing: ProcessingConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// SHA-256 of the effective configuration, hex. The output directory is
    /// left out so that a run reproduces byte for byte anywhere.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.output.directory = PathBuf::new();
        let canonical = serde_json::to_vec(&c).expect("config serializes");
        Sha256::digest(&canonical)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn subpulse_counts(&self) -> Vec<usize> {
        if self.processing.n_used.is_empty() {
            vec![self.plan.subpulses]
        } else {
            self.processing.n_used.clone()
        }
    }

    pub fn build_scene(&self) -> Result<Scene> {
        let sc = &self.scene;
        let unexpected = |keys: &[(&str, bool)]| -> Result<()> {
            match keys.iter().find(|(_, present)| *present) {
                Some((k, _)) => Err(Error::Config(format!(
                    "[scene] key `{k}` does not apply to kind {:?}",
                    sc.kind
                ))),
                None => Ok(()),
            }
        };
        let need = |v: Option<f64>, key: &str| -> Result<f64> {
            v.ok_or_else(|| Error::Config(format!("[scene] missing key `{key}` for kind {:?}", sc.kind)))
        };
        let v_keys = [
            ("side_m", sc.side_m.is_some()),
            ("angle_deg", sc.angle_deg.is_some()),
            ("spacing_m", sc.spacing_m.is_some()),
        ];
        let scene = match sc.kind {
            SceneKind::TwoTarget => {
                unexpected(&v_keys)?;
                unexpected(&[("scatterers", !sc.scatterers.is_empty())])?;
                make_two_target_scene(need(sc.separation_m, "separation_m")?, sc.center_range_m)?
            }
            SceneKind::VTarget => {
                unexpected(&[
                    ("separation_m", sc.separation_m.is_some()),
                    ("scatterers", !sc.scatterers.is_empty()),
                ])?;
                make_v_scene(
                    need(sc.side_m, "side_m")?,
                    need(sc.angle_deg, "angle_deg")?,
                    need(sc.spacing_m, "spacing_m")?,
                    sc.center_range_m,
                )?
            }
            SceneKind::Points => {
                unexpected(&v_keys)?;
                unexpected(&[("separation_m", sc.separation_m.is_some())])?;
                Scene::new(sc.scatterers.clone(), sc.center_range_m)
            }
        };
        let mut scene = scene.with_omega(sc.omega_rad_s);
        scene.rng_seed = self.receiver.rng_seed;
        scene.snr_db = self.receiver.snr_db;
        scene.check()?;
        Ok(scene)
    }

    fn fft_size(&self, len: usize) -> Result<usize> {
        match self.processing.fft_size {
            Some(n) if n >= len && n.is_power_of_two() => Ok(n),
            Some(n) => Err(Error::Config(format!(
                "[processing] fft_size {n} must be a power of two ≥ {len}"
            ))),
            None => Ok(fft_size_for(len, self.processing.fft_oversample)),
        }
    }
}

/// Result of [`validate`].
#[derive(Debug, Clone)]
pub struct ValidationSummary {
    pub report: ValidationReport,
    pub equivalent_bandwidth: f64,
    pub theoretical_resolution: f64,
}

impl ValidationSummary {
    pub fn is_valid(&self) -> bool {
        self.report.is_valid()
    }

    /// One-line summary for a valid plan.
    pub fn headline(&self) -> String {
        format!(
            "valid, M={}, N_max={}, B_eq={:.1} GHz, R_theory={:.2} mm",
            self.report.train_slots.unwrap_or(0),
            self.report.n_max.unwrap_or(0),
            self.equivalent_bandwidth / 1e9,
            self.theoretical_resolution * 1e3
        )
    }

    /// Constraint table, one rule per line.
    pub fn table(&self) -> String {
        let mut out = String::new();
        for v in &self.report.violations {
            out.push_str(&format!("VIOLATION  {v}\n"));
        }
        if self.is_valid() {
            out.push_str(&self.headline());
            out.push('\n');
        }
        out
    }
}

/// Checks the plan and scene without running anything.
pub fn validate(cfg: &ScenarioConfig) -> Result<ValidationSummary> {
    let report = validate_plan(&cfg.plan);
    let b = cfg.plan.equivalent_bandwidth();
    let summary = ValidationSummary {
        equivalent_bandwidth: b,
        theoretical_resolution: crate::plan::theoretical_resolution(b)?,
        report,
    };
    if summary.is_valid() {
        cfg.build_scene()?;
        for &n in &cfg.subpulse_counts() {
            WaveformPlan::new(PlanParams {
                subpulses: n,
                ..cfg.plan
            })?;
        }
        if let Some(i) = &cfg.interference {
            i.gap_spec()?.resolve(&cfg.plan)?;
        }
    }
    Ok(summary)
}

/// Process exit status for an error: 2 parse, 3 constraint, 4 numerical.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 2,
        Error::PlanViolations(_) | Error::InvalidParameter(_) | Error::Index { .. } => 3,
        _ => 4,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub kind: String,
    pub units: serde_json::Value,
    pub axes: serde_json::Value,
    pub config_sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolutionRow {
    pub n: usize,
    pub equivalent_bandwidth_hz: f64,
    pub theoretical_resolution_m: f64,
    /// Absent when the strongest lobe merges with a neighbour above −3.92 dB.
    pub mainlobe_width_hz: Option<f64>,
    pub measured_resolution_m: Option<f64>,
    pub relative_error: Option<f64>,
    pub peak_count: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct PeakRow {
    pub n: usize,
    pub variant: String,
    pub frequency_hz: f64,
    pub range_m: f64,
    pub magnitude_db: f64,
    pub mainlobe_width_hz: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SidelobeRow {
    pub n: usize,
    pub unfilled_db: f64,
    pub filled_db: Option<f64>,
    pub improvement_db: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ImageRow {
    pub n: usize,
    pub variant: String,
    pub n_range: usize,
    pub n_cross: usize,
    pub range_spacing_m: f64,
    pub crossrange_spacing_m: f64,
    pub aperture_angle_rad: f64,
    pub center_wavelength_m: f64,
    pub crossrange_resolution_m: f64,
    pub peak_range_m: f64,
    pub peak_crossrange_m: f64,
    /// Pearson correlation of dB magnitudes, each clipped at the image floor,
    /// against the interference-free image.
    pub correlation_db_vs_clean: Option<f64>,
}

/// Structured run summary, written as `report.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub config_sha256: String,
    pub mode: Mode,
    pub train_slots: u64,
    pub n_max: usize,
    pub masked_subpulses: Vec<usize>,
    pub resolution: Vec<ResolutionRow>,
    pub peaks: Vec<PeakRow>,
    pub sidelobes: Vec<SidelobeRow>,
    pub images: Vec<ImageRow>,
    pub warnings: Vec<String>,
    pub files: Vec<FileEntry>,
}

struct Writer<'a> {
    dir: &'a Path,
    format: Format,
    digest: String,
    files: Vec<FileEntry>,
}

impl Writer<'_> {
    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }

    fn record(&mut self, name: &str, kind: &str, units: serde_json::Value, axes: serde_json::Value) {
        self.files.push(FileEntry {
            path: name.to_string(),
            kind: kind.to_string(),
            units,
            axes,
            config_sha256: self.digest.clone(),
        });
    }

    fn profile(&mut self, stem: &str, p: &RangeProfile) -> Result<()> {
        let axes = json!({
            "bins": p.len(),
            "first_bin": p.first_bin,
            "bin_hz": p.bin_hz,
            "range_per_bin_m": p.range_bin(),
            "window": p.window.name(),
            "fft_size": p.fft_size,
        });
        match self.format {
            Format::Csv => {
                let name = format!("{stem}.csv");
                export::profile_csv(self.create(&name)?, p)?;
                let units = json!({"freq_hz": "Hz", "range_m": "m", "mag_db": "dB re peak", "re": "linear", "im": "linear"});
                self.record(&name, "range_profile_csv", units, axes);
            }
            Format::Raw => {
                let name = format!("{stem}.f64");
                let inter: Vec<f64> = p.spectrum.iter().flat_map(|c| [c.re, c.im]).collect();
                export::raw_f64(self.create(&name)?, &inter)?;
                let meta = json!({
                    "layout": "interleaved re,im little-endian float64 per bin",
                    "axes": axes,
                    "config_sha256": self.digest,
                });
                let side = format!("{name}.json");
                fs::write(self.dir.join(&side), serde_json::to_string_pretty(&meta).expect("json"))?;
                self.record(&name, "range_profile_raw", json!({"value": "linear complex"}), axes);
                self.record(&side, "metadata", json!({}), json!({}));
            }
        }
        Ok(())
    }

    fn image(&mut self, stem: &str, img: &IsarImage, floor_db: f64) -> Result<()> {
        let axes = json!({
            "rows": "range, farthest first",
            "columns": "cross-range, increasing",
            "n_range": img.n_range,
            "n_cross": img.n_cross,
            "axes_file": format!("{stem}_axes.csv"),
        });
        let pgm = format!("{stem}.pgm");
        export::pgm16(self.create(&pgm)?, img, floor_db)?;
        self.record(
            &pgm,
            "image_pgm16",
            json!({"pixel": format!("dB re peak, 0 = −{floor_db} dB, 65535 = 0 dB")}),
            axes.clone(),
        );
        let ax = format!("{stem}_axes.csv");
        export::axes_csv(self.create(&ax)?, img)?;
        self.record(&ax, "image_axes_csv", json!({"value_m": "m"}), json!({}));
        if self.format == Format::Raw {
            let name = format!("{stem}.f64");
            export::raw_f64(self.create(&name)?, &img.magnitude())?;
            let meta = json!({
                "layout": "row-major magnitude, range rows ascending, little-endian float64",
                "n_range": img.n_range,
                "n_cross": img.n_cross,
                "config_sha256": self.digest,
            });
            let side = format!("{name}.json");
            fs::write(self.dir.join(&side), serde_json::to_string_pretty(&meta).expect("json"))?;
            self.record(&name, "image_raw", json!({"value": "linear magnitude"}), axes);
            self.record(&side, "metadata", json!({}), json!({}));
        }
        Ok(())
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn peak_rows(n: usize, variant: &str, peaks: &[Peak]) -> Vec<PeakRow> {
    peaks
        .iter()
        .map(|p| PeakRow {
            n,
            variant: variant.to_string(),
            frequency_hz: p.frequency,
            range_m: p.range,
            magnitude_db: p.magnitude_db,
            mainlobe_width_hz: p.mainlobe_width_hz,
        })
        .collect()
}

struct Signals {
    clean: SyntheticSignal,
    gapped: Option<SyntheticSignal>,
    filled: Option<SyntheticSignal>,
}

fn simulate(cfg: &ScenarioConfig, plan: &WaveformPlan, scene: &Scene, warnings: &mut Vec<String>) -> Result<(Signals, Vec<usize>)> {
    let fs = cfg.receiver.sample_rate_hz;
    let frame = dechirp_frame(plan, scene, 0, fs)?;
    let clean = stitch(&frame, plan)?;
    let Some(intf) = &cfg.interference else {
        return Ok((Signals { clean, gapped: None, filled: None }, Vec::new()));
    };
    let applied = apply_gap(frame, &intf.gap_spec()?, plan)?;
    if let Some(w) = applied.warning {
        warnings.push(w);
    }
    let gapped = stitch(&applied.frame, plan)?;
    let filled = if intf.fill && gapped.gap_mask.iter().any(|m| *m) {
        Some(fill_gap(&gapped, intf.ar_order)?)
    } else {
        None
    };
    Ok((
        Signals {
            clean,
            gapped: Some(gapped),
            filled,
        },
        applied.masked,
    ))
}

/// Runs the configured pipeline and writes every artifact into the output
/// directory, finishing with `report.json`.
pub fn run(cfg: &ScenarioConfig) -> Result<RunReport> {
    let summary = validate(cfg)?;
    if !summary.is_valid() {
        return Err(Error::PlanViolations(
            summary.report.violations.iter().map(|v| v.to_string()).collect(),
        ));
    }
    let scene = cfg.build_scene()?;
    let dir = cfg.output.directory.clone();
    fs::create_dir_all(&dir)?;
    let mut w = Writer {
        dir: &dir,
        format: cfg.output.format,
        digest: cfg.digest(),
        files: Vec::new(),
    };
    let mut report = RunReport {
        config_sha256: w.digest.clone(),
        mode: cfg.processing.mode,
        train_slots: summary.report.train_slots.unwrap_or(0),
        n_max: summary.report.n_max.unwrap_or(0),
        masked_subpulses: Vec::new(),
        resolution: Vec::new(),
        peaks: Vec::new(),
        sidelobes: Vec::new(),
        images: Vec::new(),
        warnings: Vec::new(),
        files: Vec::new(),
    };

    for n in cfg.subpulse_counts() {
        let plan = WaveformPlan::new(PlanParams {
            subpulses: n,
            ..cfg.plan
        })?;
        match cfg.processing.mode {
            Mode::Profile => run_profile(cfg, &plan, &scene, &mut w, &mut report)?,
            Mode::Isar => run_isar(cfg, &plan, &scene, &mut w, &mut report)?,
        }
    }

    if cfg.processing.mode == Mode::Profile {
        let rows: Vec<Vec<String>> = report
            .resolution
            .iter()
            .map(|r| {
                vec![
                    r.n.to_string(),
                    r.equivalent_bandwidth_hz.to_string(),
                    r.theoretical_resolution_m.to_string(),
                    opt(r.mainlobe_width_hz),
                    opt(r.measured_resolution_m),
                    opt(r.relative_error),
                    r.peak_count.to_string(),
                ]
            })
            .collect();
        export::table_csv(
            w.create("resolution.csv")?,
            &[
                "n",
                "equivalent_bandwidth_hz",
                "theoretical_resolution_m",
                "mainlobe_width_hz",
                "measured_resolution_m",
                "relative_error",
                "peak_count",
            ],
            &rows,
        )?;
        w.record(
            "resolution.csv",
            "resolution_table_csv",
            json!({"equivalent_bandwidth_hz": "Hz", "theoretical_resolution_m": "m", "mainlobe_width_hz": "Hz", "measured_resolution_m": "m", "relative_error": "1"}),
            json!({"rows": "subpulse count n"}),
        );
        let peaks: Vec<Vec<String>> = report
            .peaks
            .iter()
            .map(|p| {
                vec![
                    p.n.to_string(),
                    p.variant.clone(),
                    p.frequency_hz.to_string(),
                    p.range_m.to_string(),
                    p.magnitude_db.to_string(),
                    p.mainlobe_width_hz.to_string(),
                ]
            })
            .collect();
        export::table_csv(
            w.create("peaks.csv")?,
            &["n", "variant", "frequency_hz", "range_m", "magnitude_db", "mainlobe_width_hz"],
            &peaks,
        )?;
        w.record(
            "peaks.csv",
            "peak_table_csv",
            json!({"frequency_hz": "Hz", "range_m": "m", "magnitude_db": "dB re strongest", "mainlobe_width_hz": "Hz"}),
            json!({"rows": "peaks, strongest first per (n, variant)"}),
        );
    }

    report.files = std::mem::take(&mut w.files);
    report.files.push(FileEntry {
        path: "report.json".into(),
        kind: "run_summary_json".into(),
        units: json!({}),
        axes: json!({}),
        config_sha256: report.config_sha256.clone(),
    });
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    fs::write(dir.join("report.json"), text + "\n")?;
    Ok(report)
}

fn run_profile(
    cfg: &ScenarioConfig,
    plan: &WaveformPlan,
    scene: &Scene,
    w: &mut Writer,
    report: &mut RunReport,
) -> Result<()> {
    let n = plan.subpulses;
    let (sigs, masked) = simulate(cfg, plan, scene, &mut report.warnings)?;
    if !masked.is_empty() && report.masked_subpulses.is_empty() {
        report.masked_subpulses = masked;
    }
    let pr = &cfg.processing;
    let fft = cfg.fft_size(sigs.clean.len())?;
    let main = sigs.filled.as_ref().or(sigs.gapped.as_ref()).unwrap_or(&sigs.clean);
    let profile = range_profile(main, pr.window, fft)?;

    let peaks = extract_peaks(&profile, pr.peak_min_separation_hz, pr.peak_threshold_db);
    let top = profile
        .peak_bin()
        .ok_or_else(|| Error::Metrology("profile is identically zero".into()))?;
    let width = match mainlobe_width_392(&profile, top) {
        Ok(w) => Some(w),
        Err(Error::Metrology(m)) => {
            report.warnings.push(format!("N={n}: {m}"));
            None
        }
        Err(e) => return Err(e),
    };
    let measured = width.map(|w| measured_resolution(w, plan.chirp_rate())).transpose()?;
    let theory = plan.theoretical_resolution();
    report.resolution.push(ResolutionRow {
        n,
        equivalent_bandwidth_hz: plan.equivalent_bandwidth(),
        theoretical_resolution_m: theory,
        mainlobe_width_hz: width,
        measured_resolution_m: measured,
        relative_error: measured.map(|m| (m - theory) / theory),
        peak_count: peaks.len(),
    });
    let variant = match (&sigs.filled, &sigs.gapped) {
        (Some(_), _) => "filled",
        (None, Some(_)) => "unfilled",
        _ => "clean",
    };
    report.peaks.extend(peak_rows(n, variant, &peaks));
    w.profile(&format!("profile_n{n}"), &profile)?;

    if let Some(gapped) = &sigs.gapped {
        let filled_profile = sigs.filled.as_ref().map(|_| &profile);
        let (row, unfilled) = sidelobe_row(cfg, n, &sigs.clean, gapped, filled_profile, fft)?;
        report.sidelobes.push(row);
        if sigs.filled.is_some() {
            let un_peaks = extract_peaks(&unfilled, pr.peak_min_separation_hz, pr.peak_threshold_db);
            report.peaks.extend(peak_rows(n, "unfilled", &un_peaks));
            w.profile(&format!("profile_n{n}_unfilled"), &unfilled)?;
        }
    }
    Ok(())
}

/// Highest sidelobe away from the undisturbed signal's peaks, gapped and filled.
fn sidelobe_row(
    cfg: &ScenarioConfig,
    n: usize,
    clean: &SyntheticSignal,
    gapped: &SyntheticSignal,
    filled: Option<&RangeProfile>,
    fft: usize,
) -> Result<(SidelobeRow, RangeProfile)> {
    let pr = &cfg.processing;
    let reference = range_profile(clean, pr.window, fft)?;
    let tones: Vec<f64> = extract_peaks(&reference, pr.peak_min_separation_hz, pr.peak_threshold_db)
        .iter()
        .map(|p| p.frequency)
        .collect();
    let exclusion = SPUR_EXCLUSION_WIDTHS * cfg.receiver.sample_rate_hz / clean.len() as f64;
    let unfilled = range_profile(gapped, pr.window, fft)?;
    let unfilled_db = spurious_sidelobe_db(&unfilled, &tones, exclusion)?;
    let filled_db = filled
        .map(|p| spurious_sidelobe_db(p, &tones, exclusion))
        .transpose()?;
    let row = SidelobeRow {
        n,
        unfilled_db,
        filled_db,
        improvement_db: filled_db.map(|f| unfilled_db - f),
    };
    Ok((row, unfilled))
}

fn run_isar(
    cfg: &ScenarioConfig,
    plan: &WaveformPlan,
    scene: &Scene,
    w: &mut Writer,
    report: &mut RunReport,
) -> Result<()> {
    let n = plan.subpulses;
    let pr = &cfg.processing;
    let fs = cfg.receiver.sample_rate_hz;
    let lambda = center_wavelength(plan);
    let theta = aperture_angle(plan, scene.omega, pr.n_trains);
    let lo = scene.center_range - pr.range_half_width_m;
    let hi = scene.center_range + pr.range_half_width_m;
    let opts = ImageOptions {
        window: pr.slow_window,
        zero_pad: pr.zero_pad,
    };

    let mut variants: Vec<(&str, TrainProcessing)> = Vec::new();
    match &cfg.interference {
        None => variants.push(("", TrainProcessing::default())),
        Some(intf) => {
            let (sigs, _) = simulate(cfg, plan, scene, &mut report.warnings)?;
            if let Some(gapped) = &sigs.gapped {
                let fft = cfg.fft_size(sigs.clean.len())?;
                let filled = sigs
                    .filled
                    .as_ref()
                    .map(|f| range_profile(f, pr.window, fft))
                    .transpose()?;
                report
                    .sidelobes
                    .push(sidelobe_row(cfg, n, &sigs.clean, gapped, filled.as_ref(), fft)?.0);
            }
            variants.push(("clean", TrainProcessing::default()));
            let gap = intf.gap_spec()?;
            let masked = gap.resolve(plan)?;
            if report.masked_subpulses.is_empty() {
                report.masked_subpulses = masked;
            }
            variants.push((
                "unfilled",
                TrainProcessing {
                    gap: Some(gap.clone()),
                    fill: false,
                    ar_order: None,
                },
            ));
            if intf.fill {
                variants.push((
                    "filled",
                    TrainProcessing {
                        gap: Some(gap),
                        fill: true,
                        ar_order: intf.ar_order,
                    },
                ));
            }
        }
    }

    let mut reference: Option<IsarImage> = None;
    for (variant, proc) in variants {
        let sigs = collect_trains_with(plan, scene, pr.n_trains, fs, &proc)?;
        let fft = cfg.fft_size(sigs[0].len())?;
        let profiles = slow_time_profiles(&sigs, pr.window, fft, lo, hi)?;
        drop(sigs);
        let full = form_image(&profiles, lambda, theta, &opts)?;
        let img = full.crop(lo, hi, -pr.crossrange_half_width_m, pr.crossrange_half_width_m);
        if img.pixels.is_empty() {
            return Err(Error::Metrology("cropped image is empty".into()));
        }
        let (r, c) = img.peak();
        let (pr_m, pc_m) = img.position(r, c);
        report.images.push(ImageRow {
            n,
            variant: if variant.is_empty() { "clean".into() } else { variant.into() },
            n_range: img.n_range,
            n_cross: img.n_cross,
            range_spacing_m: img.range_spacing(),
            crossrange_spacing_m: img.crossrange_spacing(),
            aperture_angle_rad: theta,
            center_wavelength_m: lambda,
            crossrange_resolution_m: cross_range_resolution(lambda, theta)?,
            peak_range_m: pr_m,
            peak_crossrange_m: pc_m,
            correlation_db_vs_clean: match &reference {
                Some(r) => Some(img.correlation_db(r, cfg.output.image_floor_db)?),
                None => None,
            },
        });
        let stem = if variant.is_empty() {
            format!("image_n{n}")
        } else {
            format!("image_n{n}_{variant}")
        };
        w.image(&stem, &img, cfg.output.image_floor_db)?;
        if variant == "clean" {
            reference = Some(img);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[plan]
chirp_start_hz = 14.7e9
chirp_bandwidth_hz = 2.2e9
chirp_width_s = 3.3e-6
chirp_period_s = 5.14e-6
loop_time_s = 5.14e-6
train_period_s = 71.96e-6
seed_width_s = 5e-6
step_hz = 2e9
offset_hz = 0.2e9
filter_bandwidth_hz = 16e9
subpulses = 9

[scene]
kind = "two_target"
center_range_m = 1.5
separation_m = 8.5e-3
"#;

    #[test]
    fn minimal_config_validates() {
        let cfg = ScenarioConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.plan, PlanParams::reference());
        let s = validate(&cfg).unwrap();
        assert!(s.is_valid());
        assert_eq!(s.headline(), "valid, M=14, N_max=9, B_eq=18.2 GHz, R_theory=8.24 mm");
    }

    #[test]
    fn step_above_bandwidth_lists_violations() {
        let text = MINIMAL.replace("step_hz = 2e9", "step_hz = 2.3e9");
        let cfg = ScenarioConfig::parse(&text).unwrap();
        let s = validate(&cfg).unwrap();
        assert!(!s.is_valid());
        assert!(s.table().contains("Δf < B_chirp"), "{}", s.table());
    }

    #[test]
    fn missing_and_unknown_keys() {
        let text = MINIMAL.replace("seed_width_s = 5e-6\n", "");
        let e = ScenarioConfig::parse(&text).unwrap_err();
        assert_eq!(exit_code(&e), 2);
        assert!(e.to_string().contains("seed_width_s"), "{e}");

        let text = MINIMAL.replace("separation_m", "separation_mm");
        let e = ScenarioConfig::parse(&text).unwrap_err();
        assert!(e.to_string().contains("separation_mm"), "{e}");
        assert!(e.to_string().contains("line"), "{e}");
    }

    #[test]
    fn scene_keys_must_match_kind() {
        let text = MINIMAL.replace("separation_m = 8.5e-3", "separation_m = 8.5e-3\nside_m = 0.1");
        let cfg = ScenarioConfig::parse(&text).unwrap();
        assert!(matches!(cfg.build_scene(), Err(Error::Config(_))));
        let text = MINIMAL.replace("kind = \"two_target\"", "kind = \"v_target\"");
        let cfg = ScenarioConfig::parse(&text).unwrap();
        assert!(matches!(cfg.build_scene(), Err(Error::Config(_))));
    }

    #[test]
    fn interference_needs_one_description() {
        let i = InterferenceConfig {
            band_lo_hz: Some(1.0),
            band_hi_hz: None,
            indices: None,
            ar_order: None,
            fill: true,
        };
        assert!(i.gap_spec().is_err());
        let i = InterferenceConfig {
            band_lo_hz: None,
            band_hi_hz: None,
            indices: Some(vec![3]),
            ..i
        };
        assert_eq!(i.gap_spec().unwrap(), GapSpec::Indices(vec![3]));
    }

    #[test]
    fn digest_tracks_content() {
        let a = ScenarioConfig::parse(MINIMAL).unwrap();
        let mut b = a.clone();
        assert_eq!(a.digest(), b.digest());
        b.output.directory = "elsewhere".into();
        assert_eq!(a.digest(), b.digest());
        b.receiver.rng_seed = 7;
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::PlanViolations(vec![])), 3);
        assert_eq!(exit_code(&Error::Fit("x".into())), 4);
    }
}
