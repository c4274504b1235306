//! Metrics, experiment configuration, model bundles, and the runs that
//! regenerate the error tables.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::csvio::{self, Table};
use crate::diffnet::NetworkParams;
use crate::error::{Error, Result};
use crate::heat::{self, CureCycle, FieldSolution, LabeledSet, MaterialProps, Region, SolverSettings, ThermalSetup};
use crate::multifidelity::{self, check_domain, MfModel};
use crate::pinn::{self, LossReport, Normalization, PointCounts, PointSets, TrainConfig, HISTORY_HEADER};

/// `sqrt(Σ(pred − truth)² / Σ truth²)`.
pub fn relative_l2(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::Dimension {
            expected: truth.len(),
            got: pred.len(),
            context: "prediction vs truth length",
        });
    }
    if truth.is_empty() {
        return Err(Error::Metric("relative L2 of empty vectors".into()));
    }
    let den: f64 = truth.iter().map(|y| y * y).sum();
    if den == 0.0 {
        return Err(Error::Metric("relative L2 against an all-zero truth".into()));
    }
    let num: f64 = pred.iter().zip(truth).map(|(p, y)| (p - y) * (p - y)).sum();
    Ok((num / den).sqrt())
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub const ERROR_FIELD_HEADER: [&str; 3] = ["x_m", "t_s", "abs_err_C"];

/// Pointwise absolute error over the test grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorField {
    /// `(x m, t s, |T_pred − T_true| °C)`, snapshot-major.
    pub points: Vec<(f64, f64, f64)>,
}

impl ErrorField {
    /// Location and value of the largest error.
    pub fn max(&self) -> (f64, f64, f64) {
        self.max_where(|_, _| true).unwrap_or((f64::NAN, f64::NAN, 0.0))
    }

    pub fn max_where(&self, keep: impl Fn(f64, f64) -> bool) -> Option<(f64, f64, f64)> {
        self.points
            .iter()
            .copied()
            .filter(|&(x, t, _)| keep(x, t))
            .max_by(|a, b| a.2.total_cmp(&b.2))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>, comments: &[String]) -> Result<()> {
        let rows = self.points.iter().map(|&(x, t, e)| vec![x, t, e]);
        csvio::write_f64_table(path, comments, &ERROR_FIELD_HEADER, rows)
    }
}

/// Predictions and errors of one model on the standard test grid of `truth`.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub rel_l2: f64,
    pub errors: ErrorField,
}

pub fn error_field<F>(predict: F, truth: &FieldSolution) -> Result<ErrorField>
where
    F: FnOnce(&[(f64, f64)]) -> Result<Vec<f64>>,
{
    Ok(evaluate(predict, truth)?.errors)
}

pub fn evaluate<F>(predict: F, truth: &FieldSolution) -> Result<Evaluation>
where
    F: FnOnce(&[(f64, f64)]) -> Result<Vec<f64>>,
{
    let grid = heat::test_grid(truth)?;
    let xt: Vec<(f64, f64)> = grid.points.iter().map(|p| (p.x, p.t)).collect();
    let pred = predict(&xt)?;
    let y: Vec<f64> = grid.points.iter().map(|p| p.temperature).collect();
    let rel_l2 = relative_l2(&pred, &y)?;
    let points = xt.iter().zip(pred.iter().zip(&y)).map(|(&(x, t), (p, y))| (x, t, (p - y).abs())).collect();
    Ok(Evaluation {
        rel_l2,
        errors: ErrorField { points },
    })
}

/// The four trained model families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Pinn,
    PinnData,
    MfPinn,
    MfPinnData,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Pinn, Variant::PinnData, Variant::MfPinn, Variant::MfPinnData];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Pinn => "pinn",
            Variant::PinnData => "pinn+data",
            Variant::MfPinn => "mfpinn",
            Variant::MfPinnData => "mfpinn+data",
        }
    }

    pub fn is_multi_fidelity(self) -> bool {
        matches!(self, Variant::MfPinn | Variant::MfPinnData)
    }

    /// High-fidelity labels the variant trains with under `config`.
    pub fn default_labels(self, config: &ExperimentConfig) -> usize {
        match self {
            Variant::Pinn | Variant::MfPinn => 0,
            Variant::PinnData => config.labels.pinn_data,
            Variant::MfPinnData => config.labels.cooldown_cloud,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant {s:?}; expected one of pinn, pinn+data, mfpinn, mfpinn+data")))
    }
}

/// Material and boundary data of one part, as written in the config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartConfig {
    /// kg/m³
    pub density: f64,
    /// J/(kg·K)
    pub specific_heat: f64,
    /// W/(m·K)
    pub conductivity: f64,
    /// m
    pub thickness: f64,
    /// W/(m²·K)
    pub htc_bottom: f64,
    /// W/(m²·K)
    pub htc_top: f64,
    /// °C
    pub initial_temperature: f64,
}

impl PartConfig {
    pub fn from_setup(s: &ThermalSetup) -> Self {
        PartConfig {
            density: s.material.density,
            specific_heat: s.material.specific_heat,
            conductivity: s.material.conductivity,
            thickness: s.thickness,
            htc_bottom: s.htc_bottom,
            htc_top: s.htc_top,
            initial_temperature: s.initial_temperature,
        }
    }

    pub fn setup(&self, cycle: &CureCycle) -> Result<ThermalSetup> {
        let setup = ThermalSetup {
            material: MaterialProps::new(self.density, self.specific_heat, self.conductivity)?,
            thickness: self.thickness,
            htc_bottom: self.htc_bottom,
            htc_top: self.htc_top,
            initial_temperature: self.initial_temperature,
            cycle: cycle.clone(),
        };
        setup.validate()?;
        Ok(setup)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelConfig {
    /// Labeled high-fidelity sizes for the data sweep.
    pub sweep: Vec<usize>,
    /// Labels of the `pinn+data` variant.
    pub pinn_data: usize,
    /// Labels the low-fidelity network trains with.
    pub low_fidelity: usize,
    /// Cooldown-cloud size of the `mfpinn+data` variant.
    pub cooldown_cloud: usize,
}

impl Default for LabelConfig {
    fn default() -> Self {
        LabelConfig {
            sweep: vec![10, 50, 100, 200, 400],
            pinn_data: 50,
            low_fidelity: 200,
            cooldown_cloud: 30,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Window {
    /// s
    pub t_min: f64,
    /// s
    pub t_max: f64,
}

impl Default for Window {
    fn default() -> Self {
        Window {
            t_min: multifidelity::COOLDOWN_REGION.t_min,
            t_max: multifidelity::COOLDOWN_REGION.t_max,
        }
    }
}

impl Window {
    pub fn contains(&self, t: f64) -> bool {
        (self.t_min..=self.t_max).contains(&t)
    }

    pub fn region(&self) -> Region {
        Region {
            t_min: self.t_min,
            t_max: self.t_max,
            ..multifidelity::COOLDOWN_REGION
        }
    }
}

/// Everything a run depends on. Missing keys take the defaults below.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    /// Concurrent runs; 0 means one per available core.
    pub workers: usize,
    pub hidden_layers: Vec<usize>,
    /// °C per unit of network output.
    pub temp_scale: f64,
    /// `[time s, air °C]` knots.
    pub cycle: CureCycle,
    pub low_fidelity: PartConfig,
    pub high_fidelity: PartConfig,
    pub solver: SolverSettings,
    pub points: PointCounts,
    pub train: TrainConfig,
    pub labels: LabelConfig,
    pub cooldown: Window,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seeds: vec![0, 1, 2],
            output_dir: PathBuf::from("out"),
            workers: 0,
            hidden_layers: vec![30; 5],
            temp_scale: pinn::DEFAULT_TEMP_SCALE,
            cycle: CureCycle::default_one_hold(),
            low_fidelity: PartConfig::from_setup(&ThermalSetup::composite_1()),
            high_fidelity: PartConfig::from_setup(&ThermalSetup::composite_2()),
            solver: SolverSettings::default(),
            points: PointCounts::default(),
            train: TrainConfig::default(),
            labels: LabelConfig::default(),
            cooldown: Window::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(d) => Error::Config(format!("{}: {d}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// First 16 hex digits of the SHA-256 of the canonical TOML form.
    /// Where results go and how many threads produce them do not count.
    pub fn hash(&self) -> String {
        let canonical = ExperimentConfig {
            output_dir: PathBuf::new(),
            workers: 0,
            ..self.clone()
        };
        let digest = Sha256::digest(canonical.to_toml().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.labels.sweep.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Config(format!("labels.sweep must be sorted, got {:?}", self.labels.sweep)));
        }
        if self.hidden_layers.is_empty() || self.hidden_layers.contains(&0) {
            return Err(Error::Config(format!("hidden_layers must be nonempty and positive, got {:?}", self.hidden_layers)));
        }
        if !(self.cooldown.t_min < self.cooldown.t_max) {
            return Err(Error::Config("cooldown.t_min must be below cooldown.t_max".into()));
        }
        self.train.validate()?;
        self.low_fidelity.setup(&self.cycle)?;
        self.high_fidelity.setup(&self.cycle)?;
        Ok(())
    }

    pub fn layer_sizes(&self, input_width: usize) -> Vec<usize> {
        let mut sizes = vec![input_width];
        sizes.extend(&self.hidden_layers);
        sizes.push(1);
        sizes
    }

    /// Comment lines that open every emitted file.
    pub fn header(&self, seed: &str) -> Vec<String> {
        vec![format!("config_hash={} seed={seed}", self.hash())]
    }
}

fn seed_list(seeds: &[u64]) -> String {
    seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(";")
}

/// A trained model of either family, ready to predict physical temperatures.
#[derive(Clone, Debug, PartialEq)]
pub enum Surrogate {
    Pinn {
        params: NetworkParams,
        norm: Normalization,
        setup: ThermalSetup,
    },
    MultiFidelity(MfModel),
}

impl Surrogate {
    pub fn setup(&self) -> &ThermalSetup {
        match self {
            Surrogate::Pinn { setup, .. } => setup,
            Surrogate::MultiFidelity(m) => m.setup_high(),
        }
    }

    /// °C at physical points.
    pub fn predict_many(&self, xt: &[(f64, f64)]) -> Result<Vec<f64>> {
        match self {
            Surrogate::Pinn { params, norm, setup } => {
                for &(x, t) in xt {
                    check_domain(x, t, setup)?;
                }
                pinn::predict_temperatures(params, norm, xt)
            }
            Surrogate::MultiFidelity(m) => m.predict_many(xt),
        }
    }
}

pub const BUNDLE_VERSION: u32 = 1;
const MANIFEST: &str = "manifest.toml";

/// Metadata stored next to the checkpoints of a bundle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub variant: String,
    pub labeled_n: usize,
    pub seed: u64,
    pub config_hash: String,
    /// On the test grid, at training time.
    pub rel_l2: f64,
    pub solver: SolverSettings,
    pub normalization: Normalization,
    pub setup: ThermalSetup,
    /// Present for multi-fidelity bundles only.
    pub low: Option<LowManifest>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowManifest {
    pub normalization: Normalization,
    pub setup: ThermalSetup,
}

/// Write `model` as a bundle directory: checkpoints plus `manifest.toml`.
pub fn save_bundle(dir: impl AsRef<Path>, model: &Surrogate, manifest: &Manifest) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    match model {
        Surrogate::Pinn { params, .. } => params.save(dir.join("pinn.ckpt"))?,
        Surrogate::MultiFidelity(m) => {
            m.low().save(dir.join("low.ckpt"))?;
            m.high().save(dir.join("high.ckpt"))?;
        }
    }
    let path = dir.join(MANIFEST);
    let text = toml::to_string(manifest).map_err(|e| Error::format(&path, e.to_string()))?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

pub fn load_bundle(dir: impl AsRef<Path>) -> Result<(Surrogate, Manifest)> {
    let dir = dir.as_ref();
    let path = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = toml::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))?;
    if manifest.format_version != BUNDLE_VERSION {
        return Err(Error::format(
            &path,
            format!("bundle format {} is not supported (expected {BUNDLE_VERSION})", manifest.format_version),
        ));
    }
    let model = match &manifest.low {
        None => Surrogate::Pinn {
            params: NetworkParams::load(dir.join("pinn.ckpt"))?,
            norm: manifest.normalization,
            setup: manifest.setup.clone(),
        },
        Some(low) => Surrogate::MultiFidelity(MfModel::new(
            NetworkParams::load(dir.join("low.ckpt"))?,
            NetworkParams::load(dir.join("high.ckpt"))?,
            low.normalization,
            manifest.normalization,
            low.setup.clone(),
            manifest.setup.clone(),
        )?),
    };
    Ok((model, manifest))
}

/// Result of one trained and evaluated model.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub variant: Variant,
    pub labeled_n: usize,
    pub seed: u64,
    pub rel_l2: f64,
    pub errors: ErrorField,
    pub model: Surrogate,
    pub history: Vec<LossReport>,
    /// Low-fidelity stage, multi-fidelity variants only.
    pub low_history: Vec<LossReport>,
    pub labeled: LabeledSet,
}

/// Shared state of a batch of runs under one config: the oracle fields and
/// the low-fidelity networks, each computed once.
pub struct Experiment {
    config: ExperimentConfig,
    setup_low: ThermalSetup,
    setup_high: ThermalSetup,
    norm: Normalization,
    field_low: OnceLock<FieldSolution>,
    field_high: OnceLock<FieldSolution>,
    low_models: Mutex<HashMap<u64, (NetworkParams, Vec<LossReport>)>>,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let setup_low = config.low_fidelity.setup(&config.cycle)?;
        let setup_high = config.high_fidelity.setup(&config.cycle)?;
        let norm = Normalization::for_setup(&setup_high, config.temp_scale)?;
        let norm_low = Normalization::for_setup(&setup_low, config.temp_scale)?;
        if norm_low != norm {
            return Err(Error::Config(
                "low- and high-fidelity parts must share thickness and cycle duration".into(),
            ));
        }
        Ok(Experiment {
            config,
            setup_low,
            setup_high,
            norm,
            field_low: OnceLock::new(),
            field_high: OnceLock::new(),
            low_models: Mutex::new(HashMap::new()),
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn setup_low(&self) -> &ThermalSetup {
        &self.setup_low
    }

    pub fn setup_high(&self) -> &ThermalSetup {
        &self.setup_high
    }

    pub fn normalization(&self) -> &Normalization {
        &self.norm
    }

    fn cached_field<'a>(&self, cell: &'a OnceLock<FieldSolution>, setup: &ThermalSetup) -> Result<&'a FieldSolution> {
        if let Some(f) = cell.get() {
            return Ok(f);
        }
        let f = heat::solve(setup, &self.config.solver)?;
        Ok(cell.get_or_init(|| f))
    }

    pub fn field_low(&self) -> Result<&FieldSolution> {
        self.cached_field(&self.field_low, &self.setup_low)
    }

    pub fn field_high(&self) -> Result<&FieldSolution> {
        self.cached_field(&self.field_high, &self.setup_high)
    }

    fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            seed,
            ..self.config.train.clone()
        }
    }

    /// Low-fidelity labels and collocation are drawn from the same seed as
    /// the run, so every multi-fidelity run with that seed shares one low network.
    fn low_model(&self, seed: u64, points: &PointSets) -> Result<(NetworkParams, Vec<LossReport>)> {
        if let Some(m) = self.low_models.lock().unwrap().get(&seed) {
            return Ok(m.clone());
        }
        let data = heat::sample_labeled(self.field_low()?, self.config.labels.low_fidelity, seed, None)?;
        let init = NetworkParams::init(&self.config.layer_sizes(2), seed)?;
        let trained = multifidelity::train_low(init, &self.setup_low, &self.norm, &data, points, &self.train_config(seed))?;
        self.low_models.lock().unwrap().insert(seed, trained.clone());
        Ok(trained)
    }

    /// High-fidelity labels a run trains with.
    pub fn labels(&self, variant: Variant, seed: u64, labeled_n: usize) -> Result<LabeledSet> {
        let field = self.field_high()?;
        match variant {
            Variant::Pinn | Variant::MfPinn => Ok(LabeledSet::default()),
            Variant::PinnData => heat::sample_labeled(field, labeled_n, seed, None),
            Variant::MfPinnData => multifidelity::augment_cooldown(field, labeled_n, Some(self.config.cooldown.region()), seed),
        }
    }

    /// Train and evaluate one model. `labeled_n` defaults to the variant's
    /// configured label count.
    pub fn run(&self, variant: Variant, seed: u64, labeled_n: Option<usize>) -> Result<RunResult> {
        let labeled_n = labeled_n.unwrap_or_else(|| variant.default_labels(&self.config));
        let points = PointSets::sample(self.config.points, seed)?;
        let labeled = self.labels(variant, seed, labeled_n)?;
        let config = self.train_config(seed);
        let (model, history, low_history) = if variant.is_multi_fidelity() {
            let (low, low_history) = self.low_model(seed, &points)?;
            let init = NetworkParams::init(&self.config.layer_sizes(3), seed)?;
            let (high, history) =
                multifidelity::train_high(&low, init, &self.setup_high, &self.norm, &labeled, &points, &config)?;
            let model = MfModel::new(low, high, self.norm, self.norm, self.setup_low.clone(), self.setup_high.clone())?;
            (Surrogate::MultiFidelity(model), history, low_history)
        } else {
            let init = NetworkParams::init(&self.config.layer_sizes(2), seed)?;
            let pts = points.with_labeled(&labeled, &self.norm)?;
            let (params, history) = pinn::train(init, &pts, Default::default(), &config, &self.setup_high, &self.norm)?;
            let model = Surrogate::Pinn {
                params,
                norm: self.norm,
                setup: self.setup_high.clone(),
            };
            (model, history, Vec::new())
        };
        let eval = evaluate(|xt| model.predict_many(xt), self.field_high()?)?;
        Ok(RunResult {
            variant,
            labeled_n,
            seed,
            rel_l2: eval.rel_l2,
            errors: eval.errors,
            model,
            history,
            low_history,
            labeled,
        })
    }

    pub fn manifest(&self, run: &RunResult) -> Manifest {
        Manifest {
            format_version: BUNDLE_VERSION,
            variant: run.variant.name().into(),
            labeled_n: run.labeled_n,
            seed: run.seed,
            config_hash: self.config.hash(),
            rel_l2: run.rel_l2,
            solver: self.config.solver,
            normalization: self.norm,
            setup: self.setup_high.clone(),
            low: run.variant.is_multi_fidelity().then(|| LowManifest {
                normalization: self.norm,
                setup: self.setup_low.clone(),
            }),
        }
    }

    /// Write the artifacts of `run` into `dir`: loss histories, labels,
    /// error field and the model bundle.
    pub fn write_run(&self, run: &RunResult, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let header = self.config.header(&run.seed.to_string());
        write_history(dir.join("history.csv"), &header, &run.history)?;
        if !run.low_history.is_empty() {
            write_history(dir.join("low_history.csv"), &header, &run.low_history)?;
        }
        run.labeled.write_csv(dir.join("labeled.csv"), &header)?;
        run.errors.write_csv(dir.join("error_field.csv"), &header)?;
        save_bundle(dir.join("bundle"), &run.model, &self.manifest(run))
    }

    /// [`run`](Self::run) followed by [`write_run`](Self::write_run). If
    /// training aborts, the last finite parameters are kept in `dir`.
    pub fn run_to_dir(&self, variant: Variant, seed: u64, labeled_n: Option<usize>, dir: &Path) -> Result<RunResult> {
        match self.run(variant, seed, labeled_n) {
            Ok(run) => {
                self.write_run(&run, dir)?;
                Ok(run)
            }
            Err(Error::Training {
                step,
                detail,
                last_good: Some(params),
            }) => {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                params.save(dir.join("last_good.ckpt"))?;
                Err(Error::Training {
                    step,
                    detail,
                    last_good: Some(params),
                })
            }
            Err(e) => Err(e),
        }
    }

    /// Run every `(variant, labeled_n, seed)` job on a bounded pool of
    /// threads. Results come back in job order regardless of scheduling.
    pub fn run_many(&self, jobs: &[(Variant, usize, u64)], out: Option<&Path>) -> Result<Vec<RunResult>> {
        let workers = match self.config.workers {
            0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
            n => n,
        }
        .min(jobs.len())
        .max(1);
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<Result<RunResult>>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let k = next.fetch_add(1, Ordering::Relaxed);
                    let Some(&(variant, n, seed)) = jobs.get(k) else { break };
                    let result = match out {
                        Some(root) => self.run_to_dir(variant, seed, Some(n), &run_dir(root, variant, n, seed)),
                        None => self.run(variant, seed, Some(n)),
                    };
                    *slots[k].lock().unwrap() = Some(result);
                });
            }
        });
        slots.into_iter().map(|s| s.into_inner().unwrap().expect("every job ran")).collect()
    }

    /// Oracle fields and the labeled sets every configured seed would use.
    pub fn generate(&self, out: &Path) -> Result<()> {
        std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        let all = seed_list(&self.config.seeds);
        self.field_high()?.write_csv(out.join("field_high.csv"), &self.config.header(&all))?;
        self.field_low()?.write_csv(out.join("field_low.csv"), &self.config.header(&all))?;
        for &seed in &self.config.seeds {
            let dir = out.join(format!("seed{seed}"));
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            let header = self.config.header(&seed.to_string());
            heat::sample_labeled(self.field_low()?, self.config.labels.low_fidelity, seed, None)?
                .write_csv(dir.join("labeled_low.csv"), &header)?;
            self.labels(Variant::PinnData, seed, self.config.labels.pinn_data)?
                .write_csv(dir.join("labeled_high.csv"), &header)?;
            self.labels(Variant::MfPinnData, seed, self.config.labels.cooldown_cloud)?
                .write_csv(dir.join("cooldown_cloud.csv"), &header)?;
        }
        Ok(())
    }

    /// Labeled-data sweep of the plain PINN over `labels.sweep`.
    pub fn reproduce_table2(&self, out: Option<&Path>) -> Result<Vec<RunResult>> {
        let jobs: Vec<_> = self
            .config
            .labels
            .sweep
            .iter()
            .flat_map(|&n| self.config.seeds.iter().map(move |&s| (Variant::PinnData, n, s)))
            .collect();
        let runs = self.run_many(&jobs, out.map(|o| o.join("runs")).as_deref())?;
        if let Some(out) = out {
            self.write_tables(out, "table2", &runs)?;
        }
        Ok(runs)
    }

    /// All four variants over every seed.
    pub fn reproduce_table3(&self, out: Option<&Path>) -> Result<Vec<RunResult>> {
        let jobs: Vec<_> = Variant::ALL
            .into_iter()
            .flat_map(|v| {
                let n = v.default_labels(&self.config);
                self.config.seeds.iter().map(move |&s| (v, n, s))
            })
            .collect();
        let runs = self.run_many(&jobs, out.map(|o| o.join("runs")).as_deref())?;
        if let Some(out) = out {
            self.write_tables(out, "table3", &runs)?;
        }
        Ok(runs)
    }

    /// `<name>_runs.csv` with one row per run and `<name>.csv` with the
    /// median over seeds of each `(variant, labeled_n)` group.
    fn write_tables(&self, out: &Path, name: &str, runs: &[RunResult]) -> Result<()> {
        std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        let header = self.config.header(&seed_list(&self.config.seeds));
        let mut table = Table::new(&header, &SWEEP_HEADER);
        for r in runs {
            table.push(vec![
                r.variant.name().into(),
                r.labeled_n.to_string(),
                r.seed.to_string(),
                csvio::fmt_f64(r.rel_l2),
            ]);
        }
        table.write(out.join(format!("{name}_runs.csv")))?;
        let mut summary = Table::new(&header, &SUMMARY_HEADER);
        for (variant, n, errs) in group_medians(runs) {
            summary.push(vec![variant.name().into(), n.to_string(), csvio::fmt_f64(median(&errs))]);
        }
        summary.write(out.join(format!("{name}.csv")))
    }
}

pub const SWEEP_HEADER: [&str; 4] = ["variant", "labeled_n", "seed", "rel_l2"];
pub const SUMMARY_HEADER: [&str; 3] = ["variant", "labeled_n", "median_rel_l2"];
pub const MIDPOINT_HEADER: [&str; 3] = ["t_s", "predicted_C", "oracle_C"];

/// Per-run errors grouped by `(variant, labeled_n)`, in first-seen order.
pub fn group_medians(runs: &[RunResult]) -> Vec<(Variant, usize, Vec<f64>)> {
    let mut groups: Vec<(Variant, usize, Vec<f64>)> = Vec::new();
    for r in runs {
        match groups.iter_mut().find(|g| g.0 == r.variant && g.1 == r.labeled_n) {
            Some(g) => g.2.push(r.rel_l2),
            None => groups.push((r.variant, r.labeled_n, vec![r.rel_l2])),
        }
    }
    groups
}

pub fn run_dir(root: &Path, variant: Variant, labeled_n: usize, seed: u64) -> PathBuf {
    root.join(format!("{}_n{labeled_n}_seed{seed}", variant.name().replace('+', "_")))
}

pub fn write_history(path: impl AsRef<Path>, comments: &[String], history: &[LossReport]) -> Result<()> {
    let mut t = Table::new(comments, &HISTORY_HEADER);
    for r in history {
        t.push(pinn::history_row(r));
    }
    t.write(path)
}

/// Predicted and oracle temperature at mid-thickness, at every snapshot.
pub fn midpoint_curve(model: &Surrogate, solver: &SolverSettings) -> Result<Vec<(f64, f64, f64)>> {
    let setup = model.setup();
    let field = heat::solve(setup, solver)?;
    let x_mid = 0.5 * setup.thickness;
    let n = field.n_elements();
    let pos = x_mid / setup.thickness * n as f64;
    let i = (pos.floor() as usize).min(n - 1);
    let w = pos - i as f64;
    let xt: Vec<(f64, f64)> = field.t_snapshots.iter().map(|&t| (x_mid, t)).collect();
    let pred = model.predict_many(&xt)?;
    Ok(field
        .t_snapshots
        .iter()
        .enumerate()
        .map(|(s, &t)| {
            let truth = (1.0 - w) * field.temperatures[[s, i]] + w * field.temperatures[[s, i + 1]];
            (t, pred[s], truth)
        })
        .collect())
}
