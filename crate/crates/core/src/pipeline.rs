//! Experiment configuration and the command implementations behind the
//! CLI: dataset creation, training, inference, evaluation, grid search,
//! and the timing benchmark.
//!
//! Every stochastic step derives its seed from the experiment seed, so a
//! config file reproduces a run byte for byte. Timing values never go into
//! persisted artifacts; they are printed and written only by the dedicated
//! bench command.

use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::classical::{self, ClassicalParams, GridTarget};
use crate::degrade::{self, DegradeSpec};
use crate::error::{Error, Result};
use crate::geometry::{
    circular_mask, fbp, forward_project, rearrange, subsample_angles, upsample_sinogram,
    ParallelGeometry,
};
use crate::io::{self, DatasetManifest, Role};
use crate::learn::{AugmentToggles, RegressorSpec, TrainConfig};
use crate::metrics;
use crate::multistage::{
    self, budget_matched_width, infer_multistage, infer_postprocess, train_multistage,
    MultiStageTrainConfig, TrainObject,
};
use crate::phantom::{generate_foam, FoamSpec};
use crate::rng::Rng;
use crate::stacks::ProjectionStack;

pub const CONFIG_VERSION: u32 = 1;

/// Phantom parameters; per-object seeds are derived from the experiment
/// seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomParams {
    pub n: usize,
    pub bubble_count: usize,
    pub r_min: f64,
    pub r_max: f64,
    #[serde(default = "default_cylinder_fraction")]
    pub cylinder_fraction: f64,
    #[serde(default = "default_max_attempts")]
    pub max_attempts: usize,
}

fn default_cylinder_fraction() -> f64 {
    0.95
}

fn default_max_attempts() -> usize {
    100_000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryParams {
    /// Dense scan angle count.
    pub hq_angles: usize,
    /// Keep every `lq_factor`-th angle for the low-quality scan.
    pub lq_factor: usize,
}

/// Degradation strengths; the seed is derived per object.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DegradeParams {
    pub i0: f64,
    #[serde(default = "default_absorption")]
    pub absorption_target: f64,
    pub p_ring: f64,
    #[serde(default = "default_sigma_ring")]
    pub sigma_ring: f64,
    #[serde(default = "default_p_proj")]
    pub p_proj: f64,
    pub p_zinger: f64,
    #[serde(default = "default_v_zinger")]
    pub v_zinger: f64,
}

fn default_absorption() -> f64 {
    0.5
}

fn default_sigma_ring() -> f64 {
    0.005
}

fn default_p_proj() -> f64 {
    0.10
}

fn default_v_zinger() -> f64 {
    5.0
}

impl DegradeParams {
    fn to_spec(&self, seed: u64) -> DegradeSpec {
        DegradeSpec {
            i0: self.i0,
            absorption_target: self.absorption_target,
            p_ring: self.p_ring,
            sigma_ring: self.sigma_ring,
            p_proj: self.p_proj,
            p_zinger: self.p_zinger,
            v_zinger: self.v_zinger,
            seed,
        }
    }
}

/// Per-stage training knobs; the seed is derived from the experiment seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageTrainParams {
    pub epochs: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default = "default_budget")]
    pub wall_clock_budget_secs: f64,
    pub augment: AugmentToggles,
    #[serde(default = "default_val_fraction")]
    pub validation_fraction: f64,
}

fn default_lr() -> f64 {
    1e-3
}

fn default_patience() -> usize {
    10
}

fn default_budget() -> f64 {
    600.0
}

fn default_val_fraction() -> f64 {
    0.2
}

impl StageTrainParams {
    fn to_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            patience: self.patience,
            wall_clock_budget_secs: self.wall_clock_budget_secs,
            augment: self.augment,
            validation_fraction: self.validation_fraction,
            seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainParams {
    pub stage_p: StageTrainParams,
    pub stage_s: StageTrainParams,
    pub stage_r: StageTrainParams,
    /// Post-processing baseline epochs (stages' total, per the protocol).
    pub postprocess: StageTrainParams,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    #[serde(default = "default_pair_stride")]
    pub pair_stride: usize,
}

fn default_pair_stride() -> usize {
    1
}

/// One experiment: phantom, geometry, degradation, and training setup.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    pub seed: u64,
    pub phantom: PhantomParams,
    pub geometry: GeometryParams,
    pub degrade: DegradeParams,
    pub train: TrainParams,
}

fn default_version() -> u32 {
    CONFIG_VERSION
}

impl ExperimentConfig {
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_slice(bytes)
            .map_err(|e| Error::validation(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)
            .map_err(|e| Error::Persistence(format!("{}: {e}", path.display())))?;
        Self::from_json(&bytes)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::validation(format!(
                "config: version {} unsupported",
                self.version
            )));
        }
        self.foam_spec(0).validate()?;
        if self.geometry.hq_angles < 2 {
            return Err(Error::validation(
                "config: geometry.hq_angles must be >= 2".to_string(),
            ));
        }
        if self.geometry.lq_factor == 0
            || self.geometry.hq_angles % self.geometry.lq_factor != 0
        {
            return Err(Error::validation(format!(
                "config: geometry.lq_factor {} must divide hq_angles {}",
                self.geometry.lq_factor, self.geometry.hq_angles
            )));
        }
        self.degrade.to_spec(0).validate()?;
        self.multistage_config(None).validate()?;
        self.train.postprocess.to_config(0).validate()?;
        Ok(())
    }

    fn derived_seed(&self, index: u64) -> u64 {
        Rng::new(self.seed).child(index).seed()
    }

    pub fn foam_spec(&self, object_index: u64) -> FoamSpec {
        FoamSpec {
            n: self.phantom.n,
            bubble_count: self.phantom.bubble_count,
            r_min: self.phantom.r_min,
            r_max: self.phantom.r_max,
            cylinder_fraction: self.phantom.cylinder_fraction,
            max_attempts: self.phantom.max_attempts,
            seed: self.derived_seed(100 + object_index),
        }
    }

    pub fn degrade_spec(&self, object_index: u64) -> DegradeSpec {
        self.degrade.to_spec(self.derived_seed(200 + object_index))
    }

    pub fn hq_geometry(&self) -> Result<ParallelGeometry> {
        ParallelGeometry::new(self.geometry.hq_angles, self.phantom.n, self.phantom.n)
    }

    pub fn multistage_config(&self, workdir: Option<PathBuf>) -> MultiStageTrainConfig {
        MultiStageTrainConfig {
            stage_p: self.train.stage_p.to_config(self.derived_seed(300)),
            stage_s: self.train.stage_s.to_config(self.derived_seed(301)),
            stage_r: self.train.stage_r.to_config(self.derived_seed(302)),
            hidden_layers: self.train.hidden_layers,
            hidden_width: self.train.hidden_width,
            pair_stride: self.train.pair_stride,
            simulated_reference: false,
            workdir,
        }
    }

    pub fn postprocess_config(&self) -> TrainConfig {
        self.train.postprocess.to_config(self.derived_seed(303))
    }

    /// Total trainable parameters of the three stage networks.
    pub fn multistage_parameter_total(&self) -> usize {
        [1usize, 2, 3]
            .iter()
            .map(|&c| {
                RegressorSpec {
                    in_channels: c,
                    hidden_layers: self.train.hidden_layers,
                    hidden_width: self.train.hidden_width,
                    residual: true,
                }
                .parameter_count()
            })
            .sum()
    }
}

/// A small desk-scale default used by tests and as a starting config.
pub fn default_config(seed: u64) -> ExperimentConfig {
    let stage = |epochs: usize, augment: AugmentToggles| StageTrainParams {
        epochs,
        learning_rate: 1e-3,
        patience: 10,
        wall_clock_budget_secs: 1800.0,
        augment,
        validation_fraction: 0.2,
    };
    ExperimentConfig {
        version: CONFIG_VERSION,
        seed,
        phantom: PhantomParams {
            n: 128,
            bubble_count: 300,
            r_min: 2.0,
            r_max: 8.0,
            cylinder_fraction: 0.95,
            max_attempts: 100_000,
        },
        geometry: GeometryParams {
            hq_angles: 256,
            lq_factor: 4,
        },
        degrade: DegradeParams {
            i0: 100.0,
            absorption_target: 0.5,
            p_ring: 0.1,
            sigma_ring: 0.005,
            p_proj: 0.10,
            p_zinger: 0.001,
            v_zinger: 5.0,
        },
        train: TrainParams {
            stage_p: stage(6, AugmentToggles::all()),
            stage_s: stage(6, AugmentToggles::flips_only()),
            stage_r: stage(20, AugmentToggles::all()),
            postprocess: stage(32, AugmentToggles::all()),
            hidden_layers: 3,
            hidden_width: 8,
            pair_stride: 4,
        },
    }
}

fn provenance(command: &str, config: &ExperimentConfig) -> serde_json::Value {
    serde_json::json!({ "command": command, "config": config })
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(path, serde_json::to_vec_pretty(value)?)?;
    Ok(())
}

pub const OBJECTS: [&str; 2] = ["train", "test"];

/// Generates the train and test phantoms and persists them with a
/// manifest.
pub fn cmd_phantom(config: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    config.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let mut manifest = DatasetManifest::new(config.seed);
    manifest.provenance = Some(provenance("phantom", config));
    for (i, name) in OBJECTS.iter().enumerate() {
        let foam = generate_foam(&config.foam_spec(i as u64))?;
        if foam.placed() < config.phantom.bubble_count {
            eprintln!(
                "warning: {name} phantom placed {} of {} bubbles before the attempt budget ran out",
                foam.placed(),
                config.phantom.bubble_count
            );
        }
        let path = format!("{name}.raw");
        io::save_volume(&foam.volume, &out_dir.join(&path))?;
        manifest.push(path, Role::HighQuality, &[config.phantom.n; 3]);
    }
    manifest.save(&out_dir.join("manifest.json"))?;
    Ok(())
}

/// Simulates the scans: clean dense projections, degraded sparse
/// projections, and reference reconstructions for both objects.
pub fn cmd_simulate(config: &ExperimentConfig, phantom_dir: &Path, out_dir: &Path) -> Result<()> {
    config.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let hq_geometry = config.hq_geometry()?;
    let mut manifest = DatasetManifest::new(config.seed);
    manifest.provenance = Some(provenance("simulate", config));
    manifest.geometry = Some(serde_json::json!({
        "hq_angles": config.geometry.hq_angles,
        "lq_factor": config.geometry.lq_factor,
        "detector": [config.phantom.n, config.phantom.n],
    }));
    manifest.degrade = Some(serde_json::to_value(&config.degrade)?);

    for (i, name) in OBJECTS.iter().enumerate() {
        let volume = io::load_volume(&phantom_dir.join(format!("{name}.raw")))?;
        let p_hq = forward_project(&volume, &hq_geometry)?;
        let lq_clean = subsample_angles(&p_hq, config.geometry.lq_factor)?;
        let (p_hat, _) = degrade::degrade(&lq_clean, &config.degrade_spec(i as u64))?;

        let s_hq = rearrange(&p_hq);
        let r_hq = circular_mask(&fbp(&s_hq, &hq_geometry)?)?;
        let s_hat_up = upsample_sinogram(&rearrange(&p_hat), hq_geometry.n_theta())?;
        let r_hat_up = circular_mask(&fbp(&s_hat_up, &hq_geometry)?)?;

        let entries: [(&str, Role); 4] = [
            ("p_hq", Role::HighQuality),
            ("p_hat", Role::LowQuality),
            ("r_hq", Role::HighQuality),
            ("r_hat_up", Role::LowQuality),
        ];
        for (kind, role) in entries {
            let path = format!("{name}_{kind}.raw");
            let shape: Vec<usize> = match kind {
                "p_hq" => {
                    io::save_projections(&p_hq, &out_dir.join(&path))?;
                    p_hq.data().shape().to_vec()
                }
                "p_hat" => {
                    io::save_projections(&p_hat, &out_dir.join(&path))?;
                    p_hat.data().shape().to_vec()
                }
                "r_hq" => {
                    io::save_volume(&r_hq, &out_dir.join(&path))?;
                    r_hq.data().shape().to_vec()
                }
                "r_hat_up" => {
                    io::save_volume(&r_hat_up, &out_dir.join(&path))?;
                    r_hat_up.data().shape().to_vec()
                }
                _ => unreachable!(),
            };
            manifest.push(path, role, &shape);
        }
    }
    manifest.save(&out_dir.join("manifest.json"))?;
    Ok(())
}

fn load_object(data_dir: &Path, name: &str) -> Result<(ProjectionStack, ProjectionStack)> {
    let p_hat = io::load_projections(&data_dir.join(format!("{name}_p_hat.raw")))?;
    let p_hq = io::load_projections(&data_dir.join(format!("{name}_p_hq.raw")))?;
    Ok((p_hat, p_hq))
}

/// Which model family to train.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    MultiStage,
    PostProcess,
}

impl std::str::FromStr for TrainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "multistage" => Ok(TrainMode::MultiStage),
            "postprocess" => Ok(TrainMode::PostProcess),
            other => Err(Error::validation(format!(
                "mode '{other}' is not multistage|postprocess"
            ))),
        }
    }
}

/// Trains either the three-stage model (into `out_dir/stage_*`) or the
/// budget-matched post-processing baseline (into `out_dir/model.bin`).
pub fn cmd_train(
    config: &ExperimentConfig,
    data_dir: &Path,
    mode: TrainMode,
    out_dir: &Path,
) -> Result<()> {
    config.validate()?;
    DatasetManifest::load(&data_dir.join("manifest.json"))?;
    std::fs::create_dir_all(out_dir)?;
    let (p_hat, p_hq) = load_object(data_dir, "train")?;

    match mode {
        TrainMode::MultiStage => {
            let cfg = config.multistage_config(Some(out_dir.to_path_buf()));
            let objects = vec![TrainObject { lq: p_hat, hq: p_hq }];
            let (_, report) = train_multistage(&objects, &cfg)?;
            write_json(
                &out_dir.join("train_report.json"),
                &serde_json::to_value(&report)?,
            )?;
        }
        TrainMode::PostProcess => {
            let r_hq = io::load_volume(&data_dir.join("train_r_hq.raw"))?;
            let r_hat_up = io::load_volume(&data_dir.join("train_r_hat_up.raw"))?;
            let multi_total = config.multistage_parameter_total();
            let width = budget_matched_width(multi_total, config.train.hidden_layers);
            let post_params = RegressorSpec {
                in_channels: 1,
                hidden_layers: config.train.hidden_layers,
                hidden_width: width,
                residual: true,
            }
            .parameter_count();
            let (model, report) = multistage::train_postprocess(
                &r_hat_up,
                &r_hq,
                &config.postprocess_config(),
                config.train.hidden_layers,
                width,
                config.train.pair_stride,
            )?;
            crate::learn::save_model(&model, &out_dir.join("model.bin"))?;
            write_json(
                &out_dir.join("postprocess.json"),
                &serde_json::json!({
                    "width": width,
                    "parameters": post_params,
                    "multistage_parameters": multi_total,
                    "report": serde_json::to_value(&report)?,
                }),
            )?;
        }
    }
    write_json(
        &out_dir.join("manifest.json"),
        &serde_json::json!({
            "version": CONFIG_VERSION,
            "provenance": provenance(
                match mode {
                    TrainMode::MultiStage => "train --mode multistage",
                    TrainMode::PostProcess => "train --mode postprocess",
                },
                config
            ),
        }),
    )?;
    Ok(())
}

/// 8-bit binary PGM preview with min/max windowing recorded in a sidecar.
pub fn write_pgm_preview(img: &Array2<f64>, path: &Path) -> Result<()> {
    let (h, w) = img.dim();
    let mut lo = f64::MAX;
    let mut hi = f64::MIN;
    for &v in img.iter() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
    for &v in img.iter() {
        bytes.push((((v - lo) / span) * 255.0).round().clamp(0.0, 255.0) as u8);
    }
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(path, bytes)?;
    write_json(
        &path.with_extension("pgm.json"),
        &serde_json::json!({ "window_min": lo, "window_max": hi }),
    )?;
    Ok(())
}

/// Runs inference with a trained model directory (multi-stage if it holds
/// `multistage.json`, post-processing otherwise) and persists all
/// artifacts, previews, and a manifest. Timings go to stdout only.
pub fn cmd_infer(model_dir: &Path, data_dir: &Path, object: &str, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let p_hat = io::load_projections(&data_dir.join(format!("{object}_p_hat.raw")))?;
    let mut manifest = DatasetManifest::new(0);

    if model_dir.join("multistage.json").exists() {
        let model = multistage::load_multistage(model_dir)?;
        let t0 = Instant::now();
        let artifacts = infer_multistage(&model, &p_hat)?;
        let elapsed = t0.elapsed().as_secs_f64();

        io::save_projections(&artifacts.p_star, &out_dir.join("p_star.raw"))?;
        io::save_sinograms(&artifacts.s_star, &out_dir.join("s_star.raw"))?;
        io::save_sinograms(&artifacts.s_hat_up, &out_dir.join("s_hat_up.raw"))?;
        io::save_volume(&artifacts.recon_lq, &out_dir.join("recon_lq.raw"))?;
        io::save_volume(&artifacts.recon_p, &out_dir.join("recon_p.raw"))?;
        io::save_volume(&artifacts.recon_s, &out_dir.join("recon_s.raw"))?;
        io::save_volume(&artifacts.r_star, &out_dir.join("r_star.raw"))?;
        for (name, shape, role) in [
            ("p_star.raw", artifacts.p_star.data().shape(), Role::Intermediate),
            ("s_star.raw", artifacts.s_star.data().shape(), Role::Intermediate),
            ("s_hat_up.raw", artifacts.s_hat_up.data().shape(), Role::Intermediate),
            ("recon_lq.raw", artifacts.recon_lq.data().shape(), Role::Intermediate),
            ("recon_p.raw", artifacts.recon_p.data().shape(), Role::Intermediate),
            ("recon_s.raw", artifacts.recon_s.data().shape(), Role::Intermediate),
            ("r_star.raw", artifacts.r_star.data().shape(), Role::Intermediate),
        ] {
            manifest.push(name, role, shape);
        }

        let mid_s = artifacts.s_star.dims().0 / 2;
        let mid_r = artifacts.r_star.dims().0 / 2;
        write_pgm_preview(
            &artifacts
                .p_star
                .data()
                .index_axis(ndarray::Axis(0), artifacts.p_star.dims().0 / 2)
                .to_owned(),
            &out_dir.join("previews").join("p_star.pgm"),
        )?;
        write_pgm_preview(
            &artifacts
                .s_star
                .data()
                .index_axis(ndarray::Axis(0), mid_s)
                .to_owned(),
            &out_dir.join("previews").join("s_star.pgm"),
        )?;
        write_pgm_preview(
            &artifacts
                .r_star
                .data()
                .index_axis(ndarray::Axis(0), mid_r)
                .to_owned(),
            &out_dir.join("previews").join("r_star.pgm"),
        )?;

        let t = &artifacts.timings;
        println!(
            "inference timings (s): stage_p {:.3}, rearrange+upsample {:.3}, stage_s {:.3}, \
             reconstructions {:.3}, stage_r {:.3}, total {:.3} (end-to-end {:.3})",
            t.stage_p, t.rearrange_upsample, t.stage_s, t.reconstructions, t.stage_r, t.total,
            elapsed
        );
    } else {
        let model = crate::learn::load_model(&model_dir.join("model.bin"))?;
        let r_hat_up = io::load_volume(&data_dir.join(format!("{object}_r_hat_up.raw")))?;
        let t0 = Instant::now();
        let r_pp = infer_postprocess(&model, &r_hat_up)?;
        println!("post-processing inference: {:.3} s", t0.elapsed().as_secs_f64());
        io::save_volume(&r_pp, &out_dir.join("r_pp.raw"))?;
        manifest.push("r_pp.raw", Role::Intermediate, r_pp.data().shape());
        let mid = r_pp.dims().0 / 2;
        write_pgm_preview(
            &r_pp.data().index_axis(ndarray::Axis(0), mid).to_owned(),
            &out_dir.join("previews").join("r_pp.pgm"),
        )?;
    }
    manifest.save(&out_dir.join("manifest.json"))?;
    Ok(())
}

/// Compares a result volume against a reference volume and writes the
/// metric report as CSV and JSON.
pub fn cmd_evaluate(result: &Path, reference: &Path, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let x = io::load_volume(result)?;
    let r = io::load_volume(reference)?;
    let report = metrics::evaluate_volumes(&x, &r)?;
    std::fs::write(out_dir.join("metrics.csv"), report.to_csv())?;
    write_json(&out_dir.join("metrics.json"), &report.to_json())?;
    println!(
        "mean PSNR {:.3} dB, mean SSIM {:.4}, mean MSE {:.6e} over {} slices",
        report.mean_psnr,
        report.mean_ssim,
        report.mean_mse,
        report.per_slice_psnr.len()
    );
    Ok(())
}

/// Grid file: the candidate parameter list plus the evaluation domain.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridFile {
    pub entries: Vec<ClassicalParams>,
    /// "projection" or "reconstruction"
    pub target: String,
    #[serde(default)]
    pub denoise_size: Option<usize>,
}

/// Runs the classical-chain grid search against the train object and
/// writes the score table and the best entry.
pub fn cmd_gridsearch(
    config: &ExperimentConfig,
    grid_path: &Path,
    data_dir: &Path,
    out_dir: &Path,
) -> Result<()> {
    config.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let bytes = std::fs::read(grid_path)
        .map_err(|e| Error::Persistence(format!("{}: {e}", grid_path.display())))?;
    let grid: GridFile =
        serde_json::from_slice(&bytes).map_err(|e| Error::validation(format!("grid: {e}")))?;
    let (p_hat, p_hq) = load_object(data_dir, "train")?;

    let (best, scores) = match grid.target.as_str() {
        "projection" => {
            let reference = subsample_angles(&p_hq, config.geometry.lq_factor)?;
            classical::grid_search(
                &grid.entries,
                &p_hat,
                &GridTarget::Projection {
                    reference: &reference,
                },
            )?
        }
        "reconstruction" => {
            let r_hq_lq_grid = io::load_volume(&data_dir.join("train_r_hq.raw"))?;
            let lq_geometry = config.hq_geometry()?.subsampled(config.geometry.lq_factor)?;
            classical::grid_search(
                &grid.entries,
                &p_hat,
                &GridTarget::Reconstruction {
                    reference: &r_hq_lq_grid,
                    geometry: &lq_geometry,
                    denoise_size: grid.denoise_size,
                },
            )?
        }
        other => {
            return Err(Error::validation(format!(
                "grid.target '{other}' is not projection|reconstruction"
            )));
        }
    };
    std::fs::write(out_dir.join("scores.csv"), classical::scores_to_csv(&scores))?;
    write_json(
        &out_dir.join("best.json"),
        &serde_json::json!({
            "index": best,
            "params": scores[best].params,
            "mse": scores[best].mse,
        }),
    )?;
    println!(
        "best grid entry {} with MSE {:.6e}",
        best, scores[best].mse
    );
    Ok(())
}

/// Timed inference benchmark: loads, per-stage network passes, upsampling,
/// and reconstructions, with the stage sum checked against end-to-end wall
/// clock.
pub fn cmd_bench(model_dir: &Path, data_dir: &Path, object: &str, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let t_load = Instant::now();
    let model = multistage::load_multistage(model_dir)?;
    let p_hat = io::load_projections(&data_dir.join(format!("{object}_p_hat.raw")))?;
    let load_secs = t_load.elapsed().as_secs_f64();

    let t0 = Instant::now();
    let artifacts = infer_multistage(&model, &p_hat)?;
    let end_to_end = t0.elapsed().as_secs_f64();
    let t = &artifacts.timings;

    let mut csv = String::from("step,seconds\n");
    csv.push_str(&format!("load,{}\n", load_secs));
    csv.push_str(&format!("stage_p,{}\n", t.stage_p));
    csv.push_str(&format!("rearrange_upsample,{}\n", t.rearrange_upsample));
    csv.push_str(&format!("stage_s,{}\n", t.stage_s));
    csv.push_str(&format!("reconstructions,{}\n", t.reconstructions));
    csv.push_str(&format!("stage_r,{}\n", t.stage_r));
    csv.push_str(&format!("stage_sum,{}\n", t.stage_sum()));
    csv.push_str(&format!("total,{}\n", t.total));
    csv.push_str(&format!("end_to_end,{}\n", end_to_end));
    std::fs::write(out_dir.join("timings.csv"), &csv)?;
    println!("{csv}");
    Ok(())
}
