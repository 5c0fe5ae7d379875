//! The three-stage artifact reduction pipeline: a projection-domain
//! network, a sinogram-domain network fed by the first stage, and a
//! reconstruction-domain network fed by both, trained strictly
//! sequentially. Also the single-network post-processing baseline it is
//! benchmarked against.
//!
//! Stage inputs follow the inference chain: `p* = f_p(p̂)`;
//! `s* = f_s(upsample(T(p̂)), upsample(T(p*)))` on the dense angle grid;
//! `r* = f_r(R(upsample(T(p̂))), R(upsample(T(p*))), R(s*))`, all three
//! reconstructions on the dense grid and circularly masked before stage 3.
//! With every stage at its residual identity the pipeline therefore
//! collapses to `mask(fbp(upsample(T(p̂))))`, the do-nothing baseline.

use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    circular_mask, fbp, rearrange, upsample_sinogram, ParallelGeometry,
};
use crate::learn::{
    load_model, predict, save_model, train, RegressorModel, RegressorSpec, TrainConfig,
    TrainReport,
};
use crate::stacks::{ProjectionStack, SinogramStack, Volume};

/// The trained triple plus the geometry needed to replay inference.
#[derive(Debug, Clone)]
pub struct MultiStageModel {
    pub f_p: RegressorModel,
    pub f_s: RegressorModel,
    pub f_r: RegressorModel,
    pub lq_geometry: ParallelGeometry,
    pub hq_geometry: ParallelGeometry,
    /// Sinogram upsampling target, the dense angle count.
    pub upsample_rows: usize,
}

/// One reference object: corrupted low-quality projections plus the clean
/// high-quality scan whose angle set contains the low-quality angles.
#[derive(Debug, Clone)]
pub struct TrainObject {
    pub lq: ProjectionStack,
    pub hq: ProjectionStack,
}

/// Configuration for sequential three-stage training.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultiStageTrainConfig {
    pub stage_p: TrainConfig,
    pub stage_s: TrainConfig,
    pub stage_r: TrainConfig,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    /// Keep every `pair_stride`-th sinogram row / slice as a training pair.
    pub pair_stride: usize,
    /// Allow high-quality references whose angle set does not contain the
    /// low-quality angles (references simulated by forward projection).
    pub simulated_reference: bool,
    /// Persist per-stage checkpoints and intermediates here.
    #[serde(skip)]
    pub workdir: Option<PathBuf>,
}

impl MultiStageTrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.stage_p.validate()?;
        self.stage_s.validate()?;
        self.stage_r.validate()?;
        if self.pair_stride == 0 {
            return Err(Error::validation("pair_stride must be >= 1".to_string()));
        }
        RegressorSpec {
            in_channels: 1,
            hidden_layers: self.hidden_layers,
            hidden_width: self.hidden_width,
            residual: true,
        }
        .validate()
    }
}

/// Per-stage wall-clock breakdown of one inference run, in seconds.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StageTimings {
    pub stage_p: f64,
    pub rearrange_upsample: f64,
    pub stage_s: f64,
    pub reconstructions: f64,
    pub stage_r: f64,
    pub total: f64,
}

impl StageTimings {
    pub fn stage_sum(&self) -> f64 {
        self.stage_p + self.rearrange_upsample + self.stage_s + self.reconstructions + self.stage_r
    }
}

/// Every intermediate of one inference run.
#[derive(Debug, Clone)]
pub struct StageArtifacts {
    pub p_star: ProjectionStack,
    pub s_hat_up: SinogramStack,
    pub s_p_up: SinogramStack,
    pub s_star: SinogramStack,
    /// Masked reconstruction of the upsampled corrupted sinograms.
    pub recon_lq: Volume,
    /// Masked reconstruction of the upsampled stage-1 output.
    pub recon_p: Volume,
    /// Masked reconstruction of the stage-2 output at dense angles.
    pub recon_s: Volume,
    pub r_star: Volume,
    pub timings: StageTimings,
}

fn angle_matched_indices(lq: &[f64], hq: &[f64]) -> Option<Vec<usize>> {
    let mut indices = Vec::with_capacity(lq.len());
    for &a in lq {
        let hit = hq.iter().position(|&b| (a - b).abs() < 1e-12)?;
        indices.push(hit);
    }
    Some(indices)
}

/// Applies a 1-channel regressor to every image of a projection stack.
pub fn apply_stage_p(model: &RegressorModel, p: &ProjectionStack) -> Result<ProjectionStack> {
    let (n_theta, m, n) = p.dims();
    let mut out = Array3::zeros((n_theta, m, n));
    for a in 0..n_theta {
        let img = p
            .data()
            .index_axis(ndarray::Axis(0), a)
            .to_owned()
            .insert_axis(ndarray::Axis(0));
        let y = predict(model, &img)?;
        out.index_axis_mut(ndarray::Axis(0), a)
            .assign(&y.index_axis(ndarray::Axis(0), 0));
    }
    p.with_data(out)
}

/// Applies the 2-channel sinogram regressor row-stack by row-stack.
pub fn apply_stage_s(
    model: &RegressorModel,
    s_hat_up: &SinogramStack,
    s_p_up: &SinogramStack,
) -> Result<SinogramStack> {
    if s_hat_up.dims() != s_p_up.dims() {
        return Err(Error::validation(
            "stage s: sinogram shapes differ".to_string(),
        ));
    }
    let (m, rows, n) = s_hat_up.dims();
    let mut out = Array3::zeros((m, rows, n));
    for mi in 0..m {
        let mut input = Array3::zeros((2, rows, n));
        input
            .index_axis_mut(ndarray::Axis(0), 0)
            .assign(&s_hat_up.data().index_axis(ndarray::Axis(0), mi));
        input
            .index_axis_mut(ndarray::Axis(0), 1)
            .assign(&s_p_up.data().index_axis(ndarray::Axis(0), mi));
        let y = predict(model, &input)?;
        out.index_axis_mut(ndarray::Axis(0), mi)
            .assign(&y.index_axis(ndarray::Axis(0), 0));
    }
    s_hat_up.with_data(out)
}

/// Applies the 3-channel reconstruction regressor slice by slice.
pub fn apply_stage_r(
    model: &RegressorModel,
    recon_lq: &Volume,
    recon_p: &Volume,
    recon_s: &Volume,
) -> Result<Volume> {
    if recon_lq.dims() != recon_p.dims() || recon_lq.dims() != recon_s.dims() {
        return Err(Error::validation(
            "stage r: reconstruction shapes differ".to_string(),
        ));
    }
    let (nz, ny, nx) = recon_lq.dims();
    let mut out = Array3::zeros((nz, ny, nx));
    for z in 0..nz {
        let mut input = Array3::zeros((3, ny, nx));
        input
            .index_axis_mut(ndarray::Axis(0), 0)
            .assign(&recon_lq.data().index_axis(ndarray::Axis(0), z));
        input
            .index_axis_mut(ndarray::Axis(0), 1)
            .assign(&recon_p.data().index_axis(ndarray::Axis(0), z));
        input
            .index_axis_mut(ndarray::Axis(0), 2)
            .assign(&recon_s.data().index_axis(ndarray::Axis(0), z));
        let y = predict(model, &input)?;
        out.index_axis_mut(ndarray::Axis(0), z)
            .assign(&y.index_axis(ndarray::Axis(0), 0));
    }
    Volume::new(out)
}

fn projection_pairs(
    lq: &ProjectionStack,
    hq_matched: &ProjectionStack,
) -> Vec<(Array3<f64>, Array3<f64>)> {
    let (n_theta, _, _) = lq.dims();
    (0..n_theta)
        .map(|a| {
            let input = lq
                .data()
                .index_axis(ndarray::Axis(0), a)
                .to_owned()
                .insert_axis(ndarray::Axis(0));
            let target = hq_matched
                .data()
                .index_axis(ndarray::Axis(0), a)
                .to_owned()
                .insert_axis(ndarray::Axis(0));
            (input, target)
        })
        .collect()
}

fn sinogram_pairs(
    s_hat_up: &SinogramStack,
    s_p_up: &SinogramStack,
    s_hq: &SinogramStack,
    stride: usize,
) -> Vec<(Array3<f64>, Array3<f64>)> {
    let (m, rows, n) = s_hat_up.dims();
    (0..m)
        .step_by(stride)
        .map(|mi| {
            let mut input = Array3::zeros((2, rows, n));
            input
                .index_axis_mut(ndarray::Axis(0), 0)
                .assign(&s_hat_up.data().index_axis(ndarray::Axis(0), mi));
            input
                .index_axis_mut(ndarray::Axis(0), 1)
                .assign(&s_p_up.data().index_axis(ndarray::Axis(0), mi));
            let target = s_hq
                .data()
                .index_axis(ndarray::Axis(0), mi)
                .to_owned()
                .insert_axis(ndarray::Axis(0));
            (input, target)
        })
        .collect()
}

fn volume_pairs(
    inputs: [&Volume; 3],
    target: &Volume,
    stride: usize,
) -> Vec<(Array3<f64>, Array3<f64>)> {
    let (nz, ny, nx) = target.dims();
    (0..nz)
        .step_by(stride)
        .map(|z| {
            let mut input = Array3::zeros((3, ny, nx));
            for (c, v) in inputs.iter().enumerate() {
                input
                    .index_axis_mut(ndarray::Axis(0), c)
                    .assign(&v.data().index_axis(ndarray::Axis(0), z));
            }
            let t = target
                .data()
                .index_axis(ndarray::Axis(0), z)
                .to_owned()
                .insert_axis(ndarray::Axis(0));
            (input, t)
        })
        .collect()
}

/// Reports from the three sequential stage trainings.
#[derive(Debug, Clone, Serialize)]
pub struct MultiStageTrainReport {
    pub stage_p: TrainReport,
    pub stage_s: TrainReport,
    pub stage_r: TrainReport,
}

/// Trains the three stages strictly sequentially, freezing each before the
/// next begins. High-quality sinograms and reconstructions are derived from
/// the high-quality projections through the pipeline operators. When a
/// workdir is given, stage checkpoints and per-object intermediates are
/// persisted as they are produced.
pub fn train_multistage(
    objects: &[TrainObject],
    cfg: &MultiStageTrainConfig,
) -> Result<(MultiStageModel, MultiStageTrainReport)> {
    cfg.validate()?;
    if objects.is_empty() {
        return Err(Error::validation("train_multistage: no objects".to_string()));
    }
    let (lq_theta, m, n) = objects[0].lq.dims();
    let (hq_theta, _, _) = objects[0].hq.dims();
    for (i, obj) in objects.iter().enumerate() {
        if obj.lq.dims() != (lq_theta, m, n) || obj.hq.dims() != (hq_theta, m, n) {
            return Err(Error::validation(format!(
                "train_multistage: object {i} shapes inconsistent"
            )));
        }
    }
    let lq_geometry =
        ParallelGeometry::from_angles(objects[0].lq.angles().to_vec(), m, n)?;
    let hq_geometry =
        ParallelGeometry::from_angles(objects[0].hq.angles().to_vec(), m, n)?;

    // Angle-matched high-quality projections for stage-p targets.
    let matched = angle_matched_indices(lq_geometry.angles(), hq_geometry.angles());
    let match_indices = match (matched, cfg.simulated_reference) {
        (Some(idx), _) => idx,
        (None, true) => {
            return Err(Error::validation(
                "train_multistage: simulated-reference mode requires angle-matched \
                 projections generated via forward projection; supply hq stacks whose \
                 angles contain the lq angles"
                    .to_string(),
            ));
        }
        (None, false) => {
            return Err(Error::validation(
                "train_multistage: low-quality angles are not a subset of the \
                 high-quality angles"
                    .to_string(),
            ));
        }
    };

    let workdir = cfg.workdir.as_deref();
    if let Some(dir) = workdir {
        std::fs::create_dir_all(dir)?;
    }

    // Stage 1: projection domain.
    let mut pairs_p = Vec::new();
    for obj in objects {
        let mut hq_sel = Array3::zeros((lq_theta, m, n));
        for (k, &idx) in match_indices.iter().enumerate() {
            hq_sel
                .index_axis_mut(ndarray::Axis(0), k)
                .assign(&obj.hq.data().index_axis(ndarray::Axis(0), idx));
        }
        let hq_matched =
            ProjectionStack::new(hq_sel, lq_geometry.angles().to_vec())?;
        pairs_p.extend(projection_pairs(&obj.lq, &hq_matched));
    }
    let mut f_p = RegressorModel::init(
        RegressorSpec {
            in_channels: 1,
            hidden_layers: cfg.hidden_layers,
            hidden_width: cfg.hidden_width,
            residual: true,
        },
        cfg.stage_p.seed ^ 0x5EED_0001,
    )?;
    let report_p = train(&mut f_p, &pairs_p, &cfg.stage_p)?;
    drop(pairs_p);
    if let Some(dir) = workdir {
        save_model(&f_p, &dir.join("stage_p").join("model.bin"))?;
    }

    // Stage-1 outputs plus the sinogram-domain inputs for stage 2.
    let hq_rows = hq_geometry.n_theta();
    let mut stage2_inputs = Vec::with_capacity(objects.len());
    for (i, obj) in objects.iter().enumerate() {
        let p_star = apply_stage_p(&f_p, &obj.lq)?;
        let s_hat_up = upsample_sinogram(&rearrange(&obj.lq), hq_rows)?;
        let s_p_up = upsample_sinogram(&rearrange(&p_star), hq_rows)?;
        let s_hq = rearrange(&obj.hq);
        if let Some(dir) = workdir {
            let inter = dir.join("intermediates");
            crate::io::save_projections(&p_star, &inter.join(format!("obj{i}_p_star.raw")))?;
            crate::io::save_sinograms(
                &s_hat_up,
                &inter.join(format!("obj{i}_s_hat_up.raw")),
            )?;
            crate::io::save_sinograms(&s_p_up, &inter.join(format!("obj{i}_s_p_up.raw")))?;
        }
        stage2_inputs.push((p_star, s_hat_up, s_p_up, s_hq));
    }

    // Stage 2: sinogram domain.
    let mut pairs_s = Vec::new();
    for (_, s_hat_up, s_p_up, s_hq) in &stage2_inputs {
        pairs_s.extend(sinogram_pairs(s_hat_up, s_p_up, s_hq, cfg.pair_stride));
    }
    let mut f_s = RegressorModel::init(
        RegressorSpec {
            in_channels: 2,
            hidden_layers: cfg.hidden_layers,
            hidden_width: cfg.hidden_width,
            residual: true,
        },
        cfg.stage_s.seed ^ 0x5EED_0002,
    )?;
    let report_s = train(&mut f_s, &pairs_s, &cfg.stage_s)?;
    drop(pairs_s);
    if let Some(dir) = workdir {
        save_model(&f_s, &dir.join("stage_s").join("model.bin"))?;
    }

    // Stage 3: reconstruction domain.
    let mut pairs_r = Vec::new();
    for (i, obj) in objects.iter().enumerate() {
        let (_, s_hat_up, s_p_up, s_hq) = &stage2_inputs[i];
        let s_star = apply_stage_s(&f_s, s_hat_up, s_p_up)?;
        let recon_lq = circular_mask(&fbp(s_hat_up, &hq_geometry)?)?;
        let recon_p = circular_mask(&fbp(s_p_up, &hq_geometry)?)?;
        let recon_s = circular_mask(&fbp(&s_star, &hq_geometry)?)?;
        let r_hq = circular_mask(&fbp(s_hq, &hq_geometry)?)?;
        if let Some(dir) = workdir {
            let inter = dir.join("intermediates");
            crate::io::save_sinograms(&s_star, &inter.join(format!("obj{i}_s_star.raw")))?;
            crate::io::save_volume(&recon_lq, &inter.join(format!("obj{i}_recon_lq.raw")))?;
            crate::io::save_volume(&recon_p, &inter.join(format!("obj{i}_recon_p.raw")))?;
            crate::io::save_volume(&recon_s, &inter.join(format!("obj{i}_recon_s.raw")))?;
            crate::io::save_volume(&r_hq, &inter.join(format!("obj{i}_r_hq.raw")))?;
        }
        pairs_r.extend(volume_pairs(
            [&recon_lq, &recon_p, &recon_s],
            &r_hq,
            cfg.pair_stride,
        ));
    }
    drop(stage2_inputs);
    let mut f_r = RegressorModel::init(
        RegressorSpec {
            in_channels: 3,
            hidden_layers: cfg.hidden_layers,
            hidden_width: cfg.hidden_width,
            residual: true,
        },
        cfg.stage_r.seed ^ 0x5EED_0003,
    )?;
    let report_r = train(&mut f_r, &pairs_r, &cfg.stage_r)?;
    drop(pairs_r);
    if let Some(dir) = workdir {
        save_model(&f_r, &dir.join("stage_r").join("model.bin"))?;
    }

    let model = MultiStageModel {
        f_p,
        f_s,
        f_r,
        lq_geometry,
        hq_geometry,
        upsample_rows: hq_rows,
    };
    if let Some(dir) = workdir {
        save_multistage(&model, dir)?;
    }
    Ok((
        model,
        MultiStageTrainReport {
            stage_p: report_p,
            stage_s: report_s,
            stage_r: report_r,
        },
    ))
}

/// Runs the full inference chain on corrupted projections, recording the
/// wall-clock time of each stage. Deterministic for a given model and
/// input.
pub fn infer_multistage(model: &MultiStageModel, p_hat: &ProjectionStack) -> Result<StageArtifacts> {
    let (n_theta, m, n) = p_hat.dims();
    if n_theta != model.lq_geometry.n_theta()
        || m != model.lq_geometry.detector_rows()
        || n != model.lq_geometry.detector_cols()
    {
        return Err(Error::validation(format!(
            "infer: projections ({n_theta}, {m}, {n}) do not match the model's low-quality geometry"
        )));
    }
    for (a, b) in p_hat.angles().iter().zip(model.lq_geometry.angles()) {
        if (a - b).abs() > 1e-12 {
            return Err(Error::validation(
                "infer: projection angles differ from the model geometry".to_string(),
            ));
        }
    }

    let t_start = Instant::now();
    let p_star = apply_stage_p(&model.f_p, p_hat)?;
    let t_p = t_start.elapsed().as_secs_f64();

    let t0 = Instant::now();
    let s_hat_up = upsample_sinogram(&rearrange(p_hat), model.upsample_rows)?;
    let s_p_up = upsample_sinogram(&rearrange(&p_star), model.upsample_rows)?;
    let t_rearrange = t0.elapsed().as_secs_f64();

    let t0 = Instant::now();
    let s_star = apply_stage_s(&model.f_s, &s_hat_up, &s_p_up)?;
    let t_s = t0.elapsed().as_secs_f64();

    let t0 = Instant::now();
    let recon_lq = circular_mask(&fbp(&s_hat_up, &model.hq_geometry)?)?;
    let recon_p = circular_mask(&fbp(&s_p_up, &model.hq_geometry)?)?;
    let recon_s = circular_mask(&fbp(&s_star, &model.hq_geometry)?)?;
    let t_recon = t0.elapsed().as_secs_f64();

    let t0 = Instant::now();
    let r_star = apply_stage_r(&model.f_r, &recon_lq, &recon_p, &recon_s)?;
    let t_r = t0.elapsed().as_secs_f64();

    let total = t_start.elapsed().as_secs_f64();
    Ok(StageArtifacts {
        p_star,
        s_hat_up,
        s_p_up,
        s_star,
        recon_lq,
        recon_p,
        recon_s,
        r_star,
        timings: StageTimings {
            stage_p: t_p,
            rearrange_upsample: t_rearrange,
            stage_s: t_s,
            reconstructions: t_recon,
            stage_r: t_r,
            total,
        },
    })
}

/// Width such that a 1-channel post-processing regressor's parameter count
/// comes closest to `target_params`.
pub fn budget_matched_width(target_params: usize, hidden_layers: usize) -> usize {
    let mut best_w = 1;
    let mut best_diff = usize::MAX;
    for w in 1..=512 {
        let params = RegressorSpec {
            in_channels: 1,
            hidden_layers,
            hidden_width: w,
            residual: true,
        }
        .parameter_count();
        let diff = params.abs_diff(target_params);
        if diff < best_diff {
            best_diff = diff;
            best_w = w;
        }
    }
    best_w
}

/// Trains the deep post-processing baseline: one regressor from corrupted
/// reconstruction slices to high-quality slices, width chosen by the
/// caller (normally [`budget_matched_width`]).
pub fn train_postprocess(
    r_hat: &Volume,
    r_hq: &Volume,
    config: &TrainConfig,
    hidden_layers: usize,
    width: usize,
    pair_stride: usize,
) -> Result<(RegressorModel, TrainReport)> {
    if r_hat.dims() != r_hq.dims() {
        return Err(Error::validation(
            "train_postprocess: volume shapes differ".to_string(),
        ));
    }
    if pair_stride == 0 {
        return Err(Error::validation("pair_stride must be >= 1".to_string()));
    }
    let (nz, ny, nx) = r_hat.dims();
    let pairs: Vec<(Array3<f64>, Array3<f64>)> = (0..nz)
        .step_by(pair_stride)
        .map(|z| {
            let input = r_hat
                .data()
                .index_axis(ndarray::Axis(0), z)
                .to_owned()
                .insert_axis(ndarray::Axis(0));
            let target = r_hq
                .data()
                .index_axis(ndarray::Axis(0), z)
                .to_owned()
                .insert_axis(ndarray::Axis(0));
            (input, target)
        })
        .collect();
    let _ = (ny, nx);
    let mut model = RegressorModel::init(
        RegressorSpec {
            in_channels: 1,
            hidden_layers,
            hidden_width: width,
            residual: true,
        },
        config.seed ^ 0x5EED_00FF,
    )?;
    let report = train(&mut model, &pairs, config)?;
    Ok((model, report))
}

/// Applies the post-processing baseline slice by slice.
pub fn infer_postprocess(model: &RegressorModel, r_hat: &Volume) -> Result<Volume> {
    let (nz, ny, nx) = r_hat.dims();
    let mut out = Array3::zeros((nz, ny, nx));
    for z in 0..nz {
        let input = r_hat
            .data()
            .index_axis(ndarray::Axis(0), z)
            .to_owned()
            .insert_axis(ndarray::Axis(0));
        let y = predict(model, &input)?;
        out.index_axis_mut(ndarray::Axis(0), z)
            .assign(&y.index_axis(ndarray::Axis(0), 0));
    }
    Volume::new(out)
}

#[derive(Serialize, Deserialize)]
struct MultiStageHeader {
    version: u32,
    lq_angles: Vec<f64>,
    hq_angles: Vec<f64>,
    detector_rows: usize,
    detector_cols: usize,
    upsample_rows: usize,
}

/// Directory layout: `stage_p/`, `stage_s/`, `stage_r/` checkpoints plus
/// `multistage.json` with the geometry and angle sets.
pub fn save_multistage(model: &MultiStageModel, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    save_model(&model.f_p, &dir.join("stage_p").join("model.bin"))?;
    save_model(&model.f_s, &dir.join("stage_s").join("model.bin"))?;
    save_model(&model.f_r, &dir.join("stage_r").join("model.bin"))?;
    let header = MultiStageHeader {
        version: 1,
        lq_angles: model.lq_geometry.angles().to_vec(),
        hq_angles: model.hq_geometry.angles().to_vec(),
        detector_rows: model.lq_geometry.detector_rows(),
        detector_cols: model.lq_geometry.detector_cols(),
        upsample_rows: model.upsample_rows,
    };
    std::fs::write(
        dir.join("multistage.json"),
        serde_json::to_vec_pretty(&header)?,
    )?;
    Ok(())
}

pub fn load_multistage(dir: &Path) -> Result<MultiStageModel> {
    let header_path = dir.join("multistage.json");
    let bytes = std::fs::read(&header_path)
        .map_err(|e| Error::corrupt(format!("{}: {e}", header_path.display())))?;
    let header: MultiStageHeader = serde_json::from_slice(&bytes)
        .map_err(|e| Error::corrupt(format!("{}: {e}", header_path.display())))?;
    if header.version != 1 {
        return Err(Error::corrupt(format!(
            "multistage version {} unsupported",
            header.version
        )));
    }
    let f_p = load_model(&dir.join("stage_p").join("model.bin"))?;
    let f_s = load_model(&dir.join("stage_s").join("model.bin"))?;
    let f_r = load_model(&dir.join("stage_r").join("model.bin"))?;
    if f_p.spec().in_channels != 1 || f_s.spec().in_channels != 2 || f_r.spec().in_channels != 3 {
        return Err(Error::corrupt(
            "multistage stage models have wrong channel counts".to_string(),
        ));
    }
    Ok(MultiStageModel {
        f_p,
        f_s,
        f_r,
        lq_geometry: ParallelGeometry::from_angles(
            header.lq_angles,
            header.detector_rows,
            header.detector_cols,
        )?,
        hq_geometry: ParallelGeometry::from_angles(
            header.hq_angles,
            header.detector_rows,
            header.detector_cols,
        )?,
        upsample_rows: header.upsample_rows,
    })
}
