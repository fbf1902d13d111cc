//! Resolved command specs, execution, and run manifests.
//!
//! Every command reduces to a serializable [`RunSpec`]. Executing one
//! writes its outputs plus a manifest carrying the spec, the tool version
//! and the scene digest; `niv replay manifest.json` re-runs the spec and
//! reproduces the outputs byte for byte.

use std::path::{Path, PathBuf};

use glam::Vec3;
use serde::{Deserialize, Serialize};

use niv::dataset::{self, BakeParams, ParamSampler, SampleSet, TargetKind};
use niv::eval;
use niv::field::io::Precision;
use niv::field::train::{train, TrainConfig};
use niv::field::{self, ModelConfig, NeuralFieldModel, OutputActivation, TargetQuantity};
use niv::image_io;
use niv::probes::{self, ProbeBakeMode, ProbeProvider, QueryHeuristics};
use niv::render::gbuffer::rasterize_gbuffer;
use niv::render::shade::{shade_deferred, shade_sampled_incident};
use niv::render::{AoOptions, IrradianceProvider, ShadeComponents, ShadeOptions};
use niv::scene::camera::{Camera, CameraSpec};
use niv::scene::json::{InstanceDoc, MaterialDoc, MeshDoc, SceneDoc, TransformDoc};
use niv::scene::Scene;
use niv::tracer::{reference::reference_render, OracleProvider, TracerConfig};

use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum RunSpec {
    Bake(BakeSpec),
    Train(TrainSpec),
    BakeProbes(BakeProbesSpec),
    Render(RenderSpec),
    Eval(EvalSpec),
    SweepMemory(SweepMemorySpec),
    SweepHash(SweepHashSpec),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BakeSpec {
    pub scene: String,
    pub n: usize,
    pub surface_fraction: f32,
    pub spp: u32,
    pub max_depth: u32,
    pub seed: u64,
    pub culling: bool,
    /// "irradiance" or "radiance".
    pub quantity: String,
    /// Anchor values for the variable parameter; empty means continuous
    /// uniform sampling (when the scene declares parameters).
    pub param_anchors: Vec<f32>,
    pub out: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainSpec {
    pub dataset: String,
    pub width: u32,
    /// Hash-grid level count; `None` selects frequency encoding.
    pub levels: Option<u32>,
    pub freq_bands: u32,
    pub table_size_log2: Option<u32>,
    pub iterations: u32,
    pub batch_size: usize,
    pub warm_iterations: Option<u32>,
    pub seed: u64,
    pub precision: String,
    /// "irradiance" or "radiance"; must match how the dataset was baked.
    pub quantity: String,
    pub out: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BakeProbesSpec {
    pub scene: String,
    pub dims: Option<[u32; 3]>,
    pub budget_bytes: Option<usize>,
    pub spp: u32,
    pub seed: u64,
    pub rt_visibility: bool,
    pub cosine_falloff: bool,
    pub out: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RenderSpec {
    pub scene: String,
    /// Model/grid path, or "oracle".
    pub provider: String,
    pub width: u32,
    pub height: u32,
    pub seed: u64,
    pub half_res: bool,
    pub ao: bool,
    pub ao_rays: u32,
    pub specular_defer: bool,
    /// `name=value` pairs for variable scene parameters (raw scene units).
    pub params: Vec<String>,
    /// Dynamic object specs: `mesh.obj@(t=(x,y,z),s=scale,r=(ax,ay,az,deg))`.
    pub dynamic: Vec<String>,
    pub dynamic_albedo: [f32; 3],
    pub direct_spp: u32,
    pub oracle_spp: u32,
    /// Monte Carlo shading samples for incident-radiance models.
    pub incident_spp: u32,
    pub aov: bool,
    /// Render the path-traced reference instead of deferred shading.
    pub reference: bool,
    pub out: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalSpec {
    pub provider: String,
    pub evalset: String,
    /// Needed for oracle providers and ray-traced probe visibility.
    pub scene: Option<String>,
    pub oracle_spp: u32,
    pub out: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepMemorySpec {
    pub scene: String,
    pub budgets_mb: Vec<f64>,
    pub train_n: usize,
    pub eval_n: usize,
    pub spp: u32,
    pub probe_spp: u32,
    pub iterations: u32,
    pub batch_size: usize,
    pub seed: u64,
    pub timings: bool,
    pub plot_script: bool,
    pub out: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepHashSpec {
    pub scene: String,
    pub table_log2: Vec<u32>,
    pub levels: u32,
    pub width: u32,
    pub train_n: usize,
    pub eval_n: usize,
    pub spp: u32,
    pub iterations: u32,
    pub batch_size: usize,
    pub seeds: Vec<u64>,
    pub out: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub scene_sha256: Option<String>,
    pub outputs: Vec<String>,
    #[serde(flatten)]
    pub spec: RunSpec,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn load_scene_hashed(path: &str) -> Result<(Scene, [u8; 32]), CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::usage(format!("cannot read scene '{path}': {e}")))?;
    let hash = dataset::scene_digest(&bytes);
    let text = String::from_utf8(bytes)
        .map_err(|_| CliError::usage(format!("scene '{path}' is not UTF-8")))?;
    let base = Path::new(path).parent().unwrap_or(Path::new("."));
    let scene = niv::scene::json::scene_from_str(&text, base)?;
    Ok((scene, hash))
}

/// `mesh.obj@(t=(x,y,z),s=scale,r=(ax,ay,az,deg))`; everything after the
/// path is optional.
pub fn parse_dynamic_spec(spec: &str) -> Result<(String, TransformDoc), CliError> {
    let Some(at) = spec.find("@(") else {
        return Ok((spec.to_string(), TransformDoc::default()));
    };
    let path = spec[..at].to_string();
    let inner = spec[at + 2..]
        .strip_suffix(')')
        .ok_or_else(|| CliError::usage(format!("unclosed dynamic spec '{spec}'")))?;

    let mut doc = TransformDoc::default();
    let mut depth = 0usize;
    let mut start = 0usize;
    let mut fields = Vec::new();
    for (i, c) in inner.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            ',' if depth == 0 => {
                fields.push(&inner[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    fields.push(&inner[start..]);

    for field in fields {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("bad dynamic field '{field}'")))?;
        let nums = |v: &str| -> Result<Vec<f32>, CliError> {
            v.trim_matches(|c| c == '(' || c == ')')
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f32>()
                        .map_err(|_| CliError::usage(format!("bad number in '{field}'")))
                })
                .collect()
        };
        match key.trim() {
            "t" => {
                let v = nums(value)?;
                if v.len() != 3 {
                    return Err(CliError::usage("t=(x,y,z) needs 3 numbers".into()));
                }
                doc.translate = Some([v[0], v[1], v[2]]);
            }
            "s" => {
                doc.scale = Some(value.trim().parse().map_err(|_| {
                    CliError::usage(format!("bad scale '{value}'"))
                })?);
            }
            "r" => {
                let v = nums(value)?;
                if v.len() != 4 {
                    return Err(CliError::usage("r=(ax,ay,az,deg) needs 4 numbers".into()));
                }
                doc.rotate_axis_angle = Some([v[0], v[1], v[2], v[3]]);
            }
            other => {
                return Err(CliError::usage(format!("unknown dynamic field '{other}'")));
            }
        }
    }
    Ok((path, doc))
}

/// Loads the scene with extra dynamic instances appended.
fn load_scene_with_dynamics(
    scene_path: &str,
    dynamic: &[String],
    albedo: [f32; 3],
) -> Result<(Scene, [u8; 32]), CliError> {
    let bytes = std::fs::read(scene_path)
        .map_err(|e| CliError::usage(format!("cannot read scene '{scene_path}': {e}")))?;
    let hash = dataset::scene_digest(&bytes);
    let text = String::from_utf8_lossy(&bytes);
    let mut doc: SceneDoc = serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("scene parse error: {e}")))?;

    if !dynamic.is_empty() {
        doc.materials.push(MaterialDoc {
            id: "__dynamic".into(),
            albedo,
            emission: [0.0; 3],
            kind: niv::scene::MaterialKind::Diffuse,
        });
        for (i, spec) in dynamic.iter().enumerate() {
            let (path, transform) = parse_dynamic_spec(spec)?;
            let absolute = std::path::absolute(&path)
                .unwrap_or_else(|_| PathBuf::from(&path))
                .display()
                .to_string();
            let id = format!("__dynamic_{i}");
            doc.meshes.push(MeshDoc {
                id: id.clone(),
                obj_path: Some(absolute),
                primitive: None,
            });
            doc.instances.push(InstanceDoc {
                mesh: id,
                material: "__dynamic".into(),
                transform,
                dynamic: true,
            });
        }
    }
    let base = Path::new(scene_path).parent().unwrap_or(Path::new("."));
    let scene = niv::scene::json::build_scene(&doc, base)?;
    Ok((scene, hash))
}

pub enum LoadedProvider {
    Model(Box<NeuralFieldModel>),
    Probes(probes::ProbeGrid),
    Oracle(TracerConfig),
}

pub fn load_provider(spec: &str, oracle_spp: u32) -> Result<LoadedProvider, CliError> {
    LoadedProvider::load(spec, oracle_spp)
}

pub fn provider_view<'a>(
    loaded: &'a LoadedProvider,
    scene: Option<&'a Scene>,
) -> Result<Box<dyn IrradianceProvider + 'a>, CliError> {
    loaded.as_provider(scene)
}

pub fn load_scene_for_throughput(path: &str) -> Result<Scene, CliError> {
    Ok(load_scene_hashed(path)?.0)
}

impl LoadedProvider {
    fn load(spec: &str, oracle_spp: u32) -> Result<LoadedProvider, CliError> {
        if spec == "oracle" {
            return Ok(LoadedProvider::Oracle(TracerConfig::with_spp(oracle_spp)));
        }
        let path = Path::new(spec);
        match path.extension().and_then(|e| e.to_str()) {
            Some("nivm") => {
                let (model, _) = field::io::load_model(path)?;
                Ok(LoadedProvider::Model(Box::new(model)))
            }
            Some("nivp") => Ok(LoadedProvider::Probes(probes::io::load_grid(path)?)),
            _ => Err(CliError::usage(format!(
                "provider '{spec}' must be a .nivm model, a .nivp grid, or 'oracle'"
            ))),
        }
    }

    fn as_provider<'a>(&'a self, scene: Option<&'a Scene>) -> Result<Box<dyn IrradianceProvider + 'a>, CliError> {
        match self {
            LoadedProvider::Model(m) => Ok(Box::new(ModelRef(m))),
            LoadedProvider::Probes(grid) => {
                if grid.heuristics.rt_visibility && scene.is_none() {
                    return Err(CliError::usage(
                        "this probe grid uses ray-traced visibility; pass --scene".into(),
                    ));
                }
                Ok(Box::new(ProbeProvider {
                    grid,
                    scene: if grid.heuristics.rt_visibility { scene } else { None },
                }))
            }
            LoadedProvider::Oracle(cfg) => {
                let scene = scene.ok_or_else(|| {
                    CliError::usage("provider 'oracle' requires --scene".into())
                })?;
                Ok(Box::new(OracleProvider { scene, cfg: *cfg }))
            }
        }
    }

    fn payload_bytes(&self) -> Option<usize> {
        match self {
            LoadedProvider::Model(m) => Some(m.memory_bytes(Precision::F16)),
            LoadedProvider::Probes(g) => Some(g.memory_bytes()),
            LoadedProvider::Oracle(_) => None,
        }
    }

    fn forbidden_seeds(&self) -> Vec<u64> {
        match self {
            LoadedProvider::Model(m) => vec![m.data_seed, m.train_seed],
            _ => vec![],
        }
    }
}

/// Borrow adapter so a boxed model can stand behind the provider trait.
struct ModelRef<'a>(&'a NeuralFieldModel);

impl IrradianceProvider for ModelRef<'_> {
    fn irradiance(
        &self,
        position: Vec3,
        n: Vec3,
        params: &[f32],
        rng: &mut rand_chacha::ChaCha8Rng,
    ) -> niv::Rgb {
        self.0.irradiance(position, n, params, rng)
    }

    fn param_count(&self) -> usize {
        self.0.config.param_count as usize
    }

    fn label(&self) -> &'static str {
        "niv"
    }
}

pub struct RunOutcome {
    pub outputs: Vec<PathBuf>,
    /// Human-readable result lines printed after the run.
    pub notes: Vec<String>,
}

/// Executes a spec, writing outputs and the manifest into `out_dir`.
pub fn execute(spec: &RunSpec, out_dir: &Path) -> Result<RunOutcome, CliError> {
    std::fs::create_dir_all(out_dir).map_err(|e| {
        CliError::usage(format!("cannot create output dir {}: {e}", out_dir.display()))
    })?;
    let mut scene_hash = None;
    let mut outputs = Vec::new();
    let mut notes = Vec::new();

    match spec {
        RunSpec::Bake(s) => {
            let (scene, hash) = load_scene_hashed(&s.scene)?;
            scene_hash = Some(hash);
            let sampler = if scene.variable_params.is_empty() {
                ParamSampler::None
            } else if s.param_anchors.is_empty() {
                ParamSampler::Uniform(scene.variable_params.len())
            } else {
                ParamSampler::Anchors(s.param_anchors.clone())
            };
            let params = BakeParams {
                n_samples: s.n,
                surface_fraction: s.surface_fraction,
                cfg: TracerConfig {
                    spp: s.spp,
                    max_depth: s.max_depth,
                    ..TracerConfig::default()
                },
                culling: s.culling,
                params: sampler,
                target: parse_quantity(&s.quantity)?,
                seed: s.seed,
            };
            let set = dataset::bake_dataset(&scene, hash, &params)?;
            let out = out_dir.join(&s.out);
            dataset::save_sampleset(&set, &out)?;
            notes.push(format!(
                "baked {} samples ({} on surfaces) at {} spp",
                set.samples.len(),
                set.surface_count(),
                set.spp_used
            ));
            outputs.push(out);
        }

        RunSpec::Train(s) => {
            let set = dataset::load_sampleset(Path::new(&s.dataset))?;
            let mut config = model_config_from_spec(s, &set)?;
            config.target_quantity = match parse_quantity(&s.quantity)? {
                TargetKind::Irradiance => TargetQuantity::Irradiance,
                TargetKind::IncidentRadiance => TargetQuantity::IncidentRadiance,
            };
            // The bake normalized positions by the scene bounds already, so
            // the model-side mapping is the identity on the unit cube.
            let bbox = niv::scene::Aabb {
                min: Vec3::ZERO,
                max: Vec3::ONE,
            };
            let mut model = NeuralFieldModel::new(config, bbox, s.seed)?;
            let cfg = TrainConfig {
                batch_size: s.batch_size,
                iterations: s.iterations,
                warm_iterations: s.warm_iterations.unwrap_or(s.iterations / 5),
                seed: s.seed,
                ..TrainConfig::default()
            };
            let report = match train(&mut model, &set, &cfg, None) {
                Ok(r) => r,
                Err(e @ field::FieldError::NonFiniteLoss { .. }) => {
                    // Keep the last finite parameters around for inspection.
                    let ckpt = out_dir.join(format!("{}.checkpoint", s.out));
                    let precision = parse_precision(&s.precision)?;
                    field::io::save_model(&model, precision, &ckpt).ok();
                    return Err(e.into());
                }
                Err(e) => return Err(e.into()),
            };
            let precision = parse_precision(&s.precision)?;
            let out = out_dir.join(&s.out);
            field::io::save_model(&model, precision, &out)?;
            let loss_csv = out_dir.join(format!("{}.loss.csv", s.out));
            std::fs::write(&loss_csv, report.trace_csv()).map_err(|e| {
                CliError::usage(format!("cannot write {}: {e}", loss_csv.display()))
            })?;
            notes.push(format!(
                "trained {} parameters to loss {:.3e}; payload {} bytes ({})",
                model.params.len(),
                report.final_loss,
                model.memory_bytes(precision),
                s.precision,
            ));
            outputs.push(out);
            outputs.push(loss_csv);
        }

        RunSpec::BakeProbes(s) => {
            let (scene, hash) = load_scene_hashed(&s.scene)?;
            scene_hash = Some(hash);
            let dims = match (s.dims, s.budget_bytes) {
                (Some(d), None) => d,
                (None, Some(b)) => probes::cubic_dims_for_budget(b),
                _ => {
                    return Err(CliError::usage(
                        "pass exactly one of --dims or --budget".into(),
                    ))
                }
            };
            let heuristics = QueryHeuristics {
                cosine_falloff: s.cosine_falloff,
                rt_visibility: s.rt_visibility,
                ..Default::default()
            };
            let (grid, report) = probes::bake_grid(
                &scene,
                dims,
                s.spp,
                s.seed,
                heuristics,
                ProbeBakeMode::RadianceConvolve,
            );
            let out = out_dir.join(&s.out);
            probes::io::save_grid(&grid, &out)?;
            notes.push(format!(
                "baked {}x{}x{} probes, payload {} bytes, {} probes inside geometry",
                dims[0],
                dims[1],
                dims[2],
                grid.memory_bytes(),
                report.inside_geometry.len()
            ));
            outputs.push(out);
        }

        RunSpec::Render(s) => {
            let (scene, hash) =
                load_scene_with_dynamics(&s.scene, &s.dynamic, s.dynamic_albedo)?;
            scene_hash = Some(hash);
            let camera_spec: CameraSpec = scene.camera.ok_or_else(|| {
                CliError::usage(format!("scene '{}' has no camera", s.scene))
            })?;
            let camera = Camera::new(&camera_spec);

            let stem = s.out.clone();
            let pfm = out_dir.join(format!("{stem}.pfm"));
            let png = out_dir.join(format!("{stem}.png"));

            let frame = if s.reference {
                reference_render(
                    &scene,
                    &camera,
                    s.width,
                    s.height,
                    s.oracle_spp,
                    s.seed,
                    &resolve_params(&scene, &s.params, usize::MAX)?,
                )
            } else {
                let loaded = LoadedProvider::load(&s.provider, s.oracle_spp)?;
                let provider = loaded.as_provider(Some(&scene))?;
                let param_values = resolve_params(&scene, &s.params, provider.param_count())?;
                let gbuffer = rasterize_gbuffer(&scene, &camera, s.width, s.height);
                let options = ShadeOptions {
                    seed: s.seed,
                    direct_spp: s.direct_spp,
                    half_resolution: s.half_res,
                    dynamic_ao: AoOptions {
                        enabled: s.ao,
                        ray_count: s.ao_rays,
                        ..Default::default()
                    },
                    specular_defer: s.specular_defer,
                    param_values,
                    components: ShadeComponents::default(),
                };
                let incident_model = matches!(
                    &loaded,
                    LoadedProvider::Model(m)
                        if m.config.target_quantity == TargetQuantity::IncidentRadiance
                );
                let frame = if incident_model {
                    shade_sampled_incident(&gbuffer, &scene, provider.as_ref(), s.incident_spp, &options)?
                } else {
                    shade_deferred(&gbuffer, &scene, provider.as_ref(), &options)?
                };
                if s.aov {
                    write_aovs(&gbuffer, &scene, provider.as_ref(), &options, out_dir, &stem, &mut outputs)?;
                }
                frame
            };
            image_io::tonemap_write(&frame, &pfm, &png)?;
            notes.push(format!("rendered {}x{} to {stem}.pfm/.png", s.width, s.height));
            outputs.push(pfm);
            outputs.push(png);
        }

        RunSpec::Eval(s) => {
            let eval_set = dataset::load_sampleset(Path::new(&s.evalset))?;
            let scene = match &s.scene {
                Some(path) => {
                    let (scene, hash) = load_scene_hashed(path)?;
                    scene_hash = Some(hash);
                    Some(scene)
                }
                None => None,
            };
            let loaded = LoadedProvider::load(&s.provider, s.oracle_spp)?;
            let provider = loaded.as_provider(scene.as_ref())?;
            let mse = eval::volumetric_mse(provider.as_ref(), &eval_set, &loaded.forbidden_seeds())?;
            let bytes = loaded.payload_bytes();
            let csv = format!(
                "provider,memory_bytes,volume_mse,surface_mse,eval_seed\n{},{},{},{},{}\n",
                provider.label(),
                bytes.map(|b| b.to_string()).unwrap_or_else(|| "n/a".into()),
                mse.volume,
                mse.surface,
                eval_set.seed
            );
            let out = out_dir.join(&s.out);
            std::fs::write(&out, csv)
                .map_err(|e| CliError::usage(format!("cannot write {}: {e}", out.display())))?;
            notes.push(format!(
                "volume MSE {:.6e}, surface MSE {:.6e}",
                mse.volume, mse.surface
            ));
            outputs.push(out);
        }

        RunSpec::SweepMemory(s) => {
            let (scene, hash) = load_scene_hashed(&s.scene)?;
            scene_hash = Some(hash);
            let (train_set, eval_set) = sweep_datasets(&scene, hash, s.train_n, s.eval_n, s.spp, s.seed)?;
            let budgets: Vec<usize> = s.budgets_mb.iter().map(|mb| (mb * 1e6) as usize).collect();
            let cfg = TrainConfig {
                batch_size: s.batch_size,
                iterations: s.iterations,
                warm_iterations: s.iterations / 5,
                seed: s.seed,
                ..TrainConfig::default()
            };
            let points = eval::sweep_memory_error(
                &scene, &train_set, &eval_set, &budgets, &cfg, s.probe_spp, s.timings,
            )?;
            let out = out_dir.join(&s.out);
            std::fs::write(&out, eval::sweep_csv(&points))
                .map_err(|e| CliError::usage(format!("cannot write {}: {e}", out.display())))?;
            notes.push(format!("{} sweep rows", points.len()));
            outputs.push(out);
            if s.plot_script {
                let gp = out_dir.join(format!("{}.gp", s.out));
                std::fs::write(&gp, eval::gnuplot_script(&s.out))
                    .map_err(|e| CliError::usage(format!("cannot write {}: {e}", gp.display())))?;
                outputs.push(gp);
            }
        }

        RunSpec::SweepHash(s) => {
            let (scene, hash) = load_scene_hashed(&s.scene)?;
            scene_hash = Some(hash);
            let (train_set, eval_set) =
                sweep_datasets(&scene, hash, s.train_n, s.eval_n, s.spp, s.seeds[0])?;
            let mut points = Vec::new();
            for &seed in &s.seeds {
                let cfg = TrainConfig {
                    batch_size: s.batch_size,
                    iterations: s.iterations,
                    warm_iterations: s.iterations / 5,
                    seed,
                    ..TrainConfig::default()
                };
                points.extend(eval::sweep_hash_table(
                    &scene,
                    &train_set,
                    &eval_set,
                    &s.table_log2,
                    s.levels,
                    s.width,
                    &cfg,
                )?);
            }
            let out = out_dir.join(&s.out);
            std::fs::write(&out, eval::sweep_csv(&points))
                .map_err(|e| CliError::usage(format!("cannot write {}: {e}", out.display())))?;
            notes.push(format!("{} sweep rows", points.len()));
            outputs.push(out);
        }
    }

    // The manifest sits next to the first output, named after it.
    let first = outputs
        .first()
        .ok_or_else(|| CliError::usage("command produced no outputs".into()))?;
    let manifest_path = out_dir.join(format!(
        "{}.manifest.json",
        first.file_name().unwrap().to_string_lossy()
    ));
    let manifest = Manifest {
        tool_version: niv::VERSION.to_string(),
        scene_sha256: scene_hash.map(|h| hex(&h)),
        outputs: outputs
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect(),
        spec: spec.clone(),
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&manifest_path, json).map_err(|e| {
        CliError::usage(format!("cannot write {}: {e}", manifest_path.display()))
    })?;
    let mut outputs = outputs;
    outputs.push(manifest_path);
    Ok(RunOutcome { outputs, notes })
}

fn sweep_datasets(
    scene: &Scene,
    hash: [u8; 32],
    train_n: usize,
    eval_n: usize,
    spp: u32,
    seed: u64,
) -> Result<(SampleSet, SampleSet), CliError> {
    let mut bake = BakeParams::new(train_n, seed);
    bake.cfg.spp = spp;
    if !scene.variable_params.is_empty() {
        bake.params = ParamSampler::Uniform(scene.variable_params.len());
    }
    let train_set = dataset::bake_dataset(scene, hash, &bake)?;
    // Held-out eval set: disjoint seed, 4x the sampling effort.
    let mut eval_bake = bake.clone();
    eval_bake.n_samples = eval_n;
    eval_bake.seed = seed.wrapping_add(0x9e37_79b9);
    eval_bake.cfg.spp = spp * 4;
    let eval_set = dataset::bake_dataset(scene, hash, &eval_bake)?;
    Ok((train_set, eval_set))
}

fn parse_quantity(q: &str) -> Result<TargetKind, CliError> {
    match q {
        "irradiance" => Ok(TargetKind::Irradiance),
        "radiance" => Ok(TargetKind::IncidentRadiance),
        other => Err(CliError::usage(format!(
            "quantity must be 'irradiance' or 'radiance', got '{other}'"
        ))),
    }
}

fn parse_precision(p: &str) -> Result<Precision, CliError> {
    Precision::parse(p)
        .ok_or_else(|| CliError::usage(format!("precision must be f32 or f16, got '{p}'")))
}

fn model_config_from_spec(s: &TrainSpec, set: &SampleSet) -> Result<ModelConfig, CliError> {
    let param_count = set.n_extra_params;
    let mut config = match s.levels {
        Some(levels) => {
            // Variable-parameter models default to a doubled table.
            let log2 = s
                .table_size_log2
                .unwrap_or(if param_count > 0 { 18 } else { 17 });
            ModelConfig::hash(levels, log2, s.width)
        }
        None => ModelConfig::frequency(s.freq_bands, s.width),
    };
    config.param_count = param_count;
    config.output_activation = OutputActivation::Softplus;
    Ok(config)
}

/// Maps `name=value` pairs (raw scene units) onto the provider's expected
/// parameter vector, normalized to [0,1] by the scene's declared ranges.
/// Errors name unknown, surplus and missing parameters.
fn resolve_params(
    scene: &Scene,
    pairs: &[String],
    expected: usize,
) -> Result<Vec<f32>, CliError> {
    let expected = if expected == usize::MAX {
        scene.variable_params.len()
    } else {
        expected
    };
    let mut values: Vec<Option<f32>> = vec![None; scene.variable_params.len()];
    for pair in pairs {
        let (name, value) = pair
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("--param needs name=value, got '{pair}'")))?;
        let idx = scene
            .variable_params
            .iter()
            .position(|p| p.name == name)
            .ok_or_else(|| {
                CliError::usage(format!("scene declares no parameter named '{name}'"))
            })?;
        let raw: f32 = value
            .parse()
            .map_err(|_| CliError::usage(format!("bad value for parameter '{name}'")))?;
        let p = &scene.variable_params[idx];
        let span = p.max - p.min;
        values[idx] = Some(if span.abs() < 1e-12 {
            0.0
        } else {
            ((raw - p.min) / span).clamp(0.0, 1.0)
        });
    }
    if pairs.len() > expected {
        return Err(CliError::usage(format!(
            "provider expects {expected} parameter value(s) but {} were given",
            pairs.len()
        )));
    }
    let mut out = Vec::with_capacity(expected);
    for i in 0..expected {
        match (values.get(i).copied().flatten(), scene.variable_params.get(i)) {
            (Some(v), _) => out.push(v),
            (None, Some(p)) => {
                return Err(CliError::usage(format!(
                    "missing value for parameter '{}' (pass --param {}=<value>)",
                    p.name, p.name
                )))
            }
            (None, None) => {
                return Err(CliError::usage(format!(
                    "provider expects {expected} parameter value(s) but the scene declares {}",
                    scene.variable_params.len()
                )))
            }
        }
    }
    Ok(out)
}

fn write_aovs(
    gbuffer: &niv::render::gbuffer::GBuffer,
    scene: &Scene,
    provider: &dyn IrradianceProvider,
    options: &ShadeOptions,
    out_dir: &Path,
    stem: &str,
    outputs: &mut Vec<PathBuf>,
) -> Result<(), CliError> {
    for (suffix, components) in [
        ("indirect", ShadeComponents { indirect: true, direct: false, emission: false }),
        ("direct", ShadeComponents { indirect: false, direct: true, emission: false }),
        ("emission", ShadeComponents { indirect: false, direct: false, emission: true }),
    ] {
        let opts = ShadeOptions {
            components,
            ..options.clone()
        };
        let frame = shade_deferred(gbuffer, scene, provider, &opts)?;
        let path = out_dir.join(format!("{stem}.{suffix}.pfm"));
        image_io::write_pfm(&frame, &path)?;
        outputs.push(path);
    }
    Ok(())
}

/// Re-runs a manifest; outputs land in `out_dir` (or the manifest's own
/// directory) and must reproduce the original run byte for byte.
pub fn replay(manifest_path: &Path, out_dir: Option<&Path>) -> Result<RunOutcome, CliError> {
    let text = std::fs::read_to_string(manifest_path).map_err(|e| {
        CliError::usage(format!("cannot read manifest {}: {e}", manifest_path.display()))
    })?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("bad manifest: {e}")))?;
    let dir = out_dir
        .map(Path::to_path_buf)
        .or_else(|| manifest_path.parent().map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from("."));
    execute(&manifest.spec, &dir)
}
