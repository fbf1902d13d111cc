//! `niv`: bake, train, probe, render and evaluate irradiance volumes.

mod error;
mod run;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use error::CliError;
use run::{
    BakeProbesSpec, BakeSpec, EvalSpec, RenderSpec, RunSpec, SweepHashSpec, SweepMemorySpec,
    TrainSpec,
};

#[derive(Parser)]
#[command(
    name = "niv",
    version,
    about = "Bakes path-traced indirect irradiance into a neural field or an SH probe grid and renders diffuse global illumination from a G-buffer.",
    after_help = "Exit codes: 0 success, 2 usage or input error, 3 numerical failure."
)]
struct Cli {
    /// Worker thread cap (default: all cores, or NIV_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory outputs are written into.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Path-trace a training/eval dataset of irradiance samples (NIVD).
    Bake(BakeArgs),
    /// Train a neural irradiance field on a baked dataset (NIVM).
    Train(TrainArgs),
    /// Bake a spherical-harmonics probe grid (NIVP).
    BakeProbes(BakeProbesArgs),
    /// Shade a frame from a G-buffer using a model, probe grid or the
    /// Monte Carlo oracle; writes PFM + PNG.
    Render(RenderArgs),
    /// Volumetric MSE of a provider against a held-out dataset.
    Eval(EvalArgs),
    /// Sweep experiments producing CSV files.
    #[command(subcommand)]
    Sweep(SweepCommand),
    /// Write a bundled procedural scene (or `sphere-obj` test mesh).
    Fixture {
        /// One of: cornell, cornell-empty, leak-room, floor-env, box-plate,
        /// solid-box, sunroom, sphere-obj.
        name: String,
        #[arg(short, long)]
        out: String,
    },
    /// Re-run a recorded manifest; outputs reproduce byte-identically.
    Replay {
        manifest: PathBuf,
    },
    /// Measure a provider's batched query rate (informational only).
    Throughput {
        #[arg(long)]
        provider: String,
        #[arg(long)]
        scene: Option<String>,
        #[arg(long, default_value_t = 1_000_000)]
        n: usize,
        #[arg(long, default_value_t = 64)]
        oracle_spp: u32,
    },
}

#[derive(Args)]
struct BakeArgs {
    scene: String,
    #[arg(long, default_value_t = 65536)]
    n: usize,
    #[arg(long, default_value_t = 0.2)]
    surface_fraction: f32,
    #[arg(long, default_value_t = 64)]
    spp: u32,
    #[arg(long, default_value_t = 8)]
    max_depth: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Disable backface-majority culling of volume samples.
    #[arg(long)]
    no_culling: bool,
    /// Bake targets: pre-integrated "irradiance" or incident "radiance".
    #[arg(long, default_value = "irradiance")]
    quantity: String,
    /// Restrict variable-parameter sampling to fixed anchor values.
    #[arg(long, value_delimiter = ',')]
    param_anchors: Vec<f32>,
    #[arg(short, long, default_value = "dataset.nivd")]
    out: String,
}

#[derive(Args)]
struct TrainArgs {
    dataset: String,
    #[arg(long, default_value_t = 64)]
    width: u32,
    /// Hash-grid levels (2..=8); omit to use frequency encoding.
    #[arg(long)]
    levels: Option<u32>,
    /// Frequency bands when no hash grid is used.
    #[arg(long, default_value_t = 8)]
    freq: u32,
    /// log2 of the hash table size (default 17; 18 with variable params).
    #[arg(long)]
    table_size_log2: Option<u32>,
    #[arg(long, default_value_t = 50_000)]
    iterations: u32,
    #[arg(long, default_value_t = 65_536)]
    batch_size: usize,
    #[arg(long)]
    warm_iterations: Option<u32>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Stored parameter precision: f16 (published sizes) or f32.
    #[arg(long, default_value = "f16")]
    precision: String,
    #[arg(long, default_value = "irradiance")]
    quantity: String,
    #[arg(short, long, default_value = "model.nivm")]
    out: String,
}

#[derive(Args)]
struct BakeProbesArgs {
    scene: String,
    /// Grid dimensions, e.g. --dims 8 8 8.
    #[arg(long, num_args = 3)]
    dims: Option<Vec<u32>>,
    /// Byte budget; picks the largest cubic grid that fits.
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long, default_value_t = 4096)]
    spp: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Zero out probes occluded from the shading point (shadow rays).
    #[arg(long)]
    rt_visibility: bool,
    /// Disable the cosine fall-off heuristic.
    #[arg(long)]
    no_cosine_falloff: bool,
    #[arg(short, long, default_value = "probes.nivp")]
    out: String,
}

#[derive(Args)]
struct RenderArgs {
    scene: String,
    /// .nivm model, .nivp probe grid, or "oracle".
    #[arg(long)]
    provider: String,
    #[arg(long, default_value_t = 256)]
    width: u32,
    #[arg(long, default_value_t = 256)]
    height: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Query the provider at quarter pixel count and upsample.
    #[arg(long)]
    half_res: bool,
    /// Dynamic-geometry ambient occlusion on the indirect term.
    #[arg(long)]
    ao: bool,
    #[arg(long, default_value_t = 32)]
    ao_rays: u32,
    /// Follow mirror pixels to their first diffuse hit.
    #[arg(long)]
    specular_defer: bool,
    /// Variable parameter values, e.g. --param sun_angle=0.3 (scene units).
    #[arg(long = "param")]
    params: Vec<String>,
    /// Inject a dynamic object: mesh.obj@(t=(x,y,z),s=0.5,r=(0,1,0,45)).
    #[arg(long = "dynamic")]
    dynamic: Vec<String>,
    #[arg(long, num_args = 3, default_values_t = [0.7, 0.7, 0.7])]
    dynamic_albedo: Vec<f32>,
    /// Shadow-ray samples per pixel for stochastic direct light.
    #[arg(long, default_value_t = 16)]
    direct_spp: u32,
    /// Hemisphere samples per estimate when the provider is the oracle.
    #[arg(long, default_value_t = 256)]
    oracle_spp: u32,
    /// Per-pixel samples when shading an incident-radiance model.
    #[arg(long, default_value_t = 64)]
    incident_spp: u32,
    /// Also dump per-term PFMs (indirect, direct, emission).
    #[arg(long)]
    aov: bool,
    /// Path-trace the full reference instead of deferred shading.
    #[arg(long)]
    reference: bool,
    #[arg(short, long, default_value = "frame")]
    out: String,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    provider: String,
    #[arg(long)]
    evalset: String,
    #[arg(long)]
    scene: Option<String>,
    #[arg(long, default_value_t = 256)]
    oracle_spp: u32,
    #[arg(short, long, default_value = "eval.csv")]
    out: String,
}

#[derive(Subcommand)]
enum SweepCommand {
    /// Memory-error trade-off: NIV vs probe grids at matched budgets.
    Memory(SweepMemoryArgs),
    /// Reconstruction error across hash-table sizes at fixed levels.
    Hash(SweepHashArgs),
}

#[derive(Args)]
struct SweepMemoryArgs {
    scene: String,
    /// Budgets in MB, e.g. --budgets 0.01,0.05,0.2
    #[arg(long, value_delimiter = ',', required = true)]
    budgets: Vec<f64>,
    #[arg(long, default_value_t = 16384)]
    train_n: usize,
    #[arg(long, default_value_t = 4096)]
    eval_n: usize,
    #[arg(long, default_value_t = 32)]
    spp: u32,
    #[arg(long, default_value_t = 4096)]
    probe_spp: u32,
    #[arg(long, default_value_t = 8000)]
    iterations: u32,
    #[arg(long, default_value_t = 16384)]
    batch_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Record wall-clock seconds in the CSV (breaks byte reproducibility).
    #[arg(long)]
    timings: bool,
    /// Also emit a gnuplot script next to the CSV.
    #[arg(long)]
    plot_script: bool,
    #[arg(short, long, default_value = "sweep_memory.csv")]
    out: String,
}

#[derive(Args)]
struct SweepHashArgs {
    scene: String,
    /// log2 table sizes, e.g. --table-log2 10,12,14,17
    #[arg(long, value_delimiter = ',', required = true)]
    table_log2: Vec<u32>,
    #[arg(long, default_value_t = 8)]
    levels: u32,
    #[arg(long, default_value_t = 64)]
    width: u32,
    #[arg(long, default_value_t = 16384)]
    train_n: usize,
    #[arg(long, default_value_t = 4096)]
    eval_n: usize,
    #[arg(long, default_value_t = 32)]
    spp: u32,
    #[arg(long, default_value_t = 3000)]
    iterations: u32,
    #[arg(long, default_value_t = 8192)]
    batch_size: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [1u64])]
    seeds: Vec<u64>,
    #[arg(short, long, default_value = "sweep_hash.csv")]
    out: String,
}

fn main() {
    let cli = Cli::parse();
    let threads = cli
        .threads
        .or_else(|| std::env::var("NIV_THREADS").ok().and_then(|v| v.parse().ok()));
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .ok();
    }
    match dispatch(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code);
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let spec = match cli.command {
        Command::Fixture { name, out } => {
            let content = if name == "sphere-obj" {
                Some(niv::scene::fixtures::sphere_obj())
            } else {
                niv::scene::fixtures::fixture_json(&name)
            };
            let content = content.ok_or_else(|| {
                CliError::usage(format!(
                    "unknown fixture '{name}'; available: {}, sphere-obj",
                    niv::scene::fixtures::FIXTURE_NAMES.join(", ")
                ))
            })?;
            let path = cli.out_dir.join(&out);
            std::fs::write(&path, content)
                .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))?;
            println!("wrote {}", path.display());
            return Ok(());
        }
        Command::Replay { manifest } => {
            let outcome = run::replay(&manifest, Some(cli.out_dir.as_path()))?;
            for note in &outcome.notes {
                println!("{note}");
            }
            for path in &outcome.outputs {
                println!("wrote {}", path.display());
            }
            return Ok(());
        }
        Command::Throughput {
            provider,
            scene,
            n,
            oracle_spp,
        } => {
            run_throughput(&provider, scene.as_deref(), n, oracle_spp)?;
            return Ok(());
        }
        Command::Bake(a) => RunSpec::Bake(BakeSpec {
            scene: a.scene,
            n: a.n,
            surface_fraction: a.surface_fraction,
            spp: a.spp,
            max_depth: a.max_depth,
            seed: a.seed,
            culling: !a.no_culling,
            quantity: a.quantity,
            param_anchors: a.param_anchors,
            out: a.out,
        }),
        Command::Train(a) => RunSpec::Train(TrainSpec {
            dataset: a.dataset,
            width: a.width,
            levels: a.levels,
            freq_bands: a.freq,
            table_size_log2: a.table_size_log2,
            iterations: a.iterations,
            batch_size: a.batch_size,
            warm_iterations: a.warm_iterations,
            seed: a.seed,
            precision: a.precision,
            quantity: a.quantity,
            out: a.out,
        }),
        Command::BakeProbes(a) => RunSpec::BakeProbes(BakeProbesSpec {
            scene: a.scene,
            dims: a.dims.map(|d| [d[0], d[1], d[2]]),
            budget_bytes: a.budget,
            spp: a.spp,
            seed: a.seed,
            rt_visibility: a.rt_visibility,
            cosine_falloff: !a.no_cosine_falloff,
            out: a.out,
        }),
        Command::Render(a) => RunSpec::Render(RenderSpec {
            scene: a.scene,
            provider: a.provider,
            width: a.width,
            height: a.height,
            seed: a.seed,
            half_res: a.half_res,
            ao: a.ao,
            ao_rays: a.ao_rays,
            specular_defer: a.specular_defer,
            params: a.params,
            dynamic: a.dynamic,
            dynamic_albedo: [a.dynamic_albedo[0], a.dynamic_albedo[1], a.dynamic_albedo[2]],
            direct_spp: a.direct_spp,
            oracle_spp: a.oracle_spp,
            incident_spp: a.incident_spp,
            aov: a.aov,
            reference: a.reference,
            out: a.out,
        }),
        Command::Eval(a) => RunSpec::Eval(EvalSpec {
            provider: a.provider,
            evalset: a.evalset,
            scene: a.scene,
            oracle_spp: a.oracle_spp,
            out: a.out,
        }),
        Command::Sweep(SweepCommand::Memory(a)) => RunSpec::SweepMemory(SweepMemorySpec {
            scene: a.scene,
            budgets_mb: a.budgets,
            train_n: a.train_n,
            eval_n: a.eval_n,
            spp: a.spp,
            probe_spp: a.probe_spp,
            iterations: a.iterations,
            batch_size: a.batch_size,
            seed: a.seed,
            timings: a.timings,
            plot_script: a.plot_script,
            out: a.out,
        }),
        Command::Sweep(SweepCommand::Hash(a)) => RunSpec::SweepHash(SweepHashSpec {
            scene: a.scene,
            table_log2: a.table_log2,
            levels: a.levels,
            width: a.width,
            train_n: a.train_n,
            eval_n: a.eval_n,
            spp: a.spp,
            iterations: a.iterations,
            batch_size: a.batch_size,
            seeds: a.seeds,
            out: a.out,
        }),
    };

    let outcome = run::execute(&spec, &cli.out_dir)?;
    for note in &outcome.notes {
        println!("{note}");
    }
    for path in &outcome.outputs {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn run_throughput(
    provider_spec: &str,
    scene_path: Option<&str>,
    n: usize,
    oracle_spp: u32,
) -> Result<(), CliError> {
    let scene = match scene_path {
        Some(p) => Some(run::load_scene_for_throughput(p)?),
        None => None,
    };
    let loaded = run::load_provider(provider_spec, oracle_spp)?;
    let provider = run::provider_view(&loaded, scene.as_ref())?;
    match niv::eval::throughput_report(provider.as_ref(), n) {
        Some(rate) => println!(
            "{}: {:.0} queries/s over {n} queries",
            provider.label(),
            rate
        ),
        None => println!("throughput: n/a (0 queries)"),
    }
    Ok(())
}
