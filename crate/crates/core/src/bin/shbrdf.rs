use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use shbrdf::commands::{
    cmd_bench, cmd_entropy, cmd_fit, cmd_merge, cmd_rerun, cmd_synth, BenchSuite, FitArgs, SceneInputs, SynthOptions,
    SynthPreset,
};
use shbrdf::config::ConfigFile;
use shbrdf::manifest::RunManifest;

#[derive(Parser)]
#[command(name = "shbrdf", version, about = "BRDF textures and per-texel entropy from multi-view HDR captures")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit base color, metallic and roughness textures plus an entropy map.
    Fit {
        #[command(flatten)]
        scene: SceneFlags,
        #[command(flatten)]
        config: ConfigFlags,
        /// Export the grid estimate without the optimization stage.
        #[arg(long)]
        spectrum_only: bool,
        /// Ground-truth texture directory for an MSE report.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Entropy and validity maps only.
    Entropy {
        #[command(flatten)]
        scene: SceneFlags,
        #[command(flatten)]
        config: ConfigFlags,
        /// Cells per axis of the posterior grid.
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Write a deterministic synthetic bundle.
    Synth {
        /// sphere-4env, figure3, figure5 or viewsweep.
        #[arg(long)]
        preset: SynthPreset,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long)]
        views: Option<usize>,
        #[arg(long)]
        image_size: Option<usize>,
        /// Render by hemisphere quadrature instead of the fitted model.
        #[arg(long)]
        quadrature: bool,
        /// Relative Gaussian pixel noise.
        #[arg(long)]
        noise: Option<f64>,
    },
    /// Merge fitted runs per texel by lowest entropy.
    Merge {
        #[arg(long, num_args = 2.., required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print a JSON timing and accuracy report.
    Bench {
        /// spectra, entropy or endtoend.
        #[arg(long)]
        suite: BenchSuite,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Repeat the run recorded in a manifest.
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct SceneFlags {
    /// Equirectangular HDR environment (.exr).
    #[arg(long)]
    env: PathBuf,
    /// Triangle mesh with UVs (.obj).
    #[arg(long)]
    mesh: PathBuf,
    /// Camera file (.json).
    #[arg(long)]
    cameras: PathBuf,
    /// Image directory; defaults to the camera file's directory.
    #[arg(long)]
    images: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

impl SceneFlags {
    fn inputs(&self) -> SceneInputs {
        SceneInputs {
            env: self.env.clone(),
            mesh: self.mesh.clone(),
            cameras: self.cameras.clone(),
            images: self.images.clone(),
        }
    }
}

/// A TOML file plus per-key overrides; flags win over the file.
#[derive(Args)]
struct ConfigFlags {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    max_degree: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    step: Option<f64>,
    /// Shadow refresh interval.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    tv_weight: Option<f64>,
    #[arg(long)]
    shadowing: Option<bool>,
    #[arg(long)]
    masking: Option<bool>,
    #[arg(long)]
    fresnel: Option<bool>,
    #[arg(long)]
    self_occlusion: Option<bool>,
    #[arg(long)]
    resolution: Option<usize>,
}

impl ConfigFlags {
    fn resolve(&self) -> shbrdf::Result<ConfigFile> {
        let base = match &self.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        Ok(base.overridden_by(&ConfigFile {
            max_degree: self.max_degree,
            lambda: self.lambda,
            sigma: self.sigma,
            iterations: self.iterations,
            step: self.step,
            m: self.m,
            tv_weight: self.tv_weight,
            shadowing: self.shadowing,
            masking: self.masking,
            fresnel: self.fresnel,
            self_occlusion: self.self_occlusion,
            resolution: self.resolution,
            ..Default::default()
        }))
    }
}

fn report(m: &RunManifest) {
    for t in &m.timings {
        eprintln!("{:>10}  {:.3}s", t.stage, t.seconds);
    }
    for (k, v) in &m.metrics {
        println!("{k} = {v}");
    }
}

fn run(cli: Cli) -> shbrdf::Result<()> {
    let m = match cli.cmd {
        Cmd::Fit {
            scene,
            config,
            spectrum_only,
            truth,
        } => cmd_fit(&FitArgs {
            inputs: scene.inputs(),
            out: scene.out.clone(),
            config: config.resolve()?,
            spectrum_only,
            truth,
        })?,
        Cmd::Entropy { scene, config, grid } => {
            let mut c = config.resolve()?;
            if grid.is_some() {
                c.grid_ks = grid;
                c.grid_alpha = grid;
            }
            cmd_entropy(&scene.inputs(), &scene.out, &c)?
        }
        Cmd::Synth {
            preset,
            out,
            seed,
            resolution,
            views,
            image_size,
            quadrature,
            noise,
        } => {
            let d = SynthOptions::default();
            let opts = SynthOptions {
                resolution: resolution.unwrap_or(d.resolution),
                views: views.unwrap_or(d.views),
                image_size: image_size.unwrap_or(d.image_size),
                quadrature,
                noise: noise.unwrap_or(d.noise),
                ..d
            };
            cmd_synth(preset, &out, seed, &opts)?
        }
        Cmd::Merge { runs, out } => cmd_merge(&runs, &out)?,
        Cmd::Bench { suite, seed } => {
            let r = cmd_bench(suite, seed)?;
            println!("{}", serde_json::to_string_pretty(&r)?);
            return Ok(());
        }
        Cmd::Rerun { manifest, out } => cmd_rerun(&manifest, &out)?,
    };
    report(&m);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
