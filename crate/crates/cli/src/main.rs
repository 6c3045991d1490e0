use std::error::Error;
use std::fs;
use std::io::{self, BufRead, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use canonview::augmenter::{build_training_set, export_training_set};
use canonview::bench::{generate_corpus, run_benchmark, BenchParams, StrategyKind};
use canonview::capture::capture_view;
use canonview::explorer::{explore, select_canonical, write_scores_csv, SceneEvaluator};
use canonview::renderer::mesh::{make_box, make_gear_like, make_shaft, GearParams, ShaftParams};
use canonview::renderer::pnm::{encode_pbm, encode_pgm16, encode_ppm};
use canonview::renderer::SceneSpec;
use canonview::session::{parse_log, record_to_line, Session};
use canonview::store::{load_config, load_scene, registry_to_text, save_config, save_registry, save_scene, Config};

type Result<T> = std::result::Result<T, Box<dyn Error>>;

#[derive(Parser)]
#[command(
    name = "canonview",
    version,
    about = "Canonical-view exploration and object teaching on a simulated tabletop"
)]
struct Cli {
    /// Configuration file (TOML); defaults are used when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Teaching session: interactive prompt, or batch with --script.
    Session {
        #[arg(long)]
        scene: Option<PathBuf>,
        /// Run commands from a file, one per line; exit nonzero on any protocol error.
        #[arg(long)]
        script: Option<PathBuf>,
        /// Append the event log (JSON lines) here.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Save the registry here on exit.
        #[arg(long)]
        registry: Option<PathBuf>,
    },
    /// Rebuild a session from its event log and print its state.
    Replay {
        log: PathBuf,
        #[arg(long)]
        registry: Option<PathBuf>,
    },
    /// Strategy-versus-budget benchmark on a procedural corpus.
    Bench {
        #[arg(long, default_value_t = 20)]
        objects: usize,
        #[arg(long, default_value_t = 0)]
        corpus_seed: u64,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,5,8")]
        budgets: Vec<usize>,
        /// Seed list, e.g. `0,1,2` or a range `0..10`.
        #[arg(long, default_value = "0..10")]
        seeds: String,
        #[arg(long, value_delimiter = ',', default_value = "random,olive,oracle-greedy")]
        strategies: Vec<StrategyKind>,
        #[arg(long, default_value_t = 10)]
        test_views: usize,
        #[arg(long, default_value = "bench_raw.csv")]
        raw: PathBuf,
        #[arg(long, default_value = "bench_aggregate.csv")]
        aggregate: PathBuf,
    },
    /// HTTP service for the teaching console.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
    /// List the viewpoints of the configured view sphere as CSV.
    Sphere,
    /// Render one viewpoint and dump colour, depth and mask images.
    Render {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, default_value_t = 0)]
        view: usize,
        #[arg(long)]
        ppm: Option<PathBuf>,
        #[arg(long)]
        pgm: Option<PathBuf>,
        #[arg(long)]
        pbm: Option<PathBuf>,
    },
    /// Run one exploration and report the canonical views.
    Explore {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        trajectory: Option<PathBuf>,
        #[arg(long)]
        scores: Option<PathBuf>,
    },
    /// Explore, augment and export a training set as PPM/PBM pairs.
    Augment {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        label: String,
        #[arg(long)]
        out: PathBuf,
    },
    #[command(subcommand)]
    Scene(SceneCmd),
    #[command(subcommand)]
    Config(ConfigCmd),
}

#[derive(Subcommand)]
enum SceneCmd {
    /// Write the sample scenes (gear, cube, shaft, tabletop).
    Samples {
        #[arg(long, default_value = "scenes")]
        dir: PathBuf,
    },
    /// Write a benchmark corpus as scene files.
    Export {
        #[arg(long, default_value_t = 20)]
        objects: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        dir: PathBuf,
    },
    /// Parse a scene file and print its objects and triangle count.
    Check { path: PathBuf },
}

#[derive(Subcommand)]
enum ConfigCmd {
    /// Write the default configuration.
    Init { path: PathBuf },
    /// Validate a configuration file.
    Check { path: PathBuf },
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse()?, b.trim().parse()?);
        return Ok((a..b).collect());
    }
    Ok(s.split(',')
        .map(|t| t.trim().parse())
        .collect::<std::result::Result<_, _>>()?)
}

fn sample_scenes() -> Result<Vec<(&'static str, SceneSpec)>> {
    let gear = SceneSpec::single("gear", make_gear_like(&GearParams::default(), 7)?);
    let cube = SceneSpec::single("cube", make_box([60.0, 60.0, 60.0], 3)?);
    let shaft = SceneSpec::single("input shaft", make_shaft(&ShaftParams::default(), 11)?);
    let tabletop = SceneSpec::arrangement(
        -30.0,
        vec![
            (
                "gear".into(),
                make_gear_like(&GearParams::default(), 7)?,
                [-60.0, 10.0],
                0.0,
            ),
            (
                "input shaft".into(),
                make_shaft(&ShaftParams::default(), 11)?,
                [55.0, -20.0],
                0.4,
            ),
        ],
    );
    Ok(vec![
        ("gear", gear),
        ("cube", cube),
        ("shaft", shaft),
        ("tabletop", tabletop),
    ])
}

fn run_session(
    config: Config,
    scene: Option<PathBuf>,
    script: Option<PathBuf>,
    log: Option<PathBuf>,
    registry: Option<PathBuf>,
) -> Result<ExitCode> {
    let mut session = match &scene {
        Some(p) => Session::with_scene_file(config, p)?,
        None => Session::new(config, None, None)?,
    };
    let mut log_file = match &log {
        Some(p) => Some(fs::OpenOptions::new().create(true).truncate(true).write(true).open(p)?),
        None => None,
    };
    let mut logged = 0;
    let mut flush_log = |session: &Session, file: &mut Option<fs::File>| -> io::Result<()> {
        if let Some(f) = file {
            for r in &session.log()[logged..] {
                writeln!(f, "{}", record_to_line(r))?;
            }
            f.flush()?;
            logged = session.log().len();
        }
        Ok(())
    };
    flush_log(&session, &mut log_file)?;

    let interactive = script.is_none();
    let input: Box<dyn BufRead> = match &script {
        Some(p) => Box::new(io::BufReader::new(fs::File::open(p)?)),
        None => Box::new(io::BufReader::new(io::stdin())),
    };
    let mut failed = false;
    let mut out = io::stdout();
    if interactive {
        write!(out, "> ")?;
        out.flush()?;
    }
    for line in input.lines() {
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            if interactive {
                write!(out, "> ")?;
                out.flush()?;
            }
            continue;
        }
        if !interactive {
            writeln!(out, "> {text}")?;
        }
        let r = session.handle(text);
        flush_log(&session, &mut log_file)?;
        writeln!(out, "{}", r.text)?;
        if let Some(d) = &r.detection {
            writeln!(
                out,
                "  bbox=({},{})-({},{}) score={:.3} pointing=({:.3},{:.3},{:.3})",
                d.bbox.x0, d.bbox.y0, d.bbox.x1, d.bbox.y1, d.score, d.pointing[0], d.pointing[1], d.pointing[2]
            )?;
        }
        if !r.ok {
            failed = true;
        }
        if r.quit {
            break;
        }
        if interactive {
            write!(out, "> ")?;
            out.flush()?;
        }
    }
    if let Some(p) = registry {
        save_registry(session.registry(), &p)?;
    }
    Ok(if failed && !interactive {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    })
}

fn run(cli: Cli) -> Result<ExitCode> {
    let config = match &cli.config {
        Some(p) => load_config(p)?,
        None => Config::default(),
    };
    match cli.command {
        Cmd::Session {
            scene,
            script,
            log,
            registry,
        } => return run_session(config, scene, script, log, registry),
        Cmd::Replay { log, registry } => {
            let records = parse_log(&fs::read_to_string(&log)?)?;
            let session = Session::replay(&records)?;
            println!("records: {}", records.len());
            println!("state: {}", session.state());
            println!("objects: {}", session.registry().names().join(", "));
            match registry {
                Some(p) => save_registry(session.registry(), &p)?,
                None => print!("{}", registry_to_text(session.registry())),
            }
        }
        Cmd::Bench {
            objects,
            corpus_seed,
            budgets,
            seeds,
            strategies,
            test_views,
            raw,
            aggregate,
        } => {
            let params = BenchParams {
                strategies,
                budgets,
                seeds: parse_seeds(&seeds)?,
                test_views,
                ..BenchParams::default()
            };
            let corpus = generate_corpus(objects, corpus_seed);
            let result = run_benchmark(&corpus, &params, &config)?;
            result.save(&raw, &aggregate)?;
            println!(
                "{:<14} {:>6} {:>6} {:>8} {:>8}",
                "strategy", "budget", "rows", "mean", "stddev"
            );
            for a in &result.aggregate {
                println!(
                    "{:<14} {:>6} {:>6} {:>8.4} {:>8.4}",
                    a.strategy.name(),
                    a.budget,
                    a.rows,
                    a.mean_accuracy,
                    a.std_accuracy
                );
            }
        }
        Cmd::Serve { addr } => {
            config.validate()?;
            let rt = tokio::runtime::Runtime::new()?;
            eprintln!("listening on http://{addr}");
            rt.block_on(canonview_service::serve(addr, config))?;
        }
        Cmd::Sphere => {
            let sphere = config.sphere.build()?;
            println!("view,x,y,z,neighbors");
            for (i, v) in sphere.viewpoints().iter().enumerate() {
                let n: Vec<String> = sphere.neighbors(i)?.iter().map(|j| j.to_string()).collect();
                println!("{i},{},{},{},{}", v.x, v.y, v.z, n.join(";"));
            }
        }
        Cmd::Render {
            scene,
            view,
            ppm,
            pgm,
            pbm,
        } => {
            let scene = load_scene(&scene)?;
            let sphere = config.sphere.build()?;
            let c = capture_view(&scene, &sphere, view, &config.camera, &config.segmentation)?;
            let (w, h) = (c.frame.width, c.frame.height);
            if let Some(p) = ppm {
                fs::write(p, encode_ppm(w, h, &c.frame.color))?;
            }
            if let Some(p) = pgm {
                fs::write(p, encode_pgm16(w, h, &c.frame.depth))?;
            }
            if let Some(p) = pbm {
                fs::write(p, encode_pbm(w, h, c.mask.bits()))?;
            }
            println!(
                "view {view}: {} valid pixels, {} object pixels",
                c.frame.valid_count(),
                c.mask.pixel_count()
            );
        }
        Cmd::Explore {
            scene,
            budget,
            trajectory,
            scores,
        } => {
            let scene = load_scene(&scene)?;
            let sphere = config.sphere.build()?;
            let evaluator = SceneEvaluator {
                scene: &scene,
                sphere: &sphere,
                camera: config.camera,
                segmentation: config.segmentation,
                gov: config.gov,
            };
            let budget = budget.unwrap_or(config.explorer.budget);
            let state = explore(&sphere, evaluator, budget, config.explorer.start_view)?;
            match trajectory {
                Some(p) => state.write_trajectory_csv(fs::File::create(p)?)?,
                None => print!("{}", state.trajectory_csv()),
            }
            if let Some(p) = scores {
                let rows: Vec<_> = state.visited().iter().map(|r| (r.index, r.score)).collect();
                write_scores_csv(&rows, fs::File::create(p)?)?;
            }
            let canon = select_canonical(&state, config.explorer.canonical_k)?;
            println!("canonical views: {:?}", canon.indices());
        }
        Cmd::Augment { scene, label, out } => {
            let scene = load_scene(&scene)?;
            let sphere = config.sphere.build()?;
            let evaluator = SceneEvaluator {
                scene: &scene,
                sphere: &sphere,
                camera: config.camera,
                segmentation: config.segmentation,
                gov: config.gov,
            };
            let state = explore(&sphere, evaluator, config.explorer.budget, config.explorer.start_view)?;
            let canon = select_canonical(&state, config.explorer.canonical_k)?;
            let views: Vec<_> = canon
                .views
                .iter()
                .filter_map(|v| v.capture.as_ref().map(|c| (v.index, c)))
                .collect();
            let samples = build_training_set(
                &scene,
                &sphere,
                &views,
                &config.camera,
                &config.segmentation,
                &config.augment,
                &label,
                config.explorer.seed,
            )?;
            fs::create_dir_all(&out)?;
            export_training_set(&out, &samples)?;
            println!(
                "wrote {} samples from views {:?} to {}",
                samples.len(),
                canon.indices(),
                out.display()
            );
        }
        Cmd::Scene(SceneCmd::Samples { dir }) => {
            fs::create_dir_all(&dir)?;
            for (name, scene) in sample_scenes()? {
                let p = dir.join(format!("{name}.scene"));
                save_scene(&scene, &p)?;
                println!("{} ({} triangles)", p.display(), scene.triangle_count());
            }
        }
        Cmd::Scene(SceneCmd::Export { objects, seed, dir }) => {
            fs::create_dir_all(&dir)?;
            for scene in generate_corpus(objects, seed) {
                let p = dir.join(format!("{}.scene", scene.objects[0].name));
                save_scene(&scene, &p)?;
                println!("{}", p.display());
            }
        }
        Cmd::Scene(SceneCmd::Check { path }) => {
            let scene = load_scene(&path)?;
            for o in &scene.objects {
                println!("object {}: {} triangles", o.name, o.mesh.faces.len());
            }
            println!("total {} triangles", scene.triangle_count());
        }
        Cmd::Config(ConfigCmd::Init { path }) => save_config(&config, &path)?,
        Cmd::Config(ConfigCmd::Check { path }) => {
            load_config(Path::new(&path))?;
            println!("ok");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
