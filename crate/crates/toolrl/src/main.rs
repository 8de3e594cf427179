use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use toolrl::analyze::analyze_cmd;
use toolrl::error::{exit, Error, Result};
use toolrl::eval::{eval_cmd, EvalOptions};
use toolrl::image::write_ppm;
use toolrl::logio::write_logs;
use toolrl::replay::{replay_cmd, ReplayOptions};
use toolrl::train::{train, world_for, TrainOptions};
use toolrl::RunConfig;
use toolrl_core::behavior::synth::fixture_suite;
use toolrl_core::env::render::{render_scene, Layers};
use toolrl_core::env::{render_frame, Env, ToolPolicy, IMAGE_HEIGHT, IMAGE_WIDTH};
use toolrl_core::physics::ToolKind;

#[derive(Parser)]
#[command(name = "toolrl", version, about = "Planar tool-use RL: train, evaluate, replay and analyze")]
struct Cli {
    /// Run config (TOML). Without it every block uses its defaults.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Override a config value, e.g. `--set trainer.workers=4`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Output root; overrides `out_dir` from the config.
    #[arg(long, env = "TOOLRL_OUT", global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

fn parse_tool(s: &str) -> std::result::Result<ToolKind, String> {
    ToolKind::parse(s).ok_or_else(|| format!("unknown tool `{s}` (T, L-right, L-left, I)"))
}

#[derive(Subcommand)]
enum Command {
    /// Print the fully defaulted config.
    InitConfig,
    /// Train from scratch, or continue from checkpoints/latest.bin.
    Train {
        #[arg(long)]
        resume: bool,
        /// Progress line on stderr every N updates (0 = silent).
        #[arg(long, default_value_t = 50)]
        progress: u64,
    },
    /// Run evaluation episodes and write their trajectory logs.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, short = 'n', default_value_t = 100)]
        episodes: u64,
        #[arg(long, value_parser = parse_tool)]
        tool: Option<ToolKind>,
        /// Act at the policy mean.
        #[arg(long)]
        deterministic: bool,
    },
    /// Re-simulate logged episodes, audit them and dump frames.
    Replay {
        log: PathBuf,
        #[arg(long)]
        episode: Option<u64>,
        #[arg(long, default_value_t = 4)]
        scale: usize,
        /// Frames in the strip image (0 = none).
        #[arg(long, default_value_t = 6)]
        strip: usize,
        /// Audit only.
        #[arg(long)]
        check: bool,
    },
    /// Behavior report over a log file or a directory of *.jsonl logs.
    Analyze { input: PathBuf },
    /// Render the initial scene of the episode drawn from a seed.
    Render {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_parser = parse_tool)]
        tool: Option<ToolKind>,
        /// Upscale factor; 1 with `--policy-view` gives the policy frame.
        #[arg(long, default_value_t = 4)]
        scale: usize,
        /// Use the policy camera renderer.
        #[arg(long)]
        policy_view: bool,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Write the labeled synthetic behavior fixtures.
    Fixtures {
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<()> {
    let cfg = RunConfig::load(cli.config.as_deref(), &cli.overrides)?;
    let root = cli.out.clone().unwrap_or_else(|| cfg.out_dir.clone());
    match cli.command {
        Command::InitConfig => print!("{}", cfg.to_toml()),
        Command::Train { resume, progress } => {
            let s = train(
                &cfg,
                &root,
                &TrainOptions {
                    resume,
                    progress_every: progress,
                },
            )?;
            println!("{} updates, {} episodes, checkpoint {}", s.updates, s.episodes, s.checkpoint.display());
        }
        Command::Eval {
            checkpoint,
            episodes,
            tool,
            deterministic,
        } => {
            let opts = EvalOptions {
                episodes,
                tool,
                deterministic,
            };
            let out = root.join("eval");
            let s = eval_cmd(&cfg, &checkpoint, &opts, &out)?;
            for t in &s.tools {
                if t.episodes > 0 {
                    println!("{:<8} {:>4}/{:<4} {:>6.2}%  mean length {:.2}", t.tool_kind.name(), t.successes, t.episodes, t.success_rate, t.mean_length);
                }
            }
            println!("logs in {}", out.display());
        }
        Command::Replay {
            log,
            episode,
            scale,
            strip,
            check,
        } => {
            let opts = ReplayOptions {
                episode,
                scale,
                strip_frames: strip,
                check_only: check,
            };
            for r in replay_cmd(&cfg, &log, &root.join("replay"), &opts)? {
                let at = r.dir.as_deref().map_or(String::new(), |d| format!(" -> {}", d.display()));
                println!("episode {} ok: {} frames, max divergence {:.1e}{at}", r.episode, r.frames, r.max_divergence);
            }
        }
        Command::Analyze { input } => {
            let out = root.join("analysis");
            analyze_cmd(&input, &cfg.analysis, cfg.hash(), &out)?;
            print!("{}", std::fs::read_to_string(out.join(toolrl::analyze::REPORT_TXT)).map_err(Error::io(&out))?);
        }
        Command::Render {
            seed,
            tool,
            scale,
            policy_view,
            output,
        } => {
            let mut episode = cfg.episode.clone();
            if let Some(k) = tool {
                episode.tool_policy = ToolPolicy::Fixed(k);
            }
            let (env, _) = Env::reset(world_for(&cfg)?, episode, cfg.reward.clone(), seed).map_err(Error::runtime)?;
            let img = if policy_view && scale == 1 {
                render_frame(env.world(), env.state(), &cfg.episode.palette)
            } else {
                let s = scale.max(1);
                render_scene(env.world(), env.state(), &cfg.episode.palette, IMAGE_WIDTH * s, IMAGE_HEIGHT * s, Layers::ALL)
            };
            let path = output.unwrap_or_else(|| root.join(format!("scene-{seed}.ppm")));
            ensure_parent(&path)?;
            write_ppm(&path, &img)?;
            println!("{}", path.display());
        }
        Command::Fixtures { output } => {
            let path = output.unwrap_or_else(|| root.join("fixtures.jsonl"));
            ensure_parent(&path)?;
            let logs: Vec<_> = fixture_suite().into_iter().map(|(l, _)| l).collect();
            write_logs(&path, &logs)?;
            println!("{} episodes -> {}", logs.len(), path.display());
        }
    }
    Ok(())
}

fn ensure_parent(p: &Path) -> Result<()> {
    match p.parent().filter(|d| !d.as_os_str().is_empty()) {
        Some(d) => std::fs::create_dir_all(d).map_err(Error::io(d)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
