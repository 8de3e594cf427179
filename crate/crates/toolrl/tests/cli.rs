use std::path::Path;
use std::process::Command;

use toolrl::analyze::{analyze, analyze_cmd, REPORT_TXT};
use toolrl::checkpoint::{self, Checkpoint};
use toolrl::error::{exit, Error};
use toolrl::eval::{evaluate, EvalOptions};
use toolrl::image::{encode_ppm, strip, strip_indices};
use toolrl::logio::{parse_logs, read_logs, write_logs};
use toolrl::manifest::RunManifest;
use toolrl::replay::{replay_cmd, ReplayOptions};
use toolrl::train::{train, TrainOptions, EPISODES, LATEST, UPDATES};
use toolrl::RunConfig;
use toolrl_core::behavior::synth::fixture_suite;
use toolrl_core::behavior::{report, summarize_labeled, BehaviorLabel};
use toolrl_core::env::Image;
use toolrl_core::net::single_input;
use toolrl_core::physics::ToolKind;

const LOW_DIM: [&str; 2] = ["episode.observation=low-dim", "network.mode=low-dim"];

fn cfg(extra: &[&str]) -> RunConfig {
    let sets: Vec<String> = LOW_DIM.iter().chain(extra).map(|s| s.to_string()).collect();
    RunConfig::from_toml("", &sets).unwrap()
}

fn small_run(extra: &[&str]) -> RunConfig {
    let mut v = vec![
        "trainer.workers=2",
        "trainer.tool_balanced=false",
        "schedule.max_updates=10",
        "episode.max_steps=40",
    ];
    v.extend_from_slice(extra);
    cfg(&v)
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn config_defaults_overrides_and_unknown_keys() {
    let c = RunConfig::from_toml("", &[]).unwrap();
    assert_eq!(c, RunConfig::default());
    assert_eq!(RunConfig::from_toml(&c.to_toml(), &[]).unwrap(), c);

    let file = "seed = 7\n[trainer]\nworkers = 8\n";
    let c = RunConfig::from_toml(file, &["trainer.workers=4".into()]).unwrap();
    assert_eq!((c.seed, c.trainer.workers), (7, 4));

    for bad in ["[trainer]\nbogus = 1\n", "colour = 3\n", "[episode.palette]\nfoo = [1, 2, 3]\n"] {
        match RunConfig::from_toml(bad, &[]) {
            Err(Error::Config(m)) => assert!(m.contains("unknown field"), "{m}"),
            other => panic!("{bad:?} accepted: {other:?}"),
        }
    }
    match RunConfig::from_toml("", &["trainer.workers=6".into()]) {
        Err(Error::Config(m)) => assert!(m.starts_with("[trainer]"), "{m}"),
        other => panic!("{other:?}"),
    }
    match RunConfig::from_toml("", &["episode.observation=low-dim".into()]) {
        Err(Error::Config(m)) => assert!(m.starts_with("[network]"), "{m}"),
        other => panic!("{other:?}"),
    }
    assert!(matches!(RunConfig::from_toml("", &["novalue".into()]), Err(Error::Usage(_))));
}

#[test]
fn config_hash_ignores_output_directory() {
    let a = cfg(&[]);
    let b = cfg(&["out_dir=elsewhere"]);
    let c = cfg(&["seed=1"]);
    assert_eq!(a.hash(), b.hash());
    assert_ne!(a.hash(), c.hash());
}

#[test]
fn smoke_train_writes_checkpoint_stats_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let c = small_run(&["schedule.checkpoint_every=4"]);
    let s = train(&c, dir.path(), &TrainOptions::default()).unwrap();
    assert_eq!(s.updates, 10);
    assert!(s.episodes > 0);
    for f in [LATEST, "checkpoints/ckpt-000004.bin", "checkpoints/ckpt-000010.bin", EPISODES, UPDATES] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    assert_eq!(read(&dir.path().join(UPDATES)).lines().count(), 10);
    assert_eq!(read(&dir.path().join(EPISODES)).lines().count() as u64, s.episodes);

    let m = RunManifest::read(dir.path()).unwrap();
    assert_eq!(m.config_hash, c.hash());
    m.verify(dir.path()).unwrap();
    assert!(m.artifacts.iter().any(|a| a.path == Path::new(LATEST)));
    std::fs::write(dir.path().join(UPDATES), "tampered\n").unwrap();
    assert!(matches!(m.verify(dir.path()), Err(Error::Integrity(_))));
}

#[test]
fn training_is_deterministic_across_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    train(&small_run(&["schedule.threads=1"]), a.path(), &TrainOptions::default()).unwrap();
    train(&small_run(&["schedule.threads=2"]), b.path(), &TrainOptions::default()).unwrap();
    for f in [EPISODES, UPDATES] {
        assert_eq!(read(&a.path().join(f)), read(&b.path().join(f)), "{f}");
    }
    // The checkpoints differ only in the stored config hash.
    let c = small_run(&[]);
    let load = |d: &Path| checkpoint::load(&d.join(LATEST), &c.network, &c.trainer.kfac).unwrap();
    let (ca, cb) = (load(a.path()), load(b.path()));
    assert_eq!(ca.net.flat_params(), cb.net.flat_params());
    assert_eq!(ca.kfac.unwrap().layers[0].a, cb.kfac.unwrap().layers[0].a);
}

#[test]
fn resume_continues_and_refuses_other_networks() {
    let dir = tempfile::tempdir().unwrap();
    train(&small_run(&["schedule.max_updates=4"]), dir.path(), &TrainOptions::default()).unwrap();
    let resume = TrainOptions {
        resume: true,
        ..TrainOptions::default()
    };
    let s = train(&small_run(&["schedule.max_updates=7"]), dir.path(), &resume).unwrap();
    assert_eq!(s.updates, 7);
    assert_eq!(read(&dir.path().join(UPDATES)).lines().count(), 7);
    let ck = checkpoint::load(&dir.path().join(LATEST), &small_run(&[]).network, &small_run(&[]).trainer.kfac).unwrap();
    assert_eq!(ck.updates, 7);

    let other = small_run(&["schedule.max_updates=9", "network.hidden=32"]);
    match train(&other, dir.path(), &resume) {
        Err(Error::Integrity(m)) => assert!(m.contains("network spec"), "{m}"),
        r => panic!("resume with another architecture: {r:?}"),
    }
}

#[test]
fn checkpoint_round_trip_and_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let c = small_run(&["schedule.max_updates=3"]);
    train(&c, dir.path(), &TrainOptions::default()).unwrap();
    let bytes = std::fs::read(dir.path().join(LATEST)).unwrap();
    let ck = checkpoint::decode(&bytes, &c.network, &c.trainer.kfac).unwrap();
    assert_eq!(ck.updates, 3);
    assert_eq!(ck.config_hash, c.digest());
    assert_eq!(checkpoint::encode(&ck).unwrap(), bytes);

    let again: Checkpoint = checkpoint::decode(&checkpoint::encode(&ck).unwrap(), &c.network, &c.trainer.kfac).unwrap();
    assert_eq!(again.net.flat_params(), ck.net.flat_params());
    let (env, obs) = toolrl_core::env::Env::reset(
        toolrl::train::world_for(&c).unwrap(),
        c.episode.clone(),
        c.reward.clone(),
        5,
    )
    .unwrap();
    drop(env);
    let f1 = ck.net.forward(&single_input(&obs)).unwrap();
    let f2 = again.net.forward(&single_input(&obs)).unwrap();
    assert_eq!((f1.mu, f1.sigma, f1.value), (f2.mu, f2.sigma, f2.value));

    let mut bad = bytes.clone();
    bad[100] ^= 1;
    assert!(matches!(checkpoint::decode(&bad, &c.network, &c.trainer.kfac), Err(Error::Integrity(_))));
    assert!(matches!(
        checkpoint::decode(&bytes[..bytes.len() - 1], &c.network, &c.trainer.kfac),
        Err(Error::Integrity(_))
    ));
    let mut net = c.network.clone();
    net.hidden = 16;
    assert!(matches!(checkpoint::decode(&bytes, &net, &c.trainer.kfac), Err(Error::Integrity(_))));
}

fn fresh_checkpoint(dir: &Path, c: &RunConfig) -> std::path::PathBuf {
    let c = RunConfig {
        schedule: toolrl::config::Schedule {
            max_updates: 1,
            ..c.schedule.clone()
        },
        ..c.clone()
    };
    train(&c, dir, &TrainOptions::default()).unwrap().checkpoint
}

#[test]
fn eval_count_filter_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let c = small_run(&["episode.max_steps=500", "trainer.workers=4", "trainer.tool_balanced=true"]);
    let ck = fresh_checkpoint(dir.path(), &c);
    let opts = EvalOptions {
        episodes: 100,
        tool: Some(ToolKind::T),
        deterministic: false,
    };
    let (logs, _) = evaluate(&c, &ck, &opts).unwrap();
    assert_eq!(logs.len(), 100);
    assert!(logs.iter().all(|l| l.header.tool_kind == ToolKind::T));
    let seeds: Vec<u64> = logs.iter().map(|l| l.header.seed).collect();
    assert_eq!(seeds, (c.seed..c.seed + 100).collect::<Vec<_>>());
    // An untrained policy does not solve the task.
    let wins = logs.iter().filter(|l| l.header.success).count();
    assert!(wins <= 3, "{wins} successes from random weights");

    let det = EvalOptions {
        episodes: 6,
        tool: None,
        deterministic: true,
    };
    let (a, _) = evaluate(&c, &ck, &det).unwrap();
    let (b, _) = evaluate(&c, &ck, &det).unwrap();
    assert_eq!(a, b);
    let (s1, _) = evaluate(&c, &ck, &EvalOptions { deterministic: false, ..det.clone() }).unwrap();
    let (s2, _) = evaluate(&c, &ck, &EvalOptions { deterministic: false, ..det }).unwrap();
    assert_eq!(s1, s2);
    assert_ne!(a, s1);
}

#[test]
fn eval_refuses_a_mismatched_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let c = small_run(&[]);
    let ck = fresh_checkpoint(dir.path(), &c);
    let other = small_run(&["network.hidden=48"]);
    let opts = EvalOptions {
        episodes: 1,
        tool: None,
        deterministic: true,
    };
    assert!(matches!(evaluate(&other, &ck, &opts), Err(Error::Integrity(_))));
}

fn eval_logs(dir: &Path, c: &RunConfig, n: u64) -> std::path::PathBuf {
    let ck = fresh_checkpoint(&dir.join("run"), c);
    let (logs, _) = evaluate(
        c,
        &ck,
        &EvalOptions {
            episodes: n,
            tool: None,
            deterministic: false,
        },
    )
    .unwrap();
    let p = dir.join("logs.jsonl");
    write_logs(&p, &logs).unwrap();
    p
}

#[test]
fn replay_reproduces_logged_geometry() {
    let dir = tempfile::tempdir().unwrap();
    let c = small_run(&["episode.max_steps=60"]);
    let log = eval_logs(dir.path(), &c, 3);
    let out = dir.path().join("replay");
    let opts = ReplayOptions {
        scale: 1,
        strip_frames: 3,
        ..ReplayOptions::default()
    };
    let reports = replay_cmd(&c, &log, &out, &opts).unwrap();
    let logs = read_logs(&log).unwrap();
    assert_eq!(reports.len(), 3);
    for (r, l) in reports.iter().zip(&logs) {
        assert_eq!(r.max_divergence, 0.0);
        assert_eq!(r.frames, l.header.length as usize + 1);
        let d = r.dir.as_ref().unwrap();
        let ppm = std::fs::read_dir(d)
            .unwrap()
            .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("frame-"))
            .count();
        assert_eq!(ppm, r.frames);
        assert!(d.join("strip.ppm").is_file());
    }
}

#[test]
fn replay_rejects_tampered_and_truncated_logs() {
    let dir = tempfile::tempdir().unwrap();
    let c = small_run(&["episode.max_steps=60"]);
    let log = eval_logs(dir.path(), &c, 2);
    let mut logs = read_logs(&log).unwrap();

    logs[1].steps[10].geometry.p_o.x += 1e-6;
    let tampered = dir.path().join("tampered.jsonl");
    write_logs(&tampered, &logs).unwrap();
    let out = dir.path().join("replay-tampered");
    match replay_cmd(&c, &tampered, &out, &ReplayOptions::default()) {
        Err(Error::Integrity(m)) => assert!(m.contains("diverges"), "{m}"),
        r => panic!("{r:?}"),
    }
    assert!(!out.exists(), "frames written for a divergent log");

    let text = read(&log);
    let cut: Vec<&str> = text.lines().collect();
    let truncated = dir.path().join("truncated.jsonl");
    std::fs::write(&truncated, cut[..cut.len() - 5].join("\n")).unwrap();
    let out = dir.path().join("replay-truncated");
    assert!(matches!(replay_cmd(&c, &truncated, &out, &ReplayOptions::default()), Err(Error::Integrity(_))));
    assert!(!out.exists());
}

#[test]
fn episode_logs_round_trip_through_json() {
    let logs: Vec<_> = fixture_suite().into_iter().map(|(l, _)| l).collect();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("f.jsonl");
    write_logs(&p, &logs).unwrap();
    assert_eq!(read_logs(&p).unwrap(), logs);
    assert!(parse_logs(std::io::Cursor::new("{\"tick\": 1}\n")).is_err());
}

#[test]
fn analyze_fixture_report_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let logs: Vec<_> = fixture_suite().into_iter().map(|(l, _)| l).collect();
    let input = dir.path().join("logs");
    std::fs::create_dir_all(&input).unwrap();
    write_logs(&input.join("fixtures.jsonl"), &logs).unwrap();
    let out = dir.path().join("out");
    analyze_cmd(&input, &Default::default(), String::new(), &out).unwrap();
    let golden = include_str!("golden/fixtures_report.txt");
    assert_eq!(read(&out.join(REPORT_TXT)), golden);

    // The golden file is the report of the fixtures' intended labels.
    let intended: Vec<BehaviorLabel> = fixture_suite()
        .into_iter()
        .map(|(_, tags)| BehaviorLabel {
            tags,
            evidence: Vec::new(),
        })
        .collect();
    assert_eq!(report(&summarize_labeled(&logs, &intended)), golden);
}

#[test]
fn analyze_skips_bad_files_and_needs_one_log() {
    let dir = tempfile::tempdir().unwrap();
    let rules = Default::default();
    assert!(matches!(analyze(dir.path(), &rules), Err(Error::Runtime(_))));

    let suite = fixture_suite();
    let (one, _) = suite.iter().find(|(l, _)| l.header.success && l.header.tool_kind == ToolKind::I).unwrap();
    write_logs(&dir.path().join("a.jsonl"), std::slice::from_ref(one)).unwrap();
    let mut future = one.clone();
    future.header.version = 99;
    write_logs(&dir.path().join("b.jsonl"), &[future]).unwrap();
    std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();

    let (_, rec) = analyze(dir.path(), &rules).unwrap();
    assert_eq!(rec.files, 1);
    assert_eq!(rec.skipped.len(), 1);
    assert!(rec.skipped[0].starts_with("b.jsonl") && rec.skipped[0].contains("version 99"));
    let i = rec.stats.tools.iter().find(|t| t.tool_kind == ToolKind::I).unwrap();
    assert_eq!((i.episodes, i.successes, i.success_rate), (1, 1, 100.0));
}

#[test]
fn ppm_and_strip_layout() {
    let mut img = Image::filled(3, 2, [1, 2, 3]);
    img.set(2, 1, [9, 8, 7]);
    let ppm = encode_ppm(&img);
    let header = b"P6\n3 2\n255\n";
    assert_eq!(&ppm[..header.len()], header);
    assert_eq!(ppm.len(), header.len() + 18);
    assert_eq!(&ppm[ppm.len() - 3..], &[9, 8, 7]);

    let s = strip(&[&img, &img, &img], 2, [0, 0, 0]);
    assert_eq!((s.width, s.height), (13, 2));
    assert_eq!(s.pixel(3, 0), [0, 0, 0]);
    assert_eq!(s.pixel(5, 0), [1, 2, 3]);
    assert_eq!(strip_indices(10, 4), vec![0, 3, 6, 9]);
    assert_eq!(strip_indices(3, 6), vec![0, 1, 2]);
}

fn toolrl(args: &[&str], out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_toolrl"))
        .args(args)
        .env("TOOLRL_OUT", out)
        .output()
        .unwrap()
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let code = |o: std::process::Output| o.status.code().unwrap();

    assert_eq!(code(toolrl(&["init-config"], out)), exit::OK);
    assert_eq!(code(toolrl(&["no-such-command"], out)), exit::USAGE);
    assert_eq!(code(toolrl(&["--set", "trainer.bogus=1", "init-config"], out)), exit::CONFIG);
    let bad = out.join("bad.toml");
    std::fs::write(&bad, "[trainer]\nworkers = 0\n").unwrap();
    let o = toolrl(&["--config", bad.to_str().unwrap(), "init-config"], out);
    assert!(String::from_utf8_lossy(&o.stderr).contains("[trainer]"));
    assert_eq!(code(o), exit::CONFIG);

    let empty = out.join("empty");
    std::fs::create_dir_all(&empty).unwrap();
    assert_eq!(code(toolrl(&["analyze", empty.to_str().unwrap()], out)), exit::RUNTIME);

    let fx = out.join("fx.jsonl");
    assert_eq!(code(toolrl(&["fixtures", "-o", fx.to_str().unwrap()], out)), exit::OK);
    // Synthetic fixtures are not physics trajectories, so replay must fail the audit.
    let o = toolrl(&["replay", "--check", "--episode", "0", fx.to_str().unwrap()], out);
    assert_eq!(code(o), exit::INTEGRITY);
    let o = toolrl(&["analyze", fx.to_str().unwrap()], out);
    assert_eq!(code(o), exit::OK);
    assert_eq!(read(&out.join("analysis").join(REPORT_TXT)), include_str!("golden/fixtures_report.txt"));
}
