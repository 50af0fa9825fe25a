use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use kirigami::dataset::{
    generate_dataset, generate_split, load_field, load_sample, verify_dataset, GenConfig, Split, SplitManifest,
};
use kirigami::dxf::{plan_cuts, write_dxf, ConnectorConfig};
use kirigami::genmodel::{train_grpo, Env, MeanFieldPolicy};
use kirigami::metrics::{siou, total_variation, PreparedMask, RewardConfig, RewardMode};
use kirigami::pipeline::Problem;
use kirigami::raster::SilhouetteMask;
use kirigami::solvers::{best_of_k, grid_sweep_bench, BenchRow, Method, Objective, Space, StopRule};
use kirigami::targets::{builtin, NAMES};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::settings::{parse_list, Profile, Settings};
use crate::{CliError, Common};

type CmdResult = Result<(), CliError>;

fn settings(c: &Common) -> Result<Settings, CliError> {
    Settings::new(c.config.as_ref(), c.profile.clone())
}

fn problem(s: &mut Settings, c: &Common) -> Result<Problem, CliError> {
    s.problem(c.grid.clone(), c.phi, c.raster, c.tau_ov, c.tau_siou)
}

fn create_dir(dir: &Path) -> CmdResult {
    std::fs::create_dir_all(dir).map_err(CliError::io)
}

fn write_jsonl(path: &Path, records: &[serde_json::Value]) -> CmdResult {
    let mut text = String::new();
    for r in records {
        text.push_str(&r.to_string());
        text.push('\n');
    }
    std::fs::write(path, text).map_err(CliError::io)
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

#[derive(Args)]
pub struct GenArgs {
    /// Samples per requested split (default: profile counts)
    #[arg(long)]
    count: Option<usize>,
    /// train, val, test or all
    #[arg(long)]
    split: Option<String>,
    /// Dataset directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Samples re-rendered per split during verification
    #[arg(long)]
    verify_samples: Option<usize>,
}

pub fn gen(c: &Common, a: GenArgs) -> CmdResult {
    let mut s = settings(c)?;
    let out: PathBuf = s
        .get_opt("out", a.out.map(|p| p.display().to_string()))?
        .ok_or_else(|| CliError::config("gen needs --out"))?
        .into();
    let seed = s.get("seed", c.seed, 0u64)?;
    let p = problem(&mut s, c)?;
    let split: String = s.get("split", a.split, "all".to_string())?;
    let count = s.get_opt("count", a.count)?;
    let verify_samples = s.get("verify_samples", a.verify_samples, 128usize)?;
    let defaults = match s.profile {
        Profile::Full => [5000, 500, 500],
        Profile::Desk => [200, 20, 20],
    };
    let splits: Vec<Split> = if split == "all" { Split::ALL.to_vec() } else { vec![split.parse()?] };
    let counts: Vec<(Split, usize)> = splits
        .iter()
        .map(|&sp| {
            let k = Split::ALL.iter().position(|x| *x == sp).expect("known split");
            (sp, count.unwrap_or(defaults[k]))
        })
        .collect();

    let cfg = GenConfig { problem: p, ..GenConfig::new(kirigami::geometry::GridShape::default(), 1.0, seed)? };
    create_dir(&out)?;
    s.write_echo("gen", &out.join("gen.config.json"))?;
    let start = Instant::now();
    let manifest = generate_dataset(&out, &counts, &cfg)?;
    for (sp, _) in &counts {
        let r = &manifest.splits[sp];
        println!("{}: {} samples from {} candidates, acceptance rate {:.4}", sp.name(), r.count, r.candidates, r.acceptance_rate);
    }
    let report = verify_dataset(&out, &manifest, verify_samples, seed)?;
    for (sp, n) in &report.checked {
        println!("verify {}: {} re-rendered, min IoU {}", sp.name(), n, report.min_iou[sp]);
    }
    println!("dataset written to {} in {:.1} s", out.display(), start.elapsed().as_secs_f64());
    Ok(())
}

#[derive(Args)]
pub struct SolveArgs {
    /// cmaes, pso, rrls or powell
    #[arg(long)]
    method: Option<String>,
    /// Independent runs per target; the best is reported
    #[arg(long)]
    k: Option<usize>,
    /// Dataset directory written by `gen`
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Split to read from the dataset
    #[arg(long)]
    split: Option<String>,
    /// Comma-separated built-in targets, used instead of a dataset
    #[arg(long)]
    targets: Option<String>,
    /// Number of dataset targets (default: all; desk profile 20)
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    max_evals: Option<usize>,
    /// linear or log
    #[arg(long)]
    space: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn solve(c: &Common, a: SolveArgs) -> CmdResult {
    let mut s = settings(c)?;
    let method: Method = s.get("method", a.method, "cmaes".to_string())?.parse()?;
    let k = s.get("k", a.k, 1usize)?;
    let seed = s.get("seed", c.seed, 0u64)?;
    let max_evals = s.get("max_evals", a.max_evals, 1000usize)?;
    let space = match s.get("space", a.space, "linear".to_string())?.as_str() {
        "linear" => Space::Linear,
        "log" => Space::Log,
        other => return Err(CliError::config(format!("unknown space {other}"))),
    };
    let out: PathBuf = s.get("out", a.out.map(|p| p.display().to_string()), "kirigami-out".into())?.into();
    let dataset = s.get_opt("dataset", a.dataset.map(|p| p.display().to_string()))?;
    let names = s.get_opt("targets", a.targets)?;
    let split: Split = s.get("split", a.split, "test".to_string())?.parse()?;
    let count = s.get_opt("count", a.count.or((s.profile == Profile::Desk).then_some(20)))?;
    if k == 0 {
        return Err(CliError::config("--k must be at least 1"));
    }

    let (problem, targets): (Problem, Vec<(String, SilhouetteMask)>) = match (dataset, names) {
        (Some(dir), None) => {
            let dir = PathBuf::from(dir);
            let manifest = SplitManifest::load(&dir)
                .map_err(|e| CliError::config(format!("cannot open dataset {}: {e}", dir.display())))?;
            let mut p = manifest.config.problem.clone();
            p.reward.tau_ov = s.get("tau_ov", c.tau_ov, p.reward.tau_ov)?;
            p.reward.tau_siou = s.get("tau_siou", c.tau_siou, p.reward.tau_siou)?;
            let record = manifest
                .splits
                .get(&split)
                .ok_or_else(|| CliError::config(format!("dataset has no {} split", split.name())))?;
            let n = count.unwrap_or(record.ids.len()).min(record.ids.len());
            let mut t = Vec::with_capacity(n);
            for id in &record.ids[..n] {
                t.push((id.clone(), load_sample(&dir, split, id)?.1));
            }
            (p, t)
        }
        (None, Some(list)) => {
            let p = problem(&mut s, c)?;
            let mut t = Vec::new();
            for name in parse_list::<String>(&list, "target")? {
                t.push((name.clone(), builtin(&name, &p.raster)?));
            }
            (p, t)
        }
        _ => return Err(CliError::config("give exactly one of --dataset or --targets")),
    };
    create_dir(&out)?;
    s.write_echo("solve", &out.join("solve.config.json"))?;

    let stop = StopRule { max_evals, ..StopRule::default() };
    let seeds: Vec<u64> = (0..k as u64).map(|j| seed + j).collect();
    let mut records = Vec::new();
    let (mut sious, mut succ, mut sims) = (Vec::new(), 0usize, Vec::new());
    for (id, mask) in &targets {
        let template = Objective::new(problem.clone(), mask)?.with_space(space);
        let start = Instant::now();
        let run = best_of_k(method, &template, &stop, &seeds)?;
        let secs = start.elapsed().as_secs_f64();
        let success = run.feasible && run.best_siou >= problem.reward.tau_siou;
        println!("{id}: sIoU {:.4} success {} #F {}", run.best_siou, success, run.sim_calls);
        sious.push(run.best_siou);
        sims.push(run.sim_calls as f64);
        succ += success as usize;
        records.push(json!({
            "method": method.name(),
            "seed": seed,
            "k": k,
            "grid": format!("{}x{}", problem.shape.m, problem.shape.n),
            "target_id": id,
            "siou": run.best_siou,
            "success": success,
            "evals": run.evals_used,
            "sim_calls": run.sim_calls,
            "seconds": secs,
            "stop_reason": run.stop_reason,
            "best_x": run.best_x.values,
        }));
    }
    write_jsonl(&out.join("solve.jsonl"), &records)?;
    println!(
        "{}: {} targets, mean sIoU {:.4}, success {:.1}%, mean #F {:.1}",
        method.name(),
        targets.len(),
        mean(&sious),
        100.0 * succ as f64 / targets.len().max(1) as f64,
        mean(&sims)
    );
    Ok(())
}

#[derive(Args)]
pub struct EvalArgs {
    /// Candidate: a field (.txt) or a mask (.pgm)
    #[arg(long)]
    pred: Option<PathBuf>,
    /// Target mask (.pgm)
    #[arg(long)]
    target: Option<PathBuf>,
    /// Print the total variation of a field candidate
    #[arg(long)]
    report_tv: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn is_pgm(p: &Path) -> bool {
    p.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
}

pub fn eval(c: &Common, a: EvalArgs) -> CmdResult {
    let mut s = settings(c)?;
    let pred: PathBuf =
        s.get_opt("pred", a.pred.map(|p| p.display().to_string()))?.ok_or_else(|| CliError::config("eval needs --pred"))?.into();
    let target: PathBuf = s
        .get_opt("target", a.target.map(|p| p.display().to_string()))?
        .ok_or_else(|| CliError::config("eval needs --target"))?
        .into();
    let report_tv = s.get("report_tv", a.report_tv.then_some(true), false)?;
    let out: PathBuf = s.get("out", a.out.map(|p| p.display().to_string()), "kirigami-out".into())?.into();
    let target_mask = SilhouetteMask::load_pgm(&target)?;

    let record = if is_pgm(&pred) {
        if report_tv {
            return Err(CliError::config("--report-tv needs a field candidate, not a mask"));
        }
        let m = SilhouetteMask::load_pgm(&pred)?;
        let v = siou(&m, &target_mask, &Default::default())?;
        json!({ "pred": pred.display().to_string(), "target": target.display().to_string(), "siou": v })
    } else {
        let x = load_field(&pred)?;
        let mut p = problem(&mut s, c)?;
        p = Problem { shape: x.shape, anchors: kirigami::geometry::BoundaryAnchors::default_for(x.shape), ..p };
        if p.raster.width != target_mask.width || p.raster.height != target_mask.height {
            return Err(CliError::config(format!(
                "resolution mismatch: raster {}x{} vs target {}x{}",
                p.raster.width, p.raster.height, target_mask.width, target_mask.height
            )));
        }
        let (r, _) = p.evaluate(&x, &PreparedMask::new(&target_mask)?)?;
        if report_tv {
            println!("TV {}", total_variation(&x));
        }
        let mut rec = r.record();
        rec["pred"] = json!(pred.display().to_string());
        rec["target"] = json!(target.display().to_string());
        rec
    };
    create_dir(&out)?;
    s.write_echo("eval", &out.join("eval.config.json"))?;
    println!("{record}");
    write_jsonl(&out.join("eval.jsonl"), &[record])
}

#[derive(Args)]
pub struct GrpoArgs {
    /// accuracy, regularity or hybrid
    #[arg(long)]
    mode: Option<String>,
    /// Environment-call budget (default 10000; desk profile 2000)
    #[arg(long)]
    calls: Option<usize>,
    #[arg(long)]
    group: Option<usize>,
    #[arg(long)]
    temp: Option<f64>,
    /// Built-in target name or a .pgm mask (default: first generated test sample)
    #[arg(long)]
    target: Option<String>,
    /// Half-width of the uniform initial policy mean in z-space
    #[arg(long)]
    init_spread: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn grpo(c: &Common, a: GrpoArgs) -> CmdResult {
    let mut s = settings(c)?;
    let mode: RewardMode = s.get("mode", a.mode, "accuracy".to_string())?.parse()?;
    let default_calls = if s.profile == Profile::Desk { 2000 } else { 10_000 };
    let calls = s.get("calls", a.calls, default_calls)?;
    let group = s.get("group", a.group, 4usize)?;
    let temp = s.get("temp", a.temp, 0.2)?;
    let seed = s.get("seed", c.seed, 0u64)?;
    let spread = s.get("init_spread", a.init_spread, 0.5)?;
    let target = s.get_opt("target", a.target)?;
    let out: PathBuf = s.get("out", a.out.map(|p| p.display().to_string()), "kirigami-out".into())?.into();
    let mut p = problem(&mut s, c)?;
    if group < 2 {
        return Err(CliError::config("--group must be at least 2"));
    }
    let mask = match target.as_deref() {
        Some(t) if t.ends_with(".pgm") => SilhouetteMask::load_pgm(Path::new(t))?,
        Some(t) if NAMES.contains(&t) => builtin(t, &p.raster)?,
        Some(t) => return Err(CliError::config(format!("unknown target {t}"))),
        None => {
            let cfg = GenConfig { problem: p.clone(), ..GenConfig::new(p.shape, 1.0, seed)? };
            generate_split(1, Split::Test, &cfg)?.0.remove(0).y
        }
    };
    p.reward = RewardConfig { mode, tau_ov: p.reward.tau_ov, tau_siou: p.reward.tau_siou, ..RewardConfig::with_mode(mode) };
    create_dir(&out)?;
    s.write_echo("grpo", &out.join("grpo.config.json"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut policy = MeanFieldPolicy::random(p.shape, spread, &mut rng);
    let mut env = Env::new(p, &mask)?;
    let trace = train_grpo(&mut policy, &mut env, calls, group, temp, &mut rng)?;
    let records: Vec<serde_json::Value> = trace.iter().map(|r| serde_json::to_value(r).expect("trace serializes")).collect();
    write_jsonl(&out.join("grpo_trace.jsonl"), &records)?;
    std::fs::write(out.join("policy.json"), serde_json::to_string_pretty(&policy).expect("policy serializes") + "\n")
        .map_err(CliError::io)?;
    let d = (trace.len() / 10).max(1);
    let head = &trace[..d.min(trace.len())];
    let tail = &trace[trace.len().saturating_sub(d)..];
    let avg = |rs: &[kirigami::genmodel::TraceRecord], f: fn(&kirigami::genmodel::TraceRecord) -> f64| {
        mean(&rs.iter().map(f).collect::<Vec<_>>())
    };
    println!("{} groups, {} environment calls", trace.len(), env.calls);
    println!(
        "mean reward {:.4} -> {:.4}, best sIoU {:.4} -> {:.4}, TV of best {:.4} -> {:.4} (first vs last decile)",
        avg(head, |r| r.mean_reward),
        avg(tail, |r| r.mean_reward),
        avg(head, |r| r.best_siou),
        avg(tail, |r| r.best_siou),
        avg(head, |r| r.tv_of_best),
        avg(tail, |r| r.tv_of_best)
    );
    Ok(())
}

#[derive(Args)]
pub struct BenchArgs {
    /// Comma-separated grid sizes in 6..=24
    #[arg(long)]
    grids: Option<String>,
    /// Comma-separated methods
    #[arg(long)]
    methods: Option<String>,
    /// Comma-separated built-in targets
    #[arg(long)]
    targets: Option<String>,
    #[arg(long)]
    max_evals: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub const BENCH_HEADER: &str = "run_id,grid,method,target,seconds,evals";

/// Next run id for an existing CSV (1 for a new file).
fn next_run_id(path: &Path) -> Result<u64, CliError> {
    let Ok(text) = std::fs::read_to_string(path) else { return Ok(1) };
    let mut lines = text.lines();
    match lines.next() {
        None => return Ok(1),
        Some(h) if h == BENCH_HEADER => {}
        Some(h) => return Err(CliError::config(format!("{} has header {h:?}, expected {BENCH_HEADER:?}", path.display()))),
    }
    let last = lines.filter_map(|l| l.split(',').next()?.parse::<u64>().ok()).max().unwrap_or(0);
    Ok(last + 1)
}

pub fn bench(c: &Common, a: BenchArgs) -> CmdResult {
    let mut s = settings(c)?;
    let grids: Vec<usize> = parse_list(&s.get("grids", a.grids, "6,8,10,12,14,16,18,20,22,24".to_string())?, "grid")?;
    let methods: Vec<Method> = parse_list(&s.get("methods", a.methods, "cmaes,pso,rrls,powell".to_string())?, "method")?;
    let names: Vec<String> = parse_list(&s.get("targets", a.targets, NAMES.join(","))?, "target")?;
    let max_evals = s.get("max_evals", a.max_evals, 1000usize)?;
    let seed = s.get("seed", c.seed, 0u64)?;
    let out: PathBuf = s.get("out", a.out.map(|p| p.display().to_string()), "kirigami-out".into())?.into();
    let p = problem(&mut s, c)?;
    if let Some(g) = grids.iter().find(|g| !(6..=24).contains(*g)) {
        return Err(CliError::config(format!("grid {g} outside 6..=24")));
    }
    let mut targets = Vec::new();
    for n in &names {
        targets.push((n.clone(), builtin(n, &p.raster)?));
    }
    create_dir(&out)?;
    s.write_echo("bench", &out.join("bench.config.json"))?;

    let csv = out.join("bench.csv");
    let run_id = next_run_id(&csv)?;
    let stop = StopRule { max_evals, ..StopRule::default() };
    let rows: Vec<BenchRow> = grid_sweep_bench(&grids, &targets, &methods, p.phi.phi(), &stop, seed)?;
    let fresh = !csv.exists();
    let mut f = OpenOptions::new().create(true).append(true).open(&csv).map_err(CliError::io)?;
    if fresh {
        writeln!(f, "{BENCH_HEADER}").map_err(CliError::io)?;
    }
    for r in &rows {
        writeln!(f, "{run_id},{}", r.csv()).map_err(CliError::io)?;
        println!("{run_id},{}", r.csv());
    }
    println!("run {run_id}: {} rows appended to {}", rows.len(), csv.display());
    Ok(())
}

#[derive(Args)]
pub struct ExportArgs {
    /// Ratio field text file
    #[arg(long)]
    field: Option<PathBuf>,
    /// Millimeters per model unit
    #[arg(long)]
    scale_mm: Option<f64>,
    /// Connector radius in model units (default 2% of the shortest void edge)
    #[arg(long)]
    connector_radius: Option<f64>,
    /// Output DXF path
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn export(c: &Common, a: ExportArgs) -> CmdResult {
    let mut s = settings(c)?;
    let field: PathBuf = s
        .get_opt("field", a.field.map(|p| p.display().to_string()))?
        .ok_or_else(|| CliError::config("export needs --field"))?
        .into();
    let out: PathBuf =
        s.get_opt("out", a.out.map(|p| p.display().to_string()))?.ok_or_else(|| CliError::config("export needs --out"))?.into();
    let scale = s.get("scale_mm", a.scale_mm, 1.0)?;
    let radius = s.get_opt("connector_radius", a.connector_radius)?;
    let x = load_field(&field)?;
    let base = problem(&mut s, c)?;
    let p = Problem { shape: x.shape, anchors: kirigami::geometry::BoundaryAnchors::default_for(x.shape), ..base };
    if !(scale > 0.0) {
        return Err(CliError::config("--scale-mm must be positive"));
    }
    let layout = p.decode(&x)?;
    if !p.feasible(&layout) {
        let f = &layout.feasibility;
        return Err(CliError::infeasible(format!(
            "field decodes infeasibly (decode_failed {}, invalid voids {}, overlap ratio {:.4} > {}); nothing written",
            f.decode_failed, f.invalid_count, f.overlap_ratio, p.reward.tau_ov
        )));
    }
    let plan = plan_cuts(&layout, &ConnectorConfig { radius })?;
    let mut echo = out.clone().into_os_string();
    echo.push(".config.json");
    s.write_echo("export", Path::new(&echo))?;
    write_dxf(&plan, scale, &out)?;
    println!(
        "{}: {} cut paths, {} connectors, {} trimmed segments",
        out.display(),
        plan.paths.len(),
        plan.connectors.len(),
        plan.trimmed_segments.len()
    );
    Ok(())
}
