use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use viewset::consistency::{default_sweep, make_pairs, tsed_evaluate, MatchSet, PairMode, PairStructure, TsedConfig};
use viewset::experiment::{run_experiment, ExperimentConfig};
use viewset::geometry::{build_ray_map, fourier_encode, load_trajectory, Camera, NamedCamera, RayEncoding};
use viewset::plan::{
    depth, plan_chain, plan_grouped, plan_keyframed, plan_unordered, plan_zigzag, validate as validate_plan,
    DepthReport, GenerationPlan, KeyframedParams, UnorderedParams, ViewSpec,
};
use viewset::ViewId;

use crate::{Mode, Strategy};

#[derive(Debug, Clone, Copy)]
pub enum Kind {
    Parse,
    Validation,
    Runtime,
}

impl Kind {
    pub fn code(self) -> u8 {
        match self {
            Kind::Parse => 3,
            Kind::Validation => 4,
            Kind::Runtime => 5,
        }
    }
}

pub struct Failure {
    pub kind: Kind,
    pub error: anyhow::Error,
}

type Result<T> = std::result::Result<T, Failure>;

trait Classify<T> {
    fn kind(self, kind: Kind) -> Result<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for std::result::Result<T, E> {
    fn kind(self, kind: Kind) -> Result<T> {
        self.map_err(|e| Failure { kind, error: e.into() })
    }
}

fn fail<T>(kind: Kind, error: anyhow::Error) -> Result<T> {
    Err(Failure { kind, error })
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())).kind(Kind::Runtime),
        None => std::io::stdout().write_all(text.as_bytes()).kind(Kind::Runtime),
    }
}

fn trajectory(path: &Path) -> Result<Vec<NamedCamera>> {
    load_trajectory(path).with_context(|| format!("reading trajectory {}", path.display())).kind(Kind::Parse)
}

fn depth_table(report: &DepthReport) -> String {
    let mut s = String::from("view\tdepth\n");
    for (id, d) in &report.depths {
        let _ = writeln!(s, "{id}\t{d}");
    }
    let _ = writeln!(s, "max depth: {}", report.max_depth);
    s
}

pub struct PlanArgs {
    pub trajectory: PathBuf,
    pub strategy: Strategy,
    pub spacing: usize,
    pub chunk: usize,
    pub cond_count: usize,
    pub keyframes: usize,
    pub rotation_weight: f64,
    pub group_size: usize,
    pub out: Option<PathBuf>,
}

pub fn plan(args: &PlanArgs) -> Result<()> {
    let cams = trajectory(&args.trajectory)?;
    if cams.is_empty() {
        return fail(Kind::Validation, anyhow!("trajectory has no cameras"));
    }
    let views: Vec<ViewSpec> = cams
        .iter()
        .enumerate()
        .map(|(i, c)| {
            if i == 0 {
                ViewSpec::observed(c.id.clone(), c.camera.clone())
            } else {
                ViewSpec::generated(c.id.clone(), c.camera.clone())
            }
        })
        .collect();
    let generated: Vec<ViewId> = views[1..].iter().map(|v| v.id.clone()).collect();
    let plan = match args.strategy {
        Strategy::Chain => plan_chain(&views),
        Strategy::Keyframed => plan_keyframed(
            &views,
            KeyframedParams { spacing: args.spacing, keyframe_chunk: args.chunk, cond_count: args.cond_count },
        ),
        Strategy::Grouped => {
            if args.group_size == 0 {
                return fail(Kind::Validation, anyhow!("--group-size must be at least 1"));
            }
            let groups: Vec<Vec<ViewId>> = generated.chunks(args.group_size).map(|g| g.to_vec()).collect();
            plan_grouped(&views, &groups)
        }
        Strategy::Zigzag => {
            if generated.len() % 2 != 0 {
                return fail(Kind::Validation, anyhow!("zigzag needs (right, left) pairs after the observed camera"));
            }
            let pairs: Vec<(ViewId, ViewId)> = generated.chunks(2).map(|p| (p[0].clone(), p[1].clone())).collect();
            plan_zigzag(&views, &pairs)
        }
        Strategy::Unordered => plan_unordered(
            &views,
            UnorderedParams {
                keyframe_count: args.keyframes,
                cond_size: args.cond_count,
                rotation_weight: args.rotation_weight,
            },
        ),
    }
    .kind(Kind::Validation)?;
    let report = depth(&plan).kind(Kind::Validation)?;
    match &args.out {
        Some(p) => {
            plan.save(p).with_context(|| format!("writing {}", p.display())).kind(Kind::Runtime)?;
            emit(None, &depth_table(&report))
        }
        None => {
            emit(None, &(plan.to_json() + "\n"))?;
            eprint!("{}", depth_table(&report));
            Ok(())
        }
    }
}

pub fn validate(path: &Path) -> Result<()> {
    let plan = GenerationPlan::load(path).with_context(|| format!("reading plan {}", path.display())).kind(Kind::Parse)?;
    let violations = validate_plan(&plan);
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("violation: {v}");
        }
        return fail(Kind::Validation, anyhow!("{} violation(s) in {}", violations.len(), path.display()));
    }
    let report = depth(&plan).kind(Kind::Validation)?;
    emit(None, &depth_table(&report))
}

fn csv_text<F>(write: F) -> Result<String>
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    write(&mut w).kind(Kind::Runtime)?;
    let bytes = w.into_inner().map_err(|e| anyhow!("{e}")).kind(Kind::Runtime)?;
    String::from_utf8(bytes).kind(Kind::Runtime)
}

pub fn experiment(path: &Path, seeds: Option<Vec<u64>>, window: Option<usize>, out: Option<PathBuf>) -> Result<()> {
    let mut config = ExperimentConfig::load(path).kind(Kind::Parse)?;
    if let Some(s) = seeds {
        config.seeds = s;
    }
    if window.is_some() {
        config.window = window;
    }
    let rows = run_experiment(&config).kind(Kind::Runtime)?;
    let text = csv_text(|w| {
        for r in &rows {
            w.serialize(r)?;
        }
        Ok(())
    })?;
    emit(out.as_deref(), &text)
}

fn load_matches(dir: &Path) -> Result<Vec<MatchSet>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading match directory {}", dir.display()))
        .kind(Kind::Parse)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| MatchSet::load(p).with_context(|| format!("reading match file {}", p.display())).kind(Kind::Parse))
        .collect()
}

pub fn tsed(
    dir: &Path,
    trajectory_path: &Path,
    mode: Mode,
    t_matches: usize,
    sweep: Option<Vec<f64>>,
    out: Option<PathBuf>,
    pairs_out: Option<PathBuf>,
) -> Result<()> {
    let cams = trajectory(trajectory_path)?;
    let ids: Vec<ViewId> = cams.iter().map(|c| c.id.clone()).collect();
    let mode = match mode {
        Mode::Adjacent => PairMode::Adjacent,
        Mode::FirstLast => PairMode::FirstLast,
        Mode::SameSided => PairMode::SameSided,
        Mode::CrossSided => PairMode::CrossSided,
    };
    let structure = match mode {
        PairMode::Adjacent | PairMode::FirstLast => PairStructure::Sequence(ids),
        PairMode::SameSided | PairMode::CrossSided => {
            if ids.len() % 2 != 0 {
                return fail(Kind::Validation, anyhow!("stereo modes need (right, left) camera pairs"));
            }
            PairStructure::Stereo(ids.chunks(2).map(|p| (p[1].clone(), p[0].clone())).collect())
        }
    };
    let pairs = make_pairs(&structure, mode).kind(Kind::Validation)?;
    let mut available: HashMap<(ViewId, ViewId), MatchSet> = HashMap::new();
    for m in load_matches(dir)? {
        available.insert(m.pair.clone(), m);
    }
    let mut selected = Vec::new();
    for (a, b) in &pairs {
        let key = (a.clone(), b.clone());
        let rev = (b.clone(), a.clone());
        match available.get(&key).or_else(|| available.get(&rev)) {
            Some(m) => selected.push(m.clone()),
            None => eprintln!("skipped pair ({a}, {b}): no match file"),
        }
    }
    let cameras: HashMap<ViewId, Camera> = cams.into_iter().map(|c| (c.id, c.camera)).collect();
    let sweep = sweep.unwrap_or_else(default_sweep);
    let config = TsedConfig { t_matches, ..TsedConfig::default() };
    let report = tsed_evaluate(&selected, &cameras, &config, &sweep).kind(Kind::Validation)?;
    let text = csv_text(|w| {
        w.write_record(["threshold", "percent"])?;
        for (t, p) in report.thresholds.iter().zip(&report.percent) {
            w.write_record([t.to_string(), p.to_string()])?;
        }
        Ok(())
    })?;
    if let Some(path) = pairs_out {
        let detail = csv_text(|w| {
            let mut header = vec!["view_a".to_string(), "view_b".into(), "matches".into(), "median".into(), "degenerate".into()];
            header.extend(report.thresholds.iter().map(|t| format!("consistent@{t}")));
            w.write_record(&header)?;
            for p in &report.pairs {
                let mut row = vec![
                    p.pair.0.to_string(),
                    p.pair.1.to_string(),
                    p.count.to_string(),
                    p.median.map_or(String::new(), |m| m.to_string()),
                    p.degenerate.to_string(),
                ];
                row.extend(p.consistent.iter().map(|c| c.to_string()));
                w.write_record(&row)?;
            }
            Ok(())
        })?;
        emit(Some(&path), &detail)?;
    }
    emit(out.as_deref(), &text)
}

pub fn encode_rays(path: &Path, view: &str, frequencies: usize, out: Option<PathBuf>) -> Result<()> {
    let cams = trajectory(path)?;
    let cam = match cams.iter().find(|c| c.id.as_str() == view) {
        Some(c) => c,
        None => return fail(Kind::Validation, anyhow!("unknown view `{view}` in {}", path.display())),
    };
    let encoding = RayEncoding::with_frequencies(frequencies);
    let map = build_ray_map(cam.id.clone(), &cam.camera);
    let enc = fourier_encode(&map, &encoding).kind(Kind::Validation)?;
    let mut s = String::new();
    let _ = writeln!(s, "# encoded-rays height {} width {} channels {}", enc.height, enc.width, enc.channels());
    let freqs: Vec<String> = enc.frequencies.iter().map(|f| f.to_string()).collect();
    let _ = writeln!(s, "# frequencies {}", freqs.join(" "));
    for px in enc.pixels() {
        let vals: Vec<String> = px.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "{}", vals.join(" "));
    }
    emit(out.as_deref(), &s)
}
