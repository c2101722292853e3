use std::fmt;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use gridcascade::cascade::{initial_state, write_paths_jsonl};
use gridcascade::gcn::{
    build_line_graph, evaluate, extract_features, model_from_json, model_to_json, read_samples_jsonl, train as fit,
    write_samples_jsonl, GcnError, GcnModel, HopBasis, Hyper, TrainingSample,
};
use gridcascade::lp::LpError;
use gridcascade::search::{
    exhaustive_reference, generate_dataset, online_search, reference_key, DatasetConfig, ExhaustiveReference, GcnGuide,
    SearchError, Strategy,
};
use gridcascade::{cases, explain as lrp_explain, parse_case, propagate, CascadeConfig, DispatchError, Network, StrategyKind};
use serde::Serialize;

use crate::{Common, HyperArgs};

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Infeasible(String),
    Io(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Infeasible(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

impl From<DispatchError> for CliError {
    fn from(e: DispatchError) -> Self {
        match e {
            DispatchError::InfeasibleWithNoShed | DispatchError::Lp(LpError::Infeasible) => {
                CliError::Infeasible(e.to_string())
            }
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<SearchError> for CliError {
    fn from(e: SearchError) -> Self {
        match e {
            SearchError::Dispatch(d) => d.into(),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<GcnError> for CliError {
    fn from(e: GcnError) -> Self {
        CliError::Validation(e.to_string())
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

fn load_case(spec: &str) -> Result<Network> {
    if let Some(name) = spec.strip_prefix("builtin:") {
        return cases::builtin(name).ok_or_else(|| invalid(format!("unknown built-in case '{name}' (toy4, rts79)")));
    }
    parse_case(&read(Path::new(spec))?).map_err(|e| invalid(format!("{spec}: {e}")))
}

fn check_common(c: &Common) -> Result<()> {
    if !(c.beta > 0.0) {
        return Err(invalid("--beta must be positive"));
    }
    Ok(())
}

fn check_scale(load_scale: f64) -> Result<()> {
    if !(load_scale > 0.0) {
        return Err(invalid("--load-scale must be positive"));
    }
    Ok(())
}

fn cascade_config(c: &Common) -> CascadeConfig {
    CascadeConfig {
        beta: c.beta,
        ..CascadeConfig::default()
    }
}

fn scaled_loads(net: &Network, scale: f64) -> Vec<f64> {
    net.base_loads().iter().map(|l| l * scale).collect()
}

fn load_model(c: &Common, path: Option<PathBuf>) -> Result<GcnModel> {
    let path = path.unwrap_or_else(|| c.out.join("model.json"));
    Ok(model_from_json(&read(&path)?)?)
}

fn load_samples(path: &Path) -> Result<Vec<TrainingSample>> {
    let file = fs::File::open(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    Ok(read_samples_jsonl(BufReader::new(file))?)
}

pub fn generate(c: &Common, scenarios: usize, load_scale: f64, jobs: usize) -> Result<()> {
    check_common(c)?;
    check_scale(load_scale)?;
    let net = load_case(&c.case)?;
    let config = DatasetConfig {
        n_scenarios: scenarios,
        max_outages: c.max_outages,
        scale: load_scale,
        beta: c.beta,
        ..DatasetConfig::new(scenarios, c.seed)
    };
    let data = generate_dataset(&net, &config, jobs.max(1))?;
    if scenarios > 0 && data.meta.skipped == scenarios {
        return Err(CliError::Infeasible(format!(
            "all {scenarios} load scenarios are infeasible without shedding"
        )));
    }
    let mut buf = Vec::new();
    write_samples_jsonl(&mut buf, &data.samples).expect("in-memory write");
    write(&c.out.join("dataset.jsonl"), buf)?;
    write(&c.out.join("dataset.meta.json"), to_json(&data.meta))?;
    println!(
        "{} samples from {} scenarios ({} skipped), positive rate {:.4}",
        data.meta.n_samples, scenarios, data.meta.skipped, data.meta.positive_rate
    );
    Ok(())
}

fn hyper_from(h: &HyperArgs, seed: u64) -> Result<Hyper> {
    if h.batch == 0 {
        return Err(invalid("--batch must be at least 1"));
    }
    if h.f1 == 0 || h.f2 == 0 {
        return Err(invalid("--f1 and --f2 must be at least 1"));
    }
    if !(h.lr > 0.0) || !(h.w_ratio > 0.0) {
        return Err(invalid("--lr and --w-ratio must be positive"));
    }
    Ok(Hyper {
        k_hops: h.k_hops,
        f1: h.f1,
        f2: h.f2,
        w_ratio: h.w_ratio,
        lr: h.lr,
        epochs: h.epochs,
        batch: h.batch,
        seed,
    })
}

pub fn train(c: &Common, h: &HyperArgs, dataset: Option<PathBuf>) -> Result<()> {
    let hyper = hyper_from(h, c.seed)?;
    let net = load_case(&c.case)?;
    let samples = load_samples(&dataset.unwrap_or_else(|| c.out.join("dataset.jsonl")))?;
    let hops = HopBasis::new(&build_line_graph(&net), hyper.k_hops);
    let trained = fit(&samples, &hops, &hyper)?;
    write(&c.out.join("model.json"), model_to_json(&trained.model) + "\n")?;
    let mut csv = String::from("epoch,loss\n");
    for (i, l) in trained.loss_trace.iter().enumerate() {
        csv.push_str(&format!("{},{l}\n", i + 1));
    }
    write(&c.out.join("loss.csv"), csv)?;
    println!(
        "trained {} parameters on {} samples; final loss {}{}",
        trained.model.parameter_count(),
        samples.len(),
        trained.loss_trace.last().map_or("n/a".to_string(), |l| format!("{l:.6}")),
        if trained.restarts > 0 { format!(" ({} restarts)", trained.restarts) } else { String::new() }
    );
    Ok(())
}

fn cached_reference(c: &Common, net: &Network, loads: &[f64], cfg: &CascadeConfig) -> Result<ExhaustiveReference> {
    let key = reference_key(net, loads, c.max_outages, cfg);
    let path = c.out.join(format!("reference_{key}.json"));
    if let Ok(text) = fs::read_to_string(&path) {
        if let Ok(r) = serde_json::from_str::<ExhaustiveReference>(&text) {
            if r.key == key {
                return Ok(r);
            }
        }
    }
    let r = exhaustive_reference(net, loads, c.max_outages, cfg)?;
    write(&path, to_json(&r))?;
    Ok(r)
}

pub fn search(
    c: &Common,
    strategies: &[StrategyKind],
    budget: Option<usize>,
    model: Option<PathBuf>,
    load_scale: f64,
) -> Result<()> {
    check_common(c)?;
    check_scale(load_scale)?;
    if budget == Some(0) {
        return Err(invalid("--budget must be at least 1"));
    }
    if strategies.is_empty() {
        return Err(invalid("--strategies is empty"));
    }
    let net = load_case(&c.case)?;
    let guide = if strategies.contains(&StrategyKind::Gcn) {
        let default = c.out.join("model.json");
        let path = match model {
            Some(p) => p,
            None if default.exists() => default,
            None => return Err(invalid("the gcn strategy needs --model")),
        };
        Some(GcnGuide::new(model_from_json(&read(&path)?)?, &net)?)
    } else {
        None
    };
    let cfg = cascade_config(c);
    let loads = scaled_loads(&net, load_scale);
    let reference = cached_reference(c, &net, &loads, &cfg)?;
    let total = reference.shedding.len();

    let mut summary = String::from("strategy,attempts,found,total,attempts_to_complete\n");
    println!("{total} shedding paths in the exhaustive reference ({} attempts)", reference.attempts);
    for &kind in strategies {
        let strategy = Strategy::build(kind, c.seed, guide.as_ref())?;
        let mut out = online_search(&net, &loads, &strategy, c.max_outages, budget, &cfg)?;
        out.curve.total = Some(total);
        write(&c.out.join(format!("curve_{kind}.csv")), out.curve.to_csv())?;
        let shedding: Vec<_> = out.exploration.shedding_paths().cloned().collect();
        write(&c.out.join(format!("paths_{kind}.jsonl")), write_paths_jsonl(&shedding))?;
        let complete = out.curve.attempts_to_complete();
        let complete_str = complete.map_or(String::new(), |a| a.to_string());
        summary.push_str(&format!(
            "{kind},{},{},{total},{complete_str}\n",
            out.curve.attempts(),
            out.curve.found()
        ));
        println!(
            "{kind:>5}: {} of {total} paths in {} attempts; all found at {}",
            out.curve.found(),
            out.curve.attempts(),
            complete.map_or("-".to_string(), |a| a.to_string())
        );
    }
    write(&c.out.join("summary.csv"), summary)
}

pub fn explain(c: &Common, model: Option<PathBuf>, branch: usize, outages: &[usize], load_scale: f64) -> Result<()> {
    check_common(c)?;
    check_scale(load_scale)?;
    let net = load_case(&c.case)?;
    let guide = GcnGuide::new(load_model(c, model)?, &net)?;
    let cfg = cascade_config(c);
    let l = net.n_branches();
    let mut state = initial_state(&net, &scaled_loads(&net, load_scale))?;
    for &k in outages {
        if k >= l || !state.in_service[k] {
            return Err(invalid(format!("outage branch {k} is not in service")));
        }
        state = propagate(&net, &state, k, &cfg)?.0;
    }
    if branch >= l || !state.in_service[branch] {
        return Err(invalid(format!("branch {branch} is not in service in the requested state")));
    }
    let x = extract_features(&net, &state, c.beta);
    let report = lrp_explain(&guide.model, &guide.hops, &x, branch)?;
    write(&c.out.join(format!("explain_{branch}.json")), report.to_json() + "\n")?;
    write(&c.out.join(format!("explain_{branch}.csv")), report.to_csv())?;
    if report.negative_target {
        println!("branch {branch}: shedding logit {:.6} is not positive (NEGATIVE_TARGET)", report.target_value);
    } else {
        println!(
            "branch {branch}: shedding logit {:.6}; largest factor {}",
            report.target_value,
            report.dominant_family().name()
        );
        for (f, v) in report.grouped() {
            println!("  {:<12} {v:.6}", f.name());
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct Metrics {
    a: u64,
    b: u64,
    c: u64,
    d: u64,
    total_accuracy: Option<f64>,
    hit_rate: Option<f64>,
    cover_rate: Option<f64>,
    base_rate: Option<f64>,
}

pub fn eval(c: &Common, model: Option<PathBuf>, dataset: Option<PathBuf>) -> Result<()> {
    let net = load_case(&c.case)?;
    let guide = GcnGuide::new(load_model(c, model)?, &net)?;
    let samples = load_samples(&dataset.unwrap_or_else(|| c.out.join("dataset.jsonl")))?;
    let m = evaluate(&guide.model, &guide.hops, &samples)?;
    let metrics = Metrics {
        a: m.a,
        b: m.b,
        c: m.c,
        d: m.d,
        total_accuracy: m.total_accuracy(),
        hit_rate: m.hit_rate(),
        cover_rate: m.cover_rate(),
        base_rate: m.base_rate(),
    };
    write(&c.out.join("metrics.json"), to_json(&metrics))?;
    let show = |v: Option<f64>| v.map_or("undefined".to_string(), |x| format!("{x:.4}"));
    println!("confusion a={} b={} c={} d={}", m.a, m.b, m.c, m.d);
    println!(
        "total accuracy {}  hit rate {}  cover rate {}",
        show(metrics.total_accuracy),
        show(metrics.hit_rate),
        show(metrics.cover_rate)
    );
    Ok(())
}
