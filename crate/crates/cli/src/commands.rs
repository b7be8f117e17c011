//! One function per subcommand, each returning a [`Report`].

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;
use uda_core::measures::{
    f_divergence, h_delta_h, transfer_exponent, wasserstein, y_discrepancy, FDivergence, HdhOptions, MeasureResult,
    TransferGrids, Witness,
};
use uda_core::posterior::{aggregate, argmax, posterior_finite};
use uda_core::risk::{standard_zoo, target_risk, Learner, OptimalLearner, RandomLearner};
use uda_core::sampling::{draw_instance, draw_sample, RngSpec, UdaInstance};
use uda_core::schema::{class_to_json, load_class};
use uda_core::uncertainty::{convergence_study, eptlu, fano_bound, infinite_summary, ptlu_soft, verify_bounds};
use uda_core::worked_examples::{build_example, regression_table, ExampleSpec};
use uda_core::{MetricKind, Posterior, Sample, UdaClass};

use crate::report::{Cell, Report, Table};
use crate::GlobalArgs;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] uda_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    /// 1 for invalid input, 2 for numeric or evidence failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if !e.is_validation() => 2,
            _ => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Core(uda_core::Error::InvalidArgument(msg.into()))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn load(path: &Path) -> Result<UdaClass> {
    Ok(load_class(&read(path)?)?)
}

pub fn emit(report: &Report, g: &GlobalArgs) -> Result<()> {
    let text = report.render(g.format);
    match &g.out {
        Some(path) => write(path, &text),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|source| CliError::Io { path: PathBuf::from("<stdout>"), source })
        }
    }
}

fn base_report(command: &'static str, g: &GlobalArgs) -> Report {
    let mut r = Report::new(command);
    r.config("seed", g.seed).config("log_base", g.log_base.name());
    r
}

#[derive(Args, Debug, Clone)]
pub struct InstanceArgs {
    /// Entry index of the class; drawn from the class weights when omitted.
    #[arg(long)]
    pub entry: Option<usize>,
    /// Ground-truth classifier id; drawn from the entry's prior when omitted.
    #[arg(long)]
    pub f: Option<String>,
}

fn pick_instance(class: &UdaClass, sel: &InstanceArgs, seed: u64) -> Result<UdaInstance> {
    let family = class.family();
    let f_index = match &sel.f {
        Some(id) => Some(family.index_of(id).ok_or_else(|| invalid(format!("unknown classifier id {id:?}")))?),
        None => None,
    };
    let entry = match (sel.entry, f_index) {
        (Some(e), _) if e >= class.entries().len() => {
            return Err(invalid(format!("entry {e} out of range ({} entries)", class.entries().len())))
        }
        (Some(e), _) => Some(e),
        (None, Some(f)) => Some(
            class
                .entries()
                .iter()
                .position(|e| e.prior_mass(f) > 0.0)
                .ok_or_else(|| invalid(format!("no entry gives {:?} prior mass", family.get(f).id())))?,
        ),
        (None, None) => None,
    };
    match (entry, f_index) {
        (None, _) => Ok(draw_instance(class, &RngSpec::new(seed, 0))),
        (Some(e), Some(f)) => {
            if class.entry(e).prior_mass(f) <= 0.0 {
                return Err(invalid(format!("{:?} has no prior mass in entry {e}", family.get(f).id())));
            }
            Ok(UdaInstance::from_class(class, e, f))
        }
        (Some(e), None) => {
            let prior = class.entry(e).prior().to_vec();
            let pick = Posterior::from_weights(family.clone(), prior).draw(&mut RngSpec::new(seed, 0).rng());
            Ok(UdaInstance::from_class(class, e, pick))
        }
    }
}

fn instance_config(r: &mut Report, inst: &UdaInstance, class: &UdaClass) {
    r.config("entry", inst.entry).config("f", class.family().get(inst.f_index).id());
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// Class specification file (JSON).
    pub class_file: PathBuf,
}

pub fn analyze(a: &AnalyzeArgs, g: &GlobalArgs) -> Result<Report> {
    let class = load(&a.class_file)?;
    let cfg = g.log_base.config();
    let summary = infinite_summary(&class, cfg);
    let mut r = base_report("analyze", g);
    r.config("class_file", a.class_file.display().to_string());

    let observations: usize = summary.pairs.iter().map(|p| p.groups.len()).sum();
    let mut t = Table::new("summary", &["r_star_inf", "ptlu", "unit", "k", "pairs", "observations"]);
    t.push(vec![
        summary.r_star.into(),
        summary.ptlu.into(),
        cfg.unit().into(),
        class.k().into(),
        summary.pairs.len().into(),
        observations.into(),
    ]);
    r.table(t);

    let mut pairs = Table::new("pairs", &["pair", "entries", "weight", "e_star", "ptlu"]);
    let mut obs = Table::new(
        "observations",
        &["pair", "representative", "size", "mass", "e_star", "ptlu", "fano_bound"],
    );
    for (i, p) in summary.pairs.iter().enumerate() {
        let entries: Vec<String> = p.entries.iter().map(usize::to_string).collect();
        pairs.push(vec![i.into(), entries.join(";").into(), p.weight.into(), p.e_star.into(), p.ptlu.into()]);
        for grp in &p.groups {
            let fano = fano_bound(grp.ptlu, class.k(), Some(grp.e_star), cfg).ok();
            obs.push(vec![
                i.into(),
                class.family().get(grp.representative).id().into(),
                grp.size.into(),
                grp.mass.into(),
                grp.e_star.into(),
                grp.ptlu.into(),
                fano.into(),
            ]);
        }
    }
    r.table(pairs).table(obs);
    Ok(r)
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    pub class_file: PathBuf,
    /// Labeled source points.
    #[arg(long, default_value_t = 10)]
    pub m: usize,
    /// Unlabeled target points.
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    #[command(flatten)]
    pub instance: InstanceArgs,
}

fn sample_tables(s: &Sample, class: &UdaClass) -> [Table; 2] {
    let names = class.family().labels().names();
    let mut src = Table::new("source", &["index", "point", "label"]);
    for (i, (&x, &y)) in s.xs.iter().zip(&s.ys).enumerate() {
        src.push(vec![i.into(), x.into(), names[usize::from(y)].as_str().into()]);
    }
    let mut tgt = Table::new("target", &["index", "point"]);
    for (i, &x) in s.xt.iter().enumerate() {
        tgt.push(vec![i.into(), x.into()]);
    }
    [src, tgt]
}

pub fn sample(a: &SampleArgs, g: &GlobalArgs) -> Result<Report> {
    let class = load(&a.class_file)?;
    let inst = pick_instance(&class, &a.instance, g.seed)?;
    let s = draw_sample(&inst, a.m, a.n, &RngSpec::new(g.seed, 1));
    let mut r = base_report("sample", g);
    r.config("class_file", a.class_file.display().to_string()).config("m", a.m).config("n", a.n);
    instance_config(&mut r, &inst, &class);
    let [src, tgt] = sample_tables(&s, &class);
    r.table(src).table(tgt);
    Ok(r)
}

#[derive(Args, Debug)]
pub struct PosteriorArgs {
    pub class_file: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub m: usize,
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    /// Sample file `{"xs": [...], "xt": [...], "ys": [...]}`; drawn from the instance when omitted.
    #[arg(long)]
    pub sample: Option<PathBuf>,
    #[command(flatten)]
    pub instance: InstanceArgs,
}

pub fn posterior(a: &PosteriorArgs, g: &GlobalArgs) -> Result<Report> {
    let class = load(&a.class_file)?;
    let cfg = g.log_base.config();
    let inst = pick_instance(&class, &a.instance, g.seed)?;
    let s = match &a.sample {
        Some(path) => {
            let s: Sample = serde_json::from_str(&read(path)?).map_err(uda_core::Error::from)?;
            Sample::new(s.xs, s.xt, s.ys).map_err(uda_core::Error::from)?
        }
        None => draw_sample(&inst, a.m, a.n, &RngSpec::new(g.seed, 1)),
    };
    let rho = posterior_finite(&class, &s)?;
    let family = class.family();
    let soft = aggregate(&rho, inst.q.support());
    let g_table = OptimalLearner::table(&rho);

    let mut r = base_report("posterior", g);
    r.config("class_file", a.class_file.display().to_string());
    match &a.sample {
        Some(p) => r.config("sample", p.display().to_string()),
        None => r.config("m", a.m).config("n", a.n),
    };
    instance_config(&mut r, &inst, &class);

    let mut summary = Table::new(
        "summary",
        &["m", "n", "support", "ptlu", "eptlu", "unit", "e_star", "optimal_target_risk"],
    );
    summary.push(vec![
        s.m().into(),
        s.n().into(),
        rho.support_len().into(),
        ptlu_soft(&soft, &inst.q, cfg).into(),
        eptlu(&rho, &s, cfg).ok().into(),
        cfg.unit().into(),
        uda_core::risk::optimal_samplewise_risk_soft(&soft, &inst.q).into(),
        target_risk(&g_table, &inst.q, inst.f.table()).into(),
    ]);
    r.table(summary);

    let mut post = Table::new("posterior", &["classifier", "probability"]);
    for &(f, w) in rho.probs() {
        post.push(vec![family.get(f).id().into(), w.into()]);
    }
    r.table(post);

    let names = family.labels().names();
    let mut cols = vec!["point".to_string()];
    cols.extend(names.iter().map(|n| format!("p_{n}")));
    cols.push("optimal".into());
    let mut agg = Table::with_columns("aggregate", cols);
    for (x, row) in soft.rows() {
        let mut cells: Vec<Cell> = vec![x.into()];
        cells.extend(row.iter().map(|&v| Cell::from(v)));
        cells.push(names[usize::from(argmax(row))].as_str().into());
        agg.push(cells);
    }
    r.table(agg);
    Ok(r)
}

#[derive(Args, Debug)]
pub struct BoundsArgs {
    pub class_file: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub m: usize,
    #[arg(long, default_value_t = 5)]
    pub n: usize,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    /// Failure probability of the bound on the optimal classifier's risk.
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    /// Number of seeded random learners added to the standard learner set.
    #[arg(long, default_value_t = 100)]
    pub random_learners: u64,
}

pub fn bounds(a: &BoundsArgs, g: &GlobalArgs) -> Result<Report> {
    let class = load(&a.class_file)?;
    if !(a.delta > 0.0 && a.delta < 1.0) {
        return Err(invalid(format!("delta must lie in (0, 1), got {}", a.delta)));
    }
    let mut zoo: Vec<Box<dyn Learner>> = standard_zoo(class.family(), &[0]);
    zoo.extend((0..a.random_learners).map(|i| {
        Box::new(RandomLearner { seed: g.seed.wrapping_mul(0x9E37_79B9).wrapping_add(i) }) as Box<dyn Learner>
    }));
    let v = verify_bounds(&class, a.m, a.n, a.trials, &zoo, a.delta, &RngSpec::new(g.seed, 0), g.log_base.config())?;

    let mut r = base_report("bounds", g);
    r.config("class_file", a.class_file.display().to_string())
        .config("m", a.m)
        .config("n", a.n)
        .config("trials", a.trials)
        .config("delta", a.delta)
        .config("random_learners", a.random_learners);
    let mut t = Table::new(
        "summary",
        &[
            "trials",
            "k",
            "fano_checks",
            "fano_violations",
            "min_fano_slack",
            "g_bound_mass_violations",
            "max_g_failure_mass",
            "g_bound_events",
            "g_bound_event_rate",
        ],
    );
    t.push(vec![
        v.trials.into(),
        v.k.into(),
        v.fano_checks.into(),
        v.fano_violations.into(),
        v.min_fano_slack.into(),
        v.g_bound_mass_violations.into(),
        v.max_g_failure_mass.into(),
        v.g_bound_events.into(),
        v.g_bound_event_rate.into(),
    ]);
    r.table(t);
    let mut per = Table::new("learners", &["learner", "checks", "violations", "min_slack"]);
    for l in &v.per_learner {
        per.push(vec![l.learner.clone().into(), l.checks.into(), l.violations.into(), l.min_slack.into()]);
    }
    r.table(per);
    Ok(r)
}

const MEASURE_NAMES: [&str; 7] = ["kl", "chi2", "tv", "wasserstein", "hdh", "y", "gamma"];

#[derive(Args, Debug)]
pub struct MeasuresArgs {
    pub class_file: PathBuf,
    /// Entry whose (p, q) pair is compared.
    #[arg(long, default_value_t = 0)]
    pub entry: usize,
    /// Labeling for the 𝒴-discrepancy and transfer exponent; the entry's first prior member when omitted.
    #[arg(long)]
    pub f: Option<String>,
    /// Comma-separated subset of kl, chi2, tv, wasserstein, hdh, y, gamma.
    #[arg(long, value_delimiter = ',')]
    pub which: Option<Vec<String>>,
    /// Wasserstein exponent.
    #[arg(long, default_value_t = 1.0)]
    pub d: f64,
    /// Pair budget for the HΔH scan.
    #[arg(long, default_value_t = 1e7)]
    pub max_pairs: f64,
    /// Subsample pairs above the budget and report a lower bound.
    #[arg(long)]
    pub subsample: bool,
}

fn witness_cells(w: Option<Witness>, class: &UdaClass) -> Vec<Cell> {
    let id = |i: usize| Cell::from(class.family().get(i).id());
    match w {
        Some(Witness::Pair { h, h2 }) => vec!["pair".into(), id(h), id(h2), Cell::Empty],
        Some(Witness::Classifier { h }) => vec!["classifier".into(), id(h), Cell::Empty, Cell::Empty],
        Some(Witness::SourceBlind { h }) => vec!["source-blind".into(), id(h), Cell::Empty, Cell::Empty],
        Some(Witness::TransferCertificate { c, .. }) => vec!["certificate".into(), Cell::Empty, Cell::Empty, c.into()],
        None => vec![Cell::Empty; 4],
    }
}

pub fn measures(a: &MeasuresArgs, g: &GlobalArgs) -> Result<Report> {
    let class = load(&a.class_file)?;
    let which: Vec<String> = match &a.which {
        Some(list) => {
            if let Some(bad) = list.iter().find(|w| !MEASURE_NAMES.contains(&w.as_str())) {
                return Err(invalid(format!("unknown measure {bad:?}; expected one of {}", MEASURE_NAMES.join(", "))));
            }
            list.clone()
        }
        None => MEASURE_NAMES
            .iter()
            .filter(|&&m| m != "wasserstein" || class.domain().metric() != MetricKind::Discrete)
            .map(|m| m.to_string())
            .collect(),
    };
    if a.entry >= class.entries().len() {
        return Err(invalid(format!("entry {} out of range ({} entries)", a.entry, class.entries().len())));
    }
    let e = class.entry(a.entry);
    let family = class.family();
    let f_index = match &a.f {
        Some(id) => family.index_of(id).ok_or_else(|| invalid(format!("unknown classifier id {id:?}")))?,
        None => e.prior()[0].0,
    };
    let f = family.get(f_index);
    let (p, q) = (e.p().as_ref(), e.q().as_ref());
    let opts = HdhOptions { max_pairs: a.max_pairs, subsample: a.subsample.then(|| RngSpec::new(g.seed, 0)) };

    let mut r = base_report("measures", g);
    r.config("class_file", a.class_file.display().to_string())
        .config("entry", a.entry)
        .config("f", f.id())
        .config("which", which.join(";"))
        .config("d", a.d);
    let mut t = Table::new("measures", &["name", "value", "lower_bound", "witness", "h", "h2", "c"]);
    for w in &which {
        let m: MeasureResult = match w.as_str() {
            "kl" => f_divergence(p, q, FDivergence::Kl),
            "chi2" => f_divergence(p, q, FDivergence::Chi2),
            "tv" => f_divergence(p, q, FDivergence::Tv),
            "wasserstein" => wasserstein(class.domain(), p, q, a.d)?,
            "hdh" => h_delta_h(p, q, family, &opts)?,
            "y" => y_discrepancy(p, q, f, family),
            _ => transfer_exponent(p, q, f, family, &TransferGrids::default()),
        };
        let mut row = vec![m.name.clone().into(), m.value.into(), m.lower_bound.into()];
        row.extend(witness_cells(m.witness, &class));
        t.push(row);
    }
    r.table(t);
    Ok(r)
}

#[derive(Args, Debug)]
pub struct ExamplesArgs {
    /// Example id (1-4); all examples when omitted.
    #[arg(long)]
    pub id: Option<u8>,
    /// Class within the example; every class when omitted.
    #[arg(long)]
    pub class: Option<u8>,
    /// Points per full turn (examples 1, 2) or per unit length (3, 4).
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Also write the built class specification here (requires a single class).
    #[arg(long)]
    pub export_class: Option<PathBuf>,
}

pub fn examples(a: &ExamplesArgs, g: &GlobalArgs) -> Result<Report> {
    let ids: Vec<u8> = match a.id {
        Some(id) => vec![id],
        None => vec![1, 2, 3, 4],
    };
    let mut specs = Vec::new();
    for &id in &ids {
        let classes: Vec<u8> = match a.class {
            Some(c) => vec![c],
            None => (1..=ExampleSpec::class_count(id)).collect(),
        };
        for c in classes {
            let n = a.resolution.unwrap_or_else(|| ExampleSpec::default_resolution(id));
            let spec = ExampleSpec::new(id, c, n);
            spec.validate()?;
            specs.push(spec);
        }
    }
    if let Some(path) = &a.export_class {
        let [spec] = specs.as_slice() else {
            return Err(invalid("--export-class needs a single example class (use --id and --class)"));
        };
        write(path, &class_to_json(&build_example(spec)?.class))?;
    }
    let rows = regression_table(&specs, g.log_base.config())?;

    let mut r = base_report("examples", g);
    r.config("id", a.id.map(Cell::from).unwrap_or(Cell::from("all")))
        .config("class", a.class.map(Cell::from).unwrap_or(Cell::from("all")))
        .config("resolution", a.resolution.map(Cell::from).unwrap_or(Cell::from("default")));
    let mut t = Table::new(
        "regression",
        &["example", "class", "resolution", "quantity", "unit", "computed", "expected", "abs_diff", "note"],
    );
    for row in rows {
        t.push(vec![
            row.example.into(),
            row.class.into(),
            row.resolution.into(),
            row.quantity.name().into(),
            row.unit.into(),
            row.computed.into(),
            row.expected.into(),
            row.abs_diff.into(),
            row.note.into(),
        ]);
    }
    r.table(t);
    Ok(r)
}

fn parse_schedule(s: &str) -> std::result::Result<(usize, usize), String> {
    let (m, n) = s.split_once('x').ok_or_else(|| format!("expected MxN, got {s:?}"))?;
    Ok((m.trim().parse().map_err(|e| format!("{m:?}: {e}"))?, n.trim().parse().map_err(|e| format!("{n:?}: {e}"))?))
}

#[derive(Args, Debug)]
pub struct ConvergeArgs {
    pub class_file: PathBuf,
    /// Comma-separated `MxN` sample sizes.
    #[arg(long, value_delimiter = ',', value_parser = parse_schedule, default_value = "250x250,1000x1000,4000x4000")]
    pub schedule: Vec<(usize, usize)>,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[command(flatten)]
    pub instance: InstanceArgs,
}

pub fn converge(a: &ConvergeArgs, g: &GlobalArgs) -> Result<Report> {
    let class = load(&a.class_file)?;
    if a.trials == 0 {
        return Err(invalid("trials must be at least 1"));
    }
    let inst = pick_instance(&class, &a.instance, g.seed)?;
    let rep = convergence_study(&class, &inst, &a.schedule, a.trials, &RngSpec::new(g.seed, 1), g.log_base.config())?;

    let mut r = base_report("converge", g);
    let schedule: Vec<String> = a.schedule.iter().map(|(m, n)| format!("{m}x{n}")).collect();
    r.config("class_file", a.class_file.display().to_string())
        .config("schedule", schedule.join(";"))
        .config("trials", a.trials);
    instance_config(&mut r, &inst, &class);
    let d = rep.diagnostics;
    let mut t = Table::new(
        "diagnostics",
        &["u", "beta", "k_consistent", "s", "alpha_p", "alpha_q", "n_p", "n_q", "assumptions_hold"],
    );
    t.push(vec![
        rep.u.into(),
        d.beta.into(),
        d.k_consistent.into(),
        d.s.into(),
        d.alpha_p.into(),
        d.alpha_q.into(),
        d.n_p.into(),
        d.n_q.into(),
        rep.assumptions_hold.into(),
    ]);
    r.table(t);
    let mut rows = Table::new("gaps", &["m", "n", "trials", "median_gap", "mean_gap", "q90_gap", "max_gap"]);
    for row in &rep.rows {
        rows.push(vec![
            row.m.into(),
            row.n.into(),
            row.trials.into(),
            row.median_gap.into(),
            row.mean_gap.into(),
            row.q90_gap.into(),
            row.max_gap.into(),
        ]);
    }
    r.table(rows);
    Ok(r)
}
