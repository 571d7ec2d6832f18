//! `fcsa`: instance generation, planning, verification and ensemble sweeps
//! for cross-subspace alignment coded batch matrix multiplication.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use fcsa::assignment::Dims;
use fcsa::assignment::{
    lower_bound, single_group_assignment, t1_assignment, t1_threshold, t2_assignment, Assignment, FccParams, T2Side,
    DEFAULT_SEARCH_BUDGET,
};
use fcsa::codec::{make_plan, random_inputs, CodingPlan, PlanConfig, TensorKind};
use fcsa::io::{from_json, to_json, Instance, InstanceFile, PlanFile, ResultFile, ShareFile};
use fcsa::seed::stream_rng;
use fcsa::simulator::{
    default_grid, run_trial, verify_all_subsets, verify_sampled_subsets, write_csv, Ensemble, StragglerModel,
    SubsetReport, SweepConfig, TrialInputs, TrialOutcome, SWEEP_SEARCH_BUDGET,
};
use fcsa::PrimeField;

#[derive(Parser, Debug)]
#[command(
    name = "fcsa",
    version,
    about = "Coded batch matrix multiplication over arbitrary computation lists"
)]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a random instance and write it as JSON.
    Gen(GenArgs),
    /// Build a task/power assignment and coding plan for an instance.
    Plan(PlanArgs),
    /// Encode, compute and decode from every (or sampled) R-subset of workers.
    Verify(VerifyArgs),
    /// Run straggler trials against a plan.
    Simulate(SimulateArgs),
    /// Monte Carlo threshold sweep over random-graph ensembles.
    Sweep(SweepArgs),
    /// Print thresholds and bounds for an instance.
    Bound(BoundArgs),
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum EnsembleKind {
    /// Independent edges with probability lambda.
    Er,
    /// Left degrees uniform on 1..=k.
    Deg,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, value_enum)]
    ensemble: EnsembleKind,
    #[arg(long = "LA")]
    left: usize,
    #[arg(long = "LB")]
    right: usize,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 2)]
    alpha: usize,
    #[arg(long, default_value_t = 4)]
    beta: usize,
    #[arg(long, default_value_t = 2)]
    gamma: usize,
    #[arg(long, default_value_t = fcsa::field::DEFAULT_MODULUS)]
    modulus: u64,
    /// Also write random source matrices.
    #[arg(long)]
    matrices: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Scheme {
    T1,
    T2,
    T2Left,
    T2Right,
    /// One group holding every vertex.
    Single,
    /// Groups and powers read from --assignment.
    Custom,
}

#[derive(Args, Debug, Clone, Copy)]
struct FccArgs {
    #[arg(long, default_value_t = 1)]
    m: usize,
    #[arg(long, default_value_t = 1)]
    p: usize,
    #[arg(long, default_value_t = 1)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    rho: usize,
    #[arg(long, value_enum, default_value_t = TensorArg::Naive)]
    tensor: TensorArg,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum TensorArg {
    Naive,
    Strassen,
}

impl From<TensorArg> for TensorKind {
    fn from(t: TensorArg) -> Self {
        match t {
            TensorArg::Naive => TensorKind::Naive,
            TensorArg::Strassen => TensorKind::Strassen,
        }
    }
}

#[derive(Args, Debug)]
struct PlanArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum, default_value_t = Scheme::T2)]
    scheme: Scheme,
    /// Plan-format JSON with groups, P_A and P_B (for --scheme custom).
    #[arg(long)]
    assignment: Option<PathBuf>,
    #[command(flatten)]
    fcc: FccArgs,
    /// Worker count K (default: the recovery threshold).
    #[arg(long)]
    workers: Option<usize>,
    /// Node budget of the power search.
    #[arg(long, default_value_t = DEFAULT_SEARCH_BUDGET)]
    budget: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum SubsetMode {
    All,
    Sampled,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    plan: PathBuf,
    /// Worker count K (default: from the plan).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum, default_value_t = SubsetMode::All)]
    subsets: SubsetMode,
    /// Number of subsets drawn with --subsets sampled.
    #[arg(long, default_value_t = 1000)]
    samples: u64,
    /// Write every share and result as JSON into this directory.
    #[arg(long)]
    dump_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    plan: PathBuf,
    #[arg(long)]
    workers: Option<usize>,
    /// Exactly this many workers fail per trial.
    #[arg(long, conflicts_with = "iid")]
    erasures: Option<usize>,
    /// Each worker fails independently with this probability.
    #[arg(long)]
    iid: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Lambda values for V_lambda(L_LA, L_LB); empty disables.
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
    /// Degree bounds for V_k.
    #[arg(long, value_delimiter = ',')]
    ks: Option<Vec<usize>>,
    /// L_A values for V_k.
    #[arg(long = "k-LA", value_delimiter = ',')]
    k_left: Option<Vec<usize>>,
    #[arg(long = "lambda-LA", default_value_t = 5)]
    lambda_left: usize,
    #[arg(long = "LB", default_value_t = 5)]
    right: usize,
    #[arg(long, default_value_t = 2000)]
    trials: u64,
    #[arg(long, default_value_t = SWEEP_SEARCH_BUDGET)]
    budget: u64,
    /// Also run one full encode/decode per 100 trials.
    #[arg(long)]
    with_codec: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct BoundArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value_t = 1)]
    m: usize,
    #[arg(long, default_value_t = 1)]
    n: usize,
    #[arg(long, default_value_t = DEFAULT_SEARCH_BUDGET)]
    budget: u64,
}

/// Bad input (exit 2) versus a failed check (exit 1).
enum Failure {
    Invalid(anyhow::Error),
    Check(String),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Invalid(e.into())
    }
}

type CmdResult = Result<(), Failure>;

fn read_instance(path: &Path) -> anyhow::Result<Instance> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: InstanceFile = from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
    file.parse().with_context(|| format!("checking {}", path.display()))
}

fn read_plan(path: &Path, inst: &Instance, workers: Option<usize>) -> anyhow::Result<CodingPlan> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: PlanFile = from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
    file.to_plan(inst, workers)
        .with_context(|| format!("checking {}", path.display()))
}

fn write_file(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Source matrices from the instance, or random ones from the seed.
fn inputs_for(inst: &Instance, seed: u64) -> (Vec<fcsa::FieldMatrix>, Vec<fcsa::FieldMatrix>) {
    match &inst.matrices {
        Some(m) => m.clone(),
        None => random_inputs(&inst.field, &inst.graph, inst.dims, &mut stream_rng(seed, 0)),
    }
}

fn cmd_gen(args: &GenArgs, seed: u64) -> CmdResult {
    let field = PrimeField::new(args.modulus)?;
    let ensemble = match args.ensemble {
        EnsembleKind::Er => Ensemble::Lambda {
            left: args.left,
            right: args.right,
            lambda: args
                .lambda
                .ok_or_else(|| anyhow!("--lambda is required for --ensemble er"))?,
        },
        EnsembleKind::Deg => Ensemble::Bounded {
            left: args.left,
            right: args.right,
            k: args.k.ok_or_else(|| anyhow!("--k is required for --ensemble deg"))?,
        },
    };
    let mut rng = stream_rng(seed, 0);
    let pruned = ensemble.sample(&mut rng)?;
    let graph = pruned.graph;
    if (graph.left_count(), graph.right_count()) != (args.left, args.right) {
        log::info!(
            "pruned isolated vertices: {}x{} -> {}x{}",
            args.left,
            args.right,
            graph.left_count(),
            graph.right_count()
        );
    }
    let dims = Dims {
        alpha: args.alpha,
        beta: args.beta,
        gamma: args.gamma,
    };
    let matrices = args.matrices.then(|| random_inputs(&field, &graph, dims, &mut rng));
    let inst = Instance {
        field,
        graph,
        dims,
        matrices,
    };
    write_file(&args.out, &to_json(&InstanceFile::from_instance(&inst))?)?;
    println!(
        "wrote {}: L_A={} L_B={} |S|={}",
        args.out.display(),
        inst.graph.left_count(),
        inst.graph.right_count(),
        inst.graph.edge_count()
    );
    Ok(())
}

fn choose_assignment(inst: &Instance, args: &PlanArgs) -> anyhow::Result<Assignment> {
    let g = &inst.graph;
    Ok(match args.scheme {
        Scheme::T1 => t1_assignment(g),
        Scheme::T2 => t2_assignment(g, T2Side::Best, args.budget),
        Scheme::T2Left => t2_assignment(g, T2Side::Left, args.budget),
        Scheme::T2Right => t2_assignment(g, T2Side::Right, args.budget),
        Scheme::Single => single_group_assignment(g, args.budget),
        Scheme::Custom => {
            let path = args
                .assignment
                .as_ref()
                .ok_or_else(|| anyhow!("--scheme custom needs --assignment"))?;
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            from_json::<PlanFile>(&text)?.assignment()?
        }
    })
}

fn cmd_plan(args: &PlanArgs) -> CmdResult {
    let inst = read_instance(&args.instance)?;
    let asg = choose_assignment(&inst, args)?;
    let fcc = args.fcc;
    let tensor = fcsa::codec::BilinearTensor::build(fcc.tensor.into(), fcc.m, fcc.p, fcc.n)?;
    let params = FccParams {
        m: fcc.m,
        p: fcc.p,
        n: fcc.n,
        rho: fcc.rho,
        rank: tensor.rank(),
    };
    let report = asg.threshold(&inst.graph, params)?;
    let workers = args.workers.unwrap_or(report.threshold);
    let config = PlanConfig {
        workers,
        m: fcc.m,
        p: fcc.p,
        n: fcc.n,
        rho: fcc.rho,
        tensor: fcc.tensor.into(),
    };
    let plan = make_plan(&inst.graph, &asg, inst.dims, config, inst.field)?;
    let g = &inst.graph;
    println!(
        "R={}, lower={}, baseline={}",
        plan.threshold(),
        lower_bound(g, fcc.m, fcc.n),
        g.baseline_thresholds().combined
    );
    println!(
        "groups={} rational_terms={} polynomial_terms={} K={} rank={}",
        asg.tasks.len(),
        report.rational_terms,
        report.polynomial_terms,
        workers,
        params.rank
    );
    let c = report.costs(inst.dims, g, workers);
    println!(
        "upload_A={} upload_B={} download={} worker_ops={}",
        c.upload_a, c.upload_b, c.download, c.worker_ops
    );
    println!(
        "encode_A~{:.3e} encode_B~{:.3e} decode~{:.3e}",
        c.encode_a_ops, c.encode_b_ops, c.decode_ops
    );
    if let Some(out) = &args.out {
        write_file(out, &to_json(&PlanFile::from_plan(&plan))?)?;
    }
    Ok(())
}

fn report_subsets(rep: &SubsetReport) -> CmdResult {
    println!("subsets={} failures={}", rep.subsets, rep.failures);
    match &rep.first_failure {
        None => Ok(()),
        Some(ws) => {
            let list: Vec<String> = ws.iter().map(|w| (w + 1).to_string()).collect();
            Err(Failure::Check(format!(
                "decode failed for workers {{{}}}",
                list.join(",")
            )))
        }
    }
}

fn cmd_verify(args: &VerifyArgs, seed: u64) -> CmdResult {
    let inst = read_instance(&args.instance)?;
    let plan = read_plan(&args.plan, &inst, args.workers)?;
    let (a, b) = inputs_for(&inst, seed);
    if let Some(dir) = &args.dump_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for share in fcsa::codec::encode(&plan, &a, &b)? {
            let res = fcsa::codec::worker_compute(plan.field(), &share)?;
            let k = share.worker + 1;
            write_file(
                &dir.join(format!("share_{k}.json")),
                &to_json(&ShareFile::from_share(&share))?,
            )?;
            write_file(
                &dir.join(format!("result_{k}.json")),
                &to_json(&ResultFile::from_result(&res))?,
            )?;
        }
    }
    let inputs = TrialInputs::prepare(&plan, &a, &b)?;
    println!("R={} K={}", plan.threshold(), plan.workers());
    let rep = match args.subsets {
        SubsetMode::All => verify_all_subsets(&plan, &inputs)?,
        SubsetMode::Sampled => verify_sampled_subsets(&plan, &inputs, args.samples, seed)?,
    };
    report_subsets(&rep)
}

fn cmd_simulate(args: &SimulateArgs, seed: u64) -> CmdResult {
    let inst = read_instance(&args.instance)?;
    let plan = read_plan(&args.plan, &inst, args.workers)?;
    let model = match (args.erasures, args.iid) {
        (Some(s), None) => StragglerModel::Erasures(s),
        (None, Some(e)) => StragglerModel::Iid(e),
        _ => return Err(anyhow!("give exactly one of --erasures or --iid").into()),
    };
    let (a, b) = inputs_for(&inst, seed);
    let inputs = TrialInputs::prepare(&plan, &a, &b)?;
    let (mut ok, mut short, mut bad) = (0u64, 0u64, 0u64);
    for t in 0..args.trials {
        match run_trial(&plan, &inputs, model, fcsa::seed::derive_seed(seed, t))? {
            TrialOutcome::Success { .. } => ok += 1,
            TrialOutcome::Insufficient { .. } => short += 1,
            TrialOutcome::Mismatch { .. } => bad += 1,
        }
    }
    println!(
        "R={} K={} trials={} success={} insufficient={} mismatch={}",
        plan.threshold(),
        plan.workers(),
        args.trials,
        ok,
        short,
        bad
    );
    if bad > 0 {
        return Err(Failure::Check(format!("{bad} trials decoded incorrectly")));
    }
    Ok(())
}

fn sweep_grid(args: &SweepArgs) -> Vec<Ensemble> {
    if args.lambdas.is_none() && args.ks.is_none() && args.k_left.is_none() {
        return default_grid()
            .into_iter()
            .map(|e| match e {
                Ensemble::Lambda { lambda, .. } => Ensemble::Lambda {
                    left: args.lambda_left,
                    right: args.right,
                    lambda,
                },
                Ensemble::Bounded { left, k, .. } => Ensemble::Bounded {
                    left,
                    right: args.right,
                    k,
                },
            })
            .collect();
    }
    let mut grid: Vec<Ensemble> = args
        .lambdas
        .iter()
        .flatten()
        .map(|&lambda| Ensemble::Lambda {
            left: args.lambda_left,
            right: args.right,
            lambda,
        })
        .collect();
    let ks = args.ks.clone().unwrap_or_else(|| (1..=5).collect());
    let lefts = args.k_left.clone().unwrap_or_else(|| vec![5, 10, 15]);
    if args.ks.is_some() || args.k_left.is_some() {
        for &left in &lefts {
            for &k in &ks {
                grid.push(Ensemble::Bounded {
                    left,
                    right: args.right,
                    k,
                });
            }
        }
    }
    grid
}

fn cmd_sweep(args: &SweepArgs, seed: u64) -> CmdResult {
    let grid = sweep_grid(args);
    if grid.is_empty() {
        return Err(anyhow!("empty sweep grid").into());
    }
    let config = SweepConfig {
        trials: args.trials,
        seed,
        search_budget: args.budget,
        with_codec: args.with_codec,
    };
    let mut records = Vec::with_capacity(grid.len());
    let mut codec_failures = 0;
    for point in &grid {
        let rec = fcsa::simulator::sweep_point(point, &config)?;
        println!(
            "{point}: mean|S|={:.3} G_T1={:.4} G_T2={:.4} baseline={:.4}",
            rec.mean_S, rec.G_T1, rec.G_T2, rec.baseline_ratio
        );
        if args.with_codec {
            println!("  codec checks={} failures={}", rec.codec_checks, rec.codec_failures);
        }
        codec_failures += rec.codec_failures;
        records.push(rec);
    }
    let file = fs::File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_csv(&records, file)?;
    if codec_failures > 0 {
        return Err(Failure::Check(format!("{codec_failures} codec spot checks failed")));
    }
    Ok(())
}

fn cmd_bound(args: &BoundArgs) -> CmdResult {
    let inst = read_instance(&args.instance)?;
    let g = &inst.graph;
    let base = g.baseline_thresholds();
    let t2 = t2_assignment(g, T2Side::Best, args.budget).threshold(g, FccParams::BASE)?;
    println!("|S|={} L_A={} L_B={}", g.edge_count(), g.left_count(), g.right_count());
    println!("lower={} (m={}, n={})", lower_bound(g, args.m, args.n), args.m, args.n);
    println!(
        "baseline_poly={} baseline_batch={} baseline={}",
        base.poly, base.batch, base.combined
    );
    println!("R_T1={} R_T2={}", t1_threshold(g, FccParams::BASE), t2.threshold);
    Ok(())
}

fn run(cli: &Cli) -> CmdResult {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| anyhow!("thread pool: {e}"))?;
    }
    match &cli.command {
        Command::Gen(a) => cmd_gen(a, cli.seed),
        Command::Plan(a) => cmd_plan(a),
        Command::Verify(a) => cmd_verify(a, cli.seed),
        Command::Simulate(a) => cmd_simulate(a, cli.seed),
        Command::Sweep(a) => cmd_sweep(a, cli.seed),
        Command::Bound(a) => cmd_bound(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
