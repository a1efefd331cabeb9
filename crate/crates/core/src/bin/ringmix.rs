use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::json;

use ringmix_core::error::{Error, Result};
use ringmix_core::graph::{from_spec, InstanceSpec, PerturbedCycle};
use ringmix_core::harness::{
    self, canonical_export, heatmap_csv, normalized_ratios, quantile, sorted_scaled, CampaignConfig,
    PositionMode, Store,
};
use ringmix_core::kernel::{dense_matrix, WalkParams};
use ringmix_core::mixing::{distance_profile, ProfileOptions, StartSet};
use ringmix_core::{rng, spread, walker};

#[derive(Parser)]
#[command(name = "ringmix", version, about = "Mixing of non-reversible walks on cycles with random chords")]
struct Cli {
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Output file (stdout when omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(flatten)]
    walk: Walk,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Walk {
    #[arg(long, global = true, default_value_t = 0.5)]
    p: f64,
    #[arg(long, global = true, default_value_t = 0.25)]
    q: f64,
    #[arg(long, global = true, default_value_t = 0.25)]
    a: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Jsonl,
    Csv,
}

#[derive(Args)]
struct InstanceArgs {
    /// `n=.. k=.. seed=..`, `n=.. edges=u-v,..`, or a canonical line.
    #[arg(long)]
    instance: String,
}

impl InstanceArgs {
    fn graph(&self) -> Result<PerturbedCycle> {
        let spec: InstanceSpec = self.instance.parse()?;
        from_spec(&spec)
    }
}

#[derive(Args)]
struct CampaignArgs {
    #[arg(long, default_value_t = 0.25)]
    eps: f64,
    #[arg(long, default_value = "single:0")]
    start: StartSet,
    #[arg(long, alias = "tmax")]
    t_max: Option<u64>,
    /// Append-only record store; rerunning resumes it.
    #[arg(long)]
    store: PathBuf,
    /// Stop after this many new records.
    #[arg(long)]
    limit: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build an instance and print its canonical form.
    Build(InstanceArgs),
    /// Exact distance-to-uniform profile and mixing times.
    Mix {
        #[command(flatten)]
        inst: InstanceArgs,
        #[arg(long, value_delimiter = ',', default_value = "0.25")]
        eps: Vec<f64>,
        /// all | hubs | single:V (default: all up to n=512, else single:0)
        #[arg(long)]
        starts: Option<StartSet>,
        #[arg(long, alias = "tmax")]
        t_max: Option<u64>,
        #[arg(long)]
        record_every: Option<u64>,
        /// Write the recorded profile as CSV `t,d`; `--out` does the same here,
        /// the summary always goes to stdout.
        #[arg(long)]
        profile: Option<PathBuf>,
    },
    /// Simulate tracks and emit one JSON object per trajectory.
    Track {
        #[command(flatten)]
        inst: InstanceArgs,
        #[arg(long = "L")]
        travel: u64,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        x0: usize,
    },
    /// Closeness and gaps of the modular map over uniform random lengths.
    Spread {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        /// Refuse composite n instead of skipping the exact expectation.
        #[arg(long)]
        prime_only: bool,
    },
    /// Heatmap over the lengths of two edges.
    SweepLengths {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        step: usize,
        #[command(flatten)]
        camp: CampaignArgs,
    },
    /// Heatmap over the positions of edges with fixed lengths.
    SweepPositions {
        #[arg(long)]
        n: usize,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        lengths: Vec<i64>,
        #[arg(long, conflicts_with = "random")]
        grid_step: Option<usize>,
        #[arg(long)]
        random: Option<usize>,
        #[command(flatten)]
        camp: CampaignArgs,
    },
    /// Sorted scaled curves of full length sweeps, normalized by a reference n.
    Sorted {
        #[arg(long, value_delimiter = ',')]
        ns: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        step: usize,
        /// Defaults to the smallest n.
        #[arg(long)]
        reference: Option<usize>,
        #[command(flatten)]
        camp: CampaignArgs,
    },
    /// Median mixing time per n and the fitted exponent.
    Exponent {
        #[arg(long)]
        k: usize,
        #[arg(long, value_delimiter = ',')]
        ns: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        instances: usize,
        #[command(flatten)]
        camp: CampaignArgs,
    },
    /// Quick self-checks of the kernel, the mixing computation and closed forms.
    Verify {
        #[arg(long, default_value_t = 20)]
        instances: usize,
    },
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn campaign_config(cli: &Cli, camp: &CampaignArgs) -> Result<CampaignConfig> {
    let w = WalkParams::new(cli.walk.p, cli.walk.q, cli.walk.a)?;
    let mut cfg = CampaignConfig::new(w, cli.seed);
    cfg.eps = camp.eps;
    cfg.start = camp.start;
    cfg.t_max = camp.t_max;
    cfg.threads = cli.threads;
    cfg.validate()?;
    Ok(cfg)
}

fn open_store(camp: &CampaignArgs) -> Result<Store> {
    let (store, report) = Store::open(&camp.store)?;
    if let Some((line, text)) = report.truncated {
        eprintln!(
            "store {}: dropped corrupted trailing line {line} ({} bytes), kept {} records",
            camp.store.display(),
            text.len(),
            report.records
        );
    }
    Ok(store)
}

fn emit_sweep(cli: &Cli, store: &Store) -> Result<()> {
    let mut w = sink(&cli.out)?;
    match cli.format.unwrap_or(Format::Csv) {
        Format::Csv => w.write_all(heatmap_csv(store.records()).as_bytes())?,
        Format::Jsonl => w.write_all(canonical_export(store.records())?.as_bytes())?,
    }
    w.flush()?;
    Ok(())
}

fn run(cli: &Cli) -> Result<ExitCode> {
    if cli.threads == 0 {
        return Err(Error::Config("threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))?;
    let params = || WalkParams::new(cli.walk.p, cli.walk.q, cli.walk.a);
    match &cli.cmd {
        Cmd::Build(inst) => {
            let g = inst.graph()?;
            let mut w = sink(&cli.out)?;
            let rec = json!({
                "canonical": g.to_string(),
                "n": g.n(),
                "k": g.k(),
                "hubs": g.hubs(),
                "edges": g.edges().iter().map(|&(a, b)| (g.hubs()[a], g.hubs()[b])).collect::<Vec<_>>(),
                "lengths": g.lengths(),
                "arcs": g.arcs(),
                "b1": g.check_b1(None),
            });
            writeln!(w, "{rec}")?;
            w.flush()?;
        }
        Cmd::Mix { inst, eps, starts, t_max, record_every, profile } => {
            let g = inst.graph()?;
            let starts = starts.unwrap_or_else(|| StartSet::default_for(g.n()));
            let opts = ProfileOptions {
                t_max: *t_max,
                record_every: *record_every,
                eps: eps.clone(),
            };
            let prof = distance_profile(&g, &params()?, starts, &opts)?;
            if let Some(path) = profile.as_ref().or(cli.out.as_ref()) {
                let mut f = BufWriter::new(File::create(path)?);
                writeln!(f, "t,d")?;
                for (t, d) in &prof.points {
                    writeln!(f, "{t},{d:e}")?;
                }
                f.flush()?;
            }
            let mut w = sink(&None)?;
            if cli.format == Some(Format::Csv) {
                writeln!(w, "eps,t_mix")?;
                for (e, t) in &prof.t_mix {
                    writeln!(w, "{e},{}", t.map_or("nan".into(), |t| t.to_string()))?;
                }
            } else {
                let rec = json!({
                    "instance": prof.instance,
                    "starts": prof.starts,
                    "t_mix": prof.t_mix,
                    "last_t": prof.last_t,
                    "last_d": prof.last_d,
                    "max_increase": prof.max_increase,
                });
                writeln!(w, "{rec}")?;
            }
            w.flush()?;
        }
        Cmd::Track { inst, travel, trials, x0 } => {
            let g = inst.graph()?;
            let stats = walker::run_tracks(&g, &params()?, *x0, *travel, *trials, cli.seed)?;
            let mut w = sink(&cli.out)?;
            for s in stats {
                writeln!(w, "{}", serde_json::to_string(&s)?)?;
            }
            w.flush()?;
        }
        Cmd::Spread { n, k, m, rho, alpha, samples, prime_only } => {
            if *k == 0 {
                return Err(Error::Config("spread needs k >= 1".into()));
            }
            let prime = spread::is_prime(*n as u64);
            if *prime_only && !prime {
                return Err(Error::Config(format!("{n} is not prime")));
            }
            let m = m.unwrap_or_else(|| spread::default_m(*n, *k, *rho));
            let reports: Vec<spread::SpreadReport> = (0..*samples)
                .into_par_iter()
                .map(|i| {
                    let l = spread::sample_lengths(*n, *k, rng::derive(cli.seed, &[i as u64]));
                    spread::spread_report(&l, *n, m, *alpha)
                })
                .collect::<Result<_>>()?;
            let mean_hits =
                reports.iter().map(|r| r.window_hits as f64).sum::<f64>() / reports.len().max(1) as f64;
            let expected = if prime { Some(spread::expected_window_hits(*n, *k, m, *alpha)?) } else { None };
            let mut w = sink(&cli.out)?;
            if cli.format == Some(Format::Jsonl) {
                for r in &reports {
                    writeln!(w, "{}", serde_json::to_string(r)?)?;
                }
            } else {
                writeln!(w, "sample,lengths,s,min_distance,min_over_s,max_gap,max_gap_over_s,window_hits")?;
                for (i, r) in reports.iter().enumerate() {
                    let l: Vec<String> = r.lengths.iter().map(|x| x.to_string()).collect();
                    writeln!(
                        w,
                        "{i},{},{},{},{},{},{},{}",
                        l.join(" "),
                        r.s,
                        r.min_distance,
                        r.min_distance as f64 / r.s,
                        r.max_gap,
                        r.max_gap as f64 / r.s,
                        r.window_hits
                    )?;
                }
            }
            w.flush()?;
            eprintln!(
                "{}",
                json!({"n": n, "k": k, "m": m, "alpha": alpha, "samples": samples,
                       "mean_window_hits": mean_hits, "expected_window_hits": expected})
            );
        }
        Cmd::SweepLengths { n, step, camp } => {
            let cfg = campaign_config(cli, camp)?;
            let mut store = open_store(camp)?;
            let s = harness::sweep_lengths(*n, *step, &cfg, &mut store, camp.limit)?;
            eprintln!("{}", serde_json::to_string(&s)?);
            emit_sweep(cli, &store)?;
        }
        Cmd::SweepPositions { n, lengths, grid_step, random, camp } => {
            let cfg = campaign_config(cli, camp)?;
            let mode = match (grid_step, random) {
                (_, Some(c)) => PositionMode::Random { count: *c },
                (Some(s), None) => PositionMode::Grid { step: *s },
                (None, None) => PositionMode::Grid { step: 1 },
            };
            let mut store = open_store(camp)?;
            let s = harness::sweep_positions(*n, lengths, mode, &cfg, &mut store, camp.limit)?;
            eprintln!("{}", serde_json::to_string(&s)?);
            emit_sweep(cli, &store)?;
        }
        Cmd::Sorted { ns, step, reference, camp } => {
            if ns.is_empty() {
                return Err(Error::Config("need at least one n".into()));
            }
            let cfg = campaign_config(cli, camp)?;
            let mut store = open_store(camp)?;
            for &n in ns {
                let s = harness::sweep_lengths(n, *step, &cfg, &mut store, camp.limit)?;
                eprintln!("n={n} {}", serde_json::to_string(&s)?);
            }
            let r = reference.unwrap_or_else(|| *ns.iter().min().unwrap());
            let refc = sorted_scaled(store.records(), r, 2, None);
            if refc.values.is_empty() {
                return Err(Error::Config(format!("no records for reference n={r}")));
            }
            let qs: Vec<f64> = (1..=20).map(|i| i as f64 * 0.05).collect();
            let mut w = sink(&cli.out)?;
            writeln!(w, "n,q,scaled,normalized")?;
            for &n in ns {
                let c = sorted_scaled(store.records(), n, 2, None);
                if c.values.is_empty() {
                    continue;
                }
                for (q, ratio) in normalized_ratios(&c, &refc, &qs) {
                    writeln!(w, "{n},{q:.2},{},{ratio}", quantile(&c.values, q))?;
                }
            }
            w.flush()?;
        }
        Cmd::Exponent { k, ns, instances, camp } => {
            let cfg = campaign_config(cli, camp)?;
            let mut store = open_store(camp)?;
            let s = harness::exponent_campaign(*k, ns, *instances, &cfg, &mut store)?;
            let mut w = sink(&cli.out)?;
            writeln!(w, "{}", serde_json::to_string(&s)?)?;
            w.flush()?;
        }
        Cmd::Verify { instances } => {
            if !verify(*instances, cli.seed)? {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn verify(instances: usize, seed: u64) -> Result<bool> {
    let mut ok = true;
    let mut line = |name: &str, pass: bool, detail: String| {
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        ok &= pass;
    };
    let w = WalkParams::default();

    let mut worst = 0.0f64;
    for i in 0..instances {
        let s = rng::derive(seed, &[1, i as u64]);
        let g = ringmix_core::sample_instance(20 + (s % 200) as usize, 1 + (s % 3) as usize, s)?;
        let m = dense_matrix(&g, &w)?;
        for v in 0..g.n() {
            worst = worst.max((m[v].iter().sum::<f64>() - 1.0).abs());
            worst = worst.max((m.iter().map(|r| r[v]).sum::<f64>() - 1.0).abs());
        }
    }
    line("doubly stochastic", worst < 1e-12, format!("max deviation {worst:.2e}"));

    let mut worst = 0.0f64;
    for i in 0..instances {
        let s = rng::derive(seed, &[2, i as u64]);
        let g = ringmix_core::sample_instance(4 + (s % 13) as usize, 1 + (s % 2) as usize, s)?;
        let m = dense_matrix(&g, &w)?;
        let n = g.n();
        let opts = ProfileOptions { t_max: Some(60), record_every: Some(1), eps: vec![] };
        let prof = ringmix_core::mixing::evolve_profile(
            &g,
            &w,
            (0..n).map(|v| ringmix_core::DistVector::point_mass(n, v)).collect(),
            "all",
            &opts,
        )?;
        let mut pow: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| (i == j) as u8 as f64).collect()).collect();
        for (i, &(t, d)) in prof.points.iter().enumerate() {
            assert_eq!(t, i as u64, "profile recorded every step");
            let dense = pow
                .iter()
                .map(|r| 0.5 * r.iter().map(|x| (x - 1.0 / n as f64).abs()).sum::<f64>())
                .fold(0.0, f64::max);
            worst = worst.max((dense - d).abs());
            pow = pow
                .iter()
                .map(|r| (0..n).map(|j| (0..n).map(|l| r[l] * m[l][j]).sum()).collect())
                .collect();
        }
    }
    line("stepwise vs dense powering", worst < 1e-10, format!("max difference {worst:.2e}"));

    let (pg, pj) = walker::pg_closed_form(&w)?;
    let (og, _) = walker::absorption_oracle(&w, 200)?;
    line(
        "continuation probabilities",
        (pg - 2.0 / 3.0).abs() < 1e-15 && (og - pg).abs() < 1e-8,
        format!("closed form ({pg:.6}, {pj:.6}), absorption {og:.10}"),
    );
    let f = walker::gambler_facts(&w)?;
    let (mean, se) = walker::simulate_tau1(&w, 20_000, seed)?;
    line(
        "hitting time of +1",
        (mean - f.expected_tau1).abs() < 4.0 * se,
        format!("mean {mean:.4} +- {se:.4}, expected {}", f.expected_tau1),
    );
    Ok(ok)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Campaign { .. } => 3,
        Error::Io(_) | Error::Json(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("ringmix: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
