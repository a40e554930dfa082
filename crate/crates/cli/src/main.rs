use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cfoutlier::clustering::Algorithm;
use cfoutlier::ingest::{AttackKind, Format};
use cfoutlier::pipeline::{self, InjectConfig, PipelineConfig, Run, Stage};
use cfoutlier::recommend::SimilaritySource;

/// Outlier-aware user-based collaborative filtering over MovieLens data.
#[derive(Parser)]
#[command(name = "cfoutlier", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Overrides,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage.
    Run,
    /// Parse and split the dataset, inject profiles, and report counts.
    IngestCheck,
    /// Pairwise user distances.
    Distances,
    /// Cluster the users.
    Cluster {
        /// Restrict to these algorithms (repeatable).
        #[arg(long = "algorithm", value_enum)]
        algorithms: Vec<AlgorithmArg>,
    },
    /// Co-association matrix.
    Ensemble,
    /// Outlier report.
    Detect,
    /// Predictions and top-N lists.
    Recommend,
    /// Metrics from the dumped recommendations.
    Evaluate,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgorithmArg {
    Kmeans,
    Kmedoids,
    Dbscan,
    Divisive,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Kmeans => Algorithm::KMeans,
            AlgorithmArg::Kmedoids => Algorithm::KMedoids,
            AlgorithmArg::Dbscan => Algorithm::Dbscan,
            AlgorithmArg::Divisive => Algorithm::Divisive,
        }
    }
}

#[derive(Args)]
struct Overrides {
    /// TOML config file. Flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Ratings file; required without --config.
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,
    /// Ratings layout: ml100k or ml1m.
    #[arg(long, global = true)]
    format: Option<Format>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cluster count for k-means, k-medoids and divisive.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// DBSCAN radius.
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// DBSCAN core-point threshold, counting the point itself.
    #[arg(long = "min-pts", global = true)]
    min_pts: Option<usize>,
    /// Largest cluster size counted as tiny.
    #[arg(long = "tiny-size", global = true)]
    tiny_size: Option<usize>,
    /// Neighborhood sizes: `10,20,40` or `10-50:10`.
    #[arg(long, global = true, value_parser = parse_range)]
    neighbors: Option<Sweep>,
    /// List lengths: `5,10,20` or `5-50:5`.
    #[arg(long = "topn-range", global = true, value_parser = parse_range)]
    topn_range: Option<Sweep>,
    /// Attack profiles: `KIND:COUNT[:FILLER[:TARGET]]`, where COUNT is a
    /// number of profiles or a percentage of users such as `5%`.
    #[arg(long, global = true, value_parser = parse_inject)]
    inject: Option<InjectConfig>,
    /// Output directory; required without --config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Clone)]
struct Sweep(Vec<usize>);

fn parse_range(s: &str) -> Result<Sweep, String> {
    let num = |x: &str| x.trim().parse::<usize>().map_err(|_| format!("invalid number `{x}`"));
    let values: Vec<usize> = match s.split_once('-') {
        Some((start, rest)) => {
            let (end, step) = rest.split_once(':').unwrap_or((rest, "1"));
            let (start, end, step) = (num(start)?, num(end)?, num(step)?);
            if step == 0 || start > end {
                return Err(format!("empty range `{s}`"));
            }
            (start..=end).step_by(step).collect()
        }
        None => s.split(',').map(num).collect::<Result<_, _>>()?,
    };
    if values.contains(&0) {
        return Err("values must be positive".into());
    }
    Ok(Sweep(values))
}

fn parse_inject(s: &str) -> Result<InjectConfig, String> {
    let mut parts = s.split(':');
    let kind: AttackKind = parts
        .next()
        .unwrap_or_default()
        .parse()
        .map_err(|e: cfoutlier::Error| e.to_string())?;
    let count = parts.next().ok_or("missing profile count")?;
    let (n_profiles, profile_fraction) = match count.strip_suffix('%') {
        Some(pct) => {
            let p: f64 = pct.parse().map_err(|_| format!("invalid percentage `{count}`"))?;
            (None, Some(p / 100.0))
        }
        None => (Some(count.parse().map_err(|_| format!("invalid count `{count}`"))?), None),
    };
    let filler_fraction = match parts.next() {
        Some(f) => f.parse().map_err(|_| format!("invalid filler fraction `{f}`"))?,
        None => 0.05,
    };
    let target_item = parts
        .next()
        .map(|t| t.parse().map_err(|_| format!("invalid target item `{t}`")))
        .transpose()?;
    if parts.next().is_some() {
        return Err("too many fields".into());
    }
    Ok(InjectConfig {
        kind,
        n_profiles,
        profile_fraction,
        filler_fraction,
        target_item,
        seed: None,
    })
}

fn build_config(o: &Overrides) -> Result<PipelineConfig, String> {
    let mut cfg = match &o.config {
        Some(path) => PipelineConfig::from_file(path).map_err(|e| e.to_string())?,
        None => {
            let dataset = o.dataset.clone().ok_or("--dataset is required without --config")?;
            let out = o.out.clone().ok_or("--out is required without --config")?;
            PipelineConfig::new(dataset, o.format.unwrap_or(Format::Ml100kTab), out)
        }
    };
    if let Some(d) = &o.dataset {
        cfg.dataset.path = d.clone();
    }
    if let Some(f) = o.format {
        cfg.dataset.format = f;
    }
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if let Some(k) = o.k {
        cfg.clustering.k = Some(k);
    }
    if let Some(e) = o.eps {
        cfg.clustering.eps = Some(e);
    }
    if let Some(m) = o.min_pts {
        cfg.clustering.min_pts = Some(m);
    }
    if let Some(t) = o.tiny_size {
        cfg.ensemble.tiny_cluster_max_size = t;
    }
    if let Some(n) = &o.neighbors {
        cfg.recommend.neighbors = n.0.clone();
    }
    if let Some(n) = &o.topn_range {
        cfg.recommend.top_n = n.0.clone();
    }
    if let Some(i) = o.inject {
        cfg.inject = Some(i);
    }
    if let Some(out) = &o.out {
        cfg.out_dir = out.clone();
    }
    if let Some(t) = o.threads {
        cfg.threads = Some(t);
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match build_config(&cli.opts) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(n) = cfg.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    if let Command::Cluster { algorithms } = &cli.command {
        if !algorithms.is_empty() {
            let chosen: Vec<Algorithm> = algorithms.iter().map(|&a| a.into()).collect();
            cfg.clustering.algorithms = chosen.clone();
            cfg.recommend.methods.retain(|m| match m {
                SimilaritySource::SingleAlgorithm(a) => chosen.contains(a),
                _ => true,
            });
        }
    }
    match execute(&cli.command, &cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            pipeline::mark_incomplete(&cfg.out_dir, &e);
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable")
}

fn execute(command: &Command, cfg: &PipelineConfig) -> cfoutlier::Result<()> {
    let mut run = Run::new(cfg);
    match command {
        Command::Run => {
            let summary = pipeline::run_pipeline(cfg)?;
            println!("{}", json(&summary.detection));
            for report in &summary.metrics {
                report.write_csv(std::io::stdout().lock()).ok();
            }
        }
        Command::IngestCheck => {
            let summary = run.ingest()?;
            println!("{}", json(&summary));
        }
        Command::Distances => run.stage(Stage::Distances)?,
        Command::Cluster { .. } => {
            let records = run.cluster()?;
            println!("{}", json(&records));
        }
        Command::Ensemble => run.stage(Stage::Ensemble)?,
        Command::Detect => {
            let report = run.detect()?;
            let flagged = report.users.iter().filter(|u| u.status.is_outlier()).count();
            println!("{flagged} of {} users flagged", report.users.len());
        }
        Command::Recommend => run.stage(Stage::Recommend)?,
        Command::Evaluate => {
            for report in run.evaluate()? {
                report.write_csv(std::io::stdout().lock()).ok();
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweeps() {
        assert_eq!(parse_range("10,20,40").unwrap().0, vec![10, 20, 40]);
        assert_eq!(parse_range("10-50:20").unwrap().0, vec![10, 30, 50]);
        assert_eq!(parse_range("3-5").unwrap().0, vec![3, 4, 5]);
        assert!(parse_range("5-3").is_err());
        assert!(parse_range("0,1").is_err());
        assert!(parse_range("1-4:0").is_err());
    }

    #[test]
    fn inject_specs() {
        let c = parse_inject("random:5%").unwrap();
        assert_eq!(c.kind, AttackKind::Random);
        assert_eq!((c.n_profiles, c.profile_fraction, c.filler_fraction), (None, Some(0.05), 0.05));
        let c = parse_inject("push:30:0.1:50").unwrap();
        assert_eq!((c.n_profiles, c.filler_fraction, c.target_item), (Some(30), 0.1, Some(50)));
        assert!(parse_inject("flood:3").is_err());
        assert!(parse_inject("nuke").is_err());
        assert!(parse_inject("nuke:1:0.1:2:3").is_err());
    }

    #[test]
    fn the_cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
