use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use skelmap::diagram_metrics::{bottleneck, wasserstein};
use skelmap::embedding::{
    auto_landmark_count, classical_mds, isomap_on_graph, l_isomap_on_graph, projection_search, random_landmarks,
    EmbeddingMethod, ProjectionOptions, RankMetric,
};
use skelmap::geometry::{build_knn_graph, delay_embedding, generate_shape, maxmin_subsample, DistanceMatrix, PointCloud, ShapeKind, ShapeSpec};
use skelmap::io;
use skelmap::persistence::{vr_persistence, PersistenceDiagram, ScaleCap};
use skelmap::quality::{quality_report, rv_reference, write_csv_summary, QualityOptions};
use skelmap::skeleton::{build_skeleton, homological_l_isomap, BaseStrategy, Eps, Skeleton, SkeletonParams};
use skelmap::tearing::{rank_cuts, tear_and_embed, Candidates, CutSpec, LocalityRadius, TearOptions};
use skelmap_service::ServiceConfig;

use crate::error::{CliError, CliResult};

/// Homology-preserving dimensionality reduction experiments.
///
/// Point clouds are CSV files with one point per row (an optional header
/// row is skipped). JSON outputs are pretty-printed with sorted keys and go
/// to stdout unless `-o` is given. Set SKELMAP_THREADS to cap parallelism.
#[derive(Debug, Parser)]
#[command(name = "skelmap", version)]
pub struct Cli {
    /// Run seed; every random stage derives its own seed from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a synthetic shape into a point-cloud CSV.
    Generate {
        /// circle, torus, swiss_roll, swiss_roll_hole, figure_eight_bended,
        /// cylinder_holes(h), s_surface_holes(r,c), ring_chain(h).
        #[arg(long)]
        shape: ShapeKind,
        /// Number of points.
        #[arg(long)]
        n: usize,
        /// Standard deviation of Gaussian noise added to every coordinate.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Sliding-window embedding of a signal CSV (all numbers, row-major).
    DelayEmbed {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(long)]
        window: usize,
        #[arg(long, default_value_t = 1)]
        step: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Build the mapper skeleton of a cloud and write it as JSON.
    Skeleton {
        #[arg(short, long)]
        input: PathBuf,
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        skeleton: SkeletonArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Embed a cloud; writes the coordinates CSV plus a JSON sidecar.
    Embed {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        method: Method,
        #[command(flatten)]
        graph: GraphArgs,
        /// Target dimension.
        #[arg(long, default_value_t = 2)]
        d: usize,
        /// Landmark count for l-isomap-random (default ceil(sqrt(N))).
        #[arg(long)]
        landmarks: Option<usize>,
        /// Skeleton JSON for l-isomap-homology; built from the skeleton
        /// flags when absent.
        #[arg(long)]
        skeleton_file: Option<PathBuf>,
        #[command(flatten)]
        skeleton: SkeletonArgs,
        /// Skip the PCA re-orientation of landmark embeddings.
        #[arg(long)]
        no_pca: bool,
        /// Also write the quality report JSON here.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Persistence subsample size for the report.
        #[arg(long, default_value_t = 1024)]
        subsample: usize,
        /// Embedding CSV; the sidecar goes next to it with a .json extension.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Persistence diagrams (dimensions 0 and 1) of a cloud or embedding.
    Persistence {
        #[arg(short, long)]
        input: PathBuf,
        /// Maxmin subsample size; clouds this size or smaller are used whole.
        #[arg(long, default_value_t = 1024)]
        subsample: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Distance between two persistence diagrams; prints the value.
    Compare {
        first: PathBuf,
        second: PathBuf,
        #[arg(long, value_enum, default_value_t = Metric::Wasserstein)]
        metric: Metric,
        /// Order of the Wasserstein distance.
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        /// Homology dimension to compare. Defaults to 1, or to the only
        /// diagram when each file holds one.
        #[arg(long)]
        dim: Option<usize>,
    },
    /// Quality report (RV, WD0, WD1, PB1 before and after) of an embedding.
    Quality {
        #[arg(short, long)]
        input: PathBuf,
        /// Embedding CSV (its sidecar JSON is read when present).
        #[arg(short, long)]
        embedding: PathBuf,
        #[arg(long, default_value_t = 1024)]
        subsample: usize,
        /// Fixed persistence threshold instead of the widest-gap rule.
        #[arg(long)]
        threshold: Option<f64>,
        /// Also write a CSV summary (header plus one row) here.
        #[arg(long)]
        summary_csv: Option<PathBuf>,
        /// Row label in the CSV summary (default: embedding file name).
        #[arg(long)]
        label: Option<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Apply one cut, re-embed with Isomap and score the result.
    ///
    /// Exits with the disconnected code when the cut splits the graph; the
    /// result JSON is written first.
    Tear {
        #[arg(short, long)]
        input: PathBuf,
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        skeleton_file: Option<PathBuf>,
        #[command(flatten)]
        skeleton: SkeletonArgs,
        /// Skeleton edge as `u,v`.
        #[arg(long, value_parser = parse_edge)]
        edge: (usize, usize),
        /// Cut point position along the centroid segment.
        #[arg(long, default_value_t = 0.5)]
        t: f64,
        /// auto, global, or a positive radius.
        #[arg(long, default_value = "auto")]
        radius: LocalityRadius,
        #[command(flatten)]
        tear: TearArgs,
        /// Also write the torn embedding CSV here.
        #[arg(long)]
        embedding_out: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Rank the midpoint cut of every skeleton edge.
    TearRank {
        #[arg(short, long)]
        input: PathBuf,
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        skeleton_file: Option<PathBuf>,
        #[command(flatten)]
        skeleton: SkeletonArgs,
        #[command(flatten)]
        tear: TearArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Rank linear projections to 2-D by persistence distortion.
    ProjectSearch {
        #[arg(short, long)]
        input: PathBuf,
        /// Number of directions.
        #[arg(long, default_value_t = 200)]
        m: usize,
        /// wd1, wd1_then_wd0 or bottleneck.
        #[arg(long, default_value = "wd1")]
        metric: RankMetric,
        #[arg(long, default_value_t = 256)]
        subsample: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Start the HTTP service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        /// Persist sessions here and reload them at startup.
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// Serve the built UI from this directory.
        #[arg(long)]
        static_dir: Option<PathBuf>,
        /// Seconds before a slow request answers 202 with a job id.
        #[arg(long, default_value_t = 30.0)]
        timeout: f64,
        /// Allowed CORS origin (any when unset).
        #[arg(long)]
        cors_origin: Option<String>,
        /// Concurrent computations (default: available cores).
        #[arg(long)]
        workers: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Method {
    Mds,
    Isomap,
    LIsomapRandom,
    LIsomapHomology,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Metric {
    Wasserstein,
    Bottleneck,
}

#[derive(Debug, Args)]
struct GraphArgs {
    /// Neighbors per point in the kNN graph.
    #[arg(long, default_value_t = 10)]
    k: usize,
}

#[derive(Debug, Args)]
struct SkeletonArgs {
    /// Filter base point: extreme, barycenter or a point index.
    #[arg(long, default_value = "extreme")]
    base: BaseStrategy,
    /// Number of cover intervals.
    #[arg(long = "intervals", alias = "n", default_value_t = 10)]
    n: usize,
    /// Cover overlap fraction in (0, 1).
    #[arg(long, default_value_t = 0.3)]
    p: f64,
    /// DBSCAN radius, or auto.
    #[arg(long, default_value = "auto")]
    eps: Eps,
    #[arg(long, default_value_t = 5)]
    minpts: usize,
}

impl SkeletonArgs {
    fn params(&self) -> SkeletonParams {
        SkeletonParams { base: self.base, n: self.n, p: self.p, eps: self.eps, minpts: self.minpts }
    }
}

#[derive(Debug, Args)]
struct TearArgs {
    /// Dimension of the torn Isomap embeddings.
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = 256)]
    subsample: usize,
    /// Neighbors added to k before tearing.
    #[arg(long, default_value_t = 0)]
    extra_k: usize,
}

impl TearArgs {
    fn options(&self, seed: u64) -> TearOptions {
        TearOptions { d: self.d, subsample_size: self.subsample, seed: stage_seed(seed, "subsample"), extra_k: self.extra_k }
    }
}

fn parse_edge(s: &str) -> Result<(usize, usize), String> {
    let (u, v) = s.split_once(',').ok_or_else(|| format!("expected u,v, got {s:?}"))?;
    let parse = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("{x:?}: {e}"));
    Ok((parse(u)?, parse(v)?))
}

/// Seed for one pipeline stage. Generation uses the run seed itself so
/// `generate --seed 7` matches the service's generator with seed 7.
pub fn stage_seed(seed: u64, stage: &str) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in stage.bytes() {
        h = (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3);
    }
    // splitmix64 finalizer
    let mut z = seed ^ h;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn read_cloud(path: &Path) -> CliResult<PointCloud> {
    io::read_point_cloud_file(path).map_err(|e| CliError::at(path, e))
}

fn read_skeleton(path: &Path) -> CliResult<Skeleton> {
    io::read_json_file(path).map_err(|e| CliError::at(path, e))
}

fn write_text(output: Option<&Path>, text: &str) -> CliResult {
    match output {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::at(path, e.into())),
        None => {
            std::io::stdout().lock().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn write_json<T: Serialize + ?Sized>(output: Option<&Path>, value: &T) -> CliResult {
    write_text(output, &io::to_sorted_json(value)?)
}

fn write_cloud(output: Option<&Path>, cloud: &PointCloud) -> CliResult {
    match output {
        Some(path) => io::write_point_cloud_file(path, cloud).map_err(|e| CliError::at(path, e)),
        None => Ok(io::write_point_cloud(std::io::stdout().lock(), cloud)?),
    }
}

fn skeleton_for(
    cloud: &PointCloud,
    graph: &skelmap::geometry::NeighborhoodGraph,
    file: Option<&Path>,
    args: &SkeletonArgs,
) -> CliResult<Skeleton> {
    match file {
        Some(path) => {
            let s = read_skeleton(path)?;
            if s.filter.values.len() != cloud.len() {
                return Err(CliError::at(
                    path,
                    skelmap::Error::DimensionMismatch(format!(
                        "skeleton covers {} points, cloud has {}",
                        s.filter.values.len(),
                        cloud.len()
                    )),
                ));
            }
            Ok(s)
        }
        None => Ok(build_skeleton(cloud, graph, &args.params())?),
    }
}

fn subsampled_diagrams(cloud: &PointCloud, m: usize, seed: u64) -> CliResult<Vec<PersistenceDiagram>> {
    if m == 0 {
        return Err(skelmap::Error::InvalidParameter { name: "subsample", reason: "must be at least 1".into() }.into());
    }
    let points = if cloud.len() > m { cloud.select(&maxmin_subsample(cloud, m, seed)?)? } else { cloud.clone() };
    Ok(vr_persistence(&DistanceMatrix::euclidean(&points), 1, ScaleCap::Enclosing)?)
}

fn pick<'a>(diagrams: &'a [PersistenceDiagram], dim: Option<usize>, path: &Path) -> CliResult<&'a PersistenceDiagram> {
    match (dim, diagrams) {
        (None, [only]) => Ok(only),
        (dim, _) => io::select_diagram(diagrams, dim.unwrap_or(1)).map_err(|e| CliError::at(path, e)),
    }
}

pub fn run(cli: Cli) -> CliResult {
    let seed = cli.seed;
    match cli.command {
        Command::Generate { shape, n, noise, output } => {
            let cloud = generate_shape(&ShapeSpec::new(shape, n, noise), seed)?;
            write_cloud(output.as_deref(), &cloud)
        }
        Command::DelayEmbed { input, window, step, output } => {
            let file = std::fs::File::open(&input).map_err(|e| CliError::at(&input, e.into()))?;
            let signal = io::read_signal(file).map_err(|e| CliError::at(&input, e))?;
            write_cloud(output.as_deref(), &delay_embedding(&signal, window, step)?)
        }
        Command::Skeleton { input, graph, skeleton, output } => {
            let cloud = read_cloud(&input)?;
            let g = build_knn_graph(&cloud, graph.k)?;
            let s = build_skeleton(&cloud, &g, &skeleton.params())?;
            eprintln!("{} nodes, {} edges, cycle rank {}", s.nodes.len(), s.edges.len(), s.cycle_rank());
            write_json(output.as_deref(), &s)
        }
        Command::Embed { input, method, graph, d, landmarks, skeleton_file, skeleton, no_pca, report, subsample, output } => {
            let cloud = read_cloud(&input)?;
            let pca = !no_pca;
            let embedding = match method {
                Method::Mds => classical_mds(&DistanceMatrix::euclidean(&cloud), d)?,
                Method::Isomap => isomap_on_graph(&build_knn_graph(&cloud, graph.k)?, d)?,
                Method::LIsomapRandom => {
                    let g = build_knn_graph(&cloud, graph.k)?;
                    let count = landmarks.unwrap_or_else(|| auto_landmark_count(cloud.len()));
                    let s = stage_seed(seed, "landmarks");
                    let mut e = l_isomap_on_graph(&g, &random_landmarks(cloud.len(), count, s)?, d, pca)?;
                    e.params.seed = Some(s);
                    e
                }
                Method::LIsomapHomology => {
                    let g = build_knn_graph(&cloud, graph.k)?;
                    let s = skeleton_for(&cloud, &g, skeleton_file.as_deref(), &skeleton)?;
                    homological_l_isomap(&g, &s, d, pca)?
                }
            };
            debug_assert_ne!(embedding.method, EmbeddingMethod::LinearProjection);
            io::write_embedding_files(&output, &embedding).map_err(|e| CliError::at(&output, e))?;
            if let Some(path) = report {
                let options = QualityOptions { subsample_size: subsample, seed: stage_seed(seed, "subsample"), threshold: None };
                let r = quality_report(&cloud, &embedding, &rv_reference(&cloud, &embedding)?, &options)?;
                eprintln!("rv {:.4}, pb1 {} -> {}", r.rv, r.pb1_before, r.pb1_after);
                write_json(Some(&path), &r)?;
            }
            Ok(())
        }
        Command::Persistence { input, subsample, output } => {
            let cloud = read_cloud(&input)?;
            write_json(output.as_deref(), &subsampled_diagrams(&cloud, subsample, stage_seed(seed, "subsample"))?)
        }
        Command::Compare { first, second, metric, p, dim } => {
            let a = io::read_diagrams_file(&first).map_err(|e| CliError::at(&first, e))?;
            let b = io::read_diagrams_file(&second).map_err(|e| CliError::at(&second, e))?;
            let (a, b) = (pick(&a, dim, &first)?, pick(&b, dim, &second)?);
            if a.dim != b.dim {
                return Err(skelmap::Error::DimensionMismatch(format!("comparing dimension {} with {}", a.dim, b.dim)).into());
            }
            let value = match metric {
                Metric::Wasserstein => wasserstein(a, b, p)?.0,
                Metric::Bottleneck => bottleneck(a, b)?.0,
            };
            write_text(None, &format!("{value}\n"))
        }
        Command::Quality { input, embedding, subsample, threshold, summary_csv, label, output } => {
            let cloud = read_cloud(&input)?;
            let e = io::read_embedding_files(&embedding).map_err(|err| CliError::at(&embedding, err))?;
            let options = QualityOptions { subsample_size: subsample, seed: stage_seed(seed, "subsample"), threshold };
            let r = quality_report(&cloud, &e, &rv_reference(&cloud, &e)?, &options)?;
            if let Some(path) = summary_csv {
                let label = label.unwrap_or_else(|| embedding.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default());
                let file = std::fs::File::create(&path).map_err(|err| CliError::at(&path, err.into()))?;
                write_csv_summary(file, &[(label, r.clone())]).map_err(|err| CliError::at(&path, err))?;
            }
            write_json(output.as_deref(), &r)
        }
        Command::Tear { input, graph, skeleton_file, skeleton, edge, t, radius, tear, embedding_out, output } => {
            let cloud = read_cloud(&input)?;
            let g = build_knn_graph(&cloud, graph.k)?;
            let s = skeleton_for(&cloud, &g, skeleton_file.as_deref(), &skeleton)?;
            let cut = CutSpec { skeleton_edge: edge, t, locality_radius: radius };
            let result = tear_and_embed(&cloud, &g, &s, &cut, &tear.options(seed))?;
            write_json(output.as_deref(), &result)?;
            if let (Some(path), Some(e)) = (embedding_out, &result.embedding) {
                io::write_embedding_files(&path, e).map_err(|err| CliError::at(&path, err))?;
            }
            if !result.connected {
                return Err(CliError::CutDisconnects { component_sizes: result.component_sizes });
            }
            Ok(())
        }
        Command::TearRank { input, graph, skeleton_file, skeleton, tear, output } => {
            let cloud = read_cloud(&input)?;
            let g = build_knn_graph(&cloud, graph.k)?;
            let s = skeleton_for(&cloud, &g, skeleton_file.as_deref(), &skeleton)?;
            let ranked = rank_cuts(&cloud, &g, &s, &Candidates::AllEdges, &tear.options(seed))?;
            write_json(output.as_deref(), &ranked)
        }
        Command::ProjectSearch { input, m, metric, subsample, output } => {
            let cloud = read_cloud(&input)?;
            let options = ProjectionOptions { metric, subsample_size: subsample, seed: stage_seed(seed, "projection") };
            write_json(output.as_deref(), &projection_search(&cloud, m, &options)?)
        }
        Command::Serve { port, host, data_dir, static_dir, timeout, cors_origin, workers } => {
            if !(timeout.is_finite() && timeout >= 0.0) {
                return Err(CliError::Usage(format!("--timeout must be a non-negative number of seconds, got {timeout}")));
            }
            let mut config = ServiceConfig {
                timeout: Duration::from_secs_f64(timeout),
                data_dir,
                cors_origin,
                static_dir,
                ..Default::default()
            };
            if let Some(w) = workers {
                config.workers = w.max(1);
            }
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(skelmap_service::serve(SocketAddr::new(host, port), config))?;
            Ok(())
        }
    }
}
