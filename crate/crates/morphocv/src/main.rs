use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use morphocv::files::{
    analysis_outputs, collect_eval_pairs, load_depth, load_image, load_labels, load_sidecar,
    metrics_outputs, write_atomically, write_file_atomically,
};
use morphocv::pipeline::{
    analyze_2d, analyze_3d, evaluate_pairs, parse_thresholds, render_depth, AnalysisRequest,
    Segmenter,
};
use morphocv::service::{
    serve, ServiceConfig, DEFAULT_MAX_UPLOAD_MB, DEFAULT_PORT, DEFAULT_STORE_CAPACITY,
};
use morphocv::{AppError, Result};
use morphocv_core::depth::PipelineParams;
use morphocv_core::raster::Calibration;
use morphocv_core::render::encode_png;
use morphocv_core::segmentation::ThresholdParams;

#[derive(Parser)]
#[command(
    name = "morphocv",
    version,
    about = "Morphometry and volumetry from masks and depth maps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SegmenterArg {
    Threshold,
}

#[derive(clap::Args)]
struct Calib {
    /// Pixels per meter.
    #[arg(long, default_value_t = Calibration::DEFAULT_PPM)]
    ppm: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Per-instance 2D features from a label image.
    #[command(name = "analyze-2d")]
    Analyze2d {
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        sidecar: Option<PathBuf>,
        /// Background image for the overlay.
        #[arg(long)]
        image: Option<PathBuf>,
        #[command(flatten)]
        calib: Calib,
        #[arg(long)]
        out: PathBuf,
    },
    /// 2D and 3D features of the largest instance over a depth map.
    #[command(name = "analyze-3d")]
    Analyze3d {
        #[arg(long)]
        depth: PathBuf,
        #[arg(long, conflicts_with = "segmenter")]
        labels: Option<PathBuf>,
        #[arg(long, requires = "labels")]
        sidecar: Option<PathBuf>,
        /// Used when no label image is given.
        #[arg(long, value_enum)]
        segmenter: Option<SegmenterArg>,
        /// Meters above ground (threshold segmenter).
        #[arg(long, default_value_t = ThresholdParams::DEFAULT_MIN_HEIGHT_M)]
        min_height: f64,
        /// Pixels (threshold segmenter).
        #[arg(long, default_value_t = ThresholdParams::DEFAULT_MIN_AREA_PX)]
        min_area: usize,
        #[command(flatten)]
        calib: Calib,
        /// Camera to ground distance, meters.
        #[arg(long, default_value_t = Calibration::DEFAULT_CAMERA_TO_GROUND_M)]
        camera_distance: f64,
        /// Gaussian smoothing sigma in pixels; 0 disables smoothing.
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Average precision of predicted against ground-truth label images.
    Evaluate {
        /// Label PNG or directory of label PNGs.
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, default_value = "0.5,0.75")]
        iou: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Depth heatmap PNG.
    Render {
        #[arg(long)]
        depth: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// HTTP API and static UI.
    Serve {
        #[arg(long, env = "MORPHOCV_PORT", default_value_t = DEFAULT_PORT)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        #[arg(long)]
        assets: Option<PathBuf>,
        #[arg(long, env = "MORPHOCV_MAX_UPLOAD_MB", default_value_t = DEFAULT_MAX_UPLOAD_MB)]
        max_upload_mb: u64,
    },
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Analyze2d {
            labels,
            sidecar,
            image,
            calib,
            out,
        } => {
            let params = PipelineParams::new(
                Calibration::new(calib.ppm, Calibration::DEFAULT_CAMERA_TO_GROUND_M)?,
                0.0,
            )?;
            let mut request = AnalysisRequest::new(Segmenter::External, params);
            request.labels = Some(load_labels(&labels)?);
            request.sidecar = sidecar.as_deref().map(load_sidecar).transpose()?;
            request.image = image.as_deref().map(load_image).transpose()?;
            let result = analyze_2d(&request)?;
            write_atomically(&out, &analysis_outputs(&result)?)
        }
        Command::Analyze3d {
            depth,
            labels,
            sidecar,
            segmenter: _,
            min_height,
            min_area,
            calib,
            camera_distance,
            sigma,
            out,
        } => {
            let cal = Calibration::new(calib.ppm, camera_distance)?;
            let params = PipelineParams::new(cal, sigma)?;
            let segmenter = if labels.is_some() {
                Segmenter::External
            } else {
                Segmenter::Threshold
            };
            let mut request = AnalysisRequest::new(segmenter, params);
            request.depth = Some(load_depth(&depth)?);
            request.labels = labels.as_deref().map(load_labels).transpose()?;
            request.sidecar = sidecar.as_deref().map(load_sidecar).transpose()?;
            request.threshold = ThresholdParams {
                min_height_m: min_height,
                min_area_px: min_area,
                cal,
            };
            let result = analyze_3d(&request)?;
            for warning in &result.warnings {
                eprintln!("warning: {warning}");
            }
            write_atomically(&out, &analysis_outputs(&result)?)
        }
        Command::Evaluate { pred, gt, iou, out } => {
            let thresholds = parse_thresholds(&iou)?;
            let result = evaluate_pairs(collect_eval_pairs(&pred, &gt)?, &thresholds)?;
            write_atomically(&out, &metrics_outputs(&result))
        }
        Command::Render { depth, out } => {
            write_file_atomically(&out, &encode_png(&render_depth(&load_depth(&depth)?)))
        }
        Command::Serve {
            port,
            host,
            assets,
            max_upload_mb,
        } => {
            let config = ServiceConfig {
                max_upload_mb,
                assets,
                store_capacity: DEFAULT_STORE_CAPACITY,
            };
            let runtime =
                tokio::runtime::Runtime::new().map_err(|e| AppError::Config(e.to_string()))?;
            runtime.block_on(serve(SocketAddr::new(host, port), config))
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::FAILURE
        }
    }
}
