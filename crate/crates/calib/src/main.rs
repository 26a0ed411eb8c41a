use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use clap::Parser;
use fovnoise_calib::{router, AppState, Corpus, ServiceConfig};

#[derive(Debug, Parser)]
#[command(name = "fovnoise-calib", version, about = "Calibration preview service")]
struct Args {
    /// Directory of stimulus images; ids are the file stems.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Preview width in pixels.
    #[arg(long, default_value_t = fovnoise_calib::preview::DEFAULT_PREVIEW_WIDTH)]
    preview_width: usize,
    /// Previews kept in memory.
    #[arg(long, default_value_t = 32)]
    cache: usize,
}

#[tokio::main]
async fn main() {
    let args = Args::parse();
    let corpus = match Corpus::from_dir(&args.corpus) {
        Ok(c) if !c.is_empty() => c,
        Ok(_) => {
            eprintln!("no images in {}", args.corpus.display());
            std::process::exit(3);
        }
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(3);
        }
    };
    let config = ServiceConfig {
        preview_width: args.preview_width,
        cache_capacity: args.cache,
    };
    let state = Arc::new(AppState::new(corpus, config));
    let listener = match tokio::net::TcpListener::bind(args.addr).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("bind {}: {e}", args.addr);
            std::process::exit(3);
        }
    };
    eprintln!("listening on {}", args.addr);
    if let Err(e) = axum::serve(listener, router(state)).await {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
