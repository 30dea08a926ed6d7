//! Reference peer for the external denoiser protocol. Returns each image
//! scaled by `--scale` (default 1, i.e. an echo). The remaining flags inject
//! faults for testing clients.

use std::io::{self, BufReader, BufWriter};
use std::thread;
use std::time::Duration;

use clap::Parser;
use dvamp::denoise::protocol;

#[derive(Parser)]
#[command(about = "Echo denoiser speaking the DNZ1 protocol on stdin/stdout")]
struct Args {
    /// Multiply every pixel by this factor.
    #[arg(long, default_value_t = 1.0)]
    scale: f32,
    /// Sleep before each response.
    #[arg(long, default_value_t = 0)]
    delay_ms: u64,
    /// Answer with a corrupted magic.
    #[arg(long)]
    bad_magic: bool,
    /// Answer with the wrong image size.
    #[arg(long)]
    wrong_size: bool,
}

fn main() -> io::Result<()> {
    let args = Args::parse();
    let mut input = BufReader::new(io::stdin().lock());
    let mut output = BufWriter::new(io::stdout().lock());
    while let Some(req) = protocol::read_request(&mut input)? {
        if args.delay_ms > 0 {
            thread::sleep(Duration::from_millis(args.delay_ms));
        }
        if args.bad_magic {
            use std::io::Write;
            output.write_all(b"NOPE")?;
            output.flush()?;
            continue;
        }
        let mut pixels: Vec<f32> = req.pixels.iter().map(|p| p * args.scale).collect();
        if args.wrong_size {
            pixels.resize(pixels.len() + req.cols as usize, 0.0);
            protocol::write_response(&mut output, req.rows + 1, req.cols, &pixels)?;
        } else {
            protocol::write_response(&mut output, req.rows, req.cols, &pixels)?;
        }
    }
    Ok(())
}
