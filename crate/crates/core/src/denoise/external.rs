//! Out-of-process denoisers speaking a small binary protocol over
//! stdin/stdout (all integers and floats little-endian):
//!
//! ```text
//! request : "DNZ1" | u32 rows | u32 cols | f64 sigma | rows*cols f32 (row-major)
//! response: "DNZ1" | u32 rows | u32 cols |             rows*cols f32 (row-major)
//! ```
//!
//! The process stays alive across calls. Each concurrent caller gets its own
//! process from a pool; a process is never shared by two in-flight calls.

use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::PathBuf;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use super::{mc_divergence, Denoiser, DenoiserResult, ProbeSettings};
use crate::error::{DenoiserError, Error, Result};

pub const MAGIC: &[u8; 4] = b"DNZ1";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

/// Frame encoding shared by the client and by protocol-speaking helpers.
pub mod protocol {
    use super::*;

    #[derive(Debug, Clone, PartialEq)]
    pub struct Request {
        pub rows: u32,
        pub cols: u32,
        pub sigma: f64,
        pub pixels: Vec<f32>,
    }

    #[derive(Debug, Clone, PartialEq)]
    pub struct Response {
        pub rows: u32,
        pub cols: u32,
        pub pixels: Vec<f32>,
    }

    pub fn write_request<W: Write>(w: &mut W, rows: u32, cols: u32, sigma: f64, pixels: &[f64]) -> io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&rows.to_le_bytes())?;
        w.write_all(&cols.to_le_bytes())?;
        w.write_all(&sigma.to_le_bytes())?;
        for &p in pixels {
            w.write_all(&(p as f32).to_le_bytes())?;
        }
        w.flush()
    }

    pub fn write_response<W: Write>(w: &mut W, rows: u32, cols: u32, pixels: &[f32]) -> io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&rows.to_le_bytes())?;
        w.write_all(&cols.to_le_bytes())?;
        for &p in pixels {
            w.write_all(&p.to_le_bytes())?;
        }
        w.flush()
    }

    fn read_array<const K: usize, R: Read>(r: &mut R) -> io::Result<[u8; K]> {
        let mut buf = [0u8; K];
        r.read_exact(&mut buf)?;
        Ok(buf)
    }

    fn read_pixels<R: Read>(r: &mut R, count: usize) -> io::Result<Vec<f32>> {
        let mut bytes = vec![0u8; count * 4];
        r.read_exact(&mut bytes)?;
        Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
    }

    /// Reads the 4-byte magic; `Ok(None)` on a clean end of stream.
    fn read_magic<R: Read>(r: &mut R) -> io::Result<Option<[u8; 4]>> {
        let mut buf = [0u8; 4];
        let mut filled = 0;
        while filled < 4 {
            match r.read(&mut buf[filled..])? {
                0 if filled == 0 => return Ok(None),
                0 => return Err(io::ErrorKind::UnexpectedEof.into()),
                k => filled += k,
            }
        }
        Ok(Some(buf))
    }

    /// Server side: `Ok(None)` when the client closed the stream.
    pub fn read_request<R: Read>(r: &mut R) -> io::Result<Option<Request>> {
        let Some(magic) = read_magic(r)? else { return Ok(None) };
        if &magic != MAGIC {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "bad request magic"));
        }
        let rows = u32::from_le_bytes(read_array(r)?);
        let cols = u32::from_le_bytes(read_array(r)?);
        let sigma = f64::from_le_bytes(read_array(r)?);
        let pixels = read_pixels(r, rows as usize * cols as usize)?;
        Ok(Some(Request { rows, cols, sigma, pixels }))
    }

    pub fn read_response<R: Read>(r: &mut R) -> Result<Response, DenoiserError> {
        let magic = read_magic(r)?.ok_or_else(|| DenoiserError::Protocol("denoiser closed its output".into()))?;
        if &magic != MAGIC {
            return Err(DenoiserError::Protocol(format!("bad response magic {magic:?}")));
        }
        let rows = u32::from_le_bytes(read_array(r)?);
        let cols = u32::from_le_bytes(read_array(r)?);
        let count = (rows as usize)
            .checked_mul(cols as usize)
            .filter(|&c| c <= 1 << 28)
            .ok_or_else(|| DenoiserError::Protocol(format!("implausible response size {rows}x{cols}")))?;
        let pixels = read_pixels(r, count)?;
        Ok(Response { rows, cols, pixels })
    }
}

struct Worker {
    child: Child,
    stdin: BufWriter<ChildStdin>,
    responses: Receiver<Result<protocol::Response, DenoiserError>>,
}

impl Worker {
    fn spawn(path: &PathBuf, args: &[String]) -> Result<Self, DenoiserError> {
        let mut child = Command::new(path)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|source| DenoiserError::Spawn { path: path.clone(), source })?;
        let stdin = BufWriter::new(child.stdin.take().expect("piped stdin"));
        let mut stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || loop {
            let frame = protocol::read_response(&mut stdout);
            let failed = frame.is_err();
            if tx.send(frame).is_err() || failed {
                break;
            }
        });
        Ok(Self { child, stdin, responses: rx })
    }
}

impl Drop for Worker {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub struct ExternalDenoiser {
    path: PathBuf,
    args: Vec<String>,
    timeout: Duration,
    probes: ProbeSettings,
    idle: Mutex<Vec<Worker>>,
}

impl ExternalDenoiser {
    pub fn new(path: PathBuf, timeout: Duration, probes: ProbeSettings) -> Result<Self> {
        probes.validate()?;
        if timeout.is_zero() {
            return Err(Error::Config("external denoiser timeout must be positive".into()));
        }
        Ok(Self { path, args: Vec::new(), timeout, probes, idle: Mutex::new(Vec::new()) })
    }

    /// Extra command-line arguments for the spawned process.
    pub fn with_args(mut self, args: impl IntoIterator<Item = impl Into<String>>) -> Self {
        self.args = args.into_iter().map(Into::into).collect();
        self
    }

    /// One protocol round-trip on a square image.
    pub fn call(&self, image: &[f64], sigma: f64) -> Result<Vec<f64>, DenoiserError> {
        let side = (image.len() as f64).sqrt().round() as usize;
        if side * side != image.len() || side == 0 {
            return Err(DenoiserError::Input(format!("{} pixels is not a square image", image.len())));
        }
        let pooled = self.idle.lock().expect("pool lock").pop();
        let mut worker = match pooled {
            Some(w) => w,
            None => Worker::spawn(&self.path, &self.args)?,
        };
        let side32 = side as u32;
        protocol::write_request(&mut worker.stdin, side32, side32, sigma, image)?;
        let response = match worker.responses.recv_timeout(self.timeout) {
            Ok(frame) => frame?,
            Err(RecvTimeoutError::Timeout) => return Err(DenoiserError::Timeout(self.timeout)),
            Err(RecvTimeoutError::Disconnected) => {
                return Err(DenoiserError::Protocol("denoiser output closed".into()))
            }
        };
        if response.rows != side32 || response.cols != side32 {
            return Err(DenoiserError::Protocol(format!(
                "asked for {side}x{side}, got {}x{}",
                response.rows, response.cols
            )));
        }
        self.idle.lock().expect("pool lock").push(worker);
        Ok(response.pixels.into_iter().map(f64::from).collect())
    }
}

impl Denoiser for ExternalDenoiser {
    fn denoise(&self, r: &[f64], sigma: f64, seed: u64) -> Result<DenoiserResult> {
        let estimate = self.call(r, sigma)?;
        let divergence = mc_divergence(
            |x| Ok(self.call(x, sigma)?),
            r,
            &estimate,
            self.probes.probes,
            self.probes.step_for(r),
            seed,
        )?;
        Ok(DenoiserResult { estimate, divergence })
    }
}
