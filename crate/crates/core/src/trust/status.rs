// SPDX-License-Identifier: Apache-2.0

//! Online certificate status service and client.
//!
//! Frames (all integers big-endian):
//!
//! ```text
//! request  = "PSTA" | version:u8 = 1 | serial:u64
//! response = "PSTR" | version:u8 | status:u8 | revoked_at:u64 | produced_at:u64
//!            | sig_len:u16 | signature
//! error    = "PSTE" | version:u8 | code:u8
//! ```
//!
//! `revoked_at` is 0 when absent. A request that cannot be parsed gets an
//! error frame and the connection is closed; the listener keeps running.

use std::io::{self, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::thread::{self, JoinHandle};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use super::authority::{Authority, CertStatus, StatusResponse};
use super::TrustError;

pub const REQUEST_MAGIC: &[u8; 4] = b"PSTA";
pub const RESPONSE_MAGIC: &[u8; 4] = b"PSTR";
pub const ERROR_MAGIC: &[u8; 4] = b"PSTE";
pub const VERSION: u8 = 1;
pub const REQUEST_LEN: usize = 4 + 1 + 8;

pub const ERR_BAD_MAGIC: u8 = 1;
pub const ERR_BAD_VERSION: u8 = 2;
pub const ERR_TRUNCATED: u8 = 3;

const READ_TIMEOUT: Duration = Duration::from_secs(2);

/// Authority state shared between a single writer and the status service.
pub type SharedAuthority = Arc<RwLock<Authority>>;

pub fn encode_request(serial: u64) -> [u8; REQUEST_LEN] {
    let mut frame = [0u8; REQUEST_LEN];
    frame[..4].copy_from_slice(REQUEST_MAGIC);
    frame[4] = VERSION;
    frame[5..].copy_from_slice(&serial.to_be_bytes());
    frame
}

/// Parses a request frame, returning the error code to send back on failure.
pub fn decode_request(frame: &[u8]) -> Result<u64, u8> {
    if frame.len() < REQUEST_LEN {
        return Err(ERR_TRUNCATED);
    }
    if &frame[..4] != REQUEST_MAGIC {
        return Err(ERR_BAD_MAGIC);
    }
    if frame[4] != VERSION {
        return Err(ERR_BAD_VERSION);
    }
    Ok(u64::from_be_bytes(frame[5..13].try_into().unwrap()))
}

pub fn encode_response(response: &StatusResponse) -> Vec<u8> {
    let sig = &response.responder_signature;
    let mut frame = Vec::with_capacity(4 + 1 + 1 + 16 + 2 + sig.len());
    frame.extend_from_slice(RESPONSE_MAGIC);
    frame.push(VERSION);
    frame.push(response.status.code());
    frame.extend_from_slice(&(response.revoked_at.unwrap_or(0) as u64).to_be_bytes());
    frame.extend_from_slice(&(response.produced_at as u64).to_be_bytes());
    frame.extend_from_slice(&(sig.len() as u16).to_be_bytes());
    frame.extend_from_slice(sig);
    frame
}

pub fn encode_error(code: u8) -> [u8; 6] {
    let mut frame = [0u8; 6];
    frame[..4].copy_from_slice(ERROR_MAGIC);
    frame[4] = VERSION;
    frame[5] = code;
    frame
}

fn unreachable(reason: impl Into<String>) -> TrustError {
    TrustError::ServiceUnreachable(reason.into())
}

/// Reads one response frame for `serial`. Does not check the signature.
pub fn read_response(reader: &mut impl Read, serial: u64) -> Result<StatusResponse, TrustError> {
    let io_err = |e: io::Error| unreachable(format!("read: {e}"));
    let mut head = [0u8; 5];
    reader.read_exact(&mut head).map_err(io_err)?;
    if &head[..4] == ERROR_MAGIC {
        let mut code = [0u8; 1];
        reader.read_exact(&mut code).map_err(io_err)?;
        return Err(unreachable(format!("responder error frame, code {}", code[0])));
    }
    if &head[..4] != RESPONSE_MAGIC || head[4] != VERSION {
        return Err(unreachable("unrecognized response frame"));
    }
    let mut fixed = [0u8; 1 + 8 + 8 + 2];
    reader.read_exact(&mut fixed).map_err(io_err)?;
    let status = CertStatus::from_code(fixed[0]).ok_or_else(|| unreachable("bad status code"))?;
    let revoked_at = u64::from_be_bytes(fixed[1..9].try_into().unwrap());
    let produced_at = u64::from_be_bytes(fixed[9..17].try_into().unwrap());
    let sig_len = u16::from_be_bytes(fixed[17..19].try_into().unwrap()) as usize;
    let mut signature = vec![0u8; sig_len];
    reader.read_exact(&mut signature).map_err(io_err)?;
    let to_time = |t: u64| i64::try_from(t).map_err(|_| unreachable("time out of range"));
    Ok(StatusResponse {
        serial,
        status,
        revoked_at: (revoked_at != 0).then(|| to_time(revoked_at)).transpose()?,
        produced_at: to_time(produced_at)?,
        responder_signature: signature,
    })
}

/// Asks the responder at `endpoint` for `serial`.
///
/// Any failure to obtain a response that verifies under `responder_key`,
/// including a forged or corrupted one, is reported as `ServiceUnreachable`.
pub fn query_status(
    endpoint: &str,
    serial: u64,
    responder_key: &[u8],
    timeout: Duration,
) -> Result<StatusResponse, TrustError> {
    let addr = endpoint
        .to_socket_addrs()
        .map_err(|e| unreachable(format!("resolve {endpoint}: {e}")))?
        .next()
        .ok_or_else(|| unreachable(format!("no address for {endpoint}")))?;
    let mut stream = TcpStream::connect_timeout(&addr, timeout)
        .map_err(|e| unreachable(format!("connect {endpoint}: {e}")))?;
    stream
        .set_read_timeout(Some(timeout))
        .and_then(|_| stream.set_write_timeout(Some(timeout)))
        .map_err(|e| unreachable(e.to_string()))?;
    stream
        .write_all(&encode_request(serial))
        .map_err(|e| unreachable(format!("write: {e}")))?;
    let response = read_response(&mut stream, serial)?;
    let _ = stream.shutdown(Shutdown::Both);
    if !response.verify(responder_key) {
        return Err(unreachable("responder signature does not verify"));
    }
    Ok(response)
}

/// Where a running service takes `produced_at` from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ServiceClock {
    Fixed(i64),
    System,
}

impl ServiceClock {
    fn now(self) -> i64 {
        match self {
            ServiceClock::Fixed(t) => t,
            ServiceClock::System => SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs() as i64)
                .unwrap_or(0),
        }
    }
}

/// Handle to a running status service. Dropping it stops the service.
pub struct StatusService {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    log: Arc<Mutex<Vec<u64>>>,
    acceptor: Option<JoinHandle<()>>,
}

impl StatusService {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn endpoint(&self) -> String {
        self.addr.to_string()
    }

    /// Every serial asked about, in arrival order. The responder learns
    /// exactly which certificates its clients are checking.
    pub fn query_log(&self) -> Vec<u64> {
        self.log.lock().unwrap().clone()
    }

    /// Stops accepting, waits for in-flight connections, and returns.
    pub fn stop(mut self) {
        self.shutdown();
    }

    fn shutdown(&mut self) {
        if let Some(acceptor) = self.acceptor.take() {
            self.stop.store(true, Ordering::SeqCst);
            // wake the blocking accept
            let _ = TcpStream::connect_timeout(&self.addr, Duration::from_millis(500));
            let _ = acceptor.join();
        }
    }
}

impl Drop for StatusService {
    fn drop(&mut self) {
        self.shutdown();
    }
}

pub fn run_status_service(
    authority: SharedAuthority,
    bind: impl ToSocketAddrs,
    clock: ServiceClock,
) -> Result<StatusService, TrustError> {
    let listener = TcpListener::bind(bind).map_err(|e| TrustError::BindFailure(e.to_string()))?;
    let addr = listener
        .local_addr()
        .map_err(|e| TrustError::BindFailure(e.to_string()))?;
    let stop = Arc::new(AtomicBool::new(false));
    let log = Arc::new(Mutex::new(Vec::new()));
    let acceptor = {
        let stop = stop.clone();
        let log = log.clone();
        thread::spawn(move || {
            let mut workers = Vec::new();
            for stream in listener.incoming() {
                if stop.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                let authority = authority.clone();
                let log = log.clone();
                workers.push(thread::spawn(move || {
                    let _ = serve_connection(stream, &authority, &log, clock);
                }));
                workers.retain(|w| !w.is_finished());
            }
            for w in workers {
                let _ = w.join();
            }
        })
    };
    Ok(StatusService {
        addr,
        stop,
        log,
        acceptor: Some(acceptor),
    })
}

fn serve_connection(
    mut stream: TcpStream,
    authority: &RwLock<Authority>,
    log: &Mutex<Vec<u64>>,
    clock: ServiceClock,
) -> io::Result<()> {
    stream.set_read_timeout(Some(READ_TIMEOUT))?;
    loop {
        let mut frame = [0u8; REQUEST_LEN];
        let mut filled = 0;
        while filled < REQUEST_LEN {
            match stream.read(&mut frame[filled..]) {
                Ok(0) => break,
                Ok(n) => filled += n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                Err(e) => return Err(e),
            }
        }
        if filled == 0 {
            return Ok(());
        }
        match decode_request(&frame[..filled]) {
            Ok(serial) => {
                log.lock().unwrap().push(serial);
                let response = authority.read().unwrap().status(serial, clock.now());
                stream.write_all(&encode_response(&response))?;
            }
            Err(code) => {
                stream.write_all(&encode_error(code))?;
                return stream.shutdown(Shutdown::Both);
            }
        }
    }
}
