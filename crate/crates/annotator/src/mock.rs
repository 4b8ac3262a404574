//! In-process mock of a chat-completions endpoint for tests and dry runs.
//!
//! The server speaks just enough HTTP/1.1 for the blocking client, injects
//! scripted or seeded faults (5xx, 429, abrupt connection drops, malformed
//! bodies), and tracks request totals plus the maximum number of requests it
//! ever saw in flight at once.

use std::io::{self, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Per-request behavior.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    Ok,
    Http500,
    Http429,
    /// Drop the connection without writing a response.
    CloseAbruptly,
    /// HTTP 200 with a body that is not parseable annotation JSON.
    Malformed,
}

/// How faults are assigned to incoming requests.
#[derive(Debug, Clone)]
pub enum FaultPlan {
    /// Every request succeeds.
    None,
    /// Faults by request index; requests past the end succeed.
    Script(Vec<Fault>),
    /// Seeded percentages, deterministic per request index.
    Seeded {
        transport_pct: u8,
        malformed_pct: u8,
        seed: u64,
    },
}

impl FaultPlan {
    fn fault_for(&self, index: usize) -> Fault {
        match self {
            FaultPlan::None => Fault::Ok,
            FaultPlan::Script(script) => script.get(index).copied().unwrap_or(Fault::Ok),
            FaultPlan::Seeded {
                transport_pct,
                malformed_pct,
                seed,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(index as u64));
                let roll: u8 = rng.random_range(0..100);
                if roll < *transport_pct {
                    // Split transport failures between 5xx and hard drops.
                    if rng.random_bool(0.5) {
                        Fault::Http500
                    } else {
                        Fault::CloseAbruptly
                    }
                } else if roll < transport_pct + malformed_pct {
                    Fault::Malformed
                } else {
                    Fault::Ok
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct MockServerConfig {
    pub faults: FaultPlan,
    /// Artificial handling time, so concurrent requests overlap measurably.
    pub latency: Duration,
}

impl Default for MockServerConfig {
    fn default() -> Self {
        Self {
            faults: FaultPlan::None,
            latency: Duration::from_millis(10),
        }
    }
}

#[derive(Debug, Default)]
struct Stats {
    total: AtomicUsize,
    in_flight: AtomicUsize,
    max_in_flight: AtomicUsize,
}

/// Snapshot of the server's counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MockStats {
    pub total_requests: usize,
    pub max_in_flight: usize,
}

pub struct MockServer {
    addr: SocketAddr,
    stats: Arc<Stats>,
    shutdown: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl MockServer {
    pub fn start(config: MockServerConfig) -> io::Result<Self> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let stats = Arc::new(Stats::default());
        let shutdown = Arc::new(AtomicBool::new(false));

        let accept_stats = Arc::clone(&stats);
        let accept_shutdown = Arc::clone(&shutdown);
        let handle = std::thread::spawn(move || {
            let mut handlers = Vec::new();
            for stream in listener.incoming() {
                if accept_shutdown.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                let stats = Arc::clone(&accept_stats);
                let config = config.clone();
                handlers.push(std::thread::spawn(move || {
                    handle_connection(stream, &stats, &config);
                }));
            }
            for h in handlers {
                let _ = h.join();
            }
        });

        Ok(Self {
            addr,
            stats,
            shutdown,
            handle: Some(handle),
        })
    }

    /// Base URL to hand to the client config.
    pub fn base_url(&self) -> String {
        format!("http://{}/v1", self.addr)
    }

    pub fn stats(&self) -> MockStats {
        MockStats {
            total_requests: self.stats.total.load(Ordering::SeqCst),
            max_in_flight: self.stats.max_in_flight.load(Ordering::SeqCst),
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        // Wake the accept loop.
        let _ = TcpStream::connect(self.addr);
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

fn handle_connection(mut stream: TcpStream, stats: &Stats, config: &MockServerConfig) {
    if read_request(&mut stream).is_none() {
        return;
    }
    let index = stats.total.fetch_add(1, Ordering::SeqCst);
    let now_in_flight = stats.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
    stats
        .max_in_flight
        .fetch_max(now_in_flight, Ordering::SeqCst);

    std::thread::sleep(config.latency);
    let fault = config.faults.fault_for(index);
    match fault {
        Fault::Ok => {
            let content = serde_json::json!([{
                "question": "What do the images show together?",
                "answer": format!("mock answer {index}"),
                "rationale": format!("mock rationale {index}"),
            }]);
            let body = serde_json::json!({
                "choices": [{"message": {"role": "assistant", "content": content.to_string()}}]
            })
            .to_string();
            write_response(&mut stream, 200, "OK", &body);
        }
        Fault::Http500 => write_response(
            &mut stream,
            500,
            "Internal Server Error",
            "{\"error\":\"boom\"}",
        ),
        Fault::Http429 => write_response(
            &mut stream,
            429,
            "Too Many Requests",
            "{\"error\":\"slow down\"}",
        ),
        Fault::Malformed => {
            let body = serde_json::json!({
                "choices": [{"message": {"role": "assistant", "content": "sorry, no JSON today"}}]
            })
            .to_string();
            write_response(&mut stream, 200, "OK", &body);
        }
        Fault::CloseAbruptly => {
            let _ = stream.shutdown(std::net::Shutdown::Both);
        }
    }

    stats.in_flight.fetch_sub(1, Ordering::SeqCst);
}

/// Read an HTTP/1.1 request: headers, then a Content-Length body.
/// Returns `None` for connections that send nothing (e.g. the shutdown wake).
fn read_request(stream: &mut TcpStream) -> Option<Vec<u8>> {
    let _ = stream.set_read_timeout(Some(Duration::from_secs(10)));
    let mut buf = Vec::new();
    let mut chunk = [0u8; 1024];
    let header_end = loop {
        match stream.read(&mut chunk) {
            Ok(0) => return None,
            Ok(n) => {
                buf.extend_from_slice(&chunk[..n]);
                if let Some(pos) = find_header_end(&buf) {
                    break pos;
                }
                if buf.len() > 1 << 20 {
                    return None;
                }
            }
            Err(_) => return None,
        }
    };
    let headers = String::from_utf8_lossy(&buf[..header_end]).to_string();
    let content_length = headers
        .lines()
        .find_map(|line| {
            let (name, value) = line.split_once(':')?;
            name.eq_ignore_ascii_case("content-length")
                .then(|| value.trim().parse::<usize>().ok())?
        })
        .unwrap_or(0);
    let mut body = buf[header_end + 4..].to_vec();
    while body.len() < content_length {
        match stream.read(&mut chunk) {
            Ok(0) => break,
            Ok(n) => body.extend_from_slice(&chunk[..n]),
            Err(_) => return None,
        }
    }
    Some(body)
}

fn find_header_end(buf: &[u8]) -> Option<usize> {
    buf.windows(4).position(|w| w == b"\r\n\r\n")
}

fn write_response(stream: &mut TcpStream, code: u16, reason: &str, body: &str) {
    let response = format!(
        "HTTP/1.1 {code} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    let _ = stream.write_all(response.as_bytes());
    let _ = stream.flush();
}
