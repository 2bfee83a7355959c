//! Line protocol for external distribution providers.
//!
//! ```text
//! client: HELLO <catalog checksum>     server: OK | ERR <message>
//! client: NEXT <id> <id> ...           server: DIST <logprob> ... | ERR <message>
//! ```

use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use log::{debug, warn};

use super::{check_context, Distribution, LanguageModel, LmError};
use crate::catalog::TokenId;
use crate::scalar::Scalar;

/// Tolerance on the provider's total mass before renormalization.
pub const PROVIDER_MASS_TOLERANCE: f64 = 1e-4;

const IO_TIMEOUT: Duration = Duration::from_secs(30);

struct Connection {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl Connection {
    fn open(addr: &str) -> Result<Self, LmError> {
        let unreachable = |e: std::io::Error| LmError::ProviderUnreachable(format!("{addr}: {e}"));
        let addrs: Vec<SocketAddr> = addr.to_socket_addrs().map_err(unreachable)?.collect();
        let mut last = None;
        for a in addrs {
            match TcpStream::connect_timeout(&a, IO_TIMEOUT) {
                Ok(stream) => {
                    stream.set_read_timeout(Some(IO_TIMEOUT)).map_err(unreachable)?;
                    stream.set_write_timeout(Some(IO_TIMEOUT)).map_err(unreachable)?;
                    let writer = stream.try_clone().map_err(unreachable)?;
                    return Ok(Connection { reader: BufReader::new(stream), writer });
                }
                Err(e) => last = Some(e),
            }
        }
        Err(LmError::ProviderUnreachable(match last {
            Some(e) => format!("{addr}: {e}"),
            None => format!("{addr}: no address"),
        }))
    }

    fn request(&mut self, line: &str) -> Result<String, LmError> {
        let lost = |e: std::io::Error| LmError::ProviderUnreachable(e.to_string());
        self.writer.write_all(line.as_bytes()).map_err(lost)?;
        self.writer.write_all(b"\n").map_err(lost)?;
        self.writer.flush().map_err(lost)?;
        let mut reply = String::new();
        if self.reader.read_line(&mut reply).map_err(lost)? == 0 {
            return Err(LmError::ProviderUnreachable("connection closed".into()));
        }
        Ok(reply.trim_end_matches(['\n', '\r']).to_string())
    }
}

/// Connection to a provider serving one catalog. Requests on one handle are
/// serialized.
pub struct ProviderHandle {
    addr: String,
    checksum: String,
    vocab_size: usize,
    conn: Mutex<Option<Connection>>,
}

impl std::fmt::Debug for ProviderHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProviderHandle")
            .field("addr", &self.addr)
            .field("checksum", &self.checksum)
            .field("vocab_size", &self.vocab_size)
            .finish()
    }
}

impl ProviderHandle {
    /// Connects and performs the checksum handshake.
    pub fn connect(addr: impl Into<String>, checksum: impl Into<String>, vocab_size: usize) -> Result<Self, LmError> {
        let handle = ProviderHandle { addr: addr.into(), checksum: checksum.into(), vocab_size, conn: Mutex::new(None) };
        {
            let mut guard = handle.conn.lock().unwrap_or_else(|e| e.into_inner());
            *guard = Some(handle.handshake()?);
        }
        Ok(handle)
    }

    fn handshake(&self) -> Result<Connection, LmError> {
        let mut conn = Connection::open(&self.addr)?;
        let reply = conn.request(&format!("HELLO {}", self.checksum))?;
        match reply.split_once(' ').map_or((reply.as_str(), ""), |(a, b)| (a, b)) {
            ("OK", _) => Ok(conn),
            ("ERR", msg) => Err(LmError::CatalogMismatch { expected: self.checksum.clone(), found: msg.to_string() }),
            _ => Err(LmError::Provider(format!("unexpected handshake reply {reply:?}"))),
        }
    }

    pub fn addr(&self) -> &str {
        &self.addr
    }

    pub fn checksum(&self) -> &str {
        &self.checksum
    }

    /// Fetches and validates the distribution after `context`.
    pub fn fetch_distribution<T: Scalar>(&self, context: &[TokenId]) -> Result<Distribution<T>, LmError> {
        check_context(context, self.vocab_size)?;
        let mut guard = self.conn.lock().unwrap_or_else(|e| e.into_inner());
        if guard.is_none() {
            *guard = Some(self.handshake()?);
        }
        let mut line = String::from("NEXT");
        for id in context {
            line.push(' ');
            line.push_str(&id.0.to_string());
        }
        let reply = match guard.as_mut().map(|c| c.request(&line)) {
            Some(Ok(r)) => r,
            Some(Err(e)) => {
                *guard = None;
                return Err(e);
            }
            None => unreachable!(),
        };
        drop(guard);
        parse_dist(&reply, self.vocab_size)
    }
}

fn parse_dist<T: Scalar>(reply: &str, vocab_size: usize) -> Result<Distribution<T>, LmError> {
    use super::DistributionError as D;
    if let Some(msg) = reply.strip_prefix("ERR") {
        return Err(LmError::Provider(msg.trim().to_string()));
    }
    let Some(body) = reply.strip_prefix("DIST") else {
        return Err(LmError::Provider(format!("unexpected reply {:?}", truncate(reply))));
    };
    let values = body
        .split_whitespace()
        .map(|v| v.parse::<f64>().map(T::of).map_err(|_| D::Unparsable(v.to_string())))
        .collect::<Result<Vec<T>, _>>()?;
    if values.len() != vocab_size {
        return Err(D::WrongLength { expected: vocab_size, found: values.len() }.into());
    }
    Ok(Distribution::from_log_probs(&values, PROVIDER_MASS_TOLERANCE)?)
}

fn truncate(s: &str) -> &str {
    match s.char_indices().nth(40) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

impl<T: Scalar> LanguageModel<T> for ProviderHandle {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_distribution(&self, context: &[TokenId]) -> Result<Distribution<T>, LmError> {
        self.fetch_distribution(context)
    }

    fn describe(&self) -> String {
        format!("provider at {}", self.addr)
    }
}

/// Serves `model` over the provider protocol until the listener fails.
/// Each connection gets its own thread.
pub fn serve_provider(listener: TcpListener, checksum: String, model: Arc<dyn LanguageModel<f64>>) {
    for stream in listener.incoming() {
        let stream = match stream {
            Ok(s) => s,
            Err(e) => {
                warn!("provider accept failed: {e}");
                continue;
            }
        };
        let checksum = checksum.clone();
        let model = Arc::clone(&model);
        std::thread::spawn(move || {
            if let Err(e) = serve_connection(stream, &checksum, model.as_ref()) {
                debug!("provider connection ended: {e}");
            }
        });
    }
}

/// Binds an ephemeral local port and serves `model` on a background thread.
pub fn spawn_provider(
    checksum: String,
    model: Arc<dyn LanguageModel<f64>>,
) -> std::io::Result<(SocketAddr, JoinHandle<()>)> {
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let addr = listener.local_addr()?;
    let handle = std::thread::spawn(move || serve_provider(listener, checksum, model));
    Ok((addr, handle))
}

fn serve_connection(stream: TcpStream, checksum: &str, model: &dyn LanguageModel<f64>) -> std::io::Result<()> {
    let mut writer = stream.try_clone()?;
    let reader = BufReader::new(stream);
    let mut greeted = false;
    for line in reader.lines() {
        let line = line?;
        let (cmd, rest) = line.split_once(' ').unwrap_or((line.as_str(), ""));
        let reply = match (cmd, greeted) {
            ("HELLO", _) if rest.trim() == checksum => {
                greeted = true;
                "OK".to_string()
            }
            ("HELLO", _) => format!("ERR {checksum}"),
            ("NEXT", true) => next_reply(rest, model),
            ("NEXT", false) => "ERR handshake required".to_string(),
            _ => format!("ERR unknown command {cmd:?}"),
        };
        writer.write_all(reply.as_bytes())?;
        writer.write_all(b"\n")?;
        writer.flush()?;
    }
    Ok(())
}

fn next_reply(rest: &str, model: &dyn LanguageModel<f64>) -> String {
    let ids: Result<Vec<TokenId>, _> = rest.split_whitespace().map(|s| s.parse::<u32>().map(TokenId)).collect();
    let Ok(ids) = ids else {
        return "ERR malformed context".to_string();
    };
    match model.next_distribution(&ids) {
        Ok(d) => {
            let mut out = String::with_capacity(d.len() * 20 + 5);
            out.push_str("DIST");
            for lp in d.log_probs() {
                out.push(' ');
                out.push_str(&lp.to_string());
            }
            out
        }
        Err(e) => format!("ERR {e}"),
    }
}
