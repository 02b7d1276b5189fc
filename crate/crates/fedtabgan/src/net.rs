//! Coordinator and worker for running sequential federation across
//! processes over TCP.
//!
//! There is no encryption or authentication: anyone who can reach the
//! coordinator's port can join a session or read weights. Run it only on
//! trusted networks.

use std::io::{ErrorKind, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use fedtabgan_core::data::RowSource;
use fedtabgan_core::federation::{round_to_f32, FederationError, FederationPlan, NodeLog};
use fedtabgan_core::gan::{GanConfig, GanError, GanModel};
use fedtabgan_core::wire::{
    decode_message, encode_message, payload_len, Assignment, Message, MessageKind, WeightsBundle, WireError,
    FRAME_HEADER,
};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(600);
const RETRY_INTERVAL: Duration = Duration::from_millis(100);
const ACCEPT_POLL: Duration = Duration::from_millis(20);

#[derive(Debug, thiserror::Error)]
pub enum NetError {
    #[error("network error: {0}")]
    Io(#[from] std::io::Error),
    #[error("protocol error: {0}")]
    Wire(#[from] WireError),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("timed out {0}")]
    Timeout(String),
    #[error("peer reported an error: {0}")]
    Remote(String),
    #[error("connection closed {0}")]
    Disconnected(String),
    #[error(transparent)]
    Federation(#[from] FederationError),
    #[error(transparent)]
    Gan(#[from] GanError),
}

/// Reads one frame; `Ok(None)` on a clean close before any byte.
pub fn read_frame<R: Read>(r: &mut R) -> Result<Option<Message>, NetError> {
    let mut prefix = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut prefix[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(WireError::Truncated { needed: 4, available: got }.into()),
            Ok(n) => got += n,
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let len = payload_len(prefix)?;
    let mut frame = vec![0u8; FRAME_HEADER + len];
    frame[..4].copy_from_slice(&prefix);
    r.read_exact(&mut frame[4..]).map_err(|e| match e.kind() {
        ErrorKind::UnexpectedEof => NetError::Wire(WireError::Truncated { needed: FRAME_HEADER + len, available: 4 }),
        _ => NetError::Io(e),
    })?;
    Ok(Some(decode_message(&frame)?))
}

pub fn write_frame<W: Write>(w: &mut W, msg: &Message) -> Result<(), NetError> {
    w.write_all(&encode_message(msg)?)?;
    w.flush()?;
    Ok(())
}

enum Event {
    Connected(TcpStream),
    Frame(usize, Message),
    Closed(usize, Option<String>),
}

/// Coordinator-side view of a session.
#[derive(Debug)]
pub struct SessionState {
    pub expected_workers: usize,
    /// Connection index of each node id, once it has said hello.
    pub connected: Vec<Option<usize>>,
    pub round: u32,
    pub current_node: Option<usize>,
    pub global: WeightsBundle,
}

/// What a finished session produced.
#[derive(Debug)]
pub struct CoordinatorOutcome {
    pub model: GanModel,
    pub bundle: WeightsBundle,
}

pub struct Coordinator {
    listener: TcpListener,
    config: GanConfig,
    plan: FederationPlan,
    timeout: Duration,
}

impl Coordinator {
    pub fn bind<A: ToSocketAddrs>(addr: A, config: GanConfig, plan: FederationPlan) -> Result<Self, NetError> {
        plan.validate()?;
        config.validate()?;
        Ok(Self { listener: TcpListener::bind(addr)?, config, plan, timeout: DEFAULT_TIMEOUT })
    }

    /// Longest wait for any single step of the session.
    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn local_addr(&self) -> Result<SocketAddr, NetError> {
        Ok(self.listener.local_addr()?)
    }

    /// Collects one HELLO per silo, then hands the global weights to each
    /// node in turn, round by round, and finally sends END to everyone.
    pub fn run(self) -> Result<CoordinatorOutcome, NetError> {
        let (tx, rx) = mpsc::channel();
        let listener = self.listener.try_clone()?;
        listener.set_nonblocking(true)?;
        let stop = Arc::new(AtomicBool::new(false));
        let accept_stop = Arc::clone(&stop);
        let accept_tx = tx.clone();
        let acceptor = thread::spawn(move || {
            while !accept_stop.load(Ordering::Relaxed) {
                match listener.accept() {
                    Ok((stream, _)) => {
                        if stream.set_nonblocking(false).is_err() || accept_tx.send(Event::Connected(stream)).is_err() {
                            break;
                        }
                    }
                    Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(ACCEPT_POLL),
                    Err(e) => log::warn!("accept failed: {e}"),
                }
            }
        });
        let mut session = Session { conns: Vec::new(), tx, rx, timeout: self.timeout };
        let result = self.drive(&mut session);
        if let Err(e) = &result {
            log::error!("aborting session: {e}");
            session.broadcast(&Message::error(0, 0, &e.to_string()));
        }
        session.shutdown();
        stop.store(true, Ordering::Relaxed);
        let _ = acceptor.join();
        result
    }

    fn drive(&self, session: &mut Session) -> Result<CoordinatorOutcome, NetError> {
        let k = self.plan.silo_count;
        let mut global = GanModel::new(&self.config)?;
        let mut state = SessionState {
            expected_workers: k,
            connected: vec![None; k],
            round: 0,
            current_node: None,
            global: WeightsBundle::from_model(&global),
        };
        while state.connected.iter().any(Option::is_none) {
            match session.next("waiting for workers to connect")? {
                (conn, Some(msg)) if msg.kind == MessageKind::Hello => {
                    let node = msg.node_id as usize;
                    if node >= k {
                        return Err(NetError::Protocol(format!("node id {node} out of range for {k} silos")));
                    }
                    if state.connected[node].is_some() {
                        return Err(NetError::Protocol(format!("node {node} said hello twice")));
                    }
                    log::info!("node {node} connected");
                    state.connected[node] = Some(conn);
                }
                (_, Some(msg)) => return Err(unexpected(&msg, "before all workers connected")),
                (conn, None) => return Err(NetError::Disconnected(format!("on connection {conn} before the session started"))),
            }
        }
        let digest = self.config.digest();
        for round in 0..self.plan.rounds {
            state.round = round;
            let budgets = self.plan.round_budgets(round);
            for node in self.plan.node_order(round) {
                let conn = state.connected[node].expect("all connected");
                let assignment = Assignment { node_id: node as u32, epochs: budgets[node], config_digest: digest };
                session.send(conn, &Message::assign(round, &assignment))?;
                session.send(conn, &Message::weights(MessageKind::GlobalWeights, round, node as u32, &state.global))?;
                state.current_node = Some(node);
                let (from, msg) = session.next(&format!("waiting for node {node} in round {round}"))?;
                let msg = msg.ok_or_else(|| NetError::Disconnected(format!("by node {node} during its turn")))?;
                if from != conn || msg.kind != MessageKind::TrainedWeights {
                    return Err(unexpected(&msg, &format!("while node {node} holds the weights")));
                }
                if msg.round != round || msg.node_id as usize != node {
                    return Err(NetError::Protocol(format!(
                        "TRAINED_WEIGHTS tagged round {} node {}, expected round {round} node {node}",
                        msg.round, msg.node_id
                    )));
                }
                let bundle = msg.bundle()?;
                bundle.apply_to(&mut global)?;
                state.global = bundle;
                state.current_node = None;
                log::info!("round {round}: node {node} returned weights");
            }
        }
        session.broadcast(&Message::end(self.plan.rounds, 0));
        Ok(CoordinatorOutcome { model: global, bundle: state.global })
    }
}

fn unexpected(msg: &Message, when: &str) -> NetError {
    if msg.kind == MessageKind::Error {
        return NetError::Remote(msg.error_text());
    }
    NetError::Protocol(format!("unexpected {} from node {} {when}", msg.kind.name(), msg.node_id))
}

struct Session {
    conns: Vec<Option<TcpStream>>,
    tx: Sender<Event>,
    rx: Receiver<Event>,
    timeout: Duration,
}

impl Session {
    /// Next frame or close event from any connection, registering new
    /// connections on the way.
    fn next(&mut self, what: &str) -> Result<(usize, Option<Message>), NetError> {
        let deadline = Instant::now() + self.timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            match self.rx.recv_timeout(left) {
                Ok(Event::Connected(stream)) => self.register(stream)?,
                Ok(Event::Frame(conn, msg)) => return Ok((conn, Some(msg))),
                Ok(Event::Closed(conn, err)) => {
                    if let Some(e) = err {
                        return Err(NetError::Disconnected(format!("on connection {conn}: {e}")));
                    }
                    self.conns[conn] = None;
                    return Ok((conn, None));
                }
                Err(RecvTimeoutError::Timeout) => return Err(NetError::Timeout(what.to_string())),
                Err(RecvTimeoutError::Disconnected) => return Err(NetError::Disconnected(what.to_string())),
            }
        }
    }

    fn register(&mut self, stream: TcpStream) -> Result<(), NetError> {
        let id = self.conns.len();
        let mut reader = stream.try_clone()?;
        let tx = self.tx.clone();
        thread::spawn(move || loop {
            let event = match read_frame(&mut reader) {
                Ok(Some(msg)) => Event::Frame(id, msg),
                Ok(None) => Event::Closed(id, None),
                Err(e) => Event::Closed(id, Some(e.to_string())),
            };
            let stop = matches!(event, Event::Closed(..));
            if tx.send(event).is_err() || stop {
                break;
            }
        });
        self.conns.push(Some(stream));
        Ok(())
    }

    fn send(&mut self, conn: usize, msg: &Message) -> Result<(), NetError> {
        let stream = self.conns[conn].as_mut().ok_or_else(|| NetError::Disconnected(format!("connection {conn}")))?;
        write_frame(stream, msg)
    }

    /// Best effort; a peer that has gone away is skipped.
    fn broadcast(&mut self, msg: &Message) {
        for stream in self.conns.iter_mut().flatten() {
            let _ = write_frame(stream, msg);
        }
    }

    fn shutdown(&mut self) {
        for stream in self.conns.iter_mut().flatten() {
            let _ = stream.shutdown(std::net::Shutdown::Write);
        }
    }
}

pub struct WorkerOptions {
    pub node_id: u32,
    pub config: GanConfig,
    /// How long to keep retrying the initial connection.
    pub connect_timeout: Duration,
    /// Longest wait for any message from the coordinator.
    pub timeout: Duration,
}

impl WorkerOptions {
    pub fn new(node_id: u32, config: GanConfig) -> Self {
        Self { node_id, config, connect_timeout: DEFAULT_TIMEOUT, timeout: DEFAULT_TIMEOUT }
    }
}

/// Work a worker performed before the session ended.
#[derive(Debug, Default)]
pub struct WorkerSummary {
    pub turns: Vec<NodeLog>,
    pub weights_received: usize,
    pub weights_sent: usize,
}

pub fn connect_with_retry<A: ToSocketAddrs>(addr: A, timeout: Duration) -> Result<TcpStream, NetError> {
    let deadline = Instant::now() + timeout;
    loop {
        match TcpStream::connect(&addr) {
            Ok(s) => return Ok(s),
            Err(e) if Instant::now() >= deadline => return Err(NetError::Timeout(format!("connecting: {e}"))),
            Err(_) => thread::sleep(RETRY_INTERVAL),
        }
    }
}

/// Connects, says hello, and trains on `data` whenever the coordinator
/// hands over the global weights. Returns when END arrives.
pub fn worker_run<S: RowSource, A: ToSocketAddrs>(
    data: &S,
    addr: A,
    opts: &WorkerOptions,
) -> Result<WorkerSummary, NetError> {
    let mut stream = connect_with_retry(addr, opts.connect_timeout)?;
    stream.set_read_timeout(Some(opts.timeout))?;
    let result = worker_session(data, &mut stream, opts);
    if let Err(e) = &result {
        if !matches!(e, NetError::Remote(_) | NetError::Disconnected(_) | NetError::Io(_)) {
            let _ = write_frame(&mut stream, &Message::error(0, opts.node_id, &e.to_string()));
        }
    }
    result
}

fn worker_session<S: RowSource>(data: &S, stream: &mut TcpStream, opts: &WorkerOptions) -> Result<WorkerSummary, NetError> {
    let node = opts.node_id;
    let digest = opts.config.digest();
    let mut local = GanModel::for_node(&opts.config, u64::from(node))?;
    let mut summary = WorkerSummary::default();
    let mut assignment: Option<(u32, Assignment)> = None;
    write_frame(stream, &Message::hello(node))?;
    loop {
        let msg = match read_frame(stream) {
            Ok(Some(m)) => m,
            Ok(None) => return Err(NetError::Disconnected("by the coordinator before END".into())),
            Err(NetError::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {
                return Err(NetError::Timeout("waiting for the coordinator".into()))
            }
            Err(e) => return Err(e),
        };
        match msg.kind {
            MessageKind::Assign => {
                let a = msg.assignment()?;
                if a.node_id != node {
                    return Err(NetError::Protocol(format!("assignment for node {} sent to node {node}", a.node_id)));
                }
                if a.config_digest != digest {
                    return Err(NetError::Protocol("coordinator configuration digest differs from ours".into()));
                }
                assignment = Some((msg.round, a));
            }
            MessageKind::GlobalWeights => {
                summary.weights_received += 1;
                let (round, a) = assignment
                    .take()
                    .filter(|(r, _)| *r == msg.round)
                    .ok_or_else(|| NetError::Protocol(format!("GLOBAL_WEIGHTS for round {} without assignment", msg.round)))?;
                msg.bundle()?.apply_to(&mut local)?;
                let log = local.train(data, a.epochs)?;
                let bundle = round_to_f32(&mut local)?;
                write_frame(stream, &Message::weights(MessageKind::TrainedWeights, round, node, &bundle))?;
                summary.weights_sent += 1;
                summary.turns.push(NodeLog { round, node: node as usize, log });
                log::info!("round {round}: trained {} epochs, weights returned", a.epochs);
            }
            MessageKind::End => return Ok(summary),
            MessageKind::Error => return Err(NetError::Remote(msg.error_text())),
            other => return Err(NetError::Protocol(format!("unexpected {} from coordinator", other.name()))),
        }
    }
}
