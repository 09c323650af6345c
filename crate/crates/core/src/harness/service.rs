//! Live teleoperation: a control-loop core driven by client messages, and
//! a WebSocket server around it.
//!
//! [`TeleopService`] is synchronous and owns all mutable state. [`serve`]
//! runs it on its own thread, with one thread per client connection and
//! channels in between, so no lock is ever held across a solver call.

use std::collections::HashMap;
use std::io::ErrorKind;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, Sender, TryRecvError};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use nalgebra::Vector3;
use tungstenite::{Message, WebSocket};

use crate::actuation::motor_positions;
use crate::controller::{self, pose_errors};
use crate::geometry::Pose;
use crate::rcm::{self, AugmentedState};
use crate::solver::PriorityCase;
use crate::teleop::Teleoperator;
use crate::{Error, Result};

use super::config::RunConfig;
use super::protocol::{ClientMessage, ErrorReply, PoseMsg, StateFrame};

pub struct TeleopService {
    cfg: RunConfig,
    initial: AugmentedState,
    state: AugmentedState,
    trocar: Vector3<f64>,
    teleop: Teleoperator,
    case: PriorityCase,
    time: f64,
    clutch_requested: bool,
    pending_stylus: Option<Pose>,
    last_stylus: Option<Pose>,
    faulted: bool,
}

impl TeleopService {
    pub fn new(cfg: RunConfig) -> Result<Self> {
        cfg.validate()?;
        let initial = cfg.initial.state();
        let tip = rcm::state_poses(&initial, &cfg.kinematics).tip;
        let teleop = Teleoperator::new(cfg.service.registration, cfg.service.motion_scale, tip)?;
        Ok(Self {
            trocar: cfg.trocar(),
            case: cfg.case,
            initial,
            state: initial,
            teleop,
            time: 0.0,
            clutch_requested: false,
            pending_stylus: None,
            last_stylus: None,
            faulted: false,
            cfg,
        })
    }

    pub fn state(&self) -> &AugmentedState {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn case(&self) -> PriorityCase {
        self.case
    }

    pub fn engaged(&self) -> bool {
        self.teleop.engaged()
    }

    pub fn desired(&self) -> &Pose {
        self.teleop.desired()
    }

    pub fn faulted(&self) -> bool {
        self.faulted
    }

    pub fn dt(&self) -> f64 {
        self.cfg.control.dt
    }

    fn tip(&self) -> Pose {
        rcm::state_poses(&self.state, &self.cfg.kinematics).tip
    }

    pub fn handle(&mut self, msg: ClientMessage) -> Result<()> {
        match msg {
            ClientMessage::Clutch(true) => {
                self.clutch_requested = true;
                if !self.teleop.engaged() {
                    if let Some(s) = self.pending_stylus.take().or(self.last_stylus) {
                        self.last_stylus = Some(s);
                        let tip = self.tip();
                        self.teleop.engage(&s, &tip)?;
                    }
                }
            }
            ClientMessage::Clutch(false) => {
                self.clutch_requested = false;
                self.teleop.release();
            }
            ClientMessage::StylusPose(p) => {
                // Latest wins: only the newest sample is kept until the next tick.
                self.pending_stylus = Some(p.to_pose()?);
            }
            ClientMessage::SetCase(i) => {
                self.case =
                    PriorityCase::from_index(i).ok_or_else(|| Error::Protocol(format!("unknown priority case {i}")))?;
            }
            ClientMessage::SetScale(s) => {
                // Takes effect at the next engagement; anchors are fixed per session.
                self.teleop.set_scale(s).map_err(|e| Error::Protocol(e.to_string()))?;
            }
            ClientMessage::Reset {} => {
                self.state = self.initial;
                let tip = self.tip();
                self.teleop.hold(tip);
                self.clutch_requested = false;
                self.pending_stylus = None;
                self.faulted = false;
            }
        }
        Ok(())
    }

    /// Parses and applies one text message; returns the error reply to send
    /// back, if any. The session is unaffected by a bad message.
    pub fn handle_text(&mut self, text: &str) -> Option<String> {
        match ClientMessage::parse(text).and_then(|m| self.handle(m)) {
            Ok(()) => None,
            Err(e) => Some(error_reply(&e)),
        }
    }

    /// Safety hold when the client goes away.
    pub fn disconnect(&mut self) {
        self.clutch_requested = false;
        self.pending_stylus = None;
        self.teleop.release();
    }

    /// Advances the control loop by one `dt`.
    pub fn tick(&mut self) {
        if let Some(s) = self.pending_stylus.take() {
            self.last_stylus = Some(s);
            if self.clutch_requested && !self.teleop.engaged() {
                let tip = self.tip();
                if let Err(e) = self.teleop.engage(&s, &tip) {
                    log::warn!("clutch engagement failed: {e}");
                }
            } else {
                self.teleop.update(&s);
            }
        }
        let desired = *self.teleop.desired();
        let kin = &self.cfg.kinematics;
        match controller::step(
            &self.state,
            &desired,
            self.case,
            &self.trocar,
            kin,
            &self.cfg.control,
            self.time,
        ) {
            Ok((next, _)) => {
                self.state = next;
                self.faulted = false;
            }
            Err(e) => {
                if !self.faulted {
                    log::error!("{e}; holding the last state");
                }
                self.faulted = true;
            }
        }
        self.time += self.cfg.control.dt;
    }

    pub fn snapshot(&self) -> StateFrame {
        let poses = rcm::state_poses(&self.state, &self.cfg.kinematics);
        let desired = self.teleop.desired();
        let (e_p, e_o) = pose_errors(desired, &poses.tip);
        StateFrame {
            time: self.time,
            q_aug: self.state.to_vector().into(),
            tip_pose: PoseMsg::from_pose(&poses.tip),
            desired_pose: PoseMsg::from_pose(desired),
            e_p: e_p.into(),
            e_o: e_o.into(),
            rcm_error: rcm::shaft_distance(&poses, &self.trocar),
            case: self.case.index(),
            lambda: self.state.lambda,
            motor_positions: motor_positions(&self.state.psi, &self.cfg.kinematics.continuum, &self.cfg.actuation)
                .into(),
        }
    }
}

pub fn error_reply(e: &Error) -> String {
    serde_json::to_string(&ErrorReply { error: e.to_string() }).expect("plain struct serializes")
}

enum Event {
    Connected(usize, Sender<String>),
    Text(usize, String),
    Disconnected(usize),
}

/// Running server; dropping it without [`ServerHandle::stop`] leaves the
/// threads running until the process exits.
pub struct ServerHandle {
    pub addr: SocketAddr,
    stop: Arc<AtomicBool>,
    threads: Vec<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn stop(mut self) {
        self.stop.store(true, Ordering::SeqCst);
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }

    /// Blocks until the server stops on its own (it only does on error).
    pub fn wait(mut self) {
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

/// Binds `service.host:service.port` (port 0 picks a free one) and starts
/// the control loop and the acceptor.
pub fn serve(cfg: RunConfig) -> Result<ServerHandle> {
    let service = TeleopService::new(cfg.clone())?;
    let listener = TcpListener::bind((cfg.service.host.as_str(), cfg.service.port))?;
    listener.set_nonblocking(true)?;
    let addr = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let (tx, rx) = mpsc::channel::<Event>();

    let control = {
        let stop = stop.clone();
        let broadcast_period = 1.0 / cfg.service.broadcast_hz;
        let realtime = cfg.service.realtime;
        thread::Builder::new()
            .name("control".into())
            .spawn(move || control_loop(service, rx, stop, broadcast_period, realtime))?
    };
    let acceptor = {
        let stop = stop.clone();
        thread::Builder::new()
            .name("acceptor".into())
            .spawn(move || accept_loop(listener, tx, stop))?
    };
    log::info!("teleoperation service listening on ws://{addr}");
    Ok(ServerHandle {
        addr,
        stop,
        threads: vec![control, acceptor],
    })
}

fn control_loop(mut service: TeleopService, rx: Receiver<Event>, stop: Arc<AtomicBool>, period: f64, realtime: bool) {
    let mut clients: HashMap<usize, Sender<String>> = HashMap::new();
    let dt = service.dt();
    let start = Instant::now();
    let mut ticks: u64 = 0;
    let mut next_broadcast = 0.0;
    while !stop.load(Ordering::SeqCst) {
        loop {
            match rx.try_recv() {
                Ok(Event::Connected(id, out)) => {
                    clients.insert(id, out);
                }
                Ok(Event::Text(id, text)) => {
                    if let Some(reply) = service.handle_text(&text) {
                        if let Some(out) = clients.get(&id) {
                            let _ = out.send(reply);
                        }
                    }
                }
                Ok(Event::Disconnected(id)) => {
                    clients.remove(&id);
                    service.disconnect();
                    log::info!("client {id} disconnected; clutch released");
                }
                // A gone acceptor only means no new clients; keep serving.
                Err(TryRecvError::Empty | TryRecvError::Disconnected) => break,
            }
        }
        service.tick();
        ticks += 1;
        if service.time() + 1e-12 >= next_broadcast {
            // Scheduling from the actual send time keeps every interval at
            // or above the period, not just the average.
            next_broadcast = service.time() + period;
            if !clients.is_empty() {
                let frame = serde_json::to_string(&service.snapshot()).expect("frame serializes");
                clients.retain(|_, out| out.send(frame.clone()).is_ok());
            }
        }
        if realtime {
            let target = Duration::from_secs_f64(ticks as f64 * dt);
            let elapsed = start.elapsed();
            if target > elapsed {
                thread::sleep(target - elapsed);
            }
        }
    }
}

fn accept_loop(listener: TcpListener, tx: Sender<Event>, stop: Arc<AtomicBool>) {
    let mut next_id = 0usize;
    let mut workers: Vec<JoinHandle<()>> = Vec::new();
    while !stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                let id = next_id;
                next_id += 1;
                let tx = tx.clone();
                let stop = stop.clone();
                log::info!("client {id} connected from {peer}");
                match thread::Builder::new()
                    .name(format!("client-{id}"))
                    .spawn(move || connection(id, stream, tx, stop))
                {
                    Ok(h) => workers.push(h),
                    Err(e) => log::error!("cannot spawn connection thread: {e}"),
                }
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(5)),
            Err(e) => {
                log::error!("accept failed: {e}");
                thread::sleep(Duration::from_millis(50));
            }
        }
        workers.retain(|h| !h.is_finished());
    }
    for h in workers {
        let _ = h.join();
    }
}

fn connection(id: usize, stream: TcpStream, tx: Sender<Event>, stop: Arc<AtomicBool>) {
    if let Err(e) = stream.set_nonblocking(false) {
        log::warn!("client {id}: {e}");
        return;
    }
    let mut ws = match tungstenite::accept(stream) {
        Ok(ws) => ws,
        Err(e) => {
            log::warn!("client {id}: handshake failed: {e}");
            return;
        }
    };
    if let Err(e) = ws.get_ref().set_read_timeout(Some(Duration::from_millis(2))) {
        log::warn!("client {id}: {e}");
        return;
    }
    let (out_tx, out_rx) = mpsc::channel::<String>();
    if tx.send(Event::Connected(id, out_tx)).is_err() {
        return;
    }
    let result = pump(id, &mut ws, &tx, &out_rx, &stop);
    if let Err(e) = result {
        log::debug!("client {id}: {e}");
    }
    let _ = ws.close(None);
    let _ = ws.flush();
    let _ = tx.send(Event::Disconnected(id));
}

// tungstenite's error is large, but it is returned at most once per connection.
#[allow(clippy::result_large_err)]
fn pump(
    id: usize,
    ws: &mut WebSocket<TcpStream>,
    tx: &Sender<Event>,
    out_rx: &Receiver<String>,
    stop: &AtomicBool,
) -> std::result::Result<(), tungstenite::Error> {
    while !stop.load(Ordering::SeqCst) {
        match ws.read() {
            Ok(Message::Text(t)) => {
                let text = t.to_string();
                // Reject unparsable input right here; the control loop only
                // sees well-formed commands.
                match ClientMessage::parse(&text) {
                    Ok(_) => {
                        if tx.send(Event::Text(id, text)).is_err() {
                            return Ok(());
                        }
                    }
                    Err(e) => ws.send(Message::text(error_reply(&e)))?,
                }
            }
            Ok(Message::Close(_)) => return Ok(()),
            Ok(Message::Binary(_)) => {
                let e = Error::Protocol("binary messages are not supported".into());
                ws.send(Message::text(error_reply(&e)))?;
            }
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(e) => return Err(e),
        }
        loop {
            match out_rx.try_recv() {
                Ok(text) => ws.write(Message::text(text))?,
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => return Ok(()),
            }
        }
        match ws.flush() {
            Ok(()) => {}
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(())
}
