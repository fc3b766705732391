//! HTTP and WebSocket front end of a steering session.

use std::future::Future;
use std::path::{Component, Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::{header, StatusCode, Uri};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use futures_util::{SinkExt, StreamExt};
use tokio::net::TcpListener;
use tokio::sync::{broadcast, mpsc, Mutex};

use super::session::{ClientMessage, ServerMessage, Session};
use crate::args::ServeArgs;
use crate::error::{CliError, CliResult};
use crate::eval::{env_spec, load_agent};

const BUILTIN_INDEX: &str = include_str!("../../static/index.html");

/// A request from one connection, with the channel its reply goes to.
struct Command {
    message: ClientMessage,
    reply: mpsc::UnboundedSender<String>,
}

#[derive(Clone)]
struct AppState {
    commands: mpsc::UnboundedSender<Command>,
    states: broadcast::Sender<String>,
    /// Hello message of the session, refreshed every tick.
    hello: Arc<Mutex<String>>,
    static_dir: Option<Arc<PathBuf>>,
}

/// Owns the session: applies requests as they arrive and steps once per
/// tick, so a request received before a tick is visible in that tick.
async fn tick_loop(
    mut session: Session,
    tick_hz: f64,
    mut commands: mpsc::UnboundedReceiver<Command>,
    states: broadcast::Sender<String>,
    hello: Arc<Mutex<String>>,
) {
    let mut interval = tokio::time::interval(Duration::from_secs_f64(1.0 / tick_hz));
    interval.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    loop {
        tokio::select! {
            _ = interval.tick() => {
                match session.tick() {
                    Ok(Some(state)) => {
                        // no subscribers is fine
                        let _ = states.send(ServerMessage::State(state).to_json());
                    }
                    Ok(None) => {}
                    Err(e) => {
                        let _ = states.send(ServerMessage::error(format!("session ended: {e}")).to_json());
                        return;
                    }
                }
            }
            cmd = commands.recv() => {
                let Some(cmd) = cmd else { return };
                let reply = session.apply(cmd.message);
                let _ = cmd.reply.send(reply.to_json());
                *hello.lock().await = session.hello().to_json();
            }
        }
    }
}

async fn handle_socket(socket: WebSocket, app: AppState) {
    let (mut sink, mut stream) = socket.split();
    let (reply_tx, mut reply_rx) = mpsc::unbounded_channel::<String>();
    let mut states = app.states.subscribe();
    let hello = app.hello.lock().await.clone();
    if sink.send(Message::Text(hello.into())).await.is_err() {
        return;
    }

    let writer = tokio::spawn(async move {
        loop {
            let text = tokio::select! {
                r = reply_rx.recv() => match r {
                    Some(t) => t,
                    None => break,
                },
                s = states.recv() => match s {
                    Ok(t) => t,
                    // a slow client skips frames rather than stalling others
                    Err(broadcast::error::RecvError::Lagged(_)) => continue,
                    Err(broadcast::error::RecvError::Closed) => break,
                },
            };
            if sink.send(Message::Text(text.into())).await.is_err() {
                break;
            }
        }
    });

    while let Some(Ok(frame)) = stream.next().await {
        let text = match frame {
            Message::Text(t) => t.to_string(),
            Message::Binary(b) => String::from_utf8_lossy(&b).into_owned(),
            Message::Close(_) => break,
            _ => continue,
        };
        match ClientMessage::parse(&text) {
            Ok(message) => {
                let cmd = Command {
                    message,
                    reply: reply_tx.clone(),
                };
                if app.commands.send(cmd).is_err() {
                    let _ = reply_tx.send(ServerMessage::error("session has ended").to_json());
                }
            }
            Err(e) => {
                let _ = reply_tx.send(ServerMessage::error(e).to_json());
            }
        }
    }
    drop(reply_tx);
    writer.abort();
}

async fn ws_route(ws: WebSocketUpgrade, State(app): State<AppState>) -> Response {
    ws.on_upgrade(move |socket| handle_socket(socket, app))
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok", "version": env!("CARGO_PKG_VERSION") }))
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js") | Some("mjs") => "text/javascript",
        Some("css") => "text/css",
        Some("json") => "application/json",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        _ => "application/octet-stream",
    }
}

/// Serves `/` and, with a static directory, any file below it.
async fn static_route(State(app): State<AppState>, uri: Uri) -> Response {
    let rel = uri.path().trim_start_matches('/');
    let rel = if rel.is_empty() { "index.html" } else { rel };
    let Some(dir) = &app.static_dir else {
        return if rel == "index.html" {
            Html(BUILTIN_INDEX).into_response()
        } else {
            StatusCode::NOT_FOUND.into_response()
        };
    };
    let rel = Path::new(rel);
    if rel.components().any(|c| !matches!(c, Component::Normal(_))) {
        return StatusCode::NOT_FOUND.into_response();
    }
    let path = dir.join(rel);
    match tokio::fs::read(&path).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response(),
        Err(_) => StatusCode::NOT_FOUND.into_response(),
    }
}

/// Serves a session on an already bound listener until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    session: Session,
    tick_hz: f64,
    static_dir: Option<PathBuf>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let (commands, command_rx) = mpsc::unbounded_channel();
    let (states, _) = broadcast::channel(64);
    let hello = Arc::new(Mutex::new(session.hello().to_json()));
    let app = AppState {
        commands,
        states: states.clone(),
        hello: hello.clone(),
        static_dir: static_dir.map(Arc::new),
    };
    let ticker = tokio::spawn(tick_loop(session, tick_hz, command_rx, states, hello));
    let router = Router::new()
        .route("/health", get(health))
        .route("/ws", get(ws_route))
        .fallback(get(static_route))
        .with_state(app);
    let result = axum::serve(listener, router).with_graceful_shutdown(shutdown).await;
    ticker.abort();
    result
}

pub fn run(args: &ServeArgs) -> CliResult<()> {
    if !(args.tick_hz > 0.0 && args.tick_hz <= 1000.0) {
        return Err(CliError::usage("--tick-hz must lie in (0, 1000]"));
    }
    if let Some(dir) = &args.static_dir {
        if !dir.join("index.html").is_file() {
            return Err(CliError::input(dir, "no index.html in static directory"));
        }
    }
    // checkpoint problems are reported before anything is bound
    let agent = load_agent(&args.ckpt)?;
    let spec = env_spec(&agent, args.env, None)?;
    let session = Session::new(agent, spec, args.tick_hz, args.seed);

    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    runtime.block_on(async {
        let addr = format!("{}:{}", args.host, args.port);
        let listener = TcpListener::bind(&addr)
            .await
            .map_err(|e| CliError::Runtime(format!("cannot bind {addr}: {e}")))?;
        let local = listener.local_addr().map_err(|e| CliError::Runtime(e.to_string()))?;
        eprintln!("serving {} on http://{local}", spec.kind);
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        serve(listener, session, args.tick_hz, args.static_dir.clone(), shutdown)
            .await
            .map_err(|e| CliError::Runtime(e.to_string()))
    })
}
