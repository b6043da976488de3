//! HTTP JSON service over one bench session, with a server-sent-event
//! channel for completed shots and fresh S11 sweeps.
//!
//! Mutations (tune, fire, pump changes) queue on a fair async mutex, so
//! they run one at a time in arrival order. Reads are served from a
//! snapshot that is replaced after every mutation and never wait for a
//! running simulation.

use crate::error::BenchError;
use crate::session::{s11_sweep, BenchSession, S11Sweep, TuneTarget};
use crate::shot::{self, ShotRecord, SPECTRUM_FILE, TRACE_FILE};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream};
use maser_core::dynamics::REP_RATE_RANGE_HZ;
use maser_core::resonator::{ResonatorConfig, ResonatorError, CEILING_MAX_MM, CEILING_MIN_MM};
use serde::{Deserialize, Serialize};
use std::convert::Infallible;
use std::path::PathBuf;
use std::sync::{Arc, Mutex as StdMutex, RwLock};
use std::time::Duration;
use tokio::sync::{broadcast, Mutex};
use tokio::task::JoinHandle;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoFireState {
    pub enabled: bool,
    pub rate_hz: Option<f64>,
}

/// Body of GET /state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateView {
    pub f_spin_hz: f64,
    pub f_mode_hz: f64,
    pub detuning_hz: f64,
    pub ceiling_height_mm: f64,
    pub ceiling_range_mm: [f64; 2],
    pub tuning_range_hz: [f64; 2],
    pub q_loaded: f64,
    pub coupling_beta: f64,
    pub linewidth_hz: f64,
    pub pump_energy_mj: f64,
    pub rep_rate_range_hz: [f64; 2],
    pub master_seed: u64,
    pub shot_count: usize,
    pub last_shot_id: Option<u64>,
    /// A shot is being simulated; mutations will queue behind it.
    pub busy: bool,
    pub autofire: AutoFireState,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", content = "data", rename_all = "kebab-case")]
pub enum BenchEvent {
    ShotCompleted(ShotRecord),
    S11Updated(S11Sweep),
}

impl BenchEvent {
    fn name(&self) -> &'static str {
        match self {
            Self::ShotCompleted(_) => "shot-completed",
            Self::S11Updated(_) => "s11-updated",
        }
    }
}

struct Snapshot {
    state: StateView,
    resonator: ResonatorConfig,
    shots: Vec<ShotRecord>,
    vna_span_hz: f64,
    vna_points: usize,
}

struct Shared {
    session: Arc<Mutex<BenchSession>>,
    snapshot: RwLock<Snapshot>,
    events: broadcast::Sender<BenchEvent>,
    autofire: StdMutex<Option<(f64, JoinHandle<()>)>>,
    run_dir: PathBuf,
}

#[derive(Clone)]
pub struct AppState(Arc<Shared>);

fn snapshot_of(s: &BenchSession, busy: bool, autofire: AutoFireState) -> Snapshot {
    let r = s.resonator();
    let (lo, hi) = r.tuning.frequency_range();
    Snapshot {
        state: StateView {
            f_spin_hz: r.f_spin_hz,
            f_mode_hz: r.f_mode_hz,
            detuning_hz: r.detuning_hz(),
            ceiling_height_mm: r.ceiling_height_mm,
            ceiling_range_mm: [CEILING_MIN_MM, CEILING_MAX_MM],
            tuning_range_hz: [lo, hi],
            q_loaded: r.q_loaded,
            coupling_beta: r.coupling_beta,
            linewidth_hz: r.decay().linewidth_hz,
            pump_energy_mj: s.pump().energy_j * 1e3,
            rep_rate_range_hz: [REP_RATE_RANGE_HZ.0, REP_RATE_RANGE_HZ.1],
            master_seed: s.master_seed(),
            shot_count: s.shots().len(),
            last_shot_id: s.shots().last().map(|r| r.id),
            busy,
            autofire,
        },
        resonator: r.clone(),
        shots: s.shots().to_vec(),
        vna_span_hz: s.config().vna.span_mhz * 1e6,
        vna_points: s.config().vna.points,
    }
}

impl AppState {
    pub fn new(session: BenchSession) -> Self {
        let snapshot = snapshot_of(
            &session,
            false,
            AutoFireState {
                enabled: false,
                rate_hz: None,
            },
        );
        let (events, _) = broadcast::channel(64);
        Self(Arc::new(Shared {
            run_dir: session.run_dir().to_path_buf(),
            session: Arc::new(Mutex::new(session)),
            snapshot: RwLock::new(snapshot),
            events,
            autofire: StdMutex::new(None),
        }))
    }

    pub fn subscribe(&self) -> broadcast::Receiver<BenchEvent> {
        self.0.events.subscribe()
    }

    pub fn state(&self) -> StateView {
        self.0.snapshot.read().unwrap().state.clone()
    }

    fn autofire_state(&self) -> AutoFireState {
        let a = self.0.autofire.lock().unwrap();
        AutoFireState {
            enabled: a.is_some(),
            rate_hz: a.as_ref().map(|(r, _)| *r),
        }
    }

    fn set_busy(&self, busy: bool) {
        self.0.snapshot.write().unwrap().state.busy = busy;
    }

    fn publish(&self, session: &BenchSession) {
        let snap = snapshot_of(session, false, self.autofire_state());
        *self.0.snapshot.write().unwrap() = snap;
    }

    /// Run `f` on the session once every earlier mutation has finished.
    /// The snapshot is refreshed before the next mutation may start.
    async fn mutate<T, F>(&self, busy: bool, f: F) -> Result<T, BenchError>
    where
        T: Send + 'static,
        F: FnOnce(&mut BenchSession) -> Result<T, BenchError> + Send + 'static,
    {
        let guard = self.0.session.clone().lock_owned().await;
        if busy {
            self.set_busy(true);
        }
        let this = self.clone();
        tokio::task::spawn_blocking(move || {
            let mut session = guard;
            let out = f(&mut session);
            this.publish(&session);
            out
        })
        .await
        .map_err(|e| BenchError::InvalidInput(format!("worker failed: {e}")))?
    }

    pub async fn fire(&self, energy_j: Option<f64>) -> Result<ShotRecord, BenchError> {
        let events = self.0.events.clone();
        self.mutate(true, move |s| {
            let rec = s.fire(energy_j)?;
            let _ = events.send(BenchEvent::ShotCompleted(rec.clone()));
            Ok(rec)
        })
        .await
    }

    pub async fn tune(&self, target: TuneTarget) -> Result<S11Sweep, BenchError> {
        let events = self.0.events.clone();
        self.mutate(false, move |s| {
            let sweep = S11Sweep::from(&s.tune(target)?);
            let _ = events.send(BenchEvent::S11Updated(sweep.clone()));
            Ok(sweep)
        })
        .await
    }

    /// Start, retime or stop the free-running pump.
    pub fn set_autofire(&self, rate_hz: Option<f64>) -> Result<AutoFireState, BenchError> {
        if let Some(r) = rate_hz {
            let (lo, hi) = REP_RATE_RANGE_HZ;
            if !(lo..=hi).contains(&r) {
                return Err(BenchError::InvalidInput(format!(
                    "repetition rate {r} Hz outside [{lo}, {hi}] Hz"
                )));
            }
        }
        let mut slot = self.0.autofire.lock().unwrap();
        if let Some((_, h)) = slot.take() {
            h.abort();
        }
        if let Some(r) = rate_hz {
            let this = self.clone();
            let handle = tokio::spawn(async move {
                let mut tick = tokio::time::interval(Duration::from_secs_f64(1.0 / r));
                tick.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
                tick.tick().await;
                loop {
                    tick.tick().await;
                    if let Err(e) = this.fire(None).await {
                        eprintln!("auto-fire: {e}");
                    }
                }
            });
            *slot = Some((r, handle));
        }
        drop(slot);
        let state = self.autofire_state();
        self.0.snapshot.write().unwrap().state.autofire = state.clone();
        Ok(state)
    }
}

/// JSON error body with a status derived from the failure.
struct ApiError(BenchError);

impl From<BenchError> for ApiError {
    fn from(e: BenchError) -> Self {
        Self(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            BenchError::Resonator(
                ResonatorError::HeightOutOfRange { .. } | ResonatorError::FrequencyUnreachable { .. },
            ) => StatusCode::UNPROCESSABLE_ENTITY,
            BenchError::UnknownShot(_) => StatusCode::NOT_FOUND,
            e if e.is_numerical() => StatusCode::INTERNAL_SERVER_ERROR,
            BenchError::Io { .. } | BenchError::Format(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        (status, Json(serde_json::json!({ "error": self.0.to_string() }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/state", get(get_state))
        .route("/tune", post(post_tune))
        .route("/s11", get(get_s11))
        .route("/fire", post(post_fire))
        .route("/pump", post(post_pump))
        .route("/shots", get(get_shots))
        .route("/shots/{id}/{kind}", get(get_shot_artifact))
        .route("/events", get(get_events))
        .route("/autofire", post(post_autofire))
        .with_state(state)
}

async fn get_state(State(app): State<AppState>) -> Json<StateView> {
    Json(app.state())
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuneRequest {
    pub height_mm: Option<f64>,
    pub f_target_hz: Option<f64>,
    pub step_hz: Option<f64>,
}

impl TuneRequest {
    fn target(&self) -> Result<TuneTarget, BenchError> {
        match (self.height_mm, self.f_target_hz, self.step_hz) {
            (Some(h), None, None) => Ok(TuneTarget::HeightMm(h)),
            (None, Some(f), None) => Ok(TuneTarget::FrequencyHz(f)),
            (None, None, Some(d)) => Ok(TuneTarget::StepHz(d)),
            _ => Err(BenchError::InvalidInput(
                "give exactly one of height_mm, f_target_hz, step_hz".into(),
            )),
        }
    }
}

#[derive(Debug, Serialize)]
struct TuneResponse {
    state: StateView,
    s11: S11Sweep,
}

async fn post_tune(State(app): State<AppState>, Json(req): Json<TuneRequest>) -> ApiResult<Json<TuneResponse>> {
    let s11 = app.tune(req.target()?).await?;
    Ok(Json(TuneResponse {
        state: app.state(),
        s11,
    }))
}

#[derive(Debug, Default, Deserialize)]
pub struct S11Query {
    pub span_hz: Option<f64>,
    pub points: Option<usize>,
}

async fn get_s11(State(app): State<AppState>, Query(q): Query<S11Query>) -> ApiResult<Json<S11Sweep>> {
    let (r, span, points) = {
        let s = app.0.snapshot.read().unwrap();
        (s.resonator.clone(), q.span_hz.unwrap_or(s.vna_span_hz), q.points.unwrap_or(s.vna_points))
    };
    if points > 100_000 {
        return Err(BenchError::InvalidInput("at most 100000 points".into()).into());
    }
    let sweep = tokio::task::spawn_blocking(move || s11_sweep(&r, span, points).map(|t| S11Sweep::from(&t)))
        .await
        .map_err(|e| BenchError::InvalidInput(e.to_string()))??;
    Ok(Json(sweep))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FireRequest {
    pub energy_mj: Option<f64>,
}

async fn post_fire(State(app): State<AppState>, body: Option<Json<FireRequest>>) -> ApiResult<Json<ShotRecord>> {
    let energy = body.and_then(|Json(b)| b.energy_mj).map(|mj| mj / 1e3);
    Ok(Json(app.fire(energy).await?))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpRequest {
    pub energy_mj: f64,
}

async fn post_pump(State(app): State<AppState>, Json(req): Json<PumpRequest>) -> ApiResult<Json<StateView>> {
    app.mutate(false, move |s| s.set_pump_energy(req.energy_mj / 1e3)).await?;
    Ok(Json(app.state()))
}

async fn get_shots(State(app): State<AppState>) -> Json<Vec<ShotRecord>> {
    Json(app.0.snapshot.read().unwrap().shots.clone())
}

#[derive(Debug, Default, Deserialize)]
pub struct ArtifactQuery {
    /// `csv` returns the stored file as is.
    pub format: Option<String>,
    pub t_start_s: Option<f64>,
    pub t_stop_s: Option<f64>,
    pub max_points: Option<usize>,
}

#[derive(Debug, Serialize)]
struct TraceView {
    t_s: Vec<f64>,
    v_volts: Vec<f64>,
    sample_rate_hz: f64,
    load_ohms: f64,
    carrier_hint_hz: f64,
    /// Every `stride`-th sample of the requested window is returned.
    stride: usize,
}

#[derive(Debug, Serialize)]
struct EnvelopeView {
    t_s: Vec<f64>,
    a_re: Vec<f64>,
    a_im: Vec<f64>,
    n_photons: Vec<f64>,
    w: Vec<f64>,
    p_out_w: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct SpectrumView {
    #[serde(flatten)]
    spectrum: shot::StoredSpectrum,
    splitting_hz: Option<f64>,
    carrier_est_hz: Option<f64>,
}

fn window(t: &[f64], q: &ArtifactQuery) -> (usize, usize, usize) {
    let lo = q.t_start_s.map_or(0, |t0| t.partition_point(|&x| x < t0));
    let hi = q.t_stop_s.map_or(t.len(), |t1| t.partition_point(|&x| x <= t1)).max(lo);
    let stride = q.max_points.map_or(1, |m| (hi - lo).div_ceil(m.max(1)).max(1));
    (lo, hi, stride)
}

fn csv_response(path: PathBuf) -> ApiResult<Response> {
    let body = std::fs::read(&path).map_err(|e| BenchError::io(&path, e))?;
    Ok(([(header::CONTENT_TYPE, "text/csv")], body).into_response())
}

async fn get_shot_artifact(
    State(app): State<AppState>,
    Path((id, kind)): Path<(u64, String)>,
    Query(q): Query<ArtifactQuery>,
) -> ApiResult<Response> {
    let record = app
        .0
        .snapshot
        .read()
        .unwrap()
        .shots
        .iter()
        .find(|r| r.id == id)
        .cloned()
        .ok_or(BenchError::UnknownShot(id))?;
    let dir = app.0.run_dir.join(crate::session::SHOTS_DIR).join(id.to_string());
    let csv = q.format.as_deref() == Some("csv");
    let resp = tokio::task::spawn_blocking(move || -> ApiResult<Response> {
        Ok(match kind.as_str() {
            "trace" if csv => csv_response(dir.join(TRACE_FILE))?,
            "trace" => {
                let tr = shot::read_trace(&dir)?;
                let (lo, hi, stride) = window(&tr.t, &q);
                Json(TraceView {
                    t_s: tr.t[lo..hi].iter().step_by(stride).copied().collect(),
                    v_volts: tr.v[lo..hi].iter().step_by(stride).copied().collect(),
                    sample_rate_hz: tr.sample_rate_hz,
                    load_ohms: tr.load_ohms,
                    carrier_hint_hz: tr.carrier_hint_hz,
                    stride,
                })
                .into_response()
            }
            "envelope" if csv => csv_response(dir.join(shot::ENVELOPE_FILE))?,
            "envelope" => {
                let e = shot::read_envelope(&dir)?;
                let (lo, hi, stride) = window(&e.t, &q);
                let pick = |v: &[f64]| v[lo..hi].iter().step_by(stride).copied().collect();
                let re: Vec<f64> = e.a.iter().map(|a| a.re).collect();
                let im: Vec<f64> = e.a.iter().map(|a| a.im).collect();
                Json(EnvelopeView {
                    t_s: pick(&e.t),
                    a_re: pick(&re),
                    a_im: pick(&im),
                    n_photons: pick(&e.n_photons),
                    w: pick(&e.w),
                    p_out_w: pick(&e.p_out),
                })
                .into_response()
            }
            "spectrum" if csv => csv_response(dir.join(SPECTRUM_FILE))?,
            "spectrum" => {
                let spectrum = shot::read_spectrum(&dir)?
                    .ok_or_else(|| BenchError::InvalidInput(format!("shot {id} has no spectrum")))?;
                Json(SpectrumView {
                    spectrum,
                    splitting_hz: record.splitting_hz,
                    carrier_est_hz: record.metrics.as_ref().and_then(|m| m.carrier_est_hz),
                })
                .into_response()
            }
            "metrics" => Json(shot::read_metrics(&dir)?).into_response(),
            other => {
                return Ok((
                    StatusCode::NOT_FOUND,
                    Json(serde_json::json!({
                        "error": format!("unknown artifact {other:?}; use trace, envelope, spectrum or metrics")
                    })),
                )
                    .into_response())
            }
        })
    })
    .await
    .map_err(|e| BenchError::InvalidInput(e.to_string()))??;
    Ok(resp)
}

async fn get_events(State(app): State<AppState>) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let rx = app.subscribe();
    let stream = stream::unfold(rx, |mut rx| async move {
        loop {
            match rx.recv().await {
                Ok(ev) => {
                    let event = Event::default()
                        .event(ev.name())
                        .json_data(&ev)
                        .unwrap_or_else(|_| Event::default().event("error"));
                    return Some((Ok(event), rx));
                }
                // A slow client skips what it missed and carries on.
                Err(broadcast::error::RecvError::Lagged(_)) => continue,
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    });
    Sse::new(stream).keep_alive(KeepAlive::default())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AutoFireRequest {
    pub enabled: bool,
    pub rate_hz: Option<f64>,
}

async fn post_autofire(State(app): State<AppState>, Json(req): Json<AutoFireRequest>) -> ApiResult<Json<AutoFireState>> {
    let rate = if req.enabled {
        Some(req.rate_hz.ok_or_else(|| BenchError::InvalidInput("rate_hz is required to enable".into()))?)
    } else {
        None
    };
    Ok(Json(app.set_autofire(rate)?))
}

/// Open the session described by `config` and serve it on `addr` until
/// interrupted.
pub async fn serve(session: BenchSession, addr: &str) -> Result<(), BenchError> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| BenchError::io(std::path::Path::new(addr), e))?;
    let local = listener.local_addr().map_err(|e| BenchError::io(std::path::Path::new(addr), e))?;
    eprintln!("maser bench listening on http://{local}");
    let app = router(AppState::new(session));
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| BenchError::io(std::path::Path::new(addr), e))
}
