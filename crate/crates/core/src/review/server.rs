//! HTTP JSON API for the review workflow, plus static hosting of the UI bundle.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;
use tower_http::services::ServeDir;

use crate::error::Error;

use super::packet::ReviewPacket;
use super::store::{aggregate, ResponseStore, ReviewResponse};

#[derive(Debug, Clone)]
pub struct AppState {
    pub packet: Arc<ReviewPacket>,
    pub store: Arc<ResponseStore>,
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
}

struct ApiError(Error);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            Error::UnknownPacket(_) | Error::UnknownEntry(_) => StatusCode::NOT_FOUND,
            Error::NoResponses(_) => StatusCode::CONFLICT,
            Error::LikertOutOfRange { .. } | Error::InvalidParameter(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(ErrorBody { error: self.0.to_string() })).into_response()
    }
}

fn check_packet(state: &AppState, id: &str) -> Result<(), ApiError> {
    if state.packet.packet_id == id {
        Ok(())
    } else {
        Err(ApiError(Error::UnknownPacket(id.to_string())))
    }
}

async fn get_packet(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<ReviewPacket>, ApiError> {
    check_packet(&state, &id)?;
    Ok(Json((*state.packet).clone()))
}

async fn post_response(State(state): State<AppState>, Json(response): Json<ReviewResponse>) -> Response {
    match state.store.submit(&state.packet, response) {
        Ok(ack) => (StatusCode::OK, Json(ack)).into_response(),
        Err(e) => ApiError(e).into_response(),
    }
}

async fn get_aggregate(State(state): State<AppState>, Path(id): Path<String>) -> Response {
    if let Err(e) = check_packet(&state, &id) {
        return e.into_response();
    }
    match aggregate(&state.packet, &state.store.snapshot()) {
        Ok(table) => Json(table).into_response(),
        Err(e) => ApiError(e).into_response(),
    }
}

/// API routes; `static_dir`, when given, is served for every other path.
pub fn router(state: AppState, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/packet/{id}", get(get_packet))
        .route("/api/responses", post(post_response))
        .route("/api/aggregate/{id}", get(get_aggregate))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

pub async fn serve(addr: SocketAddr, state: AppState, static_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("review server listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state, static_dir)).await
}
