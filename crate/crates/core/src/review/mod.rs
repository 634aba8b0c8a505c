//! Expert review backend: blinded packets, Likert response collection and
//! criterion aggregation, served over a JSON API.

pub mod packet;
pub mod server;
pub mod store;

pub use packet::{
    pack_review, select_review_meters, BlindingKey, FinalistInput, PackOptions, ReviewEntry, ReviewPacket,
    REVIEW_METERS, REVIEW_MONTHS,
};
pub use server::{router, serve, AppState};
pub use store::{aggregate, Ack, AggregateRow, AggregateTable, ResponseStore, ReviewResponse, CRITERIA};
