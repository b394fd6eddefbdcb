pub mod bytes;
pub mod canonical;
pub mod identity;
pub mod reputation;
pub mod trade;
pub mod transport;
pub mod checkpoint;
pub mod routing;
pub mod handlers;
pub mod runtime;
pub mod scenario;
