//! Host side of the boiler panel system: file formats, operator
//! authentication, the audit trail, the supervisory gateway with its HTTP
//! surface, and the scenario runner behind the `grs` command.

pub mod audit;
pub mod auth;
pub mod formats;
pub mod gateway;
pub mod http;
pub mod sim;
