//! Buffer-aided relay selection for implant body area networks.
//!
//! An implant source reaches an on-body destination through one or more
//! decode-and-forward relays with finite FIFO buffers. Each slot the
//! selection protocol picks a single link to use from the current channel
//! qualities and buffer states. Payloads ride on QPSK or hierarchical 8-PSK,
//! where two high-priority bits pick the quadrant and a low-priority bit
//! picks a `±theta2` offset inside it.
//!
//! Modules:
//! * [`channel`]: path loss with lognormal shadowing and link qualities.
//! * [`modem`]: constellations, AWGN transmission and ML detection.
//! * [`protocol`]: the selection rules as pure functions of a slot snapshot.
//! * [`engine`]: the Monte Carlo slot loop and metric pooling.
//! * [`oracle`]: closed-form error rates, quadrature and buffer Markov chains.
//! * [`config`], [`report`], [`cli`]: TOML configuration, CSV output and the
//!   command implementations used by the `wban-relay` binary.
//!
//! ```
//! use wban_relay::{config::SimConfig, engine::run_trial, protocol::ProtocolKind};
//!
//! let mut config = SimConfig::for_protocol(ProtocolKind::Protocol1Star, 1);
//! config.run.packets = 200;
//! config.run.symbols_per_packet = 8;
//! let report = run_trial(&config, 7).unwrap();
//! assert_eq!(report.avg_system_delay, 2.0);
//! ```

pub mod channel;
pub mod cli;
pub mod config;
pub mod engine;
pub mod error;
pub mod modem;
pub mod oracle;
pub mod protocol;
pub mod report;

pub use config::SimConfig;
pub use engine::{run_simulation, run_sweep, run_trial, MetricsReport, SweepAxis};
pub use error::{Error, Result};
pub use protocol::{Action, ProtocolKind, QualityMode, SlotSnapshot};
