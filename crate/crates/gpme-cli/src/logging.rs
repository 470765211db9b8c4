//! Minimal stderr logging gated by the GPME_LOG environment variable
//! (quiet | info | debug, default quiet). Progress goes to stderr only,
//! so stdout stays byte-identical across runs.

use std::sync::OnceLock;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Level {
    Quiet,
    Info,
    Debug,
}

fn level() -> Level {
    static LEVEL: OnceLock<Level> = OnceLock::new();
    *LEVEL.get_or_init(|| match std::env::var("GPME_LOG").as_deref() {
        Ok("info") => Level::Info,
        Ok("debug") => Level::Debug,
        // Unknown values fall back to quiet rather than failing the run.
        _ => Level::Quiet,
    })
}

pub fn info(msg: impl AsRef<str>) {
    if level() >= Level::Info {
        eprintln!("[info] {}", msg.as_ref());
    }
}

pub fn debug(msg: impl AsRef<str>) {
    if level() >= Level::Debug {
        eprintln!("[debug] {}", msg.as_ref());
    }
}
