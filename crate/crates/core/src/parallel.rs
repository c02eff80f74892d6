//! Thread pool selection. `MAGTOMO_THREADS` pins the worker count; otherwise
//! the global rayon pool is used.

pub const THREADS_ENV: &str = "MAGTOMO_THREADS";

fn requested_threads() -> Option<usize> {
    let v = std::env::var(THREADS_ENV).ok()?;
    match v.trim().parse::<usize>() {
        Ok(n) if n > 0 => Some(n),
        _ => {
            log::warn!("ignoring {THREADS_ENV}={v:?}");
            None
        }
    }
}

/// Runs `f` inside a pool sized by `MAGTOMO_THREADS` when set.
pub fn install<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    with_threads(requested_threads(), f)
}

/// Runs `f` on a dedicated pool of `threads` workers, or the global pool.
pub fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    match threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(f),
            Err(e) => {
                log::warn!("could not build a {n}-thread pool: {e}");
                f()
            }
        },
        None => f(),
    }
}
