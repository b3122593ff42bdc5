//! Trial-level data parallelism.
//!
//! Trials are independent, so they map cleanly onto a rayon pool. Without the
//! `parallel` feature every call runs sequentially. Results always come back in
//! trial order, so output does not depend on scheduling.

use std::str::FromStr;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    /// Use the rayon pool when the `parallel` feature is enabled.
    #[default]
    Parallel,
    Sequential,
}

impl FromStr for Execution {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "parallel" => Ok(Execution::Parallel),
            "sequential" => Ok(Execution::Sequential),
            other => Err(format!("unknown execution mode {other:?}")),
        }
    }
}

/// `f(0), f(1), ..., f(trials - 1)` in order.
pub fn map_trials<T, F>(trials: usize, execution: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match execution {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..trials).into_par_iter().map(f).collect()
        }
        _ => map_trials_sequential(trials, f),
    }
}

pub fn map_trials_sequential<T, F>(trials: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..trials).map(f).collect()
}

/// Like [`map_trials`] for fallible trials; the first error in trial order wins.
pub fn try_map_trials<T, E, F>(trials: usize, execution: Execution, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    map_trials(trials, execution, f).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_modes_agree() {
        let f = |t: usize| (t * t) as u64;
        assert_eq!(
            map_trials(100, Execution::Parallel, f),
            map_trials(100, Execution::Sequential, f)
        );
    }

    #[test]
    fn first_error_in_order() {
        let r: Result<Vec<usize>, usize> =
            try_map_trials(10, Execution::Parallel, |t| if t % 4 == 3 { Err(t) } else { Ok(t) });
        assert_eq!(r, Err(3));
    }
}
