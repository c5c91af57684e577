//! Deterministic quasi-random sample of the extended phase space.
//!
//! Points come from a Halton sequence in `2n + 1` dimensions, shifted
//! modulo 1 by a seeded random offset per coordinate, then scaled to the
//! sampling box and t-range.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{ConfigError, Job};
use crate::phase::{ExtendedPoint, Field};

/// Candidate points tried per requested point before giving up.
const ATTEMPTS_PER_POINT: usize = 100;

fn primes(count: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(count);
    let mut k = 2u64;
    while out.len() < count {
        if out.iter().take_while(|&&p| p * p <= k).all(|&p| !k.is_multiple_of(p)) {
            out.push(k);
        }
        k += 1;
    }
    out
}

/// Van der Corput radical inverse of `index` in `base`.
fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut scale = inv;
    let mut acc = 0.0;
    while index > 0 {
        acc += (index % base) as f64 * scale;
        index /= base;
        scale *= inv;
    }
    acc
}

/// Shifted Halton points in the unit cube of dimension `dim`.
pub struct ShiftedHalton {
    bases: Vec<u64>,
    shift: Vec<f64>,
    index: u64,
}

impl ShiftedHalton {
    pub fn new(dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ShiftedHalton {
            bases: primes(dim),
            shift: (0..dim).map(|_| rng.gen::<f64>()).collect(),
            index: 0,
        }
    }
}

impl Iterator for ShiftedHalton {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        self.index += 1;
        Some(
            self.bases
                .iter()
                .zip(&self.shift)
                .map(|(&b, &s)| (radical_inverse(self.index, b) + s).fract())
                .collect(),
        )
    }
}

/// Draws the job's sample. Points inside an exclusion band, or where an
/// exclusion expression cannot be evaluated, are skipped.
pub fn sample(job: &Job) -> Result<Vec<ExtendedPoint>, ConfigError> {
    let n = job.n;
    let sampling = &job.config.sampling;
    let bounds = job.bounds();
    let [t0, t1] = sampling.t_range;
    let mut points = Vec::with_capacity(sampling.count);
    let cap = sampling.count.saturating_mul(ATTEMPTS_PER_POINT);
    for u in ShiftedHalton::new(2 * n + 1, sampling.seed).take(cap) {
        let mut slots: Vec<f64> = bounds
            .iter()
            .zip(&u)
            .map(|([lo, hi], v)| lo + (hi - lo) * v)
            .collect();
        slots.push(t0 + (t1 - t0) * u[2 * n]);
        let excluded = job.exclusions.iter().any(|(e, lo, hi)| match e.eval_at(&slots) {
            Ok(v) => *lo < v && v < *hi,
            Err(_) => true,
        });
        if excluded {
            continue;
        }
        points.push(ExtendedPoint::from_slots(n, &slots));
        if points.len() == sampling.count {
            return Ok(points);
        }
    }
    Err(ConfigError::new(
        "sampling.exclude",
        format!("only {} of {} points survive the exclusions", points.len(), sampling.count),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::config::JobConfig;

    #[test]
    fn halton_base_two_and_three() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(6, 2), 0.375);
        assert!((radical_inverse(5, 3) - 7.0 / 9.0).abs() < 1e-15);
        assert_eq!(primes(5), vec![2, 3, 5, 7, 11]);
    }

    fn job(extra: &str) -> Job {
        JobConfig::from_toml(&format!("n = 1\nmap = [\"q1\", \"p1\"]\nchecks = []\n{extra}"))
            .unwrap()
            .compile()
            .unwrap()
    }

    #[test]
    fn sample_is_seeded_and_in_the_box() {
        let a = sample(&job("")).unwrap();
        let b = sample(&job("")).unwrap();
        let c = sample(&job("[sampling]\nseed = 7\n")).unwrap();
        assert_eq!(a.len(), 100);
        assert_eq!(a, b);
        assert_ne!(a, c);
        for x in &a {
            assert!(x.q[0].abs() <= 2.0 && x.p[0].abs() <= 2.0);
            assert!((0.0..=2.0).contains(&x.t));
        }
    }

    #[test]
    fn exclusions_are_honoured() {
        let j = job("[sampling]\nexclude = [{ expr = \"abs(q1)\", lo = -1.0, hi = 0.5 }]\n");
        let pts = sample(&j).unwrap();
        assert_eq!(pts.len(), 100);
        assert!(pts.iter().all(|x| x.q[0].abs() >= 0.5));
    }

    #[test]
    fn impossible_exclusion_is_a_config_error() {
        let j = job("[sampling]\nexclude = [{ expr = \"q1\", lo = -3.0, hi = 3.0 }]\n");
        assert_eq!(sample(&j).unwrap_err().path, "sampling.exclude");
    }
}
