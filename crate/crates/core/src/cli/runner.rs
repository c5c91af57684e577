//! Executes the checks of a compiled job over its seeded sample.

use super::config::{CheckKind, ConfigError, Job};
use super::json::Report;
use super::sampling::sample;
use crate::brackets::hamiltonian_vector_field;
use crate::canonicity::{bracket_residual, recover_new_hamiltonian, symplectic_defect, time_dependent_canonicity};
use crate::error::{Error, Result};
use crate::flows::{check_group_law, default_steps, flow_map, infinitesimal_generator, FlowMap};
use crate::genfun::{infinitesimal_map, GeneratedMap, NewtonOptions};
use crate::numdiff::{gradient, Scalar};
use crate::phase::{ExprMap, ExtendedPoint, PhaseMap};
use crate::report::{max_abs, CheckReport};
use crate::symmetry::{invariance_defect, noether_forward, noether_reverse};

/// Step sizes of the infinitesimal-scaling check, each half the last.
pub const SCALING_EPSILONS: [f64; 3] = [1e-2, 5e-3, 2.5e-3];

/// Points whose infinitesimal defect per ε² is below this carry no
/// information about the scaling and are skipped.
const NEGLIGIBLE_SCALED_DEFECT: f64 = 1e-8;

/// Any concrete map a check can be run against.
#[derive(Debug, Clone)]
pub enum SubjectMap {
    Expr(ExprMap),
    Generated(GeneratedMap),
    Flow(FlowMap),
}

impl PhaseMap for SubjectMap {
    fn n(&self) -> usize {
        match self {
            SubjectMap::Expr(m) => m.n(),
            SubjectMap::Generated(m) => m.n(),
            SubjectMap::Flow(m) => m.n(),
        }
    }

    fn apply<T: Scalar>(&self, x: &[T]) -> Result<Vec<T>> {
        match self {
            SubjectMap::Expr(m) => m.apply(x),
            SubjectMap::Generated(m) => m.apply(x),
            SubjectMap::Flow(m) => m.apply(x),
        }
    }

    fn is_time_independent(&self) -> bool {
        match self {
            SubjectMap::Expr(m) => m.is_time_independent(),
            SubjectMap::Generated(m) => m.is_time_independent(),
            SubjectMap::Flow(m) => m.is_time_independent(),
        }
    }
}

/// A map under test, with the group parameter it was taken at.
#[derive(Debug, Clone)]
pub struct Subject {
    pub label: String,
    pub s: f64,
    pub map: SubjectMap,
}

/// The maps that map-level checks run against. An explicit map wins, then
/// a generating function, then the family at each sampled s, then the
/// numerical flow of the generator at each sampled s.
pub fn subjects(job: &Job) -> Vec<Subject> {
    let s_values = &job.config.sampling.s_values;
    if let Some(m) = &job.map {
        return vec![Subject { label: "map".into(), s: 0.0, map: SubjectMap::Expr(m.clone()) }];
    }
    if let Some(f2) = &job.generating_function {
        let map = GeneratedMap::type2(f2.clone(), NewtonOptions::default());
        return vec![Subject { label: "generating function".into(), s: 0.0, map: SubjectMap::Generated(map) }];
    }
    if let Some(family) = &job.family {
        return s_values
            .iter()
            .map(|&s| Subject { label: format!("family at s = {s}"), s, map: SubjectMap::Expr(family.at(s)) })
            .collect();
    }
    if let Some(g) = &job.generator {
        return s_values
            .iter()
            .map(|&s| Subject {
                label: format!("flow at s = {s}"),
                s,
                map: SubjectMap::Flow(flow_map(g, s, default_steps(s))),
            })
            .collect();
    }
    Vec::new()
}

/// Result of running a job.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub report: Report,
    /// Some check stopped on a domain or non-finite error.
    pub domain_error: bool,
}

impl RunOutcome {
    /// 0 when every check passes, 3 on a numeric domain error, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.domain_error {
            3
        } else if self.report.pass() {
            0
        } else {
            1
        }
    }
}

/// Runs every configured check in configuration order.
pub fn run(job: &Job) -> Result<RunOutcome, ConfigError> {
    let points = sample(job)?;
    let subjects = subjects(job);
    let mut domain_error = false;
    let mut checks = Vec::with_capacity(job.config.checks.len());
    for &kind in &job.config.checks {
        let tol = job.config.tolerance(kind);
        let mut report = match run_check(job, kind, tol, &points, &subjects) {
            Ok(r) => r,
            Err(e) => {
                domain_error |= e.is_numeric_domain();
                CheckReport::failed(kind.name(), tol, e.to_string())
            }
        };
        let prefix = format!("{}: ", kind.name());
        report.notes.extend(
            job.config
                .notes
                .iter()
                .filter_map(|n| n.strip_prefix(&prefix).map(str::to_string)),
        );
        checks.push(report);
    }
    Ok(RunOutcome {
        report: Report { fixture: job.config.fixture.clone(), checks },
        domain_error,
    })
}

/// Largest value of `eval` over the sample for each subject.
fn over_subjects<E>(subjects: &[Subject], points: &[ExtendedPoint], mut eval: E) -> Result<(f64, usize, Vec<String>)>
where
    E: FnMut(&Subject, &ExtendedPoint) -> Result<f64>,
{
    let mut worst = 0.0;
    let mut notes = Vec::new();
    for subject in subjects {
        let mut local = 0.0;
        for x in points {
            local = max_abs(local, eval(subject, x)?);
        }
        notes.push(format!("{}: max {:e}", subject.label, local));
        worst = max_abs(worst, local);
    }
    Ok((worst, subjects.len() * points.len(), notes))
}

fn over_points<E>(points: &[ExtendedPoint], mut eval: E) -> Result<f64>
where
    E: FnMut(&ExtendedPoint) -> Result<f64>,
{
    let mut worst = 0.0;
    for x in points {
        worst = max_abs(worst, eval(x)?);
    }
    Ok(worst)
}

fn report(kind: CheckKind, (worst, samples, notes): (f64, usize, Vec<String>), tol: f64) -> CheckReport {
    let mut r = CheckReport::new(kind.name(), worst, tol, samples);
    r.notes = notes;
    r
}

/// The centre of the sampling box at the time of x.
fn reference(job: &Job, x: &ExtendedPoint) -> ExtendedPoint {
    let centre: Vec<f64> = job.bounds().iter().map(|[lo, hi]| 0.5 * (lo + hi)).collect();
    ExtendedPoint::from_slots(job.n, &[centre, vec![x.t]].concat())
}

fn need<'a, T>(value: &'a Option<T>, what: &str) -> Result<&'a T> {
    value
        .as_ref()
        .ok_or_else(|| Error::Dimension(format!("missing {what}")))
}

fn run_check(
    job: &Job,
    kind: CheckKind,
    tol: f64,
    points: &[ExtendedPoint],
    subjects: &[Subject],
) -> Result<CheckReport> {
    let canon_tol = job.config.tolerance(CheckKind::TimeCanonical);
    let s_values = &job.config.sampling.s_values;
    match kind {
        CheckKind::Brackets => {
            let r = over_subjects(subjects, points, |m, x| bracket_residual(&m.map, x))?;
            Ok(report(kind, r, tol))
        }
        CheckKind::Symplectic => {
            let r = over_subjects(subjects, points, |m, x| symplectic_defect(&m.map, x))?;
            Ok(report(kind, r, tol))
        }
        CheckKind::TimeCanonical => {
            let r = over_subjects(subjects, points, |m, x| {
                Ok(time_dependent_canonicity(&m.map, x, tol)?.max_residual())
            })?;
            Ok(report(kind, r, tol))
        }
        CheckKind::RecoverK => {
            let h = need(&job.hamiltonian, "hamiltonian")?;
            let expected = need(&job.expected_new_hamiltonian, "expected_new_hamiltonian")?;
            let n = job.n;
            let r = over_subjects(subjects, points, |m, x| {
                let k = recover_new_hamiltonian(&m.map, h, x, &reference(job, x), canon_tol)?;
                let want = gradient(&expected.clone().with_s(m.s), x)?;
                Ok((0..2 * n).fold(0.0, |acc, j| max_abs(acc, k.grad_qp[j] - want[j])))
            })?;
            Ok(report(kind, r, tol).with_note("compares the (q, p) gradient of the recovered K"))
        }
        CheckKind::Invariance => {
            let h = need(&job.hamiltonian, "hamiltonian")?;
            let r = over_subjects(subjects, points, |m, x| {
                invariance_defect(&m.map, h, x, &reference(job, x), canon_tol)
            })?;
            Ok(report(kind, r, tol))
        }
        CheckKind::FlowMatch => {
            let g = need(&job.generator, "generator")?;
            let family = need(&job.family, "family")?;
            let mut worst = 0.0;
            let mut notes = Vec::new();
            for &s in s_values {
                let flow = flow_map(g, s, default_steps(s));
                let closed = family.at(s);
                let local = over_points(points, |x| Ok(flow.apply_point(x)?.distance(&closed.apply_point(x)?)))?;
                notes.push(format!("s = {s}: max {local:e} with {} steps", default_steps(s)));
                worst = max_abs(worst, local);
            }
            Ok(report(kind, (worst, points.len() * s_values.len(), notes), tol))
        }
        CheckKind::GroupLaw => {
            let g = need(&job.generator, "generator")?;
            let pairs: Vec<(f64, f64)> = if s_values.len() == 1 {
                vec![(s_values[0], s_values[0])]
            } else {
                s_values.windows(2).map(|w| (w[0], w[1])).collect()
            };
            let mut worst = 0.0;
            let mut notes = Vec::new();
            for &(s1, s2) in &pairs {
                let steps = default_steps(s1.abs() + s2.abs());
                let local = over_points(points, |x| Ok(check_group_law(g, x, s1, s2, steps, tol)?.max_residual))?;
                notes.push(format!("s1 = {s1}, s2 = {s2}: max {local:e}"));
                worst = max_abs(worst, local);
            }
            Ok(report(kind, (worst, points.len() * pairs.len(), notes), tol))
        }
        CheckKind::GeneratorExtract => {
            let g = need(&job.generator, "generator")?;
            let family = need(&job.family, "family")?;
            let worst = over_points(points, |x| {
                let v = infinitesimal_generator(family, x, tol)?;
                Ok(v.distance(&hamiltonian_vector_field(g, x)?))
            })?;
            Ok(CheckReport::new(kind.name(), worst, tol, points.len())
                .with_note("d/ds of the family at s = 0 against the Hamiltonian field of the generator"))
        }
        CheckKind::NoetherForward => {
            let g = need(&job.generator, "generator")?;
            let h = need(&job.hamiltonian, "hamiltonian")?;
            noether_forward(g, h, points, tol)
        }
        CheckKind::NoetherReverse => {
            let g = need(&job.generator, "generator")?;
            let h = need(&job.hamiltonian, "hamiltonian")?;
            Ok(noether_reverse(g, h, points, tol)?.report)
        }
        CheckKind::InfinitesimalScaling => {
            let g = need(&job.generator, "generator")?;
            infinitesimal_scaling(g, points, tol)
        }
    }
}

/// Symplectic defect of the infinitesimal map divided by ε², over three
/// halvings of ε. The residual is the largest relative spread of that
/// ratio at a point; a value below `tol` means the defect is O(ε²).
fn infinitesimal_scaling(g: &crate::phase::ScalarField, points: &[ExtendedPoint], tol: f64) -> Result<CheckReport> {
    let mut worst = 0.0;
    let mut used = 0;
    let mut ratio_range = (f64::INFINITY, 0.0f64);
    for x in points {
        let ratios = SCALING_EPSILONS
            .iter()
            .map(|&e| Ok(symplectic_defect(&infinitesimal_map(g, e), x)? / (e * e)))
            .collect::<Result<Vec<f64>>>()?;
        let hi = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        if ratios.iter().any(|r| r.is_nan()) {
            worst = f64::NAN;
            continue;
        }
        if hi < NEGLIGIBLE_SCALED_DEFECT {
            continue;
        }
        used += 1;
        ratio_range = (ratio_range.0.min(lo), ratio_range.1.max(hi));
        worst = max_abs(worst, (hi - lo) / hi);
    }
    let mut r = CheckReport::new(CheckKind::InfinitesimalScaling.name(), worst, tol, used);
    r.notes.push(format!("epsilons {SCALING_EPSILONS:?}"));
    if used < points.len() {
        r.notes.push(format!("{} points with negligible defect skipped", points.len() - used));
    }
    if used == 0 {
        r.verdict = crate::report::Verdict::NotApplicable;
        r.notes.push("defect is negligible everywhere; nothing to scale".into());
    } else {
        r.notes.push(format!("defect / eps^2 ranges over [{:e}, {:e}]", ratio_range.0, ratio_range.1));
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::config::JobConfig;
    use crate::cli::fixtures::FIXTURES;

    fn run_toml(src: &str) -> RunOutcome {
        run(&JobConfig::from_toml(src).unwrap().compile().unwrap()).unwrap()
    }

    #[test]
    fn every_fixture_passes() {
        for f in &FIXTURES {
            let out = run(&f.config().compile().unwrap()).unwrap();
            for c in &out.report.checks {
                eprintln!("{:24} {:22} {:e} < {:e} {:?}", f.name, c.name, c.max_residual, c.tolerance, c.verdict);
            }
            assert_eq!(out.exit_code(), 0, "{}", f.name);
        }
    }

    #[test]
    fn doubling_q_fails_brackets_with_unit_residual() {
        let out = run_toml("n = 1\nmap = [\"2*q1\", \"p1\"]\nchecks = [\"brackets\"]\n");
        assert_eq!(out.exit_code(), 1);
        assert!((out.report.checks[0].max_residual - 1.0).abs() < 1e-12);
    }

    #[test]
    fn domain_errors_exit_three() {
        let out = run_toml("n = 1\nmap = [\"ln(q1)\", \"p1\"]\nchecks = [\"brackets\"]\n");
        assert!(out.domain_error, "{:?}", out.report);
        assert_eq!(out.exit_code(), 3);
    }

    #[test]
    fn subject_priority() {
        let job = JobConfig::from_toml(
            "n = 1\ngenerator = \"p1\"\nfamily = [\"q1 + s\", \"p1\"]\nchecks = []\n",
        )
        .unwrap()
        .compile()
        .unwrap();
        let s = subjects(&job);
        assert_eq!(s.len(), 4);
        assert!(matches!(s[0].map, SubjectMap::Expr(_)));
    }
}
