//! Verification suites: each reruns a block of reference computations and
//! records every comparison, so a report says what was checked and how closely.

use std::f64::consts::{FRAC_PI_4, FRAC_PI_6, SQRT_2};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bl::{bl_two_dirac, d_bl};
use crate::dynamic::{continuity_residual, w_dynamic, GridConfig, SolverConfig};
use crate::error::{Error, Result};
use crate::graph::{validate_interpolation, Interpolation, WeightedGraph};
use crate::graph_wasserstein::{constant_speed_deviation, two_node_geodesic, wg_dynamic, wg_two_node, SimplexPoint};
use crate::lifted::{d_lot, d_lot_ground, lot_embed, sample_reference, SimplexCost};
use crate::measure::DiscreteVectorMeasure;
use crate::pde;
use crate::static_ot::{
    check_chain_with, d_w_matrix, example_measures, lifted_semimetric_upper, random_instance,
    simplex_distance_matrix, triangle_failure_witness, two_node_examples, w2w, ChainConfig, ChainContext,
    WitnessSearch,
};

/// Where an expected value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    /// Stated in the published derivation.
    Published,
    /// Computed by an independent method (closed form, quadrature, brute force).
    Oracle,
    /// Follows from an algebraic identity or a structural property.
    Identity,
}

/// How `computed` is compared with `expected`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// `|computed − expected| ≤ tolerance`.
    Within,
    /// `computed ≤ expected + tolerance`.
    AtMost,
    /// `computed ≥ expected − tolerance`.
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub expected: f64,
    pub computed: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub source: Source,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// A known gap between a published value and what the library computes.
/// Notes are informational and never fail a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Note {
    pub name: String,
    pub published: f64,
    pub computed: f64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub suite: Suite,
    pub checks: Vec<Check>,
    pub notes: Vec<Note>,
}

impl VerificationReport {
    fn new(suite: Suite) -> Self {
        Self { suite, checks: Vec::new(), notes: Vec::new() }
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    fn record(&mut self, name: &str, source: Source, cmp: Comparison, expected: f64, tolerance: f64, computed: Result<f64>) {
        let (computed, error) = match computed {
            Ok(v) => (v, None),
            Err(e) => (f64::NAN, Some(e.to_string())),
        };
        let pass = match cmp {
            Comparison::Within => (computed - expected).abs() <= tolerance,
            Comparison::AtMost => computed <= expected + tolerance,
            Comparison::AtLeast => computed >= expected - tolerance,
        };
        self.checks.push(Check { name: name.into(), expected, computed, tolerance, comparison: cmp, source, pass, error });
    }

    fn within(&mut self, name: &str, source: Source, expected: f64, tolerance: f64, computed: Result<f64>) {
        self.record(name, source, Comparison::Within, expected, tolerance, computed);
    }

    fn at_most(&mut self, name: &str, source: Source, bound: f64, tolerance: f64, computed: Result<f64>) {
        self.record(name, source, Comparison::AtMost, bound, tolerance, computed);
    }

    fn at_least(&mut self, name: &str, source: Source, bound: f64, tolerance: f64, computed: Result<f64>) {
        self.record(name, source, Comparison::AtLeast, bound, tolerance, computed);
    }

    /// Records a check on a value that may itself have failed to compute.
    fn expect(&mut self, name: &str, source: Source, cmp: Comparison, expected: Result<f64>, tolerance: f64, computed: Result<f64>) {
        match expected {
            Ok(e) => self.record(name, source, cmp, e, tolerance, computed),
            Err(err) => self.record(name, source, cmp, f64::NAN, tolerance, Err(err)),
        }
    }
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "suite {}", self.suite)?;
        for c in &self.checks {
            let op = match c.comparison {
                Comparison::Within => "≈",
                Comparison::AtMost => "≤",
                Comparison::AtLeast => "≥",
            };
            write!(
                f,
                "  {} {:<44} computed {:.10} {op} {:.10} (tol {:.1e}, {:?})",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.computed,
                c.expected,
                c.tolerance,
                c.source
            )?;
            if let Some(e) = &c.error {
                write!(f, " error: {e}")?;
            }
            writeln!(f)?;
        }
        for n in &self.notes {
            writeln!(f, "  NOTE {:<44} published {:.10} computed {:.10}: {}", n.name, n.published, n.computed, n.text)?;
        }
        let failed = self.failures().count();
        writeln!(f, "{} checks, {} failed, {} notes", self.checks.len(), failed, self.notes.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Examples,
    Chain,
    Pde,
    Lot,
    Interpolation,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Examples, Suite::Chain, Suite::Pde, Suite::Lot, Suite::Interpolation];
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Suite::Examples => "examples",
            Suite::Chain => "chain",
            Suite::Pde => "pde",
            Suite::Lot => "lot",
            Suite::Interpolation => "interpolation",
        };
        f.write_str(s)
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|v| v.to_string() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::Parse(format!("unknown suite '{s}' (expected examples | chain | pde | lot | interpolation)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    /// Seeds the random instances; the chain suite uses `1000·seed + k`.
    pub seed: u64,
    pub chain_instances: usize,
    pub chain: ChainConfig,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { seed: 7, chain_instances: 20, chain: ChainConfig::default() }
    }
}

/// Runs one suite. Computation errors become failed checks.
pub fn verify_suite(suite: Suite, opts: &VerifyOptions) -> VerificationReport {
    match suite {
        Suite::Examples => examples(),
        Suite::Chain => chain(opts),
        Suite::Pde => pde_suite(),
        Suite::Lot => lot(opts.seed),
        Suite::Interpolation => interpolation(opts.seed),
    }
}

const EX_A: f64 = 0.3;
const EX_B: f64 = 0.6;
const SOLVER_TOL: f64 = 2e-2;
const LP_TOL: f64 = 1e-6;

fn examples() -> VerificationReport {
    use Source::*;
    let mut r = VerificationReport::new(Suite::Examples);
    let geo = Interpolation::Geometric;
    let g = match WeightedGraph::two_node(1.0) {
        Ok(g) => g,
        Err(e) => {
            r.within("two-node graph", Identity, 0.0, 0.0, Err(e));
            return r;
        }
    };
    let cfg = SolverConfig::default();

    r.within(
        "W_G(e1, e2) arithmetic, T = 64",
        Oracle,
        SQRT_2,
        SOLVER_TOL,
        wg_dynamic(&g, &Interpolation::Arithmetic, &[1.0, 0.0], &[0.0, 1.0], 64, &cfg).map(|w| w.distance),
    );
    let d_half_3q = wg_two_node(&geo, 1.0, 0.5, 0.75);
    r.expect(
        "W_G((1/2,1/2), (3/4,1/4)) geometric, T = 64",
        Oracle,
        Comparison::Within,
        d_half_3q.clone(),
        5e-3,
        wg_dynamic(&g, &geo, &[0.5, 0.5], &[0.75, 0.25], 64, &cfg).map(|w| w.distance),
    );
    match two_node_geodesic(&geo, 1.0, 0.5, 0.75, 64) {
        Ok(path) => {
            let end = path.states.last().map(|p| p[0]).unwrap_or(f64::NAN);
            r.at_most("geodesic endpoint error", Identity, 0.0, 1e-6, Ok((end - 0.75).abs()));
            r.at_most("geodesic constant-speed deviation", Identity, 0.0, 1e-6, constant_speed_deviation(&geo, 1.0, &path));
        }
        Err(e) => r.at_most("geodesic endpoint error", Identity, 0.0, 1e-6, Err(e)),
    }

    let (ex, [m1, m2, m3]) = match (two_node_examples(&geo, 1.0, EX_A, EX_B), example_measures(EX_A, EX_B)) {
        (Ok(ex), Ok(m)) => (ex, m),
        (Err(e), _) | (_, Err(e)) => {
            r.within("example closed forms", Oracle, 0.0, 0.0, Err(e));
            return r;
        }
    };
    r.within("W(mu1, mu2) closed form", Published, EX_A, 0.0, Ok(ex.w12));
    let grid = GridConfig { x_min: -0.6, x_max: 0.6, cells: 32 };
    let dynamic = |a: &DiscreteVectorMeasure, b: &DiscreteVectorMeasure| -> Result<(f64, f64)> {
        let s = w_dynamic(&g, &geo, a, b, &grid, 16, &cfg)?;
        Ok((s.distance, continuity_residual(&s.solution, &g)?))
    };
    let residual_cap = 10.0 * cfg.tol;
    for (name, a, b, expected, cmp, source) in [
        ("W(mu1, mu2) dynamic", &m1, &m2, ex.w12, Comparison::Within, Published),
        ("W(mu1, mu3) dynamic", &m1, &m3, ex.w13, Comparison::Within, Oracle),
        ("W(mu2, mu3) dynamic vs a + d(1/2, b)", &m2, &m3, ex.w23_upper, Comparison::AtMost, Published),
    ] {
        let out = dynamic(a, b);
        r.record(name, source, cmp, expected, SOLVER_TOL, out.clone().map(|v| v.0));
        r.at_most(&format!("{name}: continuity residual"), Identity, 0.0, residual_cap, out.map(|v| v.1));
    }

    let pts: Vec<SimplexPoint> = [0.0, 2.0 * EX_B - 1.0, 0.5, 1.0]
        .iter()
        .filter_map(|&v| SimplexPoint::new(vec![v]).ok())
        .collect();
    match simplex_distance_matrix(&g, &geo, &pts, 16, &cfg) {
        Ok(ds) => {
            r.within("D(mu1, mu2) grid LP", Published, EX_A, LP_TOL, lifted_semimetric_upper(&m1, &m2, &pts, &ds).map(|u| u.upper_bound));
            r.within(
                "D(mu2, mu3) grid LP vs sqrt(a^2 + d(0, 2b-1)^2 / 2)",
                Published,
                ex.d23,
                LP_TOL,
                lifted_semimetric_upper(&m2, &m3, &pts, &ds).map(|u| u.upper_bound),
            );
        }
        Err(e) => r.within("simplex distance table", Oracle, 0.0, 0.0, Err(e)),
    }
    match triangle_failure_witness(&geo, 1.0, &WitnessSearch::default()) {
        Ok(w) => r.at_least("triangle failure margin of D", Published, 1e-6, 0.0, Ok(w.lhs - w.rhs)),
        Err(e) => r.at_least("triangle failure margin of D", Published, 1e-6, 0.0, Err(e)),
    }
    r.within("d_BL(mu1, mu2) vs exact optimum", Oracle, SQRT_2 * bl_two_dirac(EX_A) / 2.0, 1e-9, d_bl(&m1, &m2));

    // published values that the computation does not reproduce
    if let Ok(d) = d_half_3q {
        r.notes.push(Note {
            name: "D(mu1, mu3), geometric, b = 3/4".into(),
            published: FRAC_PI_6,
            computed: d,
            text: "pi/6 is the integral of (a(1-a))^(-1/2) over [1/2, 3/4]; the distance integrand for theta = sqrt(st) is (a(1-a))^(-1/4)".into(),
        });
    }
    let w13 = example_measures(EX_A, 0.75).and_then(|[m1, _, m3]| {
        let dw = d_w_matrix(&g, &geo, 16, &cfg)?;
        Ok(w2w(&m1, &m3, &dw)?.distance)
    });
    if let Ok(w) = w13 {
        r.notes.push(Note {
            name: "W_2,W(mu1, mu3), geometric, b = 3/4".into(),
            published: FRAC_PI_4,
            computed: w,
            text: "the optimal coupling moves mass b - 1/2 between the corners, giving sqrt(b - 1/2) d(0, 1); pi/4 equals (b - 1/2) pi, i.e. the (a(1-a))^(-1/2) integrand and the mass without its square root".into(),
        });
    }
    if let Ok(v) = d_bl(&m1, &m2) {
        r.notes.push(Note {
            name: format!("d_BL(mu1, mu2), a = {EX_A}"),
            published: EX_A / SQRT_2,
            computed: v,
            text: "the exact discrete optimum is sqrt(2) a / sqrt(4 + a^2), which approaches a / sqrt(2) only as a -> 0".into(),
        });
    }
    r
}

fn chain(opts: &VerifyOptions) -> VerificationReport {
    let mut r = VerificationReport::new(Suite::Chain);
    let f = Interpolation::Geometric;
    let graphs = [WeightedGraph::two_node(1.0), WeightedGraph::complete(3, 1.0)];
    let mut contexts = Vec::new();
    for g in &graphs {
        let ctx = g.clone().and_then(|g| ChainContext::new(&g, &f, &opts.chain).map(|c| (g, c)));
        contexts.push(ctx);
    }
    for k in 0..opts.chain_instances as u64 {
        let seed = 1000 * opts.seed + k;
        let outcome = random_instance(seed, 4).and_then(|(n, mu, nu)| {
            let (g, ctx) = contexts[n - 2].as_ref().map_err(Clone::clone)?;
            check_chain_with(ctx, g, &f, &mu, &nu, &opts.chain)
        });
        match outcome {
            Ok(rep) => {
                let c = &opts.chain;
                let name = |link: &str| format!("seed {seed}: {link}");
                r.at_least(&name("W_dyn >= min(1, Q^-1/2) d_BL"), Source::Published, rep.lower_bound, c.chain_tol, Ok(rep.w_dyn));
                r.at_most(&name("W_dyn <= D_upper"), Source::Published, rep.d_upper, c.chain_tol, Ok(rep.w_dyn));
                r.at_most(&name("D_upper <= W_2,W"), Source::Published, rep.w2w, c.lp_tol, Ok(rep.d_upper));
                r.at_most(&name("W_2,W <= sqrt bound"), Source::Published, rep.upper_bound, c.bound_tol, Ok(rep.w2w));
            }
            Err(e) => r.at_most(&format!("seed {seed}: chain"), Source::Published, 0.0, 0.0, Err(e)),
        }
    }
    r
}

fn pde_suite() -> VerificationReport {
    use Source::Identity;
    let mut r = VerificationReport::new(Suite::Pde);

    let cfg = pde::confinement_case(3, 1.0);
    let mut state = pde::bump_state(&cfg);
    let m0 = state.total_mass(&cfg);
    let mut worst_mutation: f64 = 0.0;
    let mut failure = None;
    for _ in 0..1000 {
        let step = pde::rhs(&state, &cfg).and_then(|rates| {
            let n = cfg.n();
            for cell in rates.mutation.chunks(n) {
                let mut v = cell.to_vec();
                v.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
                worst_mutation = worst_mutation.max(v.iter().sum::<f64>().abs());
            }
            pde::step(&state, &cfg)
        });
        match step {
            Ok((s, _)) => state = s,
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    match failure {
        None => {
            r.at_most("mass drift over 1000 steps", Identity, 0.0, 1e-10, Ok((state.total_mass(&cfg) - m0).abs()));
            r.at_most("per-cell mutation sum", Identity, 0.0, 1e-14, Ok(worst_mutation));
        }
        Some(e) => r.at_most("mass drift over 1000 steps", Identity, 0.0, 1e-10, Err(e)),
    }

    let cfg = pde::confinement_case(2, 1.0);
    let run = pde::run(&pde::bump_state(&cfg), &cfg, &[], |_, _| {});
    r.at_most(
        "largest energy increase per step",
        Identity,
        0.0,
        1e-10,
        run.as_ref()
            .map(|run| run.diagnostics.windows(2).map(|w| w[1].energy - w[0].energy).fold(f64::NEG_INFINITY, f64::max))
            .map_err(Clone::clone),
    );

    let cfg = pde::confinement_case(2, 0.0);
    let init = pde::bump_state(&cfg);
    let m = init.species_masses(&cfg);
    r.at_most(
        "species mass change without exchange",
        Identity,
        0.0,
        1e-12,
        pde::run(&init, &cfg, &[], |_, _| {}).map(|run| {
            let last = &run.diagnostics[run.diagnostics.len() - 1].masses;
            last.iter().zip(&m).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        }),
    );

    let single = pde::PdeConfig::new(
        GridConfig { x_min: 0.0, x_max: 1.0, cells: 1 },
        WeightedGraph::new_unchecked(nalgebra::DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])),
        Interpolation::Geometric,
        1e-3,
        1.0,
    )
    .with_potential(0, |_| 1.0);
    let mut single = single;
    single.entropy = vec![0.0, 0.0];
    let state = pde::PdeState { rho: vec![0.5, 0.5], time: 0.0 };
    r.within("single-cell exchange rate", Source::Oracle, -0.5, 1e-15, pde::rhs(&state, &single).map(|v| v.mutation[0]));
    r
}

fn lot(seed: u64) -> VerificationReport {
    let mut r = VerificationReport::new(Suite::Lot);
    let f = Interpolation::Geometric;
    let cfg = SolverConfig::default();
    let setup = |n: usize| -> Result<_> {
        let g = if n == 2 { WeightedGraph::two_node(1.0)? } else { WeightedGraph::complete(n, 1.0)? };
        let dw = d_w_matrix(&g, &f, 16, &cfg)?;
        let reference = sample_reference(48, n, 1, seed)?;
        Ok((dw, reference))
    };
    let ctx = [setup(2), setup(3)];
    for k in 0..20u64 {
        let s = 1000 * seed + 500 + k;
        let out = random_instance(s, 3).and_then(|(n, mu, nu)| {
            let (dw, reference) = ctx[n - 2].as_ref().map_err(Clone::clone)?;
            let e1 = lot_embed(reference, &mu, SimplexCost::Euclidean)?;
            let e2 = lot_embed(reference, &nu, SimplexCost::Euclidean)?;
            Ok((d_lot_ground(&e1, &e2, reference, dw)?, w2w(&mu, &nu, dw)?.distance))
        });
        match out {
            Ok((glued, exact)) => r.at_least(&format!("seed {s}: glued d >= W_2,W"), Source::Published, exact, 1e-8, Ok(glued)),
            Err(e) => r.at_least(&format!("seed {s}: glued d >= W_2,W"), Source::Published, 0.0, 1e-8, Err(e)),
        }
    }

    let triangle = (|| -> Result<f64> {
        let (_, reference) = ctx[0].as_ref().map_err(Clone::clone)?;
        let data: Vec<DiscreteVectorMeasure> = (0..5u64)
            .map(|k| random_instance(1000 * seed + 600 + 2 * k, 3).map(|v| v.1))
            .collect::<Result<_>>()?;
        let emb = data.iter().map(|m| lot_embed(reference, m, SimplexCost::Euclidean)).collect::<Result<Vec<_>>>()?;
        let mut worst = f64::NEG_INFINITY;
        for i in 0..5 {
            for j in 0..5 {
                for k in 0..5 {
                    let lhs = d_lot(&emb[i], &emb[k], reference)?;
                    let rhs = d_lot(&emb[i], &emb[j], reference)? + d_lot(&emb[j], &emb[k], reference)?;
                    worst = worst.max(lhs - rhs);
                }
            }
        }
        Ok(worst)
    })();
    r.at_most("d_LOT triangle excess over 125 triples", Source::Identity, 0.0, 1e-12, triangle);
    r
}

fn interpolation(seed: u64) -> VerificationReport {
    let mut r = VerificationReport::new(Suite::Interpolation);
    for f in [Interpolation::Arithmetic, Interpolation::Geometric, Interpolation::Logarithmic] {
        let report = validate_interpolation(&f, 2000, seed);
        r.within(&format!("{} satisfies the interpolation axioms", f.name()), Source::Identity, 0.0, 0.0, Ok(report.violations.len() as f64));
    }
    r
}
