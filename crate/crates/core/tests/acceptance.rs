//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the lines always reach the output.
//! Every criterion is evaluated twice under the same seed and thread count;
//! the last line compares the two runs bit for bit.

use std::fmt::Write as _;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rstein_core::gaussian::NormalKernel;
use rstein_core::mc::{tail_ratios, McConfig};
use rstein_core::mdp::GammaProfile;
use rstein_core::subgraph::lemmas::{
    lemma51_generic_comparison, lemma53_check, lemma55_check, lemma56_check, remark52_weight_sum,
    remark52_weight_sum_exact, Repetition, CORRELATION_LABELS,
};
use rstein_core::subgraph::{CopyCatalog, PatternGraph, SubgraphBoundInputs, SubgraphSampler};
use rstein_core::tworuns::indicator_tail_ratio;
use rstein_core::verify::{
    brute_force_variance, core_suite, random_centered_unit, random_correlation_instance, random_mgf_instance,
    random_operator_instance, random_space, SuiteConfig,
};
use rstein_core::{CoefficientSequence, GammaConstants, TwoRunsModel};

const SEED: u64 = 20_240_917;
const THREADS: usize = 8;

const IDENTITY_TOL: f64 = 1e-9;
const TAIL_REL_TOL: f64 = 1e-13;
const COEFF_TOL: f64 = 1e-12;
const WEIGHT_TOL: f64 = 1e-14;
const SIGMA_TOL: f64 = 1e-12;
const BOUND_SLACK: f64 = 1e-12;
const CONST_REL_TOL: f64 = 1e-12;

/// Criteria that cannot hold as stated; their lines are printed but do not
/// fail the run.
const KNOWN_RED: [usize; 2] = [4, 9];

// 1 − Φ(w) for w = 0, 0.25, …, 8, computed with 50-digit arithmetic.
const TAIL_TABLE: [f64; 33] = [
    0.5,
    0.40129367431707627576,
    0.30853753872598689636,
    0.22662735237686819933,
    0.15865525393145705141,
    0.10564977366685525769,
    0.066807201268858066004,
    0.040059156863817090419,
    0.0227501319481792072,
    0.012224472655044703153,
    0.006209665325776135167,
    0.0029797632350545567543,
    0.0013498980316300945267,
    0.00057702504239076704292,
    0.00023262907903552503635,
    0.000088417285200803867818,
    0.000031671241833119921254,
    0.000010688525774934420469,
    3.3976731247300604017e-6,
    1.0170832425687031713e-6,
    2.8665157187919391167e-7,
    7.6049605164887142511e-8,
    1.8989562465887719384e-8,
    4.4621724539016118731e-9,
    9.865876450376981407e-10,
    2.0522634252189388816e-10,
    4.0160005838591178083e-11,
    7.3922577780178224195e-12,
    1.2798125438858350044e-12,
    2.0838581586720694312e-13,
    3.1908916729108962278e-14,
    4.5946274357785954602e-15,
    6.2209605742717841235e-16,
];

// |P(G > z)/(1 − Φ(z)) − 1| for the indicator weights, from an independent
// dynamic program over the pair count. Rows n = 64, 256, 1024; columns
// z = 0.5, 1.0, 1.5.
const TWO_RUNS_EXACT: [[f64; 3]; 3] = [
    [0.0992, 0.0121, 0.1755],
    [0.0222, 0.0735, 0.0307],
    [0.0186, 0.0325, 0.0617],
];
const TWO_RUNS_EXACT_TOL: f64 = 1e-4;

struct Outcome {
    id: usize,
    pass: bool,
    summary: String,
    notes: Vec<String>,
    digest: String,
}

impl Outcome {
    fn new(id: usize) -> Self {
        Self {
            id,
            pass: true,
            summary: String::new(),
            notes: Vec::new(),
            digest: String::new(),
        }
    }

    fn require(&mut self, ok: bool) {
        self.pass &= ok;
    }

    fn note(&mut self, line: String) {
        self.notes.push(line);
    }

    fn record(&mut self, values: &[f64]) {
        for v in values {
            write!(self.digest, "{:016x},", v.to_bits()).unwrap();
        }
    }
}

fn config(cases: u64) -> SuiteConfig {
    SuiteConfig {
        cases,
        seed: SEED,
        ..SuiteConfig::default()
    }
}

fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect()
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn secs(d: Duration) -> String {
    format!("{:.1}s", d.as_secs_f64())
}

fn operator_identities() -> Outcome {
    let mut out = Outcome::new(1);
    let start = Instant::now();
    let report = core_suite(&config(1000)).unwrap();
    let elapsed = start.elapsed();
    let names = [
        "E<DF,u> = E[F delta(u)]",
        "L = -delta D",
        "L L^-1 F = F (centered F)",
        "E<DF,-DL^-1 F> = Var F",
    ];
    let mut worst = 0f64;
    for name in names {
        let p = report.property(name).unwrap();
        out.require(p.instances == 1000 && p.failures == 0 && p.worst <= IDENTITY_TOL);
        worst = worst.max(p.worst);
        out.record(&[p.worst]);
    }
    out.require(elapsed < Duration::from_secs(60));
    out.summary = format!("4 identities x 1000 functionals, worst error {worst:.2e} (tol {IDENTITY_TOL:.0e}), {}", secs(elapsed));
    out
}

fn gaussian_kernel() -> Outcome {
    let mut out = Outcome::new(2);
    let grid = linspace(-8.0, 8.0, 200);
    let mut violations = 0;
    let mut checks = 0;
    for &z in &grid {
        for &w in &grid {
            for c in NormalKernel::stein_bound_checks(z, w, 1e-12) {
                checks += 1;
                violations += usize::from(!c.holds);
            }
        }
    }
    let mut mills = 0;
    for &w in grid.iter().filter(|w| **w > 0.0) {
        mills += usize::from(!NormalKernel::mills_bound_check(w).unwrap());
    }
    let mut worst_tail = 0f64;
    for (i, &want) in TAIL_TABLE.iter().enumerate() {
        let got = NormalKernel::upper_tail(0.25 * i as f64);
        worst_tail = worst_tail.max(rel(got, want));
        out.record(&[got]);
    }
    out.require(violations == 0 && mills == 0 && worst_tail <= TAIL_REL_TOL);
    out.record(&[violations as f64, mills as f64]);
    out.summary = format!(
        "{checks} f_z checks on 200x200 grid, {violations} violations; Mills bound {mills} violations; \
         tail rel error {worst_tail:.2e} (tol {TAIL_REL_TOL:.0e})"
    );
    out
}

fn operator_formulas() -> Outcome {
    let mut out = Outcome::new(3);
    let cfg = config(500);
    let (mut worst_grad, mut worst_ou) = (0f64, 0f64);
    for case in 0..500 {
        let mut rng = cfg.case_rng(301, case);
        let (space, a, k) = random_operator_instance(&mut rng);
        assert!(a.count_ones() <= 12);
        let cmp = lemma51_generic_comparison(&space, a, k).unwrap();
        worst_grad = worst_grad.max(cmp.gradient_diff);
        worst_ou = worst_ou.max(cmp.ou_diff);
        out.record(&[cmp.gradient_diff, cmp.ou_diff]);
    }
    let mut exact = true;
    let mut worst_sum = 0f64;
    for size in 1..=20 {
        exact &= remark52_weight_sum_exact(size).unwrap() == num_rational_one();
        worst_sum = worst_sum.max((remark52_weight_sum(size) - 1.0).abs());
    }
    out.require(worst_grad <= COEFF_TOL && worst_ou <= COEFF_TOL && exact && worst_sum <= WEIGHT_TOL);
    out.summary = format!(
        "500 (A, k): gradient formula {worst_grad:.2e}, OU formula {worst_ou:.2e} (tol {COEFF_TOL:.0e}); \
         weight sum exact = {exact}, float error {worst_sum:.1e}"
    );
    out
}

fn num_rational_one() -> num_rational::Ratio<u128> {
    num_rational::Ratio::from_integer(1)
}

fn product_moments() -> Outcome {
    let mut out = Outcome::new(4);
    let cfg = config(2000);
    let mut violations = vec![0usize; CORRELATION_LABELS.len()];
    let mut low_p_violations = vec![0usize; CORRELATION_LABELS.len()];
    let mut high_p = 0;
    for case in 0..2000 {
        let mut rng = cfg.case_rng(401, case);
        let inst = random_correlation_instance(&mut rng, 0.1, 0.9);
        high_p += usize::from(inst.p > 0.5);
        let report = lemma53_check(inst.sets, &inst.family, inst.p).unwrap();
        for (i, c) in report.checks.iter().enumerate() {
            if !c.holds {
                violations[i] += 1;
                if inst.p <= 0.5 {
                    low_p_violations[i] += 1;
                }
            }
            out.record(&[c.lhs, c.rhs]);
        }
    }
    let total: usize = violations.iter().sum();
    out.require(total == 0);
    out.summary = format!("2000 tuples, hosts <= 14 edges, p in [0.1, 0.9]: {total} violations");
    let per: Vec<String> = CORRELATION_LABELS.iter().zip(&violations).map(|(l, v)| format!("{l} {v}")).collect();
    out.note(format!("violations by statement: {}", per.join(", ")));
    let iii = CORRELATION_LABELS.iter().position(|l| *l == "(iii) lower").unwrap();
    let others: usize = violations.iter().enumerate().filter(|(i, _)| *i != iii).map(|(_, v)| v).sum();
    out.note(format!(
        "all statements except (iii) lower: {others} violations; (iii) lower restricted to p <= 1/2: {} violations ({} of 2000 tuples have p > 1/2)",
        low_p_violations[iii], high_p
    ));
    out.note("(iii) lower fails for p > 1/2: E[(B_k^c)^3] = pq(q - p) < 0 with A1 = A2 = A3 = {k}".into());
    out
}

fn connected_sums() -> Outcome {
    let mut out = Outcome::new(5);
    let start = Instant::now();
    let mut checks = 0;
    let mut violations = 0;
    for g in [PatternGraph::complete(2).unwrap(), PatternGraph::complete(3).unwrap()] {
        for n in 4..=6 {
            for p in [0.1, 0.5, 0.9] {
                let cat = CopyCatalog::enumerate(&g, n, p).unwrap();
                for rep in [Repetition::Allowed, Repetition::Distinct] {
                    let mut parts: Vec<(usize, Option<usize>)> = (1..=3).map(|m| (m, None)).collect();
                    parts.extend([(1, Some(1)), (2, Some(1))]);
                    for (m, mh) in parts {
                        let r = lemma55_check(&cat, m, mh, rep).unwrap();
                        checks += 1;
                        violations += usize::from(!r.holds);
                        out.record(&[r.lhs, r.rhs, r.tuples as f64]);
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    out.require(violations == 0 && elapsed < Duration::from_secs(300));
    out.summary = format!(
        "{{K2, K3}} x n 4..6 x p {{0.1, 0.5, 0.9}}, parts (i) m = 1..3 and (ii) (1,1), (2,1), both repetition rules: \
         {checks} checks, {violations} violations, {}",
        secs(elapsed)
    );
    out
}

fn mgf_comparison() -> Outcome {
    let mut out = Outcome::new(6);
    let cfg = config(200);
    let mut violations = 0;
    let mut max_edges = 0;
    for case in 0..200 {
        let mut rng = cfg.case_rng(601, case);
        let inst = random_mgf_instance(&mut rng).unwrap();
        max_edges = max_edges.max(inst.catalog.host_edge_count());
        let r = lemma56_check(&inst.catalog, &inst.a1, &inst.a2, &inst.f, inst.t).unwrap();
        violations += usize::from(!r.first_holds()) + usize::from(!r.second_holds());
        out.record(&[r.first_lhs, r.first_rhs, r.second_lhs, r.second_rhs]);
    }
    out.require(violations == 0 && max_edges <= 16);
    out.summary = format!("200 instances (largest host {max_edges} edges), exact enumeration: {violations} violations");
    out
}

fn sigma_checks() -> Outcome {
    let mut out = Outcome::new(7);
    let mut worst = 0f64;
    for g in [PatternGraph::complete(2).unwrap(), PatternGraph::path(3).unwrap(), PatternGraph::complete(3).unwrap()] {
        for p in [0.2, 0.5, 0.8] {
            let cat = CopyCatalog::enumerate(&g, 4, p).unwrap();
            let brute = brute_force_variance(&cat).unwrap();
            worst = worst.max((cat.sigma2_exact() - brute).abs());
            out.record(&[cat.sigma2_exact(), brute]);
        }
    }
    let k3 = PatternGraph::complete(3).unwrap();
    let mut lower = Vec::new();
    for p in [0.1, 0.3, 0.5, 0.9] {
        let inputs = SubgraphBoundInputs::from_catalog(&CopyCatalog::enumerate(&k3, 36, p).unwrap()).unwrap();
        let ok = inputs.certified() && inputs.sigma2 >= inputs.sigma2_lower_bound();
        out.require(ok);
        lower.push(format!("p={p}: {:.4e} >= {:.4e}", inputs.sigma2, inputs.sigma2_lower_bound()));
        out.record(&[inputs.sigma2, inputs.sigma2_lower_bound()]);
    }
    out.require(worst <= SIGMA_TOL);
    out.summary = format!("n = 4 brute force vs exact, K2/P3/K3 x 3 p: worst {worst:.2e} (tol {SIGMA_TOL:.0e}); K3 n = 36 lower bound holds");
    out.note(format!("sigma^2 vs lower bound: {}", lower.join("; ")));
    out
}

fn end_to_end() -> Outcome {
    let mut out = Outcome::new(8);
    let cfg = config(50);
    let cap = 3.0;
    let zs = linspace(0.0, cap, 31);
    let ts = linspace(0.0, cap, 13);
    let (mut informative, mut tail_violations, mut mgf_violations) = (0, 0, 0);
    let mut tightest = f64::INFINITY;
    let (mut all_cells, mut all_violations, mut min_rhs) = (0, 0, f64::INFINITY);
    for case in 0..50 {
        let mut rng = cfg.case_rng(801, case);
        let space = random_space(&mut rng, 2, 10, 0.1, 0.9);
        let f = random_centered_unit(&mut rng, &space, 0.4);
        let profile = GammaProfile::new(&f).unwrap();
        let env = profile.envelope(cap, 301).unwrap();
        for &z in &zs {
            let rhs = env.md_bound_short(z).unwrap();
            let ratio = profile.tail_probability(z) / NormalKernel::upper_tail(z);
            out.record(&[rhs, ratio]);
            let err = (ratio - 1.0).abs();
            let violated = err > rhs * (1.0 + BOUND_SLACK);
            all_cells += 1;
            all_violations += usize::from(violated);
            min_rhs = min_rhs.min(rhs);
            if rhs <= 1.0 {
                informative += 1;
                tail_violations += usize::from(violated);
                tightest = tightest.min(rhs - err);
            }
        }
        for &t in &ts {
            let mgf = profile.mgf(t);
            let bound = env.mgf_bound(t).unwrap();
            mgf_violations += usize::from(mgf > bound * (1.0 + BOUND_SLACK));
            out.record(&[mgf, bound]);
        }
    }
    out.require(tail_violations == 0 && mgf_violations == 0);
    out.summary = format!(
        "50 functionals, n <= 10: tail bound {tail_violations} violations over {informative} informative cells; \
         MGF bound {mgf_violations} violations over {} grid points",
        50 * ts.len()
    );
    if informative == 0 {
        out.note(format!(
            "no cell has RHS <= 1 at this size (smallest RHS {min_rhs:.3}); the factor 25 needs gamma_1 + gamma_2 <= 0.04"
        ));
    } else {
        out.note(format!("smallest slack rhs - |ratio - 1| over informative cells: {tightest:.3e}"));
    }
    out.note(format!("inequality checked on all {all_cells} (functional, z) cells: {all_violations} violations"));
    out.require(all_violations == 0);
    out
}

fn two_runs() -> Outcome {
    let mut out = Outcome::new(9);
    let start = Instant::now();
    let ns = [64usize, 256, 1024];
    let zs = [0.5, 1.0, 1.5];
    let consts = GammaConstants::default();
    let mc = McConfig::new(1_000_000, SEED).with_threads(THREADS);
    let mut err = [[0f64; 3]; 3];
    let mut k_fit = 0f64;
    let mut exact_ok = true;
    for (i, &n) in ns.iter().enumerate() {
        let model = TwoRunsModel::new(CoefficientSequence::indicator(n).unwrap()).unwrap();
        let est = tail_ratios(&model.sampler(), &zs, &mc).unwrap();
        for (j, e) in est.iter().enumerate() {
            err[i][j] = e.abs_error();
            k_fit = k_fit.max(err[i][j] / ((1.0 + zs[j] * zs[j]) * model.gamma_n(zs[j], consts).unwrap()));
            let exact = (indicator_tail_ratio(n, zs[j]).unwrap() - 1.0).abs();
            exact_ok &= (exact - TWO_RUNS_EXACT[i][j]).abs() <= TWO_RUNS_EXACT_TOL;
            out.record(&[e.abs_error(), e.ci_low, e.ci_high, exact]);
        }
    }
    let elapsed = start.elapsed();
    let factors: Vec<f64> = (0..3).map(|j| err[0][j] / err[2][j]).collect();
    let halved = factors.iter().all(|&f| f >= 2.0);
    out.require(halved && k_fit <= 10.0 && elapsed < Duration::from_secs(600));
    out.summary = format!(
        "|ratio - 1| n=64 -> n=1024: z=0.5 {:.4} -> {:.4} (x{:.2}), z=1.0 {:.4} -> {:.4} (x{:.2}), z=1.5 {:.4} -> {:.4} (x{:.2}); \
         fitted K = {k_fit:.3} (<= 10); {}",
        err[0][0], err[2][0], factors[0], err[0][1], err[2][1], factors[1], err[0][2], err[2][2], factors[2], secs(elapsed)
    );
    let sup = |row: &[f64; 3]| row.iter().cloned().fold(0f64, f64::max);
    out.note(format!(
        "sup over z of |ratio - 1|: n=64 {:.4}, n=256 {:.4}, n=1024 {:.4} (reduction x{:.2})",
        sup(&err[0]),
        sup(&err[1]),
        sup(&err[2]),
        sup(&err[0]) / sup(&err[2])
    ));
    out.note(format!(
        "exact law agrees with frozen oracle to {TWO_RUNS_EXACT_TOL:.0e}: {exact_ok}; at z = 1.0 the exact error is 0.0121 (n=64) vs 0.0325 (n=1024), a lattice effect no estimator can remove"
    ));
    out
}

fn subgraph_reporting() -> Outcome {
    let mut out = Outcome::new(10);
    let (n, p) = (36usize, 0.3);
    let q: f64 = 1.0 - p;
    let g = PatternGraph::complete(3).unwrap();
    let cat = CopyCatalog::enumerate(&g, n, p).unwrap();
    let inputs = SubgraphBoundInputs::from_catalog(&cat).unwrap();

    let nf = n as f64;
    let psi_direct = [nf * nf * p, nf.powi(3) * p * p, nf.powi(3) * p.powi(3)].into_iter().fold(f64::INFINITY, f64::min);
    let psi_vertex = g.psi_min_by_vertex_subsets(n, p).unwrap();
    let d_direct = 3 * n - 8;
    let copies = (n * (n - 1) * (n - 2) / 6) as f64;
    let sigma2_direct = copies * (p.powi(3) * (1.0 - p.powi(3)) + 3.0 * (nf - 3.0) * p.powi(5) * q);
    let c_g0_direct = 2f64.powi(27) * 6f64.powi(4) * 3.0 / 6f64.powf(1.5);
    let c_hat_direct = 2f64.sqrt() * 27.0;

    let checks = [
        ("psi_min", inputs.psi_min, psi_direct),
        ("psi_min (vertex subsets)", psi_vertex, psi_direct),
        ("D", inputs.d_neighbors as f64, d_direct as f64),
        ("sigma^2", inputs.sigma2, sigma2_direct),
        ("c_G0", inputs.c_g0(), c_g0_direct),
        ("c_G0 (direct product)", inputs.c_g0_direct(), c_g0_direct),
        ("c_hat", inputs.c_hat(), c_hat_direct),
    ];
    let mut mismatches = Vec::new();
    for (name, got, want) in checks {
        if rel(got, want) > CONST_REL_TOL {
            mismatches.push(format!("{name} {got} vs {want}"));
        }
        out.record(&[got]);
    }
    out.require(mismatches.is_empty());

    let th = inputs.theorem_bound(1.0).unwrap();
    let flagged = th.rhs > 1.0 && !th.informative();
    out.require(flagged);

    let sampler = SubgraphSampler::new(&cat).unwrap();
    let mc = McConfig::new(100_000, SEED).with_threads(THREADS);
    let est = tail_ratios(&sampler, &[1.0], &mc).unwrap().remove(0);
    let holds = est.abs_error() <= th.rhs;
    out.require(holds && est.ci_low <= est.ci_high);
    out.record(&[est.abs_error(), est.ci_low, est.ci_high, th.ln_rhs]);

    let ts = [0.5, 1.0, 1.5, 2.0, 3.0];
    let mut rate_lines = Vec::new();
    let mut advantage = true;
    let at = |p: f64| SubgraphBoundInputs::from_catalog(&CopyCatalog::enumerate(&g, n, p).unwrap()).unwrap();
    let (high, higher) = (at(0.9), at(0.99));
    for &t in &ts {
        let r9 = high.rate_ratio(t);
        let r99 = higher.rate_ratio(t);
        // Zhang's rate carries an extra 1/sqrt(q); scaled by sqrt(q) the
        // ratios at the two p should be of the same order.
        let s9 = r9 * 0.1f64.sqrt();
        let s99 = r99 * 0.1;
        advantage &= r9 > 1.0 && r99 > r9 && (0.5..=2.0).contains(&(s99 / s9));
        rate_lines.push(format!("t={t}: {r9:.3} (p=0.9), {r99:.3} (p=0.99)"));
        out.record(&[r9, r99]);
    }
    out.require(advantage);

    out.summary = format!(
        "K3 n=36 p=0.3: Psi_min {:.1}, D {}, sigma^2 {:.3}, c_G0 {:.4e}, c_hat {:.4} agree across two routes{}; \
         theorem RHS at t=1 is 10^{:.3e}, flagged non-informative",
        inputs.psi_min,
        inputs.d_neighbors,
        inputs.sigma2,
        inputs.c_g0(),
        inputs.c_hat(),
        if mismatches.is_empty() { String::new() } else { format!(" EXCEPT {}", mismatches.join(", ")) },
        th.ln_rhs / std::f64::consts::LN_10
    );
    out.note(format!(
        "t=1, 1e5 samples: |ratio - 1| = {:.4} (ratio CI [{:.4}, {:.4}]), theorem inequality holds: {holds}",
        est.abs_error(),
        est.ci_low,
        est.ci_high
    ));
    out.note(format!("comparison rate / ours: {}", rate_lines.join("; ")));
    out
}

fn run_all() -> Vec<Outcome> {
    vec![
        operator_identities(),
        gaussian_kernel(),
        operator_formulas(),
        product_moments(),
        connected_sums(),
        mgf_comparison(),
        sigma_checks(),
        end_to_end(),
        two_runs(),
        subgraph_reporting(),
    ]
}

fn main() -> ExitCode {
    // `cargo test -- --list` and filters from other targets should not trigger
    // a full run.
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    if let Some(filter) = args.iter().find(|a| !a.starts_with('-')) {
        if !"acceptance".contains(filter.as_str()) {
            return ExitCode::SUCCESS;
        }
    }

    let first = run_all();
    let mut unexpected = 0;
    for o in &first {
        let status = if o.pass { "PASS" } else { "FAIL" };
        let tag = if !o.pass && KNOWN_RED.contains(&o.id) { " [known]" } else { "" };
        println!("criterion {:>2}: {status}{tag}: {}", o.id, o.summary);
        for n in &o.notes {
            println!("              {n}");
        }
        if !o.pass && !KNOWN_RED.contains(&o.id) {
            unexpected += 1;
        }
    }

    let second = run_all();
    let differing: Vec<usize> = first.iter().zip(&second).filter(|(a, b)| a.digest != b.digest).map(|(a, _)| a.id).collect();
    let values: usize = first.iter().map(|o| o.digest.matches(',').count()).sum();
    let deterministic = differing.is_empty();
    println!(
        "criterion 11: {}: second run under seed {SEED} and {THREADS} threads, {values} recorded values, {}",
        if deterministic { "PASS" } else { "FAIL" },
        if deterministic { "bit-identical".to_string() } else { format!("criteria {differing:?} differ") }
    );
    if !deterministic {
        unexpected += 1;
    }

    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{unexpected} criteria failed unexpectedly");
        ExitCode::FAILURE
    }
}
