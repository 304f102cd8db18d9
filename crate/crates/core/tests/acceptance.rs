//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria 1–7 are exact properties checked against independent oracles and
//! decide the exit status. Criteria 8–13 reproduce published benchmark numbers
//! at reduced replication; their lines are reported but do not fail the run.
//!
//! `ACCEPTANCE_CRITERIA=1,4,7` restricts the run to the listed criteria.

use std::collections::BTreeSet;
use std::path::Path;
use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sparse_gemini::benchmark::{run_benchmark_with, BenchmarkConfig, CellResult, Suite};
use sparse_gemini::datagen::Scenario;
use sparse_gemini::gemini::{gemini_grad, gemini_value, mmd_gemini, ot_distance, Distance, GeminiSpec, Mode, OtSolver, OtSolverKind};
use sparse_gemini::geometry::{pairwise_affinity, AffinityMatrix, AffinitySpec, AffinityTag};
use sparse_gemini::io::{run_fit, write_features_csv, RunConfig};
use sparse_gemini::metrics::ari;
use sparse_gemini::nn::{soft_assign, softmax_backward, SkipConnectedModel};
use sparse_gemini::path::{PathConfig, Regime};
use sparse_gemini::sparsity::hier_prox;

struct Report {
    failed_gates: usize,
    failed_reports: usize,
}

impl Report {
    fn line(&mut self, id: usize, pass: bool, text: String) {
        println!("{} {id:>2}  {text}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            if id <= 7 {
                self.failed_gates += 1;
            } else {
                self.failed_reports += 1;
            }
        }
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box–Muller keeps the suite free of extra dependencies
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

// ---------------------------------------------------------------------------
// 1. Proximal operator against the one-dimensional profile.
// ---------------------------------------------------------------------------

/// Prox objective restricted to `‖v‖ = t` with the best `v` and `u` plugged in.
fn prox_profile(t: f64, b_norm: f64, a: &[f64], thr: f64, m: f64) -> f64 {
    let clipped: f64 = a.iter().map(|x| (x.abs() - m * t).max(0.0).powi(2)).sum();
    0.5 * (t - b_norm).powi(2) + thr * t + 0.5 * clipped
}

fn profile_minimum(b_norm: f64, a: &[f64], thr: f64, m: f64) -> f64 {
    let amax = a.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    let (mut lo, mut hi) = (0.0, b_norm + amax / m + 1.0);
    let f = |t: f64| prox_profile(t, b_norm, a, thr, m);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..300 {
        let x1 = hi - g * (hi - lo);
        let x2 = lo + g * (hi - lo);
        if f(x1) <= f(x2) {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    f(0.5 * (lo + hi)).min(f(0.0))
}

fn criterion_1(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let (mut worst_excess, mut worst_slack) = (f64::NEG_INFINITY, 0.0f64);
    for _ in 0..1000 {
        let k = rng.random_range(1..=5);
        let h = rng.random_range(1..=20);
        let thr = log_uniform(&mut rng, 1e-3, 1e2);
        let m = log_uniform(&mut rng, 1e-3, 1e2);
        let b = Array1::from_shape_fn(k, |_| normal(&mut rng));
        let a = Array1::from_shape_fn(h, |_| normal(&mut rng));
        let (v, u) = hier_prox(b.view(), a.view(), thr, m);
        let v_norm = v.dot(&v).sqrt();
        let obj = 0.5 * (&v - &b).mapv(|x| x * x).sum() + 0.5 * (&u - &a).mapv(|x| x * x).sum() + thr * v_norm;
        let oracle = profile_minimum(b.dot(&b).sqrt(), a.as_slice().unwrap(), thr, m);
        worst_excess = worst_excess.max(obj - oracle);
        let umax = u.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        worst_slack = worst_slack.max(umax - m * v_norm);
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst_excess <= 1e-9 && worst_slack <= 1e-12 && secs < 10.0;
    r.line(
        1,
        pass,
        format!(
            "hier-prox vs profile oracle, 1000 cases: max objective excess {worst_excess:.2e} (tol 1e-9), \
             max feasibility slack {worst_slack:.2e} (tol 1e-12), {secs:.2}s (limit 10s)"
        ),
    );
}

// ---------------------------------------------------------------------------
// 2. MMD estimator against direct quadratic forms.
// ---------------------------------------------------------------------------

fn naive_mmd(tau: &Array2<f64>, gram: &Array2<f64>, mode: Mode) -> f64 {
    let (n, k) = tau.dim();
    let mut mass = vec![0.0; k];
    for c in 0..k {
        for i in 0..n {
            mass[c] += tau[[i, c]];
        }
    }
    let alpha = |c: usize, i: usize| tau[[i, c]] / mass[c];
    let pi = |c: usize| mass[c] / n as f64;
    // MMD between weight vectors w1 and w2 = sqrt(Σ_ij (w1-w2)_i (w1-w2)_j G_ij)
    let dist = |w: &dyn Fn(usize) -> f64| {
        let mut q = 0.0;
        for i in 0..n {
            for j in 0..n {
                q += w(i) * w(j) * gram[[i, j]];
            }
        }
        q.max(0.0).sqrt()
    };
    let mut total = 0.0;
    match mode {
        Mode::Ova => {
            for c in 0..k {
                total += pi(c) * dist(&|i| alpha(c, i) - 1.0 / n as f64);
            }
        }
        Mode::Ovo => {
            for c in 0..k {
                for l in 0..k {
                    if c != l {
                        total += pi(c) * pi(l) * dist(&|i| alpha(c, i) - alpha(l, i));
                    }
                }
            }
        }
    }
    total
}

fn random_tau(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Array2<f64> {
    let logits = Array2::from_shape_fn((n, k), |_| 2.0 * normal(rng));
    soft_assign(logits.view()).unwrap()
}

fn criterion_2(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(2..=50);
        let k = rng.random_range(2..=5);
        let rank = rng.random_range(1..=n);
        let f = Array2::from_shape_fn((n, rank), |_| normal(&mut rng));
        let gram = f.dot(&f.t());
        let sym = Array2::from_shape_fn((n, n), |(i, j)| 0.5 * (gram[[i, j]] + gram[[j, i]]));
        let affinity = AffinityMatrix::new(sym.clone(), AffinityTag::Gram).unwrap();
        let tau = random_tau(&mut rng, n, k);
        for mode in [Mode::Ova, Mode::Ovo] {
            let got = mmd_gemini(tau.view(), &affinity, mode).unwrap();
            worst = worst.max((got - naive_mmd(&tau, &sym, mode)).abs());
        }
    }
    r.line(2, worst <= 1e-9, format!("MMD-GEMINI vs direct quadratic forms, 200 draws x 2 modes: max |diff| {worst:.2e} (tol 1e-9)"));
}

// ---------------------------------------------------------------------------
// 3. Exact transport against a generic LP solver.
// ---------------------------------------------------------------------------

/// Two-phase dense simplex with Bland's rule: min cᵀx, Ax = b, x ≥ 0, b ≥ 0.
fn lp_min(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> f64 {
    let (m, n) = (a.len(), c.len());
    let width = n + m + 1;
    let rhs = width - 1;
    let mut t = vec![vec![0.0; width]; m];
    for i in 0..m {
        t[i][..n].copy_from_slice(&a[i]);
        t[i][n + i] = 1.0;
        t[i][rhs] = b[i];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    fn pivot(t: &mut [Vec<f64>], basis: &mut [usize], row: usize, col: usize) {
        let p = t[row][col];
        for v in t[row].iter_mut() {
            *v /= p;
        }
        let pivot_row = t[row].clone();
        for (i, r) in t.iter_mut().enumerate() {
            if i != row && r[col] != 0.0 {
                let f = r[col];
                for (v, pv) in r.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
        basis[row] = col;
    }

    let run = |t: &mut Vec<Vec<f64>>, basis: &mut Vec<usize>, cost: &[f64], allowed: usize| loop {
        let enter = (0..allowed).find(|&j| {
            let z: f64 = cost[j] - basis.iter().enumerate().map(|(i, &bj)| cost[bj] * t[i][j]).sum::<f64>();
            z < -1e-12
        });
        let Some(j) = enter else { return };
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..t.len() {
            if t[i][j] > 1e-12 {
                let ratio = t[i][rhs] / t[i][j];
                if best.is_none_or(|(r0, _, b0)| ratio < r0 - 1e-15 || (ratio <= r0 + 1e-15 && basis[i] < b0)) {
                    best = Some((ratio, i, basis[i]));
                }
            }
        }
        let (_, row, _) = best.expect("bounded LP");
        pivot(t, basis, row, j);
    };

    let mut phase1 = vec![0.0; n + m];
    phase1[n..].fill(1.0);
    run(&mut t, &mut basis, &phase1, n + m);
    // drive remaining zero-level artificials out where possible
    for i in 0..m {
        if basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| t[i][j].abs() > 1e-9) {
                pivot(&mut t, &mut basis, i, j);
            }
        }
    }
    let mut phase2 = vec![0.0; n + m];
    phase2[..n].copy_from_slice(c);
    run(&mut t, &mut basis, &phase2, n);
    basis.iter().enumerate().map(|(i, &j)| phase2[j] * t[i][rhs]).sum()
}

fn transport_lp(cost: &Array2<f64>, w1: &Array1<f64>, w2: &Array1<f64>) -> f64 {
    let n = w1.len();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for i in 0..n {
        let mut row = vec![0.0; n * n];
        for j in 0..n {
            row[i * n + j] = 1.0;
        }
        rows.push(row);
        rhs.push(w1[i]);
    }
    for j in 0..n {
        let mut row = vec![0.0; n * n];
        for i in 0..n {
            row[i * n + j] = 1.0;
        }
        rows.push(row);
        rhs.push(w2[j]);
    }
    lp_min(&rows, &rhs, cost.as_slice().unwrap())
}

fn dirichlet(rng: &mut ChaCha8Rng, n: usize) -> Array1<f64> {
    let w = Array1::from_shape_fn(n, |_| -rng.random::<f64>().max(1e-300).ln());
    &w / w.sum()
}

fn criterion_3(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst_lp, mut worst_rel) = (0.0f64, 0.0f64);
    let entropic = OtSolver {
        kind: OtSolverKind::Entropic,
        epsilon_scale: 1e-3,
        max_iterations: 2_000_000,
        tolerance: 1e-10,
    };
    for _ in 0..200 {
        let n = rng.random_range(2..=8);
        let x = Array2::from_shape_fn((n, 2), |_| normal(&mut rng));
        let cost = pairwise_affinity(x.view(), &AffinitySpec::all(Distance::Wasserstein.affinity_kind())).unwrap();
        let (w1, w2) = (dirichlet(&mut rng, n), dirichlet(&mut rng, n));
        let exact = ot_distance(w1.view(), w2.view(), &cost, &OtSolver::exact()).unwrap().value;
        let lp = transport_lp(cost.values(), &w1, &w2);
        worst_lp = worst_lp.max((exact - lp).abs());
        let reg = ot_distance(w1.view(), w2.view(), &cost, &entropic).unwrap().value;
        worst_rel = worst_rel.max((reg - exact).abs() / exact.abs().max(1e-300));
    }
    r.line(
        3,
        worst_lp <= 1e-6 && worst_rel <= 0.05,
        format!(
            "exact OT vs LP oracle, 200 problems N<=8: max |diff| {worst_lp:.2e} (tol 1e-6); \
             entropic (eps = 1e-3 mean cost) max relative gap {:.2}% (tol 5%)",
            100.0 * worst_rel
        ),
    );
}

// ---------------------------------------------------------------------------
// 4. Full-objective gradient check through the network.
// ---------------------------------------------------------------------------

fn objective(model: &SkipConnectedModel, x: &Array2<f64>, affinity: &AffinityMatrix, spec: &GeminiSpec) -> f64 {
    let tau = soft_assign(model.forward(x.view()).unwrap().view()).unwrap();
    gemini_value(tau.view(), affinity, spec).unwrap()
}

fn gradient_error(spec: &GeminiSpec, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_fn((20, 6), |_| normal(&mut rng));
    let mut model = SkipConnectedModel::init(6, &[5], 3, 10.0, seed);
    model.skip.mapv_inplace(|_| 0.5 * normal(&mut rng));
    let affinity = pairwise_affinity(x.view(), &AffinitySpec::all(spec.distance.affinity_kind())).unwrap();

    let (logits, cache) = model.forward_cached(x.view()).unwrap();
    let tau = soft_assign(logits.view()).unwrap();
    let (_, grad_tau) = gemini_grad(tau.view(), &affinity, spec).unwrap();
    let grads = model.backward(&cache, softmax_backward(tau.view(), grad_tau.view()).view()).unwrap();
    let analytic: Vec<Vec<f64>> = grads.slices().iter().map(|s| s.to_vec()).collect();

    let h = 1e-5;
    let mut worst = 0.0f64;
    for (p, values) in analytic.iter().enumerate() {
        for (q, &g) in values.iter().enumerate() {
            let mut plus = model.clone();
            plus.param_slices_mut()[p][q] += h;
            let mut minus = model.clone();
            minus.param_slices_mut()[p][q] -= h;
            let fd = (objective(&plus, &x, &affinity, spec) - objective(&minus, &x, &affinity, spec)) / (2.0 * h);
            let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    worst
}

fn criterion_4(r: &mut Report) {
    let entropic = OtSolver {
        kind: OtSolverKind::Entropic,
        epsilon_scale: OtSolver::default().epsilon_scale,
        max_iterations: 1_000_000,
        tolerance: 1e-14,
    };
    let mut parts = Vec::new();
    let mut pass = true;
    for (distance, mode) in BenchmarkConfig::all_objectives() {
        let mut spec = GeminiSpec::new(distance, mode);
        let tol = match distance {
            Distance::Mmd => 1e-4,
            Distance::Wasserstein => {
                spec.solver = entropic;
                1e-3
            }
        };
        let err = gradient_error(&spec, 4);
        pass &= err <= tol;
        parts.push(format!("{} {err:.1e} (tol {tol:.0e})", spec.label()));
    }
    r.line(4, pass, format!("parameter gradients vs central differences, N=20 d=6 K=3: {}", parts.join(", ")));
}

// ---------------------------------------------------------------------------
// 5. Identical rows give zero GEMINI.
// ---------------------------------------------------------------------------

fn criterion_5(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = Array2::from_shape_fn((40, 4), |_| normal(&mut rng));
    let row = random_tau(&mut rng, 1, 3);
    let tau = row.broadcast((40, 3)).unwrap().to_owned();
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    let mut specs: Vec<GeminiSpec> = BenchmarkConfig::all_objectives().into_iter().map(|(d, m)| GeminiSpec::new(d, m)).collect();
    for mode in [Mode::Ova, Mode::Ovo] {
        let mut s = GeminiSpec::new(Distance::Wasserstein, mode);
        s.solver = OtSolver::entropic(0.05);
        specs.push(s);
    }
    for spec in specs {
        let affinity = pairwise_affinity(x.view(), &AffinitySpec::all(spec.distance.affinity_kind())).unwrap();
        let v = gemini_value(tau.view(), &affinity, &spec).unwrap();
        worst = worst.max(v.abs());
        let solver = if spec.distance == Distance::Wasserstein && spec.solver.kind == OtSolverKind::Entropic { "/entropic" } else { "" };
        parts.push(format!("{}{solver} {v:.1e}", spec.label()));
    }
    r.line(5, worst <= 1e-7, format!("identical-row assignments (tol 1e-7): {}", parts.join(", ")));
}

// ---------------------------------------------------------------------------
// 6. ARI against pair counting.
// ---------------------------------------------------------------------------

fn pair_counting_ari(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    let (mut both, mut sa, mut sb) = (0i128, 0i128, 0i128);
    for i in 0..n {
        for j in i + 1..n {
            let (x, y) = (a[i] == a[j], b[i] == b[j]);
            both += (x && y) as i128;
            sa += x as i128;
            sb += y as i128;
        }
    }
    let total = (n * (n - 1) / 2) as i128;
    // (both − sa·sb/total) / ((sa+sb)/2 − sa·sb/total), scaled by 2·total
    let num = 2 * (both * total - sa * sb);
    let den = (sa + sb) * total - 2 * sa * sb;
    if den == 0 {
        let same = (0..n).all(|i| (0..n).all(|j| (a[i] == a[j]) == (b[i] == b[j])));
        return if same { 1.0 } else { 0.0 };
    }
    num as f64 / den as f64
}

fn criterion_6(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut mismatches = 0;
    for _ in 0..500 {
        let n = rng.random_range(1..=30);
        let (ka, kb) = (rng.random_range(1..=6), rng.random_range(1..=6));
        let a: Vec<usize> = (0..n).map(|_| rng.random_range(0..ka)).collect();
        let b: Vec<usize> = (0..n).map(|_| rng.random_range(0..kb)).collect();
        if ari(&a, &b).unwrap().to_bits() != pair_counting_ari(&a, &b).to_bits() {
            mismatches += 1;
        }
    }
    r.line(6, mismatches == 0, format!("ARI vs pair-counting oracle, 500 partition pairs N<=30: {mismatches} mismatches (exact)"));
}

// ---------------------------------------------------------------------------
// 7. Determinism of the fit artifacts.
// ---------------------------------------------------------------------------

fn criterion_7(r: &mut Report, tmp: &Path) {
    let data = Suite::Dataset1(Scenario::S4).generate(0).unwrap();
    let csv = tmp.join("s4.csv");
    write_features_csv(&csv, &data).unwrap();
    let traces: Vec<Vec<u8>> = ["a", "b"]
        .iter()
        .map(|name| {
            let config = RunConfig {
                data: csv.clone(),
                truth: None,
                out: tmp.join(name),
                select: true,
                path: PathConfig {
                    f_thres: 5,
                    seed: 11,
                    ..PathConfig::default()
                },
            };
            run_fit(&config, false).unwrap();
            std::fs::read(tmp.join(name).join("path_trace.csv")).unwrap()
        })
        .collect();
    let same = traces[0] == traces[1];
    r.line(7, same, format!("two fits with identical config and seed: path_trace.csv byte-identical = {same} ({} bytes)", traces[0].len()));
}

// ---------------------------------------------------------------------------
// 8–13. Benchmark reproduction, data seed 0 and model seeds 0..4.
// ---------------------------------------------------------------------------

const RUNS: usize = 5;

fn bench(tmp: &Path, name: &str, suites: &[Suite], objectives: Vec<(Distance, Mode)>, regime: Regime) -> Vec<CellResult> {
    let config = BenchmarkConfig {
        suites: suites.to_vec(),
        objectives,
        runs: RUNS,
        base: PathConfig {
            regime,
            ..PathConfig::default()
        },
        data_seed: 0,
        first_model_seed: 0,
        workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
        out: tmp.join(name),
    };
    let cells = std::sync::Mutex::new(Vec::new());
    run_benchmark_with(&config, false, |c| {
        eprintln!("    {name}: {} {}-{:?} run {} ({:.1}s)", c.scenario, GeminiSpec::new(c.gemini, c.mode).label(), c.regime, c.run, c.seconds);
        cells.lock().unwrap().push(c.clone());
    })
    .unwrap();
    let mut cells = cells.into_inner().unwrap();
    cells.sort_by_key(|c| (c.scenario.clone(), c.run));
    cells
}

struct Column {
    ari: Vec<f64>,
    vser: Vec<f64>,
    cvr: Vec<f64>,
    n_var: Vec<f64>,
    exact: usize,
    failures: usize,
}

fn columns(cells: &[CellResult], informative: &BTreeSet<usize>) -> Column {
    let ok: Vec<_> = cells.iter().filter_map(|c| c.metrics.as_ref().map(|m| (m, c))).collect();
    Column {
        ari: ok.iter().map(|(m, _)| m.ari).collect(),
        vser: ok.iter().map(|(m, _)| m.vser).collect(),
        cvr: ok.iter().map(|(m, _)| m.cvr).collect(),
        n_var: ok.iter().map(|(m, _)| m.n_selected as f64).collect(),
        exact: ok.iter().filter(|(_, c)| c.selected.iter().copied().collect::<BTreeSet<_>>() == *informative).count(),
        failures: cells.len() - ok.len(),
    }
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ")
}

fn mmd_ovo() -> Vec<(Distance, Mode)> {
    vec![(Distance::Mmd, Mode::Ovo)]
}

fn criterion_8(r: &mut Report, tmp: &Path) {
    let c = columns(&bench(tmp, "c8", &[Suite::Dataset1(Scenario::S4)], mmd_ovo(), Regime::Static), &(0..5).collect());
    let med = median(&c.ari);
    let pass = c.failures == 0 && med >= 0.75 && c.exact >= 4;
    r.line(
        8,
        pass,
        format!(
            "S4 MMD-OvO static: median ARI {med:.3} (>= 0.75) [{}], exact informative set in {}/5 runs (>= 4), failures {}",
            fmt_list(&c.ari),
            c.exact,
            c.failures
        ),
    );
}

fn criterion_9(r: &mut Report, tmp: &Path) {
    let c = columns(&bench(tmp, "c9", &[Suite::Dataset1(Scenario::S2)], mmd_ovo(), Regime::Static), &(0..5).collect());
    let (vser, cvr, med) = (mean(&c.vser), mean(&c.cvr), median(&c.ari));
    let pass = c.failures == 0 && vser <= 0.05 && cvr >= 0.95 && med >= 0.70;
    r.line(
        9,
        pass,
        format!(
            "S2 MMD-OvO: mean VSER {vser:.3} (<= 0.05), mean CVR {cvr:.3} (>= 0.95), median ARI {med:.3} (>= 0.70) [{}], failures {}",
            fmt_list(&c.ari),
            c.failures
        ),
    );
}

fn criterion_10(r: &mut Report, tmp: &Path) {
    let c = columns(&bench(tmp, "c10", &[Suite::Dataset1(Scenario::S5)], mmd_ovo(), Regime::Static), &(0..5).collect());
    let (nvar, med) = (mean(&c.n_var), median(&c.ari));
    let pass = c.failures == 0 && (5.0..=6.0).contains(&nvar) && med >= 0.75;
    r.line(
        10,
        pass,
        format!(
            "S5 MMD-OvO: mean #Var {nvar:.2} (in [5, 6]), median ARI {med:.3} (>= 0.75) [{}], failures {}",
            fmt_list(&c.ari),
            c.failures
        ),
    );
}

fn criterion_11(r: &mut Report, tmp: &Path) {
    let c = columns(&bench(tmp, "c11", &[Suite::D2], mmd_ovo(), Regime::Static), &(0..2).collect());
    let (nvar, cvr, med) = (mean(&c.n_var), mean(&c.cvr), median(&c.ari));
    let pass = c.failures == 0 && (2.0..=3.0).contains(&nvar) && cvr <= 0.25 && med >= 0.45;
    r.line(
        11,
        pass,
        format!(
            "D2 MMD-OvO: mean #Var {nvar:.2} (in [2, 3]), mean CVR {cvr:.3} (<= 0.25), median ARI {med:.3} (>= 0.45) [{}], failures {}",
            fmt_list(&c.ari),
            c.failures
        ),
    );
}

fn criterion_12(r: &mut Report, tmp: &Path) {
    let objective = vec![(Distance::Wasserstein, Mode::Ova)];
    let suite = [Suite::Dataset1(Scenario::S4)];
    let dynamic = bench(tmp, "c12-dynamic", &suite, objective.clone(), Regime::Dynamic);
    let stat = bench(tmp, "c12-static", &suite, objective, Regime::Static);
    let ari_of = |cells: &[CellResult]| -> Vec<Option<f64>> {
        (0..RUNS).map(|run| cells.iter().find(|c| c.run == run).and_then(|c| c.metrics.as_ref()).map(|m| m.ari)).collect()
    };
    let (d, s) = (ari_of(&dynamic), ari_of(&stat));
    let d_ok: Vec<f64> = d.iter().flatten().copied().collect();
    let s_ok: Vec<f64> = s.iter().flatten().copied().collect();
    let wins = d.iter().zip(&s).filter(|(a, b)| matches!((a, b), (Some(a), Some(b)) if a > b)).count();
    let med = median(&d_ok);
    let pass = d_ok.len() == RUNS && s_ok.len() == RUNS && med >= 0.65 && wins >= 3;
    r.line(
        12,
        pass,
        format!(
            "S4 Wasserstein-OvA dynamic: median ARI {med:.3} (>= 0.65) [{}]; above same-seed static [{}] in {wins}/5 seeds (>= 3)",
            fmt_list(&d_ok),
            fmt_list(&s_ok)
        ),
    );
}

fn criterion_13(r: &mut Report, tmp: &Path) {
    let suites = [Suite::Dataset1(Scenario::S1), Suite::Dataset1(Scenario::S3)];
    let cells = bench(tmp, "c13", &suites, BenchmarkConfig::all_objectives(), Regime::Static);
    let failures = cells.iter().filter(|c| c.metrics.is_none()).count();
    let summary = tmp.join("c13").join("benchmark_summary.csv");
    let rows = std::fs::read_to_string(&summary).map(|s| s.lines().count().saturating_sub(1)).unwrap_or(0);
    let pass = failures == 0 && rows == 8;
    let mut parts = Vec::new();
    for suite in ["S1", "S3"] {
        for (d, m) in BenchmarkConfig::all_objectives() {
            let a: Vec<f64> = cells
                .iter()
                .filter(|c| c.scenario == suite && c.gemini == d && c.mode == m)
                .filter_map(|c| c.metrics.as_ref().map(|m| m.ari))
                .collect();
            parts.push(format!("{suite} {} {:.2}", GeminiSpec::new(d, m).label(), mean(&a)));
        }
    }
    r.line(
        13,
        pass,
        format!(
            "S1/S3 benchmark, 4 objectives x 5 runs: {} cells, {failures} failures, {rows} summary rows (mean ARI: {})",
            cells.len(),
            parts.join(", ")
        ),
    );
}

fn main() {
    let only: Option<BTreeSet<usize>> = std::env::var("ACCEPTANCE_CRITERIA")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |id: usize| only.as_ref().is_none_or(|set| set.contains(&id));
    let tmp = tempfile::tempdir().expect("temporary directory");
    let mut report = Report {
        failed_gates: 0,
        failed_reports: 0,
    };
    let start = Instant::now();
    type Check = fn(&mut Report, &Path);
    let checks: [(usize, Check); 13] = [
        (1, |r, _| criterion_1(r)),
        (2, |r, _| criterion_2(r)),
        (3, |r, _| criterion_3(r)),
        (4, |r, _| criterion_4(r)),
        (5, |r, _| criterion_5(r)),
        (6, |r, _| criterion_6(r)),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
        (11, criterion_11),
        (12, criterion_12),
        (13, criterion_13),
    ];
    for (id, check) in checks {
        if wanted(id) {
            let t = Instant::now();
            check(&mut report, tmp.path());
            eprintln!("    criterion {id} took {:.1}s", t.elapsed().as_secs_f64());
        }
    }
    println!(
        "acceptance: {} property failures, {} reproduction failures ({:.0}s)",
        report.failed_gates,
        report.failed_reports,
        start.elapsed().as_secs_f64()
    );
    if report.failed_gates > 0 {
        std::process::exit(1);
    }
}
