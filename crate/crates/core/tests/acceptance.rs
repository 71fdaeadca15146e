//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero if any fails.

use std::alloc::{GlobalAlloc, Layout, System};
use std::cell::Cell;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use treechol::bench::{self, Command, RunSpec};
use treechol::flops::cholesky_flops;
use treechol::generate::SplitMix64;
use treechol::mtx::{parse_matrix_market, write_matrix_market, MtxError};
use treechol::report::write_csv;
use treechol::*;

struct CountingAlloc;

thread_local! {
    static COUNTING: Cell<bool> = const { Cell::new(false) };
    static ALLOCATIONS: Cell<usize> = const { Cell::new(0) };
}

unsafe impl GlobalAlloc for CountingAlloc {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        note_allocation();
        System.alloc(layout)
    }

    unsafe fn alloc_zeroed(&self, layout: Layout) -> *mut u8 {
        note_allocation();
        System.alloc_zeroed(layout)
    }

    unsafe fn realloc(&self, ptr: *mut u8, layout: Layout, new_size: usize) -> *mut u8 {
        note_allocation();
        System.realloc(ptr, layout, new_size)
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        System.dealloc(ptr, layout)
    }
}

fn note_allocation() {
    let _ = COUNTING.try_with(|on| {
        if on.get() {
            let _ = ALLOCATIONS.try_with(|n| n.set(n.get() + 1));
        }
    });
}

#[global_allocator]
static GLOBAL: CountingAlloc = CountingAlloc;

/// Allocations made by this thread while `f` runs.
fn count_allocations<R>(f: impl FnOnce() -> R) -> (R, usize) {
    ALLOCATIONS.with(|n| n.set(0));
    COUNTING.with(|on| on.set(true));
    let r = f();
    COUNTING.with(|on| on.set(false));
    (r, ALLOCATIONS.with(Cell::get))
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn config(s: &str) -> PrecisionConfig {
    parse_precision_config(s).unwrap()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

/// Unblocked textbook Cholesky in double precision, the oracle for criterion 1.
fn reference_cholesky(a: &Matrix) -> Matrix {
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    l
}

fn lower_relative_difference(x: &Matrix, reference: &Matrix) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for j in 0..x.cols() {
        for i in j..x.rows() {
            num += (x[(i, j)] - reference[(i, j)]).powi(2);
            den += reference[(i, j)].powi(2);
        }
    }
    (num / den).sqrt()
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = SplitMix64::new(2024);
    let mut worst = 0.0f64;
    let mut worst_case = (0, 0);
    for case in 0..50 {
        let n = 1 + (rng.next_u64() % 256) as usize;
        let leaf = [1, 2, 7, 32, n][case % 5];
        let a = spd_generate(n, rng.next_u64());
        let mut l = a.clone();
        factorize(l.view_mut(), &config("[F64]"), &SolverOptions::default().with_leaf_size(leaf), &mut NoTally)
            .unwrap();
        let d = lower_relative_difference(&l, &reference_cholesky(&a));
        if d > worst || d.is_nan() {
            worst = d;
            worst_case = (n, leaf);
        }
    }
    let elapsed = start.elapsed();
    Outcome {
        pass: worst <= 1e-13 && elapsed < Duration::from_secs(60),
        detail: format!(
            "50 cases, worst relative difference {worst:.2e} at n={} b={} (limit 1e-13), {:.1}s",
            worst_case.0,
            worst_case.1,
            elapsed.as_secs_f64()
        ),
    }
}

struct Ladder {
    medians: Vec<(String, f64, f64)>,
    elapsed: Duration,
}

impl Ladder {
    fn digits(&self, c: &str) -> f64 {
        self.medians.iter().find(|m| m.0 == c).unwrap().1
    }

    fn rel_error(&self, c: &str) -> f64 {
        self.medians.iter().find(|m| m.0 == c).unwrap().2
    }
}

fn run_ladder() -> Ladder {
    let names = ["Pure F64", "[F16, F32, F64]", "Pure F32", "[F16, F32]", "Pure F16", "[F16, F16, F16, F32]"];
    let configs: Vec<_> = names.iter().map(|c| config(c)).collect();
    let seeds: Vec<u64> = (1..=10).collect();
    let start = Instant::now();
    let reports = accuracy_sweep(&[1024], &configs, 64, &seeds, true).unwrap();
    let elapsed = start.elapsed();
    let medians = names
        .iter()
        .map(|&name| {
            let rs: Vec<_> = reports.iter().filter(|r| r.config.to_string() == name).collect();
            assert!(rs.iter().all(|r| r.status == Status::Ok), "{name} failed");
            (
                name.to_owned(),
                median(rs.iter().map(|r| r.digits).collect()),
                median(rs.iter().map(|r| r.rel_error).collect()),
            )
        })
        .collect();
    Ladder { medians, elapsed }
}

fn accuracy_ladder(ladder: &Ladder) -> Outcome {
    let f64_ = ladder.digits("Pure F64");
    let mixed3 = ladder.digits("[F16, F32, F64]");
    let f32_ = ladder.digits("Pure F32");
    let mixed = ladder.digits("[F16, F32]");
    let f16 = ladder.digits("Pure F16");
    let checks = [
        ("Pure F64 >= 14", f64_ >= 14.0),
        ("Pure F32 in [6, 10]", (6.0..=10.0).contains(&f32_)),
        ("[F16, F32] in [5, 9]", (5.0..=9.0).contains(&mixed)),
        ("Pure F16 < 4", f16 < 4.0),
        ("F64 > [F16, F32, F64]", f64_ > mixed3),
        ("[F16, F32, F64] > Pure F32", mixed3 > f32_),
        ("Pure F32 >= [F16, F32]", f32_ >= mixed),
        ("[F16, F32] > Pure F16", mixed > f16),
        ("runtime < 10 min", ladder.elapsed < Duration::from_secs(600)),
    ];
    let failed: Vec<_> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    Outcome {
        pass: failed.is_empty(),
        detail: format!(
            "median digits F64 {f64_:.2}, [F16,F32,F64] {mixed3:.2}, F32 {f32_:.2}, [F16,F32] {mixed:.2}, F16 {f16:.2}; \
             {:.1}s{}",
            ladder.elapsed.as_secs_f64(),
            if failed.is_empty() {
                String::new()
            } else {
                format!("; violated: {}", failed.join(", "))
            }
        ),
    }
}

fn hundredfold_claim(ladder: &Ladder) -> Outcome {
    let deep = ladder.rel_error("[F16, F16, F16, F32]");
    let half = ladder.rel_error("Pure F16");
    Outcome {
        pass: deep <= half / 50.0,
        detail: format!(
            "median rel_error [F16,F16,F16,F32] {deep:.3e} vs Pure F16 {half:.3e}: {:.0}x better (need 50x)",
            half / deep
        ),
    }
}

fn quantization_ablation() -> Outcome {
    let a = scaled_spd(256, 1, 3.0 * 65504.0);
    let cfg = config("[F16, F32]");
    let opts = SolverOptions::default().with_leaf_size(64);
    let on = run_factorization(&a, &cfg, &opts, Some(1)).unwrap();
    let off = run_factorization(&a, &cfg, &opts.with_quantize(false), Some(1)).unwrap();
    Outcome {
        pass: on.status == Status::Ok && off.status == Status::NumericalBreakdown,
        detail: format!(
            "max off-diagonal {:.0}: quantize on -> {} ({:.2} digits), off -> {} ({})",
            a.max_abs_off_diagonal(),
            on.status,
            on.digits,
            off.status,
            off.diagnostic.unwrap_or_default()
        ),
    }
}

fn extreme_range_failure() -> Outcome {
    let a = extreme_range_spd(256, 1);
    let range = dynamic_range(&a);
    let half_configs = [
        "Pure F16",
        "[F16, F32]",
        "[F16, F64]",
        "[F16, F32, F64]",
        "[F16, F16, F32]",
        "[F16, F16, F16, F32]",
    ];
    let mut ok = range >= 1e11;
    let mut sample = String::new();
    for c in half_configs {
        for quantize in [true, false] {
            let opts = SolverOptions::default().with_leaf_size(64).with_quantize(quantize);
            let r = catch_unwind(|| run_factorization(&a, &config(c), &opts, None).unwrap());
            match r {
                Ok(r) if r.status == Status::NumericalBreakdown => {
                    let d = r.diagnostic.unwrap();
                    ok &= d.contains("underflow");
                    if c == "[F16, F32]" && quantize {
                        sample = d;
                    }
                }
                _ => ok = false,
            }
        }
    }
    let double = run_factorization(&a, &config("Pure F64"), &SolverOptions::default(), None).unwrap();
    ok &= double.status == Status::Ok;

    // the same matrix through the Matrix Market path
    let path = std::env::temp_dir().join(format!("treechol-extreme-{}.mtx", std::process::id()));
    let mut buf = Vec::new();
    write_matrix_market(&a, &mut buf).unwrap();
    std::fs::write(&path, buf).unwrap();
    let mut spec = RunSpec::new(Command::Mtx, 256, config("[F16, F32]"), 0);
    spec.mtx_path = Some(path.clone());
    let via_file = bench::run_mtx(&spec).map(|r| r.status);
    spec.configs = vec![config("Pure F64")];
    let via_file_double = bench::run_mtx(&spec).map(|r| r.status);
    std::fs::remove_file(path).ok();
    ok &= matches!(via_file, Ok(Status::NumericalBreakdown)) && matches!(via_file_double, Ok(Status::Ok));

    Outcome {
        pass: ok,
        detail: format!(
            "dynamic range {range:.1e}; {} Half-bearing runs break down, Pure F64 {} ({:.1} digits); e.g. {sample}",
            2 * half_configs.len(),
            double.status,
            double.digits
        ),
    }
}

fn flop_accounting() -> Outcome {
    let start = Instant::now();
    let mut ok = true;
    let configs = [config("Pure F64"), config("[F16, F32]"), config("[F16, F16, F32, F64]")];
    for n in 1..=64usize {
        let exact = {
            let n = n as u64;
            // n^3/3 + n^2/2 + n/6 = (2n^3 + 3n^2 + n) / 6
            let six = 2 * n * n * n + 3 * n * n + n;
            assert_eq!(six % 6, 0);
            six / 6
        };
        for b in 1..=n {
            for c in &configs {
                let planned = flop_breakdown(n, b, c);
                ok &= planned.total() == exact;
                let mut a = spd_generate(n, 3);
                let mut counted = FlopBreakdown::default();
                factorize(a.view_mut(), c, &SolverOptions::default().with_leaf_size(b), &mut counted).unwrap();
                ok &= counted == planned;
            }
        }
    }
    assert_eq!(cholesky_flops(4), 30);
    let big = flop_breakdown(65536, 256, &config("Pure F64"));
    let off = big.off_diagonal_fraction();
    ok &= off > 0.6;
    let depth_fractions: Vec<f64> = [
        "Pure F32",
        "[F16, F32]",
        "[F16, F16, F32]",
        "[F16, F16, F16, F32]",
        "[F16, F16, F16, F16, F32]",
        "[F16, F16, F16, F16, F16, F32]",
        "[F16, F16, F16, F16, F16, F16, F32]",
    ]
    .iter()
    .map(|c| flop_breakdown(65536, 256, &config(c)).level_fraction(PrecisionLevel::Half))
    .collect();
    let monotone = depth_fractions.windows(2).all(|w| w[0] < w[1]);
    ok &= monotone;
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(60);
    Outcome {
        pass: ok,
        detail: format!(
            "totals exact and static == instrumented for n <= 64, all b; off-diagonal share at 65536/256 {:.4}%; \
             Half share by depth {}; {:.1}s",
            100.0 * off,
            depth_fractions.iter().map(|f| format!("{:.1}%", 100.0 * f)).collect::<Vec<_>>().join(" < "),
            elapsed.as_secs_f64()
        ),
    }
}

fn in_place_guarantee() -> Outcome {
    let mut worst = 0;
    let mut runs = 0;
    let cases = [
        ("Pure F64", 256, true),
        ("[F16, F32]", 256, true),
        ("[F16, F16, F32, F64]", 300, true),
        ("Pure F16", 200, false),
    ];
    for (c, n, quantize) in cases {
        let cfg = config(c);
        let opts = SolverOptions::default().with_leaf_size(32).with_quantize(quantize);
        let mut a = scaled_spd(n, 5, 2.0 * 65504.0);
        if c == "Pure F16" {
            a = spd_generate(n, 5);
        }
        let mut flops = FlopBreakdown::default();
        let tree = build_tree(a.view_mut(), &cfg, opts.leaf_size, opts.quantize).unwrap();
        let mut ctx = SolveContext::for_tree(&tree, opts, &mut flops);
        let (result, allocations) = count_allocations(|| tree_potrf(tree.root(), a.view_mut(), &mut ctx));
        result.unwrap();
        worst = worst.max(allocations);
        runs += 1;
    }
    // failures must not allocate either
    let mut a = extreme_range_spd(128, 2);
    let cfg = config("[F16, F32]");
    let opts = SolverOptions::default().with_leaf_size(32);
    let tree = build_tree(a.view_mut(), &cfg, opts.leaf_size, opts.quantize).unwrap();
    let mut tally = NoTally;
    let mut ctx = SolveContext::for_tree(&tree, opts, &mut tally);
    let (result, allocations) = count_allocations(|| tree_potrf(tree.root(), a.view_mut(), &mut ctx));
    let broke = matches!(result, Err(SolverError::NumericalBreakdown(_)));
    worst = worst.max(allocations);
    runs += 1;

    // sanity: the counter does see allocations
    let (_, probe) = count_allocations(|| std::hint::black_box(vec![0u8; 16]));
    Outcome {
        pass: worst == 0 && broke && probe > 0,
        detail: format!("{runs} tree_potrf runs (one failing), at most {worst} heap allocations during a run"),
    }
}

/// Random edits of well-formed Matrix Market files.
fn fuzz_input(rng: &mut SplitMix64) -> String {
    const TEMPLATES: [&str; 4] = [
        "%%MatrixMarket matrix coordinate real symmetric\n% comment\n3 3 4\n1 1 4\n2 1 1\n2 2 3\n3 3 2\n",
        "%%MatrixMarket matrix array real symmetric\n2 2\n4.0\n-1.5e0\n3\n",
        "%%MatrixMarket matrix coordinate integer general\n2 2 4\n1 1 5\n1 2 1\n2 1 1\n2 2 5\n",
        "%%MatrixMarket matrix array real general\n2 2\n2\n0\n0\n2\n",
    ];
    const PIECES: [&str; 20] = [
        "0", "-1", "99999999999999999999", "1e999", "nan", "inf", "%", "\n", " ", "complex", "pattern", "array",
        "symmetric", "hermitian", "3", "65", "1.5", "-0", "%%MatrixMarket", "\t",
    ];
    let mut s: Vec<u8> = TEMPLATES[(rng.next_u64() % 4) as usize].as_bytes().to_vec();
    let edits = 1 + rng.next_u64() % 4;
    for _ in 0..edits {
        let pos = if s.is_empty() { 0 } else { (rng.next_u64() as usize) % (s.len() + 1) };
        match rng.next_u64() % 6 {
            0 if !s.is_empty() && pos < s.len() => {
                s.remove(pos);
            }
            1 => {
                let piece = PIECES[(rng.next_u64() % PIECES.len() as u64) as usize];
                s.splice(pos..pos, piece.bytes());
            }
            2 => s.truncate(pos),
            3 if pos < s.len() => s[pos] = (rng.next_u64() % 256) as u8,
            4 => {
                let copy = s.clone();
                s.extend_from_slice(&copy[pos.min(copy.len())..]);
            }
            _ => {
                let d = b'0' + (rng.next_u64() % 10) as u8;
                s.insert(pos.min(s.len()), d);
            }
        }
    }
    String::from_utf8_lossy(&s).into_owned()
}

fn determinism_and_robustness() -> Outcome {
    // identical specs, identical numbers
    let mut spec = RunSpec::new(Command::Sweep, 96, config("[F16, F32]"), 1);
    spec.sizes = vec![96, 160];
    spec.configs = vec![config("Pure F64"), config("[F16, F16, F32]"), config("Pure F16")];
    spec.seeds = vec![1, 2];
    spec.leaf = 16;
    let strip_wall = |reports: &[FactorReport]| {
        let mut buf = Vec::new();
        write_csv(reports, &mut buf).unwrap();
        String::from_utf8(buf)
            .unwrap()
            .lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_owned())
            .collect::<Vec<_>>()
    };
    let first = bench::run_sweep(&spec).unwrap();
    let second = bench::run_sweep(&spec).unwrap();
    let mut same = strip_wall(&first) == strip_wall(&second)
        && first
            .iter()
            .zip(&second)
            .all(|(x, y)| x.rel_error.to_bits() == y.rel_error.to_bits() && x.flops == y.flops);
    for c in ["[F16, F32]", "[F16, F16, F16, F32]"] {
        let a = spd_generate(200, 9);
        let (mut x, mut y) = (a.clone(), a.clone());
        let opts = SolverOptions::default().with_leaf_size(24);
        factorize(x.view_mut(), &config(c), &opts, &mut NoTally).unwrap();
        factorize(y.view_mut(), &config(c), &opts, &mut NoTally).unwrap();
        same &= x.as_slice().iter().zip(y.as_slice()).all(|(p, q)| p.to_bits() == q.to_bits());
    }

    // fuzzed Matrix Market input; panics are caught and counted, so keep
    // their messages off the report
    let default_hook = std::panic::take_hook();
    std::panic::set_hook(Box::new(|_| {}));
    let mut rng = SplitMix64::new(8);
    let (mut parsed, mut parse_errors, mut unsupported, mut too_large, mut panics) = (0, 0, 0, 0, 0);
    for _ in 0..1000 {
        let text = fuzz_input(&mut rng);
        let outcome = catch_unwind(AssertUnwindSafe(|| {
            let r = parse_matrix_market(text.as_bytes(), 64);
            if let Ok(a) = &r {
                if bench::relative_asymmetry(a) <= bench::SYMMETRY_TOLERANCE {
                    for c in ["Pure F64", "[F16, F32]"] {
                        let _ = run_factorization(a, &config(c), &SolverOptions::default().with_leaf_size(2), None);
                    }
                }
            }
            r
        }));
        match outcome {
            Ok(Ok(_)) => parsed += 1,
            Ok(Err(MtxError::Parse { .. })) => parse_errors += 1,
            Ok(Err(MtxError::UnsupportedFormat(_))) => unsupported += 1,
            Ok(Err(MtxError::TooLarge { .. })) => too_large += 1,
            Ok(Err(MtxError::Io(_))) => parse_errors += 1,
            Err(_) => panics += 1,
        }
    }
    std::panic::set_hook(default_hook);
    Outcome {
        pass: same && panics == 0,
        detail: format!(
            "repeat runs bit-identical: {same}; fuzz 1000 inputs: {parsed} parsed, {parse_errors} parse errors, \
             {unsupported} unsupported, {too_large} too large, {panics} panics"
        ),
    }
}

fn main() {
    let ladder = run_ladder();
    let results = [
        ("1 oracle equivalence", oracle_equivalence()),
        ("2 accuracy ladder", accuracy_ladder(&ladder)),
        ("3 100x accuracy claim", hundredfold_claim(&ladder)),
        ("4 quantization ablation", quantization_ablation()),
        ("5 extreme-range failure mode", extreme_range_failure()),
        ("6 flop accounting", flop_accounting()),
        ("7 in-place guarantee", in_place_guarantee()),
        ("8 determinism & robustness", determinism_and_robustness()),
    ];
    let mut failures = 0;
    for (name, outcome) in &results {
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        println!("criterion {name}: {verdict} - {}", outcome.detail);
        failures += usize::from(!outcome.pass);
    }
    println!("acceptance: {} passed, {failures} failed", results.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
